//! Command dispatch for the `hfscatter` binary.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::amplitude::HighFrequencyAmplitude;
use crate::config::{Command, Format, InitProfile, RunConfig};
use crate::cross_sections::{
    classical_sigma, integrate_sphere_weighted, transport_limit_planar, QuadratureSpec, Weight,
};
use crate::error::{Error, Result};
use crate::geometry::{angle_from_incident, ConvexSurface, ReflectionInverter, Vec2, Vec3};
use crate::mie::{mie_coefficients, required_polar_nodes, sweep, transport_exact};
use crate::output::{fmt_f64, to_json, ErrorRecord, Table};
use crate::shape_opt::{optimize_profile, OptimizeOptions, RadialProfile};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

/// Output of one command: the artifact body plus human-readable summary
/// lines (sent to stderr and the sidecar log, never into the artifact).
#[derive(Debug, Clone)]
pub struct Artifact {
    pub body: String,
    pub summary: Vec<String>,
}

fn emit<T: Serialize>(format: Format, table: &Table, json: &T, summary: Vec<String>) -> Artifact {
    let body = match format {
        Format::Csv => table.to_csv(),
        Format::Json => to_json(json),
    };
    Artifact { body, summary }
}

#[derive(Serialize)]
struct DensityRow {
    theta: [f64; 3],
    angle: f64,
    density: f64,
    f_re: f64,
    f_im: f64,
}

// Closed bodies: uniform directions. Graphs: reflections of uniform planar
// points, so every direction lies in the image of the cap.
fn random_directions(cfg: &RunConfig) -> Result<Vec<Vec3>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let guard = cfg.spec.forward_guard;
    let mut out = Vec::with_capacity(cfg.n_points);
    while out.len() < cfg.n_points {
        let theta = match cfg.surface {
            ConvexSurface::Graph { .. } => {
                let s: f64 = rng.gen_range(0.0..0.95);
                let phi: f64 = rng.gen_range(0.0..2.0 * PI);
                cfg.surface.reflection_direction(&cfg.surface.domain().polar_point(s, phi))?
            }
            _ => {
                let z: f64 = rng.gen_range(-1.0..1.0);
                let phi: f64 = rng.gen_range(0.0..2.0 * PI);
                let r = (1.0 - z * z).sqrt();
                Vec3::new(r * phi.cos(), r * phi.sin(), z)
            }
        };
        if angle_from_incident(&theta) > 10.0 * guard {
            out.push(theta);
        }
    }
    Ok(out)
}

fn density(cfg: &RunConfig) -> Result<Artifact> {
    let inverter = ReflectionInverter::with_guard(&cfg.surface, cfg.spec.forward_guard);
    let hf = HighFrequencyAmplitude::with_inverter(inverter, cfg.gamma);
    let mut table = Table::new(
        &["theta_x", "theta_y", "theta_z", "angle", "density", "f_re", "f_im"],
        "density=a^2 amplitude=a angle=rad",
    );
    let mut rows = Vec::new();
    for theta in random_directions(cfg)? {
        let s = hf.sample(&theta, cfg.k).map_err(|e| Error::NodeEvaluation {
            theta: [theta.x, theta.y, theta.z],
            source: Box::new(e),
        })?;
        let row = DensityRow {
            theta: [s.theta.x, s.theta.y, s.theta.z],
            angle: angle_from_incident(&s.theta),
            density: s.density,
            f_re: s.f.re,
            f_im: s.f.im,
        };
        table.push(
            [row.theta[0], row.theta[1], row.theta[2], row.angle, row.density, row.f_re, row.f_im]
                .iter()
                .map(|v| fmt_f64(*v))
                .collect(),
        );
        rows.push(row);
    }
    let summary = vec![format!("density: {} directions, k = {}", rows.len(), cfg.k)];
    Ok(emit(cfg.format, &table, &rows, summary))
}

#[derive(Serialize)]
struct CrossSectionRecord {
    surface_id: String,
    gamma: crate::impedance::Impedance,
    quantity: &'static str,
    value: f64,
    est_error: f64,
    nodes: usize,
}

fn record_table(records: &[CrossSectionRecord]) -> Table {
    let mut table = Table::new(&["surface_id", "gamma", "quantity", "value", "est_error", "nodes"], "a^2");
    for r in records {
        table.push(vec![
            r.surface_id.clone(),
            r.gamma.to_string(),
            r.quantity.to_string(),
            fmt_f64(r.value),
            fmt_f64(r.est_error),
            r.nodes.to_string(),
        ]);
    }
    table
}

fn cross_section(cfg: &RunConfig) -> Result<Artifact> {
    let surface = &cfg.surface;
    if matches!(surface, ConvexSurface::Graph { .. }) {
        return Err(Error::Domain(
            "cross-section integrates over the direction sphere and needs a sphere or ellipsoid; \
             use transport-limit for graph surfaces"
                .into(),
        ));
    }
    let inverter = ReflectionInverter::with_guard(surface, cfg.spec.forward_guard);
    let hf = HighFrequencyAmplitude::with_inverter(inverter, cfg.gamma);
    let r = integrate_sphere_weighted(|t| hf.density(t), cfg.weight, &cfg.spec)?;
    let quantity = match cfg.weight {
        Weight::Transport => "transport_hf_angular",
        Weight::Total => "sigma_hf_angular",
    };
    let records = vec![
        CrossSectionRecord {
            surface_id: cfg.id.clone(),
            gamma: cfg.gamma,
            quantity,
            value: r.value,
            est_error: r.est_error,
            nodes: r.nodes(false),
        },
        CrossSectionRecord {
            surface_id: cfg.id.clone(),
            gamma: cfg.gamma,
            quantity: "classical_sigma",
            value: classical_sigma(surface),
            est_error: 0.0,
            nodes: 0,
        },
    ];
    let summary = vec![format!("{quantity} = {} ± {:.3e}", r.value, r.est_error)];
    Ok(emit(cfg.format, &record_table(&records), &records, summary))
}

fn transport_limit(cfg: &RunConfig) -> Result<Artifact> {
    let r = transport_limit_planar(&cfg.surface, cfg.gamma, &cfg.spec)?;
    let records = vec![CrossSectionRecord {
        surface_id: cfg.id.clone(),
        gamma: cfg.gamma,
        quantity: "transport_limit_planar",
        value: r.value,
        est_error: r.est_error,
        nodes: r.nodes(true),
    }];
    let summary = vec![format!("transport_limit_planar = {} ± {:.3e}", r.value, r.est_error)];
    Ok(emit(cfg.format, &record_table(&records), &records, summary))
}

fn mie_sweep(cfg: &RunConfig) -> Result<Artifact> {
    let report = sweep(&cfg.ka_grid, cfg.gamma, &cfg.spec)?;
    let mut table = Table::new(
        &["ka", "sigma_scat", "sigma_ext", "sigma_abs", "transport", "l_max", "est_error"],
        "a^2",
    );
    for r in &report.records {
        table.push(vec![
            fmt_f64(r.ka),
            fmt_f64(r.sigma_scat),
            fmt_f64(r.sigma_ext),
            fmt_f64(r.sigma_abs),
            fmt_f64(r.transport),
            r.l_max.to_string(),
            fmt_f64(r.est_error),
        ]);
    }
    let summary = vec![
        format!("mie-sweep: {} points, gamma = {}", report.records.len(), cfg.gamma),
        format!("c_emp = {} (c_emp / pi = {})", report.c_emp, report.c_emp / PI),
    ];
    Ok(emit(cfg.format, &table, &report, summary))
}

#[derive(Serialize)]
struct LimitRow {
    ka: f64,
    transport_exact: f64,
    transport_limit: f64,
    rel_error: f64,
    limit_est_error: f64,
}

fn limit_check(cfg: &RunConfig) -> Result<Artifact> {
    if !matches!(cfg.surface, ConvexSurface::Sphere { .. }) {
        return Err(Error::Domain("limit-check compares against the exact sphere solution; use kind = sphere".into()));
    }
    // the exact solution is computed for a = 1; results are in units of a²
    let unit = ConvexSurface::sphere(1.0)?;
    let limit = transport_limit_planar(&unit, cfg.gamma, &cfg.spec)?;
    let mut rows = Vec::with_capacity(cfg.ka_grid.len());
    for &ka in &cfg.ka_grid {
        let spec = QuadratureSpec { n_polar: cfg.spec.n_polar.max(required_polar_nodes(ka)), ..cfg.spec };
        let exact = mie_coefficients(ka, cfg.gamma, None)
            .and_then(|sol| transport_exact(&sol, &spec))
            .map_err(|e| Error::SweepPoint { ka, source: Box::new(e) })?;
        rows.push(LimitRow {
            ka,
            transport_exact: exact,
            transport_limit: limit.value,
            rel_error: (exact / limit.value - 1.0).abs(),
            limit_est_error: limit.est_error,
        });
    }
    let mut table =
        Table::new(&["ka", "transport_exact", "transport_limit", "rel_error", "limit_est_error"], "a^2");
    for r in &rows {
        table.push(
            [r.ka, r.transport_exact, r.transport_limit, r.rel_error, r.limit_est_error].iter().map(|v| fmt_f64(*v)).collect(),
        );
    }
    let summary = rows
        .iter()
        .map(|r| format!("limit-check ka = {}: relative error {:.3e}", r.ka, r.rel_error))
        .collect();
    Ok(emit(cfg.format, &table, &rows, summary))
}

#[derive(Serialize)]
struct JacobianRow {
    x1: f64,
    x2: f64,
    jacobian: f64,
    four_k: f64,
    ratio: f64,
}

fn jacobian_check(cfg: &RunConfig) -> Result<Artifact> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let domain = cfg.surface.domain();
    let mut rows = Vec::with_capacity(cfg.n_points);
    for _ in 0..cfg.n_points {
        // away from the pole (degenerate φ) and the rim
        let s: f64 = rng.gen_range(0.1..0.85);
        let phi: f64 = rng.gen_range(0.0..2.0 * PI);
        let x: Vec2 = domain.polar_point(s, phi);
        let jac = cfg.surface.reflection_jacobian_numeric(&x, cfg.step)?;
        let four_k = 4.0 * cfg.surface.gauss_curvature(&x)?;
        rows.push(JacobianRow { x1: x.x, x2: x.y, jacobian: jac, four_k, ratio: jac.abs() / four_k });
    }
    let worst = rows.iter().map(|r| (r.ratio - 1.0).abs()).fold(0.0, f64::max);
    let mut table = Table::new(&["x1", "x2", "jacobian", "four_k", "ratio"], "x=a curvature=a^-2");
    for r in &rows {
        table.push([r.x1, r.x2, r.jacobian, r.four_k, r.ratio].iter().map(|v| fmt_f64(*v)).collect());
    }
    let summary = vec![format!("jacobian-check: {} points, max |ratio - 1| = {worst:.3e}", rows.len())];
    Ok(emit(cfg.format, &table, &rows, summary))
}

fn optimize(cfg: &RunConfig) -> Result<Artifact> {
    let o = &cfg.optimize;
    let start = match &o.init {
        InitProfile::Paraboloid => {
            let rho_max = o.rho_max;
            RadialProfile::from_fn(o.cells, rho_max, o.constraints, |r| r / rho_max)?
        }
        InitProfile::Constant(u) => RadialProfile::uniform(o.cells, o.rho_max, *u, o.constraints)?,
        InitProfile::File(path) => RadialProfile::load(path, o.constraints)?,
    };
    // any starting shape is first moved onto the constraint set
    let init = start.project()?;
    let options = OptimizeOptions { goal: o.goal, tol: o.tol, max_iterations: o.max_iterations, ..Default::default() };
    let report = optimize_profile(&init, cfg.gamma, &options)?;
    let mut table = Table::new(&["rho", "u"], "rho=a u=1");
    let (rho, u) = (report.profile.rho(), report.profile.slopes());
    for (i, r) in rho.iter().enumerate() {
        table.push(vec![fmt_f64(*r), fmt_f64(u[i.min(u.len() - 1)])]);
    }
    let summary = vec![format!(
        "optimize: objective {} -> {} in {} iterations (converged: {}, projected-gradient norm {:.3e})",
        report.objective_trace[0],
        report.final_objective(),
        report.iterations,
        report.converged,
        report.projected_gradient_norm
    )];
    Ok(emit(cfg.format, &table, &report, summary))
}

/// Runs one command and returns its artifact.
pub fn run(cfg: &RunConfig) -> Result<Artifact> {
    match cfg.command {
        Command::Density => density(cfg),
        Command::CrossSection => cross_section(cfg),
        Command::TransportLimit => transport_limit(cfg),
        Command::MieSweep => mie_sweep(cfg),
        Command::LimitCheck => limit_check(cfg),
        Command::JacobianCheck => jacobian_check(cfg),
        Command::Optimize => optimize(cfg),
    }
}

fn sidecar_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".log");
    PathBuf::from(name)
}

fn unix_seconds() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

fn write_output(cfg: &RunConfig, body: &str) -> Result<()> {
    match &cfg.output {
        Some(path) => std::fs::write(path, body)?,
        None => print!("{body}"),
    }
    Ok(())
}

/// Runs a command, writes its artifact (or a structured error record) and
/// the timestamped sidecar log, and returns the process exit status.
pub fn execute(cfg: &RunConfig) -> i32 {
    let started = unix_seconds();
    let clock = Instant::now();
    let outcome = run(cfg);
    let (status, mut log) = match &outcome {
        Ok(artifact) => {
            for line in &artifact.summary {
                eprintln!("{line}");
            }
            let code = match write_output(cfg, &artifact.body) {
                Ok(()) => EXIT_OK,
                Err(e) => {
                    eprintln!("error: {e}");
                    EXIT_USAGE
                }
            };
            (code, artifact.summary.clone())
        }
        Err(e) => {
            eprintln!("error [{}]: {e}", e.kind());
            let record = ErrorRecord::new(e);
            let body = match cfg.format {
                Format::Csv => record.to_csv(),
                Format::Json => record.to_json(),
            };
            let code = match write_output(cfg, &body) {
                Ok(()) => EXIT_NUMERICAL,
                Err(_) => EXIT_USAGE,
            };
            let code = if matches!(e, Error::Parse(_) | Error::Io(_)) { EXIT_USAGE } else { code };
            (code, vec![format!("error [{}]: {e}", e.kind())])
        }
    };
    if let Some(path) = &cfg.output {
        log.insert(0, format!("command = {}", cfg.command.name()));
        log.insert(1, format!("started_unix = {started:.3}"));
        log.push(format!("finished_unix = {:.3}", unix_seconds()));
        log.push(format!("elapsed_s = {:.3}", clock.elapsed().as_secs_f64()));
        log.push(format!("exit_status = {status}"));
        if let Err(e) = std::fs::write(sidecar_path(path), log.join("\n") + "\n") {
            eprintln!("warning: could not write log: {e}");
        }
    }
    status
}

//! Run configuration: flat `key = value` files, overridable from the
//! command line.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::cross_sections::{QuadratureSpec, Weight};
use crate::error::{Error, Result};
use crate::geometry::{ConvexSurface, Domain, HeightField};
use crate::impedance::Impedance;
use crate::mie::log_grid;
use crate::shape_opt::{Goal, ProfileConstraints};

const KNOWN_KEYS: &[&str] = &[
    "command", "id", "kind", "radius", "semi_axes", "curvature", "slope", "height", "domain", "profile",
    "gamma", "k", "ka", "ka_grid", "n_polar", "n_azimuth", "n_planar", "eps_fwd", "weight", "output",
    "format", "seed", "n_points", "step", "goal", "lower", "upper", "monotone", "budget", "volume", "cells",
    "rho_max", "init", "max_iter", "tol",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Density,
    CrossSection,
    TransportLimit,
    MieSweep,
    LimitCheck,
    JacobianCheck,
    Optimize,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Density => "density",
            Command::CrossSection => "cross-section",
            Command::TransportLimit => "transport-limit",
            Command::MieSweep => "mie-sweep",
            Command::LimitCheck => "limit-check",
            Command::JacobianCheck => "jacobian-check",
            Command::Optimize => "optimize",
        }
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "density" => Command::Density,
            "cross-section" => Command::CrossSection,
            "transport-limit" => Command::TransportLimit,
            "mie-sweep" => Command::MieSweep,
            "limit-check" => Command::LimitCheck,
            "jacobian-check" => Command::JacobianCheck,
            "optimize" => Command::Optimize,
            other => return Err(Error::Parse(format!("unknown command '{other}'"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Parse(format!("format must be csv or json, got '{other}'"))),
        }
    }
}

/// Starting point of a profile optimization.
#[derive(Debug, Clone, PartialEq)]
pub enum InitProfile {
    /// u(ρ) = ρ/ρ_max on a uniform grid (a paraboloid cap).
    Paraboloid,
    /// Constant slope on a uniform grid.
    Constant(f64),
    /// Two-column `rho,u` CSV file.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeSettings {
    pub goal: Goal,
    pub constraints: ProfileConstraints,
    pub cells: usize,
    pub rho_max: f64,
    pub init: InitProfile,
    pub max_iterations: usize,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    /// Label written into output records.
    pub id: String,
    pub surface: ConvexSurface,
    pub gamma: Impedance,
    /// Wavenumber for the amplitude phase (1/length).
    pub k: f64,
    pub ka_grid: Vec<f64>,
    pub spec: QuadratureSpec,
    pub weight: Weight,
    pub output: Option<PathBuf>,
    pub format: Format,
    pub seed: u64,
    pub n_points: usize,
    /// Finite-difference step for the Jacobian check.
    pub step: f64,
    pub optimize: OptimizeSettings,
}

/// Parses `key = value` lines; `#` starts a comment, blank lines are
/// ignored, dashes in keys are read as underscores.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {}: expected key = value, got '{line}'", n + 1)))?;
        let key = normalize_key(key);
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(Error::Parse(format!("line {}: unknown key '{key}'", n + 1)));
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

pub fn normalize_key(key: &str) -> String {
    key.trim().replace('-', "_").to_ascii_lowercase()
}

/// Reads `a,b` numeric rows, skipping a non-numeric header and comments.
pub fn parse_two_column_csv(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut rows = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut cols = line.split(',').map(str::trim);
        let (Some(a), Some(b)) = (cols.next(), cols.next()) else {
            return Err(Error::Parse(format!("csv line {}: expected two columns", n + 1)));
        };
        match (a.parse::<f64>(), b.parse::<f64>()) {
            (Ok(x), Ok(y)) => rows.push((x, y)),
            _ if rows.is_empty() && n == 0 => continue,
            _ => return Err(Error::Parse(format!("csv line {}: non-numeric values '{line}'", n + 1))),
        }
    }
    if rows.is_empty() {
        return Err(Error::Parse("csv contains no data rows".into()));
    }
    Ok(rows)
}

fn numbers(key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| Error::Parse(format!("{key}: invalid number '{v}'"))))
        .collect()
}

fn fixed<const N: usize>(key: &str, value: &str) -> Result<[f64; N]> {
    let v = numbers(key, value)?;
    v.try_into().map_err(|_| Error::Parse(format!("{key}: expected {N} comma-separated numbers, got '{value}'")))
}

fn parse_domain(value: &str) -> Result<Domain> {
    let (tag, rest) = value
        .split_once(':')
        .ok_or_else(|| Error::Parse(format!("domain: expected disk:R, ellipse:a,b or rect:x0,x1,y0,y1, got '{value}'")))?;
    let domain = match tag.trim() {
        "disk" => Domain::Disk { radius: fixed::<1>("domain", rest)?[0] },
        "ellipse" => {
            let [a, b] = fixed("domain", rest)?;
            Domain::Ellipse { a, b }
        }
        "rect" | "rectangle" => {
            let [x_min, x_max, y_min, y_max] = fixed("domain", rest)?;
            Domain::Rectangle { x_min, x_max, y_min, y_max }
        }
        other => return Err(Error::Parse(format!("domain: unknown shape '{other}'"))),
    };
    domain.validate().map_err(|e| Error::Parse(e.to_string()))?;
    Ok(domain)
}

/// `lo:hi:n` (log-spaced, inclusive) or a comma-separated list.
pub fn parse_ka_grid(value: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = value.split(':').collect();
    let grid = if parts.len() == 3 {
        let lo = parts[0].trim().parse::<f64>();
        let hi = parts[1].trim().parse::<f64>();
        let n = parts[2].trim().parse::<usize>();
        match (lo, hi, n) {
            (Ok(lo), Ok(hi), Ok(n)) => log_grid(lo, hi, n).map_err(|e| Error::Parse(e.to_string()))?,
            _ => return Err(Error::Parse(format!("ka_grid: expected lo:hi:n, got '{value}'"))),
        }
    } else {
        numbers("ka_grid", value)?
    };
    if grid.iter().any(|k| !(*k > 0.0 && k.is_finite())) {
        return Err(Error::Parse("ka_grid: values must be positive".into()));
    }
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Parse("ka_grid: values must be sorted".into()));
    }
    Ok(grid)
}

struct Lookup<'a> {
    map: &'a BTreeMap<String, String>,
}

impl Lookup<'_> {
    fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| Error::Parse(format!("missing required key '{key}'")))
    }

    fn parse<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse::<T>().map_err(|_| Error::Parse(format!("{key}: invalid value '{v}'"))),
        }
    }

    fn number(&self, key: &str, default: f64) -> Result<f64> {
        self.parse(key, default)
    }

    fn flag(&self, key: &str, default: bool) -> Result<bool> {
        match self.get(key).map(|v| v.to_ascii_lowercase()) {
            None => Ok(default),
            Some(v) if ["true", "yes", "1", "on"].contains(&v.as_str()) => Ok(true),
            Some(v) if ["false", "no", "0", "off"].contains(&v.as_str()) => Ok(false),
            Some(v) => Err(Error::Parse(format!("{key}: expected true or false, got '{v}'"))),
        }
    }
}

fn build_surface(l: &Lookup<'_>) -> Result<ConvexSurface> {
    let kind = l.get("kind").unwrap_or("sphere");
    let domain = || -> Result<Domain> { l.get("domain").map_or(Ok(Domain::Disk { radius: 1.0 }), parse_domain) };
    let surface = match kind {
        "sphere" => ConvexSurface::sphere(l.number("radius", 1.0)?),
        "ellipsoid" => {
            let [a, b, c] = fixed("semi_axes", l.require("semi_axes")?)?;
            ConvexSurface::ellipsoid(a, b, c)
        }
        "paraboloid" => {
            let [k1, k2] = fixed("curvature", l.get("curvature").unwrap_or("1,1"))?;
            ConvexSurface::graph(HeightField::Paraboloid { k1, k2 }, domain()?)
        }
        "plane" => ConvexSurface::graph(HeightField::Plane { height: l.number("height", 0.0)? }, domain()?),
        "cone" => ConvexSurface::graph(HeightField::Cone { slope: l.number("slope", 1.0)? }, domain()?),
        "radial" => {
            let path = Path::new(l.require("profile")?);
            let rows = parse_two_column_csv(&std::fs::read_to_string(&path)?)?;
            let (rho, g): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
            ConvexSurface::radial_profile(rho, g)
        }
        other => return Err(Error::Parse(format!("kind: unknown surface kind '{other}'"))),
    };
    surface.map_err(|e| Error::Parse(e.to_string()))
}

impl RunConfig {
    /// Builds a configuration from merged key/value pairs. Relative file
    /// paths resolve against the working directory.
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        let l = Lookup { map };
        let command: Command = l.require("command")?.parse()?;
        let surface = build_surface(&l)?;
        let gamma: Impedance = l.get("gamma").unwrap_or("inf").parse()?;

        let ka_grid = match (l.get("ka_grid"), l.get("ka")) {
            (Some(g), _) => parse_ka_grid(g)?,
            (None, Some(k)) => parse_ka_grid(k)?,
            (None, None) => match command {
                Command::MieSweep => return Err(Error::Parse("mie-sweep needs ka_grid".into())),
                _ => vec![80.0],
            },
        };

        let defaults = QuadratureSpec::default();
        let spec = QuadratureSpec {
            n_polar: l.parse("n_polar", defaults.n_polar)?,
            n_azimuth: l.parse("n_azimuth", defaults.n_azimuth)?,
            n_planar: l.parse("n_planar", defaults.n_planar)?,
            forward_guard: l.number("eps_fwd", defaults.forward_guard)?,
        };
        spec.validate().map_err(|e| Error::Parse(e.to_string()))?;

        let weight = match l.get("weight").unwrap_or("transport") {
            "transport" => Weight::Transport,
            "total" => Weight::Total,
            other => return Err(Error::Parse(format!("weight must be total or transport, got '{other}'"))),
        };

        let budget = l.get("budget").map(|v| v.parse::<f64>()).transpose();
        let volume = l.get("volume").map(|v| v.parse::<f64>()).transpose();
        let (Ok(height_budget), Ok(volume_budget)) = (budget, volume) else {
            return Err(Error::Parse("budget and volume must be numbers".into()));
        };
        let constraints = ProfileConstraints {
            lower: l.number("lower", 0.0)?,
            upper: l.number("upper", f64::INFINITY)?,
            monotone: l.flag("monotone", true)?,
            height_budget,
            volume_budget,
        };
        let init = match l.get("init") {
            None | Some("paraboloid") => InitProfile::Paraboloid,
            Some(v) => match v.parse::<f64>() {
                Ok(u) => InitProfile::Constant(u),
                Err(_) => InitProfile::File(PathBuf::from(v)),
            },
        };
        let optimize = OptimizeSettings {
            goal: l.get("goal").unwrap_or("min").parse()?,
            constraints,
            cells: l.parse("cells", 200)?,
            rho_max: l.number("rho_max", 1.0)?,
            init,
            max_iterations: l.parse("max_iter", 20_000)?,
            tol: l.number("tol", 1e-8)?,
        };

        let k = l.number("k", 1.0)?;
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::Parse(format!("k must be positive, got {k}")));
        }
        let step = l.number("step", 1e-5)?;
        if !(step > 0.0) {
            return Err(Error::Parse(format!("step must be positive, got {step}")));
        }

        Ok(Self {
            command,
            id: l.get("id").unwrap_or(surface.kind_name()).to_string(),
            surface,
            gamma,
            k,
            ka_grid,
            spec,
            weight,
            output: l.get("output").map(PathBuf::from),
            format: l.get("format").unwrap_or("csv").parse()?,
            seed: l.parse("seed", 0)?,
            n_points: l.parse("n_points", 100)?,
            step,
            optimize,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_dashes() {
        let map = parse_key_values("# run\ncommand = mie-sweep\nka-grid = 0.1:100:400  # grid\n\ngamma=1\n").unwrap();
        let cfg = RunConfig::from_map(&map).unwrap();
        assert_eq!(cfg.command, Command::MieSweep);
        assert_eq!(cfg.ka_grid.len(), 400);
        assert_eq!(cfg.gamma.value(), 1.0);
        assert_eq!(cfg.format, Format::Csv);
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        assert!(parse_key_values("colour = red").is_err());
        assert!(parse_key_values("command").is_err());
        let map = parse_key_values("command = mie-sweep").unwrap();
        assert!(RunConfig::from_map(&map).is_err());
        assert!(parse_ka_grid("3,2").is_err());
        assert!(parse_ka_grid("0:1:4").is_err());
    }

    #[test]
    fn builds_graph_surfaces() {
        let map = parse_key_values("command = transport-limit\nkind = paraboloid\ncurvature = 1, 2\ndomain = rect:-1,1,-0.5,0.5").unwrap();
        let cfg = RunConfig::from_map(&map).unwrap();
        assert_eq!(cfg.surface.domain().area(), 2.0);
        let map = parse_key_values("command = density\nkind = ellipsoid\nsemi_axes = 1,1.3,0.7").unwrap();
        assert_eq!(RunConfig::from_map(&map).unwrap().surface.kind_name(), "ellipsoid");
    }

    #[test]
    fn two_column_csv_skips_header() {
        let rows = parse_two_column_csv("rho,u\n0,1\n0.5,2\n").unwrap();
        assert_eq!(rows, vec![(0.0, 1.0), (0.5, 2.0)]);
        assert!(parse_two_column_csv("rho,u\n").is_err());
        assert!(parse_two_column_csv("0,1\nx,2\n").is_err());
    }
}

//! Optimization of the high-frequency transport functional over convex,
//! rotationally symmetric illuminated caps.
//!
//! The decision variable is the slope field `u(ρ) = |g'(ρ)|`, piecewise
//! constant on the cells of a radial grid. Convexity of the cap becomes
//! a nondecreasing `u`, and the functional reads
//! `J(u) = 2π ∫ φ_γ(u(ρ)) ρ dρ`, integrated exactly cell by cell.
//!
//! Gradients and projections use the cell-area metric
//! `⟨a, b⟩ = Σ area_i a_i b_i`, which makes the descent rate uniform in ρ.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::impedance::Impedance;

/// Transport integrand φ_γ(u) = 2/(1+u²) · ((γ√(1+u²) − 1)/(γ√(1+u²) + 1))²
/// and its derivative in `u`.
pub fn integrand_phi(gamma: Impedance, u: f64) -> (f64, f64) {
    let q = 1.0 + u * u;
    let base = 2.0 / q;
    let dbase = -4.0 * u / (q * q);
    if gamma.is_dirichlet() || gamma.is_neumann() {
        return (base, dbase);
    }
    let g = gamma.value();
    let s = q.sqrt();
    let b = (g * s - 1.0) / (g * s + 1.0);
    let db = 2.0 * g / (g * s + 1.0).powi(2) * (u / s);
    (base * b * b, dbase * b * b + base * 2.0 * b * db)
}

/// Slope at which the integrand vanishes: √(1/γ² − 1) for 0 < γ ≤ 1.
pub fn zero_transport_slope(gamma: Impedance) -> Option<f64> {
    let g = gamma.value();
    if gamma.is_neumann() || gamma.is_dirichlet() || g > 1.0 {
        return None;
    }
    Some((1.0 / (g * g) - 1.0).max(0.0).sqrt())
}

/// Constraint set for slope profiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileConstraints {
    pub lower: f64,
    pub upper: f64,
    /// Nondecreasing slopes (convex cap).
    pub monotone: bool,
    /// Σ u_i Δρ_i, the rise of the cap from axis to rim.
    pub height_budget: Option<f64>,
    /// π Σ u_i (ρ_{i+1}³ − ρ_i³)/3, the volume between the cap and its rim plane.
    pub volume_budget: Option<f64>,
}

impl Default for ProfileConstraints {
    fn default() -> Self {
        Self { lower: 0.0, upper: f64::INFINITY, monotone: true, height_budget: None, volume_budget: None }
    }
}

impl ProfileConstraints {
    fn validate(&self) -> Result<()> {
        if !(self.lower >= 0.0) || self.lower.is_infinite() || !(self.upper >= self.lower) {
            return Err(Error::Feasibility(format!(
                "slope bounds [{}, {}] must satisfy 0 <= lower <= upper",
                self.lower, self.upper
            )));
        }
        if self.height_budget.is_some() && self.volume_budget.is_some() {
            return Err(Error::Feasibility("set at most one of the height and volume budgets".into()));
        }
        if let Some(h) = self.height_budget.or(self.volume_budget) {
            if !h.is_finite() {
                return Err(Error::Feasibility(format!("budget must be finite, got {h}")));
            }
        }
        Ok(())
    }

    // Coefficients a and target H of the linear budget Σ a_i u_i = H.
    fn budget(&self, rho: &[f64]) -> Option<(Vec<f64>, f64)> {
        if let Some(h) = self.height_budget {
            return Some((rho.windows(2).map(|w| w[1] - w[0]).collect(), h));
        }
        self.volume_budget.map(|v| {
            let a = rho.windows(2).map(|w| PI * (w[1].powi(3) - w[0].powi(3)) / 3.0).collect();
            (a, v)
        })
    }
}

/// Largest violation of each constraint family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstraintResiduals {
    pub bounds: f64,
    pub monotone: f64,
    pub budget: f64,
}

impl ConstraintResiduals {
    pub fn max(&self) -> f64 {
        self.bounds.max(self.monotone).max(self.budget)
    }
}

/// Piecewise-constant slope profile on `0 = ρ_0 < … < ρ_N = ρ_max`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialProfile {
    rho: Vec<f64>,
    slopes: Vec<f64>,
    constraints: ProfileConstraints,
}

impl RadialProfile {
    pub fn new(rho: Vec<f64>, slopes: Vec<f64>, constraints: ProfileConstraints) -> Result<Self> {
        if rho.len() < 2 || slopes.len() + 1 != rho.len() {
            return Err(Error::Parse(format!(
                "profile needs N+1 >= 2 radial nodes and N slopes, got {} nodes and {} slopes",
                rho.len(),
                slopes.len()
            )));
        }
        if rho[0] != 0.0 || rho.windows(2).any(|w| !(w[1] > w[0])) || !rho[rho.len() - 1].is_finite() {
            return Err(Error::Parse("profile grid must start at 0 and increase strictly".into()));
        }
        if slopes.iter().any(|u| !u.is_finite()) {
            return Err(Error::Parse("profile slopes must be finite".into()));
        }
        constraints.validate()?;
        Ok(Self { rho, slopes, constraints })
    }

    /// Constant slope on a uniform grid of `cells` cells over `[0, rho_max]`.
    pub fn uniform(cells: usize, rho_max: f64, slope: f64, constraints: ProfileConstraints) -> Result<Self> {
        if cells == 0 || !(rho_max > 0.0) {
            return Err(Error::Parse(format!("need cells >= 1 and rho_max > 0, got {cells}, {rho_max}")));
        }
        let rho = (0..=cells).map(|i| rho_max * i as f64 / cells as f64).collect();
        Self::new(rho, vec![slope; cells], constraints)
    }

    /// Uniform grid with slopes sampled from `f` at cell midpoints.
    pub fn from_fn<F: Fn(f64) -> f64>(
        cells: usize,
        rho_max: f64,
        constraints: ProfileConstraints,
        f: F,
    ) -> Result<Self> {
        let mut p = Self::uniform(cells, rho_max, 0.0, constraints)?;
        let mids: Vec<f64> = p.rho.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        p.slopes = mids.into_iter().map(f).collect();
        if p.slopes.iter().any(|u| !u.is_finite()) {
            return Err(Error::Parse("profile slopes must be finite".into()));
        }
        Ok(p)
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn constraints(&self) -> &ProfileConstraints {
        &self.constraints
    }

    pub fn with_constraints(mut self, constraints: ProfileConstraints) -> Result<Self> {
        constraints.validate()?;
        self.constraints = constraints;
        Ok(self)
    }

    pub fn rho_max(&self) -> f64 {
        self.rho[self.rho.len() - 1]
    }

    pub fn widths(&self) -> Vec<f64> {
        self.rho.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// ρ_mid·Δρ = (ρ_{i+1}² − ρ_i²)/2 per cell.
    pub fn cell_areas(&self) -> Vec<f64> {
        self.rho.windows(2).map(|w| 0.5 * (w[1] - w[0]) * (w[1] + w[0])).collect()
    }

    /// Σ u_i Δρ_i.
    pub fn height(&self) -> f64 {
        self.slopes.iter().zip(self.widths()).map(|(u, w)| u * w).sum()
    }

    /// Volume enclosed between the cap and the plane through its rim.
    pub fn volume(&self) -> f64 {
        // g(R) − g(ρ) = ∫_ρ^R u, so V = π ∫ u(s) s² ds
        self.slopes
            .iter()
            .zip(self.rho.windows(2))
            .map(|(u, w)| PI * u * (w[1].powi(3) - w[0].powi(3)) / 3.0)
            .sum()
    }

    pub fn residuals(&self) -> ConstraintResiduals {
        let c = &self.constraints;
        let bounds = self
            .slopes
            .iter()
            .map(|&u| (c.lower - u).max(u - c.upper).max(0.0))
            .fold(0.0, f64::max);
        let monotone = if c.monotone {
            self.slopes.windows(2).map(|w| (w[0] - w[1]).max(0.0)).fold(0.0, f64::max)
        } else {
            0.0
        };
        let budget = match (c.height_budget, c.volume_budget) {
            (Some(h), _) => (self.height() - h).abs(),
            (None, Some(v)) => (self.volume() - v).abs(),
            (None, None) => 0.0,
        };
        ConstraintResiduals { bounds, monotone, budget }
    }

    pub fn is_feasible(&self, tol: f64) -> bool {
        self.residuals().max() <= tol
    }

    /// Euclidean projection (cell-area metric) onto the constraint set.
    pub fn project(&self) -> Result<RadialProfile> {
        let projector = Projector::new(self)?;
        let slopes = projector.project(&self.slopes)?;
        Ok(Self { slopes, ..self.clone() })
    }

    /// Writes `rho,u` rows; the last row repeats the rim cell's slope.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rho,u\n");
        for (i, r) in self.rho.iter().enumerate() {
            let u = self.slopes[i.min(self.slopes.len() - 1)];
            let _ = writeln!(out, "{},{}", crate::output::fmt_f64(*r), crate::output::fmt_f64(u));
        }
        out
    }

    /// Reads the format written by [`RadialProfile::to_csv`]; the slope on the
    /// last row is ignored.
    pub fn from_csv(text: &str, constraints: ProfileConstraints) -> Result<Self> {
        let rows = crate::config::parse_two_column_csv(text)?;
        let rho: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let slopes: Vec<f64> = rows.iter().take(rows.len().saturating_sub(1)).map(|r| r.1).collect();
        Self::new(rho, slopes, constraints)
    }

    pub fn load(path: &Path, constraints: ProfileConstraints) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?, constraints)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// J(u) = 2π Σ φ_γ(u_i) ρ_mid,i Δρ_i, exact for piecewise-constant slopes.
pub fn objective_radial(profile: &RadialProfile, gamma: Impedance) -> f64 {
    2.0 * PI
        * profile
            .slopes
            .iter()
            .zip(profile.cell_areas())
            .map(|(&u, a)| integrand_phi(gamma, u).0 * a)
            .sum::<f64>()
}

/// Weighted pool-adjacent-violators: the nondecreasing sequence closest to
/// `y` in the weighted least-squares sense.
pub fn isotonic_regression(y: &[f64], w: &[f64]) -> Vec<f64> {
    assert_eq!(y.len(), w.len());
    // (weight, weighted mean, cells)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(y.len());
    for (&yi, &wi) in y.iter().zip(w) {
        blocks.push((wi, yi, 1));
        while blocks.len() > 1 {
            let (w1, m1, n1) = blocks[blocks.len() - 1];
            let (w0, m0, n0) = blocks[blocks.len() - 2];
            if m0 <= m1 {
                break;
            }
            blocks.pop();
            let wt = w0 + w1;
            *blocks.last_mut().unwrap() = (wt, (w0 * m0 + w1 * m1) / wt, n0 + n1);
        }
    }
    let mut out = Vec::with_capacity(y.len());
    for (_, m, n) in blocks {
        out.extend(std::iter::repeat(m).take(n));
    }
    out
}

/// Exact projection onto bounds ∩ monotone ∩ linear budget.
///
/// Clamping the isotonic fit projects onto bounds ∩ monotone; the budget
/// hyperplane Σ a_i u_i = H is handled through its scalar multiplier λ,
/// found by bisection on the nonincreasing map λ ↦ Σ a_i P(y − λ W⁻¹a)_i.
struct Projector {
    areas: Vec<f64>,
    budget: Option<(Vec<f64>, f64)>,
    constraints: ProfileConstraints,
}

impl Projector {
    fn new(profile: &RadialProfile) -> Result<Self> {
        let c = profile.constraints;
        let budget = c.budget(&profile.rho);
        if let Some((a, h)) = &budget {
            let total: f64 = a.iter().sum();
            let (lo, hi) = (c.lower * total, c.upper * total);
            if *h < lo - 1e-12 * total || *h > hi + 1e-12 * total {
                return Err(Error::Feasibility(format!(
                    "budget {h} outside the range [{lo}, {hi}] allowed by the slope bounds"
                )));
            }
        }
        Ok(Self { areas: profile.cell_areas(), budget, constraints: c })
    }

    fn project_box_monotone(&self, y: &[f64]) -> Vec<f64> {
        let c = &self.constraints;
        let fitted = if c.monotone { isotonic_regression(y, &self.areas) } else { y.to_vec() };
        fitted.into_iter().map(|v| v.clamp(c.lower, c.upper)).collect()
    }

    fn project(&self, y: &[f64]) -> Result<Vec<f64>> {
        let base = self.project_box_monotone(y);
        let Some((coef, h)) = &self.budget else {
            return Ok(base);
        };
        let h = *h;
        let level = |u: &[f64]| u.iter().zip(coef).map(|(a, b)| a * b).sum::<f64>();
        let tol = 1e-13 * h.abs().max(1.0);
        if (level(&base) - h).abs() <= tol {
            return Ok(base);
        }
        let dir: Vec<f64> = coef.iter().zip(&self.areas).map(|(a, w)| a / w).collect();
        let shifted = |lambda: f64| -> Vec<f64> {
            let z: Vec<f64> = y.iter().zip(&dir).map(|(v, d)| v - lambda * d).collect();
            self.project_box_monotone(&z)
        };
        let excess = |lambda: f64| level(&shifted(lambda)) - h;

        let mut lo = 0.0;
        let mut hi = 0.0;
        let mut step = 1.0;
        if excess(0.0) > 0.0 {
            while excess(hi) > 0.0 {
                lo = hi;
                hi += step;
                step *= 2.0;
                if !hi.is_finite() {
                    return Err(Error::Feasibility("budget cannot be met".into()));
                }
            }
        } else {
            while excess(lo) < 0.0 {
                hi = lo;
                lo -= step;
                step *= 2.0;
                if !lo.is_finite() {
                    return Err(Error::Feasibility("budget cannot be met".into()));
                }
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if excess(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let out = if excess(lo).abs() <= excess(hi).abs() { shifted(lo) } else { shifted(hi) };
        let reached = level(&out);
        if (reached - h).abs() > 1e-10 * h.abs().max(1.0) {
            return Err(Error::Feasibility(format!("projection reached {reached} for budget {h}")));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Goal {
    Minimize,
    Maximize,
}

impl std::str::FromStr for Goal {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "min" | "minimize" => Ok(Goal::Minimize),
            "max" | "maximize" => Ok(Goal::Maximize),
            other => Err(Error::Parse(format!("goal must be min or max, got '{other}'"))),
        }
    }
}

/// Fixed step `scale / L` (L: Lipschitz estimate of the gradient), halved
/// whenever a trial step would move the objective the wrong way.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepSchedule {
    pub scale: f64,
    pub max_halvings: usize,
}

impl Default for StepSchedule {
    fn default() -> Self {
        Self { scale: 0.1, max_halvings: 60 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimizeOptions {
    pub goal: Goal,
    pub schedule: StepSchedule,
    /// Stop when the projected-gradient RMS norm falls to this value.
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self { goal: Goal::Minimize, schedule: StepSchedule::default(), tol: 1e-8, max_iterations: 20_000 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimizeReport {
    pub gamma: Impedance,
    pub goal: Goal,
    /// Objective at the initial profile followed by one entry per accepted step.
    pub objective_trace: Vec<f64>,
    pub profile: RadialProfile,
    pub projected_gradient_norm: f64,
    pub residuals: ConstraintResiduals,
    pub iterations: usize,
    pub converged: bool,
    pub step_size: f64,
}

impl OptimizeReport {
    pub fn final_objective(&self) -> f64 {
        *self.objective_trace.last().unwrap()
    }
}

fn lipschitz_estimate(gamma: Impedance, lower: f64, upper: f64) -> f64 {
    let hi = if upper.is_finite() { upper } else { lower + 50.0 };
    let samples = 4096;
    let h = ((hi - lower) / samples as f64).max(1e-6);
    let mut best: f64 = 0.0;
    let mut prev = integrand_phi(gamma, lower).1;
    for i in 1..=samples {
        let u = lower + h * i as f64;
        let d = integrand_phi(gamma, u).1;
        best = best.max(((d - prev) / h).abs());
        prev = d;
    }
    2.0 * PI * best.max(1e-12)
}

/// Projected gradient descent (or ascent) of [`objective_radial`] from a
/// feasible initial profile.
pub fn optimize_profile(init: &RadialProfile, gamma: Impedance, options: &OptimizeOptions) -> Result<OptimizeReport> {
    let residuals = init.residuals();
    if residuals.max() > 1e-9 {
        return Err(Error::Feasibility(format!("initial profile violates its constraints: {residuals:?}")));
    }
    if !(options.tol > 0.0) || !(options.schedule.scale > 0.0) {
        return Err(Error::StepSchedule("tolerance and step scale must be positive".into()));
    }
    let projector = Projector::new(init)?;
    let areas = init.cell_areas();
    let total_area: f64 = areas.iter().sum();
    let sign = match options.goal {
        Goal::Minimize => 1.0,
        Goal::Maximize => -1.0,
    };
    let c = init.constraints;
    let mut step = options.schedule.scale / lipschitz_estimate(gamma, c.lower, c.upper);

    let mut profile = init.clone();
    let mut value = objective_radial(&profile, gamma);
    let mut trace = vec![value];
    let mut halvings = 0;
    let mut iterations = 0;
    let mut pg_norm = f64::INFINITY;
    let mut converged = false;

    while iterations < options.max_iterations {
        // area-metric gradient: ∂J/∂u_i / area_i
        let trial: Vec<f64> = profile
            .slopes
            .iter()
            .map(|&u| u - sign * step * 2.0 * PI * integrand_phi(gamma, u).1)
            .collect();
        let candidate = projector.project(&trial)?;
        pg_norm = (profile
            .slopes
            .iter()
            .zip(&candidate)
            .zip(&areas)
            .map(|((u, v), a)| a * ((u - v) / step).powi(2))
            .sum::<f64>()
            / total_area)
            .sqrt();
        if pg_norm <= options.tol {
            converged = true;
            break;
        }
        let next = RadialProfile { slopes: candidate, ..profile.clone() };
        let next_value = objective_radial(&next, gamma);
        if sign * (next_value - value) <= 0.0 {
            profile = next;
            value = next_value;
            trace.push(value);
            iterations += 1;
        } else {
            halvings += 1;
            if halvings > options.schedule.max_halvings {
                let tail: Vec<String> = trace.iter().rev().take(5).map(|v| format!("{v:e}")).collect();
                return Err(Error::StepSchedule(format!(
                    "objective keeps moving against the goal after {halvings} halvings \
                     (iteration {iterations}, step {step:e}, projected-gradient norm {pg_norm:e}, \
                     recent objectives [{}])",
                    tail.join(", ")
                )));
            }
            step *= 0.5;
        }
    }

    Ok(OptimizeReport {
        gamma,
        goal: options.goal,
        objective_trace: trace,
        residuals: profile.residuals(),
        profile,
        projected_gradient_norm: pg_norm,
        iterations,
        converged,
        step_size: step,
    })
}

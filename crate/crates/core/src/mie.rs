//! Exact partial-wave solution for the unit sphere with an impedance
//! boundary, used as a finite-frequency reference.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::cross_sections::QuadratureSpec;
use crate::error::{Error, Result};
use crate::impedance::Impedance;
use crate::quadrature::{legendre_series, GaussLegendre};

/// Spherical Bessel functions j_l, y_l and their derivatives for
/// `l = 0..=l_max` at one argument.
#[derive(Debug, Clone, PartialEq)]
pub struct SphericalBessel {
    pub x: f64,
    pub j: Vec<f64>,
    pub y: Vec<f64>,
    pub dj: Vec<f64>,
    pub dy: Vec<f64>,
}

const RESCALE_ABOVE: f64 = 1e250;

// j_0..=j_n by Miller's downward recurrence, normalized against j_0 or j_1.
fn bessel_j(x: f64, n: usize) -> Vec<f64> {
    let top = (n as f64).max(x);
    let start = top.ceil() as usize + (40.0 * top).sqrt().ceil() as usize + 20;
    let mut out = vec![0.0; n + 1];
    let mut next = 0.0;
    let mut cur = 1e-300;
    for l in (1..=start).rev() {
        if l <= n {
            out[l] = cur;
        }
        let prev = (2 * l + 1) as f64 / x * cur - next;
        next = cur;
        cur = prev;
        if cur.abs() > RESCALE_ABOVE {
            cur /= RESCALE_ABOVE;
            next /= RESCALE_ABOVE;
            for v in out.iter_mut() {
                *v /= RESCALE_ABOVE;
            }
        }
    }
    out[0] = cur;
    // f_1 is needed for normalization even when n = 0
    let f1 = if n >= 1 { out[1] } else { next };
    let (s, c) = x.sin_cos();
    let j0 = s / x;
    let j1 = s / (x * x) - c / x;
    let scale = if j0.abs() >= j1.abs() { j0 / out[0] } else { j1 / f1 };
    for v in out.iter_mut() {
        *v *= scale;
    }
    out
}

/// j_l, y_l and derivatives for `l = 0..=l_max`.
///
/// j_l comes from downward recurrence (stable for l > x), y_l from upward
/// recurrence; a non-finite y_l yields a range error naming the order.
pub fn spherical_bessel_pair(x: f64, l_max: usize) -> Result<SphericalBessel> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::Domain(format!("Bessel argument must be positive and finite, got {x}")));
    }
    let n = l_max.max(1);
    let j = bessel_j(x, n);
    let (s, c) = x.sin_cos();
    let mut y = Vec::with_capacity(n + 1);
    y.push(-c / x);
    y.push(-c / (x * x) - s / x);
    for l in 1..n {
        let next = (2 * l + 1) as f64 / x * y[l] - y[l - 1];
        if !next.is_finite() {
            return Err(Error::Range { order: l + 1, x });
        }
        y.push(next);
    }
    if !y[1].is_finite() {
        return Err(Error::Range { order: 1, x });
    }
    let derivative = |f: &[f64]| -> Vec<f64> {
        let mut d = Vec::with_capacity(n + 1);
        d.push(-f[1]);
        for l in 1..=n {
            d.push(f[l - 1] - (l + 1) as f64 / x * f[l]);
        }
        d
    };
    let dj = derivative(&j);
    let dy = derivative(&y);
    if let Some(order) = dy.iter().position(|v| !v.is_finite()) {
        return Err(Error::Range { order, x });
    }
    let mut out = SphericalBessel { x, j, y, dj, dy };
    for v in [&mut out.j, &mut out.y, &mut out.dj, &mut out.dy] {
        v.truncate(l_max + 1);
    }
    Ok(out)
}

/// ⌈ka + 8(ka)^(1/3) + 20⌉.
pub fn default_l_max(ka: f64) -> usize {
    (ka + 8.0 * ka.cbrt() + 20.0).ceil() as usize
}

/// Smallest polar rule that resolves the forward lobe at size parameter ka.
pub fn required_polar_nodes(ka: f64) -> usize {
    (10.0 * ka + 200.0).ceil() as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExactCrossSections {
    pub scattering: f64,
    pub extinction: f64,
    pub absorption: f64,
}

/// Scattered-field coefficients c_l of the unit sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct MieSolution {
    pub ka: f64,
    pub gamma: Impedance,
    pub l_max: usize,
    pub coefficients: Vec<Complex64>,
}

/// c_l = −(j_l′ + iγ j_l)/(h_l′ + iγ h_l), h_l = j_l + i y_l, for the
/// total field obeying ∂u/∂r + ikγu = 0 at r = a (passive for γ ≥ 0).
pub fn mie_coefficients(ka: f64, gamma: Impedance, l_max: Option<usize>) -> Result<MieSolution> {
    if !(ka > 0.0 && ka.is_finite()) {
        return Err(Error::Domain(format!("ka must be positive and finite, got {ka}")));
    }
    let l_max = l_max.unwrap_or_else(|| default_l_max(ka));
    let b = spherical_bessel_pair(ka, l_max)?;
    let i = Complex64::i();
    let mut coefficients = Vec::with_capacity(l_max + 1);
    for l in 0..=l_max {
        let h = Complex64::new(b.j[l], b.y[l]);
        let dh = Complex64::new(b.dj[l], b.dy[l]);
        let c = if gamma.is_dirichlet() {
            -b.j[l] / h
        } else if gamma.value() > 1.0 {
            // divide through by γ to keep large impedances continuous with ∞
            let g = gamma.value();
            -(b.dj[l] / g + i * b.j[l]) / (dh / g + i * h)
        } else {
            let g = gamma.value();
            -(b.dj[l] + i * g * b.j[l]) / (dh + i * g * h)
        };
        let gain = (1.0 + 2.0 * c).norm();
        if !c.is_finite() || gain > 1.0 + 1e-10 {
            return Err(Error::Passivity(format!("|1 + 2c_{l}| = {gain} at ka = {ka}, γ = {gamma}")));
        }
        coefficients.push(c);
    }
    Ok(MieSolution { ka, gamma, l_max, coefficients })
}

impl MieSolution {
    /// |c_{l_max}| / max_l |c_l|.
    pub fn tail_ratio(&self) -> f64 {
        let peak = self.coefficients.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if peak == 0.0 {
            0.0
        } else {
            self.coefficients[self.l_max].norm() / peak
        }
    }

    fn amplitude_with(&self, cos_theta: f64, p: &mut Vec<f64>) -> Complex64 {
        legendre_series(cos_theta, self.l_max, p);
        let sum: Complex64 = self
            .coefficients
            .iter()
            .zip(p.iter())
            .enumerate()
            .map(|(l, (c, pl))| c * ((2 * l + 1) as f64 * pl))
            .sum();
        sum / Complex64::new(0.0, self.ka)
    }

    /// f(θ) = (1/(ik)) Σ (2l+1) c_l P_l(cos θ), in units of a.
    pub fn amplitude(&self, theta: f64) -> Complex64 {
        self.amplitude_with(theta.cos(), &mut Vec::with_capacity(self.l_max + 1))
    }

    /// Scattering, extinction (optical theorem) and absorption cross
    /// sections in units of a².
    pub fn cross_sections(&self) -> Result<ExactCrossSections> {
        let norm = 4.0 * PI / (self.ka * self.ka);
        let mut scat = 0.0;
        let mut ext = 0.0;
        for (l, c) in self.coefficients.iter().enumerate() {
            let w = (2 * l + 1) as f64;
            scat += w * c.norm_sqr();
            ext -= w * c.re;
        }
        let (scattering, extinction) = (norm * scat, norm * ext);
        let absorption = extinction - scattering;
        if absorption < -1e-10 {
            return Err(Error::Passivity(format!(
                "negative absorption {absorption:e} at ka = {}, γ = {}",
                self.ka, self.gamma
            )));
        }
        Ok(ExactCrossSections { scattering, extinction, absorption })
    }

    // 2π ∫ w(μ)|f(μ)|² dμ on a prebuilt rule.
    fn angular_integral(&self, rule: &GaussLegendre, transport: bool) -> f64 {
        let mut p = Vec::with_capacity(self.l_max + 1);
        let mut acc = 0.0;
        for (&mu, &w) in rule.nodes().iter().zip(rule.weights()) {
            let weight = if transport { 1.0 - mu } else { 1.0 };
            acc += w * weight * self.amplitude_with(mu, &mut p).norm_sqr();
        }
        2.0 * PI * acc
    }

    /// ∫_{S²} |f|² by Gauss–Legendre in cos θ; equals the series σ_scat.
    pub fn scattering_angular(&self, spec: &QuadratureSpec) -> f64 {
        self.angular_integral(&GaussLegendre::new(spec.n_polar.max(2)), false)
    }
}

/// Transport cross section ∫ (1 − cos θ)|f(θ)|² over S², refusing rules
/// with fewer than 10·ka + 200 polar nodes.
pub fn transport_exact(sol: &MieSolution, spec: &QuadratureSpec) -> Result<f64> {
    let required = required_polar_nodes(sol.ka);
    if spec.n_polar < required {
        return Err(Error::UnderResolved { required, given: spec.n_polar });
    }
    Ok(sol.angular_integral(&GaussLegendre::new(spec.n_polar), true))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRecord {
    pub ka: f64,
    pub sigma_scat: f64,
    pub sigma_ext: f64,
    pub sigma_abs: f64,
    pub transport: f64,
    pub l_max: usize,
    /// |series σ_scat − angular σ_scat|.
    pub est_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub gamma: Impedance,
    pub n_polar: usize,
    pub records: Vec<SweepRecord>,
    /// Largest σ_scat over the grid.
    pub c_emp: f64,
}

/// Solves every grid point (in parallel) and returns records in grid order.
///
/// The polar rule is raised once to the node count required by the largest
/// ka and shared by all points.
pub fn sweep(ka_grid: &[f64], gamma: Impedance, spec: &QuadratureSpec) -> Result<SweepReport> {
    if ka_grid.is_empty() {
        return Err(Error::Domain("ka grid is empty".into()));
    }
    if ka_grid.iter().any(|k| !(*k > 0.0 && k.is_finite())) || ka_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Domain("ka grid must be positive, finite and sorted".into()));
    }
    let top = ka_grid[ka_grid.len() - 1];
    let n_polar = spec.n_polar.max(required_polar_nodes(top));
    let rule = GaussLegendre::new(n_polar);
    let records: Vec<SweepRecord> = ka_grid
        .par_iter()
        .map(|&ka| {
            let point = || -> Result<SweepRecord> {
                let sol = mie_coefficients(ka, gamma, None)?;
                let cs = sol.cross_sections()?;
                let angular = sol.angular_integral(&rule, false);
                let transport = sol.angular_integral(&rule, true);
                let rec = SweepRecord {
                    ka,
                    sigma_scat: cs.scattering,
                    sigma_ext: cs.extinction,
                    sigma_abs: cs.absorption,
                    transport,
                    l_max: sol.l_max,
                    est_error: (cs.scattering - angular).abs(),
                };
                if [rec.sigma_scat, rec.sigma_ext, rec.sigma_abs, rec.transport].iter().all(|v| v.is_finite()) {
                    Ok(rec)
                } else {
                    Err(Error::Domain("non-finite cross section".into()))
                }
            };
            point().map_err(|e| Error::SweepPoint { ka, source: Box::new(e) })
        })
        .collect::<Result<_>>()?;
    let c_emp = records.iter().map(|r| r.sigma_scat).fold(f64::NEG_INFINITY, f64::max);
    Ok(SweepReport { gamma, n_polar, records, c_emp })
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) || n == 0 || (n == 1 && hi != lo) {
        return Err(Error::Domain(format!("invalid log grid {lo}:{hi}:{n}")));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    let mut grid: Vec<f64> = (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect();
    grid[0] = lo;
    grid[n - 1] = hi;
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn g(v: f64) -> Impedance {
        Impedance::new(v).unwrap()
    }

    // Power series j_l(x) = x^l/(2l+1)!! Σ_k (−x²/2)^k / (k! Π_{m=1..k}(2l+2m+1)).
    fn j_series(l: usize, x: f64) -> f64 {
        let mut lead = 1.0;
        for m in 0..=l {
            lead *= if m == 0 { 1.0 } else { x / (2 * m + 1) as f64 };
        }
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..400 {
            term *= -0.5 * x * x / (k as f64 * (2 * l + 2 * k + 1) as f64);
            sum += term;
            if term.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        lead * sum
    }

    #[test]
    fn closed_forms_at_one() {
        let b = spherical_bessel_pair(1.0, 0).unwrap();
        assert!((b.j[0] - 1f64.sin()).abs() < 1e-15);
        assert!((b.y[0] + 1f64.cos()).abs() < 1e-15);
        assert_eq!(b.j.len(), 1);
    }

    #[test]
    fn high_order_matches_series() {
        let b = spherical_bessel_pair(10.0, 40).unwrap();
        let reference = j_series(40, 10.0);
        assert!((b.j[40] / reference - 1.0).abs() < 1e-12, "{} vs {reference}", b.j[40]);
        for l in [0usize, 3, 11, 25] {
            let r = j_series(l, 10.0);
            assert!((b.j[l] - r).abs() < 1e-12 * r.abs().max(1e-3), "l={l}");
        }
    }

    #[test]
    fn overflow_reports_order() {
        match spherical_bessel_pair(1e-3, 400) {
            Err(Error::Range { order, .. }) => assert!(order > 1 && order <= 400),
            other => panic!("expected range error, got {other:?}"),
        }
    }

    #[test]
    fn dirichlet_monopole_at_ka_one() {
        let sol = mie_coefficients(1.0, Impedance::DIRICHLET, None).unwrap();
        let s = 1f64.sin();
        let expected = Complex64::new(-s * s, -s * 1f64.cos());
        assert!((sol.coefficients[0] - expected).norm() < 1e-12);
    }

    #[test]
    fn large_impedance_approaches_dirichlet() {
        for ka in [0.3, 4.0, 37.0] {
            let a = mie_coefficients(ka, Impedance::DIRICHLET, None).unwrap();
            let b = mie_coefficients(ka, g(1e9), None).unwrap();
            for (x, y) in a.coefficients.iter().zip(&b.coefficients) {
                assert!((x - y).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn rayleigh_limit() {
        let sol = mie_coefficients(0.01, Impedance::DIRICHLET, None).unwrap();
        let c0 = sol.coefficients[0];
        assert!((c0 - Complex64::new(0.0, -0.01)).norm() < 2e-4);
        let cs = sol.cross_sections().unwrap();
        assert!((cs.scattering / (4.0 * PI) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn truncation_invariance() {
        for (ka, gamma) in [(1.0, Impedance::DIRICHLET), (12.5, g(1.0)), (60.0, g(0.25))] {
            let a = mie_coefficients(ka, gamma, None).unwrap();
            let b = mie_coefficients(ka, gamma, Some(a.l_max + 10)).unwrap();
            assert!(a.tail_ratio() <= 1e-14, "tail {}", a.tail_ratio());
            for t in [0.0, 0.7, 2.0, PI] {
                assert!((a.amplitude(t) - b.amplitude(t)).norm() <= 1e-12 * a.amplitude(t).norm().max(1.0));
            }
            let (x, y) = (a.cross_sections().unwrap(), b.cross_sections().unwrap());
            assert!((x.scattering - y.scattering).abs() <= 1e-12 * x.scattering);
        }
    }

    #[test]
    fn optical_theorem_identity() {
        for gamma in [Impedance::DIRICHLET, Impedance::NEUMANN, g(1.0), g(0.3)] {
            let sol = mie_coefficients(1.0, gamma, None).unwrap();
            let cs = sol.cross_sections().unwrap();
            let from_forward = 4.0 * PI / sol.ka * sol.amplitude(0.0).im;
            assert!((from_forward - cs.extinction).abs() <= 1e-12 * cs.extinction.abs().max(1.0));
        }
    }

    #[test]
    fn lossless_limits_do_not_absorb() {
        for ka in [0.5, 5.0, 50.0] {
            for gamma in [Impedance::DIRICHLET, Impedance::NEUMANN] {
                let cs = mie_coefficients(ka, gamma, None).unwrap().cross_sections().unwrap();
                assert!(cs.absorption.abs() < 1e-10, "ka={ka} γ={gamma}: {}", cs.absorption);
            }
            let cs = mie_coefficients(ka, g(1.0), None).unwrap().cross_sections().unwrap();
            assert!(cs.absorption > 0.0);
        }
    }

    #[test]
    fn dirichlet_extinction_paradox() {
        let cs = mie_coefficients(100.0, Impedance::DIRICHLET, None).unwrap().cross_sections().unwrap();
        let ratio = cs.scattering / PI;
        assert!((1.95..=2.2).contains(&ratio), "{ratio}");
    }

    #[test]
    fn geometric_backscatter_modulus() {
        let sol = mie_coefficients(50.0, Impedance::DIRICHLET, None).unwrap();
        let back = sol.amplitude(PI).norm();
        assert!((back / 0.5 - 1.0).abs() < 0.1, "{back}");
    }

    #[test]
    fn parseval_agreement() {
        for (ka, gamma) in [(0.2, g(1.0)), (8.0, Impedance::NEUMANN), (40.0, g(2.0))] {
            let sol = mie_coefficients(ka, gamma, None).unwrap();
            let spec = QuadratureSpec { n_polar: required_polar_nodes(ka), ..Default::default() };
            let series = sol.cross_sections().unwrap().scattering;
            assert!((sol.scattering_angular(&spec) / series - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn transport_refuses_coarse_rules() {
        let sol = mie_coefficients(80.0, Impedance::DIRICHLET, None).unwrap();
        let spec = QuadratureSpec { n_polar: 400, ..Default::default() };
        assert!(matches!(transport_exact(&sol, &spec), Err(Error::UnderResolved { required: 1000, given: 400 })));
    }

    #[test]
    fn dirichlet_transport_near_geometric_limit() {
        let sol = mie_coefficients(80.0, Impedance::DIRICHLET, None).unwrap();
        let spec = QuadratureSpec { n_polar: 1000, ..Default::default() };
        let r = transport_exact(&sol, &spec).unwrap();
        assert!((r / PI - 1.0).abs() < 0.05, "{r}");
    }

    #[test]
    fn unit_impedance_transport_error_shrinks_with_ka() {
        // limit 4π∫μ³((1−μ)/(1+μ))²dμ of the γ = 1 sphere
        let limit = 0.088_235_470_3;
        let rel = |ka: f64| {
            let sol = mie_coefficients(ka, g(1.0), None).unwrap();
            let spec = QuadratureSpec { n_polar: required_polar_nodes(ka), ..Default::default() };
            (transport_exact(&sol, &spec).unwrap() / limit - 1.0).abs()
        };
        let (a, b, c) = (rel(40.0), rel(80.0), rel(160.0));
        assert!(b < 0.6 * a && c < 0.6 * b, "{a} {b} {c}");
    }

    #[test]
    fn sweep_is_ordered_and_bounded() {
        let grid = log_grid(0.1, 30.0, 40).unwrap();
        let report = sweep(&grid, g(1.0), &QuadratureSpec::default()).unwrap();
        assert_eq!(report.records.len(), 40);
        assert!(report.records.iter().zip(&grid).all(|(r, k)| r.ka == *k));
        assert!(report.records.iter().all(|r| r.sigma_scat <= r.sigma_ext + 1e-10 && r.est_error < 1e-8));
        assert!(report.c_emp.is_finite());
        assert!(matches!(sweep(&[1.0, -1.0], g(1.0), &QuadratureSpec::default()), Err(Error::Domain(_))));
    }

    #[test]
    fn log_grid_endpoints() {
        let grid = log_grid(0.1, 100.0, 400).unwrap();
        assert_eq!(grid.len(), 400);
        assert_eq!(grid[0], 0.1);
        assert_eq!(grid[399], 100.0);
        assert!(grid.windows(2).all(|w| w[1] > w[0]));
    }

    proptest! {
        #[test]
        fn cross_product_identity(x in 0.5f64..150.0, l_max in 0usize..120) {
            let b = spherical_bessel_pair(x, l_max).unwrap();
            for l in 0..=l_max {
                let w = b.j[l] * b.dy[l] - b.dj[l] * b.y[l];
                prop_assert!((w * x * x - 1.0).abs() < 1e-10, "l={} w·x²={}", l, w * x * x);
            }
        }

        #[test]
        fn passive_for_all_impedances(ka in 0.05f64..60.0, gamma in 0.0f64..50.0) {
            let sol = mie_coefficients(ka, g(gamma), None).unwrap();
            prop_assert!(sol.coefficients.iter().all(|c| (1.0 + 2.0 * c).norm() <= 1.0 + 1e-10));
            prop_assert!(sol.cross_sections().unwrap().absorption >= -1e-10);
        }
    }
}

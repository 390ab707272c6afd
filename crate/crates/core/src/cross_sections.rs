//! Total and transport cross sections: angular quadrature of a density over
//! the direction sphere, and the planar transport functional over the
//! shadow domain.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::amplitude::HighFrequencyAmplitude;
use crate::error::{Error, Result};
use crate::geometry::{
    angle_from_incident, ConvexSurface, Domain, ReflectionInverter, Vec2, Vec3, FORWARD_GUARD,
};
use crate::impedance::Impedance;
use crate::quadrature::{periodic_trapezoid, GaussLegendre};
use crate::shape_opt::integrand_phi;

/// Node counts for the angular and planar rules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureSpec {
    /// Gauss–Legendre nodes in cos θ̃.
    pub n_polar: usize,
    /// Trapezoid nodes in the azimuth φ̃.
    pub n_azimuth: usize,
    /// Gauss–Legendre nodes per planar direction (radial for disks and
    /// ellipses, both axes for rectangles).
    pub n_planar: usize,
    /// Half-angle of the excluded cone around the incident direction.
    pub forward_guard: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { n_polar: 400, n_azimuth: 256, n_planar: 512, forward_guard: FORWARD_GUARD }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_polar < 2 || self.n_azimuth < 4 || self.n_planar < 1 {
            return Err(Error::Domain(format!(
                "quadrature needs n_polar >= 2, n_azimuth >= 4 and n_planar >= 1, got {}, {}, {}",
                self.n_polar, self.n_azimuth, self.n_planar
            )));
        }
        if !(self.forward_guard >= 0.0 && self.forward_guard < PI) {
            return Err(Error::Domain(format!("forward guard must lie in [0, π), got {}", self.forward_guard)));
        }
        Ok(())
    }

    /// Same rule with every node count halved (kept valid).
    pub fn halved(&self) -> Self {
        Self {
            n_polar: (self.n_polar / 2).max(2),
            n_azimuth: (self.n_azimuth / 2).max(4),
            n_planar: (self.n_planar / 2).max(1),
            forward_guard: self.forward_guard,
        }
    }
}

/// Angular weight applied to the density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Weight {
    /// 1, giving the total cross section.
    Total,
    /// 1 − ⟨θ, θ0⟩, giving the transport cross section.
    Transport,
}

impl Weight {
    fn at(self, cos_theta: f64) -> f64 {
        match self {
            Weight::Total => 1.0,
            Weight::Transport => 1.0 - cos_theta,
        }
    }

    // Largest contribution of the excluded cap per unit density.
    fn cap_bound(self, eps: f64) -> f64 {
        let one_minus_cos = 2.0 * (0.5 * eps).sin().powi(2);
        let area = 2.0 * PI * one_minus_cos;
        match self {
            Weight::Total => area,
            Weight::Transport => area * one_minus_cos,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossSectionResult {
    /// Units of length².
    pub value: f64,
    /// Self-convergence estimate plus the bound on any excluded region.
    pub est_error: f64,
    pub spec: QuadratureSpec,
}

impl CrossSectionResult {
    /// Number of integrand evaluations of the primary rule.
    pub fn nodes(&self, planar: bool) -> usize {
        if planar {
            self.spec.n_planar
        } else {
            self.spec.n_polar * self.spec.n_azimuth
        }
    }
}

// Integral over the sphere minus the forward cap, and the largest density seen.
fn sphere_rule<F>(density: &F, weight: Weight, spec: &QuadratureSpec) -> Result<(f64, f64)>
where
    F: Fn(&Vec3) -> Result<f64> + Sync,
{
    let polar = GaussLegendre::new(spec.n_polar);
    let azimuth: Vec<(f64, f64)> = periodic_trapezoid(spec.n_azimuth).collect();
    let rows: Vec<(f64, f64)> = polar
        .nodes()
        .par_iter()
        .zip(polar.weights())
        .map(|(&mu, &wmu)| -> Result<(f64, f64)> {
            let sin = (1.0 - mu * mu).max(0.0).sqrt();
            let mut row = 0.0;
            let mut peak: f64 = 0.0;
            for &(phi, wphi) in &azimuth {
                let theta = Vec3::new(sin * phi.cos(), sin * phi.sin(), mu);
                if angle_from_incident(&theta) < spec.forward_guard {
                    continue;
                }
                let d = density(&theta).map_err(|e| Error::NodeEvaluation {
                    theta: [theta.x, theta.y, theta.z],
                    source: Box::new(e),
                })?;
                peak = peak.max(d.abs());
                row += wphi * d;
            }
            Ok((wmu * weight.at(mu) * row, peak))
        })
        .collect::<Result<_>>()?;
    let value = rows.iter().map(|r| r.0).sum();
    let peak = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok((value, peak))
}

/// ∫_{S²} weight(θ)·density(θ) dθ over the sphere minus the forward cap.
///
/// Rows of the polar rule are evaluated in parallel and summed in node
/// order, so results do not depend on the thread count.
pub fn integrate_sphere_weighted<F>(density: F, weight: Weight, spec: &QuadratureSpec) -> Result<CrossSectionResult>
where
    F: Fn(&Vec3) -> Result<f64> + Sync,
{
    spec.validate()?;
    let (value, peak) = sphere_rule(&density, weight, spec)?;
    let (coarse, _) = sphere_rule(&density, weight, &spec.halved())?;
    let est_error = (value - coarse).abs() + weight.cap_bound(spec.forward_guard) * peak;
    Ok(CrossSectionResult { value, est_error, spec: *spec })
}

fn require_closed_body(surface: &ConvexSurface) -> Result<()> {
    match surface {
        ConvexSurface::Sphere { .. } | ConvexSurface::Ellipsoid { .. } => Ok(()),
        ConvexSurface::Graph { .. } => Err(Error::Domain(
            "the angular route needs a closed body whose cap reflects onto the whole sphere; \
             use the planar route for graph surfaces"
                .into(),
        )),
    }
}

fn hf_angular(surface: &ConvexSurface, gamma: Impedance, weight: Weight, spec: &QuadratureSpec) -> Result<CrossSectionResult> {
    require_closed_body(surface)?;
    spec.validate()?;
    let inverter = ReflectionInverter::with_guard(surface, spec.forward_guard);
    let hf = HighFrequencyAmplitude::with_inverter(inverter, gamma);
    integrate_sphere_weighted(|theta| hf.density(theta), weight, spec)
}

/// k → ∞ transport cross section: the high-frequency density integrated
/// against 1 − ⟨θ, θ0⟩ over the sphere.
pub fn transport_hf_angular(surface: &ConvexSurface, gamma: Impedance, spec: &QuadratureSpec) -> Result<CrossSectionResult> {
    hf_angular(surface, gamma, Weight::Transport, spec)
}

/// Total integral of the high-frequency density (the reflected part of the
/// limit measure, without the forward shadow-forming term).
pub fn sigma_hf_angular(surface: &ConvexSurface, gamma: Impedance, spec: &QuadratureSpec) -> Result<CrossSectionResult> {
    hf_angular(surface, gamma, Weight::Total, spec)
}

fn planar_integrand(surface: &ConvexSurface, gamma: Impedance, x: &Vec2) -> Result<f64> {
    let slope = surface.gradient(x)?.norm();
    Ok(integrand_phi(gamma, slope).0)
}

fn planar_rule(surface: &ConvexSurface, gamma: Impedance, spec: &QuadratureSpec) -> Result<f64> {
    let domain = surface.domain();
    let eval = |x: Vec2| {
        planar_integrand(surface, gamma, &x).map_err(|e| Error::PlanarNodeEvaluation { x: [x.x, x.y], source: Box::new(e) })
    };
    let rule = GaussLegendre::new(spec.n_planar);
    match domain {
        Domain::Rectangle { x_min, x_max, y_min, y_max } => {
            let xs: Vec<(f64, f64)> = rule.on_interval(x_min, x_max).collect();
            let ys: Vec<(f64, f64)> = rule.on_interval(y_min, y_max).collect();
            let rows: Vec<f64> = xs
                .par_iter()
                .map(|&(x, wx)| -> Result<f64> {
                    let mut row = 0.0;
                    for &(y, wy) in &ys {
                        row += wy * eval(Vec2::new(x, y))?;
                    }
                    Ok(wx * row)
                })
                .collect::<Result<_>>()?;
            Ok(rows.iter().sum())
        }
        Domain::Disk { .. } | Domain::Ellipse { .. } => {
            // x = polar_point(s, φ), dx = |det| s ds dφ with det = R² or ab
            let jac = domain.area() / PI;
            let radial: Vec<(f64, f64)> = rule.on_interval(0.0, 1.0).collect();
            let azimuth: Vec<(f64, f64)> = if surface.is_radially_symmetric() {
                vec![(0.0, 2.0 * PI)]
            } else {
                periodic_trapezoid(spec.n_azimuth).collect()
            };
            let rows: Vec<f64> = radial
                .par_iter()
                .map(|&(s, ws)| -> Result<f64> {
                    let mut row = 0.0;
                    for &(phi, wphi) in &azimuth {
                        row += wphi * eval(domain.polar_point(s, phi))?;
                    }
                    Ok(ws * s * row)
                })
                .collect::<Result<_>>()?;
            Ok(jac * rows.iter().sum::<f64>())
        }
    }
}

/// ∫_I φ_γ(|∇g(x)|) dx over the shadow domain, with
/// φ_γ(u) = 2/(1+u²)·((γ√(1+u²) − 1)/(γ√(1+u²) + 1))².
///
/// Every supported surface kind exposes its illuminated cap as a graph, so
/// this route applies to all of them.
pub fn transport_limit_planar(surface: &ConvexSurface, gamma: Impedance, spec: &QuadratureSpec) -> Result<CrossSectionResult> {
    spec.validate()?;
    let value = planar_rule(surface, gamma, spec)?;
    let coarse = planar_rule(surface, gamma, &spec.halved())?;
    Ok(CrossSectionResult { value, est_error: (value - coarse).abs(), spec: *spec })
}

/// Area of the shadow of the body on the plane orthogonal to θ0.
pub fn classical_sigma(surface: &ConvexSurface) -> f64 {
    surface.domain().area()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::HeightField;

    fn g(v: f64) -> Impedance {
        Impedance::new(v).unwrap()
    }

    // Adaptive Simpson, independent of the Gauss rules under test.
    fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
        fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                return left + right + (left + right - whole) / 15.0;
            }
            rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
        let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
        rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 50)
    }

    fn sphere_gamma_one_limit() -> f64 {
        4.0 * PI * adaptive_simpson(&|m: f64| m.powi(3) * ((1.0 - m) / (1.0 + m)).powi(2), 0.0, 1.0, 1e-14)
    }

    #[test]
    fn constant_densities() {
        let spec = QuadratureSpec::default();
        let r = integrate_sphere_weighted(|_| Ok(1.0), Weight::Total, &spec).unwrap();
        assert!((r.value - 4.0 * PI).abs() < 1e-10);
        let r = integrate_sphere_weighted(|_| Ok(0.25), Weight::Transport, &spec).unwrap();
        assert!((r.value - PI).abs() < 1e-8);
        let r = integrate_sphere_weighted(|_| Ok(0.25), Weight::Total, &spec).unwrap();
        assert!((r.value - PI).abs() < 1e-8);
        assert!(r.est_error >= 0.0 && r.est_error < 1e-8);
    }

    #[test]
    fn node_failures_carry_location() {
        let spec = QuadratureSpec { n_polar: 4, n_azimuth: 4, ..Default::default() };
        let err = integrate_sphere_weighted(|_| Err(Error::Indeterminate), Weight::Total, &spec).unwrap_err();
        assert!(matches!(err, Error::NodeEvaluation { .. }));
        assert!(QuadratureSpec { n_azimuth: 3, ..spec }.validate().is_err());
    }

    #[test]
    fn sphere_angular_transport() {
        let s = ConvexSurface::sphere(1.0).unwrap();
        let spec = QuadratureSpec { n_polar: 100, n_azimuth: 16, ..Default::default() };
        let dir = transport_hf_angular(&s, Impedance::DIRICHLET, &spec).unwrap();
        assert!((dir.value - PI).abs() < 1e-6);
        let neu = transport_hf_angular(&s, Impedance::NEUMANN, &spec).unwrap();
        assert!((neu.value - PI).abs() < 1e-6);
        let one = transport_hf_angular(&s, g(1.0), &spec).unwrap();
        let oracle = sphere_gamma_one_limit();
        assert!((oracle - 0.0882354703).abs() < 1e-8, "{oracle}");
        assert!((one.value - oracle).abs() < 0.002);
    }

    #[test]
    fn planar_examples() {
        let spec = QuadratureSpec::default();
        let disk = Domain::Disk { radius: 1.0 };
        let flat = ConvexSurface::graph(HeightField::Plane { height: 0.0 }, disk).unwrap();
        let r = transport_limit_planar(&flat, g(3.0), &spec).unwrap();
        assert!((r.value - PI / 2.0).abs() < 1e-12);

        let hemi = ConvexSurface::sphere(1.0).unwrap();
        let r = transport_limit_planar(&hemi, Impedance::DIRICHLET, &spec).unwrap();
        assert!((r.value - PI).abs() < 1e-10, "{}", r.value);
        let r = transport_limit_planar(&hemi, g(1.0), &spec).unwrap();
        assert!((r.value - sphere_gamma_one_limit()).abs() < 1e-9, "{}", r.value);

        let cone = ConvexSurface::graph(HeightField::Cone { slope: 3f64.sqrt() }, disk).unwrap();
        assert!(transport_limit_planar(&cone, g(0.5), &spec).unwrap().value.abs() < 1e-12);
    }

    #[test]
    fn classical_sigma_examples() {
        assert!((classical_sigma(&ConvexSurface::sphere(2.0).unwrap()) - 4.0 * PI).abs() < 1e-14);
        assert!((classical_sigma(&ConvexSurface::ellipsoid(1.0, 1.3, 0.7).unwrap()) - 1.3 * PI).abs() < 1e-14);
        let square = Domain::Rectangle { x_min: -0.5, x_max: 0.5, y_min: -0.5, y_max: 0.5 };
        let sq = ConvexSurface::graph(HeightField::Paraboloid { k1: 1.0, k2: 2.0 }, square).unwrap();
        assert_eq!(classical_sigma(&sq), 1.0);
    }

    #[test]
    fn rectangle_planar_matches_tensor_oracle() {
        // paraboloid g = (x² + 2y²)/2 over the unit square: |∇g|² = x² + 4y²
        let square = Domain::Rectangle { x_min: -0.5, x_max: 0.5, y_min: -0.5, y_max: 0.5 };
        let sq = ConvexSurface::graph(HeightField::Paraboloid { k1: 1.0, k2: 2.0 }, square).unwrap();
        let r = transport_limit_planar(&sq, Impedance::DIRICHLET, &QuadratureSpec { n_planar: 64, ..Default::default() }).unwrap();
        let inner = |x: f64| adaptive_simpson(&|y: f64| 2.0 / (1.0 + x * x + 4.0 * y * y), -0.5, 0.5, 1e-13);
        let oracle = adaptive_simpson(&inner, -0.5, 0.5, 1e-12);
        assert!((r.value - oracle).abs() < 1e-10, "{} vs {oracle}", r.value);
    }

    #[test]
    fn angular_route_rejects_open_graphs() {
        let p = ConvexSurface::graph(HeightField::Paraboloid { k1: 1.0, k2: 1.0 }, Domain::Disk { radius: 1.0 }).unwrap();
        assert!(matches!(transport_hf_angular(&p, g(1.0), &QuadratureSpec::default()), Err(Error::Domain(_))));
    }

    #[test]
    fn planar_bounds_hold() {
        let e = ConvexSurface::ellipsoid(1.0, 1.3, 0.7).unwrap();
        let spec = QuadratureSpec { n_planar: 128, n_azimuth: 64, ..Default::default() };
        let dir = transport_limit_planar(&e, Impedance::DIRICHLET, &spec).unwrap().value;
        assert!(dir <= 2.0 * classical_sigma(&e));
        for gamma in [0.0, 0.3, 1.0, 2.0, 7.0] {
            let v = transport_limit_planar(&e, g(gamma), &spec).unwrap().value;
            assert!(v >= 0.0 && v <= dir * (1.0 + 1e-12), "γ={gamma}: {v} vs {dir}");
        }
    }

    #[test]
    fn doubling_nodes_stays_within_estimate() {
        let e = ConvexSurface::ellipsoid(1.0, 1.3, 0.7).unwrap();
        let spec = QuadratureSpec { n_polar: 48, n_azimuth: 32, n_planar: 64, ..Default::default() };
        let fine = QuadratureSpec { n_polar: 96, n_azimuth: 64, n_planar: 128, ..spec };
        let a = transport_hf_angular(&e, g(2.0), &spec).unwrap();
        let b = transport_hf_angular(&e, g(2.0), &fine).unwrap();
        assert!((a.value - b.value).abs() <= a.est_error.max(1e-13));
        let a = transport_limit_planar(&e, g(2.0), &spec).unwrap();
        let b = transport_limit_planar(&e, g(2.0), &fine).unwrap();
        assert!((a.value - b.value).abs() <= a.est_error.max(1e-13));
    }
}

//! Leading-order (physical-optics) scattering amplitude for impedance
//! obstacles, valid away from the forward direction.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{incident_direction, ConvexSurface, ReflectionInverter, Vec3};
use crate::impedance::Impedance;

/// Reflection factor (γ − c)/(γ + c) at incidence cosine `c`.
pub fn reflection_coefficient(gamma: Impedance, c: f64) -> Result<f64> {
    if !(-1e-12..=1.0 + 1e-12).contains(&c) {
        return Err(Error::Domain(format!("incidence cosine must lie in [0, 1], got {c}")));
    }
    let c = c.clamp(0.0, 1.0);
    if gamma.is_dirichlet() {
        return Ok(1.0);
    }
    let g = gamma.value();
    if g == 0.0 && c == 0.0 {
        return Err(Error::Indeterminate);
    }
    Ok((g - c) / (g + c))
}

/// One evaluation of the high-frequency amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplitudeSample {
    pub theta: Vec3,
    pub f: Complex64,
    pub density: f64,
}

/// Evaluates the leading-order amplitude and its limit density on one
/// surface, reusing the Gauss-map inverter across directions.
#[derive(Debug, Clone)]
pub struct HighFrequencyAmplitude<'a> {
    inverter: ReflectionInverter<'a>,
    gamma: Impedance,
}

impl<'a> HighFrequencyAmplitude<'a> {
    pub fn new(surface: &'a ConvexSurface, gamma: Impedance) -> Self {
        Self { inverter: ReflectionInverter::new(surface), gamma }
    }

    pub fn with_inverter(inverter: ReflectionInverter<'a>, gamma: Impedance) -> Self {
        Self { inverter, gamma }
    }

    pub fn gamma(&self) -> Impedance {
        self.gamma
    }

    pub fn surface(&self) -> &ConvexSurface {
        self.inverter.surface()
    }

    // Specular point, incidence cosine and reflection factor for direction θ.
    fn specular(&self, theta: &Vec3) -> Result<(Vec3, f64, f64, f64)> {
        let point = self.inverter.invert(theta)?;
        let theta = theta.normalize();
        let bisector = (theta - incident_direction()).normalize();
        let c = bisector.dot(&theta).abs();
        let rho = reflection_coefficient(self.gamma, c)?;
        Ok((point.y, point.curvature, rho, c))
    }

    /// f(θ) ≈ ½ K(y⁺)^(−1/2) exp(ik⟨y⁺, θ − θ0⟩) · (γ − c)/(γ + c).
    pub fn amplitude(&self, theta: &Vec3, k: f64) -> Result<Complex64> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::Domain(format!("wavenumber must be positive, got {k}")));
        }
        let (y, curvature, rho, _) = self.specular(theta)?;
        let unit = theta.normalize();
        let phase = k * y.dot(&(unit - incident_direction()));
        Ok(Complex64::from_polar(0.5 * rho / curvature.sqrt(), phase))
    }

    /// k-independent limit |f|² = (4K(y⁺))⁻¹ · ((γ − c)/(γ + c))².
    pub fn density(&self, theta: &Vec3) -> Result<f64> {
        let (_, curvature, rho, _) = self.specular(theta)?;
        Ok(rho * rho / (4.0 * curvature))
    }

    pub fn sample(&self, theta: &Vec3, k: f64) -> Result<AmplitudeSample> {
        let f = self.amplitude(theta, k)?;
        Ok(AmplitudeSample { theta: theta.normalize(), f, density: f.norm_sqr() })
    }
}

/// Single-direction convenience for [`HighFrequencyAmplitude::amplitude`].
pub fn amplitude_hf(surface: &ConvexSurface, theta: &Vec3, gamma: Impedance, k: f64) -> Result<Complex64> {
    HighFrequencyAmplitude::new(surface, gamma).amplitude(theta, k)
}

/// Single-direction convenience for [`HighFrequencyAmplitude::density`].
pub fn density_hf(surface: &ConvexSurface, theta: &Vec3, gamma: Impedance) -> Result<f64> {
    HighFrequencyAmplitude::new(surface, gamma).density(theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec2;
    use proptest::prelude::*;

    fn g(v: f64) -> Impedance {
        Impedance::new(v).unwrap()
    }

    #[test]
    fn reflection_coefficient_examples() {
        assert!((reflection_coefficient(g(2.0), 1.0).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(reflection_coefficient(g(0.37), 0.37).unwrap(), 0.0);
        assert_eq!(reflection_coefficient(Impedance::DIRICHLET, 0.2).unwrap(), 1.0);
        assert_eq!(reflection_coefficient(Impedance::NEUMANN, 0.2).unwrap(), -1.0);
        assert!(matches!(reflection_coefficient(Impedance::NEUMANN, 0.0), Err(Error::Indeterminate)));
        assert!(reflection_coefficient(g(1.0), 1.5).is_err());
    }

    #[test]
    fn sphere_backscatter_amplitude() {
        let s = ConvexSurface::sphere(1.0).unwrap();
        let back = Vec3::new(0.0, 0.0, -1.0);
        let f = amplitude_hf(&s, &back, Impedance::DIRICHLET, 1.0).unwrap();
        assert!((f.norm() - 0.5).abs() < 1e-12);
        // ⟨y⁺, θ − θ0⟩ = ⟨(0,0,−1), (0,0,−2)⟩ = 2
        assert!((f.arg() - 2.0).abs() < 1e-12);
        let f1 = amplitude_hf(&s, &back, g(1.0), 3.0).unwrap();
        assert!(f1.norm() < 1e-15);
    }

    #[test]
    fn ellipsoid_amplitude_uses_curvature_at_specular_point() {
        let e = ConvexSurface::ellipsoid(1.0, 1.3, 0.7).unwrap();
        let theta = Vec3::new(-1.0, 0.0, 0.0);
        let f = amplitude_hf(&e, &theta, g(2.0), 5.0).unwrap();
        // independent: closed-form Gauss-map preimage and implicit-surface curvature
        let m = Vec3::new(-1.0, 0.0, -1.0).normalize();
        let d2 = Vec3::new(1.0, 1.69, 0.49);
        let y = m.component_mul(&d2) / m.dot(&m.component_mul(&d2)).sqrt();
        let k = e.gauss_curvature(&Vec2::new(y.x, y.y)).unwrap();
        let c = m.dot(&theta).abs();
        let expected = 0.5 / k.sqrt() * (2.0 - c) / (2.0 + c);
        assert!((f.norm() / expected - 1.0).abs() < 1e-9);
    }

    #[test]
    fn density_examples() {
        let s1 = ConvexSurface::sphere(1.0).unwrap();
        let d = density_hf(&s1, &Vec3::new(0.3, 0.2, -0.5), Impedance::DIRICHLET).unwrap();
        assert!((d - 0.25).abs() < 1e-12);
        assert!(density_hf(&s1, &Vec3::new(0.0, 0.0, -1.0), g(1.0)).unwrap() < 1e-30);
        let s2 = ConvexSurface::sphere(2.0).unwrap();
        assert!((density_hf(&s2, &Vec3::new(-1.0, 0.0, 0.0), Impedance::DIRICHLET).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn forward_direction_is_guarded() {
        let s = ConvexSurface::sphere(1.0).unwrap();
        assert!(matches!(density_hf(&s, &Vec3::z(), g(1.0)), Err(Error::ForwardSingularity { .. })));
        assert!(amplitude_hf(&s, &Vec3::new(1.0, 0.0, 0.0), g(1.0), 0.0).is_err());
    }

    fn direction() -> impl Strategy<Value = Vec3> {
        // polar angle bounded away from the forward cap
        (0.05f64..std::f64::consts::PI, 0.0f64..std::f64::consts::TAU)
            .prop_map(|(t, p)| Vec3::new(t.sin() * p.cos(), t.sin() * p.sin(), t.cos()))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn density_is_modulus_squared_and_k_free(theta in direction(), gamma in 0.0f64..10.0, k in 0.5f64..200.0) {
            let e = ConvexSurface::ellipsoid(1.0, 1.3, 0.7).unwrap();
            let hf = HighFrequencyAmplitude::new(&e, g(gamma));
            let d = hf.density(&theta).unwrap();
            let s1 = hf.sample(&theta, k).unwrap();
            let s2 = hf.sample(&theta, 2.7 * k).unwrap();
            prop_assert!((s1.density - d).abs() <= 1e-12 * d.max(1e-300));
            prop_assert!((s2.density - d).abs() <= 1e-12 * d.max(1e-300));
        }

        #[test]
        fn impedance_density_bounded_by_dirichlet(theta in direction(), gamma in 0.0f64..10.0) {
            let e = ConvexSurface::ellipsoid(1.0, 1.3, 0.7).unwrap();
            let dir = density_hf(&e, &theta, Impedance::DIRICHLET).unwrap();
            let neu = density_hf(&e, &theta, Impedance::NEUMANN).unwrap();
            let mid = density_hf(&e, &theta, g(gamma)).unwrap();
            prop_assert!((dir - neu).abs() <= 1e-12 * dir);
            prop_assert!(mid >= 0.0 && mid <= dir * (1.0 + 1e-12));
        }
    }
}

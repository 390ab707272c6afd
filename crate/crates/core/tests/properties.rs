use std::f64::consts::PI;

use proptest::prelude::*;

use hfscatter::{
    classical_sigma, objective_radial, transport_hf_angular, transport_limit_planar, ConvexSurface, Impedance,
    ProfileConstraints, QuadratureSpec, RadialProfile,
};

fn g(v: f64) -> Impedance {
    Impedance::new(v).unwrap()
}

#[test]
fn radial_objective_matches_planar_functional_on_the_hemisphere() {
    let sphere = ConvexSurface::sphere(1.0).unwrap();
    let hemi = RadialProfile::from_fn(4096, 1.0, ProfileConstraints::default(), |r| r / (1.0 - r * r).sqrt()).unwrap();
    for gamma in [g(0.5), g(2.0), Impedance::DIRICHLET] {
        let planar = transport_limit_planar(&sphere, gamma, &QuadratureSpec::default()).unwrap().value;
        let radial = objective_radial(&hemi, gamma);
        assert!((radial / planar - 1.0).abs() < 1e-4, "γ={gamma}: {radial} vs {planar}");
    }
}

#[test]
fn radial_objective_matches_planar_functional_on_a_spline_cap() {
    // g(ρ) = ρ⁴/4 + ρ²/2, so u = ρ³ + ρ
    let rho: Vec<f64> = (0..=200).map(|i| i as f64 / 200.0).collect();
    let heights: Vec<f64> = rho.iter().map(|r| r.powi(4) / 4.0 + r * r / 2.0).collect();
    let cap = ConvexSurface::radial_profile(rho, heights).unwrap();
    let profile = RadialProfile::from_fn(4096, 1.0, ProfileConstraints::default(), |r| r.powi(3) + r).unwrap();
    let gamma = g(1.5);
    let planar = transport_limit_planar(&cap, gamma, &QuadratureSpec::default()).unwrap().value;
    assert!((objective_radial(&profile, gamma) / planar - 1.0).abs() < 1e-4);
}

#[test]
fn dirichlet_and_neumann_limits_coincide() {
    let e = ConvexSurface::ellipsoid(0.8, 1.1, 1.4).unwrap();
    let spec = QuadratureSpec { n_polar: 64, n_azimuth: 32, n_planar: 128, ..Default::default() };
    let d = transport_hf_angular(&e, Impedance::DIRICHLET, &spec).unwrap().value;
    let n = transport_hf_angular(&e, Impedance::NEUMANN, &spec).unwrap().value;
    assert!((d - n).abs() < 1e-12 * d);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn planar_transport_bounds(a in 0.5f64..2.0, b in 0.5f64..2.0, c in 0.5f64..2.0, gamma in 0.0f64..8.0) {
        let e = ConvexSurface::ellipsoid(a, b, c).unwrap();
        let spec = QuadratureSpec { n_planar: 96, n_azimuth: 48, ..Default::default() };
        let dir = transport_limit_planar(&e, Impedance::DIRICHLET, &spec).unwrap().value;
        let v = transport_limit_planar(&e, g(gamma), &spec).unwrap().value;
        prop_assert!(v >= 0.0);
        prop_assert!(v <= dir * (1.0 + 1e-12));
        prop_assert!(dir <= 2.0 * classical_sigma(&e));
    }

    #[test]
    fn routes_agree_on_random_ellipsoids(a in 0.6f64..1.6, b in 0.6f64..1.6, c in 0.6f64..1.6, gamma in 0.2f64..5.0) {
        let e = ConvexSurface::ellipsoid(a, b, c).unwrap();
        let spec = QuadratureSpec { n_polar: 200, n_azimuth: 128, n_planar: 256, ..Default::default() };
        let ang = transport_hf_angular(&e, g(gamma), &spec).unwrap();
        let pla = transport_limit_planar(&e, g(gamma), &spec).unwrap();
        prop_assert!((ang.value - pla.value).abs() <= 1e-6 * pla.value, "{} vs {}", ang.value, pla.value);
    }
}

#[test]
fn sphere_transport_scales_with_area() {
    let spec = QuadratureSpec::default();
    let r1 = transport_limit_planar(&ConvexSurface::sphere(1.0).unwrap(), g(2.0), &spec).unwrap().value;
    let r3 = transport_limit_planar(&ConvexSurface::sphere(3.0).unwrap(), g(2.0), &spec).unwrap().value;
    assert!((r3 / r1 - 9.0).abs() < 1e-10);
    let dir = transport_limit_planar(&ConvexSurface::sphere(3.0).unwrap(), Impedance::DIRICHLET, &spec).unwrap();
    assert!((dir.value - 9.0 * PI).abs() < 1e-8);
}

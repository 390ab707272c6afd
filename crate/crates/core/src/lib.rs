//! High-frequency scalar scattering by strictly convex obstacles with
//! impedance boundary conditions.
//!
//! The crate provides the leading-order (physical-optics) amplitude and its
//! k-independent density, total and transport cross sections by angular and
//! planar quadrature, an exact partial-wave solver for the sphere used as a
//! finite-frequency reference, and a projected-gradient optimizer for the
//! limiting transport functional over convex radial caps.

pub mod amplitude;
pub mod cli;
pub mod config;
pub mod cross_sections;
pub mod error;
pub mod geometry;
pub mod impedance;
pub mod mie;
pub mod output;
pub mod quadrature;
pub mod shape_opt;

pub use amplitude::{amplitude_hf, density_hf, reflection_coefficient, HighFrequencyAmplitude};
pub use cross_sections::{
    classical_sigma, integrate_sphere_weighted, sigma_hf_angular, transport_hf_angular, transport_limit_planar,
    CrossSectionResult, QuadratureSpec, Weight,
};
pub use error::{Error, Result};
pub use geometry::{ConvexSurface, Domain, HeightField, ReflectionInverter, Vec2, Vec3};
pub use impedance::Impedance;
pub use mie::{mie_coefficients, spherical_bessel_pair, sweep, transport_exact, MieSolution, SweepRecord};
pub use shape_opt::{
    integrand_phi, objective_radial, optimize_profile, zero_transport_slope, Goal, OptimizeOptions, OptimizeReport,
    ProfileConstraints, RadialProfile,
};

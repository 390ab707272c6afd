//! Strictly convex obstacles seen from the incident direction θ0 = (0, 0, 1).
//!
//! The illuminated cap of every surface is the graph `z = g(x1, x2)` over
//! the shadow domain `I`, with the body lying on the side `z >= g`. The
//! outward normal there is `(∇g, -1) / √(1 + |∇g|²)`, so `⟨n, θ0⟩ < 0` on the
//! whole cap. Planar coordinates `x = (x1, x2)` are the coordinates on `I`
//! for every kind of surface.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2, Vector3};

use crate::error::{Error, Result};

pub type Vec2 = Vector2<f64>;
pub type Vec3 = Vector3<f64>;

/// Angular radius (rad) of the excluded cap around the incident direction.
pub const FORWARD_GUARD: f64 = 1e-6;

const SEED_GRID: usize = 64;
const MAX_NEWTON_ITERATIONS: usize = 100;
const INVERSION_TOLERANCE: f64 = 1e-10;

/// The incident direction θ0.
pub fn incident_direction() -> Vec3 {
    Vec3::z()
}

/// Angle (rad) between a unit vector and θ0, accurate near zero.
pub fn angle_from_incident(theta: &Vec3) -> f64 {
    2.0 * ((theta - incident_direction()).norm() / 2.0).min(1.0).asin()
}

/// Specular reflection of θ0 off a plane with unit normal `n`:
/// θ = θ0 − 2⟨n, θ0⟩n.
pub fn reflect_incident(n: &Vec3) -> Vec3 {
    incident_direction() - 2.0 * n.z * n
}

/// Shadow domain `I`, centred at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Disk { radius: f64 },
    Ellipse { a: f64, b: f64 },
    Rectangle { x_min: f64, x_max: f64, y_min: f64, y_max: f64 },
}

impl Domain {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Domain::Disk { radius } => radius > 0.0 && radius.is_finite(),
            Domain::Ellipse { a, b } => a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite(),
            Domain::Rectangle { x_min, x_max, y_min, y_max } => {
                x_max > x_min && y_max > y_min && (x_max - x_min).is_finite() && (y_max - y_min).is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("planar domain {self:?} must be bounded with positive area")))
        }
    }

    pub fn area(&self) -> f64 {
        match *self {
            Domain::Disk { radius } => PI * radius * radius,
            Domain::Ellipse { a, b } => PI * a * b,
            Domain::Rectangle { x_min, x_max, y_min, y_max } => (x_max - x_min) * (y_max - y_min),
        }
    }

    /// Closed-set membership.
    pub fn contains(&self, x: &Vec2) -> bool {
        self.level(x) <= 1.0
    }

    /// Open-set membership.
    pub fn contains_interior(&self, x: &Vec2) -> bool {
        self.level(x) < 1.0
    }

    // <= 1 inside, 1 on the boundary
    fn level(&self, x: &Vec2) -> f64 {
        match *self {
            Domain::Disk { radius } => x.norm_squared() / (radius * radius),
            Domain::Ellipse { a, b } => (x.x / a).powi(2) + (x.y / b).powi(2),
            Domain::Rectangle { x_min, x_max, y_min, y_max } => {
                let cx = 0.5 * (x_min + x_max);
                let cy = 0.5 * (y_min + y_max);
                let hx = 0.5 * (x_max - x_min);
                let hy = 0.5 * (y_max - y_min);
                ((x.x - cx) / hx).abs().max(((x.y - cy) / hy).abs())
            }
        }
    }

    pub fn bounding_box(&self) -> (Vec2, Vec2) {
        match *self {
            Domain::Disk { radius } => (Vec2::new(-radius, -radius), Vec2::new(radius, radius)),
            Domain::Ellipse { a, b } => (Vec2::new(-a, -b), Vec2::new(a, b)),
            Domain::Rectangle { x_min, x_max, y_min, y_max } => (Vec2::new(x_min, y_min), Vec2::new(x_max, y_max)),
        }
    }

    /// Point at relative radius `s ∈ [0, 1]` and angle `phi`: the scaled
    /// boundary curve for disks and ellipses, concentric squares for
    /// rectangles.
    pub fn polar_point(&self, s: f64, phi: f64) -> Vec2 {
        let (c, sn) = (phi.cos(), phi.sin());
        match *self {
            Domain::Disk { radius } => Vec2::new(radius * s * c, radius * s * sn),
            Domain::Ellipse { a, b } => Vec2::new(a * s * c, b * s * sn),
            Domain::Rectangle { x_min, x_max, y_min, y_max } => {
                let scale = c.abs().max(sn.abs());
                Vec2::new(
                    0.5 * (x_min + x_max) + 0.5 * (x_max - x_min) * s * c / scale,
                    0.5 * (y_min + y_max) + 0.5 * (y_max - y_min) * s * sn / scale,
                )
            }
        }
    }
}

/// Cubic spline of a radial height profile g(ρ), with g'(0) = 0 at the axis
/// and a natural end at ρ_max.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialSpline {
    rho: Vec<f64>,
    g: Vec<f64>,
    m: Vec<f64>,
}

impl RadialSpline {
    pub fn new(rho: Vec<f64>, g: Vec<f64>) -> Result<Self> {
        let n = rho.len();
        if n < 2 || g.len() != n {
            return Err(Error::Parse(format!(
                "radial profile needs at least two (rho, g) samples of equal length, got {} and {}",
                n,
                g.len()
            )));
        }
        if rho[0] != 0.0 {
            return Err(Error::Parse(format!("radial profile must start at rho = 0, got {}", rho[0])));
        }
        if rho.windows(2).any(|w| !(w[1] > w[0])) || rho.iter().chain(&g).any(|v| !v.is_finite()) {
            return Err(Error::Parse("radial profile rho must be finite and strictly increasing".into()));
        }

        // Tridiagonal system for the knot second derivatives.
        let h: Vec<f64> = rho.windows(2).map(|w| w[1] - w[0]).collect();
        let mut sub = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut sup = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        diag[0] = 2.0 * h[0];
        sup[0] = h[0];
        rhs[0] = 6.0 * (g[1] - g[0]) / h[0];
        for i in 1..n - 1 {
            sub[i] = h[i - 1];
            diag[i] = 2.0 * (h[i - 1] + h[i]);
            sup[i] = h[i];
            rhs[i] = 6.0 * ((g[i + 1] - g[i]) / h[i] - (g[i] - g[i - 1]) / h[i - 1]);
        }
        diag[n - 1] = 1.0;
        rhs[n - 1] = 0.0;
        for i in 1..n {
            let w = sub[i] / diag[i - 1];
            diag[i] -= w * sup[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        let mut m = vec![0.0; n];
        m[n - 1] = rhs[n - 1] / diag[n - 1];
        for i in (0..n - 1).rev() {
            m[i] = (rhs[i] - sup[i] * m[i + 1]) / diag[i];
        }
        Ok(Self { rho, g, m })
    }

    pub fn rho_max(&self) -> f64 {
        *self.rho.last().unwrap()
    }

    fn segment(&self, r: f64) -> usize {
        match self.rho.binary_search_by(|v| v.total_cmp(&r)) {
            Ok(i) => i.min(self.rho.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.rho.len() - 2),
        }
    }

    /// (g, g', g'') at radius `r`.
    pub fn eval(&self, r: f64) -> (f64, f64, f64) {
        let i = self.segment(r);
        let h = self.rho[i + 1] - self.rho[i];
        let t = r - self.rho[i];
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let b = (self.g[i + 1] - self.g[i]) / h - h * (2.0 * m0 + m1) / 6.0;
        let value = self.g[i] + b * t + 0.5 * m0 * t * t + (m1 - m0) / (6.0 * h) * t * t * t;
        let d1 = b + m0 * t + (m1 - m0) / (2.0 * h) * t * t;
        let d2 = m0 + (m1 - m0) * t / h;
        (value, d1, d2)
    }
}

/// Height functions for graph-kind surfaces.
#[derive(Debug, Clone, PartialEq)]
pub enum HeightField {
    /// g ≡ height (flat face; not strictly convex).
    Plane { height: f64 },
    /// g = (k1·x1² + k2·x2²) / 2.
    Paraboloid { k1: f64, k2: f64 },
    /// g = slope·|x| (not strictly convex).
    Cone { slope: f64 },
    /// Rotationally symmetric g(|x|).
    Radial(RadialSpline),
}

impl HeightField {
    fn height(&self, x: &Vec2) -> f64 {
        match self {
            HeightField::Plane { height } => *height,
            HeightField::Paraboloid { k1, k2 } => 0.5 * (k1 * x.x * x.x + k2 * x.y * x.y),
            HeightField::Cone { slope } => slope * x.norm(),
            HeightField::Radial(s) => s.eval(x.norm()).0,
        }
    }

    fn gradient(&self, x: &Vec2) -> Vec2 {
        match self {
            HeightField::Plane { .. } => Vec2::zeros(),
            HeightField::Paraboloid { k1, k2 } => Vec2::new(k1 * x.x, k2 * x.y),
            HeightField::Cone { slope } => {
                let r = x.norm();
                if r == 0.0 {
                    Vec2::zeros()
                } else {
                    x * (slope / r)
                }
            }
            HeightField::Radial(s) => {
                let r = x.norm();
                if r == 0.0 {
                    Vec2::zeros()
                } else {
                    x * (s.eval(r).1 / r)
                }
            }
        }
    }

    fn hessian(&self, x: &Vec2) -> Matrix2<f64> {
        match self {
            HeightField::Plane { .. } => Matrix2::zeros(),
            HeightField::Paraboloid { k1, k2 } => Matrix2::new(*k1, 0.0, 0.0, *k2),
            HeightField::Cone { slope } => {
                let r = x.norm();
                if r == 0.0 {
                    return Matrix2::zeros();
                }
                let e = x / r;
                (Matrix2::identity() - e * e.transpose()) * (slope / r)
            }
            HeightField::Radial(s) => {
                let r = x.norm();
                let (_, d1, d2) = s.eval(r);
                if r < 1e-14 {
                    return Matrix2::identity() * d2;
                }
                let e = x / r;
                let radial = e * e.transpose();
                radial * d2 + (Matrix2::identity() - radial) * (d1 / r)
            }
        }
    }

    fn is_radially_symmetric(&self) -> bool {
        match self {
            HeightField::Paraboloid { k1, k2 } => k1 == k2,
            _ => true,
        }
    }
}

/// A strictly convex obstacle, represented through its illuminated cap.
#[derive(Debug, Clone, PartialEq)]
pub enum ConvexSurface {
    /// Sphere of the given radius centred at the origin.
    Sphere { radius: f64 },
    /// Ellipsoid with semi-axes `a`, `b`, `c` along x, y, z, centred at the origin.
    Ellipsoid { a: f64, b: f64, c: f64 },
    /// Visible part given directly as a graph over a planar domain.
    Graph { field: HeightField, domain: Domain },
}

/// A point of the illuminated cap with its differential data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    /// Planar coordinates on `I`.
    pub x: Vec2,
    /// Position on the boundary.
    pub y: Vec3,
    /// Outward unit normal.
    pub normal: Vec3,
    /// Gaussian curvature (1/length²).
    pub curvature: f64,
}

impl ConvexSurface {
    pub fn sphere(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Domain(format!("sphere radius must be positive, got {radius}")));
        }
        Ok(ConvexSurface::Sphere { radius })
    }

    pub fn ellipsoid(a: f64, b: f64, c: f64) -> Result<Self> {
        if ![a, b, c].iter().all(|v| *v > 0.0 && v.is_finite()) {
            return Err(Error::Domain(format!("ellipsoid semi-axes must be positive, got ({a}, {b}, {c})")));
        }
        Ok(ConvexSurface::Ellipsoid { a, b, c })
    }

    pub fn graph(field: HeightField, domain: Domain) -> Result<Self> {
        domain.validate()?;
        Ok(ConvexSurface::Graph { field, domain })
    }

    /// Radial profile g(ρ) sampled on `0 = ρ_0 < … < ρ_max`.
    pub fn radial_profile(rho: Vec<f64>, g: Vec<f64>) -> Result<Self> {
        let spline = RadialSpline::new(rho, g)?;
        let radius = spline.rho_max();
        Self::graph(HeightField::Radial(spline), Domain::Disk { radius })
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            ConvexSurface::Sphere { .. } => "sphere",
            ConvexSurface::Ellipsoid { .. } => "ellipsoid",
            ConvexSurface::Graph { field: HeightField::Radial(_), .. } => "radial-profile",
            ConvexSurface::Graph { .. } => "graph",
        }
    }

    pub fn domain(&self) -> Domain {
        match self {
            ConvexSurface::Sphere { radius } => Domain::Disk { radius: *radius },
            ConvexSurface::Ellipsoid { a, b, .. } => Domain::Ellipse { a: *a, b: *b },
            ConvexSurface::Graph { domain, .. } => *domain,
        }
    }

    /// True when the visible graph depends on |x| only and `I` is a disk.
    pub fn is_radially_symmetric(&self) -> bool {
        match self {
            ConvexSurface::Sphere { .. } => true,
            ConvexSurface::Ellipsoid { a, b, .. } => a == b,
            ConvexSurface::Graph { field, domain } => {
                matches!(domain, Domain::Disk { .. }) && field.is_radially_symmetric()
            }
        }
    }

    fn check_closed(&self, x: &Vec2) -> Result<()> {
        if x.iter().all(|v| v.is_finite()) && self.domain().contains(x) {
            Ok(())
        } else {
            Err(Error::Domain(format!("point ({}, {}) lies outside the planar domain", x.x, x.y)))
        }
    }

    fn check_interior(&self, x: &Vec2) -> Result<()> {
        let analytic = matches!(self, ConvexSurface::Sphere { .. } | ConvexSurface::Ellipsoid { .. });
        let inside = if analytic { self.domain().contains_interior(x) } else { self.domain().contains(x) };
        if x.iter().all(|v| v.is_finite()) && inside {
            Ok(())
        } else {
            Err(Error::Domain(format!("point ({}, {}) is not interior to the planar domain", x.x, x.y)))
        }
    }

    // 1 - x1²/a² - x2²/b², factored where it loses digits near the rim
    fn ellipsoid_w2(a: f64, b: f64, x: &Vec2) -> f64 {
        if a == b {
            let r = x.norm() / a;
            ((1.0 - r) * (1.0 + r)).max(0.0)
        } else {
            (1.0 - (x.x / a).powi(2) - (x.y / b).powi(2)).max(0.0)
        }
    }

    /// Height g(x) of the illuminated cap.
    pub fn height(&self, x: &Vec2) -> Result<f64> {
        self.check_closed(x)?;
        Ok(match self {
            ConvexSurface::Sphere { radius } => -radius * Self::ellipsoid_w2(*radius, *radius, x).sqrt(),
            ConvexSurface::Ellipsoid { a, b, c } => -c * Self::ellipsoid_w2(*a, *b, x).sqrt(),
            ConvexSurface::Graph { field, .. } => field.height(x),
        })
    }

    /// ∇g(x); infinite on the rim of closed bodies, hence interior only.
    pub fn gradient(&self, x: &Vec2) -> Result<Vec2> {
        self.check_interior(x)?;
        Ok(match self {
            ConvexSurface::Sphere { radius } => {
                let w = Self::ellipsoid_w2(*radius, *radius, x).sqrt();
                x / (radius * w)
            }
            ConvexSurface::Ellipsoid { a, b, c } => {
                let w = Self::ellipsoid_w2(*a, *b, x).sqrt();
                Vec2::new(c * x.x / (a * a * w), c * x.y / (b * b * w))
            }
            ConvexSurface::Graph { field, .. } => field.gradient(x),
        })
    }

    /// Hessian of g at an interior point.
    pub fn hessian(&self, x: &Vec2) -> Result<Matrix2<f64>> {
        self.check_interior(x)?;
        let (a, b, c) = match *self {
            ConvexSurface::Sphere { radius } => (radius, radius, radius),
            ConvexSurface::Ellipsoid { a, b, c } => (a, b, c),
            ConvexSurface::Graph { ref field, .. } => return Ok(field.hessian(x)),
        };
        let w = Self::ellipsoid_w2(a, b, x).sqrt();
        let w3 = w * w * w;
        let (a2, b2) = (a * a, b * b);
        let g11 = c / (a2 * w) + c * x.x * x.x / (a2 * a2 * w3);
        let g22 = c / (b2 * w) + c * x.y * x.y / (b2 * b2 * w3);
        let g12 = c * x.x * x.y / (a2 * b2 * w3);
        Ok(Matrix2::new(g11, g12, g12, g22))
    }

    /// Outward unit normal at the cap point above `x`.
    pub fn outward_normal(&self, x: &Vec2) -> Result<Vec3> {
        self.check_closed(x)?;
        let (a, b, c) = match *self {
            ConvexSurface::Sphere { radius } => (radius, radius, radius),
            ConvexSurface::Ellipsoid { a, b, c } => (a, b, c),
            ConvexSurface::Graph { ref field, .. } => {
                let p = field.gradient(x);
                return Ok(Vec3::new(p.x, p.y, -1.0).normalize());
            }
        };
        // Gradient of the implicit form, finite up to and including the rim.
        let z = -c * Self::ellipsoid_w2(a, b, x).sqrt();
        Ok(Vec3::new(x.x / (a * a), x.y / (b * b), z / (c * c)).normalize())
    }

    /// Gaussian curvature of the cap point above `x`.
    pub fn gauss_curvature(&self, x: &Vec2) -> Result<f64> {
        self.check_closed(x)?;
        let k = match *self {
            ConvexSurface::Sphere { radius } => 1.0 / (radius * radius),
            ConvexSurface::Ellipsoid { a, b, c } => {
                let z2 = c * c * Self::ellipsoid_w2(a, b, x);
                let q = x.x * x.x / a.powi(4) + x.y * x.y / b.powi(4) + z2 / c.powi(4);
                1.0 / ((a * b * c).powi(2) * q * q)
            }
            ConvexSurface::Graph { ref field, .. } => {
                let p = field.gradient(x);
                let h = field.hessian(x);
                let s2 = 1.0 + p.norm_squared();
                h.determinant() / (s2 * s2)
            }
        };
        if k > 0.0 && k.is_finite() {
            Ok(k)
        } else {
            Err(Error::ConvexityViolation { x1: x.x, x2: x.y, curvature: k })
        }
    }

    /// Position, normal and curvature at planar coordinates `x`.
    pub fn surface_point(&self, x: &Vec2) -> Result<SurfacePoint> {
        let z = self.height(x)?;
        Ok(SurfacePoint {
            x: *x,
            y: Vec3::new(x.x, x.y, z),
            normal: self.outward_normal(x)?,
            curvature: self.gauss_curvature(x)?,
        })
    }

    /// Direction θ(x) = θ0 − 2⟨n(x), θ0⟩n(x) of the specularly reflected ray.
    pub fn reflection_direction(&self, x: &Vec2) -> Result<Vec3> {
        let n = self.outward_normal(x)?;
        if n.z >= 0.0 {
            return Err(Error::Domain(format!(
                "point ({}, {}) is not on the illuminated cap (<n, theta0> = {})",
                x.x, x.y, n.z
            )));
        }
        Ok(reflect_incident(&n))
    }

    /// Derivative of the horizontal normal components (n1, n2) with respect
    /// to planar coordinates.
    fn normal_jacobian(&self, x: &Vec2) -> Result<Matrix2<f64>> {
        let p = self.gradient(x)?;
        let h = self.hessian(x)?;
        let p2 = p.norm_squared();
        let s = (1.0 + p2).sqrt();
        // I - p pᵀ/s², written without cancellation for large |p|
        let projector = if p2 > 0.0 {
            let e = p / p2.sqrt();
            let ee = e * e.transpose();
            (Matrix2::identity() - ee) + ee / (s * s)
        } else {
            Matrix2::identity()
        };
        Ok(projector * h / s)
    }

    /// Central-difference determinant D(cos θ̃, φ̃)/D(x1, x2) of the spherical
    /// coordinates of the reflection map. Its modulus is 4K(x).
    pub fn reflection_jacobian_numeric(&self, x: &Vec2, h: f64) -> Result<f64> {
        if !(h > 0.0) {
            return Err(Error::Domain(format!("finite-difference step must be positive, got {h}")));
        }
        let p = self.gradient(x)?;
        if p.norm() < 1e-8 {
            return Err(Error::DegenerateCoordinates { x1: x.x, x2: x.y });
        }
        let coords = |pt: Vec2| -> Result<(f64, f64)> {
            self.check_interior(&pt)?;
            let t = self.reflection_direction(&pt)?;
            Ok((t.z, t.y.atan2(t.x)))
        };
        let wrap = |d: f64| d - 2.0 * PI * (d / (2.0 * PI)).round();
        let mut dc = [0.0; 2];
        let mut dphi = [0.0; 2];
        for axis in 0..2 {
            let mut step = Vec2::zeros();
            step[axis] = h;
            let (cp, pp) = coords(x + step)?;
            let (cm, pm) = coords(x - step)?;
            dc[axis] = (cp - cm) / (2.0 * h);
            dphi[axis] = wrap(pp - pm) / (2.0 * h);
        }
        Ok(dc[0] * dphi[1] - dphi[0] * dc[1])
    }

    /// Preimage y⁺(θ) of a scattering direction under the reflection map.
    /// Builds a fresh [`ReflectionInverter`]; reuse one for batches.
    pub fn invert_reflection_map(&self, theta: &Vec3) -> Result<SurfacePoint> {
        ReflectionInverter::new(self).invert(theta)
    }
}

/// Inverts the reflection map of one surface by damped Newton iteration,
/// seeded from a cached 64×64 grid of cap normals.
#[derive(Debug, Clone)]
pub struct ReflectionInverter<'a> {
    surface: &'a ConvexSurface,
    seeds: Vec<(Vec2, Vec3)>,
    forward_guard: f64,
}

impl<'a> ReflectionInverter<'a> {
    pub fn new(surface: &'a ConvexSurface) -> Self {
        Self::with_guard(surface, FORWARD_GUARD)
    }

    pub fn with_guard(surface: &'a ConvexSurface, forward_guard: f64) -> Self {
        let domain = surface.domain();
        let (lo, hi) = domain.bounding_box();
        let mut seeds = Vec::with_capacity(SEED_GRID * SEED_GRID);
        for i in 0..SEED_GRID {
            for j in 0..SEED_GRID {
                let x = Vec2::new(
                    lo.x + (hi.x - lo.x) * (i as f64 + 0.5) / SEED_GRID as f64,
                    lo.y + (hi.y - lo.y) * (j as f64 + 0.5) / SEED_GRID as f64,
                );
                if !domain.contains_interior(&x) {
                    continue;
                }
                if let Ok(n) = surface.outward_normal(&x) {
                    seeds.push((x, n));
                }
            }
        }
        Self { surface, seeds, forward_guard }
    }

    pub fn surface(&self) -> &ConvexSurface {
        self.surface
    }

    pub fn forward_guard(&self) -> f64 {
        self.forward_guard
    }

    // Unit normal (θ − θ0)/|θ − θ0| required at the specular point.
    fn target_normal(&self, theta: &Vec3) -> Result<Vec3> {
        let norm = theta.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Domain("scattering direction must be a nonzero finite vector".into()));
        }
        let theta = theta / norm;
        let angle = angle_from_incident(&theta);
        if angle < self.forward_guard {
            return Err(Error::ForwardSingularity { angle, eps: self.forward_guard });
        }
        Ok((theta - incident_direction()).normalize())
    }

    /// Cap point whose outward normal is (θ − θ0)/|θ − θ0|, i.e. whose
    /// specular reflection of θ0 is θ.
    ///
    /// Spheres and ellipsoids use the closed-form inverse Gauss map
    /// y = D²m/√(mᵀD²m), D = diag(a, b, c); graphs use [`Self::invert_newton`].
    pub fn invert(&self, theta: &Vec3) -> Result<SurfacePoint> {
        let m = self.target_normal(theta)?;
        let (a, b, c) = match *self.surface {
            ConvexSurface::Sphere { radius } => (radius, radius, radius),
            ConvexSurface::Ellipsoid { a, b, c } => (a, b, c),
            ConvexSurface::Graph { .. } => return self.newton(&m),
        };
        let d2m = Vec3::new(a * a * m.x, b * b * m.y, c * c * m.z);
        let y = d2m / m.dot(&d2m).sqrt();
        let x = Vec2::new(y.x, y.y);
        let curvature = self.surface.gauss_curvature(&x)?;
        Ok(SurfacePoint { x, y, normal: m, curvature })
    }

    /// Damped Newton inversion from the nearest cached seed, for any kind.
    pub fn invert_newton(&self, theta: &Vec3) -> Result<SurfacePoint> {
        let m = self.target_normal(theta)?;
        self.newton(&m)
    }

    fn newton(&self, target: &Vec3) -> Result<SurfacePoint> {
        let target = *target;
        let target_h = Vec2::new(target.x, target.y);

        let (mut x, mut normal) = self
            .seeds
            .iter()
            .max_by(|a, b| a.1.dot(&target).total_cmp(&b.1.dot(&target)))
            .copied()
            .ok_or_else(|| Error::Domain("planar domain admits no seed points".into()))?;
        let domain = self.surface.domain();
        let mut residual = (normal - target).norm();
        let mut iterations = 0;

        while iterations < MAX_NEWTON_ITERATIONS && residual > 1e-15 {
            iterations += 1;
            let jac = match self.surface.normal_jacobian(&x) {
                Ok(j) => j,
                Err(_) => break,
            };
            let rhs = target_h - Vec2::new(normal.x, normal.y);
            let Some(delta) = jac.lu().solve(&rhs) else { break };
            let mut step = 1.0;
            let mut accepted = false;
            while step > 1e-12 {
                let cand = x + delta * step;
                if domain.contains_interior(&cand) {
                    if let Ok(n) = self.surface.outward_normal(&cand) {
                        let r = (n - target).norm();
                        if r < residual {
                            x = cand;
                            normal = n;
                            residual = r;
                            accepted = true;
                            break;
                        }
                    }
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
        }

        if residual <= INVERSION_TOLERANCE {
            self.surface.surface_point(&x)
        } else {
            Err(Error::Convergence { iterations, residual })
        }
    }
}

//! Analytic level-set fields, signed distance functions, test integrands and
//! the closest-point projection.
//!
//! All fields are immutable value objects; evaluation is pure and safe to call
//! from any number of threads. Gradient norms are supplied analytically per
//! shape; there is no finite-difference gradient path.

use std::sync::Arc;
use thiserror::Error;

/// Points are stored as `[x, y, z]`; 2D shapes ignore the third component.
pub type Point = [f64; 3];

type ScalarFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("arc endpoints coincide (radius {0})")]
    DegenerateArc(f64),
    #[error("gradient norm {0} deviates from 1 by more than 1e-6; closest point undefined here")]
    UndefinedGradient(f64),
}

/// A level-set function together with its gradient-norm provider.
#[derive(Clone)]
pub struct ImplicitField {
    pub dim: usize,
    /// When set, `grad_norm` is identically 1 and `phi` is 1-Lipschitz.
    pub is_distance: bool,
    phi: ScalarFn,
    grad_norm: ScalarFn,
}

impl ImplicitField {
    pub fn new(
        dim: usize,
        is_distance: bool,
        phi: impl Fn(Point) -> f64 + Send + Sync + 'static,
        grad_norm: impl Fn(Point) -> f64 + Send + Sync + 'static,
    ) -> Self {
        assert!(dim == 2 || dim == 3, "dim must be 2 or 3");
        ImplicitField {
            dim,
            is_distance,
            phi: Arc::new(phi),
            grad_norm: Arc::new(grad_norm),
        }
    }

    #[inline]
    pub fn phi(&self, p: Point) -> f64 {
        (self.phi)(p)
    }

    #[inline]
    pub fn grad_norm(&self, p: Point) -> f64 {
        (self.grad_norm)(p)
    }
}

impl std::fmt::Debug for ImplicitField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ImplicitField")
            .field("dim", &self.dim)
            .field("is_distance", &self.is_distance)
            .finish()
    }
}

/// An integrand over the ambient space, with optional singular points used by
/// the band policies.
#[derive(Clone)]
pub struct Integrand {
    f: ScalarFn,
    pub singular_points: Vec<Point>,
}

impl Integrand {
    pub fn new(f: impl Fn(Point) -> f64 + Send + Sync + 'static, singular: Vec<Point>) -> Self {
        Integrand {
            f: Arc::new(f),
            singular_points: singular,
        }
    }

    #[inline]
    pub fn eval(&self, p: Point) -> f64 {
        (self.f)(p)
    }
}

impl std::fmt::Debug for Integrand {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Integrand")
            .field("singular_points", &self.singular_points)
            .finish()
    }
}

/// `φ(x,y) = x² + y² − r₀²` with the exact gradient norm `2√(x²+y²)`.
pub fn make_circle_quadratic(r0: f64) -> ImplicitField {
    assert!(r0 > 0.0 && r0 < 1.0);
    ImplicitField::new(
        2,
        false,
        move |p| p[0] * p[0] + p[1] * p[1] - r0 * r0,
        |p| 2.0 * (p[0] * p[0] + p[1] * p[1]).sqrt(),
    )
}

/// `φ(x,y) = √(x²+y²) − r₀`, the signed distance to the circle.
pub fn make_circle_sdf(r0: f64) -> ImplicitField {
    assert!(r0 > 0.0 && r0 < 1.0);
    ImplicitField::new(
        2,
        true,
        move |p| (p[0] * p[0] + p[1] * p[1]).sqrt() - r0,
        |_| 1.0,
    )
}

/// `φ(x,y,z) = √(x²+y²+z²) − r₀`, the signed distance to the sphere.
pub fn make_sphere_sdf(r0: f64) -> ImplicitField {
    assert!(r0 > 0.0 && r0 < 1.0);
    ImplicitField::new(
        3,
        true,
        move |p| (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt() - r0,
        |_| 1.0,
    )
}

/// Signed distance to the four-cusped star made of quarter arcs of radius
/// `r0` centered at `(±r0, ±r0)`, with cusps on the axes at `(±r0, 0)` and
/// `(0, ±r0)`. Negative inside the enclosed region.
///
/// The arcs join tangentially at the cusps; the curve length is `4·(π/2)·r0`.
/// Distances use exact circle projection with angular containment tests; arc
/// endpoint distances break ties outside the containment sector.
pub fn make_cusp_star_sdf(r0: f64) -> Result<ImplicitField, GeometryError> {
    if r0.is_nan() || r0 <= 0.0 {
        return Err(GeometryError::DegenerateArc(r0));
    }
    assert!(r0 < 1.0);
    Ok(ImplicitField::new(
        2,
        true,
        move |p| cusp_star_distance(r0, p[0], p[1]),
        |_| 1.0,
    ))
}

fn cusp_star_distance(r0: f64, x: f64, y: f64) -> f64 {
    let mut dist = f64::INFINITY;
    let mut inside = x.abs() + y.abs() < r0;
    for sx in [1.0f64, -1.0] {
        for sy in [1.0f64, -1.0] {
            let (vx, vy) = (x - sx * r0, y - sy * r0);
            let vn = (vx * vx + vy * vy).sqrt();
            let d = if sx * vx <= 0.0 && sy * vy <= 0.0 {
                (vn - r0).abs()
            } else {
                // Nearer of the two arc endpoints (sx·r0, 0) and (0, sy·r0).
                let e1 = ((x - sx * r0) * (x - sx * r0) + y * y).sqrt();
                let e2 = (x * x + (y - sy * r0) * (y - sy * r0)).sqrt();
                e1.min(e2)
            };
            dist = dist.min(d);
            inside &= vn > r0;
        }
    }
    if inside {
        -dist
    } else {
        dist
    }
}

/// Length of the star's inward offset curve `{d = −delta}`: four arcs of
/// radius `r0+delta` around the same centers, meeting at corners on the axes.
pub fn cusp_star_offset_length(r0: f64, delta: f64) -> f64 {
    assert!(delta > 0.0 && delta < r0);
    let s = (2.0 * r0 * delta + delta * delta).sqrt();
    4.0 * (r0 + delta) * (std::f64::consts::FRAC_PI_2 - 2.0 * (s / r0).atan())
}

/// `φ = |x|+|y|(+|z|) − r₀` with the constant gradient norm `√dim`, the
/// value assigned globally including at the non-smooth points.
pub fn make_l1_ball(dim: usize, r0: f64) -> ImplicitField {
    assert!(dim == 2 || dim == 3);
    assert!(r0 > 0.0 && r0 <= 1.0);
    let g = (dim as f64).sqrt();
    if dim == 2 {
        ImplicitField::new(2, false, move |p| p[0].abs() + p[1].abs() - r0, move |_| g)
    } else {
        ImplicitField::new(
            3,
            false,
            move |p| p[0].abs() + p[1].abs() + p[2].abs() - r0,
            move |_| g,
        )
    }
}

/// `φ⁽²⁾ = sgn(φ)·φ²` with `|∇φ⁽²⁾| = √(8|φ⁽²⁾|)`.
///
/// The gradient-norm formula bakes in `|∇φ| = √2`, so `base` must be the 2D
/// ℓ1 field with r₀ = 1.
pub fn make_squared_variant(base: &ImplicitField) -> ImplicitField {
    assert_eq!(base.dim, 2);
    let inner = base.clone();
    let inner2 = base.clone();
    ImplicitField::new(
        2,
        false,
        move |p| {
            let v = inner.phi(p);
            v.signum() * v * v
        },
        move |p| {
            let v = inner2.phi(p);
            (8.0 * (v * v)).sqrt()
        },
    )
}

/// `φ = ψ(d)` with `ψ(d) = d^q` (odd `q`) or `sgn(d)·|d|^q` (even `q`,
/// requires `signed`); `|∇φ| = q·|d|^{q−1}`.
pub fn make_power_of_distance(base_sdf: &ImplicitField, q: u32, signed: bool) -> ImplicitField {
    assert!(base_sdf.is_distance, "base field must be a signed distance");
    assert!(q >= 1);
    assert!(
        q % 2 == 1 || signed,
        "even exponents need the signed flag to keep the level function monotone"
    );
    if q == 1 {
        return base_sdf.clone();
    }
    let inner = base_sdf.clone();
    let inner2 = base_sdf.clone();
    ImplicitField::new(
        base_sdf.dim,
        false,
        move |p| {
            let d = inner.phi(p);
            if q % 2 == 1 {
                d.powi(q as i32)
            } else {
                d.signum() * d.abs().powi(q as i32)
            }
        },
        move |p| {
            let d = inner2.phi(p);
            q as f64 * d.abs().powi(q as i32 - 1)
        },
    )
}

/// Closest-point projection `P(x) = x − d(x)·∇d(x)`.
///
/// `grad` supplies the distance gradient; fails with `UndefinedGradient` when
/// `|∇d|` deviates from 1 by more than 1e-6 at `x` (kink or skeleton point).
pub fn closest_point(
    field: &ImplicitField,
    grad: impl Fn(Point) -> [f64; 3],
    x: Point,
) -> Result<Point, GeometryError> {
    assert!(field.is_distance);
    let g = grad(x);
    let norm = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
    if (norm - 1.0).abs() > 1e-6 {
        return Err(GeometryError::UndefinedGradient(norm));
    }
    let d = field.phi(x);
    Ok([x[0] - d * g[0], x[1] - d * g[1], x[2] - d * g[2]])
}

/// Built-in integrands.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IntegrandKind {
    ConstantOne,
    /// `min(|θ−0.3|, |θ−2π−0.3|)` with `θ = atan2` mapped to `[0, 2π)`.
    ThetaSawtooth,
    /// `1/√‖x−c‖` with the value at `c` itself set to 1e9.
    InverseSqrtAt(Point),
}

pub fn make_integrand(kind: IntegrandKind) -> Integrand {
    match kind {
        IntegrandKind::ConstantOne => Integrand::new(|_| 1.0, vec![]),
        IntegrandKind::ThetaSawtooth => Integrand::new(
            |p| {
                let mut theta = p[1].atan2(p[0]);
                if theta < 0.0 {
                    theta += 2.0 * std::f64::consts::PI;
                }
                (theta - 0.3)
                    .abs()
                    .min((theta - 2.0 * std::f64::consts::PI - 0.3).abs())
            },
            vec![],
        ),
        IntegrandKind::InverseSqrtAt(c) => Integrand::new(
            move |p| {
                let dx = p[0] - c[0];
                let dy = p[1] - c[1];
                let dz = p[2] - c[2];
                let r = (dx * dx + dy * dy + dz * dz).sqrt();
                if r == 0.0 {
                    1e9
                } else {
                    1.0 / r.sqrt()
                }
            },
            vec![c],
        ),
    }
}

/// Shapes addressable by name from the CLI and the study registry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShapeKind {
    CircleQuadratic,
    CircleSdf,
    CuspStarSdf,
    L1Ball2D,
    L1Ball3D,
    SquaredL1,
    PowerOfDistance,
}

#[derive(Debug, Clone, Copy)]
pub struct ShapeDescriptor {
    pub kind: ShapeKind,
    pub r0: f64,
    /// ψ exponent for `PowerOfDistance`.
    pub power: u32,
    pub signed: bool,
}

impl ShapeDescriptor {
    pub fn by_name(name: &str, r0: f64, power: u32, signed: bool) -> Option<ShapeDescriptor> {
        let kind = match name {
            "circle-quadratic" => ShapeKind::CircleQuadratic,
            "circle-sdf" => ShapeKind::CircleSdf,
            "cusp-star" => ShapeKind::CuspStarSdf,
            "l1-2d" => ShapeKind::L1Ball2D,
            "l1-3d" => ShapeKind::L1Ball3D,
            "l1-squared" => ShapeKind::SquaredL1,
            "power-of-distance" => ShapeKind::PowerOfDistance,
            _ => return None,
        };
        Some(ShapeDescriptor {
            kind,
            r0,
            power,
            signed,
        })
    }

    /// Checks the parameter ranges the constructors assert on; returns a
    /// description of the first violation. Meant for input validation ahead
    /// of [`ShapeDescriptor::build`].
    pub fn validate(&self) -> Result<(), String> {
        match self.kind {
            ShapeKind::L1Ball2D | ShapeKind::L1Ball3D => {
                if !(self.r0 > 0.0 && self.r0 <= 1.0) {
                    return Err(format!("r0 must lie in (0, 1], got {}", self.r0));
                }
            }
            ShapeKind::SquaredL1 => {
                if (self.r0 - 1.0).abs() > 1e-12 {
                    return Err("the squared variant is defined on the unit ball (r0 = 1)".into());
                }
            }
            _ => {
                if !(self.r0 > 0.0 && self.r0 < 1.0) {
                    return Err(format!("r0 must lie in (0, 1), got {}", self.r0));
                }
            }
        }
        if self.kind == ShapeKind::PowerOfDistance {
            if self.power < 1 {
                return Err("power must be at least 1".into());
            }
            if self.power.is_multiple_of(2) && !self.signed {
                return Err(format!(
                    "even power {} needs the signed flag to keep the level function monotone",
                    self.power
                ));
            }
        }
        Ok(())
    }

    pub fn names() -> &'static [&'static str] {
        &[
            "circle-quadratic",
            "circle-sdf",
            "cusp-star",
            "l1-2d",
            "l1-3d",
            "l1-squared",
            "power-of-distance",
        ]
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            ShapeKind::L1Ball3D => 3,
            _ => 2,
        }
    }

    pub fn build(&self) -> Result<ImplicitField, GeometryError> {
        Ok(match self.kind {
            ShapeKind::CircleQuadratic => make_circle_quadratic(self.r0),
            ShapeKind::CircleSdf => make_circle_sdf(self.r0),
            ShapeKind::CuspStarSdf => make_cusp_star_sdf(self.r0)?,
            ShapeKind::L1Ball2D => make_l1_ball(2, self.r0),
            ShapeKind::L1Ball3D => make_l1_ball(3, self.r0),
            ShapeKind::SquaredL1 => {
                assert!(
                    (self.r0 - 1.0).abs() < 1e-12,
                    "the squared variant is defined on the unit ℓ1 ball"
                );
                make_squared_variant(&make_l1_ball(2, 1.0))
            }
            ShapeKind::PowerOfDistance => {
                make_power_of_distance(&make_circle_sdf(self.r0), self.power, self.signed)
            }
        })
    }

    /// Exact measure of the zero level set, where known in closed form.
    pub fn reference_measure(&self) -> f64 {
        match self.kind {
            ShapeKind::CircleQuadratic | ShapeKind::CircleSdf | ShapeKind::PowerOfDistance => {
                2.0 * std::f64::consts::PI * self.r0
            }
            // Four quarter arcs of radius r0.
            ShapeKind::CuspStarSdf => 2.0 * std::f64::consts::PI * self.r0,
            ShapeKind::L1Ball2D => 4.0 * std::f64::consts::SQRT_2 * self.r0,
            ShapeKind::SquaredL1 => 4.0 * std::f64::consts::SQRT_2,
            ShapeKind::L1Ball3D => 4.0 * 3.0f64.sqrt() * self.r0 * self.r0,
        }
    }
}

/// High-precision reference for `∫ 1/√‖x−(0,1)‖ dS` over the unit ℓ1 diamond.
///
/// Arclength parameterization per edge; the two edges meeting the singular
/// vertex use the substitution `t = u²` which removes the endpoint
/// singularity, after which composite Gauss–Legendre converges past 1e-12.
pub fn diamond_inverse_sqrt_reference() -> f64 {
    use crate::numerics::composite_gauss_legendre;
    let sqrt2 = std::f64::consts::SQRT_2;
    // Edge (0,1) -> (1,0): point (t, 1-t), r = t·√2, ds = √2 dt.
    // With t = u²: ∫₀¹ (t√2)^{-1/2}·√2 dt = 2√2 ∫₀¹ u·(u²√2)^{-1/2} du.
    let singular_edge = composite_gauss_legendre(
        |u| 2.0 * sqrt2 * u / (u * u * sqrt2).sqrt(),
        0.0,
        1.0,
        64,
        8,
    );
    // Edge (1,0) -> (0,-1): point (1-t, -t), r = √2·√(1+t²), ds = √2 dt.
    let smooth_edge = composite_gauss_legendre(
        |t| sqrt2 / (sqrt2 * (1.0 + t * t).sqrt()).sqrt(),
        0.0,
        1.0,
        64,
        8,
    );
    2.0 * (singular_edge + smooth_edge)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// xorshift64* — deterministic sampling without external dependencies.
    struct Rng(u64);
    impl Rng {
        fn next_f64(&mut self) -> f64 {
            self.0 ^= self.0 << 13;
            self.0 ^= self.0 >> 7;
            self.0 ^= self.0 << 17;
            (self.0 >> 11) as f64 / (1u64 << 53) as f64
        }
        fn in_range(&mut self, lo: f64, hi: f64) -> f64 {
            lo + (hi - lo) * self.next_f64()
        }
    }

    /// Dense polyline of the star's four arcs, for brute-force oracles.
    fn star_polyline(r0: f64, per_arc: usize) -> Vec<(f64, f64)> {
        let mut pts = Vec::with_capacity(4 * per_arc);
        for (sx, sy) in [(1.0f64, 1.0f64), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
            let a0 = f64::atan2(-sy, 0.0); // x-axis cusp direction from center
            let a1 = f64::atan2(0.0, -sx); // y-axis cusp direction from center
            let mut da = a1 - a0;
            while da > std::f64::consts::PI {
                da -= 2.0 * std::f64::consts::PI;
            }
            while da < -std::f64::consts::PI {
                da += 2.0 * std::f64::consts::PI;
            }
            for k in 0..per_arc {
                let a = a0 + da * k as f64 / (per_arc - 1) as f64;
                pts.push((sx * r0 + r0 * a.cos(), sy * r0 + r0 * a.sin()));
            }
        }
        pts
    }

    #[test]
    fn circle_quadratic_values() {
        let f = make_circle_quadratic(0.501);
        assert!(f.phi([0.501, 0.0, 0.0]).abs() < 1e-15);
        assert!((f.phi([0.0, 0.0, 0.0]) + 0.501 * 0.501).abs() < 1e-15);
        assert!((f.grad_norm([0.3, 0.4, 0.0]) - 1.0).abs() < 1e-15);
        assert!(!f.is_distance);
    }

    #[test]
    fn circle_sdf_values() {
        let f = make_circle_sdf(0.4);
        assert!((f.phi([0.0, 0.0, 0.0]) + 0.4).abs() < 1e-15);
        assert!((f.phi([0.8, 0.0, 0.0]) - 0.4).abs() < 1e-15);
        assert_eq!(f.grad_norm([0.3, 0.1, 0.0]), 1.0);
    }

    #[test]
    fn distance_fields_are_lipschitz() {
        let fields = [
            make_circle_sdf(0.501),
            make_cusp_star_sdf(0.75).unwrap(),
            make_sphere_sdf(0.65),
        ];
        let mut rng = Rng(0x9e3779b97f4a7c15);
        for f in &fields {
            for _ in 0..10_000 {
                let z = |rng: &mut Rng| {
                    if f.dim == 3 {
                        rng.in_range(-1.0, 1.0)
                    } else {
                        0.0
                    }
                };
                let a = [
                    rng.in_range(-1.0, 1.0),
                    rng.in_range(-1.0, 1.0),
                    z(&mut rng),
                ];
                let b = [
                    rng.in_range(-1.0, 1.0),
                    rng.in_range(-1.0, 1.0),
                    z(&mut rng),
                ];
                let dist =
                    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
                assert!(
                    (f.phi(a) - f.phi(b)).abs() <= dist + 1e-12,
                    "not 1-Lipschitz at {a:?}, {b:?}"
                );
            }
        }
    }

    #[test]
    fn star_length_matches_polyline_oracle() {
        // Chord-length sum of a dense polyline converges at O(Δθ²).
        let r0 = 0.75;
        let pts = star_polyline(r0, 150_000);
        let mut total = 0.0;
        for arc in pts.chunks(150_000) {
            for w in arc.windows(2) {
                total += ((w[1].0 - w[0].0).powi(2) + (w[1].1 - w[0].1).powi(2)).sqrt();
            }
        }
        let exact = 4.0 * std::f64::consts::FRAC_PI_2 * r0;
        assert!(
            (total - exact).abs() / exact < 1e-10,
            "polyline {total} vs exact {exact}"
        );
        assert!((exact - 1.5 * std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn star_sdf_agrees_with_polyline_oracle() {
        let r0 = 0.75;
        let star = make_cusp_star_sdf(r0).unwrap();
        let per_arc = 40_000;
        let pts = star_polyline(r0, per_arc);
        let resolution = std::f64::consts::FRAC_PI_2 * r0 / (per_arc - 1) as f64;
        let mut rng = Rng(42);
        for _ in 0..1000 {
            let x = rng.in_range(-1.0, 1.0);
            let y = rng.in_range(-1.0, 1.0);
            let brute = pts
                .iter()
                .map(|&(px, py)| ((x - px).powi(2) + (y - py).powi(2)).sqrt())
                .fold(f64::INFINITY, f64::min);
            let d = star.phi([x, y, 0.0]).abs();
            assert!(
                (d - brute).abs() <= 2.0 * resolution,
                "at ({x},{y}): sdf {d} vs polyline {brute}"
            );
        }
    }

    #[test]
    fn star_sign_and_surface_values() {
        let r0 = 0.75;
        let star = make_cusp_star_sdf(r0).unwrap();
        // Arc midpoint of the first-quadrant arc lies on the curve.
        let m = r0 * (1.0 - std::f64::consts::FRAC_1_SQRT_2);
        assert!(star.phi([m, m, 0.0]).abs() < 1e-12);
        // Offset along the outward normal at the midpoint. The enclosed
        // region lies toward the origin, so outward points at the arc center.
        let n = std::f64::consts::FRAC_1_SQRT_2;
        assert!((star.phi([m + 0.05 * n, m + 0.05 * n, 0.0]) - 0.05).abs() < 1e-10);
        assert!((star.phi([m - 0.05 * n, m - 0.05 * n, 0.0]) + 0.05).abs() < 1e-10);
        assert!(star.phi([0.0, 0.0, 0.0]) < 0.0);
        assert!(star.phi([r0 + 0.01, 0.0, 0.0]) > 0.0);
        assert!(star.phi([r0 - 0.01, 0.0, 0.0]) < 0.0);
    }

    #[test]
    fn offset_length_matches_marching_squares_oracle() {
        // Marching squares on the analytic SDF shifted by +delta, fine grid.
        let r0 = 0.75;
        let delta = 0.05;
        let star = make_cusp_star_sdf(r0).unwrap();
        let n = 4096usize;
        let h = 2.0 / n as f64;
        let level =
            |i: usize, j: usize| star.phi([i as f64 * h - 1.0, j as f64 * h - 1.0, 0.0]) + delta;
        let mut length = 0.0;
        for i in 0..n {
            let mut v00 = level(i, 0);
            let mut v10 = level(i + 1, 0);
            for j in 0..n {
                let v01 = level(i, j + 1);
                let v11 = level(i + 1, j + 1);
                let x0 = i as f64 * h - 1.0;
                let y0 = j as f64 * h - 1.0;
                let mut crossings: Vec<(f64, f64)> = Vec::new();
                let mut edge = |a: f64, b: f64, pa: (f64, f64), pb: (f64, f64)| {
                    if (a < 0.0) != (b < 0.0) {
                        let t = a / (a - b);
                        crossings.push((pa.0 + t * (pb.0 - pa.0), pa.1 + t * (pb.1 - pa.1)));
                    }
                };
                edge(v00, v10, (x0, y0), (x0 + h, y0));
                edge(v10, v11, (x0 + h, y0), (x0 + h, y0 + h));
                edge(v11, v01, (x0 + h, y0 + h), (x0, y0 + h));
                edge(v01, v00, (x0, y0 + h), (x0, y0));
                if crossings.len() == 2 {
                    let (a, b) = (crossings[0], crossings[1]);
                    length += ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
                }
                v00 = v01;
                v10 = v11;
            }
        }
        let analytic = cusp_star_offset_length(r0, delta);
        assert!(
            (length - analytic).abs() / analytic < 1e-4,
            "marching squares {length} vs analytic {analytic}"
        );
    }

    #[test]
    fn l1_fields() {
        let f2 = make_l1_ball(2, 0.8);
        let f3 = make_l1_ball(3, 0.65);
        assert!(f2.phi([0.8, 0.0, 0.0]).abs() < 1e-15);
        assert!(f3.phi([0.65, 0.0, 0.0]).abs() < 1e-15);
        assert!((f3.grad_norm([0.2, 0.1, -0.4]) - 3.0f64.sqrt()).abs() < 1e-15);
        assert!((f2.grad_norm([0.5, -0.2, 0.0]) - 2.0f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn squared_variant_values() {
        let base = make_l1_ball(2, 1.0);
        let sq = make_squared_variant(&base);
        assert!((sq.phi([0.5, 0.0, 0.0]) + 0.25).abs() < 1e-15);
        for p in [[0.3, 0.2, 0.0], [0.9, 0.4, 0.0], [-0.1, -0.7, 0.0]] {
            let g = sq.grad_norm(p);
            assert!((g * g - 8.0 * sq.phi(p).abs()).abs() < 1e-12);
        }
        // On the zero set both phi and the gradient norm vanish.
        assert!(sq.phi([1.0, 0.0, 0.0]).abs() < 1e-15);
        assert!(sq.grad_norm([1.0, 0.0, 0.0]).abs() < 1e-15);
    }

    #[test]
    fn power_of_distance_values() {
        let base = make_circle_sdf(0.501);
        let p1 = make_power_of_distance(&base, 1, false);
        let mut rng = Rng(7);
        for _ in 0..100 {
            let p = [rng.in_range(-1.0, 1.0), rng.in_range(-1.0, 1.0), 0.0];
            assert_eq!(base.phi(p).to_bits(), p1.phi(p).to_bits());
        }
        let p3 = make_power_of_distance(&base, 3, false);
        let x = [0.601, 0.0, 0.0]; // d = 0.1
        assert!((p3.phi(x) - 0.001).abs() < 1e-15);
        assert!((p3.grad_norm(x) - 0.03).abs() < 1e-15);
        let p2 = make_power_of_distance(&base, 2, true);
        let inside = [0.401, 0.0, 0.0]; // d = -0.1
        assert!((p2.phi(inside) + 0.01).abs() < 1e-15);
    }

    #[test]
    fn closest_point_projection() {
        let f = make_circle_sdf(0.4);
        let grad = |p: Point| {
            let n = (p[0] * p[0] + p[1] * p[1]).sqrt();
            [p[0] / n, p[1] / n, 0.0]
        };
        let p = closest_point(&f, grad, [0.8, 0.0, 0.0]).unwrap();
        assert!((p[0] - 0.4).abs() < 1e-14 && p[1].abs() < 1e-14);
        let p = closest_point(&f, grad, [0.0, -0.2, 0.0]).unwrap();
        assert!((p[1] + 0.4).abs() < 1e-14);
        let on = closest_point(&f, grad, [0.4, 0.0, 0.0]).unwrap();
        assert!((on[0] - 0.4).abs() < 1e-14);
        // Idempotence on random points within the reach.
        let mut rng = Rng(99);
        for _ in 0..1000 {
            let x = [rng.in_range(-0.9, 0.9), rng.in_range(-0.9, 0.9), 0.0];
            if (x[0] * x[0] + x[1] * x[1]).sqrt() < 0.05 {
                continue; // skeleton point at the center
            }
            let p = closest_point(&f, grad, x).unwrap();
            let pp = closest_point(&f, grad, p).unwrap();
            assert!(((p[0] - pp[0]).powi(2) + (p[1] - pp[1]).powi(2)).sqrt() < 1e-10);
        }
        let bad = closest_point(&f, |_| [0.5, 0.0, 0.0], [0.8, 0.0, 0.0]);
        assert!(matches!(bad, Err(GeometryError::UndefinedGradient(_))));
    }

    #[test]
    fn theta_sawtooth_kinks() {
        let f = make_integrand(IntegrandKind::ThetaSawtooth);
        let at = |theta: f64| f.eval([theta.cos(), theta.sin(), 0.0]);
        assert!(at(0.3).abs() < 1e-12);
        // Where the two branches meet: |θ−0.3| = 2π+0.3−θ at θ = π+0.3.
        let meet = at(std::f64::consts::PI + 0.3);
        assert!((meet - std::f64::consts::PI).abs() < 1e-12);
        // Continuous across the branch cut at θ = 0.
        assert!((at(1e-9) - at(2.0 * std::f64::consts::PI - 1e-9)).abs() < 1e-6);
    }

    #[test]
    fn inverse_sqrt_integrand() {
        let f = make_integrand(IntegrandKind::InverseSqrtAt([0.0, 1.0, 0.0]));
        assert_eq!(f.eval([0.0, 1.0, 0.0]), 1e9);
        assert!((f.eval([0.0, 0.0, 0.0]) - 1.0).abs() < 1e-15);
        assert_eq!(f.singular_points.len(), 1);
    }

    #[test]
    fn diamond_reference_cross_checked() {
        // The singular edges have the closed form 2·2^{1/4} each.
        let exact_singular = 2.0 * 2.0f64.powf(0.25);
        let sqrt2 = std::f64::consts::SQRT_2;
        let singular = crate::numerics::composite_gauss_legendre(
            |u| 2.0 * sqrt2 * u / (u * u * sqrt2).sqrt(),
            0.0,
            1.0,
            64,
            8,
        );
        assert!((singular - exact_singular).abs() < 1e-12);
        let total = diamond_inverse_sqrt_reference();
        // Independent midpoint-rule check of the smooth edges.
        let mut smooth = 0.0;
        let m = 2_000_000;
        for k in 0..m {
            let t = (k as f64 + 0.5) / m as f64;
            smooth += sqrt2 / (sqrt2 * (1.0 + t * t).sqrt()).sqrt() / m as f64;
        }
        let recomposed = 2.0 * (exact_singular + smooth);
        assert!((total - recomposed).abs() < 1e-9, "{total} vs {recomposed}");
    }

    #[test]
    fn l1_ball_area_reference_oracles() {
        // Octant face of {|x|+|y|+|z| = r0}: the triangle with vertices on
        // the axes. Two algebraic routes plus a Monte-Carlo coarea estimate.
        let r0 = 0.65f64;
        let a = [r0, 0.0, 0.0];
        let b = [0.0, r0, 0.0];
        let c = [0.0, 0.0, r0];
        let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
        let cross = [
            u[1] * v[2] - u[2] * v[1],
            u[2] * v[0] - u[0] * v[2],
            u[0] * v[1] - u[1] * v[0],
        ];
        let tri = 0.5 * (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
        // Equilateral triangle of side r0·√2.
        let tri_alt = 3.0f64.sqrt() / 4.0 * (r0 * std::f64::consts::SQRT_2).powi(2);
        assert!((tri - tri_alt).abs() < 1e-15);
        let total = 8.0 * tri;
        let descriptor = ShapeDescriptor {
            kind: ShapeKind::L1Ball3D,
            r0,
            power: 1,
            signed: false,
        };
        assert!((descriptor.reference_measure() - total).abs() < 1e-14);
        // Monte-Carlo coarea: vol{| |x|_1 - r0 | < t} / (2t) ≈ area / √3.
        let mut rng = Rng(0x2545f4914f6cdd1d);
        let t = 0.05;
        let total_samples = 4_000_000u64;
        let mut hits = 0u64;
        for _ in 0..total_samples {
            let x = rng.in_range(-1.0, 1.0);
            let y = rng.in_range(-1.0, 1.0);
            let z = rng.in_range(-1.0, 1.0);
            if (x.abs() + y.abs() + z.abs() - r0).abs() < t {
                hits += 1;
            }
        }
        let shell_volume = hits as f64 / total_samples as f64 * 8.0;
        let mc_area = shell_volume / (2.0 * t) * 3.0f64.sqrt();
        assert!(
            (mc_area - total).abs() / total < 0.02,
            "Monte-Carlo {mc_area:.4} vs {total:.4}"
        );
    }

    #[test]
    fn shape_registry() {
        for name in ShapeDescriptor::names() {
            let r0 = if *name == "l1-squared" { 1.0 } else { 0.5 };
            let d = ShapeDescriptor::by_name(name, r0, 3, false).unwrap();
            let f = d.build().unwrap();
            assert_eq!(f.dim, d.dim());
            assert!(d.reference_measure() > 0.0);
        }
        assert!(ShapeDescriptor::by_name("nonexistent", 0.5, 1, false).is_none());
    }
}

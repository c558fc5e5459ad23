//! Closed-form Riemannian geometry of the unit sphere S² ⊂ ℝ³.
//!
//! Points are unit 3-vectors and tangent vectors are 3-vectors orthogonal to
//! their base point. Everything here has an explicit formula: geodesics are
//! great circles, parallel transport is a rotation about the great-circle
//! axis, and Jacobi fields split into a linear tangential part and a
//! trigonometric normal part.
//!
//! Curvature convention: `R(X, Y)Z = ⟨Y, Z⟩X − ⟨X, Z⟩Y`, so that the sectional
//! curvature `⟨R(X, Y)Y, X⟩` is `+1` and the Jacobi equation
//! `∇ₛ²W + R(W, γ′)γ′ = 0` has oscillatory normal solutions.
//! [`SphereGeometry`] carries the sign as a single constant so it can be
//! flipped for sensitivity checks.

use nalgebra::Vector3;
use thiserror::Error;

use crate::quadrature;

pub type Vec3 = Vector3<f64>;

/// Distances below this are treated as coincident points.
pub const COINCIDENT_DISTANCE: f64 = 1e-9;

/// Pairs closer than this to antipodal are rejected by operations that need a
/// unique minimizing geodesic.
pub const ANTIPODAL_MARGIN: f64 = 1e-9;

/// Threshold on `sin(L)` below which a Jacobi boundary problem is singular.
pub const CONJUGATE_SIN_THRESHOLD: f64 = 1e-9;

/// Nodes of the Gauss–Legendre rule used for integrals along a geodesic.
const GEODESIC_QUAD_NODES: usize = 24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("points are antipodal or nearly so (distance {distance} ≥ π − 1e-9)")]
    Antipodal { distance: f64 },
    #[error("geodesic of length {length} is degenerate; use the coincident-endpoint convention")]
    DegenerateGeodesic { length: f64 },
    #[error("conjugate point along geodesic of length {length} (sin L = {sin_length})")]
    ConjugatePoint { length: f64, sin_length: f64 },
    #[error("cannot place a zero or non-finite vector on the sphere")]
    ZeroVector,
    #[error("tangent vector is not based at the expected point")]
    BaseMismatch,
    #[error("need at least {min} samples, got {got}")]
    TooFewSamples { min: usize, got: usize },
}

/// A point on the unit sphere.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpherePoint(Vec3);

impl SpherePoint {
    /// Normalizes `(x, y, z)` onto the sphere.
    ///
    /// Panics if the vector is zero or non-finite; use [`SpherePoint::try_from_vec`]
    /// for fallible construction.
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self::from_vec(Vec3::new(x, y, z))
    }

    pub fn from_vec(v: Vec3) -> Self {
        Self::try_from_vec(v).expect("sphere point from a zero or non-finite vector")
    }

    pub fn try_from_vec(v: Vec3) -> Result<Self, GeometryError> {
        let n = v.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(GeometryError::ZeroVector);
        }
        Ok(SpherePoint(v / n))
    }

    /// Wraps a vector the caller guarantees is already unit length.
    pub(crate) fn from_unit(v: Vec3) -> Self {
        debug_assert!((v.norm() - 1.0).abs() < 1e-10, "not unit: {}", v.norm());
        SpherePoint(v)
    }

    pub fn north() -> Self {
        SpherePoint(Vec3::z())
    }

    pub fn coords(&self) -> &Vec3 {
        &self.0
    }

    pub fn into_vec(self) -> Vec3 {
        self.0
    }

    /// Projection of an ambient vector onto the tangent plane at this point.
    pub fn project(&self, v: &Vec3) -> Vec3 {
        v - self.0 * self.0.dot(v)
    }

    pub fn tangent(&self, v: Vec3) -> SphereTangent {
        SphereTangent::new(*self, v)
    }

    fn same_as(&self, other: &SpherePoint) -> bool {
        (self.0 - other.0).norm() <= 1e-12
    }
}

/// A tangent vector at a point of the sphere.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SphereTangent {
    base: SpherePoint,
    vec: Vec3,
}

impl SphereTangent {
    /// Projects `v` onto the tangent plane at `base`.
    pub fn new(base: SpherePoint, v: Vec3) -> Self {
        SphereTangent {
            vec: base.project(&v),
            base,
        }
    }

    pub fn zero(base: SpherePoint) -> Self {
        SphereTangent {
            base,
            vec: Vec3::zeros(),
        }
    }

    pub fn base(&self) -> &SpherePoint {
        &self.base
    }

    pub fn vec(&self) -> &Vec3 {
        &self.vec
    }

    pub fn norm(&self) -> f64 {
        self.vec.norm()
    }

    pub fn scale(&self, a: f64) -> SphereTangent {
        SphereTangent {
            base: self.base,
            vec: self.vec * a,
        }
    }

    fn expect_base(&self, p: &SpherePoint) -> Result<(), GeometryError> {
        if self.base.same_as(p) {
            Ok(())
        } else {
            Err(GeometryError::BaseMismatch)
        }
    }
}

/// A pair of tangent vectors `(X₁, X₂) ∈ T_{y₁}S² × T_{y₂}S²`, i.e. a tangent
/// vector of the product `S² × S²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TangentPair {
    pub first: SphereTangent,
    pub second: SphereTangent,
}

impl TangentPair {
    pub fn new(first: SphereTangent, second: SphereTangent) -> Self {
        TangentPair { first, second }
    }
}

/// Curvature bound, injectivity radius and the closeness radius derived from them.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeometryConstants {
    pub k0: f64,
    pub i0: f64,
    pub delta0: f64,
}

impl GeometryConstants {
    pub fn new(k0: f64, i0: f64) -> Self {
        GeometryConstants {
            k0,
            i0,
            delta0: (i0 / 2.0).min(1.0 / (4.0 * k0.sqrt())),
        }
    }

    pub fn unit_sphere() -> Self {
        Self::new(1.0, std::f64::consts::PI)
    }
}

/// Intrinsic distance, in radians.
pub fn distance(p: &SpherePoint, q: &SpherePoint) -> f64 {
    raw_distance(&p.0, &q.0)
}

/// `arccos⟨p, q⟩` evaluated as `atan2(|p × q|, ⟨p, q⟩)`, which keeps full
/// relative precision for nearby points.
pub(crate) fn raw_distance(p: &Vec3, q: &Vec3) -> f64 {
    p.cross(q).norm().atan2(p.dot(q).clamp(-1.0, 1.0))
}

pub fn exp_map(p: &SpherePoint, v: &SphereTangent) -> Result<SpherePoint, GeometryError> {
    v.expect_base(p)?;
    Ok(SpherePoint::from_unit(raw_exp(&p.0, &v.vec)))
}

pub(crate) fn raw_exp(p: &Vec3, v: &Vec3) -> Vec3 {
    let len = v.norm();
    if len == 0.0 {
        return *p;
    }
    let out = p * len.cos() + v * (len.sin() / len);
    out / out.norm()
}

/// Inverse of [`exp_map`] inside the injectivity radius.
pub fn log_map(p: &SpherePoint, q: &SpherePoint) -> Result<SphereTangent, GeometryError> {
    Ok(SphereTangent {
        base: *p,
        vec: raw_log(&p.0, &q.0)?,
    })
}

pub(crate) fn raw_log(p: &Vec3, q: &Vec3) -> Result<Vec3, GeometryError> {
    let d = raw_distance(p, q);
    if d >= std::f64::consts::PI - ANTIPODAL_MARGIN {
        return Err(GeometryError::Antipodal { distance: d });
    }
    let w = q - p * p.dot(q);
    let wn = w.norm();
    if wn == 0.0 {
        return Ok(Vec3::zeros());
    }
    Ok(w * (d / wn))
}

/// Parallel transport of `x ∈ T_qS²` to `T_pS²` along the minimizing geodesic
/// from `q` to `p`.
pub fn parallel_transport(
    p: &SpherePoint,
    q: &SpherePoint,
    x: &SphereTangent,
) -> Result<SphereTangent, GeometryError> {
    x.expect_base(q)?;
    let d = distance(p, q);
    if d >= std::f64::consts::PI - ANTIPODAL_MARGIN {
        return Err(GeometryError::Antipodal { distance: d });
    }
    Ok(SphereTangent::new(*p, raw_transport(&p.0, &q.0, &x.vec)))
}

/// Rotation about the axis `from × to` carrying `from` onto `to`, applied to `v`.
///
/// Restricted to `T_{from}S²` this is parallel transport along the great circle.
/// Written without normalizing the axis so it stays exact as `from → to`.
pub(crate) fn raw_transport(to: &Vec3, from: &Vec3, v: &Vec3) -> Vec3 {
    if to == from {
        return *v;
    }
    let c = from.dot(to);
    let w = from.cross(to);
    v * c + w.cross(v) + w * (w.dot(v) / (1.0 + c))
}

/// The complex structure `J(p)v = p × v`.
pub fn complex_structure(
    p: &SpherePoint,
    v: &SphereTangent,
) -> Result<SphereTangent, GeometryError> {
    v.expect_base(p)?;
    Ok(SphereTangent::new(*p, p.0.cross(&v.vec)))
}

/// Riemann curvature `R(X, Y)Z` of the unit sphere (standard sign).
pub fn curvature(
    p: &SpherePoint,
    x: &SphereTangent,
    y: &SphereTangent,
    z: &SphereTangent,
) -> Result<SphereTangent, GeometryError> {
    SphereGeometry::default().curvature(p, x, y, z)
}

/// Curvature-dependent operations, parameterized by the sign convention.
///
/// The default is the round sphere with `R(X, Y)Z = ⟨Y, Z⟩X − ⟨X, Z⟩Y`.
/// [`SphereGeometry::flipped`] negates `R` everywhere it is evaluated while the
/// closed-form Jacobi solver keeps using the round-sphere formulas; the two
/// disagree, which the Jacobi-residual and connection-identity checks detect.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SphereGeometry {
    curvature_sign: f64,
}

impl Default for SphereGeometry {
    fn default() -> Self {
        SphereGeometry {
            curvature_sign: 1.0,
        }
    }
}

impl SphereGeometry {
    pub fn flipped() -> Self {
        SphereGeometry {
            curvature_sign: -1.0,
        }
    }

    pub fn with_flip(flip: bool) -> Self {
        if flip {
            Self::flipped()
        } else {
            Self::default()
        }
    }

    pub fn is_flipped(&self) -> bool {
        self.curvature_sign < 0.0
    }

    pub fn curvature(
        &self,
        p: &SpherePoint,
        x: &SphereTangent,
        y: &SphereTangent,
        z: &SphereTangent,
    ) -> Result<SphereTangent, GeometryError> {
        x.expect_base(p)?;
        y.expect_base(p)?;
        z.expect_base(p)?;
        Ok(SphereTangent::new(
            *p,
            self.raw_curvature(&x.vec, &y.vec, &z.vec),
        ))
    }

    pub(crate) fn raw_curvature(&self, x: &Vec3, y: &Vec3, z: &Vec3) -> Vec3 {
        (x * y.dot(z) - y * x.dot(z)) * self.curvature_sign
    }

    /// Sup-norm of `∇ₛ²W + R(W, γ′)γ′` at the interior samples of a Jacobi field.
    ///
    /// `∇ₛ²W` is obtained by second differences of the field transported to
    /// `γ(s)`, with step `ds`; the result is `O(ds²)` for an exact Jacobi field.
    pub fn jacobi_residual(&self, field: &JacobiBvp, ds: f64) -> f64 {
        let g = &field.geodesic;
        let mut worst: f64 = 0.0;
        let steps = 32;
        for j in 1..steps {
            let s = j as f64 / steps as f64;
            if s - ds < 0.0 || s + ds > 1.0 {
                continue;
            }
            let at = g.point_at(s).into_vec();
            let w = field.value(s);
            let w_plus = raw_transport(&at, g.point_at(s + ds).coords(), &field.value(s + ds));
            let w_minus = raw_transport(&at, g.point_at(s - ds).coords(), &field.value(s - ds));
            let second = (w_plus - w * 2.0 + w_minus) / (ds * ds);
            let vel = g.velocity_vec(s);
            let r = self.raw_curvature(&w, &vel, &vel);
            worst = worst.max((second + r).norm());
        }
        worst
    }

    /// `½∇̃²d²(X̃, Ỹ)` on `S² × S²` from the second variation formula.
    ///
    /// At coincident points the limit `⟨X₂ − X₁, Y₂ − Y₁⟩` is returned.
    pub fn hessian_d2(
        &self,
        p: &SpherePoint,
        q: &SpherePoint,
        xt: &TangentPair,
        yt: &TangentPair,
    ) -> Result<f64, GeometryError> {
        xt.first.expect_base(p)?;
        yt.first.expect_base(p)?;
        xt.second.expect_base(q)?;
        yt.second.expect_base(q)?;
        let g = Geodesic::between(p, q)?;
        if g.is_degenerate() {
            let dx = xt.second.vec - xt.first.vec;
            let dy = yt.second.vec - yt.first.vec;
            return Ok(dx.dot(&dy));
        }
        let jx = JacobiBvp::solve(&g, &xt.first, &xt.second)?;
        let jy = JacobiBvp::solve(&g, &yt.first, &yt.second)?;
        let d = g.length;
        let t1 = g.unit_tangent_at(0.0);
        let grad_x =
            t1.dot(&(raw_transport(p.coords(), q.coords(), &xt.second.vec) - xt.first.vec));
        let grad_y =
            t1.dot(&(raw_transport(p.coords(), q.coords(), &yt.second.vec) - yt.first.vec));
        let rule = quadrature::gauss_legendre(GEODESIC_QUAD_NODES);
        let variation = rule.integrate(|s| {
            let t = g.unit_tangent_at(s);
            let dx = jx.covariant_derivative(s);
            let dy = jy.covariant_derivative(s);
            let dx_perp = dx - t * t.dot(&dx);
            let dy_perp = dy - t * t.dot(&dy);
            dx_perp.dot(&dy_perp)
        });
        let curv = rule.integrate(|s| {
            let t = g.unit_tangent_at(s);
            let wx = jx.value(s);
            let wy = jy.value(s);
            let x_perp = wx - t * t.dot(&wx);
            let y_perp = wy - t * t.dot(&wy);
            self.raw_curvature(&t, &x_perp, &y_perp).dot(&t)
        });
        Ok(grad_x * grad_y + variation - d * d * curv)
    }
}

/// Minimizing geodesic `γ : [0, 1] → S²` with constant speed equal to its length.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Geodesic {
    pub start: SpherePoint,
    pub end: SpherePoint,
    pub length: f64,
    /// Unit initial direction; the zero vector for a degenerate geodesic.
    pub unit_tangent_at_start: SphereTangent,
}

impl Geodesic {
    pub fn between(p: &SpherePoint, q: &SpherePoint) -> Result<Self, GeometryError> {
        let log = raw_log(&p.0, &q.0)?;
        let length = raw_distance(&p.0, &q.0);
        let unit = if length < COINCIDENT_DISTANCE || log.norm() == 0.0 {
            Vec3::zeros()
        } else {
            log / log.norm()
        };
        Ok(Geodesic {
            start: *p,
            end: *q,
            length,
            unit_tangent_at_start: SphereTangent::new(*p, unit),
        })
    }

    pub fn is_degenerate(&self) -> bool {
        self.length < COINCIDENT_DISTANCE
    }

    pub fn point_at(&self, s: f64) -> SpherePoint {
        if self.is_degenerate() {
            // interpolate chordally; the endpoints agree to 1e-9
            let v = self.start.0 * (1.0 - s) + self.end.0 * s;
            return SpherePoint(v / v.norm());
        }
        if s == 1.0 {
            return self.end;
        }
        let a = s * self.length;
        let v = self.start.0 * a.cos() + self.unit_tangent_at_start.vec * a.sin();
        SpherePoint(v / v.norm())
    }

    /// Unit tangent `T̄(s) = γ′(s)/|γ′|`; zero for a degenerate geodesic.
    pub fn unit_tangent_at(&self, s: f64) -> Vec3 {
        if self.is_degenerate() {
            return Vec3::zeros();
        }
        let a = s * self.length;
        self.unit_tangent_at_start.vec * a.cos() - self.start.0 * a.sin()
    }

    pub(crate) fn velocity_vec(&self, s: f64) -> Vec3 {
        if self.is_degenerate() {
            return raw_log(&self.start.0, &self.end.0).unwrap_or_else(|_| Vec3::zeros());
        }
        self.unit_tangent_at(s) * self.length
    }

    /// `γ′(s)`, of magnitude `length`.
    pub fn velocity_at(&self, s: f64) -> SphereTangent {
        SphereTangent::new(self.point_at(s), self.velocity_vec(s))
    }

    /// Unit normal to the great circle, `start × T̄(0)`; parallel along γ.
    pub fn normal(&self) -> Vec3 {
        self.start.0.cross(&self.unit_tangent_at_start.vec)
    }

    /// Transport of `v ∈ T_{γ(s)}` back to `T_{γ(0)}` along γ.
    pub fn transport_to_start(&self, s: f64, v: &Vec3) -> Vec3 {
        raw_transport(self.start.coords(), self.point_at(s).coords(), v)
    }

    /// Transport of `v ∈ T_{γ(0)}` to `T_{γ(s)}` along γ.
    pub fn transport_from_start(&self, s: f64, v: &Vec3) -> Vec3 {
        raw_transport(self.point_at(s).coords(), self.start.coords(), v)
    }
}

/// Closed-form solution of the Jacobi boundary value problem along a geodesic.
///
/// In the parallel orthonormal frame `(T̄, n)` the field is
/// `W(s) = β(s)T̄(s) + α(s)n` with `β` linear and
/// `α(s) = [a₀ sin(L(1−s)) + a₁ sin(Ls)] / sin L`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JacobiBvp {
    pub geodesic: Geodesic,
    tangential: (f64, f64),
    normal: (f64, f64),
}

impl JacobiBvp {
    pub fn solve(
        g: &Geodesic,
        x1: &SphereTangent,
        x2: &SphereTangent,
    ) -> Result<Self, GeometryError> {
        x1.expect_base(&g.start)?;
        x2.expect_base(&g.end)?;
        if g.is_degenerate() {
            return Err(GeometryError::DegenerateGeodesic { length: g.length });
        }
        let sin_l = g.length.sin();
        if sin_l < CONJUGATE_SIN_THRESHOLD {
            return Err(GeometryError::ConjugatePoint {
                length: g.length,
                sin_length: sin_l,
            });
        }
        let n = g.normal();
        let t0 = g.unit_tangent_at(0.0);
        let t1 = g.unit_tangent_at(1.0);
        Ok(JacobiBvp {
            geodesic: *g,
            tangential: (x1.vec.dot(&t0), x2.vec.dot(&t1)),
            normal: (x1.vec.dot(&n), x2.vec.dot(&n)),
        })
    }

    /// Normal coefficient `α(s)`.
    pub fn normal_coefficient(&self, s: f64) -> f64 {
        let l = self.geodesic.length;
        let (a0, a1) = self.normal;
        (a0 * (l * (1.0 - s)).sin() + a1 * (l * s).sin()) / l.sin()
    }

    /// `α′(s)`.
    pub fn normal_coefficient_rate(&self, s: f64) -> f64 {
        let l = self.geodesic.length;
        let (a0, a1) = self.normal;
        l * (a1 * (l * s).cos() - a0 * (l * (1.0 - s)).cos()) / l.sin()
    }

    pub fn tangential_coefficient(&self, s: f64) -> f64 {
        let (b0, b1) = self.tangential;
        b0 + (b1 - b0) * s
    }

    pub fn value(&self, s: f64) -> Vec3 {
        self.geodesic.unit_tangent_at(s) * self.tangential_coefficient(s)
            + self.geodesic.normal() * self.normal_coefficient(s)
    }

    /// Covariant derivative `∇ₛW(s)`.
    pub fn covariant_derivative(&self, s: f64) -> Vec3 {
        let (b0, b1) = self.tangential;
        self.geodesic.unit_tangent_at(s) * (b1 - b0)
            + self.geodesic.normal() * self.normal_coefficient_rate(s)
    }

    pub fn sup_norm(&self, samples: usize) -> f64 {
        let samples = samples.max(2);
        (0..samples)
            .map(|j| self.value(j as f64 / (samples - 1) as f64).norm())
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JacobiSample {
    pub s: f64,
    pub value: SphereTangent,
    pub covariant_s_derivative: SphereTangent,
}

/// A Jacobi field sampled at equally spaced parameters in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct JacobiField {
    pub geodesic: Geodesic,
    pub samples: Vec<JacobiSample>,
}

/// Solves `∇ₛ²W + R(W, γ′)γ′ = 0`, `W(0) = X₁`, `W(1) = X₂` and samples it.
pub fn jacobi_bvp(
    g: &Geodesic,
    x1: &SphereTangent,
    x2: &SphereTangent,
    n_samples: usize,
) -> Result<JacobiField, GeometryError> {
    if n_samples < 2 {
        return Err(GeometryError::TooFewSamples {
            min: 2,
            got: n_samples,
        });
    }
    let sol = JacobiBvp::solve(g, x1, x2)?;
    let samples = (0..n_samples)
        .map(|j| {
            let s = j as f64 / (n_samples - 1) as f64;
            let at = g.point_at(s);
            // boundary values are reproduced verbatim
            let value = if j == 0 {
                *x1
            } else if j == n_samples - 1 {
                *x2
            } else {
                SphereTangent::new(at, sol.value(s))
            };
            JacobiSample {
                s,
                value,
                covariant_s_derivative: SphereTangent::new(at, sol.covariant_derivative(s)),
            }
        })
        .collect();
    Ok(JacobiField {
        geodesic: *g,
        samples,
    })
}

/// `𝔡₀(X₁, X₂) = |𝒫X₂ − X₁|`.
pub fn pseudo_dist_transport(x1: &SphereTangent, x2: &SphereTangent) -> Result<f64, GeometryError> {
    let d = distance(&x1.base, &x2.base);
    if d >= std::f64::consts::PI - ANTIPODAL_MARGIN {
        return Err(GeometryError::Antipodal { distance: d });
    }
    let moved = raw_transport(&x1.base.0, &x2.base.0, &x2.vec);
    Ok((moved - x1.vec).norm())
}

/// `𝔡(X₁, X₂) = (∫₀¹|∇ₛX̄|² ds)^{1/2}` for the Jacobi field `X̄` joining them,
/// or `|X₁ − X₂|` when the base points coincide.
pub fn pseudo_dist_jacobi(
    x1: &SphereTangent,
    x2: &SphereTangent,
    n_quad: usize,
) -> Result<f64, GeometryError> {
    let g = Geodesic::between(&x1.base, &x2.base)?;
    if g.is_degenerate() {
        return Ok((x1.vec - x2.vec).norm());
    }
    let sol = JacobiBvp::solve(&g, x1, x2)?;
    let rule = quadrature::gauss_legendre(n_quad.max(1));
    Ok(rule
        .integrate(|s| sol.covariant_derivative(s).norm_squared())
        .sqrt())
}

/// `½∇̃d²(X̃) = ⟨γ′(0), 𝒫X₂ − X₁⟩` where γ runs from `p` to `q`.
pub fn grad_d2(p: &SpherePoint, q: &SpherePoint, xt: &TangentPair) -> Result<f64, GeometryError> {
    xt.first.expect_base(p)?;
    xt.second.expect_base(q)?;
    let v = raw_log(&p.0, &q.0)?;
    if raw_distance(&p.0, &q.0) < COINCIDENT_DISTANCE {
        return Ok(0.0);
    }
    let moved = raw_transport(&p.0, &q.0, &xt.second.vec);
    Ok(v.dot(&(moved - xt.first.vec)))
}

/// `½∇̃²d²(X̃, Ỹ)` with the standard curvature sign.
pub fn hessian_d2(
    p: &SpherePoint,
    q: &SpherePoint,
    xt: &TangentPair,
    yt: &TangentPair,
) -> Result<f64, GeometryError> {
    SphereGeometry::default().hessian_d2(p, q, xt, yt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn pt(x: f64, y: f64, z: f64) -> SpherePoint {
        SpherePoint::new(x, y, z)
    }

    fn close(a: &Vec3, b: &Vec3, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    #[test]
    fn construction_normalizes_and_projects() {
        let p = pt(0.0, 3.0, 4.0);
        assert!((p.coords().norm() - 1.0).abs() < 1e-15);
        let v = SphereTangent::new(p, Vec3::new(1.0, 1.0, 1.0));
        assert!(v.vec().dot(p.coords()).abs() < 1e-15);
        assert_eq!(
            SpherePoint::try_from_vec(Vec3::zeros()),
            Err(GeometryError::ZeroVector)
        );
    }

    #[test]
    fn distance_examples() {
        let n = pt(0.0, 0.0, 1.0);
        assert_eq!(distance(&n, &n), 0.0);
        assert!((distance(&n, &pt(1.0, 0.0, 0.0)) - FRAC_PI_2).abs() < 1e-15);
        assert!((distance(&n, &pt(0.0, 0.0, -1.0)) - PI).abs() < 1e-15);
    }

    #[test]
    fn exp_map_examples() {
        let n = pt(0.0, 0.0, 1.0);
        assert_eq!(exp_map(&n, &SphereTangent::zero(n)).unwrap(), n);
        let e1 = pt(1.0, 0.0, 0.0);
        let q = exp_map(&e1, &e1.tangent(Vec3::new(0.0, FRAC_PI_2, 0.0))).unwrap();
        assert!(close(q.coords(), &Vec3::y(), 1e-15));
        let r = exp_map(&e1, &e1.tangent(Vec3::new(0.0, 2.0 * PI, 0.0))).unwrap();
        assert!(close(r.coords(), &Vec3::x(), 1e-14));
    }

    #[test]
    fn log_map_examples() {
        let e1 = pt(1.0, 0.0, 0.0);
        assert_eq!(log_map(&e1, &e1).unwrap().norm(), 0.0);
        let v = log_map(&e1, &pt(0.0, 1.0, 0.0)).unwrap();
        assert!(close(v.vec(), &Vec3::new(0.0, FRAC_PI_2, 0.0), 1e-15));
        assert!(matches!(
            log_map(&e1, &pt(-1.0, 0.0, 0.0)),
            Err(GeometryError::Antipodal { .. })
        ));
    }

    #[test]
    fn transport_examples() {
        let e1 = pt(1.0, 0.0, 0.0);
        let e2 = pt(0.0, 1.0, 0.0);
        let x = e2.tangent(Vec3::new(0.3, 0.0, -0.7));
        assert_eq!(parallel_transport(&e2, &e2, &x).unwrap().vec(), x.vec());
        let up = parallel_transport(&e1, &e2, &e2.tangent(Vec3::z())).unwrap();
        assert!(close(up.vec(), &Vec3::z(), 1e-15));
        let vel = parallel_transport(&e1, &e2, &e2.tangent(-Vec3::x())).unwrap();
        assert!(close(vel.vec(), &Vec3::y(), 1e-15));
        assert_eq!(
            parallel_transport(&e1, &e1, &e2.tangent(Vec3::z())),
            Err(GeometryError::BaseMismatch)
        );
    }

    #[test]
    fn complex_structure_examples() {
        let n = pt(0.0, 0.0, 1.0);
        let jv = complex_structure(&n, &n.tangent(Vec3::x())).unwrap();
        assert!(close(jv.vec(), &Vec3::y(), 1e-15));
        let p = pt(0.3, -0.2, 0.9);
        let v = p.tangent(Vec3::new(0.4, 1.0, -0.1));
        let jjv = complex_structure(&p, &complex_structure(&p, &v).unwrap()).unwrap();
        assert!(close(jjv.vec(), &-v.vec(), 1e-12));
        assert!(complex_structure(&p, &v).unwrap().vec().dot(v.vec()).abs() < 1e-12);
    }

    #[test]
    fn curvature_examples() {
        let n = pt(0.0, 0.0, 1.0);
        let x = n.tangent(Vec3::x());
        let y = n.tangent(Vec3::y());
        assert!(close(
            curvature(&n, &x, &y, &y).unwrap().vec(),
            &Vec3::x(),
            1e-15
        ));
        assert_eq!(curvature(&n, &x, &x, &y).unwrap().norm(), 0.0);
        let flipped = SphereGeometry::flipped().curvature(&n, &x, &y, &y).unwrap();
        assert!(close(flipped.vec(), &-Vec3::x(), 1e-15));
    }

    #[test]
    fn velocity_field_is_a_parallel_jacobi_field() {
        let g = Geodesic::between(&pt(1.0, 0.2, 0.1), &pt(0.1, 1.0, 0.4)).unwrap();
        let f = jacobi_bvp(&g, &g.velocity_at(0.0), &g.velocity_at(1.0), 11).unwrap();
        for smp in &f.samples {
            assert!(close(smp.value.vec(), g.velocity_at(smp.s).vec(), 1e-12));
            assert!(smp.covariant_s_derivative.norm() < 1e-12);
        }
    }

    #[test]
    fn jacobi_boundary_values_are_verbatim() {
        let g = Geodesic::between(&pt(1.0, 0.0, 0.0), &pt(0.6, 0.8, 0.1)).unwrap();
        let x1 = g.start.tangent(Vec3::new(0.0, 0.3, -1.1));
        let x2 = g.end.tangent(Vec3::new(0.2, -0.4, 0.5));
        let f = jacobi_bvp(&g, &x1, &x2, 5).unwrap();
        assert_eq!(f.samples[0].value, x1);
        assert_eq!(f.samples[4].value, x2);
        let sol = JacobiBvp::solve(&g, &x1, &x2).unwrap();
        assert!(close(&sol.value(0.0), x1.vec(), 1e-14));
        assert!(close(&sol.value(1.0), x2.vec(), 1e-14));
    }

    #[test]
    fn jacobi_errors() {
        let p = pt(0.0, 0.0, 1.0);
        let g = Geodesic::between(&p, &p).unwrap();
        assert!(matches!(
            jacobi_bvp(&g, &SphereTangent::zero(p), &SphereTangent::zero(p), 3),
            Err(GeometryError::DegenerateGeodesic { .. })
        ));
        let q = pt(1.0, 0.0, 1.0);
        let g = Geodesic::between(&p, &q).unwrap();
        assert!(matches!(
            jacobi_bvp(&g, &SphereTangent::zero(p), &SphereTangent::zero(q), 1),
            Err(GeometryError::TooFewSamples { .. })
        ));
    }

    #[test]
    fn jacobi_residual_small_for_standard_and_large_when_flipped() {
        let g = Geodesic::between(&pt(1.0, 0.0, 0.0), &pt(0.0, 1.0, 0.3)).unwrap();
        let x1 = g.start.tangent(Vec3::new(0.0, 0.2, 1.0));
        let x2 = g.end.tangent(Vec3::new(0.5, 0.0, -0.3));
        let sol = JacobiBvp::solve(&g, &x1, &x2).unwrap();
        let ok = SphereGeometry::default().jacobi_residual(&sol, 1e-3);
        let bad = SphereGeometry::flipped().jacobi_residual(&sol, 1e-3);
        assert!(ok < 1e-5, "{ok}");
        assert!(bad > 0.1, "{bad}");
    }

    #[test]
    fn pseudo_distance_examples() {
        let e1 = pt(1.0, 0.0, 0.0);
        let e2 = pt(0.0, 1.0, 0.0);
        let x = e1.tangent(Vec3::new(0.0, 0.5, 0.5));
        let y = e1.tangent(Vec3::new(0.0, -0.2, 0.1));
        assert_eq!(pseudo_dist_transport(&x, &x).unwrap(), 0.0);
        assert!(
            (pseudo_dist_transport(&x, &y).unwrap() - (x.vec() - y.vec()).norm()).abs() < 1e-15
        );
        assert!(
            pseudo_dist_transport(&e1.tangent(Vec3::z()), &e2.tangent(Vec3::z())).unwrap() < 1e-15
        );
        assert_eq!(pseudo_dist_jacobi(&x, &x, 8).unwrap(), 0.0);
        assert_eq!(
            pseudo_dist_jacobi(&x, &y, 8).unwrap(),
            (x.vec() - y.vec()).norm()
        );
        let g = Geodesic::between(&e1, &pt(0.9, 0.3, 0.2)).unwrap();
        assert!(pseudo_dist_jacobi(&g.velocity_at(0.0), &g.velocity_at(1.0), 8).unwrap() < 1e-12);
    }

    #[test]
    fn gradient_examples() {
        let e1 = pt(1.0, 0.0, 0.0);
        let e2 = pt(0.0, 1.0, 0.0);
        let xt = TangentPair::new(e1.tangent(Vec3::y()), SphereTangent::zero(e2));
        assert!((grad_d2(&e1, &e2, &xt).unwrap() + FRAC_PI_2).abs() < 1e-15);
        let xt = TangentPair::new(e1.tangent(Vec3::new(0.0, 0.3, 0.4)), e1.tangent(Vec3::z()));
        assert_eq!(grad_d2(&e1, &e1, &xt).unwrap(), 0.0);
        let q = pt(0.7, 0.5, -0.2);
        let g = Geodesic::between(&e1, &q).unwrap();
        let xt = TangentPair::new(
            SphereTangent::zero(e1),
            g.velocity_at(1.0).scale(1.0 / g.length),
        );
        assert!((grad_d2(&e1, &q, &xt).unwrap() - g.length).abs() < 1e-14);
    }

    #[test]
    fn hessian_coincident_limit() {
        let p = pt(0.2, 0.1, 0.9);
        let x = p.tangent(Vec3::new(1.0, 0.0, 0.0));
        let xt = TangentPair::new(x, x);
        assert_eq!(hessian_d2(&p, &p, &xt, &xt).unwrap(), 0.0);
        let yt = TangentPair::new(p.tangent(Vec3::y()), p.tangent(Vec3::z()));
        let expect = (x.vec() - x.vec()).dot(&(yt.second.vec() - yt.first.vec()));
        assert_eq!(hessian_d2(&p, &p, &xt, &yt).unwrap(), expect);
    }

    #[test]
    fn geometry_constants() {
        let c = GeometryConstants::unit_sphere();
        assert_eq!(c.delta0, 0.25);
        assert_eq!(c.i0, PI);
        assert_eq!(GeometryConstants::new(4.0, 0.2).delta0, 0.1);
    }
}

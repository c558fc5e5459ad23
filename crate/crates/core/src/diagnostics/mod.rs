//! Quantities comparing two nearby maps `u₁, u₂ : Tᵐ → S²`.
//!
//! The two maps are joined node by node by the short great circle
//! `U(s, x)`, `s ∈ [0, 1]`. Transport along these arcs identifies
//! `u₂*TS²` with `u₁*TS²`, and everything below is measured on `u₁*TS²`:
//! the distance functional `Q₁`, the gradient mismatch `Q₂`, the difference
//! `B = ∇₂ − ∇₁` of the pull-back connections and the difference of the
//! covariant Laplacians.
//!
//! Nodes where the two maps coincide never divide by the distance: the
//! Jacobi field there is the straight interpolation of its boundary values
//! and `B` vanishes.

mod compare;
mod report;

pub use compare::{run_compare, CompareConfig, CompareOutcome, Escape};
pub use report::{
    gronwall_fit, DiagnosticsReport, NodeChecks, SeriesRow, GRONWALL_WINDOW_START, SERIES_HEADER,
};

use thiserror::Error;

use crate::fields::{
    covariant_difference, covariant_gradient, integrate_scalar, FieldError, Grid, MapField,
    TangentField,
};
use crate::flow::{FlowError, Trajectory};
use crate::quadrature::{self, Rule};
use crate::sphere::{
    distance, raw_transport, Geodesic, GeometryConstants, GeometryError, JacobiBvp, SphereGeometry,
    SphereTangent, TangentPair, Vec3,
};

/// Default number of Simpson nodes in `s`.
pub const DEFAULT_S_SAMPLES: usize = 9;

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error("node {node} is at distance {distance}, not below the closeness radius {delta0}")]
    Closeness {
        node: usize,
        distance: f64,
        delta0: f64,
    },
    #[error("s_samples must be odd and at least 3, got {0}")]
    BadSamples(usize),
    #[error("Q1 + Q2 vanishes on the fit window; identical runs have no growth rate to fit")]
    DegenerateData,
    #[error("trajectories are not sampled at the same times")]
    TimeMismatch,
}

/// Largest pointwise distance between two maps on the same grid.
pub fn closeness_guard(u1: &MapField, u2: &MapField) -> Result<f64, DiagnosticsError> {
    u1.expect_grid(u2)?;
    Ok(u1
        .values()
        .iter()
        .zip(u2.values())
        .map(|(p, q)| distance(p, q))
        .fold(0.0, f64::max))
}

/// The map `U(s, x)` sweeping the short geodesic from `u₁(x)` to `u₂(x)`.
#[derive(Clone, Debug)]
pub struct GeodesicHomotopy {
    u1: MapField,
    u2: MapField,
    rule: Rule,
    geodesics: Vec<Geodesic>,
}

/// Builds the homotopy, refusing pairs that are not within `δ₀` everywhere.
pub fn build_homotopy(
    u1: &MapField,
    u2: &MapField,
    s_samples: usize,
) -> Result<GeodesicHomotopy, DiagnosticsError> {
    u1.expect_grid(u2)?;
    let rule = quadrature::simpson(s_samples).ok_or(DiagnosticsError::BadSamples(s_samples))?;
    let delta0 = GeometryConstants::unit_sphere().delta0;
    let mut geodesics = Vec::with_capacity(u1.grid().len());
    for (node, (p, q)) in u1.values().iter().zip(u2.values()).enumerate() {
        let d = distance(p, q);
        if d >= delta0 {
            return Err(DiagnosticsError::Closeness {
                node,
                distance: d,
                delta0,
            });
        }
        geodesics.push(Geodesic::between(p, q)?);
    }
    Ok(GeodesicHomotopy {
        u1: u1.clone(),
        u2: u2.clone(),
        rule,
        geodesics,
    })
}

impl GeodesicHomotopy {
    pub fn grid(&self) -> &Grid {
        self.u1.grid()
    }

    pub fn u1(&self) -> &MapField {
        &self.u1
    }

    pub fn u2(&self) -> &MapField {
        &self.u2
    }

    pub fn s_samples(&self) -> usize {
        self.rule.len()
    }

    /// The Simpson nodes `s_j`.
    pub fn s_nodes(&self) -> &[f64] {
        &self.rule.nodes
    }

    pub fn geodesic(&self, node: usize) -> &Geodesic {
        &self.geodesics[node]
    }

    /// `U(s_j, x)`; the endpoints return `u₁(x)` and `u₂(x)` verbatim.
    pub fn point(&self, j: usize, node: usize) -> crate::sphere::SpherePoint {
        if j == 0 {
            *self.u1.value(node)
        } else if j + 1 == self.rule.len() {
            *self.u2.value(node)
        } else {
            self.geodesics[node].point_at(self.rule.nodes[j])
        }
    }

    /// The map `U(s_j, ·)` as a field on the grid.
    pub fn slice(&self, j: usize) -> MapField {
        let values = (0..self.grid().len())
            .map(|node| self.point(j, node))
            .collect();
        MapField::new(*self.grid(), values).expect("same grid")
    }

    /// `∂ₛU(x)`, constant in `s` up to transport, with `|∂ₛU| = d(u₁, u₂)`.
    pub fn velocity(&self, node: usize) -> SphereTangent {
        self.geodesics[node].velocity_at(0.0)
    }

    pub fn distance(&self, node: usize) -> f64 {
        self.geodesics[node].length
    }

    /// Jacobi fields `∇̄ᵢU` with boundary values `∇ᵢu₁`, `∇ᵢu₂`; `[direction][node]`.
    fn jacobi_fields(&self) -> Vec<Vec<NodeJacobi>> {
        let g1 = covariant_gradient(&self.u1);
        let g2 = covariant_gradient(&self.u2);
        (0..self.grid().dim())
            .map(|i| {
                (0..self.grid().len())
                    .map(|node| {
                        NodeJacobi::solve(
                            &self.geodesics[node],
                            g1.component(i)[node],
                            g2.component(i)[node],
                        )
                    })
                    .collect()
            })
            .collect()
    }
}

/// Jacobi field along one node's geodesic.
#[derive(Clone, Copy, Debug)]
enum NodeJacobi {
    Closed(JacobiBvp),
    /// Coincident endpoints: `W(s) = (1 − s)X₁ + sX₂`.
    Coincident(Geodesic, Vec3, Vec3),
}

impl NodeJacobi {
    fn solve(g: &Geodesic, x1: Vec3, x2: Vec3) -> Self {
        if g.is_degenerate() {
            return NodeJacobi::Coincident(*g, x1, x2);
        }
        let t1 = SphereTangent::new(g.start, x1);
        let t2 = SphereTangent::new(g.end, x2);
        // within δ₀ the only failure mode (conjugate points) cannot occur
        NodeJacobi::Closed(JacobiBvp::solve(g, &t1, &t2).expect("short geodesic"))
    }

    fn value(&self, s: f64) -> Vec3 {
        match self {
            NodeJacobi::Closed(j) => j.value(s),
            NodeJacobi::Coincident(g, x1, x2) => g.point_at(s).project(&(x1 * (1.0 - s) + x2 * s)),
        }
    }

    fn sup_norm(&self, s_nodes: &[f64]) -> f64 {
        s_nodes
            .iter()
            .map(|&s| self.value(s).norm())
            .fold(0.0, f64::max)
    }
}

/// Transports a field over `u₂` to `u₁` along the homotopy, slot by slot.
pub fn morphism_apply(
    h: &GeodesicHomotopy,
    f: &TangentField,
) -> Result<TangentField, DiagnosticsError> {
    if f.base() != &h.u2 {
        return Err(FieldError::BaseMismatch.into());
    }
    let components = f
        .components()
        .iter()
        .map(|c| {
            c.iter()
                .enumerate()
                .map(|(node, v)| transport_2_to_1(h, node, v))
                .collect()
        })
        .collect();
    Ok(TangentField::from_parts(h.u1.clone(), components))
}

fn transport_2_to_1(h: &GeodesicHomotopy, node: usize, v: &Vec3) -> Vec3 {
    let (p, q) = (h.u1.value(node).coords(), h.u2.value(node).coords());
    if p == q {
        return *v;
    }
    raw_transport(p, q, v)
}

fn transport_1_to_2(h: &GeodesicHomotopy, node: usize, v: &Vec3) -> Vec3 {
    let (p, q) = (h.u1.value(node).coords(), h.u2.value(node).coords());
    if p == q {
        return *v;
    }
    raw_transport(q, p, v)
}

/// `Q₁ = ∫ d(u₁, u₂)² dx`.
pub fn q1(u1: &MapField, u2: &MapField) -> Result<f64, DiagnosticsError> {
    u1.expect_grid(u2)?;
    let d2: Vec<f64> = u1
        .values()
        .iter()
        .zip(u2.values())
        .map(|(p, q)| distance(p, q).powi(2))
        .collect();
    Ok(integrate_scalar(&d2, u1.grid()))
}

/// `ψ = 𝒫∇u₂ − ∇u₁` on `u₁*TS²`.
pub fn psi(h: &GeodesicHomotopy) -> Result<TangentField, DiagnosticsError> {
    let moved = morphism_apply(h, &covariant_gradient(&h.u2))?;
    Ok(moved.difference(&covariant_gradient(&h.u1))?)
}

/// `Q₂ = ∫ |𝒫∇u₂ − ∇u₁|² dx`.
pub fn q2(h: &GeodesicHomotopy) -> Result<f64, DiagnosticsError> {
    Ok(psi(h)?.l2_norm_squared())
}

/// `Q₂` from frame components: an orthonormal frame `f₁,α` at `u₁(x)` is
/// transported to `f₂,α` at `u₂(x)` and `ψ^α = ⟨∇u₂, f₂,α⟩ − ⟨∇u₁, f₁,α⟩`.
pub fn q2_frame(h: &GeodesicHomotopy) -> Result<f64, DiagnosticsError> {
    let g1 = covariant_gradient(&h.u1);
    let g2 = covariant_gradient(&h.u2);
    let grid = h.grid();
    let mut sum = 0.0;
    for node in 0..grid.len() {
        let frame1 = tangent_basis(h, node);
        let frame2 = frame1.map(|f| transport_1_to_2(h, node, &f));
        for i in 0..grid.dim() {
            for a in 0..2 {
                let c =
                    g2.component(i)[node].dot(&frame2[a]) - g1.component(i)[node].dot(&frame1[a]);
                sum += c * c;
            }
        }
    }
    Ok(sum * grid.cell_volume())
}

/// Orthonormal `(e₁, Je₁)` at `u₁(x)`, with `e₁` along the geodesic when it
/// is not degenerate.
fn tangent_basis(h: &GeodesicHomotopy, node: usize) -> [Vec3; 2] {
    let p = h.u1.value(node).coords();
    let g = &h.geodesics[node];
    let e1 = if g.is_degenerate() {
        let axis = if p.x.abs() < 0.9 {
            Vec3::x()
        } else {
            Vec3::y()
        };
        let v = axis - p * p.dot(&axis);
        v / v.norm()
    } else {
        *g.unit_tangent_at_start.vec()
    };
    [e1, p.cross(&e1)]
}

/// `−2 ∫ Σ_k ½∇̃²d²(X̃_k, Ỹ_k) dx` with `X̃_k = (∇_k u₁, ∇_k u₂)` and
/// `Ỹ_k = (J∇_k u₁, J∇_k u₂)`: the time derivative of `Q₁` along two
/// solutions of the flow.
pub fn q1_rate_rhs(
    u1: &MapField,
    u2: &MapField,
    geometry: &SphereGeometry,
) -> Result<f64, DiagnosticsError> {
    u1.expect_grid(u2)?;
    let g1 = covariant_gradient(u1);
    let g2 = covariant_gradient(u2);
    let grid = u1.grid();
    let mut integrand = vec![0.0; grid.len()];
    for (node, slot) in integrand.iter_mut().enumerate() {
        let (p, q) = (u1.value(node), u2.value(node));
        for k in 0..grid.dim() {
            let (x1, x2) = (g1.component(k)[node], g2.component(k)[node]);
            let xt = TangentPair::new(SphereTangent::new(*p, x1), SphereTangent::new(*q, x2));
            let yt = TangentPair::new(
                SphereTangent::new(*p, p.coords().cross(&x1)),
                SphereTangent::new(*q, q.coords().cross(&x2)),
            );
            *slot += geometry.hessian_d2(p, q, &xt, &yt)?;
        }
    }
    Ok(-2.0 * integrate_scalar(&integrand, grid))
}

/// `max_x Σ_k (|∇_k u₁| + |∇_k u₂|)²`, the factor turning the pointwise
/// Hessian constant into the constant of `½ dQ₁/dt ≤ Q₂ + C Q₁`.
pub fn q1_inequality_factor(u1: &MapField, u2: &MapField) -> Result<f64, DiagnosticsError> {
    u1.expect_grid(u2)?;
    let g1 = covariant_gradient(u1);
    let g2 = covariant_gradient(u2);
    Ok((0..u1.grid().len())
        .map(|node| {
            (0..u1.grid().dim())
                .map(|k| (g1.component(k)[node].norm() + g2.component(k)[node].norm()).powi(2))
                .sum::<f64>()
        })
        .fold(0.0, f64::max))
}

/// One evaluation of the `Q₁` rate identity at a stored time.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct Q1Rate {
    pub t: f64,
    /// Centred time difference of `Q₁`.
    pub lhs: f64,
    /// `−∫ ∇̃²d²(X̃, Ỹ)` at the same time.
    pub rhs: f64,
    /// `Q₂ + C·Q₁`.
    pub bound: f64,
    /// `|lhs − rhs|`.
    pub consistency: f64,
    /// `max(0, ½·lhs − bound)`.
    pub violation: f64,
}

/// Compares the measured rate of `Q₁` with the Hessian identity and the
/// bound `Q₂ + c·Q₁` at the stored state nearest `t`.
pub fn q1_rate_check(
    traj1: &Trajectory,
    traj2: &Trajectory,
    t: f64,
    c: f64,
    geometry: &SphereGeometry,
) -> Result<Q1Rate, DiagnosticsError> {
    if traj1.times() != traj2.times() {
        return Err(DiagnosticsError::TimeMismatch);
    }
    let k = traj1.bracket(t)?;
    let q1_at = |j: usize| q1(&traj1.states[j].u, &traj2.states[j].u);
    let span = traj1.states[k + 1].time - traj1.states[k - 1].time;
    let lhs = (q1_at(k + 1)? - q1_at(k - 1)?) / span;
    let (u1, u2) = (&traj1.states[k].u, &traj2.states[k].u);
    let rhs = q1_rate_rhs(u1, u2, geometry)?;
    let h = build_homotopy(u1, u2, DEFAULT_S_SAMPLES)?;
    let bound = q2(&h)? + c * q1(u1, u2)?;
    Ok(Q1Rate {
        t: traj1.states[k].time,
        lhs,
        rhs,
        bound,
        consistency: (lhs - rhs).abs(),
        violation: (0.5 * lhs - bound).max(0.0),
    })
}

/// `B_i = ∇₂,ᵢ − ∇₁,ᵢ` as a linear operator on each fibre of `u₁*TS²`,
/// stored as its images of an orthonormal tangent basis.
#[derive(Clone, Debug)]
pub struct ConnectionDifference {
    grid: Grid,
    basis: Vec<[Vec3; 2]>,
    images: Vec<Vec<[Vec3; 2]>>,
}

impl ConnectionDifference {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn basis(&self, node: usize) -> [Vec3; 2] {
        self.basis[node]
    }

    /// `B_i v` at `node`; `v` is projected onto the basis plane.
    pub fn apply(&self, dir: usize, node: usize, v: &Vec3) -> Vec3 {
        let [e1, e2] = self.basis[node];
        let [b1, b2] = self.images[dir][node];
        b1 * v.dot(&e1) + b2 * v.dot(&e2)
    }

    /// Matrix `⟨e_a, B_i e_b⟩`.
    pub fn matrix(&self, dir: usize, node: usize) -> [[f64; 2]; 2] {
        let e = self.basis[node];
        let b = self.images[dir][node];
        [
            [e[0].dot(&b[0]), e[0].dot(&b[1])],
            [e[1].dot(&b[0]), e[1].dot(&b[1])],
        ]
    }

    /// Spectral norm of the 2×2 matrix.
    pub fn operator_norm(&self, dir: usize, node: usize) -> f64 {
        let m = self.matrix(dir, node);
        let (a, b, c, d) = (m[0][0], m[0][1], m[1][0], m[1][1]);
        let s = a * a + b * b + c * c + d * d;
        let det = a * d - b * c;
        (0.5 * (s + (s * s - 4.0 * det * det).max(0.0).sqrt())).sqrt()
    }

    /// Coefficient `β` in `B_i ≈ β J`, namely `⟨e₂, B_i e₁⟩` with `e₂ = Je₁`.
    pub fn rotation_coefficient(&self, dir: usize, node: usize) -> f64 {
        self.matrix(dir, node)[1][0]
    }

    /// Largest `|⟨e_a, B e_b⟩ + ⟨e_b, B e_a⟩|`.
    pub fn max_skew_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for dir in 0..self.images.len() {
            for node in 0..self.basis.len() {
                let m = self.matrix(dir, node);
                worst = worst
                    .max((2.0 * m[0][0]).abs())
                    .max((2.0 * m[1][1]).abs())
                    .max((m[0][1] + m[1][0]).abs());
            }
        }
        worst
    }

    pub fn max_operator_norm(&self) -> f64 {
        (0..self.images.len())
            .flat_map(|dir| (0..self.basis.len()).map(move |node| (dir, node)))
            .map(|(dir, node)| self.operator_norm(dir, node))
            .fold(0.0, f64::max)
    }

    /// Largest operator norm of `self − other`.
    pub fn max_difference(&self, other: &ConnectionDifference) -> f64 {
        let mut worst: f64 = 0.0;
        for dir in 0..self.images.len() {
            for node in 0..self.basis.len() {
                let e = self.basis[node];
                let d: [Vec3; 2] =
                    [0, 1].map(|a| self.apply(dir, node, &e[a]) - other.apply(dir, node, &e[a]));
                let m = [
                    [e[0].dot(&d[0]), e[0].dot(&d[1])],
                    [e[1].dot(&d[0]), e[1].dot(&d[1])],
                ];
                worst = worst.max(norm2x2(m));
            }
        }
        worst
    }
}

fn norm2x2(m: [[f64; 2]; 2]) -> f64 {
    let (a, b, c, d) = (m[0][0], m[0][1], m[1][0], m[1][1]);
    let s = a * a + b * b + c * c + d * d;
    let det = a * d - b * c;
    (0.5 * (s + (s * s - 4.0 * det * det).max(0.0).sqrt())).sqrt()
}

/// `B_i = ∫₀¹ R(∂ₛU, ∇̄ᵢU) ds` by composite Simpson, each integrand
/// transported from `U(s)` back to `u₁`.
pub fn connection_difference(
    h: &GeodesicHomotopy,
    geometry: &SphereGeometry,
) -> ConnectionDifference {
    let grid = *h.grid();
    let basis: Vec<[Vec3; 2]> = (0..grid.len()).map(|node| tangent_basis(h, node)).collect();
    let jacobi = h.jacobi_fields();
    let images = jacobi
        .iter()
        .map(|fields| {
            fields
                .iter()
                .enumerate()
                .map(|(node, w)| {
                    let g = &h.geodesics[node];
                    if g.is_degenerate() {
                        return [Vec3::zeros(); 2];
                    }
                    basis[node].map(|e| {
                        h.rule
                            .nodes
                            .iter()
                            .zip(&h.rule.weights)
                            .map(|(&s, &wt)| {
                                let z = g.transport_from_start(s, &e);
                                let vel = g.velocity_at(s);
                                let r = geometry.raw_curvature(vel.vec(), &w.value(s), &z);
                                g.transport_to_start(s, &r) * wt
                            })
                            .sum()
                    })
                })
                .collect()
        })
        .collect();
    ConnectionDifference {
        grid,
        basis,
        images,
    }
}

/// `B_i` measured from the connections themselves: `(H₊ − H₋) / 2h`, where
/// `H±` is the transport around the loop
/// `u₁(x) → u₁(x ± heᵢ) → u₂(x ± heᵢ) → u₂(x) → u₁(x)`.
///
/// This uses nothing but parallel transport, so it is independent of any
/// curvature convention.
pub fn connection_difference_holonomy(h: &GeodesicHomotopy) -> ConnectionDifference {
    let grid = *h.grid();
    let basis: Vec<[Vec3; 2]> = (0..grid.len()).map(|node| tangent_basis(h, node)).collect();
    let loop_transport = |node: usize, nb: usize, v: &Vec3| {
        let (a1, b1) = (h.u1.value(node).coords(), h.u1.value(nb).coords());
        let (a2, b2) = (h.u2.value(node).coords(), h.u2.value(nb).coords());
        let v = raw_transport(b1, a1, v);
        let v = raw_transport(b2, b1, &v);
        let v = raw_transport(a2, b2, &v);
        raw_transport(a1, a2, &v)
    };
    let images = (0..grid.dim())
        .map(|axis| {
            let h2 = 2.0 * grid.spacing(axis);
            (0..grid.len())
                .map(|node| {
                    let fwd = grid.neighbor(node, axis, 1);
                    let bwd = grid.neighbor(node, axis, -1);
                    basis[node].map(|e| {
                        (loop_transport(node, fwd, &e) - loop_transport(node, bwd, &e)) / h2
                    })
                })
                .collect()
        })
        .collect();
    ConnectionDifference {
        grid,
        basis,
        images,
    }
}

/// Node-wise check of `|B_i| ≤ K·d·sup_s|∇̄ᵢU|` for the quadrature `B`,
/// together with its agreement with the holonomy measurement.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct ConnectionCheck {
    pub checked: usize,
    /// Nodes where the bound fails.
    pub bound_violations: usize,
    /// Nodes where the quadrature `B` is not the measured `∇₂ − ∇₁`.
    pub identity_violations: usize,
    /// Largest `|B_i| / (K·d·sup_s|∇̄ᵢU|)`.
    pub max_bound_ratio: f64,
    /// Largest `|B_i − B_i^hol| / (K·d·sup_s|∇̄ᵢU|)`.
    pub max_identity_defect: f64,
    pub max_skew_defect: f64,
}

impl ConnectionCheck {
    pub fn violations(&self) -> usize {
        self.bound_violations + self.identity_violations
    }
}

/// Relative tolerance for the quadrature and holonomy values of `B` to agree,
/// measured against the bound `K·d·sup_s|∇̄ᵢU|`.
pub const CONNECTION_IDENTITY_TOLERANCE: f64 = 0.05;

pub fn connection_check(
    h: &GeodesicHomotopy,
    geometry: &SphereGeometry,
    curvature_constant: f64,
) -> ConnectionCheck {
    let b = connection_difference(h, geometry);
    let hol = connection_difference_holonomy(h);
    let jacobi = h.jacobi_fields();
    let mut out = ConnectionCheck {
        checked: 0,
        bound_violations: 0,
        identity_violations: 0,
        max_bound_ratio: 0.0,
        max_identity_defect: 0.0,
        max_skew_defect: b.max_skew_defect(),
    };
    for (dir, fields) in jacobi.iter().enumerate() {
        for (node, w) in fields.iter().enumerate() {
            out.checked += 1;
            let bound = curvature_constant * h.distance(node) * w.sup_norm(h.s_nodes());
            let norm = b.operator_norm(dir, node);
            let e = b.basis(node);
            let diff = norm2x2([0, 1].map(|r| {
                [0, 1].map(|c| e[r].dot(&(b.apply(dir, node, &e[c]) - hol.apply(dir, node, &e[c]))))
            }));
            if norm > bound * (1.0 + 1e-9) + 1e-15 {
                out.bound_violations += 1;
            }
            if diff > CONNECTION_IDENTITY_TOLERANCE * bound + 1e-12 {
                out.identity_violations += 1;
            }
            if bound > 0.0 {
                out.max_bound_ratio = out.max_bound_ratio.max(norm / bound);
                out.max_identity_defect = out.max_identity_defect.max(diff / bound);
            }
        }
    }
    out
}

/// Both sides of `Δ₂ − Δ₁ = ∇₂,ₖBₖ + 2Bₖ∇₂,ₖ − Bₖ²` applied to `𝒫φ₂`.
#[derive(Clone, Debug)]
pub struct LaplacianDifference {
    /// `𝒫(Δ₂φ₂) − Δ₁(𝒫φ₂)`.
    pub direct: TangentField,
    /// The right-hand side evaluated with the quadrature `B`.
    pub via_b: TangentField,
}

impl LaplacianDifference {
    /// `(∫|direct − via_B|² dx)^{1/2}`.
    pub fn discrepancy(&self) -> f64 {
        self.direct
            .difference(&self.via_b)
            .expect("same base")
            .l2_norm_squared()
            .sqrt()
    }
}

pub fn laplacian_difference(
    h: &GeodesicHomotopy,
    phi2: &TangentField,
    geometry: &SphereGeometry,
) -> Result<LaplacianDifference, DiagnosticsError> {
    let moved = morphism_apply(h, phi2)?;
    let grid = *h.grid();
    let lap2 = morphism_apply(h, &crate::fields::covariant_laplacian(phi2))?;
    let lap1 = crate::fields::covariant_laplacian(&moved);
    let direct = lap2.difference(&lap1)?;

    let b = connection_difference(h, geometry);
    let mut via = Vec::with_capacity(phi2.slots());
    for slot in 0..phi2.slots() {
        let sigma = moved.component(slot);
        let mut total = vec![Vec3::zeros(); grid.len()];
        for k in 0..grid.dim() {
            let d2 = covariant_difference(h.u2(), phi2.component(slot), k);
            let hat = TangentField::from_parts(h.u2.clone(), vec![d2]);
            let nabla2 = morphism_apply(h, &hat)?;
            let h2 = 2.0 * grid.spacing(k);
            for (node, out) in total.iter_mut().enumerate() {
                let at = h.u1.value(node).coords();
                let s = sigma[node];
                // (∇B)σ by the covariant central difference of the operator field
                let fwd = grid.neighbor(node, k, 1);
                let bwd = grid.neighbor(node, k, -1);
                let apply_at = |nb: usize| {
                    let there = h.u1.value(nb).coords();
                    let v = raw_transport(there, at, &s);
                    raw_transport(at, there, &b.apply(k, nb, &v))
                };
                let nabla_b = (apply_at(fwd) - apply_at(bwd)) / h2;
                let bs = b.apply(k, node, &s);
                *out += nabla_b + b.apply(k, node, &nabla2.component(0)[node]) * 2.0
                    - b.apply(k, node, &bs);
            }
        }
        via.push(total);
    }
    Ok(LaplacianDifference {
        direct,
        via_b: TangentField::from_parts(h.u1.clone(), via),
    })
}

/// Ratios of the homotopy derivatives to their boundary data.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct JacobiEstimate {
    /// `max sup_s|∇̄ᵢU| / (|φ₁,ᵢ| + |φ₂,ᵢ|)`, with `0/0` read as 0.
    pub first_order: f64,
    /// `max sup_s|∇̄ᵢ∇̄ⱼU|` over the right-hand side of the second-order
    /// estimate with unit constant.
    pub second_order: f64,
}

pub fn jacobi_estimate_check(h: &GeodesicHomotopy) -> JacobiEstimate {
    let grid = *h.grid();
    let g1 = covariant_gradient(&h.u1);
    let g2 = covariant_gradient(&h.u2);
    let jacobi = h.jacobi_fields();
    let mut first: f64 = 0.0;
    for (i, fields) in jacobi.iter().enumerate() {
        for (node, w) in fields.iter().enumerate() {
            let denom = g1.component(i)[node].norm() + g2.component(i)[node].norm();
            if denom > 0.0 {
                first = first.max(w.sup_norm(h.s_nodes()) / denom);
            }
        }
    }

    let hess1: Vec<Vec<Vec<Vec3>>> = second_derivatives(&h.u1, &g1);
    let hess2: Vec<Vec<Vec<Vec3>>> = second_derivatives(&h.u2, &g2);
    let mut sup = vec![vec![vec![0.0f64; grid.len()]; grid.dim()]; grid.dim()];
    for j in 0..h.s_samples() {
        let s = h.s_nodes()[j];
        let slice = h.slice(j);
        for jd in 0..grid.dim() {
            let w: Vec<Vec3> = jacobi[jd].iter().map(|f| f.value(s)).collect();
            for (id, row) in sup.iter_mut().enumerate() {
                let d = covariant_difference(&slice, &w, id);
                for (node, v) in d.iter().enumerate() {
                    row[jd][node] = row[jd][node].max(v.norm());
                }
            }
        }
    }
    let mut second: f64 = 0.0;
    for i in 0..grid.dim() {
        for j in 0..grid.dim() {
            for node in 0..grid.len() {
                let a = |k: usize| g1.component(k)[node].norm() + g2.component(k)[node].norm();
                let denom = hess1[i][j][node].norm() + hess2[i][j][node].norm() + a(i) * a(j);
                if denom > 0.0 {
                    second = second.max(sup[i][j][node] / denom);
                }
            }
        }
    }
    JacobiEstimate {
        first_order: first,
        second_order: second,
    }
}

/// `∇ᵢφⱼ` for `φ = ∇u`, indexed `[i][j][node]`.
fn second_derivatives(u: &MapField, grad: &TangentField) -> Vec<Vec<Vec<Vec3>>> {
    (0..u.grid().dim())
        .map(|i| {
            (0..u.grid().dim())
                .map(|j| covariant_difference(u, grad.component(j), i))
                .collect()
        })
        .collect()
}

/// Tangent pairs `(∇ₖu₁(x), ∇ₖu₂(x))` at every node and direction, for
/// running the pointwise geometry checks on homotopy data.
pub fn homotopy_pairs(h: &GeodesicHomotopy) -> Vec<TangentPair> {
    let g1 = covariant_gradient(&h.u1);
    let g2 = covariant_gradient(&h.u2);
    let mut out = Vec::new();
    for k in 0..h.grid().dim() {
        for node in 0..h.grid().len() {
            out.push(TangentPair::new(
                SphereTangent::new(*h.u1.value(node), g1.component(k)[node]),
                SphereTangent::new(*h.u2.value(node), g2.component(k)[node]),
            ));
        }
    }
    out
}

//! Maps from flat tori `T¹`, `T²` into S² and finite-difference calculus on
//! the pull-back bundle `u*TS²`.
//!
//! Covariant derivatives are central differences of neighbouring values,
//! brought into the tangent plane at the centre node. For the map itself the
//! ambient difference is projected; for sections of `u*TS²` the neighbours
//! are first parallel-transported along the short great circle joining
//! `u(x ± h)` to `u(x)`, which already lands in the right tangent plane.
//! All stencils are periodic. The domain is flat, so there is no Ricci term
//! anywhere.

pub mod io;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sphere::{raw_transport, SpherePoint, Vec3};

pub const MIN_NODES_PER_AXIS: usize = 8;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("grid dimension must be 1 or 2, got {0}")]
    BadDimension(usize),
    #[error("grid needs at least {MIN_NODES_PER_AXIS} nodes per axis, got {0}")]
    TooFewNodes(usize),
    #[error("grid period must be positive and finite, got {0}")]
    BadLength(f64),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("expected {expected} values, got {got}")]
    WrongLength { expected: usize, got: usize },
    #[error("tangent field is not based on the given map")]
    BaseMismatch,
    #[error("malformed map file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Uniform periodic grid on a flat torus of dimension 1 or 2.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    sizes: [usize; 2],
    lengths: [f64; 2],
}

impl Grid {
    pub fn new(dim: usize, sizes: [usize; 2], lengths: [f64; 2]) -> Result<Self, FieldError> {
        if dim != 1 && dim != 2 {
            return Err(FieldError::BadDimension(dim));
        }
        for axis in 0..dim {
            if sizes[axis] < MIN_NODES_PER_AXIS {
                return Err(FieldError::TooFewNodes(sizes[axis]));
            }
            if !(lengths[axis].is_finite() && lengths[axis] > 0.0) {
                return Err(FieldError::BadLength(lengths[axis]));
            }
        }
        let (sizes, lengths) = if dim == 1 {
            ([sizes[0], 1], [lengths[0], 1.0])
        } else {
            (sizes, lengths)
        };
        Ok(Grid {
            dim,
            sizes,
            lengths,
        })
    }

    /// `n` nodes per axis on a cube of side `length`.
    pub fn cubic(dim: usize, n: usize, length: f64) -> Result<Self, FieldError> {
        Self::new(dim, [n, n], [length, length])
    }

    /// Default resolution: 1D circle of period 2π with `n` nodes.
    pub fn circle(n: usize) -> Result<Self, FieldError> {
        Self::cubic(1, n, std::f64::consts::TAU)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn size(&self, axis: usize) -> usize {
        self.sizes[axis]
    }

    pub fn length(&self, axis: usize) -> f64 {
        self.lengths[axis]
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.lengths[axis] / self.sizes[axis] as f64
    }

    pub fn min_spacing(&self) -> f64 {
        (0..self.dim)
            .map(|a| self.spacing(a))
            .fold(f64::INFINITY, f64::min)
    }

    /// Volume element `h^m` of the Riemann sum.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing(a)).product()
    }

    pub fn len(&self) -> usize {
        self.sizes[0] * self.sizes[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i + self.sizes[0] * j
    }

    pub fn multi_index(&self, idx: usize) -> [usize; 2] {
        [idx % self.sizes[0], idx / self.sizes[0]]
    }

    pub fn position(&self, idx: usize) -> [f64; 2] {
        let [i, j] = self.multi_index(idx);
        [i as f64 * self.spacing(0), j as f64 * self.spacing(1)]
    }

    /// Periodic neighbour of `idx` shifted by `offset` nodes along `axis`.
    pub fn neighbor(&self, idx: usize, axis: usize, offset: isize) -> usize {
        let mut m = self.multi_index(idx);
        let n = self.sizes[axis] as isize;
        m[axis] = (m[axis] as isize + offset).rem_euclid(n) as usize;
        self.index(m[0], m[1])
    }

    fn expect_same(&self, other: &Grid) -> Result<(), FieldError> {
        if self == other {
            Ok(())
        } else {
            Err(FieldError::GridMismatch)
        }
    }
}

/// A discrete map `u : Tᵐ → S²`.
#[derive(Clone, Debug, PartialEq)]
pub struct MapField {
    grid: Grid,
    values: Vec<SpherePoint>,
}

impl MapField {
    pub fn new(grid: Grid, values: Vec<SpherePoint>) -> Result<Self, FieldError> {
        if values.len() != grid.len() {
            return Err(FieldError::WrongLength {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(MapField { grid, values })
    }

    /// Samples `f` at every node position and normalizes onto the sphere.
    pub fn from_fn<F: Fn([f64; 2]) -> Vec3>(grid: Grid, f: F) -> Self {
        let values = (0..grid.len())
            .map(|idx| SpherePoint::from_vec(f(grid.position(idx))))
            .collect();
        MapField { grid, values }
    }

    pub fn constant(grid: Grid, p: SpherePoint) -> Self {
        MapField {
            grid,
            values: vec![p; grid.len()],
        }
    }

    /// Builds a field from raw vectors, renormalizing each.
    pub(crate) fn from_vecs(grid: Grid, vecs: Vec<Vec3>) -> Self {
        let values = vecs.into_iter().map(SpherePoint::from_vec).collect();
        MapField { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[SpherePoint] {
        &self.values
    }

    pub fn value(&self, idx: usize) -> &SpherePoint {
        &self.values[idx]
    }

    pub(crate) fn vec(&self, idx: usize) -> &Vec3 {
        self.values[idx].coords()
    }

    pub fn to_vecs(&self) -> Vec<Vec3> {
        self.values.iter().map(|p| *p.coords()).collect()
    }

    /// Applies a fixed rotation to every value.
    pub fn rotated(&self, rot: &Matrix3<f64>) -> MapField {
        MapField::from_vecs(
            self.grid,
            self.values.iter().map(|p| rot * p.coords()).collect(),
        )
    }

    /// Cyclic shift of node indices by `k` along `axis`.
    pub fn shifted(&self, axis: usize, k: isize) -> MapField {
        let values = (0..self.grid.len())
            .map(|idx| self.values[self.grid.neighbor(idx, axis, -k)])
            .collect();
        MapField {
            grid: self.grid,
            values,
        }
    }

    pub fn max_norm_defect(&self) -> f64 {
        self.values
            .iter()
            .map(|p| (p.coords().norm() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub(crate) fn expect_grid(&self, other: &MapField) -> Result<(), FieldError> {
        self.grid.expect_same(&other.grid)
    }
}

/// Sections of `u*TS² ⊗ (slots)`: one tangent vector per node for each slot.
///
/// The gradient `∇u` has one slot per domain direction; a single section
/// such as the tension field has one slot.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentField {
    base: MapField,
    components: Vec<Vec<Vec3>>,
}

impl TangentField {
    /// Projects every component onto the tangent plane of `base`.
    pub fn new(base: MapField, components: Vec<Vec<Vec3>>) -> Result<Self, FieldError> {
        for c in &components {
            if c.len() != base.grid.len() {
                return Err(FieldError::WrongLength {
                    expected: base.grid.len(),
                    got: c.len(),
                });
            }
        }
        let components = components
            .into_iter()
            .map(|c| {
                c.iter()
                    .enumerate()
                    .map(|(idx, v)| base.values[idx].project(v))
                    .collect()
            })
            .collect();
        Ok(TangentField { base, components })
    }

    pub(crate) fn from_parts(base: MapField, components: Vec<Vec<Vec3>>) -> Self {
        TangentField { base, components }
    }

    pub fn zeros(base: MapField, slots: usize) -> Self {
        let n = base.grid.len();
        TangentField {
            base,
            components: vec![vec![Vec3::zeros(); n]; slots],
        }
    }

    pub fn base(&self) -> &MapField {
        &self.base
    }

    pub fn grid(&self) -> &Grid {
        &self.base.grid
    }

    pub fn slots(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, slot: usize) -> &[Vec3] {
        &self.components[slot]
    }

    pub fn components(&self) -> &[Vec<Vec3>] {
        &self.components
    }

    /// Largest `|⟨F, u⟩|` over nodes and slots.
    pub fn max_normal_part(&self) -> f64 {
        self.components
            .iter()
            .flat_map(|c| {
                c.iter()
                    .enumerate()
                    .map(|(i, v)| v.dot(self.base.vec(i)).abs())
            })
            .fold(0.0, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.components
            .iter()
            .flat_map(|c| c.iter().map(|v| v.norm()))
            .fold(0.0, f64::max)
    }

    /// `Σ_x Σ_slot |F|² h^m`.
    pub fn l2_norm_squared(&self) -> f64 {
        let sum: f64 = self
            .components
            .iter()
            .flat_map(|c| c.iter().map(|v| v.norm_squared()))
            .sum();
        sum * self.grid().cell_volume()
    }

    /// Pointwise `self − other`; both must share the same base.
    pub fn difference(&self, other: &TangentField) -> Result<TangentField, FieldError> {
        if self.base != other.base || self.slots() != other.slots() {
            return Err(FieldError::BaseMismatch);
        }
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
            .collect();
        Ok(TangentField::from_parts(self.base.clone(), components))
    }

    /// Applies `f(slot, node, value)` to every component, keeping the base.
    pub fn map_slots<F: Fn(usize, usize, &Vec3) -> Vec3>(&self, f: F) -> TangentField {
        let components = self
            .components
            .iter()
            .enumerate()
            .map(|(s, c)| c.iter().enumerate().map(|(i, v)| f(s, i, v)).collect())
            .collect();
        TangentField::from_parts(self.base.clone(), components)
    }
}

/// `∇_i u(x) = Π_{u(x)}[(u(x + heᵢ) − u(x − heᵢ)) / 2h]`.
pub fn covariant_gradient(u: &MapField) -> TangentField {
    let grid = u.grid;
    let components = (0..grid.dim)
        .map(|axis| {
            let h2 = 2.0 * grid.spacing(axis);
            (0..grid.len())
                .map(|idx| {
                    let fwd = u.vec(grid.neighbor(idx, axis, 1));
                    let bwd = u.vec(grid.neighbor(idx, axis, -1));
                    u.values[idx].project(&((fwd - bwd) / h2))
                })
                .collect()
        })
        .collect();
    TangentField::from_parts(u.clone(), components)
}

/// Componentwise ambient Laplacian with the 3-point (1D) or 5-point (2D) stencil.
pub fn ambient_laplacian(u: &MapField) -> Vec<Vec3> {
    let grid = u.grid;
    (0..grid.len())
        .map(|idx| {
            let centre = u.vec(idx);
            (0..grid.dim)
                .map(|axis| {
                    let h = grid.spacing(axis);
                    let fwd = u.vec(grid.neighbor(idx, axis, 1));
                    let bwd = u.vec(grid.neighbor(idx, axis, -1));
                    (fwd - centre * 2.0 + bwd) / (h * h)
                })
                .sum()
        })
        .collect()
}

/// Tension field `τ(u) = Π_{T_u}(Δ_h u)`, as a one-slot field.
pub fn tension(u: &MapField) -> TangentField {
    let lap = ambient_laplacian(u);
    let comp = lap
        .iter()
        .enumerate()
        .map(|(idx, v)| u.values[idx].project(v))
        .collect();
    TangentField::from_parts(u.clone(), vec![comp])
}

/// Central covariant difference of a section along `axis`:
/// `(𝒫_{x←x+h}F(x+h) − 𝒫_{x←x−h}F(x−h)) / 2h`.
pub fn covariant_difference(base: &MapField, section: &[Vec3], axis: usize) -> Vec<Vec3> {
    let grid = base.grid;
    let h2 = 2.0 * grid.spacing(axis);
    (0..grid.len())
        .map(|idx| {
            let at = base.vec(idx);
            let f = grid.neighbor(idx, axis, 1);
            let b = grid.neighbor(idx, axis, -1);
            let fwd = raw_transport(at, base.vec(f), &section[f]);
            let bwd = raw_transport(at, base.vec(b), &section[b]);
            base.values[idx].project(&((fwd - bwd) / h2))
        })
        .collect()
}

/// `Σ_k ∇_k∇_k` applied to a single section.
pub fn covariant_laplacian_section(base: &MapField, section: &[Vec3]) -> Vec<Vec3> {
    let grid = base.grid;
    let mut out = vec![Vec3::zeros(); grid.len()];
    for axis in 0..grid.dim {
        let once = covariant_difference(base, section, axis);
        let twice = covariant_difference(base, &once, axis);
        for (o, t) in out.iter_mut().zip(twice) {
            *o += t;
        }
    }
    out
}

/// Covariant Laplacian `Δ_x = ∇_k∇_k` on `u*TS² ⊗ T*M`, slot by slot.
pub fn covariant_laplacian(f: &TangentField) -> TangentField {
    let components = f
        .components
        .iter()
        .map(|c| covariant_laplacian_section(&f.base, c))
        .collect();
    TangentField::from_parts(f.base.clone(), components)
}

/// `½ Σ_x Σ_i |∇_i u(x)|² h^m` with the forward difference
/// `(u(x + heᵢ) − u(x)) / h` as the edge gradient.
///
/// This is the Hamiltonian whose variational derivative is the 3/5-point
/// Laplacian, so it is exactly conserved by the semi-discrete flow.
pub fn dirichlet_energy(u: &MapField) -> f64 {
    let grid = u.grid;
    let mut sum = 0.0;
    for axis in 0..grid.dim {
        let h = grid.spacing(axis);
        for idx in 0..grid.len() {
            let fwd = u.vec(grid.neighbor(idx, axis, 1));
            sum += (fwd - u.vec(idx)).norm_squared() / (h * h);
        }
    }
    0.5 * sum * grid.cell_volume()
}

/// Riemann sum `Σ f(x) h^m`.
pub fn integrate_scalar(values: &[f64], grid: &Grid) -> f64 {
    values.iter().sum::<f64>() * grid.cell_volume()
}

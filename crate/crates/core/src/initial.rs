//! Initial-condition families and seeded perturbations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::fields::{Grid, MapField};
use crate::sphere::{raw_exp, SpherePoint, Vec3};

/// Named initial-condition families.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum InitialCondition {
    /// Constant map at the north pole.
    Constant,
    /// `u(x) = (cos kx, sin kx, 0)`, a harmonic map for integer `k`.
    Winding { k: i32 },
    /// `u(x) = (sinθ₀ cos kx, sinθ₀ sin kx, cosθ₀)`.
    Magnon { k: i32, theta0: f64 },
    /// `exp_N(a·V)` for a seeded band-limited tangent field `V` at the north pole.
    SmoothRandom {
        amplitude: f64,
        modes: u32,
        seed: u64,
    },
}

impl InitialCondition {
    pub fn build(&self, grid: Grid) -> MapField {
        match *self {
            InitialCondition::Constant => MapField::constant(grid, SpherePoint::north()),
            InitialCondition::Winding { k } => winding(grid, k),
            InitialCondition::Magnon { k, theta0 } => magnon(grid, k, theta0, 0.0),
            InitialCondition::SmoothRandom {
                amplitude,
                modes,
                seed,
            } => {
                let base = MapField::constant(grid, SpherePoint::north());
                perturb(&base, amplitude, modes, seed)
            }
        }
    }
}

fn wavenumber(grid: &Grid, axis: usize, k: f64) -> f64 {
    k * std::f64::consts::TAU / grid.length(axis)
}

pub fn winding(grid: Grid, k: i32) -> MapField {
    let kx = wavenumber(&grid, 0, k as f64);
    MapField::from_fn(grid, |[x, _]| {
        Vec3::new((kx * x).cos(), (kx * x).sin(), 0.0)
    })
}

/// The precessing magnon `u(x, t) = (sinθ₀cos(kx − ωt), sinθ₀sin(kx − ωt), cosθ₀)`
/// with `ω = k²cosθ₀`, an exact solution of `uₜ = u × u_xx`.
pub fn magnon(grid: Grid, k: i32, theta0: f64, t: f64) -> MapField {
    let kx = wavenumber(&grid, 0, k as f64);
    let omega = magnon_frequency(kx, theta0);
    let (s, c) = theta0.sin_cos();
    MapField::from_fn(grid, |[x, _]| {
        let phase = kx * x - omega * t;
        Vec3::new(s * phase.cos(), s * phase.sin(), c)
    })
}

pub fn magnon_frequency(k: f64, theta0: f64) -> f64 {
    k * k * theta0.cos()
}

/// Smooth tangent field along `u`, built from seeded Fourier modes with
/// wavenumbers up to `modes` per axis and scaled to unit sup-norm.
///
/// The coefficients depend only on `(seed, modes, dim)`, so the same
/// continuum field is sampled at every resolution.
pub fn band_limited_tangent(u: &MapField, modes: u32, seed: u64) -> Vec<Vec3> {
    let grid = *u.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = modes as i32;
    let mut terms: Vec<([f64; 2], Vec3, Vec3)> = Vec::new();
    let ky_range = if grid.dim() == 2 { -m..=m } else { 0..=0 };
    for kx in 0..=m {
        for ky in ky_range.clone() {
            if kx == 0 && ky < 0 {
                continue;
            }
            let weight = 1.0 / (1.0 + (kx * kx + ky * ky) as f64);
            let mut coef = || {
                Vec3::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                ) * weight
            };
            let a = coef();
            let b = coef();
            let k = [
                wavenumber(&grid, 0, kx as f64),
                if grid.dim() == 2 {
                    wavenumber(&grid, 1, ky as f64)
                } else {
                    0.0
                },
            ];
            terms.push((k, a, b));
        }
    }
    let raw: Vec<Vec3> = (0..grid.len())
        .map(|idx| {
            let [x, y] = grid.position(idx);
            let v: Vec3 = terms
                .iter()
                .map(|(k, a, b)| {
                    let ph = k[0] * x + k[1] * y;
                    a * ph.cos() + b * ph.sin()
                })
                .sum();
            u.value(idx).project(&v)
        })
        .collect();
    let sup = raw.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if sup == 0.0 {
        return raw;
    }
    raw.into_iter().map(|v| v / sup).collect()
}

/// `exp_{u(x)}(ε V(x))` with `V` from [`band_limited_tangent`]; the largest
/// pointwise displacement is exactly `ε`.
pub fn perturb(u: &MapField, eps: f64, modes: u32, seed: u64) -> MapField {
    if eps == 0.0 {
        return u.clone();
    }
    let v = band_limited_tangent(u, modes, seed);
    let values = (0..u.grid().len())
        .map(|idx| SpherePoint::from_vec(raw_exp(u.value(idx).coords(), &(v[idx] * eps))))
        .collect();
    MapField::new(*u.grid(), values).expect("same grid")
}

/// `exp_{u(x)}(ε V(x))` for an explicit tangent field `V`.
pub fn displace(u: &MapField, v: &[Vec3], eps: f64) -> MapField {
    let values = (0..u.grid().len())
        .map(|idx| {
            let t = u.value(idx).project(&v[idx]);
            SpherePoint::from_vec(raw_exp(u.value(idx).coords(), &(t * eps)))
        })
        .collect();
    MapField::new(*u.grid(), values).expect("same grid")
}

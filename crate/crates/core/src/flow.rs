//! Time integration of the Schrödinger map flow `∂ₜu = J(u)τ(u)`.
//!
//! On S² with `J(p)v = p × v` the right-hand side is `u × Π(Δ_h u) = u × Δ_h u`
//! (the cross product kills the normal part), i.e. the Landau–Lifshitz
//! equation without damping.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fields::{
    ambient_laplacian, covariant_gradient, covariant_laplacian, dirichlet_energy, tension, Grid,
    MapField, TangentField,
};
use crate::sphere::{raw_transport, SphereGeometry, Vec3};

/// Fixed-point iteration cap for the implicit midpoint rule.
pub const MIDPOINT_MAX_ITERATIONS: usize = 50;
pub const MIDPOINT_TOLERANCE: f64 = 1e-12;
/// Default CFL factor: `dt ≤ cfl_guard · h²`.
pub const DEFAULT_CFL_GUARD: f64 = 0.25;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("time step {dt} violates CFL guard dt ≤ {limit} (= {guard}·h²)")]
    Cfl { dt: f64, limit: f64, guard: f64 },
    #[error(
        "implicit midpoint did not converge in {iterations} iterations (residual {residual:e})"
    )]
    Convergence { iterations: usize, residual: f64 },
    #[error("time step must be positive and finite, got {0}")]
    BadTimeStep(f64),
    #[error("final time must be non-negative and finite, got {0}")]
    BadFinalTime(f64),
    #[error("need stored states at t − Δ, t, t + Δ around t = {t}")]
    InsufficientHistory { t: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Classical RK4 followed by pointwise renormalization.
    Rk4Project,
    /// Implicit midpoint, solved by fixed-point iteration; preserves |u| and
    /// the discrete energy exactly.
    ImplicitMidpoint,
}

impl std::str::FromStr for Scheme {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "rk4_project" => Ok(Scheme::Rk4Project),
            "implicit_midpoint" => Ok(Scheme::ImplicitMidpoint),
            other => Err(format!(
                "unknown scheme {other:?} (expected rk4_project or implicit_midpoint)"
            )),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::Rk4Project => "rk4_project",
            Scheme::ImplicitMidpoint => "implicit_midpoint",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub scheme: Scheme,
    pub cfl_guard: f64,
}

impl IntegratorConfig {
    /// Validates `dt` and, for the explicit scheme, the CFL guard on `grid`.
    pub fn new(dt: f64, scheme: Scheme, grid: &Grid) -> Result<Self, FlowError> {
        let cfg = IntegratorConfig {
            dt,
            scheme,
            cfl_guard: DEFAULT_CFL_GUARD,
        };
        cfg.validate(grid)?;
        Ok(cfg)
    }

    /// `dt = h²/8` with RK4.
    pub fn default_for(grid: &Grid) -> Self {
        let h = grid.min_spacing();
        IntegratorConfig {
            dt: h * h / 8.0,
            scheme: Scheme::Rk4Project,
            cfl_guard: DEFAULT_CFL_GUARD,
        }
    }

    pub fn validate(&self, grid: &Grid) -> Result<(), FlowError> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(FlowError::BadTimeStep(self.dt));
        }
        check_cfl(self.dt, self.scheme, self.cfl_guard, grid)
    }
}

fn check_cfl(dt: f64, scheme: Scheme, guard: f64, grid: &Grid) -> Result<(), FlowError> {
    if scheme != Scheme::Rk4Project {
        return Ok(());
    }
    let h = grid.min_spacing();
    let limit = guard * h * h;
    if dt.abs() > limit * (1.0 + 1e-12) {
        return Err(FlowError::Cfl { dt, limit, guard });
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowState {
    pub time: f64,
    pub u: MapField,
}

/// `J(u)τ(u) = u × Δ_h u` at every node.
pub fn rhs(u: &MapField) -> Vec<Vec3> {
    let lap = ambient_laplacian(u);
    u.values()
        .iter()
        .zip(&lap)
        .map(|(p, l)| p.coords().cross(l))
        .collect()
}

fn rhs_vecs(grid: &Grid, v: &[Vec3]) -> Vec<Vec3> {
    (0..grid.len())
        .map(|idx| {
            let centre = v[idx];
            let lap: Vec3 = (0..grid.dim())
                .map(|axis| {
                    let h = grid.spacing(axis);
                    let f = v[grid.neighbor(idx, axis, 1)];
                    let b = v[grid.neighbor(idx, axis, -1)];
                    (f - centre * 2.0 + b) / (h * h)
                })
                .sum();
            centre.cross(&lap)
        })
        .collect()
}

fn axpy(x: &[Vec3], a: f64, y: &[Vec3]) -> Vec<Vec3> {
    x.iter().zip(y).map(|(xi, yi)| xi + yi * a).collect()
}

/// Advances `u` by a signed time step `dt` without any CFL validation.
pub fn advance(u: &MapField, scheme: Scheme, dt: f64) -> Result<MapField, FlowError> {
    let grid = *u.grid();
    let u0 = u.to_vecs();
    let next = match scheme {
        Scheme::Rk4Project => {
            let k1 = rhs_vecs(&grid, &u0);
            let k2 = rhs_vecs(&grid, &axpy(&u0, 0.5 * dt, &k1));
            let k3 = rhs_vecs(&grid, &axpy(&u0, 0.5 * dt, &k2));
            let k4 = rhs_vecs(&grid, &axpy(&u0, dt, &k3));
            (0..grid.len())
                .map(|i| u0[i] + (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (dt / 6.0))
                .collect()
        }
        Scheme::ImplicitMidpoint => {
            let mut v = u0.clone();
            let mut residual = f64::INFINITY;
            let mut converged = false;
            for _ in 0..MIDPOINT_MAX_ITERATIONS {
                let mid: Vec<Vec3> = u0.iter().zip(&v).map(|(a, b)| (a + b) * 0.5).collect();
                let f = rhs_vecs(&grid, &mid);
                let new = axpy(&u0, dt, &f);
                residual = new
                    .iter()
                    .zip(&v)
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max);
                v = new;
                if !residual.is_finite() {
                    break;
                }
                if residual <= MIDPOINT_TOLERANCE {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(FlowError::Convergence {
                    iterations: MIDPOINT_MAX_ITERATIONS,
                    residual,
                });
            }
            v
        }
    };
    Ok(MapField::from_vecs(grid, next))
}

/// One step of size `cfg.dt`.
pub fn step(s: &FlowState, cfg: &IntegratorConfig) -> Result<FlowState, FlowError> {
    cfg.validate(s.u.grid())?;
    Ok(FlowState {
        time: s.time + cfg.dt,
        u: advance(&s.u, cfg.scheme, cfg.dt)?,
    })
}

/// Scalar observables of one state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub t: f64,
    pub energy: f64,
    pub norm_drift: f64,
    pub spin: [f64; 3],
}

impl Observation {
    pub fn of(state: &FlowState) -> Self {
        let s = total_spin(&state.u);
        Observation {
            t: state.time,
            energy: dirichlet_energy(&state.u),
            norm_drift: state.u.max_norm_defect(),
            spin: [s.x, s.y, s.z],
        }
    }

    pub const CSV_HEADER: &'static str = "t,energy,norm_drift,spin_x,spin_y,spin_z";

    pub fn csv_row(&self) -> String {
        format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            self.t, self.energy, self.norm_drift, self.spin[0], self.spin[1], self.spin[2]
        )
    }
}

/// `Σ_x u(x) h^m`.
pub fn total_spin(u: &MapField) -> Vec3 {
    let sum: Vec3 = u.values().iter().map(|p| *p.coords()).sum();
    sum * u.grid().cell_volume()
}

/// Number of steps and the step actually used to land exactly on `t_final`.
pub fn step_plan(t_final: f64, dt: f64) -> (usize, f64) {
    if t_final == 0.0 {
        return (0, dt);
    }
    let n = (t_final / dt - 1e-9).ceil().max(1.0) as usize;
    (n, t_final / n as f64)
}

/// Evolves `u0` to `t_final`, calling `observer` on the initial state, every
/// `stride` steps, and on the final state.
///
/// The step is shrunk to `t_final / ceil(t_final / dt)` so the run lands on
/// `t_final`; the result is fully determined by `(u0, cfg, t_final)`.
pub fn evolve<F: FnMut(&FlowState)>(
    u0: &MapField,
    t_final: f64,
    cfg: &IntegratorConfig,
    stride: usize,
    mut observer: F,
) -> Result<FlowState, FlowError> {
    evolve_indexed(u0, t_final, cfg, stride, |_, s| observer(s))
}

fn evolve_indexed<F: FnMut(usize, &FlowState)>(
    u0: &MapField,
    t_final: f64,
    cfg: &IntegratorConfig,
    stride: usize,
    mut observer: F,
) -> Result<FlowState, FlowError> {
    if !(t_final.is_finite() && t_final >= 0.0) {
        return Err(FlowError::BadFinalTime(t_final));
    }
    cfg.validate(u0.grid())?;
    let stride = stride.max(1);
    let (n_steps, dt) = step_plan(t_final, cfg.dt);
    let mut state = FlowState {
        time: 0.0,
        u: u0.clone(),
    };
    observer(0, &state);
    for k in 1..=n_steps {
        state = FlowState {
            time: if k == n_steps { t_final } else { k as f64 * dt },
            u: advance(&state.u, cfg.scheme, dt)?,
        };
        if k % stride == 0 || k == n_steps {
            observer(k, &state);
        }
    }
    Ok(state)
}

/// States stored at a fixed stride.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub states: Vec<FlowState>,
}

impl Trajectory {
    /// Records the initial state and every `stride`-th step up to `t_final`.
    /// A final state off the stride is not stored, so spacing stays uniform.
    pub fn record(
        u0: &MapField,
        t_final: f64,
        cfg: &IntegratorConfig,
        stride: usize,
    ) -> Result<Self, FlowError> {
        let stride = stride.max(1);
        let mut states = Vec::new();
        evolve_indexed(u0, t_final, cfg, stride, |k, s| {
            if k % stride == 0 {
                states.push(s.clone());
            }
        })?;
        Ok(Trajectory { states })
    }

    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.time).collect()
    }

    /// Index `k` of the stored state nearest `t` such that `k − 1` and `k + 1`
    /// exist.
    pub fn bracket(&self, t: f64) -> Result<usize, FlowError> {
        let k = self
            .states
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1.time - t).abs().total_cmp(&(b.1.time - t).abs()))
            .map(|(k, _)| k)
            .ok_or(FlowError::InsufficientHistory { t })?;
        if k == 0 || k + 1 >= self.states.len() {
            return Err(FlowError::InsufficientHistory { t });
        }
        Ok(k)
    }
}

/// `J(u)(Δ_xφ_i + Σ_k R(φ_i, φ_k)φ_k)` for `φ = ∇u`, one slot per direction.
pub fn derivative_flow_rhs(u: &MapField, geometry: &SphereGeometry) -> TangentField {
    let phi = covariant_gradient(u);
    let lap = covariant_laplacian(&phi);
    let dim = u.grid().dim();
    lap.map_slots(|slot, idx, lap_v| {
        let mut total = *lap_v;
        let pi = phi.component(slot)[idx];
        for k in 0..dim {
            let pk = phi.component(k)[idx];
            total += geometry.raw_curvature(&pi, &pk, &pk);
        }
        u.value(idx).coords().cross(&total)
    })
}

/// L² norm of `∇ₜ∇_iu − J(Δ_x∇_iu + R(∇_iu, ∇_ku)∇_ku)` at the stored state
/// nearest `t`.
///
/// `∇ₜ` is the centred difference of the neighbouring stored gradients, each
/// transported to `u(t, x)` along the short great circle.
pub fn derivative_flow_residual(
    traj: &Trajectory,
    t: f64,
    geometry: &SphereGeometry,
) -> Result<f64, FlowError> {
    let k = traj.bracket(t)?;
    let (prev, cur, next) = (&traj.states[k - 1], &traj.states[k], &traj.states[k + 1]);
    let dt = 0.5 * (next.time - prev.time);
    let phi_prev = covariant_gradient(&prev.u);
    let phi_next = covariant_gradient(&next.u);
    let target = derivative_flow_rhs(&cur.u, geometry);
    let grid = cur.u.grid();
    let mut sum = 0.0;
    for slot in 0..grid.dim() {
        for idx in 0..grid.len() {
            let at = cur.u.value(idx).coords();
            let fwd = raw_transport(
                at,
                next.u.value(idx).coords(),
                &phi_next.component(slot)[idx],
            );
            let bwd = raw_transport(
                at,
                prev.u.value(idx).coords(),
                &phi_prev.component(slot)[idx],
            );
            let dphi = (fwd - bwd) / (2.0 * dt);
            sum += (dphi - target.component(slot)[idx]).norm_squared();
        }
    }
    Ok((sum * grid.cell_volume()).sqrt())
}

/// `J(u)τ(u)` as a tangent field; equal to [`rhs`] node by node.
pub fn rhs_via_tension(u: &MapField) -> Vec<Vec3> {
    let tau = tension(u);
    tau.component(0)
        .iter()
        .enumerate()
        .map(|(idx, v)| u.value(idx).coords().cross(v))
        .collect()
}

use serde::{Deserialize, Serialize};

use super::{
    build_homotopy, closeness_guard, connection_check, jacobi_estimate_check, laplacian_difference,
    q1, q1_inequality_factor, q1_rate_rhs, q2, q2_frame, DiagnosticsError, DiagnosticsReport,
    NodeChecks,
};
use crate::fields::{covariant_gradient, Grid, MapField};
use crate::flow::{advance, step_plan, IntegratorConfig};
use crate::initial::{perturb, InitialCondition};
use crate::lemmas::{fit_curvature_constant, fit_hessian_constant, sample_pair_pairs};
use crate::sphere::{GeometryConstants, SphereGeometry};

/// Seed of the samples used to fit the pointwise Hessian constant.
pub const HESSIAN_FIT_SEED: u64 = 0x5eed_0001;

/// Everything a comparison run depends on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareConfig {
    pub grid: Grid,
    pub initial: InitialCondition,
    /// Pointwise geodesic displacement of the second initial map.
    pub eps: f64,
    /// Fourier modes per axis of the perturbation direction.
    pub modes: u32,
    pub seed: u64,
    pub integrator: IntegratorConfig,
    pub t_final: f64,
    /// Sample every `stride` steps.
    pub stride: usize,
    pub s_samples: usize,
    /// Random samples for the Hessian constant.
    pub hessian_samples: usize,
}

impl CompareConfig {
    pub fn validate(&self) -> Result<(), DiagnosticsError> {
        let delta0 = GeometryConstants::unit_sphere().delta0;
        if !(self.eps >= 0.0 && self.eps < delta0) {
            return Err(DiagnosticsError::Closeness {
                node: 0,
                distance: self.eps,
                delta0,
            });
        }
        if self.s_samples < 3 || self.s_samples.is_multiple_of(2) {
            return Err(DiagnosticsError::BadSamples(self.s_samples));
        }
        self.integrator.validate(&self.grid)?;
        Ok(())
    }
}

/// Where the pair left the closeness radius.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Escape {
    pub t: f64,
    pub distance: f64,
}

#[derive(Clone, Debug)]
pub struct CompareOutcome {
    pub report: DiagnosticsReport,
    pub initial: (MapField, MapField),
    /// The last pair of states inside the closeness radius.
    pub last: (MapField, MapField),
    pub escape: Option<Escape>,
}

/// Evolves `u₁ = initial` and `u₂ = exp_{u₁}(εV)` side by side and records
/// `Q₁`, `Q₂` and the `Q₁` rate identity at every `stride`-th step.
pub fn run_compare(cfg: &CompareConfig) -> Result<CompareOutcome, DiagnosticsError> {
    cfg.validate()?;
    let geometry = SphereGeometry::default();
    let delta0 = GeometryConstants::unit_sphere().delta0;
    let u1_0 = cfg.initial.build(cfg.grid);
    let u2_0 = perturb(&u1_0, cfg.eps, cfg.modes, cfg.seed);
    let hessian_c = fit_hessian_constant(
        &geometry,
        &sample_pair_pairs(cfg.hessian_samples, HESSIAN_FIT_SEED, delta0),
    )?;

    let stride = cfg.stride.max(1);
    let (n_steps, dt) = step_plan(cfg.t_final, cfg.integrator.dt);
    let (mut u1, mut u2) = (u1_0.clone(), u2_0.clone());
    let mut samples = Vec::new();
    let mut factor: f64 = 0.0;
    let mut escape = None;
    let mut t = 0.0;
    for k in 0..=n_steps {
        if k > 0 {
            u1 = advance(&u1, cfg.integrator.scheme, dt)?;
            u2 = advance(&u2, cfg.integrator.scheme, dt)?;
            t = if k == n_steps {
                cfg.t_final
            } else {
                k as f64 * dt
            };
        }
        if k % stride != 0 && k != n_steps {
            continue;
        }
        let d = closeness_guard(&u1, &u2)?;
        if d >= delta0 {
            escape = Some(Escape { t, distance: d });
            break;
        }
        let h = build_homotopy(&u1, &u2, cfg.s_samples)?;
        samples.push((t, q1(&u1, &u2)?, q2(&h)?, q1_rate_rhs(&u1, &u2, &geometry)?));
        factor = factor.max(q1_inequality_factor(&u1, &u2)?);
        if escape.is_none() && k == n_steps {
            break;
        }
    }
    // on escape the loop stopped before updating the last valid pair
    let (last1, last2) = if escape.is_some() {
        replay_last(
            cfg,
            &u1_0,
            &u2_0,
            samples.last().map(|s| s.0).unwrap_or(0.0),
        )?
    } else {
        (u1, u2)
    };
    let checks = node_checks(
        &last1,
        &last2,
        cfg.s_samples,
        samples.last().map(|s| s.0).unwrap_or(0.0),
    )?;
    let report = DiagnosticsReport::assemble(&samples, hessian_c, hessian_c * factor, Some(checks));
    Ok(CompareOutcome {
        report,
        initial: (u1_0, u2_0),
        last: (last1, last2),
        escape,
    })
}

fn replay_last(
    cfg: &CompareConfig,
    u1: &MapField,
    u2: &MapField,
    t_last: f64,
) -> Result<(MapField, MapField), DiagnosticsError> {
    let (n_steps, dt) = step_plan(cfg.t_final, cfg.integrator.dt);
    let (mut a, mut b) = (u1.clone(), u2.clone());
    for k in 1..=n_steps {
        if k as f64 * dt > t_last + 0.5 * dt {
            break;
        }
        a = advance(&a, cfg.integrator.scheme, dt)?;
        b = advance(&b, cfg.integrator.scheme, dt)?;
    }
    Ok((a, b))
}

fn node_checks(
    u1: &MapField,
    u2: &MapField,
    s_samples: usize,
    t: f64,
) -> Result<NodeChecks, DiagnosticsError> {
    let geometry = SphereGeometry::default();
    let h = build_homotopy(u1, u2, s_samples)?;
    let k = fit_curvature_constant(&geometry, 1000, HESSIAN_FIT_SEED);
    let conn = connection_check(&h, &geometry, k);
    let lap = laplacian_difference(&h, &covariant_gradient(u2), &geometry)?.discrepancy();
    let jac = jacobi_estimate_check(&h);
    let frame_defect = (q2(&h)? - q2_frame(&h)?).abs();
    Ok(NodeChecks::new(t, conn, lap, jac, frame_defect))
}

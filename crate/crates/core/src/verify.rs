//! Named numerical checks of the geometry lemmas and the diagnostics
//! identities, grouped into suites.
//!
//! Every check reports a measured value, the bound it is held to and whether
//! it passed. With `flip_curvature` the curvature tensor changes sign while
//! the closed-form geometry does not, and the curvature-sensitive checks are
//! expected to fail.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{
    build_homotopy, connection_check, connection_difference, jacobi_estimate_check,
    laplacian_difference, DiagnosticsError, DEFAULT_S_SAMPLES,
};
use crate::fields::{covariant_gradient, Grid, MapField};
use crate::flow::{derivative_flow_residual, IntegratorConfig, Trajectory};
use crate::initial::{magnon, perturb, winding, InitialCondition};
use crate::lemmas::{
    fit_curvature_constant, fit_distance_constant, fit_hessian_constant, gradient_fd_error,
    hessian_fd_error, hessian_violations, holonomy_angle, jacobi_oracle_error, random_base_pair,
    random_tangent, refine_distance_constant, sample_nearby_pairs, sample_pair_pairs, sample_pairs,
    PSEUDO_DIST_QUAD,
};
use crate::sphere::{
    pseudo_dist_jacobi, pseudo_dist_transport, Geodesic, GeometryConstants, JacobiBvp,
    SphereGeometry, SpherePoint, SphereTangent,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    /// Closed-form Jacobi fields and transport.
    Geometry,
    /// Equivalence of the two pseudo-distances.
    Distance,
    /// Gradient and Hessian of `½d²`.
    Hessian,
    /// Jacobi-field bounds along a homotopy.
    Homotopy,
    Connection,
    Laplacian,
    /// Evolution equation of `∇u` in frame-free form.
    Frame,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Geometry,
        Suite::Distance,
        Suite::Hessian,
        Suite::Homotopy,
        Suite::Connection,
        Suite::Laplacian,
        Suite::Frame,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Geometry => "geometry",
            Suite::Distance => "distance",
            Suite::Hessian => "hessian",
            Suite::Homotopy => "homotopy",
            Suite::Connection => "connection",
            Suite::Laplacian => "laplacian",
            Suite::Frame => "frame",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Suite::ALL.iter().map(|s| s.name()).collect();
                format!("unknown suite {s:?} (expected one of {})", names.join(", "))
            })
    }
}

/// How a measured value is compared with its bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    AtMost,
    AtLeast,
}

impl Relation {
    fn holds(self, value: f64, bound: f64) -> bool {
        match self {
            Relation::AtMost => value <= bound,
            Relation::AtLeast => value >= bound,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub suite: Suite,
    pub value: f64,
    pub relation: Relation,
    pub bound: f64,
    pub pass: bool,
}

impl CheckResult {
    fn new(suite: Suite, name: &str, value: f64, relation: Relation, bound: f64) -> Self {
        CheckResult {
            name: name.to_string(),
            suite,
            value,
            relation,
            bound,
            // NaN fails either way
            pass: relation.holds(value, bound),
        }
    }

    /// `name  value <= bound  PASS`.
    pub fn line(&self) -> String {
        format!(
            "{:<32} {:>12.4e} {} {:<10.4e} {}",
            self.name,
            self.value,
            self.relation.symbol(),
            self.bound,
            if self.pass { "PASS" } else { "FAIL" }
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    /// Suites to run; empty means all.
    pub suites: Vec<Suite>,
    pub seed: u64,
    /// Random samples for the pointwise lemma checks.
    pub samples: usize,
    pub flip_curvature: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            suites: Vec::new(),
            seed: 1,
            samples: 10_000,
            flip_curvature: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub options: VerifyOptions,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub fn run_verify(opts: &VerifyOptions) -> Result<VerifyReport, DiagnosticsError> {
    let geometry = SphereGeometry::with_flip(opts.flip_curvature);
    let selected = |s: Suite| opts.suites.is_empty() || opts.suites.contains(&s);
    let mut checks = Vec::new();
    for suite in Suite::ALL.into_iter().filter(|&s| selected(s)) {
        let found = match suite {
            Suite::Geometry => geometry_checks(&geometry, opts)?,
            Suite::Distance => distance_checks(opts)?,
            Suite::Hessian => hessian_checks(&geometry, opts)?,
            Suite::Homotopy => homotopy_checks()?,
            Suite::Connection => connection_checks(&geometry)?,
            Suite::Laplacian => laplacian_checks(&geometry)?,
            Suite::Frame => frame_checks(&geometry)?,
        };
        checks.extend(found);
    }
    Ok(VerifyReport {
        options: opts.clone(),
        checks,
    })
}

fn delta0() -> f64 {
    GeometryConstants::unit_sphere().delta0
}

fn order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

fn geometry_checks(
    geometry: &SphereGeometry,
    opts: &VerifyOptions,
) -> Result<Vec<CheckResult>, DiagnosticsError> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(opts.seed);
    let mut residual: f64 = 0.0;
    for _ in 0..200 {
        let (p, q) = random_base_pair(&mut rng, 2.0 * delta0());
        let g = Geodesic::between(&p, &q)?;
        if g.is_degenerate() {
            continue;
        }
        let w = JacobiBvp::solve(
            &g,
            &random_tangent(&mut rng, &p, 1.0),
            &random_tangent(&mut rng, &q, 1.0),
        )?;
        residual = residual.max(geometry.jacobi_residual(&w, 1e-3));
    }
    let shooting = jacobi_oracle_error(geometry, 100, opts.seed, 2.0 * delta0());
    let octant = [
        SpherePoint::new(0.0, 0.0, 1.0),
        SpherePoint::new(1.0, 0.0, 0.0),
        SpherePoint::new(0.0, 1.0, 0.0),
    ];
    let holonomy = (holonomy_angle(&octant).abs() - FRAC_PI_2).abs();
    Ok(vec![
        CheckResult::new(
            Suite::Geometry,
            "jacobi_residual",
            residual,
            Relation::AtMost,
            1e-5,
        ),
        CheckResult::new(
            Suite::Geometry,
            "jacobi_shooting_oracle",
            shooting,
            Relation::AtMost,
            1e-8,
        ),
        CheckResult::new(
            Suite::Geometry,
            "holonomy_octant",
            holonomy,
            Relation::AtMost,
            1e-12,
        ),
    ])
}

fn distance_checks(opts: &VerifyOptions) -> Result<Vec<CheckResult>, DiagnosticsError> {
    let n = opts.samples;
    let c1 = refine_distance_constant(
        &sample_nearby_pairs(n, opts.seed, delta0()),
        delta0(),
        opts.seed,
    )?;
    let c2 = refine_distance_constant(
        &sample_nearby_pairs(2 * n, opts.seed + 1, delta0()),
        delta0(),
        opts.seed,
    )?;
    let spread = (c2 - c1).abs() / c1.max(c2);
    let generic = fit_distance_constant(&sample_pairs(n, opts.seed + 2, delta0()))?;
    let mut coincident: f64 = 0.0;
    for pair in sample_pairs(n.min(1000), opts.seed + 3, delta0()) {
        let x2 = SphereTangent::new(
            *pair.first.base(),
            pair.first.base().project(pair.second.vec()),
        );
        let a = pseudo_dist_transport(&pair.first, &x2)?;
        let b = pseudo_dist_jacobi(&pair.first, &x2, PSEUDO_DIST_QUAD)?;
        coincident = coincident.max((a - b).abs());
    }
    Ok(vec![
        CheckResult::new(
            Suite::Distance,
            "distance_constant_stability",
            spread,
            Relation::AtMost,
            0.1,
        ),
        CheckResult::new(
            Suite::Distance,
            "distance_generic_within_fit",
            generic,
            Relation::AtMost,
            c1.max(c2),
        ),
        CheckResult::new(
            Suite::Distance,
            "distance_coincident_equality",
            coincident,
            Relation::AtMost,
            0.0,
        ),
    ])
}

fn hessian_checks(
    geometry: &SphereGeometry,
    opts: &VerifyOptions,
) -> Result<Vec<CheckResult>, DiagnosticsError> {
    let pairs = sample_pairs(opts.samples / 5, opts.seed + 4, delta0());
    let worst_grad = |tau: f64| -> Result<f64, DiagnosticsError> {
        let mut w: f64 = 0.0;
        for p in &pairs {
            w = w.max(gradient_fd_error(p, tau)?);
        }
        Ok(w)
    };
    let grad_order = order(worst_grad(1e-2)?, worst_grad(5e-3)?);
    let quads = sample_pair_pairs(opts.samples / 10, opts.seed + 5, delta0());
    let worst_hess = |tau: f64| -> Result<f64, DiagnosticsError> {
        let mut w: f64 = 0.0;
        for (x, y) in &quads {
            w = w.max(hessian_fd_error(geometry, x, y, tau)?);
        }
        Ok(w)
    };
    let hess_order = order(worst_hess(1e-2)?, worst_hess(5e-3)?);
    let c = fit_hessian_constant(
        geometry,
        &sample_pair_pairs(opts.samples, opts.seed + 6, delta0()),
    )?;
    let fresh = sample_pair_pairs(opts.samples, opts.seed + 7, delta0());
    let violations = hessian_violations(geometry, &fresh, 1.1 * c)?;
    Ok(vec![
        CheckResult::new(
            Suite::Hessian,
            "gradient_fd_order",
            grad_order,
            Relation::AtLeast,
            1.9,
        ),
        CheckResult::new(
            Suite::Hessian,
            "hessian_fd_order",
            hess_order,
            Relation::AtLeast,
            1.9,
        ),
        CheckResult::new(
            Suite::Hessian,
            "hessian_bound_violations",
            violations as f64,
            Relation::AtMost,
            0.0,
        ),
    ])
}

/// `u₁ = winding`, `u₂` its perturbation by `eps`.
fn winding_pair(n: usize, eps: f64) -> (MapField, MapField) {
    let u1 = winding(Grid::circle(n).expect("n ≥ 3"), 1);
    let u2 = perturb(&u1, eps, 2, 3);
    (u1, u2)
}

fn homotopy_checks() -> Result<Vec<CheckResult>, DiagnosticsError> {
    let g = Grid::circle(64)?;
    let mut worst: f64 = 0.0;
    for seed in 0..4 {
        let u1 = InitialCondition::SmoothRandom {
            amplitude: 0.8,
            modes: 2,
            seed,
        }
        .build(g);
        let u2 = perturb(&u1, 0.24, 3, 100 + seed);
        worst = worst
            .max(jacobi_estimate_check(&build_homotopy(&u1, &u2, DEFAULT_S_SAMPLES)?).first_order);
    }
    let (u1, u2) = winding_pair(128, 1e-2);
    worst =
        worst.max(jacobi_estimate_check(&build_homotopy(&u1, &u2, DEFAULT_S_SAMPLES)?).first_order);
    Ok(vec![CheckResult::new(
        Suite::Homotopy,
        "jacobi_first_order_ratio",
        worst,
        Relation::AtMost,
        1.2,
    )])
}

fn connection_checks(geometry: &SphereGeometry) -> Result<Vec<CheckResult>, DiagnosticsError> {
    let k = fit_curvature_constant(geometry, 1000, 1);
    let mut violations = 0;
    let mut norms = Vec::new();
    for eps in [1e-2, 1e-3, 1e-4] {
        let (u1, u2) = winding_pair(128, eps);
        let h = build_homotopy(&u1, &u2, DEFAULT_S_SAMPLES)?;
        violations += connection_check(&h, geometry, k).violations();
        norms.push(connection_difference(&h, geometry).max_operator_norm());
    }
    let eps_order = (norms[0] / norms[2]).log10() / 2.0;

    let u1 = InitialCondition::SmoothRandom {
        amplitude: 0.8,
        modes: 2,
        seed: 10,
    }
    .build(Grid::circle(48)?);
    let u2 = perturb(&u1, 0.2, 2, 11);
    let b: Vec<_> = [5, 9, 17]
        .iter()
        .map(|&s| build_homotopy(&u1, &u2, s).map(|h| connection_difference(&h, geometry)))
        .collect::<Result<_, _>>()?;
    let simpson_order = order(b[0].max_difference(&b[1]), b[1].max_difference(&b[2]));
    Ok(vec![
        CheckResult::new(
            Suite::Connection,
            "connection_bound_violations",
            violations as f64,
            Relation::AtMost,
            0.0,
        ),
        CheckResult::new(
            Suite::Connection,
            "connection_eps_order_defect",
            (eps_order - 1.0).abs(),
            Relation::AtMost,
            0.1,
        ),
        CheckResult::new(
            Suite::Connection,
            "connection_simpson_order",
            simpson_order,
            Relation::AtLeast,
            3.5,
        ),
    ])
}

fn laplacian_checks(geometry: &SphereGeometry) -> Result<Vec<CheckResult>, DiagnosticsError> {
    let discrepancy = |n: usize| -> Result<f64, DiagnosticsError> {
        let (u1, u2) = winding_pair(n, 1e-3);
        let h = build_homotopy(&u1, &u2, DEFAULT_S_SAMPLES)?;
        Ok(laplacian_difference(&h, &covariant_gradient(&u2), geometry)?.discrepancy())
    };
    let o = order(discrepancy(64)?, discrepancy(128)?);
    Ok(vec![CheckResult::new(
        Suite::Laplacian,
        "laplacian_difference_order",
        o,
        Relation::AtLeast,
        0.9,
    )])
}

fn frame_checks(geometry: &SphereGeometry) -> Result<Vec<CheckResult>, DiagnosticsError> {
    let residual = |n: usize| -> Result<f64, DiagnosticsError> {
        let g = Grid::circle(n)?;
        let cfg = IntegratorConfig::default_for(&g);
        let traj = Trajectory::record(&magnon(g, 1, FRAC_PI_3, 0.0), 0.1, &cfg, 4)?;
        Ok(derivative_flow_residual(&traj, 0.05, geometry)?)
    };
    let o = order(residual(64)?, residual(128)?);
    let g = Grid::circle(16)?;
    let cfg = IntegratorConfig::default_for(&g);
    let constant = Trajectory::record(&MapField::constant(g, SpherePoint::north()), 0.1, &cfg, 1)?;
    let zero = derivative_flow_residual(&constant, 0.05, geometry)?;
    Ok(vec![
        CheckResult::new(
            Suite::Frame,
            "frame_residual_order",
            o,
            Relation::AtLeast,
            1.9,
        ),
        CheckResult::new(
            Suite::Frame,
            "frame_residual_constant_map",
            zero,
            Relation::AtMost,
            0.0,
        ),
    ])
}

//! End-to-end acceptance criteria. Each criterion prints one PASS/FAIL line;
//! the test fails if any criterion fails.

use std::f64::consts::FRAC_PI_3;

use smflow::diagnostics::{
    build_homotopy, connection_check, connection_difference, jacobi_estimate_check,
    laplacian_difference, q1_rate_check, run_compare, CompareConfig, CompareOutcome,
    DEFAULT_S_SAMPLES,
};
use smflow::fields::{covariant_gradient, dirichlet_energy, Grid, MapField};
use smflow::flow::{derivative_flow_residual, evolve, total_spin, IntegratorConfig, Trajectory};
use smflow::initial::{magnon, perturb, winding, InitialCondition};
use smflow::lemmas::{
    fit_curvature_constant, fit_distance_constant, fit_hessian_constant, gradient_fd_error,
    hessian_violations, refine_distance_constant, sample_nearby_pairs, sample_pair_pairs,
    sample_pairs, PSEUDO_DIST_QUAD,
};
use smflow::sphere::{
    pseudo_dist_jacobi, pseudo_dist_transport, SphereGeometry, SpherePoint, SphereTangent,
};
use smflow::verify::{run_verify, Suite, VerifyOptions};

const THETA0: f64 = FRAC_PI_3;
const DELTA0: f64 = 0.25;

struct Criterion {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn record(out: &mut Vec<Criterion>, id: u32, name: &'static str, pass: bool, detail: String) {
    println!(
        "criterion {id:>2} {name:<28} {} {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    out.push(Criterion {
        id,
        name,
        pass,
        detail,
    });
}

struct MagnonRun {
    error: f64,
    max_norm_defect: f64,
    energy_drift: f64,
    spin_drift: f64,
}

fn magnon_run(n: usize) -> MagnonRun {
    let g = Grid::circle(n).unwrap();
    let cfg = IntegratorConfig::default_for(&g);
    let u0 = magnon(g, 1, THETA0, 0.0);
    let (e0, s0) = (dirichlet_energy(&u0), total_spin(&u0));
    let mut max_norm_defect: f64 = 0.0;
    let mut energy_drift: f64 = 0.0;
    let mut spin_drift: f64 = 0.0;
    let fin = evolve(&u0, 1.0, &cfg, 1, |s| {
        max_norm_defect = max_norm_defect.max(s.u.max_norm_defect());
        energy_drift = energy_drift.max((dirichlet_energy(&s.u) - e0).abs() / e0);
        spin_drift = spin_drift.max((total_spin(&s.u) - s0).amax());
    })
    .unwrap();
    let exact = magnon(g, 1, THETA0, 1.0);
    let error = fin
        .u
        .values()
        .iter()
        .zip(exact.values())
        .map(|(p, q)| (p.coords() - q.coords()).norm())
        .fold(0.0, f64::max);
    MagnonRun {
        error,
        max_norm_defect,
        energy_drift,
        spin_drift,
    }
}

fn compare_config(n: usize, eps: f64) -> CompareConfig {
    let grid = Grid::circle(n).unwrap();
    CompareConfig {
        grid,
        initial: InitialCondition::Magnon {
            k: 1,
            theta0: THETA0,
        },
        eps,
        modes: 2,
        seed: 7,
        integrator: IntegratorConfig::default_for(&grid),
        t_final: 1.0,
        stride: 64,
        s_samples: DEFAULT_S_SAMPLES,
        hessian_samples: 10_000,
    }
}

fn winding_pair(n: usize, eps: f64) -> (MapField, MapField) {
    let u1 = winding(Grid::circle(n).unwrap(), 1);
    let u2 = perturb(&u1, eps, 2, 3);
    (u1, u2)
}

fn q1_rate_consistency(n: usize) -> (f64, f64) {
    let g = Grid::circle(n).unwrap();
    let cfg = IntegratorConfig::default_for(&g);
    let u1 = magnon(g, 1, THETA0, 0.0);
    let u2 = perturb(&u1, 1e-3, 2, 7);
    let stride = 4;
    let t = 4.0 * stride as f64 * cfg.dt;
    let a = Trajectory::record(&u1, t, &cfg, stride).unwrap();
    let b = Trajectory::record(&u2, t, &cfg, stride).unwrap();
    let r = q1_rate_check(&a, &b, 0.5 * t, 0.0, &SphereGeometry::default()).unwrap();
    (r.consistency, r.rhs.abs())
}

fn order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

#[test]
fn acceptance() {
    let mut results = Vec::new();
    let geometry = SphereGeometry::default();

    // 1, 2
    let (m128, m256) = (magnon_run(128), magnon_run(256));
    let ratio = m128.error / m256.error;
    record(
        &mut results,
        1,
        "magnon exactness",
        m128.error < 1e-2 && ratio >= 3.5,
        format!(
            "sup error {:.3e} (< 1e-2), refinement ratio {ratio:.2} (>= 3.5)",
            m128.error
        ),
    );
    record(
        &mut results,
        2,
        "conservation",
        m128.max_norm_defect < 1e-12 && m128.energy_drift < 1e-4 && m128.spin_drift < 1e-8,
        format!(
            "| |u|-1 | {:.1e} (< 1e-12), energy drift {:.2e} (< 1e-4), spin drift {:.1e} (< 1e-8)",
            m128.max_norm_defect, m128.energy_drift, m128.spin_drift
        ),
    );

    // 3
    let twin = run_compare(&compare_config(128, 0.0)).unwrap();
    let zero = twin
        .report
        .series
        .iter()
        .all(|r| r.q1 == 0.0 && r.q2 == 0.0);
    record(
        &mut results,
        3,
        "twin-run zero",
        zero && twin.last.0 == twin.last.1 && twin.escape.is_none(),
        format!(
            "{} samples, all Q1 = Q2 = 0: {zero}",
            twin.report.series.len()
        ),
    );

    // 4
    let runs: Vec<CompareOutcome> = [1e-3, 1e-4]
        .iter()
        .map(|&eps| run_compare(&compare_config(128, eps)).unwrap())
        .collect();
    let c: Vec<f64> = runs
        .iter()
        .map(|r| r.report.gronwall_c.unwrap_or(f64::NAN))
        .collect();
    let envelope: Vec<usize> = runs
        .iter()
        .map(|r| r.report.gronwall_envelope_violations.unwrap_or(usize::MAX))
        .collect();
    let agree = c[0].max(c[1]) <= 2.0 * c[0].min(c[1]);
    record(
        &mut results,
        4,
        "gronwall bound",
        agree && envelope.iter().all(|&v| v == 0) && runs.iter().all(|r| r.escape.is_none()),
        format!(
            "C_fit {:.4} / {:.4} (ratio <= 2), envelope violations {:?}",
            c[0], c[1], envelope
        ),
    );

    // 5
    let (e128, s128) = q1_rate_consistency(128);
    let (e256, _) = q1_rate_consistency(256);
    let rate_order = order(e128, e256);
    let inequality: Vec<usize> = runs
        .iter()
        .map(|r| r.report.q1_inequality_violations)
        .collect();
    record(
        &mut results,
        5,
        "Q1 rate identity",
        rate_order >= 1.9 && inequality.iter().all(|&v| v == 0),
        format!(
            "|lhs-rhs| {e128:.2e} -> {e256:.2e} (|rhs| {s128:.2e}), order {rate_order:.3} (>= 1.9), inequality violations {inequality:?}"
        ),
    );

    // 6
    let c1 = refine_distance_constant(&sample_nearby_pairs(10_000, 21, DELTA0), DELTA0, 1).unwrap();
    let c2 = refine_distance_constant(&sample_nearby_pairs(20_000, 22, DELTA0), DELTA0, 1).unwrap();
    let generic = fit_distance_constant(&sample_pairs(10_000, 24, DELTA0)).unwrap();
    let spread = (c2 - c1).abs() / c1.max(c2);
    let mut coincident_equal = true;
    for pair in sample_pairs(10_000, 23, DELTA0) {
        let p = *pair.first.base();
        let x2 = SphereTangent::new(p, p.project(pair.second.vec()));
        let a = pseudo_dist_transport(&pair.first, &x2).unwrap();
        let b = pseudo_dist_jacobi(&pair.first, &x2, PSEUDO_DIST_QUAD).unwrap();
        coincident_equal &= a == b;
    }
    record(
        &mut results,
        6,
        "distance equivalence",
        spread <= 0.1 && generic <= c1.min(c2) && coincident_equal,
        format!("C {c1:.5} -> {c2:.5} under doubling (spread {spread:.3} <= 0.1), uniform samples max {generic:.5}, coincident equality {coincident_equal}"),
    );

    // 7
    let pairs = sample_pairs(2_000, 5, DELTA0);
    let worst = |tau: f64| {
        pairs
            .iter()
            .map(|p| gradient_fd_error(p, tau).unwrap())
            .fold(0.0, f64::max)
    };
    let grad_order = order(worst(1e-2), worst(5e-3));
    let fit_set = sample_pair_pairs(10_000, 7, DELTA0);
    let ch = fit_hessian_constant(&geometry, &fit_set).unwrap();
    let in_sample = hessian_violations(&geometry, &fit_set, ch).unwrap();
    let fresh =
        hessian_violations(&geometry, &sample_pair_pairs(10_000, 8, DELTA0), 1.1 * ch).unwrap();
    record(
        &mut results,
        7,
        "gradient and hessian",
        grad_order >= 1.9 && in_sample == 0 && fresh == 0,
        format!("gradient FD order {grad_order:.3}, C_H {ch:.4}, violations {in_sample} fitted / {fresh} fresh at 1.1 C_H"),
    );

    // 9 and 10 homotopies are reused for 8
    let k = fit_curvature_constant(&geometry, 1000, 1);
    let mut bound_violations = 0;
    let mut checked = 0;
    let mut norms = Vec::new();
    let mut jacobi_ratio: f64 = 0.0;
    for eps in [1e-2, 1e-3, 1e-4] {
        let (u1, u2) = winding_pair(128, eps);
        let h = build_homotopy(&u1, &u2, DEFAULT_S_SAMPLES).unwrap();
        let check = connection_check(&h, &geometry, k);
        bound_violations += check.violations();
        checked += check.checked;
        norms.push(connection_difference(&h, &geometry).max_operator_norm());
        jacobi_ratio = jacobi_ratio.max(jacobi_estimate_check(&h).first_order);
    }
    let eps_order = (norms[0] / norms[2]).log10() / 2.0;
    let smooth = InitialCondition::SmoothRandom {
        amplitude: 0.8,
        modes: 2,
        seed: 10,
    }
    .build(Grid::circle(48).unwrap());
    let far = perturb(&smooth, 0.2, 2, 11);
    let b: Vec<_> = [5, 9, 17]
        .iter()
        .map(|&s| connection_difference(&build_homotopy(&smooth, &far, s).unwrap(), &geometry))
        .collect();
    let simpson_order = order(b[0].max_difference(&b[1]), b[1].max_difference(&b[2]));

    let mut lap = Vec::new();
    for n in [64, 128, 256] {
        let (u1, u2) = winding_pair(n, 1e-3);
        let h = build_homotopy(&u1, &u2, DEFAULT_S_SAMPLES).unwrap();
        jacobi_ratio = jacobi_ratio.max(jacobi_estimate_check(&h).first_order);
        lap.push(
            laplacian_difference(&h, &covariant_gradient(&u2), &geometry)
                .unwrap()
                .discrepancy(),
        );
    }
    for run in runs.iter().chain(std::iter::once(&twin)) {
        for (a, b) in [&run.initial, &run.last] {
            let h = build_homotopy(a, b, DEFAULT_S_SAMPLES).unwrap();
            jacobi_ratio = jacobi_ratio.max(jacobi_estimate_check(&h).first_order);
        }
    }
    jacobi_ratio = jacobi_ratio
        .max(jacobi_estimate_check(&build_homotopy(&smooth, &far, 9).unwrap()).first_order);

    // 8
    record(
        &mut results,
        8,
        "jacobi field estimate",
        jacobi_ratio <= 1.2,
        format!("max sup_s|W| / (|phi1|+|phi2|) = {jacobi_ratio:.4} (<= 1.2)"),
    );

    // 9
    record(
        &mut results,
        9,
        "connection difference",
        bound_violations == 0 && (eps_order - 1.0).abs() <= 0.1 && simpson_order >= 3.5,
        format!(
            "violations {bound_violations}/{checked}, eps order {eps_order:.4} (1 +- 0.1), Simpson order {simpson_order:.2} (>= 3.5)"
        ),
    );

    // 10
    let lap_orders = [order(lap[0], lap[1]), order(lap[1], lap[2])];
    record(
        &mut results,
        10,
        "laplacian difference",
        lap_orders.iter().all(|&o| o >= 0.9),
        format!(
            "L2 discrepancy {:.2e} {:.2e} {:.2e}, orders {:.2} {:.2} (>= 0.9)",
            lap[0], lap[1], lap[2], lap_orders[0], lap_orders[1]
        ),
    );

    // 11
    let residual = |n: usize| {
        let g = Grid::circle(n).unwrap();
        let cfg = IntegratorConfig::default_for(&g);
        let traj = Trajectory::record(&magnon(g, 1, THETA0, 0.0), 0.1, &cfg, 4).unwrap();
        derivative_flow_residual(&traj, 0.05, &geometry).unwrap()
    };
    let (r64, r128, r256) = (residual(64), residual(128), residual(256));
    let frame_orders = [order(r64, r128), order(r128, r256)];
    let mut constant_zero = true;
    for dim in [1, 2] {
        let g = Grid::cubic(dim, 16, std::f64::consts::TAU).unwrap();
        let cfg = IntegratorConfig::default_for(&g);
        let traj =
            Trajectory::record(&MapField::constant(g, SpherePoint::north()), 0.1, &cfg, 1).unwrap();
        constant_zero &= derivative_flow_residual(&traj, 0.05, &geometry).unwrap() == 0.0;
    }
    record(
        &mut results,
        11,
        "moving-frame residual",
        frame_orders.iter().all(|&o| o >= 1.9) && constant_zero,
        format!(
            "residual {r64:.2e} {r128:.2e} {r256:.2e}, orders {:.3} {:.3} (>= 1.9), constant maps exactly 0: {constant_zero}",
            frame_orders[0], frame_orders[1]
        ),
    );

    // 12
    let flipped = run_verify(&VerifyOptions {
        suites: vec![Suite::Geometry, Suite::Connection],
        flip_curvature: true,
        ..Default::default()
    })
    .unwrap();
    let jacobi_fails = !flipped.check("jacobi_residual").unwrap().pass;
    let connection_fails = !flipped.check("connection_bound_violations").unwrap().pass;
    record(
        &mut results,
        12,
        "sign-convention sentinel",
        jacobi_fails && connection_fails,
        format!(
            "with flipped curvature: jacobi residual {:.2e} fails {jacobi_fails}, connection violations {} fails {connection_fails}",
            flipped.check("jacobi_residual").unwrap().value,
            flipped.check("connection_bound_violations").unwrap().value
        ),
    );

    let failed: Vec<String> = results
        .iter()
        .filter(|c| !c.pass)
        .map(|c| format!("{} {}: {}", c.id, c.name, c.detail))
        .collect();
    println!(
        "{} of {} criteria pass",
        results.len() - failed.len(),
        results.len()
    );
    assert!(failed.is_empty(), "failed criteria:\n{}", failed.join("\n"));
}

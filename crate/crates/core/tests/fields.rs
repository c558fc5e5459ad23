use std::f64::consts::TAU;

use proptest::prelude::*;
use smflow::fields::io::{decode_binary, encode_binary, read_csv, write_csv};
use smflow::fields::{
    covariant_difference, covariant_gradient, covariant_laplacian_section, dirichlet_energy,
    tension, Grid, MapField,
};
use smflow::initial::{magnon, InitialCondition};
use smflow::sphere::Vec3;

fn smooth(dim: usize, n: usize, seed: u64) -> MapField {
    let g = Grid::cubic(dim, n, TAU).unwrap();
    InitialCondition::SmoothRandom {
        amplitude: 0.9,
        modes: 2,
        seed,
    }
    .build(g)
}

fn dot_sum(a: &[Vec3], b: &[Vec3]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gradient_commutes_with_shifts(seed in 0u64..1000, k in -5isize..5, dim in 1usize..3) {
        let u = smooth(dim, 12, seed);
        let a = covariant_gradient(&u.shifted(0, k));
        let b = covariant_gradient(&u);
        let g = *u.grid();
        for idx in 0..g.len() {
            let from = g.neighbor(idx, 0, -k);
            prop_assert!((a.component(0)[idx] - b.component(0)[from]).norm() < 1e-13);
        }
    }

    #[test]
    fn tension_is_tangent(seed in 0u64..1000, dim in 1usize..3) {
        let u = smooth(dim, 10, seed);
        prop_assert!(tension(&u).max_normal_part() < 1e-12);
        prop_assert!(covariant_gradient(&u).max_normal_part() < 1e-14);
    }

    #[test]
    fn covariant_difference_is_skew_adjoint(seed in 0u64..1000, dim in 1usize..3) {
        let u = smooth(dim, 10, seed);
        let grad = covariant_gradient(&u);
        let f = grad.component(0);
        let g = tension(&u).component(0).to_vec();
        for axis in 0..dim {
            let lhs = dot_sum(&covariant_difference(&u, f, axis), &g);
            let rhs = -dot_sum(f, &covariant_difference(&u, &g, axis));
            prop_assert!((lhs - rhs).abs() < 1e-9 * (1.0 + lhs.abs()));
        }
        // so the Laplacian is symmetric and non-positive
        let lf = covariant_laplacian_section(&u, f);
        prop_assert!(dot_sum(&lf, f) <= 1e-12);
        let lg = covariant_laplacian_section(&u, &g);
        prop_assert!((dot_sum(&lf, &g) - dot_sum(f, &lg)).abs() < 1e-9 * (1.0 + dot_sum(&lf, &g).abs()));
    }

    #[test]
    fn energy_is_rotation_invariant(seed in 0u64..1000, a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let u = smooth(2, 10, seed);
        let rot = nalgebra::Rotation3::from_euler_angles(a, b, 0.4).into_inner();
        let (e1, e2) = (dirichlet_energy(&u), dirichlet_energy(&u.rotated(&rot)));
        prop_assert!((e1 - e2).abs() < 1e-12 * e1.max(1.0));
    }

    #[test]
    fn file_formats_round_trip(seed in 0u64..1000, dim in 1usize..3) {
        let u = smooth(dim, 8, seed);
        let mut buf = Vec::new();
        write_csv(&u, &mut buf).unwrap();
        prop_assert_eq!(read_csv(buf.as_slice()).unwrap(), u.clone());
        prop_assert_eq!(decode_binary(&encode_binary(&u)).unwrap(), u);
    }
}

fn magnon_errors(n: usize) -> (f64, f64) {
    let theta0 = 1.0f64;
    let g = Grid::circle(n).unwrap();
    let u = magnon(g, 2, theta0, 0.0);
    let grad = covariant_gradient(&u);
    let tau = tension(&u);
    let mut eg: f64 = 0.0;
    let mut et: f64 = 0.0;
    for idx in 0..g.len() {
        let [x, _] = g.position(idx);
        let (s, c) = theta0.sin_cos();
        let exact_grad = Vec3::new(-2.0 * s * (2.0 * x).sin(), 2.0 * s * (2.0 * x).cos(), 0.0);
        // τ = u_xx + |u_x|²u for a map into the sphere
        let u_xx = Vec3::new(-4.0 * s * (2.0 * x).cos(), -4.0 * s * (2.0 * x).sin(), 0.0);
        let p = Vec3::new(s * (2.0 * x).cos(), s * (2.0 * x).sin(), c);
        let exact_tau = u_xx + p * (4.0 * s * s);
        eg = eg.max((grad.component(0)[idx] - exact_grad).norm());
        et = et.max((tau.component(0)[idx] - exact_tau).norm());
    }
    (eg, et)
}

#[test]
fn stencils_are_second_order() {
    let (g1, t1) = magnon_errors(64);
    let (g2, t2) = magnon_errors(128);
    assert!((g1 / g2).log2() >= 1.9, "{g1} {g2}");
    assert!((t1 / t2).log2() >= 1.9, "{t1} {t2}");
}

#[test]
fn energy_of_winding_map() {
    let g = Grid::circle(256).unwrap();
    let u = MapField::from_fn(g, |[x, _]| Vec3::new((3.0 * x).cos(), (3.0 * x).sin(), 0.0));
    // ½∫|u_x|² = ½·9·2π
    assert!(
        (dirichlet_energy(&u) - 9.0 * std::f64::consts::PI).abs() / (9.0 * std::f64::consts::PI)
            < 1e-3
    );
}

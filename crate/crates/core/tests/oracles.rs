mod common;

use common::{fd_gradient, jacobi_eigenvalues, naive_matvec, rel_err, sigma_max, spectral_radius, TestRng};
use pplag_core::diagnostics;
use pplag_core::pplag::{self, PplagConfig, PplagState};
use pplag_core::problem::{generate_lcqp, generate_lcqp_with_witness, lipschitz_constant, largest_singular_value};
use pplag_core::sproxalm::{self, SproxParams};
use pplag_core::{linalg, GeneratorConfig, ProxSpec};
use proptest::prelude::*;

#[test]
fn lipschitz_and_sigma_match_jacobi() {
    for (n, m, seed) in [(10, 3, 0), (30, 5, 1), (60, 10, 2)] {
        let inst = generate_lcqp(&GeneratorConfig::new(n, m, seed)).unwrap();
        let lq = lipschitz_constant(inst.q()).unwrap();
        let lq_ref = spectral_radius(inst.q().as_slice(), n);
        assert!((lq - lq_ref).abs() <= 1e-8 * lq_ref, "{lq} vs {lq_ref}");
        let s = largest_singular_value(inst.a());
        let s_ref = sigma_max(inst.a().as_slice(), m, n);
        assert!((s - s_ref).abs() <= 1e-8 * s_ref, "{s} vs {s_ref}");
    }
}

#[test]
fn q_is_indefinite_at_n100() {
    let inst = generate_lcqp(&GeneratorConfig::new(100, 10, 0)).unwrap();
    let eig = jacobi_eigenvalues(inst.q().as_slice(), 100);
    assert!(eig.iter().any(|&e| e < -1.0));
    assert!(eig.iter().any(|&e| e > 1.0));
}

#[test]
fn matvecs_match_naive_loops() {
    let inst = generate_lcqp(&GeneratorConfig::new(17, 6, 4)).unwrap();
    let mut rng = TestRng::new(1);
    let x = rng.vec(17, -2.0, 2.0);
    let y = rng.vec(6, -2.0, 2.0);
    let a = inst.a();
    assert!(rel_err(&a.mul_vec(&x).unwrap(), &naive_matvec(a.as_slice(), 6, 17, &x)) < 1e-14);
    let at = a.transpose();
    assert!(rel_err(&a.tr_mul_vec(&y).unwrap(), &naive_matvec(at.as_slice(), 17, 6, &y)) < 1e-14);
}

#[test]
fn witness_is_feasible_for_the_linear_constraint() {
    let (inst, x) = generate_lcqp_with_witness(&GeneratorConfig::new(40, 8, 9)).unwrap();
    let ax = naive_matvec(inst.a().as_slice(), 8, 40, &x);
    assert!(rel_err(&ax, inst.b()) < 1e-13);
}

#[test]
fn lcqp_gradient_matches_central_differences() {
    let inst = generate_lcqp(&GeneratorConfig::new(25, 5, 2)).unwrap();
    let mut rng = TestRng::new(2);
    for _ in 0..100 {
        let x = rng.vec(25, -5.0, 5.0);
        let fd = fd_gradient(|y| inst.value(y).unwrap(), &x, 1e-5);
        assert!(rel_err(&fd, &inst.gradient(&x).unwrap()) <= 1e-6);
    }
}

#[test]
fn smooth_lagrangian_gradient_matches_central_differences() {
    let inst = generate_lcqp(&GeneratorConfig::new(20, 4, 3)).unwrap();
    let p = inst.to_problem().unwrap();
    let params = PplagConfig::default().resolve(&p).unwrap();
    let mut rng = TestRng::new(3);
    for _ in 0..50 {
        // Interior of the box, so h contributes nothing.
        let w = PplagState {
            x: rng.vec(20, 0.5, 4.5),
            z: rng.vec(4, -1.0, 1.0),
            lambda: rng.vec(4, -5.0, 5.0),
            mu: rng.vec(4, -5.0, 5.0),
            delta: 0.5,
            k: 0,
            tau_last: 0.0,
        };
        let g = pplag::grad_smooth(&p, &w.x, &w.lambda).unwrap();
        let fd = fd_gradient(
            |y| {
                let v = PplagState { x: y.to_vec(), ..w.clone() };
                pplag::lagrangian_value(&p, &params, &v).unwrap().to_f64()
            },
            &w.x,
            1e-5,
        );
        assert!(rel_err(&fd, &g) <= 1e-6);
    }
}

#[test]
fn k_gradient_matches_central_differences() {
    let inst = generate_lcqp(&GeneratorConfig::new(20, 4, 5)).unwrap();
    let p = inst.to_problem().unwrap();
    let params = SproxParams::defaults(&p, SproxParams::default_gamma(&p)).unwrap();
    let mut rng = TestRng::new(5);
    for _ in 0..100 {
        let x = rng.vec(20, -3.0, 3.0);
        let z = rng.vec(20, -3.0, 3.0);
        let lam = rng.vec(4, -3.0, 3.0);
        let g = sproxalm::grad_k(&p, &params, &x, &z, &lam).unwrap();
        let fd = fd_gradient(|y| sproxalm::k_value(&p, &params, y, &z, &lam).unwrap(), &x, 1e-5);
        assert!(rel_err(&fd, &g) <= 1e-6);
    }
}

#[test]
fn step_x_satisfies_box_optimality() {
    let inst = generate_lcqp(&GeneratorConfig::new(30, 6, 6)).unwrap();
    let p = inst.to_problem().unwrap();
    let params = PplagConfig::default().resolve(&p).unwrap();
    let bounds = p.h().as_box().unwrap().clone();
    let mut rng = TestRng::new(6);
    for _ in 0..20 {
        let w = PplagState {
            x: rng.vec(30, 0.0, 5.0),
            z: vec![0.0; 6],
            lambda: rng.vec(6, -50.0, 50.0),
            mu: vec![0.0; 6],
            delta: 0.5,
            k: 0,
            tau_last: 0.0,
        };
        let g = pplag::grad_smooth(&p, &w.x, &w.lambda).unwrap();
        let xn = pplag::step_x(&p, &params, &w).unwrap();
        let eta = params.eta();
        for i in 0..30 {
            // v = g + (x⁺ − x)/η must lie in −N_X(x⁺) componentwise.
            let v = g[i] + (xn[i] - w.x[i]) / eta;
            let tol = 1e-9 * (1.0 + g[i].abs() + w.x[i].abs() / eta);
            if xn[i] > bounds.lower()[i] && xn[i] < bounds.upper()[i] {
                assert!(v.abs() <= tol);
            } else if xn[i] <= bounds.lower()[i] {
                assert!(v >= -tol);
            } else {
                assert!(v <= tol);
            }
        }
    }
}

#[test]
fn kkt_residual_vanishes_at_hand_point() {
    use pplag_core::{BoxSet, CompositeProblem, DenseMatrix};
    use pplag_core::problem::QuadraticObjective;
    use std::sync::Arc;
    let f = QuadraticObjective::new(DenseMatrix::diagonal(&[-2.0]).unwrap(), vec![0.0]).unwrap();
    let p = CompositeProblem::new(
        Arc::new(f),
        ProxSpec::BoxIndicator(BoxSet::uniform(1, 0.0, 5.0).unwrap()),
        DenseMatrix::identity(1).unwrap(),
        vec![0.5],
        2.0,
    )
    .unwrap();
    assert_eq!(diagnostics::kkt_residual(&p, &[0.5], &[1.0]).unwrap(), (0.0, 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn spectral_constants_dominate_rayleigh_quotients(
        seed in 0u64..1000,
        n in 2usize..20,
        m in 1usize..6,
        dir in proptest::collection::vec(-1.0f64..1.0, 20),
    ) {
        let inst = generate_lcqp(&GeneratorConfig::new(n, m, seed)).unwrap();
        let x = &dir[..n];
        let nx = linalg::norm_sq(x);
        prop_assume!(nx > 1e-6);
        let qx = inst.q().mul_vec(x).unwrap();
        let lq = inst.lipschitz();
        prop_assert!(linalg::dot(x, &qx).abs() / nx <= lq * (1.0 + 1e-12));
        let ax = inst.a().mul_vec(x).unwrap();
        let s = largest_singular_value(inst.a());
        prop_assert!(linalg::norm(&ax) <= s * nx.sqrt() * (1.0 + 1e-12));
    }

    #[test]
    fn iterate_keeps_multiplier_bounds(seed in 0u64..500, steps in 1usize..40) {
        let inst = generate_lcqp(&GeneratorConfig::new(12, 3, seed)).unwrap();
        let p = inst.to_problem().unwrap();
        let params = PplagConfig::default().resolve(&p).unwrap();
        let mut w = PplagState::random_initial(&p, &params, seed).unwrap();
        for _ in 0..steps {
            let next = pplag::iterate(&p, &params, &w).unwrap();
            prop_assert!(linalg::dist(&next.mu, &w.mu) <= w.delta / 2.0 * (1.0 + 1e-12));
            prop_assert!(next.tau_last <= w.delta);
            prop_assert!(next.tau_last * linalg::dist_sq(&w.lambda, &w.mu) <= w.delta * (1.0 + 1e-12));
            let lam_step = linalg::dist_sq(&next.lambda, &w.lambda);
            let rho = params.rho();
            let s = p.sigma_max();
            let bound = 2.0 * rho * rho * s * s * linalg::dist_sq(&next.x, &w.x) + w.delta * w.delta / 2.0;
            if w.k > 0 {
                prop_assert!(lam_step <= bound * (1.0 + 1e-9) + 1e-12);
            }
            w = next;
        }
    }
}

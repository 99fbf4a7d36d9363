mod common;

use common::{random_connected, random_params, rel_err};
use mtdc_core::network::{generate_hfuzz, generate_lattice, laplacian, reduced_laplacian};
use mtdc_core::numerics::{eig_sym, eigvals_sym, solve_linear, solve_lyapunov};
use mtdc_core::resistance::{kirchhoff_index, kstar, rayleigh_check, EdgeChange, ResistanceMatrix};
use mtdc_core::systems::{
    assemble_dapi, assemble_droop, assemble_slack, compare_controllers, h2_closed_form_slack, h2_lyapunov,
};
use mtdc_core::{Matrix, Network};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn net_strategy(max_n: usize) -> impl Strategy<Value = Network> {
    (3..=max_n, any::<u64>()).prop_map(|(n, seed)| {
        let mut rng = StdRng::seed_from_u64(seed);
        random_connected(&mut rng, n, 0.5, (0.5, 2.0))
    })
}

fn random_symmetric(rng: &mut StdRng, n: usize) -> Matrix {
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = rng.random_range(-1.0..1.0);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Effective resistance by grounding `j` and solving `L̃ x = e_i`.
fn grounded_resistance(net: &Network, i: usize, j: usize) -> f64 {
    let reduced = reduced_laplacian(&laplacian(net), j).unwrap();
    let ii = if i < j { i } else { i - 1 };
    let mut rhs = vec![0.0; reduced.rows()];
    rhs[ii] = 1.0;
    solve_linear(&reduced, &rhs).unwrap()[ii]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn laplacian_rows_sum_to_zero(net in net_strategy(20)) {
        let l = laplacian(&net);
        prop_assert_eq!(l.max_asymmetry(), 0.0);
        let worst = (0..l.rows()).map(|i| l.row(i).iter().sum::<f64>().abs()).fold(0.0, f64::max);
        prop_assert!(worst <= 1e-12 * l.inf_norm());
        for i in 0..l.rows() {
            for j in 0..l.cols() {
                prop_assert!(i == j || l[(i, j)] <= 0.0);
            }
        }
    }

    #[test]
    fn grounded_laplacian_is_positive_definite_and_interlaces(net in net_strategy(14), g in 0usize..14) {
        let ground = g % net.node_count();
        let l = laplacian(&net);
        let lam = eigvals_sym(&l).unwrap();
        let red = eigvals_sym(&reduced_laplacian(&l, ground).unwrap()).unwrap();
        prop_assert!(red[0] > 0.0);
        let tol = 1e-10 * lam.last().unwrap();
        for i in 0..red.len() {
            prop_assert!(lam[i] <= red[i] + tol && red[i] <= lam[i + 1] + tol);
        }
    }

    #[test]
    fn closed_forms_match_lyapunov(net in net_strategy(10), seed in any::<u64>(), g in 0usize..10) {
        let mut rng = StdRng::seed_from_u64(seed);
        let p = random_params(&mut rng, 0.1, 10.0);
        let ground = g % net.node_count();
        let r = compare_controllers(&net, &p, ground).unwrap();
        let slack = h2_lyapunov(&assemble_slack(&net, &p, ground).unwrap()).unwrap();
        let droop = h2_lyapunov(&assemble_droop(&net, &p).unwrap()).unwrap();
        let dapi = h2_lyapunov(&assemble_dapi(&net, &p).unwrap()).unwrap();
        prop_assert!(rel_err(slack, r.values.slack) <= 1e-6);
        prop_assert!(rel_err(droop, r.values.droop) <= 1e-6);
        prop_assert!(rel_err(dapi, r.values.dapi) <= 1e-6);
    }

    #[test]
    fn norm_bounds_and_ordering(net in net_strategy(16), seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let p = random_params(&mut rng, 0.1, 10.0);
        let r = compare_controllers(&net, &p, 0).unwrap();
        prop_assert!(r.values.dapi < r.values.droop);
        prop_assert!(r.ordering_flags.dapi_le_droop);
        prop_assert!(r.values.droop < p.c / (2.0 * p.kp));
        prop_assert!(r.values.dapi < p.c / (2.0 * p.kp));
        // grounded spectrum interlaces, so the slack norm dominates c K*/2
        let ks = kstar(&net).unwrap();
        prop_assert!(r.values.slack >= p.c * ks / 2.0 * (1.0 - 1e-12));
    }

    #[test]
    fn slack_equals_trace_of_grounded_inverse(net in net_strategy(16), g in 0usize..16) {
        let ground = g % net.node_count();
        let n = net.node_count();
        let red = reduced_laplacian(&laplacian(&net), ground).unwrap();
        let mut trace = 0.0;
        for k in 0..red.rows() {
            let mut e = vec![0.0; red.rows()];
            e[k] = 1.0;
            trace += solve_linear(&red, &e).unwrap()[k];
        }
        let c = 1.7;
        let p = mtdc_core::ControllerParams::new(c, 1.0, 1.0, 1.0).unwrap();
        let want = c / (2.0 * n as f64) * trace;
        prop_assert!(rel_err(h2_closed_form_slack(&net, &p, ground).unwrap(), want) <= 1e-9);
    }

    #[test]
    fn gutman_identity(net in net_strategy(16)) {
        let n = net.node_count() as f64;
        let lam = eigvals_sym(&laplacian(&net)).unwrap();
        let spectral = n * lam[1..].iter().map(|l| 1.0 / l).sum::<f64>();
        let pairwise = kirchhoff_index(&net).unwrap();
        prop_assert!(rel_err(pairwise, spectral) <= 1e-8);
        prop_assert!(rel_err(kstar(&net).unwrap(), pairwise / (n * n)) <= 1e-10);
    }

    #[test]
    fn effective_resistance_is_a_metric(net in net_strategy(12)) {
        let r = ResistanceMatrix::new(&net).unwrap();
        let n = net.node_count();
        for i in 0..n {
            prop_assert!(r.get(i, i).abs() < 1e-12);
            for j in 0..n {
                prop_assert!((r.get(i, j) - r.get(j, i)).abs() < 1e-12);
                if i != j {
                    prop_assert!(r.get(i, j) > 0.0);
                    // independent route: grounded linear solve
                    prop_assert!(rel_err(r.get(i, j), grounded_resistance(&net, i, j)) < 1e-9);
                }
                for k in 0..n {
                    prop_assert!(r.get(i, k) <= (r.get(i, j) + r.get(j, k)) * (1.0 + 1e-12) + 1e-13);
                }
            }
        }
    }

    #[test]
    fn rayleigh_monotonicity(net in net_strategy(12), factor in 1.0f64..10.0) {
        for e in 0..net.edges().len() {
            match rayleigh_check(&net, EdgeChange::Remove(e)) {
                Ok(report) => prop_assert!(report.holds, "{:?}", report),
                Err(mtdc_core::Error::DisconnectsGraph(_)) => {}
                Err(other) => return Err(TestCaseError::fail(format!("{other}"))),
            }
            prop_assert!(rayleigh_check(&net, EdgeChange::ScaleResistance(e, factor)).unwrap().holds);
        }
    }

    #[test]
    fn subgraphs_have_larger_kirchhoff_index(net in net_strategy(12), seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let mut sub = net.clone();
        // drop random non-bridge edges
        for _ in 0..net.edges().len() {
            let e = rng.random_range(0..sub.edges().len());
            if let Ok(next) = sub.without_edge(e) {
                sub = next;
            }
        }
        prop_assert!(kirchhoff_index(&sub).unwrap() >= kirchhoff_index(&net).unwrap() * (1.0 - 1e-10));
    }

    #[test]
    fn unit_fuzz_is_identity(m1 in 2usize..6, m2 in 2usize..6, r in 0.1f64..5.0) {
        let base = generate_lattice(&[m1, m2], r).unwrap();
        let fuzzed = generate_hfuzz(&base, 1, 2.0 * r).unwrap();
        prop_assert_eq!(fuzzed.edges(), base.edges());
    }
}

#[test]
fn eigendecomposition_of_random_symmetric_matrices() {
    let mut rng = StdRng::seed_from_u64(11);
    for n in [1, 2, 3, 7, 20, 64, 200] {
        let m = random_symmetric(&mut rng, n);
        let eig = eig_sym(&m).unwrap();
        let scale = m.frobenius_norm();
        assert!(eig.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        let u = &eig.eigenvectors;
        let resid = m.matmul(u).unwrap().sub(&u.matmul(&Matrix::from_diagonal(&eig.eigenvalues)).unwrap()).unwrap();
        assert!(resid.frobenius_norm() <= 1e-10 * scale, "n={n}");
        let ortho = u.tr_matmul(u).unwrap().sub(&Matrix::identity(n)).unwrap();
        assert!(ortho.frobenius_norm() <= 1e-10, "n={n}");
        assert!(eig.reconstruct().sub(&m).unwrap().frobenius_norm() <= 1e-10 * scale);
    }
}

#[test]
fn lyapunov_residual_on_random_stable_matrices() {
    let mut rng = StdRng::seed_from_u64(5);
    for n in [2, 5, 10, 25, 50] {
        // symmetric: shift a random symmetric matrix to be negative definite
        let s = random_symmetric(&mut rng, n);
        let shift = eigvals_sym(&s).unwrap().last().unwrap() + 0.5;
        let a_sym = s.sub(&Matrix::identity(n).scaled(shift)).unwrap();
        // non-symmetric: add a skew part, which leaves the symmetric part unchanged
        let mut a_gen = a_sym.clone();
        for i in 0..n {
            for j in i + 1..n {
                let v = rng.random_range(-1.0..1.0);
                a_gen[(i, j)] += v;
                a_gen[(j, i)] -= v;
            }
        }
        let q = {
            let g = random_symmetric(&mut rng, n);
            g.tr_matmul(&g).unwrap()
        };
        for a in [a_sym, a_gen] {
            let sol = solve_lyapunov(&a, &q).unwrap();
            let bound = 1e-8 * (a.frobenius_norm() * sol.p.frobenius_norm() + q.frobenius_norm());
            assert!(sol.residual <= bound, "n={n}: {} > {bound}", sol.residual);
            assert_eq!(sol.p.max_asymmetry(), 0.0);
        }
    }
}

mod simulation {
    use super::*;
    use mtdc_core::simulate::{default_step, monte_carlo_h2, sample_initial_indexed, simulate};
    use mtdc_core::InitialMode;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn monte_carlo_is_deterministic(net in net_strategy(6), seed in any::<u64>()) {
            let p = mtdc_core::ControllerParams::new(1.0, 0.5, 2.0, 1.0).unwrap();
            let model = assemble_dapi(&net, &p).unwrap();
            let dt = default_step(&model);
            let a = monte_carlo_h2(&model, 8, 5.0, dt, seed).unwrap();
            let b = monte_carlo_h2(&model, 8, 5.0, dt, seed).unwrap();
            prop_assert_eq!(a, b);
        }

        /// `A = -C⁻¹L` is self-adjoint in the `C` inner product, so `xᵀCx`
        /// decays along exact and RK4 trajectories alike.
        #[test]
        fn stored_energy_never_increases(net in net_strategy(10), seed in any::<u64>(), kp in 0.1f64..5.0) {
            let mut rng = StdRng::seed_from_u64(seed);
            let c = rng.random_range(0.1..10.0);
            let p = mtdc_core::ControllerParams::new(c, kp, 1.0, 1.0).unwrap();
            for model in [assemble_slack(&net, &p, 0).unwrap(), assemble_droop(&net, &p).unwrap()] {
                let x0 = sample_initial_indexed(&model, InitialMode::BbStar, seed, 0);
                let traj = simulate(&model, &x0, 20.0 * c, default_step(&model)).unwrap();
                let energy: Vec<f64> = traj.states.iter().map(|x| c * x.iter().map(|v| v * v).sum::<f64>()).collect();
                for w in energy.windows(2) {
                    prop_assert!(w[1] <= w[0] + 1e-9 * energy[0]);
                }
            }
        }
    }

    #[test]
    fn initial_states_have_covariance_bbt() {
        let net = mtdc_core::network::build_network(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let p = mtdc_core::ControllerParams::new(0.5, 1.0, 1.0, 1.0).unwrap();
        let model = assemble_dapi(&net, &p).unwrap();
        let dim = model.state_dim();
        let draws = 100_000;
        let mut cov = Matrix::zeros(dim, dim);
        for i in 0..draws {
            let x = sample_initial_indexed(&model, InitialMode::BbStar, 3, i);
            for r in 0..dim {
                for s in 0..dim {
                    cov[(r, s)] += x[r] * x[s] / draws as f64;
                }
            }
        }
        let want = model.b.matmul(&model.b.transpose()).unwrap();
        for r in 0..dim {
            for s in 0..dim {
                assert!((cov[(r, s)] - want[(r, s)]).abs() <= 0.05, "({r},{s}) {} vs {}", cov[(r, s)], want[(r, s)]);
            }
        }
    }
}

mod common;

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use oqw_core::classical::{
    classical_marginal, embed_classical, ClassicalTransitionMatrix, CoinChoice,
};
use oqw_core::dilation::{
    check_uqw_condition, coherent_step, hadamard_pair, run_realisation_with, CoherentState,
    Completion, GlobalUnitary,
};
use oqw_core::dqc::{dqc_step, DqcChain, Gate, GateCircuit};
use oqw_core::io::{parse_walk, write_walk};
use oqw_core::lattice::{analyze_components, HomogeneousWalkZ};
use oqw_core::random::{
    random_block_state, random_density, random_stochastic_rows, random_unitary, random_vector,
    random_walk,
};
use oqw_core::trajectories::{branch_average, run_ensemble, PureWalkerState};
use oqw_core::walk::{apply_full_map_matrix, step_with, StepOptions, STATE_TOL};
use oqw_core::{
    apply_full_map, c64, evolve, node_distribution, step, total_variation, BlockDiagonalState,
    ComplexMatrix, FullState, NodeId,
};
use proptest::prelude::*;
use rand::Rng;

fn nodes(n: usize) -> Vec<NodeId> {
    (0..n as NodeId).collect()
}

fn config() -> ProptestConfig {
    ProptestConfig {
        failure_persistence: None,
        ..ProptestConfig::with_cases(128)
    }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn step_preserves_trace(seed: u64, n in 2usize..=4, d in 1usize..=3, steps in 1usize..6) {
        let mut rng = common::rng(seed);
        let walk = random_walk(&mut rng, &nodes(n), d);
        let state = random_block_state(&mut rng, &nodes(n), d);
        let out = evolve(&walk, &state, steps).unwrap();
        prop_assert!((out.total_trace() + out.pruned_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn blocks_stay_positive(seed: u64, n in 2usize..=4, d in 1usize..=3, steps in 1usize..6) {
        let mut rng = common::rng(seed);
        let walk = random_walk(&mut rng, &nodes(n), d);
        let out = evolve(&walk, &random_block_state(&mut rng, &nodes(n), d), steps).unwrap();
        for b in out.blocks().values() {
            prop_assert!(b.is_hermitian(1e-14));
            prop_assert!(b.is_positive_semidefinite(STATE_TOL));
        }
    }

    #[test]
    fn step_is_linear(seed: u64, n in 2usize..=4, d in 1usize..=3, alpha in 0.0f64..=1.0) {
        let mut rng = common::rng(seed);
        let walk = random_walk(&mut rng, &nodes(n), d);
        let a = random_block_state(&mut rng, &nodes(n), d);
        let b = random_block_state(&mut rng, &nodes(n), d);
        let exact = StepOptions::exact();
        let lhs = step_with(&walk, &a.mix(alpha, &b).unwrap(), exact).unwrap();
        let rhs = step_with(&walk, &a, exact).unwrap().mix(alpha, &step_with(&walk, &b, exact).unwrap()).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-13);
    }

    #[test]
    fn full_state_map_is_block_diagonal(seed: u64, n in 2usize..=4, d in 1usize..=3) {
        let mut rng = common::rng(seed);
        let walk = random_walk(&mut rng, &nodes(n), d);
        let full = FullState::new(nodes(n), d, random_density(&mut rng, n * d)).unwrap();
        let out = apply_full_map(&walk, &full).unwrap();
        let from_diag = step(&walk, &full.diagonal_part()).unwrap();
        prop_assert!(out.max_abs_diff(&from_diag) < 1e-13);
    }

    #[test]
    fn choi_matrix_is_positive(seed: u64, n in 2usize..=3, d in 1usize..=2) {
        let mut rng = common::rng(seed);
        let walk = random_walk(&mut rng, &nodes(n), d);
        let dim = n * d;
        let mut choi = DMatrix::zeros(dim * dim, dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                let mut e = DMatrix::zeros(dim, dim);
                e[(i, j)] = c64(1.0, 0.0);
                let image = apply_full_map_matrix(&walk, &ComplexMatrix::new(e).unwrap()).unwrap();
                choi.view_mut((i * dim, j * dim), (dim, dim)).copy_from(image.inner());
            }
        }
        let choi = ComplexMatrix::new(choi).unwrap();
        prop_assert!(choi.is_hermitian(1e-12));
        prop_assert!(choi.hermitian_eigenvalues()[0] > -1e-10);
    }

    #[test]
    fn ensembles_are_reproducible(seed: u64, n in 2usize..=4, d in 1usize..=3, traj in 1u64..400) {
        let mut rng = common::rng(seed);
        let walk = random_walk(&mut rng, &nodes(n), d);
        let initial = PureWalkerState::new(random_vector(&mut rng, d), 0).unwrap();
        let a = run_ensemble(&walk, &initial, 4, traj, seed).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| run_ensemble(&walk, &initial, 4, traj, seed).unwrap());
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.counts.values().sum::<u64>(), traj);
    }

    #[test]
    fn branch_average_is_exact(seed: u64, n in 2usize..=4, d in 1usize..=3, steps in 0usize..4) {
        let mut rng = common::rng(seed);
        let walk = random_walk(&mut rng, &nodes(n), d);
        let initial = PureWalkerState::new(random_vector(&mut rng, d), rng.random_range(0..n as NodeId)).unwrap();
        let avg = branch_average(&walk, &initial, steps).unwrap();
        let exact = evolve(&walk, &initial.to_block_state(), steps).unwrap();
        prop_assert!(avg.max_abs_diff(&exact) < 1e-12);
    }

    #[test]
    fn realisation_equals_step(seed: u64, n in 2usize..=4, d in 1usize..=3) {
        let mut rng = common::rng(seed);
        let walk = random_walk(&mut rng, &nodes(n), d);
        let state = random_block_state(&mut rng, &nodes(n), d);
        let exact = step_with(&walk, &state, StepOptions::exact()).unwrap();
        for completion in [Completion::Canonical, Completion::Reversed] {
            prop_assert!(GlobalUnitary::build(&walk, completion).unwrap().to_dense().unwrap().is_unitary(1e-10));
            let realised = run_realisation_with(&walk, &state, completion).unwrap();
            prop_assert!(realised.max_abs_diff(&exact) < 1e-10);
        }
    }

    #[test]
    fn classical_embedding_ignores_unitaries(seed: u64, n in 1usize..=4, d in 1usize..=3, steps in 0usize..=10) {
        let mut rng = common::rng(seed);
        let p = ClassicalTransitionMatrix::new(random_stochastic_rows(&mut rng, n)).unwrap();
        let family = |rng: &mut rand_chacha::ChaCha8Rng| {
            let mut f = BTreeMap::new();
            for a in 0..n as NodeId {
                for b in 0..n as NodeId {
                    f.insert((a, b), random_unitary(rng, d));
                }
            }
            CoinChoice::Unitaries { dim: d, family: f }
        };
        let w1 = embed_classical(&p, &family(&mut rng)).unwrap();
        let w2 = embed_classical(&p, &family(&mut rng)).unwrap();
        let state = random_block_state(&mut rng, &nodes(n), d);
        let masses = node_distribution(&state);
        let d1 = node_distribution(&evolve(&w1, &state, steps).unwrap());
        let d2 = node_distribution(&evolve(&w2, &state, steps).unwrap());
        let classical = classical_marginal(&p, &masses, steps).unwrap();
        prop_assert!(total_variation(&d1, &d2) < 1e-10);
        prop_assert!(total_variation(&d1, &classical) < 1e-10);
    }

    #[test]
    fn coherent_step_preserves_norm(theta in 0.0f64..std::f64::consts::PI, phi in -3.2f64..3.2, sign in prop::bool::ANY, seed: u64) {
        let alpha = c64(theta.cos(), 0.0);
        let beta = c64(0.0, phi).exp() * theta.sin();
        let (b, c) = hadamard_pair(alpha, beta, if sign { 1.0 } else { -1.0 }).unwrap();
        let diag = check_uqw_condition(&b, &c, 1e-12);
        prop_assert!(diag.holds && diag.sum_unitarity_defect < 1e-12);
        let walk = HomogeneousWalkZ::new(b, c, 1e-12).unwrap();
        let mut state = CoherentState::localized(random_vector(&mut common::rng(seed), 2), 0);
        for _ in 0..8 {
            state = coherent_step(&walk, &state);
        }
        prop_assert!((state.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn commuting_line_walk_is_binomial_mixture(seed: u64, d in 1usize..=4, steps in 0usize..=15) {
        let mut rng = common::rng(seed);
        let angles: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..std::f64::consts::FRAC_PI_2)).collect();
        let phase = |rng: &mut rand_chacha::ChaCha8Rng| c64(0.0, rng.random_range(-3.0..3.0)).exp();
        let right: Vec<_> = angles.iter().map(|a| phase(&mut rng) * a.cos()).collect();
        let left: Vec<_> = angles.iter().map(|a| phase(&mut rng) * a.sin()).collect();
        // same pair in a random basis
        let u = random_unitary(&mut rng, d);
        let rotate = |diag: &[num_complex::Complex64]| ComplexMatrix::from_diagonal(diag).conjugated_by(&u);
        let walk = HomogeneousWalkZ::new(rotate(&right), rotate(&left), 1e-12).unwrap();
        let rho = random_density(&mut rng, d);
        let analysis = analyze_components(&walk, &rho).unwrap();
        let predicted = analysis.predicted_distribution(steps);
        let start = BlockDiagonalState::localized(0, rho).unwrap();
        let exact = node_distribution(&evolve(&walk, &start, steps).unwrap());
        prop_assert!(total_variation(&exact, &predicted) < 1e-10);
    }

    #[test]
    fn walk_files_round_trip(seed: u64, n in 1usize..=4, d in 1usize..=3) {
        let mut rng = common::rng(seed);
        let walk = random_walk(&mut rng, &nodes(n), d);
        prop_assert_eq!(parse_walk(&write_walk(&walk)).unwrap(), walk);
    }

    #[test]
    fn dqc_step_is_the_chain_walk(seed: u64, t in 1usize..=6, omega in 0.05f64..0.95) {
        let mut rng = common::rng(seed);
        let gates = (0..t).map(|k| Gate { label: format!("u{k}"), matrix: random_unitary(&mut rng, 2) }).collect();
        let chain = DqcChain::new(GateCircuit::new(1, gates).unwrap(), omega).unwrap();
        let walk = chain.to_walk().unwrap().validated(1e-12).unwrap();
        let mut s = random_block_state(&mut rng, &nodes(t + 1), 2);
        for _ in 0..5 {
            let next = dqc_step(&chain, &s).unwrap();
            prop_assert!(next.max_abs_diff(&step(&walk, &s).unwrap()) < 1e-13);
            prop_assert!((next.total_trace() - 1.0).abs() < 1e-12);
            s = next;
        }
    }
}

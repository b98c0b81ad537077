mod common;

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use oqw_core::classical::{
    classical_marginal, embed_classical, ClassicalTransitionMatrix, CoinChoice,
};
use oqw_core::dilation::{check_uqw_condition, hadamard_pair, run_coherent, run_realisation};
use oqw_core::dqc::{
    build_phase_estimation, run_to_steady, BoundaryRule, DqcChain, Gate, GateCircuit,
    PhaseEstimationSpec,
};
use oqw_core::lattice::{analyze_components, moments, HomogeneousWalkZ};
use oqw_core::random::{random_block_state, random_stochastic_rows, random_unitary, random_vector};
use oqw_core::trajectories::{jump_probabilities, run_ensemble, PureWalkerState};
use oqw_core::{
    c64, evolve, node_distribution, step, total_variation, BlockDiagonalState, ComplexMatrix,
    ComplexVector, NodeId, OpenQuantumWalk,
};
use rand::Rng;

fn origin_state() -> BlockDiagonalState {
    BlockDiagonalState::localized(0, ComplexMatrix::identity(3).scale(1.0 / 3.0)).unwrap()
}

fn uniform_coin() -> PureWalkerState {
    PureWalkerState::normalized(ComplexVector::from_element(3, c64(1.0, 0.0)), 0).unwrap()
}

#[test]
fn first_step_masses_are_traces() {
    let walk = common::three_mode_walk();
    let d = node_distribution(&step(&walk, &origin_state()).unwrap());
    assert!((d[&1] - (1.0 + 0.75 + 0.36) / 3.0).abs() < 1e-15);
    assert!((d[&-1] - (0.25 + 0.64) / 3.0).abs() < 1e-15);
    let p = jump_probabilities(&walk, &uniform_coin()).unwrap();
    assert!((p[&1] - (1.0 + 0.75 + 0.36) / 3.0).abs() < 1e-15);
}

#[test]
fn line_walk_is_binomial_mixture() {
    let walk = common::three_mode_walk();
    for n in [2, 10, 20, 50] {
        let exact = node_distribution(&evolve(&walk, &origin_state(), n).unwrap());
        let oracle = common::binomial_mixture(n, &[1.0, 0.75, 0.36]);
        assert!(total_variation(&exact, &oracle) < 1e-12, "n = {n}");
    }
    let two = node_distribution(&evolve(&walk, &origin_state(), 2).unwrap());
    assert!((two[&2] - 0.5640).abs() < 1e-4);
    assert!((two[&0] - 0.2786).abs() < 1e-4);
    assert!((two[&-2] - 0.1574).abs() < 1e-4);
}

#[test]
fn mean_after_fifty_steps_is_weighted_drift() {
    let walk = common::three_mode_walk();
    let dist = node_distribution(&evolve(&walk, &origin_state(), 50).unwrap());
    let (mean, _) = moments(&dist).unwrap();
    assert!((mean - 50.0 * (1.0 + 0.5 - 7.0 / 25.0) / 3.0).abs() < 1e-10);
    let analysis = analyze_components(&walk, &ComplexMatrix::identity(3).scale(1.0 / 3.0)).unwrap();
    assert!((analysis.mean_drift() - (1.0 + 0.5 - 7.0 / 25.0) / 3.0).abs() < 1e-12);
}

#[test]
fn one_step_ensemble_within_three_sigma() {
    let walk = common::three_mode_walk();
    let n = 100_000u64;
    let est = run_ensemble(&walk, &uniform_coin(), 1, n, 99)
        .unwrap()
        .distribution();
    let p = jump_probabilities(&walk, &uniform_coin()).unwrap();
    for (node, &q) in &p {
        let sigma = (q * (1.0 - q) / n as f64).sqrt();
        assert!(
            (est.get(node).copied().unwrap_or(0.0) - q).abs() < 3.0 * sigma,
            "node {node}"
        );
    }
}

/// Mean total variation over a few seeds, for a given ensemble size.
fn mean_tv(
    walk: &HomogeneousWalkZ,
    exact: &BTreeMap<NodeId, f64>,
    count: u64,
    seeds: &[u64],
) -> f64 {
    seeds
        .iter()
        .map(|&s| {
            total_variation(
                &run_ensemble(walk, &uniform_coin(), 20, count, s)
                    .unwrap()
                    .distribution(),
                exact,
            )
        })
        .sum::<f64>()
        / seeds.len() as f64
}

#[test]
fn trajectory_error_shrinks_like_inverse_square_root() {
    let walk = common::three_mode_walk();
    let exact = node_distribution(&evolve(&walk, &uniform_coin().to_block_state(), 20).unwrap());
    let seeds: Vec<u64> = (0..8).collect();
    let counts = [500u64, 2_000, 8_000, 32_000];
    let points: Vec<(f64, f64)> = counts
        .iter()
        .map(|&c| ((c as f64).ln(), mean_tv(&walk, &exact, c, &seeds).ln()))
        .collect();
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let slope = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / points.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!((-0.7..=-0.3).contains(&slope), "slope {slope}");
}

#[test]
fn coherent_walk_matches_dense_unitary_walk() {
    let s = c64(FRAC_1_SQRT_2, 0.0);
    for sign in [1.0, -1.0] {
        let (b, c) = hadamard_pair(s, s, sign).unwrap();
        let diag = check_uqw_condition(&b, &c, 1e-12);
        assert!(diag.cross_norm < 1e-12 && diag.sum_unitarity_defect < 1e-12);
        let coin = &b + &c;
        let walk = HomogeneousWalkZ::new(b, c, 1e-12).unwrap();
        for n in [1usize, 2, 10] {
            let size = 2 * n + 3;
            let u = common::dense_ring_walk(&coin, size);
            let mut psi = nalgebra::DVector::zeros(2 * size);
            psi[0] = c64(1.0, 0.0);
            for _ in 0..n {
                psi = &u * psi;
            }
            let coherent = run_coherent(
                &walk,
                ComplexVector::from_vec(vec![c64(1.0, 0.0), c64(0.0, 0.0)]),
                0,
                n,
                1e-12,
            )
            .unwrap()
            .distribution();
            for x in 0..size {
                let pos = if x <= n {
                    x as NodeId
                } else {
                    x as NodeId - size as NodeId
                };
                let p = psi[2 * x].norm_sqr() + psi[2 * x + 1].norm_sqr();
                assert!(
                    (p - coherent.get(&pos).copied().unwrap_or(0.0)).abs() < 1e-12,
                    "n {n} x {pos}"
                );
            }
            if n == 1 {
                assert!((coherent[&1] - 0.5).abs() < 1e-15 && (coherent[&-1] - 0.5).abs() < 1e-15);
            }
        }
    }
}

#[test]
fn uniform_stochastic_matrix_spreads_evenly() {
    let mut rng = common::rng(5);
    let p = ClassicalTransitionMatrix::new(vec![vec![1.0 / 3.0; 3]; 3]).unwrap();
    let mut family = BTreeMap::new();
    for a in 0..3 {
        for b in 0..3 {
            family.insert((a, b), random_unitary(&mut rng, 2));
        }
    }
    let walk = embed_classical(&p, &CoinChoice::Unitaries { dim: 2, family }).unwrap();
    let state = random_block_state(&mut rng, &[0, 1, 2], 2);
    let d = node_distribution(&step(&walk, &state).unwrap());
    for node in 0..3 {
        assert!((d[&node] - 1.0 / 3.0).abs() < 1e-14);
    }
}

#[test]
fn two_step_marginal_is_double_sum() {
    let mut rng = common::rng(17);
    let rows = random_stochastic_rows(&mut rng, 3);
    let p = ClassicalTransitionMatrix::new(rows.clone()).unwrap();
    let masses: Vec<f64> = {
        let raw: Vec<f64> = (0..3).map(|_| rng.random::<f64>()).collect();
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|x| x / s).collect()
    };
    let init: BTreeMap<NodeId, f64> = masses
        .iter()
        .enumerate()
        .map(|(i, &m)| (i as NodeId, m))
        .collect();
    let got = classical_marginal(&p, &init, 2).unwrap();
    for i in 0..3 {
        let mut want = 0.0;
        for k in 0..3 {
            for (j, row) in rows.iter().enumerate() {
                want += row[i] * rows[k][j] * masses[k];
            }
        }
        assert!((got[&(i as NodeId)] - want).abs() < 1e-15);
    }
    let walk = embed_classical(&p, &CoinChoice::Scalar).unwrap();
    let blocks = init
        .iter()
        .map(|(&n, &m)| (n, ComplexMatrix::from_real_diagonal(&[m])))
        .collect();
    let state = BlockDiagonalState::new(1, blocks).unwrap();
    let quantum = node_distribution(&evolve(&walk, &state, 2).unwrap());
    assert!(total_variation(&quantum, &got) < 1e-14);
}

#[test]
fn truncated_line_walk_dilation_matches_step() {
    let walk = common::three_mode_walk().truncate(-2, 2).unwrap();
    let state = step(&walk, &origin_state()).unwrap();
    let realised = run_realisation(&walk, &state).unwrap();
    assert!(realised.max_abs_diff(&step(&walk, &state).unwrap()) < 1e-10);
}

fn random_circuit(rng: &mut rand_chacha::ChaCha8Rng, t: usize) -> GateCircuit {
    let gates = (0..t)
        .map(|k| Gate {
            label: format!("u{k}"),
            matrix: random_unitary(rng, 4),
        })
        .collect();
    GateCircuit::new(2, gates).unwrap()
}

#[test]
fn steady_state_is_birth_death_law_times_partial_products() {
    let mut rng = common::rng(23);
    for t in [1usize, 3, 6] {
        let circuit = random_circuit(&mut rng, t);
        let psi0 = random_vector(&mut rng, 4);
        let partial = circuit.partial_states(&psi0);
        for omega in [0.3, 0.5, 0.75] {
            let chain = DqcChain::new(circuit.clone(), omega).unwrap();
            let steady =
                run_to_steady(&chain, &chain.initial_state(&psi0).unwrap(), 1e-13, 200_000)
                    .unwrap();
            let law = common::birth_death_stationary(t, omega);
            for (j, &p) in law.iter().enumerate() {
                let want = ComplexMatrix::outer(&partial[j]).scale(p);
                let got = steady.state.block(j as NodeId).unwrap();
                assert!(
                    got.max_abs_diff(&want) < 1e-10,
                    "t {t} omega {omega} node {j}"
                );
            }
            assert!((law[t] - common::last_node_mass(t, omega)).abs() < 1e-14 || omega == 0.5);
        }
    }
}

#[test]
fn literal_boundary_keeps_node_masses() {
    let mut rng = common::rng(29);
    let circuit = random_circuit(&mut rng, 4);
    let psi0 = random_vector(&mut rng, 4);
    let chain = DqcChain::new(circuit, 0.7)
        .unwrap()
        .with_boundary(BoundaryRule::Literal);
    let steady =
        run_to_steady(&chain, &chain.initial_state(&psi0).unwrap(), 1e-13, 200_000).unwrap();
    let law = common::birth_death_stationary(4, 0.7);
    for (j, &p) in law.iter().enumerate() {
        assert!((steady.state.block(j as NodeId).unwrap().real_trace() - p).abs() < 1e-10);
    }
}

#[test]
fn phase_estimation_circuit_matches_dense_simulation() {
    for k in [0usize, 3, 5, 11, 15] {
        let phi = k as f64 / 16.0;
        let pe = build_phase_estimation(&PhaseEstimationSpec::diagonal_phase(4, phi)).unwrap();
        let out = pe.circuit.product().apply(&pe.initial);
        // after the controlled powers the ancillas hold sum_y e^{2 pi i phi y}|y>/4,
        // and the inverse DFT maps that to |k>
        let mut want = ComplexVector::zeros(32);
        for x in 0..16usize {
            let mut amp = c64(0.0, 0.0);
            for y in 0..16usize {
                let angle = 2.0 * PI * (phi * y as f64 - (x * y) as f64 / 16.0);
                amp += c64(0.0, angle).exp() / 16.0;
            }
            want[2 * x + 1] = amp;
        }
        assert!((&out - &want).camax() < 1e-12, "k = {k}");
        assert!((want[2 * k + 1].norm_sqr() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn two_node_uniform_split_oracle() {
    let h = ComplexMatrix::identity(2).scale(FRAC_1_SQRT_2);
    let walk = OpenQuantumWalk::new(
        2,
        vec![0, 1],
        [
            (0, 0, h.clone()),
            (0, 1, h.clone()),
            (1, 0, h.clone()),
            (1, 1, h),
        ],
    )
    .unwrap();
    let state =
        BlockDiagonalState::localized(1, ComplexMatrix::from_real_diagonal(&[0.25, 0.75])).unwrap();
    let d = node_distribution(&evolve(&walk, &state, 2).unwrap());
    assert!((d[&0] - 0.5).abs() < 1e-15 && (d[&1] - 0.5).abs() < 1e-15);
}

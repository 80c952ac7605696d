//! Objective and fidelity values checked against closed forms derived by hand.

use mns_core::fidelity::{evolve, worst_case_fidelity};
use mns_core::noise::{
    collective_dfs_encoding_n3, collective_xz, collective_z_with_local_dephasing,
    lindblad_to_kraus, LindbladModel, LindbladTerm,
};
use mns_core::objective::{EncodingDims, Objective};
use mns_core::search::{find_mns, search_dims, SearchConfig};
use mns_core::tensor_algebra::{pauli_z, ComplexMatrix, ONE, ZERO};
use mns_core::KrausChannel;

/// Permutation encoding whose block is spanned by the given basis states.
fn basis_encoding(block: &[usize], dim: usize) -> ComplexMatrix {
    let mut order: Vec<usize> = block.to_vec();
    order.extend((0..dim).filter(|i| !block.contains(i)));
    ComplexMatrix::from_fn(dim, dim, |r, c| if order[r] == c { ONE } else { ZERO })
}

/// `J` for a block of `n1` basis states (`n2 = 1`) under a model whose
/// Lindblad operators are all diagonal with entries `v_j(s)`:
/// `J = [(n1 - dt/2 sum_s sum_j g_j |v_j(s)|^2)^2 + dt sum_j g_j |sum_s v_j(s)|^2] / n1^2`.
fn diagonal_block_j(model: &LindbladModel, block: &[usize], dt: f64) -> f64 {
    let n1 = block.len() as f64;
    let mut lead = n1;
    let mut rest = 0.0;
    for term in &model.terms {
        let diag: Vec<f64> = block.iter().map(|&s| term.operator[(s, s)].re).collect();
        lead -= 0.5 * dt * term.rate * diag.iter().map(|v| v * v).sum::<f64>();
        rest += dt * term.rate * diag.iter().sum::<f64>().powi(2);
    }
    (lead * lead + rest) / (n1 * n1)
}

#[test]
fn basis_subspaces_of_local_dephasing_model() {
    let model = collective_z_with_local_dephasing(3, 1.0, 0.1, &[0.33, 0.47, 0.85]).unwrap();
    let dt = model.default_dt();
    let ch = lindblad_to_kraus(&model, dt).unwrap();
    let blocks: [&[usize]; 6] = [&[3, 5], &[3, 6], &[5, 6], &[1, 2], &[3, 5, 6], &[1, 2, 4]];
    for block in blocks {
        let dims = EncodingDims::new(block.len(), 1, 8).unwrap();
        let j = Objective::new(&ch, dims)
            .unwrap()
            .value_at_unitary(&basis_encoding(block, 8));
        let want = diagonal_block_j(&model, block, dt);
        assert!((j - want).abs() < 1e-14, "{block:?}: {j} vs {want}");
    }
    // span{|011>, |101>} worked through by hand: 1 - 0.08 dt + 0.33930625 dt^2 at dt = 1e-3.
    let j = Objective::new(&ch, EncodingDims::new(2, 1, 8).unwrap())
        .unwrap()
        .value_at_unitary(&basis_encoding(&[3, 5], 8));
    assert!((j - 0.99992033930625).abs() < 1e-14, "{j}");
}

#[test]
fn search_reaches_best_basis_subspace() {
    let model = collective_z_with_local_dephasing(3, 1.0, 0.1, &[0.33, 0.47, 0.85]).unwrap();
    let dt = model.default_dt();
    let ch = lindblad_to_kraus(&model, dt).unwrap();
    let cfg = SearchConfig {
        num_restarts: 8,
        ..SearchConfig::default()
    };
    let best_pair = diagonal_block_j(&model, &[3, 5], dt);
    let r = search_dims(&ch, EncodingDims::new(2, 1, 8).unwrap(), &cfg).unwrap();
    assert!(
        (r.best_j - best_pair).abs() < 1e-12,
        "{} vs {best_pair}",
        r.best_j
    );
    let best_triple = diagonal_block_j(&model, &[3, 5, 6], dt);
    let r = search_dims(&ch, EncodingDims::new(3, 1, 8).unwrap(), &cfg).unwrap();
    assert!(
        (r.best_j - best_triple).abs() < 1e-12,
        "{} vs {best_triple}",
        r.best_j
    );
}

#[test]
fn collective_subsystem_objective_closed_form() {
    // On the spin-1/2 block S_x^2 = S_z^2 = I, so J = 1 + (g_x + g_z)^2 dt^2 / 4.
    let u = collective_dfs_encoding_n3();
    let dims = EncodingDims::new(2, 2, 8).unwrap();
    for (gx, gz, dt) in [(1.0, 1.0, 1e-3), (0.3, 2.0, 1e-2), (1.5, 0.0, 5e-3)] {
        let ch = lindblad_to_kraus(&collective_xz(3, gx, gz).unwrap(), dt).unwrap();
        let j = Objective::new(&ch, dims).unwrap().value_at_unitary(&u);
        let want = 1.0 + (gx + gz) * (gx + gz) * dt * dt / 4.0;
        assert!((j - want).abs() < 1e-14, "{j} vs {want}");
    }
}

#[test]
fn single_qubit_dephasing_worst_case() {
    let dims = EncodingDims::new(2, 1, 2).unwrap();
    for (gamma, t) in [(1.0, 1.0), (0.2, 0.5), (3.0, 0.05), (0.7, 2.0)] {
        let model = LindbladModel::new(
            1,
            vec![LindbladTerm {
                rate: gamma,
                operator: pauli_z(),
            }],
        )
        .unwrap();
        let wc = worst_case_fidelity(
            &mns_core::tensor_algebra::identity(2),
            dims,
            &evolve(&model, t).unwrap(),
        )
        .unwrap()
        .fidelity;
        let want = 0.5 * (1.0 + (-2.0 * gamma * t).exp());
        assert!(
            (wc - want).abs() < 1e-6,
            "gamma {gamma} t {t}: {wc} vs {want}"
        );
    }
}

#[test]
fn single_qubit_decay_worst_case() {
    // Fidelity of decay |1> -> |0> is concave in |<1|psi>|^2, so the minimum
    // sits at |1> and equals exp(-gamma t).
    let lower = ComplexMatrix::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO]);
    let dims = EncodingDims::new(2, 1, 2).unwrap();
    for (gamma, t) in [(1.0, 1.0), (0.4, 0.3)] {
        let model = LindbladModel::new(
            1,
            vec![LindbladTerm {
                rate: gamma,
                operator: lower.clone(),
            }],
        )
        .unwrap();
        let wc = worst_case_fidelity(
            &mns_core::tensor_algebra::identity(2),
            dims,
            &evolve(&model, t).unwrap(),
        )
        .unwrap();
        assert!((wc.fidelity - (-gamma * t).exp()).abs() < 1e-6);
        assert!(wc.state[1].norm() > 1.0 - 1e-3);
    }
}

#[test]
fn noiseless_model_gives_unit_objective_everywhere() {
    let model = LindbladModel::noiseless(3).unwrap();
    let ch = lindblad_to_kraus(&model, model.default_dt()).unwrap();
    let cfg = SearchConfig {
        num_restarts: 2,
        candidate_dims: vec![(2, 1), (2, 4), (3, 2)],
        ..SearchConfig::default()
    };
    for r in find_mns(&ch, &cfg).unwrap() {
        assert!((r.best_j - 1.0).abs() < 1e-12, "{}: {}", r.dims, r.best_j);
        assert!(r.is_dfs);
    }
    let ident = KrausChannel::identity(8);
    assert!(find_mns(&ident, &cfg)
        .unwrap()
        .iter()
        .all(|r| (r.best_j - 1.0).abs() < 1e-12));
}

#[test]
fn search_is_independent_of_thread_count() {
    let model = collective_z_with_local_dephasing(3, 1.0, 0.1, &[0.33, 0.47, 0.85]).unwrap();
    let ch = lindblad_to_kraus(&model, model.default_dt()).unwrap();
    let cfg = SearchConfig {
        num_restarts: 6,
        seed: 42,
        candidate_dims: vec![(2, 1)],
        ..SearchConfig::default()
    };
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| find_mns(&ch, &cfg).unwrap())
    };
    assert_eq!(run(1), run(4));
}

use normgap::ensembles::{sample_haar, EnsembleKind, EnsembleSpec};
use normgap::harness::{build_direct_sum, direct_sum_min_norm, estimate_cn, TupleSequence};
use normgap::{SolverParams, UnitaryTuple};
use proptest::prelude::*;

fn sup(seq: &TupleSequence) -> f64 {
    let est = estimate_cn(seq, &SolverParams::default(), 1).unwrap();
    assert_eq!(est.unconverged, 0);
    est.sup_offdiag.unwrap()
}

fn with_tuples(seq: &TupleSequence, tuples: Vec<UnitaryTuple>) -> TupleSequence {
    TupleSequence::new(tuples, seq.provenance().to_vec()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn sup_grows_with_sequence(n in 2usize..5, dim in 2usize..7, count in 3usize..6, seed in any::<u64>()) {
        let full = TupleSequence::sample(EnsembleKind::Haar, n, &vec![dim; count], seed).unwrap();
        let prefix = TupleSequence::new(full.tuples()[..count - 1].to_vec(), full.provenance()[..count - 1].to_vec()).unwrap();
        prop_assert!(sup(&prefix) <= sup(&full) + 1e-8);
    }

    #[test]
    fn pair_norms_are_exchange_symmetric(n in 1usize..4, count in 2usize..5, seed in any::<u64>(), perm in any::<bool>()) {
        let kind = if perm { EnsembleKind::PermutationComplement } else { EnsembleKind::Haar };
        let seq = TupleSequence::sample(kind, n, &vec![4; count], seed).unwrap();
        let est = estimate_cn(&seq, &SolverParams::default(), 1).unwrap();
        for p in &est.pair_norms {
            let q = est.pair_norms.iter().find(|q| q.m == p.m_prime && q.m_prime == p.m).unwrap();
            prop_assert!((p.estimate.value - q.estimate.value).abs() < 1e-8);
        }
        prop_assert!(est.diag_max_deviation < 1e-8);
    }

    /// Multiplying every matrix of member `m` by a fixed unitary `W_m` on
    /// the left leaves every pair norm unchanged.
    #[test]
    fn left_multiplication_leaves_sup_unchanged(n in 1usize..4, dim in 1usize..6, seed in any::<u64>()) {
        let seq = TupleSequence::sample(EnsembleKind::Haar, n, &[dim, dim, dim], seed).unwrap();
        let moved: Vec<UnitaryTuple> = seq
            .tuples()
            .iter()
            .enumerate()
            .map(|(m, t)| {
                let w = sample_haar(1, dim, seed ^ (m as u64 + 100)).matrix(0).clone();
                t.map(|u| w.multiply(u).unwrap()).unwrap()
            })
            .collect();
        let a = sup(&seq);
        let b = sup(&with_tuples(&seq, moved));
        prop_assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    }

    #[test]
    fn direct_sum_norm_grows_with_blocks(n in 1usize..4, dims in prop::collection::vec(1usize..6, 3..6), seed in any::<u64>()) {
        let seq = TupleSequence::sample(EnsembleKind::Haar, n, &dims, seed).unwrap();
        let t = seq.tuples();
        let k = t.len();
        let right = build_direct_sum(t[k - 1..].to_vec()).unwrap();
        let small = build_direct_sum(t[..k - 2].to_vec()).unwrap();
        let large = build_direct_sum(t[..k - 1].to_vec()).unwrap();
        let p = SolverParams::default();
        let a = direct_sum_min_norm(&small, &right, &p, 1).unwrap().value;
        let b = direct_sum_min_norm(&large, &right, &p, 1).unwrap().value;
        prop_assert!(a <= b + 1e-8, "{a} > {b}");
        let swapped = direct_sum_min_norm(&right, &large, &p, 1).unwrap().value;
        prop_assert!((swapped - b).abs() < 1e-8, "{swapped} vs {b}");
    }
}

#[test]
fn provenance_records_each_sample() {
    let seq = TupleSequence::sample(EnsembleKind::Haar, 2, &[3, 4], 5).unwrap();
    let p: &[EnsembleSpec] = seq.provenance();
    assert_eq!(p.len(), 2);
    assert_eq!((p[0].dim, p[1].dim), (3, 4));
    assert_ne!(p[0].seed, p[1].seed);
}

#[test]
fn haar_sup_is_at_least_root_n() {
    let params = SolverParams { tol: 1e-6, restarts: 1, ..SolverParams::default() };
    for n in 2..=6 {
        let seq = TupleSequence::sample(EnsembleKind::Haar, n, &[100, 100], 31 + n as u64).unwrap();
        let est = estimate_cn(&seq, &params, 1).unwrap();
        let c = est.sup_offdiag.unwrap();
        assert!(c >= (n as f64).sqrt() - 0.2, "n={n}: {c}");
    }
}

/// Four independent Haar tuples, n = 4, N = 150: the empirical constant
/// sits near 2 sqrt(3) = 3.4641.
#[test]
fn four_haar_tuples_concentrate() {
    let params = SolverParams { tol: 1e-4, restarts: 1, ..SolverParams::default() };
    let seq = TupleSequence::sample(EnsembleKind::Haar, 4, &[150; 4], 8).unwrap();
    let est = estimate_cn(&seq, &params, 1).unwrap();
    assert_eq!(est.unconverged, 0);
    let c = est.sup_offdiag.unwrap();
    assert!((3.2..=3.9).contains(&c), "{c}");
    assert!((est.reference - 3.4641016151377544).abs() < 1e-12);
}

//! Desk-scale experiments on sequences of unitary tuples: the empirical
//! constant `sup_{m != m'} ||sum_i u_i(m) ⊗ conj(u_i(m'))||_min`, tensors
//! built from two direct sums, and the min/max ratio report.
//!
//! The max norm is never computed. For direct sums over two halves of a
//! sequence whose distributions converge, it equals `n`; the report carries
//! that value next to the measured distance between the halves'
//! distributions, which is what a finite run can actually say.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensembles::{sequence_seed, EnsembleKind, EnsembleSpec};
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, UnitaryTuple};
use crate::rng::{self, domain};
use crate::superop::{
    dense_norm_oracle, min_norm, pair_norm, BimultiplicationOperator, NormEstimate, SolverParams,
};
use crate::words::{distance, moment_table, sampled_moment_table, DistributionDistance, MomentTable};

/// `2 sqrt(n - 1)`, the limit of the off-diagonal norms for good sequences.
pub fn asymptotic_constant(n: usize) -> f64 {
    2.0 * (n.saturating_sub(1) as f64).sqrt()
}

/// Lower bound `n / (2 sqrt(n - 1))` for the ratio over rank-`n` tensors;
/// undefined for `n = 1`.
pub fn rank_ratio_lower_bound(n: usize) -> Option<f64> {
    (n >= 2).then(|| n as f64 / asymptotic_constant(n))
}

/// Upper bound `sqrt(n)` for the same ratio.
pub fn rank_ratio_upper_bound(n: usize) -> f64 {
    (n as f64).sqrt()
}

#[derive(Clone, Debug)]
pub struct TupleSequence {
    tuples: Vec<UnitaryTuple>,
    provenance: Vec<EnsembleSpec>,
}

impl TupleSequence {
    pub fn new(tuples: Vec<UnitaryTuple>, provenance: Vec<EnsembleSpec>) -> Result<Self> {
        let Some(first) = tuples.first() else {
            return Err(Error::Invalid("empty tuple sequence".into()));
        };
        if let Some(bad) = tuples.iter().find(|t| t.n() != first.n()) {
            return Err(Error::Shape(format!("tuple lengths differ: {} vs {}", first.n(), bad.n())));
        }
        if provenance.len() != tuples.len() {
            return Err(Error::Invalid("one provenance entry per tuple required".into()));
        }
        Ok(TupleSequence { tuples, provenance })
    }

    /// Tuple `m` is drawn with seed `sequence_seed(seed, m)`.
    pub fn sample(kind: EnsembleKind, n: usize, dims: &[usize], seed: u64) -> Result<Self> {
        let specs: Vec<EnsembleSpec> = dims
            .iter()
            .enumerate()
            .map(|(m, &dim)| EnsembleSpec { kind, n, dim, seed: sequence_seed(seed, m), path: None })
            .collect();
        let tuples = specs.iter().map(EnsembleSpec::sample).collect::<Result<Vec<_>>>()?;
        Self::new(tuples, specs)
    }

    pub fn load(paths: &[std::path::PathBuf]) -> Result<Self> {
        let specs: Vec<EnsembleSpec> = paths.iter().map(EnsembleSpec::file).collect();
        let tuples = specs.iter().map(EnsembleSpec::sample).collect::<Result<Vec<_>>>()?;
        Self::new(tuples, specs)
    }

    pub fn tuples(&self) -> &[UnitaryTuple] {
        &self.tuples
    }

    pub fn provenance(&self) -> &[EnsembleSpec] {
        &self.provenance
    }

    pub fn n(&self) -> usize {
        self.tuples[0].n()
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    /// First `split` tuples and the rest, as direct sums.
    pub fn split(&self, split: usize) -> Result<(BlockTuple, BlockTuple)> {
        if split == 0 || split >= self.len() {
            return Err(Error::Invalid(format!(
                "split {split} must leave both halves nonempty (sequence length {})",
                self.len()
            )));
        }
        Ok((
            BlockTuple::new(self.tuples[..split].to_vec())?,
            BlockTuple::new(self.tuples[split..].to_vec())?,
        ))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairNorm {
    pub m: usize,
    pub m_prime: usize,
    #[serde(flatten)]
    pub estimate: NormEstimate,
}

/// Computes the norms of all `(left m, right m')` pairs in `pairs`, with
/// per-pair solver seeds, on at most `jobs` threads. Output order follows
/// `pairs` regardless of scheduling.
fn pair_norms(
    left: &[UnitaryTuple],
    right: &[UnitaryTuple],
    pairs: &[(usize, usize)],
    params: &SolverParams,
    jobs: usize,
) -> Result<Vec<PairNorm>> {
    let stride = right.len() as u64;
    let run = |&(m, mp): &(usize, usize)| -> Result<PairNorm> {
        let seed = rng::derive_seed(params.seed, domain::PAIR_JOB, m as u64 * stride + mp as u64);
        let estimate = pair_norm(&left[m], &right[mp], &params.with_seed(seed))?;
        Ok(PairNorm { m, m_prime: mp, estimate })
    };
    if jobs <= 1 {
        return pairs.iter().map(run).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?;
    pool.install(|| pairs.par_iter().map(run).collect())
}

/// Max over converged entries; ties within 1e-10 go to the
/// lexicographically smallest pair. Falls back to all entries when none
/// converged.
fn sup_pair(norms: &[PairNorm]) -> Option<&PairNorm> {
    let pick = |converged_only: bool| {
        let pool: Vec<&PairNorm> = norms.iter().filter(|p| !converged_only || p.estimate.converged).collect();
        let top = pool.iter().map(|p| p.estimate.value).fold(f64::NEG_INFINITY, f64::max);
        pool.into_iter()
            .filter(|p| p.estimate.value >= top - 1e-10)
            .min_by_key(|p| (p.m, p.m_prime))
    };
    pick(true).or_else(|| pick(false))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CnEstimate {
    pub n: usize,
    /// Sup of the converged off-diagonal norms.
    pub sup_offdiag: Option<f64>,
    pub pair_norms: Vec<PairNorm>,
    pub diag_norms: Vec<PairNorm>,
    /// `2 sqrt(n - 1)`.
    pub reference: f64,
    /// Number of unconverged solves (off-diagonal and diagonal).
    pub unconverged: usize,
    /// Largest `|diag norm - n|`; should be at solver precision.
    pub diag_max_deviation: f64,
}

impl CnEstimate {
    pub fn write_pair_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["m", "m_prime", "value", "residual", "iterations", "converged"])
            .map_err(csv_error)?;
        for p in &self.pair_norms {
            w.write_record([
                p.m.to_string(),
                p.m_prime.to_string(),
                p.estimate.value.to_string(),
                p.estimate.residual.to_string(),
                p.estimate.iterations.to_string(),
                p.estimate.converged.to_string(),
            ])
            .map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Invalid(format!("csv: {other:?}")),
    }
}

/// Min norms of `sum_i u_i(m) ⊗ conj(u_i(m'))` for every ordered pair,
/// diagonal included as a sanity column.
pub fn estimate_cn(seq: &TupleSequence, params: &SolverParams, jobs: usize) -> Result<CnEstimate> {
    if seq.len() < 2 {
        return Err(Error::Invalid(format!("need at least 2 tuples, got {}", seq.len())));
    }
    let len = seq.len();
    let all: Vec<(usize, usize)> = (0..len).flat_map(|m| (0..len).map(move |mp| (m, mp))).collect();
    let norms = pair_norms(seq.tuples(), seq.tuples(), &all, params, jobs)?;
    let (diag_norms, pair_norms): (Vec<PairNorm>, Vec<PairNorm>) = norms.into_iter().partition(|p| p.m == p.m_prime);
    let n = seq.n();
    let unconverged = diag_norms.iter().chain(&pair_norms).filter(|p| !p.estimate.converged).count();
    let sup_offdiag = pair_norms
        .iter()
        .filter(|p| p.estimate.converged)
        .map(|p| p.estimate.value)
        .reduce(f64::max);
    let diag_max_deviation = diag_norms
        .iter()
        .map(|p| (p.estimate.value - n as f64).abs())
        .fold(0.0, f64::max);
    Ok(CnEstimate {
        n,
        sup_offdiag,
        pair_norms,
        diag_norms,
        reference: asymptotic_constant(n),
        unconverged,
        diag_max_deviation,
    })
}

/// `u_i = ⊕_m u_i(m)`, kept as its list of blocks.
#[derive(Clone, Debug)]
pub struct BlockTuple {
    blocks: Vec<UnitaryTuple>,
    n: usize,
    total_dim: usize,
}

impl BlockTuple {
    pub fn new(blocks: Vec<UnitaryTuple>) -> Result<Self> {
        let first = blocks.first().ok_or_else(|| Error::Invalid("direct sum of no blocks".into()))?;
        let n = first.n();
        if let Some(bad) = blocks.iter().find(|b| b.n() != n) {
            return Err(Error::Shape(format!("block tuple lengths differ: {n} vs {}", bad.n())));
        }
        let total_dim = blocks.iter().map(UnitaryTuple::dim).sum();
        Ok(BlockTuple { blocks, n, total_dim })
    }

    pub fn blocks(&self) -> &[UnitaryTuple] {
        &self.blocks
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    /// Block-diagonal matrices of size `total_dim`.
    pub fn dense(&self) -> Result<UnitaryTuple> {
        let matrices = (0..self.n)
            .map(|i| {
                let mut out = ComplexMatrix::zeros(self.total_dim, self.total_dim);
                let mut offset = 0;
                for b in &self.blocks {
                    let m = b.matrix(i);
                    for r in 0..b.dim() {
                        for c in 0..b.dim() {
                            out.set(offset + r, offset + c, m.get(r, c));
                        }
                    }
                    offset += b.dim();
                }
                out
            })
            .collect();
        let label = format!("direct sum of {} blocks", self.blocks.len());
        UnitaryTuple::new(matrices, label)
    }

    /// Moment table of the direct sum, computed block by block.
    pub fn moment_table(&self, degree: usize, words: WordSelection) -> Result<MomentTable> {
        let tables = self
            .blocks
            .iter()
            .map(|b| match words {
                WordSelection::All => moment_table(b, degree),
                WordSelection::Sampled { count, seed } => sampled_moment_table(b, degree, count, seed),
            })
            .collect::<Result<Vec<_>>>()?;
        MomentTable::direct_sum(&tables)
    }
}

/// Which reduced words enter a moment table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum WordSelection {
    #[default]
    All,
    Sampled { count: usize, seed: u64 },
}

pub fn build_direct_sum(blocks: Vec<UnitaryTuple>) -> Result<BlockTuple> {
    BlockTuple::new(blocks)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectSumNorm {
    pub value: f64,
    /// Block pair `(m, m')` attaining the value.
    pub witness: (usize, usize),
    pub pairs: Vec<PairNorm>,
    pub unconverged: usize,
}

/// Min norm of `t = sum_i u_i(α) ⊗ conj(u_i(β))`. Every rectangular block
/// `X_{m,m'}` is invariant under the bimultiplication operator of `t`, so
/// the norm is the max over block pairs of the pair norms.
pub fn direct_sum_min_norm(
    a: &BlockTuple,
    b: &BlockTuple,
    params: &SolverParams,
    jobs: usize,
) -> Result<DirectSumNorm> {
    if a.n != b.n {
        return Err(Error::Shape(format!("direct sums differ in n: {} vs {}", a.n, b.n)));
    }
    let pairs: Vec<(usize, usize)> = (0..a.blocks.len())
        .flat_map(|m| (0..b.blocks.len()).map(move |mp| (m, mp)))
        .collect();
    let norms = pair_norms(&a.blocks, &b.blocks, &pairs, params, jobs)?;
    let best = sup_pair(&norms).expect("at least one block pair");
    Ok(DirectSumNorm {
        value: best.estimate.value,
        witness: (best.m, best.m_prime),
        unconverged: norms.iter().filter(|p| !p.estimate.converged).count(),
        pairs: norms,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub n: usize,
    /// Min norm of the direct-sum tensor.
    pub c_emp: f64,
    pub witness: (usize, usize),
    /// `n / c_emp`; a certified ratio only if the two halves share a
    /// limit distribution. `None` when `c_emp = 0`.
    pub ratio_lower_bound: Option<f64>,
    /// `n / (2 sqrt(n - 1))`, `None` for `n = 1`.
    pub known_ratio_lower: Option<f64>,
    /// `sqrt(n)`.
    pub known_ratio_upper: f64,
    /// Max norm of `t` under equal limit distributions. Not computed.
    pub max_norm_if_limits_agree: f64,
    /// Distance between the halves' moment tables.
    pub distribution_gap: DistributionDistance,
    pub unconverged: usize,
}

pub fn ratio_report(
    a: &BlockTuple,
    b: &BlockTuple,
    degree: usize,
    words: WordSelection,
    params: &SolverParams,
    jobs: usize,
) -> Result<RatioReport> {
    let norm = direct_sum_min_norm(a, b, params, jobs)?;
    let gap = distance(&a.moment_table(degree, words)?, &b.moment_table(degree, words)?)?;
    let n = a.n;
    Ok(RatioReport {
        n,
        c_emp: norm.value,
        witness: norm.witness,
        ratio_lower_bound: (norm.value > 0.0).then(|| n as f64 / norm.value),
        known_ratio_lower: rank_ratio_lower_bound(n),
        known_ratio_upper: rank_ratio_upper_bound(n),
        max_norm_if_limits_agree: n as f64,
        distribution_gap: gap,
        unconverged: norm.unconverged,
    })
}

/// Largest tuple length and dimension drawn by [`oracle_suite`].
pub const ORACLE_MAX_N: usize = 3;
pub const ORACLE_MAX_DIM: usize = 6;

/// Iterative min norm against the dense SVD oracle for one pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleInstance {
    pub label: String,
    pub n: usize,
    pub left_dim: usize,
    pub right_dim: usize,
    pub iterative: f64,
    pub dense: f64,
    pub discrepancy: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleSummary {
    pub instances: Vec<OracleInstance>,
    pub max_discrepancy: f64,
    pub unconverged: usize,
}

impl OracleSummary {
    pub fn from_instances(instances: Vec<OracleInstance>) -> Self {
        OracleSummary {
            max_discrepancy: instances.iter().fold(0.0, |m, i| m.max(i.discrepancy)),
            unconverged: instances.iter().filter(|i| !i.converged).count(),
            instances,
        }
    }
}

pub fn oracle_instance(
    left: &UnitaryTuple,
    right: &UnitaryTuple,
    params: &SolverParams,
    label: impl Into<String>,
) -> Result<OracleInstance> {
    let op = BimultiplicationOperator::new(left.clone(), right.clone())?;
    let dense = dense_norm_oracle(&op)?;
    let est = min_norm(&op, params)?;
    Ok(OracleInstance {
        label: label.into(),
        n: left.n(),
        left_dim: left.dim(),
        right_dim: right.dim(),
        iterative: est.value,
        dense,
        discrepancy: (est.value - dense).abs(),
        converged: est.converged,
    })
}

/// `instances` random pairs with `n <= 3` and dimensions in `2..=6`,
/// alternating Haar and permutation-complement tuples.
pub fn oracle_suite(instances: usize, seed: u64, params: &SolverParams) -> Result<OracleSummary> {
    let mut out = Vec::with_capacity(instances);
    for r in 0..instances {
        let mut g = rng::stream(seed, domain::ORACLE_INSTANCE, r as u64);
        let kind = if r % 2 == 0 { EnsembleKind::Haar } else { EnsembleKind::PermutationComplement };
        let n = g.random_range(1..=ORACLE_MAX_N);
        let (da, db) = (g.random_range(2..=ORACLE_MAX_DIM), g.random_range(2..=ORACLE_MAX_DIM));
        let left = EnsembleSpec { kind, n, dim: da, seed: g.random(), path: None }.sample()?;
        let right = EnsembleSpec { kind, n, dim: db, seed: g.random(), path: None }.sample()?;
        let p = params.with_seed(g.random());
        out.push(oracle_instance(&left, &right, &p, format!("#{r} {kind} n={n} {da}x{db}"))?);
    }
    Ok(OracleSummary::from_instances(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::sample_haar;
    use crate::linalg::{check_unitary, C64};
    use crate::superop::dense_norm_oracle;

    fn ids(n: usize, dim: usize) -> UnitaryTuple {
        UnitaryTuple::new(vec![ComplexMatrix::identity(dim); n], "I").unwrap()
    }

    fn plus_minus(dim: usize) -> UnitaryTuple {
        let minus = ComplexMatrix::identity(dim).scale(C64::new(-1.0, 0.0));
        UnitaryTuple::new(vec![ComplexMatrix::identity(dim), minus], "I,-I").unwrap()
    }

    #[test]
    fn reference_constants() {
        assert_eq!(asymptotic_constant(2), 2.0);
        assert!((rank_ratio_lower_bound(4).unwrap() - 1.1547005383792517).abs() < 1e-15);
        assert_eq!(rank_ratio_upper_bound(4), 2.0);
        assert_eq!(rank_ratio_lower_bound(1), None);
    }

    #[test]
    fn identical_tuples_give_n() {
        let u = sample_haar(3, 5, 1);
        let seq = TupleSequence::new(vec![u.clone(), u], vec![EnsembleSpec::haar(3, 5, 1); 2]).unwrap();
        let est = estimate_cn(&seq, &SolverParams::default(), 1).unwrap();
        assert_eq!(est.pair_norms.len(), 2);
        assert_eq!(est.diag_norms.len(), 2);
        assert!((est.sup_offdiag.unwrap() - 3.0).abs() < 1e-8);
        assert!(est.diag_max_deviation < 1e-8);
        assert_eq!(est.unconverged, 0);
    }

    #[test]
    fn estimate_cn_needs_two_tuples() {
        let seq = TupleSequence::sample(EnsembleKind::Haar, 2, &[3], 0).unwrap();
        assert!(estimate_cn(&seq, &SolverParams::default(), 1).is_err());
    }

    #[test]
    fn parallel_jobs_match_sequential() {
        let seq = TupleSequence::sample(EnsembleKind::Haar, 2, &[4, 5, 3], 7).unwrap();
        let p = SolverParams::default();
        assert_eq!(estimate_cn(&seq, &p, 1).unwrap(), estimate_cn(&seq, &p, 3).unwrap());
    }

    #[test]
    fn direct_sum_shapes() {
        let a = sample_haar(2, 2, 1);
        let single = build_direct_sum(vec![a.clone()]).unwrap();
        assert_eq!(single.dense().unwrap().matrices(), a.matrices());
        let two = build_direct_sum(vec![a.clone(), sample_haar(2, 2, 2)]).unwrap();
        let dense = two.dense().unwrap();
        assert_eq!(dense.dim(), 4);
        assert!(check_unitary(&dense, 1e-10).unitary);
        assert_eq!(dense.matrix(1).get(0, 3), C64::new(0.0, 0.0));
        assert!(build_direct_sum(vec![a, sample_haar(3, 2, 2)]).is_err());
    }

    #[test]
    fn direct_sum_norm_picks_identical_pair() {
        // (I,I) vs (I,-I) cancels; the identical pair gives 2.
        let a = build_direct_sum(vec![ids(2, 2), plus_minus(3)]).unwrap();
        let b = build_direct_sum(vec![plus_minus(2)]).unwrap();
        let r = direct_sum_min_norm(&a, &b, &SolverParams::default(), 1).unwrap();
        assert!((r.value - 2.0).abs() < 1e-9);
        assert_eq!(r.witness, (1, 0));
        assert!(r.pairs[0].estimate.value < 1e-9);
    }

    #[test]
    fn direct_sum_norm_matches_dense() {
        let a = build_direct_sum(vec![sample_haar(2, 2, 1), sample_haar(2, 3, 2)]).unwrap();
        let b = build_direct_sum(vec![sample_haar(2, 3, 3), sample_haar(2, 1, 4)]).unwrap();
        let r = direct_sum_min_norm(&a, &b, &SolverParams::default(), 1).unwrap();
        let op = BimultiplicationOperator::new(a.dense().unwrap(), b.dense().unwrap()).unwrap();
        assert!((r.value - dense_norm_oracle(&op).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn ratio_report_identical_single_block() {
        let u = sample_haar(4, 4, 3);
        let a = build_direct_sum(vec![u.clone()]).unwrap();
        let r = ratio_report(&a, &a.clone(), 3, WordSelection::All, &SolverParams::default(), 1).unwrap();
        assert!((r.c_emp - 4.0).abs() < 1e-8);
        assert!((r.ratio_lower_bound.unwrap() - 1.0).abs() < 1e-8);
        assert_eq!(r.distribution_gap.value, 0.0);
        assert!((r.known_ratio_lower.unwrap() - 1.1547).abs() < 1e-4);
        assert_eq!(r.known_ratio_upper, 2.0);
        assert_eq!(r.max_norm_if_limits_agree, 4.0);
    }

    #[test]
    fn blockwise_moments_match_dense() {
        let a = build_direct_sum(vec![sample_haar(2, 2, 5), sample_haar(2, 4, 6)]).unwrap();
        let blockwise = a.moment_table(3, WordSelection::All).unwrap();
        let dense = moment_table(&a.dense().unwrap(), 3).unwrap();
        assert!(distance(&blockwise, &dense).unwrap().value < 1e-13);
        let sampled = a.moment_table(5, WordSelection::Sampled { count: 50, seed: 1 }).unwrap();
        assert!(sampled.is_sampled());
    }

    #[test]
    fn split_validation() {
        let seq = TupleSequence::sample(EnsembleKind::Haar, 2, &[2, 2, 2], 0).unwrap();
        assert!(seq.split(0).is_err());
        assert!(seq.split(3).is_err());
        let (a, b) = seq.split(1).unwrap();
        assert_eq!(a.blocks().len(), 1);
        assert_eq!(b.total_dim(), 4);
    }

    #[test]
    fn pair_csv_columns() {
        let seq = TupleSequence::sample(EnsembleKind::Haar, 1, &[2, 2], 0).unwrap();
        let est = estimate_cn(&seq, &SolverParams::default(), 1).unwrap();
        let mut buf = Vec::new();
        est.write_pair_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("m,m_prime,value,residual,iterations,converged"));
        assert_eq!(lines.count(), 2);
    }

    #[test]
    fn oracle_suite_agrees_and_is_deterministic() {
        let a = oracle_suite(6, 11, &SolverParams::default()).unwrap();
        assert_eq!(a.instances.len(), 6);
        assert!(a.max_discrepancy < 1e-8, "{}", a.max_discrepancy);
        assert_eq!(a, oracle_suite(6, 11, &SolverParams::default()).unwrap());
        assert!(a.instances.iter().all(|i| i.n <= ORACLE_MAX_N && i.left_dim <= ORACLE_MAX_DIM));
    }
}

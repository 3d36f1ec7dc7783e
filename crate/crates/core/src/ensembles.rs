//! Random and file-backed sources of unitary tuples.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, UnitaryTuple, C64};
use crate::rng::{self, domain};
use crate::tuple_io;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnsembleKind {
    Haar,
    PermutationComplement,
    ExplicitFile,
}

impl fmt::Display for EnsembleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EnsembleKind::Haar => "haar",
            EnsembleKind::PermutationComplement => "permutation-complement",
            EnsembleKind::ExplicitFile => "explicit-file",
        })
    }
}

impl FromStr for EnsembleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "haar" => Ok(EnsembleKind::Haar),
            "permutation-complement" | "perm" => Ok(EnsembleKind::PermutationComplement),
            "explicit-file" | "file" => Ok(EnsembleKind::ExplicitFile),
            other => Err(Error::Invalid(format!("unknown ensemble kind {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub kind: EnsembleKind,
    pub n: usize,
    pub dim: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

impl EnsembleSpec {
    pub fn haar(n: usize, dim: usize, seed: u64) -> Self {
        EnsembleSpec { kind: EnsembleKind::Haar, n, dim, seed, path: None }
    }

    pub fn permutation_complement(n: usize, dim: usize, seed: u64) -> Self {
        EnsembleSpec { kind: EnsembleKind::PermutationComplement, n, dim, seed, path: None }
    }

    pub fn file(path: impl Into<PathBuf>) -> Self {
        EnsembleSpec { kind: EnsembleKind::ExplicitFile, n: 0, dim: 0, seed: 0, path: Some(path.into()) }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            EnsembleKind::ExplicitFile => {
                if self.path.is_none() {
                    return Err(Error::Invalid("explicit-file ensemble needs a path".into()));
                }
            }
            _ => {
                if self.n == 0 || self.dim == 0 {
                    return Err(Error::Invalid(format!(
                        "n and dim must be positive (n={}, dim={})",
                        self.n, self.dim
                    )));
                }
                if self.kind == EnsembleKind::PermutationComplement && self.dim < 2 {
                    return Err(Error::Invalid("permutation-complement needs dim >= 2".into()));
                }
            }
        }
        Ok(())
    }

    pub fn sample(&self) -> Result<UnitaryTuple> {
        self.validate()?;
        match self.kind {
            EnsembleKind::Haar => Ok(sample_haar(self.n, self.dim, self.seed)),
            EnsembleKind::PermutationComplement => {
                Ok(sample_permutation_complement(self.n, self.dim, self.seed))
            }
            EnsembleKind::ExplicitFile => tuple_io::load_tuple(self.path.as_ref().unwrap()),
        }
    }
}

/// One Haar unitary from the given stream: Ginibre matrix, QR, then the
/// columns of Q rotated by the phases of diag(R).
fn haar_unitary(dim: usize, rng: &mut impl Rng) -> ComplexMatrix {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let entries: Vec<C64> = (0..dim * dim)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            C64::new(re * scale, im * scale)
        })
        .collect();
    let ginibre = DMatrix::from_row_slice(dim, dim, &entries);
    let qr = ginibre.qr();
    let q = qr.q();
    let r = qr.r();
    let phases: Vec<C64> = (0..dim)
        .map(|j| {
            let d = r[(j, j)];
            if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) }
        })
        .collect();
    let mut out = ComplexMatrix::zeros(dim, dim);
    for row in 0..dim {
        for col in 0..dim {
            out.set(row, col, q[(row, col)] * phases[col]);
        }
    }
    out
}

/// `n` independent Haar unitaries; matrix `i` uses the stream
/// `derive_seed(seed, HAAR_MATRIX, i)`.
pub fn sample_haar(n: usize, dim: usize, seed: u64) -> UnitaryTuple {
    let matrices = (0..n)
        .map(|i| haar_unitary(dim, &mut rng::stream(seed, domain::HAAR_MATRIX, i as u64)))
        .collect();
    UnitaryTuple::new(matrices, format!("haar n={n} N={dim} seed={seed}"))
        .expect("QR factor of a Ginibre matrix is unitary")
}

/// Columns 2..=d+1 of the Householder reflection sending `e_1` to the unit
/// all-ones vector in `R^{d+1}`: an isometry onto the complement of ones.
/// Returned row-major, `(d+1) x d`.
fn complement_isometry(dim: usize) -> Vec<f64> {
    let points = dim + 1;
    let c = 1.0 / (points as f64).sqrt();
    let mut w = vec![-c; points];
    w[0] += 1.0;
    let w_norm_sq: f64 = w.iter().map(|x| x * x).sum();
    let mut v = vec![0.0; points * dim];
    for r in 0..points {
        for col in 0..dim {
            let k = col + 1;
            let delta = if r == k { 1.0 } else { 0.0 };
            v[r * dim + col] = delta - 2.0 * w[r] * w[k] / w_norm_sq;
        }
    }
    v
}

/// `V^T P V` for each permutation `sigma` of `{0..=dim}`, where `P e_j =
/// e_{sigma(j)}`.
pub fn permutation_complement(
    permutations: &[Vec<usize>],
    dim: usize,
    label: impl Into<String>,
) -> Result<UnitaryTuple> {
    if dim < 2 {
        return Err(Error::Invalid("permutation-complement needs dim >= 2".into()));
    }
    let points = dim + 1;
    let v = complement_isometry(dim);
    let mut matrices = Vec::with_capacity(permutations.len());
    for sigma in permutations {
        let mut seen = vec![false; points];
        if sigma.len() != points || sigma.iter().any(|&s| s >= points || std::mem::replace(&mut seen[s], true)) {
            return Err(Error::Invalid(format!("not a permutation of {points} points")));
        }
        let mut u = ComplexMatrix::zeros(dim, dim);
        for a in 0..dim {
            for b in 0..dim {
                let mut acc = 0.0;
                for (j, &s) in sigma.iter().enumerate() {
                    acc += v[s * dim + a] * v[j * dim + b];
                }
                u.set(a, b, C64::new(acc, 0.0));
            }
        }
        matrices.push(u);
    }
    UnitaryTuple::new(matrices, label)
}

/// `n` independent uniform permutations of `dim + 1` points restricted to
/// the complement of the all-ones vector; permutation `i` uses the stream
/// `derive_seed(seed, PERMUTATION, i)`.
pub fn sample_permutation_complement(n: usize, dim: usize, seed: u64) -> UnitaryTuple {
    let perms: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let mut rng = rng::stream(seed, domain::PERMUTATION, i as u64);
            let mut p: Vec<usize> = (0..=dim).collect();
            p.shuffle(&mut rng);
            p
        })
        .collect();
    permutation_complement(&perms, dim, format!("permutation-complement n={n} N={dim} seed={seed}"))
        .expect("restriction of a permutation to an invariant subspace is unitary")
}

/// Seed of tuple `m` in a sequence drawn under `seed`.
pub fn sequence_seed(seed: u64, m: usize) -> u64 {
    rng::derive_seed(seed, domain::SEQUENCE_TUPLE, m as u64)
}

/// A sequence of independent tuples, one per entry of `dims`.
pub fn sample_sequence(kind: EnsembleKind, n: usize, dims: &[usize], seed: u64) -> Result<Vec<UnitaryTuple>> {
    dims.iter()
        .enumerate()
        .map(|(m, &dim)| EnsembleSpec { kind, n, dim, seed: sequence_seed(seed, m), path: None }.sample())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::check_unitary;

    #[test]
    fn haar_scalar_is_unimodular() {
        for seed in 0..5 {
            let t = sample_haar(1, 1, seed);
            assert!((t.matrix(0).get(0, 0).norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn haar_is_unitary_and_deterministic() {
        let t = sample_haar(3, 17, 42);
        assert!(check_unitary(&t, 1e-10).unitary);
        assert_eq!(t, sample_haar(3, 17, 42));
        assert_ne!(t, sample_haar(3, 17, 43));
    }

    #[test]
    fn haar_streams_are_independent_per_matrix() {
        // Matrix i depends only on (seed, i): a shorter tuple is a prefix.
        let long = sample_haar(4, 6, 9);
        let short = sample_haar(2, 6, 9);
        assert_eq!(long.matrix(0), short.matrix(0));
        assert_eq!(long.matrix(1), short.matrix(1));
        assert_ne!(long.matrix(0), long.matrix(1));
    }

    #[test]
    fn haar_trace_second_moment_is_small() {
        // E|tr(u)/N|^2 = 1/N^2 for Haar u.
        let dim = 50;
        let samples = 200;
        let mean: f64 = (0..samples)
            .map(|s| sample_haar(1, dim, s).matrix(0).normalized_trace().unwrap().norm_sqr())
            .sum::<f64>()
            / samples as f64;
        assert!(mean < 0.005, "mean {mean}");
    }

    #[test]
    fn permutation_complement_is_unitary() {
        for seed in 0..5 {
            let t = sample_permutation_complement(3, 9, seed);
            assert!(check_unitary(&t, 1e-10).unitary);
            assert_eq!(t, sample_permutation_complement(3, 9, seed));
        }
    }

    #[test]
    fn identity_permutation_gives_identity() {
        let id: Vec<usize> = (0..6).collect();
        let t = permutation_complement(&[id], 5, "id").unwrap();
        let diff = t.matrix(0).sub(&ComplexMatrix::identity(5)).unwrap();
        assert!(diff.max_abs() < 1e-14);
    }

    #[test]
    fn permutation_complement_trace_counts_fixed_points() {
        // The permutation representation is (trivial) + (complement), so
        // tr(u) = #fixed points - 1 and in particular it is real.
        let sigma = vec![1, 0, 2, 3, 5, 4];
        let t = permutation_complement(&[sigma], 5, "").unwrap();
        let tr = t.matrix(0).trace().unwrap();
        assert!(tr.im.abs() < 1e-12);
        assert!((tr.re - 1.0).abs() < 1e-12);
        let t = sample_permutation_complement(2, 20, 3);
        for u in t.matrices() {
            assert!(u.normalized_trace().unwrap().im.abs() < 1e-12);
        }
    }

    #[test]
    fn spec_validation() {
        assert!(EnsembleSpec::permutation_complement(2, 1, 0).sample().is_err());
        assert!(EnsembleSpec::haar(0, 3, 0).sample().is_err());
        assert!(EnsembleSpec { kind: EnsembleKind::ExplicitFile, n: 1, dim: 1, seed: 0, path: None }
            .validate()
            .is_err());
        assert_eq!("haar".parse::<EnsembleKind>().unwrap(), EnsembleKind::Haar);
        assert!("gue".parse::<EnsembleKind>().is_err());
    }

    #[test]
    fn bad_permutation_rejected() {
        assert!(permutation_complement(&[vec![0, 0, 1]], 2, "").is_err());
        assert!(permutation_complement(&[vec![0, 1]], 2, "").is_err());
    }
}

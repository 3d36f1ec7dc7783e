//! Largest eigenpair of a positive semidefinite Hermitian operator given
//! only as a matvec closure.
//!
//! Lanczos with full (two-pass classical Gram–Schmidt) reorthogonalization
//! and thick restart: when the basis reaches its cap, the leading Ritz
//! vectors plus the current residual direction seed the next cycle. Because
//! every new direction is orthogonalized against the whole basis, the
//! Gram–Schmidt coefficients give the complete projected matrix, so the
//! arrowhead coupling after a restart needs no special bookkeeping.

use nalgebra::DMatrix;

use crate::linalg::{hs_inner, hs_norm, C64, ZERO};

#[derive(Clone, Copy, Debug)]
pub struct LanczosConfig {
    /// Relative eigen-residual `||A x - t x|| / t` required on exit.
    pub tol: f64,
    /// Budget of operator applications.
    pub max_matvecs: usize,
    /// Maximum number of basis vectors held at once.
    pub basis_cap: usize,
}

impl Default for LanczosConfig {
    fn default() -> Self {
        LanczosConfig { tol: 1e-9, max_matvecs: 5000, basis_cap: 50 }
    }
}

#[derive(Clone, Debug)]
pub struct TopEigen {
    pub value: f64,
    pub vector: Vec<C64>,
    /// Relative residual of the returned pair.
    pub residual: f64,
    pub matvecs: usize,
    pub converged: bool,
}

fn axpy(alpha: C64, x: &[C64], y: &mut [C64]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn scale_in_place(x: &mut [C64], s: f64) {
    for z in x {
        *z *= s;
    }
}

fn relative(residual_norm: f64, value: f64) -> f64 {
    if residual_norm == 0.0 {
        0.0
    } else if value > 0.0 {
        residual_norm / value
    } else {
        f64::INFINITY
    }
}

/// `sum_i coeffs[i] * basis[i]`.
fn combine(basis: &[Vec<C64>], coeffs: impl Iterator<Item = C64>) -> Vec<C64> {
    let mut out = vec![ZERO; basis[0].len()];
    for (v, c) in basis.iter().zip(coeffs) {
        axpy(c, v, &mut out);
    }
    out
}

/// Ritz pairs of the leading `p x p` block, sorted by descending value.
fn ritz(t: &DMatrix<C64>, p: usize) -> (Vec<f64>, DMatrix<C64>) {
    let block = t.view((0, 0), (p, p)).into_owned();
    let eig = block.symmetric_eigen();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(p, p, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Runs the iteration from `start` (need not be normalized, must be nonzero).
pub fn top_eigenpair<F>(mut apply: F, start: Vec<C64>, cfg: &LanczosConfig) -> TopEigen
where
    F: FnMut(&[C64], &mut [C64]),
{
    let dim = start.len();
    assert!(dim > 0, "empty start vector");
    let cap = cfg.basis_cap.max(2).min(dim);
    // keep < cap so a restarted basis (kept Ritz vectors + residual) fits
    let keep = (cap / 3).clamp(1, cap.saturating_sub(1).max(1));

    let mut v0 = start;
    let norm = hs_norm(&v0);
    assert!(norm > 0.0 && norm.is_finite(), "start vector must be nonzero");
    scale_in_place(&mut v0, 1.0 / norm);

    let mut basis: Vec<Vec<C64>> = vec![v0];
    let mut t = DMatrix::<C64>::zeros(cap, cap);
    let mut processed = 0usize;
    let mut w = vec![ZERO; dim];
    let mut matvecs = 0usize;
    let mut scale = 0.0f64;

    loop {
        let p = processed;
        apply(&basis[p], &mut w);
        matvecs += 1;

        let mut h = vec![ZERO; p + 1];
        for _ in 0..2 {
            for (hi, v) in h.iter_mut().zip(&basis) {
                let c = hs_inner(v, &w);
                *hi += c;
                axpy(-c, v, &mut w);
            }
        }
        for i in 0..p {
            t[(i, p)] = h[i];
            t[(p, i)] = h[i].conj();
        }
        t[(p, p)] = C64::new(h[p].re, 0.0);
        processed += 1;
        let p = processed;

        let beta = hs_norm(&w);
        let (values, vectors) = ritz(&t, p);
        let theta = values[0];
        scale = scale.max(values.iter().fold(0.0, |m, v| m.max(v.abs())));
        let estimate = relative(beta * vectors[(p - 1, 0)].norm(), theta);
        let breakdown = beta == 0.0 || beta <= 1e-13 * scale;

        if breakdown || estimate <= cfg.tol {
            let x = combine(&basis[..p], vectors.column(0).iter().copied());
            let mut ax = vec![ZERO; dim];
            apply(&x, &mut ax);
            matvecs += 1;
            let rq = hs_inner(&x, &ax).re.max(0.0);
            axpy(C64::new(-rq, 0.0), &x, &mut ax);
            let residual = relative(hs_norm(&ax), rq);
            if residual <= cfg.tol || matvecs >= cfg.max_matvecs {
                return TopEigen {
                    value: rq,
                    vector: x,
                    residual,
                    matvecs,
                    converged: residual <= cfg.tol,
                };
            }
            if breakdown {
                // Exhausted an invariant subspace without meeting the
                // tolerance (rounding); start over from the Ritz vector.
                basis = vec![x];
                t.fill(ZERO);
                processed = 0;
                continue;
            }
        }

        if matvecs >= cfg.max_matvecs {
            let x = combine(&basis[..p], vectors.column(0).iter().copied());
            return TopEigen { value: theta.max(0.0), vector: x, residual: estimate, matvecs, converged: false };
        }

        scale_in_place(&mut w, 1.0 / beta);
        if p == cap {
            let k = keep.min(p);
            let mut next: Vec<Vec<C64>> = (0..k)
                .map(|j| combine(&basis[..p], vectors.column(j).iter().copied()))
                .collect();
            next.push(w.clone());
            basis = next;
            t.fill(ZERO);
            for j in 0..k {
                t[(j, j)] = C64::new(values[j], 0.0);
            }
            processed = k;
        } else {
            basis.push(w.clone());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag_op(d: Vec<f64>) -> impl FnMut(&[C64], &mut [C64]) {
        move |x, y| {
            for ((yi, xi), di) in y.iter_mut().zip(x).zip(&d) {
                *yi = xi * *di;
            }
        }
    }

    fn ones(n: usize) -> Vec<C64> {
        (0..n).map(|i| C64::new(1.0, 0.1 * i as f64)).collect()
    }

    #[test]
    fn finds_top_of_diagonal() {
        let d: Vec<f64> = (0..300).map(|i| i as f64 / 299.0).collect();
        let cfg = LanczosConfig { tol: 1e-10, max_matvecs: 5000, basis_cap: 50 };
        let r = top_eigenpair(diag_op(d), ones(300), &cfg);
        assert!(r.converged);
        assert!((r.value - 1.0).abs() < 1e-12, "{}", r.value);
        assert!(r.residual <= 1e-10);
    }

    #[test]
    fn small_space_terminates_exactly() {
        let d = vec![3.0, 1.0, 2.0];
        let r = top_eigenpair(diag_op(d), ones(3), &LanczosConfig::default());
        assert!(r.converged);
        assert!((r.value - 3.0).abs() < 1e-13);
    }

    #[test]
    fn zero_operator_gives_zero() {
        let r = top_eigenpair(|_x: &[C64], y: &mut [C64]| y.fill(ZERO), ones(10), &LanczosConfig::default());
        assert!(r.converged);
        assert_eq!(r.value, 0.0);
        assert_eq!(r.residual, 0.0);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let d: Vec<f64> = (0..2000).map(|i| (i as f64 / 1999.0).sqrt()).collect();
        let cfg = LanczosConfig { tol: 1e-14, max_matvecs: 5, basis_cap: 50 };
        let r = top_eigenpair(diag_op(d), ones(2000), &cfg);
        assert!(!r.converged);
        assert!(r.value > 0.0 && r.value <= 1.0 + 1e-12);
        assert!(r.residual > 1e-14);
    }
}

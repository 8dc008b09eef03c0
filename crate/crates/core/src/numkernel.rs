//! Dense numerical primitives used by the solvers: SVD, singular-value
//! thresholding, entrywise soft-thresholding, and matrix norms.
//!
//! The SVD is an in-house one-sided Jacobi implementation. Jacobi converges
//! unconditionally, gives high relative accuracy even for nearly
//! rank-deficient inputs, and is plenty fast at the matrix sizes this
//! pipeline produces (tens to a few hundred rows). A QR-iteration backend we
//! tried first returned silently wrong factors on near-rank-deficient
//! iterates generated by the ADMM solver, which the solver's runtime
//! invariants caught; everything downstream consumes only the `SvdResult`
//! contract (column-orthonormal factors, nonincreasing singular values,
//! accurate reconstruction), so the backing algorithm stays interchangeable.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// Thin SVD of a real matrix: `m = u · diag(sigma) · vᵀ`.
///
/// `u` is rows×r, `v` is cols×r with `r = min(rows, cols)`; both are
/// column-orthonormal and `sigma` is nonnegative and sorted descending.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: Array2<f64>,
    pub sigma: Array1<f64>,
    pub v: Array2<f64>,
}

/// All four norms the solvers and diagnostics need.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub frobenius: f64,
    pub nuclear: f64,
    pub l1: f64,
    pub linf: f64,
}

pub(crate) fn ensure_finite(m: &Array2<f64>, what: &str) -> Result<()> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter(format!("{what} contains a non-finite entry")));
    }
    Ok(())
}

pub(crate) fn frobenius_norm(m: &Array2<f64>) -> f64 {
    m.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn l1_norm(m: &Array2<f64>) -> f64 {
    m.iter().map(|x| x.abs()).sum()
}

pub(crate) fn inf_norm(m: &Array2<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Thin singular value decomposition.
pub fn svd(m: &Array2<f64>) -> Result<SvdResult> {
    ensure_finite(m, "svd input")?;
    let (rows, cols) = m.dim();
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidParameter("svd input must be non-empty".into()));
    }
    if rows >= cols {
        jacobi_svd_tall(m)
    } else {
        // Decompose the transpose and swap the factors.
        let t = jacobi_svd_tall(&m.t().to_owned())?;
        Ok(SvdResult { u: t.v, sigma: t.sigma, v: t.u })
    }
}

/// One-sided Jacobi SVD for `rows >= cols`: orthogonalizes the columns of a
/// working copy by plane rotations, accumulating the rotations into `v`.
/// Column norms become the singular values; normalized columns become `u`.
fn jacobi_svd_tall(a: &Array2<f64>) -> Result<SvdResult> {
    let (m, n) = a.dim();
    debug_assert!(m >= n);
    // Row `j` of `g` holds working column `j`, contiguously.
    let mut g: Vec<Vec<f64>> = (0..n).map(|j| a.column(j).to_vec()).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    let max_sweeps = 128;
    // Rotation threshold relative to the column magnitudes; the sqrt(m)
    // factor keeps rounding noise in long columns from cycling forever.
    let tol = (m as f64).sqrt() * f64::EPSILON;
    let mut converged = false;
    for _ in 0..max_sweeps {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let mut app = 0.0;
                let mut aqq = 0.0;
                let mut apq = 0.0;
                for (&x, &y) in g[p].iter().zip(g[q].iter()) {
                    app += x * x;
                    aqq += y * y;
                    apq += x * y;
                }
                if app == 0.0 || aqq == 0.0 || apq.abs() <= tol * (app * aqq).sqrt() {
                    continue;
                }
                rotated = true;
                let tau = (aqq - app) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                // Split borrows of the two rows being rotated.
                let (lo, hi) = g.split_at_mut(q);
                for (x, y) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
                    let (gp, gq) = (*x, *y);
                    *x = cs * gp - sn * gq;
                    *y = sn * gp + cs * gq;
                }
                let (lo, hi) = v.split_at_mut(q);
                for (x, y) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
                    let (vp, vq) = (*x, *y);
                    *x = cs * vp - sn * vq;
                    *y = sn * vp + cs * vq;
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::DegenerateInput("svd did not converge".into()));
    }

    // Sort by descending column norm.
    let norms: Vec<f64> = g.iter().map(|col| col.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).expect("finite norms"));

    let mut u = Array2::<f64>::zeros((m, n));
    let mut v_out = Array2::<f64>::zeros((n, n));
    let mut sigma = Array1::<f64>::zeros(n);
    for (dst, &src) in order.iter().enumerate() {
        sigma[dst] = norms[src];
        for i in 0..n {
            v_out[[i, dst]] = v[src][i];
        }
        if norms[src] > 0.0 {
            for i in 0..m {
                u[[i, dst]] = g[src][i] / norms[src];
            }
        }
    }
    // Orthonormal completion for exactly-zero singular values, so `u` honors
    // its column-orthonormality contract.
    for j in 0..n {
        if sigma[j] > 0.0 {
            continue;
        }
        let mut filled = false;
        for k in 0..m {
            let mut cand = vec![0.0; m];
            cand[k] = 1.0;
            for _ in 0..2 {
                for other in 0..n {
                    // Project only against columns that already hold a valid
                    // direction: nonzero ones, plus zero ones completed earlier.
                    if other == j || (sigma[other] == 0.0 && other > j) {
                        continue;
                    }
                    let proj: f64 = (0..m).map(|i| cand[i] * u[[i, other]]).sum();
                    for i in 0..m {
                        cand[i] -= proj * u[[i, other]];
                    }
                }
            }
            let norm = cand.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.5 {
                for i in 0..m {
                    u[[i, j]] = cand[i] / norm;
                }
                filled = true;
                break;
            }
        }
        debug_assert!(filled, "orthonormal completion must succeed for m >= n");
    }
    Ok(SvdResult { u, sigma, v: v_out })
}

/// Reconstruction with singular values shrunk by `tau`; also returns the
/// nuclear norm of the result (the shrunk values' sum), which the ADMM
/// solver's boundedness monitor needs for free.
pub(crate) fn svt_from_svd(s: &SvdResult, tau: f64) -> (Array2<f64>, f64) {
    let shrunk = s.sigma.mapv(|x| (x - tau).max(0.0));
    let nuclear = shrunk.sum();
    let mut us = s.u.clone();
    for (j, &sv) in shrunk.iter().enumerate() {
        us.column_mut(j).mapv_inplace(|x| x * sv);
    }
    (us.dot(&s.v.t()), nuclear)
}

/// Singular-value thresholding `D_tau(m) = u · max(sigma − tau, 0) · vᵀ`,
/// the proximal map of `tau·‖·‖_*`.
pub fn svt(m: &Array2<f64>, tau: f64) -> Result<Array2<f64>> {
    if tau.is_nan() || tau < 0.0 {
        return Err(Error::InvalidParameter(format!("svt threshold must be nonnegative, got {tau}")));
    }
    let s = svd(m)?;
    Ok(svt_from_svd(&s, tau).0)
}

/// Entrywise soft-thresholding `sign(c) · max(|c| − theta, 0)`, the proximal
/// map of `theta·‖·‖₁`.
pub fn soft_threshold(m: &Array2<f64>, theta: f64) -> Array2<f64> {
    assert!(theta >= 0.0, "soft_threshold requires theta >= 0, got {theta}");
    m.mapv(|c| c.signum() * (c.abs() - theta).max(0.0))
}

/// Frobenius, nuclear, entrywise-l1 and entrywise-max norms of a matrix.
pub fn norms(m: &Array2<f64>) -> Result<Norms> {
    let s = svd(m)?;
    Ok(Norms {
        frobenius: frobenius_norm(m),
        nuclear: s.sigma.sum(),
        l1: l1_norm(m),
        linf: inf_norm(m),
    })
}

//! Thick-restart Golub–Kahan–Lanczos bidiagonalization for the leading
//! singular triplets of a matrix-free operator.
//!
//! The projected matrix `B = Qᵀ A P` is built column by column from the
//! Gram–Schmidt coefficients of each left step, so after a restart (where `B`
//! turns into a diagonal block bordered by one column of residual couplings)
//! no special bookkeeping is needed. Both bases are fully reorthogonalized
//! with two passes of classical Gram–Schmidt.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// A real linear map `A: R^ncols -> R^nrows` known only through products.
pub trait LinearOperator: Sync {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// `y = A x`
    fn apply(&self, x: &[f64], y: &mut [f64]);
    /// `y = Aᵀ x`
    fn apply_transpose(&self, x: &[f64], y: &mut [f64]);
}

#[derive(Clone, Debug)]
pub struct SvdOptions {
    pub k: usize,
    /// Converged when every wanted residual `‖Aᵀu − σv‖` is at most
    /// `tolerance · σ_max`.
    pub tolerance: f64,
    pub max_restarts: usize,
    /// Krylov subspace size; defaults to `max(2k + 10, 20)` capped at `min(m, n)`.
    pub work_dim: Option<usize>,
    pub seed: u64,
}

/// Leading singular triplets, singular values in nonincreasing order.
#[derive(Clone, Debug)]
pub struct TruncatedSvd {
    /// `nrows × k`
    pub u: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    /// `ncols × k`
    pub v: DMatrix<f64>,
    pub restarts: usize,
    /// Largest relative residual among the returned triplets.
    pub residual: f64,
}

const PAR_MIN_LEN: usize = 4096;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    if a.len() >= PAR_MIN_LEN * 4 {
        // fixed chunking keeps the summation order independent of thread count
        a.par_chunks(PAR_MIN_LEN)
            .zip(b.par_chunks(PAR_MIN_LEN))
            .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
            .collect::<Vec<_>>()
            .iter()
            .sum()
    } else {
        a.iter().zip(b).map(|(p, q)| p * q).sum()
    }
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    if y.len() >= PAR_MIN_LEN * 4 {
        y.par_iter_mut()
            .with_min_len(PAR_MIN_LEN)
            .zip(x.par_iter())
            .for_each(|(yi, xi)| *yi += alpha * xi);
    } else {
        y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
    }
}

fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

fn scale(x: &mut [f64], s: f64) {
    x.iter_mut().for_each(|v| *v *= s);
}

/// Two passes of classical Gram–Schmidt. Returns the accumulated
/// projection coefficients.
fn orthogonalize(w: &mut [f64], basis: &[Vec<f64>]) -> Vec<f64> {
    let mut coeffs = vec![0.0; basis.len()];
    for _ in 0..2 {
        let h: Vec<f64> = basis.iter().map(|b| dot(b, w)).collect();
        for (b, &hi) in basis.iter().zip(&h) {
            axpy(-hi, b, w);
        }
        coeffs.iter_mut().zip(&h).for_each(|(c, hi)| *c += hi);
    }
    coeffs
}

fn random_unit_orthogonal(len: usize, basis: &[Vec<f64>], rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let mut w: Vec<f64> = (0..len).map(|_| rng.random::<f64>() - 0.5).collect();
        orthogonalize(&mut w, basis);
        let nw = norm(&w);
        if nw > 1e-8 {
            scale(&mut w, 1.0 / nw);
            return w;
        }
    }
}

/// Combination `basis · coeffs[:, col]` for the first `count` columns of `coeffs`.
fn rotate(basis: &[Vec<f64>], coeffs: &DMatrix<f64>, count: usize) -> Vec<Vec<f64>> {
    let len = basis[0].len();
    (0..count)
        .map(|c| {
            let mut out = vec![0.0; len];
            for (l, b) in basis.iter().enumerate() {
                let w = coeffs[(l, c)];
                if w != 0.0 {
                    axpy(w, b, &mut out);
                }
            }
            out
        })
        .collect()
}

struct SmallSvd {
    u: DMatrix<f64>,
    s: Vec<f64>,
    v: DMatrix<f64>,
}

/// Dense SVD of the projected matrix with columns sorted by decreasing σ.
fn sorted_svd(b: &DMatrix<f64>) -> SmallSvd {
    let svd = b.clone().svd(true, true);
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &c| {
        svd.singular_values[c]
            .partial_cmp(&svd.singular_values[a])
            .expect("finite singular values")
            .then(a.cmp(&c))
    });
    let p = b.nrows();
    let mut us = DMatrix::zeros(p, order.len());
    let mut vs = DMatrix::zeros(b.ncols(), order.len());
    for (dst, &src) in order.iter().enumerate() {
        us.set_column(dst, &u.column(src));
        vs.set_column(dst, &vt.row(src).transpose());
    }
    SmallSvd {
        u: us,
        s: order.iter().map(|&i| svd.singular_values[i]).collect(),
        v: vs,
    }
}

/// Computes the `k` largest singular triplets of `op`.
pub fn truncated_svd<O: LinearOperator + ?Sized>(op: &O, opts: &SvdOptions) -> Result<TruncatedSvd> {
    let (m, n) = (op.nrows(), op.ncols());
    let min_dim = m.min(n);
    let k = opts.k;
    if k == 0 || k > min_dim {
        return Err(Error::InvalidArgument(format!(
            "cannot extract {k} singular triplets from a {m}x{n} operator"
        )));
    }
    if !(opts.tolerance > 0.0) {
        return Err(Error::InvalidArgument("solver tolerance must be positive".into()));
    }
    let p = opts
        .work_dim
        .unwrap_or((2 * k + 10).max(20))
        .clamp(k, min_dim);
    let keep = if p > k { (k + (p - k) / 2).min(p - 1).max(k) } else { k };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut pb: Vec<Vec<f64>> = Vec::with_capacity(p);
    let mut qb: Vec<Vec<f64>> = Vec::with_capacity(p);
    let mut b = DMatrix::<f64>::zeros(p, p);
    pb.push(random_unit_orthogonal(n, &[], &mut rng));

    let mut anorm = 0.0f64;
    let mut last_residual = f64::INFINITY;

    for restart in 0..opts.max_restarts.max(1) {
        let start = qb.len();
        let mut resid_vec = vec![0.0; n];
        let mut resid_norm = 0.0;

        for j in start..p {
            let mut w = vec![0.0; m];
            op.apply(&pb[j], &mut w);
            let h = orthogonalize(&mut w, &qb);
            for (i, hi) in h.into_iter().enumerate() {
                b[(i, j)] += hi;
            }
            let alpha = norm(&w);
            anorm = anorm.max(alpha);
            if alpha <= 1e-13 * anorm.max(f64::MIN_POSITIVE) {
                qb.push(random_unit_orthogonal(m, &qb, &mut rng));
            } else {
                b[(j, j)] += alpha;
                scale(&mut w, 1.0 / alpha);
                qb.push(w);
            }

            let mut z = vec![0.0; n];
            op.apply_transpose(&qb[j], &mut z);
            orthogonalize(&mut z, &pb);
            let beta = norm(&z);
            anorm = anorm.max(beta);
            if j + 1 < p {
                if beta <= 1e-13 * anorm.max(f64::MIN_POSITIVE) {
                    pb.push(random_unit_orthogonal(n, &pb, &mut rng));
                } else {
                    scale(&mut z, 1.0 / beta);
                    pb.push(z);
                }
            } else {
                resid_norm = beta;
                resid_vec = z;
            }
        }

        let small = sorted_svd(&b);
        let sigma_max = small.s[0].max(f64::MIN_POSITIVE);
        let residuals: Vec<f64> = (0..p)
            .map(|i| resid_norm * small.u[(p - 1, i)].abs() / sigma_max)
            .collect();
        last_residual = residuals[..k].iter().cloned().fold(0.0, f64::max);
        log::debug!("restart {restart}: max relative residual {last_residual:.3e}");

        let mut rebuild = false;
        if last_residual <= opts.tolerance || p == k {
            // the estimate assumes an exact Krylov relation; rounding drift
            // across restarts can break it, so confirm with true residuals
            let v_cols = rotate(&pb, &small.v, k);
            let q_cols = rotate(&qb, &small.u, k);
            let mut u_cols = Vec::with_capacity(k);
            let mut worst = 0.0f64;
            for (v, q) in v_cols.iter().zip(q_cols) {
                let mut av = vec![0.0; m];
                op.apply(v, &mut av);
                let sigma = norm(&av);
                let u = if sigma > 1e-10 * sigma_max {
                    scale(&mut av, 1.0 / sigma);
                    av
                } else {
                    q
                };
                let mut atu = vec![0.0; n];
                op.apply_transpose(&u, &mut atu);
                axpy(-sigma, v, &mut atu);
                worst = worst.max(norm(&atu) / sigma_max);
                u_cols.push(u);
            }
            log::debug!("restart {restart}: explicit residual {worst:.3e}");
            if worst <= opts.tolerance || p == k {
                return Ok(TruncatedSvd {
                    u: DMatrix::from_fn(m, k, |r, c| u_cols[c][r]),
                    singular_values: small.s[..k].to_vec(),
                    v: DMatrix::from_fn(n, k, |r, c| v_cols[c][r]),
                    restarts: restart,
                    residual: worst,
                });
            }
            last_residual = worst;
            rebuild = true;
        }

        let mut new_p = rotate(&pb, &small.v, keep);
        if rebuild {
            // recompute the kept block from scratch instead of trusting the
            // carried residual
            let mut clean: Vec<Vec<f64>> = Vec::with_capacity(p);
            for mut v in new_p {
                orthogonalize(&mut v, &clean);
                let nv = norm(&v);
                scale(&mut v, 1.0 / nv);
                clean.push(v);
            }
            qb = Vec::with_capacity(p);
            b.fill(0.0);
            for (j, pj) in clean.iter().enumerate() {
                let mut w = vec![0.0; m];
                op.apply(pj, &mut w);
                let h = orthogonalize(&mut w, &qb);
                for (i, hi) in h.into_iter().enumerate() {
                    b[(i, j)] = hi;
                }
                let alpha = norm(&w);
                if alpha <= 1e-13 * anorm.max(f64::MIN_POSITIVE) {
                    qb.push(random_unit_orthogonal(m, &qb, &mut rng));
                } else {
                    b[(j, j)] = alpha;
                    scale(&mut w, 1.0 / alpha);
                    qb.push(w);
                }
            }
            let mut next: Option<(f64, Vec<f64>)> = None;
            for q in &qb {
                let mut z = vec![0.0; n];
                op.apply_transpose(q, &mut z);
                orthogonalize(&mut z, &clean);
                let nz = norm(&z);
                if next.as_ref().is_none_or(|(best, _)| nz > *best) {
                    next = Some((nz, z));
                }
            }
            let (nz, mut z) = next.expect("keep is at least one");
            if nz > 1e-13 * anorm.max(f64::MIN_POSITIVE) {
                scale(&mut z, 1.0 / nz);
            } else {
                z = random_unit_orthogonal(n, &clean, &mut rng);
            }
            clean.push(z);
            pb = clean;
            continue;
        }
        let new_q = rotate(&qb, &small.u, keep);
        if resid_norm > 1e-13 * anorm.max(f64::MIN_POSITIVE) {
            scale(&mut resid_vec, 1.0 / resid_norm);
            // re-orthogonalize against the rotated basis to absorb drift
            orthogonalize(&mut resid_vec, &new_p);
            let nr = norm(&resid_vec);
            scale(&mut resid_vec, 1.0 / nr);
            new_p.push(resid_vec);
        } else {
            let fresh = random_unit_orthogonal(n, &new_p, &mut rng);
            new_p.push(fresh);
        }
        pb = new_p;
        qb = new_q;
        b.fill(0.0);
        for i in 0..keep {
            b[(i, i)] = small.s[i];
        }
    }

    Err(Error::NotConverged {
        iterations: opts.max_restarts,
        residual: last_residual,
    })
}

//! Top eigenpairs of symmetric operators.
//!
//! Block Krylov iteration with full reorthogonalization, Rayleigh-Ritz
//! extraction and thick restart. The block is wider than the number of
//! wanted pairs so that repeated eigenvalues (every eigenvalue of a
//! connection matrix over Z4 is at least double) are captured together.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{self, Stream};

/// Restarts without halving the residual after which the iteration counts
/// as stalled.
const STALL_RESTARTS: usize = 30;
const STALL_FACTOR: f64 = 0.5;

/// A symmetric linear operator on `R^dim`.
pub trait SymmetricOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenOptions {
    /// Largest accepted residual `‖Av - λv‖` per returned pair.
    pub tol: f64,
    /// Cap on operator applications.
    pub max_iterations: usize,
    /// Operators up to this dimension are solved densely when the iteration
    /// cap is reached (tightly clustered spectra); 0 disables the fallback.
    pub dense_fallback: usize,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            tol: 1e-8,
            max_iterations: 10_000,
            dense_fallback: 4096,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralResult {
    /// Descending.
    pub eigenvalues: Vec<f64>,
    /// One column per eigenvalue, each of length `dim`.
    pub eigenvectors: Vec<Vec<f64>>,
    /// Operator applications used.
    pub iterations: usize,
    /// Largest residual norm among the returned pairs.
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Removes the components along `basis` (two classical Gram-Schmidt passes)
/// and returns the remaining norm.
fn orthogonalize(x: &mut [f64], basis: &[Vec<f64>]) -> f64 {
    for _ in 0..2 {
        for q in basis {
            let c = dot(q, x);
            axpy(-c, q, x);
        }
    }
    norm(x)
}

/// Eigen-decomposition of a dense symmetric matrix (row-major, `m x m`).
/// Eigenvalues descending; eigenvectors as columns of the returned
/// row-major matrix.
pub fn symmetric_eigen(a: &[f64], m: usize) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(a.len(), m * m);
    let eig = SymmetricEigen::new(DMatrix::from_row_slice(m, m, a));
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&x, &y| {
        eig.eigenvalues[y]
            .total_cmp(&eig.eigenvalues[x])
            .then(x.cmp(&y))
    });
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vecs = vec![0.0; m * m];
    for (col, &k) in order.iter().enumerate() {
        for r in 0..m {
            vecs[r * m + col] = eig.eigenvectors[(r, k)];
        }
    }
    (values, vecs)
}

struct Krylov<'a, A: SymmetricOperator + ?Sized> {
    op: &'a A,
    v: Vec<Vec<f64>>,
    av: Vec<Vec<f64>>,
    applications: usize,
}

impl<A: SymmetricOperator + ?Sized> Krylov<'_, A> {
    /// Orthonormalizes `x` against the basis and appends it. Returns false
    /// when nothing new remains.
    fn push(&mut self, mut x: Vec<f64>) -> bool {
        let before = norm(&x);
        if before == 0.0 {
            return false;
        }
        let after = orthogonalize(&mut x, &self.v);
        if after <= 1e-10 * before {
            return false;
        }
        x.iter_mut().for_each(|e| *e /= after);
        let mut ax = vec![0.0; x.len()];
        self.op.apply(&x, &mut ax);
        self.applications += 1;
        self.v.push(x);
        self.av.push(ax);
        true
    }
}

/// The `k` algebraically largest eigenpairs of a symmetric operator.
pub fn top_eigenvectors<A: SymmetricOperator + ?Sized>(
    op: &A,
    k: usize,
    opts: &EigenOptions,
) -> Result<SpectralResult> {
    let n = op.dim();
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!(
            "requested {k} eigenpairs of a {n}-dimensional operator"
        )));
    }
    let block = (k + 4).min(n);
    let max_basis = n.min((5 * block).max(40));
    let keep = (k + block).min(max_basis.saturating_sub(block).max(k));
    let mut rng = rng::stream(opts.seed, Stream::Eigensolver);
    let random = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    };

    let mut kr = Krylov {
        op,
        v: Vec::with_capacity(max_basis),
        av: Vec::with_capacity(max_basis),
        applications: 0,
    };
    let mut stall_best = f64::INFINITY;
    let mut stall_restarts = 0;
    let mut pending: Vec<Vec<f64>> = (0..block).map(|_| random(&mut rng)).collect();
    loop {
        // grow the basis block by block
        while kr.v.len() < max_basis && !pending.is_empty() {
            let start = kr.v.len();
            for x in pending.drain(..) {
                if kr.v.len() == max_basis {
                    break;
                }
                if !kr.push(x) && kr.v.len() < n {
                    // deflated direction: replace it to keep the block width
                    for _ in 0..3 {
                        if kr.push(random(&mut rng)) {
                            break;
                        }
                    }
                }
            }
            pending = kr.av[start..].to_vec();
        }

        // Rayleigh-Ritz on the current basis
        let m = kr.v.len();
        let mut h = vec![0.0; m * m];
        for i in 0..m {
            for j in i..m {
                let x = 0.5 * (dot(&kr.v[i], &kr.av[j]) + dot(&kr.v[j], &kr.av[i]));
                h[i * m + j] = x;
                h[j * m + i] = x;
            }
        }
        let (theta, z) = symmetric_eigen(&h, m);
        let p = keep.min(m);
        let mut ritz = Vec::with_capacity(p);
        let mut aritz = Vec::with_capacity(p);
        for c in 0..p {
            let mut y = vec![0.0; n];
            let mut ay = vec![0.0; n];
            for r in 0..m {
                let w = z[r * m + c];
                axpy(w, &kr.v[r], &mut y);
                axpy(w, &kr.av[r], &mut ay);
            }
            ritz.push(y);
            aritz.push(ay);
        }
        let residuals: Vec<Vec<f64>> = (0..p)
            .map(|c| {
                let mut r = aritz[c].clone();
                axpy(-theta[c], &ritz[c], &mut r);
                r
            })
            .collect();
        let worst = residuals[..k].iter().map(|r| norm(r)).fold(0.0, f64::max);
        if worst <= opts.tol || m == n {
            let mut vectors: Vec<Vec<f64>> = ritz.into_iter().take(k).collect();
            for v in &mut vectors {
                let s = norm(v);
                v.iter_mut().for_each(|e| *e /= s);
            }
            return Ok(SpectralResult {
                eigenvalues: theta[..k].to_vec(),
                eigenvectors: vectors,
                iterations: kr.applications,
                residual: worst,
            });
        }
        if worst < stall_best * STALL_FACTOR {
            stall_best = worst;
            stall_restarts = 0;
        } else {
            stall_restarts += 1;
        }
        let stalled = stall_restarts >= STALL_RESTARTS;
        if kr.applications >= opts.max_iterations || (stalled && n <= opts.dense_fallback) {
            if n <= opts.dense_fallback {
                log::debug!(
                    "block Krylov stalled at residual {worst:.2e} after {} applications; solving densely",
                    kr.applications
                );
                return Ok(dense_top(op, k, kr.applications));
            }
            return Err(Error::NoConvergence {
                iterations: kr.applications,
                residual: worst,
            });
        }

        // thick restart: re-orthonormalize the kept Ritz vectors, applying
        // the same transform to their images
        kr.v.clear();
        kr.av.clear();
        for (mut y, mut ay) in ritz.into_iter().zip(aritz) {
            for (q, aq) in kr.v.iter().zip(&kr.av) {
                let c = dot(q, &y);
                axpy(-c, q, &mut y);
                axpy(-c, aq, &mut ay);
            }
            let s = norm(&y);
            if s <= 1e-10 {
                continue;
            }
            y.iter_mut().for_each(|e| *e /= s);
            ay.iter_mut().for_each(|e| *e /= s);
            kr.v.push(y);
            kr.av.push(ay);
        }
        pending = residuals.into_iter().take(block).collect();
    }
}

/// Top `k` pairs from the dense matrix assembled column by column.
fn dense_top<A: SymmetricOperator + ?Sized>(
    op: &A,
    k: usize,
    applications: usize,
) -> SpectralResult {
    let n = op.dim();
    let mut a = vec![0.0; n * n];
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        op.apply(&e, &mut col);
        e[j] = 0.0;
        for i in 0..n {
            a[i * n + j] = col[i];
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            let x = 0.5 * (a[i * n + j] + a[j * n + i]);
            a[i * n + j] = x;
            a[j * n + i] = x;
        }
    }
    let (values, vectors) = symmetric_eigen(&a, n);
    let eigenvectors: Vec<Vec<f64>> = (0..k)
        .map(|c| (0..n).map(|r| vectors[r * n + c]).collect())
        .collect();
    let residual = eigenvectors
        .iter()
        .zip(&values)
        .map(|(v, &lambda)| {
            op.apply(v, &mut col);
            axpy(-lambda, v, &mut col);
            norm(&col)
        })
        .fold(0.0, f64::max);
    SpectralResult {
        eigenvalues: values[..k].to_vec(),
        eigenvectors,
        iterations: applications + n + k,
        residual,
    }
}

/// Dense row-major symmetric matrix as an operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSymmetric {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl SymmetricOperator for DenseSymmetric {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (r, out) in y.iter_mut().enumerate() {
            *out = dot(&self.data[r * self.dim..(r + 1) * self.dim], x);
        }
    }
}

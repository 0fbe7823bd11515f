//! Vector diffusion distances on a connection graph and the optional MGC
//! penalty for patch pairs that diffuse far apart.
//!
//! With `φ_l` the eigenvectors of `C = D⁻¹S` (2-vectors `φ_l[i]` per vertex)
//! and `μ_l` their eigenvalues, the diffusion map of vertex `i` at time `t`
//! is the `k x k` matrix `((μ_l μ_r)^t ⟨φ_l[i], φ_r[i]⟩)`. Distances are
//! evaluated through the kernel `K(i, j) = Σ_l μ_l^{2t} φ_l[i] φ_l[j]ᵀ`,
//! which gives `d² = ‖K(i,i)‖² + ‖K(j,j)‖² - 2‖K(i,j)‖²` (Frobenius).
//!
//! Only eigenpairs with `μ_l > 0` enter the map. Grid graphs are bipartite,
//! so the negative half of the spectrum mirrors the positive half and its
//! terms flip sign between the two colour classes; keeping them makes
//! adjacent patches look as far apart as opposite corners.

use rayon::prelude::*;

use crate::congraph::ConnectionGraph;
use crate::error::{Error, Result};
use crate::metrics::PairwiseTable;
use crate::spectral::{assemble_gcl, top_eigenvectors, EigenOptions};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VddOptions {
    pub t: f64,
    /// Spectral truncation; `None` uses `min(2n, 30)`.
    pub k: Option<usize>,
    pub quantile: f64,
    pub alpha: f64,
}

impl Default for VddOptions {
    fn default() -> Self {
        VddOptions {
            t: 1.0,
            k: None,
            quantile: 0.9,
            alpha: 2.0,
        }
    }
}

pub fn default_truncation(n: usize) -> usize {
    (2 * n).min(30)
}

/// Pairwise vector diffusion distances.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionEmbedding {
    pub t: f64,
    n: usize,
    distances: Vec<f64>,
}

impl DiffusionEmbedding {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.distances[i * self.n + j]
    }
}

pub fn vdd_distances(
    g: &ConnectionGraph,
    t: f64,
    k: usize,
    opts: &EigenOptions,
) -> Result<DiffusionEmbedding> {
    if t <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "diffusion time must be positive, got {t}"
        )));
    }
    let n = g.n();
    if n == 1 {
        return Ok(DiffusionEmbedding {
            t,
            n,
            distances: vec![0.0],
        });
    }
    let gcl = assemble_gcl(g)?;
    let res = top_eigenvectors(&gcl.c_sym, k, opts)?;
    let scale: Vec<f64> = gcl.degree.iter().map(|d| 1.0 / d.sqrt()).collect();
    let weights: Vec<f64> = res
        .eigenvalues
        .iter()
        .map(|&m| if m > 0.0 { m.powf(2.0 * t) } else { 0.0 })
        .collect();
    // phi[i][l] is the 2-vector of eigenvector l at vertex i
    let phi: Vec<Vec<[f64; 2]>> = (0..n)
        .map(|i| {
            res.eigenvectors
                .iter()
                .map(|u| [u[2 * i] * scale[i], u[2 * i + 1] * scale[i]])
                .collect()
        })
        .collect();
    let kernel_norm = |i: usize, j: usize| -> f64 {
        let mut m = [[0.0; 2]; 2];
        for (l, w) in weights.iter().enumerate() {
            let (a, b) = (phi[i][l], phi[j][l]);
            for r in 0..2 {
                for c in 0..2 {
                    m[r][c] += w * a[r] * b[c];
                }
            }
        }
        m.iter().flatten().map(|x| x * x).sum()
    };
    let self_terms: Vec<f64> = (0..n).map(|i| kernel_norm(i, i)).collect();
    let distances: Vec<f64> = (0..n * n)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / n, idx % n);
            if i == j {
                return 0.0;
            }
            let (a, b) = (i.min(j), i.max(j));
            (self_terms[a] + self_terms[b] - 2.0 * kernel_norm(a, b))
                .max(0.0)
                .sqrt()
        })
        .collect();
    Ok(DiffusionEmbedding { t, n, distances })
}

/// Multiplies all 16 MGC entries of every pair `{i, j}` where `j` is among
/// the farthest `1 - quantile` fraction of patches from `i` (or vice versa)
/// by `alpha`.
pub fn penalize_far_pairs(
    table: &PairwiseTable,
    emb: &DiffusionEmbedding,
    quantile: f64,
    alpha: f64,
) -> Result<PairwiseTable> {
    if !(quantile > 0.0 && quantile < 1.0) {
        return Err(Error::InvalidInput(format!(
            "quantile must lie in (0, 1), got {quantile}"
        )));
    }
    if alpha < 1.0 {
        return Err(Error::InvalidInput(format!(
            "penalty factor must be at least 1, got {alpha}"
        )));
    }
    let n = table.n();
    if emb.n() != n {
        return Err(Error::SizeMismatch {
            expected: n,
            actual: emb.n(),
        });
    }
    let count = (((1.0 - quantile) * (n - 1) as f64).ceil() as usize).max(1);
    let mut pairs = Vec::new();
    for i in 0..n {
        let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        others.sort_by(|&a, &b| {
            emb.distance(i, b)
                .total_cmp(&emb.distance(i, a))
                .then(a.cmp(&b))
        });
        pairs.extend(others.into_iter().take(count).map(|j| (i, j)));
    }
    Ok(table.scaled_pairs(&pairs, alpha as f32))
}

//! Orientation recovery from the graph connection Laplacian.
//!
//! The connection matrix `S` has 2x2 blocks `W(i, j) R[i, j]`; with degrees
//! `D`, the eigenvectors of `C = D⁻¹S` are obtained from those of the
//! symmetric `C̃ = D^{-1/2} S D^{-1/2}` by `v = D^{-1/2} u`. On a consistent
//! graph the top two eigenvectors stack the blocks `M(b_i) O` for one common
//! orthogonal `O`; projecting each block onto Z4 after removing `O` recovers
//! the rotations up to a global element.

pub mod eigen;

use rayon::prelude::*;

use crate::congraph::ConnectionGraph;
use crate::error::{Error, Result};
use crate::rotation::{Mat2, Rotation};
pub use eigen::{top_eigenvectors, EigenOptions, SpectralResult, SymmetricOperator};

/// Blocks with a smaller Frobenius norm carry no orientation.
pub const DEGENERATE_NORM: f64 = 1e-9;

/// Square matrix of 2x2 blocks, stored by block row.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSparseMatrix {
    rows: Vec<Vec<(usize, Mat2)>>,
}

impl BlockSparseMatrix {
    pub fn new(n: usize) -> Self {
        BlockSparseMatrix {
            rows: vec![Vec::new(); n],
        }
    }

    /// Block dimension.
    pub fn n(&self) -> usize {
        self.rows.len()
    }

    /// Sets block `(i, j)`, replacing any previous value.
    pub fn insert(&mut self, i: usize, j: usize, m: Mat2) {
        let row = &mut self.rows[i];
        match row.binary_search_by_key(&j, |&(c, _)| c) {
            Ok(k) => row[k].1 = m,
            Err(k) => row.insert(k, (j, m)),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> Option<Mat2> {
        let row = &self.rows[i];
        row.binary_search_by_key(&j, |&(c, _)| c)
            .ok()
            .map(|k| row[k].1)
    }

    pub fn row(&self, i: usize) -> &[(usize, Mat2)] {
        &self.rows[i]
    }

    /// Flat row-major `2n x 2n` copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let d = 2 * self.n();
        let mut out = vec![0.0; d * d];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, m) in row {
                for a in 0..2 {
                    for b in 0..2 {
                        out[(2 * i + a) * d + 2 * j + b] = m.0[a][b];
                    }
                }
            }
        }
        out
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, m) in row {
                let other = self.get(j, i).unwrap_or(Mat2::ZERO);
                worst = worst.max(m.max_abs_diff(&other.transpose()));
            }
        }
        worst
    }
}

impl SymmetricOperator for BlockSparseMatrix {
    fn dim(&self) -> usize {
        2 * self.n()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let kernel = |(i, out): (usize, &mut [f64])| {
            let (mut a, mut b) = (0.0, 0.0);
            for &(j, m) in &self.rows[i] {
                let (x0, x1) = (x[2 * j], x[2 * j + 1]);
                a += m.0[0][0] * x0 + m.0[0][1] * x1;
                b += m.0[1][0] * x0 + m.0[1][1] * x1;
            }
            out[0] = a;
            out[1] = b;
        };
        if self.n() >= 2048 {
            y.par_chunks_mut(2).enumerate().for_each(kernel);
        } else {
            y.chunks_mut(2).enumerate().for_each(kernel);
        }
    }
}

/// The connection matrix, its degrees and the normalized symmetric form.
#[derive(Debug, Clone, PartialEq)]
pub struct Gcl {
    pub s: BlockSparseMatrix,
    pub degree: Vec<f64>,
    pub c_sym: BlockSparseMatrix,
}

pub fn assemble_gcl(g: &ConnectionGraph) -> Result<Gcl> {
    let n = g.n();
    let mut s = BlockSparseMatrix::new(n);
    let mut degree = vec![0.0; n];
    for (i, d) in degree.iter_mut().enumerate() {
        for (j, e) in g.neighbors(i) {
            if e.w > 0.0 {
                s.insert(i, j, e.r.scale(e.w));
                *d += e.w;
            }
        }
    }
    if let Some(vertex) = degree.iter().position(|&d| d <= 0.0) {
        return Err(Error::ZeroDegree { vertex });
    }
    let inv_sqrt: Vec<f64> = degree.iter().map(|d| 1.0 / d.sqrt()).collect();
    let mut c_sym = BlockSparseMatrix::new(n);
    for i in 0..n {
        for &(j, m) in s.row(i) {
            c_sym.insert(i, j, m.scale(inv_sqrt[i] * inv_sqrt[j]));
        }
    }
    Ok(Gcl { s, degree, c_sym })
}

/// Which eigenvectors feed the projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrientationMode {
    /// Top two eigenvectors of `C`.
    Top12,
    /// Third and fourth eigenvectors of `C`.
    Top34,
    /// Top two eigenvectors of the unnormalized `S`.
    OnS,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    /// Nearest Z4 element of every gauge-fixed block.
    pub blocks: Vec<Rotation>,
    /// Vertices whose block was too small to project; they get identity.
    pub degenerate: Vec<usize>,
}

fn block(cols: [&[f64]; 2], i: usize) -> Mat2 {
    Mat2([
        [cols[0][2 * i], cols[1][2 * i]],
        [cols[0][2 * i + 1], cols[1][2 * i + 1]],
    ])
}

fn nearest_rotation(b: &Mat2) -> Rotation {
    let mut best = Rotation::IDENTITY;
    let mut score = f64::NEG_INFINITY;
    for q in Rotation::ALL {
        let v = b.dot(&q.as_matrix());
        if v > score {
            score = v;
            best = q;
        }
    }
    best
}

/// Projects every 2x2 block of the `2n x 2` matrix `[u0 u1]` onto Z4 after
/// fixing the gauge so that the first non-degenerate block maps to the
/// identity.
pub fn project_blocks_to_z4(u0: &[f64], u1: &[f64]) -> Result<Projection> {
    if u0.len() != u1.len() || u0.len() % 2 != 0 {
        return Err(Error::InvalidInput(
            "projection needs two columns of equal even length".into(),
        ));
    }
    let n = u0.len() / 2;
    let mut second = u1.to_vec();
    let degenerate: Vec<usize> = (0..n)
        .filter(|&i| block([u0, u1], i).frobenius_norm() < DEGENERATE_NORM)
        .collect();
    let Some(reference) = (0..n).find(|i| degenerate.binary_search(i).is_err()) else {
        return Ok(Projection {
            blocks: vec![Rotation::IDENTITY; n],
            degenerate,
        });
    };
    let mut q = block([u0, &second], reference).polar_factor();
    if q.det() < 0.0 {
        second.iter_mut().for_each(|x| *x = -*x);
        q = block([u0, &second], reference).polar_factor();
    }
    let qt = q.transpose();
    let blocks = (0..n)
        .map(|i| {
            if degenerate.binary_search(&i).is_ok() {
                Rotation::IDENTITY
            } else {
                nearest_rotation(&(block([u0, &second], i) * qt))
            }
        })
        .collect();
    Ok(Projection { blocks, degenerate })
}

/// Recovered orientations and diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Orientations {
    /// Rotation turning each patch upright, with patch 0 (or the first
    /// non-degenerate patch) fixed to identity.
    pub rotations: Vec<Rotation>,
    pub degenerate: Vec<usize>,
    /// Leading eigenvalues of the operator used.
    pub eigenvalues: Vec<f64>,
}

pub fn recover_orientations(
    g: &ConnectionGraph,
    mode: OrientationMode,
    opts: &EigenOptions,
) -> Result<Orientations> {
    let n = g.n();
    if n <= 1 {
        return Ok(Orientations {
            rotations: vec![Rotation::IDENTITY; n],
            degenerate: Vec::new(),
            eigenvalues: Vec::new(),
        });
    }
    let gcl = assemble_gcl(g)?;
    let (op, k) = match mode {
        OrientationMode::Top12 => (&gcl.c_sym, 2),
        OrientationMode::Top34 => (&gcl.c_sym, 4),
        OrientationMode::OnS => (&gcl.s, 2),
    };
    let res = top_eigenvectors(op, k, opts)?;
    let mut cols = [
        res.eigenvectors[k - 2].clone(),
        res.eigenvectors[k - 1].clone(),
    ];
    if mode != OrientationMode::OnS {
        for col in &mut cols {
            for (i, x) in col.iter_mut().enumerate() {
                *x /= gcl.degree[i / 2].sqrt();
            }
        }
    }
    let proj = project_blocks_to_z4(&cols[0], &cols[1])?;
    if !proj.degenerate.is_empty() {
        log::warn!(
            "{} patches have degenerate eigenvector blocks and keep identity orientation: {:?}",
            proj.degenerate.len(),
            proj.degenerate
        );
    }
    Ok(Orientations {
        // blocks estimate the applied rotations; undoing them turns upright
        rotations: proj.blocks.iter().map(|&b| -b).collect(),
        degenerate: proj.degenerate,
        eigenvalues: res.eigenvalues,
    })
}

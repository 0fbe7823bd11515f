//! Mahalanobis Gradient Compatibility (MGC) and derived neighbor metrics.
//!
//! Every patch edge carries the statistics of its outward gradient (edge
//! pixel minus the pixel one step inside): a mean over the `s` boundary
//! samples and a 3x3 color covariance regularized with nine fixed rows. The
//! compatibility of two abutting edges sums the Mahalanobis distances of the
//! cross-boundary gradient under each edge's statistics.
//!
//! Edges are addressed by [`Direction`] in the patch's own frame and their
//! samples are stored in counter-clockwise traversal order, so two abutting
//! edges pair sample `k` with sample `s - 1 - k`. All sums over boundary
//! samples are accumulated in integers first, which makes every value
//! independent of traversal order: mirrored and rotated configurations of
//! the same physical edge pair give bit-identical results.

use std::io::{Read, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::puzzle::{rotate_patch, Direction, GridSpec, GroundTruth, Patch, Solution};
use crate::rotation::Rotation;

const REG_ROWS: [[i64; 3]; 9] = [
    [0, 0, 0],
    [1, 1, 1],
    [-1, -1, -1],
    [0, 0, 1],
    [0, 1, 0],
    [1, 0, 0],
    [-1, 0, 0],
    [0, -1, 0],
    [0, 0, -1],
];

const DET_FLOOR: f64 = 1e-12;
const RIDGE: f64 = 1e-6;

/// Relative placement of patch `i` with respect to patch `j` in
/// `MGC_side(i, j)`: `Lr` puts `i` on the left, `Tb` puts `i` on top, `Bt`
/// puts `i` below.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Lr = 0,
    Rl = 1,
    Tb = 2,
    Bt = 3,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Lr, Side::Rl, Side::Tb, Side::Bt];

    /// The side of `i` that touches `j`.
    pub fn facing(self) -> Direction {
        match self {
            Side::Lr => Direction::Right,
            Side::Rl => Direction::Left,
            Side::Tb => Direction::Bottom,
            Side::Bt => Direction::Top,
        }
    }

    /// The relation that puts the neighbor on side `d` of `i`.
    pub fn from_facing(d: Direction) -> Side {
        match d {
            Direction::Right => Side::Lr,
            Direction::Left => Side::Rl,
            Direction::Bottom => Side::Tb,
            Direction::Top => Side::Bt,
        }
    }

    pub fn mirror(self) -> Side {
        match self {
            Side::Lr => Side::Rl,
            Side::Rl => Side::Lr,
            Side::Tb => Side::Bt,
            Side::Bt => Side::Tb,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Gradient statistics of one patch edge.
#[derive(Debug, Clone)]
pub struct EdgeStats {
    samples: Vec<[i32; 3]>,
    mean: [f64; 3],
    inv_cov: [[f64; 3]; 3],
}

impl EdgeStats {
    fn new(p: &Patch, dir: Direction) -> Result<Self> {
        let s = p.side();
        // turn the patch so that `dir` becomes its right side, then walk the
        // last column bottom to top
        let turned = rotate_patch(p, Rotation::new(-(dir.index() as i64)));
        let mut samples = Vec::with_capacity(s);
        let mut sum = [0i64; 3];
        let mut outer = [[0i64; 3]; 3];
        for row in (0..s).rev() {
            let edge = turned.pixel(row, s - 1);
            let inner = turned.pixel(row, s - 2);
            let e = edge.map(i32::from);
            let g: [i64; 3] = std::array::from_fn(|c| i64::from(edge[c]) - i64::from(inner[c]));
            samples.push(e);
            for a in 0..3 {
                sum[a] += g[a];
                for b in 0..3 {
                    outer[a][b] += g[a] * g[b];
                }
            }
        }
        for r in REG_ROWS {
            for a in 0..3 {
                for b in 0..3 {
                    outer[a][b] += r[a] * r[b];
                }
            }
        }
        let sf = s as f64;
        let mean = sum.map(|v| v as f64 / sf);
        // the nine regularization rows sum to zero, so the column mean over
        // all s + 9 rows is sum / (s + 9)
        let rows = sf + 9.0;
        let mut cov = [[0.0; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                let centered = outer[a][b] as f64 - (sum[a] * sum[b]) as f64 / rows;
                cov[a][b] = centered / (sf + 8.0);
            }
        }
        Ok(EdgeStats {
            samples,
            mean,
            inv_cov: invert_covariance(&cov)?,
        })
    }

    pub fn mean(&self) -> [f64; 3] {
        self.mean
    }

    pub fn inv_cov(&self) -> [[f64; 3]; 3] {
        self.inv_cov
    }
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn invert_covariance(cov: &[[f64; 3]; 3]) -> Result<[[f64; 3]; 3]> {
    let mut m = *cov;
    let mut det = det3(&m);
    if det.abs() < DET_FLOOR {
        for (k, row) in m.iter_mut().enumerate() {
            row[k] += RIDGE;
        }
        det = det3(&m);
        if det.abs() < DET_FLOOR {
            return Err(Error::SingularCovariance { det });
        }
    }
    let mut inv = [[0.0; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            // adjugate: cofactor of (c, r)
            let (r1, r2) = ((c + 1) % 3, (c + 2) % 3);
            let (c1, c2) = ((r + 1) % 3, (r + 2) % 3);
            inv[r][c] = (m[r1][c1] * m[r2][c2] - m[r1][c2] * m[r2][c1]) / det;
        }
    }
    Ok(inv)
}

/// The four edges of a patch, indexed by [`Direction`].
#[derive(Debug, Clone)]
pub struct PatchEdges {
    side: usize,
    edges: [EdgeStats; 4],
}

impl PatchEdges {
    pub fn new(p: &Patch) -> Result<Self> {
        Ok(PatchEdges {
            side: p.side(),
            edges: [
                EdgeStats::new(p, Direction::Right)?,
                EdgeStats::new(p, Direction::Top)?,
                EdgeStats::new(p, Direction::Left)?,
                EdgeStats::new(p, Direction::Bottom)?,
            ],
        })
    }

    pub fn edge(&self, d: Direction) -> &EdgeStats {
        &self.edges[d.index()]
    }
}

/// `sum_k (x_k - mu)ᵀ Σ⁻¹ (x_k - mu)` from the integer aggregates
/// `sxx = Σ x xᵀ` and `sx = Σ x`.
fn quad_sum(stats: &EdgeStats, sxx: &[[f64; 3]; 3], sx: &[f64; 3], count: f64) -> f64 {
    let inv = &stats.inv_cov;
    let mu = &stats.mean;
    let mut trace = 0.0;
    let mut cross = 0.0;
    let mut center = 0.0;
    for a in 0..3 {
        for b in 0..3 {
            trace += inv[a][b] * sxx[b][a];
            cross += mu[a] * inv[a][b] * sx[b];
            center += mu[a] * inv[a][b] * mu[b];
        }
    }
    trace - 2.0 * cross + count * center
}

/// Symmetrized MGC of edge `a` of one patch abutting edge `b` of another.
pub fn edge_compat(pa: &PatchEdges, a: Direction, pb: &PatchEdges, b: Direction) -> f64 {
    let ea = pa.edge(a);
    let eb = pb.edge(b);
    let s = pa.side;
    debug_assert_eq!(s, pb.side);
    let mut sx = [0i64; 3];
    let mut sxx = [[0i64; 3]; 3];
    for k in 0..s {
        let na = ea.samples[k];
        let nb = eb.samples[s - 1 - k];
        let x: [i64; 3] = std::array::from_fn(|c| i64::from(nb[c]) - i64::from(na[c]));
        for u in 0..3 {
            sx[u] += x[u];
            for v in 0..3 {
                sxx[u][v] += x[u] * x[v];
            }
        }
    }
    let sxx = sxx.map(|row| row.map(|v| v as f64));
    let fwd = sx.map(|v| v as f64);
    let bwd = sx.map(|v| -(v as f64));
    let count = s as f64;
    // the cross gradient seen from b is the negation of the one seen from a
    quad_sum(ea, &sxx, &fwd, count) + quad_sum(eb, &sxx, &bwd, count)
}

/// `MGC_side(i, j)` for two patches as given.
pub fn mgc_side(i: &Patch, j: &Patch, side: Side) -> Result<f64> {
    check_sides(i, j)?;
    let a = side.facing();
    Ok(edge_compat(
        &PatchEdges::new(i)?,
        a,
        &PatchEdges::new(j)?,
        a.opposite(),
    ))
}

/// `MGC_lr(left, right)`.
pub fn mgc_lr(left: &Patch, right: &Patch) -> Result<f64> {
    mgc_side(left, right, Side::Lr)
}

fn check_sides(i: &Patch, j: &Patch) -> Result<()> {
    if i.side() != j.side() {
        return Err(Error::InvalidInput(format!(
            "patch sides differ: {} vs {}",
            i.side(),
            j.side()
        )));
    }
    Ok(())
}

/// All 16 MGC values for every unordered patch pair.
///
/// Stored in pair-major order (`i < j`), then rotation `q` of `j`, then side
/// in `[lr, rl, tb, bt]` order: slot `(q, side)` of pair `(i, j)` holds
/// `MGC_side(P_i, q · P_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseTable {
    n: usize,
    side: usize,
    values: Vec<f32>,
}

const MAGIC: &[u8; 4] = b"MGCT";
const VERSION: u32 = 1;

impl PairwiseTable {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn patch_side(&self) -> usize {
        self.side
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    #[inline]
    fn pair_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < self.n);
        i * (2 * self.n - i - 1) / 2 + (j - i - 1)
    }

    #[inline]
    fn slot(q: usize, side: Side) -> usize {
        q * 4 + side.index()
    }

    /// Compatibility of edge `a` of patch `i` touching edge `b` of patch `j`,
    /// both in the patches' own frames.
    #[inline]
    pub fn edge_pair(&self, i: usize, a: Direction, j: usize, b: Direction) -> f32 {
        assert!(i != j, "self-pairs are not stored");
        let (lo, a_lo, hi, b_hi) = if i < j { (i, a, j, b) } else { (j, b, i, a) };
        let side = Side::from_facing(a_lo);
        let q = (a_lo.index() + 6 - b_hi.index()) % 4;
        self.values[self.pair_index(lo, hi) * 16 + Self::slot(q, side)]
    }

    /// `MGC_side(P_i, q · P_j)`.
    #[inline]
    pub fn get(&self, i: usize, j: usize, q: Rotation, side: Side) -> f32 {
        let a = side.facing();
        let b = Direction::from_index(a.index() + 6 - q.quarter_turns() as usize);
        self.edge_pair(i, a, j, b)
    }

    /// `MGC_side(ri · P_i, rj · P_j)`.
    #[inline]
    pub fn oriented(&self, i: usize, ri: Rotation, j: usize, rj: Rotation, side: Side) -> f32 {
        let a = side.facing();
        let own = a.rotated(ri.inverse());
        let other = a.opposite().rotated(rj.inverse());
        self.edge_pair(i, own, j, other)
    }

    /// Smallest of the 16 values between `i` and `j`, with the rotation of
    /// `j` and relation achieving it (first in slot order on ties).
    pub fn best_placement(&self, i: usize, j: usize) -> (f32, Rotation, Side) {
        let mut best = (f32::INFINITY, Rotation::IDENTITY, Side::Lr);
        for q in Rotation::ALL {
            for side in Side::ALL {
                let v = self.get(i, j, q, side);
                if v < best.0 {
                    best = (v, q, side);
                }
            }
        }
        best
    }

    /// Returns a copy with all 16 entries of each listed pair scaled.
    pub fn scaled_pairs(&self, pairs: &[(usize, usize)], factor: f32) -> PairwiseTable {
        let mut out = self.clone();
        let mut seen = std::collections::HashSet::new();
        for &(i, j) in pairs {
            let (lo, hi) = if i < j { (i, j) } else { (j, i) };
            if lo == hi || !seen.insert((lo, hi)) {
                continue;
            }
            let base = self.pair_index(lo, hi) * 16;
            for v in &mut out.values[base..base + 16] {
                *v *= factor;
            }
        }
        out
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.n as u32).to_le_bytes())?;
        w.write_all(&(self.side as u32).to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.values.len() * 4);
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut head = [0u8; 16];
        r.read_exact(&mut head)?;
        if &head[0..4] != MAGIC {
            return Err(Error::TableFormat("bad magic".into()));
        }
        let word = |k: usize| u32::from_le_bytes(head[k..k + 4].try_into().unwrap());
        let version = word(4);
        if version != VERSION {
            return Err(Error::TableFormat(format!("unsupported version {version}")));
        }
        let n = word(8) as usize;
        let side = word(12) as usize;
        let count = n * n.saturating_sub(1) / 2 * 16;
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        if buf.len() != count * 4 {
            return Err(Error::TableFormat(format!(
                "expected {} payload bytes, found {}",
                count * 4,
                buf.len()
            )));
        }
        let values = buf
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(PairwiseTable { n, side, values })
    }
}

/// Computes the 16 MGC values of every patch pair. Runs on the current rayon
/// pool.
pub fn build_pairwise_table(patches: &[Patch]) -> Result<PairwiseTable> {
    let n = patches.len();
    if n == 0 {
        return Err(Error::InvalidInput(
            "a pairwise table needs at least one patch".into(),
        ));
    }
    let s = patches[0].side();
    for p in patches {
        if p.side() != s {
            return Err(Error::InvalidInput("patches have different sides".into()));
        }
    }
    let edges: Vec<PatchEdges> = patches
        .par_iter()
        .map(PatchEdges::new)
        .collect::<Result<_>>()?;

    let rows: Vec<Vec<f32>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row = Vec::with_capacity((n - i - 1) * 16);
            for j in i + 1..n {
                for q in Rotation::ALL {
                    for side in Side::ALL {
                        let a = side.facing();
                        let b = Direction::from_index(a.index() + 6 - q.quarter_turns() as usize);
                        row.push(edge_compat(&edges[i], a, &edges[j], b) as f32);
                    }
                }
            }
            row
        })
        .collect();
    Ok(PairwiseTable {
        n,
        side: s,
        values: rows.concat(),
    })
}

/// Neighbor subsets used by the NAM metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NamKind {
    All,
    Ltr,
    Trb,
    Blt,
    Lbr,
}

impl NamKind {
    pub const PARTIAL: [NamKind; 4] = [NamKind::Ltr, NamKind::Trb, NamKind::Blt, NamKind::Lbr];

    pub fn directions(self) -> &'static [Direction] {
        use Direction::*;
        match self {
            NamKind::All => &[Top, Left, Bottom, Right],
            NamKind::Ltr => &[Left, Top, Right],
            NamKind::Trb => &[Top, Right, Bottom],
            NamKind::Blt => &[Bottom, Left, Top],
            NamKind::Lbr => &[Left, Bottom, Right],
        }
    }
}

/// Per-patch neighbor-averaged metrics of a placed, oriented solution.
#[derive(Debug, Clone, PartialEq)]
pub struct NamValues {
    pub all: Vec<f64>,
    pub ltr: Vec<f64>,
    pub trb: Vec<f64>,
    pub blt: Vec<f64>,
    pub lbr: Vec<f64>,
}

impl NamValues {
    pub fn get(&self, kind: NamKind) -> &[f64] {
        match kind {
            NamKind::All => &self.all,
            NamKind::Ltr => &self.ltr,
            NamKind::Trb => &self.trb,
            NamKind::Blt => &self.blt,
            NamKind::Lbr => &self.lbr,
        }
    }
}

/// Side MGC of patch `i` against its placed neighbor in direction `d`, or
/// `None` at the frame boundary.
pub fn neighbor_mgc(
    solution: &Solution,
    occupancy: &[usize],
    table: &PairwiseTable,
    i: usize,
    d: Direction,
) -> Option<f64> {
    let grid = solution.grid;
    let cell = grid.neighbor(solution.placement[i], d)?;
    let j = occupancy[grid.index(cell)];
    Some(f64::from(table.oriented(
        i,
        solution.orientation[i],
        j,
        solution.orientation[j],
        Side::from_facing(d),
    )))
}

pub fn nam_values(solution: &Solution, table: &PairwiseTable) -> NamValues {
    let occupancy = solution.occupancy();
    let n = solution.len();
    let per_dir: Vec<[Option<f64>; 4]> = (0..n)
        .map(|i| Direction::ALL.map(|d| neighbor_mgc(solution, &occupancy, table, i, d)))
        .collect();
    let average = |kind: NamKind| -> Vec<f64> {
        per_dir
            .iter()
            .map(|vals| {
                let (sum, count) = kind
                    .directions()
                    .iter()
                    .filter_map(|d| vals[d.index()])
                    .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
                if count == 0 {
                    0.0
                } else {
                    sum / count as f64
                }
            })
            .collect()
    };
    NamValues {
        all: average(NamKind::All),
        ltr: average(NamKind::Ltr),
        trb: average(NamKind::Trb),
        blt: average(NamKind::Blt),
        lbr: average(NamKind::Lbr),
    }
}

/// How well a single threshold separates true neighbor relations from every
/// other relative placement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSeparation {
    pub max_neighbor: f64,
    pub min_other: f64,
}

impl MetricSeparation {
    pub fn margin(&self) -> f64 {
        self.min_other - self.max_neighbor
    }

    /// A perfect metric admits a threshold strictly between the two classes.
    pub fn is_perfect(&self) -> bool {
        self.margin() > 0.0
    }
}

/// Compares the table's values on the true relative placements against all
/// remaining placements of all pairs.
pub fn perfect_metric_margin(
    table: &PairwiseTable,
    truth: &GroundTruth,
) -> Result<MetricSeparation> {
    let n = table.n();
    if truth.len() != n {
        return Err(Error::SizeMismatch {
            expected: n,
            actual: truth.len(),
        });
    }
    let grid: GridSpec = truth.grid;
    let sol = Solution::from(truth);
    let occupancy = sol.occupancy();
    let mut correct = std::collections::HashSet::new();
    let mut max_neighbor = f64::NEG_INFINITY;
    for i in 0..n {
        for d in [Direction::Right, Direction::Bottom] {
            let Some(cell) = grid.neighbor(truth.placement[i], d) else {
                continue;
            };
            let j = occupancy[grid.index(cell)];
            let a = d.rotated(truth.orientation[i].inverse());
            let b = d.opposite().rotated(truth.orientation[j].inverse());
            max_neighbor = max_neighbor.max(f64::from(table.edge_pair(i, a, j, b)));
            let key = if i < j { (i, a, j, b) } else { (j, b, i, a) };
            correct.insert(key);
        }
    }
    let mut min_other = f64::INFINITY;
    for i in 0..n {
        for j in i + 1..n {
            for a in Direction::ALL {
                for b in Direction::ALL {
                    if !correct.contains(&(i, a, j, b)) {
                        min_other = min_other.min(f64::from(table.edge_pair(i, a, j, b)));
                    }
                }
            }
        }
    }
    Ok(MetricSeparation {
        max_neighbor,
        min_other,
    })
}

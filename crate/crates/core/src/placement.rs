//! Location solvers for patches whose orientations are known.
//!
//! [`GreedyPlacer`] grows the assembly best-first from a seed patch on an
//! unbounded board, accepting only placements whose bounding box still fits
//! the target frame. When the frame may also be filled transposed (the
//! orientations are only known up to a global rotation), a transposed result
//! is turned a quarter counter-clockwise at the end.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::metrics::{PairwiseTable, Side};
use crate::puzzle::{Cell, Direction, GridSpec, Solution};
use crate::rng::{self, Stream};
use crate::rotation::Rotation;

/// A type-1 solver: places upright patches into the frame.
pub trait PlacementStrategy {
    fn name(&self) -> &'static str;

    fn place(
        &self,
        table: &PairwiseTable,
        grid: GridSpec,
        orientations: &[Rotation],
        seed: u64,
    ) -> Result<Solution>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GreedyPlacer {
    /// Also accept a `cols x rows` assembly and turn it into the frame.
    pub allow_transpose: bool,
}

impl PlacementStrategy for GreedyPlacer {
    fn name(&self) -> &'static str {
        "greedy"
    }

    fn place(
        &self,
        table: &PairwiseTable,
        grid: GridSpec,
        orientations: &[Rotation],
        seed: u64,
    ) -> Result<Solution> {
        solve_type1(table, grid, orientations, self.allow_transpose, seed)
    }
}

type Pos = (i64, i64);

fn step(p: Pos, d: Direction) -> Pos {
    let (dr, dc) = d.offset();
    (p.0 + dr as i64, p.1 + dc as i64)
}

#[derive(Debug, Clone, Copy)]
struct Bounds {
    min: Pos,
    max: Pos,
}

impl Bounds {
    fn with(&self, p: Pos) -> Bounds {
        Bounds {
            min: (self.min.0.min(p.0), self.min.1.min(p.1)),
            max: (self.max.0.max(p.0), self.max.1.max(p.1)),
        }
    }

    fn shape(&self) -> (usize, usize) {
        (
            (self.max.0 - self.min.0 + 1) as usize,
            (self.max.1 - self.min.1 + 1) as usize,
        )
    }
}

/// Empty-board state of the greedy solver.
struct Board<'a> {
    table: &'a PairwiseTable,
    orient: &'a [Rotation],
    occupied: BTreeMap<Pos, usize>,
    pool: BTreeSet<usize>,
    frontier: BTreeSet<Pos>,
    /// best score at a frontier cell and every patch attaining it
    cache: BTreeMap<Pos, (f64, Vec<usize>)>,
    bounds: Option<Bounds>,
}

impl Board<'_> {
    fn score(&self, cell: Pos, p: usize) -> f64 {
        let mut sum = 0.0;
        let mut count = 0;
        for d in Direction::ALL {
            if let Some(&q) = self.occupied.get(&step(cell, d)) {
                sum += f64::from(self.table.oriented(
                    p,
                    self.orient[p],
                    q,
                    self.orient[q],
                    Side::from_facing(d),
                ));
                count += 1;
            }
        }
        sum / count as f64
    }

    fn best_at(&self, cell: Pos) -> (f64, Vec<usize>) {
        let mut best = f64::INFINITY;
        let mut ties = Vec::new();
        for &p in &self.pool {
            let v = self.score(cell, p);
            if v < best {
                best = v;
                ties.clear();
            }
            if v == best {
                ties.push(p);
            }
        }
        (best, ties)
    }

    fn put(&mut self, cell: Pos, p: usize) {
        self.occupied.insert(cell, p);
        self.pool.remove(&p);
        self.frontier.remove(&cell);
        self.cache.remove(&cell);
        self.bounds = Some(match self.bounds {
            None => Bounds {
                min: cell,
                max: cell,
            },
            Some(b) => b.with(cell),
        });
        for d in Direction::ALL {
            let nb = step(cell, d);
            if !self.occupied.contains_key(&nb) {
                self.frontier.insert(nb);
                self.cache.remove(&nb);
            }
        }
        self.cache.retain(|_, (_, ties)| !ties.contains(&p));
    }
}

fn fits(shape: (usize, usize), grid: GridSpec, allow_transpose: bool) -> bool {
    (shape.0 <= grid.rows && shape.1 <= grid.cols)
        || (allow_transpose && shape.0 <= grid.cols && shape.1 <= grid.rows)
}

/// Greedy best-first placement of patches with fixed orientations.
///
/// Starts from the patch whose four best side matches sum lowest, then
/// repeatedly fills the (cell, patch) pair with the lowest average side MGC
/// against the cell's occupied neighbors. Exact ties are broken from the
/// seeded placement stream.
pub fn solve_type1(
    table: &PairwiseTable,
    grid: GridSpec,
    orientations: &[Rotation],
    allow_transpose: bool,
    seed: u64,
) -> Result<Solution> {
    let n = grid.len();
    if table.n() != n || orientations.len() != n {
        return Err(Error::SizeMismatch {
            expected: n,
            actual: if table.n() != n {
                table.n()
            } else {
                orientations.len()
            },
        });
    }
    if n == 1 {
        return Solution::new(grid, vec![Cell::new(0, 0)], orientations.to_vec());
    }
    let mut rng = rng::stream(seed, Stream::Placement);

    let totals: Vec<f64> = (0..n)
        .map(|i| {
            Direction::ALL
                .iter()
                .map(|&d| {
                    (0..n)
                        .filter(|&j| j != i)
                        .map(|j| {
                            f64::from(table.oriented(
                                i,
                                orientations[i],
                                j,
                                orientations[j],
                                Side::from_facing(d),
                            ))
                        })
                        .fold(f64::INFINITY, f64::min)
                })
                .sum()
        })
        .collect();
    let lowest = totals.iter().copied().fold(f64::INFINITY, f64::min);
    let starts: Vec<usize> = (0..n).filter(|&i| totals[i] == lowest).collect();
    let start = *starts.choose(&mut rng).unwrap();

    let mut board = Board {
        table,
        orient: orientations,
        occupied: BTreeMap::new(),
        pool: (0..n).collect(),
        frontier: BTreeSet::new(),
        cache: BTreeMap::new(),
        bounds: None,
    };
    board.put((0, 0), start);

    while !board.pool.is_empty() {
        let bounds = board.bounds.unwrap();
        let open: Vec<Pos> = board
            .frontier
            .iter()
            .copied()
            .filter(|&c| fits(bounds.with(c).shape(), grid, allow_transpose))
            .collect();
        let mut best = f64::INFINITY;
        let mut ties: Vec<(Pos, usize)> = Vec::new();
        for cell in open {
            if !board.cache.contains_key(&cell) {
                let entry = board.best_at(cell);
                board.cache.insert(cell, entry);
            }
            let (v, patches) = &board.cache[&cell];
            if *v < best {
                best = *v;
                ties.clear();
            }
            if *v == best {
                ties.extend(patches.iter().map(|&p| (cell, p)));
            }
        }
        let &(cell, p) = if ties.len() == 1 {
            &ties[0]
        } else {
            ties.choose(&mut rng).ok_or_else(|| {
                Error::InvalidInput("placement frontier exhausted before the frame was full".into())
            })?
        };
        board.put(cell, p);
    }

    let bounds = board.bounds.unwrap();
    let shape = bounds.shape();
    let mut placement = vec![Cell::new(0, 0); n];
    for (&(r, c), &p) in &board.occupied {
        placement[p] = Cell::new((r - bounds.min.0) as usize, (c - bounds.min.1) as usize);
    }
    let sol = Solution::new(
        GridSpec::new(shape.0, shape.1)?,
        placement,
        orientations.to_vec(),
    )?;
    if shape == (grid.rows, grid.cols) {
        Ok(sol)
    } else {
        Ok(sol.rotated(Rotation::new(1)))
    }
}

/// Exhaustive minimizer of `Σ (W_est(i, j) - W_true(π(i), π(j)))²` over all
/// permutations `π` of at most nine vertices. Returns the first minimizer in
/// lexicographic order and its objective.
pub fn qap_oracle(
    grid: GridSpec,
    w_est: &[Vec<f64>],
    w_true: &[Vec<f64>],
) -> Result<(Vec<usize>, f64)> {
    const LIMIT: usize = 9;
    let n = grid.len();
    if n > LIMIT {
        return Err(Error::TooLarge { n, limit: LIMIT });
    }
    if w_est.len() != n || w_true.len() != n || w_est.iter().chain(w_true).any(|r| r.len() != n) {
        return Err(Error::SizeMismatch {
            expected: n,
            actual: w_est.len(),
        });
    }

    struct Search<'a> {
        est: &'a [Vec<f64>],
        truth: &'a [Vec<f64>],
        perm: Vec<usize>,
        used: Vec<bool>,
        best: (Vec<usize>, f64),
    }

    impl Search<'_> {
        fn go(&mut self, k: usize, cost: f64) {
            let n = self.used.len();
            if cost >= self.best.1 && !self.best.0.is_empty() {
                return;
            }
            if k == n {
                self.best = (self.perm.clone(), cost);
                return;
            }
            for cell in 0..n {
                if self.used[cell] {
                    continue;
                }
                // terms between k and the already assigned vertices
                let mut add = {
                    let d = self.est[k][k] - self.truth[cell][cell];
                    d * d
                };
                for (i, &ci) in self.perm.iter().enumerate() {
                    let a = self.est[k][i] - self.truth[cell][ci];
                    let b = self.est[i][k] - self.truth[ci][cell];
                    add += a * a + b * b;
                }
                self.used[cell] = true;
                self.perm.push(cell);
                self.go(k + 1, cost + add);
                self.perm.pop();
                self.used[cell] = false;
            }
        }
    }

    let mut s = Search {
        est: w_est,
        truth: w_true,
        perm: Vec::with_capacity(n),
        used: vec![false; n],
        best: (Vec::new(), f64::INFINITY),
    };
    s.go(0, 0.0);
    Ok(s.best)
}

/// 0/1 adjacency of the grid cells, row-major.
pub fn grid_adjacency(grid: GridSpec) -> Vec<Vec<f64>> {
    let n = grid.len();
    let mut w = vec![vec![0.0; n]; n];
    for (a, b) in grid.edges() {
        w[a][b] = 1.0;
        w[b][a] = 1.0;
    }
    w
}

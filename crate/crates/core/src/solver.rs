//! Type-3 and type-2 pipelines: graph construction, spectral orientation
//! recovery, placement, and the NAM-driven refinement loop.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::Serialize;

use crate::congraph::{
    build_type2_graph, build_type3_graph, connect_components, solution_graph, ConnectionGraph,
};
use crate::error::{Error, Result};
use crate::metrics::{nam_values, neighbor_mgc, NamKind, PairwiseTable, Side};
use crate::placement::solve_type1;
use crate::puzzle::{Cell, Direction, GridSpec, PuzzleType, Solution};
use crate::rotation::Rotation;
use crate::spectral::{recover_orientations, EigenOptions, OrientationMode};
use crate::vdd::{default_truncation, penalize_far_pairs, vdd_distances, VddOptions};

/// Refill weight when the best fit beats the median NAM.
pub const W_REFILL_GOOD: f64 = 0.6;
/// Refill weight when the best fit lies between one and two medians.
pub const W_REFILL_FAIR: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    #[default]
    Standard,
    /// Also try the third and fourth eigenvectors for the first pass and
    /// keep whichever run reaches the lower Err.
    Top34Init,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub iterations: usize,
    pub variant: Variant,
    pub seed: u64,
    pub med_factor: f64,
    pub eigen: EigenOptions,
    /// Penalize far pairs by vector diffusion distance before placement.
    pub vdd: Option<VddOptions>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            iterations: 5,
            variant: Variant::Standard,
            seed: 0,
            med_factor: 1.5,
            eigen: EigenOptions::default(),
            vdd: None,
        }
    }
}

impl SolverOptions {
    fn eigen(&self) -> EigenOptions {
        EigenOptions {
            seed: self.seed,
            ..self.eigen
        }
    }
}

/// Sum over all patches of the side MGC against each placed neighbor.
/// Every grid edge is counted once from each end.
pub fn err_metric(solution: &Solution, table: &PairwiseTable) -> f64 {
    let occupancy = solution.occupancy();
    (0..solution.len())
        .map(|i| {
            Direction::ALL
                .iter()
                .filter_map(|&d| neighbor_mgc(solution, &occupancy, table, i, d))
                .sum::<f64>()
        })
        .sum()
}

fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn check_sizes(table: &PairwiseTable, grid: GridSpec) -> Result<()> {
    if table.n() != grid.len() {
        return Err(Error::SizeMismatch {
            expected: grid.len(),
            actual: table.n(),
        });
    }
    Ok(())
}

/// Type-3 solve: patch `k` stays at cell `k`, only orientations are unknown.
///
/// The spectral gauge is arbitrary, so the four global offsets of the
/// recovered rotations are compared by Err and the lowest one is kept.
pub fn solve_type3(
    table: &PairwiseTable,
    grid: GridSpec,
    opts: &SolverOptions,
) -> Result<Solution> {
    check_sizes(table, grid)?;
    let g = build_type3_graph(grid, table);
    let rec = recover_orientations(&g, OrientationMode::Top12, &opts.eigen())?;
    let placement: Vec<Cell> = (0..grid.len()).map(|k| grid.cell(k)).collect();
    let mut best: Option<Solution> = None;
    for offset in Rotation::ALL {
        let orientation = rec.rotations.iter().map(|&r| r + offset).collect();
        let mut sol = Solution::new(grid, placement.clone(), orientation)?;
        sol.err = err_metric(&sol, table);
        if best.as_ref().map_or(true, |b| sol.err < b.err) {
            best = Some(sol);
        }
    }
    Ok(best.expect("four candidates"))
}

/// Result of one affinity/connection update.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphUpdate {
    pub graph: ConnectionGraph,
    /// Solution edges dropped by the NAM thresholds.
    pub removed_edges: usize,
    /// Empty locations that received new edges.
    pub refilled_locations: usize,
    /// Bridges added to reconnect the graph.
    pub bridges: usize,
}

/// Rebuilds the connection graph from a solution.
///
/// Solution edges start at weight 1. A patch whose NAM over all sides
/// exceeds `med_factor` times the median loses the sides of every partial
/// NAM that also exceeds `med_factor` times its own median. A location left
/// without edges but with at least two intact grid neighbors is refilled
/// with the patch and rotation fitting those neighbors best.
pub fn update_graph(
    solution: &Solution,
    table: &PairwiseTable,
    med_factor: f64,
    seed: u64,
) -> GraphUpdate {
    let n = solution.len();
    let grid = solution.grid;
    let mut g = solution_graph(solution);
    if n <= 1 {
        return GraphUpdate {
            graph: g,
            removed_edges: 0,
            refilled_locations: 0,
            bridges: 0,
        };
    }
    let occupancy = solution.occupancy();
    let nam = nam_values(solution, table);
    let med_all = median(&nam.all);

    let mut removed: BTreeSet<(usize, usize)> = BTreeSet::new();
    for i in 0..n {
        if nam.all[i] <= med_factor * med_all {
            continue;
        }
        for kind in NamKind::PARTIAL {
            let values = nam.get(kind);
            if values[i] <= med_factor * median(values) {
                continue;
            }
            for &d in kind.directions() {
                if let Some(cell) = grid.neighbor(solution.placement[i], d) {
                    let j = occupancy[grid.index(cell)];
                    removed.insert((i.min(j), i.max(j)));
                }
            }
        }
    }
    for &(i, j) in &removed {
        g.remove_edge(i, j);
    }

    let empty: Vec<bool> = (0..n).map(|i| g.degree(i) == 0.0).collect();
    let mut refilled = 0;
    for cell_index in 0..grid.len() {
        let owner = occupancy[cell_index];
        if !empty[owner] {
            continue;
        }
        let cell = grid.cell(cell_index);
        let intact: Vec<(Direction, usize)> = Direction::ALL
            .iter()
            .filter_map(|&d| {
                grid.neighbor(cell, d)
                    .map(|c| (d, occupancy[grid.index(c)]))
            })
            .filter(|&(_, j)| !empty[j])
            .collect();
        if intact.len() < 2 {
            continue;
        }
        let fit = |c: usize, rho: Rotation| -> f64 {
            intact
                .iter()
                .map(|&(d, j)| {
                    f64::from(table.oriented(
                        c,
                        rho,
                        j,
                        solution.orientation[j],
                        Side::from_facing(d),
                    ))
                })
                .sum::<f64>()
                / intact.len() as f64
        };
        let (score, c, rho) = (0..n)
            .into_par_iter()
            .filter(|c| intact.iter().all(|&(_, j)| j != *c))
            .flat_map_iter(|c| Rotation::ALL.into_iter().map(move |rho| (c, rho)))
            .map(|(c, rho)| (fit(c, rho), c, rho))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)))
            .expect("a refill candidate exists");
        let w = if score < med_all {
            W_REFILL_GOOD
        } else if score < 2.0 * med_all {
            W_REFILL_FAIR
        } else {
            continue;
        };
        for &(_, j) in &intact {
            if !g.has_edge(c, j) {
                g.set_edge(c, j, w, (solution.orientation[j] - rho).as_matrix());
            }
        }
        refilled += 1;
    }
    let bridges = connect_components(&mut g, table, seed);
    GraphUpdate {
        graph: g,
        removed_edges: removed.len(),
        refilled_locations: refilled,
        bridges,
    }
}

/// One pass of the type-2 loop.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub solution: Solution,
    pub err: f64,
    pub removed_edges: usize,
    pub refilled_locations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Type2Outcome {
    /// The recorded solution with the lowest Err.
    pub solution: Solution,
    pub best_iteration: usize,
    /// Mode used for the first spectral pass of the returned run.
    pub initial_mode: OrientationMode,
    pub records: Vec<IterationRecord>,
}

#[derive(Serialize)]
struct RecordSummary {
    iteration: usize,
    err: f64,
    removed_edges: usize,
    refilled_locations: usize,
}

impl Type2Outcome {
    /// Per-iteration summary without the solutions themselves.
    pub fn trace_json(&self) -> serde_json::Value {
        let records: Vec<RecordSummary> = self
            .records
            .iter()
            .map(|r| RecordSummary {
                iteration: r.iteration,
                err: r.err,
                removed_edges: r.removed_edges,
                refilled_locations: r.refilled_locations,
            })
            .collect();
        serde_json::json!({
            "best_iteration": self.best_iteration,
            "initial_mode": format!("{:?}", self.initial_mode).to_lowercase(),
            "iterations": records,
        })
    }
}

fn place(
    g: &ConnectionGraph,
    mode: OrientationMode,
    table: &PairwiseTable,
    grid: GridSpec,
    opts: &SolverOptions,
) -> Result<Solution> {
    let rec = recover_orientations(g, mode, &opts.eigen())?;
    let mut sol = match opts.vdd {
        Some(v) => {
            let k = v.k.unwrap_or_else(|| default_truncation(g.n()));
            let emb = vdd_distances(g, v.t, k, &opts.eigen())?;
            let penalized = penalize_far_pairs(table, &emb, v.quantile, v.alpha)?;
            solve_type1(&penalized, grid, &rec.rotations, true, opts.seed)?
        }
        None => solve_type1(table, grid, &rec.rotations, true, opts.seed)?,
    };
    sol.err = err_metric(&sol, table);
    Ok(sol)
}

fn run_type2(
    table: &PairwiseTable,
    grid: GridSpec,
    initial: OrientationMode,
    opts: &SolverOptions,
) -> Result<Type2Outcome> {
    let g = build_type2_graph(table, opts.seed)?;
    let first = place(&g, initial, table, grid, opts)?;
    log::info!("iteration 0: Err = {:.6}", first.err);
    let mut records = vec![IterationRecord {
        iteration: 0,
        err: first.err,
        solution: first,
        removed_edges: 0,
        refilled_locations: 0,
    }];
    for iteration in 1..=opts.iterations {
        let prev = &records.last().expect("initial record").solution;
        let up = update_graph(prev, table, opts.med_factor, opts.seed);
        let sol = place(&up.graph, OrientationMode::Top12, table, grid, opts)?;
        log::info!(
            "iteration {iteration}: Err = {:.6}, removed {} edges, refilled {} locations",
            sol.err,
            up.removed_edges,
            up.refilled_locations
        );
        records.push(IterationRecord {
            iteration,
            err: sol.err,
            solution: sol,
            removed_edges: up.removed_edges,
            refilled_locations: up.refilled_locations,
        });
    }
    let best = records
        .iter()
        .min_by(|a, b| a.err.total_cmp(&b.err).then(a.iteration.cmp(&b.iteration)))
        .expect("at least one record");
    Ok(Type2Outcome {
        solution: best.solution.clone(),
        best_iteration: best.iteration,
        initial_mode: initial,
        records,
    })
}

/// Type-2 solve: unknown placement and orientation.
pub fn solve_type2(
    table: &PairwiseTable,
    grid: GridSpec,
    opts: &SolverOptions,
) -> Result<Type2Outcome> {
    check_sizes(table, grid)?;
    if grid.len() == 1 {
        let sol = Solution::new(grid, vec![Cell::new(0, 0)], vec![Rotation::IDENTITY])?;
        return Ok(Type2Outcome {
            records: vec![IterationRecord {
                iteration: 0,
                solution: sol.clone(),
                err: 0.0,
                removed_edges: 0,
                refilled_locations: 0,
            }],
            solution: sol,
            best_iteration: 0,
            initial_mode: OrientationMode::Top12,
        });
    }
    let standard = run_type2(table, grid, OrientationMode::Top12, opts)?;
    if opts.variant == Variant::Standard || grid.len() < 3 {
        return Ok(standard);
    }
    let alt = run_type2(table, grid, OrientationMode::Top34, opts)?;
    Ok(if alt.solution.err < standard.solution.err {
        alt
    } else {
        standard
    })
}

/// Outcome of solving a puzzle of any type.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub solution: Solution,
    /// Iteration history, present for type 2.
    pub type2: Option<Type2Outcome>,
}

/// Dispatches on the puzzle type. Type 1 skips orientation recovery.
pub fn solve_puzzle(
    table: &PairwiseTable,
    grid: GridSpec,
    puzzle_type: PuzzleType,
    opts: &SolverOptions,
) -> Result<SolveOutcome> {
    check_sizes(table, grid)?;
    match puzzle_type {
        PuzzleType::Type1 => {
            let upright = vec![Rotation::IDENTITY; grid.len()];
            let mut solution = solve_type1(table, grid, &upright, false, opts.seed)?;
            solution.err = err_metric(&solution, table);
            Ok(SolveOutcome {
                solution,
                type2: None,
            })
        }
        PuzzleType::Type2 => {
            let out = solve_type2(table, grid, opts)?;
            Ok(SolveOutcome {
                solution: out.solution.clone(),
                type2: Some(out),
            })
        }
        PuzzleType::Type3 => Ok(SolveOutcome {
            solution: solve_type3(table, grid, opts)?,
            type2: None,
        }),
    }
}

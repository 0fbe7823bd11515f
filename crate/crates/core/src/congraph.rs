//! Connection graphs: vertices are patches, edges carry an affinity `W` and a
//! 2x2 connection block `R`.
//!
//! `R[i, j]` is the rotation that brings patch `j` into the frame of patch
//! `i` as given, so for patches that must be turned by `r_i` and `r_j` to be
//! upright, `R[i, j] = M(r_j - r_i)`. Blocks are stored per ordered pair with
//! `R[j, i] = R[i, j]ᵀ`.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::SliceRandom;
use serde_json::json;

use crate::error::Result;
use crate::metrics::{PairwiseTable, Side};
use crate::puzzle::{Cell, Direction, GridSpec, Solution};
use crate::rng::{self, Stream};
use crate::rotation::{Mat2, Rotation};

/// Mutual best matches.
pub const W_MUTUAL: f64 = 1.0;
/// One-directional best matches.
pub const W_ONE_WAY: f64 = 0.01;
/// Edges added to join components.
pub const W_BRIDGE: f64 = W_ONE_WAY / 2.0;

const ROTATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub w: f64,
    pub r: Mat2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionGraph {
    adj: Vec<BTreeMap<usize, Edge>>,
}

impl ConnectionGraph {
    pub fn new(n: usize) -> Self {
        ConnectionGraph {
            adj: vec![BTreeMap::new(); n],
        }
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    /// Inserts or overwrites edge `{i, j}` with `R[i, j] = r`.
    pub fn set_edge(&mut self, i: usize, j: usize, w: f64, r: Mat2) {
        assert!(i != j, "self-loops are not allowed");
        self.adj[i].insert(j, Edge { w, r });
        self.adj[j].insert(
            i,
            Edge {
                w,
                r: r.transpose(),
            },
        );
    }

    pub fn set_weight(&mut self, i: usize, j: usize, w: f64) {
        if let Some(e) = self.adj[i].get_mut(&j) {
            e.w = w;
        }
        if let Some(e) = self.adj[j].get_mut(&i) {
            e.w = w;
        }
    }

    pub fn remove_edge(&mut self, i: usize, j: usize) {
        self.adj[i].remove(&j);
        self.adj[j].remove(&i);
    }

    pub fn edge(&self, i: usize, j: usize) -> Option<&Edge> {
        self.adj[i].get(&j)
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i].contains_key(&j)
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.edge(i, j).map_or(0.0, |e| e.w)
    }

    pub fn connection(&self, i: usize, j: usize) -> Option<Mat2> {
        self.edge(i, j).map(|e| e.r)
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, &Edge)> + '_ {
        self.adj[i].iter().map(|(&j, e)| (j, e))
    }

    pub fn neighbor_set(&self, i: usize) -> BTreeSet<usize> {
        self.adj[i].keys().copied().collect()
    }

    pub fn degree(&self, i: usize) -> f64 {
        self.adj[i].values().map(|e| e.w).sum()
    }

    /// Unordered edges as `(i, j)` with `i < j`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, nb) in self.adj.iter().enumerate() {
            out.extend(nb.keys().filter(|&&j| j > i).map(|&j| (i, j)));
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(BTreeMap::len).sum::<usize>() / 2
    }

    /// Connected components, each sorted, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.n();
        let mut label = vec![usize::MAX; n];
        let mut comps = Vec::new();
        for start in 0..n {
            if label[start] != usize::MAX {
                continue;
            }
            let id = comps.len();
            let mut stack = vec![start];
            let mut members = Vec::new();
            label[start] = id;
            while let Some(v) = stack.pop() {
                members.push(v);
                for &u in self.adj[v].keys() {
                    if label[u] == usize::MAX {
                        label[u] = id;
                        stack.push(u);
                    }
                }
            }
            members.sort_unstable();
            comps.push(members);
        }
        comps
    }

    pub fn is_connected(&self) -> bool {
        self.n() <= 1 || self.components().len() == 1
    }

    /// `{n, edges: [{i, j, w, q | matrix}]}`; `q` when the block is an exact
    /// rotation.
    pub fn to_json(&self) -> serde_json::Value {
        let edges: Vec<_> = self
            .edges()
            .into_iter()
            .map(|(i, j)| {
                let e = self.adj[i][&j];
                match Rotation::from_matrix(&e.r, ROTATION_TOL) {
                    Some(q) => json!({"i": i, "j": j, "w": e.w, "q": q.quarter_turns()}),
                    None => json!({"i": i, "j": j, "w": e.w, "matrix": e.r.0}),
                }
            })
            .collect();
        json!({"n": self.n(), "edges": edges})
    }
}

/// Grid graph of a placed, oriented arrangement: grid neighbors are joined
/// with weight 1 and the connections the orientations imply.
pub fn grid_graph(grid: GridSpec, placement: &[Cell], orientation: &[Rotation]) -> ConnectionGraph {
    let n = placement.len();
    let mut at = vec![usize::MAX; grid.len()];
    for (id, &c) in placement.iter().enumerate() {
        at[grid.index(c)] = id;
    }
    let mut g = ConnectionGraph::new(n);
    for (a, b) in grid.edges() {
        let (i, j) = (at[a], at[b]);
        g.set_edge(i, j, 1.0, (orientation[j] - orientation[i]).as_matrix());
    }
    g
}

pub fn solution_graph(sol: &Solution) -> ConnectionGraph {
    grid_graph(sol.grid, &sol.placement, &sol.orientation)
}

/// Type-3 graph: placements are known, so edges are the grid neighbors.
///
/// Each edge takes the rotation minimizing MGC over all 16 relative
/// placements of the pair. When the minimum is not unique the edge gets
/// weight 1/2 and the mean of the distinct minimizing rotation matrices.
pub fn build_type3_graph(grid: GridSpec, table: &PairwiseTable) -> ConnectionGraph {
    let n = grid.len();
    let mut g = ConnectionGraph::new(n);
    for (i, j) in grid.edges() {
        let mut best = f32::INFINITY;
        let mut rots: BTreeSet<Rotation> = BTreeSet::new();
        let mut hits = 0;
        for a in Direction::ALL {
            for b in Direction::ALL {
                let v = table.edge_pair(i, a, j, b);
                let q = Rotation::new(a.index() as i64 + 2 - b.index() as i64);
                if v < best {
                    best = v;
                    rots.clear();
                    hits = 0;
                }
                if v == best {
                    rots.insert(q);
                    hits += 1;
                }
            }
        }
        if hits == 1 {
            let q = *rots.iter().next().unwrap();
            g.set_edge(i, j, 1.0, q.as_matrix());
        } else {
            let sum = rots.iter().fold(Mat2::ZERO, |acc, q| acc + q.as_matrix());
            g.set_edge(i, j, 0.5, sum.scale(1.0 / rots.len() as f64));
        }
    }
    g
}

/// A best-match record from `from`'s own side `side`: patch `to`, turned by
/// `rotation`, fits there with score `value`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectedEdge {
    pub from: usize,
    pub to: usize,
    pub side: Direction,
    pub rotation: Rotation,
    pub value: f32,
}

/// For every patch and side, all minimizers over other patches and
/// rotations (exact ties are all kept).
pub fn initial_directed_edges(table: &PairwiseTable) -> Vec<DirectedEdge> {
    let n = table.n();
    let mut out = Vec::new();
    for i in 0..n {
        for a in Direction::ALL {
            let side = Side::from_facing(a);
            let mut best = f32::INFINITY;
            let mut hits: Vec<DirectedEdge> = Vec::new();
            for j in (0..n).filter(|&j| j != i) {
                for q in Rotation::ALL {
                    let v = table.get(i, j, q, side);
                    if v < best {
                        best = v;
                        hits.clear();
                    }
                    if v == best {
                        hits.push(DirectedEdge {
                            from: i,
                            to: j,
                            side: a,
                            rotation: q,
                            value: v,
                        });
                    }
                }
            }
            out.extend(hits);
        }
    }
    out
}

/// An undirected candidate edge: `i`'s own side `side_i` touches `j`'s own
/// side `side_j`, and `R[i, j] = M(rotation)`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Link {
    i: usize,
    j: usize,
    side_i: Direction,
    side_j: Direction,
    rotation: Rotation,
    value: f32,
    w: f64,
}

impl DirectedEdge {
    /// The same record seen from the lower-numbered endpoint.
    fn oriented(&self) -> (usize, usize, Direction, Direction, Rotation) {
        let touching = self.side.opposite().rotated(-self.rotation);
        if self.from < self.to {
            (self.from, self.to, self.side, touching, self.rotation)
        } else {
            (self.to, self.from, touching, self.side, -self.rotation)
        }
    }
}

fn merge_links(directed: &[DirectedEdge]) -> Vec<Link> {
    let mut groups: BTreeMap<(usize, usize), (Vec<&DirectedEdge>, bool, bool)> = BTreeMap::new();
    for e in directed {
        let key = (e.from.min(e.to), e.from.max(e.to));
        let entry = groups.entry(key).or_default();
        entry.0.push(e);
        if e.from < e.to {
            entry.1 = true;
        } else {
            entry.2 = true;
        }
    }
    groups
        .into_iter()
        .map(|((i, j), (records, fwd, bwd))| {
            // the smaller score decides the relative placement; stable on ties
            let best = records
                .iter()
                .min_by(|a, b| a.value.total_cmp(&b.value))
                .unwrap();
            let (_, _, side_i, side_j, rotation) = best.oriented();
            Link {
                i,
                j,
                side_i,
                side_j,
                rotation,
                value: best.value,
                w: if fwd && bwd { W_MUTUAL } else { W_ONE_WAY },
            }
        })
        .collect()
}

/// Merges directed best matches into an undirected graph, then keeps at most
/// one neighbor per patch side: the unique minimizer, or none on a tie.
pub fn symmetrize_and_prune(n: usize, directed: &[DirectedEdge]) -> ConnectionGraph {
    let links = merge_links(directed);
    let mut by_side: HashMap<(usize, Direction), Vec<usize>> = HashMap::new();
    for (k, l) in links.iter().enumerate() {
        by_side.entry((l.i, l.side_i)).or_default().push(k);
        by_side.entry((l.j, l.side_j)).or_default().push(k);
    }
    let mut removed = vec![false; links.len()];
    for members in by_side.values() {
        if members.len() < 2 {
            continue;
        }
        let best = members
            .iter()
            .map(|&k| links[k].value)
            .fold(f32::INFINITY, f32::min);
        let winners = members.iter().filter(|&&k| links[k].value == best).count();
        for &k in members {
            if winners > 1 || links[k].value != best {
                removed[k] = true;
            }
        }
    }
    let mut g = ConnectionGraph::new(n);
    for (l, gone) in links.iter().zip(removed) {
        if !gone {
            g.set_edge(l.i, l.j, l.w, l.rotation.as_matrix());
        }
    }
    g
}

/// Vertices within two steps of `v`, excluding `v`, ignoring edge `{a, b}`.
fn two_step_ball(g: &ConnectionGraph, v: usize, skip: (usize, usize)) -> BTreeSet<usize> {
    let blocked = |x: usize, y: usize| (x, y) == skip || (y, x) == skip;
    let mut ball = BTreeSet::new();
    for (u, _) in g.neighbors(v) {
        if blocked(v, u) {
            continue;
        }
        ball.insert(u);
        for (w, _) in g.neighbors(u) {
            if !blocked(u, w) {
                ball.insert(w);
            }
        }
    }
    ball.remove(&v);
    ball
}

/// Number of shared two-step neighbors of the endpoints of `{i, j}` once
/// that edge is removed.
pub fn jaccard_index(g: &ConnectionGraph, i: usize, j: usize) -> usize {
    let a = two_step_ball(g, i, (i, j));
    let b = two_step_ball(g, j, (i, j));
    a.intersection(&b).count()
}

/// Downweights edges whose endpoints share no two-step neighborhood:
/// `W_nb = 0.2 W + 0.8 W [μ > 0]`.
pub fn jaccard_refine(g: &ConnectionGraph) -> ConnectionGraph {
    let mut out = g.clone();
    for (i, j) in g.edges() {
        let w = g.weight(i, j);
        let wj = if jaccard_index(g, i, j) > 0 { w } else { 0.0 };
        out.set_weight(i, j, 0.2 * w + 0.8 * wj);
    }
    out
}

/// Joins components until the graph is connected. Each round links the
/// largest component to the rest through the globally best-scoring
/// (patch, patch, rotation, side) combination, with ties drawn from the
/// seeded stream. Returns the number of bridges added.
pub fn connect_components(g: &mut ConnectionGraph, table: &PairwiseTable, seed: u64) -> usize {
    let mut rng = rng::stream(seed, Stream::Connect);
    let mut added = 0;
    loop {
        let comps = g.components();
        if comps.len() <= 1 {
            return added;
        }
        let largest = comps
            .iter()
            .enumerate()
            .max_by(|(ka, a), (kb, b)| a.len().cmp(&b.len()).then(kb.cmp(ka)))
            .map(|(k, _)| k)
            .unwrap();
        let inside: BTreeSet<usize> = comps[largest].iter().copied().collect();
        let mut best = f32::INFINITY;
        let mut ties: Vec<(usize, usize, Rotation)> = Vec::new();
        for i in (0..g.n()).filter(|v| !inside.contains(v)) {
            for &j in &inside {
                for q in Rotation::ALL {
                    let v = Side::ALL
                        .iter()
                        .map(|&s| table.get(i, j, q, s))
                        .fold(f32::INFINITY, f32::min);
                    if v < best {
                        best = v;
                        ties.clear();
                    }
                    if v == best {
                        ties.push((i, j, q));
                    }
                }
            }
        }
        let &(i, j, q) = ties
            .choose(&mut rng)
            .expect("a disconnected graph has candidates");
        g.set_edge(i, j, W_BRIDGE, q.as_matrix());
        added += 1;
    }
}

/// Outcome of checking one candidate diagonal pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourLoop {
    pub i: usize,
    pub j: usize,
    pub via: (usize, usize),
    pub consistent: bool,
}

/// Non-adjacent pairs with exactly two common neighbors, and whether the two
/// paths through them compose to the same rotation.
pub fn four_loops(g: &ConnectionGraph) -> Vec<FourLoop> {
    let n = g.n();
    let sets: Vec<BTreeSet<usize>> = (0..n).map(|v| g.neighbor_set(v)).collect();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if g.has_edge(i, j) {
                continue;
            }
            let common: Vec<usize> = sets[i].intersection(&sets[j]).copied().collect();
            if common.len() != 2 {
                continue;
            }
            let (a, b) = (common[0], common[1]);
            let via_a = g.connection(i, a).unwrap() * g.connection(a, j).unwrap();
            let via_b = g.connection(i, b).unwrap() * g.connection(b, j).unwrap();
            out.push(FourLoop {
                i,
                j,
                via: (a, b),
                consistent: via_a.max_abs_diff(&via_b) <= ROTATION_TOL,
            });
        }
    }
    out
}

/// Validates edges through 4-cycles. Every side edge of a consistent loop is
/// set to 1 and the loop's diagonal is added with weight 1 and the composed
/// rotation. Side edges touched only by inconsistent loops drop to a third,
/// all other edges to two thirds. Every update reads the input weights.
pub fn four_loop_refine(g: &ConnectionGraph) -> ConnectionGraph {
    let loops = four_loops(g);
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        None,
        Inconsistent,
        Consistent,
    }
    let mut marks: HashMap<(usize, usize), Mark> = HashMap::new();
    for l in &loops {
        let mark = if l.consistent {
            Mark::Consistent
        } else {
            Mark::Inconsistent
        };
        for (x, y) in [
            (l.i, l.via.0),
            (l.i, l.via.1),
            (l.j, l.via.0),
            (l.j, l.via.1),
        ] {
            let key = (x.min(y), x.max(y));
            let slot = marks.entry(key).or_insert(Mark::None);
            if *slot != Mark::Consistent {
                *slot = mark;
            }
        }
    }
    let mut out = g.clone();
    for (i, j) in g.edges() {
        let w = g.weight(i, j);
        let next = match marks.get(&(i, j)).copied().unwrap_or(Mark::None) {
            Mark::Consistent => 1.0,
            Mark::Inconsistent => w / 3.0,
            Mark::None => w * 2.0 / 3.0,
        };
        out.set_weight(i, j, next);
    }
    for l in loops.iter().filter(|l| l.consistent) {
        let r = g.connection(l.i, l.via.0).unwrap() * g.connection(l.via.0, l.j).unwrap();
        out.set_edge(l.i, l.j, 1.0, r);
    }
    out
}

/// Full type-2 graph construction: best matches, symmetrization and pruning,
/// neighborhood check, component repair, then 4-cycle validation.
pub fn build_type2_graph(table: &PairwiseTable, seed: u64) -> Result<ConnectionGraph> {
    let directed = initial_directed_edges(table);
    let g = symmetrize_and_prune(table.n(), &directed);
    let mut g = jaccard_refine(&g);
    let bridges = connect_components(&mut g, table, seed);
    let g = four_loop_refine(&g);
    log::debug!(
        "type-2 graph: {} directed matches, {} edges, {} bridges",
        directed.len(),
        g.edge_count(),
        bridges
    );
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::build_pairwise_table;
    use crate::puzzle::{scramble, slice_image, GroundTruth, Patch, PuzzleType};
    use crate::synth;

    fn true_graph(truth: &GroundTruth) -> ConnectionGraph {
        grid_graph(truth.grid, &truth.placement, &truth.orientation)
    }

    #[test]
    fn transpose_invariant_holds() {
        let grid = GridSpec::new(3, 3).unwrap();
        let truth = GroundTruth::new(
            grid,
            (0..9).map(|k| grid.cell(k)).collect(),
            (0..9).map(|k| Rotation::new(k * 7 % 4)).collect(),
        )
        .unwrap();
        let g = true_graph(&truth);
        for (i, j) in g.edges() {
            assert_eq!(
                g.connection(j, i).unwrap(),
                g.connection(i, j).unwrap().transpose()
            );
            let r = truth.orientation[j] - truth.orientation[i];
            assert_eq!(g.connection(i, j).unwrap(), r.as_matrix());
        }
    }

    #[test]
    fn type3_graph_on_upright_ramp() {
        let img = synth::linear_ramp(16, 16);
        let (patches, grid, _) = slice_image(&img, 8).unwrap();
        let table = build_pairwise_table(&patches).unwrap();
        let g = build_type3_graph(grid, &table);
        assert_eq!(g.edge_count(), 4);
        for (i, j) in g.edges() {
            assert_eq!(g.weight(i, j), 1.0);
            assert_eq!(g.connection(i, j).unwrap(), Mat2::IDENTITY);
        }
    }

    #[test]
    fn type3_graph_tie_on_uniform_pair() {
        let patches = vec![
            Patch::uniform(0, 3, [50, 60, 70]).unwrap(),
            Patch::uniform(1, 3, [50, 60, 70]).unwrap(),
        ];
        let table = build_pairwise_table(&patches).unwrap();
        let g = build_type3_graph(GridSpec::new(1, 2).unwrap(), &table);
        assert_eq!(g.weight(0, 1), 0.5);
        assert_eq!(g.connection(0, 1).unwrap(), Mat2::ZERO);
    }

    #[test]
    fn two_patch_directed_matches() {
        let img = synth::linear_ramp(8, 16);
        let (patches, _, _) = slice_image(&img, 8).unwrap();
        let table = build_pairwise_table(&patches).unwrap();
        let d = initial_directed_edges(&table);
        assert!(d.iter().any(|e| e.from == 0
            && e.to == 1
            && e.side == Direction::Right
            && e.rotation == Rotation::IDENTITY));
        assert!(d.iter().any(|e| e.from == 1
            && e.to == 0
            && e.side == Direction::Left
            && e.rotation == Rotation::IDENTITY));
        let g = symmetrize_and_prune(2, &d);
        assert!(g.is_connected());
    }

    #[test]
    fn uniform_patches_keep_every_tie() {
        let patches: Vec<Patch> = (0..3)
            .map(|k| Patch::uniform(k, 3, [9, 9, 9]).unwrap())
            .collect();
        let table = build_pairwise_table(&patches).unwrap();
        let d = initial_directed_edges(&table);
        // 3 patches x 4 sides x 2 partners x 4 rotations
        assert_eq!(d.len(), 96);
        let mut g = symmetrize_and_prune(3, &d);
        assert_eq!(g.edge_count(), 0);
        assert_eq!(connect_components(&mut g, &table, 5), 2);
        assert!(g.is_connected());
    }

    fn record(from: usize, to: usize, side: Direction, q: i64, value: f32) -> DirectedEdge {
        DirectedEdge {
            from,
            to,
            side,
            rotation: Rotation::new(q),
            value,
        }
    }

    #[test]
    fn mutual_and_one_way_weights() {
        let d = vec![
            record(0, 1, Direction::Right, 0, 1.0),
            record(1, 0, Direction::Left, 0, 1.0),
            record(2, 1, Direction::Top, 0, 2.0),
        ];
        let g = symmetrize_and_prune(3, &d);
        assert_eq!(g.weight(0, 1), W_MUTUAL);
        assert_eq!(g.weight(1, 2), W_ONE_WAY);
    }

    #[test]
    fn tied_side_neighbors_are_both_dropped() {
        let d = vec![
            record(0, 1, Direction::Top, 0, 3.0),
            record(0, 2, Direction::Top, 0, 3.0),
        ];
        assert_eq!(symmetrize_and_prune(3, &d).edge_count(), 0);
        let d = vec![
            record(0, 1, Direction::Top, 0, 3.0),
            record(0, 2, Direction::Top, 0, 2.0),
        ];
        let g = symmetrize_and_prune(3, &d);
        assert_eq!(g.edges(), vec![(0, 2)]);
    }

    #[test]
    fn reverse_record_maps_sides() {
        // 1 sees 0, turned a quarter, on its own bottom side
        let d = vec![record(1, 0, Direction::Bottom, 1, 1.0)];
        let g = symmetrize_and_prune(2, &d);
        assert_eq!(g.connection(1, 0).unwrap(), Rotation::new(1).as_matrix());
        assert_eq!(g.connection(0, 1).unwrap(), Rotation::new(3).as_matrix());
    }

    #[test]
    fn jaccard_values_on_small_grids() {
        let grid = GridSpec::new(2, 2).unwrap();
        let g = true_graph(&GroundTruth::identity(grid));
        for (i, j) in g.edges() {
            assert_eq!(jaccard_index(&g, i, j), 2);
        }
        let grid = GridSpec::new(3, 3).unwrap();
        let g = true_graph(&GroundTruth::identity(grid));
        assert_eq!(jaccard_index(&g, 3, 4), 4);

        let mut lone = ConnectionGraph::new(4);
        lone.set_edge(0, 1, 1.0, Mat2::IDENTITY);
        lone.set_edge(2, 3, 1.0, Mat2::IDENTITY);
        assert_eq!(jaccard_index(&lone, 0, 1), 0);
        assert!((jaccard_refine(&lone).weight(0, 1) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn bridges_use_the_small_weight() {
        let img = synth::smooth_image(16, 16, 2);
        let (patches, _, _) = slice_image(&img, 8).unwrap();
        let table = build_pairwise_table(&patches).unwrap();
        let mut g = ConnectionGraph::new(4);
        g.set_edge(0, 1, 1.0, Mat2::IDENTITY);
        g.set_edge(2, 3, 1.0, Mat2::IDENTITY);
        assert_eq!(connect_components(&mut g, &table, 1), 1);
        let bridge: Vec<_> = g
            .edges()
            .into_iter()
            .filter(|&(i, j)| g.weight(i, j) == W_BRIDGE)
            .collect();
        assert_eq!(bridge.len(), 1);

        let before = g.clone();
        assert_eq!(connect_components(&mut g, &table, 1), 0);
        assert_eq!(g, before);
    }

    #[test]
    fn four_loops_on_true_grid() {
        let grid = GridSpec::new(3, 3).unwrap();
        let truth = GroundTruth::new(
            grid,
            (0..9).map(|k| grid.cell(k)).collect(),
            (0..9).map(|k| Rotation::new(k * 5 % 4)).collect(),
        )
        .unwrap();
        let g = true_graph(&truth);
        let loops = four_loops(&g);
        assert_eq!(loops.len(), 8);
        assert!(loops.iter().all(|l| l.consistent));
        let refined = four_loop_refine(&g);
        for l in &loops {
            let r = truth.orientation[l.j] - truth.orientation[l.i];
            assert_eq!(refined.connection(l.i, l.j).unwrap(), r.as_matrix());
            assert_eq!(refined.weight(l.i, l.j), 1.0);
        }
        for (i, j) in g.edges() {
            assert_eq!(refined.weight(i, j), 1.0);
        }
    }

    #[test]
    fn broken_loop_scales_by_a_third() {
        let grid = GridSpec::new(2, 2).unwrap();
        let mut g = true_graph(&GroundTruth::identity(grid));
        g.set_edge(0, 1, 1.0, Rotation::new(1).as_matrix());
        let refined = four_loop_refine(&g);
        for (i, j) in g.edges() {
            assert!((refined.weight(i, j) - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(refined.edge_count(), 4);
    }

    #[test]
    fn path_pairs_get_two_thirds() {
        let mut g = ConnectionGraph::new(3);
        g.set_edge(0, 1, 0.6, Mat2::IDENTITY);
        g.set_edge(1, 2, 0.9, Mat2::IDENTITY);
        let refined = four_loop_refine(&g);
        assert!((refined.weight(0, 1) - 0.4).abs() < 1e-15);
        assert!((refined.weight(1, 2) - 0.6).abs() < 1e-15);
        assert!(!refined.has_edge(0, 2));
    }

    #[test]
    fn type2_graph_recovers_true_connections() {
        let img = synth::smooth_image(30, 40, 3);
        let (patches, _, truth) = slice_image(&img, 10).unwrap();
        let (patches, truth) = scramble(&patches, &truth, PuzzleType::Type2, 11).unwrap();
        let table = build_pairwise_table(&patches).unwrap();
        let g = build_type2_graph(&table, 0).unwrap();
        assert!(g.is_connected());
        let t = true_graph(&truth);
        for (i, j) in t.edges() {
            assert_eq!(g.connection(i, j), t.connection(i, j), "edge {i}-{j}");
            assert!(g.weight(i, j) >= 1.0);
        }
        for (i, j) in g.edges() {
            if !t.has_edge(i, j) {
                let (ci, cj) = (truth.placement[i], truth.placement[j]);
                let diagonal = ci.row.abs_diff(cj.row) == 1 && ci.col.abs_diff(cj.col) == 1;
                assert!(diagonal || g.weight(i, j) < 0.05, "edge {i}-{j}");
            }
        }
    }

    #[test]
    fn two_patch_and_uniform_graphs_are_connected() {
        let img = synth::smooth_image(8, 16, 1);
        let (patches, _, _) = slice_image(&img, 8).unwrap();
        let table = build_pairwise_table(&patches).unwrap();
        let g = build_type2_graph(&table, 0).unwrap();
        assert_eq!(g.edge_count(), 1);

        let patches: Vec<Patch> = (0..6)
            .map(|k| Patch::uniform(k, 4, [1, 2, 3]).unwrap())
            .collect();
        let table = build_pairwise_table(&patches).unwrap();
        assert!(build_type2_graph(&table, 9).unwrap().is_connected());
    }

    #[test]
    fn deterministic_given_seed() {
        let img = smooth_scrambled();
        let table = build_pairwise_table(&img).unwrap();
        assert_eq!(
            build_type2_graph(&table, 4).unwrap(),
            build_type2_graph(&table, 4).unwrap()
        );
    }

    fn smooth_scrambled() -> Vec<Patch> {
        let img = synth::smooth_image(24, 24, 8);
        let (patches, _, truth) = slice_image(&img, 6).unwrap();
        scramble(&patches, &truth, PuzzleType::Type2, 3).unwrap().0
    }
}

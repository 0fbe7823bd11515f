//! Acceptance suite. Every test prints one `criterion N: PASS|FAIL` line
//! straight to stdout (bypassing the harness capture) and then asserts.

use std::io::Write;
use std::path::PathBuf;
use std::sync::{Mutex, MutexGuard};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::seq::SliceRandom;
use rand::Rng;

use puzzlelab::bench::time_stages;
use puzzlelab::congraph::{four_loops, grid_graph, jaccard_index, ConnectionGraph};
use puzzlelab::eval::{evaluate, run_dataset, write_csv};
use puzzlelab::metrics::{build_pairwise_table, mgc_side, PairwiseTable, Side};
use puzzlelab::puzzle::{rotate_patch, scramble, slice_image};
use puzzlelab::rng::{stream, Stream};
use puzzlelab::solver::{err_metric, solve_type2, solve_type3, SolverOptions};
use puzzlelab::spectral::{
    assemble_gcl, recover_orientations, top_eigenvectors, EigenOptions, OrientationMode,
};
use puzzlelab::vdd::vdd_distances;
use puzzlelab::{
    synth, Cell, Direction, GridSpec, GroundTruth, Patch, PuzzleType, RgbImage, Rotation,
};

const EXACT_RECOVERY_BUDGET: Duration = Duration::from_secs(10);
const TYPE3_BUDGET_PER_IMAGE: Duration = Duration::from_secs(5);
const TYPE2_BUDGET_PER_IMAGE: Duration = Duration::from_secs(60);
const ORACLE_BUDGET: Duration = Duration::from_secs(120);
const ERR_TOL: f64 = 1e-9;
const MGC_TOL: f64 = 1e-9;
const BOUND_SLACK: f64 = 1e-10;
const TABLE_BUDGET: Duration = Duration::from_secs(30);
const SCALING_TARGET: f64 = 3.0;
const CORPUS_PATCH: u32 = 8;

/// Serializes the criteria so wall-clock budgets are not measured while
/// other criteria compete for the same cores.
static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(n: u32, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    writeln!(out, "criterion {n}: {verdict} {detail}").unwrap();
    out.flush().unwrap();
}

fn gauge_equal(a: &[Rotation], b: &[Rotation]) -> bool {
    a.iter().zip(b).all(|(&x, &y)| x - a[0] == y - b[0])
}

/// Grid shapes of the synthetic corpus: 20 images, 4..=8 rows and columns.
fn corpus_shape(k: u64) -> (u32, u32) {
    (4 + (k % 5) as u32, 4 + ((k / 5 + k) % 5) as u32)
}

fn corpus_image(k: u64) -> RgbImage {
    let (rows, cols) = corpus_shape(k);
    synth::smooth_image(rows * CORPUS_PATCH, cols * CORPUS_PATCH, 100 + k)
}

#[test]
fn criterion_01_exact_recovery_on_true_graphs() {
    let _serial = serial();
    let start = Instant::now();
    let mut cases = 0;
    let mut recovered = 0;
    for (rows, cols) in [(2, 2), (2, 3), (3, 3), (4, 4), (5, 5), (6, 8)] {
        let grid = GridSpec::new(rows, cols).unwrap();
        for seed in 0..10u64 {
            let mut rng = stream(seed * 31 + rows as u64 * 7 + cols as u64, Stream::Harness);
            let orientation: Vec<Rotation> = (0..grid.len())
                .map(|_| Rotation::new(rng.gen_range(0..4)))
                .collect();
            let placement: Vec<Cell> = (0..grid.len()).map(|k| grid.cell(k)).collect();
            let g = grid_graph(grid, &placement, &orientation);
            let opts = EigenOptions {
                seed,
                ..EigenOptions::default()
            };
            let rec = recover_orientations(&g, OrientationMode::Top12, &opts).unwrap();
            cases += 1;
            recovered += usize::from(gauge_equal(&rec.rotations, &orientation));
        }
    }
    let elapsed = start.elapsed();
    let pass = recovered == cases && elapsed < EXACT_RECOVERY_BUDGET;
    report(
        1,
        pass,
        &format!("{recovered}/{cases} recovered up to global rotation in {elapsed:.2?}"),
    );
    assert!(pass);
}

#[test]
fn criterion_02_type3_end_to_end() {
    let _serial = serial();
    let mut perfect = 0;
    let mut slowest = Duration::ZERO;
    for k in 0..20u64 {
        let (patches, grid, truth) = slice_image(&corpus_image(k), CORPUS_PATCH as usize).unwrap();
        let (scr, scr_truth) = scramble(&patches, &truth, PuzzleType::Type3, k).unwrap();
        let start = Instant::now();
        let table = build_pairwise_table(&scr).unwrap();
        let sol = solve_type3(
            &table,
            grid,
            &SolverOptions {
                seed: k,
                ..SolverOptions::default()
            },
        )
        .unwrap();
        slowest = slowest.max(start.elapsed());
        perfect += usize::from(evaluate(&sol, &scr_truth).unwrap().direct == 100.0);
    }
    let pass = perfect == 20 && slowest < TYPE3_BUDGET_PER_IMAGE;
    report(
        2,
        pass,
        &format!("{perfect}/20 images at direct 100%, slowest {slowest:.2?}"),
    );
    assert!(pass);
}

#[test]
fn criterion_03_type2_end_to_end() {
    let _serial = serial();
    let mut perfect = 0;
    let mut excused = 0;
    let mut unexcused = Vec::new();
    let mut slowest = Duration::ZERO;
    for k in 0..20u64 {
        let (patches, grid, truth) = slice_image(&corpus_image(k), CORPUS_PATCH as usize).unwrap();
        let (scr, scr_truth) = scramble(&patches, &truth, PuzzleType::Type2, k).unwrap();
        let start = Instant::now();
        let table = build_pairwise_table(&scr).unwrap();
        let out = solve_type2(
            &table,
            grid,
            &SolverOptions {
                seed: k,
                ..SolverOptions::default()
            },
        )
        .unwrap();
        slowest = slowest.max(start.elapsed());
        if evaluate(&out.solution, &scr_truth).unwrap().perfect == 1 {
            perfect += 1;
        } else if scr.iter().any(Patch::is_uniform) {
            excused += 1;
        } else {
            unexcused.push(k);
        }
    }
    let pass =
        perfect >= 19 && unexcused.is_empty() && excused <= 1 && slowest < TYPE2_BUDGET_PER_IMAGE;
    report(
        3,
        pass,
        &format!("{perfect}/20 perfect, failures without uniform patches {unexcused:?}, slowest {slowest:.2?}"),
    );
    assert!(pass);
}

/// Minimum Err over every placement and orientation, one representative per
/// global rotation class.
fn exhaustive_min_err(patches: &[Patch], grid: GridSpec) -> f64 {
    let n = patches.len();
    // value[((i * 4 + ri) * n + j) * 4 + rj][side] from explicitly turned patches
    let turned: Vec<Vec<Patch>> = patches
        .iter()
        .map(|p| Rotation::ALL.iter().map(|&r| rotate_patch(p, r)).collect())
        .collect();
    let idx = |i: usize, ri: usize, j: usize, rj: usize| ((i * 4 + ri) * n + j) * 4 + rj;
    let mut right = vec![0.0; n * 4 * n * 4];
    let mut below = vec![0.0; n * 4 * n * 4];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            for ri in 0..4 {
                for rj in 0..4 {
                    let (a, b) = (&turned[i][ri], &turned[j][rj]);
                    right[idx(i, ri, j, rj)] = f64::from(mgc_side(a, b, Side::Lr).unwrap() as f32);
                    below[idx(i, ri, j, rj)] = f64::from(mgc_side(a, b, Side::Tb).unwrap() as f32);
                }
            }
        }
    }
    let first_turns: &[usize] = if grid.is_square() { &[0] } else { &[0, 1] };
    let mut best = f64::INFINITY;
    let mut perm: Vec<usize> = (0..n).collect();
    let mut turns = vec![0usize; n];
    permutohedron_each(&mut perm, &mut |at: &[usize]| {
        // at[cell] = patch
        let first_cell = at.iter().position(|&p| p == 0).unwrap();
        for code in 0..4usize.pow(n as u32) {
            let mut c = code;
            for t in turns.iter_mut() {
                *t = c % 4;
                c /= 4;
            }
            if !first_turns.contains(&turns[first_cell]) {
                continue;
            }
            let mut e = 0.0;
            for r in 0..grid.rows {
                for col in 0..grid.cols {
                    let cell = r * grid.cols + col;
                    let (p, tp) = (at[cell], turns[cell]);
                    if col + 1 < grid.cols {
                        let (q, tq) = (at[cell + 1], turns[cell + 1]);
                        e += right[idx(p, tp, q, tq)];
                    }
                    if r + 1 < grid.rows {
                        let (q, tq) = (at[cell + grid.cols], turns[cell + grid.cols]);
                        e += below[idx(p, tp, q, tq)];
                    }
                }
            }
            best = best.min(2.0 * e);
        }
    });
    best
}

/// Heap's algorithm.
fn permutohedron_each(v: &mut [usize], f: &mut dyn FnMut(&[usize])) {
    fn go(k: usize, v: &mut [usize], f: &mut dyn FnMut(&[usize])) {
        if k <= 1 {
            f(v);
            return;
        }
        for i in 0..k - 1 {
            go(k - 1, v, f);
            if k % 2 == 0 {
                v.swap(i, k - 1);
            } else {
                v.swap(0, k - 1);
            }
        }
        go(k - 1, v, f);
    }
    let k = v.len();
    go(k, v, f);
}

#[test]
fn criterion_04_exhaustive_err_optimum() {
    let _serial = serial();
    let start = Instant::now();
    let mut matched = 0;
    let mut total = 0;
    let mut worst = 0.0f64;
    for k in 0..5u64 {
        for (rows, cols) in [(2u32, 2u32), (2, 3)] {
            let img = synth::smooth_image(rows * 8, cols * 8, 500 + k);
            let (patches, grid, truth) = slice_image(&img, 8).unwrap();
            let (scr, _) = scramble(&patches, &truth, PuzzleType::Type2, k).unwrap();
            let table = build_pairwise_table(&scr).unwrap();
            let out = solve_type2(
                &table,
                grid,
                &SolverOptions {
                    seed: k,
                    ..SolverOptions::default()
                },
            )
            .unwrap();
            let oracle = exhaustive_min_err(&scr, grid);
            let gap = (out.solution.err - oracle).abs();
            worst = worst.max(gap);
            total += 1;
            matched += usize::from(gap <= ERR_TOL);
        }
    }
    let elapsed = start.elapsed();
    let pass = matched == total && elapsed < ORACLE_BUDGET;
    report(
        4,
        pass,
        &format!("{matched}/{total} puzzles at the exhaustive optimum, worst gap {worst:.3e}, {elapsed:.2?}"),
    );
    assert!(pass);
}

fn dense(g: &ConnectionGraph) -> DMatrix<f64> {
    let gcl = assemble_gcl(g).unwrap();
    let d = 2 * g.n();
    DMatrix::from_row_slice(d, d, &gcl.c_sym.to_dense())
}

/// Descending eigenvalues and matching eigenvector columns.
fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vals = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vecs = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    (vals, vecs)
}

#[test]
fn criterion_05_perturbation_bound() {
    let _serial = serial();
    let grid = GridSpec::new(6, 6).unwrap();
    let n = grid.len();
    let placement: Vec<Cell> = (0..n).map(|k| grid.cell(k)).collect();
    let mut trials = 0;
    let mut held = 0;
    let mut informative = 0;
    // full-strength spurious edges, then faint ones where the bound is not vacuous
    for (si, scale) in [1.0, 1e-3].into_iter().enumerate() {
        for (pi, p) in [0.02, 0.05, 0.1].into_iter().enumerate() {
            for t in 0..20u64 {
                let mut rng = stream(10_000 * si as u64 + 1000 * pi as u64 + t, Stream::Harness);
                let orientation: Vec<Rotation> =
                    (0..n).map(|_| Rotation::new(rng.gen_range(0..4))).collect();
                let truth = grid_graph(grid, &placement, &orientation);
                let mut complement: Vec<(usize, usize)> = (0..n)
                    .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                    .filter(|&(i, j)| !truth.has_edge(i, j))
                    .collect();
                complement.shuffle(&mut rng);
                let count = ((p * complement.len() as f64).round() as usize).max(1);
                let mut est = truth.clone();
                for &(i, j) in &complement[..count] {
                    let w: f64 = scale * rng.gen_range(0.01..=1.0);
                    est.set_edge(i, j, w, Rotation::new(rng.gen_range(0..4)).as_matrix());
                }

                let c_true = dense(&truth);
                let c_est = dense(&est);
                let (diff_vals, _) = sorted_eigen(&c_true - &c_est);
                let delta = diff_vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let (true_vals, true_vecs) = sorted_eigen(c_true);

                let gcl = assemble_gcl(&est).unwrap();
                let res = top_eigenvectors(
                    &gcl.c_sym,
                    2,
                    &EigenOptions {
                        seed: t,
                        ..EigenOptions::default()
                    },
                )
                .unwrap();
                let v_est = DMatrix::from_fn(2 * n, 2, |r, c| res.eigenvectors[c][r]);
                let v_true = true_vecs.columns(0, 2).into_owned();
                let overlap = v_true.transpose() * v_est;
                let sigma_min = overlap
                    .singular_values()
                    .iter()
                    .fold(f64::INFINITY, |m, &s| m.min(s));
                let sin_theta = (1.0 - sigma_min.min(1.0).powi(2)).max(0.0).sqrt();

                let gap = true_vals[1] - true_vals[2].abs() - delta;
                let bound = if gap > 0.0 {
                    delta / gap
                } else {
                    f64::INFINITY
                };
                trials += 1;
                informative += usize::from(bound < 1.0);
                held += usize::from(sin_theta <= bound + BOUND_SLACK);
            }
        }
    }
    let pass = held == trials;
    report(
        5,
        pass,
        &format!("bound held in {held}/{trials} trials ({informative} with a bound below 1)"),
    );
    assert!(pass);
}

/// Left-right MGC written out from the definitions, for patches given as
/// `[row][col][channel]`.
fn desk_mgc_lr(a: &[Vec<[f64; 3]>], b: &[Vec<[f64; 3]>]) -> f64 {
    let s = a.len();
    let reg: [[f64; 3]; 9] = [
        [0.0, 0.0, 0.0],
        [1.0, 1.0, 1.0],
        [-1.0, -1.0, -1.0],
        [0.0, 0.0, 1.0],
        [0.0, 1.0, 0.0],
        [1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0],
        [0.0, -1.0, 0.0],
        [0.0, 0.0, -1.0],
    ];
    let one_way = |g: Vec<[f64; 3]>, cross: Vec<[f64; 3]>| -> f64 {
        let mu: Vec<f64> = (0..3)
            .map(|c| g.iter().map(|r| r[c]).sum::<f64>() / s as f64)
            .collect();
        let mut rows = g.clone();
        rows.extend_from_slice(&reg);
        let m: Vec<f64> = (0..3)
            .map(|c| rows.iter().map(|r| r[c]).sum::<f64>() / (s + 9) as f64)
            .collect();
        let mut cov = DMatrix::<f64>::zeros(3, 3);
        for r in &rows {
            for u in 0..3 {
                for v in 0..3 {
                    cov[(u, v)] += (r[u] - m[u]) * (r[v] - m[v]);
                }
            }
        }
        cov /= (s + 8) as f64;
        if cov.determinant().abs() < 1e-12 {
            cov += DMatrix::identity(3, 3) * 1e-6;
        }
        let inv = cov.try_inverse().unwrap();
        cross
            .iter()
            .map(|x| {
                let d = DMatrix::from_fn(1, 3, |_, c| x[c] - mu[c]);
                (&d * &inv * d.transpose())[(0, 0)]
            })
            .sum()
    };
    let grad = |p: &[Vec<[f64; 3]>], outer: usize, inner: usize| -> Vec<[f64; 3]> {
        p.iter()
            .map(|row| std::array::from_fn(|c| row[outer][c] - row[inner][c]))
            .collect()
    };
    let lr = one_way(
        grad(a, s - 1, s - 2),
        (0..s)
            .map(|r| std::array::from_fn(|c| b[r][0][c] - a[r][s - 1][c]))
            .collect(),
    );
    let rl = one_way(
        grad(b, 0, 1),
        (0..s)
            .map(|r| std::array::from_fn(|c| a[r][s - 1][c] - b[r][0][c]))
            .collect(),
    );
    lr + rl
}

fn to_rows(p: &Patch) -> Vec<Vec<[f64; 3]>> {
    let s = p.side();
    (0..s)
        .map(|r| (0..s).map(|c| p.pixel(r, c).map(f64::from)).collect())
        .collect()
}

fn transpose_rows(p: &[Vec<[f64; 3]>]) -> Vec<Vec<[f64; 3]>> {
    let s = p.len();
    (0..s).map(|r| (0..s).map(|c| p[c][r]).collect()).collect()
}

fn random_patch(rng: &mut impl Rng, s: usize) -> Patch {
    Patch::new(0, s, (0..s * s * 3).map(|_| rng.gen()).collect()).unwrap()
}

#[test]
fn criterion_06_mgc_fidelity() {
    let _serial = serial();
    // ten small integer s = 2 pairs
    let mut desk_ok = 0;
    let mut worst = 0.0f64;
    for k in 0..10u32 {
        let px = |seed: u32| -> Vec<u8> {
            (0..12)
                .map(|t| ((seed * 37 + t * (11 + k)) % 23 * 7) as u8)
                .collect()
        };
        let a = Patch::new(0, 2, px(2 * k + 1)).unwrap();
        let b = Patch::new(1, 2, px(2 * k + 2)).unwrap();
        let (ra, rb) = (to_rows(&a), to_rows(&b));
        let checks = [
            (mgc_side(&a, &b, Side::Lr).unwrap(), desk_mgc_lr(&ra, &rb)),
            (mgc_side(&b, &a, Side::Rl).unwrap(), desk_mgc_lr(&ra, &rb)),
            // top-bottom is left-right on transposed patches
            (
                mgc_side(&a, &b, Side::Tb).unwrap(),
                desk_mgc_lr(&transpose_rows(&ra), &transpose_rows(&rb)),
            ),
        ];
        let mut all = true;
        for (got, want) in checks {
            let err = (got - want).abs() / want.abs().max(1.0);
            worst = worst.max(err);
            all &= err <= MGC_TOL;
        }
        desk_ok += usize::from(all);
    }

    let mut runner = TestRunner::new(Config {
        cases: 1000,
        failure_persistence: None,
        ..Config::default()
    });
    let identities = runner.run(
        &(2usize..=6, any::<u64>(), 0u8..4, 0usize..4),
        |(s, seed, q, side)| {
            let mut rng = stream(seed, Stream::Harness);
            let a = random_patch(&mut rng, s);
            let b = random_patch(&mut rng, s);
            let side = Side::ALL[side];
            let q = Rotation::new(i64::from(q));
            let v = mgc_side(&a, &b, side).unwrap();
            prop_assert_eq!(v, mgc_side(&b, &a, side.mirror()).unwrap());
            let turned = Side::from_facing(side.facing().rotated(q));
            prop_assert_eq!(
                v,
                mgc_side(&rotate_patch(&a, q), &rotate_patch(&b, q), turned).unwrap()
            );
            Ok(())
        },
    );
    let pass = desk_ok == 10 && identities.is_ok();
    report(
        6,
        pass,
        &format!(
            "{desk_ok}/10 desk pairs within {MGC_TOL:e} (worst {worst:.1e}); mirror and rotation identities on 1000 random pairs: {}",
            if identities.is_ok() { "exact" } else { "violated" }
        ),
    );
    if let Err(e) = identities {
        panic!("{e}");
    }
    assert!(pass);
}

/// Two-step neighborhoods of `i` and `j` in the grid with edge `{i, j}`
/// removed, intersected.
fn oracle_jaccard(grid: GridSpec, i: usize, j: usize) -> usize {
    let adjacent = |a: usize, b: usize| {
        let (ca, cb) = (grid.cell(a), grid.cell(b));
        let d = ca.row.abs_diff(cb.row) + ca.col.abs_diff(cb.col);
        d == 1 && !((a, b) == (i, j) || (a, b) == (j, i))
    };
    let ball = |v: usize| -> Vec<usize> {
        (0..grid.len())
            .filter(|&w| {
                w != v
                    && (adjacent(v, w) || (0..grid.len()).any(|u| adjacent(v, u) && adjacent(u, w)))
            })
            .collect()
    };
    let (a, b) = (ball(i), ball(j));
    a.iter().filter(|x| b.contains(x)).count()
}

#[test]
fn criterion_07_graph_characterizations() {
    let _serial = serial();
    let mut edges_ok = true;
    let mut diag_ok = true;
    let mut checked = 0;
    for rows in 2..=8 {
        for cols in 2..=8 {
            let grid = GridSpec::new(rows, cols).unwrap();
            let t = GroundTruth::identity(grid);
            let g = grid_graph(grid, &t.placement, &t.orientation);
            for (i, j) in grid.edges() {
                let mu = jaccard_index(&g, i, j);
                edges_ok &= mu > 0 && mu == oracle_jaccard(grid, i, j);
                checked += 1;
            }
            let loops = four_loops(&g);
            for i in 0..grid.len() {
                for j in i + 1..grid.len() {
                    let (ci, cj) = (grid.cell(i), grid.cell(j));
                    let diagonal = ci.row.abs_diff(cj.row) == 1 && ci.col.abs_diff(cj.col) == 1;
                    let common = (0..grid.len())
                        .filter(|&u| g.has_edge(i, u) && g.has_edge(u, j))
                        .count();
                    let found = loops.iter().any(|l| (l.i, l.j) == (i, j));
                    if diagonal {
                        diag_ok &= common == 2 && found;
                    } else if !g.has_edge(i, j) {
                        diag_ok &= common != 2 && !found;
                    }
                }
            }
        }
    }
    let grid = GridSpec::new(8, 8).unwrap();
    let t = GroundTruth::identity(grid);
    let g = grid_graph(grid, &t.placement, &t.orientation);
    let at = |r, c| grid.index(Cell::new(r, c));
    let interior = [
        jaccard_index(&g, at(3, 3), at(3, 4)),
        jaccard_index(&g, at(3, 3), at(4, 3)),
    ];
    let fig_ok = interior == [4, 4];
    let pass = edges_ok && diag_ok && fig_ok;
    report(
        7,
        pass,
        &format!(
            "jaccard > 0 and matches brute force on {checked} true edges: {edges_ok}; diagonal pairs have exactly 2 common neighbors: {diag_ok}; interior jaccard {interior:?}"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_08_dataset_harness() {
    let _serial = serial();
    let (images, source): (Vec<(String, RgbImage)>, String) =
        match std::env::var_os("PUZZLELAB_MIT_DIR") {
            Some(dir) => {
                let dir = PathBuf::from(dir);
                let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)
                    .unwrap()
                    .map(|e| e.unwrap().path())
                    .filter(|p| p.extension().is_some_and(|e| e == "png" || e == "ppm"))
                    .collect();
                paths.sort();
                let images = paths
                    .iter()
                    .map(|p| {
                        let name = p.file_stem().unwrap().to_string_lossy().into_owned();
                        (name, puzzlelab::image_io::read_rgb(p).unwrap())
                    })
                    .collect();
                (images, dir.display().to_string())
            }
            // MIT-format stand-in: 20 images of 18 x 24 patches of side 28
            None => (
                (0..20u64)
                    .map(|k| {
                        (
                            format!("synthetic{k:02}"),
                            synth::smooth_image(18 * 28, 24 * 28, 900 + k),
                        )
                    })
                    .collect(),
                "synthetic stand-in".into(),
            ),
        };
    let shape_ok = images.len() == 20
        && images
            .iter()
            .all(|(_, img)| (img.width() / 28) * (img.height() / 28) == 432);
    let results = run_dataset(
        &images,
        28,
        PuzzleType::Type2,
        20,
        0,
        &SolverOptions::default(),
    )
    .unwrap();
    let mut csv = Vec::new();
    write_csv(&results, &mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let header_ok = lines[0]
        == "image,runs,direct_mean,direct_std,neighbor_mean,neighbor_std,largest_mean,largest_std,perfect";
    let rows_ok = lines.len() == 22
        && lines[1..21]
            .iter()
            .all(|l| l.split(',').nth(1) == Some("20"));
    let summary: Vec<&str> = lines[21].split(',').collect();
    let runs_ok = summary[0] == "summary" && summary[1] == "400";
    let neighbor_mean: f64 = summary[4].parse().unwrap();
    let pass = shape_ok && header_ok && rows_ok && runs_ok;
    report(
        8,
        pass,
        &format!(
            "{source}: 20 images x 20 repeats, summary direct {}±{} neighbor {}±{} largest {}±{} perfect {} (informational neighbor >= 85: {})",
            summary[2],
            summary[3],
            summary[4],
            summary[5],
            summary[6],
            summary[7],
            summary[8],
            neighbor_mean >= 85.0
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_09_vdd_pathology() {
    let _serial = serial();
    let grid = GridSpec::new(5, 5).unwrap();
    let t = GroundTruth::identity(grid);
    let mut g = grid_graph(grid, &t.placement, &t.orientation);
    let at = |r, c| grid.index(Cell::new(r, c));
    let (i, j) = (at(2, 2), at(2, 3));
    g.remove_edge(i, j);
    let emb = vdd_distances(&g, 1.0, 2 * grid.len(), &EigenOptions::default()).unwrap();
    let diagonals = [at(1, 3), at(3, 3)];
    let closer: Vec<bool> = diagonals
        .iter()
        .map(|&k| emb.distance(i, k) < emb.distance(i, j))
        .collect();
    let pass = closer.iter().all(|&c| c);
    report(
        9,
        pass,
        &format!(
            "d(i,j) = {:.4}, d(i,k) = {:.4} / {:.4} for the two diagonal k",
            emb.distance(i, j),
            emb.distance(i, diagonals[0]),
            emb.distance(i, diagonals[1])
        ),
    );
    assert!(pass);
}

fn mit_sized_puzzle() -> (Vec<Patch>, GridSpec) {
    let img = synth::smooth_image(18 * 28, 24 * 28, 77);
    let (patches, grid, truth) = slice_image(&img, 28).unwrap();
    let (scr, _) = scramble(&patches, &truth, PuzzleType::Type2, 77).unwrap();
    (scr, grid)
}

fn timed_table(patches: &[Patch], threads: usize) -> (Duration, PairwiseTable) {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap();
    pool.install(|| {
        let start = Instant::now();
        let table = build_pairwise_table(patches).unwrap();
        (start.elapsed(), table)
    })
}

#[test]
fn criterion_10_performance_budget() {
    let _serial = serial();
    let (patches, grid) = mit_sized_puzzle();
    let (single, table) = timed_table(&patches, 1);
    let (four, _) = timed_table(&patches, 4);
    let speedup = single.as_secs_f64() / four.as_secs_f64();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let stages = pool.install(|| time_stages(&patches, grid, 77)).unwrap();
    let budget_ok = single < TABLE_BUDGET && table.n() == 432;
    let dominant = stages.table_dominates();
    let scaling_ok = speedup >= SCALING_TARGET;
    let cores = std::thread::available_parallelism().map_or(1, |c| c.get());
    let pass = budget_ok && dominant && scaling_ok;
    report(
        10,
        pass,
        &format!(
            "n=432 table {single:.2?} single-threaded (budget {TABLE_BUDGET:?}): {budget_ok}; table dominant ({:.0}% of stage time): {dominant}; 4-thread speedup {speedup:.2}x on {cores} available core(s) (target {SCALING_TARGET}x): {scaling_ok}",
            100.0 * stages.table_fraction
        ),
    );
    assert!(
        budget_ok && dominant,
        "single-threaded budget or stage dominance failed"
    );
    assert!(
        scaling_ok,
        "4-thread speedup {speedup:.2}x below {SCALING_TARGET}x with {cores} core(s)"
    );
}

#[test]
fn err_matches_solver_definition_on_truth() {
    // sanity link between the oracle's edge values and err_metric
    let img = synth::smooth_image(16, 24, 3);
    let (patches, grid, truth) = slice_image(&img, 8).unwrap();
    let table = build_pairwise_table(&patches).unwrap();
    let sol = puzzlelab::Solution::from(&truth);
    let mut e = 0.0;
    for (a, b) in grid.edges() {
        let d = if grid.cell(b).col > grid.cell(a).col {
            Direction::Right
        } else {
            Direction::Bottom
        };
        e += f64::from(mgc_side(&patches[a], &patches[b], Side::from_facing(d)).unwrap() as f32);
    }
    assert!((err_metric(&sol, &table) - 2.0 * e).abs() <= ERR_TOL);
}

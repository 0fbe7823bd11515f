//! Reconstruction scores and dataset aggregation.

use std::io::Write;

use image::RgbImage;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::metrics::build_pairwise_table;
use crate::puzzle::{scramble, slice_image, Direction, GroundTruth, PuzzleType, Solution};
use crate::rotation::Rotation;
use crate::solver::{solve_puzzle, SolverOptions};

fn quarter_turns<S: Serializer>(r: &Rotation, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_u8(r.quarter_turns())
}

/// Percentages are in `[0, 100]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalReport {
    /// Patches with correct cell and orientation, under the best global rotation.
    pub direct: f64,
    /// Truth-adjacent ordered pairs reproduced with the same relative offset
    /// and relative orientation.
    pub neighbor: f64,
    /// Largest set of patches assembled correctly relative to each other.
    pub largest: f64,
    pub perfect: u8,
    #[serde(serialize_with = "quarter_turns")]
    pub global_rotation: Rotation,
    /// Direct comparison without the global-rotation allowance.
    #[serde(skip)]
    pub direct_strict: f64,
}

fn check_inputs(solution: &Solution, truth: &GroundTruth) -> Result<()> {
    if solution.len() != truth.len() {
        return Err(Error::MismatchedInputs(format!(
            "solution has {} patches, truth has {}",
            solution.len(),
            truth.len()
        )));
    }
    let (a, b) = (solution.grid, truth.grid);
    if a != b {
        return Err(Error::MismatchedInputs(format!(
            "solution grid {}x{} differs from truth grid {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    Ok(())
}

fn direct_matches(solution: &Solution, truth: &GroundTruth) -> usize {
    (0..truth.len())
        .filter(|&i| {
            solution.placement[i] == truth.placement[i]
                && solution.orientation[i] == truth.orientation[i]
        })
        .count()
}

/// Whether `j`, the truth neighbor of `i` in direction `d`, keeps that
/// relation in the solution once the pair's common turn is accounted for.
fn pair_correct(
    solution: &Solution,
    truth: &GroundTruth,
    i: usize,
    j: usize,
    d: Direction,
) -> bool {
    let turn = solution.orientation[i] - truth.orientation[i];
    if solution.orientation[j] - truth.orientation[j] != turn {
        return false;
    }
    solution
        .grid
        .neighbor(solution.placement[i], d.rotated(turn))
        == Some(solution.placement[j])
}

pub fn evaluate(solution: &Solution, truth: &GroundTruth) -> Result<EvalReport> {
    check_inputs(solution, truth)?;
    let n = truth.len();
    let grid = truth.grid;
    let turns: &[Rotation] = if grid.is_square() {
        &Rotation::ALL
    } else {
        &[Rotation::IDENTITY, Rotation::HALF]
    };
    let mut best = (0, Rotation::IDENTITY);
    for &g in turns {
        let hits = direct_matches(&solution.rotated(g), truth);
        if hits > best.0 {
            best = (hits, g);
        }
    }
    let strict = direct_matches(solution, truth);

    let mut at = vec![usize::MAX; grid.len()];
    for (id, &c) in truth.placement.iter().enumerate() {
        at[grid.index(c)] = id;
    }
    let mut pairs = 0;
    let mut good = 0;
    let mut links: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for d in Direction::ALL {
            let Some(c) = grid.neighbor(truth.placement[i], d) else {
                continue;
            };
            let j = at[grid.index(c)];
            pairs += 1;
            if pair_correct(solution, truth, i, j, d) {
                good += 1;
                links[i].push(j);
            }
        }
    }

    let mut seen = vec![false; n];
    let mut largest = 0;
    for start in 0..n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut stack = vec![start];
        let mut size = 0;
        while let Some(v) = stack.pop() {
            size += 1;
            for &w in &links[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        largest = largest.max(size);
    }

    let pct = |k: usize, of: usize| {
        if of == 0 {
            100.0
        } else {
            100.0 * k as f64 / of as f64
        }
    };
    Ok(EvalReport {
        direct: pct(best.0, n),
        neighbor: pct(good, pairs),
        largest: pct(largest, n),
        perfect: u8::from(best.0 == n),
        global_rotation: best.1,
        direct_strict: pct(strict, n),
    })
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    fn of(values: impl Iterator<Item = f64> + Clone) -> Stat {
        let n = values.clone().count() as f64;
        let mean = values.clone().sum::<f64>() / n;
        let std = if n > 1.0 {
            (values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Stat { mean, std }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub count: usize,
    pub direct: Stat,
    pub neighbor: Stat,
    pub largest: Stat,
    pub perfect: usize,
}

pub fn aggregate(reports: &[EvalReport]) -> Result<Summary> {
    if reports.is_empty() {
        return Err(Error::InvalidInput("nothing to aggregate".into()));
    }
    Ok(Summary {
        count: reports.len(),
        direct: Stat::of(reports.iter().map(|r| r.direct)),
        neighbor: Stat::of(reports.iter().map(|r| r.neighbor)),
        largest: Stat::of(reports.iter().map(|r| r.largest)),
        perfect: reports.iter().map(|r| usize::from(r.perfect)).sum(),
    })
}

/// All runs of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageResult {
    pub name: String,
    pub runs: Vec<EvalReport>,
}

/// One row per image (mean and std over its runs) followed by a row
/// summarizing every run of every image.
pub fn write_csv<W: Write>(results: &[ImageResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record([
        "image",
        "runs",
        "direct_mean",
        "direct_std",
        "neighbor_mean",
        "neighbor_std",
        "largest_mean",
        "largest_std",
        "perfect",
    ])
    .map_err(io)?;
    let row = |name: &str, s: &Summary| {
        vec![
            name.to_string(),
            s.count.to_string(),
            format!("{:.3}", s.direct.mean),
            format!("{:.3}", s.direct.std),
            format!("{:.3}", s.neighbor.mean),
            format!("{:.3}", s.neighbor.std),
            format!("{:.3}", s.largest.mean),
            format!("{:.3}", s.largest.std),
            s.perfect.to_string(),
        ]
    };
    let mut all = Vec::new();
    for r in results {
        w.write_record(row(&r.name, &aggregate(&r.runs)?))
            .map_err(io)?;
        all.extend_from_slice(&r.runs);
    }
    w.write_record(row("summary", &aggregate(&all)?))
        .map_err(io)?;
    w.flush()?;
    Ok(())
}

/// Scrambles and solves every image `repeats` times, run `r` using seed
/// `seed + r`.
pub fn run_dataset(
    images: &[(String, RgbImage)],
    s: usize,
    puzzle_type: PuzzleType,
    repeats: usize,
    seed: u64,
    opts: &SolverOptions,
) -> Result<Vec<ImageResult>> {
    images
        .iter()
        .map(|(name, img)| {
            let (patches, grid, truth) = slice_image(img, s)?;
            let runs = (0..repeats as u64)
                .map(|r| {
                    let run_seed = seed.wrapping_add(r);
                    let (scr, scr_truth) = scramble(&patches, &truth, puzzle_type, run_seed)?;
                    let table = build_pairwise_table(&scr)?;
                    let run_opts = SolverOptions {
                        seed: run_seed,
                        ..*opts
                    };
                    let out = solve_puzzle(&table, grid, puzzle_type, &run_opts)?;
                    let report = evaluate(&out.solution, &scr_truth)?;
                    log::info!(
                        "{name} run {r}: direct {:.1}, neighbor {:.1}",
                        report.direct,
                        report.neighbor
                    );
                    Ok(report)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(ImageResult {
                name: name.clone(),
                runs,
            })
        })
        .collect()
}

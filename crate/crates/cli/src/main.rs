use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use puzzlelab::bench::{time_stages, StageTimings};
use puzzlelab::congraph::{build_type2_graph, build_type3_graph};
use puzzlelab::eval::{aggregate, evaluate, run_dataset, write_csv, ImageResult};
use puzzlelab::image_io::{read_rgb, write_rgb};
use puzzlelab::metrics::{build_pairwise_table, PairwiseTable};
use puzzlelab::puzzle::{reassemble, scramble, scrambled_image, slice_image};
use puzzlelab::sidecar::Sidecar;
use puzzlelab::solver::{solve_puzzle, SolverOptions, Variant};
use puzzlelab::spectral::{assemble_gcl, top_eigenvectors, EigenOptions};
use puzzlelab::vdd::VddOptions;
use puzzlelab::{synth, PuzzleType, RgbImage};

/// Square jigsaw puzzle scrambler, solver and evaluator.
#[derive(Parser)]
#[command(name = "puzzlelab", version)]
struct Cli {
    /// Worker threads for table building and other parallel stages.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cut an image into patches, shuffle and/or rotate them.
    Scramble(ScrambleArgs),
    /// Reassemble a scrambled image.
    Solve(SolveArgs),
    /// Score solutions against ground truth.
    Eval(EvalArgs),
    /// Time the pipeline stages.
    Bench(BenchArgs),
}

#[derive(Args)]
struct ScrambleArgs {
    input: PathBuf,
    #[arg(short = 's', long = "size")]
    size: usize,
    #[arg(long = "type", value_parser = clap::value_parser!(u8).range(1..=3))]
    puzzle_type: u8,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolverFlags {
    #[arg(long, default_value_t = 5)]
    iterations: usize,
    /// Penalize pairs that are far apart in vector diffusion distance.
    #[arg(long)]
    vdd: bool,
    /// Also start from the third and fourth eigenvectors; keep the better run.
    #[arg(long)]
    top34: bool,
}

impl SolverFlags {
    fn options(&self, seed: u64) -> SolverOptions {
        SolverOptions {
            iterations: self.iterations,
            variant: if self.top34 {
                Variant::Top34Init
            } else {
                Variant::Standard
            },
            seed,
            vdd: self.vdd.then(VddOptions::default),
            ..SolverOptions::default()
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    /// Scrambled image; `<name>.truth.json` next to it supplies metadata.
    input: PathBuf,
    #[arg(short = 's', long = "size")]
    size: Option<usize>,
    #[arg(long = "type", value_parser = clap::value_parser!(u8).range(1..=3))]
    puzzle_type: Option<u8>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    solver: SolverFlags,
    /// Write the per-iteration Err history to `<name>.trace.json`.
    #[arg(long)]
    trace: bool,
    /// Pairwise table file, read if present and written otherwise.
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Write the initial connection graph to `<name>.graph.json`.
    #[arg(long)]
    dump_graph: bool,
    /// Write the leading eigenvalues of the initial graph to `<name>.spectrum.json`.
    #[arg(long)]
    dump_spectrum: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Solution sidecar (single-image mode).
    solution: Option<PathBuf>,
    /// Truth sidecar; defaults to the solution path with `.truth.json`.
    truth: Option<PathBuf>,
    /// Score every `<name>.solution.json` in a directory.
    #[arg(long, conflicts_with_all = ["solution", "dataset"])]
    dir: Option<PathBuf>,
    /// Scramble, solve and score every image in a directory.
    #[arg(long, conflicts_with = "solution")]
    dataset: Option<PathBuf>,
    #[arg(short = 's', long = "size", default_value_t = 28)]
    size: usize,
    #[arg(long = "type", default_value_t = 2, value_parser = clap::value_parser!(u8).range(1..=3))]
    puzzle_type: u8,
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    solver: SolverFlags,
    /// Also report the direct comparison without global rotation.
    #[arg(short, long)]
    verbose: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Images to time; synthetic images with 108, 216 and 432 patches when omitted.
    inputs: Vec<PathBuf>,
    #[arg(short = 's', long = "size", default_value_t = 28)]
    size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// `dir/foo.scrambled.png` -> `foo`.
fn base_name(path: &Path) -> Result<String> {
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .with_context(|| format!("bad file name {}", path.display()))?;
    let stem = name.split('.').next().unwrap_or(name);
    Ok(stem.to_string())
}

fn out_dir(out: &Option<PathBuf>, input: &Path) -> Result<PathBuf> {
    let dir = match out {
        Some(d) => d.clone(),
        None => input.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    if !dir.as_os_str().is_empty() {
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(dir)
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut w =
        BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

fn cmd_scramble(a: &ScrambleArgs) -> Result<()> {
    let puzzle_type = PuzzleType::from_number(a.puzzle_type)?;
    let img = read_rgb(&a.input)?;
    let (patches, grid, truth) = slice_image(&img, a.size)?;
    let (scr, scr_truth) = scramble(&patches, &truth, puzzle_type, a.seed)?;
    let dir = out_dir(&a.out, &a.input)?;
    let name = base_name(&a.input)?;
    let image_path = dir.join(format!("{name}.scrambled.png"));
    write_rgb(&image_path, &scrambled_image(&scr, grid)?)?;
    let truth_path = dir.join(format!("{name}.truth.json"));
    Sidecar::from_truth(&scr_truth, a.size, puzzle_type, a.seed).write(&truth_path)?;
    println!("{}\n{}", image_path.display(), truth_path.display());
    Ok(())
}

fn load_or_build_table(
    cache: &Option<PathBuf>,
    patches: &[puzzlelab::Patch],
) -> Result<PairwiseTable> {
    if let Some(path) = cache {
        if path.exists() {
            let table = PairwiseTable::read_from(BufReader::new(File::open(path)?))
                .with_context(|| format!("reading table cache {}", path.display()))?;
            if table.n() != patches.len() || table.patch_side() != patches[0].side() {
                bail!(
                    "table cache {} holds {} patches of side {}, puzzle has {} of side {}",
                    path.display(),
                    table.n(),
                    table.patch_side(),
                    patches.len(),
                    patches[0].side()
                );
            }
            log::info!("loaded pairwise table from {}", path.display());
            return Ok(table);
        }
    }
    let table = build_pairwise_table(patches)?;
    if let Some(path) = cache {
        let mut w = BufWriter::new(File::create(path)?);
        table.write_to(&mut w)?;
        w.flush()?;
        log::info!("wrote pairwise table to {}", path.display());
    }
    Ok(table)
}

fn cmd_solve(a: &SolveArgs) -> Result<()> {
    let name = base_name(&a.input)?;
    let sidecar_path = a.input.with_file_name(format!("{name}.truth.json"));
    let sidecar = if sidecar_path.exists() {
        Some(Sidecar::read(&sidecar_path)?)
    } else {
        None
    };
    let size = match (a.size, &sidecar) {
        (Some(s), _) => s,
        (None, Some(sc)) => sc.s,
        (None, None) => bail!(
            "patch size unknown: pass --size or provide {}",
            sidecar_path.display()
        ),
    };
    let puzzle_type = match (a.puzzle_type, &sidecar) {
        (Some(t), _) => PuzzleType::from_number(t)?,
        (None, Some(sc)) => sc.kind()?,
        (None, None) => bail!(
            "puzzle type unknown: pass --type or provide {}",
            sidecar_path.display()
        ),
    };
    let img = read_rgb(&a.input)?;
    let (patches, grid, _) = slice_image(&img, size)?;
    if let Some(sc) = &sidecar {
        let expect = sc.grid()?;
        if expect != grid {
            bail!(
                "sidecar grid {}x{} does not match image grid {}x{}",
                expect.rows,
                expect.cols,
                grid.rows,
                grid.cols
            );
        }
    }
    let dir = out_dir(&a.out, &a.input)?;
    let table = load_or_build_table(&a.cache, &patches)?;

    if a.dump_graph || a.dump_spectrum {
        let g = match puzzle_type {
            PuzzleType::Type1 => None,
            PuzzleType::Type2 => Some(build_type2_graph(&table, a.seed)?),
            PuzzleType::Type3 => Some(build_type3_graph(grid, &table)),
        };
        match g {
            None => log::warn!("type 1 puzzles have no connection graph; nothing dumped"),
            Some(g) => {
                if a.dump_graph {
                    write_json(&dir.join(format!("{name}.graph.json")), &g.to_json())?;
                }
                if a.dump_spectrum && g.n() > 1 {
                    let gcl = assemble_gcl(&g)?;
                    let k = 8.min(2 * g.n());
                    let eigen = EigenOptions {
                        seed: a.seed,
                        ..EigenOptions::default()
                    };
                    let res = top_eigenvectors(&gcl.c_sym, k, &eigen)?;
                    write_json(
                        &dir.join(format!("{name}.spectrum.json")),
                        &serde_json::json!({ "eigenvalues": res.eigenvalues, "residual": res.residual }),
                    )?;
                }
            }
        }
    }

    let out = solve_puzzle(&table, grid, puzzle_type, &a.solver.options(a.seed))?;
    let sol = &out.solution;
    log::info!("solved {name}: Err = {:.6}", sol.err);

    let sol_path = dir.join(format!("{name}.solution.json"));
    Sidecar::from_solution(sol, size, puzzle_type, a.seed).write(&sol_path)?;
    let img_path = dir.join(format!("{name}.reconstructed.png"));
    write_rgb(
        &img_path,
        &reassemble(&patches, grid, &sol.placement, &sol.orientation)?,
    )?;
    println!("{}\n{}", sol_path.display(), img_path.display());

    if a.trace {
        let trace = match &out.type2 {
            Some(t2) => t2.trace_json(),
            None => serde_json::json!({
                "best_iteration": 0,
                "iterations": [{ "iteration": 0, "err": sol.err, "removed_edges": 0, "refilled_locations": 0 }],
            }),
        };
        let path = dir.join(format!("{name}.trace.json"));
        write_json(&path, &trace)?;
        println!("{}", path.display());
    }
    Ok(())
}

fn emit_csv(results: &[ImageResult], out: &Option<PathBuf>) -> Result<()> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let path = dir.join("results.csv");
            write_csv(results, BufWriter::new(File::create(&path)?))?;
            println!("{}", path.display());
        }
        None => write_csv(results, std::io::stdout().lock())?,
    }
    Ok(())
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    if let Some(dir) = &a.dataset {
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                matches!(
                    p.extension()
                        .and_then(|e| e.to_str())
                        .map(str::to_ascii_lowercase)
                        .as_deref(),
                    Some("png" | "ppm" | "pnm")
                )
            })
            .collect();
        paths.sort();
        if paths.is_empty() {
            bail!("no images in {}", dir.display());
        }
        let images = paths
            .iter()
            .map(|p| Ok((base_name(p)?, read_rgb(p)?)))
            .collect::<Result<Vec<_>>>()?;
        let puzzle_type = PuzzleType::from_number(a.puzzle_type)?;
        let results = run_dataset(
            &images,
            a.size,
            puzzle_type,
            a.repeats,
            a.seed,
            &a.solver.options(a.seed),
        )?;
        return emit_csv(&results, &a.out);
    }
    if let Some(dir) = &a.dir {
        let mut results = Vec::new();
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.to_str().is_some_and(|s| s.ends_with(".solution.json")))
            .collect();
        paths.sort();
        for p in paths {
            let name = base_name(&p)?;
            let truth =
                Sidecar::read(&p.with_file_name(format!("{name}.truth.json")))?.to_truth()?;
            let sol = Sidecar::read(&p)?.to_solution()?;
            results.push(ImageResult {
                name,
                runs: vec![evaluate(&sol, &truth)?],
            });
        }
        if results.is_empty() {
            bail!("no solution sidecars in {}", dir.display());
        }
        return emit_csv(&results, &a.out);
    }
    let Some(sol_path) = &a.solution else {
        bail!("give a solution sidecar, --dir or --dataset");
    };
    let truth_path = match &a.truth {
        Some(t) => t.clone(),
        None => sol_path.with_file_name(format!("{}.truth.json", base_name(sol_path)?)),
    };
    let sol = Sidecar::read(sol_path)?.to_solution()?;
    let truth = Sidecar::read(&truth_path)?.to_truth()?;
    let report = evaluate(&sol, &truth)?;
    let mut json = serde_json::to_value(report)?;
    if a.verbose {
        json["direct_strict"] = serde_json::json!(report.direct_strict);
        json["summary"] = serde_json::to_value(aggregate(&[report])?)?;
    }
    println!("{}", serde_json::to_string_pretty(&json)?);
    Ok(())
}

/// Least-squares slope of `ln y` against `ln x`.
fn log_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let pts: Vec<(f64, f64)> = points
        .iter()
        .map(|&(x, y)| (x.ln(), y.max(1e-12).ln()))
        .collect();
    let m = pts.len() as f64;
    let (sx, sy) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y));
    let (mx, my) = (sx / m, sy / m);
    let num: f64 = pts.iter().map(|&(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = pts.iter().map(|&(x, _)| (x - mx) * (x - mx)).sum();
    (den > 0.0).then(|| num / den)
}

fn cmd_bench(a: &BenchArgs) -> Result<()> {
    let images: Vec<(String, RgbImage)> = if a.inputs.is_empty() {
        [(9u32, 12u32), (12, 18), (18, 24)]
            .iter()
            .map(|&(r, c)| {
                let s = a.size as u32;
                (
                    format!("synthetic-{}", r * c),
                    synth::smooth_image(r * s, c * s, a.seed),
                )
            })
            .collect()
    } else {
        a.inputs
            .iter()
            .map(|p| Ok((base_name(p)?, read_rgb(p)?)))
            .collect::<Result<_>>()?
    };
    let mut stages: Vec<StageTimings> = Vec::new();
    let mut names = Vec::new();
    for (name, img) in &images {
        let (patches, grid, truth) = slice_image(img, a.size)?;
        let (scr, _) = scramble(&patches, &truth, PuzzleType::Type2, a.seed)?;
        let t = time_stages(&scr, grid, a.seed)?;
        log::info!(
            "{name}: n = {}, table {:.3}s of {:.3}s",
            t.n,
            t.table,
            t.total
        );
        stages.push(t);
        names.push(name.clone());
    }
    let slope = |f: fn(&StageTimings) -> f64| {
        log_slope(
            &stages
                .iter()
                .map(|t| (t.n as f64, f(t)))
                .collect::<Vec<_>>(),
        )
    };
    let report = serde_json::json!({
        "threads": rayon::current_num_threads(),
        "images": names,
        "stages": stages,
        "table_dominant": stages.iter().all(StageTimings::table_dominates),
        "table_exponent": slope(|t| t.table),
        "spectral_exponent": slope(|t| t.spectral),
    });
    match &a.out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let path = dir.join("bench.json");
            write_json(&path, &report)?;
            println!("{}", path.display());
        }
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PUZZLELAB_LOG", "warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: cannot set thread count: {e}");
            std::process::exit(1);
        }
    }
    let result = match &cli.command {
        Command::Scramble(a) => cmd_scramble(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Bench(a) => cmd_bench(a),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

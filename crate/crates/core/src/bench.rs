//! Wall-clock timings of the pipeline stages.

use std::time::Instant;

use serde::Serialize;

use crate::congraph::build_type2_graph;
use crate::error::Result;
use crate::metrics::build_pairwise_table;
use crate::placement::solve_type1;
use crate::puzzle::{GridSpec, Patch};
use crate::spectral::{recover_orientations, EigenOptions, OrientationMode};

/// Seconds spent in each stage of one type-2 pass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StageTimings {
    pub n: usize,
    pub table: f64,
    pub graph: f64,
    pub spectral: f64,
    pub placement: f64,
    pub total: f64,
    pub table_fraction: f64,
}

impl StageTimings {
    pub fn table_dominates(&self) -> bool {
        self.table >= self.graph.max(self.spectral).max(self.placement)
    }
}

/// Times the table build, type-2 graph construction, orientation recovery
/// and placement on the given (already scrambled) patches.
pub fn time_stages(patches: &[Patch], grid: GridSpec, seed: u64) -> Result<StageTimings> {
    let clock = Instant::now();
    let table = build_pairwise_table(patches)?;
    let table_secs = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let g = build_type2_graph(&table, seed)?;
    let graph_secs = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let opts = EigenOptions {
        seed,
        ..EigenOptions::default()
    };
    let rec = recover_orientations(&g, OrientationMode::Top12, &opts)?;
    let spectral_secs = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    solve_type1(&table, grid, &rec.rotations, true, seed)?;
    let placement_secs = clock.elapsed().as_secs_f64();

    let total = table_secs + graph_secs + spectral_secs + placement_secs;
    Ok(StageTimings {
        n: patches.len(),
        table: table_secs,
        graph: graph_secs,
        spectral: spectral_secs,
        placement: placement_secs,
        total,
        table_fraction: if total > 0.0 { table_secs / total } else { 0.0 },
    })
}

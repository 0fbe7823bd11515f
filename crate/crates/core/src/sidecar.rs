//! JSON sidecars carrying grid metadata, ground truth and solutions.
//!
//! Fields are declared in alphabetical order so the serialized keys come out
//! sorted.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::puzzle::{Cell, GridSpec, GroundTruth, PuzzleType, Solution};
use crate::rotation::Rotation;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrientationEntry {
    pub id: usize,
    pub q: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlacementEntry {
    pub col: usize,
    pub id: usize,
    pub row: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub cols: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub err: Option<f64>,
    pub orientation: Vec<OrientationEntry>,
    pub placement: Vec<PlacementEntry>,
    pub rows: usize,
    pub s: usize,
    pub seed: u64,
    #[serde(rename = "type")]
    pub puzzle_type: u8,
}

impl Sidecar {
    fn build(
        grid: GridSpec,
        placement: &[Cell],
        orientation: &[Rotation],
        s: usize,
        puzzle_type: PuzzleType,
        seed: u64,
    ) -> Self {
        Sidecar {
            cols: grid.cols,
            err: None,
            orientation: orientation
                .iter()
                .enumerate()
                .map(|(id, r)| OrientationEntry {
                    id,
                    q: r.quarter_turns(),
                })
                .collect(),
            placement: placement
                .iter()
                .enumerate()
                .map(|(id, c)| PlacementEntry {
                    col: c.col,
                    id,
                    row: c.row,
                })
                .collect(),
            rows: grid.rows,
            s,
            seed,
            puzzle_type: puzzle_type.number(),
        }
    }

    pub fn from_truth(truth: &GroundTruth, s: usize, puzzle_type: PuzzleType, seed: u64) -> Self {
        Self::build(
            truth.grid,
            &truth.placement,
            &truth.orientation,
            s,
            puzzle_type,
            seed,
        )
    }

    pub fn from_solution(sol: &Solution, s: usize, puzzle_type: PuzzleType, seed: u64) -> Self {
        let mut out = Self::build(
            sol.grid,
            &sol.placement,
            &sol.orientation,
            s,
            puzzle_type,
            seed,
        );
        out.err = Some(sol.err);
        out
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.rows, self.cols)
    }

    pub fn kind(&self) -> Result<PuzzleType> {
        PuzzleType::from_number(self.puzzle_type)
    }

    fn tables(&self) -> Result<(Vec<Cell>, Vec<Rotation>)> {
        let n = self.rows * self.cols;
        if self.placement.len() != n || self.orientation.len() != n {
            return Err(Error::MismatchedInputs(format!(
                "sidecar lists {} placements and {} orientations for a {}x{} grid",
                self.placement.len(),
                self.orientation.len(),
                self.rows,
                self.cols
            )));
        }
        let mut placement = vec![None; n];
        for e in &self.placement {
            let slot = placement.get_mut(e.id).ok_or_else(|| {
                Error::MismatchedInputs(format!("patch id {} out of range", e.id))
            })?;
            *slot = Some(Cell::new(e.row, e.col));
        }
        let mut orientation = vec![None; n];
        for e in &self.orientation {
            if e.q > 3 {
                return Err(Error::InvalidInput(format!(
                    "rotation {} out of range",
                    e.q
                )));
            }
            let slot = orientation.get_mut(e.id).ok_or_else(|| {
                Error::MismatchedInputs(format!("patch id {} out of range", e.id))
            })?;
            *slot = Some(Rotation::new(i64::from(e.q)));
        }
        let placement = placement
            .into_iter()
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::MismatchedInputs("duplicate placement ids".into()))?;
        let orientation = orientation
            .into_iter()
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::MismatchedInputs("duplicate orientation ids".into()))?;
        Ok((placement, orientation))
    }

    pub fn to_truth(&self) -> Result<GroundTruth> {
        let (placement, orientation) = self.tables()?;
        GroundTruth::new(self.grid()?, placement, orientation)
    }

    pub fn to_solution(&self) -> Result<Solution> {
        let (placement, orientation) = self.tables()?;
        let mut sol = Solution::new(self.grid()?, placement, orientation)?;
        sol.err = self.err.unwrap_or(0.0);
        Ok(sol)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }
}

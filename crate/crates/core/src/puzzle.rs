//! Puzzle domain types, pixel rotation, slicing and scrambling.
//!
//! Patches are addressed row-major with `(0, 0)` at the top-left cell. A
//! placement maps a patch id to the grid cell it belongs in; an orientation
//! is the counter-clockwise rotation that must be applied to the patch as
//! given to make it upright.

use image::RgbImage;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Stream};
use crate::rotation::Rotation;

/// One square `s x s` RGB piece. Pixels are stored row-major, three bytes per
/// pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Patch {
    pub id: usize,
    side: usize,
    pixels: Vec<u8>,
}

impl Patch {
    pub fn new(id: usize, side: usize, pixels: Vec<u8>) -> Result<Self> {
        if side < 2 {
            return Err(Error::InvalidInput(format!(
                "patch side must be at least 2, got {side}"
            )));
        }
        if pixels.len() != side * side * 3 {
            return Err(Error::InvalidInput(format!(
                "patch of side {side} needs {} samples, got {}",
                side * side * 3,
                pixels.len()
            )));
        }
        Ok(Patch { id, side, pixels })
    }

    /// Uniformly colored patch.
    pub fn uniform(id: usize, side: usize, rgb: [u8; 3]) -> Result<Self> {
        let pixels = rgb.iter().copied().cycle().take(side * side * 3).collect();
        Patch::new(id, side, pixels)
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn pixel(&self, row: usize, col: usize) -> [u8; 3] {
        let o = (row * self.side + col) * 3;
        [self.pixels[o], self.pixels[o + 1], self.pixels[o + 2]]
    }

    /// True when every pixel has the same color.
    pub fn is_uniform(&self) -> bool {
        self.pixels.chunks_exact(3).all(|p| p == &self.pixels[..3])
    }
}

/// Rotates the pixel array counter-clockwise by `r` quarter turns.
pub fn rotate_patch(p: &Patch, r: Rotation) -> Patch {
    let s = p.side;
    let mut out = vec![0u8; p.pixels.len()];
    for row in 0..s {
        for col in 0..s {
            // destination (row, col) reads source by inverting the turn
            let (sr, sc) = match r.quarter_turns() {
                0 => (row, col),
                1 => (col, s - 1 - row),
                2 => (s - 1 - row, s - 1 - col),
                _ => (s - 1 - col, row),
            };
            let d = (row * s + col) * 3;
            let o = (sr * s + sc) * 3;
            out[d..d + 3].copy_from_slice(&p.pixels[o..o + 3]);
        }
    }
    Patch {
        id: p.id,
        side: s,
        pixels: out,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub fn new(row: usize, col: usize) -> Self {
        Cell { row, col }
    }
}

/// Neighbor directions in counter-clockwise order, so that turning a patch
/// by `q` quarter turns moves its side `d` to `d + q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Right = 0,
    Top = 1,
    Left = 2,
    Bottom = 3,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::Right,
        Direction::Top,
        Direction::Left,
        Direction::Bottom,
    ];

    pub fn from_index(i: usize) -> Direction {
        Self::ALL[i % 4]
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn opposite(self) -> Direction {
        Direction::from_index(self.index() + 2)
    }

    /// Direction after turning counter-clockwise by `r`.
    pub fn rotated(self, r: Rotation) -> Direction {
        Direction::from_index(self.index() + r.quarter_turns() as usize)
    }

    /// `(d_row, d_col)` step in image coordinates (rows grow downward).
    pub fn offset(self) -> (isize, isize) {
        match self {
            Direction::Right => (0, 1),
            Direction::Top => (-1, 0),
            Direction::Left => (0, -1),
            Direction::Bottom => (1, 0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
}

impl GridSpec {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidInput(format!(
                "grid must be non-empty, got {rows}x{cols}"
            )));
        }
        Ok(GridSpec { rows, cols })
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn transposed(&self) -> GridSpec {
        GridSpec {
            rows: self.cols,
            cols: self.rows,
        }
    }

    pub fn cell(&self, index: usize) -> Cell {
        Cell::new(index / self.cols, index % self.cols)
    }

    pub fn index(&self, cell: Cell) -> usize {
        cell.row * self.cols + cell.col
    }

    pub fn contains(&self, cell: Cell) -> bool {
        cell.row < self.rows && cell.col < self.cols
    }

    pub fn neighbor(&self, cell: Cell, dir: Direction) -> Option<Cell> {
        let (dr, dc) = dir.offset();
        let r = cell.row.checked_add_signed(dr)?;
        let c = cell.col.checked_add_signed(dc)?;
        let n = Cell::new(r, c);
        self.contains(n).then_some(n)
    }

    /// All unordered 4-neighbor pairs `(a, b)` of cell indices with `a < b`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for r in 0..self.rows {
            for c in 0..self.cols {
                let a = self.index(Cell::new(r, c));
                if c + 1 < self.cols {
                    out.push((a, a + 1));
                }
                if r + 1 < self.rows {
                    out.push((a, a + self.cols));
                }
            }
        }
        out
    }

    /// Where `cell` lands when the whole board is turned counter-clockwise by
    /// `r`. Odd turns map a `rows x cols` board onto a `cols x rows` one.
    pub fn rotate_cell(&self, cell: Cell, r: Rotation) -> Cell {
        let (h, w) = (self.rows, self.cols);
        match r.quarter_turns() {
            0 => cell,
            1 => Cell::new(w - 1 - cell.col, cell.row),
            2 => Cell::new(h - 1 - cell.row, w - 1 - cell.col),
            _ => Cell::new(cell.col, h - 1 - cell.row),
        }
    }
}

fn check_bijection(grid: &GridSpec, placement: &[Cell]) -> Result<()> {
    if placement.len() != grid.len() {
        return Err(Error::SizeMismatch {
            expected: grid.len(),
            actual: placement.len(),
        });
    }
    let mut seen = vec![false; grid.len()];
    for (id, &cell) in placement.iter().enumerate() {
        if !grid.contains(cell) {
            return Err(Error::InvalidInput(format!(
                "patch {id} placed outside the {}x{} grid at {cell:?}",
                grid.rows, grid.cols
            )));
        }
        let k = grid.index(cell);
        if std::mem::replace(&mut seen[k], true) {
            return Err(Error::InvalidInput(format!("cell {cell:?} assigned twice")));
        }
    }
    Ok(())
}

/// Where every given patch belongs and how to turn it upright.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    pub grid: GridSpec,
    pub placement: Vec<Cell>,
    pub orientation: Vec<Rotation>,
}

impl GroundTruth {
    pub fn new(grid: GridSpec, placement: Vec<Cell>, orientation: Vec<Rotation>) -> Result<Self> {
        check_bijection(&grid, &placement)?;
        if orientation.len() != placement.len() {
            return Err(Error::SizeMismatch {
                expected: placement.len(),
                actual: orientation.len(),
            });
        }
        Ok(GroundTruth {
            grid,
            placement,
            orientation,
        })
    }

    pub fn identity(grid: GridSpec) -> Self {
        GroundTruth {
            grid,
            placement: (0..grid.len()).map(|k| grid.cell(k)).collect(),
            orientation: vec![Rotation::IDENTITY; grid.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.placement.len()
    }

    pub fn is_empty(&self) -> bool {
        self.placement.is_empty()
    }
}

/// A solver's answer: placement, orientation and its Err score.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub grid: GridSpec,
    pub placement: Vec<Cell>,
    pub orientation: Vec<Rotation>,
    pub err: f64,
}

impl Solution {
    pub fn new(grid: GridSpec, placement: Vec<Cell>, orientation: Vec<Rotation>) -> Result<Self> {
        check_bijection(&grid, &placement)?;
        if orientation.len() != placement.len() {
            return Err(Error::SizeMismatch {
                expected: placement.len(),
                actual: orientation.len(),
            });
        }
        Ok(Solution {
            grid,
            placement,
            orientation,
            err: 0.0,
        })
    }

    pub fn len(&self) -> usize {
        self.placement.len()
    }

    pub fn is_empty(&self) -> bool {
        self.placement.is_empty()
    }

    /// Inverse of the placement: patch id at each cell, row-major.
    pub fn occupancy(&self) -> Vec<usize> {
        let mut at = vec![usize::MAX; self.grid.len()];
        for (id, &cell) in self.placement.iter().enumerate() {
            at[self.grid.index(cell)] = id;
        }
        at
    }

    /// The same assembled picture turned counter-clockwise by `r`.
    pub fn rotated(&self, r: Rotation) -> Solution {
        let grid = if r.quarter_turns() % 2 == 1 {
            self.grid.transposed()
        } else {
            self.grid
        };
        Solution {
            grid,
            placement: self
                .placement
                .iter()
                .map(|&c| self.grid.rotate_cell(c, r))
                .collect(),
            orientation: self.orientation.iter().map(|&o| o + r).collect(),
            err: self.err,
        }
    }
}

impl From<&GroundTruth> for Solution {
    fn from(t: &GroundTruth) -> Self {
        Solution {
            grid: t.grid,
            placement: t.placement.clone(),
            orientation: t.orientation.clone(),
            err: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PuzzleType {
    /// shifted only
    Type1,
    /// shifted and rotated
    Type2,
    /// rotated only
    Type3,
}

impl PuzzleType {
    pub fn from_number(t: u8) -> Result<Self> {
        match t {
            1 => Ok(PuzzleType::Type1),
            2 => Ok(PuzzleType::Type2),
            3 => Ok(PuzzleType::Type3),
            _ => Err(Error::InvalidInput(format!(
                "puzzle type must be 1, 2 or 3, got {t}"
            ))),
        }
    }

    pub fn number(self) -> u8 {
        match self {
            PuzzleType::Type1 => 1,
            PuzzleType::Type2 => 2,
            PuzzleType::Type3 => 3,
        }
    }

    pub fn shifts(self) -> bool {
        matches!(self, PuzzleType::Type1 | PuzzleType::Type2)
    }

    pub fn rotates(self) -> bool {
        matches!(self, PuzzleType::Type2 | PuzzleType::Type3)
    }
}

/// Cuts an image into row-major `s x s` patches.
pub fn slice_image(img: &RgbImage, s: usize) -> Result<(Vec<Patch>, GridSpec, GroundTruth)> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    if s == 0 || h % s != 0 || w % s != 0 || h == 0 || w == 0 {
        return Err(Error::Dimension {
            height: h,
            width: w,
            side: s,
        });
    }
    if s < 2 {
        return Err(Error::InvalidInput("patch side must be at least 2".into()));
    }
    let grid = GridSpec::new(h / s, w / s)?;
    let raw = img.as_raw();
    let mut patches = Vec::with_capacity(grid.len());
    for k in 0..grid.len() {
        let cell = grid.cell(k);
        let mut px = Vec::with_capacity(s * s * 3);
        for r in 0..s {
            let y = cell.row * s + r;
            let start = (y * w + cell.col * s) * 3;
            px.extend_from_slice(&raw[start..start + s * 3]);
        }
        patches.push(Patch::new(k, s, px)?);
    }
    Ok((patches, grid, GroundTruth::identity(grid)))
}

/// Paints patches onto a canvas: patch `i` is turned by `orientation[i]` and
/// drawn at `placement[i]`.
pub fn reassemble(
    patches: &[Patch],
    grid: GridSpec,
    placement: &[Cell],
    orientation: &[Rotation],
) -> Result<RgbImage> {
    check_bijection(&grid, placement)?;
    if patches.len() != grid.len() || orientation.len() != grid.len() {
        return Err(Error::SizeMismatch {
            expected: grid.len(),
            actual: patches.len().min(orientation.len()),
        });
    }
    let s = patches[0].side();
    let w = grid.cols * s;
    let mut raw = vec![0u8; grid.rows * s * w * 3];
    for (i, p) in patches.iter().enumerate() {
        if p.side() != s {
            return Err(Error::InvalidInput("patches have different sides".into()));
        }
        let turned = rotate_patch(p, orientation[i]);
        let cell = placement[i];
        for r in 0..s {
            let y = cell.row * s + r;
            let dst = (y * w + cell.col * s) * 3;
            raw[dst..dst + s * 3].copy_from_slice(&turned.pixels[r * s * 3..(r + 1) * s * 3]);
        }
    }
    Ok(RgbImage::from_raw(w as u32, (grid.rows * s) as u32, raw).expect("buffer size matches"))
}

/// Lays patches out in id order, unrotated: the picture a solver is handed.
pub fn scrambled_image(patches: &[Patch], grid: GridSpec) -> Result<RgbImage> {
    let placement: Vec<Cell> = (0..grid.len()).map(|k| grid.cell(k)).collect();
    reassemble(
        patches,
        grid,
        &placement,
        &vec![Rotation::IDENTITY; grid.len()],
    )
}

/// Shuffles and/or turns patches according to the puzzle type.
///
/// Output patch `k` is input patch `perm[k]` turned by a random rotation; the
/// returned truth composes the input truth with the inverse of that
/// transform. Type 3 keeps the order; type 1 keeps orientations.
pub fn scramble(
    patches: &[Patch],
    truth: &GroundTruth,
    puzzle_type: PuzzleType,
    seed: u64,
) -> Result<(Vec<Patch>, GroundTruth)> {
    if patches.len() != truth.len() {
        return Err(Error::SizeMismatch {
            expected: truth.len(),
            actual: patches.len(),
        });
    }
    let n = patches.len();
    let mut rng = rng::stream(seed, Stream::Scramble);
    let mut perm: Vec<usize> = (0..n).collect();
    if puzzle_type.shifts() {
        perm.shuffle(&mut rng);
    }
    let turns: Vec<Rotation> = (0..n)
        .map(|_| {
            if puzzle_type.rotates() {
                Rotation::new(rng.gen_range(0..4))
            } else {
                Rotation::IDENTITY
            }
        })
        .collect();

    let mut out = Vec::with_capacity(n);
    let mut placement = Vec::with_capacity(n);
    let mut orientation = Vec::with_capacity(n);
    for (k, (&src, &g)) in perm.iter().zip(&turns).enumerate() {
        let mut p = rotate_patch(&patches[src], g);
        p.id = k;
        out.push(p);
        placement.push(truth.placement[src]);
        orientation.push(truth.orientation[src] - g);
    }
    Ok((out, GroundTruth::new(truth.grid, placement, orientation)?))
}

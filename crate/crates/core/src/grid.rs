//! Cell grids over the planar workspace.
//!
//! Cells are indexed row-major, `index = row * width + col`. Cell `(col, row)`
//! covers `[col * cell_size, (col + 1) * cell_size) x [row * cell_size, (row + 1) * cell_size)`
//! in workspace coordinates, so `x` grows with the column and `y` with the row.

use std::io::{Read, Write};
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const GRID_MAGIC: &[u8; 4] = b"OSCG";
pub const GRID_HEADER_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub width: usize,
    pub height: usize,
    pub cell_size: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            width: 64,
            height: 64,
            cell_size: 1.0,
        }
    }
}

impl GridSpec {
    pub fn new(width: usize, height: usize, cell_size: f64) -> Result<Self> {
        let spec = GridSpec {
            width,
            height,
            cell_size,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width < 8 || self.height < 8 {
            return Err(Error::InvalidGrid(format!(
                "grid must be at least 8x8 cells, got {}x{}",
                self.width, self.height
            )));
        }
        if !(self.cell_size.is_finite() && self.cell_size > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "cell size must be positive, got {}",
                self.cell_size
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Workspace extent `(width * cell_size, height * cell_size)`.
    pub fn extent(&self) -> Vec2 {
        Vec2::new(
            self.width as f64 * self.cell_size,
            self.height as f64 * self.cell_size,
        )
    }

    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.width + col
    }

    pub fn col_row(&self, index: usize) -> (usize, usize) {
        (index % self.width, index / self.width)
    }

    pub fn cell_center(&self, index: usize) -> Vec2 {
        let (c, r) = self.col_row(index);
        Vec2::new(
            (c as f64 + 0.5) * self.cell_size,
            (r as f64 + 0.5) * self.cell_size,
        )
    }

    /// Cell containing `p`, with points on or past the far edge mapped to the last cell.
    pub fn cell_at(&self, p: Vec2) -> usize {
        let c = ((p.x / self.cell_size).floor().max(0.0) as usize).min(self.width - 1);
        let r = ((p.y / self.cell_size).floor().max(0.0) as usize).min(self.height - 1);
        self.index(c, r)
    }

    pub fn clamp(&self, p: Vec2) -> Vec2 {
        let e = self.extent();
        Vec2::new(p.x.clamp(0.0, e.x), p.y.clamp(0.0, e.y))
    }

    pub fn contains(&self, p: Vec2) -> bool {
        let e = self.extent();
        (0.0..=e.x).contains(&p.x) && (0.0..=e.y).contains(&p.y)
    }

    /// Range of cell indices (inclusive) along one axis whose centers could
    /// lie within `radius` of `coord`.
    fn axis_range(&self, coord: f64, radius: f64, n: usize) -> (usize, usize) {
        let lo = ((coord - radius) / self.cell_size - 0.5).floor().max(0.0) as usize;
        let hi = ((coord + radius) / self.cell_size - 0.5).ceil().max(0.0) as usize;
        (lo.min(n - 1), hi.min(n - 1))
    }

    /// Cells whose centers lie within Euclidean distance `radius` of `center`.
    pub fn cells_within(&self, center: Vec2, radius: f64) -> impl Iterator<Item = usize> + '_ {
        let (c0, c1) = self.axis_range(center.x, radius, self.width);
        let (r0, r1) = self.axis_range(center.y, radius, self.height);
        let r2 = radius * radius;
        (r0..=r1).flat_map(move |r| {
            (c0..=c1).filter_map(move |c| {
                let i = self.index(c, r);
                (self.cell_center(i).dist2(center) <= r2).then_some(i)
            })
        })
    }

    /// 4-connected neighbours of a cell.
    pub fn neighbors4(&self, index: usize) -> impl Iterator<Item = usize> {
        let (c, r) = self.col_row(index);
        let (w, h) = (self.width, self.height);
        let cand = [
            (c > 0).then(|| index - 1),
            (c + 1 < w).then(|| index + 1),
            (r > 0).then(|| index - w),
            (r + 1 < h).then(|| index + w),
        ];
        cand.into_iter().flatten()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist2(self, o: Vec2) -> f64 {
        let d = self - o;
        d.dot(d)
    }

    /// Unit vector along `self`, or `+x` for a zero vector.
    pub fn normalized_or_x(self) -> Vec2 {
        let n = self.norm();
        if n > 0.0 && n.is_finite() {
            Vec2::new(self.x / n, self.y / n)
        } else {
            Vec2::new(1.0, 0.0)
        }
    }

    /// Counter-clockwise perpendicular.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

/// Per-cell state. The same label set is used for ground truth and for
/// observed maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
#[repr(u8)]
pub enum CellState {
    #[default]
    Background = 0,
    Actionable = 1,
    Transformed = 2,
}

impl CellState {
    pub fn from_byte(b: u8) -> Option<CellState> {
        match b {
            0 => Some(CellState::Background),
            1 => Some(CellState::Actionable),
            2 => Some(CellState::Transformed),
            _ => None,
        }
    }

    pub fn is_object(self) -> bool {
        self != CellState::Background
    }

    /// Swaps Actionable and Transformed; Background is unchanged.
    pub fn inverted(self) -> CellState {
        match self {
            CellState::Actionable => CellState::Transformed,
            CellState::Transformed => CellState::Actionable,
            CellState::Background => CellState::Background,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LabelCounts {
    pub background: usize,
    pub actionable: usize,
    pub transformed: usize,
}

impl LabelCounts {
    pub fn object(&self) -> usize {
        self.actionable + self.transformed
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    spec: GridSpec,
    cells: Vec<CellState>,
}

impl Grid {
    pub fn new(spec: GridSpec) -> Self {
        Grid {
            spec,
            cells: vec![CellState::Background; spec.len()],
        }
    }

    pub fn from_cells(spec: GridSpec, cells: Vec<CellState>) -> Result<Self> {
        if cells.len() != spec.len() {
            return Err(Error::ShapeMismatch {
                expected: spec.len(),
                actual: cells.len(),
            });
        }
        Ok(Grid { spec, cells })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn width(&self) -> usize {
        self.spec.width
    }

    pub fn height(&self) -> usize {
        self.spec.height
    }

    pub fn cells(&self) -> &[CellState] {
        &self.cells
    }

    pub fn get(&self, index: usize) -> CellState {
        self.cells[index]
    }

    pub fn at(&self, col: usize, row: usize) -> CellState {
        self.cells[self.spec.index(col, row)]
    }

    pub fn set(&mut self, index: usize, state: CellState) {
        self.cells[index] = state;
    }

    pub fn counts(&self) -> LabelCounts {
        let mut c = LabelCounts::default();
        for s in &self.cells {
            match s {
                CellState::Background => c.background += 1,
                CellState::Actionable => c.actionable += 1,
                CellState::Transformed => c.transformed += 1,
            }
        }
        c
    }

    pub fn count(&self, state: CellState) -> usize {
        self.cells.iter().filter(|&&s| s == state).count()
    }

    pub fn indices_where(&self, pred: impl Fn(CellState) -> bool) -> Vec<usize> {
        (0..self.cells.len()).filter(|&i| pred(self.cells[i])).collect()
    }

    pub fn object_cells(&self) -> Vec<usize> {
        self.indices_where(CellState::is_object)
    }

    /// Serialises as the 16-byte header (magic, width, height, reserved; all
    /// little-endian u32) followed by one byte per cell in row-major order.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(GRID_HEADER_LEN + self.cells.len());
        out.extend_from_slice(GRID_MAGIC);
        out.extend_from_slice(&(self.spec.width as u32).to_le_bytes());
        out.extend_from_slice(&(self.spec.height as u32).to_le_bytes());
        out.extend_from_slice(&0u32.to_le_bytes());
        out.extend(self.cells.iter().map(|&s| s as u8));
        out
    }

    /// Inverse of [`Grid::to_bytes`]. The byte format does not carry the cell
    /// size, so it is supplied by the caller.
    pub fn from_bytes(bytes: &[u8], cell_size: f64) -> Result<Self> {
        let bad = |reason: String| Error::Format {
            kind: "grid",
            reason,
        };
        if bytes.len() < GRID_HEADER_LEN {
            return Err(bad(format!("{} bytes is shorter than the header", bytes.len())));
        }
        if &bytes[..4] != GRID_MAGIC {
            return Err(bad("bad magic".into()));
        }
        let word = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
        let (width, height) = (word(4), word(8));
        let spec = GridSpec {
            width,
            height,
            cell_size,
        };
        let body = &bytes[GRID_HEADER_LEN..];
        if body.len() != width * height {
            return Err(bad(format!(
                "expected {} cell bytes for {width}x{height}, found {}",
                width * height,
                body.len()
            )));
        }
        let cells = body
            .iter()
            .map(|&b| CellState::from_byte(b).ok_or_else(|| bad(format!("invalid cell byte {b}"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Grid { spec, cells })
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(&self.to_bytes())
    }

    pub fn read_from(mut r: impl Read, cell_size: f64) -> Result<Self> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf).map_err(|e| Error::Format {
            kind: "grid",
            reason: e.to_string(),
        })?;
        Grid::from_bytes(&buf, cell_size)
    }
}

/// Dense boolean mask over a grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize) -> Self {
        Mask {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn from_grid(grid: &Grid, pred: impl Fn(CellState) -> bool) -> Self {
        Mask {
            width: grid.width(),
            height: grid.height(),
            bits: grid.cells().iter().map(|&s| pred(s)).collect(),
        }
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn set(&mut self, i: usize, v: bool) {
        self.bits[i] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn iter_set(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter_map(|(i, &b)| b.then_some(i))
    }

    pub fn and(&self, other: &Mask) -> Mask {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn or(&self, other: &Mask) -> Mask {
        self.zip_with(other, |a, b| a || b)
    }

    pub fn and_not(&self, other: &Mask) -> Mask {
        self.zip_with(other, |a, b| a && !b)
    }

    fn zip_with(&self, other: &Mask, f: impl Fn(bool, bool) -> bool) -> Mask {
        assert_eq!(self.bits.len(), other.bits.len(), "mask size mismatch");
        Mask {
            width: self.width,
            height: self.height,
            bits: self
                .bits
                .iter()
                .zip(&other.bits)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// Offsets of the Euclidean disc structuring element of integer radius `r`.
    fn disc_offsets(r: usize) -> Vec<(isize, isize)> {
        let r = r as isize;
        let mut offs = Vec::new();
        for dy in -r..=r {
            for dx in -r..=r {
                if dx * dx + dy * dy <= r * r {
                    offs.push((dx, dy));
                }
            }
        }
        offs
    }

    fn shifted(&self, i: usize, (dx, dy): (isize, isize)) -> Option<usize> {
        let c = (i % self.width) as isize + dx;
        let r = (i / self.width) as isize + dy;
        (c >= 0 && r >= 0 && (c as usize) < self.width && (r as usize) < self.height)
            .then(|| r as usize * self.width + c as usize)
    }

    /// Morphological dilation by a disc of radius `r` cells.
    pub fn dilate(&self, r: usize) -> Mask {
        if r == 0 {
            return self.clone();
        }
        let offs = Self::disc_offsets(r);
        let mut out = Mask::new(self.width, self.height);
        for i in self.iter_set() {
            for &o in &offs {
                if let Some(j) = self.shifted(i, o) {
                    out.bits[j] = true;
                }
            }
        }
        out
    }

    /// Morphological erosion by a disc of radius `r` cells. Cells outside the
    /// grid count as unset.
    pub fn erode(&self, r: usize) -> Mask {
        if r == 0 {
            return self.clone();
        }
        let offs = Self::disc_offsets(r);
        let mut out = Mask::new(self.width, self.height);
        for i in self.iter_set() {
            out.bits[i] = offs
                .iter()
                .all(|&o| self.shifted(i, o).is_some_and(|j| self.bits[j]));
        }
        out
    }
}

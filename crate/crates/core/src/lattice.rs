//! The chemoattractant lattice and the one-particle-per-cell occupancy grid.
//!
//! Both grids are row-major `width × height`. Horizontally the lattice wraps
//! (column 0 neighbours column `width - 1`); vertically it is clamped.

use std::io::Write;

use crate::encoding::StimulusPolyline;
use crate::error::{Error, Result};

/// Integer lattice coordinate. `x` may lie outside `[0, width)` and is
/// wrapped by the grid that consumes it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub x: i64,
    pub y: i64,
}

impl Cell {
    pub const fn new(x: i64, y: i64) -> Self {
        Self { x, y }
    }
}

#[inline]
pub(crate) fn wrap_x(x: i64, width: usize) -> usize {
    x.rem_euclid(width as i64) as usize
}

#[inline]
pub(crate) fn clamp_y(y: i64, height: usize) -> usize {
    y.clamp(0, height as i64 - 1) as usize
}

/// Diffusive chemoattractant concentration field.
#[derive(Debug, Clone, PartialEq)]
pub struct TrailField {
    width: usize,
    height: usize,
    values: Vec<f64>,
    // Scratch buffers for the separable blur; not part of the field state.
    scratch: Vec<f64>,
}

impl TrailField {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Parameter(format!(
                "lattice dimensions must be positive, got {width}x{height}"
            )));
        }
        Ok(Self {
            width,
            height,
            values: vec![0.0; width * height],
            scratch: vec![0.0; width * height],
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    #[inline]
    fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    /// Value at an integer cell, after horizontal wrap and vertical clamp.
    pub fn get(&self, cell: Cell) -> f64 {
        let x = wrap_x(cell.x, self.width);
        let y = clamp_y(cell.y, self.height);
        self.values[self.index(x, y)]
    }

    /// Adds `amount` at `cell` (wrapped horizontally). The row must be in bounds.
    pub fn deposit(&mut self, cell: Cell, amount: f64) -> Result<()> {
        check_amount(amount)?;
        if cell.y < 0 || cell.y >= self.height as i64 {
            return Err(Error::Parameter(format!(
                "deposit row {} outside lattice of height {}",
                cell.y, self.height
            )));
        }
        let i = self.index(wrap_x(cell.x, self.width), cell.y as usize);
        self.values[i] += amount;
        Ok(())
    }

    /// Unchecked deposit for the agent hot loop; `amount` was validated with the params.
    #[inline]
    pub(crate) fn deposit_at(&mut self, x: usize, y: usize, amount: f64) {
        let i = self.index(x, y);
        self.values[i] += amount;
    }

    /// Concentration of the cell containing a continuous position.
    #[inline]
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let cx = wrap_x(x.floor() as i64, self.width);
        let cy = clamp_y(y.floor() as i64, self.height);
        self.values[self.index(cx, cy)]
    }

    /// Adds `amount` at every polyline pixel.
    pub fn project_stimulus(&mut self, polyline: &StimulusPolyline, amount: f64) -> Result<()> {
        check_amount(amount)?;
        for &px in polyline.pixels() {
            if px.x < 0 || px.x >= self.width as i64 || px.y < 0 || px.y >= self.height as i64 {
                return Err(Error::Encoding(format!(
                    "polyline pixel ({}, {}) outside {}x{} lattice",
                    px.x, px.y, self.width, self.height
                )));
            }
        }
        for &px in polyline.pixels() {
            let i = self.index(px.x as usize, px.y as usize);
            self.values[i] += amount;
        }
        Ok(())
    }

    /// Replaces every cell by the mean of its 3×3 neighbourhood (horizontal
    /// wrap, vertical edge replication), then scales by `1 - decay_rate`.
    pub fn diffuse_and_decay(&mut self, decay_rate: f64) -> Result<()> {
        if !(0.0..1.0).contains(&decay_rate) {
            return Err(Error::Parameter(format!(
                "decay rate must lie in [0, 1), got {decay_rate}"
            )));
        }
        self.diffuse_unchecked(decay_rate);
        Ok(())
    }

    pub(crate) fn diffuse_unchecked(&mut self, decay_rate: f64) {
        let (w, h) = (self.width, self.height);
        let scale = (1.0 - decay_rate) / 9.0;

        // Horizontal 3-sums into scratch.
        for y in 0..h {
            let row = &self.values[y * w..(y + 1) * w];
            let out = &mut self.scratch[y * w..(y + 1) * w];
            if w == 1 {
                out[0] = 3.0 * row[0];
                continue;
            }
            out[0] = row[w - 1] + row[0] + row[1 % w];
            for x in 1..w - 1 {
                out[x] = row[x - 1] + row[x] + row[x + 1];
            }
            if w > 1 {
                out[w - 1] = row[w - 2] + row[w - 1] + row[0];
            }
        }

        // Vertical 3-sums back into values.
        for y in 0..h {
            let up = y.saturating_sub(1);
            let down = (y + 1).min(h - 1);
            let (a, b, c) = (up * w, y * w, down * w);
            for x in 0..w {
                let s = self.scratch[a + x] + self.scratch[b + x] + self.scratch[c + x];
                self.values[b + x] = s * scale;
            }
        }
    }

    /// Writes the field as a binary PGM: `min(255, round(value * gain))` per cell.
    pub fn write_pgm<W: Write>(&self, out: &mut W, gain: f64) -> Result<()> {
        let bytes: Vec<u8> = self
            .values
            .iter()
            .map(|&v| (v * gain).round().clamp(0.0, 255.0) as u8)
            .collect();
        write_pgm(out, self.width, self.height, &bytes)
    }
}

fn check_amount(amount: f64) -> Result<()> {
    if !amount.is_finite() || amount < 0.0 {
        return Err(Error::Parameter(format!(
            "concentration amount must be finite and non-negative, got {amount}"
        )));
    }
    Ok(())
}

/// Writes a P5 greyscale image with maxval 255.
pub fn write_pgm<W: Write>(out: &mut W, width: usize, height: usize, bytes: &[u8]) -> Result<()> {
    debug_assert_eq!(bytes.len(), width * height);
    write!(out, "P5 {width} {height} 255\n")?;
    out.write_all(bytes)?;
    Ok(())
}

pub(crate) const EMPTY: u32 = u32::MAX;

/// One-particle-per-cell occupancy. Cells hold the index of the occupying
/// particle in the world's particle list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    cells: Vec<u32>,
}

impl OccupancyGrid {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            cells: vec![EMPTY; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Occupant of a cell; `None` for empty cells and rows outside the grid.
    pub fn get(&self, cell: Cell) -> Option<u32> {
        if cell.y < 0 || cell.y >= self.height as i64 {
            return None;
        }
        let v = self.cells[cell.y as usize * self.width + wrap_x(cell.x, self.width)];
        (v != EMPTY).then_some(v)
    }

    #[inline]
    pub(crate) fn raw(&self, x: usize, y: usize) -> u32 {
        self.cells[y * self.width + x]
    }

    #[inline]
    pub(crate) fn set_raw(&mut self, x: usize, y: usize, id: u32) {
        self.cells[y * self.width + x] = id;
    }

    pub fn is_free(&self, x: usize, y: usize) -> bool {
        self.raw(x, y) == EMPTY
    }

    pub fn occupied_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c != EMPTY).count()
    }

    /// Number of occupied cells in the `(2 * radius + 1)²` window centred on
    /// `(x, y)`, centre included. Rows outside the grid count as empty.
    pub fn count_window(&self, x: usize, y: usize, radius: usize) -> usize {
        let r = radius as i64;
        let y0 = (y as i64 - r).max(0) as usize;
        let y1 = (y as i64 + r).min(self.height as i64 - 1) as usize;
        let mut n = 0;
        for yy in y0..=y1 {
            let row = &self.cells[yy * self.width..(yy + 1) * self.width];
            if (2 * radius + 1) >= self.width {
                // Window covers the whole row, possibly several times over.
                for dx in -r..=r {
                    if row[wrap_x(x as i64 + dx, self.width)] != EMPTY {
                        n += 1;
                    }
                }
            } else if x >= radius && x + radius < self.width {
                n += row[x - radius..=x + radius].iter().filter(|&&c| c != EMPTY).count();
            } else {
                for dx in -r..=r {
                    if row[wrap_x(x as i64 + dx, self.width)] != EMPTY {
                        n += 1;
                    }
                }
            }
        }
        n
    }
}

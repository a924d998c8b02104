//! Binary masks on the token grid.

use serde::{Deserialize, Serialize};

use crate::error::{DragError, Result};
use crate::types::Cell;

/// Row-major bit grid.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    cells: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(DragError::InvalidConfig(format!(
                "mask dimensions must be positive, got {width}x{height}"
            )));
        }
        Ok(Self { width, height, cells: vec![false; width * height] })
    }

    pub fn filled(width: usize, height: usize) -> Result<Self> {
        let mut m = Self::new(width, height)?;
        m.cells.fill(true);
        Ok(m)
    }

    pub fn from_bits(width: usize, height: usize, cells: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 || cells.len() != width * height {
            return Err(DragError::shape(format!(
                "{} bits for a {width}x{height} mask",
                cells.len()
            )));
        }
        Ok(Self { width, height, cells })
    }

    /// Builds a mask with the listed cells set. Cells outside the grid are an error.
    pub fn from_cells<I>(width: usize, height: usize, cells: I) -> Result<Self>
    where
        I: IntoIterator<Item = Cell>,
    {
        let mut m = Self::new(width, height)?;
        for c in cells {
            if !m.contains(c) {
                return Err(DragError::shape(format!(
                    "cell ({}, {}) outside {width}x{height} grid",
                    c.x, c.y
                )));
            }
            m.set(c, true);
        }
        Ok(m)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        !self.cells.iter().any(|&b| b)
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&b| b).count()
    }

    pub fn bits(&self) -> &[bool] {
        &self.cells
    }

    pub fn contains(&self, c: Cell) -> bool {
        c.x < self.width && c.y < self.height
    }

    pub fn index(&self, c: Cell) -> usize {
        c.y * self.width + c.x
    }

    pub fn cell_at(&self, index: usize) -> Cell {
        Cell::new(index % self.width, index / self.width)
    }

    /// Out-of-grid cells read as unset.
    pub fn get(&self, c: Cell) -> bool {
        self.contains(c) && self.cells[self.index(c)]
    }

    pub fn set(&mut self, c: Cell, value: bool) {
        let i = self.index(c);
        self.cells[i] = value;
    }

    /// Set cells in row-major order.
    pub fn iter_set(&self) -> impl Iterator<Item = Cell> + '_ {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| self.cell_at(i))
    }

    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.dims() == other.dims()
            && self.cells.iter().zip(&other.cells).all(|(&a, &b)| !a || b)
    }

    /// Morphological dilation with a `(2r+1)x(2r+1)` square structuring
    /// element, clipped to the grid.
    pub fn dilate(&self, radius: usize) -> BinaryMask {
        if radius == 0 {
            return self.clone();
        }
        let (w, h) = self.dims();
        // Separable: rows first, then columns.
        let mut rows = vec![false; w * h];
        for y in 0..h {
            for x in 0..w {
                if self.cells[y * w + x] {
                    let lo = x.saturating_sub(radius);
                    let hi = (x + radius).min(w - 1);
                    rows[y * w + lo..=y * w + hi].fill(true);
                }
            }
        }
        let mut out = vec![false; w * h];
        for y in 0..h {
            for x in 0..w {
                if rows[y * w + x] {
                    let lo = y.saturating_sub(radius);
                    let hi = (y + radius).min(h - 1);
                    for yy in lo..=hi {
                        out[yy * w + x] = true;
                    }
                }
            }
        }
        BinaryMask { width: w, height: h, cells: out }
    }

    /// 4-connected components, each as a list of cells. Components are
    /// ordered by their first cell in row-major order.
    pub fn components(&self) -> Vec<Vec<Cell>> {
        let (w, h) = self.dims();
        let mut seen = vec![false; w * h];
        let mut out = Vec::new();
        let mut stack = Vec::new();
        for start in 0..w * h {
            if !self.cells[start] || seen[start] {
                continue;
            }
            let mut comp = Vec::new();
            seen[start] = true;
            stack.push(start);
            while let Some(i) = stack.pop() {
                let (x, y) = (i % w, i / w);
                comp.push(Cell::new(x, y));
                let mut visit = |j: usize| {
                    if self.cells[j] && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                };
                if x > 0 {
                    visit(i - 1);
                }
                if x + 1 < w {
                    visit(i + 1);
                }
                if y > 0 {
                    visit(i - w);
                }
                if y + 1 < h {
                    visit(i + w);
                }
            }
            comp.sort_by_key(|c| (c.y, c.x));
            out.push(comp);
        }
        out
    }

    /// Run-length encoding in row-major order. Runs alternate unset/set and
    /// always start with an unset run, which may be zero-length.
    pub fn to_rle(&self) -> Vec<usize> {
        let mut runs = Vec::new();
        let mut current = false;
        let mut len = 0usize;
        for &b in &self.cells {
            if b == current {
                len += 1;
            } else {
                runs.push(len);
                current = b;
                len = 1;
            }
        }
        runs.push(len);
        runs
    }

    pub fn from_rle(width: usize, height: usize, runs: &[usize]) -> Result<Self> {
        let mut cells = Vec::with_capacity(width * height);
        let mut value = false;
        for &r in runs {
            cells.extend(std::iter::repeat_n(value, r));
            value = !value;
        }
        Self::from_bits(width, height, cells)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask(w: usize, h: usize, cells: &[(usize, usize)]) -> BinaryMask {
        BinaryMask::from_cells(w, h, cells.iter().map(|&(x, y)| Cell::new(x, y))).unwrap()
    }

    #[test]
    fn dilation_of_single_cell_is_square() {
        let m = mask(5, 5, &[(2, 2)]).dilate(1);
        let expected: Vec<Cell> = (1..=3)
            .flat_map(|y| (1..=3).map(move |x| Cell::new(x, y)))
            .collect();
        assert_eq!(m.iter_set().collect::<Vec<_>>(), expected);
    }

    #[test]
    fn dilation_clips_at_border() {
        let m = mask(3, 3, &[(0, 0)]).dilate(2);
        assert_eq!(m.count(), 9);
        let m = mask(4, 4, &[(0, 0)]).dilate(1);
        assert_eq!(m.count(), 4);
    }

    #[test]
    fn zero_radius_dilation_is_identity() {
        let m = mask(4, 3, &[(1, 1), (3, 2)]);
        assert_eq!(m.dilate(0), m);
    }

    #[test]
    fn dilation_matches_brute_force() {
        let m = mask(7, 6, &[(0, 0), (3, 2), (6, 5), (5, 1)]);
        for r in 0..4 {
            let d = m.dilate(r);
            for y in 0..6i64 {
                for x in 0..7i64 {
                    let want = m.iter_set().any(|c| {
                        (c.x as i64 - x).abs() <= r as i64 && (c.y as i64 - y).abs() <= r as i64
                    });
                    assert_eq!(d.get(Cell::new(x as usize, y as usize)), want, "r={r} ({x},{y})");
                }
            }
        }
    }

    #[test]
    fn components_use_four_connectivity() {
        // Diagonal neighbours are separate components.
        let m = mask(4, 4, &[(0, 0), (1, 1), (1, 2), (3, 3)]);
        let comps = m.components();
        assert_eq!(comps.len(), 3);
        assert_eq!(comps[0], vec![Cell::new(0, 0)]);
        assert_eq!(comps[1], vec![Cell::new(1, 1), Cell::new(1, 2)]);
    }

    #[test]
    fn rle_round_trip() {
        let m = mask(5, 2, &[(0, 0), (1, 0), (4, 1)]);
        let rle = m.to_rle();
        assert_eq!(rle, vec![0, 2, 7, 1]);
        assert_eq!(BinaryMask::from_rle(5, 2, &rle).unwrap(), m);
        let empty = BinaryMask::new(3, 1).unwrap();
        assert_eq!(empty.to_rle(), vec![3]);
    }

    #[test]
    fn rejects_degenerate_dims() {
        assert!(BinaryMask::new(0, 3).is_err());
        assert!(BinaryMask::from_bits(2, 2, vec![true; 3]).is_err());
        assert!(BinaryMask::from_cells(2, 2, [Cell::new(2, 0)]).is_err());
    }
}

//! Spatial layout of a visual field: the informative-location mask, the
//! padded 12x12 grid and the affine normalization into [0, 1].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Side of the square grid fields are padded into.
pub const GRID_SIDE: usize = 12;
/// Number of informative locations of a field.
pub const N_LOCATIONS: usize = 52;
/// Padding value in decibels of total deviation (the minimum TD value).
pub const PAD_VALUE_DB: f64 = -37.0;

const DEFAULT_MASK: &str = include_str!("../data/mask_24_2.txt");

/// Boolean grid of informative cells, row-major.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Mask {
    rows: usize,
    cols: usize,
    cells: Vec<bool>,
}

impl Mask {
    pub fn new(rows: usize, cols: usize, cells: Vec<bool>) -> Result<Self> {
        if rows == 0 || cols == 0 || cells.len() != rows * cols {
            return Err(Error::shape("Mask::new", format!("{rows}x{cols} cells"), cells.len()));
        }
        Ok(Self { rows, cols, cells })
    }

    /// A mask where every cell is informative.
    pub fn full(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            cells: vec![true; rows * cols],
        }
    }

    /// The bundled 24-2 layout (52 informative cells in a 12x12 grid).
    pub fn visual_field_24_2() -> Self {
        Self::parse(DEFAULT_MASK).expect("bundled mask is valid")
    }

    /// Parses rows of `#` (informative) and `.` (padded); `#`-prefixed
    /// lines containing a space are comments.
    pub fn parse(text: &str) -> Result<Self> {
        let rows: Vec<&str> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !(l.starts_with('#') && l.contains(' ')))
            .collect();
        Self::from_rows(&rows)
    }

    pub fn from_rows<S: AsRef<str>>(rows: &[S]) -> Result<Self> {
        let cols = rows.first().map(|r| r.as_ref().chars().count()).unwrap_or(0);
        let mut cells = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.chars().count() != cols {
                return Err(Error::format(None, format!("mask row {i} has a different width")));
            }
            for ch in row.chars() {
                cells.push(match ch {
                    '#' => true,
                    '.' => false,
                    other => {
                        return Err(Error::format(None, format!("unexpected mask character {other:?}")))
                    }
                });
            }
        }
        Self::new(rows.len(), cols, cells)
    }

    pub fn to_rows(&self) -> Vec<String> {
        self.cells
            .chunks(self.cols)
            .map(|r| r.iter().map(|&c| if c { '#' } else { '.' }).collect())
            .collect()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    /// Grid indices of informative cells in canonical (row-major) order.
    pub fn locations(&self) -> Vec<usize> {
        self.cells
            .iter()
            .enumerate()
            .filter_map(|(i, &c)| c.then_some(i))
            .collect()
    }

    /// (row, col) of each informative cell in canonical order.
    pub fn coordinates(&self) -> Vec<(usize, usize)> {
        self.locations()
            .into_iter()
            .map(|i| (i / self.cols, i % self.cols))
            .collect()
    }

    /// Connected components of informative cells under queen adjacency,
    /// each listed by canonical location index.
    pub fn queen_components(&self) -> Vec<Vec<usize>> {
        let coords = self.coordinates();
        let mut index = vec![usize::MAX; self.cells.len()];
        for (k, &(r, c)) in coords.iter().enumerate() {
            index[r * self.cols + c] = k;
        }
        let mut seen = vec![false; coords.len()];
        let mut components = Vec::new();
        for start in 0..coords.len() {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut stack = vec![start];
            let mut comp = Vec::new();
            while let Some(k) = stack.pop() {
                comp.push(k);
                let (r, c) = coords[k];
                for (nr, nc) in queen_neighbours(r, c, self.rows, self.cols) {
                    let j = index[nr * self.cols + nc];
                    if j != usize::MAX && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
            comp.sort_unstable();
            components.push(comp);
        }
        components
    }

    /// Checks the invariants required of a field mask: 12x12 with exactly 52
    /// informative cells forming one queen-connected region.
    pub fn validate_field_mask(&self) -> Result<()> {
        if self.rows != GRID_SIDE || self.cols != GRID_SIDE {
            return Err(Error::invalid(format!(
                "field mask must be {GRID_SIDE}x{GRID_SIDE}, got {}x{}",
                self.rows, self.cols
            )));
        }
        if self.count() != N_LOCATIONS {
            return Err(Error::invalid(format!(
                "field mask must have {N_LOCATIONS} informative cells, got {}",
                self.count()
            )));
        }
        let comps = self.queen_components();
        if comps.len() != 1 {
            return Err(Error::invalid(format!(
                "field mask is not connected ({} components)",
                comps.len()
            )));
        }
        Ok(())
    }
}

pub(crate) fn queen_neighbours(
    r: usize,
    c: usize,
    rows: usize,
    cols: usize,
) -> impl Iterator<Item = (usize, usize)> {
    (-1i64..=1)
        .flat_map(|dr| (-1i64..=1).map(move |dc| (dr, dc)))
        .filter(|&d| d != (0, 0))
        .filter_map(move |(dr, dc)| {
            let nr = r as i64 + dr;
            let nc = c as i64 + dc;
            (nr >= 0 && nc >= 0 && (nr as usize) < rows && (nc as usize) < cols)
                .then_some((nr as usize, nc as usize))
        })
}

/// Physical range mapped onto [0, 1].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

impl Bounds {
    pub fn new(upper: f64) -> Result<Self> {
        let b = Self {
            lower: PAD_VALUE_DB,
            upper,
        };
        b.validate()?;
        Ok(b)
    }

    /// Lower bound at the padding constant, upper at the largest value seen.
    pub fn from_values<'a, I: IntoIterator<Item = &'a f64>>(values: I) -> Result<Self> {
        let max = values
            .into_iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        Self::new(max)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lower.is_finite() && self.upper.is_finite() && self.upper > self.lower) {
            return Err(Error::invalid(format!(
                "bounds must satisfy lower < upper, got [{}, {}]",
                self.lower, self.upper
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn normalize(&self, v: f64) -> f64 {
        (v - self.lower) / (self.upper - self.lower)
    }

    #[inline]
    pub fn denormalize(&self, u: f64) -> f64 {
        self.lower + u * (self.upper - self.lower)
    }
}

/// One padded, normalized spatial observation.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Vec<f64>,
    mask: Mask,
}

impl Field {
    /// Wraps an already-normalized grid. Padded cells must hold 0.
    pub fn new(grid: Vec<f64>, mask: Mask) -> Result<Self> {
        mask.validate_field_mask()?;
        if grid.len() != GRID_SIDE * GRID_SIDE {
            return Err(Error::shape("Field::new", GRID_SIDE * GRID_SIDE, grid.len()));
        }
        if let Some(i) = grid.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("field cell {i}")));
        }
        Ok(Self { grid, mask })
    }

    /// A field whose grid is taken verbatim, including padded cells.
    pub(crate) fn from_parts_unchecked(grid: Vec<f64>, mask: Mask) -> Self {
        Self { grid, mask }
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn grid_mut(&mut self) -> &mut [f64] {
        &mut self.grid
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    pub fn into_grid(self) -> Vec<f64> {
        self.grid
    }

    /// Normalized values at the informative cells in canonical order.
    pub fn informative(&self) -> Vec<f64> {
        self.mask.locations().into_iter().map(|i| self.grid[i]).collect()
    }
}

fn check_values(values: &[f64], mask: &Mask) -> Result<()> {
    mask.validate_field_mask()?;
    if values.len() != N_LOCATIONS {
        return Err(Error::shape("pad_and_normalize", N_LOCATIONS, values.len()));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("location {i}")));
    }
    Ok(())
}

/// Pads 52 decibel values into the grid and maps them affinely into [0, 1].
/// Padded cells become 0, the image of the padding constant.
pub fn pad_and_normalize(values: &[f64], mask: &Mask, bounds: &Bounds) -> Result<Field> {
    check_values(values, mask)?;
    bounds.validate()?;
    if let Some((i, v)) = values.iter().enumerate().find(|(_, &v)| v > bounds.upper) {
        return Err(Error::invalid(format!(
            "location {i} value {v} exceeds upper bound {}",
            bounds.upper
        )));
    }
    if let Some((i, v)) = values.iter().enumerate().find(|(_, &v)| v < bounds.lower) {
        return Err(Error::invalid(format!(
            "location {i} value {v} is below lower bound {}",
            bounds.lower
        )));
    }
    Ok(pad(values, mask, bounds))
}

/// Like [`pad_and_normalize`] but clamps out-of-range values into the
/// bounds. Used when a model meets data beyond its training range.
pub fn pad_and_normalize_clamped(values: &[f64], mask: &Mask, bounds: &Bounds) -> Result<Field> {
    check_values(values, mask)?;
    bounds.validate()?;
    let clamped: Vec<f64> = values
        .iter()
        .map(|v| v.clamp(bounds.lower, bounds.upper))
        .collect();
    Ok(pad(&clamped, mask, bounds))
}

fn pad(values: &[f64], mask: &Mask, bounds: &Bounds) -> Field {
    let mut grid = vec![0.0; GRID_SIDE * GRID_SIDE];
    for (loc, &v) in mask.locations().into_iter().zip(values) {
        grid[loc] = bounds.normalize(v);
    }
    Field::from_parts_unchecked(grid, mask.clone())
}

/// Inverse of [`pad_and_normalize`] on the informative cells.
pub fn denormalize(field: &Field, bounds: &Bounds) -> Vec<f64> {
    field
        .mask
        .locations()
        .into_iter()
        .map(|i| bounds.denormalize(field.grid[i]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bundled_mask_is_a_valid_field_mask() {
        let m = Mask::visual_field_24_2();
        assert_eq!(m.count(), N_LOCATIONS);
        m.validate_field_mask().unwrap();
        assert_eq!(m.to_rows().len(), GRID_SIDE);
        assert_eq!(Mask::from_rows(&m.to_rows()).unwrap(), m);
    }

    #[test]
    fn disconnected_mask_reports_components() {
        let m = Mask::from_rows(&["#..", "...", "..#"]).unwrap();
        assert_eq!(m.queen_components(), vec![vec![0], vec![1]]);
        let m = Mask::from_rows(&["#..", ".#.", "..#"]).unwrap();
        assert_eq!(m.queen_components().len(), 1);
    }

    #[test]
    fn wrong_count_rejected() {
        let mut rows = Mask::visual_field_24_2().to_rows();
        rows[0] = "#...........".to_string();
        let m = Mask::from_rows(&rows).unwrap();
        assert!(m.validate_field_mask().is_err());
    }

    #[test]
    fn normalization_endpoints() {
        let mask = Mask::visual_field_24_2();
        let b = Bounds::new(3.0).unwrap();
        let mut v = vec![0.0; N_LOCATIONS];
        v[0] = PAD_VALUE_DB;
        v[1] = 3.0;
        let f = pad_and_normalize(&v, &mask, &b).unwrap();
        let inf = f.informative();
        assert_eq!(inf[0], 0.0);
        assert_eq!(inf[1], 1.0);
        let locs = mask.locations();
        for (i, &g) in f.grid().iter().enumerate() {
            if !locs.contains(&i) {
                assert_eq!(g, 0.0);
            }
        }
    }

    #[test]
    fn above_upper_bound_rejected_with_location() {
        let mask = Mask::visual_field_24_2();
        let b = Bounds::new(3.0).unwrap();
        let mut v = vec![0.0; N_LOCATIONS];
        v[17] = 3.5;
        let err = pad_and_normalize(&v, &mask, &b).unwrap_err();
        assert!(err.to_string().contains("location 17"));
        let f = pad_and_normalize_clamped(&v, &mask, &b).unwrap();
        assert_eq!(f.informative()[17], 1.0);
    }

    proptest! {
        #[test]
        fn round_trip_is_exact_to_1e12(vals in prop::collection::vec(-37.0f64..10.0, N_LOCATIONS), up in 10.0f64..40.0) {
            let mask = Mask::visual_field_24_2();
            let b = Bounds::new(up).unwrap();
            let f = pad_and_normalize(&vals, &mask, &b).unwrap();
            let back = denormalize(&f, &b);
            for (a, c) in vals.iter().zip(&back) {
                prop_assert!((a - c).abs() < 1e-12);
            }
            prop_assert!(f.grid().iter().all(|&g| (0.0..=1.0).contains(&g)));
        }
    }
}

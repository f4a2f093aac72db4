//! Observations `(X_k, Z_k)`: a covariate value plus the 2×2 cell it falls in.

use serde::{Deserialize, Serialize};

use crate::baselines::Table2x2;
use crate::error::{Error, Result};

/// One of the four cells of a 2×2 table, in the fixed order 11, 12, 21, 22.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Cell {
    C11,
    C12,
    C21,
    C22,
}

impl Cell {
    pub const ALL: [Cell; 4] = [Cell::C11, Cell::C12, Cell::C21, Cell::C22];

    /// Build from 1-based row and column levels.
    pub fn new(row: u8, col: u8) -> Result<Self> {
        match (row, col) {
            (1, 1) => Ok(Cell::C11),
            (1, 2) => Ok(Cell::C12),
            (2, 1) => Ok(Cell::C21),
            (2, 2) => Ok(Cell::C22),
            _ => Err(Error::InvalidInput(format!("cell ({row}, {col}) outside the 2x2 table"))),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Self {
        Cell::ALL[i]
    }

    pub fn row(self) -> u8 {
        match self {
            Cell::C11 | Cell::C12 => 1,
            Cell::C21 | Cell::C22 => 2,
        }
    }

    pub fn col(self) -> u8 {
        match self {
            Cell::C11 | Cell::C21 => 1,
            Cell::C12 | Cell::C22 => 2,
        }
    }

    /// (−1)^(i+j): +1 on the diagonal, −1 off it.
    pub fn sign(self) -> f64 {
        match self {
            Cell::C11 | Cell::C22 => 1.0,
            Cell::C12 | Cell::C21 => -1.0,
        }
    }

    /// Relabel rows 1 ↔ 2.
    pub fn row_swapped(self) -> Self {
        match self {
            Cell::C11 => Cell::C21,
            Cell::C12 => Cell::C22,
            Cell::C21 => Cell::C11,
            Cell::C22 => Cell::C12,
        }
    }

    /// Relabel i ↔ j.
    pub fn transposed(self) -> Self {
        match self {
            Cell::C12 => Cell::C21,
            Cell::C21 => Cell::C12,
            c => c,
        }
    }
}

/// Order in which cells are laid out on [0, 1) for inverse-CDF multinomial
/// draws. The standard order is 11, 12, 21, 22; the row-swapped order lets a
/// row-relabelled sample consume the same uniforms as the original.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellOrder(pub [Cell; 4]);

impl CellOrder {
    pub const STANDARD: CellOrder = CellOrder([Cell::C11, Cell::C12, Cell::C21, Cell::C22]);
    pub const ROW_SWAPPED: CellOrder = CellOrder([Cell::C21, Cell::C22, Cell::C11, Cell::C12]);

    /// Draw one cell from `probs` (indexed by [`Cell::index`]) using the uniform `u`.
    #[inline]
    pub fn draw(&self, probs: &[f64; 4], u: f64) -> Cell {
        let mut acc = 0.0;
        for &c in &self.0[..3] {
            acc += probs[c.index()];
            if u < acc {
                return c;
            }
        }
        self.0[3]
    }
}

impl Default for CellOrder {
    fn default() -> Self {
        CellOrder::STANDARD
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub x: f64,
    pub cell: Cell,
}

impl Observation {
    pub fn new(x: f64, cell: Cell) -> Self {
        Self { x, cell }
    }
}

/// A dataset `{(X_k, Z_k)}` with the covariate support it was drawn on.
///
/// Covariates and cells are stored column-wise since every estimator sweeps
/// over the covariate vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    xs: Vec<f64>,
    cells: Vec<Cell>,
    support_lo: f64,
    support_hi: f64,
}

impl Sample {
    /// Sample whose support is the observed covariate range.
    pub fn new(observations: &[Observation]) -> Result<Self> {
        let xs: Vec<f64> = observations.iter().map(|o| o.x).collect();
        let cells = observations.iter().map(|o| o.cell).collect();
        let (lo, hi) = min_max(&xs);
        Self::from_parts(xs, cells, lo, hi)
    }

    pub fn with_support(observations: &[Observation], support_lo: f64, support_hi: f64) -> Result<Self> {
        let xs = observations.iter().map(|o| o.x).collect();
        let cells = observations.iter().map(|o| o.cell).collect();
        Self::from_parts(xs, cells, support_lo, support_hi)
    }

    pub fn from_parts(xs: Vec<f64>, cells: Vec<Cell>, support_lo: f64, support_hi: f64) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::InvalidInput("sample must contain at least one observation".into()));
        }
        if xs.len() != cells.len() {
            return Err(Error::InvalidInput("covariate and cell vectors differ in length".into()));
        }
        if let Some(bad) = xs.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite covariate value {bad}")));
        }
        let (lo, hi) = min_max(&xs);
        if !(support_lo <= lo && hi <= support_hi) {
            return Err(Error::InvalidInput(format!(
                "support [{support_lo}, {support_hi}] does not cover observed range [{lo}, {hi}]"
            )));
        }
        Ok(Self { xs, cells, support_lo, support_hi })
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn support(&self) -> (f64, f64) {
        (self.support_lo, self.support_hi)
    }

    pub fn observations(&self) -> impl Iterator<Item = Observation> + '_ {
        self.xs.iter().zip(&self.cells).map(|(&x, &cell)| Observation { x, cell })
    }

    /// Z^{ij}_k as 0/1 values for one cell.
    pub fn indicators(&self, cell: Cell) -> Vec<f64> {
        self.cells.iter().map(|&c| if c == cell { 1.0 } else { 0.0 }).collect()
    }

    /// Observed covariate range, max − min.
    pub fn range(&self) -> f64 {
        let (lo, hi) = min_max(&self.xs);
        hi - lo
    }

    /// Whether `x` lies in `[lo + margin, hi − margin]` of the support.
    pub fn is_interior(&self, x: f64, margin: f64) -> bool {
        x >= self.support_lo + margin && x <= self.support_hi - margin
    }

    /// Marginal 2×2 table of counts.
    pub fn table(&self) -> Table2x2 {
        let mut n = [0u64; 4];
        for c in &self.cells {
            n[c.index()] += 1;
        }
        Table2x2::new(n[0], n[1], n[2], n[3])
    }

    /// Same covariates with every cell passed through `f`.
    pub fn map_cells(&self, f: impl Fn(Cell) -> Cell) -> Self {
        Self {
            xs: self.xs.clone(),
            cells: self.cells.iter().map(|&c| f(c)).collect(),
            support_lo: self.support_lo,
            support_hi: self.support_hi,
        }
    }

    pub fn row_swapped(&self) -> Self {
        self.map_cells(Cell::row_swapped)
    }

    /// Same covariates and support with new cells.
    pub fn with_cells(&self, cells: Vec<Cell>) -> Result<Self> {
        if cells.len() != self.xs.len() {
            return Err(Error::InvalidInput("cell vector length does not match sample".into()));
        }
        Ok(Self { xs: self.xs.clone(), cells, support_lo: self.support_lo, support_hi: self.support_hi })
    }
}

pub(crate) fn min_max(xs: &[f64]) -> (f64, f64) {
    xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_round_trip() {
        for c in Cell::ALL {
            assert_eq!(Cell::new(c.row(), c.col()).unwrap(), c);
            assert_eq!(Cell::from_index(c.index()), c);
            assert_eq!(c.row_swapped().row_swapped(), c);
        }
        assert!(Cell::new(3, 1).is_err());
    }

    #[test]
    fn signs_alternate() {
        let s: Vec<f64> = Cell::ALL.iter().map(|c| c.sign()).collect();
        assert_eq!(s, vec![1.0, -1.0, -1.0, 1.0]);
    }

    #[test]
    fn support_must_cover_data() {
        let obs = [Observation::new(0.5, Cell::C11), Observation::new(1.5, Cell::C22)];
        assert!(Sample::with_support(&obs, 0.0, 1.0).is_err());
        let s = Sample::with_support(&obs, 0.0, 2.0).unwrap();
        assert_eq!(s.support(), (0.0, 2.0));
        assert_eq!(Sample::new(&obs).unwrap().support(), (0.5, 1.5));
    }

    #[test]
    fn inverse_cdf_draws() {
        let p = [0.4, 0.3, 0.2, 0.1];
        let o = CellOrder::STANDARD;
        assert_eq!(o.draw(&p, 0.0), Cell::C11);
        assert_eq!(o.draw(&p, 0.39), Cell::C11);
        assert_eq!(o.draw(&p, 0.41), Cell::C12);
        assert_eq!(o.draw(&p, 0.75), Cell::C21);
        assert_eq!(o.draw(&p, 0.95), Cell::C22);
        assert_eq!(o.draw(&[1.0, 0.0, 0.0, 0.0], 0.999), Cell::C11);
        // Swapped labels and swapped order consume uniforms identically.
        let swapped = [p[2], p[3], p[0], p[1]];
        for u in [0.05, 0.35, 0.45, 0.65, 0.8, 0.97] {
            assert_eq!(CellOrder::ROW_SWAPPED.draw(&swapped, u), o.draw(&p, u).row_swapped());
        }
    }

    #[test]
    fn empty_sample_rejected() {
        assert!(Sample::new(&[]).is_err());
    }

    #[test]
    fn table_counts() {
        let obs: Vec<Observation> = [Cell::C11, Cell::C11, Cell::C21, Cell::C22]
            .iter()
            .enumerate()
            .map(|(i, &c)| Observation::new(i as f64, c))
            .collect();
        let t = Sample::new(&obs).unwrap().table();
        assert_eq!((t.n11, t.n12, t.n21, t.n22), (2, 0, 1, 1));
    }
}

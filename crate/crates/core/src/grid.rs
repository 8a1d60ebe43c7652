//! Uniform discretization of the unit interval and sampled functions on it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of intervals (1001 nodes).
pub const DEFAULT_INTERVALS: usize = 1000;

/// Uniform grid `x_i = i / n` on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    n_intervals: usize,
}

impl Grid {
    /// The interval count must be even (composite Simpson) and at least 4
    /// (four-point interpolation stencils).
    pub fn new(n_intervals: usize) -> Result<Self> {
        if n_intervals < 4 || n_intervals % 2 != 0 {
            return Err(Error::domain(
                "grid_n",
                format!("interval count must be even and >= 4, got {n_intervals}"),
            ));
        }
        Ok(Grid { n_intervals })
    }

    pub fn n_intervals(&self) -> usize {
        self.n_intervals
    }

    pub fn len(&self) -> usize {
        self.n_intervals + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n_intervals as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 / self.n_intervals as f64
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.len()).map(move |i| self.x(i))
    }

    pub(crate) fn check_same(&self, other: &Grid) -> Result<()> {
        if self.n_intervals != other.n_intervals {
            return Err(Error::GridMismatch(self.n_intervals, other.n_intervals));
        }
        Ok(())
    }
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            n_intervals: DEFAULT_INTERVALS,
        }
    }
}

/// A scalar function sampled at every node, optionally with derivative samples.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFn {
    grid: Grid,
    values: Vec<f64>,
    derivs: Option<Vec<f64>>,
}

impl GridFn {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Precondition(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(GridFn {
            grid,
            values,
            derivs: None,
        })
    }

    pub fn with_derivs(grid: Grid, values: Vec<f64>, derivs: Vec<f64>) -> Result<Self> {
        if derivs.len() != grid.len() {
            return Err(Error::Precondition(format!(
                "expected {} derivative samples, got {}",
                grid.len(),
                derivs.len()
            )));
        }
        let mut f = GridFn::new(grid, values)?;
        f.derivs = Some(derivs);
        Ok(f)
    }

    pub fn zeros(grid: Grid) -> Self {
        GridFn {
            grid,
            values: vec![0.0; grid.len()],
            derivs: None,
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        GridFn {
            grid,
            values: grid.nodes().map(f).collect(),
            derivs: None,
        }
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        GridFn {
            grid,
            values: vec![value; grid.len()],
            derivs: None,
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn derivs(&self) -> Option<&[f64]> {
        self.derivs.as_deref()
    }

    pub fn first(&self) -> f64 {
        self.values[0]
    }

    pub fn last(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.values)
    }

    pub fn scaled(&self, factor: f64) -> GridFn {
        GridFn {
            grid: self.grid,
            values: self.values.iter().map(|v| v * factor).collect(),
            derivs: self
                .derivs
                .as_ref()
                .map(|d| d.iter().map(|v| v * factor).collect()),
        }
    }

    pub fn into_parts(self) -> (Grid, Vec<f64>, Option<Vec<f64>>) {
        (self.grid, self.values, self.derivs)
    }
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Composite Simpson rule over an even number of uniform intervals.
pub fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len() - 1;
    debug_assert!(n % 2 == 0, "Simpson needs an even interval count");
    let mut odd = 0.0;
    let mut even = 0.0;
    for (i, v) in values.iter().enumerate().take(n).skip(1) {
        if i % 2 == 1 {
            odd += v;
        } else {
            even += v;
        }
    }
    h / 3.0 * (values[0] + 4.0 * odd + 2.0 * even + values[n])
}

/// Cubic-interpolated midpoint of interval `[i, i+1]` from the four nearest
/// samples supplied by `g` (one-sided at the ends). `last` is the final node index.
pub(crate) fn cubic_midpoint(i: usize, last: usize, g: impl Fn(usize) -> f64) -> f64 {
    if i == 0 {
        (5.0 * g(0) + 15.0 * g(1) - 5.0 * g(2) + g(3)) / 16.0
    } else if i + 1 == last {
        (g(last - 3) - 5.0 * g(last - 2) + 15.0 * g(last - 1) + 5.0 * g(last)) / 16.0
    } else {
        (-g(i - 1) + 9.0 * g(i) + 9.0 * g(i + 1) - g(i + 2)) / 16.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_odd_or_tiny_grids() {
        assert!(Grid::new(999).is_err());
        assert!(Grid::new(2).is_err());
        assert!(Grid::new(0).is_err());
        let g = Grid::new(1000).unwrap();
        assert_eq!(g.len(), 1001);
        assert_eq!(g.x(0), 0.0);
        assert_eq!(g.x(1000), 1.0);
    }

    #[test]
    fn simpson_is_exact_for_cubics() {
        let g = Grid::new(10).unwrap();
        let f = GridFn::from_fn(g, |x| 4.0 * x * x * x - x + 2.0);
        let exact = 1.0 - 0.5 + 2.0;
        assert!((simpson(f.values(), g.h()) - exact).abs() < 1e-14);
    }

    #[test]
    fn cubic_midpoint_reproduces_cubics() {
        let g = Grid::new(8).unwrap();
        let p = |x: f64| x * x * x - 2.0 * x * x + 0.5;
        let f = GridFn::from_fn(g, p);
        for i in 0..8 {
            let mid = cubic_midpoint(i, 8, |k| f.values()[k]);
            let xm = (g.x(i) + g.x(i + 1)) / 2.0;
            assert!((mid - p(xm)).abs() < 1e-14, "interval {i}");
        }
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let g = Grid::new(4).unwrap();
        assert!(GridFn::new(g, vec![0.0; 4]).is_err());
        assert!(GridFn::with_derivs(g, vec![0.0; 5], vec![0.0; 3]).is_err());
    }
}

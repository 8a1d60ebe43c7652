//! Second-order finite-difference solve of the same Neumann problem, used as
//! an independent check on the Airy operator.

use crate::error::{Error, Result};
use crate::grid::GridFn;
use crate::model::ModelParams;

use super::{ode_residual, AirySolveResult};

/// Central differences on every node, with the Neumann conditions imposed
/// through mirrored ghost nodes. `E'` samples come from central differences
/// and vanish at the ends.
pub fn solve_linear_bvp_oracle(r: &GridFn, p: &ModelParams) -> Result<AirySolveResult> {
    let grid = r.grid();
    let n = grid.n_intervals();
    let h = grid.h();
    let rv = r.values();
    let a = p.nu() / (h * h);

    let mut lower = vec![0.0; n + 1];
    let mut diag = vec![0.0; n + 1];
    let mut upper = vec![0.0; n + 1];
    let mut rhs = vec![0.0; n + 1];
    for i in 1..n {
        lower[i] = a;
        diag[i] = -2.0 * a - 2.0 * p.c_at(grid.x(i));
        upper[i] = a;
        rhs[i] = rv[i];
    }
    // Ghost nodes y_{-1} = y_1 and y_{N+1} = y_{N-1}.
    diag[0] = -2.0 * a - 2.0 * p.c0();
    upper[0] = 2.0 * a;
    rhs[0] = rv[0];
    diag[n] = -2.0 * a - 2.0 * p.c1();
    lower[n] = 2.0 * a;
    rhs[n] = rv[n];

    let y = thomas(&lower, &diag, &upper, &rhs)?;

    let mut dy = vec![0.0; n + 1];
    for i in 1..n {
        dy[i] = (y[i + 1] - y[i - 1]) / (2.0 * h);
    }
    let residual_norm = ode_residual(&y, rv, p, grid);
    Ok(AirySolveResult {
        solution: GridFn::with_derivs(grid, y, dy)?,
        d_a: f64::NAN,
        d_b: f64::NAN,
        residual_norm,
    })
}

fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut beta = diag[0];
    if beta.abs() < 1e-300 {
        return Err(Error::LinearSolve("zero pivot in row 0".into()));
    }
    c[0] = upper[0] / beta;
    d[0] = rhs[0] / beta;
    for i in 1..n {
        beta = diag[i] - lower[i] * c[i - 1];
        if beta.abs() < 1e-300 || !beta.is_finite() {
            return Err(Error::LinearSolve(format!("zero pivot in row {i}")));
        }
        c[i] = upper[i] / beta;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / beta;
    }
    let mut y = vec![0.0; n];
    y[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        y[i] = d[i] - c[i] * y[i + 1];
    }
    Ok(y)
}

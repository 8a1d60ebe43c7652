//! Neumann problem `nu y'' = 2 c(x) y + R(x)`, `y'(0) = y'(1) = 0`, solved by
//! variation of parameters with the Airy pair `A(x) = Ai(s(x))`, `B(x) = Bi(s(x))`.
//!
//! Everything is assembled in scaled form: `Ã = A e^{ζ}` and `B̃ = B e^{-ζ}`
//! with `ζ(x) = (2/3) s(x)^{3/2}`. The two running integrals are
//!
//! ```text
//! P(x) = ∫_0^x R B̃ e^{ζ(y) - ζ(x)} dy     (forward)
//! Q(x) = ∫_x^1 R Ã e^{ζ(x) - ζ(y)} dy     (backward)
//! ```
//!
//! so every exponential that appears has a non-positive exponent, and the
//! `B(x) ∫_x^1 R A` part of the Green's function is never formed as the
//! difference of two large numbers.

mod functions;
mod oracle;

use std::fmt::Write as _;

pub use functions::{eval_airy, AiryValues, LogValue};
pub use oracle::solve_linear_bvp_oracle;

use crate::error::{Error, Result};
use crate::grid::{cubic_midpoint, max_abs, Grid, GridFn};
use crate::model::ModelParams;

/// Guard on the scaled boundary determinant.
pub const SINGULARITY_GUARD: f64 = 1e-14;

/// Relative tolerance of the per-node Wronskian check.
pub const WRONSKIAN_TOL: f64 = 1e-8;

/// Homogeneous solutions sampled on the grid.
#[derive(Debug, Clone)]
pub struct AiryBasis {
    params: ModelParams,
    grid: Grid,
    /// `ds/dx`, constant.
    slope: f64,
    s: Vec<f64>,
    zeta: Vec<f64>,
    a: Vec<LogValue>,
    b: Vec<LogValue>,
    /// x-derivatives.
    da: Vec<LogValue>,
    db: Vec<LogValue>,
    // Scaled mantissas Ã, B̃, Ã', B̃'.
    a_s: Vec<f64>,
    b_s: Vec<f64>,
    da_s: Vec<f64>,
    db_s: Vec<f64>,
    wronskian: f64,
}

/// `y = F_R`, `y' = G_R` and the boundary constants.
#[derive(Debug, Clone)]
pub struct AirySolveResult {
    /// Solution with its derivative samples.
    pub solution: GridFn,
    pub d_a: f64,
    pub d_b: f64,
    /// Max interior-node residual of `nu y'' - 2 c y - R` by central differences.
    pub residual_norm: f64,
}

impl AirySolveResult {
    pub fn f(&self) -> &[f64] {
        self.solution.values()
    }

    pub fn g(&self) -> &[f64] {
        self.solution.derivs().expect("solutions carry derivatives")
    }
}

/// Evaluates the Airy pair at `s(x) = 2 c(x) / [4 nu (c1 - c0)^2]^{1/3}` on every node.
pub fn build_basis(p: &ModelParams, grid: Grid) -> Result<AiryBasis> {
    if p.is_mirrored() {
        return Err(Error::domain("c0", "the Airy operator needs c0 < c1"));
    }
    let dc = p.c1() - p.c0();
    let denom = (4.0 * p.nu() * dc * dc).cbrt();
    let slope = 2.0 * dc / denom;
    let ln_slope = slope.ln();
    let wronskian = (2.0 * dc / (std::f64::consts::PI.powi(3) * p.nu())).cbrt();

    let n = grid.len();
    let mut basis = AiryBasis {
        params: *p,
        grid,
        slope,
        s: Vec::with_capacity(n),
        zeta: Vec::with_capacity(n),
        a: Vec::with_capacity(n),
        b: Vec::with_capacity(n),
        da: Vec::with_capacity(n),
        db: Vec::with_capacity(n),
        a_s: Vec::with_capacity(n),
        b_s: Vec::with_capacity(n),
        da_s: Vec::with_capacity(n),
        db_s: Vec::with_capacity(n),
        wronskian,
    };
    for x in grid.nodes() {
        let s = 2.0 * p.c_at(x) / denom;
        let v = eval_airy(s)?;
        let da = v.dai.times_positive(ln_slope);
        let db = v.dbi.times_positive(ln_slope);
        basis.s.push(s);
        basis.zeta.push(v.zeta);
        basis.a_s.push(v.ai.scaled(v.zeta));
        basis.b_s.push(v.bi.scaled(-v.zeta));
        basis.da_s.push(da.scaled(v.zeta));
        basis.db_s.push(db.scaled(-v.zeta));
        basis.a.push(v.ai);
        basis.b.push(v.bi);
        basis.da.push(da);
        basis.db.push(db);
    }
    for i in 0..n {
        let w = basis.wronskian_at(i);
        if ((w - wronskian) / wronskian).abs() > WRONSKIAN_TOL {
            return Err(Error::Precondition(format!(
                "Wronskian check failed at node {i}: {w} vs {wronskian}"
            )));
        }
    }
    Ok(basis)
}

impl AiryBasis {
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn s(&self) -> &[f64] {
        &self.s
    }

    pub fn zeta(&self) -> &[f64] {
        &self.zeta
    }

    pub fn ds_dx(&self) -> f64 {
        self.slope
    }

    /// `W = A B' - B A'`, constant in `x`.
    pub fn wronskian(&self) -> f64 {
        self.wronskian
    }

    /// `A(x_i)`, `B(x_i)`, `A'(x_i)`, `B'(x_i)` in log form.
    pub fn node(&self, i: usize) -> (LogValue, LogValue, LogValue, LogValue) {
        (self.a[i], self.b[i], self.da[i], self.db[i])
    }

    /// `A B' - B A'` at node `i`, formed from scaled values.
    pub fn wronskian_at(&self, i: usize) -> f64 {
        self.a_s[i] * self.db_s[i] - self.b_s[i] * self.da_s[i]
    }

    /// CSV dump of `(x, s, ln Ai, ln Bi)` for inspection.
    pub fn debug_csv(&self) -> String {
        let mut out = String::from("x,s,ln_ai,ln_bi\n");
        for i in 0..self.grid.len() {
            let _ = writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e}",
                self.grid.x(i),
                self.s[i],
                self.a[i].ln_abs,
                self.b[i].ln_abs
            );
        }
        out
    }
}

/// Solves the Neumann problem for a grid-sampled inhomogeneity `R`.
pub fn solve_linear_bvp(r: &GridFn, basis: &AiryBasis) -> Result<AirySolveResult> {
    basis.grid.check_same(&r.grid())?;
    let grid = basis.grid;
    let n = grid.n_intervals();
    let h = grid.h();
    let rv = r.values();
    if let Some(i) = rv.iter().position(|v| !v.is_finite()) {
        return Err(Error::Quadrature(i));
    }
    let zeta = &basis.zeta;

    // Forward P and backward Q, interval by interval with a cubic midpoint.
    let mut p_int = vec![0.0; n + 1];
    for i in 0..n {
        let z1 = zeta[i + 1];
        let g = |k: usize| rv[k] * basis.b_s[k] * (zeta[k] - z1).exp();
        let mid = cubic_midpoint(i, n, g);
        p_int[i + 1] = (zeta[i] - z1).exp() * p_int[i] + h / 6.0 * (g(i) + 4.0 * mid + g(i + 1));
        if !p_int[i + 1].is_finite() {
            return Err(Error::Quadrature(i + 1));
        }
    }
    let mut q_int = vec![0.0; n + 1];
    for i in (0..n).rev() {
        let z0 = zeta[i];
        let g = |k: usize| rv[k] * basis.a_s[k] * (z0 - zeta[k]).exp();
        let mid = cubic_midpoint(i, n, g);
        q_int[i] =
            (z0 - zeta[i + 1]).exp() * q_int[i + 1] + h / 6.0 * (g(i) + 4.0 * mid + g(i + 1));
        if !q_int[i].is_finite() {
            return Err(Error::Quadrature(i));
        }
    }

    let (z0, z1) = (zeta[0], zeta[n]);
    let dz = z1 - z0;
    let (da0, da1) = (basis.da_s[0], basis.da_s[n]);
    let (db0, db1) = (basis.db_s[0], basis.db_s[n]);
    let det = da1 * db0 * (-2.0 * dz).exp() - da0 * db1;
    if det.abs() < SINGULARITY_GUARD {
        return Err(Error::Singularity(det));
    }
    let p1 = p_int[n];
    let q0 = q_int[0];
    let inv = 1.0 / (p_scale(basis) * det);
    let lead = 1.0 / p_scale(basis);

    let mut f = Vec::with_capacity(n + 1);
    let mut g = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let zx = zeta[i];
        // Coefficients multiplying Ã(x) (resp. Ã'(x)) and B̃(x) (resp. B̃'(x)).
        let coef_a = -lead * p_int[i]
            + inv * db0 * (da1 * p1 * (z0 - zx - dz).exp() - db1 * q0 * (z0 - zx).exp());
        let coef_b = -lead * q_int[i]
            + inv * da1 * (db0 * q0 * (zx - z1 - dz).exp() - da0 * p1 * (zx - z1).exp());
        f.push(basis.a_s[i] * coef_a + basis.b_s[i] * coef_b);
        g.push(basis.da_s[i] * coef_a + basis.db_s[i] * coef_b);
    }

    // Unscaled boundary constants; these may overflow for extreme parameters.
    let nu_w = p_scale(basis);
    let d_a = db0 * (da1 * p1 * (z0 - dz).exp() - db1 * q0 * z0.exp()) / (det * nu_w);
    let c1 = da1 * (db0 * q0 * (-z1 - dz).exp() - da0 * p1 * (-z0 - dz).exp()) / (det * nu_w);
    let d_b = -q0 * (-z0).exp() / nu_w + c1;

    let residual_norm = ode_residual(&f, rv, basis.params(), grid);
    Ok(AirySolveResult {
        solution: GridFn::with_derivs(grid, f, g)?,
        d_a,
        d_b,
        residual_norm,
    })
}

fn p_scale(basis: &AiryBasis) -> f64 {
    basis.params.nu() * basis.wronskian
}

/// Max interior residual of `nu y'' - 2 c(x) y - R` with a central second difference.
pub fn ode_residual(y: &[f64], r: &[f64], p: &ModelParams, grid: Grid) -> f64 {
    let h2 = grid.h() * grid.h();
    let mut worst = 0.0_f64;
    for i in 1..grid.n_intervals() {
        let ypp = (y[i - 1] - 2.0 * y[i] + y[i + 1]) / h2;
        let res = p.nu() * ypp - 2.0 * p.c_at(grid.x(i)) * y[i] - r[i];
        worst = worst.max(res.abs());
    }
    worst
}

/// Neumann defect `max(|y'(0)|, |y'(1)|)` relative to `max|y|` (absolute if `y == 0`).
pub fn neumann_defect(res: &AirySolveResult) -> f64 {
    let g = res.g();
    let scale = max_abs(res.f());
    let defect = g[0].abs().max(g[g.len() - 1].abs());
    if scale > 0.0 {
        defect / scale
    } else {
        defect
    }
}

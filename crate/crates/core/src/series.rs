//! Order-by-order perturbation series for the field about the zero-field
//! solution.
//!
//! With `j = j0 + δj` and `E = E_1 + E_2 + ...` (the bookkeeping parameter is
//! set to one, so the amplitude lives in `δj`), each term solves the Airy
//! Neumann problem `nu E_n'' - 2 c(x) E_n = R_n` with
//!
//! ```text
//! R_1 = -2 δj
//! R_n = nu/2 { x [V_n(x,0) - V_n(x,1)] - V_n(x,0) + V_n(x,x) + (τ- - τ+) [U_n(0) - U_n(1)] }
//! U_n(x)   = Σ_{k=1}^{n-1} E_k(x) E_{n-k}(x)
//! V_n(x,y) = Σ_{k=1}^{n-2} E_k(x) U_{n-k}(y)
//! ```
//!
//! For `n = 2` the `V` sum is empty and `R_2` is constant.

use serde::{Deserialize, Serialize};

use crate::airy::{solve_linear_bvp, AiryBasis};
use crate::error::{Error, Result};
use crate::grid::{max_abs, Grid, GridFn};
use crate::model::{reconstruct, FieldSolution, ModelParams};

/// Upper limit on the number of orders computed.
pub const MAX_ORDERS: usize = 500;

/// `max|E_n|` above which a run is stopped as clearly divergent.
pub const OVERFLOW_LIMIT: f64 = 1e30;

/// One order of the expansion.
#[derive(Debug, Clone)]
pub struct SeriesTerm {
    pub order: usize,
    /// `E_n` with `E_n'` as derivative samples.
    pub e: GridFn,
    pub r: GridFn,
    /// `U_n(0)` and `U_n(1)`; zero for `n = 1`.
    pub u0: f64,
    pub u1: f64,
    pub max_abs: f64,
}

/// Why a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RunStatus {
    /// All requested orders were computed.
    Completed,
    /// Order `order` exceeded [`OVERFLOW_LIMIT`] and was discarded.
    Overflow { order: usize, max_abs: f64 },
}

/// Products `U_k`, `k >= 2`, kept at every node for the `V_n(x, x)` sums.
#[derive(Debug, Clone, Default)]
pub struct UTable {
    entries: Vec<Vec<f64>>,
}

impl UTable {
    /// `U_k` samples, if stored.
    pub fn get(&self, k: usize) -> Option<&[f64]> {
        k.checked_sub(2)
            .and_then(|i| self.entries.get(i))
            .map(Vec::as_slice)
    }

    /// Highest stored order (1 when empty).
    pub fn top(&self) -> usize {
        self.entries.len() + 1
    }

    fn push(&mut self, u: Vec<f64>) {
        self.entries.push(u);
    }

    fn require(&self, k: usize) -> Result<&[f64]> {
        self.get(k).ok_or(Error::Index(k))
    }
}

/// State of an expansion: terms, running partial sums and the `U` table.
#[derive(Debug, Clone)]
pub struct SeriesRun {
    pub params: ModelParams,
    pub terms: Vec<SeriesTerm>,
    /// `partial[n-1]` holds `E^(n)` with `E^(n)'`.
    pub partial: Vec<GridFn>,
    pub u_table: UTable,
    pub status: RunStatus,
}

impl SeriesRun {
    pub fn grid(&self) -> Grid {
        self.partial
            .first()
            .map(GridFn::grid)
            .unwrap_or_else(|| self.terms[0].e.grid())
    }

    /// Highest order whose partial sum is available.
    pub fn order(&self) -> usize {
        self.partial.len()
    }

    /// `E^(n)` and its derivative.
    pub fn partial_sum(&self, n: usize) -> Result<&GridFn> {
        n.checked_sub(1)
            .and_then(|i| self.partial.get(i))
            .ok_or(Error::Index(n))
    }

    /// `max|E_n|` for every computed order.
    pub fn term_maxima(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.max_abs).collect()
    }

    pub fn overflowed(&self) -> bool {
        matches!(self.status, RunStatus::Overflow { .. })
    }
}

fn term_from_solve(
    order: usize,
    r: GridFn,
    basis: &AiryBasis,
    u: (f64, f64),
) -> Result<SeriesTerm> {
    let e = solve_linear_bvp(&r, basis)?.solution;
    let max_abs = e.max_abs();
    Ok(SeriesTerm {
        order,
        e,
        r,
        u0: u.0,
        u1: u.1,
        max_abs,
    })
}

/// `E_1 = F_{R_1}` with `R_1 = -2 δj`.
pub fn first_order(p: &ModelParams, basis: &AiryBasis) -> Result<SeriesTerm> {
    let r = GridFn::constant(basis.grid(), -2.0 * p.delta_j());
    term_from_solve(1, r, basis, (0.0, 0.0))
}

/// The linearized solution: `E^(1) = E_1`, `c±^(1) = c(x) ± nu E_1' / 2`,
/// `Φ±^(1) = c0 - c1 ± δj`. It agrees with [`reconstruct`] applied to `E_1`
/// up to the neglected quadratic terms in the fluxes and concentrations.
pub fn linearized_solution(p: &ModelParams, basis: &AiryBasis) -> Result<FieldSolution> {
    let e1 = first_order(p, basis)?.e;
    let grid = e1.grid();
    let de = e1.derivs().expect("solutions carry derivatives");
    let half_nu = 0.5 * p.nu();
    let cp = (0..grid.len())
        .map(|i| p.c_at(grid.x(i)) + half_nu * de[i])
        .collect();
    let cm = (0..grid.len())
        .map(|i| p.c_at(grid.x(i)) - half_nu * de[i])
        .collect();
    let base = p.c0() - p.c1();
    Ok(FieldSolution::assemble(
        *p,
        e1,
        GridFn::new(grid, cp)?,
        GridFn::new(grid, cm)?,
        base - p.j0() + p.j(),
        base + p.j0() - p.j(),
    ))
}

/// `U_n = Σ_{k=1}^{n-1} E_k E_{n-k}` from the terms of orders `1..n-1`.
pub fn convolve_u(terms: &[SeriesTerm], n: usize) -> Result<GridFn> {
    if n < 2 {
        return Err(Error::Index(n));
    }
    if terms.len() < n - 1 {
        return Err(Error::Index(terms.len() + 1));
    }
    let grid = terms[0].e.grid();
    let mut u = vec![0.0; grid.len()];
    // Pair k with n - k once and double, adding the diagonal for even n.
    for k in 1..=(n - 1) / 2 {
        let a = terms[k - 1].e.values();
        let b = terms[n - k - 1].e.values();
        for ((ui, ai), bi) in u.iter_mut().zip(a).zip(b) {
            *ui += 2.0 * ai * bi;
        }
    }
    if n % 2 == 0 {
        let m = terms[n / 2 - 1].e.values();
        for (ui, mi) in u.iter_mut().zip(m) {
            *ui += mi * mi;
        }
    }
    GridFn::new(grid, u)
}

/// `R_n` for `n >= 2`. The table must hold `U_2..U_n`; `V_n` is formed at
/// `y ∈ {0, 1, x}` only.
pub fn assemble_r(
    terms: &[SeriesTerm],
    u_table: &UTable,
    n: usize,
    p: &ModelParams,
) -> Result<GridFn> {
    if n < 2 {
        return Err(Error::Index(n));
    }
    if terms.len() < n - 1 {
        return Err(Error::Index(terms.len() + 1));
    }
    let un = u_table.require(n)?;
    let grid = terms[0].e.grid();
    let len = grid.len();
    let tail = 0.5 * p.nu() * (p.tau_minus() - p.tau_plus()) * (un[0] - un[len - 1]);

    let mut v0 = vec![0.0; len];
    let mut v1 = vec![0.0; len];
    let mut vx = vec![0.0; len];
    for k in 1..=n.saturating_sub(2) {
        let ek = terms[k - 1].e.values();
        let u = u_table.require(n - k)?;
        let (u0, u1) = (u[0], u[len - 1]);
        for i in 0..len {
            v0[i] += ek[i] * u0;
            v1[i] += ek[i] * u1;
            vx[i] += ek[i] * u[i];
        }
    }
    let half_nu = 0.5 * p.nu();
    let r = (0..len)
        .map(|i| {
            let x = grid.x(i);
            half_nu * (x * (v0[i] - v1[i]) - v0[i] + vx[i]) + tail
        })
        .collect();
    GridFn::new(grid, r)
}

/// Runs the recursion for orders `1..=n_max`, stopping early if a term
/// exceeds [`OVERFLOW_LIMIT`].
pub fn run_series(p: &ModelParams, n_max: usize, basis: &AiryBasis) -> Result<SeriesRun> {
    if n_max == 0 || n_max > MAX_ORDERS {
        return Err(Error::domain(
            "n_max",
            format!("must lie in 1..={MAX_ORDERS}, got {n_max}"),
        ));
    }
    if basis.params().nu() != p.nu() || basis.params().c0() != p.c0() {
        return Err(Error::Precondition(
            "Airy basis was built for different nu or c0".into(),
        ));
    }
    let first = first_order(p, basis)?;
    let mut run = SeriesRun {
        params: *p,
        partial: vec![first.e.clone()],
        terms: vec![first],
        u_table: UTable::default(),
        status: RunStatus::Completed,
    };
    for n in 2..=n_max {
        let u = convolve_u(&run.terms, n)?;
        let (u0, u1) = (u.first(), u.last());
        run.u_table.push(u.into_parts().1);
        let r = assemble_r(&run.terms, &run.u_table, n, p)?;
        let term = term_from_solve(n, r, basis, (u0, u1))?;
        if !(term.max_abs <= OVERFLOW_LIMIT) {
            run.status = RunStatus::Overflow {
                order: n,
                max_abs: term.max_abs,
            };
            break;
        }
        let prev = run.partial.last().expect("order 1 is always present");
        let next = add(prev, &term.e);
        run.partial.push(next);
        run.terms.push(term);
    }
    Ok(run)
}

fn add(a: &GridFn, b: &GridFn) -> GridFn {
    let v = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| x + y)
        .collect();
    let d = a
        .derivs()
        .expect("partial sums carry derivatives")
        .iter()
        .zip(b.derivs().expect("terms carry derivatives"))
        .map(|(x, y)| x + y)
        .collect();
    GridFn::with_derivs(a.grid(), v, d).expect("same grid")
}

/// The `n`-th approximate solution, with concentrations and fluxes recovered
/// from `E^(n)` and `E^(n)'`.
pub fn partial_sum_solution(run: &SeriesRun, n: usize) -> Result<FieldSolution> {
    reconstruct(run.partial_sum(n)?, &run.params)
}

/// Max interior residual of the full nonlinear field equation
///
/// ```text
/// nu E'' = nu E^3 / 2 + [2 c0 - nu E(0)^2 / 2 + k x] E + (τ- - τ+) k - 2 j,
/// k = 2 (c1 - c0) + nu [E(0)^2 - E(1)^2] / 2
/// ```
///
/// with `E''` from central differences of the `E'` samples.
pub fn nonlinear_residual(e: &GridFn, p: &ModelParams) -> Result<f64> {
    let de = e
        .derivs()
        .ok_or_else(|| Error::Precondition("residual needs E' samples".into()))?;
    let grid = e.grid();
    let ev = e.values();
    let nu = p.nu();
    let (e0, e1) = (e.first(), e.last());
    let k = 2.0 * (p.c1() - p.c0()) + 0.5 * nu * (e0 * e0 - e1 * e1);
    let shift = 2.0 * p.c0() - 0.5 * nu * e0 * e0;
    let constant = (p.tau_minus() - p.tau_plus()) * k - 2.0 * p.j();
    let h2 = 2.0 * grid.h();
    let res: Vec<f64> = (1..grid.n_intervals())
        .map(|i| {
            let epp = (de[i + 1] - de[i - 1]) / h2;
            let x = grid.x(i);
            nu * epp - 0.5 * nu * ev[i].powi(3) - (shift + k * x) * ev[i] - constant
        })
        .collect();
    Ok(max_abs(&res))
}

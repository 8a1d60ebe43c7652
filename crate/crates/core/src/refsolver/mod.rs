//! Reference solution of the full five-component system
//!
//! ```text
//! c+' = E c+ - Φ+,   c-' = -E c- - Φ-,   nu E' = c+ - c-,   Φ+' = Φ-' = 0
//! c±(0) = c0,   c±(1) = c1,   τ+ Φ+(0) - τ- Φ-(0) = j
//! ```
//!
//! discretized by collocation on the uniform grid and solved with a damped
//! Newton iteration, falling back to continuation in `δj` from the
//! zero-field solution.

mod banded;

use serde::{Deserialize, Serialize};

pub use banded::BandMatrix;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFn};
use crate::model::{planck_solution, FieldSolution, ModelParams};

const COMPONENTS: usize = 5;
const KL: usize = 7;
const KU: usize = 6;

/// Interval equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Hermite–Simpson (three-stage Lobatto IIIA), fourth order.
    #[default]
    HermiteSimpson,
    /// Implicit midpoint box scheme, second order.
    Box,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Max-norm residual target.
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Largest `δj` increment per continuation step.
    pub continuation_step: f64,
    /// Smallest backtracking factor before a Newton solve is abandoned.
    pub damping_min: f64,
    pub scheme: Scheme,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            newton_tol: 1e-10,
            newton_max_iter: 50,
            continuation_step: 0.25,
            damping_min: 2f64.powi(-20),
            scheme: Scheme::HermiteSimpson,
        }
    }
}

/// Converged discrete solution plus solver bookkeeping.
#[derive(Debug, Clone)]
pub struct RefSolution {
    pub solution: FieldSolution,
    /// Newton iterations of the final solve.
    pub newton_iterations: usize,
    pub final_residual_norm: f64,
    /// Number of continuation solves (0 when the direct solve succeeded).
    pub continuation_steps: usize,
}

type Vec5 = [f64; COMPONENTS];
type Mat5 = [[f64; COMPONENTS]; COMPONENTS];

fn rhs(y: &Vec5, nu: f64) -> Vec5 {
    let [cp, cm, e, pp, pm] = *y;
    [e * cp - pp, -e * cm - pm, (cp - cm) / nu, 0.0, 0.0]
}

fn jac(y: &Vec5, nu: f64) -> Mat5 {
    let [cp, cm, e, _, _] = *y;
    [
        [e, 0.0, cp, -1.0, 0.0],
        [0.0, -e, -cm, 0.0, -1.0],
        [1.0 / nu, -1.0 / nu, 0.0, 0.0, 0.0],
        [0.0; 5],
        [0.0; 5],
    ]
}

fn matmul(a: &Mat5, b: &Mat5) -> Mat5 {
    let mut m = [[0.0; 5]; 5];
    for i in 0..5 {
        for j in 0..5 {
            m[i][j] = (0..5).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    m
}

/// `alpha I + beta M`.
fn shifted(alpha: f64, beta: f64, m: &Mat5) -> Mat5 {
    let mut out = [[0.0; 5]; 5];
    for i in 0..5 {
        for j in 0..5 {
            out[i][j] = beta * m[i][j] + if i == j { alpha } else { 0.0 };
        }
    }
    out
}

struct Discretization {
    params: ModelParams,
    grid: Grid,
    scheme: Scheme,
}

impl Discretization {
    fn size(&self) -> usize {
        COMPONENTS * self.grid.len()
    }

    fn node<'a>(&self, y: &'a [f64], i: usize) -> &'a Vec5 {
        y[COMPONENTS * i..COMPONENTS * (i + 1)]
            .try_into()
            .expect("five components per node")
    }

    /// Interval residual and, optionally, its blocks with respect to the
    /// left and right node.
    fn interval(&self, a: &Vec5, b: &Vec5, want_jac: bool) -> (Vec5, Option<(Mat5, Mat5)>) {
        let nu = self.params.nu();
        let h = self.grid.h();
        match self.scheme {
            Scheme::HermiteSimpson => {
                let fa = rhs(a, nu);
                let fb = rhs(b, nu);
                let mut ym = [0.0; 5];
                for k in 0..5 {
                    ym[k] = 0.5 * (a[k] + b[k]) + h / 8.0 * (fa[k] - fb[k]);
                }
                let fm = rhs(&ym, nu);
                let mut r = [0.0; 5];
                for k in 0..5 {
                    r[k] = b[k] - a[k] - h / 6.0 * (fa[k] + 4.0 * fm[k] + fb[k]);
                }
                if !want_jac {
                    return (r, None);
                }
                let ja = jac(a, nu);
                let jb = jac(b, nu);
                let jm = jac(&ym, nu);
                let ma = matmul(&jm, &shifted(0.5, h / 8.0, &ja));
                let mb = matmul(&jm, &shifted(0.5, -h / 8.0, &jb));
                let mut da = [[0.0; 5]; 5];
                let mut db = [[0.0; 5]; 5];
                for i in 0..5 {
                    for j in 0..5 {
                        let id = if i == j { 1.0 } else { 0.0 };
                        da[i][j] = -id - h / 6.0 * (ja[i][j] + 4.0 * ma[i][j]);
                        db[i][j] = id - h / 6.0 * (jb[i][j] + 4.0 * mb[i][j]);
                    }
                }
                (r, Some((da, db)))
            }
            Scheme::Box => {
                let mut ym = [0.0; 5];
                for k in 0..5 {
                    ym[k] = 0.5 * (a[k] + b[k]);
                }
                let fm = rhs(&ym, nu);
                let mut r = [0.0; 5];
                for k in 0..5 {
                    r[k] = b[k] - a[k] - h * fm[k];
                }
                if !want_jac {
                    return (r, None);
                }
                let jm = jac(&ym, nu);
                let da = shifted(-1.0, -0.5 * h, &jm);
                let db = shifted(1.0, -0.5 * h, &jm);
                (r, Some((da, db)))
            }
        }
    }

    /// Rows: three left conditions, five per interval, two right conditions.
    fn residual(&self, y: &[f64]) -> Vec<f64> {
        self.assemble(y, false).0
    }

    fn assemble(&self, y: &[f64], want_jac: bool) -> (Vec<f64>, Option<BandMatrix>) {
        let p = &self.params;
        let n = self.grid.n_intervals();
        let size = self.size();
        let mut f = vec![0.0; size];
        let mut m = want_jac.then(|| BandMatrix::zeros(size, KL, KU));

        let y0 = self.node(y, 0);
        f[0] = y0[0] - p.c0();
        f[1] = y0[1] - p.c0();
        f[2] = p.tau_plus() * y0[3] - p.tau_minus() * y0[4] - p.j();
        if let Some(m) = m.as_mut() {
            m.set(0, 0, 1.0);
            m.set(1, 1, 1.0);
            m.set(2, 3, p.tau_plus());
            m.set(2, 4, -p.tau_minus());
        }
        for i in 0..n {
            let (r, blocks) = self.interval(self.node(y, i), self.node(y, i + 1), want_jac);
            let row = 3 + COMPONENTS * i;
            f[row..row + COMPONENTS].copy_from_slice(&r);
            if let (Some(m), Some((da, db))) = (m.as_mut(), blocks) {
                let col = COMPONENTS * i;
                for a in 0..COMPONENTS {
                    for b in 0..COMPONENTS {
                        m.set(row + a, col + b, da[a][b]);
                        m.set(row + a, col + COMPONENTS + b, db[a][b]);
                    }
                }
            }
        }
        let yn = self.node(y, n);
        let last = size - 2;
        f[last] = yn[0] - p.c1();
        f[last + 1] = yn[1] - p.c1();
        if let Some(m) = m.as_mut() {
            m.set(last, COMPONENTS * n, 1.0);
            m.set(last + 1, COMPONENTS * n + 1, 1.0);
        }
        (f, m)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

struct NewtonOutcome {
    y: Vec<f64>,
    iterations: usize,
    residual: f64,
}

/// Damped Newton from `y`. On failure returns the best residual seen.
fn newton(
    d: &Discretization,
    mut y: Vec<f64>,
    opts: &SolverOptions,
) -> std::result::Result<NewtonOutcome, f64> {
    let mut f = d.residual(&y);
    let mut fnorm = norm(&f);
    let mut iterations = 0;
    while fnorm > opts.newton_tol {
        if iterations >= opts.newton_max_iter || !fnorm.is_finite() {
            return Err(fnorm);
        }
        let (_, jac) = d.assemble(&y, true);
        let mut step: Vec<f64> = f.iter().map(|v| -v).collect();
        if jac.expect("requested").solve(&mut step).is_err() {
            return Err(fnorm);
        }
        let mut lambda = 1.0;
        loop {
            let trial: Vec<f64> = y.iter().zip(&step).map(|(a, s)| a + lambda * s).collect();
            let ft = d.residual(&trial);
            let tn = norm(&ft);
            if tn.is_finite() && tn < fnorm {
                y = trial;
                f = ft;
                fnorm = tn;
                break;
            }
            lambda *= 0.5;
            if lambda < opts.damping_min {
                return Err(fnorm);
            }
        }
        iterations += 1;
    }
    if iterations > 0 {
        // Extra full steps drive the residual to rounding level; the
        // tolerance alone leaves errors of order tol / h in the solution.
        for _ in 0..2 {
            let (_, jac) = d.assemble(&y, true);
            let mut step: Vec<f64> = f.iter().map(|v| -v).collect();
            if jac.expect("requested").solve(&mut step).is_err() {
                break;
            }
            let trial: Vec<f64> = y.iter().zip(&step).map(|(a, s)| a + s).collect();
            let ft = d.residual(&trial);
            let tn = norm(&ft);
            if !(tn < fnorm) {
                break;
            }
            y = trial;
            f = ft;
            fnorm = tn;
        }
    }
    Ok(NewtonOutcome {
        y,
        iterations,
        residual: fnorm,
    })
}

fn planck_state(p: &ModelParams, grid: Grid) -> Vec<f64> {
    let phi = p.c0() - p.c1();
    grid.nodes()
        .flat_map(|x| {
            let c = p.c_at(x);
            [c, c, 0.0, phi, phi]
        })
        .collect()
}

fn to_solution(p: &ModelParams, grid: Grid, y: &[f64]) -> Result<FieldSolution> {
    let take = |k: usize| -> Vec<f64> { y.iter().skip(k).step_by(COMPONENTS).copied().collect() };
    let cp = take(0);
    let cm = take(1);
    let e = take(2);
    let de = cp.iter().zip(&cm).map(|(a, b)| (a - b) / p.nu()).collect();
    Ok(FieldSolution::assemble(
        *p,
        GridFn::with_derivs(grid, e, de)?,
        GridFn::new(grid, cp)?,
        GridFn::new(grid, cm)?,
        y[3],
        y[4],
    ))
}

fn check_options(opts: &SolverOptions) -> Result<()> {
    if !(opts.newton_tol > 0.0) {
        return Err(Error::domain("newton_tol", "must be positive"));
    }
    if !(opts.continuation_step > 0.0) {
        return Err(Error::domain("continuation_step", "must be positive"));
    }
    if !(opts.damping_min > 0.0 && opts.damping_min < 1.0) {
        return Err(Error::domain("damping_min", "must lie in (0, 1)"));
    }
    Ok(())
}

/// Solves the discrete system on `grid`. The zero-field state is tried as
/// the initial guess first; if Newton fails, `δj` is marched from zero in
/// steps of at most `continuation_step`, halving the step after a failure.
pub fn solve_reference(p: &ModelParams, grid: Grid, opts: &SolverOptions) -> Result<RefSolution> {
    check_options(opts)?;
    let d = Discretization {
        params: *p,
        grid,
        scheme: opts.scheme,
    };
    let guess = planck_state(p, grid);
    let mut best = match newton(&d, guess.clone(), opts) {
        Ok(out) => {
            return Ok(RefSolution {
                solution: to_solution(p, grid, &out.y)?,
                newton_iterations: out.iterations,
                final_residual_norm: out.residual,
                continuation_steps: 0,
            })
        }
        Err(r) => r,
    };

    let target = p.delta_j();
    let min_step = opts.continuation_step / 1024.0;
    let mut reached = 0.0;
    let mut y = guess;
    let mut step = opts.continuation_step;
    let mut steps = 0;
    loop {
        let next = if (target - reached).abs() <= step {
            target
        } else {
            reached + step * target.signum()
        };
        let d = Discretization {
            params: p.at_delta_j(next),
            grid,
            scheme: opts.scheme,
        };
        match newton(&d, y.clone(), opts) {
            Ok(out) => {
                steps += 1;
                reached = next;
                y = out.y;
                if next == target {
                    return Ok(RefSolution {
                        solution: to_solution(p, grid, &y)?,
                        newton_iterations: out.iterations,
                        final_residual_norm: out.residual,
                        continuation_steps: steps,
                    });
                }
                step = (2.0 * step).min(opts.continuation_step);
            }
            Err(r) => {
                best = best.min(r);
                step *= 0.5;
                if step < min_step {
                    return Err(Error::NonConvergence {
                        best_residual: best,
                        reached_delta_j: reached,
                        target_delta_j: target,
                    });
                }
            }
        }
    }
}

/// Max-norm of the discrete Hermite–Simpson residual for a candidate,
/// with `Φ±` taken as constants.
pub fn residual(p: &ModelParams, candidate: &FieldSolution) -> Result<f64> {
    residual_with(p, candidate, Scheme::HermiteSimpson)
}

pub fn residual_with(p: &ModelParams, candidate: &FieldSolution, scheme: Scheme) -> Result<f64> {
    let grid = candidate.grid();
    for g in [candidate.c_plus.grid(), candidate.c_minus.grid()] {
        grid.check_same(&g)?;
    }
    let y: Vec<f64> = (0..grid.len())
        .flat_map(|i| {
            [
                candidate.c_plus.values()[i],
                candidate.c_minus.values()[i],
                candidate.e()[i],
                candidate.phi_plus,
                candidate.phi_minus,
            ]
        })
        .collect();
    let d = Discretization {
        params: *p,
        grid,
        scheme,
    };
    Ok(norm(&d.residual(&y)))
}

/// Reference solution at `δj = 0` without iterating.
pub fn zero_field(p: &ModelParams, grid: Grid) -> Result<RefSolution> {
    let solution = planck_solution(p, grid)?;
    let final_residual_norm = residual(p, &solution)?;
    Ok(RefSolution {
        solution,
        newton_iterations: 0,
        final_residual_norm,
        continuation_steps: 0,
    })
}

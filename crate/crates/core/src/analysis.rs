//! Error traces of the partial sums against the reference solution, the
//! `n3`/`n7` thresholds, convergence verdicts, the field/derivative
//! reciprocity check and the weighted-error scan.
//!
//! Verdicts describe apparent behaviour up to the order cap. A series that
//! looks convergent to order 500 may still be divergent or asymptotic.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::airy::build_basis;
use crate::error::{Error, Result};
use crate::grid::{simpson, Grid};
use crate::model::{ModelParams, SolutionClass};
use crate::refsolver::{solve_reference, RefSolution, SolverOptions};
use crate::series::{run_series, RunStatus, SeriesRun};

pub const THRESHOLD_3: f64 = 1e-3;
pub const THRESHOLD_7: f64 = 1e-7;

/// Errors below this are recorded but not considered reliable.
pub const RELIABILITY_FLOOR: f64 = 1e-7;

/// Trailing window for the divergence slope test.
pub const SLOPE_WINDOW: usize = 50;

/// Half-width of the running maximum that smooths out the order-to-order
/// oscillation of the error (a few periods of it).
pub const ENVELOPE_HALF_WIDTH: usize = 10;

/// Growth of the envelope above its minimum that counts as divergence.
pub const ENVELOPE_GROWTH: f64 = 2.0;

/// Field and derivative error magnitudes of one partial sum.
///
/// Only the non-dominated `(|e|, |e'|)` node pairs are kept, which is enough
/// to evaluate the weighted maximum exactly for every weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderError {
    front: Vec<(f64, f64)>,
}

impl OrderError {
    fn from_pairs(mut pairs: Vec<(f64, f64)>) -> Self {
        // Descending field error; keep a pair only if its derivative error
        // beats every pair with a larger field error.
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.total_cmp(&a.1)));
        let mut front: Vec<(f64, f64)> = Vec::new();
        for p in pairs {
            if front.last().is_none_or(|q| p.1 > q.1) {
                front.push(p);
            }
        }
        OrderError { front }
    }

    /// `max over nodes of 2w|e| + 2(1-w)|e'|`.
    pub fn delta(&self, w: f64) -> f64 {
        self.front
            .iter()
            .map(|&(a, b)| 2.0 * w * a + 2.0 * (1.0 - w) * b)
            .fold(0.0, f64::max)
    }

    pub fn front_len(&self) -> usize {
        self.front.len()
    }
}

/// Apparent behaviour of the series up to the order cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    ApparentlyConverged,
    StillDecreasing,
    ApparentlyDiverging,
    Unclear,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::ApparentlyConverged => "apparently_converged",
            Verdict::StillDecreasing => "still_decreasing",
            Verdict::ApparentlyDiverging => "apparently_diverging",
            Verdict::Unclear => "unclear",
        })
    }
}

/// Per-order errors of a series run, with derived thresholds and verdict.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorTrace {
    pub params: ModelParams,
    pub class: Option<SolutionClass>,
    pub nu_e_max_sq: f64,
    /// `orders[n-1]` describes `E^(n)`.
    pub orders: Vec<OrderError>,
    /// Root-mean-square measure per order.
    pub integral: Vec<f64>,
    /// Order cap that was requested.
    pub n_max: usize,
    pub status: RunStatus,
    pub n3: Option<usize>,
    pub n7: Option<usize>,
    pub verdict: Verdict,
}

impl ErrorTrace {
    pub fn len(&self) -> usize {
        self.orders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orders.is_empty()
    }

    /// `Δ_n(w)`; `n` starts at 1.
    pub fn delta(&self, n: usize, w: f64) -> f64 {
        self.orders[n - 1].delta(w)
    }

    /// `Δ_1(w) .. Δ_N(w)`.
    pub fn deltas(&self, w: f64) -> Vec<f64> {
        self.orders.iter().map(|o| o.delta(w)).collect()
    }

    pub fn delta_1(&self) -> f64 {
        self.delta(1, 0.5)
    }

    /// Orders with `Δ_n(0.5)` below [`RELIABILITY_FLOOR`].
    pub fn unreliable(&self, n: usize) -> bool {
        self.delta(n, 0.5) < RELIABILITY_FLOOR
    }

    /// Whether every order up to the cap was computed.
    pub fn complete(&self) -> bool {
        self.status == RunStatus::Completed && self.len() == self.n_max
    }

    /// Order and value of the smallest `Δ_n(0.5)`.
    pub fn minimum(&self) -> (usize, f64) {
        argmin(&self.deltas(0.5))
    }

    /// Running maximum of `Δ_n(0.5)` over `n ± ENVELOPE_HALF_WIDTH`.
    pub fn envelope(&self) -> Vec<f64> {
        envelope(&self.deltas(0.5))
    }

    /// Order and value where the envelope is lowest.
    pub fn envelope_minimum(&self) -> (usize, f64) {
        argmin(&self.envelope())
    }
}

/// First order (from 1) holding the smallest value.
fn argmin(v: &[f64]) -> (usize, f64) {
    v.iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bn, bv), (i, &x)| {
            if x < bv {
                (i + 1, x)
            } else {
                (bn, bv)
            }
        })
}

pub fn envelope(v: &[f64]) -> Vec<f64> {
    let h = ENVELOPE_HALF_WIDTH;
    (0..v.len())
        .map(|i| {
            let hi = (i + h + 1).min(v.len());
            v[i.saturating_sub(h)..hi]
                .iter()
                .copied()
                .fold(0.0, f64::max)
        })
        .collect()
}

/// The order beyond which `values` (indexed from order 1) stay below `thr`:
/// the last order at or above it, `Some(0)` if none is, and `None` if the
/// final order is still at or above it.
pub fn threshold_order(values: &[f64], thr: f64) -> Option<usize> {
    match values.iter().rposition(|&v| !(v < thr)) {
        None => Some(0),
        Some(i) if i + 1 == values.len() => None,
        Some(i) => Some(i + 1),
    }
}

fn check_grids(run: &SeriesRun, reference: &RefSolution) -> Result<()> {
    run.grid().check_same(&reference.solution.grid())
}

/// Root-mean-square error of `E^(n)`, `E^(n)'` by composite Simpson.
pub fn error_trace_integral(run: &SeriesRun, reference: &RefSolution, n: usize) -> Result<f64> {
    check_grids(run, reference)?;
    let s = run.partial_sum(n)?;
    let grid = s.grid();
    let e = s.values();
    let de = s.derivs().expect("partial sums carry derivatives");
    let sq: Vec<f64> = (0..grid.len())
        .map(|i| {
            let a = e[i] - reference.solution.e()[i];
            let b = de[i] - reference.solution.de()[i];
            a * a + b * b
        })
        .collect();
    Ok(simpson(&sq, grid.h()).max(0.0).sqrt())
}

/// Builds the full trace for every computed order of `run`.
pub fn error_trace(run: &SeriesRun, reference: &RefSolution, n_max: usize) -> Result<ErrorTrace> {
    check_grids(run, reference)?;
    let e_ref = reference.solution.e();
    let de_ref = reference.solution.de();
    let mut orders = Vec::with_capacity(run.order());
    let mut integral = Vec::with_capacity(run.order());
    for n in 1..=run.order() {
        let s = run.partial_sum(n)?;
        let de = s.derivs().expect("partial sums carry derivatives");
        let pairs = s
            .values()
            .iter()
            .zip(de)
            .zip(e_ref.iter().zip(de_ref))
            .map(|((e, d), (er, dr))| ((e - er).abs(), (d - dr).abs()))
            .collect();
        orders.push(OrderError::from_pairs(pairs));
        integral.push(error_trace_integral(run, reference, n)?);
    }
    let mut trace = ErrorTrace {
        params: run.params,
        class: reference.solution.class,
        nu_e_max_sq: reference.solution.nu_e_max_sq,
        orders,
        integral,
        n_max,
        status: run.status,
        n3: None,
        n7: None,
        verdict: Verdict::Unclear,
    };
    if trace.complete() {
        let d = trace.deltas(0.5);
        trace.n3 = threshold_order(&d, THRESHOLD_3);
        trace.n7 = threshold_order(&d, THRESHOLD_7);
    }
    trace.verdict = verdict(&trace);
    Ok(trace)
}

/// Least-squares slope of `log10 v` against the index.
fn log_slope(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let ys: Vec<f64> = v.iter().map(|x| x.max(f64::MIN_POSITIVE).log10()).collect();
    let mx = (n - 1.0) / 2.0;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in ys.iter().enumerate() {
        let dx = i as f64 - mx;
        sxy += dx * (y - my);
        sxx += dx * dx;
    }
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Diverging when the run overflowed, or when the trailing slope is
/// positive and either the final error exceeds ten times the smallest one
/// or the envelope has grown by [`ENVELOPE_GROWTH`] since a minimum lying at
/// least [`SLOPE_WINDOW`] orders before the end. The envelope test catches
/// slow growth that the deep troughs of the oscillation hide from the first.
pub fn verdict(trace: &ErrorTrace) -> Verdict {
    if matches!(trace.status, RunStatus::Overflow { .. }) {
        return Verdict::ApparentlyDiverging;
    }
    if trace.is_empty() {
        return Verdict::Unclear;
    }
    let d = trace.deltas(0.5);
    if trace.complete() && threshold_order(&d, THRESHOLD_7).is_some() {
        return Verdict::ApparentlyConverged;
    }
    let window = &d[d.len().saturating_sub(SLOPE_WINDOW)..];
    let slope = if window.len() >= 2 {
        log_slope(window)
    } else {
        0.0
    };
    let last = d[d.len() - 1];
    let (_, min) = argmin(&d);
    let env = envelope(&d);
    let (env_at, env_min) = argmin(&env);
    let env_growth =
        env_at + SLOPE_WINDOW <= d.len() && env[env.len() - 1] > ENVELOPE_GROWTH * env_min;
    if slope > 0.0 && (last > 10.0 * min || env_growth) {
        Verdict::ApparentlyDiverging
    } else if slope < 0.0 {
        Verdict::StillDecreasing
    } else {
        Verdict::Unclear
    }
}

/// Outcome of the field/derivative reciprocity check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionQReport {
    /// Orders `n` in `first..=last` were compared with `n + 1`.
    pub first: usize,
    pub last: usize,
    pub holds: bool,
    /// Orders `n` where both `Δ_{n+1}(1) > Δ_n(1)` and `Δ_{n+1}(0) > Δ_n(0)`.
    pub violations: Vec<usize>,
}

/// Checks `1 <= n <= n7 + 1` (or every available pair without `n7`).
pub fn condition_q(trace: &ErrorTrace) -> ConditionQReport {
    let field = trace.deltas(1.0);
    let deriv = trace.deltas(0.0);
    let available = trace.len().saturating_sub(1);
    let last = match trace.n7 {
        Some(n7) => (n7 + 1).min(available),
        None => available,
    };
    let violations: Vec<usize> = (1..=last)
        .filter(|&n| field[n] > field[n - 1] && deriv[n] > deriv[n - 1])
        .collect();
    ConditionQReport {
        first: 1,
        last,
        holds: violations.is_empty(),
        violations,
    }
}

/// Default scan `0.05, 0.10, ..., 0.95`.
pub fn default_weights() -> Vec<f64> {
    (1..20).map(|k| k as f64 / 20.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightScan {
    pub w: f64,
    /// Threshold order of `Δ_n(w)` itself.
    pub n7: Option<usize>,
    pub monotone: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSearchResult {
    pub scans: Vec<WeightScan>,
    pub monotone_weights: Vec<f64>,
    /// True iff some interior weight is monotone.
    pub conjecture_flag: bool,
}

/// `Δ_n(w)` strictly decreases until it first drops below `1e-7` and then
/// stays below through the order cap.
pub fn is_monotone(trace: &ErrorTrace, w: f64) -> (Option<usize>, bool) {
    if !trace.complete() {
        return (None, false);
    }
    let d = trace.deltas(w);
    let n7 = threshold_order(&d, THRESHOLD_7);
    let monotone = match n7 {
        Some(m) => (1..=m).all(|n| d[n] < d[n - 1]),
        None => false,
    };
    (n7, monotone)
}

pub fn weight_search(trace: &ErrorTrace, weights: &[f64]) -> WeightSearchResult {
    let scans: Vec<WeightScan> = weights
        .iter()
        .map(|&w| {
            let (n7, monotone) = is_monotone(trace, w);
            WeightScan { w, n7, monotone }
        })
        .collect();
    let monotone_weights: Vec<f64> = scans
        .iter()
        .filter(|s| s.monotone && s.w > 0.0 && s.w < 1.0)
        .map(|s| s.w)
        .collect();
    WeightSearchResult {
        conjecture_flag: !monotone_weights.is_empty(),
        scans,
        monotone_weights,
    }
}

/// Everything needed to analyse one parameter case.
#[derive(Debug, Clone, Copy)]
pub struct CaseSetup {
    pub grid: Grid,
    pub n_max: usize,
    pub solver: SolverOptions,
}

impl Default for CaseSetup {
    fn default() -> Self {
        CaseSetup {
            grid: Grid::default(),
            n_max: crate::series::MAX_ORDERS,
            solver: SolverOptions::default(),
        }
    }
}

/// Reference solve, series run and trace for one parameter set.
pub struct CaseRun {
    pub reference: RefSolution,
    pub series: SeriesRun,
    pub trace: ErrorTrace,
}

pub fn run_case(p: &ModelParams, setup: &CaseSetup) -> Result<CaseRun> {
    let reference = solve_reference(p, setup.grid, &setup.solver)?;
    let basis = build_basis(p, setup.grid)?;
    let series = run_series(p, setup.n_max, &basis)?;
    let trace = error_trace(&series, &reference, setup.n_max)?;
    Ok(CaseRun {
        reference,
        series,
        trace,
    })
}

/// Summary written per case.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaseReport {
    pub params: ModelParams,
    pub class: Option<SolutionClass>,
    pub nu_e_max_sq: f64,
    pub delta_1: f64,
    pub n3: Option<usize>,
    pub n7: Option<usize>,
    pub verdict: Verdict,
    pub condition_q: ConditionQReport,
    pub monotone_weights: Vec<f64>,
    pub orders_computed: usize,
    pub status: RunStatus,
    /// Order and value of the smallest `Δ_n`.
    pub min_order: usize,
    pub min_delta: f64,
    /// Same for the oscillation envelope of `Δ_n`.
    pub envelope_min_order: usize,
    pub envelope_min_delta: f64,
}

impl CaseReport {
    pub fn new(trace: &ErrorTrace, weights: &[f64]) -> Result<Self> {
        if trace.is_empty() {
            return Err(Error::Index(1));
        }
        let (min_order, min_delta) = trace.minimum();
        let (envelope_min_order, envelope_min_delta) = trace.envelope_minimum();
        Ok(CaseReport {
            params: trace.params,
            class: trace.class,
            nu_e_max_sq: trace.nu_e_max_sq,
            delta_1: trace.delta_1(),
            n3: trace.n3,
            n7: trace.n7,
            verdict: trace.verdict,
            condition_q: condition_q(trace),
            monotone_weights: weight_search(trace, weights).monotone_weights,
            orders_computed: trace.len(),
            status: trace.status,
            min_order,
            min_delta,
            envelope_min_order,
            envelope_min_delta,
        })
    }
}

//! Flat `key = value` configuration files and the CSV artifacts.
//!
//! Config lines are `key = value`; `#` starts a comment. Parameter keys
//! accept a single number, a comma list, or an inclusive `start:stop:step`
//! range, and a multi-valued config describes the cross product of its lists
//! (ordered by `nu`, `tau_plus`, `c0`, then the current).
//!
//! | key | meaning | default |
//! |---|---|---|
//! | `nu`, `tau_plus`, `c0` | model constants | required |
//! | `j` or `delta_j` | current, absolute or offset from `j0` | required |
//! | `grid_n` | interval count | 1000 |
//! | `n_max` | series order cap | 500 |
//! | `newton_tol`, `newton_max_iter` | Newton stopping rule | 1e-10, 50 |
//! | `continuation_step`, `damping_min` | continuation and damping | 0.25, 2^-20 |
//! | `scheme` | `hermite_simpson` or `box` | `hermite_simpson` |
//! | `weights` | weight scan | 0.05..0.95 step 0.05 |
//! | `weight_refine` | rescan at step 0.01 around hits | false |
//! | `snapshots` | orders whose partial sums are written | none |

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::analysis::{default_weights, ErrorTrace, RELIABILITY_FLOOR};
use crate::error::{Error, Result};
use crate::grid::{Grid, GridFn, DEFAULT_INTERVALS};
use crate::model::{
    validate_params, Current, FieldSolution, ModelParams, RawParams, SolutionClass,
};
use crate::refsolver::{Scheme, SolverOptions};
use crate::series::{SeriesRun, MAX_ORDERS};

const KEYS: &[&str] = &[
    "nu",
    "tau_plus",
    "c0",
    "j",
    "delta_j",
    "grid_n",
    "n_max",
    "newton_tol",
    "newton_max_iter",
    "continuation_step",
    "damping_min",
    "scheme",
    "weights",
    "weight_refine",
    "snapshots",
];

/// How the current values of a config are given.
#[derive(Debug, Clone, PartialEq)]
pub enum CurrentSpec {
    Absolute(Vec<f64>),
    Offset(Vec<f64>),
}

impl Default for CurrentSpec {
    fn default() -> Self {
        CurrentSpec::Offset(Vec::new())
    }
}

/// Parsed and checked configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub nu: Vec<f64>,
    pub tau_plus: Vec<f64>,
    pub c0: Vec<f64>,
    pub current: CurrentSpec,
    pub grid_n: usize,
    pub n_max: usize,
    pub solver: SolverOptions,
    pub weights: Vec<f64>,
    pub weight_refine: bool,
    pub snapshots: Vec<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            nu: Vec::new(),
            tau_plus: Vec::new(),
            c0: Vec::new(),
            current: CurrentSpec::default(),
            grid_n: DEFAULT_INTERVALS,
            n_max: MAX_ORDERS,
            solver: SolverOptions::default(),
            weights: default_weights(),
            weight_refine: false,
            snapshots: Vec::new(),
        }
    }
}

fn parse_f64(key: &str, s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Config(format!("`{key}`: `{}` is not a number", s.trim())))
}

fn parse_usize(key: &str, s: &str) -> Result<usize> {
    s.trim().parse::<usize>().map_err(|_| {
        Error::Config(format!(
            "`{key}`: `{}` is not a non-negative integer",
            s.trim()
        ))
    })
}

/// A comma list or an inclusive `start:stop:step` range.
pub fn parse_list(key: &str, s: &str) -> Result<Vec<f64>> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(Vec::new());
    }
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::Config(format!(
                "`{key}`: ranges are start:stop:step"
            )));
        }
        let (a, b, h) = (
            parse_f64(key, parts[0])?,
            parse_f64(key, parts[1])?,
            parse_f64(key, parts[2])?,
        );
        if h == 0.0 || (b - a) * h < 0.0 {
            return Err(Error::Config(format!(
                "`{key}`: step does not reach the stop value"
            )));
        }
        let count = ((b - a) / h + 1e-9).floor() as usize;
        if count > 1_000_000 {
            return Err(Error::Config(format!("`{key}`: range has too many values")));
        }
        // Values are rebuilt from the index so that 2.45:2.56:0.01 ends exactly on 2.56.
        return Ok((0..=count).map(|k| a + k as f64 * h).collect());
    }
    s.split(',').map(|v| parse_f64(key, v)).collect()
}

impl RunConfig {
    /// Parses config text; unknown or repeated keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let k = k.trim().to_string();
            if !KEYS.contains(&k.as_str()) {
                return Err(Error::Config(format!(
                    "line {}: unknown key `{k}`",
                    lineno + 1
                )));
            }
            if map.insert(k.clone(), v.trim().to_string()).is_some() {
                return Err(Error::Config(format!(
                    "line {}: duplicate key `{k}`",
                    lineno + 1
                )));
            }
        }
        Self::from_map(&map)
    }

    fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        let mut c = RunConfig::default();
        let get = |k: &str| map.get(k).map(String::as_str);
        if let Some(v) = get("nu") {
            c.nu = parse_list("nu", v)?;
        }
        if let Some(v) = get("tau_plus") {
            c.tau_plus = parse_list("tau_plus", v)?;
        }
        if let Some(v) = get("c0") {
            c.c0 = parse_list("c0", v)?;
        }
        c.current = match (get("j"), get("delta_j")) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "give either `j` or `delta_j`, not both".into(),
                ))
            }
            (Some(v), None) => CurrentSpec::Absolute(parse_list("j", v)?),
            (None, Some(v)) => CurrentSpec::Offset(parse_list("delta_j", v)?),
            (None, None) => CurrentSpec::default(),
        };
        if let Some(v) = get("grid_n") {
            c.grid_n = parse_usize("grid_n", v)?;
        }
        if let Some(v) = get("n_max") {
            c.n_max = parse_usize("n_max", v)?;
        }
        if let Some(v) = get("newton_tol") {
            c.solver.newton_tol = parse_f64("newton_tol", v)?;
        }
        if let Some(v) = get("newton_max_iter") {
            c.solver.newton_max_iter = parse_usize("newton_max_iter", v)?;
        }
        if let Some(v) = get("continuation_step") {
            c.solver.continuation_step = parse_f64("continuation_step", v)?;
        }
        if let Some(v) = get("damping_min") {
            c.solver.damping_min = parse_f64("damping_min", v)?;
        }
        if let Some(v) = get("scheme") {
            c.solver.scheme = match v {
                "hermite_simpson" => Scheme::HermiteSimpson,
                "box" => Scheme::Box,
                other => return Err(Error::Config(format!("unknown scheme `{other}`"))),
            };
        }
        if let Some(v) = get("weights") {
            c.weights = parse_list("weights", v)?;
        }
        if let Some(v) = get("weight_refine") {
            c.weight_refine = match v {
                "true" => true,
                "false" => false,
                other => {
                    return Err(Error::Config(format!(
                        "`weight_refine`: `{other}` is not a boolean"
                    )))
                }
            };
        }
        if let Some(v) = get("snapshots") {
            c.snapshots = v
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|s| parse_usize("snapshots", s))
                .collect::<Result<_>>()?;
        }
        c.check()?;
        Ok(c)
    }

    /// Checks the non-parameter settings; parameter tuples are validated by [`cases`](Self::cases).
    pub fn check(&self) -> Result<()> {
        Grid::new(self.grid_n)?;
        if self.n_max == 0 || self.n_max > MAX_ORDERS {
            return Err(Error::domain(
                "n_max",
                format!("must lie in 1..={MAX_ORDERS}, got {}", self.n_max),
            ));
        }
        if let Some(w) = self.weights.iter().find(|w| !(0.0..=1.0).contains(*w)) {
            return Err(Error::domain("weights", format!("{w} is outside [0, 1]")));
        }
        if let Some(n) = self.snapshots.iter().find(|&&n| n == 0 || n > self.n_max) {
            return Err(Error::domain(
                "snapshots",
                format!("order {n} is outside 1..=n_max"),
            ));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid_n)
    }

    /// Every parameter combination, validated, in cross-product order.
    pub fn cases(&self) -> Result<Vec<ModelParams>> {
        let (currents, absolute) = match &self.current {
            CurrentSpec::Absolute(v) => (v, true),
            CurrentSpec::Offset(v) => (v, false),
        };
        let mut out = Vec::new();
        for &nu in &self.nu {
            for &tau_plus in &self.tau_plus {
                for &c0 in &self.c0 {
                    for &cur in currents {
                        let current = if absolute {
                            Current::Absolute(cur)
                        } else {
                            Current::Offset(cur)
                        };
                        out.push(validate_params(RawParams {
                            nu,
                            tau_plus,
                            c0,
                            current,
                        })?);
                    }
                }
            }
        }
        Ok(out)
    }

    /// The single case of a non-sweep config.
    pub fn single(&self) -> Result<ModelParams> {
        let missing: Vec<&str> = [
            ("nu", self.nu.is_empty()),
            ("tau_plus", self.tau_plus.is_empty()),
            ("c0", self.c0.is_empty()),
            (
                "j or delta_j",
                match &self.current {
                    CurrentSpec::Absolute(v) | CurrentSpec::Offset(v) => v.is_empty(),
                },
            ),
        ]
        .iter()
        .filter(|(_, m)| *m)
        .map(|(k, _)| *k)
        .collect();
        if !missing.is_empty() {
            return Err(Error::Config(format!("missing {}", missing.join(", "))));
        }
        let cases = self.cases()?;
        if cases.len() != 1 {
            return Err(Error::Config(format!(
                "expected one parameter set, the config describes {}",
                cases.len()
            )));
        }
        Ok(cases[0])
    }

    /// The weight scan, refined to step 0.01 around monotone hits if requested.
    pub fn refined_weights(&self, hits: &[f64]) -> Vec<f64> {
        if !self.weight_refine {
            return self.weights.clone();
        }
        let mut w: Vec<f64> = self.weights.clone();
        for &h in hits {
            for k in -4i32..=4 {
                let v = ((h * 100.0).round() + k as f64) / 100.0;
                if v > 0.0 && v < 1.0 {
                    w.push(v);
                }
            }
        }
        w.sort_by(f64::total_cmp);
        w.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        w
    }
}

/// First line of a solution CSV, after `# `.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionHeader {
    pub params: ModelParams,
    pub grid_n: usize,
    pub class: Option<SolutionClass>,
    pub phi_plus: f64,
    pub phi_minus: f64,
    pub nu_e_max_sq: f64,
    pub warnings: Vec<String>,
}

const SOLUTION_COLUMNS: &str = "x,E,dE,c_plus,c_minus";

pub fn write_solution_csv(s: &FieldSolution, mut w: impl Write) -> Result<()> {
    let header = SolutionHeader {
        params: s.params,
        grid_n: s.grid().n_intervals(),
        class: s.class,
        phi_plus: s.phi_plus,
        phi_minus: s.phi_minus,
        nu_e_max_sq: s.nu_e_max_sq,
        warnings: s.warnings.clone(),
    };
    writeln!(w, "# {}", serde_json::to_string(&header)?)?;
    writeln!(w, "{SOLUTION_COLUMNS}")?;
    let g = s.grid();
    for i in 0..g.len() {
        writeln!(
            w,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            g.x(i),
            s.e()[i],
            s.de()[i],
            s.c_plus.values()[i],
            s.c_minus.values()[i]
        )?;
    }
    Ok(())
}

pub fn read_solution_csv(mut r: impl BufRead) -> Result<FieldSolution> {
    let mut first = String::new();
    r.read_line(&mut first)?;
    let json = first
        .trim_end()
        .strip_prefix("# ")
        .ok_or_else(|| Error::Parse("missing `# {...}` header line".into()))?;
    let header: SolutionHeader = serde_json::from_str(json)?;
    let mut rows = csv::Reader::from_reader(r);
    let columns = rows.headers().map_err(|e| Error::Parse(e.to_string()))?;
    if columns.iter().collect::<Vec<_>>().join(",") != SOLUTION_COLUMNS {
        return Err(Error::Parse(format!("unexpected columns {columns:?}")));
    }
    let grid = Grid::new(header.grid_n)?;
    let mut cols: [Vec<f64>; 5] = Default::default();
    for (k, rec) in rows.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        for (c, f) in cols.iter_mut().zip(rec.iter()) {
            c.push(
                f.trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("row {}: bad number `{f}`", k + 1)))?,
            );
        }
    }
    let [_, e, de, cp, cm] = cols;
    Ok(FieldSolution::assemble(
        header.params,
        GridFn::with_derivs(grid, e, de)?,
        GridFn::new(grid, cp)?,
        GridFn::new(grid, cm)?,
        header.phi_plus,
        header.phi_minus,
    ))
}

/// Columns `n, delta_w0, delta_w1, delta_w05, delta_bar, unreliable`.
pub fn write_trace_csv(t: &ErrorTrace, mut w: impl Write) -> Result<()> {
    writeln!(w, "n,delta_w0,delta_w1,delta_w05,delta_bar,unreliable")?;
    for n in 1..=t.len() {
        let half = t.delta(n, 0.5);
        writeln!(
            w,
            "{n},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            t.delta(n, 0.0),
            t.delta(n, 1.0),
            half,
            t.integral[n - 1],
            u8::from(half < RELIABILITY_FLOOR)
        )?;
    }
    Ok(())
}

/// Columns `n, max_abs_e_n`.
pub fn write_term_maxima_csv(run: &SeriesRun, mut w: impl Write) -> Result<()> {
    writeln!(w, "n,max_abs_e_n")?;
    for t in &run.terms {
        writeln!(w, "{},{:.16e}", t.order, t.max_abs)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::planck_solution;

    #[test]
    fn parses_comments_lists_and_ranges() {
        let c = RunConfig::parse(
            "# sweep\nnu = 2.0\ntau_plus = 0.6 # base\nc0 = 0.2, 0.3\ndelta_j = 2.45:2.56:0.01\nn_max = 20\n",
        )
        .unwrap();
        assert_eq!(c.nu, vec![2.0]);
        assert_eq!(c.c0, vec![0.2, 0.3]);
        let CurrentSpec::Offset(dj) = &c.current else {
            panic!("expected offsets")
        };
        assert_eq!(dj.len(), 12);
        assert!((dj[11] - 2.56).abs() < 1e-12);
        assert_eq!(c.cases().unwrap().len(), 24);
        assert!(c.single().is_err());
    }

    #[test]
    fn rejects_unknown_duplicate_and_conflicting_keys() {
        assert!(matches!(RunConfig::parse("nus = 1"), Err(Error::Config(_))));
        assert!(matches!(
            RunConfig::parse("nu = 1\nnu = 2"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            RunConfig::parse("j = 1\ndelta_j = 2"),
            Err(Error::Config(_))
        ));
        assert!(matches!(RunConfig::parse("nu 1"), Err(Error::Config(_))));
        assert!(RunConfig::parse("grid_n = 999").is_err());
        assert!(RunConfig::parse("n_max = 501").is_err());
        assert!(RunConfig::parse("scheme = rk4").is_err());
        assert!(RunConfig::parse("delta_j = 1:0:0.5").is_err());
    }

    #[test]
    fn invalid_parameters_surface_as_domain_errors() {
        let c = RunConfig::parse("nu = 1\ntau_plus = 1.2\nc0 = 0.3\ndelta_j = 1").unwrap();
        assert!(matches!(
            c.single(),
            Err(Error::Domain {
                param: "tau_plus",
                ..
            })
        ));
    }

    #[test]
    fn empty_config_has_no_cases() {
        let c = RunConfig::parse("").unwrap();
        assert!(c.cases().unwrap().is_empty());
        assert!(c.single().is_err());
    }

    #[test]
    fn absolute_current_is_kept() {
        let c = RunConfig::parse("nu = 1\ntau_plus = 0.6\nc0 = 0.25\nj = 0.3").unwrap();
        let p = c.single().unwrap();
        assert_eq!(p.j(), 0.3);
    }

    #[test]
    fn refinement_adds_neighbours() {
        let mut c = RunConfig::default();
        c.weight_refine = true;
        let w = c.refined_weights(&[0.25]);
        assert!(w.contains(&0.21) && w.contains(&0.29));
        let mut sorted = w.clone();
        sorted.dedup();
        assert_eq!(sorted, w);
    }

    #[test]
    fn solution_csv_round_trip() {
        let p = ModelParams::with_delta_j(1.0, 0.6, 1.0 / 3.0, 0.0).unwrap();
        let s = planck_solution(&p, Grid::new(20).unwrap()).unwrap();
        let mut buf = Vec::new();
        write_solution_csv(&s, &mut buf).unwrap();
        let back = read_solution_csv(&buf[..]).unwrap();
        assert_eq!(back, s);
        assert!(read_solution_csv(&b"x,E\n"[..]).is_err());
    }
}

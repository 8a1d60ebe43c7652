//! Dimensionless two-ion electrodiffusion model on the unit interval.
//!
//! The unknowns are the concentrations `c±(x)`, the field `E(x)` and the
//! constant fluxes `Φ±`. Once `E` and `E'` are known everything else follows
//! algebraically from the first integral of the Nernst–Planck–Poisson system,
//! which is what [`reconstruct`] does.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFn};

/// Threshold for "zero field" and for the sign tests of [`classify`].
pub const TOL_ZERO: f64 = 1e-9;

/// Largest `|delta_j|` accepted as the exact zero-field case.
pub const TOL_EXACT: f64 = 1e-14;

/// Validated dimensionless constants plus derived quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    nu: f64,
    tau_plus: f64,
    tau_minus: f64,
    c0: f64,
    c1: f64,
    j: f64,
    j0: f64,
    delta_j: f64,
}

/// How the current density is specified in a raw parameter set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Current {
    /// Absolute current density `j`.
    Absolute(f64),
    /// Offset from the zero-field current, `j - j0`.
    Offset(f64),
}

/// Unvalidated parameter tuple, as read from a config file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawParams {
    pub nu: f64,
    pub tau_plus: f64,
    pub c0: f64,
    pub current: Current,
}

/// Checks the raw tuple and fills in `tau_minus`, `c1 = 1 - c0`, `j0` and `delta_j`.
pub fn validate_params(raw: RawParams) -> Result<ModelParams> {
    let current = match raw.current {
        Current::Absolute(v) | Current::Offset(v) => v,
    };
    for (name, v) in [
        ("nu", raw.nu),
        ("tau_plus", raw.tau_plus),
        ("c0", raw.c0),
        ("j", current),
    ] {
        if !v.is_finite() {
            return Err(Error::domain(name, format!("must be finite, got {v}")));
        }
    }
    if raw.nu <= 0.0 {
        return Err(Error::domain("nu", format!("must be > 0, got {}", raw.nu)));
    }
    if !(raw.tau_plus > 0.0 && raw.tau_plus < 1.0) {
        return Err(Error::domain(
            "tau_plus",
            format!("must lie in (0, 1), got {}", raw.tau_plus),
        ));
    }
    if !(raw.c0 > 0.0 && raw.c0 < 0.5) {
        return Err(Error::domain(
            "c0",
            format!(
                "must lie in (0, 0.5) so that c0 < c1 = 1 - c0, got {}",
                raw.c0
            ),
        ));
    }
    let tau_minus = 1.0 - raw.tau_plus;
    let c1 = 1.0 - raw.c0;
    let j0 = (raw.tau_plus - tau_minus) * (raw.c0 - c1);
    let (j, delta_j) = match raw.current {
        Current::Absolute(j) => (j, j - j0),
        Current::Offset(d) => (j0 + d, d),
    };
    Ok(ModelParams {
        nu: raw.nu,
        tau_plus: raw.tau_plus,
        tau_minus,
        c0: raw.c0,
        c1,
        j,
        j0,
        delta_j,
    })
}

impl ModelParams {
    pub fn new(nu: f64, tau_plus: f64, c0: f64, j: f64) -> Result<Self> {
        validate_params(RawParams {
            nu,
            tau_plus,
            c0,
            current: Current::Absolute(j),
        })
    }

    pub fn with_delta_j(nu: f64, tau_plus: f64, c0: f64, delta_j: f64) -> Result<Self> {
        validate_params(RawParams {
            nu,
            tau_plus,
            c0,
            current: Current::Offset(delta_j),
        })
    }

    /// Same constants with a different offset `j - j0`.
    pub fn at_delta_j(&self, delta_j: f64) -> Self {
        ModelParams {
            j: self.j0 + delta_j,
            delta_j,
            ..*self
        }
    }

    /// Parameters of the reflected problem `x -> 1 - x`: boundary data
    /// `(c1, c0)` and current `-j`. The result has `c0 > c1`, which
    /// [`validate_params`] would reject; only the reference solver and the
    /// model algebra accept it.
    pub fn mirrored(&self) -> Self {
        ModelParams {
            c0: self.c1,
            c1: self.c0,
            j: -self.j,
            j0: -self.j0,
            delta_j: -self.delta_j,
            ..*self
        }
    }

    pub fn is_mirrored(&self) -> bool {
        self.c0 > self.c1
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }
    pub fn tau_plus(&self) -> f64 {
        self.tau_plus
    }
    pub fn tau_minus(&self) -> f64 {
        self.tau_minus
    }
    pub fn c0(&self) -> f64 {
        self.c0
    }
    pub fn c1(&self) -> f64 {
        self.c1
    }
    pub fn j(&self) -> f64 {
        self.j
    }
    pub fn j0(&self) -> f64 {
        self.j0
    }
    pub fn delta_j(&self) -> f64 {
        self.delta_j
    }

    /// Linear zero-field concentration profile `c(x) = c0 + (c1 - c0) x`.
    pub fn c_at(&self, x: f64) -> f64 {
        self.c0 + (self.c1 - self.c0) * x
    }
}

/// Physical parameters in CGS-Gaussian units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionalParams {
    /// Junction width (cm).
    pub delta: f64,
    /// Common charge-number magnitude.
    pub z: f64,
    /// Thermal energy `k_B T` (erg).
    pub thermal_energy: f64,
    /// Cation diffusion coefficient (cm²/s).
    pub d_plus: f64,
    /// Anion diffusion coefficient (cm²/s).
    pub d_minus: f64,
    /// Relative permittivity.
    pub permittivity: f64,
    /// Boundary concentration at `x = 0` (1/cm³).
    pub c0_hat: f64,
    /// Boundary concentration at `x = delta` (1/cm³).
    pub c1_hat: f64,
    /// Electric current density (statA/cm²); any sign.
    pub current_density: f64,
}

/// Elementary charge in statcoulomb.
pub const ELEMENTARY_CHARGE_ESU: f64 = 4.803_204_712_570_263e-10;

/// Maps physical constants onto `(nu, tau±, c0, j)`.
pub fn nondimensionalize(d: &DimensionalParams) -> Result<ModelParams> {
    let positive = [
        ("delta", d.delta),
        ("z", d.z),
        ("thermal_energy", d.thermal_energy),
        ("d_plus", d.d_plus),
        ("d_minus", d.d_minus),
        ("permittivity", d.permittivity),
        ("c0_hat", d.c0_hat),
        ("c1_hat", d.c1_hat),
    ];
    for (name, v) in positive {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::domain(name, format!("must be positive, got {v}")));
        }
    }
    if !d.current_density.is_finite() {
        return Err(Error::domain("current_density", "must be finite"));
    }
    if d.c0_hat >= d.c1_hat {
        return Err(Error::domain("c0_hat", "must be smaller than c1_hat"));
    }
    let c_ref = d.c0_hat + d.c1_hat;
    let ze = d.z * ELEMENTARY_CHARGE_ESU;
    let nu = d.permittivity * d.thermal_energy
        / (4.0 * std::f64::consts::PI * ze * ze * d.delta * d.delta * c_ref);
    let tau_plus = d.d_plus / (d.d_plus + d.d_minus);
    let j = d.delta * d.current_density / (ze * c_ref * (d.d_plus + d.d_minus));
    ModelParams::new(nu, tau_plus, d.c0_hat / c_ref, j)
}

/// Exhaustive sign patterns of a solution with `c0 < c1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SolutionClass {
    /// `E > 0`, `E' < 0`.
    A,
    /// `E < 0`, `E' > 0`.
    B,
    /// `E == 0` (the zero-field solution).
    C,
}

impl fmt::Display for SolutionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SolutionClass::A => "A",
            SolutionClass::B => "B",
            SolutionClass::C => "C",
        };
        f.write_str(s)
    }
}

/// Field, concentrations and fluxes on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSolution {
    pub params: ModelParams,
    /// `E(x)` with `E'(x)` as derivative samples.
    pub field: GridFn,
    pub c_plus: GridFn,
    pub c_minus: GridFn,
    pub phi_plus: f64,
    pub phi_minus: f64,
    /// `None` when the sign pattern matched no class.
    pub class: Option<SolutionClass>,
    /// `nu * max|E|^2`.
    pub nu_e_max_sq: f64,
    pub warnings: Vec<String>,
}

impl FieldSolution {
    /// Assembles a solution from raw samples, computing `nu_e_max_sq`, the
    /// class label and positivity warnings.
    pub fn assemble(
        params: ModelParams,
        field: GridFn,
        c_plus: GridFn,
        c_minus: GridFn,
        phi_plus: f64,
        phi_minus: f64,
    ) -> Self {
        let nu_e_max_sq = params.nu * field.max_abs().powi(2);
        let mut s = FieldSolution {
            params,
            field,
            c_plus,
            c_minus,
            phi_plus,
            phi_minus,
            class: None,
            nu_e_max_sq,
            warnings: Vec::new(),
        };
        for (name, c) in [("c_plus", &s.c_plus), ("c_minus", &s.c_minus)] {
            if let Some(i) = c.values().iter().position(|&v| v <= 0.0) {
                s.warnings.push(format!(
                    "{name} is nonpositive at node {i} ({:e})",
                    c.values()[i]
                ));
            }
        }
        match classify(&s) {
            Ok(c) => s.class = Some(c),
            Err(e) => s.warnings.push(e.to_string()),
        }
        s
    }

    pub fn grid(&self) -> Grid {
        self.field.grid()
    }

    pub fn e(&self) -> &[f64] {
        self.field.values()
    }

    pub fn de(&self) -> &[f64] {
        self.field
            .derivs()
            .expect("field solutions always carry E'")
    }

    /// Samples of `c+ + c- - nu E^2 / 2 + (Φ+ + Φ-) x`, constant for an exact solution.
    pub fn first_integral(&self) -> Vec<f64> {
        let nu = self.params.nu;
        let flux_sum = self.phi_plus + self.phi_minus;
        let g = self.grid();
        (0..g.len())
            .map(|i| {
                self.c_plus.values()[i] + self.c_minus.values()[i] - 0.5 * nu * self.e()[i].powi(2)
                    + flux_sum * g.x(i)
            })
            .collect()
    }

    /// Largest deviation of the first integral from its value at `x = 0`.
    pub fn first_integral_defect(&self) -> f64 {
        let fi = self.first_integral();
        fi.iter().fold(0.0_f64, |m, v| m.max((v - fi[0]).abs()))
    }

    /// `|tau+ Φ+ - tau- Φ- - j|`.
    pub fn current_defect(&self) -> f64 {
        let p = &self.params;
        (p.tau_plus * self.phi_plus - p.tau_minus * self.phi_minus - p.j).abs()
    }

    /// `|Φ+ + Φ- - 2(c0 - c1) - nu (E(1)^2 - E(0)^2) / 2|`.
    pub fn flux_sum_defect(&self) -> f64 {
        let p = &self.params;
        let e0 = self.field.first();
        let e1 = self.field.last();
        (self.phi_plus + self.phi_minus - 2.0 * (p.c0 - p.c1) - 0.5 * p.nu * (e1 * e1 - e0 * e0))
            .abs()
    }

    /// Largest deviation of the four boundary concentrations from `c0`, `c1`.
    pub fn boundary_defect(&self) -> f64 {
        let p = &self.params;
        [
            self.c_plus.first() - p.c0,
            self.c_minus.first() - p.c0,
            self.c_plus.last() - p.c1,
            self.c_minus.last() - p.c1,
        ]
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Zero-field solution, exact when `j == j0`.
pub fn planck_solution(p: &ModelParams, grid: Grid) -> Result<FieldSolution> {
    if p.delta_j.abs() >= TOL_EXACT {
        return Err(Error::Precondition(format!(
            "zero-field solution requires j = j0, but j - j0 = {:e}",
            p.delta_j
        )));
    }
    let c = GridFn::from_fn(grid, |x| p.c_at(x));
    let field = GridFn::with_derivs(grid, vec![0.0; grid.len()], vec![0.0; grid.len()])?;
    let phi = p.c0 - p.c1;
    Ok(FieldSolution::assemble(*p, field, c.clone(), c, phi, phi))
}

/// Recovers `c±(x)` and `Φ±` from `E` and `E'` via the first integral.
pub fn reconstruct(e: &GridFn, p: &ModelParams) -> Result<FieldSolution> {
    let de = e
        .derivs()
        .ok_or_else(|| Error::Precondition("reconstruction needs E' samples".into()))?;
    let grid = e.grid();
    let nu = p.nu;
    let ev = e.values();
    let e0sq = ev[0] * ev[0];
    let e1sq = ev[ev.len() - 1] * ev[ev.len() - 1];
    let slope = (p.c1 - p.c0) + 0.25 * nu * (e0sq - e1sq);
    let offset = p.c0 - 0.25 * nu * e0sq;
    let mut cp = Vec::with_capacity(grid.len());
    let mut cm = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let base = 0.25 * nu * ev[i] * ev[i] + slope * grid.x(i) + offset;
        let split = 0.5 * nu * de[i];
        cp.push(base + split);
        cm.push(base - split);
    }
    let bracket = 2.0 * (p.c0 - p.c1) + 0.5 * nu * (e1sq - e0sq);
    let phi_plus = p.tau_minus * bracket + p.j;
    let phi_minus = p.tau_plus * bracket - p.j;
    Ok(FieldSolution::assemble(
        *p,
        e.clone(),
        GridFn::new(grid, cp)?,
        GridFn::new(grid, cm)?,
        phi_plus,
        phi_minus,
    ))
}

/// Assigns the class from the sign pattern of `E` and `E'` at interior nodes.
///
/// Solutions of the reflected problem (`c0 > c1`) are classified through
/// their mirror image, so the label refers to the canonical orientation.
pub fn classify(s: &FieldSolution) -> Result<SolutionClass> {
    if s.params.is_mirrored() {
        return classify(&reflect_raw(s));
    }
    let e = s.e();
    let de = s.de();
    if s.field.max_abs() < TOL_ZERO {
        return Ok(SolutionClass::C);
    }
    let interior = 1..e.len() - 1;
    let is_a = interior
        .clone()
        .all(|i| e[i] > -TOL_ZERO && de[i] < TOL_ZERO);
    if is_a {
        return Ok(SolutionClass::A);
    }
    let is_b = interior
        .clone()
        .all(|i| e[i] < TOL_ZERO && de[i] > -TOL_ZERO);
    if is_b {
        return Ok(SolutionClass::B);
    }
    let bad = interior
        .clone()
        .find(|&i| !(e[i] > -TOL_ZERO && de[i] < TOL_ZERO))
        .unwrap_or(0);
    Err(Error::Classification(format!(
        "E = {:e}, E' = {:e} at x = {}; max|E| = {:e}",
        e[bad],
        de[bad],
        s.grid().x(bad),
        s.field.max_abs()
    )))
}

fn reflect_raw(s: &FieldSolution) -> FieldSolution {
    let rev = |v: &[f64]| v.iter().rev().copied().collect::<Vec<_>>();
    let grid = s.grid();
    let e: Vec<f64> = s.e().iter().rev().map(|v| -v).collect();
    let de = rev(s.de());
    FieldSolution {
        params: s.params.mirrored(),
        field: GridFn::with_derivs(grid, e, de).expect("same grid"),
        c_plus: GridFn::new(grid, rev(s.c_plus.values())).expect("same grid"),
        c_minus: GridFn::new(grid, rev(s.c_minus.values())).expect("same grid"),
        phi_plus: -s.phi_plus,
        phi_minus: -s.phi_minus,
        class: s.class,
        nu_e_max_sq: s.nu_e_max_sq,
        warnings: s.warnings.clone(),
    }
}

/// Applies `x -> 1 - x`: `c_R±(x) = c±(1-x)`, `E_R(x) = -E(1-x)`, `Φ_R± = -Φ±`,
/// giving a solution for boundary data `(c1, c0)` and current `-j`.
/// The class label is kept, since it refers to the canonical orientation.
pub fn reflect(s: &FieldSolution) -> FieldSolution {
    reflect_raw(s)
}

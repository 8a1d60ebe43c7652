//! Perturbation-series solution of the steady two-ion electrodiffusion
//! problem, whose field obeys a boundary-value form of Painlevé II.
//!
//! * [`model`]: dimensionless parameters, the zero-field solution,
//!   reconstruction of concentrations and fluxes from the field.
//! * [`airy`]: Airy functions and the Neumann solution operator built on them.
//! * [`series`]: the order-by-order recursion for the field.
//! * [`refsolver`]: collocation/Newton reference solution of the full system.
//! * [`analysis`]: error traces, convergence thresholds and verdicts.
//! * [`io`]: config parsing and CSV/JSON artifacts.

pub mod airy;
pub mod analysis;
pub mod error;
pub mod grid;
pub mod io;
pub mod model;
pub mod refsolver;
pub mod series;

pub use error::{Error, Result};
pub use grid::{Grid, GridFn};
pub use model::{FieldSolution, ModelParams, SolutionClass};

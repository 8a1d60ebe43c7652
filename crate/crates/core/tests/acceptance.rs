//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! fails if any criterion fails.

use std::io::Write;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use edseries::airy::{build_basis, solve_linear_bvp, solve_linear_bvp_oracle};
use edseries::analysis::{
    condition_q, default_weights, run_case, weight_search, CaseRun, CaseSetup, Verdict,
};
use edseries::grid::{max_abs, Grid, GridFn};
use edseries::model::{
    planck_solution, reconstruct, reflect, FieldSolution, ModelParams, SolutionClass,
};
use edseries::refsolver::{residual, solve_reference, Scheme, SolverOptions};
use edseries::series::{
    convolve_u, linearized_solution, nonlinear_residual, partial_sum_solution, run_series,
};

/// (nu, delta_j, class, nu E_max^2, Δ1, n3, n7) with tau_plus = 0.6, c0 = 1/3.
const TABLE1: [(f64, f64, SolutionClass, f64, f64, usize, usize); 6] = [
    (0.1, -0.5, SolutionClass::B, 0.13, 0.013, 2, 7),
    (0.5, 1.5, SolutionClass::A, 5.2, 0.13, 6, 21),
    (1.1, -1.0, SolutionClass::B, 4.5, 0.049, 4, 11),
    (2.5, -2.0, SolutionClass::B, 38.0, 0.16, 11, 42),
    (3.5, 2.0, SolutionClass::A, 61.0, 0.17, 10, 43),
    (10.0, 1.0, SolutionClass::A, 42.0, 0.044, 3, 12),
];

/// (nu, tau_plus, c0, delta_j) for every case beyond the table.
const EXTRA: [(f64, f64, f64, f64); 15] = [
    (2.0, 0.6, 1.0 / 3.0, 2.45),
    (2.0, 0.6, 1.0 / 3.0, 2.48),
    (2.0, 0.6, 1.0 / 3.0, 2.50),
    (2.0, 0.6, 1.0 / 3.0, 2.53),
    (2.0, 0.6, 1.0 / 3.0, 2.56),
    (1.0, 0.6, 1.0 / 3.0, -2.45),
    (1.0, 0.6, 1.0 / 3.0, -2.48),
    (1.0, 0.6, 1.0 / 3.0, -2.49),
    (1.0, 0.6, 1.0 / 3.0, -2.55),
    (1.0, 0.5, 1.0 / 3.0, -2.5),
    (1.0, 0.5, 1.0 / 3.0, -2.75),
    (1.0, 0.9, 1.0 / 3.0, -2.10),
    (1.0, 0.9, 1.0 / 3.0, -2.15),
    (1.0, 0.6, 0.2, -2.15),
    (1.0, 0.6, 0.2, -2.30),
];

struct Cases {
    table: Vec<CaseRun>,
    extra: Vec<CaseRun>,
}

impl Cases {
    fn get(&self, nu: f64, tau_plus: f64, c0: f64, delta_j: f64) -> &CaseRun {
        let k = EXTRA
            .iter()
            .position(|&c| c == (nu, tau_plus, c0, delta_j))
            .expect("case not in the list");
        &self.extra[k]
    }
}

fn cases() -> &'static Cases {
    static CASES: OnceLock<Cases> = OnceLock::new();
    CASES.get_or_init(|| {
        let setup = CaseSetup::default();
        let mut params: Vec<ModelParams> = TABLE1
            .iter()
            .map(|r| ModelParams::with_delta_j(r.0, 0.6, 1.0 / 3.0, r.1).unwrap())
            .collect();
        params.extend(
            EXTRA
                .iter()
                .map(|c| ModelParams::with_delta_j(c.0, c.1, c.2, c.3).unwrap()),
        );
        let mut runs: Vec<CaseRun> = params
            .par_iter()
            .map(|p| run_case(p, &setup).unwrap())
            .collect();
        let extra = runs.split_off(TABLE1.len());
        Cases { table: runs, extra }
    })
}

#[derive(Default)]
struct Gate {
    lines: Vec<String>,
    failed: usize,
}

impl Gate {
    fn record(&mut self, name: &str, failures: Vec<String>) {
        if failures.is_empty() {
            self.lines.push(format!("PASS {name}"));
        } else {
            self.failed += 1;
            self.lines
                .push(format!("FAIL {name}: {}", failures.join("; ")));
        }
    }
}

fn within_rel(value: f64, target: f64, rel: f64) -> bool {
    ((value - target) / target).abs() <= rel
}

fn within_abs(value: Option<usize>, target: usize, tol: usize) -> bool {
    value.is_some_and(|v| v.abs_diff(target) <= tol)
}

fn table1_reproduction(c: &Cases) -> Vec<String> {
    let mut f = vec![];
    for (row, (&(nu, dj, class, e2, d1, n3, n7), run)) in TABLE1.iter().zip(&c.table).enumerate() {
        let t = &run.trace;
        let tag = format!("row {} (nu={nu}, dj={dj})", row + 1);
        if t.class != Some(class) {
            f.push(format!("{tag}: class {:?}", t.class));
        }
        if !within_rel(t.nu_e_max_sq, e2, 0.05) {
            f.push(format!("{tag}: nu E_max^2 {}", t.nu_e_max_sq));
        }
        if !within_rel(t.delta_1(), d1, 0.15) {
            f.push(format!("{tag}: delta_1 {}", t.delta_1()));
        }
        if !within_abs(t.n3, n3, 2) {
            f.push(format!("{tag}: n3 {:?}", t.n3));
        }
        if !within_abs(t.n7, n7, 2) {
            f.push(format!("{tag}: n7 {:?}", t.n7));
        }
    }
    f
}

fn slow_convergence(c: &Cases) -> Vec<String> {
    let mut f = vec![];
    for (nu, dj, target) in [
        (2.0, 2.45, 265.0),
        (2.0, 2.48, 413.0),
        (1.0, -2.45, 262.0),
        (1.0, -2.48, 414.0),
    ] {
        let n7 = c.get(nu, 0.6, 1.0 / 3.0, dj).trace.n7;
        if !n7.is_some_and(|n| within_rel(n as f64, target, 0.03)) {
            f.push(format!("nu={nu}, dj={dj}: n7 {n7:?}"));
        }
    }
    f
}

fn breakdown_brackets(c: &Cases) -> Vec<String> {
    let mut f = vec![];
    let mut expect = |case: (f64, f64, f64, f64), want: &dyn Fn(Verdict) -> bool, what: &str| {
        let v = c.get(case.0, case.1, case.2, case.3).trace.verdict;
        if !want(v) {
            f.push(format!("{case:?}: {v}, expected {what}"));
        }
    };
    let diverging = |v: Verdict| v == Verdict::ApparentlyDiverging;
    let not_diverging = |v: Verdict| v != Verdict::ApparentlyDiverging;
    let converged = |v: Verdict| v == Verdict::ApparentlyConverged;
    let third = 1.0 / 3.0;
    for dj in [2.45, 2.48] {
        expect((2.0, 0.6, third, dj), &not_diverging, "no divergence");
    }
    expect((2.0, 0.6, third, 2.56), &diverging, "divergence");
    for dj in [-2.45, -2.48, -2.49] {
        expect((1.0, 0.6, third, dj), &not_diverging, "no divergence");
    }
    expect((1.0, 0.6, third, -2.55), &diverging, "divergence");
    expect((1.0, 0.5, third, -2.5), &converged, "convergence");
    expect((1.0, 0.5, third, -2.75), &diverging, "divergence");
    expect((1.0, 0.9, third, -2.10), &converged, "convergence");
    expect((1.0, 0.9, third, -2.15), &diverging, "divergence");
    expect((1.0, 0.6, 0.2, -2.15), &converged, "convergence");
    expect((1.0, 0.6, 0.2, -2.30), &diverging, "divergence");
    f
}

fn divergent_shape(c: &Cases) -> Vec<String> {
    let mut f = vec![];
    for (nu, dj, n_target, value) in [(2.0, 2.56, 110.0, 5e-3), (1.0, -2.55, 135.0, 2.7e-3)] {
        let t = &c.get(nu, 0.6, 1.0 / 3.0, dj).trace;
        let (n, d) = t.envelope_minimum();
        if (n as f64 - n_target).abs() > 15.0 || !within_rel(d, value, 0.5) {
            f.push(format!("nu={nu}, dj={dj}: minimum {d:.3e} at n={n}"));
        }
        let last = t.deltas(0.5)[t.len() - 1];
        if last <= d {
            f.push(format!("nu={nu}, dj={dj}: no growth after the minimum"));
        }
    }
    f
}

fn reciprocity(c: &Cases) -> Vec<String> {
    let mut f = vec![];
    for (row, run) in c.table.iter().enumerate() {
        let q = condition_q(&run.trace);
        if !q.holds {
            f.push(format!("row {}: violations {:?}", row + 1, q.violations));
        }
    }
    let third = 1.0 / 3.0;
    let q = condition_q(&c.get(2.0, 0.6, third, 2.45).trace);
    if !q.holds {
        f.push(format!("nu=2, dj=2.45: violations {:?}", q.violations));
    }
    let q = condition_q(&c.get(1.0, 0.6, third, -2.45).trace);
    if !q.violations.contains(&8) {
        f.push(format!("nu=1, dj=-2.45: violations {:?}", q.violations));
    }
    for case in [(1.0, 0.9, third, -2.10), (1.0, 0.6, 0.2, -2.15)] {
        if condition_q(&c.get(case.0, case.1, case.2, case.3).trace).holds {
            f.push(format!("{case:?}: no violation"));
        }
    }
    f
}

fn monotone_weights(c: &Cases) -> Vec<String> {
    let mut f = vec![];
    let weights = default_weights();
    for (row, target) in [(1, 0.5), (3, 0.5), (5, 0.25), (6, 0.2)] {
        let found = weight_search(&c.table[row - 1].trace, &weights).monotone_weights;
        if !found.iter().any(|w| (w - target).abs() <= 0.05 + 1e-12) {
            f.push(format!("row {row}: monotone weights {found:?}"));
        }
    }
    f
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

fn property_suite(c: &Cases) -> Vec<String> {
    let mut f = vec![];
    let g = Grid::default();

    // First integral of the reference solutions.
    for (row, run) in c.table.iter().enumerate() {
        let d = run.reference.solution.first_integral_defect();
        if d > 1e-8 {
            f.push(format!("row {}: first-integral defect {d:.2e}", row + 1));
        }
    }

    // Airy operator against the finite-difference oracle, and Wronskian.
    let fine = Grid::new(4 * g.n_intervals()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_fd = 0.0_f64;
    let mut worst_w = 0.0_f64;
    for nu in [0.1, 1.0, 10.0] {
        for c0 in [0.1, 1.0 / 3.0, 0.45] {
            let p = ModelParams::with_delta_j(nu, 0.6, c0, 1.0).unwrap();
            let basis = build_basis(&p, g).unwrap();
            let w = (2.0 * (p.c1() - p.c0()) / (std::f64::consts::PI.powi(3) * nu)).cbrt();
            for i in 0..g.len() {
                worst_w = worst_w.max(((basis.wronskian_at(i) - w) / w).abs());
            }
            for _ in 0..4 {
                let k: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
                let poly = |x: f64| k[0] + x * (k[1] + x * (k[2] + x * k[3]));
                let a = solve_linear_bvp(&GridFn::from_fn(g, poly), &basis).unwrap();
                // The oracle runs four times finer and is sampled on the shared nodes.
                let o = solve_linear_bvp_oracle(&GridFn::from_fn(fine, poly), &p).unwrap();
                let sampled: Vec<f64> = o.f().iter().step_by(4).copied().collect();
                worst_fd = worst_fd.max(max_diff(a.f(), &sampled));
            }
        }
    }
    if worst_fd > 1e-6 {
        f.push(format!("Airy vs finite differences {worst_fd:.2e}"));
    }
    if worst_w > 1e-8 {
        f.push(format!("Wronskian {worst_w:.2e}"));
    }

    // Linearity and source scaling of the Airy solve.
    let p = ModelParams::with_delta_j(0.7, 0.6, 0.25, 1.0).unwrap();
    let basis = build_basis(&p, g).unwrap();
    let r1 = GridFn::from_fn(g, |x| x * x - 0.3);
    let r2 = GridFn::from_fn(g, |x| (4.0 * x).sin());
    let (alpha, beta) = (2.3, -0.6);
    let combo = GridFn::from_fn(g, |x| alpha * (x * x - 0.3) + beta * (4.0 * x).sin());
    let y1 = solve_linear_bvp(&r1, &basis).unwrap();
    let y2 = solve_linear_bvp(&r2, &basis).unwrap();
    let yc = solve_linear_bvp(&combo, &basis).unwrap();
    let lin: Vec<f64> = (0..g.len())
        .map(|i| alpha * y1.f()[i] + beta * y2.f()[i])
        .collect();
    let scale = max_abs(&lin).max(1.0);
    let d = max_diff(yc.f(), &lin) / scale;
    if d > 1e-12 {
        f.push(format!("linearity {d:.2e}"));
    }
    for eps in [1e-3, 0.5, 4.0] {
        let ys = solve_linear_bvp(&r1.scaled(eps), &basis).unwrap();
        let want: Vec<f64> = y1.f().iter().map(|v| eps * v).collect();
        let d = max_diff(ys.f(), &want) / max_abs(&want);
        if d > 1e-12 {
            f.push(format!("scaling by {eps}: {d:.2e}"));
        }
    }

    // E_n scales as (δj)^n.
    let base = ModelParams::with_delta_j(1.1, 0.6, 1.0 / 3.0, -0.4).unwrap();
    let basis = build_basis(&base, g).unwrap();
    let run_a = run_series(&base, 4, &basis).unwrap();
    for lambda in [1.7, -0.3] {
        let scaled = base.at_delta_j(base.delta_j() * lambda);
        let run_b = run_series(&scaled, 4, &build_basis(&scaled, g).unwrap()).unwrap();
        for n in 1..=4 {
            let a = run_a.terms[n - 1].e.values();
            let b = run_b.terms[n - 1].e.values();
            let factor = lambda.powi(n as i32);
            let want: Vec<f64> = a.iter().map(|v| v * factor).collect();
            let d = max_diff(b, &want) / max_abs(b);
            if d > 1e-8 {
                f.push(format!("homogeneity order {n}, lambda {lambda}: {d:.2e}"));
            }
        }
    }

    // Reflection is an involution.
    for run in &c.table {
        let s = &run.reference.solution;
        let rr = reflect(&reflect(s));
        if rr.e() != s.e()
            || rr.de() != s.de()
            || rr.c_plus.values() != s.c_plus.values()
            || rr.c_minus.values() != s.c_minus.values()
            || rr.phi_plus != s.phi_plus
            || rr.phi_minus != s.phi_minus
            || rr.params != s.params
        {
            f.push("reflection is not an involution".into());
            break;
        }
    }

    // Products of series terms against schoolbook polynomial multiplication.
    let terms = &c.table[1].series.terms[..12];
    let mut worst_conv = 0.0_f64;
    for n in 2..=12 {
        let u = convolve_u(terms, n).unwrap();
        for i in 0..g.len() {
            let mut coeffs = vec![0.0; 2 * terms.len() + 1];
            for (a, ta) in terms.iter().enumerate() {
                for (b, tb) in terms.iter().enumerate() {
                    coeffs[a + b + 2] += ta.e.values()[i] * tb.e.values()[i];
                }
            }
            let scale = coeffs[n].abs().max(1.0);
            worst_conv = worst_conv.max((u.values()[i] - coeffs[n]).abs() / scale);
        }
    }
    if worst_conv > 1e-10 {
        f.push(format!("convolution {worst_conv:.2e}"));
    }

    // Second-order convergence of the box scheme and of the finite-difference oracle.
    let pr = ModelParams::with_delta_j(1.0, 0.6, 1.0 / 3.0, -1.0).unwrap();
    let opts = SolverOptions {
        scheme: Scheme::Box,
        ..SolverOptions::default()
    };
    let fields: Vec<Vec<f64>> = [50, 100, 200]
        .iter()
        .map(|&n| {
            solve_reference(&pr, Grid::new(n).unwrap(), &opts)
                .unwrap()
                .solution
                .e()
                .to_vec()
        })
        .collect();
    let coarse = |v: &[f64]| v.iter().step_by(2).copied().collect::<Vec<_>>();
    let ratio_box =
        max_diff(&fields[0], &coarse(&fields[1])) / max_diff(&fields[1], &coarse(&fields[2]));
    if (ratio_box - 4.0).abs() > 0.4 {
        f.push(format!("box refinement ratio {ratio_box:.3}"));
    }
    let fd_error = |n: usize| {
        let gn = Grid::new(n).unwrap();
        let r = GridFn::from_fn(gn, |x| 1.0 - x * x);
        let exact = solve_linear_bvp(&r, &build_basis(&pr, gn).unwrap()).unwrap();
        let fd = solve_linear_bvp_oracle(&r, &pr).unwrap();
        max_diff(exact.f(), fd.f())
    };
    let ratio_fd = fd_error(200) / fd_error(400);
    if (ratio_fd - 4.0).abs() > 0.4 {
        f.push(format!("finite-difference refinement ratio {ratio_fd:.3}"));
    }
    f
}

fn zero_offset_and_first_order() -> Vec<String> {
    let mut f = vec![];
    let g = Grid::default();
    for (nu, tau_plus, c0) in [(0.1, 0.6, 1.0 / 3.0), (2.0, 0.9, 0.2), (10.0, 0.3, 0.45)] {
        let p = ModelParams::with_delta_j(nu, tau_plus, c0, 0.0).unwrap();
        let tag = format!("nu={nu}, tau_plus={tau_plus}, c0={c0}");
        let planck = planck_solution(&p, g).unwrap();
        let check = |what: &str, s: &FieldSolution, f: &mut Vec<String>| {
            let res = residual(&p, s).unwrap();
            if s.field.max_abs() != 0.0 || res > 1e-12 || s.class != Some(SolutionClass::C) {
                f.push(format!(
                    "{tag}, {what}: max|E| {}, residual {res:.2e}",
                    s.field.max_abs()
                ));
            }
            if max_diff(s.c_plus.values(), planck.c_plus.values()) > 1e-12 {
                f.push(format!("{tag}, {what}: not the Planck profile"));
            }
        };
        let r = solve_reference(&p, g, &SolverOptions::default()).unwrap();
        check("reference", &r.solution, &mut f);
        let run = run_series(&p, 25, &build_basis(&p, g).unwrap()).unwrap();
        for n in [1, 2, 7, 25] {
            let s = partial_sum_solution(&run, n).unwrap();
            check(&format!("series order {n}"), &s, &mut f);
            let nl = nonlinear_residual(run.partial_sum(n).unwrap(), &p).unwrap();
            if nl > 1e-12 {
                f.push(format!("{tag}: order {n} nonlinear residual {nl:.2e}"));
            }
        }
        let rec = reconstruct(
            &GridFn::with_derivs(g, vec![0.0; g.len()], vec![0.0; g.len()]).unwrap(),
            &p,
        )
        .unwrap();
        check("reconstruction", &rec, &mut f);
    }

    for &(nu, dj, ..) in &TABLE1 {
        let p = ModelParams::with_delta_j(nu, 0.6, 1.0 / 3.0, dj).unwrap();
        let lin = linearized_solution(&p, &build_basis(&p, g).unwrap()).unwrap();
        let plus = p.c0() - p.c1() - p.j0() + p.j();
        let minus = p.c0() - p.c1() + p.j0() - p.j();
        if lin.phi_plus != plus || lin.phi_minus != minus {
            f.push(format!(
                "nu={nu}, dj={dj}: first-order fluxes {} {} vs {plus} {minus}",
                lin.phi_plus, lin.phi_minus
            ));
        }
    }
    f
}

#[test]
fn acceptance() {
    let c = cases();
    let mut gate = Gate::default();
    gate.record("1 table reproduction", table1_reproduction(c));
    gate.record("2 slow convergence", slow_convergence(c));
    gate.record("3 breakdown brackets", breakdown_brackets(c));
    gate.record("4 divergent trace shape", divergent_shape(c));
    gate.record("5 condition Q", reciprocity(c));
    gate.record("6 monotone weights", monotone_weights(c));
    gate.record("7 property suite", property_suite(c));
    gate.record(
        "8 zero offset and first order",
        zero_offset_and_first_order(),
    );
    // Written to the raw handle so the lines show even when output is captured.
    let mut err = std::io::stderr().lock();
    for line in &gate.lines {
        writeln!(err, "{line}").unwrap();
    }
    drop(err);
    assert_eq!(gate.failed, 0, "{}", gate.lines.join("\n"));
}

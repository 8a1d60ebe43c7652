//! `edseries`: reference solves, series runs, parameter sweeps and the
//! benchmark table.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use edseries::analysis::{run_case, weight_search, CaseReport, CaseSetup, Verdict};
use edseries::io::{write_solution_csv, write_term_maxima_csv, write_trace_csv, RunConfig};
use edseries::model::ModelParams;
use edseries::refsolver::solve_reference;
use edseries::series::partial_sum_solution;

#[derive(Parser)]
#[command(
    name = "edseries",
    version,
    about = "Perturbation series for steady two-ion electrodiffusion"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reference solution of the full boundary-value problem.
    Solve(Common),
    /// Series run with error trace, verdict, reciprocity check and weight scan.
    Series(Common),
    /// Every parameter combination in the config, in parallel.
    Sweep(Common),
    /// The six benchmark cases against their published values.
    Table1(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, env = "EDSERIES_OUT", default_value = "out")]
    out: PathBuf,
    /// Grid interval count (overrides the config).
    #[arg(long)]
    grid_n: Option<usize>,
    /// Series order cap (overrides the config).
    #[arg(long)]
    n_max: Option<usize>,
    /// Output formats.
    #[arg(long, value_delimiter = ',', default_value = "csv,json")]
    formats: Vec<Format>,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Orders whose partial-sum solutions are written.
    #[arg(long, value_delimiter = ',')]
    snapshots: Vec<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl Common {
    fn config(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                RunConfig::parse(&text)?
            }
            None => RunConfig::default(),
        };
        if let Some(n) = self.grid_n {
            c.grid_n = n;
        }
        if let Some(n) = self.n_max {
            c.n_max = n;
        }
        if !self.snapshots.is_empty() {
            c.snapshots = self.snapshots.clone();
        }
        c.check()?;
        Ok(c)
    }

    fn csv(&self) -> bool {
        self.formats.contains(&Format::Csv)
    }

    fn json(&self) -> bool {
        self.formats.contains(&Format::Json)
    }

    fn setup(&self, c: &RunConfig) -> Result<CaseSetup> {
        Ok(CaseSetup {
            grid: c.grid()?,
            n_max: c.n_max,
            solver: c.solver,
        })
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SolveSummary {
    params: ModelParams,
    class: Option<edseries::SolutionClass>,
    phi_plus: f64,
    phi_minus: f64,
    nu_e_max_sq: f64,
    newton_iterations: usize,
    final_residual_norm: f64,
    continuation_steps: usize,
    warnings: Vec<String>,
}

fn cmd_solve(args: &Common) -> Result<()> {
    let c = args.config()?;
    let p = c.single()?;
    let r = solve_reference(&p, c.grid()?, &c.solver)?;
    let s = &r.solution;
    if args.csv() {
        let mut w = create(&args.out, "solution.csv")?;
        write_solution_csv(s, &mut w)?;
        w.flush()?;
    }
    if args.json() {
        write_json(
            &args.out,
            "solution.json",
            &SolveSummary {
                params: p,
                class: s.class,
                phi_plus: s.phi_plus,
                phi_minus: s.phi_minus,
                nu_e_max_sq: s.nu_e_max_sq,
                newton_iterations: r.newton_iterations,
                final_residual_norm: r.final_residual_norm,
                continuation_steps: r.continuation_steps,
                warnings: s.warnings.clone(),
            },
        )?;
    }
    let class = s
        .class
        .map_or("unclassified".to_string(), |c| c.to_string());
    println!("class {class}");
    println!("phi_plus {:.16e}", s.phi_plus);
    println!("phi_minus {:.16e}", s.phi_minus);
    println!("nu_e_max_sq {:.16e}", s.nu_e_max_sq);
    Ok(())
}

fn report_for(c: &RunConfig, trace: &edseries::analysis::ErrorTrace) -> Result<CaseReport> {
    let mut report = CaseReport::new(trace, &c.weights)?;
    if c.weight_refine {
        let weights = c.refined_weights(&report.monotone_weights);
        report.monotone_weights = weight_search(trace, &weights).monotone_weights;
    }
    Ok(report)
}

fn cmd_series(args: &Common) -> Result<()> {
    let c = args.config()?;
    let p = c.single()?;
    let case = run_case(&p, &args.setup(&c)?)?;
    if args.csv() {
        let mut w = create(&args.out, "reference.csv")?;
        write_solution_csv(&case.reference.solution, &mut w)?;
        w.flush()?;
        let mut w = create(&args.out, "trace.csv")?;
        write_trace_csv(&case.trace, &mut w)?;
        w.flush()?;
        let mut w = create(&args.out, "terms.csv")?;
        write_term_maxima_csv(&case.series, &mut w)?;
        w.flush()?;
        for &n in &c.snapshots {
            if n > case.series.order() {
                eprintln!(
                    "snapshot {n} skipped: the run stopped at order {}",
                    case.series.order()
                );
                continue;
            }
            let s = partial_sum_solution(&case.series, n)?;
            let mut w = create(&args.out, &format!("snapshot_{n:03}.csv"))?;
            write_solution_csv(&s, &mut w)?;
            w.flush()?;
        }
    }
    let report = report_for(&c, &case.trace)?;
    if args.json() {
        write_json(&args.out, "report.json", &report)?;
    }
    print_report(&report);
    Ok(())
}

fn opt(v: Option<usize>) -> String {
    v.map_or("-".into(), |n| n.to_string())
}

fn print_report(r: &CaseReport) {
    let class = r.class.map_or("?".to_string(), |c| c.to_string());
    println!(
        "nu={} tau_plus={} c0={} delta_j={}: class {class}, nu_e_max_sq {:.4}, delta_1 {:.4}, n3 {}, n7 {}, {}, condition Q {}, monotone weights {:?}",
        r.params.nu(),
        r.params.tau_plus(),
        r.params.c0(),
        r.params.delta_j(),
        r.nu_e_max_sq,
        r.delta_1,
        opt(r.n3),
        opt(r.n7),
        r.verdict,
        if r.condition_q.holds { "holds" } else { "fails" },
        r.monotone_weights
    );
}

#[derive(Serialize)]
#[serde(untagged)]
enum SweepLine {
    Ok(Box<CaseReport>),
    Failed { params: ModelParams, error: String },
}

/// Divergence onset along one (nu, tau_plus, c0) slice and current sign.
#[derive(Serialize)]
struct Bracket {
    nu: f64,
    tau_plus: f64,
    c0: f64,
    direction: &'static str,
    /// Largest |delta_j| before the first diverging case.
    last_non_diverging: Option<f64>,
    first_diverging: Option<f64>,
}

/// Bit patterns of (nu, tau_plus, c0) and the current sign.
type SliceKey = (u64, u64, u64, bool);

fn brackets(lines: &[SweepLine]) -> Vec<Bracket> {
    let mut slices: BTreeMap<SliceKey, Vec<(f64, bool)>> = BTreeMap::new();
    for line in lines {
        if let SweepLine::Ok(r) = line {
            let p = r.params;
            let key = (
                p.nu().to_bits(),
                p.tau_plus().to_bits(),
                p.c0().to_bits(),
                p.delta_j() >= 0.0,
            );
            slices
                .entry(key)
                .or_default()
                .push((p.delta_j(), r.verdict == Verdict::ApparentlyDiverging));
        }
    }
    slices
        .into_iter()
        .map(|((nu, tp, c0, up), mut v)| {
            v.sort_by(|a, b| a.0.abs().total_cmp(&b.0.abs()));
            let first = v.iter().position(|&(_, d)| d);
            let (last_ok, first_div) = match first {
                Some(i) => (i.checked_sub(1).map(|k| v[k].0), Some(v[i].0)),
                None => (v.last().map(|x| x.0), None),
            };
            Bracket {
                nu: f64::from_bits(nu),
                tau_plus: f64::from_bits(tp),
                c0: f64::from_bits(c0),
                direction: if up { "positive" } else { "negative" },
                last_non_diverging: last_ok,
                first_diverging: first_div,
            }
        })
        .collect()
}

fn cmd_sweep(args: &Common) -> Result<()> {
    let c = args.config()?;
    let cases = c.cases()?;
    let setup = args.setup(&c)?;
    println!("{} cases", cases.len());
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = args.jobs {
        pool = pool.num_threads(j);
    }
    let pool = pool.build()?;
    let want_csv = args.csv();
    let out = args.out.clone();
    let lines: Vec<SweepLine> = pool.install(|| {
        cases
            .par_iter()
            .enumerate()
            .map(|(k, p)| {
                let result = run_case(p, &setup)
                    .map_err(anyhow::Error::from)
                    .and_then(|case| {
                        if want_csv {
                            let mut w = create(&out.join("traces"), &format!("case_{k:04}.csv"))?;
                            write_trace_csv(&case.trace, &mut w)?;
                            w.flush()?;
                        }
                        report_for(&c, &case.trace)
                    });
                match result {
                    Ok(r) => SweepLine::Ok(Box::new(r)),
                    Err(e) => SweepLine::Failed {
                        params: *p,
                        error: format!("{e:#}"),
                    },
                }
            })
            .collect()
    });

    let mut w = create(&args.out, "sweep.jsonl")?;
    for line in &lines {
        serde_json::to_writer(&mut w, line)?;
        writeln!(w)?;
    }
    w.flush()?;
    let br = brackets(&lines);
    if args.json() {
        write_json(&args.out, "brackets.json", &br)?;
    }
    let mut failed = 0;
    for line in &lines {
        match line {
            SweepLine::Ok(r) => print_report(r),
            SweepLine::Failed { params, error } => {
                failed += 1;
                eprintln!(
                    "nu={} tau_plus={} c0={} delta_j={}: {error}",
                    params.nu(),
                    params.tau_plus(),
                    params.c0(),
                    params.delta_j()
                );
            }
        }
    }
    for b in &br {
        println!(
            "nu={} tau_plus={} c0={} ({}): last non-diverging {:?}, first diverging {:?}",
            b.nu, b.tau_plus, b.c0, b.direction, b.last_non_diverging, b.first_diverging
        );
    }
    if failed > 0 {
        bail!("{failed} of {} cases failed", lines.len());
    }
    Ok(())
}

/// (nu, delta_j, nu_e_max_sq, delta_1, n3, n7, class) for the benchmark cases,
/// all with tau_plus = 0.6 and c0 = 1/3.
const TABLE1: [(f64, f64, f64, f64, usize, usize, &str); 6] = [
    (0.1, -0.5, 0.13, 0.013, 2, 7, "B"),
    (0.5, 1.5, 5.2, 0.13, 6, 21, "A"),
    (1.1, -1.0, 4.5, 0.049, 4, 11, "B"),
    (2.5, -2.0, 38.0, 0.16, 11, 42, "B"),
    (3.5, 2.0, 61.0, 0.17, 10, 43, "A"),
    (10.0, 1.0, 42.0, 0.044, 3, 12, "A"),
];

#[derive(Serialize)]
struct Table1Row {
    nu: f64,
    delta_j: f64,
    published: (f64, f64, usize, usize, &'static str),
    computed: CaseReport,
}

fn cmd_table1(args: &Common) -> Result<()> {
    let c = args.config()?;
    let setup = args.setup(&c)?;
    let rows: Vec<Result<Table1Row>> = TABLE1
        .par_iter()
        .map(|&(nu, dj, e2, d1, n3, n7, class)| {
            let p = ModelParams::with_delta_j(nu, 0.6, 1.0 / 3.0, dj)?;
            let case = run_case(&p, &setup)?;
            Ok(Table1Row {
                nu,
                delta_j: dj,
                published: (e2, d1, n3, n7, class),
                computed: report_for(&c, &case.trace)?,
            })
        })
        .collect();
    let rows: Vec<Table1Row> = rows.into_iter().collect::<Result<_>>()?;

    let mut table = String::new();
    table.push_str("nu,delta_j,nu_e_max_sq_published,nu_e_max_sq,delta_1_published,delta_1,n3_published,n3,n7_published,n7,class_published,class\n");
    for r in &rows {
        let (e2, d1, n3, n7, class) = r.published;
        let k = &r.computed;
        table.push_str(&format!(
            "{},{},{},{:.16e},{},{:.16e},{},{},{},{},{},{}\n",
            r.nu,
            r.delta_j,
            e2,
            k.nu_e_max_sq,
            d1,
            k.delta_1,
            n3,
            opt(k.n3),
            n7,
            opt(k.n7),
            class,
            k.class.map_or("?".into(), |c| c.to_string())
        ));
    }
    if args.csv() {
        let mut w = create(&args.out, "table1.csv")?;
        w.write_all(table.as_bytes())?;
        w.flush()?;
    }
    if args.json() {
        write_json(&args.out, "table1.json", &rows)?;
    }
    println!(
        "{:>5} {:>6} | {:>12} | {:>14} | {:>7} | {:>7} | {:>5}",
        "nu", "dj", "nuE^2 pub/run", "D1 pub/run", "n3", "n7", "class"
    );
    for r in &rows {
        let (e2, d1, n3, n7, class) = r.published;
        let k = &r.computed;
        println!(
            "{:>5} {:>6} | {:>5} {:>6.2} | {:>6} {:>7.4} | {:>3} {:>3} | {:>3} {:>3} | {} {}",
            r.nu,
            r.delta_j,
            e2,
            k.nu_e_max_sq,
            d1,
            k.delta_1,
            n3,
            opt(k.n3),
            n7,
            opt(k.n7),
            class,
            k.class.map_or("?".into(), |c| c.to_string())
        );
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Series(a) => cmd_series(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Table1(a) => cmd_table1(a),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

use std::fs;
use std::io::BufReader;
use std::path::Path;
use std::process::{Command, Output};

use edseries::io::read_solution_csv;
use edseries::SolutionClass;

fn edseries(args: &[&str], config: &str, out: &Path) -> Output {
    fs::create_dir_all(out).unwrap();
    let cfg = out.join("run.cfg");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_edseries"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn zero_offset_solve_is_class_c() {
    let dir = tempfile::tempdir().unwrap();
    let o = edseries(
        &["solve"],
        "nu = 1.0\ntau_plus = 0.6\nc0 = 0.3333333333333333\ndelta_j = 0\n",
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("class C"), "{}", stdout(&o));
    let s = read_solution_csv(BufReader::new(
        fs::File::open(dir.path().join("solution.csv")).unwrap(),
    ))
    .unwrap();
    assert_eq!(s.class, Some(SolutionClass::C));
    assert_eq!(s.field.max_abs(), 0.0);
}

#[test]
fn solution_csv_round_trips_and_conserves_first_integral() {
    let dir = tempfile::tempdir().unwrap();
    let o = edseries(
        &["solve", "--grid-n", "400"],
        "nu = 0.5\ntau_plus = 0.6\nc0 = 0.3333333333333333\ndelta_j = 1.5\n",
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("class A"), "{}", stdout(&o));
    let s = read_solution_csv(BufReader::new(
        fs::File::open(dir.path().join("solution.csv")).unwrap(),
    ))
    .unwrap();
    assert_eq!(s.grid().n_intervals(), 400);
    assert_eq!(s.class, Some(SolutionClass::A));
    assert!(
        s.first_integral_defect() <= 1e-8,
        "{}",
        s.first_integral_defect()
    );
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("solution.json")).unwrap())
            .unwrap();
    assert_eq!(summary["phi_plus"].as_f64().unwrap(), s.phi_plus);
}

#[test]
fn invalid_transference_number_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = edseries(
        &["solve"],
        "nu = 1.0\ntau_plus = 1.2\nc0 = 0.3\ndelta_j = 0.5\n",
        dir.path(),
    );
    assert!(!o.status.success());
    assert!(stderr(&o).contains("tau_plus"), "{}", stderr(&o));
    assert!(!dir.path().join("solution.csv").exists());
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = edseries(&["solve"], "nu = 1.0\nmu = 2\n", dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("mu"), "{}", stderr(&o));
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file() && p.file_name().unwrap() != "run.cfg")
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn series_outputs_are_deterministic() {
    let cfg =
        "nu = 0.1\ntau_plus = 0.6\nc0 = 0.3333333333333333\ndelta_j = -0.5\nsnapshots = 1,5\n";
    let args = ["series", "--grid-n", "200", "--n-max", "40"];
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let oa = edseries(&args, cfg, a.path());
    let ob = edseries(&args, cfg, b.path());
    assert!(oa.status.success(), "{}", stderr(&oa));
    assert_eq!(stdout(&oa), stdout(&ob));
    let fa = read_all(a.path());
    let names: Vec<&str> = fa.iter().map(|f| f.0.as_str()).collect();
    assert_eq!(
        names,
        [
            "reference.csv",
            "report.json",
            "snapshot_001.csv",
            "snapshot_005.csv",
            "terms.csv",
            "trace.csv"
        ]
    );
    assert_eq!(fa, read_all(b.path()));

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["verdict"], "apparently_converged");
    assert_eq!(report["class"], "B");
    let trace = fs::read_to_string(a.path().join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 41);
}

#[test]
fn sweep_order_does_not_depend_on_thread_count() {
    let cfg = "nu = 0.5, 1.0\ntau_plus = 0.6\nc0 = 0.3333333333333333\ndelta_j = -1:1:1\n";
    let args = ["sweep", "--grid-n", "100", "--n-max", "30"];
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let oa = edseries(&[&args[..], &["--jobs", "1"]].concat(), cfg, a.path());
    let ob = edseries(&[&args[..], &["--jobs", "4"]].concat(), cfg, b.path());
    assert!(ob.status.success(), "{}", stderr(&ob));
    assert!(oa.status.success(), "{}", stderr(&oa));
    assert!(stdout(&oa).starts_with("6 cases"), "{}", stdout(&oa));
    let la = fs::read_to_string(a.path().join("sweep.jsonl")).unwrap();
    assert_eq!(
        la,
        fs::read_to_string(b.path().join("sweep.jsonl")).unwrap()
    );
    assert_eq!(la.lines().count(), 6);
    let first: serde_json::Value = serde_json::from_str(la.lines().next().unwrap()).unwrap();
    assert_eq!(first["params"]["nu"], 0.5);
    assert_eq!(first["params"]["delta_j"], -1.0);
    let zero: serde_json::Value = serde_json::from_str(la.lines().nth(1).unwrap()).unwrap();
    assert_eq!(zero["class"], "C");
}

#[test]
fn empty_sweep_writes_empty_results() {
    let dir = tempfile::tempdir().unwrap();
    let o = edseries(&["sweep"], "", dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("0 cases"));
    assert_eq!(
        fs::read_to_string(dir.path().join("sweep.jsonl")).unwrap(),
        ""
    );
}

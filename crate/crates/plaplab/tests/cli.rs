//! End-to-end tests of the command-line binary: output rows, exit codes,
//! artifact layout, and rerun reproducibility.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::atomic::{AtomicU32, Ordering};

use plaplab::grid::Field;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_plaplab"))
}

fn temp_dir(tag: &str) -> PathBuf {
    static COUNTER: AtomicU32 = AtomicU32::new(0);
    let dir = std::env::temp_dir().join(format!(
        "plaplab-cli-{tag}-{}-{}",
        std::process::id(),
        COUNTER.fetch_add(1, Ordering::Relaxed)
    ));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn blow_config(amplitude: f64) -> String {
    format!(
        "grid.dim = 1\n\
         grid.l = 1\n\
         grid.n = 49\n\
         p = 2\n\
         f = powersum: 1*u^3\n\
         cond.mode = manual\n\
         cond.alpha = 4\n\
         cond.gamma = 0.01\n\
         initial.kind = sine\n\
         initial.amplitude = {amplitude}\n\
         solver.t_max = 2\n"
    )
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn eig_prints_the_interval_eigenvalue_row() {
    let dir = temp_dir("eig");
    let phi_path = dir.join("phi.csv");
    let out = bin()
        .args(["eig", "--dim", "1", "--L", "1", "--n", "999", "--p", "2"])
        .args(["--phi-out", phi_path.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let text = stdout_of(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "dim,l,ly,n,p,lambda,residual,iterations,converged");
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "1");
    assert_eq!(row[3], "999");
    let lambda: f64 = row[5].parse().unwrap();
    let pi2 = std::f64::consts::PI.powi(2);
    assert!((lambda - pi2).abs() / pi2 <= 1e-3, "lambda = {lambda}");
    assert_eq!(row[8], "true");
    // The eigenfunction file must round-trip through the field reader and
    // carry the sup normalization.
    let phi = Field::read_csv_file(&phi_path).unwrap();
    assert_eq!(phi.grid().n(), 999);
    assert!((phi.sup_norm() - 1.0).abs() <= 1e-12);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn check_quadratic_source_is_satisfied_with_auto_search() {
    let out = bin()
        .args(["check", "--f", "powersum: 1*u^2", "--p", "2", "--cond", "C", "--auto"])
        .args(["--domain", "1:1:999"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    let text = stdout_of(&out);
    let row = text.lines().nth(1).unwrap();
    assert!(row.starts_with("C_p,satisfied,"), "row: {row}");
}

#[test]
fn check_verdict_crosses_at_the_eigenvalue_with_exit_codes() {
    // lambda for p=2 on (0,1) passed explicitly; the crossing sits at a/lambda = 1.
    let lambda = 9.869604401089358;
    for (factor, code, needle) in
        [(0.99, 0, "C_p,satisfied,"), (1.01, 1, "C_p,not-satisfied,")]
    {
        let f = format!("powersum: {}*u^1", factor * lambda);
        let out = bin()
            .args(["check", "--f", &f, "--p", "2", "--cond", "C", "--auto"])
            .args(["--lambda", &lambda.to_string()])
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(code), "factor {factor}: {}", stderr_of(&out));
        let text = stdout_of(&out);
        assert!(text.lines().nth(1).unwrap().starts_with(needle), "factor {factor}: {text}");
    }
}

#[test]
fn check_without_lambda_or_domain_is_a_config_error() {
    let out = bin()
        .args(["check", "--f", "powersum: 1*u^2", "--p", "2", "--cond", "C", "--auto"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("--domain"));
}

#[test]
fn simulate_with_missing_config_exits_2() {
    let out = bin().args(["simulate", "--config", "missing.cfg"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("missing.cfg"));
}

#[test]
fn simulate_writes_artifacts_and_reruns_byte_identically() {
    let dir = temp_dir("sim");
    let cfg = write_config(&dir, "blow.cfg", &blow_config(6.0));
    let (out_a, out_b) = (dir.join("a"), dir.join("b"));

    let mut run_dirs = Vec::new();
    for root in [&out_a, &out_b] {
        let out = bin()
            .args(["simulate", "--config", cfg.to_str().unwrap()])
            .args(["--out", root.to_str().unwrap()])
            .output()
            .unwrap();
        assert!(out.status.success(), "stderr: {}", stderr_of(&out));
        let text = stdout_of(&out);
        let mut lines = text.lines();
        run_dirs.push(PathBuf::from(lines.next().unwrap()));
        assert_eq!(lines.next().unwrap(), "outcome = blown_up");
    }
    // Same config hash on both sides, and every artifact byte-identical.
    assert_eq!(
        run_dirs[0].file_name().unwrap(),
        run_dirs[1].file_name().unwrap(),
        "run directory name must depend only on the config"
    );
    for name in ["config.cfg", "u0.csv", "final.csv", "run.csv", "events.csv", "summary.csv"] {
        let a = std::fs::read(run_dirs[0].join(name)).unwrap();
        let b = std::fs::read(run_dirs[1].join(name)).unwrap();
        assert!(!a.is_empty(), "{name} is empty");
        assert_eq!(a, b, "{name} differs between identical runs");
    }
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn plap_out_env_sets_the_default_output_root() {
    let dir = temp_dir("env");
    let cfg = write_config(&dir, "blow.cfg", &blow_config(6.0));
    let root = dir.join("from-env");
    let out = bin()
        .args(["simulate", "--config", cfg.to_str().unwrap()])
        .env("PLAP_OUT", root.to_str().unwrap())
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let text = stdout_of(&out);
    let run_dir = PathBuf::from(text.lines().next().unwrap());
    assert!(run_dir.starts_with(&root), "run dir {run_dir:?} not under {root:?}");
    assert!(run_dir.join("summary.csv").exists());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn report_adds_the_functional_series() {
    let dir = temp_dir("report");
    let cfg = write_config(&dir, "blow.cfg", &blow_config(6.0));
    let out = bin()
        .args(["report", "--config", cfg.to_str().unwrap()])
        .args(["--out", dir.join("out").to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let text = stdout_of(&out);
    let run_dir = PathBuf::from(text.lines().next().unwrap());
    let report = std::fs::read_to_string(run_dir.join("report.csv")).unwrap();
    let mut lines = report.lines();
    assert_eq!(lines.next().unwrap(), "t,supnorm,J,I,Iprime,Idoubleprime,H,residual");
    assert!(lines.count() >= 2, "report must carry the sampled series");
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn bound_prints_the_row_or_exits_3_when_j0_is_not_positive() {
    let dir = temp_dir("bound");
    let good = write_config(&dir, "good.cfg", &blow_config(6.0));
    let out = bin().args(["bound", "--config", good.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    let text = stdout_of(&out);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "j0,u0_l2sq,alpha,sigma,m,tstar_upper,m_alt,tstar_upper_alt"
    );
    let row: Vec<f64> =
        lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!(row[0] > 0.0, "j0 must be positive here");
    assert!(row[5] > 0.0 && row[5] < 2.0, "tstar_upper = {}", row[5]);

    // Amplitude 4 has negative initial energy: no bound applies.
    let bad = write_config(&dir, "bad.cfg", &blow_config(4.0));
    let out = bin().args(["bound", "--config", bad.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr_of(&out).contains("not positive"), "stderr: {}", stderr_of(&out));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn sweep_over_amplitude_changes_j0_sign_exactly_once() {
    let dir = temp_dir("sweep");
    let cfg = write_config(&dir, "blow.cfg", &blow_config(6.0));
    let out = bin()
        .args(["sweep", "--config", cfg.to_str().unwrap()])
        .args(["--axis", "initial.amplitude=1,2,3,4,5,6,7,8,9,10"])
        .args(["--workers", "4"])
        .args(["--out", dir.join("out").to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let path = PathBuf::from(stdout_of(&out).trim());
    let csv = std::fs::read_to_string(&path).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "initial.amplitude,condition,outcome,t_num,tstar_upper,j0,min_h,error"
    );
    let rows: Vec<Vec<String>> =
        lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    assert_eq!(rows.len(), 10);
    let signs: Vec<bool> = rows.iter().map(|r| r[5].parse::<f64>().unwrap() > 0.0).collect();
    let flips = signs.windows(2).filter(|w| w[0] != w[1]).count();
    assert_eq!(flips, 1, "J(0) sign pattern {signs:?}");
    assert!(!signs[4] && signs[5], "sign change must sit between amplitudes 5 and 6");
    // Past the crossing every run blows up and respects its bound.
    for r in rows.iter().skip(5) {
        assert_eq!(r[2], "blown_up");
        let t_num: f64 = r[3].parse().unwrap();
        let tstar: f64 = r[4].parse().unwrap();
        assert!(t_num <= 1.05 * tstar, "t_num {t_num} vs bound {tstar}");
    }
    std::fs::remove_dir_all(&dir).unwrap();
}

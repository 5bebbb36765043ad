//! Cartesian parameter sweeps over config keys, run on a bounded worker
//! pool with deterministic row order.
//!
//! Each combination overrides keys of the base config through the same
//! text path as config parsing, so an axis can target any config field.
//! Workers pull combination indices from a shared counter and write into
//! per-index slots; the output order therefore depends only on the axis
//! definition, never on scheduling. Per-run failures land in the row's
//! error column and the sweep continues.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::config::ExperimentConfig;
use crate::experiment::{outcome_label, prepare};
use crate::functionals::concavity_series;
use crate::solver::{run, Outcome};
use crate::util::fmt17;
use crate::{Error, Result};

/// Largest allowed cartesian product.
pub const SWEEP_CAP: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    pub key: String,
    pub values: Vec<String>,
}

impl SweepAxis {
    /// Parses `key=v1,v2,v3`.
    pub fn parse(s: &str) -> Result<Self> {
        let (key, rest) = s
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("axis {s:?} must look like key=v1,v2")))?;
        let key = key.trim().to_string();
        let values: Vec<String> =
            rest.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
        if key.is_empty() || values.is_empty() {
            return Err(Error::Config(format!("axis {s:?} needs a key and at least one value")));
        }
        Ok(SweepAxis { key, values })
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub base: ExperimentConfig,
    pub axes: Vec<SweepAxis>,
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub assignment: Vec<(String, String)>,
    pub cond_verdict: Option<String>,
    pub outcome: Option<String>,
    pub t_num: Option<f64>,
    pub tstar_upper: Option<f64>,
    pub j0: Option<f64>,
    pub min_h: Option<f64>,
    pub error: Option<String>,
}

/// All key assignments in deterministic order: earlier axes vary slowest.
/// An empty axis list yields the single empty assignment (one base run).
pub fn expand(spec: &SweepSpec) -> Result<Vec<Vec<(String, String)>>> {
    let mut seen = std::collections::BTreeSet::new();
    for ax in &spec.axes {
        if !seen.insert(&ax.key) {
            return Err(Error::Config(format!("axis key {:?} given twice", ax.key)));
        }
        if ax.values.is_empty() {
            return Err(Error::Config(format!("axis {:?} has no values", ax.key)));
        }
    }
    let total: usize = spec.axes.iter().map(|a| a.values.len()).product();
    if total > SWEEP_CAP {
        return Err(Error::Config(format!(
            "sweep size {total} exceeds the cap of {SWEEP_CAP} runs"
        )));
    }
    let mut combos: Vec<Vec<(String, String)>> = vec![Vec::new()];
    for ax in &spec.axes {
        let mut next = Vec::with_capacity(combos.len() * ax.values.len());
        for combo in &combos {
            for v in &ax.values {
                let mut c = combo.clone();
                c.push((ax.key.clone(), v.clone()));
                next.push(c);
            }
        }
        combos = next;
    }
    Ok(combos)
}

fn run_one(base: &ExperimentConfig, assignment: &[(String, String)], base_dir: &Path) -> SweepRow {
    let mut row = SweepRow {
        assignment: assignment.to_vec(),
        cond_verdict: None,
        outcome: None,
        t_num: None,
        tstar_upper: None,
        j0: None,
        min_h: None,
        error: None,
    };
    let result = (|| -> Result<()> {
        let mut cfg = base.clone();
        for (k, v) in assignment {
            cfg = cfg.with_override(k, v)?;
        }
        let prep = prepare(&cfg, base_dir)?;
        row.cond_verdict = Some(prep.cond_report.verdict.to_string());
        row.j0 = Some(prep.j0);
        row.tstar_upper = prep.bound.as_ref().map(|b| b.tstar_upper);
        let traj = run(&prep.u0, &prep.source, prep.p, &cfg.solver)?;
        row.outcome = Some(outcome_label(&traj.outcome).to_string());
        if let Outcome::BlownUp { t_num, .. } = traj.outcome {
            row.t_num = Some(t_num);
        }
        if let Some(b) = &prep.bound {
            let recs = concavity_series(&traj, &prep.source, prep.p, prep.cond_params.alpha, b.m)?;
            row.min_h = Some(recs.iter().map(|r| r.h).fold(f64::INFINITY, f64::min));
        }
        Ok(())
    })();
    if let Err(e) = result {
        row.error = Some(e.to_string());
    }
    row
}

/// Runs every combination on up to `workers` threads. Rows come back in
/// expansion order regardless of scheduling.
pub fn run_sweep(spec: &SweepSpec, base_dir: &Path, workers: usize) -> Result<Vec<SweepRow>> {
    let combos = expand(spec)?;
    let n = combos.len();
    let slots: Vec<Mutex<Option<SweepRow>>> = (0..n).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let nworkers = workers.max(1).min(n.max(1));
    std::thread::scope(|s| {
        for _ in 0..nworkers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let row = run_one(&spec.base, &combos[i], base_dir);
                *slots[i].lock().expect("sweep slot poisoned") = Some(row);
            });
        }
    });
    Ok(slots
        .into_iter()
        .map(|m| m.into_inner().expect("sweep slot poisoned").expect("every index was dispatched"))
        .collect())
}

/// One header plus one line per row: axis columns in axis order, then the
/// fixed result columns. Commas inside error messages become semicolons to
/// keep the column count stable.
pub fn sweep_csv(spec: &SweepSpec, rows: &[SweepRow]) -> String {
    let mut cols: Vec<String> = spec.axes.iter().map(|a| a.key.clone()).collect();
    cols.extend(
        ["condition", "outcome", "t_num", "tstar_upper", "j0", "min_h", "error"]
            .map(String::from),
    );
    let mut out = cols.join(",");
    out.push('\n');
    let opt_f = |v: Option<f64>| v.map(fmt17).unwrap_or_else(|| "nan".into());
    for row in rows {
        let mut fields: Vec<String> = row.assignment.iter().map(|(_, v)| v.clone()).collect();
        fields.push(row.cond_verdict.clone().unwrap_or_else(|| "nan".into()));
        fields.push(row.outcome.clone().unwrap_or_else(|| "nan".into()));
        fields.push(opt_f(row.t_num));
        fields.push(opt_f(row.tstar_upper));
        fields.push(opt_f(row.j0));
        fields.push(opt_f(row.min_h));
        fields.push(row.error.clone().unwrap_or_default().replace(',', ";"));
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

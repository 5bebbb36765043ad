//! Orchestration of a single experiment: resolve the configuration into a
//! grid, source, initial field, condition parameters, and blow-up bound,
//! run the solver, and write the run directory.
//!
//! The eigenpair is solved once per experiment and shared by everything
//! that needs it: eigenvalue-scaled sources, eigenfunction initial data,
//! the beta admissibility bound, and the automatic condition search.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::conditions::{
    check_condition, ConditionParams, ConditionReport, ConditionTag, SAMPLES_DEFAULT,
    U_RANGE_DEFAULT,
};
use crate::config::{CondMode, ExperimentConfig, InitialSpec};
use crate::eigen::{first_eigenpair, EigenResult, Normalization, EIGEN_MAX_ITER_DEFAULT, EIGEN_TOL_DEFAULT};
use crate::functionals::{choose_m, concavity_series, energy_series, eval_j, BlowupBound};
use crate::grid::{Field, Grid};
use crate::plap::PExponent;
use crate::solver::{run, Outcome, Trajectory};
use crate::source::SourceTerm;
use crate::util::fmt17;
use crate::{Error, Result};

/// Gamma values tried by the automatic condition search, smallest first.
const AUTO_GAMMAS: [f64; 5] = [0.0, 0.01, 0.1, 1.0, 10.0];
/// Epsilon values (alpha = p + eps) tried per gamma, smallest first.
const AUTO_EPS: [f64; 8] = [0.1, 0.25, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0];

/// Everything derived from a config short of running the solver.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: ExperimentConfig,
    pub grid: Arc<Grid>,
    pub p: PExponent,
    pub source: SourceTerm,
    pub u0: Field,
    pub eigen: EigenResult,
    pub cond_tag: ConditionTag,
    pub cond_params: ConditionParams,
    pub cond_report: ConditionReport,
    pub j0: f64,
    /// Absent when J(0) <= 0 (no bound applies).
    pub bound: Option<BlowupBound>,
}

/// Smallest gamma, then smallest eps, with beta at its admissible maximum,
/// for which (C_p) holds for this source; falls back to the last attempt's
/// report when nothing passes.
pub fn auto_condition(
    source: &SourceTerm,
    p: f64,
    lambda1p: f64,
) -> Result<(ConditionParams, ConditionReport)> {
    let mut last = None;
    for &gamma in &AUTO_GAMMAS {
        for &eps in &AUTO_EPS {
            let probe = ConditionParams::for_a(p, eps, lambda1p);
            let params = ConditionParams::for_c(p, eps, probe.beta_max(), gamma, lambda1p);
            let report = check_condition(source, &params, ConditionTag::C, U_RANGE_DEFAULT, SAMPLES_DEFAULT)?;
            if report.passed() {
                return Ok((params, report));
            }
            last = Some((params, report));
        }
    }
    Ok(last.expect("the search grids are nonempty"))
}

pub fn prepare(config: &ExperimentConfig, base_dir: &Path) -> Result<Prepared> {
    let grid = config.build_grid()?;
    let p = PExponent::new(config.p)?;
    let eigen = first_eigenpair(&grid, p, Normalization::PMass, EIGEN_TOL_DEFAULT, EIGEN_MAX_ITER_DEFAULT)?;
    if !eigen.converged {
        return Err(Error::Numerical(format!(
            "eigensolver did not converge (residual {:.3e} after {} iterations)",
            eigen.residual, eigen.iterations
        )));
    }
    let source = config.source.resolve(config.p, Some(eigen.lambda), base_dir)?;

    let u0 = match &config.initial {
        InitialSpec::Eigenfunction { amplitude, normalization } => {
            let phi = match normalization {
                Normalization::PMass => eigen.phi.clone(),
                Normalization::SupOne => eigen.phi.scaled(1.0 / eigen.phi.sup_norm()),
            };
            phi.scaled(*amplitude)
        }
        InitialSpec::Sine { amplitude } => {
            let (c, lx, ly, dim) = (*amplitude, config.lengths[0], config.lengths[1], config.dim);
            Field::from_profile(&grid, move |x, y| {
                let base = (std::f64::consts::PI * x / lx).sin();
                if dim == 1 {
                    c * base
                } else {
                    c * base * (std::f64::consts::PI * y / ly).sin()
                }
            })
        }
        InitialSpec::File { path } => {
            let field = Field::read_csv_file(&base_dir.join(path))?;
            let fg = field.grid();
            let compatible = fg.dim() == grid.dim()
                && fg.n() == grid.n()
                && (fg.len_x() - grid.len_x()).abs() <= 1e-9 * grid.len_x()
                && (grid.dim() == 1 || (fg.len_y() - grid.len_y()).abs() <= 1e-9 * grid.len_y());
            if !compatible {
                return Err(Error::Config(format!(
                    "initial field grid ({}d, n={}) does not match the configured grid ({}d, n={})",
                    fg.dim(),
                    fg.n(),
                    grid.dim(),
                    grid.n()
                )));
            }
            Field::from_values(&grid, field.values().to_vec())?
        }
    };
    if u0.min_value() < 0.0 {
        return Err(Error::InvalidParam("initial data must be nonnegative".into()));
    }

    let (cond_tag, cond_params, cond_report) = match config.cond {
        CondMode::Auto => {
            let (params, report) = auto_condition(&source, config.p, eigen.lambda)?;
            (ConditionTag::C, params, report)
        }
        CondMode::Manual { alpha, beta, gamma } => {
            let tag = if alpha > config.p {
                ConditionTag::C
            } else if alpha == config.p {
                ConditionTag::CPrime
            } else {
                return Err(Error::Config(format!("cond.alpha = {alpha} must be >= p = {}", config.p)));
            };
            let params = ConditionParams { p: config.p, alpha, beta, gamma, lambda1p: eigen.lambda };
            params.validate_for(tag)?;
            let report = check_condition(&source, &params, tag, U_RANGE_DEFAULT, SAMPLES_DEFAULT)?;
            (tag, params, report)
        }
    };

    let j0 = eval_j(&u0, &source, p, cond_params.gamma)?;
    let bound = match choose_m(&u0, &source, p, cond_params.gamma, cond_params.alpha) {
        Ok(b) => Some(b),
        Err(Error::NoBound(_)) => None,
        Err(e) => return Err(e),
    };

    Ok(Prepared {
        config: config.clone(),
        grid,
        p,
        source,
        u0,
        eigen,
        cond_tag,
        cond_params,
        cond_report,
        j0,
        bound,
    })
}

pub fn outcome_label(o: &Outcome) -> &'static str {
    match o {
        Outcome::BlownUp { .. } => "blown_up",
        Outcome::Completed => "completed",
        Outcome::Decayed => "decayed",
        Outcome::DtUnderflow { .. } => "dt_underflow",
    }
}

#[derive(Debug)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub trajectory: Trajectory,
    pub t_num: Option<f64>,
    /// Smallest concavity H over the run, when a bound (and hence an M)
    /// exists.
    pub min_h: Option<f64>,
}

/// Runs the solver and writes the run directory
/// (`<out_root>/run-<confighash>/`): config.cfg, u0.csv, final.csv,
/// run.csv, events.csv, summary.csv, and optionally report.csv with the
/// functional series.
pub fn simulate_to_dir(prep: &Prepared, out_root: &Path, with_report: bool) -> Result<RunArtifacts> {
    let traj = run(&prep.u0, &prep.source, prep.p, &prep.config.solver)?;
    let gamma = prep.cond_params.gamma;
    let energies = energy_series(&traj, &prep.source, prep.p, gamma)?;
    let concavity = match &prep.bound {
        Some(b) => Some(concavity_series(&traj, &prep.source, prep.p, prep.cond_params.alpha, b.m)?),
        None => None,
    };
    let min_h = concavity
        .as_ref()
        .map(|recs| recs.iter().map(|r| r.h).fold(f64::INFINITY, f64::min));

    let dir = out_root.join(prep.config.run_dir_name());
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("config.cfg"), prep.config.emit())?;
    prep.u0.write_csv_file(&dir.join("u0.csv"))?;
    traj.final_snapshot().field.write_csv_file(&dir.join("final.csv"))?;

    let mut run_csv = String::from("t,supnorm,l2sq,cum_ut2\n");
    for s in &traj.snapshots {
        run_csv.push_str(&format!(
            "{},{},{},{}\n",
            fmt17(s.t),
            fmt17(s.field.sup_norm()),
            fmt17(s.field.integrate_power(2.0)),
            fmt17(s.cum_ut2)
        ));
    }
    std::fs::write(dir.join("run.csv"), run_csv)?;

    let mut events_csv = String::from("t,tag\n");
    for e in &traj.events {
        events_csv.push_str(&format!("{},{}\n", fmt17(e.t), e.tag));
    }
    std::fs::write(dir.join("events.csv"), events_csv)?;

    let t_num = match traj.outcome {
        Outcome::BlownUp { t_num, .. } => Some(t_num),
        _ => None,
    };
    std::fs::write(dir.join("summary.csv"), summary_csv(prep, &traj, min_h))?;

    if with_report {
        let mut report = String::from("t,supnorm,J,I,Iprime,Idoubleprime,H,residual\n");
        let j0 = energies.first().map(|r| r.j).unwrap_or(f64::NAN);
        for (k, e) in energies.iter().enumerate() {
            let (i, ip, ipp, h) = match &concavity {
                Some(recs) => {
                    let r = &recs[k];
                    (r.i, r.iprime, r.idoubleprime, r.h)
                }
                None => (f64::NAN, f64::NAN, f64::NAN, f64::NAN),
            };
            report.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                fmt17(e.t),
                fmt17(traj.snapshots[k].field.sup_norm()),
                fmt17(e.j),
                fmt17(i),
                fmt17(ip),
                fmt17(ipp),
                fmt17(h),
                fmt17(e.j - j0 - e.cumulative_ut2)
            ));
        }
        std::fs::write(dir.join("report.csv"), report)?;
    }

    Ok(RunArtifacts { dir, trajectory: traj, t_num, min_h })
}

pub const SUMMARY_HEADER: &str = "outcome,t_num,low_confidence,final_t,final_sup,steps,clipped_nodes,\
lambda1p,eigen_residual,cond,cond_satisfied,certificate,alpha,beta,gamma,j0,m,sigma,tstar_upper,\
tstar_upper_alt,min_h";

fn summary_csv(prep: &Prepared, traj: &Trajectory, min_h: Option<f64>) -> String {
    let (t_num, low_conf) = match traj.outcome {
        Outcome::BlownUp { t_num, low_confidence } => (fmt17(t_num), low_confidence.to_string()),
        _ => ("nan".into(), "nan".into()),
    };
    let last = traj.final_snapshot();
    let opt = |v: Option<f64>| v.map(fmt17).unwrap_or_else(|| "nan".into());
    let b = prep.bound.as_ref();
    format!(
        "{SUMMARY_HEADER}\n{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
        outcome_label(&traj.outcome),
        t_num,
        low_conf,
        fmt17(last.t),
        fmt17(last.field.sup_norm()),
        traj.steps,
        traj.clipped_nodes_total,
        fmt17(prep.eigen.lambda),
        fmt17(prep.eigen.residual),
        prep.cond_tag,
        prep.cond_report.passed(),
        prep.cond_report.certificate,
        fmt17(prep.cond_params.alpha),
        fmt17(prep.cond_params.beta),
        fmt17(prep.cond_params.gamma),
        fmt17(prep.j0),
        opt(b.map(|b| b.m)),
        opt(b.map(|b| b.sigma)),
        opt(b.map(|b| b.tstar_upper)),
        opt(b.map(|b| b.tstar_upper_alt)),
        opt(min_h),
    )
}

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use plaplab::conditions::{
    check_condition, ConditionParams, ConditionReport, ConditionTag, SAMPLES_DEFAULT,
    U_RANGE_DEFAULT,
};
use plaplab::config::ExperimentConfig;
use plaplab::eigen::{
    first_eigenpair, Normalization, EIGEN_MAX_ITER_DEFAULT, EIGEN_TOL_DEFAULT,
};
use plaplab::experiment::{outcome_label, prepare, simulate_to_dir};
use plaplab::grid::Grid;
use plaplab::plap::PExponent;
use plaplab::source::SourceSpec;
use plaplab::sweep::{run_sweep, sweep_csv, SweepAxis, SweepSpec};
use plaplab::util::fmt17;
use plaplab::{Error, Result};

/// Numerical laboratory for blow-up in p-Laplacian reaction-diffusion
/// problems: eigenpairs, blow-up conditions, concavity bounds, adaptive
/// time integration, and parameter sweeps.
#[derive(Parser)]
#[command(name = "plaplab", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compute the first Dirichlet eigenpair of the p-Laplacian.
    Eig {
        /// Spatial dimension, 1 or 2.
        #[arg(long, default_value_t = 1)]
        dim: usize,
        /// Interval length, or rectangle width in 2d.
        #[arg(long = "L", default_value_t = 1.0)]
        l: f64,
        /// Rectangle height; defaults to --L.
        #[arg(long)]
        ly: Option<f64>,
        /// Interior nodes per axis.
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = EIGEN_TOL_DEFAULT)]
        tol: f64,
        #[arg(long, default_value_t = EIGEN_MAX_ITER_DEFAULT)]
        max_iter: usize,
        /// Also write the eigenfunction as a field CSV.
        #[arg(long)]
        phi_out: Option<PathBuf>,
    },
    /// Check a blow-up condition (A, B, C, or C') for a source term.
    /// Exits 0 when satisfied, 1 when not.
    Check {
        /// Source spec, e.g. "powersum: 1*u^3".
        #[arg(long = "f")]
        source: String,
        #[arg(long)]
        p: f64,
        /// Condition tag: A, B, C, or C'.
        #[arg(long)]
        cond: String,
        /// Search admissible parameters (smallest gamma first) instead of
        /// passing them explicitly.
        #[arg(long)]
        auto: bool,
        /// Domain as dim:L:n used to compute lambda_1p (2d domains are
        /// squares here).
        #[arg(long)]
        domain: Option<String>,
        /// Known lambda_1p, as an alternative to --domain.
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        beta: f64,
        #[arg(long, default_value_t = 0.0)]
        gamma: f64,
        #[arg(long, default_value_t = U_RANGE_DEFAULT.0)]
        u_min: f64,
        #[arg(long, default_value_t = U_RANGE_DEFAULT.1)]
        u_max: f64,
        #[arg(long, default_value_t = SAMPLES_DEFAULT)]
        samples: usize,
    },
    /// Run a configured experiment and write its run directory.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output root; defaults to the config's output.dir, then
        /// $PLAP_OUT, then ./plap_out.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the concavity blow-up bound for the configured initial data.
    Bound {
        #[arg(long)]
        config: PathBuf,
    },
    /// Simulate and also write the functional series (report.csv).
    Report {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a cartesian parameter sweep and write sweep.csv.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Axis as key=v1,v2,...; repeat for more axes.
        #[arg(long = "axis")]
        axes: Vec<String>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() {
    let cli = Cli::parse();
    let code = match dispatch(cli.cmd) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    };
    std::process::exit(code);
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidParam(_) | Error::InvalidGrid(_) | Error::Io(_) => 2,
        _ => 3,
    }
}

fn out_root(cli_out: Option<PathBuf>, config_out: Option<&String>) -> PathBuf {
    cli_out
        .or_else(|| config_out.map(PathBuf::from))
        .or_else(|| std::env::var_os("PLAP_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("plap_out"))
}

fn config_base_dir(config_path: &Path) -> PathBuf {
    let parent = config_path.parent().unwrap_or(Path::new("."));
    if parent.as_os_str().is_empty() {
        PathBuf::from(".")
    } else {
        parent.to_path_buf()
    }
}

fn solve_domain_lambda(spec: &str, p: PExponent) -> Result<f64> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!("--domain must be dim:L:n, got {spec:?}")));
    }
    let dim: usize = parts[0]
        .parse()
        .map_err(|_| Error::Config(format!("bad domain dimension {:?}", parts[0])))?;
    let l: f64 = parts[1]
        .parse()
        .map_err(|_| Error::Config(format!("bad domain length {:?}", parts[1])))?;
    let n: usize = parts[2]
        .parse()
        .map_err(|_| Error::Config(format!("bad domain node count {:?}", parts[2])))?;
    let grid = match dim {
        1 => Grid::line(l, n)?,
        2 => Grid::rectangle(l, l, n)?,
        other => return Err(Error::Config(format!("domain dimension must be 1 or 2, got {other}"))),
    };
    let r = first_eigenpair(&grid, p, Normalization::SupOne, EIGEN_TOL_DEFAULT, EIGEN_MAX_ITER_DEFAULT)?;
    if !r.converged {
        return Err(Error::Numerical(format!(
            "eigensolver did not converge on the check domain (residual {:.3e})",
            r.residual
        )));
    }
    Ok(r.lambda)
}

/// Best report over the parameter grids appropriate for the tag, smallest
/// gamma then smallest eps first; stops at the first satisfied instance.
fn auto_check(
    source: &plaplab::source::SourceTerm,
    p: f64,
    tag: ConditionTag,
    lambda1p: f64,
    u_range: (f64, f64),
    samples: usize,
) -> Result<ConditionReport> {
    const GAMMAS: [f64; 5] = [0.0, 0.01, 0.1, 1.0, 10.0];
    const EPS: [f64; 8] = [0.1, 0.25, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0];
    let mut last = None;
    let gammas: &[f64] = match tag {
        ConditionTag::A => &[0.0],
        _ => &GAMMAS,
    };
    for &gamma in gammas {
        if gamma == 0.0 && matches!(tag, ConditionTag::B | ConditionTag::CPrime) {
            continue; // these tags need gamma > 0
        }
        let eps_list: &[f64] = match tag {
            ConditionTag::CPrime => &[0.0],
            _ => &EPS,
        };
        for &eps in eps_list {
            let params = match tag {
                ConditionTag::A => ConditionParams::for_a(p, eps, lambda1p),
                ConditionTag::B => ConditionParams::for_b(p, eps, gamma, lambda1p),
                ConditionTag::C => {
                    let probe = ConditionParams::for_a(p, eps, lambda1p);
                    ConditionParams::for_c(p, eps, probe.beta_max(), gamma, lambda1p)
                }
                ConditionTag::CPrime => ConditionParams::for_c_prime(p, gamma, lambda1p),
            };
            let report = check_condition(source, &params, tag, u_range, samples)?;
            if report.passed() {
                return Ok(report);
            }
            last = Some(report);
        }
    }
    Ok(last.expect("at least one parameter combination is always tried"))
}

fn dispatch(cmd: Cmd) -> Result<i32> {
    match cmd {
        Cmd::Eig { dim, l, ly, n, p, tol, max_iter, phi_out } => {
            let pexp = PExponent::new(p)?;
            let ly_val = ly.unwrap_or(l);
            let grid = match dim {
                1 => Grid::line(l, n)?,
                2 => Grid::rectangle(l, ly_val, n)?,
                other => return Err(Error::Config(format!("--dim must be 1 or 2, got {other}"))),
            };
            let r = first_eigenpair(&grid, pexp, Normalization::SupOne, tol, max_iter)?;
            if !r.converged {
                return Err(Error::Numerical(format!(
                    "eigensolver did not converge (residual {:.3e} after {} iterations)",
                    r.residual, r.iterations
                )));
            }
            println!("dim,l,ly,n,p,lambda,residual,iterations,converged");
            println!(
                "{dim},{},{},{n},{},{},{},{},{}",
                fmt17(l),
                if dim == 2 { fmt17(ly_val) } else { "nan".into() },
                fmt17(p),
                fmt17(r.lambda),
                fmt17(r.residual),
                r.iterations,
                r.converged
            );
            if let Some(path) = phi_out {
                r.phi.write_csv_file(&path)?;
            }
            Ok(0)
        }

        Cmd::Check {
            source,
            p,
            cond,
            auto,
            domain,
            lambda,
            alpha,
            beta,
            gamma,
            u_min,
            u_max,
            samples,
        } => {
            let pexp = PExponent::new(p)?;
            let tag: ConditionTag = cond.parse()?;
            let lambda1p = match (&domain, lambda) {
                (Some(d), _) => solve_domain_lambda(d, pexp)?,
                (None, Some(lam)) => lam,
                (None, None) => {
                    return Err(Error::Config("give --domain dim:L:n or --lambda".into()))
                }
            };
            let spec = SourceSpec::parse(&source)?;
            let st = spec.resolve(p, Some(lambda1p), Path::new("."))?;
            let report = if auto {
                auto_check(&st, p, tag, lambda1p, (u_min, u_max), samples)?
            } else {
                let params = match tag {
                    ConditionTag::CPrime => ConditionParams::for_c_prime(p, gamma, lambda1p),
                    _ => {
                        let alpha = alpha.ok_or_else(|| {
                            Error::Config(format!("condition {tag} needs --alpha (or use --auto)"))
                        })?;
                        ConditionParams { p, alpha, beta, gamma, lambda1p }
                    }
                };
                params.validate_for(tag)?;
                check_condition(&st, &params, tag, (u_min, u_max), samples)?
            };
            println!("{}", ConditionReport::csv_header());
            println!("{}", report.csv_row());
            Ok(if report.passed() { 0 } else { 1 })
        }

        Cmd::Simulate { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let prep = prepare(&cfg, &config_base_dir(&config))?;
            let root = out_root(out, cfg.output_dir.as_ref());
            let art = simulate_to_dir(&prep, &root, false)?;
            println!("{}", art.dir.display());
            println!("outcome = {}", outcome_label(&art.trajectory.outcome));
            Ok(0)
        }

        Cmd::Bound { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let prep = prepare(&cfg, &config_base_dir(&config))?;
            match prep.bound {
                Some(b) => {
                    println!("j0,u0_l2sq,alpha,sigma,m,tstar_upper,m_alt,tstar_upper_alt");
                    println!(
                        "{},{},{},{},{},{},{},{}",
                        fmt17(b.j0),
                        fmt17(b.u0_l2sq),
                        fmt17(prep.cond_params.alpha),
                        fmt17(b.sigma),
                        fmt17(b.m),
                        fmt17(b.tstar_upper),
                        fmt17(b.m_alt),
                        fmt17(b.tstar_upper_alt)
                    );
                    Ok(0)
                }
                None => Err(Error::NoBound(prep.j0)),
            }
        }

        Cmd::Report { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let prep = prepare(&cfg, &config_base_dir(&config))?;
            let root = out_root(out, cfg.output_dir.as_ref());
            let art = simulate_to_dir(&prep, &root, true)?;
            println!("{}", art.dir.display());
            println!("outcome = {}", outcome_label(&art.trajectory.outcome));
            Ok(0)
        }

        Cmd::Sweep { config, axes, workers, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let axes = axes
                .iter()
                .map(|a| SweepAxis::parse(a))
                .collect::<Result<Vec<_>>>()?;
            let spec = SweepSpec { base: cfg, axes };
            let workers = workers
                .unwrap_or_else(|| std::thread::available_parallelism().map(|v| v.get()).unwrap_or(4));
            let rows = run_sweep(&spec, &config_base_dir(&config), workers)?;
            let root = out_root(out, spec.base.output_dir.as_ref());
            std::fs::create_dir_all(&root)?;
            let path = root.join("sweep.csv");
            std::fs::write(&path, sweep_csv(&spec, &rows))?;
            println!("{}", path.display());
            Ok(0)
        }
    }
}

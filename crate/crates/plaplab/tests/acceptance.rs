//! Acceptance suite: one test per numbered criterion, each printing a
//! single `ACCEPTANCE criterion NN: PASS/FAIL - detail` line (visible with
//! `--nocapture`) before asserting. Tolerances are pinned in the asserts.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use plaplab::conditions::{
    check_condition, hierarchy_check, monotone_characterization, ConditionParams, ConditionTag,
    SAMPLES_DEFAULT, U_RANGE_DEFAULT,
};
use plaplab::eigen::{first_eigenpair, Normalization, EIGEN_MAX_ITER_DEFAULT, EIGEN_TOL_DEFAULT};
use plaplab::experiment::auto_condition;
use plaplab::functionals::{choose_m, concavity_series, energy_series, eval_j};
use plaplab::grid::{Field, Grid};
use plaplab::plap::{apply_plap, flux_pairing, PExponent};
use plaplab::solver::{run, Outcome, SolverConfig};
use plaplab::source::{osgood_test, Osgood, SourceTerm, OSGOOD_HORIZON_DEFAULT};

fn verdict(criterion: u32, ok: bool, detail: &str) {
    let tag = if ok { "PASS" } else { "FAIL" };
    println!("ACCEPTANCE criterion {criterion:02}: {tag} - {detail}");
    assert!(ok, "criterion {criterion:02}: {detail}");
}

fn pexp(p: f64) -> PExponent {
    PExponent::new(p).unwrap()
}

fn sine_data(grid: &Arc<Grid>, amplitude: f64) -> Field {
    let l = grid.len_x();
    Field::from_profile(grid, |x, _| amplitude * (PI * x / l).sin())
}

#[test]
fn criterion_01_eigenvalue_accuracy() {
    let p2 = pexp(2.0);
    let g1 = Grid::line(1.0, 999).unwrap();
    let r1 =
        first_eigenpair(&g1, p2, Normalization::SupOne, EIGEN_TOL_DEFAULT, EIGEN_MAX_ITER_DEFAULT)
            .unwrap();
    let e1 = (r1.lambda - PI * PI).abs() / (PI * PI);

    let g2 = Grid::rectangle(1.0, 1.0, 99).unwrap();
    let r2 =
        first_eigenpair(&g2, p2, Normalization::SupOne, EIGEN_TOL_DEFAULT, EIGEN_MAX_ITER_DEFAULT)
            .unwrap();
    let e2 = (r2.lambda - 2.0 * PI * PI).abs() / (2.0 * PI * PI);

    // Reference value for p = 3 on (0, 1) from an offline brute-force
    // minimization of the Rayleigh quotient (Richardson-extrapolated in h);
    // it matches the closed form (p-1) * (2 pi / (p sin(pi/p)))^p.
    const LAMBDA_1_3: f64 = 28.28876197600255;
    let g3 = Grid::line(1.0, 299).unwrap();
    let r3 = first_eigenpair(&g3, pexp(3.0), Normalization::SupOne, EIGEN_TOL_DEFAULT, 400_000)
        .unwrap();
    let e3 = (r3.lambda - LAMBDA_1_3).abs() / LAMBDA_1_3;

    let ok = r1.converged && r2.converged && r3.converged && e1 <= 1e-3 && e2 <= 1e-2 && e3 <= 1e-2;
    verdict(
        1,
        ok,
        &format!(
            "interval p=2 rel err {e1:.2e} (<= 1e-3); square p=2 rel err {e2:.2e} (<= 1e-2); \
             interval p=3 rel err {e3:.2e} vs minimization oracle (<= 1e-2)"
        ),
    );
}

#[test]
fn criterion_02_condition_crossing_at_the_eigenvalue() {
    let mut fails = Vec::new();
    for &p in &[2.0f64, 3.0] {
        let g = Grid::line(1.0, 99).unwrap();
        let lam = first_eigenpair(
            &g,
            pexp(p),
            Normalization::SupOne,
            EIGEN_TOL_DEFAULT,
            400_000,
        )
        .unwrap()
        .lambda;
        for &(factor, want) in &[(0.99, true), (1.01, false)] {
            let src = SourceTerm::power_sum(vec![(factor * lam, p - 1.0)]).unwrap();
            let (_, rep) = auto_condition(&src, p, lam).unwrap();
            if rep.passed() != want {
                fails.push(format!("p={p}, a={factor}*lambda: C_p verdict {}", rep.verdict));
            }
            // The critical pure power admits no super-homogeneity margin,
            // so A_p must fail for every eps.
            for &eps in &[0.1, 0.5, 1.0, 2.0, 5.0] {
                let pa = ConditionParams::for_a(p, eps, lam);
                let ra =
                    check_condition(&src, &pa, ConditionTag::A, U_RANGE_DEFAULT, SAMPLES_DEFAULT)
                        .unwrap();
                if ra.passed() {
                    fails.push(format!(
                        "p={p}, a={factor}*lambda, eps={eps}: A_p unexpectedly satisfiable"
                    ));
                }
            }
        }
    }
    let ok = fails.is_empty();
    let detail = if ok {
        "C_p flips from satisfied to not-satisfied across a = lambda for p in {2, 3}; \
         A_p unsatisfiable at both"
            .to_string()
    } else {
        fails.join("; ")
    };
    verdict(2, ok, &detail);
}

#[test]
fn criterion_03_hierarchy_and_monotone_agreement() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x03);
    let mut violations = Vec::new();
    let mut satisfiable = [0usize; 3];
    let n_sources = 24;
    for k in 0..n_sources {
        let p = [2.0, 2.5, 3.0][rng.gen_range(0..3)];
        let lam = [5.0, 9.87, 30.0][rng.gen_range(0..3)];
        let nterms = rng.gen_range(1..=3);
        let terms: Vec<(f64, f64)> = (0..nterms)
            .map(|_| (rng.gen_range(0.1..5.0), rng.gen_range(1.0..6.0)))
            .collect();
        let src = SourceTerm::power_sum(terms.clone()).unwrap();

        let rep = hierarchy_check(&src, p, lam, U_RANGE_DEFAULT).unwrap();
        if !rep.chain_ok {
            violations.push(format!("source {k} ({terms:?}, p={p}): implication chain broken"));
        }
        if rep.a.passed() && !rep.b.passed() {
            violations.push(format!("source {k}: A_p holds but B_p does not"));
        }
        if rep.b.passed() && !rep.c.passed() {
            violations.push(format!("source {k}: B_p holds but C_p does not"));
        }
        for (slot, r) in [&rep.a, &rep.b, &rep.c].iter().enumerate() {
            if r.passed() {
                satisfiable[slot] += 1;
            }
        }

        // The monotonicity form must agree with the direct residual scan
        // for every admissible parameter choice tried.
        for &eps in &[0.5, 2.0] {
            for &gamma in &[0.0, 1.0] {
                let probe = ConditionParams::for_a(p, eps, lam);
                let params = ConditionParams::for_c(p, eps, probe.beta_max(), gamma, lam);
                let direct =
                    check_condition(&src, &params, ConditionTag::C, U_RANGE_DEFAULT, 4000)
                        .unwrap();
                let mono =
                    monotone_characterization(&src, &params, U_RANGE_DEFAULT, 4000).unwrap();
                if direct.passed() != mono.passed() {
                    violations.push(format!(
                        "source {k} ({terms:?}, p={p}, eps={eps}, gamma={gamma}): direct {} vs \
                         monotone {}",
                        direct.verdict, mono.verdict
                    ));
                }
            }
        }
    }
    let ok = violations.is_empty();
    let detail = if ok {
        format!(
            "{n_sources} sources: zero chain violations (A/B/C satisfiable for {}/{}/{}); \
             monotone form agrees with the direct check everywhere",
            satisfiable[0], satisfiable[1], satisfiable[2]
        )
    } else {
        violations.join("; ")
    };
    verdict(3, ok, &detail);
}

#[test]
fn criterion_04_positive_initial_energy_construction() {
    let mut parts = Vec::new();
    let mut ok = true;
    for &p in &[2.0f64, 3.0] {
        let pe = pexp(p);
        let g = Grid::line(1.0, 199).unwrap();
        let r = first_eigenpair(&g, pe, Normalization::PMass, EIGEN_TOL_DEFAULT, 400_000).unwrap();
        assert!(r.converged);
        assert!(
            r.lambda > p / (p - 1.0),
            "the unit interval must give lambda > p/(p-1) for this construction"
        );
        let src = SourceTerm::power_sum(vec![(p * r.lambda, p - 1.0)]).unwrap();
        let j0 = eval_j(&r.phi, &src, pe, 1.0).unwrap();
        let measure = g.measure();
        let target = (r.lambda * (1.0 - 1.0 / p) - 1.0) * measure;
        let pass = j0 >= target - 1e-2 * measure;
        ok &= pass;
        parts.push(format!("p={p}: J(0) = {j0:.6} vs floor {:.6}", target - 1e-2 * measure));
    }
    verdict(4, ok, &parts.join("; "));
}

#[test]
fn criterion_05_blowup_run_p2_cubic_reaction() {
    let pe = pexp(2.0);
    let src = SourceTerm::power_sum(vec![(1.0, 3.0)]).unwrap();
    let (gamma, alpha) = (0.01, 4.0);

    let mut t_nums = Vec::new();
    let mut parts = Vec::new();
    let mut ok = true;
    let mut tstar = f64::NAN;
    for &n in &[99usize, 199] {
        let g = Grid::line(1.0, n).unwrap();
        let u0 = sine_data(&g, 6.0);
        let b = choose_m(&u0, &src, pe, gamma, alpha).unwrap(); // errors iff J(0) <= 0
        tstar = b.tstar_upper;
        let cfg = SolverConfig { safety: 0.2, t_max: 2.0, ..SolverConfig::default() };
        let traj = run(&u0, &src, pe, &cfg).unwrap();
        match traj.outcome {
            Outcome::BlownUp { t_num, .. } => {
                t_nums.push(t_num);
                if !(t_num <= 1.05 * b.tstar_upper) {
                    ok = false;
                    parts.push(format!(
                        "n={n}: T_num {t_num:.5} exceeds bound {:.5} by more than 5%",
                        b.tstar_upper
                    ));
                }
                let conc = concavity_series(&traj, &src, pe, alpha, b.m).unwrap();
                let min_h = conc.iter().map(|r| r.h).fold(f64::INFINITY, f64::min);
                if !(min_h > 0.0) {
                    ok = false;
                    parts.push(format!("n={n}: min H = {min_h:.3e} not positive"));
                }
            }
            other => {
                ok = false;
                parts.push(format!("n={n}: outcome {other:?} instead of blow-up"));
            }
        }
    }
    let mut stability = f64::NAN;
    if t_nums.len() == 2 {
        stability = (t_nums[0] - t_nums[1]).abs() / t_nums[1];
        if !(stability <= 0.02) {
            ok = false;
        }
    }
    parts.insert(
        0,
        format!(
            "T_num = {:?}, refinement drift {stability:.2e} (<= 2e-2), bound {tstar:.4} with 5% \
             slack, H > 0 at every sample",
            t_nums
        ),
    );
    verdict(5, ok, &parts.join("; "));
}

#[test]
fn criterion_06_blowup_run_p3_quartic_reaction() {
    let pe = pexp(3.0);
    let src = SourceTerm::power_sum(vec![(1.0, 4.0)]).unwrap();
    let (gamma, alpha) = (0.0, 5.0); // s*f(s) = 5 F(s) exactly for f = u^4
    let g = Grid::line(1.0, 99).unwrap();
    let u0 = sine_data(&g, 10.0);
    let b = choose_m(&u0, &src, pe, gamma, alpha).unwrap();
    let cfg = SolverConfig { t_max: 2.0, ..SolverConfig::default() };
    let traj = run(&u0, &src, pe, &cfg).unwrap();
    let blown = matches!(traj.outcome, Outcome::BlownUp { .. });

    let conc = concavity_series(&traj, &src, pe, alpha, b.m).unwrap();
    let energy = energy_series(&traj, &src, pe, gamma).unwrap();

    // Growth inequality: I'' >= 2 alpha (J(0) + cumulative u_t^2), with
    // 1e-3 relative slack for the time-integration error in the cumulative
    // term.
    let mut growth_slack = f64::INFINITY;
    for (c, e) in conc.iter().zip(&energy) {
        let rhs = 2.0 * alpha * (b.j0 + e.cumulative_ut2);
        let scale = c.idoubleprime.abs().max(rhs.abs()).max(1.0);
        growth_slack = growth_slack.min((c.idoubleprime - rhs) / scale);
    }

    // Concavity inequality: H = I'' I - (1 + sigma) I'^2 stays above
    // -1e-3 * scale throughout.
    let mut h_slack = f64::INFINITY;
    for c in &conc {
        let scale = (c.idoubleprime * c.i)
            .abs()
            .max((1.0 + c.sigma) * c.iprime * c.iprime)
            .max(1.0);
        h_slack = h_slack.min(c.h / scale);
    }

    let ok = blown && growth_slack >= -1e-3 && h_slack >= -1e-3;
    verdict(
        6,
        ok,
        &format!(
            "blown_up = {blown}; J(0) = {:.1}; min growth slack {growth_slack:.2e} and min \
             concavity slack {h_slack:.2e} (both >= -1e-3)",
            b.j0
        ),
    );
}

fn worst_relative_identity_residual(
    traj: &plaplab::solver::Trajectory,
    src: &SourceTerm,
    pe: PExponent,
    gamma: f64,
) -> f64 {
    let series = energy_series(traj, src, pe, gamma).unwrap();
    let j0 = series[0].j;
    series
        .iter()
        .map(|e| (e.j - j0 - e.cumulative_ut2).abs() / (j0.abs() + e.cumulative_ut2))
        .fold(0.0, f64::max)
}

#[test]
fn criterion_07_energy_identity_p2() {
    let pe = pexp(2.0);
    let g = Grid::line(1.0, 99).unwrap();
    let u0 = sine_data(&g, 6.0);

    // Reaction-free decay: the vanishing source is a linear term whose
    // contribution sits far below f64 roundoff.
    let no_src = SourceTerm::power_sum(vec![(1e-280, 1.0)]).unwrap();
    let decay_res = |safety: f64| {
        let cfg = SolverConfig { safety, t_max: 0.3, ..SolverConfig::default() };
        let traj = run(&u0, &no_src, pe, &cfg).unwrap();
        assert!(matches!(traj.outcome, Outcome::Completed));
        worst_relative_identity_residual(&traj, &no_src, pe, 0.0)
    };

    // Blow-up leg of criterion 5, followed up to sup-norm 1e3.
    let cubic = SourceTerm::power_sum(vec![(1.0, 3.0)]).unwrap();
    let blow_res = |safety: f64| {
        let cfg =
            SolverConfig { safety, u_blow: 1e3, t_max: 2.0, ..SolverConfig::default() };
        let traj = run(&u0, &cubic, pe, &cfg).unwrap();
        assert!(matches!(traj.outcome, Outcome::BlownUp { .. }));
        worst_relative_identity_residual(&traj, &cubic, pe, 0.01)
    };

    let d1 = decay_res(0.5);
    let d2 = decay_res(0.25);
    let b1 = blow_res(5e-4);
    let b2 = blow_res(2.5e-4);
    let ok = d1 <= 1e-3 && b1 <= 1e-3 && d2 <= 0.65 * d1 && b2 <= 0.65 * b1;
    verdict(
        7,
        ok,
        &format!(
            "decay run residual {d1:.2e} -> {d2:.2e} on step halving; blow-up run {b1:.2e} -> \
             {b2:.2e} (bound 1e-3, ratio <= 0.65)"
        ),
    );
}

#[test]
fn criterion_08_global_decay_regime() {
    let mut parts = Vec::new();
    let mut ok = true;
    for &p in &[2.0f64, 3.0] {
        let pe = pexp(p);
        let g = Grid::line(1.0, 49).unwrap();
        let r = first_eigenpair(&g, pe, Normalization::PMass, EIGEN_TOL_DEFAULT, 400_000).unwrap();
        let src = SourceTerm::power_sum(vec![(0.5 * r.lambda, p - 1.0)]).unwrap();
        let cfg = SolverConfig { t_max: 10.0, ..SolverConfig::default() };
        let traj = run(&r.phi, &src, pe, &cfg).unwrap();
        let fsnap = traj.final_snapshot();
        let rel = fsnap.field.sup_norm() / r.phi.sup_norm();
        let decayed = matches!(traj.outcome, Outcome::Decayed);
        ok &= decayed;
        parts.push(format!(
            "p={p}: {:?} at t = {:.3} with relative sup {rel:.2e}",
            traj.outcome, fsnap.t
        ));
    }
    // For p = 3 the subcritical decay is algebraic, not exponential: by
    // t = 10 the sup-norm has only fallen to ~1e-2 of its initial value,
    // far above the 1e-10 decay threshold, so the run completes the
    // horizon without a Decayed classification.
    verdict(8, ok, &parts.join("; "));
}

#[test]
fn criterion_09_osgood_dichotomy() {
    let linear = SourceTerm::power_sum(vec![(1.0, 1.0)]).unwrap();
    let quadratic = SourceTerm::power_sum(vec![(1.0, 2.0)]).unwrap();
    let divergent = matches!(osgood_test(&linear, 1.0, OSGOOD_HORIZON_DEFAULT), Osgood::Divergent);
    let (convergent, tail) =
        match osgood_test(&quadratic, 1.0, OSGOOD_HORIZON_DEFAULT) {
            Osgood::Convergent { integral } => ((integral - 1.0).abs() <= 1e-6, integral),
            Osgood::Divergent => (false, f64::NAN),
        };
    verdict(
        9,
        divergent && convergent,
        &format!("f=u divergent: {divergent}; f=u^2 tail {tail:.9} within 1e-6 of 1"),
    );
}

fn random_field(g: &Arc<Grid>, rng: &mut ChaCha8Rng) -> Field {
    let values = (0..g.interior_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Field::from_values(g, values).unwrap()
}

fn weighted_inner(a: &Field, b: &Field) -> f64 {
    let w = a.grid().interior_weight();
    w * a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum::<f64>()
}

#[test]
fn criterion_10_summation_by_parts() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x10);
    let g1 = Grid::line(1.3, 99).unwrap();
    let g2 = Grid::rectangle(1.0, 0.7, 19).unwrap();
    let ps = [2.0, 2.5, 3.0, 4.0];
    let mut worst: f64 = 0.0;
    let mut pairs = 0;
    for k in 0..100 {
        let pe = pexp(ps[k % ps.len()]);
        let g = if k % 2 == 0 { &g1 } else { &g2 };
        let u = random_field(g, &mut rng);
        let v = random_field(g, &mut rng);
        let lhs = weighted_inner(&apply_plap(&u, pe), &v);
        let rhs = -flux_pairing(&u, &v, pe);
        let scale = lhs.abs() + rhs.abs() + 1e-300;
        worst = worst.max((lhs - rhs).abs() / scale);
        pairs += 1;
    }

    // At p = 2 the face diffusivity is the constant 1.0, so the operator
    // must reproduce the classical second-difference stencil bitwise.
    let mut stencil_exact = true;
    let u = random_field(&g1, &mut rng);
    let lap = apply_plap(&u, pexp(2.0));
    let h = g1.hx();
    for i in 1..=g1.n() {
        let manual =
            ((u.value(i + 1, 0) - u.value(i, 0)) / h - (u.value(i, 0) - u.value(i - 1, 0)) / h) / h;
        if manual != lap.values()[i - 1] {
            stencil_exact = false;
        }
    }
    let u = random_field(&g2, &mut rng);
    let lap = apply_plap(&u, pexp(2.0));
    let (hx, hy) = (g2.hx(), g2.hy());
    for j in 1..=g2.n() {
        for i in 1..=g2.n() {
            let divx =
                ((u.value(i + 1, j) - u.value(i, j)) / hx - (u.value(i, j) - u.value(i - 1, j)) / hx)
                    / hx;
            let divy =
                ((u.value(i, j + 1) - u.value(i, j)) / hy - (u.value(i, j) - u.value(i, j - 1)) / hy)
                    / hy;
            if divx + divy != lap.value(i, j) {
                stencil_exact = false;
            }
        }
    }

    let ok = pairs == 100 && worst <= 1e-10 && stencil_exact;
    verdict(
        10,
        ok,
        &format!(
            "worst relative adjointness residual {worst:.2e} over {pairs} random pairs \
             (<= 1e-10); p=2 stencil bitwise equal: {stencil_exact}"
        ),
    );
}

//! Reaction terms f(u) with their antiderivatives F(u) = integral of f from
//! 0 to u, plus the Osgood integral test that separates ODE blow-up from
//! global growth.
//!
//! Every supported f vanishes at 0 and is positive and locally Lipschitz on
//! u > 0. Power families carry exact antiderivatives; tabulated sources are
//! integrated by adaptive Simpson quadrature.

use std::fmt;

use crate::util::adaptive_simpson;
use crate::{Error, Result};

/// One monomial a * u^q with a > 0, q >= 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerTerm {
    pub coeff: f64,
    pub exponent: f64,
}

/// A reaction nonlinearity.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceTerm {
    /// f(u) = sum of a_j * u^(q_j).
    PowerSum { terms: Vec<PowerTerm> },
    /// f(u) = c * lambda * u^(p-1) with the eigenvalue fixed at construction.
    EigenScaled { c: f64, p: f64, lambda: f64 },
    /// Monotone piecewise-linear interpolation of (u_k, f_k) knots starting
    /// at (0, 0); extrapolates with the last segment's slope.
    Tabulated { knots: Vec<(f64, f64)> },
}

pub const OSGOOD_HORIZON_DEFAULT: f64 = 1e12;

/// Outcome of the Osgood test on integral of du / f(u) from m to infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Osgood {
    /// The integral diverges: the comparison ODE grows globally.
    Divergent,
    /// The integral converges; `integral` estimates its value.
    Convergent { integral: f64 },
}

impl SourceTerm {
    pub fn power_sum(terms: Vec<(f64, f64)>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidParam("power sum needs at least one term".into()));
        }
        let mut out = Vec::with_capacity(terms.len());
        for (a, q) in terms {
            if !(a.is_finite() && a > 0.0) {
                return Err(Error::InvalidParam(format!("power coefficient must be > 0, got {a}")));
            }
            if !(q.is_finite() && q >= 1.0) {
                return Err(Error::InvalidParam(format!("power exponent must be >= 1, got {q}")));
            }
            out.push(PowerTerm { coeff: a, exponent: q });
        }
        out.sort_by(|a, b| a.exponent.total_cmp(&b.exponent));
        Ok(SourceTerm::PowerSum { terms: out })
    }

    pub fn eigen_scaled(c: f64, p: f64, lambda: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidParam(format!("eigen scaling c must be > 0, got {c}")));
        }
        if !(p.is_finite() && p >= 2.0) {
            return Err(Error::InvalidParam(format!("p must be >= 2, got {p}")));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidParam(format!("lambda must be > 0, got {lambda}")));
        }
        Ok(SourceTerm::EigenScaled { c, p, lambda })
    }

    pub fn tabulated(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::InvalidParam("tabulated source needs at least two knots".into()));
        }
        if knots[0] != (0.0, 0.0) {
            return Err(Error::InvalidParam("tabulated source must start at the knot (0, 0)".into()));
        }
        for w in knots.windows(2) {
            let ((u0, f0), (u1, f1)) = (w[0], w[1]);
            if !(u1.is_finite() && f1.is_finite()) {
                return Err(Error::InvalidParam("tabulated knots must be finite".into()));
            }
            if u1 <= u0 {
                return Err(Error::InvalidParam(format!(
                    "knot abscissae must increase strictly ({u0} then {u1})"
                )));
            }
            if f1 < f0 {
                return Err(Error::InvalidParam(format!(
                    "knot values must be nondecreasing ({f0} then {f1})"
                )));
            }
        }
        if knots[1].1 <= 0.0 {
            return Err(Error::InvalidParam(
                "second knot value must be positive so that f(u) > 0 for u > 0".into(),
            ));
        }
        Ok(SourceTerm::Tabulated { knots })
    }

    /// f(u) for u >= 0; negative arguments are a caller bug (solutions of
    /// the problem class are nonnegative) and panic.
    pub fn eval_f(&self, u: f64) -> f64 {
        assert!(u >= 0.0, "source evaluated at negative u = {u}");
        match self {
            SourceTerm::PowerSum { terms } => {
                terms.iter().map(|t| t.coeff * u.powf(t.exponent)).sum()
            }
            SourceTerm::EigenScaled { c, p, lambda } => c * lambda * u.powf(p - 1.0),
            SourceTerm::Tabulated { knots } => {
                let last = knots.len() - 1;
                if u >= knots[last].0 {
                    let (u0, f0) = knots[last - 1];
                    let (u1, f1) = knots[last];
                    return f1 + (u - u1) * (f1 - f0) / (u1 - u0);
                }
                let k = knots.partition_point(|&(uk, _)| uk <= u).max(1);
                let (u0, f0) = knots[k - 1];
                let (u1, f1) = knots[k];
                f0 + (u - u0) * (f1 - f0) / (u1 - u0)
            }
        }
    }

    /// F(u), the antiderivative with F(0) = 0: closed form for the power
    /// families, adaptive Simpson for tabulated sources.
    pub fn eval_big_f(&self, u: f64) -> f64 {
        assert!(u >= 0.0, "antiderivative evaluated at negative u = {u}");
        match self {
            SourceTerm::PowerSum { terms } => terms
                .iter()
                .map(|t| t.coeff * u.powf(t.exponent + 1.0) / (t.exponent + 1.0))
                .sum(),
            SourceTerm::EigenScaled { c, p, lambda } => c * lambda * u.powf(*p) / p,
            SourceTerm::Tabulated { knots } => {
                if u == 0.0 {
                    return 0.0;
                }
                // Integrate knot to knot so each Simpson panel sees a single
                // linear piece and terminates at the first level.
                let mut total = 0.0;
                let mut a = 0.0;
                for &(uk, _) in knots.iter().skip(1) {
                    if uk >= u {
                        break;
                    }
                    total += adaptive_simpson(&|s| self.eval_f(s), a, uk, 1e-10);
                    a = uk;
                }
                total + adaptive_simpson(&|s| self.eval_f(s), a, u, 1e-10)
            }
        }
    }

    /// The monomial decomposition when one exists (exact certificates in the
    /// condition checker rely on it); None for tabulated sources.
    pub fn power_terms(&self) -> Option<Vec<PowerTerm>> {
        match self {
            SourceTerm::PowerSum { terms } => Some(terms.clone()),
            SourceTerm::EigenScaled { c, p, lambda } => {
                Some(vec![PowerTerm { coeff: c * lambda, exponent: p - 1.0 }])
            }
            SourceTerm::Tabulated { .. } => None,
        }
    }
}

/// Decides whether integral of du / f(u) from m to infinity diverges.
///
/// Power families are decided analytically (leading exponent > 1 iff
/// convergent); the convergent estimate, and the whole decision for
/// tabulated sources, comes from doubling windows [U, 2U] integrated by
/// adaptive Simpson until the increment falls below 1e-8, or U passes
/// `horizon` while the increments fail to decay.
pub fn osgood_test(source: &SourceTerm, m: f64, horizon: f64) -> Osgood {
    assert!(m > 0.0 && m.is_finite(), "osgood lower limit must be positive, got {m}");
    assert!(source.eval_f(m) > 0.0, "osgood test needs f(m) > 0");
    if let Some(terms) = source.power_terms() {
        let q_lead = terms.iter().map(|t| t.exponent).fold(f64::NEG_INFINITY, f64::max);
        if q_lead <= 1.0 {
            return Osgood::Divergent;
        }
    }
    let inv = |u: f64| 1.0 / source.eval_f(u);
    let mut total = 0.0;
    let mut upper = m;
    let mut prev_inc = f64::INFINITY;
    for _ in 0..200 {
        let inc = adaptive_simpson(&inv, upper, 2.0 * upper, 1e-10);
        total += inc;
        upper *= 2.0;
        if inc < 1e-8 {
            return Osgood::Convergent { integral: total };
        }
        if upper > horizon {
            if inc >= 0.9 * prev_inc {
                return Osgood::Divergent;
            }
            // Increments still decay: keep integrating toward the cutoff.
        }
        prev_inc = inc;
    }
    // Slow but strictly decaying increments all the way to the iteration
    // cap are treated as convergent with the partial sum as the estimate.
    Osgood::Convergent { integral: total }
}

/// Unresolved textual form of a source, as written in configs and on the
/// command line. Resolving injects the eigenvalue (for `eigscaled`) and
/// reads knot files (for `table`).
#[derive(Debug, Clone, PartialEq)]
pub enum SourceSpec {
    PowerSum(Vec<(f64, f64)>),
    EigenScaled { c: f64 },
    Table { path: String },
}

impl SourceSpec {
    /// Parses `powersum: 1*u^3 + 0.5*u^2`, `eigscaled: c=3`, or
    /// `table: knots.csv`.
    pub fn parse(s: &str) -> Result<Self> {
        let (kind, body) = s
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("source spec {s:?} needs a `kind:` prefix")))?;
        let body = body.trim();
        match kind.trim() {
            "powersum" => {
                let mut terms = Vec::new();
                for raw in body.split('+') {
                    let raw = raw.trim();
                    if raw.is_empty() {
                        return Err(Error::Config(format!("empty term in power sum {body:?}")));
                    }
                    let (coeff_s, pow_s) = match raw.split_once('*') {
                        Some((a, b)) => (a.trim(), b.trim()),
                        None => ("1", raw),
                    };
                    let coeff: f64 = coeff_s
                        .parse()
                        .map_err(|_| Error::Config(format!("bad coefficient {coeff_s:?}")))?;
                    let exponent: f64 = match pow_s.strip_prefix("u") {
                        Some("") => 1.0,
                        Some(rest) => {
                            let e = rest.strip_prefix('^').ok_or_else(|| {
                                Error::Config(format!("bad power term {raw:?}"))
                            })?;
                            e.parse().map_err(|_| Error::Config(format!("bad exponent {e:?}")))?
                        }
                        None => return Err(Error::Config(format!("bad power term {raw:?}"))),
                    };
                    terms.push((coeff, exponent));
                }
                SourceTerm::power_sum(terms.clone()).map_err(|e| Error::Config(e.to_string()))?;
                Ok(SourceSpec::PowerSum(terms))
            }
            "eigscaled" => {
                let c = body
                    .strip_prefix("c=")
                    .ok_or_else(|| Error::Config(format!("eigscaled spec needs c=, got {body:?}")))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad eigscaled constant in {body:?}")))?;
                if !(c.is_finite() && c > 0.0) {
                    return Err(Error::Config(format!("eigscaled c must be > 0, got {c}")));
                }
                Ok(SourceSpec::EigenScaled { c })
            }
            "table" => {
                if body.is_empty() {
                    return Err(Error::Config("table spec needs a file path".into()));
                }
                Ok(SourceSpec::Table { path: body.to_string() })
            }
            other => Err(Error::Config(format!("unknown source kind {other:?}"))),
        }
    }

    /// True when resolution needs the first eigenvalue of the domain.
    pub fn needs_lambda(&self) -> bool {
        matches!(self, SourceSpec::EigenScaled { .. })
    }

    /// Builds the concrete source term. `lambda` is consumed only by
    /// `eigscaled`; table paths are resolved relative to `base_dir`.
    pub fn resolve(&self, p: f64, lambda: Option<f64>, base_dir: &std::path::Path) -> Result<SourceTerm> {
        match self {
            SourceSpec::PowerSum(terms) => SourceTerm::power_sum(terms.clone()),
            SourceSpec::EigenScaled { c } => {
                let lambda = lambda.ok_or_else(|| {
                    Error::Config("eigscaled source needs the first eigenvalue".into())
                })?;
                SourceTerm::eigen_scaled(*c, p, lambda)
            }
            SourceSpec::Table { path } => {
                let full = base_dir.join(path);
                let text = std::fs::read_to_string(&full)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", full.display())))?;
                let mut knots = Vec::new();
                for (ln, line) in text.lines().enumerate() {
                    let line = line.trim();
                    if line.is_empty() || line.starts_with('#') {
                        continue;
                    }
                    let (a, b) = line.split_once(',').ok_or_else(|| {
                        Error::Config(format!("{}:{}: expected `u,f`", full.display(), ln + 1))
                    })?;
                    let u: f64 = a.trim().parse().map_err(|_| {
                        Error::Config(format!("{}:{}: bad abscissa {a:?}", full.display(), ln + 1))
                    })?;
                    let f: f64 = b.trim().parse().map_err(|_| {
                        Error::Config(format!("{}:{}: bad value {b:?}", full.display(), ln + 1))
                    })?;
                    knots.push((u, f));
                }
                SourceTerm::tabulated(knots)
            }
        }
    }
}

impl fmt::Display for SourceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SourceSpec::PowerSum(terms) => {
                write!(f, "powersum: ")?;
                for (i, (a, q)) in terms.iter().enumerate() {
                    if i > 0 {
                        write!(f, " + ")?;
                    }
                    if *q == 1.0 {
                        write!(f, "{a}*u")?;
                    } else {
                        write!(f, "{a}*u^{q}")?;
                    }
                }
                Ok(())
            }
            SourceSpec::EigenScaled { c } => write!(f, "eigscaled: c={c}"),
            SourceSpec::Table { path } => write!(f, "table: {path}"),
        }
    }
}

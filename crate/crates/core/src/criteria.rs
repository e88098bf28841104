//! The three-way discreteness criterion for tridiagonal operators with
//! killing, plus the sufficient-condition toolbox built on the harmonic
//! ratio sequence.
//!
//! With A_n = sum_{j<=n} mu_j h_j^2 and t_k = 1/(h_k h_{k+1} mu_k b_k):
//!
//! * minimal form: when sum t_k < inf, the spectrum is discrete iff
//!   S_n = A_n * sum_{k>=n} t_k -> 0 (inner sum starts at k = n);
//! * maximal form: when sum mu_j h_j^2 < inf, discrete iff
//!   (A_inf - A_n) * sum_{k<=n} t_k -> 0 (outer sum starts at j = n+1);
//! * both series divergent: not discrete, no products needed.
//!
//! The index discipline matters: the two parts use different cut points and
//! swapping either changes results by a detectable margin.

use serde::Serialize;
use thiserror::Error;

use crate::harmonic::{self, HarmonicError, HarmonicSeq};
use crate::logdomain::{LogScalar, LogSumAcc};
use crate::model::{DiscreteModel, MeasureCache, ModelError};
use crate::series::{
    self, fit_line, Certification, SeriesSamples, TailControl, TailKind,
};
pub use crate::series::{stolz_limit, Monotonicity, StolzBound, StolzError};

#[derive(Debug, Error)]
pub enum CriteriaError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Harmonic(#[from] HarmonicError),
    #[error("series {0} has an uncertified (unknown) tail; cannot evaluate the product")]
    UnknownTail(&'static str),
    #[error("tail class detection failed: {0}")]
    NoTailClass(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Mode {
    Min,
    Max,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    DiscreteMin,
    DiscreteMax,
    BothDiscrete,
    NotDiscrete,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Branch {
    Part1,
    Part2,
    Part3,
}

/// Per-side outcome before combining into the overall verdict.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SideVerdict {
    Discrete,
    NotDiscrete,
    Inconclusive,
}

/// Shared caches for one model: measures, harmonic sequence, series terms.
pub struct DiscreteAnalysis {
    n_cut: usize,
    log_mu: Vec<f64>,
    log_b: Vec<f64>,
    pub seq: HarmonicSeq,
}

impl DiscreteAnalysis {
    /// Build caches up to `n_cut` (series terms need h_{k+1}, so the harmonic
    /// sequence runs one index further).
    pub fn new(model: &DiscreteModel, n_cut: usize) -> Result<DiscreteAnalysis, CriteriaError> {
        let seq = harmonic::compute(model, n_cut)?;
        let mut cache = MeasureCache::new(model);
        cache.ensure(n_cut)?;
        let log_mu = (0..=n_cut)
            .map(|n| cache.log_mu(n))
            .collect::<Result<Vec<_>, _>>()?;
        let log_b = (0..=n_cut)
            .map(|n| cache.log_b(n))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(DiscreteAnalysis {
            n_cut,
            log_mu,
            log_b,
            seq,
        })
    }

    pub fn n_cut(&self) -> usize {
        self.n_cut
    }

    /// log(mu_j h_j^2)
    pub fn log_muh2(&self, j: usize) -> f64 {
        self.log_mu[j] + 2.0 * self.seq.log_h[j]
    }

    /// log t_k = -log(h_k h_{k+1} mu_k b_k)
    pub fn log_t(&self, k: usize) -> f64 {
        -(self.seq.log_h[k] + self.seq.log_h[k + 1] + self.log_mu[k] + self.log_b[k])
    }

    pub fn log_mu_at(&self, n: usize) -> f64 {
        self.log_mu[n]
    }

    pub fn log_b_at(&self, n: usize) -> f64 {
        self.log_b[n]
    }
}

/// Incremental partial sums A_n = sum_{j<=n} mu_j h_j^2 in log domain.
pub struct SeriesA {
    acc: LogSumAcc,
    next: usize,
}

impl SeriesA {
    pub fn new() -> SeriesA {
        SeriesA {
            acc: LogSumAcc::new(),
            next: 0,
        }
    }

    /// Partial sum through index n; indices may only grow between calls.
    pub fn value_at(&mut self, analysis: &DiscreteAnalysis, n: usize) -> LogScalar {
        assert!(self.next == 0 || n >= self.next - 1, "SeriesA only grows");
        while self.next <= n {
            self.acc.add_log(analysis.log_muh2(self.next));
            self.next += 1;
        }
        LogScalar::from_log(self.acc.log_value())
    }
}

impl Default for SeriesA {
    fn default() -> Self {
        Self::new()
    }
}

/// B_n = sum_{k>=n} t_k with tail certification; None when the tail is
/// certified divergent, error when unknown.
pub fn series_b(
    analysis: &DiscreteAnalysis,
    n: usize,
    ctl: &TailControl,
) -> Result<Option<LogScalar>, CriteriaError> {
    let s = series::sample_series(|k| analysis.log_t(k), analysis.n_cut, &[n], ctl);
    match s.cert {
        Certification::Convergent(_) => Ok(Some(LogScalar::from_log(s.log_suffix[0]))),
        Certification::Divergent(_) => Ok(None),
        Certification::Unknown(_) => Err(CriteriaError::UnknownTail("sum 1/(h h+ mu b)")),
    }
}

/// Part-(1) product A_n * B_n (inner sum includes k = n).
pub fn product_min(
    analysis: &DiscreteAnalysis,
    n: usize,
    ctl: &TailControl,
) -> Result<Option<LogScalar>, CriteriaError> {
    let b = series_b(analysis, n, ctl)?;
    let mut a = SeriesA::new();
    Ok(b.map(|b_n| a.value_at(analysis, n).mul(&b_n)))
}

/// Part-(2) product (A_inf - A_n) * C_n: outer sum starts at j = n+1, inner
/// sum ends at k = n. None when the mu h^2 series is certified divergent.
pub fn product_max(
    analysis: &DiscreteAnalysis,
    n: usize,
    ctl: &TailControl,
) -> Result<Option<LogScalar>, CriteriaError> {
    let s = series::sample_series(|j| analysis.log_muh2(j), analysis.n_cut, &[n], ctl);
    match s.cert {
        Certification::Divergent(_) => Ok(None),
        Certification::Unknown(_) => Err(CriteriaError::UnknownTail("sum mu h^2")),
        Certification::Convergent(_) => {
            let outer = s.log_suffix_next[0];
            let mut inner = LogSumAcc::new();
            for k in 0..=n {
                inner.add_log(analysis.log_t(k));
            }
            Ok(Some(LogScalar::from_log(outer + inner.log_value())))
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CertSummary {
    pub status: &'static str,
    pub kind: &'static str,
    pub exponent: Option<f64>,
    pub log_ratio: Option<f64>,
}

impl CertSummary {
    fn from(cert: &Certification) -> CertSummary {
        let status = match cert {
            Certification::Convergent(_) => "convergent",
            Certification::Divergent(_) => "divergent",
            Certification::Unknown(_) => "unknown",
        };
        match cert.kind() {
            TailKind::Algebraic { exponent } => CertSummary {
                status,
                kind: "algebraic",
                exponent: Some(exponent),
                log_ratio: None,
            },
            TailKind::Exponential { log_ratio } => CertSummary {
                status,
                kind: "exponential",
                exponent: None,
                log_ratio: Some(log_ratio),
            },
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TracePoint {
    pub n: usize,
    pub log_s: f64,
    pub s: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SideReport {
    pub verdict: SideVerdict,
    pub branch: Branch,
    pub trace: Vec<TracePoint>,
    /// slope of log S_n against log n over the last decade of samples
    pub fitted_exponent: Option<f64>,
    pub slope_stderr: Option<f64>,
    /// S at the largest sample
    pub level: Option<f64>,
    pub note: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct SeriesFlags {
    pub mu_h2: CertSummary,
    pub inv_hh_mu_b: CertSummary,
}

#[derive(Clone, Debug, Serialize)]
pub struct CriterionReport {
    pub mode: Mode,
    pub verdict: Verdict,
    pub series_flags: SeriesFlags,
    pub min_side: Option<SideReport>,
    pub max_side: Option<SideReport>,
    pub n_max: usize,
    pub delta: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct FitOptions {
    /// slope threshold separating "vanishes" from "flat"
    pub delta: f64,
    /// geometric spacing of trace samples
    pub sample_ratio: f64,
    pub tail: TailControl,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            delta: 0.05,
            sample_ratio: 1.25,
            tail: TailControl::default(),
        }
    }
}

fn decide_side(
    samples: &[usize],
    log_s: &[f64],
    n_max: usize,
    branch: Branch,
    delta: f64,
) -> SideReport {
    let trace: Vec<TracePoint> = samples
        .iter()
        .zip(log_s)
        .map(|(&n, &l)| TracePoint {
            n,
            log_s: l,
            s: l.exp(),
        })
        .collect();
    // fit over the last decade of samples
    let lo = (n_max as f64 / 10.0).floor() as usize;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&n, &l) in samples.iter().zip(log_s) {
        if n >= lo && l.is_finite() {
            xs.push((n as f64).ln());
            ys.push(l);
        }
    }
    if xs.len() < 4 {
        return SideReport {
            verdict: SideVerdict::Inconclusive,
            branch,
            trace,
            fitted_exponent: None,
            slope_stderr: None,
            level: None,
            note: "too few finite samples in the last decade to fit a slope".into(),
        };
    }
    let fit = fit_line(&xs, &ys);
    let level = ys.last().unwrap().exp();
    let (verdict, note) = if !fit.slope.is_finite() || fit.slope_stderr > 0.25 {
        (
            SideVerdict::Inconclusive,
            format!("slope fit unstable (stderr {:.3})", fit.slope_stderr),
        )
    } else if fit.slope < -delta {
        (
            SideVerdict::Discrete,
            format!("S_n vanishes: slope {:.4} < -{delta}", fit.slope),
        )
    } else if fit.slope > delta {
        (
            SideVerdict::NotDiscrete,
            format!("S_n grows: slope {:.4} > {delta}", fit.slope),
        )
    } else {
        (
            SideVerdict::NotDiscrete,
            format!(
                "S_n flat at level {level:.4e}: slope {:.4} within +-{delta}",
                fit.slope
            ),
        )
    };
    SideReport {
        verdict,
        branch,
        trace,
        fitted_exponent: Some(fit.slope),
        slope_stderr: Some(fit.slope_stderr),
        level: Some(level),
        note,
    }
}

fn divergent_side(branch: Branch, which: &str) -> SideReport {
    SideReport {
        verdict: SideVerdict::NotDiscrete,
        branch,
        trace: Vec::new(),
        fitted_exponent: None,
        slope_stderr: None,
        level: None,
        note: format!("{which} certified divergent: the product is infinite for every n"),
    }
}

fn unknown_side(branch: Branch, which: &str) -> SideReport {
    SideReport {
        verdict: SideVerdict::Inconclusive,
        branch,
        trace: Vec::new(),
        fitted_exponent: None,
        slope_stderr: None,
        level: None,
        note: format!("{which} tail could not be certified"),
    }
}

/// Evaluate the criterion for the requested domain mode.
pub fn classify(
    model: &DiscreteModel,
    mode: Mode,
    n_max: usize,
    opts: &FitOptions,
) -> Result<CriterionReport, CriteriaError> {
    let n_cut = (2 * n_max).max(n_max + 4 * opts.tail.window).max(64);
    let analysis = DiscreteAnalysis::new(model, n_cut)?;
    classify_analysis(&analysis, mode, n_max, opts)
}

/// Same as [`classify`] but reusing prebuilt caches.
pub fn classify_analysis(
    analysis: &DiscreteAnalysis,
    mode: Mode,
    n_max: usize,
    opts: &FitOptions,
) -> Result<CriterionReport, CriteriaError> {
    let samples = series::geometric_samples(1, n_max, opts.sample_ratio);
    let a = series::sample_series(|j| analysis.log_muh2(j), analysis.n_cut, &samples, &opts.tail);
    let t = series::sample_series(|k| analysis.log_t(k), analysis.n_cut, &samples, &opts.tail);
    let series_flags = SeriesFlags {
        mu_h2: CertSummary::from(&a.cert),
        inv_hh_mu_b: CertSummary::from(&t.cert),
    };

    // Part (3): both series divergent forces NotDiscrete without products.
    if a.cert.is_divergent() && t.cert.is_divergent() {
        let side = SideReport {
            verdict: SideVerdict::NotDiscrete,
            branch: Branch::Part3,
            trace: Vec::new(),
            fitted_exponent: None,
            slope_stderr: None,
            level: None,
            note: "both sum mu h^2 and sum 1/(h h+ mu b) diverge".into(),
        };
        return Ok(CriterionReport {
            mode,
            verdict: Verdict::NotDiscrete,
            series_flags,
            min_side: matches!(mode, Mode::Min | Mode::Both).then(|| side.clone()),
            max_side: matches!(mode, Mode::Max | Mode::Both).then_some(side),
            n_max,
            delta: opts.delta,
        });
    }

    let min_side = matches!(mode, Mode::Min | Mode::Both).then(|| min_side_report(analysis, &a, &t, n_max, opts));
    let max_side = matches!(mode, Mode::Max | Mode::Both).then(|| max_side_report(&a, &t, n_max, opts));

    let verdict = match mode {
        Mode::Min => match min_side.as_ref().unwrap().verdict {
            SideVerdict::Discrete => Verdict::DiscreteMin,
            SideVerdict::NotDiscrete => Verdict::NotDiscrete,
            SideVerdict::Inconclusive => Verdict::Inconclusive,
        },
        Mode::Max => match max_side.as_ref().unwrap().verdict {
            SideVerdict::Discrete => Verdict::DiscreteMax,
            SideVerdict::NotDiscrete => Verdict::NotDiscrete,
            SideVerdict::Inconclusive => Verdict::Inconclusive,
        },
        Mode::Both => {
            use SideVerdict::*;
            match (
                min_side.as_ref().unwrap().verdict,
                max_side.as_ref().unwrap().verdict,
            ) {
                (Discrete, Discrete) => Verdict::BothDiscrete,
                (Discrete, NotDiscrete) => Verdict::DiscreteMin,
                (NotDiscrete, Discrete) => Verdict::DiscreteMax,
                (NotDiscrete, NotDiscrete) => Verdict::NotDiscrete,
                _ => Verdict::Inconclusive,
            }
        }
    };
    Ok(CriterionReport {
        mode,
        verdict,
        series_flags,
        min_side,
        max_side,
        n_max,
        delta: opts.delta,
    })
}

fn min_side_report(
    analysis: &DiscreteAnalysis,
    a: &SeriesSamples,
    t: &SeriesSamples,
    n_max: usize,
    opts: &FitOptions,
) -> SideReport {
    match t.cert {
        Certification::Divergent(_) => divergent_side(Branch::Part1, "sum 1/(h h+ mu b)"),
        Certification::Unknown(_) => unknown_side(Branch::Part1, "sum 1/(h h+ mu b)"),
        Certification::Convergent(_) => {
            let _ = analysis;
            let log_s: Vec<f64> = a
                .log_prefix
                .iter()
                .zip(&t.log_suffix)
                .map(|(&p, &s)| p + s)
                .collect();
            decide_side(&a.indices, &log_s, n_max, Branch::Part1, opts.delta)
        }
    }
}

fn max_side_report(
    a: &SeriesSamples,
    t: &SeriesSamples,
    n_max: usize,
    opts: &FitOptions,
) -> SideReport {
    match a.cert {
        Certification::Divergent(_) => divergent_side(Branch::Part2, "sum mu h^2"),
        Certification::Unknown(_) => unknown_side(Branch::Part2, "sum mu h^2"),
        Certification::Convergent(_) => {
            let log_s: Vec<f64> = a
                .log_suffix_next
                .iter()
                .zip(&t.log_prefix)
                .map(|(&s, &p)| s + p)
                .collect();
            decide_side(&a.indices, &log_s, n_max, Branch::Part2, opts.delta)
        }
    }
}

// ---- sufficient-condition toolbox ----

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum TestOutcome {
    /// evidence for empty essential spectrum
    Empty,
    /// evidence for nonempty essential spectrum
    NonEmpty,
    PreconditionUnmet,
    Indeterminate,
}

#[derive(Clone, Debug, Serialize)]
pub struct SufficientTest {
    pub name: &'static str,
    pub outcome: TestOutcome,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct SufficientReport {
    pub tests: Vec<SufficientTest>,
}

/// Evaluate the corollary-style sufficient tests on a tail window of samples.
///
/// (i) B divergent with A divergent: nonempty. (ii) h^2 mu sqrt(a) B -> 0
/// with inf a > 0: empty. (iii) liminf h^2 mu B > 0, or liminf
/// h^2 mu sqrt(a) B > 0 with inf r > 0: nonempty. (iv) the increasing-ratio
/// test with statistic b_n/sqrt(a_n) - r_n^2 sqrt(a_{n+1}) and precondition
/// r_n < (b_n/(u_n a_{n+1}))^(1/4).
pub fn sufficient_tests(
    model: &DiscreteModel,
    n_max: usize,
    opts: &FitOptions,
) -> Result<SufficientReport, CriteriaError> {
    let n_cut = (2 * n_max).max(n_max + 4 * opts.tail.window).max(64);
    let analysis = DiscreteAnalysis::new(model, n_cut)?;
    let samples = series::geometric_samples(n_max / 100 + 1, n_max, opts.sample_ratio);
    let a = series::sample_series(|j| analysis.log_muh2(j), n_cut, &samples, &opts.tail);
    let t = series::sample_series(|k| analysis.log_t(k), n_cut, &samples, &opts.tail);
    let mut tests = Vec::new();

    // (i)
    tests.push(if t.cert.is_divergent() && a.cert.is_divergent() {
        SufficientTest {
            name: "B and A both divergent",
            outcome: TestOutcome::NonEmpty,
            detail: "B_n = inf with A_n -> inf".into(),
        }
    } else {
        SufficientTest {
            name: "B and A both divergent",
            outcome: TestOutcome::PreconditionUnmet,
            detail: format!(
                "cert(A) = {:?}, cert(B) = {:?}",
                CertSummary::from(&a.cert).status,
                CertSummary::from(&t.cert).status
            ),
        }
    });

    if !t.cert.is_convergent() {
        tests.push(SufficientTest {
            name: "h^2 mu sqrt(a) B limit",
            outcome: TestOutcome::PreconditionUnmet,
            detail: "B not certified convergent".into(),
        });
        return Ok(SufficientReport { tests });
    }

    // tail statistics at the sample points
    let mut q_sqrt_a = Vec::new(); // h^2 mu sqrt(a) B
    let mut q_plain = Vec::new(); // h^2 mu B
    let mut min_a: f64 = f64::INFINITY;
    let mut min_r: f64 = f64::INFINITY;
    for (pos, &n) in samples.iter().enumerate() {
        let a_n = model.a(n)?;
        let log_base = 2.0 * analysis.seq.log_h[n] + analysis.log_mu_at(n) + t.log_suffix[pos];
        q_sqrt_a.push(log_base + 0.5 * a_n.ln());
        q_plain.push(log_base);
        min_a = min_a.min(a_n);
        min_r = min_r.min(analysis.seq.r[n]);
    }
    let xs: Vec<f64> = samples.iter().map(|&n| (n as f64).ln()).collect();
    let half = xs.len() / 2;
    let fit_sqrt = fit_line(&xs[half..], &q_sqrt_a[half..]);
    let last_sqrt = *q_sqrt_a.last().unwrap();
    let last_plain = *q_plain.last().unwrap();

    // (ii)
    tests.push(if min_a > 1e-9 && fit_sqrt.slope < -opts.delta {
        SufficientTest {
            name: "h^2 mu sqrt(a) B limit",
            outcome: TestOutcome::Empty,
            detail: format!(
                "inf a = {min_a:.3e} > 0 and slope {:.3} < 0 (value {:.3e} at n = {n_max})",
                fit_sqrt.slope,
                last_sqrt.exp()
            ),
        }
    } else if min_a <= 1e-9 {
        SufficientTest {
            name: "h^2 mu sqrt(a) B limit",
            outcome: TestOutcome::PreconditionUnmet,
            detail: format!("inf a = {min_a:.3e} not bounded away from 0"),
        }
    } else {
        SufficientTest {
            name: "h^2 mu sqrt(a) B limit",
            outcome: TestOutcome::Indeterminate,
            detail: format!("slope {:.3} not clearly negative", fit_sqrt.slope),
        }
    });

    // (iii)
    let fit_plain = fit_line(&xs[half..], &q_plain[half..]);
    let plain_positive = fit_plain.slope > -opts.delta && last_plain > (-60.0f64).max(f64::MIN);
    let sqrt_positive = fit_sqrt.slope > -opts.delta && min_r > 1e-9;
    tests.push(if plain_positive || sqrt_positive {
        SufficientTest {
            name: "liminf h^2 mu B > 0",
            outcome: TestOutcome::NonEmpty,
            detail: format!(
                "h^2 mu B level {:.3e} slope {:.3}; variant with sqrt(a): level {:.3e} slope {:.3}, inf r = {min_r:.3e}",
                last_plain.exp(),
                fit_plain.slope,
                last_sqrt.exp(),
                fit_sqrt.slope
            ),
        }
    } else {
        SufficientTest {
            name: "liminf h^2 mu B > 0",
            outcome: TestOutcome::Indeterminate,
            detail: format!(
                "h^2 mu B slope {:.3}, sqrt(a) variant slope {:.3}",
                fit_plain.slope, fit_sqrt.slope
            ),
        }
    });

    // (iv): ratio test. Precondition r_n < (b_n/(u_n a_{n+1}))^(1/4), and the
    // reduction needs h_n^2 mu_n sqrt(a_n) -> inf.
    let mut precondition_ok = true;
    let mut stat = Vec::new();
    for &n in &samples {
        let b_n = model.b(n)?;
        let a_n = model.a(n)?;
        let a_next = model.a(n + 1)?;
        let u_n = analysis.seq.u[n];
        if analysis.seq.r[n] >= (b_n / (u_n * a_next)).powf(0.25) {
            precondition_ok = false;
        }
        stat.push(b_n / a_n.sqrt() - analysis.seq.r[n].powi(2) * a_next.sqrt());
    }
    let mut grows = Vec::new();
    for (pos, &n) in samples.iter().enumerate() {
        let log_g = 2.0 * analysis.seq.log_h[n] + analysis.log_mu_at(n) + 0.5 * model.a(n)?.ln();
        grows.push(log_g);
        let _ = pos;
    }
    let grow_fit = fit_line(&xs[half..], &grows[half..]);
    let grows_to_inf = grow_fit.slope > opts.delta || grows.last().unwrap() - grows[0] > 5.0;
    tests.push(if !precondition_ok || !grows_to_inf {
        SufficientTest {
            name: "ratio statistic b/sqrt(a) - r^2 sqrt(a+)",
            outcome: TestOutcome::PreconditionUnmet,
            detail: format!(
                "r < (b/(u a+))^(1/4) held: {precondition_ok}; h^2 mu sqrt(a) increasing: {grows_to_inf}"
            ),
        }
    } else {
        let stat_fit = fit_line(
            &xs[half..],
            &stat[half..].iter().map(|&s| s.max(1e-300).ln()).collect::<Vec<_>>(),
        );
        let last = *stat.last().unwrap();
        let max_tail = stat[half..].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if stat_fit.slope > opts.delta && last > 10.0 {
            SufficientTest {
                name: "ratio statistic b/sqrt(a) - r^2 sqrt(a+)",
                outcome: TestOutcome::Empty,
                detail: format!(
                    "statistic -> inf (slope {:.3}, value {last:.3e} at n = {n_max})",
                    stat_fit.slope
                ),
            }
        } else if min_r > 1e-9 && stat_fit.slope.abs() <= opts.delta || max_tail.is_finite() && stat_fit.slope < opts.delta && min_r > 1e-9 {
            SufficientTest {
                name: "ratio statistic b/sqrt(a) - r^2 sqrt(a+)",
                outcome: TestOutcome::NonEmpty,
                detail: format!(
                    "statistic bounded (sup over tail {max_tail:.4}), inf r = {min_r:.3e} > 0"
                ),
            }
        } else {
            SufficientTest {
                name: "ratio statistic b/sqrt(a) - r^2 sqrt(a+)",
                outcome: TestOutcome::Indeterminate,
                detail: format!("statistic slope {:.3}, inf r = {min_r:.3e}", stat_fit.slope),
            }
        }
    });

    Ok(SufficientReport { tests })
}

// ---- tail-class shortcut ----

/// Joint tail class covering both series at once.
#[derive(Clone, Copy, Debug, Serialize)]
pub enum ProductTailClass {
    /// mu h^2 ~ n^alpha and 1/t ~ n^beta
    Algebraic { alpha: f64, beta: f64 },
    /// mu h^2 ~ e^(alpha n) and 1/t ~ e^(beta n)
    Exponential { alpha: f64, beta: f64 },
}

/// Fit the joint tail class of mu_n h_n^2 and h_n h_{n+1} mu_n b_n over a
/// trailing window. Returns an error when the two series disagree in kind.
pub fn detect_tail_class(
    analysis: &DiscreteAnalysis,
    ctl: &TailControl,
) -> Result<ProductTailClass, CriteriaError> {
    let n_cut = analysis.n_cut;
    let window = ctl.window.min(n_cut / 2).max(3);
    let ns: Vec<f64> = (n_cut - window + 1..=n_cut).map(|k| k as f64).collect();
    let lh: Vec<f64> = (n_cut - window + 1..=n_cut)
        .map(|k| analysis.log_muh2(k))
        .collect();
    let lt: Vec<f64> = (n_cut - window + 1..=n_cut)
        .map(|k| -analysis.log_t(k))
        .collect();
    let ca = series::certify_tail(&ns, &lh, ctl);
    let cb = series::certify_tail(&ns, &lt, ctl);
    match (ca.kind(), cb.kind()) {
        (TailKind::Algebraic { exponent: alpha }, TailKind::Algebraic { exponent: beta }) => {
            Ok(ProductTailClass::Algebraic { alpha, beta })
        }
        (
            TailKind::Exponential { log_ratio: alpha },
            TailKind::Exponential { log_ratio: beta },
        ) => Ok(ProductTailClass::Exponential { alpha, beta }),
        (ka, kb) => Err(CriteriaError::NoTailClass(format!(
            "mixed tail kinds: mu h^2 is {ka:?}, h h+ mu b is {kb:?}"
        ))),
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ShortcutValue {
    /// the classical equivalent expression (n^2 r/b or r/b and duals), raw
    pub log_raw: f64,
    /// raw divided by the leading sum constants the raw form drops; this is
    /// the one comparable with the direct product within O(1/n)
    pub log_corrected: f64,
}

/// Fast-path equivalent of the part-(1)/(2) product at index n.
///
/// Algebraic tails: S_n ~ n^2 r_n / b_n (min) and n^2/(a_{n+1} r_n) (max);
/// exponential tails: r_n/b_n and 1/(a_{n+1} r_n). The raw forms drop the
/// constants (alpha+1)(beta-1) (algebraic) resp. the geometric-sum factors,
/// which for steep tails are far from 1; `log_corrected` reinstates them from
/// the fitted exponents so the cross-check against the direct product is
/// meaningful.
pub fn tail_shortcut(
    model: &DiscreteModel,
    analysis: &DiscreteAnalysis,
    class: &ProductTailClass,
    n: usize,
    mode: Mode,
) -> Result<ShortcutValue, CriteriaError> {
    let r_n = analysis.seq.r[n];
    let (log_raw, correction) = match (class, mode) {
        (ProductTailClass::Algebraic { alpha, beta }, Mode::Min) => (
            2.0 * (n as f64).ln() + r_n.ln() - model.b(n)?.ln(),
            ((alpha + 1.0) * (beta - 1.0)).max(1e-12).ln(),
        ),
        (ProductTailClass::Algebraic { alpha, beta }, _) => (
            2.0 * (n as f64).ln() - model.a(n + 1)?.ln() - r_n.ln(),
            ((alpha + 1.0) * (beta - 1.0)).max(1e-12).ln(),
        ),
        (ProductTailClass::Exponential { alpha, beta }, Mode::Min) => (
            r_n.ln() - model.b(n)?.ln(),
            (-((-alpha).exp()).ln_1p()) + (-((-beta).exp()).ln_1p()),
        ),
        (ProductTailClass::Exponential { alpha, beta }, _) => (
            -model.a(n + 1)?.ln() - r_n.ln(),
            (-((-alpha).exp()).ln_1p()) + (-((-beta).exp()).ln_1p()),
        ),
    };
    Ok(ShortcutValue {
        log_raw,
        log_corrected: log_raw - correction,
    })
}

//! Discreteness criteria for diffusions: half-line products
//! mu(h^2 1_(0,x)) * nu_hat(h^-2 1_(x,inf)) and duals, and the symmetric
//! whole-line variant with two-sided sums.
//!
//! The classification logic mirrors the discrete module: certify the two
//! integrals' tails, short-circuit when both diverge, otherwise trace the
//! product at geometric x samples and fit the log-log slope over the last
//! decade.

use serde::Serialize;

use crate::continuous::picard::{PicardGrid, PicardSolution};
use crate::continuous::quad::{self, QuadError};
use crate::continuous::{ContinuousError, DiffusionModel, Domain};
use crate::criteria::{Branch, Mode, SideVerdict, Verdict};
use crate::expr::Expr;
use crate::series::{certify_tail, fit_line, Certification, TailControl};

/// Harmonic function handed to the criteria.
pub enum HarmonicFn<'a> {
    One,
    Expr(&'a Expr),
    Picard(&'a PicardSolution),
}

impl HarmonicFn<'_> {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            HarmonicFn::One => 1.0,
            HarmonicFn::Expr(e) => e.eval(x),
            HarmonicFn::Picard(sol) => sol.h(x),
        }
    }

    /// Largest |x| at which this h may be evaluated in the given direction.
    /// Grid-backed solutions must never be extrapolated.
    fn reach(&self, dir: f64) -> Option<f64> {
        match self {
            HarmonicFn::Picard(sol) => {
                let (lo, _) = sol.grid.cells[0];
                let (_, hi) = *sol.grid.cells.last().unwrap();
                Some(if dir > 0.0 { hi } else { -lo })
            }
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct IntegralCert {
    pub status: &'static str,
    pub log_slope: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ContinuousTracePoint {
    pub x: f64,
    pub log_s: f64,
    pub s: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ContinuousReport {
    pub mode: Mode,
    pub verdict: Verdict,
    pub branch: Branch,
    pub mu_h2: IntegralCert,
    pub nu_hat_h2: IntegralCert,
    pub trace: Vec<ContinuousTracePoint>,
    pub fitted_exponent: Option<f64>,
    pub slope_stderr: Option<f64>,
    pub level: Option<f64>,
    pub note: String,
    /// sign changes of h on the probe grid (the criteria assume h != 0 a.e.)
    pub h_sign_changes: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct ContinuousOptions {
    pub quad_tol: f64,
    pub delta: f64,
    pub sample_ratio: f64,
    /// integrals are evaluated exactly out to tail_factor * x_max, then the
    /// improper remainder is added via the 1/x substitution
    pub tail_factor: f64,
}

impl Default for ContinuousOptions {
    fn default() -> Self {
        ContinuousOptions {
            quad_tol: 1e-10,
            delta: 0.05,
            sample_ratio: 1.25,
            tail_factor: 2.0,
        }
    }
}

/// One side of the problem: densities along a ray from 0 with C(x) cached on
/// a collocation grid and extended by adaptive quadrature past its edge.
struct Ray<'m> {
    model: &'m DiffusionModel,
    /// +1.0 for (0, inf), -1.0 for (-inf, 0)
    dir: f64,
    grid: PicardGrid,
    c_nodes: Vec<f64>,
    x_far: f64,
    c_far: f64,
    quad_tol: f64,
}

impl<'m> Ray<'m> {
    fn new(model: &'m DiffusionModel, dir: f64, x_far: f64, quad_tol: f64) -> Result<Ray<'m>, ContinuousError> {
        // C is anchored at theta (0 for these criteria); the grid spans the ray
        let interval = if dir > 0.0 { (0.0, x_far) } else { (-x_far, 0.0) };
        let grid = PicardGrid::build(interval, 0.0, 600)?;
        let drift: Vec<f64> = grid
            .nodes
            .iter()
            .map(|&x| model.b_at(x) / model.a_at(x))
            .collect();
        let c_nodes = grid.cumulative(&drift);
        let c_far = grid.interpolate(&c_nodes, dir * x_far * (1.0 - 1e-12));
        Ok(Ray {
            model,
            dir,
            grid,
            c_nodes,
            x_far,
            c_far,
            quad_tol,
        })
    }

    /// C at signed coordinate |t| along the ray (t >= 0).
    fn c_at(&self, t: f64) -> f64 {
        if t <= self.x_far {
            self.grid.interpolate(&self.c_nodes, self.dir * t * (1.0 - 1e-15))
        } else {
            // extend outward by direct quadrature from the grid edge
            let from = self.dir * self.x_far;
            let to = self.dir * t;
            self.c_far
                + quad::integrate_adaptive(
                    |y| self.model.b_at(y) / self.model.a_at(y),
                    from,
                    to,
                    self.quad_tol,
                )
                .unwrap_or(f64::NAN)
        }
    }

    fn mu_density(&self, t: f64, h: &HarmonicFn) -> f64 {
        let x = self.dir * t;
        let hh = h.eval(x);
        let c = self.c_at(t);
        hh * hh * c.exp() / self.model.a_at(x)
    }

    fn nu_density(&self, t: f64, h: &HarmonicFn) -> f64 {
        let x = self.dir * t;
        let hh = h.eval(x);
        (-self.c_at(t)).exp() / (hh * hh)
    }
}

struct SideIntegrals {
    /// log int over (0, x]
    log_prefix_mu: Vec<f64>,
    log_prefix_nu: Vec<f64>,
    /// log int over (x, inf); +inf when divergent
    log_suffix_mu: Vec<f64>,
    log_suffix_nu: Vec<f64>,
    cert_mu: Certification,
    cert_nu: Certification,
}

fn certify_density(
    ray: &Ray,
    h: &HarmonicFn,
    density_mu: bool,
    x_max: f64,
) -> (Certification, f64) {
    // sample the integrand log-density at geometric points past x_max (kept
    // inside the evaluable reach of h); also return the local log-slope
    // d log f / dx at the far edge for remainder estimation
    let hi = ray.x_far;
    let lo = (0.55 * x_max).min(0.9 * hi);
    let mut xs = Vec::new();
    let mut logs = Vec::new();
    let mut t = lo;
    while t <= hi {
        let d = if density_mu {
            ray.mu_density(t, h)
        } else {
            ray.nu_density(t, h)
        };
        xs.push(t);
        logs.push(d.max(1e-300).ln());
        t *= 1.03;
    }
    let ctl = TailControl::default();
    let m = xs.len();
    let edge_slope = (logs[m - 1] - logs[m - 2]) / (xs[m - 1] - xs[m - 2]);
    (certify_tail(&xs, &logs, &ctl), edge_slope)
}

fn side_integrals(
    ray: &Ray,
    h: &HarmonicFn,
    xs: &[f64],
    opts: &ContinuousOptions,
) -> Result<SideIntegrals, ContinuousError> {
    let x_max = *xs.last().unwrap();
    let (cert_mu, slope_mu) = certify_density(ray, h, true, x_max);
    let (cert_nu, slope_nu) = certify_density(ray, h, false, x_max);

    // prefixes by incremental adaptive quadrature from 0
    let mut log_prefix_mu = Vec::with_capacity(xs.len());
    let mut log_prefix_nu = Vec::with_capacity(xs.len());
    let mut acc_mu = 0.0f64;
    let mut acc_nu = 0.0f64;
    let mut prev = 0.0f64;
    for &x in xs {
        acc_mu += quad::integrate_adaptive(|t| ray.mu_density(t, h), prev, x, opts.quad_tol)?;
        acc_nu += quad::integrate_adaptive(|t| ray.nu_density(t, h), prev, x, opts.quad_tol)?;
        log_prefix_mu.push(acc_mu.max(0.0).ln());
        log_prefix_nu.push(acc_nu.max(0.0).ln());
        prev = x;
    }

    // suffixes: exact out to the ray edge, improper remainder past it. With
    // an everywhere-evaluable h the remainder comes from the 1/x
    // substitution (machine accuracy); a grid-backed h must not be
    // extrapolated, so the remainder uses the fitted decay at the edge
    // (the edge sits well past x_max, making the estimate's share tiny).
    let x_far = ray.x_far;
    let bounded_h = h.reach(ray.dir).is_some();
    let suffix = |density_mu: bool,
                  cert: &Certification,
                  edge_slope: f64|
     -> Result<Vec<f64>, ContinuousError> {
        match cert {
            Certification::Divergent(_) => Ok(vec![f64::INFINITY; xs.len()]),
            Certification::Unknown(_) => Ok(vec![f64::NAN; xs.len()]),
            Certification::Convergent(kind) => {
                let f = |t: f64| {
                    if density_mu {
                        ray.mu_density(t, h)
                    } else {
                        ray.nu_density(t, h)
                    }
                };
                let remainder = if bounded_h {
                    let f_edge = f(x_far * (1.0 - 1e-12));
                    match kind {
                        crate::series::TailKind::Algebraic { exponent } => {
                            if *exponent >= -1.0 {
                                return Ok(vec![f64::NAN; xs.len()]);
                            }
                            f_edge * x_far / (-exponent - 1.0)
                        }
                        crate::series::TailKind::Exponential { .. } => {
                            if edge_slope >= 0.0 {
                                return Ok(vec![f64::NAN; xs.len()]);
                            }
                            f_edge / (-edge_slope)
                        }
                    }
                } else {
                    match quad::tail_integral(&f, x_far, opts.quad_tol) {
                        Ok(v) => v,
                        Err(QuadError::DivergentTail { .. }) => {
                            return Ok(vec![f64::NAN; xs.len()]);
                        }
                        Err(e) => return Err(e.into()),
                    }
                };
                let mut out = vec![0.0f64; xs.len()];
                let mut acc = remainder;
                let mut upper = x_far;
                for (i, &x) in xs.iter().enumerate().rev() {
                    acc += quad::integrate_adaptive(&f, x, upper, opts.quad_tol)?;
                    out[i] = acc.max(0.0).ln();
                    upper = x;
                }
                Ok(out)
            }
        }
    };
    let log_suffix_mu = suffix(true, &cert_mu, slope_mu)?;
    let log_suffix_nu = suffix(false, &cert_nu, slope_nu)?;

    Ok(SideIntegrals {
        log_prefix_mu,
        log_prefix_nu,
        log_suffix_mu,
        log_suffix_nu,
        cert_mu,
        cert_nu,
    })
}

fn cert_summary(c: &Certification, xs: &[f64], logs: &[f64]) -> IntegralCert {
    let slope = fit_line(
        &xs.iter().map(|&x| x.ln()).collect::<Vec<_>>(),
        &logs.iter().map(|&l| if l.is_finite() { l } else { 0.0 }).collect::<Vec<_>>(),
    )
    .slope;
    IntegralCert {
        status: match c {
            Certification::Convergent(_) => "convergent",
            Certification::Divergent(_) => "divergent",
            Certification::Unknown(_) => "unknown",
        },
        log_slope: slope,
    }
}

fn geometric_xs(x_max: f64, ratio: f64) -> Vec<f64> {
    let mut xs = vec![x_max];
    let mut x = x_max;
    let lo = x_max / 200.0;
    while x / ratio > lo {
        x /= ratio;
        xs.push(x);
    }
    xs.reverse();
    xs
}

fn decide(
    xs: &[f64],
    log_s: &[f64],
    opts: &ContinuousOptions,
) -> (SideVerdict, Vec<ContinuousTracePoint>, Option<f64>, Option<f64>, Option<f64>, String) {
    let trace: Vec<ContinuousTracePoint> = xs
        .iter()
        .zip(log_s)
        .map(|(&x, &l)| ContinuousTracePoint {
            x,
            log_s: l,
            s: l.exp(),
        })
        .collect();
    let x_max = *xs.last().unwrap();
    let mut fx = Vec::new();
    let mut fy = Vec::new();
    for (&x, &l) in xs.iter().zip(log_s) {
        if x >= x_max / 10.0 && l.is_finite() {
            fx.push(x.ln());
            fy.push(l);
        }
    }
    if fx.len() < 4 {
        return (
            SideVerdict::Inconclusive,
            trace,
            None,
            None,
            None,
            "too few finite samples to fit".into(),
        );
    }
    let fit = fit_line(&fx, &fy);
    let level = fy.last().unwrap().exp();
    let (v, note) = if !fit.slope.is_finite() || fit.slope_stderr > 0.25 {
        (
            SideVerdict::Inconclusive,
            format!("slope fit unstable (stderr {:.3})", fit.slope_stderr),
        )
    } else if fit.slope < -opts.delta {
        (
            SideVerdict::Discrete,
            format!("product vanishes: slope {:.4}", fit.slope),
        )
    } else {
        (
            SideVerdict::NotDiscrete,
            format!("product does not vanish: slope {:.4}, level {level:.4e}", fit.slope),
        )
    };
    (
        v,
        trace,
        Some(fit.slope),
        Some(fit.slope_stderr),
        Some(level),
        note,
    )
}

/// Sanity check for the b = 0, a = 1, c-bounded-below case: the essential
/// spectrum is empty iff the window integrals int_x^(x+w) c grow without
/// bound. Numerical and heuristic; used to cross-check verdicts, never to
/// produce them.
pub fn molchanov_check(
    model: &DiffusionModel,
    x_max: f64,
    window: f64,
) -> Result<SideVerdict, ContinuousError> {
    for i in 0..200 {
        let x = x_max * (i as f64 + 0.5) / 200.0;
        if model.b_at(x).abs() > 1e-12 || (model.a_at(x) - 1.0).abs() > 1e-12 {
            return Err(ContinuousError::Invalid(
                "the window-integral check applies to b = 0, a = 1 only".into(),
            ));
        }
    }
    let xs = geometric_xs(x_max, 1.5);
    let mut vals = Vec::new();
    for &x in &xs {
        vals.push(quad::integrate_adaptive(|y| model.c_at(y), x, x + window, 1e-9)?);
    }
    let half = vals.len() / 2;
    let last = *vals.last().unwrap();
    let grew = last > 2.0 * vals[half].abs().max(1.0) && last > vals[half];
    let flat = (last - vals[half]).abs() <= 0.2 * last.abs().max(1.0);
    Ok(if grew {
        SideVerdict::Discrete
    } else if flat {
        SideVerdict::NotDiscrete
    } else {
        SideVerdict::Inconclusive
    })
}

fn count_sign_changes(h: &HarmonicFn, x_lo: f64, x_hi: f64) -> usize {
    let mut changes = 0;
    let mut prev = h.eval(x_lo);
    let n = 400;
    for i in 1..=n {
        let x = x_lo + (x_hi - x_lo) * i as f64 / n as f64;
        let v = h.eval(x);
        if prev * v < 0.0 {
            changes += 1;
        }
        prev = v;
    }
    changes
}

/// Half-line criterion with the given harmonic function.
pub fn criteria_halfline(
    model: &DiffusionModel,
    h: &HarmonicFn,
    mode: Mode,
    x_max: f64,
    opts: &ContinuousOptions,
) -> Result<ContinuousReport, ContinuousError> {
    assert!(model.domain == Domain::HalfLine);
    assert!(mode != Mode::Both, "run min and max separately for diffusions");
    let xs = geometric_xs(x_max, opts.sample_ratio);
    let mut x_far = opts.tail_factor * x_max;
    if let Some(reach) = h.reach(1.0) {
        x_far = x_far.min(reach * (1.0 - 1e-9));
        if x_far <= x_max {
            return Err(ContinuousError::Invalid(format!(
                "harmonic solution grid ends at {reach}, too close to x_max = {x_max}; solve on a longer interval"
            )));
        }
    }
    let ray = Ray::new(model, 1.0, x_far, opts.quad_tol)?;
    let side = side_integrals(&ray, h, &xs, opts)?;
    let h_sign_changes = count_sign_changes(h, x_max / 200.0, x_max);

    let mu_cert = cert_summary(&side.cert_mu, &xs, &side.log_prefix_mu);
    let nu_cert = cert_summary(&side.cert_nu, &xs, &side.log_prefix_nu);

    // part (3)
    if side.cert_mu.is_divergent() && side.cert_nu.is_divergent() {
        return Ok(ContinuousReport {
            mode,
            verdict: Verdict::NotDiscrete,
            branch: Branch::Part3,
            mu_h2: mu_cert,
            nu_hat_h2: nu_cert,
            trace: Vec::new(),
            fitted_exponent: None,
            slope_stderr: None,
            level: None,
            note: "both mu(h^2) and nu_hat(h^-2) diverge".into(),
            h_sign_changes,
        });
    }

    let (branch, log_s, gate_cert): (Branch, Vec<f64>, &Certification) = match mode {
        Mode::Min => (
            Branch::Part1,
            side.log_prefix_mu
                .iter()
                .zip(&side.log_suffix_nu)
                .map(|(&p, &s)| p + s)
                .collect(),
            &side.cert_nu,
        ),
        _ => (
            Branch::Part2,
            side.log_suffix_mu
                .iter()
                .zip(&side.log_prefix_nu)
                .map(|(&s, &p)| s + p)
                .collect(),
            &side.cert_mu,
        ),
    };
    match gate_cert {
        Certification::Divergent(_) => {
            let which = if mode == Mode::Min { "nu_hat(h^-2)" } else { "mu(h^2)" };
            return Ok(ContinuousReport {
                mode,
                verdict: Verdict::NotDiscrete,
                branch,
                mu_h2: mu_cert,
                nu_hat_h2: nu_cert,
                trace: Vec::new(),
                fitted_exponent: None,
                slope_stderr: None,
                level: None,
                note: format!("{which} diverges: the product is infinite for every x"),
                h_sign_changes,
            });
        }
        Certification::Unknown(_) => {
            return Ok(ContinuousReport {
                mode,
                verdict: Verdict::Inconclusive,
                branch,
                mu_h2: mu_cert,
                nu_hat_h2: nu_cert,
                trace: Vec::new(),
                fitted_exponent: None,
                slope_stderr: None,
                level: None,
                note: "tail certification failed".into(),
                h_sign_changes,
            });
        }
        Certification::Convergent(_) => {}
    }
    let (side_v, trace, slope, stderr, level, note) = decide(&xs, &log_s, opts);
    let verdict = match (mode, side_v) {
        (_, SideVerdict::Inconclusive) => Verdict::Inconclusive,
        (_, SideVerdict::NotDiscrete) => Verdict::NotDiscrete,
        (Mode::Min, SideVerdict::Discrete) => Verdict::DiscreteMin,
        (_, SideVerdict::Discrete) => Verdict::DiscreteMax,
    };
    Ok(ContinuousReport {
        mode,
        verdict,
        branch,
        mu_h2: mu_cert,
        nu_hat_h2: nu_cert,
        trace,
        fitted_exponent: slope,
        slope_stderr: stderr,
        level,
        note,
        h_sign_changes,
    })
}

/// Whole-line criterion, symmetric case only: the two sides must share
/// their finiteness pattern, and the part-(1)/(2) products are summed over
/// both sides.
pub fn criteria_wholeline(
    model: &DiffusionModel,
    h: &HarmonicFn,
    mode: Mode,
    x_max: f64,
    opts: &ContinuousOptions,
) -> Result<ContinuousReport, ContinuousError> {
    assert!(model.domain == Domain::WholeLine);
    assert!(mode != Mode::Both, "run min and max separately for diffusions");
    let xs = geometric_xs(x_max, opts.sample_ratio);
    let far = |dir: f64| -> Result<f64, ContinuousError> {
        let mut x_far = opts.tail_factor * x_max;
        if let Some(reach) = h.reach(dir) {
            x_far = x_far.min(reach * (1.0 - 1e-9));
            if x_far <= x_max {
                return Err(ContinuousError::Invalid(format!(
                    "harmonic solution grid ends at {reach}, too close to x_max = {x_max}; solve on a longer interval"
                )));
            }
        }
        Ok(x_far)
    };
    let right = Ray::new(model, 1.0, far(1.0)?, opts.quad_tol)?;
    let left = Ray::new(model, -1.0, far(-1.0)?, opts.quad_tol)?;
    let r = side_integrals(&right, h, &xs, opts)?;
    let l = side_integrals(&left, h, &xs, opts)?;
    let h_sign_changes =
        count_sign_changes(h, -x_max, x_max);

    let status = |c: &Certification| match c {
        Certification::Convergent(_) => 0u8,
        Certification::Divergent(_) => 1,
        Certification::Unknown(_) => 2,
    };
    if status(&r.cert_mu) != status(&l.cert_mu) || status(&r.cert_nu) != status(&l.cert_nu) {
        return Err(ContinuousError::Invalid(
            "asymmetric finiteness pattern: outside the implemented symmetric case".into(),
        ));
    }

    let mu_cert = cert_summary(&r.cert_mu, &xs, &r.log_prefix_mu);
    let nu_cert = cert_summary(&r.cert_nu, &xs, &r.log_prefix_nu);

    if r.cert_mu.is_divergent() && r.cert_nu.is_divergent() {
        return Ok(ContinuousReport {
            mode,
            verdict: Verdict::NotDiscrete,
            branch: Branch::Part3,
            mu_h2: mu_cert,
            nu_hat_h2: nu_cert,
            trace: Vec::new(),
            fitted_exponent: None,
            slope_stderr: None,
            level: None,
            note: "all four one-sided integrals diverge".into(),
            h_sign_changes,
        });
    }

    let two_sided = |a: &[f64], b: &[f64], c: &[f64], d: &[f64]| -> Vec<f64> {
        // log( e^(a+b) + e^(c+d) ) per sample
        a.iter()
            .zip(b)
            .zip(c.iter().zip(d))
            .map(|((&a, &b), (&c, &d))| crate::logdomain::log_add(a + b, c + d))
            .collect()
    };
    let (branch, log_s, gate): (Branch, Vec<f64>, u8) = match mode {
        Mode::Min => (
            Branch::Part1,
            two_sided(
                &r.log_prefix_mu,
                &r.log_suffix_nu,
                &l.log_prefix_mu,
                &l.log_suffix_nu,
            ),
            status(&r.cert_nu).max(status(&l.cert_nu)),
        ),
        _ => (
            Branch::Part2,
            two_sided(
                &r.log_suffix_mu,
                &r.log_prefix_nu,
                &l.log_suffix_mu,
                &l.log_prefix_nu,
            ),
            status(&r.cert_mu).max(status(&l.cert_mu)),
        ),
    };
    if gate == 1 {
        return Ok(ContinuousReport {
            mode,
            verdict: Verdict::NotDiscrete,
            branch,
            mu_h2: mu_cert,
            nu_hat_h2: nu_cert,
            trace: Vec::new(),
            fitted_exponent: None,
            slope_stderr: None,
            level: None,
            note: "gating integral diverges: product infinite".into(),
            h_sign_changes,
        });
    }
    if gate == 2 {
        return Ok(ContinuousReport {
            mode,
            verdict: Verdict::Inconclusive,
            branch,
            mu_h2: mu_cert,
            nu_hat_h2: nu_cert,
            trace: Vec::new(),
            fitted_exponent: None,
            slope_stderr: None,
            level: None,
            note: "tail certification failed".into(),
            h_sign_changes,
        });
    }
    let (side_v, trace, slope, stderr, level, note) = decide(&xs, &log_s, opts);
    let verdict = match (mode, side_v) {
        (_, SideVerdict::Inconclusive) => Verdict::Inconclusive,
        (_, SideVerdict::NotDiscrete) => Verdict::NotDiscrete,
        (Mode::Min, SideVerdict::Discrete) => Verdict::DiscreteMin,
        (_, SideVerdict::Discrete) => Verdict::DiscreteMax,
    };
    Ok(ContinuousReport {
        mode,
        verdict,
        branch,
        mu_h2: mu_cert,
        nu_hat_h2: nu_cert,
        trace,
        fitted_exponent: slope,
        slope_stderr: stderr,
        level,
        note,
        h_sign_changes,
    })
}

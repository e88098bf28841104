//! Series machinery shared by the discrete and continuous criteria: tail
//! classification with explicit certification labels, sampled prefix/suffix
//! sums of positive series in log domain, log-log slope fits, and the
//! Stolz-type limit bounds.
//!
//! A numerical tool cannot prove convergence; it separates "certified by
//! structure" (sustained term-ratio below a cap, or fitted algebraic exponent
//! clear of -1) from "unknown", and verdicts inherit those labels.

use serde::Serialize;

use crate::logdomain::LogSumAcc;

/// Detected asymptotic shape of a positive sequence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum TailKind {
    /// terms ~ n^exponent
    Algebraic { exponent: f64 },
    /// terms ~ e^(log_ratio * n); log_ratio is the mean log of successive ratios
    Exponential { log_ratio: f64 },
}

/// Convergence certification for a positive series, with the evidence kind.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Certification {
    Convergent(TailKind),
    Divergent(TailKind),
    Unknown(TailKind),
}

impl Certification {
    pub fn is_convergent(&self) -> bool {
        matches!(self, Certification::Convergent(_))
    }
    pub fn is_divergent(&self) -> bool {
        matches!(self, Certification::Divergent(_))
    }
    pub fn kind(&self) -> TailKind {
        match self {
            Certification::Convergent(k) | Certification::Divergent(k) | Certification::Unknown(k) => *k,
        }
    }
}

/// Thresholds for tail certification.
#[derive(Clone, Copy, Debug)]
pub struct TailControl {
    /// Number of trailing terms examined.
    pub window: usize,
    /// Exponential certificate: every successive ratio in the window must
    /// stay at or below this cap (well away from 1).
    pub ratio_cap: f64,
    /// Algebraic certificate: fitted exponent below this is convergent.
    pub conv_exponent: f64,
    /// Fitted exponent at or above this is divergent. The band in between is
    /// reported Unknown: at desk scale n^-1.05 is indistinguishable from the
    /// harmonic boundary.
    pub div_exponent: f64,
}

impl Default for TailControl {
    fn default() -> Self {
        TailControl {
            window: 200,
            ratio_cap: 0.99,
            conv_exponent: -1.1,
            div_exponent: -1.02,
        }
    }
}

/// Classify the tail of a positive sequence from a trailing window of
/// (index, log term) pairs.
pub fn certify_tail(ns: &[f64], log_terms: &[f64], ctl: &TailControl) -> Certification {
    assert_eq!(ns.len(), log_terms.len());
    assert!(ns.len() >= 3, "certification window too short");
    let m = log_terms.len();
    let diffs: Vec<f64> = (1..m).map(|i| log_terms[i] - log_terms[i - 1]).collect();
    let d_max = diffs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let d_min = diffs.iter().cloned().fold(f64::INFINITY, f64::min);
    let mean_tail = {
        let take = diffs.len().min(20);
        diffs[diffs.len() - take..].iter().sum::<f64>() / take as f64
    };

    if d_min >= -1e-12 {
        // nondecreasing terms: the series cannot converge. Label the growth
        // by whichever of d_k ~ const (exponential) or d_k * n ~ const
        // (algebraic, d log t / d log n -> exponent) fits the window better.
        let kind = if d_max <= 1e-12 {
            TailKind::Algebraic { exponent: 0.0 }
        } else {
            let mid = diffs.len() / 2;
            let (d_mid, d_end) = (diffs[mid].max(1e-300), diffs[diffs.len() - 1].max(1e-300));
            let (n_mid, n_end) = (ns[mid + 1], ns[ns.len() - 1]);
            let err_exp = (d_end / d_mid - 1.0).abs();
            let err_alg = (d_end * n_end / (d_mid * n_mid) - 1.0).abs();
            if err_alg < err_exp {
                let xs: Vec<f64> = ns.iter().map(|&n| n.ln()).collect();
                TailKind::Algebraic {
                    exponent: fit_line(&xs, log_terms).slope,
                }
            } else {
                TailKind::Exponential { log_ratio: mean_tail }
            }
        };
        return Certification::Divergent(kind);
    }
    if d_max <= ctl.ratio_cap.ln() {
        // ratios sustained below the cap: geometric-type decay
        return Certification::Convergent(TailKind::Exponential { log_ratio: mean_tail });
    }
    if d_min >= -ctl.ratio_cap.ln() {
        // ratios sustained above 1/cap: geometric growth
        return Certification::Divergent(TailKind::Exponential { log_ratio: mean_tail });
    }
    // algebraic regime: fit log t against log n
    let xs: Vec<f64> = ns.iter().map(|&n| n.ln()).collect();
    let fit = fit_line(&xs, log_terms);
    let kind = TailKind::Algebraic { exponent: fit.slope };
    if fit.slope <= ctl.conv_exponent {
        Certification::Convergent(kind)
    } else if fit.slope >= ctl.div_exponent {
        Certification::Divergent(kind)
    } else {
        Certification::Unknown(kind)
    }
}

/// Log of the estimated remainder sum_{k > n_cut} t_k given the tail class.
///
/// Exponential: geometric tail t * rho/(1-rho). Algebraic with exponent
/// p < -1: Euler-Maclaurin integral plus half-term, t * (n/(-p-1) + 1/2).
pub fn log_remainder(kind: TailKind, n_cut: f64, log_t_cut: f64) -> f64 {
    match kind {
        TailKind::Exponential { log_ratio } => {
            let rho = log_ratio.exp();
            if rho >= 1.0 {
                return f64::INFINITY;
            }
            log_t_cut + log_ratio - (-rho).ln_1p()
        }
        TailKind::Algebraic { exponent } => {
            if exponent >= -1.0 {
                return f64::INFINITY;
            }
            log_t_cut + (n_cut / (-exponent - 1.0) + 0.5).ln()
        }
    }
}

/// Sampled prefix and suffix sums of a positive series given by log terms.
#[derive(Clone, Debug)]
pub struct SeriesSamples {
    pub indices: Vec<usize>,
    /// log sum_{k <= n}
    pub log_prefix: Vec<f64>,
    /// log sum_{k >= n}; +inf when the tail is certified divergent, NaN when unknown
    pub log_suffix: Vec<f64>,
    /// log sum_{k >= n+1}
    pub log_suffix_next: Vec<f64>,
    pub cert: Certification,
    /// log of the full series when convergent
    pub log_total: Option<f64>,
}

/// Evaluate prefix and suffix sums at the given (ascending) sample indices.
///
/// Terms are summed exactly up to `n_cut`; the tail past the cut is certified
/// from the trailing window and folded in as an estimated remainder. Suffixes
/// are accumulated downward so small tails never suffer cancellation against
/// the head of the series.
pub fn sample_series(
    mut log_term: impl FnMut(usize) -> f64,
    n_cut: usize,
    indices: &[usize],
    ctl: &TailControl,
) -> SeriesSamples {
    assert!(indices.windows(2).all(|w| w[0] < w[1]), "indices must ascend");
    assert!(indices.last().map_or(true, |&n| n + 1 < n_cut));
    let window = ctl.window.min(n_cut / 2).max(3);

    let mut terms = vec![0.0f64; n_cut + 1];
    let mut prefix_acc = LogSumAcc::new();
    let mut log_prefix = vec![f64::NAN; indices.len()];
    let mut next_sample = 0usize;
    for (k, slot) in terms.iter_mut().enumerate() {
        let l = log_term(k);
        *slot = l;
        prefix_acc.add_log(l);
        if next_sample < indices.len() && indices[next_sample] == k {
            log_prefix[next_sample] = prefix_acc.log_value();
            next_sample += 1;
        }
    }

    let ns: Vec<f64> = (n_cut + 1 - window..=n_cut).map(|k| k as f64).collect();
    let logs: Vec<f64> = terms[n_cut + 1 - window..].to_vec();
    let cert = certify_tail(&ns, &logs, ctl);

    let mut log_suffix = vec![f64::NAN; indices.len()];
    let mut log_suffix_next = vec![f64::NAN; indices.len()];
    let mut log_total = None;
    match cert {
        Certification::Convergent(kind) => {
            let mut acc = LogSumAcc::new();
            acc.add_log(log_remainder(kind, n_cut as f64, terms[n_cut]));
            let mut i = indices.len(); // pending suffix: indices[i-1]
            let mut j = indices.len(); // pending suffix_next: indices[j-1] + 1
            for k in (0..=n_cut).rev() {
                acc.add_log(terms[k]);
                if j > 0 && indices[j - 1] + 1 == k {
                    log_suffix_next[j - 1] = acc.log_value();
                    j -= 1;
                }
                if i > 0 && indices[i - 1] == k {
                    log_suffix[i - 1] = acc.log_value();
                    i -= 1;
                }
            }
            log_total = Some(acc.log_value());
        }
        Certification::Divergent(_) => {
            for s in log_suffix.iter_mut().chain(log_suffix_next.iter_mut()) {
                *s = f64::INFINITY;
            }
        }
        Certification::Unknown(_) => {}
    }

    SeriesSamples {
        indices: indices.to_vec(),
        log_prefix,
        log_suffix,
        log_suffix_next,
        cert,
        log_total,
    }
}

/// Geometrically spaced sample indices in [n_lo, n_max] with the given
/// ratio; always ends exactly at n_max.
pub fn geometric_samples(n_lo: usize, n_max: usize, ratio: f64) -> Vec<usize> {
    assert!(ratio > 1.0);
    let mut out = Vec::new();
    let mut n = n_lo.max(1);
    while n <= n_max {
        out.push(n);
        let next = ((n as f64) * ratio).round() as usize;
        n = next.max(n + 1);
    }
    if out.last() != Some(&n_max) {
        out.push(n_max);
    }
    out
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
}

/// Ordinary least squares y = slope * x + intercept.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> LineFit {
    let m = xs.len() as f64;
    assert!(xs.len() == ys.len() && xs.len() >= 2);
    let x_mean = xs.iter().sum::<f64>() / m;
    let y_mean = ys.iter().sum::<f64>() / m;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - x_mean) * (x - x_mean);
        sxy += (x - x_mean) * (y - y_mean);
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let mut ss_res = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        let r = y - (slope * x + intercept);
        ss_res += r * r;
    }
    let dof = (m - 2.0).max(1.0);
    LineFit {
        slope,
        intercept,
        slope_stderr: (ss_res / dof / sxx).sqrt(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Monotonicity {
    /// q strictly increasing to +inf
    Increasing,
    /// q strictly decreasing to 0
    Decreasing,
}

#[derive(Clone, Copy, Debug)]
pub struct StolzBound {
    /// infimum of the difference ratios over the sampled tail
    pub lo: f64,
    /// supremum of the difference ratios
    pub hi: f64,
    /// first index from which q was monotone through the end
    pub n0: usize,
}

#[derive(Debug, thiserror::Error)]
#[error("q is not eventually {expected:?}: violation at index {violation_at}")]
pub struct StolzError {
    pub expected: Monotonicity,
    pub violation_at: usize,
}

/// Two-sided bound on lim p_n/q_n from the difference ratios
/// (p_{n+1} - p_n)/(q_{n+1} - q_n), for q eventually strictly monotone.
///
/// q must be monotone over at least the trailing half of the input; the
/// returned n0 is where uninterrupted monotonicity starts.
pub fn stolz_limit(p: &[f64], q: &[f64], mode: Monotonicity) -> Result<StolzBound, StolzError> {
    assert!(p.len() == q.len() && p.len() >= 3);
    let ok = |dq: f64| match mode {
        Monotonicity::Increasing => dq > 0.0,
        Monotonicity::Decreasing => dq < 0.0,
    };
    let mut n0 = 0;
    for i in 1..q.len() {
        if !ok(q[i] - q[i - 1]) {
            n0 = i;
        }
    }
    if n0 >= q.len() / 2 {
        return Err(StolzError {
            expected: mode,
            violation_at: n0,
        });
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in (n0 + 1)..q.len() {
        let ratio = (p[i] - p[i - 1]) / (q[i] - q[i - 1]);
        lo = lo.min(ratio);
        hi = hi.max(ratio);
    }
    Ok(StolzBound { lo, hi, n0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn certify_pure_power_tails() {
        let ctl = TailControl::default();
        let ns: Vec<f64> = (1000..1200).map(|k| k as f64).collect();
        let mk = |p: f64| -> Vec<f64> { ns.iter().map(|&n| p * n.ln()).collect() };
        assert!(matches!(
            certify_tail(&ns, &mk(-3.0), &ctl),
            Certification::Convergent(TailKind::Algebraic { .. })
        ));
        assert!(matches!(
            certify_tail(&ns, &mk(-1.0), &ctl),
            Certification::Divergent(TailKind::Algebraic { .. })
        ));
        assert!(matches!(
            certify_tail(&ns, &mk(-1.05), &ctl),
            Certification::Unknown(_)
        ));
        assert!(matches!(
            certify_tail(&ns, &mk(0.5), &ctl),
            Certification::Divergent(_)
        ));
    }

    #[test]
    fn certify_geometric_and_flat() {
        let ctl = TailControl::default();
        let ns: Vec<f64> = (100..300).map(|k| k as f64).collect();
        let dec: Vec<f64> = ns.iter().map(|&n| -n * 16f64.ln()).collect();
        assert!(matches!(
            certify_tail(&ns, &dec, &ctl),
            Certification::Convergent(TailKind::Exponential { .. })
        ));
        let flat: Vec<f64> = ns.iter().map(|_| 1.25f64.ln()).collect();
        assert!(certify_tail(&ns, &flat, &ctl).is_divergent());
        let grow: Vec<f64> = ns.iter().map(|&n| 0.3 * n).collect();
        assert!(certify_tail(&ns, &grow, &ctl).is_divergent());
    }

    #[test]
    fn sampled_sums_match_brute_force() {
        // t_k = (k+1)^-3: prefix and suffix against direct summation
        let term = |k: usize| -3.0 * ((k + 1) as f64).ln();
        let idx = vec![10usize, 100, 900];
        let s = sample_series(term, 40_000, &idx, &TailControl::default());
        assert!(s.cert.is_convergent());
        for (pos, &n) in idx.iter().enumerate() {
            let direct: f64 = (0..=n).map(|k| ((k + 1) as f64).powi(-3)).sum();
            assert!((s.log_prefix[pos].exp() - direct).abs() / direct < 1e-12);
            // zeta(3) tail
            let total: f64 = 1.202_056_903_159_594;
            let tail = total - (0..n).map(|k| ((k + 1) as f64).powi(-3)).sum::<f64>();
            let got = s.log_suffix[pos].exp();
            assert!(
                (got - tail).abs() / tail < 1e-6,
                "n = {n}: got {got}, want {tail}"
            );
            let tail_next = tail - ((n + 1) as f64).powi(-3);
            assert!((s.log_suffix_next[pos].exp() - tail_next).abs() / tail_next < 1e-6);
        }
        let total = s.log_total.unwrap().exp();
        assert!((total - 1.202_056_903_159_594).abs() < 1e-6);
    }

    #[test]
    fn sampled_sums_geometric_series() {
        // t_k = 16^-k: suffix from n is 16^-n * 16/15, machine-exact tails
        let term = |k: usize| -(k as f64) * 16f64.ln();
        let idx = vec![5usize, 50];
        let s = sample_series(term, 400, &idx, &TailControl::default());
        assert!(s.cert.is_convergent());
        for (pos, &n) in idx.iter().enumerate() {
            let expect = -(n as f64) * 16f64.ln() + (16.0f64 / 15.0).ln();
            assert!((s.log_suffix[pos] - expect).abs() < 1e-9, "n = {n}");
        }
    }

    #[test]
    fn divergent_suffix_flagged_infinite() {
        let term = |k: usize| -((k + 1) as f64).ln(); // harmonic
        let s = sample_series(term, 5_000, &[10], &TailControl::default());
        assert!(s.cert.is_divergent());
        assert!(s.log_suffix[0].is_infinite());
        assert!(s.log_total.is_none());
    }

    #[test]
    fn stolz_proportional_and_noisy() {
        let n: Vec<f64> = (0..200).map(|k| k as f64 + 1.0).collect();
        let p2: Vec<f64> = n.iter().map(|&x| 2.0 * x).collect();
        let b = stolz_limit(&p2, &n, Monotonicity::Increasing).unwrap();
        assert!((b.lo - 2.0).abs() < 1e-12 && (b.hi - 2.0).abs() < 1e-12);

        // p_n = n + sin n: bounds must contain 1
        let p: Vec<f64> = n.iter().map(|&x| x + x.sin()).collect();
        let b = stolz_limit(&p, &n, Monotonicity::Increasing).unwrap();
        assert!(b.lo <= 1.0 && 1.0 <= b.hi);

        // non-monotone q rejected
        let q: Vec<f64> = n.iter().map(|&x| (x * 0.7).sin()).collect();
        assert!(stolz_limit(&p, &q, Monotonicity::Increasing).is_err());
    }

    #[test]
    fn stolz_decreasing_mode() {
        let q: Vec<f64> = (1..100).map(|k| 1.0 / k as f64).collect();
        let p: Vec<f64> = q.iter().map(|&x| 3.0 * x).collect();
        let b = stolz_limit(&p, &q, Monotonicity::Decreasing).unwrap();
        assert!((b.lo - 3.0).abs() < 1e-12 && (b.hi - 3.0).abs() < 1e-12);
    }

    #[test]
    fn line_fit_recovers_slope() {
        let xs: Vec<f64> = (0..50).map(|k| k as f64 * 0.1).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| -1.5 * x + 0.3).collect();
        let f = fit_line(&xs, &ys);
        assert!((f.slope + 1.5).abs() < 1e-12);
        assert!(f.slope_stderr < 1e-12);
    }
}

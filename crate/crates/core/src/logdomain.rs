//! Signed log-domain scalars and stable log-space accumulation.
//!
//! Sequences like the harmonic function h grow geometrically (4^n and worse),
//! so every product and series in this crate lives in log space. `LogScalar`
//! carries a sign and the natural log of the magnitude; `LogSumAcc` is a
//! streaming log-sum-exp accumulator with Kahan compensation so that prefix
//! sums of 10^4..10^6 terms keep near-machine relative accuracy.

/// A real number stored as sign and natural log of its absolute value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogScalar {
    sign: i8,
    log_mag: f64,
}

impl LogScalar {
    pub const ZERO: LogScalar = LogScalar {
        sign: 0,
        log_mag: f64::NEG_INFINITY,
    };
    pub const ONE: LogScalar = LogScalar {
        sign: 1,
        log_mag: 0.0,
    };

    pub fn from_value(x: f64) -> LogScalar {
        if x == 0.0 {
            LogScalar::ZERO
        } else if x > 0.0 {
            LogScalar {
                sign: 1,
                log_mag: x.ln(),
            }
        } else {
            LogScalar {
                sign: -1,
                log_mag: (-x).ln(),
            }
        }
    }

    /// Positive value with the given natural log.
    pub fn from_log(log_mag: f64) -> LogScalar {
        if log_mag == f64::NEG_INFINITY {
            LogScalar::ZERO
        } else {
            LogScalar { sign: 1, log_mag }
        }
    }

    pub fn from_sign_log(sign: i8, log_mag: f64) -> LogScalar {
        if sign == 0 || log_mag == f64::NEG_INFINITY {
            LogScalar::ZERO
        } else {
            LogScalar {
                sign: sign.signum(),
                log_mag,
            }
        }
    }

    pub fn sign(&self) -> i8 {
        self.sign
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0
    }

    /// Natural log of |x|; `-inf` for zero.
    pub fn ln_abs(&self) -> f64 {
        if self.sign == 0 {
            f64::NEG_INFINITY
        } else {
            self.log_mag
        }
    }

    /// Back to a plain double. Overflows saturate to signed infinity.
    pub fn to_f64(&self) -> f64 {
        match self.sign {
            0 => 0.0,
            1 => self.log_mag.exp(),
            _ => -self.log_mag.exp(),
        }
    }

    pub fn neg(&self) -> LogScalar {
        LogScalar {
            sign: -self.sign,
            log_mag: self.log_mag,
        }
    }

    pub fn mul(&self, other: &LogScalar) -> LogScalar {
        if self.sign == 0 || other.sign == 0 {
            LogScalar::ZERO
        } else {
            LogScalar {
                sign: self.sign * other.sign,
                log_mag: self.log_mag + other.log_mag,
            }
        }
    }

    pub fn div(&self, other: &LogScalar) -> LogScalar {
        assert!(other.sign != 0, "division by log-domain zero");
        if self.sign == 0 {
            LogScalar::ZERO
        } else {
            LogScalar {
                sign: self.sign * other.sign,
                log_mag: self.log_mag - other.log_mag,
            }
        }
    }

    /// Signed addition. Same signs use log-sum-exp; opposite signs use the
    /// complementary `ln(1 - e^-d)` identity, which loses precision only when
    /// the two magnitudes nearly cancel (see [`LogScalar::cancellation_gap`]).
    pub fn add(&self, other: &LogScalar) -> LogScalar {
        if self.sign == 0 {
            return *other;
        }
        if other.sign == 0 {
            return *self;
        }
        if self.sign == other.sign {
            LogScalar {
                sign: self.sign,
                log_mag: log_add(self.log_mag, other.log_mag),
            }
        } else {
            let (big, small) = if self.log_mag >= other.log_mag {
                (self, other)
            } else {
                (other, self)
            };
            let d = big.log_mag - small.log_mag;
            if d == 0.0 {
                return LogScalar::ZERO;
            }
            LogScalar {
                sign: big.sign,
                log_mag: big.log_mag + (-(-d).exp()).ln_1p(),
            }
        }
    }

    pub fn sub(&self, other: &LogScalar) -> LogScalar {
        self.add(&other.neg())
    }

    /// Log-magnitude gap `|ln|a| - ln|b||` between two values about to be
    /// subtracted. A gap below ~1e-13 means the relative agreement of the two
    /// terms exceeds 1 - 1e-13 and the difference is numerically meaningless.
    pub fn cancellation_gap(a: &LogScalar, b: &LogScalar) -> f64 {
        (a.log_mag - b.log_mag).abs()
    }
}

/// `ln(e^a + e^b)` for finite inputs, stable for any magnitudes.
pub fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    if a >= b {
        a + (b - a).exp().ln_1p()
    } else {
        b + (a - b).exp().ln_1p()
    }
}

/// `ln(sum e^x_i)` over a slice: max shift, then compensated summation.
pub fn log_sum_exp(logs: &[f64]) -> f64 {
    let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if m == f64::INFINITY {
        return f64::INFINITY;
    }
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &l in logs {
        let y = (l - m).exp() - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    m + sum.ln()
}

/// Streaming accumulator for sums of positive terms given by their logs.
///
/// Represents the running sum as `shift + ln(mantissa)` where the mantissa is
/// Kahan-compensated. The shift only moves up, and moves in jumps of at least
/// `RESCALE_MARGIN` so that rescaling exponentially discounts old rounding.
#[derive(Clone, Debug)]
pub struct LogSumAcc {
    shift: f64,
    sum: f64,
    comp: f64,
}

const RESCALE_MARGIN: f64 = 40.0;

impl LogSumAcc {
    pub fn new() -> LogSumAcc {
        LogSumAcc {
            shift: f64::NEG_INFINITY,
            sum: 0.0,
            comp: 0.0,
        }
    }

    pub fn add_log(&mut self, log_term: f64) {
        if log_term == f64::NEG_INFINITY {
            return;
        }
        if self.shift == f64::NEG_INFINITY {
            self.shift = log_term;
            self.sum = 1.0;
            self.comp = 0.0;
            return;
        }
        if log_term > self.shift + RESCALE_MARGIN {
            let scale = (self.shift - log_term).exp();
            self.sum *= scale;
            self.comp *= scale;
            self.shift = log_term;
        }
        let y = (log_term - self.shift).exp() - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn is_empty(&self) -> bool {
        self.shift == f64::NEG_INFINITY
    }

    /// Natural log of the accumulated sum; `-inf` when empty.
    pub fn log_value(&self) -> f64 {
        if self.is_empty() {
            f64::NEG_INFINITY
        } else {
            self.shift + self.sum.ln()
        }
    }
}

impl Default for LogSumAcc {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_moderate_range() {
        // |ln x| <= ~7: one f64 log carries enough bits for 1e-15 relative.
        let mut x = 1.234e-3;
        while x < 1.0e3 {
            let rt = LogScalar::from_value(x).to_f64();
            assert!((rt - x).abs() / x < 1e-15, "x={x} rt={rt}");
            x *= 1.7;
        }
    }

    #[test]
    fn round_trip_full_range() {
        // Storing ln(1e300) in one f64 quantizes the exponent at ~5.7e-14,
        // so the full-range round trip is 1e-13, not 1e-15.
        let mut x = 1.0e-300;
        while x < 1.0e300 {
            let rt = LogScalar::from_value(x).to_f64();
            assert!((rt - x).abs() / x < 1e-13, "x={x} rt={rt}");
            let rtn = LogScalar::from_value(-x).to_f64();
            assert!((rtn + x).abs() / x < 1e-13);
            x *= 3.9e7;
        }
    }

    #[test]
    fn mul_adds_logs_and_signs() {
        let a = LogScalar::from_value(-2.0);
        let b = LogScalar::from_value(3.0);
        assert!((a.mul(&b).to_f64() + 6.0).abs() < 1e-14);
        assert!((a.mul(&a).to_f64() - 4.0).abs() < 1e-14);
        assert!(a.mul(&LogScalar::ZERO).is_zero());
    }

    #[test]
    fn signed_add_and_exact_cancellation() {
        let a = LogScalar::from_value(5.0);
        let b = LogScalar::from_value(-3.0);
        assert!((a.add(&b).to_f64() - 2.0).abs() < 1e-14);
        assert!(a.add(&a.neg()).is_zero());
        // huge magnitudes
        let big = LogScalar::from_log(800.0);
        let bigger = LogScalar::from_log(801.0);
        let diff = bigger.sub(&big);
        assert_eq!(diff.sign(), 1);
        let expected = 800.0 + (1f64.exp() - 1.0).ln();
        assert!((diff.ln_abs() - expected).abs() < 1e-12);
    }

    #[test]
    fn acc_matches_slice_logsumexp() {
        let logs: Vec<f64> = (0..500).map(|k| (k as f64) * 0.37 - 20.0).collect();
        let mut acc = LogSumAcc::new();
        for &l in &logs {
            acc.add_log(l);
        }
        let reference = log_sum_exp(&logs);
        assert!((acc.log_value() - reference).abs() < 1e-12);
    }

    #[test]
    fn acc_permutation_invariance_1e4_terms() {
        // Deterministic scramble; target is relative 1e-12 for k <= 1e4.
        let n = 10_000usize;
        let logs: Vec<f64> = (0..n)
            .map(|k| {
                let k = k as f64;
                (k * 0.618_033_9).fract() * 60.0 - 30.0
            })
            .collect();
        let mut fwd = LogSumAcc::new();
        for &l in &logs {
            fwd.add_log(l);
        }
        let mut rev = LogSumAcc::new();
        for &l in logs.iter().rev() {
            rev.add_log(l);
        }
        let mut strided = LogSumAcc::new();
        for s in 0..7 {
            for k in (s..n).step_by(7) {
                strided.add_log(logs[k]);
            }
        }
        let v = fwd.log_value();
        assert!((rev.log_value() - v).abs() < 1e-12);
        assert!((strided.log_value() - v).abs() < 1e-12);
    }

    #[test]
    fn acc_geometric_growth_no_overflow() {
        // terms 16^k up to k = 1e5: log sum = 1e5*log16 + log(16/15) - ish
        let mut acc = LogSumAcc::new();
        let l16 = 16f64.ln();
        for k in 0..=100_000u64 {
            acc.add_log(k as f64 * l16);
        }
        let expected = 100_000.0 * l16 + (16.0f64 / 15.0).ln();
        assert!((acc.log_value() - expected).abs() < 1e-10);
    }
}

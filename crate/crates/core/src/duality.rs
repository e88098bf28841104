//! The Karlin-McGregor dual chain and the identities tying its measures and
//! truncated generator to the primal ones.
//!
//! For a killing-free model, the dual has b*_i = a_{i+1} and a*_i = b_i. The
//! measure identities are exact term by term:
//!
//!   nu_hat_n = mu*_n / a*_0,     mu_n = a*_0 nu_hat*_{n-1},
//!   nu_hat[0,n] mu[n+1,N] = mu*[0,n] nu_hat*[n,N-1]   for matched ranges.
//!
//! The matrix similarity Q* = M Q M^-1 (M upper triangular with rows of
//! tail-mu entries) holds at finite truncation in a precise form: with the
//! free (maximal) truncation of Q on N states, M Q M^-1 has an exact zero row
//! at index 0 (a cemetery: the dual is absorbed there at rate a*_0 = b_0) and
//! its lower-right (N-1) x (N-1) block is exactly the full-diagonal
//! truncation of the dual generator carrying the absorption rate a*_0 as
//! killing at dual state 0. In particular
//! eig(-Q_N^free) = {0} u eig(dual block).

use serde::Serialize;
use thiserror::Error;

use crate::logdomain::LogSumAcc;
use crate::model::{DiscreteModel, MeasureCache, ModelError};

#[derive(Debug, Error)]
pub enum DualityError {
    #[error("the dual is defined for killing-free models; c_{index} = {value} != 0. Apply the harmonic transform first to remove killing.")]
    NonzeroKilling { index: usize, value: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A killing-free model together with its dual.
pub struct DualPair {
    pub primal: DiscreteModel,
    pub dual: DiscreteModel,
    /// a*_0 = b_0: the dual's absorption rate at state 0.
    pub a_star_0: f64,
}

/// Build the dual model. Rejects models with killing: the route there is the
/// harmonic transform first, then dualize.
pub fn dual_model(model: &DiscreteModel, n_probe: usize) -> Result<DualPair, DualityError> {
    for n in 0..=n_probe {
        let c_n = model.c(n)?;
        if c_n != 0.0 {
            return Err(DualityError::NonzeroKilling {
                index: n,
                value: c_n,
            });
        }
    }
    let dual = model.dual_rates()?;
    let a_star_0 = model.b(0)?;
    Ok(DualPair {
        primal: model.clone(),
        dual,
        a_star_0,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct IdentityReport {
    /// max |log nu_hat_n + log a*_0 - log mu*_n| over n <= n_max
    pub nu_hat_vs_mu_star: f64,
    /// max |log mu_n - log(a*_0 nu_hat*_{n-1})| over 1 <= n <= n_max
    pub mu_vs_nu_hat_star: f64,
    /// max relative error of the matched-range bracket identity
    pub bracket: f64,
}

impl IdentityReport {
    pub fn max_error(&self) -> f64 {
        self.nu_hat_vs_mu_star
            .max(self.mu_vs_nu_hat_star)
            .max(self.bracket)
    }
}

/// Check the three measure identities in log domain up to n_max.
///
/// The bracket identity is evaluated in its matched finite-range form
/// nu_hat[0,n] mu[n+1,N] = mu*[0,n] nu_hat*[n,N-1] with N = 2 n_max, which
/// holds exactly regardless of tail behavior.
pub fn duality_identities_check(
    pair: &DualPair,
    n_max: usize,
) -> Result<IdentityReport, DualityError> {
    let mut primal = MeasureCache::new(&pair.primal);
    let mut dual = MeasureCache::new(&pair.dual);
    let log_a0 = pair.a_star_0.ln();
    let big_n = 2 * n_max;
    primal.ensure(big_n + 1)?;
    dual.ensure(big_n + 1)?;

    let mut e1 = 0.0f64;
    let mut e2 = 0.0f64;
    for n in 0..=n_max {
        let lhs = primal.log_nu_hat(n)? + log_a0;
        let rhs = dual.log_mu(n)?;
        e1 = e1.max((lhs - rhs).abs());
        if n >= 1 {
            let lhs = primal.log_mu(n)?;
            let rhs = log_a0 + dual.log_nu_hat(n - 1)?;
            e2 = e2.max((lhs - rhs).abs());
        }
    }

    // bracket identity at a few sample points
    let mut e3 = 0.0f64;
    let samples = crate::series::geometric_samples(1, n_max, 2.0);
    for &n in &samples {
        let mut head_p = LogSumAcc::new();
        for k in 0..=n {
            head_p.add_log(primal.log_nu_hat(k)?);
        }
        let mut tail_p = LogSumAcc::new();
        for j in n + 1..=big_n {
            tail_p.add_log(primal.log_mu(j)?);
        }
        let mut head_d = LogSumAcc::new();
        for k in 0..=n {
            head_d.add_log(dual.log_mu(k)?);
        }
        let mut tail_d = LogSumAcc::new();
        for j in n..=big_n - 1 {
            tail_d.add_log(dual.log_nu_hat(j)?);
        }
        let lhs = head_p.log_value() + tail_p.log_value();
        let rhs = head_d.log_value() + tail_d.log_value();
        e3 = e3.max(((lhs - rhs).exp() - 1.0).abs());
    }

    Ok(IdentityReport {
        nu_hat_vs_mu_star: e1,
        mu_vs_nu_hat_star: e2,
        bracket: e3,
    })
}

/// Dense generator truncation. `free_end` drops the outgoing b_{N-1} from the
/// last diagonal (maximal form); otherwise the full diagonal is kept.
/// `kill_at_zero` installs the extra rate at state 0 the dual carries.
pub fn generator_matrix(
    model: &DiscreteModel,
    n: usize,
    free_end: bool,
    kill_at_zero: Option<f64>,
) -> Result<Vec<Vec<f64>>, ModelError> {
    let mut q = vec![vec![0.0; n]; n];
    for i in 0..n {
        let a_i = model.a(i)?;
        let b_i = model.b(i)?;
        let c_i = model.c(i)?;
        let kill = if i == 0 { kill_at_zero.unwrap_or(0.0) } else { 0.0 };
        q[i][i] = -(a_i + b_i + c_i + kill);
        if i + 1 < n {
            q[i][i + 1] = b_i;
        }
        if i >= 1 {
            q[i][i - 1] = a_i;
        }
    }
    if free_end {
        q[n - 1][n - 1] += model.b(n - 1)?;
    }
    Ok(q)
}

#[derive(Clone, Debug, Serialize)]
pub struct SimilarityReport {
    /// max |(M Q^free M^-1)[0][j]| over the cemetery row
    pub cemetery_row: f64,
    /// max |M Q^free M^-1 - shifted dual block| over the (N-1)^2 block,
    /// relative to the largest entry
    pub block_deviation: f64,
    /// max |(M M^-1 - I)| entry
    pub m_inverse: f64,
}

/// Verify the finite-N form of Q* = M Q M^-1.
///
/// Builds the N x N free truncation of the primal generator, the triangular
/// M with rows (0...0, mu_i, mu_{i+1}, ...), its bidiagonal inverse, and
/// compares M Q M^-1 against the cemetery row + shifted dual block described
/// in the module docs. The comparison covers the full (N-1) x (N-1) dual
/// block: with the free-end truncation there are no boundary artifacts left.
pub fn similarity_check(pair: &DualPair, n: usize) -> Result<SimilarityReport, DualityError> {
    assert!(n >= 3 && n <= 500, "similarity_check is a dense O(N^3) check");
    let mut cache = MeasureCache::new(&pair.primal);
    cache.ensure(n)?;
    let mu: Vec<f64> = (0..n)
        .map(|k| cache.log_mu(k).map(|l| l.exp()))
        .collect::<Result<_, _>>()?;

    let q = generator_matrix(&pair.primal, n, true, None)?;

    // M and M^-1
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            m[i][j] = mu[j];
        }
    }
    let mut m_inv = vec![vec![0.0; n]; n];
    for i in 0..n {
        m_inv[i][i] = 1.0 / mu[i];
        if i + 1 < n {
            m_inv[i][i + 1] = -1.0 / mu[i];
        }
    }

    let matmul = |x: &Vec<Vec<f64>>, y: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        let mut z = vec![vec![0.0; n]; n];
        for i in 0..n {
            for k in 0..n {
                let xik = x[i][k];
                if xik != 0.0 {
                    for j in 0..n {
                        z[i][j] += xik * y[k][j];
                    }
                }
            }
        }
        z
    };

    let mut m_inverse = 0.0f64;
    let id_check = matmul(&m, &m_inv);
    for i in 0..n {
        for j in 0..n {
            let want = if i == j { 1.0 } else { 0.0 };
            m_inverse = m_inverse.max((id_check[i][j] - want).abs());
        }
    }

    let t = matmul(&matmul(&m, &q), &m_inv);

    let mut cemetery_row = 0.0f64;
    for j in 0..n {
        cemetery_row = cemetery_row.max(t[0][j].abs());
    }

    // dual block on N-1 states, killing a*_0 at dual state 0, full diagonal
    let block = generator_matrix(&pair.dual, n - 1, false, Some(pair.a_star_0))?;
    let mut scale = 0.0f64;
    let mut dev = 0.0f64;
    for i in 0..n - 1 {
        for j in 0..n - 1 {
            scale = scale.max(block[i][j].abs());
            dev = dev.max((t[i + 1][j + 1] - block[i][j]).abs());
        }
    }

    Ok(SimilarityReport {
        cemetery_row: cemetery_row / scale.max(1.0),
        block_deviation: dev / scale.max(1.0),
        m_inverse,
    })
}

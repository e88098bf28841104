//! Elliptic 1D operators a(x) f'' + b(x) f' - c(x) f on the half line or the
//! whole line, their measures, harmonic functions via successive
//! approximation, discreteness criteria, and the isospectral transform.
//!
//! The reference point theta anchors C(x) = int_theta^x (b/a); the measures
//! are mu(dx) = e^C/a dx and nu_hat(dx) = e^-C dx.

pub mod criteria;
pub mod picard;
pub mod quad;
pub mod transform;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::Expr;
use crate::model::ModelError;
use quad::QuadError;

#[derive(Debug, Error)]
pub enum ContinuousError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("Picard iteration did not converge: sup-norm gap {gap:.3e} after {iterations} iterations (tol {tol:.1e})")]
    NonConverged {
        iterations: usize,
        gap: f64,
        tol: f64,
    },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    HalfLine,
    WholeLine,
}

/// Coefficients of the diffusion operator, as expression trees in x.
#[derive(Clone, Debug)]
pub struct DiffusionModel {
    pub a: Expr,
    pub b: Expr,
    pub c: Expr,
    pub domain: Domain,
    pub theta: f64,
    /// h-transformed operators may carry a signed killing term; gallery and
    /// user models keep c >= 0.
    pub allow_signed_killing: bool,
}

impl DiffusionModel {
    pub fn new(a: Expr, b: Expr, c: Expr, domain: Domain, theta: f64) -> DiffusionModel {
        DiffusionModel {
            a,
            b,
            c,
            domain,
            theta,
            allow_signed_killing: false,
        }
    }

    pub fn from_strs(
        a: &str,
        b: &str,
        c: &str,
        domain: Domain,
        theta: f64,
    ) -> Result<DiffusionModel, ContinuousError> {
        let parse = |field: &'static str, s: &str| -> Result<Expr, ContinuousError> {
            Expr::parse(s).map_err(|source| ContinuousError::Model(ModelError::Parse { field, source }))
        };
        Ok(DiffusionModel::new(
            parse("a", a)?,
            parse("b", b)?,
            parse("c", c)?,
            domain,
            theta,
        ))
    }

    pub fn a_at(&self, x: f64) -> f64 {
        self.a.eval(x)
    }

    pub fn b_at(&self, x: f64) -> f64 {
        self.b.eval(x)
    }

    pub fn c_at(&self, x: f64) -> f64 {
        self.c.eval(x)
    }

    /// Probe a > 0, c >= 0 (unless signed killing is allowed) and finiteness
    /// of b/a, c/a on a grid over `interval`.
    pub fn validate(&self, interval: (f64, f64), n_probe: usize) -> Result<(), ContinuousError> {
        let (lo, hi) = interval;
        for i in 0..=n_probe {
            let x = lo + (hi - lo) * (i as f64 + 0.5) / (n_probe as f64 + 1.0);
            let a = self.a_at(x);
            if !(a > 0.0) || !a.is_finite() {
                return Err(ContinuousError::Hypothesis(format!(
                    "a({x}) = {a}; need a > 0 on the domain"
                )));
            }
            let c = self.c_at(x);
            if !c.is_finite() || (!self.allow_signed_killing && c < 0.0) {
                return Err(ContinuousError::Hypothesis(format!(
                    "c({x}) = {c}; need c >= 0 (signed killing only from the isospectral transform)"
                )));
            }
            let drift = self.b_at(x) / a;
            let kill = c / a;
            if !drift.is_finite() || !kill.is_finite() {
                return Err(ContinuousError::Hypothesis(format!(
                    "b/a or c/a non-finite at x = {x}"
                )));
            }
        }
        Ok(())
    }

    /// C(x) = int_theta^x b/a by adaptive quadrature.
    pub fn c_of_x(&self, x: f64, tol: f64) -> Result<f64, ContinuousError> {
        let val = quad::integrate_adaptive(|y| self.b_at(y) / self.a_at(y), self.theta, x, tol)
            .map_err(|e| match e {
                QuadError::NonConvergent { .. } => ContinuousError::Hypothesis(format!(
                    "b/a not locally integrable between theta = {} and x = {x}",
                    self.theta
                )),
                other => ContinuousError::Quad(other),
            })?;
        Ok(val)
    }

    /// (C(x), mu-density e^C/a, nu_hat-density e^-C) at x.
    pub fn c_and_measures(&self, x: f64, tol: f64) -> Result<(f64, f64, f64), ContinuousError> {
        let c = self.c_of_x(x, tol)?;
        Ok((c, c.exp() / self.a_at(x), (-c).exp()))
    }
}

/// On-disk form:
/// `{"kind":"continuous","a":"<expr in x>","b":...,"c":...,
///   "domain":"halfline"|"wholeline","theta":0}`.
#[derive(Serialize, Deserialize)]
pub struct DiffusionModelFile {
    pub kind: String,
    pub a: String,
    pub b: String,
    pub c: String,
    pub domain: Domain,
    #[serde(default)]
    pub theta: f64,
}

impl DiffusionModelFile {
    pub fn to_model(&self) -> Result<DiffusionModel, ContinuousError> {
        if self.kind != "continuous" {
            return Err(ContinuousError::Invalid(format!(
                "expected kind = \"continuous\", got {:?}",
                self.kind
            )));
        }
        DiffusionModel::from_strs(&self.a, &self.b, &self.c, self.domain, self.theta)
    }

    pub fn from_json(text: &str) -> Result<DiffusionModelFile, ContinuousError> {
        serde_json::from_str(text).map_err(|e| ContinuousError::Invalid(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_drift_measures() {
        let m = DiffusionModel::from_strs("2", "0", "0", Domain::HalfLine, 0.0).unwrap();
        let (c, dmu, dnu) = m.c_and_measures(3.0, 1e-12).unwrap();
        assert_eq!(c, 0.0);
        assert!((dmu - 0.5).abs() < 1e-15);
        assert!((dnu - 1.0).abs() < 1e-15);
    }

    #[test]
    fn log_drift_family() {
        // b/a = 4g/(5(1+x)) with g = 3: C(x) = (12/5) log(1+x)
        let g = 3.0;
        let m = DiffusionModel::from_strs(
            "(1+x)^3",
            "(4*3/5) * (1+x)^2",
            "3*(9*3-10)/100 * (1+x)^1",
            Domain::HalfLine,
            0.0,
        )
        .unwrap();
        m.validate((0.0, 50.0), 200).unwrap();
        for x in [0.5, 2.0, 10.0] {
            let (c, dmu, dnu) = m.c_and_measures(x, 1e-12).unwrap();
            let want_c = 0.8 * g * (1.0 + x).ln();
            assert!((c - want_c).abs() < 1e-10, "x = {x}");
            assert!((dmu - (1.0 + x).powf(-g / 5.0)).abs() < 1e-10);
            assert!((dnu - (1.0 + x).powf(-0.8 * g)).abs() < 1e-10);
        }
    }

    #[test]
    fn negative_drift_power() {
        // b = -x^(alpha-1), a = 1, alpha = 2: C(x) = -x^2/2
        let m = DiffusionModel::from_strs("1", "-x", "0", Domain::HalfLine, 0.0).unwrap();
        let c = m.c_of_x(3.0, 1e-12).unwrap();
        assert!((c + 4.5).abs() < 1e-11);
    }

    #[test]
    fn validation_rejects_bad_signs() {
        let m = DiffusionModel::from_strs("x - 1", "0", "0", Domain::HalfLine, 0.0).unwrap();
        assert!(m.validate((0.0, 2.0), 50).is_err());
        let m2 = DiffusionModel::from_strs("1", "0", "-1", Domain::HalfLine, 0.0).unwrap();
        assert!(m2.validate((0.0, 2.0), 50).is_err());
        let mut m3 = DiffusionModel::from_strs("1", "0", "-1", Domain::HalfLine, 0.0).unwrap();
        m3.allow_signed_killing = true;
        assert!(m3.validate((0.0, 2.0), 50).is_ok());
    }
}

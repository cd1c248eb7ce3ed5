//! Closed-form probability limits of the misspecified fit and the sign of
//! the bias in the estimated progress ratio.
//!
//! Two independent routes compute the ratio bias: [`plim_estimates`] solves
//! the limiting normal equations for each slope and takes their quotient,
//! while [`bias_ratio_direct`] evaluates the residual-variance form of the
//! bias in one expression. They must agree to rounding.

use serde::{Deserialize, Serialize};

use crate::dgp::DgpParams;
use crate::error::{Error, Result};
use crate::stats::{MomentSet, RATIO_FLOOR};

/// Sign of a quantity, or `Undefined` when the hypotheses that fix it fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignPrediction {
    Negative,
    Zero,
    Positive,
    Undefined,
}

impl SignPrediction {
    pub fn of(x: f64) -> Self {
        if x.is_nan() {
            SignPrediction::Undefined
        } else if x > 0.0 {
            SignPrediction::Positive
        } else if x < 0.0 {
            SignPrediction::Negative
        } else {
            SignPrediction::Zero
        }
    }

    /// Like [`SignPrediction::of`], but values within `band` of zero count as zero.
    pub fn of_banded(x: f64, band: f64) -> Self {
        if x.abs() <= band {
            SignPrediction::Zero
        } else {
            Self::of(x)
        }
    }

    pub fn negate(self) -> Self {
        match self {
            SignPrediction::Negative => SignPrediction::Positive,
            SignPrediction::Positive => SignPrediction::Negative,
            other => other,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SignPrediction::Negative => "negative",
            SignPrediction::Zero => "zero",
            SignPrediction::Positive => "positive",
            SignPrediction::Undefined => "undefined",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoremConditions {
    pub cov_positive: bool,
    pub beta_positive: bool,
    pub beta_year_positive: bool,
    /// `Cov(lnD, eps) > -resvar_lnD`
    pub lower_bound: bool,
    pub predicted_sign: SignPrediction,
}

impl TheoremConditions {
    pub fn all_hold(&self) -> bool {
        self.cov_positive && self.beta_positive && self.beta_year_positive && self.lower_bound
    }
}

pub fn check_theorem_conditions(m: &MomentSet, params: &DgpParams) -> TheoremConditions {
    let mut c = TheoremConditions {
        cov_positive: m.cov_lnd_y > 0.0,
        beta_positive: params.beta > 0.0,
        beta_year_positive: params.beta_year > 0.0,
        lower_bound: m.resvar_lnd + m.cov_lnd_eps > 0.0,
        predicted_sign: SignPrediction::Undefined,
    };
    if c.all_hold() {
        c.predicted_sign = SignPrediction::of(m.cov_lnd_eps).negate();
    }
    c
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlimReport {
    pub plim_beta: f64,
    pub plim_beta_year: f64,
    /// `None` when `plim_beta` is within the ratio floor of zero.
    pub plim_ratio: Option<f64>,
    /// `plim_ratio - beta_year / beta`
    pub bias_ratio: Option<f64>,
    pub conditions: TheoremConditions,
}

pub fn plim_estimates(m: &MomentSet, params: &DgpParams) -> Result<PlimReport> {
    if !(m.det > 0.0) {
        return Err(Error::Collinear { rel_det: 0.0 });
    }
    if !(params.beta > 0.0) {
        return Err(Error::Domain(format!("beta must be positive, got {}", params.beta)));
    }
    let plim_beta = params.beta * (1.0 + m.var_y * m.cov_lnd_eps / m.det);
    let plim_beta_year = params.beta_year - params.beta * m.cov_lnd_eps * m.cov_lnd_y / m.det;
    let plim_ratio = (plim_beta.abs() >= RATIO_FLOOR).then(|| plim_beta_year / plim_beta);
    Ok(PlimReport {
        plim_beta,
        plim_beta_year,
        plim_ratio,
        bias_ratio: plim_ratio.map(|r| r - params.true_ratio()),
        conditions: check_theorem_conditions(m, params),
    })
}

/// `-(beta_year/beta + Cov(lnD,Y)/Var(Y)) * Cov(lnD,eps) / (resvar + Cov(lnD,eps))`
pub fn bias_ratio_direct(m: &MomentSet, params: &DgpParams) -> Result<f64> {
    let denom = m.resvar_lnd + m.cov_lnd_eps;
    if denom == 0.0 {
        return Err(Error::Boundary);
    }
    if !(m.var_y > 0.0 && params.beta > 0.0) {
        return Err(Error::Domain("need var(Y) > 0 and beta > 0".into()));
    }
    let slope = params.true_ratio() + m.cov_lnd_y / m.var_y;
    Ok(-slope * m.cov_lnd_eps / denom)
}

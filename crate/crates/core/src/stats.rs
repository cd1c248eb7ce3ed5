//! Moments, residualization and the two-regressor least-squares fit.
//!
//! Every variance and covariance here uses 1/n (population) normalization,
//! so plugging sample moments into the closed-form limit expressions in
//! [`crate::asymptotics`] reproduces finite-sample fits exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative determinant below which the normal equations are treated as singular.
pub const SINGULAR_REL_DET: f64 = 1e-12;

/// `|beta_hat|` below this marks a fit as degenerate for the progress ratio.
pub const RATIO_FLOOR: f64 = 1e-6;

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// 1/n covariance, computed on centered values.
pub fn cov(x: &[f64], y: &[f64]) -> f64 {
    let mx = mean(x);
    let my = mean(y);
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - mx) * (b - my))
        .sum::<f64>()
        / x.len() as f64
}

pub fn var(x: &[f64]) -> f64 {
    cov(x, x)
}

/// Second moments entering the bias formulas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSet {
    pub var_lnd: f64,
    pub var_y: f64,
    pub cov_lnd_y: f64,
    pub cov_lnd_eps: f64,
    /// Variance of lnD after partialling out year.
    pub resvar_lnd: f64,
    /// `var_lnd * var_y - cov_lnd_y^2`
    pub det: f64,
}

impl MomentSet {
    /// Builds a moment set from the four primitive moments, deriving the
    /// residual variance as `var_lnd - cov_lnd_y^2 / var_y`.
    pub fn from_second_moments(
        var_lnd: f64,
        var_y: f64,
        cov_lnd_y: f64,
        cov_lnd_eps: f64,
    ) -> Result<Self> {
        if !(var_lnd >= 0.0 && var_y >= 0.0) {
            return Err(Error::Domain("variances must be nonnegative".into()));
        }
        if cov_lnd_y * cov_lnd_y > var_lnd * var_y * (1.0 + 1e-12) {
            return Err(Error::Domain(
                "cov(lnD, Y)^2 exceeds var(lnD) var(Y)".into(),
            ));
        }
        let resvar_lnd = if var_y > 0.0 {
            (var_lnd - cov_lnd_y * cov_lnd_y / var_y).max(0.0)
        } else {
            var_lnd
        };
        Ok(Self {
            var_lnd,
            var_y,
            cov_lnd_y,
            cov_lnd_eps,
            resvar_lnd,
            det: determinant(var_lnd, var_y, cov_lnd_y),
        })
    }

    /// Squared correlation between lnD and year.
    pub fn r_squared(&self) -> f64 {
        let denom = self.var_lnd * self.var_y;
        if denom > 0.0 {
            self.cov_lnd_y * self.cov_lnd_y / denom
        } else {
            0.0
        }
    }
}

fn determinant(var_lnd: f64, var_y: f64, cov_lnd_y: f64) -> f64 {
    (var_lnd * var_y - cov_lnd_y * cov_lnd_y).max(0.0)
}

fn check_lengths(n: usize, others: &[usize], min: usize) -> Result<()> {
    if let Some(&m) = others.iter().find(|&&m| m != n) {
        return Err(Error::Dimension(format!("length {m} does not match {n}")));
    }
    if n < min {
        return Err(Error::Dimension(format!(
            "need at least {min} observations, got {n}"
        )));
    }
    Ok(())
}

fn var_is_zero(v: f64, level: f64) -> bool {
    v <= f64::EPSILON * f64::EPSILON * level.max(1.0)
}

/// Sample moments of `(lnD, Y, eps)`. The residual variance is measured on
/// the explicit residual of lnD on `{1, Y}`, not derived from `det`.
pub fn moments(lnd: &[f64], years: &[f64], eps: &[f64]) -> Result<MomentSet> {
    check_lengths(lnd.len(), &[years.len(), eps.len()], 3)?;
    let var_lnd = var(lnd);
    let var_y = var(years);
    let cov_lnd_y = cov(lnd, years);
    let resvar_lnd = match residualize(lnd, years) {
        Ok(r) => r.iter().map(|v| v * v).sum::<f64>() / r.len() as f64,
        Err(_) => var_lnd,
    };
    Ok(MomentSet {
        var_lnd,
        var_y,
        cov_lnd_y,
        cov_lnd_eps: cov(lnd, eps),
        resvar_lnd,
        det: determinant(var_lnd, var_y, cov_lnd_y),
    })
}

/// Residual of `x` after its least-squares affine fit on `years`.
pub fn residualize(x: &[f64], years: &[f64]) -> Result<Vec<f64>> {
    check_lengths(x.len(), &[years.len()], 1)?;
    let my = mean(years);
    let var_y = var(years);
    if var_is_zero(var_y, my * my) {
        return Err(Error::DegenerateRegressor("year has zero variance".into()));
    }
    let mx = mean(x);
    let slope = cov(x, years) / var_y;
    Ok(x.iter()
        .zip(years)
        .map(|(xi, yi)| (xi - mx) - slope * (yi - my))
        .collect())
}

/// One least-squares fit of `lnL = lnB - beta lnD - beta_year (Y - Y0)`.
///
/// Slopes are stored with the loss-falls-is-positive sign convention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub intercept_hat: f64,
    pub beta_hat: f64,
    pub beta_year_hat: f64,
    /// `beta_year_hat / beta_hat`; `None` when `|beta_hat| < RATIO_FLOOR`.
    pub ratio_hat: Option<f64>,
}

impl FitResult {
    pub fn is_degenerate(&self) -> bool {
        self.ratio_hat.is_none()
    }
}

pub fn ols_fit(lnl: &[f64], lnd: &[f64], years: &[f64], y0: f64) -> Result<FitResult> {
    check_lengths(lnl.len(), &[lnd.len(), years.len()], 4)?;
    let (ml, md, my) = (mean(lnl), mean(lnd), mean(years));
    let n = lnl.len() as f64;

    let (mut sdd, mut syy, mut sdy, mut sdl, mut syl) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((l, d), y) in lnl.iter().zip(lnd).zip(years) {
        let (l, d, y) = (l - ml, d - md, y - my);
        sdd += d * d;
        syy += y * y;
        sdy += d * y;
        sdl += d * l;
        syl += y * l;
    }
    let (vd, vy, cdy, cdl, cyl) = (sdd / n, syy / n, sdy / n, sdl / n, syl / n);

    let det = vd * vy - cdy * cdy;
    let scale = vd * vy;
    let rel_det = if scale > 0.0 { det / scale } else { 0.0 };
    if !(rel_det >= SINGULAR_REL_DET) {
        return Err(Error::Collinear { rel_det });
    }

    let slope_d = (vy * cdl - cdy * cyl) / det;
    let slope_y = (vd * cyl - cdy * cdl) / det;
    let intercept_hat = ml - slope_d * md - slope_y * (my - y0);

    let beta_hat = -slope_d;
    let beta_year_hat = -slope_y;
    let ratio_hat = (beta_hat.abs() >= RATIO_FLOOR).then(|| beta_year_hat / beta_hat);
    Ok(FitResult {
        intercept_hat,
        beta_hat,
        beta_year_hat,
        ratio_hat,
    })
}

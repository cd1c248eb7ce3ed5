//! Correlation sweep: replicated noise draws, fits, and aggregation against
//! the closed-form limits.
//!
//! Every replication owns a ChaCha stream selected by `(grid index, rep
//! index)` under the master seed, so a single rep can be replayed alone and
//! results do not depend on how rayon schedules the work. Aggregation is a
//! sequential fold over the pre-indexed slots.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{plim_estimates, SignPrediction};
use crate::dgp::{self, Dataset, DgpParams, SynthSettings};
use crate::error::{Error, Result};
use crate::stats::{self, FitResult};

/// Stream id reserved for drawing the fixed synthetic dataset.
pub const DATASET_STREAM: u64 = u64::MAX;

/// How the noise scale is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SigmaSpec {
    Fixed { sigma: f64 },
    /// Half the mean of `beta_prime (Y - y0)` over the dataset in use.
    HalfMeanTrend { beta_prime: f64 },
}

impl SigmaSpec {
    pub fn resolve(&self, data: &Dataset) -> f64 {
        match *self {
            SigmaSpec::Fixed { sigma } => sigma,
            SigmaSpec::HalfMeanTrend { beta_prime } => dgp::default_sigma(data, beta_prime),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    /// The same regressors in every replication.
    Fixed { data: Dataset },
    /// A fresh synthetic sample per replication.
    Redraw { settings: SynthSettings },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub rho_grid: Vec<f64>,
    pub reps: usize,
    pub seed: u64,
    pub ln_b: f64,
    pub beta: f64,
    pub beta_year: f64,
    pub sigma: SigmaSpec,
    pub data: DataSource,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::Config("reps must be at least 1".into()));
        }
        if self.rho_grid.is_empty() {
            return Err(Error::Config("rho grid is empty".into()));
        }
        if let Some(r) = self.rho_grid.iter().find(|r| !(-1.0..=1.0).contains(*r)) {
            return Err(Error::Config(format!("rho {r} outside [-1, 1]")));
        }
        if self.rho_grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config(
                "rho grid must be strictly increasing".into(),
            ));
        }
        if !(self.beta > 0.0 && self.beta_year > 0.0) {
            return Err(Error::Config("beta and beta_year must be positive".into()));
        }
        if let SigmaSpec::Fixed { sigma } = self.sigma {
            if !(sigma >= 0.0) {
                return Err(Error::Config(format!("sigma must be >= 0, got {sigma}")));
            }
        }
        Ok(())
    }

    pub fn true_ratio(&self) -> f64 {
        self.beta_year / self.beta
    }

    fn params(&self, sigma: f64, rho: f64) -> DgpParams {
        DgpParams {
            ln_b: self.ln_b,
            beta: self.beta,
            beta_year: self.beta_year,
            sigma,
            rho,
        }
    }
}

/// `-0.9, -0.8, ..., 0.9`
pub fn default_rho_grid() -> Vec<f64> {
    (-9..=9).map(|i| i as f64 / 10.0).collect()
}

/// Independent stream for one replication under the master seed.
pub fn replication_rng(seed: u64, grid_index: usize, rep_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((grid_index as u64) << 32) | rep_index as u64);
    rng
}

pub fn dataset_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(DATASET_STREAM);
    rng
}

/// Noise draw, simulated log loss, and the least-squares fit.
pub fn run_replication<R: rand::Rng + ?Sized>(
    data: &Dataset,
    params: &DgpParams,
    rng: &mut R,
) -> Result<FitResult> {
    replicate(data, params, rng).map(|o| o.fit)
}

#[derive(Debug, Clone, Copy)]
struct RepOutcome {
    fit: FitResult,
    implied_corr: f64,
    plim_beta: f64,
    plim_beta_year: f64,
    plim_ratio: Option<f64>,
    predicted: SignPrediction,
}

fn replicate<R: rand::Rng + ?Sized>(
    data: &Dataset,
    params: &DgpParams,
    rng: &mut R,
) -> Result<RepOutcome> {
    let eps = dgp::generate_eps(data, params.sigma, params.rho, rng)?;
    let lnl = dgp::simulate_lnl(data, params, &eps)?;
    let fit = stats::ols_fit(&lnl, data.lnd(), data.years(), data.y0())?;
    let m = stats::moments(data.lnd(), data.years(), &eps)?;
    let plim = plim_estimates(&m, params)?;
    // rho = 0 or sigma = 0 leaves only rounding-level covariance with lnD
    let band = 1e-12 * params.sigma * m.var_lnd.sqrt();
    let predicted = if plim.conditions.all_hold() {
        SignPrediction::of_banded(m.cov_lnd_eps, band).negate()
    } else {
        SignPrediction::Undefined
    };
    Ok(RepOutcome {
        fit,
        implied_corr: dgp::implied_corr_lnd(data, params.rho)?,
        plim_beta: plim.plim_beta,
        plim_beta_year: plim.plim_beta_year,
        plim_ratio: plim.plim_ratio,
        predicted,
    })
}

/// Aggregated statistics for one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub rho: f64,
    pub implied_corr: f64,
    pub mean_beta_hat: f64,
    pub sd_beta_hat: f64,
    pub plim_beta: f64,
    pub mean_beta_year_hat: f64,
    pub sd_beta_year_hat: f64,
    pub plim_beta_year: f64,
    pub mean_ratio: Option<f64>,
    pub median_ratio: Option<f64>,
    pub sd_ratio: Option<f64>,
    pub plim_ratio: Option<f64>,
    pub n_degenerate: usize,
    pub predicted_sign: SignPrediction,
    pub sign_ok: bool,
    /// More than half the replications were degenerate.
    pub flagged: bool,
}

fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
    (m, v.sqrt())
}

fn median(x: &mut [f64]) -> f64 {
    x.sort_by(|a, b| a.total_cmp(b));
    let n = x.len();
    if n % 2 == 1 {
        x[n / 2]
    } else {
        0.5 * (x[n / 2 - 1] + x[n / 2])
    }
}

fn aggregate(rho: f64, true_ratio: f64, outcomes: &[RepOutcome]) -> SweepRow {
    let betas: Vec<f64> = outcomes.iter().map(|o| o.fit.beta_hat).collect();
    let beta_years: Vec<f64> = outcomes.iter().map(|o| o.fit.beta_year_hat).collect();
    let mut ratios: Vec<f64> = outcomes.iter().filter_map(|o| o.fit.ratio_hat).collect();
    let plim_ratios: Vec<f64> = outcomes.iter().filter_map(|o| o.plim_ratio).collect();
    let n_degenerate = outcomes.len() - ratios.len();

    let (mean_beta_hat, sd_beta_hat) = mean_sd(&betas);
    let (mean_beta_year_hat, sd_beta_year_hat) = mean_sd(&beta_years);
    let (mean_ratio, sd_ratio, median_ratio) = if ratios.is_empty() {
        (None, None, None)
    } else {
        let (m, s) = mean_sd(&ratios);
        (Some(m), Some(s), Some(median(&mut ratios)))
    };
    let mean_of = |f: fn(&RepOutcome) -> f64| mean_sd(&outcomes.iter().map(f).collect::<Vec<_>>()).0;

    let first = outcomes[0].predicted;
    let predicted_sign = if outcomes.iter().all(|o| o.predicted == first) {
        first
    } else {
        SignPrediction::Undefined
    };
    let band = 1e-9 * true_ratio.abs().max(1.0);
    let sign_ok = match median_ratio {
        Some(med) if predicted_sign != SignPrediction::Undefined => {
            SignPrediction::of_banded(med - true_ratio, band) == predicted_sign
        }
        _ => false,
    };

    SweepRow {
        rho,
        implied_corr: mean_of(|o| o.implied_corr),
        mean_beta_hat,
        sd_beta_hat,
        plim_beta: mean_of(|o| o.plim_beta),
        mean_beta_year_hat,
        sd_beta_year_hat,
        plim_beta_year: mean_of(|o| o.plim_beta_year),
        mean_ratio,
        median_ratio,
        sd_ratio,
        plim_ratio: (!plim_ratios.is_empty()).then(|| mean_sd(&plim_ratios).0),
        n_degenerate,
        predicted_sign,
        sign_ok,
        flagged: 2 * n_degenerate > outcomes.len(),
    }
}

pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let reps = cfg.reps;
    let fixed_sigma = match &cfg.data {
        DataSource::Fixed { data } => Some(cfg.sigma.resolve(data)),
        DataSource::Redraw { .. } => None,
    };

    let slots: Vec<Result<RepOutcome>> = (0..cfg.rho_grid.len() * reps)
        .into_par_iter()
        .map(|slot| {
            let (g, r) = (slot / reps, slot % reps);
            let mut rng = replication_rng(cfg.seed, g, r);
            let drawn;
            let (data, sigma) = match &cfg.data {
                DataSource::Fixed { data } => (data, fixed_sigma.unwrap_or_default()),
                DataSource::Redraw { settings } => {
                    drawn = dgp::synth_dataset(settings, &mut rng)?;
                    (&drawn, cfg.sigma.resolve(&drawn))
                }
            };
            replicate(data, &cfg.params(sigma, cfg.rho_grid[g]), &mut rng)
        })
        .collect();

    let slots = slots.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(cfg
        .rho_grid
        .iter()
        .zip(slots.chunks(reps))
        .map(|(&rho, chunk)| aggregate(rho, cfg.true_ratio(), chunk))
        .collect())
}

/// How many times larger the progress ratio looks when `beta` is estimated
/// at `beta_observational` instead of `beta_experimental`.
pub fn progress_overstatement(beta_experimental: f64, beta_observational: f64) -> Result<f64> {
    if !(beta_experimental > 0.0 && beta_observational > 0.0) {
        return Err(Error::Domain(format!(
            "both exponents must be positive, got {beta_experimental} and {beta_observational}"
        )));
    }
    Ok(beta_experimental / beta_observational)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn data(n: usize) -> Dataset {
        dgp::synth_dataset(&SynthSettings { n, ..Default::default() }, &mut dataset_rng(7)).unwrap()
    }

    fn params(sigma: f64, rho: f64) -> DgpParams {
        DgpParams { ln_b: 1.0, beta: 0.37, beta_year: 0.37 * 0.45, sigma, rho }
    }

    fn cfg(grid: Vec<f64>, reps: usize, sigma: SigmaSpec, data: DataSource) -> SweepConfig {
        SweepConfig {
            rho_grid: grid,
            reps,
            seed: 42,
            ln_b: 1.0,
            beta: 0.37,
            beta_year: 0.37 * 0.45,
            sigma,
            data,
        }
    }

    #[test]
    fn noiseless_replication_is_exact() {
        let d = data(30);
        let fit = run_replication(&d, &params(0.0, 0.7), &mut replication_rng(1, 0, 0)).unwrap();
        assert_abs_diff_eq!(fit.intercept_hat, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(fit.beta_hat, 0.37, epsilon = 1e-10);
        assert_abs_diff_eq!(fit.beta_year_hat, 0.1665, epsilon = 1e-10);
    }

    #[test]
    fn zero_rho_leaves_slopes_unbiased() {
        let d = Dataset::new(
            vec![0.0, 1.0, 2.0, 3.0, 1.5, 2.5],
            vec![1.0, 2.0, 4.0, 5.0, 2.2, 4.9],
            0.0,
        )
        .unwrap();
        for seed in 0..20 {
            let fit = run_replication(&d, &params(0.3, 0.0), &mut replication_rng(seed, 0, 0)).unwrap();
            assert_abs_diff_eq!(fit.beta_hat, 0.37, epsilon = 1e-12);
            assert_abs_diff_eq!(fit.beta_year_hat, 0.1665, epsilon = 1e-12);
        }
    }

    #[test]
    fn replication_matches_plim() {
        let d = data(50);
        for rho in [-0.6, 0.25, 0.9] {
            let p = params(0.8, rho);
            let o = replicate(&d, &p, &mut replication_rng(3, 1, 2)).unwrap();
            assert_abs_diff_eq!(o.fit.beta_hat, o.plim_beta, epsilon = 1e-10);
            assert_abs_diff_eq!(o.fit.beta_year_hat, o.plim_beta_year, epsilon = 1e-10);
        }
    }

    #[test]
    fn streams_are_distinct_and_replayable() {
        use rand::Rng;
        let a: u64 = replication_rng(5, 0, 1).random();
        let b: u64 = replication_rng(5, 1, 0).random();
        let c: u64 = replication_rng(5, 0, 1).random();
        assert_ne!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn zero_sigma_sweep_recovers_truth() {
        let c = cfg(vec![0.0], 20, SigmaSpec::Fixed { sigma: 0.0 }, DataSource::Fixed { data: data(40) });
        let rows = run_sweep(&c).unwrap();
        assert_eq!(rows.len(), 1);
        assert_abs_diff_eq!(rows[0].mean_ratio.unwrap(), 0.45, epsilon = 1e-10);
        assert!(rows[0].sd_ratio.unwrap() < 1e-10);
        assert!(rows[0].sign_ok);
        assert_eq!(rows[0].n_degenerate, 0);
    }

    #[test]
    fn sweep_direction_matches_theorem() {
        let c = cfg(
            vec![-0.5, 0.5],
            50,
            SigmaSpec::HalfMeanTrend { beta_prime: 0.45 },
            DataSource::Fixed { data: data(200) },
        );
        let rows = run_sweep(&c).unwrap();
        assert!(rows[0].median_ratio.unwrap() > 0.45);
        assert!(rows[1].median_ratio.unwrap() < 0.45);
        assert!(rows.iter().all(|r| r.sign_ok));
    }

    #[test]
    fn sweep_is_deterministic_across_thread_counts() {
        let c = cfg(
            vec![-0.3, 0.0, 0.4],
            30,
            SigmaSpec::HalfMeanTrend { beta_prime: 0.45 },
            DataSource::Redraw { settings: SynthSettings { n: 40, ..Default::default() } },
        );
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| run_sweep(&c)).unwrap();
        let b = four.install(|| run_sweep(&c)).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        assert!(a.iter().all(|r| r.sd_beta_hat > 0.0));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let d = DataSource::Fixed { data: data(20) };
        let s = SigmaSpec::Fixed { sigma: 0.1 };
        assert!(run_sweep(&cfg(vec![0.0], 0, s, d.clone())).is_err());
        assert!(run_sweep(&cfg(vec![0.5, 0.1], 1, s, d.clone())).is_err());
        assert!(run_sweep(&cfg(vec![0.1, 0.1], 1, s, d.clone())).is_err());
        assert!(run_sweep(&cfg(vec![1.5], 1, s, d)).is_err());
    }

    #[test]
    fn overstatement() {
        assert_eq!(progress_overstatement(0.37, 0.04).unwrap(), 9.25);
        assert_eq!(progress_overstatement(0.2, 0.2).unwrap(), 1.0);
        assert_eq!(progress_overstatement(0.37, 0.37 / 2.0).unwrap(), 2.0);
        assert!(progress_overstatement(0.0, 0.04).is_err());
        assert!(progress_overstatement(0.37, -1.0).is_err());
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}

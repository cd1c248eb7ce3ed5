//! `selbias` command-line interface.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::asymptotics::{bias_ratio_direct, plim_estimates};
use crate::dgp::{self, DgpParams, SynthSettings};
use crate::error::{Error, Result};
use crate::io::{self, InputRef, RunManifest};
use crate::montecarlo::{self, DataSource, SigmaSpec, SweepConfig};
use crate::stats::{self, MomentSet};
use crate::svg::{self, FigureOptions};

pub const OUT_DIR_ENV: &str = "SELBIAS_OUT_DIR";

pub const SWEEP_CSV: &str = "sweep.csv";
pub const FIGURE_SVG: &str = "figure.svg";
pub const MANIFEST_JSON: &str = "manifest.json";

#[derive(Debug, Parser)]
#[command(name = "selbias", version, about = "Selection bias in scaling-law estimates of algorithmic progress")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a synthetic (year, tokens) dataset and write it as CSV.
    GenData(GenDataArgs),
    /// Run the correlation sweep and write CSV, SVG and a manifest.
    Sweep(SweepArgs),
    /// Fit the two-regressor log-loss model to a `model,year,tokens,lnL` file.
    Fit(FitArgs),
    /// Closed-form probability limits for an assumed Cov(lnD, eps).
    Plim(PlimArgs),
    /// Factor by which progress is overstated when beta is underestimated.
    Overstate(OverstateArgs),
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Data exponent beta.
    #[arg(long, default_value_t = 0.37)]
    beta: f64,
    /// Annual data-productivity growth; beta_year = beta * beta_prime.
    #[arg(long, default_value_t = 0.45)]
    beta_prime: f64,
    /// Log intercept ln B.
    #[arg(long, default_value_t = 1.0)]
    ln_b: f64,
}

impl ModelArgs {
    fn beta_year(&self) -> f64 {
        self.beta * self.beta_prime
    }
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Observations per dataset.
    #[arg(long = "n-obs", default_value_t = 200)]
    n_obs: usize,
    /// Years covered by synthetic data.
    #[arg(long, default_value_t = 12.0)]
    span: f64,
    /// lnD trend in nats per year.
    #[arg(long, default_value_t = 0.7)]
    slope: f64,
    /// Standard deviation of lnD around its trend (nats).
    #[arg(long, default_value_t = 2.0)]
    jitter: f64,
    /// lnD level at the reference year.
    #[arg(long = "ln-d0", default_value_t = 20.7)]
    ln_d0: f64,
}

impl SynthArgs {
    fn settings(&self, y0: f64) -> SynthSettings {
        SynthSettings {
            n: self.n_obs,
            y0,
            span: self.span,
            slope: self.slope,
            jitter_sd: self.jitter,
            ln_d0: self.ln_d0,
        }
    }
}

#[derive(Debug, Args)]
struct GenDataArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Reference (first) year of the synthetic sample.
    #[arg(long, default_value_t = 2012.0)]
    y0: f64,
    #[command(flatten)]
    synth: SynthArgs,
    /// Also simulate an lnL column (fit-mode CSV).
    #[arg(long)]
    with_lnl: bool,
    /// Target correlation for the simulated lnL column.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    rho: f64,
    /// Noise scale; defaults to half the mean of beta_prime (Y - y0).
    #[arg(long)]
    sigma: Option<f64>,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long = "out-dir", env = OUT_DIR_ENV)]
    out_dir: Option<PathBuf>,
    /// Output file name inside the output directory.
    #[arg(long, default_value = "dataset.csv")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Input `model,year,tokens` CSV; synthetic data when omitted.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    /// Comma list (`-0.5,0,0.5`) or `start:stop:step`.
    #[arg(long = "rho-grid", allow_hyphen_values = true)]
    rho_grid: Option<String>,
    #[command(flatten)]
    model: ModelArgs,
    /// Noise scale; defaults to half the mean of beta_prime (Y - y0).
    #[arg(long)]
    sigma: Option<f64>,
    /// Reference year; defaults to floor(min year) for files, 2012 for synthetic data.
    #[arg(long)]
    y0: Option<f64>,
    #[command(flatten)]
    synth: SynthArgs,
    /// Draw a fresh synthetic dataset in every replication.
    #[arg(long, conflicts_with = "data")]
    redraw: bool,
    #[arg(long = "out-dir", env = OUT_DIR_ENV)]
    out_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 800)]
    width: u32,
    #[arg(long, default_value_t = 500)]
    height: u32,
    /// Re-run the configuration recorded in a previous manifest.
    #[arg(long, conflicts_with_all = ["data", "redraw", "rho_grid", "sigma"])]
    manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// `model,year,tokens,lnL` CSV.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    y0: Option<f64>,
}

#[derive(Debug, Args)]
struct PlimArgs {
    /// `model,year,tokens` CSV providing the regressor moments.
    #[arg(long, required_unless_present = "moments")]
    data: Option<PathBuf>,
    /// Regressor moments given directly: `VAR_LND,VAR_Y,COV_LND_Y`.
    #[arg(long, conflicts_with = "data", allow_hyphen_values = true)]
    moments: Option<String>,
    /// Assumed Cov(lnD, eps).
    #[arg(long = "cov-eps", allow_negative_numbers = true)]
    cov_eps: f64,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    y0: Option<f64>,
}

#[derive(Debug, Args)]
struct OverstateArgs {
    /// Exponent from controlled experiments.
    #[arg(value_name = "EXPERIMENTAL")]
    experimental_pos: Option<f64>,
    /// Exponent from observational data.
    #[arg(value_name = "OBSERVATIONAL")]
    observational_pos: Option<f64>,
    #[arg(long, conflicts_with = "experimental_pos")]
    experimental: Option<f64>,
    #[arg(long, conflicts_with = "observational_pos")]
    observational: Option<f64>,
}

/// Runs the CLI and returns the process exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(argv, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    0
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    1
                }
            };
        }
    };
    let result = match cli.command {
        Command::GenData(a) => gen_data(a, out),
        Command::Sweep(a) => sweep(a, out),
        Command::Fit(a) => fit(a, out),
        Command::Plim(a) => plim(a, out),
        Command::Overstate(a) => overstate(a, out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn out_path(dir: &Option<PathBuf>, name: &Path) -> PathBuf {
    match dir {
        Some(d) => d.join(name),
        None => name.to_path_buf(),
    }
}

fn ensure_dir(dir: &Option<PathBuf>) -> Result<()> {
    if let Some(d) = dir {
        std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    Ok(())
}

pub fn parse_rho_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::Config(format!("cannot parse rho grid `{spec}`"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [start, stop, step] => {
            let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
            if !(step > 0.0) || stop < start {
                return Err(bad());
            }
            let n = ((stop - start) / step + 1e-9).floor() as i64;
            // round to 12 decimals so 0.1 steps print as 0.3, not 0.30000000000000004
            Ok((0..=n)
                .map(|k| ((start + k as f64 * step) * 1e12).round() / 1e12)
                .map(|v| if v == 0.0 { 0.0 } else { v })
                .collect())
        }
        [_] => spec.split(',').map(num).collect(),
        _ => Err(bad()),
    }
}

fn gen_data(a: GenDataArgs, out: &mut dyn Write) -> Result<()> {
    let mut rng = montecarlo::dataset_rng(a.seed);
    let data = dgp::synth_dataset(&a.synth.settings(a.y0), &mut rng)?;
    ensure_dir(&a.out_dir)?;
    let path = out_path(&a.out_dir, &a.out);
    if a.with_lnl {
        let sigma = a.sigma.unwrap_or_else(|| dgp::default_sigma(&data, a.model.beta_prime));
        let params = DgpParams {
            ln_b: a.model.ln_b,
            beta: a.model.beta,
            beta_year: a.model.beta_year(),
            sigma,
            rho: a.rho,
        };
        params.validate()?;
        let eps = dgp::generate_eps(&data, sigma, a.rho, &mut rng)?;
        let lnl = dgp::simulate_lnl(&data, &params, &eps)?;
        io::write_dataset_csv(&path, &data, Some(&lnl))?;
    } else {
        io::write_dataset_csv(&path, &data, None)?;
    }
    let _ = writeln!(out, "wrote {} rows to {}", data.len(), path.display());
    Ok(())
}

fn sweep(a: SweepArgs, out: &mut dyn Write) -> Result<()> {
    let (config, beta_prime, size, input) = match &a.manifest {
        Some(p) => {
            let m = RunManifest::read(p)?;
            (m.config, m.beta_prime, (m.svg_width, m.svg_height), m.input)
        }
        None => {
            let rho_grid = match &a.rho_grid {
                Some(s) => parse_rho_grid(s)?,
                None => montecarlo::default_rho_grid(),
            };
            let (data, input) = match &a.data {
                Some(p) => (
                    DataSource::Fixed { data: io::ingest_csv(p, a.y0)? },
                    Some(InputRef { path: p.clone(), sha256: io::file_digest(p)? }),
                ),
                None => {
                    let settings = a.synth.settings(a.y0.unwrap_or(2012.0));
                    if a.redraw {
                        (DataSource::Redraw { settings }, None)
                    } else {
                        let data = dgp::synth_dataset(&settings, &mut montecarlo::dataset_rng(a.seed))?;
                        (DataSource::Fixed { data }, None)
                    }
                }
            };
            let sigma = match a.sigma {
                Some(sigma) => SigmaSpec::Fixed { sigma },
                None => SigmaSpec::HalfMeanTrend { beta_prime: a.model.beta_prime },
            };
            let config = SweepConfig {
                rho_grid,
                reps: a.reps,
                seed: a.seed,
                ln_b: a.model.ln_b,
                beta: a.model.beta,
                beta_year: a.model.beta_year(),
                sigma,
                data,
            };
            (config, a.model.beta_prime, (a.width, a.height), input)
        }
    };

    if let DataSource::Fixed { data } = &config.data {
        if !data.has_positive_trend() {
            let _ = writeln!(out, "warning: Cov(lnD, Y) <= 0; the sign theorem does not apply");
        }
    }

    let rows = montecarlo::run_sweep(&config)?;

    ensure_dir(&a.out_dir)?;
    let csv_path = out_path(&a.out_dir, Path::new(SWEEP_CSV));
    let svg_path = out_path(&a.out_dir, Path::new(FIGURE_SVG));
    let manifest_path = out_path(&a.out_dir, Path::new(MANIFEST_JSON));
    io::emit_sweep_csv(&rows, &csv_path)?;
    svg::emit_figure_svg(
        &rows,
        config.true_ratio(),
        &svg_path,
        FigureOptions { width: size.0, height: size.1 },
    )?;
    let true_ratio = config.true_ratio();
    RunManifest::new(config, beta_prime, size, input).write(&manifest_path)?;

    let _ = writeln!(out, "true annual progress: {:.1}%", 100.0 * true_ratio);
    let _ = writeln!(out, "{:>6} {:>9} {:>10} {:>10} {:>6} {:>5}", "rho", "corr_lnD", "median_%", "plim_%", "degen", "sign");
    for r in &rows {
        let pct = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{:.1}", 100.0 * v));
        let _ = writeln!(
            out,
            "{:>6.2} {:>9.3} {:>10} {:>10} {:>6} {:>5}{}",
            r.rho,
            r.implied_corr,
            pct(r.median_ratio),
            pct(r.plim_ratio),
            r.n_degenerate,
            if r.sign_ok { "ok" } else { "-" },
            if r.flagged { "  (flagged: >50% degenerate)" } else { "" }
        );
    }
    let _ = writeln!(
        out,
        "wrote {}, {}, {}",
        csv_path.display(),
        svg_path.display(),
        manifest_path.display()
    );
    Ok(())
}

fn fit(a: FitArgs, out: &mut dyn Write) -> Result<()> {
    let (data, lnl) = io::ingest_fit_csv(&a.data, a.y0)?;
    let f = stats::ols_fit(&lnl, data.lnd(), data.years(), data.y0())?;
    let _ = writeln!(out, "n: {}", data.len());
    let _ = writeln!(out, "y0: {}", data.y0());
    let _ = writeln!(out, "intercept_hat: {}", f.intercept_hat);
    let _ = writeln!(out, "beta_hat: {}", f.beta_hat);
    let _ = writeln!(out, "beta_year_hat: {}", f.beta_year_hat);
    match f.ratio_hat {
        Some(r) => {
            let _ = writeln!(out, "ratio_hat: {r}");
        }
        None => {
            let _ = writeln!(out, "ratio_hat: undefined (|beta_hat| below {})", stats::RATIO_FLOOR);
        }
    }
    Ok(())
}

fn plim(a: PlimArgs, out: &mut dyn Write) -> Result<()> {
    let m = match (&a.data, &a.moments) {
        (Some(p), _) => {
            let data = io::ingest_csv(p, a.y0)?;
            let base = stats::moments(data.lnd(), data.years(), &vec![0.0; data.len()])?;
            MomentSet { cov_lnd_eps: a.cov_eps, ..base }
        }
        (None, Some(s)) => {
            let v: Vec<f64> = s
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Config(format!("cannot parse moments `{s}`")))?;
            match v.as_slice() {
                [var_lnd, var_y, cov] => MomentSet::from_second_moments(*var_lnd, *var_y, *cov, a.cov_eps)?,
                _ => return Err(Error::Config("--moments needs VAR_LND,VAR_Y,COV_LND_Y".into())),
            }
        }
        (None, None) => return Err(Error::Config("need --data or --moments".into())),
    };
    let params = DgpParams {
        ln_b: a.model.ln_b,
        beta: a.model.beta,
        beta_year: a.model.beta_year(),
        sigma: 0.0,
        rho: 0.0,
    };
    let r = plim_estimates(&m, &params)?;
    let opt = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |v| v.to_string());
    let _ = writeln!(out, "var_lnD: {}", m.var_lnd);
    let _ = writeln!(out, "var_Y: {}", m.var_y);
    let _ = writeln!(out, "cov_lnD_Y: {}", m.cov_lnd_y);
    let _ = writeln!(out, "cov_lnD_eps: {}", m.cov_lnd_eps);
    let _ = writeln!(out, "resvar_lnD: {}", m.resvar_lnd);
    let _ = writeln!(out, "det: {}", m.det);
    let _ = writeln!(out, "true_ratio: {}", params.true_ratio());
    let _ = writeln!(out, "plim_beta: {}", r.plim_beta);
    let _ = writeln!(out, "plim_beta_year: {}", r.plim_beta_year);
    let _ = writeln!(out, "plim_ratio: {}", opt(r.plim_ratio));
    let _ = writeln!(out, "bias_ratio: {}", opt(r.bias_ratio));
    let direct = bias_ratio_direct(&m, &params).map(|b| b.to_string()).unwrap_or_else(|e| e.to_string());
    let _ = writeln!(out, "bias_ratio_direct: {direct}");
    let c = r.conditions;
    let _ = writeln!(out, "cond_cov_positive: {}", c.cov_positive);
    let _ = writeln!(out, "cond_beta_positive: {}", c.beta_positive);
    let _ = writeln!(out, "cond_beta_year_positive: {}", c.beta_year_positive);
    let _ = writeln!(out, "cond_lower_bound: {}", c.lower_bound);
    let _ = writeln!(out, "predicted_bias_sign: {}", c.predicted_sign.as_str());
    Ok(())
}

fn overstate(a: OverstateArgs, out: &mut dyn Write) -> Result<()> {
    let exp = a.experimental.or(a.experimental_pos);
    let obs = a.observational.or(a.observational_pos);
    let (Some(exp), Some(obs)) = (exp, obs) else {
        return Err(Error::Config(
            "overstate needs an experimental and an observational exponent".into(),
        ));
    };
    let _ = writeln!(out, "{}", montecarlo::progress_overstatement(exp, obs)?);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_rho_grid("-0.5,0,0.5").unwrap(), vec![-0.5, 0.0, 0.5]);
        assert_eq!(parse_rho_grid("-0.9:0.9:0.1").unwrap(), montecarlo::default_rho_grid());
        assert!(parse_rho_grid("a,b").is_err());
        assert!(parse_rho_grid("0:1:0").is_err());
    }
}

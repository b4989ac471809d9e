//! Command-line arguments. Every command's arguments serialize into the
//! `config` block of its report, so a run can be repeated from the report.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(
    name = "gridfield",
    version,
    about = "Exact likelihoods and estimators for separable Matérn-3/2 lattice fields"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Simulate a field and write it as a field file.
    Simulate(SimulateArgs),
    /// Evaluate the log-likelihood of a field file.
    Loglik(LoglikArgs),
    /// Estimate parameters from a field file, or run a Monte Carlo study.
    Estimate(EstimateArgs),
    /// Information matrix, leading-order and from exact traces.
    Fisher(FisherArgs),
    /// Run the oracle-equivalence suites.
    Validate(ValidateArgs),
    /// Time structured vs dense likelihood evaluation.
    Bench(BenchArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Loglik(_) => "loglik",
            Command::Estimate(_) => "estimate",
            Command::Fisher(_) => "fisher",
            Command::Validate(_) => "validate",
            Command::Bench(_) => "bench",
        }
    }
}

/// `φ` and per-axis `θ`. A single `--theta` is reused on every axis.
#[derive(Debug, Clone, Args, Serialize)]
pub struct ModelArgs {
    /// Scale parameter φ.
    #[arg(long)]
    pub phi: Option<f64>,
    /// Decay rate; repeat once per axis.
    #[arg(long = "theta", allow_negative_numbers = true)]
    pub thetas: Vec<f64>,
}

impl ModelArgs {
    /// Resolves `(φ, θ)` for `d` axes, falling back to `default`.
    pub fn resolve(&self, d: Option<usize>, default: Option<(f64, Vec<f64>)>) -> Result<gridfield::ModelParams> {
        let (dphi, dthetas) = default.unwrap_or((1.0, Vec::new()));
        let phi = self.phi.unwrap_or(dphi);
        let mut thetas = if self.thetas.is_empty() {
            dthetas
        } else {
            self.thetas.clone()
        };
        if thetas.is_empty() {
            bail!("at least one --theta is required");
        }
        if let Some(d) = d {
            if thetas.len() == 1 && d > 1 {
                thetas = vec![thetas[0]; d];
            }
            if thetas.len() != d {
                bail!("--d {d} given with {} decay rates", thetas.len());
            }
        }
        Ok(gridfield::ModelParams::new(phi, thetas)?)
    }
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// Points per axis.
    #[arg(long)]
    pub n: usize,
    /// Number of axes; defaults to the number of --theta values.
    #[arg(long)]
    pub d: Option<usize>,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Stream within the master seed.
    #[arg(long, default_value_t = 0)]
    pub stream: u64,
    /// Output field file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct LoglikArgs {
    /// Field file.
    pub field: PathBuf,
    /// Parameters to evaluate at; default to the file header.
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Closed-form φ estimate at fixed --theta-tilde.
    PhiOnly,
    /// Sieve maximum likelihood over --bounds.
    Sieve,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Search {
    Exhaustive,
    /// Stride-2 scan plus local refinement; approximates the estimator.
    CoarseToFine,
}

/// `t:lo:hi`, with `t = 0` for φ and `t ≥ 1` for θ_t.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bound {
    pub t: usize,
    pub lo: f64,
    pub hi: f64,
}

impl std::str::FromStr for Bound {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("expected t:lo:hi, got {s:?}"));
        }
        let t = parts[0].parse().map_err(|e| format!("index {:?}: {e}", parts[0]))?;
        let lo = parts[1]
            .parse()
            .map_err(|e| format!("lower bound {:?}: {e}", parts[1]))?;
        let hi = parts[2]
            .parse()
            .map_err(|e| format!("upper bound {:?}: {e}", parts[2]))?;
        Ok(Bound { t, lo, hi })
    }
}

/// Orders bounds by index and checks that `0..=d` are each given once.
pub fn bounds_for(bounds: &[Bound], d: usize) -> Result<Vec<(f64, f64)>> {
    let mut out = vec![None; d + 1];
    for b in bounds {
        let slot = out
            .get_mut(b.t)
            .with_context(|| format!("bound index {} exceeds d = {d}", b.t))?;
        if slot.replace((b.lo, b.hi)).is_some() {
            bail!("bound index {} given twice", b.t);
        }
    }
    out.into_iter()
        .enumerate()
        .map(|(t, b)| b.with_context(|| format!("missing --bounds {t}:lo:hi")))
        .collect()
}

#[derive(Debug, Args, Serialize)]
pub struct EstimateArgs {
    /// Field file. Without it, fields are simulated from --phi/--theta for
    /// --reps replications.
    pub field: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Mode::PhiOnly)]
    pub mode: Mode,
    /// Working decay rate for phi-only mode; repeat once per axis.
    #[arg(long = "theta-tilde", allow_negative_numbers = true)]
    pub theta_tilde: Vec<f64>,
    /// Sieve bounds `t:lo:hi`, t = 0 for φ.
    #[arg(long = "bounds")]
    pub bounds: Vec<Bound>,
    /// Sieve exponent; defaults by dimension.
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long, value_enum, default_value_t = Search::Exhaustive)]
    pub search: Search,
    /// Monte Carlo: points per axis.
    #[arg(long)]
    pub n: Option<usize>,
    /// Monte Carlo: number of axes.
    #[arg(long)]
    pub d: Option<usize>,
    /// Monte Carlo: true parameters.
    #[command(flatten)]
    pub model: ModelArgs,
    /// Monte Carlo: replication count.
    #[arg(long)]
    pub reps: Option<u64>,
    /// Monte Carlo: master seed; replication r uses stream r.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct FisherArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub d: Option<usize>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// `key=value` tolerance override.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TolOverride {
    pub key: String,
    pub value: f64,
}

impl std::str::FromStr for TolOverride {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| format!("expected key=value, got {s:?}"))?;
        let value = v.trim().parse().map_err(|e| format!("value {v:?}: {e}"))?;
        Ok(TolOverride {
            key: k.trim().to_string(),
            value,
        })
    }
}

#[derive(Debug, Args, Serialize)]
pub struct ValidateArgs {
    /// Largest n for the determinant and residual sweeps.
    #[arg(long, default_value_t = 64)]
    pub n: usize,
    /// Largest n for the all-cells minor and inverse-entry sweeps.
    #[arg(long, default_value_t = 16)]
    pub sweep_n: usize,
    /// Override a tolerance, `key=value`; repeatable.
    #[arg(long = "tol-override")]
    pub tol_override: Vec<TolOverride>,
    /// Negate the closed-form minor at canonical cell `i,j` (mutation check).
    #[arg(long, hide = true, value_parser = parse_cell)]
    pub inject_sign_flip: Option<(usize, usize)>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_cell(s: &str) -> std::result::Result<(usize, usize), String> {
    let (i, j) = s.split_once(',').ok_or_else(|| format!("expected i,j, got {s:?}"))?;
    Ok((
        i.trim().parse().map_err(|e| format!("{i:?}: {e}"))?,
        j.trim().parse().map_err(|e| format!("{j:?}: {e}"))?,
    ))
}

#[derive(Debug, Args, Serialize)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 32)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Timed repetitions per path.
    #[arg(long, default_value_t = 5)]
    pub reps: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn parses_bounds_and_overrides() {
        let b: Bound = "0:0.5:2".parse().unwrap();
        assert_eq!(b, Bound { t: 0, lo: 0.5, hi: 2.0 });
        assert!("0:1".parse::<Bound>().is_err());
        let o: TolOverride = "det_rel=1e-6".parse().unwrap();
        assert_eq!(o.key, "det_rel");
        assert_eq!(o.value, 1e-6);
        assert!("det_rel".parse::<TolOverride>().is_err());
        assert_eq!(parse_cell("4,5").unwrap(), (4, 5));
    }

    #[test]
    fn bounds_ordering() {
        let bs = [Bound { t: 1, lo: 1.0, hi: 2.0 }, Bound { t: 0, lo: 0.5, hi: 1.5 }];
        assert_eq!(bounds_for(&bs, 1).unwrap(), vec![(0.5, 1.5), (1.0, 2.0)]);
        assert!(bounds_for(&bs, 2).is_err());
        assert!(bounds_for(&bs[..1], 1).is_err());
        assert!(bounds_for(&[bs[0], bs[0]], 1).is_err());
    }

    #[test]
    fn model_resolution() {
        let m = ModelArgs {
            phi: None,
            thetas: vec![2.0],
        };
        let p = m.resolve(Some(3), None).unwrap();
        assert_eq!(p.thetas, vec![2.0; 3]);
        assert_eq!(p.phi, 1.0);
        let m = ModelArgs {
            phi: Some(1.0),
            thetas: vec![1.0, 2.0],
        };
        assert!(m.resolve(Some(3), None).is_err());
        let m = ModelArgs {
            phi: None,
            thetas: vec![-1.0],
        };
        assert!(m.resolve(None, None).is_err());
    }
}

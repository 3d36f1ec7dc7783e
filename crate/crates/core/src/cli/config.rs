//! Run configuration: a JSON file merged with command-line flags. Flags win.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use normgap::ensembles::EnsembleKind;
use normgap::superop::SolverParams;
use normgap::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug, Default)]
pub struct CommonArgs {
    /// JSON run configuration; flags override its fields
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Relative eigen-residual tolerance [default: 1e-9]
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Krylov iteration budget per start [default: 5000]
    #[arg(long, global = true)]
    pub max_iter: Option<usize>,
    /// Independent random starts per norm [default: 3]
    #[arg(long, global = true)]
    pub restarts: Option<usize>,
    /// Maximum word degree for moment tables [default: 4]
    #[arg(long, global = true)]
    pub degree: Option<usize>,
    /// Concurrent pair-norm jobs [default: 1]
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Omit the timestamp field from outputs
    #[arg(long, global = true)]
    pub no_timestamp: bool,
}

/// Sequence source: files when given, otherwise sampled.
#[derive(Args, Debug, Default)]
pub struct EnsembleArgs {
    /// haar | permutation-complement
    #[arg(long)]
    pub kind: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    /// Number of tuples to sample
    #[arg(long)]
    pub count: Option<usize>,
    /// Comma-separated per-tuple dimensions (overrides --dim/--count)
    #[arg(long, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub kind: Option<String>,
    pub n: Option<usize>,
    pub dim: Option<usize>,
    pub count: Option<usize>,
    pub dims: Option<Vec<usize>>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub restarts: Option<usize>,
    pub degree: Option<usize>,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub no_timestamp: Option<bool>,
    pub ensemble: Option<EnsembleConfig>,
    pub inputs: Option<Vec<PathBuf>>,
    pub split: Option<usize>,
    pub sample_words: Option<usize>,
    pub threshold: Option<f64>,
    pub instances: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Invalid(format!("config {}: {e}", path.display())))
    }
}

/// Fully resolved settings, echoed into outputs.
#[derive(Clone, Debug, Serialize)]
pub struct Settings {
    pub seed: u64,
    pub tol: f64,
    pub max_iter: usize,
    pub restarts: usize,
    pub degree: usize,
    pub jobs: usize,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    pub format: Format,
    #[serde(skip)]
    pub timestamp: bool,
}

impl Settings {
    pub fn resolve(args: &CommonArgs, cfg: &RunConfig) -> Result<Self> {
        let s = Settings {
            seed: args.seed.or(cfg.seed).unwrap_or(0),
            tol: args.tol.or(cfg.tol).unwrap_or(1e-9),
            max_iter: args.max_iter.or(cfg.max_iter).unwrap_or(5000),
            restarts: args.restarts.or(cfg.restarts).unwrap_or(3),
            degree: args.degree.or(cfg.degree).unwrap_or(4),
            jobs: args.jobs.or(cfg.jobs).unwrap_or(1),
            out: args.out.clone().or_else(|| cfg.out.clone()),
            format: args.format.or(cfg.format).unwrap_or(Format::Json),
            timestamp: !(args.no_timestamp || cfg.no_timestamp.unwrap_or(false)),
        };
        s.solver().validate()?;
        if s.jobs == 0 {
            return Err(Error::Invalid("--jobs must be positive".into()));
        }
        Ok(s)
    }

    pub fn solver(&self) -> SolverParams {
        SolverParams { tol: self.tol, max_iter: self.max_iter, restarts: self.restarts, seed: self.seed }
    }
}

/// Resolved sequence source for sampled runs.
#[derive(Clone, Debug, Serialize)]
pub struct EnsembleChoice {
    pub kind: EnsembleKind,
    pub n: usize,
    pub dims: Vec<usize>,
}

pub fn resolve_ensemble(
    args: &EnsembleArgs,
    cfg: &RunConfig,
    default_count: usize,
) -> Result<EnsembleChoice> {
    let file = cfg.ensemble.clone().unwrap_or_default();
    let kind: EnsembleKind = args
        .kind
        .clone()
        .or(file.kind)
        .unwrap_or_else(|| "haar".into())
        .parse()?;
    if kind == EnsembleKind::ExplicitFile {
        return Err(Error::Invalid("explicit-file tuples are passed as positional paths".into()));
    }
    let n = args.n.or(file.n).unwrap_or(2);
    let dims = match args.dims.clone().or(file.dims) {
        Some(d) => d,
        None => {
            let dim = args.dim.or(file.dim).unwrap_or(8);
            let count = args.count.or(file.count).unwrap_or(default_count);
            vec![dim; count]
        }
    };
    if n == 0 || dims.is_empty() || dims.contains(&0) {
        return Err(Error::Invalid("n, dims and count must be positive".into()));
    }
    Ok(EnsembleChoice { kind, n, dims })
}

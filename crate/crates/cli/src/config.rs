//! Pipeline configuration: an optional TOML file overlaid by flags.

use std::path::{Path, PathBuf};

use clap::Args;
use kcrf::eval::MatchMode;
use kcrf::expansion::{DEFAULT_DELTA_PRIME, DEFAULT_MAX_ITERS};
use kcrf::features::{KbMembership, Preset};
use kcrf::knowledge::DEFAULT_DELTA;
use kcrf::TagSet;
use serde::Deserialize;

use crate::error::{CliError, CliResult};

/// One evaluation product for `experiment`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductConfig {
    pub name: String,
    pub test: PathBuf,
    pub unlabeled: Option<PathBuf>,
    #[serde(default)]
    pub in_domain: bool,
}

/// Settings as read from a config file. Every field is optional.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub unlabeled: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub kb: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub delta: Option<f64>,
    pub delta_prime: Option<f64>,
    pub sigma2: Option<f64>,
    pub max_iters: Option<usize>,
    pub preset: Option<Preset>,
    pub tags: Option<Vec<String>>,
    pub mode: Option<MatchMode>,
    pub seed: Option<u64>,
    pub strict_prune: Option<bool>,
    pub kb_membership: Option<KbMembership>,
    #[serde(default)]
    pub products: Vec<ProductConfig>,
}

impl FileConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg: FileConfig =
            toml::from_str(&text).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.rebase(base);
        Ok(cfg)
    }

    /// Resolves relative paths against the config file's directory.
    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(x) = p {
                if x.is_relative() {
                    *x = base.join(&*x);
                }
            }
        };
        for p in [
            &mut self.train,
            &mut self.test,
            &mut self.unlabeled,
            &mut self.model,
            &mut self.kb,
            &mut self.predictions,
            &mut self.trace,
            &mut self.report,
            &mut self.output,
        ] {
            fix(p);
        }
        for prod in &mut self.products {
            if prod.test.is_relative() {
                prod.test = base.join(&prod.test);
            }
            fix(&mut prod.unlabeled);
        }
    }
}

/// Flags shared by every subcommand. Each overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// TOML file supplying any of the settings below
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Labeled training corpus
    #[arg(long, global = true)]
    pub train: Option<PathBuf>,
    /// Test corpus (labels optional for predict)
    #[arg(long, global = true)]
    pub test: Option<PathBuf>,
    /// Unlabeled corpus for knowledge expansion
    #[arg(long, global = true)]
    pub unlabeled: Option<PathBuf>,
    /// Model file to read or write
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,
    /// Knowledge base file to read
    #[arg(long, global = true)]
    pub kb: Option<PathBuf>,
    /// Prediction file to score
    #[arg(long, global = true)]
    pub predictions: Option<PathBuf>,
    /// Expansion trace file
    #[arg(long, global = true)]
    pub trace: Option<PathBuf>,
    /// Human-readable report file (selection table, scores)
    #[arg(long, global = true)]
    pub report: Option<PathBuf>,
    /// Output file, or directory for synth
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    /// Entropy threshold for knowledge selection
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub delta: Option<f64>,
    /// Marginal threshold for reliable predictions during expansion
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub delta_prime: Option<f64>,
    /// Gaussian prior variance
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub sigma2: Option<f64>,
    #[arg(long, global = true)]
    pub max_iters: Option<usize>,
    /// basic, primitive or knowledge
    #[arg(long, global = true)]
    pub preset: Option<Preset>,
    /// Comma-separated tag names, e.g. ENT,O
    #[arg(long, global = true, value_delimiter = ',')]
    pub tags: Option<Vec<String>>,
    /// exact or containment
    #[arg(long, global = true)]
    pub mode: Option<MatchMode>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Also drop candidates another tag already knows
    #[arg(long, global = true)]
    pub strict_prune: bool,
    /// Key knowledge indicators by type only
    #[arg(long, global = true)]
    pub flat_kb: bool,
}

/// Fully resolved settings.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub unlabeled: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub kb: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub delta: f64,
    pub delta_prime: f64,
    pub sigma2: f64,
    pub max_iters: usize,
    pub preset: Option<Preset>,
    pub tagset: TagSet,
    pub mode: MatchMode,
    pub seed: u64,
    pub strict_prune: bool,
    pub kb_membership: KbMembership,
    pub products: Vec<ProductConfig>,
}

impl PipelineConfig {
    pub fn resolve(flags: &Flags) -> CliResult<Self> {
        let file = match &flags.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        Self::merge(file, flags)
    }

    pub fn merge(file: FileConfig, flags: &Flags) -> CliResult<Self> {
        let pick = |flag: &Option<PathBuf>, file: Option<PathBuf>| flag.clone().or(file);
        let tagset = match flags.tags.clone().or(file.tags) {
            Some(t) => TagSet::new(t)?,
            None => TagSet::default(),
        };
        let cfg = PipelineConfig {
            train: pick(&flags.train, file.train),
            test: pick(&flags.test, file.test),
            unlabeled: pick(&flags.unlabeled, file.unlabeled),
            model: pick(&flags.model, file.model),
            kb: pick(&flags.kb, file.kb),
            predictions: pick(&flags.predictions, file.predictions),
            trace: pick(&flags.trace, file.trace),
            report: pick(&flags.report, file.report),
            output: pick(&flags.output, file.output),
            delta: flags.delta.or(file.delta).unwrap_or(DEFAULT_DELTA),
            delta_prime: flags.delta_prime.or(file.delta_prime).unwrap_or(DEFAULT_DELTA_PRIME),
            sigma2: flags.sigma2.or(file.sigma2).unwrap_or(1.0),
            max_iters: flags.max_iters.or(file.max_iters).unwrap_or(DEFAULT_MAX_ITERS),
            preset: flags.preset.or(file.preset),
            tagset,
            mode: flags.mode.or(file.mode).unwrap_or_default(),
            seed: flags.seed.or(file.seed).unwrap_or(0),
            strict_prune: flags.strict_prune || file.strict_prune.unwrap_or(false),
            kb_membership: if flags.flat_kb {
                KbMembership::Flat
            } else {
                file.kb_membership.unwrap_or_default()
            },
            products: file.products,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> CliResult<()> {
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(CliError::validation(format!("delta must be a finite non-negative number, got {}", self.delta)));
        }
        if !(0.0..1.0).contains(&self.delta_prime) {
            return Err(CliError::validation(format!("delta-prime must lie in [0, 1), got {}", self.delta_prime)));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(CliError::validation(format!("sigma2 must be positive, got {}", self.sigma2)));
        }
        if self.max_iters == 0 {
            return Err(CliError::validation("max-iters must be at least 1"));
        }
        Ok(())
    }

    /// A path the command needs; `name` is the flag that supplies it.
    pub fn need<'a>(&self, p: &'a Option<PathBuf>, name: &str) -> CliResult<&'a Path> {
        p.as_deref().ok_or_else(|| CliError::validation(format!("--{name} is required")))
    }
}

/// Fails with an I/O error unless every input exists.
pub fn check_inputs(paths: &[&Path]) -> CliResult<()> {
    for p in paths {
        if !p.is_file() {
            return Err(CliError::io(p, std::io::Error::new(std::io::ErrorKind::NotFound, "no such file")));
        }
    }
    Ok(())
}

//! The `run` configuration: a flat TOML document, command-line overrides, and
//! the fully resolved settings echoed by `--dry-run`.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use budgetlearn::datagen::Profile;
use budgetlearn::ssl::SpreadParams;
use budgetlearn::{Approach, ApproachConfig, ExpectedErrorConfig, Hyper, SslConfig, SslMethod, Strategy};
use serde::{Deserialize, Serialize};

pub const SEED_ENV: &str = "BUDGETLEARN_SEED";

/// Every key is optional; missing keys fall back to the defaults in [`Resolved`].
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub data: Option<PathBuf>,
    pub num_classes: Option<usize>,
    pub profile: Option<Profile>,
    pub profile_seed: Option<u64>,
    pub approaches: Option<Vec<Approach>>,
    pub strategy: Option<Strategy>,
    pub ssl_method: Option<SslMethod>,
    pub sigma: Option<f64>,
    pub k: Option<usize>,
    pub alpha: Option<f64>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub pseudo_weight: Option<f64>,
    pub warm_start: Option<usize>,
    pub final_count: Option<usize>,
    pub grid_step: Option<usize>,
    pub retrain_budget: Option<usize>,
    pub include_candidate: Option<bool>,
    pub learning_rate: Option<f64>,
    pub l2: Option<f64>,
    pub epochs: Option<usize>,
    pub repeats: Option<usize>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Fields set in `over` replace those in `self`.
    pub fn overlay(self, over: FileConfig) -> FileConfig {
        macro_rules! pick {
            ($($f:ident),*) => { FileConfig { $($f: over.$f.or(self.$f)),* } };
        }
        pick!(
            data,
            num_classes,
            profile,
            profile_seed,
            approaches,
            strategy,
            ssl_method,
            sigma,
            k,
            alpha,
            tol,
            max_iter,
            pseudo_weight,
            warm_start,
            final_count,
            grid_step,
            retrain_budget,
            include_candidate,
            learning_rate,
            l2,
            epochs,
            repeats,
            seed,
            jobs,
            out_dir
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Csv { path: PathBuf, num_classes: Option<usize> },
    Generated { profile: Profile, seed: u64 },
}

/// Settings after defaults are filled in. `sigma` is `None` when each SSL
/// approach keeps its own preset.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub data: DataSource,
    pub approaches: Vec<Approach>,
    pub strategy: Strategy,
    pub ssl_method: SslMethod,
    pub sigma: Option<f64>,
    pub k: usize,
    pub alpha: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub pseudo_weight: f64,
    pub warm_start: usize,
    pub final_count: usize,
    pub grid_step: usize,
    pub retrain_budget: usize,
    pub include_candidate: bool,
    pub learning_rate: f64,
    pub l2: f64,
    pub epochs: usize,
    pub repeats: usize,
    pub seed: u64,
    pub jobs: usize,
    pub out_dir: Option<PathBuf>,
}

/// Seed precedence: explicit value, then `BUDGETLEARN_SEED`, then 0.
pub fn seed_or_env(seed: Option<u64>) -> Result<u64> {
    if let Some(s) = seed {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .with_context(|| format!("{SEED_ENV}={v:?} is not an unsigned integer")),
        Err(_) => Ok(0),
    }
}

impl Resolved {
    pub fn from_file(c: FileConfig) -> Result<Self> {
        let data = match (c.data, c.profile) {
            (Some(_), Some(_)) => bail!("set either `data` or `profile`, not both"),
            (Some(path), None) => DataSource::Csv {
                path,
                num_classes: c.num_classes,
            },
            (None, Some(profile)) => DataSource::Generated {
                profile,
                seed: c.profile_seed.unwrap_or(0),
            },
            (None, None) => bail!("no dataset: set `data` (a CSV path) or `profile`"),
        };
        let spread = SpreadParams::default();
        let hyper = Hyper::default();
        let ee = ExpectedErrorConfig::default();
        let ssl = SslConfig::default();
        let r = Resolved {
            data,
            approaches: c
                .approaches
                .unwrap_or_else(|| vec![Approach::Passive, Approach::Active]),
            strategy: c.strategy.unwrap_or(Strategy::Entropy),
            ssl_method: c.ssl_method.unwrap_or(SslMethod::SpreadRbf),
            sigma: c.sigma,
            k: c.k.unwrap_or(ssl.k),
            alpha: c.alpha.unwrap_or(spread.alpha),
            tol: c.tol.unwrap_or(spread.tol),
            max_iter: c.max_iter.unwrap_or(spread.max_iter),
            pseudo_weight: c.pseudo_weight.unwrap_or(ssl.pseudo_weight),
            warm_start: c.warm_start.unwrap_or(40),
            final_count: c.final_count.unwrap_or(90),
            grid_step: c.grid_step.unwrap_or(5),
            retrain_budget: c.retrain_budget.unwrap_or(ee.retrain_budget),
            include_candidate: c.include_candidate.unwrap_or(ee.include_candidate),
            learning_rate: c.learning_rate.unwrap_or(hyper.learning_rate),
            l2: c.l2.unwrap_or(hyper.l2),
            epochs: c.epochs.unwrap_or(hyper.epochs),
            repeats: c.repeats.unwrap_or(10),
            seed: seed_or_env(c.seed)?,
            jobs: c.jobs.unwrap_or(1),
            out_dir: c.out_dir,
        };
        if r.approaches.is_empty() {
            bail!("no approaches requested");
        }
        if r.repeats == 0 {
            bail!("repeats must be >= 1");
        }
        if r.jobs == 0 {
            bail!("jobs must be >= 1");
        }
        r.hyper().validate()?;
        for cfg in r.approach_configs() {
            cfg.validate_loop()?;
        }
        Ok(r)
    }

    pub fn hyper(&self) -> Hyper {
        Hyper {
            learning_rate: self.learning_rate,
            l2: self.l2,
            epochs: self.epochs,
        }
    }

    fn ssl_config(&self, approach: Approach) -> SslConfig {
        let preset = if approach == Approach::Hybrid {
            SslConfig::hybrid_preset()
        } else {
            SslConfig::ssl_preset(self.ssl_method)
        };
        SslConfig {
            method: self.ssl_method,
            sigma: self.sigma.unwrap_or(preset.sigma),
            k: self.k,
            spread: SpreadParams {
                alpha: self.alpha,
                tol: self.tol,
                max_iter: self.max_iter,
            },
            pseudo_weight: self.pseudo_weight,
        }
    }

    pub fn approach_configs(&self) -> Vec<ApproachConfig> {
        let (b, f, step) = (self.warm_start, self.final_count, self.grid_step);
        self.approaches
            .iter()
            .map(|&a| {
                let mut cfg = match a {
                    Approach::Passive => ApproachConfig::passive(b, f, step),
                    Approach::Active => ApproachConfig::active(self.strategy, b, f, step),
                    Approach::Ssl => ApproachConfig::ssl(self.ssl_config(a), b, f, step),
                    Approach::Hybrid => ApproachConfig::hybrid(self.strategy, self.ssl_config(a), b, f, step),
                };
                cfg.expected_error = ExpectedErrorConfig {
                    retrain_budget: self.retrain_budget,
                    include_candidate: self.include_candidate,
                };
                cfg
            })
            .collect()
    }
}

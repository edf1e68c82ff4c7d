use std::path::Path;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::orderstats::snap_alpha;
use crate::resampling::STREAM_STRIDE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Procedure {
    Bootstrap,
    Subsample,
    Sgd,
    Permutation,
    Randomization,
    Conformal,
}

impl Procedure {
    pub fn as_str(self) -> &'static str {
        match self {
            Procedure::Bootstrap => "bootstrap",
            Procedure::Subsample => "subsample",
            Procedure::Sgd => "sgd",
            Procedure::Permutation => "permutation",
            Procedure::Randomization => "randomization",
            Procedure::Conformal => "conformal",
        }
    }

    fn allowed_settings(self) -> &'static [u8] {
        match self {
            Procedure::Bootstrap => &[1, 2, 3],
            Procedure::Subsample => &[1, 2, 3],
            Procedure::Sgd => &[4],
            // setting 0: the Gaussian null used by tests and conformal sets
            Procedure::Permutation | Procedure::Randomization | Procedure::Conformal => &[0],
        }
    }

    fn allowed_methods(self) -> &'static [&'static str] {
        match self {
            Procedure::Bootstrap | Procedure::Subsample | Procedure::Sgd => {
                &["vanilla", "modified", "randomized"]
            }
            Procedure::Permutation | Procedure::Randomization => &["modified"],
            Procedure::Conformal => &["split", "modified"],
        }
    }
}

/// Every key is optional; missing keys take the per-procedure defaults.
/// CLI flags override keys read from a file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<String>,
    pub paper_scale: Option<bool>,
    pub setting: Option<u8>,
    pub methods: Option<Vec<String>>,
    pub budgets: Option<Vec<usize>>,
    pub alphas: Option<Vec<f64>>,
    /// `B = ⌈c/α⌉ − 1` for each factor `c`, overriding `budgets`.
    pub budget_factors: Option<Vec<u32>>,
    pub reps: Option<usize>,
    pub m: Option<usize>,
    pub d: Option<usize>,
    pub k: Option<usize>,
    pub n_total: Option<usize>,
    pub burn_in: Option<usize>,
    pub coordinate: Option<usize>,
}

impl ConfigFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| Error::Config {
            key: e.path().to_string(),
            reason: e.inner().to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Keys set in `other` win.
    pub fn merged(self, other: ConfigFile) -> ConfigFile {
        macro_rules! pick {
            ($($f:ident),*) => { ConfigFile { $($f: other.$f.or(self.$f)),* } };
        }
        pick!(
            seed,
            threads,
            out,
            paper_scale,
            setting,
            methods,
            budgets,
            alphas,
            budget_factors,
            reps,
            m,
            d,
            k,
            n_total,
            burn_in,
            coordinate
        )
    }
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub procedure: Procedure,
    pub setting: u8,
    pub methods: Vec<String>,
    pub budgets: Vec<usize>,
    pub alphas: Vec<f64>,
    pub budget_factors: Vec<u32>,
    pub reps: usize,
    pub seed: u64,
    pub threads: Option<usize>,
    pub m: usize,
    pub d: usize,
    /// Subsample size; `⌈m^{2/3}⌉` when absent.
    pub k: Option<usize>,
    pub n_total: usize,
    pub burn_in: usize,
    pub coordinate: usize,
}

fn cfg_err(key: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        key: key.into(),
        reason: reason.into(),
    }
}

impl ExperimentConfig {
    /// Defaults for `procedure` (desk scale unless `paper_scale`), then the
    /// keys of `file`, then validation.
    pub fn resolve(procedure: Procedure, file: &ConfigFile) -> Result<Self> {
        let paper = file.paper_scale.unwrap_or(false);
        let setting = file.setting.unwrap_or(match procedure {
            Procedure::Bootstrap | Procedure::Subsample => 1,
            Procedure::Sgd => 4,
            _ => 0,
        });
        let (m, d) = match (setting, procedure) {
            (2, _) if paper => (1000, 100),
            (2, _) => (400, 20),
            (_, Procedure::Permutation) => (30, 1),
            (_, Procedure::Randomization) => (50, 1),
            _ => (100, 1),
        };
        let (n_total, burn_in) = if paper { (10_000, 2000) } else { (5000, 1000) };
        let cfg = ExperimentConfig {
            procedure,
            setting,
            methods: file.methods.clone().unwrap_or_else(|| {
                procedure
                    .allowed_methods()
                    .iter()
                    .map(|s| s.to_string())
                    .collect()
            }),
            budgets: file.budgets.clone().unwrap_or_else(|| match procedure {
                Procedure::Permutation => vec![99],
                Procedure::Randomization | Procedure::Sgd => vec![19],
                Procedure::Conformal => vec![],
                _ => (0..20).map(|i| 1 + 10 * i).collect(),
            }),
            alphas: file.alphas.clone().unwrap_or_else(|| vec![0.1]),
            budget_factors: file.budget_factors.clone().unwrap_or_default(),
            reps: file.reps.unwrap_or(1000),
            seed: file.seed.unwrap_or(20240501),
            threads: file.threads,
            m: file.m.unwrap_or(m),
            d: file.d.unwrap_or(d),
            k: file.k,
            n_total: file.n_total.unwrap_or(n_total),
            burn_in: file.burn_in.unwrap_or(burn_in),
            coordinate: file.coordinate.unwrap_or(0),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.procedure.allowed_settings().contains(&self.setting) {
            return Err(cfg_err(
                "setting",
                format!(
                    "{} supports settings {:?}",
                    self.procedure.as_str(),
                    self.procedure.allowed_settings()
                ),
            ));
        }
        if self.methods.is_empty() {
            return Err(cfg_err("methods", "at least one method is required"));
        }
        for (i, name) in self.methods.iter().enumerate() {
            if !self.procedure.allowed_methods().contains(&name.as_str()) {
                return Err(cfg_err(
                    &format!("methods[{i}]"),
                    format!(
                        "unknown method `{name}`, expected one of {:?}",
                        self.procedure.allowed_methods()
                    ),
                ));
            }
        }
        for (i, &a) in self.alphas.iter().enumerate() {
            if !(a > 0.0 && a < 1.0) {
                return Err(cfg_err(&format!("alphas[{i}]"), "α must lie in (0, 1)"));
            }
        }
        if self.alphas.is_empty() {
            return Err(cfg_err("alphas", "at least one α is required"));
        }
        let needs_budget = self.procedure != Procedure::Conformal;
        if needs_budget && self.budgets.is_empty() && self.budget_factors.is_empty() {
            return Err(cfg_err("budgets", "at least one budget is required"));
        }
        // resamples of a replicate use the streams after its data stream
        let max_budget = STREAM_STRIDE as usize - 3;
        for (i, &b) in self.budgets.iter().enumerate() {
            if b == 0 || b > max_budget {
                return Err(cfg_err(
                    &format!("budgets[{i}]"),
                    format!("B must lie in 1..={max_budget}"),
                ));
            }
        }
        if self.budget_factors.contains(&0) {
            return Err(cfg_err("budget_factors", "factors must be ≥ 1"));
        }
        if self.reps == 0 {
            return Err(cfg_err("reps", "need at least one replication"));
        }
        if self.m < 2 {
            return Err(cfg_err("m", "sample size must be ≥ 2"));
        }
        if self.d == 0 {
            return Err(cfg_err("d", "dimension must be ≥ 1"));
        }
        if let Some(k) = self.k {
            if k == 0 || k > self.m {
                return Err(cfg_err(
                    "k",
                    format!("subsample size must lie in 1..={}", self.m),
                ));
            }
        }
        if self.threads == Some(0) {
            return Err(cfg_err("threads", "need at least one thread"));
        }
        if self.procedure == Procedure::Sgd {
            if self.burn_in >= self.n_total {
                return Err(cfg_err("burn_in", "burn-in must be below n_total"));
            }
            if self.coordinate >= 3 {
                return Err(cfg_err("coordinate", "setting 4 has coordinates 0, 1, 2"));
            }
        }
        Ok(())
    }

    /// `(B, α)` pairs in table order.
    pub fn budget_alpha_pairs(&self) -> Result<Vec<(usize, f64)>> {
        let mut out = Vec::new();
        for &alpha in &self.alphas {
            if self.procedure == Procedure::Conformal {
                // the budget of a conformal set is its calibration size
                out.push((self.m, alpha));
            } else if self.budget_factors.is_empty() {
                out.extend(self.budgets.iter().map(|&b| (b, alpha)));
            } else {
                let a = snap_alpha(alpha)?;
                for &c in &self.budget_factors {
                    let b = (Ratio::from_integer(c as i64) / a).ceil().to_integer() - 1;
                    out.push((b.max(1) as usize, alpha));
                }
            }
        }
        Ok(out)
    }

    pub fn subsample_size(&self) -> usize {
        self.k
            .unwrap_or_else(|| ((self.m as f64).powf(2.0 / 3.0).ceil() as usize).min(self.m))
    }
}

//! Replicated coverage experiments for the four simulation settings and the
//! test / conformal procedures.
//!
//! Replicate `r` draws its data from stream `r·2^16` of the master seed and
//! hands the next stream to the procedure, so every method and budget in a
//! replicate sees the same data and the same resamples. Aggregation runs in
//! replicate order; the thread count never changes the output.

mod config;
mod emit;

pub use config::{ConfigFile, ExperimentConfig, Procedure};
pub use emit::{read_csv, render_svg, write_csv, write_svg, CSV_HEADER};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::procedures::{
    ci_boot, ci_sgd, ci_subsample, conformal_set, permutation_test, randomization_test, CiResult,
    CiSpec, CiVariant, ConformalVariant, Root,
};
use crate::resampling::{
    setting_sampler, Dataset, PermutationSet, SeedSpec, SettingParams, SgdSpec, Transform,
    TransformGroup, WeightLaw,
};
use rand_distr::{Distribution, StandardNormal};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub setting: u8,
    pub method: String,
    pub budget: usize,
    pub alpha: f64,
    pub m: usize,
    pub reps: usize,
    /// Fraction of replicates whose set contains `θ₀`; for tests, the
    /// fraction retaining the null.
    pub coverage: f64,
    /// Mean interval width, for scalar intervals only.
    pub mean_width: Option<f64>,
    /// Mean threshold span `(W_(u) − W_(l))/τ_m` of set-valued intervals.
    pub mean_span: Option<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedRow {
    pub method: String,
    pub budget: usize,
    pub alpha: f64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CoverageTable {
    pub rows: Vec<CoverageRow>,
    pub skipped: Vec<SkippedRow>,
}

impl CoverageTable {
    pub fn find(&self, method: &str, budget: usize, alpha: f64) -> Option<&CoverageRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.budget == budget && r.alpha == alpha)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Cell {
    method: usize,
    budget: usize,
    alpha: f64,
}

#[derive(Debug, Clone, Copy)]
struct Obs {
    covered: bool,
    width: Option<f64>,
    span: Option<f64>,
}

fn variant(name: &str) -> CiVariant {
    name.parse().expect("method names are validated")
}

type Estimator = fn(&[&[f64]]) -> std::result::Result<Vec<f64>, String>;

fn col_means(rows: &[&[f64]]) -> std::result::Result<Vec<f64>, String> {
    let d = rows.first().ok_or("empty sample")?.len();
    let mut out = vec![0.0; d];
    for r in rows {
        for (o, v) in out.iter_mut().zip(*r) {
            *o += v;
        }
    }
    let n = rows.len() as f64;
    Ok(out.into_iter().map(|s| s / n).collect())
}

fn sample_max(x: &[&[f64]]) -> std::result::Result<Vec<f64>, String> {
    Ok(vec![x
        .iter()
        .map(|r| r[0])
        .fold(f64::NEG_INFINITY, f64::max)])
}

fn ci_obs(ci: &CiResult, theta0: &[f64]) -> Obs {
    let covered = ci.contains(theta0);
    match &ci.interval {
        Some(iv) => Obs {
            covered,
            width: Some(iv.width()),
            span: None,
        },
        None => Obs {
            covered,
            width: None,
            span: Some((ci.upper_stat() - ci.lower_stat()) / ci.tau_m),
        },
    }
}

/// Median-regression subgradient: `−(1/2 − 1{y − xᵀθ < 0}) x`.
fn quantile_gradient(theta: &[f64], point: &(&[f64], f64), out: &mut [f64]) {
    let (x, y) = point;
    let fit: f64 = x.iter().zip(theta).map(|(a, b)| a * b).sum();
    let w = if y - fit < 0.0 { -0.5 } else { 0.5 };
    for (o, xi) in out.iter_mut().zip(x.iter()) {
        *o = -w * xi;
    }
}

fn setting_params(cfg: &ExperimentConfig) -> SettingParams {
    SettingParams {
        m: Some(cfg.m),
        d: Some(cfg.d),
        n_total: Some(cfg.n_total),
    }
}

fn normals(seed: SeedSpec, n: usize) -> Vec<f64> {
    let mut rng = seed.rng();
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

fn run_resampling(
    cfg: &ExperimentConfig,
    cells: &[Cell],
    data: Dataset,
    seed: SeedSpec,
) -> Vec<Result<Obs>> {
    let rows: Vec<&[f64]> = (0..data.len()).map(|i| data.row(i)).collect();
    // setting 3 converges at rate n, the others at √n
    let (root, tau): (Root, fn(usize) -> f64) = match (data.setting, data.dim) {
        (3, _) => (Root::Identity, |n| n as f64),
        (_, 1) => (Root::Identity, |n| (n as f64).sqrt()),
        _ => (Root::SupNorm, |n| (n as f64).sqrt()),
    };
    let estimator: Estimator = if data.setting == 3 {
        sample_max
    } else {
        col_means
    };
    let k = cfg.subsample_size();
    cells
        .iter()
        .map(|c| {
            let spec = CiSpec {
                budget: c.budget,
                alpha: c.alpha,
                variant: variant(&cfg.methods[c.method]),
            };
            let ci = match cfg.procedure {
                Procedure::Bootstrap => {
                    ci_boot(&rows, estimator, root.clone(), tau(cfg.m), &spec, seed)
                }
                _ => ci_subsample(
                    &rows,
                    estimator,
                    root.clone(),
                    tau(cfg.m),
                    tau(k),
                    k,
                    &spec,
                    seed,
                ),
            }?;
            Ok(ci_obs(&ci, &data.theta0))
        })
        .collect()
}

fn run_sgd(
    cfg: &ExperimentConfig,
    cells: &[Cell],
    data: Dataset,
    seed: SeedSpec,
) -> Vec<Result<Obs>> {
    let y = data.response.as_ref().expect("setting 4 has responses");
    let stream: Vec<(&[f64], f64)> = (0..data.len()).map(|i| (data.row(i), y[i])).collect();
    let sgd = SgdSpec {
        dim: 3,
        gamma1: 1.0,
        tau_exp: 2.0 / 3.0,
        burn_in: cfg.burn_in,
        n_total: cfg.n_total,
        weight_law: WeightLaw::Exponential,
    };
    let theta0 = vec![0.0; 3];
    cells
        .iter()
        .map(|c| {
            let spec = CiSpec {
                budget: c.budget,
                alpha: c.alpha,
                variant: variant(&cfg.methods[c.method]),
            };
            let cis = ci_sgd(&stream, &sgd, &theta0, quantile_gradient, &spec, seed)?;
            let j = cfg.coordinate;
            Ok(ci_obs(&cis[j], &data.theta0[j..=j]))
        })
        .collect()
}

fn retained(reject: bool) -> Obs {
    Obs {
        covered: !reject,
        width: None,
        span: None,
    }
}

fn run_replicate(cfg: &ExperimentConfig, cells: &[Cell], rep: u64) -> Result<Vec<Result<Obs>>> {
    let data_seed = SeedSpec::replicate(cfg.seed, rep);
    let seed = data_seed.offset(1);
    Ok(match cfg.procedure {
        Procedure::Bootstrap | Procedure::Subsample => run_resampling(
            cfg,
            cells,
            setting_sampler(cfg.setting, &setting_params(cfg), data_seed)?,
            seed,
        ),
        Procedure::Sgd => run_sgd(
            cfg,
            cells,
            setting_sampler(4, &setting_params(cfg), data_seed)?,
            seed,
        ),
        Procedure::Permutation => {
            // independent Gaussian pairs; T(π) = |Σ (x_i − x̄)(y_π(i) − ȳ)|
            let z = normals(data_seed, 2 * cfg.m);
            let (x, y) = z.split_at(cfg.m);
            let center = |v: &[f64]| {
                let mean = v.iter().sum::<f64>() / v.len() as f64;
                v.iter().map(|a| a - mean).collect::<Vec<_>>()
            };
            let (x, y) = (center(x), center(y));
            let group = TransformGroup::Permutations(PermutationSet::FullSymmetric(cfg.m));
            let stat = |g: &Transform| {
                x.iter()
                    .zip(g.apply(&y))
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    .abs()
            };
            cells
                .iter()
                .map(|c| {
                    Ok(retained(
                        permutation_test(stat, &group, c.budget, c.alpha, seed)?.reject,
                    ))
                })
                .collect()
        }
        Procedure::Randomization => {
            let x = normals(data_seed, cfg.m);
            let group = TransformGroup::SignFlips(cfg.m);
            let root_m = (cfg.m as f64).sqrt();
            let stat = |v: &[f64]| v.iter().sum::<f64>().abs() / root_m;
            cells
                .iter()
                .map(|c| {
                    Ok(retained(
                        randomization_test(&x, stat, &group, c.budget, c.alpha, 0.0, seed)?.reject,
                    ))
                })
                .collect()
        }
        Procedure::Conformal => {
            // |N(0,1)| scores: m calibration points and one test point
            let z = normals(data_seed, cfg.m + 1);
            let scores: Vec<f64> = z[..cfg.m].iter().map(|v| v.abs()).collect();
            let test = z[cfg.m].abs();
            cells
                .iter()
                .map(|c| {
                    let v = match cfg.methods[c.method].as_str() {
                        "split" => ConformalVariant::Split,
                        _ => ConformalVariant::Modified,
                    };
                    Ok(retained(
                        !conformal_set(&scores, c.alpha, v)?.contains_score(test),
                    ))
                })
                .collect()
        }
    })
}

/// Runs every `(method, B, α)` cell over `cfg.reps` replicates.
///
/// A cell whose rule is infeasible at its budget becomes a skipped row; any
/// other failure aborts the experiment.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<CoverageTable> {
    cfg.validate()?;
    match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config {
                key: "threads".into(),
                reason: e.to_string(),
            })?
            .install(|| run_in_pool(cfg)),
        None => run_in_pool(cfg),
    }
}

fn run_in_pool(cfg: &ExperimentConfig) -> Result<CoverageTable> {
    let mut cells = Vec::new();
    for (budget, alpha) in cfg.budget_alpha_pairs()? {
        for method in 0..cfg.methods.len() {
            cells.push(Cell {
                method,
                budget,
                alpha,
            });
        }
    }
    let per_rep: Vec<Vec<Result<Obs>>> = (0..cfg.reps as u64)
        .into_par_iter()
        .map(|rep| run_replicate(cfg, &cells, rep))
        .collect::<Result<_>>()?;

    let mut table = CoverageTable::default();
    'cells: for (ci, cell) in cells.iter().enumerate() {
        let (mut hits, mut width, mut span) = (0usize, Some(0.0f64), Some(0.0f64));
        for rep in &per_rep {
            match &rep[ci] {
                Ok(o) => {
                    hits += o.covered as usize;
                    width = width.zip(o.width).map(|(a, b)| a + b);
                    span = span.zip(o.span).map(|(a, b)| a + b);
                }
                Err(Error::BudgetTooSmall { .. }) => {
                    table.skipped.push(SkippedRow {
                        method: cfg.methods[cell.method].clone(),
                        budget: cell.budget,
                        alpha: cell.alpha,
                        reason: rep[ci].as_ref().unwrap_err().to_string(),
                    });
                    continue 'cells;
                }
                Err(e) => return Err(e.clone()),
            }
        }
        let n = cfg.reps as f64;
        table.rows.push(CoverageRow {
            setting: cfg.setting,
            method: cfg.methods[cell.method].clone(),
            budget: cell.budget,
            alpha: cell.alpha,
            // the streaming setting's sample size is its stream length
            m: if cfg.procedure == Procedure::Sgd {
                cfg.n_total
            } else {
                cfg.m
            },
            reps: cfg.reps,
            coverage: hits as f64 / n,
            mean_width: width.map(|w| w / n),
            mean_span: span.map(|s| s / n),
            seed: cfg.seed,
        });
    }
    Ok(table)
}

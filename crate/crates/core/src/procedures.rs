//! Confidence intervals, tests and prediction sets from a fixed number of
//! Monte Carlo draws.
//!
//! Intervals invert `S_m(θ) = S(τ_m(θ̂ − θ)) ∈ [W_(l), W_(u))` where
//! `W_b = S(τ(θ̂*_b − θ̂))`. The auxiliary uniform of the randomized variant
//! is drawn from the caller's stream; resample `b` (0-based) uses the stream
//! `b + 1` places further along.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::orderstats::{
    index_rule, tau_randomization, BudgetSpec, IntervalIndexRule, RuleName, SortedSample,
};
use crate::resampling::{
    bootstrap_indices, sgd_path, subsample_indices, SeedSpec, SgdSpec, Transform, TransformGroup,
    WeightLaw,
};
use rand::Rng;

pub type RootFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// The map `S` that reduces a (scaled) estimation error to a real number.
#[derive(Clone)]
pub enum Root {
    /// `S(x) = x` on scalars. Only this root yields an explicit interval.
    Identity,
    /// `S(x) = ‖x‖_∞`.
    SupNorm,
    Custom(RootFn),
}

impl Root {
    pub fn apply(&self, x: &[f64]) -> f64 {
        match self {
            Root::Identity => x[0],
            Root::SupNorm => x.iter().fold(0.0, |acc, v| acc.max(v.abs())),
            Root::Custom(f) => f(x),
        }
    }
}

impl fmt::Debug for Root {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Root::Identity => f.write_str("Identity"),
            Root::SupNorm => f.write_str("SupNorm"),
            Root::Custom(_) => f.write_str("Custom"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiVariant {
    /// Ranks `⌈Bα/2⌉`, `⌈B(1−α/2)⌉`.
    Vanilla,
    /// Ranks `⌊(B+1)α/2⌋`, `⌈(B+1)(1−α)⌉ + ⌊(B+1)α/2⌋`.
    Modified,
    /// Modified, with the upper `⌈·⌉` replaced by `⌊·⌋` with probability
    /// `1 − τ_{α,B}`.
    Randomized,
}

impl CiVariant {
    pub const ALL: [CiVariant; 3] = [
        CiVariant::Vanilla,
        CiVariant::Modified,
        CiVariant::Randomized,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CiVariant::Vanilla => "vanilla",
            CiVariant::Modified => "modified",
            CiVariant::Randomized => "randomized",
        }
    }
}

impl std::str::FromStr for CiVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CiVariant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| invalid(format!("unknown CI variant `{s}`")))
    }
}

/// An interval with open/closed ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarInterval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl ScalarInterval {
    pub fn contains(&self, x: f64) -> bool {
        let above = if self.lo_closed {
            x >= self.lo
        } else {
            x > self.lo
        };
        let below = if self.hi_closed {
            x <= self.hi
        } else {
            x < self.hi
        };
        above && below
    }

    /// `hi − lo`; infinite when either end is a sentinel.
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomizedBranch {
    pub u: f64,
    pub tau: f64,
    /// `true` when `U ≤ τ` and the `⌈·⌉` upper rank was used.
    pub ceil_branch: bool,
}

#[derive(Debug, Clone)]
pub struct CiResult {
    pub theta_hat: Vec<f64>,
    pub tau_m: f64,
    pub root: Root,
    pub rule: IntervalIndexRule,
    pub resample_stats: SortedSample,
    /// Present when the root is [`Root::Identity`].
    pub interval: Option<ScalarInterval>,
    pub randomized_branch: Option<RandomizedBranch>,
}

impl CiResult {
    pub fn lower_stat(&self) -> f64 {
        self.resample_stats.order_stat(self.rule.lower_rank)
    }

    pub fn upper_stat(&self) -> f64 {
        self.resample_stats.order_stat(self.rule.upper_rank)
    }

    /// Whether `θ` belongs to the confidence set.
    pub fn contains(&self, theta: &[f64]) -> bool {
        if let Some(iv) = &self.interval {
            return iv.contains(theta[0]);
        }
        let scaled: Vec<f64> = self
            .theta_hat
            .iter()
            .zip(theta)
            .map(|(h, t)| self.tau_m * (h - t))
            .collect();
        let s = self.root.apply(&scaled);
        self.lower_stat() <= s && s < self.upper_stat()
    }
}

/// Budget, level and variant shared by the interval procedures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CiSpec {
    pub budget: usize,
    pub alpha: f64,
    pub variant: CiVariant,
}

fn choose_rule(
    spec: &CiSpec,
    seed: SeedSpec,
) -> Result<(IntervalIndexRule, Option<RandomizedBranch>)> {
    let budget = BudgetSpec::new(spec.budget, spec.alpha)?;
    match spec.variant {
        CiVariant::Vanilla => Ok((index_rule(&budget, RuleName::VanillaTwoSided)?, None)),
        CiVariant::Modified => Ok((index_rule(&budget, RuleName::ModTwoSided)?, None)),
        CiVariant::Randomized => {
            // the modified rule must be feasible whichever branch is drawn
            let ceil_rule = index_rule(&budget, RuleName::ModTwoSided)?;
            let u: f64 = seed.rng().random();
            let tau = tau_randomization(&budget);
            let ceil_branch = u <= tau;
            let rule = if ceil_branch {
                ceil_rule
            } else {
                index_rule(&budget, RuleName::ModTwoSidedFloor)?
            };
            Ok((
                rule,
                Some(RandomizedBranch {
                    u,
                    tau,
                    ceil_branch,
                }),
            ))
        }
    }
}

fn scalar_interval(theta_hat: f64, tau_m: f64, lo_stat: f64, hi_stat: f64) -> ScalarInterval {
    // τ(θ̂ − θ) ∈ [lo, hi)  ⇔  θ ∈ (θ̂ − hi/τ, θ̂ − lo/τ]
    ScalarInterval {
        lo: theta_hat - hi_stat / tau_m,
        hi: theta_hat - lo_stat / tau_m,
        lo_closed: false,
        hi_closed: true,
    }
}

fn finish(
    theta_hat: Vec<f64>,
    tau_m: f64,
    root: Root,
    stats: Vec<f64>,
    rule: IntervalIndexRule,
    randomized_branch: Option<RandomizedBranch>,
) -> Result<CiResult> {
    let resample_stats = SortedSample::unbounded(&stats).map_err(|e| Error::EstimatorFailure {
        resample: stats.iter().position(|w| w.is_nan()).map_or(0, |i| i + 1),
        reason: e.to_string(),
    })?;
    let interval = match root {
        Root::Identity => Some(scalar_interval(
            theta_hat[0],
            tau_m,
            resample_stats.order_stat(rule.lower_rank),
            resample_stats.order_stat(rule.upper_rank),
        )),
        _ => None,
    };
    Ok(CiResult {
        theta_hat,
        tau_m,
        root,
        rule,
        resample_stats,
        interval,
        randomized_branch,
    })
}

fn check_rate(name: &str, tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(invalid(format!(
            "{name} must be positive and finite, got {tau}"
        )));
    }
    Ok(())
}

fn estimate<T, E>(estimator: &E, sample: &[T], resample: usize) -> Result<Vec<f64>>
where
    E: Fn(&[T]) -> std::result::Result<Vec<f64>, String>,
{
    let est = estimator(sample).map_err(|reason| Error::EstimatorFailure { resample, reason })?;
    if est.is_empty() || est.iter().any(|v| !v.is_finite()) {
        return Err(Error::EstimatorFailure {
            resample,
            reason: "estimate is empty or non-finite".into(),
        });
    }
    Ok(est)
}

fn check_root_dim(root: &Root, dim: usize) -> Result<()> {
    if matches!(root, Root::Identity) && dim != 1 {
        return Err(invalid("the identity root needs a scalar estimator"));
    }
    Ok(())
}

fn resample_stat<T, E>(
    data: &[T],
    idx: &[usize],
    estimator: &E,
    theta_hat: &[f64],
    root: &Root,
    rate: f64,
    resample: usize,
) -> Result<f64>
where
    T: Clone,
    E: Fn(&[T]) -> std::result::Result<Vec<f64>, String>,
{
    let sample: Vec<T> = idx.iter().map(|&i| data[i].clone()).collect();
    let est = estimate(estimator, &sample, resample)?;
    if est.len() != theta_hat.len() {
        return Err(Error::EstimatorFailure {
            resample,
            reason: "estimate dimension changed between resamples".into(),
        });
    }
    let scaled: Vec<f64> = est
        .iter()
        .zip(theta_hat)
        .map(|(e, h)| rate * (e - h))
        .collect();
    Ok(root.apply(&scaled))
}

/// Nonparametric bootstrap interval. `estimator` maps a sample to `θ̂`;
/// resample ids in errors are 1-based, 0 is the full sample.
pub fn ci_boot<T, E>(
    data: &[T],
    estimator: E,
    root: Root,
    tau_m: f64,
    spec: &CiSpec,
    seed: SeedSpec,
) -> Result<CiResult>
where
    T: Clone,
    E: Fn(&[T]) -> std::result::Result<Vec<f64>, String>,
{
    check_rate("tau_m", tau_m)?;
    let (rule, branch) = choose_rule(spec, seed)?;
    let theta_hat = estimate(&estimator, data, 0)?;
    check_root_dim(&root, theta_hat.len())?;
    let m = data.len();
    let stats = (0..spec.budget)
        .map(|b| {
            let idx = bootstrap_indices(m, seed.offset(1 + b as u64))?;
            resample_stat(data, &idx, &estimator, &theta_hat, &root, tau_m, b + 1)
        })
        .collect::<Result<Vec<f64>>>()?;
    finish(theta_hat, tau_m, root, stats, rule, branch)
}

/// Subsampling interval with subsamples of size `k` drawn without
/// replacement; `W_b = S(τ_k(θ̂*_{k,b} − θ̂_m))`.
#[allow(clippy::too_many_arguments)]
pub fn ci_subsample<T, E>(
    data: &[T],
    estimator: E,
    root: Root,
    tau_m: f64,
    tau_k: f64,
    k: usize,
    spec: &CiSpec,
    seed: SeedSpec,
) -> Result<CiResult>
where
    T: Clone,
    E: Fn(&[T]) -> std::result::Result<Vec<f64>, String>,
{
    check_rate("tau_m", tau_m)?;
    check_rate("tau_k", tau_k)?;
    let m = data.len();
    if k == 0 || k > m {
        return Err(invalid(format!(
            "subsample size k = {k} must lie in 1..={m}"
        )));
    }
    let (rule, branch) = choose_rule(spec, seed)?;
    let theta_hat = estimate(&estimator, data, 0)?;
    check_root_dim(&root, theta_hat.len())?;
    let stats = (0..spec.budget)
        .map(|b| {
            let idx = subsample_indices(m, k, seed.offset(1 + b as u64))?;
            resample_stat(data, &idx, &estimator, &theta_hat, &root, tau_k, b + 1)
        })
        .collect::<Result<Vec<f64>>>()?;
    finish(theta_hat, tau_m, root, stats, rule, branch)
}

/// Per-coordinate SGD intervals `(2θ̄ − θ̄*_(u), 2θ̄ − θ̄*_(l)]`.
///
/// One path with unit weights gives `θ̄`; `B` paths on the same stream with
/// IID multiplier weights from `sgd.weight_law` give `θ̄*_b`. The randomized
/// variant shares one uniform across coordinates.
pub fn ci_sgd<P, G>(
    stream: &[P],
    sgd: &SgdSpec,
    theta0: &[f64],
    gradient: G,
    spec: &CiSpec,
    seed: SeedSpec,
) -> Result<Vec<CiResult>>
where
    G: Fn(&[f64], &P, &mut [f64]),
{
    let (rule, branch) = choose_rule(spec, seed)?;
    let plain = SgdSpec {
        weight_law: WeightLaw::None,
        ..sgd.clone()
    };
    let theta_bar = sgd_path(&plain, stream, theta0, &gradient, seed)?;
    let paths = (0..spec.budget)
        .map(|b| sgd_path(sgd, stream, theta0, &gradient, seed.offset(1 + b as u64)))
        .collect::<Result<Vec<_>>>()?;
    (0..sgd.dim)
        .map(|j| {
            let stats = paths.iter().map(|p| p[j] - theta_bar[j]).collect();
            finish(vec![theta_bar[j]], 1.0, Root::Identity, stats, rule, branch)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestDecision {
    pub reject: bool,
    pub statistic: f64,
    pub threshold: f64,
    pub rule: RuleName,
    pub threshold_rank: i64,
    pub budget: usize,
    pub alpha: f64,
    /// The observed statistic equals the threshold, so the `≥` comparison
    /// was decided by a tie.
    pub tie_at_threshold: bool,
}

fn decide(
    statistic: f64,
    draws: Vec<f64>,
    rule: IntervalIndexRule,
    spec: &BudgetSpec,
) -> Result<TestDecision> {
    if !statistic.is_finite() {
        return Err(invalid("test statistic must be finite"));
    }
    let sorted = SortedSample::unbounded(&draws)?;
    let threshold = sorted.order_stat(rule.upper_rank);
    Ok(TestDecision {
        reject: statistic >= threshold,
        statistic,
        threshold,
        rule: rule.rule,
        threshold_rank: rule.upper_rank,
        budget: spec.budget,
        alpha: spec.alpha,
        tie_at_threshold: statistic == threshold,
    })
}

fn draw_statistics<S>(
    group: &TransformGroup,
    budget: usize,
    seed: SeedSpec,
    statistic: &S,
) -> Result<Vec<f64>>
where
    S: Fn(&Transform) -> f64,
{
    (0..budget)
        .map(|b| Ok(statistic(&group.draw(seed.offset(1 + b as u64))?)))
        .collect()
}

/// Permutation test rejecting when `T(X) ≥ T*_(r)`, with
/// `r = ⌈B(1−α)⌉ + 2` if `B = |G|` and `⌈(B+1)(1−α)⌉ + 1` otherwise.
/// A rank beyond `B` resolves to `+∞`: the test never rejects.
///
/// `statistic(g)` evaluates `T(gX)`; it is called once with the identity.
pub fn permutation_test<S>(
    statistic: S,
    group: &TransformGroup,
    budget: usize,
    alpha: f64,
    seed: SeedSpec,
) -> Result<TestDecision>
where
    S: Fn(&Transform) -> f64,
{
    let spec = BudgetSpec::new(budget, alpha)?;
    let size = group.size();
    if let Some(n) = size {
        if budget as u128 > n {
            return Err(invalid(format!("B = {budget} exceeds |G| = {n}")));
        }
    }
    let name = if size == Some(budget as u128) {
        RuleName::PermutationFull
    } else {
        RuleName::PermutationSub
    };
    let rule = IntervalIndexRule::compute(&spec, name);
    let observed = statistic(&group.identity());
    let draws = draw_statistics(group, budget, seed, &statistic)?;
    decide(observed, draws, rule, &spec)
}

/// Randomization test on `X − center`: rejects when
/// `T(X) ≥ T*_(⌈(B+1)(1−α)⌉)` over `B` uniform draws from the group.
#[allow(clippy::too_many_arguments)]
pub fn randomization_test<S>(
    data: &[f64],
    statistic: S,
    group: &TransformGroup,
    budget: usize,
    alpha: f64,
    center: f64,
    seed: SeedSpec,
) -> Result<TestDecision>
where
    S: Fn(&[f64]) -> f64,
{
    if group.degree() != data.len() {
        return Err(invalid("group degree does not match the data length"));
    }
    let spec = BudgetSpec::new(budget, alpha)?;
    let rule = index_rule(&spec, RuleName::Randomization)?;
    let centered: Vec<f64> = data.iter().map(|x| x - center).collect();
    let observed = statistic(&centered);
    let draws = draw_statistics(group, budget, seed, &|g: &Transform| {
        statistic(&g.apply(&centered))
    })?;
    decide(observed, draws, rule, &spec)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConformalVariant {
    /// Rank `⌈(m+1)(1−α)⌉`.
    Split,
    /// Rank `m + 1 − ⌊2mα/3⌋`.
    Modified,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub threshold: f64,
    pub rank: i64,
    pub rule: RuleName,
}

impl PredictionSet {
    pub fn contains_score(&self, s: f64) -> bool {
        s <= self.threshold
    }
}

/// Conformal threshold from `m` calibration scores; `+∞` when the rank
/// exceeds `m`.
pub fn conformal_set(
    calib_scores: &[f64],
    alpha: f64,
    variant: ConformalVariant,
) -> Result<PredictionSet> {
    let spec = BudgetSpec::new(calib_scores.len(), alpha)?;
    let name = match variant {
        ConformalVariant::Split => RuleName::ConformalSplit,
        ConformalVariant::Modified => RuleName::ConformalMod,
    };
    let rule = IntervalIndexRule::compute(&spec, name);
    let sorted = SortedSample::unbounded(calib_scores)?;
    Ok(PredictionSet {
        threshold: sorted.order_stat(rule.upper_rank),
        rank: rule.upper_rank,
        rule: name,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean(x: &[f64]) -> std::result::Result<Vec<f64>, String> {
        Ok(vec![x.iter().sum::<f64>() / x.len() as f64])
    }

    fn spec(budget: usize, alpha: f64, variant: CiVariant) -> CiSpec {
        CiSpec {
            budget,
            alpha,
            variant,
        }
    }

    fn data(n: usize) -> Vec<f64> {
        (0..n).map(|i| ((i * 7919) % 101) as f64 / 17.0).collect()
    }

    #[test]
    fn constant_data_gives_point_interval() {
        let x = vec![2.5; 30];
        let ci = ci_boot(
            &x,
            mean,
            Root::Identity,
            30f64.sqrt(),
            &spec(19, 0.1, CiVariant::Modified),
            SeedSpec::new(1, 0),
        )
        .unwrap();
        let iv = ci.interval.unwrap();
        assert_eq!((iv.lo, iv.hi), (2.5, 2.5));
        assert!(!ci.contains(&[2.5])); // (θ̂, θ̂] is empty
    }

    #[test]
    fn interval_matches_membership() {
        let x = data(40);
        for variant in CiVariant::ALL {
            let ci = ci_boot(
                &x,
                mean,
                Root::Identity,
                40f64.sqrt(),
                &spec(39, 0.1, variant),
                SeedSpec::new(3, 0),
            )
            .unwrap();
            let iv = ci.interval.unwrap();
            let root_only = CiResult {
                interval: None,
                ..ci.clone()
            };
            for i in 0..400 {
                let t = iv.lo - 1.0 + i as f64 * (iv.hi - iv.lo + 2.0) / 400.0 + 1e-7;
                assert_eq!(ci.contains(&[t]), root_only.contains(&[t]), "θ = {t}");
            }
        }
    }

    #[test]
    fn budget_too_small_is_reported() {
        let x = data(10);
        let err = ci_boot(
            &x,
            mean,
            Root::Identity,
            1.0,
            &spec(10, 0.1, CiVariant::Modified),
            SeedSpec::new(1, 0),
        )
        .unwrap_err();
        assert!(
            matches!(err, Error::BudgetTooSmall { min_budget: 19, .. }),
            "{err}"
        );
    }

    #[test]
    fn estimator_failure_carries_resample_id() {
        let x = data(10);
        let calls = std::sync::atomic::AtomicUsize::new(0);
        let flaky = |s: &[f64]| {
            if calls.fetch_add(1, std::sync::atomic::Ordering::SeqCst) == 3 {
                Err("boom".to_string())
            } else {
                mean(s)
            }
        };
        let err = ci_boot(
            &x,
            flaky,
            Root::Identity,
            1.0,
            &spec(19, 0.1, CiVariant::Modified),
            SeedSpec::new(1, 0),
        )
        .unwrap_err();
        assert_eq!(
            err,
            Error::EstimatorFailure {
                resample: 3,
                reason: "boom".into()
            }
        );
    }

    #[test]
    fn randomized_equals_modified_on_integer_grid() {
        let x = data(25);
        for s in 0..50 {
            let seed = SeedSpec::new(s, 7);
            let a = ci_boot(
                &x,
                mean,
                Root::Identity,
                5.0,
                &spec(19, 0.1, CiVariant::Modified),
                seed,
            )
            .unwrap();
            let b = ci_boot(
                &x,
                mean,
                Root::Identity,
                5.0,
                &spec(19, 0.1, CiVariant::Randomized),
                seed,
            )
            .unwrap();
            assert_eq!(a.interval, b.interval);
            assert!(b.randomized_branch.unwrap().ceil_branch);
        }
    }

    #[test]
    fn randomized_branch_frequency() {
        // B = 20, α = 0.1: τ = 0.9
        let x = data(12);
        let n = 4000;
        let mut ceil = 0;
        for s in 0..n {
            let ci = ci_boot(
                &x,
                mean,
                Root::Identity,
                1.0,
                &spec(20, 0.1, CiVariant::Randomized),
                SeedSpec::new(s, 0),
            )
            .unwrap();
            let br = ci.randomized_branch.unwrap();
            assert!((br.tau - 0.9).abs() < 1e-12);
            if br.ceil_branch {
                ceil += 1;
                assert_eq!(ci.rule.rule, RuleName::ModTwoSided);
            } else {
                assert_eq!(ci.rule.rule, RuleName::ModTwoSidedFloor);
            }
        }
        let f = ceil as f64 / n as f64;
        assert!((f - 0.9).abs() < 4.0 * (0.09f64 / n as f64).sqrt(), "{f}");
    }

    #[test]
    fn location_shift_equivariance() {
        let x = data(30);
        let c = 3.25;
        let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
        let seed = SeedSpec::new(2, 0);
        let s = spec(39, 0.1, CiVariant::Modified);
        let a = ci_boot(&x, mean, Root::Identity, 1.0, &s, seed)
            .unwrap()
            .interval
            .unwrap();
        let b = ci_boot(&shifted, mean, Root::Identity, 1.0, &s, seed)
            .unwrap()
            .interval
            .unwrap();
        assert!((b.lo - a.lo - c).abs() < 1e-9 && (b.hi - a.hi - c).abs() < 1e-9);
    }

    #[test]
    fn monotone_in_alpha() {
        let x = data(50);
        let seed = SeedSpec::new(8, 0);
        let wide = ci_boot(
            &x,
            mean,
            Root::Identity,
            1.0,
            &spec(99, 0.05, CiVariant::Modified),
            seed,
        )
        .unwrap()
        .interval
        .unwrap();
        let narrow = ci_boot(
            &x,
            mean,
            Root::Identity,
            1.0,
            &spec(99, 0.2, CiVariant::Modified),
            seed,
        )
        .unwrap()
        .interval
        .unwrap();
        assert!(wide.lo <= narrow.lo && narrow.hi <= wide.hi);
        let scores = data(100);
        let t1 = conformal_set(&scores, 0.05, ConformalVariant::Split)
            .unwrap()
            .threshold;
        let t2 = conformal_set(&scores, 0.2, ConformalVariant::Split)
            .unwrap()
            .threshold;
        assert!(t1 >= t2);
    }

    #[test]
    fn subsample_full_size_is_degenerate() {
        let x = data(20);
        let ci = ci_subsample(
            &x,
            mean,
            Root::Identity,
            20.0,
            20.0,
            20,
            &spec(19, 0.1, CiVariant::Modified),
            SeedSpec::new(1, 0),
        )
        .unwrap();
        assert!(ci.resample_stats.values().iter().all(|w| *w == 0.0));
        assert!(ci_subsample(
            &x,
            mean,
            Root::Identity,
            1.0,
            1.0,
            21,
            &spec(19, 0.1, CiVariant::Modified),
            SeedSpec::new(1, 0)
        )
        .is_err());
    }

    #[test]
    fn sup_norm_root_has_no_interval() {
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![i as f64 % 7.0, (i * 3) as f64 % 5.0])
            .collect();
        let col_means = |s: &[Vec<f64>]| -> std::result::Result<Vec<f64>, String> {
            let n = s.len() as f64;
            Ok((0..2)
                .map(|j| s.iter().map(|r| r[j]).sum::<f64>() / n)
                .collect())
        };
        let ci = ci_boot(
            &rows,
            col_means,
            Root::SupNorm,
            30f64.sqrt(),
            &spec(19, 0.1, CiVariant::Modified),
            SeedSpec::new(1, 0),
        )
        .unwrap();
        assert!(ci.interval.is_none());
        assert!(ci.resample_stats.values().iter().all(|w| *w >= 0.0));
        assert!(ci.contains(&ci.theta_hat.clone()) || ci.lower_stat() > 0.0);
        assert!(ci_boot(
            &rows,
            col_means,
            Root::Identity,
            1.0,
            &spec(19, 0.1, CiVariant::Modified),
            SeedSpec::new(1, 0)
        )
        .is_err());
    }

    fn sgd_spec() -> SgdSpec {
        SgdSpec {
            dim: 2,
            gamma1: 0.5,
            tau_exp: 2.0 / 3.0,
            burn_in: 100,
            n_total: 2000,
            weight_law: WeightLaw::Exponential,
        }
    }

    #[test]
    fn sgd_zero_gradient_is_degenerate() {
        let stream = vec![0.0; 2000];
        let cis = ci_sgd(
            &stream,
            &sgd_spec(),
            &[1.0, 2.0],
            |_, _: &f64, g| g.fill(0.0),
            &spec(19, 0.1, CiVariant::Modified),
            SeedSpec::new(1, 0),
        )
        .unwrap();
        for (ci, t) in cis.iter().zip([1.0, 2.0]) {
            let iv = ci.interval.unwrap();
            assert_eq!((iv.lo, iv.hi), (t, t));
        }
    }

    #[test]
    fn sgd_reflection() {
        let stream: Vec<f64> = (0..2000)
            .map(|i| ((i * 37) % 23) as f64 / 7.0 - 1.5)
            .collect();
        let s = spec(19, 0.1, CiVariant::Modified);
        let seed = SeedSpec::new(4, 0);
        let grad = |t: &[f64], z: &f64, g: &mut [f64]| {
            g[0] = t[0] - z;
            g[1] = t[1] - 2.0 * z;
        };
        let neg = |t: &[f64], z: &f64, g: &mut [f64]| {
            g[0] = t[0] + z;
            g[1] = t[1] + 2.0 * z;
        };
        let a = ci_sgd(&stream, &sgd_spec(), &[0.0, 0.0], grad, &s, seed).unwrap();
        let b = ci_sgd(&stream, &sgd_spec(), &[0.0, 0.0], neg, &s, seed).unwrap();
        for (x, y) in a.iter().zip(&b) {
            // the modified ranks are not symmetric, so compare to the
            // reflected stats rather than the reflected interval
            let wa = x.resample_stats.values();
            let wb: Vec<f64> = y.resample_stats.values().iter().rev().map(|w| -w).collect();
            for (p, q) in wa.iter().zip(&wb) {
                assert!((p - q).abs() < 1e-12);
            }
            assert!((x.theta_hat[0] + y.theta_hat[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn permutation_rank_beyond_budget_never_rejects() {
        let group = TransformGroup::SignFlips(10);
        // B = 5, α = 0.1: ⌈6·0.9⌉ + 1 = 7 > 5
        let d = permutation_test(|_| 1e9, &group, 5, 0.1, SeedSpec::new(1, 0)).unwrap();
        assert!(!d.reject);
        assert_eq!(d.threshold, f64::INFINITY);
        let small = TransformGroup::SignFlips(2);
        assert!(permutation_test(|_| 0.0, &small, 5, 0.1, SeedSpec::new(1, 0)).is_err());
        let d = permutation_test(|_| 0.0, &small, 4, 0.5, SeedSpec::new(1, 0)).unwrap();
        assert_eq!(d.rule, RuleName::PermutationFull);
    }

    #[test]
    fn randomization_tie_edge() {
        let x = vec![0.3; 8];
        let group = TransformGroup::SignFlips(8);
        let d = randomization_test(&x, |_| 0.0, &group, 19, 0.1, 0.0, SeedSpec::new(1, 0)).unwrap();
        assert!(d.reject && d.tie_at_threshold);
        assert_eq!(d.threshold, 0.0);
        assert!(matches!(
            randomization_test(&x, |_| 0.0, &group, 5, 0.1, 0.0, SeedSpec::new(1, 0)),
            Err(Error::BudgetTooSmall { .. })
        ));
    }

    #[test]
    fn conformal_examples() {
        let scores: Vec<f64> = (1..=9).map(|i| i as f64).collect();
        let p = conformal_set(&scores, 0.1, ConformalVariant::Split).unwrap();
        assert_eq!((p.rank, p.threshold), (9, 9.0));
        let grid: Vec<f64> = (1..=100).map(|i| (i as f64 - 0.5) / 100.0).collect();
        let p = conformal_set(&grid, 0.1, ConformalVariant::Modified).unwrap();
        assert_eq!(p.rank, 95);
        assert!((p.threshold - 0.945).abs() < 1e-12);
        assert!(p.contains_score(0.945) && !p.contains_score(0.95));
        let p = conformal_set(&scores[..5], 0.1, ConformalVariant::Split).unwrap();
        assert_eq!(p.threshold, f64::INFINITY);
    }
}

//! Binomial and Poisson-binomial kernels, the `I_B` constant, the Ehm
//! total-variation bound and Hoeffding's stochastic ordering.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Independent Bernoulli success probabilities `p_1, …, p_B`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoiBinSpec {
    probs: Vec<f64>,
}

impl PoiBinSpec {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(invalid("PoiBinSpec: need at least one probability"));
        }
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(invalid("PoiBinSpec: probabilities must lie in [0, 1]"));
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn budget(&self) -> usize {
        self.probs.len()
    }

    pub fn mean_prob(&self) -> f64 {
        self.probs.iter().sum::<f64>() / self.probs.len() as f64
    }
}

/// `P(Bin(B, p) ≤ k)`.
///
/// The pmf is built by the ratio recurrence outward from the mode, where
/// every term is at most 1, then normalized; no factorials are formed.
pub fn binom_cdf(budget: usize, p: f64, k: i64) -> f64 {
    if k < 0 {
        return 0.0;
    }
    if k as u64 >= budget as u64 {
        return 1.0;
    }
    let pmf = binom_pmf(budget, p);
    let head: f64 = pmf[..=k as usize].iter().sum();
    head.min(1.0)
}

/// Full `Bin(B, p)` pmf on `{0, …, B}`.
pub fn binom_pmf(budget: usize, p: f64) -> Vec<f64> {
    let n = budget;
    let mut pmf = vec![0.0; n + 1];
    if p <= 0.0 {
        pmf[0] = 1.0;
        return pmf;
    }
    if p >= 1.0 {
        pmf[n] = 1.0;
        return pmf;
    }
    let mode = (((n + 1) as f64) * p).floor().min(n as f64) as usize;
    let odds = p / (1.0 - p);
    pmf[mode] = 1.0;
    for j in mode..n {
        pmf[j + 1] = pmf[j] * (n - j) as f64 / (j + 1) as f64 * odds;
    }
    for j in (1..=mode).rev() {
        pmf[j - 1] = pmf[j] * j as f64 / (n - j + 1) as f64 / odds;
    }
    let total: f64 = pmf.iter().sum();
    pmf.iter_mut().for_each(|x| *x /= total);
    pmf
}

/// Exact Poisson-binomial pmf on `{0, …, B}` by folding in one Bernoulli at
/// a time.
pub fn poisson_binomial_pmf(spec: &PoiBinSpec) -> Vec<f64> {
    let mut pmf = vec![1.0];
    for &p in spec.probs() {
        let mut next = vec![0.0; pmf.len() + 1];
        for (j, &w) in pmf.iter().enumerate() {
            next[j] += w * (1.0 - p);
            next[j + 1] += w * p;
        }
        pmf = next;
    }
    pmf
}

fn cumulative(pmf: &[f64]) -> Vec<f64> {
    pmf.iter()
        .scan(0.0, |acc, &w| {
            *acc += w;
            Some(acc.min(1.0))
        })
        .collect()
}

/// `∫_0^1 min{1, 1/(B y (1−y))} dy`.
///
/// With `s = √(1 − 4/B)` the closed form is `1 − s + (2/B) log((1+s)/(1−s))`.
/// Both `1 − s` and `1/(1 − s)` cancel catastrophically for large `B`, so they
/// are rewritten as `1 − s = (4/B)/(1 + s)` and
/// `log((1+s)/(1−s)) = 2 log(1+s) + log(B/4)`, which are accurate for every
/// `B` and need no series fallback.
pub fn i_b(budget: usize) -> f64 {
    if budget <= 4 {
        return 1.0;
    }
    let b = budget as f64;
    let s = (1.0 - 4.0 / b).sqrt();
    let one_minus_s = (4.0 / b) / (1.0 + s);
    let log_ratio = 2.0 * s.ln_1p() + (b / 4.0).ln();
    one_minus_s + (2.0 / b) * log_ratio
}

/// The Ehm upper bound on `d_TV(PoiBin(p), Bin(B, p̄))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EhmBound {
    pub upper: f64,
    /// `1 − (B p̄ q̄)⁻¹ Σ p_i (1 − p_i)`, the heterogeneity ratio.
    pub r: f64,
}

pub fn ehm_tv_bound(spec: &PoiBinSpec) -> Result<EhmBound> {
    let b = spec.budget() as f64;
    let p_bar = spec.mean_prob();
    let q_bar = 1.0 - p_bar;
    if p_bar <= 0.0 || p_bar >= 1.0 {
        return Err(Error::DegenerateSpec(format!(
            "Ehm bound needs 0 < p̄ < 1, got p̄ = {p_bar}"
        )));
    }
    let spread: f64 = spec.probs().iter().map(|p| p * (1.0 - p)).sum();
    let r = (1.0 - spread / (b * p_bar * q_bar)).max(0.0);
    let upper = b / (b + 1.0)
        * (1.0 - p_bar.powi(spec.budget() as i32 + 1) - q_bar.powi(spec.budget() as i32 + 1))
        * r;
    Ok(EhmBound { upper, r })
}

/// `d_TV(PoiBin(p), Bin(B, p̄))` computed exactly from both pmfs.
pub fn tv_poibin_binomial(spec: &PoiBinSpec) -> f64 {
    let a = poisson_binomial_pmf(spec);
    let b = binom_pmf(spec.budget(), spec.mean_prob());
    0.5 * a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingReport {
    pub pass: bool,
    /// Smallest signed margin in the direction the ordering requires; a
    /// negative value is the size of the worst violation.
    pub worst_margin: f64,
    pub worst_k: Option<usize>,
}

const ORDERING_TOL: f64 = 1e-12;

/// Hoeffding's comparison of a Poisson-binomial with `Bin(B, p̄)`:
/// `P(PoiBin ≤ k) ≤ P(Bin ≤ k)` for `k ≤ B p̄ − 1` and `≥` for `k ≥ B p̄`.
/// Values of `k` strictly between the two regions are not constrained.
pub fn hoeffding_ordering_check(spec: &PoiBinSpec) -> OrderingReport {
    let b = spec.budget();
    let mean = b as f64 * spec.mean_prob();
    let poi = cumulative(&poisson_binomial_pmf(spec));
    let bin = cumulative(&binom_pmf(b, spec.mean_prob()));
    let mut worst = f64::INFINITY;
    let mut worst_k = None;
    for k in 0..=b {
        let kf = k as f64;
        let margin = if kf <= mean - 1.0 {
            bin[k] - poi[k]
        } else if kf >= mean {
            poi[k] - bin[k]
        } else {
            continue;
        };
        if margin < worst {
            worst = margin;
            worst_k = Some(k);
        }
    }
    if worst_k.is_none() {
        worst = 0.0;
    }
    OrderingReport {
        pass: worst >= -ORDERING_TOL,
        worst_margin: worst,
        worst_k,
    }
}

//! Discrepancies between distributions: Kolmogorov–Smirnov, the interval
//! version `d̃_KS` (sup over half-open intervals `(a, b]`), total variation,
//! the exchangeability gap `Γ`, and an empirical Lévy concentration function.
//!
//! Every CDF here is a right-continuous step function, so suprema are taken
//! over both one-sided limits at each jump.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Default refusal threshold for exact enumerations.
pub const DEFAULT_ENUMERATION_CAP: u128 = 10_000_000;

const PMF_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Ks,
    ModKs,
    Tv,
    Gamma,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceEstimate {
    pub value: f64,
    pub metric: Metric,
    /// `true` when computed by enumeration of exact laws, `false` for
    /// empirical estimates from samples.
    pub exact: bool,
}

impl DistanceEstimate {
    fn new(value: f64, metric: Metric, exact: bool) -> Self {
        Self {
            value: value.clamp(0.0, 1.0),
            metric,
            exact,
        }
    }
}

/// Hashable identity of a support atom. Floats compare by bit pattern with
/// `-0.0` folded onto `0.0`.
pub trait Atom: Clone {
    fn key(&self) -> Vec<u64>;
}

fn float_key(x: f64) -> u64 {
    if x == 0.0 {
        0.0f64.to_bits()
    } else {
        x.to_bits()
    }
}

impl Atom for f64 {
    fn key(&self) -> Vec<u64> {
        vec![float_key(*self)]
    }
}

impl Atom for Vec<f64> {
    fn key(&self) -> Vec<u64> {
        self.iter().map(|&x| float_key(x)).collect()
    }
}

/// A probability mass function on finitely many distinct atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct FinitePmf<T> {
    support: Vec<T>,
    probs: Vec<f64>,
}

impl<T: Atom> FinitePmf<T> {
    pub fn new(support: Vec<T>, probs: Vec<f64>) -> Result<Self> {
        if support.len() != probs.len() {
            return Err(invalid("FinitePmf: support and probs differ in length"));
        }
        if support.is_empty() {
            return Err(invalid("FinitePmf: empty support"));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(invalid(
                "FinitePmf: probabilities must be finite and nonnegative",
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PMF_SUM_TOL {
            return Err(invalid(format!("FinitePmf: probabilities sum to {total}")));
        }
        let mut seen = HashMap::with_capacity(support.len());
        for atom in &support {
            if seen.insert(atom.key(), ()).is_some() {
                return Err(invalid("FinitePmf: duplicate atoms"));
            }
        }
        Ok(Self { support, probs })
    }

    /// Builds a pmf from `(atom, weight)` pairs, merging repeated atoms.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (T, f64)>) -> Result<Self> {
        let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut support = Vec::new();
        let mut probs: Vec<f64> = Vec::new();
        for (atom, p) in pairs {
            match index.get(&atom.key()) {
                Some(&i) => probs[i] += p,
                None => {
                    index.insert(atom.key(), support.len());
                    support.push(atom);
                    probs.push(p);
                }
            }
        }
        Self::new(support, probs)
    }

    pub fn point_mass(atom: T) -> Self {
        Self {
            support: vec![atom],
            probs: vec![1.0],
        }
    }

    pub fn support(&self) -> &[T] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&T, f64)> {
        self.support.iter().zip(self.probs.iter().copied())
    }
}

impl FinitePmf<f64> {
    /// Atoms sorted increasingly with their masses.
    pub fn sorted_atoms(&self) -> Vec<(f64, f64)> {
        let mut atoms: Vec<(f64, f64)> = self.iter().map(|(x, p)| (*x, p)).collect();
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        atoms
    }

    pub fn cdf(&self, t: f64) -> f64 {
        self.iter().filter(|(x, _)| **x <= t).map(|(_, p)| p).sum()
    }
}

fn uniform_cdf(t: f64) -> f64 {
    t.clamp(0.0, 1.0)
}

/// `(D⁺, D⁻)` of a discrete law against `U(0, 1)`:
/// `D⁺ = sup_t (M(t) − t)`, `D⁻ = sup_t (t − M(t))`, both at least 0.
///
/// Between consecutive candidate points (atoms, 0 and 1) the difference
/// `M − U` is monotone, so checking both one-sided limits at those points
/// is exact.
fn one_sided_gaps_vs_uniform(atoms: &[(f64, f64)]) -> (f64, f64) {
    let mut points: Vec<f64> = atoms.iter().map(|a| a.0).collect();
    points.push(0.0);
    points.push(1.0);
    points.sort_by(f64::total_cmp);
    points.dedup();

    let mut plus: f64 = 0.0;
    let mut minus: f64 = 0.0;
    let mut below = 0.0; // mass strictly below the current point
    let mut j = 0;
    for &t in &points {
        while j < atoms.len() && atoms[j].0 < t {
            below += atoms[j].1;
            j += 1;
        }
        let mut at = below;
        let mut k = j;
        while k < atoms.len() && atoms[k].0 == t {
            at += atoms[k].1;
            k += 1;
        }
        let u = uniform_cdf(t);
        plus = plus.max(at - u).max(below - u);
        minus = minus.max(u - at).max(u - below);
    }
    (plus, minus)
}

fn validate_unit(samples: &[f64]) -> Result<()> {
    if samples.is_empty() {
        return Err(invalid("empty sample"));
    }
    if samples.iter().any(|u| !(0.0..=1.0).contains(u)) {
        return Err(invalid("samples must lie in [0, 1]"));
    }
    Ok(())
}

fn empirical_atoms(samples: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let w = 1.0 / samples.len() as f64;
    let mut atoms: Vec<(f64, f64)> = Vec::with_capacity(sorted.len());
    for x in sorted {
        match atoms.last_mut() {
            Some(last) if last.0 == x => last.1 += w,
            _ => atoms.push((x, w)),
        }
    }
    atoms
}

/// `sup_t |F_n(t) − t|` for a sample on `[0, 1]`.
pub fn ks_uniform(u_samples: &[f64]) -> Result<DistanceEstimate> {
    validate_unit(u_samples)?;
    let (p, m) = one_sided_gaps_vs_uniform(&empirical_atoms(u_samples));
    Ok(DistanceEstimate::new(p.max(m), Metric::Ks, false))
}

/// Interval discrepancy `sup_{a<b} |F_n((a, b]) − (b − a)|` of a sample on
/// `[0, 1]`, computed as `D⁺ + D⁻`.
pub fn mod_ks_uniform(u_samples: &[f64]) -> Result<DistanceEstimate> {
    validate_unit(u_samples)?;
    let (p, m) = one_sided_gaps_vs_uniform(&empirical_atoms(u_samples));
    Ok(DistanceEstimate::new(p + m, Metric::ModKs, false))
}

/// Exact `d_KS` between a finite law on the reals and `U(0, 1)`.
pub fn ks_pmf_vs_uniform(pmf: &FinitePmf<f64>) -> DistanceEstimate {
    let (p, m) = one_sided_gaps_vs_uniform(&pmf.sorted_atoms());
    DistanceEstimate::new(p.max(m), Metric::Ks, true)
}

/// Exact `d̃_KS` between a finite law on the reals and `U(0, 1)`.
pub fn mod_ks_pmf_vs_uniform(pmf: &FinitePmf<f64>) -> DistanceEstimate {
    let (p, m) = one_sided_gaps_vs_uniform(&pmf.sorted_atoms());
    DistanceEstimate::new(p + m, Metric::ModKs, true)
}

/// Exact `d_KS` between two finite laws on the reals.
pub fn ks_pmf(p: &FinitePmf<f64>, q: &FinitePmf<f64>) -> DistanceEstimate {
    let (plus, minus) = pmf_cdf_gaps(p, q);
    DistanceEstimate::new(plus.max(minus), Metric::Ks, true)
}

/// Exact `d̃_KS` between two finite laws on the reals.
pub fn mod_ks_pmf(p: &FinitePmf<f64>, q: &FinitePmf<f64>) -> DistanceEstimate {
    let (plus, minus) = pmf_cdf_gaps(p, q);
    DistanceEstimate::new(plus + minus, Metric::ModKs, true)
}

/// `(sup (F_p − F_q)⁺, sup (F_q − F_p)⁺)`; both CDFs jump only at atoms.
fn pmf_cdf_gaps(p: &FinitePmf<f64>, q: &FinitePmf<f64>) -> (f64, f64) {
    let mut points: Vec<(f64, f64, f64)> = p
        .iter()
        .map(|(x, w)| (*x, w, 0.0))
        .chain(q.iter().map(|(x, w)| (*x, 0.0, w)))
        .collect();
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (mut fp, mut fq) = (0.0, 0.0);
    let (mut plus, mut minus): (f64, f64) = (0.0, 0.0);
    let mut i = 0;
    while i < points.len() {
        let x = points[i].0;
        while i < points.len() && points[i].0 == x {
            fp += points[i].1;
            fq += points[i].2;
            i += 1;
        }
        plus = plus.max(fp - fq);
        minus = minus.max(fq - fp);
    }
    (plus, minus)
}

/// `(1/2) Σ |p_i − q_i|` over the union of supports.
pub fn tv_discrete<T: Atom>(p: &FinitePmf<T>, q: &FinitePmf<T>) -> DistanceEstimate {
    let mut diff: HashMap<Vec<u64>, f64> = HashMap::new();
    for (x, w) in p.iter() {
        *diff.entry(x.key()).or_insert(0.0) += w;
    }
    for (x, w) in q.iter() {
        *diff.entry(x.key()).or_insert(0.0) -= w;
    }
    let l1: f64 = diff.values().map(|d| d.abs()).sum();
    DistanceEstimate::new(0.5 * l1, Metric::Tv, true)
}

fn tuple_width(joint: &FinitePmf<Vec<f64>>) -> Result<usize> {
    let width = joint.support()[0].len();
    if width < 2 {
        return Err(invalid("joint tuples need at least two coordinates"));
    }
    if joint.support().iter().any(|t| t.len() != width) {
        return Err(invalid("joint tuples have inconsistent lengths"));
    }
    Ok(width)
}

fn swapped(tuple: &[f64], i: usize) -> Vec<f64> {
    let mut v = tuple.to_vec();
    let last = v.len() - 1;
    v.swap(i, last);
    v
}

/// Exact exchangeability gap `Γ` of a finite joint law of
/// `(W_1, …, W_B, ψ)`: total variation between the law of `V` and the
/// uniform mixture over `i ∈ 1..=B+1` of the laws of `V^i`, where `V^i`
/// swaps coordinate `i` with the last one (`V^{B+1} = V`).
pub fn gamma_exact(joint: &FinitePmf<Vec<f64>>) -> Result<DistanceEstimate> {
    gamma_exact_capped(joint, DEFAULT_ENUMERATION_CAP)
}

pub fn gamma_exact_capped(joint: &FinitePmf<Vec<f64>>, cap: u128) -> Result<DistanceEstimate> {
    let width = tuple_width(joint)?;
    let size = joint.len() as u128 * width as u128;
    if size > cap {
        return Err(Error::CapacityExceeded { size, cap });
    }
    let share = 1.0 / width as f64;
    let mut diff: HashMap<Vec<u64>, f64> = HashMap::with_capacity(joint.len() * width);
    for (t, p) in joint.iter() {
        *diff.entry(t.key()).or_insert(0.0) += p;
        for i in 0..width {
            *diff.entry(swapped(t, i).key()).or_insert(0.0) -= p * share;
        }
    }
    let l1: f64 = diff.values().map(|d| d.abs()).sum();
    Ok(DistanceEstimate::new(0.5 * l1, Metric::Gamma, true))
}

/// `(1/(B+1)) Σ_{i ≤ B} d_TV(V, V^i)`, the swap-average upper bound on `Γ`.
pub fn gamma_swap_bound(joint: &FinitePmf<Vec<f64>>) -> Result<f64> {
    let width = tuple_width(joint)?;
    let mut total = 0.0;
    for i in 0..width - 1 {
        let mut diff: HashMap<Vec<u64>, f64> = HashMap::with_capacity(2 * joint.len());
        for (t, p) in joint.iter() {
            *diff.entry(t.key()).or_insert(0.0) += p;
            *diff.entry(swapped(t, i).key()).or_insert(0.0) -= p;
        }
        total += 0.5 * diff.values().map(|d| d.abs()).sum::<f64>();
    }
    Ok(total / width as f64)
}

/// Empirical Lévy concentration `sup_a P_n((a, a + eps])`.
///
/// An optimal window can always be slid so that its right end sits on a
/// sample point, so only those windows are scanned.
pub fn concentration(samples: &[f64], eps: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(invalid("concentration: empty sample"));
    }
    if eps.is_nan() || eps <= 0.0 {
        return Err(invalid("concentration: eps must be positive"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut best = 0;
    let mut lo = 0;
    for hi in 0..n {
        // right end at the last copy of a tied value
        if hi + 1 < n && sorted[hi + 1] == sorted[hi] {
            continue;
        }
        while sorted[hi] - sorted[lo] >= eps {
            lo += 1;
        }
        best = best.max(hi + 1 - lo);
    }
    Ok(best as f64 / n as f64)
}

/// Two-sample `sup_t |F_x(t) − F_y(t)|`.
pub fn ks_two_sample(x: &[f64], y: &[f64]) -> Result<DistanceEstimate> {
    if x.is_empty() || y.is_empty() {
        return Err(invalid("ks_two_sample: empty sample"));
    }
    let px = FinitePmf::from_pairs(empirical_atoms(x))?;
    let py = FinitePmf::from_pairs(empirical_atoms(y))?;
    let (plus, minus) = pmf_cdf_gaps(&px, &py);
    Ok(DistanceEstimate::new(plus.max(minus), Metric::Ks, false))
}

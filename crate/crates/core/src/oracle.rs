//! Brute-force ground truth for the coverage bounds.
//!
//! Finite instances are enumerated atom by atom; every slack input (Δ, Δ̃,
//! κ_i, the distance of F̄(Z) to uniform, Γ) is computed exactly from the
//! conditional pmfs, never estimated.

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::{thm1_bounds, thm2_bounds, thm3_lower, thm4_bounds};
use crate::distances::{
    gamma_exact_capped, ks_pmf_vs_uniform, mod_ks_pmf_vs_uniform, FinitePmf,
    DEFAULT_ENUMERATION_CAP,
};
use crate::error::{invalid, Error, Result};
use crate::exact_dists::{
    binom_cdf, ehm_tv_bound, hoeffding_ordering_check, tv_poibin_binomial, PoiBinSpec,
};
use crate::orderstats::{snap_alpha, IntervalKind, SortedSample};

/// Neumaier-compensated sum.
fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn check_joint(joint: &FinitePmf<Vec<f64>>, cap: u128) -> Result<usize> {
    let size = joint.len() as u128;
    if size > cap {
        return Err(Error::CapacityExceeded { size, cap });
    }
    let width = joint.support()[0].len();
    if width < 2 || joint.support().iter().any(|t| t.len() != width) {
        return Err(invalid("joint tuples must share a length ≥ 2"));
    }
    Ok(width - 1)
}

/// `P(ψ ∈ W_(lower_rank) .. W_(upper_rank))` for a finite joint law of
/// `(W_1, …, W_B, ψ)`, by enumeration. Ranks outside `1..=B` resolve to
/// `support = (min 𝒲, max 𝒲)`.
pub fn exact_coverage_ranks(
    joint: &FinitePmf<Vec<f64>>,
    lower_rank: i64,
    upper_rank: i64,
    kind: IntervalKind,
    support: (f64, f64),
) -> Result<f64> {
    let budget = check_joint(joint, DEFAULT_ENUMERATION_CAP)?;
    let mut covered = Vec::new();
    for (tuple, p) in joint.iter() {
        let sample = SortedSample::sorted_from(&tuple[..budget], support.0, support.1)?;
        let psi = tuple[budget];
        let lo = match kind {
            IntervalKind::OneSidedUpper => support.0,
            _ => sample.order_stat(lower_rank),
        };
        if kind.contains(lo, sample.order_stat(upper_rank), psi) {
            covered.push(p);
        }
    }
    Ok(compensated_sum(covered))
}

/// Exact coverage of `W_(a) .. W_(B−b)` under a finite joint law.
pub fn exact_coverage_discrete(
    joint: &FinitePmf<Vec<f64>>,
    a: i64,
    b: i64,
    kind: IntervalKind,
    support: (f64, f64),
) -> Result<f64> {
    let budget = check_joint(joint, DEFAULT_ENUMERATION_CAP)? as i64;
    if a < 0 || b < 0 || a >= budget - b {
        return Err(Error::InvalidIndices(format!(
            "need 0 ≤ a < B − b ≤ B, got a = {a}, b = {b}, B = {budget}"
        )));
    }
    exact_coverage_ranks(joint, a, budget - b, kind, support)
}

/// Coverage of `W_(a) .. W_(B−b)` when `W_1, …, W_B, ψ` are IID continuous:
/// the rank of `ψ` among the `B + 1` values is uniform, and the interval
/// captures it iff between `a` and `B − b − 1` draws fall below it. The
/// endpoints are almost surely distinct from `ψ`, so every kind agrees.
pub fn exact_coverage_continuous_iid(budget: usize, a: i64, b: i64) -> Result<Ratio<i64>> {
    let bi = budget as i64;
    if a < 0 || b < 0 || a >= bi - b {
        return Err(Error::InvalidIndices(format!(
            "need 0 ≤ a < B − b ≤ B, got a = {a}, b = {b}, B = {budget}"
        )));
    }
    Ok(Ratio::new(bi - a - b, bi + 1))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridExample {
    pub rank: i64,
    pub coverage: f64,
    pub bound: f64,
}

/// Calibration scores on the grid `(i − 1/2)/m` and a `U(0, 1)` test score:
/// exact coverage `P(U ≤ R_(r))` of the modified conformal set with
/// `r = m + 1 − ⌊2mα/3⌋`, next to the lower bound `1 − α − 3/(2m)`.
pub fn conformal_grid_example(m: usize, alpha: f64) -> Result<GridExample> {
    if m == 0 {
        return Err(invalid("conformal_grid_example: m must be ≥ 1"));
    }
    let a = snap_alpha(alpha)?;
    let mi = m as i64;
    let rank = mi + 1 - (Ratio::from_integer(2 * mi) * a / 3).floor().to_integer();
    let coverage = if rank > mi {
        1.0
    } else {
        (rank as f64 - 0.5) / m as f64
    };
    Ok(GridExample {
        rank,
        coverage,
        bound: 1.0 - alpha - 1.5 / m as f64,
    })
}

/// Exact size of a Monte Carlo group test when the `n = |G|` orbit values
/// are distinct and the observed statistic is uniform on the orbit: `B`
/// draws with replacement, reject iff at least `rank` draws are `≤ T(X)`.
pub fn group_test_size(group_size: usize, budget: usize, rank: i64) -> f64 {
    let n = group_size as f64;
    compensated_sum((1..=group_size).map(|j| 1.0 - binom_cdf(budget, j as f64 / n, rank - 1))) / n
}

/// A finite conditional model: `Z` on `z_probs.len()` points, `ψ(z)` and the
/// `W_i | Z = z` laws living on the grid `{1, …, K}`, with the `W_i`
/// conditionally independent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteInstance {
    pub grid: usize,
    pub z_probs: Vec<f64>,
    /// `ψ(z)` as a 0-based grid index.
    pub psi: Vec<usize>,
    /// `cond[i][z][k] = P(W_i = k + 1 | Z = z)`.
    pub cond: Vec<Vec<Vec<f64>>>,
}

fn grid_value(k: usize) -> f64 {
    (k + 1) as f64
}

impl DiscreteInstance {
    pub fn budget(&self) -> usize {
        self.cond.len()
    }

    pub fn support(&self) -> (f64, f64) {
        (1.0, self.grid as f64)
    }

    /// `P(W_i ≤ ψ(z) | z)`.
    pub fn f_le(&self, i: usize, z: usize) -> f64 {
        self.cond[i][z][..=self.psi[z]].iter().sum()
    }

    /// `P(W_i < ψ(z) | z)`.
    pub fn f_lt(&self, i: usize, z: usize) -> f64 {
        self.cond[i][z][..self.psi[z]].iter().sum()
    }

    fn law_of(&self, f: impl Fn(usize) -> f64) -> Result<FinitePmf<f64>> {
        FinitePmf::from_pairs(self.z_probs.iter().enumerate().map(|(z, &p)| (f(z), p)))
    }

    /// `Δ = d̃_KS(F_0(Z), U)` using the first conditional law.
    pub fn delta(&self) -> Result<f64> {
        Ok(mod_ks_pmf_vs_uniform(&self.law_of(|z| self.f_le(0, z))?).value)
    }

    /// `Δ̃ = d̃_KS(F̃_0(Z), U)` using the first conditional law.
    pub fn delta_tilde(&self) -> Result<f64> {
        Ok(mod_ks_pmf_vs_uniform(&self.law_of(|z| self.f_lt(0, z))?).value)
    }

    fn f_bar(&self, z: usize) -> f64 {
        (0..self.budget()).map(|i| self.f_le(i, z)).sum::<f64>() / self.budget() as f64
    }

    /// `d̃_KS(F̄(Z), U)`.
    pub fn fbar_mod_ks(&self) -> Result<f64> {
        Ok(mod_ks_pmf_vs_uniform(&self.law_of(|z| self.f_bar(z))?).value)
    }

    /// `d_KS(F̄(Z), U)`.
    pub fn fbar_ks(&self) -> Result<f64> {
        Ok(ks_pmf_vs_uniform(&self.law_of(|z| self.f_bar(z))?).value)
    }

    /// `κ_i = sup_u |F(ψ(u)) − F_i(u)|` with `F` the CDF of `ψ(Z)`.
    pub fn kappas(&self) -> Vec<f64> {
        let cdf_psi = |u: usize| -> f64 {
            self.z_probs
                .iter()
                .zip(&self.psi)
                .filter(|(_, &k)| k <= self.psi[u])
                .map(|(p, _)| p)
                .sum()
        };
        (0..self.budget())
            .map(|i| {
                (0..self.z_probs.len())
                    .map(|u| (cdf_psi(u) - self.f_le(i, u)).abs())
                    .fold(0.0, f64::max)
            })
            .collect()
    }

    /// The joint law of `(W_1, …, W_B, ψ(Z))`, enumerated.
    pub fn joint(&self, cap: u128) -> Result<FinitePmf<Vec<f64>>> {
        let b = self.budget();
        let size = (self.grid as u128)
            .checked_pow(b as u32)
            .and_then(|s| s.checked_mul(self.z_probs.len() as u128))
            .unwrap_or(u128::MAX);
        if size > cap {
            return Err(Error::CapacityExceeded { size, cap });
        }
        let mut pairs = Vec::new();
        for (z, &pz) in self.z_probs.iter().enumerate() {
            let mut stack: Vec<(Vec<f64>, f64)> = vec![(Vec::with_capacity(b + 1), pz)];
            for i in 0..b {
                let mut next = Vec::with_capacity(stack.len() * self.grid);
                for (prefix, p) in stack {
                    for (k, &q) in self.cond[i][z].iter().enumerate() {
                        if q > 0.0 {
                            let mut t = prefix.clone();
                            t.push(grid_value(k));
                            next.push((t, p * q));
                        }
                    }
                }
                stack = next;
            }
            for (mut t, p) in stack {
                t.push(grid_value(self.psi[z]));
                pairs.push((t, p));
            }
        }
        FinitePmf::from_pairs(pairs)
    }
}

fn random_pmf(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    // sparse supports make ties and atoms common
    let mut w: Vec<f64> = (0..k)
        .map(|_| {
            if rng.random::<f64>() < 0.3 {
                0.0
            } else {
                rng.random::<f64>()
            }
        })
        .collect();
    if w.iter().all(|x| *x == 0.0) {
        w[rng.random_range(0..k)] = 1.0;
    }
    let s: f64 = w.iter().sum();
    w.iter().map(|x| x / s).collect()
}

fn random_z(rng: &mut ChaCha8Rng, grid: usize) -> (Vec<f64>, Vec<usize>) {
    let nz = rng.random_range(1..=3);
    let mut z_probs: Vec<f64> = (0..nz).map(|_| 0.05 + rng.random::<f64>()).collect();
    let s: f64 = z_probs.iter().sum();
    z_probs.iter_mut().for_each(|p| *p /= s);
    let psi = (0..nz).map(|_| rng.random_range(0..grid)).collect();
    (z_probs, psi)
}

/// `Z` uniform on two points, `ψ(z) = z`, `W | Z=1` uniform on `{1, 2}` and
/// `W | Z=2 ≡ 2`: draws tie with `ψ` at the top of the support.
pub fn tie_instance(budget: usize) -> DiscreteInstance {
    DiscreteInstance {
        grid: 2,
        z_probs: vec![0.5, 0.5],
        psi: vec![0, 1],
        cond: vec![vec![vec![0.5, 0.5], vec![0.0, 1.0]]; budget],
    }
}

/// Conditionally IID draws: one law per `z`, shared by all `W_i`.
pub fn random_iid_instance(rng: &mut ChaCha8Rng, budget: usize, grid: usize) -> DiscreteInstance {
    let (z_probs, psi) = random_z(rng, grid);
    let laws: Vec<Vec<f64>> = (0..z_probs.len()).map(|_| random_pmf(rng, grid)).collect();
    DiscreteInstance {
        grid,
        z_probs,
        psi,
        cond: vec![laws; budget],
    }
}

/// Conditionally independent, non-identical draws.
pub fn random_independent_instance(
    rng: &mut ChaCha8Rng,
    budget: usize,
    grid: usize,
) -> DiscreteInstance {
    let (z_probs, psi) = random_z(rng, grid);
    let cond = (0..budget)
        .map(|_| (0..z_probs.len()).map(|_| random_pmf(rng, grid)).collect())
        .collect();
    DiscreteInstance {
        grid,
        z_probs,
        psi,
        cond,
    }
}

/// An arbitrary joint on `{1, …, K}^{B+1}` with at most `atoms` atoms,
/// optionally symmetrized over all coordinate permutations.
pub fn random_joint(
    rng: &mut ChaCha8Rng,
    budget: usize,
    grid: usize,
    atoms: usize,
    exchangeable: bool,
) -> Result<FinitePmf<Vec<f64>>> {
    let base: Vec<(Vec<f64>, f64)> = (0..atoms.max(1))
        .map(|_| {
            let t = (0..=budget)
                .map(|_| grid_value(rng.random_range(0..grid)))
                .collect();
            (t, 0.05 + rng.random::<f64>())
        })
        .collect();
    let total: f64 = base.iter().map(|(_, w)| w).sum();
    if !exchangeable {
        return FinitePmf::from_pairs(base.into_iter().map(|(t, w)| (t, w / total)));
    }
    let perms = all_permutations(budget + 1);
    let share = 1.0 / perms.len() as f64;
    let mut pairs = Vec::with_capacity(base.len() * perms.len());
    for (t, w) in &base {
        for p in &perms {
            pairs.push((
                p.iter().map(|&i| t[i]).collect::<Vec<f64>>(),
                w / total * share,
            ));
        }
    }
    FinitePmf::from_pairs(pairs)
}

fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in all_permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Outcome of a bracket suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub name: String,
    pub instances: usize,
    pub checks: usize,
    pub violations: usize,
    /// Smallest `coverage − lower` or `upper − coverage` seen.
    pub worst_margin: f64,
    pub first_violation: Option<String>,
}

impl SuiteReport {
    fn new(name: &str) -> Self {
        Self {
            name: name.into(),
            instances: 0,
            checks: 0,
            violations: 0,
            worst_margin: f64::INFINITY,
            first_violation: None,
        }
    }

    fn record(&mut self, margin: f64, what: impl FnOnce() -> String) {
        self.checks += 1;
        self.worst_margin = self.worst_margin.min(margin);
        if margin < -BRACKET_TOL {
            self.violations += 1;
            if self.first_violation.is_none() {
                self.first_violation = Some(what());
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0 && self.checks > 0
    }
}

const BRACKET_TOL: f64 = 1e-9;

/// Largest budget enumerated by the suites.
pub const SUITE_MAX_BUDGET: usize = 6;
/// Largest grid (atoms per marginal) used by the suites.
pub const SUITE_MAX_GRID: usize = 5;

fn suite_rng(seed: u64, budget: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(budget as u64);
    rng
}

/// Conditionally IID instances: exact coverage of every `(a, b)` lies within
/// the IID bracket for its interval kind, with exact `Δ`, `Δ̃`. One report per
/// kind: closed, left-closed-right-open, left-open-right-closed.
///
/// The left-open kind is checked for `a ≥ 1`: with `a = 0` its lower end is
/// the support minimum, which `ψ` may equal.
pub fn iid_bracket_suites(seed: u64, per_budget: usize) -> Result<[SuiteReport; 3]> {
    const KINDS: [IntervalKind; 3] = [
        IntervalKind::Closed,
        IntervalKind::LeftClosedRightOpen,
        IntervalKind::LeftOpenRightClosed,
    ];
    let mut reports = [
        SuiteReport::new("iid_bracket_closed"),
        SuiteReport::new("iid_bracket_left_closed"),
        SuiteReport::new("iid_bracket_left_open"),
    ];
    for budget in 1..=SUITE_MAX_BUDGET {
        let mut rng = suite_rng(seed, budget);
        // instance 0 is the tie family, the rest are random
        for t in 0..=per_budget {
            let inst = if t == 0 {
                tie_instance(budget)
            } else {
                let grid = rng.random_range(2..=SUITE_MAX_GRID);
                random_iid_instance(&mut rng, budget, grid)
            };
            let joint = inst.joint(DEFAULT_ENUMERATION_CAP)?;
            let (delta, delta_tilde) = (inst.delta()?, inst.delta_tilde()?);
            for (kind, report) in KINDS.into_iter().zip(reports.iter_mut()) {
                report.instances += 1;
                for a in 0..budget as i64 {
                    if kind == IntervalKind::LeftOpenRightClosed && a == 0 {
                        continue;
                    }
                    for b in 0..budget as i64 - a {
                        let cov = exact_coverage_discrete(&joint, a, b, kind, inst.support())?;
                        let bound = thm1_bounds(budget, a, b, delta, delta_tilde, kind)?;
                        let margin = (cov - bound.lower).min(bound.upper - cov);
                        report.record(margin, || {
                            format!("B={budget} instance {t} a={a} b={b}: coverage {cov} outside [{}, {}]", bound.lower, bound.upper)
                        });
                    }
                }
            }
        }
    }
    Ok(reports)
}

/// Conditionally independent, non-identical instances: the closed interval's
/// exact coverage lies within the `κ`/`I_B` bracket, and (for `a, b < B/2`)
/// above the stochastic-ordering lower bound.
pub fn independent_and_ordering_suites(
    seed: u64,
    per_budget: usize,
) -> Result<(SuiteReport, SuiteReport)> {
    let mut t2 = SuiteReport::new("independent_bracket");
    let mut t3 = SuiteReport::new("ordering_lower_bound");
    for budget in 1..=SUITE_MAX_BUDGET {
        let mut rng = suite_rng(seed ^ 0x5eed, budget);
        for t in 0..=per_budget {
            let grid = rng.random_range(2..=SUITE_MAX_GRID);
            // identical conditionals are a special case worth half the draws
            let inst = if t == 0 {
                tie_instance(budget)
            } else if t % 2 == 0 {
                random_iid_instance(&mut rng, budget, grid)
            } else {
                random_independent_instance(&mut rng, budget, grid)
            };
            let joint = inst.joint(DEFAULT_ENUMERATION_CAP)?;
            let (d_mod, d_ks, kappas) = (inst.fbar_mod_ks()?, inst.fbar_ks()?, inst.kappas());
            t2.instances += 1;
            t3.instances += 1;
            for a in 0..budget as i64 {
                for b in 0..budget as i64 - a {
                    let cov = exact_coverage_discrete(
                        &joint,
                        a,
                        b,
                        IntervalKind::Closed,
                        inst.support(),
                    )?;
                    let bound = thm2_bounds(budget, a, b, d_mod, &kappas)?;
                    let margin = (cov - bound.lower).min(bound.upper - cov);
                    t2.record(margin, || {
                        format!(
                            "B={budget} instance {t} a={a} b={b}: coverage {cov} outside [{}, {}]",
                            bound.lower, bound.upper
                        )
                    });
                    if 2 * a < budget as i64 && 2 * b < budget as i64 {
                        let lower = thm3_lower(budget, a, b, d_ks)?;
                        t3.record(cov - lower, || {
                            format!(
                                "B={budget} instance {t} a={a} b={b}: coverage {cov} below {lower}"
                            )
                        });
                    }
                }
            }
        }
    }
    Ok((t2, t3))
}

/// Arbitrary finite joints, half of them exchangeable: exact coverage of
/// `[W_(⌊(B+1)γ/2⌋−1), W_(⌈(B+1)(1−β/2)⌉)]` is at least `1 − (γ+β)/2 − Γ`.
pub fn exchangeability_suite(seed: u64, per_budget: usize) -> Result<SuiteReport> {
    let mut report = SuiteReport::new("exchangeability_lower_bound");
    for budget in 1..=SUITE_MAX_BUDGET {
        let mut rng = suite_rng(seed ^ 0x7434, budget);
        for t in 0..per_budget {
            let grid = rng.random_range(2..=SUITE_MAX_GRID);
            let atoms = rng.random_range(1..=12);
            let exchangeable = t % 2 == 0;
            let joint = random_joint(&mut rng, budget, grid, atoms, exchangeable)?;
            let big_gamma = gamma_exact_capped(&joint, DEFAULT_ENUMERATION_CAP)?.value;
            report.instances += 1;
            for gi in 1..20i64 {
                for bi in 1..20i64 {
                    let (g, be) = (Ratio::new(gi, 20), Ratio::new(bi, 20));
                    let b1 = Ratio::from_integer(budget as i64 + 1);
                    let lo = (b1 * g / 2).floor().to_integer() - 1;
                    let hi = (b1 * (Ratio::from_integer(1) - be / 2)).ceil().to_integer();
                    let cov = exact_coverage_ranks(
                        &joint,
                        lo,
                        hi,
                        IntervalKind::Closed,
                        (1.0, grid as f64),
                    )?;
                    let bound =
                        thm4_bounds(budget, gi as f64 / 20.0, bi as f64 / 20.0, big_gamma, false)?;
                    report.record(cov - bound.lower, || {
                        format!(
                            "B={budget} instance {t} γ={g} β={be}: coverage {cov} below {}",
                            bound.lower
                        )
                    });
                }
            }
        }
    }
    Ok(report)
}

/// The conformal grid example over `m ∈ [5, m_max]` and
/// `α ∈ {0.05, 0.10, …, 0.50}`: exact coverage never falls below the bound.
pub fn conformal_grid_suite(m_max: usize) -> Result<SuiteReport> {
    let mut report = SuiteReport::new("conformal_grid");
    for m in 5..=m_max {
        report.instances += 1;
        for k in 1..=10 {
            let alpha = k as f64 * 0.05;
            let ex = conformal_grid_example(m, alpha)?;
            report.record(ex.coverage - ex.bound, || {
                format!(
                    "m={m} α={alpha}: coverage {} below {}",
                    ex.coverage, ex.bound
                )
            });
        }
    }
    Ok(report)
}

/// Every `p ∈ {0.1, …, 0.9}^B` for `B ≤ max_budget`: the exact TV distance
/// to `Bin(B, p̄)` stays under the Ehm bound, and the Hoeffding ordering holds.
/// Returns the TV report and the ordering report.
pub fn ehm_grid_suite(max_budget: usize) -> Result<(SuiteReport, SuiteReport)> {
    let mut tv = SuiteReport::new("ehm_tv_bound");
    let mut ord = SuiteReport::new("hoeffding_ordering");
    for budget in 1..=max_budget {
        let total = 9usize.pow(budget as u32);
        for code in 0..total {
            let mut c = code;
            let probs: Vec<f64> = (0..budget)
                .map(|_| {
                    let p = (c % 9 + 1) as f64 / 10.0;
                    c /= 9;
                    p
                })
                .collect();
            let spec = PoiBinSpec::new(probs)?;
            let exact = tv_poibin_binomial(&spec);
            let bound = ehm_tv_bound(&spec)?;
            tv.instances += 1;
            ord.instances += 1;
            tv.record(bound.upper - exact, || {
                format!(
                    "p={:?}: TV {exact} above bound {}",
                    spec.probs(),
                    bound.upper
                )
            });
            let report = hoeffding_ordering_check(&spec);
            ord.record(
                if report.pass {
                    report.worst_margin.max(0.0)
                } else {
                    -1.0
                },
                || {
                    format!(
                        "p={:?}: ordering fails at k={:?}",
                        spec.probs(),
                        report.worst_k
                    )
                },
            );
        }
    }
    Ok((tv, ord))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distances::gamma_exact;

    fn iid_uniform_instance() -> DiscreteInstance {
        DiscreteInstance {
            grid: 3,
            z_probs: vec![1.0 / 3.0; 3],
            psi: vec![0, 1, 2],
            cond: vec![vec![vec![1.0 / 3.0; 3]; 3]; 2],
        }
    }

    #[test]
    fn discrete_hand_enumeration() {
        // B = 2 draws uniform on {1,2,3}, ψ uniform on {1,2,3}, independent.
        let inst = iid_uniform_instance();
        let joint = inst.joint(DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(joint.len(), 27);
        let cov =
            exact_coverage_discrete(&joint, 0, 0, IntervalKind::Closed, inst.support()).unwrap();
        // [W_(0), W_(2)] = [1, max] ∋ ψ iff ψ ≤ max(W_1, W_2)
        let mut count = 0;
        for w1 in 1..=3 {
            for w2 in 1..=3 {
                for psi in 1..=3 {
                    if psi <= w1.max(w2) {
                        count += 1;
                    }
                }
            }
        }
        assert!((cov - count as f64 / 27.0).abs() < 1e-12);
    }

    #[test]
    fn exchangeable_surrogate_matches_rank_count() {
        // uniform over the 24 orderings of four distinct atoms
        let perms = all_permutations(4);
        let joint = FinitePmf::from_pairs(perms.iter().map(|p| {
            (
                p.iter().map(|&i| i as f64 + 1.0).collect::<Vec<_>>(),
                1.0 / 24.0,
            )
        }))
        .unwrap();
        for kind in [IntervalKind::Closed, IntervalKind::LeftClosedRightOpen] {
            let cov = exact_coverage_discrete(&joint, 1, 1, kind, (1.0, 4.0)).unwrap();
            assert!((cov - 0.25).abs() < 1e-12, "{kind:?}: {cov}");
        }
        let exact = exact_coverage_continuous_iid(3, 1, 1).unwrap();
        assert_eq!(exact, Ratio::new(1, 4));
        assert!(gamma_exact(&joint).unwrap().value < 1e-12);
    }

    #[test]
    fn psi_below_all_draws() {
        let joint = FinitePmf::point_mass(vec![2.0, 3.0, 1.0]);
        let cov = exact_coverage_discrete(&joint, 1, 0, IntervalKind::Closed, (1.0, 3.0)).unwrap();
        assert_eq!(cov, 0.0);
    }

    #[test]
    fn continuous_identity_values() {
        assert_eq!(
            exact_coverage_continuous_iid(19, 1, 1).unwrap(),
            Ratio::new(17, 20)
        );
        assert_eq!(
            exact_coverage_continuous_iid(99, 5, 4).unwrap(),
            Ratio::new(90, 100)
        );
        assert!(exact_coverage_continuous_iid(3, 2, 1).is_err());
    }

    #[test]
    fn continuous_identity_sits_in_iid_bracket() {
        for budget in 2..60usize {
            for a in 0..budget as i64 {
                for b in 0..budget as i64 - a {
                    let p = exact_coverage_continuous_iid(budget, a, b).unwrap();
                    let p = *p.numer() as f64 / *p.denom() as f64;
                    for kind in [IntervalKind::Closed, IntervalKind::LeftClosedRightOpen] {
                        let br = thm1_bounds(budget, a, b, 0.0, 0.0, kind).unwrap();
                        assert!(br.brackets(p, 1e-12));
                    }
                }
            }
        }
    }

    #[test]
    fn grid_examples() {
        let ex = conformal_grid_example(100, 0.1).unwrap();
        assert_eq!(ex.rank, 95);
        assert!((ex.coverage - 0.945).abs() < 1e-12);
        assert!((ex.bound - 0.885).abs() < 1e-12);
        let ex = conformal_grid_example(10, 0.3).unwrap();
        assert_eq!(ex.rank, 9);
        assert!((ex.coverage - 0.85).abs() < 1e-12);
        assert!((ex.bound - 0.55).abs() < 1e-12);
    }

    /// Enumerate every B-tuple of orbit ranks and observed rank.
    fn group_test_size_brute(n: usize, budget: usize, rank: i64) -> f64 {
        let total = n.pow(budget as u32);
        let mut rejections = 0usize;
        for j in 1..=n {
            for code in 0..total {
                let mut c = code;
                let mut below = 0;
                for _ in 0..budget {
                    if c % n < j {
                        below += 1;
                    }
                    c /= n;
                }
                if below >= rank {
                    rejections += 1;
                }
            }
        }
        rejections as f64 / (n * total) as f64
    }

    #[test]
    fn group_test_size_matches_enumeration() {
        for (n, budget, rank) in [(4, 4, 3), (4, 3, 3), (6, 4, 4), (8, 5, 5), (5, 5, 7)] {
            let a = group_test_size(n, budget, rank);
            let b = group_test_size_brute(n, budget, rank);
            assert!(
                (a - b).abs() < 1e-12,
                "n={n} B={budget} r={rank}: {a} vs {b}"
            );
        }
    }

    #[test]
    fn kappas_vanish_for_matching_laws() {
        // ψ(Z) uniform on {1,2,3}; W_i independent of Z with the same law.
        let inst = iid_uniform_instance();
        let k = inst.kappas();
        // F(ψ(u)) = (u+1)/3 and F_i(u) = (u+1)/3
        assert!(k.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn suites_pass_at_small_size() {
        let [_, left_closed, left_open] = iid_bracket_suites(1, 4).unwrap();
        assert!(left_closed.passed() && left_open.passed());
        let (_, t3) = independent_and_ordering_suites(1, 4).unwrap();
        assert!(t3.passed(), "{t3:?}");
        assert!(exchangeability_suite(1, 2).unwrap().passed());
        assert!(conformal_grid_suite(300).unwrap().passed());
        let (tv, ord) = ehm_grid_suite(3).unwrap();
        assert!(tv.passed() && ord.passed());
    }

    /// Draws that tie with ψ at the top of the support sit inside the closed
    /// interval even when more than `B − b` of them are `≤ ψ`.
    #[test]
    fn closed_interval_ties_exceed_iid_upper_end() {
        let inst = tie_instance(6);
        let joint = inst.joint(DEFAULT_ENUMERATION_CAP).unwrap();
        let cov =
            exact_coverage_discrete(&joint, 0, 5, IntervalKind::Closed, inst.support()).unwrap();
        // z = 1: ψ = 1 ≤ W_(1) always; z = 2: W ≡ 2 = ψ
        assert!((cov - 1.0).abs() < 1e-12);
        let delta = inst.delta().unwrap();
        assert!((delta - 0.5).abs() < 1e-12, "{delta}");
        let bound = thm1_bounds(
            6,
            0,
            5,
            delta,
            inst.delta_tilde().unwrap(),
            IntervalKind::Closed,
        )
        .unwrap();
        assert!(bound.upper < 0.8 && cov > bound.upper);
        // the same instance, read as conditionally independent
        assert!(inst.kappas().iter().all(|k| *k == 0.0));
        assert!((inst.fbar_mod_ks().unwrap() - 0.5).abs() < 1e-12);
        let bound = thm2_bounds(6, 0, 5, 0.5, &inst.kappas()).unwrap();
        assert!(cov > bound.upper);
    }

    #[test]
    fn capacity_is_enforced() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let inst = random_iid_instance(&mut rng, 6, 5);
        assert!(matches!(
            inst.joint(100),
            Err(Error::CapacityExceeded { .. })
        ));
    }
}

//! Order-statistic bookkeeping: sorted resample statistics with support
//! sentinels, the exact integer rank rules used by every procedure, and the
//! budget arithmetic around them.
//!
//! Rank formulas are evaluated in exact rational arithmetic. The miscoverage
//! level is first snapped to the closest fraction with denominator at most
//! [`ALPHA_MAX_DENOMINATOR`], so `0.1` is treated as exactly `1/10` and
//! `⌈20 · 0.9⌉` is 18, never 19.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub const ALPHA_MAX_DENOMINATOR: i64 = 1_000_000;

/// Smallest miscoverage level accepted by [`BudgetSpec`].
pub const ALPHA_MIN: f64 = 1e-6;

/// Resample statistics `W_(1) ≤ … ≤ W_(B)` plus the support sentinels that
/// stand in for `W_(r)` when `r ≤ 0` or `r ≥ B + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SortedSample {
    values: Vec<f64>,
    support_lo: f64,
    support_hi: f64,
}

impl SortedSample {
    /// Sorts a copy of `values`. Ties are kept as they are.
    pub fn sorted_from(values: &[f64], support_lo: f64, support_hi: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("sorted_from: empty sample"));
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(invalid("sorted_from: NaN in sample"));
        }
        if support_lo.is_nan() || support_hi.is_nan() || support_lo > support_hi {
            return Err(invalid("sorted_from: invalid support sentinels"));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        if sorted[0] < support_lo || sorted[sorted.len() - 1] > support_hi {
            return Err(invalid(
                "sorted_from: sample lies outside the declared support",
            ));
        }
        Ok(Self {
            values: sorted,
            support_lo,
            support_hi,
        })
    }

    /// Sorted sample with sentinels at `−∞` and `+∞`.
    pub fn unbounded(values: &[f64]) -> Result<Self> {
        Self::sorted_from(values, f64::NEG_INFINITY, f64::INFINITY)
    }

    /// `W_(r)` with the boundary conventions: `support_lo` for `r ≤ 0`,
    /// `support_hi` for `r ≥ B + 1`.
    pub fn order_stat(&self, r: i64) -> f64 {
        if r <= 0 {
            self.support_lo
        } else if r as usize > self.values.len() {
            self.support_hi
        } else {
            self.values[r as usize - 1]
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn support_lo(&self) -> f64 {
        self.support_lo
    }

    pub fn support_hi(&self) -> f64 {
        self.support_hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalKind {
    /// `[lo, hi]`
    Closed,
    /// `[lo, hi)`
    LeftClosedRightOpen,
    /// `(lo, hi]`
    LeftOpenRightClosed,
    /// `x ≤ hi`, the lower rank is ignored.
    OneSidedUpper,
}

impl IntervalKind {
    pub fn contains(self, lo: f64, hi: f64, x: f64) -> bool {
        match self {
            IntervalKind::Closed => lo <= x && x <= hi,
            IntervalKind::LeftClosedRightOpen => lo <= x && x < hi,
            IntervalKind::LeftOpenRightClosed => lo < x && x <= hi,
            IntervalKind::OneSidedUpper => x <= hi,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleName {
    VanillaTwoSided,
    ModTwoSided,
    /// The `U > τ` branch of the randomized modified interval.
    ModTwoSidedFloor,
    OneSidedUpperMod,
    PermutationFull,
    PermutationSub,
    Randomization,
    ConformalSplit,
    ConformalMod,
    Thm3Symmetric,
    Thm4,
}

impl RuleName {
    pub const ALL: [RuleName; 11] = [
        RuleName::VanillaTwoSided,
        RuleName::ModTwoSided,
        RuleName::ModTwoSidedFloor,
        RuleName::OneSidedUpperMod,
        RuleName::PermutationFull,
        RuleName::PermutationSub,
        RuleName::Randomization,
        RuleName::ConformalSplit,
        RuleName::ConformalMod,
        RuleName::Thm3Symmetric,
        RuleName::Thm4,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RuleName::VanillaTwoSided => "vanilla_two_sided",
            RuleName::ModTwoSided => "mod_two_sided",
            RuleName::ModTwoSidedFloor => "mod_two_sided_floor",
            RuleName::OneSidedUpperMod => "one_sided_upper_mod",
            RuleName::PermutationFull => "permutation_full",
            RuleName::PermutationSub => "permutation_sub",
            RuleName::Randomization => "randomization",
            RuleName::ConformalSplit => "conformal_split",
            RuleName::ConformalMod => "conformal_mod",
            RuleName::Thm3Symmetric => "thm3_symmetric",
            RuleName::Thm4 => "thm4",
        }
    }

    pub fn sided(self) -> Sided {
        match self {
            RuleName::VanillaTwoSided
            | RuleName::ModTwoSided
            | RuleName::ModTwoSidedFloor
            | RuleName::Thm3Symmetric
            | RuleName::Thm4 => Sided::Two,
            _ => Sided::One,
        }
    }
}

impl fmt::Display for RuleName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RuleName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RuleName::ALL
            .iter()
            .copied()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| invalid(format!("unknown index rule `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sided {
    One,
    Two,
}

/// A Monte Carlo budget `B` with a miscoverage level `α`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetSpec {
    pub budget: usize,
    pub alpha: f64,
    alpha_exact: Ratio<i64>,
}

impl BudgetSpec {
    pub fn new(budget: usize, alpha: f64) -> Result<Self> {
        if budget == 0 {
            return Err(invalid("budget B must be at least 1"));
        }
        let alpha_exact = snap_alpha(alpha)?;
        Ok(Self {
            budget,
            alpha,
            alpha_exact,
        })
    }

    /// `α` as the rational the rank formulas use.
    pub fn alpha_exact(&self) -> Ratio<i64> {
        self.alpha_exact
    }

    fn b(&self) -> i64 {
        self.budget as i64
    }

    /// `(B + 1)(1 − α)`
    fn upper_mass(&self) -> Ratio<i64> {
        Ratio::from_integer(self.b() + 1) * (Ratio::from_integer(1) - self.alpha_exact)
    }

    /// `⌊(B + 1) α / 2⌋`
    fn half_alpha_floor(&self) -> i64 {
        floor(Ratio::from_integer(self.b() + 1) * self.alpha_exact / 2)
    }
}

/// Closest fraction to `alpha` with denominator at most
/// [`ALPHA_MAX_DENOMINATOR`] (continued-fraction best approximation).
pub fn snap_alpha(alpha: f64) -> Result<Ratio<i64>> {
    if !(alpha.is_finite() && (ALPHA_MIN..1.0).contains(&alpha)) {
        return Err(invalid(format!(
            "alpha must lie in [{ALPHA_MIN}, 1), got {alpha}"
        )));
    }
    // Exact binary value of alpha as num / den with den a power of two.
    let bits = alpha.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i32;
    let frac = (bits & ((1u64 << 52) - 1)) as i128;
    let (mut num, mut den) = (frac | (1i128 << 52), 1i128 << (1075 - exp));
    let shift = num.trailing_zeros().min(den.trailing_zeros());
    num >>= shift;
    den >>= shift;

    let max_d = ALPHA_MAX_DENOMINATOR as i128;
    if den <= max_d {
        return Ok(Ratio::new(num as i64, den as i64));
    }
    let (target_num, target_den) = (num, den);
    let (mut p0, mut q0, mut p1, mut q1) = (0i128, 1i128, 1i128, 0i128);
    let (mut n, mut d) = (num, den);
    loop {
        let a = n / d;
        let q2 = q0 + a * q1;
        if q2 > max_d {
            break;
        }
        (p0, q0, p1, q1) = (p1, q1, p0 + a * p1, q2);
        (n, d) = (d, n - a * d);
        if d == 0 {
            break;
        }
    }
    let k = (max_d - q0) / q1;
    let (sp, sq) = (p0 + k * p1, q0 + k * q1);
    // |p/q − x| compared by cross multiplication.
    let err = |p: i128, q: i128| ((p * target_den - target_num * q).abs(), q);
    let (e1, d1) = err(p1, q1);
    let (e2, d2) = err(sp, sq);
    let (p, q) = if e1 * d2 <= e2 * d1 {
        (p1, q1)
    } else {
        (sp, sq)
    };
    Ok(Ratio::new(p as i64, q as i64))
}

fn floor(x: Ratio<i64>) -> i64 {
    x.floor().to_integer()
}

fn ceil(x: Ratio<i64>) -> i64 {
    x.ceil().to_integer()
}

/// Smallest `B` that admits a non-trivial `(1 − α)` interval with zero slack:
/// `⌈1/α − 1⌉` one-sided, `⌈2/α − 1⌉` two-sided.
pub fn min_budget(alpha: f64, sided: Sided) -> Result<usize> {
    let a = snap_alpha(alpha)?;
    let numerator = match sided {
        Sided::One => 1,
        Sided::Two => 2,
    };
    let b = ceil(Ratio::from_integer(numerator) / a - 1);
    Ok(b.max(1) as usize)
}

/// Probability of taking the `⌈·⌉` branch of the randomized modified
/// interval. Equals the fractional part of `(B + 1)(1 − α)`, or 1 when that
/// product is an integer.
pub fn tau_randomization(spec: &BudgetSpec) -> f64 {
    let t = tau_randomization_exact(spec);
    *t.numer() as f64 / *t.denom() as f64
}

pub fn tau_randomization_exact(spec: &BudgetSpec) -> Ratio<i64> {
    let x = spec.upper_mass();
    if x.is_integer() {
        return Ratio::from_integer(1);
    }
    let b1 = Ratio::from_integer(spec.b() + 1);
    let one_minus_alpha = Ratio::from_integer(1) - spec.alpha_exact;
    let lo = x.floor();
    let hi = x.ceil();
    (one_minus_alpha - lo / b1) / ((hi - lo) / b1)
}

/// Ranks `(lower, upper)` and membership kind of an order-statistic interval
/// `W_(lower) .. W_(upper)`. Ranks are kept raw; ranks outside `1..=B`
/// resolve through the support sentinels of the [`SortedSample`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IntervalIndexRule {
    pub lower_rank: i64,
    pub upper_rank: i64,
    pub kind: IntervalKind,
    pub rule: RuleName,
    pub budget: usize,
}

impl IntervalIndexRule {
    /// Evaluates the named rule without any feasibility check.
    pub fn compute(spec: &BudgetSpec, rule: RuleName) -> Self {
        let b = spec.b();
        let alpha = spec.alpha_exact;
        let bf = Ratio::from_integer(b);
        let one = Ratio::from_integer(1);
        let ceil_upper = ceil(spec.upper_mass());
        let (lower_rank, upper_rank, kind) = match rule {
            RuleName::VanillaTwoSided => (
                ceil(bf * alpha / 2),
                ceil(bf * (one - alpha / 2)),
                IntervalKind::LeftClosedRightOpen,
            ),
            RuleName::ModTwoSided => {
                let l = spec.half_alpha_floor();
                (l, ceil_upper + l, IntervalKind::LeftClosedRightOpen)
            }
            RuleName::ModTwoSidedFloor => {
                let l = spec.half_alpha_floor();
                (
                    l,
                    floor(spec.upper_mass()) + l,
                    IntervalKind::LeftClosedRightOpen,
                )
            }
            RuleName::OneSidedUpperMod | RuleName::Randomization | RuleName::ConformalSplit => {
                (0, ceil_upper, IntervalKind::OneSidedUpper)
            }
            RuleName::PermutationFull => {
                (0, ceil(bf * (one - alpha)) + 2, IntervalKind::OneSidedUpper)
            }
            RuleName::PermutationSub => (0, ceil_upper + 1, IntervalKind::OneSidedUpper),
            RuleName::ConformalMod => (
                0,
                b + 1 - floor(bf * alpha * 2 / 3),
                IntervalKind::OneSidedUpper,
            ),
            RuleName::Thm3Symmetric => {
                let a = floor(bf * alpha / 3 - Ratio::new(1, 2));
                (a, b - a, IntervalKind::Closed)
            }
            RuleName::Thm4 => {
                // γ = β = α
                let b1 = Ratio::from_integer(b + 1);
                (
                    floor(b1 * alpha / 2) - 1,
                    ceil(b1 * (one - alpha / 2)),
                    IntervalKind::Closed,
                )
            }
        };
        Self {
            lower_rank,
            upper_rank,
            kind,
            rule,
            budget: spec.budget,
        }
    }

    /// Ranks clamped into `0..=B+1`.
    pub fn clamped(&self) -> (i64, i64) {
        let top = self.budget as i64 + 1;
        (self.lower_rank.clamp(0, top), self.upper_rank.clamp(0, top))
    }

    /// Empty interval; a one-sided interval whose upper end is the support
    /// sentinel; or a two-sided interval with either end a sentinel.
    pub fn is_degenerate(&self) -> bool {
        let (lo, hi) = self.clamped();
        let top = self.budget as i64 + 1;
        match self.rule.sided() {
            Sided::One => hi <= 0 || hi >= top,
            Sided::Two => lo >= hi || lo <= 0 || hi >= top,
        }
    }

    pub fn lower_value(&self, sample: &SortedSample) -> f64 {
        match self.kind {
            IntervalKind::OneSidedUpper => sample.support_lo(),
            _ => sample.order_stat(self.lower_rank),
        }
    }

    pub fn upper_value(&self, sample: &SortedSample) -> f64 {
        sample.order_stat(self.upper_rank)
    }

    /// Whether `x` lies in the order-statistic interval built on `sample`.
    pub fn contains(&self, sample: &SortedSample, x: f64) -> bool {
        self.kind
            .contains(self.lower_value(sample), self.upper_value(sample), x)
    }
}

/// Largest budget probed when searching for the smallest feasible `B`.
const MIN_FEASIBLE_SEARCH_CAP: usize = 10_000_000;

/// Smallest `B` at which `rule` is non-degenerate for this `α`.
pub fn min_feasible_budget(alpha: f64, rule: RuleName) -> Result<usize> {
    for b in 1..=MIN_FEASIBLE_SEARCH_CAP {
        if !IntervalIndexRule::compute(&BudgetSpec::new(b, alpha)?, rule).is_degenerate() {
            return Ok(b);
        }
    }
    Err(invalid(format!(
        "rule {rule} is degenerate for every B up to {MIN_FEASIBLE_SEARCH_CAP}"
    )))
}

/// The exact ranks of the named rule, refusing budgets at which the rule
/// collapses to an empty or full-support interval.
pub fn index_rule(spec: &BudgetSpec, rule: RuleName) -> Result<IntervalIndexRule> {
    let r = IntervalIndexRule::compute(spec, rule);
    if r.is_degenerate() {
        return Err(Error::BudgetTooSmall {
            rule: rule.to_string(),
            budget: spec.budget,
            min_budget: min_feasible_budget(spec.alpha, rule)?,
        });
    }
    Ok(r)
}

//! Finite-`B` coverage brackets for order-statistic intervals.
//!
//! Each function returns the ideal term `base` plus the itemized slack that
//! widens it. All outputs are clamped into `[0, 1]`; when clamping bites it
//! is recorded as a `clamp_lower` / `clamp_upper` slack term so vacuous bounds
//! can be told apart from informative ones.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact_dists::i_b;
use crate::orderstats::IntervalKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageBound {
    pub lower: f64,
    /// `f64::INFINITY` when no upper bound is available.
    pub upper: f64,
    pub base: f64,
    pub slack_terms: Vec<(String, f64)>,
}

impl CoverageBound {
    fn build(base: f64, lower: f64, upper: f64, mut slack_terms: Vec<(String, f64)>) -> Self {
        let clamped_lower = lower.clamp(0.0, 1.0);
        if clamped_lower != lower {
            slack_terms.push(("clamp_lower".into(), clamped_lower - lower));
        }
        let clamped_upper = if upper.is_infinite() {
            upper
        } else {
            upper.clamp(0.0, 1.0)
        };
        if clamped_upper != upper {
            slack_terms.push(("clamp_upper".into(), upper - clamped_upper));
        }
        Self {
            lower: clamped_lower,
            upper: clamped_upper,
            base,
            slack_terms,
        }
    }

    pub fn has_upper(&self) -> bool {
        self.upper.is_finite()
    }

    pub fn was_clamped(&self) -> bool {
        self.slack_terms.iter().any(|(k, _)| k.starts_with("clamp"))
    }

    /// `lower ≤ p ≤ upper` up to `tol`.
    pub fn brackets(&self, p: f64, tol: f64) -> bool {
        self.lower - tol <= p && p <= self.upper + tol
    }

    pub fn slack(&self, name: &str) -> Option<f64> {
        self.slack_terms
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| *v)
    }
}

fn check_indices(budget: usize, a: i64, b: i64) -> Result<()> {
    let bi = budget as i64;
    if a < 0 || b < 0 || a >= bi - b {
        return Err(Error::InvalidIndices(format!(
            "need 0 ≤ a < B − b ≤ B, got B = {budget}, a = {a}, b = {b}"
        )));
    }
    Ok(())
}

fn check_slack(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "{name} must be finite and ≥ 0, got {v}"
        )));
    }
    Ok(())
}

fn base_term(budget: usize, a: i64, b: i64) -> f64 {
    1.0 - (a + b + 1) as f64 / (budget as f64 + 1.0)
}

/// Coverage bracket for `W_(a) .. W_(B−b)` when the draws are conditionally
/// IID given the data. `delta` is `d̃_KS(F_0(Z), U)` with
/// `F_0(z) = P(W ≤ ψ | z)`; `delta_tilde` is the same with `P(W < ψ | z)`.
///
/// [`IntervalKind::OneSidedUpper`] is treated as closed with `W_(0)` the
/// support minimum.
pub fn thm1_bounds(
    budget: usize,
    a: i64,
    b: i64,
    delta: f64,
    delta_tilde: f64,
    kind: IntervalKind,
) -> Result<CoverageBound> {
    check_indices(budget, a, b)?;
    check_slack("delta", delta)?;
    check_slack("delta_tilde", delta_tilde)?;
    let base = base_term(budget, a, b);
    let step = 1.0 / (budget as f64 + 1.0);
    let (lo, hi, terms) = match kind {
        IntervalKind::Closed | IntervalKind::OneSidedUpper => (
            base - delta,
            base + step + delta,
            vec![("delta".into(), delta), ("atom_step".into(), step)],
        ),
        IntervalKind::LeftClosedRightOpen => {
            (base - delta, base + delta, vec![("delta".into(), delta)])
        }
        IntervalKind::LeftOpenRightClosed => (
            base - delta_tilde,
            base + delta_tilde,
            vec![("delta_tilde".into(), delta_tilde)],
        ),
    };
    Ok(CoverageBound::build(base, lo, hi, terms))
}

/// `ε + P(Δ* > ε) + η`: an upper bound on `d_KS(F_0(Z), U)` when the
/// bootstrap law is within `Δ*` of the sampling law and the latter has a
/// density bounded near `ψ`, up to `η`.
pub fn prop1_ks_bound(eps: f64, p_exceed: f64, eta: f64) -> Result<f64> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "eps must be positive, got {eps}"
        )));
    }
    if !(0.0..=1.0).contains(&p_exceed) {
        return Err(Error::InvalidInput(format!(
            "p_exceed must lie in [0, 1], got {p_exceed}"
        )));
    }
    check_slack("eta", eta)?;
    Ok((eps + p_exceed + eta).clamp(0.0, 1.0))
}

/// Markov-optimized form of [`prop1_ks_bound`] given `‖Δ*‖_p`:
/// `(p+1) (‖Δ*‖_p / p)^{p/(p+1)} + η`.
pub fn prop1_markov(p: f64, lp_norm: f64, eta: f64) -> Result<f64> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidInput(format!("p must be ≥ 1, got {p}")));
    }
    check_slack("lp_norm", lp_norm)?;
    check_slack("eta", eta)?;
    let main = (p + 1.0) * (lp_norm / p).powf(p / (p + 1.0));
    Ok((main + eta).clamp(0.0, 1.0))
}

/// Coverage bracket for `[W_(a), W_(B−b)]` when the draws are conditionally
/// independent but not identically distributed. `d_tilde` is
/// `d̃_KS(F̄(Z), U)` and `kappas[i] = sup_u |F(ψ(u)) − F_i(u)|`.
pub fn thm2_bounds(
    budget: usize,
    a: i64,
    b: i64,
    d_tilde: f64,
    kappas: &[f64],
) -> Result<CoverageBound> {
    check_indices(budget, a, b)?;
    check_slack("d_tilde", d_tilde)?;
    if kappas.len() != budget {
        return Err(Error::InvalidInput(format!(
            "expected {budget} kappas, got {}",
            kappas.len()
        )));
    }
    if kappas.iter().any(|k| !(0.0..=1.0).contains(k)) {
        return Err(Error::InvalidInput("kappas must lie in [0, 1]".into()));
    }
    let base = base_term(budget, a, b);
    let kappa_sq: f64 = kappas.iter().map(|k| k * k).sum();
    let ib = i_b(budget);
    let delta = d_tilde + kappa_sq * (ib + d_tilde);
    let step = 1.0 / (budget as f64 + 1.0);
    let terms = vec![
        ("d_tilde".into(), d_tilde),
        ("kappa_term".into(), kappa_sq * (ib + d_tilde)),
        ("atom_step".into(), step),
    ];
    Ok(CoverageBound::build(
        base,
        base - delta,
        base + delta + step,
        terms,
    ))
}

/// Lower bound `1 − 3(a+b+1)/(2B) − 6 d_KS(F̄(Z), U)` for `[W_(a), W_(B−b)]`
/// under arbitrary dependence among the conditional draws, clamped at 0.
/// The derivation assumes `a, b < B/2`.
pub fn thm3_lower(budget: usize, a: i64, b: i64, d_ks: f64) -> Result<f64> {
    check_indices(budget, a, b)?;
    check_slack("d_ks", d_ks)?;
    let bf = budget as f64;
    Ok((1.0 - 1.5 * (a + b + 1) as f64 / bf - 6.0 * d_ks).clamp(0.0, 1.0))
}

/// Coverage bracket for
/// `[W_(⌊(B+1)γ/2⌋−1), W_(⌈(B+1)(1−β/2)⌉)]` in terms of the exchangeability
/// gap `Γ`. The upper bound holds only for continuous `ψ(Z)`; pass
/// `continuous = false` to omit it.
pub fn thm4_bounds(
    budget: usize,
    gamma: f64,
    beta: f64,
    big_gamma: f64,
    continuous: bool,
) -> Result<CoverageBound> {
    if budget == 0 {
        return Err(Error::InvalidInput("B must be ≥ 1".into()));
    }
    for (name, v) in [("gamma", gamma), ("beta", beta)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::InvalidInput(format!(
                "{name} must lie in (0, 1), got {v}"
            )));
        }
    }
    check_slack("Gamma", big_gamma)?;
    let base = 1.0 - (gamma + beta) / 2.0;
    let mut terms = vec![("Gamma".into(), big_gamma)];
    let upper = if continuous {
        let step = 4.0 / (budget as f64 + 1.0);
        terms.push(("atom_step".into(), step));
        base + big_gamma + step
    } else {
        f64::INFINITY
    };
    Ok(CoverageBound::build(base, base - big_gamma, upper, terms))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn iid_bracket_examples() {
        let c = thm1_bounds(19, 1, 1, 0.0, 0.0, IntervalKind::Closed).unwrap();
        assert!(close(c.lower, 0.85) && close(c.upper, 0.90));
        let c = thm1_bounds(19, 1, 1, 0.0, 0.0, IntervalKind::LeftClosedRightOpen).unwrap();
        assert!(close(c.lower, 0.85) && close(c.upper, 0.85));
        let c = thm1_bounds(9, 0, 0, 0.02, 0.0, IntervalKind::Closed).unwrap();
        assert!(close(c.lower, 0.88) && close(c.upper, 1.0));
        assert!(c.was_clamped());
        assert!(matches!(
            thm1_bounds(5, 3, 2, 0.0, 0.0, IntervalKind::Closed),
            Err(Error::InvalidIndices(_))
        ));
    }

    #[test]
    fn closed_bracket_width_is_one_atom() {
        for budget in 2..40usize {
            for a in 0..budget as i64 / 2 {
                let c = thm1_bounds(budget, a, a, 0.0, 0.0, IntervalKind::Closed).unwrap();
                if !c.was_clamped() {
                    assert!(close(c.upper - c.lower, 1.0 / (budget as f64 + 1.0)));
                }
            }
        }
    }

    #[test]
    fn ks_perturbation_examples() {
        assert!(close(prop1_ks_bound(0.01, 0.02, 0.0).unwrap(), 0.03));
        assert_eq!(prop1_ks_bound(0.5, 1.0, 0.5).unwrap(), 1.0);
        assert_eq!(prop1_markov(1.0, 0.25, 0.0).unwrap(), 1.0);
        assert!(close(prop1_markov(1.0, 0.01, 0.0).unwrap(), 0.2));
        assert!(close(prop1_markov(2.0, 0.0, 0.03).unwrap(), 0.03));
        assert!(prop1_ks_bound(0.0, 0.1, 0.0).is_err());
        assert!(prop1_markov(0.5, 0.1, 0.0).is_err());
    }

    /// Minimizing ε + ‖Δ*‖_p^p / ε^p (Markov) over a fine ε grid reproduces
    /// the closed form.
    #[test]
    fn markov_form_matches_grid_search() {
        for (p, norm) in [(1.0, 0.001), (2.0, 0.0004), (3.0, 0.0001), (1.5, 0.002)] {
            let mut best = f64::INFINITY;
            for i in 1..200_000 {
                let eps = i as f64 * 1e-6;
                let markov = (norm / eps).powf(p);
                best = best.min(prop1_ks_bound(eps, markov.min(1.0), 0.0).unwrap());
            }
            let closed = prop1_markov(p, norm, 0.0).unwrap();
            assert!(
                best >= closed - 1e-9,
                "p={p}: grid {best} < closed {closed}"
            );
            assert!(
                best - closed < 1e-4,
                "p={p}: grid {best} vs closed {closed}"
            );
        }
    }

    #[test]
    fn independent_bracket_examples() {
        let t1 = thm1_bounds(12, 2, 3, 0.0, 0.0, IntervalKind::Closed).unwrap();
        let t2 = thm2_bounds(12, 2, 3, 0.0, &[0.0; 12]).unwrap();
        assert!(close(t1.lower, t2.lower) && close(t1.upper, t2.upper));

        let t = thm2_bounds(5, 0, 0, 0.01, &[0.1; 5]).unwrap();
        let delta = 0.01 + 0.05 * (i_b(5) + 0.01);
        assert!((delta - 0.0574).abs() < 5e-5);
        assert!(close(t.lower, 1.0 - 1.0 / 6.0 - delta));

        let t = thm2_bounds(30, 1, 1, 0.02, &[0.0; 30]).unwrap();
        assert!(close(t.base - t.lower, 0.02));
        assert!(thm2_bounds(5, 0, 0, 0.0, &[0.0; 4]).is_err());
    }

    #[test]
    fn ordering_lower_bound_examples() {
        assert!(close(thm3_lower(100, 2, 2, 0.0).unwrap(), 0.925));
        assert_eq!(thm3_lower(100, 2, 2, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn exchangeable_bracket_examples() {
        let t = thm4_bounds(99, 0.1, 0.1, 0.0, true).unwrap();
        assert!(close(t.lower, 0.9) && close(t.upper, 0.94));
        let t = thm4_bounds(99, 0.1, 0.1, 0.05, false).unwrap();
        assert!(close(t.lower, 0.85));
        assert!(!t.has_upper());
    }
}

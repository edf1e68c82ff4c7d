//! Seeded randomness: bootstrap and subsample index draws, multiplier-weight
//! SGD paths, sign flips, permutation draws and the four simulation settings.
//!
//! Every draw is a pure function of a [`SeedSpec`]. A replicate owns the
//! block of streams `rep · 2¹⁶ .. (rep + 1) · 2¹⁶`, so results do not depend
//! on which thread runs what.

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Exp1, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Streams reserved per replicate.
pub const STREAM_STRIDE: u64 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        Self {
            master_seed,
            stream_id,
        }
    }

    /// Data stream of replicate `rep`.
    pub fn replicate(master_seed: u64, rep: u64) -> Self {
        Self::new(master_seed, rep * STREAM_STRIDE)
    }

    /// The stream `offset` places further along.
    pub fn offset(self, offset: u64) -> Self {
        Self::new(self.master_seed, self.stream_id.wrapping_add(offset))
    }

    pub fn rng(self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// `m` IID uniform indices into `0..m`.
pub fn bootstrap_indices(m: usize, seed: SeedSpec) -> Result<Vec<usize>> {
    if m == 0 {
        return Err(invalid("bootstrap_indices: m must be ≥ 1"));
    }
    let mut rng = seed.rng();
    Ok((0..m).map(|_| rng.random_range(0..m)).collect())
}

/// A uniformly random `k`-subset of `0..m`, returned sorted.
pub fn subsample_indices(m: usize, k: usize, seed: SeedSpec) -> Result<Vec<usize>> {
    if k == 0 || k > m {
        return Err(invalid(format!(
            "subsample_indices: need 1 ≤ k ≤ m, got k = {k}, m = {m}"
        )));
    }
    let mut idx = index::sample(&mut seed.rng(), m, k).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

/// Law of the multiplier weights `W_{n,b}` in perturbed SGD.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightLaw {
    /// Every weight is 1: plain SGD.
    None,
    /// `Exp(1)`.
    #[default]
    Exponential,
    /// `Poisson(1)`.
    Poisson,
    /// Point mass at the given value.
    Constant(f64),
}

impl WeightLaw {
    fn draw(self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            WeightLaw::None => 1.0,
            WeightLaw::Exponential => Exp1.sample(rng),
            WeightLaw::Poisson => Poisson::new(1.0).expect("rate 1 is valid").sample(rng),
            WeightLaw::Constant(v) => v,
        }
    }
}

/// Averaged SGD with step `γ_n = γ_1 n^{−τ}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgdSpec {
    pub dim: usize,
    pub gamma1: f64,
    pub tau_exp: f64,
    /// Iterates `1..=burn_in` are excluded from the average.
    pub burn_in: usize,
    pub n_total: usize,
    pub weight_law: WeightLaw,
}

impl SgdSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(invalid("SgdSpec: dim must be ≥ 1"));
        }
        if !(self.gamma1 > 0.0 && self.gamma1.is_finite()) {
            return Err(invalid("SgdSpec: gamma1 must be positive"));
        }
        if !(self.tau_exp > 0.5 && self.tau_exp < 1.0) {
            return Err(invalid("SgdSpec: tau_exp must lie in (0.5, 1)"));
        }
        if self.burn_in >= self.n_total {
            return Err(invalid("SgdSpec: burn_in must be < n_total"));
        }
        if let WeightLaw::Constant(v) = self.weight_law {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid("SgdSpec: constant weight must be finite and ≥ 0"));
            }
        }
        Ok(())
    }
}

/// Runs `θ_n = θ_{n−1} − γ_n W_n ∇ℓ(θ_{n−1}, Z_n)` over the first `n_total`
/// points and returns the mean of `θ_{burn_in+1}, …, θ_{n_total}`.
///
/// `gradient(theta, point, out)` writes `∇ℓ` into `out`.
pub fn sgd_path<P, G>(
    spec: &SgdSpec,
    data: &[P],
    theta0: &[f64],
    gradient: G,
    seed: SeedSpec,
) -> Result<Vec<f64>>
where
    G: Fn(&[f64], &P, &mut [f64]),
{
    spec.validate()?;
    if theta0.len() != spec.dim {
        return Err(invalid("sgd_path: theta0 has the wrong dimension"));
    }
    if data.len() < spec.n_total {
        return Err(invalid(format!(
            "sgd_path: stream has {} points, need {}",
            data.len(),
            spec.n_total
        )));
    }
    let mut rng = seed.rng();
    let mut theta = theta0.to_vec();
    let mut grad = vec![0.0; spec.dim];
    let mut sum = vec![0.0; spec.dim];
    for (n, point) in data[..spec.n_total].iter().enumerate() {
        let step = n + 1;
        gradient(&theta, point, &mut grad);
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NumericalFailure {
                step,
                reason: "non-finite gradient".into(),
            });
        }
        let w = spec.weight_law.draw(&mut rng);
        let rate = spec.gamma1 * (step as f64).powf(-spec.tau_exp) * w;
        for (t, g) in theta.iter_mut().zip(&grad) {
            *t -= rate * g;
        }
        if step > spec.burn_in {
            for (s, t) in sum.iter_mut().zip(&theta) {
                *s += t;
            }
        }
    }
    let count = (spec.n_total - spec.burn_in) as f64;
    Ok(sum.into_iter().map(|s| s / count).collect())
}

/// Multiplies each coordinate by an independent uniform sign.
pub fn signflip_transform(x: &[f64], seed: SeedSpec) -> Vec<f64> {
    let mut rng = seed.rng();
    x.iter()
        .map(|&v| if rng.random::<bool>() { -v } else { v })
        .collect()
}

/// A finite group of permutations of `0..m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PermutationSet {
    FullSymmetric(usize),
    Explicit(Vec<Vec<usize>>),
}

impl PermutationSet {
    /// Validates an explicit list: non-empty, every entry a permutation of
    /// the same `0..m`.
    pub fn explicit(perms: Vec<Vec<usize>>) -> Result<Self> {
        let Some(first) = perms.first() else {
            return Err(invalid("PermutationSet: empty explicit list"));
        };
        let m = first.len();
        for p in &perms {
            let mut seen = vec![false; m];
            if p.len() != m
                || p.iter()
                    .any(|&i| i >= m || std::mem::replace(&mut seen[i], true))
            {
                return Err(invalid(
                    "PermutationSet: entries must be permutations of 0..m",
                ));
            }
        }
        Ok(Self::Explicit(perms))
    }

    pub fn degree(&self) -> usize {
        match self {
            PermutationSet::FullSymmetric(m) => *m,
            PermutationSet::Explicit(p) => p.first().map_or(0, Vec::len),
        }
    }

    /// `|G|`, or `None` when it overflows `u128`.
    pub fn size(&self) -> Option<u128> {
        match self {
            PermutationSet::FullSymmetric(m) => {
                (1..=*m as u128).try_fold(1u128, |acc, k| acc.checked_mul(k))
            }
            PermutationSet::Explicit(p) => Some(p.len() as u128),
        }
    }
}

/// A uniform element of `G`.
pub fn permutation_draw(group: &PermutationSet, seed: SeedSpec) -> Result<Vec<usize>> {
    let mut rng = seed.rng();
    match group {
        PermutationSet::FullSymmetric(m) => {
            let mut p: Vec<usize> = (0..*m).collect();
            p.shuffle(&mut rng);
            Ok(p)
        }
        PermutationSet::Explicit(perms) => {
            if perms.is_empty() {
                return Err(invalid("permutation_draw: empty explicit list"));
            }
            Ok(perms[rng.random_range(0..perms.len())].clone())
        }
    }
}

/// An element of a transformation group acting on `R^m`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    /// `(gx)_i = x_{p(i)}`.
    Permutation(Vec<usize>),
    /// `(gx)_i = −x_i` where the mask is set.
    SignFlip(Vec<bool>),
}

impl Transform {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Transform::Permutation(p) => p.iter().map(|&i| x[i]).collect(),
            Transform::SignFlip(mask) => x
                .iter()
                .zip(mask)
                .map(|(&v, &f)| if f { -v } else { v })
                .collect(),
        }
    }
}

/// A finite group of transformations to draw from uniformly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformGroup {
    Permutations(PermutationSet),
    /// All `2^m` sign patterns.
    SignFlips(usize),
    ExplicitSignFlips(Vec<Vec<bool>>),
}

impl TransformGroup {
    pub fn degree(&self) -> usize {
        match self {
            TransformGroup::Permutations(p) => p.degree(),
            TransformGroup::SignFlips(m) => *m,
            TransformGroup::ExplicitSignFlips(v) => v.first().map_or(0, Vec::len),
        }
    }

    /// `|G|`, or `None` when it overflows `u128`.
    pub fn size(&self) -> Option<u128> {
        match self {
            TransformGroup::Permutations(p) => p.size(),
            TransformGroup::SignFlips(m) => 1u128.checked_shl(*m as u32),
            TransformGroup::ExplicitSignFlips(v) => Some(v.len() as u128),
        }
    }

    pub fn identity(&self) -> Transform {
        match self {
            TransformGroup::Permutations(p) => Transform::Permutation((0..p.degree()).collect()),
            _ => Transform::SignFlip(vec![false; self.degree()]),
        }
    }

    /// A uniform element; sign masks use the same draw as
    /// [`signflip_transform`].
    pub fn draw(&self, seed: SeedSpec) -> Result<Transform> {
        match self {
            TransformGroup::Permutations(p) => {
                permutation_draw(p, seed).map(Transform::Permutation)
            }
            TransformGroup::SignFlips(m) => {
                let mut rng = seed.rng();
                Ok(Transform::SignFlip(
                    (0..*m).map(|_| rng.random::<bool>()).collect(),
                ))
            }
            TransformGroup::ExplicitSignFlips(v) => {
                if v.is_empty() {
                    return Err(invalid("TransformGroup: empty explicit list"));
                }
                Ok(Transform::SignFlip(
                    v[seed.rng().random_range(0..v.len())].clone(),
                ))
            }
        }
    }
}

/// A row-major sample of `m` points in `R^dim`, with responses for
/// regression settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub setting: u8,
    pub dim: usize,
    pub points: Vec<f64>,
    pub response: Option<Vec<f64>>,
    pub theta0: Vec<f64>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SettingParams {
    /// Sample size (settings 1–3).
    pub m: Option<usize>,
    /// Dimension (setting 2, default 100).
    pub d: Option<usize>,
    /// Stream length (setting 4).
    pub n_total: Option<usize>,
}

pub const SETTING2_DEFAULT_DIM: usize = 100;
pub const SETTING4_THETA: [f64; 3] = [0.2, -0.2, 0.0];

fn need(v: Option<usize>, name: &str, id: u8) -> Result<usize> {
    match v {
        Some(x) if x > 0 => Ok(x),
        _ => Err(invalid(format!("setting {id} needs a positive `{name}`"))),
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Student-t with `nu` degrees of freedom as `N / sqrt(χ²_ν / ν)`, the
/// chi-square built from squared normals.
fn student_t(rng: &mut ChaCha8Rng, nu: usize) -> f64 {
    let z = normal(rng);
    let chi2: f64 = (0..nu).map(|_| normal(rng).powi(2)).sum();
    z / (chi2 / nu as f64).sqrt()
}

/// Laplace(0, 1) as a signed `Exp(1)`.
fn laplace(rng: &mut ChaCha8Rng) -> f64 {
    let e: f64 = Exp1.sample(rng);
    if rng.random::<bool>() {
        e
    } else {
        -e
    }
}

/// Draws a dataset for simulation setting `id`:
///
/// 1. `m` draws of `Exp(rate 5)`, `θ₀ = 0.2`.
/// 2. `m` draws of `X·Y ∈ R^d` with `X ~ t₅`, `Y_j ~ χ²₁` IID, `θ₀ = 0`.
/// 3. `m` draws of `Uniform(0, 1)`, `θ₀ = 1`.
/// 4. `n_total` pairs `(X, Y)` with `X ~ N(0, I₃)`,
///    `Y = Xᵀθ + ε`, `ε ~ Laplace(0, 1)`, `θ = (0.2, −0.2, 0)`.
pub fn setting_sampler(id: u8, params: &SettingParams, seed: SeedSpec) -> Result<Dataset> {
    let mut rng = seed.rng();
    match id {
        1 => {
            let m = need(params.m, "m", id)?;
            let exp = Exp::new(5.0).expect("rate 5 is valid");
            Ok(Dataset {
                setting: id,
                dim: 1,
                points: (0..m).map(|_| exp.sample(&mut rng)).collect(),
                response: None,
                theta0: vec![0.2],
            })
        }
        2 => {
            let m = need(params.m, "m", id)?;
            let d = params.d.unwrap_or(SETTING2_DEFAULT_DIM);
            if d == 0 {
                return Err(invalid("setting 2 needs d ≥ 1"));
            }
            let mut points = Vec::with_capacity(m * d);
            for _ in 0..m {
                let x = student_t(&mut rng, 5);
                points.extend((0..d).map(|_| x * normal(&mut rng).powi(2)));
            }
            Ok(Dataset {
                setting: id,
                dim: d,
                points,
                response: None,
                theta0: vec![0.0; d],
            })
        }
        3 => {
            let m = need(params.m, "m", id)?;
            Ok(Dataset {
                setting: id,
                dim: 1,
                points: (0..m).map(|_| rng.random::<f64>()).collect(),
                response: None,
                theta0: vec![1.0],
            })
        }
        4 => {
            let n = need(params.n_total, "n_total", id)?;
            let mut points = Vec::with_capacity(3 * n);
            let mut response = Vec::with_capacity(n);
            for _ in 0..n {
                let x = [normal(&mut rng), normal(&mut rng), normal(&mut rng)];
                let fit: f64 = x.iter().zip(SETTING4_THETA).map(|(a, b)| a * b).sum();
                response.push(fit + laplace(&mut rng));
                points.extend(x);
            }
            Ok(Dataset {
                setting: id,
                dim: 3,
                points,
                response: Some(response),
                theta0: SETTING4_THETA.to_vec(),
            })
        }
        _ => Err(invalid(format!("unknown setting id {id}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seed(s: u64) -> SeedSpec {
        SeedSpec::new(s, 0)
    }

    /// Wilson–Hilferty upper quantile of χ²_k at level 1e-3.
    fn chi2_critical_001(k: usize) -> f64 {
        let k = k as f64;
        let z = 3.090_232; // Φ⁻¹(0.999)
        let c = 2.0 / (9.0 * k);
        k * (1.0 - c + z * c.sqrt()).powi(3)
    }

    fn chi2_stat(counts: &[usize], expected: &[f64]) -> f64 {
        counts
            .iter()
            .zip(expected)
            .map(|(&o, &e)| (o as f64 - e).powi(2) / e)
            .sum()
    }

    #[test]
    fn determinism_and_streams() {
        let a = bootstrap_indices(50, SeedSpec::new(7, 3)).unwrap();
        assert_eq!(a, bootstrap_indices(50, SeedSpec::new(7, 3)).unwrap());
        assert_ne!(a, bootstrap_indices(50, SeedSpec::new(7, 4)).unwrap());
        assert_ne!(a, bootstrap_indices(50, SeedSpec::new(8, 3)).unwrap());
        assert_eq!(
            SeedSpec::replicate(1, 2).offset(5).stream_id,
            2 * STREAM_STRIDE + 5
        );
    }

    #[test]
    fn bootstrap_small_cases() {
        assert_eq!(bootstrap_indices(1, seed(1)).unwrap(), vec![0]);
        assert!(bootstrap_indices(0, seed(1)).is_err());
    }

    #[test]
    fn bootstrap_uniform_gof() {
        let m = 10_000;
        let draws = bootstrap_indices(m, seed(11)).unwrap();
        // pool indices into 50 cells of 200 to get usable expected counts
        let mut counts = vec![0usize; 50];
        for i in draws {
            counts[i / 200] += 1;
        }
        let stat = chi2_stat(&counts, &[200.0; 50]);
        assert!(stat < chi2_critical_001(49), "chi2 = {stat}");
    }

    /// Bootstrap index multisets for m = 3 against the multinomial law of
    /// the count vector, enumerated.
    #[test]
    fn bootstrap_multiset_law() {
        let m = 3;
        let n = 27_000;
        let mut counts = std::collections::HashMap::new();
        for s in 0..n {
            let mut c = [0u8; 3];
            for i in bootstrap_indices(m, SeedSpec::new(5, s)).unwrap() {
                c[i] += 1;
            }
            *counts.entry(c).or_insert(0usize) += 1;
        }
        let mut observed = Vec::new();
        let mut expected = Vec::new();
        for a in 0..=3u8 {
            for b in 0..=3 - a {
                let c = [a, b, 3 - a - b];
                let fact = |k: u8| (1..=k as usize).product::<usize>() as f64;
                let p = 6.0 / (fact(c[0]) * fact(c[1]) * fact(c[2])) / 27.0;
                observed.push(*counts.get(&c).unwrap_or(&0));
                expected.push(p * n as f64);
            }
        }
        let stat = chi2_stat(&observed, &expected);
        assert!(
            stat < chi2_critical_001(observed.len() - 1),
            "chi2 = {stat}"
        );
    }

    #[test]
    fn subsample_cases() {
        assert_eq!(
            subsample_indices(6, 6, seed(2)).unwrap(),
            (0..6).collect::<Vec<_>>()
        );
        let one = subsample_indices(9, 1, seed(2)).unwrap();
        assert_eq!(one.len(), 1);
        assert!(one[0] < 9);
        assert!(subsample_indices(3, 4, seed(2)).is_err());
    }

    #[test]
    fn subsample_uniform_over_subsets() {
        let n = 100_000;
        let mut counts = std::collections::HashMap::new();
        for s in 0..n {
            let idx = subsample_indices(5, 2, SeedSpec::new(9, s)).unwrap();
            *counts.entry((idx[0], idx[1])).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 10);
        for (&k, &c) in &counts {
            let f = c as f64 / n as f64;
            assert!((f - 0.1).abs() < 0.01, "{k:?}: {f}");
        }
    }

    fn quadratic_spec(law: WeightLaw) -> SgdSpec {
        SgdSpec {
            dim: 2,
            gamma1: 0.5,
            tau_exp: 0.6,
            burn_in: 1000,
            n_total: 20_000,
            weight_law: law,
        }
    }

    #[test]
    fn sgd_fixed_point_and_contraction() {
        let data = vec![(); 20_000];
        let spec = quadratic_spec(WeightLaw::Exponential);
        let theta = sgd_path(&spec, &data, &[3.0, -1.0], |_, _, g| g.fill(0.0), seed(1)).unwrap();
        assert_eq!(theta, vec![3.0, -1.0]);

        let c = [1.5, -0.7];
        let grad = |t: &[f64], _: &(), g: &mut [f64]| {
            for i in 0..2 {
                g[i] = t[i] - c[i];
            }
        };
        let theta = sgd_path(&spec, &data, &[0.0, 0.0], grad, seed(1)).unwrap();
        let err = ((theta[0] - c[0]).powi(2) + (theta[1] - c[1]).powi(2)).sqrt();
        assert!(err <= 0.05, "{theta:?}");
    }

    #[test]
    fn sgd_none_equals_constant_one() {
        let data: Vec<f64> = (0..5000).map(|i| (i as f64 * 0.37).sin()).collect();
        let grad = |t: &[f64], z: &f64, g: &mut [f64]| {
            g[0] = t[0] - z;
            g[1] = (t[1] - z).signum();
        };
        let mut spec = quadratic_spec(WeightLaw::None);
        spec.n_total = 5000;
        let a = sgd_path(&spec, &data, &[0.0, 0.0], grad, seed(4)).unwrap();
        spec.weight_law = WeightLaw::Constant(1.0);
        let b = sgd_path(&spec, &data, &[0.0, 0.0], grad, seed(4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sgd_reports_non_finite_gradient() {
        let data = vec![(); 10];
        let mut spec = quadratic_spec(WeightLaw::None);
        spec.burn_in = 0;
        spec.n_total = 10;
        let err = sgd_path(
            &spec,
            &data,
            &[0.0, 0.0],
            |_, _, g| {
                g[0] = f64::NAN;
                g[1] = 0.0;
            },
            seed(1),
        )
        .unwrap_err();
        assert_eq!(
            err,
            Error::NumericalFailure {
                step: 1,
                reason: "non-finite gradient".into()
            }
        );
        spec.tau_exp = 1.0;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn exponential_weights_have_unit_moments() {
        let mut rng = seed(3).rng();
        let n = 100_000;
        let w: Vec<f64> = (0..n)
            .map(|_| WeightLaw::Exponential.draw(&mut rng))
            .collect();
        let mean = w.iter().sum::<f64>() / n as f64;
        let var = w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(
            (mean - 1.0).abs() < 0.02 && (var - 1.0).abs() < 0.02,
            "{mean} {var}"
        );
    }

    #[test]
    fn signflip_properties() {
        assert_eq!(signflip_transform(&[0.0; 4], seed(1)), vec![0.0; 4]);
        let x = [1.5, -2.0, 3.0];
        let twice = signflip_transform(&signflip_transform(&x, seed(6)), seed(6));
        assert_eq!(twice, x.to_vec());
        let mut patterns = std::collections::HashSet::new();
        for s in 0..64 {
            let y = signflip_transform(&[1.0, 1.0], SeedSpec::new(s, 0));
            patterns.insert((y[0] > 0.0, y[1] > 0.0));
        }
        assert_eq!(patterns.len(), 4);
    }

    #[test]
    fn permutation_draws() {
        let single = PermutationSet::explicit(vec![vec![2, 0, 1]]).unwrap();
        assert_eq!(permutation_draw(&single, seed(1)).unwrap(), vec![2, 0, 1]);
        assert!(PermutationSet::explicit(vec![]).is_err());
        assert!(PermutationSet::explicit(vec![vec![0, 0]]).is_err());
        assert!(permutation_draw(&PermutationSet::Explicit(vec![]), seed(1)).is_err());
        assert_eq!(PermutationSet::FullSymmetric(5).size(), Some(120));
        assert_eq!(PermutationSet::FullSymmetric(40).size(), None);

        let n = 60_000;
        let mut counts = std::collections::HashMap::new();
        for s in 0..n {
            let p =
                permutation_draw(&PermutationSet::FullSymmetric(3), SeedSpec::new(s, 1)).unwrap();
            *counts.entry(p).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 6);
        assert!(counts.contains_key(&vec![0, 1, 2]));
        for c in counts.values() {
            assert!((*c as f64 / n as f64 - 1.0 / 6.0).abs() < 0.01);
        }
    }

    #[test]
    fn transform_groups() {
        let g = TransformGroup::SignFlips(3);
        assert_eq!(g.size(), Some(8));
        let t = g.draw(seed(6)).unwrap();
        assert_eq!(
            t.apply(&[1.5, -2.0, 3.0]),
            signflip_transform(&[1.5, -2.0, 3.0], seed(6))
        );
        assert_eq!(g.identity().apply(&[1.0, 2.0, 3.0]), vec![1.0, 2.0, 3.0]);
        let p = TransformGroup::Permutations(PermutationSet::FullSymmetric(3));
        assert_eq!(
            Transform::Permutation(vec![2, 0, 1]).apply(&[1.0, 2.0, 3.0]),
            vec![3.0, 1.0, 2.0]
        );
        assert_eq!(p.identity(), Transform::Permutation(vec![0, 1, 2]));
        assert!(TransformGroup::ExplicitSignFlips(vec![])
            .draw(seed(1))
            .is_err());
    }

    #[test]
    fn setting_moments() {
        let p = SettingParams {
            m: Some(1_000_000),
            ..Default::default()
        };
        let d = setting_sampler(1, &p, seed(1)).unwrap();
        let mean = d.points.iter().sum::<f64>() / d.len() as f64;
        assert!((mean - 0.2).abs() < 0.002, "{mean}");

        let p = SettingParams {
            m: Some(10_000),
            ..Default::default()
        };
        let d = setting_sampler(3, &p, seed(1)).unwrap();
        let max = d.points.iter().cloned().fold(f64::MIN, f64::max);
        assert!(max > 1.0 - 1e-3 && max < 1.0);

        let p = SettingParams {
            n_total: Some(1_000_000),
            ..Default::default()
        };
        let d = setting_sampler(4, &p, seed(1)).unwrap();
        let y = d.response.as_ref().unwrap();
        let resid: Vec<f64> = (0..d.len())
            .map(|i| {
                y[i] - d
                    .row(i)
                    .iter()
                    .zip(SETTING4_THETA)
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
            })
            .collect();
        let mean = resid.iter().sum::<f64>() / resid.len() as f64;
        let var = resid.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / resid.len() as f64;
        assert!((var - 2.0).abs() < 0.05, "{var}");
        let median_share = resid.iter().filter(|r| **r < 0.0).count() as f64 / resid.len() as f64;
        assert!((median_share - 0.5).abs() < 0.005);
    }

    #[test]
    fn setting2_shape_and_moments() {
        let p = SettingParams {
            m: Some(20_000),
            d: Some(4),
            n_total: None,
        };
        let d = setting_sampler(2, &p, seed(2)).unwrap();
        assert_eq!(
            (d.len(), d.dim, d.theta0.clone()),
            (20_000, 4, vec![0.0; 4])
        );
        // E[XY_j] = 0 and Var = Var(t5)·E[Y²] = (5/3)·3 = 5
        let col: Vec<f64> = (0..d.len()).map(|i| d.row(i)[1]).collect();
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        assert!(mean.abs() < 0.1, "{mean}");
        let neg = col.iter().filter(|x| **x < 0.0).count() as f64 / col.len() as f64;
        assert!((neg - 0.5).abs() < 0.02);
        assert!(setting_sampler(2, &SettingParams::default(), seed(2)).is_err());
        assert!(setting_sampler(9, &p, seed(2)).is_err());
    }
}

//! Sensitivity estimation under token replacement and Gaussian corruption,
//! plus exact sensitivity of rule-based reference predictors.
//!
//! Normalized sensitivity of a scoring model `Φ` over a dataset is the
//! mean, over examples and positions `τ`, of the probability that
//! resampling position `τ` flips `sign(Φ)` (with `sign(0) = +1`).
//! Replacement tokens are uniform over the vocabulary; the Gaussian mode
//! adds `N(0, σ²·I)` to the original token vector instead.

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{CoreError, Result};
use crate::scalar::{sign_pm, Scalar};
use crate::synth::{build_vocab, generate_dataset, Dataset, DatasetKind, Role, SyntheticParams,
    TokenClass, Vocabulary};

/// Anything that scores an input matrix. Implemented by the attention
/// parameters and by plain closures.
pub trait ScoreModel<T>: Sync {
    fn score(&self, x: &Array2<T>) -> Result<T>;
}

impl<T, F> ScoreModel<T> for F
where
    F: Fn(&Array2<T>) -> Result<T> + Sync,
{
    fn score(&self, x: &Array2<T>) -> Result<T> {
        self(x)
    }
}

/// Corruption distribution for one position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CorruptionKind {
    /// Replace the token with one drawn uniformly from the vocabulary.
    TokenUniform,
    /// Add isotropic Gaussian noise to the token vector.
    GaussianNoise { sigma2: f64 },
}

/// How corruption is sampled: kind, draws per position, and the seed of
/// the per-task RNG streams.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorruptionSpec {
    pub kind: CorruptionKind,
    /// Draws per position. Token replacement uses distinct draws and
    /// becomes exhaustive (exact) once `repeats ≥ M`.
    pub repeats: usize,
    pub seed: u64,
}

impl CorruptionSpec {
    /// Token replacement with the default near-exhaustive draw budget.
    pub fn token_uniform(seed: u64) -> Self {
        Self {
            kind: CorruptionKind::TokenUniform,
            repeats: 32,
            seed,
        }
    }

    /// Gaussian corruption with the default of 5 draws per position.
    pub fn gaussian(sigma2: f64, seed: u64) -> Self {
        Self {
            kind: CorruptionKind::GaussianNoise { sigma2 },
            repeats: 5,
            seed,
        }
    }

    pub fn with_repeats(mut self, repeats: usize) -> Self {
        self.repeats = repeats;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(CoreError::Config("repeats must be at least 1".into()));
        }
        if let CorruptionKind::GaussianNoise { sigma2 } = self.kind {
            if !(sigma2 > 0.0) {
                return Err(CoreError::Config(format!(
                    "gaussian variance must be positive, got {sigma2}"
                )));
            }
        }
        Ok(())
    }
}

/// Measured sensitivity with per-position breakdown.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityReport<T> {
    /// Normalized sensitivity: the mean of `per_position`.
    pub normalized: T,
    /// Binomial standard error of `normalized`.
    pub normalized_stderr: T,
    /// Flip rate per raw position index.
    pub per_position: Vec<T>,
    /// Binomial standard error per position.
    pub per_position_stderr: Vec<T>,
    /// Flip rate per role-sorted position rank (sparse first, then
    /// frequent-same, frequent-opposite, irrelevant), when roles are
    /// available. The raw index profile of a position-free model is flat
    /// by exchangeability; this view is the informative one.
    pub role_profile: Option<Vec<(Role, T)>>,
    /// Corruption draws per (example, position) pair.
    pub samples_per_position: usize,
    /// Echo of the measurement spec.
    pub spec: CorruptionSpec,
}

impl<T: Scalar> SensitivityReport<T> {
    /// Per-position profile: role-sorted when roles were available,
    /// otherwise by raw index.
    pub fn per_position_profile(&self) -> Vec<(usize, T)> {
        match &self.role_profile {
            Some(rp) => rp.iter().enumerate().map(|(i, (_, s))| (i, *s)).collect(),
            None => self.per_position.iter().copied().enumerate().collect(),
        }
    }
}

fn task_rng(seed: u64, example: usize, position: usize, repeat: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((example as u64) << 32) | ((position as u64) << 16) | repeat as u64);
    rng
}

/// Distinct token draws for one position: all `M` ids when `repeats ≥ M`
/// (exact expectation), otherwise `repeats` ids sampled without
/// replacement.
fn token_draws(m_vocab: usize, repeats: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if repeats >= m_vocab {
        return (1..=m_vocab).collect();
    }
    let mut ids: Vec<usize> = (1..=m_vocab).collect();
    for i in 0..repeats {
        let j = rng.gen_range(i..m_vocab);
        ids.swap(i, j);
    }
    ids.truncate(repeats);
    ids
}

/// Estimates Monte Carlo sensitivity of `model` over `data`.
///
/// Embarrassingly parallel over examples with RNG streams keyed by
/// (seed, example, position, repeat), so the result is independent of
/// scheduling.
pub fn measure_sensitivity<T: Scalar, M: ScoreModel<T>>(
    model: &M,
    data: &Dataset<T>,
    spec: &CorruptionSpec,
) -> Result<SensitivityReport<T>> {
    spec.validate()?;
    if data.examples.is_empty() {
        return Err(CoreError::Config("dataset is empty".into()));
    }
    let p = data.params;
    let t_len = p.seq_len;
    let draws_per_position = match spec.kind {
        CorruptionKind::TokenUniform => spec.repeats.min(p.vocab_size),
        CorruptionKind::GaussianNoise { .. } => spec.repeats,
    };

    let per_example: Vec<Vec<u32>> = data
        .examples
        .par_iter()
        .enumerate()
        .map(|(e, ex)| -> Result<Vec<u32>> {
            let mut x = ex.to_matrix(p.d_tok);
            let base = sign_pm(model.score(&x)?);
            let mut flips = vec![0u32; t_len];
            for tau in 0..t_len {
                let original: Vec<T> = x.row(tau).to_vec();
                match spec.kind {
                    CorruptionKind::TokenUniform => {
                        let mut rng = task_rng(spec.seed, e, tau, 0);
                        for id in token_draws(p.vocab_size, draws_per_position, &mut rng) {
                            for (j, v) in x.row_mut(tau).iter_mut().enumerate() {
                                *v = if j == id - 1 { T::one() } else { T::zero() };
                            }
                            if sign_pm(model.score(&x)?) != base {
                                flips[tau] += 1;
                            }
                        }
                    }
                    CorruptionKind::GaussianNoise { sigma2 } => {
                        let sd = T::from_f64_lossy(sigma2.sqrt());
                        for r in 0..draws_per_position {
                            let mut rng = task_rng(spec.seed, e, tau, r + 1);
                            for (v, &orig) in x.row_mut(tau).iter_mut().zip(&original) {
                                let z: f64 = StandardNormal.sample(&mut rng);
                                *v = orig + sd * T::from_f64_lossy(z);
                            }
                            if sign_pm(model.score(&x)?) != base {
                                flips[tau] += 1;
                            }
                        }
                    }
                }
                for (v, &orig) in x.row_mut(tau).iter_mut().zip(&original) {
                    *v = orig;
                }
            }
            Ok(flips)
        })
        .collect::<Result<Vec<_>>>()?;

    let n_examples = data.examples.len();
    let samples = n_examples * draws_per_position;
    let samples_t = T::from_usize(samples).unwrap();

    let mut per_position = vec![T::zero(); t_len];
    let mut per_position_stderr = vec![T::zero(); t_len];
    let mut role_acc = vec![T::zero(); t_len];
    let mut have_roles = true;

    for (e, flips) in per_example.iter().enumerate() {
        let ex = &data.examples[e];
        if ex.roles.len() != t_len {
            have_roles = false;
        }
        // Stable role-sorted ranks: order positions by (role, index).
        let mut order: Vec<usize> = (0..t_len).collect();
        if have_roles {
            order.sort_by_key(|&tau| (ex.roles[tau], tau));
        }
        for tau in 0..t_len {
            let f = T::from_u32(flips[tau]).unwrap();
            per_position[tau] = per_position[tau] + f;
            if have_roles {
                role_acc[tau] = role_acc[tau] + T::from_u32(flips[order[tau]]).unwrap();
            }
        }
    }

    for tau in 0..t_len {
        let p_hat = per_position[tau] / samples_t;
        per_position[tau] = p_hat;
        per_position_stderr[tau] = (p_hat * (T::one() - p_hat) / samples_t).sqrt();
        role_acc[tau] = role_acc[tau] / samples_t;
    }

    let t_t = T::from_usize(t_len).unwrap();
    let normalized = per_position.iter().copied().sum::<T>() / t_t;
    // Flips correlate within an example; the summary stderr therefore
    // comes from the example-level means, not the pooled Bernoulli count.
    let draws_t = T::from_usize(draws_per_position * t_len).unwrap();
    let example_rates: Vec<T> = per_example
        .iter()
        .map(|flips| {
            flips
                .iter()
                .map(|&f| T::from_u32(f).unwrap())
                .sum::<T>()
                / draws_t
        })
        .collect();
    let n_t = T::from_usize(n_examples).unwrap();
    let var = example_rates
        .iter()
        .map(|&r| (r - normalized) * (r - normalized))
        .sum::<T>()
        / if n_examples > 1 {
            n_t - T::one()
        } else {
            T::one()
        };
    let normalized_stderr = (var / n_t).sqrt();

    let role_profile = if have_roles {
        let roles = &data.examples[0].roles;
        let mut sorted: Vec<Role> = roles.clone();
        sorted.sort();
        Some(sorted.into_iter().zip(role_acc).collect())
    } else {
        None
    };

    Ok(SensitivityReport {
        normalized,
        normalized_stderr,
        per_position,
        per_position_stderr,
        role_profile,
        samples_per_position: samples,
        spec: *spec,
    })
}

/// Rule predictor family used as a sensitivity reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleKind {
    /// `sign(count(e_1) − count(e_2))`.
    SparseRule,
    /// `sign(count over V_frequent^+ − count over V_frequent^−)`.
    FrequentMajority,
}

/// A deterministic reference predictor over token sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RulePredictor {
    pub kind: RuleKind,
    /// Prediction when the counts tie; `+1` unless configured otherwise.
    pub tie_sign: i8,
}

impl RulePredictor {
    pub fn sparse() -> Self {
        Self {
            kind: RuleKind::SparseRule,
            tie_sign: 1,
        }
    }

    pub fn frequent() -> Self {
        Self {
            kind: RuleKind::FrequentMajority,
            tie_sign: 1,
        }
    }

    fn decide(&self, diff: i64) -> i8 {
        match diff.cmp(&0) {
            std::cmp::Ordering::Greater => 1,
            std::cmp::Ordering::Less => -1,
            std::cmp::Ordering::Equal => self.tie_sign,
        }
    }

    /// Prediction from class counts.
    fn predict_counts(&self, c: &ClassCounts) -> i8 {
        match self.kind {
            RuleKind::SparseRule => self.decide(c.e1 as i64 - c.e2 as i64),
            RuleKind::FrequentMajority => self.decide(c.f_plus as i64 - c.f_minus as i64),
        }
    }

    /// Prediction from raw token ids.
    pub fn predict_ids(&self, ids: &[usize], vocab: &Vocabulary) -> i8 {
        self.predict_counts(&ClassCounts::from_ids(ids, vocab))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct ClassCounts {
    e1: u32,
    e2: u32,
    f_plus: u32,
    f_minus: u32,
}

impl ClassCounts {
    fn from_ids(ids: &[usize], vocab: &Vocabulary) -> Self {
        let mut c = Self::default();
        for &id in ids {
            c.bump(vocab.class_of(id), 1);
        }
        c
    }

    fn bump(&mut self, class: TokenClass, delta: i32) {
        let slot = match class {
            TokenClass::SparsePlus => &mut self.e1,
            TokenClass::SparseMinus => &mut self.e2,
            TokenClass::FrequentPlus => &mut self.f_plus,
            TokenClass::FrequentMinus => &mut self.f_minus,
            TokenClass::Irrelevant => return,
        };
        *slot = slot.checked_add_signed(delta).expect("count underflow");
    }
}

/// Exact normalized sensitivity of a rule predictor under uniform token
/// replacement, by enumerating every (label, position role, replacement
/// token) outcome. The class counts of a generated sequence are
/// deterministic given the label, so the enumeration is exact.
pub fn rule_sensitivity_exact(rule: &RulePredictor, p: &SyntheticParams) -> Result<f64> {
    let vocab = build_vocab(*p)?;
    if p.seq_len.saturating_mul(p.vocab_size) > 100_000_000 {
        return Err(CoreError::Capacity(format!(
            "enumeration over T·M = {}·{} is too large",
            p.seq_len, p.vocab_size
        )));
    }
    let t = p.seq_len as f64;
    let m = p.vocab_size as f64;
    let mut total = 0.0;

    for &label in &[1i8, -1] {
        let mut base = ClassCounts::default();
        base.bump(class_for_sparse(label), p.n_sparse as i32);
        base.bump(class_for_frequent(label), p.n_freq_same() as i32);
        base.bump(class_for_frequent(-label), p.n_freq_opposite() as i32);
        let base_pred = rule.predict_counts(&base);

        let roles = [
            (class_for_sparse(label), p.n_sparse, true),
            (class_for_frequent(label), p.n_freq_same(), true),
            (class_for_frequent(-label), p.n_freq_opposite(), true),
            (TokenClass::Irrelevant, p.n_irrelevant(), false),
        ];
        for &(removed_class, role_count, counted) in &roles {
            if role_count == 0 {
                continue;
            }
            let mut removed = base;
            if counted {
                removed.bump(removed_class, -1);
            }
            let mut flips = 0usize;
            for id in 1..=p.vocab_size {
                let mut counts = removed;
                counts.bump(vocab.class_of(id), 1);
                if rule.predict_counts(&counts) != base_pred {
                    flips += 1;
                }
            }
            total += 0.5 * (role_count as f64 / t) * (flips as f64 / m);
        }
    }
    Ok(total)
}

fn class_for_sparse(label: i8) -> TokenClass {
    if label > 0 {
        TokenClass::SparsePlus
    } else {
        TokenClass::SparseMinus
    }
}

fn class_for_frequent(label: i8) -> TokenClass {
    if label > 0 {
        TokenClass::FrequentPlus
    } else {
        TokenClass::FrequentMinus
    }
}

/// Monte Carlo estimate of the same quantity, by sampling sequences and
/// replacements and evaluating the rule on raw token ids. Returns
/// `(estimate, standard error)`.
pub fn rule_sensitivity_mc(
    rule: &RulePredictor,
    p: &SyntheticParams,
    n_examples: usize,
    spec: &CorruptionSpec,
) -> Result<(f64, f64)> {
    spec.validate()?;
    if !matches!(spec.kind, CorruptionKind::TokenUniform) {
        return Err(CoreError::Config(
            "rule sensitivity is defined for token replacement".into(),
        ));
    }
    let vocab = build_vocab(*p)?;
    let data: Dataset<f64> = generate_dataset(*p, n_examples, DatasetKind::Train, spec.seed)?;
    let draws = spec.repeats.min(p.vocab_size);

    // Per-example flip rates; flips are strongly correlated within an
    // example, so the standard error comes from the example-level means.
    let mut rates = Vec::with_capacity(n_examples);
    for (e, ex) in data.examples.iter().enumerate() {
        let crate::synth::ExampleInput::Tokens(ids) = &ex.input else {
            return Err(CoreError::Config("expected token inputs".into()));
        };
        let base = rule.predict_ids(ids, &vocab);
        let mut modified = ids.clone();
        let mut flips = 0u64;
        for tau in 0..p.seq_len {
            let keep = modified[tau];
            let mut rng = task_rng(spec.seed, e, tau, 0);
            for id in token_draws(p.vocab_size, draws, &mut rng) {
                modified[tau] = id;
                if rule.predict_ids(&modified, &vocab) != base {
                    flips += 1;
                }
                modified[tau] = keep;
            }
        }
        // Averaging over (position, draw) already carries the 1/T
        // normalization.
        rates.push(flips as f64 / (p.seq_len * draws) as f64);
    }
    let n = rates.len() as f64;
    let est = rates.iter().sum::<f64>() / n;
    let var = rates.iter().map(|r| (r - est) * (r - est)).sum::<f64>() / (n - 1.0).max(1.0);
    let se = (var / n).sqrt();
    Ok((est, se))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::generate_dataset;

    fn small_params() -> SyntheticParams {
        SyntheticParams::new(10, 12, 4, 2, 3, 1, 12).unwrap()
    }

    #[test]
    fn constant_model_has_zero_sensitivity() {
        let p = small_params();
        let data: Dataset<f64> = generate_dataset(p, 20, DatasetKind::Train, 1).unwrap();
        let model = |_x: &Array2<f64>| -> crate::error::Result<f64> { Ok(1.0) };
        let spec = CorruptionSpec::token_uniform(7);
        let report = measure_sensitivity(&model, &data, &spec).unwrap();
        assert_eq!(report.normalized, 0.0);
        assert!(report.per_position.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn decisive_position_dominates() {
        // Model reads only position 0: +1 iff the token there is e_1.
        let p = small_params();
        let mut data: Dataset<f64> = generate_dataset(p, 16, DatasetKind::Train, 3).unwrap();
        // Plant e_1 at position 0 of every example so the base prediction
        // is +1 throughout.
        for ex in &mut data.examples {
            if let crate::synth::ExampleInput::Tokens(ids) = &mut ex.input {
                ids[0] = 1;
            }
        }
        let model = |x: &Array2<f64>| -> crate::error::Result<f64> {
            Ok(if x[(0, 0)] == 1.0 { 1.0 } else { -1.0 })
        };
        // Exhaustive draws: repeats ≥ M.
        let spec = CorruptionSpec::token_uniform(5).with_repeats(100);
        let report = measure_sensitivity(&model, &data, &spec).unwrap();
        let m = p.vocab_size as f64;
        assert!((report.per_position[0] - (m - 1.0) / m).abs() < 1e-12);
        for tau in 1..p.seq_len {
            assert_eq!(report.per_position[tau], 0.0);
        }
    }

    #[test]
    fn normalized_is_mean_of_positions() {
        let p = small_params();
        let data: Dataset<f64> = generate_dataset(p, 10, DatasetKind::Train, 4).unwrap();
        let model = |x: &Array2<f64>| -> crate::error::Result<f64> { Ok(x.sum() - 5.0) };
        let spec = CorruptionSpec::token_uniform(9).with_repeats(6);
        let report = measure_sensitivity(&model, &data, &spec).unwrap();
        let mean: f64 = report.per_position.iter().sum::<f64>() / p.seq_len as f64;
        assert!((report.normalized - mean).abs() < 1e-12);
        assert!(report.per_position.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn measurement_deterministic() {
        let p = small_params();
        let data: Dataset<f64> = generate_dataset(p, 12, DatasetKind::Train, 5).unwrap();
        let model = |x: &Array2<f64>| -> crate::error::Result<f64> {
            Ok(x.row(0).sum() - x.row(1).sum())
        };
        let spec = CorruptionSpec::gaussian(0.5, 11).with_repeats(3);
        let a = measure_sensitivity(&model, &data, &spec).unwrap();
        let b = measure_sensitivity(&model, &data, &spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn spec_validation() {
        let p = small_params();
        let data: Dataset<f64> = generate_dataset(p, 4, DatasetKind::Train, 5).unwrap();
        let model = |_x: &Array2<f64>| -> crate::error::Result<f64> { Ok(1.0) };
        let bad = CorruptionSpec::gaussian(0.0, 1);
        assert!(measure_sensitivity(&model, &data, &bad).is_err());
        let bad = CorruptionSpec::token_uniform(1).with_repeats(0);
        assert!(measure_sensitivity(&model, &data, &bad).is_err());
    }

    #[test]
    fn sparse_rule_zero_when_margin_large() {
        // Setting with n_s = 3: a single replacement cannot flip the 3-0
        // sparse majority.
        let p = SyntheticParams::new(50, 41, 16, 3, 5, 1, 41).unwrap();
        let s = rule_sensitivity_exact(&RulePredictor::sparse(), &p).unwrap();
        assert_eq!(s, 0.0);
    }

    #[test]
    fn frequent_rule_zero_when_unanimous() {
        // n_d = n_f: unanimous frequent majority is robust to one change.
        let p = SyntheticParams::new(12, 22, 8, 1, 4, 4, 22).unwrap();
        let s = rule_sensitivity_exact(&RulePredictor::frequent(), &p).unwrap();
        assert_eq!(s, 0.0);
    }

    #[test]
    fn exact_matches_closed_forms() {
        // Closed forms derived by case enumeration (tie → +1):
        // sparse rule with n_s = 1: (T + M − 1) / (2·T·M);
        // frequent rule with margin 1: [k_same + (T − n_f)·m/M +
        //   k_same·(m/M) + ... ] — spelled out below.
        let p = SyntheticParams::new(50, 51, 20, 1, 17, 7, 51).unwrap();
        let s = rule_sensitivity_exact(&RulePredictor::sparse(), &p).unwrap();
        let t = 50.0;
        let m_vocab = 51.0;
        let expect = (t + m_vocab - 1.0) / (2.0 * t * m_vocab);
        assert!((s - expect).abs() < 1e-12, "{s} vs {expect}");

        let p2 = SyntheticParams::new(50, 41, 16, 3, 5, 1, 41).unwrap();
        let s2 = rule_sensitivity_exact(&RulePredictor::frequent(), &p2).unwrap();
        // Margin-1 majority (k_same = 3, k_opp = 2), tie → +1:
        // label +1: flips only at frequent-same positions when the draw is
        //   an opposite frequent token (m/M each);
        // label −1: frequent-same positions flip unless the draw restores
        //   the majority ((M − m)/M), and every non-frequent position
        //   flips when the draw is a plus frequent token (m/M).
        let (t, m_sub, m_vocab) = (50.0, 16.0, 41.0);
        let k_same = 3.0;
        let expect2 = 0.5 / t
            * (k_same * m_sub / m_vocab
                + k_same * (m_vocab - m_sub) / m_vocab
                + (t - 5.0) * m_sub / m_vocab);
        assert!((s2 - expect2).abs() < 1e-12, "{s2} vs {expect2}");
        assert!(s2 > 0.0);
    }

    #[test]
    fn mc_agrees_with_exact() {
        let p = SyntheticParams::new(12, 17, 6, 1, 3, 1, 17).unwrap();
        for rule in [RulePredictor::sparse(), RulePredictor::frequent()] {
            let exact = rule_sensitivity_exact(&rule, &p).unwrap();
            let spec = CorruptionSpec::token_uniform(1234).with_repeats(17);
            let (est, se) = rule_sensitivity_mc(&rule, &p, 800, &spec).unwrap();
            let slack = 3.0 * se.max(1e-9);
            assert!(
                (est - exact).abs() <= slack,
                "{rule:?}: est={est} exact={exact} se={se}"
            );
        }
    }

    #[test]
    fn mc_zero_cases() {
        let p = SyntheticParams::new(20, 41, 16, 3, 5, 1, 41).unwrap();
        let spec = CorruptionSpec::token_uniform(9).with_repeats(8);
        let (est, se) = rule_sensitivity_mc(&RulePredictor::sparse(), &p, 200, &spec).unwrap();
        assert_eq!(est, 0.0);
        assert_eq!(se, 0.0);
    }
}

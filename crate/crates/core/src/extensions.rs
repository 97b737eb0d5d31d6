//! Sensitivity-lowering training interventions and flatness metrics.
//!
//! Two interventions transplant image-domain noise tricks onto token
//! sequences: Gaussian label-preserving augmentation, and an
//! output-matching penalty between an input and a patch-noised copy.
//! Flatness is measured by the expected output change (`ShOp`) and
//! prediction-flip rate (`ShPred`) under isotropic Gaussian weight noise.

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::attention::{
    backward_into, forward, forward_cached, loss_and_gradients, train_engine, AttentionParams,
    DiagnosticsConfig, ModelConfig, ParamGrads, TrainConfig, TrainOutput,
};
use crate::error::{CoreError, Result};
use crate::scalar::{sign_pm, Scalar};
use crate::synth::{Dataset, Example, ExampleInput};

/// Gaussian data-augmentation settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentSpec {
    /// Noise variance added to every token vector (default 0.1).
    pub sigma2: f64,
    /// Noisy copies appended per example (default 1).
    pub copies: usize,
}

impl Default for AugmentSpec {
    fn default() -> Self {
        Self {
            sigma2: 0.1,
            copies: 1,
        }
    }
}

impl AugmentSpec {
    fn validate(&self) -> Result<()> {
        if !(self.sigma2 > 0.0) {
            return Err(CoreError::Config(format!(
                "augmentation variance must be positive, got {}",
                self.sigma2
            )));
        }
        if self.copies == 0 {
            return Err(CoreError::Config("copies must be at least 1".into()));
        }
        Ok(())
    }
}

/// Output-matching regularizer settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegSpec {
    /// Penalty strength λ (default 0.25).
    pub lambda: f64,
    /// Variance of the noise injected into the chosen positions
    /// (default 1).
    pub sigma2: f64,
    /// Positions corrupted per example per step (default 1).
    pub patches: usize,
}

impl Default for RegSpec {
    fn default() -> Self {
        Self {
            lambda: 0.25,
            sigma2: 1.0,
            patches: 1,
        }
    }
}

impl RegSpec {
    fn validate(&self) -> Result<()> {
        if self.lambda < 0.0 || !self.lambda.is_finite() {
            return Err(CoreError::Config(format!(
                "regularization strength must be nonnegative, got {}",
                self.lambda
            )));
        }
        if !(self.sigma2 > 0.0) {
            return Err(CoreError::Config(format!(
                "patch-noise variance must be positive, got {}",
                self.sigma2
            )));
        }
        if self.patches == 0 {
            return Err(CoreError::Config("patches must be at least 1".into()));
        }
        Ok(())
    }
}

/// Weight-perturbation settings for the sharpness metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SharpnessSpec {
    /// Weight-noise standard deviation (default 0.005).
    pub sigma: f64,
    /// Noise draws averaged over (default 5).
    pub repeats: usize,
    pub seed: u64,
}

impl Default for SharpnessSpec {
    fn default() -> Self {
        Self {
            sigma: 0.005,
            repeats: 5,
            seed: 0,
        }
    }
}

impl SharpnessSpec {
    fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) {
            return Err(CoreError::Config(format!(
                "sharpness sigma must be positive, got {}",
                self.sigma
            )));
        }
        if self.repeats == 0 {
            return Err(CoreError::Config("repeats must be at least 1".into()));
        }
        Ok(())
    }
}

/// Appends, per example, `copies` label-preserving duplicates with i.i.d.
/// `N(0, σ²)` added to every token-vector entry.
pub fn augment_dataset<T: Scalar>(
    data: &Dataset<T>,
    spec: &AugmentSpec,
    rng: &mut impl Rng,
) -> Result<Dataset<T>> {
    spec.validate()?;
    let sd = T::from_f64_lossy(spec.sigma2.sqrt());
    let mut out = data.clone();
    for ex in &data.examples {
        let base = ex.to_matrix(data.params.d_tok);
        for _ in 0..spec.copies {
            let mut noisy = base.clone();
            for v in noisy.iter_mut() {
                let z: f64 = StandardNormal.sample(rng);
                *v = *v + sd * T::from_f64_lossy(z);
            }
            out.examples.push(Example {
                label: ex.label,
                roles: ex.roles.clone(),
                input: ExampleInput::Dense(noisy),
            });
        }
    }
    Ok(out)
}

/// Logistic loss plus `λ · mean (Φ(X) − Φ(X̃))²`, where `X̃` adds
/// `N(0, σ²·I)` to `patches` uniformly chosen positions; gradients flow
/// through both branches with the noise held constant. With `λ = 0` the
/// result is bitwise identical to the base objective while consuming the
/// RNG identically.
pub fn regularized_loss_and_gradients<T: Scalar>(
    params: &AttentionParams<T>,
    inputs: &[&Array2<T>],
    labels: &[i8],
    spec: &RegSpec,
    rng: &mut ChaCha8Rng,
) -> Result<(T, ParamGrads<T>)> {
    spec.validate()?;
    let (mut loss, mut grads) = loss_and_gradients(params, inputs, labels)?;
    let lambda = T::from_f64_lossy(spec.lambda);
    let sd = T::from_f64_lossy(spec.sigma2.sqrt());
    let inv_n = T::one() / T::from_usize(inputs.len()).unwrap();
    let two = T::from_f64_lossy(2.0);

    for &x in inputs {
        let t_len = x.nrows();
        let mut noisy = x.clone();
        for _ in 0..spec.patches.min(t_len) {
            let tau = rng.gen_range(0..t_len);
            for v in noisy.row_mut(tau).iter_mut() {
                let z: f64 = StandardNormal.sample(rng);
                *v = *v + sd * T::from_f64_lossy(z);
            }
        }
        if spec.lambda == 0.0 {
            continue;
        }
        let cache = forward_cached(params, x)?;
        let cache_noisy = forward_cached(params, &noisy)?;
        let gap = cache.score - cache_noisy.score;
        loss = loss + lambda * gap * gap * inv_n;
        let g = lambda * two * gap * inv_n;
        backward_into(params, x, &cache, g, &mut grads);
        backward_into(params, &noisy, &cache_noisy, -g, &mut grads);
    }
    Ok((loss, grads))
}

/// SGD with the regularized objective; fresh noise every step.
pub fn train_regularized<T: Scalar>(
    train_data: &Dataset<T>,
    test_id: &Dataset<T>,
    test_ood: &Dataset<T>,
    model: &ModelConfig,
    cfg: &TrainConfig,
    diag: &DiagnosticsConfig,
    spec: &RegSpec,
) -> Result<TrainOutput<T>> {
    spec.validate()?;
    let mut step = |params: &AttentionParams<T>,
                    batch: &[&Array2<T>],
                    labels: &[i8],
                    rng: &mut ChaCha8Rng| {
        regularized_loss_and_gradients(params, batch, labels, spec, rng)
    };
    train_engine(train_data, test_id, test_ood, model, cfg, diag, &mut step)
}

/// SGD on the Gaussian-augmented training set.
pub fn train_augmented<T: Scalar>(
    train_data: &Dataset<T>,
    test_id: &Dataset<T>,
    test_ood: &Dataset<T>,
    model: &ModelConfig,
    cfg: &TrainConfig,
    diag: &DiagnosticsConfig,
    spec: &AugmentSpec,
) -> Result<TrainOutput<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(3);
    let augmented = augment_dataset(train_data, spec, &mut rng)?;
    crate::attention::train(&augmented, test_id, test_ood, model, cfg, diag)
}

/// Flatness metrics under isotropic Gaussian weight noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SharpnessReport {
    /// `E |Φ(θ; x) − Φ(θ + ξ; x)|`.
    pub sh_op: f64,
    /// `E 1[sign(Φ(θ; x)) ≠ sign(Φ(θ + ξ; x))]`.
    pub sh_pred: f64,
}

/// Measures both sharpness metrics over a dataset. One noise draw ξ per
/// repeat is shared across the data, so the estimate averages `repeats`
/// joint perturbations of the full parameter set.
pub fn sharpness_metrics<T: Scalar>(
    params: &AttentionParams<T>,
    data: &Dataset<T>,
    spec: &SharpnessSpec,
) -> Result<SharpnessReport> {
    spec.validate()?;
    let mats: Vec<Array2<T>> = data
        .examples
        .iter()
        .map(|e| e.to_matrix(data.params.d_tok))
        .collect();
    let base: Vec<T> = mats
        .iter()
        .map(|x| forward(params, x))
        .collect::<Result<Vec<_>>>()?;

    let sigma = T::from_f64_lossy(spec.sigma);
    let mut op_acc = 0.0f64;
    let mut pred_acc = 0u64;
    for r in 0..spec.repeats {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(r as u64);
        let perturbed = params.perturbed(sigma, &mut rng);
        for (x, &b) in mats.iter().zip(&base) {
            let s = forward(&perturbed, x)?;
            op_acc += (b - s).abs().to_f64_lossy();
            if sign_pm(s) != sign_pm(b) {
                pred_acc += 1;
            }
        }
    }
    let n = (mats.len() * spec.repeats) as f64;
    Ok(SharpnessReport {
        sh_op: op_acc / n,
        sh_pred: pred_acc as f64 / n,
    })
}

/// `E |Φ(θ; x) − Φ(θ + ξ; x)|` under `ξ ~ N(0, σ²·I)` over all parameters.
pub fn sh_op<T: Scalar>(
    params: &AttentionParams<T>,
    data: &Dataset<T>,
    spec: &SharpnessSpec,
) -> Result<f64> {
    Ok(sharpness_metrics(params, data, spec)?.sh_op)
}

/// Prediction-flip rate under the same weight noise.
pub fn sh_pred<T: Scalar>(
    params: &AttentionParams<T>,
    data: &Dataset<T>,
    spec: &SharpnessSpec,
) -> Result<f64> {
    Ok(sharpness_metrics(params, data, spec)?.sh_pred)
}

/// For the linear model `Φ(θ; x) = θᵀx`, perturbing the input by `Δx` is
/// equivalent to perturbing the weights by `Δθ = (θᵀΔx/‖x‖²)·x`. Returns
/// the residual `|Φ(θ; x + Δx) − Φ(θ + Δθ; x)|`, which is zero up to
/// rounding.
pub fn linear_equivalence_check<T: Scalar>(theta: &[T], x: &[T], dx: &[T]) -> Result<T> {
    if theta.len() != x.len() || x.len() != dx.len() {
        return Err(CoreError::Config("mismatched vector lengths".into()));
    }
    let norm2: T = x.iter().map(|&v| v * v).sum();
    if norm2 == T::zero() {
        return Err(CoreError::Domain("x must be nonzero".into()));
    }
    let dot = |a: &[T], b: &[T]| -> T { a.iter().zip(b).map(|(&u, &v)| u * v).sum() };
    let theta_dx = dot(theta, dx);
    let scale = theta_dx / norm2;
    let lhs = dot(theta, x) + theta_dx;
    let rhs: T = theta
        .iter()
        .zip(x)
        .map(|(&t, &xi)| (t + scale * xi) * xi)
        .sum();
    Ok((lhs - rhs).abs())
}

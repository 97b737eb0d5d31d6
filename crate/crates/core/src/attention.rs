//! Single-head self-attention with a linear head, exact manual gradients,
//! SGD training, and the attention/alignment diagnostics.
//!
//! The model scores a `T × d_tok` input `X` as
//! `Φ(θ; X) = ⟨U_head, act(X·W_Q·W_Kᵀ·Xᵀ)·X·W_V⟩` where `act` is a
//! row-wise softmax (or elementwise ReLU, or identity scaled by
//! `(T·d_tok)^{-1/2}`), and `U_head` is the first `T` rows of `U`
//! (requires `T ≤ d_tok`). Predictions are `sign(Φ)` with `sign(0) = +1`.

use ndarray::{Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{CoreError, Result};
use crate::scalar::{sign_pm, Scalar};
use crate::sensitivity::{measure_sensitivity, CorruptionSpec, ScoreModel};
use crate::synth::{reference_vectors, Dataset, Role, SyntheticParams};

/// Attention-map activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttnActivation {
    /// Row-wise softmax.
    Softmax,
    /// Elementwise ReLU.
    Relu,
    /// Identity scaled by `(T·d_tok)^{-1/2}`.
    LinearScaled,
}

impl AttnActivation {
    pub fn tag(self) -> &'static str {
        match self {
            AttnActivation::Softmax => "softmax",
            AttnActivation::Relu => "relu",
            AttnActivation::LinearScaled => "linear_scaled",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "softmax" => Ok(AttnActivation::Softmax),
            "relu" => Ok(AttnActivation::Relu),
            "linear_scaled" => Ok(AttnActivation::LinearScaled),
            other => Err(CoreError::Config(format!("unknown activation `{other}`"))),
        }
    }
}

/// Shapes and activation of the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    pub d_tok: usize,
    pub d_h: usize,
    pub d_v: usize,
    pub activation: AttnActivation,
}

impl ModelConfig {
    /// Square configuration `d_h = d_v = d_tok` for a synthetic task.
    pub fn square(d_tok: usize, activation: AttnActivation) -> Self {
        Self {
            d_tok,
            d_h: d_tok,
            d_v: d_tok,
            activation,
        }
    }
}

/// Training loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossKind {
    #[default]
    Logistic,
}

/// SGD hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub init_scale: f64,
    pub seed: u64,
    pub loss: LossKind,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(CoreError::Config("batch size must be at least 1".into()));
        }
        if !(self.init_scale > 0.0) {
            return Err(CoreError::Config(format!(
                "init scale must be positive, got {}",
                self.init_scale
            )));
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(CoreError::Config(format!(
                "learning rate must be finite and nonnegative, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            batch_size: 100,
            epochs: 100,
            init_scale: 1e-2,
            seed: 0,
            loss: LossKind::Logistic,
        }
    }
}

/// Model parameters `θ = (W_Q, W_K, W_V, U)` plus the activation kind.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams<T> {
    pub w_q: Array2<T>,
    pub w_k: Array2<T>,
    pub w_v: Array2<T>,
    pub u: Array2<T>,
    pub activation: AttnActivation,
}

/// Gradient (or generic per-parameter) buffer matching the four matrices.
#[derive(Debug, Clone)]
pub struct ParamGrads<T> {
    pub w_q: Array2<T>,
    pub w_k: Array2<T>,
    pub w_v: Array2<T>,
    pub u: Array2<T>,
}

impl<T: Scalar> ParamGrads<T> {
    pub fn zeros_like(p: &AttentionParams<T>) -> Self {
        Self {
            w_q: Array2::zeros(p.w_q.raw_dim()),
            w_k: Array2::zeros(p.w_k.raw_dim()),
            w_v: Array2::zeros(p.w_v.raw_dim()),
            u: Array2::zeros(p.u.raw_dim()),
        }
    }

}

impl<T: Scalar> AttentionParams<T> {
    /// All-zero parameters (softmax rows become uniform, score is 0).
    pub fn zeros(cfg: &ModelConfig) -> Self {
        Self {
            w_q: Array2::zeros((cfg.d_tok, cfg.d_h)),
            w_k: Array2::zeros((cfg.d_tok, cfg.d_h)),
            w_v: Array2::zeros((cfg.d_tok, cfg.d_v)),
            u: Array2::zeros((cfg.d_tok, cfg.d_v)),
            activation: cfg.activation,
        }
    }

    pub fn shapes_consistent(&self) -> bool {
        self.w_q.nrows() == self.w_k.nrows()
            && self.w_q.ncols() == self.w_k.ncols()
            && self.w_v.nrows() == self.w_q.nrows()
            && self.u.dim() == self.w_v.dim()
    }

    pub fn d_tok(&self) -> usize {
        self.w_q.nrows()
    }

    /// Total number of scalar parameters.
    pub fn n_params(&self) -> usize {
        self.w_q.len() + self.w_k.len() + self.w_v.len() + self.u.len()
    }

    fn mats(&self) -> [&Array2<T>; 4] {
        [&self.w_q, &self.w_k, &self.w_v, &self.u]
    }

    fn mats_mut(&mut self) -> [&mut Array2<T>; 4] {
        [&mut self.w_q, &mut self.w_k, &mut self.w_v, &mut self.u]
    }

    /// Reads the parameter at a flat index (matrix order Q, K, V, U,
    /// row-major within each).
    pub fn get_flat(&self, mut idx: usize) -> T {
        for m in self.mats() {
            if idx < m.len() {
                return m.as_slice().expect("contiguous")[idx];
            }
            idx -= m.len();
        }
        panic!("flat index out of range");
    }

    /// Writes the parameter at a flat index.
    pub fn set_flat(&mut self, mut idx: usize, v: T) {
        for m in self.mats_mut() {
            if idx < m.len() {
                m.as_slice_mut().expect("contiguous")[idx] = v;
                return;
            }
            idx -= m.len();
        }
        panic!("flat index out of range");
    }

    /// SGD update `θ ← θ − lr·g`.
    pub fn step(&mut self, grads: &ParamGrads<T>, lr: T) {
        self.w_q.scaled_add(-lr, &grads.w_q);
        self.w_k.scaled_add(-lr, &grads.w_k);
        self.w_v.scaled_add(-lr, &grads.w_v);
        self.u.scaled_add(-lr, &grads.u);
    }

    /// Returns a copy with i.i.d. `N(0, σ²)` added to every parameter.
    pub fn perturbed(&self, sigma: T, rng: &mut impl rand::Rng) -> Self {
        let mut out = self.clone();
        for m in out.mats_mut() {
            for v in m.iter_mut() {
                let z: f64 = StandardNormal.sample(rng);
                *v = *v + sigma * T::from_f64_lossy(z);
            }
        }
        out
    }
}

/// Draws parameters with i.i.d. zero-mean Gaussian entries of standard
/// deviation `init_scale`.
pub fn init_params<T: Scalar>(
    cfg: &ModelConfig,
    train: &TrainConfig,
    rng: &mut impl rand::Rng,
) -> Result<AttentionParams<T>> {
    train.validate()?;
    let scale = T::from_f64_lossy(train.init_scale);
    let mut draw = |rows: usize, cols: usize| {
        Array2::from_shape_simple_fn((rows, cols), || {
            let z: f64 = StandardNormal.sample(rng);
            scale * T::from_f64_lossy(z)
        })
    };
    Ok(AttentionParams {
        w_q: draw(cfg.d_tok, cfg.d_h),
        w_k: draw(cfg.d_tok, cfg.d_h),
        w_v: draw(cfg.d_tok, cfg.d_v),
        u: draw(cfg.d_tok, cfg.d_v),
        activation: cfg.activation,
    })
}

pub(crate) struct ForwardCache<T> {
    pub q: Array2<T>,
    pub k: Array2<T>,
    pub scores: Array2<T>,
    pub attn: Array2<T>,
    pub xv: Array2<T>,
    pub out: Array2<T>,
    pub score: T,
}

fn ensure_finite<T: Scalar>(m: &Array2<T>, stage: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(CoreError::Numeric(format!("non-finite value in {stage}")))
    }
}

fn linear_scale<T: Scalar>(t_rows: usize, d_tok: usize) -> T {
    T::one() / T::from_usize(t_rows * d_tok).unwrap().sqrt()
}

pub(crate) fn forward_cached<T: Scalar>(
    params: &AttentionParams<T>,
    x: &Array2<T>,
) -> Result<ForwardCache<T>> {
    if !params.shapes_consistent() {
        return Err(CoreError::Config("inconsistent parameter shapes".into()));
    }
    let (t_rows, d_tok) = x.dim();
    if d_tok != params.d_tok() {
        return Err(CoreError::Config(format!(
            "input token dimension {d_tok} does not match parameters ({})",
            params.d_tok()
        )));
    }
    if t_rows > params.u.nrows() {
        return Err(CoreError::Config(format!(
            "sequence length {t_rows} exceeds head rows {}; T <= d_tok is required",
            params.u.nrows()
        )));
    }

    let q = x.dot(&params.w_q);
    let k = x.dot(&params.w_k);
    let scores = q.dot(&k.t());
    ensure_finite(&scores, "attention scores")?;

    let attn = match params.activation {
        AttnActivation::Softmax => {
            let mut a = scores.clone();
            for mut row in a.rows_mut() {
                let max = row.iter().cloned().fold(T::neg_infinity(), T::max);
                let mut denom = T::zero();
                for v in row.iter_mut() {
                    *v = (*v - max).exp();
                    denom = denom + *v;
                }
                for v in row.iter_mut() {
                    *v = *v / denom;
                }
            }
            a
        }
        AttnActivation::Relu => scores.mapv(|v| v.max(T::zero())),
        AttnActivation::LinearScaled => {
            let s = linear_scale::<T>(t_rows, d_tok);
            scores.mapv(|v| v * s)
        }
    };
    ensure_finite(&attn, "attention activation")?;

    let xv = x.dot(&params.w_v);
    let out = attn.dot(&xv);
    ensure_finite(&out, "value aggregation")?;

    let u_head = params.u.slice(ndarray::s![..t_rows, ..]);
    let score = (&u_head * &out).sum();
    if !score.is_finite() {
        return Err(CoreError::Numeric("non-finite value in head contraction".into()));
    }

    Ok(ForwardCache {
        q,
        k,
        scores,
        attn,
        xv,
        out,
        score,
    })
}

/// Scores one input sequence.
pub fn forward<T: Scalar>(params: &AttentionParams<T>, x: &Array2<T>) -> Result<T> {
    Ok(forward_cached(params, x)?.score)
}

impl<T: Scalar> ScoreModel<T> for AttentionParams<T> {
    fn score(&self, x: &Array2<T>) -> Result<T> {
        forward(self, x)
    }
}

/// Backward pass from `d loss / d score`, accumulating into `grads`.
pub(crate) fn backward_into<T: Scalar>(
    params: &AttentionParams<T>,
    x: &Array2<T>,
    cache: &ForwardCache<T>,
    g_score: T,
    grads: &mut ParamGrads<T>,
) {
    let (t_rows, d_tok) = x.dim();
    let u_head = params.u.slice(ndarray::s![..t_rows, ..]);

    // Head: dU_head = g·O, dO = g·U_head.
    grads
        .u
        .slice_mut(ndarray::s![..t_rows, ..])
        .scaled_add(g_score, &cache.out);
    let d_out = u_head.mapv(|v| v * g_score);

    // O = A·XV.
    let d_attn = d_out.dot(&cache.xv.t());
    let d_xv = cache.attn.t().dot(&d_out);
    grads.w_v.scaled_add(T::one(), &x.t().dot(&d_xv));

    // Activation backward.
    let d_scores = match params.activation {
        AttnActivation::Softmax => {
            let mut d = Array2::zeros(cache.scores.raw_dim());
            for i in 0..t_rows {
                let a = cache.attn.row(i);
                let g = d_attn.row(i);
                let dot = a.dot(&g);
                let mut dst = d.row_mut(i);
                for j in 0..t_rows {
                    dst[j] = a[j] * (g[j] - dot);
                }
            }
            d
        }
        AttnActivation::Relu => {
            let mut d = d_attn.clone();
            ndarray::Zip::from(&mut d).and(&cache.scores).for_each(|g, &s| {
                if s <= T::zero() {
                    *g = T::zero();
                }
            });
            d
        }
        AttnActivation::LinearScaled => {
            let s = linear_scale::<T>(t_rows, d_tok);
            d_attn.mapv(|v| v * s)
        }
    };

    // S = Q·Kᵀ.
    let d_q = d_scores.dot(&cache.k);
    let d_k = d_scores.t().dot(&cache.q);
    grads.w_q.scaled_add(T::one(), &x.t().dot(&d_q));
    grads.w_k.scaled_add(T::one(), &x.t().dot(&d_k));
}

/// Stable `log(1 + exp(-m))`.
pub(crate) fn logistic_loss<T: Scalar>(margin: T) -> T {
    if margin > T::zero() {
        (-margin).exp().ln_1p()
    } else {
        -margin + margin.exp().ln_1p()
    }
}

/// `d/ds log(1 + exp(-y·s)) = -y · σ(-y·s)`.
pub(crate) fn logistic_grad<T: Scalar>(label: T, score: T) -> T {
    let m = label * score;
    // σ(-m) computed stably.
    let s = if m > T::zero() {
        let e = (-m).exp();
        e / (T::one() + e)
    } else {
        T::one() / (T::one() + m.exp())
    };
    -label * s
}

/// Mean logistic loss and exact gradients over a batch of (input, label)
/// pairs, by manual backpropagation through the attention and the head.
pub fn loss_and_gradients<T: Scalar>(
    params: &AttentionParams<T>,
    inputs: &[&Array2<T>],
    labels: &[i8],
) -> Result<(T, ParamGrads<T>)> {
    if inputs.is_empty() || inputs.len() != labels.len() {
        return Err(CoreError::Config(
            "batch must be non-empty with matching labels".into(),
        ));
    }
    let inv_n = T::one() / T::from_usize(inputs.len()).unwrap();
    let mut grads = ParamGrads::zeros_like(params);
    let mut loss = T::zero();
    for (&x, &y) in inputs.iter().zip(labels) {
        let cache = forward_cached(params, x)?;
        let label = T::from_i8(y).unwrap();
        loss = loss + logistic_loss(label * cache.score) * inv_n;
        let g = logistic_grad(label, cache.score) * inv_n;
        backward_into(params, x, &cache, g, &mut grads);
    }
    Ok((loss, grads))
}

/// Per-epoch diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub epoch: usize,
    pub train_acc: f64,
    pub test_id_acc: f64,
    pub test_ood_acc: f64,
    pub align_sp: f64,
    pub align_freq: f64,
    pub align_irrel: f64,
    pub mass_sp: f64,
    pub mass_freq: f64,
    pub mass_irrel: f64,
    pub sensitivity: f64,
}

impl DiagnosticsRecord {
    pub const CSV_HEADER: &'static str = "epoch,train_acc,test_id_acc,test_ood_acc,align_sp,align_freq,align_irrel,mass_sp,mass_freq,mass_irrel,sensitivity";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.epoch,
            self.train_acc,
            self.test_id_acc,
            self.test_ood_acc,
            self.align_sp,
            self.align_freq,
            self.align_irrel,
            self.mass_sp,
            self.mass_freq,
            self.mass_irrel,
            self.sensitivity
        )
    }
}

/// What to measure per epoch besides accuracy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsConfig {
    /// Train-set examples used for the per-epoch sensitivity estimate
    /// (0 disables it; the field is then NaN).
    pub sens_examples: usize,
    /// Replacement draws per position for the per-epoch estimate.
    pub sens_repeats: usize,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            sens_examples: 50,
            sens_repeats: 4,
        }
    }
}

/// Training result: final parameters plus per-epoch diagnostics.
#[derive(Debug, Clone)]
pub struct TrainOutput<T> {
    pub params: AttentionParams<T>,
    pub history: Vec<DiagnosticsRecord>,
}

/// Alignment of the head-value map with the reference directions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignmentReport {
    pub sparse: f64,
    pub frequent: f64,
    pub irrelevant: f64,
    /// Rows of `U·W_Vᵀ` skipped because their norm is zero.
    pub excluded_rows: usize,
}

/// Average cosine similarity between the rows of `U·W_Vᵀ` and the three
/// reference directions. Zero-norm rows are excluded and counted.
pub fn alignment_metrics<T: Scalar>(
    params: &AttentionParams<T>,
    p: &SyntheticParams,
) -> Result<AlignmentReport> {
    let refs = reference_vectors::<T>(p)?;
    let g = params.u.dot(&params.w_v.t());
    if g.ncols() != p.d_tok {
        return Err(CoreError::Config(format!(
            "U·W_Vᵀ has {} columns, expected d_tok={}",
            g.ncols(),
            p.d_tok
        )));
    }
    let norms = [
        refs.v_sparse.dot(&refs.v_sparse).sqrt(),
        refs.v_frequent.dot(&refs.v_frequent).sqrt(),
        refs.v_irrelevant.dot(&refs.v_irrelevant).sqrt(),
    ];
    let mut sums = [T::zero(); 3];
    let mut excluded = 0usize;
    let mut used = 0usize;
    for row in g.rows() {
        let norm = row.dot(&row).sqrt();
        if norm == T::zero() {
            excluded += 1;
            continue;
        }
        used += 1;
        for (i, r) in [&refs.v_sparse, &refs.v_frequent, &refs.v_irrelevant]
            .iter()
            .enumerate()
        {
            sums[i] = sums[i] + row.dot(*r) / (norm * norms[i]);
        }
    }
    let denom = if used == 0 { 1.0 } else { used as f64 };
    Ok(AlignmentReport {
        sparse: sums[0].to_f64_lossy() / denom,
        frequent: sums[1].to_f64_lossy() / denom,
        irrelevant: sums[2].to_f64_lossy() / denom,
        excluded_rows: excluded,
    })
}

/// Attention mass per token role, averaged over a dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassReport {
    pub sparse: f64,
    pub frequent: f64,
    pub irrelevant: f64,
}

/// Sums attention scores over positions of each role (sparse, frequent,
/// irrelevant), averaged over examples. With softmax rows the three masses
/// add to `T` per example.
pub fn attention_mass<T: Scalar>(
    params: &AttentionParams<T>,
    data: &Dataset<T>,
) -> Result<MassReport> {
    let mats: Vec<Array2<T>> = data
        .examples
        .iter()
        .map(|e| e.to_matrix(data.params.d_tok))
        .collect();
    let roles: Vec<&[Role]> = data.examples.iter().map(|e| e.roles.as_slice()).collect();
    mass_over(params, &mats, &roles)
}

fn mass_over<T: Scalar>(
    params: &AttentionParams<T>,
    mats: &[Array2<T>],
    roles: &[&[Role]],
) -> Result<MassReport> {
    let mut acc = [0.0f64; 3];
    for (x, r) in mats.iter().zip(roles) {
        let cache = forward_cached(params, x)?;
        let col_mass = cache.attn.sum_axis(Axis(0));
        for (tau, role) in r.iter().enumerate() {
            let slot = match role {
                Role::Sparse => 0,
                Role::FrequentSame | Role::FrequentOpposite => 1,
                Role::Irrelevant => 2,
            };
            acc[slot] += col_mass[tau].to_f64_lossy();
        }
    }
    let n = mats.len() as f64;
    Ok(MassReport {
        sparse: acc[0] / n,
        frequent: acc[1] / n,
        irrelevant: acc[2] / n,
    })
}

fn accuracy<T: Scalar>(
    params: &AttentionParams<T>,
    mats: &[Array2<T>],
    labels: &[i8],
) -> Result<f64> {
    let mut correct = 0usize;
    for (x, &y) in mats.iter().zip(labels) {
        if sign_pm(forward(params, x)?) == y {
            correct += 1;
        }
    }
    Ok(correct as f64 / mats.len() as f64)
}

pub(crate) struct Materialized<T> {
    pub mats: Vec<Array2<T>>,
    pub labels: Vec<i8>,
    pub roles: Vec<Vec<Role>>,
}

pub(crate) fn materialize<T: Scalar>(data: &Dataset<T>) -> Materialized<T> {
    Materialized {
        mats: data
            .examples
            .iter()
            .map(|e| e.to_matrix(data.params.d_tok))
            .collect(),
        labels: data.examples.iter().map(|e| e.label).collect(),
        roles: data.examples.iter().map(|e| e.roles.clone()).collect(),
    }
}

/// One mini-batch step: returns mean loss and mean gradients. The RNG is
/// for objectives that draw noise; the plain logistic step ignores it.
pub(crate) type StepFn<'a, T> = dyn FnMut(
        &AttentionParams<T>,
        &[&Array2<T>],
        &[i8],
        &mut ChaCha8Rng,
    ) -> Result<(T, ParamGrads<T>)>
    + 'a;

/// Shared SGD engine: deterministic shuffling, divergence guard, and
/// per-epoch diagnostics against held-out in-distribution and OOD sets.
pub(crate) fn train_engine<T: Scalar>(
    train_data: &Dataset<T>,
    test_id: &Dataset<T>,
    test_ood: &Dataset<T>,
    model: &ModelConfig,
    cfg: &TrainConfig,
    diag: &DiagnosticsConfig,
    step: &mut StepFn<'_, T>,
) -> Result<TrainOutput<T>> {
    cfg.validate()?;
    let p = train_data.params;
    let train = materialize(train_data);
    let id = materialize(test_id);
    let ood = materialize(test_ood);

    let mut rng_init = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng_init.set_stream(0);
    let mut params = init_params::<T>(model, cfg, &mut rng_init)?;

    let mut rng_shuffle = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng_shuffle.set_stream(1);
    let mut rng_step = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng_step.set_stream(2);
    let sens_seed = cfg.seed.wrapping_add(0x9e37_79b9_7f4a_7c15);

    let n = train.mats.len();
    let mut order: Vec<usize> = (0..n).collect();
    let lr = T::from_f64_lossy(cfg.learning_rate);
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        use rand::seq::SliceRandom;
        order.shuffle(&mut rng_shuffle);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Array2<T>> = chunk.iter().map(|&i| &train.mats[i]).collect();
            let labels: Vec<i8> = chunk.iter().map(|&i| train.labels[i]).collect();
            let (loss, grads) = step(&params, &batch, &labels, &mut rng_step)?;
            if !loss.is_finite() {
                return Err(CoreError::Numeric(format!(
                    "training diverged at epoch {epoch}: non-finite loss"
                )));
            }
            params.step(&grads, lr);
        }

        let sensitivity = if diag.sens_examples > 0 {
            let subset = Dataset {
                params: p,
                kind: train_data.kind,
                seed: train_data.seed,
                examples: train_data
                    .examples
                    .iter()
                    .take(diag.sens_examples)
                    .cloned()
                    .collect(),
            };
            let spec = CorruptionSpec::token_uniform(sens_seed).with_repeats(diag.sens_repeats);
            measure_sensitivity(&params, &subset, &spec)?
                .normalized
                .to_f64_lossy()
        } else {
            f64::NAN
        };

        let align = alignment_metrics(&params, &p)?;
        let mass = mass_over(
            &params,
            &train.mats,
            &train.roles.iter().map(|r| r.as_slice()).collect::<Vec<_>>(),
        )?;
        history.push(DiagnosticsRecord {
            epoch,
            train_acc: accuracy(&params, &train.mats, &train.labels)?,
            test_id_acc: accuracy(&params, &id.mats, &id.labels)?,
            test_ood_acc: accuracy(&params, &ood.mats, &ood.labels)?,
            align_sp: align.sparse,
            align_freq: align.frequent,
            align_irrel: align.irrelevant,
            mass_sp: mass.sparse,
            mass_freq: mass.frequent,
            mass_irrel: mass.irrelevant,
            sensitivity,
        });
    }

    Ok(TrainOutput { params, history })
}

/// Mini-batch SGD with the logistic loss; deterministic given the seed.
pub fn train<T: Scalar>(
    train_data: &Dataset<T>,
    test_id: &Dataset<T>,
    test_ood: &Dataset<T>,
    model: &ModelConfig,
    cfg: &TrainConfig,
    diag: &DiagnosticsConfig,
) -> Result<TrainOutput<T>> {
    let mut step = |params: &AttentionParams<T>,
                    batch: &[&Array2<T>],
                    labels: &[i8],
                    _rng: &mut ChaCha8Rng| loss_and_gradients(params, batch, labels);
    train_engine(train_data, test_id, test_ood, model, cfg, diag, &mut step)
}

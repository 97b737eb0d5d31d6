//! Univariate kernel profiles on the Boolean cube and their exact spectra.
//!
//! On norm-equal inputs (always true on `{±1}^d`) the CK/NTK of a layer
//! stack reduces to a univariate profile `Ψ(c)` of the normalized inner
//! product `c = ⟨x, y⟩/d`. `χ_U` is then an eigenfunction of the kernel
//! with an eigenvalue depending only on `|U|`, computed here by an exact
//! combinatorial sum.

use std::str::FromStr;
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use rayon::prelude::*;

use crate::error::{CoreError, Result};
use crate::scalar::{kahan_sum, Scalar};

/// Exact eigenvalue computation is limited to this dimension.
pub const MAX_EIGEN_DIM: usize = 40;

/// Gram matrices above this dimension are rejected (2^d × 2^d entries).
pub const MAX_GRAM_DIM: usize = 12;

/// Tolerance on eigenvalue comparisons in the ordering check.
pub const ORDERING_TOL: f64 = 1e-12;

/// Activation of a dense layer, applied through its dual map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Erf,
}

/// One layer of a stack: a dense layer with an activation, or a
/// linear-attention layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layer {
    Dense(Activation),
    LinearAttention,
}

impl FromStr for Layer {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "dense:identity" | "dense:id" => Ok(Layer::Dense(Activation::Identity)),
            "dense:relu" => Ok(Layer::Dense(Activation::Relu)),
            "dense:erf" => Ok(Layer::Dense(Activation::Erf)),
            "attn" | "linear_attention" => Ok(Layer::LinearAttention),
            other => Err(CoreError::Config(format!("unknown layer kind `{other}`"))),
        }
    }
}

/// Parses a comma-separated stack description such as
/// `"dense:relu,attn,dense:relu"`.
pub fn parse_layers(s: &str) -> Result<Vec<Layer>> {
    s.split(',').map(Layer::from_str).collect()
}

#[derive(Debug)]
enum PsiNode<T> {
    /// The argument `c` itself.
    Input,
    Const(T),
    Scale(T, Arc<PsiNode<T>>),
    Pow(Arc<PsiNode<T>>, u32),
    Add(Arc<PsiNode<T>>, Arc<PsiNode<T>>),
    Mul(Arc<PsiNode<T>>, Arc<PsiNode<T>>),
    /// Dual map of a ReLU dense layer (unit-normalized):
    /// `(√(1−c²) + (π − arccos c)·c)/π`.
    ReluDual(Arc<PsiNode<T>>),
    /// Its derivative `(π − arccos c)/π`.
    ReluDualDeriv(Arc<PsiNode<T>>),
    /// Dual map of an erf dense layer under unit-normalized inputs:
    /// `(2/π)·arcsin(2c/3)`.
    ErfDual(Arc<PsiNode<T>>),
    /// Its derivative `4/(π·√(9−4c²))`.
    ErfDualDeriv(Arc<PsiNode<T>>),
}

/// A univariate kernel profile `Ψ: [−1, 1] → ℝ` represented as an
/// immutable composition tree of primitive layer maps. Cheap to clone and
/// safe to share across threads.
#[derive(Debug, Clone)]
pub struct KernelPsi<T> {
    root: Arc<PsiNode<T>>,
}

impl<T: Scalar> KernelPsi<T> {
    /// The identity profile `Ψ(c) = c`.
    pub fn input() -> Self {
        Self {
            root: Arc::new(PsiNode::Input),
        }
    }

    /// A constant profile.
    pub fn constant(a: T) -> Self {
        Self {
            root: Arc::new(PsiNode::Const(a)),
        }
    }

    /// `a · Ψ(c)`.
    pub fn scale(&self, a: T) -> Self {
        Self {
            root: Arc::new(PsiNode::Scale(a, self.root.clone())),
        }
    }

    /// `Ψ(c)^n` for integer `n`.
    pub fn powi(&self, n: u32) -> Self {
        Self {
            root: Arc::new(PsiNode::Pow(self.root.clone(), n)),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            root: Arc::new(PsiNode::Add(self.root.clone(), other.root.clone())),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self {
            root: Arc::new(PsiNode::Mul(self.root.clone(), other.root.clone())),
        }
    }

    fn relu_dual(&self) -> Self {
        Self {
            root: Arc::new(PsiNode::ReluDual(self.root.clone())),
        }
    }

    fn relu_dual_deriv(&self) -> Self {
        Self {
            root: Arc::new(PsiNode::ReluDualDeriv(self.root.clone())),
        }
    }

    fn erf_dual(&self) -> Self {
        Self {
            root: Arc::new(PsiNode::ErfDual(self.root.clone())),
        }
    }

    fn erf_dual_deriv(&self) -> Self {
        Self {
            root: Arc::new(PsiNode::ErfDualDeriv(self.root.clone())),
        }
    }

    /// Applies one layer's kernel map to this profile.
    fn apply_layer(&self, layer: Layer) -> Self {
        match layer {
            Layer::Dense(Activation::Identity) => self.clone(),
            Layer::Dense(Activation::Relu) => self.relu_dual(),
            Layer::Dense(Activation::Erf) => self.erf_dual(),
            Layer::LinearAttention => self.powi(3),
        }
    }

    /// Derivative of the layer's map, evaluated at this profile.
    fn layer_deriv(&self, layer: Layer) -> Self {
        match layer {
            Layer::Dense(Activation::Identity) => Self::constant(T::one()),
            Layer::Dense(Activation::Relu) => self.relu_dual_deriv(),
            Layer::Dense(Activation::Erf) => self.erf_dual_deriv(),
            Layer::LinearAttention => self.powi(2).scale(T::from_f64_lossy(3.0)),
        }
    }

    /// Evaluates `Ψ(c)`.
    pub fn eval(&self, c: T) -> T {
        fn go<T: Scalar>(node: &PsiNode<T>, c: T) -> T {
            match node {
                PsiNode::Input => c,
                PsiNode::Const(a) => *a,
                PsiNode::Scale(a, inner) => *a * go(inner, c),
                PsiNode::Pow(inner, n) => go(inner, c).powi(*n as i32),
                PsiNode::Add(a, b) => go(a, c) + go(b, c),
                PsiNode::Mul(a, b) => go(a, c) * go(b, c),
                PsiNode::ReluDual(inner) => {
                    let v = clamp_unit(go(inner, c));
                    let pi = T::PI();
                    ((T::one() - v * v).sqrt() + (pi - v.acos()) * v) / pi
                }
                PsiNode::ReluDualDeriv(inner) => {
                    let v = clamp_unit(go(inner, c));
                    (T::PI() - v.acos()) / T::PI()
                }
                PsiNode::ErfDual(inner) => {
                    let v = go(inner, c);
                    let two = T::from_f64_lossy(2.0);
                    let three = T::from_f64_lossy(3.0);
                    two / T::PI() * (two * v / three).asin()
                }
                PsiNode::ErfDualDeriv(inner) => {
                    let v = go(inner, c);
                    let four = T::from_f64_lossy(4.0);
                    let nine = T::from_f64_lossy(9.0);
                    four / (T::PI() * (nine - four * v * v).sqrt())
                }
            }
        }
        go(&self.root, c)
    }

    /// Numeric sanity for normalized kernels: `Ψ(1) ≥ |Ψ(c)|` on a grid of
    /// `points` values spanning `[-1, 1]`.
    pub fn psd_sanity(&self, points: usize) -> bool {
        let at_one = self.eval(T::one());
        (0..points).all(|i| {
            let c = T::from_f64_lossy(-1.0 + 2.0 * i as f64 / (points - 1) as f64);
            at_one >= self.eval(c).abs() - T::from_f64_lossy(1e-12)
        })
    }
}

fn clamp_unit<T: Scalar>(v: T) -> T {
    v.max(-T::one()).min(T::one())
}

fn require_layers(layers: &[Layer]) -> Result<()> {
    if layers.is_empty() {
        return Err(CoreError::Config("empty layer list".into()));
    }
    Ok(())
}

/// CK profile of a stack: sequentially applies each layer's kernel map to
/// the initial profile `Ψ(c) = c`.
pub fn compose_ck<T: Scalar>(layers: &[Layer]) -> Result<KernelPsi<T>> {
    require_layers(layers)?;
    let mut psi = KernelPsi::input();
    for &layer in layers {
        psi = psi.apply_layer(layer);
    }
    Ok(psi)
}

/// NTK profile of a stack via the recursion
/// `Θ^l = Θ^{l−1}·ġ_l(Ψ^{l−1}) + Ψ^l` with `Θ^0 = Ψ^0 = c`.
pub fn compose_ntk<T: Scalar>(layers: &[Layer]) -> Result<KernelPsi<T>> {
    require_layers(layers)?;
    let mut psi = KernelPsi::input();
    let mut theta = KernelPsi::input();
    for &layer in layers {
        let deriv = psi.layer_deriv(layer);
        let next_psi = psi.apply_layer(layer);
        theta = theta.mul(&deriv).add(&next_psi);
        psi = next_psi;
    }
    Ok(theta)
}

/// Exact eigenvalue spectrum `μ_0..μ_d` of a profile on `{±1}^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum<T> {
    pub d: usize,
    pub mu: Vec<T>,
}

/// Outcome of the even/odd-chain ordering check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OrderingCheck {
    pub holds: bool,
    /// First violating pair `(k, k+2)` in increasing `k`, if any.
    pub first_violation: Option<(usize, usize)>,
}

fn binomial(n: usize, k: usize) -> BigInt {
    let mut acc = BigInt::from(1);
    for i in 0..k.min(n - k) {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

/// Exact eigenvalue `μ_k = E_{x~{±1}^d}[x^U Ψ(d^{-1} Σ_i x_i)]` for any
/// `U` with `|U| = k`, via the combinatorial double sum
/// `2^{-d} Σ_a Σ_b C(k,a)·C(d−k,b)·(−1)^{k−a}·Ψ((2(a+b)−d)/d)`.
///
/// Terms sharing `a+b` evaluate Ψ at the same point, so their signed
/// integer weights are accumulated exactly in big-integer arithmetic
/// before the compensated float sum over the d+1 distinct Ψ values.
pub fn eigenvalue<T: Scalar>(psi: &KernelPsi<T>, d: usize, k: usize) -> Result<T> {
    if k > d {
        return Err(CoreError::Domain(format!("degree {k} exceeds dimension {d}")));
    }
    if d == 0 || d > MAX_EIGEN_DIM {
        return Err(CoreError::Capacity(format!(
            "dimension {d} outside 1..={MAX_EIGEN_DIM} for exact eigenvalues"
        )));
    }
    let mut weights = vec![BigInt::from(0); d + 1];
    for a in 0..=k {
        let sign = if (k - a) % 2 == 0 { 1 } else { -1 };
        let ca = binomial(k, a) * BigInt::from(sign);
        for b in 0..=(d - k) {
            weights[a + b] += &ca * binomial(d - k, b);
        }
    }
    let dd = T::from_usize(d).unwrap();
    let terms = (0..=d).map(|s| {
        let c = (T::from_usize(2 * s).unwrap() - dd) / dd;
        let w = T::from_f64_lossy(weights[s].to_f64().expect("weight fits f64"));
        w * psi.eval(c)
    });
    let scale = T::from_f64_lossy(0.5).powi(d as i32);
    Ok(kahan_sum(terms) * scale)
}

/// Computes all eigenvalues `μ_0..μ_d`.
pub fn spectrum<T: Scalar>(psi: &KernelPsi<T>, d: usize) -> Result<Spectrum<T>> {
    let mu = (0..=d)
        .map(|k| eigenvalue(psi, d, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(Spectrum { d, mu })
}

/// Checks that eigenvalues are non-increasing with degree, separately over
/// even and odd degrees: `μ_0 ≥ μ_2 ≥ …` and `μ_1 ≥ μ_3 ≥ …`.
pub fn verify_weak_ordering<T: Scalar>(s: &Spectrum<T>) -> OrderingCheck {
    let tol = T::from_f64_lossy(ORDERING_TOL);
    for k in 0..s.mu.len().saturating_sub(2) {
        if s.mu[k] < s.mu[k + 2] - tol {
            return OrderingCheck {
                holds: false,
                first_violation: Some((k, k + 2)),
            };
        }
    }
    OrderingCheck {
        holds: true,
        first_violation: None,
    }
}

/// Eigenfunction residual check against the explicit Gram matrix
/// `K(x, y) = Ψ(⟨x, y⟩/d)`: applies `K` to every `χ_U` and returns
/// `max_U ‖2^{-d}·K·χ_U − μ_{|U|}·χ_U‖_∞`.
pub fn gram_eigencheck<T: Scalar>(psi: &KernelPsi<T>, d: usize) -> Result<T> {
    if d == 0 || d > MAX_GRAM_DIM {
        return Err(CoreError::Capacity(format!(
            "dimension {d} outside 1..={MAX_GRAM_DIM} for the Gram check"
        )));
    }
    let n = 1usize << d;
    let dd = T::from_usize(d).unwrap();
    // K(x, y) depends only on x ^ y through the inner product
    // ⟨x, y⟩ = d − 2·popcount(x ^ y).
    let profile: Vec<T> = (0..n)
        .map(|z| {
            let ip = d as i64 - 2 * z.count_ones() as i64;
            psi.eval(T::from_i64(ip).unwrap() / dd)
        })
        .collect();
    let chi = |u: usize, x: usize| -> T {
        if (u & !x).count_ones() % 2 == 0 {
            T::one()
        } else {
            -T::one()
        }
    };
    let mu: Vec<T> = (0..=d)
        .map(|k| eigenvalue(psi, d, k))
        .collect::<Result<Vec<_>>>()?;
    let inv_n = T::one() / T::from_usize(n).unwrap();
    let worst = (0..n)
        .into_par_iter()
        .map(|u| {
            let mu_u = mu[u.count_ones() as usize];
            let mut max_res = T::zero();
            for x in 0..n {
                let mut acc = T::zero();
                for y in 0..n {
                    acc = acc + profile[x ^ y] * chi(u, y);
                }
                let res = (acc * inv_n - mu_u * chi(u, x)).abs();
                if res > max_res {
                    max_res = res;
                }
            }
            max_res
        })
        .reduce(T::zero, |a, b| if a > b { a } else { b });
    Ok(worst)
}

/// Rayleigh quotient `χ_Uᵀ K χ_U / 4^d` for the subset mask `u`; equals
/// `μ_{|U|}` when `χ_U` is an eigenfunction.
pub fn gram_rayleigh<T: Scalar>(psi: &KernelPsi<T>, d: usize, u: usize) -> Result<T> {
    if d == 0 || d > MAX_GRAM_DIM {
        return Err(CoreError::Capacity(format!(
            "dimension {d} outside 1..={MAX_GRAM_DIM} for the Gram check"
        )));
    }
    let n = 1usize << d;
    let dd = T::from_usize(d).unwrap();
    let profile: Vec<T> = (0..n)
        .map(|z| {
            let ip = d as i64 - 2 * z.count_ones() as i64;
            psi.eval(T::from_i64(ip).unwrap() / dd)
        })
        .collect();
    let chi = |u: usize, x: usize| -> T {
        if (u & !x).count_ones() % 2 == 0 {
            T::one()
        } else {
            -T::one()
        }
    };
    let mut acc = T::zero();
    for x in 0..n {
        let mut row = T::zero();
        for y in 0..n {
            row = row + profile[x ^ y] * chi(u, y);
        }
        acc = acc + chi(u, x) * row;
    }
    let inv_n = T::one() / T::from_usize(n).unwrap();
    Ok(acc * inv_n * inv_n)
}

/// All stacks of depth 1..=max_depth over the four primitive layers;
/// used by the ordering sweeps.
pub fn enumerate_stacks(max_depth: usize) -> Vec<Vec<Layer>> {
    let kinds = [
        Layer::Dense(Activation::Identity),
        Layer::Dense(Activation::Relu),
        Layer::Dense(Activation::Erf),
        Layer::LinearAttention,
    ];
    let mut stacks: Vec<Vec<Layer>> = Vec::new();
    let mut frontier: Vec<Vec<Layer>> = vec![vec![]];
    for _ in 0..max_depth {
        let mut next = Vec::new();
        for stack in &frontier {
            for &k in &kinds {
                let mut s = stack.clone();
                s.push(k);
                next.push(s);
            }
        }
        stacks.extend(next.iter().cloned());
        frontier = next;
    }
    stacks
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute-force oracle: enumerate all 2^d cube points and average
    /// `x^U · Ψ(mean(x))` directly. Independent of the combinatorial sum.
    fn brute_force_mu(psi: &KernelPsi<f64>, d: usize, k: usize) -> f64 {
        let n = 1usize << d;
        let mask = (1usize << k) - 1;
        let mut acc = 0.0;
        for x in 0..n {
            let ones = x.count_ones() as i64;
            let mean = (2 * ones - d as i64) as f64 / d as f64;
            let sign = if (mask & !x).count_ones() % 2 == 0 {
                1.0
            } else {
                -1.0
            };
            acc += sign * psi.eval(mean);
        }
        acc / n as f64
    }

    #[test]
    fn parse_layer_strings() {
        assert_eq!(
            parse_layers("dense:relu,attn,dense:relu").unwrap(),
            vec![
                Layer::Dense(Activation::Relu),
                Layer::LinearAttention,
                Layer::Dense(Activation::Relu)
            ]
        );
        assert!(matches!(
            parse_layers("dense:tanh").unwrap_err(),
            CoreError::Config(_)
        ));
    }

    #[test]
    fn ck_identity_and_attention() {
        let psi: KernelPsi<f64> = compose_ck(&[Layer::Dense(Activation::Identity)]).unwrap();
        assert_eq!(psi.eval(1.0), 1.0);
        assert_eq!(psi.eval(0.0), 0.0);

        let cube: KernelPsi<f64> = compose_ck(&[Layer::LinearAttention]).unwrap();
        assert_eq!(cube.eval(-1.0), -1.0);
        assert_eq!(cube.eval(0.5), 0.125);
    }

    #[test]
    fn ck_relu_dual_value_and_monte_carlo() {
        let psi: KernelPsi<f64> = compose_ck(&[Layer::Dense(Activation::Relu)]).unwrap();
        assert!((psi.eval(0.0) - 1.0 / std::f64::consts::PI).abs() < 1e-15);
        assert!((psi.eval(1.0) - 1.0).abs() < 1e-12);

        // Monte Carlo oracle: 2·E[relu(u)·relu(v)] over correlated
        // standard Gaussians (the factor 2 normalizes E[relu(u)^2] = 1/2).
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for &c in &[-0.7, 0.0, 0.3, 0.9] {
            let mut acc = 0.0;
            let n = 1_000_000;
            for _ in 0..n {
                let z1: f64 = StandardNormal.sample(&mut rng);
                let z2: f64 = StandardNormal.sample(&mut rng);
                let u = z1;
                let v = c * z1 + (1.0 - c * c).sqrt() * z2;
                acc += u.max(0.0) * v.max(0.0);
            }
            let mc = 2.0 * acc / n as f64;
            assert!(
                (mc - psi.eval(c)).abs() < 3e-3,
                "c={c}: mc={mc} vs analytic={}",
                psi.eval(c)
            );
        }
    }

    #[test]
    fn ntk_recursion_examples() {
        let theta: KernelPsi<f64> = compose_ntk(&[Layer::Dense(Activation::Identity)]).unwrap();
        for &c in &[-1.0, -0.3, 0.0, 0.8, 1.0] {
            assert!((theta.eval(c) - 2.0 * c).abs() < 1e-15);
        }

        let theta: KernelPsi<f64> = compose_ntk(&[Layer::LinearAttention]).unwrap();
        for &c in &[-1.0, -0.3, 0.0, 0.8, 1.0] {
            assert!((theta.eval(c) - 4.0 * c * c * c).abs() < 1e-15);
        }
    }

    #[test]
    fn ntk_exceeds_ck_at_one() {
        for stack in enumerate_stacks(3) {
            let ck: KernelPsi<f64> = compose_ck(&stack).unwrap();
            let ntk: KernelPsi<f64> = compose_ntk(&stack).unwrap();
            assert!(
                ntk.eval(1.0) > ck.eval(1.0),
                "stack {stack:?}: ntk(1)={} ck(1)={}",
                ntk.eval(1.0),
                ck.eval(1.0)
            );
        }
    }

    #[test]
    fn empty_stack_rejected() {
        assert!(matches!(
            compose_ck::<f64>(&[]).unwrap_err(),
            CoreError::Config(_)
        ));
    }

    #[test]
    fn primitive_psd_sanity() {
        let prims: Vec<KernelPsi<f64>> = vec![
            compose_ck(&[Layer::Dense(Activation::Identity)]).unwrap(),
            compose_ck(&[Layer::Dense(Activation::Relu)]).unwrap(),
            compose_ck(&[Layer::Dense(Activation::Erf)]).unwrap(),
            compose_ck(&[Layer::LinearAttention]).unwrap(),
        ];
        for p in prims {
            assert!(p.psd_sanity(101));
        }
    }

    #[test]
    fn eigenvalue_linear_profile() {
        let psi: KernelPsi<f64> = KernelPsi::input();
        for k in 0..=8usize {
            let mu = eigenvalue(&psi, 8, k).unwrap();
            let expect = if k == 1 { 0.125 } else { 0.0 };
            assert!((mu - expect).abs() < 1e-15, "k={k}: {mu}");
            assert!((mu - brute_force_mu(&psi, 8, k)).abs() < 1e-14);
        }
    }

    #[test]
    fn eigenvalue_square_profile() {
        let psi: KernelPsi<f64> = KernelPsi::input().powi(2);
        assert!((eigenvalue(&psi, 8, 0).unwrap() - 0.125).abs() < 1e-15);
        assert!((eigenvalue(&psi, 8, 2).unwrap() - 0.03125).abs() < 1e-15);
        for k in [1usize, 3, 5] {
            assert!(eigenvalue(&psi, 8, k).unwrap().abs() < 1e-15);
        }
        for k in 0..=8usize {
            let mu = eigenvalue(&psi, 8, k).unwrap();
            assert!((mu - brute_force_mu(&psi, 8, k)).abs() < 1e-14);
        }
    }

    #[test]
    fn eigenvalue_constant_profile() {
        let psi: KernelPsi<f64> = KernelPsi::constant(1.0);
        assert!((eigenvalue(&psi, 11, 0).unwrap() - 1.0).abs() < 1e-15);
        for k in 1..=11usize {
            assert!(eigenvalue(&psi, 11, k).unwrap().abs() < 1e-15);
        }
    }

    #[test]
    fn eigenvalue_domain_errors() {
        let psi: KernelPsi<f64> = KernelPsi::input();
        assert!(matches!(
            eigenvalue(&psi, 4, 5).unwrap_err(),
            CoreError::Domain(_)
        ));
        assert!(matches!(
            eigenvalue(&psi, MAX_EIGEN_DIM + 1, 0).unwrap_err(),
            CoreError::Capacity(_)
        ));
    }

    #[test]
    fn spectrum_examples() {
        let s = spectrum(&KernelPsi::<f64>::input(), 4).unwrap();
        let expect = [0.0, 0.25, 0.0, 0.0, 0.0];
        for (a, b) in s.mu.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }

        // Odd profile: even-degree eigenvalues vanish and μ1 ≥ μ3 > 0.
        let cube = KernelPsi::<f64>::input().powi(3);
        let s = spectrum(&cube, 4).unwrap();
        assert!(s.mu[0].abs() < 1e-15 && s.mu[2].abs() < 1e-15 && s.mu[4].abs() < 1e-15);
        assert!(s.mu[1] >= s.mu[3] && s.mu[3] > 0.0);
        for (k, &mu) in s.mu.iter().enumerate() {
            assert!((mu - brute_force_mu(&cube, 4, k)).abs() < 1e-14);
        }

        // Linearity of μ_k in Ψ: Ψ(c) = 1 + c on d = 3.
        let affine = KernelPsi::<f64>::constant(1.0).add(&KernelPsi::input());
        let s = spectrum(&affine, 3).unwrap();
        let expect = [1.0, 1.0 / 3.0, 0.0, 0.0];
        for (a, b) in s.mu.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn ordering_check_semantics() {
        let ok = Spectrum {
            d: 3,
            mu: vec![1.0, 0.5, 0.2, 0.4],
        };
        let check = verify_weak_ordering(&ok);
        assert!(check.holds && check.first_violation.is_none());

        let bad = Spectrum {
            d: 3,
            mu: vec![0.1, 0.0, 0.2, 0.0],
        };
        let check = verify_weak_ordering(&bad);
        assert!(!check.holds);
        assert_eq!(check.first_violation, Some((0, 2)));
    }

    #[test]
    fn ordering_for_attention_sandwich() {
        let stack = [
            Layer::Dense(Activation::Relu),
            Layer::LinearAttention,
            Layer::Dense(Activation::Relu),
        ];
        let psi: KernelPsi<f64> = compose_ck(&stack).unwrap();
        let s = spectrum(&psi, 16).unwrap();
        assert!(verify_weak_ordering(&s).holds);
    }

    #[test]
    fn gram_check_small_profiles() {
        let linear: KernelPsi<f64> = KernelPsi::input();
        assert!(gram_eigencheck(&linear, 6).unwrap() < 1e-10);

        let cube = KernelPsi::<f64>::input().powi(3);
        assert!(gram_eigencheck(&cube, 8).unwrap() < 1e-8);

        let constant = KernelPsi::<f64>::constant(2.5);
        assert!(gram_eigencheck(&constant, 4).unwrap() < 1e-12);
    }

    #[test]
    fn gram_capacity_guard() {
        let psi: KernelPsi<f64> = KernelPsi::input();
        assert!(matches!(
            gram_eigencheck(&psi, MAX_GRAM_DIM + 1).unwrap_err(),
            CoreError::Capacity(_)
        ));
    }
}

//! Fourier analysis and sensitivity measures for functions on the Boolean
//! cube `{±1}^d`.
//!
//! Input indexing convention (fixed throughout the crate): the table index
//! `i` encodes the input `x` bit-by-bit, with bit `j` of `i` giving
//! coordinate `x_{j+1}`, and a *set* bit meaning `+1`. Subsets `U ⊆ [d]`
//! are encoded the same way as bitmasks, so `degree` of a mask is its
//! popcount.

use crate::error::{CoreError, Result};
use crate::scalar::{sign_pm, Scalar};

/// Largest dimension accepted by the transforms; `2^24` doubles is the
/// practical desk-scale memory bound.
pub const MAX_TRANSFORM_DIM: usize = 24;

/// Coefficients with magnitude below this are treated as zero when
/// computing the degree. Double-precision transform error stays far below
/// this for every dimension the capacity guard admits.
pub const COEFF_ZERO_TOL: f64 = 1e-9;

/// A real-valued function on `{±1}^d`, stored as a truth table of length
/// `2^d`. For ±1-valued functions the entries are restricted to `{-1, +1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BooleanFunction<T> {
    d: usize,
    values: Vec<T>,
}

/// Fourier coefficients of a function on `{±1}^d`, indexed by the subset
/// bitmask `U`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierCoefficients<T> {
    d: usize,
    coeffs: Vec<T>,
}

fn check_dim(d: usize) -> Result<()> {
    if d > MAX_TRANSFORM_DIM {
        return Err(CoreError::Capacity(format!(
            "dimension {d} exceeds the maximum {MAX_TRANSFORM_DIM}"
        )));
    }
    Ok(())
}

impl<T: Scalar> BooleanFunction<T> {
    /// Builds a function from its truth table; the length must be `2^d`.
    pub fn new(d: usize, values: Vec<T>) -> Result<Self> {
        check_dim(d)?;
        if values.len() != 1 << d {
            return Err(CoreError::Config(format!(
                "table length {} is not 2^{d}",
                values.len()
            )));
        }
        Ok(Self { d, values })
    }

    /// Builds a ±1-valued function from an evaluation on sign vectors.
    /// `x[j]` is the coordinate `x_{j+1} ∈ {−1,+1}`.
    pub fn from_fn(d: usize, f: impl Fn(&[i8]) -> T) -> Result<Self> {
        check_dim(d)?;
        let mut x = vec![-1i8; d];
        let values = (0..1usize << d)
            .map(|i| {
                for (j, xj) in x.iter_mut().enumerate() {
                    *xj = if i >> j & 1 == 1 { 1 } else { -1 };
                }
                f(&x)
            })
            .collect();
        Ok(Self { d, values })
    }

    /// Builds a ±1-valued function from a sign mask: bit `i` of `bits` set
    /// means `f` maps input index `i` to `+1`. Handy for exhaustive sweeps
    /// over all `2^(2^d)` functions at small `d`.
    pub fn from_sign_mask(d: usize, bits: u64) -> Result<Self> {
        if d > 6 {
            return Err(CoreError::Capacity(format!(
                "sign mask only covers d ≤ 6, got {d}"
            )));
        }
        let values = (0..1u64 << d)
            .map(|i| {
                if bits >> i & 1 == 1 {
                    T::one()
                } else {
                    -T::one()
                }
            })
            .collect();
        Self::new(d, values)
    }

    /// Parity `χ_[d]`: the product of all coordinates.
    pub fn parity(d: usize) -> Result<Self> {
        Self::from_fn(d, |x| {
            let neg = x.iter().filter(|&&b| b < 0).count();
            if neg % 2 == 0 {
                T::one()
            } else {
                -T::one()
            }
        })
    }

    /// Dictator `x_{coord+1}` (0-based `coord`).
    pub fn dictator(d: usize, coord: usize) -> Result<Self> {
        if coord >= d {
            return Err(CoreError::Domain(format!(
                "dictator coordinate {coord} out of range for d={d}"
            )));
        }
        Self::from_fn(d, |x| {
            if x[coord] > 0 {
                T::one()
            } else {
                -T::one()
            }
        })
    }

    /// Majority vote `sign(Σ x_i)` with ties (even `d`) resolved to `+1`.
    pub fn majority(d: usize) -> Result<Self> {
        Self::from_fn(d, |x| {
            let s: i32 = x.iter().map(|&b| b as i32).sum();
            if s >= 0 {
                T::one()
            } else {
                -T::one()
            }
        })
    }

    /// Constant function.
    pub fn constant(d: usize, value: T) -> Result<Self> {
        check_dim(d)?;
        Ok(Self {
            d,
            values: vec![value; 1 << d],
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// True if every entry is ±1 within `tol`.
    pub fn is_pm_one(&self, tol: T) -> bool {
        self.values
            .iter()
            .all(|&v| (v.abs() - T::one()).abs() <= tol)
    }

    /// Number of coordinate flips of input `x` (a table index) that change
    /// the sign of the output. Real-valued tables compare via
    /// `sign(0) = +1`.
    pub fn sensitivity_at(&self, x: usize) -> Result<usize> {
        if x >= self.values.len() {
            return Err(CoreError::Domain(format!(
                "input index {x} out of range for d={}",
                self.d
            )));
        }
        let s = sign_pm(self.values[x]);
        Ok((0..self.d)
            .filter(|j| sign_pm(self.values[x ^ (1 << j)]) != s)
            .count())
    }

    /// Average sensitivity `S(f) = 2^{-d} Σ_x S(f, x)`.
    pub fn average_sensitivity(&self) -> T {
        let total: usize = (0..self.values.len())
            .map(|x| self.sensitivity_at(x).expect("index in range"))
            .sum();
        T::from_usize(total).unwrap() / T::from_usize(self.values.len()).unwrap()
    }

    /// Normalized average sensitivity `S(f)/d ∈ [0, 1]`.
    pub fn normalized_sensitivity(&self) -> T {
        if self.d == 0 {
            return T::zero();
        }
        self.average_sensitivity() / T::from_usize(self.d).unwrap()
    }

    /// Largest sensitivity over all inputs.
    pub fn max_sensitivity(&self) -> usize {
        (0..self.values.len())
            .map(|x| self.sensitivity_at(x).expect("index in range"))
            .max()
            .unwrap_or(0)
    }

    /// Fourier degree: the largest `|U|` carrying a coefficient above the
    /// zero tolerance.
    pub fn degree(&self) -> Result<usize> {
        Ok(fourier_transform(self)?.degree())
    }

    /// Checks `D(f) ≤ S_max(f)^2`.
    pub fn huang_bound_holds(&self) -> Result<bool> {
        let s_max = self.max_sensitivity();
        Ok(self.degree()? <= s_max * s_max)
    }
}

impl<T: Scalar> FourierCoefficients<T> {
    /// Builds a coefficient table directly; the length must be `2^d`.
    pub fn new(d: usize, coeffs: Vec<T>) -> Result<Self> {
        check_dim(d)?;
        if coeffs.len() != 1 << d {
            return Err(CoreError::Config(format!(
                "coefficient table length {} is not 2^{d}",
                coeffs.len()
            )));
        }
        Ok(Self { d, coeffs })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    /// Coefficient of the subset encoded by `mask`.
    pub fn coeff(&self, mask: usize) -> T {
        self.coeffs[mask]
    }

    /// `Σ_U f̂(U)^2`; equals 1 for ±1-valued source functions.
    pub fn parseval_sum(&self) -> T {
        self.coeffs.iter().map(|&c| c * c).sum()
    }

    /// Total influence `Σ_U |U| · f̂(U)^2`.
    pub fn total_influence(&self) -> T {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(u, &c)| T::from_u32(u.count_ones()).unwrap() * c * c)
            .sum()
    }

    /// Largest `|U|` with `|f̂(U)|` above the zero tolerance.
    pub fn degree(&self) -> usize {
        let tol = T::from_f64_lossy(COEFF_ZERO_TOL);
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, &c)| c.abs() > tol)
            .map(|(u, _)| u.count_ones() as usize)
            .max()
            .unwrap_or(0)
    }
}

/// In-place butterfly with per-bit matrix [[1, 1], [-1, 1]]: computes
/// `out[u] = Σ_i χ_U(x_i)·v[i]` under the set-bit-means-+1 convention.
fn butterfly_analysis<T: Scalar>(v: &mut [T]) {
    let n = v.len();
    let mut h = 1;
    while h < n {
        let mut i = 0;
        while i < n {
            for j in i..i + h {
                let (a, b) = (v[j], v[j + h]);
                v[j] = a + b;
                v[j + h] = b - a;
            }
            i += 2 * h;
        }
        h *= 2;
    }
}

/// Transposed butterfly with per-bit matrix [[1, -1], [1, 1]]: evaluates
/// the multilinear polynomial `Σ_U c[U]·χ_U(x)` at every input.
fn butterfly_synthesis<T: Scalar>(v: &mut [T]) {
    let n = v.len();
    let mut h = 1;
    while h < n {
        let mut i = 0;
        while i < n {
            for j in i..i + h {
                let (a, b) = (v[j], v[j + h]);
                v[j] = a - b;
                v[j + h] = a + b;
            }
            i += 2 * h;
        }
        h *= 2;
    }
}

/// Fourier transform `f̂(U) = E_x[f(x)·χ_U(x)]` via the fast
/// Walsh–Hadamard butterfly with `2^{-d}` normalization.
pub fn fourier_transform<T: Scalar>(f: &BooleanFunction<T>) -> Result<FourierCoefficients<T>> {
    check_dim(f.d)?;
    let mut coeffs = f.values.clone();
    butterfly_analysis(&mut coeffs);
    let scale = T::one() / T::from_usize(coeffs.len()).unwrap();
    for c in &mut coeffs {
        *c = *c * scale;
    }
    Ok(FourierCoefficients { d: f.d, coeffs })
}

/// Inverse transform: reconstructs the truth table from coefficients.
/// Exact round trip with [`fourier_transform`] up to float rounding.
pub fn inverse_transform<T: Scalar>(c: &FourierCoefficients<T>) -> Result<BooleanFunction<T>> {
    check_dim(c.d)?;
    let mut values = c.coeffs.clone();
    butterfly_synthesis(&mut values);
    Ok(BooleanFunction { d: c.d, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle: direct `E_x[f(x)·χ_U(x)]` with χ evaluated from
    /// the bit convention, no butterfly involved. O(4^d).
    fn naive_transform(f: &BooleanFunction<f64>) -> Vec<f64> {
        let n = f.values().len();
        (0..n)
            .map(|u| {
                let mut acc = 0.0;
                for (i, &v) in f.values().iter().enumerate() {
                    // χ_U(x_i) = Π_{j∈U} x_{j+1}; clear bit means −1.
                    let neg = (u & !i).count_ones();
                    acc += if neg % 2 == 0 { v } else { -v };
                }
                acc / n as f64
            })
            .collect()
    }

    fn maj3() -> BooleanFunction<f64> {
        BooleanFunction::majority(3).unwrap()
    }

    #[test]
    fn transform_constant_plus_one() {
        let f = BooleanFunction::constant(2, 1.0).unwrap();
        let c = fourier_transform(&f).unwrap();
        assert_eq!(c.coeff(0), 1.0);
        for u in 1..4 {
            assert_eq!(c.coeff(u), 0.0);
        }
    }

    #[test]
    fn transform_dictator() {
        let f = BooleanFunction::<f64>::dictator(3, 0).unwrap();
        let c = fourier_transform(&f).unwrap();
        for u in 0..8 {
            let expect = if u == 0b001 { 1.0 } else { 0.0 };
            assert_eq!(c.coeff(u), expect, "mask {u}");
        }
    }

    #[test]
    fn transform_majority_matches_naive_oracle() {
        let f = maj3();
        let oracle = naive_transform(&f);
        // Frozen values from the oracle: 1/2 on singletons, −1/2 on the
        // full set, zero elsewhere.
        for (u, &c) in oracle.iter().enumerate() {
            let expect = match u.count_ones() {
                1 => 0.5,
                3 => -0.5,
                _ => 0.0,
            };
            assert_eq!(c, expect, "oracle mask {u}");
        }
        let fast = fourier_transform(&f).unwrap();
        for u in 0..8 {
            assert!((fast.coeff(u) - oracle[u]).abs() < 1e-12);
        }
    }

    #[test]
    fn inverse_of_explicit_coefficients() {
        // {∅: 1} → constant +1.
        let c = FourierCoefficients::new(2, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let f = inverse_transform(&c).unwrap();
        assert!(f.values().iter().all(|&v| v == 1.0));

        // Majority coefficients → majority table, evaluated independently
        // by the synthesis butterfly.
        let mut coeffs = vec![0.0; 8];
        coeffs[0b001] = 0.5;
        coeffs[0b010] = 0.5;
        coeffs[0b100] = 0.5;
        coeffs[0b111] = -0.5;
        let c = FourierCoefficients::new(3, coeffs).unwrap();
        let f = inverse_transform(&c).unwrap();
        assert_eq!(f.values(), maj3().values());
    }

    #[test]
    fn round_trip_majority() {
        let f = maj3();
        let back = inverse_transform(&fourier_transform(&f).unwrap()).unwrap();
        for (a, b) in back.values().iter().zip(f.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn sensitivity_examples() {
        let parity = BooleanFunction::<f64>::parity(4).unwrap();
        for x in 0..16 {
            assert_eq!(parity.sensitivity_at(x).unwrap(), 4);
        }
        let constant = BooleanFunction::constant(3, -1.0).unwrap();
        for x in 0..8 {
            assert_eq!(constant.sensitivity_at(x).unwrap(), 0);
        }
        // MAJ_3 at (+1, +1, −1): flipping either +1 flips the output,
        // flipping the −1 does not.
        let x = 0b011;
        assert_eq!(maj3().sensitivity_at(x).unwrap(), 2);
    }

    #[test]
    fn average_and_normalized_sensitivity() {
        let parity = BooleanFunction::<f64>::parity(5).unwrap();
        assert_eq!(parity.average_sensitivity(), 5.0);
        assert_eq!(parity.normalized_sensitivity(), 1.0);

        let dictator = BooleanFunction::<f64>::dictator(4, 0).unwrap();
        assert_eq!(dictator.average_sensitivity(), 1.0);
        assert_eq!(dictator.normalized_sensitivity(), 0.25);

        // Brute-force oracle over all 8 inputs gives 12/8 = 1.5.
        let oracle: usize = (0..8).map(|x| maj3().sensitivity_at(x).unwrap()).sum();
        assert_eq!(oracle, 12);
        assert_eq!(maj3().average_sensitivity(), 1.5);
    }

    #[test]
    fn total_influence_examples() {
        let parity = fourier_transform(&BooleanFunction::<f64>::parity(5).unwrap()).unwrap();
        assert!((parity.total_influence() - 5.0).abs() < 1e-12);
        let dict = fourier_transform(&BooleanFunction::<f64>::dictator(3, 1).unwrap()).unwrap();
        assert!((dict.total_influence() - 1.0).abs() < 1e-12);
        let maj = fourier_transform(&maj3()).unwrap();
        assert!((maj.total_influence() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn degree_and_huang_examples() {
        let parity = BooleanFunction::<f64>::parity(3).unwrap();
        assert_eq!(parity.degree().unwrap(), 3);
        assert_eq!(parity.max_sensitivity(), 3);
        assert!(parity.huang_bound_holds().unwrap());

        let dict = BooleanFunction::<f64>::dictator(4, 2).unwrap();
        assert_eq!(dict.degree().unwrap(), 1);
        assert_eq!(dict.max_sensitivity(), 1);
        assert!(dict.huang_bound_holds().unwrap());
    }

    #[test]
    fn capacity_guard() {
        let err = BooleanFunction::<f64>::constant(MAX_TRANSFORM_DIM + 1, 1.0).unwrap_err();
        assert!(matches!(err, CoreError::Capacity(_)));
    }

    #[test]
    fn table_length_validation() {
        let err = BooleanFunction::new(3, vec![1.0; 7]).unwrap_err();
        assert!(matches!(err, CoreError::Config(_)));
    }
}

//! Complex Taylor-polynomial dispersion seen by each polarization branch.
//!
//! Each branch accumulates a phase `kappa(omega) = sum_n k_n (omega - center)^n`
//! on the way to Bob (`to`) and on the way back (`from`). A positive imaginary
//! part is attenuation. The `diag` branch is the +45 degree polarization and
//! `anti` the -45 degree one.

use num_complex::Complex;

use crate::scalar::{two, Real};

/// Polynomial in the detuning from the profile center, complex coefficients.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polynomial<T> {
    coeffs: Vec<Complex<T>>,
}

impl<T: Real> Polynomial<T> {
    pub fn new(coeffs: Vec<Complex<T>>) -> Self {
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn real(coeffs: &[T]) -> Self {
        Self {
            coeffs: coeffs.iter().map(|&c| Complex::new(c, T::zero())).collect(),
        }
    }

    /// Single term `k * x^order`.
    pub fn monomial(order: usize, k: Complex<T>) -> Self {
        let mut coeffs = vec![Complex::new(T::zero(), T::zero()); order + 1];
        coeffs[order] = k;
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[Complex<T>] {
        &self.coeffs
    }

    /// Highest order with a stored coefficient (zero for the empty polynomial).
    pub fn max_order(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn coeff(&self, n: usize) -> Complex<T> {
        self.coeffs
            .get(n)
            .copied()
            .unwrap_or_else(|| Complex::new(T::zero(), T::zero()))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_zero() && c.im.is_zero())
    }

    pub fn eval(&self, x: T) -> Complex<T> {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex::new(T::zero(), T::zero()), |acc, &c| acc * x + c)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, k: T) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|&c| c * k).collect(),
        }
    }

    /// Odd-order terms only.
    pub fn odd_part(&self) -> Self {
        let zero = Complex::new(T::zero(), T::zero());
        Self {
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .map(|(n, &c)| if n % 2 == 1 { c } else { zero })
                .collect(),
        }
    }

    /// Largest coefficient-wise modulus of `self - other`.
    pub fn max_deviation(&self, other: &Self) -> T {
        self.sub(other).coeffs.iter().map(|c| c.norm()).fold(T::zero(), T::max)
    }

    fn zip_with<F: Fn(Complex<T>, Complex<T>) -> Complex<T>>(&self, other: &Self, f: F) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        Self {
            coeffs: (0..n).map(|i| f(self.coeff(i), other.coeff(i))).collect(),
        }
    }
}

/// Outcome of a dispersion condition check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionCheck<T> {
    pub holds: bool,
    /// Largest coefficient deviation that entered the decision.
    pub residual: T,
}

/// Dispersion of both branches in both directions.
#[derive(Debug, Clone, PartialEq)]
pub struct DispersionProfile<T = f64> {
    /// Expansion frequency (rad/s).
    pub center: T,
    pub diag_to: Polynomial<T>,
    pub diag_from: Polynomial<T>,
    pub anti_to: Polynomial<T>,
    pub anti_from: Polynomial<T>,
}

impl<T: Real> DispersionProfile<T> {
    /// Dispersion-free medium.
    pub fn none(center: T) -> Self {
        Self {
            center,
            diag_to: Polynomial::zero(),
            diag_from: Polynomial::zero(),
            anti_to: Polynomial::zero(),
            anti_from: Polynomial::zero(),
        }
    }

    /// Both branches see `to` on the way out and `from` on the way back.
    pub fn common(center: T, to: Polynomial<T>, from: Polynomial<T>) -> Self {
        Self {
            center,
            diag_to: to.clone(),
            diag_from: from.clone(),
            anti_to: to,
            anti_from: from,
        }
    }

    /// Adds the same phase to both branches (on the outbound leg).
    pub fn with_common(&self, extra: &Polynomial<T>) -> Self {
        Self {
            diag_to: self.diag_to.add(extra),
            anti_to: self.anti_to.add(extra),
            ..self.clone()
        }
    }

    /// Composite `kappa_diag = diag_to + diag_from`.
    pub fn diag(&self) -> Polynomial<T> {
        self.diag_to.add(&self.diag_from)
    }

    /// Composite `kappa_anti = anti_to + anti_from`.
    pub fn anti(&self) -> Polynomial<T> {
        self.anti_to.add(&self.anti_from)
    }

    pub fn max_order(&self) -> usize {
        [&self.diag_to, &self.diag_from, &self.anti_to, &self.anti_from]
            .iter()
            .map(|p| p.max_order())
            .max()
            .unwrap_or(0)
    }

    /// `kappa_anti - kappa_diag` as a polynomial; common terms cancel exactly.
    pub fn difference(&self) -> Polynomial<T> {
        self.anti().sub(&self.diag())
    }

    /// Classical immunity: both composites equal coefficient by coefficient.
    pub fn immunity_check(&self, tolerance: T) -> ConditionCheck<T> {
        let residual = self.diag().max_deviation(&self.anti());
        ConditionCheck {
            holds: residual <= tolerance,
            residual,
        }
    }

    /// Quantum cancellation: only odd-order coefficients have to agree.
    pub fn quantum_check(&self, tolerance: T) -> ConditionCheck<T> {
        let residual = self.diag().odd_part().max_deviation(&self.anti().odd_part());
        ConditionCheck {
            holds: residual <= tolerance,
            residual,
        }
    }

    /// Residual phase left in the coincidence amplitude at detuning `x`,
    /// `[k_d(c+x) + k_a(c-x)] - [k_d(c-x) + k_a(c+x)] = 2 (odd_d - odd_a)(x)`.
    pub fn quantum_residual_poly(&self) -> Polynomial<T> {
        self.diag().sub(&self.anti()).odd_part().scale(two::<T>())
    }
}

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{HeError, Result};
use crate::slotvec::{CipherHandle, Evaluator, SlotVector};

/// Degree-8 LeakyReLU fit, constant term first.
pub const LEAKY_RELU_COEFFS: [f64; 9] = [0.02, 0.51, 1.60, 0.28, -4.10, -0.51, 5.32, 0.28, -2.42];

/// Real polynomial, constant term first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PolyCoeffs {
    coeffs: Vec<f64>,
}

impl TryFrom<Vec<f64>> for PolyCoeffs {
    type Error = HeError;

    fn try_from(coeffs: Vec<f64>) -> Result<Self> {
        Self::new(coeffs)
    }
}

impl From<PolyCoeffs> for Vec<f64> {
    fn from(p: PolyCoeffs) -> Self {
        p.coeffs
    }
}

impl PolyCoeffs {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() < 2 {
            return Err(HeError::Config("polynomial degree must be at least 1".into()));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(HeError::Config("polynomial coefficients must be finite".into()));
        }
        Ok(Self { coeffs })
    }

    /// Odd polynomial from `(power, numerator)` pairs over a common
    /// denominator.
    fn odd(terms: &[(usize, f64)], denominator: f64) -> Self {
        let degree = terms.iter().map(|t| t.0).max().unwrap_or(1);
        let mut coeffs = vec![0.0; degree + 1];
        for &(k, num) in terms {
            coeffs[k] = num / denominator;
        }
        Self { coeffs }
    }

    pub fn leaky_relu() -> Self {
        Self {
            coeffs: LEAKY_RELU_COEFFS.to_vec(),
        }
    }

    /// The sign-sharpening polynomial `g_n` (coefficients over 2^10).
    pub fn g(n: u32) -> Result<Self> {
        let terms: &[(usize, f64)] = match n {
            1 => &[(1, 2126.0), (3, -1359.0)],
            2 => &[(1, 3334.0), (3, -6108.0), (5, 3796.0)],
            3 => &[(1, 4589.0), (3, -16577.0), (5, 25614.0), (7, -12860.0)],
            4 => &[(1, 5850.0), (3, -34974.0), (5, 97015.0), (7, -113492.0), (9, 46623.0)],
            _ => return Err(HeError::Config(format!("g_{n} is not defined, use 1..=4"))),
        };
        Ok(Self::odd(terms, 1024.0))
    }

    /// The polynomial `f_n`, which fixes +-1 and converges to the sign.
    pub fn f(n: u32) -> Result<Self> {
        let (terms, den): (&[(usize, f64)], f64) = match n {
            1 => (&[(1, 3.0), (3, -1.0)], 2.0),
            2 => (&[(1, 15.0), (3, -10.0), (5, 3.0)], 8.0),
            3 => (&[(1, 35.0), (3, -35.0), (5, 21.0), (7, -5.0)], 16.0),
            4 => (&[(1, 315.0), (3, -420.0), (5, 378.0), (7, -180.0), (9, 35.0)], 128.0),
            _ => return Err(HeError::Config(format!("f_{n} is not defined, use 1..=4"))),
        };
        Ok(Self::odd(terms, den))
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Levels consumed by [`poly_eval`]: the power basis depth plus one
    /// plaintext coefficient multiplication.
    pub fn depth(&self) -> u32 {
        ceil_log2(self.degree()) + 1
    }

    /// Monomials that [`poly_eval`] multiplies and sums: every nonzero
    /// coefficient above the constant, and always the leading one.
    fn terms(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        let degree = self.degree();
        self.coeffs
            .iter()
            .copied()
            .enumerate()
            .skip(1)
            .filter(move |&(k, c)| c != 0.0 || k == degree)
    }

    /// Horner evaluation. Used as an independent oracle.
    pub fn horner(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }
}

pub(crate) fn ceil_log2(k: usize) -> u32 {
    if k <= 1 {
        0
    } else {
        usize::BITS - (k - 1).leading_zeros()
    }
}

/// Split rule of the power basis: `x^k = x^(2^a) * x^(k - 2^a)` with `2^a`
/// the largest power of two below `k`, or `x^k = (x^(k/2))^2` when `k` is a
/// power of two. The depth of `x^k` is `ceil(log2 k)`.
fn split(k: usize) -> (usize, usize) {
    if k.is_power_of_two() {
        (k / 2, k / 2)
    } else {
        let high = 1usize << (usize::BITS - 1 - k.leading_zeros());
        (high, k - high)
    }
}

fn power<T: Clone>(
    k: usize,
    cache: &mut BTreeMap<usize, T>,
    mul: &mut dyn FnMut(&T, &T) -> Result<T>,
) -> Result<T> {
    if let Some(p) = cache.get(&k) {
        return Ok(p.clone());
    }
    let (a, b) = split(k);
    let pa = power(a, cache, mul)?;
    let pb = power(b, cache, mul)?;
    let p = mul(&pa, &pb)?;
    cache.insert(k, p.clone());
    Ok(p)
}

/// Slot-wise polynomial evaluation through the binary power basis.
/// Consumes `ceil(log2 degree) + 1` levels.
pub fn poly_eval(ev: &dyn Evaluator, c: &CipherHandle, p: &PolyCoeffs) -> Result<CipherHandle> {
    if c.level() < p.depth() {
        return Err(ev.params().depth_error(p.depth(), c.level()));
    }
    let n = c.slot_count();
    let mut cache = BTreeMap::from([(1usize, c.clone())]);
    let mut acc: Option<CipherHandle> = None;
    for (k, coeff) in p.terms() {
        let xk = power(k, &mut cache, &mut |a, b| ev.mult(a, b))?;
        let term = ev.mult_plain(&xk, &SlotVector::constant(coeff, n)?)?;
        acc = Some(match acc {
            None => term,
            Some(a) => ev.add(&a, &term)?,
        });
    }
    let acc = acc.expect("leading term is always present");
    let c0 = p.coeffs[0];
    if c0 != 0.0 {
        ev.add_plain(&acc, &SlotVector::constant(c0, n)?)
    } else {
        Ok(acc)
    }
}

/// Scalar image of [`poly_eval`] with the identical operation order, so it
/// reproduces the noise-free clear backend bit for bit.
pub fn poly_eval_scalar(x: f64, p: &PolyCoeffs) -> f64 {
    let mut cache = BTreeMap::from([(1usize, x)]);
    let mut acc: Option<f64> = None;
    for (k, coeff) in p.terms() {
        let xk = power(k, &mut cache, &mut |a, b| Ok(a * b)).expect("scalar products cannot fail");
        let term = xk * coeff;
        acc = Some(match acc {
            None => term,
            Some(a) => a + term,
        });
    }
    let acc = acc.expect("leading term is always present");
    let c0 = p.coeffs[0];
    if c0 != 0.0 {
        acc + c0
    } else {
        acc
    }
}

/// Degree-8 LeakyReLU approximation. Intended for inputs in [-1, 1]; outside
/// that range the `x^8` term dominates.
pub fn leaky_relu_approx(ev: &dyn Evaluator, c: &CipherHandle) -> Result<CipherHandle> {
    poly_eval(ev, c, &PolyCoeffs::leaky_relu())
}

pub fn leaky_relu_approx_scalar(x: f64) -> f64 {
    poly_eval_scalar(x, &PolyCoeffs::leaky_relu())
}

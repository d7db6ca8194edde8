use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{FromPrimitive, ToPrimitive};

use super::ring::RingPoly;
use crate::error::{HeError, Result};
use crate::slotvec::SlotVector;

/// Canonical-embedding encoder for `n = N/2` complex slots.
///
/// Slot `j` of a polynomial `m` is `m(zeta^(5^j))` with `zeta = exp(i pi / N)`,
/// so the Galois map `X -> X^(5^k)` moves slot `j + k` into slot `j`.
#[derive(Debug, Clone)]
pub struct Encoder {
    slots: usize,
    /// 2N, the order of zeta.
    m: usize,
    rot_group: Vec<usize>,
    ksi_pows: Vec<Complex64>,
}

impl Encoder {
    pub fn new(degree: usize) -> Self {
        let slots = degree / 2;
        let m = 2 * degree;
        let mut rot_group = Vec::with_capacity(slots);
        let mut g = 1usize;
        for _ in 0..slots {
            rot_group.push(g);
            g = (g * 5) % m;
        }
        let ksi_pows = (0..=m)
            .map(|k| {
                let angle = 2.0 * std::f64::consts::PI * k as f64 / m as f64;
                Complex64::new(angle.cos(), angle.sin())
            })
            .collect();
        Self {
            slots,
            m,
            rot_group,
            ksi_pows,
        }
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    /// Galois element realizing a left rotation by `k` slots.
    pub fn galois_element(&self, k: usize) -> usize {
        self.rot_group[k % self.slots]
    }

    fn fft_special(&self, vals: &mut [Complex64]) {
        let size = vals.len();
        bit_reverse_permute(vals);
        let mut len = 2;
        while len <= size {
            let lenh = len >> 1;
            let lenq = len << 2;
            for i in (0..size).step_by(len) {
                for j in 0..lenh {
                    let idx = (self.rot_group[j] % lenq) * self.m / lenq;
                    let u = vals[i + j];
                    let v = vals[i + j + lenh] * self.ksi_pows[idx];
                    vals[i + j] = u + v;
                    vals[i + j + lenh] = u - v;
                }
            }
            len <<= 1;
        }
    }

    fn fft_special_inv(&self, vals: &mut [Complex64]) {
        let size = vals.len();
        let mut len = size;
        while len >= 2 {
            let lenh = len >> 1;
            let lenq = len << 2;
            for i in (0..size).step_by(len) {
                for j in 0..lenh {
                    let idx = (lenq - (self.rot_group[j] % lenq)) * self.m / lenq;
                    let u = vals[i + j] + vals[i + j + lenh];
                    let v = (vals[i + j] - vals[i + j + lenh]) * self.ksi_pows[idx];
                    vals[i + j] = u;
                    vals[i + j + lenh] = v;
                }
            }
            len >>= 1;
        }
        bit_reverse_permute(vals);
        let inv = 1.0 / size as f64;
        for v in vals.iter_mut() {
            *v *= inv;
        }
    }

    /// Rounds `2^scale_bits * embedding^-1(v)` to integer coefficients.
    /// Fails if any coefficient falls outside the centered range of
    /// `2^modulus_bits`.
    pub fn encode(&self, v: &SlotVector, scale_bits: u32, modulus_bits: u32) -> Result<RingPoly> {
        v.check_len(self.slots)?;
        let mut vals = v.as_slice().to_vec();
        self.fft_special_inv(&mut vals);
        let scale = 2f64.powi(scale_bits as i32);
        let mut coeffs = vec![BigInt::default(); 2 * self.slots];
        let limit = modulus_bits as u64 - 1;
        for (i, u) in vals.iter().enumerate() {
            for (slot, part) in [(i, u.re), (i + self.slots, u.im)] {
                let c = BigInt::from_f64((part * scale).round()).ok_or_else(|| {
                    HeError::Format(format!("non-finite value at slot {i} cannot be encoded"))
                })?;
                if c.bits() > limit {
                    return Err(HeError::EncodingOverflow {
                        needed: c.bits() + 1,
                        available: modulus_bits,
                    });
                }
                coeffs[slot] = c;
            }
        }
        Ok(RingPoly::from_coeffs(coeffs))
    }

    pub fn decode(&self, p: &RingPoly, scale_bits: u32) -> SlotVector {
        let inv_scale = 2f64.powi(-(scale_bits as i32));
        let c = p.coeffs();
        let mut vals: Vec<Complex64> = (0..self.slots)
            .map(|i| {
                Complex64::new(
                    c[i].to_f64().unwrap_or(f64::NAN) * inv_scale,
                    c[i + self.slots].to_f64().unwrap_or(f64::NAN) * inv_scale,
                )
            })
            .collect();
        self.fft_special(&mut vals);
        SlotVector::new(vals).expect("slot count is a power of two")
    }
}

fn bit_reverse_permute(vals: &mut [Complex64]) {
    let n = vals.len();
    let mut j = 0;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j ^= bit;
        if i < j {
            vals.swap(i, j);
        }
    }
}

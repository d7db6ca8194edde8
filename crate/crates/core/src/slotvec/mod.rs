//! Backend contract for slot-packed homomorphic arithmetic.
//!
//! A ciphertext carries `n = 2^log_slots` complex slots. Every backend tracks
//! the same level and scale bookkeeping: fresh ciphertexts start at
//! [`HEParams::depth_budget`], each multiplication (ciphertext or plaintext)
//! rescales once and drops exactly one level, and nothing else touches the
//! level. Rotations are LEFT rotations: slot `i` of `rotate(c, k)` holds slot
//! `(i + k) mod n` of `c`.
//!
//! [`ClearBackend`] evaluates directly on the slot values and is the oracle
//! for the CKKS backend in [`crate::ckks`].

mod cipher;
mod clear;
mod keys;
mod params;

pub use cipher::{BackendTag, CipherHandle, Payload};
pub use clear::{ClearBackend, ClearPayload};
pub use keys::{
    EvalKeys, KeyBlob, KeySet, KeyType, PublicKey, SecretKey, SwitchKey, KEY_FILE_VERSION,
};
pub use params::{HEParams, MODULUS_SLACK_BITS};

use num_complex::Complex64;
use rand::RngCore;

use crate::error::{HeError, Result};

/// Plaintext image of a ciphertext: one complex value per slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotVector {
    slots: Vec<Complex64>,
}

impl SlotVector {
    pub fn new(slots: Vec<Complex64>) -> Result<Self> {
        if slots.is_empty() || !slots.len().is_power_of_two() {
            return Err(HeError::Size(format!(
                "slot vector length {} is not a power of two",
                slots.len()
            )));
        }
        Ok(Self { slots })
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::new(vec![Complex64::new(0.0, 0.0); n])
    }

    /// Real values in the real parts, imaginary parts zero.
    pub fn from_real(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    /// `values` zero-padded to `n` slots.
    pub fn from_real_padded(values: &[f64], n: usize) -> Result<Self> {
        if values.len() > n {
            return Err(HeError::Size(format!(
                "{} values do not fit in {} slots",
                values.len(),
                n
            )));
        }
        let mut slots = vec![Complex64::new(0.0, 0.0); n];
        for (s, &v) in slots.iter_mut().zip(values) {
            s.re = v;
        }
        Self::new(slots)
    }

    /// Constant `value` in every slot.
    pub fn constant(value: f64, n: usize) -> Result<Self> {
        Self::new(vec![Complex64::new(value, 0.0); n])
    }

    /// 1 at `index`, 0 elsewhere.
    pub fn one_hot(index: usize, n: usize) -> Result<Self> {
        if index >= n {
            return Err(HeError::Size(format!("index {index} outside {n} slots")));
        }
        let mut v = Self::zeros(n)?;
        v.slots[index].re = 1.0;
        Ok(v)
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.slots
    }

    pub fn into_inner(self) -> Vec<Complex64> {
        self.slots
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.slots.iter().map(|c| c.re).collect()
    }

    /// Largest slot-wise distance to `other`.
    pub fn max_abs_diff(&self, other: &SlotVector) -> f64 {
        self.slots
            .iter()
            .zip(&other.slots)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub(crate) fn check_len(&self, n: usize) -> Result<()> {
        if self.slots.len() != n {
            return Err(HeError::Size(format!(
                "slot vector has {} slots, parameters expect {}",
                self.slots.len(),
                n
            )));
        }
        Ok(())
    }
}

/// Homomorphic evaluation with public evaluation keys only.
pub trait Evaluator: Send + Sync {
    fn params(&self) -> &HEParams;

    fn backend(&self) -> BackendTag;

    fn add(&self, a: &CipherHandle, b: &CipherHandle) -> Result<CipherHandle>;

    fn sub(&self, a: &CipherHandle, b: &CipherHandle) -> Result<CipherHandle>;

    fn negate(&self, a: &CipherHandle) -> Result<CipherHandle>;

    /// Adds a plaintext at the ciphertext's scale; no level is consumed.
    fn add_plain(&self, a: &CipherHandle, p: &SlotVector) -> Result<CipherHandle>;

    /// Slot-wise product, relinearized and rescaled; costs one level.
    fn mult(&self, a: &CipherHandle, b: &CipherHandle) -> Result<CipherHandle>;

    /// Slot-wise product with a plaintext, rescaled; costs one level.
    fn mult_plain(&self, a: &CipherHandle, p: &SlotVector) -> Result<CipherHandle>;

    /// Left rotation by `k` (any integer, reduced mod n), composed from the
    /// power-of-two rotation keys.
    fn rotate(&self, a: &CipherHandle, k: i64) -> Result<CipherHandle>;

    /// Exact slot values when the backend can reveal them without a secret
    /// key (noise-free clear backend only). Used for debug-mode contract checks.
    fn exact_slots(&self, _c: &CipherHandle) -> Option<SlotVector> {
        None
    }

    /// Structural checks for a ciphertext received from an untrusted peer.
    fn validate(&self, c: &CipherHandle) -> Result<()> {
        check_owned(self.params(), self.backend(), c)?;
        if c.level() > self.params().depth_budget() {
            return Err(HeError::Format(format!(
                "level {} above depth budget {}",
                c.level(),
                self.params().depth_budget()
            )));
        }
        if c.scale_bits() != self.params().log_scale {
            return Err(HeError::Scale {
                left: c.scale_bits(),
                right: self.params().log_scale,
            });
        }
        Ok(())
    }
}

/// Public-key encryption.
pub trait Encryptor: Send + Sync {
    fn params(&self) -> &HEParams;

    fn encrypt(&self, v: &SlotVector, rng: &mut dyn RngCore) -> Result<CipherHandle>;
}

/// Secret-key decryption; only ever constructed on the client.
pub trait Decryptor: Send + Sync {
    fn decrypt(&self, c: &CipherHandle) -> Result<SlotVector>;
}

/// Power-of-two steps whose composition is a left rotation by `k` on `n`
/// slots, lowest bit first. Empty for rotations by a multiple of `n`.
pub fn rotation_steps(k: i64, n: usize) -> Vec<usize> {
    let n_i = n as i64;
    let mut r = k.rem_euclid(n_i) as usize;
    let mut steps = Vec::new();
    let mut bit = 1usize;
    while r != 0 {
        if r & bit != 0 {
            steps.push(bit);
            r &= !bit;
        }
        bit <<= 1;
    }
    steps
}

pub(crate) fn check_binary(a: &CipherHandle, b: &CipherHandle) -> Result<()> {
    if a.backend() != b.backend() {
        return Err(HeError::Backend(format!(
            "cannot combine {:?} and {:?} ciphertexts",
            a.backend(),
            b.backend()
        )));
    }
    if a.slot_count() != b.slot_count() {
        return Err(HeError::Size(format!(
            "slot counts differ: {} vs {}",
            a.slot_count(),
            b.slot_count()
        )));
    }
    if a.scale_bits() != b.scale_bits() {
        return Err(HeError::Scale {
            left: a.scale_bits(),
            right: b.scale_bits(),
        });
    }
    Ok(())
}

pub(crate) fn check_owned(params: &HEParams, tag: BackendTag, a: &CipherHandle) -> Result<()> {
    if a.backend() != tag {
        return Err(HeError::Backend(format!(
            "{:?} evaluator given a {:?} ciphertext",
            tag,
            a.backend()
        )));
    }
    if a.slot_count() != params.slot_count() {
        return Err(HeError::Size(format!(
            "ciphertext has {} slots, parameters expect {}",
            a.slot_count(),
            params.slot_count()
        )));
    }
    Ok(())
}

//! Textbook CKKS over `Z_q[X]/(X^N + 1)` with `N = 2 * slots`.
//!
//! Moduli are powers of two in the style of HEAAN: a ciphertext at level `l`
//! lives modulo `q_l = 2^modulus_bits_at(l)`, rescaling divides by the
//! encoding scale `2^log_scale` with rounding, and key switching goes through
//! an auxiliary modulus `P = 2^(log_modulus + SPECIAL_EXTRA_BITS)`. Polynomial products are computed
//! exactly over the integers with a multi-prime NTT and CRT, then reduced.
//!
//! This is a desk-scale implementation for experimentation. Ring degrees
//! here are far below what any security level requires, and nothing is
//! constant time. Do not use it to protect real data.

mod encoding;
mod keys;
pub mod ntt;
mod ring;
mod scheme;

pub use encoding::Encoder;
pub use keys::{keygen, KeySwitchKey, PublicKeyPoly, SecretKeyPoly, GAUSSIAN_STDDEV};
pub use ring::{center_mod, NttForm, RingPoly, RnsMultiplier};
pub use scheme::{CkksDecryptor, CkksEncryptor, CkksEvaluator, CkksSecretEncryptor};

use std::sync::Arc;

use crate::error::{HeError, Result};
use crate::slotvec::HEParams;

/// How far the key-switching modulus P exceeds Q. Key switching adds noise
/// of roughly `sigma * sqrt(N) * q / P`; with `P = Q` that term is larger than
/// fresh encryption noise for every rotation at the top level.
pub const SPECIAL_EXTRA_BITS: u32 = 32;

/// The two components of a CKKS ciphertext; modulus and scale are tracked by
/// the enclosing [`crate::slotvec::CipherHandle`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CkksCiphertext {
    c0: RingPoly,
    c1: RingPoly,
}

impl CkksCiphertext {
    pub fn from_parts(c0: RingPoly, c1: RingPoly) -> Result<Self> {
        if c0.degree() != c1.degree() || !c0.degree().is_power_of_two() {
            return Err(HeError::Format(format!(
                "ciphertext components have degrees {} and {}",
                c0.degree(),
                c1.degree()
            )));
        }
        Ok(Self { c0, c1 })
    }

    pub fn c0(&self) -> &RingPoly {
        &self.c0
    }

    pub fn c1(&self) -> &RingPoly {
        &self.c1
    }

    pub fn coeff_bytes(&self) -> usize {
        self.c0.min_width().max(self.c1.min_width())
    }
}

/// Precomputed tables shared by every key and evaluator of one parameter set.
#[derive(Debug)]
pub struct CkksContext {
    params: HEParams,
    encoder: Encoder,
    multiplier: RnsMultiplier,
}

impl CkksContext {
    pub fn new(params: HEParams) -> Result<Arc<Self>> {
        params.validate()?;
        let degree = params.ring_degree();
        let log_n = degree.trailing_zeros() as u64;
        let l = params.log_modulus as u64;
        // Widest product: a level-top polynomial times a key modulo P*Q.
        let max_bits = log_n + l + (2 * l + SPECIAL_EXTRA_BITS as u64) + 2;
        Ok(Arc::new(Self {
            params,
            encoder: Encoder::new(degree),
            multiplier: RnsMultiplier::new(degree, max_bits),
        }))
    }

    pub fn params(&self) -> &HEParams {
        &self.params
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    pub fn multiplier(&self) -> &RnsMultiplier {
        &self.multiplier
    }

    pub fn degree(&self) -> usize {
        self.params.ring_degree()
    }

    /// Bits of the key-switching auxiliary modulus P.
    pub fn special_bits(&self) -> u32 {
        self.params.log_modulus + SPECIAL_EXTRA_BITS
    }

    /// Bits of P * Q, the modulus switching keys live under.
    pub fn key_modulus_bits(&self) -> u32 {
        self.params.log_modulus + self.special_bits()
    }

    pub fn hamming_weight(&self) -> usize {
        64.min(self.degree() / 2)
    }
}

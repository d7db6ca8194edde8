use serde::{Deserialize, Serialize};

use crate::error::{HeError, Result};

/// Headroom added on top of `log_scale * (depth + 1)` when sizing a modulus,
/// so level-0 ciphertexts still carry messages well above unit magnitude.
pub const MODULUS_SLACK_BITS: u32 = 20;

/// Slot count, scale and modulus budget of a parameter set.
///
/// `log_scale` is the bit length of the encoding scale (log2 p) and
/// `log_modulus` the bit length of the fresh ciphertext modulus (log2 q).
/// Each multiplication consumes `log_scale` bits of modulus, so the number of
/// sequential multiplications available is
/// `floor((log_modulus - log_scale) / log_scale)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HEParams {
    pub log_slots: u32,
    pub log_scale: u32,
    pub log_modulus: u32,
    /// Gaussian noise injected per operation by the clear backend; 0 is exact.
    pub noise_stddev: f64,
}

impl HEParams {
    pub fn new(log_slots: u32, log_scale: u32, log_modulus: u32) -> Result<Self> {
        Self::with_noise(log_slots, log_scale, log_modulus, 0.0)
    }

    pub fn with_noise(
        log_slots: u32,
        log_scale: u32,
        log_modulus: u32,
        noise_stddev: f64,
    ) -> Result<Self> {
        let params = Self {
            log_slots,
            log_scale,
            log_modulus,
            noise_stddev,
        };
        params.validate()?;
        Ok(params)
    }

    /// Smallest parameter set at this scale that can run `depth` sequential
    /// multiplications.
    pub fn for_depth(log_slots: u32, log_scale: u32, depth: u32) -> Result<Self> {
        Self::new(
            log_slots,
            log_scale,
            log_scale * (depth + 1) + MODULUS_SLACK_BITS,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=14).contains(&self.log_slots) {
            return Err(HeError::Params(format!(
                "log_slots must be in 1..=14, got {}",
                self.log_slots
            )));
        }
        if self.log_scale == 0 || self.log_scale >= self.log_modulus {
            return Err(HeError::Params(format!(
                "need 0 < log_scale < log_modulus, got {} and {}",
                self.log_scale, self.log_modulus
            )));
        }
        if self.depth_budget() < 1 {
            return Err(HeError::Params(format!(
                "log_modulus {} leaves no multiplicative depth at log_scale {}",
                self.log_modulus, self.log_scale
            )));
        }
        if !(self.noise_stddev.is_finite() && self.noise_stddev >= 0.0) {
            return Err(HeError::Params(format!(
                "noise_stddev must be finite and nonnegative, got {}",
                self.noise_stddev
            )));
        }
        Ok(())
    }

    pub fn slot_count(&self) -> usize {
        1usize << self.log_slots
    }

    /// Ring degree of the CKKS backend (twice the slot count).
    pub fn ring_degree(&self) -> usize {
        2usize << self.log_slots
    }

    pub fn depth_budget(&self) -> u32 {
        (self.log_modulus - self.log_scale) / self.log_scale
    }

    /// Bit length of the ciphertext modulus at `level`.
    pub fn modulus_bits_at(&self, level: u32) -> u32 {
        self.log_modulus - (self.depth_budget() - level) * self.log_scale
    }

    pub(crate) fn depth_error(&self, required: u32, available: u32) -> HeError {
        let used = self.depth_budget().saturating_sub(available);
        HeError::DepthExceeded {
            required,
            available,
            suggested_log_modulus: self.log_scale * (used + required + 1) + MODULUS_SLACK_BITS,
        }
    }

    /// True when the integer fields agree; noise is a local evaluation knob.
    pub fn same_ring(&self, other: &HEParams) -> bool {
        self.log_slots == other.log_slots
            && self.log_scale == other.log_scale
            && self.log_modulus == other.log_modulus
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_budget_formula() {
        let p = HEParams::new(4, 40, 120).unwrap();
        assert_eq!(p.depth_budget(), 2);
        assert_eq!(p.modulus_bits_at(2), 120);
        assert_eq!(p.modulus_bits_at(0), 40);
        let p = HEParams::new(4, 40, 139).unwrap();
        assert_eq!(p.depth_budget(), 2);
        assert_eq!(p.modulus_bits_at(0), 59);
    }

    #[test]
    fn rejects_invalid() {
        assert!(HEParams::new(0, 40, 120).is_err());
        assert!(HEParams::new(15, 40, 120).is_err());
        assert!(HEParams::new(4, 40, 40).is_err());
        assert!(HEParams::new(4, 40, 79).is_err());
        assert!(HEParams::new(4, 0, 79).is_err());
        assert!(HEParams::with_noise(4, 40, 120, -1.0).is_err());
        assert!(HEParams::new(4, 40, 80).is_ok());
    }

    #[test]
    fn for_depth_covers_requested_depth() {
        for depth in 1..40 {
            let p = HEParams::for_depth(5, 40, depth).unwrap();
            assert!(p.depth_budget() >= depth);
        }
    }
}

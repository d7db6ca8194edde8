use std::collections::BTreeSet;

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

use super::{
    check_binary, check_owned, rotation_steps, BackendTag, CipherHandle, Decryptor, Encryptor,
    Evaluator, HEParams, Payload, SlotVector,
};
use crate::error::{HeError, Result};

/// Slot values of a clear-backend ciphertext plus the tag that seeds its
/// injected noise.
#[derive(Debug, Clone, PartialEq)]
pub struct ClearPayload {
    slots: Vec<Complex64>,
    noise_tag: u64,
}

impl ClearPayload {
    pub(crate) fn with_tag(slots: Vec<Complex64>, noise_tag: u64) -> Self {
        Self { slots, noise_tag }
    }

    pub fn slots(&self) -> &[Complex64] {
        &self.slots
    }

    pub fn noise_tag(&self) -> u64 {
        self.noise_tag
    }
}

/// Reference backend that computes directly on slot values.
///
/// Level and scale bookkeeping match the CKKS backend exactly, so depth bugs
/// show up here first. With `noise_stddev > 0` every operation adds Gaussian
/// noise to each slot (real and imaginary parts). Noise is seeded from the
/// operands' tags and the operation, so results stay a deterministic function
/// of the inputs, and a given program sees the same standard-normal draws at
/// every noise level.
#[derive(Debug, Clone)]
pub struct ClearBackend {
    params: HEParams,
    rotation_keys: BTreeSet<usize>,
}

const OP_ENCRYPT: u64 = 1;
const OP_ADD: u64 = 2;
const OP_SUB: u64 = 3;
const OP_NEG: u64 = 4;
const OP_ADD_PLAIN: u64 = 5;
const OP_MULT: u64 = 6;
const OP_MULT_PLAIN: u64 = 7;
const OP_ROTATE: u64 = 8;

impl ClearBackend {
    /// Backend holding every power-of-two rotation key.
    pub fn new(params: HEParams) -> Result<Self> {
        params.validate()?;
        let rotation_keys = (0..params.log_slots).map(|i| 1usize << i).collect();
        Ok(Self {
            params,
            rotation_keys,
        })
    }

    /// Backend restricted to the given rotation steps.
    pub fn with_rotation_keys(params: HEParams, steps: impl IntoIterator<Item = usize>) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            rotation_keys: steps.into_iter().collect(),
        })
    }

    pub fn params(&self) -> &HEParams {
        &self.params
    }

    fn slots<'a>(&self, c: &'a CipherHandle) -> Result<&'a [Complex64]> {
        check_owned(&self.params, BackendTag::Clear, c)?;
        match c.payload() {
            Payload::Clear(p) => Ok(&p.slots),
            Payload::Ckks(_) => unreachable!("backend tag checked"),
        }
    }

    fn tag(c: &CipherHandle) -> u64 {
        match c.payload() {
            Payload::Clear(p) => p.noise_tag,
            Payload::Ckks(_) => 0,
        }
    }

    fn finish(&self, mut slots: Vec<Complex64>, tag: u64, level: u32) -> CipherHandle {
        if self.params.noise_stddev > 0.0 {
            let mut rng = ChaCha20Rng::seed_from_u64(tag);
            let normal = Normal::new(0.0, self.params.noise_stddev).expect("validated stddev");
            for s in &mut slots {
                s.re += normal.sample(&mut rng);
                s.im += normal.sample(&mut rng);
            }
        }
        CipherHandle::new(
            slots.len(),
            level,
            self.params.log_scale,
            Payload::Clear(ClearPayload {
                slots,
                noise_tag: tag,
            }),
        )
    }

    fn plain_tag(p: &SlotVector) -> u64 {
        p.as_slice()
            .iter()
            .fold(0x2545_f491_4f6c_dd1d, |h, s| mix(mix(h, s.re.to_bits()), s.im.to_bits()))
    }

    fn rotate_step(&self, c: &CipherHandle, step: usize) -> Result<CipherHandle> {
        if !self.rotation_keys.contains(&step) {
            return Err(HeError::Key(step as i64));
        }
        let src = self.slots(c)?;
        let n = src.len();
        let slots = (0..n).map(|i| src[(i + step) % n]).collect();
        Ok(self.finish(
            slots,
            mix(mix(Self::tag(c), OP_ROTATE), step as u64),
            c.level(),
        ))
    }

    fn multiply_level(&self, levels: &[u32]) -> Result<u32> {
        let level = levels.iter().copied().min().unwrap_or(0);
        if level == 0 {
            return Err(self.params.depth_error(1, 0));
        }
        Ok(level - 1)
    }
}

impl Evaluator for ClearBackend {
    fn params(&self) -> &HEParams {
        &self.params
    }

    fn backend(&self) -> BackendTag {
        BackendTag::Clear
    }

    fn add(&self, a: &CipherHandle, b: &CipherHandle) -> Result<CipherHandle> {
        check_binary(a, b)?;
        let (x, y) = (self.slots(a)?, self.slots(b)?);
        let slots = x.iter().zip(y).map(|(p, q)| p + q).collect();
        let tag = mix(mix(Self::tag(a), Self::tag(b)), OP_ADD);
        Ok(self.finish(slots, tag, a.level().min(b.level())))
    }

    fn sub(&self, a: &CipherHandle, b: &CipherHandle) -> Result<CipherHandle> {
        check_binary(a, b)?;
        let (x, y) = (self.slots(a)?, self.slots(b)?);
        let slots = x.iter().zip(y).map(|(p, q)| p - q).collect();
        let tag = mix(mix(Self::tag(a), Self::tag(b)), OP_SUB);
        Ok(self.finish(slots, tag, a.level().min(b.level())))
    }

    fn negate(&self, a: &CipherHandle) -> Result<CipherHandle> {
        let slots = self.slots(a)?.iter().map(|p| -p).collect();
        Ok(self.finish(slots, mix(Self::tag(a), OP_NEG), a.level()))
    }

    fn add_plain(&self, a: &CipherHandle, p: &SlotVector) -> Result<CipherHandle> {
        let x = self.slots(a)?;
        p.check_len(x.len())?;
        let slots = x.iter().zip(p.as_slice()).map(|(u, v)| u + v).collect();
        let tag = mix(mix(Self::tag(a), Self::plain_tag(p)), OP_ADD_PLAIN);
        Ok(self.finish(slots, tag, a.level()))
    }

    fn mult(&self, a: &CipherHandle, b: &CipherHandle) -> Result<CipherHandle> {
        check_binary(a, b)?;
        let level = self.multiply_level(&[a.level(), b.level()])?;
        let (x, y) = (self.slots(a)?, self.slots(b)?);
        let slots = x.iter().zip(y).map(|(p, q)| p * q).collect();
        let tag = mix(mix(Self::tag(a), Self::tag(b)), OP_MULT);
        Ok(self.finish(slots, tag, level))
    }

    fn mult_plain(&self, a: &CipherHandle, p: &SlotVector) -> Result<CipherHandle> {
        let x = self.slots(a)?;
        p.check_len(x.len())?;
        let level = self.multiply_level(&[a.level()])?;
        let slots = x.iter().zip(p.as_slice()).map(|(u, v)| u * v).collect();
        let tag = mix(mix(Self::tag(a), Self::plain_tag(p)), OP_MULT_PLAIN);
        Ok(self.finish(slots, tag, level))
    }

    fn rotate(&self, a: &CipherHandle, k: i64) -> Result<CipherHandle> {
        self.slots(a)?;
        let steps = rotation_steps(k, a.slot_count());
        if let Some(&missing) = steps.iter().find(|s| !self.rotation_keys.contains(s)) {
            return Err(HeError::Key(missing as i64));
        }
        let mut out = a.clone();
        for step in steps {
            out = self.rotate_step(&out, step)?;
        }
        Ok(out)
    }

    fn exact_slots(&self, c: &CipherHandle) -> Option<SlotVector> {
        if self.params.noise_stddev != 0.0 {
            return None;
        }
        self.slots(c)
            .ok()
            .and_then(|s| SlotVector::new(s.to_vec()).ok())
    }
}

impl Encryptor for ClearBackend {
    fn params(&self) -> &HEParams {
        &self.params
    }

    fn encrypt(&self, v: &SlotVector, rng: &mut dyn RngCore) -> Result<CipherHandle> {
        v.check_len(self.params.slot_count())?;
        let tag = mix(rng.next_u64(), OP_ENCRYPT);
        Ok(self.finish(v.as_slice().to_vec(), tag, self.params.depth_budget()))
    }
}

impl Decryptor for ClearBackend {
    fn decrypt(&self, c: &CipherHandle) -> Result<SlotVector> {
        SlotVector::new(self.slots(c)?.to_vec())
    }
}

/// splitmix64-style combiner.
fn mix(h: u64, x: u64) -> u64 {
    let mut z = h ^ x.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(h << 6);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

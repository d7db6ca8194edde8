use std::sync::Arc;

use num_bigint::{BigInt, Sign};
use rand::{Rng, RngCore};
use rand_distr::{Distribution, Normal};

use super::ring::{center_mod, NttForm, RingPoly};
use super::CkksContext;
use crate::error::Result;

/// Standard deviation of the discrete Gaussian error distribution.
pub const GAUSSIAN_STDDEV: f64 = 3.2;

/// Ternary secret `s` with fixed Hamming weight.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecretKeyPoly {
    pub(crate) s: RingPoly,
}

impl SecretKeyPoly {
    pub fn poly(&self) -> &RingPoly {
        &self.s
    }

    pub fn from_poly(s: RingPoly) -> Self {
        Self { s }
    }
}

/// Encryption of zero `(b, a)` with `b = -a s + e mod Q`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicKeyPoly {
    pub(crate) b: RingPoly,
    pub(crate) a: RingPoly,
}

impl PublicKeyPoly {
    pub fn polys(&self) -> [&RingPoly; 2] {
        [&self.b, &self.a]
    }

    pub fn from_polys(b: RingPoly, a: RingPoly) -> Self {
        Self { b, a }
    }
}

/// Key switching from `target` to `s`: `b = -a s + e + P target mod P Q`,
/// with both components kept in NTT form for fast products.
#[derive(Debug, Clone)]
pub struct KeySwitchKey {
    pub(crate) b: RingPoly,
    pub(crate) a: RingPoly,
    pub(crate) b_form: NttForm,
    pub(crate) a_form: NttForm,
}

impl PartialEq for KeySwitchKey {
    fn eq(&self, other: &Self) -> bool {
        self.b == other.b && self.a == other.a
    }
}

impl KeySwitchKey {
    pub fn from_polys(ctx: &CkksContext, b: RingPoly, a: RingPoly) -> Self {
        let mult = ctx.multiplier();
        let k = mult.capacity();
        let b_form = mult.forward(&b, k);
        let a_form = mult.forward(&a, k);
        Self {
            b,
            a,
            b_form,
            a_form,
        }
    }

    pub fn polys(&self) -> [&RingPoly; 2] {
        [&self.b, &self.a]
    }
}

pub(crate) fn sample_gaussian(rng: &mut dyn RngCore, degree: usize) -> RingPoly {
    let normal = Normal::new(0.0, GAUSSIAN_STDDEV).expect("positive stddev");
    let coeffs: Vec<i64> = (0..degree)
        .map(|_| normal.sample(&mut *rng).round() as i64)
        .collect();
    RingPoly::from_i64(&coeffs)
}

/// Each coefficient 0 with probability 1/2, otherwise +-1.
pub(crate) fn sample_zero_one(rng: &mut dyn RngCore, degree: usize) -> RingPoly {
    let coeffs: Vec<i64> = (0..degree)
        .map(|_| match rng.random_range(0..4u8) {
            0 => 1,
            1 => -1,
            _ => 0,
        })
        .collect();
    RingPoly::from_i64(&coeffs)
}

pub(crate) fn sample_uniform(rng: &mut dyn RngCore, degree: usize, bits: u32) -> RingPoly {
    let bytes_per = (bits as usize).div_ceil(8);
    let coeffs = (0..degree)
        .map(|_| {
            let mut buf = vec![0u8; bytes_per];
            rng.fill_bytes(&mut buf);
            center_mod(&BigInt::from_bytes_le(Sign::Plus, &buf), bits)
        })
        .collect();
    RingPoly::from_coeffs(coeffs)
}

fn sample_ternary(rng: &mut dyn RngCore, degree: usize, weight: usize) -> RingPoly {
    let mut coeffs = vec![0i64; degree];
    let mut placed = 0;
    while placed < weight {
        let i = rng.random_range(0..degree);
        if coeffs[i] == 0 {
            coeffs[i] = if rng.random_bool(0.5) { 1 } else { -1 };
            placed += 1;
        }
    }
    RingPoly::from_i64(&coeffs)
}

fn switch_key(
    ctx: &CkksContext,
    s: &RingPoly,
    target: &RingPoly,
    rng: &mut dyn RngCore,
) -> Result<KeySwitchKey> {
    let bits = ctx.key_modulus_bits();
    let degree = ctx.degree();
    let a = sample_uniform(rng, degree, bits);
    let e = sample_gaussian(rng, degree);
    let a_s = ctx.multiplier().mul(&a, s)?;
    let shifted: Vec<BigInt> = target
        .coeffs()
        .iter()
        .map(|t| t << ctx.special_bits())
        .collect();
    let b = e
        .sub(&a_s, bits)
        .add(&RingPoly::from_coeffs(shifted), bits);
    Ok(KeySwitchKey::from_polys(ctx, b, a))
}

/// Key material produced by [`keygen`].
pub struct GeneratedKeys {
    pub secret: SecretKeyPoly,
    pub public: PublicKeyPoly,
    pub relin: Arc<KeySwitchKey>,
    /// `(step, key)` for every power-of-two step below the slot count.
    pub rotations: Vec<(usize, Arc<KeySwitchKey>)>,
}

/// Generates secret, public, relinearization and power-of-two rotation keys.
/// Deterministic for a given `rng` state.
pub fn keygen(ctx: &CkksContext, rng: &mut dyn RngCore) -> Result<GeneratedKeys> {
    let degree = ctx.degree();
    let q_bits = ctx.params().log_modulus;
    let s = sample_ternary(rng, degree, ctx.hamming_weight());

    let a = sample_uniform(rng, degree, q_bits);
    let e = sample_gaussian(rng, degree);
    let b = e.sub(&ctx.multiplier().mul(&a, &s)?, q_bits);
    let public = PublicKeyPoly { b, a };

    let s_squared = ctx.multiplier().mul(&s, &s)?;
    let relin = Arc::new(switch_key(ctx, &s, &s_squared, rng)?);

    let mut rotations = Vec::new();
    for i in 0..ctx.params().log_slots {
        let step = 1usize << i;
        let g = ctx.encoder().galois_element(step);
        let rotated = s.automorphism(g, ctx.key_modulus_bits());
        rotations.push((step, Arc::new(switch_key(ctx, &s, &rotated, rng)?)));
    }

    Ok(GeneratedKeys {
        secret: SecretKeyPoly { s },
        public,
        relin,
        rotations,
    })
}

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::RngCore;

use super::keys::{sample_gaussian, sample_uniform, sample_zero_one, KeySwitchKey, PublicKeyPoly, SecretKeyPoly};
use super::ring::RingPoly;
use super::{CkksCiphertext, CkksContext};
use crate::error::{HeError, Result};
use crate::slotvec::{
    check_binary, check_owned, rotation_steps, BackendTag, CipherHandle, Decryptor, Encryptor,
    Evaluator, HEParams, Payload, SlotVector,
};

fn parts(c: &CipherHandle) -> &CkksCiphertext {
    match c.payload() {
        Payload::Ckks(ct) => ct,
        Payload::Clear(_) => unreachable!("backend tag checked"),
    }
}

fn handle(ctx: &CkksContext, level: u32, c0: RingPoly, c1: RingPoly) -> CipherHandle {
    CipherHandle::new(
        ctx.params().slot_count(),
        level,
        ctx.params().log_scale,
        Payload::Ckks(CkksCiphertext { c0, c1 }),
    )
}

pub struct CkksEncryptor {
    ctx: Arc<CkksContext>,
    pk: PublicKeyPoly,
}

impl CkksEncryptor {
    pub fn new(ctx: Arc<CkksContext>, pk: PublicKeyPoly) -> Self {
        Self { ctx, pk }
    }
}

impl Encryptor for CkksEncryptor {
    fn params(&self) -> &HEParams {
        self.ctx.params()
    }

    fn encrypt(&self, v: &SlotVector, rng: &mut dyn RngCore) -> Result<CipherHandle> {
        let params = self.ctx.params();
        let bits = params.log_modulus;
        let m = self.ctx.encoder().encode(v, params.log_scale, bits)?;
        let degree = self.ctx.degree();
        let u = sample_zero_one(rng, degree);
        let e0 = sample_gaussian(rng, degree);
        let e1 = sample_gaussian(rng, degree);
        let mult = self.ctx.multiplier();
        let c0 = mult.mul(&u, &self.pk.b)?.add(&e0, bits).add(&m, bits);
        let c1 = mult.mul(&u, &self.pk.a)?.add(&e1, bits);
        Ok(handle(&self.ctx, params.depth_budget(), c0, c1))
    }
}

/// Symmetric encryption with the secret key: `c1 = a` uniform,
/// `c0 = -a s + e + m`. Fresh noise is a single Gaussian term instead of the
/// `u e + e0 + e1 s` of public-key encryption.
pub struct CkksSecretEncryptor {
    ctx: Arc<CkksContext>,
    sk: SecretKeyPoly,
}

impl CkksSecretEncryptor {
    pub fn new(ctx: Arc<CkksContext>, sk: SecretKeyPoly) -> Self {
        Self { ctx, sk }
    }
}

impl Encryptor for CkksSecretEncryptor {
    fn params(&self) -> &HEParams {
        self.ctx.params()
    }

    fn encrypt(&self, v: &SlotVector, rng: &mut dyn RngCore) -> Result<CipherHandle> {
        let params = self.ctx.params();
        let bits = params.log_modulus;
        let m = self.ctx.encoder().encode(v, params.log_scale, bits)?;
        let degree = self.ctx.degree();
        let a = sample_uniform(rng, degree, bits);
        let e = sample_gaussian(rng, degree);
        let a_s = self.ctx.multiplier().mul(&a, &self.sk.s)?;
        let c0 = e.sub(&a_s, bits).add(&m, bits);
        Ok(handle(&self.ctx, params.depth_budget(), c0, a))
    }
}

pub struct CkksDecryptor {
    ctx: Arc<CkksContext>,
    sk: SecretKeyPoly,
}

impl CkksDecryptor {
    pub fn new(ctx: Arc<CkksContext>, sk: SecretKeyPoly) -> Self {
        Self { ctx, sk }
    }
}

impl Decryptor for CkksDecryptor {
    fn decrypt(&self, c: &CipherHandle) -> Result<SlotVector> {
        check_owned(self.ctx.params(), BackendTag::Ckks, c)?;
        let ct = parts(c);
        let bits = self.ctx.params().modulus_bits_at(c.level());
        let m = ct
            .c0
            .add(&self.ctx.multiplier().mul(&ct.c1, &self.sk.s)?, bits);
        Ok(self.ctx.encoder().decode(&m, c.scale_bits()))
    }
}

/// Server-side evaluator holding only relinearization and rotation keys.
pub struct CkksEvaluator {
    ctx: Arc<CkksContext>,
    relin: Arc<KeySwitchKey>,
    rotations: BTreeMap<usize, Arc<KeySwitchKey>>,
}

impl CkksEvaluator {
    pub fn new(
        ctx: Arc<CkksContext>,
        relin: Arc<KeySwitchKey>,
        rotations: BTreeMap<usize, Arc<KeySwitchKey>>,
    ) -> Self {
        Self {
            ctx,
            relin,
            rotations,
        }
    }

    pub fn context(&self) -> &Arc<CkksContext> {
        &self.ctx
    }

    fn bits(&self, level: u32) -> u32 {
        self.ctx.params().modulus_bits_at(level)
    }

    /// Both components reduced to the modulus of `level`.
    fn at_level(&self, c: &CipherHandle, level: u32) -> (RingPoly, RingPoly) {
        let ct = parts(c);
        if c.level() == level {
            (ct.c0.clone(), ct.c1.clone())
        } else {
            let bits = self.bits(level);
            (ct.c0.reduce(bits), ct.c1.reduce(bits))
        }
    }

    /// Returns `(u0, u1)` with `u0 + u1 s = d * target + small error mod q`.
    fn key_switch(&self, d: &RingPoly, key: &KeySwitchKey, bits: u32) -> Result<(RingPoly, RingPoly)> {
        let mult = self.ctx.multiplier();
        let k = mult.primes_for_product(bits as u64, self.ctx.key_modulus_bits() as u64)?;
        let fd = mult.forward(d, k);
        let special = self.ctx.special_bits();
        let u0 = mult.inverse(mult.mul_forms(&fd, &key.b_form, k));
        let u1 = mult.inverse(mult.mul_forms(&fd, &key.a_form, k));
        Ok((
            u0.div_round_pow2(special, bits),
            u1.div_round_pow2(special, bits),
        ))
    }

    fn rescale(&self, c0: RingPoly, c1: RingPoly, level: u32) -> CipherHandle {
        let shift = self.ctx.params().log_scale;
        let bits = self.bits(level - 1);
        handle(
            &self.ctx,
            level - 1,
            c0.div_round_pow2(shift, bits),
            c1.div_round_pow2(shift, bits),
        )
    }

    fn rotate_step(&self, c: &CipherHandle, step: usize) -> Result<CipherHandle> {
        let key = self
            .rotations
            .get(&step)
            .ok_or(HeError::Key(step as i64))?;
        let g = self.ctx.encoder().galois_element(step);
        let bits = self.bits(c.level());
        let ct = parts(c);
        let c0 = ct.c0.automorphism(g, bits);
        let c1 = ct.c1.automorphism(g, bits);
        let (u0, u1) = self.key_switch(&c1, key, bits)?;
        Ok(handle(&self.ctx, c.level(), c0.add(&u0, bits), u1))
    }

    fn linear(
        &self,
        a: &CipherHandle,
        b: &CipherHandle,
        op: fn(&RingPoly, &RingPoly, u32) -> RingPoly,
    ) -> Result<CipherHandle> {
        check_binary(a, b)?;
        self.check(a)?;
        self.check(b)?;
        let level = a.level().min(b.level());
        let bits = self.bits(level);
        let (a0, a1) = self.at_level(a, level);
        let (b0, b1) = self.at_level(b, level);
        Ok(handle(&self.ctx, level, op(&a0, &b0, bits), op(&a1, &b1, bits)))
    }

    fn check(&self, c: &CipherHandle) -> Result<()> {
        check_owned(self.ctx.params(), BackendTag::Ckks, c)?;
        if c.level() > self.ctx.params().depth_budget() {
            return Err(HeError::Format(format!(
                "level {} above depth budget {}",
                c.level(),
                self.ctx.params().depth_budget()
            )));
        }
        if c.scale_bits() != self.ctx.params().log_scale {
            return Err(HeError::Scale {
                left: c.scale_bits(),
                right: self.ctx.params().log_scale,
            });
        }
        Ok(())
    }
}

impl Evaluator for CkksEvaluator {
    fn params(&self) -> &HEParams {
        self.ctx.params()
    }

    fn backend(&self) -> BackendTag {
        BackendTag::Ckks
    }

    fn add(&self, a: &CipherHandle, b: &CipherHandle) -> Result<CipherHandle> {
        self.linear(a, b, RingPoly::add)
    }

    fn sub(&self, a: &CipherHandle, b: &CipherHandle) -> Result<CipherHandle> {
        self.linear(a, b, RingPoly::sub)
    }

    fn negate(&self, a: &CipherHandle) -> Result<CipherHandle> {
        self.check(a)?;
        let bits = self.bits(a.level());
        let ct = parts(a);
        Ok(handle(&self.ctx, a.level(), ct.c0.neg(bits), ct.c1.neg(bits)))
    }

    fn add_plain(&self, a: &CipherHandle, p: &SlotVector) -> Result<CipherHandle> {
        self.check(a)?;
        let bits = self.bits(a.level());
        let m = self.ctx.encoder().encode(p, a.scale_bits(), bits)?;
        let ct = parts(a);
        Ok(handle(&self.ctx, a.level(), ct.c0.add(&m, bits), ct.c1.clone()))
    }

    fn mult(&self, a: &CipherHandle, b: &CipherHandle) -> Result<CipherHandle> {
        check_binary(a, b)?;
        self.check(a)?;
        self.check(b)?;
        let level = a.level().min(b.level());
        if level == 0 {
            return Err(self.ctx.params().depth_error(1, 0));
        }
        let bits = self.bits(level);
        let (a0, a1) = self.at_level(a, level);
        let (b0, b1) = self.at_level(b, level);
        let mult = self.ctx.multiplier();
        let k = mult.primes_for_product(bits as u64, bits as u64)?;
        let (fa0, fa1) = (mult.forward(&a0, k), mult.forward(&a1, k));
        let (fb0, fb1) = (mult.forward(&b0, k), mult.forward(&b1, k));
        let d0 = mult.inverse(mult.mul_forms(&fa0, &fb0, k)).reduce(bits);
        let d1 = mult
            .inverse(mult.add_forms(&mult.mul_forms(&fa0, &fb1, k), &mult.mul_forms(&fa1, &fb0, k)))
            .reduce(bits);
        let d2 = mult.inverse(mult.mul_forms(&fa1, &fb1, k)).reduce(bits);
        let (u0, u1) = self.key_switch(&d2, &self.relin, bits)?;
        Ok(self.rescale(d0.add(&u0, bits), d1.add(&u1, bits), level))
    }

    fn mult_plain(&self, a: &CipherHandle, p: &SlotVector) -> Result<CipherHandle> {
        self.check(a)?;
        if a.level() == 0 {
            return Err(self.ctx.params().depth_error(1, 0));
        }
        let bits = self.bits(a.level());
        let m = self.ctx.encoder().encode(p, self.ctx.params().log_scale, bits)?;
        let mult = self.ctx.multiplier();
        let k = mult.primes_for_product(bits as u64, m.max_bits())?;
        let fm = mult.forward(&m, k);
        let ct = parts(a);
        let c0 = mult
            .inverse(mult.mul_forms(&mult.forward(&ct.c0, k), &fm, k))
            .reduce(bits);
        let c1 = mult
            .inverse(mult.mul_forms(&mult.forward(&ct.c1, k), &fm, k))
            .reduce(bits);
        Ok(self.rescale(c0, c1, a.level()))
    }

    fn validate(&self, c: &CipherHandle) -> Result<()> {
        self.check(c)?;
        let ct = parts(c);
        let bits = self.bits(c.level());
        if ct.c0.degree() != self.ctx.degree()
            || !ct.c0.is_reduced(bits)
            || !ct.c1.is_reduced(bits)
        {
            return Err(HeError::Format(
                "ciphertext coefficients out of range for its level".into(),
            ));
        }
        Ok(())
    }

    fn rotate(&self, a: &CipherHandle, k: i64) -> Result<CipherHandle> {
        self.check(a)?;
        let steps = rotation_steps(k, a.slot_count());
        if let Some(&missing) = steps.iter().find(|s| !self.rotations.contains_key(s)) {
            return Err(HeError::Key(missing as i64));
        }
        let mut out = a.clone();
        for step in steps {
            out = self.rotate_step(&out, step)?;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::slotvec::{BackendTag, KeySet};
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    struct Fixture {
        enc: Arc<dyn Encryptor>,
        dec: Arc<dyn Decryptor>,
        eval: Arc<dyn Evaluator>,
        rng: ChaCha8Rng,
    }

    fn fixture(log_slots: u32, log_scale: u32, log_modulus: u32) -> Fixture {
        let params = HEParams::new(log_slots, log_scale, log_modulus).unwrap();
        let keys = KeySet::generate(params, BackendTag::Ckks, 11).unwrap();
        Fixture {
            enc: keys.encryptor().unwrap(),
            dec: keys.decryptor().unwrap(),
            eval: keys.evaluator().unwrap(),
            rng: ChaCha8Rng::seed_from_u64(3),
        }
    }

    fn random_real(rng: &mut ChaCha8Rng, n: usize) -> SlotVector {
        SlotVector::from_real(&(0..n).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>()).unwrap()
    }

    fn zip(a: &SlotVector, b: &SlotVector, f: impl Fn(Complex64, Complex64) -> Complex64) -> SlotVector {
        SlotVector::new(a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| f(*x, *y)).collect()).unwrap()
    }

    #[test]
    fn encrypt_decrypt_roundtrip() {
        let mut f = fixture(4, 30, 120);
        let v = random_real(&mut f.rng, 16);
        let c = f.enc.encrypt(&v, &mut f.rng).unwrap();
        assert_eq!(c.level(), 3);
        let err = f.dec.decrypt(&c).unwrap().max_abs_diff(&v);
        assert!(err < 1e-6, "error {err}");
    }

    #[test]
    fn homomorphic_add_sub_and_mult() {
        let mut f = fixture(4, 30, 120);
        let a = random_real(&mut f.rng, 16);
        let b = random_real(&mut f.rng, 16);
        let ca = f.enc.encrypt(&a, &mut f.rng).unwrap();
        let cb = f.enc.encrypt(&b, &mut f.rng).unwrap();
        let sum = f.dec.decrypt(&f.eval.add(&ca, &cb).unwrap()).unwrap();
        assert!(sum.max_abs_diff(&zip(&a, &b, |x, y| x + y)) < 1e-6);
        let diff = f.dec.decrypt(&f.eval.sub(&ca, &cb).unwrap()).unwrap();
        assert!(diff.max_abs_diff(&zip(&a, &b, |x, y| x - y)) < 1e-6);
        let prod = f.eval.mult(&ca, &cb).unwrap();
        assert_eq!(prod.level(), 2);
        let err = f.dec.decrypt(&prod).unwrap().max_abs_diff(&zip(&a, &b, |x, y| x * y));
        assert!(err < 1e-5, "mult error {err}");
        let plain = f.dec.decrypt(&f.eval.mult_plain(&ca, &b).unwrap()).unwrap();
        assert!(plain.max_abs_diff(&zip(&a, &b, |x, y| x * y)) < 1e-5);
        let shifted = f.dec.decrypt(&f.eval.add_plain(&ca, &b).unwrap()).unwrap();
        assert!(shifted.max_abs_diff(&zip(&a, &b, |x, y| x + y)) < 1e-6);
    }

    #[test]
    fn rotation_moves_slots_left() {
        let mut f = fixture(3, 30, 90);
        let v = SlotVector::from_real(&[0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7]).unwrap();
        let c = f.enc.encrypt(&v, &mut f.rng).unwrap();
        for k in [1i64, 2, 3, 5, -1, 8] {
            let out = f.dec.decrypt(&f.eval.rotate(&c, k).unwrap()).unwrap();
            for j in 0..8 {
                let expect = v.as_slice()[(j as i64 + k).rem_euclid(8) as usize];
                assert!((out.as_slice()[j] - expect).norm() < 1e-6, "k={k} slot {j}");
            }
        }
    }

    #[test]
    fn squaring_chain_to_eighth_power() {
        let mut f = fixture(3, 40, 200);
        let v = random_real(&mut f.rng, 8);
        let mut c = f.enc.encrypt(&v, &mut f.rng).unwrap();
        for _ in 0..3 {
            c = f.eval.mult(&c, &c).unwrap();
        }
        let expect = SlotVector::new(v.as_slice().iter().map(|x| x.powu(8)).collect()).unwrap();
        let err = f.dec.decrypt(&c).unwrap().max_abs_diff(&expect);
        assert!(err < 1e-3, "error {err}");
    }

    #[test]
    fn depth_is_enforced() {
        let mut f = fixture(2, 30, 70);
        let v = SlotVector::constant(0.5, 4).unwrap();
        let c = f.enc.encrypt(&v, &mut f.rng).unwrap();
        assert_eq!(c.level(), 1);
        let c = f.eval.mult(&c, &c).unwrap();
        assert!(matches!(f.eval.mult(&c, &c), Err(HeError::DepthExceeded { .. })));
        assert!(f.eval.add(&c, &c).is_ok());
    }

    #[test]
    fn mixed_levels_are_aligned() {
        let mut f = fixture(2, 30, 120);
        let a = SlotVector::from_real(&[0.5, -0.25, 0.75, 0.1]).unwrap();
        let ca = f.enc.encrypt(&a, &mut f.rng).unwrap();
        let sq = f.eval.mult(&ca, &ca).unwrap();
        let sum = f.dec.decrypt(&f.eval.add(&sq, &ca).unwrap()).unwrap();
        let expect = zip(&a, &a, |x, _| x * x + x);
        assert!(sum.max_abs_diff(&expect) < 1e-5);
    }

    #[test]
    fn serialized_ciphertext_decrypts() {
        let mut f = fixture(3, 30, 90);
        let v = random_real(&mut f.rng, 8);
        let c = f.enc.encrypt(&v, &mut f.rng).unwrap();
        let back = CipherHandle::from_bytes(&c.to_bytes()).unwrap();
        assert_eq!(back, c);
        f.eval.validate(&back).unwrap();
        assert!(f.dec.decrypt(&back).unwrap().max_abs_diff(&v) < 1e-6);
    }
}

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{One, Signed, Zero};

use super::ntt::{ntt_primes, Modulus, NttTable, Shoup};
use crate::error::{HeError, Result};

/// Element of Z_q[X]/(X^N + 1) with `q = 2^bits`, coefficients held in the
/// centered range (-q/2, q/2]. The modulus is tracked by the caller.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RingPoly {
    coeffs: Vec<BigInt>,
}

/// Centered residue of `x` modulo `2^bits`.
pub fn center_mod(x: &BigInt, bits: u32) -> BigInt {
    let modulus = BigInt::one() << bits;
    let mask = &modulus - 1;
    let r = x & &mask;
    if r > (&modulus >> 1u32) {
        r - modulus
    } else {
        r
    }
}

impl RingPoly {
    pub fn zero(degree: usize) -> Self {
        Self {
            coeffs: vec![BigInt::zero(); degree],
        }
    }

    pub fn from_coeffs(coeffs: Vec<BigInt>) -> Self {
        Self { coeffs }
    }

    pub fn from_i64(coeffs: &[i64]) -> Self {
        Self {
            coeffs: coeffs.iter().map(|&c| BigInt::from(c)).collect(),
        }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[BigInt] {
        &self.coeffs
    }

    /// Bit length of the largest coefficient magnitude.
    pub fn max_bits(&self) -> u64 {
        self.coeffs.iter().map(|c| c.bits()).max().unwrap_or(0)
    }

    pub fn reduce(&self, bits: u32) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| center_mod(c, bits)).collect(),
        }
    }

    pub fn add(&self, other: &Self, bits: u32) -> Self {
        Self {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| center_mod(&(a + b), bits))
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self, bits: u32) -> Self {
        Self {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| center_mod(&(a - b), bits))
                .collect(),
        }
    }

    pub fn neg(&self, bits: u32) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|a| center_mod(&-a, bits)).collect(),
        }
    }

    /// Rounded division by `2^shift`, reduced modulo `2^bits`.
    pub fn div_round_pow2(&self, shift: u32, bits: u32) -> Self {
        let half = BigInt::one() << (shift - 1);
        Self {
            coeffs: self
                .coeffs
                .iter()
                .map(|a| center_mod(&((a + &half) >> shift), bits))
                .collect(),
        }
    }

    /// Applies `X -> X^g` for odd `g`; negacyclic wrap flips signs.
    pub fn automorphism(&self, g: usize, bits: u32) -> Self {
        let n = self.coeffs.len();
        let two_n = 2 * n;
        let mut out = vec![BigInt::zero(); n];
        for (i, c) in self.coeffs.iter().enumerate() {
            let e = (i * g) % two_n;
            if e < n {
                out[e] = c.clone();
            } else {
                out[e - n] = center_mod(&-c, bits);
            }
        }
        Self { coeffs: out }
    }

    /// Smallest byte width holding every coefficient in two's complement.
    pub fn min_width(&self) -> usize {
        self.coeffs
            .iter()
            .map(|c| c.to_signed_bytes_le().len())
            .max()
            .unwrap_or(1)
            .max(1)
    }

    pub fn write_coeffs(&self, width: usize, out: &mut Vec<u8>) {
        for c in &self.coeffs {
            let mut bytes = c.to_signed_bytes_le();
            let fill = if c.is_negative() { 0xff } else { 0x00 };
            debug_assert!(bytes.len() <= width);
            bytes.resize(width, fill);
            out.extend_from_slice(&bytes);
        }
    }

    pub fn read_coeffs(bytes: &[u8], width: usize, degree: usize) -> Result<Self> {
        if bytes.len() != width * degree {
            return Err(HeError::Format(format!(
                "expected {} coefficient bytes, got {}",
                width * degree,
                bytes.len()
            )));
        }
        Ok(Self {
            coeffs: bytes
                .chunks_exact(width)
                .map(BigInt::from_signed_bytes_le)
                .collect(),
        })
    }

    /// True when every coefficient is in the centered range for `2^bits`.
    pub fn is_reduced(&self, bits: u32) -> bool {
        let half = BigInt::one() << (bits - 1);
        let neg_half = -&half;
        self.coeffs.iter().all(|c| *c > neg_half && *c <= half)
    }
}

/// Residues of a polynomial modulo the first `rows` primes, in NTT form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NttForm {
    rows: Vec<Vec<u64>>,
}

impl NttForm {
    pub fn primes(&self) -> usize {
        self.rows.len()
    }
}

/// Exact integer negacyclic products via multi-prime NTT and CRT.
#[derive(Debug, Clone)]
pub struct RnsMultiplier {
    degree: usize,
    tables: Vec<NttTable>,
    /// garner[i][j] = p_j^{-1} mod p_i for j < i.
    garner: Vec<Vec<Shoup>>,
    /// 2^64 mod p_i, used to fold big-integer limbs.
    limb_base: Vec<Shoup>,
    /// Product of the first k primes, for k = 0..=count.
    prefix_products: Vec<BigUint>,
}

impl RnsMultiplier {
    /// Multiplier able to hold products of up to `max_product_bits` bits.
    pub fn new(degree: usize, max_product_bits: u64) -> Self {
        let count = Self::primes_for(max_product_bits);
        let primes = ntt_primes(degree, count);
        let tables: Vec<NttTable> = primes.iter().map(|&p| NttTable::new(p, degree)).collect();
        let garner = (0..count)
            .map(|i| {
                let mi = tables[i].modulus;
                (0..i).map(|j| mi.shoup(mi.inv(primes[j] % mi.p))).collect()
            })
            .collect();
        let limb_base = tables
            .iter()
            .map(|t| {
                let m = t.modulus;
                m.shoup(((1u128 << 64) % m.p as u128) as u64)
            })
            .collect();
        let mut prefix_products = vec![BigUint::one()];
        for &p in &primes {
            let next = prefix_products.last().unwrap() * p;
            prefix_products.push(next);
        }
        Self {
            degree,
            tables,
            garner,
            limb_base,
            prefix_products,
        }
    }

    /// Number of 61-bit primes whose product exceeds `2^(bits + 1)`.
    pub fn primes_for(bits: u64) -> usize {
        ((bits + 2) as usize).div_ceil(60)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn capacity(&self) -> usize {
        self.tables.len()
    }

    /// Primes needed for a product of operands with the given magnitude bits.
    pub fn primes_for_product(&self, bits_a: u64, bits_b: u64) -> Result<usize> {
        let log_n = self.degree.trailing_zeros() as u64;
        let k = Self::primes_for(bits_a + bits_b + log_n);
        if k > self.capacity() {
            return Err(HeError::Config(format!(
                "product of {bits_a}- and {bits_b}-bit polynomials exceeds multiplier capacity"
            )));
        }
        Ok(k)
    }

    fn residue(&self, x: &BigInt, m: &Modulus, base: Shoup) -> u64 {
        let (sign, digits) = x.to_u64_digits();
        let mut r = 0u64;
        for &d in digits.iter().rev() {
            r = m.add(m.mul_shoup(r, base), d % m.p);
        }
        if sign == Sign::Minus && r != 0 {
            m.p - r
        } else {
            r
        }
    }

    pub fn forward(&self, a: &RingPoly, primes: usize) -> NttForm {
        assert_eq!(a.degree(), self.degree);
        let rows = (0..primes)
            .map(|i| {
                let table = &self.tables[i];
                let mut row: Vec<u64> = a
                    .coeffs
                    .iter()
                    .map(|c| self.residue(c, &table.modulus, self.limb_base[i]))
                    .collect();
                table.forward(&mut row);
                row
            })
            .collect();
        NttForm { rows }
    }

    /// Pointwise product using the first `primes` rows of each operand.
    pub fn mul_forms(&self, a: &NttForm, b: &NttForm, primes: usize) -> NttForm {
        let rows = (0..primes)
            .map(|i| {
                let m = &self.tables[i].modulus;
                a.rows[i]
                    .iter()
                    .zip(&b.rows[i])
                    .map(|(x, y)| m.mul(*x, *y))
                    .collect()
            })
            .collect();
        NttForm { rows }
    }

    pub fn add_forms(&self, a: &NttForm, b: &NttForm) -> NttForm {
        let primes = a.primes().min(b.primes());
        let rows = (0..primes)
            .map(|i| {
                let m = &self.tables[i].modulus;
                a.rows[i]
                    .iter()
                    .zip(&b.rows[i])
                    .map(|(x, y)| m.add(*x, *y))
                    .collect()
            })
            .collect();
        NttForm { rows }
    }

    /// Exact signed integer coefficients, assuming each lies strictly inside
    /// half the product of the primes used.
    pub fn inverse(&self, form: NttForm) -> RingPoly {
        let k = form.primes();
        let mut rows = form.rows;
        for (row, table) in rows.iter_mut().zip(&self.tables) {
            table.inverse(row);
        }
        let modulus = &self.prefix_products[k];
        let half = modulus >> 1u32;
        let mut digits = vec![0u64; k];
        let coeffs = (0..self.degree)
            .map(|c| {
                // Garner mixed-radix digits.
                for i in 0..k {
                    let m = &self.tables[i].modulus;
                    let mut x = rows[i][c];
                    for j in 0..i {
                        x = m.mul_shoup(m.sub(x, digits[j] % m.p), self.garner[i][j]);
                    }
                    digits[i] = x;
                }
                let mut value = BigUint::from(digits[k - 1]);
                for i in (0..k - 1).rev() {
                    value *= self.tables[i].modulus.p;
                    value += digits[i];
                }
                if value > half {
                    BigInt::from_biguint(Sign::Minus, modulus - value)
                } else {
                    BigInt::from_biguint(Sign::Plus, value)
                }
            })
            .collect();
        RingPoly { coeffs }
    }

    /// Exact product of `a` and `b` in Z[X]/(X^N + 1).
    pub fn mul(&self, a: &RingPoly, b: &RingPoly) -> Result<RingPoly> {
        let k = self.primes_for_product(a.max_bits(), b.max_bits())?;
        let fa = self.forward(a, k);
        let fb = self.forward(b, k);
        Ok(self.inverse(self.mul_forms(&fa, &fb, k)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, RngCore, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn schoolbook(a: &RingPoly, b: &RingPoly) -> RingPoly {
        let n = a.degree();
        let mut out = vec![BigInt::zero(); n];
        for i in 0..n {
            for j in 0..n {
                let prod = &a.coeffs[i] * &b.coeffs[j];
                if i + j < n {
                    out[i + j] += prod;
                } else {
                    out[i + j - n] -= prod;
                }
            }
        }
        RingPoly::from_coeffs(out)
    }

    fn random_poly(rng: &mut ChaCha8Rng, n: usize, bits: u64) -> RingPoly {
        RingPoly::from_coeffs(
            (0..n)
                .map(|_| {
                    let mut bytes = vec![0u8; bits.div_ceil(8) as usize];
                    rng.fill_bytes(&mut bytes);
                    let mag = BigInt::from_bytes_le(Sign::Plus, &bytes) >> (8 * bytes.len() as u64 - bits);
                    if rng.random_bool(0.5) { -mag } else { mag }
                })
                .collect(),
        )
    }

    #[test]
    fn crt_product_matches_schoolbook() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [2usize, 4, 8, 16, 32] {
            for bits in [3u64, 60, 200, 700] {
                let mult = RnsMultiplier::new(n, 2 * bits + 8);
                let a = random_poly(&mut rng, n, bits);
                let b = random_poly(&mut rng, n, bits);
                assert_eq!(mult.mul(&a, &b).unwrap(), schoolbook(&a, &b), "n={n} bits={bits}");
            }
        }
    }

    #[test]
    fn center_mod_range() {
        let x = BigInt::from(-5);
        assert_eq!(center_mod(&x, 3), BigInt::from(3));
        assert_eq!(center_mod(&BigInt::from(4), 3), BigInt::from(4));
        assert_eq!(center_mod(&BigInt::from(5), 3), BigInt::from(-3));
        assert_eq!(center_mod(&BigInt::from(-4), 3), BigInt::from(4));
    }

    #[test]
    fn coefficient_bytes_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = random_poly(&mut rng, 16, 100);
        let w = p.min_width();
        let mut buf = Vec::new();
        p.write_coeffs(w, &mut buf);
        assert_eq!(RingPoly::read_coeffs(&buf, w, 16).unwrap(), p);
    }

    #[test]
    fn automorphism_composes() {
        let p = RingPoly::from_i64(&[1, 2, 3, 4, 5, 6, 7, 8]);
        // 5 * 13 = 65 = 1 mod 16
        let back = p.automorphism(5, 10).automorphism(13, 10);
        assert_eq!(back, p);
    }
}

//! Negacyclic NTT over 61-bit primes `p = 1 mod 2N`.
//!
//! Big-modulus polynomial products are computed exactly over the integers by
//! transforming residues modulo several such primes and recombining with CRT
//! (see [`super::ring::RnsMultiplier`]).

/// A prime modulus with Barrett constants for 122-bit products.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Modulus {
    pub p: u64,
    /// floor(2^124 / p)
    barrett: u64,
}

impl Modulus {
    pub fn new(p: u64) -> Self {
        assert!(p > (1 << 60) && p < (1 << 61), "modulus must be a 61-bit prime");
        let barrett = ((1u128 << 124) / p as u128) as u64;
        Self { p, barrett }
    }

    /// `x mod p` for `x < 2^122`.
    #[inline]
    pub fn reduce_u128(&self, x: u128) -> u64 {
        let q = (((x >> 60) * self.barrett as u128) >> 64) as u64;
        let mut r = (x - q as u128 * self.p as u128) as u64;
        while r >= self.p {
            r -= self.p;
        }
        r
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        self.reduce_u128(a as u128 * b as u128)
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.p {
            s - self.p
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.p - b
        }
    }

    pub fn pow(&self, mut base: u64, mut exp: u64) -> u64 {
        let mut acc = 1u64;
        base %= self.p;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    pub fn inv(&self, a: u64) -> u64 {
        self.pow(a, self.p - 2)
    }

    /// Precomputed multiplier for repeated products by the constant `w`.
    pub fn shoup(&self, w: u64) -> Shoup {
        Shoup {
            w,
            w_shoup: (((w as u128) << 64) / self.p as u128) as u64,
        }
    }

    #[inline]
    pub fn mul_shoup(&self, a: u64, w: Shoup) -> u64 {
        let q = ((a as u128 * w.w_shoup as u128) >> 64) as u64;
        let r = a.wrapping_mul(w.w).wrapping_sub(q.wrapping_mul(self.p));
        if r >= self.p {
            r - self.p
        } else {
            r
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shoup {
    w: u64,
    w_shoup: u64,
}

/// Forward/inverse negacyclic transform tables for one prime.
#[derive(Debug, Clone)]
pub struct NttTable {
    pub modulus: Modulus,
    n: usize,
    /// psi^bitrev(i), psi a primitive 2n-th root of unity.
    psi_rev: Vec<Shoup>,
    psi_inv_rev: Vec<Shoup>,
    n_inv: Shoup,
}

impl NttTable {
    pub fn new(p: u64, n: usize) -> Self {
        assert!(n.is_power_of_two() && n >= 2);
        let modulus = Modulus::new(p);
        assert_eq!((p - 1) % (2 * n as u64), 0, "prime must be 1 mod 2n");
        let psi = primitive_root_2n(&modulus, n);
        let psi_inv = modulus.inv(psi);
        let log_n = n.trailing_zeros();
        let mut psi_rev = Vec::with_capacity(n);
        let mut psi_inv_rev = Vec::with_capacity(n);
        for i in 0..n {
            let e = bit_reverse(i, log_n) as u64;
            psi_rev.push(modulus.shoup(modulus.pow(psi, e)));
            psi_inv_rev.push(modulus.shoup(modulus.pow(psi_inv, e)));
        }
        let n_inv = modulus.shoup(modulus.inv(n as u64));
        Self {
            modulus,
            n,
            psi_rev,
            psi_inv_rev,
            n_inv,
        }
    }

    pub fn forward(&self, a: &mut [u64]) {
        debug_assert_eq!(a.len(), self.n);
        let m = &self.modulus;
        let mut t = self.n;
        let mut groups = 1;
        while groups < self.n {
            t >>= 1;
            for i in 0..groups {
                let w = self.psi_rev[groups + i];
                let start = 2 * i * t;
                for j in start..start + t {
                    let u = a[j];
                    let v = m.mul_shoup(a[j + t], w);
                    a[j] = m.add(u, v);
                    a[j + t] = m.sub(u, v);
                }
            }
            groups <<= 1;
        }
    }

    pub fn inverse(&self, a: &mut [u64]) {
        debug_assert_eq!(a.len(), self.n);
        let m = &self.modulus;
        let mut t = 1;
        let mut groups = self.n;
        while groups > 1 {
            let half = groups >> 1;
            let mut start = 0;
            for i in 0..half {
                let w = self.psi_inv_rev[half + i];
                for j in start..start + t {
                    let u = a[j];
                    let v = a[j + t];
                    a[j] = m.add(u, v);
                    a[j + t] = m.mul_shoup(m.sub(u, v), w);
                }
                start += 2 * t;
            }
            t <<= 1;
            groups = half;
        }
        for x in a.iter_mut() {
            *x = m.mul_shoup(*x, self.n_inv);
        }
    }
}

fn bit_reverse(x: usize, bits: u32) -> usize {
    if bits == 0 {
        0
    } else {
        x.reverse_bits() >> (usize::BITS - bits)
    }
}

fn primitive_root_2n(m: &Modulus, n: usize) -> u64 {
    let order = 2 * n as u64;
    let cofactor = (m.p - 1) / order;
    for g in 2..u64::MAX {
        let psi = m.pow(g, cofactor);
        // psi has order dividing 2n; it is primitive iff psi^n = -1.
        if m.pow(psi, n as u64) == m.p - 1 {
            return psi;
        }
    }
    unreachable!("a primitive root exists for p = 1 mod 2n")
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    let mulmod = |a: u64, b: u64| ((a as u128 * b as u128) % n as u128) as u64;
    let powmod = |mut b: u64, mut e: u64| {
        let mut acc = 1u64;
        while e > 0 {
            if e & 1 == 1 {
                acc = mulmod(acc, b);
            }
            b = mulmod(b, b);
            e >>= 1;
        }
        acc
    };
    // Deterministic for all 64-bit integers.
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = powmod(a, d);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mulmod(x, x);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// The `count` largest primes below 2^61 that are 1 mod 2n, descending.
pub fn ntt_primes(n: usize, count: usize) -> Vec<u64> {
    let step = 2 * n as u64;
    let mut candidate = ((1u64 << 61) / step) * step + 1;
    if candidate >= 1 << 61 {
        candidate -= step;
    }
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        assert!(candidate > (1 << 60), "ran out of 61-bit NTT primes");
        if is_prime(candidate) {
            out.push(candidate);
        }
        candidate -= step;
    }
    out
}

use num_complex::Complex64;

use super::clear::ClearPayload;
use crate::ckks::{self, CkksCiphertext};
use crate::error::{HeError, Result};

pub const CIPHER_MAGIC: &[u8; 4] = b"FHEC";
pub const CIPHER_VERSION: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BackendTag {
    Clear,
    Ckks,
}

impl BackendTag {
    pub fn to_byte(self) -> u8 {
        match self {
            BackendTag::Clear => 0,
            BackendTag::Ckks => 1,
        }
    }

    pub fn from_byte(b: u8) -> Result<Self> {
        match b {
            0 => Ok(BackendTag::Clear),
            1 => Ok(BackendTag::Ckks),
            other => Err(HeError::Format(format!("unknown backend tag {other}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BackendTag::Clear => "clear",
            BackendTag::Ckks => "ckks",
        }
    }
}

impl std::str::FromStr for BackendTag {
    type Err = HeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clear" => Ok(BackendTag::Clear),
            "ckks" => Ok(BackendTag::Ckks),
            other => Err(HeError::Config(format!(
                "unknown backend '{other}' (expected clear or ckks)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Clear(ClearPayload),
    Ckks(CkksCiphertext),
}

/// A ciphertext with its level and scale metadata. Value-semantic: every
/// operation returns a new handle.
#[derive(Debug, Clone, PartialEq)]
pub struct CipherHandle {
    slot_count: usize,
    level: u32,
    scale_bits: u32,
    payload: Payload,
}

impl CipherHandle {
    pub(crate) fn new(slot_count: usize, level: u32, scale_bits: u32, payload: Payload) -> Self {
        Self {
            slot_count,
            level,
            scale_bits,
            payload,
        }
    }

    pub fn backend(&self) -> BackendTag {
        match self.payload {
            Payload::Clear(_) => BackendTag::Clear,
            Payload::Ckks(_) => BackendTag::Ckks,
        }
    }

    pub fn slot_count(&self) -> usize {
        self.slot_count
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn scale_bits(&self) -> u32 {
        self.scale_bits
    }

    pub fn payload(&self) -> &Payload {
        &self.payload
    }

    /// Serializes as `FHEC | version | backend | n | level | scale_bits |
    /// coeff_bytes | c0 | c1`, all integers little-endian. Clear payloads store
    /// real parts in `c0` and imaginary parts in `c1` as IEEE-754 bit patterns,
    /// followed by the u64 noise tag.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CIPHER_MAGIC);
        out.push(CIPHER_VERSION);
        out.push(self.backend().to_byte());
        out.extend_from_slice(&(self.slot_count as u32).to_le_bytes());
        out.extend_from_slice(&self.level.to_le_bytes());
        out.extend_from_slice(&self.scale_bits.to_le_bytes());
        match &self.payload {
            Payload::Clear(p) => {
                out.extend_from_slice(&8u32.to_le_bytes());
                for s in p.slots() {
                    out.extend_from_slice(&s.re.to_bits().to_le_bytes());
                }
                for s in p.slots() {
                    out.extend_from_slice(&s.im.to_bits().to_le_bytes());
                }
                out.extend_from_slice(&p.noise_tag().to_le_bytes());
            }
            Payload::Ckks(ct) => {
                let width = ct.coeff_bytes();
                out.extend_from_slice(&(width as u32).to_le_bytes());
                ct.c0().write_coeffs(width, &mut out);
                ct.c1().write_coeffs(width, &mut out);
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        const HEADER: usize = 4 + 1 + 1 + 4 * 4;
        if bytes.len() < HEADER {
            return Err(HeError::Format("ciphertext blob shorter than header".into()));
        }
        if &bytes[..4] != CIPHER_MAGIC {
            return Err(HeError::Format("bad ciphertext magic".into()));
        }
        if bytes[4] != CIPHER_VERSION {
            return Err(HeError::Format(format!(
                "unsupported ciphertext version {}",
                bytes[4]
            )));
        }
        let backend = BackendTag::from_byte(bytes[5])?;
        let word = |i: usize| u32::from_le_bytes(bytes[6 + 4 * i..10 + 4 * i].try_into().unwrap());
        let n = word(0) as usize;
        let level = word(1);
        let scale_bits = word(2);
        let width = word(3) as usize;
        if n == 0 || !n.is_power_of_two() || n > (1 << 14) {
            return Err(HeError::Format(format!("invalid slot count {n}")));
        }
        let body = &bytes[HEADER..];
        match backend {
            BackendTag::Clear => {
                if width != 8 || body.len() != 16 * n + 8 {
                    return Err(HeError::Format("clear ciphertext body has wrong length".into()));
                }
                let read = |i: usize| {
                    f64::from_bits(u64::from_le_bytes(body[8 * i..8 * i + 8].try_into().unwrap()))
                };
                let slots: Vec<Complex64> =
                    (0..n).map(|i| Complex64::new(read(i), read(n + i))).collect();
                if slots.iter().any(|s| !s.re.is_finite() || !s.im.is_finite()) {
                    return Err(HeError::Format("non-finite slot value".into()));
                }
                let tag = u64::from_le_bytes(body[16 * n..].try_into().unwrap());
                Ok(Self::new(
                    n,
                    level,
                    scale_bits,
                    Payload::Clear(ClearPayload::with_tag(slots, tag)),
                ))
            }
            BackendTag::Ckks => {
                let degree = 2 * n;
                if width == 0 || body.len() != 2 * degree * width {
                    return Err(HeError::Format("ckks ciphertext body has wrong length".into()));
                }
                let (b0, b1) = body.split_at(degree * width);
                let c0 = ckks::RingPoly::read_coeffs(b0, width, degree)?;
                let c1 = ckks::RingPoly::read_coeffs(b1, width, degree)?;
                let ct = CkksCiphertext::from_parts(c0, c1)?;
                Ok(Self::new(n, level, scale_bits, Payload::Ckks(ct)))
            }
        }
    }
}

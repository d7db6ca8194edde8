use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::{BackendTag, ClearBackend, Decryptor, Encryptor, Evaluator, HEParams};
use crate::ckks::{
    self, CkksContext, CkksDecryptor, CkksEncryptor, CkksEvaluator, CkksSecretEncryptor, KeySwitchKey, PublicKeyPoly,
    RingPoly, SecretKeyPoly,
};
use crate::error::{HeError, Result};

pub const KEY_MAGIC: &[u8; 4] = b"FHEK";
pub const KEY_FILE_VERSION: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeyType {
    Secret,
    Public,
    Relin,
    Rotation,
}

impl KeyType {
    pub fn to_byte(self) -> u8 {
        match self {
            KeyType::Secret => 1,
            KeyType::Public => 2,
            KeyType::Relin => 3,
            KeyType::Rotation => 4,
        }
    }

    pub fn from_byte(b: u8) -> Result<Self> {
        match b {
            1 => Ok(KeyType::Secret),
            2 => Ok(KeyType::Public),
            3 => Ok(KeyType::Relin),
            4 => Ok(KeyType::Rotation),
            other => Err(HeError::Format(format!("unknown key type byte {other}"))),
        }
    }
}

/// Serialized key: `FHEK | version | key type | log_slots | log_scale |
/// log_modulus | backend | [step] | poly count | (degree, width, coeffs)*`.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyBlob {
    pub key_type: KeyType,
    pub log_slots: u32,
    pub log_scale: u32,
    pub log_modulus: u32,
    pub backend: BackendTag,
    /// Rotation step; present only for rotation keys.
    pub step: Option<u32>,
    pub polys: Vec<RingPoly>,
}

impl KeyBlob {
    fn new(key_type: KeyType, params: &HEParams, backend: BackendTag, step: Option<u32>, polys: Vec<RingPoly>) -> Self {
        Self {
            key_type,
            log_slots: params.log_slots,
            log_scale: params.log_scale,
            log_modulus: params.log_modulus,
            backend,
            step,
            polys,
        }
    }

    pub fn is_secret(&self) -> bool {
        self.key_type == KeyType::Secret
    }

    pub fn params(&self, noise_stddev: f64) -> Result<HEParams> {
        HEParams::with_noise(self.log_slots, self.log_scale, self.log_modulus, noise_stddev)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(KEY_MAGIC);
        out.push(KEY_FILE_VERSION);
        out.push(self.key_type.to_byte());
        for w in [self.log_slots, self.log_scale, self.log_modulus] {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out.push(self.backend.to_byte());
        if let Some(step) = self.step {
            out.extend_from_slice(&step.to_le_bytes());
        }
        out.extend_from_slice(&(self.polys.len() as u32).to_le_bytes());
        for p in &self.polys {
            let width = p.min_width();
            out.extend_from_slice(&(p.degree() as u32).to_le_bytes());
            out.extend_from_slice(&(width as u32).to_le_bytes());
            p.write_coeffs(width, &mut out);
        }
        out
    }

    /// Reads only the key-type byte, without parsing the body.
    pub fn peek_type(bytes: &[u8]) -> Result<KeyType> {
        if bytes.len() < 6 || &bytes[..4] != KEY_MAGIC {
            return Err(HeError::Format("not a key blob".into()));
        }
        KeyType::from_byte(bytes[5])
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != KEY_MAGIC {
            return Err(HeError::Format("bad key magic".into()));
        }
        let version = r.u8()?;
        if version != KEY_FILE_VERSION {
            return Err(HeError::Format(format!("unsupported key version {version}")));
        }
        let key_type = KeyType::from_byte(r.u8()?)?;
        let (log_slots, log_scale, log_modulus) = (r.u32()?, r.u32()?, r.u32()?);
        let backend = BackendTag::from_byte(r.u8()?)?;
        let step = if key_type == KeyType::Rotation {
            Some(r.u32()?)
        } else {
            None
        };
        let count = r.u32()? as usize;
        if count > 2 {
            return Err(HeError::Format(format!("key has {count} polynomials")));
        }
        let mut polys = Vec::with_capacity(count);
        for _ in 0..count {
            let degree = r.u32()? as usize;
            let width = r.u32()? as usize;
            if degree == 0 || degree > 1 << 15 || width == 0 {
                return Err(HeError::Format("bad key polynomial header".into()));
            }
            let len = degree
                .checked_mul(width)
                .ok_or_else(|| HeError::Format("key polynomial too large".into()))?;
            polys.push(RingPoly::read_coeffs(r.take(len)?, width, degree)?);
        }
        if r.pos != bytes.len() {
            return Err(HeError::Format("trailing bytes after key".into()));
        }
        Ok(Self {
            key_type,
            log_slots,
            log_scale,
            log_modulus,
            backend,
            step,
            polys,
        })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| HeError::Format("truncated key blob".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SecretKey {
    Clear,
    Ckks(SecretKeyPoly),
}

#[derive(Debug, Clone, PartialEq)]
pub enum PublicKey {
    Clear,
    Ckks(PublicKeyPoly),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SwitchKey {
    Clear,
    Ckks(Arc<KeySwitchKey>),
}

/// Relinearization and rotation keys: everything a server needs to evaluate.
#[derive(Debug, Clone)]
pub struct EvalKeys {
    params: HEParams,
    backend: BackendTag,
    ctx: Option<Arc<CkksContext>>,
    relin: SwitchKey,
    rotations: BTreeMap<usize, SwitchKey>,
}

impl EvalKeys {
    pub fn params(&self) -> &HEParams {
        &self.params
    }

    pub fn backend(&self) -> BackendTag {
        self.backend
    }

    pub fn rotation_steps(&self) -> Vec<usize> {
        self.rotations.keys().copied().collect()
    }

    pub fn evaluator(&self) -> Result<Arc<dyn Evaluator>> {
        match (&self.ctx, &self.relin) {
            (None, SwitchKey::Clear) => Ok(Arc::new(ClearBackend::with_rotation_keys(
                self.params,
                self.rotations.keys().copied(),
            )?)),
            (Some(ctx), SwitchKey::Ckks(relin)) => {
                let mut rotations = BTreeMap::new();
                for (&step, key) in &self.rotations {
                    match key {
                        SwitchKey::Ckks(k) => {
                            rotations.insert(step, k.clone());
                        }
                        SwitchKey::Clear => {
                            return Err(HeError::Backend("clear rotation key in ckks key set".into()))
                        }
                    }
                }
                Ok(Arc::new(CkksEvaluator::new(ctx.clone(), relin.clone(), rotations)))
            }
            _ => Err(HeError::Backend("relinearization key does not match backend".into())),
        }
    }

    pub fn to_blobs(&self) -> Vec<KeyBlob> {
        let mut out = vec![KeyBlob::new(
            KeyType::Relin,
            &self.params,
            self.backend,
            None,
            switch_polys(&self.relin),
        )];
        for (&step, key) in &self.rotations {
            out.push(KeyBlob::new(
                KeyType::Rotation,
                &self.params,
                self.backend,
                Some(step as u32),
                switch_polys(key),
            ));
        }
        out
    }

    /// Rebuilds evaluation keys for `params` from relinearization and rotation
    /// blobs. Secret or public blobs are rejected.
    pub fn from_blobs(params: HEParams, backend: BackendTag, blobs: &[KeyBlob]) -> Result<Self> {
        let ctx = match backend {
            BackendTag::Clear => None,
            BackendTag::Ckks => Some(CkksContext::new(params)?),
        };
        Self::from_blobs_with(params, backend, ctx, blobs)
    }

    pub fn from_blobs_with(
        params: HEParams,
        backend: BackendTag,
        ctx: Option<Arc<CkksContext>>,
        blobs: &[KeyBlob],
    ) -> Result<Self> {
        let mut relin = None;
        let mut rotations = BTreeMap::new();
        for blob in blobs {
            check_blob(blob, &params, backend)?;
            let key = decode_switch(blob, ctx.as_deref())?;
            match blob.key_type {
                KeyType::Relin => relin = Some(key),
                KeyType::Rotation => {
                    let step = blob.step.unwrap_or(0) as usize;
                    if !step.is_power_of_two() || step >= params.slot_count() {
                        return Err(HeError::Format(format!("invalid rotation step {step}")));
                    }
                    rotations.insert(step, key);
                }
                KeyType::Secret | KeyType::Public => {
                    return Err(HeError::Format(format!(
                        "{:?} key is not an evaluation key",
                        blob.key_type
                    )))
                }
            }
        }
        let relin = relin.ok_or_else(|| HeError::Format("missing relinearization key".into()))?;
        Ok(Self {
            params,
            backend,
            ctx,
            relin,
            rotations,
        })
    }
}

fn switch_polys(key: &SwitchKey) -> Vec<RingPoly> {
    match key {
        SwitchKey::Clear => Vec::new(),
        SwitchKey::Ckks(k) => k.polys().into_iter().cloned().collect(),
    }
}

fn check_blob(blob: &KeyBlob, params: &HEParams, backend: BackendTag) -> Result<()> {
    if blob.backend != backend {
        return Err(HeError::Backend(format!(
            "{} key given to {} key set",
            blob.backend.name(),
            backend.name()
        )));
    }
    if (blob.log_slots, blob.log_scale, blob.log_modulus)
        != (params.log_slots, params.log_scale, params.log_modulus)
    {
        return Err(HeError::Params("key parameters do not match".into()));
    }
    Ok(())
}

fn expect_polys(blob: &KeyBlob, count: usize, degree: usize) -> Result<()> {
    if blob.polys.len() != count || blob.polys.iter().any(|p| p.degree() != degree) {
        return Err(HeError::Format(format!(
            "{:?} key needs {count} polynomials of degree {degree}",
            blob.key_type
        )));
    }
    Ok(())
}

fn decode_switch(blob: &KeyBlob, ctx: Option<&CkksContext>) -> Result<SwitchKey> {
    match ctx {
        None => {
            expect_polys(blob, 0, 0)?;
            Ok(SwitchKey::Clear)
        }
        Some(ctx) => {
            expect_polys(blob, 2, ctx.degree())?;
            let bits = ctx.key_modulus_bits();
            if !blob.polys.iter().all(|p| p.is_reduced(bits)) {
                return Err(HeError::Format("switching key coefficients out of range".into()));
            }
            Ok(SwitchKey::Ckks(Arc::new(KeySwitchKey::from_polys(
                ctx,
                blob.polys[0].clone(),
                blob.polys[1].clone(),
            ))))
        }
    }
}

/// All key material of one client.
#[derive(Debug, Clone)]
pub struct KeySet {
    secret: Option<SecretKey>,
    public: PublicKey,
    eval: EvalKeys,
}

const SECRET_FILE: &str = "secret.key";
const PUBLIC_FILE: &str = "public.key";
const RELIN_FILE: &str = "relin.key";

impl KeySet {
    /// Deterministic key generation from `seed`.
    pub fn generate(params: HEParams, backend: BackendTag, seed: u64) -> Result<Self> {
        params.validate()?;
        let steps: Vec<usize> = (0..params.log_slots).map(|i| 1usize << i).collect();
        match backend {
            BackendTag::Clear => Ok(Self {
                secret: Some(SecretKey::Clear),
                public: PublicKey::Clear,
                eval: EvalKeys {
                    params,
                    backend,
                    ctx: None,
                    relin: SwitchKey::Clear,
                    rotations: steps.into_iter().map(|s| (s, SwitchKey::Clear)).collect(),
                },
            }),
            BackendTag::Ckks => {
                let ctx = CkksContext::new(params)?;
                let mut rng = ChaCha20Rng::seed_from_u64(seed);
                let keys = ckks::keygen(&ctx, &mut rng)?;
                Ok(Self {
                    secret: Some(SecretKey::Ckks(keys.secret)),
                    public: PublicKey::Ckks(keys.public),
                    eval: EvalKeys {
                        params,
                        backend,
                        ctx: Some(ctx),
                        relin: SwitchKey::Ckks(keys.relin),
                        rotations: keys
                            .rotations
                            .into_iter()
                            .map(|(s, k)| (s, SwitchKey::Ckks(k)))
                            .collect(),
                    },
                })
            }
        }
    }

    pub fn params(&self) -> &HEParams {
        &self.eval.params
    }

    pub fn backend(&self) -> BackendTag {
        self.eval.backend
    }

    pub fn eval_keys(&self) -> &EvalKeys {
        &self.eval
    }

    pub fn has_secret(&self) -> bool {
        self.secret.is_some()
    }

    /// Copy without the secret key.
    pub fn public_only(&self) -> Self {
        Self {
            secret: None,
            public: self.public.clone(),
            eval: self.eval.clone(),
        }
    }

    pub fn encryptor(&self) -> Result<Arc<dyn Encryptor>> {
        match (&self.public, &self.eval.ctx) {
            (PublicKey::Clear, None) => Ok(Arc::new(ClearBackend::new(self.eval.params)?)),
            (PublicKey::Ckks(pk), Some(ctx)) => {
                Ok(Arc::new(CkksEncryptor::new(ctx.clone(), pk.clone())))
            }
            _ => Err(HeError::Backend("public key does not match backend".into())),
        }
    }

    pub fn decryptor(&self) -> Result<Arc<dyn Decryptor>> {
        match (&self.secret, &self.eval.ctx) {
            (Some(SecretKey::Clear), None) => Ok(Arc::new(ClearBackend::new(self.eval.params)?)),
            (Some(SecretKey::Ckks(sk)), Some(ctx)) => {
                Ok(Arc::new(CkksDecryptor::new(ctx.clone(), sk.clone())))
            }
            (None, _) => Err(HeError::Config("key set has no secret key".into())),
            _ => Err(HeError::Backend("secret key does not match backend".into())),
        }
    }

    /// Symmetric encryption under the secret key. Fresh ciphertexts carry
    /// less noise than public-key ones; only the key owner can produce them.
    pub fn secret_encryptor(&self) -> Result<Arc<dyn Encryptor>> {
        match (&self.secret, &self.eval.ctx) {
            (Some(SecretKey::Clear), None) => Ok(Arc::new(ClearBackend::new(self.eval.params)?)),
            (Some(SecretKey::Ckks(sk)), Some(ctx)) => {
                Ok(Arc::new(CkksSecretEncryptor::new(ctx.clone(), sk.clone())))
            }
            (None, _) => Err(HeError::Config("key set has no secret key".into())),
            _ => Err(HeError::Backend("secret key does not match backend".into())),
        }
    }

    pub fn evaluator(&self) -> Result<Arc<dyn Evaluator>> {
        self.eval.evaluator()
    }

    /// Same keys with a different clear-backend noise level.
    pub fn with_noise(&self, noise_stddev: f64) -> Result<Self> {
        let mut out = self.clone();
        out.eval.params =
            HEParams::with_noise(self.eval.params.log_slots, self.eval.params.log_scale, self.eval.params.log_modulus, noise_stddev)?;
        Ok(out)
    }

    pub fn secret_blob(&self) -> Option<KeyBlob> {
        self.secret.as_ref().map(|sk| {
            let polys = match sk {
                SecretKey::Clear => Vec::new(),
                SecretKey::Ckks(s) => vec![s.poly().clone()],
            };
            KeyBlob::new(KeyType::Secret, &self.eval.params, self.eval.backend, None, polys)
        })
    }

    pub fn public_blob(&self) -> KeyBlob {
        let polys = match &self.public {
            PublicKey::Clear => Vec::new(),
            PublicKey::Ckks(pk) => pk.polys().into_iter().cloned().collect(),
        };
        KeyBlob::new(KeyType::Public, &self.eval.params, self.eval.backend, None, polys)
    }

    /// Writes one file per key into `dir`.
    pub fn save(&self, dir: &Path) -> std::io::Result<()> {
        fs::create_dir_all(dir)?;
        if let Some(blob) = self.secret_blob() {
            fs::write(dir.join(SECRET_FILE), blob.to_bytes())?;
        }
        fs::write(dir.join(PUBLIC_FILE), self.public_blob().to_bytes())?;
        for blob in self.eval.to_blobs() {
            let name = match blob.step {
                Some(step) => format!("rot_{step}.key"),
                None => RELIN_FILE.to_string(),
            };
            fs::write(dir.join(name), blob.to_bytes())?;
        }
        Ok(())
    }

    /// Loads a key directory written by [`KeySet::save`]. The secret key is
    /// optional.
    pub fn load(dir: &Path, noise_stddev: f64) -> Result<Self> {
        let read = |name: &str| -> Result<KeyBlob> {
            let bytes = fs::read(dir.join(name))
                .map_err(|e| HeError::Format(format!("{}: {e}", dir.join(name).display())))?;
            KeyBlob::from_bytes(&bytes)
        };
        let public_blob = read(PUBLIC_FILE)?;
        if public_blob.key_type != KeyType::Public {
            return Err(HeError::Format("public.key does not hold a public key".into()));
        }
        let params = public_blob.params(noise_stddev)?;
        let backend = public_blob.backend;
        let ctx = match backend {
            BackendTag::Clear => None,
            BackendTag::Ckks => Some(CkksContext::new(params)?),
        };
        let degree = params.ring_degree();

        let public = match backend {
            BackendTag::Clear => PublicKey::Clear,
            BackendTag::Ckks => {
                expect_polys(&public_blob, 2, degree)?;
                PublicKey::Ckks(PublicKeyPoly::from_polys(
                    public_blob.polys[0].clone(),
                    public_blob.polys[1].clone(),
                ))
            }
        };

        let secret = if dir.join(SECRET_FILE).exists() {
            let blob = read(SECRET_FILE)?;
            check_blob(&blob, &params, backend)?;
            if blob.key_type != KeyType::Secret {
                return Err(HeError::Format("secret.key does not hold a secret key".into()));
            }
            Some(match backend {
                BackendTag::Clear => SecretKey::Clear,
                BackendTag::Ckks => {
                    expect_polys(&blob, 1, degree)?;
                    SecretKey::Ckks(SecretKeyPoly::from_poly(blob.polys[0].clone()))
                }
            })
        } else {
            None
        };

        let mut blobs = vec![read(RELIN_FILE)?];
        for i in 0..params.log_slots {
            blobs.push(read(&format!("rot_{}.key", 1u32 << i))?);
        }
        let eval = EvalKeys::from_blobs_with(params, backend, ctx, &blobs)?;
        Ok(Self {
            secret,
            public,
            eval,
        })
    }
}

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::{csv_table, fmt_f64, BenchError, EncryptionMode};
use crate::heops::{dft_sum, rot_add};
use crate::slotvec::{BackendTag, CipherHandle, Evaluator, HEParams, KeySet, SlotVector};
use crate::HeError;

pub const SUM_CSV_HEADER: &str =
    "method,size,trials,max_abs_error,mean_abs_error,mean_time_s,log_slots,log_scale,log_modulus,seed";
pub const DERIVED_CSV_HEADER: &str = "size,relative_error_pct,relative_speedup_pct";

/// Inputs are multiples of 2^-20, so every partial sum is exact in f64 and
/// the oracle does not depend on summation order.
const DYADIC_BITS: i32 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SumMethod {
    RotAdd,
    DftSum,
}

impl SumMethod {
    pub const ALL: [SumMethod; 2] = [SumMethod::RotAdd, SumMethod::DftSum];

    pub fn name(self) -> &'static str {
        match self {
            SumMethod::RotAdd => "rot_add",
            SumMethod::DftSum => "dft_sum",
        }
    }

    pub fn run(self, ev: &dyn Evaluator, c: &CipherHandle, size: usize) -> Result<CipherHandle, HeError> {
        match self {
            SumMethod::RotAdd => rot_add(ev, c, size),
            SumMethod::DftSum => dft_sum(ev, c, size),
        }
    }
}

impl fmt::Display for SumMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SumMethod {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        match s {
            "rot_add" => Ok(SumMethod::RotAdd),
            "dft_sum" => Ok(SumMethod::DftSum),
            other => Err(BenchError::Config(format!("unknown summation method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub method: SumMethod,
    pub size: usize,
    pub trials: usize,
    /// Largest |slot 0 - exact sum| over all trials.
    pub max_abs_error: f64,
    pub mean_abs_error: f64,
    /// Mean wall time of the summation alone, in seconds.
    pub mean_time: f64,
    pub params: HEParams,
    pub seed: u64,
    /// Set when the method could not run at this size, for example because
    /// the level budget was too small. Numeric columns are NaN then.
    pub failure: Option<String>,
}

impl BenchRecord {
    fn failed(method: SumMethod, size: usize, trials: usize, params: HEParams, seed: u64, why: String) -> Self {
        Self {
            method,
            size,
            trials,
            max_abs_error: f64::NAN,
            mean_abs_error: f64::NAN,
            mean_time: f64::NAN,
            params,
            seed,
            failure: Some(why),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.failure.is_none()
    }
}

#[derive(Debug, Clone)]
pub struct SumBenchConfig {
    pub sizes: Vec<usize>,
    pub trials: usize,
    pub params: HEParams,
    pub backend: BackendTag,
    pub seed: u64,
    /// Untimed runs per method before measuring.
    pub warmup: usize,
    pub encryption: EncryptionMode,
    /// `Some(floor)` gives each size its own ring with
    /// `max(log2(size), floor)` slot bits, keeping the scale and modulus of
    /// `params`. `None` runs every size in the ring of `params`. Inputs
    /// shorter than the ring are zero-padded.
    pub ring_floor: Option<u32>,
}

impl SumBenchConfig {
    pub fn new(sizes: Vec<usize>, trials: usize, params: HEParams, backend: BackendTag, seed: u64) -> Self {
        Self {
            sizes,
            trials,
            params,
            backend,
            seed,
            warmup: 2,
            encryption: EncryptionMode::default(),
            ring_floor: None,
        }
    }

    fn validate(&self) -> Result<(), BenchError> {
        if self.trials < 10 {
            return Err(BenchError::Config(format!("need at least 10 trials, got {}", self.trials)));
        }
        if self.sizes.is_empty() {
            return Err(BenchError::Config("no sizes given".into()));
        }
        for &size in &self.sizes {
            if size < 2 || !size.is_power_of_two() {
                return Err(BenchError::Config(format!("size {size} is not a power of two >= 2")));
            }
            if size > self.params.slot_count() && self.ring_floor.is_none() {
                return Err(BenchError::Config(format!(
                    "size {size} exceeds the {} slots of the parameter set",
                    self.params.slot_count()
                )));
            }
        }
        Ok(())
    }

    fn ring_for(&self, size: usize) -> Result<HEParams, HeError> {
        let Some(floor) = self.ring_floor else {
            return Ok(self.params);
        };
        HEParams::with_noise(
            size.trailing_zeros().max(floor),
            self.params.log_scale,
            self.params.log_modulus,
            self.params.noise_stddev,
        )
    }
}

/// Uniform multiples of 2^-20 in [-1, 1].
pub fn dyadic_vector(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    let m = 1i64 << DYADIC_BITS;
    (0..len)
        .map(|_| rng.random_range(-m..=m) as f64 / m as f64)
        .collect()
}

fn cell_rng(seed: u64, size: usize, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ (size as u64).rotate_left(32));
    rng.set_stream(stream);
    rng
}

const INPUT_STREAM: u64 = 1;
const ENCRYPT_STREAM: u64 = 2;
const WARMUP_STREAM: u64 = 3;

struct Cell {
    errors: Vec<f64>,
    time: f64,
    failure: Option<String>,
}

/// Runs both summation methods on the same encrypted inputs for every size.
///
/// Each trial encrypts one fresh random vector; both methods sum that same
/// ciphertext, and the error of each is `|slot 0 - sum|` against the exact
/// plaintext sum. Timing covers the summation call only. A method that runs
/// out of levels gets a record with `failure` set and NaN columns.
pub fn bench_sum(cfg: &SumBenchConfig) -> Result<Vec<BenchRecord>, BenchError> {
    cfg.validate()?;
    let mut rings: BTreeMap<u32, KeySet> = BTreeMap::new();
    let mut records = Vec::new();
    for &size in &cfg.sizes {
        let params = cfg.ring_for(size)?;
        let keys = match rings.entry(params.log_slots) {
            Entry::Occupied(e) => e.into_mut(),
            Entry::Vacant(e) => e.insert(KeySet::generate(params, cfg.backend, cfg.seed)?),
        };
        let enc = cfg.encryption.encryptor(keys)?;
        let ev = keys.evaluator()?;
        let dec = keys.decryptor()?;
        let n = params.slot_count();

        let mut cells: Vec<Cell> = SumMethod::ALL
            .iter()
            .map(|_| Cell { errors: Vec::with_capacity(cfg.trials), time: 0.0, failure: None })
            .collect();

        let mut warm_rng = cell_rng(cfg.seed, size, WARMUP_STREAM);
        for _ in 0..cfg.warmup {
            let v = dyadic_vector(&mut warm_rng, size);
            let c = enc.encrypt(&SlotVector::from_real_padded(&v, n)?, &mut warm_rng)?;
            for (m, cell) in SumMethod::ALL.iter().zip(cells.iter_mut()) {
                if let Err(e) = m.run(&*ev, &c, size) {
                    record_failure(cell, e)?;
                }
            }
        }

        let mut input_rng = cell_rng(cfg.seed, size, INPUT_STREAM);
        let mut enc_rng = cell_rng(cfg.seed, size, ENCRYPT_STREAM);
        for _ in 0..cfg.trials {
            let v = dyadic_vector(&mut input_rng, size);
            let oracle: f64 = v.iter().sum();
            let c = enc.encrypt(&SlotVector::from_real_padded(&v, n)?, &mut enc_rng)?;
            for (m, cell) in SumMethod::ALL.iter().zip(cells.iter_mut()) {
                if cell.failure.is_some() {
                    continue;
                }
                let start = Instant::now();
                let out = m.run(&*ev, &c, size);
                let elapsed = start.elapsed().as_secs_f64();
                match out {
                    Ok(out) => {
                        cell.time += elapsed;
                        let got = dec.decrypt(&out)?.as_slice()[0].re;
                        cell.errors.push((got - oracle).abs());
                    }
                    Err(e) => record_failure(cell, e)?,
                }
            }
        }

        for (m, cell) in SumMethod::ALL.iter().zip(cells) {
            records.push(match cell.failure {
                Some(why) => BenchRecord::failed(*m, size, cfg.trials, params, cfg.seed, why),
                None => BenchRecord {
                    method: *m,
                    size,
                    trials: cfg.trials,
                    max_abs_error: cell.errors.iter().fold(0.0, |a, &b| a.max(b)),
                    mean_abs_error: cell.errors.iter().sum::<f64>() / cfg.trials as f64,
                    mean_time: cell.time / cfg.trials as f64,
                    params,
                    seed: cfg.seed,
                    failure: None,
                },
            });
        }
    }
    Ok(records)
}

fn record_failure(cell: &mut Cell, e: HeError) -> Result<(), BenchError> {
    match e {
        HeError::DepthExceeded { .. } => {
            cell.failure.get_or_insert_with(|| e.to_string());
            Ok(())
        }
        other => Err(other.into()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedRow {
    pub size: usize,
    /// `(err_dft - err_ra) / err_ra * 100` on the max-abs errors.
    pub relative_error_pct: f64,
    /// `(t_dft - t_ra) / t_ra * 100` on the mean times.
    pub relative_speedup_pct: f64,
}

fn relative_pct(dft: f64, ra: f64) -> f64 {
    (dft - ra) / ra * 100.0
}

/// One row per size that has both methods, in the order the sizes first
/// appear.
pub fn derived_report(records: &[BenchRecord]) -> Vec<DerivedRow> {
    let mut sizes: Vec<usize> = Vec::new();
    for r in records {
        if !sizes.contains(&r.size) {
            sizes.push(r.size);
        }
    }
    sizes
        .into_iter()
        .filter_map(|size| {
            let find = |m| records.iter().find(|r| r.size == size && r.method == m);
            let (ra, dft) = (find(SumMethod::RotAdd)?, find(SumMethod::DftSum)?);
            Some(DerivedRow {
                size,
                relative_error_pct: relative_pct(dft.max_abs_error, ra.max_abs_error),
                relative_speedup_pct: relative_pct(dft.mean_time, ra.mean_time),
            })
        })
        .collect()
}

pub fn records_csv(records: &[BenchRecord]) -> String {
    csv_table(
        SUM_CSV_HEADER,
        records.iter().map(|r| {
            vec![
                r.method.name().to_string(),
                r.size.to_string(),
                r.trials.to_string(),
                fmt_f64(r.max_abs_error),
                fmt_f64(r.mean_abs_error),
                fmt_f64(r.mean_time),
                r.params.log_slots.to_string(),
                r.params.log_scale.to_string(),
                r.params.log_modulus.to_string(),
                r.seed.to_string(),
            ]
        }),
    )
}

pub fn derived_csv(rows: &[DerivedRow]) -> String {
    csv_table(
        DERIVED_CSV_HEADER,
        rows.iter().map(|r| {
            vec![
                r.size.to_string(),
                fmt_f64(r.relative_error_pct),
                fmt_f64(r.relative_speedup_pct),
            ]
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(method: SumMethod, err: f64, time: f64) -> BenchRecord {
        BenchRecord {
            method,
            size: 8,
            trials: 10,
            max_abs_error: err,
            mean_abs_error: err,
            mean_time: time,
            params: HEParams::new(3, 20, 100).unwrap(),
            seed: 0,
            failure: None,
        }
    }

    #[test]
    fn report_formulas_on_hand_values() {
        let rows = derived_report(&[record(SumMethod::RotAdd, 1.0, 0.5), record(SumMethod::DftSum, 2.0, 1.0)]);
        assert_eq!(rows, vec![DerivedRow { size: 8, relative_error_pct: 100.0, relative_speedup_pct: 100.0 }]);
        assert_eq!(derived_csv(&rows), "size,relative_error_pct,relative_speedup_pct\n8,100,100\n");
    }

    #[test]
    fn clear_backend_has_zero_rot_add_error_and_is_deterministic() {
        let params = HEParams::new(6, 20, 200).unwrap();
        let mut cfg = SumBenchConfig::new(vec![4, 16, 64], 10, params, BackendTag::Clear, 9);
        cfg.warmup = 0;
        let a = bench_sum(&cfg).unwrap();
        assert_eq!(a.len(), 6);
        for r in &a {
            assert!(r.is_ok());
            assert_eq!(r.max_abs_error, 0.0, "{r:?}");
        }
        let b = bench_sum(&cfg).unwrap();
        let errs = |rs: &[BenchRecord]| rs.iter().map(|r| (r.max_abs_error, r.mean_abs_error)).collect::<Vec<_>>();
        assert_eq!(errs(&a), errs(&b));
        let csv = records_csv(&a);
        assert!(csv.starts_with(SUM_CSV_HEADER));
        assert!(csv.lines().nth(1).unwrap().starts_with("rot_add,4,10,0,0,"));
    }

    #[test]
    fn depth_shortfall_is_per_record() {
        let params = HEParams::new(5, 20, 100).unwrap();
        let mut cfg = SumBenchConfig::new(vec![4, 32], 10, params, BackendTag::Clear, 1);
        cfg.warmup = 1;
        let rs = bench_sum(&cfg).unwrap();
        let by = |m, s| rs.iter().find(|r| r.method == m && r.size == s).unwrap();
        assert!(by(SumMethod::DftSum, 4).is_ok());
        assert!(by(SumMethod::RotAdd, 32).is_ok());
        let failed = by(SumMethod::DftSum, 32);
        assert!(failed.failure.as_deref().unwrap().contains("depth exceeded"));
        assert!(records_csv(&rs).contains("dft_sum,32,10,NaN,NaN,NaN,5,20,100,1"));
    }

    #[test]
    fn rejects_bad_configs() {
        let params = HEParams::new(3, 20, 100).unwrap();
        assert!(bench_sum(&SumBenchConfig::new(vec![8], 9, params, BackendTag::Clear, 0)).is_err());
        assert!(bench_sum(&SumBenchConfig::new(vec![16], 10, params, BackendTag::Clear, 0)).is_err());
        assert!(bench_sum(&SumBenchConfig::new(vec![6], 10, params, BackendTag::Clear, 0)).is_err());
    }

    #[test]
    fn dyadic_values_are_in_range() {
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        let v = dyadic_vector(&mut rng, 1000);
        assert!(v.iter().all(|x| (-1.0..=1.0).contains(x) && (x * 1048576.0).fract() == 0.0));
    }
}

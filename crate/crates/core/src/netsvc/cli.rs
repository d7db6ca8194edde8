//! `fhed` command line. Exit codes: 0 success, 1 usage, 2 runtime failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde_json::json;
use thiserror::Error;

use super::{client_submit, NetError, Server, SubmitOptions};
use crate::bench::{
    bench_agreement, bench_mae, bench_sum, derived_csv, derived_report, mae_csv, records_csv, write_text,
    ActivationKind, BenchError, EncryptionMode, SumBenchConfig,
};
use crate::heops::{depth_estimate, CompConfig, OpDescriptor};
use crate::model::{
    encode_symptoms, encrypted_infer, recommended_params, synth_dataset, synth_weights, ModelError, NetworkSpec,
    Prediction, Sample, SymptomResponse, SynthConfig,
};
use crate::slotvec::{BackendTag, CipherHandle, HEParams, KeySet, SlotVector};
use crate::HeError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "fhed", version, about = "Encrypted inference for a symptom-to-disease classifier")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a key directory (secret, public, relinearization and rotation keys).
    Keygen(KeygenArgs),
    /// Encrypt a symptom response or a JSON array of numbers under the public key.
    Encrypt(EncryptArgs),
    /// Decrypt a ciphertext file.
    Decrypt(DecryptArgs),
    /// Run the network on an encrypted input locally.
    Infer(InferArgs),
    /// Run the blind evaluation server.
    Serve(ServeArgs),
    /// Encrypt a symptom response, have a server classify it, decrypt the answer.
    Submit(SubmitArgs),
    /// Summation error and timing: rotate-and-add against DFT.
    BenchSum(BenchSumArgs),
    /// Mean absolute error between activation pairs.
    BenchMae(BenchMaeArgs),
    /// Argmax agreement between encrypted and plaintext inference.
    BenchAgreement(BenchAgreementArgs),
    /// Write a synthetic network, dataset and symptom responses.
    Synth(SynthArgs),
    /// Depth estimate for a pipeline or a weights file.
    Plan(PlanArgs),
}

#[derive(Debug, Args)]
pub struct KeygenArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// log2 of the slot count.
    #[arg(long)]
    pub logn: u32,
    /// Scale bits (log2 p).
    #[arg(long)]
    pub logp: u32,
    /// Modulus bits (log2 q).
    #[arg(long)]
    pub logq: u32,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "ckks")]
    pub backend: BackendTag,
}

#[derive(Debug, Args)]
pub struct EncryptArgs {
    #[arg(long)]
    pub keys: PathBuf,
    /// Symptom response JSON (needs --weights) or a JSON array of numbers.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Weights file whose symptom labels encode the response.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct DecryptArgs {
    #[arg(long)]
    pub keys: PathBuf,
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Report only the K largest values.
    #[arg(long)]
    pub top: Option<usize>,
    /// Weights file: decode the output slots as a prediction.
    #[arg(long)]
    pub weights: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[arg(long)]
    pub weights: PathBuf,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub keys: PathBuf,
    #[arg(long)]
    pub backend: BackendTag,
    /// Where to write the output ciphertext.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub weights: PathBuf,
    #[arg(long)]
    pub bind: String,
    #[arg(long)]
    pub backend: BackendTag,
    /// Take the parameter set from this key directory's public key.
    #[arg(long, conflicts_with_all = ["logp", "logq"])]
    pub keys: Option<PathBuf>,
    #[arg(long, default_value_t = 30)]
    pub logp: u32,
    /// Defaults to the smallest modulus covering the network depth.
    #[arg(long)]
    pub logq: Option<u32>,
}

#[derive(Debug, Args)]
pub struct SubmitArgs {
    #[arg(long)]
    pub addr: String,
    #[arg(long)]
    pub keys: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    /// Local copy of the served weights file, for labels and the model id.
    #[arg(long)]
    pub weights: PathBuf,
    /// Seconds to wait for the server.
    #[arg(long, default_value_t = 600)]
    pub timeout: u64,
    #[arg(long)]
    pub top: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BenchSumArgs {
    /// Exponent range `a..b` (inclusive) or list `a,b,c`; sizes are 2^k.
    #[arg(long, default_value = "3..10")]
    pub sizes: String,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value = "ckks")]
    pub backend: BackendTag,
    /// Records CSV; printed to stdout when absent.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Derived CSV; defaults to the records path with `_derived` appended.
    #[arg(long)]
    pub derived_csv: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 40)]
    pub logp: u32,
    /// Defaults to enough levels for the DFT at the largest size.
    #[arg(long)]
    pub logq: Option<u32>,
    #[arg(long, default_value_t = 2)]
    pub warmup: usize,
    /// `secret` or `public`.
    #[arg(long, default_value = "secret")]
    pub encryption: EncryptionMode,
    /// Smallest ring (log2 slots) when each size gets its own ring.
    #[arg(long, default_value_t = 6)]
    pub ring_floor: u32,
    /// Run every size in one ring sized for the largest.
    #[arg(long)]
    pub shared_ring: bool,
    /// Clear-backend noise standard deviation.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
}

#[derive(Debug, Args)]
pub struct BenchMaeArgs {
    #[arg(long)]
    pub weights: PathBuf,
    /// Samples file written by `synth`.
    #[arg(long)]
    pub data: PathBuf,
    /// `train/infer` pairs, e.g. `relu_exact/relu_approx:3,3,3`. Repeatable.
    #[arg(long = "pair")]
    pub pairs: Vec<String>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchAgreementArgs {
    #[arg(long)]
    pub weights: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "clear")]
    pub backend: BackendTag,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 30)]
    pub logp: u32,
    /// Use only the first N samples.
    #[arg(long)]
    pub limit: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value = "public")]
    pub encryption: EncryptionMode,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub samples: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 266)]
    pub symptoms: usize,
    #[arg(long, default_value_t = 256)]
    pub hidden: usize,
    #[arg(long, default_value_t = 90)]
    pub diseases: usize,
    /// Comparator `n,dg,df` for the hidden activation.
    #[arg(long, default_value = "3,3,3")]
    pub comparator: CompConfig,
    #[arg(long, default_value_t = 0.02)]
    pub flip: f64,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    /// Pipeline step such as `rot_add`, `dft_sum:512`, `relu_approx:3,3,3`. Repeatable.
    #[arg(long = "op")]
    pub ops: Vec<String>,
    /// Plan the network in this weights file instead.
    #[arg(long, conflicts_with = "ops")]
    pub weights: Option<PathBuf>,
    #[arg(long, default_value_t = 40)]
    pub logp: u32,
    /// Check the plan against this modulus.
    #[arg(long)]
    pub logq: Option<u32>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    He(#[from] HeError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: String, source: serde_json::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            _ => EXIT_RUNTIME,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(io_err(path))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(io_err(path))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    serde_json::from_slice(&read(path)?).map_err(|source| CliError::Json {
        path: path.display().to_string(),
        source,
    })
}

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json value serializes"));
}

fn rng_from(seed: Option<u64>) -> ChaCha20Rng {
    match seed {
        Some(s) => ChaCha20Rng::seed_from_u64(s),
        None => ChaCha20Rng::from_os_rng(),
    }
}

/// Parses argv (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Keygen(a) => keygen(a),
        Command::Encrypt(a) => encrypt(a),
        Command::Decrypt(a) => decrypt(a),
        Command::Infer(a) => infer(a),
        Command::Serve(a) => serve(a),
        Command::Submit(a) => submit(a),
        Command::BenchSum(a) => bench_sum_cmd(a),
        Command::BenchMae(a) => bench_mae_cmd(a),
        Command::BenchAgreement(a) => bench_agreement_cmd(a),
        Command::Synth(a) => synth(a),
        Command::Plan(a) => plan(a),
    }
}

fn keygen(a: KeygenArgs) -> Result<(), CliError> {
    let params = HEParams::new(a.logn, a.logp, a.logq).map_err(|e| CliError::Usage(e.to_string()))?;
    let seed = a.seed.unwrap_or_else(rand::random);
    let keys = KeySet::generate(params, a.backend, seed)?;
    keys.save(&a.out).map_err(io_err(&a.out))?;
    print_json(&json!({
        "keys": a.out.display().to_string(),
        "backend": a.backend.name(),
        "log_slots": params.log_slots,
        "log_scale": params.log_scale,
        "log_modulus": params.log_modulus,
        "depth_budget": params.depth_budget(),
    }));
    Ok(())
}

fn load_keys(dir: &Path) -> Result<KeySet, CliError> {
    Ok(KeySet::load(dir, 0.0)?)
}

fn encrypt(a: EncryptArgs) -> Result<(), CliError> {
    let keys = load_keys(&a.keys)?;
    let n = keys.params().slot_count();
    let text = read(&a.input)?;
    let values: Vec<f64> = if let Ok(values) = serde_json::from_slice::<Vec<f64>>(&text) {
        values
    } else {
        let response: SymptomResponse = serde_json::from_slice(&text).map_err(|source| CliError::Json {
            path: a.input.display().to_string(),
            source,
        })?;
        let weights = a
            .weights
            .as_deref()
            .ok_or_else(|| CliError::Usage("encrypting a symptom response needs --weights".into()))?;
        encode_symptoms(&response, &NetworkSpec::load(weights)?)?
    };
    let v = SlotVector::from_real_padded(&values, n)?;
    let ct = keys.encryptor()?.encrypt(&v, &mut rng_from(a.seed))?;
    write(&a.out, &ct.to_bytes())?;
    Ok(())
}

fn prediction_json(p: &Prediction, top: Option<usize>) -> serde_json::Value {
    let mut v = json!({
        "argmax_index": p.argmax_index,
        "disease_name": p.disease_name,
        "logits": p.logits,
    });
    if let Some(k) = top {
        v["top"] = p.top(k).into_iter().map(|i| json!({"index": i, "logit": p.logits[i]})).collect();
    }
    v
}

fn decrypt(a: DecryptArgs) -> Result<(), CliError> {
    let keys = load_keys(&a.keys)?;
    let ct = CipherHandle::from_bytes(&read(&a.input)?)?;
    let slots = keys.decryptor()?.decrypt(&ct)?.real_parts();
    match a.weights {
        Some(w) => {
            let spec = NetworkSpec::load(&w)?;
            let p = Prediction::from_logits(slots[..spec.n_outputs().min(slots.len())].to_vec(), &spec.output_labels)?;
            print_json(&prediction_json(&p, a.top));
        }
        None => match a.top {
            Some(k) => {
                let mut idx: Vec<usize> = (0..slots.len()).collect();
                idx.sort_by(|&x, &y| slots[y].total_cmp(&slots[x]).then(x.cmp(&y)));
                let top: Vec<_> = idx.into_iter().take(k).map(|i| json!({"index": i, "value": slots[i]})).collect();
                print_json(&json!({ "top": top }));
            }
            None => print_json(&json!({ "slots": slots })),
        },
    }
    Ok(())
}

fn infer(a: InferArgs) -> Result<(), CliError> {
    let spec = NetworkSpec::load(&a.weights)?;
    let keys = load_keys(&a.keys)?;
    if keys.backend() != a.backend {
        return Err(CliError::Usage(format!(
            "--backend {} but the keys are for {}",
            a.backend.name(),
            keys.backend().name()
        )));
    }
    if a.out.is_none() && !keys.has_secret() {
        return Err(CliError::Usage("without a secret key, --out is required".into()));
    }
    let ct = CipherHandle::from_bytes(&read(&a.input)?)?;
    let out = encrypted_infer(&spec, &ct, &*keys.evaluator()?)?;
    if let Some(path) = &a.out {
        write(path, &out.to_bytes())?;
    }
    if keys.has_secret() {
        let logits = keys.decryptor()?.decrypt(&out)?.real_parts()[..spec.n_outputs()].to_vec();
        print_json(&prediction_json(&Prediction::from_logits(logits, &spec.output_labels)?, None));
    }
    Ok(())
}

fn serve(a: ServeArgs) -> Result<(), CliError> {
    let spec = NetworkSpec::load(&a.weights)?;
    let params = match (&a.keys, a.logq) {
        (Some(dir), _) => *KeySet::load(dir, 0.0)?.params(),
        (None, Some(q)) => HEParams::new(spec.padded_size.trailing_zeros().max(1), a.logp, q)?,
        (None, None) => recommended_params(&spec, a.logp)?,
    };
    let server = Server::new(spec, params, a.backend)?.bind(a.bind.as_str())?;
    eprintln!(
        "serving on {} ({} log_slots={} log_scale={} log_modulus={})",
        server.local_addr()?,
        a.backend.name(),
        params.log_slots,
        params.log_scale,
        params.log_modulus
    );
    server.run()?;
    Ok(())
}

fn submit(a: SubmitArgs) -> Result<(), CliError> {
    let spec = NetworkSpec::load(&a.weights)?;
    let keys = load_keys(&a.keys)?;
    let response: SymptomResponse = read_json(&a.input)?;
    let opts = SubmitOptions {
        timeout: Duration::from_secs(a.timeout),
        seed: None,
    };
    let p = client_submit(a.addr.as_str(), &response, &keys, &spec, &opts)?;
    print_json(&prediction_json(&p, a.top));
    Ok(())
}

/// `a..b` inclusive or `a,b,c`.
pub fn parse_exponents(s: &str) -> Result<Vec<u32>, CliError> {
    let bad = || CliError::Usage(format!("bad size list {s:?}: expected a..b or a,b,c"));
    let out: Vec<u32> = if let Some((lo, hi)) = s.split_once("..") {
        let lo: u32 = lo.trim().parse().map_err(|_| bad())?;
        let hi: u32 = hi.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        (lo..=hi).collect()
    } else {
        s.split(',').map(|p| p.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?
    };
    if out.is_empty() || out.iter().any(|&k| !(1..=14).contains(&k)) {
        return Err(bad());
    }
    Ok(out)
}

fn derived_path(csv: &Path) -> PathBuf {
    let stem = csv.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    csv.with_file_name(format!("{stem}_derived.csv"))
}

fn bench_sum_cmd(a: BenchSumArgs) -> Result<(), CliError> {
    let exps = parse_exponents(&a.sizes)?;
    let max = *exps.iter().max().expect("nonempty");
    let logq = match a.logq {
        Some(q) => q,
        None => HEParams::for_depth(max, a.logp, max + 1)?.log_modulus,
    };
    let params = HEParams::with_noise(max, a.logp, logq, a.noise).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut cfg = SumBenchConfig::new(exps.iter().map(|&k| 1usize << k).collect(), a.trials, params, a.backend, a.seed);
    cfg.warmup = a.warmup;
    cfg.encryption = a.encryption;
    cfg.ring_floor = (!a.shared_ring).then_some(a.ring_floor);
    let records = bench_sum(&cfg).map_err(|e| match e {
        BenchError::Config(m) => CliError::Usage(m),
        other => other.into(),
    })?;
    for r in records.iter().filter(|r| !r.is_ok()) {
        eprintln!("{} size {}: {}", r.method, r.size, r.failure.as_deref().unwrap_or(""));
    }
    let main = records_csv(&records);
    let derived = derived_csv(&derived_report(&records));
    match &a.csv {
        Some(path) => {
            write_text(path, &main)?;
            write_text(&a.derived_csv.clone().unwrap_or_else(|| derived_path(path)), &derived)?;
        }
        None => {
            print!("{main}");
            match &a.derived_csv {
                Some(path) => write_text(path, &derived)?,
                None => print!("\n{derived}"),
            }
        }
    }
    Ok(())
}

fn load_dataset(path: &Path, spec: &NetworkSpec, limit: Option<usize>) -> Result<Vec<Vec<f64>>, CliError> {
    let samples: Vec<Sample> = read_json(path)?;
    samples
        .iter()
        .take(limit.unwrap_or(usize::MAX))
        .map(|s| Ok(encode_symptoms(&s.response, spec)?))
        .collect()
}

fn bench_mae_cmd(a: BenchMaeArgs) -> Result<(), CliError> {
    let spec = NetworkSpec::load(&a.weights)?;
    let data = load_dataset(&a.data, &spec, None)?;
    let pair_strs: Vec<String> = if a.pairs.is_empty() {
        [
            "relu_exact/relu_approx",
            "relu_approx/relu_approx",
            "leaky_relu_exact/leaky_relu_poly",
            "leaky_relu_poly/leaky_relu_poly",
        ]
        .map(String::from)
        .to_vec()
    } else {
        a.pairs
    };
    let mut pairs = Vec::new();
    for p in &pair_strs {
        let (t, i) = p
            .split_once('/')
            .ok_or_else(|| CliError::Usage(format!("pair {p:?} should be train/infer")))?;
        let parse = |s: &str| s.parse::<ActivationKind>().map_err(|e| CliError::Usage(e.to_string()));
        pairs.push((parse(t)?, parse(i)?));
    }
    let csv = mae_csv(&bench_mae(&pairs, &data, &spec)?);
    match a.csv {
        Some(path) => write_text(&path, &csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn bench_agreement_cmd(a: BenchAgreementArgs) -> Result<(), CliError> {
    let spec = NetworkSpec::load(&a.weights)?;
    let data = load_dataset(&a.data, &spec, a.limit)?;
    let base = recommended_params(&spec, a.logp)?;
    let params = HEParams::with_noise(base.log_slots, base.log_scale, base.log_modulus, a.noise)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let keys = KeySet::generate(params, a.backend, a.seed)?;
    let report = bench_agreement(&spec, &data, &keys, a.encryption, a.seed)?;
    for m in &report.failure_messages {
        eprintln!("{m}");
    }
    let csv = report.to_csv();
    match a.csv {
        Some(path) => write_text(&path, &csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn synth(a: SynthArgs) -> Result<(), CliError> {
    let cfg = SynthConfig {
        comparator: a.comparator,
        flip_prob: a.flip,
        ..SynthConfig::sized(a.symptoms, a.hidden, a.diseases)
    };
    let spec = synth_weights(a.seed, &cfg).map_err(|e| match e {
        ModelError::Invalid(m) => CliError::Usage(m),
        other => other.into(),
    })?;
    let samples = synth_dataset(a.seed.wrapping_add(2), a.samples, &cfg)?;
    let responses = a.out.join("responses");
    fs::create_dir_all(&responses).map_err(io_err(&responses))?;
    spec.save(&a.out.join("weights.json"))?;
    let mut text = serde_json::to_string_pretty(&samples).expect("samples serialize");
    text.push('\n');
    write(&a.out.join("samples.json"), text.as_bytes())?;
    for (i, s) in samples.iter().enumerate() {
        s.response.save(&responses.join(format!("{i:04}.json")))?;
    }
    print_json(&json!({
        "weights": a.out.join("weights.json").display().to_string(),
        "samples": samples.len(),
        "padded_size": spec.padded_size,
        "depth": spec.depth()?,
        "model_id": spec.model_id(),
    }));
    Ok(())
}

fn plan(a: PlanArgs) -> Result<(), CliError> {
    let (ops, log_slots) = match &a.weights {
        Some(w) => {
            let spec = NetworkSpec::load(w)?;
            (spec.pipeline()?, spec.padded_size.trailing_zeros().max(1))
        }
        None if a.ops.is_empty() => return Err(CliError::Usage("give --op steps or --weights".into())),
        None => {
            let ops = a
                .ops
                .iter()
                .map(|s| s.parse::<OpDescriptor>().map_err(|e| CliError::Usage(e.to_string())))
                .collect::<Result<Vec<_>, _>>()?;
            (ops, 1)
        }
    };
    let depth = depth_estimate(&ops)?;
    let needed = HEParams::for_depth(log_slots, a.logp, depth)?.log_modulus;
    let mut v = json!({
        "steps": ops.len(),
        "depth": depth,
        "log_scale": a.logp,
        "min_log_modulus": needed,
    });
    if let Some(q) = a.logq {
        let budget = q.saturating_sub(a.logp) / a.logp;
        v["log_modulus"] = json!(q);
        v["depth_budget"] = json!(budget);
        v["fits"] = json!(depth <= budget);
    }
    print_json(&v);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponent_lists() {
        assert_eq!(parse_exponents("3..6").unwrap(), vec![3, 4, 5, 6]);
        assert_eq!(parse_exponents("3,5").unwrap(), vec![3, 5]);
        assert!(parse_exponents("0..3").is_err());
        assert!(parse_exponents("x").is_err());
        assert_eq!(derived_path(Path::new("out/sum.csv")), Path::new("out/sum_derived.csv"));
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(["fhed", "keygen", "--out", "x"]), EXIT_USAGE);
        assert_eq!(run(["fhed", "bogus"]), EXIT_USAGE);
        assert_eq!(run(["fhed", "bench-sum", "--sizes", "0..2"]), EXIT_USAGE);
        assert_eq!(run(["fhed", "--help"]), EXIT_OK);
    }
}

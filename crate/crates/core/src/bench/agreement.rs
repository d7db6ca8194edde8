use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::{csv_table, fmt_f64, BenchError, EncryptionMode};
use crate::model::{encrypted_infer, plaintext_infer, InferMode, NetworkSpec, Prediction};
use crate::slotvec::{KeySet, SlotVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviationSummary {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub samples: usize,
    pub agreed: usize,
    /// Samples where encryption, evaluation or decryption failed. They
    /// count as disagreements.
    pub failures: usize,
    pub agreement_pct: f64,
    /// Per-sample max |encrypted logit - plaintext logit|, over the samples
    /// that completed. `None` when none did.
    pub logit_deviation: Option<DeviationSummary>,
    pub failure_messages: Vec<String>,
}

impl AgreementReport {
    pub fn to_csv(&self) -> String {
        let dev = self.logit_deviation;
        let field = |f: fn(&DeviationSummary) -> f64| dev.as_ref().map_or(f64::NAN, f);
        csv_table(
            "samples,agreed,failures,agreement_pct,dev_min,dev_mean,dev_max",
            [vec![
                self.samples.to_string(),
                self.agreed.to_string(),
                self.failures.to_string(),
                fmt_f64(self.agreement_pct),
                fmt_f64(field(|d| d.min)),
                fmt_f64(field(|d| d.mean)),
                fmt_f64(field(|d| d.max)),
            ]],
        )
    }
}

/// Encrypts each padded input, runs the network blind, decrypts, and compares
/// the argmax with plaintext inference in approximation mode.
pub fn bench_agreement(
    spec: &NetworkSpec,
    dataset: &[Vec<f64>],
    keys: &KeySet,
    encryption: EncryptionMode,
    seed: u64,
) -> Result<AgreementReport, BenchError> {
    if dataset.is_empty() {
        return Err(BenchError::Config("empty dataset".into()));
    }
    let enc = encryption.encryptor(keys)?;
    let ev = keys.evaluator()?;
    let dec = keys.decryptor()?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let n_out = spec.n_outputs();

    let mut agreed = 0;
    let mut deviations = Vec::with_capacity(dataset.len());
    let mut failure_messages = Vec::new();
    for (i, x) in dataset.iter().enumerate() {
        let expect = plaintext_infer(spec, x, InferMode::Approx)?;
        let mut run = || -> Result<Prediction, BenchError> {
            let ct = enc.encrypt(&SlotVector::from_real(x)?, &mut rng)?;
            let out = encrypted_infer(spec, &ct, &*ev)?;
            let logits = dec.decrypt(&out)?.real_parts()[..n_out].to_vec();
            Ok(Prediction::from_logits(logits, &spec.output_labels)?)
        };
        match run() {
            Ok(got) => {
                if got.argmax_index == expect.argmax_index {
                    agreed += 1;
                }
                let dev = got
                    .logits
                    .iter()
                    .zip(&expect.logits)
                    .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                deviations.push(dev);
            }
            Err(e) => failure_messages.push(format!("sample {i}: {e}")),
        }
    }

    let logit_deviation = (!deviations.is_empty()).then(|| DeviationSummary {
        min: deviations.iter().copied().fold(f64::INFINITY, f64::min),
        mean: deviations.iter().sum::<f64>() / deviations.len() as f64,
        max: deviations.iter().copied().fold(0.0, f64::max),
    });
    Ok(AgreementReport {
        samples: dataset.len(),
        agreed,
        failures: failure_messages.len(),
        agreement_pct: 100.0 * agreed as f64 / dataset.len() as f64,
        logit_deviation,
        failure_messages,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heops::CompConfig;
    use crate::model::{encode_symptoms, recommended_params, synth_dataset, synth_weights, SynthConfig};
    use crate::slotvec::{BackendTag, HEParams};

    fn fixture(n: usize) -> (NetworkSpec, Vec<Vec<f64>>) {
        let cfg = SynthConfig {
            comparator: CompConfig::new(2, 2, 1).unwrap(),
            ..SynthConfig::sized(16, 8, 4)
        };
        let spec = synth_weights(11, &cfg).unwrap();
        let data = synth_dataset(12, n, &cfg)
            .unwrap()
            .iter()
            .map(|s| encode_symptoms(&s.response, &spec).unwrap())
            .collect();
        (spec, data)
    }

    #[test]
    fn exact_clear_backend_agrees_fully() {
        let (spec, data) = fixture(20);
        let keys = KeySet::generate(recommended_params(&spec, 30).unwrap(), BackendTag::Clear, 0).unwrap();
        let r = bench_agreement(&spec, &data, &keys, EncryptionMode::Public, 0).unwrap();
        assert_eq!((r.agreed, r.failures, r.agreement_pct), (20, 0, 100.0));
        assert_eq!(r.logit_deviation.unwrap().max, 0.0);
        assert!(r.to_csv().starts_with("samples,agreed,failures,agreement_pct,dev_min,dev_mean,dev_max\n20,20,0,100,0,0,0\n"));
    }

    #[test]
    fn shallow_params_count_failures() {
        let (spec, data) = fixture(3);
        let keys = KeySet::generate(HEParams::new(4, 30, 200).unwrap(), BackendTag::Clear, 0).unwrap();
        let r = bench_agreement(&spec, &data, &keys, EncryptionMode::Public, 0).unwrap();
        assert_eq!((r.agreed, r.failures, r.agreement_pct), (0, 3, 0.0));
        assert!(r.logit_deviation.is_none());
        assert!(r.failure_messages[0].contains("depth exceeded"));
    }
}

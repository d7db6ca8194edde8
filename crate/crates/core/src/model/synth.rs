use std::collections::BTreeSet;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::infer::forward_trace;
use super::spec::{encode_symptoms, Activation, Layer, NetworkSpec, SymptomResponse};
use super::{InferMode, ModelError};
use crate::heops::CompConfig;

/// Symptom names from the survey excerpt; the remaining labels are numbered.
pub const SURVEY_SYMPTOMS: [&str; 6] = [
    "Skin Rash",
    "Neck Pain",
    "Anxiety and Nervousness",
    "Depression or Psychotic Symptoms",
    "Abnormal Involuntary Movements",
    "Eye Redness",
];

/// Margin applied to the largest observed pre-activation when choosing the
/// comparator bound B.
pub const BOUND_MARGIN: f64 = 1.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_symptoms: usize,
    pub n_hidden: usize,
    pub n_diseases: usize,
    /// Probability that a sample flips each symptom of its prototype.
    pub flip_prob: f64,
    pub comparator: CompConfig,
    /// Samples used to calibrate the activation bound.
    pub calibration_samples: usize,
}

impl Default for SynthConfig {
    /// 266 symptoms, 256 hidden units, 90 diseases.
    fn default() -> Self {
        Self::sized(266, 256, 90)
    }
}

impl SynthConfig {
    pub fn sized(n_symptoms: usize, n_hidden: usize, n_diseases: usize) -> Self {
        Self {
            n_symptoms,
            n_hidden,
            n_diseases,
            flip_prob: 0.02,
            comparator: CompConfig::default(),
            calibration_samples: 200,
        }
    }

    fn validate(&self) -> Result<(), ModelError> {
        if self.n_diseases == 0 || self.n_symptoms < 4 {
            return Err(ModelError::Invalid("synthetic data needs at least 4 symptoms and 1 disease".into()));
        }
        if self.n_hidden < self.n_diseases {
            return Err(ModelError::Invalid(format!(
                "{} hidden units cannot hold {} prototype detectors",
                self.n_hidden, self.n_diseases
            )));
        }
        if !(0.0..=0.5).contains(&self.flip_prob) {
            return Err(ModelError::Invalid(format!("flip probability {} outside [0, 0.5]", self.flip_prob)));
        }
        let (lo, hi) = self.prototype_sizes();
        let distinct: f64 = (lo..=hi).map(|k| binomial(self.n_symptoms, k)).sum();
        if distinct < 2.0 * self.n_diseases as f64 {
            return Err(ModelError::Invalid("too few symptoms for distinct prototypes".into()));
        }
        Ok(())
    }

    fn prototype_sizes(&self) -> (usize, usize) {
        let lo = (self.n_symptoms / 50).max(2);
        let hi = (self.n_symptoms / 25).max(lo + 2).min(self.n_symptoms - 1);
        (lo, hi)
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

pub fn symptom_labels(n: usize) -> Vec<String> {
    (0..n)
        .map(|i| match SURVEY_SYMPTOMS.get(i) {
            Some(name) => name.to_string(),
            None => format!("Symptom {:03}", i + 1),
        })
        .collect()
}

pub fn disease_labels(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("Disease {:02}", i + 1)).collect()
}

/// Distinct symptom sets, one per disease, fixed by the seed.
pub fn prototypes(seed: u64, cfg: &SynthConfig) -> Result<Vec<Vec<usize>>, ModelError> {
    cfg.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x7072_6f74_6f74_7970);
    let (lo, hi) = cfg.prototype_sizes();
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(cfg.n_diseases);
    while out.len() < cfg.n_diseases {
        let k = rng.random_range(lo..=hi);
        let mut p = index::sample(&mut rng, cfg.n_symptoms, k).into_vec();
        p.sort_unstable();
        if seen.insert(p.clone()) {
            out.push(p);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub response: SymptomResponse,
    pub disease: usize,
}

/// Samples drawn uniformly over diseases, each its prototype with every
/// symptom flipped independently with `cfg.flip_prob`.
pub fn synth_dataset(seed: u64, n_samples: usize, cfg: &SynthConfig) -> Result<Vec<Sample>, ModelError> {
    let protos = prototypes(seed, cfg)?;
    let labels = symptom_labels(cfg.n_symptoms);
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x7361_6d70_6c65_7321);
    Ok((0..n_samples)
        .map(|_| {
            let disease = rng.random_range(0..cfg.n_diseases);
            let mut on = vec![false; cfg.n_symptoms];
            for &s in &protos[disease] {
                on[s] = true;
            }
            for flag in on.iter_mut() {
                if rng.random_bool(cfg.flip_prob) {
                    *flag = !*flag;
                }
            }
            let yes: Vec<usize> = (0..cfg.n_symptoms).filter(|&i| on[i]).collect();
            Sample {
                response: SymptomResponse::from_indices(&labels, &yes),
                disease,
            }
        })
        .collect())
}

/// Two-layer classifier for the synthetic data.
///
/// Hidden unit `d < n_diseases` scores prototype `d` as
/// `(|x & P| - |x \ P|) / |P|`, which is 1 on the clean prototype and below 1
/// on every other one. The remaining hidden units have small random weights.
/// The output layer passes the detectors through and adds a small random
/// mixture of all hidden units. The hidden activation is `relu_approx` with
/// bound `BOUND_MARGIN` times the largest pre-activation seen on a
/// calibration sample.
pub fn synth_weights(seed: u64, cfg: &SynthConfig) -> Result<NetworkSpec, ModelError> {
    let protos = prototypes(seed, cfg)?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x7765_6967_6874_7321);
    let hidden_noise = Normal::new(0.0, 0.1 / (cfg.n_symptoms as f64).sqrt()).expect("valid stddev");
    let output_noise = Normal::new(0.0, 0.01).expect("valid stddev");

    let mut w1 = Vec::with_capacity(cfg.n_hidden);
    for p in &protos {
        let inv = 1.0 / p.len() as f64;
        let mut row = vec![-inv; cfg.n_symptoms];
        for &s in p {
            row[s] = inv;
        }
        w1.push(row);
    }
    while w1.len() < cfg.n_hidden {
        w1.push((0..cfg.n_symptoms).map(|_| hidden_noise.sample(&mut rng)).collect());
    }
    let b1 = vec![0.0; cfg.n_hidden];

    let w2: Vec<Vec<f64>> = (0..cfg.n_diseases)
        .map(|d| {
            (0..cfg.n_hidden)
                .map(|h| output_noise.sample(&mut rng) + if h == d { 1.0 } else { 0.0 })
                .collect()
        })
        .collect();
    let b2 = vec![0.0; cfg.n_diseases];

    let layers = vec![
        Layer::new(w1, b1, Activation::relu_approx(cfg.comparator, 1.0))?,
        Layer::new(w2, b2, Activation::None)?,
    ];
    let mut spec = NetworkSpec::new(symptom_labels(cfg.n_symptoms), disease_labels(cfg.n_diseases), layers)?;

    let calibration = synth_dataset(seed.wrapping_add(1), cfg.calibration_samples, cfg)?;
    let mut peak: f64 = 0.0;
    for s in &calibration {
        let x = encode_symptoms(&s.response, &spec)?;
        let trace = forward_trace(&spec, &x, InferMode::Exact)?;
        peak = trace[0].0.iter().fold(peak, |m, z| m.max(z.abs()));
    }
    spec.layers[0].activation = Activation::relu_approx(cfg.comparator, BOUND_MARGIN * peak.max(1.0));
    spec.validate()?;
    Ok(spec)
}

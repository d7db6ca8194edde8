//! Classifier network, weights file, symptom encoding and inference drivers.
//!
//! The weights file and symptom response layouts are described by
//! `schema/weights.schema.json` and `schema/symptoms.schema.json` at the
//! repository root.

mod infer;
mod spec;
mod synth;

use std::path::Path;

use thiserror::Error;

pub use infer::{
    activate, encrypted_infer, forward_trace, plaintext_infer, recommended_params, InferMode,
    Prediction,
};
pub use spec::{
    encode_symptoms, Activation, Layer, NetworkSpec, SymptomResponse, WeightsFile,
    DEFAULT_LEAKY_SLOPE, WEIGHTS_VERSION,
};
pub use synth::{
    disease_labels, prototypes, symptom_labels, synth_dataset, synth_weights, Sample, SynthConfig,
    BOUND_MARGIN, SURVEY_SYMPTOMS,
};

use crate::HeError;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("{what} label count mismatch: expected {expected}, found {found}")]
    LabelCount {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("invalid network: {0}")]
    Invalid(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    He(HeError),
}

impl ModelError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        ModelError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heops::CompConfig;
    use crate::slotvec::{ClearBackend, Decryptor, Encryptor, HEParams, SlotVector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn labels(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    fn identity_net(n: usize) -> NetworkSpec {
        let rows = (0..n).map(|i| (0..n).map(|j| (i == j) as u8 as f64).collect()).collect();
        NetworkSpec::new(
            labels("s", n),
            labels("d", n),
            vec![Layer::new(rows, vec![0.0; n], Activation::None).unwrap()],
        )
        .unwrap()
    }

    #[test]
    fn minimal_full_size_file_loads() {
        let layer = Layer::new(vec![vec![0.0; 266]; 90], vec![0.0; 90], Activation::None).unwrap();
        let spec = NetworkSpec::new(symptom_labels(266), disease_labels(90), vec![layer]).unwrap();
        assert_eq!(spec.padded_size, 512);
        let back = NetworkSpec::from_json(&spec.to_json()).unwrap();
        assert_eq!(back, spec);
        assert_eq!(back.to_json(), spec.to_json());
    }

    #[test]
    fn wrong_column_count_is_label_error() {
        let layer = Layer::new(vec![vec![0.0; 265]; 90], vec![0.0; 90], Activation::None).unwrap();
        let err = NetworkSpec::new(symptom_labels(266), disease_labels(90), vec![layer]).unwrap_err();
        assert!(matches!(err, ModelError::LabelCount { what: "input", expected: 265, found: 266 }));
    }

    #[test]
    fn rejects_bad_files() {
        let good = identity_net(4).to_json();
        let unknown = good.replace("\"none\"", "\"swish\"");
        assert!(matches!(NetworkSpec::from_json(&unknown), Err(ModelError::Parse(_))));
        let padded = good.replace("\"padded_size\": 4", "\"padded_size\": 8");
        assert!(matches!(NetworkSpec::from_json(&padded), Err(ModelError::Dimension(_))));
        let l1 = Layer::new(vec![vec![1.0; 4]; 3], vec![0.0; 3], Activation::ReluExact).unwrap();
        let l2 = Layer::new(vec![vec![1.0; 2]; 2], vec![0.0; 2], Activation::None).unwrap();
        assert!(matches!(
            NetworkSpec::new(labels("s", 4), labels("d", 2), vec![l1, l2]),
            Err(ModelError::Dimension(_))
        ));
        let last_act = Layer::new(vec![vec![1.0; 2]; 2], vec![0.0; 2], Activation::ReluExact).unwrap();
        assert!(NetworkSpec::new(labels("s", 2), labels("d", 2), vec![last_act]).is_err());
    }

    #[test]
    fn symptom_encoding() {
        let spec = NetworkSpec::new(
            symptom_labels(266),
            disease_labels(90),
            vec![Layer::new(vec![vec![0.0; 266]; 90], vec![0.0; 90], Activation::None).unwrap()],
        )
        .unwrap();
        let none = SymptomResponse::from_indices(&spec.input_labels, &[]);
        assert_eq!(encode_symptoms(&none, &spec).unwrap(), vec![0.0; 512]);

        let mut anxious = none.clone();
        anxious.answers.insert("Anxiety and Nervousness".into(), true);
        let x = encode_symptoms(&anxious, &spec).unwrap();
        assert_eq!(x.iter().filter(|&&v| v == 1.0).count(), 1);
        assert_eq!(x[2], 1.0);

        let all: Vec<usize> = (0..266).collect();
        let x = encode_symptoms(&SymptomResponse::from_indices(&spec.input_labels, &all), &spec).unwrap();
        assert!(x[..266].iter().all(|&v| v == 1.0) && x[266..].iter().all(|&v| v == 0.0));

        let mut missing = none.clone();
        missing.answers.remove("Neck Pain");
        let err = encode_symptoms(&missing, &spec).unwrap_err().to_string();
        assert!(err.contains("Neck Pain"), "{err}");
        let mut extra = none;
        extra.answers.insert("Hiccups".into(), true);
        assert!(encode_symptoms(&extra, &spec).unwrap_err().to_string().contains("Hiccups"));
    }

    #[test]
    fn argmax_breaks_ties_low() {
        let l = labels("d", 4);
        let p = Prediction::from_logits(vec![1.0, 3.0, 3.0, -1.0], &l).unwrap();
        assert_eq!(p.argmax_index, 1);
        assert_eq!(p.disease_name, "d1");
        assert_eq!(p.top(3), vec![1, 2, 0]);
        let scaled = Prediction::from_logits(vec![2.5, 7.5, 7.5, -2.5], &l).unwrap();
        assert_eq!(scaled.argmax_index, 1);
    }

    #[test]
    fn hand_traced_two_layer_net() {
        let l1 = Layer::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0, 0.0], Activation::ReluExact).unwrap();
        let l2 = Layer::new(vec![vec![1.0, -1.0]], vec![0.0], Activation::None).unwrap();
        let spec = NetworkSpec::new(labels("s", 2), labels("d", 1), vec![l1, l2]).unwrap();
        let p = plaintext_infer(&spec, &[3.0, 5.0], InferMode::Exact).unwrap();
        assert_eq!(p.logits, vec![-2.0]);
    }

    #[test]
    fn identity_net_encrypted_returns_input() {
        let spec = identity_net(8);
        let params = recommended_params(&spec, 30).unwrap();
        let backend = ClearBackend::new(params).unwrap();
        let x = vec![0.5, 1.0, 0.0, 2.0, -1.0, 0.25, 3.0, 1.5];
        let ct = backend
            .encrypt(&SlotVector::from_real(&x).unwrap(), &mut ChaCha8Rng::seed_from_u64(0))
            .unwrap();
        let out = encrypted_infer(&spec, &ct, &backend).unwrap();
        assert_eq!(backend.decrypt(&out).unwrap().real_parts(), x);
        assert_eq!(plaintext_infer(&spec, &x, InferMode::Approx).unwrap().argmax_index, 6);
    }

    #[test]
    fn encrypted_matches_approx_mode_exactly() {
        let cfg = SynthConfig {
            comparator: CompConfig::new(2, 1, 1).unwrap(),
            ..SynthConfig::sized(16, 8, 4)
        };
        let spec = synth_weights(3, &cfg).unwrap();
        let params = recommended_params(&spec, 30).unwrap();
        let backend = ClearBackend::new(params).unwrap();
        for s in synth_dataset(4, 5, &cfg).unwrap() {
            let x = encode_symptoms(&s.response, &spec).unwrap();
            let ct = backend
                .encrypt(&SlotVector::from_real(&x).unwrap(), &mut ChaCha8Rng::seed_from_u64(0))
                .unwrap();
            let out = backend.decrypt(&encrypted_infer(&spec, &ct, &backend).unwrap()).unwrap();
            let expect = plaintext_infer(&spec, &x, InferMode::Approx).unwrap();
            assert_eq!(out.real_parts()[..4], expect.logits[..]);
        }
    }

    #[test]
    fn depth_shortfall_is_reported() {
        let spec = synth_weights(1, &SynthConfig::sized(16, 8, 4)).unwrap();
        assert_eq!(spec.depth().unwrap(), 2 + 27 + 2);
        let params = HEParams::for_depth(4, 30, 10).unwrap();
        let backend = ClearBackend::new(params).unwrap();
        let ct = backend
            .encrypt(&SlotVector::zeros(16).unwrap(), &mut ChaCha8Rng::seed_from_u64(0))
            .unwrap();
        let err = encrypted_infer(&spec, &ct, &backend).unwrap_err();
        assert!(matches!(
            err,
            ModelError::He(HeError::DepthExceeded { required: 31, available: 10, .. })
        ));
    }

    #[test]
    fn synthetic_data_is_deterministic_and_separable() {
        let cfg = SynthConfig { flip_prob: 0.0, ..SynthConfig::default() };
        let a = synth_dataset(7, 50, &cfg).unwrap();
        assert_eq!(a, synth_dataset(7, 50, &cfg).unwrap());
        let spec = synth_weights(7, &cfg).unwrap();
        assert_eq!(spec, synth_weights(7, &cfg).unwrap());
        assert_eq!(spec.padded_size, 512);
        assert_eq!(&spec.input_labels[..6], &SURVEY_SYMPTOMS.map(String::from)[..]);
        for s in &a {
            let x = encode_symptoms(&s.response, &spec).unwrap();
            assert_eq!(plaintext_infer(&spec, &x, InferMode::Exact).unwrap().argmax_index, s.disease);
        }
    }
}

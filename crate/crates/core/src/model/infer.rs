use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::spec::{Activation, NetworkSpec, DEFAULT_LEAKY_SLOPE};
use super::ModelError;
use crate::heops::{
    fc_layer, fc_layer_plain, leaky_relu_approx, leaky_relu_approx_scalar, relu_approx, CompConfig,
    ReluApproxScalar,
};
use crate::slotvec::{CipherHandle, Evaluator, HEParams};
use crate::HeError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InferMode {
    /// Exact activations: the approximations' reference functions.
    Exact,
    /// The same polynomial and comparator arithmetic as encrypted inference.
    Approx,
}

impl FromStr for InferMode {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, ModelError> {
        match s {
            "exact" => Ok(InferMode::Exact),
            "approx" => Ok(InferMode::Approx),
            other => Err(ModelError::Input(format!("unknown inference mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub logits: Vec<f64>,
    pub argmax_index: usize,
    pub disease_name: String,
}

impl Prediction {
    /// Argmax with ties going to the lowest index. NaN logits never win.
    pub fn from_logits(logits: Vec<f64>, labels: &[String]) -> Result<Self, ModelError> {
        if logits.len() != labels.len() || logits.is_empty() {
            return Err(ModelError::Dimension(format!(
                "{} logits for {} labels",
                logits.len(),
                labels.len()
            )));
        }
        let mut best = 0;
        for (i, &v) in logits.iter().enumerate() {
            if v > logits[best] || (logits[best].is_nan() && !v.is_nan()) {
                best = i;
            }
        }
        Ok(Self {
            disease_name: labels[best].clone(),
            argmax_index: best,
            logits,
        })
    }

    /// Indices of the `k` largest logits, best first.
    pub fn top(&self, k: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.logits.len()).collect();
        idx.sort_by(|&a, &b| {
            self.logits[b]
                .partial_cmp(&self.logits[a])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        idx.truncate(k);
        idx
    }
}

fn leaky(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

/// Applies a layer's activation to every slot, in the given mode.
pub fn activate(act: &Activation, mode: InferMode, z: &[f64]) -> Result<Vec<f64>, ModelError> {
    Ok(match (*act, mode) {
        (Activation::None, _) => z.to_vec(),
        (Activation::ReluExact, _) | (Activation::ReluApprox { .. }, InferMode::Exact) => {
            z.iter().map(|&x| x.max(0.0)).collect()
        }
        (Activation::LeakyReluExact { slope }, _) => z.iter().map(|&x| leaky(x, slope)).collect(),
        (Activation::LeakyReluPoly, InferMode::Exact) => {
            z.iter().map(|&x| leaky(x, DEFAULT_LEAKY_SLOPE)).collect()
        }
        (Activation::ReluApprox { n, dg, df, bound }, InferMode::Approx) => {
            let relu = ReluApproxScalar::new(CompConfig::new(n, dg, df)?, bound)?;
            z.iter().map(|&x| relu.eval(x)).collect()
        }
        (Activation::LeakyReluPoly, InferMode::Approx) => {
            z.iter().map(|&x| leaky_relu_approx_scalar(x)).collect()
        }
    })
}

/// Per-layer `(pre_activation, output)` slot vectors of length
/// `padded_size`.
pub fn forward_trace(
    spec: &NetworkSpec,
    x: &[f64],
    mode: InferMode,
) -> Result<Vec<(Vec<f64>, Vec<f64>)>, ModelError> {
    if x.len() != spec.padded_size {
        return Err(ModelError::Dimension(format!(
            "input has {} entries, expected padded size {}",
            x.len(),
            spec.padded_size
        )));
    }
    let mut v = x.to_vec();
    let mut trace = Vec::with_capacity(spec.layers.len());
    for layer in &spec.layers {
        let z = fc_layer_plain(&v, &layer.row_vecs(), &layer.bias, spec.padded_size)?;
        v = activate(&layer.activation, mode, &z)?;
        trace.push((z, v.clone()));
    }
    Ok(trace)
}

/// Plaintext reference inference on a padded input vector.
pub fn plaintext_infer(spec: &NetworkSpec, x: &[f64], mode: InferMode) -> Result<Prediction, ModelError> {
    let trace = forward_trace(spec, x, mode)?;
    let out = &trace.last().expect("validated spec has layers").1;
    Prediction::from_logits(out[..spec.n_outputs()].to_vec(), &spec.output_labels)
}

/// Runs the network on an encrypted padded input. Output slots
/// `0..n_outputs` hold the logits.
pub fn encrypted_infer(
    spec: &NetworkSpec,
    ct: &CipherHandle,
    ev: &dyn Evaluator,
) -> Result<CipherHandle, ModelError> {
    if ct.slot_count() != spec.padded_size {
        return Err(ModelError::Dimension(format!(
            "ciphertext has {} slots, the network needs {}",
            ct.slot_count(),
            spec.padded_size
        )));
    }
    let depth = spec.depth()?;
    if ct.level() < depth {
        return Err(ev.params().depth_error(depth, ct.level()).into());
    }
    let mut c = ct.clone();
    for layer in &spec.layers {
        c = fc_layer(ev, &c, &layer.row_vecs(), &layer.bias, spec.padded_size)?;
        c = match layer.activation {
            Activation::None => c,
            Activation::ReluApprox { n, dg, df, bound } => {
                relu_approx(ev, &c, &CompConfig::new(n, dg, df)?, bound)?
            }
            Activation::LeakyReluPoly => leaky_relu_approx(ev, &c)?,
            other => {
                return Err(ModelError::Unsupported(format!(
                    "activation {} cannot be evaluated homomorphically",
                    other.name()
                )))
            }
        };
    }
    Ok(c)
}

/// Parameters whose depth budget covers the whole network.
pub fn recommended_params(spec: &NetworkSpec, log_scale: u32) -> Result<HEParams, ModelError> {
    let log_slots = spec.padded_size.trailing_zeros().max(1);
    Ok(HEParams::for_depth(log_slots, log_scale, spec.depth()?)?)
}

impl From<HeError> for ModelError {
    fn from(e: HeError) -> Self {
        ModelError::He(e)
    }
}

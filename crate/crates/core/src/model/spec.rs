use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::heops::{CompConfig, OpDescriptor};

pub const WEIGHTS_VERSION: u32 = 1;

/// Slope of the exact LeakyReLU that the degree-8 polynomial stands in for
/// when a layer uses `leaky_relu_poly` and inference runs in exact mode.
pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Activation {
    None,
    ReluExact,
    ReluApprox { n: u32, dg: u32, df: u32, bound: f64 },
    LeakyReluExact { slope: f64 },
    LeakyReluPoly,
}

impl Activation {
    pub fn relu_approx(cfg: CompConfig, bound: f64) -> Self {
        Activation::ReluApprox {
            n: cfg.n,
            dg: cfg.dg,
            df: cfg.df,
            bound,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Activation::None => "none",
            Activation::ReluExact => "relu_exact",
            Activation::ReluApprox { .. } => "relu_approx",
            Activation::LeakyReluExact { .. } => "leaky_relu_exact",
            Activation::LeakyReluPoly => "leaky_relu_poly",
        }
    }

    /// Homomorphic pipeline step for this activation, if it has one.
    pub fn descriptor(&self) -> Result<Option<OpDescriptor>, ModelError> {
        match *self {
            Activation::None => Ok(None),
            Activation::ReluApprox { n, dg, df, .. } => {
                Ok(Some(OpDescriptor::ReluApprox(CompConfig::new(n, dg, df)?)))
            }
            Activation::LeakyReluPoly => Ok(Some(OpDescriptor::LeakyReluApprox)),
            Activation::ReluExact | Activation::LeakyReluExact { .. } => Err(ModelError::Unsupported(format!(
                "activation {} cannot be evaluated homomorphically",
                self.name()
            ))),
        }
    }

    fn validate(&self, layer: usize) -> Result<(), ModelError> {
        match *self {
            Activation::ReluApprox { n, dg, df, bound } => {
                CompConfig::new(n, dg, df)?;
                if !(bound.is_finite() && bound > 0.0) {
                    return Err(ModelError::Invalid(format!(
                        "layer {layer}: relu_approx bound must be positive, got {bound}"
                    )));
                }
            }
            Activation::LeakyReluExact { slope } if !slope.is_finite() => {
                return Err(ModelError::Invalid(format!("layer {layer}: slope must be finite")));
            }
            _ => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layer {
    pub rows: usize,
    pub cols: usize,
    /// Row-major, `rows * cols` entries.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn new(rows: Vec<Vec<f64>>, bias: Vec<f64>, activation: Activation) -> Result<Self, ModelError> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(ModelError::Dimension("ragged weight rows".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            weights: rows.into_iter().flatten().collect(),
            bias,
            activation,
        })
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.weights[j * self.cols..(j + 1) * self.cols]
    }

    pub fn row_vecs(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|j| self.row(j).to_vec()).collect()
    }
}

/// A fully connected classifier plus its label metadata. Serialized as the
/// weights file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub version: u32,
    pub padded_size: usize,
    pub input_labels: Vec<String>,
    pub output_labels: Vec<String>,
    pub layers: Vec<Layer>,
}

pub type WeightsFile = NetworkSpec;

impl NetworkSpec {
    /// Builds a spec with `padded_size` derived from the layer shapes.
    pub fn new(
        input_labels: Vec<String>,
        output_labels: Vec<String>,
        layers: Vec<Layer>,
    ) -> Result<Self, ModelError> {
        let padded_size = layers
            .iter()
            .flat_map(|l| [l.rows, l.cols])
            .max()
            .unwrap_or(1)
            .next_power_of_two();
        let spec = Self {
            version: WEIGHTS_VERSION,
            padded_size,
            input_labels,
            output_labels,
            layers,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.version != WEIGHTS_VERSION {
            return Err(ModelError::Invalid(format!(
                "unsupported weights version {}",
                self.version
            )));
        }
        let (first, last) = match (self.layers.first(), self.layers.last()) {
            (Some(f), Some(l)) => (f, l),
            _ => return Err(ModelError::Invalid("network has no layers".into())),
        };
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.rows == 0 || layer.cols == 0 {
                return Err(ModelError::Dimension(format!("layer {i} has an empty dimension")));
            }
            if layer.weights.len() != layer.rows * layer.cols {
                return Err(ModelError::Dimension(format!(
                    "layer {i}: {} weights for a {}x{} matrix",
                    layer.weights.len(),
                    layer.rows,
                    layer.cols
                )));
            }
            if layer.bias.len() != layer.rows {
                return Err(ModelError::Dimension(format!(
                    "layer {i}: {} biases for {} rows",
                    layer.bias.len(),
                    layer.rows
                )));
            }
            if layer.weights.iter().chain(&layer.bias).any(|w| !w.is_finite()) {
                return Err(ModelError::Invalid(format!("layer {i} has non-finite parameters")));
            }
            if i > 0 && layer.cols != self.layers[i - 1].rows {
                return Err(ModelError::Dimension(format!(
                    "layer {i} takes {} inputs but layer {} produces {}",
                    layer.cols,
                    i - 1,
                    self.layers[i - 1].rows
                )));
            }
            layer.activation.validate(i)?;
        }
        if self.input_labels.len() != first.cols {
            return Err(ModelError::LabelCount {
                what: "input",
                expected: first.cols,
                found: self.input_labels.len(),
            });
        }
        if self.output_labels.len() != last.rows {
            return Err(ModelError::LabelCount {
                what: "output",
                expected: last.rows,
                found: self.output_labels.len(),
            });
        }
        let mut seen = HashSet::new();
        if let Some(dup) = self.input_labels.iter().find(|l| !seen.insert(l.as_str())) {
            return Err(ModelError::Invalid(format!("duplicate input label {dup:?}")));
        }
        if last.activation != Activation::None {
            return Err(ModelError::Invalid(
                "the last layer must not have an activation".into(),
            ));
        }
        let widest = self.layers.iter().flat_map(|l| [l.rows, l.cols]).max().unwrap_or(1);
        if self.padded_size != widest.next_power_of_two() {
            return Err(ModelError::Dimension(format!(
                "padded_size {} should be {}, the smallest power of two covering every layer",
                self.padded_size,
                widest.next_power_of_two()
            )));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    /// Canonical form: pretty-printed JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("spec serializes");
        s.push('\n');
        s
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = fs::read_to_string(path).map_err(|e| ModelError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        fs::write(path, self.to_json()).map_err(|e| ModelError::io(path, e))
    }

    pub fn n_outputs(&self) -> usize {
        self.output_labels.len()
    }

    /// The homomorphic program this network compiles to.
    pub fn pipeline(&self) -> Result<Vec<OpDescriptor>, ModelError> {
        let mut ops = Vec::new();
        for layer in &self.layers {
            ops.push(OpDescriptor::FcLayer);
            ops.extend(layer.activation.descriptor()?);
        }
        Ok(ops)
    }

    /// Levels encrypted inference consumes.
    pub fn depth(&self) -> Result<u32, ModelError> {
        Ok(crate::heops::depth_estimate(&self.pipeline()?)?)
    }

    /// Short identifier derived from the file contents.
    pub fn model_id(&self) -> String {
        let digest = self
            .to_json()
            .bytes()
            .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3));
        format!(
            "{}x{}-{digest:016x}",
            self.input_labels.len(),
            self.output_labels.len()
        )
    }
}

/// Yes/no answers keyed by symptom name. Serialized as `{"answers": {...}}`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymptomResponse {
    pub answers: BTreeMap<String, bool>,
}

impl SymptomResponse {
    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = fs::read_to_string(path).map_err(|e| ModelError::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        fs::write(path, s).map_err(|e| ModelError::io(path, e))
    }

    /// Response that answers yes to exactly the given indices.
    pub fn from_indices(labels: &[String], yes: &[usize]) -> Self {
        let mut answers: BTreeMap<String, bool> = labels.iter().map(|l| (l.clone(), false)).collect();
        for &i in yes {
            answers.insert(labels[i].clone(), true);
        }
        Self { answers }
    }
}

/// One-hot symptom vector, zero-padded to `padded_size`.
pub fn encode_symptoms(r: &SymptomResponse, spec: &NetworkSpec) -> Result<Vec<f64>, ModelError> {
    if let Some(unknown) = r
        .answers
        .keys()
        .find(|k| !spec.input_labels.iter().any(|l| l == *k))
    {
        return Err(ModelError::Input(format!("unknown symptom {unknown:?}")));
    }
    let mut x = vec![0.0; spec.padded_size];
    for (i, label) in spec.input_labels.iter().enumerate() {
        match r.answers.get(label) {
            Some(true) => x[i] = 1.0,
            Some(false) => {}
            None => return Err(ModelError::Input(format!("missing answer for symptom {label:?}"))),
        }
    }
    Ok(x)
}

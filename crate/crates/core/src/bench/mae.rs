use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{csv_table, fmt_f64, BenchError};
use crate::heops::{leaky_relu_approx_scalar, CompConfig, ReluApproxScalar};
use crate::model::{forward_trace, Activation, InferMode, NetworkSpec, BOUND_MARGIN, DEFAULT_LEAKY_SLOPE};

pub const MAE_CSV_HEADER: &str = "train_mode,infer_mode,mae,points";

/// An activation as used at training or inference time, evaluated on
/// pre-activations normalized into [-1, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ActivationKind {
    ReluExact,
    ReluApprox(CompConfig),
    LeakyReluExact(f64),
    LeakyReluPoly,
}

impl ActivationKind {
    fn evaluator(self) -> Result<Box<dyn Fn(f64) -> f64>, BenchError> {
        Ok(match self {
            ActivationKind::ReluExact => Box::new(|u: f64| u.max(0.0)),
            ActivationKind::ReluApprox(cfg) => {
                let relu = ReluApproxScalar::new(cfg, 1.0)?;
                Box::new(move |u| relu.eval(u))
            }
            ActivationKind::LeakyReluExact(slope) => Box::new(move |u: f64| if u > 0.0 { u } else { slope * u }),
            ActivationKind::LeakyReluPoly => Box::new(leaky_relu_approx_scalar),
        })
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActivationKind::ReluExact => f.write_str("relu_exact"),
            ActivationKind::ReluApprox(cfg) => write!(f, "relu_approx:{cfg}"),
            ActivationKind::LeakyReluExact(slope) => write!(f, "leaky_relu_exact:{slope}"),
            ActivationKind::LeakyReluPoly => f.write_str("leaky_relu_poly"),
        }
    }
}

impl FromStr for ActivationKind {
    type Err = BenchError;

    /// `relu_exact`, `relu_approx[:n,dg,df]`, `leaky_relu_exact[:slope]`,
    /// `leaky_relu_poly`.
    fn from_str(s: &str) -> Result<Self, BenchError> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        match (name, arg) {
            ("relu_exact", None) => Ok(ActivationKind::ReluExact),
            ("relu_approx", None) => Ok(ActivationKind::ReluApprox(CompConfig::default())),
            ("relu_approx", Some(a)) => Ok(ActivationKind::ReluApprox(a.parse()?)),
            ("leaky_relu_exact", None) => Ok(ActivationKind::LeakyReluExact(DEFAULT_LEAKY_SLOPE)),
            ("leaky_relu_exact", Some(a)) => a
                .parse()
                .map(ActivationKind::LeakyReluExact)
                .map_err(|_| BenchError::Config(format!("bad slope in {s:?}"))),
            ("leaky_relu_poly", None) => Ok(ActivationKind::LeakyReluPoly),
            _ => Err(BenchError::Config(format!("unknown activation {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaeRow {
    pub train: ActivationKind,
    pub infer: ActivationKind,
    pub mae: f64,
    pub points: usize,
}

/// Normalized hidden pre-activations over the dataset.
///
/// Each hidden layer's pre-activations come from an exact forward pass and
/// are divided by that layer's comparator bound, or, for other activations,
/// by `BOUND_MARGIN` times the largest magnitude seen (at least 1). Both
/// approximations are accurate on [-1, 1], so this is the domain they would
/// see inside the encrypted network.
fn activation_points(dataset: &[Vec<f64>], spec: &NetworkSpec) -> Result<Vec<f64>, BenchError> {
    let hidden: Vec<usize> = (0..spec.layers.len())
        .filter(|&i| spec.layers[i].activation != Activation::None)
        .collect();
    let mut per_layer: Vec<Vec<f64>> = vec![Vec::new(); hidden.len()];
    for x in dataset {
        let trace = forward_trace(spec, x, InferMode::Exact)?;
        for (slot, &i) in hidden.iter().enumerate() {
            per_layer[slot].extend_from_slice(&trace[i].0[..spec.layers[i].rows]);
        }
    }
    let mut points = Vec::new();
    for (zs, &i) in per_layer.into_iter().zip(&hidden) {
        let bound = match spec.layers[i].activation {
            Activation::ReluApprox { bound, .. } => bound,
            _ => BOUND_MARGIN * zs.iter().fold(1.0f64, |m, z| m.max(z.abs())),
        };
        points.extend(zs.into_iter().map(|z| z / bound));
    }
    Ok(points)
}

/// Mean absolute difference between the train-time and inference-time
/// activation of each pair, over every hidden unit of every sample.
pub fn bench_mae(
    pairs: &[(ActivationKind, ActivationKind)],
    dataset: &[Vec<f64>],
    spec: &NetworkSpec,
) -> Result<Vec<MaeRow>, BenchError> {
    let points = activation_points(dataset, spec)?;
    if points.is_empty() {
        return Err(BenchError::Config("network has no hidden activations or dataset is empty".into()));
    }
    pairs
        .iter()
        .map(|&(train, infer)| {
            let (t, i) = (train.evaluator()?, infer.evaluator()?);
            let total: f64 = points.iter().map(|&u| (t(u) - i(u)).abs()).sum();
            Ok(MaeRow {
                train,
                infer,
                mae: total / points.len() as f64,
                points: points.len(),
            })
        })
        .collect()
}

pub fn mae_csv(rows: &[MaeRow]) -> String {
    csv_table(
        MAE_CSV_HEADER,
        rows.iter().map(|r| {
            vec![
                format!("\"{}\"", r.train),
                format!("\"{}\"", r.infer),
                fmt_f64(r.mae),
                r.points.to_string(),
            ]
        }),
    )
}

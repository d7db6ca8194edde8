//! Evaluator-level algorithms built on the backend contract: slot summation,
//! fully connected layers, polynomial activations and the sign comparator.
//!
//! Every ciphertext routine has a plaintext image (`*_plain` or `*_scalar`)
//! that performs the same floating-point operations in the same order. On a
//! noise-free clear backend the two agree bit for bit.

mod compare;
mod poly;
mod sum;

use std::str::FromStr;

pub use compare::{comp_b, comp_b_scalar, relu_approx, relu_approx_scalar, CompConfig, ReluApproxScalar};
pub use poly::{
    leaky_relu_approx, leaky_relu_approx_scalar, poly_eval, poly_eval_scalar, PolyCoeffs,
    LEAKY_RELU_COEFFS,
};
pub use sum::{dft_sum, dft_sum_radix, fc_layer, fc_layer_plain, pad_pow2, rot_add, rot_add_plain};

use crate::error::{HeError, Result};

/// One step of a homomorphic pipeline, for level accounting.
#[derive(Debug, Clone, PartialEq)]
pub enum OpDescriptor {
    RotAdd,
    DftSum { size: usize },
    FcLayer,
    PolyEval { degree: usize },
    LeakyReluApprox,
    CompB(CompConfig),
    ReluApprox(CompConfig),
}

impl OpDescriptor {
    pub fn depth(&self) -> Result<u32> {
        match self {
            OpDescriptor::RotAdd => Ok(0),
            OpDescriptor::DftSum { size } => {
                if !size.is_power_of_two() {
                    return Err(HeError::Config(format!("dft_sum size {size} is not a power of two")));
                }
                Ok(size.trailing_zeros() + 1)
            }
            OpDescriptor::FcLayer => Ok(2),
            OpDescriptor::PolyEval { degree } => {
                if *degree == 0 {
                    return Err(HeError::Config("poly_eval degree must be at least 1".into()));
                }
                Ok(poly::ceil_log2(*degree) + 1)
            }
            OpDescriptor::LeakyReluApprox => Ok(PolyCoeffs::leaky_relu().depth()),
            OpDescriptor::CompB(cfg) => cfg.depth(),
            OpDescriptor::ReluApprox(cfg) => Ok(cfg.depth()? + 2),
        }
    }
}

impl FromStr for OpDescriptor {
    type Err = HeError;

    /// Accepts `rot_add`, `fc_layer`, `leaky_relu_approx`, `dft_sum:SIZE`,
    /// `poly_eval:DEGREE`, `comp_b:N,DG,DF` and `relu_approx:N,DG,DF`. A
    /// `key=value` argument such as `dft_sum size=512` is also accepted.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, arg) = match s.find([':', ' ']) {
            Some(i) => (&s[..i], Some(s[i + 1..].trim())),
            None => (s, None),
        };
        let arg = arg.map(|a| a.split_once('=').map_or(a, |(_, v)| v.trim()));
        let number = |what: &str| -> Result<usize> {
            arg.and_then(|a| a.parse().ok())
                .ok_or_else(|| HeError::Config(format!("{name} needs a numeric {what}")))
        };
        let config = || -> Result<CompConfig> {
            arg.map_or(Ok(CompConfig::default()), str::parse)
        };
        match name {
            "rot_add" => Ok(OpDescriptor::RotAdd),
            "fc_layer" => Ok(OpDescriptor::FcLayer),
            "leaky_relu_approx" => Ok(OpDescriptor::LeakyReluApprox),
            "dft_sum" => Ok(OpDescriptor::DftSum { size: number("size")? }),
            "poly_eval" => Ok(OpDescriptor::PolyEval { degree: number("degree")? }),
            "comp_b" => Ok(OpDescriptor::CompB(config()?)),
            "relu_approx" => Ok(OpDescriptor::ReluApprox(config()?)),
            other => Err(HeError::Config(format!("unknown pipeline op {other:?}"))),
        }
    }
}

/// Total levels a pipeline consumes. Parameters with
/// `log_modulus >= log_scale * (estimate + 1)` never raise `DepthExceeded`.
pub fn depth_estimate(pipeline: &[OpDescriptor]) -> Result<u32> {
    pipeline.iter().map(OpDescriptor::depth).sum()
}

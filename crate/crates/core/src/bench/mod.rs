//! Measurement harnesses: summation error and timing, activation MAE, and
//! encrypted-vs-plaintext agreement. Every harness writes CSV.

mod agreement;
mod mae;
mod sum;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

pub use agreement::{bench_agreement, AgreementReport, DeviationSummary};
pub use mae::{bench_mae, mae_csv, ActivationKind, MaeRow, MAE_CSV_HEADER};
pub use sum::{
    bench_sum, derived_csv, derived_report, dyadic_vector, records_csv, BenchRecord, DerivedRow,
    SumBenchConfig, SumMethod, DERIVED_CSV_HEADER, SUM_CSV_HEADER,
};

use crate::model::ModelError;
use crate::slotvec::{Encryptor, KeySet};
use crate::HeError;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    He(#[from] HeError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("bad benchmark configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Which key encrypts benchmark inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EncryptionMode {
    /// Symmetric encryption under the secret key. Fresh noise is a single
    /// Gaussian, so evaluation noise dominates what the harness measures.
    #[default]
    Secret,
    /// Public-key encryption, as a client without the secret key would do.
    Public,
}

impl EncryptionMode {
    pub fn encryptor(self, keys: &KeySet) -> Result<std::sync::Arc<dyn Encryptor>, HeError> {
        match self {
            EncryptionMode::Secret => keys.secret_encryptor(),
            EncryptionMode::Public => keys.encryptor(),
        }
    }
}

impl FromStr for EncryptionMode {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        match s {
            "secret" | "sk" => Ok(EncryptionMode::Secret),
            "public" | "pk" => Ok(EncryptionMode::Public),
            other => Err(BenchError::Config(format!("unknown encryption mode {other:?}"))),
        }
    }
}

/// Formats a float for CSV. Non-finite values print as `NaN`, `inf`, `-inf`.
pub(crate) fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v}")
    }
}

pub(crate) fn csv_table(header: &str, rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = String::new();
    out.push_str(header);
    out.push('\n');
    for row in rows {
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<(), BenchError> {
    fs::write(path, text).map_err(|source| BenchError::Io {
        path: path.display().to_string(),
        source,
    })
}

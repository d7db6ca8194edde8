pub mod bench;
pub mod ckks;
pub mod error;
pub mod heops;
pub mod model;
pub mod netsvc;
pub mod slotvec;

pub use error::{HeError, Result};

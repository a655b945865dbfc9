//! Files, batch commands and self-checks around `semtok-core`.
//!
//! - [`npy`]: 2-D float arrays in the `.npy` container.
//! - [`manifest`]: line-delimited JSON utterance records.
//! - [`wav`]: mono WAVE input.
//! - [`cli`]: the `semtok` command-line front end.
//! - [`oracle`] and [`selfcheck`]: independent reference computations.

use std::path::Path;

use semtok_core::Matrix;

pub mod cli;
mod error;
pub mod fixtures;
pub mod manifest;
pub mod npy;
pub mod oracle;
pub mod selfcheck;
pub mod wav;

pub use error::{Error, Result};

pub fn load_matrix(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    npy::read_array(path).map_err(|source| Error::Array {
        path: path.to_path_buf(),
        source,
    })
}

pub fn save_matrix(m: &Matrix, dtype: npy::Dtype, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    npy::write_array(m, dtype, path).map_err(|source| Error::Array {
        path: path.to_path_buf(),
        source,
    })
}

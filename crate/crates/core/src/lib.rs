//! Sparse Bayesian kernel classifier that selects training samples and input
//! features together. Sample weights and feature weights both carry
//! truncated Gaussian priors; their precisions are re-estimated from the
//! Laplace evidence and pruned once they exceed a threshold.
//!
//! ```no_run
//! use pfcvm::bayes::{fit, TrainConfig};
//! use pfcvm::data::gen_waveform;
//! use pfcvm::kernel::KernelRef;
//!
//! let data = gen_waveform(100, 19, 7);
//! let (model, trace) = fit(&data, &KernelRef::rbf(), &TrainConfig::default())?;
//! println!("{} relevance vectors, features {:?}", model.num_relevance_vectors(), model.feature_indices);
//! # Ok::<(), pfcvm::Error>(())
//! ```

pub mod bayes;
pub mod data;
pub mod diagnostics;
mod error;
pub mod kernel;
pub mod linalg;
pub mod metrics;
pub mod registry;
mod serde_rows;

pub use error::{Error, Result};

//! Discrete time-series models: exponential family units driven by filtered
//! histories of their parents and coupled within each step.
//!
//! ```
//! use dynef::basis::BasisBank;
//! use dynef::graph::{CausalGraph, LateralGraph};
//! use dynef::learning::{train_ml, TrainConfig};
//! use dynef::model::{sample_sequence, sequence_log_likelihood, Alphabet, Architecture};
//!
//! # fn main() -> dynef::Result<()> {
//! let arch = Architecture::new(
//!     Alphabet::binary(),
//!     CausalGraph::new(2, [(0, 1), (1, 1)])?,
//!     LateralGraph::new(2, [(0, 1)])?,
//!     BasisBank::raised_cosine(2, 3)?,
//! )?;
//! let cfg = TrainConfig { epochs: 20, ..Default::default() };
//! let teacher = cfg.initial_params(&arch);
//! let data: Vec<_> = (0..50)
//!     .map(|n| sample_sequence(&arch, &teacher, 40, n, &Default::default()))
//!     .collect::<Result<_, _>>()?;
//! let fit = train_ml(&arch, &data, &cfg)?;
//! assert!(sequence_log_likelihood(&arch, &fit.params, &data[0])? < 0.0);
//! # Ok(())
//! # }
//! ```

// `!(x > 0.0)` is used on purpose to reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod basis;
pub mod cli;
pub mod error;
pub mod graph;
pub mod inference;
pub mod io;
pub mod learning;
pub mod model;
pub mod rng;
pub mod tasks;

pub use error::{Error, Result};

//! A numerical laboratory for minimax lower bounds on learning
//! Kronecker-structured dictionaries `D = A ⊗ B` from noisy sparse data.
//!
//! * [`linalg`]: Kronecker / Khatri-Rao / Hadamard kernels and index maps.
//! * [`model`]: the generative model `Y = D X + N` and its coefficient laws.
//! * [`packing`]: sign codebooks and verified dictionary ensembles.
//! * [`bounds`]: KL divergence, MI upper bounds, Fano threshold, the minimax
//!   lower-bound evaluators, order-wise scalings and RIP constants.
//! * [`simulate`]: Monte Carlo detection and MSE experiments over an ensemble.
//! * [`cli`]: the configuration-driven `bound` / `pack` / `simulate` / `rip`
//!   commands behind the `kslab` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod linalg;
pub mod model;
pub mod packing;
pub mod simulate;
pub mod svg;

pub use error::{Error, Result};
pub use linalg::{IndexMultiset, Matrix};
pub use model::{CoefficientModel, KsDictionary};
pub use packing::{DictionaryEnsemble, EnsembleMode, PackingParams};

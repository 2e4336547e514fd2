//! Latent semantic analysis and correspondence analysis for document
//! retrieval: weighting, truncated SVD embeddings with a tunable
//! singular-value exponent, query fold-in, ranked retrieval, and a
//! cross-validated MAP sweep over the (k, alpha) grid.

pub mod container;
pub mod corpus;
pub mod embed;
pub mod error;
pub mod eval;
pub mod harness;
pub mod retrieval;
pub mod sparse;
pub mod svd;
pub mod toy;
pub mod weighting;

pub use error::{Error, Result};

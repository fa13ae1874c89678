//! Findability and retrievability measurement for retrieval systems.
//!
//! The crate builds an inverted index over a document collection, generates
//! simulated known-item queries for every document, ranks documents with
//! BM25, Dirichlet-smoothed query likelihood or DFR-PL2, and scores how easily
//! each document is found. Collection-level bias is summarised with the Gini
//! coefficient and Lorenz curve.

pub mod accessibility;
pub mod analysis;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod fingerprint;
pub mod index;
pub mod metrics;
pub mod querygen;
pub mod report;
pub mod retrieval;
pub mod scores;

pub use error::{Error, Result};

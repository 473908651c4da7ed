//! Random-walk views of attributed graphs, fractional Laplacian features,
//! pooled graph fingerprints and a shallow trainable predictor.

pub mod check;
pub mod cli;
pub mod error;
pub mod features;
pub mod graph;
pub mod io;
pub mod model;
pub mod pipeline;
pub mod repair;
pub mod spectral;
mod unionfind;
pub mod walks;

pub use error::{Error, Result};
pub use graph::{AttributedGraph, Edge, RawGraph};
pub use walks::{ViewBundle, ViewKind, WalkView};

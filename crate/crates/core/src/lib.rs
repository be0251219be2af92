//! Static dependency-graph construction, directed exploration and
//! privacy-policy cross-validation for MiniApp packages.

pub mod diag;
pub mod explorer;
pub mod frontend;
pub mod graphs;
pub mod package;
pub mod policy;

pub use diag::{DiagCode, Diagnostic};

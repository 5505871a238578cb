//! Group actions on fine hyperbolic graphs, at desk scale.
//!
//! The crate provides computable group backends, an equivariant graph engine
//! that materializes finite windows of possibly infinite graphs, constructors
//! for Cayley and coned-off Cayley graphs, equivariant surgery, hyperbolicity
//! and fellow-travel measurement, simple-ladder disc diagrams, and measured
//! relative-quasiconvexity certificates.
//!
//! Everything infinite is approached through finite windows with explicit
//! completeness flags: results are certificates about what was enumerated,
//! never claims about the infinite object.

pub mod error;
pub mod group;

pub use error::{Error, Result};
pub use group::{GroupElement, GroupOracle, SubgroupHandle};

pub mod cli;
pub mod export;
pub mod io;
pub mod report;

pub mod cayley;
pub mod eqgraph;
pub mod fixtures;
pub mod surgery;
pub mod hyp;
pub mod ladder;
pub mod qc;

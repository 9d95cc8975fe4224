//! Simulation, decoding and verification toolkit for agreement tests on
//! ensembles of local functions over `k`-subsets of `[n]`, together with the
//! hypergraph pruning construction and its branching-factor and unique-hit
//! guarantees.

pub mod agreement;
pub mod decode;
pub mod ensemble;
pub mod experiment;
pub mod error;
pub mod hypergraph;
pub mod pruning;
pub mod rng;
pub mod setcore;
pub mod stats;

pub use error::{Error, Result};
pub use hypergraph::{BranchingReport, BranchingWitness, Hypergraph, HitMode};
pub use setcore::{BiasedPairParams, Symbol, TestParams, VertexSet};
pub use stats::{EvalMode, Estimate};

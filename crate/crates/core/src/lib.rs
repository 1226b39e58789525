//! Two-type competing first-passage percolation on configuration-model
//! random graphs.
//!
//! Two infections start from two random seed vertices of a random
//! multigraph with prescribed degrees and spread along edges at exponential
//! rates `lambda1` and `lambda2`, each vertex keeping the type that reaches
//! it first. The graph is revealed while the infections spread, which turns
//! the whole competition into a tractable jump chain over half-edge
//! pairings.
//!
//! The library covers the full pipeline:
//!
//! * [`degrees`]: degree sequences, IID sampling, size-biased statistics;
//! * [`pairing`]: uniform half-edge matchings, simple-graph conditioning;
//! * [`exploration`]: the competition engine and its active-fraction
//!   diagnostic `M_k`, a martingale exactly when the rates are equal;
//! * [`branching`]: the two-process branching approximation of the early
//!   phase and the limiting race fraction `V`;
//! * [`ensemble`]: reproducible multi-replica experiments, windowed
//!   statistics, scaling studies, and an exhaustive martingale oracle;
//! * [`stats`]: the supporting summaries and hypothesis tests.

pub mod branching;
pub mod degrees;
pub mod ensemble;
pub mod exploration;
pub mod pairing;
pub mod stats;

/// Version stamp embedded in every serialized report.
pub const SCHEMA_VERSION: u32 = 1;

//! Stack-distance characterization of how a program stresses cache.
//!
//! The pipeline folds a memory trace to cache lines, measures LRU stack
//! distances, fits the (sampled) distances to a mixture of discrete atoms and
//! one continuous family, and predicts the capacity miss ratio of a
//! fully-associative LRU cache of any size in time independent of the trace.
//!
//! ```text
//! trace ──► stackdist ──► SampleSet ──► characterize ──► Characterization
//!                                                             │
//!                         cachesim (ground truth) ◄── compare ┴─► predict
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cachesim;
pub mod characterize;
pub mod distributions;
mod error;
pub mod predict;
pub mod stackdist;
pub mod trace;

pub use error::{Error, Result};

pub use cachesim::{empirical_miss_ratio, simulate_lru, SimResult};
pub use characterize::{
    characterize, fit_best, refined_fit, split_discrete, AnalysisConfig, Characterization,
    FamilySelection, RefinementDiagnostics, RoundDiagnostics,
};
pub use distributions::{ContinuousModel, DiscreteComponent, Family, Moments};
pub use predict::{
    divergence, miss_ratio, monte_carlo_outline, sweep, CacheConfig, PredictionResult,
};
pub use stackdist::{
    compute_distances, compute_distances_bruteforce, outline, sample_distances, to_line_addresses,
    Distance, DistanceSequence, LineSequence, Outline, SampleSet,
};
pub use trace::{AccessKind, AccessSequence, TraceFormat};

//! Joint search over DNN sub-network architectures and compute-in-memory
//! (CiM) hardware configurations.
//!
//! The crate is `no_std` (it needs `alloc`) and holds every piece of the
//! exploration that is pure computation:
//!
//! - [`workload`]: elastic architecture spaces and their lowering to
//!   generalized-matmul [`LayerSpec`](workload::LayerSpec)s.
//! - [`cim`]: the eight-parameter hardware configuration space, budget
//!   validation and the roofline cycle model over DRAM → L2 → L1 → memory
//!   arrays.
//! - [`dataflow`]: the per-layer tiling compiler (spatial partition plus
//!   temporal chunking) that feeds the cycle model.
//! - [`encoding`]: one-hot genomes over (architecture, configuration) and
//!   the variation operators used by the evolutionary search.
//! - [`predict`]: ridge and linear-SVR surrogates, MAPE and Kendall τ-b.
//! - [`search`]: NSGA-II screening, the predictor-guided outer loop,
//!   Pareto extraction and the iso-accuracy cycle-reduction metric.
//! - [`accuracy`]: a deterministic accuracy proxy standing in for trained
//!   super-network evaluation.
//!
//! File formats, caching evaluators and the command line live in the
//! companion `cimnet` crate.

#![no_std]
#![forbid(unsafe_code)]
#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod accuracy;
pub mod cim;
pub mod dataflow;
pub mod encoding;
pub mod predict;
pub mod rng;
pub mod search;
pub mod workload;

pub use accuracy::{proxy_accuracy, ProxyParams};
pub use cim::{
    sample_config, simulate, simulate_layer, validate_config, ConfigSpace, CycleReport, HardwareConfig,
    HwParam, HwParams, LayerCost, Resource, Violation,
};
pub use dataflow::{compile_dataflow, AnalyticCompiler, Dataflow, DataflowCompiler, Factors};
pub use encoding::{Codec, Genome, GenomeLayout, Scope};
pub use predict::{kendall_tau, mape, RidgeModel, TargetTransform};
pub use search::{
    crowding_distance, cycle_reduction_at_iso_accuracy, non_dominated_sort, pareto_front, Objectives,
    ParetoPoint, Provenance, SearchMode, SearchSetting,
};
pub use workload::{
    count_macs, count_params, lower_to_layers, sample_subnet, ArchSpace, Family, LayerSpec, SubnetArch,
};

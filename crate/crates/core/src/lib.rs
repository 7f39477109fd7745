//! Community detection on a privacy-perturbed target network, transferring
//! structure from distributed, privacy-perturbed source networks.
//!
//! Sources compute their leading eigenspaces locally ([`federation`]); the
//! coordinator aligns and weights them ([`spectral`], [`weighting`]),
//! regularizes the target eigenspace toward the aggregate and clusters the
//! rows ([`transnet`]).
//!
//! ```
//! use transnet::netgen::{build_scenario, ExperimentConfig};
//! use transnet::transnet::{run_transnet, LambdaChoice, PipelineConfig};
//!
//! let config = ExperimentConfig::preset(1, 1).unwrap().with_l(4);
//! let release = build_scenario(&config, 7).unwrap().release(8);
//! let mut pipeline = PipelineConfig::new(config.k, 9);
//! pipeline.lambda = LambdaChoice::Fixed(1.0);
//! let result = run_transnet(&release, &pipeline).unwrap();
//! assert_eq!(result.labels.len(), config.n);
//! ```

// `!(x >= 0.0)` is used deliberately so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod exec;
pub mod federation;
pub mod harness;
pub mod io;
pub mod kmeans;
pub mod netgen;
pub mod privacy;
pub mod rng;
pub mod spectral;
pub mod transnet;
pub mod weighting;

pub use error::{Error, Result, WireError};
pub use exec::Exec;

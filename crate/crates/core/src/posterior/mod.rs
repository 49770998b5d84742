//! Posterior statistics from a trained generator and reference oracles.
//!
//! For a measurement `y` the generator is pushed through `K` latent draws.
//! The snapshots give the pixel-wise mean and population standard deviation,
//! and a column-pivoted QR of the snapshot matrix ranks the most informative
//! samples. For low-dimensional priors an importance-sampling oracle in
//! parameter space supplies reference statistics.

mod export;
mod oracle;
mod rrqr;
mod stats;

pub use export::{export_field, export_json};
pub use oracle::{importance_oracle, reference_posterior, OracleSummary};
pub use rrqr::rrqr_select;
pub use stats::{
    generate_snapshots, l1_error, pairwise_sum, posterior_stats, PosteriorSummary, Snapshots, StatisticFunctional,
    DEFAULT_DRAWS, DEFAULT_IMPORTANT,
};

//! Procedure planning over action-step sequences.
//!
//! The pipeline has three stages. A transition graph with out-edge-normalized
//! probabilities is built from a corpus of ground-truth plans. Bounded-length
//! walk retrieval between a start and an end action turns that graph into
//! per-timestep action distributions (a plan recommendation). A conditioned
//! projected diffusion model then denoises the full action sequence, with the
//! observations and the recommendation pinned as condition cells.
//!
//! Modules follow the pipeline: [`corpus`] loads and synthesizes plan data,
//! [`graph`] builds and normalizes the transition graph, [`retrieval`] answers
//! top-R walk queries, [`diffusion`] holds the schedule/projection/training
//! machinery, [`planner`] wires the step and planning models together, and
//! [`eval`] scores predicted plans (SR / mAcc / mIoU).
//!
//! The `parallel` feature (on by default) runs batch evaluation on rayon;
//! without it everything falls back to sequential loops with identical output.

pub mod corpus;
pub mod diffusion;
mod error;
pub mod eval;
pub mod graph;
pub mod planner;
pub mod retrieval;

pub use error::{Error, Result};

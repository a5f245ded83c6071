//! Motion segmentation of event-camera streams.
//!
//! Events in a window are linked by a sparse space-time graph, candidate
//! motion models are proposed by fitting sub-volumes with contrast
//! maximization, and labels and models are then refined alternately:
//! labels by alpha-expansion graph cuts over an energy with a data term
//! (IWE negatives), a Potts smoothness term and a per-label cost; models by
//! refitting every cluster on its own events.

pub mod cli;
pub mod error;
pub mod eval;
pub mod events;
pub mod graph;
pub mod motion;
pub mod optim;
pub mod pipeline;
pub mod synth;

pub use error::{Error, Result};

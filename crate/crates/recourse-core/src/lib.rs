//! Generation and evaluation of diverse recourse plans for binary
//! classifiers over tabular data.
//!
//! Given an input that receives an unfavorable prediction, the library
//! selects `K` diverse prototypes among favorably-predicted training
//! samples (via determinantal point process MAP inference or a binary
//! quadratic program with an eigen-approximate screening hierarchy) and
//! interpolates from the input to each prototype, either along straight
//! segments or along shortest paths of an actionability graph. A metric
//! suite scores the resulting plans for cost, validity, diversity, and
//! adherence to the data manifold.

pub mod classifier;
pub mod data;
pub mod dpp;
pub mod error;
pub mod geometry;
pub mod graph;
pub mod interpolate;
pub mod metrics;
pub(crate) mod par;
pub mod quad;
pub mod selection;

pub use error::{Error, Result};
pub use selection::Selection;

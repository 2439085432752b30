//! Modular simple recurrent networks for receptive morphology.
//!
//! The crate generates artificial-language stimuli for a range of
//! morphological rule types, trains modular Elman networks that map phone
//! sequences onto root and inflection identities, analyses hidden-layer
//! trajectories with PCA, and runs the replicate experiment suites.

pub mod analysis;
pub mod clocked;
pub mod error;
pub mod feedforward;
pub mod harness;
pub mod io;
pub mod morphogen;
pub mod net;
pub mod par;
pub mod phonology;
pub mod trainer;

pub use error::{Error, Result};

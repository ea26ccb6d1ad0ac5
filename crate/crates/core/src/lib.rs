//! Listwise preference optimization with masked-image negatives.
//!
//! The crate covers the full offline pipeline:
//!
//! * [`masking`] turns one image and a set of object boxes into a list of
//!   progressively masked images, best first.
//! * [`listgen`] picks the objects to mask from the preferred answer and
//!   detector output, checks the hard negative with a verifier and writes the
//!   dataset to disk.
//! * [`losses`] implements the pairwise, anchor and listwise objectives with
//!   analytic gradients.
//! * [`surrogate`] trains a small stand-in policy on those objectives.
//! * [`synthbench`] is a synthetic object-hallucination benchmark for it.

pub mod imageio;
pub mod listgen;
pub mod losses;
pub mod masking;
pub mod seed;
pub mod surrogate;
pub mod synthbench;
pub mod types;

pub use losses::{Objective, PolicyLogProbs};
pub use types::{
    BoundingBox, Hyperparams, Image, LossBreakdown, MaskPlan, PreferenceSample, PromptStyle, RankedList, Rgb,
    ScoreVector, SweepDirection, TypeError, ValidSample,
};

//! Oracle-efficient online learning with stochastic features and adversarial labels.
//!
//! The learners in this crate only touch a hypothesis class through a
//! mixed-ERM oracle. See [`domain::MixedErmQuery`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bandit;
pub mod domain;
pub mod environment;
pub mod epochs;
pub mod error;
pub mod loss;
pub mod oracles;
pub mod predictor;
pub mod rng;
pub mod scalar;
pub mod shifting;
pub mod stats;
pub mod trace;
pub mod verify;

pub use domain::{
    best_in_hindsight, signed_to_absolute, ErmResult, Feature, HypothesisClass, Label, LabeledPair, Metered, MixedErmQuery, Sign,
    SignedTerm,
};
pub use error::{Error, Result};
pub use loss::{loss_eval, unit_grid, Loss, LossKind};
pub use scalar::Scalar;

pub type Feature64 = Feature<f64>;
pub type Feature32 = Feature<f32>;
pub type Query64 = MixedErmQuery<f64>;
pub type Loss64 = Loss<f64>;

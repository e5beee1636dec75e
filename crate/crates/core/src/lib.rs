//! Toolkit for studying national-identity stance on social media.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`labeler`] assigns pro-/anti-independence labels from self-reported
//!    profile locations (plus referendum hashtags where a territory needs them).
//! 2. [`graph`] builds follow and interaction graphs over labelled users and
//!    measures political homophily as nominal assortativity, with
//!    permutation-based significance.
//! 3. [`features`] turns users into the four classifier feature families and the
//!    thirty behavioural features compared across groups with [`stats`].
//! 4. [`classify`] runs the four classifiers under stratified k-fold
//!    cross-validation with micro-averaged accuracy.
//!
//! [`synth`] generates datasets with planted homophily so every stage can be
//! exercised without the original crawl.

pub mod classify;
pub mod error;
pub mod features;
pub mod graph;
pub mod ingest;
pub mod labeler;
pub mod model;
pub mod stats;
pub mod synth;
pub mod textfeat;

pub use error::{Error, Result};
pub use model::{Dataset, StanceLabel, Territory, TerritoryId, Tweet, UserRecord};

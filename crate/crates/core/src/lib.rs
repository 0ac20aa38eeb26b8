//! Handwriting-dynamics analysis core.
//!
//! Everything needed to go from raw pen recordings to evaluated predictors:
//!
//! - [`ink`]: the hierarchical pen-recording data model (samples, strokes,
//!   drills, students, cohorts) and its invariants.
//! - [`kinematics`]: speed and acceleration profiles from stroke samples,
//!   plus Gaussian smoothing.
//! - [`lognorm`]: decomposition of a speed profile into lognormal velocity
//!   pulses, profile synthesis, and reconstruction SNR.
//! - [`features`]: basic, entropy, and lognormal feature families per drill,
//!   aggregated to student level.
//! - [`learn`]: OLS, logistic regression, decision forests, and VIF/AIC
//!   backward feature elimination.
//! - [`eval`]: stratified student-level cross-validation, regression and
//!   classification metrics, baselines, and report assembly.
//! - [`synth`]: seeded synthetic cohorts with known lognormal ground truth
//!   and grade-dependent motor maturation.
//!
//! The crate is `no_std`-compatible (with `alloc`); all IO, file formats and
//! the command-line front end live in the companion `siglog` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod eval;
pub mod features;
pub mod ink;
pub mod kinematics;
pub mod learn;
mod linalg;
pub mod lognorm;
pub mod synth;

pub use ink::{Cohort, Drill, InkSample, StudentRecord, Stroke};
pub use lognorm::{FitConfig, FitResult, LognormalComponent};

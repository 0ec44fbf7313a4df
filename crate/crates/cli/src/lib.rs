//! Experiment harness around the survival transfer library: cohort CSV
//! files, synthetic two-domain data, stratified cross-validation, and the
//! method-by-size comparison grid the `tsf` binary drives.

pub mod cv;
pub mod grid;
pub mod io;
pub mod synth;

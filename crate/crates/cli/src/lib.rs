//! Command-line front end: model files, observables and JSON reports.

pub mod run;
pub mod spec;

//! Command-line front end: configuration loading, named experiments, and
//! deterministic CSV/JSON artifacts (same config and seed → byte-identical
//! data files; timing lives only in `run_record.json`).

pub mod commands;
pub mod config;
pub mod output;

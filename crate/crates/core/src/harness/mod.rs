//! Experiment plumbing: method dispatch, scenario grids, the tabular
//! benchmark and toy data.

mod method;
mod runner;
mod toy;

pub use method::{default_widths, fit_model, run_method, Method, MethodKind, RunSettings};
pub use runner::{
    benchmark_odds, format_tests, point_key, run_grid, scale_split, OddsReport, PairwiseTest,
    Partitions, ODDS_GROUPING,
};
pub use toy::{demo_toy, toy_architecture, toy_data, toy_settings, ToyData, ToySpec};

//! Dataset ingestion, scaling and construction of semi-supervised splits.

mod dataset;
mod grid;
mod scale;
mod scenario;

pub use dataset::{load_csv, read_csv, save_csv, write_csv, Dataset, CLASS_COLUMN, LABEL_COLUMN};
pub use grid::{parse_grid, GridCell, GridPoint};
pub use scale::{fit_transform, minmax_scale, standardize, Scaler, ScalerKind};
pub use scenario::{
    labeled_count, make_scenario, odds_split, stratified_split, AnomalyClassChoice, OddsSplit,
    Scenario, ScenarioConfig, SemiSupervisedSplit, ODDS_GAMMA_L, ODDS_TRAIN_FRACTION,
};

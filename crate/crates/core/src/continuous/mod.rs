//! Two continuous items: weighted kernel density estimates per pattern and
//! the full-data densities they determine.

mod bivariate;
mod kde;
mod sample;

pub use bivariate::{
    default_grid, fit_bivariate, AxisGrid, BivariateIcin, GridSpec, PatternFunctionals, DEFAULT_GRID_POINTS,
    GRID_PADDING, MIN_GRID_POINTS,
};
pub use kde::{silverman_bandwidth, silverman_rule, weighted_quantile, KdeDensity};
pub use sample::{pattern_at, pattern_index, pattern_proportions, WeightedRecord, WeightedSample, PATTERN_ORDER};

//! Combination algebra, level hierarchies and the estimation drivers.

mod hierarchy;
mod index;
mod mc;
mod stats;
mod tables;

pub use hierarchy::{
    combination_value, delta_p, mixed_difference, p_value, p_values, CoupledSample,
    FullGridHierarchy, LevelSampler, SchemeConfig, SparseHierarchy,
};
pub use index::{balanced_index_set, standard_index_set, IndexKind, IndexSet, LevelIndex};
pub use mc::{
    alpha_search, default_alpha_grid, execute, mc_run, mlmc_allocation, mlmc_run, plan,
    sparse_level_for_tolerance, sparse_mc, EstimatorReport, Method, Pilot, PilotOptions, Plan,
};
pub use stats::{fit_interior_slope, fit_slopes, mean, ols_slope, pairwise_sum, variance, LevelId, LevelStats, StatField};
pub use tables::{estimate_lstar, geometric_schedule, table1, table2};

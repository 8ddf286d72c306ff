//! Theil decompositions, fixed-effects variance partitioning and temporal trends.

mod anova;
mod theil;
mod trend;

pub use anova::{
    partition_observations, variance_partition, Effects, EstimationVariant, FactorObs, PartitionReport,
    VariancePartition,
};
pub use theil::{theil, theil_by_bins, theil_decompose, theil_split, BinnedTheil, GroupTerm, TheilDecomposition};
pub use trend::{fit_trend, temporal_trend, TrendEstimate, TrendMetric};

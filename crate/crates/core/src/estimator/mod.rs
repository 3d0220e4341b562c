//! Growth-parameter estimation from transition panels.

pub mod bins;
pub mod regimes;
pub mod regression;
pub mod sweep;
pub mod trend;

pub use bins::{bin_moments, bin_panel, make_bins, Bin, BinSeries, Target, DEFAULT_BINS, DEFAULT_MIN_COUNT};
pub use regimes::{split_regimes, split_regimes_with, Average, RegimeSplit};
pub use regression::{fit_drift_abs, fit_ratio, fit_vol_abs, ols, DriftFit, GrowthFit, LineFit, Regime, VolFit};
pub use sweep::{estimate_pair, horizon_sweep, EstimatorSettings, HorizonSweep, SweepEntry};
pub use trend::{trend_test, Direction, TrendResult};

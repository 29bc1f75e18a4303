//! Convergence diagnostics adapted to ensemble samplers: per-iteration
//! walker summaries, the multivariate potential scale reduction factor over
//! multiple runs, and a Heidelberger-Welch style stationarity test.

mod heidelberger;
mod psrf;
mod summaries;

pub use heidelberger::{cvm_cdf, heidelberger_welch, spectral_density_at_zero, HwReport};
pub use psrf::{mpsrf, PsrfReport};
pub use summaries::{
    ensemble_mean_series, ensemble_variance_series, flatten_series, running_stats, SummaryKind,
    SummarySeries,
};

//! JSON report documents emitted by the commands.

use std::path::Path;

use serde::Serialize;

use aies_core::diagnostics::PsrfReport;

use crate::error::Result;

/// One Heidelberger-Welch verdict, labelled by the series it was run on.
#[derive(Debug, Clone, Serialize)]
pub struct HwEntry {
    pub series: String,
    pub passed: bool,
    pub fraction_discarded: f64,
    pub cvm: f64,
    pub p: f64,
    pub halfwidth_passed: Option<bool>,
}

/// Flattened-trace statistics of one run.
#[derive(Debug, Clone, Serialize)]
pub struct RunStats {
    pub run: usize,
    pub init_mean: f64,
    pub init_sd: f64,
    pub acceptance_rate: f64,
    /// Running mean of coordinate 1 over the trailing half of the
    /// flattened series.
    pub mu_hat: f64,
    /// Running standard deviation over the same window.
    pub sigma_hat: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagnoseReport {
    pub r_hat_mean: Option<f64>,
    pub r_hat_var: Option<f64>,
    /// Largest eigenvalue from the ensemble-mean factor.
    pub lambda_max: Option<f64>,
    pub w_singular: bool,
    pub hw: Vec<HwEntry>,
    pub m_runs: usize,
    /// Stored iterations entering the diagnostics after burn-in discard.
    pub t_used: usize,
    pub burn_in_fraction: f64,
    pub runs: Vec<RunStats>,
    pub detail_mean: PsrfReport,
    pub detail_var: PsrfReport,
}

/// Diagnose report plus the effective run geometry of an in-process suite.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub dim: usize,
    pub walkers: usize,
    pub iterations: u64,
    pub scale: f64,
    #[serde(flatten)]
    pub diagnostics: DiagnoseReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct TangentRow {
    pub t: f64,
    pub r: f64,
    pub ez2mz: f64,
    pub var_x1: f64,
    pub slope: f64,
    pub no_accepted_moves: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct PredictReport {
    pub alpha: f64,
    pub dim: usize,
    pub walkers: usize,
    pub t_max: usize,
    pub aux_iters: usize,
    pub tangents: Vec<TangentRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MeanFieldReport {
    pub walkers: usize,
    pub duration: f64,
    pub a: f64,
    pub fitted_rate: f64,
    pub mean_drift: f64,
    pub truncated: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BaselineReport {
    pub target: String,
    pub steps: u64,
    pub density_evals: u64,
    pub acceptance_rate: f64,
    pub mu_hat_x1: f64,
    pub sigma_hat_x1: f64,
    pub ess_x1: f64,
    pub scales: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ZProfileReport {
    pub dim: usize,
    pub sigma0: f64,
    pub repetitions: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub acceptance_rate: f64,
    pub accepted_fraction_above_one: f64,
    pub accepted_sd: f64,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| crate::error::CliError::Config(format!("cannot serialize report: {e}")))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

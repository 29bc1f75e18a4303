//! Multi-run orchestration: the M-initialization protocol and the
//! diagnostics pass over its chain records.

use aies_core::chain::{run_chain, ChainRecord};
use aies_core::diagnostics::{
    ensemble_mean_series, ensemble_variance_series, flatten_series, heidelberger_welch, mpsrf,
    running_stats, SummarySeries,
};
use aies_core::ensemble::{InitSpec, StretchParams};
use aies_core::rng::{derive_seed, Stream};
use aies_core::targets::TargetDensity;

use crate::error::{CliError, Result};
use crate::report::{DiagnoseReport, HwEntry, RunStats};

/// Seed of run `m` within a protocol started from `master_seed`.
pub fn run_seed(master_seed: u64, m: usize) -> u64 {
    derive_seed(master_seed, Stream::Aux, m as u64)
}

/// Run one chain per initialization, each with a seed derived from the
/// master seed and its run index.
pub fn run_protocol(
    target: &dyn TargetDensity,
    params: &StretchParams,
    n_walkers: usize,
    iterations: u64,
    inits: &[InitSpec],
    master_seed: u64,
) -> Result<Vec<ChainRecord>> {
    let mut records = Vec::with_capacity(inits.len());
    for (m, init) in inits.iter().enumerate() {
        records.push(run_chain(
            target,
            params,
            *init,
            n_walkers,
            iterations,
            run_seed(master_seed, m),
        )?);
    }
    Ok(records)
}

/// Flattened-trace statistics of coordinate 1 at the end of a run.
pub fn run_stats(record: &ChainRecord, run_id: usize) -> RunStats {
    let flat = flatten_series(record, 0);
    let (means, sds) = running_stats(&flat);
    RunStats {
        run: run_id,
        init_mean: record.init.mean,
        init_sd: record.init.sd,
        acceptance_rate: record.acceptance_rate(),
        mu_hat: *means.last().unwrap_or(&f64::NAN),
        sigma_hat: *sds.last().unwrap_or(&f64::NAN),
    }
}

/// The per-run inputs the diagnostics need, small enough to keep for all M
/// runs at once (the full chain record is not).
pub struct RunSummaries {
    pub mean_window: SummarySeries,
    pub var_window: SummarySeries,
    pub stats: RunStats,
}

/// Extract the post-burn-in summary windows and trace statistics of one
/// record.
pub fn summarize_record(record: &ChainRecord, run_id: usize, burn_in: f64) -> Result<RunSummaries> {
    if !(0.0..1.0).contains(&burn_in) {
        return Err(CliError::Config(format!(
            "burn-in fraction {burn_in} not in [0, 1)"
        )));
    }
    let from = ((record.t_stored() as f64) * burn_in).floor() as usize;
    let mean_series = ensemble_mean_series(record, run_id);
    let (var_series, _degenerate) = ensemble_variance_series(record, run_id);
    Ok(RunSummaries {
        mean_window: mean_series.window(from),
        var_window: var_series.window(from),
        stats: run_stats(record, run_id),
    })
}

/// Run the protocol while keeping only summaries in memory; full chain
/// records are dropped run by run.
pub fn run_protocol_summaries(
    target: &dyn TargetDensity,
    params: &StretchParams,
    n_walkers: usize,
    iterations: u64,
    inits: &[InitSpec],
    master_seed: u64,
    burn_in: f64,
) -> Result<Vec<RunSummaries>> {
    let mut summaries = Vec::with_capacity(inits.len());
    for (m, init) in inits.iter().enumerate() {
        let record = run_chain(
            target,
            params,
            *init,
            n_walkers,
            iterations,
            run_seed(master_seed, m),
        )?;
        summaries.push(summarize_record(&record, m, burn_in)?);
    }
    Ok(summaries)
}

/// Convergence diagnostics over per-run summaries: the multivariate scale
/// reduction factor for the mean and variance summary series, plus a
/// Heidelberger-Welch verdict on coordinate 1 of each series (run on the
/// post-burn-in window, reproducing the convention of testing chains whose
/// first half is already gone).
pub fn diagnose_summaries(
    summaries: &[RunSummaries],
    burn_in: f64,
    alpha_level: f64,
    eps: f64,
) -> Result<DiagnoseReport> {
    if summaries.len() < 2 {
        return Err(CliError::Config(format!(
            "diagnostics need at least 2 runs, got {}",
            summaries.len()
        )));
    }
    let t = summaries[0].mean_window.t_len;
    let n = summaries[0].mean_window.dim;
    if summaries
        .iter()
        .any(|s| s.mean_window.t_len != t || s.mean_window.dim != n)
    {
        return Err(CliError::Config(
            "summary series have mismatched shapes".into(),
        ));
    }

    let mean_refs: Vec<&SummarySeries> = summaries.iter().map(|s| &s.mean_window).collect();
    let var_refs: Vec<&SummarySeries> = summaries.iter().map(|s| &s.var_window).collect();
    let detail_mean = mpsrf(&mean_refs)?;
    let detail_var = mpsrf(&var_refs)?;

    let mut hw = Vec::new();
    for (m, summary) in summaries.iter().enumerate() {
        for (label, series) in [("mean", &summary.mean_window), ("var", &summary.var_window)] {
            let coord = series.coordinate(0);
            let entry = match heidelberger_welch(&coord, alpha_level, eps) {
                Ok(rep) => HwEntry {
                    series: format!("{label}_run{m}_x1"),
                    passed: rep.passed,
                    fraction_discarded: rep.fraction_discarded,
                    cvm: rep.cvm_statistic,
                    p: rep.p_value,
                    halfwidth_passed: rep.halfwidth_passed,
                },
                // degenerate series (zero variance, too short) are reported
                // as failed with null statistics rather than aborting the
                // whole report
                Err(_) => HwEntry {
                    series: format!("{label}_run{m}_x1"),
                    passed: false,
                    fraction_discarded: 0.5,
                    cvm: f64::NAN,
                    p: f64::NAN,
                    halfwidth_passed: None,
                },
            };
            hw.push(entry);
        }
    }

    Ok(DiagnoseReport {
        r_hat_mean: detail_mean.r_hat,
        r_hat_var: detail_var.r_hat,
        lambda_max: detail_mean.lambda_max,
        w_singular: detail_mean.w_singular || detail_var.w_singular,
        hw,
        m_runs: summaries.len(),
        t_used: t,
        burn_in_fraction: burn_in,
        runs: summaries.iter().map(|s| s.stats.clone()).collect(),
        detail_mean,
        detail_var,
    })
}

/// Convergence diagnostics over M compatible chain records.
pub fn diagnose_records(
    records: &[ChainRecord],
    burn_in: f64,
    alpha_level: f64,
    eps: f64,
) -> Result<DiagnoseReport> {
    if records.len() < 2 {
        return Err(CliError::Config(format!(
            "diagnostics need at least 2 runs, got {}",
            records.len()
        )));
    }
    let (l, n, t) = (records[0].n_walkers, records[0].dim, records[0].t_stored());
    if records
        .iter()
        .any(|r| r.n_walkers != l || r.dim != n || r.t_stored() != t)
    {
        return Err(CliError::Config(
            "chain records have mismatched shapes".into(),
        ));
    }
    let mut summaries = Vec::with_capacity(records.len());
    for (m, record) in records.iter().enumerate() {
        summaries.push(summarize_record(record, m, burn_in)?);
    }
    diagnose_summaries(&summaries, burn_in, alpha_level, eps)
}

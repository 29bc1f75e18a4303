//! Implementations of the CLI subcommands.

use std::collections::BTreeMap;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use aies_core::chain::run_chain;
use aies_core::ensemble::{InitSpec, StretchParams};
use aies_core::metropolis::{effective_sample_size, run_metropolis, MetropolisParams};
use aies_core::rng::{derive_seed, Stream};
use aies_core::targets::Ar1Gaussian;
use aies_core::theory::{
    always_accept_variance_check, prediction_experiment, z_profile_experiment,
};

use crate::chain_io::{export_csv, write_chain};
use crate::config::{ExperimentConfig, TargetSpec};
use crate::error::{CliError, Result};
use crate::protocol::{diagnose_records, diagnose_summaries, run_protocol_summaries, run_stats};
use crate::report::{
    write_json, BaselineReport, MeanFieldReport, PredictReport, TangentRow, ZProfileReport,
};

fn ensure_out_dir(cfg: &ExperimentConfig) -> Result<PathBuf> {
    std::fs::create_dir_all(&cfg.out)?;
    Ok(cfg.out.clone())
}

fn stretch_params(cfg: &ExperimentConfig) -> Result<StretchParams> {
    Ok(StretchParams::new(cfg.a, cfg.scheduler, cfg.thin)?)
}

fn chain_metadata(cfg: &ExperimentConfig, run: usize) -> BTreeMap<String, String> {
    let mut meta = BTreeMap::new();
    meta.insert("run".into(), run.to_string());
    meta.insert("scheduler".into(), cfg.scheduler.to_string());
    meta.insert("a".into(), format!("{:?}", cfg.a));
    meta.insert("scale".into(), format!("{:?}", cfg.scale));
    meta.insert(
        "effective_walkers".into(),
        cfg.effective_walkers().to_string(),
    );
    meta.insert(
        "effective_iterations".into(),
        cfg.effective_iterations().to_string(),
    );
    meta
}

/// Run one chain per configured initialization and persist the records.
pub fn cmd_sample(cfg: &ExperimentConfig) -> Result<()> {
    let out = ensure_out_dir(cfg)?;
    let target = cfg.target.build()?;
    let params = stretch_params(cfg)?;
    let l = cfg.effective_walkers();
    let iterations = cfg.effective_iterations();
    let csv = cfg
        .raw
        .get("csv")
        .map(|v| v == "true" || v == "1")
        .unwrap_or(false);

    println!(
        "sampling {} with L={l}, {iterations} iterations (scale {}), scheduler {}",
        target.id(),
        cfg.scale,
        cfg.scheduler
    );
    for (m, init) in cfg.inits.iter().enumerate() {
        let seed = derive_seed(cfg.seed, Stream::Aux, m as u64);
        let record = run_chain(&target, &params, *init, l, iterations, seed)?;
        let stats = run_stats(&record, m);
        let path = out.join(format!("run{m}.chain"));
        write_chain(&path, &record, &chain_metadata(cfg, m))?;
        if csv {
            export_csv(&out.join(format!("run{m}.csv")), &record, m)?;
        }
        println!(
            "run {m}: init N({},{}^2)  acceptance {:.4}  mu_hat {:.6}  sigma_hat {:.6}  -> {}",
            init.mean,
            init.sd,
            stats.acceptance_rate,
            stats.mu_hat,
            stats.sigma_hat,
            path.display()
        );
    }
    Ok(())
}

/// Read persisted chains and write the convergence report.
pub fn cmd_diagnose(cfg: &ExperimentConfig, chains: &[PathBuf]) -> Result<()> {
    if chains.len() < 2 {
        return Err(CliError::Config(
            "diagnose needs at least two chain files (M >= 2 independent runs)".into(),
        ));
    }
    let out = ensure_out_dir(cfg)?;
    let burn_in = cfg.raw.f64_or("burn_in", 0.5)?;
    let alpha_level = cfg.raw.f64_or("hw_alpha", 0.05)?;
    let eps = cfg.raw.f64_or("hw_eps", 0.1)?;

    let mut records = Vec::with_capacity(chains.len());
    for path in chains {
        let (record, _meta) = crate::chain_io::read_chain(path)?;
        records.push(record);
    }
    let report = diagnose_records(&records, burn_in, alpha_level, eps)?;
    let path = out.join("diagnostics.json");
    write_json(&path, &report)?;

    match (report.r_hat_mean, report.r_hat_var) {
        (Some(rm), Some(rv)) => {
            println!("R_hat(mean) = {rm:.4}   R_hat(variance) = {rv:.4}");
        }
        _ => println!("within-run covariance is singular; no scale reduction factor"),
    }
    for entry in &report.hw {
        println!(
            "H-W {}: {} (discarded {:.0}%, cvm {:.4}, p {:.4})",
            entry.series,
            if entry.passed { "PASSED" } else { "FAILED" },
            entry.fraction_discarded * 100.0,
            entry.cvm,
            entry.p
        );
    }
    println!("report -> {}", path.display());
    if report.w_singular {
        return Err(CliError::Numerical(
            "within-run covariance matrix W is singular; scale reduction factor unavailable".into(),
        ));
    }
    Ok(())
}

/// The four-initialization suite on the multidimensional Rosenbrock
/// density with the walker count scaled up tenfold.
pub fn cmd_rosenbrock(cfg: &ExperimentConfig) -> Result<()> {
    let out = ensure_out_dir(cfg)?;
    if !matches!(cfg.target, TargetSpec::Rosenbrock { .. }) {
        return Err(CliError::Config(
            "the rosenbrock command requires target = rosenbrock".into(),
        ));
    }
    let target = cfg.target.build()?;
    let params = stretch_params(cfg)?;
    let l = cfg.effective_walkers();
    let iterations = cfg.effective_iterations();
    println!(
        "rosenbrock suite: dim {}, L={l}, {iterations} iterations x {} runs",
        cfg.target.dim(),
        cfg.inits.len()
    );
    let burn_in = cfg.raw.f64_or("burn_in", 0.5)?;
    let summaries = run_protocol_summaries(
        &target, &params, l, iterations, &cfg.inits, cfg.seed, burn_in,
    )?;
    let report = diagnose_summaries(&summaries, burn_in, 0.05, 0.1)?;

    match (report.r_hat_mean, report.r_hat_var) {
        (Some(rm), Some(rv)) => {
            println!("R_hat(mean) = {rm:.4}   R_hat(variance) = {rv:.4}");
        }
        _ => println!("within-run covariance is singular; no scale reduction factor"),
    }
    for stats in &report.runs {
        println!(
            "run {}: acceptance {:.4}  mu_hat(x1) {:.6}  sigma_hat(x1) {:.6}",
            stats.run, stats.acceptance_rate, stats.mu_hat, stats.sigma_hat
        );
    }
    println!("true marginal mean and sd of x1 are approximately 1.0 and 0.7");
    let path = out.join("rosenbrock.json");
    write_json(
        &path,
        &crate::report::SuiteReport {
            dim: cfg.target.dim(),
            walkers: l,
            iterations,
            scale: cfg.scale,
            diagnostics: report,
        },
    )?;
    println!("report -> {}", path.display());
    Ok(())
}

/// One-iteration stretch-variable profiles from re-initialized ensembles.
pub fn cmd_ztrace(cfg: &ExperimentConfig) -> Result<()> {
    let out = ensure_out_dir(cfg)?;
    let sigma0 = cfg.raw.f64_or("sigma0", 1.0)?;
    let repetitions = cfg.raw.usize_or("repetitions", 1000)?;
    let dim = cfg.target.dim();
    let params = stretch_params(cfg)?;
    let l = cfg.effective_walkers();
    let profile = z_profile_experiment(dim, sigma0, repetitions, l, &params, cfg.seed)?;

    let csv_path = out.join("ztrace.csv");
    let file = std::fs::File::create(&csv_path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "z,accepted")?;
    for z in &profile.accepted_z {
        writeln!(w, "{z},1")?;
    }
    for z in &profile.rejected_z {
        writeln!(w, "{z},0")?;
    }
    w.flush()?;

    let summary = ZProfileReport {
        dim,
        sigma0,
        repetitions,
        accepted: profile.accepted_z.len(),
        rejected: profile.rejected_z.len(),
        acceptance_rate: profile.acceptance_rate(),
        accepted_fraction_above_one: profile.accepted_fraction_above_one(),
        accepted_sd: profile.accepted_sd(),
    };
    write_json(&out.join("ztrace.json"), &summary)?;
    println!(
        "ztrace: dim {dim}, sigma0 {sigma0}: acceptance {:.4}, accepted z > 1 fraction {:.4}, accepted z sd {:.4}",
        summary.acceptance_rate, summary.accepted_fraction_above_one, summary.accepted_sd
    );
    println!("samples -> {}", csv_path.display());
    Ok(())
}

/// First-coordinate variance trajectory with tangent-slope probes, plus the
/// whitened-coordinate equilibration trace.
pub fn cmd_predict(cfg: &ExperimentConfig) -> Result<()> {
    let out = ensure_out_dir(cfg)?;
    let TargetSpec::Ar1 { alpha, dim } = cfg.target else {
        return Err(CliError::Config(
            "the predict command requires target = ar1".into(),
        ));
    };
    let ar1 = Ar1Gaussian::new(alpha, dim)?;
    let params = stretch_params(cfg)?;
    let l = cfg.effective_walkers();
    let t_max = cfg.raw.usize_or("t_max", 60)?;
    let probes = cfg.raw.usize_list("probes", &[2, 8, 14, 30, 50])?;
    let aux_iters = cfg.raw.usize_or("aux_iters", 100)?;
    let init = InitSpec {
        mean: cfg.raw.f64_or("init_mean", 0.0)?,
        sd: cfg.raw.f64_or("init_sd", 2.0)?,
    };
    let run = prediction_experiment(&ar1, &params, l, init, cfg.seed, t_max, &probes, aux_iters)?;

    let csv_path = out.join("predict.csv");
    let file = std::fs::File::create(&csv_path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "t,var_x1,q_sd")?;
    for (t, (v, q)) in run.var_x1.iter().zip(&run.q_sd).enumerate() {
        writeln!(w, "{t},{v},{q}")?;
    }
    w.flush()?;

    let tangents_path = out.join("tangents.csv");
    let file = std::fs::File::create(&tangents_path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "t,r,ez2mz,var_x1,slope")?;
    for e in &run.tangents {
        writeln!(w, "{},{},{},{},{}", e.t, e.r, e.ez2mz, e.var_x1, e.slope)?;
    }
    w.flush()?;

    let report = PredictReport {
        alpha,
        dim,
        walkers: l,
        t_max,
        aux_iters,
        tangents: run
            .tangents
            .iter()
            .map(|e| TangentRow {
                t: e.t,
                r: e.r,
                ez2mz: e.ez2mz,
                var_x1: e.var_x1,
                slope: e.slope,
                no_accepted_moves: e.no_accepted_moves,
            })
            .collect(),
    };
    write_json(&out.join("predict.json"), &report)?;
    for row in &report.tangents {
        println!(
            "t = {:>4}: r {:.4}  E[z(z-1)|acc] {:+.5}  Var(x1) {:.5}  slope {:+.6}",
            row.t, row.r, row.ez2mz, row.var_x1, row.slope
        );
    }
    println!("trajectory -> {}", csv_path.display());
    Ok(())
}

/// Always-accept variance growth under the continuous-time scheduler.
pub fn cmd_meanfield(cfg: &ExperimentConfig) -> Result<()> {
    let out = ensure_out_dir(cfg)?;
    let walkers = cfg.raw.usize_or("walkers", 10_000)?;
    let duration = cfg.raw.f64_or("duration", 5.0)?;
    let snapshot_dt = cfg.raw.f64_or("snapshot_dt", 0.1)?;
    let init = InitSpec {
        mean: cfg.raw.f64_or("init_mean", 0.0)?,
        sd: cfg.raw.f64_or("init_sd", 1.0)?,
    };
    let check =
        always_accept_variance_check(walkers, duration, cfg.a, snapshot_dt, init, cfg.seed)?;

    let csv_path = out.join("meanfield.csv");
    let file = std::fs::File::create(&csv_path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "time,variance,mean")?;
    for ((t, v), m) in check.times.iter().zip(&check.variances).zip(&check.means) {
        writeln!(w, "{t},{v},{m}")?;
    }
    w.flush()?;

    let report = MeanFieldReport {
        walkers,
        duration,
        a: cfg.a,
        fitted_rate: check.fitted_rate,
        mean_drift: check.mean_drift,
        truncated: check.truncated,
    };
    write_json(&out.join("meanfield.json"), &report)?;
    println!(
        "meanfield: fitted log-variance rate {:.5} over duration {duration} (L = {walkers}), mean drift {:.2e}",
        check.fitted_rate, check.mean_drift
    );
    println!("trajectory -> {}", csv_path.display());
    Ok(())
}

/// Single-particle Metropolis baseline at a matched likelihood budget.
pub fn cmd_baseline(cfg: &ExperimentConfig) -> Result<()> {
    let out = ensure_out_dir(cfg)?;
    let target = cfg.target.build()?;
    let steps = cfg.raw.u64_or("steps", 1_000_000)?;
    let thin = cfg.raw.usize_or("baseline_thin", 1)?;
    let scales = cfg.raw.f64_list("mh_scales", &[0.01, 0.1, 1.0])?;
    let weights = cfg.raw.f64_list("mh_weights", &vec![1.0; scales.len()])?;
    let params = MetropolisParams::new(scales.clone(), weights)?;
    let x0 = cfg.raw.f64_list("x0", &vec![0.0; target.dim()])?;
    if x0.len() != target.dim() {
        return Err(CliError::Config(format!(
            "x0 has {} coordinates, target needs {}",
            x0.len(),
            target.dim()
        )));
    }

    let run = run_metropolis(&target, &x0, steps, thin, &params, cfg.seed)?;
    let series: Vec<f64> = run.coordinate(0).collect();
    let tail = &series[series.len() / 2..];
    let nf = tail.len() as f64;
    let mu = tail.iter().sum::<f64>() / nf;
    let sigma = (tail.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / nf).sqrt();
    let ess = effective_sample_size(tail).map_err(CliError::Core)?;

    let report = BaselineReport {
        target: target.id(),
        steps,
        density_evals: run.density_evals,
        acceptance_rate: run.acceptance_rate(),
        mu_hat_x1: mu,
        sigma_hat_x1: sigma,
        ess_x1: ess,
        scales,
    };
    write_json(&out.join("baseline.json"), &report)?;
    println!(
        "baseline {}: {} steps ({} density evaluations), acceptance {:.4}",
        report.target, steps, report.density_evals, report.acceptance_rate
    );
    println!(
        "x1 over last half: mu_hat {:.4}  sigma_hat {:.4}  ESS {:.0}",
        report.mu_hat_x1, report.sigma_hat_x1, report.ess_x1
    );
    Ok(())
}

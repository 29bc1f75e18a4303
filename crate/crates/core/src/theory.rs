//! Numerical verification of the sampler's high-dimensional behavior: the
//! acceptance asymptotics `f_sigma`, accepted-stretch-variable profiles, the
//! whitened-coordinate variance inflation at initialization, the
//! always-accept variance growth law, and the tangent-slope predictor for
//! the first-coordinate variance.

use crate::ensemble::{
    init_ensemble, run_continuous_time, step_serial_sweep, step_split_half, InitSpec, MoveOutcome,
    Scheduler, StretchParams, WalkerEnsemble,
};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, Stream};
use crate::targets::{Ar1Gaussian, StdGaussian, TargetDensity};

/// `f_sigma(z) = log z - sigma^2 * z * (z - 1)`, the large-dimension limit
/// of the per-coordinate acceptance exponent for a standard-Gaussian target
/// whose walker coordinates have common standard deviation `sigma`.
pub fn f_sigma(z: f64, sigma: f64) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::InvalidInput(format!("z must be positive, got {z}")));
    }
    if !(sigma >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "sigma must be nonnegative, got {sigma}"
        )));
    }
    // z is already positive here; the floor only guards against subnormal
    // underflow in the log
    let z_safe = z.max(1e-300);
    Ok(z_safe.ln() - sigma * sigma * z * (z - 1.0))
}

/// The acceptance exponent for the standard-Gaussian target:
/// `(n-1) log z - 0.5*sum((z*x_i + (1-z)*y_i)^2) + 0.5*sum(x_i^2)`.
/// `exp(min(0, h))` is exactly the stretch-move acceptance probability for
/// that target.
pub fn h_gaussian(x: &[f64], y: &[f64], z: f64) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::InvalidInput(format!("z must be positive, got {z}")));
    }
    if x.len() != y.len() {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len() as f64;
    let mut prop_sq = 0.0;
    let mut cur_sq = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        let p = z * xi + (1.0 - z) * yi;
        prop_sq += p * p;
        cur_sq += xi * xi;
    }
    Ok((n - 1.0) * z.ln() - 0.5 * prop_sq + 0.5 * cur_sq)
}

/// Limit verdict of the acceptance probability as the dimension grows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AsymptoticAccept {
    /// `f_sigma(z) > 0`: accepted with probability tending to 1.
    AcceptWp1,
    /// `f_sigma(z) < 0`: rejected with probability tending to 1.
    RejectWp1,
    /// `|f_sigma(z)|` within the dead band.
    Critical,
}

pub fn asymptotic_accept(z: f64, sigma: f64, tol: f64) -> Result<AsymptoticAccept> {
    let f = f_sigma(z, sigma)?;
    Ok(if f > tol {
        AsymptoticAccept::AcceptWp1
    } else if f < -tol {
        AsymptoticAccept::RejectWp1
    } else {
        AsymptoticAccept::Critical
    })
}

/// `E[Z(Z-1)]` under the stretch density in closed form:
/// `E[Z] = (a^{3/2} - a^{-3/2}) / (3 (sqrt a - 1/sqrt a))` and
/// `E[Z^2] = (a^{5/2} - a^{-5/2}) / (5 (sqrt a - 1/sqrt a))`.
pub fn expected_z_quadratic(a: f64) -> Result<f64> {
    if !(a > 1.0) {
        return Err(Error::InvalidParameter(format!("need a > 1, got {a}")));
    }
    let norm = a.sqrt() - 1.0 / a.sqrt();
    let ez = (a.powf(1.5) - a.powf(-1.5)) / (3.0 * norm);
    let ez2 = (a.powf(2.5) - a.powf(-2.5)) / (5.0 * norm);
    Ok(ez2 - ez)
}

/// Stretch variables drawn in one-iteration experiments, split by
/// acceptance.
#[derive(Debug, Clone)]
pub struct ZProfile {
    pub accepted_z: Vec<f64>,
    pub rejected_z: Vec<f64>,
    pub dim: usize,
    pub sigma0: f64,
    pub repetitions: usize,
}

impl ZProfile {
    pub fn acceptance_rate(&self) -> f64 {
        let total = self.accepted_z.len() + self.rejected_z.len();
        self.accepted_z.len() as f64 / total as f64
    }

    pub fn accepted_fraction_above_one(&self) -> f64 {
        let above = self.accepted_z.iter().filter(|z| **z > 1.0).count();
        above as f64 / self.accepted_z.len() as f64
    }

    pub fn accepted_sd(&self) -> f64 {
        let n = self.accepted_z.len() as f64;
        let mean = self.accepted_z.iter().sum::<f64>() / n;
        (self
            .accepted_z
            .iter()
            .map(|z| (z - mean) * (z - mean))
            .sum::<f64>()
            / n)
            .sqrt()
    }
}

/// Repeatedly (re-)initialize all walkers i.i.d. N(0, sigma0^2), run one
/// full iteration on the standard-Gaussian target, and pool the drawn
/// stretch variables split by acceptance.
pub fn z_profile_experiment(
    dim: usize,
    sigma0: f64,
    repetitions: usize,
    n_walkers: usize,
    params: &StretchParams,
    seed: u64,
) -> Result<ZProfile> {
    if repetitions == 0 {
        return Err(Error::InvalidParameter(
            "need at least one repetition".into(),
        ));
    }
    let target = StdGaussian::new(dim)?;
    let mut profile = ZProfile {
        accepted_z: Vec::new(),
        rejected_z: Vec::new(),
        dim,
        sigma0,
        repetitions,
    };
    for rep in 0..repetitions {
        let rep_seed = derive_seed(seed, Stream::Aux, rep as u64);
        let mut state = init_ensemble(
            n_walkers,
            dim,
            InitSpec {
                mean: 0.0,
                sd: sigma0,
            },
            rep_seed,
        )?;
        let outcomes = step_iteration(&mut state, &target, params)?;
        for o in outcomes {
            if o.accepted {
                profile.accepted_z.push(o.z);
            } else {
                profile.rejected_z.push(o.z);
            }
        }
    }
    Ok(profile)
}

/// One full iteration under whichever scheduler `params` selects (the
/// continuous-time scheduler runs for one unit of clock time).
pub fn step_iteration(
    state: &mut WalkerEnsemble,
    target: &dyn TargetDensity,
    params: &StretchParams,
) -> Result<Vec<MoveOutcome>> {
    match params.scheduler {
        Scheduler::SerialSweep => step_serial_sweep(state, target, params),
        Scheduler::SplitHalf => step_split_half(state, target, params),
        Scheduler::ContinuousTime => {
            let (_snaps, events) = run_continuous_time(state, target, params, 1.0, 1.0)?;
            Ok(events.into_iter().map(|e| e.outcome).collect())
        }
    }
}

/// `(1 + alpha^2) / (1 - alpha^2)`: the factor by which the variance of the
/// whitened coordinates `q_i`, `i >= 2`, exceeds the x-coordinate variance
/// when walkers are initialized i.i.d. in x-space.
pub fn initial_q_variance_factor(alpha: f64) -> Result<f64> {
    if !(alpha.abs() < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "need |alpha| < 1, got {alpha}"
        )));
    }
    Ok((1.0 + alpha * alpha) / (1.0 - alpha * alpha))
}

/// Trajectory of the ensemble variance under forced acceptance, with the
/// exponential growth rate fitted on the log scale.
#[derive(Debug, Clone)]
pub struct MeanFieldCheck {
    pub times: Vec<f64>,
    pub variances: Vec<f64>,
    pub means: Vec<f64>,
    /// Least-squares slope of log-variance against time.
    pub fitted_rate: f64,
    /// Absolute drift of the ensemble mean over the run.
    pub mean_drift: f64,
    /// True when the trajectory was cut short by numerical overflow.
    pub truncated: bool,
}

/// Run the continuous-time scheduler on a one-dimensional standard Gaussian
/// with the acceptance probability replaced by 1, record the ensemble
/// variance on a time grid, and fit its exponential rate. The ensemble mean
/// is a martingale under these dynamics, so its drift is reported for the
/// conservation check.
pub fn always_accept_variance_check(
    n_walkers: usize,
    duration: f64,
    a: f64,
    snapshot_dt: f64,
    init: InitSpec,
    seed: u64,
) -> Result<MeanFieldCheck> {
    let target = StdGaussian::new(1)?;
    let params = StretchParams::new(a, Scheduler::ContinuousTime, 1)?.force_accept(true);
    let mut state = init_ensemble(n_walkers, 1, init, seed)?;
    let (snapshots, _events) =
        run_continuous_time(&mut state, &target, &params, duration, snapshot_dt)?;

    let mut times = Vec::with_capacity(snapshots.len());
    let mut variances = Vec::with_capacity(snapshots.len());
    let mut means = Vec::with_capacity(snapshots.len());
    let mut truncated = false;
    let lf = n_walkers as f64;
    for snap in &snapshots {
        let mean = snap.positions.iter().sum::<f64>() / lf;
        let var = snap
            .positions
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            / lf;
        if !var.is_finite() || var > 1e250 {
            truncated = true;
            break;
        }
        times.push(snap.time);
        variances.push(var);
        means.push(mean);
    }
    if times.len() < 2 {
        return Err(Error::Numerical(
            "variance overflowed before two snapshots".into(),
        ));
    }
    let log_var: Vec<f64> = variances
        .iter()
        .map(|v| v.max(f64::MIN_POSITIVE).ln())
        .collect();
    let fitted_rate = least_squares_slope(&times, &log_var);
    let mean_drift = (means[means.len() - 1] - means[0]).abs();
    Ok(MeanFieldCheck {
        times,
        variances,
        means,
        fitted_rate,
        mean_drift,
        truncated,
    })
}

fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        num += (xi - mx) * (yi - my);
        den += (xi - mx) * (xi - mx);
    }
    num / den
}

/// Predicted instantaneous rate of change of the first-coordinate ensemble
/// variance: `slope = 2 * r * E[Z~(Z~-1)] * Var_t(X_1)` where `r` is the
/// acceptance frequency and `Z~` the accepted stretch variable, both
/// estimated from auxiliary iterations started at the current state.
///
/// The factor 2 is the exact per-move variance effect: an accepted move
/// `x <- zx + (1-z)y` against an independent walker changes the second
/// moment by `(E[z^2]-1)v` from the stretching plus `E[(1-z)^2]v` from the
/// injected noise, which sum to `2 E[z(z-1)] v`. Measured slopes match the
/// doubled rate within 20% at n=100; the single-factor rate sits at half
/// the observed values.
#[derive(Debug, Clone, Copy)]
pub struct TangentEstimate {
    pub t: f64,
    /// Acceptance frequency over the auxiliary moves.
    pub r: f64,
    /// Mean of z(z-1) over accepted auxiliary moves.
    pub ez2mz: f64,
    /// First-coordinate ensemble variance of the probed state.
    pub var_x1: f64,
    pub slope: f64,
    /// Set when no auxiliary move was accepted; the slope is then reported
    /// as zero.
    pub no_accepted_moves: bool,
}

/// Estimate the tangent slope at the current state from `aux_iters`
/// throwaway one-iteration probes, each started from a reseeded clone of
/// the probed positions so every probed move is conditioned on the actual
/// time-t ensemble; the original state is left untouched. Move statistics
/// are pooled across all walkers and probes.
pub fn tangent_slope_estimate(
    state: &WalkerEnsemble,
    target: &dyn TargetDensity,
    aux_iters: usize,
    params: &StretchParams,
) -> Result<TangentEstimate> {
    let var_x1 = state.coordinate_variance(0);
    let aux_base = derive_seed(state.master_seed(), Stream::Aux, state.time().to_bits());
    let mut accepted = 0u64;
    let mut proposed = 0u64;
    let mut z_sum = 0.0;
    for probe in 0..aux_iters {
        let mut clone = state.reseeded(derive_seed(aux_base, Stream::Aux, probe as u64));
        for o in step_iteration(&mut clone, target, params)? {
            proposed += 1;
            if o.accepted {
                accepted += 1;
                z_sum += o.z * (o.z - 1.0);
            }
        }
    }
    let r = accepted as f64 / proposed as f64;
    if accepted == 0 {
        return Ok(TangentEstimate {
            t: state.time(),
            r,
            ez2mz: 0.0,
            var_x1,
            slope: 0.0,
            no_accepted_moves: true,
        });
    }
    let ez2mz = z_sum / accepted as f64;
    Ok(TangentEstimate {
        t: state.time(),
        r,
        ez2mz,
        var_x1,
        slope: 2.0 * r * ez2mz * var_x1,
        no_accepted_moves: false,
    })
}

/// Mean over coordinates of the per-coordinate standard deviation over
/// walkers, in the whitened coordinate system of `ar1`.
pub fn mean_whitened_sd(state: &WalkerEnsemble, ar1: &Ar1Gaussian) -> f64 {
    let l = state.n_walkers();
    let n = state.dim();
    let mut sums = vec![0.0; n];
    let mut sq = vec![0.0; n];
    for j in 0..l {
        let q = ar1.whiten(state.walker(j));
        for i in 0..n {
            sums[i] += q[i];
            sq[i] += q[i] * q[i];
        }
    }
    let lf = l as f64;
    let mut acc = 0.0;
    for i in 0..n {
        let mean = sums[i] / lf;
        acc += (sq[i] / lf - mean * mean).max(0.0).sqrt();
    }
    acc / n as f64
}

/// Per-iteration record of the variance-dynamics experiment.
#[derive(Debug, Clone)]
pub struct PredictionRun {
    /// First-coordinate ensemble variance at iterations 0..=t_max.
    pub var_x1: Vec<f64>,
    /// Mean whitened-coordinate sd at iterations 0..=t_max.
    pub q_sd: Vec<f64>,
    pub tangents: Vec<TangentEstimate>,
}

/// Run the sampler on an AR(1) target for `t_max` iterations, recording the
/// first-coordinate ensemble variance and the mean whitened-coordinate sd
/// every iteration, with tangent-slope probes at the requested times.
#[allow(clippy::too_many_arguments)]
pub fn prediction_experiment(
    ar1: &Ar1Gaussian,
    params: &StretchParams,
    n_walkers: usize,
    init: InitSpec,
    seed: u64,
    t_max: usize,
    probe_times: &[usize],
    aux_iters: usize,
) -> Result<PredictionRun> {
    let mut state = init_ensemble(n_walkers, ar1.dim(), init, seed)?;
    let mut run = PredictionRun {
        var_x1: Vec::with_capacity(t_max + 1),
        q_sd: Vec::with_capacity(t_max + 1),
        tangents: Vec::new(),
    };
    for it in 0..=t_max {
        run.var_x1.push(state.coordinate_variance(0));
        run.q_sd.push(mean_whitened_sd(&state, ar1));
        if probe_times.contains(&it) {
            run.tangents
                .push(tangent_slope_estimate(&state, ar1, aux_iters, params)?);
        }
        if it < t_max {
            step_iteration(&mut state, ar1, params)?;
        }
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::sample_stretch_z;
    use crate::rng::substream;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn f_sigma_vanishes_at_unit_z() {
        for sigma in [0.0, 0.1, 1.0, 2.0, 10.0] {
            assert_eq!(f_sigma(1.0, sigma).unwrap(), 0.0);
        }
    }

    #[test]
    fn f_sigma_spot_values() {
        assert_relative_eq!(
            f_sigma(0.9, 2.0).unwrap(),
            0.9f64.ln() + 0.36,
            epsilon = 1e-15
        );
        assert!((f_sigma(0.9, 2.0).unwrap() - 0.25464).abs() < 1e-5);
        assert!(f_sigma(0.9, 2.0).unwrap() > 0.0);
    }

    #[test]
    fn f_sigma_taylor_at_critical_sigma() {
        // f_1(z) ~ -(3/2)(z-1)^2 near z=1
        let z = 1.01;
        let diff = f_sigma(z, 1.0).unwrap() + 1.5 * (z - 1.0) * (z - 1.0);
        assert!(diff.abs() < 1e-5, "cubic remainder {diff}");
    }

    #[test]
    fn f_sigma_rejects_bad_inputs() {
        assert!(f_sigma(0.0, 1.0).is_err());
        assert!(f_sigma(-1.0, 1.0).is_err());
    }

    #[test]
    fn f_sigma_concave_with_sign_change_roots() {
        // concavity on a grid, and the nonunit root z* satisfies
        // |f(z*)| < 1e-9 with the correct positivity interval
        for &sigma in &[0.5f64, 2.0] {
            let f = |z: f64| f_sigma(z, sigma).unwrap();
            let mut z = 0.05;
            while z < 6.0 {
                let h = 1e-4;
                let second = (f(z + h) - 2.0 * f(z) + f(z - h)) / (h * h);
                assert!(
                    second < 1e-3,
                    "second difference {second} at z={z}, sigma={sigma}"
                );
                z += 0.1;
            }
            // for sigma > 1 the positive interval is (z*, 1); for sigma < 1
            // it is (1, z*); bracket the nonunit crossing and bisect
            let (mut neg, mut pos) = if sigma > 1.0 {
                (1e-6, 0.99)
            } else {
                (50.0, 1.01)
            };
            assert!(f(neg) < 0.0, "f({neg}) = {}", f(neg));
            assert!(f(pos) > 0.0, "f({pos}) = {}", f(pos));
            for _ in 0..200 {
                let mid = 0.5 * (neg + pos);
                if f(mid) < 0.0 {
                    neg = mid;
                } else {
                    pos = mid;
                }
            }
            let z_star = 0.5 * (neg + pos);
            assert!(f(z_star).abs() < 1e-9, "f({z_star}) = {}", f(z_star));
            assert!((z_star - 1.0).abs() > 1e-3, "found the trivial root");
        }
    }

    #[test]
    fn h_gaussian_trivial_cases() {
        let x = [0.3, -0.7, 1.1];
        let y = [2.0, 0.0, -1.0];
        assert_eq!(h_gaussian(&x, &y, 1.0).unwrap(), 0.0);
        // x == y collapses to the (n-1) log z factor
        let h = h_gaussian(&x, &x, 0.5).unwrap();
        assert_relative_eq!(h, 2.0 * 0.5f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn h_gaussian_matches_acceptance_for_gaussian_target() {
        use crate::ensemble::{log_accept_prob, stretch_propose};
        use crate::targets::StdGaussian;
        let target = StdGaussian::new(3).unwrap();
        let mut rng = substream(77, Stream::Aux, 0, 0);
        for _ in 0..200 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let y: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let z: f64 = rng.random_range(0.5..2.0);
            let h = h_gaussian(&x, &y, z).unwrap();
            let prop = stretch_propose(&x, &y, z).unwrap();
            let lap = log_accept_prob(&target, &x, &prop, z).unwrap();
            assert_relative_eq!(lap, h.min(0.0), epsilon = 1e-10);
        }
    }

    #[test]
    fn h_gaussian_law_of_large_numbers() {
        // with i.i.d. N(0, 2^2) coordinates, h/n approaches f_2(z)
        let n = 10_000;
        let mut rng = substream(78, Stream::Aux, 0, 0);
        for &z in &[0.7, 1.3] {
            let x: Vec<f64> = (0..n)
                .map(|_| {
                    let eps: f64 = StandardNormal.sample(&mut rng);
                    2.0 * eps
                })
                .collect();
            let y: Vec<f64> = (0..n)
                .map(|_| {
                    let eps: f64 = StandardNormal.sample(&mut rng);
                    2.0 * eps
                })
                .collect();
            let h = h_gaussian(&x, &y, z).unwrap() / n as f64;
            let f = f_sigma(z, 2.0).unwrap();
            assert!((h - f).abs() < 0.05, "h/n = {h}, f_2({z}) = {f}");
        }
    }

    #[test]
    fn asymptotic_verdicts() {
        assert_eq!(
            asymptotic_accept(1.1, 0.1, 1e-9).unwrap(),
            AsymptoticAccept::AcceptWp1
        );
        assert_eq!(
            asymptotic_accept(1.1, 2.0, 1e-9).unwrap(),
            AsymptoticAccept::RejectWp1
        );
        assert_eq!(
            asymptotic_accept(1.0, 3.0, 1e-9).unwrap(),
            AsymptoticAccept::Critical
        );
    }

    #[test]
    fn expected_z_quadratic_closed_form() {
        // a = 2: E[Z] = 7/6, E[Z^2] = 31/20, E[Z(Z-1)] = 23/60
        let e = expected_z_quadratic(2.0).unwrap();
        assert_relative_eq!(e, 23.0 / 60.0, epsilon = 1e-14);
        // a -> 1+ collapses the distribution onto z = 1
        assert!(expected_z_quadratic(1.0 + 1e-9).unwrap().abs() < 1e-8);
        assert!(expected_z_quadratic(1.0).is_err());
    }

    #[test]
    fn expected_z_quadratic_against_quadrature_and_monte_carlo() {
        // quadrature oracle: Simpson on z*g and z^2*g over [1/a, a]
        let a = 2.0f64;
        let simpson = |f: &dyn Fn(f64) -> f64| {
            let (lo, hi) = (1.0 / a, a);
            let m = 20_000;
            let h = (hi - lo) / m as f64;
            let mut s = f(lo) + f(hi);
            for i in 1..m {
                s += f(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            s * h / 3.0
        };
        let norm = simpson(&|z: f64| z.powf(-0.5));
        let ez = simpson(&|z: f64| z * z.powf(-0.5)) / norm;
        let ez2 = simpson(&|z: f64| z * z * z.powf(-0.5)) / norm;
        assert_relative_eq!(ez2 - ez, expected_z_quadratic(a).unwrap(), epsilon = 1e-10);

        // Monte Carlo with the module's own sampler, 3-sigma band
        let mut rng = substream(101, Stream::Aux, 0, 0);
        let n = 1_000_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let z = sample_stretch_z(&mut rng, a).unwrap();
            let v = z * (z - 1.0);
            sum += v;
            sum_sq += v * v;
        }
        let mc = sum / n as f64;
        let se = ((sum_sq / n as f64 - mc * mc) / n as f64).sqrt();
        let expect = 23.0 / 60.0;
        assert!(
            (mc - expect).abs() < 3.0 * se,
            "MC {mc} vs {expect} (se {se})"
        );
        assert!((mc - expect).abs() < 1e-3);
    }

    #[test]
    fn expected_z_quadratic_increases_and_stays_positive() {
        let mut prev = 0.0;
        let mut a = 1.01;
        while a <= 10.0 {
            let e = expected_z_quadratic(a).unwrap();
            assert!(e > 0.0, "E[Z(Z-1)] = {e} at a = {a}");
            assert!(e > prev, "not increasing at a = {a}");
            prev = e;
            a += 0.05;
        }
    }

    #[test]
    fn q_variance_factor_values() {
        assert_eq!(initial_q_variance_factor(0.0).unwrap(), 1.0);
        assert_relative_eq!(
            initial_q_variance_factor(0.9).unwrap(),
            1.81 / 0.19,
            epsilon = 1e-12
        );
        assert!(initial_q_variance_factor(1.0).is_err());
    }

    #[test]
    fn q_variance_factor_monte_carlo() {
        // whiten i.i.d. N(0,1) x-vectors: Var(q_i) for i >= 2 carries the
        // factor (1 + alpha^2) / (1 - alpha^2)
        let alpha = 0.9;
        let ar1 = Ar1Gaussian::new(alpha, 10).unwrap();
        let mut rng = substream(55, Stream::Aux, 0, 0);
        let mut sq = [0.0f64; 10];
        let reps = 100_000;
        for _ in 0..reps {
            let x: Vec<f64> = (0..10).map(|_| StandardNormal.sample(&mut rng)).collect();
            let q = ar1.whiten(&x);
            for (acc, qi) in sq.iter_mut().zip(&q) {
                *acc += qi * qi;
            }
        }
        let factor = initial_q_variance_factor(alpha).unwrap();
        for (i, total) in sq.iter().enumerate().skip(1) {
            let var = total / reps as f64;
            assert!(
                (var - factor).abs() < 0.03 * factor,
                "coordinate {i} variance {var} vs {factor}"
            );
        }
        let var0 = sq[0] / reps as f64;
        assert!((var0 - 1.0).abs() < 0.03);
    }

    #[test]
    fn z_profile_cutoffs_small_scale() {
        let params = StretchParams::default();
        let low = z_profile_experiment(100, 0.1, 50, 200, &params, 7).unwrap();
        assert!(
            low.accepted_fraction_above_one() > 0.95,
            "sigma0 = 0.1: fraction above 1 = {}",
            low.accepted_fraction_above_one()
        );
        let high = z_profile_experiment(100, 2.0, 50, 200, &params, 8).unwrap();
        assert!(
            1.0 - high.accepted_fraction_above_one() > 0.95,
            "sigma0 = 2: fraction below 1 = {}",
            1.0 - high.accepted_fraction_above_one()
        );
    }

    #[test]
    fn z_profile_spread_shrinks_with_dimension() {
        let params = StretchParams::default();
        let small = z_profile_experiment(10, 1.0, 100, 20, &params, 9).unwrap();
        let large = z_profile_experiment(100, 1.0, 100, 200, &params, 9).unwrap();
        assert!(
            large.accepted_sd() < small.accepted_sd(),
            "sd at n=100 ({}) should be below sd at n=10 ({})",
            large.accepted_sd(),
            small.accepted_sd()
        );
    }

    #[test]
    fn always_accept_rate_is_twice_the_z_moment() {
        // Exact one-event identity for independent x, y with variance v:
        // E[(Zx + (1-Z)y)^2 - x^2] = (E[Z^2] - 1)v + E[(1-Z)^2]v
        //                          = 2 E[Z(Z-1)] v,
        // so at total event rate L the ensemble variance grows like
        // exp(2 E[Z(Z-1)] t). The fitted log-variance slope must match
        // that, not E[Z(Z-1)] itself (the sd, not the variance, grows at
        // the single factor).
        let expect = 2.0 * expected_z_quadratic(2.0).unwrap();
        let mut mean_rate = 0.0;
        let seeds = [15u64, 16, 17];
        for &seed in &seeds {
            let check = always_accept_variance_check(
                5_000,
                4.0,
                2.0,
                0.1,
                InitSpec { mean: 0.0, sd: 1.0 },
                seed,
            )
            .unwrap();
            assert!(!check.truncated);
            mean_rate += check.fitted_rate;
        }
        mean_rate /= seeds.len() as f64;
        assert!(
            (mean_rate - expect).abs() < 0.1 * expect,
            "fitted rate {mean_rate} vs 2 E[Z(Z-1)] = {expect}"
        );
    }

    #[test]
    fn always_accept_near_unit_scale_freezes_variance() {
        let check = always_accept_variance_check(
            2_000,
            5.0,
            1.001,
            0.25,
            InitSpec { mean: 0.0, sd: 1.0 },
            16,
        )
        .unwrap();
        assert!(check.fitted_rate.abs() < 0.01, "rate {}", check.fitted_rate);
    }

    #[test]
    fn tangent_slope_near_zero_at_equilibrium() {
        // exact standard-normal starts: no drift expected. The estimator
        // carries a finite-dimension bias (the probed walker's own density
        // contribution to acceptance is not negligible at small n) of about
        // +0.11*Var at n=10, measured over 3e5 equilibrium moves, falling
        // off roughly like 1/n; the tight bound is asserted at n=40.
        let mut rng = substream(66, Stream::Aux, 0, 0);
        let params = StretchParams::default();
        for (n, bound) in [(10usize, 0.16), (40, 0.05)] {
            let l = 4 * n;
            let mut positions = Vec::new();
            for _ in 0..l * n {
                positions.push(StandardNormal.sample(&mut rng));
            }
            let state = WalkerEnsemble::from_positions(positions, l, n, 123).unwrap();
            let target = StdGaussian::new(n).unwrap();
            let est = tangent_slope_estimate(&state, &target, 400, &params).unwrap();
            assert!(!est.no_accepted_moves);
            assert!(
                est.slope.abs() < bound * est.var_x1,
                "equilibrium slope {} vs variance {} at n={n}",
                est.slope,
                est.var_x1
            );
        }
    }

    #[test]
    fn tangent_slope_vanishes_under_forced_unit_stretch() {
        // with acceptance forced and the stretch support collapsed onto
        // z = 1, every accepted z(z-1) vanishes and so does the slope
        let mut rng = substream(67, Stream::Aux, 0, 0);
        let (l, n) = (12, 2);
        let mut positions = Vec::new();
        for _ in 0..l * n {
            positions.push(StandardNormal.sample(&mut rng));
        }
        let state = WalkerEnsemble::from_positions(positions, l, n, 5).unwrap();
        let target = StdGaussian::new(n).unwrap();
        let params = StretchParams::new(1.0 + 1e-9, Scheduler::SplitHalf, 1)
            .unwrap()
            .force_accept(true);
        let est = tangent_slope_estimate(&state, &target, 50, &params).unwrap();
        assert_eq!(est.r, 1.0);
        assert!(
            est.slope.abs() < 1e-8 * est.var_x1.max(1.0),
            "slope {} under unit stretch",
            est.slope
        );
    }

    #[test]
    fn tangent_slope_negative_for_overdispersed_start() {
        let ar1 = Ar1Gaussian::new(0.9, 100).unwrap();
        let params = StretchParams::default();
        let run = prediction_experiment(
            &ar1,
            &params,
            200,
            InitSpec { mean: 0.0, sd: 2.0 },
            77,
            3,
            &[2],
            50,
        )
        .unwrap();
        assert_eq!(run.tangents.len(), 1);
        let est = run.tangents[0];
        assert!(est.slope < 0.0, "slope {} should be negative", est.slope);
        // the variance itself must be dropping
        assert!(run.var_x1[3] < run.var_x1[0]);
    }

    #[test]
    fn q_sd_equilibrates_near_one() {
        let ar1 = Ar1Gaussian::new(0.9, 50).unwrap();
        let params = StretchParams::default();
        let run = prediction_experiment(
            &ar1,
            &params,
            100,
            InitSpec { mean: 0.0, sd: 1.0 },
            88,
            30,
            &[],
            0,
        )
        .unwrap();
        let start = run.q_sd[0];
        let factor = initial_q_variance_factor(0.9).unwrap();
        // start reflects the inflated whitened variance
        assert!(start > 2.0, "initial mean whitened sd {start}");
        assert!(start * start < factor * 1.3);
        let reached = run.q_sd.iter().any(|s| (0.9..=1.1).contains(s));
        assert!(
            reached,
            "whitened sd never entered [0.9, 1.1]: {:?}",
            run.q_sd
        );
    }
}

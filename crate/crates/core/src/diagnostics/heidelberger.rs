//! Stationarity test in the Heidelberger-Welch style.
//!
//! The null hypothesis of stationarity is tested with the Cramér-von Mises
//! functional of the standardized cumulative-sum bridge,
//! `I = (1/N) sum_k B(k)^2` with `B(k) = (C_k - k*mean) / sqrt(N * S0)`,
//! where S0 estimates the spectral density of the series at frequency zero.
//! On failure an extra 10% is discarded from the front and the test is
//! repeated, up to half the series. A half-width check then compares half
//! the 95% confidence interval of the mean against the mean itself.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct HwReport {
    /// Whether the stationarity test passed at some discard stage.
    pub passed: bool,
    /// Fraction of the series discarded from the front before the passing
    /// stage (0.5 when the test never passed).
    pub fraction_discarded: f64,
    /// Cramér-von Mises statistic at the final stage tested.
    pub cvm_statistic: f64,
    /// Asymptotic p-value of that statistic.
    pub p_value: f64,
    /// Half-width verdict on the passed portion; None when stationarity
    /// failed outright.
    pub halfwidth_passed: Option<bool>,
    /// Half of the 95% CI width over the passed portion divided by |mean|.
    pub halfwidth_ratio: Option<f64>,
    pub eps: f64,
    pub mean: f64,
}

/// Asymptotic CDF of the Cramér-von Mises limit distribution (the integral
/// of a squared Brownian bridge), tabulated to 10 digits; probabilities
/// between knots are linearly interpolated.
const CVM_CDF_TABLE: [(f64, f64); 34] = [
    (0.018, 0.001501903369),
    (0.022, 0.005284010997),
    (0.026, 0.01260781416),
    (0.030, 0.02383154944),
    (0.035, 0.04299311224),
    (0.040, 0.06685110081),
    (0.046, 0.09991523563),
    (0.052, 0.1359592588),
    (0.060, 0.1860201194),
    (0.070, 0.2484356236),
    (0.080, 0.3081449915),
    (0.090, 0.3638562501),
    (0.100, 0.4151265616),
    (0.115, 0.483775093),
    (0.130, 0.5432927579),
    (0.150, 0.610424344),
    (0.170, 0.6660047182),
    (0.190, 0.7122905152),
    (0.215, 0.7597967964),
    (0.240, 0.7982895311),
    (0.270, 0.8353637948),
    (0.300, 0.8648287312),
    (0.347, 0.8998087513),
    (0.400, 0.9277526775),
    (0.461, 0.9498928728),
    (0.550, 0.9701974705),
    (0.650, 0.9831375443),
    (0.743, 0.989974476),
    (0.850, 0.9944407522),
    (1.000, 0.9975395478),
    (1.168, 0.9990007555),
    (1.400, 0.9997078001),
    (1.700, 0.9999393262),
    (2.100, 0.9999923767),
];

/// P(W <= x) for the asymptotic Cramér-von Mises distribution.
pub fn cvm_cdf(x: f64) -> f64 {
    let table = &CVM_CDF_TABLE;
    if x <= table[0].0 {
        return table[0].1 * (x / table[0].0).max(0.0);
    }
    if x >= table[table.len() - 1].0 {
        return 1.0;
    }
    let hi = table.partition_point(|(q, _)| *q < x);
    let (x0, p0) = table[hi - 1];
    let (x1, p1) = table[hi];
    p0 + (p1 - p0) * (x - x0) / (x1 - x0)
}

/// Spectral density of the series at frequency zero, estimated as the mean
/// periodogram value over the lowest `ceil(sqrt(N))` nonzero frequencies.
pub fn spectral_density_at_zero(series: &[f64]) -> Result<f64> {
    let n = series.len();
    if n < 8 {
        return Err(Error::InvalidInput(format!(
            "series too short for spectral estimate: {n}"
        )));
    }
    let n_freq = ((n as f64).sqrt().ceil() as usize).min(n / 2 - 1).max(1);
    let nf = n as f64;
    let mut total = 0.0;
    for j in 1..=n_freq {
        let omega = 2.0 * std::f64::consts::PI * j as f64 / nf;
        // accumulate the DFT term with a complex rotation instead of
        // per-sample trig calls
        let (rot_c, rot_s) = (omega.cos(), omega.sin());
        let (mut c, mut s) = (1.0f64, 0.0f64);
        let (mut re, mut im) = (0.0f64, 0.0f64);
        for v in series {
            re += v * c;
            im -= v * s;
            let c_next = c * rot_c - s * rot_s;
            s = c * rot_s + s * rot_c;
            c = c_next;
        }
        total += (re * re + im * im) / nf;
    }
    let s0 = total / n_freq as f64;
    if !(s0 > 0.0) || !s0.is_finite() {
        return Err(Error::Numerical(
            "zero or invalid spectral density estimate".into(),
        ));
    }
    Ok(s0)
}

/// Cramér-von Mises statistic of the cumulative-sum bridge of `series`,
/// standardized by the spectral density estimate `s0`.
fn cvm_statistic(series: &[f64], s0: f64) -> f64 {
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let mut cum = 0.0;
    let mut stat = 0.0;
    for (k, v) in series.iter().enumerate() {
        cum += v;
        let bridge = cum - (k + 1) as f64 * mean;
        stat += bridge * bridge;
    }
    stat / (n * n * s0)
}

/// Run the staged stationarity test plus the half-width check.
///
/// `alpha_level` is the test size (default 0.05 in callers); `eps` is the
/// half-width threshold. The spectral density used to standardize the
/// bridge is estimated once from the last half of the input, as in the CODA
/// implementation this test follows.
pub fn heidelberger_welch(series: &[f64], alpha_level: f64, eps: f64) -> Result<HwReport> {
    let n = series.len();
    if n < 50 {
        return Err(Error::InvalidInput(format!(
            "need at least 50 points, got {n}"
        )));
    }
    if !(0.0 < alpha_level && alpha_level < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must be in (0,1), got {alpha_level}"
        )));
    }
    let grand_mean = series.iter().sum::<f64>() / n as f64;
    let variance = series
        .iter()
        .map(|v| (v - grand_mean) * (v - grand_mean))
        .sum::<f64>()
        / n as f64;
    if variance <= 0.0 {
        return Err(Error::Numerical("series has zero variance".into()));
    }
    let s0 = spectral_density_at_zero(&series[n / 2..])?;

    let mut passed = false;
    let mut fraction = 0.0;
    let mut stat = f64::NAN;
    let mut p_value = f64::NAN;
    let mut kept: &[f64] = series;
    for stage in 0..=5 {
        fraction = 0.1 * stage as f64;
        let start = ((n as f64) * fraction).round() as usize;
        kept = &series[start..];
        stat = cvm_statistic(kept, s0);
        p_value = 1.0 - cvm_cdf(stat);
        if p_value > alpha_level {
            passed = true;
            break;
        }
    }

    let (halfwidth_passed, halfwidth_ratio, mean) = if passed {
        let mean = kept.iter().sum::<f64>() / kept.len() as f64;
        let s0_kept = spectral_density_at_zero(kept)?;
        let halfwidth = 1.96 * (s0_kept / kept.len() as f64).sqrt();
        let ratio = (halfwidth / mean).abs();
        (Some(ratio < eps), Some(ratio), mean)
    } else {
        let mean = series.iter().sum::<f64>() / n as f64;
        (None, None, mean)
    };

    Ok(HwReport {
        passed,
        fraction_discarded: if passed { fraction } else { 0.5 },
        cvm_statistic: stat,
        p_value,
        halfwidth_passed,
        halfwidth_ratio,
        eps,
        mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Stream};
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn cdf_interpolation_hits_tabulated_quantiles() {
        assert!((cvm_cdf(0.461) - 0.95).abs() < 1e-3);
        assert!((cvm_cdf(0.347) - 0.90).abs() < 1e-3);
        assert!((cvm_cdf(0.743) - 0.99).abs() < 1e-3);
        assert!(cvm_cdf(0.0) == 0.0);
        assert!(cvm_cdf(5.0) == 1.0);
    }

    #[test]
    fn iid_series_mostly_pass_without_discarding() {
        let mut passes = 0;
        let reps = 100;
        for seed in 0..reps {
            let mut rng = substream(seed, Stream::Aux, 50, 0);
            let series: Vec<f64> = (0..10_000)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            let rep = heidelberger_welch(&series, 0.05, 0.1).unwrap();
            if rep.passed && rep.fraction_discarded == 0.0 {
                passes += 1;
            }
        }
        assert!(passes >= 90, "only {passes}/{reps} clean passes");
    }

    #[test]
    fn linear_trend_is_caught() {
        let mut caught = 0;
        let reps = 50;
        for seed in 0..reps {
            let mut rng = substream(seed, Stream::Aux, 51, 0);
            let t_len = 10_000;
            let series: Vec<f64> = (0..t_len)
                .map(|t| {
                    let noise: f64 = StandardNormal.sample(&mut rng);
                    5.0 * t as f64 / t_len as f64 + noise
                })
                .collect();
            let rep = heidelberger_welch(&series, 0.05, 0.1).unwrap();
            if !rep.passed || rep.fraction_discarded > 0.0 {
                caught += 1;
            }
        }
        assert!(
            caught >= 48,
            "trend caught in only {caught}/{reps} replicates"
        );
    }

    #[test]
    fn large_mean_passes_halfwidth() {
        let mut rng = substream(4, Stream::Aux, 52, 0);
        let series: Vec<f64> = (0..5_000)
            .map(|_| {
                let eps: f64 = StandardNormal.sample(&mut rng);
                100.0 + 1e-3 * eps
            })
            .collect();
        let rep = heidelberger_welch(&series, 0.05, 0.1).unwrap();
        assert!(rep.passed);
        assert_eq!(rep.halfwidth_passed, Some(true));
        assert!(rep.halfwidth_ratio.unwrap() < 1e-4);
    }

    #[test]
    fn zero_variance_series_errors() {
        let series = vec![1.0; 1000];
        assert!(heidelberger_welch(&series, 0.05, 0.1).is_err());
    }

    #[test]
    fn short_series_errors() {
        assert!(heidelberger_welch(&[1.0; 10], 0.05, 0.1).is_err());
    }

    #[test]
    fn spectral_estimate_near_unit_for_white_noise() {
        let mut rng = substream(8, Stream::Aux, 53, 0);
        let series: Vec<f64> = (0..20_000)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let s0 = spectral_density_at_zero(&series).unwrap();
        assert!((s0 - 1.0).abs() < 0.35, "white-noise S0 {s0}");
    }

    #[test]
    fn spectral_estimate_scales_with_long_run_variance() {
        // AR(1) with rho = 0.5 has long-run variance (1+rho)/(1-rho) = 3
        let rho = 0.5f64;
        let mut rng = substream(9, Stream::Aux, 54, 0);
        let mut x = 0.0;
        let series: Vec<f64> = (0..50_000)
            .map(|_| {
                let eps: f64 = StandardNormal.sample(&mut rng);
                x = rho * x + (1.0 - rho * rho).sqrt() * eps;
                x
            })
            .collect();
        let s0 = spectral_density_at_zero(&series).unwrap();
        assert!((s0 - 3.0).abs() < 0.8, "AR(1) S0 {s0}, expected about 3");
    }
}

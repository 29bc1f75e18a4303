//! Single-particle Metropolis baseline with a scale mixture of Gaussian
//! proposals, plus an effective-sample-size estimator for comparing
//! samplers at equal likelihood budget.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::{substream, Stream};
use crate::targets::TargetDensity;

/// Proposal spec: a mixture of isotropic Gaussian steps.
#[derive(Debug, Clone)]
pub struct MetropolisParams {
    scales: Vec<f64>,
    cumulative: Vec<f64>,
}

impl MetropolisParams {
    pub fn new(scales: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if scales.is_empty() || scales.len() != weights.len() {
            return Err(Error::InvalidParameter(
                "need at least one proposal scale, with one weight per scale".into(),
            ));
        }
        if scales.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::InvalidParameter(
                "proposal scales must be positive".into(),
            ));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) || weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::InvalidParameter(
                "weights must be nonnegative and not all zero".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        let mut cumulative = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for w in &weights {
            acc += w / total;
            cumulative.push(acc);
        }
        *cumulative.last_mut().unwrap() = 1.0;
        Ok(Self { scales, cumulative })
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    fn draw_scale<R: Rng>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let idx = self
            .cumulative
            .iter()
            .position(|c| u < *c)
            .unwrap_or(self.scales.len() - 1);
        self.scales[idx]
    }
}

impl Default for MetropolisParams {
    /// Equal-weight mixture of fine, medium and unit steps.
    fn default() -> Self {
        Self::new(vec![0.01, 0.1, 1.0], vec![1.0, 1.0, 1.0]).unwrap()
    }
}

/// One Metropolis step: draw a scale from the mixture, propose
/// `x + s * eps` with standard-normal `eps`, accept with probability
/// min(1, pi(x') / pi(x)) computed in log space. Returns the new position
/// and whether the proposal was accepted.
pub fn mh_step<R: Rng>(
    x: &[f64],
    target: &dyn TargetDensity,
    params: &MetropolisParams,
    rng: &mut R,
) -> Result<(Vec<f64>, bool)> {
    let log_current = target.log_density(x);
    if log_current == f64::NEG_INFINITY {
        return Err(Error::InvalidState(
            "current point has zero target density".into(),
        ));
    }
    let s = params.draw_scale(rng);
    let proposal: Vec<f64> = x
        .iter()
        .map(|xi| {
            let eps: f64 = StandardNormal.sample(rng);
            xi + s * eps
        })
        .collect();
    let log_ratio = target.log_density(&proposal) - log_current;
    let u: f64 = rng.random();
    if u.ln() < log_ratio {
        Ok((proposal, true))
    } else {
        Ok((x.to_vec(), false))
    }
}

/// Result of a baseline run.
#[derive(Debug, Clone)]
pub struct MetropolisRun {
    /// Thinned positions, step-major.
    pub samples: Vec<f64>,
    pub dim: usize,
    pub thin: usize,
    pub accepted: u64,
    pub steps: u64,
    /// Likelihood evaluations spent, for budget matching against ensemble
    /// runs.
    pub density_evals: u64,
}

impl MetropolisRun {
    pub fn n_samples(&self) -> usize {
        self.samples.len() / self.dim
    }

    pub fn coordinate(&self, i: usize) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().skip(i).step_by(self.dim).copied()
    }

    pub fn acceptance_rate(&self) -> f64 {
        self.accepted as f64 / self.steps as f64
    }
}

/// Run a single Metropolis chain from `x0` for `steps` steps, keeping every
/// `thin`-th position (the starting point included).
pub fn run_metropolis(
    target: &dyn TargetDensity,
    x0: &[f64],
    steps: u64,
    thin: usize,
    params: &MetropolisParams,
    seed: u64,
) -> Result<MetropolisRun> {
    if thin == 0 {
        return Err(Error::InvalidParameter(
            "thin must be a positive integer".into(),
        ));
    }
    if x0.len() != target.dim() {
        return Err(Error::InvalidInput(format!(
            "start point has dimension {}, target needs {}",
            x0.len(),
            target.dim()
        )));
    }
    let mut rng = substream(seed, Stream::Metropolis, 0, 0);
    let mut x = x0.to_vec();
    let mut run = MetropolisRun {
        samples: Vec::with_capacity(((steps / thin as u64 + 1) as usize) * x0.len()),
        dim: x0.len(),
        thin,
        accepted: 0,
        steps,
        density_evals: 0,
    };
    run.samples.extend_from_slice(&x);
    // mh_step evaluates both the current and the proposal point
    for step in 1..=steps {
        let (next, accepted) = mh_step(&x, target, params, &mut rng)?;
        run.density_evals += 2;
        x = next;
        if accepted {
            run.accepted += 1;
        }
        if step.is_multiple_of(thin as u64) {
            run.samples.extend_from_slice(&x);
        }
    }
    Ok(run)
}

/// Effective sample size `T / (1 + 2 sum of rho(k))` with the sum truncated
/// by the initial-positive-sequence rule: autocorrelations are consumed in
/// consecutive lag pairs `rho(2m) + rho(2m+1)` and accumulation stops at the
/// first nonpositive pair, which keeps the implied autocorrelation time
/// positive even for negatively correlated (e.g. alternating) series.
pub fn effective_sample_size(series: &[f64]) -> Result<f64> {
    let t = series.len();
    if t < 10 {
        return Err(Error::InvalidInput(format!(
            "need at least 10 points for ESS, got {t}"
        )));
    }
    let tf = t as f64;
    let mean = series.iter().sum::<f64>() / tf;
    let rho = |lag: usize| -> f64 {
        let mut s = 0.0;
        for i in 0..t - lag {
            s += (series[i] - mean) * (series[i + lag] - mean);
        }
        s / tf
    };
    let gamma0 = rho(0);
    if gamma0 <= 0.0 {
        return Err(Error::Numerical(
            "constant series has no effective sample size".into(),
        ));
    }

    let mut tau = -1.0;
    let mut m = 0usize;
    while 2 * m + 1 < t {
        let pair = (rho(2 * m) + rho(2 * m + 1)) / gamma0;
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        m += 1;
    }
    let tau = tau.max(f64::MIN_POSITIVE);
    Ok(tf / tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::{Rosenbrock, StdGaussian};

    #[test]
    fn zero_displacement_is_accepted() {
        // a degenerate scale makes the proposal numerically equal to the
        // current point: the ratio is 1 and the move accepted
        let params = MetropolisParams::new(vec![1e-300], vec![1.0]).unwrap();
        let target = StdGaussian::new(2).unwrap();
        let mut rng = substream(0, Stream::Aux, 0, 0);
        let (_x, accepted) = mh_step(&[0.1, -0.4], &target, &params, &mut rng).unwrap();
        assert!(accepted);
    }

    #[test]
    fn log_ratio_for_two_unit_displacement() {
        // from x=0 a proposal at x'=2 wins with probability exp(-2)
        let target = StdGaussian::new(1).unwrap();
        let lr = target.log_density(&[2.0]) - target.log_density(&[0.0]);
        assert!((lr - (-2.0)).abs() < 1e-15);
    }

    #[test]
    fn gaussian_chain_reaches_correct_moments() {
        let target = StdGaussian::new(1).unwrap();
        let params = MetropolisParams::default();
        let run = run_metropolis(&target, &[0.0], 200_000, 1, &params, 6).unwrap();
        let skip = run.n_samples() / 2;
        let tail: Vec<f64> = run.coordinate(0).skip(skip).collect();
        let n = tail.len() as f64;
        let mean = tail.iter().sum::<f64>() / n;
        let var = tail.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        assert!(mean.abs() < 0.05, "mean {mean}");
        assert!((var - 1.0).abs() < 0.1, "variance {var}");
    }

    #[test]
    fn run_counts_evaluations_and_reproduces() {
        let target = StdGaussian::new(1).unwrap();
        let params = MetropolisParams::default();
        let a = run_metropolis(&target, &[0.0], 1000, 10, &params, 3).unwrap();
        let b = run_metropolis(&target, &[0.0], 1000, 10, &params, 3).unwrap();
        assert_eq!(a.samples, b.samples);
        assert_eq!(a.n_samples(), 101);
        assert_eq!(a.density_evals, 2000);
    }

    #[test]
    fn detailed_balance_on_discretized_gaussian() {
        // discretize the 1-D standard Gaussian into 5 states by rounding and
        // check pi(s) k(s->s') == pi(s') k(s'->s) within 3 standard errors
        let target = StdGaussian::new(1).unwrap();
        let params = MetropolisParams::default();
        let mut rng = substream(9, Stream::Metropolis, 1, 0);
        let steps = 1_000_000usize;
        let state_of = |x: f64| -> usize { (x.round().clamp(-2.0, 2.0) + 2.0) as usize };
        let mut counts = [[0u64; 5]; 5];
        let mut visits = [0u64; 5];
        let mut x = vec![0.0];
        for _ in 0..steps {
            let s_prev = state_of(x[0]);
            let (next, _) = mh_step(&x, &target, &params, &mut rng).unwrap();
            x = next;
            counts[s_prev][state_of(x[0])] += 1;
            visits[s_prev] += 1;
        }
        // bin probabilities of the rounding discretization, by quadrature
        let simpson = |a: f64, b: f64| {
            let m = 2000;
            let h = (b - a) / m as f64;
            let f = |x: f64| (-0.5 * x * x).exp();
            let mut s = f(a) + f(b);
            for i in 1..m {
                s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            s * h / 3.0
        };
        let edges = [-10.0, -1.5, -0.5, 0.5, 1.5, 10.0];
        let total = simpson(-10.0, 10.0);
        let mut pi = [0.0f64; 5];
        for s in 0..5 {
            pi[s] = simpson(edges[s], edges[s + 1]) / total;
        }
        for s in 0..5 {
            for sp in (s + 1)..5 {
                if visits[s] == 0 || visits[sp] == 0 {
                    continue;
                }
                let k_fwd = counts[s][sp] as f64 / visits[s] as f64;
                let k_bwd = counts[sp][s] as f64 / visits[sp] as f64;
                let flow_fwd = pi[s] * k_fwd;
                let flow_bwd = pi[sp] * k_bwd;
                let se = (pi[s] * pi[s] * k_fwd * (1.0 - k_fwd) / visits[s] as f64
                    + pi[sp] * pi[sp] * k_bwd * (1.0 - k_bwd) / visits[sp] as f64)
                    .sqrt();
                assert!(
                    (flow_fwd - flow_bwd).abs() <= 3.0 * se + 1e-9,
                    "flow {s}->{sp}: {flow_fwd} vs {flow_bwd} (se {se})"
                );
            }
        }
    }

    #[test]
    fn acceptance_rate_sane_on_high_dim_rosenbrock() {
        let target = Rosenbrock::new(100).unwrap();
        let params = MetropolisParams::default();
        let x0 = vec![0.5; 100];
        let run = run_metropolis(&target, &x0, 20_000, 10, &params, 21).unwrap();
        let rate = run.acceptance_rate();
        assert!(
            rate > 0.05 && rate < 0.7,
            "acceptance rate {rate} outside sanity band"
        );
    }

    #[test]
    fn ess_white_noise() {
        let mut rng = substream(33, Stream::Aux, 0, 0);
        let series: Vec<f64> = (0..10_000)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let ess = effective_sample_size(&series).unwrap();
        assert!((8_000.0..=12_000.0).contains(&ess), "white-noise ESS {ess}");
    }

    #[test]
    fn ess_ar1_series() {
        let rho = 0.9f64;
        let mut rng = substream(34, Stream::Aux, 0, 0);
        let mut x = 0.0;
        let mut series = Vec::with_capacity(10_000);
        for _ in 0..10_000 {
            let eps: f64 = StandardNormal.sample(&mut rng);
            x = rho * x + (1.0 - rho * rho).sqrt() * eps;
            series.push(x);
        }
        let ess = effective_sample_size(&series).unwrap();
        let expect = 10_000.0 * (1.0 - rho) / (1.0 + rho);
        assert!(
            ess > expect / 1.5 && ess < expect * 1.5,
            "AR(1) ESS {ess}, expected about {expect}"
        );
    }

    #[test]
    fn ess_alternating_series_exceeds_length() {
        let series: Vec<f64> = (0..1000)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let ess = effective_sample_size(&series).unwrap();
        assert!(ess > 1000.0, "alternating ESS {ess}");
    }

    #[test]
    fn ess_rejects_constant_series() {
        let series = vec![2.5; 100];
        assert!(effective_sample_size(&series).is_err());
    }

    #[test]
    fn ess_rejects_short_series() {
        assert!(effective_sample_size(&[1.0, 2.0]).is_err());
    }
}

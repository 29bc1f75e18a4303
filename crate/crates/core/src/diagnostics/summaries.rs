//! Ensemble summary series and the flattened-trace running statistics.
//!
//! Single-particle convergence diagnostics are applied to ensemble runs by
//! first collapsing all walkers into a per-iteration summary function: the
//! mean or the variance of each coordinate taken over walkers.

use serde::Serialize;

use crate::chain::ChainRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SummaryKind {
    EnsembleMean,
    EnsembleVariance,
}

/// A `T x n` series of one ensemble summary for one run.
#[derive(Debug, Clone)]
pub struct SummarySeries {
    /// Iteration-major `t_len * dim` values.
    pub values: Vec<f64>,
    pub t_len: usize,
    pub dim: usize,
    pub kind: SummaryKind,
    pub run_id: usize,
}

impl SummarySeries {
    pub fn at(&self, t: usize) -> &[f64] {
        &self.values[t * self.dim..(t + 1) * self.dim]
    }

    pub fn coordinate(&self, i: usize) -> Vec<f64> {
        (0..self.t_len)
            .map(|t| self.values[t * self.dim + i])
            .collect()
    }

    /// Restrict to stored iterations `[from, t_len)`.
    pub fn window(&self, from: usize) -> SummarySeries {
        SummarySeries {
            values: self.values[from * self.dim..].to_vec(),
            t_len: self.t_len - from,
            dim: self.dim,
            kind: self.kind,
            run_id: self.run_id,
        }
    }
}

/// Per-iteration mean over walkers of each coordinate.
pub fn ensemble_mean_series(chain: &ChainRecord, run_id: usize) -> SummarySeries {
    let (l, n, t_len) = (chain.n_walkers, chain.dim, chain.t_stored());
    let mut values = vec![0.0; t_len * n];
    for t in 0..t_len {
        let state = chain.state_at(t);
        let out = &mut values[t * n..(t + 1) * n];
        for j in 0..l {
            for i in 0..n {
                out[i] += state[j * n + i];
            }
        }
        for v in out.iter_mut() {
            *v /= l as f64;
        }
    }
    SummarySeries {
        values,
        t_len,
        dim: n,
        kind: SummaryKind::EnsembleMean,
        run_id,
    }
}

/// Per-iteration population variance (divisor L) over walkers of each
/// coordinate. For a single walker the series is identically zero and the
/// degenerate flag is set.
pub fn ensemble_variance_series(chain: &ChainRecord, run_id: usize) -> (SummarySeries, bool) {
    let (l, n, t_len) = (chain.n_walkers, chain.dim, chain.t_stored());
    let degenerate = l < 2;
    let mut values = vec![0.0; t_len * n];
    if !degenerate {
        let means = ensemble_mean_series(chain, run_id);
        for t in 0..t_len {
            let state = chain.state_at(t);
            let mu = means.at(t);
            let out = &mut values[t * n..(t + 1) * n];
            for j in 0..l {
                for i in 0..n {
                    let d = state[j * n + i] - mu[i];
                    out[i] += d * d;
                }
            }
            for v in out.iter_mut() {
                *v /= l as f64;
            }
        }
    }
    (
        SummarySeries {
            values,
            t_len,
            dim: n,
            kind: SummaryKind::EnsembleVariance,
            run_id,
        },
        degenerate,
    )
}

/// Concatenate one coordinate of all walkers in walker-major order within
/// each stored iteration: `X_i^(1..L)(t=0), X_i^(1..L)(t=1), ...`.
pub fn flatten_series(chain: &ChainRecord, coord: usize) -> Vec<f64> {
    let (l, n, t_len) = (chain.n_walkers, chain.dim, chain.t_stored());
    let mut flat = Vec::with_capacity(t_len * l);
    for t in 0..t_len {
        let state = chain.state_at(t);
        for j in 0..l {
            flat.push(state[j * n + coord]);
        }
    }
    flat
}

/// Running mean and standard deviation over the trailing half of the
/// elapsed series: at 1-based position p the window is the last
/// `ceil(p/2)` positions, `floor(p/2)+1 ..= p`. Computed with prefix sums;
/// the variance subtraction is clamped at zero against cancellation.
pub fn running_stats(flat: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = flat.len();
    let mut prefix = Vec::with_capacity(n + 1);
    let mut prefix_sq = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    prefix_sq.push(0.0);
    for v in flat {
        prefix.push(prefix.last().unwrap() + v);
        prefix_sq.push(prefix_sq.last().unwrap() + v * v);
    }
    let mut means = Vec::with_capacity(n);
    let mut sds = Vec::with_capacity(n);
    for p in 1..=n {
        let start = p / 2 + 1; // 1-based window start
        let count = (p - start + 1) as f64;
        let sum = prefix[p] - prefix[start - 1];
        let sum_sq = prefix_sq[p] - prefix_sq[start - 1];
        let mean = sum / count;
        let var = (sum_sq / count - mean * mean).max(0.0);
        means.push(mean);
        sds.push(var.sqrt());
    }
    (means, sds)
}

//! Walker-ensemble state and the stretch-move kernel.
//!
//! Three schedulers are provided: a serial sweep that updates walkers in
//! sequence against current positions, a split-half scheme that updates each
//! half of the ensemble against a frozen snapshot of the other half (and may
//! do so in parallel), and a continuous-time variant driven by an
//! exponential clock with total event rate equal to the number of walkers.
//!
//! Determinism contract: every draw comes from a substream keyed by
//! `(master_seed, iteration, walker)`, so trajectories are bit-identical for
//! any degree of parallelism.

use rand::Rng;
use rand_distr::Distribution;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{substream, Stream};
use crate::targets::TargetDensity;

/// Minimum number of walkers in a half before a half-iteration is farmed
/// out to the rayon pool.
const PARALLEL_THRESHOLD: usize = 64;

/// How walker updates are scheduled within one logical time unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheduler {
    /// Update walkers 0..L in order, complementary walker drawn from the
    /// current positions of all others.
    SerialSweep,
    /// Two half-iterations against frozen opposite-half snapshots.
    SplitHalf,
    /// Exponential event clock with total rate L.
    ContinuousTime,
}

impl std::fmt::Display for Scheduler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scheduler::SerialSweep => write!(f, "serial"),
            Scheduler::SplitHalf => write!(f, "split"),
            Scheduler::ContinuousTime => write!(f, "continuous"),
        }
    }
}

/// Stretch-move parameters.
#[derive(Debug, Clone)]
pub struct StretchParams {
    /// Stretch scale; the support of the stretching variable is [1/a, a].
    pub a: f64,
    pub scheduler: Scheduler,
    /// Persist every `thin`-th full iteration.
    pub thin: usize,
    /// Replace the acceptance probability by the constant 1. Used by the
    /// mean-field variance analysis, not for actual sampling.
    pub force_accept: bool,
}

impl StretchParams {
    pub fn new(a: f64, scheduler: Scheduler, thin: usize) -> Result<Self> {
        if !(a > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "stretch scale must satisfy a > 1, got {a}"
            )));
        }
        if thin == 0 {
            return Err(Error::InvalidParameter(
                "thin must be a positive integer".into(),
            ));
        }
        Ok(Self {
            a,
            scheduler,
            thin,
            force_accept: false,
        })
    }

    pub fn force_accept(mut self, on: bool) -> Self {
        self.force_accept = on;
        self
    }
}

impl Default for StretchParams {
    fn default() -> Self {
        Self {
            a: 2.0,
            scheduler: Scheduler::SplitHalf,
            thin: 1,
            force_accept: false,
        }
    }
}

/// Record of a single attempted stretch move.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoveOutcome {
    pub accepted: bool,
    pub z: f64,
    pub walker_index: usize,
    /// min(0, (n-1) log z + log pi(proposal) - log pi(current)).
    pub log_accept_prob: f64,
}

/// The set of walkers a complementary partner may be drawn from.
#[derive(Debug, Clone)]
pub enum Pool {
    /// Every walker except the given index.
    AllExcept(usize),
    /// A contiguous index range (used by the split-half scheme).
    Range(std::ops::Range<usize>),
}

impl Pool {
    fn len(&self, n_walkers: usize) -> usize {
        match self {
            Pool::AllExcept(_) => n_walkers.saturating_sub(1),
            Pool::Range(r) => r.len(),
        }
    }

    fn contains(&self, k: usize) -> bool {
        match self {
            Pool::AllExcept(skip) => k != *skip,
            Pool::Range(r) => r.contains(&k),
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R, n_walkers: usize) -> usize {
        match self {
            Pool::AllExcept(skip) => {
                let j = rng.random_range(0..n_walkers - 1);
                if j >= *skip {
                    j + 1
                } else {
                    j
                }
            }
            Pool::Range(r) => r.start + rng.random_range(0..r.len()),
        }
    }
}

/// The full sampler state: L walkers of n coordinates plus logical time.
///
/// `time` counts iterations under the discrete schedulers and clock time
/// under the continuous one; `iteration` is the substream epoch.
#[derive(Debug, Clone)]
pub struct WalkerEnsemble {
    positions: Vec<f64>, // L x n, walker-major
    n_walkers: usize,
    dim: usize,
    time: f64,
    iteration: u64,
    master_seed: u64,
}

/// Per-coordinate normal initialization: every coordinate of every walker
/// drawn i.i.d. from N(mean, sd^2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitSpec {
    pub mean: f64,
    pub sd: f64,
}

impl WalkerEnsemble {
    /// Build an ensemble from explicit positions (walker-major `L*n` slice).
    pub fn from_positions(
        positions: Vec<f64>,
        n_walkers: usize,
        dim: usize,
        seed: u64,
    ) -> Result<Self> {
        if n_walkers == 0 || dim == 0 {
            return Err(Error::InvalidParameter(
                "need at least one walker and one dimension".into(),
            ));
        }
        if positions.len() != n_walkers * dim {
            return Err(Error::InvalidInput(format!(
                "expected {} coordinates, got {}",
                n_walkers * dim,
                positions.len()
            )));
        }
        if positions.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "all walker coordinates must be finite".into(),
            ));
        }
        Ok(Self {
            positions,
            n_walkers,
            dim,
            time: 0.0,
            iteration: 0,
            master_seed: seed,
        })
    }

    pub fn n_walkers(&self) -> usize {
        self.n_walkers
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn walker(&self, j: usize) -> &[f64] {
        &self.positions[j * self.dim..(j + 1) * self.dim]
    }

    pub fn set_walker(&mut self, j: usize, values: &[f64]) {
        self.positions[j * self.dim..(j + 1) * self.dim].copy_from_slice(values);
    }

    /// Mean over walkers of coordinate `i`.
    pub fn coordinate_mean(&self, i: usize) -> f64 {
        let mut s = 0.0;
        for j in 0..self.n_walkers {
            s += self.positions[j * self.dim + i];
        }
        s / self.n_walkers as f64
    }

    /// Population variance (divisor L) over walkers of coordinate `i`.
    pub fn coordinate_variance(&self, i: usize) -> f64 {
        let mean = self.coordinate_mean(i);
        let mut s = 0.0;
        for j in 0..self.n_walkers {
            let d = self.positions[j * self.dim + i] - mean;
            s += d * d;
        }
        s / self.n_walkers as f64
    }

    /// A copy of this state wired to a different master seed (substreams of
    /// the copy are disjoint from the original's).
    pub fn reseeded(&self, seed: u64) -> Self {
        let mut out = self.clone();
        out.master_seed = seed;
        out
    }

    fn move_stream(&self, walker: usize) -> rand_chacha::ChaCha8Rng {
        substream(
            self.master_seed,
            Stream::Move,
            self.iteration,
            walker as u64,
        )
    }

    fn advance_iteration(&mut self) {
        self.time += 1.0;
        self.iteration += 1;
    }

    fn require_full_rank_capacity(&self) -> Result<()> {
        if self.n_walkers < self.dim + 1 {
            return Err(Error::InvalidParameter(format!(
                "ergodicity requires L >= n+1 walkers; got L={} for n={}",
                self.n_walkers, self.dim
            )));
        }
        Ok(())
    }
}

/// Initialize L walkers of n coordinates, each coordinate i.i.d.
/// N(init.mean, init.sd^2). The master seed deterministically derives one
/// substream per walker.
pub fn init_ensemble(
    n_walkers: usize,
    dim: usize,
    init: InitSpec,
    seed: u64,
) -> Result<WalkerEnsemble> {
    if n_walkers == 0 || dim == 0 {
        return Err(Error::InvalidParameter(
            "need at least one walker and one dimension".into(),
        ));
    }
    if !(init.sd > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "initial standard deviation must be positive, got {}",
            init.sd
        )));
    }
    let mut positions = Vec::with_capacity(n_walkers * dim);
    for j in 0..n_walkers {
        let mut rng = substream(seed, Stream::Init, j as u64, 0);
        for _ in 0..dim {
            let eps: f64 = rand_distr::StandardNormal.sample(&mut rng);
            positions.push(init.mean + init.sd * eps);
        }
    }
    WalkerEnsemble::from_positions(positions, n_walkers, dim, seed)
}

/// Draw the stretching variable with density proportional to 1/sqrt(z) on
/// [1/a, a], by inverse CDF: `Z = ((sqrt(a) - 1/sqrt(a)) U + 1/sqrt(a))^2`.
pub fn sample_stretch_z<R: Rng>(rng: &mut R, a: f64) -> Result<f64> {
    if !(a > 1.0) {
        return Err(Error::InvalidParameter(format!(
            "stretch scale must satisfy a > 1, got {a}"
        )));
    }
    let u: f64 = rng.random();
    let sqrt_a = a.sqrt();
    let s = (sqrt_a - 1.0 / sqrt_a) * u + 1.0 / sqrt_a;
    Ok(s * s)
}

/// The proposal point `z*x + (1-z)*y`, exactly componentwise.
pub fn stretch_propose(x: &[f64], y: &[f64], z: f64) -> Result<Vec<f64>> {
    if x.len() != y.len() {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    Ok(x.iter()
        .zip(y)
        .map(|(xi, yi)| z * xi + (1.0 - z) * yi)
        .collect())
}

/// `min(0, (n-1) log z + log pi(x_tilde) - log pi(x))`, entirely in log
/// space.
pub fn log_accept_prob(
    target: &dyn TargetDensity,
    x: &[f64],
    x_tilde: &[f64],
    z: f64,
) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::InvalidInput(format!(
            "stretch factor must be positive, got {z}"
        )));
    }
    let n = target.dim();
    if x.len() != n || x_tilde.len() != n {
        return Err(Error::InvalidInput(format!(
            "target dimension {n} does not match inputs of length {} and {}",
            x.len(),
            x_tilde.len()
        )));
    }
    let log_current = target.log_density(x);
    if log_current == f64::NEG_INFINITY {
        return Err(Error::InvalidState(
            "current walker has zero target density".into(),
        ));
    }
    let h = (n as f64 - 1.0) * z.ln() + target.log_density(x_tilde) - log_current;
    if h.is_nan() {
        return Err(Error::Numerical("acceptance log-probability is NaN".into()));
    }
    Ok(h.min(0.0))
}

/// (accepted, z, log acceptance probability, new position when accepted).
type Attempt = (bool, f64, f64, Option<Vec<f64>>);

/// Draw z and the acceptance uniform from `rng`, evaluate the move of the
/// walker at `x` against complementary position `y`, and return the outcome
/// plus the new position when accepted. The acceptance uniform is consumed
/// even in forced-accept mode so both modes use identical stream layouts.
fn stretch_attempt<R: Rng>(
    x: &[f64],
    y: &[f64],
    target: &dyn TargetDensity,
    params: &StretchParams,
    rng: &mut R,
) -> Result<Attempt> {
    let z = sample_stretch_z(rng, params.a)?;
    let proposal = stretch_propose(x, y, z)?;
    let lap = log_accept_prob(target, x, &proposal, z)?;
    let u: f64 = rng.random();
    let accepted = params.force_accept || u.ln() < lap;
    if accepted {
        Ok((true, z, lap, Some(proposal)))
    } else {
        Ok((false, z, lap, None))
    }
}

/// One stretch move of walker `k` against a complementary walker drawn
/// uniformly from `pool`, reading and writing current positions. Draw order
/// from `rng`: complementary index, stretching variable, acceptance uniform.
pub fn update_one_walker<R: Rng>(
    state: &mut WalkerEnsemble,
    k: usize,
    pool: &Pool,
    target: &dyn TargetDensity,
    params: &StretchParams,
    rng: &mut R,
) -> Result<MoveOutcome> {
    if pool.contains(k) {
        return Err(Error::InvalidInput(format!(
            "walker {k} may not appear in its own complementary pool"
        )));
    }
    if pool.len(state.n_walkers) == 0 {
        return Err(Error::InvalidInput("complementary pool is empty".into()));
    }
    let j = pool.draw(rng, state.n_walkers);
    let (accepted, z, lap, proposal) = {
        let x = state.walker(k);
        let y = state.walker(j);
        stretch_attempt(x, y, target, params, rng)?
    };
    if let Some(p) = proposal {
        state.set_walker(k, &p);
    }
    Ok(MoveOutcome {
        accepted,
        z,
        walker_index: k,
        log_accept_prob: lap,
    })
}

/// One full serial-sweep iteration: walkers are updated in index order, each
/// against the current positions of all others (including walkers already
/// moved this sweep). Advances time by 1.
pub fn step_serial_sweep(
    state: &mut WalkerEnsemble,
    target: &dyn TargetDensity,
    params: &StretchParams,
) -> Result<Vec<MoveOutcome>> {
    state.require_full_rank_capacity()?;
    check_dims(state, target)?;
    let l = state.n_walkers;
    let mut outcomes = Vec::with_capacity(l);
    for k in 0..l {
        let mut rng = state.move_stream(k);
        outcomes.push(update_one_walker(
            state,
            k,
            &Pool::AllExcept(k),
            target,
            params,
            &mut rng,
        )?);
    }
    state.advance_iteration();
    Ok(outcomes)
}

/// One full split-half iteration: walkers 0..L/2 are updated against a
/// frozen snapshot of walkers L/2..L, then the roles switch. Within a
/// half-iteration each update reads only the snapshot, so the updates are
/// order-independent and run on the rayon pool when the half is large.
/// Advances time by 1 per pair of half-iterations.
pub fn step_split_half(
    state: &mut WalkerEnsemble,
    target: &dyn TargetDensity,
    params: &StretchParams,
) -> Result<Vec<MoveOutcome>> {
    let l = state.n_walkers;
    if l < 2 || !l.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "split-half scheduling requires an even number of walkers >= 2, got {l}"
        )));
    }
    check_dims(state, target)?;
    let half = l / 2;
    let mut outcomes = half_sweep(state, 0..half, half..l, target, params, None)?;
    outcomes.extend(half_sweep(state, half..l, 0..half, target, params, None)?);
    state.advance_iteration();
    Ok(outcomes)
}

/// Update every walker in `main` against the frozen snapshot of `comp`.
/// `force_parallel` overrides the size heuristic (used by tests).
fn half_sweep(
    state: &mut WalkerEnsemble,
    main: std::ops::Range<usize>,
    comp: std::ops::Range<usize>,
    target: &dyn TargetDensity,
    params: &StretchParams,
    force_parallel: Option<bool>,
) -> Result<Vec<MoveOutcome>> {
    let dim = state.dim;
    let snapshot: Vec<f64> = state.positions[comp.start * dim..comp.end * dim].to_vec();
    let comp_len = comp.len();

    let update = |k: usize| -> Result<Attempt> {
        let mut rng = state.move_stream(k);
        let off = rng.random_range(0..comp_len);
        let y = &snapshot[off * dim..(off + 1) * dim];
        stretch_attempt(state.walker(k), y, target, params, &mut rng)
    };

    let parallel = force_parallel.unwrap_or(main.len() >= PARALLEL_THRESHOLD);
    let results: Vec<Result<Attempt>> = if parallel {
        main.clone().into_par_iter().map(update).collect()
    } else {
        main.clone().map(update).collect()
    };

    let mut outcomes = Vec::with_capacity(main.len());
    for (k, res) in main.zip(results) {
        let (accepted, z, lap, proposal) = res?;
        if let Some(p) = proposal {
            state.set_walker(k, &p);
        }
        outcomes.push(MoveOutcome {
            accepted,
            z,
            walker_index: k,
            log_accept_prob: lap,
        });
    }
    Ok(outcomes)
}

/// One continuous-time event: main walker `k`, complementary walker `j`.
fn ct_event<R: Rng>(
    state: &mut WalkerEnsemble,
    k: usize,
    j: usize,
    target: &dyn TargetDensity,
    params: &StretchParams,
    rng: &mut R,
) -> Result<MoveOutcome> {
    let (accepted, z, lap, proposal) = {
        let x = state.walker(k);
        let y = state.walker(j);
        stretch_attempt(x, y, target, params, rng)?
    };
    if let Some(p) = proposal {
        state.set_walker(k, &p);
    }
    Ok(MoveOutcome {
        accepted,
        z,
        walker_index: k,
        log_accept_prob: lap,
    })
}

/// State snapshot emitted by the continuous-time scheduler.
#[derive(Debug, Clone)]
pub struct CtSnapshot {
    pub time: f64,
    /// Walker-major L x n coordinates.
    pub positions: Vec<f64>,
}

/// A continuous-time move event.
#[derive(Debug, Clone)]
pub struct CtEvent {
    /// Absolute clock time of the event.
    pub time: f64,
    pub outcome: MoveOutcome,
}

/// Run the continuous-time scheduler for `duration` units of clock time.
///
/// Events arrive at the jumps of a Poisson process with total rate L, so
/// each walker is the main walker once per unit of time on average. At each
/// event a main walker and a distinct complementary walker are chosen
/// uniformly. Snapshots of the full state are emitted every `snapshot_dt`
/// units, starting with the initial state.
pub fn run_continuous_time(
    state: &mut WalkerEnsemble,
    target: &dyn TargetDensity,
    params: &StretchParams,
    duration: f64,
    snapshot_dt: f64,
) -> Result<(Vec<CtSnapshot>, Vec<CtEvent>)> {
    if !(duration >= 0.0) || !duration.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "duration must be finite and >= 0, got {duration}"
        )));
    }
    if !(snapshot_dt > 0.0) {
        return Err(Error::InvalidParameter(
            "snapshot interval must be positive".into(),
        ));
    }
    state.require_full_rank_capacity()?;
    check_dims(state, target)?;

    let l = state.n_walkers;
    let rate = l as f64;
    let start = state.time;
    let mut rng = substream(state.master_seed, Stream::Events, state.iteration, 0);

    let n_snaps = (duration / snapshot_dt + 1e-9).floor() as usize + 1;
    let mut snapshots = Vec::with_capacity(n_snaps);
    let mut events = Vec::new();
    snapshots.push(CtSnapshot {
        time: start,
        positions: state.positions.clone(),
    });
    let mut next_snap = 1usize;

    let mut t = 0.0;
    loop {
        let u: f64 = rng.random();
        // u is in [0, 1): 1-u is in (0, 1] so the log is finite
        let dt = -(1.0 - u).ln() / rate;
        let t_event = t + dt;
        // emit any grid points the clock jumped over
        while next_snap < n_snaps && (next_snap as f64) * snapshot_dt <= t_event.min(duration) {
            snapshots.push(CtSnapshot {
                time: start + next_snap as f64 * snapshot_dt,
                positions: state.positions.clone(),
            });
            next_snap += 1;
        }
        if t_event > duration {
            break;
        }
        t = t_event;
        let k = rng.random_range(0..l);
        let mut j = rng.random_range(0..l - 1);
        if j >= k {
            j += 1;
        }
        let outcome = ct_event(state, k, j, target, params, &mut rng)?;
        events.push(CtEvent {
            time: start + t,
            outcome,
        });
    }
    while next_snap < n_snaps {
        snapshots.push(CtSnapshot {
            time: start + next_snap as f64 * snapshot_dt,
            positions: state.positions.clone(),
        });
        next_snap += 1;
    }

    state.time = start + duration;
    state.iteration += 1; // fresh event stream epoch for a subsequent run
    Ok((snapshots, events))
}

fn check_dims(state: &WalkerEnsemble, target: &dyn TargetDensity) -> Result<()> {
    if state.dim != target.dim() {
        return Err(Error::InvalidInput(format!(
            "ensemble dimension {} does not match target dimension {}",
            state.dim,
            target.dim()
        )));
    }
    Ok(())
}

//! Thinned walker history plus the per-move stretch-variable log.

use crate::ensemble::{
    init_ensemble, run_continuous_time, step_serial_sweep, step_split_half, InitSpec, MoveOutcome,
    Scheduler, StretchParams, WalkerEnsemble,
};
use crate::error::Result;
use crate::targets::TargetDensity;

/// History of one sampler run.
///
/// Positions of every walker are stored for iteration 0 and every `thin`-th
/// iteration after it, so a run of `iterations` full iterations stores
/// `floor(iterations / thin) + 1` states. The stretch-variable log keeps one
/// entry per attempted move, unthinned, with the drawn z recorded for
/// rejected moves as well.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainRecord {
    pub n_walkers: usize,
    pub dim: usize,
    pub thin: usize,
    pub iterations: u64,
    pub seed: u64,
    pub target_id: String,
    pub init: InitSpec,
    /// `t_stored x L x n`, iteration-major then walker-major.
    pub positions: Vec<f64>,
    /// Drawn stretching variables, one per attempted move.
    pub move_z: Vec<f64>,
    /// Acceptance flags aligned with `move_z`.
    pub move_accepted: Vec<bool>,
}

impl ChainRecord {
    pub fn t_stored(&self) -> usize {
        self.positions.len() / (self.n_walkers * self.dim)
    }

    /// All walker positions at stored index `t` (walker-major `L*n` slice).
    pub fn state_at(&self, t: usize) -> &[f64] {
        let block = self.n_walkers * self.dim;
        &self.positions[t * block..(t + 1) * block]
    }

    pub fn walker_at(&self, t: usize, j: usize) -> &[f64] {
        let block = self.n_walkers * self.dim;
        let start = t * block + j * self.dim;
        &self.positions[start..start + self.dim]
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.move_accepted.is_empty() {
            return f64::NAN;
        }
        self.move_accepted.iter().filter(|a| **a).count() as f64 / self.move_accepted.len() as f64
    }

    fn push_state(&mut self, state: &WalkerEnsemble) {
        self.positions.extend_from_slice(state.positions());
    }

    fn push_moves(&mut self, outcomes: &[MoveOutcome]) {
        for o in outcomes {
            self.move_z.push(o.z);
            self.move_accepted.push(o.accepted);
        }
    }
}

/// Run one chain from scratch and record it.
///
/// Under the discrete schedulers, `iterations` counts full iterations
/// (serial sweeps or split-half pairs). Under the continuous-time scheduler
/// the same number is used as the clock duration with snapshots every
/// `thin` time units, preserving the one-iteration-per-unit-time convention.
pub fn run_chain(
    target: &dyn TargetDensity,
    params: &StretchParams,
    init: InitSpec,
    n_walkers: usize,
    iterations: u64,
    seed: u64,
) -> Result<ChainRecord> {
    let state = init_ensemble(n_walkers, target.dim(), init, seed)?;
    run_chain_from(state, target, params, init, iterations)
}

/// Run a chain from an existing ensemble state.
pub fn run_chain_from(
    mut state: WalkerEnsemble,
    target: &dyn TargetDensity,
    params: &StretchParams,
    init: InitSpec,
    iterations: u64,
) -> Result<ChainRecord> {
    let mut record = ChainRecord {
        n_walkers: state.n_walkers(),
        dim: state.dim(),
        thin: params.thin,
        iterations,
        seed: state.master_seed(),
        target_id: target.id(),
        init,
        positions: Vec::new(),
        move_z: Vec::new(),
        move_accepted: Vec::new(),
    };
    record.push_state(&state);

    match params.scheduler {
        Scheduler::SerialSweep | Scheduler::SplitHalf => {
            for it in 1..=iterations {
                let outcomes = match params.scheduler {
                    Scheduler::SerialSweep => step_serial_sweep(&mut state, target, params)?,
                    Scheduler::SplitHalf => step_split_half(&mut state, target, params)?,
                    Scheduler::ContinuousTime => unreachable!(),
                };
                record.push_moves(&outcomes);
                if it.is_multiple_of(params.thin as u64) {
                    record.push_state(&state);
                }
            }
        }
        Scheduler::ContinuousTime => {
            let (snapshots, events) = run_continuous_time(
                &mut state,
                target,
                params,
                iterations as f64,
                params.thin as f64,
            )?;
            // skip the initial snapshot, already recorded
            for snap in snapshots.iter().skip(1) {
                record.positions.extend_from_slice(&snap.positions);
            }
            for ev in &events {
                record.move_z.push(ev.outcome.z);
                record.move_accepted.push(ev.outcome.accepted);
            }
        }
    }

    let expected = (iterations / params.thin as u64 + 1) as usize;
    debug_assert_eq!(record.t_stored(), expected);
    Ok(record)
}

/// Check that two records are bit-identical; used by reproducibility tests.
pub fn records_identical(a: &ChainRecord, b: &ChainRecord) -> bool {
    a.n_walkers == b.n_walkers
        && a.dim == b.dim
        && a.thin == b.thin
        && a.iterations == b.iterations
        && a.seed == b.seed
        && a.target_id == b.target_id
        && a.positions.len() == b.positions.len()
        && a.positions
            .iter()
            .zip(&b.positions)
            .all(|(x, y)| x.to_bits() == y.to_bits())
        && a.move_z
            .iter()
            .zip(&b.move_z)
            .all(|(x, y)| x.to_bits() == y.to_bits())
        && a.move_accepted == b.move_accepted
}

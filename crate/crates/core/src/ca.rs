//! One-dimensional averaging automaton on a ring.
//!
//! Each cell holds a real value in [0, 100]; every step it is replaced by the
//! mean of the `2r + 1` cells centred on it. The mean filter conserves the
//! total, so the ring flattens to the initial mean and the side of 50 it
//! settles on is the majority vote.

use std::io::Write;

use crate::analysis::Estimate;
use crate::encoding::{Candidate, Election};
use crate::error::{Error, Result};
use crate::lattice::write_pgm;

/// Windows at most this wide are summed directly; wider ones slide.
const DIRECT_WINDOW_MAX: usize = 8;
/// A sliding window sum is recomputed from scratch this often (in cells).
const RESUM_INTERVAL: usize = 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct CaConfig {
    pub radius: usize,
    /// Halt once `max - min` drops strictly below this.
    pub halt_epsilon: f64,
    pub max_steps: u64,
}

impl Default for CaConfig {
    fn default() -> Self {
        Self {
            radius: 1,
            halt_epsilon: 0.01,
            max_steps: 10_000_000,
        }
    }
}

impl CaConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if n == 0 || n % 2 == 0 {
            return Err(Error::Parameter(format!("automaton needs an odd cell count, got {n}")));
        }
        if self.radius == 0 || 2 * self.radius + 1 > n {
            return Err(Error::Parameter(format!(
                "radius {} needs 1 <= r and 2r + 1 <= {n}",
                self.radius
            )));
        }
        if !(self.halt_epsilon > 0.0) {
            return Err(Error::Parameter(format!(
                "halt epsilon must be positive, got {}",
                self.halt_epsilon
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaState {
    cells: Vec<f64>,
}

impl CaState {
    /// Up votes become 100, down votes 0, in ballot order.
    pub fn from_election(election: &Election) -> Self {
        let cells = election
            .votes()
            .iter()
            .map(|v| match v {
                Candidate::Up => 100.0,
                Candidate::Down => 0.0,
            })
            .collect();
        Self { cells }
    }

    pub fn from_cells(cells: Vec<f64>) -> Self {
        Self { cells }
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.cells.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.cells.len() as f64
    }

    pub fn range(&self) -> f64 {
        let (lo, hi) = self
            .cells
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        hi - lo
    }

    /// Synchronous mean-filter update, written into `next`.
    pub fn step_into(&self, radius: usize, next: &mut Vec<f64>) {
        let n = self.cells.len();
        let c = &self.cells;
        let width = 2 * radius + 1;
        let inv = 1.0 / width as f64;
        next.clear();
        next.resize(n, 0.0);

        if width <= DIRECT_WINDOW_MAX {
            for (i, out) in next.iter_mut().enumerate() {
                let mut s = 0.0;
                for k in 0..width {
                    s += c[(i + n + k - radius) % n];
                }
                *out = s * inv;
            }
            return;
        }

        let window_sum = |i: usize| -> f64 { (0..width).map(|k| c[(i + n + k - radius) % n]).sum() };
        let mut s = 0.0;
        for i in 0..n {
            if i % RESUM_INTERVAL == 0 {
                s = window_sum(i);
            } else {
                s += c[(i + radius) % n] - c[(i + n - radius - 1) % n];
            }
            next[i] = s * inv;
        }
    }

    pub fn step(&self, radius: usize) -> Self {
        let mut next = Vec::with_capacity(self.cells.len());
        self.step_into(radius, &mut next);
        Self { cells: next }
    }

    /// Intensity row for a space-time image: `round(value * 2.55)`.
    pub fn intensity_row(&self) -> Vec<u8> {
        self.cells.iter().map(|&v| (v * 2.55).round().clamp(0.0, 255.0) as u8).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CaOutcome {
    Halted { final_value: f64, halt_step: u64 },
    /// Step cap reached while the range was still `last_range`.
    Timeout { last_range: f64, steps: u64 },
}

/// Iterates until the value range is below the threshold or the cap hits.
pub fn run(initial: &CaState, cfg: &CaConfig) -> Result<CaOutcome> {
    run_observed(initial, cfg, |_, _| {})
}

/// As [`run`], calling `observe(step, state)` on every state including the first.
pub fn run_observed<F>(initial: &CaState, cfg: &CaConfig, mut observe: F) -> Result<CaOutcome>
where
    F: FnMut(u64, &CaState),
{
    cfg.validate(initial.len())?;
    let mut state = initial.clone();
    let mut scratch = Vec::with_capacity(state.len());
    let mut step = 0u64;
    loop {
        observe(step, &state);
        let range = state.range();
        if range < cfg.halt_epsilon {
            return Ok(CaOutcome::Halted { final_value: state.mean(), halt_step: step });
        }
        if step >= cfg.max_steps {
            return Ok(CaOutcome::Timeout { last_range: range, steps: step });
        }
        state.step_into(cfg.radius, &mut scratch);
        std::mem::swap(&mut state.cells, &mut scratch);
        step += 1;
    }
}

/// Winner is the up candidate above 50; exactly 50 is indeterminate.
pub fn readout(final_value: f64) -> Result<Estimate> {
    if !(0.0..=100.0).contains(&final_value) {
        return Err(Error::Parameter(format!("final value {final_value} outside [0, 100]")));
    }
    let winner = if final_value > 50.0 {
        Candidate::Up
    } else if final_value < 50.0 {
        Candidate::Down
    } else {
        return Err(Error::Indeterminate(final_value));
    };
    Ok(Estimate { winner, majority_pct: final_value.max(100.0 - final_value) })
}

/// Writes a space-time image with one row per `every`-th step.
pub fn render_spacetime<W: Write>(
    out: &mut W,
    initial: &CaState,
    cfg: &CaConfig,
    every: u64,
) -> Result<CaOutcome> {
    let every = every.max(1);
    let mut rows = Vec::new();
    let mut height = 0;
    let outcome = run_observed(initial, cfg, |step, s| {
        if step % every == 0 {
            rows.extend(s.intensity_row());
            height += 1;
        }
    })?;
    write_pgm(out, initial.len(), height, &rows)?;
    Ok(outcome)
}

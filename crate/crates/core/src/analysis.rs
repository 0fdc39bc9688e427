//! Measurements of a running world, the halting test, and the readout of a
//! winner and majority size from the band's position.

use crate::agents::WorldState;
use crate::encoding::{Candidate, Election, EncodingParams};
use crate::error::{Error, Result};

/// One row of the sampled time series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub step: u64,
    pub population: usize,
    /// Max particle y minus min particle y (px).
    pub thickness_range: f64,
    pub mean_y: f64,
}

pub fn measure(world: &WorldState) -> Result<Sample> {
    let ps = world.particles();
    if ps.is_empty() {
        return Err(Error::EmptyPopulation);
    }
    let (mut lo, mut hi, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
    for p in ps {
        lo = lo.min(p.y);
        hi = hi.max(p.y);
        sum += p.y;
    }
    Ok(Sample {
        step: world.step,
        population: ps.len(),
        thickness_range: hi - lo,
        mean_y: sum / ps.len() as f64,
    })
}

/// Inclusive: a band exactly `threshold` thick halts.
pub fn should_halt(sample: &Sample, threshold: f64) -> bool {
    sample.thickness_range <= threshold
}

/// Default halting threshold for a sensor offset. 10 px is the straight-band
/// thickness at SO 5; other offsets scale it linearly (a heuristic).
pub fn default_halt_threshold(sensor_offset: f64) -> f64 {
    2.0 * sensor_offset
}

/// Winner and majority size inferred from a band offset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub winner: Candidate,
    pub majority_pct: f64,
}

/// Maps a band offset from the centre line to a majority size.
pub trait MajorityMapping {
    /// `offset` is `|mean_y - centre_y|`; the result must lie in [50, 100].
    fn majority_pct(&self, offset: f64, amplitude: f64) -> f64;
}

/// 50 % at the centre line rising linearly to 100 % at one amplitude.
#[derive(Debug, Clone, Copy, Default)]
pub struct LinearMapping;

impl MajorityMapping for LinearMapping {
    fn majority_pct(&self, offset: f64, amplitude: f64) -> f64 {
        50.0 + 50.0 * (offset / amplitude).min(1.0)
    }
}

pub fn readout(mean_y: f64, params: &EncodingParams) -> Result<Estimate> {
    readout_with(mean_y, params, &LinearMapping)
}

pub fn readout_with(mean_y: f64, params: &EncodingParams, mapping: &dyn MajorityMapping) -> Result<Estimate> {
    if !mean_y.is_finite() {
        return Err(Error::Parameter(format!("mean y must be finite, got {mean_y}")));
    }
    let centre = params.centre_y();
    let delta = mean_y - centre;
    let winner = if delta < 0.0 {
        Candidate::Up
    } else if delta > 0.0 {
        Candidate::Down
    } else {
        return Err(Error::Indeterminate(mean_y));
    };
    Ok(Estimate {
        winner,
        majority_pct: mapping.majority_pct(delta.abs(), params.amplitude as f64),
    })
}

/// Winner by direct counting and its vote share in percent.
pub fn true_majority(election: &Election) -> Estimate {
    let n = election.len();
    let up = election.up_count();
    let down = n - up;
    let (winner, k) = if up > down { (Candidate::Up, up) } else { (Candidate::Down, down) };
    Estimate {
        winner,
        majority_pct: 100.0 * k as f64 / n as f64,
    }
}

/// Final outcome of an agent run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verdict {
    pub winner: Candidate,
    pub estimated_majority_pct: f64,
    pub halt_step: u64,
}

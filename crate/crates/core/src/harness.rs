//! Experiment plumbing: configuration, seeded single runs and batches of the
//! agent model, cellular-automaton sweeps, frame dumps and CSV output.

use std::collections::HashSet;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rayon::prelude::*;

use crate::agents::{AgentParams, NeighbourCount, SimRng, WorldState};
use crate::analysis::{self, default_halt_threshold, measure, should_halt, true_majority, Sample, Verdict};
use crate::ca::{self, CaConfig, CaOutcome, CaState};
use crate::encoding::{seed_population, Candidate, Election, EncodingParams, StimulusPolyline};
use crate::error::{Error, Result};
use crate::lattice::write_pgm;

/// Voter counts of the size sweep.
pub const SWEEP_N: [usize; 10] = [25, 49, 99, 113, 133, 159, 199, 265, 399, 799];
/// Radii of the radius sweep, all at [`SWEEP_R_CELLS`] cells.
pub const SWEEP_R: [usize; 8] = [1, 3, 5, 9, 15, 19, 29, 39];
pub const SWEEP_R_CELLS: usize = 199;

/// Trail gain for frame backgrounds; capped below 255 so particles stand out.
const FRAME_GAIN: f64 = 10.0;
const FRAME_BACKGROUND_MAX: f64 = 200.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    AgentRun,
    AgentBatch,
    CaRun,
    CaSweepN,
    CaSweepR,
    Render,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::AgentRun => "agent-run",
            Mode::AgentBatch => "agent-batch",
            Mode::CaRun => "ca-run",
            Mode::CaSweepN => "ca-sweep-n",
            Mode::CaSweepR => "ca-sweep-r",
            Mode::Render => "render",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Mode::AgentRun, Mode::AgentBatch, Mode::CaRun, Mode::CaSweepN, Mode::CaSweepR, Mode::Render]
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown mode {s:?}")))
    }
}

/// Everything a run needs. Round-trips through flat `key=value` text.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub seed: u64,
    pub voters: usize,
    pub agent: AgentParams,
    pub encoding: EncodingParams,
    pub ca: CaConfig,
    /// `None` means [`default_halt_threshold`] of the sensor offset.
    pub halt_thickness: Option<f64>,
    pub max_steps: u64,
    pub sample_every: u64,
    /// A run whose population exceeds this is abandoned as a runaway.
    pub population_cap: usize,
    pub runs: usize,
    pub workers: usize,
    /// 0 disables frames.
    pub frames_every: u64,
    pub out: PathBuf,
    pub votes_file: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let encoding = EncodingParams::default();
        Self {
            mode: Mode::AgentRun,
            seed: 1,
            voters: 9,
            agent: AgentParams::default(),
            population_cap: 3 * encoding.population,
            encoding,
            ca: CaConfig::default(),
            halt_thickness: None,
            max_steps: 500_000,
            sample_every: 50,
            runs: 30,
            workers: 1,
            frames_every: 0,
            out: PathBuf::from("out"),
            votes_file: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value {value:?} for {key}")))
}

impl ExperimentConfig {
    pub fn halt_threshold(&self) -> f64 {
        self.halt_thickness
            .unwrap_or_else(|| default_halt_threshold(self.agent.sensor_offset))
    }

    /// Sets one field by its config-file key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let a = &mut self.agent;
        let e = &mut self.encoding;
        match key.trim() {
            "mode" => self.mode = v.parse()?,
            "seed" => self.seed = parse(key, v)?,
            "voters" => self.voters = parse(key, v)?,
            "so" => a.sensor_offset = parse(key, v)?,
            "sa" => a.sensor_angle = parse(key, v)?,
            "ra" => a.rotation_angle = parse(key, v)?,
            "decay" => a.decay_rate = parse(key, v)?,
            "deposit" => a.deposit_amount = parse(key, v)?,
            "adapt_frequency" => a.adapt_frequency = parse(key, v)?,
            "counting" => {
                a.counting = match v {
                    "include" => NeighbourCount::IncludeSelf,
                    "exclude" => NeighbourCount::ExcludeSelf,
                    _ => return Err(Error::Config(format!("counting must be include or exclude, got {v:?}"))),
                }
            }
            "division_radius" => a.division_radius = parse(key, v)?,
            "division_min" => a.division_range.0 = parse(key, v)?,
            "division_max" => a.division_range.1 = parse(key, v)?,
            "survival_radius" => a.survival_radius = parse(key, v)?,
            "survival_min" => a.survival_range.0 = parse(key, v)?,
            "survival_max" => a.survival_range.1 = parse(key, v)?,
            "arena_width" => e.arena_width = parse(key, v)?,
            "arena_height" => e.arena_height = parse(key, v)?,
            "amplitude" => e.amplitude = parse(key, v)?,
            "band_width" => e.band_width = parse(key, v)?,
            "population" => e.population = parse(key, v)?,
            "stimulus" => e.stimulus_amount = parse(key, v)?,
            "hold_steps" => e.hold_steps = parse(key, v)?,
            "halt_thickness" => {
                self.halt_thickness = if v == "auto" { None } else { Some(parse(key, v)?) }
            }
            "max_steps" => self.max_steps = parse(key, v)?,
            "sample_every" => self.sample_every = parse(key, v)?,
            "population_cap" => self.population_cap = parse(key, v)?,
            "radius" => self.ca.radius = parse(key, v)?,
            "epsilon" => self.ca.halt_epsilon = parse(key, v)?,
            "ca_max_steps" => self.ca.max_steps = parse(key, v)?,
            "runs" => self.runs = parse(key, v)?,
            "workers" => self.workers = parse(key, v)?,
            "frames_every" => self.frames_every = parse(key, v)?,
            "out" => self.out = PathBuf::from(v),
            "votes_file" => self.votes_file = if v.is_empty() { None } else { Some(PathBuf::from(v)) },
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Applies `key=value` lines; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", no + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    pub fn pairs(&self) -> Vec<(&'static str, String)> {
        let a = &self.agent;
        let e = &self.encoding;
        vec![
            ("mode", self.mode.to_string()),
            ("seed", self.seed.to_string()),
            ("voters", self.voters.to_string()),
            ("so", a.sensor_offset.to_string()),
            ("sa", a.sensor_angle.to_string()),
            ("ra", a.rotation_angle.to_string()),
            ("decay", a.decay_rate.to_string()),
            ("deposit", a.deposit_amount.to_string()),
            ("adapt_frequency", a.adapt_frequency.to_string()),
            (
                "counting",
                match a.counting {
                    NeighbourCount::IncludeSelf => "include",
                    NeighbourCount::ExcludeSelf => "exclude",
                }
                .to_string(),
            ),
            ("division_radius", a.division_radius.to_string()),
            ("division_min", a.division_range.0.to_string()),
            ("division_max", a.division_range.1.to_string()),
            ("survival_radius", a.survival_radius.to_string()),
            ("survival_min", a.survival_range.0.to_string()),
            ("survival_max", a.survival_range.1.to_string()),
            ("arena_width", e.arena_width.to_string()),
            ("arena_height", e.arena_height.to_string()),
            ("amplitude", e.amplitude.to_string()),
            ("band_width", e.band_width.to_string()),
            ("population", e.population.to_string()),
            ("stimulus", e.stimulus_amount.to_string()),
            ("hold_steps", e.hold_steps.to_string()),
            ("halt_thickness", self.halt_thickness.map_or("auto".into(), |t| t.to_string())),
            ("max_steps", self.max_steps.to_string()),
            ("sample_every", self.sample_every.to_string()),
            ("population_cap", self.population_cap.to_string()),
            ("radius", self.ca.radius.to_string()),
            ("epsilon", self.ca.halt_epsilon.to_string()),
            ("ca_max_steps", self.ca.max_steps.to_string()),
            ("runs", self.runs.to_string()),
            ("workers", self.workers.to_string()),
            ("frames_every", self.frames_every.to_string()),
            ("out", self.out.display().to_string()),
            ("votes_file", self.votes_file.as_ref().map_or(String::new(), |p| p.display().to_string())),
        ]
    }

    /// The config as a loadable `key=value` file.
    pub fn to_text(&self) -> String {
        self.pairs().into_iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// Single-line echo written at the top of every CSV.
    pub fn echo_line(&self) -> String {
        let body: Vec<String> = self.pairs().into_iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("# config: {}", body.join(" "))
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |e: Error| Error::Config(e.to_string());
        self.agent.validate().map_err(cfg)?;
        self.encoding.validate(self.voters).map_err(cfg)?;
        if self.voters % 2 == 0 {
            return Err(Error::Config(format!("voters must be odd, got {}", self.voters)));
        }
        if self.sample_every == 0 {
            return Err(Error::Config("sample_every must be positive".into()));
        }
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        if let Some(t) = self.halt_thickness {
            if !(t.is_finite() && t >= 0.0) {
                return Err(Error::Config(format!("halt thickness must be finite and non-negative, got {t}")));
            }
        }
        Ok(())
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of run `index` under `root`: `splitmix64(root ^ splitmix64(index))`.
/// Distinct indices give unrelated ChaCha streams.
pub fn derive_seed(root: u64, index: u64) -> u64 {
    splitmix64(root ^ splitmix64(index))
}

/// Reads one election per non-comment line, e.g. `C,T,C`.
pub fn read_votes_file(path: &Path) -> Result<Vec<Election>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let elections = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.parse::<Election>().map_err(|e| Error::Config(format!("{}: {e}", path.display()))))
        .collect::<Result<Vec<_>>>()?;
    if elections.is_empty() {
        return Err(Error::Config(format!("{} holds no elections", path.display())));
    }
    Ok(elections)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailReason {
    Timeout,
    Collapse,
    Runaway,
    Indeterminate,
}

impl fmt::Display for FailReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FailReason::Timeout => "timeout",
            FailReason::Collapse => "population collapse",
            FailReason::Runaway => "population runaway",
            FailReason::Indeterminate => "indeterminate",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RunOutcome {
    Halted(Verdict),
    Failed { reason: FailReason, step: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub index: usize,
    pub seed: u64,
    pub election: Election,
    pub samples: Vec<Sample>,
    pub outcome: RunOutcome,
    pub final_population: usize,
}

impl RunRecord {
    pub fn verdict(&self) -> Option<&Verdict> {
        match &self.outcome {
            RunOutcome::Halted(v) => Some(v),
            RunOutcome::Failed { .. } => None,
        }
    }

    pub fn is_correct(&self) -> bool {
        self.verdict()
            .is_some_and(|v| v.winner == true_majority(&self.election).winner)
    }

    /// Error in the up candidate's share, so a wrong winner scores its full
    /// distance rather than a mirrored one.
    pub fn abs_error_pct(&self) -> Option<f64> {
        let v = self.verdict()?;
        let up_true = 100.0 * self.election.up_count() as f64 / self.election.len() as f64;
        let up_est = match v.winner {
            Candidate::Up => v.estimated_majority_pct,
            Candidate::Down => 100.0 - v.estimated_majority_pct,
        };
        Some((up_true - up_est).abs())
    }
}

fn frame_bytes(world: &WorldState) -> Vec<u8> {
    let mut img: Vec<u8> = world
        .field
        .values()
        .iter()
        .map(|v| (v * FRAME_GAIN).round().clamp(0.0, FRAME_BACKGROUND_MAX) as u8)
        .collect();
    let w = world.width();
    for p in world.particles() {
        let (x, y) = p.cell();
        img[y * w + x] = 255;
    }
    img
}

/// Writes one frame of the world as `frame_<step>.pgm` under `dir`.
pub fn write_frame(world: &WorldState, dir: &Path) -> Result<()> {
    let mut f = BufWriter::new(File::create(dir.join(format!("frame_{:08}.pgm", world.step)))?);
    write_pgm(&mut f, world.width(), world.height(), &frame_bytes(world))?;
    f.flush()?;
    Ok(())
}

/// One agent-model election: encode, seed, hold, relax, read out.
///
/// Invalid configuration is an error. A run that times out, dies out, runs
/// away or ends on the centre line comes back as [`RunOutcome::Failed`].
/// With `frames` set and a non-zero interval, frames go to that directory,
/// which must already exist.
pub fn run_agent_experiment(
    cfg: &ExperimentConfig,
    index: usize,
    election: Option<Election>,
    frames: Option<&Path>,
) -> Result<RunRecord> {
    cfg.validate()?;
    let seed = derive_seed(cfg.seed, index as u64);
    let mut rng = SimRng::seed_from_u64(seed);
    let election = match election {
        Some(e) => e,
        None => Election::random(cfg.voters, &mut rng)?,
    };
    cfg.encoding.validate(election.len())?;
    let band = StimulusPolyline::build(&election, &cfg.encoding)?.band(&cfg.encoding);
    let particles = seed_population(&band, cfg.encoding.population, &mut rng)?;
    let mut world = WorldState::new(cfg.encoding.arena_width, cfg.encoding.arena_height, rng)?;
    world.add_particles(particles)?;

    let frame_dir = frames.filter(|_| cfg.frames_every > 0);
    let frame_due = |w: &WorldState| w.step % cfg.frames_every.max(1) == 0;
    let threshold = cfg.halt_threshold();
    let mut samples = vec![measure(&world)?];
    if let Some(d) = frame_dir {
        write_frame(&world, d)?;
    }

    let record = |world: &WorldState, samples: Vec<Sample>, outcome| RunRecord {
        index,
        seed,
        election: election.clone(),
        samples,
        outcome,
        final_population: world.population(),
    };

    let mut outcome = None;
    while outcome.is_none() {
        if world.step < cfg.encoding.hold_steps {
            world.hold_step(&band, cfg.encoding.stimulus_amount, &cfg.agent)?;
        } else {
            world.scheduler_step(&cfg.agent);
        }
        let step = world.step;
        if let Some(d) = frame_dir {
            if frame_due(&world) {
                write_frame(&world, d)?;
            }
        }
        if world.population() == 0 {
            outcome = Some(RunOutcome::Failed { reason: FailReason::Collapse, step });
        } else if world.population() > cfg.population_cap {
            outcome = Some(RunOutcome::Failed { reason: FailReason::Runaway, step });
        } else if step % cfg.sample_every == 0 {
            let s = measure(&world)?;
            samples.push(s);
            if step > cfg.encoding.hold_steps && should_halt(&s, threshold) {
                outcome = Some(match analysis::readout(s.mean_y, &cfg.encoding) {
                    Ok(est) => RunOutcome::Halted(Verdict {
                        winner: est.winner,
                        estimated_majority_pct: est.majority_pct,
                        halt_step: step,
                    }),
                    Err(_) => RunOutcome::Failed { reason: FailReason::Indeterminate, step },
                });
            }
        }
        if outcome.is_none() && step >= cfg.max_steps {
            outcome = Some(RunOutcome::Failed { reason: FailReason::Timeout, step });
        }
    }
    if let Some(d) = frame_dir {
        if !frame_due(&world) {
            write_frame(&world, d)?;
        }
    }
    Ok(record(&world, samples, outcome.unwrap()))
}

pub const SAMPLE_HEADER: &str = "step,population,thickness_range,mean_y";
pub const VERDICT_HEADER: &str = "seed,n,votes,true_winner,true_majority_pct,est_winner,est_majority_pct,abs_error_pct,halt_step,final_population,status,reason";

pub fn write_samples<W: Write>(out: &mut W, cfg: &ExperimentConfig, rec: &RunRecord) -> Result<()> {
    writeln!(out, "{}", cfg.echo_line())?;
    writeln!(out, "{SAMPLE_HEADER}")?;
    for s in &rec.samples {
        writeln!(out, "{},{},{:.4},{:.4}", s.step, s.population, s.thickness_range, s.mean_y)?;
    }
    Ok(())
}

pub fn verdict_row(rec: &RunRecord) -> String {
    let t = true_majority(&rec.election);
    let head = format!(
        "{},{},{},{},{:.2}",
        rec.seed,
        rec.election.len(),
        rec.election.to_string().replace(',', ""),
        t.winner.code(),
        t.majority_pct
    );
    match rec.outcome {
        RunOutcome::Halted(v) => format!(
            "{head},{},{:.2},{:.2},{},{},ok,",
            v.winner.code(),
            v.estimated_majority_pct,
            rec.abs_error_pct().unwrap_or(f64::NAN),
            v.halt_step,
            rec.final_population
        ),
        RunOutcome::Failed { reason, step } => {
            format!("{head},,,,{step},{},failed,{reason}", rec.final_population)
        }
    }
}

pub fn write_verdicts<W: Write>(out: &mut W, cfg: &ExperimentConfig, recs: &[RunRecord]) -> Result<()> {
    writeln!(out, "{}", cfg.echo_line())?;
    writeln!(out, "{VERDICT_HEADER}")?;
    for r in recs {
        writeln!(out, "{}", verdict_row(r))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchSummary {
    pub runs: usize,
    pub failures: usize,
    pub correct_winners: usize,
    pub mean_abs_error_pct: f64,
    pub max_abs_error_pct: f64,
    pub std_abs_error_pct: f64,
    pub mean_halt_step: f64,
    /// Between true and estimated majority size over halted runs; `None`
    /// when fewer than two runs halted or either side has no spread.
    pub pearson_r: Option<f64>,
    /// Runs whose vote vector repeats an earlier run's.
    pub duplicate_elections: usize,
}

pub const SUMMARY_HEADER: &str = "runs,failures,correct_winners,mean_abs_error_pct,max_abs_error_pct,std_abs_error_pct,mean_halt_step,pearson_r,duplicate_elections";

impl BatchSummary {
    pub fn from_records(recs: &[RunRecord]) -> Self {
        let halted: Vec<&RunRecord> = recs.iter().filter(|r| r.verdict().is_some()).collect();
        let errs: Vec<f64> = halted.iter().filter_map(|r| r.abs_error_pct()).collect();
        let (mean_err, std_err) = mean_std(&errs);
        let halts: Vec<f64> = halted.iter().map(|r| r.verdict().unwrap().halt_step as f64).collect();
        let truth: Vec<f64> = halted.iter().map(|r| true_majority(&r.election).majority_pct).collect();
        let est: Vec<f64> = halted.iter().map(|r| r.verdict().unwrap().estimated_majority_pct).collect();
        let mut seen = HashSet::new();
        let duplicate_elections = recs.iter().filter(|r| !seen.insert(r.election.clone())).count();
        Self {
            runs: recs.len(),
            failures: recs.len() - halted.len(),
            correct_winners: recs.iter().filter(|r| r.is_correct()).count(),
            mean_abs_error_pct: mean_err,
            max_abs_error_pct: errs.iter().copied().fold(f64::NAN, f64::max),
            std_abs_error_pct: std_err,
            mean_halt_step: mean_std(&halts).0,
            pearson_r: pearson(&truth, &est),
            duplicate_elections,
        }
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{:.3},{:.3},{:.3},{:.1},{},{}",
            self.runs,
            self.failures,
            self.correct_winners,
            self.mean_abs_error_pct,
            self.max_abs_error_pct,
            self.std_abs_error_pct,
            self.mean_halt_step,
            self.pearson_r.map_or(String::new(), |r| format!("{r:.4}")),
            self.duplicate_elections
        )
    }
}

/// Mean and population standard deviation; NaN for an empty slice.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, v.sqrt())
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let (mx, _) = mean_std(xs);
    let (my, _) = mean_std(ys);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))
}

/// `cfg.runs` independent elections (or one per line of the votes file),
/// run on `cfg.workers` threads. Records come back sorted by run index.
pub fn run_agent_batch(cfg: &ExperimentConfig) -> Result<(Vec<RunRecord>, BatchSummary)> {
    cfg.validate()?;
    let given = match &cfg.votes_file {
        Some(p) => Some(read_votes_file(p)?),
        None => None,
    };
    let runs = given.as_ref().map_or(cfg.runs, Vec::len);
    let frames_root = if cfg.frames_every > 0 { Some(cfg.out.join("frames")) } else { None };
    let mut recs = pool(cfg.workers)?.install(|| {
        (0..runs)
            .into_par_iter()
            .map(|i| {
                let dir = frames_root.as_ref().map(|r| r.join(format!("run_{i:04}")));
                if let Some(d) = &dir {
                    fs::create_dir_all(d)?;
                }
                let e = given.as_ref().map(|g| g[i].clone());
                run_agent_experiment(cfg, i, e, dir.as_deref())
            })
            .collect::<Result<Vec<_>>>()
    })?;
    recs.sort_by_key(|r| r.index);
    let summary = BatchSummary::from_records(&recs);
    Ok((recs, summary))
}

/// Creates the output directory and checks it is writable.
pub fn prepare_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let probe = dir.join(".write-test");
    File::create(&probe)?;
    fs::remove_file(probe)?;
    Ok(())
}

/// Writes `samples.csv`, `verdict.csv` and frames for one run under `cfg.out`.
pub fn agent_run_to_disk(cfg: &ExperimentConfig) -> Result<RunRecord> {
    cfg.validate()?;
    prepare_out_dir(&cfg.out)?;
    let election = match &cfg.votes_file {
        Some(p) => Some(read_votes_file(p)?.swap_remove(0)),
        None => None,
    };
    let frames = cfg.out.join("frames");
    if cfg.frames_every > 0 {
        fs::create_dir_all(&frames)?;
    }
    let rec = run_agent_experiment(cfg, 0, election, Some(&frames))?;
    let mut f = BufWriter::new(File::create(cfg.out.join("samples.csv"))?);
    write_samples(&mut f, cfg, &rec)?;
    f.flush()?;
    let mut f = BufWriter::new(File::create(cfg.out.join("verdict.csv"))?);
    write_verdicts(&mut f, cfg, std::slice::from_ref(&rec))?;
    f.flush()?;
    Ok(rec)
}

/// Writes `runs.csv`, `summary.csv` and one `samples_<i>.csv` per run.
pub fn agent_batch_to_disk(cfg: &ExperimentConfig) -> Result<(Vec<RunRecord>, BatchSummary)> {
    cfg.validate()?;
    prepare_out_dir(&cfg.out)?;
    let (recs, summary) = run_agent_batch(cfg)?;
    for r in &recs {
        let mut f = BufWriter::new(File::create(cfg.out.join(format!("samples_{:04}.csv", r.index)))?);
        write_samples(&mut f, cfg, r)?;
        f.flush()?;
    }
    let mut f = BufWriter::new(File::create(cfg.out.join("runs.csv"))?);
    write_verdicts(&mut f, cfg, &recs)?;
    f.flush()?;
    let mut f = BufWriter::new(File::create(cfg.out.join("summary.csv"))?);
    writeln!(f, "{}", cfg.echo_line())?;
    writeln!(f, "{SUMMARY_HEADER}")?;
    writeln!(f, "{}", summary.csv_row())?;
    f.flush()?;
    Ok((recs, summary))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaRecord {
    pub seed: u64,
    pub n: usize,
    pub r: usize,
    pub up_votes: usize,
    pub true_majority_pct: f64,
    pub outcome: CaOutcome,
    /// `None` on timeout or an exactly central final value.
    pub est_winner: Option<Candidate>,
    pub correct: bool,
}

impl CaRecord {
    pub fn halt_steps(&self) -> Option<u64> {
        match self.outcome {
            CaOutcome::Halted { halt_step, .. } => Some(halt_step),
            CaOutcome::Timeout { .. } => None,
        }
    }

    pub fn csv_row(&self) -> String {
        let (final_value, steps) = match self.outcome {
            CaOutcome::Halted { final_value, halt_step } => (format!("{final_value:.6}"), halt_step.to_string()),
            CaOutcome::Timeout { steps, .. } => (String::new(), format!("timeout@{steps}")),
        };
        format!(
            "{},{},{},{},{:.2},{},{},{},{}",
            self.seed,
            self.n,
            self.r,
            self.up_votes,
            self.true_majority_pct,
            final_value,
            self.est_winner.map_or(String::new(), |c| c.code().to_string()),
            self.correct,
            steps
        )
    }
}

pub const CA_HEADER: &str = "seed,n,r,up_votes,true_majority_pct,final_value,est_winner,correct,halt_steps";

/// One automaton run on a random `n`-voter election drawn from `seed`.
pub fn run_ca_single(seed: u64, n: usize, cfg: &CaConfig) -> Result<CaRecord> {
    let mut rng = SimRng::seed_from_u64(seed);
    let election = Election::random(n, &mut rng)?;
    let truth = true_majority(&election);
    let outcome = ca::run(&CaState::from_election(&election), cfg)?;
    let est_winner = match outcome {
        CaOutcome::Halted { final_value, .. } => ca::readout(final_value).ok().map(|e| e.winner),
        CaOutcome::Timeout { .. } => None,
    };
    Ok(CaRecord {
        seed,
        n,
        r: cfg.radius,
        up_votes: election.up_count(),
        true_majority_pct: truth.majority_pct,
        outcome,
        est_winner,
        correct: est_winner == Some(truth.winner),
    })
}

/// Aggregate of one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct CaPoint {
    pub n: usize,
    pub r: usize,
    pub runs: usize,
    pub correct: usize,
    pub timeouts: usize,
    /// Over halted runs.
    pub mean_halt_step: f64,
}

pub const CA_POINT_HEADER: &str = "n,r,runs,correct,timeouts,mean_halt_step";

impl CaPoint {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{:.2}",
            self.n, self.r, self.runs, self.correct, self.timeouts, self.mean_halt_step
        )
    }
}

/// `runs` automaton runs at every `(n, r)` point, seeds derived from the
/// root seed, the point index and the run index.
pub fn run_ca_sweep(
    cfg: &ExperimentConfig,
    points: &[(usize, usize)],
    runs: usize,
) -> Result<(Vec<CaRecord>, Vec<CaPoint>)> {
    if runs == 0 {
        return Err(Error::Config("runs must be at least 1".into()));
    }
    let jobs: Vec<(usize, usize, usize, usize)> = points
        .iter()
        .enumerate()
        .flat_map(|(p, &(n, r))| (0..runs).map(move |i| (p, n, r, i)))
        .collect();
    let records = pool(cfg.workers.max(1))?.install(|| {
        jobs.par_iter()
            .map(|&(p, n, r, i)| {
                let ca_cfg = CaConfig { radius: r, ..cfg.ca.clone() };
                ca_cfg.validate(n).map_err(|e| Error::Config(e.to_string()))?;
                run_ca_single(derive_seed(derive_seed(cfg.seed, p as u64), i as u64), n, &ca_cfg)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let summary = records
        .chunks(runs)
        .map(|chunk| {
            let halts: Vec<f64> = chunk.iter().filter_map(|c| c.halt_steps()).map(|s| s as f64).collect();
            CaPoint {
                n: chunk[0].n,
                r: chunk[0].r,
                runs: chunk.len(),
                correct: chunk.iter().filter(|c| c.correct).count(),
                timeouts: chunk.len() - halts.len(),
                mean_halt_step: mean_std(&halts).0,
            }
        })
        .collect();
    Ok((records, summary))
}

pub fn sweep_n_points(radius: usize) -> Vec<(usize, usize)> {
    SWEEP_N.iter().map(|&n| (n, radius)).collect()
}

pub fn sweep_r_points() -> Vec<(usize, usize)> {
    SWEEP_R.iter().map(|&r| (SWEEP_R_CELLS, r)).collect()
}

/// Writes `ca_runs.csv` and `ca_points.csv` under `cfg.out`.
pub fn ca_sweep_to_disk(
    cfg: &ExperimentConfig,
    points: &[(usize, usize)],
) -> Result<(Vec<CaRecord>, Vec<CaPoint>)> {
    prepare_out_dir(&cfg.out)?;
    let (records, summary) = run_ca_sweep(cfg, points, cfg.runs)?;
    let mut f = BufWriter::new(File::create(cfg.out.join("ca_runs.csv"))?);
    writeln!(f, "{}", cfg.echo_line())?;
    writeln!(f, "{CA_HEADER}")?;
    for r in &records {
        writeln!(f, "{}", r.csv_row())?;
    }
    f.flush()?;
    let mut f = BufWriter::new(File::create(cfg.out.join("ca_points.csv"))?);
    writeln!(f, "{}", cfg.echo_line())?;
    writeln!(f, "{CA_POINT_HEADER}")?;
    for p in &summary {
        writeln!(f, "{}", p.csv_row())?;
    }
    f.flush()?;
    Ok((records, summary))
}

/// One automaton run on `cfg.voters` cells; writes `ca_run.csv` and, with a
/// frame interval, a space-time image `spacetime.pgm`.
pub fn ca_run_to_disk(cfg: &ExperimentConfig) -> Result<CaRecord> {
    cfg.ca.validate(cfg.voters).map_err(|e| Error::Config(e.to_string()))?;
    prepare_out_dir(&cfg.out)?;
    let seed = derive_seed(cfg.seed, 0);
    let rec = run_ca_single(seed, cfg.voters, &cfg.ca)?;
    if cfg.frames_every > 0 {
        let mut rng = SimRng::seed_from_u64(seed);
        let election = Election::random(cfg.voters, &mut rng)?;
        let mut f = BufWriter::new(File::create(cfg.out.join("spacetime.pgm"))?);
        ca::render_spacetime(&mut f, &CaState::from_election(&election), &cfg.ca, cfg.frames_every)?;
        f.flush()?;
    }
    let mut f = BufWriter::new(File::create(cfg.out.join("ca_run.csv"))?);
    writeln!(f, "{}", cfg.echo_line())?;
    writeln!(f, "{CA_HEADER}")?;
    writeln!(f, "{}", rec.csv_row())?;
    f.flush()?;
    Ok(rec)
}

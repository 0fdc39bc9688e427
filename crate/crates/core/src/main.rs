use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use slime_majority::harness::{self, ExperimentConfig, Mode, RunOutcome};
use slime_majority::Error;

#[derive(Parser)]
#[command(name = "slime-majority", version, about = "Majority voting with a slime-mould particle model and a mean-field automaton")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One agent-model election.
    AgentRun(Flags),
    /// A batch of agent-model elections with summary statistics.
    AgentBatch(Flags),
    /// One automaton run.
    CaRun(Flags),
    /// Automaton accuracy and halt time over the voter-count sweep.
    CaSweepN(Flags),
    /// Automaton halt time over the radius sweep.
    CaSweepR(Flags),
    /// Agent run with frame dumps (every 1000 steps unless set).
    Render(Flags),
}

#[derive(Args, Clone, Default)]
struct Flags {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    voters: Option<usize>,
    #[arg(long)]
    so: Option<f64>,
    #[arg(long)]
    sa: Option<f64>,
    #[arg(long)]
    ra: Option<f64>,
    #[arg(long)]
    decay: Option<f64>,
    #[arg(long)]
    arena_width: Option<usize>,
    #[arg(long)]
    arena_height: Option<usize>,
    #[arg(long)]
    amplitude: Option<usize>,
    #[arg(long)]
    population: Option<usize>,
    #[arg(long)]
    halt_thickness: Option<f64>,
    #[arg(long)]
    radius: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    frames_every: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Flat key=value file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// One election per line, e.g. C,T,C.
    #[arg(long)]
    votes_file: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    max_steps: Option<u64>,
}

impl Flags {
    fn build(&self, mode: Mode) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        cfg.mode = mode;
        if mode == Mode::Render && cfg.frames_every == 0 {
            cfg.frames_every = 1000;
        }
        macro_rules! over {
            ($($flag:ident => $field:expr),* $(,)?) => {
                $(if let Some(v) = self.$flag.clone() { $field = v; })*
            };
        }
        over! {
            seed => cfg.seed,
            voters => cfg.voters,
            so => cfg.agent.sensor_offset,
            sa => cfg.agent.sensor_angle,
            ra => cfg.agent.rotation_angle,
            decay => cfg.agent.decay_rate,
            arena_width => cfg.encoding.arena_width,
            arena_height => cfg.encoding.arena_height,
            amplitude => cfg.encoding.amplitude,
            population => cfg.encoding.population,
            radius => cfg.ca.radius,
            epsilon => cfg.ca.halt_epsilon,
            runs => cfg.runs,
            frames_every => cfg.frames_every,
            out => cfg.out,
            workers => cfg.workers,
            max_steps => cfg.max_steps,
        }
        if let Some(t) = self.halt_thickness {
            cfg.halt_thickness = Some(t);
        }
        if self.votes_file.is_some() {
            cfg.votes_file = self.votes_file.clone();
        }
        if self.population.is_some() && self.config.is_none() {
            cfg.population_cap = 3 * cfg.encoding.population;
        }
        match mode {
            Mode::AgentRun | Mode::AgentBatch | Mode::Render => cfg.validate()?,
            Mode::CaRun => cfg.ca.validate(cfg.voters).map_err(|e| Error::Config(e.to_string()))?,
            Mode::CaSweepN | Mode::CaSweepR => {
                if cfg.runs == 0 || cfg.workers == 0 {
                    return Err(Error::Config("runs and workers must be at least 1".into()));
                }
            }
        }
        Ok(cfg)
    }
}

fn describe(rec: &harness::RunRecord) -> String {
    match rec.outcome {
        RunOutcome::Halted(v) => format!(
            "election {}: winner {} with an estimated {:.2}% at step {} (true {} {:.2}%)",
            rec.election,
            v.winner,
            v.estimated_majority_pct,
            v.halt_step,
            slime_majority::analysis::true_majority(&rec.election).winner,
            slime_majority::analysis::true_majority(&rec.election).majority_pct
        ),
        RunOutcome::Failed { reason, step } => {
            format!("election {}: failed at step {step} ({reason})", rec.election)
        }
    }
}

/// Returns whether every run succeeded.
fn run(mode: Mode, cfg: &ExperimentConfig) -> Result<bool, Error> {
    match mode {
        Mode::AgentRun | Mode::Render => {
            let rec = harness::agent_run_to_disk(cfg)?;
            println!("{}", describe(&rec));
            Ok(rec.verdict().is_some())
        }
        Mode::AgentBatch => {
            let (recs, s) = harness::agent_batch_to_disk(cfg)?;
            for r in &recs {
                println!("{}", describe(r));
            }
            println!("{}", harness::SUMMARY_HEADER);
            println!("{}", s.csv_row());
            Ok(s.failures == 0)
        }
        Mode::CaRun => {
            let rec = harness::ca_run_to_disk(cfg)?;
            println!("{}", harness::CA_HEADER);
            println!("{}", rec.csv_row());
            Ok(rec.halt_steps().is_some())
        }
        Mode::CaSweepN | Mode::CaSweepR => {
            let points = if mode == Mode::CaSweepN {
                harness::sweep_n_points(cfg.ca.radius)
            } else {
                harness::sweep_r_points()
            };
            let (_, pts) = harness::ca_sweep_to_disk(cfg, &points)?;
            println!("{}", harness::CA_POINT_HEADER);
            for p in &pts {
                println!("{}", p.csv_row());
            }
            Ok(pts.iter().all(|p| p.timeouts == 0))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, flags) = match cli.command {
        Command::AgentRun(f) => (Mode::AgentRun, f),
        Command::AgentBatch(f) => (Mode::AgentBatch, f),
        Command::CaRun(f) => (Mode::CaRun, f),
        Command::CaSweepN(f) => (Mode::CaSweepN, f),
        Command::CaSweepR(f) => (Mode::CaSweepR, f),
        Command::Render(f) => (Mode::Render, f),
    };
    let cfg = match flags.build(mode) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run(mode, &cfg) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

//! Acceptance suite, run as a plain binary so every criterion prints its
//! `criterion N: PASS|FAIL` line. `cargo test --test acceptance -- 5 7`
//! runs only the listed criteria.

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use slime_majority::agents::{AgentParams, WorldState};
use slime_majority::analysis::{readout, true_majority, LinearMapping, MajorityMapping};
use slime_majority::ca::{self, CaConfig, CaOutcome, CaState};
use slime_majority::encoding::{seed_population, Candidate, Election, EncodingParams, StimulusPolyline};
use slime_majority::harness::{
    self, run_agent_batch, run_agent_experiment, write_samples, BatchSummary, CaPoint, ExperimentConfig, RunRecord,
};

type Outcome = (bool, String);

const ROOT_SEED: u64 = 20_100_601;

fn sweep_n() -> &'static Vec<CaPoint> {
    static CELL: OnceLock<Vec<CaPoint>> = OnceLock::new();
    CELL.get_or_init(|| {
        let cfg = ExperimentConfig { seed: ROOT_SEED, ..ExperimentConfig::default() };
        harness::run_ca_sweep(&cfg, &harness::sweep_n_points(1), 100).unwrap().1
    })
}

fn criterion_1_ca_accuracy() -> Outcome {
    let pts = sweep_n();
    let bad: Vec<String> = pts
        .iter()
        .filter(|p| p.correct != p.runs)
        .map(|p| format!("n={} {}/{}", p.n, p.correct, p.runs))
        .collect();
    let total: usize = pts.iter().map(|p| p.runs).sum();
    (
        bad.is_empty() && pts.len() == 10 && total == 1000,
        format!("{total} runs over {} voter counts, misclassified points: {bad:?}", pts.len()),
    )
}

fn criterion_2_ca_conservation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(ROOT_SEED ^ 2);
    let eps = CaConfig::default().halt_epsilon;
    let (mut worst_final, mut worst_drift) = (0.0f64, 0.0f64);
    let mut timeouts = 0;
    for k in 0..1000 {
        let n = 2 * rng.gen_range(1..=199) + 1;
        let r = rng.gen_range(1..=((n - 1) / 2).min(12));
        let cells: Vec<f64> = if k % 2 == 0 {
            (0..n).map(|_| if rng.gen() { 100.0 } else { 0.0 }).collect()
        } else {
            (0..n).map(|_| rng.gen_range(0.0..=100.0)).collect()
        };
        let state = CaState::from_cells(cells);
        let (mean0, sum0) = (state.mean(), state.sum());
        let scale = sum0.abs().max(f64::MIN_POSITIVE);
        let mut prev = sum0;
        let cfg = CaConfig { radius: r, ..CaConfig::default() };
        let out = ca::run_observed(&state, &cfg, |_, s| {
            let sum = s.sum();
            worst_drift = worst_drift.max((sum - prev).abs() / scale);
            prev = sum;
        })
        .unwrap();
        match out {
            CaOutcome::Halted { final_value, .. } => worst_final = worst_final.max((final_value - mean0).abs()),
            CaOutcome::Timeout { .. } => timeouts += 1,
        }
    }
    (
        timeouts == 0 && worst_final < eps && worst_drift <= 1e-12,
        format!("1000 states, max |final - mean| {worst_final:.3e}, max per-step drift {worst_drift:.3e}, timeouts {timeouts}"),
    )
}

fn criterion_3_ca_exhaustive() -> Outcome {
    let cfg = CaConfig::default();
    let mut mismatches = 0;
    for bits in 0u32..512 {
        let votes: Vec<Candidate> = (0..9)
            .map(|i| if bits >> i & 1 == 1 { Candidate::Up } else { Candidate::Down })
            .collect();
        let e = Election::new(votes).unwrap();
        let got = match ca::run(&CaState::from_election(&e), &cfg).unwrap() {
            CaOutcome::Halted { final_value, .. } => ca::readout(final_value).ok().map(|x| x.winner),
            CaOutcome::Timeout { .. } => None,
        };
        if got != Some(true_majority(&e).winner) {
            mismatches += 1;
        }
    }
    (mismatches == 0, format!("512 states at n=9 r=1, mismatches {mismatches}"))
}

fn criterion_4_ca_halt_trends() -> Outcome {
    let by_n: Vec<(usize, f64)> = sweep_n()
        .iter()
        .filter(|p| [25, 49, 99, 199, 399].contains(&p.n))
        .map(|p| (p.n, p.mean_halt_step))
        .collect();
    let cfg = ExperimentConfig { seed: ROOT_SEED ^ 4, ..ExperimentConfig::default() };
    let by_r: Vec<(usize, f64)> = harness::run_ca_sweep(&cfg, &harness::sweep_r_points(), 100)
        .unwrap()
        .1
        .iter()
        .map(|p| (p.r, p.mean_halt_step))
        .collect();
    let up = by_n.len() == 5 && by_n.windows(2).all(|w| w[1].1 > w[0].1);
    let down = by_r.len() == 8 && by_r.windows(2).all(|w| w[1].1 < w[0].1);
    let fmt = |v: &[(usize, f64)]| v.iter().map(|(k, m)| format!("{k}:{m:.0}")).collect::<Vec<_>>().join(" ");
    (up && down, format!("mean halt by n [{}], by r at n=199 [{}]", fmt(&by_n), fmt(&by_r)))
}

fn batch(voters: usize, runs: usize, seed: u64) -> (Vec<RunRecord>, BatchSummary) {
    let cfg = ExperimentConfig { voters, runs, seed, ..ExperimentConfig::default() };
    run_agent_batch(&cfg).unwrap()
}

fn nine_voter_batch() -> &'static (Vec<RunRecord>, BatchSummary) {
    static CELL: OnceLock<(Vec<RunRecord>, BatchSummary)> = OnceLock::new();
    CELL.get_or_init(|| batch(9, 30, ROOT_SEED ^ 5))
}

fn failure_tally(recs: &[RunRecord]) -> String {
    let mut reasons: Vec<String> = recs
        .iter()
        .filter_map(|r| match r.outcome {
            harness::RunOutcome::Failed { reason, .. } => Some(reason.to_string()),
            harness::RunOutcome::Halted(_) => None,
        })
        .collect();
    reasons.sort();
    reasons.dedup_by(|a, b| a == b);
    reasons.join("/")
}

fn criterion_5_agent_accuracy() -> Outcome {
    let (recs, s) = nine_voter_batch();
    let ok = s.correct_winners >= 28
        && s.mean_abs_error_pct <= 3.0
        && s.pearson_r.is_some_and(|r| r >= 0.95);
    (
        ok,
        format!(
            "30 runs n=9: correct {}, failed {} [{}], mean abs error {:.2}%, max {:.2}%, r {:?}, duplicates {}",
            s.correct_winners,
            s.failures,
            failure_tally(recs),
            s.mean_abs_error_pct,
            s.max_abs_error_pct,
            s.pearson_r,
            s.duplicate_elections
        ),
    )
}

fn criterion_6_agent_scaling() -> Outcome {
    let (_, s9) = nine_voter_batch();
    let (recs, s19) = batch(19, 10, ROOT_SEED ^ 6);
    let within = |m: f64, target: f64| m >= 0.3 * target && m <= 3.0 * target;
    let ok = s19.correct_winners >= 9
        && s19.mean_halt_step > s9.mean_halt_step
        && within(s9.mean_halt_step, 58_000.0)
        && within(s19.mean_halt_step, 175_000.0);
    (
        ok,
        format!(
            "10 runs n=19: correct {}, failed {} [{}], mean halt {:.0} vs n=9 mean halt {:.0}",
            s19.correct_winners,
            s19.failures,
            failure_tally(&recs),
            s19.mean_halt_step,
            s9.mean_halt_step
        ),
    )
}

fn criterion_7_agent_time_series() -> Outcome {
    let (recs, _) = nine_voter_batch();
    let enc = EncodingParams::default();
    let two_a = 2.0 * enc.amplitude as f64;
    let start_ok = recs.iter().all(|r| {
        let t = r.samples[0].thickness_range;
        t >= two_a && t <= two_a + enc.band_width as f64
    });
    let halted: Vec<&RunRecord> = recs.iter().filter(|r| r.verdict().is_some()).collect();
    let shape_ok = halted.iter().all(|r| {
        let peak = r.samples.iter().map(|s| s.population).max().unwrap();
        let last = r.samples.last().unwrap();
        (last.population as f64) <= 0.8 * peak as f64 && last.thickness_range <= 10.0
    });
    (
        start_ok && !halted.is_empty() && shape_ok,
        format!(
            "step-0 thickness near 2A: {start_ok}; halted runs {}/{}; peak-then-fall and thin at halt: {shape_ok}",
            halted.len(),
            recs.len()
        ),
    )
}

fn criterion_8_engine_invariants() -> Outcome {
    let enc = EncodingParams::default();
    let params = AgentParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(ROOT_SEED ^ 8);
    let e = Election::random(9, &mut rng).unwrap();
    let band = StimulusPolyline::build(&e, &enc).unwrap().band(&enc);
    let ps = seed_population(&band, enc.population, &mut rng).unwrap();
    let mut w = WorldState::new(enc.arena_width, enc.arena_height, rng).unwrap();
    w.add_particles(ps).unwrap();
    let mut problems = Vec::new();
    for t in 0..120u64 {
        let before = w.field.total();
        let stimulus = if t < enc.hold_steps {
            w.hold_step(&band, enc.stimulus_amount, &params).unwrap();
            enc.stimulus_amount * band.len() as f64
        } else {
            w.scheduler_step(&params);
            0.0
        };
        let moves = w.last_stats().moves as f64;
        let want = (before + stimulus + params.deposit_amount * moves) * (1.0 - params.decay_rate);
        if (w.field.total() - want).abs() > 1e-9 * want.max(1.0) {
            problems.push(format!("step {t}: total {} expected {want}", w.field.total()));
        }
        if w.field.min_value() < 0.0 {
            problems.push(format!("step {t}: negative trail"));
        }
        if let Err(err) = w.check_occupancy() {
            problems.push(format!("step {t}: {err}"));
        }
    }
    let csv = |seed| {
        let cfg = ExperimentConfig { seed, max_steps: 300, ..ExperimentConfig::default() };
        let rec = run_agent_experiment(&cfg, 3, None, None).unwrap();
        let mut buf = Vec::new();
        write_samples(&mut buf, &cfg, &rec).unwrap();
        buf
    };
    let (a, b, c) = (csv(11), csv(11), csv(12));
    if a != b {
        problems.push("same seed gave different sample CSV bytes".into());
    }
    if a == c {
        problems.push("different seeds gave identical sample CSV bytes".into());
    }
    (problems.is_empty(), format!("120 steps checked, determinism over 300 steps; problems {problems:?}"))
}

fn criterion_9_readout_suite() -> Outcome {
    let p = EncodingParams::default();
    let (c, a) = (p.centre_y(), p.amplitude as f64);
    let mut ok = true;
    for k in 1..=400 {
        let d = k as f64 * 0.25;
        let up = readout(c - d, &p).unwrap();
        let down = readout(c + d, &p).unwrap();
        ok &= up.winner == Candidate::Up && down.winner == Candidate::Down;
        ok &= up.majority_pct == down.majority_pct;
    }
    ok &= readout(c - a, &p).unwrap().majority_pct == 100.0;
    ok &= readout(c + 2.0 * a, &p).unwrap().majority_pct == 100.0;
    ok &= LinearMapping.majority_pct(3.0 * a, a) == 100.0;
    ok &= readout(c, &p).is_err();
    let table = [
        ("C,C,C,C,T,C,C,C,C", Candidate::Up, 800.0 / 9.0),
        ("C,T,C,C,T,C,T,C,C", Candidate::Up, 600.0 / 9.0),
        ("T,T,C,T,T,C,T,C,T", Candidate::Down, 600.0 / 9.0),
        ("C,T,C,T,T,C,T,C,C", Candidate::Up, 500.0 / 9.0),
    ];
    for (votes, winner, pct) in table {
        let t = true_majority(&votes.parse().unwrap());
        ok &= t.winner == winner && t.majority_pct == pct;
    }
    let rounded = |s: &str| (true_majority(&s.parse().unwrap()).majority_pct * 100.0).round() / 100.0;
    ok &= rounded("C,C,C,C,T,C,C,C,C") == 88.89 && rounded("C,T,C,C,T,C,T,C,C") == 66.67;
    (ok, "mirror symmetry, saturation, indeterminate centre, vote-count table".into())
}

fn main() {
    let criteria: [(u32, fn() -> Outcome); 9] = [
        (1, criterion_1_ca_accuracy),
        (2, criterion_2_ca_conservation),
        (3, criterion_3_ca_exhaustive),
        (4, criterion_4_ca_halt_trends),
        (5, criterion_5_agent_accuracy),
        (6, criterion_6_agent_scaling),
        (7, criterion_7_agent_time_series),
        (8, criterion_8_engine_invariants),
        (9, criterion_9_readout_suite),
    ];
    // Cargo forwards its own flags; only bare numbers select criteria.
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    for (n, f) in criteria {
        if !wanted.is_empty() && !wanted.contains(&n) {
            continue;
        }
        let (ok, detail) = f();
        println!("criterion {n}: {}: {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            failed.push(n);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}

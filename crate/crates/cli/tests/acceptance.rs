//! Acceptance run: one PASS/FAIL line per criterion.

use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde_json::json;
use tempfile::TempDir;
use wiretap_chain::experiments::{self, rate_ramp, rate_ramp_with_rate, RateCheck};
use wiretap_chain::leakage_audit::{
    AUDIT_TOLERANCE, DEFAULT_BOOTSTRAP_RESAMPLES, DEFAULT_JOINT_STATE_CAP,
};
use wiretap_chain::seeding::stream_rng;
use wiretap_chain::*;

const BIN: &str = env!("CARGO_BIN_EXE_wiretap-chain");

const CLOSED_FORM_TOL: f64 = 1e-9;
const RATE_TOL: f64 = 1e-3;
const EXACT_TOL: f64 = 1e-9;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn h2(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
}

fn cli(args: &[&str]) -> (i32, String) {
    let out = Command::new(BIN).args(args).output().expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
    )
}

fn printed(text: &str, key: &str) -> Option<f64> {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))?
        .parse()
        .ok()
}

fn gaussian_closed_forms() -> Outcome {
    let (code, text) = cli(&[
        "gaussian",
        "--power",
        "3",
        "--sigma-b-sq",
        "1",
        "--sigma-e-sq",
        "3",
    ]);
    let c_oracle = 0.5 * (1.0f64 + 3.0).log2();
    let rs_oracle = c_oracle - 0.5 * (1.0f64 + 1.0).log2();
    let lib = gaussian_rates(&GaussianParams {
        power: 3.0,
        sigma_b_sq: 1.0,
        sigma_e_sq: 3.0,
    });
    let exact = lib.as_ref().is_ok_and(|p| {
        (p.main_capacity - c_oracle).abs() <= CLOSED_FORM_TOL
            && (p.secrecy_capacity - rs_oracle).abs() <= CLOSED_FORM_TOL
            && p.lambda == 2
    });
    let lines = text.contains("C=1.000000\n")
        && text.contains("R_s=0.500000\n")
        && text.contains("lambda=2\n");
    outcome(
        code == 0 && exact && lines,
        text.lines().take(3).collect::<Vec<_>>().join(" "),
    )
}

fn discrete_rates() -> Outcome {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bsc.json");
    let cfg = serde_json::to_string(&ChannelConfig::bsc_pair(0.1, 0.1)).unwrap();
    fs::write(&path, cfg).unwrap();
    let (code, text) = cli(&["rates", "--config", path.to_str().unwrap()]);
    let c_oracle = 1.0 - h2(0.1);
    let rs_oracle = h2(0.18) - h2(0.1);
    let lib = rate_profile(&Channel::bsc_pair(0.1, 0.1).unwrap(), 201, 60).unwrap();
    let pass = code == 0
        && (lib.main_capacity - c_oracle).abs() < RATE_TOL
        && (lib.secrecy_capacity - rs_oracle).abs() < RATE_TOL
        && lib.lambda == 2
        && printed(&text, "C").is_some_and(|c| (c - c_oracle).abs() < RATE_TOL)
        && printed(&text, "R_s").is_some_and(|r| (r - rs_oracle).abs() < RATE_TOL)
        && printed(&text, "lambda") == Some(2.0);
    outcome(
        pass,
        format!(
            "C={:.6} (oracle {c_oracle:.6}) R_s={:.6} (oracle {rs_oracle:.6}) lambda={}",
            lib.main_capacity, lib.secrecy_capacity, lib.lambda
        ),
    )
}

struct EnumCase {
    p: f64,
    q: f64,
    n: usize,
    lambda: usize,
    seed: u64,
}

fn enumeration_cases() -> Vec<EnumCase> {
    let mut cases = Vec::new();
    for (p, q) in [(0.1, 0.2), (0.05, 0.3)] {
        for n in [2, 3] {
            for lambda in [2, 3] {
                for seed in 0..10 {
                    cases.push(EnumCase {
                        p,
                        q,
                        n,
                        lambda,
                        seed,
                    });
                }
            }
        }
    }
    cases
}

const ENUM_SLOTS: usize = 3;

fn enumerate(case: &EnumCase) -> Joint {
    let ch = Channel::bsc_pair(case.p, case.q).unwrap();
    let s = SlotSchedule::with_lambda(case.lambda, 1, case.n, ENUM_SLOTS, None).unwrap();
    let cb = CodebookSet::build(
        &s,
        &InputDist::uniform(2),
        1,
        case.seed,
        &CodeLimits::default(),
    )
    .unwrap();
    build_joint(&ch, &cb, &s, ENUM_SLOTS, DEFAULT_JOINT_STATE_CAP).unwrap()
}

struct EnumResult {
    zeros: usize,
    worst_zero: f64,
    zero_failures: usize,
    bound_checks: usize,
    bound_failures: usize,
    worst_slack: f64,
    first_slot_gap: f64,
}

fn check_enumeration(case: &EnumCase) -> EnumResult {
    let joint = enumerate(case);
    let report = audit_all(&joint).unwrap();
    let worst_zero = report.zeros.values().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut bound_checks = 0;
    let mut bound_failures = 0;
    let mut worst_slack = f64::INFINITY;
    let mut first_slot_gap = 0.0f64;
    let single = joint.leakage(1, 1);
    for k in 1..=ENUM_SLOTS {
        for m in 1..=k {
            let sum: f64 = joint.wiretap_block_leakages(m).iter().sum();
            let l = joint.leakage(m, k);
            bound_checks += 1;
            if l > sum + EXACT_TOL {
                bound_failures += 1;
            }
            worst_slack = worst_slack.min(sum - l);
        }
        first_slot_gap = first_slot_gap.max((joint.leakage(1, k) - single).abs());
    }
    EnumResult {
        zeros: report.zeros.len(),
        worst_zero,
        zero_failures: report.zero_failures().len(),
        bound_checks,
        bound_failures,
        worst_slack,
        first_slot_gap,
    }
}

fn structural_zeros(results: &[EnumResult], elapsed: Duration) -> Outcome {
    let checked: usize = results.iter().map(|r| r.zeros).sum();
    let failures: usize = results.iter().map(|r| r.zero_failures).sum();
    let worst = results.iter().fold(0.0f64, |a, r| a.max(r.worst_zero));
    let pass = failures == 0 && worst <= AUDIT_TOLERANCE && elapsed < Duration::from_secs(120);
    outcome(
        pass,
        format!(
            "{} configs, {checked} zero terms, max |term| = {worst:.2e}, {failures} failures, {:.1}s",
            results.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn leakage_bounds(results: &[EnumResult]) -> Outcome {
    let checks: usize = results.iter().map(|r| r.bound_checks).sum();
    let failures: usize = results.iter().map(|r| r.bound_failures).sum();
    let slack = results
        .iter()
        .fold(f64::INFINITY, |a, r| a.min(r.worst_slack));
    let gap = results.iter().fold(0.0f64, |a, r| a.max(r.first_slot_gap));
    outcome(
        failures == 0 && gap <= EXACT_TOL,
        format!("{checks} bounds, min slack {slack:.2e}, {failures} failures; max |I(W1;Z^k) - I(W1;Z1)| = {gap:.2e}"),
    )
}

fn oracle_equivalence() -> Outcome {
    const TRANSCRIPTS: u64 = 20_000;
    let configs: Vec<(f64, f64, usize, u64)> = (0..10u64)
        .map(|i| {
            let p = 0.02 + 0.03 * (i % 4) as f64;
            let q = 0.1 + 0.05 * (i % 3) as f64;
            (p, q, 2 + (i % 2) as usize, 100 + i)
        })
        .collect();
    let results: Vec<(f64, bool)> = configs
        .par_iter()
        .map(|&(p, q, n, seed)| {
            let ch = Channel::bsc_pair(p, q).unwrap();
            let s = SlotSchedule::with_lambda(2, 1, n, 1, None).unwrap();
            let cb =
                CodebookSet::build(&s, &InputDist::uniform(2), 1, seed, &CodeLimits::default())
                    .unwrap();
            let block = exact_block_leakage(&cb.wiretap, &ch, &CodeLimits::default()).unwrap();
            let joint = build_joint(&ch, &cb, &s, 1, DEFAULT_JOINT_STATE_CAP).unwrap();
            let exact = joint.leakage(1, 1);
            let transcripts: Vec<_> = (0..TRANSCRIPTS)
                .map(|i| run_session(&ch, &s, &cb, 1, &mut stream_rng(seed, 1 << 20 | i)).unwrap())
                .collect();
            let est =
                empirical_leakage_estimate(&transcripts, 1, 1, DEFAULT_BOOTSTRAP_RESAMPLES, seed)
                    .unwrap();
            ((block - exact).abs(), est.contains(exact))
        })
        .collect();
    let worst = results.iter().fold(0.0f64, |a, r| a.max(r.0));
    let covered = results.iter().filter(|r| r.1).count();
    outcome(
        worst <= EXACT_TOL && covered >= 9,
        format!("max |block - joint| = {worst:.2e}; interval covers exact value in {covered}/10"),
    )
}

fn error_propagation() -> Outcome {
    let start = Instant::now();
    let mut config = ExperimentConfig::new(ChannelConfig::bsc_pair(0.1, 0.3), 8, 3);
    config.lambda = Some(2);
    config.trials = 10_000;
    config.seed = 2024;
    let prepared = experiments::prepare(&config, RateCheck::Enforce).unwrap();
    let plain = experiments::simulate(&config, &prepared).unwrap();
    let flagged: Vec<usize> = plain
        .errors
        .iter()
        .filter(|r| r.flag)
        .map(|r| r.slot)
        .collect();

    config.slots = 6;
    config.restart_period = Some(3);
    let prepared = experiments::prepare(&config, RateCheck::Enforce).unwrap();
    let restarted = experiments::simulate(&config, &prepared).unwrap();
    let restart_ok = restarted.restart.len() == 3 && restarted.restart.iter().all(|c| c.pass);
    let zs: Vec<String> = restarted
        .restart
        .iter()
        .map(|c| format!("{:.2}", c.z))
        .collect();
    let elapsed = start.elapsed();
    let p: Vec<String> = plain
        .errors
        .iter()
        .map(|r| format!("{:.4}<={:.4}", r.p_err, r.bound + 3.0 * r.sigma))
        .collect();
    outcome(
        flagged.is_empty() && restart_ok && elapsed < Duration::from_secs(120),
        format!(
            "eps={:.4} delta={:.4}; slots {}; restart z = [{}]; {:.1}s",
            plain.components.epsilon(),
            plain.components.delta().estimate(),
            p.join(", "),
            zs.join(", "),
            elapsed.as_secs_f64()
        ),
    )
}

fn rate_ramp_check() -> Outcome {
    let gaussian = gaussian_rates(&GaussianParams {
        power: 3.0,
        sigma_b_sq: 1.0,
        sigma_e_sq: 3.0,
    })
    .unwrap();
    let rs = gaussian.secrecy_capacity;
    let want = [rs, rs, 2.0 * rs, 2.0 * rs, 2.0 * rs, 2.0 * rs];
    let ramp = rate_ramp(&gaussian, want.len());
    let pattern = ramp
        .iter()
        .zip(want)
        .all(|(r, w)| (r.rate - w).abs() < 1e-12);

    let lambda = 2;
    let n = 12;
    let ch = Channel::bsc_pair(0.0, 0.5).unwrap();
    let s = SlotSchedule::with_lambda(lambda, 2, n, 8, Some(5)).unwrap();
    // Noiseless decoding still fails when two codewords collide.
    let run = (0..20u64).find_map(|seed| {
        let cb = CodebookSet::build(&s, &InputDist::uniform(2), 1, seed, &CodeLimits::default())
            .unwrap();
        let t = run_session(&ch, &s, &cb, 8, &mut stream_rng(seed, 0)).unwrap();
        t.error_indicators()
            .iter()
            .all(|&e| !e)
            .then_some((seed, t))
    });
    let error_free = run.is_some();
    let (seed, t) = run.expect("an error-free noiseless session");
    let sim_ramp = rate_ramp_with_rate(2.0 / n as f64, lambda, 8, Some(5));
    let throughput = t.slots.iter().zip(&sim_ramp).all(|(rec, row)| {
        let predicted = (row.rate * (row.minislots * n) as f64).round() as usize;
        rec.plan.mini_slots == row.minislots && rec.delivered_bits() == predicted
    });

    let bsc = rate_profile(&Channel::bsc_pair(0.1, 0.1).unwrap(), 201, 60).unwrap();
    let cap = (bsc.main_capacity / bsc.secrecy_capacity).floor() * bsc.secrecy_capacity;
    let peak = rate_ramp(&bsc, 12)
        .iter()
        .fold(0.0f64, |a, r| a.max(r.rate));
    let capped = !bsc.ratio_is_integer && (peak - cap).abs() < 1e-12 && peak < bsc.main_capacity;
    outcome(
        pattern && error_free && throughput && capped,
        format!(
            "gaussian ramp {:?}; error-free throughput matches: {} (seed {seed}); BSC peak {peak:.4} = floor(C/R_s) R_s {cap:.4} < C {:.4}",
            ramp.iter().map(|r| format!("{:.2}", r.rate)).collect::<Vec<_>>(),
            error_free && throughput,
            bsc.main_capacity
        ),
    )
}

type Files = Vec<(String, Vec<u8>)>;
type RunOutput = (i32, String, Files);

fn read_all(dir: &Path) -> Files {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let dir = TempDir::new().unwrap();
    let channel = ChannelConfig::bsc_pair(0.05, 0.3);
    let sim = json!({ "channel": channel, "n": 12, "rate_bits": 2, "bin_bits": 1, "slots": 5, "lambda": 2, "trials": 2000, "seed": 31 });
    let leak = json!({ "channel": channel, "n": 2, "rate_bits": 1, "bin_bits": 1, "slots": 3, "lambda": 2, "seed": 31 });
    let sim_path = dir.path().join("sim.json");
    let leak_path = dir.path().join("leak.json");
    fs::write(&sim_path, sim.to_string()).unwrap();
    fs::write(&leak_path, leak.to_string()).unwrap();
    let mut identical = 0;
    let mut total = 0;
    for (cmd, cfg) in [
        ("simulate", &sim_path),
        ("leakage", &leak_path),
        ("schedule", &sim_path),
    ] {
        let runs: Vec<RunOutput> = ["1", "4"]
            .iter()
            .enumerate()
            .map(|(i, threads)| {
                let out = dir.path().join(format!("{cmd}{i}"));
                let (code, stdout) = cli(&[
                    "--threads",
                    threads,
                    cmd,
                    "--config",
                    cfg.to_str().unwrap(),
                    "--out",
                    out.to_str().unwrap(),
                ]);
                let stdout = stdout.replace(out.to_str().unwrap(), "<out>");
                (code, stdout, read_all(&out))
            })
            .collect();
        total += 1;
        if runs[0].0 == 0 && runs[0] == runs[1] && !runs[0].2.is_empty() {
            identical += 1;
        }
    }
    outcome(
        identical == total,
        format!("{identical}/{total} commands byte-identical across reruns"),
    )
}

fn main() -> ExitCode {
    let mut lines = Vec::new();
    let mut record = |id: usize, name: &str, o: Outcome| {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {id} {tag} {name}: {}", o.detail);
        lines.push(o.pass);
    };

    let start = Instant::now();
    record(1, "gaussian closed forms", gaussian_closed_forms());
    let t1 = start.elapsed();
    if t1 > Duration::from_secs(1) {
        println!("  note: criterion 1 took {:.2}s", t1.as_secs_f64());
    }
    let start = Instant::now();
    let rates = discrete_rates();
    let slow = start.elapsed() >= Duration::from_secs(5);
    record(
        2,
        "discrete rates",
        outcome(rates.pass && !slow, rates.detail),
    );

    let start = Instant::now();
    let results: Vec<EnumResult> = enumeration_cases()
        .par_iter()
        .map(check_enumeration)
        .collect();
    let elapsed = start.elapsed();
    record(3, "structural zeros", structural_zeros(&results, elapsed));
    record(4, "leakage bounds", leakage_bounds(&results));
    record(5, "oracle equivalence", oracle_equivalence());
    record(6, "error propagation", error_propagation());
    record(7, "rate ramp", rate_ramp_check());
    record(8, "determinism", determinism());

    let passed = lines.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria passed", lines.len());
    if passed == lines.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

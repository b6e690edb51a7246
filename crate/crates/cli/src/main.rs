//! `wiretap-chain` command-line front end.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wiretap_chain::experiments::{
    self, cumulative_rate, rate_ramp_with_rate, write_ramp_csv, RateCheck,
};
use wiretap_chain::infotheory::{DEFAULT_GRID_STEPS, DEFAULT_REFINE_ITERS};
use wiretap_chain::{
    gaussian_rates, rate_profile, Channel, ChannelConfig, Error, ExperimentConfig, GaussianParams,
    Profile,
};

const EXIT_USAGE: u8 = 1;
const EXIT_DOMAIN: u8 = 2;

#[derive(Parser)]
#[command(
    name = "wiretap-chain",
    version,
    about = "Key-chained wiretap coding: rates, schedules, simulation and leakage audits"
)]
struct Cli {
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Main-channel capacity, secrecy capacity and lambda of a channel file.
    Rates {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = DEFAULT_GRID_STEPS)]
        grid_steps: usize,
        #[arg(long, default_value_t = DEFAULT_REFINE_ITERS)]
        refine_iters: usize,
    },
    /// Closed-form rates of a Gaussian wiretap channel.
    Gaussian {
        #[arg(long, allow_negative_numbers = true)]
        power: f64,
        #[arg(long, allow_negative_numbers = true)]
        sigma_b_sq: f64,
        #[arg(long, allow_negative_numbers = true)]
        sigma_e_sq: f64,
    },
    /// Slot schedule and rate ramp of an experiment.
    Schedule {
        #[command(flatten)]
        run: RunArgs,
        /// Also write ramp.csv here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte-Carlo error propagation; writes ramp.csv, errors.csv and a manifest.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Exact leakage audit; writes leakage.json and a manifest.
    Leakage {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config JSON.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl RunArgs {
    fn load(&self) -> Result<ExperimentConfig, Failure> {
        let mut config = ExperimentConfig::from_path(&self.config)?;
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        Ok(config)
    }
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Lib(e) if e.is_domain() => EXIT_DOMAIN,
            Failure::Lib(_) => EXIT_USAGE,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(msg) => write!(f, "usage error: {msg}"),
            Failure::Lib(e) => write!(f, "{e}"),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(failure) => {
            eprintln!("wiretap-chain: {failure}");
            ExitCode::from(failure.code())
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Failure> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(Failure::Usage("--threads must be positive".into()));
        }
        pool = pool.num_threads(threads);
    }
    let pool = pool
        .build()
        .map_err(|e| Failure::Usage(format!("thread pool: {e}")))?;
    pool.install(|| dispatch(cli.command))
}

fn dispatch(command: Command) -> Result<ExitCode, Failure> {
    match command {
        Command::Rates {
            config,
            grid_steps,
            refine_iters,
        } => cmd_rates(&config, grid_steps, refine_iters),
        Command::Gaussian {
            power,
            sigma_b_sq,
            sigma_e_sq,
        } => cmd_gaussian(power, sigma_b_sq, sigma_e_sq),
        Command::Schedule { run, out } => cmd_schedule(&run, out.as_deref()),
        Command::Simulate { run, trials, out } => cmd_simulate(&run, trials, &out),
        Command::Leakage { run, out } => cmd_leakage(&run, &out),
    }
}

fn print_profile(profile: &Profile) {
    println!("C={:.6}", profile.main_capacity);
    println!("R_s={:.6}", profile.secrecy_capacity);
    println!("lambda={}", profile.lambda);
    println!("ratio_is_integer={}", profile.ratio_is_integer);
}

fn fmt_law(law: &[f64]) -> String {
    let parts: Vec<String> = law.iter().map(|p| format!("{p:.6}")).collect();
    format!("[{}]", parts.join(","))
}

fn cmd_rates(path: &Path, grid_steps: usize, refine_iters: usize) -> Result<ExitCode, Failure> {
    let channel: Channel = ChannelConfig::from_path(path)?.build()?;
    let profile = rate_profile(&channel, grid_steps, refine_iters)?;
    print_profile(&profile);
    if let Some(law) = &profile.optimizer_c {
        println!("optimizer_c={}", fmt_law(law.probs()));
    }
    if let Some(law) = &profile.optimizer_rs {
        println!("optimizer_rs={}", fmt_law(law.probs()));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_gaussian(power: f64, sigma_b_sq: f64, sigma_e_sq: f64) -> Result<ExitCode, Failure> {
    for (flag, v) in [
        ("--power", power),
        ("--sigma-b-sq", sigma_b_sq),
        ("--sigma-e-sq", sigma_e_sq),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Failure::Usage(format!("{flag} must be positive, got {v}")));
        }
    }
    let profile = gaussian_rates(&GaussianParams {
        power,
        sigma_b_sq,
        sigma_e_sq,
    })?;
    print_profile(&profile);
    Ok(ExitCode::SUCCESS)
}

fn cmd_schedule(run: &RunArgs, out: Option<&Path>) -> Result<ExitCode, Failure> {
    let config = run.load()?;
    let prepared = experiments::prepare(&config, RateCheck::Skip)?;
    let s = &prepared.schedule;
    if let Some(p) = &prepared.profile {
        print_profile(p);
    }
    println!(
        "n={} rate_bits={} lambda={} restart_period={}",
        s.n, s.rate_bits, s.lambda, s.restart_period
    );
    println!("slot,position,minislots,wiretap_msgs,keyed_msgs,key_bits,message_bits,rate");
    for p in &s.slots {
        println!(
            "{},{},{},{},{},{},{},{:.6}",
            p.slot,
            p.position,
            p.mini_slots,
            p.wiretap_msgs,
            p.keyed_msgs,
            p.key_bits,
            p.message_bits,
            p.slot_rate
        );
    }
    let ramp = rate_ramp_with_rate(
        s.rate_bits as f64 / s.n as f64,
        s.lambda,
        config.slots,
        Some(s.restart_period),
    );
    let cumulative = cumulative_rate(&ramp);
    println!(
        "cumulative_rate={:.6}",
        cumulative.last().copied().unwrap_or(0.0)
    );
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)
            .map_err(|e| Failure::Usage(format!("{}: {e}", dir.display())))?;
        write_ramp_csv(&dir.join("ramp.csv"), &ramp)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_simulate(run: &RunArgs, trials: Option<usize>, out: &Path) -> Result<ExitCode, Failure> {
    let mut config = run.load()?;
    if let Some(t) = trials {
        config.trials = t;
    }
    config.validate()?;
    let prepared = experiments::prepare(&config, RateCheck::Enforce)?;
    let result = experiments::simulate(&config, &prepared)?;
    let files = experiments::write_simulation(out, &config, &prepared, &result)?;
    println!(
        "epsilon={:.6} delta={:.6}",
        result.components.epsilon(),
        result.components.delta().estimate()
    );
    for row in &result.errors {
        println!(
            "slot {}: p_err={:.6} [{:.6}, {:.6}] bound={:.6}{}",
            row.slot,
            row.p_err,
            row.ci_lo,
            row.ci_hi,
            row.bound,
            if row.flag { " FLAG" } else { "" }
        );
    }
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_leakage(run: &RunArgs, out: &Path) -> Result<ExitCode, Failure> {
    let config = run.load()?;
    let prepared = experiments::prepare(&config, RateCheck::Skip)?;
    let report = experiments::leakage_audit(&config, &prepared)?;
    let files = experiments::write_leakage(out, &config, &prepared, &report)?;
    for f in files {
        println!("wrote {}", f.display());
    }
    let zero_failures = report.zero_failures();
    let relation_failures = report.relation_failures();
    println!(
        "structural zeros: {} checked, {} failed",
        report.zeros.len(),
        zero_failures.len()
    );
    println!(
        "relations: {} checked, {} failed",
        report.relations.len(),
        relation_failures.len()
    );
    for key in relation_failures {
        println!("relation failed: {key}");
    }
    if zero_failures.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        for key in &zero_failures {
            eprintln!("nonzero: {key}");
        }
        Ok(ExitCode::from(EXIT_DOMAIN))
    }
}

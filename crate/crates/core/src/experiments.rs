//! Monte-Carlo harness: component error rates, per-slot error curves,
//! restart checks, rate ramps, and deterministic CSV / JSON emission.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::chain_protocol::{ChannelPolicy, CodebookSet, Session, SlotSchedule};
use crate::channel::{ChannelConfig, ChannelModel};
use crate::error::{Error, Result};
use crate::infotheory::{
    rate_profile, InputDistribution, RateProfile, DEFAULT_GRID_STEPS, DEFAULT_REFINE_ITERS,
};
use crate::leakage_audit::{audit_all, build_joint, LeakageReport, DEFAULT_JOINT_STATE_CAP};
use crate::scalar::Real;
use crate::seeding::{derive_seed, stream_rng, COMPONENT_ERRORS_STREAM, KEYED_CODE_BASE, TRIAL_BASE, WIRETAP_CODE_STREAM};
use crate::wiretap_code::{default_bin_bits, CodeLimits, DEFAULT_MAX_BLOCKLENGTH};

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959963984540054;
pub const MIN_COMPONENT_TRIALS: usize = 100;
/// Standard deviations of slack in the error-propagation bound.
pub const BOUND_SIGMAS: f64 = 3.0;

pub const RAMP_HEADER: &str = "# wiretap-chain ramp v1";
pub const ERRORS_HEADER: &str = "# wiretap-chain errors v1";
pub const MANIFEST_VERSION: u32 = 1;

/// Count of events over independent trials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Proportion {
    pub events: u64,
    pub trials: u64,
}

impl Proportion {
    pub fn new(events: u64, trials: u64) -> Self {
        Proportion { events, trials }
    }

    pub fn estimate(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.events as f64 / self.trials as f64
        }
    }

    /// Standard error of the estimate.
    pub fn std_err(&self) -> f64 {
        let p = self.estimate();
        (p * (1.0 - p) / self.trials.max(1) as f64).sqrt()
    }

    /// Wilson score interval at normal quantile `z`.
    pub fn wilson(&self, z: f64) -> (f64, f64) {
        let n = self.trials as f64;
        if n == 0.0 {
            return (0.0, 1.0);
        }
        let p = self.estimate();
        let z2 = z * z;
        let denom = 1.0 + z2 / n;
        let center = (p + z2 / (2.0 * n)) / denom;
        let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
        let lo = if self.events == 0 { 0.0 } else { (center - half).max(0.0) };
        let hi = if self.events == self.trials { 1.0 } else { (center + half).min(1.0) };
        (lo, hi)
    }

    pub fn wilson95(&self) -> (f64, f64) {
        self.wilson(Z_95)
    }
}

/// Pooled two-proportion z statistic; 0 when both samples are degenerate.
pub fn two_proportion_z(a: &Proportion, b: &Proportion) -> f64 {
    let pooled = (a.events + b.events) as f64 / (a.trials + b.trials) as f64;
    let var = pooled * (1.0 - pooled) * (1.0 / a.trials as f64 + 1.0 / b.trials as f64);
    if var == 0.0 {
        0.0
    } else {
        (a.estimate() - b.estimate()) / var.sqrt()
    }
}

/// Monte-Carlo error rates of the constituent codes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentErrors {
    /// Wiretap code message error (`epsilon`).
    pub wiretap: Proportion,
    /// Per key width channel-code error.
    pub keyed: BTreeMap<usize, Proportion>,
}

impl ComponentErrors {
    pub fn epsilon(&self) -> f64 {
        self.wiretap.estimate()
    }

    /// Worst keyed code (`delta`); zero when the schedule has none.
    pub fn delta(&self) -> Proportion {
        self.keyed
            .values()
            .copied()
            .max_by(|a, b| a.estimate().total_cmp(&b.estimate()))
            .unwrap_or(Proportion::new(0, self.wiretap.trials))
    }
}

/// Estimates wiretap and keyed-code message error rates with uniform messages.
pub fn measure_component_errors<T: Real, R: Rng + ?Sized>(
    channel: &ChannelModel<T>,
    codebooks: &CodebookSet,
    trials: usize,
    rng: &mut R,
) -> Result<ComponentErrors> {
    if trials < MIN_COMPONENT_TRIALS {
        return Err(Error::InsufficientSamples {
            got: trials,
            needed: MIN_COMPONENT_TRIALS,
        });
    }
    let book = &codebooks.wiretap;
    let mut errors = 0;
    for _ in 0..trials {
        let w = rng.random_range(0..book.num_bins());
        let x = book.encode(w, rng)?;
        let (y, _) = channel.sample_block(&x, rng)?;
        errors += (book.decode(&y, channel)? != w) as u64;
    }
    let wiretap = Proportion::new(errors, trials as u64);
    let mut keyed = BTreeMap::new();
    for (&width, code) in &codebooks.keyed {
        let mut errors = 0;
        for _ in 0..trials {
            let c = rng.random_range(0..code.num_codewords());
            let (y, _) = channel.sample_block(code.codeword(c), rng)?;
            errors += (code.decode(&y, channel)? != c) as u64;
        }
        keyed.insert(width, Proportion::new(errors, trials as u64));
    }
    Ok(ComponentErrors { wiretap, keyed })
}

/// One row of `errors.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub slot: usize,
    pub errors: Proportion,
    pub p_err: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// `j * epsilon + (j - 1) * delta` with `j` the position in the
    /// restart window.
    pub bound: f64,
    pub sigma: f64,
    /// Set when `p_err > bound + 3 sigma`.
    pub flag: bool,
}

/// Runs `trials` independent sessions; trial `i` draws from stream
/// `TRIAL_BASE + i` of `seed`.
pub fn slot_error_counts<T: Real>(
    session: &Session<'_, T>,
    slots: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<Proportion>> {
    let per_trial: Vec<Vec<bool>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, TRIAL_BASE + i as u64);
            session.run(slots, &mut rng).map(|t| t.error_indicators())
        })
        .collect::<Result<_>>()?;
    let mut counts = vec![0u64; slots];
    for row in &per_trial {
        for (c, &e) in counts.iter_mut().zip(row) {
            *c += e as u64;
        }
    }
    Ok(counts
        .into_iter()
        .map(|e| Proportion::new(e, trials as u64))
        .collect())
}

/// Per-slot error table against the union bound.
pub fn error_propagation_curve<T: Real>(
    session: &Session<'_, T>,
    components: &ComponentErrors,
    slots: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<ErrorRow>> {
    let counts = slot_error_counts(session, slots, trials, seed)?;
    let eps = components.wiretap;
    let delta = components.delta();
    Ok(counts
        .into_iter()
        .zip(&session.schedule().slots)
        .map(|(errors, plan)| {
            let j = plan.position as f64;
            let bound = j * eps.estimate() + (j - 1.0) * delta.estimate();
            let sigma = (errors.std_err().powi(2)
                + (j * eps.std_err()).powi(2)
                + ((j - 1.0) * delta.std_err()).powi(2))
            .sqrt();
            let (ci_lo, ci_hi) = errors.wilson95();
            ErrorRow {
                slot: plan.slot,
                errors,
                p_err: errors.estimate(),
                ci_lo,
                ci_hi,
                bound,
                sigma,
                flag: errors.estimate() > bound + BOUND_SIGMAS * sigma,
            }
        })
        .collect())
}

/// Slot `k + period` compared with slot `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RestartCheck {
    pub slot: usize,
    pub twin: usize,
    pub z: f64,
    pub pass: bool,
}

/// Two-proportion tests at 95% between each slot after the first restart
/// and its counterpart in the first window.
pub fn restart_equivalence(rows: &[ErrorRow], period: usize) -> Vec<RestartCheck> {
    rows.iter()
        .filter(|r| r.slot > period)
        .map(|r| {
            let twin = (r.slot - 1) % period + 1;
            let z = two_proportion_z(&r.errors, &rows[twin - 1].errors);
            RestartCheck {
                slot: r.slot,
                twin,
                z,
                pass: z.abs() <= Z_95,
            }
        })
        .collect()
}

/// One row of `ramp.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RampRow {
    pub slot: usize,
    pub minislots: usize,
    pub rate: f64,
}

/// Ideal per-slot secret rate of a profile: `R_s`, then `k R_s / 2` up to
/// slot `lambda`, then `lambda R_s`.
pub fn rate_ramp<T: Real>(profile: &RateProfile<T>, slots: usize) -> Vec<RampRow> {
    rate_ramp_with_rate(
        profile.secrecy_capacity.to_f64().unwrap(),
        profile.lambda as usize,
        slots,
        None,
    )
}

/// Ramp for a per-block rate `rate`, restarting every `restart` slots.
pub fn rate_ramp_with_rate(
    rate: f64,
    lambda: usize,
    slots: usize,
    restart: Option<usize>,
) -> Vec<RampRow> {
    let period = restart.unwrap_or(usize::MAX);
    (1..=slots)
        .map(|slot| {
            let pos = (slot - 1) % period + 1;
            let (minislots, rate) = if pos == 1 {
                (1, rate)
            } else if pos <= lambda {
                (2, pos as f64 * rate / 2.0)
            } else {
                (1, lambda as f64 * rate)
            };
            RampRow {
                slot,
                minislots,
                rate,
            }
        })
        .collect()
}

/// Running mean of the ramp rates weighted by channel uses.
pub fn cumulative_rate(rows: &[RampRow]) -> Vec<f64> {
    let mut bits = 0.0;
    let mut uses = 0.0;
    rows.iter()
        .map(|r| {
            bits += r.rate * r.minislots as f64;
            uses += r.minislots as f64;
            bits / uses
        })
        .collect()
}

/// Where an experiment's channel comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ChannelSource {
    Path(PathBuf),
    Inline(ChannelConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSelection {
    pub ramp: bool,
    pub errors: bool,
    pub codebooks: bool,
}

impl Default for OutputSelection {
    fn default() -> Self {
        OutputSelection {
            ramp: true,
            errors: true,
            codebooks: true,
        }
    }
}

fn default_slots() -> usize {
    3
}

fn default_trials() -> usize {
    1000
}

fn default_grid_steps() -> usize {
    DEFAULT_GRID_STEPS
}

fn default_refine_iters() -> usize {
    DEFAULT_REFINE_ITERS
}

fn default_max_blocklength() -> usize {
    DEFAULT_MAX_BLOCKLENGTH
}

fn default_cap() -> u64 {
    DEFAULT_JOINT_STATE_CAP as u64
}

/// JSON experiment description shared by `simulate` and `leakage`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub channel: ChannelSource,
    pub n: usize,
    pub rate_bits: usize,
    /// Randomization bits per bin; defaults to `round(n I(X;Z))`.
    #[serde(default)]
    pub bin_bits: Option<usize>,
    #[serde(default = "default_slots")]
    pub slots: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    /// Defaults to `10 lambda`.
    #[serde(default)]
    pub restart_period: Option<usize>,
    /// Overrides the `lambda` derived from the channel.
    #[serde(default)]
    pub lambda: Option<usize>,
    /// Codebook input law; uniform when absent.
    #[serde(default)]
    pub input_distribution: Option<Vec<f64>>,
    #[serde(default = "default_grid_steps")]
    pub grid_steps: usize,
    #[serde(default = "default_refine_iters")]
    pub refine_iters: usize,
    #[serde(default = "default_max_blocklength")]
    pub max_blocklength: usize,
    /// Joint-state budget of the leakage audit.
    #[serde(default = "default_cap")]
    pub enumeration_cap: u64,
    #[serde(default)]
    pub allow_unverified_channel: bool,
    #[serde(default)]
    pub outputs: OutputSelection,
    /// Directory for resolving a relative channel path.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(channel: ChannelConfig, n: usize, rate_bits: usize) -> Self {
        ExperimentConfig {
            channel: ChannelSource::Inline(channel),
            n,
            rate_bits,
            bin_bits: None,
            slots: default_slots(),
            trials: default_trials(),
            seed: 0,
            restart_period: None,
            lambda: None,
            input_distribution: None,
            grid_steps: DEFAULT_GRID_STEPS,
            refine_iters: DEFAULT_REFINE_ITERS,
            max_blocklength: DEFAULT_MAX_BLOCKLENGTH,
            enumeration_cap: default_cap(),
            allow_unverified_channel: false,
            outputs: OutputSelection::default(),
            base_dir: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_json(&text)?;
        config.base_dir = path.parent().map(Path::to_path_buf);
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n", self.n),
            ("rate_bits", self.rate_bits),
            ("slots", self.slots),
            ("trials", self.trials),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Input(format!("{name} must be positive")));
        }
        if self.lambda == Some(0) || self.restart_period == Some(0) {
            return Err(Error::Input("lambda and restart_period must be positive".into()));
        }
        Ok(())
    }

    pub fn channel_config(&self) -> Result<ChannelConfig> {
        match &self.channel {
            ChannelSource::Inline(c) => Ok(c.clone()),
            ChannelSource::Path(p) => {
                let path = match &self.base_dir {
                    Some(dir) if p.is_relative() => dir.join(p),
                    _ => p.clone(),
                };
                ChannelConfig::from_path(path)
            }
        }
    }

    pub fn limits(&self) -> CodeLimits {
        CodeLimits {
            max_blocklength: self.max_blocklength,
            ..CodeLimits::default()
        }
    }

    fn policy(&self) -> ChannelPolicy {
        if self.allow_unverified_channel {
            ChannelPolicy::AllowUnverified
        } else {
            ChannelPolicy::CascadeOnly
        }
    }
}

/// Whether the schedule must respect `rate_bits / n <= R_s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateCheck {
    Enforce,
    /// Tiny audit configurations usually exceed `R_s`; structure is what
    /// is audited there.
    Skip,
}

/// Channel, rates, schedule and codebooks resolved from a config.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub channel: ChannelModel<f64>,
    /// Absent when `lambda` was overridden and the channel has no secrecy.
    pub profile: Option<RateProfile<f64>>,
    pub input_dist: InputDistribution<f64>,
    pub bin_bits: usize,
    pub schedule: SlotSchedule,
    pub codebooks: CodebookSet,
}

impl Prepared {
    pub fn session(&self, policy: ChannelPolicy) -> Result<Session<'_, f64>> {
        Session::new(&self.channel, &self.schedule, &self.codebooks, policy)
    }
}

pub fn prepare(config: &ExperimentConfig, check: RateCheck) -> Result<Prepared> {
    config.validate()?;
    let channel: ChannelModel<f64> = config.channel_config()?.build()?;
    let profile = match (rate_profile(&channel, config.grid_steps, config.refine_iters), config.lambda) {
        (Ok(p), _) => Some(p),
        (Err(Error::NoSecrecy { .. }), Some(_)) if check == RateCheck::Skip => None,
        (Err(e), _) => return Err(e),
    };
    let input_dist = match &config.input_distribution {
        Some(p) => InputDistribution::new(p.clone())?,
        None => InputDistribution::uniform(channel.x_size()),
    };
    if input_dist.len() != channel.x_size() {
        return Err(Error::Input(format!(
            "input distribution has {} entries for a {}-ary input",
            input_dist.len(),
            channel.x_size()
        )));
    }
    let lambda = match (config.lambda, &profile) {
        (Some(l), _) => l,
        (None, Some(p)) => p.lambda as usize,
        (None, None) => unreachable!("profile is only skipped with a lambda override"),
    };
    if check == RateCheck::Enforce {
        let profile = profile.as_ref().expect("enforced profiles exist");
        let rate = config.rate_bits as f64 / config.n as f64;
        if rate > profile.secrecy_capacity + 1e-12 {
            return Err(Error::RateExceedsSecrecy {
                rate,
                secrecy_capacity: profile.secrecy_capacity,
            });
        }
    }
    let schedule = SlotSchedule::with_lambda(
        lambda,
        config.rate_bits,
        config.n,
        config.slots,
        config.restart_period,
    )?;
    let bin_bits = config
        .bin_bits
        .unwrap_or_else(|| default_bin_bits(&channel, &input_dist, config.n, config.rate_bits));
    let codebooks = CodebookSet::build(&schedule, &input_dist, bin_bits, config.seed, &config.limits())?;
    Ok(Prepared {
        channel,
        profile,
        input_dist,
        bin_bits,
        schedule,
        codebooks,
    })
}

/// Results of `simulate`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub ramp: Vec<RampRow>,
    pub components: ComponentErrors,
    pub errors: Vec<ErrorRow>,
    pub restart: Vec<RestartCheck>,
}

pub fn simulate(config: &ExperimentConfig, prepared: &Prepared) -> Result<SimulationResult> {
    let session = prepared.session(config.policy())?;
    let s = &prepared.schedule;
    let ramp = rate_ramp_with_rate(
        s.rate_bits as f64 / s.n as f64,
        s.lambda,
        config.slots,
        Some(s.restart_period),
    );
    let mut rng = stream_rng(config.seed, COMPONENT_ERRORS_STREAM);
    let components = measure_component_errors(
        &prepared.channel,
        &prepared.codebooks,
        config.trials.max(MIN_COMPONENT_TRIALS),
        &mut rng,
    )?;
    let errors = error_propagation_curve(&session, &components, config.slots, config.trials, config.seed)?;
    let restart = restart_equivalence(&errors, s.restart_period);
    Ok(SimulationResult {
        ramp,
        components,
        errors,
        restart,
    })
}

/// Exact audit over the configured number of slots.
pub fn leakage_audit(config: &ExperimentConfig, prepared: &Prepared) -> Result<LeakageReport> {
    let joint = build_joint(
        &prepared.channel,
        &prepared.codebooks,
        &prepared.schedule,
        config.slots,
        config.enumeration_cap as u128,
    )?;
    audit_all(&joint)
}

fn fmt_f(v: f64) -> String {
    format!("{v:.9}")
}

fn create(path: &Path) -> Result<fs::File> {
    fs::File::create(path).map_err(|e| Error::io(path, e))
}

fn write_csv<const N: usize>(
    path: &Path,
    header_comment: &str,
    columns: [&str; N],
    rows: impl Iterator<Item = [String; N]>,
) -> Result<()> {
    let mut file = create(path)?;
    writeln!(file, "{header_comment}").map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(columns)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn write_ramp_csv(path: &Path, rows: &[RampRow]) -> Result<()> {
    write_csv(
        path,
        RAMP_HEADER,
        ["slot", "minislots", "rate"],
        rows.iter()
            .map(|r| [r.slot.to_string(), r.minislots.to_string(), fmt_f(r.rate)]),
    )
}

pub fn write_errors_csv(path: &Path, rows: &[ErrorRow]) -> Result<()> {
    write_csv(
        path,
        ERRORS_HEADER,
        ["slot", "p_err", "ci_lo", "ci_hi", "bound", "flag"],
        rows.iter().map(|r| {
            [
                r.slot.to_string(),
                fmt_f(r.p_err),
                fmt_f(r.ci_lo),
                fmt_f(r.ci_hi),
                fmt_f(r.bound),
                (r.flag as u8).to_string(),
            ]
        }),
    )
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Seeds actually used by a prepared experiment.
pub fn seed_table(config: &ExperimentConfig, prepared: &Prepared) -> serde_json::Value {
    let keyed: BTreeMap<String, u64> = prepared
        .codebooks
        .keyed
        .keys()
        .map(|&w| (w.to_string(), derive_seed(config.seed, KEYED_CODE_BASE + w as u64)))
        .collect();
    json!({
        "master": config.seed,
        "wiretap_code": derive_seed(config.seed, WIRETAP_CODE_STREAM),
        "keyed_codes": keyed,
        "component_errors_stream": COMPONENT_ERRORS_STREAM,
        "trial_stream_base": TRIAL_BASE,
    })
}

/// Manifest echoing the resolved config, seeds, rates and output files.
pub fn manifest(
    command: &str,
    config: &ExperimentConfig,
    prepared: &Prepared,
    files: &[&str],
) -> Result<serde_json::Value> {
    let profile = prepared.profile.as_ref().map(|p| {
        json!({
            "main_capacity": p.main_capacity,
            "secrecy_capacity": p.secrecy_capacity,
            "lambda": p.lambda,
            "ratio_is_integer": p.ratio_is_integer,
        })
    });
    let mut resolved = config.clone();
    resolved.channel = ChannelSource::Inline(config.channel_config()?);
    Ok(json!({
        "manifest_version": MANIFEST_VERSION,
        "tool_version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "config": resolved,
        "seeds": seed_table(config, prepared),
        "profile": profile,
        "lambda": prepared.schedule.lambda,
        "restart_period": prepared.schedule.restart_period,
        "bin_bits": prepared.bin_bits,
        "input_distribution": prepared.input_dist.probs(),
        "files": files,
    }))
}

pub fn write_simulation(
    out_dir: &Path,
    config: &ExperimentConfig,
    prepared: &Prepared,
    result: &SimulationResult,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut files = Vec::new();
    if config.outputs.ramp {
        write_ramp_csv(&out_dir.join("ramp.csv"), &result.ramp)?;
        files.push("ramp.csv");
    }
    if config.outputs.errors {
        write_errors_csv(&out_dir.join("errors.csv"), &result.errors)?;
        files.push("errors.csv");
    }
    if config.outputs.codebooks {
        write_json(&out_dir.join("codebooks.json"), &codebook_dump(prepared))?;
        files.push("codebooks.json");
    }
    let mut m = manifest("simulate", config, prepared, &files)?;
    m["component_errors"] = json!({
        "epsilon": result.components.wiretap,
        "keyed": result.components.keyed,
    });
    m["restart_checks"] = json!(result.restart);
    write_json(&out_dir.join("manifest.json"), &m)?;
    files.push("manifest.json");
    Ok(files.into_iter().map(|f| out_dir.join(f)).collect())
}

pub fn write_leakage(
    out_dir: &Path,
    config: &ExperimentConfig,
    prepared: &Prepared,
    report: &LeakageReport,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    write_json(&out_dir.join("leakage.json"), &report.to_json_value())?;
    let m = manifest("leakage", config, prepared, &["leakage.json"])?;
    write_json(&out_dir.join("manifest.json"), &m)?;
    Ok(vec![out_dir.join("leakage.json"), out_dir.join("manifest.json")])
}

/// Restorable descriptions of every codebook in use.
pub fn codebook_dump(prepared: &Prepared) -> serde_json::Value {
    let keyed: Vec<_> = prepared.codebooks.keyed.values().map(|c| c.spec()).collect();
    json!({
        "wiretap": prepared.codebooks.wiretap.spec(),
        "keyed": keyed,
    })
}

//! Command-line front end: config parsing, subcommand dispatch, and the CSV
//! and JSON serializers for episode and campaign artifacts.
//!
//! The configuration is one JSON document (the episode config); every field
//! can be overridden by a flag of the same dotted name. Exit codes: 0 on
//! success, 2 on configuration errors, 3 on i/o errors.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Once;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::harness::{
    run_campaign, run_episode_with, CampaignResult, EpisodeConfig, EpisodeSnapshot, RoundRecord,
    RoundSink,
};

#[derive(Debug, Parser)]
#[command(
    name = "bandit-attack-lab",
    about = "Reward-poisoning attacks on UCB learners: bounds, simulation, Monte Carlo"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flag overrides for the JSON config; names mirror the config fields.
#[derive(Debug, Clone, Default, Args)]
struct Overrides {
    /// Comma-separated true arm means (target arm is the last).
    #[arg(long = "instance.means", value_name = "M1,M2,...")]
    instance_means: Option<String>,
    #[arg(long = "instance.sigma", value_name = "SIGMA")]
    instance_sigma: Option<f64>,
    /// "gaussian" or "bernoulli".
    #[arg(long = "instance.reward_family", value_name = "FAMILY")]
    instance_reward_family: Option<String>,
    /// "ucb_regret" or "ucb_bai".
    #[arg(long = "victim", value_name = "VICTIM")]
    victim: Option<String>,
    #[arg(long = "attack_enabled", value_name = "BOOL")]
    attack_enabled: Option<bool>,
    #[arg(long = "delta0", value_name = "MARGIN")]
    delta0: Option<f64>,
    #[arg(long = "delta", value_name = "CONF")]
    delta: Option<f64>,
    #[arg(long = "bai_beta", value_name = "BETA")]
    bai_beta: Option<f64>,
    #[arg(long = "stop_ratio_override", value_name = "RATIO")]
    stop_ratio_override: Option<f64>,
    #[arg(long = "horizon", value_name = "ROUNDS")]
    horizon: Option<u64>,
    #[arg(long = "bai_stop_enabled", value_name = "BOOL")]
    bai_stop_enabled: Option<bool>,
    #[arg(long = "seed", value_name = "SEED")]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate every analytic bound for a configuration.
    Bounds {
        #[arg(long)]
        config: PathBuf,
        /// Fail (exit 2) if the guaranteed stop round cannot be computed.
        #[arg(long = "t-star")]
        t_star: bool,
        /// Also write the report to this path.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run one episode; write per-round CSV and a summary JSON.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run a seeded campaign; write a summary JSON with bound-vs-empirical
    /// rates.
    Montecarlo {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        trials: usize,
        #[arg(long)]
        campaign_seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Vary one parameter over a grid; one summary CSV row per grid point.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// One of: delta0, delta, bai_beta, sigma.
        #[arg(long)]
        param: String,
        /// Inclusive grid start:end:step, e.g. 0.1:1.0:0.1.
        #[arg(long)]
        grid: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        campaign_seed: u64,
        #[command(flatten)]
        overrides: Overrides,
    },
}

/// Parses argv, runs the command, and maps errors to exit codes.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Io(_) => 3,
                _ => 2,
            }
        }
    }
}

fn execute(command: Command) -> Result<()> {
    init_thread_pool();
    match command {
        Command::Bounds {
            config,
            t_star,
            out,
            overrides,
        } => cmd_bounds(&config, t_star, out.as_deref(), &overrides),
        Command::Simulate {
            config,
            out_dir,
            overrides,
        } => cmd_simulate(&config, &out_dir, &overrides),
        Command::Montecarlo {
            config,
            trials,
            campaign_seed,
            out_dir,
            overrides,
        } => cmd_montecarlo(&config, trials, campaign_seed, &out_dir, &overrides),
        Command::Sweep {
            config,
            param,
            grid,
            out,
            trials,
            campaign_seed,
            overrides,
        } => cmd_sweep(&config, &param, &grid, &out, trials, campaign_seed, &overrides),
    }
}

/// Caps worker parallelism from BANDIT_LAB_THREADS; default is one worker per
/// available core.
fn init_thread_pool() {
    static INIT: Once = Once::new();
    INIT.call_once(|| {
        if let Ok(raw) = std::env::var("BANDIT_LAB_THREADS") {
            if let Ok(n) = raw.parse::<usize>() {
                if n > 0 {
                    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
                }
            }
        }
    });
}

fn load_config(path: &Path, overrides: &Overrides) -> Result<EpisodeConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    let mut value: Value = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("config {} is not valid JSON: {e}", path.display())))?;
    apply_overrides(&mut value, overrides)?;
    let cfg: EpisodeConfig = serde_json::from_value(value)
        .map_err(|e| Error::Config(format!("invalid config: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

fn apply_overrides(value: &mut Value, ov: &Overrides) -> Result<()> {
    if let Some(means) = &ov.instance_means {
        let parsed: std::result::Result<Vec<f64>, _> =
            means.split(',').map(|s| s.trim().parse::<f64>()).collect();
        let parsed = parsed
            .map_err(|e| Error::Config(format!("cannot parse instance.means '{means}': {e}")))?;
        set_path(value, "instance.means", serde_json::json!(parsed))?;
    }
    if let Some(sigma) = ov.instance_sigma {
        set_path(value, "instance.sigma", serde_json::json!(sigma))?;
    }
    if let Some(family) = &ov.instance_reward_family {
        set_path(value, "instance.reward_family", Value::String(family.clone()))?;
    }
    if let Some(victim) = &ov.victim {
        set_path(value, "victim", Value::String(victim.clone()))?;
    }
    if let Some(b) = ov.attack_enabled {
        set_path(value, "attack_enabled", Value::Bool(b))?;
    }
    if let Some(x) = ov.delta0 {
        set_path(value, "delta0", serde_json::json!(x))?;
    }
    if let Some(x) = ov.delta {
        set_path(value, "delta", serde_json::json!(x))?;
    }
    if let Some(x) = ov.bai_beta {
        set_path(value, "bai_beta", serde_json::json!(x))?;
    }
    if let Some(x) = ov.stop_ratio_override {
        set_path(value, "stop_ratio_override", serde_json::json!(x))?;
    }
    if let Some(x) = ov.horizon {
        set_path(value, "horizon", serde_json::json!(x))?;
    }
    if let Some(b) = ov.bai_stop_enabled {
        set_path(value, "bai_stop_enabled", Value::Bool(b))?;
    }
    if let Some(x) = ov.seed {
        set_path(value, "seed", serde_json::json!(x))?;
    }
    Ok(())
}

fn set_path(root: &mut Value, dotted: &str, new_value: Value) -> Result<()> {
    let mut node = root;
    let parts: Vec<&str> = dotted.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let map = node.as_object_mut().ok_or_else(|| {
            Error::Config(format!("config node '{}' is not an object", parts[..i].join(".")))
        })?;
        if i + 1 == parts.len() {
            map.insert((*part).to_string(), new_value);
            return Ok(());
        }
        node = map
            .entry((*part).to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}

/// Formats a float with 17 significant digits, enough to round-trip any f64.
fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Streams rounds as CSV with the fixed column order
/// `t,arm,pre_reward,alpha,post_reward`.
pub struct CsvRoundWriter<W: Write> {
    out: W,
}

impl<W: Write> CsvRoundWriter<W> {
    pub fn new(mut out: W) -> Result<Self> {
        writeln!(out, "t,arm,pre_reward,alpha,post_reward")?;
        Ok(Self { out })
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> RoundSink for CsvRoundWriter<W> {
    fn record(&mut self, rec: &RoundRecord) -> Result<()> {
        writeln!(
            self.out,
            "{},{},{},{},{}",
            rec.t,
            rec.arm,
            fmt_f64(rec.pre_reward),
            fmt_f64(rec.alpha),
            fmt_f64(rec.post_reward)
        )?;
        Ok(())
    }
}

/// Summary artifact of a single episode; embeds the resolved configuration so
/// the run is fully reconstructible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeSummaryFile {
    pub config: EpisodeConfig,
    pub snapshot: EpisodeSnapshot,
}

/// Summary artifact of a campaign; embeds the resolved configuration and the
/// campaign seed schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignSummaryFile {
    pub config: EpisodeConfig,
    pub campaign: CampaignResult,
}

/// Strict schema check for episode summary JSON.
pub fn validate_episode_summary(text: &str) -> Result<EpisodeSummaryFile> {
    serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid episode summary: {e}")))
}

/// Strict schema check for campaign summary JSON.
pub fn validate_campaign_summary(text: &str) -> Result<CampaignSummaryFile> {
    serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid campaign summary: {e}")))
}

fn to_pretty_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("serializable artifact");
    text.push('\n');
    text
}

fn cmd_bounds(config: &Path, t_star: bool, out: Option<&Path>, ov: &Overrides) -> Result<()> {
    let cfg = load_config(config, ov)?;
    let bounds = cfg.bound_config()?;
    if t_star {
        // Surface the refusal as a hard error when explicitly requested.
        bounds.sample_complexity_round()?;
    }
    let report = bounds.report(cfg.resolved_horizon()?)?;
    let text = to_pretty_json(&report);
    print!("{text}");
    if let Some(path) = out {
        fs::write(path, text)?;
    }
    Ok(())
}

fn cmd_simulate(config: &Path, out_dir: &Path, ov: &Overrides) -> Result<()> {
    let cfg = load_config(config, ov)?.resolved()?;
    fs::create_dir_all(out_dir)?;
    let csv_path = out_dir.join("rounds.csv");
    let file = fs::File::create(&csv_path)?;
    let mut sink = CsvRoundWriter::new(std::io::BufWriter::new(file))?;
    let snapshot = run_episode_with(&cfg, &mut sink)?;
    sink.into_inner().flush()?;
    let summary = EpisodeSummaryFile {
        config: cfg,
        snapshot,
    };
    let summary_path = out_dir.join("summary.json");
    fs::write(&summary_path, to_pretty_json(&summary))?;
    println!(
        "wrote {} and {}",
        csv_path.display(),
        summary_path.display()
    );
    Ok(())
}

fn cmd_montecarlo(
    config: &Path,
    trials: usize,
    campaign_seed: u64,
    out_dir: &Path,
    ov: &Overrides,
) -> Result<()> {
    let cfg = load_config(config, ov)?.resolved()?;
    let campaign = run_campaign(&cfg, trials, campaign_seed)?;
    fs::create_dir_all(out_dir)?;
    let path = out_dir.join("campaign.json");
    let summary = CampaignSummaryFile {
        config: cfg,
        campaign,
    };
    fs::write(&path, to_pretty_json(&summary))?;
    let rates = &summary.campaign.rates;
    println!("wrote {}", path.display());
    println!("concentration rate: {:.4}", rates.concentration);
    if let Some(r) = rates.target_pull_floor {
        println!("target pull floor met: {r:.4}");
    }
    if let Some(r) = rates.cost_ceiling {
        println!("cost ceiling met: {r:.4}");
    }
    if let Some(r) = rates.stop_winner_target {
        println!("stopped with target winner: {r:.4}");
    }
    Ok(())
}

fn parse_grid(grid: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = grid.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!(
            "grid must be start:end:step, got '{grid}'"
        )));
    }
    let nums: std::result::Result<Vec<f64>, _> = parts.iter().map(|p| p.parse::<f64>()).collect();
    let nums = nums.map_err(|e| Error::Config(format!("cannot parse grid '{grid}': {e}")))?;
    let (start, end, step) = (nums[0], nums[1], nums[2]);
    if step <= 0.0 || end < start {
        return Err(Error::Config(format!(
            "grid needs end >= start and step > 0, got '{grid}'"
        )));
    }
    let n = ((end - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| start + i as f64 * step).collect())
}

const SWEEP_PARAMS: [&str; 4] = ["delta0", "delta", "bai_beta", "sigma"];

fn cmd_sweep(
    config: &Path,
    param: &str,
    grid: &str,
    out: &Path,
    trials: usize,
    campaign_seed: u64,
    ov: &Overrides,
) -> Result<()> {
    if !SWEEP_PARAMS.contains(&param) {
        return Err(Error::Config(format!(
            "unknown sweep parameter '{param}'; choose one of {SWEEP_PARAMS:?}"
        )));
    }
    let values = parse_grid(grid)?;
    let text = fs::read_to_string(config)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", config.display())))?;
    let mut base: Value = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("config {} is not valid JSON: {e}", config.display())))?;
    apply_overrides(&mut base, ov)?;
    let path = if param == "sigma" { "instance.sigma" } else { param };

    let mut rows = String::new();
    rows.push_str(
        "param,value,stop_ratio,delta0_threshold,nontarget_pull_cap,target_pull_floor,\
         attack_cost_ceiling,sample_complexity_round,trials,frac_concentration,\
         frac_target_pull_floor,frac_cost_ceiling,frac_stopped,frac_stop_winner_target,\
         frac_stop_by_round_bound,frac_ratio_bound,mean_target_pulls,mean_total_cost\n",
    );
    for &v in &values {
        let mut point = base.clone();
        set_path(&mut point, path, serde_json::json!(v))?;
        let cfg: EpisodeConfig = serde_json::from_value(point)
            .map_err(|e| Error::Config(format!("invalid config at {param} = {v}: {e}")))?;
        cfg.validate()
            .map_err(|e| Error::Config(format!("invalid config at {param} = {v}: {e}")))?;
        let campaign = run_campaign(&cfg, trials, campaign_seed)?;
        let bounds = campaign.bounds.as_ref();
        let opt = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
        let rates = &campaign.rates;
        rows.push_str(&format!(
            "{param},{},{},{},{},{},{},{},{trials},{},{},{},{},{},{},{},{},{}\n",
            fmt_f64(v),
            opt(bounds.map(|b| b.stop_ratio)),
            opt(bounds.map(|b| b.delta0_threshold)),
            opt(bounds.map(|b| b.nontarget_pull_cap)),
            opt(bounds.map(|b| b.target_pull_floor)),
            opt(bounds.map(|b| b.attack_cost_ceiling)),
            bounds
                .and_then(|b| b.sample_complexity_round)
                .map(|t| t.to_string())
                .unwrap_or_default(),
            fmt_f64(rates.concentration),
            opt(rates.target_pull_floor),
            opt(rates.cost_ceiling),
            opt(rates.stopped),
            opt(rates.stop_winner_target),
            opt(rates.stop_by_round_bound),
            opt(rates.ratio_bound),
            fmt_f64(rates.mean_target_pulls),
            fmt_f64(rates.mean_total_cost),
        ));
    }
    fs::write(out, rows)?;
    println!("wrote {} ({} grid points)", out.display(), values.len());
    Ok(())
}

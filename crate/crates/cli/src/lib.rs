//! Experiment subcommands behind the `uav-noma` binary.

pub mod output;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use output::{Manifest, SummaryRow};
use serde::Deserialize;
use std::path::{Path, PathBuf};
use uav_noma::agent::Sharing;
use uav_noma::baselines::{BaselineKind, Setup};
use uav_noma::config::{Config, EnvConfig, TrainerConfig};
use uav_noma::experiment::{evaluate, train, Controller, EpisodeRecord, TrainOutcome};
use uav_noma::metrics::{self, mean_std};
use uav_noma::neural::Mlp;
use uav_noma::parallel;

pub const DEFAULT_EVAL_EPISODES: usize = 20;

#[derive(Debug, Parser)]
#[command(name = "uav-noma", version, about = "Multi-UAV NOMA deployment and power control experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the learners and write per-episode, per-step and checkpoint files.
    Train(TrainArgs),
    /// Greedy evaluation of saved checkpoints.
    Eval(EvalArgs),
    /// Train (when learned) and evaluate one baseline.
    Baseline(BaselineArgs),
    /// Run a matrix of arms over several seeds and summarise it.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Algo {
    Mdqn,
    Independent,
}

impl From<Algo> for Sharing {
    fn from(a: Algo) -> Sharing {
        match a {
            Algo::Mdqn => Sharing::Mdqn,
            Algo::Independent => Sharing::Independent,
        }
    }
}

fn parse_kind(s: &str) -> std::result::Result<BaselineKind, String> {
    BaselineKind::parse(s).ok_or_else(|| {
        let names: Vec<&str> = BaselineKind::ALL.iter().map(|k| k.name()).collect();
        format!("unknown kind `{s}`; expected one of {}", names.join(", "))
    })
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Config file; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub algo: Option<Algo>,
    /// Master seed; overrides `trainer.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `trainer.episodes`.
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// One checkpoint for a shared network, or one per UAV in id order.
    #[arg(long, required = true)]
    pub checkpoint: Vec<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_EVAL_EPISODES)]
    pub episodes: usize,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Environment/action-space variant the checkpoint was trained for.
    #[arg(long, value_parser = parse_kind)]
    pub kind: Option<BaselineKind>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[arg(long, value_parser = parse_kind)]
    pub kind: BaselineKind,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Training episodes for learned baselines; overrides `trainer.episodes`.
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_EVAL_EPISODES)]
    pub eval_episodes: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Baseline(a) => cmd_baseline(a),
        Command::Compare(a) => cmd_compare(a),
    }
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    match path {
        Some(p) => Ok(Config::load(p)?),
        None => Ok(Config::default()),
    }
}

fn prepare_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

pub fn checkpoint_names(sharing: Sharing, uavs: usize) -> Vec<String> {
    match sharing {
        Sharing::Mdqn => vec!["checkpoint.txt".into()],
        Sharing::Independent => (0..uavs).map(|u| format!("checkpoint-agent{u}.txt")).collect(),
    }
}

fn write_training(dir: &Path, out: &TrainOutcome, names: &[String]) -> Result<()> {
    output::write_episodes(&dir.join(output::EPISODES_FILE), &out.episodes)?;
    output::write_loss(&dir.join(output::LOSS_FILE), &out.loss)?;
    for (net, name) in out.networks.iter().zip(names) {
        net.save(&dir.join(name))?;
    }
    Ok(())
}

fn write_evaluation(dir: &Path, records: &[EpisodeRecord]) -> Result<()> {
    let metrics: Vec<_> = records.iter().map(|r| r.metrics.clone()).collect();
    output::write_episodes(&dir.join(output::EVAL_FILE), &metrics)?;
    output::write_slots(&dir.join(output::SLOTS_FILE), records)
}

fn mean_throughput(records: &[EpisodeRecord]) -> f64 {
    metrics::mean(&records.iter().map(|r| r.metrics.throughput_bits).collect::<Vec<_>>())
}

fn mean_violation(records: &[EpisodeRecord]) -> f64 {
    metrics::mean(&records.iter().map(|r| r.metrics.violation_rate).collect::<Vec<_>>())
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let mut cfg = load_config(a.config.as_deref())?;
    if let Some(algo) = a.algo {
        cfg.trainer.sharing = algo.into();
    }
    if let Some(seed) = a.seed {
        cfg.trainer.seed = seed;
    }
    if let Some(n) = a.episodes {
        cfg.trainer.episodes = n;
    }
    cfg.validate()?;
    prepare_out(&a.out)?;
    let names = checkpoint_names(cfg.trainer.sharing, cfg.env.uav_count);
    let mut files = vec![output::EPISODES_FILE.to_string(), output::LOSS_FILE.to_string()];
    files.extend(names.iter().cloned());
    Manifest::new("train", &cfg, vec![cfg.trainer.seed], files).write(&a.out)?;
    let out = train(&cfg.env, &cfg.trainer, Setup::default(), cfg.trainer.seed)?;
    write_training(&a.out, &out, &names)?;
    if let Some(last) = out.episodes.last() {
        println!(
            "trained {} episodes; last throughput {} bits, violation rate {}",
            out.episodes.len(),
            last.throughput_bits,
            last.violation_rate
        );
    }
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let mut cfg = load_config(a.config.as_deref())?;
    if let Some(seed) = a.seed {
        cfg.trainer.seed = seed;
    }
    cfg.validate()?;
    if a.episodes == 0 {
        bail!("--episodes must be at least 1");
    }
    let nets = a
        .checkpoint
        .iter()
        .map(|p| Mlp::load(p).with_context(|| format!("loading checkpoint {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    let setup = a.kind.map_or_else(Setup::default, BaselineKind::setup);
    prepare_out(&a.out)?;
    let files = vec![output::EVAL_FILE.to_string(), output::SLOTS_FILE.to_string()];
    Manifest::new("eval", &cfg, vec![cfg.trainer.seed], files).write(&a.out)?;
    let records = evaluate(&cfg.env, setup, &Controller::Greedy(nets), cfg.trainer.seed, a.episodes)?;
    write_evaluation(&a.out, &records)?;
    println!("mean throughput {} bits over {} episodes", mean_throughput(&records), records.len());
    Ok(())
}

/// Trains (for learned kinds) and evaluates one arm in one directory.
fn run_arm(
    arm: Arm,
    env: &EnvConfig,
    trainer: &TrainerConfig,
    seed: u64,
    eval_episodes: usize,
    dir: &Path,
    config_for_manifest: &Config,
) -> Result<ArmResult> {
    prepare_out(dir)?;
    let setup = arm.setup();
    let mut files = Vec::new();
    let mut names = Vec::new();
    if arm.is_learned() {
        names = checkpoint_names(arm.sharing(trainer), env.uav_count);
        files.extend([output::EPISODES_FILE.to_string(), output::LOSS_FILE.to_string()]);
        files.extend(names.iter().cloned());
    }
    files.extend([output::EVAL_FILE.to_string(), output::SLOTS_FILE.to_string()]);
    Manifest::new(&arm.name(), config_for_manifest, vec![seed], files).write(dir)?;
    let mut steps = None;
    let controller = if arm.is_learned() {
        let tc = TrainerConfig {
            sharing: arm.sharing(trainer),
            ..trainer.clone()
        };
        let out = train(env, &tc, setup, seed)?;
        write_training(dir, &out, &names)?;
        steps = Some(
            metrics::steps_to_threshold(&out.loss, metrics::LOSS_SMOOTHING_WINDOW, metrics::THRESHOLD_FACTOR).step,
        );
        Controller::Greedy(out.networks)
    } else {
        match arm {
            Arm::Baseline(k) => Controller::for_baseline(k, Vec::new()),
            _ => unreachable!("learned arms handled above"),
        }
    };
    let records = evaluate(env, setup, &controller, seed, eval_episodes)?;
    write_evaluation(dir, &records)?;
    Ok(ArmResult {
        throughput: mean_throughput(&records),
        violation_rate: mean_violation(&records),
        steps_to_threshold: steps,
    })
}

fn cmd_baseline(a: BaselineArgs) -> Result<()> {
    let mut cfg = load_config(a.config.as_deref())?;
    if let Some(seed) = a.seed {
        cfg.trainer.seed = seed;
    }
    if let Some(n) = a.episodes {
        cfg.trainer.episodes = n;
    }
    cfg.validate()?;
    if a.eval_episodes == 0 {
        bail!("--eval-episodes must be at least 1");
    }
    let r = run_arm(
        Arm::Baseline(a.kind),
        &cfg.env,
        &cfg.trainer,
        cfg.trainer.seed,
        a.eval_episodes,
        &a.out,
        &cfg,
    )?;
    println!("{}: mean throughput {} bits", a.kind.name(), r.throughput);
    Ok(())
}

/// One column of a comparison matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arm {
    /// The full method with the given sharing mode.
    Full(Sharing),
    Baseline(BaselineKind),
}

impl Arm {
    pub fn parse(name: &str) -> Option<Arm> {
        match name {
            "mdqn" => Some(Arm::Full(Sharing::Mdqn)),
            "independent" => Some(Arm::Full(Sharing::Independent)),
            other => BaselineKind::parse(other).map(Arm::Baseline),
        }
    }

    pub fn name(self) -> String {
        match self {
            Arm::Full(Sharing::Mdqn) => "mdqn".into(),
            Arm::Full(Sharing::Independent) => "independent".into(),
            Arm::Baseline(k) => k.name().into(),
        }
    }

    fn setup(self) -> Setup {
        match self {
            Arm::Full(_) => Setup::default(),
            Arm::Baseline(k) => k.setup(),
        }
    }

    fn is_learned(self) -> bool {
        match self {
            Arm::Full(_) => true,
            Arm::Baseline(k) => k.is_learned(),
        }
    }

    fn sharing(self, trainer: &TrainerConfig) -> Sharing {
        match self {
            Arm::Full(s) => s,
            Arm::Baseline(_) => trainer.sharing,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmResult {
    pub throughput: f64,
    pub violation_rate: f64,
    pub steps_to_threshold: Option<Option<u64>>,
}

/// Matrix description for `compare`, in the config file syntax:
/// top-level `seeds`, `arms` and `eval_episodes`, plus optional `[env]`
/// and `[trainer]` tables.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSpec {
    pub seeds: Vec<u64>,
    pub arms: Vec<String>,
    #[serde(default = "default_eval_episodes")]
    pub eval_episodes: usize,
    #[serde(default)]
    pub env: EnvConfig,
    #[serde(default)]
    pub trainer: TrainerConfig,
}

fn default_eval_episodes() -> usize {
    DEFAULT_EVAL_EPISODES
}

impl CompareSpec {
    pub fn load(path: &Path) -> Result<(CompareSpec, Vec<Arm>)> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read spec {}", path.display()))?;
        let spec: CompareSpec = toml::from_str(&text).map_err(|e| anyhow::anyhow!("spec parse error: {e}"))?;
        Config {
            env: spec.env.clone(),
            trainer: spec.trainer.clone(),
        }
        .validate()?;
        if spec.seeds.is_empty() || spec.arms.is_empty() {
            bail!("spec needs at least one seed and one arm");
        }
        if spec.eval_episodes == 0 {
            bail!("eval_episodes must be at least 1");
        }
        let arms = spec
            .arms
            .iter()
            .map(|a| Arm::parse(a).with_context(|| format!("unknown arm `{a}`")))
            .collect::<Result<Vec<_>>>()?;
        Ok((spec, arms))
    }
}

fn cmd_compare(a: CompareArgs) -> Result<()> {
    let (spec, arms) = CompareSpec::load(&a.spec)?;
    prepare_out(&a.out)?;
    let cfg = Config {
        env: spec.env.clone(),
        trainer: spec.trainer.clone(),
    };
    let cells: Vec<(Arm, u64)> = arms
        .iter()
        .flat_map(|&arm| spec.seeds.iter().map(move |&s| (arm, s)))
        .collect();
    let cell_dir = |arm: Arm, seed: u64| format!("cells/{}-seed{seed}", arm.name());
    let has_ratio = arms.contains(&Arm::Full(Sharing::Mdqn)) && arms.contains(&Arm::Full(Sharing::Independent));
    let mut files = vec![output::SUMMARY_FILE.to_string()];
    if has_ratio {
        files.push(output::RATIO_FILE.to_string());
    }
    Manifest::new("compare", &cfg, spec.seeds.clone(), files).write(&a.out)?;
    let results = parallel::map_indices(cells.len(), |i| {
        let (arm, seed) = cells[i];
        run_arm(
            arm,
            &spec.env,
            &spec.trainer,
            seed,
            spec.eval_episodes,
            &a.out.join(cell_dir(arm, seed)),
            &cfg,
        )
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let per_seed = spec.seeds.len();
    let rows: Vec<SummaryRow> = arms
        .iter()
        .enumerate()
        .map(|(i, arm)| {
            let rs = &results[i * per_seed..(i + 1) * per_seed];
            let steps: Option<Vec<f64>> = rs
                .iter()
                .map(|r| r.steps_to_threshold.flatten().map(|s| s as f64))
                .collect();
            SummaryRow {
                arm: arm.name(),
                seeds: per_seed,
                throughput: mean_std(&rs.iter().map(|r| r.throughput).collect::<Vec<_>>()),
                violation_rate: mean_std(&rs.iter().map(|r| r.violation_rate).collect::<Vec<_>>()),
                steps_to_threshold: if arm.is_learned() { steps.map(|s| mean_std(&s)) } else { None },
            }
        })
        .collect();
    output::write_summary(&a.out.join(output::SUMMARY_FILE), &rows)?;
    if has_ratio {
        let at = |arm: Arm| arms.iter().position(|&x| x == arm).expect("arm present");
        let (m, ind) = (at(Arm::Full(Sharing::Mdqn)), at(Arm::Full(Sharing::Independent)));
        let ratio: Vec<_> = spec
            .seeds
            .iter()
            .enumerate()
            .map(|(j, &seed)| {
                (
                    seed,
                    results[m * per_seed + j].steps_to_threshold.flatten(),
                    results[ind * per_seed + j].steps_to_threshold.flatten(),
                )
            })
            .collect();
        output::write_ratio(&a.out.join(output::RATIO_FILE), &ratio)?;
    }
    for r in &rows {
        println!("{}: throughput {} ± {}", r.arm, r.throughput.0, r.throughput.1);
    }
    Ok(())
}

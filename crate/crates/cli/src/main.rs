//! `visprog`: run, trace, inject errors into, and debug visual programs.

mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use visprog_core::debugger::{run_debug_loop, ContainmentPolicy, CriticResponse, DebugSessionConfig};
use visprog_core::exec::{execute, render_feedback, render_full, DEFAULT_BUDGET, DEFAULT_STEP_LIMIT};
use visprog_core::harness::{dataset_stats, evaluate, render_table, BackendFactory, Backends, EvalConfig, Sample};
use visprog_core::inject::{
    error_rate, inject_pool, serialize_training_records, DatasetRecord, DecodeMode, InjectConfig, MaskBestConfig,
    PoolEntry, PromptTemplate,
};
use visprog_core::jsonl::{read_jsonl, to_jsonl};
use visprog_core::model::{LanguageModel, NGramLm, RemoteModel};
use visprog_core::service::{MockBehavior, MockServer};
use visprog_core::world::{SceneGraph, SceneStore};

use config::Config;

const DEFAULT_TIMEOUT_MS: u64 = 30_000;
const DEFAULT_RETRIES: usize = 2;
const DEFAULT_NGRAM_ORDER: usize = 3;
const DEFAULT_NGRAM_ALPHA: f64 = 1.0;

#[derive(Parser)]
#[command(name = "visprog", version, about = "Visual-program execution, error injection and debugging")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory of scene JSON files (overrides `scenes.dir`).
    #[arg(long, global = true)]
    scenes: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a program and print its result.
    Run(ProgramArgs),
    /// Execute a program and print its feedback trace.
    Trace {
        #[command(flatten)]
        program: ProgramArgs,
        /// Truncate to this many tokens instead of printing the full trace.
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Inject errors into a pool of correct programs.
    Inject(InjectArgs),
    /// Turn injected records and natural failures into critic/refiner JSONL.
    DatasetGen {
        #[arg(long)]
        records: PathBuf,
        /// Naturally failing programs (pool-entry JSONL).
        #[arg(long)]
        natural: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        /// Feedback token budget.
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: usize,
    },
    /// Run the critic-refiner loop on one sample (a JSON record or pool entry).
    Debug {
        sample: PathBuf,
        #[command(flatten)]
        loop_args: LoopArgs,
    },
    /// Evaluate a dataset of records and/or pool entries.
    Eval {
        /// JSONL files; each line is an injected record or a pool entry.
        #[arg(required = true)]
        datasets: Vec<PathBuf>,
        #[command(flatten)]
        loop_args: LoopArgs,
        /// Write the full report as JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the error-rate table for a dataset.
    Stats {
        #[arg(long)]
        dataset: String,
        #[arg(long)]
        pool_correct: PathBuf,
        #[arg(long)]
        pool_incorrect: PathBuf,
        #[arg(long)]
        greedy: Option<PathBuf>,
        #[arg(long)]
        mask_best: Option<PathBuf>,
    },
    /// Serve an n-gram model and canned critic/refiner answers over HTTP.
    ServeMock {
        #[arg(long, default_value = "127.0.0.1:8700")]
        addr: String,
        /// Pool-entry JSONL whose programs train the served model.
        #[arg(long)]
        train: PathBuf,
        /// Critic `p_correct` returned for every program.
        #[arg(long, default_value_t = 1.0)]
        p_correct: f64,
    },
}

#[derive(Args)]
struct ProgramArgs {
    /// Program source file.
    program: PathBuf,
    /// Scene id; repeat for multi-image programs.
    #[arg(long = "scene", required = true)]
    scene_ids: Vec<String>,
    #[arg(long)]
    step_limit: Option<usize>,
    /// Print the outcome as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Greedy,
    MaskBest,
}

#[derive(Args)]
struct InjectArgs {
    /// Pool-entry JSONL of correct programs.
    #[arg(long)]
    pool: PathBuf,
    /// Output JSONL of injected records.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Confidence-gap threshold for masking.
    #[arg(long)]
    th: Option<f64>,
    #[arg(long)]
    max_masked: Option<usize>,
    #[arg(long)]
    max_tokens: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    attempts: Option<usize>,
    /// Extra pool-entry JSONL used only to train the local n-gram model.
    #[arg(long)]
    train: Vec<PathBuf>,
    /// Use a remote model instead of the local n-gram model.
    #[arg(long, env = "VISPROG_MODEL_ENDPOINT")]
    model_endpoint: Option<String>,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum BackendArg {
    Oracle,
    Remote,
}

#[derive(Args)]
struct LoopArgs {
    #[arg(long, value_enum, default_value = "oracle")]
    backend: BackendArg,
    /// Critic acceptance threshold (strict).
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long, env = "VISPROG_CRITIC_ENDPOINT")]
    critic_endpoint: Option<String>,
    #[arg(long, env = "VISPROG_REFINER_ENDPOINT")]
    refiner_endpoint: Option<String>,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let cfg = Config::load(cli.config.as_deref())?;
    let scenes_dir = cli.scenes.clone().or_else(|| cfg.scenes.dir.clone());
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Run(args) => {
            let outcome = run_program(&args, scenes_dir.as_deref())?;
            if args.json {
                writeln!(out, "{}", serde_json::to_string_pretty(&outcome)?)?;
            } else if let Some(e) = &outcome.exception {
                writeln!(out, "{e}")?;
            } else {
                writeln!(out, "{}", outcome.result.as_deref().unwrap_or(""))?;
            }
        }
        Command::Trace { program, budget } => {
            let outcome = run_program(&program, scenes_dir.as_deref())?;
            match budget {
                Some(b) => write!(out, "{}", render_feedback(&outcome, b).text)?,
                None => write!(out, "{}", render_full(&outcome))?,
            }
        }
        Command::Inject(args) => inject(&args, &cfg, scenes_dir.as_deref(), &mut out)?,
        Command::DatasetGen {
            records,
            natural,
            out_dir,
            budget,
        } => {
            let store = load_scenes(scenes_dir.as_deref())?;
            let records: Vec<DatasetRecord> = read_jsonl(&records)?;
            let natural: Vec<PoolEntry> = match natural {
                Some(p) => read_jsonl(&p)?,
                None => Vec::new(),
            };
            let set = serialize_training_records(&records, &natural, &store, budget)?;
            std::fs::create_dir_all(&out_dir)?;
            std::fs::write(out_dir.join("critic.jsonl"), set.critic_jsonl())?;
            std::fs::write(out_dir.join("refiner.jsonl"), set.refiner_jsonl())?;
            writeln!(out, "critic rows: {}, refiner rows: {}", set.critic.len(), set.refiner.len())?;
        }
        Command::Debug { sample, loop_args } => {
            let store = load_scenes(scenes_dir.as_deref())?;
            let text = std::fs::read_to_string(&sample).with_context(|| format!("reading {}", sample.display()))?;
            let sample = parse_sample(&text).with_context(|| format!("parsing {}", sample.display()))?;
            let eval = eval_config(&loop_args, &cfg)?;
            let backends = backends(&loop_args, &cfg)?;
            let scenes: Vec<Arc<SceneGraph>> = store.resolve(&sample.scene_ids)?;
            let (critic, refiner) = backends.make(&sample, &scenes)?;
            let transcript = run_debug_loop(&sample.program, &scenes, critic.as_ref(), refiner.as_ref(), &eval.session);
            writeln!(out, "{}", transcript.to_json())?;
        }
        Command::Eval {
            datasets,
            loop_args,
            out: report_path,
        } => {
            let store = load_scenes(scenes_dir.as_deref())?;
            let mut samples = Vec::new();
            for path in &datasets {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
                    samples.push(parse_sample(line).with_context(|| format!("{}:{}", path.display(), i + 1))?);
                }
            }
            let eval = eval_config(&loop_args, &cfg)?;
            let report = evaluate(&samples, &store, &eval, &backends(&loop_args, &cfg)?)?;
            writeln!(out, "iteration  qa_accuracy  grounding_iou")?;
            let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{:.2}", 100.0 * x));
            for m in &report.per_iteration {
                writeln!(out, "{:<9}  {:<11}  {}", m.iteration, fmt(m.qa_accuracy), fmt(m.grounding_iou))?;
            }
            let t = &report.tally;
            writeln!(
                out,
                "correct: {}, vlm-error-simulated: {}, program-error: {}",
                t.correct, t.vlm_error_simulated, t.program_error
            )?;
            if let Some(p) = report_path {
                std::fs::write(&p, serde_json::to_string_pretty(&report)?)?;
            }
        }
        Command::Stats {
            dataset,
            pool_correct,
            pool_incorrect,
            greedy,
            mask_best,
        } => {
            let row = dataset_stats(&dataset, &pool_correct, &pool_incorrect, greedy.as_deref(), mask_best.as_deref())?;
            write!(out, "{}", render_table(&[row]))?;
        }
        Command::ServeMock { addr, train, p_correct } => {
            let pool: Vec<PoolEntry> = read_jsonl(&train)?;
            let cfg_inject = &cfg.inject;
            let lm = NGramLm::train_on_texts(
                pool.iter().map(|e| e.program.as_str()),
                cfg_inject.ngram_order.unwrap_or(DEFAULT_NGRAM_ORDER),
                cfg_inject.ngram_alpha.unwrap_or(DEFAULT_NGRAM_ALPHA),
            );
            let server = MockServer::start(
                &addr,
                MockBehavior {
                    model: Some(Arc::new(lm)),
                    critic: CriticResponse {
                        p_correct,
                        marked_program: None,
                    },
                    ..MockBehavior::default()
                },
            )?;
            writeln!(out, "{}", server.url())?;
            out.flush()?;
            drop(out);
            server.wait();
        }
    }
    Ok(())
}

fn load_scenes(dir: Option<&Path>) -> Result<SceneStore> {
    let dir = dir.context("no scene directory: pass --scenes or set scenes.dir in the config")?;
    SceneStore::load_dir(dir).with_context(|| format!("loading scenes from {}", dir.display()))
}

fn run_program(args: &ProgramArgs, scenes_dir: Option<&Path>) -> Result<visprog_core::exec::ExecutionOutcome> {
    let store = load_scenes(scenes_dir)?;
    let scenes = store.resolve(&args.scene_ids)?;
    let source =
        std::fs::read_to_string(&args.program).with_context(|| format!("reading {}", args.program.display()))?;
    let outcome = execute(&source, &scenes, args.step_limit.unwrap_or(DEFAULT_STEP_LIMIT))
        .with_context(|| format!("parsing {}", args.program.display()))?;
    Ok(outcome)
}

fn parse_sample(text: &str) -> Result<Sample> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    if value.get("program_incorrect").is_some() {
        let record: DatasetRecord = serde_json::from_value(value)?;
        Ok(Sample::from_record(&record))
    } else {
        let entry: PoolEntry = serde_json::from_value(value)?;
        Ok(Sample::from_entry(&entry))
    }
}

fn timeout(cfg: &Config) -> Duration {
    Duration::from_millis(cfg.endpoints.timeout_ms.unwrap_or(DEFAULT_TIMEOUT_MS))
}

fn inject(args: &InjectArgs, cfg: &Config, scenes_dir: Option<&Path>, out: &mut impl Write) -> Result<()> {
    let store = load_scenes(scenes_dir)?;
    let pool: Vec<PoolEntry> = read_jsonl(&args.pool)?;
    let c = &cfg.inject;
    let defaults = MaskBestConfig::default();
    let mode = match args.mode {
        Some(ModeArg::Greedy) => DecodeMode::Greedy,
        Some(ModeArg::MaskBest) => DecodeMode::MaskBest,
        None => c.mode.unwrap_or(DecodeMode::MaskBest),
    };
    let icfg = InjectConfig {
        mode,
        mask_best: MaskBestConfig {
            threshold: args.th.or(c.threshold).unwrap_or(defaults.threshold),
            max_masked: args.max_masked.or(c.max_masked).unwrap_or(defaults.max_masked),
            max_tokens: args.max_tokens.or(c.max_tokens).unwrap_or(defaults.max_tokens),
            seed: args.seed.or(c.seed).unwrap_or(defaults.seed),
        },
        attempts: args.attempts.or(c.attempts).unwrap_or(InjectConfig::default().attempts),
        ..InjectConfig::default()
    };
    if icfg.attempts == 0 {
        bail!("attempts must be at least 1");
    }
    let endpoint = args.model_endpoint.clone().or_else(|| cfg.endpoints.model.clone());
    let model: Box<dyn LanguageModel> = match endpoint {
        Some(url) => {
            info!("using remote model at {url}");
            let retries = cfg.endpoints.retries.unwrap_or(DEFAULT_RETRIES);
            Box::new(
                RemoteModel::connect(&url, timeout(cfg), retries)
                    .with_context(|| format!("connecting to model at {url}"))?,
            )
        }
        None => {
            let mut texts: Vec<String> = pool.iter().map(|e| e.program.clone()).collect();
            for path in &args.train {
                let extra: Vec<PoolEntry> = read_jsonl(path)?;
                texts.extend(extra.into_iter().map(|e| e.program));
            }
            Box::new(NGramLm::train_on_texts(
                texts.iter().map(String::as_str),
                c.ngram_order.unwrap_or(DEFAULT_NGRAM_ORDER),
                c.ngram_alpha.unwrap_or(DEFAULT_NGRAM_ALPHA),
            ))
        }
    };
    let results = inject_pool(&pool, &store, model.as_ref(), &PromptTemplate::default(), &icfg);
    let mut records = Vec::new();
    let mut failures = 0usize;
    for r in results {
        match r.result {
            Ok(Some(rec)) => records.push(rec),
            Ok(None) => {}
            Err(e) => {
                failures += 1;
                log::warn!("entry {}: {e}", pool[r.index].id);
            }
        }
    }
    std::fs::write(&args.out, to_jsonl(&records))?;
    let rate = error_rate(records.len() as u64, pool.len() as u64).unwrap_or(0.0);
    writeln!(
        out,
        "{}: {} of {} programs injected ({:.1}%), {} errors",
        mode.as_str(),
        records.len(),
        pool.len(),
        rate,
        failures
    )?;
    Ok(())
}

fn eval_config(args: &LoopArgs, cfg: &Config) -> Result<EvalConfig> {
    let d = &cfg.debug;
    let defaults = DebugSessionConfig::default();
    let session = DebugSessionConfig {
        score_threshold: args.threshold.or(d.threshold).unwrap_or(defaults.score_threshold),
        max_steps: args.max_steps.or(d.max_steps).unwrap_or(defaults.max_steps),
        containment: d.containment.unwrap_or(ContainmentPolicy::Strict),
        feedback_budget: d.feedback_budget.unwrap_or(defaults.feedback_budget),
        step_limit: d.step_limit.unwrap_or(defaults.step_limit),
    };
    session.validate()?;
    Ok(EvalConfig {
        iterations: session.max_steps,
        session,
    })
}

fn backends(args: &LoopArgs, cfg: &Config) -> Result<Backends> {
    Ok(match args.backend {
        BackendArg::Oracle => Backends::Oracle,
        BackendArg::Remote => {
            let critic_url = args
                .critic_endpoint
                .clone()
                .or_else(|| cfg.endpoints.critic.clone())
                .context("remote backend needs a critic endpoint")?;
            let refiner_url = args
                .refiner_endpoint
                .clone()
                .or_else(|| cfg.endpoints.refiner.clone())
                .context("remote backend needs a refiner endpoint")?;
            Backends::Remote {
                critic_url,
                refiner_url,
                timeout: timeout(cfg),
                retries: cfg.endpoints.retries.unwrap_or(DEFAULT_RETRIES),
            }
        }
    })
}

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use partgrasp::eval::{
    generate_suite, grade_all, grade_self, load_gold, load_predictions, load_suite, run_ablation, save_suite,
    AblationConfig, MetricsReport,
};
use partgrasp::localization::Strategy;
use partgrasp::scene::{export_frame, render, SceneDescription};
use partgrasp_service::config::{BackendKind, ServiceConfig};
use partgrasp_service::replay::{replay, script_lines, write_outputs};
use partgrasp_service::server::{serve, AppState};

#[derive(Parser)]
#[command(name = "partgrasp", version, about = "Part-level grasping from dialogue on synthetic RGB-D scenes")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, env = "PARTGRASP_CONFIG")]
    config: Option<PathBuf>,
    /// Chat backend; overrides the config file and PARTGRASP_BACKEND.
    #[arg(long, global = true, value_enum)]
    backend: Option<BackendKind>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a scene to color/depth/label PNGs.
    Render {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replay a dialogue script and execute the resulting sequence.
    Run {
        #[arg(long)]
        scene: PathBuf,
        /// One message per line.
        #[arg(long)]
        script: PathBuf,
        /// Grasp sampling seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluation entry points.
    Eval {
        #[command(subcommand)]
        command: EvalCommand,
    },
    /// Generate the wall-adjacency ablation suite.
    GenSuite {
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Start the HTTP service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
    },
}

#[derive(Subcommand)]
enum EvalCommand {
    /// SU/SO/IG per instruction level.
    Metrics {
        #[arg(long)]
        gold: PathBuf,
        /// JSON list of {instruction, output}; grades the gold set against itself when absent.
        #[arg(long)]
        predictions: Option<PathBuf>,
        /// Also write the report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Compare localization strategies on a saved suite.
    Ablation {
        #[arg(long)]
        suite: PathBuf,
        /// Grasp sampling seed.
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

fn load_scene(path: &Path) -> Result<SceneDescription<f64>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let scene: SceneDescription<f64> =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    scene.validate().with_context(|| format!("validating {}", path.display()))?;
    Ok(scene)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?).with_context(|| format!("writing {}", path.display()))
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let mut config = ServiceConfig::load(cli.config.as_deref())?;
    if let Some(b) = cli.backend {
        config.backend = b;
    }

    match cli.command {
        Command::Render { scene, out } => {
            let frame = render(&load_scene(&scene)?)?;
            export_frame(&frame, &out)?;
            println!("wrote {}", out.display());
        }
        Command::Run {
            scene,
            script,
            seed,
            out,
        } => {
            let scene = load_scene(&scene)?;
            let text = std::fs::read_to_string(&script).with_context(|| format!("reading {}", script.display()))?;
            let backend = config.build_backend()?;
            let mut pipeline = config.pipeline.clone();
            pipeline.grasp.seed = seed;
            let top_n = pipeline.top_n;
            let session = replay(scene, &script_lines(&text), pipeline, &*backend)?;
            write_outputs(&session, &out, top_n)?;
            for s in session.steps() {
                let r = &s.result;
                match &r.failure {
                    None => println!("step {} {} {}: ok ({} grasps)", r.index, r.action.as_str(), r.target, r.candidates),
                    Some(f) => println!("step {} {} {}: {} ({})", r.index, r.action.as_str(), r.target, f.code, f.message),
                }
            }
            println!("state: {}; wrote {}", session.state(), out.display());
        }
        Command::Eval { command } => match command {
            EvalCommand::Metrics {
                gold,
                predictions,
                json,
            } => {
                let gold = load_gold(&gold)?;
                let records = match predictions {
                    Some(p) => grade_all(&gold, &load_predictions(&p)?),
                    None => grade_self(&gold),
                };
                let report = MetricsReport::compute(&records)?;
                print!("{}", report.to_text());
                if let Some(path) = json {
                    write_json(&path, &report)?;
                }
            }
            EvalCommand::Ablation { suite, seed, json } => {
                let (_, scenes) = load_suite::<f64>(&suite)?;
                if scenes.is_empty() {
                    bail!("suite {} has no scenes", suite.display());
                }
                let start = std::time::Instant::now();
                let report = run_ablation(&scenes, &Strategy::ALL, &AblationConfig::with_seed(seed))?;
                print!("{}", report.to_text());
                println!("elapsed: {:.1} s", start.elapsed().as_secs_f64());
                if let Some(path) = json {
                    write_json(&path, &report)?;
                }
            }
        },
        Command::GenSuite { seed, count, out } => {
            save_suite(&out, seed, &generate_suite(seed, count))?;
            println!("wrote {count} scenes to {}", out.display());
        }
        Command::Serve { addr } => {
            let backend = config.build_backend()?;
            let state = AppState::new(backend, config.pipeline);
            tokio::runtime::Runtime::new()?.block_on(serve(&addr, state))?;
        }
    }
    Ok(())
}

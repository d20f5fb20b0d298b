use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;
use occlugrasp::config::PipelineConfig;
use occlugrasp::depth::io::{write_pfm, write_pgm};
use occlugrasp::executor::{run_episode, Episode, Mode};
use occlugrasp::geometry::ply::write_ply;
use occlugrasp::geometry::Pose;
use occlugrasp::seed::derive_seed;
use occlugrasp::sim::{base_pose, generate_scene, run_paired_benchmark, sample_initial_base, Scene, Template};

/// Grasp planning under occlusion: scene generation, single runs and the
/// paired full-versus-baseline benchmark.
#[derive(Parser)]
#[command(name = "occlugrasp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthetic scene files.
    Scene {
        #[command(subcommand)]
        action: SceneAction,
    },
    /// Run one episode and export its artifacts.
    Run(RunArgs),
    /// Paired benchmark over seeded scenes.
    Bench(BenchArgs),
    /// Configuration files.
    Config {
        #[command(subcommand)]
        action: ConfigAction,
    },
}

#[derive(Subcommand)]
enum SceneAction {
    Generate {
        #[arg(long, value_parser = parse_template)]
        template: Template,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum ConfigAction {
    /// Write the default configuration (stdout without --out).
    Init {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    scene: PathBuf,
    /// Object id, matched exactly and then as a substring.
    #[arg(long)]
    target: String,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "full", value_parser = parse_mode)]
    mode: Mode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Initial base as `x,y,yaw_deg`; sampled from the seed when omitted.
    #[arg(long, value_parser = parse_base, allow_hyphen_values = true)]
    base: Option<Pose>,
    #[arg(long)]
    export: Option<PathBuf>,
    /// Also export every depth frame (PFM) and target mask (PGM).
    #[arg(long)]
    frames: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "drill,bottle", value_parser = parse_template)]
    templates: Vec<Template>,
    #[arg(long, default_value_t = 10)]
    pairs: usize,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn parse_template(s: &str) -> Result<Template, String> {
    s.parse().map_err(|e: occlugrasp::Error| e.to_string())
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse().map_err(|e: occlugrasp::Error| e.to_string())
}

fn parse_base(s: &str) -> Result<Pose, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}")))
        .collect::<Result<_, _>>()?;
    match v[..] {
        [x, y, yaw] if v.iter().all(|c| c.is_finite()) => Ok(base_pose(x, y, yaw.to_radians())),
        _ => Err("expected three finite numbers `x,y,yaw_deg`".into()),
    }
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        Some(p) => PipelineConfig::load(p).with_context(|| format!("reading config {}", p.display())),
        None => Ok(PipelineConfig::default()),
    }
}

fn scene_generate(template: Template, seed: u64, out: &Path) -> Result<()> {
    let scene = generate_scene(template, seed);
    scene.save(out).with_context(|| format!("writing {}", out.display()))?;
    for o in &scene.objects {
        let t = o.pose.translation;
        let tag = if o.is_target { " (target)" } else { "" };
        println!("{:<12} {:<10} at ({:.3}, {:.3}, {:.3}){tag}", o.id, o.shape.kind(), t.x, t.y, t.z);
    }
    println!("scene {} written to {}", scene.hash(), out.display());
    Ok(())
}

fn export(episode: &Episode, dir: &Path, frames: bool) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let a = &episode.artifacts;
    for (name, cloud) in [("partial", &a.partial), ("mid", &a.mid), ("complete", &a.complete)] {
        if let Some(c) = cloud {
            write_ply(c, dir.join(format!("{name}.ply")))?;
        }
    }
    fs::write(dir.join("grasps.json"), serde_json::to_string_pretty(&a.grasps)? + "\n")?;
    fs::write(dir.join("trial.json"), serde_json::to_string_pretty(&episode.result)? + "\n")?;
    fs::write(dir.join("fsm.log"), &a.fsm_log)?;
    if frames {
        for (i, f) in a.frames.iter().enumerate() {
            write_pfm(&f.depth, dir.join(format!("frame{i}_depth.pfm")))?;
            write_pgm(&f.mask, dir.join(format!("frame{i}_mask.pgm")))?;
        }
    }
    Ok(())
}

fn run(args: &RunArgs) -> Result<bool> {
    let scene = Scene::load(&args.scene).with_context(|| format!("reading scene {}", args.scene.display()))?;
    let config = load_config(args.config.as_deref())?;
    let base = match &args.base {
        Some(b) => b.clone(),
        None => {
            let target = scene.resolve_target(&args.target)?;
            let mut probe = scene.clone();
            for o in &mut probe.objects {
                o.is_target = o.id == target.id;
            }
            sample_initial_base(&probe, &config, derive_seed(args.seed, 1))?
        }
    };
    let episode = run_episode(&scene, &args.target, &config, args.mode, args.seed, &base)?;
    if let Some(dir) = &args.export {
        export(&episode, dir, args.frames)?;
        info!("artifacts written to {}", dir.display());
    }
    let r = &episode.result;
    match r.failure_mode {
        None => println!("{} {}: success", r.target, r.mode),
        Some(m) => println!("{} {}: failure {m}", r.target, r.mode),
    }
    Ok(r.success)
}

fn bench(args: &BenchArgs) -> Result<()> {
    if args.templates.is_empty() {
        bail!("no templates given");
    }
    let config = load_config(args.config.as_deref())?;
    let results = run_paired_benchmark(&args.templates, args.pairs, &config, args.seed)?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    fs::write(args.out.join("results.json"), results.to_json()? + "\n")?;
    fs::write(args.out.join("results.csv"), results.to_csv()?)?;
    let table = results.table();
    fs::write(args.out.join("table.txt"), &table)?;
    print!("{table}");
    Ok(())
}

fn config_init(out: Option<&Path>) -> Result<()> {
    let config = PipelineConfig::default();
    match out {
        Some(p) => config.save(p).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all((config.to_json()? + "\n").as_bytes())?;
            Ok(stdout.flush()?)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match &cli.command {
        Command::Scene {
            action: SceneAction::Generate { template, seed, out },
        } => scene_generate(*template, *seed, out).map(|_| true),
        Command::Run(args) => run(args),
        Command::Bench(args) => bench(args).map(|_| true),
        Command::Config {
            action: ConfigAction::Init { out },
        } => config_init(out.as_deref()).map(|_| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

//! `c2f`: scenario runner, replay auditor, detector trainer and plotter.
//!
//! Exit codes: 0 success, 1 failed verdict or audit violations, 2 usage,
//! input or format errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use c2f_core::kinematics::{random_configuration, ClosedChainSystem};
use c2f_core::perception::Scene;
use c2f_core::planner::{train_arm_proxies, LearningConfig, TrajectoryTable};
use c2f_core::proxy::{ground_truth_collision, GeometricWorld};
use c2f_harness::config::robot_preset;
use c2f_harness::plot::run_figures;
use c2f_harness::{replay_audit_timed, run_scenario, AuditConfig, HarnessError, RunOptions, RunReport, ScenarioConfig};
use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "c2f", version, about = "Closed-chain coarse-to-fine planning scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write trajectory, report, scenario copy and figures.
    Run {
        config: PathBuf,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the MPC step limit.
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Replay a trajectory table against a ground-truth world.
    Audit {
        trajectory: PathBuf,
        /// Scene file (c2f-scene) or scenario file (c2f-scenario).
        world: PathBuf,
        /// Robot preset used with scene files.
        #[arg(long, default_value = "planar-dual-arm")]
        robot: String,
        #[arg(long, default_value_t = 10)]
        oversample: usize,
    },
    /// Train the per-arm collision detectors for a world and report accuracy.
    TrainDetector {
        world: PathBuf,
        #[arg(long, default_value = "planar-dual-arm")]
        robot: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Override the number of initial training samples.
        #[arg(long)]
        samples: Option<usize>,
        /// Held-out configurations used for the accuracy estimate.
        #[arg(long, default_value_t = 2000)]
        holdout: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Redraw figures from a report and the trajectory and scenario beside it.
    Plot {
        report: PathBuf,
        /// Defaults to the report's directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// A world file together with how to ask it for the world at a time.
enum WorldSource {
    Static(GeometricWorld, ClosedChainSystem),
    Scenario(Box<ScenarioConfig>),
}

impl WorldSource {
    fn system(&self) -> Result<ClosedChainSystem, HarnessError> {
        match self {
            WorldSource::Static(_, s) => Ok(s.clone()),
            WorldSource::Scenario(cfg) => cfg.system(),
        }
    }

    fn at(&self, t: f64) -> GeometricWorld {
        match self {
            WorldSource::Static(w, _) => w.clone(),
            WorldSource::Scenario(cfg) => cfg.geometric_world_at(t),
        }
    }
}

fn read(path: &Path) -> Result<String, HarnessError> {
    fs::read_to_string(path).map_err(|e| HarnessError::InvalidConfig(format!("{}: {e}", path.display())))
}

fn load_world(path: &Path, robot: &str) -> Result<WorldSource, HarnessError> {
    let text = read(path)?;
    if text.lines().any(|l| l.trim_start().starts_with("format") && l.contains("c2f-scenario")) {
        return Ok(WorldSource::Scenario(Box::new(ScenarioConfig::from_toml(&text)?)));
    }
    let scene = Scene::from_toml(&text)?;
    Ok(WorldSource::Static(scene.world()?, robot_preset(robot)?))
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), HarnessError> {
    fs::write(dir.join(name), contents)?;
    Ok(())
}

fn run(config: &Path, seed: Option<u64>, steps: Option<usize>, out: &Path) -> Result<bool, HarnessError> {
    let mut cfg = ScenarioConfig::from_toml(&read(config)?)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(s) = steps {
        cfg.max_steps = s;
    }
    let output = run_scenario(&cfg, RunOptions::default())?;
    fs::create_dir_all(out)?;
    write(out, "trajectory.txt", &output.table.to_text())?;
    write(out, "report.txt", &output.report.to_text())?;
    write(out, "scenario.toml", &cfg.to_toml())?;
    for (name, svg) in run_figures(&output.report, &output.table, &cfg)? {
        write(out, &name, &svg)?;
    }
    let s = &output.summary;
    println!("scenario {} seed {} steps {}", cfg.name, cfg.seed, output.report.records.len());
    println!("reveal step {}", s.reveal_step.map_or("-".into(), |k| k.to_string()));
    println!("replanning entries {:?} exits {:?}", s.replanning_entries, s.replanning_exits);
    println!("min static clearance {:.4e}", output.report.min_static());
    println!("min dynamic clearance {:.4e}", output.report.min_dynamic());
    println!("max chain residual {:.4e}", output.report.max_chain_residual());
    let v = &output.report.verdict;
    println!("verdict {}", if v.passed { "pass" } else { "fail" });
    for r in &v.reasons {
        println!("  {r}");
    }
    Ok(v.passed)
}

fn audit(trajectory: &Path, world: &Path, robot: &str, oversample: usize) -> Result<bool, HarnessError> {
    let table = TrajectoryTable::from_text(&read(trajectory)?)?;
    let source = load_world(world, robot)?;
    let cfg = AuditConfig { oversample, ..AuditConfig::default() };
    let report = replay_audit_timed(&table, &|t| source.at(t), &source.system()?, &cfg)?;
    print!("{}", report.to_text());
    Ok(report.is_clean())
}

fn train_detector(
    world: &Path,
    robot: &str,
    seed: u64,
    samples: Option<usize>,
    holdout: usize,
    out: &Path,
) -> Result<(), HarnessError> {
    let source = load_world(world, robot)?;
    let system = source.system()?;
    let geometry = source.at(0.0);
    let mut cfg = match &source {
        WorldSource::Scenario(c) => c.learning_config(),
        WorldSource::Static(..) => LearningConfig::default(),
    };
    if let Some(n) = samples {
        cfg.initial_samples = n;
    }
    let proxies = train_arm_proxies(&system, &geometry, &[], &cfg, seed)?;
    fs::create_dir_all(out)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for (arm, p) in proxies.iter().enumerate() {
        write(out, &format!("detector_arm{arm}.txt"), &p.detector.to_text())?;
        let mut correct = 0;
        for _ in 0..holdout {
            let q = random_configuration(&p.model, &mut rng);
            let truth = ground_truth_collision(&geometry, &p.model, &q)?.iter().flatten().any(|h| *h);
            correct += (p.detector.predicts_collision(&p.model, &q)? == truth) as usize;
        }
        let per_group: Vec<String> = p.detector.sets.iter().map(|s| s.len().to_string()).collect();
        println!(
            "arm {arm}: support {} [{}] held-out accuracy {:.4}",
            p.detector.total_support(),
            per_group.join(" "),
            correct as f64 / holdout.max(1) as f64
        );
    }
    Ok(())
}

fn plot(report: &Path, out: Option<&Path>) -> Result<(), HarnessError> {
    let dir = report.parent().unwrap_or(Path::new("."));
    let rep = RunReport::from_text(&read(report)?)?;
    let table = TrajectoryTable::from_text(&read(&dir.join("trajectory.txt"))?)?;
    let cfg = ScenarioConfig::from_toml(&read(&dir.join("scenario.toml"))?)?;
    let out = out.unwrap_or(dir);
    fs::create_dir_all(out)?;
    for (name, svg) in run_figures(&rep, &table, &cfg)? {
        write(out, &name, &svg)?;
        println!("wrote {}", out.join(name).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config, seed, steps, out } => run(config, *seed, *steps, out),
        Command::Audit { trajectory, world, robot, oversample } => audit(trajectory, world, robot, *oversample),
        Command::TrainDetector { world, robot, seed, samples, holdout, out } => {
            train_detector(world, robot, *seed, *samples, *holdout, out).map(|_| true)
        }
        Command::Plot { report, out } => plot(report, out.as_deref()).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

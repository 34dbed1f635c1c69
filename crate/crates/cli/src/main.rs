use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use dseg_core::eval::EvalReport;
use dseg_core::pipeline::{
    evaluate_run, run_all, run_stage, threads_from_env, with_threads, EvalSummary, PipelineConfig, RunContext,
    Stage,
};

/// LiDAR-guided unsupervised semantic segmentation.
#[derive(Parser)]
#[command(name = "dseg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration; defaults apply to every key it leaves out.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Frame manifest (default: <out>/manifest.toml).
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Output directory (default: `out_dir` from the configuration).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the root seed of the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic frames and their manifest.
    Synth(Common),
    /// Ground and object segmentation of every range image.
    Segment(Common),
    /// Project range segments into the images and densify them.
    Project(Common),
    /// Cluster segment descriptors into pseudo-labels.
    Cluster(Common),
    /// Train the teacher on pseudo-labels.
    TrainTeacher(Common),
    /// Vote teacher predictions inside segments.
    Refine(Common),
    /// Train the student on refined maps.
    TrainStudent(Common),
    /// Score teacher, refined maps and student against ground truth.
    Eval(Common),
    /// Run every stage in order.
    Pipeline(Common),
    /// Print the default configuration.
    DefaultConfig,
}

fn context(common: &Common) -> Result<RunContext> {
    let mut config = match &common.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    let out = common.out.clone().unwrap_or_else(|| config.out_dir.clone());
    Ok(RunContext::with_paths(config, out, common.manifest.clone()))
}

fn print_report(name: &str, r: &EvalReport) {
    let miou = r.miou.map_or("undefined".to_string(), |m| format!("{m:.4}"));
    println!("{name:<8} mIoU {miou}  PA {:.4}", r.pixel_accuracy);
}

fn print_summary(s: &EvalSummary) {
    print_report("teacher", &s.teacher);
    print_report("refined", &s.refined);
    print_report("student", &s.student);
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let (stage, common) = match &cli.command {
        Command::DefaultConfig => {
            print!("{}", PipelineConfig::default().to_toml()?);
            return Ok(());
        }
        Command::Synth(c) => (Some(Stage::Synth), c),
        Command::Segment(c) => (Some(Stage::Segment), c),
        Command::Project(c) => (Some(Stage::Project), c),
        Command::Cluster(c) => (Some(Stage::Cluster), c),
        Command::TrainTeacher(c) => (Some(Stage::TrainTeacher), c),
        Command::Refine(c) => (Some(Stage::Refine), c),
        Command::TrainStudent(c) => (Some(Stage::TrainStudent), c),
        Command::Eval(c) => (Some(Stage::Eval), c),
        Command::Pipeline(c) => (None, c),
    };
    let ctx = context(common)?;
    let threads = threads_from_env()?;
    with_threads(threads, || -> Result<()> {
        match stage {
            None => print_summary(&run_all(&ctx).context("pipeline failed")?),
            Some(Stage::Eval) => print_summary(&evaluate_run(&ctx).context("stage `eval` failed")?),
            Some(s) => run_stage(s, &ctx).with_context(|| format!("stage `{s}` failed"))?,
        }
        Ok(())
    })?
}

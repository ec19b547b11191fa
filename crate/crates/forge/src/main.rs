use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use forge::commands::{self, CloudSource, Responder};
use forge::config::{Overrides, PipelineConfig};
use forge::{ForgeError, Result};
use forge_core::markers::MarkerStyle;
use forge_core::prompts::PromptVariant;
use forge_core::tasks::TaskKind;
use forge_core::{Intrinsics, Pixel};

#[derive(Parser, Debug)]
#[command(name = "forge", version, about = "Metric depth QA data preparation and evaluation")]
struct Cli {
    /// Pipeline config (TOML). Defaults apply for anything it omits.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Prompt variant, e.g. marker_plain, marker_grpo, text_coordinate.
    #[arg(long, global = true, value_parser = parse_variant)]
    variant: Option<PromptVariant>,
    /// Restrict to a single task, e.g. distance, speed, pose.
    #[arg(long, global = true, value_parser = parse_task)]
    task: Option<TaskKind>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct ManifestOut {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render SFT question/answer samples from a manifest.
    Prepare(ManifestOut),
    /// Query the configured endpoint or oracle and report metrics.
    Eval(ManifestOut),
    /// Evaluate a constant-depth predictor.
    Baseline {
        #[command(flatten)]
        io: ManifestOut,
        #[arg(long, default_value_t = 2.0)]
        constant: f64,
    },
    /// Score GRPO rollouts and emit group advantages.
    Reward {
        #[arg(long)]
        rollouts: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Query a pixel grid and write a PLY point cloud.
    Pointcloud {
        #[arg(long, requires = "id", conflicts_with_all = ["image", "intrinsics"])]
        manifest: Option<PathBuf>,
        /// Manifest entry id.
        #[arg(long)]
        id: Option<String>,
        #[arg(long, requires = "intrinsics")]
        image: Option<PathBuf>,
        /// fx,fy,cx,cy
        #[arg(long, value_parser = parse_intrinsics)]
        intrinsics: Option<Intrinsics>,
        /// Grid size; defaults to the config value.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw markers on an image.
    Render {
        #[arg(long)]
        image: PathBuf,
        /// u,v (repeatable; several pixels get labels A, B, ...)
        #[arg(long = "pixel", value_parser = parse_pixel, required = true)]
        pixels: Vec<Pixel>,
        #[arg(long, value_parser = parse_style)]
        style: Option<MarkerStyle>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the synthetic dataset described by the [synth] config section.
    Synth {
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_variant(s: &str) -> std::result::Result<PromptVariant, String> {
    PromptVariant::from_name(s).ok_or_else(|| format!("unknown prompt variant {s:?}"))
}

fn parse_task(s: &str) -> std::result::Result<TaskKind, String> {
    TaskKind::from_name(s).ok_or_else(|| format!("unknown task {s:?}"))
}

fn parse_style(s: &str) -> std::result::Result<MarkerStyle, String> {
    match s {
        "arrow" => Ok(MarkerStyle::Arrow),
        "cross" => Ok(MarkerStyle::Cross),
        "circle" => Ok(MarkerStyle::Circle),
        _ => Err(format!("unknown marker style {s:?}")),
    }
}

fn floats(s: &str, n: usize) -> std::result::Result<Vec<f64>, String> {
    let v: Vec<f64> = s.split(',').map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"))).collect::<std::result::Result<_, _>>()?;
    if v.len() != n {
        return Err(format!("expected {n} comma-separated numbers, got {}", v.len()));
    }
    Ok(v)
}

fn parse_pixel(s: &str) -> std::result::Result<Pixel, String> {
    let v = floats(s, 2)?;
    Ok(Pixel::new(v[0], v[1]))
}

fn parse_intrinsics(s: &str) -> std::result::Result<Intrinsics, String> {
    let v = floats(s, 4)?;
    Intrinsics::new(v[0], v[1], v[2], v[3]).map_err(|e| e.to_string())
}

fn print_eval(summary: &commands::EvalSummary) -> Result<()> {
    print!("{}", forge::report::to_table(&summary.report));
    println!("wrote {}", summary.files.table.display());
    if let Some(why) = &summary.aborted {
        return Err(ForgeError::Transport { attempts: 0, status: None, message: why.clone() });
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let overrides = Overrides { seed: cli.seed, variant: cli.variant, task: cli.task };
    let cfg = PipelineConfig::load(cli.config.as_deref(), &overrides)?;
    match cli.command {
        Command::Prepare(io) => {
            let s = commands::prepare(&cfg, &io.manifest, &io.out)?;
            for (task, n) in &s.counts {
                println!("{:<24} {n}", task.name());
            }
            println!("wrote {}", s.sft.display());
        }
        Command::Eval(io) => {
            let responder = Responder::from_config(&cfg)?;
            print_eval(&commands::evaluate(&cfg, &io.manifest, &io.out, &responder)?)?;
        }
        Command::Baseline { io, constant } => print_eval(&commands::baseline(&cfg, &io.manifest, &io.out, constant)?)?,
        Command::Reward { rollouts, out } => {
            let (path, lines) = commands::reward(&cfg, &rollouts, &out)?;
            let flagged = lines.iter().filter(|l| l.flagged).count();
            println!("{} rollouts, {flagged} at the format floor; wrote {}", lines.len(), path.display());
        }
        Command::Pointcloud { manifest, id, image, intrinsics, n, out } => {
            let source = match (manifest, id, image, intrinsics) {
                (Some(manifest), Some(id), None, None) => CloudSource::Entry { manifest, id },
                (None, None, Some(path), Some(intrinsics)) => CloudSource::Image { path, intrinsics },
                _ => return Err(ForgeError::Config("pass --manifest with --id, or --image with --intrinsics".into())),
            };
            let responder = Responder::from_config(&cfg)?;
            let s = commands::pointcloud(&cfg, &source, n.unwrap_or(cfg.pointcloud.n), &out, &responder)?;
            let fmt = |v: Option<f64>| v.map(|x| format!("{x:.3} m")).unwrap_or_else(|| "-".into());
            println!(
                "{} points ({} failures), median depth {}, median distance {}; wrote {}",
                s.points,
                s.failures,
                fmt(s.median_depth),
                fmt(s.median_distance),
                s.ply.display()
            );
        }
        Command::Render { image, pixels, style, out } => {
            commands::render(&cfg, &image, &pixels, style, &out)?;
            println!("wrote {}", out.display());
        }
        Command::Synth { out } => {
            let m = commands::synth(&cfg, &out)?;
            cfg.write_resolved(m.parent().unwrap_or(Path::new(".")))?;
            println!("wrote {}", m.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
        Err(_) => ExitCode::from(4),
    }
}

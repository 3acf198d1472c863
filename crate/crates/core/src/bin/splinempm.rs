use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use splinempm::fbar::ProjectionMode;
use splinempm::io::{convergence_csv, convergence_report, execute, list_scenes, RunManifest, SceneSource};
use splinempm::{Error, Result};

#[derive(Parser)]
#[command(name = "splinempm", version, about = "Explicit B-spline MPM with F-bar projection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a named scene or a TOML scene file.
    Run {
        scene: String,
        #[arg(long)]
        degree: Option<usize>,
        #[arg(long, value_parser = parse_projection)]
        projection: Option<ProjectionMode>,
        #[arg(long)]
        level: Option<u32>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        cadence: Option<u64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        tend: Option<f64>,
    },
    /// Run a scene at several levels and report observed orders.
    Converge {
        scene: String,
        #[arg(long, default_value_t = 2)]
        degree: usize,
        #[arg(long, value_parser = parse_projection, default_value = "pminus1")]
        projection: ProjectionMode,
        /// Inclusive range such as `1..3`.
        #[arg(long, default_value = "1..3", value_parser = parse_levels)]
        levels: (u32, u32),
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    ListScenes,
}

fn parse_projection(s: &str) -> std::result::Result<ProjectionMode, String> {
    ProjectionMode::parse(s).ok_or_else(|| format!("expected off, constants or pminus1, got `{s}`"))
}

fn parse_levels(s: &str) -> std::result::Result<(u32, u32), String> {
    let parsed = match s.split_once("..") {
        Some((a, b)) => a.parse().ok().zip(b.trim_start_matches('=').parse().ok()),
        None => s.parse().ok().map(|l| (l, l)),
    };
    match parsed {
        Some((a, b)) if a >= 1 && a <= b => Ok((a, b)),
        _ => Err(format!("expected a level range like 1..3, got `{s}`")),
    }
}

fn source(scene: &str) -> SceneSource {
    let path = Path::new(scene);
    if scene.ends_with(".toml") || path.is_file() {
        SceneSource::File { path: path.into() }
    } else {
        SceneSource::Named { name: scene.into() }
    }
}

fn run_manifest(m: &RunManifest) -> Result<splinempm::io::RunOutcome> {
    for w in m.resolve()?.warnings() {
        eprintln!("warning: {w}");
    }
    execute(m)
}

fn report(outcome: &splinempm::io::RunOutcome) {
    let s = &outcome.summary;
    let mut out = std::io::stdout().lock();
    let _ = writeln!(
        out,
        "{}: {} particles, {} steps, t = {:.6e} s, wall {:.2} s",
        outcome.config.name,
        outcome.state.particles.len(),
        s.steps,
        s.final_time,
        s.wall_time.as_secs_f64()
    );
    for (name, value) in &outcome.metrics {
        let _ = writeln!(out, "  {name} = {value:.10e}");
    }
}

fn main_inner(cli: Cli) -> Result<()> {
    match cli.command {
        Command::ListScenes => {
            let mut out = std::io::stdout().lock();
            for name in list_scenes() {
                let _ = writeln!(out, "{name}");
            }
        }
        Command::Run {
            scene,
            degree,
            projection,
            level,
            out,
            cadence,
            dt,
            tend,
        } => {
            let mut m = RunManifest::new(source(&scene), out);
            m.overrides.degree = degree;
            m.overrides.projection = projection;
            m.overrides.level = level;
            m.overrides.dt = dt;
            m.overrides.t_end = tend;
            m.cadence = cadence;
            report(&run_manifest(&m)?);
        }
        Command::Converge {
            scene,
            degree,
            projection,
            levels,
            out,
        } => {
            let mut runs = Vec::new();
            for level in levels.0..=levels.1 {
                let mut m = RunManifest::new(
                    SceneSource::Named { name: scene.clone() },
                    out.join(format!("level{level}")),
                );
                m.overrides.degree = Some(degree);
                m.overrides.projection = Some(projection);
                m.overrides.level = Some(level);
                let outcome = run_manifest(&m)?;
                report(&outcome);
                let (_, value) = outcome
                    .metrics
                    .first()
                    .cloned()
                    .ok_or_else(|| Error::config("scene", "scene reports no metrics"))?;
                let h = outcome.state.grid.basis().cell_size()[0];
                runs.push((level, h, value));
            }
            let csv = convergence_csv(&convergence_report(&runs));
            std::fs::write(out.join("convergence.csv"), &csv).map_err(|e| Error::Io {
                path: out.join("convergence.csv"),
                source: e,
            })?;
            let _ = std::io::stdout().write_all(csv.as_bytes());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

use std::fs::{self, File};
use std::io::BufWriter;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use foldwright::dxf::{export_dxf, parse_dxf};
use foldwright::ops::{self, to_json, OpError, OpResult, OptimizeReport, OptimizeRequest};
use foldwright::project::{preset_project, validate_project, DesignSection, Preset, Project};
use foldwright::service::{serve, AppState};
use foldwright::svg::{export_svg, SvgStyle};
use foldwright::trace::{write_optimization_trace, write_simulation_trace};
use foldwright_core::presets::{FIVE_UNIT_COPIES, FIVE_UNIT_WIDTH};
use serde::Serialize;

/// Design, fold, actuate and fabricate origami strings and sheets.
#[derive(Debug, Parser)]
#[command(name = "foldwright", version)]
struct Cli {
    /// Project document to read (and, for editing commands, update).
    #[arg(short, long, global = true, default_value = "project.json")]
    project: PathBuf,
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write a machine-readable JSON report here.
    #[arg(long, global = true)]
    report: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Create a new project document.
    Init {
        #[arg(long, value_enum, default_value = "empty")]
        preset: Preset,
        /// Replace an existing file.
        #[arg(long)]
        force: bool,
    },
    /// Check the project and list every problem found.
    Validate,
    /// Synthesize the crease pattern from the transition graph.
    Design,
    /// Search for transition graphs that perform the project's task.
    Optimize {
        #[arg(long, default_value_t = 10)]
        runs: usize,
        #[arg(long)]
        max_generations: Option<usize>,
        /// Per-generation CSV trace.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Store the best design (and its pattern) in the project.
        #[arg(long)]
        apply: bool,
    },
    /// Fold the pattern rigidly and report the geometry.
    Fold(FoldArgs),
    /// Run the quasi-static string simulation.
    Simulate {
        /// Per-state CSV trace.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Write the four printable STL parts.
    Fabricate {
        #[arg(short, long, default_value = "stl")]
        out_dir: PathBuf,
    },
    /// Read a crease pattern from a DXF drawing into the project.
    ImportDxf { input: PathBuf },
    /// Write the crease pattern as a DXF drawing.
    ExportDxf { output: PathBuf },
    /// Write the crease pattern as an SVG drawing.
    ExportSvg { output: PathBuf },
    /// Serve the project over HTTP on localhost.
    Serve {
        #[arg(long, default_value_t = 8731)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
    },
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct FoldArgs {
    /// Fold angle in radians.
    #[arg(long)]
    theta: Option<f64>,
    /// Fold angle in degrees.
    #[arg(long)]
    degrees: Option<f64>,
}

fn load(path: &Path) -> OpResult<Project> {
    Project::load(path).map_err(|e| match e {
        foldwright::project::ProjectError::Io(io) => OpError::io(path, io),
        other => other.into(),
    })
}

fn save(project: &Project, path: &Path) -> OpResult<()> {
    fs::write(path, project.to_json()).map_err(|e| OpError::io(path, e))
}

fn write_text(path: &Path, text: &str) -> OpResult<()> {
    fs::write(path, text).map_err(|e| OpError::io(path, e))
}

fn create(path: &Path) -> OpResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| OpError::io(path, e))
}

fn report<T: Serialize>(cli: &Cli, value: &T) -> OpResult<()> {
    match &cli.report {
        Some(path) => write_text(path, &to_json(value)),
        None => Ok(()),
    }
}

fn run(cli: &Cli) -> OpResult<()> {
    match &cli.command {
        Command::Init { preset, force } => {
            if cli.project.exists() && !force {
                return Err(OpError::Usage(format!(
                    "{} already exists (use --force to replace it)",
                    cli.project.display()
                )));
            }
            let project = preset_project(*preset);
            save(&project, &cli.project)?;
            println!("wrote {}", cli.project.display());
            report(cli, &project)
        }
        Command::Validate => {
            let project = load(&cli.project)?;
            let issues = validate_project(&project);
            report(cli, &issues)?;
            for i in &issues {
                println!("{}: {}", i.path, i.message);
            }
            if issues.is_empty() {
                println!("project is valid");
                Ok(())
            } else {
                Err(OpError::Invalid(issues))
            }
        }
        Command::Design => {
            let mut project = load(&cli.project)?;
            let pattern = ops::synthesize(&project)?;
            println!(
                "{} vertices, {} creases, {} panels",
                pattern.vertices.len(),
                pattern.creases.len(),
                pattern.panels.len()
            );
            report(cli, &pattern)?;
            project.pattern = Some(pattern);
            save(&project, &cli.project)
        }
        Command::Optimize {
            runs,
            max_generations,
            trace,
            apply,
        } => {
            let mut project = load(&cli.project)?;
            let request = OptimizeRequest {
                runs: *runs,
                seed: cli.seed,
                max_generations: *max_generations,
            };
            let result = ops::optimize(&project, &request, &|_, _| {})?;
            let summary = OptimizeReport::from_result(&request, &result);
            report(cli, &summary)?;
            if let Some(path) = trace {
                write_optimization_trace(create(path)?, &result.runs)?;
            }
            for (rank, r) in summary.ranking.iter().enumerate() {
                println!(
                    "#{:<2} run {:<2} fitness {:>9.4}  d_end {:>8.3} mm  improper {}",
                    rank + 1,
                    r.run,
                    r.breakdown.fitness,
                    r.breakdown.end_distance,
                    r.breakdown.improper_count
                );
            }
            if let Some(d) = &summary.diagnostic {
                println!("{d}");
            }
            if *apply {
                let best = summary
                    .ranking
                    .first()
                    .ok_or_else(|| OpError::Usage("no admissible design to apply".into()))?;
                let (unit_width, copies) = project
                    .design
                    .as_ref()
                    .map_or((FIVE_UNIT_WIDTH, FIVE_UNIT_COPIES), |d| (d.unit_width, d.copies));
                project.design = Some(DesignSection {
                    transition_graph: best.design.clone(),
                    unit_width,
                    copies,
                });
                project.pattern = Some(ops::synthesize(&project)?);
                project.provenance.seed = Some(cli.seed);
                save(&project, &cli.project)?;
            }
            Ok(())
        }
        Command::Fold(args) => {
            let project = load(&cli.project)?;
            let theta = args.theta.unwrap_or_else(|| args.degrees.unwrap_or(0.0).to_radians());
            let snap = ops::fold(&project, theta)?;
            println!(
                "theta {:.6} rad ({:.3}°), {} panels, closure residual {:.3e}",
                snap.theta,
                snap.theta.to_degrees(),
                snap.panels.len(),
                snap.closure_residual
            );
            if let Some(end) = snap.tg_polyline.last() {
                println!("chain end ({:.3}, {:.3}) mm", end.x, end.y);
            }
            report(cli, &snap)
        }
        Command::Simulate { trace } => {
            let project = load(&cli.project)?;
            let sim = ops::simulate(&project, &mut |_| {})?;
            report(cli, &sim)?;
            if let Some(path) = trace {
                write_simulation_trace(create(path)?, &sim.states)?;
            }
            match (sim.final_index, sim.final_theta) {
                (Some(i), Some(t)) => println!(
                    "{} states, final state {i} at fold angle {:.3}° (limit {:.3}°)",
                    sim.states.len(),
                    t.to_degrees(),
                    sim.theta_max.to_degrees()
                ),
                _ => println!("{} states, no final state", sim.states.len()),
            }
            Ok(())
        }
        Command::Fabricate { out_dir } => {
            let project = load(&cli.project)?;
            let model = ops::fabricate(&project)?;
            let paths = ops::write_parts(&model, out_dir)?;
            let summary = ops::fabrication_report(&model);
            for (part, path) in summary.parts.iter().zip(&paths) {
                println!(
                    "{:<30} {:>7} triangles {:>12.3} mm³{}",
                    path.display(),
                    part.triangles,
                    part.volume,
                    if part.watertight { "" } else { "  NOT WATERTIGHT" }
                );
            }
            for w in &summary.warnings {
                println!("warning: {w:?}");
            }
            report(cli, &summary)
        }
        Command::ImportDxf { input } => {
            let bytes = fs::read(input).map_err(|e| OpError::io(input, e))?;
            let import = parse_dxf(&bytes)?;
            for w in &import.warnings {
                eprintln!("warning: {w:?}");
            }
            let mut project = if cli.project.exists() {
                load(&cli.project)?
            } else {
                Project::default()
            };
            println!(
                "{} creases, {} panels from {}",
                import.pattern.creases.len(),
                import.pattern.panels.len(),
                input.display()
            );
            report(cli, &import.warnings)?;
            project.pattern = Some(import.pattern);
            project.provenance.source = Some(input.display().to_string());
            save(&project, &cli.project)
        }
        Command::ExportDxf { output } => {
            let project = load(&cli.project)?;
            write_text(output, &export_dxf(ops::require(&project.pattern, "pattern")?))
        }
        Command::ExportSvg { output } => {
            let project = load(&cli.project)?;
            let pattern = ops::require(&project.pattern, "pattern")?;
            write_text(output, &export_svg(pattern, &SvgStyle::default()))
        }
        Command::Serve { port, host } => {
            let project = load(&cli.project)?;
            ops::check(&project)?;
            let state = AppState::new(project, Some(cli.project.clone()));
            let rt = tokio::runtime::Runtime::new().map_err(|e| OpError::io(&cli.project, e))?;
            rt.block_on(serve(SocketAddr::new(*host, *port), state))
                .map_err(|e| OpError::io(&cli.project, e))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            for issue in e.issues().iter().skip(1) {
                eprintln!("  {}: {}", issue.path, issue.message);
            }
            ExitCode::from(e.exit_code())
        }
    }
}

//! Operations on a project shared by the command line and the service, so
//! that both produce the same results for the same input.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use foldwright_core::cmaes::{CmaesConfig, GenerationRecord};
use foldwright_core::fab::{fabricate as build_meshes, max_fold_angle, mesh_diagnostics, FabError, FabWarning, FabricationModel, FabricationParams, HoleMode};
use foldwright_core::fold::{embed_fold, FoldError, P3};
use foldwright_core::geom::P2;
use foldwright_core::optimize::{default_budget, evaluate_fitness, execute_run, plan_runs, rank_runs, ArmDesignResult, DesignTask, FitnessBreakdown, RankedDesign, TaskError};
use foldwright_core::pattern::{synthesize_pattern, CreasePattern, PatternError};
use foldwright_core::string_sim::{prepare, solve_quasi_static_observed, validate_routing, QuasiStaticState, RoutingPlan, RoutingReport, SetupReport, StringError};
use foldwright_core::tg::{EntryFlag, TgError, TransitionGraphDesign};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dxf::DxfError;
use crate::project::{validate_project, Issue, Project, ProjectError};
use crate::stl::StlError;

#[derive(Debug, Error)]
pub enum OpError {
    #[error("project has no `{0}` section")]
    MissingSection(&'static str),
    #[error("project failed validation ({} issue(s)); first: {}: {}", .0.len(), .0[0].path, .0[0].message)]
    Invalid(Vec<Issue>),
    #[error("fold angle {theta} rad is outside [0, {max}]")]
    ThetaOutOfRange { theta: f64, max: f64 },
    #[error("state {index} is past the end of the {len}-step schedule")]
    StepOutOfRange { index: usize, len: usize },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Design(#[from] TgError),
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error(transparent)]
    Fold(#[from] FoldError),
    #[error(transparent)]
    String(#[from] StringError),
    #[error(transparent)]
    Fab(#[from] FabError),
    #[error(transparent)]
    Dxf(#[from] DxfError),
    #[error(transparent)]
    Project(#[from] ProjectError),
    #[error(transparent)]
    Stl(#[from] StlError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl OpError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        OpError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn is_io(&self) -> bool {
        matches!(
            self,
            OpError::Io { .. } | OpError::Csv(_) | OpError::Project(ProjectError::Io(_)) | OpError::Stl(StlError::Io(_))
        )
    }

    /// 1 for validation failures, 2 for I/O failures.
    pub fn exit_code(&self) -> u8 {
        if self.is_io() {
            2
        } else {
            1
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            OpError::MissingSection(_) => "missing_section",
            OpError::Invalid(_) => "invalid_project",
            OpError::ThetaOutOfRange { .. } | OpError::StepOutOfRange { .. } | OpError::Usage(_) => "bad_request",
            OpError::Design(_) => "design",
            OpError::Pattern(_) => "pattern",
            OpError::Task(_) => "task",
            OpError::Fold(_) => "fold",
            OpError::String(_) => "string",
            OpError::Fab(_) => "fabrication",
            OpError::Dxf(_) => "dxf",
            OpError::Project(_) => "project",
            OpError::Stl(_) => "stl",
            OpError::Csv(_) | OpError::Io { .. } => "io",
        }
    }

    pub fn issues(&self) -> Vec<Issue> {
        match self {
            OpError::Invalid(issues) => issues.clone(),
            OpError::MissingSection(s) => vec![Issue {
                path: (*s).into(),
                message: "section is missing".into(),
            }],
            _ => Vec::new(),
        }
    }
}

pub type OpResult<T> = Result<T, OpError>;

pub fn check(project: &Project) -> OpResult<()> {
    let issues = validate_project(project);
    if issues.is_empty() {
        Ok(())
    } else {
        Err(OpError::Invalid(issues))
    }
}

pub fn require<'a, T>(section: &'a Option<T>, name: &'static str) -> OpResult<&'a T> {
    section.as_ref().ok_or(OpError::MissingSection(name))
}

pub fn synthesize(project: &Project) -> OpResult<CreasePattern> {
    check(project)?;
    let d = require(&project.design, "design")?;
    Ok(synthesize_pattern(&d.transition_graph, d.unit_width, d.copies)?)
}

/// Fitness of `design`, or of the project's design when none is given.
pub fn fitness(project: &Project, design: Option<&TransitionGraphDesign>) -> OpResult<FitnessBreakdown> {
    check(project)?;
    let task = require(&project.task, "task")?;
    let design = match design {
        Some(d) => d,
        None => &require(&project.design, "design")?.transition_graph,
    };
    Ok(evaluate_fitness(design, task))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeRequest {
    pub runs: usize,
    pub seed: u64,
    #[serde(default)]
    pub max_generations: Option<usize>,
}

impl Default for OptimizeRequest {
    fn default() -> Self {
        OptimizeRequest {
            runs: 10,
            seed: 0,
            max_generations: None,
        }
    }
}

impl OptimizeRequest {
    pub fn budget(&self) -> CmaesConfig {
        let mut b = default_budget();
        if let Some(g) = self.max_generations {
            b.max_generations = g;
        }
        b
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run: usize,
    pub seed: u64,
    pub first_flag: EntryFlag,
    pub generations: usize,
    pub evaluations: usize,
    pub best_fitness: f64,
    pub prohibited_hit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeReport {
    pub request: OptimizeRequest,
    pub ranking: Vec<RankedDesign>,
    pub runs: Vec<RunSummary>,
    pub diagnostic: Option<String>,
}

impl OptimizeReport {
    pub fn from_result(request: &OptimizeRequest, result: &ArmDesignResult) -> Self {
        OptimizeReport {
            request: request.clone(),
            ranking: result.ranking.clone(),
            runs: result
                .runs
                .iter()
                .map(|r| RunSummary {
                    run: r.index,
                    seed: r.seed,
                    first_flag: r.first_flag,
                    generations: r.generations.len(),
                    evaluations: r.evaluations,
                    best_fitness: r.best_breakdown.fitness,
                    prohibited_hit: r.best_breakdown.prohibited_hit,
                })
                .collect(),
            diagnostic: result.diagnostic.clone(),
        }
    }
}

/// Independent seeded runs in parallel; the result does not depend on
/// scheduling because every run owns its random stream.
pub fn optimize_task(
    task: &DesignTask,
    request: &OptimizeRequest,
    progress: &(dyn Fn(usize, &GenerationRecord) + Sync),
) -> OpResult<ArmDesignResult> {
    let specs = plan_runs(task, request.runs, request.seed)?;
    let budget = request.budget();
    let runs = specs
        .par_iter()
        .map(|spec| execute_run(task, spec, &budget, |r| progress(spec.index, r)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(rank_runs(runs))
}

pub fn optimize(
    project: &Project,
    request: &OptimizeRequest,
    progress: &(dyn Fn(usize, &GenerationRecord) + Sync),
) -> OpResult<ArmDesignResult> {
    check(project)?;
    optimize_task(require(&project.task, "task")?, request, progress)
}

/// Counts finished generations across all runs.
#[derive(Debug, Default)]
pub struct GenerationCounter(pub AtomicUsize);

impl GenerationCounter {
    pub fn tick(&self) {
        self.0.fetch_add(1, Ordering::Relaxed);
    }

    pub fn get(&self) -> usize {
        self.0.load(Ordering::Relaxed)
    }
}

/// `θ_max` of the fabrication section, or π without one.
pub fn theta_max(project: &Project) -> f64 {
    project.fab.as_ref().map_or(PI, |f| max_fold_angle(&f.params))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSnapshot {
    pub theta: f64,
    pub theta_max: f64,
    pub vertices: Vec<P3>,
    pub panels: Vec<Vec<P3>>,
    /// Projected main-crease chain starting at the origin.
    pub tg_polyline: Vec<P2>,
    pub crease_folds: Vec<f64>,
    pub closure_residual: f64,
    pub hinge_residual: f64,
}

pub fn fold_pattern(pattern: &CreasePattern, theta: f64, theta_max: f64) -> OpResult<FoldSnapshot> {
    if !(0.0..=theta_max).contains(&theta) {
        return Err(OpError::ThetaOutOfRange { theta, max: theta_max });
    }
    let folded = embed_fold(pattern, theta)?;
    Ok(FoldSnapshot {
        theta,
        theta_max,
        vertices: folded.vertex_positions(pattern),
        panels: (0..pattern.panels.len()).map(|i| folded.panel_polygon(pattern, i)).collect(),
        tg_polyline: folded.tg_polyline(pattern, P2::origin()),
        crease_folds: folded.crease_folds.clone(),
        closure_residual: folded.closure_residual,
        hinge_residual: folded.hinge_residual,
    })
}

pub fn fold(project: &Project, theta: f64) -> OpResult<FoldSnapshot> {
    check(project)?;
    fold_pattern(require(&project.pattern, "pattern")?, theta, theta_max(project))
}

pub fn routing_report(project: &Project, plan: Option<&RoutingPlan>) -> OpResult<RoutingReport> {
    let pattern = require(&project.pattern, "pattern")?;
    let plan = match plan {
        Some(p) => p,
        None => &require(&project.routing, "routing")?.plan,
    };
    Ok(validate_routing(plan, pattern))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub theta_max: f64,
    pub setup: SetupReport,
    pub final_index: Option<usize>,
    pub final_theta: Option<f64>,
    pub states: Vec<QuasiStaticState>,
}

fn run_schedule(
    project: &Project,
    schedule: &[f64],
    observer: &mut dyn FnMut(&QuasiStaticState),
) -> OpResult<SimulationReport> {
    check(project)?;
    let routing = require(&project.routing, "routing")?;
    let pattern = require(&project.pattern, "pattern")?;
    let (_, setup) = prepare(&routing.plan, pattern, &routing.tsa)?;
    let theta_max = theta_max(project);
    let states = solve_quasi_static_observed(pattern, &routing.plan, &routing.tsa, schedule, theta_max, |s| observer(s))?;
    let last = states.iter().find(|s| s.is_final);
    Ok(SimulationReport {
        theta_max,
        setup,
        final_index: last.map(|s| s.index),
        final_theta: last.map(|s| s.fold_theta),
        states,
    })
}

pub fn schedule_len(project: &Project) -> OpResult<usize> {
    Ok(require(&project.routing, "routing")?.schedule.angles().len())
}

pub fn simulate(project: &Project, observer: &mut dyn FnMut(&QuasiStaticState)) -> OpResult<SimulationReport> {
    let schedule = require(&project.routing, "routing")?.schedule.angles();
    run_schedule(project, &schedule, observer)
}

/// State `index` of the schedule, solved from the start.
pub fn simulate_step(project: &Project, index: usize) -> OpResult<QuasiStaticState> {
    let schedule = require(&project.routing, "routing")?.schedule.angles();
    if index >= schedule.len() {
        return Err(OpError::StepOutOfRange {
            index,
            len: schedule.len(),
        });
    }
    let report = run_schedule(project, &schedule[..=index], &mut |_| {})?;
    report
        .states
        .into_iter()
        .find(|s| s.index == index)
        .ok_or_else(|| OpError::Usage(format!("state {index} is past the final fold state")))
}

/// Fabrication section of the project, or the printing defaults.
pub fn fab_inputs(project: &Project) -> (FabricationParams, HoleMode) {
    project
        .fab
        .as_ref()
        .map_or((FabricationParams::default(), HoleMode::AutoCenter), |f| (f.params.clone(), f.holes.clone()))
}

pub fn fabricate(project: &Project) -> OpResult<FabricationModel> {
    check(project)?;
    let pattern = require(&project.pattern, "pattern")?;
    let (params, holes) = fab_inputs(project);
    Ok(build_meshes(pattern, &params, &holes)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartReport {
    pub name: String,
    pub file: String,
    pub triangles: usize,
    pub volume: f64,
    pub watertight: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FabricationReport {
    pub params: FabricationParams,
    pub max_fold_angle: f64,
    pub holes: usize,
    pub parts: Vec<PartReport>,
    pub warnings: Vec<FabWarning>,
}

pub fn fabrication_report(model: &FabricationModel) -> FabricationReport {
    FabricationReport {
        params: model.params.clone(),
        max_fold_angle: model.max_fold_angle,
        holes: model.holes.len(),
        parts: model
            .meshes
            .parts()
            .iter()
            .map(|(name, mesh)| {
                let d = mesh_diagnostics(mesh);
                PartReport {
                    name: (*name).into(),
                    file: format!("{name}.stl"),
                    triangles: d.triangle_count,
                    volume: d.signed_volume,
                    watertight: d.watertight,
                }
            })
            .collect(),
        warnings: model.warnings.clone(),
    }
}

/// Writes `<part>.stl` for the four parts into `dir`.
pub fn write_parts(model: &FabricationModel, dir: &Path) -> OpResult<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| OpError::io(dir, e))?;
    let mut out = Vec::new();
    for (name, mesh) in model.meshes.parts() {
        let path = dir.join(format!("{name}.stl"));
        crate::stl::write_stl(&path, mesh).map_err(|e| match e {
            StlError::Io(io) => OpError::io(&path, io),
            other => other.into(),
        })?;
        out.push(path);
    }
    Ok(out)
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

//! The versioned project document: one pretty-printed JSON file holding the
//! design, pattern, task, fabrication and routing sections.
//!
//! Top-level keys this version does not know are kept and written back
//! unchanged.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use foldwright_core::fab::{FabricationParams, HoleMode};
use foldwright_core::optimize::DesignTask;
use foldwright_core::pattern::{synthesize_pattern, CreasePattern};
use foldwright_core::presets;
use foldwright_core::string_sim::{twist_schedule, RoutingPlan, TsaConfig};
use foldwright_core::tg::TransitionGraphDesign;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub const PROJECT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSection {
    pub transition_graph: TransitionGraphDesign,
    pub unit_width: f64,
    pub copies: usize,
}

fn auto_center() -> HoleMode {
    HoleMode::AutoCenter
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FabSection {
    pub params: FabricationParams,
    #[serde(default = "auto_center")]
    pub holes: HoleMode,
}

/// Twist angles `0, step, …, end` in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSpec {
    pub end: f64,
    pub step: f64,
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        ScheduleSpec {
            end: 20.0 * PI,
            step: PI / 36.0,
        }
    }
}

impl ScheduleSpec {
    pub fn angles(&self) -> Vec<f64> {
        twist_schedule(self.end, self.step)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingSection {
    pub plan: RoutingPlan,
    pub tsa: TsaConfig,
    #[serde(default)]
    pub schedule: ScheduleSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub tool_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for Provenance {
    fn default() -> Self {
        Provenance {
            tool: env!("CARGO_PKG_NAME").into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            source: None,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Sections {
    version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    design: Option<DesignSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pattern: Option<CreasePattern>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    task: Option<DesignTask>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fab: Option<FabSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    routing: Option<RoutingSection>,
    #[serde(default)]
    provenance: Provenance,
}

const SECTION_KEYS: [&str; 7] = ["version", "design", "pattern", "task", "fab", "routing", "provenance"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Project {
    pub version: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub design: Option<DesignSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pattern: Option<CreasePattern>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub task: Option<DesignTask>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fab: Option<FabSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub routing: Option<RoutingSection>,
    pub provenance: Provenance,
    /// Top-level keys written by other versions.
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

impl Default for Project {
    fn default() -> Self {
        Project {
            version: PROJECT_VERSION,
            design: None,
            pattern: None,
            task: None,
            fab: None,
            routing: None,
            provenance: Provenance::default(),
            extra: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ProjectError {
    #[error("malformed project at byte {offset} (line {line}, column {column}): {message}")]
    Syntax {
        offset: usize,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid project field `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("project version {found} is newer than supported version {PROJECT_VERSION}")]
    UnsupportedVersion { found: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn byte_offset(text: &[u8], line: usize, column: usize) -> usize {
    let mut start = 0;
    if line > 1 {
        let mut seen = 1;
        for (i, &b) in text.iter().enumerate() {
            if b == b'\n' {
                seen += 1;
                if seen == line {
                    start = i + 1;
                    break;
                }
            }
        }
    }
    (start + column).min(text.len())
}

impl Project {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("project serializes");
        s.push('\n');
        s
    }

    pub fn from_json(bytes: &[u8]) -> Result<Project, ProjectError> {
        let value: Value = serde_json::from_slice(bytes).map_err(|e| ProjectError::Syntax {
            offset: byte_offset(bytes, e.line(), e.column()),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let Value::Object(mut map) = value else {
            return Err(ProjectError::Schema {
                path: ".".into(),
                message: "expected a JSON object".into(),
            });
        };
        let mut known = serde_json::Map::new();
        for key in SECTION_KEYS {
            if let Some(v) = map.remove(key) {
                known.insert(key.into(), v);
            }
        }
        let sections: Sections =
            serde_path_to_error::deserialize(Value::Object(known)).map_err(|e| ProjectError::Schema {
                path: e.path().to_string(),
                message: e.inner().to_string(),
            })?;
        if sections.version > PROJECT_VERSION {
            return Err(ProjectError::UnsupportedVersion {
                found: sections.version,
            });
        }
        if sections.version == 0 {
            return Err(ProjectError::Schema {
                path: "version".into(),
                message: "version must be at least 1".into(),
            });
        }
        Ok(Project {
            version: sections.version,
            design: sections.design,
            pattern: sections.pattern,
            task: sections.task,
            fab: sections.fab,
            routing: sections.routing,
            provenance: sections.provenance,
            extra: map.into_iter().collect(),
        })
    }

    pub fn load(path: &Path) -> Result<Project, ProjectError> {
        Project::from_json(&fs::read(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), ProjectError> {
        fs::write(path, self.to_json())?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Empty,
    /// Five-unit strip with printing parameters.
    FiveUnit,
    /// Reaching task with the five-unit design as a starting point.
    Reaching,
    /// 6 × 4 Miura sheet with a four-string actuator.
    MiuraRig,
}

pub fn preset_project(preset: Preset) -> Project {
    let mut p = Project::default();
    let five_unit = || {
        let design = presets::five_unit_design();
        let pattern = synthesize_pattern(&design, presets::FIVE_UNIT_WIDTH, presets::FIVE_UNIT_COPIES)
            .expect("preset pattern synthesizes");
        (
            DesignSection {
                transition_graph: design,
                unit_width: presets::FIVE_UNIT_WIDTH,
                copies: presets::FIVE_UNIT_COPIES,
            },
            pattern,
        )
    };
    match preset {
        Preset::Empty => {}
        Preset::FiveUnit | Preset::Reaching => {
            let (design, pattern) = five_unit();
            p.design = Some(design);
            p.pattern = Some(pattern);
            p.fab = Some(FabSection {
                params: presets::printing_params(),
                holes: HoleMode::AutoCenter,
            });
            if preset == Preset::Reaching {
                p.task = Some(presets::reaching_task());
            }
        }
        Preset::MiuraRig => {
            let rig = presets::miura_string_rig().expect("preset rig builds");
            p.pattern = Some(rig.pattern);
            p.fab = Some(FabSection {
                params: rig.params,
                holes: HoleMode::AutoCenter,
            });
            p.routing = Some(RoutingSection {
                plan: rig.plan,
                tsa: rig.config,
                schedule: ScheduleSpec::default(),
            });
        }
    }
    p
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub path: String,
    pub message: String,
}

fn issue(path: impl Into<String>, message: impl ToString) -> Issue {
    Issue {
        path: path.into(),
        message: message.to_string(),
    }
}

/// Cross-section checks: parameters are in range and every panel, vertex and
/// hole reference resolves.
pub fn validate_project(p: &Project) -> Vec<Issue> {
    let mut out = Vec::new();
    if let Some(d) = &p.design {
        if !(d.unit_width > 0.0 && d.unit_width.is_finite()) {
            out.push(issue("design.unit_width", "must be positive"));
        }
        if d.copies == 0 {
            out.push(issue("design.copies", "must be at least 1"));
        }
    }
    let panel_sizes: Option<Vec<usize>> = p.pattern.as_ref().map(|pat| pat.panels.iter().map(Vec::len).collect());
    if let Some(pat) = &p.pattern {
        let nv = pat.vertices.len();
        for (i, c) in pat.creases.iter().enumerate() {
            if c.endpoints.iter().any(|&v| v >= nv) {
                out.push(issue(format!("pattern.creases[{i}]"), "endpoint is not a vertex"));
            }
        }
        for (i, panel) in pat.panels.iter().enumerate() {
            if panel.len() < 3 || panel.iter().any(|&v| v >= nv) {
                out.push(issue(format!("pattern.panels[{i}]"), "needs at least three existing vertices"));
            }
        }
        for &v in &pat.tg_chain {
            if v >= nv {
                out.push(issue("pattern.tg_chain", format!("vertex {v} does not exist")));
            }
        }
    }
    if let Some(task) = &p.task {
        if let Err(e) = task.validate() {
            out.push(issue("task", e));
        }
    }
    if let Some(fab) = &p.fab {
        if let Err(e) = fab.params.validate() {
            out.push(issue("fab.params", e));
        }
        if let HoleMode::Manual(reqs) = &fab.holes {
            for (i, r) in reqs.iter().enumerate() {
                match &panel_sizes {
                    None => out.push(issue(format!("fab.holes[{i}]"), "project has no pattern")),
                    Some(sizes) if r.panel >= sizes.len() => {
                        out.push(issue(format!("fab.holes[{i}].panel"), format!("panel {} does not exist", r.panel)))
                    }
                    _ => {}
                }
            }
        }
    }
    if let Some(routing) = &p.routing {
        if let Err(e) = routing.tsa.validate() {
            out.push(issue("routing.tsa", e));
        }
        let s = routing.schedule;
        if !(s.end > 0.0 && s.step > 0.0 && s.end.is_finite() && s.step.is_finite()) {
            out.push(issue("routing.schedule", "end and step must be positive"));
        }
        for (i, string) in routing.plan.strings.iter().enumerate() {
            for (k, w) in string.waypoints.iter().enumerate() {
                let path = format!("routing.plan.strings[{i}].waypoints[{k}].hole");
                match &panel_sizes {
                    None => out.push(issue(path, "project has no pattern")),
                    Some(sizes) => match sizes.get(w.hole.panel) {
                        None => out.push(issue(path, format!("panel {} does not exist", w.hole.panel))),
                        Some(&n) if n != w.hole.weights.len() => {
                            out.push(issue(path, format!("{} weights for a {n}-corner panel", w.hole.weights.len())))
                        }
                        _ => {}
                    },
                }
            }
        }
    }
    out
}

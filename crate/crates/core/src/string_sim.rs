//! Twisted-string actuation of a folding sheet under quasi-static
//! displacement constraints.
//!
//! Strings are straight, inextensible and frictionless between hole centers.
//! Each string starts at the actuator rotor, enters the sheet at its first
//! hole and runs through the remaining holes; the part between rotor and
//! first hole lengthens as the rotor twists. At every twist step the sheet
//! takes the smallest fold angle (and, if allowed, a planar pose on the rail)
//! for which no string needs more than its initial length.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)] // inherent f64 methods shadow this when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fold::{embed_fold, AnchoredPoint, FoldError, FoldedGeometry, P3, V3};
use crate::geom::{segment_crossing, P2};
use crate::pattern::{CreaseKind, CreasePattern};

/// A string is taut when its slack is below this (mm).
pub const TAUT_TOLERANCE: f64 = 1e-6;
/// Fold-angle resolution of the quasi-static search (rad).
pub const FOLD_TOLERANCE: f64 = 1e-10;
/// Grid used to bracket the first feasible fold angle.
pub const SCAN_STEP: f64 = 0.5 * PI / 180.0;
const FEASIBLE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StringError {
    #[error("negative twist {0} rad")]
    NegativeTwist(f64),
    #[error("invalid actuator: {0}")]
    InvalidConfig(String),
    #[error("string {string}: {reason}")]
    InvalidString { string: usize, reason: String },
    #[error("twist schedule must start at 0 and increase strictly")]
    InvalidSchedule,
    #[error("strings are too short in the initial state (worst excess {excess:.3e} mm on string {string})")]
    InfeasibleSetup { string: usize, excess: f64 },
    #[error(transparent)]
    Fold(#[from] FoldError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsaConfig {
    /// Rotor axis position in the rail plane (mm).
    pub rotation_center: P2,
    /// `d_1`
    pub rotation_diameter: f64,
    /// `d_s`
    pub string_width: f64,
    pub strings_per_unit: usize,
    /// `d_2` for every pair; when absent each pair uses the flat distance
    /// between its two first holes.
    #[serde(default)]
    pub first_hole_gap: Option<f64>,
}

impl TsaConfig {
    pub fn validate(&self) -> Result<(), StringError> {
        if !(self.rotation_diameter > 0.0) {
            return Err(StringError::InvalidConfig("rotation diameter must be positive".into()));
        }
        if !(self.string_width > 0.0) {
            return Err(StringError::InvalidConfig("string width must be positive".into()));
        }
        if self.strings_per_unit == 0 || self.strings_per_unit % 2 == 1 {
            return Err(StringError::InvalidConfig("strings per unit must be even".into()));
        }
        if let Some(d2) = self.first_hole_gap {
            if !(d2 > 0.0) {
                return Err(StringError::InvalidConfig("first hole gap must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Length of string between rotor and first hole after twisting by `twist`.
pub fn tsa_segment_length(
    rotation_diameter: f64,
    first_hole_gap: f64,
    string_width: f64,
    anchor_offset: f64,
    twist: f64,
) -> Result<f64, StringError> {
    if !(twist >= 0.0) {
        return Err(StringError::NegativeTwist(twist));
    }
    let (d1, d2, ds) = (rotation_diameter, first_hole_gap, string_width);
    let lateral2 = if twist < PI {
        (d2 - d1 * twist.cos()).powi(2) + (d1 * twist.sin()).powi(2)
    } else {
        (d2 + d1 + (twist - PI) * ds).powi(2)
    };
    Ok((anchor_offset * anchor_offset + lateral2 / 4.0).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Above,
    Below,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub hole: AnchoredPoint,
    /// Side of the sheet the string runs on toward the next waypoint.
    #[serde(default)]
    pub side: Option<Side>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StringEnd {
    /// Tied off at the last hole.
    Knot,
    /// Returns to the rotor from the last hole.
    Tsa,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutedString {
    /// Strings with the same pair id are twisted together.
    pub pair: usize,
    pub waypoints: Vec<Waypoint>,
    pub end: StringEnd,
    /// `L_0`, set by [`measure_initial_lengths`] when absent.
    #[serde(default)]
    pub initial_length: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoseFreedom {
    /// Translate and rotate on the rail plane.
    Free,
    /// Rotate about the sheet center only.
    RotationOnly,
    /// Sheet center and orientation fixed.
    Pinned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingPlan {
    pub strings: Vec<RoutedString>,
    pub pose: PoseFreedom,
}

/// Planar rigid placement of the sheet on the rail.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub phi: f64,
}

impl Pose2 {
    pub fn apply(&self, p: P3) -> P3 {
        let (s, c) = self.phi.sin_cos();
        P3::new(c * p.x - s * p.y + self.x, s * p.x + c * p.y + self.y, p.z)
    }
}

/// Orthonormal frame of the folded sheet on the rail: `x` along the chord of
/// the main crease chain, `y` along the transition-graph normal, origin at the
/// vertex centroid. At the flat state this is the pattern plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SheetFrame {
    pub origin: P3,
    pub axes: [V3; 3],
}

impl SheetFrame {
    pub fn of(pattern: &CreasePattern, folded: &FoldedGeometry) -> Self {
        let world = folded.vertex_positions(pattern);
        let mut c = V3::zeros();
        for p in &world {
            c += p.coords;
        }
        let origin = P3::from(c / world.len().max(1) as f64);
        let x = match (pattern.tg_chain.first(), pattern.tg_chain.last()) {
            (Some(&a), Some(&b)) if a != b => (world[b] - world[a]).normalize(),
            _ => V3::x(),
        };
        let n = folded.tg_normal;
        let y = (n - x * x.dot(&n)).normalize();
        let y = if y.iter().all(|v| v.is_finite()) { y } else { V3::y() };
        SheetFrame {
            origin,
            axes: [x, y, x.cross(&y)],
        }
    }

    pub fn to_sheet(&self, world: P3) -> P3 {
        let d = world - self.origin;
        P3::new(d.dot(&self.axes[0]), d.dot(&self.axes[1]), d.dot(&self.axes[2]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RoutingViolation {
    WrongSide {
        string: usize,
        segment: usize,
        crease: usize,
        required: Side,
    },
    MissingSide {
        string: usize,
        segment: usize,
        crease: usize,
    },
    MixedCreases {
        string: usize,
        segment: usize,
        creases: Vec<usize>,
    },
    LeavesSheet {
        string: usize,
        segment: usize,
        crease: usize,
    },
    RepeatedHole {
        string: usize,
        segment: usize,
    },
    UnknownPanel {
        string: usize,
        panel: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingReport {
    pub violations: Vec<RoutingViolation>,
    pub ok: bool,
}

/// Creases met by the open flat segment `a → b`.
pub fn creases_crossed(pattern: &CreasePattern, a: P2, b: P2) -> Vec<usize> {
    let mut out = Vec::new();
    for (i, c) in pattern.creases.iter().enumerate() {
        let p = pattern.vertices[c.endpoints[0]];
        let q = pattern.vertices[c.endpoints[1]];
        if let Some((t, u)) = segment_crossing(a, b, p, q) {
            if t > 0.0 && t < 1.0 && (-1e-12..=1.0 + 1e-12).contains(&u) {
                out.push(i);
            }
        }
    }
    out
}

/// Mountain creases must be passed below, valley creases above.
pub fn validate_routing(plan: &RoutingPlan, pattern: &CreasePattern) -> RoutingReport {
    let mut violations = Vec::new();
    for (s, string) in plan.strings.iter().enumerate() {
        if let Some(w) = string.waypoints.iter().find(|w| w.hole.panel >= pattern.panels.len()) {
            violations.push(RoutingViolation::UnknownPanel {
                string: s,
                panel: w.hole.panel,
            });
            continue;
        }
        for (k, pair) in string.waypoints.windows(2).enumerate() {
            let (a, b) = (pair[0].hole.flat, pair[1].hole.flat);
            if (a - b).norm() < 1e-9 {
                violations.push(RoutingViolation::RepeatedHole { string: s, segment: k });
                continue;
            }
            let crossed = creases_crossed(pattern, a, b);
            if let Some(&c) = crossed
                .iter()
                .find(|&&c| pattern.creases[c].kind == CreaseKind::Border)
            {
                violations.push(RoutingViolation::LeavesSheet {
                    string: s,
                    segment: k,
                    crease: c,
                });
                continue;
            }
            let Some(&first) = crossed.first() else {
                continue;
            };
            let kind = pattern.creases[first].kind;
            if crossed.iter().any(|&c| pattern.creases[c].kind != kind) {
                violations.push(RoutingViolation::MixedCreases {
                    string: s,
                    segment: k,
                    creases: crossed,
                });
                continue;
            }
            let required = if kind == CreaseKind::Mountain {
                Side::Below
            } else {
                Side::Above
            };
            match pair[0].side {
                None => violations.push(RoutingViolation::MissingSide {
                    string: s,
                    segment: k,
                    crease: first,
                }),
                Some(side) if side != required => violations.push(RoutingViolation::WrongSide {
                    string: s,
                    segment: k,
                    crease: first,
                    required,
                }),
                Some(_) => {}
            }
        }
    }
    RoutingReport {
        ok: violations.is_empty(),
        violations,
    }
}

/// Set every side flag to the one the crossed creases require; segments with
/// mixed creases keep their flag.
pub fn assign_sides(plan: &mut RoutingPlan, pattern: &CreasePattern) {
    for string in &mut plan.strings {
        for k in 0..string.waypoints.len().saturating_sub(1) {
            let (a, b) = (string.waypoints[k].hole.flat, string.waypoints[k + 1].hole.flat);
            let kinds: Vec<CreaseKind> = creases_crossed(pattern, a, b)
                .into_iter()
                .map(|c| pattern.creases[c].kind)
                .collect();
            if let Some(&kind) = kinds.first() {
                if kinds.iter().all(|&k| k == kind) {
                    string.waypoints[k].side = match kind {
                        CreaseKind::Mountain => Some(Side::Below),
                        CreaseKind::Valley => Some(Side::Above),
                        CreaseKind::Border => string.waypoints[k].side,
                    };
                }
            }
        }
    }
}

/// Per-string geometry at one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StringState {
    /// `l_{A_i B_i}`
    pub tsa_side_length: f64,
    /// Straight distances between consecutive holes.
    pub segment_lengths: Vec<f64>,
    /// Rotor-side length at the far end for strings that return to the rotor.
    #[serde(default)]
    pub end_length: Option<f64>,
    pub anchor_offset: f64,
    pub slack: f64,
}

impl StringState {
    pub fn total(&self) -> f64 {
        self.tsa_side_length + self.segment_lengths.iter().sum::<f64>() + self.end_length.unwrap_or(0.0)
    }

    pub fn is_taut(&self) -> bool {
        self.slack < TAUT_TOLERANCE
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiStaticState {
    pub index: usize,
    pub twist: f64,
    pub fold_theta: f64,
    pub pose: Pose2,
    pub strings: Vec<StringState>,
    pub is_final: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetupReport {
    pub initial_lengths: Vec<f64>,
    pub pair_gaps: Vec<f64>,
    /// `l_{AB}(0) − ‖x_dis‖` per string; nonzero only when `d_1 ≠ d_2`.
    pub zero_twist_offsets: Vec<f64>,
    pub routing: RoutingReport,
}

/// Fixed data of a simulation: hole anchors, pairings and initial lengths.
#[derive(Debug, Clone)]
struct Rig<'a> {
    pattern: &'a CreasePattern,
    plan: &'a RoutingPlan,
    config: &'a TsaConfig,
    /// Per string: index of its partner string.
    partner: Vec<usize>,
    /// Per string: `d_2` of its pair.
    gap: Vec<f64>,
    /// Per string: `d_2` at the far end (strings returning to the rotor).
    end_gap: Vec<f64>,
}

impl<'a> Rig<'a> {
    fn new(pattern: &'a CreasePattern, plan: &'a RoutingPlan, config: &'a TsaConfig) -> Result<Self, StringError> {
        config.validate()?;
        let n = plan.strings.len();
        let mut partner = vec![usize::MAX; n];
        for (i, s) in plan.strings.iter().enumerate() {
            if s.waypoints.is_empty() {
                return Err(StringError::InvalidString {
                    string: i,
                    reason: "no waypoints".into(),
                });
            }
            for w in &s.waypoints {
                if w.hole.panel >= pattern.panels.len() {
                    return Err(FoldError::UnknownPanel(w.hole.panel).into());
                }
            }
            let mates: Vec<usize> = (0..n)
                .filter(|&j| j != i && plan.strings[j].pair == s.pair)
                .collect();
            if mates.len() != 1 {
                return Err(StringError::InvalidString {
                    string: i,
                    reason: alloc::format!("pair {} must hold exactly two strings", s.pair),
                });
            }
            partner[i] = mates[0];
        }
        let gap = (0..n)
            .map(|i| {
                config.first_hole_gap.unwrap_or_else(|| {
                    (plan.strings[i].waypoints[0].hole.flat
                        - plan.strings[partner[i]].waypoints[0].hole.flat)
                        .norm()
                })
            })
            .collect();
        let end_gap = (0..n)
            .map(|i| {
                let last = |s: &RoutedString| s.waypoints[s.waypoints.len() - 1].hole.flat;
                config
                    .first_hole_gap
                    .unwrap_or_else(|| (last(&plan.strings[i]) - last(&plan.strings[partner[i]])).norm())
            })
            .collect();
        Ok(Rig {
            pattern,
            plan,
            config,
            partner,
            gap,
            end_gap,
        })
    }

    /// Hole positions on the rail for every string.
    fn holes(&self, folded: &FoldedGeometry, pose: Pose2) -> Vec<Vec<P3>> {
        hole_positions(self.pattern, self.plan, folded, pose)
    }

    fn states(&self, holes: &[Vec<P3>], twist: f64, lengths: &[f64]) -> Vec<StringState> {
        let c = self.config.rotation_center;
        let center = P3::new(c.x, c.y, 0.0);
        (0..holes.len())
            .map(|i| {
                let mine = &holes[i];
                let theirs = &holes[self.partner[i]];
                let mid = P3::from((mine[0].coords + theirs[0].coords) * 0.5);
                let offset = (mid - center).norm();
                let tsa = tsa_segment_length(
                    self.config.rotation_diameter,
                    self.gap[i],
                    self.config.string_width,
                    offset,
                    twist,
                )
                .expect("schedule twists are non-negative");
                let segments: Vec<f64> = mine.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
                let end_length = match self.plan.strings[i].end {
                    StringEnd::Knot => None,
                    StringEnd::Tsa => {
                        let (a, b) = (mine[mine.len() - 1], theirs[theirs.len() - 1]);
                        let mid = P3::from((a.coords + b.coords) * 0.5);
                        Some(
                            tsa_segment_length(
                                self.config.rotation_diameter,
                                self.end_gap[i],
                                self.config.string_width,
                                (mid - center).norm(),
                                twist,
                            )
                            .expect("schedule twists are non-negative"),
                        )
                    }
                };
                let mut s = StringState {
                    tsa_side_length: tsa,
                    segment_lengths: segments,
                    end_length,
                    anchor_offset: offset,
                    slack: 0.0,
                };
                s.slack = lengths.get(i).map_or(0.0, |l| l - s.total());
                s
            })
            .collect()
    }
}

/// `L_0` of every string from the flat geometry at zero twist.
pub fn measure_initial_lengths(
    plan: &RoutingPlan,
    pattern: &CreasePattern,
    flat: &FoldedGeometry,
    config: &TsaConfig,
) -> Result<RoutingPlan, StringError> {
    let rig = Rig::new(pattern, plan, config)?;
    let holes = rig.holes(flat, Pose2::default());
    let states = rig.states(&holes, 0.0, &[]);
    let mut out = plan.clone();
    for (s, st) in out.strings.iter_mut().zip(states) {
        s.initial_length = Some(st.total());
    }
    Ok(out)
}

/// Measure initial lengths where missing and report the setup.
pub fn prepare(
    plan: &RoutingPlan,
    pattern: &CreasePattern,
    config: &TsaConfig,
) -> Result<(RoutingPlan, SetupReport), StringError> {
    let flat = embed_fold(pattern, 0.0)?;
    let measured = measure_initial_lengths(plan, pattern, &flat, config)?;
    let mut out = plan.clone();
    for (s, m) in out.strings.iter_mut().zip(&measured.strings) {
        if s.initial_length.is_none() {
            s.initial_length = m.initial_length;
        }
    }
    let rig = Rig::new(pattern, &out, config)?;
    let holes = rig.holes(&flat, Pose2::default());
    let states = rig.states(&holes, 0.0, &[]);
    let report = SetupReport {
        initial_lengths: out.strings.iter().map(|s| s.initial_length.unwrap_or(0.0)).collect(),
        pair_gaps: rig.gap.clone(),
        zero_twist_offsets: states.iter().map(|s| s.tsa_side_length - s.anchor_offset).collect(),
        routing: validate_routing(&out, pattern),
    };
    Ok((out, report))
}

/// Minimize `f` over `x` with the Nelder–Mead simplex method.
fn nelder_mead<F: FnMut(&[f64]) -> f64>(mut f: F, start: &[f64], step: f64, iterations: usize) -> (Vec<f64>, f64) {
    let n = start.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((start.to_vec(), f(start)));
    for i in 0..n {
        let mut x = start.to_vec();
        x[i] += step;
        let v = f(&x);
        simplex.push((x, v));
    }
    for _ in 0..iterations {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if (simplex[n].1 - simplex[0].1).abs() < 1e-14 {
            break;
        }
        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for k in 0..n {
                centroid[k] += x[k] / n as f64;
            }
        }
        let along = |t: f64, x: &[f64]| -> Vec<f64> {
            (0..n).map(|k| centroid[k] + t * (x[k] - centroid[k])).collect()
        };
        let worst = simplex[n].0.clone();
        let xr = along(-1.0, &worst);
        let fr = f(&xr);
        if fr < simplex[0].1 {
            let xe = along(-2.0, &worst);
            let fe = f(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let xc = if fr < simplex[n].1 { along(-0.5, &worst) } else { along(0.5, &worst) };
            let fc = f(&xc);
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for (x, v) in simplex.iter_mut().skip(1) {
                    for k in 0..n {
                        x[k] = best[k] + 0.5 * (x[k] - best[k]);
                    }
                    *v = f(x);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, v) = simplex.swap_remove(0);
    (x, v)
}

struct Evaluation {
    excess: f64,
    pose: Pose2,
    folded: FoldedGeometry,
}

struct Solver<'a> {
    rig: Rig<'a>,
    lengths: Vec<f64>,
    theta_max: f64,
}

impl Solver<'_> {
    fn excess(&self, holes: &[Vec<P3>], twist: f64) -> f64 {
        self.rig
            .states(holes, twist, &self.lengths)
            .iter()
            .map(|s| -s.slack)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest string excess over `L_0` at fold `theta`, minimized over the
    /// allowed poses starting from `pose`.
    fn evaluate(&self, theta: f64, twist: f64, pose: Pose2) -> Result<Evaluation, StringError> {
        let folded = embed_fold(self.rig.pattern, theta)?;
        let at = |p: Pose2| self.excess(&self.rig.holes(&folded, p), twist);
        let (pose, excess) = match self.rig.plan.pose {
            PoseFreedom::Pinned => (pose, at(pose)),
            PoseFreedom::RotationOnly => {
                let (x, v) = nelder_mead(|x| at(Pose2 { phi: x[0], ..pose }), &[pose.phi], 0.05, 400);
                (Pose2 { phi: x[0], ..pose }, v)
            }
            PoseFreedom::Free => {
                let (x, v) = nelder_mead(
                    |x| at(Pose2 { x: x[0], y: x[1], phi: x[2] }),
                    &[pose.x, pose.y, pose.phi],
                    1.0,
                    800,
                );
                (Pose2 { x: x[0], y: x[1], phi: x[2] }, v)
            }
        };
        Ok(Evaluation { excess, pose, folded })
    }

    fn state(&self, index: usize, twist: f64, eval: &Evaluation) -> QuasiStaticState {
        let holes = self.rig.holes(&eval.folded, eval.pose);
        QuasiStaticState {
            index,
            twist,
            fold_theta: eval.folded.theta,
            pose: eval.pose,
            strings: self.rig.states(&holes, twist, &self.lengths),
            is_final: false,
        }
    }
}

/// Largest fold angle the rigid embedding accepts.
fn embed_limit(theta_max: f64) -> f64 {
    theta_max.min(PI - 1e-6)
}

/// Step through `twist_schedule`, folding the sheet just enough at each twist
/// to keep every string within its initial length. Stops at the first twist
/// no fold up to `theta_max` can accommodate; the last returned state is
/// marked final.
pub fn solve_quasi_static(
    pattern: &CreasePattern,
    plan: &RoutingPlan,
    config: &TsaConfig,
    twist_schedule: &[f64],
    theta_max: f64,
) -> Result<Vec<QuasiStaticState>, StringError> {
    solve_quasi_static_observed(pattern, plan, config, twist_schedule, theta_max, |_| {})
}

pub fn solve_quasi_static_observed<O: FnMut(&QuasiStaticState)>(
    pattern: &CreasePattern,
    plan: &RoutingPlan,
    config: &TsaConfig,
    twist_schedule: &[f64],
    theta_max: f64,
    mut observer: O,
) -> Result<Vec<QuasiStaticState>, StringError> {
    if twist_schedule.first() != Some(&0.0) || twist_schedule.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(StringError::InvalidSchedule);
    }
    let (plan, _) = prepare(plan, pattern, config)?;
    let lengths: Vec<f64> = plan.strings.iter().map(|s| s.initial_length.unwrap_or(0.0)).collect();
    let rig = Rig::new(pattern, &plan, config)?;
    let solver = Solver {
        rig,
        lengths,
        theta_max: embed_limit(theta_max),
    };

    let first = solver.evaluate(0.0, 0.0, Pose2::default())?;
    if first.excess > FEASIBLE_EPS {
        let states = solver.state(0, 0.0, &first);
        let (string, s) = states
            .strings
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.slack.total_cmp(&b.1.slack))
            .expect("plan has strings");
        return Err(StringError::InfeasibleSetup {
            string,
            excess: -s.slack,
        });
    }
    let mut states = vec![solver.state(0, 0.0, &first)];
    observer(&states[0]);
    let mut theta = 0.0;
    let mut pose = first.pose;

    for (index, &twist) in twist_schedule.iter().enumerate().skip(1) {
        let here = solver.evaluate(theta, twist, pose)?;
        let eval = if here.excess <= FEASIBLE_EPS {
            here
        } else {
            match advance(&solver, theta, twist, pose)? {
                Some(e) => e,
                None => break,
            }
        };
        theta = eval.folded.theta;
        pose = eval.pose;
        let state = solver.state(index, twist, &eval);
        observer(&state);
        states.push(state);
    }
    if let Some(last) = states.last_mut() {
        last.is_final = true;
    }
    Ok(states)
}

/// Smallest feasible fold in `(theta, θ_max]`, bracketed on a grid and
/// refined by bisection.
fn advance(solver: &Solver, theta: f64, twist: f64, pose: Pose2) -> Result<Option<Evaluation>, StringError> {
    let limit = solver.theta_max;
    if theta >= limit {
        return Ok(None);
    }
    let top = solver.evaluate(limit, twist, pose)?;
    let mut lo = theta;
    let mut hi_eval = None;
    let mut t = theta;
    while t < limit {
        let next = (t + SCAN_STEP).min(limit);
        let e = if next == limit {
            None
        } else {
            Some(solver.evaluate(next, twist, pose)?)
        };
        let feasible = e.as_ref().map_or(top.excess <= FEASIBLE_EPS, |e| e.excess <= FEASIBLE_EPS);
        if feasible {
            hi_eval = Some(e.unwrap_or(Evaluation {
                excess: top.excess,
                pose: top.pose,
                folded: top.folded.clone(),
            }));
            break;
        }
        lo = next;
        t = next;
    }
    let Some(mut hi) = hi_eval else {
        return Ok(None);
    };
    while hi.folded.theta - lo > FOLD_TOLERANCE {
        let mid = 0.5 * (lo + hi.folded.theta);
        if mid <= lo || mid >= hi.folded.theta {
            break;
        }
        let e = solver.evaluate(mid, twist, hi.pose)?;
        if e.excess <= FEASIBLE_EPS {
            hi = e;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

/// String geometry with the sheet folded to `theta` at `pose` and the rotor
/// twisted by `twist`. Initial lengths missing from `plan` are measured first.
pub fn evaluate_configuration(
    pattern: &CreasePattern,
    plan: &RoutingPlan,
    config: &TsaConfig,
    theta: f64,
    twist: f64,
    pose: Pose2,
) -> Result<Vec<StringState>, StringError> {
    if !(twist >= 0.0) {
        return Err(StringError::NegativeTwist(twist));
    }
    let (plan, _) = prepare(plan, pattern, config)?;
    let lengths: Vec<f64> = plan.strings.iter().map(|s| s.initial_length.unwrap_or(0.0)).collect();
    let rig = Rig::new(pattern, &plan, config)?;
    let folded = embed_fold(pattern, theta)?;
    Ok(rig.states(&rig.holes(&folded, pose), twist, &lengths))
}

/// Hole positions on the rail, per string, for a folded sheet at `pose`.
pub fn hole_positions(pattern: &CreasePattern, plan: &RoutingPlan, folded: &FoldedGeometry, pose: Pose2) -> Vec<Vec<P3>> {
    let frame = SheetFrame::of(pattern, folded);
    plan.strings
        .iter()
        .map(|s| {
            s.waypoints
                .iter()
                .map(|w| pose.apply(frame.to_sheet(folded.world(w.hole.panel, w.hole.flat))))
                .collect()
        })
        .collect()
}

/// `0, step, 2·step, …` up to `end` inclusive.
pub fn twist_schedule(end: f64, step: f64) -> Vec<f64> {
    let count = (end / step + 1e-9).floor() as usize;
    (0..=count).map(|k| k as f64 * step).collect()
}

/// Default schedule: 0 to 20π in steps of π/36.
pub fn default_twist_schedule() -> Vec<f64> {
    twist_schedule(20.0 * PI, PI / 36.0)
}

/// Angle at the middle point of three points.
pub fn angle_at(a: P3, b: P3, c: P3) -> f64 {
    let u = a - b;
    let v = c - b;
    u.cross(&v).norm().atan2(u.dot(&v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::miura_sheet;
    use crate::tg::EntryFlag;
    use approx::assert_relative_eq;

    #[test]
    fn eq8_examples() {
        assert_eq!(tsa_segment_length(10.0, 10.0, 1.0, 100.0, 0.0).unwrap(), 100.0);
        assert_relative_eq!(
            tsa_segment_length(10.0, 10.0, 1.0, 100.0, PI / 2.0).unwrap(),
            100.249_688_278_817_1,
            epsilon = 1e-12
        );
        let below = tsa_segment_length(7.0, 12.0, 0.8, 50.0, PI - 1e-15).unwrap();
        let at = tsa_segment_length(7.0, 12.0, 0.8, 50.0, PI).unwrap();
        assert!((below - at).abs() < 1e-9);
        assert_relative_eq!(at, (2500.0f64 + 19.0 * 19.0 / 4.0).sqrt(), epsilon = 1e-12);
        assert!(tsa_segment_length(7.0, 12.0, 0.8, 50.0, -0.1).is_err());
    }

    fn straight_pattern() -> CreasePattern {
        miura_sheet(4, 2, 30.0, 20.0, 1.2, EntryFlag::Mountain).unwrap()
    }

    fn hole(p: &CreasePattern, panel: usize) -> Waypoint {
        Waypoint {
            hole: AnchoredPoint::centroid(p, panel).unwrap(),
            side: None,
        }
    }

    #[test]
    fn routing_side_rule() {
        let p = straight_pattern();
        let g = p.grid.unwrap();
        let (a, b) = (g.panel(0, 1), g.panel(0, 2));
        let crossed = creases_crossed(&p, hole(&p, a).hole.flat, hole(&p, b).hole.flat);
        assert_eq!(crossed.len(), 1);
        let kind = p.creases[crossed[0]].kind;
        let (good, bad) = if kind == CreaseKind::Mountain {
            (Side::Below, Side::Above)
        } else {
            (Side::Above, Side::Below)
        };
        let plan = |side| RoutingPlan {
            strings: vec![RoutedString {
                pair: 0,
                waypoints: vec![
                    Waypoint { side: Some(side), ..hole(&p, a) },
                    hole(&p, b),
                ],
                end: StringEnd::Knot,
                initial_length: None,
            }],
            pose: PoseFreedom::Pinned,
        };
        assert!(validate_routing(&plan(good), &p).ok);
        let r = validate_routing(&plan(bad), &p);
        assert_eq!(
            r.violations,
            vec![RoutingViolation::WrongSide {
                string: 0,
                segment: 0,
                crease: crossed[0],
                required: good
            }]
        );
    }

    #[test]
    fn mixed_crossing_is_underspecified() {
        let p = straight_pattern();
        let g = p.grid.unwrap();
        // diagonal through a main-crease vertex meets creases of both kinds
        let a = hole(&p, g.panel(0, 0));
        let b = hole(&p, g.panel(1, 2));
        let mut plan = RoutingPlan {
            strings: vec![RoutedString {
                pair: 0,
                waypoints: vec![Waypoint { side: Some(Side::Above), ..a }, b],
                end: StringEnd::Knot,
                initial_length: None,
            }],
            pose: PoseFreedom::Pinned,
        };
        let kinds: Vec<CreaseKind> = creases_crossed(&p, plan.strings[0].waypoints[0].hole.flat, plan.strings[0].waypoints[1].hole.flat)
            .into_iter()
            .map(|c| p.creases[c].kind)
            .collect();
        assert!(kinds.contains(&CreaseKind::Mountain) && kinds.contains(&CreaseKind::Valley));
        let r = validate_routing(&plan, &p);
        assert!(matches!(r.violations[0], RoutingViolation::MixedCreases { .. }));
        assign_sides(&mut plan, &p);
        assert!(!validate_routing(&plan, &p).ok);
    }

    fn collinear_plan(p: &CreasePattern) -> (RoutingPlan, TsaConfig) {
        let g = p.grid.unwrap();
        let string = |row| RoutedString {
            pair: 0,
            waypoints: (0..4).map(|j| hole(p, g.panel(row, j))).collect(),
            end: StringEnd::Knot,
            initial_length: None,
        };
        let mut plan = RoutingPlan {
            strings: vec![string(0), string(1)],
            pose: PoseFreedom::Pinned,
        };
        assign_sides(&mut plan, p);
        let config = TsaConfig {
            rotation_center: P2::new(-120.0, 0.0),
            rotation_diameter: 10.0,
            string_width: 0.5,
            strings_per_unit: 2,
            first_hole_gap: None,
        };
        (plan, config)
    }

    #[test]
    fn initial_lengths_add_hole_distances() {
        let p = straight_pattern();
        let (plan, config) = collinear_plan(&p);
        let flat = embed_fold(&p, 0.0).unwrap();
        let measured = measure_initial_lengths(&plan, &p, &flat, &config).unwrap();
        let n = p.vertices.len() as f64;
        let centroid = P2::new(
            p.vertices.iter().map(|v| v.x).sum::<f64>() / n,
            p.vertices.iter().map(|v| v.y).sum::<f64>() / n,
        );
        let firsts: Vec<P2> = measured.strings.iter().map(|s| s.waypoints[0].hole.flat).collect();
        let mid = P2::from((firsts[0].coords + firsts[1].coords) * 0.5);
        let offset = (mid - centroid - config.rotation_center.coords).norm();
        let gap = (firsts[0] - firsts[1]).norm();
        for s in &measured.strings {
            let pts: Vec<P2> = s.waypoints.iter().map(|w| w.hole.flat).collect();
            let inner: f64 = pts.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
            let tsa = tsa_segment_length(10.0, gap, 0.5, offset, 0.0).unwrap();
            assert_relative_eq!(s.initial_length.unwrap(), tsa + inner, epsilon = 1e-9);
        }
    }

    #[test]
    fn schedule_of_zero_is_the_initial_state() {
        let p = straight_pattern();
        let (plan, config) = collinear_plan(&p);
        let states = solve_quasi_static(&p, &plan, &config, &[0.0], 2.5).unwrap();
        assert_eq!(states.len(), 1);
        assert_eq!(states[0].fold_theta, 0.0);
        assert!(states[0].is_final);
        assert!(states[0].strings.iter().all(|s| s.slack.abs() < 1e-9));
    }

    #[test]
    fn short_strings_are_a_setup_error() {
        let p = straight_pattern();
        let (mut plan, config) = collinear_plan(&p);
        plan.strings[0].initial_length = Some(10.0);
        plan.strings[1].initial_length = Some(1000.0);
        assert!(matches!(
            solve_quasi_static(&p, &plan, &config, &[0.0, 0.1], 2.5),
            Err(StringError::InfeasibleSetup { string: 0, .. })
        ));
    }

    #[test]
    fn free_sheet_slides_instead_of_folding() {
        let p = straight_pattern();
        let (mut plan, config) = collinear_plan(&p);
        plan.pose = PoseFreedom::Free;
        let schedule = twist_schedule(PI, PI / 6.0);
        let states = solve_quasi_static(&p, &plan, &config, &schedule, 2.5).unwrap();
        assert_eq!(states.len(), schedule.len());
        let last = states.last().unwrap();
        assert!(last.fold_theta < 1e-9, "{}", last.fold_theta);
        assert!(last.pose.x < -1e-3);
        for s in &last.strings {
            assert!(s.slack >= -1e-9);
        }
    }

    #[test]
    fn nelder_mead_finds_quadratic_minimum() {
        let (x, v) = nelder_mead(|x| (x[0] - 1.0).powi(2) + 3.0 * (x[1] + 2.0).powi(2), &[0.0, 0.0], 0.5, 500);
        assert!(v < 1e-12);
        assert_relative_eq!(x[0], 1.0, epsilon = 1e-5);
        assert_relative_eq!(x[1], -2.0, epsilon = 1e-5);
    }

    #[test]
    fn schedule_validation() {
        let p = straight_pattern();
        let (plan, config) = collinear_plan(&p);
        assert_eq!(
            solve_quasi_static(&p, &plan, &config, &[0.1, 0.2], 2.5),
            Err(StringError::InvalidSchedule)
        );
        assert_eq!(
            solve_quasi_static(&p, &plan, &config, &[0.0, 0.2, 0.2], 2.5),
            Err(StringError::InvalidSchedule)
        );
        assert_eq!(default_twist_schedule().len(), 721);
    }
}

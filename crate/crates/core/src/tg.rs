//! Planar transition-graph model of a Miura-ori string.
//!
//! A design is a chain of transition vectors `v_0..v_n` (one per main-crease
//! segment). Folding the main crease by `θ` turns each vector relative to its
//! predecessor; the chain endpoint traces the trajectory that the design
//! optimizer scores.
//!
//! Flag convention: the entry flag that selects the branch when recovering a
//! shape angle from a turn is the flag of the vector *preceding* the zigzag
//! crease (`EF_{i-1}`), the same flag that signs the forward turn. With that
//! choice `shape_angle(transition_delta(β, pπ, f), p, f) == β`.

use alloc::vec::Vec;
#[allow(unused_imports)] // inherent f64 methods shadow this when std is linked
use num_traits::Float;
use core::f64::consts::{FRAC_PI_2, PI};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{point_segment_distance, segment_distance, P2, V2};

/// Distance below which two realized segments are considered touching.
pub const INTERSECTION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TgError {
    #[error("fold angle {0} rad is outside [0, π]")]
    ThetaOutOfRange(f64),
    #[error("shape angle {0} rad is outside (0, π) or equal to π/2")]
    DegenerateShapeAngle(f64),
    #[error("fold ratio {0} is outside (0, 1]")]
    RatioOutOfRange(f64),
    #[error("turn angle {0} rad has no finite shape angle")]
    TurnOutOfRange(f64),
    #[error("segment length #{index} = {value} mm must be positive")]
    NonPositiveLength { index: usize, value: f64 },
    #[error("expected {expected} shape angles for {lengths} lengths, got {got}")]
    ShapeAngleCount {
        lengths: usize,
        expected: usize,
        got: usize,
    },
    #[error("sampling step {0} rad does not divide [0, π] into a whole number of steps")]
    InvalidStep(f64),
}

/// Main-crease type of a transition vector: 0 = mountain, 1 = valley.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntryFlag {
    Mountain,
    Valley,
}

impl EntryFlag {
    pub fn flip(self) -> Self {
        match self {
            EntryFlag::Mountain => EntryFlag::Valley,
            EntryFlag::Valley => EntryFlag::Mountain,
        }
    }

    pub fn bit(self) -> u8 {
        match self {
            EntryFlag::Mountain => 0,
            EntryFlag::Valley => 1,
        }
    }

    pub fn from_bit(bit: u8) -> Self {
        if bit & 1 == 0 {
            EntryFlag::Mountain
        } else {
            EntryFlag::Valley
        }
    }

    /// `(-1)^EF`
    pub fn sign(self) -> f64 {
        match self {
            EntryFlag::Mountain => 1.0,
            EntryFlag::Valley => -1.0,
        }
    }

    /// Flag of vector `index` in a chain starting with `self`.
    pub fn nth(self, index: usize) -> Self {
        if index % 2 == 0 {
            self
        } else {
            self.flip()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionVector {
    pub length: f64,
    pub absolute_angle: f64,
    pub entry_flag: EntryFlag,
}

impl TransitionVector {
    pub fn displacement(&self) -> V2 {
        V2::new(self.absolute_angle.cos(), self.absolute_angle.sin()) * self.length
    }
}

/// The design genome: segment lengths `l_0..l_n`, shape angles `β_1..β_n`,
/// the first entry flag and the fixed start point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DesignFields")]
pub struct TransitionGraphDesign {
    start: P2,
    lengths: Vec<f64>,
    shape_angles: Vec<f64>,
    first_flag: EntryFlag,
}

#[derive(Deserialize)]
struct DesignFields {
    start: P2,
    lengths: Vec<f64>,
    shape_angles: Vec<f64>,
    first_flag: EntryFlag,
}

impl TryFrom<DesignFields> for TransitionGraphDesign {
    type Error = TgError;

    fn try_from(f: DesignFields) -> Result<Self, TgError> {
        TransitionGraphDesign::new(f.start, f.lengths, f.shape_angles, f.first_flag)
    }
}

impl TransitionGraphDesign {
    pub fn new(
        start: P2,
        lengths: Vec<f64>,
        shape_angles: Vec<f64>,
        first_flag: EntryFlag,
    ) -> Result<Self, TgError> {
        let design = TransitionGraphDesign {
            start,
            lengths,
            shape_angles,
            first_flag,
        };
        design.validate()?;
        Ok(design)
    }

    pub fn validate(&self) -> Result<(), TgError> {
        let expected = self.lengths.len().saturating_sub(1);
        if self.lengths.is_empty() || self.shape_angles.len() != expected {
            return Err(TgError::ShapeAngleCount {
                lengths: self.lengths.len(),
                expected,
                got: self.shape_angles.len(),
            });
        }
        for (index, &value) in self.lengths.iter().enumerate() {
            if !(value > 0.0 && value.is_finite()) {
                return Err(TgError::NonPositiveLength { index, value });
            }
        }
        for &beta in &self.shape_angles {
            check_shape_angle(beta)?;
        }
        Ok(())
    }

    pub fn start(&self) -> P2 {
        self.start
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn shape_angles(&self) -> &[f64] {
        &self.shape_angles
    }

    pub fn first_flag(&self) -> EntryFlag {
        self.first_flag
    }

    /// Number of zigzag creases `n` (one fewer than the number of vectors).
    pub fn unit_count(&self) -> usize {
        self.shape_angles.len()
    }

    pub fn flag(&self, index: usize) -> EntryFlag {
        self.first_flag.nth(index)
    }

    pub fn total_length(&self) -> f64 {
        self.lengths.iter().sum()
    }

    pub fn with_first_flag(mut self, flag: EntryFlag) -> Self {
        self.first_flag = flag;
        self
    }
}

/// Main-crease folding angle `θ ∈ [0, π]` and its ratio `p = θ/π`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct FoldParameter(f64);

impl FoldParameter {
    pub fn new(theta: f64) -> Result<Self, TgError> {
        check_theta(theta)?;
        Ok(FoldParameter(theta))
    }

    pub fn from_ratio(p: f64) -> Result<Self, TgError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(TgError::RatioOutOfRange(p));
        }
        Ok(FoldParameter(if p == 1.0 { PI } else { p * PI }))
    }

    pub fn theta(self) -> f64 {
        self.0
    }

    pub fn ratio(self) -> f64 {
        self.0 / PI
    }
}

/// The realized chain at one fold angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanarState {
    pub theta: f64,
    pub start: P2,
    pub vectors: Vec<TransitionVector>,
    pub endpoint: P2,
}

impl PlanarState {
    /// Polyline vertices `T_s, T_s + v_0, …, T_e`.
    pub fn points(&self) -> Vec<P2> {
        let mut pts = Vec::with_capacity(self.vectors.len() + 1);
        let mut p = self.start;
        pts.push(p);
        for v in &self.vectors {
            p += v.displacement();
            pts.push(p);
        }
        pts
    }

    /// Turn angles `Δα_i` between consecutive vectors.
    pub fn deltas(&self) -> Vec<f64> {
        self.vectors
            .windows(2)
            .map(|w| w[1].absolute_angle - w[0].absolute_angle)
            .collect()
    }
}

fn check_theta(theta: f64) -> Result<(), TgError> {
    if (0.0..=PI).contains(&theta) {
        Ok(())
    } else {
        Err(TgError::ThetaOutOfRange(theta))
    }
}

pub(crate) fn check_shape_angle(beta: f64) -> Result<(), TgError> {
    if beta > 0.0 && beta < PI && beta != FRAC_PI_2 {
        Ok(())
    } else {
        Err(TgError::DegenerateShapeAngle(beta))
    }
}

/// Absolute angle of the first vector, set by the half hyper-origami unit
/// that anchors the chain: `arccos √(2cos(θ/2) / (1 + cos(θ/2)))`.
pub fn initial_alpha(theta: f64) -> Result<f64, TgError> {
    check_theta(theta)?;
    if theta == PI {
        return Ok(FRAC_PI_2);
    }
    let c = (theta / 2.0).cos();
    let ratio = (2.0 * c / (1.0 + c)).clamp(0.0, 1.0);
    Ok(ratio.sqrt().acos())
}

/// Turn between vector `i-1` and vector `i` across a zigzag crease of shape
/// angle `beta`: `2·arctan(sin(θ/2)·tan β·(-1)^EF_{i-1})`.
pub fn transition_delta(beta: f64, theta: f64, prev_flag: EntryFlag) -> Result<f64, TgError> {
    check_shape_angle(beta)?;
    check_theta(theta)?;
    Ok(2.0 * ((theta / 2.0).sin() * beta.tan() * prev_flag.sign()).atan())
}

/// Inverse of [`transition_delta`]: the shape angle that produces the turn
/// `delta_alpha` at fold ratio `p`, where `flag` is the entry flag of the
/// vector preceding the crease.
pub fn shape_angle(delta_alpha: f64, p: f64, flag: EntryFlag) -> Result<f64, TgError> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(TgError::RatioOutOfRange(p));
    }
    if !(delta_alpha.abs() < PI) || delta_alpha == 0.0 {
        return Err(TgError::TurnOutOfRange(delta_alpha));
    }
    let base = ((delta_alpha.abs() / 2.0).tan() / (p * PI / 2.0).sin()).atan();
    let first_branch = matches!(
        (delta_alpha >= 0.0, flag),
        (true, EntryFlag::Mountain) | (false, EntryFlag::Valley)
    );
    let beta = if first_branch { base } else { PI - base };
    check_shape_angle(beta)?;
    Ok(beta)
}

/// Realize every transition vector of `design` at fold angle `theta` and
/// sum them into the endpoint.
pub fn fold_state(design: &TransitionGraphDesign, theta: f64) -> Result<PlanarState, TgError> {
    let mut alpha = initial_alpha(theta)?;
    let lengths = design.lengths();
    let mut vectors = Vec::with_capacity(lengths.len());
    let mut flag = design.first_flag();
    let mut end = design.start();
    for (i, &length) in lengths.iter().enumerate() {
        if i > 0 {
            alpha += transition_delta(design.shape_angles()[i - 1], theta, flag)?;
            flag = flag.flip();
        }
        let v = TransitionVector {
            length,
            absolute_angle: alpha,
            entry_flag: flag,
        };
        end += v.displacement();
        vectors.push(v);
    }
    Ok(PlanarState {
        theta,
        start: design.start(),
        vectors,
        endpoint: end,
    })
}

/// Fold angles `0, step, …, π` for a step that divides `π` evenly.
pub fn theta_grid(step: f64) -> Result<Vec<f64>, TgError> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(TgError::InvalidStep(step));
    }
    let count = PI / step;
    let k = count.round();
    if k < 1.0 || (count - k).abs() > 1e-9 * count.max(1.0) {
        return Err(TgError::InvalidStep(step));
    }
    let k = k as usize;
    Ok((0..=k)
        .map(|j| if j == k { PI } else { PI * j as f64 / k as f64 })
        .collect())
}

/// Sample the design from `θ = 0` to `π`; a 4° step yields 46 states.
pub fn sample_trajectory(
    design: &TransitionGraphDesign,
    step: f64,
) -> Result<Vec<PlanarState>, TgError> {
    theta_grid(step)?
        .into_iter()
        .map(|theta| fold_state(design, theta))
        .collect()
}

/// Default sampling step of 4°.
pub const DEFAULT_STEP: f64 = 4.0 * PI / 180.0;

/// True when two non-adjacent realized segments touch, or two adjacent ones
/// overlap past their shared endpoint.
pub fn polyline_self_intersects(state: &PlanarState) -> bool {
    let pts = state.points();
    let m = pts.len() - 1;
    for i in 0..m {
        for j in (i + 1)..m {
            if j == i + 1 {
                // the shared vertex is pts[j]; the far ends must stay clear
                if point_segment_distance(pts[i], pts[j], pts[j + 1]) < INTERSECTION_TOLERANCE
                    || point_segment_distance(pts[j + 1], pts[i], pts[j]) < INTERSECTION_TOLERANCE
                {
                    return true;
                }
            } else if segment_distance(pts[i], pts[i + 1], pts[j], pts[j + 1])
                < INTERSECTION_TOLERANCE
            {
                return true;
            }
        }
    }
    false
}

//! Ready-made designs, tasks and rigs used by the examples, the command line
//! and the regression tests.

use alloc::vec;
use alloc::vec::Vec;

use crate::fab::{max_fold_angle, FabricationParams};
use crate::fold::AnchoredPoint;
use crate::geom::P2;
use crate::optimize::{DesignTask, Region};
use crate::pattern::{miura_sheet, CreasePattern, PatternError};
use crate::string_sim::{assign_sides, PoseFreedom, RoutedString, RoutingPlan, StringEnd, TsaConfig, Waypoint};
use crate::tg::{EntryFlag, TransitionGraphDesign};

/// Five-unit string folded from a 36 mm strip in three copies.
pub fn five_unit_design() -> TransitionGraphDesign {
    TransitionGraphDesign::new(
        P2::origin(),
        vec![40.0, 36.0, 50.0, 30.0, 44.0],
        vec![1.1, 2.0, 0.9, 1.9],
        EntryFlag::Valley,
    )
    .expect("preset design is valid")
}

pub const FIVE_UNIT_WIDTH: f64 = 36.0;
pub const FIVE_UNIT_COPIES: usize = 3;

/// Arm that sweeps from `(250, 0)` to `(50, 133.3)` while staying out of the
/// upper-right corner.
pub fn reaching_task() -> DesignTask {
    DesignTask {
        start_anchor: P2::origin(),
        waypoints: vec![P2::new(250.0, 0.0), P2::new(50.0, 133.3)],
        warning_regions: vec![Region::quadrant(140.0, 30.0)],
        prohibited_regions: vec![Region::quadrant(150.0, 40.0)],
        reward_weight: 120.0,
        unit_count: 5,
    }
}

/// `b = 3`, `h = 2.2`, `t = 0.4` mm.
pub fn printing_params() -> FabricationParams {
    FabricationParams::default()
}

/// A 120 × 120 mm Miura sheet folded by one twisted-string actuator.
#[derive(Debug, Clone)]
pub struct StringRig {
    pub pattern: CreasePattern,
    pub plan: RoutingPlan,
    pub config: TsaConfig,
    pub params: FabricationParams,
}

impl StringRig {
    pub fn theta_max(&self) -> f64 {
        max_fold_angle(&self.params)
    }
}

/// Panel (row, column) routes of the lower string of each pair; the upper
/// string is its mirror image across the middle seam.
pub const MIURA_RIG_ROUTES: [[(usize, usize); 3]; 2] = [[(1, 0), (0, 0), (0, 1)], [(0, 0), (1, 0), (1, 1)]];

/// 6 × 4 Miura (20 mm columns, 30 mm rows, 60° zigzags) held at its center,
/// with four strings in two mirror pairs running from an actuator 100 mm to
/// its left through panel-center holes. Each route turns at its middle hole.
pub fn miura_string_rig() -> Result<StringRig, PatternError> {
    let pattern = miura_sheet(6, 4, 20.0, 30.0, 60f64.to_radians(), EntryFlag::Mountain)?;
    let grid = pattern.grid.expect("miura sheet has a grid");
    let rows = grid.rows;
    let hole = |row: usize, col: usize| Waypoint {
        hole: AnchoredPoint::centroid(&pattern, grid.panel(row, col)).expect("panel exists"),
        side: None,
    };
    let mut strings = Vec::new();
    for (pair, route) in MIURA_RIG_ROUTES.iter().enumerate() {
        for mirrored in [false, true] {
            strings.push(RoutedString {
                pair,
                waypoints: route
                    .iter()
                    .map(|&(r, c)| hole(if mirrored { rows - 1 - r } else { r }, c))
                    .collect(),
                end: StringEnd::Knot,
                initial_length: None,
            });
        }
    }
    let mut plan = RoutingPlan {
        strings,
        pose: PoseFreedom::Pinned,
    };
    assign_sides(&mut plan, &pattern);
    Ok(StringRig {
        pattern,
        plan,
        config: TsaConfig {
            rotation_center: P2::new(-100.0, 0.0),
            rotation_diameter: 10.0,
            string_width: 0.5,
            strings_per_unit: 4,
            first_hole_gap: None,
        },
        params: printing_params(),
    })
}

//! Flat crease patterns: Miura strip synthesis from a transition-graph design,
//! row tessellation, and origami validity checks.
//!
//! Strip layout: the main crease runs along `y = 0` from `x = 0` to
//! `x = Σ l_i`. The strip is `unit_width` wide, one row of panels on each side
//! of the main crease. Zigzag crease `j` leaves main-crease vertex `j` at shape
//! angle `β_j` in both rows, so its far end is offset by
//! `((w/2)·cot β_j, ±w/2)`. The strip ends are squared off.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};
#[allow(unused_imports)] // inherent f64 methods shadow this when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{cross, orient, point_segment_distance, segment_crossing, signed_area, P2};
use crate::tg::{EntryFlag, TransitionGraphDesign};

pub type VertexId = usize;

/// Angular and positional tolerance of the validity checks.
pub const PATTERN_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CreaseKind {
    Mountain,
    Valley,
    Border,
}

impl CreaseKind {
    pub fn from_flag(flag: EntryFlag) -> Self {
        match flag {
            EntryFlag::Mountain => CreaseKind::Mountain,
            EntryFlag::Valley => CreaseKind::Valley,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            CreaseKind::Mountain => CreaseKind::Valley,
            CreaseKind::Valley => CreaseKind::Mountain,
            CreaseKind::Border => CreaseKind::Border,
        }
    }

    pub fn is_fold(self) -> bool {
        self != CreaseKind::Border
    }

    /// Sign of the fold rotation: valleys fold toward `+z`.
    pub fn fold_sign(self) -> f64 {
        match self {
            CreaseKind::Mountain => -1.0,
            CreaseKind::Valley => 1.0,
            CreaseKind::Border => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FoldGroup {
    Main,
    Zigzag,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crease {
    pub endpoints: [VertexId; 2],
    pub kind: CreaseKind,
    pub fold_group: FoldGroup,
}

/// Row/column layout of a synthesized Miura pattern. Vertex `(line, j)` has id
/// `line * (columns + 1) + j`; panel `(row, j)` has index `row * columns + j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridLayout {
    pub columns: usize,
    pub rows: usize,
}

impl GridLayout {
    pub fn vertex(&self, line: usize, j: usize) -> VertexId {
        line * (self.columns + 1) + j
    }

    pub fn panel(&self, row: usize, j: usize) -> usize {
        row * self.columns + j
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreasePattern {
    pub vertices: Vec<P2>,
    pub creases: Vec<Crease>,
    /// Counter-clockwise vertex cycles.
    pub panels: Vec<Vec<VertexId>>,
    pub unit_width: f64,
    pub copy_count: usize,
    /// Main-crease vertices of the first copy, from the start of the strip.
    #[serde(default)]
    pub tg_chain: Vec<VertexId>,
    #[serde(default)]
    pub grid: Option<GridLayout>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PatternError {
    #[error("unit width {0} mm must be positive")]
    InvalidWidth(f64),
    #[error("copy count must be at least 1")]
    InvalidCopies,
    #[error("unit {unit}: panels overlap (edge length {edge} mm is not positive)")]
    SelfOverlap { unit: usize, edge: f64 },
    #[error("pattern has no row layout to tessellate")]
    NotAGrid,
}

impl CreasePattern {
    pub fn empty() -> Self {
        CreasePattern {
            vertices: Vec::new(),
            creases: Vec::new(),
            panels: Vec::new(),
            unit_width: 0.0,
            copy_count: 1,
            tg_chain: Vec::new(),
            grid: None,
        }
    }

    pub fn panel_polygon(&self, panel: usize) -> Vec<P2> {
        self.panels[panel].iter().map(|&v| self.vertices[v]).collect()
    }

    pub fn area(&self) -> f64 {
        (0..self.panels.len())
            .map(|p| signed_area(&self.panel_polygon(p)))
            .sum()
    }

    pub fn crease_between(&self, a: VertexId, b: VertexId) -> Option<usize> {
        self.creases.iter().position(|c| {
            (c.endpoints[0] == a && c.endpoints[1] == b)
                || (c.endpoints[0] == b && c.endpoints[1] == a)
        })
    }

    /// Map from undirected vertex pair to crease index.
    pub fn edge_index(&self) -> BTreeMap<(VertexId, VertexId), usize> {
        self.creases
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let [a, b] = c.endpoints;
                ((a.min(b), a.max(b)), i)
            })
            .collect()
    }

    /// Panels sharing each crease, as `(left panel, right panel)` relative to
    /// the crease direction `endpoints[0] → endpoints[1]`.
    pub fn crease_panels(&self) -> Vec<[Option<usize>; 2]> {
        let index = self.edge_index();
        let mut sides = vec![[None, None]; self.creases.len()];
        for (p, cycle) in self.panels.iter().enumerate() {
            let n = cycle.len();
            for k in 0..n {
                let (a, b) = (cycle[k], cycle[(k + 1) % n]);
                if let Some(&c) = index.get(&(a.min(b), a.max(b))) {
                    // a CCW panel lies to the left of its own edge a→b
                    let slot = if self.creases[c].endpoints[0] == a { 0 } else { 1 };
                    sides[c][slot] = Some(p);
                }
            }
        }
        sides
    }

    pub fn bounding_box(&self) -> Option<(P2, P2)> {
        crate::geom::bounding_box(&self.vertices)
    }

    /// Creases incident to each vertex.
    pub fn incidence(&self) -> Vec<Vec<usize>> {
        let mut inc = vec![Vec::new(); self.vertices.len()];
        for (i, c) in self.creases.iter().enumerate() {
            inc[c.endpoints[0]].push(i);
            inc[c.endpoints[1]].push(i);
        }
        inc
    }

    /// Vertices not touching a border crease.
    pub fn interior_vertices(&self) -> Vec<VertexId> {
        let inc = self.incidence();
        (0..self.vertices.len())
            .filter(|&v| {
                !inc[v].is_empty()
                    && inc[v]
                        .iter()
                        .all(|&c| self.creases[c].kind != CreaseKind::Border)
            })
            .collect()
    }
}

/// Horizontal offset of a zigzag crease across one row of height `w/2`.
pub fn zigzag_offset(beta: f64, unit_width: f64) -> f64 {
    if beta == FRAC_PI_2 {
        return 0.0;
    }
    0.5 * unit_width / beta.tan()
}

/// Build a grid pattern from horizontal vertex lines (bottom to top) and
/// the kinds of horizontal segments and vertical (column) creases.
fn build_grid(
    lines: &[Vec<P2>],
    horizontal: &[Vec<CreaseKind>],
    vertical: &[Vec<CreaseKind>],
) -> (Vec<P2>, Vec<Crease>, Vec<Vec<VertexId>>, GridLayout) {
    let columns = lines[0].len() - 1;
    let rows = lines.len() - 1;
    let grid = GridLayout { columns, rows };
    let vertices: Vec<P2> = lines.iter().flatten().copied().collect();
    let mut creases = Vec::new();
    for (line, kinds) in horizontal.iter().enumerate() {
        for (j, &kind) in kinds.iter().enumerate() {
            creases.push(Crease {
                endpoints: [grid.vertex(line, j), grid.vertex(line, j + 1)],
                kind,
                fold_group: FoldGroup::Main,
            });
        }
    }
    for (row, kinds) in vertical.iter().enumerate() {
        for (j, &kind) in kinds.iter().enumerate() {
            creases.push(Crease {
                endpoints: [grid.vertex(row, j), grid.vertex(row + 1, j)],
                kind,
                fold_group: FoldGroup::Zigzag,
            });
        }
    }
    let mut panels = Vec::with_capacity(rows * columns);
    for row in 0..rows {
        for j in 0..columns {
            panels.push(vec![
                grid.vertex(row, j),
                grid.vertex(row, j + 1),
                grid.vertex(row + 1, j + 1),
                grid.vertex(row + 1, j),
            ]);
        }
    }
    (vertices, creases, panels, grid)
}

/// One Miura strip: two rows of panels on either side of the main crease.
pub fn synthesize_strip(
    design: &TransitionGraphDesign,
    unit_width: f64,
) -> Result<CreasePattern, PatternError> {
    if !(unit_width > 0.0 && unit_width.is_finite()) {
        return Err(PatternError::InvalidWidth(unit_width));
    }
    let lengths = design.lengths();
    let n = design.unit_count();
    let half = 0.5 * unit_width;

    let mut xs = Vec::with_capacity(n + 2);
    xs.push(0.0);
    let mut acc = 0.0;
    for &l in lengths {
        acc += l;
        xs.push(acc);
    }
    let offsets: Vec<f64> = core::iter::once(0.0)
        .chain(design.shape_angles().iter().map(|&b| zigzag_offset(b, unit_width)))
        .chain(core::iter::once(0.0))
        .collect();
    let outer: Vec<f64> = xs.iter().zip(&offsets).map(|(x, c)| x + c).collect();
    for j in 0..=n {
        let edge = outer[j + 1] - outer[j];
        if !(edge > 0.0) {
            return Err(PatternError::SelfOverlap { unit: j, edge });
        }
    }

    let line = |x: &[f64], y: f64| x.iter().map(|&x| P2::new(x, y)).collect::<Vec<_>>();
    let lines = [line(&outer, -half), line(&xs, 0.0), line(&outer, half)];

    let main: Vec<CreaseKind> = (0..=n)
        .map(|j| CreaseKind::from_flag(design.flag(j)))
        .collect();
    let border = vec![CreaseKind::Border; n + 1];
    let mut zig = Vec::with_capacity(n + 2);
    zig.push(CreaseKind::Border);
    for j in 1..=n {
        let flag = if design.shape_angles()[j - 1] < FRAC_PI_2 {
            design.flag(j - 1)
        } else {
            design.flag(j)
        };
        zig.push(CreaseKind::from_flag(flag));
    }
    zig.push(CreaseKind::Border);

    let (vertices, creases, panels, grid) =
        build_grid(&lines, &[border.clone(), main, border], &[zig.clone(), zig]);
    let tg_chain = (0..n + 2).map(|j| grid.vertex(1, j)).collect();
    Ok(CreasePattern {
        vertices,
        creases,
        panels,
        unit_width,
        copy_count: 1,
        tg_chain,
        grid: Some(grid),
    })
}

/// Stack `copies` strips, mirroring every other copy across the shared
/// boundary line.
pub fn tessellate(strip: &CreasePattern, copies: usize) -> Result<CreasePattern, PatternError> {
    if copies == 0 {
        return Err(PatternError::InvalidCopies);
    }
    if copies == 1 {
        return Ok(strip.clone());
    }
    let grid = strip.grid.ok_or(PatternError::NotAGrid)?;
    let cols = grid.columns;
    let rows = grid.rows;
    let y0 = strip.vertices[grid.vertex(0, 0)].y;
    let height = strip.vertices[grid.vertex(rows, 0)].y - y0;

    // strip-local crease kinds
    let index = strip.edge_index();
    let kind = |a: VertexId, b: VertexId| strip.creases[index[&(a.min(b), a.max(b))]].kind;
    let local_h: Vec<Vec<CreaseKind>> = (0..=rows)
        .map(|l| (0..cols).map(|j| kind(grid.vertex(l, j), grid.vertex(l, j + 1))).collect())
        .collect();
    let local_v: Vec<Vec<CreaseKind>> = (0..rows)
        .map(|r| (0..=cols).map(|j| kind(grid.vertex(r, j), grid.vertex(r + 1, j))).collect())
        .collect();

    let local_line = |line: usize| {
        let k = (line / rows).min(copies - 1);
        let i = line - k * rows;
        if k % 2 == 1 {
            rows - i
        } else {
            i
        }
    };
    let total_lines = copies * rows + 1;
    let mut lines = Vec::with_capacity(total_lines);
    let mut horizontal = Vec::with_capacity(total_lines);
    for line in 0..total_lines {
        let k = (line / rows).min(copies - 1);
        let local = local_line(line);
        let pts: Vec<P2> = (0..=cols)
            .map(|j| {
                let p = strip.vertices[grid.vertex(local, j)];
                let y = if k % 2 == 1 {
                    y0 + (k + 1) as f64 * height - (p.y - y0)
                } else {
                    p.y + k as f64 * height
                };
                P2::new(p.x, y)
            })
            .collect();
        lines.push(pts);
        let seam = line % rows == 0 && line > 0 && line < copies * rows;
        horizontal.push(if seam {
            // flipped copy of the opposite edge of the panel just below
            local_h[local_line(line - 1)].iter().map(|c| c.flip()).collect()
        } else {
            local_h[local].clone()
        });
    }
    let mut vertical = Vec::with_capacity(copies * rows);
    for row in 0..copies * rows {
        let k = row / rows;
        let i = row - k * rows;
        let local = if k % 2 == 1 { rows - 1 - i } else { i };
        vertical.push(local_v[local].clone());
    }

    let (vertices, creases, panels, grid) = build_grid(&lines, &horizontal, &vertical);
    Ok(CreasePattern {
        vertices,
        creases,
        panels,
        unit_width: strip.unit_width,
        copy_count: copies * strip.copy_count,
        tg_chain: strip.tg_chain.clone(),
        grid: Some(grid),
    })
}

/// Strip synthesis followed by tessellation.
pub fn synthesize_pattern(
    design: &TransitionGraphDesign,
    unit_width: f64,
    copies: usize,
) -> Result<CreasePattern, PatternError> {
    tessellate(&synthesize_strip(design, unit_width)?, copies)
}

/// Rectangular-grid Miura-ori of `columns × rows` panels, each `unit_length`
/// along the main creases and `row_height` across, with constant shape angle.
pub fn miura_sheet(
    columns: usize,
    rows: usize,
    unit_length: f64,
    row_height: f64,
    beta: f64,
    first_flag: EntryFlag,
) -> Result<CreasePattern, PatternError> {
    if rows == 0 || rows % 2 == 1 {
        return Err(PatternError::InvalidCopies);
    }
    let design = TransitionGraphDesign::new(
        P2::origin(),
        vec![unit_length; columns],
        vec![beta; columns.saturating_sub(1)],
        first_flag,
    )
    .map_err(|_| PatternError::SelfOverlap {
        unit: 0,
        edge: unit_length,
    })?;
    synthesize_pattern(&design, 2.0 * row_height, rows / 2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexReport {
    pub vertex: VertexId,
    pub degree: usize,
    /// `Σ panel corner angles − 2π`
    pub developability: f64,
    /// `|Σ odd sectors − Σ even sectors|`; infinite for odd degree.
    pub kawasaki: f64,
    /// `#Mountain − #Valley`
    pub maekawa: i32,
}

impl VertexReport {
    pub fn ok(&self) -> bool {
        self.developability.abs() <= PATTERN_TOLERANCE
            && self.kawasaki <= PATTERN_TOLERANCE
            && self.maekawa.abs() == 2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PlanarityViolation {
    Crossing { creases: [usize; 2] },
    VertexOnCrease { vertex: VertexId, crease: usize },
    Duplicate { creases: [usize; 2] },
    ZeroLength { crease: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub vertices: Vec<VertexReport>,
    pub planarity: Vec<PlanarityViolation>,
    pub ok: bool,
}

impl ValidationReport {
    pub fn failing_vertices(&self) -> Vec<VertexId> {
        self.vertices
            .iter()
            .filter(|v| !v.ok())
            .map(|v| v.vertex)
            .collect()
    }
}

fn corner_angle(prev: P2, at: P2, next: P2) -> f64 {
    let a = next - at;
    let b = prev - at;
    let ang = cross(a, b).atan2(a.dot(&b));
    if ang < 0.0 {
        ang + 2.0 * PI
    } else {
        ang
    }
}

/// Per-vertex developability, Kawasaki and Maekawa checks plus planarity of
/// the crease graph.
pub fn validate_pattern(pattern: &CreasePattern) -> ValidationReport {
    let inc = pattern.incidence();
    let mut corner_sum = vec![0.0; pattern.vertices.len()];
    for cycle in &pattern.panels {
        let n = cycle.len();
        for k in 0..n {
            let prev = pattern.vertices[cycle[(k + n - 1) % n]];
            let at = pattern.vertices[cycle[k]];
            let next = pattern.vertices[cycle[(k + 1) % n]];
            corner_sum[cycle[k]] += corner_angle(prev, at, next);
        }
    }

    let mut vertices = Vec::new();
    for v in pattern.interior_vertices() {
        let at = pattern.vertices[v];
        let mut dirs: Vec<(f64, CreaseKind)> = inc[v]
            .iter()
            .map(|&c| {
                let cr = &pattern.creases[c];
                let other = if cr.endpoints[0] == v {
                    cr.endpoints[1]
                } else {
                    cr.endpoints[0]
                };
                let d = pattern.vertices[other] - at;
                (d.y.atan2(d.x), cr.kind)
            })
            .collect();
        dirs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let degree = dirs.len();
        let kawasaki = if degree % 2 == 1 || degree == 0 {
            f64::INFINITY
        } else {
            let mut alt = 0.0;
            for k in 0..degree {
                let next = if k + 1 == degree {
                    dirs[0].0 + 2.0 * PI
                } else {
                    dirs[k + 1].0
                };
                let sector = next - dirs[k].0;
                alt += if k % 2 == 0 { sector } else { -sector };
            }
            alt.abs()
        };
        let maekawa = dirs
            .iter()
            .map(|d| match d.1 {
                CreaseKind::Mountain => 1,
                CreaseKind::Valley => -1,
                CreaseKind::Border => 0,
            })
            .sum();
        vertices.push(VertexReport {
            vertex: v,
            degree,
            developability: corner_sum[v] - 2.0 * PI,
            kawasaki,
            maekawa,
        });
    }

    let planarity = planarity_violations(pattern);
    let ok = planarity.is_empty() && vertices.iter().all(VertexReport::ok);
    ValidationReport {
        vertices,
        planarity,
        ok,
    }
}

fn planarity_violations(pattern: &CreasePattern) -> Vec<PlanarityViolation> {
    let tol = PATTERN_TOLERANCE;
    let mut out = Vec::new();
    let seg = |c: &Crease| (pattern.vertices[c.endpoints[0]], pattern.vertices[c.endpoints[1]]);
    for (i, c) in pattern.creases.iter().enumerate() {
        let (a, b) = seg(c);
        if (b - a).norm() <= tol || c.endpoints[0] == c.endpoints[1] {
            out.push(PlanarityViolation::ZeroLength { crease: i });
        }
    }
    let mut seen: BTreeMap<(VertexId, VertexId), usize> = BTreeMap::new();
    for (i, c) in pattern.creases.iter().enumerate() {
        let [a, b] = c.endpoints;
        if let Some(&j) = seen.get(&(a.min(b), a.max(b))) {
            out.push(PlanarityViolation::Duplicate { creases: [j, i] });
        } else {
            seen.insert((a.min(b), a.max(b)), i);
        }
    }
    for i in 0..pattern.creases.len() {
        let ci = &pattern.creases[i];
        let (a0, a1) = seg(ci);
        for j in (i + 1)..pattern.creases.len() {
            let cj = &pattern.creases[j];
            if ci.endpoints.iter().any(|v| cj.endpoints.contains(v)) {
                continue;
            }
            let (b0, b1) = seg(cj);
            if let Some((t, u)) = segment_crossing(a0, a1, b0, b1) {
                let (la, lb) = ((a1 - a0).norm(), (b1 - b0).norm());
                if t * la > tol && (1.0 - t) * la > tol && u * lb > tol && (1.0 - u) * lb > tol {
                    out.push(PlanarityViolation::Crossing { creases: [i, j] });
                }
            }
        }
    }
    for (v, &p) in pattern.vertices.iter().enumerate() {
        for (i, c) in pattern.creases.iter().enumerate() {
            if c.endpoints.contains(&v) {
                continue;
            }
            let (a, b) = seg(c);
            if point_segment_distance(p, a, b) <= tol
                && (p - a).norm() > tol
                && (p - b).norm() > tol
            {
                out.push(PlanarityViolation::VertexOnCrease { vertex: v, crease: i });
            }
        }
    }
    out
}

/// Mark the collinear pair of creases at each degree-4 interior vertex as
/// `Main` and the rest as `Zigzag`. Used for patterns that did not come from
/// synthesis.
pub fn assign_fold_groups(pattern: &mut CreasePattern) {
    let inc = pattern.incidence();
    let mut main = vec![false; pattern.creases.len()];
    for v in pattern.interior_vertices() {
        if inc[v].len() != 4 {
            continue;
        }
        let at = pattern.vertices[v];
        let dir = |c: usize| {
            let cr = &pattern.creases[c];
            let other = if cr.endpoints[0] == v {
                cr.endpoints[1]
            } else {
                cr.endpoints[0]
            };
            (pattern.vertices[other] - at).normalize()
        };
        for a in 0..4 {
            for b in (a + 1)..4 {
                let (da, db) = (dir(inc[v][a]), dir(inc[v][b]));
                if cross(da, db).abs() < 1e-9 && da.dot(&db) < 0.0 {
                    main[inc[v][a]] = true;
                    main[inc[v][b]] = true;
                }
            }
        }
    }
    for (c, m) in pattern.creases.iter_mut().zip(main) {
        c.fold_group = if m { FoldGroup::Main } else { FoldGroup::Zigzag };
    }
}

/// True when every panel is a simple counter-clockwise polygon.
pub fn panels_positively_oriented(pattern: &CreasePattern) -> bool {
    pattern.panels.iter().all(|cycle| {
        let poly: Vec<P2> = cycle.iter().map(|&v| pattern.vertices[v]).collect();
        let n = poly.len();
        signed_area(&poly) > 0.0
            && (0..n).all(|i| orient(poly[i], poly[(i + 1) % n], poly[(i + 2) % n]) > -1e-12)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use core::f64::consts::FRAC_PI_4;

    fn five_unit_design() -> TransitionGraphDesign {
        TransitionGraphDesign::new(
            P2::origin(),
            vec![40.0, 36.0, 50.0, 30.0, 44.0],
            vec![1.1, 2.0, 0.9, 1.9],
            EntryFlag::Valley,
        )
        .unwrap()
    }

    #[test]
    fn zigzag_offset_at_quarter_turn() {
        assert_relative_eq!(zigzag_offset(FRAC_PI_4, 36.0), 18.0, epsilon = 1e-12);
        let d = TransitionGraphDesign::new(
            P2::origin(),
            vec![36.0, 36.0],
            vec![FRAC_PI_4],
            EntryFlag::Mountain,
        )
        .unwrap();
        let s = synthesize_strip(&d, 36.0).unwrap();
        let g = s.grid.unwrap();
        let top = s.vertices[g.vertex(2, 1)] - s.vertices[g.vertex(1, 1)];
        let bottom = s.vertices[g.vertex(0, 1)] - s.vertices[g.vertex(1, 1)];
        // across the full unit width the zigzag spans (w·cot β, w)
        assert_relative_eq!(top.x, 18.0, epsilon = 1e-12);
        assert_relative_eq!(bottom.x, 18.0, epsilon = 1e-12);
        assert_relative_eq!(top.y - bottom.y, 36.0, epsilon = 1e-12);
    }

    #[test]
    fn strip_is_valid_and_sized() {
        let s = synthesize_strip(&five_unit_design(), 36.0).unwrap();
        let report = validate_pattern(&s);
        assert!(report.ok, "{:?}", report);
        assert_eq!(report.vertices.len(), 4);
        let (lo, hi) = s.bounding_box().unwrap();
        assert_relative_eq!(hi.y - lo.y, 36.0);
        assert_relative_eq!(hi.x - lo.x, 200.0);
        assert_eq!(s.panels.len(), 10);
        assert!(panels_positively_oriented(&s));
        assert_relative_eq!(s.area(), 200.0 * 36.0, epsilon = 1e-9);
    }

    #[test]
    fn strip_sector_angles() {
        let d = five_unit_design();
        let s = synthesize_strip(&d, 36.0).unwrap();
        let g = s.grid.unwrap();
        for j in 1..=4 {
            let v = g.vertex(1, j);
            let at = s.vertices[v];
            let up = s.vertices[g.vertex(2, j)] - at;
            let beta = up.y.atan2(up.x);
            assert_relative_eq!(beta, d.shape_angles()[j - 1], epsilon = 1e-12);
        }
    }

    #[test]
    fn overlapping_unit_is_named() {
        let d = TransitionGraphDesign::new(
            P2::origin(),
            vec![10.0, 10.0, 10.0],
            vec![1.2, 0.1],
            EntryFlag::Mountain,
        )
        .unwrap();
        assert!(matches!(
            synthesize_strip(&d, 36.0),
            Err(PatternError::SelfOverlap { unit: 1, .. }) | Err(PatternError::SelfOverlap { unit: 2, .. })
        ));
    }

    #[test]
    fn tessellation_counts_and_validity() {
        let s = synthesize_strip(&five_unit_design(), 36.0).unwrap();
        assert_eq!(tessellate(&s, 1).unwrap(), s);
        let t = tessellate(&s, 3).unwrap();
        assert_eq!(t.grid.unwrap().rows, 6);
        assert_eq!(t.panels.len(), 30);
        assert!(t.vertices.len() <= 3 * s.vertices.len());
        let report = validate_pattern(&t);
        assert!(report.ok, "{:?}", report.failing_vertices());
        assert_eq!(report.vertices.len(), 4 * 5);
        assert_relative_eq!(t.area(), 3.0 * s.area(), epsilon = 1e-6);
    }

    #[test]
    fn rows_are_congruent_up_to_reflection() {
        let s = synthesize_strip(&five_unit_design(), 36.0).unwrap();
        let t = tessellate(&s, 2).unwrap();
        let g = t.grid.unwrap();
        for j in 0..=g.columns {
            let base = t.vertices[g.vertex(2, j)].y;
            for i in 0..=2 {
                let a = t.vertices[g.vertex(2 - i, j)];
                let b = t.vertices[g.vertex(2 + i, j)];
                assert!((a.x - b.x).abs() < 1e-9);
                assert!(((base - a.y) - (b.y - base)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn flipped_crease_breaks_maekawa_at_both_ends() {
        let mut s = synthesize_strip(&five_unit_design(), 36.0).unwrap();
        let g = s.grid.unwrap();
        let c = s.crease_between(g.vertex(1, 1), g.vertex(1, 2)).unwrap();
        s.creases[c].kind = s.creases[c].kind.flip();
        let report = validate_pattern(&s);
        assert!(!report.ok);
        assert_eq!(report.failing_vertices(), vec![g.vertex(1, 1), g.vertex(1, 2)]);
    }

    #[test]
    fn crossing_creases_are_reported() {
        let mut p = CreasePattern::empty();
        p.vertices = vec![
            P2::new(0.0, 0.0),
            P2::new(2.0, 2.0),
            P2::new(0.0, 2.0),
            P2::new(2.0, 0.0),
        ];
        for (a, b) in [(0, 1), (2, 3)] {
            p.creases.push(Crease {
                endpoints: [a, b],
                kind: CreaseKind::Valley,
                fold_group: FoldGroup::Main,
            });
        }
        let report = validate_pattern(&p);
        assert!(!report.ok);
        assert_eq!(
            report.planarity,
            vec![PlanarityViolation::Crossing { creases: [0, 1] }]
        );
    }

    #[test]
    fn fold_groups_recovered_from_geometry() {
        let s = synthesize_pattern(&five_unit_design(), 36.0, 2).unwrap();
        let mut imported = s.clone();
        for c in &mut imported.creases {
            c.fold_group = FoldGroup::Zigzag;
        }
        assign_fold_groups(&mut imported);
        for (a, b) in s.creases.iter().zip(&imported.creases) {
            if a.kind != CreaseKind::Border {
                assert_eq!(a.fold_group, b.fold_group);
            }
        }
    }

    #[test]
    fn crease_panels_sides() {
        let s = synthesize_strip(&five_unit_design(), 36.0).unwrap();
        let sides = s.crease_panels();
        let g = s.grid.unwrap();
        let c = s.crease_between(g.vertex(1, 0), g.vertex(1, 1)).unwrap();
        assert_eq!(sides[c], [Some(g.panel(1, 0)), Some(g.panel(0, 0))]);
    }
}

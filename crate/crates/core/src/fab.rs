//! Thick-panel fabrication model: panel insets, hole placement, the fold
//! limit imposed by panel thickness, and the four printable part meshes.
//!
//! Parts are stacked on `z ∈ [0, h]`. The membrane band
//! `[(h − t)/2, (h + t)/2]` holds the mid-layers and crease strips; infills
//! and shell rings sit below and above it.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};
#[allow(unused_imports)] // inherent f64 methods shadow this when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fold::{AnchoredPoint, FoldError, P3};
use crate::geom::{centroid, convex_signed_distance, cross, is_convex_ccw, signed_area, P2, V2};
use crate::pattern::{validate_pattern, CreasePattern};

/// Polygon resolution of hole cylinders.
pub const HOLE_SEGMENTS: usize = 48;
const GEOM_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FabError {
    #[error("invalid fabrication parameters: {0}")]
    InvalidParams(&'static str),
    #[error("panel {panel} vanishes when inset by {bias} mm")]
    EmptyPanel { panel: usize, bias: f64 },
    #[error("panel {0} is not convex")]
    NonConvexPanel(usize),
    #[error("hole on panel {panel} lies {distance:.4} mm outside its operation region")]
    HoleOutside { panel: usize, distance: f64 },
    #[error("panel {panel} has no room for holes")]
    NoOperationRegion { panel: usize },
    #[error("holes on panel {panel} are {distance:.4} mm apart; at least {required:.4} mm needed")]
    HolesTooClose { panel: usize, distance: f64, required: f64 },
    #[error("hole on panel {panel} cuts the boundary of a printed part")]
    HoleCutsPart { panel: usize },
    #[error("crease pattern intersects itself")]
    SelfIntersecting,
    #[error(transparent)]
    Anchor(#[from] FoldError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FabricationParams {
    /// `b`
    pub inner_bias: f64,
    /// `h`
    pub panel_height: f64,
    /// `t`, thickness of mid-layers, creases and shells.
    pub membrane_thickness: f64,
    pub hole_radius: f64,
    #[serde(default = "default_extra_bias")]
    pub midlayer_extra_bias: f64,
    /// Clearance between a hole and the panel inset.
    #[serde(default = "default_margin")]
    pub margin: f64,
    #[serde(default = "default_top_cover")]
    pub top_cover: bool,
}

fn default_extra_bias() -> f64 {
    0.2
}

fn default_margin() -> f64 {
    0.5
}

fn default_top_cover() -> bool {
    true
}

impl Default for FabricationParams {
    fn default() -> Self {
        FabricationParams {
            inner_bias: 3.0,
            panel_height: 2.2,
            membrane_thickness: 0.4,
            hole_radius: 1.0,
            midlayer_extra_bias: default_extra_bias(),
            margin: default_margin(),
            top_cover: default_top_cover(),
        }
    }
}

impl FabricationParams {
    pub fn validate(&self) -> Result<(), FabError> {
        let finite = [
            self.inner_bias,
            self.panel_height,
            self.membrane_thickness,
            self.hole_radius,
            self.midlayer_extra_bias,
            self.margin,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(FabError::InvalidParams("values must be finite"));
        }
        if !(self.inner_bias > 0.0) {
            return Err(FabError::InvalidParams("inner bias must be positive"));
        }
        if !(self.membrane_thickness > 0.0) || !(self.panel_height > self.membrane_thickness) {
            return Err(FabError::InvalidParams("need panel height > membrane thickness > 0"));
        }
        if self.hole_radius < 0.0 || self.margin < 0.0 {
            return Err(FabError::InvalidParams("hole radius and margin must be non-negative"));
        }
        if !(self.midlayer_extra_bias > 0.0) {
            return Err(FabError::InvalidParams("mid-layer extra bias must be positive"));
        }
        Ok(())
    }

    fn band(&self) -> (f64, f64) {
        let (h, t) = (self.panel_height, self.membrane_thickness);
        ((h - t) / 2.0, (h + t) / 2.0)
    }
}

/// Largest fold angle before neighbouring panels collide.
pub fn max_fold_angle(params: &FabricationParams) -> f64 {
    let gap = params.panel_height - params.membrane_thickness;
    if gap <= 0.0 {
        return PI;
    }
    2.0 * (2.0 * params.inner_bias / gap).atan()
}

/// `θ_max / π`.
pub fn max_fold_ratio(params: &FabricationParams) -> f64 {
    max_fold_angle(params) / PI
}

/// Clip a counter-clockwise convex polygon to the half-plane left of the
/// directed line through `a` with direction `d`, shifted left by `offset`.
fn clip_left(poly: &[P2], a: P2, d: V2, offset: f64) -> Vec<P2> {
    let len = d.norm();
    if len == 0.0 {
        return poly.to_vec();
    }
    let side = |p: P2| cross(d, p - a) / len - offset;
    let n = poly.len();
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..n {
        let p = poly[i];
        let q = poly[(i + 1) % n];
        let (sp, sq) = (side(p), side(q));
        if sp >= 0.0 {
            out.push(p);
        }
        if (sp >= 0.0) != (sq >= 0.0) {
            let t = sp / (sp - sq);
            out.push(p + (q - p) * t);
        }
    }
    dedup_ring(out)
}

fn dedup_ring(mut poly: Vec<P2>) -> Vec<P2> {
    poly.dedup_by(|a, b| (*a - *b).norm() < 1e-12);
    while poly.len() > 1 && (poly[0] - poly[poly.len() - 1]).norm() < 1e-12 {
        poly.pop();
    }
    poly
}

/// Parallel-edge inset of a counter-clockwise convex polygon; `None` when
/// nothing of positive area remains.
pub fn inset_polygon(poly: &[P2], bias: f64) -> Option<Vec<P2>> {
    let n = poly.len();
    let mut out = poly.to_vec();
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        out = clip_left(&out, a, b - a, bias);
        if out.len() < 3 {
            return None;
        }
    }
    (out.len() >= 3 && signed_area(&out) > 1e-18).then_some(out)
}

fn convex_panel(pattern: &CreasePattern, panel: usize) -> Result<Vec<P2>, FabError> {
    if panel >= pattern.panels.len() {
        return Err(FoldError::UnknownPanel(panel).into());
    }
    let poly = pattern.panel_polygon(panel);
    if !is_convex_ccw(&poly, 1e-9) {
        return Err(FabError::NonConvexPanel(panel));
    }
    Ok(poly)
}

pub fn inset_panel(pattern: &CreasePattern, panel: usize, bias: f64) -> Result<Vec<P2>, FabError> {
    let poly = convex_panel(pattern, panel)?;
    inset_polygon(&poly, bias).ok_or(FabError::EmptyPanel { panel, bias })
}

/// Where hole centers may go on `panel`.
pub fn operation_region(pattern: &CreasePattern, panel: usize, params: &FabricationParams) -> Result<Vec<P2>, FabError> {
    let bias = params.inner_bias + params.hole_radius + params.margin;
    match inset_panel(pattern, panel, bias) {
        Err(FabError::EmptyPanel { .. }) => Err(FabError::NoOperationRegion { panel }),
        other => other,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hole {
    pub anchor: AnchoredPoint,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoleRequest {
    pub panel: usize,
    pub position: P2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "holes", rename_all = "snake_case")]
pub enum HoleMode {
    /// One hole at every panel centroid that lies in its operation region.
    AutoCenter,
    Manual(Vec<HoleRequest>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolePlacement {
    pub holes: Vec<Hole>,
    /// Panels left without a hole because their operation region is empty.
    pub skipped_panels: Vec<usize>,
}

pub fn place_holes(pattern: &CreasePattern, params: &FabricationParams, mode: &HoleMode) -> Result<HolePlacement, FabError> {
    params.validate()?;
    let mut holes = Vec::new();
    let mut skipped_panels = Vec::new();
    match mode {
        HoleMode::AutoCenter => {
            for panel in 0..pattern.panels.len() {
                match operation_region(pattern, panel, params) {
                    Ok(region) => {
                        let c = centroid(&pattern.panel_polygon(panel));
                        if convex_signed_distance(&region, c) >= 0.0 {
                            holes.push(Hole {
                                anchor: AnchoredPoint::new(pattern, panel, c)?,
                                radius: params.hole_radius,
                            });
                        } else {
                            skipped_panels.push(panel);
                        }
                    }
                    Err(FabError::NoOperationRegion { .. }) => skipped_panels.push(panel),
                    Err(e) => return Err(e),
                }
            }
        }
        HoleMode::Manual(requests) => {
            for r in requests {
                let region = operation_region(pattern, r.panel, params)?;
                let d = convex_signed_distance(&region, r.position);
                if d < 0.0 {
                    return Err(FabError::HoleOutside {
                        panel: r.panel,
                        distance: -d,
                    });
                }
                holes.push(Hole {
                    anchor: AnchoredPoint::new(pattern, r.panel, r.position)?,
                    radius: params.hole_radius,
                });
            }
            check_spacing(&holes, params)?;
        }
    }
    Ok(HolePlacement { holes, skipped_panels })
}

fn check_spacing(holes: &[Hole], params: &FabricationParams) -> Result<(), FabError> {
    let required = 2.0 * (params.hole_radius + params.margin);
    for (i, a) in holes.iter().enumerate() {
        for b in &holes[i + 1..] {
            if a.anchor.panel == b.anchor.panel {
                let distance = (a.anchor.flat - b.anchor.flat).norm();
                if distance < required {
                    return Err(FabError::HolesTooClose {
                        panel: a.anchor.panel,
                        distance,
                        required,
                    });
                }
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TriangleMesh {
    pub vertices: Vec<P3>,
    /// Counter-clockwise seen from outside.
    pub triangles: Vec<[u32; 3]>,
}

impl TriangleMesh {
    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn append(&mut self, other: &TriangleMesh) {
        let base = self.vertices.len() as u32;
        self.vertices.extend_from_slice(&other.vertices);
        self.triangles
            .extend(other.triangles.iter().map(|t| [t[0] + base, t[1] + base, t[2] + base]));
    }

    pub fn signed_volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|i| self.vertices[i as usize].coords);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    pub fn bounding_box(&self) -> Option<(P3, P3)> {
        let first = *self.vertices.first()?;
        Some(self.vertices.iter().fold((first, first), |(lo, hi), p| {
            (lo.inf(p), hi.sup(p))
        }))
    }

    /// Axis-aligned unit cube `[0, 1]³`.
    pub fn unit_cube() -> Self {
        let square = [P2::new(0.0, 0.0), P2::new(1.0, 0.0), P2::new(1.0, 1.0), P2::new(0.0, 1.0)];
        let mut mesh = TriangleMesh::default();
        extrude(&mut mesh, &Region::convex(&square), 0.0, 1.0);
        mesh
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshDiagnostics {
    pub triangle_count: usize,
    /// Edges used by a single triangle.
    pub boundary_edges: usize,
    /// Edges used by more than two triangles.
    pub nonmanifold_edges: usize,
    /// Edges whose two triangles traverse them in the same direction.
    pub inconsistent_edges: usize,
    pub signed_volume: f64,
    pub bounding_box: Option<(P3, P3)>,
    pub watertight: bool,
}

pub fn mesh_diagnostics(mesh: &TriangleMesh) -> MeshDiagnostics {
    use alloc::collections::BTreeMap;
    // undirected edge -> (forward uses, backward uses)
    let mut edges: BTreeMap<(u32, u32), (u32, u32)> = BTreeMap::new();
    for t in &mesh.triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            let e = edges.entry((a.min(b), a.max(b))).or_default();
            if a < b {
                e.0 += 1;
            } else {
                e.1 += 1;
            }
        }
    }
    let (mut boundary, mut nonmanifold, mut inconsistent) = (0, 0, 0);
    for &(f, b) in edges.values() {
        match f + b {
            1 => boundary += 1,
            2 if f != 1 => inconsistent += 1,
            2 => {}
            _ => nonmanifold += 1,
        }
    }
    let signed_volume = mesh.signed_volume();
    MeshDiagnostics {
        triangle_count: mesh.triangles.len(),
        boundary_edges: boundary,
        nonmanifold_edges: nonmanifold,
        inconsistent_edges: inconsistent,
        signed_volume,
        bounding_box: mesh.bounding_box(),
        watertight: boundary == 0 && nonmanifold == 0 && inconsistent == 0 && (mesh.is_empty() || signed_volume > 0.0),
    }
}

/// Binary STL encoding; normals follow the winding.
pub fn stl_bytes(mesh: &TriangleMesh) -> Vec<u8> {
    let mut out = Vec::with_capacity(84 + 50 * mesh.triangles.len());
    let mut header = [0u8; 80];
    let label = b"foldwright binary STL";
    header[..label.len()].copy_from_slice(label);
    out.extend_from_slice(&header);
    out.extend_from_slice(&(mesh.triangles.len() as u32).to_le_bytes());
    for t in &mesh.triangles {
        let [a, b, c] = t.map(|i| mesh.vertices[i as usize]);
        let n = (b - a).cross(&(c - a));
        let n = if n.norm() > 0.0 { n.normalize() } else { n };
        for v in [n.x, n.y, n.z, a.x, a.y, a.z, b.x, b.y, b.z, c.x, c.y, c.z] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        out.extend_from_slice(&[0, 0]);
    }
    out
}

/// Triangulated planar region with oriented boundary loops (region on the
/// left of every loop).
#[derive(Debug, Clone, PartialEq)]
struct Region {
    points: Vec<P2>,
    triangles: Vec<[usize; 3]>,
    loops: Vec<Vec<usize>>,
}

impl Region {
    fn convex(poly: &[P2]) -> Self {
        let n = poly.len();
        Region {
            points: poly.to_vec(),
            triangles: (1..n - 1).map(|i| [0, i, i + 1]).collect(),
            loops: vec![(0..n).collect()],
        }
    }

    /// Convex `outer` minus convex `inner`, where `center` is inside `inner`.
    /// Rays from `center` through the inner vertices split the ring into
    /// convex sectors that are fanned from their inner corner.
    fn annulus(outer: &[P2], inner: &[P2], center: P2) -> Self {
        let k = inner.len();
        let angle_of = |p: P2, reference: f64| {
            let a = (p.y - center.y).atan2(p.x - center.x) - reference;
            let a = if a % TAU < 0.0 { a % TAU + TAU } else { a % TAU };
            if a > TAU - 1e-12 {
                0.0
            } else {
                a
            }
        };
        let reference = (inner[0].y - center.y).atan2(inner[0].x - center.x);
        let ray_angles: Vec<f64> = inner.iter().map(|&p| angle_of(p, reference)).collect();
        let mut corners: Vec<(f64, P2)> = outer.iter().map(|&p| (angle_of(p, reference), p)).collect();
        corners.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut points: Vec<P2> = inner.to_vec();
        let mut ray_index = Vec::with_capacity(k);
        let mut outer_loop = Vec::new();
        for j in 0..k {
            let hit = ray_hit(outer, center, inner[j] - center);
            ray_index.push(points.len());
            outer_loop.push(points.len());
            points.push(hit);
            let lo = ray_angles[j];
            let hi = if j + 1 < k { ray_angles[j + 1] } else { TAU };
            for &(a, p) in &corners {
                if a > lo + 1e-12 && a < hi - 1e-12 {
                    outer_loop.push(points.len());
                    points.push(p);
                }
            }
        }
        let mut triangles = Vec::new();
        let m = outer_loop.len();
        for j in 0..k {
            let start = outer_loop.iter().position(|&v| v == ray_index[j]).expect("ray point in loop");
            let end = ray_index[(j + 1) % k];
            let mut pos = start;
            while outer_loop[pos] != end {
                let next = (pos + 1) % m;
                triangles.push([j, outer_loop[pos], outer_loop[next]]);
                pos = next;
            }
            triangles.push([j, end, (j + 1) % k]);
        }
        let inner_loop: Vec<usize> = (0..k).rev().collect();
        Region {
            points,
            triangles,
            loops: vec![outer_loop, inner_loop],
        }
    }

    fn area(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| signed_area(&[self.points[t[0]], self.points[t[1]], self.points[t[2]]]))
            .sum()
    }
}

/// First boundary point of a convex polygon hit by the ray `center + s·d`.
fn ray_hit(poly: &[P2], center: P2, d: V2) -> P2 {
    let n = poly.len();
    let mut best: Option<f64> = None;
    for i in 0..n {
        let a = poly[i];
        let e = poly[(i + 1) % n] - a;
        let denom = cross(d, e);
        if denom.abs() < 1e-300 {
            continue;
        }
        let s = cross(a - center, e) / denom;
        let u = cross(a - center, d) / denom;
        if s > 0.0 && (-1e-12..=1.0 + 1e-12).contains(&u) {
            best = Some(best.map_or(s, |b: f64| b.min(s)));
        }
    }
    center + d * best.expect("center lies inside the polygon")
}

fn extrude(mesh: &mut TriangleMesh, region: &Region, z0: f64, z1: f64) {
    let base = mesh.vertices.len() as u32;
    let n = region.points.len() as u32;
    for &p in &region.points {
        mesh.vertices.push(P3::new(p.x, p.y, z0));
    }
    for &p in &region.points {
        mesh.vertices.push(P3::new(p.x, p.y, z1));
    }
    for t in &region.triangles {
        let [a, b, c] = t.map(|i| i as u32 + base);
        mesh.triangles.push([a + n, b + n, c + n]);
        mesh.triangles.push([a, c, b]);
    }
    for l in &region.loops {
        for i in 0..l.len() {
            let a = l[i] as u32 + base;
            let b = l[(i + 1) % l.len()] as u32 + base;
            mesh.triangles.push([a, b, b + n]);
            mesh.triangles.push([a, b + n, a + n]);
        }
    }
}

fn hole_polygon(center: P2, radius: f64) -> Vec<P2> {
    (0..HOLE_SEGMENTS)
        .map(|i| {
            let a = TAU * i as f64 / HOLE_SEGMENTS as f64;
            center + V2::new(a.cos(), a.sin()) * radius
        })
        .collect()
}

/// Regions of a convex polygon pierced by `holes` (centers and radius): one
/// convex cell per hole, split along perpendicular bisectors.
fn pierced(poly: &[P2], holes: &[P2], radius: f64, panel: usize) -> Result<Vec<Region>, FabError> {
    if holes.is_empty() || radius <= 0.0 {
        return Ok(vec![Region::convex(poly)]);
    }
    let mut out = Vec::with_capacity(holes.len());
    for (i, &c) in holes.iter().enumerate() {
        let mut cell = poly.to_vec();
        for (j, &o) in holes.iter().enumerate() {
            if i != j {
                let mid = P2::from((c.coords + o.coords) * 0.5);
                let toward = c - o;
                cell = clip_left(&cell, mid, V2::new(toward.y, -toward.x), 0.0);
            }
        }
        if cell.len() < 3 || convex_signed_distance(&cell, c) <= radius + GEOM_EPS {
            return Err(FabError::HoleCutsPart { panel });
        }
        out.push(Region::annulus(&cell, &hole_polygon(c, radius), c));
    }
    Ok(out)
}

fn convex_hull(mut pts: Vec<P2>) -> Vec<P2> {
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup_by(|a, b| (*a - *b).norm() < 1e-12);
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<P2> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Vec<P2> = if pass == 0 { pts.clone() } else { pts.iter().rev().copied().collect() };
        for p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 1] - hull[hull.len() - 2], p - hull[hull.len() - 2]) <= 1e-12 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Vertices of `poly` on the line parallel to `a → b` at distance `offset`.
fn on_offset_line(poly: &[P2], a: P2, b: P2, offset: f64) -> Vec<P2> {
    let d = b - a;
    let len = d.norm();
    poly.iter()
        .copied()
        .filter(|&p| (cross(d, p - a).abs() / len - offset).abs() < 1e-7)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FabWarning {
    /// The thickness fold limit is not guaranteed at vertices with more than
    /// four folding creases.
    HighDegreeVertex { vertex: usize, degree: usize },
    /// `inner_bias ≤ membrane_thickness` leaves no room for shell rings.
    NoShellRings,
    /// Panel too small for a shell ring at this bias.
    NoShellRing { panel: usize },
    /// `h < 3t` leaves no room for a top cover above the membrane band.
    NoTopCover,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FabricationMeshes {
    pub infills: TriangleMesh,
    pub mid_layers: TriangleMesh,
    pub shells: TriangleMesh,
    pub creases: TriangleMesh,
}

impl FabricationMeshes {
    /// Part meshes with their export file stems.
    pub fn parts(&self) -> [(&'static str, &TriangleMesh); 4] {
        [
            ("infills", &self.infills),
            ("mid_layers", &self.mid_layers),
            ("shells", &self.shells),
            ("creases", &self.creases),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FabricationModel {
    pub params: FabricationParams,
    pub holes: Vec<Hole>,
    pub meshes: FabricationMeshes,
    pub max_fold_angle: f64,
    pub warnings: Vec<FabWarning>,
}

pub fn generate_meshes(pattern: &CreasePattern, params: &FabricationParams, holes: &[Hole]) -> Result<FabricationModel, FabError> {
    params.validate()?;
    if !validate_pattern(pattern).planarity.is_empty() {
        return Err(FabError::SelfIntersecting);
    }
    let (b, h, t) = (params.inner_bias, params.panel_height, params.membrane_thickness);
    let (band_lo, band_hi) = params.band();
    let mut warnings = Vec::new();
    for (vertex, creases) in pattern.incidence().iter().enumerate() {
        let degree = creases.iter().filter(|&&c| pattern.creases[c].kind.is_fold()).count();
        if degree > 4 {
            warnings.push(FabWarning::HighDegreeVertex { vertex, degree });
        }
    }
    for hole in holes {
        if hole.anchor.panel >= pattern.panels.len() {
            return Err(FoldError::UnknownPanel(hole.anchor.panel).into());
        }
    }

    let mut meshes = FabricationMeshes::default();
    let mut insets = Vec::with_capacity(pattern.panels.len());
    for panel in 0..pattern.panels.len() {
        let inset = inset_panel(pattern, panel, b)?;
        let mid = inset_panel(pattern, panel, b + params.midlayer_extra_bias)?;
        let centers: Vec<P2> = holes
            .iter()
            .filter(|hole| hole.anchor.panel == panel)
            .map(|hole| hole.anchor.flat)
            .collect();
        let radius = holes
            .iter()
            .find(|hole| hole.anchor.panel == panel)
            .map_or(0.0, |hole| hole.radius);
        let mut part = TriangleMesh::default();
        for region in pierced(&inset, &centers, radius, panel)? {
            extrude(&mut part, &region, 0.0, band_lo);
            extrude(&mut part, &region, band_hi, h);
        }
        meshes.infills.append(&part);
        let mut part = TriangleMesh::default();
        for region in pierced(&mid, &centers, radius, panel)? {
            extrude(&mut part, &region, band_lo, band_hi);
        }
        meshes.mid_layers.append(&part);
        insets.push(inset);
    }

    // crease membranes across the 2b gap, and border strips out to the edge
    let sides = pattern.crease_panels();
    for (c, crease) in pattern.creases.iter().enumerate() {
        let (p, q) = (
            pattern.vertices[crease.endpoints[0]],
            pattern.vertices[crease.endpoints[1]],
        );
        let mut pts = Vec::new();
        let mut adjacent = 0;
        for panel in sides[c].iter().flatten() {
            pts.extend(on_offset_line(&insets[*panel], p, q, b));
            adjacent += 1;
        }
        if adjacent == 1 {
            pts.push(p);
            pts.push(q);
        }
        let hull = convex_hull(pts);
        if hull.len() >= 3 && signed_area(&hull) > 1e-12 {
            extrude(&mut meshes.creases, &Region::convex(&hull), band_lo, band_hi);
        }
    }

    // shell rings around the infills, and an optional cover over the creases
    if b > t {
        let mut outer_insets = Vec::with_capacity(pattern.panels.len());
        for (panel, inner) in insets.iter().enumerate() {
            let outer = inset_panel(pattern, panel, b - t)?;
            let center = centroid(inner);
            let ring = Region::annulus(&outer, inner, center);
            if ring.area() > 1e-12 {
                extrude(&mut meshes.shells, &ring, 0.0, band_lo);
                extrude(&mut meshes.shells, &ring, band_hi, h);
            } else {
                warnings.push(FabWarning::NoShellRing { panel });
            }
            outer_insets.push(outer);
        }
        if params.top_cover {
            let cover_lo = (h - t).max(band_hi);
            if cover_lo < h - GEOM_EPS {
                for (c, crease) in pattern.creases.iter().enumerate() {
                    if !crease.kind.is_fold() {
                        continue;
                    }
                    let (p, q) = (
                        pattern.vertices[crease.endpoints[0]],
                        pattern.vertices[crease.endpoints[1]],
                    );
                    let pts: Vec<P2> = sides[c]
                        .iter()
                        .flatten()
                        .flat_map(|&panel| on_offset_line(&outer_insets[panel], p, q, b - t))
                        .collect();
                    let hull = convex_hull(pts);
                    if hull.len() >= 3 && signed_area(&hull) > 1e-12 {
                        extrude(&mut meshes.shells, &Region::convex(&hull), cover_lo, h);
                    }
                }
            } else {
                warnings.push(FabWarning::NoTopCover);
            }
        }
    } else {
        warnings.push(FabWarning::NoShellRings);
    }

    Ok(FabricationModel {
        params: params.clone(),
        holes: holes.to_vec(),
        meshes,
        max_fold_angle: max_fold_angle(params),
        warnings,
    })
}

/// Place holes and build the part meshes.
pub fn fabricate(pattern: &CreasePattern, params: &FabricationParams, mode: &HoleMode) -> Result<FabricationModel, FabError> {
    let placement = place_holes(pattern, params, mode)?;
    generate_meshes(pattern, params, &placement.holes)
}

/// Volume the infills should have: inset area times the height outside the
/// membrane band, less the hole cylinders.
pub fn expected_infill_volume(pattern: &CreasePattern, params: &FabricationParams, holes: &[Hole]) -> Result<f64, FabError> {
    let (lo, hi) = params.band();
    let height = lo + (params.panel_height - hi);
    let mut area = 0.0;
    for panel in 0..pattern.panels.len() {
        area += signed_area(&inset_panel(pattern, panel, params.inner_bias)?);
    }
    let hole_area = HOLE_SEGMENTS as f64 / 2.0 * (TAU / HOLE_SEGMENTS as f64).sin();
    let holes: f64 = holes.iter().map(|h| hole_area * h.radius * h.radius).sum();
    Ok((area - holes) * height)
}

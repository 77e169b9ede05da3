//! Rigid folding of crease patterns in 3D.
//!
//! Main creases fold by `±θ` (valley `+`, mountain `−`). The remaining fold
//! angles follow from the closure condition at each degree-4 vertex: walking
//! counter-clockwise around the vertex, the product of the rotations about
//! the crease directions is the identity. Panels are then placed
//! breadth-first from the seed panel by rotating about shared creases.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use nalgebra::{Isometry3, Matrix3, Point3, Rotation3, Translation3, Unit, UnitQuaternion, Vector3};
#[allow(unused_imports)] // inherent f64 methods shadow this when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{mean_value_coordinates, P2};
use crate::pattern::{CreaseKind, CreasePattern, FoldGroup, VertexId};

pub type P3 = Point3<f64>;
pub type V3 = Vector3<f64>;

/// Largest accepted rotation-product residual at a vertex.
pub const CLOSURE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FoldError {
    #[error("fold angle {0} rad is outside [0, π)")]
    ThetaOutOfRange(f64),
    #[error("vertex {vertex} has degree {degree}; only degree-4 vertices can be solved")]
    UnsupportedVertex { vertex: VertexId, degree: usize },
    #[error("fold angle of crease {crease} is not determined by any vertex")]
    Underdetermined { crease: usize },
    #[error("kinematically infeasible: closure residual {residual:.3e} at vertex {vertex}")]
    KinematicInfeasible { vertex: VertexId, residual: f64 },
    #[error("panel {0} is not connected to the seed panel")]
    Disconnected(usize),
    #[error("unknown panel {0}")]
    UnknownPanel(usize),
    #[error("point ({x}, {y}) lies outside panel {panel}")]
    OutsidePanel { panel: usize, x: f64, y: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldedGeometry {
    pub theta: f64,
    /// Rigid transform of each panel from the flat pattern into space.
    pub placements: Vec<Isometry3<f64>>,
    /// Signed fold angle of every crease (zero for borders).
    pub crease_folds: Vec<f64>,
    /// Maps transition-graph plane coordinates (start at the origin) to space.
    pub base_frame: Isometry3<f64>,
    pub tg_normal: V3,
    pub closure_residual: f64,
    pub hinge_residual: f64,
    pub seed_panel: usize,
}

impl FoldedGeometry {
    pub fn world(&self, panel: usize, flat: P2) -> P3 {
        self.placements[panel] * P3::new(flat.x, flat.y, 0.0)
    }

    /// Position of every pattern vertex, taken from its lowest-index panel.
    pub fn vertex_positions(&self, pattern: &CreasePattern) -> Vec<P3> {
        let mut owner = vec![None; pattern.vertices.len()];
        for (p, cycle) in pattern.panels.iter().enumerate() {
            for &v in cycle {
                owner[v].get_or_insert(p);
            }
        }
        pattern
            .vertices
            .iter()
            .zip(owner)
            .map(|(&q, p)| match p {
                Some(p) => self.world(p, q),
                None => P3::new(q.x, q.y, 0.0),
            })
            .collect()
    }

    /// World polygon of one panel.
    pub fn panel_polygon(&self, pattern: &CreasePattern, panel: usize) -> Vec<P3> {
        pattern.panels[panel]
            .iter()
            .map(|&v| self.world(panel, pattern.vertices[v]))
            .collect()
    }

    /// Orthogonal projection of a world point onto the transition-graph plane.
    pub fn project(&self, world: P3) -> P2 {
        let local = self.base_frame.inverse_transform_point(&world);
        P2::new(local.x, local.y)
    }

    /// Projected main-crease chain, shifted so that it begins at `start`.
    pub fn tg_polyline(&self, pattern: &CreasePattern, start: P2) -> Vec<P2> {
        let world = self.vertex_positions(pattern);
        pattern
            .tg_chain
            .iter()
            .map(|&v| start + self.project(world[v]).coords)
            .collect()
    }
}

fn crease_direction(pattern: &CreasePattern, crease: usize) -> V3 {
    let [a, b] = pattern.creases[crease].endpoints;
    let d = pattern.vertices[b] - pattern.vertices[a];
    V3::new(d.x, d.y, 0.0).normalize()
}

fn axis_rotation(axis: V3, angle: f64) -> Matrix3<f64> {
    Rotation3::from_axis_angle(&Unit::new_unchecked(axis), angle).into_inner()
}

/// Signed rotation angle of `r` about the unit axis `u`.
fn angle_about(r: &Matrix3<f64>, u: V3) -> f64 {
    let axial = V3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]) * 0.5;
    let cos = 0.5 * (r.trace() - 1.0);
    u.dot(&axial).atan2(cos)
}

/// Angle `x` that best rotates `v` onto `t` about the unit axis `u`.
fn cone_angle(u: V3, v: V3, t: V3) -> f64 {
    let vp = v - u * u.dot(&v);
    let tp = t - u * u.dot(&t);
    u.dot(&vp.cross(&tp)).atan2(vp.dot(&tp))
}

/// Creases at `vertex` sorted counter-clockwise, with outward unit directions.
fn vertex_star(pattern: &CreasePattern, incident: &[usize], vertex: VertexId) -> Vec<(usize, V3)> {
    let at = pattern.vertices[vertex];
    let mut star: Vec<(f64, usize, V3)> = incident
        .iter()
        .map(|&c| {
            let [a, b] = pattern.creases[c].endpoints;
            let other = if a == vertex { b } else { a };
            let d = pattern.vertices[other] - at;
            (d.y.atan2(d.x), c, V3::new(d.x, d.y, 0.0).normalize())
        })
        .collect();
    star.sort_by(|a, b| a.0.total_cmp(&b.0));
    star.into_iter().map(|(_, c, u)| (c, u)).collect()
}

fn star_rotations(star: &[(usize, V3)], folds: &[Option<f64>]) -> Vec<Matrix3<f64>> {
    star.iter()
        .map(|&(c, u)| axis_rotation(u, folds[c].unwrap_or(0.0)))
        .collect()
}

fn closure_residual(star: &[(usize, V3)], folds: &[Option<f64>]) -> f64 {
    let rs = star_rotations(star, folds);
    let product = rs.iter().fold(Matrix3::identity(), |acc, r| acc * r);
    (product - Matrix3::identity()).abs().max()
}

/// Solve the unknown folds at a degree-4 vertex given the others.
fn solve_vertex(star: &[(usize, V3)], folds: &mut [Option<f64>]) {
    let unknown: Vec<usize> = (0..4).filter(|&k| folds[star[k].0].is_none()).collect();
    let b = *unknown.last().expect("vertex has an unknown fold");
    let seq = [(b + 1) % 4, (b + 2) % 4, (b + 3) % 4];
    let ub = star[b].1;
    if let Some(&a) = unknown.iter().find(|&&k| k != b) {
        let pos = seq.iter().position(|&k| k == a).expect("distinct positions");
        let rs = star_rotations(star, folds);
        let before = seq[..pos].iter().fold(Matrix3::identity(), |acc, &k| acc * rs[k]);
        let after = seq[pos + 1..].iter().fold(Matrix3::identity(), |acc, &k| acc * rs[k]);
        let v = after * ub;
        let t = before.transpose() * ub;
        folds[star[a].0] = Some(cone_angle(star[a].1, v, t));
    }
    let rs = star_rotations(star, folds);
    let q = seq.iter().fold(Matrix3::identity(), |acc, &k| acc * rs[k]);
    folds[star[b].0] = Some(angle_about(&q.transpose(), ub));
}

/// Solve every crease fold angle at main-crease angle `theta`.
pub fn solve_crease_folds(pattern: &CreasePattern, theta: f64) -> Result<(Vec<f64>, f64), FoldError> {
    if !(0.0..PI).contains(&theta) {
        return Err(FoldError::ThetaOutOfRange(theta));
    }
    let mut folds: Vec<Option<f64>> = pattern
        .creases
        .iter()
        .map(|c| match (c.kind, c.fold_group) {
            (CreaseKind::Border, _) => Some(0.0),
            (_, FoldGroup::Main) => Some(c.kind.fold_sign() * theta),
            (_, FoldGroup::Zigzag) if theta == 0.0 => Some(0.0),
            _ => None,
        })
        .collect();
    let inc = pattern.incidence();
    let interior = pattern.interior_vertices();
    loop {
        let mut progress = false;
        for &v in &interior {
            let open = inc[v].iter().filter(|&&c| folds[c].is_none()).count();
            if open == 0 || open > 2 {
                continue;
            }
            if inc[v].len() != 4 {
                return Err(FoldError::UnsupportedVertex {
                    vertex: v,
                    degree: inc[v].len(),
                });
            }
            let star = vertex_star(pattern, &inc[v], v);
            solve_vertex(&star, &mut folds);
            progress = true;
        }
        if !progress {
            break;
        }
    }
    if let Some(c) = folds.iter().position(Option::is_none) {
        return Err(FoldError::Underdetermined { crease: c });
    }
    let mut worst = (0, 0.0);
    for &v in &interior {
        let star = vertex_star(pattern, &inc[v], v);
        let r = closure_residual(&star, &folds);
        if !(r <= worst.1) {
            worst = (v, r);
        }
    }
    if !(worst.1 <= CLOSURE_TOLERANCE) {
        return Err(FoldError::KinematicInfeasible {
            vertex: worst.0,
            residual: worst.1,
        });
    }
    Ok((folds.into_iter().map(|f| f.unwrap_or(0.0)).collect(), worst.1))
}

fn rotation_about_line(point: P2, dir: V3, angle: f64) -> Isometry3<f64> {
    let rot = UnitQuaternion::from_axis_angle(&Unit::new_unchecked(dir), angle);
    Isometry3::rotation_wrt_point(rot, P3::new(point.x, point.y, 0.0))
}

/// Rigidly fold `pattern` with its main creases at angle `theta`.
pub fn embed_fold(pattern: &CreasePattern, theta: f64) -> Result<FoldedGeometry, FoldError> {
    let (folds, closure) = solve_crease_folds(pattern, theta)?;
    let sides = pattern.crease_panels();
    let index = pattern.edge_index();
    let count = pattern.panels.len();
    let seed = 0;
    let mut placements: Vec<Option<Isometry3<f64>>> = vec![None; count];
    if count > 0 {
        placements[seed] = Some(Isometry3::identity());
    }
    let mut queue = VecDeque::from([seed]);
    while let Some(a) = queue.pop_front() {
        let ta = placements[a].expect("queued panels are placed");
        let cycle = &pattern.panels[a];
        let mut next: Vec<(usize, usize)> = Vec::new();
        for k in 0..cycle.len() {
            let (p, q) = (cycle[k], cycle[(k + 1) % cycle.len()]);
            let Some(&c) = index.get(&(p.min(q), p.max(q))) else {
                continue;
            };
            let [left, right] = sides[c];
            let other = if left == Some(a) { right } else { left };
            if let Some(b) = other {
                if placements[b].is_none() {
                    next.push((b, c));
                }
            }
        }
        next.sort();
        for (b, c) in next {
            if placements[b].is_some() {
                continue;
            }
            let start = pattern.vertices[pattern.creases[c].endpoints[0]];
            let dir = crease_direction(pattern, c);
            let angle = if sides[c][0] == Some(b) { folds[c] } else { -folds[c] };
            placements[b] = Some(ta * rotation_about_line(start, dir, angle));
            queue.push_back(b);
        }
    }
    let placements: Vec<Isometry3<f64>> = placements
        .into_iter()
        .enumerate()
        .map(|(p, t)| t.ok_or(FoldError::Disconnected(p)))
        .collect::<Result<_, _>>()?;

    let mut hinge: f64 = 0.0;
    for (c, crease) in pattern.creases.iter().enumerate() {
        if let [Some(l), Some(r)] = sides[c] {
            for &v in &crease.endpoints {
                let q = pattern.vertices[v];
                let q3 = P3::new(q.x, q.y, 0.0);
                hinge = hinge.max((placements[l] * q3 - placements[r] * q3).norm());
            }
        }
    }

    let (base_frame, tg_normal) = tg_frame(pattern, &placements, &sides, theta);
    Ok(FoldedGeometry {
        theta,
        placements,
        crease_folds: folds,
        base_frame,
        tg_normal,
        closure_residual: closure,
        hinge_residual: hinge,
        seed_panel: seed,
    })
}

/// Frame of the plane holding the transition graph: the first main-crease
/// segment points along `α_0` and the normal bisects the two panels beside it.
fn tg_frame(
    pattern: &CreasePattern,
    placements: &[Isometry3<f64>],
    sides: &[[Option<usize>; 2]],
    theta: f64,
) -> (Isometry3<f64>, V3) {
    let chain = &pattern.tg_chain;
    if chain.len() < 2 {
        return (Isometry3::identity(), V3::z());
    }
    let Some(c) = pattern.crease_between(chain[0], chain[1]) else {
        return (Isometry3::identity(), V3::z());
    };
    let (a, b) = (pattern.vertices[chain[0]], pattern.vertices[chain[1]]);
    let d = (b - a).normalize();
    let d3 = V3::new(d.x, d.y, 0.0);
    let left = V3::new(-d.y, d.x, 0.0);
    let flipped = pattern.creases[c].endpoints[0] != chain[0];
    let [l, r] = sides[c];
    let (upper, lower) = if flipped { (r, l) } else { (l, r) };
    let pick = |p: Option<usize>| p.map(|p| placements[p]).unwrap_or(placements[0]);
    let (tu, tl) = (pick(upper), pick(lower));
    let normal = (tu.rotation * left + tl.rotation * left).normalize();
    let e1 = tu.rotation * d3;
    let e2 = normal.cross(&e1);
    let frame = Matrix3::from_columns(&[e1, e2, normal]);
    let alpha0 = crate::tg::initial_alpha(theta).unwrap_or(0.0);
    let m = frame * axis_rotation(V3::z(), -alpha0);
    let rotation = UnitQuaternion::from_matrix(&m);
    let origin = tu * P3::new(a.x, a.y, 0.0);
    (
        Isometry3::from_parts(Translation3::from(origin.coords), rotation),
        normal,
    )
}

/// A point carried by a panel, stored as mean-value weights of the panel's
/// flat corners together with its flat position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchoredPoint {
    pub panel: usize,
    pub weights: Vec<f64>,
    pub flat: P2,
}

impl AnchoredPoint {
    pub fn new(pattern: &CreasePattern, panel: usize, flat: P2) -> Result<Self, FoldError> {
        let poly = pattern
            .panels
            .get(panel)
            .ok_or(FoldError::UnknownPanel(panel))?
            .iter()
            .map(|&v| pattern.vertices[v])
            .collect::<Vec<_>>();
        let weights = mean_value_coordinates(&poly, flat);
        if weights.iter().any(|&w| w < -1e-12 || !w.is_finite()) {
            return Err(FoldError::OutsidePanel {
                panel,
                x: flat.x,
                y: flat.y,
            });
        }
        Ok(AnchoredPoint {
            panel,
            weights,
            flat,
        })
    }

    /// Anchor at the panel centroid.
    pub fn centroid(pattern: &CreasePattern, panel: usize) -> Result<Self, FoldError> {
        let poly = pattern
            .panels
            .get(panel)
            .ok_or(FoldError::UnknownPanel(panel))?
            .iter()
            .map(|&v| pattern.vertices[v])
            .collect::<Vec<_>>();
        AnchoredPoint::new(pattern, panel, crate::geom::centroid(&poly))
    }
}

pub fn locate_points(folded: &FoldedGeometry, anchors: &[AnchoredPoint]) -> Result<Vec<P3>, FoldError> {
    anchors
        .iter()
        .map(|a| {
            if a.panel >= folded.placements.len() {
                return Err(FoldError::UnknownPanel(a.panel));
            }
            Ok(folded.world(a.panel, a.flat))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::{miura_sheet, synthesize_pattern};
    use crate::tg::{fold_state, EntryFlag, TransitionGraphDesign};
    use approx::assert_relative_eq;

    fn design() -> TransitionGraphDesign {
        TransitionGraphDesign::new(
            P2::new(3.0, -2.0),
            vec![40.0, 36.0, 50.0, 30.0, 44.0],
            vec![1.1, 2.0, 0.9, 1.9],
            EntryFlag::Valley,
        )
        .unwrap()
    }

    #[test]
    fn flat_fold_is_identity() {
        let p = synthesize_pattern(&design(), 36.0, 3).unwrap();
        let f = embed_fold(&p, 0.0).unwrap();
        assert!(f.placements.iter().all(|t| *t == Isometry3::identity()));
        assert!(f.crease_folds.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn uniform_miura_zigzags_are_equal() {
        let p = miura_sheet(4, 4, 20.0, 15.0, 1.0, EntryFlag::Mountain).unwrap();
        let f = embed_fold(&p, PI / 2.0).unwrap();
        let zig: Vec<f64> = p
            .creases
            .iter()
            .zip(&f.crease_folds)
            .filter(|(c, _)| c.fold_group == FoldGroup::Zigzag && c.kind != CreaseKind::Border)
            .map(|(_, &x)| x.abs())
            .collect();
        assert!(!zig.is_empty());
        for z in &zig {
            assert_relative_eq!(*z, zig[0], epsilon = 1e-12);
        }
        assert!(f.closure_residual < CLOSURE_TOLERANCE);
        assert!(f.hinge_residual < 1e-9);
    }

    #[test]
    fn projection_matches_planar_model() {
        let d = design();
        let p = synthesize_pattern(&d, 36.0, 2).unwrap();
        for theta in [0.0, 0.3, 1.2, 2.0, 3.0] {
            let f = embed_fold(&p, theta).unwrap();
            let chain = f.tg_polyline(&p, d.start());
            let planar = fold_state(&d, theta).unwrap();
            for (a, b) in chain.iter().zip(planar.points()) {
                assert!((a - b).norm() < 1e-6, "θ={theta}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn anchors_follow_panels() {
        let p = miura_sheet(3, 2, 20.0, 15.0, 1.2, EntryFlag::Valley).unwrap();
        let a = AnchoredPoint::centroid(&p, 4).unwrap();
        let b = AnchoredPoint::new(&p, 4, p.vertices[p.panels[4][0]] + nalgebra::Vector2::new(1.0, 1.0))
            .unwrap();
        let flat = embed_fold(&p, 0.0).unwrap();
        let pts = locate_points(&flat, &[a.clone()]).unwrap();
        assert_relative_eq!(pts[0].z, 0.0);
        assert_relative_eq!(pts[0].x, a.flat.x, epsilon = 1e-12);
        let folded = embed_fold(&p, 1.4).unwrap();
        let q = locate_points(&folded, &[a.clone(), b.clone()]).unwrap();
        assert_relative_eq!((q[0] - q[1]).norm(), (a.flat - b.flat).norm(), epsilon = 1e-9);
        assert!(AnchoredPoint::new(&p, 4, P2::new(-100.0, 0.0)).is_err());
        assert!(matches!(
            AnchoredPoint::centroid(&p, 99),
            Err(FoldError::UnknownPanel(99))
        ));
    }

    #[test]
    fn theta_range_is_half_open() {
        let p = miura_sheet(2, 2, 20.0, 15.0, 1.2, EntryFlag::Valley).unwrap();
        assert!(matches!(embed_fold(&p, PI), Err(FoldError::ThetaOutOfRange(_))));
        assert!(embed_fold(&p, PI - 1e-3).is_ok());
    }

    #[test]
    fn non_foldable_vertex_is_rejected() {
        let mut p = miura_sheet(3, 2, 20.0, 15.0, 1.2, EntryFlag::Valley).unwrap();
        let g = p.grid.unwrap();
        // perturb an interior vertex so its sectors no longer close rigidly
        p.vertices[g.vertex(1, 1)].y += 2.0;
        assert!(matches!(
            embed_fold(&p, 1.0),
            Err(FoldError::KinematicInfeasible { .. })
        ));
    }
}

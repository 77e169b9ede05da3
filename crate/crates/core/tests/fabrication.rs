use std::f64::consts::PI;

use foldwright_core::fab::{
    expected_infill_volume, fabricate, inset_polygon, mesh_diagnostics, place_holes, stl_bytes, HoleMode, TriangleMesh,
};
use foldwright_core::fold::P3;
use foldwright_core::geom::{convex_signed_distance, signed_area, P2, V2};
use foldwright_core::pattern::miura_sheet;
use foldwright_core::presets::printing_params;
use foldwright_core::tg::EntryFlag;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_miura() -> foldwright_core::pattern::CreasePattern {
    miura_sheet(2, 2, 30.0, 30.0, 65f64.to_radians(), EntryFlag::Mountain).unwrap()
}

/// Generalized winding number of `p` with respect to a closed mesh.
fn winding(mesh: &TriangleMesh, p: P3) -> f64 {
    let mut total = 0.0;
    for t in &mesh.triangles {
        let [a, b, c] = t.map(|i| mesh.vertices[i as usize] - p);
        let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
        let num = a.dot(&b.cross(&c));
        let den = la * lb * lc + a.dot(&b) * lc + b.dot(&c) * la + c.dot(&a) * lb;
        total += 2.0 * num.atan2(den);
    }
    total / (4.0 * PI)
}

#[test]
fn four_watertight_parts() {
    let pattern = small_miura();
    let params = printing_params();
    let model = fabricate(&pattern, &params, &HoleMode::AutoCenter).unwrap();
    assert_eq!(model.holes.len(), 4);
    for (name, mesh) in model.meshes.parts() {
        let d = mesh_diagnostics(mesh);
        assert!(!mesh.is_empty(), "{name} empty");
        assert!(d.watertight, "{name}: {d:?}");
        assert_eq!(stl_bytes(mesh).len(), 84 + 50 * mesh.triangles.len());
    }
    let expected = expected_infill_volume(&pattern, &params, &model.holes).unwrap();
    let volume = model.meshes.infills.signed_volume();
    assert!((volume - expected).abs() / expected < 1e-9, "{volume} vs {expected}");

    let mut all = TriangleMesh::default();
    for (_, mesh) in model.meshes.parts() {
        all.append(mesh);
    }
    let (lo, hi) = all.bounding_box().unwrap();
    let (plo, phi) = pattern.bounding_box().unwrap();
    assert!((lo.x - plo.x).abs() < 1e-9 && (hi.x - phi.x).abs() < 1e-9);
    assert!((lo.y - plo.y).abs() < 1e-9 && (hi.y - phi.y).abs() < 1e-9);
    assert!(lo.z.abs() < 1e-12 && (hi.z - params.panel_height).abs() < 1e-12);
}

#[test]
fn parts_do_not_overlap() {
    let pattern = small_miura();
    let model = fabricate(&pattern, &printing_params(), &HoleMode::AutoCenter).unwrap();
    let mut all = TriangleMesh::default();
    for (_, mesh) in model.meshes.parts() {
        all.append(mesh);
    }
    let (lo, hi) = all.bounding_box().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut inside = 0;
    for _ in 0..3000 {
        let p = P3::new(rng.random_range(lo.x..hi.x), rng.random_range(lo.y..hi.y), rng.random_range(lo.z..hi.z));
        let w = winding(&all, p);
        assert!(w < 1.5, "point {p:?} covered {w:.3} times");
        if w > 0.5 {
            inside += 1;
        }
    }
    assert!(inside > 100);
}

#[test]
fn stops_holes_outside_small_panels() {
    let pattern = miura_sheet(2, 2, 8.0, 8.0, 1.2, EntryFlag::Valley).unwrap();
    let placed = place_holes(&pattern, &printing_params(), &HoleMode::AutoCenter).unwrap();
    assert!(placed.holes.is_empty());
    assert_eq!(placed.skipped_panels.len(), 4);
}

fn convex_polygon() -> impl Strategy<Value = Vec<P2>> {
    (3usize..9, 10.0f64..40.0, prop::collection::vec(0.0f64..1.0, 9)).prop_map(|(n, r, jitter)| {
        let mut angles: Vec<f64> = (0..n)
            .map(|i| (i as f64 + 0.8 * jitter[i]) * 2.0 * PI / n as f64)
            .collect();
        angles.sort_by(f64::total_cmp);
        angles.iter().map(|a| P2::new(0.0, 0.0) + V2::new(a.cos(), a.sin()) * r).collect()
    })
}

proptest! {
    #[test]
    fn larger_bias_nests_inside(poly in convex_polygon(), b1 in 0.1f64..4.0, extra in 0.01f64..3.0) {
        let Some(outer) = inset_polygon(&poly, b1) else { return Ok(()) };
        let Some(inner) = inset_polygon(&poly, b1 + extra) else { return Ok(()) };
        prop_assert!(signed_area(&inner) < signed_area(&outer));
        for q in inner {
            prop_assert!(convex_signed_distance(&outer, q) >= extra - 1e-9);
        }
    }
}

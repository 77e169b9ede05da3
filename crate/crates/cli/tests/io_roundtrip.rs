use foldwright::dxf::{export_dxf, parse_dxf, MERGE_TOLERANCE};
use foldwright::project::{preset_project, Preset, Project};
use foldwright::svg::{export_svg, SvgStyle};
use foldwright_core::fold::embed_fold;
use foldwright_core::geom::P2;
use foldwright_core::pattern::{miura_sheet, synthesize_pattern, validate_pattern, CreaseKind, CreasePattern, FoldGroup};
use foldwright_core::presets::{five_unit_design, FIVE_UNIT_COPIES, FIVE_UNIT_WIDTH};
use foldwright_core::tg::EntryFlag;
use proptest::prelude::*;

/// Creases as (kind, endpoints) with endpoints in a fixed order.
fn crease_set(p: &CreasePattern) -> Vec<(CreaseKind, P2, P2)> {
    let mut out: Vec<_> = p
        .creases
        .iter()
        .map(|c| {
            let (a, b) = (p.vertices[c.endpoints[0]], p.vertices[c.endpoints[1]]);
            if (a.x, a.y) <= (b.x, b.y) {
                (c.kind, a, b)
            } else {
                (c.kind, b, a)
            }
        })
        .collect();
    out.sort_by(|x, y| (x.1.x, x.1.y, x.2.x, x.2.y).partial_cmp(&(y.1.x, y.1.y, y.2.x, y.2.y)).unwrap());
    out
}

/// Every crease of `a` has a partner in `b` of the same kind within the
/// tolerance, and the counts agree.
fn same_creases(a: &CreasePattern, b: &CreasePattern) -> Result<(), String> {
    let (sa, sb) = (crease_set(a), crease_set(b));
    if sa.len() != sb.len() {
        return Err(format!("{} creases vs {}", sa.len(), sb.len()));
    }
    for (kind, p, q) in &sa {
        let found = sb.iter().any(|(k, r, s)| {
            k == kind
                && (((p - r).norm() <= MERGE_TOLERANCE && (q - s).norm() <= MERGE_TOLERANCE)
                    || ((p - s).norm() <= MERGE_TOLERANCE && (q - r).norm() <= MERGE_TOLERANCE))
        });
        if !found {
            return Err(format!("{kind:?} crease {p:?}-{q:?} lost"));
        }
    }
    Ok(())
}

#[test]
fn synthesized_strip_survives_dxf() {
    let p = synthesize_pattern(&five_unit_design(), FIVE_UNIT_WIDTH, FIVE_UNIT_COPIES).unwrap();
    let imported = parse_dxf(export_dxf(&p).as_bytes()).unwrap();
    assert!(imported.warnings.is_empty(), "{:?}", imported.warnings);
    let q = imported.pattern;
    same_creases(&p, &q).unwrap();
    assert_eq!(q.panels.len(), p.panels.len());
    assert_eq!(q.vertices.len(), p.vertices.len());
    assert!(validate_pattern(&q).ok);
    // fold groups of the folding creases are recovered from geometry
    let main = |p: &CreasePattern| {
        p.creases
            .iter()
            .filter(|c| c.kind.is_fold() && c.fold_group == FoldGroup::Main)
            .count()
    };
    assert_eq!(main(&p), main(&q));
    // interior main lines times transition vectors
    assert_eq!(main(&q), (2 * FIVE_UNIT_COPIES - 1) * five_unit_design().lengths().len());
}

#[test]
fn imported_pattern_folds_like_the_original() {
    let p = miura_sheet(3, 4, 20.0, 25.0, 65f64.to_radians(), EntryFlag::Valley).unwrap();
    let q = parse_dxf(export_dxf(&p).as_bytes()).unwrap().pattern;
    let theta = 1.2;
    let (fp, fq) = (embed_fold(&p, theta).unwrap(), embed_fold(&q, theta).unwrap());
    assert!(fq.closure_residual < 1e-9);
    let sorted = |f: &[f64]| {
        let mut v: Vec<f64> = f.iter().map(|x| (x * 1e9).round() / 1e9).collect();
        v.sort_by(f64::total_cmp);
        v
    };
    assert_eq!(sorted(&fp.crease_folds), sorted(&fq.crease_folds));
}

#[test]
fn dxf_through_project_and_back() {
    let dxf = export_dxf(&miura_sheet(2, 2, 30.0, 30.0, 1.1, EntryFlag::Mountain).unwrap());
    let first = parse_dxf(dxf.as_bytes()).unwrap().pattern;
    let project = Project {
        pattern: Some(first.clone()),
        ..Project::default()
    };
    let loaded = Project::from_json(project.to_json().as_bytes()).unwrap();
    assert_eq!(loaded, project);
    let again = parse_dxf(export_dxf(loaded.pattern.as_ref().unwrap()).as_bytes()).unwrap().pattern;
    same_creases(&first, &again).unwrap();
    assert_eq!(first, again);
}

#[test]
fn svg_export_is_stable_through_project() {
    let project = preset_project(Preset::FiveUnit);
    let loaded = Project::from_json(project.to_json().as_bytes()).unwrap();
    let style = SvgStyle::default();
    assert_eq!(
        export_svg(project.pattern.as_ref().unwrap(), &style),
        export_svg(loaded.pattern.as_ref().unwrap(), &style)
    );
}

#[test]
fn exported_coordinates_are_exact() {
    let p = synthesize_pattern(&five_unit_design(), FIVE_UNIT_WIDTH, FIVE_UNIT_COPIES).unwrap();
    let q = parse_dxf(export_dxf(&p).as_bytes()).unwrap().pattern;
    for v in &q.vertices {
        assert!(p.vertices.iter().any(|w| w == v));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn miura_sheets_round_trip(
        rows in 1usize..5,
        cols in 1usize..5,
        w in 5.0f64..40.0,
        h in 5.0f64..40.0,
        beta in 0.6f64..1.4,
        valley in any::<bool>(),
        shift_x in -500.0f64..500.0,
        shift_y in -500.0f64..500.0,
    ) {
        let flag = if valley { EntryFlag::Valley } else { EntryFlag::Mountain };
        let sheet = miura_sheet(cols, rows * 2, w, h, beta, flag);
        prop_assume!(sheet.is_ok());
        let mut p = sheet.unwrap();
        for v in &mut p.vertices {
            v.x += shift_x;
            v.y += shift_y;
        }
        let q = parse_dxf(export_dxf(&p).as_bytes()).unwrap().pattern;
        prop_assert!(same_creases(&p, &q).is_ok());
        prop_assert_eq!(q.panels.len(), p.panels.len());
        let r = parse_dxf(export_dxf(&q).as_bytes()).unwrap().pattern;
        prop_assert_eq!(q, r);
    }

    #[test]
    fn project_round_trip_keeps_task_values(x in -1e4f64..1e4, y in -1e4f64..1e4, weight in 0.0f64..600.0) {
        let mut project = preset_project(Preset::Reaching);
        let task = project.task.as_mut().unwrap();
        task.waypoints[1] = P2::new(x, y);
        task.reward_weight = weight;
        let text = project.to_json();
        let back = Project::from_json(text.as_bytes()).unwrap();
        prop_assert_eq!(&back, &project);
        prop_assert_eq!(back.to_json(), text);
    }
}

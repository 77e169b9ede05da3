//! ASCII DXF (R12 subset) import and export of crease drawings.
//!
//! Import reads `LINE` and `LWPOLYLINE` entities from the `ENTITIES` section.
//! The layer decides the crease kind; endpoints closer than
//! [`MERGE_TOLERANCE`] are merged, segments are split where they touch or cross,
//! and panels are the bounded faces of the resulting planar graph.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use foldwright_core::geom::{point_segment_distance, segment_crossing, signed_area, P2};
use foldwright_core::pattern::{assign_fold_groups, Crease, CreaseKind, CreasePattern, FoldGroup};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MERGE_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DxfError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("no ENTITIES section")]
    MissingEntities,
    #[error("unclosed panel face: dangling crease end at ({x:.3}, {y:.3})")]
    UnclosedFace { x: f64, y: f64 },
    #[error("face through ({x:.3}, {y:.3}) is not a simple polygon")]
    NonSimpleFace { x: f64, y: f64 },
    #[error("drawing has {0} separate pieces; panels must form one connected sheet")]
    Disconnected(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "warning", rename_all = "snake_case")]
pub enum DxfWarning {
    UnsupportedEntity { entity: String, count: usize },
    UnknownLayer { layer: String, count: usize },
    BulgeIgnored { line: usize },
    ZeroLength { line: usize },
    DuplicateSegment { x: f64, y: f64 },
    FoldOnOuterBoundary { crease: usize },
    NoPanels,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DxfImport {
    pub pattern: CreasePattern,
    pub warnings: Vec<DxfWarning>,
}

pub fn layer_kind(layer: &str) -> Option<CreaseKind> {
    match layer.trim().to_ascii_uppercase().as_str() {
        "MOUNTAIN" => Some(CreaseKind::Mountain),
        "VALLEY" => Some(CreaseKind::Valley),
        "BORDER" | "0" => Some(CreaseKind::Border),
        _ => None,
    }
}

pub fn layer_name(kind: CreaseKind) -> &'static str {
    match kind {
        CreaseKind::Mountain => "MOUNTAIN",
        CreaseKind::Valley => "VALLEY",
        CreaseKind::Border => "BORDER",
    }
}

struct Group<'a> {
    code: i32,
    value: &'a str,
    line: usize,
}

fn groups(text: &str) -> Result<Vec<Group<'_>>, DxfError> {
    let lines: Vec<&str> = text.lines().collect();
    let mut out = Vec::with_capacity(lines.len() / 2);
    let mut i = 0;
    while i + 1 < lines.len() {
        let code = lines[i].trim().parse::<i32>().map_err(|_| DxfError::Syntax {
            line: i + 1,
            message: format!("expected a group code, found {:?}", lines[i].trim()),
        })?;
        out.push(Group {
            code,
            value: lines[i + 1].trim(),
            line: i + 2,
        });
        i += 2;
    }
    if i < lines.len() && !lines[i].trim().is_empty() {
        return Err(DxfError::Syntax {
            line: i + 1,
            message: "group code without a value".into(),
        });
    }
    Ok(out)
}

fn number(g: &Group<'_>) -> Result<f64, DxfError> {
    g.value
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| DxfError::Syntax {
            line: g.line,
            message: format!("expected a number, found {:?}", g.value),
        })
}

struct Segment {
    a: P2,
    b: P2,
    kind: CreaseKind,
    line: usize,
}

fn read_entities(text: &str, warnings: &mut Vec<DxfWarning>) -> Result<Vec<Segment>, DxfError> {
    let gs = groups(text)?;
    let start = gs
        .windows(2)
        .position(|w| w[0].code == 0 && w[0].value == "SECTION" && w[1].code == 2 && w[1].value == "ENTITIES")
        .ok_or(DxfError::MissingEntities)?
        + 2;
    let mut unsupported: BTreeMap<String, usize> = BTreeMap::new();
    let mut unknown_layers: BTreeMap<String, usize> = BTreeMap::new();
    let mut segments = Vec::new();
    let mut i = start;
    while i < gs.len() {
        let head = &gs[i];
        if head.code != 0 {
            i += 1;
            continue;
        }
        if head.value == "ENDSEC" || head.value == "EOF" {
            break;
        }
        let end = gs[i + 1..].iter().position(|g| g.code == 0).map_or(gs.len(), |k| i + 1 + k);
        let body = &gs[i + 1..end];
        let layer = body.iter().find(|g| g.code == 8).map_or("0", |g| g.value);
        match head.value {
            "LINE" | "LWPOLYLINE" => {
                let Some(kind) = layer_kind(layer) else {
                    *unknown_layers.entry(layer.to_string()).or_default() += 1;
                    i = end;
                    continue;
                };
                let mut points = Vec::new();
                if head.value == "LINE" {
                    let mut c = [0.0; 4];
                    for g in body {
                        match g.code {
                            10 => c[0] = number(g)?,
                            20 => c[1] = number(g)?,
                            11 => c[2] = number(g)?,
                            21 => c[3] = number(g)?,
                            _ => {}
                        }
                    }
                    points.push(P2::new(c[0], c[1]));
                    points.push(P2::new(c[2], c[3]));
                } else {
                    let mut closed = false;
                    for g in body {
                        match g.code {
                            70 => closed = g.value.parse::<i64>().unwrap_or(0) & 1 == 1,
                            10 => points.push(P2::new(number(g)?, 0.0)),
                            20 => {
                                if let Some(p) = points.last_mut() {
                                    p.y = number(g)?;
                                }
                            }
                            42 if number(g)? != 0.0 => warnings.push(DxfWarning::BulgeIgnored { line: g.line }),
                            _ => {}
                        }
                    }
                    if closed && points.len() > 2 {
                        points.push(points[0]);
                    }
                }
                for w in points.windows(2) {
                    segments.push(Segment {
                        a: w[0],
                        b: w[1],
                        kind,
                        line: head.line,
                    });
                }
            }
            other => *unsupported.entry(other.to_string()).or_default() += 1,
        }
        i = end;
    }
    warnings.extend(
        unsupported
            .into_iter()
            .map(|(entity, count)| DxfWarning::UnsupportedEntity { entity, count }),
    );
    warnings.extend(
        unknown_layers
            .into_iter()
            .map(|(layer, count)| DxfWarning::UnknownLayer { layer, count }),
    );
    Ok(segments)
}

/// Vertex set that snaps new points onto existing ones within the tolerance.
struct Welder {
    points: Vec<P2>,
    cells: BTreeMap<(i64, i64), Vec<usize>>,
}

impl Welder {
    fn new() -> Self {
        Welder {
            points: Vec::new(),
            cells: BTreeMap::new(),
        }
    }

    fn cell(p: P2) -> (i64, i64) {
        ((p.x / MERGE_TOLERANCE).floor() as i64, (p.y / MERGE_TOLERANCE).floor() as i64)
    }

    fn insert(&mut self, p: P2) -> usize {
        let (cx, cy) = Self::cell(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(ids) = self.cells.get(&(cx + dx, cy + dy)) {
                    if let Some(&id) = ids.iter().find(|&&id| (self.points[id] - p).norm() <= MERGE_TOLERANCE) {
                        return id;
                    }
                }
            }
        }
        let id = self.points.len();
        self.points.push(p);
        self.cells.entry((cx, cy)).or_default().push(id);
        id
    }
}

struct Edges {
    map: BTreeMap<(usize, usize), CreaseKind>,
    order: Vec<(usize, usize)>,
}

/// Merge endpoints, split at touching points and crossings, and drop repeats.
fn planarize(segments: &[Segment], warnings: &mut Vec<DxfWarning>) -> (Vec<P2>, Edges) {
    let mut welder = Welder::new();
    let mut ends = Vec::with_capacity(segments.len());
    for s in segments {
        let (a, b) = (welder.insert(s.a), welder.insert(s.b));
        if a == b {
            warnings.push(DxfWarning::ZeroLength { line: s.line });
        }
        ends.push((a, b));
    }
    for i in 0..segments.len() {
        for j in (i + 1)..segments.len() {
            let (a0, a1) = ends[i];
            let (b0, b1) = ends[j];
            if a0 == a1 || b0 == b1 {
                continue;
            }
            let p = &welder.points;
            let (pa0, pa1, pb0, pb1) = (p[a0], p[a1], p[b0], p[b1]);
            if let Some((t, u)) = segment_crossing(pa0, pa1, pb0, pb1) {
                if t > 0.0 && t < 1.0 && u > 0.0 && u < 1.0 {
                    welder.insert(pa0 + (pa1 - pa0) * t);
                }
            }
        }
    }
    let points = welder.points;
    let mut edges = Edges {
        map: BTreeMap::new(),
        order: Vec::new(),
    };
    for (s, &(a, b)) in segments.iter().zip(&ends) {
        if a == b {
            continue;
        }
        let (pa, pb) = (points[a], points[b]);
        let d = pb - pa;
        let len2 = d.norm_squared();
        let mut stops: Vec<(f64, usize)> = points
            .iter()
            .enumerate()
            .filter(|&(v, &q)| v != a && v != b && point_segment_distance(q, pa, pb) <= MERGE_TOLERANCE)
            .map(|(v, &q)| ((q - pa).dot(&d) / len2, v))
            .filter(|&(t, _)| t > 0.0 && t < 1.0)
            .collect();
        stops.sort_by(|x, y| x.0.total_cmp(&y.0));
        let chain: Vec<usize> = std::iter::once(a).chain(stops.into_iter().map(|(_, v)| v)).chain([b]).collect();
        for w in chain.windows(2) {
            let key = (w[0].min(w[1]), w[0].max(w[1]));
            if key.0 == key.1 {
                continue;
            }
            if edges.map.contains_key(&key) {
                let m = (points[key.0] + points[key.1].coords) / 2.0;
                warnings.push(DxfWarning::DuplicateSegment { x: m.x, y: m.y });
            } else {
                edges.map.insert(key, s.kind);
                edges.order.push(key);
            }
        }
    }
    (points, edges)
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Bounded faces of a planar straight-line graph, as counter-clockwise cycles.
fn faces(points: &[P2], edges: &[(usize, usize)]) -> Result<Vec<Vec<usize>>, DxfError> {
    let n = points.len();
    let mut nbrs: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut parent: Vec<usize> = (0..n).collect();
    for &(a, b) in edges {
        nbrs[a].push(b);
        nbrs[b].push(a);
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        parent[ra] = rb;
    }
    let used: Vec<usize> = (0..n).filter(|&v| !nbrs[v].is_empty()).collect();
    let mut roots: Vec<usize> = used.iter().map(|&v| find(&mut parent, v)).collect();
    roots.sort_unstable();
    roots.dedup();
    if edges.len() + roots.len() == used.len() {
        return Ok(Vec::new());
    }
    if let Some(&v) = used.iter().find(|&&v| nbrs[v].len() == 1) {
        return Err(DxfError::UnclosedFace {
            x: points[v].x,
            y: points[v].y,
        });
    }
    if roots.len() > 1 {
        return Err(DxfError::Disconnected(roots.len()));
    }
    for (v, list) in nbrs.iter_mut().enumerate() {
        let at = points[v];
        list.sort_by(|&a, &b| {
            let (da, db) = (points[a] - at, points[b] - at);
            da.y.atan2(da.x).total_cmp(&db.y.atan2(db.x))
        });
    }
    let mut visited: BTreeMap<(usize, usize), bool> = BTreeMap::new();
    let mut out = Vec::new();
    for &(a, b) in edges {
        for (u0, v0) in [(a, b), (b, a)] {
            if visited.contains_key(&(u0, v0)) {
                continue;
            }
            let mut cycle = Vec::new();
            let (mut u, mut v) = (u0, v0);
            loop {
                visited.insert((u, v), true);
                cycle.push(u);
                let list = &nbrs[v];
                let k = list.iter().position(|&w| w == u).expect("twin edge exists");
                let w = list[(k + list.len() - 1) % list.len()];
                (u, v) = (v, w);
                if (u, v) == (u0, v0) {
                    break;
                }
            }
            let poly: Vec<P2> = cycle.iter().map(|&i| points[i]).collect();
            if signed_area(&poly) > 0.0 {
                let mut seen = cycle.clone();
                seen.sort_unstable();
                if seen.windows(2).any(|w| w[0] == w[1]) {
                    let p = points[cycle[0]];
                    return Err(DxfError::NonSimpleFace { x: p.x, y: p.y });
                }
                out.push(cycle);
            }
        }
    }
    Ok(out)
}

pub fn parse_dxf(bytes: &[u8]) -> Result<DxfImport, DxfError> {
    let text = String::from_utf8_lossy(bytes);
    let mut warnings = Vec::new();
    let segments = read_entities(&text, &mut warnings)?;
    let (points, edges) = planarize(&segments, &mut warnings);
    let panels = faces(&points, &edges.order)?;
    // Keep only vertices that carry a crease, in first-use order.
    let mut remap = vec![usize::MAX; points.len()];
    let mut vertices = Vec::new();
    for &(a, b) in &edges.order {
        for v in [a, b] {
            if remap[v] == usize::MAX {
                remap[v] = vertices.len();
                vertices.push(points[v]);
            }
        }
    }
    let creases: Vec<Crease> = edges
        .order
        .iter()
        .map(|&(a, b)| Crease {
            endpoints: [remap[a].min(remap[b]), remap[a].max(remap[b])],
            kind: edges.map[&(a, b)],
            fold_group: FoldGroup::Zigzag,
        })
        .collect();
    // Canonical order: each cycle starts at its lowest vertex id.
    let mut panels: Vec<Vec<usize>> = panels
        .into_iter()
        .map(|c| {
            let mut c: Vec<usize> = c.into_iter().map(|v| remap[v]).collect();
            let k = c.iter().enumerate().min_by_key(|&(_, &v)| v).map_or(0, |(k, _)| k);
            c.rotate_left(k);
            c
        })
        .collect();
    panels.sort();
    if panels.is_empty() && !creases.is_empty() {
        warnings.push(DxfWarning::NoPanels);
    }
    let mut pattern = CreasePattern {
        vertices,
        creases,
        panels,
        ..CreasePattern::empty()
    };
    let sides = pattern.crease_panels();
    for (i, c) in pattern.creases.iter().enumerate() {
        if c.kind.is_fold() && sides[i].iter().filter(|s| s.is_some()).count() == 1 {
            warnings.push(DxfWarning::FoldOnOuterBoundary { crease: i });
        }
    }
    assign_fold_groups(&mut pattern);
    Ok(DxfImport { pattern, warnings })
}

fn pair(out: &mut String, code: i32, value: impl std::fmt::Display) {
    let _ = write!(out, "{code}\n{value}\n");
}

/// One `LINE` per crease on its kind's layer, full precision.
pub fn export_dxf(pattern: &CreasePattern) -> String {
    let mut out = String::new();
    pair(&mut out, 0, "SECTION");
    pair(&mut out, 2, "HEADER");
    pair(&mut out, 9, "$ACADVER");
    pair(&mut out, 1, "AC1009");
    pair(&mut out, 9, "$INSUNITS");
    pair(&mut out, 70, 4);
    pair(&mut out, 0, "ENDSEC");
    pair(&mut out, 0, "SECTION");
    pair(&mut out, 2, "TABLES");
    pair(&mut out, 0, "TABLE");
    pair(&mut out, 2, "LAYER");
    pair(&mut out, 70, 3);
    for (kind, color, ltype) in [
        (CreaseKind::Mountain, 1, "CONTINUOUS"),
        (CreaseKind::Valley, 5, "DASHED"),
        (CreaseKind::Border, 7, "CONTINUOUS"),
    ] {
        pair(&mut out, 0, "LAYER");
        pair(&mut out, 2, layer_name(kind));
        pair(&mut out, 70, 0);
        pair(&mut out, 62, color);
        pair(&mut out, 6, ltype);
    }
    pair(&mut out, 0, "ENDTAB");
    pair(&mut out, 0, "ENDSEC");
    pair(&mut out, 0, "SECTION");
    pair(&mut out, 2, "ENTITIES");
    for c in &pattern.creases {
        let (a, b) = (pattern.vertices[c.endpoints[0]], pattern.vertices[c.endpoints[1]]);
        pair(&mut out, 0, "LINE");
        pair(&mut out, 8, layer_name(c.kind));
        pair(&mut out, 10, a.x);
        pair(&mut out, 20, a.y);
        pair(&mut out, 30, 0.0);
        pair(&mut out, 11, b.x);
        pair(&mut out, 21, b.y);
        pair(&mut out, 31, 0.0);
    }
    pair(&mut out, 0, "ENDSEC");
    pair(&mut out, 0, "EOF");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(entities: &str) -> String {
        format!("0\nSECTION\n2\nENTITIES\n{entities}0\nENDSEC\n0\nEOF\n")
    }

    fn line(layer: &str, a: (f64, f64), b: (f64, f64)) -> String {
        format!("0\nLINE\n8\n{layer}\n10\n{}\n20\n{}\n11\n{}\n21\n{}\n", a.0, a.1, b.0, b.1)
    }

    fn square_with_valley() -> String {
        let mut e = String::new();
        e += &line("BORDER", (0.0, 0.0), (36.0, 0.0));
        e += &line("border", (36.0, 0.0), (36.0, 36.0));
        e += &line("0", (36.0, 36.0), (0.0, 36.0));
        e += &line("Border", (0.0, 36.0), (0.0, 0.0));
        e += &line("VALLEY", (18.0, 0.0), (18.0, 36.0));
        doc(&e)
    }

    #[test]
    fn single_line_is_one_crease() {
        let imp = parse_dxf(doc(&line("MOUNTAIN", (0.0, 0.0), (36.0, 0.0))).as_bytes()).unwrap();
        assert_eq!(imp.pattern.vertices.len(), 2);
        assert_eq!(imp.pattern.creases.len(), 1);
        assert_eq!(imp.pattern.creases[0].kind, CreaseKind::Mountain);
        assert!(imp.pattern.panels.is_empty());
        assert!(imp.warnings.contains(&DxfWarning::NoPanels));
    }

    #[test]
    fn square_with_crease_has_two_panels() {
        let imp = parse_dxf(square_with_valley().as_bytes()).unwrap();
        let p = &imp.pattern;
        assert_eq!(p.panels.len(), 2);
        // the two border lines crossed by the valley are split
        assert_eq!(p.creases.len(), 7);
        assert_eq!(p.vertices.len(), 6);
        assert_eq!(p.creases.iter().filter(|c| c.kind == CreaseKind::Valley).count(), 1);
        for panel in &p.panels {
            let poly: Vec<P2> = panel.iter().map(|&v| p.vertices[v]).collect();
            assert!((signed_area(&poly) - 18.0 * 36.0).abs() < 1e-9);
        }
    }

    #[test]
    fn crossing_lines_are_split() {
        let mut e = String::new();
        for (a, b) in [((0.0, 0.0), (10.0, 0.0)), ((10.0, 0.0), (10.0, 10.0)), ((10.0, 10.0), (0.0, 10.0)), ((0.0, 10.0), (0.0, 0.0))] {
            e += &line("BORDER", a, b);
        }
        e += &line("MOUNTAIN", (0.0, 0.0), (10.0, 10.0));
        e += &line("VALLEY", (10.0, 0.0), (0.0, 10.0));
        let imp = parse_dxf(doc(&e).as_bytes()).unwrap();
        assert_eq!(imp.pattern.panels.len(), 4);
        assert_eq!(imp.pattern.creases.len(), 8);
    }

    #[test]
    fn near_endpoints_merge() {
        let mut e = String::new();
        e += &line("BORDER", (0.0, 0.0), (10.0, 0.0));
        e += &line("BORDER", (10.0004, 0.0), (0.0, 10.0));
        e += &line("BORDER", (0.0, 10.0), (0.0, 0.0005));
        let imp = parse_dxf(doc(&e).as_bytes()).unwrap();
        assert_eq!(imp.pattern.vertices.len(), 3);
        assert_eq!(imp.pattern.panels.len(), 1);
    }

    #[test]
    fn dangling_crease_is_an_unclosed_face() {
        let mut e = String::new();
        for (a, b) in [((0.0, 0.0), (10.0, 0.0)), ((10.0, 0.0), (10.0, 10.0)), ((10.0, 10.0), (0.0, 10.0)), ((0.0, 10.0), (0.0, 0.0))] {
            e += &line("BORDER", a, b);
        }
        e += &line("VALLEY", (5.0, 0.0), (5.0, 6.0));
        let err = parse_dxf(doc(&e).as_bytes()).unwrap_err();
        assert_eq!(err, DxfError::UnclosedFace { x: 5.0, y: 6.0 });
    }

    #[test]
    fn polyline_and_warnings() {
        let poly = "0\nLWPOLYLINE\n8\nBORDER\n90\n4\n70\n1\n10\n0\n20\n0\n10\n4\n20\n0\n10\n4\n20\n3\n10\n0\n20\n3\n";
        let circle = "0\nCIRCLE\n8\nBORDER\n10\n0\n20\n0\n40\n1\n";
        let cut = line("CUT", (0.0, 0.0), (1.0, 1.0));
        let imp = parse_dxf(doc(&format!("{poly}{circle}{cut}")).as_bytes()).unwrap();
        assert_eq!(imp.pattern.panels.len(), 1);
        assert_eq!(imp.pattern.creases.len(), 4);
        assert!(imp.warnings.contains(&DxfWarning::UnsupportedEntity {
            entity: "CIRCLE".into(),
            count: 1
        }));
        assert!(imp.warnings.contains(&DxfWarning::UnknownLayer {
            layer: "CUT".into(),
            count: 1
        }));
    }

    #[test]
    fn syntax_errors_have_lines() {
        assert_eq!(parse_dxf(b"0\nSECTION\n2\nHEADER\n0\nENDSEC\n"), Err(DxfError::MissingEntities));
        let bad = doc("0\nLINE\n8\nVALLEY\n10\nabc\n");
        assert!(matches!(parse_dxf(bad.as_bytes()), Err(DxfError::Syntax { line: 10, .. })));
    }

    #[test]
    fn export_reimports() {
        let first = parse_dxf(square_with_valley().as_bytes()).unwrap().pattern;
        let again = parse_dxf(export_dxf(&first).as_bytes()).unwrap().pattern;
        assert_eq!(first, again);
    }
}

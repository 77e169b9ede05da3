//! SVG 1.1 crease drawings. One user unit is one millimetre; the y axis is
//! flipped so that the drawing matches the pattern's counter-clockwise frame.

use std::fmt::Write as _;

use foldwright_core::pattern::{CreaseKind, CreasePattern};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvgStyle {
    pub stroke_width: f64,
    pub border_width: f64,
    pub margin: f64,
    pub mountain_color: String,
    pub valley_color: String,
    pub border_color: String,
    pub dash: String,
}

impl Default for SvgStyle {
    fn default() -> Self {
        SvgStyle {
            stroke_width: 0.3,
            border_width: 0.8,
            margin: 5.0,
            mountain_color: "#c0392b".into(),
            valley_color: "#1f4e9c".into(),
            border_color: "#000000".into(),
            dash: "2 1".into(),
        }
    }
}

/// Fixed-precision number with negative zero folded to zero.
fn num(v: f64) -> String {
    let s = format!("{v:.3}");
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        "0.000".into()
    } else {
        s
    }
}

pub fn export_svg(pattern: &CreasePattern, style: &SvgStyle) -> String {
    let (lo, hi) = pattern
        .bounding_box()
        .map_or(((0.0, 0.0), (0.0, 0.0)), |(a, b)| ((a.x, a.y), (b.x, b.y)));
    let m = style.margin;
    let (x0, y0) = (lo.0 - m, -hi.1 - m);
    let (w, h) = (hi.0 - lo.0 + 2.0 * m, hi.1 - lo.1 + 2.0 * m);
    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8" standalone="no"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{}mm" height="{}mm" viewBox="{} {} {} {}">"#,
        num(w),
        num(h),
        num(x0),
        num(y0),
        num(w),
        num(h)
    );
    let _ = writeln!(out, r#"<g id="creases" fill="none" stroke-linecap="round">"#);
    for (i, c) in pattern.creases.iter().enumerate() {
        let (a, b) = (pattern.vertices[c.endpoints[0]], pattern.vertices[c.endpoints[1]]);
        let (class, color, width, dash) = match c.kind {
            CreaseKind::Mountain => ("mountain", &style.mountain_color, style.stroke_width, None),
            CreaseKind::Valley => ("valley", &style.valley_color, style.stroke_width, Some(&style.dash)),
            CreaseKind::Border => ("border", &style.border_color, style.border_width, None),
        };
        let _ = write!(
            out,
            r#"<path id="c{i}" class="{class}" d="M {} {} L {} {}" stroke="{color}" stroke-width="{}""#,
            num(a.x),
            num(-a.y),
            num(b.x),
            num(-b.y),
            num(width)
        );
        if let Some(d) = dash {
            let _ = write!(out, r#" stroke-dasharray="{d}""#);
        }
        let _ = writeln!(out, "/>");
    }
    let _ = writeln!(out, "</g>");
    let _ = writeln!(out, "</svg>");
    out
}

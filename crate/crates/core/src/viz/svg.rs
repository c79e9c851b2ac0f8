//! Hand-rolled SVG 1.1 output for the two chart kinds: the novelty/growth
//! co-evolution curve and the semantic-change map. Output is byte-stable for
//! fixed inputs: coordinates are formatted to two decimals and every
//! collection is iterated in sorted order.

use std::fmt::Write as _;

use crate::novelty::NoveltySeries;
use crate::topics::{growth, TopicYearCounts};

use super::layout::{resolve_overlaps, LabelBox};
use super::{SceneSpec, VizError};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 64.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 48.0;

const NOVELTY_COLOR: &str = "#1f77b4";
const GROWTH_COLOR: &str = "#d62728";

/// Rendered chart: the SVG document plus its data sidecar.
#[derive(Debug, Clone)]
pub struct ChartOutput {
    pub svg: String,
    pub csv: String,
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Svg {
    body: String,
}

impl Svg {
    fn new() -> Self {
        let mut body = String::new();
        let _ = writeln!(body, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
        let _ = writeln!(
            body,
            r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
        );
        let _ = writeln!(body, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        Svg { body }
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, width: f64) {
        let _ = writeln!(
            self.body,
            r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{stroke}" stroke-width="{width}"/>"#
        );
    }

    fn polyline(&mut self, points: &[(f64, f64)], stroke: &str) {
        if points.len() < 2 {
            if let Some(&(x, y)) = points.first() {
                self.circle(x, y, 2.5, stroke);
            }
            return;
        }
        let pts: Vec<String> =
            points.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        let _ = writeln!(
            self.body,
            r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="2"/>"#,
            pts.join(" ")
        );
    }

    fn circle(&mut self, cx: f64, cy: f64, r: f64, fill: &str) {
        let _ = writeln!(self.body, r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="{r}" fill="{fill}"/>"#);
    }

    fn text(&mut self, x: f64, y: f64, size: f64, fill: &str, anchor: &str, content: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{x:.2}" y="{y:.2}" font-family="sans-serif" font-size="{size}" fill="{fill}" text-anchor="{anchor}">{}</text>"#,
            xml_escape(content)
        );
    }

    fn finish(mut self) -> String {
        self.body.push_str("</svg>\n");
        self.body
    }
}

/// Linear map from data range to pixel range.
struct Scale {
    lo: f64,
    hi: f64,
    px_lo: f64,
    px_hi: f64,
}

impl Scale {
    fn new(lo: f64, hi: f64, px_lo: f64, px_hi: f64) -> Self {
        let (lo, hi) = if (hi - lo).abs() < 1e-12 { (lo - 1.0, hi + 1.0) } else { (lo, hi) };
        Scale { lo, hi, px_lo, px_hi }
    }

    fn map(&self, v: f64) -> f64 {
        self.px_lo + (v - self.lo) / (self.hi - self.lo) * (self.px_hi - self.px_lo)
    }
}

/// Dual-axis co-evolution chart: novelty (left axis) and publication growth
/// (right axis) over the year range, with gaps where either series is
/// missing. The CSV sidecar carries one row per year with empty cells at
/// gaps.
pub fn emit_coevolution(
    novelty: &NoveltySeries,
    win: u32,
    counts: &TopicYearCounts,
    years: std::ops::RangeInclusive<i32>,
) -> Result<ChartOutput, VizError> {
    let year_list: Vec<i32> = years.collect();
    let series: Vec<(i32, Option<f64>, Option<f64>)> = year_list
        .iter()
        .map(|&y| (y, novelty.value(y, win), growth(counts, y).ok()))
        .collect();
    if !series.iter().any(|(_, n, g)| n.is_some() && g.is_some()) {
        return Err(VizError::EmptyOverlap);
    }

    let mut csv = String::from("year,novelty,growth\n");
    for (y, n, g) in &series {
        let n_cell = n.map(|v| format!("{v}")).unwrap_or_default();
        let g_cell = g.map(|v| format!("{v}")).unwrap_or_default();
        let _ = writeln!(csv, "{y},{n_cell},{g_cell}");
    }

    let nov_values: Vec<f64> = series.iter().filter_map(|(_, n, _)| *n).collect();
    let gr_values: Vec<f64> = series.iter().filter_map(|(_, _, g)| *g).collect();
    let min_max = |v: &[f64]| {
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    };
    let (nov_lo, nov_hi) = min_max(&nov_values);
    let (gr_lo, gr_hi) = min_max(&gr_values);

    let x = Scale::new(
        *year_list.first().expect("nonempty range") as f64,
        *year_list.last().expect("nonempty range") as f64,
        MARGIN_L,
        WIDTH - MARGIN_R,
    );
    let y_nov = Scale::new(nov_lo, nov_hi, HEIGHT - MARGIN_B, MARGIN_T);
    let y_gr = Scale::new(gr_lo, gr_hi, HEIGHT - MARGIN_B, MARGIN_T);

    let mut svg = Svg::new();
    svg.text(
        WIDTH / 2.0,
        MARGIN_T - 16.0,
        14.0,
        "#333333",
        "middle",
        &format!("{}: novelty({win}) and growth", novelty.topic),
    );
    // frame
    svg.line(MARGIN_L, MARGIN_T, MARGIN_L, HEIGHT - MARGIN_B, "#333333", 1.0);
    svg.line(WIDTH - MARGIN_R, MARGIN_T, WIDTH - MARGIN_R, HEIGHT - MARGIN_B, "#333333", 1.0);
    svg.line(MARGIN_L, HEIGHT - MARGIN_B, WIDTH - MARGIN_R, HEIGHT - MARGIN_B, "#333333", 1.0);

    // gap-aware polylines: one segment per consecutive run
    let draw_series = |svg: &mut Svg, pick: &dyn Fn(&(i32, Option<f64>, Option<f64>)) -> Option<f64>,
                       scale: &Scale,
                       color: &str| {
        let mut segment: Vec<(f64, f64)> = Vec::new();
        for entry in &series {
            match pick(entry) {
                Some(v) => segment.push((x.map(entry.0 as f64), scale.map(v))),
                None => {
                    svg.polyline(&segment, color);
                    segment.clear();
                }
            }
        }
        svg.polyline(&segment, color);
    };
    draw_series(&mut svg, &|e| e.1, &y_nov, NOVELTY_COLOR);
    draw_series(&mut svg, &|e| e.2, &y_gr, GROWTH_COLOR);

    // axis extremes and year ticks
    svg.text(MARGIN_L - 6.0, y_nov.map(nov_hi) + 4.0, 10.0, NOVELTY_COLOR, "end", &format!("{nov_hi:.3}"));
    svg.text(MARGIN_L - 6.0, y_nov.map(nov_lo) + 4.0, 10.0, NOVELTY_COLOR, "end", &format!("{nov_lo:.3}"));
    svg.text(WIDTH - MARGIN_R + 6.0, y_gr.map(gr_hi) + 4.0, 10.0, GROWTH_COLOR, "start", &format!("{gr_hi:.1}%"));
    svg.text(WIDTH - MARGIN_R + 6.0, y_gr.map(gr_lo) + 4.0, 10.0, GROWTH_COLOR, "start", &format!("{gr_lo:.1}%"));
    for &year in &year_list {
        svg.text(x.map(year as f64), HEIGHT - MARGIN_B + 16.0, 10.0, "#333333", "middle", &year.to_string());
    }
    svg.text(MARGIN_L, HEIGHT - 8.0, 11.0, NOVELTY_COLOR, "start", "novelty");
    svg.text(WIDTH - MARGIN_R, HEIGHT - 8.0, 11.0, GROWTH_COLOR, "end", "growth (%)");

    Ok(ChartOutput { svg: svg.finish(), csv })
}

/// Color ramp position → `#rrggbb`, early years green to late years orange.
pub fn year_color(year: i32, min_year: i32, max_year: i32) -> String {
    let t = if max_year > min_year {
        (year - min_year) as f64 / (max_year - min_year) as f64
    } else {
        0.0
    };
    let lerp = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!("#{:02x}{:02x}{:02x}", lerp(44.0, 255.0), lerp(160.0, 127.0), lerp(44.0, 14.0))
}

/// Semantic-change map: one labelled point per (token, year) with label
/// collisions resolved; the CSV sidecar holds the raw coordinates.
pub fn emit_semantic_map(scene: &SceneSpec) -> Result<ChartOutput, VizError> {
    if scene.points.is_empty() {
        return Err(VizError::EmptyScene);
    }
    let mut csv = String::from("token,year,x,y\n");
    for p in &scene.points {
        let _ = writeln!(csv, "{},{},{},{}", p.token, p.year, p.x, p.y);
    }

    let (min_year, max_year) = scene
        .points
        .iter()
        .fold((i32::MAX, i32::MIN), |(lo, hi), p| (lo.min(p.year), hi.max(p.year)));
    let xs: Vec<f64> = scene.points.iter().map(|p| p.x).collect();
    let ys: Vec<f64> = scene.points.iter().map(|p| p.y).collect();
    let pad = |lo: f64, hi: f64| {
        let span = (hi - lo).max(1e-9);
        (lo - span * 0.08, hi + span * 0.08)
    };
    let (x_lo, x_hi) = pad(
        xs.iter().cloned().fold(f64::INFINITY, f64::min),
        xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    );
    let (y_lo, y_hi) = pad(
        ys.iter().cloned().fold(f64::INFINITY, f64::min),
        ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    );
    let sx = Scale::new(x_lo, x_hi, MARGIN_L, WIDTH - MARGIN_R);
    let sy = Scale::new(y_lo, y_hi, HEIGHT - MARGIN_B, MARGIN_T);

    // label boxes estimated from text length, anchored at each point
    let boxes: Vec<LabelBox> = scene
        .points
        .iter()
        .map(|p| {
            let w = 6.6 * p.token.chars().count() as f64 + 4.0;
            LabelBox::at(sx.map(p.x), sy.map(p.y) - 10.0, w, 12.0)
        })
        .collect();
    let resolved = resolve_overlaps(&boxes, 500);

    let mut svg = Svg::new();
    svg.text(WIDTH / 2.0, MARGIN_T - 16.0, 14.0, "#333333", "middle", "semantic change map");
    for (p, b) in scene.points.iter().zip(&resolved.boxes) {
        let color = year_color(p.year, min_year, max_year);
        let (px, py) = (sx.map(p.x), sy.map(p.y));
        svg.circle(px, py, 3.0, &color);
        let dx = b.position[0] - b.anchor[0];
        let dy = b.position[1] - b.anchor[1];
        if (dx * dx + dy * dy).sqrt() > 8.0 {
            svg.line(px, py, b.position[0], b.position[1] + 4.0, "#bbbbbb", 0.5);
        }
        svg.text(b.position[0], b.position[1], 11.0, &color, "middle", &p.token);
    }
    // year legend
    for (i, year) in (min_year..=max_year).enumerate() {
        let color = year_color(year, min_year, max_year);
        let ty = MARGIN_T + 14.0 * i as f64;
        svg.circle(WIDTH - MARGIN_R + 12.0, ty - 3.0, 3.0, &color);
        svg.text(WIDTH - MARGIN_R + 20.0, ty, 10.0, &color, "start", &year.to_string());
    }
    if resolved.residual_overlaps > 0 {
        log::warn!("semantic map: {} label overlaps remain", resolved.residual_overlaps);
    }
    Ok(ChartOutput { svg: svg.finish(), csv })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::viz::ScenePoint;
    use std::collections::BTreeMap;

    fn novelty_fixture() -> NoveltySeries {
        let mut values = BTreeMap::new();
        for (y, v) in [(2001, 0.12), (2002, 0.30), (2004, 0.08)] {
            values.insert((y, 7u32), v);
        }
        NoveltySeries { topic: "ebola".into(), values, ..Default::default() }
    }

    fn counts_fixture() -> TopicYearCounts {
        TopicYearCounts {
            topic: "ebola".into(),
            counts: [(2000, 50u64), (2001, 60), (2002, 90), (2003, 85), (2004, 120)]
                .into_iter()
                .collect(),
        }
    }

    #[test]
    fn coevolution_csv_matches_inputs_with_gap() {
        let out = emit_coevolution(&novelty_fixture(), 7, &counts_fixture(), 2001..=2004).unwrap();
        let lines: Vec<&str> = out.csv.lines().collect();
        assert_eq!(lines[0], "year,novelty,growth");
        assert_eq!(lines[1], "2001,0.12,20");
        assert_eq!(lines[2], "2002,0.3,50");
        // novelty missing in 2003 → empty cell, growth present
        assert!(lines[3].starts_with("2003,,"));
        assert_eq!(lines.len(), 5);
    }

    #[test]
    fn coevolution_requires_overlap() {
        let counts = TopicYearCounts { topic: "x".into(), counts: BTreeMap::new() };
        assert!(matches!(
            emit_coevolution(&novelty_fixture(), 7, &counts, 2001..=2004),
            Err(VizError::EmptyOverlap)
        ));
    }

    #[test]
    fn svg_is_well_formed_and_deterministic() {
        let a = emit_coevolution(&novelty_fixture(), 7, &counts_fixture(), 2001..=2004).unwrap();
        let b = emit_coevolution(&novelty_fixture(), 7, &counts_fixture(), 2001..=2004).unwrap();
        assert_eq!(a.svg, b.svg);
        assert_well_formed(&a.svg);
    }

    #[test]
    fn semantic_map_empty_scene_guard() {
        let scene = SceneSpec { points: Vec::new() };
        assert!(matches!(emit_semantic_map(&scene), Err(VizError::EmptyScene)));
    }

    #[test]
    fn semantic_map_single_label_renders() {
        let scene = SceneSpec {
            points: vec![ScenePoint { token: "virus".into(), year: 2001, x: 0.5, y: -0.25 }],
        };
        let out = emit_semantic_map(&scene).unwrap();
        assert!(out.svg.contains(">virus<"));
        assert!(out.csv.contains("virus,2001,0.5,-0.25"));
        assert_well_formed(&out.svg);
    }

    #[test]
    fn year_color_ramp_endpoints() {
        assert_eq!(year_color(2000, 2000, 2004), "#2ca02c");
        assert_eq!(year_color(2004, 2000, 2004), "#ff7f0e");
    }

    #[test]
    fn text_content_is_escaped() {
        let scene = SceneSpec {
            points: vec![ScenePoint { token: "a<b&c".into(), year: 2001, x: 0.0, y: 0.0 }],
        };
        let out = emit_semantic_map(&scene).unwrap();
        assert!(out.svg.contains("a&lt;b&amp;c"));
        assert_well_formed(&out.svg);
    }

    /// Minimal well-formedness check: tags balance and attributes are quoted.
    pub(crate) fn assert_well_formed(svg: &str) {
        let mut stack: Vec<String> = Vec::new();
        let mut rest = svg;
        while let Some(start) = rest.find('<') {
            let end = rest[start..].find('>').expect("unclosed tag") + start;
            let tag = &rest[start + 1..end];
            rest = &rest[end + 1..];
            if tag.starts_with('?') || tag.starts_with('!') {
                continue;
            }
            if let Some(name) = tag.strip_prefix('/') {
                let open = stack.pop().unwrap_or_else(|| panic!("stray closing tag {name}"));
                assert_eq!(open, name, "mismatched tag");
            } else if !tag.ends_with('/') {
                let name: String =
                    tag.split_whitespace().next().expect("tag name").to_string();
                stack.push(name);
            }
            // attribute quoting: even number of quotes inside the tag
            assert_eq!(tag.matches('"').count() % 2, 0, "unbalanced quotes in <{tag}>");
        }
        assert!(stack.is_empty(), "unclosed tags: {stack:?}");
        assert!(!rest.contains('>'), "stray '>' outside tags");
    }
}

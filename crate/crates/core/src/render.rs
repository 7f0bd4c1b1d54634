//! Deterministic SVG and ASCII drawings of patches and layouts.
//!
//! Patch drawings follow the usual convention: X checks red, Z checks blue,
//! four-body checks as squares, two-body checks as half circles, and merged
//! super-stabilizers outlined. Gauge operators are dashed.

use std::fmt::Write;

use crate::code::{CodePatch, LatticeCoord};
use crate::layout::Layout;
use crate::pauli::{Pauli, PauliString};

const UNIT: f64 = 30.0;
const X_COLOR: &str = "#d62728";
const Z_COLOR: &str = "#1f77b4";
const MIXED_COLOR: &str = "#9467bd";

struct Frame {
    row0: i32,
    col0: i32,
    rows: i32,
    cols: i32,
}

impl Frame {
    fn of(patch: &CodePatch) -> Frame {
        let mut rows = vec![2 * patch.extent.top, 2 * patch.extent.bottom, 2 * patch.home.top, 2 * patch.home.bottom];
        let mut cols = vec![2 * patch.extent.left, 2 * patch.extent.right, 2 * patch.home.left, 2 * patch.home.right];
        for c in patch.sites().iter().chain(patch.syndromes.keys()) {
            rows.push(c.row);
            cols.push(c.col);
        }
        let (r0, r1) = (*rows.iter().min().unwrap(), *rows.iter().max().unwrap());
        let (c0, c1) = (*cols.iter().min().unwrap(), *cols.iter().max().unwrap());
        Frame {
            row0: r0 - 2,
            col0: c0 - 2,
            rows: r1 - r0 + 4,
            cols: c1 - c0 + 4,
        }
    }

    fn xy(&self, c: LatticeCoord) -> (f64, f64) {
        ((c.col - self.col0) as f64 * UNIT, (c.row - self.row0) as f64 * UNIT)
    }
}

fn color(op: &PauliString) -> &'static str {
    if op.is_x_type() {
        X_COLOR
    } else if op.is_z_type() {
        Z_COLOR
    } else {
        MIXED_COLOR
    }
}

/// True when `op` is exactly one nominal plaquette of the patch.
fn is_plaquette(patch: &CodePatch, op: &PauliString) -> bool {
    let support: Vec<LatticeCoord> = op.support().map(|q| patch.coord_of(q)).collect();
    if support.len() > 4 {
        return false;
    }
    patch.syndromes.keys().any(|s| {
        let corners = s.plaquette_corners();
        support.iter().all(|c| corners.contains(c))
    })
}

fn shape(out: &mut String, patch: &CodePatch, frame: &Frame, op: &PauliString, gauge: bool) {
    let pts: Vec<(f64, f64)> = op.support().map(|q| frame.xy(patch.coord_of(q))).collect();
    if pts.is_empty() {
        return;
    }
    let col = color(op);
    let super_stab = !gauge && !is_plaquette(patch, op);
    let class = if gauge {
        "check gauge"
    } else if super_stab {
        "check super"
    } else {
        "check"
    };
    let style = if gauge {
        format!("fill=\"none\" stroke=\"{col}\" stroke-width=\"2\" stroke-dasharray=\"5,3\"")
    } else if super_stab {
        format!("fill=\"{col}\" fill-opacity=\"0.25\" stroke=\"{col}\" stroke-width=\"4\"")
    } else {
        format!("fill=\"{col}\" fill-opacity=\"0.35\" stroke=\"{col}\" stroke-width=\"1\"")
    };
    match pts.len() {
        1 => {
            let (x, y) = pts[0];
            let _ = writeln!(out, "<circle class=\"{class}\" cx=\"{x:.1}\" cy=\"{y:.1}\" r=\"{:.1}\" {style}/>", UNIT * 0.45);
        }
        2 => {
            let ((x1, y1), (x2, y2)) = (pts[0], pts[1]);
            let (mx, my) = ((x1 + x2) / 2.0, (y1 + y2) / 2.0);
            let (cx, cy) = frame.xy(LatticeCoord::new(
                patch.extent.top + patch.extent.bottom,
                patch.extent.left + patch.extent.right,
            ));
            let (vx, vy) = (x2 - x1, y2 - y1);
            let sweep = u8::from(vy * (mx - cx) - vx * (my - cy) > 0.0);
            let r = (vx * vx + vy * vy).sqrt() / 2.0;
            let _ = writeln!(
                out,
                "<path class=\"{class}\" d=\"M {x1:.1} {y1:.1} A {r:.1} {r:.1} 0 0 {sweep} {x2:.1} {y2:.1} Z\" {style}/>"
            );
        }
        n => {
            let cx = pts.iter().map(|p| p.0).sum::<f64>() / n as f64;
            let cy = pts.iter().map(|p| p.1).sum::<f64>() / n as f64;
            let mut sorted = pts.clone();
            sorted.sort_by(|a, b| {
                let ta = (a.1 - cy).atan2(a.0 - cx);
                let tb = (b.1 - cy).atan2(b.0 - cx);
                ta.total_cmp(&tb)
            });
            let list: Vec<String> = sorted.iter().map(|(x, y)| format!("{x:.1},{y:.1}")).collect();
            let _ = writeln!(out, "<polygon class=\"{class}\" points=\"{}\" {style}/>", list.join(" "));
        }
    }
}

fn cross(out: &mut String, x: f64, y: f64, r: f64) {
    let _ = writeln!(
        out,
        "<path class=\"disabled\" d=\"M {:.1} {:.1} L {:.1} {:.1} M {:.1} {:.1} L {:.1} {:.1}\" stroke=\"#333\" stroke-width=\"2\"/>",
        x - r,
        y - r,
        x + r,
        y + r,
        x - r,
        y + r,
        x + r,
        y - r
    );
}

/// SVG drawing of a patch.
pub fn patch_svg(patch: &CodePatch) -> String {
    let frame = Frame::of(patch);
    let (w, h) = (frame.cols as f64 * UNIT, frame.rows as f64 * UNIT);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.0} {h:.0}\">"
    );
    let _ = writeln!(out, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    for op in &patch.stab_set {
        shape(&mut out, patch, &frame, op, false);
    }
    for op in &patch.gauge_set {
        shape(&mut out, patch, &frame, op, true);
    }
    // stabilizers inferred from gauge outcomes rather than measured directly
    for op in &patch.generators.stabilizers {
        let measured = patch.stab_set.iter().any(|s| s.same_support_bits(op));
        if !measured && op.weight() > 1 && !is_plaquette(patch, op) {
            shape(&mut out, patch, &frame, op, false);
        }
    }
    let mut sites: Vec<LatticeCoord> = patch.sites().to_vec();
    sites.sort();
    for c in sites {
        let (x, y) = frame.xy(c);
        if patch.is_active(c) {
            let _ = writeln!(out, "<circle class=\"data\" cx=\"{x:.1}\" cy=\"{y:.1}\" r=\"6\" fill=\"black\"/>");
        } else {
            let _ = writeln!(out, "<circle class=\"data off\" cx=\"{x:.1}\" cy=\"{y:.1}\" r=\"6\" fill=\"#bbb\"/>");
            cross(&mut out, x, y, 8.0);
        }
    }
    for (c, kind) in &patch.syndromes {
        let (x, y) = frame.xy(*c);
        let fill = if *kind == Pauli::X { X_COLOR } else { Z_COLOR };
        let _ = writeln!(
            out,
            "<rect class=\"syndrome\" x=\"{:.1}\" y=\"{:.1}\" width=\"8\" height=\"8\" fill=\"{fill}\"/>",
            x - 4.0,
            y - 4.0
        );
        if patch.disabled.contains(c) {
            cross(&mut out, x, y, 7.0);
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Character grid in doubled coordinates: `o` data, `x` disabled data,
/// `X`/`Z` syndrome sites, `#` disabled syndrome, `.` empty.
pub fn patch_ascii(patch: &CodePatch) -> String {
    let f = Frame::of(patch);
    let mut out = String::new();
    for r in (f.row0 + 2)..(f.row0 + f.rows - 1) {
        let line: String = ((f.col0 + 2)..(f.col0 + f.cols - 1))
            .map(|c| {
                let at = LatticeCoord::new(r, c);
                if patch.has_data(at) {
                    if patch.is_active(at) {
                        'o'
                    } else {
                        'x'
                    }
                } else if let Some(k) = patch.syndromes.get(&at) {
                    if patch.disabled.contains(&at) {
                        '#'
                    } else if *k == Pauli::X {
                        'X'
                    } else {
                        'Z'
                    }
                } else {
                    '.'
                }
            })
            .collect();
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

/// SVG drawing of a layout: channels grey, Δd margins dashed, home regions
/// filled, enlargements orange and overlaps red.
pub fn layout_svg(layout: &Layout) -> String {
    let cell = (800.0 / layout.height.max(layout.width).max(1) as f64).clamp(2.0, 20.0);
    let (w, h) = (layout.width as f64 * cell, layout.height as f64 * cell);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.0} {h:.0}\">"
    );
    let _ = writeln!(out, "<rect class=\"channel\" width=\"100%\" height=\"100%\" fill=\"#e8e8e8\"/>");
    let dd = layout.delta_d as i64;
    for (id, slot) in layout.patches.iter().enumerate() {
        let home = layout.home_rect(id);
        let rect = |class: &str, r0: i64, r1: i64, c0: i64, c1: i64, style: &str| {
            let r0 = r0.clamp(0, layout.height as i64);
            let r1 = r1.clamp(0, layout.height as i64);
            let c0 = c0.clamp(0, layout.width as i64);
            let c1 = c1.clamp(0, layout.width as i64);
            format!(
                "<rect class=\"{class}\" x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" {style}/>\n",
                c0 as f64 * cell,
                r0 as f64 * cell,
                (c1 - c0) as f64 * cell,
                (r1 - r0) as f64 * cell
            )
        };
        if dd > 0 {
            out.push_str(&rect(
                "margin",
                home.r0 - dd,
                home.r1 + dd,
                home.c0 - dd,
                home.c1 + dd,
                "fill=\"none\" stroke=\"#777\" stroke-dasharray=\"4,2\"",
            ));
        }
        let fp = layout.footprint(id);
        if fp != home {
            let stroke = if slot.overlap { "#d62728" } else { "#ff7f0e" };
            out.push_str(&rect(
                "growth",
                fp.r0,
                fp.r1,
                fp.c0,
                fp.c1,
                &format!("fill=\"#ffbb78\" stroke=\"{stroke}\" stroke-width=\"2\""),
            ));
        }
        out.push_str(&rect("patch", home.r0, home.r1, home.c0, home.c1, "fill=\"#4c72b0\""));
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"{:.1}\" fill=\"white\" text-anchor=\"middle\">{id}</text>",
            (home.c0 + home.c1) as f64 * cell / 2.0,
            (home.r0 + home.r1) as f64 * cell / 2.0 + cell,
            (cell * 2.0).min(14.0)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// One character per lattice cell: patch id in base 36 on home cells, `+`
/// on enlargement, `:` inside an unused Δd margin, `.` channel.
pub fn layout_ascii(layout: &Layout) -> String {
    let mut grid = vec![vec!['.'; layout.width]; layout.height];
    let dd = layout.delta_d as i64;
    let mut paint = |r0: i64, r1: i64, c0: i64, c1: i64, f: &dyn Fn(char) -> char| {
        for r in r0.max(0)..r1.min(layout.height as i64) {
            for c in c0.max(0)..c1.min(layout.width as i64) {
                let cell = &mut grid[r as usize][c as usize];
                *cell = f(*cell);
            }
        }
    };
    for id in 0..layout.patches.len() {
        let h = layout.home_rect(id);
        paint(h.r0 - dd, h.r1 + dd, h.c0 - dd, h.c1 + dd, &|c| if c == '.' { ':' } else { c });
    }
    for id in 0..layout.patches.len() {
        let fp = layout.footprint(id);
        paint(fp.r0, fp.r1, fp.c0, fp.c1, &|_| '+');
    }
    for id in 0..layout.patches.len() {
        let h = layout.home_rect(id);
        let ch = std::char::from_digit((id % 36) as u32, 36).unwrap();
        paint(h.r0, h.r1, h.c0, h.c1, &|_| ch);
    }
    grid.into_iter().map(|row| row.into_iter().collect::<String>() + "\n").collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::build_rotated_code;
    use crate::layout::{Growth, LayoutKind};

    #[test]
    fn pristine_d3_counts() {
        let p = build_rotated_code(3).unwrap();
        let svg = patch_svg(&p);
        assert_eq!(svg.matches("class=\"data\"").count(), 9);
        assert_eq!(svg.matches("class=\"check").count(), 8);
        assert_eq!(svg.matches("class=\"check super\"").count(), 0);
        assert_eq!(svg, patch_svg(&p));
    }

    #[test]
    fn removed_syndrome_outlines_a_super_stabilizer() {
        let p = build_rotated_code(5).unwrap();
        let (q, _) = crate::instructions::syndromeq_rm(&p, LatticeCoord::plaquette(1, 1)).unwrap();
        let svg = patch_svg(&q);
        assert!(svg.contains("class=\"check super\""));
        assert!(svg.contains("class=\"disabled\""));
        let art = patch_ascii(&q);
        assert_eq!(art.matches('#').count(), 1);
        assert_eq!(art.matches('o').count(), 25);
    }

    #[test]
    fn disabled_data_is_crossed() {
        let p = build_rotated_code(3).unwrap();
        let (q, _) = crate::instructions::dataq_rm(&p, LatticeCoord::data(1, 1)).unwrap();
        assert_eq!(patch_svg(&q).matches("class=\"data off\"").count(), 1);
        assert_eq!(patch_ascii(&q).matches('x').count(), 1);
    }

    #[test]
    fn layout_shows_channels_and_margins() {
        let mut l = Layout::grid(4, 3, 2, LayoutKind::Ours);
        l.set_growth(0, Growth { top: 0, bottom: 1, left: 0, right: 2 });
        let art = layout_ascii(&l);
        assert!(art.contains('.') && art.contains(':') && art.contains('+'));
        assert_eq!(art.matches('0').count(), 9);
        let svg = layout_svg(&l);
        assert_eq!(svg.matches("class=\"patch\"").count(), 4);
        assert_eq!(svg.matches("class=\"margin\"").count(), 4);
        assert_eq!(svg.matches("class=\"growth\"").count(), 1);
    }
}

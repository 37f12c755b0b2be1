//! Plain SVG output. Coordinates are printed with fixed precision, so the
//! same input always produces the same bytes.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::graph::{Graph, Vertex, DEPOT};
use crate::plan::FleetPlan;
use crate::results::{all_solved, mean, planners_in, ResultRow};
use crate::simulator::PlannerKind;

const COLORS: [&str; 8] = ["#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];
const SIZE: f64 = 600.0;
const MARGIN: f64 = 40.0;

fn header(out: &mut String, w: f64, h: f64) {
    writeln!(
        out,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}" font-family="sans-serif">"##
    )
    .unwrap();
    writeln!(out, r##"<rect width="100%" height="100%" fill="white"/>"##).unwrap();
}

fn layout(graph: &Graph) -> Vec<[f64; 2]> {
    if let Some(p) = graph.positions() {
        return p.to_vec();
    }
    let n = graph.num_vertices() as f64;
    (0..graph.num_vertices())
        .map(|i| {
            let a = std::f64::consts::TAU * i as f64 / n;
            [a.cos(), a.sin()]
        })
        .collect()
}

/// Draws the graph, must-visit vertices and, if given, each agent's route.
pub fn graph_svg(graph: &Graph, must_visit: &[Vertex], plan: Option<&FleetPlan>) -> String {
    let pos = layout(graph);
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in &pos {
        x0 = x0.min(p[0]);
        x1 = x1.max(p[0]);
        y0 = y0.min(p[1]);
        y1 = y1.max(p[1]);
    }
    let span = (x1 - x0).max(y1 - y0).max(1e-9);
    let scale = (SIZE - 2.0 * MARGIN) / span;
    // y grows downwards in SVG
    let at = |v: Vertex| (MARGIN + (pos[v][0] - x0) * scale, SIZE - MARGIN - (pos[v][1] - y0) * scale);

    let mut out = String::new();
    header(&mut out, SIZE, SIZE);
    writeln!(out, r##"<g stroke="#bbbbbb" stroke-width="1">"##).unwrap();
    for (i, j, _) in graph.undirected_edges() {
        let ((ax, ay), (bx, by)) = (at(i), at(j));
        writeln!(out, r##"<line x1="{ax:.2}" y1="{ay:.2}" x2="{bx:.2}" y2="{by:.2}"/>"##).unwrap();
    }
    writeln!(out, "</g>").unwrap();
    if let Some(plan) = plan {
        for (m, route) in plan.routes.iter().enumerate() {
            if route.len() < 2 {
                continue;
            }
            // small per-agent shift keeps shared edges visible
            let shift = 3.0 * (m as f64 - (plan.routes.len() as f64 - 1.0) / 2.0);
            let pts: Vec<String> = route
                .iter()
                .map(|&v| {
                    let (x, y) = at(v);
                    format!("{:.2},{:.2}", x + shift, y + shift)
                })
                .collect();
            writeln!(
                out,
                r##"<polyline points="{}" fill="none" stroke="{}" stroke-width="2.5" stroke-opacity="0.8"><title>agent {}</title></polyline>"##,
                pts.join(" "),
                COLORS[m % COLORS.len()],
                m + 1
            )
            .unwrap();
        }
    }
    for v in 0..graph.num_vertices() {
        let (x, y) = at(v);
        let fill = if v == DEPOT {
            "#000000"
        } else if must_visit.contains(&v) {
            "#ffd700"
        } else {
            "#ffffff"
        };
        let text = if v == DEPOT { "#ffffff" } else { "#000000" };
        writeln!(out, r##"<circle cx="{x:.2}" cy="{y:.2}" r="10" fill="{fill}" stroke="#000000"/>"##).unwrap();
        writeln!(out, r##"<text x="{x:.2}" y="{:.2}" font-size="10" text-anchor="middle" fill="{text}">{}</text>"##, y + 3.5, v + 1)
            .unwrap();
    }
    out.push_str("</svg>\n");
    out
}

/// Mean total cost against horizon for each planner, over the all-solved subset.
pub fn cost_curve_svg(rows: &[ResultRow]) -> String {
    let planners = planners_in(rows);
    let subset = all_solved(rows, &planners);
    let mut series: BTreeMap<PlannerKind, Vec<(usize, f64)>> = BTreeMap::new();
    let mut horizons: Vec<usize> = rows.iter().map(|r| r.horizon).collect();
    horizons.sort_unstable();
    horizons.dedup();
    for &p in &planners {
        for &h in &horizons {
            let xs: Vec<f64> = rows
                .iter()
                .filter(|r| r.planner == p && r.horizon == h && subset.contains(&r.instance_id))
                .map(|r| r.total_cost)
                .collect();
            if !xs.is_empty() {
                series.entry(p).or_default().push((h, mean(&xs)));
            }
        }
    }
    let (w, hgt) = (SIZE, 400.0);
    let h_lo = horizons.first().copied().unwrap_or(0) as f64;
    let h_hi = horizons.last().copied().unwrap_or(1) as f64;
    let y_hi = series.values().flatten().map(|p| p.1).fold(0.0, f64::max).max(1e-9) * 1.1;
    let sx = |h: f64| MARGIN + (h - h_lo) / (h_hi - h_lo).max(1.0) * (w - 2.0 * MARGIN);
    let sy = |c: f64| hgt - MARGIN - c / y_hi * (hgt - 2.0 * MARGIN);

    let mut out = String::new();
    header(&mut out, w, hgt);
    writeln!(
        out,
        r##"<g stroke="#000000"><line x1="{m:.2}" y1="{b:.2}" x2="{r:.2}" y2="{b:.2}"/><line x1="{m:.2}" y1="{m:.2}" x2="{m:.2}" y2="{b:.2}"/></g>"##,
        m = MARGIN,
        b = hgt - MARGIN,
        r = w - MARGIN
    )
    .unwrap();
    for &h in &horizons {
        writeln!(out, r##"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">{h}</text>"##, sx(h as f64), hgt - MARGIN + 15.0)
            .unwrap();
    }
    writeln!(out, r##"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">H</text>"##, w / 2.0, hgt - 5.0).unwrap();
    writeln!(out, r##"<text x="5" y="{:.2}" font-size="11">{:.3}</text>"##, MARGIN, y_hi).unwrap();
    for (k, (p, pts)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let line: Vec<String> = pts.iter().map(|&(h, c)| format!("{:.2},{:.2}", sx(h as f64), sy(c))).collect();
        writeln!(out, r##"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"##, line.join(" ")).unwrap();
        for &(h, c) in pts {
            writeln!(out, r##"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"##, sx(h as f64), sy(c)).unwrap();
        }
        writeln!(
            out,
            r##"<text x="{:.2}" y="{:.2}" font-size="12" fill="{color}">{p}</text>"##,
            w - MARGIN - 60.0,
            MARGIN + 15.0 * k as f64
        )
        .unwrap();
    }
    writeln!(out, r##"<text x="{:.2}" y="20" font-size="12" text-anchor="middle">mean total cost, {} instances solved by all</text>"##, w / 2.0, subset.len())
        .unwrap();
    out.push_str("</svg>\n");
    out
}

//! Deterministic DOT and JSON exports of windows and ladders.

use std::fmt::Write as _;

use crate::eqgraph::Window;
use crate::ladder::SimpleLadder;

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\\\""))
}

/// DOT rendering of a window: vertices in canonical order, cone vertices
/// drawn as diamonds.
pub fn window_dot(w: &Window) -> String {
    let mut out = String::from("graph finegraph {\n");
    for i in 0..w.vertex_count() {
        let token = w.token(i);
        let cone = w
            .spec
            .as_ref()
            .is_some_and(|s| s.is_cone_orbit(w.verts[i].orbit));
        let shape = if cone { "diamond" } else { "circle" };
        writeln!(out, "  {} [shape={shape}];", quote(&token)).unwrap();
    }
    for e in &w.edges {
        let orbit = e
            .key
            .as_ref()
            .and_then(|k| {
                w.spec.as_ref().map(|s| s.edge_orbits()[k.orbit].id.clone())
            })
            .unwrap_or_default();
        writeln!(
            out,
            "  {} -- {} [label={}];",
            quote(&w.token(e.a)),
            quote(&w.token(e.b)),
            quote(&orbit)
        )
        .unwrap();
    }
    out.push_str("}\n");
    out
}

/// DOT overlay of a simple ladder: side P red, side Q blue, internal arcs
/// dashed, remaining cell boundary edges thin.
pub fn ladder_dot(w: &Window, ladder: &SimpleLadder) -> String {
    let mut out = String::from("graph ladder {\n");
    let mut cell_edges: Vec<usize> = ladder.cells.iter().flat_map(|c| c.edge_set.clone()).collect();
    cell_edges.sort_unstable();
    cell_edges.dedup();
    let mut verts: Vec<usize> = cell_edges
        .iter()
        .flat_map(|&e| [w.edges[e].a, w.edges[e].b])
        .collect();
    verts.sort_unstable();
    verts.dedup();
    for &v in &verts {
        writeln!(out, "  {};", quote(&w.token(v))).unwrap();
    }
    let p_edges: std::collections::BTreeSet<usize> = ladder.side_p.edges.iter().copied().collect();
    let q_edges: std::collections::BTreeSet<usize> = ladder.side_q.edges.iter().copied().collect();
    let internal: std::collections::BTreeSet<usize> = ladder
        .internal_arcs
        .iter()
        .flat_map(|a| a.edges.iter().copied())
        .collect();
    for &e in &cell_edges {
        let attr = if p_edges.contains(&e) {
            "[color=red,penwidth=2]"
        } else if q_edges.contains(&e) {
            "[color=blue,penwidth=2]"
        } else if internal.contains(&e) {
            "[style=dashed]"
        } else {
            "[penwidth=1]"
        };
        writeln!(
            out,
            "  {} -- {} {attr};",
            quote(&w.token(w.edges[e].a)),
            quote(&w.token(w.edges[e].b))
        )
        .unwrap();
    }
    writeln!(out, "  // cells: {}", ladder.cells.len()).unwrap();
    out.push_str("}\n");
    out
}

/// JSON adjacency of a window: tokens, edges, and flags.
pub fn window_json(w: &Window) -> serde_json::Value {
    let verts: Vec<String> = (0..w.vertex_count()).map(|i| w.token(i)).collect();
    let edges: Vec<serde_json::Value> = w
        .edges
        .iter()
        .map(|e| {
            serde_json::json!({
                "a": w.token(e.a),
                "b": w.token(e.b),
                "orbit": e.key.as_ref().and_then(|k| w.spec.as_ref().map(|s| s.edge_orbits()[k.orbit].id.clone())),
            })
        })
        .collect();
    serde_json::json!({
        "vertices": verts,
        "edges": edges,
        "complete": w.complete,
        "radius": w.radius,
        "center": w.token(w.center),
    })
}

//! Bounded embedded-path and circuit enumeration on windows, and the
//! fineness certificate built from it.
//!
//! Circuits of length n through an edge e = {u,v} are in bijection with
//! embedded paths of length n-1 between u and v avoiding e, which is how the
//! counts are computed; windows that cannot certify containment of all such
//! paths mark their results as lower bounds.

use std::collections::BTreeSet;

use super::window::{WPath, Window};
use super::GraphSpec;
use crate::error::{Error, Result};

/// Result of a bounded enumeration; `complete` certifies exhaustiveness.
#[derive(Clone, Debug)]
pub struct CircuitCounts {
    /// counts[l] = number of circuits of length exactly l through the edge.
    pub counts: Vec<usize>,
    pub complete: bool,
}

fn ball_contained(w: &Window, v: usize, n: usize) -> bool {
    if !w.complete {
        return false;
    }
    if w.saturated {
        return true;
    }
    let d = w.bfs_dist(w.center)[v];
    d != u32::MAX && d as usize + n <= w.radius
}

/// All embedded paths of length <= max_len from u to v, avoiding the given
/// edge index if any. Deterministic order; the flag certifies that the window
/// contains every such path of the spec.
pub fn embedded_paths(
    w: &Window,
    u: usize,
    v: usize,
    max_len: usize,
    avoid_edge: Option<usize>,
    cap: Option<usize>,
) -> Result<(Vec<WPath>, bool)> {
    if u == v {
        return Err(Error::BadInput("embedded path endpoints must differ".into()));
    }
    let cap = cap.unwrap_or(5_000_000);
    let dist_to_v = w.bfs_dist(v);
    let mut out = Vec::new();
    let mut on_path = vec![false; w.vertex_count()];
    let mut path = WPath::single(u);
    on_path[u] = true;
    let mut capped = false;
    dfs_paths(w, v, max_len, avoid_edge, cap, &mut path, &mut on_path, &dist_to_v, &mut out, &mut capped);
    out.sort();
    let complete = !capped && ball_contained(w, u, max_len);
    Ok((out, complete))
}

#[allow(clippy::too_many_arguments)]
fn dfs_paths(
    w: &Window,
    target: usize,
    max_len: usize,
    avoid_edge: Option<usize>,
    cap: usize,
    path: &mut WPath,
    on_path: &mut [bool],
    dist_to_v: &[u32],
    out: &mut Vec<WPath>,
    capped: &mut bool,
) {
    if *capped {
        return;
    }
    let cur = path.end();
    if cur == target && path.len() > 0 {
        out.push(path.clone());
        if out.len() >= cap {
            *capped = true;
        }
        return;
    }
    if path.len() >= max_len {
        return;
    }
    let budget = max_len - path.len();
    for &(y, e) in &w.adj[cur] {
        if Some(e) == avoid_edge || on_path[y] {
            continue;
        }
        if dist_to_v[y] == u32::MAX || dist_to_v[y] as usize + 1 > budget {
            continue;
        }
        path.verts.push(y);
        path.edges.push(e);
        on_path[y] = true;
        dfs_paths(w, target, max_len, avoid_edge, cap, path, on_path, dist_to_v, out, capped);
        on_path[y] = false;
        path.verts.pop();
        path.edges.pop();
    }
}

/// Circuit counts per length through the given window edge, up to length n.
pub fn circuits_through_edge(w: &Window, edge: usize, n: usize) -> Result<CircuitCounts> {
    let e = &w.edges[edge];
    let mut counts = vec![0usize; n + 1];
    if n >= 2 {
        let (paths, _) = embedded_paths(w, e.a, e.b, n - 1, Some(edge), None)?;
        for p in paths {
            counts[p.len() + 1] += 1;
        }
    }
    let complete = ball_contained(w, e.a, n);
    Ok(CircuitCounts { counts, complete })
}

/// A circuit of a window, identified by its sorted edge set.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct Circuit {
    pub edge_set: Vec<usize>,
    /// A closed representative traversal (first vertex repeated at the end).
    pub cycle: Vec<usize>,
}

impl Circuit {
    pub fn len(&self) -> usize {
        self.edge_set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edge_set.is_empty()
    }

    pub fn vertex_set(&self) -> BTreeSet<usize> {
        self.cycle.iter().copied().collect()
    }
}

/// All circuits of length <= max_len in the window. Each circuit is found at
/// its minimal edge index: the rest of the circuit is an embedded path
/// avoiding that edge and using only larger edge indices.
pub fn all_circuits(w: &Window, max_len: usize, cap: Option<usize>) -> Result<(Vec<Circuit>, bool)> {
    let cap = cap.unwrap_or(2_000_000);
    let mut out = Vec::new();
    let mut complete = true;
    for (ei, e) in w.edges.iter().enumerate() {
        if max_len < 2 {
            break;
        }
        let (paths, _) = embedded_paths_min_edge(w, e.a, e.b, max_len - 1, ei, cap - out.len())?;
        for p in paths {
            let mut edge_set: Vec<usize> = p.edges.clone();
            edge_set.push(ei);
            edge_set.sort_unstable();
            let mut cycle = p.verts.clone();
            cycle.push(e.a);
            out.push(Circuit { edge_set, cycle });
        }
        if out.len() >= cap {
            complete = false;
            break;
        }
    }
    out.sort();
    Ok((out, complete))
}

/// Embedded paths from u to v of length <= max_len using only edges with
/// index strictly greater than `floor`.
fn embedded_paths_min_edge(
    w: &Window,
    u: usize,
    v: usize,
    max_len: usize,
    floor: usize,
    cap: usize,
) -> Result<(Vec<WPath>, bool)> {
    let dist_to_v = w.bfs_dist(v);
    let mut out = Vec::new();
    let mut on_path = vec![false; w.vertex_count()];
    let mut path = WPath::single(u);
    on_path[u] = true;
    let mut capped = false;
    dfs_paths_floor(w, v, max_len, floor, cap.max(1), &mut path, &mut on_path, &dist_to_v, &mut out, &mut capped);
    out.sort();
    Ok((out, !capped))
}

#[allow(clippy::too_many_arguments)]
fn dfs_paths_floor(
    w: &Window,
    target: usize,
    max_len: usize,
    floor: usize,
    cap: usize,
    path: &mut WPath,
    on_path: &mut [bool],
    dist_to_v: &[u32],
    out: &mut Vec<WPath>,
    capped: &mut bool,
) {
    if *capped {
        return;
    }
    let cur = path.end();
    if cur == target && path.len() > 0 {
        out.push(path.clone());
        if out.len() >= cap {
            *capped = true;
        }
        return;
    }
    if path.len() >= max_len {
        return;
    }
    let budget = max_len - path.len();
    for &(y, e) in &w.adj[cur] {
        if e <= floor || on_path[y] {
            continue;
        }
        if dist_to_v[y] == u32::MAX || dist_to_v[y] as usize + 1 > budget {
            continue;
        }
        path.verts.push(y);
        path.edges.push(e);
        on_path[y] = true;
        dfs_paths_floor(w, target, max_len, floor, cap, path, on_path, dist_to_v, out, capped);
        on_path[y] = false;
        path.verts.pop();
        path.edges.pop();
    }
}

/// Per-orbit circuit counts through one representative edge each.
#[derive(Clone, Debug)]
pub struct OrbitCounts {
    pub orbit_id: String,
    pub counts: Vec<usize>,
    pub complete: bool,
    pub family: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FinenessVerdict {
    /// Every orbit's counts are certified exact up to the threshold.
    FineUpTo(usize),
    /// Some enumeration was truncated by the valence budget.
    InconclusiveTruncated,
    /// The spec carries peripheral edge families and is not a candidate.
    NotApplicableFamily,
}

#[derive(Clone, Debug)]
pub struct FinenessReport {
    pub n: usize,
    pub per_orbit: Vec<OrbitCounts>,
    pub verdict: FinenessVerdict,
}

/// Fineness certificate: for one representative edge per orbit, the number of
/// circuits of each length up to n. Never claims anything beyond n.
pub fn fineness_certificate(
    spec: &GraphSpec,
    n: usize,
    budget: usize,
    cap: Option<usize>,
) -> Result<FinenessReport> {
    let mut per_orbit = Vec::new();
    let mut any_family = false;
    let mut all_complete = true;
    for (oi, eo) in spec.edge_orbits().iter().enumerate() {
        if eo.family.is_some() {
            any_family = true;
            per_orbit.push(OrbitCounts {
                orbit_id: eo.id.clone(),
                counts: vec![],
                complete: false,
                family: true,
            });
            continue;
        }
        let (u, v) = spec.rep_edge(oi);
        let w = spec.materialize_ball(&u, n.max(1), budget, cap)?;
        let (ui, vi) = (
            w.index_of(&u).expect("center in window"),
            w.index_of(&v).expect("radius >= 1 covers the representative edge"),
        );
        let edge = w
            .edges
            .iter()
            .position(|e| {
                e.key.as_ref().is_some_and(|k| k.orbit == oi)
                    && ((e.a, e.b) == (ui.min(vi), ui.max(vi)))
            })
            .expect("representative edge materialized");
        let cc = circuits_through_edge(&w, edge, n)?;
        all_complete &= cc.complete;
        per_orbit.push(OrbitCounts {
            orbit_id: eo.id.clone(),
            counts: cc.counts,
            complete: cc.complete,
            family: false,
        });
    }
    let verdict = if any_family {
        FinenessVerdict::NotApplicableFamily
    } else if all_complete {
        FinenessVerdict::FineUpTo(n)
    } else {
        FinenessVerdict::InconclusiveTruncated
    };
    Ok(FinenessReport { n, per_orbit, verdict })
}

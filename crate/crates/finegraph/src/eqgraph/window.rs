//! Finite windows: materialized balls of a spec, BFS metrics, and
//! deterministic geodesics.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use super::{EdgeKey, GraphSpec, Vertex};
use crate::error::{Error, Result};

/// A path in a window: vertex indices and the edge indices between them.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct WPath {
    pub verts: Vec<usize>,
    pub edges: Vec<usize>,
}

impl WPath {
    pub fn single(v: usize) -> WPath {
        WPath { verts: vec![v], edges: vec![] }
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn start(&self) -> usize {
        self.verts[0]
    }

    pub fn end(&self) -> usize {
        *self.verts.last().unwrap()
    }

    pub fn reversed(&self) -> WPath {
        WPath {
            verts: self.verts.iter().rev().copied().collect(),
            edges: self.edges.iter().rev().copied().collect(),
        }
    }

    pub fn is_embedded(&self) -> bool {
        let set: BTreeSet<usize> = self.verts.iter().copied().collect();
        set.len() == self.verts.len()
    }

    /// Subpath between vertex positions i <= j.
    pub fn slice(&self, i: usize, j: usize) -> WPath {
        WPath { verts: self.verts[i..=j].to_vec(), edges: self.edges[i..j].to_vec() }
    }
}

/// Materialized edge; `a <= b` as indices except for loops (which do not occur
/// in validated specs).
#[derive(Clone, Debug)]
pub struct WEdge {
    pub a: usize,
    pub b: usize,
    pub key: Option<EdgeKey>,
}

/// A finite materialized ball of a spec (or a bare finite graph).
#[derive(Clone, Debug)]
pub struct Window {
    pub spec: Option<GraphSpec>,
    pub verts: Vec<Vertex>,
    vmap: HashMap<Vertex, usize>,
    pub edges: Vec<WEdge>,
    /// Sorted adjacency: (neighbor vertex index, edge index).
    pub adj: Vec<Vec<(usize, usize)>>,
    pub center: usize,
    pub radius: usize,
    /// True when no enumeration was truncated while expanding the ball, so the
    /// window provably contains every spec edge among its vertices.
    pub complete: bool,
    /// True when no boundary vertex has a neighbor outside the window: the
    /// window is a whole component and bounded enumerations on it are exact.
    pub saturated: bool,
}

impl GraphSpec {
    /// Materialize the ball of the given radius around `center`. `budget`
    /// bounds enumeration at infinite-valence incidences, `cap` bounds the
    /// total vertex count; exceeding either clears the completeness flag.
    pub fn materialize_ball(
        &self,
        center: &Vertex,
        radius: usize,
        budget: usize,
        cap: Option<usize>,
    ) -> Result<Window> {
        let cap = cap.unwrap_or(250_000);
        let mut dist: HashMap<Vertex, usize> = HashMap::from([(center.clone(), 0)]);
        let mut queue: VecDeque<Vertex> = VecDeque::from([center.clone()]);
        let mut edges: BTreeMap<EdgeKey, (Vertex, Vertex)> = BTreeMap::new();
        let mut complete = true;
        let mut saturated = true;
        while let Some(v) = queue.pop_front() {
            let dv = dist[&v];
            let ns = self.neighbors(&v, Some(budget))?;
            complete &= !ns.truncated;
            saturated &= !ns.truncated;
            for (key, u) in ns.edges {
                let du = dist.get(&u).copied();
                if du.is_none() && dv < radius {
                    if dist.len() >= cap {
                        complete = false;
                        saturated = false;
                        continue;
                    }
                    dist.insert(u.clone(), dv + 1);
                    queue.push_back(u.clone());
                }
                let inside = dist.contains_key(&u);
                if inside {
                    let (x, y) = if v <= u { (v.clone(), u.clone()) } else { (u.clone(), v.clone()) };
                    edges.insert(key, (x, y));
                } else {
                    saturated = false;
                }
            }
        }
        let mut verts: Vec<Vertex> = dist.keys().cloned().collect();
        verts.sort();
        let vmap: HashMap<Vertex, usize> =
            verts.iter().enumerate().map(|(i, v)| (v.clone(), i)).collect();
        // Edges discovered from a boundary vertex may point outside the ball.
        let wedges: Vec<WEdge> = edges
            .into_iter()
            .filter_map(|(key, (x, y))| {
                match (vmap.get(&x), vmap.get(&y)) {
                    (Some(&a), Some(&b)) => Some(WEdge { a, b, key: Some(key) }),
                    _ => None,
                }
            })
            .collect();
        let center_idx = vmap[center];
        Ok(Window::assemble(
            Some(self.clone()),
            verts,
            vmap,
            wedges,
            center_idx,
            radius,
            complete,
            saturated,
        ))
    }
}

impl Window {
    #[allow(clippy::too_many_arguments)]
    fn assemble(
        spec: Option<GraphSpec>,
        verts: Vec<Vertex>,
        vmap: HashMap<Vertex, usize>,
        mut edges: Vec<WEdge>,
        center: usize,
        radius: usize,
        complete: bool,
        saturated: bool,
    ) -> Window {
        edges.sort_by(|e, f| (e.a, e.b, &e.key).cmp(&(f.a, f.b, &f.key)));
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); verts.len()];
        for (ei, e) in edges.iter().enumerate() {
            adj[e.a].push((e.b, ei));
            adj[e.b].push((e.a, ei));
        }
        for row in &mut adj {
            row.sort();
        }
        Window { spec, verts, vmap, edges, adj, center, radius, complete, saturated }
    }

    /// A bare finite graph as a window, all components included.
    pub fn from_edges(n_vertices: usize, edge_list: &[(usize, usize)]) -> Window {
        let spec = GraphSpec::from_finite_graph("finite", n_vertices, edge_list);
        let verts: Vec<Vertex> = (0..n_vertices).map(|i| spec.base_vertex(i)).collect();
        let vmap: HashMap<Vertex, usize> =
            verts.iter().enumerate().map(|(i, v)| (v.clone(), i)).collect();
        let edges: Vec<WEdge> = edge_list
            .iter()
            .enumerate()
            .map(|(k, &(u, v))| WEdge {
                a: u.min(v),
                b: u.max(v),
                key: Some(EdgeKey { orbit: k, rep: spec.oracle().identity(), offset: None }),
            })
            .collect();
        let radius = n_vertices + edge_list.len();
        Window::assemble(Some(spec), verts, vmap, edges, 0, radius, true, true)
    }

    pub fn vertex_count(&self) -> usize {
        self.verts.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn index_of(&self, v: &Vertex) -> Option<usize> {
        self.vmap.get(v).copied()
    }

    pub fn token(&self, idx: usize) -> String {
        match &self.spec {
            Some(s) => s.vertex_token(&self.verts[idx]),
            None => format!("{idx}"),
        }
    }

    /// Parse a vertex token and locate it in the window.
    pub fn locate(&self, token: &str) -> Result<usize> {
        let spec = self
            .spec
            .as_ref()
            .ok_or_else(|| Error::BadInput("window has no spec".into()))?;
        let v = spec.parse_vertex(token)?;
        self.index_of(&v).ok_or_else(|| Error::NotInWindow(token.to_string()))
    }

    pub fn bfs_dist(&self, src: usize) -> Vec<u32> {
        let mut dist = vec![u32::MAX; self.verts.len()];
        dist[src] = 0;
        let mut queue = VecDeque::from([src]);
        while let Some(x) = queue.pop_front() {
            for &(y, _) in &self.adj[x] {
                if dist[y] == u32::MAX {
                    dist[y] = dist[x] + 1;
                    queue.push_back(y);
                }
            }
        }
        dist
    }

    pub fn dist(&self, u: usize, v: usize) -> Option<usize> {
        let d = self.bfs_dist(u)[v];
        (d != u32::MAX).then_some(d as usize)
    }

    pub fn component_sizes(&self, u: usize, v: usize) -> (usize, usize) {
        let du = self.bfs_dist(u);
        let dv = self.bfs_dist(v);
        (
            du.iter().filter(|&&d| d != u32::MAX).count(),
            dv.iter().filter(|&&d| d != u32::MAX).count(),
        )
    }

    pub fn is_connected(&self) -> bool {
        if self.verts.is_empty() {
            return true;
        }
        self.bfs_dist(0).iter().all(|&d| d != u32::MAX)
    }

    /// The lexicographically least shortest path from u to v: at each step the
    /// smallest-indexed eligible neighbor (vertex index order is canonical
    /// label order), smallest edge index among parallels.
    pub fn geodesic(&self, u: usize, v: usize) -> Result<WPath> {
        if u == v {
            return Ok(WPath::single(u));
        }
        let dist_to_v = self.bfs_dist(v);
        if dist_to_v[u] == u32::MAX {
            let (a, b) = self.component_sizes(u, v);
            return Err(Error::Disconnected(a, b));
        }
        let mut path = WPath::single(u);
        let mut cur = u;
        while cur != v {
            let d = dist_to_v[cur];
            let (next, edge) = self.adj[cur]
                .iter()
                .find(|&&(y, _)| dist_to_v[y] == d - 1)
                .copied()
                .expect("bfs distance admits a descent");
            path.verts.push(next);
            path.edges.push(edge);
            cur = next;
        }
        Ok(path)
    }

    /// All geodesics from u to v in deterministic order, capped; the flag
    /// reports whether the enumeration is exhaustive.
    pub fn all_geodesics(&self, u: usize, v: usize, cap: usize) -> Result<(Vec<WPath>, bool)> {
        if u == v {
            return Ok((vec![WPath::single(u)], true));
        }
        let dist_to_v = self.bfs_dist(v);
        if dist_to_v[u] == u32::MAX {
            let (a, b) = self.component_sizes(u, v);
            return Err(Error::Disconnected(a, b));
        }
        let mut out = Vec::new();
        let mut complete = true;
        let mut stack = vec![WPath::single(u)];
        while let Some(p) = stack.pop() {
            let cur = p.end();
            if cur == v {
                out.push(p);
                if out.len() > cap {
                    complete = false;
                    break;
                }
                continue;
            }
            let d = dist_to_v[cur];
            // Reverse order so the lexicographically least extension pops first.
            for &(y, e) in self.adj[cur].iter().rev() {
                if dist_to_v[y] == d - 1 {
                    let mut q = p.clone();
                    q.verts.push(y);
                    q.edges.push(e);
                    stack.push(q);
                }
            }
        }
        out.sort();
        if !complete {
            out.truncate(cap);
        }
        Ok((out, complete))
    }

    /// Induced sub-window on a vertex subset (all edges among them).
    pub fn induced(&self, keep: &BTreeSet<usize>) -> Window {
        self.induced_with_edges(keep, None)
    }

    /// Induced sub-window, optionally restricted to an edge subset.
    pub fn induced_with_edges(
        &self,
        keep: &BTreeSet<usize>,
        keep_edges: Option<&BTreeSet<usize>>,
    ) -> Window {
        let verts: Vec<Vertex> = keep.iter().map(|&i| self.verts[i].clone()).collect();
        let vmap: HashMap<Vertex, usize> =
            verts.iter().enumerate().map(|(i, v)| (v.clone(), i)).collect();
        let old_to_new: BTreeMap<usize, usize> =
            keep.iter().enumerate().map(|(new, &old)| (old, new)).collect();
        let edges: Vec<WEdge> = self
            .edges
            .iter()
            .enumerate()
            .filter(|(ei, e)| {
                keep.contains(&e.a)
                    && keep.contains(&e.b)
                    && keep_edges.is_none_or(|ke| ke.contains(ei))
            })
            .map(|(_, e)| WEdge { a: old_to_new[&e.a], b: old_to_new[&e.b], key: e.key.clone() })
            .collect();
        let center = old_to_new.get(&self.center).copied().unwrap_or(0);
        Window::assemble(
            self.spec.clone(),
            verts,
            vmap,
            edges,
            center,
            self.radius,
            self.complete,
            false,
        )
    }

    /// Translate a window path into the vertex labels it visits.
    pub fn path_vertices(&self, p: &WPath) -> Vec<Vertex> {
        p.verts.iter().map(|&i| self.verts[i].clone()).collect()
    }

    /// Locate a labelled path in this window.
    pub fn embed_path(&self, verts: &[Vertex]) -> Result<WPath> {
        let mut idx = Vec::with_capacity(verts.len());
        for v in verts {
            let i = self.index_of(v).ok_or_else(|| {
                Error::NotInWindow(match &self.spec {
                    Some(s) => s.vertex_token(v),
                    None => format!("{v:?}"),
                })
            })?;
            idx.push(i);
        }
        let mut edges = Vec::new();
        for w in idx.windows(2) {
            let (a, b) = (w[0], w[1]);
            let e = self.adj[a]
                .iter()
                .find(|&&(y, _)| y == b)
                .map(|&(_, e)| e)
                .ok_or_else(|| Error::BadInput(format!(
                    "consecutive path vertices {} and {} are not adjacent",
                    self.token(a),
                    self.token(b)
                )))?;
            edges.push(e);
        }
        Ok(WPath { verts: idx, edges })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn ball_radius_zero() {
        let h = fixtures::hexagon();
        let w = h.materialize_ball(&h.base_vertex(0), 0, 4, None).unwrap();
        assert_eq!(w.vertex_count(), 1);
        assert_eq!(w.edge_count(), 0);
    }

    #[test]
    fn hexagon_full_window() {
        let h = fixtures::hexagon();
        let w = h.materialize_ball(&h.base_vertex(0), 3, 4, None).unwrap();
        assert_eq!(w.vertex_count(), 6);
        assert_eq!(w.edge_count(), 6);
        assert!(w.complete);
    }

    #[test]
    fn bass_serre_ball_two() {
        // Count verified against direct coset enumeration: center 1<s> has 2
        // neighbors (t-cosets), each t-coset has 2 further s-coset neighbors.
        let t = fixtures::bass_serre_z2_z3();
        let w = t.materialize_ball(&t.base_vertex(0), 2, 8, None).unwrap();
        assert_eq!(w.vertex_count(), 7);
        assert_eq!(w.edge_count(), 6);
        assert!(w.complete);
    }

    #[test]
    fn geodesic_trivial_and_tree() {
        let t = fixtures::bass_serre_z2_z3();
        let w = t.materialize_ball(&t.base_vertex(0), 3, 8, None).unwrap();
        let u = w.index_of(&t.base_vertex(0)).unwrap();
        assert_eq!(w.geodesic(u, u).unwrap(), WPath::single(u));
        // Tree geodesics are unique regardless of tie-break.
        for v in 0..w.vertex_count() {
            let (all, complete) = w.all_geodesics(u, v, 100).unwrap();
            assert!(complete);
            assert_eq!(all.len(), 1);
            assert_eq!(all[0], w.geodesic(u, v).unwrap());
        }
    }

    #[test]
    fn hexagon_antipodal_tie_break() {
        let h = fixtures::hexagon();
        let w = h.materialize_ball(&h.base_vertex(0), 3, 4, None).unwrap();
        let u = w.locate("g:0").unwrap();
        let v = w.locate("g:3").unwrap();
        let p = w.geodesic(u, v).unwrap();
        assert_eq!(p.len(), 3);
        let tokens: Vec<String> = p.verts.iter().map(|&i| w.token(i)).collect();
        assert_eq!(tokens, vec!["g:0", "g:1", "g:2", "g:3"],
            "lexicographically least of the two arcs");
        let (all, _) = w.all_geodesics(u, v, 10).unwrap();
        assert_eq!(all.len(), 2);
    }

    #[test]
    fn disconnected_reports_component_sizes() {
        let w = Window::from_edges(5, &[(0, 1), (2, 3), (3, 4)]);
        let err = w.geodesic(0, 2).unwrap_err();
        assert!(matches!(err, crate::Error::Disconnected(2, 3)));
    }
}

//! Equivariant graph surgery: arc attachments, edge and vertex orbit
//! removals, the finite-hull iteration for single-edge attachments, and the
//! joint embedding of two candidate graphs over the same peripheral data.
//!
//! Surgery is functional: input specs are immutable, outputs are fresh specs.

use std::collections::{BTreeMap, BTreeSet};

use crate::eqgraph::{
    embedded_paths, EdgeLabel, EdgeOrbit, GraphSpec, Vertex, VertexOrbit, Window,
};
use crate::error::{Error, Result};
use crate::group::{GroupElement, GroupOracle, SubgroupHandle};

/// An arc to attach: a chain of `interior` fresh vertices between `end0` and
/// `end1`, or a pendant chain when `end1` is absent.
#[derive(Clone, Debug)]
pub struct ArcSpec {
    pub id: String,
    pub end0: Vertex,
    pub end1: Option<Vertex>,
    pub interior: usize,
}

impl ArcSpec {
    /// A single new edge between two existing vertices.
    pub fn chord(id: &str, end0: Vertex, end1: Vertex) -> ArcSpec {
        ArcSpec { id: id.to_string(), end0, end1: Some(end1), interior: 0 }
    }

    pub fn arc_len(&self) -> usize {
        self.interior + 1
    }
}

/// Result of an equivariant arc attachment.
#[derive(Clone)]
pub struct Attachment {
    pub spec: GraphSpec,
    /// Length of the base geodesic joining the arc endpoints; the recorded
    /// quasi-isometry factor dist_base <= factor * dist_new. Pendant arcs
    /// embed isometrically (factor 1).
    pub qi_factor: usize,
    pub base_path: Option<Vec<Vertex>>,
    pub new_vertex_orbits: Vec<usize>,
    pub new_edge_orbits: Vec<usize>,
}

/// Geodesic between two spec vertices, found by growing windows.
pub fn spec_geodesic(
    spec: &GraphSpec,
    u: &Vertex,
    v: &Vertex,
    budget: usize,
    max_radius: usize,
) -> Result<Vec<Vertex>> {
    let mut r = 1;
    loop {
        let w = spec.materialize_ball(u, r, budget, None)?;
        if let (Some(ui), Some(vi)) = (w.index_of(u), w.index_of(v)) {
            if let Some(d) = w.dist(ui, vi) {
                if d <= r {
                    let p = w.geodesic(ui, vi)?;
                    return Ok(w.path_vertices(&p));
                }
            }
        }
        if r >= max_radius {
            return Err(Error::WindowExhausted(format!(
                "no geodesic between {} and {} within radius {max_radius}",
                spec.vertex_token(u),
                spec.vertex_token(v)
            )));
        }
        r = (r * 2).min(max_radius);
    }
}

/// Attach the G-orbit of an arc to the spec. At least `end0` must exist in
/// the base; interior vertices are fresh orbits with trivial stabilizer.
pub fn attach_arc(base: &GraphSpec, arc: &ArcSpec, budget: usize) -> Result<Attachment> {
    let oracle = base.oracle().clone();
    let mut vo: Vec<VertexOrbit> = base.vertex_orbits().to_vec();
    let mut eo: Vec<EdgeOrbit> = base.edge_orbits().to_vec();
    let mut new_vertex_orbits = Vec::new();
    let mut new_edge_orbits = Vec::new();

    let n_new = match arc.end1 {
        Some(_) => arc.interior,
        None => arc.interior + 1,
    };
    let first_new = vo.len();
    for k in 0..n_new {
        new_vertex_orbits.push(vo.len());
        vo.push(VertexOrbit {
            id: format!("{}_v{k}", arc.id),
            stabilizer: SubgroupHandle::trivial(&oracle),
        });
    }

    // Chain endpoints in order: end0, new vertices, then end1 if present.
    let mut chain: Vec<(usize, GroupElement)> = vec![(arc.end0.orbit, arc.end0.coset.clone())];
    for k in 0..n_new {
        chain.push((first_new + k, oracle.identity()));
    }
    if let Some(e1) = &arc.end1 {
        chain.push((e1.orbit, e1.coset.clone()));
    }
    for (k, pair) in chain.windows(2).enumerate() {
        new_edge_orbits.push(eo.len());
        eo.push(EdgeOrbit {
            id: format!("{}_e{k}", arc.id),
            ep0: pair[0].clone(),
            ep1: pair[1].clone(),
            stabilizer: SubgroupHandle::trivial(&oracle),
            flip: None,
            family: None,
            label: EdgeLabel::Plain,
        });
    }

    let spec = GraphSpec::new(
        &format!("{}+{}", base.name(), arc.id),
        oracle,
        vo,
        eo,
        base.cone_orbits().to_vec(),
    )?;

    let (qi_factor, base_path) = match &arc.end1 {
        Some(e1) => {
            let p = spec_geodesic(base, &arc.end0, e1, budget, 64)?;
            (p.len().saturating_sub(1).max(1), Some(p))
        }
        None => (1, None),
    };
    Ok(Attachment { spec, qi_factor, base_path, new_vertex_orbits, new_edge_orbits })
}

/// Exhaustive window check of the attachment bound
/// dist_base(u,v) <= qi_factor * dist_new(u,v).
#[derive(Clone, Debug)]
pub struct BoundReport {
    pub factor: usize,
    pub ok: bool,
    pub pairs_checked: usize,
    pub worst_ratio: f64,
    pub witness: Option<(String, String)>,
}

pub fn verify_attachment_bound(
    base: &GraphSpec,
    att: &Attachment,
    center: &Vertex,
    radius: usize,
    budget: usize,
) -> Result<BoundReport> {
    let wb = base.materialize_ball(center, 2 * radius, budget, None)?;
    let wn = att.spec.materialize_ball(center, 2 * radius, budget, None)?;
    let cb = wb.index_of(center).expect("center");
    let inner: Vec<usize> = {
        let d = wb.bfs_dist(cb);
        (0..wb.vertex_count()).filter(|&i| d[i] as usize <= radius).collect()
    };
    let mut worst = 0.0f64;
    let mut witness = None;
    let mut pairs = 0usize;
    for (pi, &i) in inner.iter().enumerate() {
        let db = wb.bfs_dist(i);
        let ni = wn.index_of(&wb.verts[i]).expect("base vertex survives attachment");
        let dn = wn.bfs_dist(ni);
        for &j in inner.iter().skip(pi + 1) {
            let dist_b = db[j] as usize;
            let nj = wn.index_of(&wb.verts[j]).expect("base vertex survives attachment");
            let dist_n = dn[nj] as usize;
            pairs += 1;
            let ratio = dist_b as f64 / dist_n.max(1) as f64;
            if ratio > worst {
                worst = ratio;
                witness = Some((wb.token(i), wb.token(j)));
            }
            if dist_b > att.qi_factor * dist_n {
                return Ok(BoundReport {
                    factor: att.qi_factor,
                    ok: false,
                    pairs_checked: pairs,
                    worst_ratio: ratio,
                    witness: Some((wb.token(i), wb.token(j))),
                });
            }
        }
    }
    Ok(BoundReport { factor: att.qi_factor, ok: true, pairs_checked: pairs, worst_ratio: worst, witness })
}

/// Result of an orbit removal.
#[derive(Clone, Debug)]
pub struct Removal {
    pub spec: GraphSpec,
    /// Length of a surviving replacement path for a removed representative
    /// edge; the window distortion bound dist_new <= M * dist_old.
    pub replacement_len: usize,
    pub distortion: f64,
}

/// Remove an edge orbit (interiors of all translates). Connectivity is
/// checked on a validation window around the removed edge's endpoints.
pub fn remove_edge_orbit(
    spec: &GraphSpec,
    orbit_id: &str,
    radius: usize,
    budget: usize,
) -> Result<Removal> {
    let oi = spec.edge_orbit_index(orbit_id)?;
    let (u, v) = spec.rep_edge(oi);
    let eo: Vec<EdgeOrbit> = spec
        .edge_orbits()
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != oi)
        .map(|(_, e)| e.clone())
        .collect();
    let new_spec = GraphSpec::new(
        &format!("{}-{}", spec.name(), orbit_id),
        spec.oracle().clone(),
        spec.vertex_orbits().to_vec(),
        eo,
        spec.cone_orbits().to_vec(),
    )?;
    finish_removal(spec, new_spec, &u, &v, radius, budget)
}

/// Remove a vertex orbit together with all incident edge orbits. The orbit
/// must have finite valence (finite stabilizer).
pub fn remove_vertex_orbit(
    spec: &GraphSpec,
    orbit_id: &str,
    radius: usize,
    budget: usize,
) -> Result<Removal> {
    let vi = spec.vertex_orbit_index(orbit_id)?;
    if spec.vertex_orbits()[vi].stabilizer.order().is_none() {
        return Err(Error::BadInput(format!(
            "vertex orbit '{orbit_id}' has infinite valence; removal requires finite valence"
        )));
    }
    // A witness pair that must stay connected: endpoints of some surviving
    // edge adjacent to the removed star, else any surviving vertex with itself.
    let vo: Vec<VertexOrbit> = spec
        .vertex_orbits()
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != vi)
        .map(|(_, o)| o.clone())
        .collect();
    let remap = |i: usize| if i > vi { i - 1 } else { i };
    let eo: Vec<EdgeOrbit> = spec
        .edge_orbits()
        .iter()
        .filter(|e| e.ep0.0 != vi && e.ep1.0 != vi)
        .map(|e| {
            let mut e = e.clone();
            e.ep0.0 = remap(e.ep0.0);
            e.ep1.0 = remap(e.ep1.0);
            e
        })
        .collect();
    if vo.is_empty() || eo.is_empty() {
        return Err(Error::RemovalDisconnects(
            orbit_id.to_string(),
            "all".into(),
            "cells removed".into(),
        ));
    }
    let cones: Vec<usize> =
        spec.cone_orbits().iter().filter(|&&c| c != vi).map(|&c| remap(c)).collect();
    let new_spec = GraphSpec::new(
        &format!("{}-{}", spec.name(), orbit_id),
        spec.oracle().clone(),
        vo,
        eo,
        cones,
    )?;
    let (u, v) = new_spec.rep_edge(0);
    finish_removal(spec, new_spec, &u, &v, radius, budget)
}

fn finish_removal(
    old: &GraphSpec,
    new_spec: GraphSpec,
    u: &Vertex,
    v: &Vertex,
    radius: usize,
    budget: usize,
) -> Result<Removal> {
    // Locate u in the new spec (its orbit may have shifted); tokens match.
    let u_new = new_spec.parse_vertex(&old.vertex_token(u)).or_else(|_| {
        new_spec.parse_vertex(&new_spec.vertex_token(&new_spec.base_vertex(0)))
    })?;
    let wn = new_spec.materialize_ball(&u_new, 2 * radius, budget, None)?;
    let wo = old.materialize_ball(u, 2 * radius, budget, None)?;
    let disconnect = |a: String, b: String| {
        Error::RemovalDisconnects(new_spec.name().to_string(), a, b)
    };
    // A surviving old vertex must reappear within the validation window.
    let locate = |x: &Vertex| -> Result<Option<usize>> {
        match new_spec.parse_vertex(&old.vertex_token(x)) {
            Ok(xx) => match wn.index_of(&xx) {
                Some(i) => Ok(Some(i)),
                None => Err(disconnect(old.vertex_token(u), old.vertex_token(x))),
            },
            Err(_) => Ok(None), // the vertex orbit itself was removed
        }
    };
    let ui = wn.index_of(&u_new).expect("center of the validation window");
    // Replacement length: surviving distance across the removed cell.
    let replacement_len = match locate(v)? {
        Some(vi2) => wn.dist(ui, vi2).ok_or_else(|| {
            disconnect(old.vertex_token(u), old.vertex_token(v))
        })?,
        None => 0,
    };
    // Window distortion: new distances against old, over the inner ball.
    let co = wo.index_of(u).expect("center");
    let dc = wo.bfs_dist(co);
    let inner: Vec<usize> =
        (0..wo.vertex_count()).filter(|&i| dc[i] as usize <= radius).collect();
    let mut distortion = 1.0f64;
    for (pi, &i) in inner.iter().enumerate() {
        let Some(ni) = locate(&wo.verts[i])? else { continue };
        let do_ = wo.bfs_dist(i);
        let dn = wn.bfs_dist(ni);
        for &j in inner.iter().skip(pi + 1) {
            let Some(nj) = locate(&wo.verts[j])? else { continue };
            if dn[nj] == u32::MAX {
                return Err(disconnect(wo.token(i), wo.token(j)));
            }
            let r = dn[nj] as f64 / (do_[j] as f64).max(1.0);
            distortion = distortion.max(r);
        }
    }
    Ok(Removal { spec: new_spec, replacement_len, distortion })
}

/// The finite subgraph C(u, v, n) for a single-edge attachment, built by
/// iterating an (n|P0|)-hull followed by a P0-inclusion, n times.
#[derive(Clone)]
pub struct HullResult {
    pub u: Vertex,
    pub v: Vertex,
    pub n: usize,
    pub base_path: Vec<Vertex>,
    pub vertices: BTreeSet<Vertex>,
    /// (size after hull step, size after inclusion step) per iteration.
    pub trace: Vec<(usize, usize)>,
    pub complete: bool,
}

pub fn hull(
    base: &GraphSpec,
    att: &Attachment,
    u: &Vertex,
    v: &Vertex,
    n: usize,
    budget: usize,
) -> Result<HullResult> {
    let p0 = att
        .base_path
        .clone()
        .ok_or_else(|| Error::BadInput("hull requires an attachment with both endpoints".into()))?;
    let p0_len = p0.len() - 1;
    let reach = n * p0_len + p0_len + 2;
    // One window covers the whole iteration: C grows by at most `reach` per
    // round plus the attached edge's jump between u and v.
    let span = 2 + spec_geodesic(base, u, v, budget, 64)?.len();
    let radius = (n + 1) * reach + span;
    let w = base.materialize_ball(u, radius, budget, Some(200_000))?;
    let complete_window = w.complete;

    let need = |vert: &Vertex, w: &Window| -> Result<usize> {
        w.index_of(vert)
            .ok_or_else(|| Error::WindowExhausted(base.vertex_token(vert)))
    };
    let ui = need(u, &w)?;
    let vi = need(v, &w)?;
    let p0_idx: Vec<usize> = p0.iter().map(|x| need(x, &w)).collect::<Result<_>>()?;

    let mut c_verts: BTreeSet<usize> = BTreeSet::from([ui, vi]);
    let mut c_edges: BTreeSet<usize> = BTreeSet::new();
    let mut trace = Vec::new();
    let hull_len = n * p0_len;
    for _ in 0..n {
        // n|P0|-hull: all embedded paths of length <= n|P0| between distinct
        // vertices already in C.
        let snapshot: Vec<usize> = c_verts.iter().copied().collect();
        for (ai, &a) in snapshot.iter().enumerate() {
            for &b in snapshot.iter().skip(ai + 1) {
                let (paths, _) = embedded_paths(&w, a, b, hull_len, None, None)?;
                for p in paths {
                    c_verts.extend(p.verts.iter().copied());
                    c_edges.extend(p.edges.iter().copied());
                }
            }
        }
        let after_hull = c_verts.len();
        // P0-inclusion: add every translate of P0 sharing an edge with C.
        let mut to_add: BTreeSet<GroupElement> = BTreeSet::new();
        for &ei in &c_edges {
            let e = &w.edges[ei];
            let ekey = e.key.as_ref().expect("spec window");
            for k in 0..p0_len {
                let (fx, fy) = (&w.verts[p0_idx[k]], &w.verts[p0_idx[k + 1]]);
                for (x, y) in [(e.a, e.b), (e.b, e.a)] {
                    let (vx, vy) = (&w.verts[x], &w.verts[y]);
                    if vx.orbit != fx.orbit || vy.orbit != fy.orbit {
                        continue;
                    }
                    // Solve g * fx = vx, g * fy = vy over the fx-stabilizer.
                    let stab = &base.vertex_orbits()[fx.orbit].stabilizer;
                    let (ss, _) = stab.enumerate(budget.max(8));
                    let o = base.oracle();
                    for s in ss {
                        let g = o.multiply(&o.multiply(&vx.coset, &s), &o.invert(&fx.coset));
                        if &base.translate(&g, fx) == vx && &base.translate(&g, fy) == vy {
                            // Same orbit check via the window edge between them.
                            let _ = ekey;
                            to_add.insert(g);
                        }
                    }
                }
            }
        }
        let mut boundary_hit = false;
        for g in to_add {
            let imgs: Vec<Option<usize>> =
                p0.iter().map(|x| w.index_of(&base.translate(&g, x))).collect();
            if imgs.iter().any(|i| i.is_none()) {
                boundary_hit = true;
                continue;
            }
            let idxs: Vec<usize> = imgs.into_iter().map(|i| i.unwrap()).collect();
            c_verts.extend(idxs.iter().copied());
            for pair in idxs.windows(2) {
                if let Some(&(_, e)) =
                    w.adj[pair[0]].iter().find(|&&(y, _)| y == pair[1])
                {
                    c_edges.insert(e);
                }
            }
        }
        if boundary_hit {
            return Err(Error::WindowExhausted(
                "hull translate left the working window".into(),
            ));
        }
        trace.push((after_hull, c_verts.len()));
    }
    Ok(HullResult {
        u: u.clone(),
        v: v.clone(),
        n,
        base_path: p0,
        vertices: c_verts.iter().map(|&i| w.verts[i].clone()).collect(),
        trace,
        complete: complete_window,
    })
}

/// Check the hull postcondition against the embedded-path oracle in the
/// attached spec: every embedded path of length <= n between u and v has all
/// vertices inside C. Returns the number of paths checked.
pub fn verify_hull_containment(
    att: &Attachment,
    h: &HullResult,
    budget: usize,
) -> Result<usize> {
    let w = att.spec.materialize_ball(&h.u, h.n + 1, budget, None)?;
    let ui = w.index_of(&h.u).expect("u");
    let Some(vi) = w.index_of(&h.v) else {
        return Ok(0);
    };
    if h.n == 0 {
        return Ok(0);
    }
    let (paths, _) = embedded_paths(&w, ui, vi, h.n, None, None)?;
    let count = paths.len();
    for p in paths {
        for &x in &p.verts {
            if !h.vertices.contains(&w.verts[x]) {
                return Err(Error::BadWitness(format!(
                    "hull misses path vertex {}",
                    w.token(x)
                )));
            }
        }
    }
    Ok(count)
}

/// Orbit-level embedding maps of a joint embedding.
#[derive(Clone, Debug)]
pub struct OrbitMap {
    pub vertex: Vec<usize>,
    pub edge: Vec<usize>,
}

#[derive(Clone)]
pub struct JointEmbedding {
    pub spec: GraphSpec,
    pub map1: OrbitMap,
    pub map2: OrbitMap,
    /// (peripheral index, chosen orbit in spec1, chosen orbit in spec2).
    pub glued: Vec<(usize, usize, usize)>,
}

fn eligible_orbit(spec: &GraphSpec, p: &SubgroupHandle) -> Option<usize> {
    // Lexicographically least orbit id among those with the right stabilizer.
    spec.vertex_orbits()
        .iter()
        .enumerate()
        .filter(|(_, vo)| &vo.stabilizer == p)
        .min_by(|(_, a), (_, b)| a.id.cmp(&b.id))
        .map(|(i, _)| i)
}

/// Glue two candidate graphs along their peripheral vertex orbits: the
/// G-translates of the chosen stabilizer-P vertices are identified pairwise.
pub fn joint_embedding(
    spec1: &GraphSpec,
    spec2: &GraphSpec,
    peripherals: &[SubgroupHandle],
) -> Result<JointEmbedding> {
    if spec1.oracle() != spec2.oracle() {
        return Err(Error::BackendMismatch(
            spec1.oracle().name().to_string(),
            spec2.oracle().name().to_string(),
        ));
    }
    let oracle = spec1.oracle().clone();
    let mut glued = Vec::new();
    let mut glue2to1: BTreeMap<usize, usize> = BTreeMap::new();
    for (pi, p) in peripherals.iter().enumerate() {
        let o1 = eligible_orbit(spec1, p).ok_or_else(|| {
            Error::MissingPeripheralVertex(p.label().to_string(), spec1.name().to_string())
        })?;
        let o2 = eligible_orbit(spec2, p).ok_or_else(|| {
            Error::MissingPeripheralVertex(p.label().to_string(), spec2.name().to_string())
        })?;
        glued.push((pi, o1, o2));
        glue2to1.insert(o2, o1);
    }

    let used_ids: BTreeSet<String> =
        spec1.vertex_orbits().iter().map(|v| v.id.clone()).collect();
    let mut vo: Vec<VertexOrbit> = spec1.vertex_orbits().to_vec();
    let map1 = OrbitMap {
        vertex: (0..vo.len()).collect(),
        edge: (0..spec1.edge_orbits().len()).collect(),
    };
    let mut v2map: Vec<usize> = Vec::new();
    for (i, o) in spec2.vertex_orbits().iter().enumerate() {
        if let Some(&tgt) = glue2to1.get(&i) {
            v2map.push(tgt);
        } else {
            v2map.push(vo.len());
            let mut o = o.clone();
            if used_ids.contains(&o.id) {
                o.id = format!("{}#2", o.id);
            }
            vo.push(o);
        }
    }
    let eids: BTreeSet<String> = spec1.edge_orbits().iter().map(|e| e.id.clone()).collect();
    let mut eo: Vec<EdgeOrbit> = spec1.edge_orbits().to_vec();
    let mut e2map = Vec::new();
    for e in spec2.edge_orbits() {
        let mut e = e.clone();
        e.ep0.0 = v2map[e.ep0.0];
        e.ep1.0 = v2map[e.ep1.0];
        if eids.contains(&e.id) {
            e.id = format!("{}#2", e.id);
        }
        e2map.push(eo.len());
        eo.push(e);
    }
    let mut cones: Vec<usize> = spec1.cone_orbits().to_vec();
    for &c in spec2.cone_orbits() {
        let m = v2map[c];
        if !cones.contains(&m) {
            cones.push(m);
        }
    }
    let spec = GraphSpec::new(
        &format!("{}(+){}", spec1.name(), spec2.name()),
        oracle,
        vo,
        eo,
        cones,
    )?;
    Ok(JointEmbedding { spec, map1, map2: OrbitMap { vertex: v2map, edge: e2map }, glued })
}

/// The coned-off joint: triangles around one edge orbit to create a free
/// orbit identified with G, an edge orbit per S-generator pair on it, and an
/// edge orbit from it to a stabilizer-P vertex per peripheral. The result
/// contains the base spec and the coned-off Cayley graph equivariantly.
#[derive(Clone)]
pub struct ConedJoint {
    pub spec: GraphSpec,
    pub top_orbit: usize,
    /// Per peripheral: the vertex orbit playing the cone.
    pub cone_orbits: Vec<usize>,
}

pub fn build_coned_joint(
    base: &GraphSpec,
    s_gens: &[(String, GroupElement)],
    peripherals: &[SubgroupHandle],
) -> Result<ConedJoint> {
    if base.edge_orbits().is_empty() {
        return Err(Error::BadInput("coned joint needs at least one edge orbit".into()));
    }
    let oracle: GroupOracle = base.oracle().clone();
    let mut vo = base.vertex_orbits().to_vec();
    let mut eo = base.edge_orbits().to_vec();
    // Triangle around the lexicographically least edge orbit; G acts freely
    // on the triangle tops, which realize the Cayley vertex set.
    let tri = base
        .edge_orbits()
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.id.cmp(&b.id))
        .map(|(i, _)| i)
        .unwrap();
    let top_orbit = vo.len();
    vo.push(VertexOrbit { id: "top".into(), stabilizer: SubgroupHandle::trivial(&oracle) });
    let (e0, e1) = (eo[tri].ep0.clone(), eo[tri].ep1.clone());
    eo.push(EdgeOrbit {
        id: "tri0".into(),
        ep0: e0,
        ep1: (top_orbit, oracle.identity()),
        stabilizer: SubgroupHandle::trivial(&oracle),
        flip: None,
        family: None,
        label: EdgeLabel::Plain,
    });
    eo.push(EdgeOrbit {
        id: "tri1".into(),
        ep0: (top_orbit, oracle.identity()),
        ep1: e1,
        stabilizer: SubgroupHandle::trivial(&oracle),
        flip: None,
        family: None,
        label: EdgeLabel::Plain,
    });
    // One edge orbit per generator pair on the top orbit.
    let mut used: BTreeSet<GroupElement> = BTreeSet::new();
    for (label, s) in s_gens {
        if used.contains(s) {
            continue;
        }
        let s_inv = oracle.invert(s);
        used.insert(s.clone());
        used.insert(s_inv.clone());
        let (stab, flip) = if s_inv == *s {
            (SubgroupHandle::finite_generated(&oracle, std::slice::from_ref(s), label)?, Some(s.clone()))
        } else {
            (SubgroupHandle::trivial(&oracle), None)
        };
        eo.push(EdgeOrbit {
            id: format!("top_{label}"),
            ep0: (top_orbit, oracle.identity()),
            ep1: (top_orbit, s.clone()),
            stabilizer: stab,
            flip,
            family: None,
            label: EdgeLabel::Gen(label.clone()),
        });
    }
    // One parabolic edge orbit per peripheral.
    let mut cone_orbits = Vec::new();
    for (pi, p) in peripherals.iter().enumerate() {
        let target = eligible_orbit(base, p).ok_or_else(|| {
            Error::MissingPeripheralVertex(p.label().to_string(), base.name().to_string())
        })?;
        cone_orbits.push(target);
        eo.push(EdgeOrbit {
            id: format!("par{pi}"),
            ep0: (top_orbit, oracle.identity()),
            ep1: (target, oracle.identity()),
            stabilizer: SubgroupHandle::trivial(&oracle),
            flip: None,
            family: None,
            label: EdgeLabel::Cone(pi),
        });
    }
    let spec = GraphSpec::new(
        &format!("{}^coned", base.name()),
        oracle,
        vo,
        eo,
        base.cone_orbits().to_vec(),
    )?;
    Ok(ConedJoint { spec, top_orbit, cone_orbits })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn pendant_attachment_is_isometric() {
        let line = fixtures::zline();
        let u = line.spec.vertex(0, &line.point(0));
        let arc = ArcSpec { id: "pend".into(), end0: u.clone(), end1: None, interior: 0 };
        let att = attach_arc(&line.spec, &arc, 4).unwrap();
        assert_eq!(att.qi_factor, 1);
        // Distances between old vertices are unchanged.
        let wb = line.spec.materialize_ball(&u, 8, 4, None).unwrap();
        let wn = att.spec.materialize_ball(&u, 8, 4, None).unwrap();
        for i in 0..wb.vertex_count() {
            for j in 0..wb.vertex_count() {
                let (ni, nj) = (
                    wn.index_of(&wb.verts[i]).unwrap(),
                    wn.index_of(&wb.verts[j]).unwrap(),
                );
                assert_eq!(wb.dist(i, j), wn.dist(ni, nj));
            }
        }
    }

    #[test]
    fn chord_bound_on_z_line() {
        let line = fixtures::zline();
        let u = line.spec.vertex(0, &line.point(0));
        let v = line.spec.vertex(0, &line.point(2));
        let att = attach_arc(&line.spec, &ArcSpec::chord("ch", u.clone(), v.clone()), 4).unwrap();
        assert_eq!(att.qi_factor, 2, "|P0| = 2 for the chord 0-2");
        let wn = att.spec.materialize_ball(&u, 4, 4, None).unwrap();
        let (ui, vi) = (wn.index_of(&u).unwrap(), wn.index_of(&v).unwrap());
        assert_eq!(wn.dist(ui, vi), Some(1), "chord shortens 0-2 to one edge");
        let report = verify_attachment_bound(&line.spec, &att, &u, 8, 4).unwrap();
        assert!(report.ok, "dist_K <= |P0| * dist_K' for all window pairs");
        assert!(report.pairs_checked >= 100);
    }

    #[test]
    fn removal_of_spur_preserves_distances() {
        let line = fixtures::zline();
        let u = line.spec.vertex(0, &line.point(0));
        let arc = ArcSpec { id: "pend".into(), end0: u.clone(), end1: None, interior: 0 };
        let att = attach_arc(&line.spec, &arc, 4).unwrap();
        let rem = remove_vertex_orbit(&att.spec, "pend_v0", 6, 4).unwrap();
        assert!((rem.distortion - 1.0).abs() < 1e-9, "spur removal is isometric on survivors");
    }

    #[test]
    fn hexagon_edge_removal_disconnects() {
        let h = fixtures::hexagon();
        let err = remove_edge_orbit(&h, "e_1", 4, 4).unwrap_err();
        assert!(matches!(err, Error::RemovalDisconnects(..)));
    }

    #[test]
    fn chord_removal_distortion() {
        let line = fixtures::zline();
        let u = line.spec.vertex(0, &line.point(0));
        let v = line.spec.vertex(0, &line.point(2));
        let att = attach_arc(&line.spec, &ArcSpec::chord("ch", u.clone(), v.clone()), 4).unwrap();
        let rem = remove_edge_orbit(&att.spec, "ch_e0", 6, 4).unwrap();
        assert_eq!(rem.replacement_len, 2, "the 2-edge line path replaces the chord");
        assert!(rem.distortion <= rem.replacement_len as f64);
    }

    #[test]
    fn hull_trivial_and_z_line() {
        let line = fixtures::zline();
        let u = line.spec.vertex(0, &line.point(0));
        let v = line.spec.vertex(0, &line.point(2));
        let att = attach_arc(&line.spec, &ArcSpec::chord("ch", u.clone(), v.clone()), 4).unwrap();

        let h0 = hull(&line.spec, &att, &u, &v, 0, 4).unwrap();
        assert_eq!(h0.vertices.len(), 2, "n = 0 keeps C = {{u, v}}");

        let h2 = hull(&line.spec, &att, &u, &v, 2, 4).unwrap();
        let mid = line.spec.vertex(0, &line.point(1));
        assert!(h2.vertices.contains(&mid));
        let checked = verify_hull_containment(&att, &h2, 4).unwrap();
        assert!(checked > 0);
        assert_eq!(h2.trace.len(), 2);
    }

    #[test]
    fn hull_on_finite_tree() {
        let tree = fixtures::finite_tree();
        let u = tree.base_vertex(0);
        let v = tree.base_vertex(4);
        let att = attach_arc(&tree, &ArcSpec::chord("e", u.clone(), v.clone()), 2).unwrap();
        let d = 4; // tree distance 0..4
        let h = hull(&tree, &att, &u, &v, d, 2).unwrap();
        // C contains the unique tree geodesic.
        for x in [1, 2, 3] {
            assert!(h.vertices.contains(&tree.base_vertex(x)));
        }
        verify_hull_containment(&att, &h, 2).unwrap();
    }

    #[test]
    fn joint_embedding_of_tree_with_itself() {
        let z = fixtures::z23_fixture();
        let j = joint_embedding(&z.tree, &z.tree, &z.peripherals()).unwrap();
        // Two copies sharing both parabolic vertex orbits.
        assert_eq!(j.spec.vertex_orbits().len(), 2);
        assert_eq!(j.spec.edge_orbits().len(), 2);
        assert_eq!(j.glued.len(), 2);
        let w = j
            .spec
            .materialize_ball(&j.spec.base_vertex(0), 3, 8, None)
            .unwrap();
        assert!(w.is_connected());
    }

    #[test]
    fn joint_embedding_with_edgeless_parabolic_spec() {
        let z = fixtures::z23_fixture();
        let o = &z.oracle;
        let dots = GraphSpec::new(
            "dots",
            o.clone(),
            vec![
                VertexOrbit { id: "ps".into(), stabilizer: z.p_s.clone() },
                VertexOrbit { id: "pt".into(), stabilizer: z.p_t.clone() },
            ],
            vec![],
            vec![],
        )
        .unwrap();
        let j = joint_embedding(&z.tree, &dots, &z.peripherals()).unwrap();
        // Gluing along everything added: the result is the tree again.
        assert_eq!(j.spec.vertex_orbits().len(), 2);
        assert_eq!(j.spec.edge_orbits().len(), 1);
    }

    #[test]
    fn coned_joint_orbit_count() {
        let z = fixtures::z23_fixture();
        let j = build_coned_joint(&z.tree, &[], &z.peripherals()).unwrap();
        // Vertices: s-cosets, t-cosets, tops. Edges: tree edge, two triangle
        // sides, two parabolic edges.
        assert_eq!(j.spec.vertex_orbits().len(), 3);
        assert_eq!(j.spec.edge_orbits().len(), 5);
        let w = j
            .spec
            .materialize_ball(&j.spec.base_vertex(j.top_orbit), 4, 8, None)
            .unwrap();
        assert!(w.is_connected());
    }
}

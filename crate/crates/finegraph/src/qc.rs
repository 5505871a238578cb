//! Relative-quasiconvexity certifiers and constant measurement.
//!
//! Quasiconvexity in the subgraph sense is witnessed by finitely many
//! H-orbits of edges of an ambient graph; the artifact measures the witness's
//! distortion over growing windows. The metric definitions (relative and
//! coned-off sigma) are measured by exhaustive geodesic enumeration between
//! subgroup elements in growing balls. Every verdict is evidence about the
//! checked radius, never a proof about the infinite object; reports carry
//! exactness flags and stabilization is judged over consecutive radii.

use std::collections::{BTreeMap, BTreeSet};

use crate::cayley::{ConedOff, RelCayley};
use crate::eqgraph::{GraphSpec, Vertex, Window};
use crate::error::{Error, Result};
use crate::group::{GroupElement, GroupOracle, SubgroupHandle};

/// A quasiconvexity witness: a base vertex and finitely many H-orbit
/// representatives of edges; L is the union of H-translates.
#[derive(Clone)]
pub struct QcWitness {
    pub subgroup: SubgroupHandle,
    pub base: Vertex,
    pub orbit_edges: Vec<(Vertex, Vertex)>,
}

/// How ambient distances are measured.
pub enum AmbientMetric<'a> {
    /// BFS in a materialized window (exact when the window certifies it).
    Window(&'a Window),
    /// The coned-off metric oracle; handles cone vertices via budgeted exits.
    Coned(&'a ConedOff, usize),
}

impl AmbientMetric<'_> {
    pub fn dist(&self, u: &Vertex, v: &Vertex) -> Result<(usize, bool)> {
        match self {
            AmbientMetric::Window(w) => {
                let (ui, vi) = match (w.index_of(u), w.index_of(v)) {
                    (Some(a), Some(b)) => (a, b),
                    _ => return Err(Error::NotInWindow("ambient metric window".into())),
                };
                let d = w
                    .dist(ui, vi)
                    .ok_or_else(|| Error::Disconnected(0, 0))?;
                let exact = w.saturated
                    || (w.complete
                        && (w.bfs_dist(w.center)[ui] as usize + d) <= w.radius);
                Ok((d, exact))
            }
            AmbientMetric::Coned(coned, budget) => self.coned_dist(coned, *budget, u, v),
        }
    }

    fn coned_dist(
        &self,
        coned: &ConedOff,
        budget: usize,
        u: &Vertex,
        v: &Vertex,
    ) -> Result<(usize, bool)> {
        let o = coned.oracle();
        let cone_of = |x: &Vertex| coned.cone_orbit.iter().position(|&c| c == x.orbit);
        match (cone_of(u), cone_of(v)) {
            (None, None) => {
                let d = coned.dist(&u.coset, &v.coset, budget);
                Ok((d.value, d.exact))
            }
            (Some(i), None) => {
                let p = &coned.peripherals[i];
                let bound = o.word_length(&o.diff(&u.coset, &v.coset)) + 6;
                let mut best = usize::MAX;
                let mut exact = p.order().is_some();
                for e in p.enumerate_ball(bound.max(budget.min(bound))) {
                    let x = o.multiply(&u.coset, &e);
                    let d = coned.dist(&x, &v.coset, budget);
                    exact &= d.exact;
                    best = best.min(1 + d.value);
                }
                Ok((best, exact))
            }
            (None, Some(_)) => self.coned_dist(coned, budget, v, u),
            (Some(i), Some(j)) => {
                if u == v {
                    return Ok((0, true));
                }
                let p = &coned.peripherals[i];
                let bound = o.word_length(&o.diff(&u.coset, &v.coset)) + 6;
                let mut best = usize::MAX;
                let mut exact = p.order().is_some();
                for e in p.enumerate_ball(bound) {
                    let x = coned.group_vertex(&o.multiply(&u.coset, &e));
                    let (d, ex) = self.coned_dist(coned, budget, &x, v)?;
                    exact &= ex;
                    best = best.min(1 + d);
                }
                let _ = j;
                Ok((best, exact))
            }
        }
    }
}

/// Materialized witness geometry: the subgraph L as an explicit finite graph
/// of ambient vertices, with its own path metric.
pub struct WitnessGeometry {
    pub verts: Vec<Vertex>,
    index: BTreeMap<Vertex, usize>,
    pub adj: Vec<Vec<usize>>,
    pub base: usize,
    /// Translates enumerated; L-balls are exact only up to the covered radius.
    pub h_radius: usize,
}

impl WitnessGeometry {
    /// Materialize L from the H-translates of the witness's orbit edges.
    pub fn build(spec: &GraphSpec, witness: &QcWitness, h_radius: usize) -> WitnessGeometry {
        let h = &witness.subgroup;
        let translates = h.enumerate_ball(h_radius);
        let mut verts: BTreeSet<Vertex> = BTreeSet::new();
        let mut edges: BTreeSet<(Vertex, Vertex)> = BTreeSet::new();
        for t in &translates {
            verts.insert(spec.translate(t, &witness.base));
            for (a, b) in &witness.orbit_edges {
                let (ta, tb) = (spec.translate(t, a), spec.translate(t, b));
                verts.insert(ta.clone());
                verts.insert(tb.clone());
                edges.insert(if ta <= tb { (ta, tb) } else { (tb, ta) });
            }
        }
        let verts: Vec<Vertex> = verts.into_iter().collect();
        let index: BTreeMap<Vertex, usize> =
            verts.iter().enumerate().map(|(i, v)| (v.clone(), i)).collect();
        let mut adj = vec![Vec::new(); verts.len()];
        for (a, b) in edges {
            let (ia, ib) = (index[&a], index[&b]);
            adj[ia].push(ib);
            adj[ib].push(ia);
        }
        for row in &mut adj {
            row.sort_unstable();
            row.dedup();
        }
        let base = index[&spec.translate(&h.oracle().identity(), &witness.base)];
        WitnessGeometry { verts, index, adj, base, h_radius }
    }

    pub fn index_of(&self, v: &Vertex) -> Option<usize> {
        self.index.get(v).copied()
    }

    pub fn bfs(&self, src: usize) -> Vec<u32> {
        let mut dist = vec![u32::MAX; self.verts.len()];
        dist[src] = 0;
        let mut queue = std::collections::VecDeque::from([src]);
        while let Some(x) = queue.pop_front() {
            for &y in &self.adj[x] {
                if dist[y] == u32::MAX {
                    dist[y] = dist[x] + 1;
                    queue.push_back(y);
                }
            }
        }
        dist
    }

    /// Vertices within L-distance r of the base.
    pub fn l_ball(&self, r: usize) -> Vec<usize> {
        let d = self.bfs(self.base);
        (0..self.verts.len()).filter(|&i| (d[i] as usize) <= r).collect()
    }

    pub fn is_connected(&self) -> bool {
        self.bfs(self.base).iter().all(|&d| d != u32::MAX)
    }
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct DistortionPoint {
    pub radius: usize,
    pub value: f64,
    pub pairs: usize,
    pub exact: bool,
}

/// Max over pairs of the L-ball of dist_L / dist_ambient.
pub fn distortion_at(
    geom: &WitnessGeometry,
    metric: &AmbientMetric,
    radius: usize,
) -> Result<DistortionPoint> {
    let ball = geom.l_ball(radius);
    let mut value = 1.0f64;
    let mut pairs = 0usize;
    let mut exact = true;
    for (k, &i) in ball.iter().enumerate() {
        let dl = geom.bfs(i);
        for &j in ball.iter().skip(k + 1) {
            let (dk, ex) = metric.dist(&geom.verts[i], &geom.verts[j])?;
            exact &= ex;
            pairs += 1;
            if dk == 0 {
                continue;
            }
            value = value.max(dl[j] as f64 / dk as f64);
        }
    }
    Ok(DistortionPoint { radius, value, pairs, exact })
}

pub fn distortion_series(
    geom: &WitnessGeometry,
    metric: &AmbientMetric,
    radii: std::ops::RangeInclusive<usize>,
) -> Result<Vec<DistortionPoint>> {
    radii.map(|r| distortion_at(geom, metric, r)).collect()
}

/// Three-valued stabilization verdict over the last three entries of a
/// monotone measurement series.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum Verdict {
    /// Identical over the last three radii: evidence for quasiconvexity.
    StableEvidence,
    /// Strictly increasing over the last three radii: evidence against.
    GrowthEvidence,
    Inconclusive,
}

pub fn series_verdict(values: &[f64]) -> Verdict {
    if values.len() < 3 {
        return Verdict::Inconclusive;
    }
    let tail = &values[values.len() - 3..];
    if (tail[0] - tail[2]).abs() < 1e-9 {
        Verdict::StableEvidence
    } else if tail[0] < tail[1] - 1e-9 && tail[1] < tail[2] - 1e-9 {
        Verdict::GrowthEvidence
    } else {
        Verdict::Inconclusive
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum SigmaKind {
    OsinRel,
    HatNonCone,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct SigmaWitness {
    pub target: String,
    pub vertex: String,
    pub nearest: String,
    pub dist: usize,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct SigmaReport {
    pub kind: SigmaKind,
    pub radius: usize,
    pub sigma: usize,
    pub exact: bool,
    pub pairs: usize,
    pub geodesics: usize,
    pub witness: Option<SigmaWitness>,
}

fn nearest_in(
    oracle: &GroupOracle,
    hball: &[GroupElement],
    p: &GroupElement,
) -> (usize, GroupElement) {
    hball
        .iter()
        .map(|h| (oracle.word_length(&oracle.diff(p, h)), h.clone()))
        .min()
        .expect("nonempty subgroup ball")
}

/// Targets f^-1 g over pairs f, g of subgroup elements in the word ball.
fn pair_targets(oracle: &GroupOracle, h: &SubgroupHandle, radius: usize) -> Vec<GroupElement> {
    let ball = h.enumerate_ball(radius);
    let mut targets: BTreeSet<GroupElement> = BTreeSet::new();
    for f in &ball {
        for g in &ball {
            let t = oracle.diff(f, g);
            if !oracle.is_identity(&t) {
                targets.insert(t);
            }
        }
    }
    targets.into_iter().collect()
}

/// Osin's constant over the relative Cayley graph: the largest word-metric
/// distance from a vertex of any geodesic between subgroup elements to the
/// subgroup, measured over all pairs in the ball and all geodesics. The
/// left-invariance of the metric reduces pairs (f, g) to (1, f^-1 g).
pub fn osin_sigma(
    rel: &RelCayley,
    h: &SubgroupHandle,
    radius: usize,
    budget: usize,
) -> Result<SigmaReport> {
    let oracle = rel.oracle().clone();
    let targets = pair_targets(&oracle, h, radius);
    let mut exact = true;
    let mut slack = 2usize;
    loop {
        let hball = h.enumerate_ball(radius + slack);
        let mut sigma = 0usize;
        let mut witness = None;
        let mut geodesics = 0usize;
        for t in &targets {
            let (geods, ex) = rel.all_geodesics(t, budget);
            exact &= ex;
            geodesics += geods.len();
            for geo in &geods {
                for p in &geo.verts {
                    let (d, nearest) = nearest_in(&oracle, &hball, p);
                    if d > sigma {
                        sigma = d;
                        witness = Some(SigmaWitness {
                            target: oracle.word_token(t),
                            vertex: oracle.word_token(p),
                            nearest: oracle.word_token(&nearest),
                            dist: d,
                        });
                    }
                }
            }
        }
        if sigma + 2 <= slack {
            return Ok(SigmaReport {
                kind: SigmaKind::OsinRel,
                radius,
                sigma,
                exact,
                pairs: targets.len(),
                geodesics,
                witness,
            });
        }
        slack = sigma + 2;
    }
}

/// The coned-off variant: geodesics in the coned-off graph, non-cone vertices
/// only, nearest non-cone subgroup elements in the word metric.
pub fn hat_sigma(
    coned: &ConedOff,
    h: &SubgroupHandle,
    radius: usize,
    budget: usize,
) -> Result<SigmaReport> {
    let oracle = coned.oracle().clone();
    let targets = pair_targets(&oracle, h, radius);
    let mut exact = true;
    let mut slack = 2usize;
    loop {
        let hball = h.enumerate_ball(radius + slack);
        let mut sigma = 0usize;
        let mut witness = None;
        let mut geodesics = 0usize;
        for t in &targets {
            let (geods, ex) = coned.all_geodesics(&oracle.identity(), t, budget);
            exact &= ex;
            geodesics += geods.len();
            for geo in &geods {
                for v in geo {
                    if v.orbit != coned.main_orbit {
                        continue;
                    }
                    let (d, nearest) = nearest_in(&oracle, &hball, &v.coset);
                    if d > sigma {
                        sigma = d;
                        witness = Some(SigmaWitness {
                            target: oracle.word_token(t),
                            vertex: oracle.word_token(&v.coset),
                            nearest: oracle.word_token(&nearest),
                            dist: d,
                        });
                    }
                }
            }
        }
        if sigma + 2 <= slack {
            return Ok(SigmaReport {
                kind: SigmaKind::HatNonCone,
                radius,
                sigma,
                exact,
                pairs: targets.len(),
                geodesics,
                witness,
            });
        }
        slack = sigma + 2;
    }
}

/// Least M such that, within ball(radius), every element of B within K of the
/// coset gC lies within M of B intersect gCg^-1.
pub fn bounded_intersection_m(
    oracle: &GroupOracle,
    b: &SubgroupHandle,
    c: &SubgroupHandle,
    g: &GroupElement,
    k: usize,
    radius: usize,
) -> usize {
    let dist_to_coset = |q: &GroupElement| -> usize {
        // dist(q, gC) = min over c' of |(g c')^-1 q| with |c'| effectively
        // bounded by |q| + |g| + K.
        let bound = oracle.word_length(q) + oracle.word_length(g) + k + 1;
        c.enumerate_ball(bound)
            .iter()
            .map(|cc| oracle.word_length(&oracle.diff(&oracle.multiply(g, cc), q)))
            .min()
            .unwrap_or(usize::MAX)
    };
    let g_inv = oracle.invert(g);
    let core: Vec<GroupElement> = b
        .enumerate_ball(radius + k + 2)
        .into_iter()
        .filter(|x| c.contains(&oracle.multiply(&oracle.multiply(&g_inv, x), g)))
        .collect();
    let mut m = 0usize;
    for q in b.enumerate_ball(radius) {
        if dist_to_coset(&q) > k {
            continue;
        }
        let d = core
            .iter()
            .map(|x| oracle.word_length(&oracle.diff(&q, x)))
            .min()
            .expect("identity lies in the intersection");
        m = m.max(d);
    }
    m
}

#[derive(Clone, Debug)]
pub struct ParabolicApprox {
    pub l: usize,
    /// (conjugator token, peripheral index, the measured M for the pair).
    pub per_pair: Vec<(String, usize, usize)>,
}

/// The approximation constant L: the max of the bounded-intersection
/// constants over conjugators in ball(sigma) and all peripherals.
pub fn parabolic_approx_l(
    oracle: &GroupOracle,
    peripherals: &[SubgroupHandle],
    h: &SubgroupHandle,
    sigma: usize,
    radius: usize,
) -> ParabolicApprox {
    let mut per_pair = Vec::new();
    let mut l = 0usize;
    for g in oracle.ball(sigma) {
        for (pi, p) in peripherals.iter().enumerate() {
            let m = bounded_intersection_m(oracle, h, p, &g, sigma, radius);
            l = l.max(m);
            per_pair.push((oracle.word_token(&g), pi, m));
        }
    }
    ParabolicApprox { l, per_pair }
}

/// Decompose an element h = g p f (|g|, |f| <= sigma, p peripheral) as
/// h = a b with a in H and in the conjugated peripheral, |b| <= L.
pub fn parabolic_decompose(
    oracle: &GroupOracle,
    peripherals: &[SubgroupHandle],
    h: &SubgroupHandle,
    target: &GroupElement,
    conj: &GroupElement,
    p_idx: usize,
    l: usize,
    radius: usize,
) -> Result<(GroupElement, GroupElement)> {
    let conj_inv = oracle.invert(conj);
    let bound = oracle.word_length(target) + l + 2 + radius;
    let candidates: Vec<GroupElement> = h
        .enumerate_ball(bound)
        .into_iter()
        .filter(|a| {
            peripherals[p_idx].contains(&oracle.multiply(&oracle.multiply(&conj_inv, a), conj))
        })
        .collect();
    let best = candidates
        .into_iter()
        .map(|a| (oracle.word_length(&oracle.diff(&a, target)), a))
        .min();
    match best {
        Some((d, a)) if d <= l => {
            let b = oracle.multiply(&oracle.invert(&a), target);
            Ok((a, b))
        }
        _ => Err(Error::NoDecomposition(oracle.word_token(target), radius)),
    }
}

/// A conjugated-peripheral subgroup of H, listed by its data.
#[derive(Clone, Debug)]
pub struct RSubgroup {
    pub conjugator: GroupElement,
    pub peripheral: usize,
    /// Sample of elements within the working ball (always contains 1).
    pub sample: Vec<GroupElement>,
}

#[derive(Clone, Debug)]
pub struct RelGens {
    pub sigma: usize,
    pub k_const: usize,
    pub l_const: usize,
    pub t_set: Vec<GroupElement>,
    pub r_subgroups: Vec<RSubgroup>,
}

/// One factor of a relative factorization.
#[derive(Clone, Debug)]
pub enum Factor {
    T(GroupElement),
    R { subgroup: usize, element: GroupElement },
}

#[derive(Clone, Debug)]
pub struct Factorization {
    pub target: GroupElement,
    pub factors: Vec<Factor>,
}

/// The finite relative generating data: T is the subgroup ball of radius
/// max(2 sigma + K, L); the peripheral collection is indexed by conjugators
/// in ball(sigma). `tau` folds a user override into sigma.
pub fn relative_generators(
    rel: &RelCayley,
    h: &SubgroupHandle,
    sigma: usize,
    tau: Option<usize>,
    radius: usize,
) -> RelGens {
    let oracle = rel.oracle().clone();
    let sigma = sigma.max(tau.unwrap_or(0));
    let k_const = rel
        .s_gens
        .iter()
        .map(|(_, s)| oracle.word_length(s))
        .max()
        .unwrap_or(0);
    let approx = parabolic_approx_l(&oracle, &rel.peripherals, h, sigma, radius);
    let l_const = approx.l;
    let t_bound = (2 * sigma + k_const).max(l_const);
    let t_set = h.enumerate_ball(t_bound);
    let conj_inv = |g: &GroupElement| oracle.invert(g);
    let mut r_subgroups = Vec::new();
    for g in oracle.ball(sigma) {
        for (pi, p) in rel.peripherals.iter().enumerate() {
            let sample: Vec<GroupElement> = h
                .enumerate_ball(radius)
                .into_iter()
                .filter(|x| p.contains(&oracle.multiply(&oracle.multiply(&conj_inv(&g), x), &g)))
                .collect();
            r_subgroups.push(RSubgroup { conjugator: g.clone(), peripheral: pi, sample });
        }
    }
    RelGens { sigma, k_const, l_const, t_set, r_subgroups }
}

/// Factor a subgroup element as a product of T-elements and elements of the
/// conjugated peripherals, by shadowing a relative geodesic with nearest
/// subgroup elements.
pub fn factorize(
    rel: &RelCayley,
    h: &SubgroupHandle,
    gens: &RelGens,
    target: &GroupElement,
    radius: usize,
    budget: usize,
) -> Result<Factorization> {
    let oracle = rel.oracle().clone();
    if oracle.is_identity(target) {
        return Ok(Factorization { target: target.clone(), factors: vec![] });
    }
    let (geods, _) = rel.all_geodesics(target, budget);
    let geo = geods
        .first()
        .ok_or_else(|| Error::FactorizationFailed(oracle.word_token(target)))?;
    let hball = h.enumerate_ball(radius + gens.sigma + 2);
    let n = geo.verts.len();
    // Shadow: h'_0 = 1, h'_n = target, interior vertices projected to H.
    let mut shadow = Vec::with_capacity(n);
    for (i, x) in geo.verts.iter().enumerate() {
        if i == 0 {
            shadow.push(oracle.identity());
        } else if i == n - 1 {
            shadow.push(target.clone());
        } else {
            let (d, nearest) = nearest_in(&oracle, &hball, x);
            if d > gens.sigma {
                return Err(Error::FactorizationFailed(format!(
                    "vertex {} is {}-far from H (sigma = {})",
                    oracle.word_token(x),
                    d,
                    gens.sigma
                )));
            }
            shadow.push(nearest);
        }
    }
    let t_bound = (2 * gens.sigma + gens.k_const).max(gens.l_const);
    let mut factors = Vec::new();
    for i in 1..n {
        let f = oracle.diff(&shadow[i - 1], &shadow[i]);
        if oracle.is_identity(&f) {
            continue;
        }
        match &geo.labels[i - 1] {
            crate::cayley::RelLabel::Gen(..) => {
                if oracle.word_length(&f) > t_bound {
                    return Err(Error::FactorizationFailed(format!(
                        "S-step factor {} exceeds the T bound",
                        oracle.word_token(&f)
                    )));
                }
                factors.push(Factor::T(f));
            }
            crate::cayley::RelLabel::Per(pi, _) => {
                // f = g p f' with g = (x_{i-1}^-1 h'_{i-1})^-1 in ball(sigma).
                let conj = oracle.diff(&shadow[i - 1], &geo.verts[i - 1]);
                let (a, b) = parabolic_decompose(
                    &oracle,
                    &rel.peripherals,
                    h,
                    &f,
                    &conj,
                    *pi,
                    gens.l_const,
                    radius,
                )?;
                let sub = gens
                    .r_subgroups
                    .iter()
                    .position(|r| r.conjugator == conj && r.peripheral == *pi)
                    .ok_or_else(|| {
                        Error::FactorizationFailed(format!(
                            "no listed peripheral for conjugator {}",
                            oracle.word_token(&conj)
                        ))
                    })?;
                if !oracle.is_identity(&a) {
                    factors.push(Factor::R { subgroup: sub, element: a });
                }
                if !oracle.is_identity(&b) {
                    if oracle.word_length(&b) > t_bound {
                        return Err(Error::FactorizationFailed(format!(
                            "remainder {} exceeds the T bound",
                            oracle.word_token(&b)
                        )));
                    }
                    factors.push(Factor::T(b));
                }
            }
        }
    }
    // The product of the factors must reproduce the target.
    let mut acc = oracle.identity();
    for f in &factors {
        let e = match f {
            Factor::T(e) | Factor::R { element: e, .. } => e,
        };
        acc = oracle.multiply(&acc, e);
    }
    if acc != *target {
        return Err(Error::FactorizationFailed(oracle.word_token(target)));
    }
    Ok(Factorization { target: target.clone(), factors })
}

/// Build a witness from an explicit finite connected subgraph J: L is the
/// union of H-translates, connected by the overlap argument, which is checked
/// for every generator.
pub fn cocompact_subgraph(
    spec: &GraphSpec,
    h: &SubgroupHandle,
    t_elems: &[GroupElement],
    c_verts: &[Vertex],
    j_edges: &[(Vertex, Vertex)],
    base: &Vertex,
) -> Result<QcWitness> {
    let oracle = spec.oracle().clone();
    let mut j_verts: BTreeSet<Vertex> = BTreeSet::from([base.clone()]);
    for (a, b) in j_edges {
        j_verts.insert(a.clone());
        j_verts.insert(b.clone());
    }
    for c in c_verts {
        if !j_verts.contains(c) {
            return Err(Error::BadWitness(format!(
                "J misses the parabolic vertex {}",
                spec.vertex_token(c)
            )));
        }
    }
    // Connectivity of J itself.
    if !j_edges.is_empty() {
        let idx: BTreeMap<&Vertex, usize> = j_verts.iter().zip(0..).collect();
        let mut adj = vec![Vec::new(); j_verts.len()];
        for (a, b) in j_edges {
            adj[idx[a]].push(idx[b]);
            adj[idx[b]].push(idx[a]);
        }
        let mut seen = vec![false; j_verts.len()];
        let mut stack = vec![idx[base]];
        seen[idx[base]] = true;
        while let Some(x) = stack.pop() {
            for &y in &adj[x] {
                if !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::BadWitness("J is not connected".into()));
        }
    }
    // Overlap: J and tJ must intersect for every relative generator, so the
    // union of H-translates chains together.
    for t in t_elems {
        let translated: BTreeSet<Vertex> =
            j_verts.iter().map(|v| spec.translate(t, v)).collect();
        if j_verts.intersection(&translated).next().is_none() {
            return Err(Error::OverlapFailed(oracle.word_token(t)));
        }
    }
    Ok(QcWitness { subgroup: h.clone(), base: base.clone(), orbit_edges: j_edges.to_vec() })
}

/// Classification of a vertex stabilizer within the checked ball.
#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize)]
pub enum StabClass {
    Trivial,
    FiniteEvidence,
    InfiniteEvidence,
}

#[derive(Clone, Debug)]
pub struct PeripheralEntry {
    pub vertex: Vertex,
    pub stab_size: usize,
    pub class: StabClass,
}

#[derive(Clone, Debug)]
pub struct PeripheralInduction {
    pub entries: Vec<PeripheralEntry>,
    pub l_delta: f64,
    pub l_connected: bool,
    pub edge_stabs_finite: bool,
}

impl PeripheralInduction {
    pub fn infinite_count(&self) -> usize {
        self.entries.iter().filter(|e| e.class == StabClass::InfiniteEvidence).count()
    }
}

/// Induced peripheral structure on H: H-stabilizers of vertex-orbit
/// representatives of L, classified by ball growth; plus candidate checks on
/// the materialized L (connectivity, finite hyperbolicity estimate, finite
/// edge stabilizers within the ball).
pub fn induced_peripheral_structure(
    spec: &GraphSpec,
    geom: &WitnessGeometry,
    h: &SubgroupHandle,
    radius: usize,
) -> Result<PeripheralInduction> {
    let hball = h.enumerate_ball(radius);
    let hball_small = h.enumerate_ball(radius.saturating_sub(2).max(1));
    // H-orbit representatives of L vertices.
    let mut reps: BTreeMap<Vertex, Vertex> = BTreeMap::new();
    for v in &geom.verts {
        let canon = hball.iter().map(|t| spec.translate(t, v)).min().unwrap_or_else(|| v.clone());
        reps.entry(canon).or_insert_with(|| v.clone());
    }
    let mut entries = Vec::new();
    for (_, v) in reps {
        let stab: Vec<&GroupElement> =
            hball.iter().filter(|t| &spec.translate(t, &v) == &v).collect();
        let stab_small =
            hball_small.iter().filter(|t| &spec.translate(t, &v) == &v).count();
        let class = if stab.len() == 1 {
            StabClass::Trivial
        } else if stab.len() == stab_small {
            StabClass::FiniteEvidence
        } else {
            StabClass::InfiniteEvidence
        };
        entries.push(PeripheralEntry { vertex: v, stab_size: stab.len(), class });
    }
    // Candidate checks on L itself.
    let l_connected = geom.is_connected();
    // Delta over the materialized L-ball as a bare graph.
    let ball = geom.l_ball(radius);
    let keep: BTreeSet<usize> = ball.iter().copied().collect();
    let mut edges = Vec::new();
    let order: Vec<usize> = keep.iter().copied().collect();
    let pos: BTreeMap<usize, usize> = order.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    for &v in &order {
        for &u in &geom.adj[v] {
            if keep.contains(&u) && v < u {
                edges.push((pos[&v], pos[&u]));
            }
        }
    }
    let lw = Window::from_edges(order.len(), &edges);
    let l_delta = if lw.is_connected() {
        crate::hyp::delta_estimate(&lw, Some(60_000), 0)?.delta
    } else {
        f64::NAN
    };
    // Edge H-stabilizers within the ball.
    let mut edge_stabs_finite = true;
    for (a, b) in geom.verts.iter().zip(geom.adj.iter()).flat_map(|(v, adj)| {
        adj.iter().map(move |&u| (v.clone(), u))
    }) {
        let bv = &geom.verts[b];
        let fix_big = hball
            .iter()
            .filter(|t| &spec.translate(t, &a) == &a && &spec.translate(t, bv) == bv)
            .count();
        let fix_small = hball_small
            .iter()
            .filter(|t| &spec.translate(t, &a) == &a && &spec.translate(t, bv) == bv)
            .count();
        if fix_big != fix_small {
            edge_stabs_finite = false;
        }
    }
    Ok(PeripheralInduction { entries, l_delta, l_connected, edge_stabs_finite })
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct TransferStage {
    pub name: String,
    pub note: String,
}

pub struct TransferReport {
    pub stages: Vec<TransferStage>,
    pub witness: QcWitness,
    pub series: Vec<DistortionPoint>,
}

/// Transfer a witness from one candidate graph to the coned-off graph:
/// joint embedding, relative generation, the initial cocompact subgraph,
/// enlargement to cover the infinite-valence vertices of the source witness,
/// pruning by removals, and the final distortion measurement.
pub fn transfer_witness(
    k1: &GraphSpec,
    witness1: &QcWitness,
    target: &ConedOff,
    rel: &RelCayley,
    radius: usize,
    budget: usize,
) -> Result<TransferReport> {
    let oracle = k1.oracle().clone();
    let h = witness1.subgroup.clone();
    let mut stages = Vec::new();

    // Stage 1: both graphs embed in a common candidate.
    let joint = crate::surgery::joint_embedding(k1, &target.spec, &target.peripherals)?;
    stages.push(TransferStage {
        name: "joint-embedding".into(),
        note: format!(
            "{} vertex orbits, {} edge orbits, {} glued",
            joint.spec.vertex_orbits().len(),
            joint.spec.edge_orbits().len(),
            joint.glued.len()
        ),
    });

    // Stage 2: finite relative generation of H.
    let sigma = osin_sigma(rel, &h, radius, budget)?.sigma;
    let gens = relative_generators(rel, &h, sigma, None, radius);
    stages.push(TransferStage {
        name: "relative-generation".into(),
        note: format!(
            "sigma = {}, |T| = {}, {} peripheral conjugates",
            gens.sigma,
            gens.t_set.len(),
            gens.r_subgroups.len()
        ),
    });

    // Stage 3: initial finite subgraph J of the target: geodesics from the
    // base to each T-translate and each listed parabolic vertex.
    let base = target.group_vertex(&oracle.identity());
    let mut j_edges: BTreeSet<(Vertex, Vertex)> = BTreeSet::new();
    let mut c_verts: Vec<Vertex> = Vec::new();
    let mut targets: Vec<Vertex> = Vec::new();
    for t in &gens.t_set {
        targets.push(target.group_vertex(t));
    }
    for r in &gens.r_subgroups {
        if r.sample.len() > 1 {
            let cv = target.cone_vertex(r.peripheral, &r.conjugator);
            c_verts.push(cv.clone());
            targets.push(cv);
        }
    }
    let reach = targets
        .iter()
        .map(|v| match v.orbit == target.main_orbit {
            true => target.hat_dist(&v.coset, budget).value,
            false => 1 + target.hat_dist(&v.coset, budget).value,
        })
        .max()
        .unwrap_or(1);
    let jw = target.spec.materialize_ball(&base, reach + 2, budget.max(2 * radius + 3), None)?;
    let bi = jw.index_of(&base).expect("base");
    for v in &targets {
        let vi = jw
            .index_of(v)
            .ok_or_else(|| Error::WindowExhausted(target.spec.vertex_token(v)))?;
        let p = jw.geodesic(bi, vi)?;
        for pair in p.verts.windows(2) {
            let (a, b) = (jw.verts[pair[0]].clone(), jw.verts[pair[1]].clone());
            j_edges.insert(if a <= b { (a, b) } else { (b, a) });
        }
    }
    stages.push(TransferStage {
        name: "initial-subgraph".into(),
        note: format!("|J| = {} edges reaching {} targets", j_edges.len(), targets.len()),
    });

    // Stage 4: saturation L2 = H.J with the overlap check.
    let j_vec: Vec<(Vertex, Vertex)> = j_edges.into_iter().collect();
    let mut witness2 =
        cocompact_subgraph(&target.spec, &h, &gens.t_set, &c_verts, &j_vec, &base)?;
    stages.push(TransferStage {
        name: "saturation".into(),
        note: format!("{} orbit edges", witness2.orbit_edges.len()),
    });

    // Stage 5: enlarge to cover infinite-valence vertices of L1. Their
    // counterparts in the target carry the same stabilizer (cone vertices of
    // the matching coset).
    let mut enlargements = 0usize;
    {
        let mut seen: BTreeSet<Vertex> = BTreeSet::new();
        for (a, b) in &witness1.orbit_edges {
            for v in [a, b] {
                if k1.vertex_orbits()[v.orbit].stabilizer.order().is_some() {
                    continue;
                }
                // Match the peripheral conjugate.
                let pi = target
                    .peripherals
                    .iter()
                    .position(|p| p == &k1.vertex_orbits()[v.orbit].stabilizer)
                    .ok_or_else(|| {
                        Error::MissingPeripheralVertex(
                            k1.vertex_orbits()[v.orbit].stabilizer.label().to_string(),
                            target.spec.name().to_string(),
                        )
                    })?;
                let cv = target.cone_vertex(pi, &v.coset);
                if !seen.insert(cv.clone()) {
                    continue;
                }
                let geom = WitnessGeometry::build(&target.spec, &witness2, 2);
                if geom.index_of(&cv).is_none() {
                    let vi = jw
                        .index_of(&cv)
                        .ok_or_else(|| Error::WindowExhausted(target.spec.vertex_token(&cv)))?;
                    let p = jw.geodesic(bi, vi)?;
                    for pair in p.verts.windows(2) {
                        let (a2, b2) = (jw.verts[pair[0]].clone(), jw.verts[pair[1]].clone());
                        let e = if a2 <= b2 { (a2, b2) } else { (b2, a2) };
                        if !witness2.orbit_edges.contains(&e) {
                            witness2.orbit_edges.push(e);
                            enlargements += 1;
                        }
                    }
                }
            }
        }
    }
    stages.push(TransferStage {
        name: "enlargement".into(),
        note: format!("{enlargements} orbit edges added"),
    });

    // Stage 6: prune redundant orbit edges while the connectivity certificate
    // holds (base still reaches every T-translate and listed cone vertex
    // inside the materialized L2).
    let certificate_holds = |w: &QcWitness| -> bool {
        let geom = WitnessGeometry::build(&target.spec, w, 2 * radius + 4);
        if !geom.is_connected() {
            return false;
        }
        let d = geom.bfs(geom.base);
        for t in &gens.t_set {
            match geom.index_of(&target.spec.translate(t, &w.base)) {
                Some(i) if d[i] != u32::MAX => {}
                _ => return false,
            }
        }
        for c in &c_verts {
            match geom.index_of(c) {
                Some(i) if d[i] != u32::MAX => {}
                _ => return false,
            }
        }
        true
    };
    let mut removals = 0usize;
    let mut i = witness2.orbit_edges.len();
    while i > 0 {
        i -= 1;
        let mut trial = witness2.clone();
        trial.orbit_edges.remove(i);
        if !trial.orbit_edges.is_empty() && certificate_holds(&trial) {
            witness2 = trial;
            removals += 1;
        }
    }
    stages.push(TransferStage {
        name: "pruning-removals".into(),
        note: format!("{removals} orbit edges removed"),
    });

    // Stage 7: distortion measurement in the target.
    let geom = WitnessGeometry::build(&target.spec, &witness2, 3 * radius + 4);
    let metric = AmbientMetric::Coned(target, budget.max(2 * radius + 3));
    let series = distortion_series(&geom, &metric, 1..=radius)?;
    stages.push(TransferStage {
        name: "measurement".into(),
        note: format!(
            "distortion at radius {}: {:.3}",
            radius,
            series.last().map(|p| p.value).unwrap_or(f64::NAN)
        ),
    });

    Ok(TransferReport { stages, witness: witness2, series })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn sigma_zero_for_free_factor() {
        let fx = fixtures::f2_fixture();
        for r in [3, 4, 5] {
            let rep = osin_sigma(&fx.rel, &fx.h_b, r, 17).unwrap();
            assert_eq!(rep.sigma, 0, "every relative geodesic between b-powers stays in <b>");
            let hat = hat_sigma(&fx.coned, &fx.h_b, r, 17).unwrap();
            assert_eq!(hat.sigma, 0);
        }
    }

    #[test]
    fn sigma_whole_group_is_zero() {
        let z = fixtures::z23_fixture();
        let rel = z.rel(&["s t"]);
        let whole = SubgroupHandle::whole(&z.oracle);
        let rep = osin_sigma(&rel, &whole, 3, 8).unwrap();
        assert_eq!(rep.sigma, 0);
    }

    #[test]
    fn sigma_stabilizes_for_axis() {
        let z = fixtures::z23_fixture();
        let rel = z.rel(&["s t"]);
        let coned = z.coned(&["s t"]);
        let vals: Vec<usize> = (4..=6)
            .map(|r| osin_sigma(&rel, &z.h_st, r, 8).unwrap().sigma)
            .collect();
        assert_eq!(vals[0], vals[1]);
        assert_eq!(vals[1], vals[2]);
        let hats: Vec<usize> = (4..=6)
            .map(|r| hat_sigma(&coned, &z.h_st, r, 8).unwrap().sigma)
            .collect();
        assert_eq!(hats[0], hats[1]);
        assert_eq!(hats[1], hats[2]);
    }

    #[test]
    fn bounded_intersection_examples() {
        let fx = fixtures::f2_fixture();
        let o = &fx.oracle;
        // B = C = G, g = 1: the neighborhood is inside B itself.
        let whole = SubgroupHandle::whole(o);
        assert_eq!(bounded_intersection_m(o, &whole, &whole, &o.identity(), 3, 4), 0);
        // B = <b>, C = <a>: trivial intersection.
        assert_eq!(
            bounded_intersection_m(o, &fx.h_b, &fx.p_a, &o.identity(), 0, 6),
            0
        );
        // K = 2: b-powers within 2 of <a> are b^{\pm 2} and closer; the
        // intersection is trivial, so M = 2.
        assert_eq!(
            bounded_intersection_m(o, &fx.h_b, &fx.p_a, &o.identity(), 2, 6),
            2
        );
    }

    #[test]
    fn parabolic_decomposition_members() {
        let z = fixtures::z23_fixture();
        let o = &z.oracle;
        // h already inside H and the conjugated peripheral: a = h, b = 1.
        let whole = SubgroupHandle::whole(o);
        let s = o.parse_word("s").unwrap();
        let approx = parabolic_approx_l(o, &z.peripherals(), &whole, 0, 4);
        let (a, b) =
            parabolic_decompose(o, &z.peripherals(), &whole, &s, &o.identity(), 0, approx.l, 4)
                .unwrap();
        assert_eq!(a, s);
        assert!(o.is_identity(&b));
    }

    #[test]
    fn relative_generation_b_subgroup() {
        let fx = fixtures::f2_fixture();
        let gens = relative_generators(&fx.rel, &fx.h_b, 0, None, 6);
        assert_eq!(gens.sigma, 0);
        assert_eq!(gens.k_const, 1);
        assert_eq!(gens.l_const, 0);
        let tokens: Vec<String> =
            gens.t_set.iter().map(|g| fx.oracle.word_token(g)).collect();
        assert!(tokens.contains(&"b".to_string()) && tokens.contains(&"b-".to_string()));
        // Every b-power in ball(4) factors as b * b * ...
        for g in fx.h_b.enumerate_ball(4) {
            let f = factorize(&fx.rel, &fx.h_b, &gens, &g, 6, 17).unwrap();
            for fac in &f.factors {
                assert!(matches!(fac, Factor::T(_)));
            }
        }
    }

    #[test]
    fn relative_generation_axis() {
        let z = fixtures::z23_fixture();
        let rel = z.rel(&["s t"]);
        let sigma = osin_sigma(&rel, &z.h_st, 4, 8).unwrap().sigma;
        let gens = relative_generators(&rel, &z.h_st, sigma, None, 6);
        for g in z.h_st.enumerate_ball(4) {
            let f = factorize(&rel, &z.h_st, &gens, &g, 6, 8).unwrap();
            // Verify membership of every factor.
            for fac in &f.factors {
                match fac {
                    Factor::T(e) => assert!(z.h_st.contains(e)),
                    Factor::R { element, .. } => assert!(z.h_st.contains(element)),
                }
            }
        }
    }

    #[test]
    fn witness_distortion_axis_is_one() {
        let z = fixtures::z23_fixture();
        // J = the geodesic from 1<s> to st<s> in the Bass-Serre tree.
        let base = z.tree.base_vertex(0);
        let mid = z.tree.vertex(1, &z.oracle.parse_word("s").unwrap());
        let far = z.tree.vertex(0, &z.oracle.parse_word("s t").unwrap());
        let witness = cocompact_subgraph(
            &z.tree,
            &z.h_st,
            &[z.st_pow(1), z.st_pow(-1)],
            &[],
            &[(base.clone(), mid.clone()), (mid, far)],
            &base,
        )
        .unwrap();
        let geom = WitnessGeometry::build(&z.tree, &witness, 24);
        assert!(geom.is_connected());
        let w = z.tree.materialize_ball(&base, 18, 8, None).unwrap();
        let metric = AmbientMetric::Window(&w);
        let series = distortion_series(&geom, &metric, 1..=6).unwrap();
        for p in &series {
            assert!((p.value - 1.0).abs() < 1e-9, "axis is geodesically embedded");
        }
        assert_eq!(series_verdict(&series.iter().map(|p| p.value).collect::<Vec<_>>()),
            Verdict::StableEvidence);
    }

    #[test]
    fn witness_distortion_b_line_stable() {
        let fx = fixtures::f2_fixture();
        let b = fx.b_pow(1);
        let witness = QcWitness {
            subgroup: fx.h_b.clone(),
            base: fx.coned.group_vertex(&fx.oracle.identity()),
            orbit_edges: vec![(
                fx.coned.group_vertex(&fx.oracle.identity()),
                fx.coned.group_vertex(&b),
            )],
        };
        let geom = WitnessGeometry::build(&fx.coned.spec, &witness, 24);
        let metric = AmbientMetric::Coned(&fx.coned, 17);
        let series = distortion_series(&geom, &metric, 1..=6).unwrap();
        for p in &series {
            assert!((p.value - 1.0).abs() < 1e-9);
            assert!(p.exact);
        }
    }

    #[test]
    fn bad_witness_distortion_grows() {
        // The a-line inside the coned-off graph hugs the coset <a> without
        // using cone edges: its distortion grows linearly.
        let fx = fixtures::f2_fixture();
        let witness = QcWitness {
            subgroup: fx.p_a.clone(),
            base: fx.coned.group_vertex(&fx.oracle.identity()),
            orbit_edges: vec![(
                fx.coned.group_vertex(&fx.oracle.identity()),
                fx.coned.group_vertex(&fx.a_pow(1)),
            )],
        };
        let geom = WitnessGeometry::build(&fx.coned.spec, &witness, 24);
        let metric = AmbientMetric::Coned(&fx.coned, 17);
        let series = distortion_series(&geom, &metric, 1..=6).unwrap();
        let values: Vec<f64> = series.iter().map(|p| p.value).collect();
        for r in [4, 5, 6] {
            assert!(values[r - 1] > values[r - 2], "strict growth at radius {r}");
        }
        assert_eq!(series_verdict(&values), Verdict::GrowthEvidence);
    }

    #[test]
    fn parabolic_star_witness() {
        let fx = fixtures::f2_fixture();
        let witness = QcWitness {
            subgroup: fx.p_a.clone(),
            base: fx.coned.cone_vertex(0, &fx.oracle.identity()),
            orbit_edges: vec![(
                fx.coned.group_vertex(&fx.oracle.identity()),
                fx.coned.cone_vertex(0, &fx.oracle.identity()),
            )],
        };
        let geom = WitnessGeometry::build(&fx.coned.spec, &witness, 12);
        let metric = AmbientMetric::Coned(&fx.coned, 17);
        let series = distortion_series(&geom, &metric, 1..=5).unwrap();
        let values: Vec<f64> = series.iter().map(|p| p.value).collect();
        assert_eq!(series_verdict(&values), Verdict::StableEvidence);
        // Induced peripheral: the cone vertex is fixed by all of H.
        let ind = induced_peripheral_structure(&fx.coned.spec, &geom, &fx.p_a, 8).unwrap();
        assert_eq!(ind.infinite_count(), 1, "the star's center carries H itself");
    }

    #[test]
    fn induced_peripherals_on_axis_trivial() {
        let z = fixtures::z23_fixture();
        let base = z.tree.base_vertex(0);
        let mid = z.tree.vertex(1, &z.oracle.parse_word("s").unwrap());
        let far = z.tree.vertex(0, &z.oracle.parse_word("s t").unwrap());
        let witness = QcWitness {
            subgroup: z.h_st.clone(),
            base: base.clone(),
            orbit_edges: vec![(base.clone(), mid.clone()), (mid, far)],
        };
        let geom = WitnessGeometry::build(&z.tree, &witness, 20);
        let ind = induced_peripheral_structure(&z.tree, &geom, &z.h_st, 10).unwrap();
        assert_eq!(ind.infinite_count(), 0, "free cyclic H acts freely on its axis");
        assert!(ind.l_connected);
        assert_eq!(ind.l_delta, 0.0, "the axis is a line");
        assert!(ind.edge_stabs_finite);
    }

    #[test]
    fn transfer_tree_to_coned() {
        let z = fixtures::z23_fixture();
        let rel = z.rel(&["s t"]);
        let coned = z.coned(&["s t"]);
        let base = z.tree.base_vertex(0);
        let mid = z.tree.vertex(1, &z.oracle.parse_word("s").unwrap());
        let far = z.tree.vertex(0, &z.oracle.parse_word("s t").unwrap());
        let witness1 = QcWitness {
            subgroup: z.h_st.clone(),
            base: base.clone(),
            orbit_edges: vec![(base.clone(), mid.clone()), (mid, far)],
        };
        let report = transfer_witness(&z.tree, &witness1, &coned, &rel, 5, 8).unwrap();
        assert_eq!(report.stages.len(), 7);
        let values: Vec<f64> = report.series.iter().map(|p| p.value).collect();
        assert_eq!(series_verdict(&values), Verdict::StableEvidence, "{values:?}");
    }

    #[test]
    fn transfer_identity_case() {
        // H = G with the whole coned graph: the transferred witness spans K2.
        let z = fixtures::z23_fixture();
        let rel = z.rel(&["s t"]);
        let coned = z.coned(&["s t"]);
        let whole = SubgroupHandle::whole(&z.oracle);
        let base = z.tree.base_vertex(0);
        let witness1 = QcWitness {
            subgroup: whole.clone(),
            base: base.clone(),
            orbit_edges: vec![(base.clone(), z.tree.base_vertex(1))],
        };
        let report = transfer_witness(&z.tree, &witness1, &coned, &rel, 5, 8).unwrap();
        let values: Vec<f64> = report.series.iter().map(|p| p.value).collect();
        assert_eq!(series_verdict(&values), Verdict::StableEvidence, "{values:?}");
    }
}

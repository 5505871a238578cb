//! Equivariant graph engine.
//!
//! A `GraphSpec` is a finite quotient description of a possibly infinite
//! G-graph: vertex orbits carry stabilizer subgroups, edge orbits carry
//! attachment offsets into the vertex orbits. Vertices of the realized graph
//! are pairs (orbit, canonical coset representative). All enumeration happens
//! on finite windows; infinite-valence vertices (infinite stabilizers, or
//! peripheral edge families) are expanded under an explicit valence budget and
//! every downstream result carries a completeness flag.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::group::{GroupElement, GroupOracle, SubgroupHandle};

mod paths;
mod window;

pub use paths::{
    all_circuits, circuits_through_edge, embedded_paths, fineness_certificate, Circuit,
    CircuitCounts, FinenessReport, FinenessVerdict,
};
pub use window::{Window, WPath};

/// A vertex of the realized graph: an orbit index and the canonical left-coset
/// representative for that orbit's stabilizer.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Vertex {
    pub orbit: usize,
    pub coset: GroupElement,
}

#[derive(Clone, Debug)]
pub struct VertexOrbit {
    pub id: String,
    pub stabilizer: SubgroupHandle,
}

/// Visual / semantic role of an edge orbit; used by exports and by the
/// phase-vertex machinery of relative Cayley graphs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EdgeLabel {
    Plain,
    /// Cayley edge for a generator label.
    Gen(String),
    /// Cone edge of the peripheral with the given index.
    Cone(usize),
    /// Relative Cayley edge labelled by an element of peripheral `i`.
    Peripheral(usize),
}

#[derive(Clone, Debug)]
pub struct EdgeOrbit {
    pub id: String,
    pub ep0: (usize, GroupElement),
    pub ep1: (usize, GroupElement),
    pub stabilizer: SubgroupHandle,
    /// Element reversing the representative edge, for orbits whose translate
    /// set is closed under the endpoint swap (order-two Cayley generators).
    pub flip: Option<GroupElement>,
    /// When set, the orbit is a peripheral family: one edge g -- g*p per
    /// nonidentity p of the subgroup, enumerated under the valence budget.
    pub family: Option<SubgroupHandle>,
    pub label: EdgeLabel,
}

/// Identity of a realized edge: orbit index plus the canonical coset of the
/// edge stabilizer picking out the translate. Family edges carry the offset
/// class {p, p^-1} instead.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct EdgeKey {
    pub orbit: usize,
    pub rep: GroupElement,
    pub offset: Option<GroupElement>,
}

#[derive(Debug)]
struct SpecInner {
    name: String,
    oracle: GroupOracle,
    vertex_orbits: Vec<VertexOrbit>,
    edge_orbits: Vec<EdgeOrbit>,
    /// Vertex orbits that play the role of cone vertices.
    cone_orbits: Vec<usize>,
}

/// Finite quotient description of a G-graph; immutable and cheap to clone.
#[derive(Clone, Debug)]
pub struct GraphSpec {
    inner: Arc<SpecInner>,
}

/// Neighbor enumeration result; deduplicated, deterministically ordered.
#[derive(Clone, Debug)]
pub struct NeighborSet {
    pub edges: Vec<(EdgeKey, Vertex)>,
    pub truncated: bool,
}

impl GraphSpec {
    pub fn new(
        name: &str,
        oracle: GroupOracle,
        vertex_orbits: Vec<VertexOrbit>,
        edge_orbits: Vec<EdgeOrbit>,
        cone_orbits: Vec<usize>,
    ) -> Result<GraphSpec> {
        let mut seen = BTreeSet::new();
        for vo in &vertex_orbits {
            if !seen.insert(vo.id.clone()) {
                return Err(Error::BadInput(format!("duplicate vertex orbit id '{}'", vo.id)));
            }
        }
        let mut eseen = BTreeSet::new();
        for eo in &edge_orbits {
            if !eseen.insert(eo.id.clone()) {
                return Err(Error::BadInput(format!("duplicate edge orbit id '{}'", eo.id)));
            }
            for (vi, _) in [&eo.ep0, &eo.ep1] {
                if *vi >= vertex_orbits.len() {
                    return Err(Error::UnknownOrbit(format!("endpoint orbit #{vi} of '{}'", eo.id)));
                }
            }
        }
        let spec = GraphSpec {
            inner: Arc::new(SpecInner {
                name: name.to_string(),
                oracle,
                vertex_orbits,
                edge_orbits,
                cone_orbits,
            }),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Finite graph with no symmetry: trivial group, one orbit per cell.
    pub fn from_finite_graph(name: &str, n_vertices: usize, edges: &[(usize, usize)]) -> GraphSpec {
        let oracle = GroupOracle::trivial();
        let vertex_orbits = (0..n_vertices)
            .map(|i| VertexOrbit { id: format!("v{i}"), stabilizer: SubgroupHandle::trivial(&oracle) })
            .collect();
        let edge_orbits = edges
            .iter()
            .enumerate()
            .map(|(k, &(u, v))| EdgeOrbit {
                id: format!("e{k}"),
                ep0: (u, oracle.identity()),
                ep1: (v, oracle.identity()),
                stabilizer: SubgroupHandle::trivial(&oracle),
                flip: None,
                family: None,
                label: EdgeLabel::Plain,
            })
            .collect();
        GraphSpec::new(name, oracle, vertex_orbits, edge_orbits, vec![])
            .expect("finite graph spec is valid")
    }

    pub fn name(&self) -> &str {
        &self.inner.name
    }

    pub fn oracle(&self) -> &GroupOracle {
        &self.inner.oracle
    }

    pub fn vertex_orbits(&self) -> &[VertexOrbit] {
        &self.inner.vertex_orbits
    }

    pub fn edge_orbits(&self) -> &[EdgeOrbit] {
        &self.inner.edge_orbits
    }

    pub fn cone_orbits(&self) -> &[usize] {
        &self.inner.cone_orbits
    }

    pub fn is_cone_orbit(&self, orbit: usize) -> bool {
        self.inner.cone_orbits.contains(&orbit)
    }

    pub fn vertex_orbit_index(&self, id: &str) -> Result<usize> {
        self.inner
            .vertex_orbits
            .iter()
            .position(|vo| vo.id == id)
            .ok_or_else(|| Error::UnknownOrbit(id.to_string()))
    }

    pub fn edge_orbit_index(&self, id: &str) -> Result<usize> {
        self.inner
            .edge_orbits
            .iter()
            .position(|eo| eo.id == id)
            .ok_or_else(|| Error::UnknownOrbit(id.to_string()))
    }

    /// Whether the spec has the structural shape of a (G,P)-graph candidate:
    /// single-representative edge orbits with finite stabilizers.
    pub fn is_gp_candidate(&self) -> bool {
        self.inner.edge_orbits.iter().all(|eo| {
            eo.family.is_none() && eo.stabilizer.order().is_some()
        })
    }

    pub fn vertex(&self, orbit: usize, g: &GroupElement) -> Vertex {
        Vertex { orbit, coset: self.inner.vertex_orbits[orbit].stabilizer.coset_rep(g) }
    }

    pub fn base_vertex(&self, orbit: usize) -> Vertex {
        self.vertex(orbit, &self.inner.oracle.identity())
    }

    /// Left translate of a vertex by a group element.
    pub fn translate(&self, g: &GroupElement, v: &Vertex) -> Vertex {
        self.vertex(v.orbit, &self.inner.oracle.multiply(g, &v.coset))
    }

    pub fn vertex_token(&self, v: &Vertex) -> String {
        format!(
            "{}:{}",
            self.inner.vertex_orbits[v.orbit].id,
            self.inner.oracle.word_token(&v.coset)
        )
    }

    /// Parse "orbitId:word" into a vertex.
    pub fn parse_vertex(&self, s: &str) -> Result<Vertex> {
        let (oid, word) = s
            .split_once(':')
            .ok_or_else(|| Error::BadInput(format!("vertex token '{s}' lacks ':'")))?;
        let orbit = self.vertex_orbit_index(oid)?;
        let g = self.inner.oracle.parse_word(word)?;
        Ok(self.vertex(orbit, &g))
    }

    /// The representative edge of an orbit, as a vertex pair.
    pub fn rep_edge(&self, orbit: usize) -> (Vertex, Vertex) {
        let eo = &self.inner.edge_orbits[orbit];
        if let Some(fam) = &eo.family {
            let p = fam
                .enumerate(3)
                .0
                .into_iter()
                .find(|p| !self.inner.oracle.is_identity(p))
                .expect("nontrivial family");
            (self.vertex(eo.ep0.0, &eo.ep0.1), self.vertex(eo.ep1.0, &p))
        } else {
            (self.vertex(eo.ep0.0, &eo.ep0.1), self.vertex(eo.ep1.0, &eo.ep1.1))
        }
    }

    /// Exact neighbor enumeration. `budget` caps how many stabilizer or family
    /// elements are expanded at infinite-valence incidences; pass `None` to
    /// demand exactness (errors at an infinite-valence vertex).
    pub fn neighbors(&self, v: &Vertex, budget: Option<usize>) -> Result<NeighborSet> {
        let o = &self.inner.oracle;
        let mut out: BTreeMap<EdgeKey, Vertex> = BTreeMap::new();
        let mut truncated = false;
        for (oi, eo) in self.inner.edge_orbits.iter().enumerate() {
            if let Some(fam) = &eo.family {
                if eo.ep0.0 != v.orbit {
                    continue;
                }
                let infinite = fam.order().is_none();
                let limit = match (infinite, budget) {
                    (true, None) => {
                        return Err(Error::NeedsBudget(format!(
                            "family '{}' at {}",
                            eo.id,
                            self.vertex_token(v)
                        )))
                    }
                    (true, Some(b)) => b + 1, // identity is skipped below
                    (false, _) => usize::MAX,
                };
                let (ps, exhausted) = fam.enumerate(limit);
                truncated |= !exhausted;
                for p in ps {
                    if o.is_identity(&p) {
                        continue;
                    }
                    let u = self.vertex(eo.ep1.0, &o.multiply(&v.coset, &p));
                    let pinv = o.invert(&p);
                    let class = if pinv < p { pinv } else { p.clone() };
                    let rep = if class == p { v.coset.clone() } else { u.coset.clone() };
                    out.insert(EdgeKey { orbit: oi, rep, offset: Some(class) }, u);
                }
                continue;
            }
            for (this_end, other_end) in [(&eo.ep0, &eo.ep1), (&eo.ep1, &eo.ep0)] {
                if this_end.0 != v.orbit {
                    continue;
                }
                let stab = &self.inner.vertex_orbits[v.orbit].stabilizer;
                let infinite = stab.order().is_none();
                let limit = match (infinite, budget) {
                    (true, None) => {
                        return Err(Error::NeedsBudget(
                            self.inner.vertex_orbits[v.orbit].id.clone(),
                        ))
                    }
                    (true, Some(b)) => b,
                    (false, _) => usize::MAX,
                };
                let (ss, exhausted) = stab.enumerate(limit);
                truncated |= !exhausted;
                let e0_inv = o.invert(&this_end.1);
                for s in ss {
                    let g = o.multiply(&o.multiply(&v.coset, &s), &e0_inv);
                    let u = self.vertex(other_end.0, &o.multiply(&g, &other_end.1));
                    let key = EdgeKey {
                        orbit: oi,
                        rep: eo.stabilizer.coset_rep(&g),
                        offset: None,
                    };
                    out.insert(key, u);
                }
            }
        }
        Ok(NeighborSet { edges: out.into_iter().collect(), truncated })
    }

    /// Structural validation: stabilizers fix their representative cells, and
    /// no orbit without a declared flip admits an endpoint-swapping element.
    fn validate(&self) -> Result<()> {
        let o = &self.inner.oracle;
        for eo in &self.inner.edge_orbits {
            if eo.family.is_some() {
                continue;
            }
            let u = self.vertex(eo.ep0.0, &eo.ep0.1);
            let w = self.vertex(eo.ep1.0, &eo.ep1.1);
            for s in eo.stabilizer.generators() {
                let su = self.translate(s, &u);
                let sw = self.translate(s, &w);
                let fixes = su == u && sw == w;
                let flips = eo.flip.is_some() && su == w && sw == u;
                if !fixes && !flips {
                    return Err(Error::BadInput(format!(
                        "declared stabilizer of edge orbit '{}' moves its representative",
                        eo.id
                    )));
                }
            }
            if let Some(f) = &eo.flip {
                if !(self.translate(f, &u) == w && self.translate(f, &w) == u) {
                    return Err(Error::BadInput(format!(
                        "declared flip of edge orbit '{}' does not reverse it",
                        eo.id
                    )));
                }
            } else if eo.ep0.0 == eo.ep1.0 {
                // Search for an inversion among translates carrying u to w.
                let stab = &self.inner.vertex_orbits[u.orbit].stabilizer;
                let (ss, _) = stab.enumerate(64);
                let e1_inv = o.invert(&eo.ep1.1);
                for s in ss {
                    let g = o.multiply(&o.multiply(&u.coset, &s), &e1_inv);
                    if self.translate(&g, &u) == w && self.translate(&g, &w) == u {
                        return Err(Error::EdgeInversion(eo.id.clone()));
                    }
                }
            }
        }
        Ok(())
    }

    /// Sampled equivariance check: g * neighbors(v) equals neighbors(g * v)
    /// as vertex sets, for all g in the word-metric ball of radius `r`.
    pub fn check_equivariance(&self, v: &Vertex, r: usize, budget: usize) -> Result<bool> {
        let o = &self.inner.oracle;
        for g in o.ball(r) {
            let lhs: BTreeSet<Vertex> = self
                .neighbors(v, Some(budget))?
                .edges
                .iter()
                .map(|(_, u)| self.translate(&g, u))
                .collect();
            let gv = self.translate(&g, v);
            let rhs: BTreeSet<Vertex> = self
                .neighbors(&gv, Some(budget))?
                .edges
                .into_iter()
                .map(|(_, u)| u)
                .collect();
            // Truncated enumerations need not agree exactly on infinite
            // stars; compare only when both sides are complete.
            let lt = self.neighbors(v, Some(budget))?.truncated;
            let rt = self.neighbors(&gv, Some(budget))?.truncated;
            if !lt && !rt && lhs != rhs {
                return Ok(false);
            }
            if (lt || rt) && lhs.intersection(&rhs).count() == 0 && !lhs.is_empty() {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Elementwise stabilizer intersection of two vertices within ball(r):
    /// the finite-ball restriction of the almost-malnormality statement.
    pub fn stabilizer_intersection_ball(&self, u: &Vertex, v: &Vertex, r: usize) -> Vec<GroupElement> {
        self.inner
            .oracle
            .ball(r)
            .into_iter()
            .filter(|g| &self.translate(g, u) == u && &self.translate(g, v) == v)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn bass_serre_neighbors() {
        let t = fixtures::bass_serre_z2_z3();
        let vs = t.base_vertex(0); // coset 1<s>
        let ns = t.neighbors(&vs, None).unwrap();
        assert_eq!(ns.edges.len(), 2, "valence of an <s>-vertex is |<s>| = 2");
        assert!(!ns.truncated);
        let vt = t.base_vertex(1);
        assert_eq!(t.neighbors(&vt, None).unwrap().edges.len(), 3);
    }

    #[test]
    fn hexagon_neighbors() {
        let h = fixtures::hexagon();
        for g in h.oracle().ball(6) {
            let v = h.vertex(0, &g);
            assert_eq!(h.neighbors(&v, None).unwrap().edges.len(), 2);
        }
    }

    #[test]
    fn cone_vertex_budget() {
        let spec = fixtures::coned_f2();
        let cone = spec.base_vertex(1);
        assert!(spec.neighbors(&cone, None).is_err(), "infinite stabilizer needs a budget");
        let ns = spec.neighbors(&cone, Some(7)).unwrap();
        assert_eq!(ns.edges.len(), 7, "budget 7 yields the seven powers a^-3..a^3");
        assert!(ns.truncated);
        let tokens: BTreeSet<String> =
            ns.edges.iter().map(|(_, u)| spec.vertex_token(u)).collect();
        assert!(tokens.contains("g:1") && tokens.contains("g:a.a.a") && tokens.contains("g:a-.a-.a-"));
    }

    #[test]
    fn equivariance_sampled() {
        let t = fixtures::bass_serre_z2_z3();
        assert!(t.check_equivariance(&t.base_vertex(0), 2, 8).unwrap());
        let h = fixtures::hexagon();
        assert!(h.check_equivariance(&h.base_vertex(0), 2, 8).unwrap());
    }

    #[test]
    fn malnormality_probe_stabilizes() {
        let t = fixtures::bass_serre_z2_z3();
        let u = t.base_vertex(0);
        let v = t.base_vertex(1);
        let sizes: Vec<usize> = (2..5)
            .map(|r| t.stabilizer_intersection_ball(&u, &v, r).len())
            .collect();
        assert_eq!(sizes, vec![1, 1, 1], "distinct-vertex stabilizer intersection stays trivial");
    }

    #[test]
    fn inversion_rejected_without_flip() {
        use crate::group::GroupOracle;
        let z2 = GroupOracle::cyclic(2);
        let res = GraphSpec::new(
            "bad",
            z2.clone(),
            vec![VertexOrbit { id: "v".into(), stabilizer: SubgroupHandle::trivial(&z2) }],
            vec![EdgeOrbit {
                id: "e".into(),
                ep0: (0, z2.identity()),
                ep1: (0, z2.parse_word("1").unwrap()),
                stabilizer: SubgroupHandle::trivial(&z2),
                flip: None,
                family: None,
                label: EdgeLabel::Plain,
            }],
            vec![],
        );
        assert!(matches!(res, Err(Error::EdgeInversion(_))));
    }
}

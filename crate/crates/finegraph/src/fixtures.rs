//! Canonical example constructors used by tests, examples, and the shipped
//! fixture files.
//!
//! Each bundle carries one oracle instance; elements and subgroups from a
//! bundle interoperate only within it, since backends are distinguished by
//! identity.

use crate::cayley::{coned_off, relative_cayley, ConedOff, RelCayley};
use crate::eqgraph::{EdgeLabel, EdgeOrbit, GraphSpec, VertexOrbit};
use crate::group::{GroupElement, GroupOracle, SubgroupHandle};

/// Cayley graph of Z/6: the hexagon.
pub fn hexagon() -> GraphSpec {
    let z6 = GroupOracle::cyclic(6);
    crate::cayley::cayley_graph(&z6, &z6.generators()).expect("hexagon")
}

/// Cayley graph of F2: the 4-regular tree.
pub fn f2_cayley() -> GraphSpec {
    let f2 = GroupOracle::free(&["a", "b"]);
    crate::cayley::cayley_graph(&f2, &f2.generators()).expect("f2 cayley")
}

/// Cayley graph of Z/2 * Z/3 over {s, t, t^-1}.
pub fn z23_cayley() -> GraphSpec {
    let z23 = GroupOracle::free_product_cyclic(&[("s", 2), ("t", 3)]);
    crate::cayley::cayley_graph(&z23, &z23.generators()).expect("z23 cayley")
}

/// Bass-Serre tree of Z/2 * Z/3: vertices are cosets of the two factors,
/// edges are group elements.
pub fn bass_serre_z2_z3() -> GraphSpec {
    let z23 = GroupOracle::free_product_cyclic(&[("s", 2), ("t", 3)]);
    bass_serre_from(&z23)
}

pub fn bass_serre_from(z23: &GroupOracle) -> GraphSpec {
    GraphSpec::new(
        "bass-serre",
        z23.clone(),
        vec![
            VertexOrbit { id: "s".into(), stabilizer: SubgroupHandle::free_factor(z23, 0) },
            VertexOrbit { id: "t".into(), stabilizer: SubgroupHandle::free_factor(z23, 1) },
        ],
        vec![EdgeOrbit {
            id: "e".into(),
            ep0: (0, z23.identity()),
            ep1: (1, z23.identity()),
            stabilizer: SubgroupHandle::trivial(z23),
            flip: None,
            family: None,
            label: EdgeLabel::Plain,
        }],
        vec![],
    )
    .expect("bass-serre tree")
}

/// The F2-relative-to-<a> bundle: the standard fixture for one infinite
/// peripheral.
pub struct F2Fixture {
    pub oracle: GroupOracle,
    pub p_a: SubgroupHandle,
    pub h_b: SubgroupHandle,
    pub cayley: GraphSpec,
    pub coned: ConedOff,
    pub rel: RelCayley,
}

impl F2Fixture {
    pub fn a_pow(&self, k: i64) -> GroupElement {
        self.gen_pow("a", k)
    }

    pub fn b_pow(&self, k: i64) -> GroupElement {
        self.gen_pow("b", k)
    }

    fn gen_pow(&self, l: &str, k: i64) -> GroupElement {
        let step = if k >= 0 {
            self.oracle.parse_word(l).unwrap()
        } else {
            self.oracle.invert(&self.oracle.parse_word(l).unwrap())
        };
        let mut out = self.oracle.identity();
        for _ in 0..k.unsigned_abs() {
            out = self.oracle.multiply(&out, &step);
        }
        out
    }

    /// A second, tree-shaped (G,P)-graph for the same pair: element vertices
    /// and coset-of-<a> vertices, star edges g -- g<a>, plus b-edges.
    pub fn coset_star_tree(&self) -> GraphSpec {
        let o = &self.oracle;
        GraphSpec::new(
            "coset-star-tree",
            o.clone(),
            vec![
                VertexOrbit { id: "g".into(), stabilizer: SubgroupHandle::trivial(o) },
                VertexOrbit { id: "c".into(), stabilizer: self.p_a.clone() },
            ],
            vec![
                EdgeOrbit {
                    id: "star".into(),
                    ep0: (0, o.identity()),
                    ep1: (1, o.identity()),
                    stabilizer: SubgroupHandle::trivial(o),
                    flip: None,
                    family: None,
                    label: EdgeLabel::Plain,
                },
                EdgeOrbit {
                    id: "eb".into(),
                    ep0: (0, o.identity()),
                    ep1: (0, o.parse_word("b").unwrap()),
                    stabilizer: SubgroupHandle::trivial(o),
                    flip: None,
                    family: None,
                    label: EdgeLabel::Gen("b".into()),
                },
            ],
            vec![1],
        )
        .expect("coset star tree")
    }
}

pub fn f2_fixture() -> F2Fixture {
    let oracle = GroupOracle::free(&["a", "b"]);
    let p_a = SubgroupHandle::free_gen_cyclic(&oracle, 0);
    let h_b = SubgroupHandle::free_gen_cyclic(&oracle, 1);
    let gens = oracle.generators();
    let cayley = crate::cayley::cayley_graph(&oracle, &gens).expect("cayley");
    let coned = coned_off(&oracle, &gens, std::slice::from_ref(&p_a)).expect("coned");
    let rel = relative_cayley(&oracle, &gens, std::slice::from_ref(&p_a)).expect("relative");
    F2Fixture { oracle, p_a, h_b, cayley, coned, rel }
}

/// Coned-off F2 spec only (main orbit 0, cone orbit 1).
pub fn coned_f2() -> GraphSpec {
    f2_fixture().coned.spec
}

/// The Z/2 * Z/3 bundle with both factors peripheral.
pub struct Z23Fixture {
    pub oracle: GroupOracle,
    pub p_s: SubgroupHandle,
    pub p_t: SubgroupHandle,
    pub h_st: SubgroupHandle,
    pub tree: GraphSpec,
}

impl Z23Fixture {
    pub fn peripherals(&self) -> Vec<SubgroupHandle> {
        vec![self.p_s.clone(), self.p_t.clone()]
    }

    pub fn st_pow(&self, k: i64) -> GroupElement {
        let st = self.oracle.parse_word("s t").unwrap();
        let step = if k >= 0 { st.clone() } else { self.oracle.invert(&st) };
        let mut out = self.oracle.identity();
        for _ in 0..k.unsigned_abs() {
            out = self.oracle.multiply(&out, &step);
        }
        out
    }

    /// S-generators from words, closed under inverses.
    pub fn s_gens(&self, words: &[&str]) -> Vec<(String, GroupElement)> {
        let mut out = Vec::new();
        for w in words {
            let g = self.oracle.parse_word(w).unwrap();
            out.push(((*w).replace(' ', "."), g.clone()));
            let gi = self.oracle.invert(&g);
            if gi != g {
                out.push((format!("{}-", (*w).replace(' ', ".")), gi));
            }
        }
        out
    }

    pub fn coned(&self, s_words: &[&str]) -> ConedOff {
        coned_off(&self.oracle, &self.s_gens(s_words), &self.peripherals()).expect("coned z23")
    }

    pub fn rel(&self, s_words: &[&str]) -> RelCayley {
        relative_cayley(&self.oracle, &self.s_gens(s_words), &self.peripherals())
            .expect("relative z23")
    }
}

pub fn z23_fixture() -> Z23Fixture {
    let oracle = GroupOracle::free_product_cyclic(&[("s", 2), ("t", 3)]);
    let p_s = SubgroupHandle::free_factor(&oracle, 0);
    let p_t = SubgroupHandle::free_factor(&oracle, 1);
    let st = oracle.parse_word("s t").unwrap();
    let h_st = SubgroupHandle::cyclic(&oracle, &st, "<st>").unwrap();
    let tree = bass_serre_from(&oracle);
    Z23Fixture { oracle, p_s, p_t, h_st, tree }
}

/// The Cayley line of Z (free group of rank one).
pub struct ZLine {
    pub oracle: GroupOracle,
    pub spec: GraphSpec,
}

impl ZLine {
    pub fn point(&self, k: i64) -> GroupElement {
        let step = if k >= 0 {
            self.oracle.parse_word("a").unwrap()
        } else {
            self.oracle.parse_word("a-").unwrap()
        };
        let mut out = self.oracle.identity();
        for _ in 0..k.unsigned_abs() {
            out = self.oracle.multiply(&out, &step);
        }
        out
    }
}

pub fn zline() -> ZLine {
    let oracle = GroupOracle::free(&["a"]);
    let spec = crate::cayley::cayley_graph(&oracle, &oracle.generators()).expect("line");
    ZLine { oracle, spec }
}

/// A small finite tree with four leaves (0, 4, 5, 6); trivial symmetry.
pub fn finite_tree() -> GraphSpec {
    GraphSpec::from_finite_graph("tree7", 7, &[(0, 1), (1, 2), (2, 3), (3, 4), (1, 5), (3, 6)])
}

/// Grid ladder with `k` square cells: two rails of length k joined by rungs.
/// Vertex i is rail-top position i, vertex k+1+i is rail-bottom position i.
pub fn grid_ladder(k: usize) -> GraphSpec {
    let mut edges = Vec::new();
    let bot = |i: usize| k + 1 + i;
    for i in 0..k {
        edges.push((i, i + 1));
        edges.push((bot(i), bot(i + 1)));
    }
    for i in 0..=k {
        edges.push((i, bot(i)));
    }
    GraphSpec::from_finite_graph("ladder", 2 * (k + 1), &edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundles_construct() {
        let f2 = f2_fixture();
        assert_eq!(f2.coned.spec.vertex_orbits().len(), 2);
        assert_eq!(f2.rel.spec.edge_orbits().len(), 3);
        let z = z23_fixture();
        assert_eq!(z.tree.vertex_orbits().len(), 2);
        assert!(z.h_st.contains(&z.st_pow(-4)));
        let l = zline();
        assert_eq!(l.oracle.word_length(&l.point(-5)), 5);
    }

    #[test]
    fn grid_ladder_shape() {
        let g = grid_ladder(3);
        let w = g.materialize_ball(&g.base_vertex(0), 16, 1, None).unwrap();
        assert_eq!(w.vertex_count(), 8);
        assert_eq!(w.edge_count(), 3 + 3 + 4);
    }
}

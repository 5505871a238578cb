//! Subgroup handles: decidable membership, canonical left-coset
//! representatives, and deterministic element enumeration.
//!
//! Coset representatives are the lexicographically least shortest element of
//! the coset, computed exactly via suffix stripping for free-product factors
//! and single-generator cyclic subgroups, and by bounded search for general
//! cyclic subgroups.

use std::collections::BTreeSet;
use std::sync::Arc;

use super::{Backend, GroupElement, GroupOracle, Repr};
use crate::error::{Error, Result};

/// How the subgroup decides membership and canonicalizes cosets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SubgroupKind {
    Whole,
    Trivial,
    /// Explicit finite element list (sorted, closed under the operations).
    FiniteSet(Vec<GroupElement>),
    /// A free factor of a free product backend.
    FreeFactor(usize),
    /// The cyclic subgroup on a single free-group generator.
    GenCyclic(usize),
    /// Infinite cyclic subgroup on a word whose powers grow in length.
    Cyclic(GroupElement),
}

#[derive(Debug)]
struct SubgroupInner {
    oracle: GroupOracle,
    kind: SubgroupKind,
    label: String,
    gens: Vec<GroupElement>,
}

/// Immutable handle to a subgroup of a backend group.
#[derive(Clone, Debug)]
pub struct SubgroupHandle {
    inner: Arc<SubgroupInner>,
}

impl PartialEq for SubgroupHandle {
    fn eq(&self, other: &Self) -> bool {
        self.inner.oracle == other.inner.oracle && self.inner.kind == other.inner.kind
    }
}
impl Eq for SubgroupHandle {}

impl SubgroupHandle {
    fn new(oracle: GroupOracle, kind: SubgroupKind, label: String, gens: Vec<GroupElement>) -> Self {
        SubgroupHandle { inner: Arc::new(SubgroupInner { oracle, kind, label, gens }) }
    }

    pub fn whole(oracle: &GroupOracle) -> Self {
        let gens = oracle.metric_generators();
        SubgroupHandle::new(oracle.clone(), SubgroupKind::Whole, "G".into(), gens)
    }

    pub fn trivial(oracle: &GroupOracle) -> Self {
        SubgroupHandle::new(oracle.clone(), SubgroupKind::Trivial, "1".into(), vec![])
    }

    /// Subgroup generated by `gens`, closed by saturation; the closure must be
    /// finite (finite backends, or torsion subgroups of free products).
    pub fn finite_generated(oracle: &GroupOracle, gens: &[GroupElement], label: &str) -> Result<Self> {
        let mut set: BTreeSet<GroupElement> = BTreeSet::from([oracle.identity()]);
        let mut frontier: Vec<GroupElement> = vec![oracle.identity()];
        let mut all_gens: Vec<GroupElement> = gens.to_vec();
        all_gens.extend(gens.iter().map(|g| oracle.invert(g)));
        let cap = 100_000;
        while let Some(x) = frontier.pop() {
            for g in &all_gens {
                let y = oracle.multiply(&x, g);
                if set.insert(y.clone()) {
                    frontier.push(y);
                }
            }
            if set.len() > cap {
                return Err(Error::BadInput(format!(
                    "subgroup '{label}' did not close within {cap} elements"
                )));
            }
        }
        let elems: Vec<GroupElement> = set.into_iter().collect();
        Ok(SubgroupHandle::new(
            oracle.clone(),
            SubgroupKind::FiniteSet(elems),
            label.to_string(),
            gens.to_vec(),
        ))
    }

    /// The free factor `index` of a free-product backend.
    pub fn free_factor(oracle: &GroupOracle, index: usize) -> Self {
        let Backend::FreeProduct { factors, labels } = oracle.backend_ref() else {
            panic!("free_factor requires a free product backend");
        };
        let gens = (1..factors[index].order())
            .map(|x| GroupElement { backend: oracle.id(), repr: Repr::Syllables(vec![(index as u8, x as u32)]) })
            .collect();
        SubgroupHandle::new(
            oracle.clone(),
            SubgroupKind::FreeFactor(index),
            format!("<{}>", labels[index]),
            gens,
        )
    }

    /// Cyclic subgroup on one generator of a free group backend.
    pub fn free_gen_cyclic(oracle: &GroupOracle, gen_index: usize) -> Self {
        let Backend::Free { labels } = oracle.backend_ref() else {
            panic!("free_gen_cyclic requires a free group backend");
        };
        let g = GroupElement { backend: oracle.id(), repr: Repr::Word(vec![gen_index as i32 + 1]) };
        SubgroupHandle::new(
            oracle.clone(),
            SubgroupKind::GenCyclic(gen_index),
            format!("<{}>", labels[gen_index]),
            vec![g],
        )
    }

    /// Cyclic subgroup on `w`. Torsion words collapse to a finite set; for
    /// infinite order the powers of `w` must strictly grow in word length,
    /// which holds for the normal forms of both infinite backends.
    pub fn cyclic(oracle: &GroupOracle, w: &GroupElement, label: &str) -> Result<Self> {
        if oracle.is_identity(w) {
            return Ok(Self::trivial(oracle));
        }
        // Detect torsion within a generous bound.
        let mut p = w.clone();
        for _ in 0..256 {
            if oracle.is_identity(&p) {
                return Self::finite_generated(oracle, &[w.clone()], label);
            }
            if oracle.word_length(&p) > 64 {
                break;
            }
            p = oracle.multiply(&p, w);
        }
        // Normalize to the smaller of w, w^-1 so <w> and <w^-1> compare equal.
        let wi = oracle.invert(w);
        let canon = if wi < *w { wi } else { w.clone() };
        Ok(SubgroupHandle::new(
            oracle.clone(),
            SubgroupKind::Cyclic(canon),
            label.to_string(),
            vec![w.clone()],
        ))
    }

    pub fn oracle(&self) -> &GroupOracle {
        &self.inner.oracle
    }

    pub fn kind(&self) -> &SubgroupKind {
        &self.inner.kind
    }

    pub fn label(&self) -> &str {
        &self.inner.label
    }

    pub fn generators(&self) -> &[GroupElement] {
        &self.inner.gens
    }

    pub fn is_trivial(&self) -> bool {
        matches!(self.inner.kind, SubgroupKind::Trivial)
            || matches!(&self.inner.kind, SubgroupKind::FiniteSet(v) if v.len() == 1)
    }

    /// Number of elements, None when infinite.
    pub fn order(&self) -> Option<usize> {
        let o = &self.inner.oracle;
        match &self.inner.kind {
            SubgroupKind::Whole => match o.backend_ref() {
                Backend::Finite(t) => Some(t.order()),
                _ => None,
            },
            SubgroupKind::Trivial => Some(1),
            SubgroupKind::FiniteSet(v) => Some(v.len()),
            SubgroupKind::FreeFactor(i) => {
                let Backend::FreeProduct { factors, .. } = o.backend_ref() else { unreachable!() };
                Some(factors[*i].order())
            }
            SubgroupKind::GenCyclic(_) | SubgroupKind::Cyclic(_) => None,
        }
    }

    pub fn contains(&self, g: &GroupElement) -> bool {
        let o = &self.inner.oracle;
        match &self.inner.kind {
            SubgroupKind::Whole => true,
            SubgroupKind::Trivial => o.is_identity(g),
            SubgroupKind::FiniteSet(v) => v.binary_search(g).is_ok(),
            SubgroupKind::FreeFactor(i) => match &g.repr {
                Repr::Syllables(s) => s.is_empty() || (s.len() == 1 && s[0].0 as usize == *i),
                _ => false,
            },
            SubgroupKind::GenCyclic(i) => match &g.repr {
                Repr::Word(w) => w.iter().all(|&x| x.unsigned_abs() as usize == i + 1),
                _ => false,
            },
            SubgroupKind::Cyclic(w) => {
                if o.is_identity(g) {
                    return true;
                }
                let bound = o.word_length(g) + o.word_length(w) + 2;
                let mut pos = w.clone();
                let mut neg = o.invert(w);
                loop {
                    if pos == *g || neg == *g {
                        return true;
                    }
                    if o.word_length(&pos) > bound && o.word_length(&neg) > bound {
                        return false;
                    }
                    pos = o.multiply(&pos, w);
                    neg = o.multiply(&neg, &o.invert(w));
                }
            }
        }
    }

    /// Canonical representative of the left coset `g * H`: the
    /// lexicographically least shortest element.
    pub fn coset_rep(&self, g: &GroupElement) -> GroupElement {
        let o = &self.inner.oracle;
        match &self.inner.kind {
            SubgroupKind::Whole => o.identity(),
            SubgroupKind::Trivial => g.clone(),
            SubgroupKind::FiniteSet(v) => {
                v.iter().map(|h| o.multiply(g, h)).min().expect("nonempty subgroup")
            }
            SubgroupKind::FreeFactor(i) => {
                let Repr::Syllables(s) = &g.repr else { unreachable!() };
                match s.last() {
                    Some(&(f, _)) if f as usize == *i => {
                        let mut s2 = s.clone();
                        s2.pop();
                        GroupElement { backend: g.backend, repr: Repr::Syllables(s2) }
                    }
                    _ => g.clone(),
                }
            }
            SubgroupKind::GenCyclic(i) => {
                let Repr::Word(w) = &g.repr else { unreachable!() };
                let mut w2 = w.clone();
                while w2.last().is_some_and(|&x| x.unsigned_abs() as usize == i + 1) {
                    w2.pop();
                }
                GroupElement { backend: g.backend, repr: Repr::Word(w2) }
            }
            SubgroupKind::Cyclic(w) => {
                // Bounded scan over g * w^k; right multiplication changes the
                // length by at most |w| per step, so the minimum is reached
                // within the scanned range for normal-form powers.
                let bound = (o.word_length(g) / o.word_length(w).max(1)) + 2;
                let mut best = g.clone();
                let mut cur = g.clone();
                for _ in 0..bound {
                    cur = o.multiply(&cur, w);
                    if cur < best {
                        best = cur.clone();
                    }
                }
                let wi = o.invert(w);
                cur = g.clone();
                for _ in 0..bound {
                    cur = o.multiply(&cur, &wi);
                    if cur < best {
                        best = cur.clone();
                    }
                }
                best
            }
        }
    }

    /// Deterministic enumeration of at most `limit` elements, identity first,
    /// then by canonical order within word-length layers. The second value
    /// reports whether the whole subgroup was exhausted.
    pub fn enumerate(&self, limit: usize) -> (Vec<GroupElement>, bool) {
        let o = &self.inner.oracle;
        match &self.inner.kind {
            SubgroupKind::Trivial => (vec![o.identity()], true),
            SubgroupKind::FiniteSet(v) => {
                let mut sorted = v.clone();
                sorted.sort();
                if sorted.len() <= limit {
                    (sorted, true)
                } else {
                    (sorted.into_iter().take(limit).collect(), false)
                }
            }
            SubgroupKind::FreeFactor(_) => {
                let mut all: Vec<GroupElement> = self.inner.gens.clone();
                all.push(o.identity());
                all.sort();
                all.dedup();
                if all.len() <= limit {
                    (all, true)
                } else {
                    (all.into_iter().take(limit).collect(), false)
                }
            }
            SubgroupKind::GenCyclic(_) | SubgroupKind::Cyclic(_) => {
                let w = match &self.inner.kind {
                    SubgroupKind::GenCyclic(i) => {
                        GroupElement { backend: o.id(), repr: Repr::Word(vec![*i as i32 + 1]) }
                    }
                    SubgroupKind::Cyclic(w) => w.clone(),
                    _ => unreachable!(),
                };
                let mut out = vec![o.identity()];
                let mut pos = o.identity();
                let mut neg = o.identity();
                while out.len() < limit {
                    pos = o.multiply(&pos, &w);
                    out.push(pos.clone());
                    if out.len() >= limit {
                        break;
                    }
                    neg = o.multiply(&neg, &o.invert(&w));
                    out.push(neg.clone());
                }
                (out, false)
            }
            SubgroupKind::Whole => {
                let mut out: Vec<GroupElement> = Vec::new();
                let mut r = 0;
                loop {
                    let ball = o.ball(r);
                    if ball.len() == out.len() && r > 0 {
                        // Ball stopped growing: finite group exhausted.
                        return (out, true);
                    }
                    out = ball;
                    if out.len() >= limit {
                        out.truncate(limit);
                        return (out, false);
                    }
                    r += 1;
                }
            }
        }
    }

    /// All subgroup elements of word length at most `radius`, sorted.
    pub fn enumerate_ball(&self, radius: usize) -> Vec<GroupElement> {
        let o = &self.inner.oracle;
        match &self.inner.kind {
            SubgroupKind::Whole => o.ball(radius),
            SubgroupKind::Trivial => vec![o.identity()],
            SubgroupKind::FiniteSet(v) => {
                v.iter().filter(|g| o.word_length(g) <= radius).cloned().collect()
            }
            SubgroupKind::FreeFactor(_) => {
                let (mut all, _) = self.enumerate(usize::MAX);
                all.retain(|g| o.word_length(g) <= radius);
                all
            }
            SubgroupKind::GenCyclic(_) | SubgroupKind::Cyclic(_) => {
                let w = self.inner.gens[0].clone();
                let mut out = BTreeSet::from([o.identity()]);
                let mut pos = o.identity();
                let mut neg = o.identity();
                loop {
                    pos = o.multiply(&pos, &w);
                    neg = o.multiply(&neg, &o.invert(&w));
                    let mut grew = false;
                    if o.word_length(&pos) <= radius {
                        out.insert(pos.clone());
                        grew = true;
                    }
                    if o.word_length(&neg) <= radius {
                        out.insert(neg.clone());
                        grew = true;
                    }
                    if !grew {
                        break;
                    }
                }
                out.into_iter().collect()
            }
        }
    }

    /// Word-metric distance from `g` to the subgroup within the given search
    /// ball, together with a nearest element. None if the ball misses H.
    pub fn nearest(&self, g: &GroupElement, radius: usize) -> Option<(usize, GroupElement)> {
        let o = &self.inner.oracle;
        self.enumerate_ball(radius)
            .into_iter()
            .map(|h| (o.word_length(&o.diff(g, &h)), h))
            .min()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn whole_and_trivial() {
        let f2 = GroupOracle::free(&["a", "b"]);
        let g = f2.parse_word("a b").unwrap();
        let whole = SubgroupHandle::whole(&f2);
        assert!(whole.contains(&g));
        assert!(f2.is_identity(&whole.coset_rep(&g)));
        let triv = SubgroupHandle::trivial(&f2);
        assert!(!triv.contains(&g));
        assert_eq!(triv.coset_rep(&g), g);
    }

    #[test]
    fn membership_identity_and_closure() {
        let z23 = GroupOracle::free_product_cyclic(&[("s", 2), ("t", 3)]);
        let st = z23.parse_word("s t").unwrap();
        let h = SubgroupHandle::cyclic(&z23, &st, "<st>").unwrap();
        assert!(h.contains(&z23.identity()));
        let ball = h.enumerate_ball(8);
        for a in &ball {
            assert!(h.contains(&z23.invert(a)));
            for b in &ball {
                assert!(h.contains(&z23.multiply(a, b)));
            }
        }
    }

    #[test]
    fn factor_cosets() {
        let z23 = GroupOracle::free_product_cyclic(&[("s", 2), ("t", 3)]);
        let pt = SubgroupHandle::free_factor(&z23, 1);
        let t2 = z23.parse_word("t2").unwrap();
        assert!(z23.is_identity(&pt.coset_rep(&t2)));
        let st = z23.parse_word("s t").unwrap();
        assert_eq!(z23.word_token(&pt.coset_rep(&st)), "s");
        // coset_rep(g)^-1 g lies in the subgroup; idempotent.
        for g in z23.ball(3) {
            let r = pt.coset_rep(&g);
            assert!(pt.contains(&z23.diff(&r, &g)));
            assert_eq!(pt.coset_rep(&r), r);
        }
    }

    #[test]
    fn free_cyclic_cosets() {
        let f2 = GroupOracle::free(&["a", "b"]);
        let pa = SubgroupHandle::free_gen_cyclic(&f2, 0);
        let a3b = f2.parse_word("a a a b").unwrap();
        // a^3 b has no trailing a-letter, so it is its own representative.
        assert_eq!(pa.coset_rep(&a3b), a3b);
        let ba3 = f2.parse_word("b a a a").unwrap();
        assert_eq!(f2.word_token(&pa.coset_rep(&ba3)), "b");
    }

    #[test]
    fn coset_partition_matches_brute_force() {
        // Canonical representatives must induce exactly the same partition of
        // ball(4) as the same-coset relation r^-1 g in H.
        let z23 = GroupOracle::free_product_cyclic(&[("s", 2), ("t", 3)]);
        let f2 = GroupOracle::free(&["a", "b"]);
        let subs: Vec<(GroupOracle, SubgroupHandle)> = vec![
            (z23.clone(), SubgroupHandle::free_factor(&z23, 0)),
            (z23.clone(), SubgroupHandle::free_factor(&z23, 1)),
            (
                z23.clone(),
                SubgroupHandle::cyclic(&z23, &z23.parse_word("s t").unwrap(), "<st>").unwrap(),
            ),
            (f2.clone(), SubgroupHandle::free_gen_cyclic(&f2, 0)),
            (f2.clone(), SubgroupHandle::free_gen_cyclic(&f2, 1)),
        ];
        for (o, h) in subs {
            let ball = o.ball(4);
            for g in &ball {
                for k in &ball {
                    let same_coset = h.contains(&o.diff(g, k));
                    let same_rep = h.coset_rep(g) == h.coset_rep(k);
                    assert_eq!(same_coset, same_rep, "{} vs {}", o.word_token(g), o.word_token(k));
                }
            }
        }
    }

    #[test]
    fn torsion_cyclic_collapses_to_finite() {
        let z23 = GroupOracle::free_product_cyclic(&[("s", 2), ("t", 3)]);
        let s = z23.parse_word("s").unwrap();
        let h = SubgroupHandle::cyclic(&z23, &s, "<s>").unwrap();
        assert_eq!(h.order(), Some(2));
        assert!(h.contains(&s));
        assert!(!h.contains(&z23.parse_word("t").unwrap()));
    }

    #[test]
    fn axis_subgroup_enumeration() {
        let z23 = GroupOracle::free_product_cyclic(&[("s", 2), ("t", 3)]);
        let st = z23.parse_word("s t").unwrap();
        let h = SubgroupHandle::cyclic(&z23, &st, "<st>").unwrap();
        // Word length of (st)^k is 2|k|.
        let b4 = h.enumerate_ball(4);
        assert_eq!(b4.len(), 5); // 1, (st)^{±1}, (st)^{±2}
        for g in &b4 {
            assert!(z23.word_length(g) <= 4);
        }
        let (first, exhausted) = h.enumerate(7);
        assert_eq!(first.len(), 7);
        assert!(!exhausted);
    }
}

//! Computable group backends with canonical element forms and word metrics.
//!
//! Three backends are provided: finite groups via multiplication tables, free
//! groups via freely reduced words, and free products of finite groups via
//! alternating syllable normal forms. Canonical forms make equality a token
//! comparison, which is what vertex identity in equivariant graphs relies on.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap, VecDeque};
use std::sync::atomic::{AtomicU32, Ordering as AtomicOrdering};
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};

pub mod subgroup;
pub use subgroup::{SubgroupHandle, SubgroupKind};

static NEXT_BACKEND_ID: AtomicU32 = AtomicU32::new(1);

/// Canonical form of a group element, specific to the owning backend.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Repr {
    /// Index into a finite multiplication table.
    Finite(u32),
    /// Freely reduced word; letter `k > 0` is generator `k-1`, `-k` its inverse.
    Word(Vec<i32>),
    /// Alternating syllables `(factor, element index >= 1)`; adjacent factors differ.
    Syllables(Vec<(u8, u32)>),
}

fn letter_key(x: i32) -> (u32, u8) {
    (x.unsigned_abs(), u8::from(x < 0))
}

impl Repr {
    fn rank(&self) -> u8 {
        match self {
            Repr::Finite(_) => 0,
            Repr::Word(_) => 1,
            Repr::Syllables(_) => 2,
        }
    }
}

impl Ord for Repr {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Repr::Finite(a), Repr::Finite(b)) => a.cmp(b),
            // Shortlex: length first, then positionwise letter order with a
            // generator preceding its inverse.
            (Repr::Word(a), Repr::Word(b)) => a
                .len()
                .cmp(&b.len())
                .then_with(|| a.iter().map(|&x| letter_key(x)).cmp(b.iter().map(|&x| letter_key(x)))),
            (Repr::Syllables(a), Repr::Syllables(b)) => {
                a.len().cmp(&b.len()).then_with(|| a.cmp(b))
            }
            (a, b) => a.rank().cmp(&b.rank()),
        }
    }
}

impl PartialOrd for Repr {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// An element of a group, owned by a specific backend.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct GroupElement {
    pub(crate) backend: u32,
    pub(crate) repr: Repr,
}

impl GroupElement {
    pub fn repr(&self) -> &Repr {
        &self.repr
    }
}

/// Finite group given by a full multiplication table. Element 0 is the identity.
#[derive(Debug)]
pub struct FiniteTable {
    pub names: Vec<String>,
    pub mul: Vec<Vec<u32>>,
    pub inv: Vec<u32>,
}

impl FiniteTable {
    pub fn new(names: Vec<String>, mul: Vec<Vec<u32>>) -> Result<FiniteTable> {
        let n = names.len();
        if mul.len() != n || mul.iter().any(|row| row.len() != n) {
            return Err(Error::BadTable("table is not square".into()));
        }
        for i in 0..n {
            if mul[0][i] != i as u32 || mul[i][0] != i as u32 {
                return Err(Error::BadTable("element 0 is not an identity".into()));
            }
        }
        let mut inv = vec![u32::MAX; n];
        for i in 0..n {
            for j in 0..n {
                if mul[i][j] == 0 {
                    inv[i] = j as u32;
                }
            }
            if inv[i] == u32::MAX {
                return Err(Error::BadTable(format!("element {i} has no inverse")));
            }
        }
        // Full associativity check; tables stay desk-sized.
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let left = mul[mul[a][b] as usize][c] ;
                    let right = mul[a][mul[b][c] as usize];
                    if left != right {
                        return Err(Error::BadTable(format!(
                            "associativity fails at ({a},{b},{c})"
                        )));
                    }
                }
            }
        }
        Ok(FiniteTable { names, mul, inv })
    }

    pub fn cyclic(n: usize) -> FiniteTable {
        let names = (0..n).map(|i| i.to_string()).collect();
        let mul = (0..n)
            .map(|i| (0..n).map(|j| ((i + j) % n) as u32).collect())
            .collect();
        FiniteTable::new(names, mul).expect("cyclic table is a group")
    }

    pub fn order(&self) -> usize {
        self.names.len()
    }
}

#[derive(Debug)]
pub(crate) enum Backend {
    Finite(FiniteTable),
    Free { labels: Vec<String> },
    FreeProduct { factors: Vec<FiniteTable>, labels: Vec<String> },
}

#[derive(Debug)]
struct OracleInner {
    id: u32,
    name: String,
    backend: Backend,
    /// Labelled generators, closed under inverses.
    gens: Vec<(String, Repr)>,
    /// Finite generating set realizing the proper left-invariant word metric.
    metric_gens: Vec<Repr>,
    /// Word lengths for every element of a finite backend, or per-factor
    /// lengths for a free product; lazily built.
    finite_dists: OnceLock<Vec<u32>>,
    factor_dists: OnceLock<Vec<Vec<u32>>>,
}

/// Handle to a group backend; cheap to clone, immutable after construction.
#[derive(Clone, Debug)]
pub struct GroupOracle {
    inner: Arc<OracleInner>,
}

impl PartialEq for GroupOracle {
    fn eq(&self, other: &Self) -> bool {
        self.inner.id == other.inner.id
    }
}
impl Eq for GroupOracle {}

impl GroupOracle {
    fn build(name: String, backend: Backend, gens: Vec<(String, Repr)>) -> GroupOracle {
        let metric_gens = gens.iter().map(|(_, r)| r.clone()).collect::<BTreeSet<_>>();
        GroupOracle {
            inner: Arc::new(OracleInner {
                id: NEXT_BACKEND_ID.fetch_add(1, AtomicOrdering::Relaxed),
                name,
                backend,
                gens,
                metric_gens: metric_gens.into_iter().collect(),
                finite_dists: OnceLock::new(),
                factor_dists: OnceLock::new(),
            }),
        }
    }

    /// Free group on the given generator labels.
    pub fn free(labels: &[&str]) -> GroupOracle {
        let mut gens = Vec::new();
        for (i, l) in labels.iter().enumerate() {
            gens.push((l.to_string(), Repr::Word(vec![i as i32 + 1])));
            gens.push((format!("{l}-"), Repr::Word(vec![-(i as i32 + 1)])));
        }
        GroupOracle::build(
            format!("F{}", labels.len()),
            Backend::Free { labels: labels.iter().map(|s| s.to_string()).collect() },
            gens,
        )
    }

    /// Finite group from a multiplication table; `gen_names` pick the
    /// generators used for the word metric.
    pub fn finite(table: FiniteTable, gen_names: &[&str]) -> Result<GroupOracle> {
        let mut gens = Vec::new();
        for gn in gen_names {
            let idx = table
                .names
                .iter()
                .position(|n| n == gn)
                .ok_or_else(|| Error::BadWord((*gn).to_string()))? as u32;
            gens.push(((*gn).to_string(), Repr::Finite(idx)));
            let inv = table.inv[idx as usize];
            if inv != idx {
                gens.push((format!("{}-", gn), Repr::Finite(inv)));
            }
        }
        Ok(GroupOracle::build(
            format!("finite{}", table.order()),
            Backend::Finite(table),
            gens,
        ))
    }

    /// Cyclic group of order `n`; elements are named "0".."n-1".
    pub fn cyclic(n: usize) -> GroupOracle {
        GroupOracle::finite(FiniteTable::cyclic(n), &["1"]).expect("cyclic group")
    }

    /// Trivial group; the base for finite graphs with no symmetry.
    pub fn trivial() -> GroupOracle {
        GroupOracle::finite(FiniteTable::cyclic(1), &[]).expect("trivial group")
    }

    /// Free product of cyclic groups of the given orders. Factor elements are
    /// named by powers of the factor label: `s`, or `t`, `t2`, ...
    pub fn free_product_cyclic(factors: &[(&str, usize)]) -> GroupOracle {
        let mut tables = Vec::new();
        let mut labels = Vec::new();
        let mut gens = Vec::new();
        for (fi, (label, order)) in factors.iter().enumerate() {
            let mut t = FiniteTable::cyclic(*order);
            t.names = (0..*order)
                .map(|k| match k {
                    0 => "1".to_string(),
                    1 => label.to_string(),
                    k => format!("{label}{k}"),
                })
                .collect();
            gens.push((label.to_string(), Repr::Syllables(vec![(fi as u8, 1)])));
            if *order > 2 {
                gens.push((
                    format!("{label}-"),
                    Repr::Syllables(vec![(fi as u8, (*order - 1) as u32)]),
                ));
            }
            labels.push(label.to_string());
            tables.push(t);
        }
        let name = factors
            .iter()
            .map(|(l, n)| format!("Z{n}<{l}>"))
            .collect::<Vec<_>>()
            .join("*");
        GroupOracle::build(name, Backend::FreeProduct { factors: tables, labels }, gens)
    }

    pub fn id(&self) -> u32 {
        self.inner.id
    }

    pub fn name(&self) -> &str {
        &self.inner.name
    }

    pub fn backend(&self) -> &'static str {
        match &self.inner.backend {
            Backend::Finite(_) => "finiteTable",
            Backend::Free { .. } => "freeGroup",
            Backend::FreeProduct { .. } => "freeProductOfFinite",
        }
    }

    pub(crate) fn backend_ref(&self) -> &Backend {
        &self.inner.backend
    }

    /// Labelled generators, closed under inverses.
    pub fn generators(&self) -> Vec<(String, GroupElement)> {
        self.inner
            .gens
            .iter()
            .map(|(l, r)| (l.clone(), self.elem(r.clone())))
            .collect()
    }

    /// The finite generating set realizing the word metric.
    pub fn metric_generators(&self) -> Vec<GroupElement> {
        self.inner.metric_gens.iter().map(|r| self.elem(r.clone())).collect()
    }

    fn elem(&self, repr: Repr) -> GroupElement {
        GroupElement { backend: self.inner.id, repr }
    }

    pub fn identity(&self) -> GroupElement {
        match &self.inner.backend {
            Backend::Finite(_) => self.elem(Repr::Finite(0)),
            Backend::Free { .. } => self.elem(Repr::Word(vec![])),
            Backend::FreeProduct { .. } => self.elem(Repr::Syllables(vec![])),
        }
    }

    pub fn is_identity(&self, g: &GroupElement) -> bool {
        match &g.repr {
            Repr::Finite(i) => *i == 0,
            Repr::Word(w) => w.is_empty(),
            Repr::Syllables(s) => s.is_empty(),
        }
    }

    fn check(&self, g: &GroupElement) -> Result<()> {
        if g.backend != self.inner.id {
            return Err(Error::BackendMismatch(
                self.inner.name.clone(),
                format!("backend #{}", g.backend),
            ));
        }
        Ok(())
    }

    /// Canonical form of `g * h`.
    pub fn multiply(&self, g: &GroupElement, h: &GroupElement) -> GroupElement {
        debug_assert!(self.check(g).is_ok() && self.check(h).is_ok());
        let repr = match (&self.inner.backend, &g.repr, &h.repr) {
            (Backend::Finite(t), Repr::Finite(a), Repr::Finite(b)) => {
                Repr::Finite(t.mul[*a as usize][*b as usize])
            }
            (Backend::Free { .. }, Repr::Word(a), Repr::Word(b)) => {
                let mut out = a.clone();
                for &x in b {
                    if out.last().is_some_and(|&y| y == -x) {
                        out.pop();
                    } else {
                        out.push(x);
                    }
                }
                Repr::Word(out)
            }
            (Backend::FreeProduct { factors, .. }, Repr::Syllables(a), Repr::Syllables(b)) => {
                let mut out = a.clone();
                for &(f, x) in b {
                    match out.last().copied() {
                        Some((lf, lx)) if lf == f => {
                            let t = &factors[f as usize];
                            let prod = t.mul[lx as usize][x as usize];
                            out.pop();
                            if prod != 0 {
                                out.push((f, prod));
                            }
                        }
                        _ => out.push((f, x)),
                    }
                }
                Repr::Syllables(out)
            }
            _ => unreachable!("element repr matches backend"),
        };
        self.elem(repr)
    }

    pub fn invert(&self, g: &GroupElement) -> GroupElement {
        debug_assert!(self.check(g).is_ok());
        let repr = match (&self.inner.backend, &g.repr) {
            (Backend::Finite(t), Repr::Finite(a)) => Repr::Finite(t.inv[*a as usize]),
            (Backend::Free { .. }, Repr::Word(w)) => {
                Repr::Word(w.iter().rev().map(|&x| -x).collect())
            }
            (Backend::FreeProduct { factors, .. }, Repr::Syllables(s)) => Repr::Syllables(
                s.iter()
                    .rev()
                    .map(|&(f, x)| (f, factors[f as usize].inv[x as usize]))
                    .collect(),
            ),
            _ => unreachable!(),
        };
        self.elem(repr)
    }

    /// g^-1 * h, the "difference" used by left-invariant distances.
    pub fn diff(&self, g: &GroupElement, h: &GroupElement) -> GroupElement {
        self.multiply(&self.invert(g), h)
    }

    pub fn word_token(&self, g: &GroupElement) -> String {
        if self.is_identity(g) && !matches!(self.inner.backend, Backend::Finite(_)) {
            return "1".to_string();
        }
        match (&self.inner.backend, &g.repr) {
            (Backend::Finite(t), Repr::Finite(a)) => t.names[*a as usize].clone(),
            (Backend::Free { labels }, Repr::Word(w)) => w
                .iter()
                .map(|&x| {
                    let l = &labels[(x.unsigned_abs() - 1) as usize];
                    if x > 0 {
                        l.clone()
                    } else {
                        format!("{l}-")
                    }
                })
                .collect::<Vec<_>>()
                .join("."),
            (Backend::FreeProduct { factors, .. }, Repr::Syllables(s)) => s
                .iter()
                .map(|&(f, x)| factors[f as usize].names[x as usize].clone())
                .collect::<Vec<_>>()
                .join("."),
            _ => unreachable!(),
        }
    }

    /// Parse a whitespace- or dot-separated word over generator labels and
    /// backend element names; a trailing `-` inverts a letter, `1` is the
    /// identity when not itself an element name.
    pub fn parse_word(&self, s: &str) -> Result<GroupElement> {
        let mut acc = self.identity();
        for tok in s.split(|c: char| c.is_whitespace() || c == '.').filter(|t| !t.is_empty()) {
            let (core, invert) = match tok.strip_suffix('-') {
                Some(c) => (c, true),
                None => (tok, false),
            };
            let letter = self.lookup_letter(core)?;
            let letter = if invert { self.invert(&letter) } else { letter };
            acc = self.multiply(&acc, &letter);
        }
        Ok(acc)
    }

    fn lookup_letter(&self, core: &str) -> Result<GroupElement> {
        match &self.inner.backend {
            Backend::Finite(t) => {
                if let Some(i) = t.names.iter().position(|n| n == core) {
                    return Ok(self.elem(Repr::Finite(i as u32)));
                }
            }
            Backend::Free { labels } => {
                if let Some(i) = labels.iter().position(|l| l == core) {
                    return Ok(self.elem(Repr::Word(vec![i as i32 + 1])));
                }
                // Single-letter uppercase doubles as the inverse of its
                // lowercase generator, following free-group convention.
                if core.len() == 1 {
                    let lower = core.to_ascii_lowercase();
                    if core != lower {
                        if let Some(i) = labels.iter().position(|l| *l == lower) {
                            return Ok(self.elem(Repr::Word(vec![-(i as i32 + 1)])));
                        }
                    }
                }
            }
            Backend::FreeProduct { factors, .. } => {
                for (fi, t) in factors.iter().enumerate() {
                    if let Some(x) = t.names.iter().position(|n| n == core) {
                        if x == 0 {
                            return Ok(self.identity());
                        }
                        return Ok(self.elem(Repr::Syllables(vec![(fi as u8, x as u32)])));
                    }
                }
            }
        }
        if core == "1" {
            return Ok(self.identity());
        }
        Err(Error::BadWord(core.to_string()))
    }

    /// Word length with respect to the metric generators; 0 iff the identity.
    pub fn word_length(&self, g: &GroupElement) -> usize {
        match (&self.inner.backend, &g.repr) {
            (Backend::Finite(_), Repr::Finite(a)) => self.finite_dists()[*a as usize] as usize,
            (Backend::Free { labels }, Repr::Word(w)) => {
                if self.metric_is_standard_free(labels.len()) {
                    w.len()
                } else {
                    self.bfs_word_length(g)
                }
            }
            (Backend::FreeProduct { factors, .. }, Repr::Syllables(s)) => {
                if let Some(fd) = self.factor_dists_if_standard(factors) {
                    s.iter().map(|&(f, x)| fd[f as usize][x as usize] as usize).sum()
                } else {
                    self.bfs_word_length(g)
                }
            }
            _ => unreachable!(),
        }
    }

    fn metric_is_standard_free(&self, rank: usize) -> bool {
        let mut want = BTreeSet::new();
        for i in 0..rank as i32 {
            want.insert(Repr::Word(vec![i + 1]));
            want.insert(Repr::Word(vec![-(i + 1)]));
        }
        self.inner.metric_gens.iter().cloned().collect::<BTreeSet<_>>() == want
    }

    fn finite_dists(&self) -> &Vec<u32> {
        self.inner.finite_dists.get_or_init(|| {
            let Backend::Finite(t) = &self.inner.backend else { unreachable!() };
            let n = t.order();
            let mut dist = vec![u32::MAX; n];
            dist[0] = 0;
            let mut queue = VecDeque::from([0usize]);
            while let Some(x) = queue.pop_front() {
                for g in &self.inner.metric_gens {
                    let Repr::Finite(gi) = g else { unreachable!() };
                    let y = t.mul[x][*gi as usize] as usize;
                    if dist[y] == u32::MAX {
                        dist[y] = dist[x] + 1;
                        queue.push_back(y);
                    }
                }
            }
            dist
        })
    }

    /// Per-factor word lengths when every metric generator is a single
    /// syllable; None forces the generic BFS.
    fn factor_dists_if_standard(&self, factors: &[FiniteTable]) -> Option<&Vec<Vec<u32>>> {
        if self
            .inner
            .metric_gens
            .iter()
            .any(|r| !matches!(r, Repr::Syllables(s) if s.len() == 1))
        {
            return None;
        }
        let out = self.inner.factor_dists.get_or_init(|| {
            factors
                .iter()
                .enumerate()
                .map(|(fi, t)| {
                    let gens: Vec<u32> = self
                        .inner
                        .metric_gens
                        .iter()
                        .filter_map(|r| match r {
                            Repr::Syllables(s) if s.len() == 1 && s[0].0 as usize == fi => {
                                Some(s[0].1)
                            }
                            _ => None,
                        })
                        .collect();
                    let mut dist = vec![u32::MAX; t.order()];
                    dist[0] = 0;
                    let mut queue = VecDeque::from([0usize]);
                    while let Some(x) = queue.pop_front() {
                        for &gi in &gens {
                            for y in [t.mul[x][gi as usize], t.mul[x][t.inv[gi as usize] as usize]]
                            {
                                if dist[y as usize] == u32::MAX {
                                    dist[y as usize] = dist[x] + 1;
                                    queue.push_back(y as usize);
                                }
                            }
                        }
                    }
                    dist
                })
                .collect()
        });
        if out.iter().any(|d| d.iter().any(|&x| x == u32::MAX)) {
            return None;
        }
        Some(out)
    }

    fn bfs_word_length(&self, g: &GroupElement) -> usize {
        if self.is_identity(g) {
            return 0;
        }
        let mut seen: HashMap<Repr, usize> = HashMap::from([(self.identity().repr, 0)]);
        let mut frontier = vec![self.identity()];
        let mut depth = 0;
        loop {
            depth += 1;
            let mut next = Vec::new();
            for x in &frontier {
                for gen in self.metric_generators() {
                    let y = self.multiply(x, &gen);
                    if y.repr == g.repr {
                        return depth;
                    }
                    if !seen.contains_key(&y.repr) {
                        seen.insert(y.repr.clone(), depth);
                        next.push(y);
                    }
                }
            }
            assert!(!next.is_empty(), "word-length BFS exhausted the group without finding the element");
            frontier = next;
        }
    }

    /// All elements of word length at most `r` over `gens`, sorted canonically.
    pub fn ball_with(&self, r: usize, gens: &[GroupElement]) -> Vec<GroupElement> {
        let mut seen: BTreeSet<GroupElement> = BTreeSet::from([self.identity()]);
        let mut frontier = vec![self.identity()];
        for _ in 0..r {
            let mut next = Vec::new();
            for x in &frontier {
                for g in gens {
                    let y = self.multiply(x, g);
                    if seen.insert(y.clone()) {
                        next.push(y);
                    }
                }
            }
            frontier = next;
        }
        seen.into_iter().collect()
    }

    /// Ball of radius `r` in the word metric.
    pub fn ball(&self, r: usize) -> Vec<GroupElement> {
        self.ball_with(r, &self.metric_generators())
    }
}

/// Check that `gens` is closed under inversion, returning the offender's token.
pub fn check_inverse_closed(oracle: &GroupOracle, gens: &[GroupElement]) -> Result<()> {
    let set: BTreeSet<&Repr> = gens.iter().map(|g| &g.repr).collect();
    for g in gens {
        let inv = oracle.invert(g);
        if !set.contains(&inv.repr) {
            return Err(Error::NotInverseClosed(oracle.word_token(g)));
        }
    }
    Ok(())
}

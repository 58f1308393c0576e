//! Finite checks for higher-dimensional Δ-systems of supports.
//!
//! A [`SupportAssignment`] maps every `u ⊆ E` with `|u| ≤ d` to a finite
//! support `W(u) ⊇ u`. [`check_cl3`] tests the intersection law
//! `W(u) ∩ W(v) = W(u ∩ v)`; [`check_cl4`] tests that the order
//! isomorphisms between supports cohere with inclusion.
//!
//! [`generate_canonical`] builds assignments that pass both: `W(u)` is `u`
//! together with fresh points `F(w)` for every `w ⊆ u`, where `F(w)` has
//! `pad[|w|]` points placed in the gap just above `max w` (below `min E`
//! for `w = ∅`), gaps filled in colex order of `w` and then by slot.

use std::collections::{BTreeMap, BTreeSet};

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qvec::QVec;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DeltaError {
    #[error("order isomorphism between sets of sizes {0} and {1}")]
    SizeMismatch(usize, usize),
    #[error("index set {0:?} is not strictly increasing")]
    NotIncreasing(Vec<usize>),
    #[error("support point {0} is outside the source of the relabelling")]
    SupportEscapes(usize),
    #[error("compose: inner target {inner:?} differs from outer source {outer:?}")]
    NotComposable { inner: Vec<usize>, outer: Vec<usize> },
    #[error("W({u:?}) does not contain {u:?}")]
    MissingBase { u: Vec<usize> },
    #[error("domain entry {u:?} is not a subset of E of size at most d = {d}")]
    OutsideDomain { u: Vec<usize>, d: usize },
    #[error("domain entry {0:?} appears twice")]
    DuplicateEntry(Vec<usize>),
    #[error("no support given for {0:?}")]
    MissingEntry(Vec<usize>),
    #[error("padding needs {need} entries (one per size 0..=d), got {got}")]
    PadLength { need: usize, got: usize },
    #[error("{what}: need {need} free coordinates, only {have} available")]
    Exhausted { what: String, need: usize, have: usize },
}

/// The order-preserving bijection between two index sets of equal size.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OrderIso {
    source: Vec<usize>,
    target: Vec<usize>,
}

fn increasing(v: &[usize]) -> Result<(), DeltaError> {
    if v.windows(2).any(|w| w[0] >= w[1]) {
        return Err(DeltaError::NotIncreasing(v.to_vec()));
    }
    Ok(())
}

impl OrderIso {
    /// Both sets must be strictly increasing and of equal size.
    pub fn new(source: &[usize], target: &[usize]) -> Result<Self, DeltaError> {
        increasing(source)?;
        increasing(target)?;
        if source.len() != target.len() {
            return Err(DeltaError::SizeMismatch(source.len(), target.len()));
        }
        Ok(Self {
            source: source.to_vec(),
            target: target.to_vec(),
        })
    }

    pub fn identity(set: &[usize]) -> Result<Self, DeltaError> {
        Self::new(set, set)
    }

    pub fn source(&self) -> &[usize] {
        &self.source
    }

    pub fn target(&self) -> &[usize] {
        &self.target
    }

    pub fn apply(&self, i: usize) -> Option<usize> {
        self.source.binary_search(&i).ok().map(|k| self.target[k])
    }

    /// Image of a subset of the source, increasing.
    pub fn image(&self, set: &[usize]) -> Option<Vec<usize>> {
        set.iter().map(|&i| self.apply(i)).collect()
    }

    pub fn inverse(&self) -> Self {
        Self {
            source: self.target.clone(),
            target: self.source.clone(),
        }
    }

    /// `self ∘ inner`: apply `inner` first.
    pub fn compose(&self, inner: &OrderIso) -> Result<Self, DeltaError> {
        if inner.target != self.source {
            return Err(DeltaError::NotComposable {
                inner: inner.target.clone(),
                outer: self.source.clone(),
            });
        }
        Ok(Self {
            source: inner.source.clone(),
            target: self.target.clone(),
        })
    }
}

/// Moves the entry at `i` to `h(i)`.
pub fn relabel(v: &QVec, h: &OrderIso) -> Result<QVec, DeltaError> {
    let pairs = v
        .iter()
        .map(|(i, c)| Ok((h.apply(i).ok_or(DeltaError::SupportEscapes(i))?, c.clone())))
        .collect::<Result<Vec<_>, DeltaError>>()?;
    Ok(QVec::from_pairs(pairs))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Entry {
    u: Vec<usize>,
    support: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Wire {
    #[serde(rename = "E")]
    e: Vec<usize>,
    d: usize,
    #[serde(rename = "W")]
    w: Vec<Entry>,
}

/// `u ↦ W(u)` on every `u ⊆ E` with `|u| ≤ d`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Wire", into = "Wire")]
pub struct SupportAssignment {
    e: Vec<usize>,
    d: usize,
    w: BTreeMap<Vec<usize>, Vec<usize>>,
}

impl From<SupportAssignment> for Wire {
    fn from(s: SupportAssignment) -> Self {
        let w = s
            .domain_order()
            .into_iter()
            .map(|u| Entry {
                support: s.w[&u].clone(),
                u,
            })
            .collect();
        Wire { e: s.e, d: s.d, w }
    }
}

impl TryFrom<Wire> for SupportAssignment {
    type Error = DeltaError;

    fn try_from(wire: Wire) -> Result<Self, DeltaError> {
        let mut w = BTreeMap::new();
        for entry in wire.w {
            if w.insert(entry.u.clone(), entry.support).is_some() {
                return Err(DeltaError::DuplicateEntry(entry.u));
            }
        }
        Self::new(wire.e, wire.d, w)
    }
}

/// Every `u ⊆ e` with `|u| ≤ d`, by size and then lexicographically.
pub fn domain(e: &[usize], d: usize) -> Vec<Vec<usize>> {
    (0..=d.min(e.len()))
        .flat_map(|s| e.iter().copied().combinations(s))
        .collect()
}

impl SupportAssignment {
    /// Checks that the domain is exactly `[E]^{≤d}`, every support is
    /// increasing and `u ⊆ W(u)`.
    pub fn new(e: Vec<usize>, d: usize, w: BTreeMap<Vec<usize>, Vec<usize>>) -> Result<Self, DeltaError> {
        increasing(&e)?;
        let eset: BTreeSet<usize> = e.iter().copied().collect();
        for (u, support) in &w {
            increasing(u)?;
            increasing(support)?;
            if u.len() > d || !u.iter().all(|i| eset.contains(i)) {
                return Err(DeltaError::OutsideDomain { u: u.clone(), d });
            }
            if !u.iter().all(|i| support.binary_search(i).is_ok()) {
                return Err(DeltaError::MissingBase { u: u.clone() });
            }
        }
        if let Some(u) = domain(&e, d).into_iter().find(|u| !w.contains_key(u)) {
            return Err(DeltaError::MissingEntry(u));
        }
        Ok(Self { e, d, w })
    }

    pub fn e(&self) -> &[usize] {
        &self.e
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn support(&self, u: &[usize]) -> Option<&[usize]> {
        self.w.get(u).map(Vec::as_slice)
    }

    /// Domain in the order used by serialization and reports.
    pub fn domain_order(&self) -> Vec<Vec<usize>> {
        domain(&self.e, self.d)
    }

    /// Replaces one support, keeping the domain checks.
    pub fn with_support(&self, u: &[usize], support: Vec<usize>) -> Result<Self, DeltaError> {
        let mut w = self.w.clone();
        w.insert(u.to_vec(), support);
        Self::new(self.e.clone(), self.d, w)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("assignment serializes");
        s.push('\n');
        s
    }
}

fn intersect(a: &[usize], b: &[usize]) -> Vec<usize> {
    let bs: BTreeSet<&usize> = b.iter().collect();
    a.iter().copied().filter(|x| bs.contains(x)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Cl3Violation {
    pub u: Vec<usize>,
    pub v: Vec<usize>,
    /// `W(u) ∩ W(v)`.
    pub intersection: Vec<usize>,
    /// `W(u ∩ v)`.
    pub expected: Vec<usize>,
}

/// Every unordered pair `u ≠ v` whose supports violate
/// `W(u) ∩ W(v) = W(u ∩ v)`, in domain order.
pub fn check_cl3(s: &SupportAssignment) -> Vec<Cl3Violation> {
    let dom = s.domain_order();
    let pairs: Vec<(usize, usize)> = (0..dom.len()).tuple_combinations().collect();
    pairs
        .par_iter()
        .filter_map(|&(a, b)| {
            let (u, v) = (&dom[a], &dom[b]);
            let intersection = intersect(&s.w[u], &s.w[v]);
            let expected = s.w[&intersect(u, v)].clone();
            (intersection != expected).then(|| Cl3Violation {
                u: u.clone(),
                v: v.clone(),
                intersection,
                expected,
            })
        })
        .collect()
}

/// Conditions [`check_cl4`] relies on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Precondition {
    /// The intersection law fails somewhere.
    Cl3 { violations: usize },
    /// Same-size domain sets with supports of different sizes.
    TypeUniformity { u: Vec<usize>, v: Vec<usize>, sizes: (usize, usize) },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Cl4Violation {
    /// `h_{W(u),W(v)}` does not carry `u` onto `v`.
    Base { u: Vec<usize>, v: Vec<usize>, image: Vec<usize> },
    /// `h_{W(u2),W(v2)}` restricted to `W(u1)` differs from
    /// `h_{W(u1),W(v1)}`.
    Restriction {
        u2: Vec<usize>,
        u1: Vec<usize>,
        v2: Vec<usize>,
        v1: Vec<usize>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Cl4Report {
    pub preconditions: Vec<Precondition>,
    pub violations: Vec<Cl4Violation>,
}

impl Cl4Report {
    pub fn is_clean(&self) -> bool {
        self.preconditions.is_empty() && self.violations.is_empty()
    }
}

fn iso(s: &SupportAssignment, u: &[usize], v: &[usize]) -> Option<OrderIso> {
    OrderIso::new(&s.w[u], &s.w[v]).ok()
}

/// Coherence of the order isomorphisms between supports.
///
/// For same-size `u, v` the map `h_{W(u),W(v)}` must send `u` onto `v`.
/// For `u1 ⊆ u2`, `v1 ⊆ v2` with `(u2, u1) ≅ (v2, v1)` the map
/// `h_{W(u2),W(v2)}` must agree with `h_{W(u1),W(v1)}` on `W(u1)`.
/// Pairs whose supports differ in size are skipped and reported as a
/// type-uniformity failure instead.
pub fn check_cl4(s: &SupportAssignment) -> Cl4Report {
    let dom = s.domain_order();
    let mut report = Cl4Report::default();
    let cl3 = check_cl3(s).len();
    if cl3 > 0 {
        report.preconditions.push(Precondition::Cl3 { violations: cl3 });
    }
    let by_size = dom.iter().into_group_map_by(|u| u.len());
    for size in 0..=s.d {
        let Some(group) = by_size.get(&size) else { continue };
        let first = group[0];
        for &u in &group[1..] {
            let sizes = (s.w[first].len(), s.w[u].len());
            if sizes.0 != sizes.1 {
                report.preconditions.push(Precondition::TypeUniformity {
                    u: first.clone(),
                    v: u.clone(),
                    sizes,
                });
            }
        }
    }
    let same_size: Vec<(&Vec<usize>, &Vec<usize>)> = dom
        .iter()
        .cartesian_product(dom.iter())
        .filter(|(u, v)| u.len() == v.len() && u != v)
        .collect();
    report.violations.extend(same_size.par_iter().filter_map(|&(u, v)| {
        let h = iso(s, u, v)?;
        let image = h.image(u)?;
        (image != *v).then(|| Cl4Violation::Base {
            u: u.clone(),
            v: v.clone(),
            image,
        })
    }).collect::<Vec<_>>());
    // nested pairs (u2, u1) keyed by |u2| and the positions of u1 in u2
    let nested: Vec<(Vec<usize>, Vec<usize>, (usize, Vec<usize>))> = dom
        .iter()
        .flat_map(|u2| {
            (0..u2.len()).powerset().map(move |pos| {
                let u1 = pos.iter().map(|&p| u2[p]).collect();
                (u2.clone(), u1, (u2.len(), pos))
            })
        })
        .collect();
    let groups = nested.iter().into_group_map_by(|n| n.2.clone());
    let mut keys: Vec<_> = groups.keys().cloned().collect();
    keys.sort();
    for key in keys {
        let g = &groups[&key];
        let found: Vec<Cl4Violation> = g
            .iter()
            .cartesian_product(g.iter())
            .filter(|(a, b)| a.0 != b.0)
            .collect::<Vec<_>>()
            .par_iter()
            .filter_map(|(a, b)| {
                let (u2, u1, v2, v1) = (&a.0, &a.1, &b.0, &b.1);
                let outer = iso(s, u2, v2)?;
                let inner = iso(s, u1, v1)?;
                let agrees = s.w[u1].iter().all(|&x| outer.apply(x) == inner.apply(x));
                (!agrees).then(|| Cl4Violation::Restriction {
                    u2: u2.clone(),
                    u1: u1.clone(),
                    v2: v2.clone(),
                    v1: v1.clone(),
                })
            })
            .collect();
        report.violations.extend(found);
    }
    report
}

/// Colex order: compare the largest element of the symmetric difference.
fn colex(a: &[usize], b: &[usize]) -> std::cmp::Ordering {
    let sa: BTreeSet<usize> = a.iter().copied().collect();
    let sb: BTreeSet<usize> = b.iter().copied().collect();
    match sa.symmetric_difference(&sb).max() {
        None => std::cmp::Ordering::Equal,
        Some(x) if sb.contains(x) => std::cmp::Ordering::Less,
        Some(_) => std::cmp::Ordering::Greater,
    }
}

/// Fresh points needed in each gap: index 0 is below `E[0]`, index `t + 1`
/// is just above `E[t]`.
pub fn gap_demand(n: usize, d: usize, pad: &[usize]) -> Result<Vec<usize>, DeltaError> {
    if pad.len() != d + 1 {
        return Err(DeltaError::PadLength {
            need: d + 1,
            got: pad.len(),
        });
    }
    let idx: Vec<usize> = (0..n).collect();
    let mut demand = vec![0; n + 1];
    for w in domain(&idx, d) {
        let gap = w.last().map_or(0, |&t| t + 1);
        demand[gap] += pad[w.len()];
    }
    Ok(demand)
}

/// The canonical coherent assignment on `e` inside coordinates
/// `0..universe`.
pub fn generate_canonical(e: &[usize], d: usize, pad: &[usize], universe: usize) -> Result<SupportAssignment, DeltaError> {
    increasing(e)?;
    let demand = gap_demand(e.len(), d, pad)?;
    for (g, &need) in demand.iter().enumerate() {
        let have = match g {
            0 => e.first().copied().unwrap_or(universe),
            g if g == e.len() => universe.saturating_sub(e[g - 1] + 1),
            g => e[g] - e[g - 1] - 1,
        };
        if need > have {
            let what = match g {
                0 => "gap below the first point".to_string(),
                g => format!("gap above {}", e[g - 1]),
            };
            return Err(DeltaError::Exhausted { what, need, have });
        }
    }
    let dom = domain(e, d);
    // fresh points per w, allocated gap by gap in colex order of w
    let mut by_gap: BTreeMap<usize, Vec<&Vec<usize>>> = BTreeMap::new();
    for w in &dom {
        let gap = w.last().map_or(0, |&x| e.binary_search(&x).expect("w ⊆ E") + 1);
        by_gap.entry(gap).or_default().push(w);
    }
    let mut fresh: BTreeMap<&Vec<usize>, Vec<usize>> = BTreeMap::new();
    for (gap, mut ws) in by_gap {
        ws.sort_by(|a, b| colex(a, b));
        let mut next = if gap == 0 { 0 } else { e[gap - 1] + 1 };
        for w in ws {
            let k = pad[w.len()];
            fresh.insert(w, (next..next + k).collect());
            next += k;
        }
    }
    let w = dom
        .iter()
        .map(|u| {
            let mut support: Vec<usize> = u.clone();
            for sub in u.iter().copied().powerset() {
                support.extend(&fresh[&sub]);
            }
            support.sort_unstable();
            (u.clone(), support)
        })
        .collect();
    SupportAssignment::new(e.to_vec(), d, w)
}

/// An `n`-point `E` with each gap holding its demand plus up to `slack`
/// extra coordinates drawn from `seed`, and the generated assignment.
pub fn random_instance(n: usize, d: usize, pad: &[usize], slack: usize, seed: u64) -> Result<SupportAssignment, DeltaError> {
    let demand = gap_demand(n, d, pad)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut e = Vec::with_capacity(n);
    let mut next = 0;
    for &need in &demand[..n] {
        next += need + rng.gen_range(0..=slack);
        e.push(next);
        next += 1;
    }
    let universe = next + demand[n] + rng.gen_range(0..=slack);
    generate_canonical(&e, d, pad, universe)
}

/// A single-point change: `q` replaces `p` in `W(u)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Mutation {
    pub u: Vec<usize>,
    pub p: usize,
    pub q: usize,
}

impl Mutation {
    pub fn apply(&self, s: &SupportAssignment) -> Result<SupportAssignment, DeltaError> {
        let mut support: Vec<usize> = s.w[&self.u].iter().copied().filter(|&x| x != self.p).collect();
        support.push(self.q);
        support.sort_unstable();
        s.with_support(&self.u, support)
    }
}

/// All mutations that import into `W(u)` a point `q ∈ W(v) \ W(u ∩ v)` for
/// some `v` incomparable with `u`, in exchange for a non-base point `p`.
/// Each one breaks the intersection law at `(u, v)`.
pub fn foreign_point_mutations(s: &SupportAssignment) -> Vec<Mutation> {
    let dom = s.domain_order();
    let mut out = BTreeSet::new();
    for u in &dom {
        let wu = &s.w[u];
        let removable: Vec<usize> = wu.iter().copied().filter(|x| u.binary_search(x).is_err()).collect();
        if removable.is_empty() {
            continue;
        }
        for v in &dom {
            let uv = intersect(u, v);
            if uv == *u || uv == *v {
                continue;
            }
            let base = &s.w[&uv];
            for &q in &s.w[v] {
                if base.binary_search(&q).is_err() && wu.binary_search(&q).is_err() {
                    for &p in &removable {
                        out.insert((u.clone(), p, q));
                    }
                }
            }
        }
    }
    out.into_iter().map(|(u, p, q)| Mutation { u, p, q }).collect()
}

/// Mutations that move a point of `W(u)` owned by no proper subset of `u`
/// to a coordinate `q < max(u)` outside `W(u)`, so that a different number
/// of `u`'s elements lie below it. The rank of `u` inside `W(u)` shifts,
/// which breaks `h_{W(u),W(v)}(u) = v` for every same-size `v`; only `u`
/// with such a sibling are used.
pub fn displacement_mutations(s: &SupportAssignment) -> Vec<Mutation> {
    let mut out = Vec::new();
    for u in s.domain_order() {
        if u.is_empty() || u.len() == s.e.len() {
            continue;
        }
        let wu = &s.w[&u];
        let inherited: BTreeSet<usize> = u
            .iter()
            .copied()
            .powerset()
            .filter(|w| w.len() < u.len())
            .flat_map(|w| s.w[&w].clone())
            .collect();
        let below = |x: usize| u.iter().filter(|&&y| y < x).count();
        let max_u = *u.last().expect("nonempty");
        for &p in wu.iter().filter(|x| u.binary_search(x).is_err() && !inherited.contains(x)) {
            for q in (0..max_u).filter(|q| wu.binary_search(q).is_err() && below(*q) != below(p)) {
                out.push(Mutation { u: u.clone(), p, q });
            }
        }
    }
    out
}

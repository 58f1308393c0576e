//! Pattern strings, the star operation and canonical index tuples.
//!
//! For a fixed number of colors `r`, the level-`l` pattern is `2l` twos
//! followed by `r - l` fours. Half of a level-`l'` pattern vector plus half
//! of another one, arranged the right way, is a level-`l` pattern vector;
//! both witness pipelines are built on that identity.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qvec::QVec;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PatternError {
    #[error("level {l} is outside 0..={r}")]
    LevelOutOfRange { r: usize, l: usize },
    #[error("need at least one color, got r = 0")]
    NoColors,
    #[error("pattern has {values} values but the index set has {indices} elements")]
    LengthMismatch { values: usize, indices: usize },
    #[error("pattern values must be nonzero")]
    ZeroValue,
    #[error("index {0} occurs twice")]
    DuplicateIndex(usize),
    #[error("index {0} does not occur in the tuple")]
    MissingOccurrence(usize),
    #[error("substitution lists have different lengths ({0} vs {1})")]
    SubstitutionLength(usize, usize),
    #[error("invalid family layout: {0}")]
    BadFamily(String),
    #[error("index {index} is outside family {family}")]
    IndexOutOfFamily { family: usize, index: Idx },
}

/// The string `s_{r,l}`: `2l` twos followed by `r - l` fours.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PatternString {
    r: usize,
    l: usize,
    values: Vec<i64>,
}

impl PatternString {
    pub fn r(&self) -> usize {
        self.r
    }

    pub fn level(&self) -> usize {
        self.l
    }

    pub fn values(&self) -> &[i64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn make_string(r: usize, l: usize) -> Result<PatternString, PatternError> {
    if r == 0 {
        return Err(PatternError::NoColors);
    }
    if l > r {
        return Err(PatternError::LevelOutOfRange { r, l });
    }
    let values = (0..r + l).map(|k| if k < 2 * l { 2 } else { 4 }).collect();
    Ok(PatternString { r, l, values })
}

/// `s * a`: the vector supported on `a` sending its `i`-th smallest element
/// to `s(i)`.
pub fn star(values: &[i64], a: &[usize]) -> Result<QVec, PatternError> {
    if values.len() != a.len() {
        return Err(PatternError::LengthMismatch {
            values: values.len(),
            indices: a.len(),
        });
    }
    if values.contains(&0) {
        return Err(PatternError::ZeroValue);
    }
    let mut sorted = a.to_vec();
    sorted.sort_unstable();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(PatternError::DuplicateIndex(w[0]));
    }
    let entries = sorted
        .into_iter()
        .zip(values)
        .map(|(i, &c)| (i, BigRational::from(BigInt::from(c))))
        .collect();
    Ok(QVec::from_sorted_entries(entries))
}

/// `s_{r,l} * a`.
pub fn star_level(s: &PatternString, a: &[usize]) -> Result<QVec, PatternError> {
    star(s.values(), a)
}

/// A position inside a family: a finite member position or the top.
///
/// `Top` compares above every finite position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Idx {
    Fin(usize),
    #[serde(with = "top_repr")]
    Top,
}

mod top_repr {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str("top")
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(), D::Error> {
        let s = String::deserialize(d)?;
        if s == "top" {
            Ok(())
        } else {
            Err(serde::de::Error::custom(format!("expected \"top\", got {s:?}")))
        }
    }
}

impl Idx {
    pub fn is_finite(self) -> bool {
        matches!(self, Idx::Fin(_))
    }

    pub fn finite(self) -> Option<usize> {
        match self {
            Idx::Fin(i) => Some(i),
            Idx::Top => None,
        }
    }
}

impl fmt::Display for Idx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Idx::Fin(i) => write!(f, "{i}"),
            Idx::Top => f.write_str("top"),
        }
    }
}

/// An increasing run of member coordinates with one designated top above
/// all of them: the finite stand-in for a set of order type ω+1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IndexFamily {
    members: Vec<usize>,
    top: usize,
}

impl IndexFamily {
    pub fn new(members: Vec<usize>, top: usize) -> Result<Self, PatternError> {
        if members.windows(2).any(|w| w[0] >= w[1]) {
            return Err(PatternError::BadFamily(format!(
                "members {members:?} are not strictly increasing"
            )));
        }
        if members.last().is_some_and(|&m| m >= top) {
            return Err(PatternError::BadFamily(format!(
                "top {top} does not exceed members {members:?}"
            )));
        }
        Ok(Self { members, top })
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn top(&self) -> usize {
        self.top
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Coordinate of the member at `idx`.
    pub fn at(&self, idx: Idx) -> Option<usize> {
        match idx {
            Idx::Fin(i) => self.members.get(i).copied(),
            Idx::Top => Some(self.top),
        }
    }

    fn lowest(&self) -> usize {
        self.members.first().copied().unwrap_or(self.top)
    }

    /// The sub-family keeping the members at `positions` and the top.
    pub fn restrict(&self, positions: &[usize]) -> Result<Self, PatternError> {
        let members = positions
            .iter()
            .map(|&p| {
                self.members.get(p).copied().ok_or(PatternError::BadFamily(format!(
                    "position {p} outside a family of {} members",
                    self.members.len()
                )))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(members, self.top)
    }
}

/// Families must occupy disjoint coordinate ranges in increasing order.
pub fn validate_families(families: &[IndexFamily]) -> Result<(), PatternError> {
    for (i, w) in families.windows(2).enumerate() {
        if w[0].top >= w[1].lowest() {
            return Err(PatternError::BadFamily(format!(
                "family {} (top {}) overlaps family {} (starting at {})",
                i,
                w[0].top,
                i + 1,
                w[1].lowest()
            )));
        }
    }
    Ok(())
}

/// A tuple with its block structure: two positions from each of the first
/// `l` families (the second may be the top), one from each of the rest.
///
/// `index` is the vector `⟨i_k : k < r⟩`, `primed` holds `i_k'` for `k < l`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CanonicalTuple {
    pub index: Vec<Idx>,
    pub primed: Vec<Idx>,
}

impl CanonicalTuple {
    pub fn new(index: Vec<Idx>, primed: Vec<Idx>) -> Self {
        Self { index, primed }
    }

    pub fn r(&self) -> usize {
        self.index.len()
    }

    pub fn level(&self) -> usize {
        self.primed.len()
    }

    /// `(family, position)` slots in flat block order.
    pub fn slots(&self) -> impl Iterator<Item = (usize, Idx)> + '_ {
        self.index.iter().enumerate().flat_map(move |(k, &i)| {
            let second = self.primed.get(k).map(|&p| (k, p));
            std::iter::once((k, i)).chain(second)
        })
    }

    /// The flat `(r + l)`-tuple of coordinates.
    pub fn entries(&self, families: &[IndexFamily]) -> Result<Vec<usize>, PatternError> {
        self.slots()
            .map(|(k, idx)| {
                families
                    .get(k)
                    .and_then(|f| f.at(idx))
                    .ok_or(PatternError::IndexOutOfFamily { family: k, index: idx })
            })
            .collect()
    }

    /// Every primed position and every single-slot position replaced by
    /// the top of its family.
    pub fn saturated(&self) -> CanonicalTuple {
        let l = self.level();
        let index = self
            .index
            .iter()
            .enumerate()
            .map(|(k, &i)| if k < l { i } else { Idx::Top })
            .collect();
        CanonicalTuple {
            index,
            primed: vec![Idx::Top; l],
        }
    }

    /// Replaces the top of family `family` by position `with`.
    pub fn replace_top(&self, family: usize, with: Idx) -> CanonicalTuple {
        let mut t = self.clone();
        if family < t.primed.len() {
            if t.primed[family] == Idx::Top {
                t.primed[family] = with;
            }
        } else if t.index[family] == Idx::Top {
            t.index[family] = with;
        }
        t
    }

    pub fn contains_top_of(&self, family: usize) -> bool {
        if family < self.primed.len() {
            self.primed[family] == Idx::Top
        } else {
            self.index[family] == Idx::Top
        }
    }
}

impl fmt::Display for CanonicalTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (k, i) in self.index.iter().enumerate() {
            if k > 0 {
                f.write_str(" | ")?;
            }
            write!(f, "{i}")?;
            if let Some(p) = self.primed.get(k) {
                write!(f, ", {p}")?;
            }
        }
        f.write_str(")")
    }
}

/// Checks whether `t` is an `l`-canonical tuple over `families`. The error
/// string names the first violated condition.
pub fn is_l_canonical(t: &CanonicalTuple, families: &[IndexFamily], l: usize) -> Result<(), String> {
    let r = families.len();
    if t.r() != r {
        return Err(format!("tuple has {} blocks but there are {} families", t.r(), r));
    }
    if l > r {
        return Err(format!("level {l} exceeds r = {r}"));
    }
    if t.level() != l {
        return Err(format!("tuple has {} doubled blocks, expected {}", t.level(), l));
    }
    validate_families(families).map_err(|e| e.to_string())?;
    for (k, idx) in t.slots() {
        if families[k].at(idx).is_none() {
            return Err(format!("position {idx} is outside family {k}"));
        }
    }
    for k in 0..l {
        let (i, p) = (t.index[k], t.primed[k]);
        if !i.is_finite() {
            return Err(format!("block {k}: first position must be finite"));
        }
        if i >= p {
            return Err(format!("block {k}: need {i} < {p}"));
        }
    }
    let max_finite = t.index.iter().filter_map(|i| i.finite()).max();
    if let Some(max) = max_finite {
        for (k, p) in t.primed.iter().enumerate() {
            if *p <= Idx::Fin(max) {
                return Err(format!(
                    "block {k}: second position {p} does not exceed the largest finite index {max}"
                ));
            }
        }
    }
    Ok(())
}

/// `i_k ≤ i_k'` for all `k < k'`, strictly whenever `i_k` is finite.
pub fn is_index_strictly_increasing(index: &[Idx]) -> bool {
    index.windows(2).all(|w| match w[0] {
        Idx::Fin(_) => w[0] < w[1],
        Idx::Top => w[1] == Idx::Top,
    })
}

/// Simultaneously replaces each `from[i]` in `t` by `to[i]` and returns
/// the re-sorted tuple.
pub fn substitute(t: &[usize], from: &[usize], to: &[usize]) -> Result<Vec<usize>, PatternError> {
    if from.len() != to.len() {
        return Err(PatternError::SubstitutionLength(from.len(), to.len()));
    }
    let mut out = t.to_vec();
    for (&a, &b) in from.iter().zip(to) {
        let pos = t.iter().position(|&x| x == a).ok_or(PatternError::MissingOccurrence(a))?;
        out[pos] = b;
    }
    out.sort_unstable();
    if let Some(w) = out.windows(2).find(|w| w[0] == w[1]) {
        return Err(PatternError::DuplicateIndex(w[0]));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use Idx::{Fin, Top};

    fn families(r: usize, m: usize) -> Vec<IndexFamily> {
        (0..r)
            .map(|i| {
                let base = i * (m + 2);
                IndexFamily::new((base + 1..=base + m).collect(), base + m + 1).unwrap()
            })
            .collect()
    }

    #[test]
    fn strings_from_the_definition() {
        assert_eq!(make_string(2, 1).unwrap().values(), &[2, 2, 4]);
        assert_eq!(make_string(2, 0).unwrap().values(), &[4, 4]);
        assert_eq!(make_string(3, 3).unwrap().values(), &[2; 6]);
        assert_eq!(make_string(2, 3), Err(PatternError::LevelOutOfRange { r: 2, l: 3 }));
        assert_eq!(make_string(0, 0), Err(PatternError::NoColors));
    }

    #[test]
    fn string_shape_for_small_r() {
        for r in 1..=6 {
            for l in 0..=r {
                let s = make_string(r, l).unwrap();
                assert_eq!(s.len(), r + l);
                assert_eq!(s.values().iter().filter(|&&v| v == 2).count(), 2 * l);
                assert_eq!(s.values().iter().filter(|&&v| v == 4).count(), r - l);
            }
        }
    }

    #[test]
    fn star_examples() {
        let v = star(&[2, 2, 4], &[0, 3, 7]).unwrap();
        assert_eq!(v, QVec::from_ints([(0, 2), (3, 2), (7, 4)]));
        assert!(star(&[], &[]).unwrap().is_zero());
        // sorted by index, not by argument order
        assert_eq!(star(&[2, 2, 4], &[7, 0, 3]).unwrap(), v);

        let s = make_string(2, 0).unwrap();
        let v = star_level(&s, &[5, 9]).unwrap();
        let two = BigRational::from(BigInt::from(2));
        assert_eq!(v.scale(&crate::qvec::half()).scale(&two), v);
    }

    #[test]
    fn star_errors() {
        assert_eq!(
            star(&[2, 4], &[1]),
            Err(PatternError::LengthMismatch { values: 2, indices: 1 })
        );
        assert_eq!(star(&[2, 0], &[1, 2]), Err(PatternError::ZeroValue));
        assert_eq!(star(&[2, 2], &[1, 1]), Err(PatternError::DuplicateIndex(1)));
    }

    #[test]
    fn canonical_examples() {
        let fams = families(2, 4);
        let t = CanonicalTuple::new(vec![Fin(0), Fin(3)], vec![Top]);
        assert_eq!(is_l_canonical(&t, &fams, 1), Ok(()));

        let t = CanonicalTuple::new(vec![Fin(2), Fin(0)], vec![Fin(1)]);
        assert!(is_l_canonical(&t, &fams, 1).is_err());

        let fams = families(2, 6);
        let t = CanonicalTuple::new(vec![Fin(0), Fin(1)], vec![Fin(5), Fin(4)]);
        assert_eq!(is_l_canonical(&t, &fams, 2), Ok(()));

        // primed index must dominate every finite unprimed one
        let t = CanonicalTuple::new(vec![Fin(0), Fin(3)], vec![Fin(2)]);
        let err = is_l_canonical(&t, &fams, 1).unwrap_err();
        assert!(err.contains("does not exceed"), "{err}");

        let t = CanonicalTuple::new(vec![Fin(0), Fin(9)], vec![Top]);
        assert!(is_l_canonical(&t, &fams, 1).unwrap_err().contains("outside"));
    }

    #[test]
    fn canonical_rejects_overlapping_families() {
        let fams = vec![
            IndexFamily::new(vec![1, 2], 10).unwrap(),
            IndexFamily::new(vec![5, 6], 11).unwrap(),
        ];
        let t = CanonicalTuple::new(vec![Fin(0), Fin(1)], vec![]);
        assert!(is_l_canonical(&t, &fams, 0).unwrap_err().contains("overlaps"));
    }

    #[test]
    fn index_strict_increase() {
        assert!(is_index_strictly_increasing(&[Fin(0), Fin(1), Fin(2)]));
        assert!(!is_index_strictly_increasing(&[Fin(0), Fin(0), Fin(1)]));
        assert!(is_index_strictly_increasing(&[Fin(3), Top, Top]));
        assert!(!is_index_strictly_increasing(&[Top, Fin(3)]));
    }

    #[test]
    fn substitution() {
        assert_eq!(substitute(&[2, 5, 9], &[9], &[11]).unwrap(), vec![2, 5, 11]);
        assert_eq!(substitute(&[2, 5, 9], &[2, 9], &[1, 10]).unwrap(), vec![1, 5, 10]);
        assert_eq!(substitute(&[2, 5], &[7], &[8]), Err(PatternError::MissingOccurrence(7)));
        assert_eq!(substitute(&[2, 5], &[2], &[5]), Err(PatternError::DuplicateIndex(5)));
    }

    #[test]
    fn tuple_entries_and_display() {
        let fams = families(2, 4);
        let t = CanonicalTuple::new(vec![Fin(0), Fin(3)], vec![Top]);
        assert_eq!(t.entries(&fams).unwrap(), vec![1, 5, 10]);
        assert_eq!(t.to_string(), "(0, top | 3)");
        assert_eq!(t.saturated().to_string(), "(0, top | top)");
        assert!(t.contains_top_of(0) && !t.contains_top_of(1));
        assert_eq!(t.replace_top(0, Fin(2)).to_string(), "(0, 2 | 3)");
    }

    #[test]
    fn idx_order_and_serde() {
        assert!(Fin(usize::MAX) < Top);
        assert_eq!(serde_json::to_string(&vec![Fin(3), Top]).unwrap(), "[3,\"top\"]");
        let back: Vec<Idx> = serde_json::from_str("[3,\"top\"]").unwrap();
        assert_eq!(back, vec![Fin(3), Top]);
    }
}

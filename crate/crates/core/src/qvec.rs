//! Finitely supported rational vectors.
//!
//! A [`QVec`] is an element of the direct sum of countably many copies of
//! the rationals: a map from natural-number coordinates to nonzero
//! fractions, with every coordinate outside the stored keys equal to zero.
//! Coordinates stand in for the basis elements of a Hamel basis; every
//! construction in this crate only ever touches finitely many of them.
//!
//! The canonical text form sorts entries by coordinate and writes each one
//! as `index:numerator/denominator`, joined with commas. The zero vector
//! serializes as the empty string. Oracles hash this form, so it is fixed.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Exact fraction in lowest terms with a positive denominator.
pub type Rational = BigRational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseQVecError {
    #[error("entry `{0}` is not of the form index:numerator/denominator")]
    Malformed(String),
    #[error("entry `{0}` has a zero denominator")]
    ZeroDenominator(String),
    #[error("entry `{0}` is not in lowest terms with a positive denominator")]
    NotCanonical(String),
    #[error("entry `{0}` has a zero value")]
    ZeroEntry(String),
    #[error("indices must be strictly increasing, found {0} after {1}")]
    Unsorted(usize, usize),
}

/// A finitely supported map from coordinates to nonzero rationals.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QVec {
    entries: BTreeMap<usize, Rational>,
}

impl QVec {
    pub fn zero() -> Self {
        Self::default()
    }

    /// The basis vector `c·e_index`.
    pub fn basis(index: usize, c: Rational) -> Self {
        let mut v = Self::zero();
        v.set(index, c);
        v
    }

    /// Builds a vector from `(index, value)` pairs. Repeated indices are
    /// summed; zero results are dropped.
    pub fn from_pairs<I, R>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (usize, R)>,
        R: Into<Rational>,
    {
        let mut v = Self::zero();
        for (i, c) in pairs {
            let cur = v.entries.remove(&i).unwrap_or_else(Rational::zero);
            v.set(i, cur + c.into());
        }
        v
    }

    /// Integer-valued shorthand used throughout the tests.
    pub fn from_ints<I: IntoIterator<Item = (usize, i64)>>(pairs: I) -> Self {
        Self::from_pairs(pairs.into_iter().map(|(i, c)| (i, BigInt::from(c))))
    }

    fn set(&mut self, index: usize, c: Rational) {
        if c.is_zero() {
            self.entries.remove(&index);
        } else {
            self.entries.insert(index, c);
        }
    }

    pub fn get(&self, index: usize) -> Rational {
        self.entries.get(&index).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.keys().copied()
    }

    pub fn support_len(&self) -> usize {
        self.entries.len()
    }

    /// Entries in increasing coordinate order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, &Rational)> + '_ {
        self.entries.iter().map(|(i, c)| (*i, c))
    }

    /// Values in increasing coordinate order, forgetting the coordinates.
    pub fn values(&self) -> impl Iterator<Item = &Rational> + '_ {
        self.entries.values()
    }

    pub fn add(&self, other: &QVec) -> QVec {
        let mut out = self.clone();
        for (i, c) in &other.entries {
            let cur = out.entries.remove(i).unwrap_or_else(Rational::zero);
            out.set(*i, cur + c);
        }
        out
    }

    pub fn scale(&self, c: &Rational) -> QVec {
        if c.is_zero() {
            return QVec::zero();
        }
        QVec {
            entries: self.entries.iter().map(|(i, v)| (*i, v * c)).collect(),
        }
    }

    /// Sum of all entries.
    pub fn total(&self) -> Rational {
        self.entries.values().fold(Rational::zero(), |acc, c| acc + c)
    }

    /// Canonical text form, see the module docs.
    pub fn canonical(&self) -> String {
        self.to_string()
    }

    pub(crate) fn from_sorted_entries(entries: BTreeMap<usize, Rational>) -> Self {
        debug_assert!(entries.values().all(|c| !c.is_zero()));
        QVec { entries }
    }
}

impl fmt::Display for QVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (n, (i, c)) in self.entries.iter().enumerate() {
            if n > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}:{}/{}", i, c.numer(), c.denom())?;
        }
        Ok(())
    }
}

impl fmt::Debug for QVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "QVec{{{}}}", self)
    }
}

impl FromStr for QVec {
    type Err = ParseQVecError;

    /// Parses the canonical form strictly: sorted indices, lowest terms,
    /// explicit denominators and no zero entries.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut entries = BTreeMap::new();
        if s.is_empty() {
            return Ok(QVec::zero());
        }
        let mut last: Option<usize> = None;
        for part in s.split(',') {
            let malformed = || ParseQVecError::Malformed(part.to_string());
            let (idx, frac) = part.split_once(':').ok_or_else(malformed)?;
            let (num, den) = frac.split_once('/').ok_or_else(malformed)?;
            if !idx.bytes().all(|b| b.is_ascii_digit()) || idx.is_empty() {
                return Err(malformed());
            }
            let idx: usize = idx.parse().map_err(|_| malformed())?;
            let num: BigInt = num.parse().map_err(|_| malformed())?;
            let den: BigInt = den.parse().map_err(|_| malformed())?;
            if den.is_zero() {
                return Err(ParseQVecError::ZeroDenominator(part.to_string()));
            }
            if num.is_zero() {
                return Err(ParseQVecError::ZeroEntry(part.to_string()));
            }
            let value = Rational::new(num.clone(), den.clone());
            if *value.numer() != num || *value.denom() != den {
                return Err(ParseQVecError::NotCanonical(part.to_string()));
            }
            if let Some(prev) = last {
                if idx <= prev {
                    return Err(ParseQVecError::Unsorted(idx, prev));
                }
            }
            last = Some(idx);
            entries.insert(idx, value);
        }
        Ok(QVec { entries })
    }
}

impl Serialize for QVec {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.canonical())
    }
}

impl<'de> Deserialize<'de> for QVec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `X + X = {a + b : a, b ∈ X}`, repetitions allowed, so `2x` is always
/// included for `x ∈ X`.
pub fn sumset<'a, I>(xs: I) -> BTreeSet<QVec>
where
    I: IntoIterator<Item = &'a QVec>,
{
    let xs: Vec<&QVec> = xs.into_iter().collect();
    let mut out = BTreeSet::new();
    for (i, a) in xs.iter().enumerate() {
        for b in &xs[i..] {
            out.insert(a.add(b));
        }
    }
    out
}

/// `1/2`, the only scalar the witness constructions need.
pub fn half() -> Rational {
    Rational::new(BigInt::one(), BigInt::from(2))
}

//! Coloring oracles `f : QVec → {0, …, r-1}` and the derived tuple
//! colorings `d_l(a) = f(s_l * a)`.
//!
//! Every oracle is a pure, deterministic function of the vector. Oracles
//! are written and parsed as descriptors of the form `kind` or
//! `kind:param,param`:
//!
//! | descriptor                 | color                                               |
//! |----------------------------|-----------------------------------------------------|
//! | `constant:C`               | always `C`                                          |
//! | `support-size`             | support size mod r                                  |
//! | `four-count`               | number of entries equal to 4, mod r                 |
//! | `contains-four`            | 0 if some entry equals 4, else 1                    |
//! | `floor-sum`                | ⌊Σ entries⌋ mod r                                   |
//! | `seeded-hash:SEED`         | (FNV-1a-64(canonical text) XOR SEED) mod r          |
//! | `profile:c0,…,cr`          | `c_l` if the values read `s_{r,l}` in order, else 0 |
//! | `table:PATH`               | lookup in a tab-separated file; missing keys error  |
//! | `order-invariant:INNER`    | INNER applied to the vector relabelled onto 0..k    |

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pattern::{self, make_string, PatternError};
use crate::qvec::{sumset, ParseQVecError, QVec};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("unmapped vector `{0}`")]
    Unmapped(QVec),
    #[error("an oracle needs at least 2 colors, got {0}")]
    TooFewColors(usize),
    #[error("color {color} is not below r = {r}")]
    ColorOutOfRange { color: usize, r: usize },
    #[error("derived coloring at level {l} takes {expected} indices, got {got}")]
    Arity { l: usize, expected: usize, got: usize },
    #[error("tuple {0:?} is not strictly increasing")]
    NotIncreasing(Vec<usize>),
    #[error("profile needs r + 1 = {expected} colors, got {got}")]
    ProfileLength { expected: usize, got: usize },
    #[error("wrapped oracle has r = {inner}, wrapper has r = {outer}")]
    WrappedColorCount { inner: usize, outer: usize },
    #[error("bad oracle descriptor `{0}`: {1}")]
    Descriptor(String, String),
    #[error("table line {line}: {reason}")]
    Table { line: usize, reason: String },
    #[error("table line {line}: {source}")]
    TableVector {
        line: usize,
        #[source]
        source: ParseQVecError,
    },
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("a witness set must be nonempty")]
    EmptyWitness,
    #[error(transparent)]
    Pattern(#[from] PatternError),
}

#[derive(Clone, PartialEq, Eq)]
pub enum OracleKind {
    Constant(usize),
    SupportSize,
    FourCount,
    ContainsFour,
    FloorSum,
    SeededHash(u64),
    Profile(Vec<usize>),
    Lookup {
        table: Arc<BTreeMap<QVec, usize>>,
        source: Option<PathBuf>,
    },
    OrderInvariant(Box<ColoringOracle>),
}

/// A deterministic total coloring of vectors with `r` colors.
#[derive(Clone, PartialEq, Eq)]
pub struct ColoringOracle {
    r: usize,
    kind: OracleKind,
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Moves the support of `v` onto `0..k`, keeping the values in order.
pub fn normalize(v: &QVec) -> QVec {
    QVec::from_sorted_entries(v.iter().enumerate().map(|(n, (_, c))| (n, c.clone())).collect())
}

impl ColoringOracle {
    pub fn new(r: usize, kind: OracleKind) -> Result<Self, OracleError> {
        if r < 2 {
            return Err(OracleError::TooFewColors(r));
        }
        match &kind {
            OracleKind::Constant(c) if *c >= r => {
                return Err(OracleError::ColorOutOfRange { color: *c, r })
            }
            OracleKind::Profile(cs) => {
                if cs.len() != r + 1 {
                    return Err(OracleError::ProfileLength {
                        expected: r + 1,
                        got: cs.len(),
                    });
                }
                if let Some(&c) = cs.iter().find(|&&c| c >= r) {
                    return Err(OracleError::ColorOutOfRange { color: c, r });
                }
            }
            OracleKind::Lookup { table, .. } => {
                if let Some(&c) = table.values().find(|&&c| c >= r) {
                    return Err(OracleError::ColorOutOfRange { color: c, r });
                }
            }
            OracleKind::OrderInvariant(inner) if inner.r != r => {
                return Err(OracleError::WrappedColorCount { inner: inner.r, outer: r })
            }
            _ => {}
        }
        Ok(Self { r, kind })
    }

    pub fn constant(r: usize, color: usize) -> Result<Self, OracleError> {
        Self::new(r, OracleKind::Constant(color))
    }

    pub fn support_size(r: usize) -> Result<Self, OracleError> {
        Self::new(r, OracleKind::SupportSize)
    }

    pub fn four_count(r: usize) -> Result<Self, OracleError> {
        Self::new(r, OracleKind::FourCount)
    }

    pub fn contains_four(r: usize) -> Result<Self, OracleError> {
        Self::new(r, OracleKind::ContainsFour)
    }

    pub fn floor_sum(r: usize) -> Result<Self, OracleError> {
        Self::new(r, OracleKind::FloorSum)
    }

    pub fn seeded_hash(r: usize, seed: u64) -> Result<Self, OracleError> {
        Self::new(r, OracleKind::SeededHash(seed))
    }

    pub fn profile(r: usize, colors: Vec<usize>) -> Result<Self, OracleError> {
        Self::new(r, OracleKind::Profile(colors))
    }

    pub fn lookup(r: usize, table: BTreeMap<QVec, usize>) -> Result<Self, OracleError> {
        Self::new(
            r,
            OracleKind::Lookup {
                table: Arc::new(table),
                source: None,
            },
        )
    }

    pub fn order_invariant(inner: ColoringOracle) -> Self {
        let r = inner.r;
        Self {
            r,
            kind: OracleKind::OrderInvariant(Box::new(inner)),
        }
    }

    /// Loads a lookup table: one `vector<TAB>color` record per line.
    pub fn from_table_file(r: usize, path: &Path) -> Result<Self, OracleError> {
        let text = std::fs::read_to_string(path).map_err(|source| OracleError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let table = parse_table(&text)?;
        Self::new(
            r,
            OracleKind::Lookup {
                table: Arc::new(table),
                source: Some(path.to_path_buf()),
            },
        )
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn kind(&self) -> &OracleKind {
        &self.kind
    }

    pub fn kind_name(&self) -> &'static str {
        match &self.kind {
            OracleKind::Constant(_) => "constant",
            OracleKind::SupportSize => "support-size",
            OracleKind::FourCount => "four-count",
            OracleKind::ContainsFour => "contains-four",
            OracleKind::FloorSum => "floor-sum",
            OracleKind::SeededHash(_) => "seeded-hash",
            OracleKind::Profile(_) => "profile",
            OracleKind::Lookup { source: None, .. } => "lookup-table",
            OracleKind::Lookup { source: Some(_), .. } => "external-table-file",
            OracleKind::OrderInvariant(_) => "order-invariant-wrapper",
        }
    }

    /// Descriptor text that [`ColoringOracle::parse`] maps back to this
    /// oracle. In-memory lookup tables have no descriptor.
    pub fn descriptor(&self) -> Option<String> {
        Some(match &self.kind {
            OracleKind::Constant(c) => format!("constant:{c}"),
            OracleKind::SupportSize => "support-size".into(),
            OracleKind::FourCount => "four-count".into(),
            OracleKind::ContainsFour => "contains-four".into(),
            OracleKind::FloorSum => "floor-sum".into(),
            OracleKind::SeededHash(seed) => format!("seeded-hash:{seed}"),
            OracleKind::Profile(cs) => format!(
                "profile:{}",
                cs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
            ),
            OracleKind::Lookup { source: Some(p), .. } => format!("table:{}", p.display()),
            OracleKind::Lookup { source: None, .. } => return None,
            OracleKind::OrderInvariant(inner) => format!("order-invariant:{}", inner.descriptor()?),
        })
    }

    /// Parses a descriptor. `default_seed` is used by a bare `seeded-hash`.
    pub fn parse(descriptor: &str, r: usize, default_seed: u64) -> Result<Self, OracleError> {
        let bad = |why: &str| OracleError::Descriptor(descriptor.to_string(), why.to_string());
        let (kind, params) = match descriptor.split_once(':') {
            Some((k, p)) => (k, Some(p)),
            None => (descriptor, None),
        };
        let no_params = |o: Result<Self, OracleError>| match params {
            Some(_) => Err(bad("takes no parameters")),
            None => o,
        };
        match kind {
            "constant" => {
                let c = params
                    .ok_or_else(|| bad("needs a color"))?
                    .parse()
                    .map_err(|_| bad("color is not a number"))?;
                Self::constant(r, c)
            }
            "support-size" => no_params(Self::support_size(r)),
            "four-count" => no_params(Self::four_count(r)),
            "contains-four" => no_params(Self::contains_four(r)),
            "floor-sum" => no_params(Self::floor_sum(r)),
            "seeded-hash" => {
                let seed = match params {
                    None => default_seed,
                    Some(p) => p.parse().map_err(|_| bad("seed is not a u64"))?,
                };
                Self::seeded_hash(r, seed)
            }
            "profile" => {
                let cs = params
                    .ok_or_else(|| bad("needs r + 1 colors"))?
                    .split(',')
                    .map(|c| c.trim().parse::<usize>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| bad("colors must be numbers"))?;
                Self::profile(r, cs)
            }
            "table" => {
                let path = params.filter(|p| !p.is_empty()).ok_or_else(|| bad("needs a path"))?;
                Self::from_table_file(r, Path::new(path))
            }
            "order-invariant" => {
                let inner = params.ok_or_else(|| bad("needs an inner descriptor"))?;
                Ok(Self::order_invariant(Self::parse(inner, r, default_seed)?))
            }
            _ => Err(bad("unknown oracle kind")),
        }
    }

    pub fn color(&self, v: &QVec) -> Result<usize, OracleError> {
        let r = self.r;
        let c = match &self.kind {
            OracleKind::Constant(c) => *c,
            OracleKind::SupportSize => v.support_len() % r,
            OracleKind::FourCount => {
                let four = BigInt::from(4).into();
                v.values().filter(|&c| *c == four).count() % r
            }
            OracleKind::ContainsFour => {
                let four = BigInt::from(4).into();
                usize::from(!v.values().any(|c| *c == four))
            }
            OracleKind::FloorSum => {
                let m = v.total().floor().to_integer().mod_floor(&BigInt::from(r));
                m.to_usize().expect("residue below r")
            }
            OracleKind::SeededHash(seed) => {
                let h = fnv1a64(v.canonical().as_bytes()) ^ seed;
                (h % r as u64) as usize
            }
            OracleKind::Profile(cs) => profile_level(v, r).map_or(0, |l| cs[l]),
            OracleKind::Lookup { table, .. } => {
                *table.get(v).ok_or_else(|| OracleError::Unmapped(v.clone()))?
            }
            OracleKind::OrderInvariant(inner) => inner.color(&normalize(v))?,
        };
        Ok(c)
    }

    /// `d_l(a) = f(s_l * a)` for a strictly increasing `a` of length `r + l`.
    pub fn derived(&self, l: usize, a: &[usize]) -> Result<usize, OracleError> {
        let s = make_string(self.r, l)?;
        if a.len() != s.len() {
            return Err(OracleError::Arity {
                l,
                expected: s.len(),
                got: a.len(),
            });
        }
        if a.windows(2).any(|w| w[0] >= w[1]) {
            return Err(OracleError::NotIncreasing(a.to_vec()));
        }
        self.color(&pattern::star_level(&s, a)?)
    }
}

fn profile_level(v: &QVec, r: usize) -> Option<usize> {
    let n = v.support_len();
    if n < r || n > 2 * r {
        return None;
    }
    let l = n - r;
    let s = make_string(r, l).ok()?;
    let matches = v
        .values()
        .zip(s.values())
        .all(|(c, &x)| c.is_integer() && *c.numer() == BigInt::from(x));
    matches.then_some(l)
}

impl fmt::Debug for ColoringOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.descriptor() {
            Some(d) => write!(f, "ColoringOracle({d}, r={})", self.r),
            None => write!(f, "ColoringOracle({}, r={})", self.kind_name(), self.r),
        }
    }
}

/// Parses the tab-separated lookup-table format.
pub fn parse_table(text: &str) -> Result<BTreeMap<QVec, usize>, OracleError> {
    let mut table = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        if raw.is_empty() {
            continue;
        }
        let (vec, color) = raw.split_once('\t').ok_or(OracleError::Table {
            line,
            reason: "missing tab separator".into(),
        })?;
        let v: QVec = vec.parse().map_err(|source| OracleError::TableVector { line, source })?;
        let c: usize = color.trim().parse().map_err(|_| OracleError::Table {
            line,
            reason: format!("`{color}` is not a color"),
        })?;
        if table.insert(v, c).is_some() {
            return Err(OracleError::Table {
                line,
                reason: "duplicate vector".into(),
            });
        }
    }
    Ok(table)
}

/// Writes a table in the format [`parse_table`] reads.
pub fn render_table(table: &BTreeMap<QVec, usize>) -> String {
    table.iter().map(|(v, c)| format!("{v}\t{c}\n")).collect()
}

/// The tuple coloring `d_l` of an oracle.
#[derive(Debug, Clone)]
pub struct DerivedColoring {
    pub oracle: ColoringOracle,
    pub level: usize,
}

impl DerivedColoring {
    pub fn new(oracle: ColoringOracle, level: usize) -> Result<Self, OracleError> {
        make_string(oracle.r(), level)?;
        Ok(Self { oracle, level })
    }

    pub fn arity(&self) -> usize {
        self.oracle.r() + self.level
    }

    pub fn color(&self, a: &[usize]) -> Result<usize, OracleError> {
        self.oracle.derived(self.level, a)
    }
}

/// A sum in `X + X` with its color.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColoredSum {
    pub vector: QVec,
    pub color: usize,
}

/// Exhaustive evidence that `X + X` is monochromatic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WitnessCertificate {
    pub x: Vec<QVec>,
    pub color: usize,
    pub sums: Vec<ColoredSum>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WitnessOutcome {
    Monochromatic(WitnessCertificate),
    /// Two sums with different colors; `sums` is the full table.
    Split {
        first: ColoredSum,
        second: ColoredSum,
        sums: Vec<ColoredSum>,
    },
}

impl WitnessOutcome {
    pub fn certificate(self) -> Option<WitnessCertificate> {
        match self {
            WitnessOutcome::Monochromatic(c) => Some(c),
            WitnessOutcome::Split { .. } => None,
        }
    }
}

/// Evaluates the oracle on every element of `X + X`.
pub fn verify_witness(o: &ColoringOracle, xs: &[QVec]) -> Result<WitnessOutcome, OracleError> {
    let sums: Vec<QVec> = sumset(xs).into_iter().collect();
    let sums = sums
        .into_par_iter()
        .map(|v| o.color(&v).map(|color| ColoredSum { vector: v, color }))
        .collect::<Result<Vec<_>, _>>()?;
    let Some(first) = sums.first().cloned() else {
        return Err(OracleError::EmptyWitness);
    };
    match sums.iter().find(|s| s.color != first.color) {
        None => Ok(WitnessOutcome::Monochromatic(WitnessCertificate {
            x: xs.to_vec(),
            color: first.color,
            sums,
        })),
        Some(second) => Ok(WitnessOutcome::Split {
            first,
            second: second.clone(),
            sums,
        }),
    }
}

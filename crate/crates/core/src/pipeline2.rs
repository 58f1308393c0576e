//! The two-color witness builder.
//!
//! From a 2-coloring `f`, tabulate `d_0, d_1, d_2` (arities 2, 3, 4) over
//! `0..N`, find one set `a_0 < … < a_{m-1} < top` homogeneous for all three
//! with colors `ρ_0, ρ_1, ρ_2`, and use whichever two of them agree:
//!
//! * `ρ_0 = ρ_1`: `x_i = ½·s_0*(a_i, top)`, so `x_i + x_j = s_1*(a_i, a_j, top)`.
//! * `ρ_0 = ρ_2`: `x_i = ½·s_0*(a_{2i}, a_{2i+1})`, so
//!   `x_i + x_j = s_2*(a_{2i}, a_{2i+1}, a_{2j}, a_{2j+1})`.
//! * `ρ_1 = ρ_2`: `x_i = ½·s_1*(a_0, a_1, a_{i+2})`, so
//!   `x_i + x_j = s_2*(a_0, a_1, a_{i+2}, a_{j+2})`.
//!
//! In each case `2x_i` is the lower-level pattern vector, hence every sum
//! gets the shared color.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::certificate::Certificate;
use crate::oracle::{verify_witness, ColoringOracle, OracleError, WitnessCertificate, WitnessOutcome};
use crate::pattern::{make_string, star_level, PatternError};
use crate::qvec::{half, QVec};
use crate::ramsey::{multi_homogeneous, Budget, HomogeneousSet, RamseyError, Search, TupleColoring};

#[derive(Debug, Error)]
pub enum Pipeline2Error {
    #[error("the two-color builder needs r = 2, got {0}")]
    NotTwoColors(usize),
    #[error("need at least 3 members below the top, got m = {0}")]
    TooFewMembers(usize),
    #[error("universe of size {n} cannot hold {need} points")]
    UniverseTooSmall { n: usize, need: usize },
    #[error("witness for {case:?} failed verification; this is a bug, not a property of the input")]
    Unsound { case: CaseTag },
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Ramsey(#[from] RamseyError),
    #[error(transparent)]
    Pattern(#[from] PatternError),
}

/// Which pair of the three level colors coincides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum CaseTag {
    /// `ρ_0 = ρ_1`
    Case1,
    /// `ρ_0 = ρ_2`
    Case2,
    /// `ρ_1 = ρ_2`
    Case3,
}

/// First applicable case in the order `Case1`, `Case2`, `Case3`. Two
/// colors always force one of them.
pub fn case_of(rho0: usize, rho1: usize, rho2: usize) -> Option<CaseTag> {
    if rho0 == rho1 {
        Some(CaseTag::Case1)
    } else if rho0 == rho2 {
        Some(CaseTag::Case2)
    } else if rho1 == rho2 {
        Some(CaseTag::Case3)
    } else {
        None
    }
}

const CASE3_NOTE: &str = "CASE3 halves the level-1 pattern (2,2,4) on (a_0, a_1, a_{i+2})";

#[derive(Debug, Clone)]
pub struct Construction2 {
    pub set: HomogeneousSet,
    /// `a_0 < … < a_{m-1}`.
    pub members: Vec<usize>,
    pub top: usize,
    pub rho: [usize; 3],
    pub case: CaseTag,
    pub witness: WitnessCertificate,
}

impl Construction2 {
    pub fn x(&self) -> &[QVec] {
        &self.witness.x
    }

    pub fn to_certificate(&self, oracle: &ColoringOracle) -> Certificate {
        let mut c = Certificate::from_witness("construct2", oracle, &self.witness);
        c.case = Some(self.case);
        c.a = Some(self.members.clone());
        c.top = Some(self.top);
        c.rho = self.rho.to_vec();
        if self.case == CaseTag::Case3 {
            c.note = Some(CASE3_NOTE.to_string());
        }
        c
    }
}

/// `d_0, d_1, d_2` tabulated over `0..n`.
pub fn derived_colorings(o: &ColoringOracle, n: usize) -> Result<[TupleColoring; 3], Pipeline2Error> {
    let tab = |l: usize| {
        TupleColoring::try_from_fn(2 + l, 2, n, |a| o.derived(l, a).map_err(Pipeline2Error::from))
    };
    Ok([tab(0)?, tab(1)?, tab(2)?])
}

/// The set `X` for a case, built on `members` and `top`.
pub fn witness_set(case: CaseTag, members: &[usize], top: usize) -> Result<Vec<QVec>, PatternError> {
    let s0 = make_string(2, 0)?;
    let s1 = make_string(2, 1)?;
    let m = members.len();
    let h = half();
    match case {
        CaseTag::Case1 => members
            .iter()
            .map(|&a| Ok(star_level(&s0, &[a, top])?.scale(&h)))
            .collect(),
        CaseTag::Case2 => (0..m / 2)
            .map(|i| Ok(star_level(&s0, &[members[2 * i], members[2 * i + 1]])?.scale(&h)))
            .collect(),
        CaseTag::Case3 => (0..m.saturating_sub(2))
            .map(|i| Ok(star_level(&s1, &[members[0], members[1], members[i + 2]])?.scale(&h)))
            .collect(),
    }
}

/// Checks the displayed sum identities of the chosen case for every pair,
/// including `2x_i`.
pub fn check_identities(c: &Construction2) -> Result<(), String> {
    let s0 = make_string(2, 0).map_err(|e| e.to_string())?;
    let s1 = make_string(2, 1).map_err(|e| e.to_string())?;
    let s2 = make_string(2, 2).map_err(|e| e.to_string())?;
    let a = &c.members;
    let x = c.x();
    let star = |s, t: &[usize]| star_level(s, t).map_err(|e| e.to_string());
    for i in 0..x.len() {
        let double = x[i].add(&x[i]);
        let expect = match c.case {
            CaseTag::Case1 => star(&s0, &[a[i], c.top])?,
            CaseTag::Case2 => star(&s0, &[a[2 * i], a[2 * i + 1]])?,
            CaseTag::Case3 => star(&s1, &[a[0], a[1], a[i + 2]])?,
        };
        if double != expect {
            return Err(format!("2x_{i} = {double}, expected {expect}"));
        }
        for j in i + 1..x.len() {
            let sum = x[i].add(&x[j]);
            let expect = match c.case {
                CaseTag::Case1 => star(&s1, &[a[i], a[j], c.top])?,
                CaseTag::Case2 => star(&s2, &[a[2 * i], a[2 * i + 1], a[2 * j], a[2 * j + 1]])?,
                CaseTag::Case3 => star(&s2, &[a[0], a[1], a[i + 2], a[j + 2]])?,
            };
            if sum != expect {
                return Err(format!("x_{i} + x_{j} = {sum}, expected {expect}"));
            }
        }
    }
    Ok(())
}

/// Builds and certifies a witness from a 2-coloring over `0..n` using a
/// homogeneous set of `m` members plus a top.
pub fn construct2(
    o: &ColoringOracle,
    n: usize,
    m: usize,
    budget: Budget,
) -> Result<Search<Construction2>, Pipeline2Error> {
    if o.r() != 2 {
        return Err(Pipeline2Error::NotTwoColors(o.r()));
    }
    if m < 3 {
        return Err(Pipeline2Error::TooFewMembers(m));
    }
    if n < m + 1 {
        return Err(Pipeline2Error::UniverseTooSmall { n, need: m + 1 });
    }
    let ds = derived_colorings(o, n)?;
    let fs: Vec<&TupleColoring> = ds.iter().collect();
    let set = match multi_homogeneous(&fs, m + 1, budget)? {
        Search::Found(set) => set.split_top(),
        Search::NotFound(nf) => return Ok(Search::NotFound(nf)),
    };
    let rho = [0, 1, 2].map(|i| set.colors[i].expect("m + 1 ≥ 4 covers every arity"));
    let case = case_of(rho[0], rho[1], rho[2]).expect("three colors from two values repeat");
    let top = set.top.expect("split_top sets a top");
    let members = set.members.clone();
    let x = witness_set(case, &members, top)?;
    let rho_case = match case {
        CaseTag::Case1 | CaseTag::Case2 => rho[0],
        CaseTag::Case3 => rho[1],
    };
    let witness = match verify_witness(o, &x)? {
        WitnessOutcome::Monochromatic(w) if w.color == rho_case => w,
        _ => return Err(Pipeline2Error::Unsound { case }),
    };
    Ok(Search::Found(Construction2 {
        set,
        members,
        top,
        rho,
        case,
        witness,
    }))
}

//! The general `r`-color witness builder on a system of `r` index families.
//!
//! The stages run in order:
//!
//! 1. [`shrink`] picks members round-robin across the families so that the
//!    `d_l` color of every index-strictly-increasing canonical tuple equals
//!    the color of its top-saturated form.
//! 2. [`last_step`] homogenizes the saturated colors over member positions,
//!    leaving one color `ρ_l` per level ([`check_levels`] confirms it).
//! 3. Two levels `l' < l` share a color, and
//!    `x_i = ½·s_{l'}*ā_i` from [`make_witness_tuples`] gives a witness with
//!    `x_i + x_j = s_l*b̄_{i,j}`.

use itertools::Itertools;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::certificate::Certificate;
use crate::oracle::{verify_witness, ColoringOracle, OracleError, WitnessCertificate, WitnessOutcome};
use crate::pattern::{make_string, star_level, validate_families, CanonicalTuple, Idx, IndexFamily, PatternError};
use crate::qvec::{half, QVec};
use crate::ramsey::{multi_homogeneous, Budget, NotFound, RamseyError, Search, TupleColoring};

#[derive(Debug, Error)]
pub enum PipelineRError {
    #[error("expected {expected} families, got {got}")]
    FamilyCount { expected: usize, got: usize },
    #[error("families must all have {expected} members, family {family} has {got}")]
    UnevenFamilies { family: usize, expected: usize, got: usize },
    #[error("universe of size {n} leaves {members} members per family, need {need}")]
    UniverseTooSmall { n: usize, members: usize, need: usize },
    #[error("need at least {need} members per family, got m = {m}")]
    TooFewMembers { m: usize, need: usize },
    #[error("need 0 <= l' < l <= r, got l' = {l_prime}, l = {l}, r = {r}")]
    BadLevels { l_prime: usize, l: usize, r: usize },
    #[error("count {count} exceeds the feasible maximum {max} for {m} members")]
    InfeasibleCount { count: usize, max: usize, m: usize },
    #[error("oracle has {oracle} colors, system expects {system}")]
    ColorCount { oracle: usize, system: usize },
    #[error("internal check failed: {0}")]
    Unsound(String),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error(transparent)]
    Ramsey(#[from] RamseyError),
}

/// `r` families in disjoint increasing coordinate blocks, all with the same
/// member count, plus the level colors once they are known.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FamilySystem {
    families: Vec<IndexFamily>,
    pub rho: Option<Vec<usize>>,
}

impl FamilySystem {
    pub fn new(families: Vec<IndexFamily>) -> Result<Self, PipelineRError> {
        validate_families(&families)?;
        let m = families.first().map_or(0, IndexFamily::len);
        if let Some((family, f)) = families.iter().enumerate().find(|(_, f)| f.len() != m) {
            return Err(PipelineRError::UnevenFamilies {
                family,
                expected: m,
                got: f.len(),
            });
        }
        Ok(Self { families, rho: None })
    }

    /// Family `i` occupies `[i·(m+2), (i+1)·(m+2))`: the first slot is
    /// unused, members fill the next `m`, the top takes the last.
    pub fn blocks(r: usize, m: usize) -> Self {
        let b = m + 2;
        let families = (0..r)
            .map(|i| {
                let start = i * b;
                IndexFamily::new((start + 1..=start + m).collect(), start + b - 1).expect("block layout is valid")
            })
            .collect();
        Self { families, rho: None }
    }

    pub fn r(&self) -> usize {
        self.families.len()
    }

    /// Members per family.
    pub fn m(&self) -> usize {
        self.families.first().map_or(0, IndexFamily::len)
    }

    pub fn families(&self) -> &[IndexFamily] {
        &self.families
    }

    /// The same positions kept in every family.
    pub fn restrict(&self, positions: &[usize]) -> Result<Self, PipelineRError> {
        let families = self
            .families
            .iter()
            .map(|f| f.restrict(positions))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { families, rho: None })
    }

    pub fn entries(&self, t: &CanonicalTuple) -> Result<Vec<usize>, PatternError> {
        t.entries(&self.families)
    }
}

/// `d_l` of a canonical tuple, with `l` read off the tuple.
pub fn tuple_color(o: &ColoringOracle, sys: &FamilySystem, t: &CanonicalTuple) -> Result<usize, PipelineRError> {
    Ok(o.derived(t.level(), &sys.entries(t)?)?)
}

/// Every index-strictly-increasing `l`-canonical tuple over families of
/// `m` members, in a fixed order.
///
/// The index is a strictly increasing finite prefix of length `p ≥ l`
/// followed by tops; each second position is a member beyond the prefix or
/// the top.
pub fn isi_tuples(r: usize, m: usize, l: usize) -> Vec<CanonicalTuple> {
    let mut out = Vec::new();
    for p in l..=r.min(m) {
        for prefix in (0..m).combinations(p) {
            let mut index: Vec<Idx> = prefix.iter().map(|&i| Idx::Fin(i)).collect();
            index.resize(r, Idx::Top);
            let start = prefix.last().map_or(0, |&x| x + 1);
            let seconds: Vec<Idx> = (start..m).map(Idx::Fin).chain([Idx::Top]).collect();
            for primed in product(&seconds, l) {
                out.push(CanonicalTuple::new(index.clone(), primed));
            }
        }
    }
    out
}

/// All `len`-tuples over `items`; one empty tuple when `len = 0`.
fn product(items: &[Idx], len: usize) -> Vec<Vec<Idx>> {
    (0..len).fold(vec![Vec::new()], |acc, _| {
        acc.into_iter()
            .flat_map(|v| {
                items.iter().map(move |&x| {
                    let mut w = v.clone();
                    w.push(x);
                    w
                })
            })
            .collect()
    })
}

/// Canonical-tuple conditions on positions alone: a finite first position
/// below its second in every doubled block, and every second position above
/// the largest finite index.
fn positions_canonical(t: &CanonicalTuple) -> bool {
    let max = t.index.iter().filter_map(|i| i.finite()).max();
    t.primed.iter().zip(&t.index).all(|(&p, &i)| {
        i.is_finite() && i < p && max.is_none_or(|mx| p > Idx::Fin(mx))
    })
}

/// Every `l`-canonical tuple whose block `k` positions come from `sets[k]`
/// (sorted, top last), not necessarily index-strictly-increasing.
pub fn tuples_from(sets: &[Vec<Idx>], l: usize) -> Vec<CanonicalTuple> {
    let choices: Vec<Vec<(Idx, Option<Idx>)>> = sets
        .iter()
        .enumerate()
        .map(|(k, s)| {
            if k < l {
                s.iter()
                    .tuple_combinations()
                    .map(|(&a, &b)| (a, Some(b)))
                    .collect()
            } else {
                s.iter().map(|&a| (a, None)).collect()
            }
        })
        .collect();
    if choices.is_empty() {
        return Vec::new();
    }
    choices
        .into_iter()
        .multi_cartesian_product()
        .map(|picks| {
            let index = picks.iter().map(|p| p.0).collect();
            let primed = picks.iter().filter_map(|p| p.1).collect();
            CanonicalTuple::new(index, primed)
        })
        .filter(positions_canonical)
        .collect()
}

/// Outcome of [`check_levels`] at one level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum LevelReport {
    Constant(usize),
    /// No qualifying tuple exists.
    Vacuous,
    /// The first tuple in enumeration order whose color differs from the
    /// first tuple's.
    Split {
        first: (CanonicalTuple, usize),
        second: (CanonicalTuple, usize),
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HomogeneityReport {
    pub levels: Vec<LevelReport>,
}

impl HomogeneityReport {
    /// `ρ_l` for every level, if all levels are constant.
    pub fn rho(&self) -> Option<Vec<usize>> {
        self.levels
            .iter()
            .map(|lv| match lv {
                LevelReport::Constant(c) => Some(*c),
                _ => None,
            })
            .collect()
    }

    pub fn first_split(&self) -> Option<usize> {
        self.levels.iter().position(|lv| matches!(lv, LevelReport::Split { .. }))
    }
}

fn colors_of(
    o: &ColoringOracle,
    sys: &FamilySystem,
    tuples: &[CanonicalTuple],
) -> Result<Vec<usize>, PipelineRError> {
    tuples.par_iter().map(|t| tuple_color(o, sys, t)).collect()
}

/// Evaluates `d_l` on every index-strictly-increasing `l`-canonical tuple
/// of the system, for every `l ≤ r`.
pub fn check_levels(o: &ColoringOracle, sys: &FamilySystem) -> Result<HomogeneityReport, PipelineRError> {
    let (r, m) = (sys.r(), sys.m());
    let mut levels = Vec::with_capacity(r + 1);
    for l in 0..=r {
        let tuples = isi_tuples(r, m, l);
        let colors = colors_of(o, sys, &tuples)?;
        let report = match colors.first() {
            None => LevelReport::Vacuous,
            Some(&c0) => match colors.iter().position(|&c| c != c0) {
                None => LevelReport::Constant(c0),
                Some(i) => LevelReport::Split {
                    first: (tuples[0].clone(), c0),
                    second: (tuples[i].clone(), colors[i]),
                },
            },
        };
        levels.push(report);
    }
    Ok(HomogeneityReport { levels })
}

/// A tuple whose color moves when its tops are saturated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SaturationViolation {
    pub tuple: CanonicalTuple,
    pub color: usize,
    pub saturated_color: usize,
}

/// Checks that every index-strictly-increasing canonical tuple has the
/// color of its top-saturated form. Returns the first violation.
pub fn verify_top_saturation(
    o: &ColoringOracle,
    sys: &FamilySystem,
) -> Result<Option<SaturationViolation>, PipelineRError> {
    let (r, m) = (sys.r(), sys.m());
    for l in 0..=r {
        let tuples = isi_tuples(r, m, l);
        let found = tuples
            .par_iter()
            .map(|t| -> Result<Option<SaturationViolation>, PipelineRError> {
                let color = tuple_color(o, sys, t)?;
                let saturated_color = tuple_color(o, sys, &t.saturated())?;
                Ok((color != saturated_color).then(|| SaturationViolation {
                    tuple: t.clone(),
                    color,
                    saturated_color,
                }))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if let Some(v) = found.into_iter().flatten().next() {
            return Ok(Some(v));
        }
    }
    Ok(None)
}

/// The least member position `α` of family `j`, above `lower` and above
/// every finite position in `sets[j]`, such that replacing the top of
/// family `j` by `α` keeps the `d_l` color of every `l`-canonical tuple from
/// `sets` that contains that top, at every level.
///
/// `sets[i]` lists positions of family `i` and must include the top.
pub fn replacement_search(
    o: &ColoringOracle,
    sys: &FamilySystem,
    j: usize,
    sets: &[Vec<Idx>],
    lower: Option<usize>,
) -> Result<Option<usize>, PipelineRError> {
    let r = sys.r();
    if sets.len() != r {
        return Err(PipelineRError::FamilyCount {
            expected: r,
            got: sets.len(),
        });
    }
    let mut constraints = Vec::new();
    for l in 0..=r {
        let tuples: Vec<CanonicalTuple> = tuples_from(sets, l)
            .into_iter()
            .filter(|t| t.contains_top_of(j))
            .collect();
        let colors = colors_of(o, sys, &tuples)?;
        constraints.extend(tuples.into_iter().zip(colors));
    }
    let floor = sets[j]
        .iter()
        .filter_map(|i| i.finite())
        .chain(lower)
        .max()
        .map_or(0, |x| x + 1);
    for alpha in floor..sys.m() {
        let keeps = constraints
            .par_iter()
            .map(|(t, c)| Ok(tuple_color(o, sys, &t.replace_top(j, Idx::Fin(alpha)))? == *c))
            .collect::<Result<Vec<bool>, PipelineRError>>()?;
        if keeps.iter().all(|&k| k) {
            return Ok(Some(alpha));
        }
    }
    Ok(None)
}

/// Where [`shrink`] ran out of candidates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ShrinkFailure {
    pub round: usize,
    pub family: usize,
    /// Positions picked so far, per family.
    pub picks: Vec<Vec<usize>>,
}

/// Picks `size` members per family, visiting the families round-robin.
///
/// In round `k` family `i` gets the least position above every earlier
/// pick that passes [`replacement_search`] against the picks made so far
/// (plus the tops). The result keeps the picked members and the original
/// tops, so positions are re-based to `0..size`.
pub fn shrink(
    o: &ColoringOracle,
    sys: &FamilySystem,
    size: usize,
) -> Result<Search<FamilySystem, ShrinkFailure>, PipelineRError> {
    let r = sys.r();
    let mut picks: Vec<Vec<usize>> = vec![Vec::new(); r];
    let mut last = None;
    for round in 0..size {
        for family in 0..r {
            let sets: Vec<Vec<Idx>> = picks
                .iter()
                .map(|p| p.iter().map(|&x| Idx::Fin(x)).chain([Idx::Top]).collect())
                .collect();
            match replacement_search(o, sys, family, &sets, last)? {
                Some(alpha) => {
                    picks[family].push(alpha);
                    last = Some(alpha);
                }
                None => return Ok(Search::NotFound(ShrinkFailure { round, family, picks })),
            }
        }
    }
    let families = sys
        .families
        .iter()
        .zip(&picks)
        .map(|(f, p)| f.restrict(p))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Search::Found(FamilySystem { families, rho: None }))
}

/// Where [`last_step`] failed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum LastStepFailure {
    /// No common homogeneous position set; `level` is the first level
    /// whose saturated coloring could not be homogenized.
    Homogenize { level: Option<usize>, search: NotFound },
    /// The trimmed system still has a non-constant level.
    Levels { level: usize },
}

/// Homogenizes the saturated colorings `g_l(i_0 < … < i_{l-1}) =
/// d_l(i_0, top | … | i_{l-1}, top | top …)` for `l = 1..=r` jointly over
/// member positions, keeps `target` common positions and records `ρ`.
pub fn last_step(
    o: &ColoringOracle,
    sys: &FamilySystem,
    target: usize,
    budget: Budget,
) -> Result<Search<FamilySystem, LastStepFailure>, PipelineRError> {
    let (r, m) = (sys.r(), sys.m());
    if target < r {
        return Err(PipelineRError::TooFewMembers { m: target, need: r });
    }
    if m < target {
        return Err(PipelineRError::TooFewMembers { m, need: target });
    }
    let gs = (1..=r)
        .map(|l| {
            TupleColoring::try_from_fn(l, o.r(), m, |ix: &[usize]| {
                let mut index: Vec<Idx> = ix.iter().map(|&i| Idx::Fin(i)).collect();
                index.resize(r, Idx::Top);
                tuple_color(o, sys, &CanonicalTuple::new(index, vec![Idx::Top; l]))
            })
        })
        .collect::<Result<Vec<_>, PipelineRError>>()?;
    let refs: Vec<&TupleColoring> = gs.iter().collect();
    let positions = match multi_homogeneous(&refs, target, budget)? {
        Search::Found(set) => set.members,
        Search::NotFound(nf) => {
            return Ok(Search::NotFound(LastStepFailure::Homogenize {
                level: nf.level.map(|k| k + 1),
                search: nf,
            }))
        }
    };
    let mut trimmed = sys.restrict(&positions)?;
    let report = check_levels(o, &trimmed)?;
    match report.rho() {
        Some(rho) => {
            trimmed.rho = Some(rho);
            Ok(Search::Found(trimmed))
        }
        None => Ok(Search::NotFound(LastStepFailure::Levels {
            level: report.first_split().unwrap_or(0),
        })),
    }
}

/// Largest feasible witness size for levels `l' < l` on `m` members.
pub fn max_count(m: usize, l_prime: usize, l: usize) -> usize {
    if m < l || l <= l_prime {
        0
    } else {
        (m - l) / (l - l_prime) + 1
    }
}

/// The tuples `ā_i` (level `l'`) and `b̄_{i,j}` (level `l`, for `i < j`).
///
/// `ā_i` takes positions `(k, top)` from families `k < l'`, position
/// `k + i(l − l')` from families `l' ≤ k < l` and the top from the rest;
/// `b̄_{i,j}` doubles the middle blocks with the `j` positions.
#[allow(clippy::type_complexity)]
pub fn make_witness_tuples(
    r: usize,
    m: usize,
    l_prime: usize,
    l: usize,
    count: usize,
) -> Result<(Vec<CanonicalTuple>, Vec<((usize, usize), CanonicalTuple)>), PipelineRError> {
    if l_prime >= l || l > r {
        return Err(PipelineRError::BadLevels { l_prime, l, r });
    }
    let max = max_count(m, l_prime, l);
    if count > max {
        return Err(PipelineRError::InfeasibleCount { count, max, m });
    }
    let stride = l - l_prime;
    let at = |k: usize, i: usize| Idx::Fin(k + i * stride);
    let a = (0..count)
        .map(|i| {
            let index = (0..r)
                .map(|k| match k {
                    k if k < l_prime => Idx::Fin(k),
                    k if k < l => at(k, i),
                    _ => Idx::Top,
                })
                .collect();
            CanonicalTuple::new(index, vec![Idx::Top; l_prime])
        })
        .collect();
    let b = (0..count)
        .tuple_combinations()
        .map(|(i, j)| {
            let index = (0..r)
                .map(|k| match k {
                    k if k < l_prime => Idx::Fin(k),
                    k if k < l => at(k, i),
                    _ => Idx::Top,
                })
                .collect();
            let primed = (0..l).map(|k| if k < l_prime { Idx::Top } else { at(k, j) }).collect();
            ((i, j), CanonicalTuple::new(index, primed))
        })
        .collect();
    Ok((a, b))
}

/// The pair `l' < l` with `ρ_{l'} = ρ_l` giving the largest witness on
/// `m` members; ties go to the lexicographically least pair.
pub fn choose_levels(rho: &[usize], m: usize) -> Option<(usize, usize)> {
    let mut best: Option<((usize, usize), usize)> = None;
    for (lp, l) in (0..rho.len()).tuple_combinations() {
        if rho[lp] == rho[l] {
            let c = max_count(m, lp, l);
            if best.is_none_or(|(_, bc)| c > bc) {
                best = Some(((lp, l), c));
            }
        }
    }
    best.map(|(p, _)| p)
}

#[derive(Debug, Clone)]
pub struct ConstructionR {
    pub system: FamilySystem,
    pub rho: Vec<usize>,
    pub l_prime: usize,
    pub l: usize,
    pub a: Vec<CanonicalTuple>,
    pub b: Vec<((usize, usize), CanonicalTuple)>,
    pub witness: WitnessCertificate,
}

impl ConstructionR {
    pub fn x(&self) -> &[QVec] {
        &self.witness.x
    }

    pub fn to_certificate(&self, oracle: &ColoringOracle) -> Certificate {
        let mut c = Certificate::from_witness("construct-r", oracle, &self.witness);
        c.families = Some(self.system.families.clone());
        c.rho_levels = Some(self.rho.clone());
        c.l_prime = Some(self.l_prime);
        c.l = Some(self.l);
        c
    }
}

/// Checks `½·s_{l'}*ā_i + ½·s_{l'}*ā_j = s_l*b̄_{i,j}` for every emitted
/// pair, and `2x_i = s_{l'}*ā_i`.
pub fn check_identities(c: &ConstructionR) -> Result<(), String> {
    let r = c.system.r();
    let sl = make_string(r, c.l).map_err(|e| e.to_string())?;
    let slp = make_string(r, c.l_prime).map_err(|e| e.to_string())?;
    let x = c.x();
    let vec_of = |s, t: &CanonicalTuple| {
        c.system
            .entries(t)
            .and_then(|e| star_level(s, &e))
            .map_err(|e| e.to_string())
    };
    for (i, a) in c.a.iter().enumerate() {
        let v = vec_of(&slp, a)?;
        if x[i].add(&x[i]) != v {
            return Err(format!("2x_{i} differs from s_{}*{a}", c.l_prime));
        }
    }
    for ((i, j), b) in &c.b {
        if x[*i].add(&x[*j]) != vec_of(&sl, b)? {
            return Err(format!("x_{i} + x_{j} differs from s_{}*{b}", c.l));
        }
    }
    Ok(())
}

/// Which stage of [`construct_r`] gave up.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "stage", rename_all = "kebab-case")]
pub enum StageFailure {
    Shrink(ShrinkFailure),
    LastStep(LastStepFailure),
    /// A supplied system is not level-homogeneous.
    Levels { level: usize },
}

/// Builds the witness on a system whose levels are already constant.
pub fn construct_from_system(
    o: &ColoringOracle,
    sys: &FamilySystem,
) -> Result<Search<ConstructionR, StageFailure>, PipelineRError> {
    let r = sys.r();
    if o.r() != r {
        return Err(PipelineRError::ColorCount { oracle: o.r(), system: r });
    }
    let report = check_levels(o, sys)?;
    let Some(rho) = report.rho() else {
        return Ok(Search::NotFound(StageFailure::Levels {
            level: report.first_split().unwrap_or(0),
        }));
    };
    let m = sys.m();
    let (l_prime, l) = choose_levels(&rho, m).expect("r + 1 levels in r colors repeat");
    let count = max_count(m, l_prime, l);
    if count == 0 {
        return Err(PipelineRError::TooFewMembers { m, need: l });
    }
    let (a, b) = make_witness_tuples(r, m, l_prime, l, count)?;
    let s = make_string(r, l_prime)?;
    let h = half();
    let x = a
        .iter()
        .map(|t| Ok(star_level(&s, &sys.entries(t)?)?.scale(&h)))
        .collect::<Result<Vec<_>, PatternError>>()?;
    let witness = match verify_witness(o, &x)? {
        WitnessOutcome::Monochromatic(w) if w.color == rho[l] => w,
        _ => {
            return Err(PipelineRError::Unsound(format!(
                "witness on levels ({l_prime}, {l}) is not monochromatic"
            )))
        }
    };
    let mut system = sys.clone();
    system.rho = Some(rho.clone());
    Ok(Search::Found(ConstructionR {
        system,
        rho,
        l_prime,
        l,
        a,
        b,
        witness,
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ConstructOptions {
    /// Members kept per family by [`shrink`]; defaults to `m + 2`.
    pub shrink_size: Option<usize>,
    pub budget: Budget,
}

impl Default for ConstructOptions {
    fn default() -> Self {
        Self {
            shrink_size: None,
            budget: Budget::UNLIMITED,
        }
    }
}

/// Lays out `r` blocks of `⌊n/r⌋` coordinates, shrinks, homogenizes down to
/// `m` members per family and builds the witness.
pub fn construct_r(
    o: &ColoringOracle,
    n: usize,
    m: usize,
    opts: ConstructOptions,
) -> Result<Search<ConstructionR, StageFailure>, PipelineRError> {
    let r = o.r();
    if m < r {
        return Err(PipelineRError::TooFewMembers { m, need: r });
    }
    let size = opts.shrink_size.unwrap_or(m + 2).max(m);
    let members = (n / r).saturating_sub(2);
    if members < size {
        return Err(PipelineRError::UniverseTooSmall { n, members, need: size });
    }
    let sys = FamilySystem::blocks(r, members);
    let shrunk = match shrink(o, &sys, size)? {
        Search::Found(s) => s,
        Search::NotFound(f) => return Ok(Search::NotFound(StageFailure::Shrink(f))),
    };
    if let Some(v) = verify_top_saturation(o, &shrunk)? {
        return Err(PipelineRError::Unsound(format!(
            "shrink output: {} has color {} but its saturation has {}",
            v.tuple, v.color, v.saturated_color
        )));
    }
    let trimmed = match last_step(o, &shrunk, m, opts.budget)? {
        Search::Found(s) => s,
        Search::NotFound(f) => return Ok(Search::NotFound(StageFailure::LastStep(f))),
    };
    construct_from_system(o, &trimmed)
}

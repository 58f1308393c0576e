//! Homogeneous sets for colorings of increasing tuples.
//!
//! [`brute_homogeneous`] and [`multi_homogeneous`] are exhaustive
//! backtracking searches returning the lexicographically least answer.
//! [`greedy_end_homogeneous`] first grows a set on which replacing the last
//! coordinate of a tuple by a fixed top element keeps its color, then runs
//! the exhaustive search on the induced coloring of shorter tuples.
//!
//! Every returned set is re-checked by [`homogeneous_color`], which walks
//! all tuples with `itertools` and shares nothing with the searches.

use itertools::Itertools;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RamseyError {
    #[error("color {color} of tuple {tuple:?} is not below k = {k}")]
    ColorOutOfRange { tuple: Vec<usize>, color: usize, k: usize },
    #[error("target size {m} is below the arity {n}")]
    TargetBelowArity { m: usize, n: usize },
    #[error("end-homogenization needs arity at least 2, got {0}")]
    ArityTooSmall(usize),
    #[error("colorings live on different universes ({0} vs {1})")]
    UniverseMismatch(usize, usize),
    #[error("index {index} is outside the universe of size {n}")]
    OutOfUniverse { index: usize, n: usize },
    #[error("no colorings given")]
    Empty,
    #[error("search returned a set that fails verification: {0:?}")]
    VerificationFailed(Vec<usize>),
}

/// A coloring of the strictly increasing `arity`-tuples from `0..universe`,
/// stored as a dense table in colex order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TupleColoring {
    arity: usize,
    colors: usize,
    universe: usize,
    binom: Vec<Vec<usize>>,
    table: Vec<u32>,
}

fn binomials(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut b = vec![vec![0usize; k + 2]; n + 1];
    for row in b.iter_mut() {
        row[0] = 1;
    }
    for i in 1..=n {
        for j in 1..=k + 1 {
            b[i][j] = b[i - 1][j - 1] + b[i - 1][j];
        }
    }
    b
}

impl TupleColoring {
    /// Tabulates `f` on every increasing tuple.
    pub fn try_from_fn<E, F>(arity: usize, colors: usize, universe: usize, f: F) -> Result<Self, E>
    where
        F: Fn(&[usize]) -> Result<usize, E> + Sync,
        E: From<RamseyError> + Send,
    {
        let binom = binomials(universe, arity);
        let tuples: Vec<Vec<usize>> = (0..universe).combinations(arity).collect();
        let evaluated = tuples
            .par_iter()
            .map(|t| {
                let c = f(t)?;
                if c >= colors {
                    return Err(E::from(RamseyError::ColorOutOfRange {
                        tuple: t.clone(),
                        color: c,
                        k: colors,
                    }));
                }
                Ok(c as u32)
            })
            .collect::<Result<Vec<u32>, E>>()?;
        let mut table = vec![0u32; tuples.len()];
        let mut out = Self {
            arity,
            colors,
            universe,
            binom,
            table: Vec::new(),
        };
        for (t, c) in tuples.iter().zip(evaluated) {
            table[out.rank(t)] = c;
        }
        out.table = table;
        Ok(out)
    }

    pub fn from_fn<F>(arity: usize, colors: usize, universe: usize, f: F) -> Result<Self, RamseyError>
    where
        F: Fn(&[usize]) -> usize + Sync,
    {
        Self::try_from_fn(arity, colors, universe, |t| Ok::<_, RamseyError>(f(t)))
    }

    pub fn constant(arity: usize, colors: usize, universe: usize, color: usize) -> Result<Self, RamseyError> {
        Self::from_fn(arity, colors, universe, |_| color)
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn colors(&self) -> usize {
        self.colors
    }

    pub fn universe(&self) -> usize {
        self.universe
    }

    fn rank(&self, t: &[usize]) -> usize {
        t.iter().enumerate().map(|(i, &c)| self.binom[c][i + 1]).sum()
    }

    /// Color of a strictly increasing tuple of length `arity`.
    pub fn color(&self, t: &[usize]) -> usize {
        debug_assert_eq!(t.len(), self.arity);
        debug_assert!(t.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(t.last().is_none_or(|&x| x < self.universe));
        self.table[self.rank(t)] as usize
    }

    /// The coloring `a ↦ f(a ∪ {top})` of `(arity - 1)`-tuples below `top`.
    pub fn with_top(&self, top: usize) -> Result<TupleColoring, RamseyError> {
        if self.arity == 0 {
            return Err(RamseyError::ArityTooSmall(0));
        }
        if top >= self.universe {
            return Err(RamseyError::OutOfUniverse {
                index: top,
                n: self.universe,
            });
        }
        TupleColoring::from_fn(self.arity - 1, self.colors, top, |a| {
            let mut t = a.to_vec();
            t.push(top);
            self.color(&t)
        })
    }

    /// The coloring of tuples of positions into `subset` (which must be
    /// strictly increasing).
    pub fn restrict(&self, subset: &[usize]) -> Result<TupleColoring, RamseyError> {
        if let Some(&bad) = subset.iter().find(|&&x| x >= self.universe) {
            return Err(RamseyError::OutOfUniverse {
                index: bad,
                n: self.universe,
            });
        }
        TupleColoring::from_fn(self.arity, self.colors, subset.len(), |p| {
            let t: Vec<usize> = p.iter().map(|&i| subset[i]).collect();
            self.color(&t)
        })
    }
}

/// A set on which every covered coloring is constant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HomogeneousSet {
    pub members: Vec<usize>,
    pub top: Option<usize>,
    /// One constant color per covered coloring; `None` when the set is too
    /// small to contain a tuple of that arity.
    pub colors: Vec<Option<usize>>,
    /// Arities of the covered colorings, in order.
    pub arities: Vec<usize>,
}

impl HomogeneousSet {
    /// Members together with the top, increasing.
    pub fn all(&self) -> Vec<usize> {
        let mut v = self.members.clone();
        v.extend(self.top);
        v
    }

    /// Designates the largest member as the top.
    pub fn split_top(mut self) -> Self {
        if self.top.is_none() {
            self.top = self.members.pop();
        }
        self
    }
}

/// Node budget for backtracking. `None` explores everything.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Budget(pub Option<u64>);

impl Budget {
    pub const UNLIMITED: Budget = Budget(None);

    /// Full exhaustion for universes up to 24 and arity up to 4, ten
    /// million nodes beyond that.
    pub fn default_for(universe: usize, arity: usize) -> Budget {
        if universe <= 24 && arity <= 4 {
            Budget(None)
        } else {
            Budget(Some(10_000_000))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NotFound {
    /// False when the budget ran out before the space was exhausted.
    pub exhaustive: bool,
    pub nodes: u64,
    /// For joint searches, the first coloring index at which the prefix
    /// `fs[..=level]` already has no homogeneous set.
    pub level: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Search<T, F = NotFound> {
    Found(T),
    NotFound(F),
}

impl<T, F> Search<T, F> {
    pub fn found(self) -> Option<T> {
        match self {
            Search::Found(t) => Some(t),
            Search::NotFound(_) => None,
        }
    }

    pub fn is_found(&self) -> bool {
        matches!(self, Search::Found(_))
    }
}

/// Returns the common color of `f` on all increasing tuples drawn from
/// `set`, `Ok(None)` if there are no such tuples, or two differently
/// colored tuples.
pub fn homogeneous_color(
    f: &TupleColoring,
    set: &[usize],
) -> Result<Option<usize>, (Vec<usize>, Vec<usize>)> {
    let mut sorted = set.to_vec();
    sorted.sort_unstable();
    let mut first: Option<(Vec<usize>, usize)> = None;
    for t in sorted.iter().copied().combinations(f.arity()) {
        let c = f.color(&t);
        match &first {
            None => first = Some((t, c)),
            Some((t0, c0)) if *c0 != c => return Err((t0.clone(), t)),
            Some(_) => {}
        }
    }
    Ok(first.map(|(_, c)| c))
}

/// For every increasing `x` from `members`, `f(x) = f(x` with its last
/// coordinate replaced by `top)`.
pub fn end_replacement_holds(f: &TupleColoring, members: &[usize], top: usize) -> bool {
    if f.arity() == 0 {
        return true;
    }
    members.iter().copied().combinations(f.arity()).all(|x| {
        let mut y = x.clone();
        *y.last_mut().expect("arity > 0") = top;
        f.color(&x) == f.color(&y)
    })
}

struct Joint<'a> {
    fs: &'a [&'a TupleColoring],
    candidates: &'a [usize],
    size: usize,
    budget: Budget,
    nodes: u64,
    out_of_budget: bool,
}

impl Joint<'_> {
    /// Checks the tuples that gain `x` as their maximum and updates
    /// `colors`; returns false on a clash.
    fn admits(&self, set: &[usize], x: usize, colors: &mut [Option<usize>]) -> bool {
        for (f, slot) in self.fs.iter().zip(colors.iter_mut()) {
            let n = f.arity();
            if n == 0 || set.len() < n - 1 {
                continue;
            }
            for ys in set.iter().copied().combinations(n - 1) {
                let mut t = ys;
                t.push(x);
                let c = f.color(&t);
                match slot {
                    None => *slot = Some(c),
                    Some(c0) if *c0 != c => return false,
                    Some(_) => {}
                }
            }
        }
        true
    }

    fn dfs(&mut self, set: &mut Vec<usize>, from: usize, colors: &[Option<usize>]) -> bool {
        if set.len() == self.size {
            return true;
        }
        let need = self.size - set.len();
        let mut p = from;
        while p + need <= self.candidates.len() {
            if let Some(limit) = self.budget.0 {
                if self.nodes >= limit {
                    self.out_of_budget = true;
                    return false;
                }
            }
            self.nodes += 1;
            let x = self.candidates[p];
            let mut next = colors.to_vec();
            if self.admits(set, x, &mut next) {
                set.push(x);
                if self.dfs(set, p + 1, &next) {
                    return true;
                }
                set.pop();
                if self.out_of_budget {
                    return false;
                }
            }
            p += 1;
        }
        false
    }
}

/// Lexicographically least `size`-subset of `candidates` (increasing) on
/// which every coloring in `fs` is constant.
fn joint_search(
    fs: &[&TupleColoring],
    candidates: &[usize],
    size: usize,
    budget: Budget,
) -> (Option<(Vec<usize>, Vec<Option<usize>>)>, bool, u64) {
    let mut colors: Vec<Option<usize>> = fs
        .iter()
        .map(|f| (f.arity() == 0).then(|| f.color(&[])))
        .collect();
    let mut j = Joint {
        fs,
        candidates,
        size,
        budget,
        nodes: 0,
        out_of_budget: false,
    };
    let mut set = Vec::with_capacity(size);
    if j.dfs(&mut set, 0, &colors.clone()) {
        // recompute the colors along the found set
        let mut acc: Vec<usize> = Vec::new();
        for &x in &set {
            let ok = j.admits(&acc, x, &mut colors);
            debug_assert!(ok);
            acc.push(x);
        }
        (Some((set, colors)), true, j.nodes)
    } else {
        (None, !j.out_of_budget, j.nodes)
    }
}

fn check_target(f: &TupleColoring, m: usize) -> Result<(), RamseyError> {
    if m < f.arity() {
        return Err(RamseyError::TargetBelowArity { m, n: f.arity() });
    }
    Ok(())
}

fn verified(fs: &[&TupleColoring], set: HomogeneousSet) -> Result<HomogeneousSet, RamseyError> {
    let all = set.all();
    for (f, expect) in fs.iter().zip(&set.colors) {
        match homogeneous_color(f, &all) {
            Ok(c) if c == *expect => {}
            _ => return Err(RamseyError::VerificationFailed(all)),
        }
    }
    Ok(set)
}

/// Lexicographically least `m`-subset of the universe on which `f` is
/// constant.
pub fn brute_homogeneous(
    f: &TupleColoring,
    m: usize,
    budget: Budget,
) -> Result<Search<HomogeneousSet>, RamseyError> {
    multi_homogeneous(&[f], m, budget)
}

/// One `m`-set homogeneous for every coloring at once.
///
/// The joint search is exhaustive, so its answer is the least set that
/// survives restriction to each coloring in turn. On failure the prefixes
/// `fs[..=0]`, `fs[..=1]`, … are searched again to name the first level
/// that runs out of candidates.
pub fn multi_homogeneous(
    fs: &[&TupleColoring],
    m: usize,
    budget: Budget,
) -> Result<Search<HomogeneousSet>, RamseyError> {
    let first = fs.first().ok_or(RamseyError::Empty)?;
    for f in fs {
        if f.universe() != first.universe() {
            return Err(RamseyError::UniverseMismatch(first.universe(), f.universe()));
        }
        check_target(f, m)?;
    }
    let candidates: Vec<usize> = (0..first.universe()).collect();
    let (found, exhaustive, nodes) = joint_search(fs, &candidates, m, budget);
    if let Some((members, colors)) = found {
        let set = HomogeneousSet {
            members,
            top: None,
            colors,
            arities: fs.iter().map(|f| f.arity()).collect(),
        };
        return Ok(Search::Found(verified(fs, set)?));
    }
    let mut level = None;
    if exhaustive {
        for k in 0..fs.len() {
            let (hit, done, _) = joint_search(&fs[..=k], &candidates, m, budget);
            if hit.is_none() && done {
                level = Some(k);
                break;
            }
        }
    }
    Ok(Search::NotFound(NotFound {
        exhaustive,
        nodes,
        level,
    }))
}

/// Why [`greedy_end_homogeneous`] failed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GreedyFailure {
    pub exhaustive: bool,
    pub nodes: u64,
    /// Largest end-homogeneous set reached, with its top.
    pub top: Option<usize>,
    pub deepest: Vec<usize>,
    /// Constraints `(y, f(y ∪ {top}))` over `(n-1)`-subsets of `deepest`
    /// that no further candidate satisfied.
    pub constraints: Vec<(Vec<usize>, usize)>,
}

struct EndSearch<'a> {
    f: &'a TupleColoring,
    g: TupleColoring,
    top: usize,
    m: usize,
    budget: Budget,
    nodes: u64,
    out_of_budget: bool,
    deepest: Vec<usize>,
}

impl EndSearch<'_> {
    fn extends(&self, set: &[usize], alpha: usize) -> bool {
        let n = self.f.arity();
        if set.len() < n - 1 {
            return true;
        }
        set.iter().copied().combinations(n - 1).all(|y| {
            let mut a = y.clone();
            a.push(alpha);
            let mut b = y;
            b.push(self.top);
            self.f.color(&a) == self.f.color(&b)
        })
    }

    fn maximal(&self, set: &[usize]) -> bool {
        (0..self.top).filter(|a| !set.contains(a)).all(|a| {
            let mut bigger = set.to_vec();
            bigger.push(a);
            bigger.sort_unstable();
            !end_replacement_holds(self.f, &bigger, self.top)
        })
    }

    /// Include-first DFS over end-homogeneous sets; each maximal one is
    /// handed to the exhaustive search for the induced coloring.
    fn dfs(&mut self, set: &mut Vec<usize>, next: usize) -> Option<(Vec<usize>, usize)> {
        if set.len() + (self.top - next) < self.m {
            return None;
        }
        if let Some(limit) = self.budget.0 {
            if self.nodes >= limit {
                self.out_of_budget = true;
                return None;
            }
        }
        self.nodes += 1;
        if set.len() > self.deepest.len() {
            self.deepest = set.clone();
        }
        if next == self.top {
            if !self.maximal(set) {
                return None;
            }
            let g = self.g.restrict(set).ok()?;
            let positions: Vec<usize> = (0..set.len()).collect();
            let (hit, done, nodes) = joint_search(&[&g], &positions, self.m, self.budget);
            self.nodes += nodes;
            if !done {
                self.out_of_budget = true;
            }
            return hit.map(|(pos, colors)| {
                let members = pos.iter().map(|&p| set[p]).collect();
                (members, colors[0].expect("m exceeds the arity of g"))
            });
        }
        if self.extends(set, next) {
            set.push(next);
            let hit = self.dfs(set, next + 1);
            set.pop();
            if hit.is_some() || self.out_of_budget {
                return hit;
            }
        }
        self.dfs(set, next + 1)
    }

    fn constraints(&self) -> Vec<(Vec<usize>, usize)> {
        let n = self.f.arity();
        self.deepest
            .iter()
            .copied()
            .combinations(n - 1)
            .map(|y| {
                let mut b = y.clone();
                b.push(self.top);
                (y, self.f.color(&b))
            })
            .collect()
    }
}

/// Greedy end-homogenization followed by an exhaustive search below the
/// chosen top. Tops are tried from `N - 1` downwards; the first top (in
/// that order) that succeeds wins, independently of scheduling.
pub fn greedy_end_homogeneous(
    f: &TupleColoring,
    m: usize,
    budget: Budget,
) -> Result<Search<HomogeneousSet, GreedyFailure>, RamseyError> {
    if f.arity() < 2 {
        return Err(RamseyError::ArityTooSmall(f.arity()));
    }
    check_target(f, m + 1)?;
    let tops: Vec<usize> = (m..f.universe()).rev().collect();
    let runs: Vec<Result<Result<(Vec<usize>, usize, usize), EndSearchTrace>, RamseyError>> = tops
        .par_iter()
        .map(|&top| {
            let mut s = EndSearch {
                f,
                g: f.with_top(top)?,
                top,
                m,
                budget,
                nodes: 0,
                out_of_budget: false,
                deepest: Vec::new(),
            };
            let hit = s.dfs(&mut Vec::new(), 0);
            Ok(match hit {
                Some((members, color)) => Ok((members, top, color)),
                None => Err(EndSearchTrace {
                    top,
                    exhaustive: !s.out_of_budget,
                    nodes: s.nodes,
                    constraints: s.constraints(),
                    deepest: s.deepest,
                }),
            })
        })
        .collect();
    let mut failure = GreedyFailure {
        exhaustive: true,
        nodes: 0,
        top: None,
        deepest: Vec::new(),
        constraints: Vec::new(),
    };
    for run in runs {
        match run? {
            Ok((members, top, color)) => {
                let set = HomogeneousSet {
                    members,
                    top: Some(top),
                    colors: vec![Some(color)],
                    arities: vec![f.arity()],
                };
                if !end_replacement_holds(f, &set.members, top) {
                    return Err(RamseyError::VerificationFailed(set.all()));
                }
                return Ok(Search::Found(verified(&[f], set)?));
            }
            Err(trace) => {
                failure.exhaustive &= trace.exhaustive;
                failure.nodes += trace.nodes;
                if failure.top.is_none() || trace.deepest.len() > failure.deepest.len() {
                    failure.top = Some(trace.top);
                    failure.deepest = trace.deepest;
                    failure.constraints = trace.constraints;
                }
            }
        }
    }
    Ok(Search::NotFound(failure))
}

struct EndSearchTrace {
    top: usize,
    exhaustive: bool,
    nodes: u64,
    deepest: Vec<usize>,
    constraints: Vec<(Vec<usize>, usize)>,
}

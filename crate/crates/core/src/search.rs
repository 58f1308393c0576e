//! Finite searches over colorings of initial segments of ℕ.
//!
//! A coloring of `{1..L}` is *bad* for `k` when no `X ⊆ {1..⌊L/2⌋}` with
//! `|X| = k` has a monochromatic sumset. [`threshold_scan`] decides for
//! each `M` whether every coloring is good (FORCED) or exhibits a bad one
//! (ESCAPABLE), using a backtracking search with colors introduced in
//! first-use order and a check at every even prefix length.

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ramsey::Budget;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("need at least 2 colors, got {0}")]
    TooFewColors(usize),
    #[error("color {color} at {at} is not below r = {r}")]
    ColorOutOfRange { at: usize, color: usize, r: usize },
    #[error("line {line}: expected `i:color`, got {text:?}")]
    ColoringSyntax { line: usize, text: String },
    #[error("coloring lines must list 1, 2, 3, … in order; line {line} has {got}")]
    ColoringOrder { line: usize, got: usize },
    #[error("checkpoint is for {found}, this run is {expected}")]
    CheckpointMismatch { expected: String, found: String },
    #[error("checkpoint prefix {0:?} is not a valid search state")]
    CheckpointState(Vec<u8>),
    #[error("monotonicity violated: M = {forced} is FORCED but the bad coloring for M = {escapable} restricts to a bad coloring of {{1..{forced}}}")]
    Monotonicity { forced: usize, escapable: usize },
    #[error("FORCED verdict at M = {m} contradicted by a sampled coloring")]
    SpotCheck { m: usize, coloring: NatColoring },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

/// How `M` bounds the search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Finitization {
    /// Colorings of `{1..M}`, `X ⊆ {1..⌊M/2⌋}`.
    #[default]
    SumsWithin,
    /// `X ⊆ {1..M}`, colorings of `{1..2M}`.
    ElementsWithin,
}

impl Finitization {
    /// Length of the colored segment for bound `m`.
    pub fn coloring_len(self, m: usize) -> usize {
        match self {
            Finitization::SumsWithin => m,
            Finitization::ElementsWithin => 2 * m,
        }
    }
}

impl FromStr for Finitization {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sums-within" => Ok(Finitization::SumsWithin),
            "elements-within" => Ok(Finitization::ElementsWithin),
            _ => Err(format!("unknown finitization {s:?} (sums-within, elements-within)")),
        }
    }
}

impl fmt::Display for Finitization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Finitization::SumsWithin => "sums-within",
            Finitization::ElementsWithin => "elements-within",
        })
    }
}

/// Colors of `1..=len`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NatColoring {
    r: usize,
    colors: Vec<u8>,
}

impl NatColoring {
    pub fn new(r: usize, colors: Vec<u8>) -> Result<Self, SearchError> {
        if r < 2 {
            return Err(SearchError::TooFewColors(r));
        }
        if let Some((i, &c)) = colors.iter().enumerate().find(|(_, &c)| c as usize >= r) {
            return Err(SearchError::ColorOutOfRange {
                at: i + 1,
                color: c as usize,
                r,
            });
        }
        Ok(Self { r, colors })
    }

    pub fn constant(r: usize, len: usize, color: u8) -> Result<Self, SearchError> {
        Self::new(r, vec![color; len])
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn len(&self) -> usize {
        self.colors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.colors.is_empty()
    }

    /// Color of `n ≥ 1`.
    pub fn color(&self, n: usize) -> usize {
        self.colors[n - 1] as usize
    }

    pub fn colors(&self) -> &[u8] {
        &self.colors
    }

    /// The coloring of `1..=len`.
    pub fn restrict(&self, len: usize) -> Self {
        Self {
            r: self.r,
            colors: self.colors[..len.min(self.colors.len())].to_vec(),
        }
    }

    /// One `i:color` line per point.
    pub fn render(&self) -> String {
        self.colors
            .iter()
            .enumerate()
            .map(|(i, c)| format!("{}:{}\n", i + 1, c))
            .collect()
    }

    pub fn parse(text: &str, r: usize) -> Result<Self, SearchError> {
        let mut colors = Vec::new();
        for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let bad = || SearchError::ColoringSyntax {
                line: n + 1,
                text: line.to_string(),
            };
            let (i, c) = line.trim().split_once(':').ok_or_else(bad)?;
            let i: usize = i.parse().map_err(|_| bad())?;
            let c: u8 = c.parse().map_err(|_| bad())?;
            if i != colors.len() + 1 {
                return Err(SearchError::ColoringOrder { line: n + 1, got: i });
            }
            colors.push(c);
        }
        Self::new(r, colors)
    }
}

/// Extends `chosen` (increasing, monochromatic so far in `color`) with
/// candidates from `from..=hi` until it has `k` elements.
fn extend_mono(c: &[u8], chosen: &mut Vec<usize>, color: u8, from: usize, hi: usize, k: usize) -> bool {
    if chosen.len() == k {
        return true;
    }
    for x in from..=hi {
        if hi - x + 1 < k - chosen.len() {
            break;
        }
        if c[2 * x - 1] != color || chosen.iter().any(|&y| c[x + y - 1] != color) {
            continue;
        }
        chosen.push(x);
        if extend_mono(c, chosen, color, x + 1, hi, k) {
            return true;
        }
        chosen.pop();
    }
    false
}

/// The lexicographically least `X ⊆ {1..⌊L/2⌋}` of size `k` whose sumset is
/// monochromatic, if any.
pub fn has_mono_sumset(c: &NatColoring, k: usize) -> Option<Vec<usize>> {
    let hi = c.len() / 2;
    if k == 0 {
        return Some(Vec::new());
    }
    let mut chosen = Vec::with_capacity(k);
    for x in 1..=hi {
        if hi - x + 1 < k {
            break;
        }
        chosen.clear();
        chosen.push(x);
        if extend_mono(&c.colors, &mut chosen, c.colors[2 * x - 1], x + 1, hi, k) {
            return Some(chosen);
        }
    }
    None
}

/// Whether some size-`k` monochromatic-sumset set has largest element `t`;
/// needs colors of `1..=2t`.
fn mono_with_max(c: &[u8], t: usize, k: usize) -> bool {
    let color = c[2 * t - 1];
    if k == 1 {
        return true;
    }
    let mut chosen = Vec::with_capacity(k);
    // pick the k - 1 smaller elements below t; t joins last
    fn go(c: &[u8], chosen: &mut Vec<usize>, color: u8, from: usize, t: usize, k: usize) -> bool {
        if chosen.len() == k - 1 {
            return chosen.iter().all(|&y| c[y + t - 1] == color);
        }
        for x in from..t {
            if t - x < k - 1 - chosen.len() {
                break;
            }
            if c[2 * x - 1] != color || c[x + t - 1] != color || chosen.iter().any(|&y| c[x + y - 1] != color) {
                continue;
            }
            chosen.push(x);
            if go(c, chosen, color, x + 1, t, k) {
                return true;
            }
            chosen.pop();
        }
        false
    }
    go(c, &mut chosen, color, 1, t, k)
}

/// Why [`find_bad_coloring`] stopped without a coloring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SearchExhausted {
    /// True when the whole space was explored; false when the budget ran
    /// out.
    pub exhaustive: bool,
    pub nodes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BadSearch {
    Found(NatColoring),
    NotFound(SearchExhausted),
}

/// Resumable state of [`find_bad_coloring`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub k: usize,
    pub r: usize,
    /// Length of the colored segment.
    pub len: usize,
    /// Current assignment of `1..=prefix.len()`; every prefix of it is
    /// free of completed monochromatic sets.
    pub prefix: Vec<u8>,
    pub nodes: u64,
}

impl Checkpoint {
    fn describe(&self) -> String {
        format!("k={} r={} len={}", self.k, self.r, self.len)
    }

    pub fn load(path: &Path) -> Result<Self, SearchError> {
        let text = fs::read_to_string(path).map_err(|source| SearchError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| SearchError::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Writes through a temporary file so a crash never leaves a torn
    /// checkpoint.
    pub fn save(&self, path: &Path) -> Result<(), SearchError> {
        let io_err = |source| SearchError::Io {
            path: path.to_path_buf(),
            source,
        };
        let tmp = path.with_extension("tmp");
        let text = serde_json::to_string_pretty(self).expect("checkpoint serializes");
        fs::write(&tmp, text).map_err(io_err)?;
        fs::rename(&tmp, path).map_err(io_err)
    }
}

/// Periodic checkpointing for [`find_bad_coloring`].
#[derive(Debug, Clone)]
pub struct CheckpointPolicy {
    pub path: PathBuf,
    /// Nodes between saves.
    pub every: u64,
}

/// Colors of `1..=len` in first-use order: each color is at most one more
/// than the largest color before it.
fn color_cap(prefix: &[u8], r: usize) -> u8 {
    let used = prefix.iter().max().map_or(0, |&m| m as usize + 1);
    (used.min(r - 1)) as u8
}

/// Whether the last assigned point completes a monochromatic set.
fn completes(prefix: &[u8], k: usize) -> bool {
    let n = prefix.len();
    n.is_multiple_of(2) && n >= 2 && k >= 1 && n / 2 >= k && mono_with_max(prefix, n / 2, k)
}

fn valid_prefix(prefix: &[u8], k: usize, r: usize) -> bool {
    (1..=prefix.len()).all(|n| prefix[n - 1] <= color_cap(&prefix[..n - 1], r) && !completes(&prefix[..n], k))
}

/// Depth-first search for a bad coloring of `1..=len`, least in
/// lexicographic order among colorings in first-use form.
pub fn find_bad_coloring(
    k: usize,
    r: usize,
    len: usize,
    budget: Budget,
    resume: Option<Checkpoint>,
    checkpoints: Option<&CheckpointPolicy>,
) -> Result<BadSearch, SearchError> {
    if r < 2 {
        return Err(SearchError::TooFewColors(r));
    }
    let mut state = Checkpoint {
        k,
        r,
        len,
        prefix: Vec::with_capacity(len),
        nodes: 0,
    };
    if let Some(cp) = resume {
        if (cp.k, cp.r, cp.len) != (k, r, len) {
            return Err(SearchError::CheckpointMismatch {
                expected: state.describe(),
                found: cp.describe(),
            });
        }
        if cp.prefix.len() > len || !valid_prefix(&cp.prefix, k, r) {
            return Err(SearchError::CheckpointState(cp.prefix));
        }
        state = cp;
    }
    let out_of_budget = |nodes: u64| budget.0.is_some_and(|b| nodes >= b);
    let mut since_save = 0u64;
    loop {
        if state.prefix.len() == len {
            return Ok(BadSearch::Found(NatColoring::new(r, state.prefix)?));
        }
        if out_of_budget(state.nodes) {
            if let Some(policy) = checkpoints {
                state.save(&policy.path)?;
            }
            return Ok(BadSearch::NotFound(SearchExhausted {
                exhaustive: false,
                nodes: state.nodes,
            }));
        }
        // descend with color 0, then walk the odometer until valid
        state.prefix.push(0);
        state.nodes += 1;
        since_save += 1;
        while completes(&state.prefix, k) {
            loop {
                let Some(last) = state.prefix.pop() else {
                    return Ok(BadSearch::NotFound(SearchExhausted {
                        exhaustive: true,
                        nodes: state.nodes,
                    }));
                };
                if last < color_cap(&state.prefix, r) {
                    state.prefix.push(last + 1);
                    state.nodes += 1;
                    since_save += 1;
                    break;
                }
            }
        }
        if let Some(policy) = checkpoints {
            if since_save >= policy.every {
                state.save(&policy.path)?;
                since_save = 0;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Forced,
    Escapable,
    Undecided,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Forced => "FORCED",
            Verdict::Escapable => "ESCAPABLE",
            Verdict::Undecided => "UNDECIDED",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ThresholdRecord {
    pub k: usize,
    pub r: usize,
    pub m: usize,
    pub verdict: Verdict,
    /// The bad coloring behind an ESCAPABLE verdict.
    pub witness: Option<NatColoring>,
    pub nodes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScanOptions {
    pub budget: Budget,
    pub finitization: Finitization,
    /// Random colorings sampled against each FORCED verdict.
    pub spot_checks: usize,
    pub seed: u64,
    /// Directory for per-`M` checkpoints. An existing checkpoint is resumed;
    /// it is removed once its `M` is decided.
    #[serde(skip)]
    pub checkpoint_dir: Option<PathBuf>,
    #[serde(skip)]
    pub checkpoint_every: u64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            budget: Budget::UNLIMITED,
            finitization: Finitization::SumsWithin,
            spot_checks: 10_000,
            seed: 0,
            checkpoint_dir: None,
            checkpoint_every: 1_000_000,
        }
    }
}

/// Samples `samples` uniform colorings of `1..=len` and returns the first
/// one without a monochromatic sumset of size `k`.
pub fn spot_check_forced(k: usize, r: usize, len: usize, samples: usize, seed: u64) -> Option<NatColoring> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (len as u64).rotate_left(32));
    (0..samples).find_map(|_| {
        let colors = (0..len).map(|_| rng.gen_range(0..r) as u8).collect();
        let c = NatColoring { r, colors };
        has_mono_sumset(&c, k).is_none().then_some(c)
    })
}

/// One record per `M` in `2k..=m_max`. The `M` values are searched in
/// parallel and returned in increasing order.
pub fn threshold_scan(k: usize, r: usize, m_max: usize, opts: &ScanOptions) -> Result<Vec<ThresholdRecord>, SearchError> {
    if r < 2 {
        return Err(SearchError::TooFewColors(r));
    }
    let ms: Vec<usize> = (2 * k.max(1)..=m_max).collect();
    let records = ms
        .par_iter()
        .map(|&m| {
            let len = opts.finitization.coloring_len(m);
            let policy = opts.checkpoint_dir.as_ref().map(|dir| CheckpointPolicy {
                path: dir.join(format!("checkpoint_k{k}_r{r}_M{m}.json")),
                every: opts.checkpoint_every.max(1),
            });
            let resume = match &policy {
                Some(p) if p.path.exists() => Some(Checkpoint::load(&p.path)?),
                _ => None,
            };
            let outcome = find_bad_coloring(k, r, len, opts.budget, resume, policy.as_ref())?;
            if let Some(p) = &policy {
                let decided = !matches!(outcome, BadSearch::NotFound(SearchExhausted { exhaustive: false, .. }));
                if decided && p.path.exists() {
                    fs::remove_file(&p.path).map_err(|source| SearchError::Io {
                        path: p.path.clone(),
                        source,
                    })?;
                }
            }
            let rec = match outcome {
                BadSearch::Found(c) => {
                    debug_assert!(has_mono_sumset(&c, k).is_none());
                    ThresholdRecord {
                        k,
                        r,
                        m,
                        verdict: Verdict::Escapable,
                        witness: Some(c),
                        nodes: 0,
                    }
                }
                BadSearch::NotFound(e) => ThresholdRecord {
                    k,
                    r,
                    m,
                    verdict: if e.exhaustive { Verdict::Forced } else { Verdict::Undecided },
                    witness: None,
                    nodes: e.nodes,
                },
            };
            if rec.verdict == Verdict::Forced {
                if let Some(c) = spot_check_forced(k, r, len, opts.spot_checks, opts.seed) {
                    return Err(SearchError::SpotCheck { m, coloring: c });
                }
            }
            Ok(rec)
        })
        .collect::<Result<Vec<_>, SearchError>>()?;
    for rec in &records {
        if let Some(w) = &rec.witness {
            assert!(has_mono_sumset(w, k).is_none(), "stored coloring for M = {} is not bad", rec.m);
        }
    }
    check_monotone(&records, opts.finitization)?;
    Ok(records)
}

/// A bad coloring at `M'` restricts to a bad coloring at every `M < M'`, so
/// no FORCED verdict may precede an ESCAPABLE one.
pub fn check_monotone(records: &[ThresholdRecord], fin: Finitization) -> Result<(), SearchError> {
    for esc in records.iter().filter(|r| r.verdict == Verdict::Escapable) {
        let w = esc.witness.as_ref().expect("escapable records carry a witness");
        for earlier in records.iter().filter(|r| r.m < esc.m) {
            let restricted = w.restrict(fin.coloring_len(earlier.m));
            let still_bad = has_mono_sumset(&restricted, esc.k).is_none();
            assert!(still_bad, "restriction of a bad coloring picked up a monochromatic set");
            if earlier.verdict == Verdict::Forced {
                return Err(SearchError::Monotonicity {
                    forced: earlier.m,
                    escapable: esc.m,
                });
            }
        }
    }
    Ok(())
}

/// Least `M` with a FORCED verdict, provided every later `M` is FORCED too.
pub fn minimal_forced(records: &[ThresholdRecord]) -> Option<usize> {
    let first = records.iter().position(|r| r.verdict == Verdict::Forced)?;
    records[first..]
        .iter()
        .all(|r| r.verdict == Verdict::Forced)
        .then(|| records[first].m)
}

/// File name for the bad coloring behind a record.
pub fn witness_file_name(rec: &ThresholdRecord) -> String {
    format!("bad_k{}_r{}_M{}.txt", rec.k, rec.r, rec.m)
}

/// CSV table `k,r,M,verdict,witness-file`; ESCAPABLE rows name their
/// witness file, the rest leave the column empty.
pub fn render_csv(records: &[ThresholdRecord]) -> String {
    let mut out = String::from("k,r,M,verdict,witness-file\n");
    for rec in records {
        let file = rec.witness.as_ref().map(|_| witness_file_name(rec)).unwrap_or_default();
        out.push_str(&format!("{},{},{},{},{}\n", rec.k, rec.r, rec.m, rec.verdict, file));
    }
    out
}

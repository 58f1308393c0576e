//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::collections::BTreeSet;
use std::panic::{self, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use sumset_core::certificate::{verify_certificate, Certificate};
use sumset_core::deltasys::{
    check_cl3, check_cl4, displacement_mutations, foreign_point_mutations, random_instance, SupportAssignment,
};
use sumset_core::oracle::ColoringOracle;
use sumset_core::pattern::{is_index_strictly_increasing, is_l_canonical, make_string, star, star_level, CanonicalTuple, Idx};
use sumset_core::pipeline2::{case_of, construct2};
use sumset_core::pipeline_r::{choose_levels, construct_r, make_witness_tuples, max_count, ConstructOptions, FamilySystem};
use sumset_core::qvec::{half, QVec};
use sumset_core::ramsey::{brute_homogeneous, Budget, Search, TupleColoring};
use sumset_core::search::{minimal_forced, threshold_scan, ScanOptions, Verdict};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = fn() -> Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn main() {
    let criteria: [(&str, Duration, Check); 9] = [
        ("1 pattern strings", Duration::from_secs(1), pattern_strings),
        ("2 sumset identity", Duration::from_secs(10), sumset_identity),
        ("3 two-color soundness", Duration::from_secs(60), two_color_soundness),
        ("4 pigeonhole totality", Duration::from_secs(1), pigeonhole_totality),
        ("5 ramsey cross-validation", Duration::from_secs(60), ramsey_cross_validation),
        ("6 general-r pipeline", Duration::from_secs(300), general_r_pipeline),
        ("7 support system checkers", Duration::from_secs(60), support_checkers),
        ("8 search harness", Duration::from_secs(600), search_harness),
        ("9 determinism", Duration::from_secs(600), determinism),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, limit, check) in criteria {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panic: {msg}"))
        });
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if took > limit => Err(format!("{detail}; took {took:.1?}, limit {limit:?}")),
            o => o,
        };
        match outcome {
            Ok(detail) => println!("PASS criterion {name}: {detail} [{took:.2?} of {limit:?}]"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {name}: {why} [{took:.2?} of {limit:?}]");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

fn pattern_strings() -> Result<String, String> {
    let mut n = 0;
    for r in 1..=6 {
        for l in 0..=r {
            let s = make_string(r, l).map_err(|e| e.to_string())?;
            let v = s.values();
            ensure(v.len() == r + l, || format!("s({r},{l}) has length {}", v.len()))?;
            ensure(v.iter().filter(|&&x| x == 2).count() == 2 * l, || format!("s({r},{l}) twos"))?;
            ensure(v.iter().filter(|&&x| x == 4).count() == r - l, || format!("s({r},{l}) fours"))?;
            ensure(v.iter().take(2 * l).all(|&x| x == 2), || format!("s({r},{l}) twos first"))?;
            n += 1;
        }
        ensure(make_string(r, r + 1).is_err(), || format!("s({r},{}) accepted", r + 1))?;
    }
    ensure(make_string(0, 0).is_err(), || "r = 0 accepted".into())?;
    Ok(format!("{n} strings"))
}

fn sumset_identity() -> Result<String, String> {
    let mut pairs = 0;
    for r in 1..=4 {
        for m in 1..=6 {
            let sys = FamilySystem::blocks(r, m);
            let fams = sys.families();
            for l in 1..=r {
                for lp in 0..l {
                    let count = max_count(m, lp, l);
                    if count < 2 {
                        continue;
                    }
                    let (a, b) = make_witness_tuples(r, m, lp, l, count).map_err(|e| e.to_string())?;
                    let s_lp = make_string(r, lp).map_err(|e| e.to_string())?;
                    let s_l = make_string(r, l).map_err(|e| e.to_string())?;
                    let vec_of = |s, t: &CanonicalTuple| {
                        let e = t.entries(fams).map_err(|e| e.to_string())?;
                        star_level(s, &e).map_err(|e| e.to_string())
                    };
                    for at in &a {
                        ensure(is_index_strictly_increasing(&at.index), || format!("{at} not index-increasing"))?;
                        is_l_canonical(at, fams, lp).map_err(|e| format!("{at}: {e}"))?;
                    }
                    let x: Vec<QVec> = a
                        .iter()
                        .map(|t| vec_of(&s_lp, t).map(|v| v.scale(&half())))
                        .collect::<Result<_, _>>()?;
                    for ((i, j), bt) in &b {
                        let lhs = x[*i].add(&x[*j]);
                        ensure(lhs == vec_of(&s_l, bt)?, || format!("r={r} m={m} l'={lp} l={l} ({i},{j})"))?;
                        ensure(is_index_strictly_increasing(&bt.index), || format!("{bt} not index-increasing"))?;
                        is_l_canonical(bt, fams, l).map_err(|e| format!("{bt}: {e}"))?;
                        pairs += 1;
                    }
                }
            }
        }
    }
    Ok(format!("{pairs} pairs"))
}

/// Sums and colors recomputed from `X` alone.
fn independent_recheck(cert: &Certificate, o: &ColoringOracle) -> Result<(), String> {
    let mut sums = BTreeSet::new();
    for i in 0..cert.x.len() {
        for j in i..cert.x.len() {
            sums.insert(cert.x[i].add(&cert.x[j]));
        }
    }
    for s in &sums {
        let c = o.color(s).map_err(|e| e.to_string())?;
        ensure(c == cert.color, || format!("{s} has color {c}, certificate claims {}", cert.color))?;
    }
    let listed: BTreeSet<QVec> = cert.sums.iter().map(|s| s.vector.clone()).collect();
    ensure(listed == sums, || "listed sums differ from X + X".into())
}

fn choose(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    go(0, n, k, &mut cur, &mut out);
    out
}

fn subsets_of(set: &[usize], k: usize) -> Vec<Vec<usize>> {
    choose(set.len(), k).into_iter().map(|p| p.iter().map(|&i| set[i]).collect()).collect()
}

/// Whether some 5-subset of `0..n` has `d_0, d_1, d_2` all constant.
fn some_homogeneous_five(o: &ColoringOracle, n: usize) -> Result<bool, String> {
    for set in choose(n, 5) {
        let mut ok = true;
        for l in 0..=2 {
            let colors: BTreeSet<usize> = subsets_of(&set, 2 + l)
                .iter()
                .map(|t| o.derived(l, t))
                .collect::<Result<_, _>>()
                .map_err(|e| e.to_string())?;
            ok &= colors.len() <= 1;
        }
        if ok {
            return Ok(true);
        }
    }
    Ok(false)
}

fn two_color_soundness() -> Result<String, String> {
    let mut oracles: Vec<ColoringOracle> = vec![
        ColoringOracle::four_count(2).unwrap(),
        ColoringOracle::support_size(2).unwrap(),
        ColoringOracle::floor_sum(2).unwrap(),
    ];
    oracles.extend((0..50).map(|s| ColoringOracle::seeded_hash(2, s).unwrap()));
    let (mut certified, mut exhausted) = (0, 0);
    for o in &oracles {
        let name = o.descriptor().unwrap_or_default();
        match construct2(o, 12, 4, Budget::UNLIMITED).map_err(|e| format!("{name}: {e}"))? {
            Search::Found(c) => {
                let cert = c.to_certificate(o);
                let defects = verify_certificate(&cert, o).map_err(|e| e.to_string())?;
                ensure(defects.is_empty(), || format!("{name}: {defects:?}"))?;
                independent_recheck(&cert, o).map_err(|e| format!("{name}: {e}"))?;
                certified += 1;
            }
            Search::NotFound(nf) => {
                ensure(nf.exhaustive, || format!("{name}: search not exhaustive"))?;
                ensure(!some_homogeneous_five(o, 12)?, || format!("{name}: missed a homogeneous set"))?;
                exhausted += 1;
            }
        }
    }
    Ok(format!("{certified} certified, {exhausted} verified exhaustive failures"))
}

fn pigeonhole_totality() -> Result<String, String> {
    for t in 0..8usize {
        let (a, b, c) = (t & 1, (t >> 1) & 1, (t >> 2) & 1);
        ensure(case_of(a, b, c).is_some(), || format!("case_of({a},{b},{c}) uncovered"))?;
    }
    let mut maps = 0;
    for r in 1..=5usize {
        let total = r.pow(r as u32 + 1);
        for code in 0..total {
            let rho: Vec<usize> = (0..=r).map(|k| code / r.pow(k as u32) % r).collect();
            let exists = (0..=r).any(|lp| (lp + 1..=r).any(|l| rho[lp] == rho[l]));
            ensure(exists, || format!("{rho:?} has no repeated level"))?;
            ensure(choose_levels(&rho, r).is_some(), || format!("choose_levels({rho:?})"))?;
            maps += 1;
        }
    }
    Ok(format!("8 triples, {maps} maps"))
}

fn mono_triangle(n: usize, color: impl Fn(usize, usize) -> usize) -> Option<[usize; 3]> {
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                let x = color(a, b);
                if color(a, c) == x && color(b, c) == x {
                    return Some([a, b, c]);
                }
            }
        }
    }
    None
}

fn ramsey_cross_validation() -> Result<String, String> {
    let edges6 = choose(6, 2);
    let idx = |n: usize, a: usize, b: usize| a * n - a * (a + 1) / 2 + (b - a - 1);
    for bits in 0u32..1 << edges6.len() {
        let f = TupleColoring::from_fn(2, 2, 6, |t| ((bits >> idx(6, t[0], t[1])) & 1) as usize).unwrap();
        let Search::Found(h) = brute_homogeneous(&f, 3, Budget::UNLIMITED).unwrap() else {
            return Err(format!("K6 coloring {bits:#x} has no triangle"));
        };
        let t = &h.members;
        let c = |a: usize, b: usize| ((bits >> idx(6, a, b)) & 1) as usize;
        ensure(c(t[0], t[1]) == c(t[0], t[2]) && c(t[0], t[1]) == c(t[1], t[2]), || format!("{bits:#x}: {t:?}"))?;
        // least triangle, as the independent scan orders them
        ensure(mono_triangle(6, c).map(|x| x.to_vec()) == Some(t.clone()), || format!("{bits:#x}: not least"))?;
    }
    let mut agreements = 0;
    for bits in 0u32..1 << 10 {
        let c = |a: usize, b: usize| ((bits >> idx(5, a, b)) & 1) as usize;
        let f = TupleColoring::from_fn(2, 2, 5, |t| c(t[0], t[1])).unwrap();
        let ours = brute_homogeneous(&f, 3, Budget::UNLIMITED).unwrap();
        let theirs = mono_triangle(5, c);
        match (&ours, theirs) {
            (Search::Found(h), Some(t)) => ensure(h.members == t.to_vec(), || format!("K5 {bits:#x}"))?,
            (Search::NotFound(nf), None) => ensure(nf.exhaustive, || format!("K5 {bits:#x} not exhaustive"))?,
            _ => return Err(format!("K5 coloring {bits:#x}: searches disagree")),
        }
        agreements += 1;
    }
    let pentagon = |a: usize, b: usize| usize::from(matches!(b - a, 1 | 4));
    let f = TupleColoring::from_fn(2, 2, 5, |t| pentagon(t[0], t[1])).unwrap();
    match brute_homogeneous(&f, 3, Budget::UNLIMITED).unwrap() {
        Search::NotFound(nf) if nf.exhaustive => {}
        other => return Err(format!("pentagon: {other:?}")),
    }
    ensure(mono_triangle(5, pentagon).is_none(), || "independent enumerator found a pentagon triangle".into())?;
    Ok(format!("{} K6 colorings, {agreements} K5 colorings, pentagon NotFound", 1u32 << 15))
}

fn all_idx(m: usize) -> Vec<Idx> {
    (0..m).map(Idx::Fin).chain([Idx::Top]).collect()
}

fn tuples(slots: usize, m: usize) -> Vec<Vec<Idx>> {
    let base = all_idx(m);
    let mut out = vec![Vec::new()];
    for _ in 0..slots {
        out = out
            .into_iter()
            .flat_map(|p| base.iter().map(move |&i| [p.clone(), vec![i]].concat()))
            .collect();
    }
    out
}

fn general_r_pipeline() -> Result<String, String> {
    let profiles: [[usize; 4]; 7] = [
        [0, 1, 2, 0],
        [1, 0, 0, 1],
        [0, 0, 1, 2],
        [2, 1, 0, 2],
        [0, 1, 1, 2],
        [1, 2, 2, 0],
        [0, 1, 2, 1],
    ];
    let r = 3;
    let mut checked = 0;
    for rho in profiles {
        let o = ColoringOracle::order_invariant(ColoringOracle::profile(r, rho.to_vec()).unwrap());
        let c = match construct_r(&o, 60, 4, ConstructOptions::default()).map_err(|e| format!("{rho:?}: {e}"))? {
            Search::Found(c) => c,
            Search::NotFound(f) => return Err(format!("{rho:?}: stopped at {f:?}")),
        };
        let cert = c.to_certificate(&o);
        let defects = verify_certificate(&cert, &o).map_err(|e| e.to_string())?;
        ensure(defects.is_empty(), || format!("{rho:?}: {defects:?}"))?;
        independent_recheck(&cert, &o).map_err(|e| format!("{rho:?}: {e}"))?;
        // every index-increasing canonical tuple has its saturation's color
        let fams = c.system.families();
        let m = c.system.m();
        let color_of = |t: &CanonicalTuple| -> Result<usize, String> {
            let s = make_string(r, t.level()).map_err(|e| e.to_string())?;
            let e = t.entries(fams).map_err(|e| e.to_string())?;
            o.color(&star(s.values(), &e).map_err(|e| e.to_string())?).map_err(|e| e.to_string())
        };
        for l in 0..=r {
            for index in tuples(r, m).into_iter().filter(|i| is_index_strictly_increasing(i)) {
                for primed in tuples(l, m) {
                    let t = CanonicalTuple::new(index.clone(), primed);
                    if is_l_canonical(&t, fams, l).is_err() {
                        continue;
                    }
                    let (a, b) = (color_of(&t)?, color_of(&t.saturated())?);
                    ensure(a == b, || format!("{rho:?}: {t} has color {a}, saturation {b}"))?;
                    ensure(a == c.rho[l], || format!("{rho:?}: level {l} not constant"))?;
                    checked += 1;
                }
            }
        }
    }
    Ok(format!("{} profiles certified, {checked} tuples re-checked", profiles.len()))
}

fn violated(s: &SupportAssignment) -> bool {
    !check_cl3(s).is_empty() || !check_cl4(s).is_clean()
}

fn support_checkers() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut instances = Vec::new();
    for seed in 0..100u64 {
        let n = 1 + (seed as usize % 8);
        let d = (seed as usize / 8) % 4;
        let pad: Vec<usize> = (0..=d).map(|_| rng.gen_range(0..=2)).collect();
        let slack = rng.gen_range(0..=2);
        let s = random_instance(n, d, &pad, slack, seed).map_err(|e| e.to_string())?;
        ensure(check_cl3(&s).is_empty(), || format!("seed {seed}: intersection law fails"))?;
        ensure(check_cl4(&s).is_clean(), || format!("seed {seed}: coherence fails"))?;
        instances.push(s);
    }
    let (mut foreign, mut displaced) = (0, 0);
    let mut k = 0;
    while foreign + displaced < 100 {
        let s = &instances[k % instances.len()];
        let use_foreign = k % 2 == 0;
        k += 1;
        let pool = if use_foreign { foreign_point_mutations(s) } else { displacement_mutations(s) };
        if pool.is_empty() {
            continue;
        }
        let m = &pool[rng.gen_range(0..pool.len())];
        let bad = m.apply(s).map_err(|e| e.to_string())?;
        ensure(violated(&bad), || format!("mutation {m:?} went unnoticed"))?;
        if use_foreign {
            foreign += 1;
        } else {
            displaced += 1;
        }
        ensure(k < 10_000, || "not enough mutable instances".into())?;
    }
    Ok(format!("100 instances clean, {foreign} foreign-point and {displaced} displacement mutations caught"))
}

/// Every 2-coloring of `1..=m` enumerated directly.
fn forced_by_enumeration(m: usize) -> bool {
    (0u32..1 << m).all(|bits| {
        let color = |n: usize| (bits >> (n - 1)) & 1;
        let half = m / 2;
        (1..=half).any(|a| {
            (a + 1..=half).any(|b| color(2 * a) == color(a + b) && color(a + b) == color(2 * b))
        })
    })
}

fn search_harness() -> Result<String, String> {
    for r in 2..=4 {
        let recs = threshold_scan(1, r, 12, &ScanOptions::default()).map_err(|e| e.to_string())?;
        ensure(recs.iter().all(|x| x.verdict == Verdict::Forced), || format!("k=1 r={r} not all FORCED"))?;
    }
    let oracle = (4..=16).rev().take_while(|&m| forced_by_enumeration(m)).last();
    const FROZEN: usize = 14;
    ensure(oracle == Some(FROZEN), || format!("enumeration oracle gives {oracle:?}, frozen value is {FROZEN}"))?;
    let recs = threshold_scan(2, 2, 16, &ScanOptions::default()).map_err(|e| e.to_string())?;
    let scanned = minimal_forced(&recs);
    ensure(scanned == Some(FROZEN), || format!("scanner gives {scanned:?}, oracle {FROZEN}"))?;
    Ok(format!("k=1 FORCED for r=2..4; k=2 r=2 threshold {FROZEN} from both"))
}

fn run_cli(args: &[&str], threads: usize) -> (Option<i32>, Vec<u8>, Vec<u8>) {
    let dir = tempfile::tempdir().unwrap();
    let mut full: Vec<String> = args.iter().map(|s| s.to_string()).collect();
    if args[0] == "search" {
        full.extend(["--out-dir".into(), dir.path().join("out").display().to_string()]);
    }
    let o = Command::new(env!("CARGO_BIN_EXE_sumset"))
        .args(&full)
        .env("RAYON_NUM_THREADS", threads.to_string())
        .output()
        .expect("binary runs");
    // witness files ride along with the table
    let mut files = Vec::new();
    if args[0] == "search" {
        let mut names: Vec<_> = std::fs::read_dir(dir.path().join("out")).unwrap().map(|e| e.unwrap().path()).collect();
        names.sort();
        for p in names {
            files.extend(p.file_name().unwrap().to_string_lossy().as_bytes());
            files.extend(std::fs::read(p).unwrap());
        }
    }
    (o.status.code(), o.stdout, files)
}

fn determinism() -> Result<String, String> {
    let runs: Vec<Vec<&str>> = vec![
        vec!["construct2", "--oracle", "four-count", "--n", "12", "--m", "4"],
        vec!["construct2", "--oracle", "seeded-hash", "--n", "12", "--m", "4", "--seed", "9"],
        vec!["construct-r", "--oracle", "order-invariant:profile:0,1,2,0", "--r", "3", "--n", "60", "--m", "4"],
        vec!["search", "--k", "2", "--r", "2", "--m-max", "15", "--seed", "2"],
        vec!["search", "--k", "3", "--r", "2", "--m-max", "14", "--budget", "500"],
        vec!["deltasys", "generate", "--n", "7", "--d", "3", "--pad", "1,2,1,1", "--slack", "2", "--seed", "4"],
        vec!["ramsey", "--coloring", "random:3:2", "--n", "12", "--m", "5", "--seed", "1"],
        vec!["ramsey", "--coloring", "derived:1", "--oracle", "floor-sum", "--r", "2", "--n", "10", "--m", "5"],
    ];
    for args in &runs {
        let base = run_cli(args, 1);
        ensure(!base.1.is_empty() || !base.2.is_empty(), || format!("{args:?}: no output"))?;
        for threads in [2, 8] {
            let other = run_cli(args, threads);
            ensure(other == base, || format!("{args:?}: output differs at {threads} threads"))?;
        }
        let again = run_cli(args, 1);
        ensure(again == base, || format!("{args:?}: output differs between identical runs"))?;
    }
    Ok(format!("{} subcommand runs byte-identical at 1, 2 and 8 threads", runs.len()))
}

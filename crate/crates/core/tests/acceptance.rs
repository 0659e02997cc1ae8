//! Acceptance suite. Prints one PASS/FAIL line per criterion.

use std::collections::BTreeSet;

use bte::bt_tree::{enumerate_region, geodesic_balls, Ball, End};
use bte::counting::{crosscheck, CellReport, U0Convention, Verdict, DEFAULT_ORBIT_BUDGET};
use bte::moebius::{
    act_on_ball_lattice, act_on_ball_partition, apply_to_end, congruent, cross_ratio, quartet_shape,
    quartets_conjugate, MoebiusMap, Quartet,
};
use bte::orders::{
    branch_bruteforce, branch_symbolic, bracket_t, standard_order, thicken, thicken_set, Branch, OrderKind,
    OrderSpec,
};
use bte::padic::{pow_u64, PAdicScalar};
use bte::matrix::Mat2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PREC: u32 = 24;

type Outcome = std::result::Result<(), String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Outcome {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ints(c: &CellReport) -> Option<[u64; 4]> {
    c.oracle.evector.integers()
}

fn cell(cells: &[CellReport], p: u64, kind: OrderKind, r: u32) -> &CellReport {
    cells.iter().find(|c| c.spec.p == p && c.spec.kind == kind && c.r == r).expect("cell in grid")
}

fn grid() -> Vec<(OrderSpec, u32)> {
    let mut g = Vec::new();
    for p in [2, 3] {
        for r in 0..=4 {
            g.push((OrderSpec::new(p, OrderKind::Nilpotent), r));
        }
        for t in 0..=1 {
            for r in 0..=4 {
                g.push((OrderSpec::new(p, OrderKind::Triangular { t }), r));
            }
        }
        for t in 0..=2 {
            for r in 1..=4 {
                g.push((OrderSpec::new(p, OrderKind::SplitCommutative { t }), r));
            }
        }
    }
    g
}

fn all_match(cells: &[CellReport], pick: impl Fn(&OrderKind) -> bool) -> Outcome {
    for c in cells.iter().filter(|c| pick(&c.spec.kind)) {
        ensure(c.verdict == Verdict::Match, || format!("{c}"))?;
    }
    Ok(())
}

fn nilpotent(cells: &[CellReport]) -> Outcome {
    all_match(cells, |k| *k == OrderKind::Nilpotent)?;
    let e = |p| ints(cell(cells, p, OrderKind::Nilpotent, 2)).unwrap();
    ensure(e(2)[1] == 2, || format!("p=2 r=2 gives {:?}", e(2)))?;
    ensure(e(3)[0] == 4 && e(3)[1] == 2, || format!("p=3 r=2 gives {:?}", e(3)))
}

fn triangular(cells: &[CellReport]) -> Outcome {
    all_match(cells, |k| matches!(k, OrderKind::Triangular { .. }))?;
    for c in cells.iter().filter(|c| matches!(c.spec.kind, OrderKind::Triangular { .. })) {
        let t = c.spec.kind.t().unwrap();
        let none = c.r < 2 * t;
        ensure(c.formula.reason.is_some() == none, || format!("sentinel disagrees: {c}"))?;
        if none {
            ensure(ints(c) == Some([0; 4]) && c.keys.evector.integers() == Some([0; 4]), || format!("{c}"))?;
        }
        if t == 0 {
            let want = if c.r == 0 { [1, 1, 1, 1] } else { [2, 1, 2, 1] };
            ensure(ints(c) == Some(want), || format!("{c}"))?;
        }
    }
    Ok(())
}

fn split(cells: &[CellReport]) -> Outcome {
    let split: Vec<&CellReport> =
        cells.iter().filter(|c| matches!(c.spec.kind, OrderKind::SplitCommutative { .. })).collect();
    for c in &split {
        let t = c.spec.kind.t().unwrap();
        if c.formula.is_flagged() {
            ensure(c.verdict == Verdict::KnownGap && ints(c).is_some(), || format!("{c}"))?;
            println!("    known gap: {c}");
            // the convention only reaches cells whose χ sum contains a u = 0 term
            if c.r <= t {
                let alt = c.alternative.as_ref().unwrap();
                ensure(!alt.is_flagged(), || format!("still flagged under two: {c}"))?;
            }
        } else {
            ensure(c.verdict == Verdict::Match, || format!("{c}"))?;
        }
    }
    let s = |p, t, r| ints(cell(cells, p, OrderKind::SplitCommutative { t }, r));
    ensure(s(3, 1, 2) == Some([5, 3, 3, 2]), || format!("p=3 t=1 r=2: {:?}", s(3, 1, 2)))?;
    ensure(s(3, 1, 4) == Some([8, 4, 4, 3]), || format!("p=3 t=1 r=4: {:?}", s(3, 1, 4)))?;
    ensure(s(2, 1, 2) == Some([4, 2, 2, 1]), || format!("p=2 t=1 r=2: {:?}", s(2, 1, 2)))
}

fn random_map(rng: &mut ChaCha8Rng, p: u64) -> MoebiusMap {
    loop {
        let mut e = [PAdicScalar::zero(p); 4];
        for x in &mut e {
            let num: i128 = rng.gen_range(-30..=30);
            let den = pow_u64(p, rng.gen_range(0..=2)) as i128;
            *x = PAdicScalar::from_rational(p, num, den, PREC).unwrap();
        }
        if let Ok(s) = MoebiusMap::new(Mat2::new(e[0], e[1], e[2], e[3])) {
            return s;
        }
    }
}

fn action(rng: &mut ChaCha8Rng) -> Outcome {
    for p in [2, 3] {
        let region = enumerate_region(&Ball::zero_chain(p, 0), 3);
        for _ in 0..100 {
            let s = random_map(rng, p);
            for b in &region {
                let l = act_on_ball_lattice(&s, b, PREC).map_err(|e| e.to_string())?;
                let q = act_on_ball_partition(&s, b, PREC).map_err(|e| e.to_string())?;
                ensure(l == q, || format!("p={p} {} on {b}: lattice {l}, partition {q}", s.matrix()))?;
            }
        }
    }
    Ok(())
}

fn random_end(rng: &mut ChaCha8Rng, p: u64) -> End {
    if rng.gen_ratio(1, 10) {
        return End::Infinity;
    }
    let den = pow_u64(p, rng.gen_range(0..=2)) as i128;
    End::Finite(PAdicScalar::from_rational(p, rng.gen_range(-500..=500), den, PREC).unwrap())
}

fn invariance(rng: &mut ChaCha8Rng) -> Outcome {
    let mut done = 0;
    while done < 500 {
        let p = if done % 2 == 0 { 2 } else { 3 };
        let q: Vec<End> = (0..4).map(|_| random_end(rng, p)).collect();
        let Ok(before) = cross_ratio(&q[0], &q[1], &q[2], &q[3]) else { continue };
        let s = random_map(rng, p);
        let img: Vec<End> = q.iter().map(|e| apply_to_end(&s, e).unwrap()).collect();
        let after = cross_ratio(&img[0], &img[1], &img[2], &img[3]).map_err(|e| e.to_string())?;
        // exact up to the precision both values still carry
        let diff = before - after;
        ensure(diff.is_zero(), || format!("[{q:?}] under {}: {before} vs {after}", s.matrix()))?;
        done += 1;
    }
    Ok(())
}

fn scalar(p: u64, num: i128, den: i128) -> PAdicScalar {
    PAdicScalar::from_rational(p, num, den, PREC).unwrap()
}

/// Quartet in standard position with inner edge length l: A toward infinity, B toward 0, C and D past B_1^[l].
fn standard_quartet(p: u64, [r, s, t, u, l]: [i64; 5], d: i128) -> [Ball; 4] {
    [
        Ball::zero_chain(p, -r),
        Ball::zero_chain(p, s),
        Ball::from_int(p, 1, t + l),
        Ball::from_int(p, d, l + u),
    ]
}

fn quartet_params(rng: &mut ChaCha8Rng) -> [i64; 5] {
    let u = rng.gen_range(0..=2);
    let mut g = || rng.gen_range(u.max(1)..=u + 2);
    let (r, s, t) = (g(), g(), g());
    [r, s, t, u, rng.gen_range(1..=2)]
}

fn congruence(rng: &mut ChaCha8Rng) -> Outcome {
    for i in 0..100 {
        let p: u64 = if i % 2 == 0 { 2 } else { 3 };
        let [r, s, t, u, l] = quartet_params(rng);
        let pp = |k: i64| pow_u64(p, k as u32) as i128;
        // d = 1 + p^l * (unit), so C and D part at B_1^[l]
        let unit = loop {
            let x = rng.gen_range(1..pp(u + 1).max(2));
            if x % p as i128 != 0 {
                break x;
            }
        };
        let d = 1 + pp(l) * unit;
        let balls = standard_quartet(p, [r, s, t, u, l], d);
        let shape = quartet_shape(&balls).map_err(|e| e.to_string())?;
        ensure(shape.l == l as u64 && shape.u == u as u64, || format!("shape {shape:?} for {balls:?}"))?;
        // any ends beyond the four balls
        let a = if rng.gen_ratio(1, 3) {
            End::Infinity
        } else {
            End::Finite(scalar(p, rng.gen_range(1..50) * p as i128 + 1, pp(r + 1 + rng.gen_range(0..2))))
        };
        let b = End::Finite(scalar(p, pp(s) * rng.gen_range(-50..50), 1));
        let c = End::Finite(scalar(p, 1 + pp(t + l) * rng.gen_range(-50..50), 1));
        let dd = End::Finite(scalar(p, d + pp(l + u) * rng.gen_range(-50..50), 1));
        let sigma = random_map(rng, p);
        let moved: Vec<End> = [a, b, c, dd].iter().map(|e| apply_to_end(&sigma, e).unwrap()).collect();
        let x = cross_ratio(&moved[0], &moved[1], &moved[2], &moved[3]).map_err(|e| e.to_string())?;
        let ok = congruent(&x, &scalar(p, d, 1), shape.m).map_err(|e| e.to_string())?;
        ensure(ok, || format!("p={p} shape {shape:?} d={d}: cross-ratio {x}"))?;
    }
    Ok(())
}

fn rigidity() -> Outcome {
    let (mut bases, mut hits) = (0usize, 0usize);
    for p in [2u64, 3] {
        for params in [[1, 1, 1, 0, 1], [2, 1, 1, 1, 1], [1, 2, 2, 1, 2], [2, 2, 2, 2, 1], [1, 1, 2, 1, 1]] {
            let [.., u, l] = params;
            if l + u > 3 {
                continue;
            }
            for d in 0..pow_u64(p, (l + u) as u32) as i128 {
                let base = standard_quartet(p, params, d);
                if quartet_shape(&base).map(|s| s.l != l as u64 || s.u != u as u64).unwrap_or(true) {
                    continue;
                }
                bases += 1;
                let q = Quartet::with_default_ends(base, PREC).map_err(|e| e.to_string())?;
                for n in 0..=3i64 {
                    for e in 0..pow_u64(p, n as u32) as i128 {
                        let cand = Ball::from_int(p, e, n);
                        let mut balls = base;
                        balls[3] = cand;
                        let Ok(q2) = Quartet::with_default_ends(balls, PREC) else { continue };
                        let Ok(conj) = quartets_conjugate(&q, &q2) else { continue };
                        hits += conj as usize;
                        ensure(!conj || cand == base[3], || format!("p={p} {params:?}: {} vs {cand}", base[3]))?;
                    }
                }
            }
        }
    }
    // every configuration is found conjugate to itself and to nothing else
    ensure(bases > 0 && hits == bases, || format!("{hits} conjugate pairs over {bases} configurations"))
}

fn kinds() -> Vec<OrderKind> {
    let mut v = vec![OrderKind::Trivial, OrderKind::Nilpotent];
    for t in 0..3 {
        v.push(OrderKind::SplitCommutative { t });
        v.push(OrderKind::Triangular { t });
        for r in 0..3 {
            v.push(OrderKind::EichlerThick { r, t });
        }
    }
    v
}

fn branches() -> Outcome {
    const N: u32 = 20;
    for p in [2, 3] {
        let base = Ball::zero_chain(p, 0);
        for kind in kinds() {
            let spec = OrderSpec::new(p, kind);
            let h = standard_order(&spec, N);
            let sym = branch_symbolic(&spec);
            let brute = branch_bruteforce(&h, &base, 3, N).map_err(|e| e.to_string())?;
            ensure(brute == sym.restrict(&base, 3), || format!("p={p} {kind}: symbolic and brute force differ"))?;

            let radius = 4;
            let inner: BTreeSet<Ball> = enumerate_region(&base, radius - 2).into_iter().collect();
            let trim = |s: &BTreeSet<Ball>| s.intersection(&inner).copied().collect::<BTreeSet<_>>();
            let wide = branch_bruteforce(&h, &base, radius, N).map_err(|e| e.to_string())?;
            for t in [1, 2] {
                let lhs = branch_bruteforce(&bracket_t(&h, t, N), &base, radius, N).map_err(|e| e.to_string())?;
                let rhs = thicken_set(&wide, t);
                let thick = thicken(&sym, t);
                ensure(trim(&lhs) == trim(&rhs), || format!("p={p} {kind} t={t}: thickening"))?;
                ensure(trim(&lhs) == trim(&thick.restrict(&base, radius)), || format!("p={p} {kind} t={t}: symbolic"))?;
                parity(&thick, &base)?;
            }
            parity(&sym, &base)?;
        }
        let nil = branch_symbolic(&OrderSpec::new(p, OrderKind::Nilpotent));
        for b in nil.restrict(&base, 3) {
            ensure(nil.is_endpoint(&b) == (b.level() == 0), || format!("p={p} nilpotent boundary at {b}"))?;
        }
    }
    Ok(())
}

/// Endpoint distance parity against the stem vertices on the joining geodesic.
fn parity(branch: &Branch, base: &Ball) -> Outcome {
    let Branch::ThickLine { .. } = branch else { return Ok(()) };
    let ends: Vec<Ball> = branch.restrict(base, 4).into_iter().filter(|b| branch.is_endpoint(b)).collect();
    for a in &ends {
        for b in &ends {
            let c = geodesic_balls(a, b).vertices().iter().filter(|v| branch.is_stem(v)).count() as u64;
            let d = a.distance(b);
            let want = if c > 0 { (c - 1) % 2 } else { 0 };
            ensure(d % 2 == want, || format!("parity {a} {b}: d={d} stem vertices={c}"))?;
        }
    }
    Ok(())
}

fn consistency(cells: &[CellReport]) -> Outcome {
    for c in cells {
        let o = &c.oracle;
        ensure(o.stabilized && o.counts.e == o.counts_next.e, || format!("not stabilized: {c}"))?;
        let [e1, e2, e3, e4] = o.counts.e.map(|x| x as usize);
        let st = &o.counts.stats;
        ensure(2 * e2 == e1 + st.fixed_embedding_orbits, || format!("e2 merge: {c} {st:?}"))?;
        ensure(2 * e4 == e3 + st.fixed_image_orbits, || format!("e4 merge: {c} {st:?}"))?;
        ensure(st.e3_by_automorphisms == e3, || format!("automorphism count: {c} {st:?}"))?;
        ensure(c.keys.keys == e1, || format!("keys {} vs oracle e1 {e1}: {c}", c.keys.keys))?;
    }
    Ok(())
}

/// Runs without the libtest harness so the criterion lines are never captured.
fn main() {
    let cells = crosscheck(&grid(), U0Convention::One, DEFAULT_ORBIT_BUDGET).expect("grid runs");
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let results: Vec<(u32, &str, Outcome)> = vec![
        (1, "nilpotent numbers: oracle equals formula", nilpotent(&cells)),
        (2, "triangular numbers: oracle equals formula", triangular(&cells)),
        (3, "split numbers: integral cells match, flagged cells recorded", split(&cells)),
        (4, "partition action equals lattice action", action(&mut rng)),
        (
            5,
            "cross-ratio invariance, congruence and rigidity",
            invariance(&mut rng).and_then(|_| congruence(&mut rng)).and_then(|_| rigidity()),
        ),
        (6, "branch suite", branches()),
        (7, "oracle stabilization, merge identities and key counts", consistency(&cells)),
    ];
    let mut failed = Vec::new();
    for (n, title, outcome) in &results {
        match outcome {
            Ok(()) => println!("criterion {n}: {title} ... PASS"),
            Err(msg) => {
                println!("criterion {n}: {title} ... FAIL ({msg})");
                failed.push(*n);
            }
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}

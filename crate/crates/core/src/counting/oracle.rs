//! Enumeration oracle: optimal embeddings into the standard Eichler order, truncated
//! mod `p^N`, counted up to conjugation by breadth-first orbit search.
//!
//! An element `x = [[a, b], [p^r c, d]]` of the standard order is stored by its
//! coordinates `(a, b, c, d)` mod `p^N`. An embedding of `H` into the Eichler order
//! is optimal iff `1` and the images of the generators stay independent mod `p`.

use std::collections::HashSet;

use serde::Serialize;

use super::{orbits, EVector, Method, Move, Orbits};
use crate::error::{Error, Result};
use crate::orders::{OrderKind, OrderSpec};
use crate::padic::{mod_inverse, pow_u64, residue_units, unit_group_generators, val_int};

type C = [u32; 4];
/// Canonical (Howell) basis of a submodule of `(Z/p^N)^4`, zero padded.
pub type ModuleKey = [[u32; 4]; 4];

#[derive(Clone, Copy, Debug)]
struct Zq {
    p: u64,
    m: u32,
    q: u64,
}

impl Zq {
    fn new(p: u64, m: u32) -> Zq {
        Zq { p, m, q: pow_u64(p, m) }
    }

    fn red(&self, x: i128) -> u32 {
        x.rem_euclid(self.q as i128) as u32
    }

    fn pw(&self, k: u32) -> i128 {
        pow_u64(self.p, k) as i128
    }

    fn units(&self) -> Vec<i128> {
        residue_units(self.p, self.m).iter().map(|u| u as i128).collect()
    }

    fn val(&self, x: u64) -> u32 {
        if x == 0 {
            self.m
        } else {
            val_int(self.p, x as i128)
        }
    }
}

fn rank_mod_p(p: u64, rows: &[C]) -> usize {
    let rows: Vec<[u64; 4]> = rows.iter().map(|r| r.map(u64::from)).collect();
    crate::linalg::rank_mod_p(p, &rows)
}

const IDENTITY: C = [1, 0, 0, 1];

fn optimal(p: u64, xs: &[C]) -> bool {
    let mut rows = vec![IDENTITY];
    rows.extend_from_slice(xs);
    rank_mod_p(p, &rows) == rows.len()
}

fn nilpotent_points(z: Zq, r: u32) -> Vec<[C; 1]> {
    let q = z.q as i128;
    let mut out = HashSet::new();
    // direction (1 : p^j b1), j < r/2
    for j in 0..r.div_ceil(2) {
        let (prj, pr2j) = (z.pw(r - j), z.pw(r - 2 * j));
        for b1 in z.units() {
            for l in 0..q {
                out.insert([[z.red(-prj * l * b1), z.red(pr2j * l), z.red(-l * b1 * b1), z.red(prj * l * b1)]]);
            }
        }
    }
    // direction (1 : p^h b), h = ceil(r/2)
    let h = r.div_ceil(2);
    let (ph, e) = (z.pw(h), z.pw(2 * h - r));
    for b in 0..q {
        let beta = ph * b % q;
        for l in 0..q {
            out.insert([[z.red(-beta * l), z.red(l), z.red(-l * e * b % q * b), z.red(beta * l)]]);
        }
    }
    // direction (α : 1), α in pO
    let pr = z.pw(r);
    for s in 0..q / z.p as i128 {
        let alpha = z.p as i128 * s;
        for l in 0..q {
            let x = pr * l % q * alpha % q;
            out.insert([[z.red(x), z.red(-x * alpha), z.red(l), z.red(-x)]]);
        }
    }
    out.into_iter().filter(|x| optimal(z.p, x)).collect()
}

/// Rank-one idempotent directions scaled by `p^t`: `x = v m^T` with `m.v = p^t`.
/// Each chart yields `(X1, direction data)` so that the triangular case can attach `X2`.
fn split_charts(z: Zq, r: u32, t: u32, mut emit: impl FnMut(C, Direction)) {
    let q = z.q as i128;
    let (pt, pr) = (z.pw(t), z.pw(r));
    for b in 0..q {
        let beta = pr * b % q;
        for m2 in 0..q {
            let a = pt - beta * m2;
            emit([z.red(a), z.red(m2), z.red(b * a), z.red(beta * m2)], Direction::Deep(b));
        }
    }
    for j in 0..r {
        let k = z.m.max((z.m + 2 * j).saturating_sub(r));
        let (prj, pj) = (z.pw(r - j), z.pw(j));
        let units = z.units();
        for m1 in 0..z.pw(k) {
            let num = pt - prj * m1;
            if num % pj != 0 {
                continue;
            }
            let quo = num / pj;
            for &b1 in &units {
                let inv = mod_inverse(b1 as u64, z.q).unwrap() as i128;
                let m2 = quo.rem_euclid(q) * inv;
                emit([z.red(prj * m1), z.red(m2), z.red(b1 * m1), z.red(num)], Direction::Shallow(j, b1));
            }
        }
    }
    for s in 0..q / z.p as i128 {
        let alpha = z.p as i128 * s;
        for m1 in 0..q {
            let m2 = pt - alpha * pr % q * m1;
            emit([z.red(alpha * pr % q * m1), z.red(alpha * m2), z.red(m1), z.red(m2)], Direction::Lower(alpha));
        }
    }
}

#[derive(Clone, Copy)]
enum Direction {
    /// `(1 : p^r b)`
    Deep(i128),
    /// `(1 : p^j b1)`, `j < r`
    Shallow(u32, i128),
    /// `(α : 1)`, `α ∈ pO`
    Lower(i128),
}

fn split_points(z: Zq, r: u32, t: u32) -> Vec<[C; 1]> {
    let mut out = HashSet::new();
    split_charts(z, r, t, |x, _| {
        if optimal(z.p, &[x]) {
            out.insert([x]);
        }
    });
    out.into_iter().collect()
}

fn triangular_points(z: Zq, r: u32, t: u32) -> Vec<[C; 2]> {
    let q = z.q as i128;
    let pr = z.pw(r);
    let mut out = HashSet::new();
    split_charts(z, r, t, |x1, dir| {
        for l in 0..q {
            // nilpotent X2 with image the direction of X1 and kernel containing it
            let x2 = match dir {
                Direction::Deep(b) => {
                    let beta = pr * b % q;
                    [z.red(-beta * l), z.red(l), z.red(-l * pr % q * b % q * b), z.red(beta * l)]
                }
                Direction::Shallow(j, b1) => {
                    let beta = z.pw(j) * b1 % q;
                    let lam = z.pw(r.saturating_sub(2 * j)) * l % q;
                    let e = z.pw((2 * j).saturating_sub(r));
                    [z.red(-beta * lam), z.red(lam), z.red(-l * e % q * b1 % q * b1), z.red(beta * lam)]
                }
                Direction::Lower(alpha) => {
                    let x = pr * l % q * alpha % q;
                    [z.red(-x), z.red(x * alpha), z.red(-l), z.red(x)]
                }
            };
            if optimal(z.p, &[x1, x2]) {
                out.insert([x1, x2]);
            }
        }
    });
    out.into_iter().collect()
}

type CoordMove = Box<dyn Fn(C) -> C + Sync + Send>;

/// Conjugation by `[[1,0],[p^r,1]]`, `[[1,1],[0,1]]` and `diag(g,1)` on coordinates.
fn gamma1_moves(z: Zq, r: u32) -> Vec<CoordMove> {
    let pr = z.pw(r) % z.q as i128;
    let mut v: Vec<CoordMove> = vec![
        Box::new(move |[a, b, c, d]: C| {
            let (a, b, c, d) = (a as i128, b as i128, c as i128, d as i128);
            [z.red(a - pr * b), b as u32, z.red(a + c - pr * b - d), z.red(d + pr * b)]
        }),
        Box::new(move |[a, b, c, d]: C| {
            let (a, b, c, d) = (a as i128, b as i128, c as i128, d as i128);
            [z.red(a + pr * c), z.red(-a - pr * c + b + d), c as u32, z.red(d - pr * c)]
        }),
    ];
    for g in unit_group_generators(z.p, z.m) {
        let g = g as i128 % z.q as i128;
        let ginv = mod_inverse(g as u64, z.q).unwrap() as i128;
        v.push(Box::new(move |[a, b, c, d]: C| [a, z.red(g * b as i128), z.red(ginv * c as i128), d]));
    }
    v
}

/// Conjugation by `[[0,1],[p^r,0]]`.
fn atkin_lehner([a, b, c, d]: C) -> C {
    [d, c, b, a]
}

fn howell(z: Zq, rows: &[C]) -> ModuleKey {
    let q = z.q;
    let pv = |v: u32| pow_u64(z.p, v);
    let mut pending: Vec<[u64; 4]> =
        rows.iter().map(|r| r.map(|x| x as u64 % q)).filter(|r| r.iter().any(|&x| x != 0)).collect();
    let mut out: Vec<([u64; 4], usize, u32)> = Vec::new();
    for col in 0..4 {
        let Some(i) = (0..pending.len()).filter(|&i| pending[i][col] != 0).min_by_key(|&i| z.val(pending[i][col]))
        else {
            continue;
        };
        let mut piv = pending.swap_remove(i);
        let v = z.val(piv[col]);
        let uinv = mod_inverse(piv[col] / pv(v) % q, q).unwrap();
        piv = piv.map(|x| x * uinv % q);
        for s in pending.iter_mut() {
            let f = s[col] / pv(v);
            for c in 0..4 {
                s[c] = (s[c] + q * q - f * piv[c] % q) % q;
            }
        }
        let extra = piv.map(|x| x * pv(z.m - v) % q);
        pending.push(extra);
        pending.retain(|r| r.iter().any(|&x| x != 0));
        out.push((piv, col, v));
    }
    for i in 0..out.len() {
        let (row, col, v) = out[i];
        for k in 0..i {
            let f = out[k].0[col] / pv(v);
            for c in 0..4 {
                out[k].0[c] = (out[k].0[c] + q * q - f * row[c] % q) % q;
            }
        }
    }
    let mut key = [[0u32; 4]; 4];
    for (i, (row, _, _)) in out.iter().enumerate() {
        key[i] = row.map(|x| x as u32);
    }
    key
}

fn module_key(z: Zq, xs: &[C]) -> ModuleKey {
    let mut rows = vec![IDENTITY];
    rows.extend_from_slice(xs);
    howell(z, &rows)
}

/// Orbit statistics of one enumeration.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct OrbitStats {
    /// Optimal embeddings mod `p^N`.
    pub embeddings: usize,
    /// Distinct image orders mod `p^N`.
    pub images: usize,
    /// Γ1-orbits of embeddings fixed by the Atkin-Lehner move.
    pub fixed_embedding_orbits: usize,
    /// Γ1-orbits of images fixed by the Atkin-Lehner move.
    pub fixed_image_orbits: usize,
    /// `e3` recomputed from embeddings modulo automorphisms of `H`.
    pub e3_by_automorphisms: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Counts {
    pub e: [u64; 4],
    pub stats: OrbitStats,
}

fn count_generic<const K: usize>(
    z: Zq,
    r: u32,
    points: Vec<[C; K]>,
    auts: Vec<AutMove<K>>,
    budget: usize,
) -> Result<Counts> {
    let base = gamma1_moves(z, r);
    let lifted: Vec<Box<dyn Fn(&[C; K]) -> [C; K] + Sync + Send + '_>> = base
        .iter()
        .map(|f| {
            let f: &(dyn Fn(C) -> C + Sync + Send) = f.as_ref();
            Box::new(move |s: &[C; K]| s.map(f)) as Box<dyn Fn(&[C; K]) -> [C; K] + Sync + Send>
        })
        .collect();
    let w = |s: &[C; K]| s.map(atkin_lehner);
    let g1: Vec<Move<[C; K]>> = lifted.iter().map(|f| f.as_ref() as Move<[C; K]>).collect();
    let mut g2 = g1.clone();
    g2.push(&w);
    let x1 = orbits(&points, &g1, budget)?;
    let x2 = orbits(&points, &g2, budget)?;
    let fx = x1.fixed_by(w)?;
    check_merge("embeddings", x1.count(), x2.count(), fx)?;

    let mut ga = g1.clone();
    ga.extend(auts.iter().map(|f| f.as_ref() as Move<[C; K]>));
    let e3_aut = orbits(&points, &ga, budget)?.count();

    let keys: Vec<ModuleKey> = points.iter().map(|x| module_key(z, x)).collect::<HashSet<_>>().into_iter().collect();
    let key_move = |f| key_move(z, f);
    let kmoves: Vec<Box<dyn Fn(&ModuleKey) -> ModuleKey + Sync + Send + '_>> =
        base.iter().map(|f| Box::new(key_move(f.as_ref())) as Box<dyn Fn(&ModuleKey) -> ModuleKey + Sync + Send>).collect();
    let kw = key_move(&atkin_lehner);
    let k1: Vec<Move<ModuleKey>> = kmoves.iter().map(|f| f.as_ref() as Move<ModuleKey>).collect();
    let mut k2 = k1.clone();
    k2.push(&kw);
    let y1: Orbits<ModuleKey> = orbits(&keys, &k1, budget)?;
    let y2 = orbits(&keys, &k2, budget)?;
    let fy = y1.fixed_by(&kw)?;
    check_merge("image orders", y1.count(), y2.count(), fy)?;

    Ok(Counts {
        e: [x1.count(), x2.count(), y1.count(), y2.count()].map(|c| c as u64),
        stats: OrbitStats {
            embeddings: points.len(),
            images: keys.len(),
            fixed_embedding_orbits: fx,
            fixed_image_orbits: fy,
            e3_by_automorphisms: e3_aut,
        },
    })
}

fn key_move<'a>(z: Zq, f: &'a (dyn Fn(C) -> C + Sync + Send)) -> impl Fn(&ModuleKey) -> ModuleKey + Sync + Send + 'a {
    move |k: &ModuleKey| {
        let rows: Vec<C> = k.iter().map(|row| f(*row)).collect();
        howell(z, &rows)
    }
}

fn check_merge(what: &str, e_small: usize, e_big: usize, fixed: usize) -> Result<()> {
    if 2 * e_big != e_small + fixed {
        return Err(Error::InvalidInput(format!(
            "index-2 merge identity fails for {what}: 2*{e_big} != {e_small} + {fixed}"
        )));
    }
    Ok(())
}

type AutMove<const K: usize> = Box<dyn Fn(&[C; K]) -> [C; K] + Sync + Send>;

fn counts_at(spec: &OrderSpec, r: u32, n: u32, budget: usize) -> Result<Counts> {
    let z = Zq::new(spec.p, n);
    let unit_gens: Vec<i128> = unit_group_generators(z.p, z.m).into_iter().map(|g| g as i128).collect();
    match spec.kind {
        OrderKind::Nilpotent => {
            let auts: Vec<AutMove<1>> = unit_gens
                .iter()
                .map(|&g| Box::new(move |s: &[C; 1]| [s[0].map(|x| z.red(g * x as i128))]) as AutMove<1>)
                .collect();
            count_generic(z, r, nilpotent_points(z, r), auts, budget)
        }
        OrderKind::SplitCommutative { t } => {
            let pt = z.pw(t);
            let swap: AutMove<1> = Box::new(move |s: &[C; 1]| {
                let [a, b, c, d] = s[0].map(|x| x as i128);
                [[z.red(pt - a), z.red(-b), z.red(-c), z.red(pt - d)]]
            });
            count_generic(z, r, split_points(z, r, t), vec![swap], budget)
        }
        OrderKind::Triangular { t } => {
            let mut auts: Vec<AutMove<2>> = vec![Box::new(move |s: &[C; 2]| {
                let x1: C = std::array::from_fn(|i| z.red(s[0][i] as i128 - s[1][i] as i128));
                [x1, s[1]]
            })];
            for &g in &unit_gens {
                auts.push(Box::new(move |s: &[C; 2]| [s[0], s[1].map(|x| z.red(g * x as i128))]));
            }
            count_generic(z, r, triangular_points(z, r, t), auts, budget)
        }
        other => Err(Error::UnsupportedKind(other.name().to_string())),
    }
}

/// Smallest truncation exponent used by default.
pub fn default_precision(spec: &OrderSpec, r: u32) -> Result<u32> {
    match spec.kind {
        OrderKind::Nilpotent => Ok(r + 1),
        OrderKind::SplitCommutative { t } => Ok(r.max(t) + 1),
        OrderKind::Triangular { t } => Ok((t + 2).max(r.div_ceil(2) + 1)),
        other => Err(Error::UnsupportedKind(other.name().to_string())),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleReport {
    #[serde(skip)]
    pub evector: EVector,
    pub precision: u32,
    pub counts: Counts,
    pub counts_next: Counts,
    pub stabilized: bool,
}

/// Counts at `p^n` and `p^(n+1)`. Fails with `NotStabilized` when they differ.
pub fn oracle_evector(spec: &OrderSpec, r: u32, n: Option<u32>, budget: usize) -> Result<OracleReport> {
    let n = match n {
        Some(n) => n,
        None => default_precision(spec, r)?,
    };
    let (a, b) = rayon::join(|| counts_at(spec, r, n, budget), || counts_at(spec, r, n + 1, budget));
    let (a, b) = (a?, b?);
    if a.e != b.e {
        return Err(Error::NotStabilized(format!("counts {:?} at N={n} but {:?} at N={}", a.e, b.e, n + 1)));
    }
    if a.stats.e3_by_automorphisms as u64 != a.e[2] {
        return Err(Error::InvalidInput(format!(
            "image-order count {} disagrees with the automorphism count {}",
            a.e[2], a.stats.e3_by_automorphisms
        )));
    }
    Ok(OracleReport { evector: EVector::from_counts(a.e, Method::Oracle), precision: n, counts: a, counts_next: b, stabilized: true })
}

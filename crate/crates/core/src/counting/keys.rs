//! Invariant keys. With `H` fixed in standard position, optimal embeddings up to
//! `Γ1` correspond to oriented paths `P` (the paths of the Eichler orders
//! containing `H` optimally) up to the centralizer of `H`. Each path gets a
//! complete invariant for that action.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::Serialize;

use super::{orbits, EVector, Method, Move, DEFAULT_ORBIT_BUDGET};
use crate::bt_tree::{enumerate_region, hull_of, walks_from, Ball, End, Point, Walk};
use crate::error::{Error, Result};
use crate::moebius::{act_on_ball_lattice, cross_ratio, end_beyond, MoebiusMap};
use crate::orders::{branch_symbolic, optimality, standard_order, EichlerOrder, OrderKind, OrderSpec, Stem};
use crate::padic::{pow_u64, unit_group_generators, PAdicScalar};

pub type Key = Vec<i64>;
/// An oriented path of length `r` along which `H` embeds optimally.
pub type Configuration = Walk;

const PREC: u32 = 24;

fn unsupported(kind: &OrderKind) -> Error {
    Error::UnsupportedKind(kind.name().to_string())
}

/// Optimal oriented paths of length `r`, up to the centralizer of `H`.
pub fn configurations(spec: &OrderSpec, r: u32) -> Result<Vec<Configuration>> {
    let p = spec.p;
    let origin = Ball::zero_chain(p, 0);
    let branch = branch_symbolic(spec);
    let starts: Vec<Ball> = match spec.kind {
        // translations move any start onto the chain B_0^[n]
        OrderKind::Nilpotent => (-(r as i64) - 1..=1).map(|n| Ball::zero_chain(p, n)).collect(),
        // scalings by powers of p move the projection of the start to the origin
        OrderKind::SplitCommutative { t } => enumerate_region(&origin, t + 1)
            .into_iter()
            .filter(|v| Stem::Apartment.projection(v) == origin)
            .collect(),
        // trivial centralizer
        OrderKind::Triangular { t } => enumerate_region(&origin, r + t + 1),
        other => return Err(unsupported(&other)),
    };
    let h = standard_order(spec, PREC);
    let found: Vec<Vec<Walk>> = starts
        .par_iter()
        .filter(|v| branch.contains(v))
        .map(|v0| {
            let mut out = Vec::new();
            for w in walks_from(v0, r as usize) {
                if !w.vertices().iter().all(|v| branch.contains(v)) {
                    continue;
                }
                let e = EichlerOrder { p, r, path: w.clone() };
                if optimality(&h, &e, PREC)? == Some(true) {
                    out.push(w);
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(found.concat())
}

fn shift(b: &Ball, cn: u64, cd: u32) -> Ball {
    let p = b.prime() as i128;
    let (num, d) = b.center_parts();
    let dd = d.max(cd);
    Ball::new(b.prime(), num as i128 * p.pow(dd - d) - cn as i128 * p.pow(dd - cd), dd, b.level())
}

fn scale(b: &Ball, unit: i128) -> Ball {
    let (num, d) = b.center_parts();
    Ball::new(b.prime(), num as i128 * unit, d, b.level())
}

fn plus_one(b: &Ball) -> Ball {
    let (num, d) = b.center_parts();
    Ball::new(b.prime(), num as i128 + (b.prime() as i128).pow(d), d, b.level())
}

fn nilpotent_key(r: u32, path: &Walk) -> Result<Key> {
    let (side, w) = if path.first().level() == 0 {
        (0, path.clone())
    } else if path.last().level() == 0 {
        (1, path.reversed())
    } else {
        return Err(Error::ShapeMismatch("no end of the path on the top of the leaf".into()));
    };
    let (cn, cd) = w.first().center_parts();
    let w: Vec<Ball> = w.vertices().iter().map(|b| shift(b, cn, cd)).collect();
    let i = -w.iter().map(|b| b.level()).min().unwrap();
    let down = r as i64 - i;
    if down == 0 {
        return Ok(vec![side, i, 0]);
    }
    let (num, d) = w.last().unwrap().center_parts();
    if d as i64 != i {
        return Err(Error::ShapeMismatch("far end does not branch off the chain at its apex".into()));
    }
    Ok(vec![side, i, (num % pow_u64(w[0].prime(), down as u32)) as i64])
}

fn split_key(path: &Walk) -> Result<Key> {
    if path.is_empty() {
        return Ok(vec![]);
    }
    let p = path.first().prime();
    let (v0, vr) = (path.first(), path.last());
    let items = [End::Infinity, End::Finite(PAdicScalar::zero(p)), End::Infinity, End::Infinity];
    let defining = [Point::End(items[0]), Point::End(items[1]), Point::Ball(v0), Point::Ball(vr)];
    let hull = hull_of(&defining)?;
    let q = hull.quartet.clone().unwrap();
    let (u0, ur) = (q.pendants[2].unwrap(), q.pendants[3].unwrap());
    let m = q.l + u0.min(ur);
    let mut key = vec![q.split[1] as i64, q.l as i64, u0 as i64, ur as i64];
    if m == 0 {
        key.extend([0, 0]);
        return Ok(key);
    }
    let far = [hull.anchors[0], hull.anchors[1]];
    let e0 = end_beyond(&v0, &[vr, far[0], far[1]], PREC)?;
    let er = end_beyond(&vr, &[v0, far[0], far[1]], PREC)?;
    let ends = [items[0], items[1], e0, er];
    let [a, b, c, d] = q.split.map(|i| ends[i]);
    let cr = cross_ratio(&a, &b, &c, &d)?;
    let v = cr.valuation().finite().ok_or(Error::IndistinguishableEnds)?;
    let unit = cr.unit().ok_or(Error::IndistinguishableEnds)?;
    key.extend([v, (unit % pow_u64(p, m as u32)) as i64]);
    Ok(key)
}

fn triangular_key(t: u32, r: u32, path: &Walk) -> Result<Key> {
    let p = path.first().prime();
    let spec = OrderSpec::new(p, OrderKind::Triangular { t });
    let branch = branch_symbolic(&spec);
    let origin = Ball::zero_chain(p, 0);
    let stem = Stem::Ray { origin, toward_infinity: true };
    let qualifies = |v: &Ball| branch.is_endpoint(v) && stem.projection(v) == origin;
    let (side, w) = if qualifies(&path.first()) {
        (0, path.clone())
    } else if qualifies(&path.last()) {
        (1, path.reversed())
    } else {
        return Err(Error::ShapeMismatch("no end of the path over the border of the ray".into()));
    };
    if t == 0 {
        return Ok(vec![side]);
    }
    let z0 = w.first().center(PREC);
    let zr = w.last().center(PREC);
    let diff = zr - z0;
    let s = PAdicScalar::p_power(p, 2 * t as i64 - r as i64, PREC);
    let one = PAdicScalar::one(p, PREC);
    // positions of the ends 0 and -1 of H relative to the path
    let x = (s * -z0).checked_div(&diff)?.residue(t)?;
    let y = (s * (-one - z0)).checked_div(&diff)?.residue(t)?;
    Ok(vec![side, x as i64, y as i64])
}

/// Complete invariant of a configuration under the centralizer of `H`.
pub fn invariant_key(spec: &OrderSpec, r: u32, cfg: &Configuration) -> Result<Key> {
    if cfg.len() != r as usize {
        return Err(Error::ShapeMismatch(format!("path of length {} at level {r}", cfg.len())));
    }
    match spec.kind {
        OrderKind::Nilpotent => nilpotent_key(r, cfg),
        OrderKind::SplitCommutative { .. } => split_key(cfg),
        OrderKind::Triangular { t } => triangular_key(t, r, cfg),
        other => Err(unsupported(&other)),
    }
}

type PathMove = Box<dyn Fn(&Walk) -> Result<Walk> + Sync + Send>;

/// Normalizer of `H` modulo its centralizer, as maps on paths.
fn normalizer_moves(spec: &OrderSpec, r: u32) -> Result<Vec<PathMove>> {
    let p = spec.p;
    let units = || unit_group_generators(p, r + 2).into_iter().map(|g| g as i128).collect::<Vec<_>>();
    let scalings = || -> Vec<PathMove> {
        units()
            .into_iter()
            .map(|g| Box::new(move |w: &Walk| Ok(Walk(w.vertices().iter().map(|b| scale(b, g)).collect()))) as PathMove)
            .collect()
    };
    Ok(match spec.kind {
        OrderKind::Nilpotent => scalings(),
        OrderKind::SplitCommutative { .. } => {
            let inv = MoebiusMap::from_ints(p, [[0, 1], [1, 0]], PREC)?;
            vec![Box::new(move |w: &Walk| {
                Ok(Walk(w.vertices().iter().map(|b| act_on_ball_lattice(&inv, b, PREC)).collect::<Result<_>>()?))
            })]
        }
        OrderKind::Triangular { .. } => {
            let mut v = scalings();
            v.push(Box::new(|w: &Walk| Ok(Walk(w.vertices().iter().map(plus_one).collect()))));
            v
        }
        other => return Err(unsupported(&other)),
    })
}

fn look(t: &HashMap<Key, Key>) -> impl Fn(&Key) -> Key + Sync + '_ {
    move |k: &Key| t[k].clone()
}

/// Counts from invariant keys, with the sizes of the enumeration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KeyReport {
    #[serde(skip)]
    pub evector: EVector,
    pub configurations: usize,
    pub keys: usize,
}

pub fn key_evector(spec: &OrderSpec, r: u32) -> Result<KeyReport> {
    let paths = configurations(spec, r)?;
    let mut reps: BTreeMap<Key, Walk> = BTreeMap::new();
    for w in &paths {
        reps.entry(invariant_key(spec, r, w)?).or_insert_with(|| w.clone());
    }
    let keys: Vec<Key> = reps.keys().cloned().collect();
    if keys.is_empty() {
        let mut e = EVector::from_counts([0; 4], Method::Keys);
        e.reason = Some("no optimal embedding".into());
        return Ok(KeyReport { evector: e, configurations: 0, keys: 0 });
    }
    let image_table = |f: &dyn Fn(&Walk) -> Result<Walk>| -> Result<HashMap<Key, Key>> {
        reps.iter().map(|(k, w)| Ok((k.clone(), invariant_key(spec, r, &f(w)?)?))).collect()
    };
    let reversal = image_table(&|w: &Walk| Ok(w.reversed()))?;
    let norm: Vec<HashMap<Key, Key>> =
        normalizer_moves(spec, r)?.iter().map(|f| image_table(f.as_ref())).collect::<Result<_>>()?;
    let rev_move = look(&reversal);
    let norm_moves: Vec<_> = norm.iter().map(look).collect();
    let m_rev: Vec<Move<Key>> = vec![&rev_move];
    let m_norm: Vec<Move<Key>> = norm_moves.iter().map(|f| f as Move<Key>).collect();
    let mut m_all = m_norm.clone();
    m_all.push(&rev_move);
    let b = DEFAULT_ORBIT_BUDGET;
    let e = [keys.len(), orbits(&keys, &m_rev, b)?.count(), orbits(&keys, &m_norm, b)?.count(), orbits(&keys, &m_all, b)?.count()];
    Ok(KeyReport {
        evector: EVector::from_counts(e.map(|x| x as u64), Method::Keys),
        configurations: paths.len(),
        keys: keys.len(),
    })
}

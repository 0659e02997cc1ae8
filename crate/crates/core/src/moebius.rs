//! PGL2(Q_p) acting on ends and vertices, and cross-ratio rigidity.
//!
//! Convention: `[[a, b], [c, d]]` acts on ends by `z -> (az + b) / (cz + d)`
//! and on a lattice with columns `(x, y)` through the swapped matrix
//! `[[d, c], [b, a]]`. With this choice `[[1, 1], [0, 1]]` is `z -> z + 1`
//! and fixes exactly the balls of exponent `n <= 0`.

use std::fmt;

use serde::Serialize;

use crate::bt_tree::{canonical_ball, geodesic_balls, hull_of, lattice_to_ball, Ball, End, Lattice2, Point};
use crate::error::{Error, Result};
use crate::matrix::Mat2;
use crate::padic::{PAdicScalar, Valuation};

/// An invertible matrix up to scalars, normalized so the smallest entry valuation is 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MoebiusMap {
    m: Mat2,
}

impl MoebiusMap {
    pub fn new(m: Mat2) -> Result<MoebiusMap> {
        if m.det().is_zero() {
            return Err(Error::InvalidInput("matrix is singular".into()));
        }
        let v = m.min_valuation().finite().unwrap();
        let p = m.prime();
        let prec = m.entries().iter().filter_map(|e| e.precision()).max().unwrap_or(1);
        Ok(MoebiusMap { m: m.scale(&PAdicScalar::p_power(p, -v, prec)) })
    }

    pub fn from_ints(p: u64, m: [[i128; 2]; 2], prec: u32) -> Result<MoebiusMap> {
        MoebiusMap::new(Mat2::from_ints(p, m, prec))
    }

    pub fn identity(p: u64, prec: u32) -> MoebiusMap {
        MoebiusMap { m: Mat2::identity(p, prec) }
    }

    pub fn matrix(&self) -> &Mat2 {
        &self.m
    }

    pub fn prime(&self) -> u64 {
        self.m.prime()
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &MoebiusMap) -> Result<MoebiusMap> {
        MoebiusMap::new(self.m.mul(&other.m))
    }

    pub fn inverse(&self) -> Result<MoebiusMap> {
        MoebiusMap::new(self.m.adjugate())
    }
}

impl fmt::Display for MoebiusMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.m.fmt(f)
    }
}

fn quotient(num: PAdicScalar, den: PAdicScalar) -> Result<End> {
    if den.is_zero() {
        if num.is_zero() {
            return Err(Error::PrecisionExhausted("0/0 while applying a Moebius map".into()));
        }
        return Ok(End::Infinity);
    }
    Ok(End::Finite(num.checked_div(&den)?))
}

pub fn apply_to_end(s: &MoebiusMap, e: &End) -> Result<End> {
    let m = s.matrix();
    match e {
        End::Infinity => quotient(m.a, m.c),
        End::Finite(z) => quotient(m.a * *z + m.b, m.c * *z + m.d),
    }
}

/// Image of a vertex through the lattice model.
pub fn act_on_ball_lattice(s: &MoebiusMap, b: &Ball, prec: u32) -> Result<Ball> {
    let l = b.lattice(prec);
    let moved = Lattice2::from_basis(s.matrix().swapped().mul(&l.basis));
    lattice_to_ball(&moved)
}

/// A ball of P1: a ball of Q_p or the complement of one (which contains infinity).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum P1Ball {
    Ball(Ball),
    Complement(Ball),
}

impl P1Ball {
    fn map_ball(self, f: impl Fn(Ball) -> Result<P1Ball>) -> Result<P1Ball> {
        match self {
            P1Ball::Ball(b) => f(b),
            P1Ball::Complement(b) => Ok(match f(b)? {
                P1Ball::Ball(x) => P1Ball::Complement(x),
                P1Ball::Complement(x) => P1Ball::Ball(x),
            }),
        }
    }
}

/// Elementary factors of a Moebius map.
#[derive(Clone, Copy, Debug)]
enum Factor {
    Translate(PAdicScalar),
    Scale(PAdicScalar),
    Invert,
}

fn factorize(s: &MoebiusMap) -> Result<Vec<Factor>> {
    let m = s.matrix();
    if m.c.is_zero() {
        if !m.c.is_exact_zero() {
            return Err(Error::PrecisionExhausted("cannot decide whether c = 0".into()));
        }
        return Ok(vec![Factor::Scale(m.a.checked_div(&m.d)?), Factor::Translate(m.b.checked_div(&m.d)?)]);
    }
    // (az+b)/(cz+d) = a/c - det / (c^2 (z + d/c))
    let det = m.det();
    Ok(vec![
        Factor::Translate(m.d.checked_div(&m.c)?),
        Factor::Invert,
        Factor::Scale((-det).checked_div(&(m.c * m.c))?),
        Factor::Translate(m.a.checked_div(&m.c)?),
    ])
}

fn apply_factor(f: &Factor, x: P1Ball, prec: u32) -> Result<P1Ball> {
    x.map_ball(|b| {
        let p = b.prime();
        let z = b.center(prec);
        match f {
            Factor::Translate(t) => Ok(P1Ball::Ball(canonical_ball(p, &(z + *t), b.level())?)),
            Factor::Scale(s) => {
                let v = s.valuation().finite().ok_or(Error::DivisionByZero)?;
                Ok(P1Ball::Ball(canonical_ball(p, &(z * *s), b.level() + v)?))
            }
            Factor::Invert => match b.center_valuation() {
                Valuation::Finite(v) if v < b.level() => {
                    Ok(P1Ball::Ball(canonical_ball(p, &z.inverse()?, b.level() - 2 * v)?))
                }
                _ => Ok(P1Ball::Complement(Ball::zero_chain(p, 1 - b.level()))),
            },
        }
    })
}

/// Image of a vertex by pushing its partition `{B^c, B_1, ..., B_p}` through
/// translations, scalings and one inversion.
pub fn act_on_ball_partition(s: &MoebiusMap, b: &Ball, prec: u32) -> Result<Ball> {
    let factors = factorize(s)?;
    let mut pieces: Vec<P1Ball> = vec![P1Ball::Complement(*b)];
    pieces.extend(b.children().into_iter().map(P1Ball::Ball));
    for f in &factors {
        pieces = pieces.into_iter().map(|x| apply_factor(f, x, prec)).collect::<Result<_>>()?;
    }
    let outer: Vec<Ball> = pieces
        .iter()
        .filter_map(|x| if let P1Ball::Complement(e) = x { Some(*e) } else { None })
        .collect();
    if outer.len() != 1 {
        return Err(Error::PrecisionExhausted("image pieces do not form a partition".into()));
    }
    let e = outer[0];
    let mut kids: Vec<Ball> = pieces
        .iter()
        .filter_map(|x| if let P1Ball::Ball(c) = x { Some(*c) } else { None })
        .collect();
    kids.sort();
    let mut want = e.children();
    want.sort();
    if kids != want {
        return Err(Error::PrecisionExhausted("image pieces are not the children of one ball".into()));
    }
    Ok(e)
}

fn distinct_ends(es: &[End]) -> Result<()> {
    for i in 0..es.len() {
        for j in 0..i {
            if !es[i].distinguishable(&es[j]) {
                return Err(Error::IndistinguishableEnds);
            }
        }
    }
    Ok(())
}

fn diff(x: &End, y: &End) -> PAdicScalar {
    match (x, y) {
        (End::Finite(a), End::Finite(b)) => *a - *b,
        _ => unreachable!("infinite ends are handled by the caller"),
    }
}

/// `[a, b; c, d] = (a-c)(b-d) / ((b-c)(a-d))`, dropping factors that involve infinity.
pub fn cross_ratio(a: &End, b: &End, c: &End, d: &End) -> Result<PAdicScalar> {
    distinct_ends(&[*a, *b, *c, *d])?;
    let (num, den) = match (a, b, c, d) {
        (End::Infinity, ..) => (diff(b, d), diff(b, c)),
        (_, End::Infinity, ..) => (diff(a, c), diff(a, d)),
        (_, _, End::Infinity, _) => (diff(b, d), diff(a, d)),
        (_, _, _, End::Infinity) => (diff(a, c), diff(b, c)),
        _ => (diff(a, c) * diff(b, d), diff(b, c) * diff(a, d)),
    };
    num.checked_div(&den)
}

/// The map sending `(a, b, c)` to `(inf, 0, 1)`.
fn to_standard(a: &End, b: &End, c: &End, p: u64, prec: u32) -> Result<MoebiusMap> {
    distinct_ends(&[*a, *b, *c])?;
    let one = PAdicScalar::one(p, prec);
    let zero = PAdicScalar::zero(p);
    let m = match (a, b, c) {
        (End::Infinity, End::Finite(b), End::Finite(c)) => Mat2::new(one, -*b, zero, *c - *b),
        (End::Finite(a), End::Infinity, End::Finite(c)) => Mat2::new(zero, *c - *a, one, -*a),
        (End::Finite(a), End::Finite(b), End::Infinity) => Mat2::new(one, -*b, one, -*a),
        (End::Finite(a), End::Finite(b), End::Finite(c)) => {
            Mat2::new(*c - *a, -(*b * (*c - *a)), *c - *b, -(*a * (*c - *b)))
        }
        _ => unreachable!("ends are distinct"),
    };
    MoebiusMap::new(m)
}

fn prime_of(es: &[End]) -> u64 {
    es.iter()
        .find_map(|e| if let End::Finite(z) = e { Some(z.prime()) } else { None })
        .unwrap_or(0)
}

/// The unique map with `σ(a, b, c) = (a', b', c')`.
pub fn map_from_triples(src: [End; 3], dst: [End; 3], prec: u32) -> Result<MoebiusMap> {
    let p = prime_of(&src).max(prime_of(&dst));
    if p == 0 {
        return Err(Error::IndistinguishableEnds);
    }
    let xi = to_standard(&src[0], &src[1], &src[2], p, prec)?;
    let eta = to_standard(&dst[0], &dst[1], &dst[2], p, prec)?;
    eta.inverse()?.compose(&xi)
}

/// An end reached from `x` by leaving through the least neighbor that does not
/// lead towards any of `others`.
pub fn end_beyond(x: &Ball, others: &[Ball], prec: u32) -> Result<End> {
    let toward: Vec<Ball> = others
        .iter()
        .filter(|o| *o != x)
        .map(|o| geodesic_balls(x, o).0[1])
        .collect();
    let exit = x
        .neighbors()
        .into_iter()
        .find(|nb| !toward.contains(nb))
        .ok_or_else(|| Error::ShapeMismatch("no free direction".into()))?;
    if exit == x.parent() {
        Ok(End::Infinity)
    } else {
        Ok(End::Finite(exit.center(prec.max((exit.level() + 2).max(1) as u32))))
    }
}

fn marked_triple_shape(s: &[Ball; 3]) -> Result<[Option<u64>; 3]> {
    let h = hull_of(&s.map(Point::Ball))?;
    Ok(h.triple_pendants.unwrap())
}

/// A map carrying the marked triple `s` onto `t`, if their hulls are isomorphic.
pub fn triplets_conjugate(s: &[Ball; 3], t: &[Ball; 3], prec: u32) -> Result<Option<MoebiusMap>> {
    if marked_triple_shape(s)? != marked_triple_shape(t)? {
        return Ok(None);
    }
    let ends = |x: &[Ball; 3]| -> Result<[End; 3]> {
        Ok([
            end_beyond(&x[0], &[x[1], x[2]], prec)?,
            end_beyond(&x[1], &[x[0], x[2]], prec)?,
            end_beyond(&x[2], &[x[0], x[1]], prec)?,
        ])
    };
    let sigma = map_from_triples(ends(s)?, ends(t)?, prec)?;
    for (a, b) in s.iter().zip(t) {
        if act_on_ball_lattice(&sigma, a, prec)? != *b {
            return Err(Error::PrecisionExhausted("conjugator failed to carry the triple".into()));
        }
    }
    Ok(Some(sigma))
}

/// Hull parameters `(r, s, t, u, l)` of a quartet `(A, B, C, D)` with split `{A,B}|{C,D}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct QuartetShape {
    pub r: u64,
    pub s: u64,
    pub t: u64,
    pub u: u64,
    pub l: u64,
    /// Separation exponent `l + u`.
    pub m: u64,
}

pub fn quartet_shape(balls: &[Ball; 4]) -> Result<QuartetShape> {
    let h = hull_of(&balls.map(Point::Ball))?;
    let q = h.quartet.unwrap();
    if q.l > 0 && q.split != [0, 1, 2, 3] {
        return Err(Error::ShapeMismatch(format!("hull splits as {:?}", q.split)));
    }
    let [r, s, t, u] = q.pendants.map(|x| x.unwrap());
    if u > r.min(s).min(t) {
        return Err(Error::ShapeMismatch("u is not the minimal pendant".into()));
    }
    Ok(QuartetShape { r, s, t, u, l: q.l, m: q.l + u })
}

/// Four vertices with ends chosen beyond them.
#[derive(Clone, Copy, Debug)]
pub struct Quartet {
    pub balls: [Ball; 4],
    pub ends: [End; 4],
}

impl Quartet {
    /// Use the least free direction beyond each ball.
    pub fn with_default_ends(balls: [Ball; 4], prec: u32) -> Result<Quartet> {
        let mut ends = [End::Infinity; 4];
        for i in 0..4 {
            let others: Vec<Ball> = (0..4).filter(|j| *j != i).map(|j| balls[j]).collect();
            ends[i] = end_beyond(&balls[i], &others, prec)?;
        }
        Ok(Quartet { balls, ends })
    }

    pub fn cross_ratio(&self) -> Result<PAdicScalar> {
        let [a, b, c, d] = &self.ends;
        cross_ratio(a, b, c, d)
    }
}

/// Whether `x ≡ y (mod p^m)` for p-integral values.
pub fn congruent(x: &PAdicScalar, y: &PAdicScalar, m: u64) -> Result<bool> {
    let d = *x - *y;
    match d.valuation() {
        Valuation::Finite(v) => Ok(v >= m as i64),
        Valuation::Infinite => match d.absolute_precision() {
            Some(a) if a < m as i64 => Err(Error::PrecisionExhausted(format!(
                "difference known modulo p^{a}, need p^{m}"
            ))),
            _ => Ok(true),
        },
    }
}

/// Conjugacy test for quartets in the shape `{A,B}|{C,D}` with `u` minimal:
/// equal shapes and cross-ratios congruent modulo `p^(l+u)`.
pub fn quartets_conjugate(s: &Quartet, t: &Quartet) -> Result<bool> {
    let a = quartet_shape(&s.balls)?;
    let b = quartet_shape(&t.balls)?;
    if a != b {
        return Ok(false);
    }
    congruent(&s.cross_ratio()?, &t.cross_ratio()?, a.m)
}

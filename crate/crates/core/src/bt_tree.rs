//! The Bruhat-Tits tree of PGL2(Q_p) as the tree of balls of Q_p.
//!
//! A vertex is a ball `B_z^[n] = z + p^n Z_p`. Centers are exact rationals
//! `num / p^d`, reduced modulo `p^n`.

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::fmt;

use num_integer::Integer;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::Mat2;
use crate::padic::{pow_u64, val_int, PAdicScalar, Valuation};

/// A ball `B_z^[n]`, canonically reduced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Ball {
    p: u64,
    n: i64,
    /// Center is `num / p^d` with `d` minimal and `0 <= num < p^(n+d)`.
    d: u32,
    num: u64,
}

fn normalize_center(p: u64, num: i128, mut d: u32, n: i64) -> (u64, u32) {
    if n + d as i64 <= 0 {
        return (0, 0);
    }
    let m = pow_u64(p, (n + d as i64) as u32) as i128;
    let mut num = num.mod_floor(&m) as u64;
    while d > 0 && num.is_multiple_of(p) {
        num /= p;
        d -= 1;
    }
    if num == 0 {
        d = 0;
    }
    (num, d)
}

/// Valuation of `a/p^da - b/p^db` (None when equal).
fn rational_diff_valuation(p: u64, a: u64, da: u32, b: u64, db: u32) -> Option<i64> {
    let d = da.max(db);
    let x = a as i128 * (p as i128).pow(d - da) - b as i128 * (p as i128).pow(d - db);
    if x == 0 {
        None
    } else {
        Some(val_int(p, x) as i64 - d as i64)
    }
}

impl Ball {
    /// The ball around `num / p^d` with exponent `n`.
    pub fn new(p: u64, num: i128, d: u32, n: i64) -> Ball {
        let (num, d) = normalize_center(p, num, d, n);
        Ball { p, n, d, num }
    }

    pub fn from_int(p: u64, z: i128, n: i64) -> Ball {
        Ball::new(p, z, 0, n)
    }

    /// `B_0^[n]`.
    pub fn zero_chain(p: u64, n: i64) -> Ball {
        Ball::new(p, 0, 0, n)
    }

    pub fn prime(&self) -> u64 {
        self.p
    }

    pub fn level(&self) -> i64 {
        self.n
    }

    /// Center as `(num, d)` meaning `num / p^d`.
    pub fn center_parts(&self) -> (u64, u32) {
        (self.num, self.d)
    }

    /// Center as a scalar carrying `prec` digits.
    pub fn center(&self, prec: u32) -> PAdicScalar {
        if self.num == 0 {
            PAdicScalar::zero(self.p)
        } else {
            PAdicScalar::from_parts(self.p, -(self.d as i64), self.num as i128, prec)
        }
    }

    /// Valuation of the (exact) center.
    pub fn center_valuation(&self) -> Valuation {
        if self.num == 0 {
            Valuation::Infinite
        } else {
            Valuation::Finite(val_int(self.p, self.num as i128) as i64 - self.d as i64)
        }
    }

    /// The ball containing `self` at exponent `k <= n`.
    pub fn ancestor(&self, k: i64) -> Ball {
        assert!(k <= self.n, "ancestor must be at a lower exponent");
        Ball::new(self.p, self.num as i128, self.d, k)
    }

    /// Largest exponent `m` with both balls inside a common ball of exponent `m`.
    pub fn join_level(&self, other: &Ball) -> i64 {
        assert_eq!(self.p, other.p, "prime mismatch");
        let m = self.n.min(other.n);
        match rational_diff_valuation(self.p, self.num, self.d, other.num, other.d) {
            Some(v) => m.min(v),
            None => m,
        }
    }

    pub fn contains(&self, other: &Ball) -> bool {
        other.n >= self.n && self.join_level(other) == self.n
    }

    /// Whether the point `z` lies in this ball; needs `z` to absolute precision `n`.
    pub fn contains_point(&self, z: &PAdicScalar) -> Result<bool> {
        let prec = (self.n + self.d as i64 + 2).max(2) as u32;
        let diff = *z - self.center(prec.max(z.precision().unwrap_or(1)));
        match diff.valuation() {
            Valuation::Finite(v) => Ok(v >= self.n),
            Valuation::Infinite => match diff.absolute_precision() {
                Some(a) if a < self.n => Err(Error::PrecisionExhausted(format!(
                    "point known modulo p^{a}, ball needs p^{}",
                    self.n
                ))),
                _ => Ok(true),
            },
        }
    }

    pub fn distance(&self, other: &Ball) -> u64 {
        let m = self.join_level(other);
        ((self.n - m) + (other.n - m)) as u64
    }

    pub fn parent(&self) -> Ball {
        self.ancestor(self.n - 1)
    }

    /// The p balls of exponent n+1 inside this one, ordered by digit.
    pub fn children(&self) -> Vec<Ball> {
        let p = self.p as i128;
        // common denominator p^dd covering both the center and p^n
        let dd = (self.d as i64).max(-self.n).max(0) as u32;
        let base = self.num as i128 * p.pow(dd - self.d);
        let step = p.pow((self.n + dd as i64) as u32);
        (0..p).map(|i| Ball::new(self.p, base + i * step, dd, self.n + 1)).collect()
    }

    /// Parent first, then children.
    pub fn neighbors(&self) -> Vec<Ball> {
        let mut v = vec![self.parent()];
        v.extend(self.children());
        v
    }

    /// Lattice `Λ_{z,n}` with columns `(1, z)` and `(0, p^n)`.
    pub fn lattice(&self, prec: u32) -> Lattice2 {
        let p = self.p;
        let basis = Mat2::new(
            PAdicScalar::one(p, prec),
            PAdicScalar::zero(p),
            self.center(prec),
            PAdicScalar::p_power(p, self.n, prec),
        );
        Lattice2 { basis, tag: Some(LatticeTag { ball: *self, scale: 0 }) }
    }

    pub fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Ball {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.d == 0 {
            write!(f, "B_{}^[{}]", self.num, self.n)
        } else {
            write!(f, "B_{}/{}^[{}]", self.num, (self.p as u128).pow(self.d), self.n)
        }
    }
}

impl Serialize for Ball {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.label())
    }
}

/// Reduce `z` modulo `p^n` into a canonical ball.
pub fn canonical_ball(p: u64, z: &PAdicScalar, n: i64) -> Result<Ball> {
    let (num, d) = z.digits_below(n)?;
    Ok(Ball::new(p, num as i128, d, n))
}

pub fn ball_distance(b: &Ball, d: &Ball) -> u64 {
    b.distance(d)
}

pub fn neighbors(b: &Ball) -> Vec<Ball> {
    b.neighbors()
}

/// A point of P1(Q_p).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum End {
    Finite(PAdicScalar),
    Infinity,
}

impl End {
    pub fn int(p: u64, z: i128, prec: u32) -> End {
        End::Finite(PAdicScalar::from_int(p, z, prec))
    }

    /// Whether two ends can be told apart at stored precision.
    pub fn distinguishable(&self, other: &End) -> bool {
        match (self, other) {
            (End::Infinity, End::Infinity) => false,
            (End::Finite(a), End::Finite(b)) => !(*a - *b).is_zero(),
            _ => true,
        }
    }
}

impl fmt::Display for End {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            End::Finite(z) => write!(f, "{z}"),
            End::Infinity => write!(f, "inf"),
        }
    }
}

/// A vertex or an end.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Point {
    Ball(Ball),
    End(End),
}

/// Canonical tag: the lattice is `p^scale * Λ_{z,n}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatticeTag {
    pub ball: Ball,
    pub scale: i64,
}

/// A rank-2 lattice given by column generators.
#[derive(Clone, Copy, Debug)]
pub struct Lattice2 {
    /// Columns `(a, c)` and `(b, d)`.
    pub basis: Mat2,
    pub tag: Option<LatticeTag>,
}

impl Lattice2 {
    pub fn from_basis(basis: Mat2) -> Lattice2 {
        Lattice2 { basis, tag: None }
    }

    /// Column-reduce to the shape `(1, z), (0, p^n)` up to homothety and read the tag.
    pub fn canonicalize(&self) -> Result<Lattice2> {
        let ball = lattice_to_ball(self)?;
        let m = &self.basis;
        let s = m.a.valuation().min(m.b.valuation());
        let scale = s.finite().ok_or(Error::DivisionByZero)?;
        let prec = m.a.precision().or(m.b.precision()).unwrap_or(1);
        let mut l = ball.lattice(prec);
        l.basis = l.basis.scale(&PAdicScalar::p_power(ball.prime(), scale, prec));
        l.tag = Some(LatticeTag { ball, scale });
        Ok(l)
    }
}

pub fn ball_lattice_roundtrip(b: &Ball, prec: u32) -> Lattice2 {
    b.lattice(prec)
}

/// The vertex of the homothety class of `l`.
pub fn lattice_to_ball(l: &Lattice2) -> Result<Ball> {
    let m = &l.basis;
    let (x1, y1) = if m.a.valuation() <= m.b.valuation() { (m.a, m.c) } else { (m.b, m.d) };
    let p = x1.prime();
    let det = m.det();
    let vx = x1.valuation().finite().ok_or(Error::DivisionByZero)?;
    let vdet = match det.valuation() {
        Valuation::Finite(v) => v,
        Valuation::Infinite => {
            return Err(Error::PrecisionExhausted("lattice basis is singular to stored precision".into()))
        }
    };
    let n = vdet - 2 * vx;
    let z = y1.checked_div(&x1)?;
    canonical_ball(p, &z, n)
}

/// A walk without backtracking.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Walk(pub Vec<Ball>);

impl Walk {
    pub fn len(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.0.len() <= 1
    }

    pub fn vertices(&self) -> &[Ball] {
        &self.0
    }

    pub fn first(&self) -> Ball {
        self.0[0]
    }

    pub fn last(&self) -> Ball {
        *self.0.last().unwrap()
    }

    pub fn reversed(&self) -> Walk {
        Walk(self.0.iter().rev().copied().collect())
    }

    /// Consecutive vertices adjacent, no vertex repeated.
    pub fn is_valid(&self) -> bool {
        let distinct: HashSet<_> = self.0.iter().collect();
        distinct.len() == self.0.len() && self.0.windows(2).all(|w| w[0].distance(&w[1]) == 1)
    }
}

/// Geodesic between two vertices.
pub fn geodesic_balls(a: &Ball, b: &Ball) -> Walk {
    let m = a.join_level(b);
    let mut v: Vec<Ball> = (m..=a.level()).rev().map(|k| a.ancestor(k)).collect();
    v.extend((m + 1..=b.level()).map(|k| b.ancestor(k)));
    Walk(v)
}

/// Geodesic between vertices or ends; ends are truncated `margin` steps past
/// the last vertex at which the geodesic is determined by the other argument.
pub fn geodesic(a: &Point, b: &Point, margin: u32) -> Result<Walk> {
    if let (Point::Ball(x), Point::Ball(y)) = (a, b) {
        if x == y {
            return Err(Error::InvalidInput("geodesic endpoints coincide".into()));
        }
        return Ok(geodesic_balls(x, y));
    }
    let anchors = truncate_points(&[*a, *b], margin)?;
    Ok(geodesic_balls(&anchors[0], &anchors[1]))
}

/// Median of three vertices: the vertex common to the three geodesics.
pub fn median(a: &Ball, b: &Ball, c: &Ball) -> Ball {
    let k = (a.distance(b) + a.distance(c) - b.distance(c)) / 2;
    geodesic_balls(a, b).0[k as usize]
}

/// Replace ends by far-away vertices on the rays towards them.
///
/// Finite ends become `B_z^[hi]` and infinity becomes `B_0^[lo]` where `hi`
/// and `lo` lie `margin + 1` steps beyond every level at which the defining
/// items interact.
pub fn truncate_points(items: &[Point], margin: u32) -> Result<Vec<Ball>> {
    let mut hi: Option<i64> = None;
    let mut lo: Option<i64> = None;
    let bump = |slot: &mut Option<i64>, v: i64, up: bool| {
        *slot = Some(match *slot {
            None => v,
            Some(s) if up => s.max(v),
            Some(s) => s.min(v),
        });
    };
    let mut p = 0;
    for (i, x) in items.iter().enumerate() {
        match x {
            Point::Ball(b) => {
                p = b.prime();
                bump(&mut hi, b.level(), true);
                bump(&mut lo, b.level(), false);
                if let Valuation::Finite(v) = b.center_valuation() {
                    bump(&mut lo, v, false);
                }
            }
            Point::End(End::Finite(z)) => {
                p = z.prime();
                if let Valuation::Finite(v) = z.valuation() {
                    bump(&mut lo, v, false);
                    bump(&mut hi, v, true);
                }
            }
            Point::End(End::Infinity) => {}
        }
        for y in &items[..i] {
            match (x, y) {
                (Point::Ball(a), Point::Ball(b)) => {
                    if a == b {
                        return Err(Error::InvalidInput(format!("repeated vertex {a}")));
                    }
                    let j = a.join_level(b);
                    bump(&mut lo, j, false);
                }
                (Point::End(e), Point::End(f)) => {
                    if !e.distinguishable(f) {
                        return Err(Error::IndistinguishableEnds);
                    }
                    if let (End::Finite(z), End::Finite(w)) = (e, f) {
                        let v = (*z - *w).valuation().finite().unwrap();
                        bump(&mut hi, v, true);
                        bump(&mut lo, v, false);
                    }
                }
                (Point::End(End::Finite(z)), Point::Ball(b)) | (Point::Ball(b), Point::End(End::Finite(z))) => {
                    let prec = z.precision().unwrap_or(1).max(4);
                    let diff = *z - b.center(prec + (b.level() + 2).max(0) as u32);
                    if let Valuation::Finite(v) = diff.valuation() {
                        bump(&mut lo, v.min(b.level()), false);
                    }
                }
                _ => {}
            }
        }
    }
    let hi = hi.unwrap_or(0) + margin as i64 + 1;
    let lo = lo.unwrap_or(0).min(0) - margin as i64 - 1;
    items
        .iter()
        .map(|x| match x {
            Point::Ball(b) => Ok(*b),
            Point::End(End::Finite(z)) => canonical_ball(p.max(z.prime()), z, hi)
                .map_err(|_| Error::IndistinguishableEnds),
            Point::End(End::Infinity) => Ok(Ball::zero_chain(p.max(2), lo)),
        })
        .collect()
}

/// Shape of a four-item hull: the split `{X, Y} | {Z, W}`, the inner length
/// `l` and pendant lengths (None for ends).
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct QuartetHullShape {
    /// Indices `[X, Y, Z, W]` of the split `{X,Y}|{Z,W}`.
    pub split: [usize; 4],
    pub l: u64,
    /// Pendant length of each defining item, in input order.
    pub pendants: [Option<u64>; 4],
}

/// Minimal subtree spanned by balls and ends (ends truncated).
#[derive(Clone, Debug)]
pub struct Hull {
    pub defining: Vec<Point>,
    /// Vertices standing in for the defining items.
    pub anchors: Vec<Ball>,
    pub vertices: BTreeSet<Ball>,
    /// For three items, the median vertex U.
    pub center: Option<Ball>,
    /// For three items, distance of each item to the center (None for ends).
    pub triple_pendants: Option<[Option<u64>; 3]>,
    pub quartet: Option<QuartetHullShape>,
}

fn is_end(x: &Point) -> bool {
    matches!(x, Point::End(_))
}

pub fn hull_of(defining: &[Point]) -> Result<Hull> {
    if !(2..=4).contains(&defining.len()) {
        return Err(Error::InvalidInput("hull needs 2 to 4 items".into()));
    }
    let anchors = truncate_points(defining, 1)?;
    let mut vertices = BTreeSet::new();
    for a in &anchors[1..] {
        vertices.extend(geodesic_balls(&anchors[0], a).0);
    }
    let mut hull = Hull {
        defining: defining.to_vec(),
        anchors: anchors.clone(),
        vertices,
        center: None,
        triple_pendants: None,
        quartet: None,
    };
    let pend = |i: usize, d: u64| if is_end(&defining[i]) { None } else { Some(d) };
    if anchors.len() == 3 {
        let u = median(&anchors[0], &anchors[1], &anchors[2]);
        hull.center = Some(u);
        hull.triple_pendants = Some([0, 1, 2].map(|i| pend(i, anchors[i].distance(&u))));
    }
    if anchors.len() == 4 {
        let d = |i: usize, j: usize| anchors[i].distance(&anchors[j]);
        let splits = [[0, 1, 2, 3], [0, 2, 1, 3], [0, 3, 1, 2]];
        let sums: Vec<u64> = splits.iter().map(|s| d(s[0], s[1]) + d(s[2], s[3])).collect();
        let best = (0..3).min_by_key(|&i| (sums[i], i)).unwrap();
        let max = *sums.iter().max().unwrap();
        let [x, y, z, w] = splits[best];
        let u = median(&anchors[x], &anchors[y], &anchors[z]);
        let v = median(&anchors[z], &anchors[w], &anchors[x]);
        let mut pendants = [None; 4];
        pendants[x] = pend(x, anchors[x].distance(&u));
        pendants[y] = pend(y, anchors[y].distance(&u));
        pendants[z] = pend(z, anchors[z].distance(&v));
        pendants[w] = pend(w, anchors[w].distance(&v));
        hull.quartet = Some(QuartetHullShape { split: splits[best], l: (max - sums[best]) / 2, pendants });
    }
    Ok(hull)
}

/// All vertices within distance `r` of `base`, in breadth-first order.
pub fn enumerate_region(base: &Ball, r: u32) -> Vec<Ball> {
    let mut seen = HashSet::from([*base]);
    let mut out = vec![*base];
    let mut queue = VecDeque::from([(*base, 0u32)]);
    while let Some((b, d)) = queue.pop_front() {
        if d == r {
            continue;
        }
        for nb in b.neighbors() {
            if seen.insert(nb) {
                out.push(nb);
                queue.push_back((nb, d + 1));
            }
        }
    }
    out
}

/// All walks without backtracking of length `r` starting at `start`.
pub fn walks_from(start: &Ball, r: usize) -> Vec<Walk> {
    let mut out = Vec::new();
    let mut stack = vec![vec![*start]];
    while let Some(w) = stack.pop() {
        if w.len() == r + 1 {
            out.push(Walk(w));
            continue;
        }
        let last = *w.last().unwrap();
        let prev = if w.len() >= 2 { Some(w[w.len() - 2]) } else { None };
        for nb in last.neighbors().into_iter().rev() {
            if Some(nb) != prev {
                let mut nw = w.clone();
                nw.push(nb);
                stack.push(nw);
            }
        }
    }
    out
}

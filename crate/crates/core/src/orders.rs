//! Suborders of M2(Q_p) in standard position, their branches and optimality.
//!
//! Orders act on lattices through the same coordinate swap as Moebius maps,
//! so the maximal order of `σ∗B` is `σ D_B σ^{-1}`.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bt_tree::{enumerate_region, Ball, End, Walk};
use crate::error::{Error, Result};
use crate::linalg::{integral_preimage_basis, rank_mod_p, solve, Matrix};
use crate::matrix::Mat2;
use crate::moebius::{end_beyond, map_from_triples, MoebiusMap};
use crate::padic::{PAdicScalar, Valuation};

/// The kinds of orders that are intersections of maximal orders.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OrderKind {
    Trivial,
    Nilpotent,
    SplitCommutative { t: u32 },
    Triangular { t: u32 },
    EichlerThick { r: u32, t: u32 },
}

impl OrderKind {
    pub fn name(&self) -> &'static str {
        match self {
            OrderKind::Trivial => "trivial",
            OrderKind::Nilpotent => "nilpotent",
            OrderKind::SplitCommutative { .. } => "split",
            OrderKind::Triangular { .. } => "triangular",
            OrderKind::EichlerThick { .. } => "eichler",
        }
    }

    pub fn t(&self) -> Option<u32> {
        match self {
            OrderKind::SplitCommutative { t } | OrderKind::Triangular { t } | OrderKind::EichlerThick { t, .. } => Some(*t),
            _ => None,
        }
    }
}

impl fmt::Display for OrderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OrderKind::SplitCommutative { t } | OrderKind::Triangular { t } => write!(f, "{}(t={t})", self.name()),
            OrderKind::EichlerThick { r, t } => write!(f, "eichler(r={r},t={t})"),
            _ => f.write_str(self.name()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OrderSpec {
    pub p: u64,
    pub kind: OrderKind,
}

impl OrderSpec {
    pub fn new(p: u64, kind: OrderKind) -> OrderSpec {
        OrderSpec { p, kind }
    }
}

/// `O·1 + Σ O·g_i`.
#[derive(Clone, Debug)]
pub struct MatrixOrder {
    pub p: u64,
    pub generators: Vec<Mat2>,
}

fn unit_matrix(p: u64, i: usize, j: usize, scale: i64, prec: u32) -> Mat2 {
    let mut e = [PAdicScalar::zero(p); 4];
    e[2 * i + j] = PAdicScalar::p_power(p, scale, prec);
    Mat2::new(e[0], e[1], e[2], e[3])
}

pub fn standard_order(spec: &OrderSpec, prec: u32) -> MatrixOrder {
    let p = spec.p;
    let e = |i, j, s: u32| unit_matrix(p, i, j, s as i64, prec);
    let generators = match spec.kind {
        OrderKind::Trivial => vec![],
        OrderKind::Nilpotent => vec![e(0, 1, 0)],
        OrderKind::SplitCommutative { t } => vec![e(0, 0, t)],
        OrderKind::Triangular { t } => vec![e(0, 0, t), e(0, 1, t)],
        OrderKind::EichlerThick { r, t } => vec![e(0, 0, t), e(0, 1, t), e(1, 0, t + r)],
    };
    MatrixOrder { p, generators }
}

/// Whether `x` maps the lattice of `b` into itself.
pub fn stabilizes(x: &Mat2, b: &Ball, prec: u32) -> Result<bool> {
    let m = b.lattice(prec).basis;
    let y = m.inverse()?.mul(&x.swapped()).mul(&m);
    Ok(y.is_integral())
}

pub fn vertex_contains_order(h: &MatrixOrder, b: &Ball, prec: u32) -> Result<bool> {
    for g in &h.generators {
        if !stabilizes(g, b, prec)? {
            return Ok(false);
        }
    }
    Ok(true)
}

pub fn branch_bruteforce(h: &MatrixOrder, base: &Ball, radius: u32, prec: u32) -> Result<BTreeSet<Ball>> {
    let mut out = BTreeSet::new();
    for v in enumerate_region(base, radius) {
        if vertex_contains_order(h, &v, prec)? {
            out.insert(v);
        }
    }
    Ok(out)
}

pub fn bracket_t(h: &MatrixOrder, t: u32, prec: u32) -> MatrixOrder {
    let s = PAdicScalar::p_power(h.p, t as i64, prec);
    MatrixOrder { p: h.p, generators: h.generators.iter().map(|g| g.scale(&s)).collect() }
}

/// Central part of a thick line. In standard position every stem lies on the
/// chain `B_0^[m]` joining the ends 0 and infinity.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Stem {
    Point(Ball),
    FinitePath(Walk),
    /// From `origin` towards `end`.
    Ray { origin: Ball, toward_infinity: bool },
    /// The apartment between 0 and infinity.
    Apartment,
}

impl Stem {
    /// Range of exponents `m` with `B_0^[m]` in the stem (None = unbounded).
    pub fn level_range(&self) -> (Option<i64>, Option<i64>) {
        match self {
            Stem::Point(b) => (Some(b.level()), Some(b.level())),
            Stem::FinitePath(w) => {
                let lv: Vec<i64> = w.vertices().iter().map(|b| b.level()).collect();
                (lv.iter().min().copied(), lv.iter().max().copied())
            }
            Stem::Ray { origin, toward_infinity: true } => (None, Some(origin.level())),
            Stem::Ray { origin, toward_infinity: false } => (Some(origin.level()), None),
            Stem::Apartment => (None, None),
        }
    }

    /// Nearest stem vertex to `b`.
    pub fn projection(&self, b: &Ball) -> Ball {
        let j = match b.center_valuation() {
            Valuation::Finite(v) => b.level().min(v),
            Valuation::Infinite => b.level(),
        };
        let (lo, hi) = self.level_range();
        let m = hi.map_or(j, |h| j.min(h));
        let m = lo.map_or(m, |l| m.max(l));
        Ball::zero_chain(b.prime(), m)
    }

    pub fn distance(&self, b: &Ball) -> u64 {
        b.distance(&self.projection(b))
    }

    /// Extreme vertices of the stem.
    pub fn borders(&self, p: u64) -> Vec<Ball> {
        match self.level_range() {
            (Some(l), Some(h)) if l == h => vec![Ball::zero_chain(p, l)],
            (l, h) => l.into_iter().chain(h).map(|m| Ball::zero_chain(p, m)).collect(),
        }
    }
}

/// The branch `S_0(H)` of an order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Branch {
    /// Every vertex.
    Whole,
    ThickLine { stem: Stem, depth: u32 },
    /// All balls `B_z^[n]` with `n <= top`; its only end is infinity.
    InfiniteLeaf { top: i64 },
}

impl Branch {
    pub fn contains(&self, b: &Ball) -> bool {
        match self {
            Branch::Whole => true,
            Branch::ThickLine { stem, depth } => stem.distance(b) <= *depth as u64,
            Branch::InfiniteLeaf { top } => b.level() <= *top,
        }
    }

    /// Depth `p(v)`, or None outside the branch (or for the whole tree).
    pub fn depth(&self, b: &Ball) -> Option<u64> {
        if !self.contains(b) {
            return None;
        }
        match self {
            Branch::Whole => None,
            Branch::ThickLine { stem, depth } => Some(*depth as u64 - stem.distance(b)),
            Branch::InfiniteLeaf { top } => Some((*top - b.level()) as u64),
        }
    }

    pub fn is_endpoint(&self, b: &Ball) -> bool {
        self.depth(b) == Some(0)
    }

    pub fn is_stem(&self, b: &Ball) -> bool {
        match self {
            Branch::ThickLine { stem, .. } => stem.distance(b) == 0,
            _ => false,
        }
    }

    pub fn restrict(&self, base: &Ball, radius: u32) -> BTreeSet<Ball> {
        enumerate_region(base, radius).into_iter().filter(|b| self.contains(b)).collect()
    }
}

pub fn branch_symbolic(spec: &OrderSpec) -> Branch {
    let p = spec.p;
    match spec.kind {
        OrderKind::Trivial => Branch::Whole,
        OrderKind::Nilpotent => Branch::InfiniteLeaf { top: 0 },
        OrderKind::SplitCommutative { t } => Branch::ThickLine { stem: Stem::Apartment, depth: t },
        OrderKind::Triangular { t } => Branch::ThickLine {
            stem: Stem::Ray { origin: Ball::zero_chain(p, 0), toward_infinity: true },
            depth: t,
        },
        OrderKind::EichlerThick { r, t } => Branch::ThickLine {
            stem: if r == 0 {
                Stem::Point(Ball::zero_chain(p, 0))
            } else {
                Stem::FinitePath(EichlerOrder::standard(p, r).path)
            },
            depth: t,
        },
    }
}

pub fn thicken(b: &Branch, t: u32) -> Branch {
    match b {
        Branch::Whole => Branch::Whole,
        Branch::ThickLine { stem, depth } => Branch::ThickLine { stem: stem.clone(), depth: depth + t },
        Branch::InfiniteLeaf { top } => Branch::InfiniteLeaf { top: top + t as i64 },
    }
}

/// The t-neighborhood of a vertex set.
pub fn thicken_set(s: &BTreeSet<Ball>, t: u32) -> BTreeSet<Ball> {
    s.iter().flat_map(|v| enumerate_region(v, t)).collect()
}

/// Eichler order of level r given by its path.
#[derive(Clone, Debug, PartialEq)]
pub struct EichlerOrder {
    pub p: u64,
    pub r: u32,
    pub path: Walk,
}

impl EichlerOrder {
    /// Integral matrices with lower-left entry in `p^r Z_p`; its path is
    /// `B_0^[0], B_0^[-1], ..., B_0^[-r]`.
    pub fn standard(p: u64, r: u32) -> EichlerOrder {
        EichlerOrder { p, r, path: Walk((0..=r as i64).map(|k| Ball::zero_chain(p, -k)).collect()) }
    }

    pub fn from_path(path: Walk) -> Result<EichlerOrder> {
        if !path.is_valid() {
            return Err(Error::InvalidInput("not a walk without backtracking".into()));
        }
        Ok(EichlerOrder { p: path.first().prime(), r: path.len() as u32, path })
    }

    pub fn is_standard(&self) -> bool {
        *self == EichlerOrder::standard(self.p, self.r)
    }

    /// A map `g` with `g∗(standard path) = self.path`; the order is `g E_r g^{-1}`.
    pub fn conjugator(&self, prec: u32) -> Result<MoebiusMap> {
        let w = self.path.vertices();
        let v0 = w[0];
        let vr = *w.last().unwrap();
        let (far, near, third) = if self.r == 0 {
            let nb = v0.neighbors();
            let via = |i: usize| end_beyond(&nb[i], &[v0], prec);
            (via(0)?, via(1)?, via(2)?)
        } else {
            let far = end_beyond(&vr, &[w[w.len() - 2]], prec)?;
            let near = end_beyond(&v0, &[w[1]], prec)?;
            let exit = first_free(&v0, &[w[1], first_free(&v0, &[w[1]])]);
            let third = end_beyond(&exit, &[v0], prec)?;
            (far, near, third)
        };
        let std = [End::Infinity, End::Finite(PAdicScalar::zero(self.p)), End::int(self.p, 1, prec)];
        map_from_triples(std, [far, near, third], prec)
    }

    /// Matrix realization `g E_r g^{-1}` as a function testing membership.
    pub fn contains(&self, x: &Mat2, prec: u32) -> Result<bool> {
        let g = self.conjugator(prec)?;
        let y = g.matrix().inverse()?.mul(x).mul(g.matrix());
        Ok(in_standard_eichler(&y, self.r))
    }
}

fn first_free(x: &Ball, used: &[Ball]) -> Ball {
    x.neighbors().into_iter().find(|b| !used.contains(b)).unwrap()
}

/// Membership in the standard `E_r`.
pub fn in_standard_eichler(y: &Mat2, r: u32) -> bool {
    y.is_integral() && y.c.valuation() >= Valuation::Finite(r as i64)
}

/// Entries of `x` read as coordinates of `E_r`: `(a, b, c / p^r, d)`.
fn eichler_functionals(x: &Mat2, r: u32, prec: u32) -> Result<[PAdicScalar; 4]> {
    let p = x.prime();
    let c = x.c.checked_div(&PAdicScalar::p_power(p, r as i64, prec))?;
    Ok([x.a, x.b, c, x.d])
}

/// The algebra `L = k·1 + Σ k·x_i` spanned by an order's generators.
fn algebra_basis(h: &MatrixOrder, prec: u32) -> Vec<Mat2> {
    let mut v = vec![Mat2::identity(h.p, prec)];
    v.extend(h.generators.iter().copied());
    v
}

/// `L ∩ E`, where `L` is the algebra spanned by `l`'s generators.
pub fn intersect_with_eichler(l: &MatrixOrder, e: &EichlerOrder, prec: u32) -> Result<MatrixOrder> {
    let g = e.conjugator(prec)?;
    let gi = g.matrix().inverse()?;
    let basis = algebra_basis(l, prec);
    let moved: Vec<Mat2> = basis.iter().map(|x| gi.mul(x).mul(g.matrix())).collect();
    // rows: the four functionals; columns: basis elements
    let cols: Vec<[PAdicScalar; 4]> = moved.iter().map(|x| eichler_functionals(x, e.r, prec)).collect::<Result<_>>()?;
    let f: Matrix = (0..4).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
    let lambdas = integral_preimage_basis(&f)?;
    let generators = lambdas
        .iter()
        .map(|lam| {
            let mut acc = basis[0].scale(&lam[0]);
            for (x, s) in basis.iter().zip(lam).skip(1) {
                acc = acc.add(&x.scale(s));
            }
            acc
        })
        .collect();
    Ok(MatrixOrder { p: l.p, generators })
}

fn entry_matrix(vs: &[Mat2]) -> Matrix {
    (0..4).map(|i| vs.iter().map(|m| m.entries()[i]).collect()).collect()
}

fn coordinates(basis: &[Mat2], x: &Mat2) -> Result<Option<Vec<PAdicScalar>>> {
    solve(&entry_matrix(basis), &x.entries())
}

/// A maximal linearly independent subset, greedily in order.
fn independent_subset(vs: &[Mat2]) -> Vec<Mat2> {
    let mut rows: Vec<[PAdicScalar; 4]> = Vec::new();
    let mut keep = Vec::new();
    for v in vs {
        let mut x = v.entries();
        for r in &rows {
            let piv = (0..4).find(|&i| !r[i].is_zero()).unwrap();
            if x[piv].is_zero() {
                continue;
            }
            let f = x[piv].checked_div(&r[piv]).unwrap();
            for i in 0..4 {
                x[i] = x[i] - f * r[i];
            }
        }
        if x.iter().any(|e| !e.is_zero()) {
            rows.push(x);
            keep.push(*v);
        }
    }
    keep
}

/// O-basis (as coordinate columns over `reference`) of the O-span of `vs`.
fn o_basis(vs: &[Mat2], reference: &[Mat2]) -> Result<Matrix> {
    let k = reference.len();
    let mut cols: Vec<Vec<PAdicScalar>> = Vec::new();
    for v in vs {
        cols.push(coordinates(reference, v)?.ok_or_else(|| Error::InvalidInput("vector outside the algebra".into()))?);
    }
    let mut basis = Vec::new();
    for row in 0..k {
        let pick = (0..cols.len())
            .filter(|&j| !cols[j][row].is_zero())
            .min_by_key(|&j| cols[j][row].valuation());
        let Some(j) = pick else { continue };
        let piv = cols.swap_remove(j);
        for c in cols.iter_mut() {
            let f = c[row].checked_div(&piv[row])?;
            for i in 0..k {
                c[i] = c[i] - f * piv[i];
            }
        }
        basis.push(piv);
    }
    if basis.len() != k {
        return Err(Error::PrecisionExhausted("module is not of full rank".into()));
    }
    // columns of a k x k matrix
    Ok((0..k).map(|i| basis.iter().map(|c| c[i]).collect()).collect())
}

/// Whether the O-module `O·1 + Σ O·a_i` is contained in `O·1 + Σ O·b_j`.
pub fn module_contained(a: &MatrixOrder, b: &MatrixOrder, prec: u32) -> Result<bool> {
    let span_b = algebra_basis(b, prec);
    let reference = independent_subset(&span_b);
    let basis_b = o_basis(&span_b, &reference)?;
    for x in algebra_basis(a, prec) {
        let Some(cx) = coordinates(&reference, &x)? else { return Ok(false) };
        match solve(&basis_b, &cx)? {
            Some(c) if c.iter().all(|s| s.valuation() >= Valuation::Finite(0)) => {}
            _ => return Ok(false),
        }
    }
    Ok(true)
}

pub fn modules_equal(a: &MatrixOrder, b: &MatrixOrder, prec: u32) -> Result<bool> {
    Ok(module_contained(a, b, prec)? && module_contained(b, a, prec)?)
}

/// `φ^{-1}(E) = H`: H lies in E and is the whole intersection of its algebra with E.
pub fn is_optimal(h: &MatrixOrder, e: &EichlerOrder, prec: u32) -> Result<bool> {
    for g in &h.generators {
        if !e.contains(g, prec)? {
            return Err(Error::NotContained);
        }
    }
    let inter = intersect_with_eichler(h, e, prec)?;
    module_contained(&inter, h, prec)
}

/// Optimality through the residue test: None when some generator of `h` lies
/// outside `e`; otherwise whether `1` and the conjugated generators stay
/// independent mod `p` in the coordinates `(a, b, c/p^r, d)`.
pub fn optimality(h: &MatrixOrder, e: &EichlerOrder, prec: u32) -> Result<Option<bool>> {
    let g = e.conjugator(prec)?;
    let gm = g.matrix();
    let gi = gm.inverse()?;
    let mut rows = vec![[1, 0, 0, 1]];
    for x in &h.generators {
        let y = gi.mul(x).mul(gm);
        if !in_standard_eichler(&y, e.r) {
            return Ok(None);
        }
        let f = eichler_functionals(&y, e.r, prec)?;
        let mut row = [0u64; 4];
        for (slot, s) in row.iter_mut().zip(f) {
            *slot = s.residue(1)?;
        }
        rows.push(row);
    }
    Ok(Some(rank_mod_p(h.p, &rows) == rows.len()))
}

/// The three conditions for a path inside a thick ray: both ends of the path are
/// endpoints of the ray, one of them projects to the stem border, and `r >= 2t`.
pub fn is_optimal_rank3_geometric(ray: &Branch, path: &Walk) -> Result<bool> {
    let Branch::ThickLine { stem: stem @ Stem::Ray { origin, .. }, depth } = ray else {
        return Err(Error::InvalidInput("expected a thick ray".into()));
    };
    if !path.vertices().iter().all(|v| ray.contains(v)) {
        return Err(Error::NotContained);
    }
    let (v0, vr) = (path.first(), path.last());
    let ends = ray.is_endpoint(&v0) && ray.is_endpoint(&vr);
    let border = stem.projection(&v0) == *origin || stem.projection(&vr) == *origin;
    Ok(ends && border && path.len() as u32 >= 2 * depth)
}

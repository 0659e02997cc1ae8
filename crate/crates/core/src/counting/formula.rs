//! Closed formulas for the local embedding numbers and the χ count.

use num_rational::Ratio;
use serde::Serialize;

use super::{EVector, Method, U0Convention};
use crate::error::{Error, Result};
use crate::orders::{OrderKind, OrderSpec};
use crate::padic::{pow_u64, val_int};

type Q = Ratio<i64>;

fn q(n: i64) -> Q {
    Q::from_integer(n)
}

fn pw(p: u64, k: i64) -> Q {
    if k >= 0 {
        q(pow_u64(p, k as u32) as i64)
    } else {
        Q::new(1, pow_u64(p, (-k) as u32) as i64)
    }
}

/// Number of units `a` of `Z/p^(t-r+2u)` with `a^2 = 1` and `v(a-1) = t-r+u`.
/// At `u = 0` the count is replaced by the convention value.
pub fn chi(p: u64, r: u32, u: u32, t: u32, conv: U0Convention) -> Result<u64> {
    let (r, u, t) = (r as i64, u as i64, t as i64);
    let lo = (r - t).max(0);
    if u < lo || u > r / 2 || t - r + 2 * u < 0 {
        return Err(Error::DomainViolation(format!(
            "chi needs max(0, r-t) <= u <= r/2 and t-r+2u >= 0, got r={r} u={u} t={t}"
        )));
    }
    if u == 0 {
        return Ok(conv.u0_value());
    }
    let m = (t - r + 2 * u) as u32;
    let k = (t - r + u) as u32;
    let modulus = pow_u64(p, m) as u128;
    let count = (1..modulus as u64)
        .filter(|a| a % p != 0)
        .filter(|&a| (a as u128 * a as u128) % modulus == 1)
        .filter(|&a| a != 1 && val_int(p, a as i128 - 1) == k)
        .count();
    Ok(count as u64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `r = 2h + 1 < 2t`
    OddLt,
    /// `r = 2h < 2t`
    EvenLt,
    /// `r = 2t`
    Eq,
    /// `r > 2t`
    Gt,
}

impl Regime {
    pub fn of(r: u32, t: u32) -> Regime {
        match r.cmp(&(2 * t)) {
            std::cmp::Ordering::Greater => Regime::Gt,
            std::cmp::Ordering::Equal => Regime::Eq,
            std::cmp::Ordering::Less if r % 2 == 1 => Regime::OddLt,
            std::cmp::Ordering::Less => Regime::EvenLt,
        }
    }
}

/// The split-commutative invariants `n, n', χ2, χ3, χ4` at level `r > 0`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Table1Row {
    pub regime: Regime,
    #[serde(serialize_with = "ser_ratio")]
    pub n: Q,
    #[serde(serialize_with = "ser_ratio")]
    pub n_prime: Q,
    #[serde(serialize_with = "ser_ratio")]
    pub chi2: Q,
    #[serde(serialize_with = "ser_ratio")]
    pub chi3: Q,
    #[serde(serialize_with = "ser_ratio")]
    pub chi4: Q,
}

fn ser_ratio<S: serde::Serializer>(x: &Q, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&x.to_string())
}

impl Table1Row {
    pub fn new(p: u64, r: u32, t: u32, conv: U0Convention) -> Result<Table1Row> {
        let regime = Regime::of(r, t);
        let h = r / 2;
        let chi_q = |u: u32| chi(p, r, u, t, conv).map(|c| q(c as i64));
        let chi_sum = || -> Result<Q> {
            let v = r.saturating_sub(t);
            (v..=h).try_fold(q(0), |acc, u| Ok(acc + chi_q(u)?))
        };
        let half = Q::new(1, 2);
        let (n, n_prime, chi2, chi3, chi4) = match regime {
            Regime::OddLt => {
                let c3 = chi_sum()?;
                (pw(p, h as i64), q(0), q(0), c3, c3 * half)
            }
            Regime::EvenLt => {
                let c2 = chi_q(h)?;
                let c3 = chi_sum()?;
                let np = q(p as i64 - 1) * pw(p, h as i64 - 1);
                (pw(p, h as i64), np, c2, c3, (c2 + c3) * half)
            }
            Regime::Eq => {
                let c2 = chi_q(t)?;
                let np = q(p as i64 - 2) * pw(p, t as i64 - 1);
                (pw(p, t as i64), np, c2, c2, c2)
            }
            Regime::Gt => {
                let np = q(2 * (p as i64 - 1)) * pw(p, t as i64 - 1);
                (q(2) * pw(p, t as i64), np, q(0), q(0), q(0))
            }
        };
        Ok(Table1Row { regime, n, n_prime, chi2, chi3, chi4 })
    }

    /// `n(2,1,1,1/2) - n'(1,1/2,1/2,0) + (0,χ2,χ3,χ4)/2`.
    pub fn evector(&self) -> [Q; 4] {
        let half = Q::new(1, 2);
        [
            self.n * q(2) - self.n_prime,
            self.n - self.n_prime * half + self.chi2 * half,
            self.n - self.n_prime * half + self.chi3 * half,
            self.n * half + self.chi4 * half,
        ]
    }
}

fn ints(v: [i64; 4]) -> [Q; 4] {
    v.map(q)
}

fn nilpotent(p: u64, r: u32) -> [Q; 4] {
    if r == 0 {
        return ints([1, 1, 1, 1]);
    }
    let e1 = pow_u64(p, r / 2) + pow_u64(p, (r - 1) / 2);
    let two_divisible = r.is_multiple_of(2) && 2 * val_int(p, 2) >= r;
    let e2 = if two_divisible { q(pow_u64(p, r / 2) as i64) } else { Q::new(e1 as i64, 2) };
    [q(e1 as i64), e2, q(r as i64 + 1), q((r as i64 + 2) / 2)]
}

fn triangular(p: u64, r: u32, t: u32) -> ([Q; 4], Option<String>) {
    if r < 2 * t {
        return (ints([0; 4]), Some(format!("no optimal embedding: level {r} is below 2t = {}", 2 * t)));
    }
    if t == 0 {
        return (if r == 0 { ints([1, 1, 1, 1]) } else { ints([2, 1, 2, 1]) }, None);
    }
    let base = (p as i64 - 1) * pow_u64(p, 2 * t - 1) as i64;
    if r == 2 * t {
        ([q(base), Q::new(base, 2), q(1), q(1)], None)
    } else {
        (ints([2 * base, base, 2, 1]), None)
    }
}

fn split_raw(p: u64, r: u32, t: u32, conv: U0Convention) -> Result<[Q; 4]> {
    if r == 0 {
        return Ok(ints([1, 1, 1, 1]));
    }
    Ok(Table1Row::new(p, r, t, conv)?.evector())
}

/// Exact evaluation of the closed formulas. Non-integral entries are flagged and kept as rationals.
pub fn evector_formula(spec: &OrderSpec, r: u32, conv: U0Convention) -> Result<EVector> {
    let p = spec.p;
    match spec.kind {
        OrderKind::Nilpotent => Ok(EVector::from_raw(nilpotent(p, r), Method::Formula)),
        OrderKind::Triangular { t } => {
            let (v, reason) = triangular(p, r, t);
            let mut e = EVector::from_raw(v, Method::Formula);
            e.reason = reason;
            Ok(e)
        }
        OrderKind::SplitCommutative { t } => {
            let first = match conv {
                U0Convention::Auto => U0Convention::One,
                c => c,
            };
            let mut e = EVector::from_raw(split_raw(p, r, t, first)?, Method::Formula);
            e.u0 = Some(first);
            if conv == U0Convention::Auto && e.is_flagged() {
                let mut alt = EVector::from_raw(split_raw(p, r, t, U0Convention::Two)?, Method::Formula);
                if !alt.is_flagged() {
                    alt.u0 = Some(U0Convention::Two);
                    return Ok(alt);
                }
            }
            Ok(e)
        }
        other => Err(Error::UnsupportedKind(other.name().to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_integer::Integer;

    fn ratio_vec(v: &EVector) -> Vec<String> {
        v.entry_strings().to_vec()
    }

    /// Independent count: scan every residue, test invertibility by gcd and
    /// the valuation by repeated division.
    fn chi_brute(p: u64, r: u32, u: u32, t: u32) -> u64 {
        let m = t + 2 * u - r;
        let k = t + u - r;
        let modulus = p.pow(m);
        (0..modulus)
            .filter(|a| a.gcd(&modulus) == 1 && (a * a) % modulus == 1 % modulus)
            .filter(|a| {
                let mut x = (*a + modulus - 1) % modulus;
                if x == 0 {
                    return false;
                }
                let mut v = 0;
                while x.is_multiple_of(p) {
                    x /= p;
                    v += 1;
                }
                v == k
            })
            .count() as u64
    }

    #[test]
    fn chi_examples() {
        assert_eq!(chi(2, 4, 2, 3, U0Convention::One).unwrap(), 2);
        assert_eq!(chi(3, 2, 1, 1, U0Convention::One).unwrap(), 1);
        assert_eq!(chi(2, 2, 1, 1, U0Convention::One).unwrap(), 0);
    }

    #[test]
    fn chi_matches_brute_force() {
        for p in [2, 3, 5] {
            for t in 0..5 {
                for r in 1u32..7 {
                    for u in r.saturating_sub(t).max(1)..=r / 2 {
                        if t + 2 * u < r {
                            continue;
                        }
                        assert_eq!(chi(p, r, u, t, U0Convention::One).unwrap(), chi_brute(p, r, u, t), "p={p} r={r} u={u} t={t}");
                    }
                }
            }
        }
    }

    #[test]
    fn chi_odd_prime_closed_form() {
        for p in [3, 5, 7] {
            for t in 0..5 {
                for r in 1u32..8 {
                    for u in r.saturating_sub(t).max(1)..=r / 2 {
                        if t + 2 * u < r {
                            continue;
                        }
                        let c = chi(p, r, u, t, U0Convention::One).unwrap();
                        let expected = u64::from(r > t && u == r - t);
                        assert_eq!(c, expected, "p={p} r={r} u={u} t={t}");
                    }
                }
            }
        }
    }

    #[test]
    fn chi_conventions_and_domain() {
        assert_eq!(chi(3, 1, 0, 1, U0Convention::One).unwrap(), 1);
        assert_eq!(chi(3, 1, 0, 1, U0Convention::Two).unwrap(), 2);
        assert_eq!(chi(3, 1, 0, 1, U0Convention::Auto).unwrap(), 1);
        assert!(matches!(chi(3, 4, 0, 1, U0Convention::One), Err(Error::DomainViolation(_))));
        assert!(matches!(chi(3, 4, 3, 1, U0Convention::One), Err(Error::DomainViolation(_))));
    }

    fn formula(p: u64, kind: OrderKind, r: u32) -> EVector {
        evector_formula(&OrderSpec::new(p, kind), r, U0Convention::One).unwrap()
    }

    #[test]
    fn nilpotent_vectors() {
        assert_eq!(formula(2, OrderKind::Nilpotent, 3).integers(), Some([4, 2, 4, 2]));
        assert_eq!(formula(2, OrderKind::Nilpotent, 2).integers(), Some([3, 2, 3, 2]));
        assert_eq!(formula(3, OrderKind::Nilpotent, 2).integers(), Some([4, 2, 3, 2]));
        assert_eq!(formula(5, OrderKind::Nilpotent, 0).integers(), Some([1, 1, 1, 1]));
    }

    #[test]
    fn triangular_vectors() {
        let tri = |t| OrderKind::Triangular { t };
        assert_eq!(formula(3, tri(1), 4).integers(), Some([12, 6, 2, 1]));
        assert_eq!(formula(3, tri(1), 2).integers(), Some([6, 3, 1, 1]));
        assert_eq!(formula(2, tri(0), 0).integers(), Some([1, 1, 1, 1]));
        assert_eq!(formula(2, tri(0), 3).integers(), Some([2, 1, 2, 1]));
        let none = formula(2, tri(1), 1);
        assert_eq!(none.integers(), Some([0, 0, 0, 0]));
        assert!(none.reason.is_some());
    }

    #[test]
    fn split_vectors() {
        let split = |t| OrderKind::SplitCommutative { t };
        assert_eq!(formula(3, split(1), 2).integers(), Some([5, 3, 3, 2]));
        assert_eq!(formula(3, split(1), 4).integers(), Some([8, 4, 4, 3]));
        assert_eq!(formula(2, split(1), 2).integers(), Some([4, 2, 2, 1]));
        assert_eq!(formula(2, split(3), 0).integers(), Some([1, 1, 1, 1]));
    }

    #[test]
    fn split_r1_t1_is_flagged_under_one() {
        for p in [2, 3, 5] {
            let e = formula(p, OrderKind::SplitCommutative { t: 1 }, 1);
            assert_eq!(e.flags, [false, false, true, true]);
            assert_eq!(ratio_vec(&e), ["2", "1", "3/2", "3/4"]);
        }
    }

    #[test]
    fn auto_falls_back_to_two() {
        let spec = OrderSpec::new(2, OrderKind::SplitCommutative { t: 2 });
        let e = evector_formula(&spec, 2, U0Convention::Auto).unwrap();
        assert_eq!(e.integers(), Some([3, 2, 3, 2]));
        assert_eq!(e.u0, Some(U0Convention::Two));
        let one = evector_formula(&spec, 2, U0Convention::One).unwrap();
        assert_eq!(ratio_vec(&one), ["3", "2", "5/2", "7/4"]);
    }

    #[test]
    fn table1_row_for_r_equal_2t() {
        let row = Table1Row::new(3, 2, 1, U0Convention::One).unwrap();
        assert_eq!(row.regime, Regime::Eq);
        assert_eq!((row.n, row.n_prime), (q(3), q(1)));
        assert_eq!((row.chi2, row.chi3, row.chi4), (q(1), q(1), q(1)));
        let gt = Table1Row::new(3, 4, 1, U0Convention::One).unwrap();
        assert_eq!((gt.regime, gt.n, gt.n_prime), (Regime::Gt, q(6), q(4)));
    }

    #[test]
    fn unsupported_kinds() {
        let e = evector_formula(&OrderSpec::new(2, OrderKind::Trivial), 1, U0Convention::One);
        assert!(matches!(e, Err(Error::UnsupportedKind(_))));
    }
}

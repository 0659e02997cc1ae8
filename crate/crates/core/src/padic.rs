//! Bounded-precision arithmetic in Q_p, stored as valuation plus unit residue.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_integer::Integer;

use crate::error::{Error, Result};

/// Largest modulus we allow for unit residues. Products are formed in u128.
const MODULUS_LIMIT: u64 = 1 << 62;

/// p-adic valuation; `Infinite` is the valuation of zero and sorts last.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Valuation {
    Finite(i64),
    Infinite,
}

impl Valuation {
    pub fn finite(self) -> Option<i64> {
        match self {
            Valuation::Finite(v) => Some(v),
            Valuation::Infinite => None,
        }
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Valuation::Finite(v) => write!(f, "{v}"),
            Valuation::Infinite => write!(f, "INFINITE"),
        }
    }
}

/// `p^k`, panicking if it would exceed the supported modulus range.
pub fn pow_u64(p: u64, k: u32) -> u64 {
    let mut acc: u64 = 1;
    for _ in 0..k {
        acc = acc
            .checked_mul(p)
            .filter(|v| *v <= MODULUS_LIMIT)
            .unwrap_or_else(|| panic!("modulus {p}^{k} exceeds the supported range"));
    }
    acc
}

/// Valuation of a nonzero integer.
pub fn val_int(p: u64, mut n: i128) -> u32 {
    assert!(n != 0, "valuation of zero integer");
    let p = p as i128;
    let mut v = 0;
    while n % p == 0 {
        n /= p;
        v += 1;
    }
    v
}

/// Inverse of `a` modulo `m`, if it exists.
pub fn mod_inverse(a: u64, m: u64) -> Option<u64> {
    if m == 1 {
        return Some(0);
    }
    let g = (a as i128).extended_gcd(&(m as i128));
    if g.gcd != 1 {
        return None;
    }
    Some(g.x.mod_floor(&(m as i128)) as u64)
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn reduce(n: i128, m: u64) -> u64 {
    n.mod_floor(&(m as i128)) as u64
}

#[derive(Clone, Copy, Debug)]
enum Repr {
    /// Zero known to absolute precision `abs` (`None` means exactly zero).
    Zero { abs: Option<i64> },
    /// `p^val * unit` with `unit` known modulo `p^prec`.
    Nonzero { val: i64, unit: u64, prec: u32 },
}

/// An element of Q_p with tracked precision.
#[derive(Clone, Copy, Debug)]
pub struct PAdicScalar {
    p: u64,
    repr: Repr,
}

impl PAdicScalar {
    pub fn zero(p: u64) -> Self {
        PAdicScalar { p, repr: Repr::Zero { abs: None } }
    }

    /// A zero known only modulo `p^abs`.
    pub fn zero_to(p: u64, abs: i64) -> Self {
        PAdicScalar { p, repr: Repr::Zero { abs: Some(abs) } }
    }

    /// `p^val * unit` where `unit` is any integer; factors of p in `unit` are absorbed.
    pub fn from_parts(p: u64, val: i64, unit: i128, prec: u32) -> Self {
        assert!(prec > 0, "precision must be positive");
        if unit == 0 {
            return PAdicScalar::zero(p);
        }
        let extra = val_int(p, unit);
        let unit = unit / (p as i128).pow(extra);
        let m = pow_u64(p, prec);
        PAdicScalar {
            p,
            repr: Repr::Nonzero { val: val + extra as i64, unit: reduce(unit, m), prec },
        }
    }

    pub fn from_int(p: u64, n: i128, prec: u32) -> Self {
        Self::from_parts(p, 0, n, prec)
    }

    pub fn one(p: u64, prec: u32) -> Self {
        Self::from_int(p, 1, prec)
    }

    /// `p^k` at the given precision.
    pub fn p_power(p: u64, k: i64, prec: u32) -> Self {
        Self::from_parts(p, k, 1, prec)
    }

    pub fn from_rational(p: u64, num: i128, den: i128, prec: u32) -> Result<Self> {
        if den == 0 {
            return Err(Error::DivisionByZero);
        }
        if num == 0 {
            return Ok(Self::zero(p));
        }
        Self::from_int(p, num, prec).checked_div(&Self::from_int(p, den, prec))
    }

    pub fn prime(&self) -> u64 {
        self.p
    }

    pub fn valuation(&self) -> Valuation {
        match self.repr {
            Repr::Zero { .. } => Valuation::Infinite,
            Repr::Nonzero { val, .. } => Valuation::Finite(val),
        }
    }

    /// Unit residue modulo `p^precision`, absent for zero.
    pub fn unit(&self) -> Option<u64> {
        match self.repr {
            Repr::Zero { .. } => None,
            Repr::Nonzero { unit, .. } => Some(unit),
        }
    }

    /// Number of significant digits of the unit, absent for zero.
    pub fn precision(&self) -> Option<u32> {
        match self.repr {
            Repr::Zero { .. } => None,
            Repr::Nonzero { prec, .. } => Some(prec),
        }
    }

    /// The exponent k such that the value is known modulo p^k (`None` = exact zero).
    pub fn absolute_precision(&self) -> Option<i64> {
        match self.repr {
            Repr::Zero { abs } => abs,
            Repr::Nonzero { val, prec, .. } => Some(val + prec as i64),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.repr, Repr::Zero { .. })
    }

    pub fn is_exact_zero(&self) -> bool {
        matches!(self.repr, Repr::Zero { abs: None })
    }

    /// Drop digits so that the unit carries at most `n` digits.
    pub fn truncate(&self, n: u32) -> Self {
        match self.repr {
            Repr::Nonzero { val, unit, prec } if n < prec => {
                let m = pow_u64(self.p, n);
                PAdicScalar { p: self.p, repr: Repr::Nonzero { val, unit: unit % m, prec: n } }
            }
            _ => *self,
        }
    }

    /// Lower the absolute precision to at most `abs`.
    pub fn truncate_abs(&self, abs: i64) -> Self {
        match self.repr {
            Repr::Zero { abs: a } => {
                let a = a.map_or(abs, |a| a.min(abs));
                PAdicScalar::zero_to(self.p, a)
            }
            Repr::Nonzero { val, prec, .. } => {
                if val >= abs {
                    PAdicScalar::zero_to(self.p, abs)
                } else {
                    self.truncate((abs - val).min(prec as i64) as u32)
                }
            }
        }
    }

    /// Multiplicative inverse.
    pub fn inverse(&self) -> Result<Self> {
        PAdicScalar::one(self.p, self.precision().unwrap_or(1)).checked_div(self)
    }

    pub fn checked_div(&self, other: &Self) -> Result<Self> {
        assert_eq!(self.p, other.p, "prime mismatch");
        let (vb, ub, nb) = match other.repr {
            Repr::Zero { abs: None } => return Err(Error::DivisionByZero),
            Repr::Zero { abs: Some(a) } => {
                return Err(Error::PrecisionExhausted(format!(
                    "divisor is zero modulo p^{a}"
                )))
            }
            Repr::Nonzero { val, unit, prec } => (val, unit, prec),
        };
        match self.repr {
            Repr::Zero { abs: None } => Ok(*self),
            Repr::Zero { abs: Some(a) } => Ok(PAdicScalar::zero_to(self.p, a - vb)),
            Repr::Nonzero { val, unit, prec } => {
                let n = prec.min(nb);
                let m = pow_u64(self.p, n);
                let inv = mod_inverse(ub % m, m).expect("unit is invertible");
                Ok(PAdicScalar {
                    p: self.p,
                    repr: Repr::Nonzero { val: val - vb, unit: mul_mod(unit % m, inv, m), prec: n },
                })
            }
        }
    }

    /// The value modulo `p^k` as an integer in `[0, p^k)`; requires a p-integral value.
    pub fn residue(&self, k: u32) -> Result<u64> {
        let m = pow_u64(self.p, k);
        match self.repr {
            Repr::Zero { abs } => match abs {
                Some(a) if a < k as i64 => Err(Error::PrecisionExhausted(format!(
                    "zero known only modulo p^{a}, need p^{k}"
                ))),
                _ => Ok(0),
            },
            Repr::Nonzero { val, unit, prec } => {
                if val < 0 {
                    return Err(Error::NotIntegral);
                }
                if val >= k as i64 {
                    return Ok(0);
                }
                if val + (prec as i64) < k as i64 {
                    return Err(Error::PrecisionExhausted(format!(
                        "value known modulo p^{}, need p^{k}",
                        val + prec as i64
                    )));
                }
                Ok(mul_mod(unit % m, pow_u64(self.p, val as u32), m))
            }
        }
    }

    /// Digits of the value below `p^n`, as `(num, d)` with value ≡ num / p^d (mod p^n).
    /// `d` is minimal; `num` lies in `[0, p^(n+d))`.
    pub fn digits_below(&self, n: i64) -> Result<(u64, u32)> {
        match self.repr {
            Repr::Zero { abs } => match abs {
                Some(a) if a < n => Err(Error::PrecisionExhausted(format!(
                    "zero known only modulo p^{a}, need p^{n}"
                ))),
                _ => Ok((0, 0)),
            },
            Repr::Nonzero { val, unit, prec } => {
                if val >= n {
                    return Ok((0, 0));
                }
                if val + (prec as i64) < n {
                    return Err(Error::PrecisionExhausted(format!(
                        "value known modulo p^{}, need p^{n}",
                        val + prec as i64
                    )));
                }
                if val >= 0 {
                    Ok((self.residue(n as u32)?, 0))
                } else {
                    let m = pow_u64(self.p, (n - val) as u32);
                    Ok((unit % m, (-val) as u32))
                }
            }
        }
    }

    fn digits_at(&self, m: i64, n: u32) -> u64 {
        // value * p^(-m) modulo p^n, assuming valuation >= m and enough precision.
        let modulus = pow_u64(self.p, n);
        match self.repr {
            Repr::Zero { .. } => 0,
            Repr::Nonzero { val, unit, .. } => {
                let shift = val - m;
                if shift >= n as i64 {
                    0
                } else {
                    mul_mod(unit % modulus, pow_u64(self.p, shift as u32), modulus)
                }
            }
        }
    }

    fn add_impl(&self, other: &Self) -> Self {
        assert_eq!(self.p, other.p, "prime mismatch");
        if self.is_exact_zero() {
            return *other;
        }
        if other.is_exact_zero() {
            return *self;
        }
        let abs = match (self.absolute_precision(), other.absolute_precision()) {
            (Some(a), Some(b)) => a.min(b),
            _ => unreachable!("only exact zeros lack an absolute precision"),
        };
        let low = |x: &Self| match x.repr {
            Repr::Zero { abs } => abs.unwrap(),
            Repr::Nonzero { val, .. } => val,
        };
        let m = low(self).min(low(other));
        if m >= abs {
            return PAdicScalar::zero_to(self.p, abs);
        }
        let n = (abs - m) as u32;
        let modulus = pow_u64(self.p, n);
        let s = (self.digits_at(m, n) + other.digits_at(m, n)) % modulus;
        if s == 0 {
            return PAdicScalar::zero_to(self.p, abs);
        }
        let extra = val_int(self.p, s as i128);
        PAdicScalar {
            p: self.p,
            repr: Repr::Nonzero {
                val: m + extra as i64,
                unit: s / pow_u64(self.p, extra),
                prec: n - extra,
            },
        }
    }

    fn mul_impl(&self, other: &Self) -> Self {
        assert_eq!(self.p, other.p, "prime mismatch");
        match (self.repr, other.repr) {
            (Repr::Zero { abs: None }, _) | (_, Repr::Zero { abs: None }) => PAdicScalar::zero(self.p),
            (Repr::Zero { abs: Some(a) }, Repr::Zero { abs: Some(b) }) => PAdicScalar::zero_to(self.p, a + b),
            (Repr::Zero { abs: Some(a) }, Repr::Nonzero { val, .. })
            | (Repr::Nonzero { val, .. }, Repr::Zero { abs: Some(a) }) => PAdicScalar::zero_to(self.p, a + val),
            (
                Repr::Nonzero { val: va, unit: ua, prec: na },
                Repr::Nonzero { val: vb, unit: ub, prec: nb },
            ) => {
                let n = na.min(nb);
                let m = pow_u64(self.p, n);
                PAdicScalar {
                    p: self.p,
                    repr: Repr::Nonzero { val: va + vb, unit: mul_mod(ua % m, ub % m, m), prec: n },
                }
            }
        }
    }

    /// Exact rational value as `num / den` if the unit is read as an integer in `[0, p^N)`.
    /// Used for display only.
    pub fn to_rational_string(&self) -> String {
        match self.repr {
            Repr::Zero { .. } => "0".to_string(),
            Repr::Nonzero { val, unit, .. } => {
                if val >= 0 {
                    format!("{}", unit as u128 * (self.p as u128).pow(val as u32))
                } else {
                    format!("{}/{}", unit, (self.p as u128).pow((-val) as u32))
                }
            }
        }
    }

    /// Read a decimal integer or fraction `a/b`.
    pub fn parse(p: u64, s: &str, prec: u32) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("cannot parse scalar '{s}'"));
        let s = s.trim();
        let (num, den) = match s.split_once('/') {
            Some((a, b)) => (a.trim().parse::<i128>().map_err(|_| bad())?, b.trim().parse::<i128>().map_err(|_| bad())?),
            None => (s.parse::<i128>().map_err(|_| bad())?, 1),
        };
        Self::from_rational(p, num, den, prec)
    }
}

impl PartialEq for PAdicScalar {
    fn eq(&self, other: &Self) -> bool {
        if self.p != other.p {
            return false;
        }
        match (self.repr, other.repr) {
            (Repr::Zero { .. }, Repr::Zero { .. }) => true,
            (
                Repr::Nonzero { val: va, unit: ua, prec: na },
                Repr::Nonzero { val: vb, unit: ub, prec: nb },
            ) => {
                let m = pow_u64(self.p, na.min(nb));
                va == vb && ua % m == ub % m
            }
            _ => false,
        }
    }
}

impl Add for PAdicScalar {
    type Output = PAdicScalar;
    fn add(self, rhs: Self) -> Self {
        self.add_impl(&rhs)
    }
}

impl Sub for PAdicScalar {
    type Output = PAdicScalar;
    fn sub(self, rhs: Self) -> Self {
        self.add_impl(&-rhs)
    }
}

impl Mul for PAdicScalar {
    type Output = PAdicScalar;
    fn mul(self, rhs: Self) -> Self {
        self.mul_impl(&rhs)
    }
}

impl Neg for PAdicScalar {
    type Output = PAdicScalar;
    fn neg(self) -> Self {
        match self.repr {
            Repr::Zero { .. } => self,
            Repr::Nonzero { val, unit, prec } => {
                let m = pow_u64(self.p, prec);
                PAdicScalar { p: self.p, repr: Repr::Nonzero { val, unit: (m - unit) % m, prec } }
            }
        }
    }
}

impl fmt::Display for PAdicScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_rational_string())
    }
}

/// The unit group of Z/p^m.
#[derive(Clone, Debug)]
pub struct ResidueUnitSet {
    pub p: u64,
    pub m: u32,
    modulus: u64,
}

impl ResidueUnitSet {
    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn len(&self) -> usize {
        if self.m == 0 {
            1
        } else {
            (self.modulus / self.p * (self.p - 1)) as usize
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Units in increasing order; for m = 0 the single element 0 (= 1 in the zero ring).
    pub fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        let trivial = self.m == 0;
        (0..self.modulus).filter(move |a| trivial || a % self.p != 0)
    }
}

pub fn residue_units(p: u64, m: u32) -> ResidueUnitSet {
    ResidueUnitSet { p, m, modulus: pow_u64(p, m) }
}

/// Generators of (Z/p^m)^* used for orbit moves: a primitive root mod p^2 for odd p,
/// `{-1, 5}` for p = 2.
pub fn unit_group_generators(p: u64, m: u32) -> Vec<u64> {
    let modulus = pow_u64(p, m);
    if m == 0 || modulus <= 2 {
        return vec![];
    }
    if p == 2 {
        let mut g = vec![modulus - 1];
        if m >= 3 {
            g.push(5 % modulus);
        }
        return g;
    }
    let p2 = p * p;
    let order = p * (p - 1);
    let is_primitive = |g: u64| {
        let mut x = 1u64;
        for k in 1..=order {
            x = x * g % p2;
            if x == 1 {
                return k == order;
            }
        }
        false
    };
    let g = (2..p2).find(|g| g % p != 0 && is_primitive(*g)).expect("primitive root exists");
    vec![g % modulus]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(p: u64, n: i128, d: i128, prec: u32) -> PAdicScalar {
        PAdicScalar::from_rational(p, n, d, prec).unwrap()
    }

    #[test]
    fn from_rational_examples() {
        let one = q(3, 1, 1, 4);
        assert_eq!(one.valuation(), Valuation::Finite(0));
        assert_eq!(one.unit(), Some(1));
        let e = q(3, 18, 1, 4);
        assert_eq!((e.valuation(), e.unit()), (Valuation::Finite(2), Some(2)));
        let half = q(3, 1, 2, 3);
        assert_eq!((half.valuation(), half.unit()), (Valuation::Finite(0), Some(14)));
        assert_eq!(2 * 14 % 27, 1);
        assert_eq!(q(5, 0, 7, 3).valuation(), Valuation::Infinite);
    }

    #[test]
    fn field_op_examples() {
        let a = PAdicScalar::from_int(3, 1 + 3, 5) + PAdicScalar::from_int(3, 3, 5);
        assert_eq!(a.unit(), Some(1 + 2 * 3));
        let x = PAdicScalar::p_power(3, 1, 4);
        assert_eq!((x - x).valuation(), Valuation::Infinite);
        let d = PAdicScalar::one(3, 3).checked_div(&PAdicScalar::from_int(3, 2, 3)).unwrap();
        assert_eq!(d.unit(), Some(14));
        assert_eq!(
            PAdicScalar::one(3, 3).checked_div(&PAdicScalar::zero(3)),
            Err(Error::DivisionByZero)
        );
        assert!(matches!(
            PAdicScalar::one(3, 3).checked_div(&(x - x)),
            Err(Error::PrecisionExhausted(_))
        ));
    }

    #[test]
    fn cancellation_reduces_precision() {
        let a = PAdicScalar::from_int(2, 1 + 8, 4);
        let b = PAdicScalar::from_int(2, 1, 4);
        let d = a - b;
        assert_eq!(d.valuation(), Valuation::Finite(3));
        assert_eq!(d.precision(), Some(1));
        assert_eq!(d.absolute_precision(), Some(4));
    }

    #[test]
    fn valuation_examples() {
        assert_eq!(PAdicScalar::zero(2).valuation(), Valuation::Infinite);
        assert_eq!(PAdicScalar::from_int(2, 12, 5).valuation(), Valuation::Finite(2));
        assert_eq!(q(3, 1, 3, 5).valuation(), Valuation::Finite(-1));
    }

    #[test]
    fn residue_unit_examples() {
        let s = residue_units(3, 2);
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![1, 2, 4, 5, 7, 8]);
        assert_eq!(residue_units(2, 3).iter().collect::<Vec<_>>(), vec![1, 3, 5, 7]);
        let t = residue_units(5, 0);
        assert_eq!(t.len(), 1);
        assert_eq!(t.iter().count(), 1);
    }

    #[test]
    fn residues_and_digits() {
        let z = q(3, 1, 3, 5);
        assert_eq!(z.digits_below(-1).unwrap(), (0, 0));
        assert_eq!(z.digits_below(0).unwrap(), (1, 1));
        assert_eq!(z.digits_below(2).unwrap(), (1, 1));
        assert_eq!(PAdicScalar::from_int(2, 5, 6).residue(2).unwrap(), 1);
        assert_eq!(z.residue(1), Err(Error::NotIntegral));
    }

    #[test]
    fn generators_generate() {
        for (p, m) in [(2u64, 4u32), (3, 3), (5, 2), (2, 2)] {
            let modulus = pow_u64(p, m);
            let gens = unit_group_generators(p, m);
            let mut seen = std::collections::BTreeSet::from([1u64]);
            let mut frontier = vec![1u64];
            while let Some(x) = frontier.pop() {
                for g in &gens {
                    let y = x * g % modulus;
                    if seen.insert(y) {
                        frontier.push(y);
                    }
                }
            }
            assert_eq!(seen.len(), residue_units(p, m).len());
        }
    }
}

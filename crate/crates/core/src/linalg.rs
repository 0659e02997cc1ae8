//! Small dense linear algebra over Q_p with valuation pivoting.

use crate::error::{Error, Result};
use crate::padic::{PAdicScalar, Valuation};

pub type Matrix = Vec<Vec<PAdicScalar>>;

fn argmin_valuation(m: &Matrix, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize, Valuation)> = None;
    for i in rows {
        for j in cols.clone() {
            let v = m[i][j].valuation();
            if v != Valuation::Infinite && best.is_none_or(|(_, _, b)| v < b) {
                best = Some((i, j, v));
            }
        }
    }
    best.map(|(i, j, _)| (i, j))
}

/// Smith reduction of `f` (rows x cols, full column rank): returns `(v, e)` with
/// `v` an O-unimodular column transform and exponents `e` such that
/// `{λ : f λ ∈ O^rows}` has basis `v_j p^(-e_j)`.
pub fn integral_preimage_basis(f: &Matrix) -> Result<Vec<Vec<PAdicScalar>>> {
    let rows = f.len();
    let cols = f[0].len();
    let p = f[0][0].prime();
    let prec = f.iter().flatten().filter_map(|x| x.precision()).max().unwrap_or(1);
    let mut m = f.clone();
    let mut v: Matrix = (0..cols)
        .map(|i| (0..cols).map(|j| if i == j { PAdicScalar::one(p, prec) } else { PAdicScalar::zero(p) }).collect())
        .collect();
    let mut exps = Vec::with_capacity(cols);
    for k in 0..cols {
        let (pi, pj) = argmin_valuation(&m, k..rows, k..cols)
            .ok_or_else(|| Error::PrecisionExhausted("rank deficient functional matrix".into()))?;
        m.swap(k, pi);
        for row in m.iter_mut() {
            row.swap(k, pj);
        }
        for row in v.iter_mut() {
            row.swap(k, pj);
        }
        let piv = m[k][k];
        // clear the pivot column below
        for i in k + 1..rows {
            let f = m[i][k].checked_div(&piv)?;
            for j in k..cols {
                let t = m[k][j];
                m[i][j] = m[i][j] - f * t;
            }
        }
        // clear the pivot row to the right, recording column operations
        for j in k + 1..cols {
            let f = m[k][j].checked_div(&piv)?;
            for i in 0..rows {
                let t = m[i][k];
                m[i][j] = m[i][j] - f * t;
            }
            for row in v.iter_mut() {
                let t = row[k];
                row[j] = row[j] - f * t;
            }
        }
        exps.push(piv.valuation().finite().unwrap());
    }
    Ok((0..cols)
        .map(|j| {
            let s = PAdicScalar::p_power(p, -exps[j], prec);
            (0..cols).map(|i| v[i][j] * s).collect()
        })
        .collect())
}

/// Solve `b x = y` for a full-column-rank `b` (rows x cols). Returns None when
/// the system is inconsistent at stored precision.
pub fn solve(b: &Matrix, y: &[PAdicScalar]) -> Result<Option<Vec<PAdicScalar>>> {
    let rows = b.len();
    let cols = b[0].len();
    let mut m: Matrix = b.iter().zip(y).map(|(r, yi)| {
        let mut r = r.clone();
        r.push(*yi);
        r
    }).collect();
    let mut pivot_cols = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        let Some((pi, _)) = argmin_valuation(&m, r..rows, c..c + 1) else { continue };
        m.swap(r, pi);
        let piv = m[r][c];
        for i in 0..rows {
            if i == r {
                continue;
            }
            let f = m[i][c].checked_div(&piv)?;
            for j in c..=cols {
                let t = m[r][j];
                m[i][j] = m[i][j] - f * t;
            }
        }
        pivot_cols.push(c);
        r += 1;
    }
    if pivot_cols.len() < cols {
        return Err(Error::PrecisionExhausted("rank deficient system".into()));
    }
    for row in m.iter().skip(r) {
        if !row[cols].is_zero() {
            return Ok(None);
        }
    }
    let mut x = vec![PAdicScalar::zero(b[0][0].prime()); cols];
    for (i, c) in pivot_cols.iter().enumerate() {
        x[*c] = m[i][cols].checked_div(&m[i][*c])?;
    }
    Ok(Some(x))
}

/// Rank over `F_p` of integer row vectors.
pub fn rank_mod_p(p: u64, rows: &[[u64; 4]]) -> usize {
    let mut m: Vec<[u64; 4]> = rows.iter().map(|r| r.map(|x| x % p)).collect();
    let mut rank = 0;
    for col in 0..4 {
        let Some(i) = (rank..m.len()).find(|&i| m[i][col] != 0) else { continue };
        m.swap(rank, i);
        let inv = crate::padic::mod_inverse(m[rank][col], p).unwrap();
        let piv = m[rank].map(|x| x * inv % p);
        m[rank] = piv;
        for (k, row) in m.iter_mut().enumerate() {
            if k != rank && row[col] != 0 {
                let f = row[col];
                for c in 0..4 {
                    row[c] = (row[c] + p - f * piv[c] % p) % p;
                }
            }
        }
        rank += 1;
    }
    rank
}

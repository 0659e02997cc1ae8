//! Local embedding numbers `e1..e4` by closed formula, invariant keys and enumeration.

use std::collections::HashMap;
use std::fmt;
use std::hash::Hash;

use num_rational::Ratio;
use serde::Serialize;

use crate::error::{Error, Result};

pub mod crosscheck;
pub mod formula;
pub mod keys;
pub mod oracle;

pub use crosscheck::{crosscheck, CellReport, Verdict};
pub use formula::{chi, evector_formula, Regime, Table1Row};
pub use keys::{invariant_key, key_evector, Configuration, Key};
pub use oracle::{default_precision, oracle_evector, OracleReport};

/// Default cap on the size of a point set handed to the orbit search.
pub const DEFAULT_ORBIT_BUDGET: usize = 20_000_000;

/// Value used for `χ` at `u = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum U0Convention {
    One,
    Two,
    /// Try `one`, fall back to `two` when the result is not integral.
    Auto,
}

impl U0Convention {
    pub fn u0_value(self) -> u64 {
        match self {
            U0Convention::Two => 2,
            _ => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Formula,
    Keys,
    Oracle,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Formula => "formula",
            Method::Keys => "keys",
            Method::Oracle => "oracle",
        })
    }
}

/// `(e1, e2, e3, e4)` with exact rational values and per-entry integrality flags.
#[derive(Clone, Debug, PartialEq)]
pub struct EVector {
    pub raw: [Ratio<i64>; 4],
    pub flags: [bool; 4],
    pub method: Method,
    /// Convention applied at `u = 0`, when one was used.
    pub u0: Option<U0Convention>,
    /// Set for the no-embedding sentinel.
    pub reason: Option<String>,
}

impl EVector {
    pub fn from_raw(raw: [Ratio<i64>; 4], method: Method) -> EVector {
        EVector { raw, flags: raw.map(|x| !x.is_integer()), method, u0: None, reason: None }
    }

    pub fn from_counts(e: [u64; 4], method: Method) -> EVector {
        Self::from_raw(e.map(|x| Ratio::from_integer(x as i64)), method)
    }

    pub fn is_flagged(&self) -> bool {
        self.flags.iter().any(|&f| f)
    }

    /// The four counts, or None when some entry is not an integer.
    pub fn integers(&self) -> Option<[u64; 4]> {
        if self.is_flagged() {
            return None;
        }
        Some(self.raw.map(|x| x.to_integer() as u64))
    }

    /// Entries as exact strings: integers, or `a/b` for flagged entries.
    pub fn entry_strings(&self) -> [String; 4] {
        self.raw.map(|x| x.to_string())
    }

    /// JSON entries: integers when unflagged, rational strings otherwise.
    pub fn json_entries(&self) -> Vec<serde_json::Value> {
        self.raw
            .iter()
            .map(|x| if x.is_integer() { serde_json::json!(x.to_integer()) } else { serde_json::json!(x.to_string()) })
            .collect()
    }

    pub fn flag_names(&self) -> Vec<String> {
        (0..4).filter(|&i| self.flags[i]).map(|i| format!("e{}_not_integral", i + 1)).collect()
    }
}

impl fmt::Display for EVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = self.entry_strings();
        write!(f, "({}, {}, {}, {})", s[0], s[1], s[2], s[3])
    }
}

/// Connected components of a finite set under a family of self-maps.
#[derive(Clone, Debug)]
pub struct Orbits<T: Hash + Eq> {
    pub labels: HashMap<T, u32>,
    pub reps: Vec<T>,
}

impl<T: Hash + Eq + Clone> Orbits<T> {
    pub fn count(&self) -> usize {
        self.reps.len()
    }

    pub fn label(&self, x: &T) -> Option<u32> {
        self.labels.get(x).copied()
    }

    /// Number of orbits sent to themselves by `w`.
    pub fn fixed_by(&self, w: impl Fn(&T) -> T) -> Result<usize> {
        let mut fixed = 0;
        for (i, rep) in self.reps.iter().enumerate() {
            let img = w(rep);
            let l = self.label(&img).ok_or_else(|| Error::InvalidInput("move leaves the point set".into()))?;
            if l as usize == i {
                fixed += 1;
            }
        }
        Ok(fixed)
    }
}

pub type Move<'a, T> = &'a (dyn Fn(&T) -> T + Sync);

/// Breadth-first orbit search. Every image must lie in `points`.
pub fn orbits<T: Hash + Eq + Clone>(points: &[T], moves: &[Move<T>], budget: usize) -> Result<Orbits<T>> {
    if points.len() > budget {
        return Err(Error::OrbitBudgetExceeded(points.len()));
    }
    const UNSEEN: u32 = u32::MAX;
    let mut labels: HashMap<T, u32> = points.iter().map(|x| (x.clone(), UNSEEN)).collect();
    let mut reps = Vec::new();
    let mut queue = Vec::new();
    for x in points {
        if labels[x] != UNSEEN {
            continue;
        }
        let id = reps.len() as u32;
        reps.push(x.clone());
        *labels.get_mut(x).unwrap() = id;
        queue.push(x.clone());
        while let Some(y) = queue.pop() {
            for m in moves {
                let z = m(&y);
                let slot = labels.get_mut(&z).ok_or_else(|| Error::InvalidInput("move leaves the point set".into()))?;
                if *slot == UNSEEN {
                    *slot = id;
                    queue.push(z);
                }
            }
        }
    }
    Ok(Orbits { labels, reps })
}

/// Number of orbits of `points` under the group generated by `moves`.
pub fn orbit_count<T: Hash + Eq + Clone>(points: &[T], moves: &[Move<T>], budget: usize) -> Result<usize> {
    Ok(orbits(points, moves, budget)?.count())
}

//! Three-way comparison of formula, invariant keys and enumeration oracle.

use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use super::keys::{key_evector, KeyReport};
use super::oracle::{oracle_evector, OracleReport};
use super::{evector_formula, EVector, U0Convention};
use crate::error::Result;
use crate::orders::{OrderKind, OrderSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    #[serde(rename = "MATCH")]
    Match,
    /// The formula is not integral on this cell.
    #[serde(rename = "KNOWN-GAP")]
    KnownGap,
    #[serde(rename = "MISMATCH")]
    Mismatch,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Match => "MATCH",
            Verdict::KnownGap => "KNOWN-GAP",
            Verdict::Mismatch => "MISMATCH",
        })
    }
}

#[derive(Clone, Debug)]
pub struct CellReport {
    pub spec: OrderSpec,
    pub r: u32,
    pub formula: EVector,
    pub keys: KeyReport,
    pub oracle: OracleReport,
    /// For flagged cells: the formula under the `two` convention.
    pub alternative: Option<EVector>,
    pub verdict: Verdict,
}

impl CellReport {
    /// Whether the `two` convention formula agrees with the oracle, on flagged cells.
    pub fn alternative_matches(&self) -> Option<bool> {
        self.alternative.as_ref().map(|a| a.integers() == self.oracle.evector.integers())
    }
}

impl fmt::Display for CellReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<22} p={} r={} formula={} keys={} oracle={} N={} {}",
            self.spec.kind.to_string(),
            self.spec.p,
            self.r,
            self.formula,
            self.keys.evector,
            self.oracle.evector,
            self.oracle.precision,
            self.verdict
        )?;
        if let (Some(a), Some(m)) = (&self.alternative, self.alternative_matches()) {
            write!(f, " [u0=two: {} {}]", a, if m { "MATCH" } else { "MISMATCH" })?;
        }
        Ok(())
    }
}

pub fn crosscheck_cell(spec: &OrderSpec, r: u32, conv: U0Convention, budget: usize) -> Result<CellReport> {
    let formula = evector_formula(spec, r, conv)?;
    let (keys, oracle) = rayon::join(|| key_evector(spec, r), || oracle_evector(spec, r, None, budget));
    let (keys, oracle) = (keys?, oracle?);
    let observed = oracle.evector.integers();
    let verdict = if keys.evector.integers() != observed {
        Verdict::Mismatch
    } else if formula.is_flagged() {
        Verdict::KnownGap
    } else if formula.integers() == observed {
        Verdict::Match
    } else {
        Verdict::Mismatch
    };
    let alternative = match (formula.is_flagged(), spec.kind) {
        (true, OrderKind::SplitCommutative { .. }) => Some(evector_formula(spec, r, U0Convention::Two)?),
        _ => None,
    };
    Ok(CellReport { spec: *spec, r, formula, keys, oracle, alternative, verdict })
}

/// Run every cell; cells are independent and run in parallel.
pub fn crosscheck(cells: &[(OrderSpec, u32)], conv: U0Convention, budget: usize) -> Result<Vec<CellReport>> {
    cells.par_iter().map(|(s, r)| crosscheck_cell(s, *r, conv, budget)).collect()
}

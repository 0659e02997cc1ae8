//! Command-line surface: numbers, cross-checks, branch renders and small calculators.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::io::Write;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::bt_tree::{canonical_ball, Ball, End};
use crate::counting::crosscheck::{crosscheck, CellReport, Verdict};
use crate::counting::keys::key_evector;
use crate::counting::oracle::oracle_evector;
use crate::counting::{chi, evector_formula, EVector, U0Convention, DEFAULT_ORBIT_BUDGET};
use crate::error::{Error, Result};
use crate::matrix::Mat2;
use crate::moebius::{act_on_ball_lattice, act_on_ball_partition, apply_to_end, cross_ratio, MoebiusMap};
use crate::orders::{branch_symbolic, OrderKind, OrderSpec};
use crate::padic::{pow_u64, PAdicScalar, Valuation};

/// Exit code for usage errors.
pub const EXIT_USAGE: i32 = 2;
/// Exit code for failed computations.
pub const EXIT_COMPUTATION: i32 = 3;
/// Exit code for a cross-check with at least one MISMATCH.
pub const EXIT_MISMATCH: i32 = 1;

#[derive(Parser, Debug)]
#[command(name = "bte", version, about = "Bruhat-Tits tree branches and local optimal embedding numbers")]
pub struct Cli {
    /// p-adic working precision in digits
    #[arg(long, global = true, env = "BTE_PRECISION", default_value_t = 24)]
    pub precision: u32,
    /// Largest point set the orbit search may handle
    #[arg(long, global = true, default_value_t = DEFAULT_ORBIT_BUDGET)]
    pub budget: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Trivial,
    Nilpotent,
    Split,
    Triangular,
    Eichler,
}

#[derive(Args, Debug)]
pub struct OrderArgs {
    #[arg(long)]
    pub p: u64,
    #[arg(long, value_enum)]
    pub order: KindArg,
    /// Thickness parameter of split, triangular and Eichler orders
    #[arg(long, default_value_t = 0)]
    pub t: u32,
    /// Level of the Eichler order for `--order eichler`
    #[arg(long, default_value_t = 0)]
    pub eichler_level: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Formula,
    Oracle,
    Keys,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Dot,
    Table,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Embedding numbers e1..e4 of one order at one level
    Numbers {
        #[command(flatten)]
        order: OrderArgs,
        #[arg(long)]
        level: u32,
        #[arg(long, value_enum, default_value = "formula")]
        method: MethodArg,
        #[arg(long, value_enum, default_value = "one")]
        u0: U0Convention,
        /// Truncation exponent of the oracle (default: per-kind bound)
        #[arg(long)]
        oracle_n: Option<u32>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Compare formula, invariant keys and oracle over a grid
    Crosscheck {
        #[arg(long, value_delimiter = ',', default_values_t = [2u64, 3])]
        primes: Vec<u64>,
        #[arg(long, value_delimiter = ',', value_enum, default_values_t = [KindArg::Nilpotent, KindArg::Triangular, KindArg::Split])]
        kinds: Vec<KindArg>,
        #[arg(long, default_value_t = 2)]
        t_max: u32,
        #[arg(long, default_value_t = 0)]
        r_min: u32,
        #[arg(long, default_value_t = 4)]
        r_max: u32,
        #[arg(long, value_enum, default_value = "one")]
        u0: U0Convention,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
    },
    /// Render the branch of a standard order near B_0^[0]
    Branch {
        #[command(flatten)]
        order: OrderArgs,
        #[arg(long, default_value_t = 3)]
        radius: u32,
        #[arg(long, value_enum, default_value = "dot")]
        format: Format,
    },
    /// The count χ(r, u, t)
    Chi {
        #[arg(long)]
        p: u64,
        #[arg(long)]
        r: u32,
        #[arg(long)]
        u: u32,
        #[arg(long)]
        t: u32,
        #[arg(long, value_enum, default_value = "one")]
        u0: U0Convention,
    },
    /// Apply a matrix to a ball (`z,n` or `B_z^[n]`) or an end (`z` or `inf`)
    Act {
        #[arg(long)]
        p: u64,
        /// Entries `a,b,c,d` of `[[a,b],[c,d]]`, integers or fractions
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        matrix: Vec<String>,
        #[arg(long, conflicts_with = "end", required_unless_present = "end")]
        ball: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        end: Option<String>,
    },
    /// Cross-ratio `[a, b; c, d]` of four ends
    Crossratio {
        #[arg(long)]
        p: u64,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        ends: Vec<String>,
    },
}

fn is_prime(p: u64) -> bool {
    p >= 2 && (2..).take_while(|d| d * d <= p).all(|d| !p.is_multiple_of(d))
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

enum Failure {
    Usage(String),
    Compute(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Compute(e)
    }
}

fn check_prime(p: u64) -> std::result::Result<(), Failure> {
    if is_prime(p) {
        Ok(())
    } else {
        Err(usage(format!("{p} is not prime")))
    }
}

fn order_kind(kind: KindArg, t: u32, r: u32) -> OrderKind {
    match kind {
        KindArg::Trivial => OrderKind::Trivial,
        KindArg::Nilpotent => OrderKind::Nilpotent,
        KindArg::Split => OrderKind::SplitCommutative { t },
        KindArg::Triangular => OrderKind::Triangular { t },
        KindArg::Eichler => OrderKind::EichlerThick { r, t },
    }
}

fn order_json(spec: &OrderSpec) -> Value {
    json!({"kind": spec.kind.name(), "t": spec.kind.t()})
}

/// One row of the numbers schema.
pub fn evector_json(spec: &OrderSpec, r: u32, e: &EVector, stabilized: Option<bool>) -> Value {
    let mut flags = e.flag_names();
    if e.reason.is_some() {
        flags.push("no_optimal_embedding".into());
    }
    json!({
        "p": spec.p,
        "order": order_json(spec),
        "level": r,
        "e": e.json_entries(),
        "method": e.method.to_string(),
        "flags": flags,
        "stabilized": stabilized,
    })
}

fn cell_json(c: &CellReport) -> Value {
    json!({
        "p": c.spec.p,
        "order": order_json(&c.spec),
        "level": c.r,
        "formula": c.formula.json_entries(),
        "keys": c.keys.evector.json_entries(),
        "oracle": c.oracle.evector.json_entries(),
        "precision": c.oracle.precision,
        "stabilized": c.oracle.stabilized,
        "verdict": c.verdict,
        "formula_u0_two": c.alternative.as_ref().map(|a| a.json_entries()),
    })
}

fn parse_end(p: u64, s: &str, prec: u32) -> Result<End> {
    if s.trim().eq_ignore_ascii_case("inf") {
        Ok(End::Infinity)
    } else {
        Ok(End::Finite(PAdicScalar::parse(p, s, prec)?))
    }
}

/// `z,n` or `B_z^[n]`.
fn parse_ball(p: u64, s: &str, prec: u32) -> Result<Ball> {
    let bad = || Error::InvalidInput(format!("cannot parse ball '{s}'"));
    let s = s.trim();
    let (z, n) = if let Some(rest) = s.strip_prefix("B_") {
        let (z, n) = rest.split_once("^[").ok_or_else(bad)?;
        (z, n.strip_suffix(']').ok_or_else(bad)?)
    } else {
        s.split_once(',').ok_or_else(bad)?
    };
    let n: i64 = n.trim().parse().map_err(|_| bad())?;
    canonical_ball(p, &PAdicScalar::parse(p, z, prec)?, n)
}

/// A scalar as valuation plus unit digits modulo `p^digits`.
fn scalar_json(x: &PAdicScalar, digits: u32) -> Value {
    match (x.valuation(), x.unit()) {
        (Valuation::Finite(v), Some(u)) => {
            let k = digits.min(x.precision().unwrap_or(digits));
            json!({"valuation": v, "unit": u % pow_u64(x.prime(), k), "unit_modulus": pow_u64(x.prime(), k)})
        }
        _ => json!({"valuation": "inf"}),
    }
}

fn end_json(e: &End) -> Value {
    match e {
        End::Infinity => json!("inf"),
        End::Finite(z) => scalar_json(z, 8),
    }
}

fn branch_output(spec: &OrderSpec, radius: u32, format: Format) -> String {
    let branch = branch_symbolic(spec);
    let origin = Ball::zero_chain(spec.p, 0);
    let vertices: BTreeSet<Ball> = branch.restrict(&origin, radius);
    let mut edges = Vec::new();
    for v in &vertices {
        for c in v.children() {
            if vertices.contains(&c) {
                edges.push((*v, c));
            }
        }
    }
    match format {
        Format::Dot => {
            let mut s = String::from("digraph branch {\n  node [shape=circle];\n");
            for v in &vertices {
                let shape = if branch.is_stem(v) { "box" } else { "circle" };
                let depth = branch.depth(v).map_or("none".to_string(), |d| d.to_string());
                s.push_str(&format!("  \"{}\" [shape={shape}, depth={depth}];\n", v.label()));
            }
            for (a, b) in &edges {
                s.push_str(&format!("  \"{}\" -> \"{}\";\n", a.label(), b.label()));
            }
            s.push_str("}\n");
            s
        }
        _ => {
            let vs: Vec<Value> = vertices
                .iter()
                .map(|v| json!({"label": v.label(), "level": v.level(), "depth": branch.depth(v), "stem": branch.is_stem(v)}))
                .collect();
            let es: Vec<Value> = edges.iter().map(|(a, b)| json!([a.label(), b.label()])).collect();
            let doc = json!({"p": spec.p, "order": order_json(spec), "radius": radius, "vertices": vs, "edges": es});
            format!("{doc}\n")
        }
    }
}

fn execute(cli: Cli, out: &mut dyn Write) -> std::result::Result<i32, Failure> {
    let prec = cli.precision;
    if prec == 0 {
        return Err(usage("precision must be positive"));
    }
    if cli.budget == 0 {
        return Err(usage("budget must be positive"));
    }
    let w = |out: &mut dyn Write, s: String| out.write_all(s.as_bytes()).map_err(|e| Error::InvalidInput(e.to_string()));
    match cli.command {
        Command::Numbers { order, level, method, u0, oracle_n, format } => {
            check_prime(order.p)?;
            let spec = OrderSpec::new(order.p, order_kind(order.order, order.t, order.eichler_level));
            let mut rows: Vec<(EVector, Option<bool>)> = Vec::new();
            if matches!(method, MethodArg::Formula | MethodArg::All) {
                rows.push((evector_formula(&spec, level, u0)?, None));
            }
            if matches!(method, MethodArg::Keys | MethodArg::All) {
                rows.push((key_evector(&spec, level)?.evector, None));
            }
            if matches!(method, MethodArg::Oracle | MethodArg::All) {
                let rep = oracle_evector(&spec, level, oracle_n, cli.budget)?;
                rows.push((rep.evector.clone(), Some(rep.stabilized)));
            }
            for (e, stab) in rows {
                let line = match format {
                    Format::Table => format!("{:<8} {}\n", e.method.to_string(), e),
                    _ => format!("{}\n", evector_json(&spec, level, &e, stab)),
                };
                w(out, line)?;
            }
            Ok(0)
        }
        Command::Crosscheck { primes, kinds, t_max, r_min, r_max, u0, format } => {
            let mut cells = Vec::new();
            for &p in &primes {
                check_prime(p)?;
                for &k in &kinds {
                    let ts: Vec<u32> = match k {
                        KindArg::Nilpotent => vec![0],
                        KindArg::Split | KindArg::Triangular => (0..=t_max).collect(),
                        _ => return Err(usage("crosscheck supports nilpotent, split and triangular")),
                    };
                    for t in ts {
                        for r in r_min..=r_max {
                            cells.push((OrderSpec::new(p, order_kind(k, t, 0)), r));
                        }
                    }
                }
            }
            let reports = crosscheck(&cells, u0, cli.budget)?;
            let mut mismatches = 0;
            for c in &reports {
                if c.verdict == Verdict::Mismatch {
                    mismatches += 1;
                }
                let line = match format {
                    Format::Json => format!("{}\n", cell_json(c)),
                    _ => format!("{c}\n"),
                };
                w(out, line)?;
            }
            if format != Format::Json {
                let count = |v| reports.iter().filter(|c| c.verdict == v).count();
                w(
                    out,
                    format!(
                        "cells={} MATCH={} KNOWN-GAP={} MISMATCH={}\n",
                        reports.len(),
                        count(Verdict::Match),
                        count(Verdict::KnownGap),
                        mismatches
                    ),
                )?;
            }
            Ok(if mismatches > 0 { EXIT_MISMATCH } else { 0 })
        }
        Command::Branch { order, radius, format } => {
            check_prime(order.p)?;
            let spec = OrderSpec::new(order.p, order_kind(order.order, order.t, order.eichler_level));
            w(out, branch_output(&spec, radius, format))?;
            Ok(0)
        }
        Command::Chi { p, r, u, t, u0 } => {
            check_prime(p)?;
            w(out, format!("{}\n", chi(p, r, u, t, u0)?))?;
            Ok(0)
        }
        Command::Act { p, matrix, ball, end } => {
            check_prime(p)?;
            if matrix.len() != 4 {
                return Err(usage("--matrix takes four entries a,b,c,d"));
            }
            let e: Vec<PAdicScalar> = matrix.iter().map(|s| PAdicScalar::parse(p, s, prec)).collect::<Result<_>>()?;
            let s = MoebiusMap::new(Mat2::new(e[0], e[1], e[2], e[3]))?;
            if let Some(b) = ball {
                let b = parse_ball(p, &b, prec)?;
                let img = act_on_ball_lattice(&s, &b, prec)?;
                let part = act_on_ball_partition(&s, &b, prec)?;
                if img != part {
                    return Err(Error::PrecisionExhausted("lattice and partition actions disagree".into()).into());
                }
                w(out, format!("{}\n", json!({"ball": b.label(), "image": img.label()})))?;
            } else if let Some(z) = end {
                let img = apply_to_end(&s, &parse_end(p, &z, prec)?)?;
                w(out, format!("{}\n", json!({"image": end_json(&img)})))?;
            }
            Ok(0)
        }
        Command::Crossratio { p, ends } => {
            check_prime(p)?;
            if ends.len() != 4 {
                return Err(usage("--ends takes four ends"));
            }
            let e: Vec<End> = ends.iter().map(|s| parse_end(p, s, prec)).collect::<Result<_>>()?;
            let cr = cross_ratio(&e[0], &e[1], &e[2], &e[3])?;
            w(out, format!("{}\n", json!({"cross_ratio": scalar_json(&cr, 8)})))?;
            Ok(0)
        }
    }
}

/// Parse `args` (including the program name) and run. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = out.write_all(text.as_bytes());
                    0
                }
                _ => {
                    let _ = err.write_all(text.as_bytes());
                    EXIT_USAGE
                }
            };
        }
    };
    match execute(cli, out) {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Compute(e)) => {
            let _ = writeln!(err, "{}", json!({"error": e.kind(), "message": e.to_string()}));
            EXIT_COMPUTATION
        }
    }
}

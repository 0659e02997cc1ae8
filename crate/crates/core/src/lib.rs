//! Bruhat-Tits tree of PGL2(Q_p), branches of quaternion suborders and local
//! optimal embedding numbers.

// index loops read closer to the matrix algebra they implement
#![allow(clippy::needless_range_loop, clippy::type_complexity)]

pub mod bt_tree;
pub mod cli;
pub mod counting;
pub mod error;
pub mod linalg;
pub mod matrix;
pub mod moebius;
pub mod orders;
pub mod padic;

pub use error::{Error, Result};
pub use padic::{PAdicScalar, Valuation};

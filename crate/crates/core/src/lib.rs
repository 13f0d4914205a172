//! Bounded mean oscillation on finite doubling metric measure spaces.
//!
//! A finite point set with exact pairwise distances and positive point
//! weights stands in for a doubling metric measure space. Every supremum
//! over balls is computed exactly by enumerating the finitely many distinct
//! balls, which turns the qualitative statements about BMO into checkable
//! numbers:
//!
//! * [`space`]: spaces, balls, doubling constants, nets, Vitali selection
//!   and adapted bump functions.
//! * [`oscillation`]: the BMO norm, its dual characterization, John–Nirenberg
//!   tails and constants, the distribution-function lemma and the
//!   Strömberg-type functional.
//! * [`uchiyama`]: density exponents, the multi-scale construction of
//!   partitions of unity with small BMO norm, and its converse.
//! * [`bmo_map`]: self-maps, composition operators and testers for the
//!   two-set density conditions that characterize BMO-maps.
//! * [`io`]: the text formats used by the command-line tool.

// `!(x <= tol)` is used on purpose so that NaN counts as a failure.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bmo_map;
pub mod error;
pub mod field;
pub mod io;
pub mod oscillation;
pub mod space;
pub mod uchiyama;

mod verdict;

pub use error::{Error, Result};
pub use field::ScalarField;
pub use space::{Ball, MetricMeasureSpace};
pub use verdict::Verdict;

/// Relative slack used when comparing two floating-point routes that agree
/// in exact arithmetic.
pub const EXACT_SLACK: f64 = 1e-12;

pub(crate) fn le_with_slack(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs + EXACT_SLACK * rhs.abs().max(1.0)
}

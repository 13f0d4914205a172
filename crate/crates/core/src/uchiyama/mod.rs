//! Density exponents and Uchiyama's construction of partitions of unity
//! with small BMO norm.
//!
//! Given sets `E_1, ..., E_N` whose common density on every ball is at most
//! `c_D^(-4 lambda)`, the construction produces `f_1, ..., f_N` with
//! `sum f_j = 1`, `0 <= f_j <= 1`, `f_j = 0` on `E_j` and `‖f_j‖_* <= c_1 / lambda`.

mod construct;
mod verify;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::space::{Ball, MetricMeasureSpace};
use crate::verdict::Verdict;

pub use construct::{
    construct_unchecked, level_bound_check, uchiyama_construct, ConstructionParams, ConstructionTrace, LevelBound,
    LevelChecks, LevelRecord,
};
pub use verify::{necessity_check, verify_construction, ConstructionReport, NecessityReport};

/// A subset of the points of a space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IndicatorSet {
    mask: Vec<bool>,
}

impl IndicatorSet {
    pub fn new(space: &MetricMeasureSpace, ids: &[usize]) -> Result<Self> {
        let mut mask = vec![false; space.len()];
        for &i in ids {
            if i >= space.len() {
                return Err(Error::Invalid(format!("point id {i} out of range")));
            }
            mask[i] = true;
        }
        Ok(Self { mask })
    }

    pub fn from_mask(space: &MetricMeasureSpace, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != space.len() {
            return Err(Error::Invalid(format!(
                "mask has {} entries but the space has {} points",
                mask.len(),
                space.len()
            )));
        }
        Ok(Self { mask })
    }

    pub(crate) fn from_mask_unchecked(mask: Vec<bool>) -> Self {
        Self { mask }
    }

    pub fn empty(space: &MetricMeasureSpace) -> Self {
        Self {
            mask: vec![false; space.len()],
        }
    }

    pub fn full(space: &MetricMeasureSpace) -> Self {
        Self {
            mask: vec![true; space.len()],
        }
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        self.mask[i]
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn ids(&self) -> Vec<usize> {
        (0..self.mask.len()).filter(|&i| self.mask[i]).collect()
    }

    pub fn len(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&b| b)
    }

    pub fn measure(&self, space: &MetricMeasureSpace) -> f64 {
        self.measure_in(space, &(0..space.len()).collect::<Vec<_>>())
    }

    /// `mu(E ∩ members)`.
    pub fn measure_in(&self, space: &MetricMeasureSpace, members: &[usize]) -> f64 {
        members.iter().filter(|&&y| self.mask[y]).map(|&y| space.weight(y)).sum()
    }

    pub fn complement(&self) -> Self {
        Self {
            mask: self.mask.iter().map(|b| !b).collect(),
        }
    }

    pub fn union(&self, other: &Self) -> Self {
        Self {
            mask: self.mask.iter().zip(&other.mask).map(|(a, b)| *a || *b).collect(),
        }
    }

    pub fn indicator(&self) -> ScalarField {
        ScalarField::from_values_unchecked(self.mask.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect())
    }
}

/// `log_{c_d}(mu(members) / mu(E ∩ members))`, `INFINITY` when `E` misses.
pub(crate) fn g_members(space: &MetricMeasureSpace, set: &IndicatorSet, members: &[usize], measure: f64, c_d: f64) -> f64 {
    let inside = set.measure_in(space, members);
    if inside == 0.0 {
        f64::INFINITY
    } else if inside == measure {
        0.0
    } else {
        (measure / inside).ln() / c_d.ln()
    }
}

/// The density exponent `g(B) = log_{c_d}(mu(B) / mu(E ∩ B))`.
pub fn g_value(space: &MetricMeasureSpace, set: &IndicatorSet, ball: &Ball, c_d: f64) -> f64 {
    g_members(space, set, space.ball_slice(ball), space.ball_measure(ball), c_d)
}

/// Checks `g(B1) >= g(B2) - k` for nested balls with
/// `c_d^k mu(B1) >= mu(B2)`.
pub fn g_monotonicity_check(
    space: &MetricMeasureSpace,
    set: &IndicatorSet,
    b1: &Ball,
    b2: &Ball,
    k: f64,
    c_d: f64,
) -> Verdict {
    let inner = space.ball_slice(b1);
    if !inner.iter().all(|&y| space.contains(b2, y)) {
        return Verdict::NotApplicable("first ball is not inside the second".into());
    }
    let (m1, m2) = (space.ball_measure(b1), space.ball_measure(b2));
    if c_d.powf(k) * m1 < m2 {
        return Verdict::NotApplicable(format!("c_d^k mu(B1) = {} < mu(B2) = {m2}", c_d.powf(k) * m1));
    }
    let (g1, g2) = (g_value(space, set, b1, c_d), g_value(space, set, b2, c_d));
    // an infinite g2 forces E to miss B2, hence B1 too
    if g2.is_infinite() || crate::le_with_slack(g2 - k, g1) {
        Verdict::Pass
    } else {
        Verdict::Fail(format!("g(B1) = {g1} < g(B2) - k = {}", g2 - k))
    }
}

/// Whether `q` satisfies `1 + n c_d^6 q <= 2^q`.
pub fn q_admissible(c_d: f64, n: usize, q: u32) -> bool {
    1.0 + n as f64 * c_d.powi(6) * q as f64 <= (q as f64).exp2()
}

/// The smallest positive integer `q` with `1 + n c_d^6 q <= 2^q`.
///
/// `h(q) = 2^q - 1 - n c_d^6 q` is convex with `h(1) < 0`, so the
/// admissible integers form a ray; a doubling search followed by bisection
/// finds its start.
pub fn choose_q(c_d: f64, n: usize) -> Result<u32> {
    if !(c_d >= 1.0 && c_d.is_finite()) || n == 0 {
        return Err(Error::Invalid(format!("need c_d >= 1 and n >= 1, got c_d = {c_d}, n = {n}")));
    }
    let mut hi = 1u32;
    while !q_admissible(c_d, n, hi) {
        hi *= 2;
        if hi > 1000 {
            return Err(Error::Invalid(format!("no admissible q below 1000 for c_d = {c_d}")));
        }
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if q_admissible(c_d, n, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DensityReport {
    /// `sup_B min_j mu(E_j ∩ B) / mu(B)`.
    pub value: f64,
    pub ball: Ball,
    /// Largest `lambda` with `value <= c_d^(-4 lambda)`.
    #[serde(serialize_with = "crate::io::real")]
    pub lambda_max: f64,
}

pub fn density_functional(space: &MetricMeasureSpace, sets: &[IndicatorSet], c_d: f64) -> Result<DensityReport> {
    if sets.is_empty() {
        return Err(Error::Invalid("need at least one set".into()));
    }
    let best = crate::oscillation::max_over_balls(space, |members, measure| {
        sets.iter()
            .map(|e| e.measure_in(space, members) / measure)
            .fold(f64::INFINITY, f64::min)
    });
    Ok(DensityReport {
        value: best.value,
        ball: best.ball,
        lambda_max: lambda_max(best.value, c_d),
    })
}

pub(crate) fn lambda_max(density: f64, c_d: f64) -> f64 {
    if density == 0.0 || c_d <= 1.0 {
        f64::INFINITY
    } else {
        -density.ln() / c_d.ln() / 4.0
    }
}

/// `f_j = chi_{E_j^c} / sum_k chi_{E_k^c}`.
pub fn trivial_construction(space: &MetricMeasureSpace, sets: &[IndicatorSet]) -> Result<Vec<ScalarField>> {
    let outside: Vec<usize> = (0..space.len())
        .map(|x| sets.iter().filter(|e| !e.contains(x)).count())
        .collect();
    if let Some(x) = outside.iter().position(|&c| c == 0) {
        return Err(Error::Hypothesis(format!("point {x} lies in every set")));
    }
    Ok(sets
        .iter()
        .map(|e| {
            ScalarField::from_values_unchecked(
                (0..space.len())
                    .map(|x| if e.contains(x) { 0.0 } else { 1.0 / outside[x] as f64 })
                    .collect(),
            )
        })
        .collect())
}

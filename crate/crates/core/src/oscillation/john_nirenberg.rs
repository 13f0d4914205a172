//! Level-set tails: the John–Nirenberg inequality, its two-sided form and
//! the converse via distribution functions.

use rayon::prelude::*;
use serde::Serialize;

use super::{average_over, bmo_norm};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::space::{Ball, CanonicalBall, MetricMeasureSpace};

/// `mu({x in B : |f(x) - f_B| > lambda})`.
pub fn jn_tail(space: &MetricMeasureSpace, f: &ScalarField, ball: &Ball, lambda: f64) -> f64 {
    let members = space.ball_slice(ball);
    let avg = average_over(space, f, members);
    members
        .iter()
        .filter(|&&y| (f[y] - avg).abs() > lambda)
        .map(|&y| space.weight(y))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailRecord {
    pub ball: Ball,
    pub lambda: f64,
    pub tail: f64,
    pub measure: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailProfile {
    pub norm: f64,
    pub records: Vec<TailRecord>,
}

impl TailProfile {
    /// Records violating `tail <= 2 mu(B) exp(-A lambda / norm)`.
    pub fn violations(&self, a: f64) -> Vec<TailRecord> {
        self.records
            .iter()
            .filter(|r| !crate::le_with_slack(r.tail, 2.0 * r.measure * (-a * r.lambda / self.norm).exp()))
            .copied()
            .collect()
    }
}

/// Tail profile over every canonical ball at `lambda = ‖f‖_* 2^i`,
/// `i = -4..=6`.
pub fn jn_profile(space: &MetricMeasureSpace, f: &ScalarField) -> TailProfile {
    let norm = bmo_norm(space, f).value;
    let lambdas: Vec<f64> = (-4..=6).map(|i| norm * f64::powi(2.0, i)).collect();
    jn_profile_with(space, f, &lambdas)
}

pub fn jn_profile_with(space: &MetricMeasureSpace, f: &ScalarField, lambdas: &[f64]) -> TailProfile {
    let norm = bmo_norm(space, f).value;
    let records = space
        .canonical()
        .flat_map(|cb| {
            let avg = average_over(space, f, cb.members);
            lambdas.iter().map(move |&lambda| TailRecord {
                ball: cb.ball,
                lambda,
                tail: cb
                    .members
                    .iter()
                    .filter(|&&y| (f[y] - avg).abs() > lambda)
                    .map(|&y| space.weight(y))
                    .sum(),
                measure: cb.measure,
            })
        })
        .collect();
    TailProfile { norm, records }
}

/// The norm of `f` with the best John–Nirenberg constant it admits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JnSummary {
    pub norm: f64,
    /// Largest `A` with `mu({|f - f_B| > lambda} ∩ B) <= 2 mu(B) exp(-A lambda / norm)`
    /// for every ball and every `lambda > 0`. Infinite for constant fields.
    #[serde(serialize_with = "crate::io::real")]
    pub constant: f64,
    /// Ball and level where the constant is attained.
    pub ball: Option<Ball>,
    #[serde(serialize_with = "crate::io::real")]
    pub level: f64,
}

/// The tail of a ball is a step function of `lambda` that drops right
/// after each distinct deviation `d`. On `[d_prev, d)` it equals
/// `mu({dev >= d})`, so the binding constraint sits at `lambda -> d` and
/// the supremum of admissible `A` is a minimum over finitely many
/// `(ball, d)` pairs.
pub fn jn_summary(space: &MetricMeasureSpace, f: &ScalarField) -> JnSummary {
    let norm = bmo_norm(space, f).value;
    if norm == 0.0 {
        return JnSummary {
            norm,
            constant: f64::INFINITY,
            ball: None,
            level: f64::NAN,
        };
    }
    let per_center: Vec<(f64, Option<Ball>, f64)> = (0..space.len())
        .into_par_iter()
        .map(|c| {
            let mut best = (f64::INFINITY, None, f64::NAN);
            let mut dev: Vec<(f64, f64)> = Vec::new();
            for cb in space.canonical_at(c) {
                let avg = average_over(space, f, cb.members);
                dev.clear();
                dev.extend(cb.members.iter().map(|&y| ((f[y] - avg).abs(), space.weight(y))));
                dev.sort_by(|a, b| b.0.total_cmp(&a.0));
                // descending: accumulate mu({dev >= d}) for each distinct d
                let mut upper = 0.0;
                let mut i = 0;
                while i < dev.len() {
                    let d = dev[i].0;
                    while i < dev.len() && dev[i].0 == d {
                        upper += dev[i].1;
                        i += 1;
                    }
                    if d <= 0.0 {
                        break;
                    }
                    let a = norm / d * (2.0 * cb.measure / upper).ln();
                    if a < best.0 {
                        best = (a, Some(cb.ball), d);
                    }
                }
            }
            best
        })
        .collect();
    let (constant, ball, level) = per_center
        .into_iter()
        .reduce(|a, b| if b.0 < a.0 { b } else { a })
        .expect("spaces are nonempty");
    JnSummary {
        norm,
        constant,
        ball,
        level,
    }
}

pub fn jn_constant(space: &MetricMeasureSpace, f: &ScalarField) -> f64 {
    jn_summary(space, f).constant
}

/// `min(mu({x in B : f >= t}), mu({x in B : f <= s}))`.
pub fn two_sided_tail(space: &MetricMeasureSpace, f: &ScalarField, ball: &Ball, s: f64, t: f64) -> f64 {
    let members = space.ball_slice(ball);
    let above: f64 = members.iter().filter(|&&y| f[y] >= t).map(|&y| space.weight(y)).sum();
    let below: f64 = members.iter().filter(|&&y| f[y] <= s).map(|&y| space.weight(y)).sum();
    above.min(below)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoSidedWitness {
    pub ball: Ball,
    pub s: f64,
    pub t: f64,
    pub tail: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoSidedCheck {
    pub c1: f64,
    pub c2: f64,
    pub pairs: usize,
    pub violations: usize,
    /// Largest `tail / bound` seen.
    #[serde(serialize_with = "crate::io::real")]
    pub worst_ratio: f64,
    pub worst: Option<TwoSidedWitness>,
}

impl TwoSidedCheck {
    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

/// Checks `min(mu({f >= t} ∩ B), mu({f <= s} ∩ B)) <= c1 mu(B) exp(-c2 (t - s))`
/// for every ball and every real `s <= t`.
///
/// Both level sets only change at values of `f`, and the right-hand side
/// is smallest when `t - s` is largest, so taking `s` and `t` among the
/// values of `f` on the ball covers the worst case of each configuration.
pub fn check_two_sided(space: &MetricMeasureSpace, f: &ScalarField, c1: f64, c2: f64) -> TwoSidedCheck {
    let per_center: Vec<TwoSidedCheck> = (0..space.len())
        .into_par_iter()
        .map(|c| {
            let mut out = TwoSidedCheck {
                c1,
                c2,
                pairs: 0,
                violations: 0,
                worst_ratio: 0.0,
                worst: None,
            };
            for cb in space.canonical_at(c) {
                two_sided_ball(space, f, &cb, &mut out);
            }
            out
        })
        .collect();
    per_center
        .into_iter()
        .reduce(|mut a, b| {
            a.pairs += b.pairs;
            a.violations += b.violations;
            if b.worst_ratio > a.worst_ratio {
                a.worst_ratio = b.worst_ratio;
                a.worst = b.worst;
            }
            a
        })
        .expect("spaces are nonempty")
}

fn two_sided_ball(space: &MetricMeasureSpace, f: &ScalarField, cb: &CanonicalBall<'_>, out: &mut TwoSidedCheck) {
    let (values, cum) = level_masses(space, f, cb.members);
    let m = values.len();
    let total = cum[m - 1];
    for k in 0..m {
        let below = cum[k];
        // once the largest gap passes, every t in this row passes too
        if crate::le_with_slack(below, out.c1 * cb.measure * (-out.c2 * (values[m - 1] - values[k])).exp()) {
            out.pairs += m - k;
            continue;
        }
        for l in k..m {
            out.pairs += 1;
            let above = if l == 0 { total } else { total - cum[l - 1] };
            let tail = below.min(above);
            let bound = out.c1 * cb.measure * (-out.c2 * (values[l] - values[k])).exp();
            let ratio = tail / bound;
            if ratio > out.worst_ratio {
                out.worst_ratio = ratio;
                out.worst = Some(TwoSidedWitness {
                    ball: cb.ball,
                    s: values[k],
                    t: values[l],
                    tail,
                    bound,
                });
            }
            if !crate::le_with_slack(tail, bound) {
                out.violations += 1;
            }
        }
    }
}

/// Distinct values of `f` on `members` in ascending order with the
/// cumulative measure `mu({f <= v})` of each.
fn level_masses(space: &MetricMeasureSpace, f: &ScalarField, members: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let mut pairs: Vec<(f64, f64)> = members.iter().map(|&y| (f[y], space.weight(y))).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut values = Vec::new();
    let mut cum = Vec::new();
    let mut acc = 0.0;
    let mut i = 0;
    while i < pairs.len() {
        let v = pairs[i].0;
        while i < pairs.len() && pairs[i].0 == v {
            acc += pairs[i].1;
            i += 1;
        }
        values.push(v);
        cum.push(acc);
    }
    (values, cum)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConverseReport {
    pub c1: f64,
    pub c2: f64,
    /// `4 (c1 + 1) exp(2 c2) / c2`.
    pub bound: f64,
    pub norm: f64,
    pub hypothesis: TwoSidedCheck,
}

/// Verifies the two-sided hypothesis with constants `(c1, c2)` and then
/// asserts `‖f‖_* <= 4 (c1 + 1) exp(2 c2) / c2`.
pub fn jn_converse(space: &MetricMeasureSpace, f: &ScalarField, c1: f64, c2: f64) -> Result<ConverseReport> {
    if !(c1 > 0.0 && c2 > 0.0 && c1.is_finite() && c2.is_finite()) {
        return Err(Error::Invalid(format!("constants must be positive and finite, got ({c1}, {c2})")));
    }
    let hypothesis = check_two_sided(space, f, c1, c2);
    if !hypothesis.holds() {
        let w = hypothesis.worst.expect("a violation has a witness");
        return Err(Error::Hypothesis(format!(
            "two-sided tail {} exceeds {} on ball ({}, {}) at s = {}, t = {}",
            w.tail, w.bound, w.ball.center, w.ball.radius, w.s, w.t
        )));
    }
    let bound = 4.0 * (c1 + 1.0) * (2.0 * c2).exp() / c2;
    let norm = bmo_norm(space, f).value;
    if !crate::le_with_slack(norm, bound) {
        return Err(Error::Assertion(format!("norm {norm} exceeds the converse bound {bound}")));
    }
    Ok(ConverseReport {
        c1,
        c2,
        bound,
        norm,
        hypothesis,
    })
}

/// A non-decreasing right-continuous step function with values in `[0, 1]`.
///
/// It equals `floor` below `breakpoints[0]` and `values[i]` on
/// `[breakpoints[i], breakpoints[i + 1])`, the last piece extending to
/// infinity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionFunction {
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
    pub floor: f64,
}

impl DistributionFunction {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>, floor: f64) -> Result<Self> {
        if breakpoints.is_empty() || breakpoints.len() != values.len() {
            return Err(Error::Invalid("need one value per breakpoint and at least one breakpoint".into()));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) || breakpoints.iter().any(|t| !t.is_finite()) {
            return Err(Error::Invalid("breakpoints must be finite and strictly increasing".into()));
        }
        let mut prev = floor;
        for &v in &values {
            if !(0.0..=1.0).contains(&v) || v < prev {
                return Err(Error::Invalid("values must be non-decreasing within [0, 1]".into()));
            }
            prev = v;
        }
        if !(0.0..=1.0).contains(&floor) {
            return Err(Error::Invalid("floor must lie in [0, 1]".into()));
        }
        Ok(Self {
            breakpoints,
            values,
            floor,
        })
    }

    /// `t -> mu({x in members : f(x) <= t}) / mu(members)`.
    pub fn empirical(space: &MetricMeasureSpace, f: &ScalarField, members: &[usize]) -> Self {
        let (values, cum) = level_masses(space, f, members);
        let total = *cum.last().expect("nonempty member set");
        Self {
            breakpoints: values,
            values: cum.iter().map(|c| c / total).collect(),
            floor: 0.0,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let k = self.breakpoints.partition_point(|&b| b <= t);
        if k == 0 {
            self.floor
        } else {
            self.values[k - 1]
        }
    }

    pub fn is_constant(&self) -> bool {
        self.values.iter().all(|&v| v == self.floor)
    }

    pub fn shifted(&self, c: f64) -> Self {
        Self {
            breakpoints: self.breakpoints.iter().map(|t| t + c).collect(),
            values: self.values.clone(),
            floor: self.floor,
        }
    }

    /// Pieces `(start, end, value)` covering the line, the first starting
    /// at `-inf` and the last ending at `+inf`.
    fn pieces(&self) -> Vec<(f64, f64, f64)> {
        let m = self.breakpoints.len();
        let mut out = Vec::with_capacity(m + 1);
        out.push((f64::NEG_INFINITY, self.breakpoints[0], self.floor));
        for i in 0..m {
            let end = if i + 1 < m { self.breakpoints[i + 1] } else { f64::INFINITY };
            out.push((self.breakpoints[i], end, self.values[i]));
        }
        out
    }

    /// Checks `min(lambda(s), 1 - lambda(t)) <= c1 exp(-c2 (t - s))` for all
    /// `s <= t`, returning the first violating `(s, t)`.
    ///
    /// For `s` in piece `a` and `t` in piece `b` the left side is fixed and
    /// the bound tightens as `t - s` grows toward `end_b - start_a`.
    pub fn check_hypothesis(&self, c1: f64, c2: f64) -> std::result::Result<(), (f64, f64)> {
        let pieces = self.pieces();
        for (a, &(start_a, _, val_a)) in pieces.iter().enumerate() {
            for &(_, end_b, val_b) in &pieces[a..] {
                let lhs = val_a.min(1.0 - val_b);
                let gap = end_b - start_a;
                let ok = if gap.is_infinite() {
                    lhs <= 0.0
                } else {
                    crate::le_with_slack(lhs, c1 * (-c2 * gap).exp())
                };
                if !ok {
                    return Err((start_a, end_b));
                }
            }
        }
        Ok(())
    }

    /// Whether `max(lambda(t0 - t), 1 - lambda(t0 + t)) <= r exp(-c2 t)`
    /// for every `t >= 0`.
    pub fn concentrates_at(&self, t0: f64, r: f64, c2: f64) -> bool {
        self.pieces().iter().all(|&(start, end, val)| {
            // lambda(u) for u <= t0, worst at the left end of the piece
            let left = if start > t0 {
                true
            } else if start.is_infinite() {
                val <= 0.0
            } else {
                crate::le_with_slack(val, r * (-c2 * (t0 - start)).exp())
            };
            // 1 - lambda(u) for u >= t0, worst as u approaches the right end
            let right = if end <= t0 {
                true
            } else if end.is_infinite() {
                val >= 1.0
            } else {
                crate::le_with_slack(1.0 - val, r * (-c2 * (end - t0)).exp())
            };
            left && right
        })
    }
}

/// Smallest `t0` among breakpoints and midpoints of consecutive breakpoints
/// at which the distribution concentrates with rate `c2` and prefactor
/// `(c1 + 1) exp(2 c2)`.
pub fn find_t0(df: &DistributionFunction, c1: f64, c2: f64) -> Result<f64> {
    if df.is_constant() {
        return Err(Error::Invalid("distribution function is constant".into()));
    }
    if let Err((s, t)) = df.check_hypothesis(c1, c2) {
        return Err(Error::Hypothesis(format!("tail hypothesis fails for s near {s}, t near {t}")));
    }
    let r = (c1 + 1.0) * (2.0 * c2).exp();
    let mut candidates = Vec::with_capacity(2 * df.breakpoints.len());
    for (i, &b) in df.breakpoints.iter().enumerate() {
        candidates.push(b);
        if let Some(&next) = df.breakpoints.get(i + 1) {
            candidates.push(0.5 * (b + next));
        }
    }
    candidates
        .into_iter()
        .find(|&t0| df.concentrates_at(t0, r, c2))
        .ok_or_else(|| Error::Hypothesis("no breakpoint or midpoint satisfies the concentration bound".into()))
}

//! Reports on constructed partitions and the converse direction.

use serde::Serialize;

use super::{lambda_max, IndicatorSet};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::oscillation::{average_over, bmo_norm, jn_summary};
use crate::space::{Ball, MetricMeasureSpace};
use crate::verdict::Verdict;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstructionReport {
    /// `max_x |sum_j f_j(x) - 1|`.
    pub sum_error: f64,
    /// Values outside `[0, 1]`.
    pub range_violations: usize,
    /// `sup_{E_j} f_j` for each `j`.
    pub sup_on_sets: Vec<f64>,
    pub norms: Vec<f64>,
    /// `lambda * max_j ‖f_j‖_*`.
    pub scaled_norm: f64,
    pub verdict: Verdict,
}

pub fn verify_construction(
    space: &MetricMeasureSpace,
    fields: &[ScalarField],
    sets: &[IndicatorSet],
    lambda: f64,
) -> Result<ConstructionReport> {
    if fields.len() != sets.len() {
        return Err(Error::Invalid(format!("{} fields for {} sets", fields.len(), sets.len())));
    }
    let n = space.len();
    let mut sum_error: f64 = 0.0;
    let mut range_violations = 0;
    for x in 0..n {
        let s: f64 = fields.iter().map(|f| f[x]).sum();
        sum_error = sum_error.max((s - 1.0).abs());
        range_violations += fields.iter().filter(|f| !(0.0..=1.0).contains(&f[x])).count();
    }
    let sup_on_sets: Vec<f64> = fields
        .iter()
        .zip(sets)
        .map(|(f, e)| e.ids().into_iter().map(|x| f[x]).fold(0.0, f64::max))
        .collect();
    let norms: Vec<f64> = fields.iter().map(|f| bmo_norm(space, f).value).collect();
    let scaled_norm = lambda * norms.iter().copied().fold(0.0, f64::max);

    let verdict = if sum_error > 1e-12 {
        Verdict::Fail(format!("fields sum to 1 only up to {sum_error}"))
    } else if range_violations > 0 {
        Verdict::Fail(format!("{range_violations} values outside [0, 1]"))
    } else if let Some(j) = sup_on_sets.iter().position(|&s| s != 0.0) {
        Verdict::Fail(format!("f_{j} does not vanish on its set"))
    } else {
        Verdict::Pass
    };
    Ok(ConstructionReport {
        sum_error,
        range_violations,
        sup_on_sets,
        norms,
        scaled_norm,
        verdict,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NecessityReport {
    /// `sup_B min_j mu(E_j ∩ B) / mu(B)`, from a loop independent of the
    /// density functional.
    pub density: f64,
    /// `sup_B mu(E_{j0} ∩ B) / mu(B)` for the index `j0` picked per ball.
    pub witnessed_density: f64,
    pub witness_ball: Option<Ball>,
    /// `-log_{c_d}(density) / 4`, compared against `lambda`.
    #[serde(serialize_with = "crate::io::real")]
    pub empirical_lambda: f64,
    /// Largest `mu(E_{j0} ∩ B) / mu(B)` divided by the John–Nirenberg
    /// bound `2 exp(-A_{j0} / (N ‖f_{j0}‖_*))`.
    #[serde(serialize_with = "crate::io::real")]
    pub worst_jn_ratio: f64,
    pub verdict: Verdict,
}

/// Replays the converse argument: on each ball some `f_{j0}` has average at
/// least `1/N`, so `E_{j0} ∩ B` sits inside the set where `f_{j0}` deviates
/// from its average by at least `1/N`, whose measure the John–Nirenberg
/// inequality controls.
pub fn necessity_check(
    space: &MetricMeasureSpace,
    fields: &[ScalarField],
    sets: &[IndicatorSet],
    lambda: f64,
    c2: f64,
    c_d: f64,
) -> Result<NecessityReport> {
    if fields.len() != sets.len() || sets.is_empty() {
        return Err(Error::Invalid(format!("{} fields for {} sets", fields.len(), sets.len())));
    }
    let n_sets = sets.len() as f64;
    let summaries: Vec<_> = fields.iter().map(|f| jn_summary(space, f)).collect();
    let max_norm = summaries.iter().map(|s| s.norm).fold(0.0, f64::max);

    let mut density: f64 = 0.0;
    let mut witnessed: f64 = 0.0;
    let mut witness_ball = None;
    let mut worst_jn: f64 = 0.0;
    let mut failure = None;

    for cb in space.canonical() {
        let mut min_ratio = f64::INFINITY;
        for e in sets {
            min_ratio = min_ratio.min(e.measure_in(space, cb.members) / cb.measure);
        }
        density = density.max(min_ratio);

        let averages: Vec<f64> = fields.iter().map(|f| average_over(space, f, cb.members)).collect();
        let j0 = (0..fields.len())
            .find(|&j| averages[j] >= 1.0 / n_sets)
            .unwrap_or_else(|| {
                // rounding can leave every average a hair below 1/N
                (0..fields.len())
                    .max_by(|&a, &b| averages[a].total_cmp(&averages[b]))
                    .expect("nonempty")
            });
        let threshold = averages[j0].min(1.0 / n_sets);
        let ratio = sets[j0].measure_in(space, cb.members) / cb.measure;
        let f = &fields[j0];
        let deviating: f64 = cb
            .members
            .iter()
            .filter(|&&y| (f[y] - averages[j0]).abs() >= threshold)
            .map(|&y| space.weight(y))
            .sum::<f64>()
            / cb.measure;
        if ratio > deviating && failure.is_none() {
            failure = Some(format!(
                "ball ({}, {}): mu(E_{j0} ∩ B)/mu(B) = {ratio} exceeds the deviation mass {deviating}",
                cb.ball.center, cb.ball.radius
            ));
        }
        if ratio > witnessed {
            witnessed = ratio;
            witness_ball = Some(cb.ball);
        }
        let s = &summaries[j0];
        if s.norm > 0.0 {
            let jn = 2.0 * (-s.constant / (n_sets * s.norm)).exp();
            worst_jn = worst_jn.max(ratio / jn);
        }
    }

    let verdict = if max_norm > c2 / lambda {
        Verdict::NotApplicable(format!("max norm {max_norm} exceeds c2 / lambda = {}", c2 / lambda))
    } else if let Some(why) = failure {
        Verdict::Fail(why)
    } else if worst_jn > 1.0 + 1e-12 {
        Verdict::Fail(format!("set density exceeds the John–Nirenberg bound by a factor {worst_jn}"))
    } else {
        Verdict::Pass
    };
    Ok(NecessityReport {
        density,
        witnessed_density: witnessed,
        witness_ball,
        empirical_lambda: lambda_max(density, c_d),
        worst_jn_ratio: worst_jn,
        verdict,
    })
}

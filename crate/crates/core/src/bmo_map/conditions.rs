//! Fitting condition (i) and checking condition (ii) on a trial family.

use serde::Serialize;

use super::TrialRecord;
use crate::error::{Error, Result};
use crate::space::MetricMeasureSpace;
use crate::verdict::Verdict;

/// `alpha = i / 20` for `i = 1..=20`.
pub fn alpha_grid() -> Vec<f64> {
    (1..=20).map(|i| i as f64 / 20.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionIFit {
    pub alphas: Vec<f64>,
    /// `K(alpha) = max y / x^alpha` over records with `x > 0`, infinite
    /// when some record has `x = 0 < y`.
    #[serde(serialize_with = "crate::io::reals")]
    pub k_values: Vec<f64>,
    /// The grid point minimizing `K / alpha`, ties going to larger `alpha`.
    pub alpha: f64,
    #[serde(serialize_with = "crate::io::real")]
    pub k: f64,
    #[serde(serialize_with = "crate::io::real")]
    pub product: f64,
    /// Record attaining `K` at the chosen `alpha`.
    pub witness: Option<usize>,
    /// Whether some record has `x = y = 1`, which forces `K >= 1`.
    pub forces_k_at_least_one: bool,
}

pub fn condition_i_fit(records: &[TrialRecord], alphas: &[f64]) -> Result<ConditionIFit> {
    if records.is_empty() {
        return Err(Error::Invalid("condition (i) needs at least one trial".into()));
    }
    if alphas.is_empty() || alphas.iter().any(|&a| !(a > 0.0 && a <= 1.0)) {
        return Err(Error::Invalid("exponents must lie in (0, 1]".into()));
    }
    let null_violation = records.iter().position(|r| r.x == 0.0 && r.y > 0.0);
    let fit_at = |alpha: f64| -> (f64, Option<usize>) {
        if let Some(i) = null_violation {
            return (f64::INFINITY, Some(i));
        }
        let mut best = (0.0, None);
        for (i, r) in records.iter().enumerate() {
            if r.x > 0.0 {
                let k = r.y / r.x.powf(alpha);
                if best.1.is_none() || k > best.0 {
                    best = (k, Some(i));
                }
            }
        }
        best
    };
    let fits: Vec<(f64, Option<usize>)> = alphas.iter().map(|&a| fit_at(a)).collect();

    let mut chosen = None;
    let mut best_product = f64::INFINITY;
    let mut order: Vec<usize> = (0..alphas.len()).collect();
    order.sort_by(|&a, &b| alphas[b].total_cmp(&alphas[a]));
    for i in order {
        let product = fits[i].0 / alphas[i];
        if chosen.is_none() || product < best_product {
            best_product = product;
            chosen = Some(i);
        }
    }
    let i = chosen.expect("grid is nonempty");
    Ok(ConditionIFit {
        alphas: alphas.to_vec(),
        k_values: fits.iter().map(|f| f.0).collect(),
        alpha: alphas[i],
        k: fits[i].0,
        product: best_product,
        witness: fits[i].1,
        forces_k_at_least_one: records.iter().any(|r| r.x == 1.0 && r.y == 1.0),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionIICheck {
    pub gamma: f64,
    pub lambda_thresh: f64,
    /// Records with `x < lambda_thresh`.
    pub triggered: usize,
    pub violations: usize,
    /// First record with `x < lambda_thresh` and `y >= gamma`.
    pub witness: Option<usize>,
    /// `1 / (4 c_D^3)`, the bound on `gamma` under which condition (ii)
    /// feeds the Strömberg-type lemma.
    pub stromberg_gamma_limit: f64,
    pub stromberg_compatible: bool,
    pub verdict: Verdict,
}

pub fn condition_ii_check(
    space: &MetricMeasureSpace,
    records: &[TrialRecord],
    gamma: f64,
    lambda_thresh: f64,
) -> Result<ConditionIICheck> {
    if !(gamma > 0.0 && gamma < 0.25) {
        return Err(Error::Invalid(format!("gamma must lie in (0, 1/4), got {gamma}")));
    }
    if !(lambda_thresh > 0.0) {
        return Err(Error::Invalid(format!("lambda must be positive, got {lambda_thresh}")));
    }
    let mut triggered = 0;
    let mut violations = 0;
    let mut witness = None;
    for (i, r) in records.iter().enumerate() {
        if r.x < lambda_thresh {
            triggered += 1;
            if r.y >= gamma {
                violations += 1;
                witness.get_or_insert(i);
            }
        }
    }
    let verdict = match witness {
        Some(i) => Verdict::Fail(format!(
            "pair {} has input density {} < {lambda_thresh} but preimage density {} >= {gamma}",
            records[i].label, records[i].x, records[i].y
        )),
        None if triggered == 0 => Verdict::NotApplicable(format!("no pair has input density below {lambda_thresh}")),
        None => Verdict::Pass,
    };
    let limit = 1.0 / (4.0 * space.doubling().c_d.powi(3));
    Ok(ConditionIICheck {
        gamma,
        lambda_thresh,
        triggered,
        violations,
        witness,
        stromberg_gamma_limit: limit,
        stromberg_compatible: gamma < limit,
        verdict,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImplicationLevel {
    pub lambda: f64,
    /// `K lambda^alpha`.
    pub gamma: f64,
    pub triggered: usize,
    pub counterexamples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImplicationCheck {
    #[serde(serialize_with = "crate::io::real")]
    pub k: f64,
    pub alpha: f64,
    pub levels: Vec<ImplicationLevel>,
    pub counterexamples: usize,
    pub verdict: Verdict,
}

/// Condition (i) at the fitted `(K, alpha)` gives condition (ii) with
/// `gamma = K lambda^alpha` whenever that is below 1/4. Checks this on the
/// same records for `gamma` in `{0.05, 0.1, 0.2, 0.24}`.
pub fn implication_check(records: &[TrialRecord], fit: &ConditionIFit) -> Result<ImplicationCheck> {
    if !(fit.k.is_finite() && fit.k > 0.0) {
        return Ok(ImplicationCheck {
            k: fit.k,
            alpha: fit.alpha,
            levels: Vec::new(),
            counterexamples: 0,
            verdict: Verdict::NotApplicable(format!("fitted K = {} is not positive and finite", fit.k)),
        });
    }
    let levels: Vec<ImplicationLevel> = [0.05, 0.1, 0.2, 0.24]
        .into_iter()
        .map(|gamma: f64| {
            let lambda = (gamma / fit.k).powf(1.0 / fit.alpha);
            let hit: Vec<&TrialRecord> = records.iter().filter(|r| r.x < lambda).collect();
            ImplicationLevel {
                lambda,
                gamma,
                triggered: hit.len(),
                counterexamples: hit.iter().filter(|r| r.y >= gamma).count(),
            }
        })
        .collect();
    let counterexamples = levels.iter().map(|l| l.counterexamples).sum();
    let verdict = if counterexamples > 0 {
        Verdict::Fail(format!("{counterexamples} pairs satisfy condition (i) but break condition (ii)"))
    } else {
        Verdict::Pass
    };
    Ok(ImplicationCheck {
        k: fit.k,
        alpha: fit.alpha,
        levels,
        counterexamples,
        verdict,
    })
}

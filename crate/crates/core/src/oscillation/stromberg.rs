//! The Strömberg-type functional: how much of a ball lies at least
//! `lambda` away from the best constant.

use rayon::prelude::*;
use serde::Serialize;

use super::bmo_norm;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::space::{Ball, MetricMeasureSpace};
use crate::verdict::Verdict;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrombergReport {
    pub lambda: f64,
    /// `sup_B inf_c mu({x in B : |f - c| >= lambda}) / mu(B)`.
    pub value: f64,
    pub ball: Ball,
    /// Optimal constant for each canonical ball, in canonical order.
    pub centers: Vec<f64>,
}

/// Computes the functional exactly.
///
/// `mu({|f - c| < lambda})` is the mass of the values inside the open
/// window `(c - lambda, c + lambda)`. A window of width `2 lambda` holds the
/// values `v_i <= ... <= v_j` exactly when `v_j - v_i < 2 lambda`, and then
/// `c = (v_i + v_j) / 2` realizes it, so a sliding window over the sorted
/// values finds the best `c`.
pub fn stromberg_functional(space: &MetricMeasureSpace, f: &ScalarField, lambda: f64) -> Result<StrombergReport> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Invalid(format!("lambda must be positive, got {lambda}")));
    }
    let per_center: Vec<Vec<(f64, Ball, f64)>> = (0..space.len())
        .into_par_iter()
        .map(|c| {
            space
                .canonical_at(c)
                .map(|cb| {
                    let (ratio, center) = best_center(space, f, cb.members, cb.measure, lambda);
                    (ratio, cb.ball, center)
                })
                .collect()
        })
        .collect();

    let mut value = f64::NEG_INFINITY;
    let mut ball = Ball::new(0, 0.0);
    let mut centers = Vec::with_capacity(space.canonical_count());
    for (ratio, b, c) in per_center.into_iter().flatten() {
        if ratio > value {
            value = ratio;
            ball = b;
        }
        centers.push(c);
    }
    Ok(StrombergReport {
        lambda,
        value,
        ball,
        centers,
    })
}

fn best_center(space: &MetricMeasureSpace, f: &ScalarField, members: &[usize], measure: f64, lambda: f64) -> (f64, f64) {
    let mut pts: Vec<(f64, f64)> = members.iter().map(|&y| (f[y], space.weight(y))).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best_mass = f64::NEG_INFINITY;
    let mut best_c = pts[0].0;
    let mut j = 0;
    let mut inside = 0.0;
    for i in 0..pts.len() {
        if j < i {
            j = i;
            inside = 0.0;
        }
        while j < pts.len() && pts[j].0 - pts[i].0 < 2.0 * lambda {
            inside += pts[j].1;
            j += 1;
        }
        if inside > best_mass {
            best_mass = inside;
            best_c = 0.5 * (pts[i].0 + pts[j - 1].0);
        }
        inside -= pts[i].1;
    }
    // evaluate the objective directly at the chosen constant
    let far: f64 = pts
        .iter()
        .filter(|p| (p.0 - best_c).abs() >= lambda)
        .map(|p| p.1)
        .sum();
    (far / measure, best_c)
}

/// `1 + 2 sum_{m >= 1} (m + 1) 2^(-m/2)`, summed until the terms vanish.
pub fn stromberg_constant() -> f64 {
    let x = 0.5f64.sqrt();
    let mut sum = 0.0;
    let mut term_pow = x;
    for m in 1..400 {
        sum += (m as f64 + 1.0) * term_pow;
        term_pow *= x;
    }
    1.0 + 2.0 * sum
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrombergBound {
    pub functional: f64,
    pub gamma: f64,
    pub gamma_limit: f64,
    pub norm: f64,
    pub bound: f64,
    pub verdict: Verdict,
}

/// If `stromberg_functional(f, lambda) <= gamma < 1 / (4 c_d^3)`, asserts
/// `‖f‖_* <= C lambda` with the constant from [`stromberg_constant`].
/// Otherwise nothing is asserted.
pub fn stromberg_bound(
    space: &MetricMeasureSpace,
    f: &ScalarField,
    lambda: f64,
    gamma: f64,
    c_d: f64,
) -> Result<StrombergBound> {
    let functional = stromberg_functional(space, f, lambda)?.value;
    let gamma_limit = 1.0 / (4.0 * c_d.powi(3));
    let norm = bmo_norm(space, f).value;
    let bound = stromberg_constant() * lambda;
    let verdict = if !(0.0..gamma_limit).contains(&gamma) {
        Verdict::NotApplicable(format!("gamma {gamma} is outside [0, {gamma_limit})"))
    } else if functional > gamma {
        Verdict::NotApplicable(format!("functional {functional} exceeds gamma {gamma}"))
    } else if crate::le_with_slack(norm, bound) {
        Verdict::Pass
    } else {
        Verdict::Fail(format!("norm {norm} exceeds {bound}"))
    };
    Ok(StrombergBound {
        functional,
        gamma,
        gamma_limit,
        norm,
        bound,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{build_space, Generator, SpaceSpec};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid8() -> MetricMeasureSpace {
        build_space(&SpaceSpec::new(Generator::Grid1d { len: 8, exponent: 0.0 })).unwrap()
    }

    #[test]
    fn constant_matches_geometric_series() {
        let x = 0.5f64.sqrt();
        let closed = 1.0 + 2.0 * ((1.0 - x).powi(-2) - 1.0);
        assert!((stromberg_constant() - closed).abs() < 1e-10);
        assert!((stromberg_constant() - 22.31).abs() < 0.01);
    }

    #[test]
    fn indicator_functional() {
        let s = grid8();
        let f = ScalarField::indicator(&s, &[0, 1, 2, 3]).unwrap();
        assert_eq!(stromberg_functional(&s, &f, 0.6).unwrap().value, 0.0);
        // below 1/2 at most one level fits in the window
        assert_eq!(stromberg_functional(&s, &f, 0.4).unwrap().value, 0.5);
        let b = stromberg_bound(&s, &f, 0.6, 0.0, s.doubling().c_d).unwrap();
        assert_eq!(b.verdict, Verdict::Pass);
        assert_eq!(b.norm, 0.5);
    }

    #[test]
    fn constant_field_passes() {
        let s = grid8();
        let c = ScalarField::constant(&s, 4.0);
        let b = stromberg_bound(&s, &c, 0.1, 0.0, 3.5).unwrap();
        assert_eq!(b.verdict, Verdict::Pass);
        assert_eq!(b.functional, 0.0);
    }

    #[test]
    fn large_gamma_is_not_applicable() {
        let s = grid8();
        let f = ScalarField::indicator(&s, &[0]).unwrap();
        let b = stromberg_bound(&s, &f, 0.6, 0.5, 3.5).unwrap();
        assert!(matches!(b.verdict, Verdict::NotApplicable(_)));
    }

    /// Scans many constants, including every value and value +- lambda.
    fn oracle(space: &MetricMeasureSpace, f: &ScalarField, lambda: f64) -> f64 {
        let mut sup: f64 = 0.0;
        for cb in space.canonical() {
            let mut cands = Vec::new();
            for &y in cb.members {
                for &z in cb.members {
                    cands.push(0.5 * (f[y] + f[z]));
                }
                cands.push(f[y]);
            }
            let inf = cands
                .iter()
                .map(|&c| {
                    cb.members
                        .iter()
                        .filter(|&&y| (f[y] - c).abs() >= lambda)
                        .map(|&y| space.weight(y))
                        .sum::<f64>()
                        / cb.measure
                })
                .fold(f64::INFINITY, f64::min);
            sup = sup.max(inf);
        }
        sup
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn matches_pairwise_oracle(seed in any::<u64>(), lambda in 0.05f64..2.0) {
            let s = build_space(&SpaceSpec::new(Generator::RandomTree { n: 10, seed })).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = ScalarField::from_fn(&s, |_| rng.gen_range(-2.0..2.0)).unwrap();
            let report = stromberg_functional(&s, &f, lambda).unwrap();
            prop_assert_eq!(report.value, oracle(&s, &f, lambda));
            prop_assert_eq!(report.centers.len(), s.canonical_count());
        }

        #[test]
        fn wide_windows_vanish(seed in any::<u64>()) {
            let s = build_space(&SpaceSpec::new(Generator::Grid1d { len: 9, exponent: 0.0 })).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = ScalarField::from_fn(&s, |_| rng.gen_range(0.0..1.0)).unwrap();
            let lambda = 0.5 * (f.max() - f.min()) * 1.0001 + 1e-9;
            prop_assert_eq!(stromberg_functional(&s, &f, lambda).unwrap().value, 0.0);
        }

        #[test]
        fn never_fires_falsely(seed in any::<u64>(), lambda in 0.05f64..3.0) {
            let s = build_space(&SpaceSpec::new(Generator::Grid1d { len: 12, exponent: 0.0 })).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = ScalarField::from_fn(&s, |_| rng.gen_range(-1.0..1.0)).unwrap();
            let c_d = s.doubling().c_d;
            let gamma = 0.99 / (4.0 * c_d.powi(3));
            let b = stromberg_bound(&s, &f, lambda, gamma, c_d).unwrap();
            prop_assert!(!b.verdict.is_fail(), "{:?}", b);
        }
    }
}

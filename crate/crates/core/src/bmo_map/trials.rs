//! Families of set pairs and their input and preimage densities.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{preimage, two_set_density, PointMap};
use crate::error::{Error, Result};
use crate::space::MetricMeasureSpace;
use crate::uchiyama::IndicatorSet;

/// Largest space on which [`exhaustive_records`] runs.
pub const EXHAUSTIVE_MAX: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct SetPair {
    pub label: String,
    pub e1: IndicatorSet,
    pub e2: IndicatorSet,
}

impl SetPair {
    fn new(label: impl Into<String>, e1: IndicatorSet, e2: IndicatorSet) -> Self {
        Self {
            label: label.into(),
            e1,
            e2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub label: String,
    pub e1: Vec<usize>,
    pub e2: Vec<usize>,
    /// Input density.
    pub x: f64,
    /// Preimage density.
    pub y: f64,
}

/// Fixed structured pairs followed by `trials` seeded random ones.
///
/// The structured part holds `(X, X)`, `(empty, X)`, the two halves by
/// distance from point 0 and, for every point `p`, the sublevel and
/// superlevel sets of `d(., p)` split at the median distance. Random pair
/// `i` draws from its own ChaCha stream `i`, so the family does not depend
/// on evaluation order. Random kinds cycle through independent subsets,
/// sparse subsets, pairs of balls, distance level sets and complementary
/// pairs.
pub fn sample_pairs(space: &MetricMeasureSpace, trials: usize, seed: u64) -> Vec<SetPair> {
    let n = space.len();
    let full = IndicatorSet::full(space);
    let mut out = vec![
        SetPair::new("whole", full.clone(), full.clone()),
        SetPair::new("empty-whole", IndicatorSet::empty(space), full),
    ];
    let half = from_ids(space, &space.by_distance(0)[..n / 2]);
    out.push(SetPair::new("halves", half.clone(), half.complement()));
    for p in 0..n {
        let order = space.by_distance(p);
        let cut = space.dist(p, order[n / 2]);
        let below = from_ids(space, &order[..n / 2]);
        let above = from_mask(space, (0..n).map(|y| space.dist(p, y) >= cut).collect());
        out.push(SetPair::new(format!("distance-split-{p}"), below, above));
    }

    out.extend((0..trials).map(|i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        random_pair(space, i, &mut rng)
    }));
    out
}

fn random_pair(space: &MetricMeasureSpace, i: usize, rng: &mut ChaCha8Rng) -> SetPair {
    let n = space.len();
    let subset = |rng: &mut ChaCha8Rng, p: f64| from_mask(space, (0..n).map(|_| rng.gen_bool(p)).collect());
    let ball = |rng: &mut ChaCha8Rng| {
        let c = rng.gen_range(0..n);
        let shells = space.shells(c);
        let k = shells[rng.gen_range(0..shells.len())].count;
        from_ids(space, &space.by_distance(c)[..k])
    };
    match i % 5 {
        0 => {
            let (p1, p2) = (rng.gen_range(0.05..0.95), rng.gen_range(0.05..0.95));
            SetPair::new(format!("random-{i}"), subset(rng, p1), subset(rng, p2))
        }
        1 => {
            let p = rng.gen_range(0.02..0.2);
            SetPair::new(format!("sparse-{i}"), subset(rng, p), subset(rng, p))
        }
        2 => SetPair::new(format!("balls-{i}"), ball(rng), ball(rng)),
        3 => {
            let p = rng.gen_range(0..n);
            let row = space.distance_row(p);
            let (s, t) = {
                let a = row[rng.gen_range(0..n)];
                let b = row[rng.gen_range(0..n)];
                (a.min(b), a.max(b))
            };
            let e1 = from_mask(space, row.iter().map(|&d| d <= s).collect());
            let e2 = from_mask(space, row.iter().map(|&d| d >= t).collect());
            SetPair::new(format!("levels-{i}"), e1, e2)
        }
        _ => {
            let p = rng.gen_range(0.05..0.95);
            let e = subset(rng, p);
            let c = e.complement();
            SetPair::new(format!("complement-{i}"), e, c)
        }
    }
}

fn from_ids(space: &MetricMeasureSpace, ids: &[usize]) -> IndicatorSet {
    IndicatorSet::new(space, ids).expect("ids come from the space")
}

fn from_mask(space: &MetricMeasureSpace, mask: Vec<bool>) -> IndicatorSet {
    IndicatorSet::from_mask(space, mask).expect("mask has one entry per point")
}

/// Input and preimage densities for every pair, in order.
pub fn evaluate_pairs(space: &MetricMeasureSpace, map: &PointMap, pairs: &[SetPair]) -> Vec<TrialRecord> {
    pairs
        .par_iter()
        .map(|p| TrialRecord {
            label: p.label.clone(),
            e1: p.e1.ids(),
            e2: p.e2.ids(),
            x: two_set_density(space, &p.e1, &p.e2),
            y: two_set_density(space, &preimage(map, &p.e1), &preimage(map, &p.e2)),
        })
        .collect()
}

/// Every unordered pair of subsets, reduced to the distinct `(x, y)`
/// values. Each value keeps the lexicographically first pair realizing it.
///
/// Measures of intersections with balls come from a table of subset sums,
/// so on spaces with non-integer weights the last bit may differ from
/// [`two_set_density`].
pub fn exhaustive_records(space: &MetricMeasureSpace, map: &PointMap) -> Result<Vec<TrialRecord>> {
    let n = space.len();
    if n > EXHAUSTIVE_MAX {
        return Err(Error::Invalid(format!(
            "exhaustive mode needs at most {EXHAUSTIVE_MAX} points, the space has {n}"
        )));
    }
    let subsets = 1usize << n;
    let measure: Vec<f64> = (0..subsets)
        .map(|m| (0..n).filter(|&i| m >> i & 1 == 1).map(|i| space.weight(i)).sum())
        .collect();
    let pulled: Vec<usize> = (0..subsets)
        .map(|m| (0..n).filter(|&i| m >> map.apply(i) & 1 == 1).fold(0, |acc, i| acc | 1 << i))
        .collect();
    let balls: Vec<(usize, f64)> = space
        .canonical()
        .map(|cb| (cb.members.iter().fold(0, |acc, &y| acc | 1 << y), cb.measure))
        .collect();
    let density = |a: usize, b: usize| {
        balls
            .iter()
            .map(|&(m, mu)| measure[a & m].min(measure[b & m]) / mu)
            .fold(f64::NEG_INFINITY, f64::max)
    };

    let per_first: Vec<BTreeMap<(u64, u64), (usize, usize)>> = (0..subsets)
        .into_par_iter()
        .map(|a| {
            let mut seen = BTreeMap::new();
            for b in a..subsets {
                let x = density(a, b);
                let y = density(pulled[a], pulled[b]);
                seen.entry((x.to_bits(), y.to_bits())).or_insert((a, b));
            }
            seen
        })
        .collect();
    let mut merged: BTreeMap<(u64, u64), (usize, usize)> = BTreeMap::new();
    for m in per_first {
        for (k, v) in m {
            merged.entry(k).or_insert(v);
        }
    }
    let mut out: Vec<TrialRecord> = merged
        .into_iter()
        .map(|((x, y), (a, b))| TrialRecord {
            label: "exhaustive".into(),
            e1: (0..n).filter(|&i| a >> i & 1 == 1).collect(),
            e2: (0..n).filter(|&i| b >> i & 1 == 1).collect(),
            x: f64::from_bits(x),
            y: f64::from_bits(y),
        })
        .collect();
    out.sort_by(|p, q| p.x.total_cmp(&q.x).then(p.y.total_cmp(&q.y)));
    Ok(out)
}

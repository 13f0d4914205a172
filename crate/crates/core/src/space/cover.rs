//! Nets, multi-scale ball families, Vitali selection and adapted bumps.

use serde::Serialize;

use super::{Ball, MetricMeasureSpace};
use crate::error::{Error, Result};
use crate::field::ScalarField;

/// Greedy maximal `r/2`-separated set, scanning points in ascending id.
///
/// A point is kept iff it is at distance at least `r/2` from every point
/// kept so far, so every rejected point lies within `r/2` of a kept one.
pub fn maximal_net(space: &MetricMeasureSpace, r: f64) -> Vec<usize> {
    assert!(r > 0.0, "net radius must be positive, got {r}");
    let sep = 0.5 * r;
    let mut kept: Vec<usize> = Vec::new();
    for x in 0..space.len() {
        if kept.iter().all(|&k| space.dist(x, k) >= sep) {
            kept.push(x);
        }
    }
    kept
}

/// The balls `B(x, r_k)` over a maximal net at scale `r_k = 2^(-kq)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BallFamily {
    pub level: i32,
    pub step: u32,
    pub radius: f64,
    pub balls: Vec<Ball>,
}

impl BallFamily {
    pub fn centers(&self) -> impl Iterator<Item = usize> + '_ {
        self.balls.iter().map(|b| b.center)
    }

    /// The first ball containing every point, if any.
    pub fn root(&self, space: &MetricMeasureSpace) -> Option<Ball> {
        self.balls
            .iter()
            .copied()
            .find(|b| space.ball_count(b) == space.len())
    }
}

pub fn ball_family(space: &MetricMeasureSpace, k: i32, q: u32) -> Result<BallFamily> {
    if q == 0 {
        return Err(Error::Invalid("ball family step q must be at least 1".into()));
    }
    let radius = (-(k as f64) * q as f64).exp2();
    let balls: Vec<Ball> = maximal_net(space, radius)
        .into_iter()
        .map(|c| Ball::new(c, radius))
        .collect();
    let mut covered = vec![false; space.len()];
    for b in &balls {
        for &y in space.ball_slice(b) {
            covered[y] = true;
        }
    }
    if let Some(y) = covered.iter().position(|c| !c) {
        return Err(Error::Assertion(format!(
            "level {k} family misses point {y}; the net is not maximal"
        )));
    }
    Ok(BallFamily {
        level: k,
        step: q,
        radius,
        balls,
    })
}

/// Greedy disjoint subfamily: balls are visited by descending radius, ties
/// by ascending center, and kept iff their member set misses every kept
/// ball. Returns indices into `balls`, in visiting order.
pub fn vitali_disjoint(space: &MetricMeasureSpace, balls: &[Ball]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..balls.len()).collect();
    order.sort_by(|&a, &b| {
        balls[b]
            .radius
            .total_cmp(&balls[a].radius)
            .then(balls[a].center.cmp(&balls[b].center))
            .then(a.cmp(&b))
    });
    let mut taken = vec![false; space.len()];
    let mut kept = Vec::new();
    for i in order {
        let members = space.ball_slice(&balls[i]);
        if members.iter().all(|&y| !taken[y]) {
            for &y in members {
                taken[y] = true;
            }
            kept.push(i);
        }
    }
    kept
}

/// Whether every ball's member set lies inside the 5-dilate of some kept
/// ball. Returns the index of the first uncovered ball on failure.
pub fn vitali_covers(space: &MetricMeasureSpace, balls: &[Ball], kept: &[usize]) -> std::result::Result<(), usize> {
    for (i, b) in balls.iter().enumerate() {
        let members = space.ball_slice(b);
        let inside = kept.iter().any(|&k| {
            let big = balls[k].dilate(5.0);
            members.iter().all(|&y| space.contains(&big, y))
        });
        if !inside {
            return Err(i);
        }
    }
    Ok(())
}

/// `clamp(2 - d(center, y) / radius, 0, 1)`: 1 on the ball, 0 off its
/// 2-dilate and `1/radius`-Lipschitz.
pub fn adapted_bump(space: &MetricMeasureSpace, ball: &Ball) -> ScalarField {
    assert!(ball.radius > 0.0, "bump radius must be positive");
    let row = space.distance_row(ball.center);
    ScalarField::from_fn(space, |y| (2.0 - row[y] / ball.radius).clamp(0.0, 1.0))
        .expect("ramp values are finite")
}

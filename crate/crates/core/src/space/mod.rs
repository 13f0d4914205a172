//! Finite metric measure spaces and their balls.
//!
//! A space is immutable once built. At construction every center gets its
//! points sorted by distance and grouped into *shells*: shell `i` of center
//! `x` is the set of points at distance at most the `i`-th smallest distinct
//! distance from `x`. Open balls `B(x, r) = {y : d(x, y) < r}` are exactly
//! these prefixes, so every distinct ball is a (center, shell) pair.

mod cover;
mod doubling;
mod generate;

use std::sync::OnceLock;

use serde::Serialize;

use crate::error::{Error, Result};

pub use cover::{adapted_bump, ball_family, maximal_net, vitali_covers, vitali_disjoint, BallFamily};
pub use doubling::{lower_mass_check, DoublingConstants, LowerMassReport, LowerMassWitness};
pub use generate::{build_space, Generator, SpaceSpec};

/// Relative tolerance for the triangle inequality on floating-point input.
const TRIANGLE_SLACK: f64 = 1e-12;

/// An open ball `B(center, radius)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ball {
    pub center: usize,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: usize, radius: f64) -> Self {
        Self { center, radius }
    }

    /// Same center, radius scaled by `factor`.
    pub fn dilate(&self, factor: f64) -> Self {
        Self {
            center: self.center,
            radius: self.radius * factor,
        }
    }
}

/// Shell `i` of a center: all points within the `i`-th distinct distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shell {
    /// Number of points in the shell.
    pub count: usize,
    /// Largest distance included.
    pub inner: f64,
    /// Next larger distinct distance, `INFINITY` for the last shell.
    pub outer: f64,
    /// Measure of the shell.
    pub measure: f64,
}

impl Shell {
    /// Any radius in `(inner, outer]` realizes this shell; this is the
    /// midpoint, or a radius past the farthest point for the last shell.
    pub fn canonical_radius(&self) -> f64 {
        if self.outer.is_finite() {
            0.5 * (self.inner + self.outer)
        } else if self.inner > 0.0 {
            2.0 * self.inner
        } else {
            1.0
        }
    }
}

/// A canonical ball together with its members (in distance order).
#[derive(Debug, Clone, Copy)]
pub struct CanonicalBall<'a> {
    pub ball: Ball,
    pub members: &'a [usize],
    pub measure: f64,
}

/// Members of a ball, sorted by point id, and their total measure.
#[derive(Debug, Clone, PartialEq)]
pub struct BallMembers {
    pub ids: Vec<usize>,
    pub measure: f64,
}

#[derive(Debug, Clone)]
pub struct MetricMeasureSpace {
    label: String,
    n: usize,
    dist: Vec<f64>,
    weight: Vec<f64>,
    total: f64,
    by_distance: Vec<Vec<usize>>,
    shells: Vec<Vec<Shell>>,
    doubling: OnceLock<DoublingConstants>,
}

impl MetricMeasureSpace {
    /// Builds a space from a full row-major `n x n` distance matrix.
    pub fn from_matrix(label: impl Into<String>, dist: Vec<f64>, weight: Vec<f64>) -> Result<Self> {
        let n = weight.len();
        if n == 0 {
            return Err(Error::Invalid("a space needs at least one point".into()));
        }
        if dist.len() != n * n {
            return Err(Error::Distance(format!(
                "expected {} matrix entries for {n} points, got {}",
                n * n,
                dist.len()
            )));
        }
        for (index, &value) in weight.iter().enumerate() {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Weight { index, value });
            }
        }
        for i in 0..n {
            if dist[i * n + i] != 0.0 {
                return Err(Error::Distance(format!("d({i},{i}) = {} is not zero", dist[i * n + i])));
            }
            for j in 0..i {
                let (a, b) = (dist[i * n + j], dist[j * n + i]);
                if !a.is_finite() || a <= 0.0 {
                    return Err(Error::Distance(format!("d({i},{j}) = {a} must be positive and finite")));
                }
                if a != b {
                    return Err(Error::Distance(format!("d({i},{j}) = {a} differs from d({j},{i}) = {b}")));
                }
            }
        }
        check_triangle(n, &dist)?;
        Ok(Self::assemble(label.into(), n, dist, weight))
    }

    /// Builds a space from the strict lower triangle in row-major order:
    /// `d(1,0), d(2,0), d(2,1), d(3,0), ...`.
    pub fn from_lower_triangle(label: impl Into<String>, lower: &[f64], weight: Vec<f64>) -> Result<Self> {
        let n = weight.len();
        let expected = n * n.saturating_sub(1) / 2;
        if lower.len() != expected {
            return Err(Error::Distance(format!(
                "expected {expected} lower-triangle entries for {n} points, got {}",
                lower.len()
            )));
        }
        let mut dist = vec![0.0; n * n];
        let mut it = lower.iter();
        for i in 1..n {
            for j in 0..i {
                let d = *it.next().expect("length checked above");
                dist[i * n + j] = d;
                dist[j * n + i] = d;
            }
        }
        Self::from_matrix(label, dist, weight)
    }

    fn assemble(label: String, n: usize, dist: Vec<f64>, weight: Vec<f64>) -> Self {
        let mut by_distance = Vec::with_capacity(n);
        let mut shells = Vec::with_capacity(n);
        for x in 0..n {
            let row = &dist[x * n..(x + 1) * n];
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));

            let mut own = Vec::new();
            let mut measure = 0.0;
            let mut k = 0;
            while k < n {
                let d = row[order[k]];
                while k < n && row[order[k]] == d {
                    measure += weight[order[k]];
                    k += 1;
                }
                let outer = if k < n { row[order[k]] } else { f64::INFINITY };
                own.push(Shell {
                    count: k,
                    inner: d,
                    outer,
                    measure,
                });
            }
            by_distance.push(order);
            shells.push(own);
        }
        let total = weight.iter().sum();
        Self {
            label,
            n,
            dist,
            weight,
            total,
            by_distance,
            shells,
            doubling: OnceLock::new(),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.n + j]
    }

    pub fn distance_row(&self, i: usize) -> &[f64] {
        &self.dist[i * self.n..(i + 1) * self.n]
    }

    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        self.weight[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weight
    }

    pub fn total_measure(&self) -> f64 {
        self.total
    }

    pub fn diameter(&self) -> f64 {
        self.dist.iter().copied().fold(0.0, f64::max)
    }

    /// Smallest distance between distinct points, `INFINITY` for one point.
    pub fn min_distance(&self) -> f64 {
        (0..self.n)
            .filter_map(|x| self.shells[x].get(1).map(|s| s.inner))
            .fold(f64::INFINITY, f64::min)
    }

    /// Points ordered by distance from `center` (ties by id).
    pub fn by_distance(&self, center: usize) -> &[usize] {
        &self.by_distance[center]
    }

    pub fn shells(&self, center: usize) -> &[Shell] {
        &self.shells[center]
    }

    /// Number of points of the open ball, which are the first entries of
    /// [`by_distance`](Self::by_distance).
    pub fn ball_count(&self, ball: &Ball) -> usize {
        let row = self.distance_row(ball.center);
        self.by_distance[ball.center].partition_point(|&y| row[y] < ball.radius)
    }

    /// Members of the open ball in distance order.
    pub fn ball_slice(&self, ball: &Ball) -> &[usize] {
        &self.by_distance[ball.center][..self.ball_count(ball)]
    }

    pub fn ball_measure(&self, ball: &Ball) -> f64 {
        self.count_measure(ball.center, self.ball_count(ball))
    }

    /// Measure of the first `count` points around `center`.
    pub(crate) fn count_measure(&self, center: usize, count: usize) -> f64 {
        if count == 0 {
            return 0.0;
        }
        let shells = &self.shells[center];
        let idx = shells.partition_point(|s| s.count < count);
        debug_assert_eq!(shells[idx].count, count, "prefix must end on a shell boundary");
        shells[idx].measure
    }

    /// Measure of `B(center, radius)`.
    pub(crate) fn measure_within(&self, center: usize, radius: f64) -> f64 {
        let shells = &self.shells[center];
        let idx = shells.partition_point(|s| s.inner < radius);
        if idx == 0 {
            0.0
        } else {
            shells[idx - 1].measure
        }
    }

    pub fn ball_members(&self, ball: &Ball) -> BallMembers {
        let mut ids = self.ball_slice(ball).to_vec();
        ids.sort_unstable();
        BallMembers {
            ids,
            measure: self.ball_measure(ball),
        }
    }

    pub fn contains(&self, ball: &Ball, y: usize) -> bool {
        self.dist(ball.center, y) < ball.radius
    }

    /// Every distinct ball once per center, sorted by center then radius.
    pub fn canonical(&self) -> impl Iterator<Item = CanonicalBall<'_>> + '_ {
        (0..self.n).flat_map(move |c| self.canonical_at(c))
    }

    pub fn canonical_at(&self, center: usize) -> impl Iterator<Item = CanonicalBall<'_>> + '_ {
        self.shells[center].iter().map(move |s| CanonicalBall {
            ball: Ball::new(center, s.canonical_radius()),
            members: &self.by_distance[center][..s.count],
            measure: s.measure,
        })
    }

    pub fn enumerate_balls(&self) -> Vec<Ball> {
        self.canonical().map(|c| c.ball).collect()
    }

    pub fn canonical_count(&self) -> usize {
        self.shells.iter().map(Vec::len).sum()
    }

    /// `(c_mu, c_D)`, computed on first use and cached.
    pub fn doubling(&self) -> DoublingConstants {
        *self.doubling.get_or_init(|| doubling::compute(self))
    }

    /// Copy with all distances scaled so the diameter is 1/2.
    pub fn normalized(&self) -> Self {
        let diameter = self.diameter();
        if diameter == 0.0 {
            return self.clone();
        }
        self.scaled(0.5 / diameter)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let dist = self.dist.iter().map(|d| d * factor).collect();
        Self::assemble(self.label.clone(), self.n, dist, self.weight.clone())
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Strict lower triangle in row-major order, the inverse of
    /// [`from_lower_triangle`](Self::from_lower_triangle).
    pub fn lower_triangle(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n * self.n.saturating_sub(1) / 2);
        for i in 1..self.n {
            for j in 0..i {
                out.push(self.dist(i, j));
            }
        }
        out
    }
}

fn check_triangle(n: usize, dist: &[f64]) -> Result<()> {
    for i in 0..n {
        for j in 0..n {
            let dij = dist[i * n + j];
            for k in 0..n {
                let direct = dist[i * n + k];
                let detour = dij + dist[j * n + k];
                if direct > detour * (1.0 + TRIANGLE_SLACK) {
                    return Err(Error::Triangle {
                        i,
                        j,
                        k,
                        direct,
                        detour,
                    });
                }
            }
        }
    }
    Ok(())
}

//! The multi-scale construction and its per-level invariants.

use serde::Serialize;

use super::{density_functional, g_members, q_admissible, trivial_construction, IndicatorSet};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::space::{adapted_bump, ball_family, Ball, MetricMeasureSpace};

/// Absolute tolerance for the pointwise invariants.
const TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstructionParams {
    pub lambda: f64,
    pub q: u32,
    /// Base of the density exponents. May differ from the space's true
    /// off-center constant; the Lipschitz invariant is only checked when
    /// it does not undercut it.
    pub c_d: f64,
    /// Number of levels after level 0. `None` picks the smallest depth at
    /// which every ball `4B` is a singleton, plus `ceil(lambda / q)` levels
    /// to drain the remaining mass off each set.
    pub depth: Option<u32>,
    /// Below this `lambda` the closed-form trivial partition is returned.
    pub trivial_below: f64,
}

impl ConstructionParams {
    pub fn new(lambda: f64, q: u32, c_d: f64) -> Self {
        Self {
            lambda,
            q,
            c_d,
            depth: None,
            trivial_below: 1.5,
        }
    }

    /// Uses the space's own `c_D` and the smallest admissible `q`.
    pub fn for_space(space: &MetricMeasureSpace, n_sets: usize, lambda: f64) -> Result<Self> {
        let c_d = space.doubling().c_d;
        Ok(Self::new(lambda, super::choose_q(c_d, n_sets)?, c_d))
    }

    pub fn with_depth(mut self, depth: u32) -> Self {
        self.depth = Some(depth);
        self
    }

    pub fn with_trivial_below(mut self, threshold: f64) -> Self {
        self.trivial_below = threshold;
        self
    }

    pub(crate) fn radius(&self, level: u32) -> f64 {
        (-(level as f64) * self.q as f64).exp2()
    }

    pub fn resolve_depth(&self, space: &MetricMeasureSpace) -> Result<u32> {
        let min_dist = space.min_distance();
        match self.depth {
            Some(d) => {
                if self.radius(d) >= min_dist {
                    Err(Error::Invalid(format!(
                        "depth {d} has radius {} which is not below the minimum distance {min_dist}",
                        self.radius(d)
                    )))
                } else {
                    Ok(d)
                }
            }
            None => {
                let mut h = 1;
                while 4.0 * self.radius(h) >= min_dist {
                    h += 1;
                }
                Ok(h + (self.lambda / self.q as f64).ceil() as u32)
            }
        }
    }

    fn validate(&self, n_sets: usize) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Invalid(format!("lambda must be positive, got {}", self.lambda)));
        }
        if self.q == 0 {
            return Err(Error::Invalid("q must be at least 1".into()));
        }
        if !(self.c_d > 1.0 && self.c_d.is_finite()) {
            return Err(Error::Invalid(format!("c_d must exceed 1, got {}", self.c_d)));
        }
        if n_sets < 2 {
            return Err(Error::Invalid("need at least two sets".into()));
        }
        Ok(())
    }
}

/// Invariant measurements for one level. Counts are numbers of violating
/// (point, function) or (ball, point, function) triples.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LevelChecks {
    /// `max_x |sum_j f_j(x) - lambda|`.
    pub sum_error: f64,
    /// Values outside `[0, lambda]`.
    pub range_violations: usize,
    /// Points of a level ball `B` with `f_j > g_j(B)`.
    pub g_bound_violations: usize,
    /// Largest `f_j(x) - g_j(B)` over level balls containing `x`.
    pub g_bound_excess: f64,
    /// Points where `f_j` fell by more than `c_d^3 q`.
    pub drop_violations: usize,
    /// Points outside every `2B`, `B in A_j`, where `f_j` decreased.
    pub monotone_violations: usize,
    /// `max_x |sum_j w_j(x) - sum_j (f_j,prev(x) - v_j(x))|`.
    pub mass_error: f64,
    /// Pairs breaking `|f(x) - f(y)| <= 2^((k+1)q) d(x,y)`; `None` when the
    /// parameters do not license the bound.
    pub lipschitz_violations: Option<usize>,
}

impl LevelChecks {
    pub fn first_failure(&self) -> Option<(&'static str, String)> {
        if !(self.sum_error <= TOL) {
            return Some(("sum", format!("sum error {}", self.sum_error)));
        }
        if self.range_violations > 0 {
            return Some(("range", format!("{} values outside [0, lambda]", self.range_violations)));
        }
        if self.g_bound_violations > 0 {
            return Some((
                "g-bound",
                format!("{} points exceed g_j(B), worst by {}", self.g_bound_violations, self.g_bound_excess),
            ));
        }
        if self.drop_violations > 0 {
            return Some(("drop", format!("{} points dropped by more than c_d^3 q", self.drop_violations)));
        }
        if self.monotone_violations > 0 {
            return Some(("monotone", format!("{} points decreased outside the removal balls", self.monotone_violations)));
        }
        if !(self.mass_error <= TOL) {
            return Some(("mass", format!("redistribution error {}", self.mass_error)));
        }
        if let Some(v) = self.lipschitz_violations.filter(|&v| v > 0) {
            return Some(("lipschitz", format!("{v} pairs break the Lipschitz bound")));
        }
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelRecord {
    pub level: u32,
    pub radius: f64,
    /// `f_{j,k}` before normalization by `lambda`.
    pub fields: Vec<Vec<f64>>,
    /// Centers of the balls in `A_{j,k}`, in processing order.
    pub removal: Vec<Vec<usize>>,
    /// `(center, s(B))` for every ball of the level that received an
    /// assignment.
    pub assignment: Vec<(usize, usize)>,
    pub checks: LevelChecks,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstructionTrace {
    pub params: ConstructionParams,
    pub depth: u32,
    pub trivial: bool,
    pub levels: Vec<LevelRecord>,
    /// Final fields `f_j = f_{j,depth} / lambda`.
    #[serde(skip)]
    pub fields: Vec<ScalarField>,
    /// Points of `E_j` where the final `f_j` is not exactly zero.
    pub nonzero_on_sets: usize,
}

impl ConstructionTrace {
    /// First level invariant that failed, as `(name, level, detail)`.
    pub fn first_failure(&self) -> Option<(&'static str, u32, String)> {
        self.levels
            .iter()
            .find_map(|l| l.checks.first_failure().map(|(name, detail)| (name, l.level, detail)))
    }
}

/// `min{j : g_j >= threshold}`, with the same relative slack as the
/// density hypothesis so that boundary cases agree.
fn first_index_at_least(g: &[f64], threshold: f64) -> Option<usize> {
    g.iter().position(|&v| crate::le_with_slack(threshold, v))
}

/// Runs the construction and records every invariant, without failing on
/// violations or checking the density hypothesis.
pub fn construct_unchecked(
    space: &MetricMeasureSpace,
    sets: &[IndicatorSet],
    params: &ConstructionParams,
) -> Result<ConstructionTrace> {
    params.validate(sets.len())?;
    let lambda = params.lambda;
    let n = space.len();

    if lambda < params.trivial_below {
        let fields = trivial_construction(space, sets)?;
        return Ok(ConstructionTrace {
            params: params.clone(),
            depth: 0,
            trivial: true,
            levels: Vec::new(),
            nonzero_on_sets: count_nonzero_on_sets(sets, &fields),
            fields,
        });
    }

    let depth = params.resolve_depth(space)?;
    let root_family = ball_family(space, 0, params.q)?;
    let root = root_family.root(space).ok_or_else(|| {
        Error::Invalid("no level-0 ball contains the whole space; normalize the space first".into())
    })?;
    let lipschitz = q_admissible(params.c_d, sets.len(), params.q) && params.c_d >= space.doubling().c_d;

    // level 0
    let all: Vec<usize> = space.ball_slice(&root.dilate(4.0)).to_vec();
    let g_root: Vec<f64> = sets
        .iter()
        .map(|e| g_members(space, e, &all, space.ball_measure(&root.dilate(4.0)), params.c_d))
        .collect();
    let s0 = first_index_at_least(&g_root, 4.0 * lambda)
        .ok_or_else(|| Error::Assertion(format!("no set has g_j(4 B_0) >= {}", 4.0 * lambda)))?;
    let mut fields: Vec<Vec<f64>> = (0..sets.len())
        .map(|j| vec![if j == s0 { lambda } else { 0.0 }; n])
        .collect();
    let mut levels = Vec::with_capacity(depth as usize + 1);
    let mut checks0 = LevelChecks::default();
    measure_state(space, sets, params, &root_family.balls, &fields, &mut checks0);
    if lipschitz {
        checks0.lipschitz_violations = Some(0);
    }
    levels.push(LevelRecord {
        level: 0,
        radius: root_family.radius,
        fields: fields.clone(),
        removal: vec![Vec::new(); sets.len()],
        assignment: vec![(root.center, s0)],
        checks: checks0,
    });

    for k in 1..=depth {
        let family = ball_family(space, k as i32, params.q)?;
        let balls = &family.balls;
        // g_j(B) and s(B) for each ball of the level
        let g: Vec<Vec<f64>> = balls
            .iter()
            .map(|b| {
                let members = space.ball_slice(b);
                let m = space.ball_measure(b);
                sets.iter().map(|e| g_members(space, e, members, m, params.c_d)).collect()
            })
            .collect();
        let s_of = |i: usize| -> Result<usize> {
            let big = balls[i].dilate(4.0);
            let members = space.ball_slice(&big);
            let m = space.ball_measure(&big);
            let g4: Vec<f64> = sets.iter().map(|e| g_members(space, e, members, m, params.c_d)).collect();
            first_index_at_least(&g4, 4.0 * lambda).ok_or_else(|| {
                Error::Assertion(format!(
                    "s(B) undefined for B({}, {}) at level {k}: no set has g_j(4B) >= {}",
                    balls[i].center,
                    balls[i].radius,
                    4.0 * lambda
                ))
            })
        };

        let bumps: Vec<ScalarField> = balls.iter().map(|b| adapted_bump(space, b)).collect();
        let q = params.q as f64;
        let mut reduced = fields.clone();
        let mut w = vec![vec![0.0; n]; sets.len()];
        let mut removal = vec![Vec::new(); sets.len()];
        let mut assigned: Vec<Option<usize>> = vec![None; balls.len()];

        for j in 0..sets.len() {
            let prev = &fields[j];
            let chosen: Vec<usize> = (0..balls.len())
                .filter(|&i| {
                    let sup = space.ball_slice(&balls[i]).iter().map(|&x| prev[x]).fold(f64::NEG_INFINITY, f64::max);
                    sup > g[i][j]
                })
                .collect();
            for &i in &chosen {
                let s = match assigned[i] {
                    Some(s) => s,
                    None => {
                        let s = s_of(i)?;
                        assigned[i] = Some(s);
                        s
                    }
                };
                let rem = &mut reduced[j];
                for x in 0..n {
                    let a = (q * bumps[i][x]).min(rem[x]);
                    rem[x] -= a;
                    w[s][x] += a;
                }
                removal[j].push(balls[i].center);
            }
        }

        let next: Vec<Vec<f64>> = (0..sets.len())
            .map(|j| (0..n).map(|x| reduced[j][x] + w[j][x]).collect())
            .collect();

        let mut checks = LevelChecks::default();
        measure_state(space, sets, params, balls, &next, &mut checks);
        let drop = params.c_d.powi(3) * q;
        for j in 0..sets.len() {
            let near: Vec<bool> = (0..n)
                .map(|x| {
                    removal[j]
                        .iter()
                        .any(|&c| space.dist(c, x) < 2.0 * family.radius)
                })
                .collect();
            for x in 0..n {
                if next[j][x] < fields[j][x] - drop - TOL {
                    checks.drop_violations += 1;
                }
                if !near[x] && next[j][x] < fields[j][x] - TOL {
                    checks.monotone_violations += 1;
                }
            }
        }
        for x in 0..n {
            let moved: f64 = (0..sets.len()).map(|j| fields[j][x] - reduced[j][x]).sum();
            let added: f64 = (0..sets.len()).map(|j| w[j][x]).sum();
            checks.mass_error = checks.mass_error.max((moved - added).abs());
        }
        if lipschitz {
            let slope = ((k + 1) as f64 * q).exp2();
            let mut bad = 0;
            for f in &next {
                for x in 0..n {
                    for y in 0..x {
                        if (f[x] - f[y]).abs() > slope * space.dist(x, y) * (1.0 + 1e-12) + TOL {
                            bad += 1;
                        }
                    }
                }
            }
            checks.lipschitz_violations = Some(bad);
        }

        let assignment = assigned
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.map(|s| (balls[i].center, s)))
            .collect();
        levels.push(LevelRecord {
            level: k,
            radius: family.radius,
            fields: next.clone(),
            removal,
            assignment,
            checks,
        });
        fields = next;
    }

    let out: Vec<ScalarField> = fields
        .into_iter()
        .map(|f| ScalarField::from_values_unchecked(f.into_iter().map(|v| v / lambda).collect()))
        .collect();
    Ok(ConstructionTrace {
        params: params.clone(),
        depth,
        trivial: false,
        levels,
        nonzero_on_sets: count_nonzero_on_sets(sets, &out),
        fields: out,
    })
}

/// Sum, range and g-bound measurements shared by every level.
fn measure_state(
    space: &MetricMeasureSpace,
    sets: &[IndicatorSet],
    params: &ConstructionParams,
    balls: &[Ball],
    fields: &[Vec<f64>],
    checks: &mut LevelChecks,
) {
    let lambda = params.lambda;
    for x in 0..space.len() {
        let sum: f64 = fields.iter().map(|f| f[x]).sum();
        checks.sum_error = checks.sum_error.max((sum - lambda).abs());
        for f in fields {
            if f[x] < 0.0 || f[x] > lambda + TOL {
                checks.range_violations += 1;
            }
        }
    }
    for b in balls {
        let members = space.ball_slice(b);
        let m = space.ball_measure(b);
        for (j, e) in sets.iter().enumerate() {
            let g = g_members(space, e, members, m, params.c_d);
            for &x in members {
                let excess = fields[j][x] - g;
                if excess > TOL {
                    checks.g_bound_violations += 1;
                    checks.g_bound_excess = checks.g_bound_excess.max(excess);
                }
            }
        }
    }
}

fn count_nonzero_on_sets(sets: &[IndicatorSet], fields: &[ScalarField]) -> usize {
    sets.iter()
        .zip(fields)
        .map(|(e, f)| e.ids().into_iter().filter(|&x| f[x] != 0.0).count())
        .sum()
}

/// Checks the density hypothesis, runs the construction and fails on the
/// first violated invariant.
pub fn uchiyama_construct(
    space: &MetricMeasureSpace,
    sets: &[IndicatorSet],
    params: &ConstructionParams,
) -> Result<ConstructionTrace> {
    params.validate(sets.len())?;
    let density = density_functional(space, sets, params.c_d)?;
    let threshold = params.c_d.powf(-4.0 * params.lambda);
    if !crate::le_with_slack(density.value, threshold) {
        return Err(Error::DensityTooLarge {
            density: density.value,
            threshold,
            lambda_max: density.lambda_max,
        });
    }
    let trace = construct_unchecked(space, sets, params)?;
    if let Some((name, level, detail)) = trace.first_failure() {
        return Err(Error::Invariant {
            name,
            level: level as usize,
            detail,
        });
    }
    if trace.nonzero_on_sets > 0 {
        return Err(Error::Invariant {
            name: "vanishing",
            level: trace.depth as usize,
            detail: format!("{} points of some E_j carry a nonzero f_j", trace.nonzero_on_sets),
        });
    }
    Ok(trace)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelBound {
    pub checked: usize,
    pub violations: usize,
    /// Smallest `rhs - f` seen.
    #[serde(serialize_with = "crate::io::real")]
    pub min_slack: f64,
}

/// Checks `f_{j,h}(x) <= g_j(B) - log2(r / r_h) / 3 + 8 * 2^q + 6` for
/// every level `h`, every ball `B = B(y, r)` with `r <= 4 r_h` and
/// `x in B`.
///
/// Each canonical ball stands for the radii `(inner, outer]`; the bound is
/// tightest at the largest admissible radius.
pub fn level_bound_check(space: &MetricMeasureSpace, sets: &[IndicatorSet], trace: &ConstructionTrace) -> LevelBound {
    let params = &trace.params;
    let slack_const = 8.0 * (params.q as f64).exp2() + 6.0;
    let mut out = LevelBound {
        checked: 0,
        violations: 0,
        min_slack: f64::INFINITY,
    };
    for level in &trace.levels {
        let r_h = level.radius;
        for y in 0..space.len() {
            let order = space.by_distance(y);
            for shell in space.shells(y) {
                if shell.inner >= 4.0 * r_h {
                    break;
                }
                let r = shell.outer.min(4.0 * r_h);
                let members = &order[..shell.count];
                for (j, e) in sets.iter().enumerate() {
                    let g = g_members(space, e, members, shell.measure, params.c_d);
                    let rhs = g - (r / r_h).log2() / 3.0 + slack_const;
                    for &x in members {
                        out.checked += 1;
                        let slack = rhs - level.fields[j][x];
                        out.min_slack = out.min_slack.min(slack);
                        if slack < -TOL {
                            out.violations += 1;
                        }
                    }
                }
            }
        }
    }
    out
}

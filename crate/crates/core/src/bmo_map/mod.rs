//! Self-maps of a space, their composition operators and the two-set
//! density conditions that characterize maps preserving BMO.
//!
//! For a map `F` and sets `E_1, E_2` the two numbers compared throughout
//! are the input density `x = sup_B min_k mu(E_k ∩ B) / mu(B)` and the
//! preimage density `y`, the same quantity for `F^-1(E_1), F^-1(E_2)`.
//! Condition (i) asks for `y <= K x^alpha`, condition (ii) for
//! `x < lambda => y < gamma`, and condition (iii) for a bounded
//! composition operator `f -> f ∘ F`.

mod conditions;
mod operator;
mod trials;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::space::MetricMeasureSpace;
use crate::uchiyama::{density_functional, IndicatorSet};

pub use conditions::{
    alpha_grid, condition_i_fit, condition_ii_check, implication_check, ConditionIFit, ConditionIICheck,
    ImplicationCheck,
};
pub use operator::{
    default_family, round_trip_iii_to_i, operator_norm_estimate, prop_i_iii_pipeline, prop_ii_iii_pipeline, FieldFamily,
    NormEstimate, PipelineReport, PipelineRecord, RoundTrip, RoundTripRecord, StrombergPath,
};
pub use trials::{evaluate_pairs, exhaustive_records, sample_pairs, SetPair, TrialRecord, EXHAUSTIVE_MAX};

/// A map `F: X -> X` given by the image of every point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PointMap {
    label: String,
    image: Vec<usize>,
}

impl PointMap {
    pub fn new(space: &MetricMeasureSpace, label: impl Into<String>, image: Vec<usize>) -> Result<Self> {
        if image.len() != space.len() {
            return Err(Error::Invalid(format!(
                "map has {} entries but the space has {} points",
                image.len(),
                space.len()
            )));
        }
        if let Some(&bad) = image.iter().find(|&&i| i >= space.len()) {
            return Err(Error::Invalid(format!("image id {bad} out of range")));
        }
        Ok(Self {
            label: label.into(),
            image,
        })
    }

    pub fn identity(space: &MetricMeasureSpace) -> Self {
        Self {
            label: "identity".into(),
            image: (0..space.len()).collect(),
        }
    }

    /// `i -> n - 1 - i`. An isometry on one-dimensional grids and paths.
    pub fn reflection(space: &MetricMeasureSpace) -> Self {
        let n = space.len();
        Self {
            label: "reflection".into(),
            image: (0..n).map(|i| n - 1 - i).collect(),
        }
    }

    pub fn constant(space: &MetricMeasureSpace, p: usize) -> Result<Self> {
        Self::new(space, format!("constant-{p}"), vec![p; space.len()])
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn image(&self) -> &[usize] {
        &self.image
    }

    #[inline]
    pub fn apply(&self, i: usize) -> usize {
        self.image[i]
    }

    pub fn len(&self) -> usize {
        self.image.len()
    }

    pub fn is_empty(&self) -> bool {
        self.image.is_empty()
    }

    /// `F ∘ G`, that is `x -> F(G(x))`.
    pub fn after(&self, g: &PointMap) -> Result<PointMap> {
        if self.len() != g.len() {
            return Err(Error::Invalid("maps live on spaces of different sizes".into()));
        }
        Ok(PointMap {
            label: format!("{}.{}", self.label, g.label),
            image: g.image.iter().map(|&y| self.image[y]).collect(),
        })
    }

    pub fn is_bijective(&self) -> bool {
        let mut seen = vec![false; self.len()];
        self.image.iter().all(|&y| !std::mem::replace(&mut seen[y], true))
    }

    /// Whether `d(F(x), F(y)) = d(x, y)` for all pairs.
    pub fn is_isometry(&self, space: &MetricMeasureSpace) -> bool {
        (0..space.len()).all(|x| (0..x).all(|y| space.dist(self.apply(x), self.apply(y)) == space.dist(x, y)))
    }

    /// Whether `mu(F^-1({p})) = mu({p})` for every point.
    pub fn preserves_measure(&self, space: &MetricMeasureSpace) -> bool {
        let mut pulled = vec![0.0; space.len()];
        for x in 0..space.len() {
            pulled[self.apply(x)] += space.weight(x);
        }
        pulled.iter().zip(space.weights()).all(|(a, b)| a == b)
    }

    /// Null sets pull back to null sets. Every point has positive weight,
    /// so only the empty set is null and this always holds.
    pub fn preserves_null_sets(&self) -> bool {
        true
    }
}

/// `F^-1(E) = {i : F(i) in E}`.
pub fn preimage(map: &PointMap, set: &IndicatorSet) -> IndicatorSet {
    let mask = map.image.iter().map(|&y| set.contains(y)).collect();
    IndicatorSet::from_mask_unchecked(mask)
}

/// `f ∘ F`.
pub fn compose(f: &ScalarField, map: &PointMap) -> Result<ScalarField> {
    if f.len() != map.len() {
        return Err(Error::Invalid(format!(
            "field has {} values but the map has {} points",
            f.len(),
            map.len()
        )));
    }
    Ok(ScalarField::from_values_unchecked(map.image.iter().map(|&y| f[y]).collect()))
}

/// `sup_B min(mu(E_1 ∩ B), mu(E_2 ∩ B)) / mu(B)`.
pub fn two_set_density(space: &MetricMeasureSpace, e1: &IndicatorSet, e2: &IndicatorSet) -> f64 {
    // the base only affects lambda_max, which is discarded here
    density_functional(space, &[e1.clone(), e2.clone()], 2.0)
        .expect("two sets are given")
        .value
}

/// Everything `map-check` reports about one map.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapReport {
    pub map: String,
    pub space: String,
    pub bijective: bool,
    pub isometry: bool,
    pub measure_preserving: bool,
    pub null_sets_preserved: bool,
    pub records: Vec<TrialRecord>,
    pub condition_i: ConditionIFit,
    pub condition_ii: ConditionIICheck,
    pub implication: ImplicationCheck,
    pub operator_norm: NormEstimate,
}

/// Runs the condition testers and the operator-norm estimate on one trial
/// family.
pub fn map_check(
    space: &MetricMeasureSpace,
    map: &PointMap,
    records: Vec<TrialRecord>,
    gamma: f64,
    lambda_thresh: f64,
    family: &FieldFamily,
) -> Result<MapReport> {
    let condition_i = condition_i_fit(&records, &alpha_grid())?;
    let condition_ii = condition_ii_check(space, &records, gamma, lambda_thresh)?;
    let implication = implication_check(&records, &condition_i)?;
    let operator_norm = operator_norm_estimate(space, map, family)?;
    Ok(MapReport {
        map: map.label.clone(),
        space: space.label().to_string(),
        bijective: map.is_bijective(),
        isometry: map.is_isometry(space),
        measure_preserving: map.preserves_measure(space),
        null_sets_preserved: map.preserves_null_sets(),
        records,
        condition_i,
        condition_ii,
        implication,
        operator_norm,
    })
}

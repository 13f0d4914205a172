mod common;

use bmo_core::bmo_map::{
    alpha_grid, compose, condition_i_fit, default_family, evaluate_pairs, round_trip_iii_to_i, implication_check,
    map_check, operator_norm_estimate, preimage, sample_pairs, two_set_density, PointMap,
};
use bmo_core::oscillation::bmo_norm;
use bmo_core::space::{build_space, Generator, SpaceSpec};
use bmo_core::uchiyama::IndicatorSet;
use common::{grid, normalized_grid};
use proptest::prelude::*;

/// Quarter turn of the `side x side` grid.
fn rotation(s: &bmo_core::MetricMeasureSpace, side: usize) -> PointMap {
    let image = (0..side * side).map(|id| (id % side) * side + (side - 1 - id / side)).collect();
    PointMap::new(s, "rotation", image).unwrap()
}

#[test]
fn grid_rotation_is_a_bmo_isometry() {
    let side = 4;
    let s = build_space(&SpaceSpec::new(Generator::Grid2d { side, exponent: 0.0 })).unwrap();
    let r = rotation(&s, side);
    assert!(r.is_isometry(&s) && r.is_bijective() && r.preserves_measure(&s));
    let full_turn = r.after(&r).unwrap().after(&r).unwrap().after(&r).unwrap();
    assert_eq!(full_turn.image(), PointMap::identity(&s).image());

    let recs = evaluate_pairs(&s, &r, &sample_pairs(&s, 200, 1));
    assert!(recs.iter().all(|rec| rec.x == rec.y));
    let family = default_family(&s, 2).unwrap();
    let report = map_check(&s, &r, recs, 0.2, 0.2, &family).unwrap();
    assert_eq!((report.condition_i.k, report.condition_i.alpha), (1.0, 1.0));
    assert!((report.operator_norm.value - 1.0).abs() <= 1e-12);
    assert!(report.condition_ii.verdict.is_pass());
}

#[test]
fn collapsing_map_on_a_grid() {
    // fold 0..8 onto 0..4: preimages double, densities can grow
    let s = grid(8);
    let fold = PointMap::new(&s, "fold", vec![0, 1, 2, 3, 3, 2, 1, 0]).unwrap();
    let recs = evaluate_pairs(&s, &fold, &sample_pairs(&s, 300, 4));
    let fit = condition_i_fit(&recs, &alpha_grid()).unwrap();
    assert!(fit.k >= 1.0 && fit.k.is_finite());
    assert_eq!(implication_check(&recs, &fit).unwrap().counterexamples, 0);
    let est = operator_norm_estimate(&s, &fold, &default_family(&s, 0).unwrap()).unwrap();
    assert!(est.value > 0.0 && est.value.is_finite());
}

#[test]
fn round_trip_on_identity() {
    let s = normalized_grid(10);
    let id = PointMap::identity(&s);
    let rt = round_trip_iii_to_i(&s, &id, &sample_pairs(&s, 30, 8), 1.0).unwrap();
    assert!(rt.checked > 0);
    assert_eq!(rt.checked, rt.holds);
    assert!(rt.verdict.is_pass(), "{}", rt.verdict);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn composition_commutes_with_preimages(image in prop::collection::vec(0usize..10, 10), ids in prop::collection::vec(0usize..10, 0..10)) {
        let s = grid(10);
        let map = PointMap::new(&s, "m", image).unwrap();
        let e = IndicatorSet::new(&s, &ids).unwrap();
        prop_assert_eq!(compose(&e.indicator(), &map).unwrap(), preimage(&map, &e).indicator());
        prop_assert_eq!(preimage(&map, &e.complement()), preimage(&map, &e).complement());
    }

    #[test]
    fn composing_with_a_bijective_isometry_keeps_norms(values in prop::collection::vec(-5.0f64..5.0, 9)) {
        let s = build_space(&SpaceSpec::new(Generator::Grid2d { side: 3, exponent: 0.0 })).unwrap();
        let f = bmo_core::ScalarField::new(&s, values).unwrap();
        let g = compose(&f, &rotation(&s, 3)).unwrap();
        // equal up to the order of summation
        let (a, b) = (bmo_norm(&s, &g).value, bmo_norm(&s, &f).value);
        prop_assert!((a - b).abs() <= 1e-12 * b.max(1.0));
    }

    #[test]
    fn densities_lie_in_unit_interval(seed in any::<u64>()) {
        let s = grid(7);
        for p in sample_pairs(&s, 10, seed) {
            let x = two_set_density(&s, &p.e1, &p.e2);
            prop_assert!((0.0..=1.0).contains(&x));
            prop_assert_eq!(x, two_set_density(&s, &p.e2, &p.e1));
        }
    }
}

mod common;

use bmo_core::io::{read_field, read_map, read_set, read_space, write_field, write_map, write_set, write_space};
use bmo_core::bmo_map::PointMap;
use bmo_core::uchiyama::IndicatorSet;
use bmo_core::ScalarField;
use common::arb_space_field;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn text_formats_round_trip((s, f) in arb_space_field(), picks in prop::collection::vec(any::<bool>(), 16)) {
        let back = read_space(&write_space(&s)).unwrap();
        prop_assert_eq!(back.enumerate_balls(), s.enumerate_balls());
        prop_assert_eq!(back.doubling(), s.doubling());
        prop_assert_eq!(back.weights(), s.weights());

        prop_assert_eq!(read_field(&s, &write_field(&f)).unwrap(), f);

        let ids: Vec<usize> = (0..s.len()).filter(|&i| picks[i % picks.len()]).collect();
        let e = IndicatorSet::new(&s, &ids).unwrap();
        prop_assert_eq!(read_set(&s, &write_set(&e)).unwrap(), e);

        let m = PointMap::reflection(&s);
        prop_assert_eq!(read_map(&s, "reflection", &write_map(&m)).unwrap(), m);
    }
}

#[test]
fn awkward_values_survive() {
    let s = common::grid(4);
    let f = ScalarField::new(&s, vec![0.1 + 0.2, -1e-308, 1e308, std::f64::consts::PI]).unwrap();
    assert_eq!(read_field(&s, &write_field(&f)).unwrap(), f);
}

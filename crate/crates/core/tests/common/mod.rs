#![allow(dead_code)]

use bmo_core::space::{build_space, Generator, SpaceSpec};
use bmo_core::{MetricMeasureSpace, ScalarField};
use proptest::prelude::*;

pub fn grid(n: usize) -> MetricMeasureSpace {
    build_space(&SpaceSpec::new(Generator::Grid1d { len: n, exponent: 0.0 })).unwrap()
}

pub fn normalized_grid(n: usize) -> MetricMeasureSpace {
    build_space(&SpaceSpec::normalized(Generator::Grid1d { len: n, exponent: 0.0 })).unwrap()
}

/// Small spaces of every generator kind.
pub fn arb_space() -> impl Strategy<Value = MetricMeasureSpace> {
    prop_oneof![
        (2usize..14, -0.5f64..2.0).prop_map(|(len, exponent)| Generator::Grid1d { len, exponent }),
        (2usize..4, 0.0f64..1.0).prop_map(|(side, exponent)| Generator::Grid2d { side, exponent }),
        (2usize..12).prop_map(|len| Generator::Path { len }),
        (1u32..4).prop_map(|depth| Generator::BinaryTree { depth }),
        (2usize..16, any::<u64>()).prop_map(|(n, seed)| Generator::RandomTree { n, seed }),
    ]
    .prop_map(|g| build_space(&SpaceSpec::new(g)).unwrap())
}

/// A space together with a field on it.
pub fn arb_space_field() -> impl Strategy<Value = (MetricMeasureSpace, ScalarField)> {
    arb_space().prop_flat_map(|s| {
        let n = s.len();
        prop::collection::vec(-10.0f64..10.0, n).prop_map(move |v| {
            let f = ScalarField::new(&s, v).unwrap();
            (s.clone(), f)
        })
    })
}

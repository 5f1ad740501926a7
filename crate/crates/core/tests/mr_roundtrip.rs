mod common;

use common::criteria::{
    self, check_kg_roundtrip, check_viggo_roundtrip, kg_mr_strategy, viggo_mr_strategy,
    viggo_records,
};
use m2t::MrSchema;
use proptest::prelude::*;

#[test]
fn acceptance_round_trip() {
    criteria::mr_roundtrip();
}

#[test]
fn every_bundled_record_round_trips() {
    for r in viggo_records() {
        check_viggo_roundtrip(&r.mr);
    }
}

proptest! {
    #[test]
    fn viggo(mr in viggo_mr_strategy(&MrSchema::builtin())) {
        check_viggo_roundtrip(&mr);
    }

    #[test]
    fn kg(mr in kg_mr_strategy(&MrSchema::builtin())) {
        check_kg_roundtrip(&mr);
    }
}

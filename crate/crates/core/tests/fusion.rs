mod common;

use asmon::fusion::{consolidate, Cluster, ObservationLayout, DEFAULT_RADIUS};
use common::props::{self, clouds_match_double_loop, planted_recovery, smoothing_case};
use common::proptest_config;
use proptest::prelude::*;

proptest! {
    #![proptest_config(proptest_config(100))]

    #[test]
    fn counts_and_iou_match_the_double_loop(seed in any::<u64>(), r_exp in 2u32..5) {
        clouds_match_double_loop(seed, r_exp)?;
    }
}

proptest! {
    #![proptest_config(proptest_config(1000))]

    #[test]
    fn smoothing_is_bounded_and_rises_faster(case in smoothing_case()) {
        props::smoothing_is_bounded_and_rises_faster(case)?;
    }

    #[test]
    fn consolidation_has_a_fixed_shape(
        clusters in proptest::collection::vec((0u32..9, 0usize..4, -1.0f64..2.0), 0..30),
    ) {
        let layout = ObservationLayout {
            elements: (0..9).map(|i| format!("E{i}")).collect(),
            trays: (0..4).map(|i| format!("T{i}")).collect(),
        };
        let clusters: Vec<Cluster> = clusters
            .into_iter()
            .map(|(class_id, tray, confidence)| Cluster { tray, class_id, members: vec![0], confidence })
            .collect();
        let y = consolidate(&clusters, &layout).unwrap();
        prop_assert_eq!(y.len(), 36);
        prop_assert!(y.0.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}

#[test]
fn planted_correspondences_are_recovered() {
    let jitter = 0.9 * DEFAULT_RADIUS / 2.0;
    let (mut planted, mut recovered) = (0, 0);
    for seed in 0..50 {
        let (p, r, mixed) = planted_recovery(seed, jitter);
        assert_eq!(mixed, 0, "seed {seed} merged distinct objects");
        planted += p;
        recovered += r;
    }
    let share = recovered as f64 / planted as f64;
    assert!(share >= 0.95, "recovered {recovered} of {planted}");
}

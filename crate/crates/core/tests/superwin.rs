mod common;

use common::{brute_contiguous, brute_sparse, indexed_grid};
use ppgstage::superwin::{
    build, build_all, build_c01, build_contiguous, build_sparse, contiguous_count, sparse_count, ConfigId,
    C01_WINDOWS, PAD_INDEX,
};
use ppgstage::traineval::StageLabel;
use ppgstage::WINDOW_SAMPLES;
use proptest::prelude::*;

const LABELS: [StageLabel; 5] = [
    StageLabel::Wake,
    StageLabel::Light,
    StageLabel::Unscored,
    StageLabel::Deep,
    StageLabel::Rem,
];

/// Row content, label and validity follow the source index; padding rows
/// are zero, unscored and invalid.
fn check_rows(grid: &ppgstage::sigprep::WindowGrid, sw: &ppgstage::superwin::SuperWindow) -> Result<(), TestCaseError> {
    prop_assert_eq!(sw.windows.len(), sw.len() * WINDOW_SAMPLES);
    for (j, &src) in sw.source_indices.iter().enumerate() {
        let row = sw.row(j);
        if src == PAD_INDEX {
            prop_assert!(row.iter().all(|&v| v == 0.0));
            prop_assert_eq!(sw.labels[j], StageLabel::Unscored);
            prop_assert!(!sw.valid[j]);
        } else {
            prop_assert!(row.iter().all(|&v| v == src as f32));
            prop_assert_eq!(sw.labels[j], grid.labels[src as usize]);
            prop_assert_eq!(sw.valid[j], grid.valid[src as usize]);
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn contiguous_matches_enumeration(w in 1usize..700, n in prop::sample::select(vec![1usize, 2, 7, 60, 120])) {
        let grid = indexed_grid("s", w, &LABELS);
        let set = build_contiguous(&grid, n).unwrap();
        prop_assert_eq!(set.len(), w.div_ceil(n));
        prop_assert_eq!(set.len(), contiguous_count(w, n));
        let got: Vec<Vec<i64>> = set.items.iter().map(|s| s.source_indices.clone()).collect();
        prop_assert_eq!(got, brute_contiguous(w, n));
        for sw in &set.items {
            check_rows(&grid, sw)?;
        }
        // every real window appears exactly once
        let real: usize = set.items.iter().flat_map(|s| &s.source_indices).filter(|&&i| i >= 0).count();
        prop_assert_eq!(real, w);
    }

    #[test]
    fn sparse_matches_enumeration(w in 1usize..400, k in 2usize..6, stride in 1usize..40) {
        let grid = indexed_grid("s", w, &LABELS);
        let set = build_sparse(&grid, k, stride).unwrap();
        prop_assert_eq!(set.len(), sparse_count(w, k, stride));
        prop_assert_eq!(set.len(), w.saturating_sub((k - 1) * stride));
        let got: Vec<Vec<i64>> = set.items.iter().map(|s| s.source_indices.clone()).collect();
        prop_assert_eq!(got, brute_sparse(w, k, stride));
        for sw in &set.items {
            check_rows(&grid, sw)?;
        }
    }

    #[test]
    fn c01_is_one_padded_block(w in 1usize..1500) {
        let grid = indexed_grid("s", w, &LABELS);
        let set = build_c01(&grid);
        prop_assert_eq!(set.len(), 1);
        let sw = &set.items[0];
        prop_assert_eq!(sw.len(), C01_WINDOWS);
        let expect: Vec<i64> = (0..C01_WINDOWS).map(|j| if j < w { j as i64 } else { PAD_INDEX }).collect();
        prop_assert_eq!(&sw.source_indices, &expect);
        check_rows(&grid, sw)?;
    }
}

#[test]
fn configuration_ids_build_their_arrangements() {
    let grid = indexed_grid("s", 240, &LABELS);
    let counts: Vec<usize> = ConfigId::ALL
        .iter()
        .map(|c| build(&grid, &c.spec()).unwrap().len())
        .collect();
    assert_eq!(counts, vec![1, 2, 4, 120, 150]);
    let lens: Vec<usize> = ConfigId::ALL
        .iter()
        .map(|c| build(&grid, &c.spec()).unwrap().items[0].len())
        .collect();
    assert_eq!(lens, vec![1200, 120, 60, 2, 4]);
}

#[test]
fn sets_keep_subjects_apart() {
    let a = indexed_grid("a", 5, &LABELS);
    let b = indexed_grid("b", 3, &LABELS);
    let set = build_all([&a, &b], &ConfigId::C04.spec()).unwrap();
    assert_eq!(set.len(), 3 + 2);
    let ids: Vec<&str> = set.items.iter().map(|s| s.subject_id.as_str()).collect();
    assert_eq!(ids, ["a", "a", "a", "b", "b"]);
    assert_eq!(set.items[2].source_indices, vec![4, PAD_INDEX]);
    assert_eq!(set.subset(["b"]).len(), 2);
}

#[test]
fn sparse_shorter_than_span_is_empty() {
    let grid = indexed_grid("s", 90, &LABELS);
    assert!(build(&grid, &ConfigId::C05.spec()).unwrap().is_empty());
    let grid = indexed_grid("s", 91, &LABELS);
    assert_eq!(build(&grid, &ConfigId::C05.spec()).unwrap().items[0].source_indices, vec![0, 30, 60, 90]);
}

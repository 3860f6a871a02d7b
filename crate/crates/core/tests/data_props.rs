//! Loader round trips and label-draw coverage.

use std::collections::BTreeSet;

use hidegl::data::{draw_label_set, gen_three_moon, load_path, read_libsvm, write_libsvm, Dataset, ThreeMoonSpec};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn libsvm_bytes(ds: &Dataset) -> Vec<u8> {
    let mut out = Vec::new();
    write_libsvm(ds, &mut out).unwrap();
    out
}

#[test]
fn three_class_fixture_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fixture.libsvm");
    std::fs::write(&path, "7 1:0.5 3:1.0\n1 2:-2\n2 1:1 2:2 3:3\n").unwrap();
    let ds = load_path(&path).unwrap();
    assert_eq!((ds.n(), ds.d(), ds.n_classes()), (3, 3, 3));
    assert_eq!(ds.labels().unwrap(), &[2, 0, 1]);
    assert_eq!(ds.features().column(0).as_slice(), &[0.5, 0.0, 1.0]);
}

#[test]
fn three_moon_default_shape() {
    let ds = gen_three_moon(&ThreeMoonSpec::default()).unwrap();
    assert_eq!((ds.n(), ds.d(), ds.n_classes()), (1500, 100, 3));
}

#[test]
fn label_draws_cover_every_class() {
    let ds = gen_three_moon(&ThreeMoonSpec {
        n_per_class: 100,
        ambient_dim: 2,
        ..Default::default()
    })
    .unwrap();
    let mut distinct = BTreeSet::new();
    for seed in 0..100 {
        for l in [3, 5, 10] {
            let labels = draw_label_set(&ds, l, seed).unwrap();
            let classes: BTreeSet<usize> = labels.labeled().iter().map(|&i| labels.class_of(i).unwrap()).collect();
            assert_eq!(classes.len(), 3, "seed {seed}, l={l}");
            assert_eq!(labels.labeled().len(), l);
            let y = labels.y();
            let ones = y.row_iter().filter(|r| r.sum() == 1.0).count();
            assert_eq!(ones, l);
            assert!(y.row_iter().all(|r| r.sum() == 0.0 || r.sum() == 1.0));
            if l == 3 {
                distinct.insert(labels.labeled().to_vec());
            }
        }
    }
    // 100 seeds over 100³ possible triples: collisions would signal seed misuse
    assert!(distinct.len() >= 95, "only {} distinct draws", distinct.len());
}

#[test]
fn full_supervision_on_three_moon() {
    let ds = gen_three_moon(&ThreeMoonSpec {
        n_per_class: 20,
        ambient_dim: 3,
        ..Default::default()
    })
    .unwrap();
    let labels = draw_label_set(&ds, ds.n(), 3).unwrap();
    assert!(labels.unlabeled().is_empty());
    assert_eq!(labels.y().sum(), ds.n() as f64);
    assert!(draw_label_set(&ds, 2, 0).is_err());
    assert!(draw_label_set(&ds, ds.n() + 1, 0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn libsvm_reserialization_is_idempotent(
        d in 1usize..6,
        values in prop::collection::vec(prop_oneof![Just(0.0), -1e3f64..1e3], 1..40),
        raw in prop::collection::vec(0usize..4, 1..40),
    ) {
        let n = (values.len() / d).max(1).min(raw.len());
        let x = DMatrix::from_fn(d, n, |i, j| values.get(j * d + i).copied().unwrap_or(0.0));
        let ds = Dataset::new(x, Some(raw[..n].to_vec())).unwrap();
        let first = read_libsvm(libsvm_bytes(&ds).as_slice()).unwrap();
        let bytes = libsvm_bytes(&first);
        let second = read_libsvm(bytes.as_slice()).unwrap();
        prop_assert_eq!(first.features(), ds.features());
        prop_assert_eq!(second.features(), first.features());
        prop_assert_eq!(second.labels(), first.labels());
        prop_assert_eq!(libsvm_bytes(&second), bytes);
    }
}

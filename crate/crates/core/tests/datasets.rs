mod common;

use disdf::data::{kfold_indices, load_csv, split, LabelColumn};

use common::data_path;

#[test]
fn ecoli_shape() {
    let ds = load_csv(data_path("ecoli.csv"), &LabelColumn::Last).unwrap();
    assert_eq!(ds.len(), 336);
    assert_eq!(ds.feature_dim(), 7);
    assert_eq!(ds.num_classes(), 8);
    assert_eq!(ds.class_names()[0], "cp");
    let mut counts = ds.class_counts();
    counts.sort_unstable();
    assert_eq!(counts, vec![2, 2, 5, 20, 35, 52, 77, 143]);
}

#[test]
fn ionosphere_shape() {
    let ds = load_csv(data_path("ionosphere.csv"), &LabelColumn::Name("class".into())).unwrap();
    assert_eq!(ds.len(), 351);
    assert_eq!(ds.feature_dim(), 34);
    assert_eq!(ds.class_names(), &["g".to_string(), "b".to_string()]);
    assert_eq!(ds.class_counts(), vec![225, 126]);
    // the second attribute is constant in the original data
    assert!(ds.rows().all(|r| r[1] == 0.0));
}

#[test]
fn real_data_splits_and_folds() {
    let ds = load_csv(data_path("ecoli.csv"), &LabelColumn::Last).unwrap();
    let (train, test) = split(&ds, 100, 67, 4).unwrap();
    assert_eq!((train.len(), test.len()), (100, 67));
    assert_eq!(train.num_classes(), 8);
    let folds = kfold_indices(100, 3, 1).unwrap();
    let sizes: Vec<usize> = folds.iter().map(|(_, held)| held.len()).collect();
    assert_eq!(sizes, vec![34, 33, 33]);
}

use std::fs;

use fitzloss::data::{
    load_multilabel, preprocess, synth_generate, synth_generate_with_truth, Format, LoadOptions, Manifest, RawDataset,
    Split,
};
use fitzloss::ProbVector;
use ndarray::{Array2, Axis};
use proptest::prelude::*;

fn raw_strategy() -> impl Strategy<Value = RawDataset> {
    (5usize..30, 1usize..5, 2usize..5).prop_flat_map(|(n, d, k)| {
        (
            prop::collection::vec(-100.0..100.0f64, n * d),
            prop::collection::vec(prop::bool::weighted(0.4), n * k),
            prop::collection::vec(0u8..3, n),
            any::<bool>(),
        )
            .prop_map(move |(x, labels, splits, constant_column)| {
                let mut features = Array2::from_shape_vec((n, d), x).unwrap();
                if constant_column {
                    features.column_mut(0).fill(3.5);
                }
                let labels = Array2::from_shape_vec((n, k), labels.iter().map(|&b| f64::from(u8::from(b))).collect())
                    .unwrap();
                // the first row always trains and carries a label
                let mut assignment: Vec<Option<Split>> =
                    splits.iter().map(|s| Some([Split::Train, Split::Dev, Split::Test][*s as usize])).collect();
                assignment[0] = Some(Split::Train);
                let mut labels = labels;
                labels[[0, 0]] = 1.0;
                RawDataset { features, labels, assignment }
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn preprocessing_invariants(raw in raw_strategy()) {
        let data = preprocess(&raw, "p").unwrap();
        let kept = (0..raw.n()).filter(|&i| raw.labels.row(i).sum() > 0.0).count();
        prop_assert_eq!(data.n(), kept);
        for y in data.labels() {
            prop_assert!(ProbVector::new(y.to_vec()).is_ok());
        }

        let train = data.features().select(Axis(0), &data.splits().train);
        let mean = train.mean_axis(Axis(0)).unwrap();
        let std = train.std_axis(Axis(0), 0.0);
        for j in 0..data.d() {
            prop_assert!(mean[j].abs() < 1e-9);
            let raw_train: Vec<f64> = (0..raw.n())
                .filter(|&i| raw.assignment[i] == Some(Split::Train) && raw.labels.row(i).sum() > 0.0)
                .map(|i| raw.features[[i, j]])
                .collect();
            let constant = raw_train.iter().all(|v| *v == raw_train[0]);
            if !constant {
                prop_assert!((std[j] - 1.0).abs() < 1e-9, "std {}", std[j]);
            }
        }

        let again = preprocess(&data.to_raw(), "p").unwrap();
        prop_assert_eq!(again.labels(), data.labels());
        prop_assert_eq!(again.splits(), data.splits());
        let drift = (again.features() - data.features()).iter().map(|v| v.abs()).fold(0.0, f64::max);
        prop_assert!(drift < 1e-9);
    }
}

#[test]
fn svmlight_files_load_through_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("train.svm"),
        "# toy\n0,2 1:0.5 3:-1\n1 2:2\n\n0 1:1 2:1 3:1\n 1:4\n2 3:0.25\n1,2 1:-1 2:-1\n",
    )
    .unwrap();
    fs::write(dir.path().join("dev.svm"), "0 1:1\n1 2:1\n").unwrap();
    fs::write(dir.path().join("test.svm"), "2 3:3\n").unwrap();
    fs::write(
        dir.path().join("m.toml"),
        "[[dataset]]\nname = 'toy'\nformat = 'svmlight_multilabel'\nk = 3\nd = 3\n\
         train = 'train.svm'\ndev = 'dev.svm'\ntest = 'test.svm'\n",
    )
    .unwrap();

    let raw = load_multilabel(&dir.path().join("train.svm"), Format::SvmlightMultilabel, &LoadOptions {
        k: Some(3),
        d: Some(3),
        ..LoadOptions::default()
    })
    .unwrap();
    assert_eq!(raw.features.row(0).to_vec(), vec![0.5, 0.0, -1.0]);
    assert_eq!(raw.labels.row(0).to_vec(), vec![1.0, 0.0, 1.0]);
    assert_eq!(raw.n(), 6);

    let data = Manifest::load(&dir.path().join("m.toml")).unwrap().load_dataset("toy").unwrap();
    // the unlabeled row is gone
    assert_eq!(data.n(), 8);
    assert_eq!(data.view(Split::Train).len(), 5);
    assert_eq!(data.view(Split::Train).y(0).as_slice(), &[0.5, 0.0, 0.5]);
    assert_eq!(data.view(Split::Test).y(0).as_slice(), &[0.0, 0.0, 1.0]);
}

#[test]
fn duplicate_feature_index_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.svm");
    fs::write(&path, "0 1:1\n1 2:1 2:3\n").unwrap();
    let err = load_multilabel(&path, Format::SvmlightMultilabel, &LoadOptions::default()).unwrap_err();
    assert!(err.to_string().contains("line 2"), "{err}");
}

#[test]
fn synthetic_data_is_seeded_and_interior() {
    let a = synth_generate(8, 200, 6, 4, 0.0).unwrap();
    assert_eq!(a, synth_generate(8, 200, 6, 4, 0.0).unwrap());
    for y in a.labels() {
        assert!(y.iter().all(|v| *v > 0.0));
    }
    assert!(synth_generate(8, 5, 6, 4, 0.0).is_err());
    assert!(synth_generate(8, 50, 6, 1, 0.0).is_err());
}

#[test]
fn large_margins_give_near_vertex_labels() {
    let (data, truth) = synth_generate_with_truth(12, 1000, 8, 2, 0.0).unwrap();
    let mut margins: Vec<(f64, usize)> = (0..data.n())
        .map(|i| {
            let theta = truth.dot(&data.features().row(i));
            ((theta[0] - theta[1]).abs(), i)
        })
        .collect();
    margins.sort_by(|a, b| b.0.total_cmp(&a.0));
    for &(_, i) in &margins[..data.n() / 10] {
        let top = data.labels()[i].iter().copied().fold(0.0, f64::max);
        assert!(top > 0.99, "sample {i}: {top}");
    }
}

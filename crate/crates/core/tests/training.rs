mod common;

use bnnsat::model::forward_reference;
use bnnsat::train::{downscale_binarize, evaluate, load_idx, train, Dataset, TrainConfig};
use bnnsat::Bipolar;

fn art(rows: &[&str]) -> Vec<Bipolar> {
    rows.iter()
        .flat_map(|r| r.chars().map(|c| if c == '#' { 1 } else { -1 }))
        .collect()
}

#[test]
fn standard_files_have_expected_sizes() {
    let dir = common::data_dir();
    let train_set = load_idx(
        &dir.join("train-images-idx3-ubyte.gz"),
        &dir.join("train-labels-idx1-ubyte.gz"),
    )
    .unwrap();
    assert_eq!(
        (train_set.len(), train_set.rows, train_set.cols),
        (60000, 28, 28)
    );
    assert_eq!(&train_set.labels[..5], &[5, 0, 4, 1, 9]);
    let test_set = Dataset::load(&dir, "t10k", 10, 10).unwrap();
    assert_eq!(test_set.len(), 10000);
}

#[test]
fn first_training_digit_downscaled() {
    let dir = common::data_dir();
    let raw = load_idx(
        &dir.join("train-images-idx3-ubyte.gz"),
        &dir.join("train-labels-idx1-ubyte.gz"),
    )
    .unwrap();
    let img = &raw.images[0];
    let ten = art(&[
        "..........",
        "..........",
        "...#####..",
        "....#.....",
        "....#.....",
        ".....##...",
        "......#...",
        "....##....",
        "..##......",
        "..........",
    ]);
    assert_eq!(downscale_binarize(img, 28, 28, 10, 10).unwrap(), ten);
    let five = art(&[".....", "..#..", ".....", "..#..", "....."]);
    assert_eq!(downscale_binarize(img, 28, 28, 5, 5).unwrap(), five);
}

#[test]
fn blank_and_full_images() {
    assert!(downscale_binarize(&[0.0; 784], 28, 28, 10, 10)
        .unwrap()
        .iter()
        .all(|&v| v == -1));
    assert!(downscale_binarize(&[1.0; 784], 28, 28, 10, 10)
        .unwrap()
        .iter()
        .all(|&v| v == 1));
}

fn subset(d: &Dataset, range: std::ops::Range<usize>) -> Dataset {
    Dataset {
        width: d.width,
        height: d.height,
        images: d.images[range.clone()].to_vec(),
        labels: d.labels[range].to_vec(),
    }
}

#[test]
fn evaluate_is_size_weighted_over_a_split() {
    let dir = common::data_dir();
    let test_set = Dataset::load(&dir, "t10k", 5, 5).unwrap();
    let small = subset(&test_set, 0..3000);
    let model = train(
        &small,
        &[25, 10, 10],
        &TrainConfig {
            epochs: 2,
            ..TrainConfig::default()
        },
    )
    .unwrap();
    let (a, b) = (subset(&test_set, 0..1200), subset(&test_set, 1200..10000));
    let whole = evaluate(&model, &test_set).unwrap();
    let split =
        (evaluate(&model, &a).unwrap() * 1200.0 + evaluate(&model, &b).unwrap() * 8800.0) / 10000.0;
    assert!((whole - split).abs() < 1e-12);
}

#[test]
fn constant_predictor_scores_its_class_frequency() {
    let dir = common::data_dir();
    let test_set = Dataset::load(&dir, "t10k", 5, 5).unwrap();
    let mut model = bnnsat::verify::random_model(&[25, 4, 10], 3);
    model.output_block.bias = vec![-100.0; 10];
    model.output_block.bias[0] = 100.0;
    assert!(test_set
        .images
        .iter()
        .all(|x| forward_reference(&model, x).unwrap().0 == 0));
    let zeros = test_set.labels.iter().filter(|&&l| l == 0).count() as f64 / 10000.0;
    let acc = evaluate(&model, &test_set).unwrap();
    assert_eq!(acc, zeros);
    assert!((acc - 0.1).abs() < 0.02);
}

#[test]
fn trained_weights_are_signs_and_files_reproduce() {
    let dir = common::data_dir();
    let d = subset(&Dataset::load(&dir, "t10k", 5, 5).unwrap(), 0..2000);
    let config = TrainConfig {
        epochs: 3,
        seed: 9,
        ..TrainConfig::default()
    };
    let a = train(&d, &[25, 8, 6, 10], &config).unwrap();
    let b = train(&d, &[25, 8, 6, 10], &config).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    for block in &a.inner_blocks {
        assert!(block.weights.iter().flatten().all(|&w| w == 1 || w == -1));
    }
    assert!(a
        .output_block
        .weights
        .iter()
        .flatten()
        .all(|&w| w == 1 || w == -1));
    let other = train(&d, &[25, 8, 6, 10], &TrainConfig { seed: 10, ..config }).unwrap();
    assert_ne!(a.to_json(), other.to_json());
}

use std::sync::Arc;

use ldrkit::{Activation, LdrLayer, NetworkModel, OperatorMatrix, OperatorPair, Vector};
use ldrkit_cli::model_file::ModelFile;
use ldrkit_cli::{load_model, parse_model, save_model};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn two_layer_model(rng: &mut ChaCha8Rng) -> NetworkModel {
    let n = 5;
    let first = Arc::new(
        OperatorPair::new(
            OperatorMatrix::unit_circulant(n, -1.5),
            OperatorMatrix::diagonal(Vector::from_fn(n, |i, _| 0.1 * (i + 1) as f64)),
        )
        .unwrap(),
    );
    let l1 = LdrLayer::random(first, 2, 2, Activation::Sigmoid, 0.7, 0.4, rng).unwrap();
    let l2 = LdrLayer::random(Arc::new(OperatorPair::toeplitz(2 * n)), 1, 1, Activation::Relu, 0.7, 0.4, rng).unwrap();
    let alpha = Vector::from_fn(2 * n, |_, _| rng.random_range(-1.0..1.0));
    NetworkModel::new(vec![l1, l2], alpha, 0.125).unwrap()
}

#[test]
fn save_load_forward_is_bitwise_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let model = two_layer_model(&mut rng);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    save_model(&model, &path).unwrap();
    let back = load_model(&path).unwrap();
    assert_eq!(model.parameters(), back.parameters());
    for _ in 0..100 {
        let x = Vector::from_fn(5, |_, _| rng.random_range(-2.0..2.0));
        assert_eq!(model.forward(&x).unwrap().to_bits(), back.forward(&x).unwrap().to_bits());
    }
    // Saving the reloaded model reproduces the file.
    let again = dir.path().join("m2.json");
    save_model(&back, &again).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn truncated_file_is_malformed() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let text = serde_json::to_string(&ModelFile::from_model(&two_layer_model(&mut rng))).unwrap();
    let err = parse_model(&text[..text.len() / 2]).unwrap_err();
    assert_eq!(err.exit_code(), 1);
    assert!(err.to_string().contains("malformed"), "{err}");
}

#[test]
fn generator_shape_mismatch_names_field() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut file = ModelFile::from_model(&two_layer_model(&mut rng));
    file.layers[0].blocks[1].g.pop();
    let err = file.to_model().unwrap_err().to_string();
    assert!(err.contains("layers[0].blocks[1].g"), "{err}");

    let mut file = ModelFile::from_model(&two_layer_model(&mut rng));
    file.layers[0].n = 4;
    let err = file.to_model().unwrap_err().to_string();
    assert!(err.contains("layers[0]"), "{err}");
}

#[test]
fn version_mismatch_is_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut file = ModelFile::from_model(&two_layer_model(&mut rng));
    file.version = 99;
    let err = file.to_model().unwrap_err().to_string();
    assert!(err.contains("version"), "{err}");
}

#[test]
fn non_potent_operator_is_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut file = ModelFile::from_model(&two_layer_model(&mut rng));
    file.layers[1].blocks[0].pair.a = ldrkit_cli::model_file::OperatorDescriptor::Diagonal {
        d: (1..=10).map(f64::from).collect(),
    };
    let err = file.to_model().unwrap_err().to_string();
    assert!(err.contains("layers[1].blocks[0].pair"), "{err}");
}

#[test]
fn missing_file_is_io_error() {
    let err = load_model(std::path::Path::new("/nonexistent/model.json")).unwrap_err();
    assert_eq!(err.exit_code(), 3);
}

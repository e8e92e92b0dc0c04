use insole_core::regress::{
    fit_model, load_model, model_from_json, model_to_json, save_model, MlpConfig, ModelKind,
    ModelParams, RegressError, Validation, FORMAT_VERSION,
};
use ndarray::Array2;

fn data(n: usize) -> (Array2<f64>, Vec<f64>) {
    let x = Array2::from_shape_fn((n, 4), |(i, j)| {
        ((i * 7 + j * 13) % 29) as f64 * 10.0 - 80.0
    });
    let y = (0..n)
        .map(|i| 2.0 + 0.01 * (x[[i, 0]] + 2.0 * x[[i, 1]] - x[[i, 3]]).abs())
        .collect();
    (x, y)
}

fn params() -> ModelParams {
    ModelParams {
        mlp: MlpConfig {
            hidden: vec![8, 4],
            batch_size: 16,
            max_epochs: 5,
            ..Default::default()
        },
        ..Default::default()
    }
}

#[test]
fn every_kind_survives_a_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (x, y) = data(96);
    let (xv, yv) = data(32);
    for kind in ModelKind::ALL {
        let val = Validation {
            x: xv.view(),
            y: &yv,
        };
        let trained = fit_model(kind, x.view(), &y, Some(val), &params()).unwrap();
        let path = dir.path().join(format!("{kind}.json"));
        save_model(&trained, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back, trained, "{kind}");
        for row in xv.rows() {
            let r = row.to_vec();
            assert_eq!(back.predict(&r).to_bits(), trained.predict(&r).to_bits());
        }
    }
}

#[test]
fn truncated_file_is_corrupt() {
    let (x, y) = data(40);
    let trained = fit_model(ModelKind::Enet, x.view(), &y, None, &params()).unwrap();
    let text = model_to_json(&trained);
    let cut = &text[..text.len() / 2];
    assert!(matches!(
        model_from_json(cut),
        Err(RegressError::CorruptFile(_))
    ));
}

#[test]
fn newer_format_version_is_refused() {
    let (x, y) = data(40);
    let trained = fit_model(ModelKind::Svr, x.view(), &y, None, &params()).unwrap();
    let mut doc: serde_json::Value = serde_json::from_str(&model_to_json(&trained)).unwrap();
    doc["version"] = serde_json::json!(FORMAT_VERSION + 1);
    match model_from_json(&doc.to_string()) {
        Err(RegressError::FormatVersionMismatch { found, expected }) => {
            assert_eq!(found, FORMAT_VERSION + 1);
            assert_eq!(expected, FORMAT_VERSION);
        }
        other => panic!("expected a version mismatch, got {other:?}"),
    }
}

#[test]
fn wrong_parameter_shape_is_corrupt() {
    let (x, y) = data(40);
    let trained = fit_model(ModelKind::Enet, x.view(), &y, None, &params()).unwrap();
    let mut doc: serde_json::Value = serde_json::from_str(&model_to_json(&trained)).unwrap();
    doc["parameters"]["weights"]["shape"] = serde_json::json!([5]);
    assert!(matches!(
        model_from_json(&doc.to_string()),
        Err(RegressError::CorruptFile(_))
    ));
}

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gpfq::io::{load_model, save_data, save_model};
use gpfq::lab::{gaussian_batch, gaussian_mlp, trial_rng};
use gpfq::network::{layer_errors, output_relative_error, Activation, LayerSpec};
use gpfq::{DataBatch, NetworkModel, QuantizationReport};
use ndarray::{array, Array1, Array2};
use tempfile::TempDir;

fn gpfq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gpfq")).args(args).output().unwrap()
}

fn code(args: &[&str]) -> i32 {
    gpfq(args).status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Self {
        Self { dir: tempfile::tempdir().unwrap() }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn model(&self, name: &str, m: &NetworkModel) -> PathBuf {
        let p = self.path(name);
        save_model(&p, m).unwrap();
        p
    }

    fn data(&self, name: &str, b: &DataBatch) -> PathBuf {
        let p = self.path(name);
        save_data(&p, b).unwrap();
        p
    }

    fn quantize(&self, model: &Path, data: &Path, levels: &str, c: &str) -> (i32, PathBuf, PathBuf) {
        let out = self.path("q.nnqm");
        let report = self.path("q.json");
        let code = code(&[
            "quantize", "--model", s(model), "--data", s(data), "--levels", levels, "--c-alpha", c, "--out",
            s(&out), "--report", s(&report), "--no-timing",
        ]);
        (code, out, report)
    }
}

fn read_report(p: &Path) -> QuantizationReport {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn dense(w: Array2<f32>, b: Array1<f32>) -> LayerSpec {
    LayerSpec::dense(w, b)
}

#[test]
fn missing_data_is_invalid_usage() {
    assert_eq!(code(&["quantize", "--model", "m.nnqm", "--levels", "3", "--c-alpha", "2"]), 2);
    assert_eq!(code(&["--help"]), 0);
}

#[test]
fn fixed_point_model_has_zero_error() {
    let f = Fixture::new();
    // Every weight and bias already lies in {-1, 0, 1} and median |W| = 1.
    let model = NetworkModel::new(
        "fixed",
        vec![3],
        vec![
            dense(array![[1.0, -1.0], [0.0, 1.0], [1.0, 1.0]], array![0.0, 1.0]),
            LayerSpec::Activation(Activation::Relu),
            dense(array![[1.0, -1.0, 1.0], [-1.0, 0.0, 1.0]], array![-1.0, 0.0, 1.0]),
        ],
    )
    .unwrap();
    let batch = gaussian_batch(&mut trial_rng(1, 0), 8, &[3]).unwrap();
    let (c, out, report) = f.quantize(&f.model("m.nnqm", &model), &f.data("x.nnqd", &batch), "3", "1");
    assert_eq!(c, 0);
    let r = read_report(&report);
    assert!(r.layers.iter().all(|l| l.error == 0.0), "{r:?}");
    assert_eq!(r.output_error, 0.0);
    assert_eq!(load_model(out).unwrap().layers, model.layers);
}

#[test]
fn two_step_hand_example() {
    // Neuron (w, b) = (0.5, 0.3) on one sample x = 1, alphabet {-1, 0, 1}:
    // q₁ = Q(0.5) = 1, u = -0.5; q₂ = Q(0.3 - 0.5) = 0, u = -0.2.
    let f = Fixture::new();
    let model = NetworkModel::new("hand", vec![1], vec![dense(array![[0.5]], array![0.3])]).unwrap();
    let batch = DataBatch::new(vec![1], array![[1.0f32]]).unwrap();
    let (c, out, report) = f.quantize(&f.model("m.nnqm", &model), &f.data("x.nnqd", &batch), "3", "2");
    assert_eq!(c, 0);
    let r = read_report(&report);
    assert!((r.layers[0].radius - 1.0).abs() < 1e-12);
    assert!((r.layers[0].error - 0.2).abs() < 1e-6, "{}", r.layers[0].error);
    let q = load_model(out).unwrap();
    assert_eq!(q.layers[0], dense(array![[1.0]], array![0.0]));
}

#[test]
fn zero_weights_are_degenerate() {
    let f = Fixture::new();
    let model = NetworkModel::new("zero", vec![2], vec![dense(Array2::zeros((2, 2)), array![1.0, 1.0])]).unwrap();
    let batch = gaussian_batch(&mut trial_rng(2, 0), 4, &[2]).unwrap();
    let (c, _, _) = f.quantize(&f.model("m.nnqm", &model), &f.data("x.nnqd", &batch), "3", "2");
    assert_eq!(c, 3);
}

#[test]
fn bad_levels_are_invalid() {
    let f = Fixture::new();
    let model = gaussian_mlp(&mut trial_rng(3, 0), 4, &[4]).unwrap();
    let batch = gaussian_batch(&mut trial_rng(3, 1), 4, &[4]).unwrap();
    let (c, _, _) = f.quantize(&f.model("m.nnqm", &model), &f.data("x.nnqd", &batch), "1", "2");
    assert_eq!(c, 2);
}

#[test]
fn eval_reports_accuracy_and_disagreement() {
    let f = Fixture::new();
    let labels = f.path("labels.txt");
    std::fs::write(&labels, "0 1 2 3 4\n5 6 7 8 9\n").unwrap();
    let batch = f.data("x.nnqd", &gaussian_batch(&mut trial_rng(4, 0), 10, &[4]).unwrap());

    // All scores tie, so every sample is assigned class 0.
    let constant = f.model(
        "c.nnqm",
        &NetworkModel::new("constant", vec![4], vec![dense(Array2::zeros((4, 10)), Array1::zeros(10))]).unwrap(),
    );
    let out = gpfq(&["eval", "--model", s(&constant), "--data", s(&batch), "--labels", s(&labels), "--reference", s(&constant)]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["top1"], 0.1);

    let mlp = f.model("mlp.nnqm", &gaussian_mlp(&mut trial_rng(4, 1), 4, &[16, 10]).unwrap());
    let out = gpfq(&["eval", "--model", s(&mlp), "--data", s(&batch), "--labels", s(&labels), "--reference", s(&mlp), "--top-k", "10"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["relative_disagreement"], 0.0);
    assert_eq!(v["top_k"]["accuracy"], 1.0);

    std::fs::write(&labels, "0 1 2").unwrap();
    assert_eq!(code(&["eval", "--model", s(&mlp), "--data", s(&batch), "--labels", s(&labels)]), 2);
}

#[test]
fn report_matches_recomputed_errors() {
    let f = Fixture::new();
    let analog = gaussian_mlp(&mut trial_rng(5, 0), 16, &[64, 32, 10]).unwrap();
    let batch = gaussian_batch(&mut trial_rng(5, 1), 40, &[16]).unwrap();
    let model = f.model("m.nnqm", &analog);
    let data = f.data("x.nnqd", &batch);
    let (c, out, report) = f.quantize(&model, &data, "3", "2");
    assert_eq!(c, 0);
    let r = read_report(&report);
    let quantized = load_model(&out).unwrap();
    let errors = layer_errors(&analog, &quantized, &batch).unwrap();
    assert_eq!(errors.len(), r.layers.len());
    for (e, l) in errors.iter().zip(&r.layers) {
        assert_eq!(e.index, l.index);
        assert!((e.error - l.error).abs() <= 1e-9 * l.error.max(1.0), "{} vs {}", e.error, l.error);
    }
    let rel = output_relative_error(&analog, &quantized, &batch).unwrap();
    assert!((rel - r.output_relative_error).abs() <= 1e-9);

    let labels = f.path("labels.txt");
    std::fs::write(&labels, vec!["3"; 40].join(" ")).unwrap();
    let out = gpfq(&["eval", "--model", s(&out), "--data", s(&data), "--labels", s(&labels), "--reference", s(&model)]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let d = v["relative_disagreement"].as_f64().unwrap();
    assert!((d - r.output_relative_error).abs() <= 1e-9);
}

#[test]
fn theory_exit_codes() {
    assert_eq!(code(&["theory", "--experiment", "special", "--seed", "7"]), 0);
    assert_eq!(code(&["theory", "--experiment", "levelsets", "--seed", "1", "--trials", "500"]), 0);
    assert_eq!(code(&["theory", "--experiment", "decay", "--seed", "0", "--m", "64", "--n-grid", "32,128"]), 2);
    assert_eq!(code(&["theory", "--experiment", "nonsense", "--seed", "0"]), 2);
}

#[test]
fn theory_writes_json_and_csv() {
    let f = Fixture::new();
    let json = f.path("r.json");
    let csv = f.path("r.csv");
    let c = code(&[
        "theory", "--experiment", "generalize", "--seed", "2", "--trials", "20", "--out", s(&json), "--csv", s(&csv),
        "--no-timing",
    ]);
    assert!(c == 0 || c == 1);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert!(v.get("wall_clock_ms").is_none());
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 21);
}

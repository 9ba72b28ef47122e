use gpfq::lab::{gaussian_batch, run_mlp_study, trial_rng, MlpStudy};
use gpfq::network::{layer_errors, output_relative_error, Activation, LayerSpec, Method, Padding};
use gpfq::{quantize_network, NetworkModel, QuantizeParams};
use ndarray::{Array1, Array4};
use rand::Rng;

#[test]
fn gpfq_beats_msq_on_most_seeds() {
    let mut study = MlpStudy::new(&[256, 64, 10]);
    study.input_dim = 64;
    study.intrinsic_dim = 8;
    study.calibration = 64;
    study.validation = 32;
    study.test = 64;
    study.c_grid = vec![2.0];
    study.seeds = (0..10).collect();
    let r = run_mlp_study(&study).unwrap();
    assert!(r.gpfq_wins >= 9, "gpfq won on {} of 10 seeds", r.gpfq_wins);
}

fn small_cnn(seed: u64) -> NetworkModel {
    let mut rng = trial_rng(seed, 0);
    let mut tensor = |n: usize, s: f32| -> Vec<f32> { (0..n).map(|_| rng.random_range(-s..s)).collect() };
    let k1 = Array4::from_shape_vec((3, 3, 2, 6), tensor(108, 0.4)).unwrap();
    let k2 = Array4::from_shape_vec((3, 3, 6, 4), tensor(216, 0.2)).unwrap();
    let dense = ndarray::Array2::from_shape_vec((4 * 4 * 4, 5), tensor(320, 0.1)).unwrap();
    NetworkModel::new(
        "cnn",
        vec![8, 8, 2],
        vec![
            LayerSpec::Conv2d { kernel: k1, bias: Array1::from(tensor(6, 0.1)), stride: 1, padding: Padding::Same },
            LayerSpec::BatchNorm { scale: Array1::from_elem(6, 1.5), shift: Array1::from_elem(6, 0.1) },
            LayerSpec::Activation(Activation::Relu),
            LayerSpec::MaxPool { window: 2, stride: 2 },
            LayerSpec::Conv2d { kernel: k2, bias: Array1::from(tensor(4, 0.1)), stride: 1, padding: Padding::Same },
            LayerSpec::Activation(Activation::Relu),
            LayerSpec::Dropout { rate: 0.25 },
            LayerSpec::dense(dense, Array1::from(tensor(5, 0.1))),
        ],
    )
    .unwrap()
}

#[test]
fn cnn_quantization_reports_every_layer() {
    let model = small_cnn(1);
    let batch = gaussian_batch(&mut trial_rng(1, 1), 16, &[8, 8, 2]).unwrap();
    let (q, report) = quantize_network(&model, &batch, &QuantizeParams::gpfq(3, 2.0)).unwrap();
    assert_eq!(report.method, Method::Gpfq);
    assert_eq!(report.layers.iter().map(|l| l.index).collect::<Vec<_>>(), vec![0, 4, 7]);
    assert_eq!(report.layers[0].data_rows, 16 * 64);
    assert_eq!(report.layers[0].neuron_length, 3 * 3 * 2 + 1);
    let recomputed = layer_errors(&model, &q, &batch).unwrap();
    for (e, l) in recomputed.iter().zip(&report.layers) {
        assert!((e.error - l.error).abs() <= 1e-9 * l.error.max(1.0));
    }
    let (m, _) = quantize_network(&model, &batch, &QuantizeParams::msq(3, 2.0)).unwrap();
    let g = output_relative_error(&model, &q, &batch).unwrap();
    let s = output_relative_error(&model, &m, &batch).unwrap();
    assert!(g < s, "gpfq {g} vs msq {s}");
}

#[test]
fn quantization_is_deterministic_across_pools() {
    let model = small_cnn(2);
    let batch = gaussian_batch(&mut trial_rng(2, 1), 8, &[8, 8, 2]).unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| quantize_network(&model, &batch, &QuantizeParams::gpfq(4, 3.0)).unwrap())
    };
    let (a, ra) = run(1);
    let (b, rb) = run(4);
    assert_eq!(a, b);
    assert_eq!(ra.without_timing(), rb.without_timing());
}

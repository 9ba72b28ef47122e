use gpfq::{
    exhaustive_optimal_quantize, quantize_neuron_first_layer, quantize_neuron_hidden_layer, residual_norm, Alphabet,
    FirstLayerData, QuantizationRunState,
};
use ndarray::Array2;
use proptest::prelude::*;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn alphabet() -> impl Strategy<Value = Alphabet> {
    (2usize..=6, 0.25f64..4.0).prop_map(|(m, r)| Alphabet::new(m, r).unwrap())
}

/// `(alphabet, w, X)` with `X` of shape `m × N` and `|w_t| <= radius`.
fn instance(max_n: usize, max_m: usize) -> impl Strategy<Value = (Alphabet, Vec<f64>, Array2<f64>)> {
    (alphabet(), 1..=max_n, 1..=max_m).prop_flat_map(|(a, n, m)| {
        let r = a.radius();
        (
            Just(a),
            prop::collection::vec(-r..=r, n),
            prop::collection::vec(-3.0f64..3.0, m * n).prop_map(move |v| Array2::from_shape_vec((m, n), v).unwrap()),
        )
    })
}

fn step_cost(u: &[f64], w: f64, y: &[f64], q: f64, yt: &[f64]) -> f64 {
    u.iter()
        .zip(y)
        .zip(yt)
        .map(|((ui, yi), ti)| {
            let v = ui + w * yi - q * ti;
            v * v
        })
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn first_layer_steps_are_greedy_optimal((a, w, x) in instance(12, 6)) {
        let mut state = QuantizationRunState::new(x.nrows());
        for (t, &wt) in w.iter().enumerate() {
            let col = x.column(t).to_vec();
            let u = state.state().to_vec();
            let q = state.step_first_layer(wt, &col, &a);
            let chosen = step_cost(&u, wt, &col, q, &col);
            for &p in a.elements() {
                let c = step_cost(&u, wt, &col, p, &col);
                prop_assert!(chosen <= c + 1e-9 * c.max(1.0), "step {t}: q = {q} costs {chosen}, {p} costs {c}");
            }
        }
    }

    #[test]
    fn hidden_layer_steps_are_greedy_optimal(
        (a, w, y) in instance(10, 5),
        noise in prop::collection::vec(-0.5f64..0.5, 50),
    ) {
        let yt = Array2::from_shape_fn(y.dim(), |(i, j)| y[(i, j)] + noise[(i * y.ncols() + j) % noise.len()]);
        let mut state = QuantizationRunState::new(y.nrows());
        for (t, &wt) in w.iter().enumerate() {
            let (yc, tc) = (y.column(t).to_vec(), yt.column(t).to_vec());
            let u = state.state().to_vec();
            let q = state.step_hidden_layer(wt, &yc, &tc, &a);
            let chosen = step_cost(&u, wt, &yc, q, &tc);
            for &p in a.elements() {
                let c = step_cost(&u, wt, &yc, p, &tc);
                prop_assert!(chosen <= c + 1e-9 * c.max(1.0));
            }
        }
        let r = quantize_neuron_hidden_layer(&w, y.view(), yt.view(), &a).unwrap();
        let resid: Vec<f64> = (0..y.nrows())
            .map(|i| (0..w.len()).map(|t| w[t] * y[(i, t)] - r.q[t] * yt[(i, t)]).sum())
            .collect();
        prop_assert!((dot(&resid, &resid).sqrt() - r.final_error).abs() <= 1e-9 * r.final_error.max(1.0));
    }

    #[test]
    fn state_equals_residual((a, w, x) in instance(40, 8)) {
        let r = quantize_neuron_first_layer(&w, x.view(), &a).unwrap();
        let direct = residual_norm(x.view(), &w, &r.q);
        prop_assert!((direct - r.final_error).abs() <= 1e-9 * direct.max(1.0));
        prop_assert!(r.q.iter().all(|q| a.elements().contains(q)));
        prop_assert!(r.trajectory_sup >= r.final_error);
    }

    #[test]
    fn increments_bounded_by_quarter_step((a, w, x) in instance(40, 8)) {
        let data = FirstLayerData::from_matrix(x.view());
        let trace = data.quantize_traced(&w, &a, true).unwrap().trace.unwrap();
        let step = 2.0 * a.radius() / (a.levels() - 1) as f64;
        for t in 0..w.len() {
            let delta = trace[t + 1] - trace[t];
            let bound = step * step / 4.0 * data.column_norm_sq(t);
            prop_assert!(delta <= bound + 1e-9 * trace[t].max(1.0), "t = {t}: {delta} > {bound}");
        }
    }

    #[test]
    fn codes_invariant_under_data_scaling((a, w, x) in instance(20, 6), k in -4i32..=4) {
        let c = 2f64.powi(k);
        let base = quantize_neuron_first_layer(&w, x.view(), &a).unwrap();
        let scaled = quantize_neuron_first_layer(&w, (&x * c).view(), &a).unwrap();
        prop_assert_eq!(&base.q, &scaled.q);
        prop_assert!((scaled.final_error - c * base.final_error).abs() <= 1e-9 * scaled.final_error.max(1.0));

        // Scaling weights and radius together scales the codes.
        let a2 = Alphabet::new(a.levels(), a.radius() * c).unwrap();
        let w2: Vec<f64> = w.iter().map(|v| v * c).collect();
        let r2 = quantize_neuron_first_layer(&w2, x.view(), &a2).unwrap();
        let expected: Vec<f64> = base.q.iter().map(|v| v * c).collect();
        prop_assert_eq!(r2.q, expected);
    }

    #[test]
    fn greedy_never_beats_the_optimum((a, w, x) in instance(7, 4)) {
        prop_assume!(a.levels() <= 5);
        let greedy = quantize_neuron_first_layer(&w, x.view(), &a).unwrap();
        let opt = exhaustive_optimal_quantize(&w, x.view(), &a).unwrap();
        prop_assert!(greedy.final_error >= opt.error - 1e-9 * opt.error.max(1.0));
        prop_assert!((residual_norm(x.view(), &w, &opt.q) - opt.error).abs() <= 1e-9 * opt.error.max(1.0));
    }

    #[test]
    fn alphabet_rounding_is_nearest(a in alphabet(), v in -10.0f64..10.0) {
        let q = a.quantize(v);
        for &p in a.elements() {
            prop_assert!((v - q).abs() <= (v - p).abs() + 1e-12);
        }
        // Ties go away from zero, so rounding is odd off the origin.
        if v != 0.0 {
            prop_assert_eq!(a.quantize(-v), -q);
        }
    }
}

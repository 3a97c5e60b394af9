use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shotwright_nn::{
    cross_entropy, grad_check, Linear, Mlp, MultiHeadAttention, ParamStore, Tape, Tensor,
};

fn mat(rows: usize, cols: usize, data: &[f64]) -> Tensor {
    Tensor::new(vec![rows, cols], data.to_vec()).unwrap()
}

#[test]
fn linear_identity_and_bias_only() {
    let mut store = ParamStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let layer = Linear::new(&mut store, "l", 3, 3, &mut rng).unwrap();
    store.get_mut(layer.weight).value = mat(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
    let x = mat(2, 3, &[0.5, -1.0, 2.0, 3.0, 0.0, -4.0]);
    let mut tape = Tape::new();
    let input = tape.constant(x.clone());
    let out = layer.forward(&mut tape, &store, input).unwrap();
    assert_eq!(tape.value(out), &x);

    store.get_mut(layer.weight).value = Tensor::zeros(&[3, 3]);
    store.get_mut(layer.bias).value = Tensor::new(vec![3], vec![1.0, 2.0, 3.0]).unwrap();
    let mut tape = Tape::new();
    let input = tape.constant(x);
    let out = layer.forward(&mut tape, &store, input).unwrap();
    for r in 0..2 {
        assert_eq!(tape.value(out).row(r), &[1.0, 2.0, 3.0]);
    }
}

#[test]
fn linear_matches_hand_product() {
    let mut tape = Tape::new();
    let x = tape.constant(mat(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
    let w = tape.constant(mat(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]));
    let b = tape.constant(Tensor::new(vec![2], vec![0.5, -0.5]).unwrap());
    let xw = tape.matmul(x, w).unwrap();
    let out = tape.add_bias(xw, b).unwrap();
    assert_eq!(tape.value(out).data(), &[4.5, 4.5, 10.5, 10.5]);
}

#[test]
fn linear_shape_error_names_both_shapes() {
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::zeros(&[2, 3]));
    let w = tape.constant(Tensor::zeros(&[4, 2]));
    let err = tape.matmul(x, w).unwrap_err().to_string();
    assert!(err.contains("[2, 3]") && err.contains("[4, 2]"), "{err}");
}

#[test]
fn linear_backward_reaches_input_weights_and_bias() {
    let mut store = ParamStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let layer = Linear::new(&mut store, "l", 2, 2, &mut rng).unwrap();
    let mut tape = Tape::new();
    let x = tape.constant(mat(1, 2, &[1.0, 2.0]));
    let y = layer.forward(&mut tape, &store, x).unwrap();
    let loss = tape.half_squared_error(y, &Tensor::zeros(&[1, 2])).unwrap();
    let grads = tape.gradients(loss).unwrap();
    assert!(grads.get(x).is_some());
    tape.backward(loss, &mut store).unwrap();
    assert!(store.get(layer.weight).grad.data().iter().any(|g| *g != 0.0));
    assert!(store.get(layer.bias).grad.data().iter().any(|g| *g != 0.0));
}

#[test]
fn layer_norm_examples() {
    let mut tape = Tape::new();
    let gain = tape.constant(Tensor::filled(&[2], 1.0));
    let shift = tape.constant(Tensor::zeros(&[2]));
    let x = tape.constant(mat(2, 2, &[3.0, 3.0, 1.0, -1.0]));
    let y = tape.layer_norm(x, gain, shift, 1e-12).unwrap();
    let v = tape.value(y).data();
    assert_eq!(&v[..2], &[0.0, 0.0]);
    assert!((v[2] - 1.0).abs() < 1e-9 && (v[3] + 1.0).abs() < 1e-9);
}

#[test]
fn layer_norm_row_mean_equals_shift_mean() {
    let mut tape = Tape::new();
    let gain = tape.constant(Tensor::filled(&[4], 1.0));
    let shift_vals = [0.3, -1.0, 2.0, 0.1];
    let shift = tape.constant(Tensor::new(vec![4], shift_vals.to_vec()).unwrap());
    let x = tape.constant(mat(2, 4, &[1.0, 5.0, -2.0, 0.5, 9.0, 9.5, 8.0, -3.0]));
    let y = tape.layer_norm(x, gain, shift, 1e-5).unwrap();
    let target = shift_vals.iter().sum::<f64>() / 4.0;
    for r in 0..2 {
        let mean = tape.value(y).row(r).iter().sum::<f64>() / 4.0;
        assert!((mean - target).abs() < 1e-6);
    }
}

#[test]
fn layer_norm_rejects_width_one() {
    let mut tape = Tape::new();
    let g = tape.constant(Tensor::filled(&[1], 1.0));
    let s = tape.constant(Tensor::zeros(&[1]));
    let x = tape.constant(Tensor::zeros(&[3, 1]));
    assert!(tape.layer_norm(x, g, s, 1e-5).is_err());
}

#[test]
fn attention_two_tokens_by_hand() {
    let mut tape = Tape::new();
    let tokens = tape.constant(mat(2, 2, &[1.0, 0.0, 0.0, 1.0]));
    let out = tape.attention(tokens, tokens, tokens, 2, 1).unwrap();
    // Scores: q_i . k_j / sqrt(2); the matching key scores 1/sqrt(2), the other 0.
    let s = (1.0f64 / 2f64.sqrt()).exp();
    let w_same = s / (s + 1.0);
    let w_other = 1.0 / (s + 1.0);
    let expected = [w_same, w_other, w_other, w_same];
    for (a, b) in tape.value(out).data().iter().zip(expected) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn attention_rows_are_distributions() {
    let mut store = ParamStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mha = MultiHeadAttention::new(&mut store, "a", 8, 2, &mut rng).unwrap();
    let data: Vec<f64> = (0..3 * 5 * 8).map(|i| ((i * 37 % 11) as f64 - 5.0) / 3.0).collect();
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::new(vec![15, 8], data).unwrap());
    let q = mha.query.forward(&mut tape, &store, x).unwrap();
    let k = mha.key.forward(&mut tape, &store, x).unwrap();
    let v = mha.value.forward(&mut tape, &store, x).unwrap();
    let att = tape.attention(q, k, v, 5, 2).unwrap();
    let weights = tape.attention_weights(att).unwrap();
    for row in weights.chunks(5) {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }
}

#[test]
fn attention_single_token_is_linear_in_the_token() {
    // With one token every attention weight is 1, so the block reduces to
    // output(value(x)), an affine map: f(2x) - f(0) = 2 (f(x) - f(0)).
    let mut store = ParamStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mha = MultiHeadAttention::new(&mut store, "a", 4, 2, &mut rng).unwrap();
    for p in store.iter_mut() {
        if p.name.ends_with("bias") {
            p.value.data_mut().iter_mut().enumerate().for_each(|(i, v)| *v = 0.1 * i as f64);
        }
    }
    let run = |x: [f64; 4]| {
        let mut tape = Tape::new();
        let t = tape.constant(mat(1, 4, &x));
        let y = mha.forward(&mut tape, &store, t, 1).unwrap();
        tape.value(y).data().to_vec()
    };
    let x = [0.3, -1.2, 0.7, 2.0];
    let f0 = run([0.0; 4]);
    let f1 = run(x);
    let f2 = run(x.map(|v| 2.0 * v));
    for i in 0..4 {
        assert!(((f2[i] - f0[i]) - 2.0 * (f1[i] - f0[i])).abs() < 1e-12);
    }
}

#[test]
fn attention_requires_divisible_width() {
    let mut store = ParamStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    assert!(MultiHeadAttention::new(&mut store, "a", 6, 4, &mut rng).is_err());
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::zeros(&[2, 6]));
    assert!(tape.attention(x, x, x, 2, 4).is_err());
}

#[test]
fn cross_entropy_examples() {
    let uniform = mat(1, 4, &[0.0; 4]);
    assert!((cross_entropy(&uniform, &[2]).unwrap() - 4f64.ln()).abs() < 1e-12);
    let confident = mat(1, 3, &[500.0, 0.0, 0.0]);
    assert!(cross_entropy(&confident, &[0]).unwrap() < 1e-12);
    let two = mat(1, 2, &[1.0, 0.0]);
    assert!((cross_entropy(&two, &[0]).unwrap() - 0.3133).abs() < 1e-3);
    assert!(cross_entropy(&two, &[2]).is_err());

    let mut tape = Tape::new();
    let l = tape.constant(two);
    let loss = tape.cross_entropy(l, &[0]).unwrap();
    assert!((tape.value(loss).item() - (1.0 + (-1.0f64).exp()).ln()).abs() < 1e-12);
    assert!(tape.cross_entropy(l, &[5]).is_err());
}

#[test]
fn grad_check_linear_cross_entropy() {
    let mut store = ParamStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let layer = Linear::new(&mut store, "l", 5, 4, &mut rng).unwrap();
    let x = mat(3, 5, &[0.1, -0.4, 1.0, 0.3, 0.2, -1.0, 0.5, 0.0, 0.7, -0.2, 0.9, 0.9, -0.3, 0.1, 0.4]);
    let report = grad_check(&mut store, 1e-4, None, &mut rng, |tape, store| {
        let input = tape.constant(x.clone());
        let logits = layer.forward(tape, store, input)?;
        tape.cross_entropy(logits, &[0, 3, 1])
    })
    .unwrap();
    assert_eq!(report.coordinates_checked, 24);
    assert!(report.max_relative_error < 1e-4, "{report:?}");
}

#[test]
fn grad_check_without_parameters_is_vacuous() {
    let mut store = ParamStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let report = grad_check(&mut store, 1e-4, None, &mut rng, |tape, _| {
        let c = tape.constant(Tensor::scalar(2.0));
        Ok(tape.scale(c, 3.0))
    })
    .unwrap();
    assert_eq!(report.coordinates_checked, 0);
    assert_eq!(report.max_relative_error, 0.0);
}

#[test]
fn forward_is_deterministic() {
    let mut store = ParamStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mlp = Mlp::new(&mut store, "m", &[6, 16, 3], &mut rng).unwrap();
    let run = || {
        let mut tape = Tape::new();
        let x = tape.constant(mat(2, 6, &[0.5; 12]));
        let y = mlp.forward(&mut tape, &store, x).unwrap();
        tape.value(y).clone()
    };
    assert_eq!(run(), run());
}

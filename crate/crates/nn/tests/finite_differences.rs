//! Every differentiable op against central differences on random small shapes.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shotwright_nn::{grad_check, ParamId, ParamStore, Tape, Tensor, TransformerBlock};

const TOL: f64 = 1e-4;
const STEP: f64 = 1e-5;

fn random(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-scale..scale)).collect()).unwrap()
}

fn add(store: &mut ParamStore, rng: &mut ChaCha8Rng, name: &str, shape: &[usize]) -> ParamId {
    let t = random(rng, shape, 1.0);
    store.add(name, t).unwrap()
}

fn check(store: &mut ParamStore, rng: &mut ChaCha8Rng, f: impl Fn(&mut Tape, &ParamStore) -> shotwright_nn::Result<shotwright_nn::Var>) -> f64 {
    grad_check(store, STEP, None, rng, f).unwrap().max_relative_error
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn matmul_bias(m in 1usize..4, k in 1usize..5, n in 1usize..4, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let a = add(&mut store, &mut rng, "a", &[m, k]);
        let b = add(&mut store, &mut rng, "b", &[k, n]);
        let c = add(&mut store, &mut rng, "c", &[n]);
        let target = random(&mut rng, &[m, n], 1.0);
        let err = check(&mut store, &mut rng, |t, s| {
            let (a, b, c) = (t.param(s, a), t.param(s, b), t.param(s, c));
            let ab = t.matmul(a, b)?;
            let y = t.add_bias(ab, c)?;
            t.half_squared_error(y, &target)
        });
        prop_assert!(err < TOL, "{}", err);
    }

    #[test]
    fn gelu_add_scale_sum(m in 1usize..4, n in 1usize..5, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let a = add(&mut store, &mut rng, "a", &[m, n]);
        let b = add(&mut store, &mut rng, "b", &[m, n]);
        let target = random(&mut rng, &[m, n], 1.0);
        let err = check(&mut store, &mut rng, |t, s| {
            let (a, b) = (t.param(s, a), t.param(s, b));
            let g = t.gelu(a);
            let y = t.add(g, b)?;
            let l1 = t.half_squared_error(y, &target)?;
            let l2 = t.scale(l1, -0.7);
            let l3 = t.half_squared_error(g, &target)?;
            t.sum(&[l2, l3, l1])
        });
        prop_assert!(err < TOL, "{}", err);
    }

    #[test]
    fn layer_norm(m in 1usize..4, d in 2usize..6, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let x = add(&mut store, &mut rng, "x", &[m, d]);
        let g = add(&mut store, &mut rng, "g", &[d]);
        let s_ = add(&mut store, &mut rng, "s", &[d]);
        let target = random(&mut rng, &[m, d], 1.0);
        let err = check(&mut store, &mut rng, |t, s| {
            let (x, g, sh) = (t.param(s, x), t.param(s, g), t.param(s, s_));
            let y = t.layer_norm(x, g, sh, 1e-5)?;
            t.half_squared_error(y, &target)
        });
        prop_assert!(err < TOL, "{}", err);
    }

    #[test]
    fn attention(batch in 1usize..3, seq in 1usize..4, heads in 1usize..3, dh in 1usize..3, seed in any::<u64>()) {
        let d = heads * dh;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let q = add(&mut store, &mut rng, "q", &[batch * seq, d]);
        let k = add(&mut store, &mut rng, "k", &[batch * seq, d]);
        let v = add(&mut store, &mut rng, "v", &[batch * seq, d]);
        let target = random(&mut rng, &[batch * seq, d], 1.0);
        let err = check(&mut store, &mut rng, |t, s| {
            let (q, k, v) = (t.param(s, q), t.param(s, k), t.param(s, v));
            let y = t.attention(q, k, v, seq, heads)?;
            t.half_squared_error(y, &target)
        });
        prop_assert!(err < TOL, "{}", err);
    }

    #[test]
    fn tokens_and_rows(batch in 1usize..3, n in 1usize..4, d in 1usize..4, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let shots = add(&mut store, &mut rng, "shots", &[batch * n, d]);
        let cls = add(&mut store, &mut rng, "cls", &[d]);
        let pos = add(&mut store, &mut rng, "pos", &[n + 1, d]);
        let target = random(&mut rng, &[batch, d], 1.0);
        let target_all = random(&mut rng, &[batch * (n + 1), d], 1.0);
        let err = check(&mut store, &mut rng, |t, s| {
            let (a, b, c) = (t.param(s, shots), t.param(s, cls), t.param(s, pos));
            let tokens = t.assemble_tokens(a, b, c, n)?;
            let first = t.select_rows(tokens, n + 1, 0)?;
            let l1 = t.half_squared_error(first, &target)?;
            let l2 = t.half_squared_error(tokens, &target_all)?;
            t.sum(&[l1, l2])
        });
        prop_assert!(err < TOL, "{}", err);
    }

    #[test]
    fn weighted_nll(rows in 1usize..4, classes in 2usize..6, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let logits = add(&mut store, &mut rng, "logits", &[rows, classes]);
        let targets: Vec<usize> = (0..rows).map(|_| rng.random_range(0..classes)).collect();
        let weights: Vec<f64> = (0..rows).map(|_| rng.random_range(-2.0..2.0)).collect();
        let err = check(&mut store, &mut rng, |t, s| {
            let l = t.param(s, logits);
            t.weighted_nll(l, &targets, &weights)
        });
        prop_assert!(err < TOL, "{}", err);
    }
}

#[test]
fn transformer_block_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut store = ParamStore::new();
    let block = TransformerBlock::new(&mut store, "b", 8, 2, 12, &mut rng).unwrap();
    let x = random(&mut rng, &[10, 8], 1.0);
    let target = random(&mut rng, &[10, 8], 1.0);
    let report = grad_check(&mut store, STEP, Some(6), &mut rng, |t, s| {
        let input = t.constant(x.clone());
        let y = block.forward(t, s, input, 5)?;
        t.half_squared_error(y, &target)
    })
    .unwrap();
    assert!(report.max_relative_error < TOL, "{report:?}");
}

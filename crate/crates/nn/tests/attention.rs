use dcap_nn::{grad_check, mha, mha_with_weights, Graph, MhaParams, ParamStore, Tensor};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rand_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    Tensor::matrix(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

/// Scalar-loop multi-head attention written directly from the definition.
fn naive_mha(store: &ParamStore, p: &MhaParams, q: &Tensor, k: &Tensor, v: &Tensor) -> Vec<f64> {
    let (nq, d) = q.dims2();
    let nk = k.dims2().0;
    let proj = |x: &Tensor, l: &dcap_nn::Linear| -> Vec<f64> {
        let rows = x.dims2().0;
        let w = store.get(l.w).values();
        let b = store.get(l.b).values();
        let mut out = vec![0.0; rows * d];
        for r in 0..rows {
            for j in 0..d {
                let mut s = b[j];
                for i in 0..d {
                    s += x.values()[r * d + i] * w[i * d + j];
                }
                out[r * d + j] = s;
            }
        }
        out
    };
    let qp = proj(q, &p.q);
    let kp = proj(k, &p.k);
    let vp = proj(v, &p.v);
    let dh = d / p.heads;
    let mut concat = vec![0.0; nq * d];
    for h in 0..p.heads {
        for a in 0..nq {
            let mut logits = vec![0.0; nk];
            for (b, l) in logits.iter_mut().enumerate() {
                for c in 0..dh {
                    *l += qp[a * d + h * dh + c] * kp[b * d + h * dh + c];
                }
                *l /= (dh as f64).sqrt();
            }
            let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
            let z: f64 = e.iter().sum();
            for c in 0..dh {
                let mut s = 0.0;
                for b in 0..nk {
                    s += e[b] / z * vp[b * d + h * dh + c];
                }
                concat[a * d + h * dh + c] = s;
            }
        }
    }
    let ct = Tensor::matrix(nq, d, concat).unwrap();
    proj(&ct, &p.o)
}

fn run_mha(store: &ParamStore, p: &MhaParams, q: &Tensor, k: &Tensor, v: &Tensor) -> Vec<f64> {
    let mut g = Graph::new(store);
    let (qv, kv, vv) = (g.constant(q), g.constant(k), g.constant(v));
    let out = mha(&mut g, p, qv, kv, vv).unwrap();
    g.value(out).to_vec()
}

#[test]
fn matches_scalar_loop_oracle_on_seeded_shapes() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for &(nq, nk, d, heads) in &[(1, 1, 2, 1), (1, 2, 2, 1), (2, 3, 4, 1), (4, 8, 16, 1), (4, 8, 16, 4), (3, 5, 8, 2)] {
        let mut store = ParamStore::new();
        let p = MhaParams::register(&mut store, "att", d, heads, &mut rng).unwrap();
        let q = rand_matrix(&mut rng, nq, d);
        let k = rand_matrix(&mut rng, nk, d);
        let v = rand_matrix(&mut rng, nk, d);
        let got = run_mha(&store, &p, &q, &k, &v);
        let want = naive_mha(&store, &p, &q, &k, &v);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-6, "({nq},{nk},{d},{heads}): {a} vs {b}");
        }
    }
}

/// Identity projections with zero bias, so the arithmetic can be written out.
fn identity_params(d: usize, heads: usize, logit_gain: f64) -> (ParamStore, MhaParams) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut store = ParamStore::new();
    let p = MhaParams::register(&mut store, "att", d, heads, &mut rng).unwrap();
    let mut eye = vec![0.0; d * d];
    for i in 0..d {
        eye[i * d + i] = 1.0;
    }
    let gained: Vec<f64> = eye.iter().map(|v| v * logit_gain).collect();
    store.set_values(p.q.w, &gained).unwrap();
    for l in [p.k, p.v, p.o] {
        store.set_values(l.w, &eye).unwrap();
    }
    (store, p)
}

#[test]
fn single_head_hand_case() {
    // q = (1, 0); keys (1, 0) and (0, 1); values (2, 0) and (0, 4).
    // logits = (1, 0) / sqrt(2); weights = softmax; output = w0*(2,0) + w1*(0,4).
    let (store, p) = identity_params(2, 1, 1.0);
    let q = Tensor::row(vec![1.0, 0.0]);
    let k = Tensor::matrix(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
    let v = Tensor::matrix(2, 2, vec![2.0, 0.0, 0.0, 4.0]).unwrap();
    let got = run_mha(&store, &p, &q, &k, &v);
    let l0 = 1.0 / 2f64.sqrt();
    let w0 = l0.exp() / (l0.exp() + 1.0);
    let w1 = 1.0 - w0;
    assert!((got[0] - 2.0 * w0).abs() < 1e-9);
    assert!((got[1] - 4.0 * w1).abs() < 1e-9);
}

#[test]
fn saturated_logits_select_matching_value() {
    let (store, p) = identity_params(4, 1, 50.0);
    let q = Tensor::row(vec![1.0, 0.0, 0.0, 0.0]);
    let k = Tensor::matrix(3, 4, vec![0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
    let v = Tensor::matrix(3, 4, vec![9.0, 9.0, 9.0, 9.0, 0.5, -1.5, 2.0, 3.0, -7.0, 7.0, -7.0, 7.0]).unwrap();
    let got = run_mha(&store, &p, &q, &k, &v);
    for (a, b) in got.iter().zip([0.5, -1.5, 2.0, 3.0]) {
        assert!((a - b).abs() < 1e-3, "{a} vs {b}");
    }
}

#[test]
fn attention_rows_sum_to_one_per_head() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut store = ParamStore::new();
    let p = MhaParams::register(&mut store, "att", 8, 4, &mut rng).unwrap();
    let q = rand_matrix(&mut rng, 2, 8);
    let k = rand_matrix(&mut rng, 6, 8);
    let mut g = Graph::new(&store);
    let (qv, kv) = (g.constant(&q), g.constant(&k));
    let (_, weights) = mha_with_weights(&mut g, &p, qv, kv, kv).unwrap();
    assert_eq!(weights.len(), 4);
    for w in weights {
        for row in g.value(w).chunks(6) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn mha_gradients_match_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut store = ParamStore::new();
    let p = MhaParams::register(&mut store, "att", 8, 2, &mut rng).unwrap();
    let q = rand_matrix(&mut rng, 2, 8);
    let kv = rand_matrix(&mut rng, 5, 8);
    let report = grad_check(
        &mut store,
        |g| {
            let qv = g.constant(&q);
            let kvv = g.constant(&kv);
            let out = mha(g, &p, qv, kvv, kvv)?;
            let t = g.tanh(out)?;
            let sq = g.mul(t, out)?;
            g.sum(sq)
        },
        1e-4,
        300,
        3,
    )
    .unwrap();
    assert!(report.coords_checked >= 200);
    assert!(report.max_rel_error < 1e-5, "{report:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn permuting_key_value_pairs_leaves_output(seed in any::<u64>(), nk in 2usize..7, shift in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let p = MhaParams::register(&mut store, "att", 8, 2, &mut rng).unwrap();
        let q = rand_matrix(&mut rng, 3, 8);
        let k = rand_matrix(&mut rng, nk, 8);
        let v = rand_matrix(&mut rng, nk, 8);
        let rotate = |t: &Tensor| {
            let rows: Vec<&[f64]> = t.values().chunks(8).collect();
            let vals: Vec<f64> = (0..nk).flat_map(|i| rows[(i + shift) % nk].to_vec()).collect();
            Tensor::matrix(nk, 8, vals).unwrap()
        };
        let a = run_mha(&store, &p, &q, &k, &v);
        let b = run_mha(&store, &p, &q, &rotate(&k), &rotate(&v));
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uisum_core::autograd::{Graph, ParamStore};
use uisum_core::features::{ElementFeatures, ScreenFeatures, CROP_SIZE};
use uisum_core::model::{tiny_config, ModelConfig, Summarizer, TargetSequence};
use uisum_core::tensor::Tensor;
use uisum_core::vocab::{END, START};
use uisum_core::Error;

fn random_features(c: &ModelConfig, n: usize, seed: u64) -> ScreenFeatures {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let elements = (0..n)
        .map(|i| ElementFeatures {
            class_id: rng.random_range(0..c.num_classes as u32),
            clickable: rng.random(),
            spatial: [0; 4].map(|_| rng.random_range(0..c.num_buckets as u32)),
            pre_order: (i as u32).min(c.max_position as u32 - 1),
            post_order: rng.random_range(0..c.max_position as u32),
            depth: rng.random_range(0..c.max_position as u32),
            text_embedding: (0..c.word_dim).map(|_| rng.random_range(-0.5..0.5)).collect(),
            text_tokens: vec![],
            image_crop: (0..CROP_SIZE * CROP_SIZE).map(|_| rng.random::<f32>()).collect(),
            degenerate: false,
        })
        .collect();
    ScreenFeatures {
        screen_id: format!("s{seed}"),
        elements,
        app_desc_embedding: (0..c.word_dim).map(|_| rng.random_range(-0.5..0.5)).collect(),
        has_app_description: true,
        truncated: 0,
    }
}

fn batch_loss_value(model: &Summarizer, store: &ParamStore, f: &ScreenFeatures, t: &TargetSequence) -> f64 {
    let mut g = Graph::training(store, ChaCha8Rng::seed_from_u64(0));
    let (l, _, _) = model.batch_loss(&mut g, &[f], &[t]).unwrap();
    g.value(l).item()
}

#[test]
fn gradient_check_tiny_config() {
    let c = tiny_config(11, 6);
    assert_eq!((c.hidden_size, c.num_layers, c.num_heads, c.vocab_size), (8, 1, 1, 11));
    let model = Summarizer::new(c.clone(), 7).unwrap();
    let f = random_features(&c, 2, 1);
    let t = TargetSequence {
        input: vec![START as usize, 5, 7, 9],
        target: vec![5, 7, 9, END as usize],
    };
    let grads = {
        let mut g = Graph::training(model.params(), ChaCha8Rng::seed_from_u64(0));
        let (l, _, _) = model.batch_loss(&mut g, &[&f], &[&t]).unwrap();
        g.backward(l)
    };
    let mut store = model.params().clone();
    let ids: Vec<_> = store.ids().collect();
    let eps = 1e-6;
    let mut worst: f64 = 0.0;
    let mut groups = 0;
    for id in ids {
        if !store.param(id).trainable {
            continue;
        }
        groups += 1;
        let n = store.get(id).len();
        let analytic: Vec<f64> = grads
            .get(id)
            .map(|g| g.data().to_vec())
            .unwrap_or_else(|| vec![0.0; n]);
        let mut numeric = vec![0.0; n];
        for i in 0..n {
            let orig = store.get(id).data()[i];
            store.get_mut(id).data_mut()[i] = orig + eps;
            let up = batch_loss_value(&model, &store, &f, &t);
            store.get_mut(id).data_mut()[i] = orig - eps;
            let down = batch_loss_value(&model, &store, &f, &t);
            store.get_mut(id).data_mut()[i] = orig;
            numeric[i] = (up - down) / (2.0 * eps);
        }
        let diff: f64 = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let na: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
        let nn: f64 = numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
        let scale = na.max(nn);
        let rel = if scale < 1e-9 { diff } else { diff / scale };
        assert!(
            rel < 1e-4,
            "{}: relative error {rel:.3e} (|analytic| {na:.3e}, |numeric| {nn:.3e})",
            store.param(id).name
        );
        worst = worst.max(rel);
    }
    assert!(groups > 30, "only {groups} parameter groups checked");
    eprintln!("worst relative gradient error over {groups} groups: {worst:.3e}");
}

#[test]
fn default_shapes() {
    let c = ModelConfig {
        vocab_size: 50,
        ..ModelConfig::default()
    };
    let model = Summarizer::new(c.clone(), 0).unwrap();
    let f = random_features(&c, 5, 3);
    let mut g = Graph::inference(model.params());
    let x = model.embed_elements(&mut g, &f).unwrap();
    assert_eq!(g.shape(x), &[6, 128]);
    let s = model.encode_structure(&mut g, x, None).unwrap();
    assert_eq!(g.shape(s), &[6, 128]);
    let crops = Summarizer::crops_tensor(&[&f]);
    let img = model.encode_images(&mut g, &crops).unwrap();
    assert_eq!(g.shape(img), &[5, 128]);
    let fused = model.fuse(&mut g, s, Some(img)).unwrap();
    assert_eq!(g.shape(fused), &[6, 256]);
    assert_eq!(c.derived_flatten_size(), 256);
    let logits = model.decode_logits(&mut g, fused, &[START as usize]).unwrap();
    assert_eq!(g.shape(logits), &[1, 50]);
}

#[test]
fn fused_rows_split_back_into_inputs() {
    let c = tiny_config(11, 6);
    let model = Summarizer::new(c.clone(), 0).unwrap();
    let mut g = Graph::inference(model.params());
    let s = g.constant(Tensor::from_vec(&[3, 8], (0..24).map(|i| i as f64).collect()));
    let i = g.constant(Tensor::from_vec(&[2, 4], (0..8).map(|i| -(i as f64)).collect()));
    let fused = model.fuse(&mut g, s, Some(i)).unwrap();
    let v = g.value(fused).clone();
    assert_eq!(v.shape(), &[3, 12]);
    for r in 0..3 {
        assert_eq!(&v.row(r)[..8], g.value(s).row(r));
    }
    for r in 0..2 {
        assert_eq!(&v.row(r)[8..], g.value(i).row(r));
    }
    assert!(v.row(2)[8..].iter().all(|&x| x == 0.0));
    let bad = g.constant(Tensor::zeros(&[3, 4]));
    assert!(matches!(model.fuse(&mut g, s, Some(bad)), Err(Error::Shape(_))));
}

#[test]
fn embedding_contracts() {
    let c = tiny_config(11, 6);
    let model = Summarizer::new(c.clone(), 0).unwrap();
    let mut f = random_features(&c, 2, 5);
    f.elements[1] = f.elements[0].clone();
    let mut g = Graph::inference(model.params());
    let x = model.embed_elements(&mut g, &f).unwrap();
    let v = g.value(x);
    assert_eq!(v.row(0), v.row(1));

    let mut zeroed = model.clone();
    let ids: Vec<_> = zeroed.params().ids().collect();
    for id in ids {
        zeroed.params_mut().get_mut(id).data_mut().fill(0.0);
    }
    let mut g = Graph::inference(zeroed.params());
    let x = zeroed.embed_elements(&mut g, &f).unwrap();
    assert!(g.value(x).data().iter().all(|&v| v == 0.0));

    let mut bad = f.clone();
    bad.elements[0].class_id = c.num_classes as u32;
    let mut g = Graph::inference(model.params());
    assert!(matches!(model.embed_elements(&mut g, &bad), Err(Error::Index { .. })));
}

#[test]
fn encoder_is_permutation_equivariant() {
    let c = tiny_config(11, 6);
    let model = Summarizer::new(c.clone(), 2).unwrap();
    let f = random_features(&c, 3, 9);
    let perm = [2usize, 0, 1, 3];
    let mut permuted = f.clone();
    permuted.elements = perm[..3].iter().map(|&i| f.elements[i].clone()).collect();
    let run = |f: &ScreenFeatures| {
        let mut g = Graph::inference(model.params());
        let x = model.embed_elements(&mut g, f).unwrap();
        let y = model.encode_structure(&mut g, x, None).unwrap();
        g.value(y).clone()
    };
    let a = run(&f);
    let b = run(&permuted);
    for (new_row, &old_row) in perm.iter().enumerate() {
        for (x, y) in b.row(new_row).iter().zip(a.row(old_row)) {
            assert!((x - y).abs() < 1e-9);
        }
    }
}

#[test]
fn padding_rows_are_masked() {
    let c = tiny_config(11, 6);
    let model = Summarizer::new(c.clone(), 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut x: Vec<f64> = (0..5 * 8).map(|_| rng.random_range(-1.0..1.0)).collect();
    let valid = [true, true, true, false, false];
    let run = |x: &[f64]| {
        let mut g = Graph::inference(model.params());
        let xv = g.constant(Tensor::from_vec(&[5, 8], x.to_vec()));
        let y = model.encode_structure(&mut g, xv, Some(&valid)).unwrap();
        g.value(y).clone()
    };
    let a = run(&x);
    for v in &mut x[24..] {
        *v = rng.random_range(-10.0..10.0);
    }
    let b = run(&x);
    for r in 0..3 {
        for (p, q) in a.row(r).iter().zip(b.row(r)) {
            assert!((p - q).abs() <= 1e-6);
        }
    }
}

#[test]
fn decoder_is_causal() {
    let c = tiny_config(11, 6);
    let model = Summarizer::new(c.clone(), 5).unwrap();
    let f = random_features(&c, 3, 2);
    let memory = model.encode(&f).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let len = rng.random_range(2..=c.max_decode_len);
        let mut prefix: Vec<usize> = vec![START as usize];
        prefix.extend((1..len).map(|_| rng.random_range(3..11)));
        let logits = |p: &[usize]| {
            let mut g = Graph::inference(model.params());
            let m = g.constant(memory.clone());
            let l = model.decode_logits(&mut g, m, p).unwrap();
            g.value(l).clone()
        };
        let a = logits(&prefix);
        let j = rng.random_range(1..len);
        let mut changed = prefix.clone();
        changed[j] = 3 + (changed[j] - 3 + 1) % 8;
        let b = logits(&changed);
        for i in 0..j {
            for (x, y) in a.row(i).iter().zip(b.row(i)) {
                assert!((x - y).abs() <= 1e-6, "row {i} changed after editing position {j}");
            }
        }
        for r in 0..a.rows() {
            let p: f64 = uisum_core::math::log_softmax(a.row(r)).iter().map(|v| v.exp()).sum();
            assert!((p - 1.0).abs() < 1e-6);
        }
    }
}

#[test]
fn logits_depend_on_memory() {
    let c = tiny_config(11, 6);
    let model = Summarizer::new(c.clone(), 5).unwrap();
    let memory = model.encode(&random_features(&c, 3, 2)).unwrap();
    let mut perturbed = memory.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for v in perturbed.data_mut() {
        *v += rng.random_range(-0.5..0.5);
    }
    let prefix = [START as usize, 4, 5];
    let a = model.next_log_probs(&memory, &prefix).unwrap();
    let b = model.next_log_probs(&perturbed, &prefix).unwrap();
    let d: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum();
    assert!(d > 0.0);
}

#[test]
fn inference_is_deterministic() {
    let c = tiny_config(11, 6);
    let model = Summarizer::new(c.clone(), 5).unwrap();
    let f = random_features(&c, 4, 2);
    let a = model.encode(&f).unwrap();
    let b = model.encode(&f).unwrap();
    assert_eq!(a, b);
    let p = [START as usize, 4];
    assert_eq!(model.next_log_probs(&a, &p).unwrap(), model.next_log_probs(&b, &p).unwrap());
}

#[test]
fn identical_crops_encode_identically() {
    let c = tiny_config(11, 6);
    let model = Summarizer::new(c.clone(), 5).unwrap();
    let mut f = random_features(&c, 3, 2);
    f.elements[1].image_crop = f.elements[0].image_crop.clone();
    f.elements[2].image_crop = f.elements[0].image_crop.clone();
    let mut g = Graph::inference(model.params());
    let img = model.encode_images(&mut g, &Summarizer::crops_tensor(&[&f])).unwrap();
    let v = g.value(img);
    assert_eq!(v.shape(), &[3, c.image_encoding_size]);
    assert_eq!(v.row(0), v.row(1));
    assert_eq!(v.row(0), v.row(2));
}

#[test]
fn single_row_encoding_is_finite() {
    let c = ModelConfig {
        vocab_size: 20,
        ..ModelConfig::default()
    };
    let model = Summarizer::new(c.clone(), 1).unwrap();
    let f = random_features(&c, 0, 1);
    let mut g = Graph::inference(model.params());
    let x = model.embed_elements(&mut g, &f).unwrap();
    let y = model.encode_structure(&mut g, x, None).unwrap();
    assert_eq!(g.shape(y), &[1, 128]);
    assert!(g.value(y).is_finite());
}

#[test]
fn loss_matches_hand_oracle() {
    let c = ModelConfig {
        vocab_size: 5,
        ..tiny_config(5, 6)
    };
    let model = Summarizer::new(c, 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let logits: Vec<f64> = (0..15).map(|_| rng.random_range(-3.0..3.0)).collect();
    let target = [3usize, 1, 4];
    let mut want = 0.0;
    for (r, &y) in target.iter().enumerate() {
        let row = &logits[r * 5..(r + 1) * 5];
        let z: f64 = row.iter().map(|v| v.exp()).sum();
        want += -(row[y].exp() / z).ln();
    }
    want /= 3.0;
    let mut g = Graph::inference(model.params());
    let l = g.constant(Tensor::from_vec(&[3, 5], logits));
    let loss = model.loss(&mut g, l, &target).unwrap();
    assert!((g.value(loss).item() - want).abs() <= 1e-6);

    let mut sharp = vec![0.0; 15];
    for (r, &y) in target.iter().enumerate() {
        sharp[r * 5 + y] = 100.0;
    }
    let l = g.constant(Tensor::from_vec(&[3, 5], sharp));
    let loss = model.loss(&mut g, l, &target).unwrap();
    assert!(g.value(loss).item() < 1e-30);

    let l = g.constant(Tensor::zeros(&[1, 5]));
    assert!(matches!(model.loss(&mut g, l, &[5]), Err(Error::Index { .. })));
}

#[test]
fn pad_targets_are_excluded() {
    let c = tiny_config(11, 6);
    let model = Summarizer::new(c, 0).unwrap();
    let mut g = Graph::inference(model.params());
    let logits = g.constant(Tensor::from_vec(&[2, 11], (0..22).map(|i| (i as f64).sin()).collect()));
    let one = model.loss(&mut g, logits, &[4, 0]).unwrap();
    let first = g.slice_rows(logits, 0, 1);
    let alone = model.loss(&mut g, first, &[4]).unwrap();
    assert!((g.value(one).item() - g.value(alone).item()).abs() < 1e-12);
}

#[test]
fn prefix_longer_than_limit_is_rejected() {
    let c = tiny_config(11, 6);
    let model = Summarizer::new(c.clone(), 0).unwrap();
    let memory = model.encode(&random_features(&c, 1, 1)).unwrap();
    let prefix = vec![START as usize; c.max_decode_len + 1];
    assert!(matches!(model.next_log_probs(&memory, &prefix), Err(Error::Length { .. })));
}

#[test]
fn non_finite_parameters_report_layer() {
    let c = tiny_config(11, 6);
    let mut model = Summarizer::new(c.clone(), 0).unwrap();
    let id = model.params().find("encoder.layer0.attn.output.bias").unwrap();
    model.params_mut().get_mut(id).data_mut()[0] = f64::NAN;
    let err = model.encode(&random_features(&c, 2, 1)).unwrap_err();
    match err {
        Error::Numeric(m) => assert!(m.contains("encoder layer 0"), "{m}"),
        other => panic!("unexpected {other:?}"),
    }
}

mod common;

use common::oracle::*;
use common::rng;
use rand::Rng;
use tcresnet::nn_core::*;

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn conv_matches_naive_loops_on_random_shapes() {
    let mut r = rng(1);
    for case in 0..120 {
        let n = r.gen_range(1..3);
        let h = r.gen_range(1..14);
        let temporal = case % 3 == 0;
        let w = if temporal { 1 } else { r.gen_range(1..10) };
        let cin = r.gen_range(1..5);
        let cout = r.gen_range(1..5);
        let kh = r.gen_range(1..10);
        let kw = if temporal { 1 } else { r.gen_range(1..4) };
        let stride = (r.gen_range(1..4), if temporal { 1 } else { r.gen_range(1..3) });
        let x = random_tensor(&mut r, vec![n, h, w, cin]);
        let k = random_tensor(&mut r, vec![kh, kw, cin, cout]);
        let want = naive_conv(&x, &k, stride);
        let got = conv2d_forward(&x, &k, stride).unwrap();
        assert_eq!(got.shape(), want.shape(), "case {case}");
        assert!(max_abs_diff(got.data(), want.data()) < 1e-12, "case {case}");
        if temporal {
            let t = conv_temporal_forward(&x, &k, stride.0).unwrap();
            assert_eq!(t.data(), got.data(), "case {case}: temporal path must be bitwise equal");
            let t32 = conv_temporal_forward(&x.cast::<f32>(), &k.cast::<f32>(), stride.0).unwrap();
            let c32 = conv2d_forward(&x.cast::<f32>(), &k.cast::<f32>(), stride).unwrap();
            assert_eq!(t32.data(), c32.data());
        }
    }
}

#[test]
fn same_padding_table() {
    for (input, k, s, out, before, after) in [
        (98, 3, 1, 98, 1, 1),
        (98, 9, 2, 49, 3, 4),
        (49, 9, 2, 25, 4, 4),
        (25, 9, 2, 13, 4, 4),
        (13, 9, 1, 13, 4, 4),
        (98, 1, 2, 49, 0, 0),
        (5, 4, 4, 2, 1, 2),
    ] {
        let p = same_padding(input, k, s);
        assert_eq!((p.out, p.before, p.after), (out, before, after), "{input} {k} {s}");
    }
}

#[test]
fn batchnorm_train_normalizes() {
    let mut r = rng(2);
    for _ in 0..10 {
        let c = r.gen_range(1..6);
        let shape = vec![r.gen_range(2..5), r.gen_range(1..7), 1, c];
        let x = random_tensor(&mut r, shape).map(|v| 3.0 * v + 2.0);
        let (y, stats) = batchnorm_train(&x, &vec![1.0; c], &vec![0.0; c], 0.0).unwrap();
        let s = batch_stats(&y, c).unwrap();
        for i in 0..c {
            assert!(s.mean[i].abs() < 1e-6);
            assert!((s.var[i] - 1.0).abs() < 1e-5);
            assert!(stats.var[i] > 0.0);
        }
    }
}

#[test]
fn batchnorm_moving_update() {
    let stats = BatchStats {
        mean: vec![1.0],
        var: vec![4.0],
    };
    let (mut m, mut v) = (vec![0.0f64], vec![1.0f64]);
    update_moving_stats(&mut m, &mut v, &stats, 0.99);
    assert!((m[0] - 0.01).abs() < 1e-15);
    assert!((v[0] - 1.03).abs() < 1e-15);
}

#[test]
fn global_pool_and_avg_pool_oracles() {
    let mut r = rng(3);
    for _ in 0..20 {
        let (n, h, w, c) = (r.gen_range(1..3), r.gen_range(1..12), r.gen_range(1..12), r.gen_range(1..4));
        let x = random_tensor(&mut r, vec![n, h, w, c]);
        let g = global_avg_pool(&x).unwrap();
        for b in 0..n {
            for ch in 0..c {
                let mut s = 0.0;
                for i in 0..h * w {
                    s += x.data()[(b * h * w + i) * c + ch];
                }
                assert!((g.data()[b * c + ch] - s / (h * w) as f64).abs() < 1e-12);
            }
        }
        let pooled = avg_pool2d(&x, 4, 4).unwrap();
        assert!(max_abs_diff(pooled.data(), naive_avg_pool(&x, 4, 4).data()) < 1e-12);
    }
}

#[test]
fn fc_matches_naive_loops() {
    let mut r = rng(9);
    for _ in 0..20 {
        let (n, cin, cout) = (r.gen_range(1..5), r.gen_range(1..50), r.gen_range(1..13));
        let x = random_tensor(&mut r, vec![n, cin]);
        let w = random_tensor(&mut r, vec![cin, cout]);
        let got = fully_connected(&x, &w, None).unwrap();
        assert!(max_abs_diff(got.data(), naive_fc(&x, &w).data()) < 1e-12);
    }
}

#[test]
fn dropout_preserves_expectation() {
    let x = Tensor::<f64>::full(vec![1_000_000], 1.0);
    let (y, mask) = dropout(&x, 0.5, Mode::Train, &mut rng(4)).unwrap();
    let mean = y.sum() / 1e6;
    assert!((mean - 1.0).abs() < 0.02, "{mean}");
    assert!(mask.is_some());
    let (z, none) = dropout(&x, 0.5, Mode::Infer, &mut rng(4)).unwrap();
    assert_eq!(z, x);
    assert!(none.is_none());
}

#[test]
fn softmax_ce_oracle() {
    let mut r = rng(5);
    for _ in 0..20 {
        let logits: Vec<f64> = (0..12).map(|_| r.gen_range(-30.0..30.0)).collect();
        let label = r.gen_range(0..12);
        let (loss, grad) = softmax_cross_entropy(&logits, label).unwrap();
        let z: f64 = logits.iter().map(|v| v.exp()).sum();
        assert!((loss - (z.ln() - logits[label])).abs() < 1e-9);
        let p = softmax(&logits);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for i in 0..12 {
            let want = p[i] - if i == label { 1.0 } else { 0.0 };
            assert!((grad[i] - want).abs() < 1e-12);
        }
    }
    let (loss, _) = softmax_cross_entropy(&[0.0f64; 12], 3).unwrap();
    assert!((loss - 12f64.ln()).abs() < 1e-12);
}

fn check_grad(name: &str, x: &Tensor<f64>, analytic: &Tensor<f64>, f: impl FnMut(&Tensor<f64>) -> f64) {
    let worst = grad_error(x, analytic, f);
    assert!(worst < 1e-4, "{name}: worst relative error {worst}");
}

#[test]
fn conv_gradients() {
    let mut r = rng(6);
    for case in 0..8 {
        let temporal = case % 2 == 0;
        let (h, w) = (r.gen_range(2..9), if temporal { 1 } else { r.gen_range(2..6) });
        let (cin, cout) = (r.gen_range(1..4), r.gen_range(1..4));
        let (kh, kw) = (r.gen_range(1..6), if temporal { 1 } else { r.gen_range(1..4) });
        let stride = (r.gen_range(1..3), if temporal { 1 } else { r.gen_range(1..3) });
        let x = random_tensor(&mut r, vec![2, h, w, cin]);
        let k = random_tensor(&mut r, vec![kh, kw, cin, cout]);
        let y = conv2d_forward(&x, &k, stride).unwrap();
        let g = random_tensor(&mut r, y.shape().to_vec());
        let (gx, gw) = conv_backward(&x, &k, stride, &g).unwrap();
        check_grad("conv dx", &x, &gx, |x| dot(&conv2d_forward(x, &k, stride).unwrap(), &g));
        check_grad("conv dw", &k, &gw, |k| dot(&conv2d_forward(&x, k, stride).unwrap(), &g));
    }
}

#[test]
fn batchnorm_gradients() {
    let mut r = rng(7);
    for _ in 0..4 {
        let c = r.gen_range(1..4);
        let shape = vec![3, r.gen_range(1..5), 1, c];
        let x = random_tensor(&mut r, shape);
        let gamma: Vec<f64> = (0..c).map(|_| r.gen_range(0.5..1.5)).collect();
        let beta: Vec<f64> = (0..c).map(|_| r.gen_range(-0.5..0.5)).collect();
        let (y, _) = batchnorm_train(&x, &gamma, &beta, 1e-3).unwrap();
        let g = random_tensor(&mut r, y.shape().to_vec());
        let (gx, ggamma, gbeta) = batchnorm_backward(&x, &gamma, 1e-3, &g).unwrap();
        check_grad("bn dx", &x, &gx, |x| dot(&batchnorm_train(x, &gamma, &beta, 1e-3).unwrap().0, &g));
        let gt = Tensor::new(vec![c], gamma.clone()).unwrap();
        check_grad("bn dgamma", &gt, &Tensor::new(vec![c], ggamma).unwrap(), |gm| {
            dot(&batchnorm_train(&x, gm.data(), &beta, 1e-3).unwrap().0, &g)
        });
        let bt = Tensor::new(vec![c], beta.clone()).unwrap();
        check_grad("bn dbeta", &bt, &Tensor::new(vec![c], gbeta).unwrap(), |b| {
            dot(&batchnorm_train(&x, &gamma, b.data(), 1e-3).unwrap().0, &g)
        });
    }
}

#[test]
fn fc_pool_relu_and_loss_gradients() {
    let mut r = rng(8);
    for _ in 0..3 {
        let x = random_tensor(&mut r, vec![3, 5]);
        let w = random_tensor(&mut r, vec![5, 4]);
        let g = random_tensor(&mut r, vec![3, 4]);
        let (gx, gw) = fully_connected_backward(&x, &w, &g).unwrap();
        check_grad("fc dx", &x, &gx, |x| dot(&fully_connected(x, &w, None).unwrap(), &g));
        check_grad("fc dw", &w, &gw, |w| dot(&fully_connected(&x, w, None).unwrap(), &g));

        let x = random_tensor(&mut r, vec![2, 7, 6, 2]);
        let gp = random_tensor(&mut r, vec![2, 2, 2, 2]);
        let ga = avg_pool2d_backward(x.shape(), 4, 4, &gp).unwrap();
        check_grad("avg pool", &x, &ga, |x| dot(&avg_pool2d(x, 4, 4).unwrap(), &gp));
        let gg = random_tensor(&mut r, vec![2, 1, 1, 2]);
        let gga = global_avg_pool_backward(x.shape(), &gg).unwrap();
        check_grad("global pool", &x, &gga, |x| dot(&global_avg_pool(x).unwrap(), &gg));

        // keep inputs away from the kink
        let x = random_tensor(&mut r, vec![10]).map(|v| if v.abs() < 0.1 { v + 0.3 } else { v });
        let g = random_tensor(&mut r, vec![10]);
        check_grad("relu", &x, &relu_backward(&x, &g).unwrap(), |x| dot(&relu(x), &g));

        let logits = random_tensor(&mut r, vec![12]);
        let label = r.gen_range(0..12);
        let (_, grad) = softmax_cross_entropy(logits.data(), label).unwrap();
        check_grad("softmax ce", &logits, &Tensor::new(vec![12], grad).unwrap(), |l| {
            softmax_cross_entropy(l.data(), label).unwrap().0
        });
    }
}

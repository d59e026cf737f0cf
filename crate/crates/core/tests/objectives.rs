use fanerv::objectives::*;
use fanerv::Tensor;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(shape: &[usize], seed: u64) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.gen_range(0.05..0.95)).collect()).unwrap()
}

fn map(t: &Tensor<f64>, f: impl Fn(f64) -> f64) -> Tensor<f64> {
    Tensor::from_vec(t.shape(), t.data().iter().map(|&v| f(v)).collect()).unwrap()
}

#[test]
fn high_pass_rejects_constants() {
    let x = Tensor::full(&[2, 3, 9, 12], 0.37);
    let y = high_pass(&x, 1.0).unwrap();
    assert!(y.data().iter().all(|v: &f64| v.abs() < 1e-15));
}

#[test]
fn high_pass_is_linear() {
    let x = random(&[3, 10, 13], 1);
    let a = high_pass(&map(&x, |v| 2.5 * v), 1.0).unwrap();
    let b = high_pass(&x, 1.0).unwrap();
    for (p, q) in a.data().iter().zip(b.data()) {
        assert!((p - 2.5 * q).abs() < 1e-14);
    }
}

#[test]
fn high_pass_of_impulse_matches_direct_kernel() {
    // Build the truncated 7×7 Gaussian directly in two dimensions.
    let mut sum = 0.0;
    for i in -3i32..=3 {
        for j in -3i32..=3 {
            sum += (-((i * i + j * j) as f64) / 2.0).exp();
        }
    }
    let center = 1.0 / sum;
    let mut x = Tensor::zeros(&[11, 11]);
    x.data_mut()[5 * 11 + 5] = 1.0;
    let y = high_pass(&x, 1.0).unwrap();
    assert!((y.data()[5 * 11 + 5] - (1.0 - center)).abs() < 1e-15);
    let off = (-0.5f64).exp() / sum;
    assert!((y.data()[5 * 11 + 6] + off).abs() < 1e-15);
    assert!(high_pass(&x, 0.0).is_err());
}

#[test]
fn residual_and_target() {
    let v = random(&[3, 12, 12], 2);
    assert!(hf_residual(&v, &v, 1.0).unwrap().data().iter().all(|&r| r == 0.0));
    let shifted = map(&v, |a| a - 0.2);
    let r = hf_residual(&v, &shifted, 1.0).unwrap();
    assert!(r.data().iter().all(|x| x.abs() < 1e-12));

    let v_hat = random(&[3, 12, 12], 3);
    let diff = Tensor::from_vec(v.shape(), v.data().iter().zip(v_hat.data()).map(|(a, b)| a - b).collect()).unwrap();
    assert_eq!(hf_residual(&v, &v_hat, 1.0).unwrap(), high_pass(&diff, 1.0).unwrap());

    let half = Tensor::full(&[1, 2, 2], 0.5);
    let mut res = Tensor::zeros(&[1, 2, 2]);
    res.data_mut()[3] = 0.2;
    let t = enhanced_target(&half, &res, 0.5, false).unwrap();
    assert_eq!(t.data(), &[0.5, 0.5, 0.5, 0.6]);
    assert_eq!(enhanced_target(&v, &r, 0.0, false).unwrap(), v);
    assert!(enhanced_target(&v, &r, -0.1, false).is_err());
    assert!(enhanced_target(&v, &Tensor::zeros(&[3, 12, 11]), 0.5, false).is_err());
}

#[test]
fn pointwise_losses() {
    let v = random(&[2, 3, 8, 8], 4);
    assert_eq!(mse_loss(&v, &v).unwrap(), 0.0);
    assert_eq!(l1_loss(&v, &v).unwrap(), 0.0);
    let off = map(&v, |a| a + 0.1);
    assert!((mse_loss(&off, &v).unwrap() - 0.01).abs() < 1e-12);
    assert!((l1_loss(&off, &v).unwrap() - 0.1).abs() < 1e-12);

    let w = random(&[2, 3, 8, 8], 5);
    let (mut sq, mut ab) = (0.0, 0.0);
    for i in 0..v.len() {
        let d = w.data()[i] - v.data()[i];
        sq += d * d;
        ab += d.abs();
    }
    let n = v.len() as f64;
    assert!((mse_loss(&w, &v).unwrap() - sq / n).abs() < 1e-7);
    assert!((l1_loss(&w, &v).unwrap() - ab / n).abs() < 1e-7);
}

#[test]
fn psnr_values() {
    let v = random(&[2, 3, 8, 8], 6);
    assert_eq!(psnr(&v, &v, 1.0).unwrap(), f64::INFINITY);
    let off = map(&v, |a| a + 0.1);
    assert!((psnr(&off, &v, 1.0).unwrap() - 20.0).abs() < 1e-9);
    assert!((psnr_from_mse(1.0 / (255.0 * 255.0), 1.0) - 48.13).abs() < 0.01);
    assert!((psnr_from_mse(1.0 / (255.0 * 255.0), 1.0) - 20.0 * 255f64.log10()).abs() < 1e-12);
}

#[test]
fn default_weights() {
    let w = LossWeights::default_for(3);
    for (a, b) in w.alpha.iter().zip([0.9, 0.6, 0.3]) {
        assert!((a - b).abs() < 1e-12);
    }
    for (a, b) in w.beta_l1.iter().zip([0.1, 0.4, 0.4]) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!((w.ms_ssim_weight(3) - 0.3).abs() < 1e-12);
    assert_eq!(w.ms_ssim_weight(2), 0.0);
    w.validate().unwrap();
    LossWeights::default_for(2).validate().unwrap();
    LossWeights::default_for(5).validate().unwrap();

    let mut bad = w.clone();
    bad.beta_l1[0] = 0.2;
    assert!(bad.validate().is_err());
    let mut bad = w.clone();
    bad.alpha = vec![0.5, 0.6, 0.3];
    bad.beta_l1 = vec![0.5, 0.4, 0.4];
    assert!(bad.validate().is_err());
}

#[test]
fn sa_loss_examples() {
    let w = LossWeights::default_for(3);
    let v = random(&[3, 32, 32], 7);
    for r in 1..=3 {
        assert_eq!(sa_loss(&v, &v, r, &w).unwrap(), 0.0);
    }
    let mut w2 = w.clone();
    w2.alpha[1] = 0.7;
    w2.beta_l1[1] = 0.3;
    let off = map(&v, |a| a + 0.1);
    assert!((sa_loss(&off, &v, 2, &w2).unwrap() - 0.037).abs() < 1e-12);

    let v_hat = random(&[3, 32, 32], 8);
    let hand = 0.3 * mse_loss(&v_hat, &v).unwrap()
        + 0.4 * l1_loss(&v_hat, &v).unwrap()
        + 0.3 * (1.0 - ms_ssim(&v_hat, &v).unwrap());
    assert!((sa_loss(&v_hat, &v, 3, &w).unwrap() - hand).abs() < 1e-12);
    assert!(sa_loss(&v_hat, &v, 0, &w).is_err());
    assert!(sa_loss(&v_hat, &v, 4, &w).is_err());
}

fn pyramid(seed: u64) -> Vec<Tensor<f64>> {
    vec![random(&[3, 8, 8], seed), random(&[3, 16, 16], seed + 1), random(&[3, 32, 32], seed + 2)]
}

#[test]
fn perfect_predictions_give_exact_zero() {
    let targets = pyramid(10);
    let refs: Vec<&Tensor<f64>> = targets.iter().collect();
    for beta in [0.0, 0.3, 0.5, 2.0, 17.0] {
        let mut w = LossWeights::default_for(3);
        w.inject_beta = beta;
        let out = total_loss(&targets, &refs, &w).unwrap();
        assert_eq!(out.total, 0.0);
        assert!(out.per_scale.iter().all(|&v| v == 0.0));
    }
}

#[test]
fn zero_injection_equals_plain_targets() {
    let targets = pyramid(20);
    let preds = pyramid(30);
    let refs: Vec<&Tensor<f64>> = targets.iter().collect();
    let mut w = LossWeights::default_for(3);
    w.inject_beta = 0.0;
    let out = total_loss(&preds, &refs, &w).unwrap();
    let mut hand = 0.0;
    for r in 1..=3 {
        hand += sa_loss(&preds[r - 1], &targets[r - 1], r, &w).unwrap();
    }
    assert_eq!(out.total, hand);
}

#[test]
fn two_level_composition() {
    let v1 = random(&[3, 16, 16], 40);
    let v2 = random(&[3, 32, 32], 41);
    let p1 = random(&[3, 16, 16], 42);
    let p2 = random(&[3, 32, 32], 43);
    let w = LossWeights::default_for(2);
    let out = total_loss(&[p1.clone(), p2.clone()], &[&v1, &v2], &w).unwrap();

    let diff = Tensor::from_vec(v2.shape(), v2.data().iter().zip(p2.data()).map(|(a, b)| a - b).collect()).unwrap();
    let blurred = gaussian_blur(&diff, 1.0).unwrap();
    let target: Vec<f64> = (0..v2.len())
        .map(|i| v2.data()[i] + 0.5 * (diff.data()[i] - blurred.data()[i]))
        .collect();
    let target = Tensor::from_vec(v2.shape(), target).unwrap();
    let l1 = 0.9 * mse_loss(&p1, &v1).unwrap() + 0.1 * l1_loss(&p1, &v1).unwrap();
    let l2 = 0.3 * mse_loss(&p2, &target).unwrap()
        + 0.4 * l1_loss(&p2, &target).unwrap()
        + 0.3 * (1.0 - ms_ssim(&p2, &target).unwrap());
    assert!((out.total - (l1 + l2)).abs() < 1e-12);
    assert!((out.per_scale[0] - l1).abs() < 1e-12);
}

#[test]
fn single_level_reduces_to_sa_loss() {
    let v = random(&[3, 24, 24], 50);
    let p = random(&[3, 24, 24], 51);
    let mut w = LossWeights::default_for(1);
    w.inject_beta = 0.0;
    let out = total_loss(&[p.clone()], &[&v], &w).unwrap();
    assert_eq!(out.total, sa_loss(&p, &v, 1, &w).unwrap());
}

fn check_total_gradient(mode: TargetGradient, clamp: bool) {
    let targets = pyramid(60);
    let preds = pyramid(70);
    let refs: Vec<&Tensor<f64>> = targets.iter().collect();
    let mut w = LossWeights::default_for(3);
    w.clamp_target = clamp;
    let p: Vec<Option<&Tensor<f64>>> = preds.iter().map(Some).collect();
    let out = total_loss_with_grad(&p, &refs, &w, mode).unwrap();
    let res = hf_residual(&targets[2], &preds[2], w.hf_sigma).unwrap();
    let fixed = enhanced_target(&targets[2], &res, w.inject_beta, w.clamp_target).unwrap();
    let value = |preds: &[Tensor<f64>]| -> f64 {
        match mode {
            TargetGradient::Coupled => total_loss(preds, &refs, &w).unwrap().total,
            TargetGradient::Stop => {
                // Hold the enhanced target fixed at its current value.
                let mut total = 0.0;
                for r in 1..3 {
                    total += sa_loss(&preds[r - 1], &targets[r - 1], r, &w).unwrap();
                }
                total + sa_loss(&preds[2], &fixed, 3, &w).unwrap()
            }
        }
    };
    let eps = 1e-6;
    let mut worst: f64 = 0.0;
    for level in 0..3 {
        let g = out.grads[level].as_ref().unwrap();
        let floor = 1e-3 * g.max_abs();
        for idx in (0..preds[level].len()).step_by(29) {
            let mut plus = preds.clone();
            plus[level].data_mut()[idx] += eps;
            let mut minus = preds.clone();
            minus[level].data_mut()[idx] -= eps;
            let fd = (value(&plus) - value(&minus)) / (2.0 * eps);
            let an = g.data()[idx];
            worst = worst.max((fd - an).abs() / fd.abs().max(an.abs()).max(floor));
        }
    }
    assert!(worst < 1e-5, "{mode:?}: worst relative error {worst}");
}

#[test]
fn stop_gradient_matches_finite_differences() {
    check_total_gradient(TargetGradient::Stop, false);
}

#[test]
fn coupled_gradient_matches_finite_differences() {
    check_total_gradient(TargetGradient::Coupled, false);
}

#[test]
fn coupled_gradient_with_clamped_target() {
    check_total_gradient(TargetGradient::Coupled, true);
}

#[test]
fn unsupervised_levels_have_no_loss_or_gradient() {
    let targets = pyramid(80);
    let preds = pyramid(90);
    let refs: Vec<&Tensor<f64>> = targets.iter().collect();
    let w = LossWeights::default_for(3);
    let out = total_loss_with_grad(&[None, None, Some(&preds[2])], &refs, &w, TargetGradient::Stop).unwrap();
    assert_eq!(out.per_scale[0], 0.0);
    assert_eq!(out.per_scale[1], 0.0);
    assert!(out.grads[0].is_none() && out.grads[1].is_none());
    assert!(out.grads[2].is_some());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn clamped_sa_loss_is_non_negative(seed in any::<u64>(), beta in 0.0f64..4.0) {
        let v = random(&[3, 16, 16], seed);
        let p = random(&[3, 16, 16], seed ^ 0xABCD);
        let mut w = LossWeights::default_for(1);
        w.inject_beta = beta;
        w.clamp_target = true;
        let res = hf_residual(&v, &p, w.hf_sigma).unwrap();
        let t = enhanced_target(&v, &res, beta, true).unwrap();
        prop_assert!(t.data().iter().all(|&x| (0.0..=1.0).contains(&x)));
        prop_assert!(sa_loss(&p, &t, 1, &w).unwrap() >= 0.0);
    }

    #[test]
    fn high_pass_kills_any_constant(c in -3.0f64..3.0, h in 1usize..12, w in 1usize..12) {
        let x = Tensor::full(&[2, h, w], c);
        let y = high_pass(&x, 0.8).unwrap();
        prop_assert!(y.data().iter().all(|v| v.abs() < 1e-12));
    }
}

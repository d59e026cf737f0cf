//! MS-SSIM against values produced by TensorFlow's `ssim_multiscale`
//! (max_val = 1, default window and weights) on the same pseudo-random
//! inputs.

use fanerv::objectives::{ms_ssim, ms_ssim_with_grad};
use fanerv::Tensor;

struct SplitMix64(u64);

impl SplitMix64 {
    fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    fn unit(&mut self) -> f64 {
        (self.next() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

const SIDE: usize = 192;

const REFERENCE: [f64; 10] = [
    0.9958464503288269,
    0.9834704399108887,
    0.9654224514961243,
    0.9370501637458801,
    0.9113747477531433,
    0.8746034502983093,
    0.8365168571472168,
    0.8034362196922302,
    0.7700136303901672,
    0.7262442708015442,
];

/// Interleaved `H×W×3` samples reordered to planar `[3, H, W]`.
fn planar(hwc: &[f64]) -> Tensor<f64> {
    let mut out = vec![0.0; hwc.len()];
    for y in 0..SIDE {
        for x in 0..SIDE {
            for c in 0..3 {
                out[(c * SIDE + y) * SIDE + x] = hwc[(y * SIDE + x) * 3 + c];
            }
        }
    }
    Tensor::from_vec(&[3, SIDE, SIDE], out).unwrap()
}

fn pair(index: usize) -> (Tensor<f64>, Tensor<f64>) {
    let mut rng = SplitMix64(1000 + index as u64);
    let n = SIDE * SIDE * 3;
    let x: Vec<f64> = (0..n).map(|_| rng.unit()).collect();
    let noise: Vec<f64> = (0..n).map(|_| rng.unit()).collect();
    let amp = 0.1 * (index + 1) as f64;
    let y: Vec<f64> = x
        .iter()
        .zip(&noise)
        .map(|(&a, &e)| (a + amp * (e - 0.5)).clamp(0.0, 1.0))
        .collect();
    (planar(&x), planar(&y))
}

#[test]
fn matches_reference_implementation_on_random_pairs() {
    for (i, &expected) in REFERENCE.iter().enumerate() {
        let (x, y) = pair(i);
        let got = ms_ssim(&x, &y).unwrap();
        assert!(
            (got - expected).abs() <= 1e-4,
            "pair {i}: got {got}, reference {expected}"
        );
    }
}

#[test]
fn identity_pair_is_exactly_one() {
    for i in 0..3 {
        let (x, _) = pair(i);
        assert_eq!(ms_ssim(&x, &x).unwrap(), 1.0);
        assert_eq!(ms_ssim(&x.cast::<f32>(), &x.cast::<f32>()).unwrap(), 1.0);
    }
}

#[test]
fn symmetric_in_its_arguments() {
    let (x, y) = pair(4);
    let a = ms_ssim(&x, &y).unwrap();
    let b = ms_ssim(&y, &x).unwrap();
    assert!((a - b).abs() < 1e-12);
}

#[test]
fn complement_image_is_dissimilar() {
    let (x, _) = pair(0);
    let inv = Tensor::from_vec(x.shape(), x.data().iter().map(|v| 1.0 - v).collect()).unwrap();
    assert!(ms_ssim(&x, &inv).unwrap() < 1.0);
}

#[test]
fn gradient_matches_finite_differences() {
    // Small odd-sized planes exercise the mirrored pooling path.
    let (h, w) = (27, 25);
    let mut rng = SplitMix64(7);
    let x: Vec<f64> = (0..2 * h * w).map(|_| 0.2 + 0.6 * rng.unit()).collect();
    let y: Vec<f64> = x.iter().map(|&v| (v + 0.3 * (rng.unit() - 0.5)).clamp(0.0, 1.0)).collect();
    let x = Tensor::from_vec(&[2, h, w], x).unwrap();
    let y = Tensor::from_vec(&[2, h, w], y).unwrap();
    let (_, g) = ms_ssim_with_grad(&x, &y).unwrap();
    let eps = 1e-6;
    let floor = 1e-3 * g.max_abs();
    for idx in (0..x.len()).step_by(37) {
        let mut xp = x.clone();
        xp.data_mut()[idx] += eps;
        let mut xm = x.clone();
        xm.data_mut()[idx] -= eps;
        let fd = (ms_ssim(&xp, &y).unwrap() - ms_ssim(&xm, &y).unwrap()) / (2.0 * eps);
        let an = g.data()[idx];
        let err = (fd - an).abs() / fd.abs().max(an.abs()).max(floor);
        assert!(err < 1e-5, "index {idx}: analytic {an}, numeric {fd}");
    }
}

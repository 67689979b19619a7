use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn random_tensor(rng: &mut ChaCha8Rng, shape: Vec<usize>) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

/// Checks analytic gradients of a layer against central differences of the
/// scalar probe loss `sum(upstream * forward(input))`.
fn check_layer(
    spec: LayerSpec,
    input_shape: Vec<usize>,
    weight_shape: Vec<usize>,
    forward: fn(&Tensor, &Tensor, &[f64], &LayerSpec) -> crate::Result<Tensor>,
    backward: fn(&Tensor, &Tensor, &[f64], &Tensor, &LayerSpec) -> crate::Result<LayerGrads>,
    seed: u64,
) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let input = random_tensor(&mut rng, input_shape);
    let weights = random_tensor(&mut rng, weight_shape);
    let bias: Vec<f64> = (0..spec.out_channels).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let out = forward(&input, &weights, &bias, &spec).unwrap();
    let upstream = random_tensor(&mut rng, out.shape().to_vec());
    let grads = backward(&input, &weights, &bias, &upstream, &spec).unwrap();

    let probe = |x: &Tensor, w: &Tensor, b: &[f64]| -> f64 {
        let y = forward(x, w, b, &spec).unwrap();
        y.data().iter().zip(upstream.data()).map(|(a, u)| a * u).sum()
    };
    let step = 1e-5;
    let num_in = finite_difference_gradient(
        |p| probe(&Tensor::new(input.shape().to_vec(), p.to_vec()).unwrap(), &weights, &bias),
        input.data(),
        step,
    )
    .unwrap();
    let num_w = finite_difference_gradient(
        |p| probe(&input, &Tensor::new(weights.shape().to_vec(), p.to_vec()).unwrap(), &bias),
        weights.data(),
        step,
    )
    .unwrap();
    let num_b = finite_difference_gradient(|p| probe(&input, &weights, p), &bias, step).unwrap();
    for (name, a, n) in [
        ("input", grads.input.data(), &num_in[..]),
        ("weights", grads.weights.data(), &num_w[..]),
        ("bias", &grads.bias[..], &num_b[..]),
    ] {
        let (i, err) = max_relative_error(a, n, 1e-4);
        assert!(err < 1e-4, "{:?} {name}[{i}]: analytic {} vs numeric {} (rel {err})", spec.kind, a[i], n[i]);
    }
}

fn conv_spec(cin: usize, cout: usize, act: Activation) -> LayerSpec {
    LayerSpec::conv2d(cin, cout, act)
}

#[test]
fn conv_shape_halves_by_ceiling() {
    let input = Tensor::zeros(vec![1, 12, 12, 1]).unwrap();
    let w = Tensor::zeros(vec![3, 3, 1, 32]).unwrap();
    let out = conv2d_forward(&input, &w, &[0.0; 32], &conv_spec(1, 32, Activation::Relu)).unwrap();
    assert_eq!(out.shape(), &[1, 6, 6, 32]);
    assert!(out.data().iter().all(|&v| v == 0.0));
    assert_eq!(conv_out_extent(3), 2);
    assert_eq!(conv_out_extent(6), 3);
}

#[test]
fn conv_single_pixel_hits_kernel_center() {
    let (v, wc) = (1.75, -0.4);
    let input = Tensor::new(vec![1, 1, 1, 1], vec![v]).unwrap();
    let mut wdata = vec![0.0; 9];
    wdata[4] = wc;
    let w = Tensor::new(vec![3, 3, 1, 1], wdata).unwrap();
    let out = conv2d_forward(&input, &w, &[0.0], &conv_spec(1, 1, Activation::Identity)).unwrap();
    assert_eq!(out.shape(), &[1, 1, 1, 1]);
    assert_eq!(out.data()[0], v * wc);
}

#[test]
fn conv_rejects_channel_mismatch_naming_shapes() {
    let input = Tensor::zeros(vec![1, 6, 6, 2]).unwrap();
    let w = Tensor::zeros(vec![3, 3, 3, 4]).unwrap();
    let err = conv2d_forward(&input, &w, &[0.0; 4], &conv_spec(3, 4, Activation::Relu)).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("[1, 6, 6, 2]"), "{msg}");
    let err = conv2d_forward(&input, &w, &[0.0; 4], &conv_spec(2, 4, Activation::Relu)).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("[3, 3, 3, 4]") && msg.contains("[1, 6, 6, 2]"), "{msg}");
}

#[test]
fn conv_spec_rejects_other_kernels() {
    let mut spec = conv_spec(1, 1, Activation::Relu);
    spec.kernel = (5, 5);
    assert!(spec.validate().is_err());
    let mut spec = conv_spec(1, 1, Activation::Relu);
    spec.stride = 1;
    assert!(spec.validate().is_err());
}

#[test]
fn conv_zero_upstream_gives_zero_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let spec = conv_spec(2, 3, Activation::Sigmoid);
    let input = random_tensor(&mut rng, vec![1, 6, 6, 2]);
    let w = random_tensor(&mut rng, vec![3, 3, 2, 3]);
    let up = Tensor::zeros(vec![1, 3, 3, 3]).unwrap();
    let g = conv2d_backward(&input, &w, &[0.1, 0.2, 0.3], &up, &spec).unwrap();
    assert!(g.input.data().iter().chain(g.weights.data()).chain(&g.bias).all(|&v| v == 0.0));
}

#[test]
fn conv_bias_gradient_is_channel_sum_for_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let spec = conv_spec(1, 2, Activation::Identity);
    let input = random_tensor(&mut rng, vec![2, 6, 6, 1]);
    let w = random_tensor(&mut rng, vec![3, 3, 1, 2]);
    let up = random_tensor(&mut rng, vec![2, 3, 3, 2]);
    let g = conv2d_backward(&input, &w, &[0.0, 0.0], &up, &spec).unwrap();
    for c in 0..2 {
        let s: f64 = up.data().iter().skip(c).step_by(2).sum();
        assert!((g.bias[c] - s).abs() < 1e-12);
    }
}

#[test]
fn conv_backward_rejects_wrong_upstream() {
    let spec = conv_spec(1, 1, Activation::Relu);
    let input = Tensor::zeros(vec![1, 6, 6, 1]).unwrap();
    let w = Tensor::zeros(vec![3, 3, 1, 1]).unwrap();
    let up = Tensor::zeros(vec![1, 6, 6, 1]).unwrap();
    assert!(conv2d_backward(&input, &w, &[0.0], &up, &spec).is_err());
}

#[test]
fn deconv_shape_doubles() {
    let input = Tensor::zeros(vec![1, 3, 3, 4]).unwrap();
    let w = Tensor::zeros(vec![3, 3, 4, 5]).unwrap();
    let out = deconv2d_forward(&input, &w, &[0.0; 5], &LayerSpec::deconv2d(4, 5, Activation::Relu)).unwrap();
    assert_eq!(out.shape(), &[1, 6, 6, 5]);
    assert!(out.data().iter().all(|&v| v == 0.0));
}

#[test]
fn conv_then_deconv_restores_extents() {
    for (h, mid) in [(12, 6), (6, 3)] {
        let x = Tensor::zeros(vec![1, h, h, 1]).unwrap();
        let down = conv2d_forward(&x, &Tensor::zeros(vec![3, 3, 1, 2]).unwrap(), &[0.0; 2], &conv_spec(1, 2, Activation::Relu)).unwrap();
        assert_eq!(down.shape(), &[1, mid, mid, 2]);
        let up = deconv2d_forward(&down, &Tensor::zeros(vec![3, 3, 2, 1]).unwrap(), &[0.0], &LayerSpec::deconv2d(2, 1, Activation::Sigmoid)).unwrap();
        assert_eq!(up.shape(), &[1, h, h, 1]);
    }
}

#[test]
fn deconv_is_adjoint_of_conv() {
    // <conv(x), y> == <x, deconv(y)> for identity activations and zero bias.
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x = random_tensor(&mut rng, vec![1, 6, 6, 2]);
    let y = random_tensor(&mut rng, vec![1, 3, 3, 3]);
    let w = random_tensor(&mut rng, vec![3, 3, 2, 3]);
    let cx = conv2d_forward(&x, &w, &[0.0; 3], &conv_spec(2, 3, Activation::Identity)).unwrap();
    // Transposed weights: swap channel axes.
    let mut wt = vec![0.0; w.len()];
    for k in 0..9 {
        for ci in 0..2 {
            for co in 0..3 {
                wt[(k * 3 + co) * 2 + ci] = w.data()[(k * 2 + ci) * 3 + co];
            }
        }
    }
    let wt = Tensor::new(vec![3, 3, 3, 2], wt).unwrap();
    let dy = deconv2d_forward(&y, &wt, &[0.0; 2], &LayerSpec::deconv2d(3, 2, Activation::Identity)).unwrap();
    let lhs: f64 = cx.data().iter().zip(y.data()).map(|(a, b)| a * b).sum();
    let rhs: f64 = x.data().iter().zip(dy.data()).map(|(a, b)| a * b).sum();
    assert!((lhs - rhs).abs() < 1e-12, "{lhs} vs {rhs}");
}

#[test]
fn dense_examples() {
    let id = Tensor::new(vec![3, 3], vec![1., 0., 0., 0., 1., 0., 0., 0., 1.]).unwrap();
    let x = Tensor::from_vec(vec![0.5, -2.0, 7.0]);
    assert_eq!(dense_forward(&x, &id, &[0.0; 3], Activation::Identity).unwrap().data(), x.data());

    let w = Tensor::new(vec![1, 1], vec![2.0]).unwrap();
    let y = dense_forward(&Tensor::from_vec(vec![3.0]), &w, &[1.0], Activation::Identity).unwrap();
    assert_eq!(y.data(), &[7.0]);

    let w0 = Tensor::new(vec![1, 1], vec![0.0]).unwrap();
    let s = dense_forward(&Tensor::from_vec(vec![5.0]), &w0, &[0.0], Activation::Sigmoid).unwrap();
    assert_eq!(s.data(), &[0.5]);
}

#[test]
fn dense_rejects_dimension_mismatch() {
    let w = Tensor::new(vec![2, 3], vec![0.0; 6]).unwrap();
    assert!(dense_forward(&Tensor::from_vec(vec![1.0, 2.0]), &w, &[0.0; 2], Activation::Relu).is_err());
    assert!(dense_forward(&Tensor::from_vec(vec![1.0, 2.0, 3.0]), &w, &[0.0; 3], Activation::Relu).is_err());
}

#[test]
fn activation_ranges() {
    for x in [-50.0, -3.0, -1e-9, 0.0, 2.0, 40.0] {
        assert!(Activation::Relu.apply(x) >= 0.0);
        let s = Activation::Sigmoid.apply(x);
        assert!(s > 0.0 && s < 1.0, "sigmoid({x}) = {s}");
        assert_eq!(Activation::Identity.apply(x), x);
    }
}

#[test]
fn tensor_invariants() {
    assert!(Tensor::new(vec![2, 2], vec![0.0; 3]).is_err());
    assert!(Tensor::new(vec![2, 0], vec![]).is_err());
    assert!(Tensor::new(vec![1, 1, 1, 1, 1], vec![0.0]).is_err());
}

#[test]
fn gradients_match_finite_differences_all_layer_kinds() {
    let mut seed = 100;
    for &h in &[3usize, 6, 12] {
        for &(cin, cout) in &[(1usize, 4usize), (4, 8), (8, 1)] {
            for act in [Activation::Relu, Activation::Sigmoid, Activation::Identity] {
                seed += 1;
                check_layer(
                    conv_spec(cin, cout, act),
                    vec![1, h, h, cin],
                    vec![3, 3, cin, cout],
                    conv2d_forward,
                    conv2d_backward,
                    seed,
                );
                let dh = h.div_ceil(2);
                check_layer(
                    LayerSpec::deconv2d(cin, cout, act),
                    vec![1, dh, dh, cin],
                    vec![3, 3, cin, cout],
                    deconv2d_forward,
                    deconv2d_backward,
                    seed + 1000,
                );
            }
        }
    }
}

#[test]
fn dense_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for act in [Activation::Relu, Activation::Sigmoid, Activation::Identity] {
        let (batch, nin, nout) = (3, 5, 4);
        let x = random_tensor(&mut rng, vec![batch, nin]);
        let w = random_tensor(&mut rng, vec![nout, nin]);
        let b: Vec<f64> = (0..nout).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let up = random_tensor(&mut rng, vec![batch, nout]);
        let g = dense_backward(&x, &w, &b, &up, act).unwrap();
        let probe = |x: &Tensor, w: &Tensor, b: &[f64]| -> f64 {
            let y = dense_forward(x, w, b, act).unwrap();
            y.data().iter().zip(up.data()).map(|(a, u)| a * u).sum()
        };
        let nx = finite_difference_gradient(|p| probe(&Tensor::new(vec![batch, nin], p.to_vec()).unwrap(), &w, &b), x.data(), 1e-5).unwrap();
        let nw = finite_difference_gradient(|p| probe(&x, &Tensor::new(vec![nout, nin], p.to_vec()).unwrap(), &b), w.data(), 1e-5).unwrap();
        let nb = finite_difference_gradient(|p| probe(&x, &w, p), &b, 1e-5).unwrap();
        assert!(max_relative_error(g.input.data(), &nx, 1e-4).1 < 1e-4);
        assert!(max_relative_error(g.weights.data(), &nw, 1e-4).1 < 1e-4);
        assert!(max_relative_error(&g.bias, &nb, 1e-4).1 < 1e-4);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn forward_and_backward_are_deterministic(seed in 0u64..10_000, h in prop::sample::select(vec![3usize, 6, 12])) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = conv_spec(2, 3, Activation::Relu);
        let x = random_tensor(&mut rng, vec![1, h, h, 2]);
        let w = random_tensor(&mut rng, vec![3, 3, 2, 3]);
        let b = [0.1, -0.2, 0.05];
        let y1 = conv2d_forward(&x, &w, &b, &spec).unwrap();
        let y2 = conv2d_forward(&x, &w, &b, &spec).unwrap();
        prop_assert_eq!(&y1, &y2);
        let g1 = conv2d_backward(&x, &w, &b, &y1, &spec).unwrap();
        let g2 = conv2d_backward(&x, &w, &b, &y1, &spec).unwrap();
        prop_assert_eq!(g1, g2);
        prop_assert!(y1.data().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn zero_gradient_adam_is_identity(params in prop::collection::vec(-1e3f64..1e3, 1..20), steps in 1usize..30) {
        let mut p = params.clone();
        let mut state = AdamState::new(p.len(), AdamConfig::default());
        let zeros = vec![0.0; p.len()];
        for _ in 0..steps {
            adam_step(&mut p, &zeros, &mut state).unwrap();
        }
        prop_assert_eq!(p, params);
    }
}

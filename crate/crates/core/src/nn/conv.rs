//! Valid (unpadded) convolution, transposed convolution, and the two
//! pointwise ops the model uses, each with its exact backward pass.
//!
//! Convolutions lower to GEMM through im2col so the heavy work runs in the
//! dense kernel. Layouts: conv weights are `[out_c, in_c, k, k]`, transposed
//! conv weights are `[in_c, out_c, k, k]`, activations are `[c, h, w]`.

use crate::num::Real;

pub const LEAKY_SLOPE: f64 = 0.01;

/// Output spatial size of a valid convolution.
pub fn conv_out_dim(input: usize, k: usize, stride: usize) -> usize {
    (input - k) / stride + 1
}

/// Output spatial size of a transposed convolution.
pub fn convt_out_dim(input: usize, k: usize, stride: usize) -> usize {
    (input - 1) * stride + k
}

/// Gathers `[in_c * k * k, oh * ow]` patches of `input`.
fn im2col<T: Real>(
    input: &[T],
    (c, h, w): (usize, usize, usize),
    k: usize,
    s: usize,
    cols: &mut Vec<T>,
) -> (usize, usize) {
    let (oh, ow) = (conv_out_dim(h, k, s), conv_out_dim(w, k, s));
    let p = oh * ow;
    cols.clear();
    cols.resize(c * k * k * p, T::zero());
    for ci in 0..c {
        for ky in 0..k {
            for kx in 0..k {
                let row = ((ci * k) + ky) * k + kx;
                let dst = &mut cols[row * p..(row + 1) * p];
                for oy in 0..oh {
                    let src_base = ci * h * w + (oy * s + ky) * w + kx;
                    let drow = &mut dst[oy * ow..(oy + 1) * ow];
                    for (ox, d) in drow.iter_mut().enumerate() {
                        *d = input[src_base + ox * s];
                    }
                }
            }
        }
    }
    (oh, ow)
}

/// Scatter-add adjoint of [`im2col`].
fn col2im<T: Real>(
    cols: &[T],
    (c, h, w): (usize, usize, usize),
    k: usize,
    s: usize,
    out: &mut [T],
) {
    let (oh, ow) = (conv_out_dim(h, k, s), conv_out_dim(w, k, s));
    let p = oh * ow;
    for ci in 0..c {
        for ky in 0..k {
            for kx in 0..k {
                let row = ((ci * k) + ky) * k + kx;
                let src = &cols[row * p..(row + 1) * p];
                for oy in 0..oh {
                    let dst_base = ci * h * w + (oy * s + ky) * w + kx;
                    let srow = &src[oy * ow..(oy + 1) * ow];
                    for (ox, &v) in srow.iter().enumerate() {
                        out[dst_base + ox * s] += v;
                    }
                }
            }
        }
    }
}

/// `out[co] = sum_ci w[co, ci] * patch(ci) + b[co]` over all output pixels.
/// Returns the output and its `(c, h, w)`.
pub fn conv2d_forward<T: Real>(
    input: &[T],
    in_dims: (usize, usize, usize),
    weight: &[T],
    bias: &[T],
    out_c: usize,
    k: usize,
    s: usize,
) -> (Vec<T>, (usize, usize, usize)) {
    let (c, h, w) = in_dims;
    assert_eq!(input.len(), c * h * w, "conv input length/shape mismatch");
    assert_eq!(weight.len(), out_c * c * k * k, "conv weight shape mismatch");
    assert_eq!(bias.len(), out_c, "conv bias shape mismatch");
    assert!(h >= k && w >= k, "input {h}x{w} smaller than kernel {k}");
    let mut cols = Vec::new();
    let (oh, ow) = im2col(input, in_dims, k, s, &mut cols);
    let p = oh * ow;
    let mut out = vec![T::zero(); out_c * p];
    T::gemm(out_c, c * k * k, p, T::one(), weight, &cols, T::zero(), &mut out);
    for co in 0..out_c {
        let b = bias[co];
        for v in &mut out[co * p..(co + 1) * p] {
            *v += b;
        }
    }
    (out, (out_c, oh, ow))
}

/// Gradients of a valid convolution: returns `(d_input, d_weight, d_bias)`.
pub fn conv2d_backward<T: Real>(
    input: &[T],
    in_dims: (usize, usize, usize),
    weight: &[T],
    out_c: usize,
    k: usize,
    s: usize,
    d_out: &[T],
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let (c, h, w) = in_dims;
    let (oh, ow) = (conv_out_dim(h, k, s), conv_out_dim(w, k, s));
    let p = oh * ow;
    assert_eq!(d_out.len(), out_c * p, "conv d_out shape mismatch");

    let mut d_bias = vec![T::zero(); out_c];
    for co in 0..out_c {
        let mut acc = T::zero();
        for &v in &d_out[co * p..(co + 1) * p] {
            acc += v;
        }
        d_bias[co] = acc;
    }

    let mut cols = Vec::new();
    im2col(input, in_dims, k, s, &mut cols);
    // dW [out_c, ckk] = d_out [out_c, p] @ cols^T [p, ckk]
    let ckk = c * k * k;
    let mut d_weight = vec![T::zero(); out_c * ckk];
    T::gemm_ex(out_c, p, ckk, T::one(), d_out, false, &cols, true, T::zero(), &mut d_weight);

    // d_cols [ckk, p] = W^T [ckk, out_c] @ d_out [out_c, p]
    let mut d_cols = vec![T::zero(); ckk * p];
    T::gemm_ex(ckk, out_c, p, T::one(), weight, true, d_out, false, T::zero(), &mut d_cols);
    let mut d_input = vec![T::zero(); c * h * w];
    col2im(&d_cols, in_dims, k, s, &mut d_input);

    (d_input, d_weight, d_bias)
}

/// Transposed convolution: each input pixel stamps a `k x k` kernel into the
/// output at stride `s`. Weight layout `[in_c, out_c, k, k]`.
pub fn convt2d_forward<T: Real>(
    input: &[T],
    in_dims: (usize, usize, usize),
    weight: &[T],
    bias: &[T],
    out_c: usize,
    k: usize,
    s: usize,
) -> (Vec<T>, (usize, usize, usize)) {
    let (c, h, w) = in_dims;
    assert_eq!(input.len(), c * h * w, "convt input length/shape mismatch");
    assert_eq!(weight.len(), c * out_c * k * k, "convt weight shape mismatch");
    assert_eq!(bias.len(), out_c, "convt bias shape mismatch");
    let (oh, ow) = (convt_out_dim(h, k, s), convt_out_dim(w, k, s));
    let p = h * w;
    let okk = out_c * k * k;
    // cols [okk, p] = W^T [okk, c] @ input [c, p]
    let mut cols = vec![T::zero(); okk * p];
    T::gemm_ex(okk, c, p, T::one(), weight, true, input, false, T::zero(), &mut cols);

    let mut out = vec![T::zero(); out_c * oh * ow];
    for co in 0..out_c {
        for ky in 0..k {
            for kx in 0..k {
                let row = ((co * k) + ky) * k + kx;
                let src = &cols[row * p..(row + 1) * p];
                for y in 0..h {
                    let dst_base = co * oh * ow + (y * s + ky) * ow + kx;
                    let srow = &src[y * w..(y + 1) * w];
                    for (x, &v) in srow.iter().enumerate() {
                        out[dst_base + x * s] += v;
                    }
                }
            }
        }
    }
    for co in 0..out_c {
        let b = bias[co];
        for v in &mut out[co * oh * ow..(co + 1) * oh * ow] {
            *v += b;
        }
    }
    (out, (out_c, oh, ow))
}

/// Gradients of a transposed convolution: `(d_input, d_weight, d_bias)`.
pub fn convt2d_backward<T: Real>(
    input: &[T],
    in_dims: (usize, usize, usize),
    weight: &[T],
    out_c: usize,
    k: usize,
    s: usize,
    d_out: &[T],
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let (c, h, w) = in_dims;
    let (oh, ow) = (convt_out_dim(h, k, s), convt_out_dim(w, k, s));
    assert_eq!(d_out.len(), out_c * oh * ow, "convt d_out shape mismatch");
    let p = h * w;
    let okk = out_c * k * k;

    let mut d_bias = vec![T::zero(); out_c];
    for co in 0..out_c {
        let mut acc = T::zero();
        for &v in &d_out[co * oh * ow..(co + 1) * oh * ow] {
            acc += v;
        }
        d_bias[co] = acc;
    }

    // gather d_cols [okk, p] from d_out (mirror of the forward scatter)
    let mut d_cols = vec![T::zero(); okk * p];
    for co in 0..out_c {
        for ky in 0..k {
            for kx in 0..k {
                let row = ((co * k) + ky) * k + kx;
                let dst = &mut d_cols[row * p..(row + 1) * p];
                for y in 0..h {
                    let src_base = co * oh * ow + (y * s + ky) * ow + kx;
                    let drow = &mut dst[y * w..(y + 1) * w];
                    for (x, d) in drow.iter_mut().enumerate() {
                        *d = d_out[src_base + x * s];
                    }
                }
            }
        }
    }

    // dW [c, okk] = input [c, p] @ d_cols^T [p, okk]
    let mut d_weight = vec![T::zero(); c * okk];
    T::gemm_ex(c, p, okk, T::one(), input, false, &d_cols, true, T::zero(), &mut d_weight);

    // d_input [c, p] = W [c, okk] @ d_cols [okk, p]
    let mut d_input = vec![T::zero(); c * p];
    T::gemm(c, okk, p, T::one(), weight, &d_cols, T::zero(), &mut d_input);

    (d_input, d_weight, d_bias)
}

pub fn leaky_relu_forward<T: Real>(x: &mut [T]) {
    let a = T::of(LEAKY_SLOPE);
    for v in x.iter_mut() {
        if *v < T::zero() {
            *v = *v * a;
        }
    }
}

/// Backward through LeakyReLU given the layer's pre-activation input.
pub fn leaky_relu_backward<T: Real>(pre: &[T], grad: &mut [T]) {
    let a = T::of(LEAKY_SLOPE);
    for (g, &z) in grad.iter_mut().zip(pre) {
        if z < T::zero() {
            *g = *g * a;
        }
    }
}

pub fn clamp01_forward<T: Real>(x: &mut [T]) {
    for v in x.iter_mut() {
        if *v < T::zero() {
            *v = T::zero();
        } else if *v > T::one() {
            *v = T::one();
        }
    }
}

/// Backward through the output clamp (zero gradient outside [0, 1]).
pub fn clamp01_backward<T: Real>(pre: &[T], grad: &mut [T]) {
    for (g, &z) in grad.iter_mut().zip(pre) {
        if z < T::zero() || z > T::one() {
            *g = T::zero();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn randv(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    /// Direct (quadruple-loop) convolution oracle.
    fn conv_naive(
        input: &[f64],
        (c, h, w): (usize, usize, usize),
        weight: &[f64],
        bias: &[f64],
        out_c: usize,
        k: usize,
        s: usize,
    ) -> Vec<f64> {
        let (oh, ow) = (conv_out_dim(h, k, s), conv_out_dim(w, k, s));
        let mut out = vec![0.0; out_c * oh * ow];
        for co in 0..out_c {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = bias[co];
                    for ci in 0..c {
                        for ky in 0..k {
                            for kx in 0..k {
                                acc += weight[((co * c + ci) * k + ky) * k + kx]
                                    * input[ci * h * w + (oy * s + ky) * w + (ox * s + kx)];
                            }
                        }
                    }
                    out[co * oh * ow + oy * ow + ox] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn conv_matches_naive_oracle() {
        let (c, h, w, out_c, k, s) = (3, 9, 11, 4, 3, 2);
        let input = randv(1, c * h * w);
        let weight = randv(2, out_c * c * k * k);
        let bias = randv(3, out_c);
        let (got, dims) = conv2d_forward(&input, (c, h, w), &weight, &bias, out_c, k, s);
        assert_eq!(dims, (out_c, 4, 5));
        let want = conv_naive(&input, (c, h, w), &weight, &bias, out_c, k, s);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn scalar_conv_is_w_x_plus_b() {
        // 1x1 input, 1x1 kernel: out = w * x + b
        let (out, dims) = conv2d_forward(&[3.0f64], (1, 1, 1), &[2.5], &[0.25], 1, 1, 1);
        assert_eq!(dims, (1, 1, 1));
        assert!((out[0] - (2.5 * 3.0 + 0.25)).abs() < 1e-15);
    }

    #[test]
    fn convt_inverts_conv_shapes() {
        for (n, k, s) in [(84, 6, 1), (79, 5, 2), (38, 6, 1), (33, 5, 2), (15, 5, 2), (6, 5, 1)] {
            let o = conv_out_dim(n, k, s);
            assert_eq!(convt_out_dim(o, k, s), n);
        }
    }

    #[test]
    fn convt_matches_scatter_oracle() {
        let (c, h, w, out_c, k, s) = (2, 4, 5, 3, 3, 2);
        let input = randv(4, c * h * w);
        let weight = randv(5, c * out_c * k * k);
        let bias = randv(6, out_c);
        let (got, (oc, oh, ow)) = convt2d_forward(&input, (c, h, w), &weight, &bias, out_c, k, s);
        assert_eq!((oc, oh, ow), (out_c, (h - 1) * s + k, (w - 1) * s + k));
        // direct scatter oracle
        let mut want = vec![0.0; out_c * oh * ow];
        for co in 0..out_c {
            for v in &mut want[co * oh * ow..(co + 1) * oh * ow] {
                *v = bias[co];
            }
        }
        for ci in 0..c {
            for y in 0..h {
                for x in 0..w {
                    let xv = input[ci * h * w + y * w + x];
                    for co in 0..out_c {
                        for ky in 0..k {
                            for kx in 0..k {
                                want[co * oh * ow + (y * s + ky) * ow + (x * s + kx)] +=
                                    xv * weight[((ci * out_c + co) * k + ky) * k + kx];
                            }
                        }
                    }
                }
            }
        }
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    /// Central finite differences over a scalar loss `sum(out * probe)`.
    fn fd_check_conv(transposed: bool) {
        let (c, h, w, out_c, k, s) = (2, 7, 7, 3, 3, 2);
        let input = randv(7, c * h * w);
        let wlen = if transposed { c * out_c * k * k } else { out_c * c * k * k };
        let weight = randv(8, wlen);
        let bias = randv(9, out_c);
        let fwd = |inp: &[f64], wt: &[f64], bs: &[f64]| -> Vec<f64> {
            if transposed {
                convt2d_forward(inp, (c, h, w), wt, bs, out_c, k, s).0
            } else {
                conv2d_forward(inp, (c, h, w), wt, bs, out_c, k, s).0
            }
        };
        let out = fwd(&input, &weight, &bias);
        let probe = randv(10, out.len());
        let loss = |o: &[f64]| -> f64 { o.iter().zip(&probe).map(|(a, b)| a * b).sum() };

        let (d_in, d_w, d_b) = if transposed {
            convt2d_backward(&input, (c, h, w), &weight, out_c, k, s, &probe)
        } else {
            conv2d_backward(&input, (c, h, w), &weight, out_c, k, s, &probe)
        };

        let eps = 1e-3;
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let mut check = |analytic: &[f64], which: usize| {
            for _ in 0..40 {
                let i = rng.gen_range(0..analytic.len());
                let (mut ip, mut im) = (input.clone(), input.clone());
                let (mut wp, mut wm) = (weight.clone(), weight.clone());
                let (mut bp, mut bm) = (bias.clone(), bias.clone());
                match which {
                    0 => {
                        ip[i] += eps;
                        im[i] -= eps;
                    }
                    1 => {
                        wp[i] += eps;
                        wm[i] -= eps;
                    }
                    _ => {
                        bp[i] += eps;
                        bm[i] -= eps;
                    }
                }
                let fd = (loss(&fwd(&ip, &wp, &bp)) - loss(&fwd(&im, &wm, &bm))) / (2.0 * eps);
                let denom = fd.abs().max(analytic[i].abs()).max(1e-8);
                let rel = (fd - analytic[i]).abs() / denom;
                assert!(rel < 1e-3, "transposed={transposed} which={which} i={i}: {fd} vs {}", analytic[i]);
            }
        };
        check(&d_in, 0);
        check(&d_w, 1);
        check(&d_b, 2);
    }

    #[test]
    fn conv_gradients_match_finite_differences() {
        fd_check_conv(false);
    }

    #[test]
    fn convt_gradients_match_finite_differences() {
        fd_check_conv(true);
    }

    #[test]
    fn leaky_relu_and_clamp_grads() {
        let pre = vec![-2.0f64, -0.5, 0.0, 0.5, 2.0];
        let mut act = pre.clone();
        leaky_relu_forward(&mut act);
        assert_eq!(act, vec![-0.02, -0.005, 0.0, 0.5, 2.0]);
        let mut g = vec![1.0; 5];
        leaky_relu_backward(&pre, &mut g);
        assert_eq!(g, vec![0.01, 0.01, 1.0, 1.0, 1.0]);

        let mut c = pre.clone();
        clamp01_forward(&mut c);
        assert_eq!(c, vec![0.0, 0.0, 0.0, 0.5, 1.0]);
        let mut gc = vec![1.0; 5];
        clamp01_backward(&pre, &mut gc);
        assert_eq!(gc, vec![0.0, 0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_parameter_gradients() {
        let (c, h, w, out_c, k, s) = (2, 6, 6, 3, 3, 1);
        let input = randv(30, c * h * w);
        let weight = randv(31, out_c * c * k * k);
        let d_out = vec![0.0; out_c * 4 * 4 * 1]; // (6-3)/1+1 = 4
        let (d_in, d_w, d_b) = conv2d_backward(&input, (c, h, w), &weight, out_c, k, s, &d_out);
        assert!(d_in.iter().all(|&v| v == 0.0));
        assert!(d_w.iter().all(|&v| v == 0.0));
        assert!(d_b.iter().all(|&v| v == 0.0));
    }
}

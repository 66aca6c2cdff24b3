//! SSIM, MSE, and the weighted reconstruction objective with exact
//! gradients. All functions are generic over the scalar so gradient tests
//! can run in `f64` while training runs in `f32`.
//!
//! SSIM uses an 11x11 Gaussian window (sigma 1.5) in valid mode: local
//! statistics are only taken where the window fits entirely inside the
//! image, which avoids border artifacts at 84x84.

use crate::num::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimConfig<T> {
    pub window_size: usize,
    pub sigma: f64,
    /// Equal-weight window instead of the Gaussian.
    pub uniform: bool,
    /// Luminance stabilizer, (0.01 * L)^2 with dynamic range L = 1.
    pub c1: T,
    /// Contrast stabilizer, (0.03 * L)^2.
    pub c2: T,
}

impl<T: Real> Default for SsimConfig<T> {
    fn default() -> Self {
        Self { window_size: 11, sigma: 1.5, uniform: false, c1: T::of(1e-4), c2: T::of(9e-4) }
    }
}

impl<T: Real> SsimConfig<T> {
    /// Normalized 1D window (the 2D window is its outer product).
    pub fn window(&self) -> Vec<T> {
        let k = self.window_size;
        if self.uniform {
            return vec![T::of(1.0 / k as f64); k];
        }
        let mid = (k as f64 - 1.0) / 2.0;
        let mut w: Vec<f64> =
            (0..k).map(|i| (-((i as f64 - mid).powi(2)) / (2.0 * self.sigma * self.sigma)).exp()).collect();
        let sum: f64 = w.iter().sum();
        for v in &mut w {
            *v /= sum;
        }
        w.into_iter().map(T::of).collect()
    }
}

/// Separable valid-mode blur along rows: `h x w -> h x (w - k + 1)`.
fn blur_rows<T: Real>(src: &[T], h: usize, w: usize, win: &[T]) -> Vec<T> {
    let k = win.len();
    let ow = w - k + 1;
    let mut dst = vec![T::zero(); h * ow];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        let out = &mut dst[y * ow..(y + 1) * ow];
        for (x, o) in out.iter_mut().enumerate() {
            let mut acc = T::zero();
            for (i, &wi) in win.iter().enumerate() {
                acc += wi * row[x + i];
            }
            *o = acc;
        }
    }
    dst
}

/// Separable valid-mode blur along columns: `h x w -> (h - k + 1) x w`.
fn blur_cols<T: Real>(src: &[T], h: usize, w: usize, win: &[T]) -> Vec<T> {
    let k = win.len();
    let oh = h - k + 1;
    let mut dst = vec![T::zero(); oh * w];
    for y in 0..oh {
        for (i, &wi) in win.iter().enumerate() {
            let srow = &src[(y + i) * w..(y + i + 1) * w];
            let drow = &mut dst[y * w..(y + 1) * w];
            for x in 0..w {
                drow[x] += wi * srow[x];
            }
        }
    }
    dst
}

fn blur_valid<T: Real>(src: &[T], h: usize, w: usize, win: &[T]) -> Vec<T> {
    let rows = blur_rows(src, h, w, win);
    blur_cols(&rows, h, w - win.len() + 1, win)
}

/// Adjoint of [`blur_valid`]: scatters a `(h-k+1) x (w-k+1)` field back to
/// `h x w`, accumulating into `dst`.
fn scatter_full<T: Real>(field: &[T], h: usize, w: usize, win: &[T], dst: &mut [T]) {
    let k = win.len();
    let (fh, fw) = (h - k + 1, w - k + 1);
    // rows first: (fh x fw) -> (fh x w)
    let mut tmp = vec![T::zero(); fh * w];
    for y in 0..fh {
        let src = &field[y * fw..(y + 1) * fw];
        let out = &mut tmp[y * w..(y + 1) * w];
        for (x, &s) in src.iter().enumerate() {
            for (i, &wi) in win.iter().enumerate() {
                out[x + i] += wi * s;
            }
        }
    }
    // then columns: (fh x w) -> (h x w)
    for y in 0..fh {
        let src = &tmp[y * w..(y + 1) * w];
        for (i, &wi) in win.iter().enumerate() {
            let drow = &mut dst[(y + i) * w..(y + i + 1) * w];
            for x in 0..w {
                drow[x] += wi * src[x];
            }
        }
    }
}

fn check_dims<T>(x: &[T], y: &[T], c: usize, h: usize, w: usize) {
    assert_eq!(x.len(), c * h * w, "shape mismatch: x has {} values, dims say {}", x.len(), c * h * w);
    assert_eq!(y.len(), x.len(), "shape mismatch between inputs");
}

/// Mean local SSIM over channels and window positions; 1 iff the inputs are
/// identical, symmetric in its arguments, bounded by [-1, 1].
pub fn ssim<T: Real>(x: &[T], y: &[T], c: usize, h: usize, w: usize, cfg: &SsimConfig<T>) -> T {
    ssim_impl(x, y, c, h, w, cfg, None)
}

/// SSIM plus its exact gradient with respect to `x`, accumulated into
/// `grad_x` (which must be zeroed by the caller if that is intended).
pub fn ssim_with_grad<T: Real>(
    x: &[T],
    y: &[T],
    c: usize,
    h: usize,
    w: usize,
    cfg: &SsimConfig<T>,
    grad_x: &mut [T],
) -> T {
    ssim_impl(x, y, c, h, w, cfg, Some(grad_x))
}

fn ssim_impl<T: Real>(
    x: &[T],
    y: &[T],
    c: usize,
    h: usize,
    w: usize,
    cfg: &SsimConfig<T>,
    mut grad_x: Option<&mut [T]>,
) -> T {
    check_dims(x, y, c, h, w);
    let k = cfg.window_size;
    assert!(h >= k && w >= k, "image {h}x{w} smaller than the {k}x{k} ssim window");
    let win = cfg.window();
    let (fh, fw) = (h - k + 1, w - k + 1);
    let positions = T::of((fh * fw * c) as f64);
    let two = T::of(2.0);

    let mut total = T::zero();
    let plane = h * w;
    for ch in 0..c {
        let xs = &x[ch * plane..(ch + 1) * plane];
        let ys = &y[ch * plane..(ch + 1) * plane];
        let xx: Vec<T> = xs.iter().map(|&v| v * v).collect();
        let yy: Vec<T> = ys.iter().map(|&v| v * v).collect();
        let xy: Vec<T> = xs.iter().zip(ys).map(|(&a, &b)| a * b).collect();
        let mu_x = blur_valid(xs, h, w, &win);
        let mu_y = blur_valid(ys, h, w, &win);
        let m_xx = blur_valid(&xx, h, w, &win);
        let m_yy = blur_valid(&yy, h, w, &win);
        let m_xy = blur_valid(&xy, h, w, &win);

        let mut coef_const = grad_x.is_some().then(|| vec![T::zero(); fh * fw]);
        let mut coef_y = grad_x.is_some().then(|| vec![T::zero(); fh * fw]);
        let mut coef_x = grad_x.is_some().then(|| vec![T::zero(); fh * fw]);

        for p in 0..fh * fw {
            let (mx, my) = (mu_x[p], mu_y[p]);
            let sxx = m_xx[p] - mx * mx;
            let syy = m_yy[p] - my * my;
            let sxy = m_xy[p] - mx * my;
            let a1 = two * mx * my + cfg.c1;
            let a2 = two * sxy + cfg.c2;
            let b1 = mx * mx + my * my + cfg.c1;
            let b2 = sxx + syy + cfg.c2;
            let d = b1 * b2;
            let s = a1 * a2 / d;
            total += s;

            if let (Some(cc), Some(cy), Some(cx)) =
                (coef_const.as_mut(), coef_y.as_mut(), coef_x.as_mut())
            {
                // d ssim / d x_i = w_i (a + b y_i + c x_i), per window
                let b = two * a1 / d;
                let cxv = -(two * s / b2);
                let a = two * (my * a2 - a1 * my) / d - two * s * mx / b1 + two * s * mx / b2;
                cc[p] = a / positions;
                cy[p] = b / positions;
                cx[p] = cxv / positions;
            }
        }

        if let (Some(cc), Some(cy), Some(cx), Some(gx)) =
            (coef_const.as_ref(), coef_y.as_ref(), coef_x.as_ref(), grad_x.as_deref_mut())
        {
            let g = &mut gx[ch * plane..(ch + 1) * plane];
            let mut sc = vec![T::zero(); plane];
            scatter_full(cc, h, w, &win, &mut sc);
            for i in 0..plane {
                g[i] += sc[i];
            }
            sc.iter_mut().for_each(|v| *v = T::zero());
            scatter_full(cy, h, w, &win, &mut sc);
            for i in 0..plane {
                g[i] += sc[i] * ys[i];
            }
            sc.iter_mut().for_each(|v| *v = T::zero());
            scatter_full(cx, h, w, &win, &mut sc);
            for i in 0..plane {
                g[i] += sc[i] * xs[i];
            }
        }
    }
    total / positions
}

/// Mean squared error over all values.
pub fn mse<T: Real>(x: &[T], y: &[T]) -> T {
    assert_eq!(x.len(), y.len(), "shape mismatch");
    let mut acc = T::zero();
    for (&a, &b) in x.iter().zip(y) {
        let d = a - b;
        acc += d * d;
    }
    acc / T::of(x.len() as f64)
}

/// Loss weights for the reconstruction objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights<T> {
    pub ssim: T,
    pub mse: T,
}

impl<T: Real> Default for LossWeights<T> {
    fn default() -> Self {
        Self { ssim: T::of(0.9), mse: T::of(0.1) }
    }
}

impl<T: Real> LossWeights<T> {
    pub fn validate(&self) -> Result<(), String> {
        let sum = self.ssim + self.mse;
        if (sum - T::one()).abs() > T::of(1e-6) {
            return Err(format!("loss weights must sum to 1, got {:?} + {:?}", self.ssim, self.mse));
        }
        Ok(())
    }
}

/// `w_ssim * (1 - ssim) + w_mse * mse`, plus its gradient with respect to
/// `recon`. Zero exactly when `recon == target`.
pub fn combined_loss<T: Real>(
    recon: &[T],
    target: &[T],
    c: usize,
    h: usize,
    w: usize,
    cfg: &SsimConfig<T>,
    weights: &LossWeights<T>,
) -> (T, Vec<T>) {
    check_dims(recon, target, c, h, w);
    let mut grad = vec![T::zero(); recon.len()];
    let s = ssim_with_grad(recon, target, c, h, w, cfg, &mut grad);
    // loss = w_s (1 - s) + w_m mse  =>  d/dx = -w_s ds/dx + w_m * 2 (x - y)/n
    let w_s = weights.ssim;
    for g in grad.iter_mut() {
        *g = -w_s * *g;
    }
    let n = T::of(recon.len() as f64);
    let two = T::of(2.0);
    let mut mse_acc = T::zero();
    for i in 0..recon.len() {
        let d = recon[i] - target[i];
        mse_acc += d * d;
        grad[i] += weights.mse * two * d / n;
    }
    let loss = w_s * (T::one() - s) + weights.mse * (mse_acc / n);
    (loss, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_img(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(0.0..1.0)).collect()
    }

    #[test]
    fn window_is_normalized() {
        let cfg = SsimConfig::<f64>::default();
        let w = cfg.window();
        assert_eq!(w.len(), 11);
        let sum: f64 = w.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(w[5] > w[0]);
    }

    #[test]
    fn ssim_identity_is_one() {
        let cfg = SsimConfig::<f64>::default();
        let x = rand_img(1, 3 * 16 * 16);
        let s = ssim(&x, &x, 3, 16, 16, &cfg);
        assert!((s - 1.0).abs() < 1e-9, "ssim(x,x) = {s}");
    }

    #[test]
    fn ssim_zero_vs_one_matches_closed_form() {
        let cfg = SsimConfig::<f64>::default();
        let x = vec![0.0; 16 * 16];
        let y = vec![1.0; 16 * 16];
        let s = ssim(&x, &y, 1, 16, 16, &cfg);
        // zero variances: S = C1 C2 / ((1 + C1) C2) = C1 / (1 + C1)
        let want = 1e-4 / (1.0 + 1e-4);
        assert!((s - want).abs() < 1e-12, "{s} vs {want}");
        assert!(s < 0.01);
    }

    #[test]
    fn ssim_is_symmetric_and_bounded() {
        let cfg = SsimConfig::<f64>::default();
        for seed in 0..5 {
            let x = rand_img(seed, 3 * 16 * 16);
            let y = rand_img(seed + 100, 3 * 16 * 16);
            let a = ssim(&x, &y, 3, 16, 16, &cfg);
            let b = ssim(&y, &x, 3, 16, 16, &cfg);
            assert!((a - b).abs() < 1e-12);
            assert!((-1.0..=1.0).contains(&a));
        }
    }

    #[test]
    fn ssim_gradient_vanishes_at_equal_inputs() {
        let cfg = SsimConfig::<f64>::default();
        let x = rand_img(7, 14 * 14);
        let mut g = vec![0.0; x.len()];
        ssim_with_grad(&x, &x.clone(), 1, 14, 14, &cfg, &mut g);
        for (i, &v) in g.iter().enumerate() {
            assert!(v.abs() < 1e-10, "grad[{i}] = {v}");
        }
    }

    #[test]
    fn combined_loss_zero_iff_equal() {
        let cfg = SsimConfig::<f64>::default();
        let wts = LossWeights::default();
        let x = rand_img(3, 3 * 12 * 12);
        let (loss, _) = combined_loss(&x, &x.clone(), 3, 12, 12, &cfg, &wts);
        assert!(loss.abs() < 1e-12);
        let y = rand_img(4, 3 * 12 * 12);
        let (loss2, _) = combined_loss(&x, &y, 3, 12, 12, &cfg, &wts);
        assert!(loss2 > 0.0);
    }

    #[test]
    fn mse_all_zeros_vs_all_ones() {
        let x = vec![0.0f64; 100];
        let y = vec![1.0f64; 100];
        assert_eq!(mse(&x, &y), 1.0);
        // combined = 0.9 (1 - ssim) + 0.1 on 16x16 planes
        let cfg = SsimConfig::<f64>::default();
        let wts = LossWeights::default();
        let x2 = vec![0.0; 16 * 16];
        let y2 = vec![1.0; 16 * 16];
        let s = ssim(&x2, &y2, 1, 16, 16, &cfg);
        let (loss, _) = combined_loss(&x2, &y2, 1, 16, 16, &cfg, &wts);
        assert!((loss - (0.9 * (1.0 - s) + 0.1)).abs() < 1e-12);
    }

    #[test]
    fn combined_gradient_matches_finite_differences() {
        let cfg = SsimConfig::<f64>::default();
        let wts = LossWeights::default();
        let (c, h, w) = (3, 16, 16);
        let x = rand_img(11, c * h * w);
        let y = rand_img(12, c * h * w);
        let (_, grad) = combined_loss(&x, &y, c, h, w, &cfg, &wts);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let eps = 1e-3;
        let mut worst = 0.0f64;
        for _ in 0..64 {
            let i = rng.gen_range(0..x.len());
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += eps;
            xm[i] -= eps;
            let (lp, _) = combined_loss(&xp, &y, c, h, w, &cfg, &wts);
            let (lm, _) = combined_loss(&xm, &y, c, h, w, &cfg, &wts);
            let fd = (lp - lm) / (2.0 * eps);
            let denom = fd.abs().max(grad[i].abs()).max(1e-8);
            worst = worst.max((fd - grad[i]).abs() / denom);
        }
        assert!(worst < 1e-3, "max relative error {worst}");
    }

    #[test]
    fn loss_weights_validate() {
        assert!(LossWeights::<f64>::default().validate().is_ok());
        assert!(LossWeights { ssim: 0.9f64, mse: 0.2 }.validate().is_err());
    }
}

//! Scalar abstraction for the numeric core.
//!
//! Everything that does real-valued math (tensors, losses, geometry) is
//! generic over [`Real`] so the same code runs in `f32` for the pipeline and
//! in `f64` for high-precision oracle tests. The trait also routes dense
//! matrix multiplication to the fast kernel for the concrete type.

use std::fmt::Debug;

use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float + FromPrimitive + NumAssign + Debug + Default + Send + Sync + 'static
{
    /// `c = alpha * op(a) @ op(b) + beta * c` for row-major slices, where
    /// `op` optionally transposes. `op(a)` is m x k, `op(b)` is k x n and
    /// `c` is m x n; a transposed operand is stored as its flipped shape.
    #[allow(clippy::too_many_arguments)]
    fn gemm_ex(
        m: usize, k: usize, n: usize,
        alpha: Self,
        a: &[Self], a_trans: bool,
        b: &[Self], b_trans: bool,
        beta: Self,
        c: &mut [Self],
    );

    /// Plain `c = alpha * a @ b + beta * c`.
    fn gemm(m: usize, k: usize, n: usize, alpha: Self, a: &[Self], b: &[Self], beta: Self, c: &mut [Self]) {
        Self::gemm_ex(m, k, n, alpha, a, false, b, false, beta, c);
    }

    /// Lossy conversion from `f64`, for constants.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite constant")
    }
}

/// Row/column strides for an operand, honoring a logical transpose.
fn strides(rows: usize, cols: usize, trans: bool) -> (isize, isize) {
    if trans {
        // stored as cols x rows row-major, used as rows x cols
        (1, rows as isize)
    } else {
        (cols as isize, 1)
    }
}

impl Real for f32 {
    fn gemm_ex(
        m: usize, k: usize, n: usize,
        alpha: f32,
        a: &[f32], a_trans: bool,
        b: &[f32], b_trans: bool,
        beta: f32,
        c: &mut [f32],
    ) {
        assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
        if m == 0 || k == 0 || n == 0 {
            return;
        }
        let (rsa, csa) = strides(m, k, a_trans);
        let (rsb, csb) = strides(k, n, b_trans);
        unsafe {
            matrixmultiply::sgemm(
                m, k, n, alpha,
                a.as_ptr(), rsa, csa,
                b.as_ptr(), rsb, csb,
                beta,
                c.as_mut_ptr(), n as isize, 1,
            );
        }
    }
}

impl Real for f64 {
    fn gemm_ex(
        m: usize, k: usize, n: usize,
        alpha: f64,
        a: &[f64], a_trans: bool,
        b: &[f64], b_trans: bool,
        beta: f64,
        c: &mut [f64],
    ) {
        assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
        if m == 0 || k == 0 || n == 0 {
            return;
        }
        let (rsa, csa) = strides(m, k, a_trans);
        let (rsb, csb) = strides(k, n, b_trans);
        unsafe {
            matrixmultiply::dgemm(
                m, k, n, alpha,
                a.as_ptr(), rsa, csa,
                b.as_ptr(), rsb, csb,
                beta,
                c.as_mut_ptr(), n as isize, 1,
            );
        }
    }
}

// --- deterministic trig ---
//
// Frames must be bit-identical across platforms, and libm's sin/cos/atan2
// are not pinned to exact results. These fixed polynomial versions use only
// IEEE-exact operations (+, *, /), so every platform computes the same bits.
// Accuracy is ~1 ulp over the ranges the simulation uses (|x| < ~20 rad).

const PIO2_HI: f64 = 1.570_796_326_794_896_6e0;
const PIO2_LO: f64 = 6.123_233_995_736_766e-17;

fn sin_poly(x: f64) -> f64 {
    // fdlibm __kernel_sin coefficients, |x| <= pi/4
    const S1: f64 = -1.66666666666666324348e-01;
    const S2: f64 = 8.33333333332248946124e-03;
    const S3: f64 = -1.98412698298579493134e-04;
    const S4: f64 = 2.75573137070700676789e-06;
    const S5: f64 = -2.50507602534068634195e-08;
    const S6: f64 = 1.58969099521155010221e-10;
    let z = x * x;
    let r = S2 + z * (S3 + z * (S4 + z * (S5 + z * S6)));
    x + x * z * (S1 + z * r)
}

fn cos_poly(x: f64) -> f64 {
    // fdlibm __kernel_cos coefficients, |x| <= pi/4
    const C1: f64 = 4.16666666666666019037e-02;
    const C2: f64 = -1.38888888888741095749e-03;
    const C3: f64 = 2.48015872894767294178e-05;
    const C4: f64 = -2.75573143513906633035e-07;
    const C5: f64 = 2.08757232129817482790e-09;
    const C6: f64 = -1.13596475577881948265e-11;
    let z = x * x;
    let r = z * z * (C1 + z * (C2 + z * (C3 + z * (C4 + z * (C5 + z * C6)))));
    1.0 - (0.5 * z - r)
}

/// Deterministic `(sin x, cos x)`, valid for the moderate angles used here.
pub fn det_sincos(x: f64) -> (f64, f64) {
    let n = (x * std::f64::consts::FRAC_2_PI).round();
    let r = (x - n * PIO2_HI) - n * PIO2_LO;
    let (s, c) = (sin_poly(r), cos_poly(r));
    match (n as i64).rem_euclid(4) {
        0 => (s, c),
        1 => (c, -s),
        2 => (-s, -c),
        _ => (-c, s),
    }
}

// fdlibm atan: interval reduction to |t| <= 7/16 plus a rational series.
const ATAN_HI: [f64; 4] = [
    4.63647609000806093515e-01, // atan(0.5)
    7.85398163397448278999e-01, // atan(1.0)
    9.82793723247329054082e-01, // atan(1.5)
    1.57079632679489655800e+00, // atan(inf)
];
const ATAN_LO: [f64; 4] = [
    2.26987774529616870924e-17,
    3.06161699786838301793e-17,
    1.39033110312309984516e-17,
    6.12323399573676603587e-17,
];
const AT: [f64; 11] = [
    3.33333333333329318027e-01,
    -1.99999999998764832476e-01,
    1.42857142725034663711e-01,
    -1.11111104054623557880e-01,
    9.09088713343650656196e-02,
    -7.69187620504482999495e-02,
    6.66107313738753120669e-02,
    -5.83357013379057348645e-02,
    4.97687799461593236017e-02,
    -3.65315727442169155270e-02,
    1.62858201153657823623e-02,
];

fn det_atan(x: f64) -> f64 {
    let sign = x < 0.0;
    let ax = x.abs();
    let (id, t): (Option<usize>, f64) = if ax < 0.4375 {
        (None, ax)
    } else if ax < 0.6875 {
        (Some(0), (2.0 * ax - 1.0) / (2.0 + ax))
    } else if ax < 1.1875 {
        (Some(1), (ax - 1.0) / (ax + 1.0))
    } else if ax < 2.4375 {
        (Some(2), (ax - 1.5) / (1.0 + 1.5 * ax))
    } else {
        (Some(3), -1.0 / ax)
    };
    let z = t * t;
    let w = z * z;
    let s1 = z * (AT[0] + w * (AT[2] + w * (AT[4] + w * (AT[6] + w * (AT[8] + w * AT[10])))));
    let s2 = w * (AT[1] + w * (AT[3] + w * (AT[5] + w * (AT[7] + w * AT[9]))));
    let v = match id {
        None => t - t * (s1 + s2),
        Some(i) => ATAN_HI[i] - ((t * (s1 + s2) - ATAN_LO[i]) - t),
    };
    if sign {
        -v
    } else {
        v
    }
}

/// Deterministic `atan2`, matching the standard quadrant conventions.
pub fn det_atan2(y: f64, x: f64) -> f64 {
    use std::f64::consts::PI;
    if x == 0.0 && y == 0.0 {
        return 0.0;
    }
    if x > 0.0 {
        det_atan(y / x)
    } else if x < 0.0 {
        if y >= 0.0 {
            det_atan(y / x) + PI
        } else {
            det_atan(y / x) - PI
        }
    } else if y > 0.0 {
        PIO2_HI + PIO2_LO
    } else {
        -(PIO2_HI + PIO2_LO)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive<T: Real>(m: usize, k: usize, n: usize, a: &[T], b: &[T]) -> Vec<T> {
        let mut c = vec![T::zero(); m * n];
        for i in 0..m {
            for j in 0..n {
                let mut acc = T::zero();
                for p in 0..k {
                    acc = acc + a[i * k + p] * b[p * n + j];
                }
                c[i * n + j] = acc;
            }
        }
        c
    }

    #[test]
    fn gemm_matches_naive() {
        let (m, k, n) = (7, 5, 9);
        let a: Vec<f64> = (0..m * k).map(|i| (i as f64) * 0.37 - 3.0).collect();
        let b: Vec<f64> = (0..k * n).map(|i| 1.0 - (i as f64) * 0.11).collect();
        let mut c = vec![0.0f64; m * n];
        f64::gemm(m, k, n, 1.0, &a, &b, 0.0, &mut c);
        let want = naive(m, k, n, &a, &b);
        for (x, y) in c.iter().zip(&want) {
            assert!((x - y).abs() < 1e-12, "{x} vs {y}");
        }
    }

    #[test]
    fn gemm_accumulates_with_beta() {
        let a = [1.0f32, 2.0, 3.0, 4.0];
        let b = [1.0f32, 0.0, 0.0, 1.0];
        let mut c = [10.0f32, 0.0, 0.0, 10.0];
        f32::gemm(2, 2, 2, 1.0, &a, &b, 1.0, &mut c);
        assert_eq!(c, [11.0, 2.0, 3.0, 14.0]);
    }

    #[test]
    fn gemm_transposes_match_explicit_transposition() {
        let (m, k, n) = (4, 3, 5);
        let a: Vec<f64> = (0..m * k).map(|i| i as f64 * 0.3 - 1.0).collect();
        let b: Vec<f64> = (0..k * n).map(|i| 2.0 - i as f64 * 0.21).collect();
        let want = naive(m, k, n, &a, &b);

        // a stored transposed (k x m)
        let mut at = vec![0.0; m * k];
        for i in 0..m {
            for j in 0..k {
                at[j * m + i] = a[i * k + j];
            }
        }
        let mut c = vec![0.0; m * n];
        f64::gemm_ex(m, k, n, 1.0, &at, true, &b, false, 0.0, &mut c);
        for (x, y) in c.iter().zip(&want) {
            assert!((x - y).abs() < 1e-12);
        }

        // b stored transposed (n x k)
        let mut bt = vec![0.0; k * n];
        for i in 0..k {
            for j in 0..n {
                bt[j * k + i] = b[i * n + j];
            }
        }
        let mut c2 = vec![0.0; m * n];
        f64::gemm_ex(m, k, n, 1.0, &a, false, &bt, true, 0.0, &mut c2);
        for (x, y) in c2.iter().zip(&want) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn det_trig_tracks_libm() {
        let mut x = -20.0;
        while x < 20.0 {
            let (s, c) = det_sincos(x);
            assert!((s - x.sin()).abs() < 1e-13, "sin({x})");
            assert!((c - x.cos()).abs() < 1e-13, "cos({x})");
            x += 0.0137;
        }
        for &(y, x) in &[(0.0, 1.0), (1.0, 0.0), (-1.0, 0.0), (3.0, -4.0), (-3.0, -4.0), (0.5, 2.0)] {
            assert!((det_atan2(y, x) - y.atan2(x)).abs() < 1e-13, "atan2({y},{x})");
        }
    }
}

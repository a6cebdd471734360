//! Shared numerical kernels: standard-normal functions with stable deep-tail
//! evaluation, adaptive Simpson quadrature, high-order finite-difference
//! stencils, and a golden-section minimizer.

pub const SQRT_2PI: f64 = 2.506_628_274_631_000_5;
pub const LN_2PI: f64 = 1.837_877_066_409_345_3;
pub const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Standard normal density φ(x).
#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

/// Standard normal log density.
#[inline]
pub fn norm_logpdf(x: f64) -> f64 {
    -0.5 * x * x - 0.5 * LN_2PI
}

/// Standard normal CDF Φ(x), accurate in both tails via erfc.
#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Reciprocal Mills ratio φ(x)/Φ(x) for x ≤ −12, via the asymptotic series
/// for the Mills ratio R(t) = Φ(−t)/φ(t) = (1/t)·Σ (−1)^k (2k−1)!!/t^{2k}.
///
/// For t ≥ 12 the smallest series term sits far below f64 epsilon, so the
/// truncated sum is fully accurate; it never under- or overflows, unlike
/// the direct ratio (dies near x ≈ −37) or an erfcx product (overflows
/// there too). Full precision matters: the C-function recursion cancels
/// ~t²-sized terms down to O(1/t³) residues, amplifying any φ/Φ error by
/// orders of magnitude.
pub fn inv_mills_neg(x: f64) -> f64 {
    debug_assert!(x <= -12.0);
    let t = -x;
    let t2 = t * t;
    let mut sum = 1.0;
    let mut term = 1.0;
    for k in 1..200 {
        term *= -((2 * k - 1) as f64) / t2;
        let prev = sum;
        sum += term;
        if sum == prev {
            break;
        }
    }
    t / sum
}

/// log Φ(x), stable over the whole real line.
///
/// erfc keeps good relative accuracy down to its underflow near x ≈ −37;
/// from −30 on the left tail goes through the Mills series,
/// log Φ = log φ − log(φ/Φ), which never underflows.
pub fn norm_logcdf(x: f64) -> f64 {
    if x < -30.0 {
        norm_logpdf(x) - inv_mills_neg(x).ln()
    } else if x < 6.0 {
        norm_cdf(x).ln()
    } else {
        // Φ = 1 − Φ(−x); Φ(−x) tiny
        let q = 0.5 * libm::erfc(x / SQRT_2);
        (-q).ln_1p()
    }
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance
/// `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

/// Trapezoidal integral of samples `ys` on abscissa `xs`.
pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    let mut acc = 0.0;
    for i in 1..xs.len() {
        acc += 0.5 * (ys[i] + ys[i - 1]) * (xs[i] - xs[i - 1]);
    }
    acc
}

/// Cumulative integral of samples on a grid via the derivative-corrected
/// trapezoid rule (Euler–Maclaurin form, exact for cubics), with endpoint
/// slopes from one-sided differences. Fourth-order on smooth data, which a
/// plain trapezoid CDF is not.
pub fn cum_integral(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    debug_assert!(n >= 3 && ys.len() == n);
    // three-point slope estimates on a possibly non-uniform grid
    let slope = |i: usize| -> f64 {
        if i == 0 {
            let (h0, h1) = (xs[1] - xs[0], xs[2] - xs[1]);
            -(2.0 * h0 + h1) / (h0 * (h0 + h1)) * ys[0] + (h0 + h1) / (h0 * h1) * ys[1]
                - h0 / (h1 * (h0 + h1)) * ys[2]
        } else if i == n - 1 {
            let (h0, h1) = (xs[n - 2] - xs[n - 3], xs[n - 1] - xs[n - 2]);
            h1 / (h0 * (h0 + h1)) * ys[n - 3] - (h0 + h1) / (h0 * h1) * ys[n - 2]
                + (2.0 * h1 + h0) / (h1 * (h0 + h1)) * ys[n - 1]
        } else {
            let (h0, h1) = (xs[i] - xs[i - 1], xs[i + 1] - xs[i]);
            -h1 / (h0 * (h0 + h1)) * ys[i - 1] + (h1 - h0) / (h0 * h1) * ys[i]
                + h0 / (h1 * (h0 + h1)) * ys[i + 1]
        }
    };
    let mut out = Vec::with_capacity(n);
    out.push(0.0);
    let mut acc = 0.0;
    let mut d_prev = slope(0);
    for i in 1..n {
        let h = xs[i] - xs[i - 1];
        let d_cur = slope(i);
        acc += 0.5 * h * (ys[i - 1] + ys[i]) - h * h / 12.0 * (d_cur - d_prev);
        out.push(acc);
        d_prev = d_cur;
    }
    out
}

/// Golden-section minimization of `f` on `[a, b]` to abscissa tolerance
/// `xtol`. The bracket must contain the minimizer.
pub fn golden_min<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64, xtol: f64) -> f64 {
    const INVPHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INVPHI * (b - a);
    let mut d = a + INVPHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..400 {
        if (b - a).abs() <= xtol {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INVPHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INVPHI * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Central finite differences of order `r` ∈ 1..=4 on a 7-point stencil.
/// Errors are O(h⁶) for r ≤ 2 and O(h⁴) for r ∈ {3, 4}.
pub fn central_diff7<F: Fn(f64) -> f64>(f: &F, x: f64, h: f64, r: usize) -> f64 {
    let v: Vec<f64> = (-3..=3).map(|k| f(x + k as f64 * h)).collect();
    match r {
        1 => (-v[0] + 9.0 * v[1] - 45.0 * v[2] + 45.0 * v[4] - 9.0 * v[5] + v[6]) / (60.0 * h),
        2 => {
            (2.0 * v[0] - 27.0 * v[1] + 270.0 * v[2] - 490.0 * v[3] + 270.0 * v[4] - 27.0 * v[5]
                + 2.0 * v[6])
                / (180.0 * h * h)
        }
        3 => (v[0] - 8.0 * v[1] + 13.0 * v[2] - 13.0 * v[4] + 8.0 * v[5] - v[6]) / (8.0 * h * h * h),
        4 => {
            (-v[0] + 12.0 * v[1] - 39.0 * v[2] + 56.0 * v[3] - 39.0 * v[4] + 12.0 * v[5] - v[6])
                / (6.0 * h * h * h * h)
        }
        _ => panic!("central_diff7 supports orders 1..=4"),
    }
}

/// Central finite differences of order `r` ∈ 1..=5 on a 9-point stencil.
/// Errors are O(h⁸) for r ≤ 2, O(h⁶) for r ∈ {3, 4}, O(h⁴) for r = 5.
pub fn central_diff9<F: Fn(f64) -> f64>(f: &F, x: f64, h: f64, r: usize) -> f64 {
    let v: Vec<f64> = (-4..=4).map(|k| f(x + k as f64 * h)).collect();
    match r {
        1 => {
            (3.0 * v[0] - 32.0 * v[1] + 168.0 * v[2] - 672.0 * v[3] + 672.0 * v[5] - 168.0 * v[6]
                + 32.0 * v[7]
                - 3.0 * v[8])
                / (840.0 * h)
        }
        2 => {
            (-9.0 * v[0] + 128.0 * v[1] - 1008.0 * v[2] + 8064.0 * v[3] - 14350.0 * v[4]
                + 8064.0 * v[5]
                - 1008.0 * v[6]
                + 128.0 * v[7]
                - 9.0 * v[8])
                / (5040.0 * h * h)
        }
        3 => {
            (-7.0 * v[0] + 72.0 * v[1] - 338.0 * v[2] + 488.0 * v[3] - 488.0 * v[5] + 338.0 * v[6]
                - 72.0 * v[7]
                + 7.0 * v[8])
                / (240.0 * h.powi(3))
        }
        4 => {
            (7.0 * v[0] - 96.0 * v[1] + 676.0 * v[2] - 1952.0 * v[3] + 2730.0 * v[4]
                - 1952.0 * v[5]
                + 676.0 * v[6]
                - 96.0 * v[7]
                + 7.0 * v[8])
                / (240.0 * h.powi(4))
        }
        5 => {
            (v[0] - 9.0 * v[1] + 26.0 * v[2] - 29.0 * v[3] + 29.0 * v[5] - 26.0 * v[6]
                + 9.0 * v[7]
                - v[8])
                / (6.0 * h.powi(5))
        }
        _ => panic!("central_diff9 supports orders 1..=5"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn cdf_basics() {
        assert_abs_diff_eq!(norm_cdf(0.0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(norm_pdf(0.0), 0.398_942_280_401_432_7, epsilon = 1e-16);
        assert_abs_diff_eq!(norm_logcdf(0.0), (0.5f64).ln(), epsilon = 1e-14);
    }

    // Deep-tail fixtures computed with mpmath (50 digits): log(Phi(x)).
    #[test]
    fn logcdf_deep_tail() {
        let cases = [
            (-5.0, -15.064_998_393_988_726),
            (-8.0, -35.013_437_159_914_55),
            (-10.0, -53.231_285_150_512_47),
            (-20.0, -203.917_155_371_097_26),
            (-35.0, -616.975_101_261_922_5),
            (-120.0, -7205.706_499_708_379),
        ];
        for (x, want) in cases {
            let got = norm_logcdf(x);
            assert!(
                ((got - want) / want).abs() < 1e-12,
                "logcdf({x}) = {got}, want {want}"
            );
        }
    }

    #[test]
    fn mills_matches_direct_ratio_at_crossover() {
        for x in [-12.0, -13.0, -20.0, -30.0] {
            let direct = norm_pdf(x) / norm_cdf(x);
            let series = inv_mills_neg(x);
            // erfc loses a few digits to argument conditioning; the series
            // side is fully accurate
            assert!(
                ((direct - series) / series).abs() < 5e-13,
                "x={x}: {direct} vs {series}"
            );
        }
    }

    #[test]
    fn simpson_integrates_gaussian() {
        let v = adaptive_simpson(&norm_pdf, -10.0, 10.0, 1e-12);
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-11);
    }

    #[test]
    fn cumulative_integral_is_fourth_order() {
        // integral of cos on [0, 2]: sin(x)
        let n = 101;
        let xs: Vec<f64> = (0..n).map(|i| 2.0 * i as f64 / (n - 1) as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.cos()).collect();
        let cum = cum_integral(&xs, &ys);
        for (x, c) in xs.iter().zip(&cum) {
            assert_abs_diff_eq!(*c, x.sin(), epsilon = 5e-9);
        }
    }

    #[test]
    fn golden_finds_quartic_min() {
        let x = golden_min(&|x: f64| (x - 1.3).powi(4) + 2.0, -4.0, 5.0, 1e-12);
        assert_abs_diff_eq!(x, 1.3, epsilon = 1e-3);
    }

    #[test]
    fn stencils_exact_on_polynomials() {
        let f = |x: f64| 1.0 + x + x.powi(2) + x.powi(3) + x.powi(4);
        assert_abs_diff_eq!(central_diff7(&f, 0.0, 0.1, 1), 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(central_diff7(&f, 0.0, 0.1, 2), 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(central_diff7(&f, 0.0, 0.1, 3), 6.0, epsilon = 1e-8);
        assert_abs_diff_eq!(central_diff7(&f, 0.0, 0.1, 4), 24.0, epsilon = 1e-6);
        for r in 1..=5 {
            let want = [1.0, 2.0, 6.0, 24.0, 0.0][r - 1];
            assert_abs_diff_eq!(central_diff9(&f, 0.0, 0.1, r), want, epsilon = 1e-6);
        }
    }
}

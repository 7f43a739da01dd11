//! Quadrature machinery: globally adaptive Gauss–Kronrod 15, Gauss–Legendre
//! panel rules, and the trigonometric weights for periodic logarithmic
//! kernels used by the curve module.

use num_complex::Complex64;
use std::collections::BinaryHeap;

// 15-point Kronrod abscissas (positive half) and weights, with the embedded
// 7-point Gauss weights. Standard QUADPACK constants.
const XGK15: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK15: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG7: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_95,
    0.417_959_183_673_469_4,
];

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: Complex64,
    pub abs_error: f64,
    pub evaluations: usize,
}

fn gk15_panel<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> (Complex64, f64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let fc = f(mid);
    let mut kronrod = fc * WGK15[7];
    let mut gauss = fc * WG7[3];
    for j in 0..7 {
        let dx = half * XGK15[j];
        let fsum = f(mid - dx) + f(mid + dx);
        kronrod += fsum * WGK15[j];
        if j % 2 == 1 {
            gauss += fsum * WG7[j / 2];
        }
    }
    let value = kronrod * half;
    // |K - G| estimates the Gauss error; conservative for the Kronrod value.
    let err = ((kronrod - gauss) * half).norm().max(1e-300);
    (value, err)
}

#[derive(Debug)]
struct Interval {
    err: f64,
    a: f64,
    b: f64,
    value: Complex64,
}

impl PartialEq for Interval {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Interval {}
impl PartialOrd for Interval {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Interval {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err.partial_cmp(&other.err).unwrap_or(std::cmp::Ordering::Equal)
    }
}

/// Globally adaptive Gauss–Kronrod integration of a complex-valued function
/// over [a, b]. Splits the interval with the largest error estimate until the
/// summed estimate drops below `tol` or `max_panels` is reached.
pub fn adaptive_gk15<F: Fn(f64) -> Complex64>(f: F, a: f64, b: f64, tol: f64, max_panels: usize) -> QuadResult {
    let mut heap = BinaryHeap::new();
    let (v, e) = gk15_panel(&f, a, b);
    heap.push(Interval { err: e, a, b, value: v });
    let mut evals = 15;
    loop {
        let total_err: f64 = heap.iter().map(|i| i.err).sum();
        if total_err <= tol || heap.len() >= max_panels {
            let value = heap.iter().map(|i| i.value).sum();
            return QuadResult { value, abs_error: total_err, evaluations: evals };
        }
        let worst = heap.pop().expect("heap nonempty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval at floating-point resolution; keep as is
            let mut value: Complex64 = heap.iter().map(|i| i.value).sum();
            value += worst.value;
            let err = heap.iter().map(|i| i.err).sum::<f64>() + worst.err;
            return QuadResult { value, abs_error: err, evaluations: evals };
        }
        let (v1, e1) = gk15_panel(&f, worst.a, mid);
        let (v2, e2) = gk15_panel(&f, mid, worst.b);
        evals += 30;
        heap.push(Interval { err: e1, a: worst.a, b: mid, value: v1 });
        heap.push(Interval { err: e2, a: mid, b: worst.b, value: v2 });
    }
}

/// Real-valued convenience wrapper around [`adaptive_gk15`].
pub fn adaptive_gk15_real<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64, max_panels: usize) -> (f64, f64) {
    let r = adaptive_gk15(|x| Complex64::new(f(x), 0.0), a, b, tol, max_panels);
    (r.value.re, r.abs_error)
}

/// Gauss–Legendre nodes and weights on [−1, 1], by Newton iteration on the
/// Legendre polynomial. Exact for polynomials of degree ≤ 2n−1.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        // Chebyshev-based initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // evaluate P_n(x) and P_n'(x) by recurrence
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            dp = n as f64 * (x * p - p0) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Integrate `f` over [a, b] with a fixed-order Gauss–Legendre rule.
pub fn gauss_panel<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, nodes: &[f64], weights: &[f64]) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    nodes
        .iter()
        .zip(weights)
        .map(|(&x, &w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

/// Quadrature weights R_m for the periodic logarithmic kernel
/// ln(4 sin²((t−τ)/2)) on 2n equispaced points τ_j = jπ/n:
///
/// ```text
/// ∫₀^{2π} ln(4 sin²((t_i−τ)/2)) f(τ) dτ ≈ Σ_j R_{|i−j|} f(τ_j),
/// R_m = −(2π/n) Σ_{k=1}^{n−1} cos(k m π/n)/k − (π/n²)(−1)^m.
/// ```
///
/// Spectrally accurate for analytic f (Kussmaul–Martensen rule).
pub fn log_kernel_weights(n: usize) -> Vec<f64> {
    assert!(n >= 1);
    let mut r = vec![0.0; 2 * n];
    for (m, rm) in r.iter_mut().enumerate() {
        let mut s = 0.0;
        for k in 1..n {
            s += (k as f64 * m as f64 * std::f64::consts::PI / n as f64).cos() / k as f64;
        }
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        *rm = -(2.0 * std::f64::consts::PI / n as f64) * s
            - std::f64::consts::PI / (n as f64 * n as f64) * sign;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn gk15_exact_on_smooth_integrand() {
        let (v, e) = adaptive_gk15_real(|x| (x * x).exp(), 0.0, 1.0, 1e-12, 200);
        // int_0^1 e^{x^2} dx
        assert_relative_eq!(v, 1.462_651_745_907_181_6, max_relative = 1e-12);
        assert!(e < 1e-10);
    }

    #[test]
    fn gk15_handles_oscillatory_decay() {
        // int_{-200}^{200} cos(10 x)/(x^2+1) dx, reference from per-period
        // panel integration at 30 digits
        let (v, _) = adaptive_gk15_real(|x| (10.0 * x).cos() / (x * x + 1.0), -200.0, 200.0, 1e-12, 8000);
        assert_relative_eq!(v, 1.472_799_973_110_566_8e-4, epsilon = 1e-13);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (xs, ws) = gauss_legendre(6);
        // degree 11 polynomial
        let val = gauss_panel(|x| x.powi(10) + 3.0 * x.powi(7) - x, -1.0, 1.0, &xs, &ws);
        assert_relative_eq!(val, 2.0 / 11.0, max_relative = 1e-13);
        let val2 = gauss_panel(|x| x * x, 0.0, 2.0, &xs, &ws);
        assert_relative_eq!(val2, 8.0 / 3.0, max_relative = 1e-13);
    }

    #[test]
    fn log_weights_reproduce_fourier_modes() {
        // int_0^{2pi} ln(4 sin^2((t - tau)/2)) cos(k tau) dtau = -(2 pi / k) cos(k t)
        let n = 32;
        let r = log_kernel_weights(n);
        let t_i = |i: usize| PI * i as f64 / n as f64;
        for k in 1..6usize {
            let i = 3;
            let mut s = 0.0;
            for j in 0..2 * n {
                let m = (i as isize - j as isize).unsigned_abs() % (2 * n);
                let m = m.min(2 * n - m);
                s += r[m] * (k as f64 * t_i(j)).cos();
            }
            assert_relative_eq!(s, -(2.0 * PI / k as f64) * (k as f64 * t_i(i)).cos(), epsilon = 1e-12);
        }
        // constant function integrates to zero
        let total: f64 = (0..2 * n)
            .map(|j| {
                let m = j.min(2 * n - j);
                r[m]
            })
            .sum();
        assert!(total.abs() < 1e-12);
    }
}

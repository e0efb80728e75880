//! Reference computations that do not go through the library's numerics.
#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Romberg integration on `[a, b]` with `levels` halvings.
pub fn romberg<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, levels: usize) -> f64 {
    let mut r = vec![vec![0.0; levels + 1]; levels + 1];
    let mut h = b - a;
    r[0][0] = 0.5 * h * (f(a) + f(b));
    for i in 1..=levels {
        h *= 0.5;
        let n = 1usize << (i - 1);
        let mid: f64 = (0..n).map(|k| f(a + (2 * k + 1) as f64 * h)).sum();
        r[i][0] = 0.5 * r[i - 1][0] + h * mid;
        let mut p = 1.0;
        for j in 1..=i {
            p *= 4.0;
            r[i][j] = r[i][j - 1] + (r[i][j - 1] - r[i - 1][j - 1]) / (p - 1.0);
        }
    }
    r[levels][levels]
}

/// `erfc(x) = 2/sqrt(pi) * int_x^inf exp(-t^2) dt`, panel by panel.
pub fn erfc_by_quadrature(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 - erfc_by_quadrature(-x);
    }
    let panel = 0.25;
    let panels = 60;
    let mut total = 0.0;
    // far panels first so small terms are not swamped
    for k in (0..panels).rev() {
        let a = x + k as f64 * panel;
        total += romberg(|t| (-t * t).exp(), a, a + panel, 10);
    }
    2.0 / PI.sqrt() * total
}

/// `psi(x) = -gamma + sum_n (x - 1) / ((n + 1)(n + x))` with a midpoint tail.
pub fn digamma_series(x: f64) -> f64 {
    let n_terms = 200_000usize;
    let mut s = 0.0;
    for n in (0..n_terms).rev() {
        let n = n as f64;
        s += (x - 1.0) / ((n + 1.0) * (n + x));
    }
    let n = n_terms as f64;
    -EULER_GAMMA + s + ((n - 0.5 + x) / (n + 0.5)).ln()
}

/// `psi'(x) = sum_n 1 / (n + x)^2` with a midpoint tail.
pub fn trigamma_series(x: f64) -> f64 {
    let n_terms = 200_000usize;
    let mut s = 0.0;
    for n in (0..n_terms).rev() {
        let d = n as f64 + x;
        s += 1.0 / (d * d);
    }
    s + 1.0 / (n_terms as f64 - 0.5 + x)
}

pub fn se(amplitude: f64, precision: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let q: f64 = precision
        .iter()
        .zip(a.iter().zip(b))
        .map(|(p, (x, y))| p * (x - y) * (x - y))
        .sum();
    amplitude * (-0.5 * q).exp()
}

/// Homoscedastic GP posterior at `x` with noise variance `noise` on the
/// averaged outputs, via nalgebra's own Cholesky.
pub fn homoscedastic_posterior(
    amplitude: f64,
    precision: &[f64],
    inputs: &[Vec<f64>],
    ybar: &DVector<f64>,
    noise: f64,
    x: &[f64],
) -> (f64, f64) {
    let n = inputs.len();
    let k = DMatrix::from_fn(n, n, |i, j| {
        se(amplitude, precision, &inputs[i], &inputs[j]) + if i == j { noise } else { 0.0 }
    });
    let kx = DVector::from_fn(n, |i, _| se(amplitude, precision, &inputs[i], x));
    let chol = k.cholesky().expect("noisy Gram is positive definite");
    let alpha = chol.solve(ybar);
    let v = chol.solve(&kx);
    (kx.dot(&alpha), se(amplitude, precision, x, x) - kx.dot(&v))
}

pub fn normal_upper_tail(z: f64) -> f64 {
    0.5 * hetgp::specfun::erfc(z / std::f64::consts::SQRT_2)
}

/// Posterior of `f(x)` for two training inputs by a tensor trapezoid rule
/// over `h = (h1, h2)`.
pub struct TwoPointQuadrature {
    /// `(weight, mean, variance)` per grid node, weights summing to 1.
    pub nodes: Vec<(f64, f64, f64)>,
}

pub struct TwoPointProblem<'a> {
    pub inputs: [&'a [f64]; 2],
    pub ybar: [f64; 2],
    pub replicates: usize,
    pub kernel_f: (f64, &'a [f64]),
    pub kernel_h: (f64, &'a [f64]),
    pub center: [f64; 2],
    pub half_width: [f64; 2],
    pub points_per_axis: usize,
}

fn log_normal_2(y: [f64; 2], a: f64, b: f64, d: f64) -> f64 {
    let det = a * d - b * b;
    let q = (d * y[0] * y[0] - 2.0 * b * y[0] * y[1] + a * y[1] * y[1]) / det;
    -0.5 * q - 0.5 * det.ln() - (2.0 * PI).ln()
}

impl TwoPointQuadrature {
    pub fn new(p: &TwoPointProblem<'_>, x: &[f64]) -> Self {
        let [x1, x2] = p.inputs;
        let (af, pf) = p.kernel_f;
        let (ah, ph) = p.kernel_h;
        let k12 = se(af, pf, x1, x2);
        let l12 = se(ah, ph, x1, x2);
        let kx = [se(af, pf, x1, x), se(af, pf, x2, x)];
        let kxx = se(af, pf, x, x);
        let s = p.replicates as f64;
        let n = p.points_per_axis;
        let axis = |c: usize| -> Vec<(f64, f64)> {
            (0..n)
                .map(|i| {
                    let t = -1.0 + 2.0 * i as f64 / (n - 1) as f64;
                    let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
                    (p.center[c] + t * p.half_width[c], w)
                })
                .collect()
        };
        let (a1, a2) = (axis(0), axis(1));
        let mut logs = Vec::with_capacity(n * n);
        let mut moments = Vec::with_capacity(n * n);
        for &(h1, w1) in &a1 {
            for &(h2, w2) in &a2 {
                let a = af + h1.exp() / s;
                let d = af + h2.exp() / s;
                let log_target = log_normal_2(p.ybar, a, k12, d) + log_normal_2([h1, h2], ah, l12, ah);
                logs.push(log_target + (w1 * w2).ln());
                let det = a * d - k12 * k12;
                let inv = |u: [f64; 2]| [(d * u[0] - k12 * u[1]) / det, (a * u[1] - k12 * u[0]) / det];
                let alpha = inv(p.ybar);
                let kinv = inv(kx);
                let mean = kx[0] * alpha[0] + kx[1] * alpha[1];
                let var = kxx - (kx[0] * kinv[0] + kx[1] * kinv[1]);
                moments.push((mean, var));
            }
        }
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let raw: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = raw.iter().sum();
        let nodes = raw
            .iter()
            .zip(moments)
            .map(|(r, (m, v))| (r / total, m, v))
            .collect();
        Self { nodes }
    }

    pub fn mean(&self) -> f64 {
        self.nodes.iter().map(|(w, m, _)| w * m).sum()
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        self.nodes
            .iter()
            .map(|(w, m, v)| w * (v + (m - mu) * (m - mu)))
            .sum()
    }

    pub fn delta(&self, gamma: f64) -> f64 {
        self.nodes
            .iter()
            .map(|(w, m, v)| w * normal_upper_tail((gamma - m) / v.sqrt()))
            .sum()
    }
}

pub fn relative_error(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs()
}

//! Expectations over a zero-mean Gaussian by adaptive Gauss-Legendre.
//!
//! Soft thresholding has kinks at `+-theta`, which ruins the convergence of
//! Gauss-Hermite rules, so integrands are split at caller-supplied
//! breakpoints and each piece is bisected until a 16-point rule agrees with
//! its two halves.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        let mut nodes = vec![0.0; order];
        let mut weights = vec![0.0; order];
        let nf = order as f64;
        for i in 0..order.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                // P_n(x) and P_n'(x) by the three-term recurrence
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=order {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                let pn = if order == 0 { 1.0 } else { p1 };
                let pm = if order == 1 { 1.0 } else { p0 };
                dp = nf * (x * pn - pm) / (x * x - 1.0);
                let dx = pn / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[order - 1 - i] = x;
            weights[i] = w;
            weights[order - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    /// Integral of `f` over [a, b].
    pub fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: &F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }
}

/// Computes `E f(r)` for `r ~ N(0, var)`.
#[derive(Debug, Clone)]
pub struct GaussianExpectation {
    rule: GaussLegendre,
    /// Integration range in standard deviations.
    pub half_width: f64,
    /// Pieces each breakpoint-delimited segment starts with.
    pub initial_pieces: usize,
    pub tol: f64,
    pub max_depth: usize,
}

impl Default for GaussianExpectation {
    fn default() -> Self {
        GaussianExpectation {
            rule: GaussLegendre::new(16),
            half_width: 12.0,
            initial_pieces: 4,
            tol: 1e-13,
            max_depth: 40,
        }
    }
}

impl GaussianExpectation {
    /// A finer variant: more starting pieces and a tighter tolerance.
    pub fn refined(&self) -> Self {
        GaussianExpectation {
            rule: GaussLegendre::new(32),
            half_width: self.half_width + 2.0,
            initial_pieces: self.initial_pieces * 2,
            tol: self.tol * 0.1,
            max_depth: self.max_depth,
        }
    }

    pub fn expect<F: Fn(f64) -> f64>(&self, var: f64, breakpoints: &[f64], f: F) -> Result<f64> {
        if !(var.is_finite() && var >= 0.0) {
            return Err(Error::InvalidVariance(var));
        }
        if var == 0.0 {
            return Ok(f(0.0));
        }
        let sd = var.sqrt();
        let norm = 1.0 / (2.0 * PI * var).sqrt();
        let g = |r: f64| f(r) * norm * (-0.5 * r * r / var).exp();
        let lim = self.half_width * sd;
        let mut cuts: Vec<f64> = breakpoints
            .iter()
            .copied()
            .filter(|b| b.is_finite() && b.abs() < lim)
            .chain([-lim, 0.0, lim])
            .collect();
        cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * lim);

        let mut pieces = Vec::new();
        for w in cuts.windows(2) {
            let step = (w[1] - w[0]) / self.initial_pieces as f64;
            for k in 0..self.initial_pieces {
                let a = w[0] + step * k as f64;
                let b = if k + 1 == self.initial_pieces { w[1] } else { a + step };
                pieces.push((a, b, self.rule.integrate(a, b, &g)));
            }
        }
        // absolute for O(1) integrands, relative for large ones
        let scale = pieces.iter().map(|p| p.2.abs()).sum::<f64>().max(1.0);
        let mut total = 0.0;
        let mut residual = 0.0;
        for (a, b, whole) in pieces {
            let (v, r) = self.adapt(a, b, whole, self.tol * scale, 0, &g);
            total += v;
            residual += r;
        }
        if !total.is_finite() || residual > 1e-8 * (1.0 + total.abs()) {
            return Err(Error::QuadratureFailure {
                residual: if total.is_finite() { residual } else { f64::INFINITY },
            });
        }
        Ok(total)
    }

    fn adapt<G: Fn(f64) -> f64>(&self, a: f64, b: f64, whole: f64, tol: f64, depth: usize, g: &G) -> (f64, f64) {
        let mid = 0.5 * (a + b);
        let left = self.rule.integrate(a, mid, g);
        let right = self.rule.integrate(mid, b, g);
        let diff = (left + right - whole).abs();
        if diff <= tol || diff <= 8.0 * f64::EPSILON * (left + right).abs() || !diff.is_finite() {
            return (left + right, if diff.is_finite() { 0.0 } else { f64::INFINITY });
        }
        if depth >= self.max_depth {
            return (left + right, diff);
        }
        let (l, rl) = self.adapt(a, mid, left, 0.5 * tol, depth + 1, g);
        let (r, rr) = self.adapt(mid, b, right, 0.5 * tol, depth + 1, g);
        (l + r, rl + rr)
    }
}

/// Upper Gaussian tail Q(a) = P(Z > a).
pub fn gaussian_tail(a: f64) -> f64 {
    0.5 * libm::erfc(a / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn gaussian_pdf(a: f64) -> f64 {
    (-0.5 * a * a).exp() / (2.0 * PI).sqrt()
}

//! Independent reference: tensor Gauss-Legendre quadrature on (0, π)² and
//! direct evaluation of the trigonometric series at its nodes.

#![allow(dead_code)]

use std::f64::consts::PI;

use gauss_quad::legendre::GaussLegendre;

pub struct Oracle {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    n: usize,
    sin: Vec<f64>,
    cos: Vec<f64>,
}

impl Oracle {
    /// `points` Gauss nodes per axis, tables for modes up to `n`.
    pub fn new(points: usize, n: usize) -> Self {
        let rule = GaussLegendre::new(points.try_into().unwrap());
        let (nodes, weights): (Vec<f64>, Vec<f64>) = rule
            .as_node_weight_pairs()
            .iter()
            .map(|&(x, w)| (0.5 * PI * (x + 1.0), 0.5 * PI * w))
            .unzip();
        let mut sin = Vec::new();
        let mut cos = Vec::new();
        for j in 1..=n {
            for &x in &nodes {
                sin.push((j as f64 * x).sin());
                cos.push((j as f64 * x).cos());
            }
        }
        Self {
            nodes,
            weights,
            n,
            sin,
            cos,
        }
    }

    fn p(&self) -> usize {
        self.nodes.len()
    }

    fn s(&self, j: usize, i: usize) -> f64 {
        self.sin[(j - 1) * self.p() + i]
    }

    fn c(&self, j: usize, i: usize) -> f64 {
        self.cos[(j - 1) * self.p() + i]
    }

    /// `Σ a_jk X_j(x) Y_k(y)` at every node pair, by direct summation.
    fn series(&self, a: &[f64], n: usize, xs: bool, ys: bool) -> Vec<f64> {
        assert!(n <= self.n);
        let p = self.p();
        let mut out = vec![0.0; p * p];
        for j in 1..=n {
            for k in 1..=n {
                let c = a[(j - 1) * n + (k - 1)];
                if c == 0.0 {
                    continue;
                }
                for i in 0..p {
                    let x = if xs { self.s(j, i) } else { self.c(j, i) };
                    for l in 0..p {
                        let y = if ys { self.s(k, l) } else { self.c(k, l) };
                        out[i * p + l] += c * x * y;
                    }
                }
            }
        }
        out
    }

    fn map(&self, c: &[f64], n: usize, f: impl Fn(usize, usize, f64) -> f64) -> Vec<f64> {
        let mut a = vec![0.0; n * n];
        for j in 1..=n {
            for k in 1..=n {
                let idx = (j - 1) * n + (k - 1);
                a[idx] = f(j, k, c[idx]);
            }
        }
        a
    }

    pub fn scalar(&self, c: &[f64], n: usize, offset: bool) -> Vec<f64> {
        let a = self.map(c, n, |_, _, v| 2.0 / PI * v);
        let mut out = self.series(&a, n, true, true);
        if offset {
            out.iter_mut().for_each(|v| *v -= 1.0);
        }
        out
    }

    pub fn dx(&self, c: &[f64], n: usize) -> Vec<f64> {
        let a = self.map(c, n, |j, _, v| 2.0 / PI * j as f64 * v);
        self.series(&a, n, false, true)
    }

    pub fn dy(&self, c: &[f64], n: usize) -> Vec<f64> {
        let a = self.map(c, n, |_, k, v| 2.0 / PI * k as f64 * v);
        self.series(&a, n, true, false)
    }

    pub fn lap(&self, c: &[f64], n: usize) -> Vec<f64> {
        let a = self.map(c, n, |j, k, v| -2.0 / PI * (j * j + k * k) as f64 * v);
        self.series(&a, n, true, true)
    }

    /// `(u₁, u₂)` of `Σ c e_jk`, `e = ∇⊥η/√λ`.
    pub fn velocity(&self, c: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
        let norm = |j: usize, k: usize| 2.0 / PI / ((j * j + k * k) as f64).sqrt();
        let a1 = self.map(c, n, |j, k, v| norm(j, k) * k as f64 * v);
        let a2 = self.map(c, n, |j, k, v| -norm(j, k) * j as f64 * v);
        (self.series(&a1, n, true, false), self.series(&a2, n, false, true))
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        let p = self.p();
        let mut total = 0.0;
        for i in 0..p {
            let row: f64 = (0..p).map(|l| self.weights[l] * values[i * p + l]).sum();
            total += self.weights[i] * row;
        }
        total
    }
}

pub fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

/// Deterministic test coefficients with spectral decay.
pub fn coeffs(n: usize, seed: u64, amp: f64, decay: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n * n);
    for j in 1..=n {
        for k in 1..=n {
            let t = (seed as f64 * 0.618_033_988_7 + (j * 31 + k * 17) as f64 * 0.754_877_666).fract();
            out.push(amp * (2.0 * t - 1.0) / ((j * j + k * k) as f64).powf(decay));
        }
    }
    out
}

//! Gauss–Legendre quadrature and compensated summation.

use std::ops::{Add, Mul};

use num_complex::Complex64;

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "quadrature order must be positive");
        let mut nodes = vec![0.0; order];
        let mut weights = vec![0.0; order];
        let nf = order as f64;
        for i in 0..order.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            for _ in 0..100 {
                let (p, d) = legendre(order, x);
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            if 2 * i + 1 == order {
                x = 0.0;
            }
            let (_, dp) = legendre(order, x);
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[order - 1 - i] = x;
            weights[i] = w;
            weights[order - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate<T, F>(&self, a: f64, b: f64, mut f: F) -> T
    where
        T: Copy + Default + Add<Output = T> + Mul<f64, Output = T>,
        F: FnMut(f64) -> T,
    {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .fold(T::default(), |acc, (&x, &w)| acc + f(mid + half * x) * (w * half))
    }

    pub fn integrate_composite<T, F>(&self, a: f64, b: f64, panels: usize, mut f: F) -> T
    where
        T: Copy + Default + Add<Output = T> + Mul<f64, Output = T>,
        F: FnMut(f64) -> T,
    {
        let panels = panels.max(1);
        let width = (b - a) / panels as f64;
        (0..panels).fold(T::default(), |acc, k| {
            let lo = a + width * k as f64;
            acc + self.integrate(lo, lo + width, &mut f)
        })
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Neumaier's compensated sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.compensation += (self.sum - t) + v;
        } else {
            self.compensation += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Self::default();
        iter.into_iter().for_each(|v| s.add(v));
        s
    }
}

/// Compensated sum of complex values in iteration order.
pub fn compensated_sum<I: IntoIterator<Item = Complex64>>(values: I) -> Complex64 {
    let (mut re, mut im) = (NeumaierSum::default(), NeumaierSum::default());
    for v in values {
        re.add(v.re);
        im.add(v.im);
    }
    Complex64::new(re.value(), im.value())
}

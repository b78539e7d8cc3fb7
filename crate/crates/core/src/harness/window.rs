use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;

/// Compactly supported `f^` on `[center - halfwidth, center + halfwidth]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Window {
    /// `f^(t) = max(0, 1 - |t - center| / halfwidth)`.
    Triangle { center: f64, halfwidth: f64 },
    /// `f^(t) = exp(1 - 1 / (1 - u^2))`, `u = (t - center) / halfwidth`.
    Bump { center: f64, halfwidth: f64 },
}

impl Window {
    pub fn center(&self) -> f64 {
        match *self {
            Self::Triangle { center, .. } | Self::Bump { center, .. } => center,
        }
    }

    pub fn halfwidth(&self) -> f64 {
        match *self {
            Self::Triangle { halfwidth, .. } | Self::Bump { halfwidth, .. } => halfwidth,
        }
    }

    pub fn support(&self) -> (f64, f64) {
        (self.center() - self.halfwidth(), self.center() + self.halfwidth())
    }
}

fn bump(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - u * u)).exp()
    }
}

const BUMP_INTERVALS: usize = 2048;
const VALIDATION_POINTS: usize = 20;
const VALIDATION_TOL: f64 = 1e-8;

/// A window `f^` together with `f(x) = (1/2 pi) int f^(t) e^{itx} dt`.
#[derive(Debug, Clone)]
pub struct TestFunctionPair {
    window: Window,
    /// Samples of the half bump on `[0, 1]` with trapezoid weights folded in.
    bump_weights: Vec<f64>,
}

impl TestFunctionPair {
    pub fn new(window: Window) -> Result<Self> {
        let (c, d) = (window.center(), window.halfwidth());
        if !(c.is_finite() && d.is_finite() && d > 0.0) {
            return Err(Error::Precondition(format!("window needs a finite center and positive halfwidth, got {window:?}")));
        }
        let bump_weights = match window {
            Window::Triangle { .. } => Vec::new(),
            Window::Bump { .. } => (0..=BUMP_INTERVALS)
                .map(|k| {
                    let u = k as f64 / BUMP_INTERVALS as f64;
                    let end = if k == 0 || k == BUMP_INTERVALS { 0.5 } else { 1.0 };
                    end * bump(u) / BUMP_INTERVALS as f64
                })
                .collect(),
        };
        Ok(Self { window, bump_weights })
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn fhat(&self, t: f64) -> f64 {
        let u = (t - self.window.center()) / self.window.halfwidth();
        match self.window {
            Window::Triangle { .. } => (1.0 - u.abs()).max(0.0),
            Window::Bump { .. } => bump(u),
        }
    }

    pub fn f(&self, x: f64) -> Complex64 {
        let (c, d) = (self.window.center(), self.window.halfwidth());
        let carrier = Complex64::from_polar(d / (2.0 * PI), c * x);
        match self.window {
            Window::Triangle { .. } => {
                let u = 0.5 * d * x;
                let sinc = if u.abs() < 1e-8 { 1.0 - u * u / 6.0 } else { u.sin() / u };
                carrier * (sinc * sinc)
            }
            Window::Bump { .. } => {
                // 2 int_0^1 b(u) cos(d x u) du by trapezoid, with cos advanced by rotation
                let step = Complex64::from_polar(1.0, d * x / BUMP_INTERVALS as f64);
                let mut rot = Complex64::new(1.0, 0.0);
                let mut acc = 0.0;
                for (k, w) in self.bump_weights.iter().enumerate() {
                    if k % 64 == 0 {
                        rot = Complex64::from_polar(1.0, d * x * k as f64 / BUMP_INTERVALS as f64);
                    }
                    acc += w * rot.re;
                    rot *= step;
                }
                carrier * (2.0 * acc)
            }
        }
    }

    /// `(1/2 pi) int f^(t) e^{itx} dt` by Gauss-Legendre on each smooth piece.
    pub fn inverse_transform_quadrature(&self, x: f64) -> Complex64 {
        let (lo, hi) = self.window.support();
        let c = self.window.center();
        let rule = GaussLegendre::new(24);
        let panels = 8 + (self.window.halfwidth() * x.abs()).ceil() as usize;
        let integrand = |t: f64| Complex64::from_polar(self.fhat(t), t * x);
        let total: Complex64 =
            rule.integrate_composite(lo, c, panels, integrand) + rule.integrate_composite(c, hi, panels, integrand);
        total / (2.0 * PI)
    }

    /// Checks `f` against the quadrature of `f^` at fixed sample points.
    pub fn validate_convention(&self) -> Result<f64> {
        let scale = self.f(0.0).norm();
        let d = self.window.halfwidth();
        let mut worst: f64 = 0.0;
        for k in 0..VALIDATION_POINTS {
            let x = (k as f64 - 7.3) * 1.7 / d;
            let dev = (self.f(x) - self.inverse_transform_quadrature(x)).norm() / scale;
            worst = worst.max(dev);
        }
        if worst > VALIDATION_TOL {
            return Err(Error::Precondition(format!(
                "test function pair violates the Fourier convention: deviation {worst:e}"
            )));
        }
        Ok(worst)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CutoffShape {
    Bump,
    /// Identically 1 on `[E - inner, E + inner]`, smooth step to 0 at the edge.
    Plateau { inner: f64 },
}

/// Smooth cutoff `psi` supported in `[center - halfwidth, center + halfwidth]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyCutoff {
    pub center: f64,
    pub halfwidth: f64,
    pub shape: CutoffShape,
}

fn smooth_step(u: f64) -> f64 {
    let g = |v: f64| if v <= 0.0 { 0.0 } else { (-1.0 / v).exp() };
    let (a, b) = (g(u), g(1.0 - u));
    a / (a + b)
}

impl EnergyCutoff {
    pub fn new(center: f64, halfwidth: f64, shape: CutoffShape) -> Result<Self> {
        if !(halfwidth > 0.0 && center.is_finite()) {
            return Err(Error::Precondition("cutoff needs a finite center and positive halfwidth".into()));
        }
        if let CutoffShape::Plateau { inner } = shape {
            if !(inner > 0.0 && inner < halfwidth) {
                return Err(Error::Precondition(format!("plateau {inner} must lie strictly inside halfwidth {halfwidth}")));
            }
        }
        Ok(Self { center, halfwidth, shape })
    }

    pub fn bump(center: f64, halfwidth: f64) -> Result<Self> {
        Self::new(center, halfwidth, CutoffShape::Bump)
    }

    pub fn value(&self, e: f64) -> f64 {
        let r = (e - self.center).abs();
        match self.shape {
            CutoffShape::Bump => bump(r / self.halfwidth),
            CutoffShape::Plateau { inner } => {
                if r <= inner {
                    1.0
                } else if r >= self.halfwidth {
                    0.0
                } else {
                    1.0 - smooth_step((r - inner) / (self.halfwidth - inner))
                }
            }
        }
    }

    pub fn support(&self) -> (f64, f64) {
        (self.center - self.halfwidth, self.center + self.halfwidth)
    }

    /// The interval on which `psi = 1` identically, if any.
    pub fn plateau(&self) -> Option<(f64, f64)> {
        match self.shape {
            CutoffShape::Bump => None,
            CutoffShape::Plateau { inner } => Some((self.center - inner, self.center + inner)),
        }
    }
}

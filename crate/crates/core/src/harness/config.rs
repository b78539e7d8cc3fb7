use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::spectrum::DEFAULT_COUNT_CAP;
use super::window::{CutoffShape, EnergyCutoff, TestFunctionPair, Window};
use crate::berry_tabor::{FlatTorus, PolynomialAction};
use crate::error::{config_err, Error, Result};
use crate::symplectic::RankPolicy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuarticTerm {
    pub c: f64,
    pub u: Vec<f64>,
}

/// Coefficients of `<b, I> + <A I, I>/2 + sum_k c_k <u_k, I>^4`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolynomialCoeffs {
    #[serde(default)]
    pub linear: Vec<f64>,
    #[serde(default)]
    pub quadratic: Vec<Vec<f64>>,
    #[serde(default)]
    pub quartic: Vec<QuarticTerm>,
}

fn default_half_width() -> f64 {
    4.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SystemConfig {
    Quadratic {
        w: Vec<f64>,
    },
    Torus {
        n: usize,
        #[serde(default)]
        mu: Vec<f64>,
    },
    ActionAngle {
        n: usize,
        coeffs: PolynomialCoeffs,
        #[serde(default = "default_half_width")]
        half_width: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsiConfig {
    /// Defaults to `epsilon`.
    pub halfwidth: Option<f64>,
    /// Half-width of the region where `psi = 1`; a plain bump when absent.
    pub plateau: Option<f64>,
}

fn default_rank() -> f64 {
    RankPolicy::default().rank_tol
}

fn default_cap() -> usize {
    DEFAULT_COUNT_CAP
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_rank")]
    pub rank: f64,
    #[serde(default = "default_cap")]
    pub count_cap: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rank: default_rank(), count_cap: default_cap() }
    }
}

fn default_m_bound() -> i64 {
    3
}

fn default_rational_bound() -> u64 {
    1_000_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub system: SystemConfig,
    #[serde(rename = "E")]
    pub energy: f64,
    pub epsilon: f64,
    #[serde(default)]
    pub hs: Vec<f64>,
    pub fhat: Window,
    #[serde(default)]
    pub psi: PsiConfig,
    #[serde(rename = "M_bound", default = "default_m_bound")]
    pub m_bound: i64,
    #[serde(default = "default_rational_bound")]
    pub rational_bound: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub calibration_h: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn positive(path: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config_err(path, format!("must be a positive finite number, got {v}")))
    }
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)
            .map_err(|e| config_err(format!("line {} column {}", e.line(), e.column()), e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| match e {
            Error::InvalidConfig { path: p, message } => config_err(format!("{}: {p}", path.display()), message),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !self.energy.is_finite() {
            return Err(config_err("E", "must be finite"));
        }
        positive("epsilon", self.epsilon)?;
        for (i, &h) in self.hs.iter().enumerate() {
            positive(&format!("hs[{i}]"), h)?;
        }
        positive("fhat.halfwidth", self.fhat.halfwidth())?;
        if !self.fhat.center().is_finite() {
            return Err(config_err("fhat.center", "must be finite"));
        }
        if let Some(hw) = self.psi.halfwidth {
            positive("psi.halfwidth", hw)?;
            if hw > self.epsilon {
                return Err(config_err("psi.halfwidth", format!("{hw} exceeds epsilon {}", self.epsilon)));
            }
        }
        if let Some(p) = self.psi.plateau {
            positive("psi.plateau", p)?;
            if p >= self.psi_halfwidth() {
                return Err(config_err("psi.plateau", "must be smaller than the cutoff halfwidth"));
            }
        }
        if self.m_bound < 1 {
            return Err(config_err("M_bound", "must be at least 1"));
        }
        if self.rational_bound < 1 {
            return Err(config_err("rational_bound", "must be at least 1"));
        }
        if !(self.tolerances.rank > 0.0 && self.tolerances.rank < 1e-2) {
            return Err(config_err("tolerances.rank", "must lie in (0, 1e-2)"));
        }
        if self.tolerances.count_cap == 0 {
            return Err(config_err("tolerances.count_cap", "must be positive"));
        }
        if let Some(c) = self.calibration_h {
            positive("calibration_h", c)?;
            if !self.hs.contains(&c) {
                return Err(config_err("calibration_h", format!("{c} is not one of hs")));
            }
        }
        match &self.system {
            SystemConfig::Quadratic { w } => {
                if w.is_empty() {
                    return Err(config_err("system.w", "must not be empty"));
                }
                for (i, &wj) in w.iter().enumerate() {
                    positive(&format!("system.w[{i}]"), wj)?;
                }
            }
            SystemConfig::Torus { n, mu } => {
                if *n == 0 {
                    return Err(config_err("system.n", "must be positive"));
                }
                if !mu.is_empty() && mu.len() != *n {
                    return Err(config_err("system.mu", format!("expected {n} entries, found {}", mu.len())));
                }
            }
            SystemConfig::ActionAngle { n, coeffs, half_width } => {
                if *n == 0 {
                    return Err(config_err("system.n", "must be positive"));
                }
                positive("system.half_width", *half_width)?;
                if !coeffs.linear.is_empty() && coeffs.linear.len() != *n {
                    return Err(config_err("system.coeffs.linear", format!("expected {n} entries")));
                }
                if !coeffs.quadratic.is_empty() && coeffs.quadratic.len() != *n {
                    return Err(config_err("system.coeffs.quadratic", format!("expected {n} rows")));
                }
                for (i, row) in coeffs.quadratic.iter().enumerate() {
                    if row.len() != *n {
                        return Err(config_err(format!("system.coeffs.quadratic[{i}]"), format!("expected {n} entries")));
                    }
                }
                for (k, term) in coeffs.quartic.iter().enumerate() {
                    if term.u.len() != *n {
                        return Err(config_err(format!("system.coeffs.quartic[{k}].u"), format!("expected {n} entries")));
                    }
                }
                self.action_angle_system().map_err(|e| config_err("system.coeffs", e.to_string()))?;
            }
        }
        Ok(())
    }

    pub fn psi_halfwidth(&self) -> f64 {
        self.psi.halfwidth.unwrap_or(self.epsilon)
    }

    pub fn cutoff(&self) -> Result<EnergyCutoff> {
        let shape = match self.psi.plateau {
            Some(inner) => CutoffShape::Plateau { inner },
            None => CutoffShape::Bump,
        };
        EnergyCutoff::new(self.energy, self.psi_halfwidth(), shape)
    }

    pub fn test_pair(&self) -> Result<TestFunctionPair> {
        TestFunctionPair::new(self.fhat)
    }

    pub fn rank_policy(&self) -> Result<RankPolicy> {
        RankPolicy::new(self.tolerances.rank)
    }

    /// The `h` list sorted by decreasing value, duplicates dropped with a warning.
    pub fn sweep_hs(&self) -> Result<Vec<f64>> {
        if self.hs.is_empty() {
            return Err(config_err("hs", "must contain at least one value"));
        }
        let mut hs = self.hs.clone();
        hs.sort_by(|a, b| b.total_cmp(a));
        let before = hs.len();
        hs.dedup();
        if hs.len() < before {
            log::warn!("dropped {} duplicate h values", before - hs.len());
        }
        Ok(hs)
    }

    pub fn calibration_h(&self) -> Result<f64> {
        match self.calibration_h {
            Some(h) => Ok(h),
            None => self.sweep_hs()?.last().copied().ok_or_else(|| config_err("hs", "empty")),
        }
    }

    /// The polynomial system for `action-angle` configs.
    pub fn action_angle_system(&self) -> Result<PolynomialAction> {
        let SystemConfig::ActionAngle { n, coeffs, half_width } = &self.system else {
            return Err(config_err("system.type", "expected action-angle"));
        };
        let n = *n;
        let linear = if coeffs.linear.is_empty() { DVector::zeros(n) } else { DVector::from_column_slice(&coeffs.linear) };
        let quadratic = if coeffs.quadratic.is_empty() {
            DMatrix::zeros(n, n)
        } else {
            DMatrix::from_fn(n, n, |i, j| coeffs.quadratic[i][j])
        };
        let quartic = coeffs.quartic.iter().map(|t| (t.c, DVector::from_column_slice(&t.u))).collect();
        PolynomialAction::new(linear, quadratic, quartic, *half_width)
    }

    pub fn flat_torus(&self) -> Result<FlatTorus> {
        let SystemConfig::Torus { n, .. } = &self.system else {
            return Err(config_err("system.type", "expected torus"));
        };
        FlatTorus::new(*n)
    }
}

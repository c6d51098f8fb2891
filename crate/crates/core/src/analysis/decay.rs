use serde::{Deserialize, Serialize};

use super::lm::{levenberg_marquardt, LmOptions};
use crate::error::{Error, Result};

/// Fitted `S(p) = a (1 - exp(-λ (1 - p)))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub a: f64,
    pub lambda: f64,
    pub r_squared: f64,
    pub residual_se: f64,
    pub n_points: usize,
}

pub fn decay_model(a: f64, lambda: f64, p: f64) -> f64 {
    -a * (-lambda * (1.0 - p)).exp_m1()
}

impl DecayFit {
    pub fn predict(&self, p: f64) -> f64 {
        decay_model(self.a, self.lambda, p)
    }

    /// Predicted clean score; `a = S0 / (1 - e^-λ)`.
    pub fn s0(&self) -> f64 {
        self.predict(0.0)
    }
}

/// `1 - SS_res / SS_tot`.
pub fn r_squared(points: &[(f64, f64)], predictor: impl Fn(f64) -> f64) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::FitFailure("R² needs at least two points".into()));
    }
    let mean = points.iter().map(|p| p.1).sum::<f64>() / points.len() as f64;
    let ss_tot: f64 = points.iter().map(|p| (p.1 - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::FitFailure("R² undefined for constant observations".into()));
    }
    let ss_res: f64 = points.iter().map(|&(x, y)| (y - predictor(x)).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

pub fn fit_decay(points: &[(f64, f64)]) -> Result<DecayFit> {
    if points.len() < 4 {
        return Err(Error::FitFailure(format!("{} points, need at least 4", points.len())));
    }
    let mut ps: Vec<f64> = points.iter().map(|p| p.0).collect();
    ps.sort_by(f64::total_cmp);
    ps.dedup();
    if ps.len() < 3 {
        return Err(Error::FitFailure("fewer than 3 distinct p values".into()));
    }
    let s_max = points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    if points.iter().all(|p| p.1 == points[0].1) {
        return Err(Error::FitFailure("constant scores".into()));
    }

    let residuals = |t: &[f64]| points.iter().map(|&(p, s)| decay_model(t[0], t[1], p) - s).collect::<Vec<_>>();
    let jacobian = |t: &[f64]| {
        points
            .iter()
            .map(|&(p, _)| {
                let x = 1.0 - p;
                let e = (-t[1] * x).exp();
                vec![1.0 - e, t[0] * x * e]
            })
            .collect::<Vec<_>>()
    };
    let sol = levenberg_marquardt(&[s_max, 3.0], residuals, jacobian, LmOptions::default())?;
    let (a, lambda) = (sol.params[0], sol.params[1]);
    if !(a.is_finite() && lambda.is_finite() && lambda > 0.0) {
        return Err(Error::FitFailure(format!("fit ended at a = {a}, λ = {lambda}")));
    }
    let r2 = r_squared(points, |p| decay_model(a, lambda, p))?;
    let dof = points.len().saturating_sub(2).max(1) as f64;
    Ok(DecayFit { a, lambda, r_squared: r2, residual_se: (sol.ssr / dof).sqrt(), n_points: points.len() })
}

/// `dS/dx = a λ e^{-λ x}` with `x = 1 - p`.
pub fn marginal_utility(fit: &DecayFit, p: f64) -> f64 {
    fit.a * fit.lambda * (-fit.lambda * (1.0 - p)).exp()
}

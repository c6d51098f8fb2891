use serde::{Deserialize, Serialize};

use super::lm::{levenberg_marquardt, numeric_jacobian, LmOptions};
use super::AdvantageGrid;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryFamily {
    /// `q_min + (q_max - q_min) / (1 + e^{k (p - p0)})`, `k > 0`.
    Logistic,
    /// `c (e^{k p} - 1) / (e^k - 1)`, through the origin.
    Exponential,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    /// Boundary mostly below the diagonal: imputation noise quickly hurts.
    NoiseSensitive,
    NoiseInsensitive,
    /// Signed area indistinguishable from zero.
    OnDiagonal,
}

/// Area magnitude below which a boundary counts as the diagonal.
pub const AREA_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryFit {
    pub family: BoundaryFamily,
    /// `[q_min, q_max, k, p0]` or `[c, k]`.
    pub params: Vec<f64>,
    pub rmse: f64,
    /// `∫_0^1 (q(p) - p) dp`.
    pub signed_area: f64,
    pub classification: Classification,
    pub n_points: usize,
}

fn exp_basis(k: f64, p: f64) -> f64 {
    if k.abs() < 1e-9 {
        p
    } else {
        (k * p).exp_m1() / k.exp_m1()
    }
}

pub fn boundary_curve(family: BoundaryFamily, params: &[f64], p: f64) -> f64 {
    match family {
        BoundaryFamily::Logistic => params[0] + (params[1] - params[0]) / (1.0 + (params[2] * (p - params[3])).exp()),
        BoundaryFamily::Exponential => params[0] * exp_basis(params[1], p),
    }
}

impl BoundaryFit {
    pub fn eval(&self, p: f64) -> f64 {
        boundary_curve(self.family, &self.params, p)
    }
}

/// Composite Simpson estimate of `∫_0^1 (f(p) - p) dp`.
pub fn signed_area(f: impl Fn(f64) -> f64) -> f64 {
    let n = 2000;
    let h = 1.0 / n as f64;
    let g = |p: f64| f(p) - p;
    let inner: f64 = (1..n).map(|k| g(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 }).sum();
    (g(0.0) + g(1.0) + inner) * h / 3.0
}

pub fn classify(area: f64) -> Classification {
    if area > AREA_TOL {
        Classification::NoiseInsensitive
    } else if area < -AREA_TOL {
        Classification::NoiseSensitive
    } else {
        Classification::OnDiagonal
    }
}

fn starts(family: BoundaryFamily, pts: &[[f64; 2]]) -> Vec<Vec<f64>> {
    let first = pts[0];
    let last = pts[pts.len() - 1];
    match family {
        BoundaryFamily::Logistic => {
            let (lo, hi) = (first[0], last[0]);
            let mut v = Vec::new();
            for k in [3.0, 10.0, 30.0] {
                for f in [0.25, 0.5, 0.75] {
                    v.push(vec![last[1], first[1], k, lo + f * (hi - lo)]);
                }
            }
            v
        }
        BoundaryFamily::Exponential => [-5.0, -1.0, 1e-3, 1.0, 5.0]
            .iter()
            .map(|&k| {
                let b = exp_basis(k, last[0]);
                vec![if b.abs() > 1e-12 { last[1] / b } else { last[1] }, k]
            })
            .collect(),
    }
}

/// Least-squares fit of `q(p)` within `family` to contour points.
pub fn fit_boundary(contour: &[[f64; 2]], family: BoundaryFamily) -> Result<BoundaryFit> {
    if contour.len() < 5 {
        return Err(Error::FitFailure(format!("{} contour points, need at least 5", contour.len())));
    }
    let residuals = |t: &[f64]| contour.iter().map(|pt| boundary_curve(family, t, pt[0]) - pt[1]).collect::<Vec<_>>();
    let jacobian = |t: &[f64]| numeric_jacobian(&residuals, t);

    let mut best: Option<(f64, Vec<f64>)> = None;
    for init in starts(family, contour) {
        let Ok(sol) = levenberg_marquardt(&init, residuals, jacobian, LmOptions::default()) else { continue };
        if sol.ssr.is_finite()
            && sol.params.iter().all(|x| x.is_finite())
            && best.as_ref().is_none_or(|b| sol.ssr < b.0)
        {
            best = Some((sol.ssr, sol.params));
        }
    }
    let (ssr, mut params) = best.ok_or_else(|| Error::FitFailure(format!("{family:?} fit did not converge")))?;
    if family == BoundaryFamily::Logistic && params[2] < 0.0 {
        // Same curve with the asymptotes swapped and a positive slope.
        params.swap(0, 1);
        params[2] = -params[2];
    }
    let area = signed_area(|p| boundary_curve(family, &params, p));
    Ok(BoundaryFit {
        family,
        params,
        rmse: (ssr / contour.len() as f64).sqrt(),
        signed_area: area,
        classification: classify(area),
        n_points: contour.len(),
    })
}

/// Fits both families and returns the one with lower RMSE.
pub fn fit_best_boundary(contour: &[[f64; 2]]) -> Result<BoundaryFit> {
    let fits: Vec<BoundaryFit> = [BoundaryFamily::Logistic, BoundaryFamily::Exponential]
        .iter()
        .filter_map(|&f| fit_boundary(contour, f).ok())
        .collect();
    fits.into_iter()
        .min_by(|a, b| a.rmse.total_cmp(&b.rmse))
        .ok_or_else(|| Error::FitFailure("no boundary family converged".into()))
}

/// Confidence band around a fitted boundary.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SeBand {
    pub z: f64,
    pub lower: Vec<[f64; 2]>,
    pub upper: Vec<[f64; 2]>,
}

/// Offsets the fitted boundary along `q` by `±z · SE(A) / |∂A/∂q|`, evaluated
/// at each contour abscissa. Points where the local gradient vanishes are
/// omitted.
pub fn se_bands(fit: &BoundaryFit, contour: &[[f64; 2]], grid: &AdvantageGrid, z: f64) -> SeBand {
    let mut band = SeBand { z, ..SeBand::default() };
    for pt in contour {
        let p = pt[0];
        let q = fit.eval(p);
        let grad = grid.dq(p, q).abs();
        if grad < 1e-12 {
            continue;
        }
        let off = z * grid.interpolate_se(p, q) / grad;
        band.lower.push([p, q - off]);
        band.upper.push([p, q + off]);
    }
    band
}

use serde::{Deserialize, Serialize};

use super::decay::fit_decay;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "size")]
pub enum Required {
    /// Reached within the observed sizes (interpolated in log size).
    Observed(f64),
    /// Beyond the largest size, from the fitted saturation curve.
    Extrapolated(f64),
    Unreachable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantityRow {
    pub p: f64,
    /// `(size, mean score, standard error)` sorted by size.
    pub curve: Vec<(f64, f64, f64)>,
    /// Saturation level `S∞` of `S∞ (1 - e^{-size / τ})` fitted over sizes.
    pub asymptote: Option<f64>,
    pub required: Required,
    pub warning: Option<String>,
}

fn group(results: &[(f64, f64, f64)], p: f64) -> Vec<(f64, f64, f64)> {
    let mut sizes: Vec<f64> = results.iter().filter(|r| r.0 == p).map(|r| r.1).collect();
    sizes.sort_by(f64::total_cmp);
    sizes.dedup();
    sizes
        .into_iter()
        .map(|s| {
            let xs: Vec<f64> = results.iter().filter(|r| r.0 == p && r.1 == s).map(|r| r.2).collect();
            let n = xs.len() as f64;
            let m = xs.iter().sum::<f64>() / n;
            let var = if xs.len() > 1 { xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
            (s, m, (var / n).sqrt())
        })
        .collect()
}

/// For each corruption level, the smallest dataset size whose mean score
/// reaches `target`. `results` holds `(p, size, score)` rows.
pub fn quantity_tradeoff(results: &[(f64, f64, f64)], target: f64) -> Vec<QuantityRow> {
    let mut ps: Vec<f64> = results.iter().map(|r| r.0).collect();
    ps.sort_by(f64::total_cmp);
    ps.dedup();
    ps.into_iter().map(|p| tradeoff_at(p, group(results, p), target)).collect()
}

fn tradeoff_at(p: f64, curve: Vec<(f64, f64, f64)>, target: f64) -> QuantityRow {
    let mut warning = None;
    if curve.len() < 3 {
        warning = Some(format!("{} sizes at p = {p}, need at least 3", curve.len()));
    }
    for w in curve.windows(2) {
        let drop = w[0].1 - w[1].1;
        if drop > 2.0 * (w[0].2.powi(2) + w[1].2.powi(2)).sqrt() && drop > 0.0 {
            warning = Some(format!("mean score falls from size {} to {} beyond noise", w[0].0, w[1].0));
        }
    }

    // Monotone envelope, interpolated in log size.
    let mut env = Vec::with_capacity(curve.len());
    let mut best = f64::NEG_INFINITY;
    for &(s, m, _) in &curve {
        best = best.max(m);
        env.push((s.ln(), best));
    }

    let s_max = curve.last().map_or(1.0, |c| c.0);
    let fit = if curve.len() >= 3 {
        // Saturation in x = size / s_max maps onto the decay law at p = 1 - x.
        let pts: Vec<(f64, f64)> = curve.iter().map(|&(s, m, _)| (1.0 - s / s_max, m)).collect();
        fit_decay(&pts).ok()
    } else {
        None
    };

    let required = if let Some(k) = env.iter().position(|e| e.1 >= target) {
        if k == 0 {
            Required::Observed(curve[0].0)
        } else {
            let (x0, y0) = env[k - 1];
            let (x1, y1) = env[k];
            let t = if y1 > y0 { (target - y0) / (y1 - y0) } else { 1.0 };
            Required::Observed(if t >= 1.0 { curve[k].0 } else { (x0 + t * (x1 - x0)).exp() })
        }
    } else {
        match fit {
            Some(f) if f.a > target && target > 0.0 => {
                Required::Extrapolated(-(1.0 - target / f.a).ln() / f.lambda * s_max)
            }
            _ => Required::Unreachable,
        }
    };
    QuantityRow { p, curve, asymptote: fit.map(|f| f.a), required, warning }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unreachable_target() {
        let rows: Vec<(f64, f64, f64)> =
            [100.0, 200.0, 400.0, 800.0].iter().map(|&s| (0.4, s, 0.8 * (1.0 - (-s / 200.0f64).exp()))).collect();
        let out = quantity_tradeoff(&rows, 0.95);
        assert_eq!(out[0].required, Required::Unreachable);
        assert!((out[0].asymptote.unwrap() - 0.8).abs() < 1e-6);
    }

    #[test]
    fn plateau_target_gives_smallest_plateau_size() {
        let rows = vec![(0.0, 100.0, 0.5), (0.0, 200.0, 0.9), (0.0, 400.0, 0.9), (0.0, 800.0, 0.9)];
        assert_eq!(quantity_tradeoff(&rows, 0.9)[0].required, Required::Observed(200.0));
    }

    #[test]
    fn falling_means_warn() {
        let rows =
            vec![(0.0, 100.0, 0.9), (0.0, 100.0, 0.91), (0.0, 200.0, 0.5), (0.0, 200.0, 0.51), (0.0, 400.0, 0.6)];
        assert!(quantity_tradeoff(&rows, 0.95)[0].warning.is_some());
    }
}

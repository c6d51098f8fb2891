//! Decay-law fits, imputation-advantage grids, zero contours, boundary
//! families and quantity trade-offs.

mod advantage;
mod boundary;
mod contour;
mod decay;
pub mod lm;
mod quantity;

pub use advantage::AdvantageGrid;
pub use boundary::{
    boundary_curve, classify, fit_best_boundary, fit_boundary, se_bands, signed_area, BoundaryFamily, BoundaryFit,
    Classification, SeBand, AREA_TOL,
};
pub use contour::{zero_contour, zero_polylines};
pub use decay::{decay_model, fit_decay, marginal_utility, r_squared, DecayFit};
pub use quantity::{quantity_tradeoff, QuantityRow, Required};

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut k = 0;
        while k < idx.len() {
            let mut e = k;
            while e + 1 < idx.len() && v[idx[e + 1]] == v[idx[k]] {
                e += 1;
            }
            let avg = (k + e) as f64 / 2.0 + 1.0;
            for &i in &idx[k..=e] {
                r[i] = avg;
            }
            k = e + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spearman_with_ties() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
        // Ranks y = 1.5, 1.5, 3 against 1, 2, 3.
        let r = spearman(&[1.0, 2.0, 3.0], &[5.0, 5.0, 7.0]);
        assert!((r - 1.5 / 3.0f64.sqrt()).abs() < 1e-12);
    }
}

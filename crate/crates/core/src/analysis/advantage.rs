use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const GRID_TOL: f64 = 1e-9;

/// Imputation advantage `A(p, q) = S̃(p, q) - S(p)`, indexed `[p][q]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdvantageGrid {
    pub p_grid: Vec<f64>,
    pub q_grid: Vec<f64>,
    pub mean: Vec<Vec<f64>>,
    pub se: Vec<Vec<f64>>,
    pub n_seeds: usize,
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = if xs.len() > 1 { xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (m, v)
}

fn distinct(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() < GRID_TOL);
    v
}

fn index_of(grid: &[f64], x: f64) -> Option<usize> {
    grid.iter().position(|g| (g - x).abs() < GRID_TOL)
}

impl AdvantageGrid {
    /// Builds the grid from per-seed scores: `with` holds `(p, q, score)` runs
    /// with imputation and `without` holds `(p, score)` runs without.
    pub fn from_scores(with: &[(f64, f64, f64)], without: &[(f64, f64)]) -> Result<Self> {
        let p_grid = distinct(with.iter().map(|r| r.0));
        let q_grid = distinct(with.iter().map(|r| r.1));
        let p_without = distinct(without.iter().map(|r| r.0));
        if p_grid.is_empty() {
            return Err(Error::GridMismatch("no imputed scores".into()));
        }
        if p_grid.len() != p_without.len() || p_grid.iter().zip(&p_without).any(|(a, b)| (a - b).abs() >= GRID_TOL) {
            return Err(Error::GridMismatch(format!("imputed p grid {p_grid:?} differs from baseline {p_without:?}")));
        }

        let mut cells: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); q_grid.len()]; p_grid.len()];
        for &(p, q, s) in with {
            cells[index_of(&p_grid, p).unwrap()][index_of(&q_grid, q).unwrap()].push(s);
        }
        let mut base: Vec<Vec<f64>> = vec![Vec::new(); p_grid.len()];
        for &(p, s) in without {
            base[index_of(&p_grid, p).unwrap()].push(s);
        }

        let mut mean = vec![vec![0.0; q_grid.len()]; p_grid.len()];
        let mut se = mean.clone();
        let mut n_seeds = usize::MAX;
        for i in 0..p_grid.len() {
            let (bm, bv) = mean_var(&base[i]);
            let nb = base[i].len();
            for j in 0..q_grid.len() {
                let c = &cells[i][j];
                if c.is_empty() {
                    return Err(Error::GridMismatch(format!("no runs at p = {}, q = {}", p_grid[i], q_grid[j])));
                }
                let (cm, cv) = mean_var(c);
                mean[i][j] = cm - bm;
                se[i][j] = (cv / c.len() as f64 + bv / nb as f64).sqrt();
                n_seeds = n_seeds.min(c.len()).min(nb);
            }
        }
        Ok(Self { p_grid, q_grid, mean, se, n_seeds })
    }

    /// Samples an analytic field and constant standard error.
    pub fn from_fn(p_grid: &[f64], q_grid: &[f64], f: impl Fn(f64, f64) -> f64, se: f64) -> Self {
        let mean = p_grid.iter().map(|&p| q_grid.iter().map(|&q| f(p, q)).collect()).collect();
        Self {
            p_grid: p_grid.to_vec(),
            q_grid: q_grid.to_vec(),
            mean,
            se: vec![vec![se; q_grid.len()]; p_grid.len()],
            n_seeds: 0,
        }
    }

    /// Mean and SE at grid point `(p, q)`.
    pub fn at(&self, p: f64, q: f64) -> Option<(f64, f64)> {
        let i = index_of(&self.p_grid, p)?;
        let j = index_of(&self.q_grid, q)?;
        Some((self.mean[i][j], self.se[i][j]))
    }

    pub fn has_sign_change(&self) -> bool {
        let vals = self.mean.iter().flatten();
        vals.clone().any(|&v| v > 0.0) && vals.clone().any(|&v| v <= 0.0)
    }

    fn locate(grid: &[f64], x: f64) -> (usize, f64) {
        let n = grid.len();
        if n < 2 {
            return (0, 0.0);
        }
        let x = x.clamp(grid[0], grid[n - 1]);
        let k = grid.partition_point(|&g| g <= x).clamp(1, n - 1) - 1;
        (k, (x - grid[k]) / (grid[k + 1] - grid[k]))
    }

    fn bilinear(&self, field: &[Vec<f64>], p: f64, q: f64) -> f64 {
        let (i, u) = Self::locate(&self.p_grid, p);
        let (j, v) = Self::locate(&self.q_grid, q);
        let at = |a: usize, b: usize| field[a.min(self.p_grid.len() - 1)][b.min(self.q_grid.len() - 1)];
        (1.0 - u) * (1.0 - v) * at(i, j)
            + u * (1.0 - v) * at(i + 1, j)
            + (1.0 - u) * v * at(i, j + 1)
            + u * v * at(i + 1, j + 1)
    }

    /// Bilinear interpolant of the mean advantage (clamped to the grid).
    pub fn interpolate(&self, p: f64, q: f64) -> f64 {
        self.bilinear(&self.mean, p, q)
    }

    pub fn interpolate_se(&self, p: f64, q: f64) -> f64 {
        self.bilinear(&self.se, p, q)
    }

    /// `∂A/∂q` of the bilinear interpolant.
    pub fn dq(&self, p: f64, q: f64) -> f64 {
        if self.q_grid.len() < 2 {
            return 0.0;
        }
        let (j, _) = Self::locate(&self.q_grid, q);
        let h = self.q_grid[j + 1] - self.q_grid[j];
        let lo = self.bilinear(&self.mean, p, self.q_grid[j]);
        let hi = self.bilinear(&self.mean, p, self.q_grid[j + 1]);
        (hi - lo) / h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_built_two_by_two() {
        let with = [
            (0.2, 0.1, 0.5),
            (0.2, 0.1, 0.7),
            (0.2, 0.9, 0.1),
            (0.2, 0.9, 0.3),
            (0.8, 0.1, 0.4),
            (0.8, 0.1, 0.4),
            (0.8, 0.9, 0.0),
            (0.8, 0.9, 0.2),
        ];
        let without = [(0.2, 0.4), (0.2, 0.6), (0.8, 0.1), (0.8, 0.3)];
        let g = AdvantageGrid::from_scores(&with, &without).unwrap();
        assert_eq!(g.p_grid, vec![0.2, 0.8]);
        assert_eq!(g.n_seeds, 2);
        // Cell (0.2, 0.1): means 0.6 - 0.5; variances 0.02 and 0.02.
        assert!((g.mean[0][0] - 0.1).abs() < 1e-12);
        assert!((g.se[0][0] - (0.02f64 / 2.0 + 0.02 / 2.0).sqrt()).abs() < 1e-12);
        // Cell (0.8, 0.1): zero variance in the imputed runs.
        assert!((g.mean[1][0] - 0.2).abs() < 1e-12);
        assert!((g.se[1][0] - 0.01f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn mismatched_p_grid_rejected() {
        let with = [(0.2, 0.1, 0.5), (0.4, 0.1, 0.5)];
        let without = [(0.2, 0.4), (0.6, 0.4)];
        assert!(matches!(AdvantageGrid::from_scores(&with, &without), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn bilinear_reproduces_nodes() {
        let g = AdvantageGrid::from_fn(&[0.0, 0.5, 1.0], &[0.0, 1.0], |p, q| p * q - 0.2, 0.1);
        assert!((g.interpolate(0.5, 1.0) - 0.3).abs() < 1e-15);
        assert!((g.interpolate(0.25, 0.5) - (0.125 - 0.2)).abs() < 1e-15);
        assert!((g.dq(0.25, 0.3) - 0.25).abs() < 1e-12);
    }
}

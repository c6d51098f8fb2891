use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LmOptions {
    pub max_iter: usize,
    /// Stop once `|step| / (|params| + tol)` falls below this.
    pub rel_step: f64,
    pub damping: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self { max_iter: 200, rel_step: 1e-10, damping: 1e-3 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LmSolution {
    pub params: Vec<f64>,
    pub ssr: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn ssr(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

/// Levenberg-Marquardt on `sum r_i(θ)^2` with Marquardt diagonal scaling.
/// Damping is multiplied by 10 on a rejected step and divided by 10 on an
/// accepted one.
pub fn levenberg_marquardt<R, J>(init: &[f64], residuals: R, jacobian: J, opts: LmOptions) -> Result<LmSolution>
where
    R: Fn(&[f64]) -> Vec<f64>,
    J: Fn(&[f64]) -> Vec<Vec<f64>>,
{
    let n = init.len();
    let mut theta = init.to_vec();
    let mut r = residuals(&theta);
    let mut cost = ssr(&r);
    if !cost.is_finite() {
        return Err(Error::FitFailure("non-finite residuals at the initial point".into()));
    }
    let mut mu = opts.damping;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter && !converged {
        iterations += 1;
        if cost == 0.0 {
            converged = true;
            break;
        }
        let rows = jacobian(&theta);
        let m = rows.len();
        let jm = DMatrix::from_fn(m, n, |i, k| rows[i][k]);
        let jtj = jm.transpose() * &jm;
        let jtr = jm.transpose() * DVector::from_column_slice(&r);

        // Retry with growing damping until the cost drops.
        loop {
            let mut a = jtj.clone();
            for k in 0..n {
                a[(k, k)] += mu * jtj[(k, k)].max(1e-12);
            }
            let step = match a.lu().solve(&(-&jtr)) {
                Some(s) if s.iter().all(|x| x.is_finite()) => s,
                _ => {
                    mu *= 10.0;
                    if mu > 1e16 {
                        converged = true;
                        break;
                    }
                    continue;
                }
            };
            let trial: Vec<f64> = theta.iter().zip(step.iter()).map(|(t, s)| t + s).collect();
            let r_trial = residuals(&trial);
            let c_trial = ssr(&r_trial);
            let norm_theta = theta.iter().map(|x| x * x).sum::<f64>().sqrt();
            let small = step.norm() / (norm_theta + opts.rel_step) < opts.rel_step;
            if c_trial.is_finite() && c_trial <= cost {
                theta = trial;
                r = r_trial;
                cost = c_trial;
                mu = (mu / 10.0).max(1e-15);
                converged = small;
                break;
            }
            mu *= 10.0;
            if small || mu > 1e16 {
                converged = true;
                break;
            }
        }
    }
    Ok(LmSolution { params: theta, ssr: cost, iterations, converged })
}

/// Central-difference Jacobian of `f`.
pub fn numeric_jacobian(f: &dyn Fn(&[f64]) -> Vec<f64>, theta: &[f64]) -> Vec<Vec<f64>> {
    let base = f(theta);
    let mut rows = vec![vec![0.0; theta.len()]; base.len()];
    let mut t = theta.to_vec();
    for k in 0..theta.len() {
        let h = 1e-6 * theta[k].abs().max(1e-3);
        t[k] = theta[k] + h;
        let up = f(&t);
        t[k] = theta[k] - h;
        let down = f(&t);
        t[k] = theta[k];
        for i in 0..base.len() {
            rows[i][k] = (up[i] - down[i]) / (2.0 * h);
        }
    }
    rows
}

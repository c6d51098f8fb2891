use rand::seq::index::sample;
use rand::Rng;

use super::{Grads, Mlp};

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub checked: usize,
    /// Parameters whose step had to be shrunk to stay off a kink.
    pub shrunk: usize,
    /// Parameters skipped because no step down to the minimum avoided a kink.
    pub at_kink: usize,
    /// Worst relative error per named tensor.
    pub per_tensor: Vec<(String, f64)>,
}

/// Relative error with a floor on the denominator, so parameters whose true
/// gradient is at round-off level do not dominate.
fn rel_error(a: f64, b: f64, floor: f64) -> f64 {
    let diff = (a - b).abs();
    if diff == 0.0 {
        return 0.0;
    }
    diff / a.abs().max(b.abs()).max(floor)
}

/// Smallest step tried before a parameter is reported as sitting on a kink.
pub const MIN_STEP: f64 = 1e-8;

/// Compares the analytic gradient `grads` of `loss` at `net` against central
/// differences on `n` randomly chosen parameters. First-layer weights are
/// drawn only from rows listed in `grads.touched_rows()`, since every other
/// row has an exactly zero gradient.
///
/// `loss` returns the loss and a signature of its piecewise region (active
/// units, Huber branch). When the two probes land in different regions the
/// step is divided by ten and retried, down to [`MIN_STEP`].
pub fn finite_diff_check<R: Rng>(
    net: &Mlp<f64>,
    grads: &Grads<f64>,
    loss: impl Fn(&Mlp<f64>) -> (f64, u64),
    n: usize,
    h: f64,
    rng: &mut R,
) -> GradCheckReport {
    let h1 = net.shape.hidden1;
    let w1_len = net.w1.len();
    let rows = grads.touched_rows();
    let mut candidates: Vec<usize> = rows.iter().flat_map(|&r| r * h1..(r + 1) * h1).collect();
    candidates.extend(w1_len..net.param_count());
    let picks = sample(rng, candidates.len(), n.min(candidates.len()));

    let names: Vec<(&str, usize)> = net.shape.tensors().iter().map(|(n, d)| (*n, d.iter().product())).collect();
    let mut per_tensor: Vec<(String, f64)> = names.iter().map(|(n, _)| (n.to_string(), 0.0)).collect();
    let tensor_of = |mut idx: usize| {
        for (k, (_, len)) in names.iter().enumerate() {
            if idx < *len {
                return k;
            }
            idx -= len;
        }
        unreachable!()
    };

    let mut probe = net.clone();
    let mut max_rel: f64 = 0.0;
    let mut max_abs: f64 = 0.0;
    let (mut shrunk, mut at_kink) = (0, 0);
    for i in picks.iter() {
        let idx = candidates[i];
        let orig = probe.param(idx);
        let mut step = h;
        let numeric = loop {
            probe.set_param(idx, orig + step);
            let (lp, sp) = loss(&probe);
            probe.set_param(idx, orig - step);
            let (lm, sm) = loss(&probe);
            probe.set_param(idx, orig);
            if sp == sm {
                break Some((lp - lm) / (2.0 * step));
            }
            step /= 10.0;
            if step < MIN_STEP {
                break None;
            }
        };
        let Some(numeric) = numeric else {
            at_kink += 1;
            continue;
        };
        if step < h {
            shrunk += 1;
        }
        let analytic = grads.get(idx);
        let rel = rel_error(analytic, numeric, 1e-7);
        max_rel = max_rel.max(rel);
        max_abs = max_abs.max((analytic - numeric).abs());
        let t = &mut per_tensor[tensor_of(idx)].1;
        *t = t.max(rel);
    }
    GradCheckReport {
        max_rel_error: max_rel,
        max_abs_error: max_abs,
        checked: picks.len() - at_kink,
        shrunk,
        at_kink,
        per_tensor,
    }
}

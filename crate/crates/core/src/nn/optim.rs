use super::{Grads, Mlp, Real};

/// Rescales `grads` so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm<T: Real>(grads: &mut Grads<T>, max_norm: T) -> T {
    let norm = grads.norm_sq().sqrt();
    if norm > max_norm {
        grads.scale(max_norm / norm);
    }
    norm
}

/// Plain stochastic gradient descent with global-norm clipping.
#[derive(Clone, Copy, Debug)]
pub struct Sgd<T> {
    pub clip: Option<T>,
}

impl<T: Real> Sgd<T> {
    pub fn new(clip: Option<T>) -> Self {
        Self { clip }
    }

    /// Applies `params -= lr * grads` and returns the pre-clip gradient norm.
    pub fn step(&self, net: &mut Mlp<T>, grads: &mut Grads<T>, lr: T) -> T {
        let norm = match self.clip {
            Some(c) => clip_global_norm(grads, c),
            None => grads.norm_sq().sqrt(),
        };
        let h1 = net.shape.hidden1;
        for &r in grads.touched_rows() {
            let g = &grads.w1[r * h1..(r + 1) * h1];
            for (w, &g) in net.w1[r * h1..(r + 1) * h1].iter_mut().zip(g) {
                *w -= lr * g;
            }
        }
        let dense = [
            (&mut net.b1, &grads.b1),
            (&mut net.ln_gain, &grads.ln_gain),
            (&mut net.ln_bias, &grads.ln_bias),
            (&mut net.w2, &grads.w2),
            (&mut net.b2, &grads.b2),
            (&mut net.w3, &grads.w3),
            (&mut net.b3, &grads.b3),
        ];
        for (p, g) in dense {
            for (w, &g) in p.iter_mut().zip(g) {
                *w -= lr * g;
            }
        }
        norm
    }
}

/// Adam with bias correction and global-norm clipping. Moment buffers are
/// dense, so every parameter decays each step even without gradient.
#[derive(Clone, Debug)]
pub struct Adam<T> {
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    pub clip: Option<T>,
    m: Vec<T>,
    v: Vec<T>,
    t: i32,
}

impl<T: Real> Adam<T> {
    pub fn new(param_count: usize, clip: Option<T>) -> Self {
        Self {
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            eps: T::lit(1e-8),
            clip,
            m: vec![T::zero(); param_count],
            v: vec![T::zero(); param_count],
            t: 0,
        }
    }

    pub fn step(&mut self, net: &mut Mlp<T>, grads: &mut Grads<T>, lr: T) -> T {
        let norm = match self.clip {
            Some(c) => clip_global_norm(grads, c),
            None => grads.norm_sq().sqrt(),
        };
        self.t += 1;
        let c1 = T::one() - self.beta1.powi(self.t);
        let c2 = T::one() - self.beta2.powi(self.t);
        let step = lr * c2.sqrt() / c1;
        let eps_hat = self.eps * c2.sqrt();
        let (b1, b2) = (self.beta1, self.beta2);
        let mut offset = 0;
        let grads_t =
            [&grads.w1, &grads.b1, &grads.ln_gain, &grads.ln_bias, &grads.w2, &grads.b2, &grads.w3, &grads.b3];
        for (p, g) in net.tensors_mut().into_iter().zip(grads_t) {
            let m = &mut self.m[offset..offset + p.len()];
            let v = &mut self.v[offset..offset + p.len()];
            for (((w, &g), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = b1 * *m + (T::one() - b1) * g;
                *v = b2 * *v + (T::one() - b2) * g * g;
                *w -= step * *m / (v.sqrt() + eps_hat);
            }
            offset += p.len();
        }
        norm
    }
}

/// Optimizer selection for the trainers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Clone, Debug)]
pub enum Optimizer<T> {
    Sgd(Sgd<T>),
    Adam(Adam<T>),
}

impl<T: Real> Optimizer<T> {
    pub fn new(kind: OptimizerKind, param_count: usize, clip: Option<T>) -> Self {
        match kind {
            OptimizerKind::Sgd => Self::Sgd(Sgd::new(clip)),
            OptimizerKind::Adam => Self::Adam(Adam::new(param_count, clip)),
        }
    }

    pub fn step(&mut self, net: &mut Mlp<T>, grads: &mut Grads<T>, lr: T) -> T {
        match self {
            Self::Sgd(o) => o.step(net, grads, lr),
            Self::Adam(o) => o.step(net, grads, lr),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Cache, MlpShape};
    use crate::rng;

    #[test]
    fn clipping_bounds_norm() {
        let shape = MlpShape { input: 4, hidden1: 3, hidden2: 2, output: 2, layer_norm: false };
        let mut g: Grads<f64> = Grads::new(shape);
        g.b3 = vec![30.0, 40.0];
        let before = clip_global_norm(&mut g, 10.0);
        assert_eq!(before, 50.0);
        assert!((g.norm_sq().sqrt() - 10.0).abs() < 1e-12);
        assert!((g.b3[0] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let shape = MlpShape { input: 4, hidden1: 3, hidden2: 2, output: 2, layer_norm: true };
        let mut net: Mlp<f64> = Mlp::new(shape, &mut rng::stream(2, "init"));
        let before = net.clone();
        let x = [(1u32, 1.0), (3, 1.0)];
        let mut cache = Cache::new(&shape);
        net.forward_cached(&x, &mut cache).unwrap();
        let mut g = Grads::new(shape);
        net.backward(&x, &cache, &[0.0, 0.0], &mut g);
        Sgd::new(Some(10.0)).step(&mut net, &mut g, 0.1);
        assert_eq!(net, before);
    }
}

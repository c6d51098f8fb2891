//! Feed-forward network with two hidden layers, optional layer normalisation
//! after the first one, and hand-written backpropagation.
//!
//! Topology: affine -> [layer norm] -> ReLU -> affine -> ReLU -> affine.
//! Inputs are sparse `(index, value)` lists; the first-layer weights are stored
//! input-major so each active input touches one contiguous row.

mod gradcheck;
mod optim;

pub use gradcheck::{finite_diff_check, GradCheckReport};
pub use optim::{clip_global_norm, Adam, Optimizer, OptimizerKind, Sgd};

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub trait Real:
    Float + FromPrimitive + AddAssign + SubAssign + MulAssign + DivAssign + Sum + Debug + Default + Send + Sync + 'static
{
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("representable literal")
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// A sparse input vector: `(index, value)` pairs.
pub type SparseInput<T> = [(u32, T)];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MlpShape {
    pub input: usize,
    pub hidden1: usize,
    pub hidden2: usize,
    pub output: usize,
    pub layer_norm: bool,
}

impl MlpShape {
    /// Named tensors and their dimensions, in flat-parameter order.
    pub fn tensors(&self) -> Vec<(&'static str, Vec<usize>)> {
        vec![
            ("w1", vec![self.input, self.hidden1]),
            ("b1", vec![self.hidden1]),
            ("ln_gain", vec![self.hidden1]),
            ("ln_bias", vec![self.hidden1]),
            ("w2", vec![self.hidden2, self.hidden1]),
            ("b2", vec![self.hidden2]),
            ("w3", vec![self.output, self.hidden2]),
            ("b3", vec![self.output]),
        ]
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|(_, d)| d.iter().product::<usize>()).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp<T> {
    pub shape: MlpShape,
    /// `input x hidden1`, input-major.
    pub w1: Vec<T>,
    pub b1: Vec<T>,
    pub ln_gain: Vec<T>,
    pub ln_bias: Vec<T>,
    /// `hidden2 x hidden1`, row-major.
    pub w2: Vec<T>,
    pub b2: Vec<T>,
    /// `output x hidden2`, row-major.
    pub w3: Vec<T>,
    pub b3: Vec<T>,
}

/// Intermediate activations of one forward pass.
#[derive(Clone, Debug, Default)]
pub struct Cache<T> {
    z1: Vec<T>,
    xhat: Vec<T>,
    inv_std: T,
    y1: Vec<T>,
    a1: Vec<T>,
    a2: Vec<T>,
    pub out: Vec<T>,
}

impl<T: Real> Cache<T> {
    pub fn new(shape: &MlpShape) -> Self {
        Self {
            z1: vec![T::zero(); shape.hidden1],
            xhat: vec![T::zero(); shape.hidden1],
            inv_std: T::one(),
            y1: vec![T::zero(); shape.hidden1],
            a1: vec![T::zero(); shape.hidden1],
            a2: vec![T::zero(); shape.hidden2],
            out: vec![T::zero(); shape.output],
        }
    }

    /// Which ReLU units were active in the last forward pass.
    pub fn active_units(&self) -> impl Iterator<Item = bool> + '_ {
        self.a1.iter().chain(&self.a2).map(|&a| a > T::zero())
    }
}

fn uniform_vec<T: Real, R: Rng>(n: usize, bound: f64, rng: &mut R) -> Vec<T> {
    (0..n).map(|_| T::lit(rng.random_range(-bound..bound))).collect()
}

impl<T: Real> Mlp<T> {
    /// Weights and biases uniform in `±1/sqrt(fan_in)`; layer-norm gain 1, bias 0.
    pub fn new<R: Rng>(shape: MlpShape, rng: &mut R) -> Self {
        let k1 = 1.0 / (shape.input as f64).sqrt();
        let k2 = 1.0 / (shape.hidden1 as f64).sqrt();
        let k3 = 1.0 / (shape.hidden2 as f64).sqrt();
        Self {
            shape,
            w1: uniform_vec(shape.input * shape.hidden1, k1, rng),
            b1: uniform_vec(shape.hidden1, k1, rng),
            ln_gain: vec![T::one(); shape.hidden1],
            ln_bias: vec![T::zero(); shape.hidden1],
            w2: uniform_vec(shape.hidden2 * shape.hidden1, k2, rng),
            b2: uniform_vec(shape.hidden2, k2, rng),
            w3: uniform_vec(shape.output * shape.hidden2, k3, rng),
            b3: uniform_vec(shape.output, k3, rng),
        }
    }

    pub fn zeros(shape: MlpShape) -> Self {
        let z = |n| vec![T::zero(); n];
        Self {
            shape,
            w1: z(shape.input * shape.hidden1),
            b1: z(shape.hidden1),
            ln_gain: vec![T::one(); shape.hidden1],
            ln_bias: z(shape.hidden1),
            w2: z(shape.hidden2 * shape.hidden1),
            b2: z(shape.hidden2),
            w3: z(shape.output * shape.hidden2),
            b3: z(shape.output),
        }
    }

    pub fn tensors(&self) -> [&Vec<T>; 8] {
        [&self.w1, &self.b1, &self.ln_gain, &self.ln_bias, &self.w2, &self.b2, &self.w3, &self.b3]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<T>; 8] {
        [
            &mut self.w1,
            &mut self.b1,
            &mut self.ln_gain,
            &mut self.ln_bias,
            &mut self.w2,
            &mut self.b2,
            &mut self.w3,
            &mut self.b3,
        ]
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Flat parameter access in [`MlpShape::tensors`] order.
    pub fn param(&self, mut idx: usize) -> T {
        for t in self.tensors() {
            if idx < t.len() {
                return t[idx];
            }
            idx -= t.len();
        }
        panic!("parameter index out of range")
    }

    pub fn set_param(&mut self, mut idx: usize, value: T) {
        for t in self.tensors_mut() {
            if idx < t.len() {
                t[idx] = value;
                return;
            }
            idx -= t.len();
        }
        panic!("parameter index out of range")
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }

    fn check_input(&self, input: &SparseInput<T>) -> Result<()> {
        match input.iter().find(|(i, _)| *i as usize >= self.shape.input) {
            Some(&(i, _)) => Err(Error::DimensionMismatch { expected: self.shape.input, got: i as usize + 1 }),
            None => Ok(()),
        }
    }

    /// Forward pass keeping activations for [`Mlp::backward`].
    pub fn forward_cached(&self, input: &SparseInput<T>, cache: &mut Cache<T>) -> Result<()> {
        self.check_input(input)?;
        let h1 = self.shape.hidden1;
        let h2 = self.shape.hidden2;

        cache.z1.copy_from_slice(&self.b1);
        for &(i, x) in input {
            let row = &self.w1[i as usize * h1..(i as usize + 1) * h1];
            for (z, &w) in cache.z1.iter_mut().zip(row) {
                *z += x * w;
            }
        }

        if self.shape.layer_norm {
            let n = T::lit(h1 as f64);
            let mean = cache.z1.iter().copied().sum::<T>() / n;
            let var = cache.z1.iter().map(|&z| (z - mean) * (z - mean)).sum::<T>() / n;
            cache.inv_std = T::one() / (var + T::lit(LAYER_NORM_EPS)).sqrt();
            for j in 0..h1 {
                let xh = (cache.z1[j] - mean) * cache.inv_std;
                cache.xhat[j] = xh;
                cache.y1[j] = self.ln_gain[j] * xh + self.ln_bias[j];
            }
        } else {
            cache.y1.copy_from_slice(&cache.z1);
        }
        for (a, &y) in cache.a1.iter_mut().zip(&cache.y1) {
            *a = y.max(T::zero());
        }

        for k in 0..h2 {
            let row = &self.w2[k * h1..(k + 1) * h1];
            let s: T = row.iter().zip(&cache.a1).map(|(&w, &a)| w * a).sum();
            cache.a2[k] = (s + self.b2[k]).max(T::zero());
        }

        for o in 0..self.shape.output {
            let row = &self.w3[o * h2..(o + 1) * h2];
            cache.out[o] = row.iter().zip(&cache.a2).map(|(&w, &a)| w * a).sum::<T>() + self.b3[o];
        }
        Ok(())
    }

    pub fn forward(&self, input: &SparseInput<T>) -> Result<Vec<T>> {
        let mut cache = Cache::new(&self.shape);
        self.forward_cached(input, &mut cache)?;
        Ok(cache.out)
    }

    /// Dense-input convenience wrapper around [`Mlp::forward`].
    pub fn forward_dense(&self, input: &[T]) -> Result<Vec<T>> {
        if input.len() != self.shape.input {
            return Err(Error::DimensionMismatch { expected: self.shape.input, got: input.len() });
        }
        let sparse: Vec<(u32, T)> =
            input.iter().enumerate().filter(|(_, x)| !x.is_zero()).map(|(i, &x)| (i as u32, x)).collect();
        self.forward(&sparse)
    }

    /// Accumulates `d loss / d params` into `grads` given `d loss / d out`.
    /// `cache` must hold the forward pass for the same `input`.
    pub fn backward(&self, input: &SparseInput<T>, cache: &Cache<T>, d_out: &[T], grads: &mut Grads<T>) {
        let h1 = self.shape.hidden1;
        let h2 = self.shape.hidden2;

        let mut d_a2 = vec![T::zero(); h2];
        for (o, &g) in d_out.iter().enumerate() {
            if g.is_zero() {
                continue;
            }
            grads.b3[o] += g;
            let row = o * h2..(o + 1) * h2;
            for ((gw, &a), (da, &w)) in
                grads.w3[row.clone()].iter_mut().zip(&cache.a2).zip(d_a2.iter_mut().zip(&self.w3[row]))
            {
                *gw += g * a;
                *da += g * w;
            }
        }

        let mut d_a1 = vec![T::zero(); h1];
        for k in 0..h2 {
            if cache.a2[k] <= T::zero() {
                continue;
            }
            let g = d_a2[k];
            if g.is_zero() {
                continue;
            }
            grads.b2[k] += g;
            let row = k * h1..(k + 1) * h1;
            for ((gw, &a), (da, &w)) in
                grads.w2[row.clone()].iter_mut().zip(&cache.a1).zip(d_a1.iter_mut().zip(&self.w2[row]))
            {
                *gw += g * a;
                *da += g * w;
            }
        }

        let mut d_z1 = vec![T::zero(); h1];
        if self.shape.layer_norm {
            let mut d_xhat = vec![T::zero(); h1];
            for j in 0..h1 {
                let d_y = if cache.y1[j] > T::zero() { d_a1[j] } else { T::zero() };
                grads.ln_gain[j] += d_y * cache.xhat[j];
                grads.ln_bias[j] += d_y;
                d_xhat[j] = d_y * self.ln_gain[j];
            }
            let n = T::lit(h1 as f64);
            let sum_d: T = d_xhat.iter().copied().sum();
            let sum_dx: T = d_xhat.iter().zip(&cache.xhat).map(|(&d, &x)| d * x).sum();
            for j in 0..h1 {
                d_z1[j] = cache.inv_std / n * (n * d_xhat[j] - sum_d - cache.xhat[j] * sum_dx);
            }
        } else {
            for j in 0..h1 {
                d_z1[j] = if cache.y1[j] > T::zero() { d_a1[j] } else { T::zero() };
            }
        }

        for (gb, &d) in grads.b1.iter_mut().zip(&d_z1) {
            *gb += d;
        }
        for &(i, x) in input {
            let i = i as usize;
            grads.touch_row(i);
            for (gw, &d) in grads.w1[i * h1..(i + 1) * h1].iter_mut().zip(&d_z1) {
                *gw += x * d;
            }
        }
    }
}

/// Gradient buffers with the same layout as [`Mlp`]. First-layer rows are
/// tracked so that zeroing and updates touch only rows that received input.
#[derive(Clone, Debug)]
pub struct Grads<T> {
    pub shape: MlpShape,
    pub w1: Vec<T>,
    pub b1: Vec<T>,
    pub ln_gain: Vec<T>,
    pub ln_bias: Vec<T>,
    pub w2: Vec<T>,
    pub b2: Vec<T>,
    pub w3: Vec<T>,
    pub b3: Vec<T>,
    touched: Vec<bool>,
    rows: Vec<usize>,
}

impl<T: Real> Grads<T> {
    pub fn new(shape: MlpShape) -> Self {
        let z = |n| vec![T::zero(); n];
        Self {
            shape,
            w1: z(shape.input * shape.hidden1),
            b1: z(shape.hidden1),
            ln_gain: z(shape.hidden1),
            ln_bias: z(shape.hidden1),
            w2: z(shape.hidden2 * shape.hidden1),
            b2: z(shape.hidden2),
            w3: z(shape.output * shape.hidden2),
            b3: z(shape.output),
            touched: vec![false; shape.input],
            rows: Vec::new(),
        }
    }

    fn touch_row(&mut self, i: usize) {
        if !self.touched[i] {
            self.touched[i] = true;
            self.rows.push(i);
        }
    }

    /// First-layer rows that may hold non-zero gradient.
    pub fn touched_rows(&self) -> &[usize] {
        &self.rows
    }

    fn dense_tensors_mut(&mut self) -> [&mut Vec<T>; 7] {
        [&mut self.b1, &mut self.ln_gain, &mut self.ln_bias, &mut self.w2, &mut self.b2, &mut self.w3, &mut self.b3]
    }

    pub fn zero(&mut self) {
        let h1 = self.shape.hidden1;
        for &r in &self.rows {
            self.w1[r * h1..(r + 1) * h1].iter_mut().for_each(|g| *g = T::zero());
            self.touched[r] = false;
        }
        self.rows.clear();
        for t in self.dense_tensors_mut() {
            t.iter_mut().for_each(|g| *g = T::zero());
        }
    }

    pub fn norm_sq(&self) -> T {
        let h1 = self.shape.hidden1;
        let mut s = T::zero();
        for &r in &self.rows {
            s += self.w1[r * h1..(r + 1) * h1].iter().map(|&g| g * g).sum::<T>();
        }
        for t in [&self.b1, &self.ln_gain, &self.ln_bias, &self.w2, &self.b2, &self.w3, &self.b3] {
            s += t.iter().map(|&g| g * g).sum::<T>();
        }
        s
    }

    pub fn scale(&mut self, c: T) {
        let h1 = self.shape.hidden1;
        for &r in &self.rows {
            self.w1[r * h1..(r + 1) * h1].iter_mut().for_each(|g| *g *= c);
        }
        for t in self.dense_tensors_mut() {
            t.iter_mut().for_each(|g| *g *= c);
        }
    }

    /// Flat gradient access in [`MlpShape::tensors`] order.
    pub fn get(&self, mut idx: usize) -> T {
        for t in [&self.w1, &self.b1, &self.ln_gain, &self.ln_bias, &self.w2, &self.b2, &self.w3, &self.b3] {
            if idx < t.len() {
                return t[idx];
            }
            idx -= t.len();
        }
        panic!("gradient index out of range")
    }
}

/// Mean Huber loss (threshold 1) and its derivative w.r.t. each prediction.
pub fn huber(residual: f64) -> f64 {
    let a = residual.abs();
    if a <= 1.0 {
        0.5 * residual * residual
    } else {
        a - 0.5
    }
}

pub fn huber_grad(residual: f64) -> f64 {
    residual.clamp(-1.0, 1.0)
}

/// Softmax cross-entropy of `logits` against class `label`, with the gradient
/// w.r.t. the logits written to `grad`.
pub fn softmax_xent<T: Real>(logits: &[T], label: usize, grad: &mut [T]) -> T {
    let m = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let mut z = T::zero();
    for (g, &l) in grad.iter_mut().zip(logits) {
        *g = (l - m).exp();
        z += *g;
    }
    for g in grad.iter_mut() {
        *g /= z;
    }
    let loss = -(grad[label].max(T::min_positive_value())).ln();
    grad[label] -= T::one();
    loss
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax<T: PartialOrd + Copy>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn toy_shape(layer_norm: bool) -> MlpShape {
        MlpShape { input: 3, hidden1: 3, hidden2: 2, output: 2, layer_norm }
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net: Mlp<f64> = Mlp::zeros(MlpShape { input: 965, hidden1: 256, hidden2: 48, output: 4, layer_norm: true });
        let x: Vec<(u32, f64)> = vec![(3, 1.0), (900, 1.0), (964, 0.5)];
        assert_eq!(net.forward(&x).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn forward_is_pure() {
        let mut r = rng::stream(1, "t");
        let net: Mlp<f32> = Mlp::new(toy_shape(true), &mut r);
        let x = [(0u32, 1.0f32), (2, -0.5)];
        assert_eq!(net.forward(&x).unwrap(), net.forward(&x).unwrap());
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let net: Mlp<f64> = Mlp::zeros(toy_shape(false));
        assert!(matches!(net.forward(&[(3, 1.0)]), Err(Error::DimensionMismatch { .. })));
        assert!(net.forward_dense(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn hand_computed_forward_without_layer_norm() {
        let mut net: Mlp<f64> = Mlp::zeros(toy_shape(false));
        // w1 is input-major: w1[i*3 + j] is input i -> hidden j.
        net.w1 = vec![1.0, 0.0, -1.0, 0.0, 2.0, 1.0, 1.0, 1.0, 0.0];
        net.b1 = vec![0.0, -1.0, 0.5];
        net.w2 = vec![1.0, 1.0, 0.0, 0.0, -1.0, 2.0];
        net.b2 = vec![0.0, 0.5];
        net.w3 = vec![1.0, 2.0, -1.0, 1.0];
        net.b3 = vec![0.1, 0.0];
        // x = (1, 2, 3)
        // z1 = (1*1 + 2*0 + 3*1, 1*0 + 2*2 + 3*1 - 1, -1 + 2 + 0 + 0.5) = (4, 6, 1.5)
        // a2 = relu(4 + 6, -6 + 3 + 0.5) = (10, 0)
        // out = (10 + 0.1, -10)
        let out = net.forward_dense(&[1.0, 2.0, 3.0]).unwrap();
        assert!((out[0] - 10.1).abs() < 1e-12);
        assert!((out[1] + 10.0).abs() < 1e-12);
    }

    #[test]
    fn hand_computed_forward_with_layer_norm() {
        let mut net: Mlp<f64> = Mlp::zeros(toy_shape(true));
        // identity first layer
        net.w1 = vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        net.w2 = vec![1.0, 1.0, 1.0, 0.0, 0.0, 1.0];
        net.w3 = vec![1.0, 0.0, 0.0, 1.0];
        // x = (1, 2, 3): mean 2, var 2/3, xhat = (-1, 0, 1) * sqrt(3/2) / sqrt(1 + 1.5e-5)
        let s = (1.5f64).sqrt() / (1.0 + 1.5e-5f64).sqrt();
        let out = net.forward_dense(&[1.0, 2.0, 3.0]).unwrap();
        // a1 = (0, 0, s); a2 = (s, s)
        assert!((out[0] - s).abs() < 1e-12);
        assert!((out[1] - s).abs() < 1e-12);
    }

    #[test]
    fn huber_definition() {
        assert_eq!(huber(2.0), 1.5);
        assert_eq!(huber(-0.5), 0.125);
        assert_eq!(huber(0.0), 0.0);
        assert_eq!(huber_grad(3.0), 1.0);
        assert_eq!(huber_grad(-0.25), -0.25);
    }

    #[test]
    fn argmax_ties_lowest_index() {
        assert_eq!(argmax(&[0.1, 0.9, 0.3, 0.3]), 1);
        assert_eq!(argmax(&[1.0, 1.0, 0.0, 0.0]), 0);
    }

    #[test]
    fn softmax_gradient_sums_to_zero() {
        let mut g = [0.0f64; 2];
        let l = softmax_xent(&[0.0, 0.0], 1, &mut g);
        assert!((l - 2f64.ln()).abs() < 1e-12);
        assert!((g[0] - 0.5).abs() < 1e-12 && (g[1] + 0.5).abs() < 1e-12);
    }
}

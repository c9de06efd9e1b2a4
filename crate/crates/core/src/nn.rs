//! Dense feed-forward networks with exact reverse-mode gradients and Adam.
//!
//! Parameters of a [`Network`] are addressable as one flat vector. The order
//! is layer-major; within a layer the weight matrix comes first in row-major
//! order (`out x in`), followed by the biases. Gradients returned by
//! [`Network::backward`] use the same layout, which is what the gradient
//! surgery and optimiser code rely on.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{check_len, Error, Result};
use crate::math;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Sigmoid,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => math::tanh(x),
            Activation::Sigmoid => math::sigmoid(x),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation's output `y`.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Identity => 1.0,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Activation::Tanh => 0,
            Activation::Sigmoid => 1,
            Activation::Identity => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::Tanh),
            1 => Some(Activation::Sigmoid),
            2 => Some(Activation::Identity),
            _ => None,
        }
    }
}

/// One affine map followed by an elementwise activation.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    /// Row-major `out x in`.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub inputs: usize,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        DenseLayer {
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
            inputs,
            activation,
        }
    }

    /// Uniform weights in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, zero biases.
    pub fn init<R: Rng + ?Sized>(inputs: usize, outputs: usize, activation: Activation, rng: &mut R) -> Self {
        let bound = 1.0 / math::sqrt(inputs.max(1) as f64);
        let weights = (0..inputs * outputs)
            .map(|_| rng.random_range(-bound..=bound))
            .collect();
        DenseLayer {
            weights,
            biases: vec![0.0; outputs],
            inputs,
            activation,
        }
    }

    #[inline]
    pub fn outputs(&self) -> usize {
        self.biases.len()
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    fn validate(&self) -> Result<()> {
        if self.weights.len() != self.inputs * self.outputs() {
            return Err(Error::config(format!(
                "dense layer has {} weights, expected {} x {}",
                self.weights.len(),
                self.outputs(),
                self.inputs
            )));
        }
        Ok(())
    }

    fn forward_into(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for (row, b) in self.weights.chunks_exact(self.inputs).zip(&self.biases) {
            out.push(self.activation.apply(math::dot(row, input) + b));
        }
    }
}

/// Activation record of one forward pass.
#[derive(Clone, Debug)]
pub struct Tape {
    /// `values[0]` is the input, `values[k + 1]` the output of layer `k`.
    values: Vec<Vec<f64>>,
    shapes: Vec<(usize, usize)>,
}

impl Tape {
    pub fn output(&self) -> &[f64] {
        self.values.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn input(&self) -> &[f64] {
        &self.values[0]
    }
}

/// Result of a full backward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub params: Vec<f64>,
    pub input: Vec<f64>,
}

/// A chain of dense layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    layers: Vec<DenseLayer>,
}

impl Network {
    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::config("network needs at least one layer"));
        }
        for l in &layers {
            l.validate()?;
        }
        for pair in layers.windows(2) {
            if pair[0].outputs() != pair[1].inputs {
                return Err(Error::config(format!(
                    "layer output {} does not feed next layer input {}",
                    pair[0].outputs(),
                    pair[1].inputs
                )));
            }
        }
        Ok(Network { layers })
    }

    /// `dims` lists the layer widths including the input, so it has one more
    /// entry than `activations`.
    pub fn new<R: Rng + ?Sized>(dims: &[usize], activations: &[Activation], rng: &mut R) -> Result<Self> {
        Self::shape_check(dims, activations)?;
        let layers = dims
            .windows(2)
            .zip(activations)
            .map(|(d, &a)| DenseLayer::init(d[0], d[1], a, rng))
            .collect();
        Self::from_layers(layers)
    }

    pub fn zeros(dims: &[usize], activations: &[Activation]) -> Result<Self> {
        Self::shape_check(dims, activations)?;
        let layers = dims
            .windows(2)
            .zip(activations)
            .map(|(d, &a)| DenseLayer::zeros(d[0], d[1], a))
            .collect();
        Self::from_layers(layers)
    }

    fn shape_check(dims: &[usize], activations: &[Activation]) -> Result<()> {
        if dims.len() != activations.len() + 1 || activations.is_empty() {
            return Err(Error::config(format!(
                "{} layer widths given for {} activations",
                dims.len(),
                activations.len()
            )));
        }
        Ok(())
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(DenseLayer::param_count).sum()
    }

    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.extend_flat(&mut out);
        out
    }

    pub fn extend_flat(&self, out: &mut Vec<f64>) {
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.biases);
        }
    }

    /// Overwrites all parameters from a flat slice in canonical order.
    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        check_len("flat parameter vector", flat.len(), self.param_count())?;
        let mut offset = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&flat[offset..offset + nw]);
            offset += nw;
            let nb = l.biases.len();
            l.biases.copy_from_slice(&flat[offset..offset + nb]);
            offset += nb;
        }
        Ok(())
    }

    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, Tape)> {
        check_len("network input", input.len(), self.in_dim())?;
        let mut values = Vec::with_capacity(self.layers.len() + 1);
        values.push(input.to_vec());
        for l in &self.layers {
            let mut out = Vec::with_capacity(l.outputs());
            l.forward_into(values.last().unwrap(), &mut out);
            values.push(out);
        }
        let tape = Tape {
            values,
            shapes: self.shapes(),
        };
        Ok((tape.output().to_vec(), tape))
    }

    /// Forward pass without recording a tape.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        check_len("network input", input.len(), self.in_dim())?;
        let mut cur = input.to_vec();
        let mut next = Vec::new();
        for l in &self.layers {
            l.forward_into(&cur, &mut next);
            core::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    fn shapes(&self) -> Vec<(usize, usize)> {
        self.layers.iter().map(|l| (l.inputs, l.outputs())).collect()
    }

    /// Gradient of `output_grad . output` with respect to parameters and input.
    pub fn backward(&self, tape: &Tape, output_grad: &[f64]) -> Result<Gradients> {
        let mut params = vec![0.0; self.param_count()];
        let input = self.accumulate_backward(tape, output_grad, 1.0, &mut params)?;
        Ok(Gradients { params, input })
    }

    /// Adds `scale * d(output_grad . output)/d(theta)` into `grad` and returns
    /// the input gradient (unscaled).
    pub fn accumulate_backward(
        &self,
        tape: &Tape,
        output_grad: &[f64],
        scale: f64,
        grad: &mut [f64],
    ) -> Result<Vec<f64>> {
        if tape.shapes.len() != self.layers.len()
            || tape
                .shapes
                .iter()
                .zip(&self.layers)
                .any(|(s, l)| *s != (l.inputs, l.outputs()))
        {
            return Err(Error::StaleTape(format!(
                "tape shapes {:?} do not match network shapes {:?}",
                tape.shapes,
                self.shapes()
            )));
        }
        check_len("output gradient", output_grad.len(), self.out_dim())?;
        check_len("gradient buffer", grad.len(), self.param_count())?;

        // Offsets of each layer inside the flat layout.
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut acc = 0;
        for l in &self.layers {
            offsets.push(acc);
            acc += l.param_count();
        }

        let mut upstream = output_grad.to_vec();
        for (k, l) in self.layers.iter().enumerate().rev() {
            let x = &tape.values[k];
            let y = &tape.values[k + 1];
            // Gradient w.r.t. pre-activation.
            let dz: Vec<f64> = upstream
                .iter()
                .zip(y)
                .map(|(g, &yi)| g * l.activation.derivative_from_output(yi))
                .collect();
            let off = offsets[k];
            let nw = l.weights.len();
            {
                let (gw, gb) = grad[off..off + l.param_count()].split_at_mut(nw);
                for (o, &d) in dz.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    let sd = scale * d;
                    math::axpy(sd, x, &mut gw[o * l.inputs..(o + 1) * l.inputs]);
                    gb[o] += sd;
                }
            }
            let mut down = vec![0.0; l.inputs];
            for (row, &d) in l.weights.chunks_exact(l.inputs).zip(&dz) {
                if d != 0.0 {
                    math::axpy(d, row, &mut down);
                }
            }
            upstream = down;
        }
        Ok(upstream)
    }
}

/// Bias-corrected Adam moments for one flat parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(len: usize, learning_rate: f64) -> Self {
        AdamState {
            first_moment: vec![0.0; len],
            second_moment: vec![0.0; len],
            step_count: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    /// One Adam update. With `ascent` the step climbs the gradient.
    ///
    /// `module` names the parameter owner in divergence errors.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], ascent: bool, module: &str) -> Result<()> {
        check_len("adam parameters", params.len(), self.first_moment.len())?;
        check_len("adam gradient", grad.len(), self.first_moment.len())?;
        if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::divergence(
                module,
                format!("non-finite gradient at flat index {i}"),
            ));
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = 1.0 - libm::pow(self.beta1, t as f64);
        let bc2 = 1.0 - libm::pow(self.beta2, t as f64);
        let sign = if ascent { 1.0 } else { -1.0 };
        for i in 0..params.len() {
            let g = grad[i];
            let m = self.beta1 * self.first_moment[i] + (1.0 - self.beta1) * g;
            let v = self.beta2 * self.second_moment[i] + (1.0 - self.beta2) * g * g;
            self.first_moment[i] = m;
            self.second_moment[i] = v;
            let m_hat = m / bc1;
            let v_hat = v / bc2;
            params[i] += sign * self.learning_rate * m_hat / (math::sqrt(v_hat) + self.epsilon);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_layer(seed: u64) -> Network {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Network::new(&[3, 4, 2], &[Activation::Tanh, Activation::Sigmoid], &mut rng).unwrap()
    }

    #[test]
    fn zero_tanh_network_outputs_zero() {
        let net = Network::zeros(&[5, 8, 8, 3], &[Activation::Tanh; 3]).unwrap();
        let (out, _) = net.forward(&[0.3, -1.0, 2.0, 4.0, 0.1]).unwrap();
        assert_eq!(out, vec![0.0; 3]);
    }

    #[test]
    fn zero_sigmoid_head_outputs_half() {
        let net = Network::zeros(&[2, 4, 2], &[Activation::Tanh, Activation::Sigmoid]).unwrap();
        let (out, _) = net.forward(&[1.0, -3.0]).unwrap();
        assert_eq!(out, vec![0.5, 0.5]);
    }

    #[test]
    fn forward_matches_hand_evaluation() {
        let net = two_layer(11);
        let x = [0.2, -0.7, 1.3];
        let (out, _) = net.forward(&x).unwrap();
        let l0 = &net.layers()[0];
        let l1 = &net.layers()[1];
        let mut h = [0.0; 4];
        for o in 0..4 {
            let mut s = l0.biases[o];
            for i in 0..3 {
                s += l0.weights[o * 3 + i] * x[i];
            }
            h[o] = libm::tanh(s);
        }
        for o in 0..2 {
            let mut s = l1.biases[o];
            for i in 0..4 {
                s += l1.weights[o * 4 + i] * h[i];
            }
            let expected = 1.0 / (1.0 + libm::exp(-s));
            assert!((out[o] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch_is_config_error() {
        let net = two_layer(1);
        assert!(matches!(net.forward(&[1.0]), Err(Error::Config(_))));
    }

    #[test]
    fn zero_output_grad_gives_zero_gradient() {
        let net = two_layer(2);
        let (_, tape) = net.forward(&[0.1, 0.2, 0.3]).unwrap();
        let g = net.backward(&tape, &[0.0, 0.0]).unwrap();
        assert!(g.params.iter().all(|&v| v == 0.0));
        assert!(g.input.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn doubling_output_grad_doubles_gradient() {
        let net = two_layer(3);
        let (_, tape) = net.forward(&[0.5, -0.2, 0.9]).unwrap();
        let g1 = net.backward(&tape, &[0.3, -1.1]).unwrap();
        let g2 = net.backward(&tape, &[0.6, -2.2]).unwrap();
        for (a, b) in g1.params.iter().zip(&g2.params) {
            assert!((2.0 * a - b).abs() <= 1e-15 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn stale_tape_is_rejected() {
        let net = two_layer(4);
        let (_, tape) = net.forward(&[0.5, -0.2, 0.9]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let other = Network::new(&[3, 5, 2], &[Activation::Tanh, Activation::Sigmoid], &mut rng).unwrap();
        assert!(matches!(other.backward(&tape, &[1.0, 1.0]), Err(Error::StaleTape(_))));
    }

    #[test]
    fn flat_round_trip_is_exact() {
        let mut net = two_layer(5);
        let flat = net.flat();
        assert_eq!(flat.len(), net.param_count());
        let mut other = Network::zeros(&[3, 4, 2], &[Activation::Tanh, Activation::Sigmoid]).unwrap();
        other.set_flat(&flat).unwrap();
        assert_eq!(other, net);
        net.set_flat(&flat).unwrap();
        assert_eq!(net.flat(), flat);
    }

    #[test]
    fn init_respects_fan_in_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let net = Network::new(&[16, 64, 1], &[Activation::Tanh, Activation::Identity], &mut rng).unwrap();
        let b0 = 1.0 / 4.0;
        assert!(net.layers()[0].weights.iter().all(|w| w.abs() <= b0));
        assert!(net.layers()[1].weights.iter().all(|w| w.abs() <= 1.0 / 8.0));
        assert!(net.layers().iter().all(|l| l.biases.iter().all(|&b| b == 0.0)));
    }

    #[test]
    fn adam_zero_gradient_keeps_params() {
        let mut p = vec![1.0, -2.0, 3.0];
        let mut adam = AdamState::new(3, 3e-4);
        adam.step(&mut p, &[0.0; 3], false, "test").unwrap();
        assert_eq!(p, vec![1.0, -2.0, 3.0]);
        assert_eq!(adam.step_count, 1);
    }

    #[test]
    fn adam_first_step_is_signed_learning_rate() {
        let g = [0.5, -3.0, 1e-3, 0.0];
        let mut p = vec![0.0; 4];
        let mut adam = AdamState::new(4, 0.01);
        adam.step(&mut p, &g, false, "test").unwrap();
        // m_hat = g, v_hat = g^2, so the step is -lr * g / (|g| + eps).
        for (pi, gi) in p.iter().zip(&g) {
            let expected = -0.01 * gi / (gi.abs() + 1e-8);
            assert!((pi - expected).abs() < 1e-15);
        }
        let mut q = vec![0.0; 4];
        let mut adam = AdamState::new(4, 0.01);
        adam.step(&mut q, &g, true, "test").unwrap();
        for (a, b) in p.iter().zip(&q) {
            assert_eq!(*a, -*b);
        }
    }

    #[test]
    fn adam_second_identical_step_not_larger() {
        let g = [0.7, -0.2];
        let mut p = vec![0.0; 2];
        let mut adam = AdamState::new(2, 0.1);
        adam.step(&mut p, &g, false, "test").unwrap();
        let first = p.clone();
        adam.step(&mut p, &g, false, "test").unwrap();
        for i in 0..2 {
            let s1 = first[i].abs();
            let s2 = (p[i] - first[i]).abs();
            assert!(s2 <= s1 + 1e-9);
        }
    }

    #[test]
    fn adam_rejects_non_finite_gradient() {
        let mut p = vec![0.0; 2];
        let mut adam = AdamState::new(2, 0.1);
        let err = adam.step(&mut p, &[f64::NAN, 0.0], false, "critic").unwrap_err();
        match err {
            Error::Divergence { module, .. } => assert_eq!(module, "critic"),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(adam.step_count, 0);
        assert_eq!(p, vec![0.0; 2]);
    }
}

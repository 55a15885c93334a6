//! Fully-connected feedforward networks with hand-written backpropagation.
//!
//! Examples are stored one per row, so a mini-batch of `B` inputs is a
//! `B x n1` matrix and layer `k` states form a `B x n_k` matrix. Weight
//! matrix `W^k` has shape `n_k x (n_{k-1} + 1)` when biases are enabled; the
//! trailing column multiplies a constant input of 1.

mod checkpoint;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::{gaussian_matrix, RngStream};

/// Probabilities are floored to this before taking logs in the cross-entropy.
pub const LOG_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Sigmoid,
    Relu,
    Softmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    Quadratic,
    CrossEntropy,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Sigmoid => "sigmoid",
            Activation::Relu => "relu",
            Activation::Softmax => "softmax",
        }
    }

    /// Element-wise value; `None` for softmax, which is defined per vector.
    pub fn value(self, x: f64) -> Option<f64> {
        match self {
            Activation::Sigmoid => Some(sigmoid(x)),
            Activation::Relu => Some(relu(x)),
            Activation::Softmax => None,
        }
    }

    /// Element-wise derivative; `None` for softmax.
    pub fn derivative(self, x: f64) -> Option<f64> {
        match self {
            Activation::Sigmoid => Some(sigmoid_derivative(x)),
            Activation::Relu => Some(relu_derivative(x)),
            Activation::Softmax => None,
        }
    }

    /// Applies the activation to every row of `pre`.
    pub fn apply(self, pre: &Matrix) -> Matrix {
        match self {
            Activation::Sigmoid => pre.map(sigmoid),
            Activation::Relu => pre.map(relu),
            Activation::Softmax => {
                let mut out = Matrix::zeros(pre.rows(), pre.cols());
                for r in 0..pre.rows() {
                    softmax_into(pre.row(r), out.row_mut(r));
                }
                out
            }
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigmoid" => Ok(Activation::Sigmoid),
            "relu" => Ok(Activation::Relu),
            "softmax" => Ok(Activation::Softmax),
            other => Err(Error::Config(format!("unknown activation '{other}'"))),
        }
    }
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::Quadratic => "quadratic",
            LossKind::CrossEntropy => "cross-entropy",
        }
    }

    /// Output activation paired with this loss.
    pub fn default_output(self) -> Activation {
        match self {
            LossKind::Quadratic => Activation::Sigmoid,
            LossKind::CrossEntropy => Activation::Softmax,
        }
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quadratic" => Ok(LossKind::Quadratic),
            "cross-entropy" | "cross_entropy" => Ok(LossKind::CrossEntropy),
            other => Err(Error::Config(format!("unknown loss '{other}'"))),
        }
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[inline]
pub fn sigmoid_derivative(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 - s)
}

#[inline]
pub fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// ReLU slope, with the value at exactly 0 taken as 0.
#[inline]
pub fn relu_derivative(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

pub fn softmax(xs: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; xs.len()];
    softmax_into(xs, &mut out);
    out
}

fn softmax_into(xs: &[f64], out: &mut [f64]) {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, &x) in out.iter_mut().zip(xs) {
        *o = (x - max).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

/// Per-example loss of `output` against `target`.
pub fn loss(output: &[f64], target: &[f64], kind: LossKind) -> f64 {
    assert_eq!(output.len(), target.len(), "loss length mismatch");
    match kind {
        LossKind::Quadratic => {
            0.5 * output
                .iter()
                .zip(target)
                .map(|(y, t)| (t - y) * (t - y))
                .sum::<f64>()
        }
        LossKind::CrossEntropy => -output
            .iter()
            .zip(target)
            .map(|(y, t)| t * y.max(LOG_FLOOR).ln())
            .sum::<f64>(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    widths: Vec<usize>,
    hidden: Activation,
    output: Activation,
    loss: LossKind,
    use_bias: bool,
}

impl Architecture {
    pub fn new(
        widths: Vec<usize>,
        hidden: Activation,
        output: Activation,
        loss: LossKind,
        use_bias: bool,
    ) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::Config(format!(
                "need at least 2 layers, got {}",
                widths.len()
            )));
        }
        if widths.contains(&0) {
            return Err(Error::Config("layer widths must be >= 1".into()));
        }
        if hidden == Activation::Softmax {
            return Err(Error::Config(
                "softmax is only valid on the output layer".into(),
            ));
        }
        if output == Activation::Relu {
            return Err(Error::Config(
                "output activation must be sigmoid or softmax".into(),
            ));
        }
        match (output, loss) {
            (Activation::Softmax, LossKind::CrossEntropy) | (Activation::Sigmoid, LossKind::Quadratic) => {}
            _ => {
                return Err(Error::Config(format!(
                    "unsupported output/loss pairing {}/{}; use sigmoid+quadratic or softmax+cross-entropy",
                    output.name(),
                    loss.name()
                )))
            }
        }
        Ok(Self {
            widths,
            hidden,
            output,
            loss,
            use_bias,
        })
    }

    /// Architecture whose output activation is implied by the loss.
    pub fn with_loss(
        widths: Vec<usize>,
        hidden: Activation,
        loss: LossKind,
        use_bias: bool,
    ) -> Result<Self> {
        Self::new(widths, hidden, loss.default_output(), loss, use_bias)
    }

    /// Parses `"784-100-200-10"`.
    pub fn parse_widths(s: &str) -> Result<Vec<usize>> {
        s.split('-')
            .map(|p| {
                p.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Config(format!("bad layer width '{p}' in '{s}'")))
            })
            .collect()
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn depth(&self) -> usize {
        self.widths.len()
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden
    }

    pub fn output_activation(&self) -> Activation {
        self.output
    }

    pub fn loss(&self) -> LossKind {
        self.loss
    }

    pub fn use_bias(&self) -> bool {
        self.use_bias
    }

    /// Activation of layer `k` counted from 1 (the input layer has none).
    fn activation_of_layer(&self, k: usize) -> Activation {
        if k == self.depth() {
            self.output
        } else {
            self.hidden
        }
    }

    /// Shape of every weight matrix, from `W^2` to `W^L`.
    pub fn weight_shapes(&self) -> Vec<(usize, usize)> {
        let extra = usize::from(self.use_bias);
        self.widths
            .windows(2)
            .map(|w| (w[1], w[0] + extra))
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.weight_shapes().iter().map(|(r, c)| r * c).sum()
    }

    pub fn widths_string(&self) -> String {
        self.widths
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join("-")
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} ({} hidden, {} output, {} loss, bias={})",
            self.widths_string(),
            self.hidden.name(),
            self.output.name(),
            self.loss.name(),
            self.use_bias
        )
    }
}

/// An ordered list of matrices congruent with some architecture.
///
/// Used for gradients and for optimizer buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    mats: Vec<Matrix>,
}

impl GradientSet {
    pub fn new(mats: Vec<Matrix>) -> Self {
        Self { mats }
    }

    pub fn zeros_for(arch: &Architecture) -> Self {
        Self::zeros_with_shapes(&arch.weight_shapes())
    }

    pub fn zeros_with_shapes(shapes: &[(usize, usize)]) -> Self {
        Self {
            mats: shapes.iter().map(|&(r, c)| Matrix::zeros(r, c)).collect(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros_with_shapes(&self.shapes())
    }

    pub fn matrices(&self) -> &[Matrix] {
        &self.mats
    }

    pub fn matrices_mut(&mut self) -> &mut [Matrix] {
        &mut self.mats
    }

    pub fn into_matrices(self) -> Vec<Matrix> {
        self.mats
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.mats.iter().map(Matrix::shape).collect()
    }

    pub fn num_values(&self) -> usize {
        self.mats.iter().map(Matrix::len).sum()
    }

    /// Every scalar, matrix by matrix in row-major order.
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.mats.iter().flat_map(|m| m.as_slice().iter().copied())
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.mats
            .iter_mut()
            .flat_map(|m| m.as_mut_slice().iter_mut())
    }

    pub fn check_congruent(&self, other: &GradientSet, what: &str) -> Result<()> {
        if self.shapes() == other.shapes() {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "{what}: {:?} vs {:?}",
                self.shapes(),
                other.shapes()
            )))
        }
    }

    pub fn scaled(&self, s: f64) -> GradientSet {
        GradientSet::new(self.mats.iter().map(|m| m.scale(s)).collect())
    }

    pub fn add_scaled_assign(&mut self, other: &GradientSet, s: f64) {
        for (a, b) in self.mats.iter_mut().zip(&other.mats) {
            a.add_scaled_assign(b, s);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.mats.iter().all(Matrix::is_finite)
    }

    pub fn max_abs_diff(&self, other: &GradientSet) -> f64 {
        self.values()
            .zip(other.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    arch: Architecture,
    weights: Vec<Matrix>,
}

impl NetworkParams {
    pub fn new(arch: Architecture, weights: Vec<Matrix>) -> Result<Self> {
        let expected = arch.weight_shapes();
        let got: Vec<_> = weights.iter().map(Matrix::shape).collect();
        if expected != got {
            return Err(Error::Shape(format!(
                "weights {got:?} do not match architecture {expected:?}"
            )));
        }
        Ok(Self { arch, weights })
    }

    pub fn zeros(arch: Architecture) -> Self {
        let weights = arch
            .weight_shapes()
            .into_iter()
            .map(|(r, c)| Matrix::zeros(r, c))
            .collect();
        Self { arch, weights }
    }

    /// I.i.d. normal weights with standard deviation `1/sqrt(fan_in)`, where
    /// fan-in counts every column including the bias input.
    pub fn init(arch: Architecture, rng: &mut RngStream) -> Self {
        let weights = arch
            .weight_shapes()
            .into_iter()
            .map(|(r, c)| gaussian_matrix(r, c, 0.0, 1.0 / (c as f64).sqrt(), rng))
            .collect();
        Self { arch, weights }
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [Matrix] {
        &mut self.weights
    }

    pub fn num_params(&self) -> usize {
        self.weights.iter().map(Matrix::len).sum()
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.weights
            .iter()
            .flat_map(|m| m.as_slice().iter().copied())
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(Matrix::is_finite)
    }

    /// `W += delta`, matrix by matrix.
    pub fn apply_delta(&mut self, delta: &GradientSet) -> Result<()> {
        self.check_congruent(delta)?;
        for (w, d) in self.weights.iter_mut().zip(delta.matrices()) {
            w.add_assign(d);
        }
        Ok(())
    }

    /// Copy of these parameters shifted by `scale * delta`.
    pub fn shifted(&self, delta: &GradientSet, scale: f64) -> Result<NetworkParams> {
        self.check_congruent(delta)?;
        let mut out = self.clone();
        for (w, d) in out.weights.iter_mut().zip(delta.matrices()) {
            w.add_scaled_assign(d, scale);
        }
        Ok(out)
    }

    pub fn check_congruent(&self, g: &GradientSet) -> Result<()> {
        let mine: Vec<_> = self.weights.iter().map(Matrix::shape).collect();
        if mine == g.shapes() {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "parameters {mine:?} vs gradients {:?}",
                g.shapes()
            )))
        }
    }

    pub fn as_gradient_set(&self) -> GradientSet {
        GradientSet::new(self.weights.clone())
    }
}

/// Layer states and pre-activations recorded by a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    /// `s^1 ... s^L`, one row per example.
    pub states: Vec<Matrix>,
    /// `h^2 ... h^L`, one row per example.
    pub pre_activations: Vec<Matrix>,
}

impl ForwardTrace {
    pub fn output(&self) -> &Matrix {
        self.states.last().expect("trace has at least one layer")
    }

    pub fn batch_size(&self) -> usize {
        self.states[0].rows()
    }
}

/// Forward pass for a single input vector.
pub fn forward(params: &NetworkParams, input: &[f64]) -> Result<ForwardTrace> {
    forward_batch(params, &Matrix::row_vector(input))
}

/// Forward pass for a batch of inputs, one example per row.
pub fn forward_batch(params: &NetworkParams, inputs: &Matrix) -> Result<ForwardTrace> {
    let arch = &params.arch;
    if inputs.cols() != arch.input_width() {
        return Err(Error::Shape(format!(
            "input width {} but network expects {}",
            inputs.cols(),
            arch.input_width()
        )));
    }
    let mut states = Vec::with_capacity(arch.depth());
    let mut pre_activations = Vec::with_capacity(arch.depth() - 1);
    states.push(inputs.clone());
    for (i, w) in params.weights.iter().enumerate() {
        let prev = &states[i];
        let h = if arch.use_bias {
            prev.with_constant_column(1.0).matmul(&w.transpose())
        } else {
            prev.matmul(&w.transpose())
        };
        let s = arch.activation_of_layer(i + 2).apply(&h);
        pre_activations.push(h);
        states.push(s);
    }
    Ok(ForwardTrace {
        states,
        pre_activations,
    })
}

/// Network outputs only, one row per example.
pub fn predict(params: &NetworkParams, inputs: &Matrix) -> Result<Matrix> {
    let mut trace = forward_batch(params, inputs)?;
    Ok(trace.states.pop().unwrap())
}

/// Mean loss over the rows of `outputs`.
pub fn mean_loss(outputs: &Matrix, targets: &Matrix, kind: LossKind) -> f64 {
    assert_eq!(outputs.shape(), targets.shape());
    let n = outputs.rows();
    (0..n)
        .map(|r| loss(outputs.row(r), targets.row(r), kind))
        .sum::<f64>()
        / n as f64
}

/// Gradient of the batch-mean loss with respect to every weight matrix.
///
/// `targets` holds one row per example of the trace. The learning rate is
/// not applied.
pub fn backward(
    params: &NetworkParams,
    trace: &ForwardTrace,
    targets: &Matrix,
) -> Result<GradientSet> {
    let arch = &params.arch;
    let depth = arch.depth();
    if trace.states.len() != depth || trace.pre_activations.len() != depth - 1 {
        return Err(Error::Shape(format!(
            "trace has {} layers, network has {depth}",
            trace.states.len()
        )));
    }
    let output = trace.output();
    if output.shape() != targets.shape() {
        return Err(Error::Shape(format!(
            "targets {:?} vs outputs {:?}",
            targets.shape(),
            output.shape()
        )));
    }
    for (i, s) in trace.states.iter().enumerate() {
        if s.cols() != arch.widths[i] {
            return Err(Error::Shape(format!(
                "trace layer {} has width {}, expected {}",
                i + 1,
                s.cols(),
                arch.widths[i]
            )));
        }
    }
    let batch = output.rows();

    // kappa^L = dE/dh^L
    let mut kappa = match (arch.output, arch.loss) {
        // -(y* - y) o y'
        (Activation::Sigmoid, LossKind::Quadratic) => {
            output.zip_map(targets, |y, t| -(t - y) * y * (1.0 - y))
        }
        (Activation::Softmax, LossKind::CrossEntropy) => output.sub(targets),
        _ => unreachable!("architecture validated at construction"),
    };

    let mut grads = vec![Matrix::zeros(0, 0); depth - 1];
    for layer in (0..depth - 1).rev() {
        let prev = &trace.states[layer];
        let prev_aug = if arch.use_bias {
            prev.with_constant_column(1.0)
        } else {
            prev.clone()
        };
        let mut g = kappa.transpose().matmul(&prev_aug);
        if batch > 1 {
            g.scale_assign(1.0 / batch as f64);
        }
        grads[layer] = g;

        if layer > 0 {
            let w = &params.weights[layer];
            let w_in = if arch.use_bias {
                w.without_last_column()
            } else {
                w.clone()
            };
            // delta^{k-1} = (W^k)^T kappa^k, then kappa^{k-1} = delta o f'(h^{k-1})
            let delta = kappa.matmul(&w_in);
            let slope = match arch.hidden {
                Activation::Sigmoid => trace.states[layer].map(|s| s * (1.0 - s)),
                Activation::Relu => trace.pre_activations[layer - 1].map(relu_derivative),
                Activation::Softmax => unreachable!(),
            };
            kappa = delta.hadamard(&slope);
        }
    }
    Ok(GradientSet::new(grads))
}

/// Forward and backward over one batch; returns the mean-loss gradient and the mean loss.
pub fn batch_gradient(
    params: &NetworkParams,
    inputs: &Matrix,
    targets: &Matrix,
) -> Result<(GradientSet, f64)> {
    let trace = forward_batch(params, inputs)?;
    let grads = backward(params, &trace, targets)?;
    let l = mean_loss(trace.output(), targets, params.arch.loss);
    Ok((grads, l))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamId;

    fn arch(widths: &[usize], hidden: Activation, loss: LossKind, bias: bool) -> Architecture {
        Architecture::with_loss(widths.to_vec(), hidden, loss, bias).unwrap()
    }

    #[test]
    fn activation_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert_eq!(relu(-2.0), 0.0);
        assert_eq!(relu_derivative(-2.0), 0.0);
        assert_eq!(relu_derivative(3.0), 1.0);
        assert_eq!(relu_derivative(0.0), 0.0);
        assert_eq!(softmax(&[0.0, 0.0]), vec![0.5, 0.5]);
        assert_eq!(Activation::Softmax.value(1.0), None);
    }

    #[test]
    fn softmax_is_a_distribution() {
        let p = softmax(&[3.0, -1.0, 0.5, 10.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn zero_weights_sigmoid_gives_half() {
        let a = arch(&[3, 4, 2], Activation::Sigmoid, LossKind::Quadratic, true);
        let p = NetworkParams::zeros(a);
        let t = forward(&p, &[1.0, -2.0, 3.0]).unwrap();
        for s in &t.states[1..] {
            assert!(s.as_slice().iter().all(|&v| v == 0.5));
        }
    }

    #[test]
    fn zero_weights_relu_hidden_is_zero() {
        let a = arch(&[3, 4, 2], Activation::Relu, LossKind::CrossEntropy, true);
        let p = NetworkParams::zeros(a);
        let t = forward(&p, &[1.0, -2.0, 3.0]).unwrap();
        assert!(t.states[1].as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn scalar_chain() {
        let a = arch(&[1, 1, 1], Activation::Sigmoid, LossKind::Quadratic, false);
        let p = NetworkParams::new(
            a,
            vec![Matrix::filled(1, 1, 1.0), Matrix::filled(1, 1, 1.0)],
        )
        .unwrap();
        let y = forward(&p, &[0.0]).unwrap().output()[(0, 0)];
        // f(f(0) * 1) = f(0.5)
        assert!((y - 0.622_459_331_201_854_6).abs() < 1e-12, "{y}");
    }

    #[test]
    fn scalar_gradient_matches_symbolic_form() {
        // y = f(w2 f(w1 v)), E = (t - y)^2 / 2
        // dE/dw2 = -(t - y) y (1 - y) s2,  dE/dw1 = -(t - y) y (1 - y) w2 s2 (1 - s2) v
        let (w1, w2, v, t) = (0.7, -1.3, 0.9, 0.2);
        let a = arch(&[1, 1, 1], Activation::Sigmoid, LossKind::Quadratic, false);
        let p = NetworkParams::new(a, vec![Matrix::filled(1, 1, w1), Matrix::filled(1, 1, w2)])
            .unwrap();
        let trace = forward(&p, &[v]).unwrap();
        let g = backward(&p, &trace, &Matrix::row_vector(&[t])).unwrap();
        let s2 = sigmoid(w1 * v);
        let y = sigmoid(w2 * s2);
        let k = -(t - y) * y * (1.0 - y);
        assert!((g.matrices()[1][(0, 0)] - k * s2).abs() < 1e-15);
        assert!((g.matrices()[0][(0, 0)] - k * w2 * s2 * (1.0 - s2) * v).abs() < 1e-15);
    }

    #[test]
    fn perfect_fit_has_zero_gradient() {
        let a = arch(&[2, 3, 2], Activation::Sigmoid, LossKind::Quadratic, true);
        let p = NetworkParams::init(a, &mut RngStream::new(5, StreamId::WeightInit));
        let trace = forward(&p, &[0.3, -0.1]).unwrap();
        let target = trace.output().clone();
        let g = backward(&p, &trace, &target).unwrap();
        assert!(g.values().all(|v| v == 0.0));
    }

    #[test]
    fn loss_examples() {
        assert_eq!(loss(&[0.3, 0.7], &[0.3, 0.7], LossKind::Quadratic), 0.0);
        assert!(
            (loss(&[0.5, 0.5], &[1.0, 0.0], LossKind::CrossEntropy) - std::f64::consts::LN_2).abs()
                < 1e-15
        );
        assert_eq!(loss(&[0.0, 0.0], &[1.0, 1.0], LossKind::Quadratic), 1.0);
        // floor keeps ln finite
        assert!(loss(&[0.0, 1.0], &[1.0, 0.0], LossKind::CrossEntropy).is_finite());
    }

    #[test]
    fn forward_is_pure() {
        let a = arch(&[4, 6, 3], Activation::Relu, LossKind::CrossEntropy, true);
        let p = NetworkParams::init(a, &mut RngStream::new(8, StreamId::WeightInit));
        let x = [0.1, 0.2, -0.3, 0.4];
        assert_eq!(forward(&p, &x).unwrap(), forward(&p, &x).unwrap());
    }

    #[test]
    fn input_width_checked() {
        let a = arch(&[4, 3], Activation::Sigmoid, LossKind::Quadratic, true);
        let p = NetworkParams::zeros(a);
        assert!(matches!(forward(&p, &[1.0, 2.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn architecture_validation() {
        assert!(
            Architecture::with_loss(vec![3], Activation::Sigmoid, LossKind::Quadratic, true)
                .is_err()
        );
        assert!(Architecture::with_loss(
            vec![3, 0, 2],
            Activation::Sigmoid,
            LossKind::Quadratic,
            true
        )
        .is_err());
        assert!(Architecture::new(
            vec![3, 2],
            Activation::Sigmoid,
            Activation::Sigmoid,
            LossKind::CrossEntropy,
            true
        )
        .is_err());
        assert!(Architecture::new(
            vec![3, 2],
            Activation::Softmax,
            Activation::Softmax,
            LossKind::CrossEntropy,
            true
        )
        .is_err());
        assert_eq!(
            Architecture::parse_widths("784-100-200-10").unwrap(),
            vec![784, 100, 200, 10]
        );
        assert!(Architecture::parse_widths("784-x").is_err());
    }

    #[test]
    fn bias_shapes() {
        let a = arch(
            &[100, 400, 200, 10],
            Activation::Sigmoid,
            LossKind::Quadratic,
            true,
        );
        assert_eq!(a.weight_shapes(), vec![(400, 101), (200, 401), (10, 201)]);
        assert_eq!(a.num_params(), 400 * 101 + 200 * 401 + 10 * 201);
    }

    #[test]
    fn batch_gradient_is_mean_of_single_gradients() {
        let a = arch(&[3, 5, 2], Activation::Sigmoid, LossKind::Quadratic, true);
        let p = NetworkParams::init(a, &mut RngStream::new(1, StreamId::WeightInit));
        let mut rng = RngStream::new(1, StreamId::DataGen);
        let x = gaussian_matrix(4, 3, 0.0, 1.0, &mut rng);
        let y = gaussian_matrix(4, 2, 0.5, 0.1, &mut rng);
        let (batch, _) = batch_gradient(&p, &x, &y).unwrap();
        let mut mean = batch.zeros_like();
        for r in 0..4 {
            let t = forward(&p, x.row(r)).unwrap();
            let g = backward(&p, &t, &Matrix::row_vector(y.row(r))).unwrap();
            mean.add_scaled_assign(&g, 0.25);
        }
        assert!(batch.max_abs_diff(&mean) < 1e-14);
    }
}

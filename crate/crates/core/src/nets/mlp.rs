use crate::error::{Error, Result};
use crate::numerics::{sigmoid, softplus, Matrix, Rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Identity,
    Softplus,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
            Activation::Softplus => softplus(x),
        }
    }

    /// Derivative expressed through the pre-activation `x` and output `y`.
    pub fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
            Activation::Softplus => sigmoid(x),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
            Activation::Softplus => "softplus",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "tanh" => Some(Activation::Tanh),
            "identity" => Some(Activation::Identity),
            "softplus" => Some(Activation::Softplus),
            _ => None,
        }
    }
}

/// Dense layer `y = act(W x + b)` with `W` stored `out x in`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub weight: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn input_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.rows()
    }
}

/// Feed-forward network with tanh hidden layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
}

/// Values recorded on a forward pass, consumed by [`Mlp::backward`].
#[derive(Clone, Debug)]
pub struct MlpTrace {
    /// `inputs[l]` is the input of layer `l`; the last entry is the output.
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl MlpTrace {
    pub fn output(&self) -> &[f64] {
        self.inputs.last().expect("trace has at least the input")
    }
}

/// Gradient buffers with the same layout as the network parameters.
#[derive(Clone, Debug)]
pub struct MlpGrad {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl MlpGrad {
    pub fn add_assign(&mut self, other: &MlpGrad) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(2 * self.weights.len());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.push(w.as_slice());
            out.push(b.as_slice());
        }
        out
    }

    pub fn scale(&mut self, s: f64) {
        self.weights.iter_mut().flatten().for_each(|v| *v *= s);
        self.biases.iter_mut().flatten().for_each(|v| *v *= s);
    }
}

impl Mlp {
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Argument("an MLP needs at least one layer".into()));
        }
        for (l, pair) in layers.windows(2).enumerate() {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(Error::Argument(format!(
                    "layer {l} outputs {} values but layer {} expects {}",
                    pair[0].output_dim(),
                    l + 1,
                    pair[1].input_dim()
                )));
            }
        }
        for (l, layer) in layers.iter().enumerate() {
            if layer.bias.len() != layer.output_dim() {
                return Err(Error::Argument(format!("layer {l} bias length mismatch")));
            }
        }
        Ok(Self { layers })
    }

    /// Glorot-uniform initialised network `sizes[0] -> ... -> sizes[n]` with
    /// tanh hidden layers and the given output activation.
    pub fn new(sizes: &[usize], output: Activation, rng: &mut Rng) -> Result<Self> {
        if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) {
            return Err(Error::Argument(format!("invalid layer sizes {sizes:?}")));
        }
        let n = sizes.len() - 1;
        let layers = (0..n)
            .map(|l| {
                let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let data = (0..fan_in * fan_out).map(|_| rng.uniform_range(-limit, limit)).collect();
                Layer {
                    weight: Matrix::from_vec(fan_out, fan_in, data),
                    bias: vec![0.0; fan_out],
                    activation: if l + 1 == n { output } else { Activation::Tanh },
                }
            })
            .collect();
        Self::from_layers(layers)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().output_dim()
    }

    pub fn hidden_sizes(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1].iter().map(Layer::output_dim).collect()
    }

    fn check_input(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.input_dim() {
            return Err(Error::Argument(format!(
                "network expects input of dimension {}, got {}",
                self.input_dim(),
                z.len()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_input(z)?;
        let mut x = z.to_vec();
        for layer in &self.layers {
            let mut y = layer.weight.mat_vec(&x);
            for (v, b) in y.iter_mut().zip(&layer.bias) {
                *v = layer.activation.apply(*v + b);
            }
            x = y;
        }
        Ok(x)
    }

    pub fn forward_trace(&self, z: &[f64]) -> Result<MlpTrace> {
        self.check_input(z)?;
        let mut inputs = Vec::with_capacity(self.layers.len() + 1);
        let mut pre = Vec::with_capacity(self.layers.len());
        inputs.push(z.to_vec());
        for layer in &self.layers {
            let mut a = layer.weight.mat_vec(inputs.last().unwrap());
            for (v, b) in a.iter_mut().zip(&layer.bias) {
                *v += b;
            }
            let y = a.iter().map(|&v| layer.activation.apply(v)).collect();
            pre.push(a);
            inputs.push(y);
        }
        Ok(MlpTrace { inputs, pre })
    }

    /// Exact Jacobian `D_L W_L ... D_1 W_1` (output x input).
    pub fn jacobian(&self, z: &[f64]) -> Result<Matrix> {
        let trace = self.forward_trace(z)?;
        Ok(self.jacobian_from_trace(&trace))
    }

    pub fn jacobian_from_trace(&self, trace: &MlpTrace) -> Matrix {
        // propagate input-space tangents forward: J_l = D_l W_l J_{l-1}
        let mut jac = Matrix::identity(self.input_dim());
        for (l, layer) in self.layers.iter().enumerate() {
            let mut next = layer.weight.matmul(&jac);
            let y = &trace.inputs[l + 1];
            for i in 0..next.rows() {
                let d = layer.activation.derivative(trace.pre[l][i], y[i]);
                next.row_mut(i).iter_mut().for_each(|v| *v *= d);
            }
            jac = next;
        }
        jac
    }

    pub fn zero_grad(&self) -> MlpGrad {
        MlpGrad {
            weights: self.layers.iter().map(|l| vec![0.0; l.weight.rows() * l.weight.cols()]).collect(),
            biases: self.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }

    /// Back-propagates `grad_out` (d loss / d output), accumulating
    /// parameter gradients into `grad` and returning d loss / d input.
    pub fn backward(&self, trace: &MlpTrace, grad_out: &[f64], grad: &mut MlpGrad) -> Vec<f64> {
        let mut delta = grad_out.to_vec();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let y = &trace.inputs[l + 1];
            for (i, d) in delta.iter_mut().enumerate() {
                *d *= layer.activation.derivative(trace.pre[l][i], y[i]);
            }
            let x = &trace.inputs[l];
            let cols = layer.weight.cols();
            let gw = &mut grad.weights[l];
            for (i, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &mut gw[i * cols..(i + 1) * cols];
                for (g, xv) in row.iter_mut().zip(x) {
                    *g += d * xv;
                }
                grad.biases[l][i] += d;
            }
            delta = layer.weight.tr_mat_vec(&delta);
        }
        delta
    }

    /// Mutable parameter slices in the same order as [`MlpGrad::slices`].
    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(2 * self.layers.len());
        for layer in &mut self.layers {
            out.push(layer.weight.as_mut_slice());
            out.push(layer.bias.as_mut_slice());
        }
        out
    }

    pub fn param_names(&self, prefix: &str) -> Vec<String> {
        let mut out = Vec::new();
        for l in 0..self.layers.len() {
            out.push(format!("{prefix}.layers[{l}].weight"));
            out.push(format!("{prefix}.layers[{l}].bias"));
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.rows() * l.weight.cols() + l.bias.len()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{fd_jacobian, DEFAULT_FD_STEP};

    fn linear(a: Matrix, b: Vec<f64>) -> Mlp {
        Mlp::from_layers(vec![Layer { weight: a, bias: b, activation: Activation::Identity }]).unwrap()
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let net = linear(Matrix::identity(3), vec![0.0; 3]);
        assert_eq!(net.forward(&[1.0, -2.0, 0.5]).unwrap(), vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn zero_weights_output_bias() {
        let mut rng = Rng::new(1);
        let mut net = Mlp::new(&[2, 5, 3], Activation::Identity, &mut rng).unwrap();
        for layer in net.layers_mut() {
            layer.weight.as_mut_slice().iter_mut().for_each(|v| *v = 0.0);
        }
        net.layers_mut()[1].bias = vec![0.1, 0.2, 0.3];
        assert_eq!(net.forward(&[4.0, 5.0]).unwrap(), vec![0.1, 0.2, 0.3]);
    }

    #[test]
    fn two_layer_hand_composition() {
        let net = Mlp::from_layers(vec![
            Layer {
                weight: Matrix::from_rows(&[vec![0.5, -1.0], vec![2.0, 0.25]]),
                bias: vec![0.1, -0.2],
                activation: Activation::Tanh,
            },
            Layer { weight: Matrix::from_rows(&[vec![1.5, -0.5]]), bias: vec![0.3], activation: Activation::Identity },
        ])
        .unwrap();
        let (x, y) = (0.7, -0.4);
        let h1 = (0.5 * x - y + 0.1_f64).tanh();
        let h2 = (2.0 * x + 0.25 * y - 0.2_f64).tanh();
        let expected = 1.5 * h1 - 0.5 * h2 + 0.3;
        assert!((net.forward(&[x, y]).unwrap()[0] - expected).abs() <= 1e-12);
    }

    #[test]
    fn linear_jacobian_is_weight() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, -4.0], vec![0.0, 0.5]]);
        let net = linear(a.clone(), vec![1.0, 1.0, 1.0]);
        assert_eq!(net.jacobian(&[0.3, 0.3]).unwrap(), a);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let mut rng = Rng::new(17);
        for trial in 0..100 {
            let out_act = if trial % 2 == 0 { Activation::Identity } else { Activation::Softplus };
            let net = Mlp::new(&[3, 12, 7, 4], out_act, &mut rng).unwrap();
            let z: Vec<f64> = (0..3).map(|_| rng.normal()).collect();
            let analytic = net.jacobian(&z).unwrap();
            let numeric = fd_jacobian(|x| net.forward(x).unwrap(), &z, DEFAULT_FD_STEP).unwrap();
            for i in 0..4 {
                for j in 0..3 {
                    assert!((analytic[(i, j)] - numeric[(i, j)]).abs() <= 1e-5);
                }
            }
        }
    }

    #[test]
    fn saturated_tanh_rows_vanish() {
        let net = Mlp::from_layers(vec![Layer {
            weight: Matrix::from_rows(&[vec![100.0, 100.0], vec![0.1, 0.0]]),
            bias: vec![50.0, 0.0],
            activation: Activation::Tanh,
        }])
        .unwrap();
        let j = net.jacobian(&[1.0, 1.0]).unwrap();
        assert!(j.row(0).iter().all(|v| v.abs() < 1e-12));
        assert!(j[(1, 0)] > 0.09);
    }

    #[test]
    fn backward_matches_finite_differences_of_parameters() {
        let mut rng = Rng::new(3);
        let net = Mlp::new(&[2, 6, 3], Activation::Identity, &mut rng).unwrap();
        let z = [0.4, -0.9];
        let g_out = [0.3, -1.2, 0.7];
        let loss = |n: &Mlp| -> f64 { n.forward(&z).unwrap().iter().zip(&g_out).map(|(a, b)| a * b).sum() };
        let trace = net.forward_trace(&z).unwrap();
        let mut grad = net.zero_grad();
        let g_in = net.backward(&trace, &g_out, &mut grad);
        let j = net.jacobian(&z).unwrap();
        let expected_in = j.tr_mat_vec(&g_out);
        for (a, b) in g_in.iter().zip(&expected_in) {
            assert!((a - b).abs() < 1e-12);
        }
        let h = 1e-6;
        for (p, gslice) in grad.slices().iter().enumerate() {
            for k in 0..gslice.len() {
                let mut plus = net.clone();
                plus.param_slices_mut()[p][k] += h;
                let mut minus = net.clone();
                minus.param_slices_mut()[p][k] -= h;
                let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
                assert!((fd - gslice[k]).abs() < 1e-7, "param {p}[{k}]: {fd} vs {}", gslice[k]);
            }
        }
    }

    #[test]
    fn rejects_bad_shapes() {
        let net = linear(Matrix::identity(2), vec![0.0; 2]);
        assert!(matches!(net.forward(&[1.0]), Err(Error::Argument(_))));
        let bad = Mlp::from_layers(vec![
            Layer { weight: Matrix::zeros(3, 2), bias: vec![0.0; 3], activation: Activation::Tanh },
            Layer { weight: Matrix::zeros(1, 4), bias: vec![0.0], activation: Activation::Identity },
        ]);
        assert!(bad.is_err());
    }
}

use rand::Rng;

use super::layer::{Activation, Conv2d, Dense, Layer};
use super::tensor::{Scalar, Tensor};
use crate::error::{config_err, Error, Result};

/// A feed-forward stack of layers with a fixed per-item input shape.
#[derive(Clone, Debug, PartialEq)]
pub struct Network<T> {
    input_shape: Vec<usize>,
    layers: Vec<Layer<T>>,
}

/// Activations recorded by [`Network::forward_recorded`], consumed by
/// [`Network::backward`].
#[derive(Clone, Debug)]
pub struct ForwardRecord<T> {
    /// Input of every layer, in order.
    inputs: Vec<Tensor<T>>,
    /// im2col buffers of convolution layers.
    cols: Vec<Option<Vec<T>>>,
    output: Tensor<T>,
}

impl<T> ForwardRecord<T> {
    pub fn output(&self) -> &Tensor<T> {
        &self.output
    }
}

/// Gradients of one parametrized layer.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamGrad<T> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

/// Per-layer parameter gradients aligned 1:1 with [`Network::layers`].
/// Parameter-free layers hold `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientTape<T> {
    entries: Vec<Option<ParamGrad<T>>>,
}

/// Result of a backward pass.
#[derive(Clone, Debug)]
pub struct Backward<T> {
    pub tape: GradientTape<T>,
    pub input_grad: Tensor<T>,
}

fn glorot<T: Scalar, R: Rng>(rng: &mut R, shape: &[usize], fan_in: usize, fan_out: usize) -> Tensor<T> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let len: usize = shape.iter().product();
    let data = (0..len)
        .map(|_| T::from_f64(rng.gen_range(-limit..=limit)))
        .collect();
    Tensor::new(shape.to_vec(), data).expect("shape matches generated data")
}

/// Incrementally assembles a [`Network`], tracking the per-item shape so
/// that every layer is validated as it is added.
pub struct NetworkBuilder<'r, T, R> {
    input_shape: Vec<usize>,
    current: Vec<usize>,
    layers: Vec<Layer<T>>,
    rng: &'r mut R,
    error: Option<Error>,
}

impl<'r, T: Scalar, R: Rng> NetworkBuilder<'r, T, R> {
    pub fn new(input_shape: &[usize], rng: &'r mut R) -> Self {
        Self {
            input_shape: input_shape.to_vec(),
            current: input_shape.to_vec(),
            layers: Vec::new(),
            rng,
            error: None,
        }
    }

    fn fail(&mut self, msg: String) {
        if self.error.is_none() {
            self.error = Some(Error::Config(msg));
        }
    }

    pub fn conv(mut self, filters: usize, kernel: usize, stride: usize, pad: usize) -> Self {
        if self.error.is_some() {
            return self;
        }
        if self.current.len() != 3 {
            let msg = format!("convolution needs a [C, H, W] input, have {:?}", self.current);
            self.fail(msg);
            return self;
        }
        let c = self.current[0];
        let weight = glorot(
            self.rng,
            &[filters, c, kernel, kernel],
            c * kernel * kernel,
            filters * kernel * kernel,
        );
        let conv = Conv2d::new(weight, Tensor::zeros(&[filters]), stride, pad)
            .and_then(|conv| conv.output_shape(&self.current).map(|s| (conv, s)));
        match conv {
            Ok((conv, shape)) => {
                self.current = shape;
                self.layers.push(Layer::Conv2d(conv));
            }
            Err(e) => self.fail(e.to_string()),
        }
        self
    }

    pub fn dense(mut self, out: usize) -> Self {
        if self.error.is_some() {
            return self;
        }
        let inp: usize = self.current.iter().product();
        if out == 0 {
            self.fail("dense layer needs a positive output size".into());
            return self;
        }
        let weight = glorot(self.rng, &[out, inp], inp, out);
        let dense = Dense::new(weight, Tensor::zeros(&[out])).expect("valid dense shapes");
        self.layers.push(Layer::Dense(dense));
        self.current = vec![out];
        self
    }

    pub fn activation(mut self, act: Activation) -> Self {
        self.layers.push(Layer::Activation(act));
        self
    }

    pub fn tanh(self) -> Self {
        self.activation(Activation::Tanh)
    }

    pub fn sigmoid(self) -> Self {
        self.activation(Activation::Sigmoid)
    }

    pub fn reshape(mut self, shape: &[usize]) -> Self {
        if self.error.is_some() {
            return self;
        }
        let have: usize = self.current.iter().product();
        let want: usize = shape.iter().product();
        if have != want {
            let msg = format!("cannot reshape {:?} into {shape:?}", self.current);
            self.fail(msg);
            return self;
        }
        self.layers.push(Layer::Reshape(shape.to_vec()));
        self.current = shape.to_vec();
        self
    }

    pub fn build(self) -> Result<Network<T>> {
        if let Some(e) = self.error {
            return Err(e);
        }
        Network::new(self.input_shape, self.layers)
    }
}

impl<T: Scalar> Network<T> {
    /// Validates the layer chain against `input_shape`.
    pub fn new(input_shape: Vec<usize>, layers: Vec<Layer<T>>) -> Result<Self> {
        let net = Self {
            input_shape,
            layers,
        };
        net.output_shape()?;
        Ok(net)
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    /// Per-item output shape.
    pub fn output_shape(&self) -> Result<Vec<usize>> {
        let mut shape = self.input_shape.clone();
        for layer in &self.layers {
            shape = match layer {
                Layer::Conv2d(c) => c.output_shape(&shape)?,
                Layer::Dense(d) => {
                    let n: usize = shape.iter().product();
                    if n != d.in_dim() {
                        return config_err(format!(
                            "dense layer expects {} inputs, previous layer yields {shape:?}",
                            d.in_dim()
                        ));
                    }
                    vec![d.out_dim()]
                }
                Layer::Activation(_) => shape,
                Layer::Reshape(target) => {
                    if target.iter().product::<usize>() != shape.iter().product::<usize>() {
                        return config_err(format!("cannot reshape {shape:?} into {target:?}"));
                    }
                    target.clone()
                }
            };
        }
        Ok(shape)
    }

    /// True when both networks have the same input shape, layer kinds,
    /// parameter shapes and convolution geometry.
    pub fn same_structure(&self, other: &Network<T>) -> bool {
        self.input_shape == other.input_shape
            && self.layers.len() == other.layers.len()
            && self.layers.iter().zip(&other.layers).all(|pair| match pair {
                (Layer::Conv2d(a), Layer::Conv2d(b)) => {
                    a.weight.shape() == b.weight.shape() && a.stride == b.stride && a.pad == b.pad
                }
                (Layer::Dense(a), Layer::Dense(b)) => a.weight.shape() == b.weight.shape(),
                (Layer::Activation(a), Layer::Activation(b)) => a == b,
                (Layer::Reshape(a), Layer::Reshape(b)) => a == b,
                _ => false,
            })
    }

    pub fn param_count(&self) -> usize {
        self.param_tensors().iter().map(|t| t.len()).sum()
    }

    /// Weight and bias tensors in layer order (weight before bias).
    pub fn param_tensors(&self) -> Vec<&Tensor<T>> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Conv2d(c) => out.extend([&c.weight, &c.bias]),
                Layer::Dense(d) => out.extend([&d.weight, &d.bias]),
                _ => {}
            }
        }
        out
    }

    pub fn param_tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            match layer {
                Layer::Conv2d(c) => out.extend([&mut c.weight, &mut c.bias]),
                Layer::Dense(d) => out.extend([&mut d.weight, &mut d.bias]),
                _ => {}
            }
        }
        out
    }

    pub fn cast<U: Scalar>(&self) -> Network<U> {
        let layers = self
            .layers
            .iter()
            .map(|layer| match layer {
                Layer::Conv2d(c) => Layer::Conv2d(Conv2d {
                    weight: c.weight.cast(),
                    bias: c.bias.cast(),
                    stride: c.stride,
                    pad: c.pad,
                }),
                Layer::Dense(d) => Layer::Dense(Dense {
                    weight: d.weight.cast(),
                    bias: d.bias.cast(),
                }),
                Layer::Activation(a) => Layer::Activation(*a),
                Layer::Reshape(s) => Layer::Reshape(s.clone()),
            })
            .collect();
        Network {
            input_shape: self.input_shape.clone(),
            layers,
        }
    }

    fn check_input(&self, input: &Tensor<T>) -> Result<()> {
        if input.shape().len() < 2 || input.shape()[1..] != self.input_shape[..] {
            return config_err(format!(
                "network expects [N, {:?}] input, got {:?}",
                self.input_shape,
                input.shape()
            ));
        }
        Ok(())
    }

    fn apply_layer(layer: &Layer<T>, x: &Tensor<T>) -> Result<(Tensor<T>, Option<Vec<T>>)> {
        Ok(match layer {
            Layer::Conv2d(c) => {
                let (y, cols) = c.forward(x)?;
                (y, Some(cols))
            }
            Layer::Dense(d) => (d.forward(x)?, None),
            Layer::Activation(a) => (x.map(|v| a.apply(v)), None),
            Layer::Reshape(target) => {
                let mut shape = vec![x.batch()];
                shape.extend_from_slice(target);
                (x.clone().reshape(shape)?, None)
            }
        })
    }

    /// Batched inference. Read-only on the parameters.
    pub fn forward(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(input)?;
        let mut x = input.clone();
        for layer in &self.layers {
            x = Self::apply_layer(layer, &x)?.0;
        }
        Ok(x)
    }

    /// Forward pass that keeps every intermediate activation for
    /// [`Network::backward`].
    pub fn forward_recorded(&self, input: &Tensor<T>) -> Result<ForwardRecord<T>> {
        self.check_input(input)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut cols = Vec::with_capacity(self.layers.len());
        let mut x = input.clone();
        for layer in &self.layers {
            let (y, c) = Self::apply_layer(layer, &x)?;
            inputs.push(x);
            cols.push(c);
            x = y;
        }
        Ok(ForwardRecord {
            inputs,
            cols,
            output: x,
        })
    }

    /// Reverse-mode pass: gradients of every parameter and of the input,
    /// given `upstream = dLoss/dOutput`.
    pub fn backward(&self, record: &ForwardRecord<T>, upstream: &Tensor<T>) -> Result<Backward<T>> {
        if record.inputs.len() != self.layers.len() || record.cols.len() != self.layers.len() {
            return Err(Error::Usage(format!(
                "forward record holds {} layers, network has {}",
                record.inputs.len(),
                self.layers.len()
            )));
        }
        if let Some(first) = record.inputs.first() {
            self.check_input(first)
                .map_err(|_| Error::Usage("forward record was produced by another network".into()))?;
        }
        if upstream.shape() != record.output.shape() {
            return config_err(format!(
                "upstream gradient {:?} does not match network output {:?}",
                upstream.shape(),
                record.output.shape()
            ));
        }
        let mut tape = GradientTape::zeros_for(self);
        let mut grad = upstream.clone();
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let x = &record.inputs[idx];
            let y = record.inputs.get(idx + 1).unwrap_or(&record.output);
            grad = match layer {
                Layer::Conv2d(c) => {
                    let cols = record.cols[idx]
                        .as_ref()
                        .ok_or_else(|| Error::Usage("missing convolution buffers in forward record".into()))?;
                    let g = tape.entries[idx].as_mut().expect("conv has gradient slot");
                    c.backward(x.shape(), cols, &grad, &mut g.weight, &mut g.bias)?
                }
                Layer::Dense(d) => {
                    let g = tape.entries[idx].as_mut().expect("dense has gradient slot");
                    let dx = d.backward(x, &grad, &mut g.weight, &mut g.bias)?;
                    dx.reshape(x.shape().to_vec())?
                }
                Layer::Activation(a) => {
                    let mut dx = grad;
                    for (g, &out) in dx.data_mut().iter_mut().zip(y.data()) {
                        *g = *g * a.derivative_from_output(out);
                    }
                    dx
                }
                Layer::Reshape(_) => grad.reshape(x.shape().to_vec())?,
            };
        }
        Ok(Backward {
            tape,
            input_grad: grad,
        })
    }
}

impl<T: Scalar> GradientTape<T> {
    pub fn zeros_for(net: &Network<T>) -> Self {
        let entries = net
            .layers
            .iter()
            .map(|layer| match layer {
                Layer::Conv2d(c) => Some(ParamGrad {
                    weight: Tensor::zeros(c.weight.shape()),
                    bias: Tensor::zeros(c.bias.shape()),
                }),
                Layer::Dense(d) => Some(ParamGrad {
                    weight: Tensor::zeros(d.weight.shape()),
                    bias: Tensor::zeros(d.bias.shape()),
                }),
                _ => None,
            })
            .collect();
        Self { entries }
    }

    pub fn entries(&self) -> &[Option<ParamGrad<T>>] {
        &self.entries
    }

    /// Gradient tensors in the same order as [`Network::param_tensors`].
    pub fn grad_tensors(&self) -> Vec<&Tensor<T>> {
        self.entries
            .iter()
            .flatten()
            .flat_map(|g| [&g.weight, &g.bias])
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.grad_tensors().iter().all(|t| t.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.grad_tensors()
            .iter()
            .all(|t| t.data().iter().all(|v| *v == T::zero()))
    }

    fn matches(&self, net: &Network<T>) -> bool {
        let params = net.param_tensors();
        let grads = self.grad_tensors();
        params.len() == grads.len() && params.iter().zip(&grads).all(|(p, g)| p.shape() == g.shape())
    }
}

/// Plain gradient descent, `theta <- theta - lr * grad`.
pub fn sgd_step<T: Scalar>(net: &mut Network<T>, tape: &GradientTape<T>, lr: T) -> Result<()> {
    if !(lr > T::zero()) || !lr.is_finite() {
        return config_err(format!("learning rate must be positive, got {lr:?}"));
    }
    if !tape.matches(net) {
        return config_err("gradient tape does not match the network parameters");
    }
    if !tape.is_finite() {
        let bad = tape
            .grad_tensors()
            .iter()
            .position(|t| !t.is_finite())
            .unwrap_or(0);
        return Err(Error::NumericalAbort {
            epoch: 0,
            reason: format!("non-finite gradient in parameter tensor {bad}"),
            checkpoint: None,
        });
    }
    let grads: Vec<Tensor<T>> = tape.grad_tensors().into_iter().cloned().collect();
    for (param, grad) in net.param_tensors_mut().into_iter().zip(&grads) {
        for (p, &g) in param.data_mut().iter_mut().zip(grad.data()) {
            *p = *p - lr * g;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::layer::Dense;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny_dense() -> Network<f64> {
        let d = Dense::new(
            Tensor::new(vec![1, 3], vec![0.5, -1.0, 2.0]).unwrap(),
            Tensor::new(vec![1], vec![0.1]).unwrap(),
        )
        .unwrap();
        Network::new(vec![3], vec![Layer::Dense(d)]).unwrap()
    }

    #[test]
    fn linear_case_gradient_is_input() {
        let net = tiny_dense();
        let x = Tensor::new(vec![1, 3], vec![1.5, -2.0, 0.25]).unwrap();
        let rec = net.forward_recorded(&x).unwrap();
        let b = net.backward(&rec, &Tensor::filled(&[1, 1], 1.0)).unwrap();
        let g = b.tape.entries()[0].as_ref().unwrap();
        assert_eq!(g.weight.data(), x.data());
        assert_eq!(g.bias.data(), &[1.0]);
        assert_eq!(b.input_grad.data(), &[0.5, -1.0, 2.0]);
    }

    #[test]
    fn zero_upstream_gives_zero_tape() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net: Network<f64> = NetworkBuilder::new(&[2, 6, 6], &mut rng)
            .conv(3, 3, 2, 1)
            .tanh()
            .dense(4)
            .sigmoid()
            .build()
            .unwrap();
        let x = Tensor::filled(&[2, 2, 6, 6], 0.3);
        let rec = net.forward_recorded(&x).unwrap();
        let b = net.backward(&rec, &Tensor::zeros(&[2, 4])).unwrap();
        assert!(b.tape.is_zero());
        assert!(b.input_grad.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_rejects_foreign_record() {
        let net = tiny_dense();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let other: Network<f64> = NetworkBuilder::new(&[3], &mut rng).dense(1).tanh().build().unwrap();
        let x = Tensor::filled(&[1, 3], 1.0);
        let rec = other.forward_recorded(&x).unwrap();
        assert!(matches!(
            net.backward(&rec, &Tensor::filled(&[1, 1], 1.0)),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn sgd_definition() {
        let mut net = tiny_dense();
        let mut tape = GradientTape::zeros_for(&net);
        if let Some(g) = tape.entries[0].as_mut() {
            g.weight.data_mut()[0] = 2.0;
        }
        // weight 0.5 with grad 2 and lr 0.1 -> 0.3
        sgd_step(&mut net, &tape, 0.1).unwrap();
        assert!((net.param_tensors()[0].data()[0] - 0.3).abs() < 1e-15);
        assert_eq!(net.param_tensors()[0].data()[1], -1.0);

        let before = net.clone();
        sgd_step(&mut net, &GradientTape::zeros_for(&before), 0.1).unwrap();
        assert_eq!(net, before);
        assert!(sgd_step(&mut net, &GradientTape::zeros_for(&before), 0.0).is_err());
    }

    #[test]
    fn sgd_aborts_on_nan() {
        let mut net = tiny_dense();
        let mut tape = GradientTape::zeros_for(&net);
        tape.entries[0].as_mut().unwrap().bias.data_mut()[0] = f64::NAN;
        let before = net.clone();
        assert!(matches!(
            sgd_step(&mut net, &tape, 0.1),
            Err(Error::NumericalAbort { .. })
        ));
        assert_eq!(net, before);
    }

    #[test]
    fn builder_reports_bad_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r: Result<Network<f32>> = NetworkBuilder::new(&[1, 4, 4], &mut rng).conv(2, 7, 1, 0).build();
        assert!(r.is_err());
        let r: Result<Network<f32>> = NetworkBuilder::new(&[6], &mut rng).dense(4).reshape(&[3, 3]).build();
        assert!(r.is_err());
    }

    #[test]
    fn glorot_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let net: Network<f64> = NetworkBuilder::new(&[10], &mut rng).dense(20).build().unwrap();
        let limit = (6.0f64 / 30.0).sqrt();
        let p = net.param_tensors();
        assert!(p[0].data().iter().all(|w| w.abs() <= limit));
        assert!(p[1].data().iter().all(|&b| b == 0.0));
    }
}

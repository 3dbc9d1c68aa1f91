//! Layer kinds and their forward/backward kernels.
//!
//! Every kernel works on batched activations: the leading dimension is the
//! batch, the remaining dimensions are the per-item shape.

use serde::{Deserialize, Serialize};

use super::tensor::{Scalar, Tensor};
use crate::error::{config_err, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Sigmoid,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "tanh" => Ok(Activation::Tanh),
            "sigmoid" => Ok(Activation::Sigmoid),
            other => config_err(format!("unsupported activation '{other}'")),
        }
    }

    #[inline]
    pub fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => T::one() / (T::one() + (-x).exp()),
        }
    }

    /// Derivative expressed through the activation output `y`.
    #[inline]
    pub fn derivative_from_output<T: Scalar>(self, y: T) -> T {
        match self {
            Activation::Tanh => T::one() - y * y,
            Activation::Sigmoid => y * (T::one() - y),
        }
    }
}

/// Convolution over `[C, H, W]` items with square filters and zero padding.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv2d<T> {
    /// `[out_channels, in_channels, k, k]`
    pub weight: Tensor<T>,
    /// `[out_channels]`
    pub bias: Tensor<T>,
    pub stride: usize,
    pub pad: usize,
}

/// Fully connected layer, `y = W x + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense<T> {
    /// `[out_dim, in_dim]`
    pub weight: Tensor<T>,
    /// `[out_dim]`
    pub bias: Tensor<T>,
}

/// One entry of a network's layer list.
#[derive(Clone, Debug, PartialEq)]
pub enum Layer<T> {
    Conv2d(Conv2d<T>),
    Dense(Dense<T>),
    Activation(Activation),
    /// Parameter-free change of the per-item shape.
    Reshape(Vec<usize>),
}

pub type LayerParams<T> = Layer<T>;

fn conv_out_dim(len: usize, k: usize, stride: usize, pad: usize) -> Option<usize> {
    let padded = len + 2 * pad;
    if padded < k || stride == 0 {
        return None;
    }
    Some((padded - k) / stride + 1)
}

impl<T: Scalar> Conv2d<T> {
    pub fn new(weight: Tensor<T>, bias: Tensor<T>, stride: usize, pad: usize) -> Result<Self> {
        let ws = weight.shape();
        if ws.len() != 4 || ws[2] != ws[3] {
            return config_err(format!(
                "convolution weight must be [out, in, k, k], got {ws:?}"
            ));
        }
        if bias.shape() != [ws[0]] {
            return config_err(format!(
                "convolution bias must be [{}], got {:?}",
                ws[0],
                bias.shape()
            ));
        }
        if stride == 0 {
            return config_err("convolution stride must be positive");
        }
        Ok(Self {
            weight,
            bias,
            stride,
            pad,
        })
    }

    pub fn out_channels(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn kernel(&self) -> usize {
        self.weight.shape()[2]
    }

    /// Per-item output shape for a `[C, H, W]` input.
    pub fn output_shape(&self, item_shape: &[usize]) -> Result<Vec<usize>> {
        if item_shape.len() != 3 {
            return config_err(format!(
                "convolution expects [C, H, W] items, got {item_shape:?}"
            ));
        }
        if item_shape[0] != self.in_channels() {
            return config_err(format!(
                "convolution expects {} input channels, got {}",
                self.in_channels(),
                item_shape[0]
            ));
        }
        let k = self.kernel();
        match (
            conv_out_dim(item_shape[1], k, self.stride, self.pad),
            conv_out_dim(item_shape[2], k, self.stride, self.pad),
        ) {
            (Some(oh), Some(ow)) if oh > 0 && ow > 0 => Ok(vec![self.out_channels(), oh, ow]),
            _ => config_err(format!(
                "convolution k={k} stride={} pad={} does not fit input {item_shape:?}",
                self.stride, self.pad
            )),
        }
    }

    fn im2col(&self, x: &[T], c: usize, h: usize, w: usize, oh: usize, ow: usize, cols: &mut [T]) {
        let k = self.kernel();
        let (s, p) = (self.stride as isize, self.pad as isize);
        let positions = oh * ow;
        for ci in 0..c {
            for i in 0..k {
                for j in 0..k {
                    let row = (ci * k + i) * k + j;
                    let out = &mut cols[row * positions..(row + 1) * positions];
                    for oy in 0..oh {
                        let y = oy as isize * s + i as isize - p;
                        let dst = &mut out[oy * ow..(oy + 1) * ow];
                        if y < 0 || y >= h as isize {
                            dst.iter_mut().for_each(|v| *v = T::zero());
                            continue;
                        }
                        let src = &x[(ci * h + y as usize) * w..(ci * h + y as usize + 1) * w];
                        for (ox, d) in dst.iter_mut().enumerate() {
                            let xx = ox as isize * s + j as isize - p;
                            *d = if xx < 0 || xx >= w as isize {
                                T::zero()
                            } else {
                                src[xx as usize]
                            };
                        }
                    }
                }
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn col2im(&self, cols: &[T], c: usize, h: usize, w: usize, oh: usize, ow: usize, dx: &mut [T]) {
        let k = self.kernel();
        let (s, p) = (self.stride as isize, self.pad as isize);
        let positions = oh * ow;
        for ci in 0..c {
            for i in 0..k {
                for j in 0..k {
                    let row = (ci * k + i) * k + j;
                    let src = &cols[row * positions..(row + 1) * positions];
                    for oy in 0..oh {
                        let y = oy as isize * s + i as isize - p;
                        if y < 0 || y >= h as isize {
                            continue;
                        }
                        let base = (ci * h + y as usize) * w;
                        for ox in 0..ow {
                            let xx = ox as isize * s + j as isize - p;
                            if xx >= 0 && xx < w as isize {
                                dx[base + xx as usize] = dx[base + xx as usize] + src[oy * ow + ox];
                            }
                        }
                    }
                }
            }
        }
    }

    /// Batched forward pass. Returns the output and the im2col buffers
    /// needed by [`Conv2d::backward`].
    pub fn forward(&self, input: &Tensor<T>) -> Result<(Tensor<T>, Vec<T>)> {
        let shape = input.shape();
        if shape.len() != 4 {
            return config_err(format!(
                "batched convolution expects [N, C, H, W], got {shape:?}"
            ));
        }
        let out_item = self.output_shape(&shape[1..])?;
        let (n, c, h, w) = (shape[0], shape[1], shape[2], shape[3]);
        let (o, oh, ow) = (out_item[0], out_item[1], out_item[2]);
        let k = self.kernel();
        let ckk = c * k * k;
        let positions = oh * ow;
        let mut cols = vec![T::zero(); n * ckk * positions];
        let mut out = Tensor::zeros(&[n, o, oh, ow]);
        for b in 0..n {
            let col = &mut cols[b * ckk * positions..(b + 1) * ckk * positions];
            self.im2col(input.item(b), c, h, w, oh, ow, col);
            let y = out.item_mut(b);
            for (oc, row) in y.chunks_mut(positions).enumerate() {
                let bias = self.bias.data()[oc];
                row.iter_mut().for_each(|v| *v = bias);
            }
            T::gemm(
                o,
                ckk,
                positions,
                T::one(),
                self.weight.data(),
                ckk,
                1,
                col,
                positions,
                1,
                T::one(),
                y,
                positions,
                1,
            );
        }
        Ok((out, cols))
    }

    /// Accumulates parameter gradients into `dw`/`db` and returns the
    /// gradient with respect to the input.
    pub fn backward(
        &self,
        input_shape: &[usize],
        cols: &[T],
        upstream: &Tensor<T>,
        dw: &mut Tensor<T>,
        db: &mut Tensor<T>,
    ) -> Result<Tensor<T>> {
        let out_item = self.output_shape(&input_shape[1..])?;
        let (n, c, h, w) = (input_shape[0], input_shape[1], input_shape[2], input_shape[3]);
        let (o, oh, ow) = (out_item[0], out_item[1], out_item[2]);
        if upstream.shape() != [n, o, oh, ow] {
            return config_err(format!(
                "convolution upstream gradient {:?} does not match output [{n}, {o}, {oh}, {ow}]",
                upstream.shape()
            ));
        }
        let k = self.kernel();
        let ckk = c * k * k;
        let positions = oh * ow;
        let mut dx = Tensor::zeros(input_shape);
        let mut dcols = vec![T::zero(); ckk * positions];
        for b in 0..n {
            let g = upstream.item(b);
            let col = &cols[b * ckk * positions..(b + 1) * ckk * positions];
            T::gemm(
                o,
                positions,
                ckk,
                T::one(),
                g,
                positions,
                1,
                col,
                1,
                positions,
                T::one(),
                dw.data_mut(),
                ckk,
                1,
            );
            for (oc, row) in g.chunks(positions).enumerate() {
                let s: T = row.iter().copied().sum();
                db.data_mut()[oc] = db.data()[oc] + s;
            }
            T::gemm(
                ckk,
                o,
                positions,
                T::one(),
                self.weight.data(),
                1,
                ckk,
                g,
                positions,
                1,
                T::zero(),
                &mut dcols,
                positions,
                1,
            );
            self.col2im(&dcols, c, h, w, oh, ow, dx.item_mut(b));
        }
        Ok(dx)
    }
}

impl<T: Scalar> Dense<T> {
    pub fn new(weight: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        let ws = weight.shape();
        if ws.len() != 2 {
            return config_err(format!("dense weight must be [out, in], got {ws:?}"));
        }
        if bias.shape() != [ws[0]] {
            return config_err(format!(
                "dense bias must be [{}], got {:?}",
                ws[0],
                bias.shape()
            ));
        }
        Ok(Self { weight, bias })
    }

    pub fn out_dim(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn in_dim(&self) -> usize {
        self.weight.shape()[1]
    }

    fn check_input(&self, input: &Tensor<T>) -> Result<()> {
        if input.shape().len() < 2 || input.item_len() != self.in_dim() {
            return config_err(format!(
                "dense layer expects {} inputs per item, got shape {:?}",
                self.in_dim(),
                input.shape()
            ));
        }
        Ok(())
    }

    /// `[N, ...]` with `in_dim` values per item to `[N, out_dim]`.
    pub fn forward(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(input)?;
        let n = input.batch();
        let (out, inp) = (self.out_dim(), self.in_dim());
        let mut y = Tensor::zeros(&[n, out]);
        for row in y.data_mut().chunks_mut(out) {
            row.copy_from_slice(self.bias.data());
        }
        T::gemm(
            n,
            inp,
            out,
            T::one(),
            input.data(),
            inp,
            1,
            self.weight.data(),
            1,
            inp,
            T::one(),
            y.data_mut(),
            out,
            1,
        );
        Ok(y)
    }

    pub fn backward(
        &self,
        input: &Tensor<T>,
        upstream: &Tensor<T>,
        dw: &mut Tensor<T>,
        db: &mut Tensor<T>,
    ) -> Result<Tensor<T>> {
        self.check_input(input)?;
        let n = input.batch();
        let (out, inp) = (self.out_dim(), self.in_dim());
        if upstream.shape() != [n, out] {
            return config_err(format!(
                "dense upstream gradient {:?} does not match output [{n}, {out}]",
                upstream.shape()
            ));
        }
        T::gemm(
            out,
            n,
            inp,
            T::one(),
            upstream.data(),
            1,
            out,
            input.data(),
            inp,
            1,
            T::one(),
            dw.data_mut(),
            inp,
            1,
        );
        for row in upstream.data().chunks(out) {
            for (acc, &g) in db.data_mut().iter_mut().zip(row) {
                *acc = *acc + g;
            }
        }
        let mut dx = Tensor::zeros(input.shape());
        T::gemm(
            n,
            out,
            inp,
            T::one(),
            upstream.data(),
            out,
            1,
            self.weight.data(),
            inp,
            1,
            T::zero(),
            dx.data_mut(),
            inp,
            1,
        );
        Ok(dx)
    }
}

/// Applies `conv` to a single `[C, H, W]` item or a `[N, C, H, W]` batch.
pub fn conv2d_forward<T: Scalar>(input: &Tensor<T>, conv: &Conv2d<T>) -> Result<Tensor<T>> {
    match input.shape().len() {
        3 => {
            let mut shape = vec![1];
            shape.extend_from_slice(input.shape());
            let batched = input.clone().reshape(shape)?;
            let (out, _) = conv.forward(&batched)?;
            let item = out.shape()[1..].to_vec();
            out.reshape(item)
        }
        4 => conv.forward(input).map(|(out, _)| out),
        _ => config_err(format!(
            "convolution input must be [C, H, W] or [N, C, H, W], got {:?}",
            input.shape()
        )),
    }
}

/// Applies `dense` to a single vector or a `[N, in]` batch.
pub fn dense_forward<T: Scalar>(input: &Tensor<T>, dense: &Dense<T>) -> Result<Tensor<T>> {
    if input.shape().len() == 1 {
        let batched = input.clone().reshape(vec![1, input.len()])?;
        let out = dense.forward(&batched)?;
        out.reshape(vec![dense.out_dim()])
    } else {
        dense.forward(input)
    }
}

pub fn activation_forward<T: Scalar>(input: &Tensor<T>, act: Activation) -> Tensor<T> {
    input.map(|v| act.apply(v))
}

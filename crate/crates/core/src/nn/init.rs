use serde::{Deserialize, Serialize};

use super::{Rng, Scalar, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    None,
    Relu,
    Sigmoid,
}

/// Hyperparameters of one square convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub has_bias: bool,
    pub activation: Activation,
}

impl ConvSpec {
    /// Stride 1, no padding, with bias, no activation.
    pub fn new(in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            kernel,
            stride: 1,
            padding: 0,
            has_bias: true,
            activation: Activation::None,
        }
    }

    /// Size-preserving convolution (`padding = kernel / 2`).
    pub fn same(in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        Self::new(in_channels, out_channels, kernel).padding(kernel / 2)
    }

    pub fn stride(mut self, stride: usize) -> Self {
        self.stride = stride;
        self
    }

    pub fn padding(mut self, padding: usize) -> Self {
        self.padding = padding;
        self
    }

    pub fn bias(mut self, has_bias: bool) -> Self {
        self.has_bias = has_bias;
        self
    }

    pub fn activation(mut self, activation: Activation) -> Self {
        self.activation = activation;
        self
    }

    pub fn weight_dims(&self) -> [usize; 4] {
        [self.out_channels, self.in_channels, self.kernel, self.kernel]
    }

    pub fn bias_dims(&self) -> [usize; 4] {
        [1, self.out_channels, 1, 1]
    }

    pub fn fan_in(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }

    /// `k²·Cin·Cout` weights plus `Cout` biases.
    pub fn param_count(&self) -> u64 {
        let w = (self.fan_in() * self.out_channels) as u64;
        w + if self.has_bias { self.out_channels as u64 } else { 0 }
    }
}

/// Fan-in Kaiming normal initialization with ReLU gain:
/// `std = sqrt(2 / (Cin·k²))`, zero bias.
pub fn kaiming_init<T: Scalar>(spec: &ConvSpec, rng: &mut Rng) -> (Tensor<T>, Option<Tensor<T>>) {
    let std = (2.0 / spec.fan_in() as f64).sqrt();
    let weight = Tensor::from_fn(spec.weight_dims(), |_| T::of(rng.normal() * std));
    let bias = spec.has_bias.then(|| Tensor::zeros(spec.bias_dims()));
    (weight, bias)
}

use serde::{Deserialize, Serialize};

use super::{Tensor, WorkloadError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Conv2d,
    MaxPool2d,
    FullyConnected,
}

/// One network layer with its parameters.
///
/// Convolution weights are `[filters, channels, kh, kw]`; fully-connected
/// weights are `[out_features, in_features]`. Pooling carries no parameters.
/// Fully-connected layers accept any input whose element count matches
/// `in_features`, so the flatten between the convolutional and dense parts
/// needs no layer of its own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub in_shape: Vec<usize>,
    pub out_shape: Vec<usize>,
    pub weights: Option<Tensor>,
    pub bias: Option<Tensor>,
    pub kernel: (usize, usize),
    pub stride: usize,
}

fn valid_extent(input: usize, kernel: usize, stride: usize) -> Option<usize> {
    if stride == 0 || kernel == 0 || kernel > input {
        return None;
    }
    Some((input - kernel) / stride + 1)
}

impl LayerSpec {
    pub fn conv2d(
        in_shape: [usize; 3],
        weights: Tensor,
        bias: Tensor,
        stride: usize,
    ) -> Result<Self, WorkloadError> {
        let [channels, height, width] = in_shape;
        let &[filters, w_channels, kh, kw] = weights.shape() else {
            return Err(WorkloadError::config("conv2d weights must be rank 4"));
        };
        if w_channels != channels {
            return Err(WorkloadError::config(format!(
                "conv2d weights expect {w_channels} channels, input has {channels}"
            )));
        }
        if bias.shape() != [filters] {
            return Err(WorkloadError::config(format!(
                "conv2d bias shape {:?} does not match {filters} filters",
                bias.shape()
            )));
        }
        let (Some(oh), Some(ow)) = (
            valid_extent(height, kh, stride),
            valid_extent(width, kw, stride),
        ) else {
            return Err(WorkloadError::config(format!(
                "conv2d kernel {kh}x{kw} stride {stride} does not fit {height}x{width}"
            )));
        };
        Ok(Self {
            kind: LayerKind::Conv2d,
            in_shape: in_shape.to_vec(),
            out_shape: vec![filters, oh, ow],
            weights: Some(weights),
            bias: Some(bias),
            kernel: (kh, kw),
            stride,
        })
    }

    pub fn maxpool2d(
        in_shape: [usize; 3],
        kernel: (usize, usize),
        stride: usize,
    ) -> Result<Self, WorkloadError> {
        let [channels, height, width] = in_shape;
        if stride == 0 || height % stride != 0 || width % stride != 0 {
            return Err(WorkloadError::config(format!(
                "maxpool2d input {height}x{width} not divisible by stride {stride}"
            )));
        }
        let (Some(oh), Some(ow)) = (
            valid_extent(height, kernel.0, stride),
            valid_extent(width, kernel.1, stride),
        ) else {
            return Err(WorkloadError::config("maxpool2d window larger than input"));
        };
        Ok(Self {
            kind: LayerKind::MaxPool2d,
            in_shape: in_shape.to_vec(),
            out_shape: vec![channels, oh, ow],
            weights: None,
            bias: None,
            kernel,
            stride,
        })
    }

    pub fn fully_connected(weights: Tensor, bias: Tensor) -> Result<Self, WorkloadError> {
        let &[out_features, in_features] = weights.shape() else {
            return Err(WorkloadError::config("fully_connected weights must be rank 2"));
        };
        if bias.shape() != [out_features] {
            return Err(WorkloadError::config(format!(
                "fully_connected bias shape {:?} does not match {out_features} outputs",
                bias.shape()
            )));
        }
        Ok(Self {
            kind: LayerKind::FullyConnected,
            in_shape: vec![in_features],
            out_shape: vec![out_features],
            weights: Some(weights),
            bias: Some(bias),
            kernel: (1, 1),
            stride: 1,
        })
    }

    pub fn input_elements(&self) -> usize {
        self.in_shape.iter().product()
    }

    pub fn output_elements(&self) -> usize {
        self.out_shape.iter().product()
    }

    /// Number of weights plus biases.
    pub fn parameter_count(&self) -> usize {
        self.weights.as_ref().map_or(0, Tensor::len) + self.bias.as_ref().map_or(0, Tensor::len)
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor, WorkloadError> {
        match self.kind {
            LayerKind::Conv2d => conv2d(input, self),
            LayerKind::MaxPool2d => maxpool2d(input, self),
            LayerKind::FullyConnected => fully_connected(input, self),
        }
    }

    fn params(&self) -> Result<(&Tensor, &Tensor), WorkloadError> {
        match (&self.weights, &self.bias) {
            (Some(w), Some(b)) => Ok((w, b)),
            _ => Err(WorkloadError::config("layer is missing weights or bias")),
        }
    }
}

fn expect_kind(layer: &LayerSpec, kind: LayerKind) -> Result<(), WorkloadError> {
    if layer.kind != kind {
        return Err(WorkloadError::config(format!(
            "expected a {kind:?} layer, got {:?}",
            layer.kind
        )));
    }
    Ok(())
}

fn expect_shape(input: &Tensor, layer: &LayerSpec) -> Result<(), WorkloadError> {
    if input.shape() != layer.in_shape.as_slice() {
        return Err(WorkloadError::ShapeMismatch {
            expected: layer.in_shape.clone(),
            actual: input.shape().to_vec(),
        });
    }
    Ok(())
}

/// Valid (unpadded) 2-D convolution with per-filter bias.
pub fn conv2d(input: &Tensor, layer: &LayerSpec) -> Result<Tensor, WorkloadError> {
    expect_kind(layer, LayerKind::Conv2d)?;
    expect_shape(input, layer)?;
    let (weights, bias) = layer.params()?;
    let (channels, height, width) = (layer.in_shape[0], layer.in_shape[1], layer.in_shape[2]);
    let (filters, out_h, out_w) = (layer.out_shape[0], layer.out_shape[1], layer.out_shape[2]);
    let (kh, kw) = layer.kernel;
    let stride = layer.stride;
    let x = input.data();
    let w = weights.data();

    let mut out = Vec::with_capacity(filters * out_h * out_w);
    for (f, &b) in bias.data().iter().enumerate() {
        let filter = &w[f * channels * kh * kw..(f + 1) * channels * kh * kw];
        for oy in 0..out_h {
            for ox in 0..out_w {
                let mut acc = 0.0;
                for c in 0..channels {
                    let plane = &x[c * height * width..(c + 1) * height * width];
                    let taps = &filter[c * kh * kw..(c + 1) * kh * kw];
                    for ky in 0..kh {
                        let row_start = (oy * stride + ky) * width + ox * stride;
                        let row = &plane[row_start..row_start + kw];
                        acc += row
                            .iter()
                            .zip(&taps[ky * kw..(ky + 1) * kw])
                            .map(|(a, b)| a * b)
                            .sum::<f64>();
                    }
                }
                out.push(acc + b);
            }
        }
    }
    Tensor::new(layer.out_shape.clone(), out)
}

/// Per-channel windowed maximum.
pub fn maxpool2d(input: &Tensor, layer: &LayerSpec) -> Result<Tensor, WorkloadError> {
    expect_kind(layer, LayerKind::MaxPool2d)?;
    expect_shape(input, layer)?;
    let (height, width) = (layer.in_shape[1], layer.in_shape[2]);
    if height % layer.stride != 0 || width % layer.stride != 0 {
        return Err(WorkloadError::config(format!(
            "maxpool2d input {height}x{width} not divisible by stride {}",
            layer.stride
        )));
    }
    let (channels, out_h, out_w) = (layer.out_shape[0], layer.out_shape[1], layer.out_shape[2]);
    let (kh, kw) = layer.kernel;
    let x = input.data();

    let mut out = Vec::with_capacity(channels * out_h * out_w);
    for plane in x.chunks_exact(height * width) {
        for oy in 0..out_h {
            for ox in 0..out_w {
                let mut best = f64::NEG_INFINITY;
                for ky in 0..kh {
                    let start = (oy * layer.stride + ky) * width + ox * layer.stride;
                    best = plane[start..start + kw].iter().copied().fold(best, f64::max);
                }
                out.push(best);
            }
        }
    }
    Tensor::new(layer.out_shape.clone(), out)
}

/// `out[j] = sum_i W[j, i] * in[i] + bias[j]`; the input is flattened first.
pub fn fully_connected(input: &Tensor, layer: &LayerSpec) -> Result<Tensor, WorkloadError> {
    expect_kind(layer, LayerKind::FullyConnected)?;
    let (weights, bias) = layer.params()?;
    let in_features = layer.in_shape[0];
    if input.len() != in_features {
        return Err(WorkloadError::ShapeMismatch {
            expected: layer.in_shape.clone(),
            actual: input.shape().to_vec(),
        });
    }
    let x = input.data();
    let out = weights
        .data()
        .chunks_exact(in_features)
        .zip(bias.data())
        .map(|(row, &b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
        .collect();
    Tensor::new(layer.out_shape.clone(), out)
}

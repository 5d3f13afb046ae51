use serde::{Deserialize, Serialize};

use super::rng::SplitMix64;
use super::{apply_activation, Activation, LayerKind, LayerSpec, Tensor, WorkloadError};

/// Input image shape: three 32x32 colour planes.
pub const LENET_INPUT_SHAPE: [usize; 3] = [3, 32, 32];
/// Weight and bias initialization range.
pub const WEIGHT_RANGE: (f64, f64) = (-0.5, 0.5);

const INPUT_STREAM: u64 = 0x5eed_1a9e_0000_0001;

/// Activation applied to the output of layer `after_layer`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActivationSite {
    pub after_layer: usize,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelGraph {
    pub input_shape: Vec<usize>,
    pub layers: Vec<LayerSpec>,
    pub activation_sites: Vec<ActivationSite>,
}

impl ModelGraph {
    /// Checks that layer shapes chain and that activation sites are ordered
    /// and in range.
    pub fn validate(&self) -> Result<(), WorkloadError> {
        let mut elements: usize = self.input_shape.iter().product();
        let mut shape = self.input_shape.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let chains = match layer.kind {
                LayerKind::FullyConnected => layer.input_elements() == elements,
                _ => layer.in_shape == shape,
            };
            if !chains {
                return Err(WorkloadError::config(format!(
                    "layer {i} expects input {:?} but receives {shape:?}",
                    layer.in_shape
                )));
            }
            shape = layer.out_shape.clone();
            elements = layer.output_elements();
        }
        let mut last = None;
        for site in &self.activation_sites {
            if site.after_layer >= self.layers.len() || last.is_some_and(|l| l >= site.after_layer) {
                return Err(WorkloadError::config(format!(
                    "activation site after layer {} is out of order or range",
                    site.after_layer
                )));
            }
            last = Some(site.after_layer);
        }
        Ok(())
    }

    pub fn activation_after(&self, layer: usize) -> Option<&Activation> {
        self.activation_sites
            .iter()
            .find(|s| s.after_layer == layer)
            .map(|s| &s.activation)
    }

    pub fn output_shape(&self) -> &[usize] {
        self.layers
            .last()
            .map_or(self.input_shape.as_slice(), |l| l.out_shape.as_slice())
    }

    /// Total weights plus biases over all layers.
    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(LayerSpec::parameter_count).sum()
    }

    /// Element count at each activation site, in order.
    pub fn activation_element_counts(&self) -> Vec<usize> {
        self.activation_sites
            .iter()
            .map(|s| self.layers[s.after_layer].output_elements())
            .collect()
    }

    /// Runs layer `index` followed by its activation, if any.
    pub fn forward_layer(&self, index: usize, input: &Tensor) -> Result<Tensor, WorkloadError> {
        let out = self.layers[index].forward(input)?;
        match self.activation_after(index) {
            Some(act) => apply_activation(&out, act),
            None => Ok(out),
        }
    }

    /// Full forward pass.
    pub fn forward(&self, input: &Tensor) -> Result<Tensor, WorkloadError> {
        if input.shape() != self.input_shape.as_slice() {
            return Err(WorkloadError::ShapeMismatch {
                expected: self.input_shape.clone(),
                actual: input.shape().to_vec(),
            });
        }
        let mut x = input.clone();
        for i in 0..self.layers.len() {
            x = self.forward_layer(i, &x)?;
        }
        Ok(x)
    }
}

fn random_tensor(rng: &mut SplitMix64, shape: Vec<usize>) -> Result<Tensor, WorkloadError> {
    let len = shape.iter().product();
    let data = (0..len)
        .map(|_| rng.next_range(WEIGHT_RANGE.0, WEIGHT_RANGE.1))
        .collect();
    Tensor::new(shape, data)
}

/// Builds the untrained LeNet-5 variant used by every scenario:
///
/// ```text
/// conv 3->6 5x5 -> act -> maxpool 2x2 -> conv 6->16 5x5 -> act -> maxpool 2x2
///   -> fc 400->120 -> act -> fc 120->84 -> act -> fc 84->10
/// ```
///
/// Weights and biases are drawn uniformly from [`WEIGHT_RANGE`] by a
/// SplitMix64 stream seeded with `seed`, layer by layer, weights before bias.
pub fn build_lenet(activation: Activation, seed: u64) -> Result<ModelGraph, WorkloadError> {
    let mut rng = SplitMix64::new(seed);
    let conv1 = LayerSpec::conv2d(
        LENET_INPUT_SHAPE,
        random_tensor(&mut rng, vec![6, 3, 5, 5])?,
        random_tensor(&mut rng, vec![6])?,
        1,
    )?;
    let pool1 = LayerSpec::maxpool2d([6, 28, 28], (2, 2), 2)?;
    let conv2 = LayerSpec::conv2d(
        [6, 14, 14],
        random_tensor(&mut rng, vec![16, 6, 5, 5])?,
        random_tensor(&mut rng, vec![16])?,
        1,
    )?;
    let pool2 = LayerSpec::maxpool2d([16, 10, 10], (2, 2), 2)?;
    let fc1 = LayerSpec::fully_connected(
        random_tensor(&mut rng, vec![120, 400])?,
        random_tensor(&mut rng, vec![120])?,
    )?;
    let fc2 = LayerSpec::fully_connected(
        random_tensor(&mut rng, vec![84, 120])?,
        random_tensor(&mut rng, vec![84])?,
    )?;
    let fc3 = LayerSpec::fully_connected(
        random_tensor(&mut rng, vec![10, 84])?,
        random_tensor(&mut rng, vec![10])?,
    )?;

    let activation_sites = [0, 2, 4, 5]
        .into_iter()
        .map(|after_layer| ActivationSite {
            after_layer,
            activation,
        })
        .collect();
    let model = ModelGraph {
        input_shape: LENET_INPUT_SHAPE.to_vec(),
        layers: vec![conv1, pool1, conv2, pool2, fc1, fc2, fc3],
        activation_sites,
    };
    model.validate()?;
    Ok(model)
}

/// Deterministic input image in `[0, 1)` derived from `seed` on a stream
/// separate from the weights.
pub fn lenet_input(seed: u64) -> Tensor {
    let mut rng = SplitMix64::new(seed ^ INPUT_STREAM);
    let len = LENET_INPUT_SHAPE.iter().product();
    let data = (0..len).map(|_| rng.next_unit()).collect();
    Tensor::new(LENET_INPUT_SHAPE.to_vec(), data).expect("fixed input shape")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::ActivationKind;

    fn relu() -> Activation {
        Activation::new(ActivationKind::Relu)
    }

    #[test]
    fn architecture_is_fixed() {
        let m = build_lenet(relu(), 7).unwrap();
        assert_eq!(m.layers.len(), 7);
        let count = |k| m.layers.iter().filter(|l| l.kind == k).count();
        assert_eq!(count(LayerKind::Conv2d), 2);
        assert_eq!(count(LayerKind::MaxPool2d), 2);
        assert_eq!(count(LayerKind::FullyConnected), 3);
        assert_eq!(m.activation_sites.len(), 4);
        assert_eq!(m.activation_element_counts(), vec![4704, 1600, 120, 84]);
        assert_eq!(m.output_shape(), &[10]);
    }

    #[test]
    fn parameter_counts_per_layer() {
        let m = build_lenet(relu(), 1).unwrap();
        let counts: Vec<usize> = m.layers.iter().map(LayerSpec::parameter_count).collect();
        assert_eq!(counts, vec![456, 0, 2416, 0, 48120, 10164, 850]);
        assert_eq!(m.parameter_count(), 62006);
    }

    #[test]
    fn same_seed_same_weights() {
        let a = build_lenet(relu(), 99).unwrap();
        let b = build_lenet(relu(), 99).unwrap();
        for (la, lb) in a.layers.iter().zip(&b.layers) {
            match (&la.weights, &lb.weights) {
                (Some(wa), Some(wb)) => assert!(wa.bit_identical(wb)),
                (None, None) => {}
                _ => panic!("layer parameter presence differs"),
            }
        }
        let c = build_lenet(relu(), 100).unwrap();
        assert_ne!(a.layers[0].weights, c.layers[0].weights);
    }

    #[test]
    fn weights_in_range() {
        let m = build_lenet(relu(), 3).unwrap();
        for l in &m.layers {
            for t in l.weights.iter().chain(l.bias.iter()) {
                assert!(t.data().iter().all(|v| (-0.5..0.5).contains(v)));
            }
        }
    }

    #[test]
    fn forward_rejects_wrong_input() {
        let m = build_lenet(relu(), 1).unwrap();
        assert!(m.forward(&Tensor::zeros(vec![3, 28, 28]).unwrap()).is_err());
        let out = m.forward(&lenet_input(1)).unwrap();
        assert_eq!(out.shape(), &[10]);
        assert!(out.all_finite());
    }
}

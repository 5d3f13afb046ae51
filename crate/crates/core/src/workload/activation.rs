use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Tensor, WorkloadError};

/// Slope applied to non-positive inputs by the leaky rectifier.
pub const LEAKY_RELU_SLOPE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationKind {
    Heaviside,
    Tanh,
    Sigmoid,
    Relu,
    LeakyRelu,
    Elu,
    Softplus,
}

impl ActivationKind {
    pub const ALL: [ActivationKind; 7] = [
        ActivationKind::Heaviside,
        ActivationKind::Tanh,
        ActivationKind::Sigmoid,
        ActivationKind::Relu,
        ActivationKind::LeakyRelu,
        ActivationKind::Elu,
        ActivationKind::Softplus,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::Heaviside => "heaviside",
            ActivationKind::Tanh => "tanh",
            ActivationKind::Sigmoid => "sigmoid",
            ActivationKind::Relu => "relu",
            ActivationKind::LeakyRelu => "leaky_relu",
            ActivationKind::Elu => "elu",
            ActivationKind::Softplus => "softplus",
        }
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActivationKind {
    type Err = WorkloadError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        let kind = match norm.as_str() {
            "heaviside" | "step" => ActivationKind::Heaviside,
            "tanh" => ActivationKind::Tanh,
            "sigmoid" => ActivationKind::Sigmoid,
            "relu" => ActivationKind::Relu,
            "leaky_relu" | "leakyrelu" => ActivationKind::LeakyRelu,
            "elu" => ActivationKind::Elu,
            "softplus" => ActivationKind::Softplus,
            _ => return Err(WorkloadError::UnknownActivation(s.to_string())),
        };
        Ok(kind)
    }
}

/// An activation function together with its parameters.
///
/// Only ELU carries a parameter (`elu_alpha`); it is ignored by every other kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Activation {
    pub kind: ActivationKind,
    pub elu_alpha: f64,
}

impl Activation {
    pub fn new(kind: ActivationKind) -> Self {
        Self {
            kind,
            elu_alpha: 1.0,
        }
    }

    pub fn elu(alpha: f64) -> Result<Self, WorkloadError> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(WorkloadError::EluAlpha(alpha));
        }
        Ok(Self {
            kind: ActivationKind::Elu,
            elu_alpha: alpha,
        })
    }

    pub fn apply(&self, x: f64) -> f64 {
        match self.kind {
            ActivationKind::Heaviside => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ActivationKind::Tanh => x.tanh(),
            ActivationKind::Sigmoid => {
                // split on sign so exp never overflows
                if x >= 0.0 {
                    1.0 / (1.0 + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (1.0 + e)
                }
            }
            ActivationKind::Relu => x.max(0.0),
            ActivationKind::LeakyRelu => {
                if x > 0.0 {
                    x
                } else {
                    LEAKY_RELU_SLOPE * x
                }
            }
            ActivationKind::Elu => {
                if x > 0.0 {
                    x
                } else {
                    self.elu_alpha * x.exp_m1()
                }
            }
            ActivationKind::Softplus => (-x.abs()).exp().ln_1p() + x.max(0.0),
        }
    }
}

impl From<ActivationKind> for Activation {
    fn from(kind: ActivationKind) -> Self {
        Activation::new(kind)
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ActivationKind::Elu if self.elu_alpha != 1.0 => write!(f, "elu(a={})", self.elu_alpha),
            kind => write!(f, "{kind}"),
        }
    }
}

/// Element-wise application; the output keeps the input shape.
pub fn apply_activation(input: &Tensor, activation: &Activation) -> Result<Tensor, WorkloadError> {
    if !input.all_finite() {
        return Err(WorkloadError::NonFinite("activation input"));
    }
    Ok(input.map(|x| activation.apply(x)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn act(kind: ActivationKind) -> Activation {
        Activation::new(kind)
    }

    #[test]
    fn formula_spot_values() {
        assert_eq!(act(ActivationKind::Relu).apply(-3.5), 0.0);
        assert_eq!(act(ActivationKind::Relu).apply(2.25), 2.25);
        assert_eq!(act(ActivationKind::Sigmoid).apply(0.0), 0.5);
        assert_eq!(act(ActivationKind::Tanh).apply(0.0), 0.0);
        assert!((act(ActivationKind::Softplus).apply(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(act(ActivationKind::Heaviside).apply(0.0), 0.0);
        assert_eq!(act(ActivationKind::Heaviside).apply(1e-300), 1.0);
        assert!((act(ActivationKind::LeakyRelu).apply(-2.0) + 0.02).abs() < 1e-15);
        let elu = Activation::elu(1.0).unwrap();
        assert!((elu.apply(-1.0) - (-1.0f64).exp_m1()).abs() < 1e-15);
        assert!((elu.apply(-1.0) + 0.632_120_558_828_557_7).abs() < 1e-12);
    }

    #[test]
    fn extreme_inputs_stay_finite() {
        for kind in ActivationKind::ALL {
            let a = act(kind);
            for x in [-1e308, -800.0, -40.0, 40.0, 800.0, 1e308] {
                assert!(a.apply(x).is_finite(), "{kind} at {x}");
            }
        }
        assert_eq!(act(ActivationKind::Softplus).apply(800.0), 800.0);
        assert_eq!(act(ActivationKind::Sigmoid).apply(-800.0), 0.0);
    }

    #[test]
    fn elu_alpha_must_be_positive() {
        assert!(Activation::elu(0.0).is_err());
        assert!(Activation::elu(-1.0).is_err());
        assert!(Activation::elu(f64::NAN).is_err());
        assert!(Activation::elu(0.5).is_ok());
    }

    #[test]
    fn parse_names() {
        for kind in ActivationKind::ALL {
            assert_eq!(kind.name().parse::<ActivationKind>().unwrap(), kind);
        }
        assert_eq!("Leaky-ReLU".parse::<ActivationKind>().unwrap(), ActivationKind::LeakyRelu);
        assert!("swish".parse::<ActivationKind>().is_err());
    }

    #[test]
    fn rejects_non_finite_tensor() {
        let t = Tensor::new(vec![2], vec![1.0, f64::NAN]).unwrap();
        assert!(apply_activation(&t, &act(ActivationKind::Relu)).is_err());
    }
}

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Sigmoid,
    Relu,
    Identity,
    /// `1` for `a >= 0`, else `0`. Its derivative is zero, so it is not trainable.
    BinaryStep,
}

impl Activation {
    pub const ALL: [Activation; 4] = [
        Activation::Sigmoid,
        Activation::Relu,
        Activation::Identity,
        Activation::BinaryStep,
    ];

    #[inline]
    pub fn eval(self, a: f64) -> f64 {
        match self {
            Activation::Sigmoid => 1.0 / (1.0 + (-a).exp()),
            Activation::Relu => a.max(0.0),
            Activation::Identity => a,
            Activation::BinaryStep => {
                if a >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Derivative at `a`. ReLU uses 0 at the kink.
    #[inline]
    pub fn derivative(self, a: f64) -> f64 {
        match self {
            Activation::Sigmoid => {
                let s = self.eval(a);
                s * (1.0 - s)
            }
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
            Activation::BinaryStep => 0.0,
        }
    }

    pub fn is_differentiable(self) -> bool {
        !matches!(self, Activation::BinaryStep)
    }
}

impl std::fmt::Display for Activation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Activation::Sigmoid => "sigmoid",
            Activation::Relu => "relu",
            Activation::Identity => "identity",
            Activation::BinaryStep => "binary_step",
        };
        f.write_str(s)
    }
}

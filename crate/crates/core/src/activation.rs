//! Element-wise activation functions with derivatives and Taylor data at 0.

use serde::{Deserialize, Serialize};

/// Highest derivative order for which Taylor coefficients are tabulated.
pub const MAX_TAYLOR_ORDER: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum Activation {
    Linear,
    Relu,
    LeakyRelu { slope: f64 },
    Elu { alpha: f64 },
    Tanh,
    Sigmoid,
    /// `1/(1+e^{-z}) - 1/2`, the sigmoid moved so that it vanishes at 0.
    ShiftedSigmoid,
    Softplus,
    /// `Σ coeffs[k] z^k`.
    Polynomial { coeffs: Vec<f64> },
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Activation {
    pub fn name(&self) -> &'static str {
        match self {
            Activation::Linear => "linear",
            Activation::Relu => "relu",
            Activation::LeakyRelu { .. } => "leaky_relu",
            Activation::Elu { .. } => "elu",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
            Activation::ShiftedSigmoid => "shifted_sigmoid",
            Activation::Softplus => "softplus",
            Activation::Polynomial { .. } => "polynomial",
        }
    }

    /// Parses the short names used on the command line. Parametrized kinds
    /// take their defaults (leaky slope 0.01, elu alpha 1).
    pub fn from_name(name: &str) -> Option<Activation> {
        Some(match name {
            "linear" => Activation::Linear,
            "relu" => Activation::Relu,
            "leaky_relu" | "leaky-relu" | "leakyrelu" => Activation::LeakyRelu { slope: 0.01 },
            "elu" => Activation::Elu { alpha: 1.0 },
            "tanh" => Activation::Tanh,
            "sigmoid" => Activation::Sigmoid,
            "shifted_sigmoid" | "shifted-sigmoid" => Activation::ShiftedSigmoid,
            "softplus" => Activation::Softplus,
            "quadratic" => Activation::Polynomial {
                coeffs: vec![0.0, 0.0, 1.0],
            },
            _ => return None,
        })
    }

    pub fn eval(&self, z: f64) -> f64 {
        match self {
            Activation::Linear => z,
            Activation::Relu => z.max(0.0),
            Activation::LeakyRelu { slope } => {
                if z > 0.0 {
                    z
                } else {
                    slope * z
                }
            }
            Activation::Elu { alpha } => {
                if z > 0.0 {
                    z
                } else {
                    alpha * z.exp_m1()
                }
            }
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => sigmoid(z),
            Activation::ShiftedSigmoid => sigmoid(z) - 0.5,
            Activation::Softplus => (-z.abs()).exp().ln_1p() + z.max(0.0),
            Activation::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * z + c),
        }
    }

    /// First derivative. Kinks take the right-hand value at 0 for relu-like
    /// kinds except relu itself, which uses 0 there (the usual subgradient).
    pub fn derivative(&self, z: f64) -> f64 {
        match self {
            Activation::Linear => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu { slope } => {
                if z > 0.0 {
                    1.0
                } else {
                    *slope
                }
            }
            Activation::Elu { alpha } => {
                if z > 0.0 {
                    1.0
                } else {
                    alpha * z.exp()
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Sigmoid | Activation::ShiftedSigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
            Activation::Softplus => sigmoid(z),
            Activation::Polynomial { coeffs } => coeffs
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (k, c)| acc * z + k as f64 * c),
        }
    }

    /// Real analytic on all of ℝ.
    pub fn is_analytic(&self) -> bool {
        !matches!(
            self,
            Activation::Relu | Activation::LeakyRelu { .. } | Activation::Elu { .. }
        )
    }

    /// Degree when the activation is a polynomial (linear counts as degree 1).
    pub fn polynomial_degree(&self) -> Option<usize> {
        match self {
            Activation::Linear => Some(1),
            Activation::Polynomial { coeffs } => {
                Some(coeffs.iter().rposition(|&c| c != 0.0).unwrap_or(0))
            }
            _ => None,
        }
    }

    /// Power-series coefficients `c_k` of the activation at 0 for
    /// `k = 0..=order`, or `None` for kinds that are not analytic at 0.
    pub fn taylor_coefficients(&self, order: usize) -> Option<Vec<f64>> {
        let n = order + 1;
        let mut c = vec![0.0; n];
        match self {
            Activation::Relu | Activation::LeakyRelu { .. } | Activation::Elu { .. } => {
                return None
            }
            Activation::Linear => {
                if n > 1 {
                    c[1] = 1.0;
                }
            }
            Activation::Polynomial { coeffs } => {
                for (k, &a) in coeffs.iter().enumerate().take(n) {
                    c[k] = a;
                }
            }
            Activation::Tanh => {
                // tanh' = 1 - tanh²
                for k in 0..n - 1 {
                    let conv: f64 = (0..=k).map(|i| c[i] * c[k - i]).sum();
                    let rhs = if k == 0 { 1.0 } else { 0.0 } - conv;
                    c[k + 1] = rhs / (k + 1) as f64;
                }
            }
            Activation::Sigmoid | Activation::ShiftedSigmoid | Activation::Softplus => {
                // s' = s - s², s(0) = 1/2
                let mut s = vec![0.0; n + 1];
                s[0] = 0.5;
                for k in 0..n {
                    let conv: f64 = (0..=k).map(|i| s[i] * s[k - i]).sum();
                    s[k + 1] = (s[k] - conv) / (k + 1) as f64;
                }
                match self {
                    Activation::Sigmoid => c.copy_from_slice(&s[..n]),
                    Activation::ShiftedSigmoid => {
                        c.copy_from_slice(&s[..n]);
                        c[0] = 0.0;
                    }
                    _ => {
                        // softplus' = sigmoid
                        c[0] = std::f64::consts::LN_2;
                        for k in 1..n {
                            c[k] = s[k - 1] / k as f64;
                        }
                    }
                }
            }
        }
        Some(c)
    }

    /// `σ^{(k)}(0)`, the k-th derivative at the origin.
    pub fn taylor_at_zero(&self, k: usize) -> Option<f64> {
        let c = self.taylor_coefficients(k)?;
        let factorial: f64 = (1..=k).map(|i| i as f64).product();
        Some(c[k] * factorial)
    }
}

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Output-head activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Softsign,
    Softmax,
    Softplus,
    Tanh,
    Sigmoid,
    Linear,
}

impl Activation {
    pub const ALL: [Activation; 7] = [
        Activation::Relu,
        Activation::Softsign,
        Activation::Softmax,
        Activation::Softplus,
        Activation::Tanh,
        Activation::Sigmoid,
        Activation::Linear,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Softsign => "softsign",
            Activation::Softmax => "softmax",
            Activation::Softplus => "softplus",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
            Activation::Linear => "linear",
        }
    }

    pub fn apply(self, v: &[f64]) -> Vec<f64> {
        match self {
            Activation::Softmax => softmax(v),
            _ => v.iter().map(|&x| self.apply_scalar(x)).collect(),
        }
    }

    fn apply_scalar(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Softsign => x / (1.0 + x.abs()),
            Activation::Softplus => softplus(x),
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
            Activation::Linear => x,
            Activation::Softmax => unreachable!("softmax is vector-valued"),
        }
    }

    /// Vector-Jacobian product: gradient w.r.t. the logits given the
    /// activation input `x`, its output `y` and the upstream gradient `dy`.
    pub fn backward(self, x: &[f64], y: &[f64], dy: &[f64]) -> Vec<f64> {
        match self {
            Activation::Softmax => {
                let s: f64 = dy.iter().zip(y).map(|(d, yi)| d * yi).sum();
                y.iter().zip(dy).map(|(yi, d)| yi * (d - s)).collect()
            }
            _ => x
                .iter()
                .zip(y)
                .zip(dy)
                .map(|((&xi, &yi), &d)| d * self.derivative(xi, yi))
                .collect(),
        }
    }

    /// Logits mapping onto `y`, when `y` lies in the activation's range.
    /// Softmax logits are defined up to a constant; the zero-sum choice is returned.
    pub fn preimage(self, y: &[f64]) -> Option<Vec<f64>> {
        if self == Activation::Softmax {
            let sum: f64 = y.iter().sum();
            if y.iter().any(|&v| !(v > 0.0)) || (sum - 1.0).abs() > 1e-9 {
                return None;
            }
            let logs: Vec<f64> = y.iter().map(|v| v.ln()).collect();
            let mean = logs.iter().sum::<f64>() / logs.len() as f64;
            return Some(logs.into_iter().map(|l| l - mean).collect());
        }
        y.iter()
            .map(|&v| {
                let x = match self {
                    Activation::Relu if v > 0.0 => v,
                    Activation::Softsign if v.abs() < 1.0 => v / (1.0 - v.abs()),
                    Activation::Softplus if v > 0.0 => v.exp_m1().ln(),
                    Activation::Tanh if v.abs() < 1.0 => v.atanh(),
                    Activation::Sigmoid if v > 0.0 && v < 1.0 => (v / (1.0 - v)).ln(),
                    Activation::Linear => v,
                    _ => return None,
                };
                x.is_finite().then_some(x)
            })
            .collect()
    }

    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Softsign => {
                let d = 1.0 + x.abs();
                1.0 / (d * d)
            }
            Activation::Softplus => sigmoid(x),
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Linear => 1.0,
            Activation::Softmax => unreachable!("softmax is vector-valued"),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Activation::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown activation `{s}`")))
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn softmax(v: &[f64]) -> Vec<f64> {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

#[cfg(test)]
mod tests {
    #[test]
    fn preimage_inverts_apply() {
        for act in Activation::ALL {
            let y = if act == Activation::Softmax { vec![0.3, 0.7] } else { vec![0.25, 0.6] };
            let x = act.preimage(&y).expect("in range");
            for (a, b) in act.apply(&x).iter().zip(&y) {
                assert!((a - b).abs() < 1e-12, "{act}");
            }
        }
        assert!(Activation::Relu.preimage(&[-0.1]).is_none());
        assert!(Activation::Softmax.preimage(&[0.5, 0.6]).is_none());
    }

    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(Activation::Relu.apply(&[-2.0, 3.0]), vec![0.0, 3.0]);
        assert_eq!(Activation::Softsign.apply(&[1.0]), vec![0.5]);
        assert_eq!(Activation::Softmax.apply(&[0.0, 0.0]), vec![0.5, 0.5]);
        assert!((Activation::Softplus.apply(&[0.0])[0] - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn no_overflow() {
        assert_eq!(Activation::Softplus.apply(&[1000.0]), vec![1000.0]);
        assert_eq!(Activation::Softplus.apply(&[-1000.0]), vec![0.0]);
        let s = Activation::Softmax.apply(&[1000.0, 0.0]);
        assert!(s.iter().all(|v| v.is_finite()));
        assert_eq!(sigmoid(-1000.0), 0.0);
    }

    #[test]
    fn parse_names() {
        for a in Activation::ALL {
            assert_eq!(a.name().parse::<Activation>().unwrap(), a);
        }
        assert!("gelu".parse::<Activation>().is_err());
    }

    #[test]
    fn elementwise_derivatives_match_finite_differences() {
        let eps = 1e-6;
        for a in Activation::ALL {
            let x = [0.37, -1.2, 2.1];
            let y = a.apply(&x);
            for k in 0..3 {
                let mut dy = [0.0; 3];
                dy[k] = 1.0;
                let g = a.backward(&x, &y, &dy);
                for j in 0..3 {
                    let mut xp = x;
                    let mut xm = x;
                    xp[j] += eps;
                    xm[j] -= eps;
                    let fd = (a.apply(&xp)[k] - a.apply(&xm)[k]) / (2.0 * eps);
                    assert!((fd - g[j]).abs() < 1e-7, "{a} d{k}/d{j}: {fd} vs {}", g[j]);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn softmax_sums_to_one_and_is_shift_invariant(
            v in proptest::collection::vec(-50.0f64..50.0, 1..8),
            shift in -100.0f64..100.0,
        ) {
            let s = Activation::Softmax.apply(&v);
            prop_assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let shifted: Vec<f64> = v.iter().map(|x| x + shift).collect();
            let s2 = Activation::Softmax.apply(&shifted);
            for (a, b) in s.iter().zip(&s2) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}

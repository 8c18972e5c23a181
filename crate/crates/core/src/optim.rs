//! SGD, Adam and Nadam parameter updates.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rnn::RnnParameters;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
    Nadam,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 3] = [OptimizerKind::Sgd, OptimizerKind::Adam, OptimizerKind::Nadam];

    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
            OptimizerKind::Nadam => "nadam",
        }
    }

    pub fn default_learning_rate(self) -> f64 {
        match self {
            OptimizerKind::Sgd => 0.01,
            OptimizerKind::Adam | OptimizerKind::Nadam => 0.001,
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        OptimizerKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown optimizer `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSpec {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl OptimizerSpec {
    pub fn new(kind: OptimizerKind) -> Self {
        OptimizerSpec {
            kind,
            learning_rate: kind.default_learning_rate(),
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            v.push(format!("optimizer.learning_rate must be > 0 (got {})", self.learning_rate));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                v.push(format!("optimizer.{name} must lie in [0, 1) (got {b})"));
            }
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            v.push(format!("optimizer.epsilon must be > 0 (got {})", self.epsilon));
        }
        v
    }
}

impl Default for OptimizerSpec {
    fn default() -> Self {
        OptimizerSpec::new(OptimizerKind::Adam)
    }
}

/// Moment accumulators mirroring the parameter layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub first_moment: Vec<Vec<f64>>,
    pub second_moment: Vec<Vec<f64>>,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(params: &RnnParameters) -> Self {
        let zeros: Vec<Vec<f64>> = params.slices().iter().map(|s| vec![0.0; s.len()]).collect();
        OptimizerState {
            first_moment: zeros.clone(),
            second_moment: zeros,
            step: 0,
        }
    }
}

/// Applies one update in place and advances the step counter.
pub fn step(spec: &OptimizerSpec, state: &mut OptimizerState, params: &mut RnnParameters, grads: &RnnParameters) -> Result<()> {
    let grads = grads.slices();
    let shapes_ok = grads.len() == state.first_moment.len()
        && params
            .slices()
            .iter()
            .zip(&grads)
            .zip(&state.first_moment)
            .all(|((p, g), m)| p.len() == g.len() && p.len() == m.len());
    if !shapes_ok {
        return Err(Error::Config("optimizer state, parameters and gradients differ in shape".into()));
    }
    state.step += 1;
    let lr = spec.learning_rate;
    let t = state.step as i32;
    let (b1, b2, eps) = (spec.beta1, spec.beta2, spec.epsilon);
    let bc1 = 1.0 - b1.powi(t);
    let bc2 = 1.0 - b2.powi(t);

    for (((p, g), m), v) in params
        .slices_mut()
        .into_iter()
        .zip(grads)
        .zip(state.first_moment.iter_mut())
        .zip(state.second_moment.iter_mut())
    {
        match spec.kind {
            OptimizerKind::Sgd => {
                for (pi, gi) in p.iter_mut().zip(g) {
                    *pi -= lr * gi;
                }
            }
            OptimizerKind::Adam => {
                for i in 0..p.len() {
                    m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                    v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                    let m_hat = m[i] / bc1;
                    let v_hat = v[i] / bc2;
                    p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
                }
            }
            OptimizerKind::Nadam => {
                for i in 0..p.len() {
                    m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                    v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                    let m_hat = m[i] / bc1;
                    let v_hat = v[i] / bc2;
                    let nesterov = b1 * m_hat + (1.0 - b1) * g[i] / bc1;
                    p[i] -= lr * nesterov / (v_hat.sqrt() + eps);
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rnn::{Activation, CellKind, RnnSpec};

    fn tiny() -> RnnParameters {
        RnnParameters::zeros(&RnnSpec::new(CellKind::Gru, 1, 1, Activation::Linear))
    }

    fn fill(p: &mut RnnParameters, v: f64) {
        for s in p.slices_mut() {
            s.fill(v);
        }
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        for kind in OptimizerKind::ALL {
            let mut p = RnnParameters::init(&RnnSpec::new(CellKind::Lstm, 2, 3, Activation::Relu), 3).unwrap();
            let before = p.clone();
            let g = p.zeros_like();
            let mut st = OptimizerState::new(&p);
            step(&OptimizerSpec::new(kind), &mut st, &mut p, &g).unwrap();
            assert_eq!(p, before, "{kind}");
        }
    }

    #[test]
    fn sgd_example() {
        let mut p = tiny();
        fill(&mut p, 1.0);
        let mut g = tiny();
        fill(&mut g, 0.5);
        let mut st = OptimizerState::new(&p);
        step(&OptimizerSpec::new(OptimizerKind::Sgd), &mut st, &mut p, &g).unwrap();
        assert!(p.slices().iter().all(|s| s.iter().all(|&v| (v - 0.995).abs() < 1e-15)));
    }

    #[test]
    fn shape_mismatch() {
        let mut p = tiny();
        let g = RnnParameters::zeros(&RnnSpec::new(CellKind::Gru, 2, 1, Activation::Linear));
        let mut st = OptimizerState::new(&p);
        assert!(step(&OptimizerSpec::default(), &mut st, &mut p, &g).is_err());
    }

    #[test]
    fn adam_is_scale_invariant_on_first_step() {
        let spec = OptimizerSpec::new(OptimizerKind::Adam);
        let run = |gv: f64| {
            let mut p = tiny();
            let mut g = tiny();
            fill(&mut g, gv);
            let mut st = OptimizerState::new(&p);
            step(&spec, &mut st, &mut p, &g).unwrap();
            p.slices()[0][0]
        };
        let (a, b) = (run(0.3), run(300.0));
        assert!((a - b).abs() < 10.0 * spec.epsilon * spec.learning_rate);
    }

    #[test]
    fn deterministic() {
        let run = || {
            let mut p = RnnParameters::init(&RnnSpec::new(CellKind::Gru, 2, 2, Activation::Linear), 5).unwrap();
            let mut g = p.clone();
            g.scale(0.3);
            let mut st = OptimizerState::new(&p);
            for _ in 0..5 {
                step(&OptimizerSpec::new(OptimizerKind::Nadam), &mut st, &mut p, &g).unwrap();
            }
            (p, st)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn quadratic_convergence() {
        for kind in OptimizerKind::ALL {
            let spec = OptimizerSpec::new(kind);
            let mut p = tiny();
            let mut st = OptimizerState::new(&p);
            for _ in 0..10_000 {
                let mut g = p.clone();
                for s in g.slices_mut() {
                    s.iter_mut().for_each(|v| *v = 2.0 * (*v - 3.0));
                }
                step(&spec, &mut st, &mut p, &g).unwrap();
            }
            for s in p.slices() {
                for &v in s {
                    assert!((v - 3.0).abs() < 1e-3, "{kind}: {v}");
                }
            }
        }
    }
}

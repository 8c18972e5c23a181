//! Single-layer LSTM/GRU regressors with a dense output head, trained by
//! exact backpropagation through time.

mod activation;
mod cell;
mod matrix;
mod network;

pub use activation::Activation;
pub use cell::{gru_step, lstm_step, GruStep, LstmStep};
pub use matrix::Matrix;
pub use network::{backward, backward_into, forward, mse_loss, Checkpoint, ForwardCache, RnnParameters};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    Lstm,
    Gru,
}

impl CellKind {
    /// Gate blocks stacked in the weight matrices.
    pub fn gates(self) -> usize {
        match self {
            CellKind::Lstm => 4,
            CellKind::Gru => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CellKind::Lstm => "LSTM",
            CellKind::Gru => "GRU",
        }
    }
}

impl fmt::Display for CellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CellKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lstm" => Ok(CellKind::Lstm),
            "gru" => Ok(CellKind::Gru),
            _ => Err(Error::Config(format!("unknown cell type `{s}`"))),
        }
    }
}

/// Network architecture. Gate nonlinearities are fixed (sigmoid gates, tanh
/// candidates); only the output head activation is configurable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RnnSpec {
    pub cell: CellKind,
    pub input_dim: usize,
    pub hidden_units: usize,
    pub output_dim: usize,
    pub activation: Activation,
}

impl RnnSpec {
    pub fn new(cell: CellKind, input_dim: usize, hidden_units: usize, activation: Activation) -> Self {
        RnnSpec {
            cell,
            input_dim,
            hidden_units,
            output_dim: 2,
            activation,
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        for (name, n) in [
            ("input_dim", self.input_dim),
            ("hidden_units", self.hidden_units),
            ("output_dim", self.output_dim),
        ] {
            if n == 0 {
                v.push(format!("rnn.{name} must be positive"));
            }
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v))
        }
    }
}

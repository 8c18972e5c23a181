use super::activation::sigmoid;
use super::network::RnnParameters;
use super::CellKind;
use crate::error::{Error, Result};

/// Intermediate values of one LSTM step, kept for backpropagation.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmStep {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
    pub forget: Vec<f64>,
    pub input: Vec<f64>,
    pub candidate: Vec<f64>,
    pub output: Vec<f64>,
    pub tanh_c: Vec<f64>,
}

/// Intermediate values of one GRU step.
#[derive(Debug, Clone, PartialEq)]
pub struct GruStep {
    pub h: Vec<f64>,
    pub update: Vec<f64>,
    pub reset: Vec<f64>,
    pub candidate: Vec<f64>,
    /// `reset ∘ h_prev`, the recurrent input of the candidate.
    pub reset_hidden: Vec<f64>,
}

fn check_dims(params: &RnnParameters, cell: CellKind, x: &[f64], h_prev: &[f64]) -> Result<()> {
    if params.cell() != cell {
        return Err(Error::Config(format!("{} parameters used for a {cell} step", params.cell())));
    }
    if x.len() != params.input_dim() || h_prev.len() != params.hidden_units() {
        return Err(Error::Config(format!(
            "step expects input {} and hidden {}, got {} and {}",
            params.input_dim(),
            params.hidden_units(),
            x.len(),
            h_prev.len()
        )));
    }
    Ok(())
}

/// `f,i,o = σ(W x + U h + b)`, `g = tanh(…)`, `c = f∘c_prev + i∘g`, `h = o∘tanh(c)`.
pub fn lstm_step(params: &RnnParameters, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> Result<LstmStep> {
    check_dims(params, CellKind::Lstm, x, h_prev)?;
    if c_prev.len() != params.hidden_units() {
        return Err(Error::Config(format!(
            "cell state has length {}, expected {}",
            c_prev.len(),
            params.hidden_units()
        )));
    }
    Ok(lstm_step_unchecked(params, x, h_prev, c_prev))
}

pub(crate) fn lstm_step_unchecked(params: &RnnParameters, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> LstmStep {
    let n = params.hidden_units();
    let mut z = params.bias.clone();
    params.w_input.mul_vec_rows_acc(0, x, &mut z);
    params.w_recurrent.mul_vec_rows_acc(0, h_prev, &mut z);

    let forget: Vec<f64> = z[..n].iter().map(|&v| sigmoid(v)).collect();
    let input: Vec<f64> = z[n..2 * n].iter().map(|&v| sigmoid(v)).collect();
    let candidate: Vec<f64> = z[2 * n..3 * n].iter().map(|v| v.tanh()).collect();
    let output: Vec<f64> = z[3 * n..].iter().map(|&v| sigmoid(v)).collect();
    let c: Vec<f64> = (0..n).map(|k| forget[k] * c_prev[k] + input[k] * candidate[k]).collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h = output.iter().zip(&tanh_c).map(|(o, t)| o * t).collect();
    LstmStep {
        h,
        c,
        forget,
        input,
        candidate,
        output,
        tanh_c,
    }
}

/// `z,r = σ(W x + U h + b)`, `h̃ = tanh(W_h x + U_h (r∘h_prev) + b_h)`,
/// `h = (1 − z)∘h_prev + z∘h̃`.
pub fn gru_step(params: &RnnParameters, x: &[f64], h_prev: &[f64]) -> Result<GruStep> {
    check_dims(params, CellKind::Gru, x, h_prev)?;
    Ok(gru_step_unchecked(params, x, h_prev))
}

pub(crate) fn gru_step_unchecked(params: &RnnParameters, x: &[f64], h_prev: &[f64]) -> GruStep {
    let n = params.hidden_units();
    let mut z = params.bias.clone();
    params.w_input.mul_vec_rows_acc(0, x, &mut z);
    params.w_recurrent.mul_vec_rows_acc(0, h_prev, &mut z[..2 * n]);

    let update: Vec<f64> = z[..n].iter().map(|&v| sigmoid(v)).collect();
    let reset: Vec<f64> = z[n..2 * n].iter().map(|&v| sigmoid(v)).collect();
    let reset_hidden: Vec<f64> = reset.iter().zip(h_prev).map(|(r, h)| r * h).collect();
    params.w_recurrent.mul_vec_rows_acc(2 * n, &reset_hidden, &mut z[2 * n..]);
    let candidate: Vec<f64> = z[2 * n..].iter().map(|v| v.tanh()).collect();
    let h = (0..n)
        .map(|k| (1.0 - update[k]) * h_prev[k] + update[k] * candidate[k])
        .collect();
    GruStep {
        h,
        update,
        reset,
        candidate,
        reset_hidden,
    }
}

use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cell::{gru_step_unchecked, lstm_step_unchecked, GruStep, LstmStep};
use super::matrix::Matrix;
use super::{CellKind, RnnSpec};
use crate::error::{Error, Result};
use crate::io;

static NEXT_REVISION: AtomicU64 = AtomicU64::new(1);

fn fresh_revision() -> u64 {
    NEXT_REVISION.fetch_add(1, Ordering::Relaxed)
}

/// Weights of one recurrent layer plus the dense head.
///
/// Gate blocks are stacked row-wise: LSTM `[forget, input, candidate, output]`,
/// GRU `[update, reset, candidate]`. The GRU candidate block of
/// `w_recurrent` multiplies `reset ∘ h_prev`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RnnParameters {
    cell: CellKind,
    pub w_input: Matrix,
    pub w_recurrent: Matrix,
    pub bias: Vec<f64>,
    pub head_weights: Matrix,
    pub head_bias: Vec<f64>,
    /// Identifies the weight values a forward cache was computed with.
    #[serde(skip, default = "fresh_revision")]
    revision: u64,
}

impl PartialEq for RnnParameters {
    fn eq(&self, other: &Self) -> bool {
        self.cell == other.cell
            && self.w_input == other.w_input
            && self.w_recurrent == other.w_recurrent
            && self.bias == other.bias
            && self.head_weights == other.head_weights
            && self.head_bias == other.head_bias
    }
}

impl RnnParameters {
    pub fn zeros(spec: &RnnSpec) -> Self {
        let rows = spec.cell.gates() * spec.hidden_units;
        RnnParameters {
            cell: spec.cell,
            w_input: Matrix::zeros(rows, spec.input_dim),
            w_recurrent: Matrix::zeros(rows, spec.hidden_units),
            bias: vec![0.0; rows],
            head_weights: Matrix::zeros(spec.output_dim, spec.hidden_units),
            head_bias: vec![0.0; spec.output_dim],
            revision: fresh_revision(),
        }
    }

    /// Every entry uniform in `±1/√hidden_units`.
    pub fn init(spec: &RnnSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut p = Self::zeros(spec);
        let bound = 1.0 / (spec.hidden_units as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for s in p.slices_mut() {
            for v in s.iter_mut() {
                *v = rng.gen_range(-bound..=bound);
            }
        }
        Ok(p)
    }

    /// Zeroed copy with identical shapes.
    pub fn zeros_like(&self) -> Self {
        let mut p = self.clone();
        for s in p.slices_mut() {
            s.fill(0.0);
        }
        p
    }

    pub fn cell(&self) -> CellKind {
        self.cell
    }

    pub fn input_dim(&self) -> usize {
        self.w_input.cols()
    }

    pub fn hidden_units(&self) -> usize {
        self.w_recurrent.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.head_weights.rows()
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn parameter_count(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    /// Flat views in a fixed order: input weights, recurrent weights, bias,
    /// head weights, head bias.
    pub fn slices(&self) -> [&[f64]; 5] {
        [
            self.w_input.as_slice(),
            self.w_recurrent.as_slice(),
            &self.bias,
            self.head_weights.as_slice(),
            &self.head_bias,
        ]
    }

    /// Mutable flat views. Any mutation invalidates outstanding forward caches.
    pub fn slices_mut(&mut self) -> [&mut [f64]; 5] {
        self.revision = fresh_revision();
        [
            self.w_input.as_mut_slice(),
            self.w_recurrent.as_mut_slice(),
            &mut self.bias,
            self.head_weights.as_mut_slice(),
            &mut self.head_bias,
        ]
    }

    /// Gate block `g` of the input weights, as `(hidden × input)` row-major.
    pub fn gate_input_weights(&self, g: usize) -> &[f64] {
        let n = self.hidden_units() * self.input_dim();
        &self.w_input.as_slice()[g * n..(g + 1) * n]
    }

    pub fn gate_recurrent_weights(&self, g: usize) -> &[f64] {
        let n = self.hidden_units() * self.hidden_units();
        &self.w_recurrent.as_slice()[g * n..(g + 1) * n]
    }

    pub fn gate_bias(&self, g: usize) -> &[f64] {
        let n = self.hidden_units();
        &self.bias[g * n..(g + 1) * n]
    }

    pub fn matches(&self, spec: &RnnSpec) -> bool {
        self.cell == spec.cell
            && self.input_dim() == spec.input_dim
            && self.hidden_units() == spec.hidden_units
            && self.output_dim() == spec.output_dim
    }

    pub(crate) fn same_shape(&self, other: &Self) -> bool {
        self.cell == other.cell
            && self
                .slices()
                .iter()
                .zip(other.slices())
                .all(|(a, b)| a.len() == b.len())
    }

    pub(crate) fn scale(&mut self, k: f64) {
        for s in self.slices_mut() {
            s.iter_mut().for_each(|v| *v *= k);
        }
    }
}

#[derive(Debug, Clone)]
enum StepCache {
    Lstm(LstmStep),
    Gru(GruStep),
}

impl StepCache {
    fn h(&self) -> &[f64] {
        match self {
            StepCache::Lstm(s) => &s.h,
            StepCache::Gru(s) => &s.h,
        }
    }
}

/// Intermediates of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    spec: RnnSpec,
    revision: u64,
    inputs: Vec<Vec<f64>>,
    steps: Vec<StepCache>,
    logits: Vec<f64>,
    prediction: Vec<f64>,
}

impl ForwardCache {
    pub fn prediction(&self) -> &[f64] {
        &self.prediction
    }

    pub fn final_hidden(&self) -> &[f64] {
        self.steps.last().map(StepCache::h).unwrap_or(&[])
    }
}

/// Unrolls the cell over `sequence` from zero state and applies the head.
pub fn forward(spec: &RnnSpec, params: &RnnParameters, sequence: &[Vec<f64>]) -> Result<(Vec<f64>, ForwardCache)> {
    if sequence.is_empty() {
        return Err(Error::Domain("forward needs a non-empty sequence".into()));
    }
    if !params.matches(spec) {
        return Err(Error::Config(format!(
            "parameters ({} {}→{}→{}) do not match spec {spec:?}",
            params.cell(),
            params.input_dim(),
            params.hidden_units(),
            params.output_dim()
        )));
    }
    if let Some(bad) = sequence.iter().find(|x| x.len() != spec.input_dim) {
        return Err(Error::Config(format!(
            "sequence element has {} features, expected {}",
            bad.len(),
            spec.input_dim
        )));
    }
    let n = spec.hidden_units;
    let mut steps = Vec::with_capacity(sequence.len());
    let zeros = vec![0.0; n];
    for x in sequence {
        let step = match (spec.cell, steps.last()) {
            (CellKind::Lstm, prev) => {
                let (h, c) = match prev {
                    Some(StepCache::Lstm(s)) => (&s.h[..], &s.c[..]),
                    _ => (&zeros[..], &zeros[..]),
                };
                StepCache::Lstm(lstm_step_unchecked(params, x, h, c))
            }
            (CellKind::Gru, prev) => {
                let h = prev.map(StepCache::h).unwrap_or(&zeros);
                StepCache::Gru(gru_step_unchecked(params, x, h))
            }
        };
        steps.push(step);
    }
    let mut logits = params.head_bias.clone();
    params
        .head_weights
        .mul_vec_rows_acc(0, steps.last().expect("non-empty").h(), &mut logits);
    let prediction = spec.activation.apply(&logits);
    let cache = ForwardCache {
        spec: *spec,
        revision: params.revision(),
        inputs: sequence.to_vec(),
        steps,
        logits,
        prediction: prediction.clone(),
    };
    Ok((prediction, cache))
}

/// Squared error summed over coordinates and its gradient `2 (pred − target)`.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    if pred.len() != target.len() {
        return Err(Error::Domain(format!(
            "prediction has {} entries, target {}",
            pred.len(),
            target.len()
        )));
    }
    let diff: Vec<f64> = pred.iter().zip(target).map(|(p, t)| p - t).collect();
    let loss = diff.iter().map(|d| d * d).sum();
    Ok((loss, diff.into_iter().map(|d| 2.0 * d).collect()))
}

/// Gradients of a scalar loss w.r.t. every parameter, given `dL/dprediction`.
pub fn backward(spec: &RnnSpec, params: &RnnParameters, cache: &ForwardCache, loss_gradient: &[f64]) -> Result<RnnParameters> {
    let mut grads = params.zeros_like();
    backward_into(spec, params, cache, loss_gradient, &mut grads)?;
    Ok(grads)
}

/// Like [`backward`] but accumulates into `grads`.
pub fn backward_into(
    spec: &RnnSpec,
    params: &RnnParameters,
    cache: &ForwardCache,
    loss_gradient: &[f64],
    grads: &mut RnnParameters,
) -> Result<()> {
    if cache.spec != *spec || cache.revision != params.revision() || !params.matches(spec) {
        return Err(Error::Domain(
            "forward cache was produced by different parameters or spec".into(),
        ));
    }
    if loss_gradient.len() != spec.output_dim {
        return Err(Error::Domain(format!(
            "loss gradient has {} entries, expected {}",
            loss_gradient.len(),
            spec.output_dim
        )));
    }
    if !grads.same_shape(params) {
        return Err(Error::Config("gradient buffer shape differs from parameters".into()));
    }
    // Keep the revision stable: accumulating into grads must not look like a new parameter set.
    let grads_revision = grads.revision;

    let n = spec.hidden_units;
    let dlogits = spec.activation.backward(&cache.logits, &cache.prediction, loss_gradient);
    let h_last = cache.final_hidden();
    grads.head_weights.add_outer_rows(0, &dlogits, h_last);
    for (b, d) in grads.head_bias.iter_mut().zip(&dlogits) {
        *b += d;
    }
    let mut dh = vec![0.0; n];
    params.head_weights.mul_vec_transposed_rows_acc(0, &dlogits, &mut dh);

    let zeros = vec![0.0; n];
    match spec.cell {
        CellKind::Lstm => {
            let mut dc_next = vec![0.0; n];
            let mut dz = vec![0.0; 4 * n];
            for t in (0..cache.steps.len()).rev() {
                let StepCache::Lstm(s) = &cache.steps[t] else {
                    unreachable!("cell kind checked above")
                };
                let (h_prev, c_prev) = match t.checked_sub(1).map(|i| &cache.steps[i]) {
                    Some(StepCache::Lstm(p)) => (&p.h[..], &p.c[..]),
                    _ => (&zeros[..], &zeros[..]),
                };
                for k in 0..n {
                    let dc = dc_next[k] + dh[k] * s.output[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]);
                    let (f, i, g, o) = (s.forget[k], s.input[k], s.candidate[k], s.output[k]);
                    dz[k] = dc * c_prev[k] * f * (1.0 - f);
                    dz[n + k] = dc * g * i * (1.0 - i);
                    dz[2 * n + k] = dc * i * (1.0 - g * g);
                    dz[3 * n + k] = dh[k] * s.tanh_c[k] * o * (1.0 - o);
                    dc_next[k] = dc * f;
                }
                grads.w_input.add_outer_rows(0, &dz, &cache.inputs[t]);
                grads.w_recurrent.add_outer_rows(0, &dz, h_prev);
                super::matrix::axpy(1.0, &dz, &mut grads.bias);
                dh.fill(0.0);
                params.w_recurrent.mul_vec_transposed_rows_acc(0, &dz, &mut dh);
            }
        }
        CellKind::Gru => {
            let mut dz = vec![0.0; 3 * n];
            let mut dh_prev = vec![0.0; n];
            let mut d_reset_hidden = vec![0.0; n];
            for t in (0..cache.steps.len()).rev() {
                let StepCache::Gru(s) = &cache.steps[t] else {
                    unreachable!("cell kind checked above")
                };
                let h_prev = t.checked_sub(1).map(|i| cache.steps[i].h()).unwrap_or(&zeros);
                for k in 0..n {
                    let (u, c) = (s.update[k], s.candidate[k]);
                    dz[k] = dh[k] * (c - h_prev[k]) * u * (1.0 - u);
                    dz[2 * n + k] = dh[k] * u * (1.0 - c * c);
                    dh_prev[k] = dh[k] * (1.0 - u);
                }
                d_reset_hidden.fill(0.0);
                params
                    .w_recurrent
                    .mul_vec_transposed_rows_acc(2 * n, &dz[2 * n..], &mut d_reset_hidden);
                for k in 0..n {
                    let r = s.reset[k];
                    dz[n + k] = d_reset_hidden[k] * h_prev[k] * r * (1.0 - r);
                    dh_prev[k] += d_reset_hidden[k] * r;
                }
                grads.w_input.add_outer_rows(0, &dz, &cache.inputs[t]);
                grads.w_recurrent.add_outer_rows(0, &dz[..2 * n], h_prev);
                grads.w_recurrent.add_outer_rows(2 * n, &dz[2 * n..], &s.reset_hidden);
                super::matrix::axpy(1.0, &dz, &mut grads.bias);
                params.w_recurrent.mul_vec_transposed_rows_acc(0, &dz[..2 * n], &mut dh_prev);
                std::mem::swap(&mut dh, &mut dh_prev);
            }
        }
    }
    grads.revision = grads_revision;
    Ok(())
}

/// Version-tagged JSON document holding a spec and its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub spec: RnnSpec,
    pub parameters: RnnParameters,
    /// Optional affine map between room meters and network coordinates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalizer: Option<crate::dataset::Normalizer>,
}

impl Checkpoint {
    pub const FORMAT: &'static str = "rdw-rnn-checkpoint";
    pub const VERSION: u32 = 1;

    pub fn new(spec: RnnSpec, parameters: RnnParameters) -> Self {
        Checkpoint {
            format: Self::FORMAT.to_string(),
            version: Self::VERSION,
            spec,
            parameters,
            normalizer: None,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let c: Checkpoint = io::read_json(path)?;
        c.check()?;
        Ok(c)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Checkpoint = serde_json::from_str(s)?;
        c.check()?;
        Ok(c)
    }

    fn check(&self) -> Result<()> {
        if self.format != Self::FORMAT || self.version != Self::VERSION {
            return Err(Error::Serde(format!(
                "unsupported checkpoint {} v{}",
                self.format, self.version
            )));
        }
        let p = &self.parameters;
        let g = p.cell.gates();
        let consistent = p.matches(&self.spec)
            && p.w_input.rows() == g * p.hidden_units()
            && p.w_recurrent.rows() == g * p.hidden_units()
            && p.bias.len() == g * p.hidden_units()
            && p.head_bias.len() == p.output_dim()
            && p.slices().iter().all(|s| s.iter().all(|v| v.is_finite()));
        if !consistent {
            return Err(Error::Serde("checkpoint parameters do not match its spec".into()));
        }
        Ok(())
    }
}

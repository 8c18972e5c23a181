//! Mini-batch training, evaluation, the named approach configurations and
//! one-axis-at-a-time hyperparameter sweeps.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureVariant, Normalizer, SampleWindow};
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::motion::mix_seed;
use crate::optim::{self, OptimizerKind, OptimizerSpec, OptimizerState};
use crate::rnn::{self, Activation, CellKind, Checkpoint, RnnParameters, RnnSpec};
use crate::stats::Summary;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainSpec {
    pub rnn: RnnSpec,
    pub optimizer: OptimizerSpec,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub variant: FeatureVariant,
}

impl TrainSpec {
    pub fn violations(&self) -> Vec<String> {
        let mut v = self.rnn.violations();
        v.extend(self.optimizer.violations());
        if self.batch_size == 0 {
            v.push("batch_size must be positive".into());
        }
        if self.epochs == 0 {
            v.push("epochs must be positive".into());
        }
        if self.rnn.input_dim != self.variant.input_dim() {
            v.push(format!(
                "{} features need input_dim {}, spec has {}",
                self.variant,
                self.variant.input_dim(),
                self.rnn.input_dim
            ));
        }
        v
    }
}

/// Hyperparameter values of one column of the tuning table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub activation: Activation,
    pub optimizer: OptimizerKind,
    pub neurons: usize,
    pub batch_size: usize,
    pub epochs: usize,
}

impl Hyperparameters {
    /// Starting point of every sweep.
    pub const INITIAL: Hyperparameters = Hyperparameters {
        activation: Activation::Softplus,
        optimizer: OptimizerKind::Sgd,
        neurons: 20,
        batch_size: 20,
        epochs: 10,
    };

    pub fn train_spec(&self, cell: CellKind, variant: FeatureVariant, seed: u64) -> TrainSpec {
        TrainSpec {
            rnn: RnnSpec::new(cell, variant.input_dim(), self.neurons, self.activation),
            optimizer: OptimizerSpec::new(self.optimizer),
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed,
            variant,
        }
    }
}

/// The tuned predictor configurations and the two intermediary ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NamedApproach {
    LstmB,
    LstmI1,
    LstmI2,
    LstmV,
    GruB,
    GruI1,
    GruI2,
    GruV,
    LstmInitial,
    GruInitial,
}

impl NamedApproach {
    pub const ALL: [NamedApproach; 10] = [
        NamedApproach::LstmB,
        NamedApproach::LstmI1,
        NamedApproach::LstmI2,
        NamedApproach::LstmV,
        NamedApproach::GruB,
        NamedApproach::GruI1,
        NamedApproach::GruI2,
        NamedApproach::GruV,
        NamedApproach::LstmInitial,
        NamedApproach::GruInitial,
    ];

    pub fn label(self) -> &'static str {
        match self {
            NamedApproach::LstmB => "LSTM-B",
            NamedApproach::LstmI1 => "LSTM-I1",
            NamedApproach::LstmI2 => "LSTM-I2",
            NamedApproach::LstmV => "LSTM-V",
            NamedApproach::GruB => "GRU-B",
            NamedApproach::GruI1 => "GRU-I1",
            NamedApproach::GruI2 => "GRU-I2",
            NamedApproach::GruV => "GRU-V",
            NamedApproach::LstmInitial => "LSTM-Initial",
            NamedApproach::GruInitial => "GRU-Initial",
        }
    }

    pub fn cell(self) -> CellKind {
        use NamedApproach::*;
        match self {
            LstmB | LstmI1 | LstmI2 | LstmV | LstmInitial => CellKind::Lstm,
            GruB | GruI1 | GruI2 | GruV | GruInitial => CellKind::Gru,
        }
    }

    pub fn variant(self) -> FeatureVariant {
        use NamedApproach::*;
        match self {
            LstmB | GruB | LstmInitial | GruInitial => FeatureVariant::Baseline,
            _ => FeatureVariant::Virtual,
        }
    }

    pub fn hyperparameters(self) -> Hyperparameters {
        use NamedApproach::*;
        let h = |activation, optimizer, neurons, batch_size, epochs| Hyperparameters {
            activation,
            optimizer,
            neurons,
            batch_size,
            epochs,
        };
        match self {
            LstmB | LstmI1 => h(Activation::Relu, OptimizerKind::Nadam, 80, 20, 40),
            LstmV => h(Activation::Relu, OptimizerKind::Adam, 80, 60, 50),
            GruB | GruI1 => h(Activation::Softsign, OptimizerKind::Nadam, 40, 80, 30),
            GruV => h(Activation::Softmax, OptimizerKind::Nadam, 80, 80, 30),
            LstmI2 | GruI2 => {
                let base = if self == LstmI2 { LstmB } else { GruB }.hyperparameters();
                Hyperparameters {
                    neurons: base.neurons * 2,
                    epochs: base.epochs * 2,
                    ..base
                }
            }
            LstmInitial | GruInitial => Hyperparameters::INITIAL,
        }
    }

    pub fn train_spec(self, seed: u64) -> TrainSpec {
        self.hyperparameters().train_spec(self.cell(), self.variant(), seed)
    }
}

impl fmt::Display for NamedApproach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for NamedApproach {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        NamedApproach::ALL
            .into_iter()
            .find(|a| a.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown approach `{s}`")))
    }
}

impl Serialize for NamedApproach {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for NamedApproach {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Anything that maps a window to a predicted physical position.
pub trait Predictor: Sync {
    fn predict(&self, window: &SampleWindow) -> Result<Vec2>;
}

/// Returns the true target; the zero-error control.
#[derive(Debug, Clone, Copy, Default)]
pub struct PerfectPredictor;

impl Predictor for PerfectPredictor {
    fn predict(&self, window: &SampleWindow) -> Result<Vec2> {
        Ok(window.target)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ConstantPredictor(pub Vec2);

impl Predictor for ConstantPredictor {
    fn predict(&self, _: &SampleWindow) -> Result<Vec2> {
        Ok(self.0)
    }
}

/// A trained recurrent network together with its coordinate normalizer.
#[derive(Debug, Clone, PartialEq)]
pub struct RnnPredictor {
    pub spec: RnnSpec,
    pub params: RnnParameters,
    pub normalizer: Normalizer,
}

impl RnnPredictor {
    pub fn checkpoint(&self) -> Checkpoint {
        let mut c = Checkpoint::new(self.spec, self.params.clone());
        c.normalizer = Some(self.normalizer.clone());
        c
    }

    pub fn from_checkpoint(c: Checkpoint) -> Result<Self> {
        let normalizer = c
            .normalizer
            .ok_or_else(|| Error::Serde("checkpoint carries no normalizer".into()))?;
        Ok(RnnPredictor {
            spec: c.spec,
            params: c.parameters,
            normalizer,
        })
    }
}

impl Predictor for RnnPredictor {
    fn predict(&self, window: &SampleWindow) -> Result<Vec2> {
        let inputs = self.normalizer.encode_inputs(window)?;
        let (pred, _) = rnn::forward(&self.spec, &self.params, &inputs)?;
        Ok(self.normalizer.decode(window, &pred))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowError {
    pub user: usize,
    pub tick: usize,
    /// Squared error in m².
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Evaluation {
    pub errors: Vec<WindowError>,
    pub summary: Summary,
}

impl Evaluation {
    pub fn from_errors(errors: Vec<WindowError>) -> Self {
        let se: Vec<f64> = errors.iter().map(|e| e.se).collect();
        Evaluation {
            summary: Summary::of(&se),
            errors,
        }
    }

    pub fn mean_se(&self) -> f64 {
        self.summary.mean
    }

    pub fn se_values(&self) -> Vec<f64> {
        self.errors.iter().map(|e| e.se).collect()
    }

    /// Summary per user, ordered by user index.
    pub fn per_user(&self) -> Vec<(usize, Summary)> {
        let mut users: Vec<usize> = self.errors.iter().map(|e| e.user).collect();
        users.sort_unstable();
        users.dedup();
        users
            .into_iter()
            .map(|u| {
                let se: Vec<f64> = self.errors.iter().filter(|e| e.user == u).map(|e| e.se).collect();
                (u, Summary::of(&se))
            })
            .collect()
    }
}

/// Squared error of every window in raw meters².
pub fn evaluate<P: Predictor + ?Sized>(predictor: &P, windows: &[SampleWindow]) -> Result<Evaluation> {
    let errors = windows
        .iter()
        .map(|w| {
            let p = predictor.predict(w)?;
            Ok(WindowError {
                user: w.user,
                tick: w.t,
                se: (p - w.target).norm_sq(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Evaluation::from_errors(errors))
}

/// Description of the machine timings were taken on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachineStamp {
    pub os: String,
    pub arch: String,
    pub cpus: usize,
    pub cpu_model: Option<String>,
}

impl MachineStamp {
    pub fn current() -> Self {
        let cpu_model = std::fs::read_to_string("/proc/cpuinfo").ok().and_then(|s| {
            s.lines()
                .find(|l| l.starts_with("model name"))
                .and_then(|l| l.split_once(':'))
                .map(|(_, v)| v.trim().to_string())
        });
        MachineStamp {
            os: std::env::consts::OS.into(),
            arch: std::env::consts::ARCH.into(),
            cpus: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
            cpu_model,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub spec: TrainSpec,
    /// Mean per-window SE (m²) of each epoch, measured before each update.
    pub epoch_losses: Vec<f64>,
    pub optimizer_steps: u64,
    pub test: Evaluation,
    /// Wall-clock seconds spent in the training loop alone.
    pub duration_secs: f64,
    pub machine: MachineStamp,
}

/// Training and test windows plus the normalizer fitted on the training part.
#[derive(Debug, Clone)]
pub struct TrainData {
    pub train: Vec<SampleWindow>,
    pub test: Vec<SampleWindow>,
    pub normalizer: Normalizer,
}

struct Encoded<'a> {
    window: &'a SampleWindow,
    inputs: Vec<Vec<f64>>,
    target: [f64; 2],
}

/// Starts the output head at the mean training target so saturating heads
/// (relu, softplus) do not begin dead. Leaves the random bias when the mean
/// lies outside the activation's range.
fn seed_head_bias(spec: &RnnSpec, params: &mut RnnParameters, encoded: &[Encoded]) {
    let mut mean = vec![0.0; spec.output_dim];
    for e in encoded {
        for (m, t) in mean.iter_mut().zip(&e.target) {
            *m += t / encoded.len() as f64;
        }
    }
    if let Some(bias) = spec.activation.preimage(&mean) {
        params.slices_mut()[4].copy_from_slice(&bias);
    }
}

/// Trains one network. Each epoch visits the training windows in a seeded
/// random order, in batches of `batch_size` (the last batch may be smaller);
/// gradients are averaged over the batch.
pub fn train(spec: &TrainSpec, data: &TrainData) -> Result<(RnnPredictor, TrainReport)> {
    let v = spec.violations();
    if !v.is_empty() {
        return Err(Error::Validation(v));
    }
    if data.train.is_empty() {
        return Err(Error::Config("no training windows".into()));
    }
    if let Some(w) = data.train.iter().chain(&data.test).find(|w| w.inputs[0].len() != spec.rnn.input_dim) {
        return Err(Error::Config(format!(
            "window has {} features but the network expects {}",
            w.inputs[0].len(),
            spec.rnn.input_dim
        )));
    }
    let norm = data.normalizer.clone();
    let encoded: Vec<Encoded> = data
        .train
        .iter()
        .map(|w| {
            Ok(Encoded {
                window: w,
                inputs: norm.encode_inputs(w)?,
                target: norm.encode_target(w),
            })
        })
        .collect::<Result<_>>()?;

    let mut params = RnnParameters::init(&spec.rnn, mix_seed(spec.seed, 1))?;
    seed_head_bias(&spec.rnn, &mut params, &encoded);
    let mut state = OptimizerState::new(&params);
    let mut grads = params.zeros_like();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, 2));
    let mut order: Vec<usize> = (0..encoded.len()).collect();
    let mut epoch_losses = Vec::with_capacity(spec.epochs);

    let start = Instant::now();
    for _ in 0..spec.epochs {
        order.shuffle(&mut rng);
        let mut epoch_se = 0.0;
        for batch in order.chunks(spec.batch_size) {
            for g in grads.slices_mut() {
                g.fill(0.0);
            }
            for &i in batch {
                let e = &encoded[i];
                let (pred, cache) = rnn::forward(&spec.rnn, &params, &e.inputs)?;
                let (_, dpred) = rnn::mse_loss(&pred, &e.target)?;
                rnn::backward_into(&spec.rnn, &params, &cache, &dpred, &mut grads)?;
                epoch_se += (norm.decode(e.window, &pred) - e.window.target).norm_sq();
            }
            grads.scale(1.0 / batch.len() as f64);
            optim::step(&spec.optimizer, &mut state, &mut params, &grads)?;
        }
        epoch_losses.push(epoch_se / encoded.len() as f64);
    }
    let duration_secs = start.elapsed().as_secs_f64();

    let predictor = RnnPredictor {
        spec: spec.rnn,
        params,
        normalizer: norm,
    };
    let test = evaluate(&predictor, &data.test)?;
    let report = TrainReport {
        spec: *spec,
        epoch_losses,
        optimizer_steps: state.step,
        test,
        duration_secs,
        machine: MachineStamp::current(),
    };
    Ok((predictor, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    Activation,
    Optimizer,
    Neurons,
    Batch,
    Epochs,
}

impl SweepAxis {
    /// Default tuning order.
    pub const ORDER: [SweepAxis; 5] = [
        SweepAxis::Activation,
        SweepAxis::Optimizer,
        SweepAxis::Neurons,
        SweepAxis::Batch,
        SweepAxis::Epochs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Activation => "activation",
            SweepAxis::Optimizer => "optimizer",
            SweepAxis::Neurons => "neurons",
            SweepAxis::Batch => "batch",
            SweepAxis::Epochs => "epochs",
        }
    }

    /// Parses a value for this axis from its textual form.
    pub fn parse_value(self, s: &str) -> Result<HyperValue> {
        let int = || {
            s.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("`{s}` is not a valid {} value", self.name())))
        };
        Ok(match self {
            SweepAxis::Activation => HyperValue::Activation(s.trim().parse()?),
            SweepAxis::Optimizer => HyperValue::Optimizer(s.trim().parse()?),
            SweepAxis::Neurons => HyperValue::Neurons(int()?),
            SweepAxis::Batch => HyperValue::Batch(int()?),
            SweepAxis::Epochs => HyperValue::Epochs(int()?),
        })
    }

    pub fn current(self, spec: &TrainSpec) -> HyperValue {
        match self {
            SweepAxis::Activation => HyperValue::Activation(spec.rnn.activation),
            SweepAxis::Optimizer => HyperValue::Optimizer(spec.optimizer.kind),
            SweepAxis::Neurons => HyperValue::Neurons(spec.rnn.hidden_units),
            SweepAxis::Batch => HyperValue::Batch(spec.batch_size),
            SweepAxis::Epochs => HyperValue::Epochs(spec.epochs),
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        SweepAxis::ORDER
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown sweep axis `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "axis", content = "value")]
pub enum HyperValue {
    Activation(Activation),
    Optimizer(OptimizerKind),
    Neurons(usize),
    Batch(usize),
    Epochs(usize),
}

impl HyperValue {
    pub fn axis(self) -> SweepAxis {
        match self {
            HyperValue::Activation(_) => SweepAxis::Activation,
            HyperValue::Optimizer(_) => SweepAxis::Optimizer,
            HyperValue::Neurons(_) => SweepAxis::Neurons,
            HyperValue::Batch(_) => SweepAxis::Batch,
            HyperValue::Epochs(_) => SweepAxis::Epochs,
        }
    }

    pub fn apply(self, spec: &TrainSpec) -> TrainSpec {
        let mut s = *spec;
        match self {
            HyperValue::Activation(a) => s.rnn.activation = a,
            HyperValue::Optimizer(k) => s.optimizer = OptimizerSpec::new(k),
            HyperValue::Neurons(n) => s.rnn.hidden_units = n,
            HyperValue::Batch(b) => s.batch_size = b,
            HyperValue::Epochs(e) => s.epochs = e,
        }
        s
    }
}

impl fmt::Display for HyperValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HyperValue::Activation(a) => write!(f, "{a}"),
            HyperValue::Optimizer(k) => write!(f, "{k}"),
            HyperValue::Neurons(n) | HyperValue::Batch(n) | HyperValue::Epochs(n) => write!(f, "{n}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub value: HyperValue,
    pub mean_se: Option<f64>,
    pub se: Vec<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub axis: SweepAxis,
    /// In input order.
    pub entries: Vec<SweepEntry>,
    /// Indices into `entries`, best mean SE first; failed entries excluded.
    pub ranking: Vec<usize>,
    pub best: Option<HyperValue>,
    /// Best and worst mean SE differ by more than 10 % of the best.
    pub influential: bool,
    /// Base spec with the winning value applied.
    pub best_spec: TrainSpec,
}

/// Relative spread above which an axis counts as influential.
pub const INFLUENCE_THRESHOLD: f64 = 0.10;

/// Evaluates every value of one axis with `run` and ranks by mean test SE.
/// Entries run on a pool of `jobs` threads; failures are recorded and skipped.
pub fn sweep_with<F>(base: &TrainSpec, axis: SweepAxis, values: &[HyperValue], jobs: usize, run: F) -> Result<SweepReport>
where
    F: Fn(&TrainSpec) -> Result<Evaluation> + Sync,
{
    if values.is_empty() {
        return Err(Error::Config(format!("no values given for sweep axis {axis}")));
    }
    if let Some(v) = values.iter().find(|v| v.axis() != axis) {
        return Err(Error::Config(format!("value {v} does not belong to axis {axis}")));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let entries: Vec<SweepEntry> = pool.install(|| {
        values
            .par_iter()
            .map(|&value| match run(&value.apply(base)) {
                Ok(ev) => SweepEntry {
                    value,
                    mean_se: Some(ev.mean_se()),
                    se: ev.se_values(),
                    error: None,
                },
                Err(e) => {
                    log::warn!("sweep {axis}={value} failed: {e}");
                    SweepEntry {
                        value,
                        mean_se: None,
                        se: Vec::new(),
                        error: Some(e.to_string()),
                    }
                }
            })
            .collect()
    });
    let mut ranking: Vec<usize> = (0..entries.len())
        .filter(|&i| entries[i].mean_se.is_some_and(f64::is_finite))
        .collect();
    ranking.sort_by(|&a, &b| entries[a].mean_se.unwrap().total_cmp(&entries[b].mean_se.unwrap()));
    let best = ranking.first().map(|&i| entries[i].value);
    let influential = match (ranking.first(), ranking.last()) {
        (Some(&b), Some(&w)) => {
            let (b, w) = (entries[b].mean_se.unwrap(), entries[w].mean_se.unwrap());
            w - b > INFLUENCE_THRESHOLD * b
        }
        _ => false,
    };
    Ok(SweepReport {
        axis,
        best_spec: best.map_or(*base, |v| v.apply(base)),
        entries,
        ranking,
        best,
        influential,
    })
}

/// Trains one model per value on `data`.
pub fn sweep(base: &TrainSpec, axis: SweepAxis, values: &[HyperValue], data: &TrainData, jobs: usize) -> Result<SweepReport> {
    sweep_with(base, axis, values, jobs, |spec| train(spec, data).map(|(_, r)| r.test))
}

/// Tunes the axes one after another, carrying each winner forward.
pub fn tune_with<F>(base: &TrainSpec, plan: &[(SweepAxis, Vec<HyperValue>)], jobs: usize, run: F) -> Result<Vec<SweepReport>>
where
    F: Fn(&TrainSpec) -> Result<Evaluation> + Sync,
{
    let mut current = *base;
    let mut reports = Vec::with_capacity(plan.len());
    for (axis, values) in plan {
        let report = sweep_with(&current, *axis, values, jobs, &run)?;
        current = report.best_spec;
        reports.push(report);
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Normalizer;
    use crate::geometry::Room;

    fn window(user: usize, t: usize, p: Vec2) -> SampleWindow {
        SampleWindow {
            inputs: vec![vec![p.x, p.y]; 3],
            target: p,
            user,
            t,
            target_tick: t + 1,
        }
    }

    fn toy_data(n: usize) -> TrainData {
        let ws: Vec<SampleWindow> = (0..n)
            .map(|i| window(0, i, Vec2::new(2.0 + 0.01 * i as f64, 3.0)))
            .collect();
        TrainData {
            train: ws.clone(),
            test: ws[..4].to_vec(),
            normalizer: Normalizer::room_side(&Room::default()),
        }
    }

    #[test]
    fn table_values() {
        let h = NamedApproach::LstmV.hyperparameters();
        assert_eq!((h.activation, h.optimizer, h.neurons, h.batch_size, h.epochs), (Activation::Relu, OptimizerKind::Adam, 80, 60, 50));
        let h = NamedApproach::GruV.hyperparameters();
        assert_eq!((h.activation, h.optimizer, h.neurons, h.batch_size, h.epochs), (Activation::Softmax, OptimizerKind::Nadam, 80, 80, 30));
        let h = NamedApproach::GruB.hyperparameters();
        assert_eq!((h.activation, h.optimizer, h.neurons, h.batch_size, h.epochs), (Activation::Softsign, OptimizerKind::Nadam, 40, 80, 30));
        let h = NamedApproach::LstmB.hyperparameters();
        assert_eq!((h.activation, h.optimizer, h.neurons, h.batch_size, h.epochs), (Activation::Relu, OptimizerKind::Nadam, 80, 20, 40));
        let i2 = NamedApproach::GruI2.hyperparameters();
        assert_eq!((i2.neurons, i2.epochs, i2.batch_size), (80, 60, 80));
        assert_eq!(NamedApproach::LstmI1.hyperparameters(), NamedApproach::LstmB.hyperparameters());
        assert_eq!(NamedApproach::LstmI1.variant(), FeatureVariant::Virtual);
        assert_eq!(NamedApproach::GruInitial.hyperparameters(), Hyperparameters::INITIAL);
        for a in NamedApproach::ALL {
            assert_eq!(a.label().parse::<NamedApproach>().unwrap(), a);
            assert!(a.train_spec(0).violations().is_empty());
        }
    }

    #[test]
    fn step_count_law() {
        let mut spec = Hyperparameters::INITIAL.train_spec(CellKind::Gru, FeatureVariant::Baseline, 3);
        spec.rnn.hidden_units = 4;
        spec.batch_size = 20;
        spec.epochs = 10;
        let (_, report) = train(&spec, &toy_data(100)).unwrap();
        assert_eq!(report.optimizer_steps, 50);
        spec.batch_size = 30;
        spec.epochs = 2;
        let (_, report) = train(&spec, &toy_data(100)).unwrap();
        assert_eq!(report.optimizer_steps, 8);
        assert_eq!(report.epoch_losses.len(), 2);
    }

    #[test]
    fn training_is_deterministic() {
        let mut spec = NamedApproach::GruB.train_spec(11);
        spec.rnn.hidden_units = 6;
        spec.epochs = 3;
        spec.batch_size = 7;
        let data = toy_data(30);
        let (a, ra) = train(&spec, &data).unwrap();
        let (b, rb) = train(&spec, &data).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(ra.epoch_losses, rb.epoch_losses);
        assert_eq!(ra.test, rb.test);
    }

    #[test]
    fn variant_mismatch_is_a_config_error() {
        let spec = NamedApproach::GruV.train_spec(0);
        assert!(matches!(train(&spec, &toy_data(10)), Err(Error::Validation(_) | Error::Config(_))));
        let mut spec = NamedApproach::GruB.train_spec(0);
        spec.rnn.input_dim = 4;
        assert!(train(&spec, &toy_data(10)).is_err());
    }

    #[test]
    fn stub_predictors() {
        let ws: Vec<SampleWindow> = (0..5).map(|i| window(i % 2, i, Vec2::new(1.0 + i as f64, 2.0))).collect();
        let ev = evaluate(&PerfectPredictor, &ws).unwrap();
        assert!(ev.errors.iter().all(|e| e.se == 0.0));
        let center = Vec2::new(3.75, 3.75);
        let pinned: Vec<SampleWindow> = (0..3).map(|i| window(0, i, center)).collect();
        assert_eq!(evaluate(&ConstantPredictor(center), &pinned).unwrap().mean_se(), 0.0);
        assert_eq!(ev.per_user().len(), 2);
    }

    fn fake_eval(se: f64) -> Evaluation {
        Evaluation::from_errors(vec![WindowError { user: 0, tick: 0, se }])
    }

    #[test]
    fn sweep_ranking_and_influence() {
        let base = Hyperparameters::INITIAL.train_spec(CellKind::Lstm, FeatureVariant::Baseline, 0);
        let single = sweep_with(&base, SweepAxis::Neurons, &[HyperValue::Neurons(40)], 1, |_| Ok(fake_eval(1.0))).unwrap();
        assert_eq!(single.best, Some(HyperValue::Neurons(40)));
        assert!(!single.influential);

        // The softsign run stands in for a perfect predictor.
        let values = [HyperValue::Activation(Activation::Relu), HyperValue::Activation(Activation::Softsign)];
        let r = sweep_with(&base, SweepAxis::Activation, &values, 2, |s| {
            Ok(fake_eval(if s.rnn.activation == Activation::Softsign { 0.0 } else { 1e-4 }))
        })
        .unwrap();
        assert_eq!(r.best, Some(HyperValue::Activation(Activation::Softsign)));
        assert_eq!(r.best_spec.rnn.activation, Activation::Softsign);
        assert!(r.influential);

        let close = sweep_with(&base, SweepAxis::Batch, &[HyperValue::Batch(20), HyperValue::Batch(40)], 1, |s| {
            Ok(fake_eval(if s.batch_size == 20 { 1.0 } else { 1.05 }))
        })
        .unwrap();
        assert!(!close.influential);
    }

    #[test]
    fn failed_entries_are_reported_not_ranked() {
        let base = Hyperparameters::INITIAL.train_spec(CellKind::Gru, FeatureVariant::Baseline, 0);
        let values = [HyperValue::Epochs(1), HyperValue::Epochs(2)];
        let r = sweep_with(&base, SweepAxis::Epochs, &values, 1, |s| {
            if s.epochs == 1 {
                Err(Error::Config("boom".into()))
            } else {
                Ok(fake_eval(0.5))
            }
        })
        .unwrap();
        assert_eq!(r.ranking, vec![1]);
        assert!(r.entries[0].error.is_some());
        assert!(sweep_with(&base, SweepAxis::Epochs, &[], 1, |_| Ok(fake_eval(0.0))).is_err());
        assert!(sweep_with(&base, SweepAxis::Epochs, &[HyperValue::Batch(3)], 1, |_| Ok(fake_eval(0.0))).is_err());
    }

    #[test]
    fn tuning_initial_values_returns_initial() {
        let base = Hyperparameters::INITIAL.train_spec(CellKind::Lstm, FeatureVariant::Baseline, 0);
        let plan: Vec<(SweepAxis, Vec<HyperValue>)> =
            SweepAxis::ORDER.iter().map(|&a| (a, vec![a.current(&base)])).collect();
        let reports = tune_with(&base, &plan, 1, |_| Ok(fake_eval(1.0))).unwrap();
        assert_eq!(reports.last().unwrap().best_spec, base);
    }
}

//! Config-driven commands behind the `rdw` binary.
//!
//! Every command writes into its own output directory and finishes with a
//! `manifest.json` holding the resolved config and the SHA-256 of each numeric
//! artifact. Wall-clock timings go to `timing.json`, which the manifest does
//! not hash, so rerunning a manifest reproduces every hashed file bit for bit.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{self, DatasetFile, FeatureVariant, NormalizationMode, Split, WindowFrame, WindowSpec};
use crate::error::{Error, Result};
use crate::geometry::Room;
use crate::io::{self, fmt_sig9};
use crate::motion::{self, VirtualMotionConfig};
use crate::rdw::{self, RdwParams, SimulationOutput};
use crate::rnn::{CellKind, Checkpoint};
use crate::stats::{Summary, QUANTILE_LEVELS};
use crate::trainer::{
    self, evaluate, Evaluation, HyperValue, Hyperparameters, MachineStamp, NamedApproach, PerfectPredictor,
    RnnPredictor, SweepAxis, SweepReport, TrainData, TrainSpec,
};

/// Simulation scenario: room, users and virtual motion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub room_side: f64,
    pub users: usize,
    pub tick_rate: f64,
    pub duration: f64,
    pub mean_speed: f64,
    pub turn_rate_std: f64,
    pub pause_probability: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        let m = VirtualMotionConfig::default();
        SimConfig {
            room_side: Room::default().side(),
            users: 2,
            tick_rate: m.tick_rate,
            duration: m.duration,
            mean_speed: m.mean_speed,
            turn_rate_std: m.turn_rate_std,
            pause_probability: m.pause_probability,
        }
    }
}

impl SimConfig {
    pub fn motion(&self, seed: u64) -> VirtualMotionConfig {
        VirtualMotionConfig {
            seed,
            tick_rate: self.tick_rate,
            duration: self.duration,
            mean_speed: self.mean_speed,
            turn_rate_std: self.turn_rate_std,
            pause_probability: self.pause_probability,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowConfig {
    pub history_len: usize,
    pub horizon: usize,
    /// Ticks between consecutive training windows.
    pub stride: usize,
    /// Ticks between consecutive test windows.
    pub test_stride: usize,
    pub train_fraction: f64,
    pub normalization: NormalizationMode,
    pub frame: WindowFrame,
    /// Standardize each input step and feature over the training windows.
    pub standardize_inputs: bool,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig {
            history_len: 20,
            horizon: 1,
            stride: 20,
            test_stride: 1,
            train_fraction: 0.8,
            normalization: NormalizationMode::Isotropic,
            frame: WindowFrame::Aligned,
            standardize_inputs: true,
        }
    }
}

impl WindowConfig {
    pub fn spec(&self) -> WindowSpec {
        WindowSpec {
            history_len: self.history_len,
            horizon: self.horizon,
            stride: self.stride,
        }
    }
}

/// Hyperparameter columns of the tuning table, keyed by approach.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperTable {
    #[serde(rename = "Initial")]
    pub initial: Hyperparameters,
    #[serde(rename = "LSTM-B")]
    pub lstm_b: Hyperparameters,
    #[serde(rename = "LSTM-V")]
    pub lstm_v: Hyperparameters,
    #[serde(rename = "GRU-B")]
    pub gru_b: Hyperparameters,
    #[serde(rename = "GRU-V")]
    pub gru_v: Hyperparameters,
}

impl Default for HyperTable {
    fn default() -> Self {
        HyperTable {
            initial: Hyperparameters::INITIAL,
            lstm_b: NamedApproach::LstmB.hyperparameters(),
            lstm_v: NamedApproach::LstmV.hyperparameters(),
            gru_b: NamedApproach::GruB.hyperparameters(),
            gru_v: NamedApproach::GruV.hyperparameters(),
        }
    }
}

impl HyperTable {
    pub fn get(&self, a: NamedApproach) -> Hyperparameters {
        use NamedApproach::*;
        let double = |h: Hyperparameters| Hyperparameters {
            neurons: h.neurons * 2,
            epochs: h.epochs * 2,
            ..h
        };
        match a {
            LstmB | LstmI1 => self.lstm_b,
            LstmI2 => double(self.lstm_b),
            LstmV => self.lstm_v,
            GruB | GruI1 => self.gru_b,
            GruI2 => double(self.gru_b),
            GruV => self.gru_v,
            LstmInitial | GruInitial => self.initial,
        }
    }

    pub fn train_spec(&self, a: NamedApproach, seed: u64) -> TrainSpec {
        self.get(a).train_spec(a.cell(), a.variant(), seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub variant: FeatureVariant,
    /// Trace CSV to window instead of simulating.
    pub trace: Option<PathBuf>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            variant: FeatureVariant::Virtual,
            trace: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub approach: NamedApproach,
    /// Dataset file from `build-dataset`; simulated afresh when absent.
    pub dataset: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            approach: NamedApproach::LstmV,
            dataset: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisPlan {
    pub axis: SweepAxis,
    pub values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuneConfig {
    pub cell: CellKind,
    pub variant: FeatureVariant,
    /// Axes in tuning order; each winner is carried into the next sweep.
    pub axes: Vec<AxisPlan>,
}

impl Default for TuneConfig {
    fn default() -> Self {
        let plan = |axis, values: &[&str]| AxisPlan {
            axis,
            values: values.iter().map(|s| s.to_string()).collect(),
        };
        TuneConfig {
            cell: CellKind::Lstm,
            variant: FeatureVariant::Baseline,
            axes: vec![
                plan(SweepAxis::Activation, &["relu", "softsign", "softmax", "softplus"]),
                plan(SweepAxis::Optimizer, &["sgd", "adam", "nadam"]),
                plan(SweepAxis::Neurons, &["20", "40", "60", "80"]),
                plan(SweepAxis::Batch, &["20", "40", "60", "80"]),
                plan(SweepAxis::Epochs, &["10", "20", "30", "40", "50"]),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareConfig {
    pub approaches: Vec<NamedApproach>,
    /// Adds a predictor that returns the true target, as a zero-error control.
    pub perfect_control: bool,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig {
            approaches: vec![
                NamedApproach::LstmB,
                NamedApproach::LstmV,
                NamedApproach::GruB,
                NamedApproach::GruV,
            ],
            perfect_control: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScaleConfig {
    pub user_counts: Vec<usize>,
    pub approaches: Vec<NamedApproach>,
    /// Directory holding `<approach>.json` checkpoints trained on two users.
    pub models: Option<PathBuf>,
}

impl Default for ScaleConfig {
    fn default() -> Self {
        ScaleConfig {
            user_counts: vec![2, 3, 4, 5, 6],
            approaches: vec![NamedApproach::LstmV, NamedApproach::GruV],
            models: None,
        }
    }
}

/// Everything a command needs; every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub jobs: usize,
    pub sim: SimConfig,
    pub rdw: RdwParams,
    pub window: WindowConfig,
    pub hyperparameters: HyperTable,
    pub dataset: DatasetConfig,
    pub train: TrainConfig,
    pub tune: TuneConfig,
    pub compare: CompareConfig,
    pub scale: ScaleConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 1,
            jobs: 1,
            sim: SimConfig::default(),
            rdw: RdwParams::default(),
            window: WindowConfig::default(),
            hyperparameters: HyperTable::default(),
            dataset: DatasetConfig::default(),
            train: TrainConfig::default(),
            tune: TuneConfig::default(),
            compare: CompareConfig::default(),
            scale: ScaleConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Reads a TOML config, or the `config` object of a JSON manifest.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: ExperimentConfig = if path.extension().is_some_and(|e| e == "json") {
            let value: serde_json::Value = serde_json::from_str(&text)?;
            let inner = value.get("config").cloned().unwrap_or(value);
            serde_json::from_value(inner)?
        } else {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses and validates a TOML config.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn room(&self) -> Result<Room> {
        Room::new(self.sim.room_side)
    }

    /// Every violated constraint, across all sections.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.jobs == 0 {
            v.push("jobs must be ≥ 1".into());
        }
        if !(self.sim.room_side.is_finite() && self.sim.room_side > 0.0) {
            v.push(format!("sim.room_side must be > 0 (got {})", self.sim.room_side));
        }
        if self.sim.users == 0 {
            v.push("sim.users must be ≥ 1".into());
        }
        v.extend(self.sim.motion(self.seed).violations());
        if self.sim.mean_speed * 3.0 > 0.0 && self.sim.mean_speed <= self.rdw.velocity_threshold {
            v.push(format!(
                "sim.mean_speed {} must exceed rdw.velocity_threshold {} so walking users are steered",
                self.sim.mean_speed, self.rdw.velocity_threshold
            ));
        }
        v.extend(self.rdw.violations());
        v.extend(self.window.spec().violations());
        if self.window.test_stride == 0 {
            v.push("window.test_stride must be ≥ 1".into());
        }
        if !(self.window.train_fraction > 0.0 && self.window.train_fraction < 1.0) {
            v.push(format!("window.train_fraction must lie in (0, 1) (got {})", self.window.train_fraction));
        }
        for a in NamedApproach::ALL {
            let spec = self.hyperparameters.train_spec(a, self.seed);
            v.extend(spec.violations().into_iter().map(|m| format!("hyperparameters.{a}: {m}")));
        }
        for (i, plan) in self.tune.axes.iter().enumerate() {
            if plan.values.is_empty() {
                v.push(format!("tune.axes[{i}] ({}) has no values", plan.axis));
            }
            for s in &plan.values {
                if let Err(e) = plan.axis.parse_value(s) {
                    v.push(format!("tune.axes[{i}]: {e}"));
                }
            }
        }
        if self.compare.approaches.is_empty() {
            v.push("compare.approaches is empty".into());
        }
        if self.scale.user_counts.is_empty() || self.scale.user_counts.contains(&0) {
            v.push("scale.user_counts must be nonempty and positive".into());
        }
        if self.scale.approaches.is_empty() {
            v.push("scale.approaches is empty".into());
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

/// One hashed output file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub tool_version: String,
    pub config: ExperimentConfig,
    pub artifacts: Vec<Artifact>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        io::read_json(path)
    }
}

/// Wall-clock measurements of a command, kept apart from hashed artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub machine: MachineStamp,
    pub seconds: BTreeMap<String, f64>,
}

/// Collects artifact paths of one command run.
struct Outputs {
    root: PathBuf,
    files: Vec<PathBuf>,
    seconds: BTreeMap<String, f64>,
}

impl Outputs {
    fn new(root: &Path) -> Result<Self> {
        io::ensure_dir(root)?;
        Ok(Outputs {
            root: root.to_path_buf(),
            files: Vec::new(),
            seconds: BTreeMap::new(),
        })
    }

    /// Path for a hashed artifact, creating parent directories.
    fn file(&mut self, rel: &str) -> Result<PathBuf> {
        let p = self.root.join(rel);
        if let Some(parent) = p.parent() {
            io::ensure_dir(parent)?;
        }
        self.files.push(p.clone());
        Ok(p)
    }

    fn time(&mut self, key: impl Into<String>, secs: f64) {
        self.seconds.insert(key.into(), secs);
    }

    fn finish(self, command: &str, cfg: &ExperimentConfig) -> Result<Manifest> {
        let mut artifacts = Vec::with_capacity(self.files.len());
        for f in &self.files {
            let rel = f.strip_prefix(&self.root).unwrap_or(f);
            artifacts.push(Artifact {
                path: rel.to_string_lossy().replace('\\', "/"),
                sha256: io::file_sha256(f)?,
            });
        }
        artifacts.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = Manifest {
            command: command.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            config: cfg.clone(),
            artifacts,
        };
        io::write_json(&self.root.join("manifest.json"), &manifest)?;
        let timing = Timing {
            machine: MachineStamp::current(),
            seconds: self.seconds,
        };
        io::write_json(&self.root.join("timing.json"), &timing)?;
        Ok(manifest)
    }
}

/// Runs the redirected-walking simulation for `users` users.
pub fn run_simulation(cfg: &ExperimentConfig, users: usize) -> Result<SimulationOutput> {
    let room = cfg.room()?;
    let motion = cfg.sim.motion(cfg.seed);
    let trajs = (0..users)
        .map(|u| motion::generate(&motion, u))
        .collect::<Result<Vec<_>>>()?;
    rdw::simulate(&trajs, &room, &cfg.rdw, &rdw::default_initial_positions(&room, users))
}

/// Windows, split and normalizer for one feature variant of a trace.
pub fn prepare(cfg: &ExperimentConfig, frames: &[rdw::TraceFrame], variant: FeatureVariant) -> Result<TrainData> {
    let w = &cfg.window;
    let split = dataset::split_frames(frames, &w.spec(), variant, w.train_fraction, w.test_stride)?;
    let mut normalizer = dataset::fit_normalizer(&split.train, w.normalization, w.frame, &cfg.room()?)?;
    if w.standardize_inputs {
        normalizer = normalizer.standardized(&split.train)?;
    }
    Ok(TrainData {
        train: split.train,
        test: split.test,
        normalizer,
    })
}

fn write_se_csv(path: &Path, ev: &Evaluation) -> Result<()> {
    let rows = ev.errors.iter().map(|e| format!("{},{},{}", e.user, e.tick, fmt_sig9(e.se)));
    io::write_csv(path, "user,tick,se", rows)
}

fn write_loss_csv(path: &Path, losses: &[f64]) -> Result<()> {
    let rows = losses.iter().enumerate().map(|(i, l)| format!("{},{}", i + 1, fmt_sig9(*l)));
    io::write_csv(path, "epoch,mean_loss", rows)
}

fn quantile_header() -> String {
    let levels: Vec<String> = QUANTILE_LEVELS.iter().map(|p| format!("q{:02}", (p * 100.0).round() as u32)).collect();
    format!("name,count,mean,{}", levels.join(","))
}

fn quantile_row(name: &str, s: &Summary) -> String {
    let qs: Vec<String> = s.quantiles.iter().map(|q| fmt_sig9(*q)).collect();
    format!("{name},{},{},{}", s.count, fmt_sig9(s.mean), qs.join(","))
}

/// Numeric training results (timings live in `timing.json`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub approach: String,
    pub spec: TrainSpec,
    pub train_windows: usize,
    pub test_windows: usize,
    pub optimizer_steps: u64,
    pub final_loss: f64,
    pub test: Summary,
}

/// `simulate`: trace, reset events, per-user virtual paths and reset metrics.
pub fn cmd_simulate(cfg: &ExperimentConfig, out: &Path) -> Result<Manifest> {
    cfg.validate()?;
    let mut o = Outputs::new(out)?;
    let motion = cfg.sim.motion(cfg.seed);
    let start = Instant::now();
    let trajs = (0..cfg.sim.users)
        .map(|u| motion::generate(&motion, u))
        .collect::<Result<Vec<_>>>()?;
    let room = cfg.room()?;
    let sim = rdw::simulate(&trajs, &room, &cfg.rdw, &rdw::default_initial_positions(&room, cfg.sim.users))?;
    o.time("simulate", start.elapsed().as_secs_f64());
    for (u, t) in trajs.iter().enumerate() {
        t.write_csv(&o.file(&format!("virtual/user_{u}.csv"))?)?;
    }
    rdw::write_trace_csv(&o.file("trace.csv")?, &sim.frames)?;
    rdw::write_resets_csv(&o.file("resets.csv")?, &sim.resets)?;
    let metrics = rdw::reset_metrics(&sim.resets, &sim.frames);
    io::write_json(&o.file("reset_metrics.json")?, &metrics)?;
    o.finish("simulate", cfg)
}

fn load_frames(cfg: &ExperimentConfig) -> Result<Vec<rdw::TraceFrame>> {
    match &cfg.dataset.trace {
        Some(p) => rdw::read_trace_csv(p),
        None => Ok(run_simulation(cfg, cfg.sim.users)?.frames),
    }
}

/// `build-dataset`: windows, split and normalizer as a reusable file.
pub fn cmd_build_dataset(cfg: &ExperimentConfig, out: &Path) -> Result<Manifest> {
    cfg.validate()?;
    let mut o = Outputs::new(out)?;
    let frames = load_frames(cfg)?;
    let data = prepare(cfg, &frames, cfg.dataset.variant)?;
    let w = &cfg.window;
    let full = dataset::split_frames(&frames, &w.spec(), cfg.dataset.variant, w.train_fraction, w.test_stride)?;
    let file = DatasetFile::new(w.spec(), cfg.dataset.variant, data.normalizer, &full);
    file.save(&o.file("dataset.json")?)?;
    dataset::write_targets_csv(&o.file("targets.csv")?, &full)?;
    o.finish("build-dataset", cfg)
}

fn train_data_for(cfg: &ExperimentConfig, variant: FeatureVariant) -> Result<TrainData> {
    match &cfg.train.dataset {
        Some(p) => {
            let file = DatasetFile::load(p)?;
            if file.variant != variant {
                return Err(Error::Config(format!(
                    "dataset {} holds {} features but the approach needs {}",
                    p.display(),
                    file.variant,
                    variant
                )));
            }
            let Split { train, test, .. } = file.split()?;
            Ok(TrainData {
                train,
                test,
                normalizer: file.normalizer,
            })
        }
        None => prepare(cfg, &run_simulation(cfg, cfg.sim.users)?.frames, variant),
    }
}

/// Trains one approach and writes its checkpoint, curves and errors under `prefix`.
fn train_into(o: &mut Outputs, prefix: &str, label: &str, spec: &TrainSpec, data: &TrainData) -> Result<(RnnPredictor, TrainSummary)> {
    let (model, report) = trainer::train(spec, data)?;
    o.time(format!("train/{label}"), report.duration_secs);
    model.checkpoint().save(&o.file(&format!("{prefix}models/{label}.json"))?)?;
    write_loss_csv(&o.file(&format!("{prefix}loss/{label}.csv"))?, &report.epoch_losses)?;
    write_se_csv(&o.file(&format!("{prefix}se/{label}.csv"))?, &report.test)?;
    let summary = TrainSummary {
        approach: label.into(),
        spec: *spec,
        train_windows: data.train.len(),
        test_windows: data.test.len(),
        optimizer_steps: report.optimizer_steps,
        final_loss: report.epoch_losses.last().copied().unwrap_or(f64::NAN),
        test: report.test.summary.clone(),
    };
    Ok((model, summary))
}

/// `train`: one approach from the config's hyperparameter table.
pub fn cmd_train(cfg: &ExperimentConfig, out: &Path) -> Result<Manifest> {
    cfg.validate()?;
    let mut o = Outputs::new(out)?;
    let a = cfg.train.approach;
    let data = train_data_for(cfg, a.variant())?;
    let spec = cfg.hyperparameters.train_spec(a, cfg.seed);
    let (_, summary) = train_into(&mut o, "", a.label(), &spec, &data)?;
    io::write_json(&o.file("report.json")?, &summary)?;
    o.finish("train", cfg)
}

/// Parsed sweep plan of the tune section.
pub fn tune_plan(cfg: &TuneConfig) -> Result<Vec<(SweepAxis, Vec<HyperValue>)>> {
    cfg.axes
        .iter()
        .map(|p| {
            let values = p.values.iter().map(|s| p.axis.parse_value(s)).collect::<Result<Vec<_>>>()?;
            Ok((p.axis, values))
        })
        .collect()
}

/// `tune`: one-axis-at-a-time sweeps starting from the Initial column.
pub fn cmd_tune(cfg: &ExperimentConfig, out: &Path) -> Result<Manifest> {
    cfg.validate()?;
    let mut o = Outputs::new(out)?;
    let data = prepare(cfg, &run_simulation(cfg, cfg.sim.users)?.frames, cfg.tune.variant)?;
    let base = cfg.hyperparameters.initial.train_spec(cfg.tune.cell, cfg.tune.variant, cfg.seed);
    let plan = tune_plan(&cfg.tune)?;
    let start = Instant::now();
    let reports = trainer::tune_with(&base, &plan, cfg.jobs, |spec| trainer::train(spec, &data).map(|(_, r)| r.test))?;
    o.time("tune", start.elapsed().as_secs_f64());
    for r in &reports {
        write_sweep_csv(&o.file(&format!("sweeps/{}.csv", r.axis))?, r)?;
    }
    let tuned = reports.last().map_or(base, |r| r.best_spec);
    io::write_json(&o.file("report.json")?, &TuneReport { base, sweeps: reports, tuned })?;
    o.finish("tune", cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneReport {
    pub base: TrainSpec,
    pub sweeps: Vec<SweepReport>,
    pub tuned: TrainSpec,
}

fn write_sweep_csv(path: &Path, r: &SweepReport) -> Result<()> {
    let rows: Vec<String> = r
        .entries
        .iter()
        .map(|e| {
            let s = Summary::of(&e.se);
            let rank = r.ranking.iter().position(|&i| r.entries[i].value == e.value).map_or(String::new(), |k| (k + 1).to_string());
            let qs: Vec<String> = s.quantiles.iter().map(|q| fmt_sig9(*q)).collect();
            format!("{},{},{},{}", e.value, rank, e.mean_se.map_or("nan".into(), fmt_sig9), qs.join(","))
        })
        .collect();
    let levels: Vec<String> = QUANTILE_LEVELS.iter().map(|p| format!("q{:02}", (p * 100.0).round() as u32)).collect();
    io::write_csv(path, &format!("value,rank,mean_se,{}", levels.join(",")), rows)
}

/// Numeric outcome of `compare`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub users: usize,
    pub resets: usize,
    pub approaches: Vec<TrainSummary>,
    pub perfect_control: Option<Summary>,
}

impl CompareReport {
    pub fn mean_se(&self, a: NamedApproach) -> Option<f64> {
        self.approaches.iter().find(|s| s.approach == a.label()).map(|s| s.test.mean)
    }
}

/// `compare`: trains and evaluates every listed approach on one scenario.
pub fn cmd_compare(cfg: &ExperimentConfig, out: &Path) -> Result<(Manifest, CompareReport)> {
    cfg.validate()?;
    let mut o = Outputs::new(out)?;
    let start = Instant::now();
    let sim = run_simulation(cfg, cfg.sim.users)?;
    let sim_secs = start.elapsed().as_secs_f64();
    o.time("simulate", sim_secs);

    let mut data: BTreeMap<FeatureVariant, TrainData> = BTreeMap::new();
    let mut summaries = Vec::new();
    let mut perfect = None;
    for &a in &cfg.compare.approaches {
        let d = match data.entry(a.variant()) {
            std::collections::btree_map::Entry::Occupied(e) => e.into_mut(),
            std::collections::btree_map::Entry::Vacant(e) => e.insert(prepare(cfg, &sim.frames, a.variant())?),
        };
        let spec = cfg.hyperparameters.train_spec(a, cfg.seed);
        let t0 = Instant::now();
        let (_, summary) = train_into(&mut o, "", a.label(), &spec, d)?;
        o.time(format!("simulate+predict/{a}"), sim_secs + t0.elapsed().as_secs_f64());
        if cfg.compare.perfect_control && perfect.is_none() {
            perfect = Some(evaluate(&PerfectPredictor, &d.test)?.summary);
        }
        summaries.push(summary);
    }
    let mut rows: Vec<String> = summaries.iter().map(|s| quantile_row(&s.approach, &s.test)).collect();
    if let Some(p) = &perfect {
        rows.push(quantile_row("perfect", p));
    }
    io::write_csv(&o.file("quantiles.csv")?, &quantile_header(), rows)?;
    let report = CompareReport {
        users: cfg.sim.users,
        resets: sim.resets.len(),
        approaches: summaries,
        perfect_control: perfect,
    };
    io::write_json(&o.file("summary.json")?, &report)?;
    Ok((o.finish("compare", cfg)?, report))
}

/// Result for one user count of the scale study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalePoint {
    pub users: usize,
    pub mean_resets_per_user: f64,
    pub mean_inter_reset_distance: f64,
    pub reset_counts: Vec<usize>,
    /// Mean test SE per approach label.
    pub mean_se: BTreeMap<String, f64>,
    pub se: BTreeMap<String, Summary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleReport {
    pub points: Vec<ScalePoint>,
}

/// Loads the two-user checkpoints the scale study evaluates.
pub fn load_models(dir: &Path, approaches: &[NamedApproach]) -> Result<Vec<(NamedApproach, RnnPredictor)>> {
    approaches
        .iter()
        .map(|&a| {
            let path = dir.join(format!("{}.json", a.label()));
            if !path.exists() {
                return Err(Error::Config(format!(
                    "missing checkpoint {}; run `rdw compare` on the two-user scenario and set scale.models to its models/ directory",
                    path.display()
                )));
            }
            let ck = Checkpoint::load(&path)?;
            let variant = match ck.spec.input_dim {
                2 => FeatureVariant::Baseline,
                _ => FeatureVariant::Virtual,
            };
            if variant != a.variant() || ck.spec.cell != a.cell() {
                return Err(Error::Config(format!("{} does not hold a {a} model", path.display())));
            }
            Ok((a, RnnPredictor::from_checkpoint(ck)?))
        })
        .collect()
}

/// One scale-study point: fresh simulation with `users` users, reset metrics
/// and test-split SE of each model.
pub fn scale_point(cfg: &ExperimentConfig, users: usize, models: &[(NamedApproach, RnnPredictor)]) -> Result<(ScalePoint, Vec<(String, Evaluation)>)> {
    let sim = run_simulation(cfg, users)?;
    let metrics = rdw::reset_metrics(&sim.resets, &sim.frames);
    let counts: Vec<usize> = metrics.iter().map(|m| m.reset_count).collect();
    let distances: Vec<f64> = metrics.iter().flat_map(|m| m.inter_reset_distances.iter().copied()).collect();
    let mut mean_se = BTreeMap::new();
    let mut se = BTreeMap::new();
    let mut evals = Vec::new();
    let w = &cfg.window;
    for (a, model) in models {
        let split = dataset::split_frames(&sim.frames, &w.spec(), a.variant(), w.train_fraction, w.test_stride)?;
        let ev = evaluate(model, &split.test)?;
        mean_se.insert(a.label().to_string(), ev.mean_se());
        se.insert(a.label().to_string(), ev.summary.clone());
        evals.push((a.label().to_string(), ev));
    }
    let point = ScalePoint {
        users,
        mean_resets_per_user: counts.iter().sum::<usize>() as f64 / users as f64,
        mean_inter_reset_distance: crate::stats::mean(&distances),
        reset_counts: counts,
        mean_se,
        se,
    };
    Ok((point, evals))
}

/// `scale-study`: two-user models evaluated on growing user counts.
pub fn cmd_scale_study(cfg: &ExperimentConfig, out: &Path) -> Result<(Manifest, ScaleReport)> {
    cfg.validate()?;
    let dir = cfg.scale.models.as_ref().ok_or_else(|| {
        Error::Config("scale.models is not set; run `rdw compare` first and point scale.models at its models/ directory".into())
    })?;
    let models = load_models(dir, &cfg.scale.approaches)?;
    let mut o = Outputs::new(out)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let start = Instant::now();
    let results: Vec<(ScalePoint, Vec<(String, Evaluation)>)> = pool.install(|| {
        cfg.scale
            .user_counts
            .par_iter()
            .map(|&n| scale_point(cfg, n, &models))
            .collect::<Result<Vec<_>>>()
    })?;
    o.time("scale-study", start.elapsed().as_secs_f64());
    let mut rows = Vec::new();
    for (p, evals) in &results {
        for (label, ev) in evals {
            write_se_csv(&o.file(&format!("users_{}/se/{label}.csv", p.users))?, ev)?;
            rows.push(quantile_row(&format!("{label}@{}", p.users), &ev.summary));
        }
    }
    io::write_csv(&o.file("quantiles.csv")?, &quantile_header(), rows)?;
    let resets = results.iter().map(|(p, _)| {
        format!("{},{},{}", p.users, fmt_sig9(p.mean_resets_per_user), fmt_sig9(p.mean_inter_reset_distance))
    });
    io::write_csv(&o.file("resets.csv")?, "users,mean_resets_per_user,mean_inter_reset_distance", resets)?;
    let report = ScaleReport {
        points: results.into_iter().map(|(p, _)| p).collect(),
    };
    io::write_json(&o.file("summary.json")?, &report)?;
    Ok((o.finish("scale-study", cfg)?, report))
}

/// Re-hashes a manifest's artifacts and lists the ones that differ.
pub fn verify_manifest(dir: &Path) -> Result<Vec<String>> {
    let m = Manifest::load(&dir.join("manifest.json"))?;
    let mut bad = Vec::new();
    for a in &m.artifacts {
        let p = dir.join(&a.path);
        match io::file_sha256(&p) {
            Ok(h) if h == a.sha256 => {}
            _ => bad.push(a.path.clone()),
        }
    }
    Ok(bad)
}

/// Train spec with Initial-column values, for timing comparisons.
pub fn initial_spec(cfg: &ExperimentConfig, cell: CellKind, variant: FeatureVariant) -> TrainSpec {
    cfg.hyperparameters.initial.train_spec(cell, variant, cfg.seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.sim.duration = 60.0;
        cfg.window.stride = 10;
        cfg.window.test_stride = 5;
        cfg.hyperparameters.lstm_v.epochs = 1;
        cfg.hyperparameters.gru_v.epochs = 1;
        cfg.hyperparameters.lstm_b.epochs = 1;
        cfg.hyperparameters.gru_b.epochs = 1;
        cfg
    }

    #[test]
    fn default_config_is_valid_and_round_trips() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let text = cfg.to_toml().unwrap();
        let back: ExperimentConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn validation_lists_every_violation() {
        let mut cfg = ExperimentConfig::default();
        cfg.sim.users = 0;
        cfg.window.train_fraction = 1.5;
        cfg.rdw.arc_radius = -1.0;
        cfg.hyperparameters.gru_v.batch_size = 0;
        match cfg.validate() {
            Err(Error::Validation(v)) => assert!(v.len() >= 4, "{v:?}"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn table_defaults_in_config() {
        let text = ExperimentConfig::default().to_toml().unwrap();
        for key in ["[hyperparameters.LSTM-V]", "[hyperparameters.GRU-B]", "user_falloff = 1.4", "arc_radius = 7.5"] {
            assert!(text.contains(key), "missing {key}");
        }
    }

    #[test]
    fn partial_toml_fills_defaults() {
        let cfg: ExperimentConfig = toml::from_str("seed = 5\n[sim]\nusers = 3\n").unwrap();
        assert_eq!(cfg.seed, 5);
        assert_eq!(cfg.sim.users, 3);
        assert_eq!(cfg.sim.duration, 3600.0);
        assert!(toml::from_str::<ExperimentConfig>("[sim]\nuserz = 3\n").is_err());
    }

    #[test]
    fn scale_study_without_models_explains_itself() {
        let dir = tempfile::tempdir().unwrap();
        let err = cmd_scale_study(&small(), dir.path()).unwrap_err().to_string();
        assert!(err.contains("rdw compare"), "{err}");
    }

    #[test]
    fn train_command_is_reproducible() {
        let cfg = small();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ma = cmd_train(&cfg, a.path()).unwrap();
        let mb = cmd_train(&cfg, b.path()).unwrap();
        assert_eq!(ma.artifacts, mb.artifacts);
        assert!(verify_manifest(a.path()).unwrap().is_empty());
        let reloaded = ExperimentConfig::load(&a.path().join("manifest.json")).unwrap();
        assert_eq!(reloaded, cfg);
    }
}

//! Sliding windows over simulator traces, normalization and chronological splits.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Room, Vec2};
use crate::io::{self, fmt_sig9};
use crate::rdw::TraceFrame;

/// Which coordinate streams feed the predictor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureVariant {
    /// Physical positions only.
    Baseline,
    /// Physical positions paired with the virtual position one tick ahead.
    Virtual,
}

impl FeatureVariant {
    pub fn input_dim(self) -> usize {
        match self {
            FeatureVariant::Baseline => 2,
            FeatureVariant::Virtual => 4,
        }
    }

    pub fn suffix(self) -> &'static str {
        match self {
            FeatureVariant::Baseline => "B",
            FeatureVariant::Virtual => "V",
        }
    }
}

impl fmt::Display for FeatureVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureVariant::Baseline => "baseline",
            FeatureVariant::Virtual => "virtual",
        })
    }
}

impl FromStr for FeatureVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "baseline" | "b" => Ok(FeatureVariant::Baseline),
            "virtual" | "v" => Ok(FeatureVariant::Virtual),
            _ => Err(Error::Config(format!("unknown feature variant `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowSpec {
    /// Input steps per window.
    pub history_len: usize,
    /// Ticks between the last input and the target.
    pub horizon: usize,
    pub stride: usize,
}

impl Default for WindowSpec {
    fn default() -> Self {
        WindowSpec {
            history_len: 20,
            horizon: 1,
            stride: 1,
        }
    }
}

impl WindowSpec {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.history_len < 2 {
            v.push(format!("window.history_len must be >= 2 (got {})", self.history_len));
        }
        if self.horizon < 1 {
            v.push("window.horizon must be >= 1".to_string());
        }
        if self.stride < 1 {
            v.push("window.stride must be >= 1".to_string());
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

    /// Ticks spanned from the first input to the target.
    pub fn span(&self) -> usize {
        self.history_len + self.horizon
    }
}

/// One training instance in room coordinates (meters).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleWindow {
    /// `history_len` steps; `[px, py]` or `[px, py, vx, vy]` where the
    /// virtual position is taken one tick after the physical one.
    pub inputs: Vec<Vec<f64>>,
    pub target: Vec2,
    pub user: usize,
    /// Tick of the last physical input.
    pub t: usize,
    /// Tick of the target position.
    pub target_tick: usize,
}

impl SampleWindow {
    /// Physical position at the last input step.
    pub fn last_physical(&self) -> Vec2 {
        let last = self.inputs.last().expect("windows are non-empty");
        Vec2::new(last[0], last[1])
    }

    pub fn first_tick(&self) -> usize {
        self.t + 1 - self.inputs.len()
    }
}

fn group_by_user(frames: &[TraceFrame]) -> BTreeMap<usize, Vec<&TraceFrame>> {
    let mut users: BTreeMap<usize, Vec<&TraceFrame>> = BTreeMap::new();
    for f in frames {
        users.entry(f.user).or_default().push(f);
    }
    for v in users.values_mut() {
        v.sort_by_key(|f| f.tick);
    }
    users
}

/// Cuts every user's trace into windows; windows never span users.
pub fn build_windows(frames: &[TraceFrame], spec: &WindowSpec, variant: FeatureVariant) -> Result<Vec<SampleWindow>> {
    spec.validate()?;
    let w = spec.history_len;
    let mut out = Vec::new();
    for (user, uf) in group_by_user(frames) {
        let n = uf.len();
        if n < spec.span() {
            continue;
        }
        if uf.iter().enumerate().any(|(i, f)| f.tick != uf[0].tick + i) {
            return Err(Error::Domain(format!("trace of user {user} has missing or repeated ticks")));
        }
        // Index i is the position of the last physical input.
        let mut i = w - 1;
        while i + spec.horizon < n {
            let inputs = (i + 1 - w..=i)
                .map(|k| {
                    let p = uf[k].physical.position;
                    match variant {
                        FeatureVariant::Baseline => vec![p.x, p.y],
                        FeatureVariant::Virtual => {
                            let v = uf[k + 1].virtual_pose.position;
                            vec![p.x, p.y, v.x, v.y]
                        }
                    }
                })
                .collect();
            out.push(SampleWindow {
                inputs,
                target: uf[i + spec.horizon].physical.position,
                user,
                t: uf[i].tick,
                target_tick: uf[i + spec.horizon].tick,
            });
            i += spec.stride;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum NormalizationMode {
    /// Divide by the room side so the room maps onto `[0, 1]²`.
    #[default]
    RoomSide,
    /// Min-max of the training split per axis.
    MinMax,
    /// One scale for both axes with the room center at 0.5: the smallest
    /// square about the center holding every training coordinate.
    Isotropic,
}

/// Coordinate frame windows are expressed in before normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum WindowFrame {
    /// Room coordinates as recorded.
    Room,
    /// Each window translated so its last physical position sits at the room center.
    Recentered,
    /// Recentered, then rotated so the latest physical motion points along `(1, −1)/√2`;
    /// the virtual stream is turned onto the physical one as well.
    #[default]
    Aligned,
}

/// Direction the latest motion is rotated onto in the aligned frame.
const ALIGNED_DIRECTION: f64 = -std::f64::consts::FRAC_PI_4;

/// Rigid map from room coordinates into a window's frame: `q = R(angle)(c − pivot) + center`.
#[derive(Debug, Clone, Copy)]
struct FrameMap {
    pivot: Vec2,
    center: Vec2,
    angle: f64,
}

impl FrameMap {
    fn forward(&self, c: Vec2) -> Vec2 {
        (c - self.pivot).rotate(self.angle) + self.center
    }

    fn inverse(&self, q: Vec2) -> Vec2 {
        (q - self.center).rotate(-self.angle) + self.pivot
    }
}

/// Per-axis affine map `n = (c − offset) / scale`, shared by physical and
/// virtual coordinates, applied after moving a window into its [`WindowFrame`].
///
/// Virtual coordinates are unbounded, so each window's virtual stream is
/// first moved rigidly onto the physical stream (see [`VirtualAnchor`]).
/// Rigid moves keep every virtual step length intact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mode: NormalizationMode,
    #[serde(default)]
    pub frame: WindowFrame,
    pub scale: [f64; 2],
    pub offset: [f64; 2],
    /// Point the last physical input is moved to in recentered frames.
    #[serde(default)]
    pub center: Vec2,
    /// Optional standardization of network inputs, applied after the map above.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inputs: Option<InputScaler>,
}

/// Per (step, feature) standardization `z = (x − mean) / std` of encoded
/// network inputs. Targets and outputs stay in normalized coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputScaler {
    pub steps: usize,
    pub features: usize,
    /// Row-major `steps × features`.
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl InputScaler {
    /// Features whose spread is below `floor` keep unit scale.
    pub fn fit(encoded: &[Vec<Vec<f64>>], floor: f64) -> Result<Self> {
        let first = encoded.first().ok_or_else(|| Error::Domain("no windows to standardize".into()))?;
        let steps = first.len();
        let features = first.first().map_or(0, Vec::len);
        if encoded.iter().any(|w| w.len() != steps || w.iter().any(|r| r.len() != features)) {
            return Err(Error::Domain("windows differ in shape".into()));
        }
        let n = encoded.len() as f64;
        let mut mean = vec![0.0; steps * features];
        for w in encoded {
            for (m, x) in mean.iter_mut().zip(w.iter().flatten()) {
                *m += x / n;
            }
        }
        let mut var = vec![0.0; steps * features];
        for w in encoded {
            for ((v, m), x) in var.iter_mut().zip(&mean).zip(w.iter().flatten()) {
                *v += (x - m) * (x - m) / n;
            }
        }
        let std = var.into_iter().map(|v| if v.sqrt() > floor { v.sqrt() } else { 1.0 }).collect();
        Ok(InputScaler { steps, features, mean, std })
    }

    fn apply(&self, rows: &mut [Vec<f64>]) -> Result<()> {
        if rows.len() != self.steps || rows.iter().any(|r| r.len() != self.features) {
            return Err(Error::Domain(format!(
                "input scaler expects {} x {} inputs",
                self.steps, self.features
            )));
        }
        for (i, x) in rows.iter_mut().flatten().enumerate() {
            *x = (*x - self.mean[i]) / self.std[i];
        }
        Ok(())
    }
}

impl Normalizer {
    pub fn identity() -> Self {
        Normalizer {
            mode: NormalizationMode::MinMax,
            frame: WindowFrame::Room,
            scale: [1.0, 1.0],
            offset: [0.0, 0.0],
            center: Vec2::ZERO,
            inputs: None,
        }
    }

    pub fn room_side(room: &Room) -> Self {
        Normalizer {
            mode: NormalizationMode::RoomSide,
            frame: WindowFrame::Room,
            scale: [room.side(); 2],
            offset: [0.0; 2],
            center: room.center(),
            inputs: None,
        }
    }

    pub fn with_frame(mut self, frame: WindowFrame) -> Self {
        self.frame = frame;
        self
    }

    pub fn normalize(&self, p: Vec2) -> [f64; 2] {
        [
            (p.x - self.offset[0]) / self.scale[0],
            (p.y - self.offset[1]) / self.scale[1],
        ]
    }

    pub fn denormalize(&self, n: &[f64]) -> Vec2 {
        Vec2::new(
            n[0] * self.scale[0] + self.offset[0],
            n[1] * self.scale[1] + self.offset[1],
        )
    }

    fn frame_map(&self, w: &SampleWindow) -> FrameMap {
        let pivot = w.last_physical();
        match self.frame {
            WindowFrame::Room => FrameMap { pivot: Vec2::ZERO, center: Vec2::ZERO, angle: 0.0 },
            WindowFrame::Recentered => FrameMap { pivot, center: self.center, angle: 0.0 },
            WindowFrame::Aligned => {
                let angle = latest_motion(w, 0, w.inputs.len())
                    .map(|d| wrap_angle(ALIGNED_DIRECTION - d.angle()))
                    .unwrap_or(0.0);
                FrameMap { pivot, center: self.center, angle }
            }
        }
    }

    /// Every coordinate of the window (inputs, then target) moved into its frame.
    fn framed_points(&self, w: &SampleWindow) -> Vec<Vec2> {
        let map = self.frame_map(w);
        let anchor = virtual_anchor(w, self.frame);
        let mut out = Vec::with_capacity(w.inputs.len() * 2 + 1);
        for step in &w.inputs {
            out.push(map.forward(Vec2::new(step[0], step[1])));
            if step.len() == 4 {
                out.push(map.forward(anchor.apply(Vec2::new(step[2], step[3]))));
            }
        }
        out.push(map.forward(w.target));
        out
    }

    /// Normalized window inputs before any standardization.
    fn map_inputs(&self, w: &SampleWindow) -> Vec<Vec<f64>> {
        let map = self.frame_map(w);
        let anchor = virtual_anchor(w, self.frame);
        w.inputs
            .iter()
            .map(|step| {
                let p = self.normalize(map.forward(Vec2::new(step[0], step[1])));
                if step.len() == 4 {
                    let v = self.normalize(map.forward(anchor.apply(Vec2::new(step[2], step[3]))));
                    vec![p[0], p[1], v[0], v[1]]
                } else {
                    vec![p[0], p[1]]
                }
            })
            .collect()
    }

    /// Network input sequence for a window.
    pub fn encode_inputs(&self, w: &SampleWindow) -> Result<Vec<Vec<f64>>> {
        let mut rows = self.map_inputs(w);
        if let Some(s) = &self.inputs {
            s.apply(&mut rows)?;
        }
        Ok(rows)
    }

    /// Adds input standardization fitted on `train`.
    pub fn standardized(mut self, train: &[SampleWindow]) -> Result<Self> {
        let encoded: Vec<_> = train.iter().map(|w| self.map_inputs(w)).collect();
        self.inputs = Some(InputScaler::fit(&encoded, STD_FLOOR)?);
        Ok(self)
    }

    pub fn encode_target(&self, w: &SampleWindow) -> [f64; 2] {
        self.normalize(self.frame_map(w).forward(w.target))
    }

    /// Maps a network output for `w` back to room meters.
    pub fn decode(&self, w: &SampleWindow, output: &[f64]) -> Vec2 {
        self.frame_map(w).inverse(self.denormalize(output))
    }
}

/// Most recent nonzero displacement of the coordinate pair at `col` among the first `len` steps.
fn latest_motion(w: &SampleWindow, col: usize, len: usize) -> Option<Vec2> {
    w.inputs[..len].windows(2).rev().find_map(|pair| {
        let d = Vec2::new(pair[1][col] - pair[0][col], pair[1][col + 1] - pair[0][col + 1]);
        (d.norm_sq() > 0.0).then_some(d)
    })
}

/// Rigid map placing a window's virtual stream onto its physical stream: the
/// virtual position at the last physical input tick (found one step earlier
/// in the window, since virtual samples lead by one) moves onto that physical
/// position. In the aligned frame the stream is also turned so its latest
/// motion runs along the latest physical motion.
#[derive(Debug, Clone, Copy)]
struct VirtualAnchor {
    from: Vec2,
    to: Vec2,
    angle: f64,
}

impl VirtualAnchor {
    fn apply(&self, v: Vec2) -> Vec2 {
        (v - self.from).rotate(self.angle) + self.to
    }
}

fn virtual_anchor(w: &SampleWindow, frame: WindowFrame) -> VirtualAnchor {
    let n = w.inputs.len();
    if w.inputs[0].len() < 4 || n < 2 {
        return VirtualAnchor { from: Vec2::ZERO, to: Vec2::ZERO, angle: 0.0 };
    }
    let from = Vec2::new(w.inputs[n - 2][2], w.inputs[n - 2][3]);
    let angle = match (frame, latest_motion(w, 0, n), latest_motion(w, 2, n - 1)) {
        (WindowFrame::Aligned, Some(p), Some(v)) => wrap_angle(p.angle() - v.angle()),
        _ => 0.0,
    };
    VirtualAnchor { from, to: w.last_physical(), angle }
}

/// Spread below which an input feature is treated as constant.
const STD_FLOOR: f64 = 1e-9;

/// Fits the normalizer on training windows only.
pub fn fit_normalizer(
    train: &[SampleWindow],
    mode: NormalizationMode,
    frame: WindowFrame,
    room: &Room,
) -> Result<Normalizer> {
    if train.is_empty() {
        return Err(Error::Domain("cannot fit a normalizer on an empty training set".into()));
    }
    let base = Normalizer::room_side(room).with_frame(frame);
    match mode {
        NormalizationMode::RoomSide => Ok(base),
        NormalizationMode::MinMax => {
            let mut lo = [f64::INFINITY; 2];
            let mut hi = [f64::NEG_INFINITY; 2];
            for p in train.iter().flat_map(|w| base.framed_points(w)) {
                for (axis, v) in [p.x, p.y].into_iter().enumerate() {
                    lo[axis] = lo[axis].min(v);
                    hi[axis] = hi[axis].max(v);
                }
            }
            if (0..2).any(|a| !(hi[a] - lo[a] > 0.0)) {
                log::warn!("degenerate coordinate range in training data; using identity normalization");
                return Ok(Normalizer::identity().with_frame(frame));
            }
            Ok(Normalizer {
                mode,
                scale: [hi[0] - lo[0], hi[1] - lo[1]],
                offset: lo,
                ..base
            })
        }
        NormalizationMode::Isotropic => {
            let c = base.center;
            let reach = train
                .iter()
                .flat_map(|w| base.framed_points(w))
                .map(|p| (p.x - c.x).abs().max((p.y - c.y).abs()))
                .fold(0.0, f64::max);
            if !(reach > 0.0) {
                log::warn!("degenerate coordinate range in training data; using identity normalization");
                return Ok(Normalizer::identity().with_frame(frame));
            }
            let scale = 2.0 * reach;
            Ok(Normalizer {
                mode,
                scale: [scale; 2],
                offset: [c.x - reach, c.y - reach],
                ..base
            })
        }
    }
}

/// Result of a chronological split.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Split {
    pub train: Vec<SampleWindow>,
    pub test: Vec<SampleWindow>,
    /// Test-side windows discarded because they overlapped training ticks.
    pub dropped: usize,
}

/// Per-user split point: training windows end at `last_t`, whose targets
/// reach up to `horizon_end`.
#[derive(Debug, Clone, Copy)]
struct Boundary {
    last_t: Option<usize>,
    horizon_end: Option<usize>,
}

fn check_fraction(train_fraction: f64) -> Result<()> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!("train fraction {train_fraction} must lie in (0, 1)")));
    }
    Ok(())
}

/// Takes the earliest `train_fraction` of each user's windows.
fn take_train(windows: &[SampleWindow], train_fraction: f64) -> (Vec<SampleWindow>, BTreeMap<usize, Boundary>) {
    let mut by_user: BTreeMap<usize, Vec<&SampleWindow>> = BTreeMap::new();
    for w in windows {
        by_user.entry(w.user).or_default().push(w);
    }
    let mut train = Vec::new();
    let mut bounds = BTreeMap::new();
    for (user, mut ws) in by_user {
        ws.sort_by_key(|w| w.t);
        let n_train = (((ws.len() as f64) * train_fraction).round() as usize).min(ws.len());
        let chosen = &ws[..n_train];
        bounds.insert(
            user,
            Boundary {
                last_t: chosen.last().map(|w| w.t),
                horizon_end: chosen.iter().map(|w| w.target_tick).max(),
            },
        );
        train.extend(chosen.iter().map(|&w| w.clone()));
    }
    (train, bounds)
}

/// Sorts later windows into test or dropped (overlapping training ticks).
fn assign_test(candidates: &[SampleWindow], bounds: &BTreeMap<usize, Boundary>, out: &mut Split) {
    for w in candidates {
        let b = bounds.get(&w.user).copied().unwrap_or(Boundary { last_t: None, horizon_end: None });
        if b.last_t.is_some_and(|last| w.t <= last) {
            continue;
        }
        if b.horizon_end.is_some_and(|end| w.first_tick() <= end) {
            out.dropped += 1;
        } else {
            out.test.push(w.clone());
        }
    }
}

fn finish(out: Split, train_fraction: f64) -> Result<Split> {
    if out.train.is_empty() || out.test.is_empty() {
        return Err(Error::Config(format!(
            "train fraction {train_fraction} leaves {} training and {} test windows",
            out.train.len(),
            out.test.len()
        )));
    }
    Ok(out)
}

/// Puts the earliest `train_fraction` of each user's windows into the
/// training set. Test windows whose input span reaches back into a training
/// window's span are dropped.
pub fn split(windows: &[SampleWindow], train_fraction: f64) -> Result<Split> {
    if windows.is_empty() {
        return Err(Error::Domain("cannot split an empty window set".into()));
    }
    check_fraction(train_fraction)?;
    let (train, bounds) = take_train(windows, train_fraction);
    let mut out = Split { train, ..Split::default() };
    assign_test(windows, &bounds, &mut out);
    finish(out, train_fraction)
}

/// Windows a trace and splits it, sampling training windows every
/// `spec.stride` ticks but test windows every `test_stride` ticks. The split
/// point is set by the training windows; with `test_stride == spec.stride`
/// this equals [`split`] of [`build_windows`].
pub fn split_frames(
    frames: &[TraceFrame],
    spec: &WindowSpec,
    variant: FeatureVariant,
    train_fraction: f64,
    test_stride: usize,
) -> Result<Split> {
    check_fraction(train_fraction)?;
    if test_stride == 0 {
        return Err(Error::Config("test stride must be positive".into()));
    }
    let windows = build_windows(frames, spec, variant)?;
    if windows.is_empty() {
        return Err(Error::Domain("trace too short for a single window".into()));
    }
    let (train, bounds) = take_train(&windows, train_fraction);
    let mut out = Split { train, ..Split::default() };
    if test_stride == spec.stride {
        assign_test(&windows, &bounds, &mut out);
    } else {
        let dense = build_windows(frames, &WindowSpec { stride: test_stride, ..*spec }, variant)?;
        assign_test(&dense, &bounds, &mut out);
    }
    finish(out, train_fraction)
}

/// Serializable container with everything needed to rebuild training tensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetFile {
    pub format: String,
    pub version: u32,
    pub window: WindowSpec,
    pub variant: FeatureVariant,
    pub normalizer: Normalizer,
    pub input_dim: usize,
    pub train: FlatSamples,
    pub test: FlatSamples,
    pub dropped: usize,
}

/// Windows flattened into parallel arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct FlatSamples {
    pub users: Vec<usize>,
    pub ticks: Vec<usize>,
    pub target_ticks: Vec<usize>,
    /// `len × history_len × input_dim`, row-major, room meters.
    pub inputs: Vec<f64>,
    /// `len × 2`, room meters.
    pub targets: Vec<f64>,
}

impl FlatSamples {
    pub fn from_windows(ws: &[SampleWindow]) -> Self {
        FlatSamples {
            users: ws.iter().map(|w| w.user).collect(),
            ticks: ws.iter().map(|w| w.t).collect(),
            target_ticks: ws.iter().map(|w| w.target_tick).collect(),
            inputs: ws.iter().flat_map(|w| w.inputs.iter().flatten().copied()).collect(),
            targets: ws.iter().flat_map(|w| [w.target.x, w.target.y]).collect(),
        }
    }

    pub fn to_windows(&self, history_len: usize, input_dim: usize) -> Result<Vec<SampleWindow>> {
        let n = self.users.len();
        let per = history_len * input_dim;
        if self.ticks.len() != n || self.target_ticks.len() != n || self.inputs.len() != n * per || self.targets.len() != 2 * n {
            return Err(Error::Serde("flattened samples have inconsistent lengths".into()));
        }
        Ok((0..n)
            .map(|i| SampleWindow {
                inputs: self.inputs[i * per..(i + 1) * per]
                    .chunks(input_dim)
                    .map(<[f64]>::to_vec)
                    .collect(),
                target: Vec2::new(self.targets[2 * i], self.targets[2 * i + 1]),
                user: self.users[i],
                t: self.ticks[i],
                target_tick: self.target_ticks[i],
            })
            .collect())
    }
}

impl DatasetFile {
    pub const FORMAT: &'static str = "rdw-dataset";
    pub const VERSION: u32 = 1;

    pub fn new(window: WindowSpec, variant: FeatureVariant, normalizer: Normalizer, split: &Split) -> Self {
        DatasetFile {
            format: Self::FORMAT.into(),
            version: Self::VERSION,
            window,
            variant,
            normalizer,
            input_dim: variant.input_dim(),
            train: FlatSamples::from_windows(&split.train),
            test: FlatSamples::from_windows(&split.test),
            dropped: split.dropped,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let d: DatasetFile = io::read_json(path)?;
        if d.format != Self::FORMAT || d.version != Self::VERSION {
            return Err(Error::Serde(format!("unsupported dataset {} v{}", d.format, d.version)));
        }
        Ok(d)
    }

    pub fn split(&self) -> Result<Split> {
        Ok(Split {
            train: self.train.to_windows(self.window.history_len, self.input_dim)?,
            test: self.test.to_windows(self.window.history_len, self.input_dim)?,
            dropped: self.dropped,
        })
    }
}

pub const TARGETS_HEADER: &str = "split,user,tick,tx,ty";

/// Audit CSV with one row per window target.
pub fn write_targets_csv(path: &Path, split: &Split) -> Result<()> {
    let rows = [("train", &split.train), ("test", &split.test)]
        .into_iter()
        .flat_map(|(name, ws)| {
            ws.iter().map(move |w| {
                format!("{name},{},{},{},{}", w.user, w.t, fmt_sig9(w.target.x), fmt_sig9(w.target.y))
            })
        });
    io::write_csv(path, TARGETS_HEADER, rows)
}

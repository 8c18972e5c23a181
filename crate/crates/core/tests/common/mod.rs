#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rdw_core::dataset::{build_windows, fit_normalizer, FeatureVariant, NormalizationMode, SampleWindow, WindowFrame, WindowSpec};
use rdw_core::motion::{generate, VirtualMotionConfig};
use rdw_core::rdw::{default_initial_positions, simulate, RdwParams};
use rdw_core::rnn::{self, Activation, CellKind, RnnParameters, RnnSpec};
use rdw_core::trainer::{train, TrainData, TrainReport, TrainSpec};
use rdw_core::optim::{OptimizerKind, OptimizerSpec};
use rdw_core::Room;

/// Sum of squared errors of a forward pass against `target`.
fn loss(spec: &RnnSpec, params: &RnnParameters, seq: &[Vec<f64>], target: &[f64]) -> f64 {
    let (pred, _) = rnn::forward(spec, params, seq).unwrap();
    pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum()
}

/// Worst relative error between analytic and central-difference gradients
/// for one random network. The denominator is floored at 1e-6 so parameters
/// with vanishing gradient compare on absolute error.
pub fn gradient_check(cell: CellKind, hidden: usize, seq_len: usize, activation: Activation, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = RnnSpec::new(cell, 3, hidden, activation);
    let mut params = RnnParameters::zeros(&spec);
    for s in params.slices_mut() {
        for v in s.iter_mut() {
            *v = rng.gen_range(-0.5..=0.5);
        }
    }
    let seq: Vec<Vec<f64>> = (0..seq_len).map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let target: Vec<f64> = (0..2).map(|_| rng.gen_range(0.0..1.0)).collect();

    let (pred, cache) = rnn::forward(&spec, &params, &seq).unwrap();
    let (_, dpred) = rnn::mse_loss(&pred, &target).unwrap();
    let grads = rnn::backward(&spec, &params, &cache, &dpred).unwrap();

    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    for (block, g) in grads.slices().iter().enumerate() {
        for i in 0..g.len() {
            let mut plus = params.clone();
            plus.slices_mut()[block][i] += eps;
            let mut minus = params.clone();
            minus.slices_mut()[block][i] -= eps;
            let numeric = (loss(&spec, &plus, &seq, &target) - loss(&spec, &minus, &seq, &target)) / (2.0 * eps);
            let err = (g[i] - numeric).abs() / g[i].abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(err);
        }
    }
    worst
}

/// Adam or Nadam on a scalar parameter, written out from the textbook update.
pub fn scalar_adaptive(nesterov: bool, theta0: f64, grads: &[f64], lr: f64) -> f64 {
    let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8f64);
    let (mut theta, mut m, mut v) = (theta0, 0.0, 0.0);
    for (k, g) in grads.iter().enumerate() {
        let t = (k + 1) as i32;
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g * g;
        let m_hat = m / (1.0 - b1.powi(t));
        let v_hat = v / (1.0 - b2.powi(t));
        let direction = if nesterov {
            b1 * m_hat + (1.0 - b1) * g / (1.0 - b1.powi(t))
        } else {
            m_hat
        };
        theta -= lr * direction / (v_hat.sqrt() + eps);
    }
    theta
}

/// A simulated `users`-user trace of `duration` seconds.
pub fn scenario_frames(seed: u64, users: usize, duration: f64) -> Vec<rdw_core::rdw::TraceFrame> {
    let cfg = VirtualMotionConfig { seed, duration, ..Default::default() };
    let trajs: Vec<_> = (0..users).map(|u| generate(&cfg, u).unwrap()).collect();
    let room = Room::default();
    simulate(&trajs, &room, &RdwParams::default(), &default_initial_positions(&room, users))
        .unwrap()
        .frames
}

/// Trains on exactly eight windows and returns the report.
pub fn overfit(cell: CellKind, seed: u64) -> TrainReport {
    overfit_with(cell, seed, FeatureVariant::Baseline, WindowFrame::Recentered, NormalizationMode::Isotropic, 8)
}

/// Eight windows in which the user walks straight ahead in the virtual world
/// on every tick. Without heading noise or pauses the next position is a
/// deterministic function of the history, so the windows can be fitted exactly.
pub fn walking_windows(seed: u64, variant: FeatureVariant) -> Vec<SampleWindow> {
    let motion = VirtualMotionConfig { seed, duration: 600.0, turn_rate_std: 0.0, pause_probability: 0.0, ..Default::default() };
    let room = Room::default();
    let frames = simulate(&[generate(&motion, 0).unwrap()], &room, &RdwParams::default(), &default_initial_positions(&room, 1))
        .unwrap()
        .frames;
    let spec = WindowSpec { stride: 40, ..Default::default() };
    let moving = |w: &SampleWindow| {
        let mut pts: Vec<(f64, f64)> = w.inputs.iter().map(|r| (r[0], r[1])).collect();
        pts.push((w.target.x, w.target.y));
        pts.windows(2).all(|p| (p[1].0 - p[0].0).hypot(p[1].1 - p[0].1) > 0.05)
    };
    let windows: Vec<SampleWindow> = build_windows(&frames, &spec, variant)
        .unwrap()
        .into_iter()
        .filter(moving)
        .take(8)
        .collect();
    assert_eq!(windows.len(), 8);
    windows
}

pub fn overfit_with(
    cell: CellKind,
    seed: u64,
    variant: FeatureVariant,
    frame: WindowFrame,
    mode: NormalizationMode,
    batch_size: usize,
) -> TrainReport {
    let windows = walking_windows(seed, variant);
    let normalizer = fit_normalizer(&windows, mode, frame, &Room::default())
        .unwrap()
        .standardized(&windows)
        .unwrap();
    let train_spec = TrainSpec {
        rnn: RnnSpec::new(cell, variant.input_dim(), 16, Activation::Linear),
        optimizer: OptimizerSpec::new(OptimizerKind::Adam),
        batch_size,
        epochs: 500,
        seed,
        variant,
    };
    let data = TrainData { train: windows.clone(), test: windows, normalizer };
    train(&train_spec, &data).unwrap().1
}

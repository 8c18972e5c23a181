//! Virtual-world movement: a seeded correlated random walk with pauses.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Pose2, Vec2};
use crate::io::{self, fmt_sig9};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VirtualMotionConfig {
    pub seed: u64,
    /// Samples per second.
    pub tick_rate: f64,
    /// Seconds of movement to generate.
    pub duration: f64,
    /// Walking speed in m/s.
    pub mean_speed: f64,
    /// Heading diffusion in rad/s.
    pub turn_rate_std: f64,
    /// Per-tick probability that a walking user stops.
    pub pause_probability: f64,
}

impl Default for VirtualMotionConfig {
    fn default() -> Self {
        VirtualMotionConfig {
            seed: 0,
            tick_rate: 10.0,
            duration: 3600.0,
            mean_speed: 1.0,
            turn_rate_std: 0.3,
            pause_probability: 0.02,
        }
    }
}

impl VirtualMotionConfig {
    /// Collects every violated constraint.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.tick_rate.is_finite() && self.tick_rate > 0.0) {
            v.push(format!("motion.tick_rate must be > 0 (got {})", self.tick_rate));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            v.push(format!("motion.duration must be > 0 (got {})", self.duration));
        }
        if !(self.mean_speed.is_finite() && self.mean_speed >= 0.0) {
            v.push(format!("motion.mean_speed must be >= 0 (got {})", self.mean_speed));
        }
        if !(self.turn_rate_std.is_finite() && self.turn_rate_std >= 0.0) {
            v.push(format!("motion.turn_rate_std must be >= 0 (got {})", self.turn_rate_std));
        }
        if !(0.0..=1.0).contains(&self.pause_probability) {
            v.push(format!(
                "motion.pause_probability must lie in [0, 1] (got {})",
                self.pause_probability
            ));
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

    /// Number of frames a generated trajectory holds.
    pub fn frame_count(&self) -> usize {
        (self.duration * self.tick_rate).round() as usize
    }
}

/// A user's virtual poses sampled at a fixed rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VirtualTrajectory {
    pub frames: Vec<Pose2>,
    pub tick_rate: f64,
}

impl VirtualTrajectory {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// `frames[t + 1] - frames[t]`, valid for `t` in `0..len-1`.
    pub fn displacement(&self, t: usize) -> Result<Vec2> {
        if t + 1 >= self.frames.len() {
            return Err(Error::Domain(format!(
                "tick {t} has no successor in a {}-frame trajectory",
                self.frames.len()
            )));
        }
        Ok(self.frames[t + 1].position - self.frames[t].position)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let rows = self.frames.iter().enumerate().map(|(t, p)| {
            format!(
                "{t},{},{},{}",
                fmt_sig9(p.position.x),
                fmt_sig9(p.position.y),
                fmt_sig9(p.heading)
            )
        });
        io::write_csv(path, TRAJECTORY_HEADER, rows)
    }

    pub fn read_csv(path: &Path, tick_rate: f64) -> Result<Self> {
        let rows = io::read_csv(path, TRAJECTORY_HEADER)?;
        let mut frames = Vec::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            let tick: usize = io::parse_field(row, 0, "tick")?;
            if tick != i {
                return Err(Error::Serde(format!(
                    "{}: tick {tick} out of sequence at row {i}",
                    path.display()
                )));
            }
            let x = io::parse_field(row, 1, "x")?;
            let y = io::parse_field(row, 2, "y")?;
            let h = io::parse_field(row, 3, "heading")?;
            frames.push(Pose2::new(Vec2::new(x, y), h));
        }
        Ok(VirtualTrajectory { frames, tick_rate })
    }
}

pub const TRAJECTORY_HEADER: &str = "tick,x,y,heading";

/// SplitMix64 finalizer used to derive independent per-user streams.
pub(crate) fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generates the virtual trajectory of user `user_index`.
///
/// Each tick the heading receives Gaussian noise with standard deviation
/// `turn_rate_std / tick_rate`. Walking users advance at `mean_speed`; with
/// probability `pause_probability` a walking user stops for between one and
/// three seconds. The result depends only on `(cfg, user_index)`.
pub fn generate(cfg: &VirtualMotionConfig, user_index: usize) -> Result<VirtualTrajectory> {
    cfg.validate()?;
    let n = cfg.frame_count();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, user_index as u64));
    let turn = Normal::new(0.0, cfg.turn_rate_std / cfg.tick_rate)
        .map_err(|e| Error::Config(e.to_string()))?;
    let step = cfg.mean_speed / cfg.tick_rate;
    let min_pause = cfg.tick_rate.ceil().max(1.0) as u32;

    let mut heading = rng.gen_range(-PI..PI);
    let mut position = Vec2::ZERO;
    let mut pause_left = 0u32;
    let mut frames = Vec::with_capacity(n);
    if n > 0 {
        frames.push(Pose2::new(position, heading));
    }
    for _ in 1..n {
        heading = wrap_angle(heading + turn.sample(&mut rng));
        if pause_left == 0 && rng.gen::<f64>() < cfg.pause_probability {
            pause_left = rng.gen_range(min_pause..=3 * min_pause);
        }
        if pause_left > 0 {
            pause_left -= 1;
        } else {
            position += Vec2::from_angle(heading) * step;
        }
        frames.push(Pose2::new(position, heading));
    }
    Ok(VirtualTrajectory {
        frames,
        tick_rate: cfg.tick_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short(duration: f64) -> VirtualMotionConfig {
        VirtualMotionConfig {
            seed: 7,
            duration,
            ..Default::default()
        }
    }

    #[test]
    fn hour_at_ten_hertz_is_36000_frames() {
        let traj = generate(&VirtualMotionConfig::default(), 0).unwrap();
        assert_eq!(traj.len(), 36_000);
    }

    #[test]
    fn zero_speed_never_moves() {
        let cfg = VirtualMotionConfig {
            mean_speed: 0.0,
            ..short(60.0)
        };
        let traj = generate(&cfg, 3).unwrap();
        assert!(traj.frames.iter().all(|f| f.position == traj.frames[0].position));
    }

    #[test]
    fn deterministic_per_user() {
        let cfg = short(120.0);
        assert_eq!(generate(&cfg, 1).unwrap(), generate(&cfg, 1).unwrap());
        assert_ne!(generate(&cfg, 0).unwrap(), generate(&cfg, 1).unwrap());
    }

    #[test]
    fn displacement_fenceposts() {
        let traj = VirtualTrajectory {
            frames: vec![Pose2::default(), Pose2::new(Vec2::new(0.1, 0.0), 0.0)],
            tick_rate: 10.0,
        };
        assert_eq!(traj.displacement(0).unwrap(), Vec2::new(0.1, 0.0));
        assert!(traj.displacement(1).is_err());

        let still = generate(&VirtualMotionConfig { mean_speed: 0.0, ..short(1.0) }, 0).unwrap();
        assert_eq!(still.displacement(still.len() - 2).unwrap(), Vec2::ZERO);
    }

    #[test]
    fn speeds_are_zero_or_walking_pace() {
        let cfg = short(600.0);
        let traj = generate(&cfg, 2).unwrap();
        let mut paused = 0;
        for t in 0..traj.len() - 1 {
            let speed = traj.displacement(t).unwrap().norm() * cfg.tick_rate;
            assert!(speed <= 3.0 * cfg.mean_speed + 1e-12);
            if speed == 0.0 {
                paused += 1;
            } else {
                assert!(speed > 0.1, "speed {speed} at tick {t} sits below the steering threshold");
            }
        }
        assert!(paused > 0);
    }

    #[test]
    fn invalid_config_lists_all_violations() {
        let cfg = VirtualMotionConfig {
            tick_rate: 0.0,
            duration: -1.0,
            mean_speed: -1.0,
            ..Default::default()
        };
        match generate(&cfg, 0) {
            Err(Error::Validation(v)) => assert_eq!(v.len(), 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u0.csv");
        let traj = generate(&short(5.0), 0).unwrap();
        traj.write_csv(&path).unwrap();
        let back = VirtualTrajectory::read_csv(&path, 10.0).unwrap();
        assert_eq!(back.len(), traj.len());
        for (a, b) in traj.frames.iter().zip(&back.frames) {
            assert!((a.position - b.position).norm() < 1e-7);
        }
    }
}

use std::f64::consts::PI;

use proptest::prelude::*;
use rdw_core::motion::{generate, VirtualMotionConfig};
use rdw_core::rdw::{default_initial_positions, potential_force, reset_metrics, simulate, steer_tick, RdwParams, UserState};
use rdw_core::{Pose2, Room, Vec2};

/// Straight-line oracle for a lone user: tuples only, no library geometry.
struct Oracle {
    side: f64,
    pos: (f64, f64),
    offset: f64,
}

fn wrap(a: f64) -> f64 {
    let mut a = (a + PI).rem_euclid(2.0 * PI) - PI;
    if a >= PI {
        a -= 2.0 * PI;
    }
    a
}

impl Oracle {
    fn force(&self) -> (f64, f64) {
        let (x, y) = self.pos;
        let s = self.side;
        (1.0 / x - 1.0 / (s - x), 1.0 / y - 1.0 / (s - y))
    }

    /// Returns `Some(new_heading)` on a reset.
    fn step(&mut self, disp: (f64, f64), rate: f64) -> Option<f64> {
        let speed = disp.0.hypot(disp.1) * rate;
        let f = self.force();
        let walk = disp.1.atan2(disp.0) + self.offset;
        let mis = wrap(f.1.atan2(f.0) - walk);
        let bound = (15f64.to_radians() / rate).min(speed / (7.5 * rate));
        let delta = mis.signum() * bound.min(mis.abs());
        let off = self.offset + delta;
        let (c, s) = (off.cos(), off.sin());
        let next = (self.pos.0 + c * disp.0 - s * disp.1, self.pos.1 + s * disp.0 + c * disp.1);
        let d_before = [self.pos.0, self.side - self.pos.0, self.pos.1, self.side - self.pos.1];
        let d_after = [next.0, self.side - next.0, next.1, self.side - next.1];
        if d_before.iter().zip(d_after).any(|(&b, a)| a < 0.5 && a < b) {
            return Some(f.1.atan2(f.0));
        }
        self.pos = next;
        self.offset = off;
        None
    }
}

#[test]
fn walking_west_triggers_reset_facing_east() {
    let room = Room::default();
    let params = RdwParams::default();
    let west = Pose2::new(Vec2::new(0.0, 0.0), PI);
    let mut state = UserState::new(Vec2::new(1.5, 3.75), west);
    let mut oracle = Oracle { side: 7.5, pos: (1.5, 3.75), offset: 0.0 };

    let mut reset_tick = None;
    for tick in 1..=11 {
        let next = Pose2::new(Vec2::new(-0.1 * tick as f64, 0.0), PI);
        let out = steer_tick(&state, tick, 0, next, &[], &room, &params, 10.0).unwrap();
        let expected = oracle.step((-0.1, 0.0), 10.0);
        assert_eq!(out.reset.is_some(), expected.is_some(), "tick {tick}");
        if let Some(event) = out.reset {
            let heading = expected.unwrap();
            assert!((wrap(event.new_heading - heading)).abs() < 1e-12);
            assert!(event.new_heading.abs() < PI / 2.0, "heading {}", event.new_heading);
            reset_tick = Some(tick);
            break;
        }
        let (ox, oy) = oracle.pos;
        assert!((out.state.physical.position - Vec2::new(ox, oy)).norm() < 1e-12);
        state = out.state;
    }
    assert!(reset_tick.is_some(), "no reset within 11 ticks");
}

#[test]
fn force_pushes_away_from_near_wall() {
    let f = potential_force(&Room::default(), Vec2::new(1.0, 3.75), &[], &RdwParams::default()).unwrap();
    // 1/1.0 − 1/6.5 toward the east.
    assert!((f.force.x - (1.0 - 1.0 / 6.5)).abs() < 1e-12);
    assert!(f.force.y.abs() < 1e-12);
}

#[test]
fn user_term_follows_power_law() {
    let params = RdwParams { wall_gain: 0.0, ..RdwParams::default() };
    let room = Room::default();
    let a = Vec2::new(3.0, 3.75);
    let b = Vec2::new(5.0, 3.75);
    let fa = potential_force(&room, a, &[b], &params).unwrap().force;
    let fb = potential_force(&room, b, &[a], &params).unwrap().force;
    assert!((fa.x + 2f64.powf(-1.4)).abs() < 1e-12);
    assert!((fa + fb).norm() < 1e-12);
}

#[test]
fn reset_metrics_match_frame_flags() {
    let cfg = VirtualMotionConfig { seed: 9, duration: 300.0, ..Default::default() };
    let trajs: Vec<_> = (0..3).map(|u| generate(&cfg, u).unwrap()).collect();
    let room = Room::default();
    let out = simulate(&trajs, &room, &RdwParams::default(), &default_initial_positions(&room, 3)).unwrap();
    let metrics = reset_metrics(&out.resets, &out.frames);
    for m in &metrics {
        let flagged = out.frames.iter().filter(|f| f.user == m.user && f.reset).count();
        assert_eq!(m.reset_count, flagged);
        assert_eq!(m.inter_reset_distances.len(), m.reset_count.saturating_sub(1));
        assert!(m.inter_reset_distances.iter().all(|&d| d >= 0.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn simulator_invariants(seed in any::<u64>(), users in 1usize..5) {
        let cfg = VirtualMotionConfig { seed, duration: 120.0, ..Default::default() };
        let trajs: Vec<_> = (0..users).map(|u| generate(&cfg, u).unwrap()).collect();
        let room = Room::default();
        let params = RdwParams::default();
        let out = simulate(&trajs, &room, &params, &default_initial_positions(&room, users)).unwrap();
        let budget = params.max_rotation_per_tick(cfg.tick_rate);
        prop_assert!(out.injected_rotations.iter().all(|r| r.abs() <= budget + 1e-15));
        for u in 0..users {
            let frames = out.user_frames(u);
            for pair in frames.windows(2) {
                let (a, b) = (&pair[0], &pair[1]);
                prop_assert!(room.contains(b.physical.position));
                let dv = (b.virtual_pose.position - a.virtual_pose.position).norm();
                let dp = (b.physical.position - a.physical.position).norm();
                if b.reset || dv * cfg.tick_rate <= params.velocity_threshold {
                    prop_assert_eq!(a.physical.position, b.physical.position);
                } else {
                    prop_assert!((dp - dv).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn simulation_is_deterministic(seed in any::<u64>()) {
        let cfg = VirtualMotionConfig { seed, duration: 30.0, ..Default::default() };
        let trajs: Vec<_> = (0..2).map(|u| generate(&cfg, u).unwrap()).collect();
        let room = Room::default();
        let init = default_initial_positions(&room, 2);
        let a = simulate(&trajs, &room, &RdwParams::default(), &init).unwrap();
        let b = simulate(&trajs, &room, &RdwParams::default(), &init).unwrap();
        prop_assert_eq!(a.frames, b.frames);
        prop_assert_eq!(a.resets, b.resets);
    }
}

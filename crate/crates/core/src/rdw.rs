//! Artificial-potential-field redirected walking with perceivable resets.
//!
//! Each user's virtual displacement is replayed in the physical room after
//! rotation by a per-user heading offset. While the user walks faster than
//! the velocity threshold, the offset is nudged every tick toward the
//! repulsive force of the walls and the other users, bounded both by the
//! maximum rotation rate and by the arc radius. A step that would enter the
//! safety margin of a wall or another user is replaced by a reset: the user
//! stays in place and is turned toward the force direction.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Pose2, Room, Vec2};
use crate::io::{self, fmt_sig9};
use crate::motion::VirtualTrajectory;

/// Closest distance at which two users still repel each other.
pub const MIN_USER_DISTANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RdwParams {
    /// Exponent of the user-user repulsion falloff.
    pub user_falloff: f64,
    /// Tightest circle (m) the injected rotation may bend a path into.
    pub arc_radius: f64,
    /// Degrees per second.
    pub max_rotation_rate: f64,
    /// m/s; slower users are not steered.
    pub velocity_threshold: f64,
    pub wall_gain: f64,
    pub user_gain: f64,
    pub reset_wall_margin: f64,
    pub reset_user_margin: f64,
}

impl Default for RdwParams {
    fn default() -> Self {
        RdwParams {
            user_falloff: 1.4,
            arc_radius: 7.5,
            max_rotation_rate: 15.0,
            velocity_threshold: 0.1,
            wall_gain: 1.0,
            user_gain: 1.0,
            reset_wall_margin: 0.5,
            reset_user_margin: 0.5,
        }
    }
}

impl RdwParams {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let positive = [
            ("arc_radius", self.arc_radius),
            ("max_rotation_rate", self.max_rotation_rate),
            ("velocity_threshold", self.velocity_threshold),
            ("reset_wall_margin", self.reset_wall_margin),
            ("reset_user_margin", self.reset_user_margin),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                v.push(format!("rdw.{name} must be > 0 (got {value})"));
            }
        }
        for (name, value) in [("wall_gain", self.wall_gain), ("user_gain", self.user_gain)] {
            if !(value.is_finite() && value >= 0.0) {
                v.push(format!("rdw.{name} must be >= 0 (got {value})"));
            }
        }
        if !(self.user_falloff.is_finite() && self.user_falloff >= 1.0) {
            v.push(format!("rdw.user_falloff must be >= 1 (got {})", self.user_falloff));
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

    /// Upper bound on the rotation injected in one tick, in radians.
    pub fn max_rotation_per_tick(&self, tick_rate: f64) -> f64 {
        self.max_rotation_rate.to_radians() / tick_rate
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserState {
    pub physical: Pose2,
    pub virtual_pose: Pose2,
    /// Physical path walked so far, meters.
    pub cumulative_path: f64,
    pub reset_count: usize,
    /// Physical heading minus virtual heading.
    pub heading_offset: f64,
    pub path_at_last_reset: f64,
}

impl UserState {
    pub fn new(physical_position: Vec2, virtual_pose: Pose2) -> Self {
        UserState {
            physical: Pose2::new(physical_position, virtual_pose.heading),
            virtual_pose,
            cumulative_path: 0.0,
            reset_count: 0,
            heading_offset: 0.0,
            path_at_last_reset: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceFrame {
    pub tick: usize,
    pub user: usize,
    pub physical: Pose2,
    pub virtual_pose: Pose2,
    pub reset: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResetEvent {
    pub tick: usize,
    pub user: usize,
    pub path_since_last_reset: f64,
    pub new_heading: f64,
}

/// Repulsive force acting on one user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialForce {
    pub force: Vec2,
    /// Set when another user was closer than [`MIN_USER_DISTANCE`].
    pub saturated: bool,
}

/// Sums the wall term `wall_gain / d_w · n_w` over the four walls and the
/// user term `user_gain · d_u^(-falloff) · u` over the other users, where
/// `u` points from the other user toward `self_pos`.
pub fn potential_force(
    room: &Room,
    self_pos: Vec2,
    others: &[Vec2],
    params: &RdwParams,
) -> Result<PotentialForce> {
    let walls = room.distance_to_walls(self_pos)?;
    let mut force = Vec2::ZERO;
    if params.wall_gain != 0.0 {
        for w in walls {
            force += w.inward_normal * (params.wall_gain / w.distance);
        }
    }
    let mut saturated = false;
    for &other in others {
        let away = self_pos - other;
        let mut d = away.norm();
        let dir = if d < MIN_USER_DISTANCE {
            saturated = true;
            d = MIN_USER_DISTANCE;
            // Coincident users have no defined direction; push toward the room center.
            away.normalized()
                .or_else(|| (room.center() - self_pos).normalized())
                .unwrap_or(Vec2::new(1.0, 0.0))
        } else {
            away * (1.0 / d)
        };
        force += dir * (params.user_gain * d.powf(-params.user_falloff));
    }
    if saturated {
        log::warn!("users closer than {MIN_USER_DISTANCE} m at {self_pos}; repulsion saturated");
    }
    if !force.is_finite() {
        return Err(Error::Invariant(format!("non-finite force at {self_pos}")));
    }
    Ok(PotentialForce { force, saturated })
}

/// Outcome of advancing one user by one tick.
#[derive(Debug, Clone, PartialEq)]
pub struct TickOutcome {
    pub state: UserState,
    pub frame: TraceFrame,
    pub reset: Option<ResetEvent>,
    /// Rotation injected into the heading offset this tick (zero on reset ticks).
    pub injected_rotation: f64,
}

/// Advances one user to the next virtual pose.
///
/// The virtual displacement is `next_virtual.position - state.virtual_pose.position`.
/// `others` holds the current physical positions of every other user.
#[allow(clippy::too_many_arguments)]
pub fn steer_tick(
    state: &UserState,
    tick: usize,
    user: usize,
    next_virtual: Pose2,
    others: &[Vec2],
    room: &Room,
    params: &RdwParams,
    tick_rate: f64,
) -> Result<TickOutcome> {
    let virtual_disp = next_virtual.position - state.virtual_pose.position;
    if !virtual_disp.is_finite() {
        return Err(Error::Domain(format!("virtual displacement {virtual_disp} is not finite")));
    }
    let mut next = state.clone();
    next.virtual_pose = next_virtual;
    let position = state.physical.position;
    let speed = virtual_disp.norm() * tick_rate;

    let mut injected_rotation = 0.0;
    let mut reset = None;
    if speed > params.velocity_threshold {
        let force = potential_force(room, position, others, params)?.force;
        let walking_dir = virtual_disp.rotate(state.heading_offset);
        if force != Vec2::ZERO {
            let bound = params
                .max_rotation_per_tick(tick_rate)
                .min(speed / (params.arc_radius * tick_rate));
            let misalignment = wrap_angle(force.angle() - walking_dir.angle());
            injected_rotation = misalignment.signum() * bound.min(misalignment.abs());
        }
        let offset = wrap_angle(state.heading_offset + injected_rotation);
        let step = virtual_disp.rotate(offset);
        let tentative = position + step;

        if enters_hazard(room, position, tentative, others, params) {
            let new_heading = if force != Vec2::ZERO {
                wrap_angle(force.angle())
            } else {
                state.physical.heading
            };
            next.heading_offset = wrap_angle(new_heading - next_virtual.heading);
            next.physical = Pose2::new(position, new_heading);
            next.reset_count += 1;
            reset = Some(ResetEvent {
                tick,
                user,
                path_since_last_reset: state.cumulative_path - state.path_at_last_reset,
                new_heading,
            });
            next.path_at_last_reset = state.cumulative_path;
            injected_rotation = 0.0;
        } else {
            next.heading_offset = offset;
            next.cumulative_path += step.norm();
            next.physical = Pose2::new(tentative, next_virtual.heading + offset);
        }
    } else {
        next.physical = Pose2::new(position, next_virtual.heading + state.heading_offset);
    }

    if !room.contains(next.physical.position) {
        return Err(Error::Invariant(format!(
            "user {user} left the room at tick {tick}: {}",
            next.physical.position
        )));
    }
    let frame = TraceFrame {
        tick,
        user,
        physical: next.physical,
        virtual_pose: next.virtual_pose,
        reset: reset.is_some(),
    };
    Ok(TickOutcome {
        state: next,
        frame,
        reset,
        injected_rotation,
    })
}

/// A step is hazardous when it ends inside a safety margin and brings the
/// user closer to the wall or user that owns the margin.
fn enters_hazard(
    room: &Room,
    from: Vec2,
    to: Vec2,
    others: &[Vec2],
    params: &RdwParams,
) -> bool {
    let before = room.raw_wall_distances(from);
    let after = room.raw_wall_distances(to);
    let wall = before
        .iter()
        .zip(after)
        .any(|(&b, a)| a < params.reset_wall_margin && a < b);
    wall || others.iter().any(|&o| {
        let a = to.distance(o);
        a < params.reset_user_margin && a < from.distance(o)
    })
}

/// Everything a simulation run produces.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimulationOutput {
    /// Tick-major: all users for tick 0, then tick 1, ...
    pub frames: Vec<TraceFrame>,
    pub resets: Vec<ResetEvent>,
    /// Injected rotation per (tick, user), same order as `frames`.
    pub injected_rotations: Vec<f64>,
}

impl SimulationOutput {
    pub fn user_count(&self) -> usize {
        self.frames.iter().map(|f| f.user + 1).max().unwrap_or(0)
    }

    /// Frames of one user in tick order.
    pub fn user_frames(&self, user: usize) -> Vec<TraceFrame> {
        self.frames.iter().filter(|f| f.user == user).copied().collect()
    }
}

/// Users evenly spaced on a circle of radius `side / 4` about the room center.
pub fn default_initial_positions(room: &Room, users: usize) -> Vec<Vec2> {
    let r = room.side() / 4.0;
    (0..users)
        .map(|k| {
            let a = 2.0 * std::f64::consts::PI * k as f64 / users as f64;
            room.center() + Vec2::from_angle(a) * r
        })
        .collect()
}

/// Runs all users in lockstep; within a tick users move in index order.
pub fn simulate(
    trajs: &[VirtualTrajectory],
    room: &Room,
    params: &RdwParams,
    initial_positions: &[Vec2],
) -> Result<SimulationOutput> {
    params.validate()?;
    if trajs.len() != initial_positions.len() {
        return Err(Error::Config(format!(
            "{} trajectories but {} initial positions",
            trajs.len(),
            initial_positions.len()
        )));
    }
    let Some(first) = trajs.first() else {
        return Ok(SimulationOutput::default());
    };
    let (len, tick_rate) = (first.len(), first.tick_rate);
    for (u, t) in trajs.iter().enumerate() {
        if t.len() != len || t.tick_rate != tick_rate {
            return Err(Error::Config(format!(
                "trajectory {u} has {} frames at {} Hz, expected {len} at {tick_rate} Hz",
                t.len(),
                t.tick_rate
            )));
        }
    }
    for (u, &p) in initial_positions.iter().enumerate() {
        if !room.contains(p) || room.distance_to_walls(p).is_err() {
            return Err(Error::Config(format!("initial position {p} of user {u} is not inside the room")));
        }
        if initial_positions[..u].contains(&p) {
            return Err(Error::Config(format!("users share initial position {p}")));
        }
    }

    let users = trajs.len();
    let mut states: Vec<UserState> = trajs
        .iter()
        .zip(initial_positions)
        .map(|(t, &p)| UserState::new(p, t.frames[0]))
        .collect();
    let mut out = SimulationOutput {
        frames: Vec::with_capacity(len * users),
        resets: Vec::new(),
        injected_rotations: Vec::with_capacity(len * users),
    };
    for (u, s) in states.iter().enumerate() {
        out.frames.push(TraceFrame {
            tick: 0,
            user: u,
            physical: s.physical,
            virtual_pose: s.virtual_pose,
            reset: false,
        });
        out.injected_rotations.push(0.0);
    }
    let mut others = Vec::with_capacity(users.saturating_sub(1));
    for tick in 1..len {
        for u in 0..users {
            others.clear();
            others.extend(
                states
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != u)
                    .map(|(_, s)| s.physical.position),
            );
            let outcome = steer_tick(
                &states[u],
                tick,
                u,
                trajs[u].frames[tick],
                &others,
                room,
                params,
                tick_rate,
            )?;
            states[u] = outcome.state;
            out.frames.push(outcome.frame);
            out.injected_rotations.push(outcome.injected_rotation);
            out.resets.extend(outcome.reset);
        }
    }
    Ok(out)
}

/// Reset statistics for one user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserResetMetrics {
    pub user: usize,
    pub reset_count: usize,
    /// Physical path walked between consecutive resets, in order.
    pub inter_reset_distances: Vec<f64>,
}

/// Per-user reset counts and inter-reset path lengths.
///
/// Path lengths are measured on the physical positions in `frames`.
pub fn reset_metrics(events: &[ResetEvent], frames: &[TraceFrame]) -> Vec<UserResetMetrics> {
    let mut per_user: BTreeMap<usize, Vec<&TraceFrame>> = BTreeMap::new();
    for f in frames {
        per_user.entry(f.user).or_default().push(f);
    }
    let users = per_user
        .keys()
        .chain(events.iter().map(|e| &e.user))
        .map(|u| u + 1)
        .max()
        .unwrap_or(0);
    (0..users)
        .map(|user| {
            let mut uf = per_user.remove(&user).unwrap_or_default();
            uf.sort_by_key(|f| f.tick);
            let mut path_at = BTreeMap::new();
            let mut path = 0.0;
            for (i, f) in uf.iter().enumerate() {
                if i > 0 {
                    path += f.physical.position.distance(uf[i - 1].physical.position);
                }
                path_at.insert(f.tick, path);
            }
            let at_resets: Vec<f64> = events
                .iter()
                .filter(|e| e.user == user)
                .filter_map(|e| path_at.get(&e.tick).copied())
                .collect();
            UserResetMetrics {
                user,
                reset_count: events.iter().filter(|e| e.user == user).count(),
                inter_reset_distances: at_resets.windows(2).map(|w| w[1] - w[0]).collect(),
            }
        })
        .collect()
}

pub const TRACE_HEADER: &str = "tick,user,px,py,pheading,vx,vy,vheading,reset";
pub const RESET_HEADER: &str = "tick,user,path_since_last_reset,new_heading";

pub fn write_trace_csv(path: &Path, frames: &[TraceFrame]) -> Result<()> {
    let rows = frames.iter().map(|f| {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            f.tick,
            f.user,
            fmt_sig9(f.physical.position.x),
            fmt_sig9(f.physical.position.y),
            fmt_sig9(f.physical.heading),
            fmt_sig9(f.virtual_pose.position.x),
            fmt_sig9(f.virtual_pose.position.y),
            fmt_sig9(f.virtual_pose.heading),
            u8::from(f.reset)
        )
    });
    io::write_csv(path, TRACE_HEADER, rows)
}

pub fn read_trace_csv(path: &Path) -> Result<Vec<TraceFrame>> {
    io::read_csv(path, TRACE_HEADER)?
        .iter()
        .map(|row| {
            let f = |i, name| io::parse_field::<f64>(row, i, name);
            Ok(TraceFrame {
                tick: io::parse_field(row, 0, "tick")?,
                user: io::parse_field(row, 1, "user")?,
                physical: Pose2::new(Vec2::new(f(2, "px")?, f(3, "py")?), f(4, "pheading")?),
                virtual_pose: Pose2::new(Vec2::new(f(5, "vx")?, f(6, "vy")?), f(7, "vheading")?),
                reset: io::parse_field::<u8>(row, 8, "reset")? != 0,
            })
        })
        .collect()
}

pub fn write_resets_csv(path: &Path, events: &[ResetEvent]) -> Result<()> {
    let rows = events.iter().map(|e| {
        format!(
            "{},{},{},{}",
            e.tick,
            e.user,
            fmt_sig9(e.path_since_last_reset),
            fmt_sig9(e.new_heading)
        )
    });
    io::write_csv(path, RESET_HEADER, rows)
}

pub fn read_resets_csv(path: &Path) -> Result<Vec<ResetEvent>> {
    io::read_csv(path, RESET_HEADER)?
        .iter()
        .map(|row| {
            Ok(ResetEvent {
                tick: io::parse_field(row, 0, "tick")?,
                user: io::parse_field(row, 1, "user")?,
                path_since_last_reset: io::parse_field(row, 2, "path_since_last_reset")?,
                new_heading: io::parse_field(row, 3, "new_heading")?,
            })
        })
        .collect()
}

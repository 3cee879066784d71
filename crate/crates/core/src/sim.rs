//! Closed-loop lane-keeping simulation.
//!
//! Frame convention: `x` forward at the start of the road, `y` to the right.
//! Headings are measured from `+x` towards `+y`, so a positive heading rate
//! is a right turn, positive curvature is a right-hand bend and positive
//! steering turns right. Lateral offsets are signed along the road's right
//! normal (vehicle minus centerline; positive = right of center).

use rand::Rng;
use thiserror::Error;

use crate::controllers::{oracle_steering, Controller, ControllerError};
use crate::domain::{Scenario, Value};
use crate::rng;

pub const WHEELBASE: f64 = 2.9;
/// Steering angle for a command of magnitude 1.
pub const MAX_STEER_DEG: f64 = 25.0;
pub const T_DELTA: f64 = 0.05;
pub const DEFAULT_DURATION: f64 = 60.0;
pub const MDCL_CAP: f64 = 1.5;
pub const LANE_WIDTH: f64 = 3.5;
pub const MIN_RADIUS: f64 = 10.0;
pub const DEFAULT_ROAD_LENGTH: f64 = 500.0;
pub const CURVE_RADIUS_MIN: f64 = 30.0;
pub const CURVE_RADIUS_MAX: f64 = 200.0;
/// Length of each arc in a curved road.
pub const ARC_LENGTH: f64 = 80.0;
/// Offsets beyond this saturate the observation.
pub const OFF_ROAD_LIMIT: f64 = 10.0;
pub const DEFAULT_SPEED_KMH: f64 = 30.0;
/// Base standard deviation of the observation noise channels.
pub const NOISE_BASE_SIGMA: f64 = 0.01;
pub const NOISE_CHANNELS: usize = 4;

const ROAD_STREAM: u64 = 0x524f_4144;
const NOISE_STREAM: u64 = 0x4e4f_4953;

pub fn max_steer_rad() -> f64 {
    MAX_STEER_DEG.to_radians()
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    if a > -std::f64::consts::PI && a <= std::f64::consts::PI {
        return a;
    }
    let two_pi = std::f64::consts::TAU;
    let mut w = a.rem_euclid(two_pi);
    if w > std::f64::consts::PI {
        w -= two_pi;
    }
    w
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Segment {
    Line { length: f64 },
    /// Signed curvature; positive bends right.
    Arc { length: f64, curvature: f64 },
}

impl Segment {
    pub fn length(&self) -> f64 {
        match *self {
            Segment::Line { length } | Segment::Arc { length, .. } => length,
        }
    }

    pub fn curvature(&self) -> f64 {
        match *self {
            Segment::Line { .. } => 0.0,
            Segment::Arc { curvature, .. } => curvature,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Placed {
    s0: f64,
    x0: f64,
    y0: f64,
    heading0: f64,
    segment: Segment,
}

impl Placed {
    fn pose(&self, u: f64) -> (f64, f64, f64) {
        match self.segment {
            Segment::Line { .. } => {
                (self.x0 + u * self.heading0.cos(), self.y0 + u * self.heading0.sin(), self.heading0)
            }
            Segment::Arc { curvature: k, .. } => {
                let (cx, cy) = self.center();
                let h = self.heading0 + k * u;
                (cx + h.sin() / k, cy - h.cos() / k, h)
            }
        }
    }

    fn center(&self) -> (f64, f64) {
        let k = self.segment.curvature();
        (self.x0 - self.heading0.sin() / k, self.y0 + self.heading0.cos() / k)
    }

    /// Closest point parameter on this segment, clamped to its extent.
    fn closest(&self, x: f64, y: f64) -> f64 {
        let len = self.segment.length();
        let u = match self.segment {
            Segment::Line { .. } => (x - self.x0) * self.heading0.cos() + (y - self.y0) * self.heading0.sin(),
            Segment::Arc { curvature: k, .. } => {
                let (cx, cy) = self.center();
                let (wx, wy) = (x - cx, y - cy);
                if wx == 0.0 && wy == 0.0 {
                    return 0.0;
                }
                let h = if k > 0.0 { wx.atan2(-wy) } else { (-wx).atan2(wy) };
                let mid = self.heading0 + k * len / 2.0;
                (mid - self.heading0 + wrap_angle(h - mid)) / k
            }
        };
        u.clamp(0.0, len)
    }
}

/// Where a point lies relative to the road.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    /// Arc length of the closest centerline point.
    pub station: f64,
    pub offset: f64,
    pub road_heading: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoadGeometry {
    placed: Vec<Placed>,
    length: f64,
    pub lane_width: f64,
    pub road_type: String,
}

impl RoadGeometry {
    /// Lays segments end to end from the origin, heading along `+x`.
    pub fn from_segments(segments: &[Segment], road_type: &str) -> Self {
        let mut placed = Vec::with_capacity(segments.len());
        let (mut s, mut x, mut y, mut h) = (0.0, 0.0, 0.0, 0.0);
        for &segment in segments {
            let p = Placed { s0: s, x0: x, y0: y, heading0: h, segment };
            let (nx, ny, nh) = p.pose(segment.length());
            placed.push(p);
            s += segment.length();
            x = nx;
            y = ny;
            h = nh;
        }
        RoadGeometry { placed, length: s, lane_width: LANE_WIDTH, road_type: road_type.to_string() }
    }

    pub fn straight(length: f64) -> Self {
        Self::from_segments(&[Segment::Line { length }], "Straight")
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn segments(&self) -> impl Iterator<Item = Segment> + '_ {
        self.placed.iter().map(|p| p.segment)
    }

    fn locate(&self, s: f64) -> &Placed {
        let i = self.placed.partition_point(|p| p.s0 <= s).saturating_sub(1);
        &self.placed[i]
    }

    /// Centerline position and (unwrapped) heading at arc length `s`.
    pub fn pose_at(&self, s: f64) -> (f64, f64, f64) {
        let s = s.clamp(0.0, self.length);
        let p = self.locate(s);
        p.pose(s - p.s0)
    }

    pub fn curvature_at(&self, s: f64) -> f64 {
        self.locate(s.clamp(0.0, self.length)).segment.curvature()
    }

    /// Mean curvature over `[s0, s1]`: heading change divided by distance.
    pub fn mean_curvature(&self, s0: f64, s1: f64) -> f64 {
        let s0 = s0.clamp(0.0, self.length);
        let s1 = s1.clamp(0.0, self.length);
        if s1 - s0 < 1e-9 {
            return self.curvature_at(s0);
        }
        let turned: f64 = self
            .placed
            .iter()
            .map(|p| {
                let lo = s0.max(p.s0);
                let hi = s1.min(p.s0 + p.segment.length());
                if hi > lo {
                    p.segment.curvature() * (hi - lo)
                } else {
                    0.0
                }
            })
            .sum();
        turned / (s1 - s0)
    }

    /// Projects a point onto the centerline, searching segments within a
    /// window around `station_hint` so the projection never jumps to a
    /// distant part of a winding road.
    pub fn project(&self, x: f64, y: f64, station_hint: f64, window: f64) -> Projection {
        let lo = station_hint - window;
        let hi = station_hint + window;
        let mut best: Option<(f64, f64, f64, f64)> = None;
        for p in &self.placed {
            let end = p.s0 + p.segment.length();
            if end < lo || p.s0 > hi {
                continue;
            }
            let u = p.closest(x, y);
            let (px, py, h) = p.pose(u);
            let d2 = (x - px).powi(2) + (y - py).powi(2);
            let offset = (x - px) * (-h.sin()) + (y - py) * h.cos();
            if best.is_none_or(|b| d2 < b.0) {
                best = Some((d2, p.s0 + u, offset, h));
            }
        }
        match best {
            Some((_, station, offset, road_heading)) => Projection { station, offset, road_heading },
            None => self.project(x, y, station_hint, f64::INFINITY),
        }
    }
}

fn symbol<'a>(scenario: &'a Scenario, attr: &str) -> Option<&'a str> {
    match scenario.get(attr) {
        Some(Value::Sym(s)) => Some(s.as_str()),
        _ => None,
    }
}

fn integer(scenario: &Scenario, attr: &str) -> Option<i64> {
    match scenario.get(attr) {
        Some(Value::Int(n)) => Some(*n),
        _ => None,
    }
}

/// Builds the road for a scenario. `Road.type` values containing "Curved"
/// give alternating arcs of [`ARC_LENGTH`] with radii drawn uniformly from
/// [`CURVE_RADIUS_MIN`, `CURVE_RADIUS_MAX`] using the scenario seed; anything
/// else is one straight segment. An integer `Road.length` attribute (metres)
/// overrides [`DEFAULT_ROAD_LENGTH`].
pub fn build_road(scenario: &Scenario) -> RoadGeometry {
    let road_type = symbol(scenario, "Road.type").unwrap_or("Straight");
    let length = integer(scenario, "Road.length").map_or(DEFAULT_ROAD_LENGTH, |n| n as f64);
    if !road_type.contains("Curved") {
        return RoadGeometry::from_segments(&[Segment::Line { length }], road_type);
    }
    let mut r = rng::rng(rng::derive(scenario.seed, ROAD_STREAM));
    let mut sign = if r.random::<bool>() { 1.0 } else { -1.0 };
    let mut segments = Vec::new();
    let mut laid = 0.0;
    while laid < length - 1e-9 {
        let radius = r.random_range(CURVE_RADIUS_MIN..=CURVE_RADIUS_MAX);
        let seg_len = ARC_LENGTH.min(length - laid);
        segments.push(Segment::Arc { length: seg_len, curvature: sign / radius });
        laid += seg_len;
        sign = -sign;
    }
    RoadGeometry::from_segments(&segments, road_type)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    /// Radians in (-pi, pi].
    pub heading: f64,
    pub step: usize,
}

/// Advances the kinematic bicycle by one time step: the steering command maps
/// linearly onto +/-25 degrees, the heading integrates `v/L * tan(delta)` and
/// the position moves `v * dt` along the mean of the old and new heading.
pub fn step_vehicle(state: &VehicleState, steering: f64, speed: f64, dt: f64) -> VehicleState {
    let delta = steering.clamp(-1.0, 1.0) * max_steer_rad();
    let heading = state.heading + speed / WHEELBASE * delta.tan() * dt;
    let mean = 0.5 * (state.heading + heading);
    VehicleState {
        x: state.x + speed * dt * mean.cos(),
        y: state.y + speed * dt * mean.sin(),
        heading: wrap_angle(heading),
        step: state.step + 1,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    /// Signed metres, vehicle minus centerline; saturates at [`OFF_ROAD_LIMIT`].
    pub lateral_offset: f64,
    /// Vehicle heading minus road heading, radians.
    pub heading_error: f64,
    /// Mean road curvature over the lookahead window, 1/m.
    pub curvature_ahead: f64,
    pub noise_channels: Vec<f64>,
    /// Arc length of the vehicle's projection onto the road.
    pub station: f64,
    /// Set when the offset exceeded [`OFF_ROAD_LIMIT`] and was clamped.
    pub saturated: bool,
}

impl Observation {
    pub fn is_finite(&self) -> bool {
        self.lateral_offset.is_finite()
            && self.heading_error.is_finite()
            && self.curvature_ahead.is_finite()
            && self.noise_channels.iter().all(|c| c.is_finite())
    }
}

/// Standard deviation of the observation noise channels for a scenario:
/// [`NOISE_BASE_SIGMA`] times
///
/// * `Weather.type`: Sunny 1, Rainy 2, Snowy 3
/// * `Weather.condition`: None/Light 1, Moderate 1.5, Heavy 2
/// * `Environment.buildings = True`: 1.2
/// * `Road.roadSpecificProperty = Tunnel`: 1.5
///
/// Missing attributes contribute a factor of 1.
pub fn noise_sigma(scenario: &Scenario) -> f64 {
    let weather = match symbol(scenario, "Weather.type") {
        Some("Rainy") => 2.0,
        Some("Snowy") => 3.0,
        _ => 1.0,
    };
    let condition = match symbol(scenario, "Weather.condition") {
        Some("Moderate") => 1.5,
        Some("Heavy") => 2.0,
        _ => 1.0,
    };
    let buildings = if symbol(scenario, "Environment.buildings") == Some("True") { 1.2 } else { 1.0 };
    let tunnel = if symbol(scenario, "Road.roadSpecificProperty") == Some("Tunnel") { 1.5 } else { 1.0 };
    NOISE_BASE_SIGMA * weather * condition * buildings * tunnel
}

/// Builds the controller input for a vehicle state. `station_hint` is the
/// previous projection station; `lookahead` is the distance over which the
/// upcoming curvature is averaged (one step of travel in the closed loop).
pub fn synthesize_observation(
    road: &RoadGeometry,
    state: &VehicleState,
    scenario: &Scenario,
    station_hint: f64,
    lookahead: f64,
) -> Observation {
    let proj = road.project(state.x, state.y, station_hint, 10.0 + lookahead.abs());
    let saturated = proj.offset.abs() > OFF_ROAD_LIMIT;
    let sigma = noise_sigma(scenario);
    let base = rng::derive(scenario.seed, NOISE_STREAM);
    let noise_channels = (0..NOISE_CHANNELS as u64)
        .map(|c| sigma * rng::gaussian(rng::derive(base, state.step as u64), c))
        .collect();
    Observation {
        lateral_offset: proj.offset.clamp(-OFF_ROAD_LIMIT, OFF_ROAD_LIMIT),
        heading_error: wrap_angle(state.heading - proj.road_heading),
        curvature_ahead: road.mean_curvature(proj.station, proj.station + lookahead),
        noise_channels,
        station: proj.station,
        saturated,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub observation: Observation,
    /// Oracle steering at the same state.
    pub theta: f64,
    /// Controller steering.
    pub theta_hat: f64,
    pub state: VehicleState,
    /// Absolute lateral deviation, metres.
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub scenario_id: String,
    pub t_delta: f64,
    pub steps: Vec<TraceStep>,
    /// `floor(T / t_delta)`.
    pub planned_steps: usize,
    /// True when the run stopped at the end of the road.
    pub reached_road_end: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OnlineResult {
    pub mdcl_raw: f64,
    /// `min(mdcl_raw, 1.5) / 1.5`.
    pub mdcl: f64,
    pub acceptable: bool,
}

impl OnlineResult {
    pub fn from_deviations(deviations: &[f64], online_threshold: f64) -> Self {
        let mdcl_raw = deviations.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        let mdcl = mdcl_raw.min(MDCL_CAP) / MDCL_CAP;
        OnlineResult { mdcl_raw, mdcl, acceptable: mdcl < online_threshold }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    /// Simulated duration T, seconds.
    pub duration: f64,
    pub t_delta: f64,
    pub online_threshold: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { duration: DEFAULT_DURATION, t_delta: T_DELTA, online_threshold: 0.7 }
    }
}

impl SimConfig {
    pub fn planned_steps(&self) -> usize {
        (self.duration / self.t_delta + 1e-9).floor() as usize
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("duration {duration} s with step {t_delta} s gives fewer than 2 steps")]
    TooShort { duration: f64, t_delta: f64 },
    #[error("controller failed at step {step}: {source}")]
    Controller {
        step: usize,
        #[source]
        source: ControllerError,
    },
}

pub fn speed_mps(scenario: &Scenario) -> f64 {
    integer(scenario, "Vehicle.speed").map_or(DEFAULT_SPEED_KMH, |n| n as f64) / 3.6
}

/// Runs `controller` in closed loop on the scenario's road. The ground-truth
/// steering of each step is the oracle evaluated at the same state.
pub fn run_online(
    scenario: &Scenario,
    controller: &mut dyn Controller,
    cfg: &SimConfig,
) -> Result<(Trace, OnlineResult), SimError> {
    let planned = cfg.planned_steps();
    if planned < 2 || !(cfg.t_delta > 0.0) {
        return Err(SimError::TooShort { duration: cfg.duration, t_delta: cfg.t_delta });
    }
    let road = build_road(scenario);
    let speed = speed_mps(scenario);
    let lookahead = speed * cfg.t_delta;
    controller.reset();

    let (x, y, heading) = road.pose_at(0.0);
    let mut state = VehicleState { x, y, heading: wrap_angle(heading), step: 0 };
    let mut station = 0.0;
    let mut steps = Vec::with_capacity(planned);
    let mut reached_road_end = false;
    for j in 0..planned {
        let observation = synthesize_observation(&road, &state, scenario, station, lookahead);
        if j > 0 && observation.station >= road.length() - 1e-9 {
            reached_road_end = true;
            break;
        }
        station = observation.station;
        let theta = oracle_steering(&observation);
        let theta_hat = controller
            .steer(j, &observation)
            .map_err(|source| SimError::Controller { step: j, source })?
            .clamp(-1.0, 1.0);
        let deviation = observation.lateral_offset.abs();
        let next = step_vehicle(&state, theta_hat, speed, cfg.t_delta);
        steps.push(TraceStep { observation, theta, theta_hat, state, deviation });
        state = next;
    }
    let deviations: Vec<f64> = steps.iter().map(|s| s.deviation).collect();
    let result = OnlineResult::from_deviations(&deviations, cfg.online_threshold);
    let trace = Trace {
        scenario_id: scenario.id.clone(),
        t_delta: cfg.t_delta,
        steps,
        planned_steps: planned,
        reached_road_end,
    };
    Ok((trace, result))
}

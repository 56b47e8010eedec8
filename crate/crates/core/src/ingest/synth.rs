//! Ground-truth-annotated synthetic recordings.
//!
//! Geometry: vehicles drive in +x, lateral position `y` grows to the left and
//! lane `k` (1-based) spans `[(k-1)·w, k·w)`. On straight recordings the lane
//! id equals `k`, so ids increase to the left; ramp recordings scramble ids so
//! that only lateral velocity reveals the direction of a change.
//!
//! Each recording is a sequence of independent scenes on a shared frame clock:
//!
//! * maneuver scenes: an ego vehicle that changes lanes once plus one
//!   companion (a slower lead before a left change, a faster follower before a
//!   right change);
//! * lane-keeping scenes: up to three vehicles that never change lanes.
//!
//! Lateral motion is a minimum-jerk lane change on top of a slow, bounded
//! wander. The ego carries a longitudinal intention cue (braking before a
//! left change, accelerating before a right change) starting `cue_lead_s`
//! before the event start. Lane-keeping track lengths are sized so that the
//! window labels at the reference history/horizon follow `class_skew`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    DatasetKind, Frame, IngestError, NeighborPosition, Neighbors, RampMeta, Recording, Track,
    VehicleClass, DEFAULT_SAMPLING_RATE,
};
use crate::labeling::{Direction, LaneChangeEvent};

const CROSSING_THRESHOLD: f64 = 0.2;
const ALONG_RANGE: f64 = 5.0;
const MAX_WANDER_STD: f64 = 0.06;
const RAMP_LANE_IDS: [i32; 8] = [4, 2, 6, 1, 5, 3, 8, 7];
const RAMP_ENTRY_X: f64 = -50.0;
const RAMP_EXIT_X: f64 = 1500.0;
const LEFT_CUE_ACCEL: f64 = -1.0;
const RIGHT_CUE_ACCEL: f64 = 0.8;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_locations: usize,
    pub tracks_per_location: usize,
    pub lane_count: usize,
    pub lane_width: f64,
    /// Fraction of tracks that perform a lane change. Every maneuvering ego
    /// brings one companion track, so at most one half.
    pub maneuver_rate: f64,
    /// Target No-LC : Left-LC : Right-LC window ratio at the reference
    /// history and horizon.
    pub class_skew: [f64; 3],
    /// Fraction of locations recorded as ramp areas.
    pub ramp_fraction: f64,
    /// Standard deviation of the lateral lane-keeping wander, in metres
    /// (capped at 0.06 m so lane keeping never reaches the crossing threshold).
    pub noise_std: f64,
    pub seed: u64,
    pub sampling_rate: f64,
    pub speed_limit: Option<f64>,
    /// How long before the event start the longitudinal cue begins.
    pub cue_lead_s: f64,
    /// Fraction of lane-keeping vehicles showing a cue without changing lanes.
    pub confuser_rate: f64,
    pub reference_history_s: f64,
    pub reference_horizon_s: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_locations: 6,
            tracks_per_location: 200,
            lane_count: 3,
            lane_width: 3.75,
            maneuver_rate: 0.1,
            class_skew: [27.0, 1.0, 1.0],
            ramp_fraction: 0.0,
            noise_std: 0.03,
            seed: 0,
            sampling_rate: DEFAULT_SAMPLING_RATE,
            speed_limit: Some(33.3),
            cue_lead_s: 1.0,
            confuser_rate: 0.0,
            reference_history_s: 1.0,
            reference_horizon_s: 1.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), IngestError> {
        let bad = |m: &str| Err(IngestError::InfeasibleConfig(m.to_owned()));
        if self.n_locations == 0 || self.tracks_per_location == 0 {
            return bad("location and track counts must be positive");
        }
        if self.lane_count < 2 || self.lane_count > RAMP_LANE_IDS.len() {
            return bad("lane_count must be within 2..=8");
        }
        if !(self.lane_width > 2.0 * CROSSING_THRESHOLD) {
            return bad("lane_width too small");
        }
        if !(0.0..=1.0).contains(&self.maneuver_rate) || !(0.0..=1.0).contains(&self.ramp_fraction) {
            return bad("rates must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.confuser_rate) {
            return bad("confuser_rate must lie in [0, 1]");
        }
        if self.class_skew.iter().any(|r| !(*r > 0.0)) {
            return bad("class_skew ratios must be positive");
        }
        if !(self.noise_std >= 0.0) || !(self.sampling_rate > 0.0) || !(self.cue_lead_s >= 0.0) {
            return bad("noise_std, cue_lead_s must be nonnegative and sampling_rate positive");
        }
        if !(self.reference_history_s > 0.0 && self.reference_horizon_s > 0.0) {
            return bad("reference history/horizon must be positive");
        }
        Ok(())
    }

    fn is_ramp_location(&self, location: usize) -> bool {
        let f = self.ramp_fraction;
        ((location + 1) as f64 * f).floor() > (location as f64 * f).floor()
    }
}

/// Synthesize one recording per location.
pub fn synthesize_corpus(
    cfg: &SynthConfig,
) -> Result<Vec<(Recording, Vec<LaneChangeEvent>)>, IngestError> {
    (0..cfg.n_locations)
        .map(|loc| synthesize_recording(cfg, loc as u32))
        .collect()
}

#[derive(Clone, Copy)]
struct Wave {
    amp: f64,
    freq: f64,
    phase: f64,
}

impl Wave {
    fn random(rng: &mut ChaCha8Rng, amp: f64, lo: f64, hi: f64) -> Self {
        Wave {
            amp,
            freq: rng.gen_range(lo..hi),
            phase: rng.gen_range(0.0..2.0 * PI),
        }
    }

    fn eval(&self, t: f64) -> (f64, f64, f64) {
        let w = 2.0 * PI * self.freq;
        let arg = w * t + self.phase;
        (
            self.amp * arg.sin(),
            self.amp * w * arg.cos(),
            -self.amp * w * w * arg.sin(),
        )
    }
}

#[derive(Clone, Copy)]
struct Maneuver {
    direction: Direction,
    onset: usize,
    duration: usize,
}

#[derive(Clone, Copy)]
struct Cue {
    start: usize,
    end: usize,
    accel: f64,
}

struct VehiclePlan {
    class: VehicleClass,
    lane: usize,
    x0: f64,
    v0: f64,
    n_frames: usize,
    wander: [Wave; 3],
    accel_noise: Wave,
    maneuver: Option<Maneuver>,
    confuser_cue: Option<Cue>,
}

/// Generated kinematics, indexed by frame offset within the scene.
struct Kinematics {
    x: Vec<f64>,
    y: Vec<f64>,
    vx: Vec<f64>,
    vy: Vec<f64>,
    ax: Vec<f64>,
    ay: Vec<f64>,
    lane: Vec<usize>,
    /// Ground-truth (start, end) offsets.
    event: Option<(usize, usize, Direction)>,
}

fn min_jerk(s: f64) -> (f64, f64, f64) {
    let s = s.clamp(0.0, 1.0);
    let p = 10.0 * s.powi(3) - 15.0 * s.powi(4) + 6.0 * s.powi(5);
    let v = 30.0 * s * s * (1.0 - s) * (1.0 - s);
    let a = 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s);
    (p, v, a)
}

fn lane_of(y: f64, width: f64, lanes: usize) -> usize {
    ((y / width).floor() as i64 + 1).clamp(1, lanes as i64) as usize
}

fn center_of(lane: usize, width: f64) -> f64 {
    (lane as f64 - 0.5) * width
}

fn simulate(plan: &VehiclePlan, cfg: &SynthConfig) -> Kinematics {
    let fs = cfg.sampling_rate;
    let w = cfg.lane_width;
    let n = plan.n_frames;
    let base = center_of(plan.lane, w);

    let mut y = Vec::with_capacity(n);
    let mut vy = Vec::with_capacity(n);
    let mut ay = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / fs;
        let (mut p, mut v, mut a) = plan.wander.iter().fold((0.0, 0.0, 0.0), |acc, wave| {
            let (p, v, a) = wave.eval(t);
            (acc.0 + p, acc.1 + v, acc.2 + a)
        });
        if let Some(m) = plan.maneuver {
            let dur_s = m.duration as f64 / fs;
            let s = (i as f64 - m.onset as f64) / m.duration as f64;
            let sign = m.direction.sign();
            let (mp, mv, ma) = min_jerk(s);
            let inside = (0.0..=1.0).contains(&s);
            p += sign * w * mp;
            if inside {
                v += sign * w * mv / dur_s;
                a += sign * w * ma / (dur_s * dur_s);
            }
        }
        y.push(base + p);
        vy.push(v);
        ay.push(a);
    }
    let lane: Vec<usize> = y.iter().map(|&yy| lane_of(yy, w, cfg.lane_count)).collect();

    let event = plan.maneuver.map(|m| {
        let sign = m.direction.sign();
        let start = (m.onset..n)
            .find(|&i| sign * (y[i] - base) >= CROSSING_THRESHOLD)
            .expect("maneuver crosses threshold within the track");
        let target = (plan.lane as i64 + sign as i64) as usize;
        let end = (start..n)
            .find(|&i| lane[i] == target)
            .expect("maneuver reaches the adjacent lane within the track");
        (start, end, m.direction)
    });

    let mut cues: Vec<Cue> = plan.confuser_cue.into_iter().collect();
    if let Some((start, _, dir)) = event {
        let lead = (cfg.cue_lead_s * fs).round() as usize;
        cues.push(Cue {
            start: start.saturating_sub(lead),
            end: start,
            accel: match dir {
                Direction::Left => LEFT_CUE_ACCEL,
                Direction::Right => RIGHT_CUE_ACCEL,
            },
        });
    }

    let mut x = Vec::with_capacity(n);
    let mut vx = Vec::with_capacity(n);
    let mut ax = Vec::with_capacity(n);
    let (mut xi, mut vi) = (plan.x0, plan.v0);
    for i in 0..n {
        let t = i as f64 / fs;
        let cue: f64 = cues
            .iter()
            .filter(|c| (c.start..c.end).contains(&i))
            .map(|c| c.accel)
            .sum();
        let a = plan.accel_noise.eval(t).0 + cue;
        x.push(xi);
        vx.push(vi);
        ax.push(a);
        xi += vi / fs + 0.5 * a / (fs * fs);
        vi += a / fs;
    }

    Kinematics {
        x,
        y,
        vx,
        vy,
        ax,
        ay,
        lane,
        event,
    }
}

/// Window label counts `(no_lc, positive)` a track of `n` frames yields at
/// `w` history and `t` horizon frames with stride 1.
fn reference_counts(n: usize, events: &[(usize, usize)], w: usize, t: usize) -> (usize, usize) {
    if n < w + t {
        return (0, 0);
    }
    let (mut neg, mut pos) = (0, 0);
    for p in (w - 1)..n {
        if events.iter().any(|&(s, e)| s <= p && e + w > p) {
            continue;
        }
        if events.iter().any(|&(s, _)| s > p && s <= p + t) {
            pos += 1;
        } else if p + t < n {
            neg += 1;
        }
    }
    (neg, pos)
}

struct SceneVehicle {
    plan: VehiclePlan,
    kin: Kinematics,
}

struct Scene {
    vehicles: Vec<SceneVehicle>,
}

impl Scene {
    fn len(&self) -> usize {
        self.vehicles.iter().map(|v| v.plan.n_frames).max().unwrap_or(0)
    }
}

struct Planner<'a> {
    cfg: &'a SynthConfig,
    rng: ChaCha8Rng,
}

impl Planner<'_> {
    fn frames(&self, seconds: f64) -> usize {
        (seconds * self.cfg.sampling_rate).round() as usize
    }

    fn wander(&mut self) -> [Wave; 3] {
        let amp = self.cfg.noise_std.min(MAX_WANDER_STD) / 1.5f64.sqrt();
        [
            Wave::random(&mut self.rng, amp, 0.02, 0.1),
            Wave::random(&mut self.rng, amp, 0.02, 0.1),
            Wave::random(&mut self.rng, amp, 0.02, 0.1),
        ]
    }

    fn vehicle(&mut self, lane: usize, x0: f64, v0: f64, n_frames: usize) -> VehiclePlan {
        let class = if self.rng.gen_bool(0.15) {
            VehicleClass::Truck
        } else {
            VehicleClass::Car
        };
        let wander = self.wander();
        let accel_noise = Wave::random(&mut self.rng, 0.15, 0.05, 0.3);
        VehiclePlan {
            class,
            lane,
            x0,
            v0,
            n_frames,
            wander,
            accel_noise,
            maneuver: None,
            confuser_cue: None,
        }
    }

    fn maneuver_scene(&mut self, direction: Direction, extra_lead: usize) -> Scene {
        let lanes = self.cfg.lane_count;
        let lane = match direction {
            Direction::Left => self.rng.gen_range(1..lanes),
            Direction::Right => self.rng.gen_range(2..=lanes),
        };
        let onset = self.frames(4.0) + extra_lead;
        let duration_s = self.rng.gen_range(4.0..5.5);
        let duration = self.frames(duration_s);
        let n = onset + duration + self.frames(2.0);
        let v0 = self.rng.gen_range(26.0..32.0);
        let x0 = self.rng.gen_range(120.0..200.0);

        let mut ego = self.vehicle(lane, x0, v0, n);
        ego.maneuver = Some(Maneuver {
            direction,
            onset,
            duration,
        });
        let companion = match direction {
            Direction::Left => {
                let gap = self.rng.gen_range(40.0..60.0);
                let dv = self.rng.gen_range(1.0..2.5);
                self.vehicle(lane, x0 + gap, v0 - dv, n)
            }
            Direction::Right => {
                let gap = self.rng.gen_range(45.0..65.0);
                let dv = self.rng.gen_range(1.0..2.5);
                self.vehicle(lane, x0 - gap, v0 + dv, n)
            }
        };
        let vehicles = [ego, companion]
            .into_iter()
            .map(|plan| SceneVehicle {
                kin: simulate(&plan, self.cfg),
                plan,
            })
            .collect();
        Scene { vehicles }
    }

    fn lane_keep_scene(&mut self, lengths: &[usize]) -> Scene {
        let lanes = self.cfg.lane_count;
        let mut next_x = vec![self.rng.gen_range(0.0..60.0); lanes + 1];
        let lane_speed: Vec<f64> = (0..=lanes).map(|_| self.rng.gen_range(23.0..33.0)).collect();
        let mut vehicles = Vec::new();
        for &n in lengths {
            let lane = self.rng.gen_range(1..=lanes);
            let x0 = next_x[lane];
            next_x[lane] += self.rng.gen_range(45.0..90.0);
            let v0 = lane_speed[lane] + self.rng.gen_range(-0.3..0.3);
            let mut plan = self.vehicle(lane, x0, v0, n);
            if self.cfg.confuser_rate > 0.0 && self.rng.gen_bool(self.cfg.confuser_rate) && n > 2 {
                let len = self.frames(self.cfg.cue_lead_s).max(1);
                let start = self.rng.gen_range(0..n);
                plan.confuser_cue = Some(Cue {
                    start,
                    end: (start + len).min(n),
                    accel: if self.rng.gen_bool(0.5) {
                        LEFT_CUE_ACCEL
                    } else {
                        RIGHT_CUE_ACCEL
                    },
                });
            }
            vehicles.push(SceneVehicle {
                kin: simulate(&plan, self.cfg),
                plan,
            });
        }
        Scene { vehicles }
    }
}

fn scene_reference_counts(scene: &Scene, w: usize, t: usize) -> (usize, usize) {
    scene.vehicles.iter().fold((0, 0), |acc, v| {
        let events: Vec<(usize, usize)> = v.kin.event.iter().map(|&(s, e, _)| (s, e)).collect();
        let (neg, pos) = reference_counts(v.plan.n_frames, &events, w, t);
        (acc.0 + neg, acc.1 + pos)
    })
}

/// Synthesize the recording of one location together with its ground-truth events.
pub fn synthesize_recording(
    cfg: &SynthConfig,
    location_id: u32,
) -> Result<(Recording, Vec<LaneChangeEvent>), IngestError> {
    cfg.validate()?;
    let seed = cfg
        .seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(location_id as u64 + 1);
    let mut planner = Planner {
        cfg,
        rng: ChaCha8Rng::seed_from_u64(seed),
    };

    let n_tracks = cfg.tracks_per_location;
    let n_maneuvers = (cfg.maneuver_rate * n_tracks as f64).round() as usize;
    if 2 * n_maneuvers > n_tracks {
        return Err(IngestError::InfeasibleConfig(format!(
            "{n_maneuvers} maneuvers need {} tracks (ego + companion) but only {n_tracks} available",
            2 * n_maneuvers
        )));
    }
    let [skew_none, skew_left, skew_right] = cfg.class_skew;
    let n_left = (n_maneuvers as f64 * skew_left / (skew_left + skew_right)).round() as usize;
    let mut directions: Vec<Direction> = (0..n_maneuvers)
        .map(|i| {
            if i < n_left {
                Direction::Left
            } else {
                Direction::Right
            }
        })
        .collect();
    // deterministic interleave so both directions spread across the recording
    for i in (1..directions.len()).rev() {
        let j = planner.rng.gen_range(0..=i);
        directions.swap(i, j);
    }

    let w_ref = planner.frames(cfg.reference_history_s).max(1);
    let t_ref = planner.frames(cfg.reference_horizon_s).max(1);
    let n_keep = n_tracks - 2 * n_maneuvers;

    let mut scenes: Vec<Scene> = directions
        .iter()
        .map(|&d| planner.maneuver_scene(d, 0))
        .collect();
    let (mut scene_neg, scene_pos) = scenes
        .iter()
        .map(|s| scene_reference_counts(s, w_ref, t_ref))
        .fold((0, 0), |a, b| (a.0 + b.0, a.1 + b.1));

    let default_len = planner.frames(12.0);
    let mut keep_lengths = vec![default_len; n_keep];
    if n_maneuvers > 0 {
        let quota = scene_pos as f64 * skew_none / (skew_left + skew_right);
        let mut remaining = quota - scene_neg as f64;
        if remaining < -0.1 * quota {
            return Err(IngestError::InfeasibleConfig(format!(
                "maneuver scenes alone yield {scene_neg} No-LC windows, above the target {quota:.0}; \
                 raise the No-LC share of class_skew"
            )));
        }
        if n_keep == 0 && remaining > 0.0 {
            let extra = (remaining / (2 * n_maneuvers) as f64).ceil() as usize;
            scenes = directions
                .iter()
                .map(|&d| planner.maneuver_scene(d, extra))
                .collect();
            scene_neg = scenes
                .iter()
                .map(|s| scene_reference_counts(s, w_ref, t_ref).0)
                .sum();
            remaining = quota - scene_neg as f64;
        }
        if n_keep > 0 {
            // windows per lane-keeping track, largest remainder so the total is exact
            let total = remaining.max(0.0).round() as usize;
            let base = total / n_keep;
            let extra = total % n_keep;
            for (i, len) in keep_lengths.iter_mut().enumerate() {
                let windows = base + usize::from(i < extra);
                *len = if windows == 0 {
                    (w_ref + t_ref - 1).max(2)
                } else {
                    windows + w_ref + t_ref - 1
                };
            }
        }
    }
    for chunk in keep_lengths.chunks(3) {
        scenes.push(planner.lane_keep_scene(chunk));
    }
    // interleave maneuver and lane-keeping scenes along the timeline
    for i in (1..scenes.len()).rev() {
        let j = planner.rng.gen_range(0..=i);
        scenes.swap(i, j);
    }

    let kind = if cfg.is_ramp_location(location_id as usize) {
        DatasetKind::Ramp
    } else {
        DatasetKind::Straight
    };
    assemble(cfg, location_id, kind, &scenes)
}

fn lane_id(kind: DatasetKind, lane: usize) -> i32 {
    match kind {
        DatasetKind::Straight => lane as i32,
        DatasetKind::Ramp => RAMP_LANE_IDS[lane - 1],
    }
}

fn assemble(
    cfg: &SynthConfig,
    location_id: u32,
    kind: DatasetKind,
    scenes: &[Scene],
) -> Result<(Recording, Vec<LaneChangeEvent>), IngestError> {
    let w = cfg.lane_width;
    let mut tracks = Vec::new();
    let mut events = Vec::new();
    let mut clock: u32 = 0;
    let mut next_id: u32 = 1;

    for scene in scenes {
        let ids: Vec<u32> = (0..scene.vehicles.len() as u32).map(|i| next_id + i).collect();
        next_id += scene.vehicles.len() as u32;
        for (vi, v) in scene.vehicles.iter().enumerate() {
            let k = &v.kin;
            let mut frames = Vec::with_capacity(v.plan.n_frames);
            for i in 0..v.plan.n_frames {
                let lane = k.lane[i];
                let offset = k.y[i] - center_of(lane, w);
                let mut neighbors = Neighbors::default();
                let mut nearest = [f64::INFINITY; 8];
                let mut lead_speed = None;
                for (oi, o) in scene.vehicles.iter().enumerate() {
                    if oi == vi || i >= o.plan.n_frames {
                        continue;
                    }
                    let dx = o.kin.x[i] - k.x[i];
                    let rel = o.kin.lane[i] as i64 - lane as i64;
                    let pos = match (rel, dx) {
                        (0, d) if d > 0.0 => NeighborPosition::Lead,
                        (0, _) => NeighborPosition::Rear,
                        (1, d) if d > ALONG_RANGE => NeighborPosition::LeftLead,
                        (1, d) if d < -ALONG_RANGE => NeighborPosition::LeftRear,
                        (1, _) => NeighborPosition::LeftAlong,
                        (-1, d) if d > ALONG_RANGE => NeighborPosition::RightLead,
                        (-1, d) if d < -ALONG_RANGE => NeighborPosition::RightRear,
                        (-1, _) => NeighborPosition::RightAlong,
                        _ => continue,
                    };
                    if dx.abs() < nearest[pos.index()] {
                        nearest[pos.index()] = dx.abs();
                        neighbors.set(pos, Some(ids[oi]));
                        if pos == NeighborPosition::Lead {
                            lead_speed = Some(o.kin.vx[i]);
                        }
                    }
                }
                let speed = k.vx[i];
                let dhw = neighbors
                    .get(NeighborPosition::Lead)
                    .map(|_| nearest[NeighborPosition::Lead.index()]);
                let thw = dhw.filter(|_| speed > 0.1).map(|d| d / speed);
                let ttc = match (dhw, lead_speed) {
                    (Some(d), Some(vl)) if speed - vl > 1e-3 => Some(d / (speed - vl)),
                    _ => None,
                };
                let ramp_meta = (kind == DatasetKind::Ramp).then(|| {
                    let dist_to_exit = RAMP_EXIT_X - k.x[i];
                    RampMeta {
                        dist_to_entry: k.x[i] - RAMP_ENTRY_X,
                        dist_to_exit,
                        eta_exit: dist_to_exit / speed.max(0.1),
                    }
                });
                frames.push(Frame {
                    frame_index: clock + i as u32,
                    x: k.x[i],
                    y: k.y[i],
                    x_velocity: k.vx[i],
                    y_velocity: k.vy[i],
                    x_acceleration: k.ax[i],
                    y_acceleration: k.ay[i],
                    lat_velocity: k.vy[i],
                    lane_id: lane_id(kind, lane),
                    lateral_lane_offset: offset,
                    dist_left_boundary: lane as f64 * w - k.y[i],
                    dist_right_boundary: k.y[i] - (lane as f64 - 1.0) * w,
                    dhw,
                    thw,
                    ttc,
                    neighbors,
                    ramp_meta,
                });
            }
            if let Some((s, e, direction)) = k.event {
                events.push(LaneChangeEvent {
                    track_id: ids[vi],
                    start_frame: clock + s as u32,
                    end_frame: clock + e as u32,
                    direction,
                    lane_before: lane_id(kind, k.lane[s]),
                    lane_after: lane_id(kind, k.lane[e]),
                });
            }
            tracks.push(Track {
                track_id: ids[vi],
                vehicle_class: v.plan.class,
                frames,
            });
        }
        clock += scene.len() as u32 + 10;
    }

    let rec = Recording {
        recording_id: location_id + 1,
        location_id,
        sampling_rate: cfg.sampling_rate,
        dataset_kind: kind,
        speed_limit: cfg.speed_limit,
        tracks,
    };
    rec.validate()?;
    events.sort_by_key(|e| (e.track_id, e.start_frame));
    Ok((rec, events))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_maneuver_rate_yields_no_events() {
        let cfg = SynthConfig {
            maneuver_rate: 0.0,
            tracks_per_location: 12,
            ..SynthConfig::default()
        };
        let (rec, events) = synthesize_recording(&cfg, 0).unwrap();
        assert!(events.is_empty());
        assert_eq!(rec.tracks.len(), 12);
    }

    #[test]
    fn same_seed_same_recording() {
        let cfg = SynthConfig {
            seed: 7,
            tracks_per_location: 40,
            maneuver_rate: 0.2,
            class_skew: [60.0, 1.0, 1.0],
            ..SynthConfig::default()
        };
        let a = synthesize_recording(&cfg, 2).unwrap();
        let b = synthesize_recording(&cfg, 2).unwrap();
        assert_eq!(a, b);
        let c = synthesize_recording(&SynthConfig { seed: 8, ..cfg }, 2).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn too_many_maneuvers_is_infeasible() {
        let cfg = SynthConfig {
            maneuver_rate: 0.8,
            tracks_per_location: 10,
            ..SynthConfig::default()
        };
        assert!(matches!(
            synthesize_recording(&cfg, 0),
            Err(IngestError::InfeasibleConfig(_))
        ));
    }

    #[test]
    fn balanced_skew_is_infeasible() {
        let cfg = SynthConfig {
            maneuver_rate: 0.2,
            tracks_per_location: 20,
            class_skew: [1.0, 1.0, 1.0],
            ..SynthConfig::default()
        };
        assert!(matches!(
            synthesize_recording(&cfg, 0),
            Err(IngestError::InfeasibleConfig(_))
        ));
    }

    #[test]
    fn reference_counts_match_hand_count() {
        // 10 frames, history 2, horizon 2, event at 5..6
        // anchors 1..=9: 1,2 NoLC; 3,4 positive; 5..=7 dropped; 8 lacks horizon? 8+2=10 > 9
        assert_eq!(reference_counts(10, &[(5, 6)], 2, 2), (2, 2));
        assert_eq!(reference_counts(10, &[], 2, 2), (7, 0));
        assert_eq!(reference_counts(3, &[], 2, 2), (0, 0));
    }

    #[test]
    fn ramp_lane_ids_are_not_sequential() {
        let cfg = SynthConfig {
            ramp_fraction: 1.0,
            tracks_per_location: 30,
            maneuver_rate: 0.2,
            class_skew: [80.0, 1.0, 1.0],
            ..SynthConfig::default()
        };
        let (rec, events) = synthesize_recording(&cfg, 0).unwrap();
        assert_eq!(rec.dataset_kind, DatasetKind::Ramp);
        assert!(rec.tracks[0].frames[0].ramp_meta.is_some());
        let disagree = events.iter().any(|e| {
            (e.lane_before < e.lane_after) != (e.direction == Direction::Left)
        });
        assert!(disagree);
    }
}

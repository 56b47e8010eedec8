//! Physics-informed window features.
//!
//! Every feature of a window is computed from the ego track's history up to
//! and including the anchor frame, plus the neighbor frames at the anchor.
//! Groups, in schema order: kinematics (121), lane (13), interaction (96),
//! safety (6), behavioral (7), and on ramp recordings the ramp group (21).

mod neighbors;
pub mod temporal;

use std::fmt;
use std::sync::OnceLock;

use thiserror::Error;

use crate::ingest::{
    DatasetKind, Frame, NeighborPosition, Neighbors, Recording, Track, VehicleClass,
};
use crate::labeling::LaneChangeEvent;

pub use neighbors::{fit_neighbor_stats, gap, resolve_neighbors, NeighborStats, PositionStats};
use temporal::{max, mean, min, std, write_descriptors};

pub const STRAIGHT_WIDTH: usize = 243;
pub const RAMP_WIDTH: usize = 264;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("{got} frame(s) in the window; at least {needed} required")]
    TooFewFrames { needed: usize, got: usize },
    #[error("expected {expected} features, found {found}")]
    SchemaMismatch { expected: usize, found: usize },
    #[error("anchor frame {frame} does not have a full history in track {track_id}")]
    AnchorOutOfRange { track_id: u32, frame: u32 },
    #[error("{0}")]
    Parse(String),
}

/// Collects feature values in order, and their names when building a schema.
#[derive(Debug, Default)]
pub struct FeatureWriter {
    names: Option<Vec<String>>,
    values: Vec<Option<f64>>,
    masked: bool,
}

impl FeatureWriter {
    pub fn new() -> Self {
        FeatureWriter::default()
    }

    pub fn with_names() -> Self {
        FeatureWriter {
            names: Some(Vec::new()),
            ..FeatureWriter::default()
        }
    }

    /// Non-finite values are stored as missing.
    pub fn put(&mut self, name: fmt::Arguments<'_>, value: Option<f64>) {
        if let Some(names) = &mut self.names {
            names.push(name.to_string());
        }
        let value = if self.masked { None } else { value };
        self.values.push(value.filter(|v| v.is_finite()));
    }

    fn put_flag(&mut self, name: fmt::Arguments<'_>, flag: Option<bool>) {
        self.put(name, flag.map(|b| f64::from(u8::from(b))));
    }

    /// Run `f` with every value it writes replaced by missing.
    fn masked(&mut self, f: impl FnOnce(&mut Self)) {
        let prev = self.masked;
        self.masked = true;
        f(self);
        self.masked = prev;
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Option<f64>> {
        self.values
    }

    /// Value by name; only available on a writer created with names.
    pub fn get(&self, name: &str) -> Option<Option<f64>> {
        let names = self.names.as_ref()?;
        names.iter().position(|n| n == name).map(|i| self.values[i])
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub kind: DatasetKind,
    pub values: Vec<Option<f64>>,
}

impl FeatureVector {
    pub fn names(&self) -> &'static [String] {
        schema(self.kind)
    }
}

/// Wrap raw values into a vector of the given kind's schema.
pub fn assemble(kind: DatasetKind, values: Vec<Option<f64>>) -> Result<FeatureVector, FeatureError> {
    let expected = schema(kind).len();
    if values.len() != expected {
        return Err(FeatureError::SchemaMismatch {
            expected,
            found: values.len(),
        });
    }
    Ok(FeatureVector { kind, values })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureParams {
    /// Stabilizer of the closing-gap time denominator (m/s).
    pub eps: f64,
    /// Time after an event end before it counts towards the lane-change frequency.
    pub settle_s: f64,
}

impl Default for FeatureParams {
    fn default() -> Self {
        FeatureParams {
            eps: 1e-6,
            settle_s: 1.0,
        }
    }
}

/// Everything one track's windows need besides the anchor.
#[derive(Debug, Clone, Copy)]
pub struct FeatureContext<'a> {
    pub recording: &'a Recording,
    pub track: &'a Track,
    /// Lane changes of this track (other tracks' events are ignored).
    pub events: &'a [LaneChangeEvent],
    pub stats: &'a NeighborStats,
    pub params: FeatureParams,
}

/// Feature vector of the window of `history_frames` frames ending at `anchor_frame`.
pub fn extract(
    ctx: &FeatureContext<'_>,
    anchor_frame: u32,
    history_frames: usize,
) -> Result<FeatureVector, FeatureError> {
    let mut w = FeatureWriter::new();
    write_all(&mut w, ctx, anchor_frame, history_frames)?;
    assemble(ctx.recording.dataset_kind, w.into_values())
}

/// [`extract`], keeping names for inspection.
pub fn extract_named(
    ctx: &FeatureContext<'_>,
    anchor_frame: u32,
    history_frames: usize,
) -> Result<FeatureWriter, FeatureError> {
    let mut w = FeatureWriter::with_names();
    write_all(&mut w, ctx, anchor_frame, history_frames)?;
    Ok(w)
}

fn write_all(
    w: &mut FeatureWriter,
    ctx: &FeatureContext<'_>,
    anchor_frame: u32,
    history_frames: usize,
) -> Result<(), FeatureError> {
    let track = ctx.track;
    let out_of_range = || FeatureError::AnchorOutOfRange {
        track_id: track.track_id,
        frame: anchor_frame,
    };
    let p = track.position_of(anchor_frame).ok_or_else(out_of_range)?;
    if history_frames == 0 || p + 1 < history_frames {
        return Err(out_of_range());
    }
    let window = &track.frames[p + 1 - history_frames..=p];
    let fs = ctx.recording.sampling_rate;
    let anchor = &track.frames[p];

    kinematics_features(w, window, fs)?;
    lane_features(w, window, fs);
    let nbs = resolve_neighbors(ctx.recording, anchor);
    interaction_features(w, anchor, &nbs, ctx.stats, ctx.params.eps);
    safety_features(w, window);
    behavioral_features(w, ctx, p, window);
    if ctx.recording.dataset_kind == DatasetKind::Ramp {
        ramp_features(w, window, fs);
    }
    Ok(())
}

fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    (a + std::f64::consts::PI).rem_euclid(two_pi) - std::f64::consts::PI
}

fn write_stats(w: &mut FeatureWriter, prefix: &str, x: &[f64]) {
    w.put(format_args!("{prefix}_mean"), Some(mean(x)));
    w.put(format_args!("{prefix}_std"), Some(std(x)));
    w.put(format_args!("{prefix}_min"), Some(min(x)));
    w.put(format_args!("{prefix}_max"), Some(max(x)));
}

fn last_seconds(x: &[f64], fs: f64, seconds: f64) -> &[f64] {
    let n = ((seconds * fs).round() as usize).clamp(1, x.len());
    &x[x.len() - n..]
}

/// Kinematic state, rolling and window statistics, and temporal descriptors.
pub fn kinematics_features(
    w: &mut FeatureWriter,
    window: &[Frame],
    fs: f64,
) -> Result<(), FeatureError> {
    if window.len() < 2 {
        return Err(FeatureError::TooFewFrames {
            needed: 2,
            got: window.len(),
        });
    }
    let series = |f: fn(&Frame) -> f64| -> Vec<f64> { window.iter().map(f).collect() };
    let speed = series(Frame::speed);
    let accel = series(Frame::acceleration_magnitude);
    let heading = series(|f| f.y_velocity.atan2(f.x_velocity));
    let lat_v = series(|f| f.lat_velocity);
    let n = window.len();
    let a = &window[n - 1];

    let yaw_rate = wrap_angle(heading[n - 1] - heading[n - 2]) * fs;
    w.put(format_args!("speed"), Some(speed[n - 1]));
    w.put(format_args!("accel_magnitude"), Some(accel[n - 1]));
    w.put(format_args!("heading"), Some(heading[n - 1]));
    w.put(format_args!("yaw_rate"), Some(yaw_rate));
    w.put(
        format_args!("curvature_radius"),
        (yaw_rate.abs() >= 1e-6).then(|| speed[n - 1] / yaw_rate.abs()),
    );
    w.put(format_args!("x_velocity"), Some(a.x_velocity));
    w.put(format_args!("y_velocity"), Some(a.y_velocity));
    w.put(format_args!("x_acceleration"), Some(a.x_acceleration));
    w.put(format_args!("y_acceleration"), Some(a.y_acceleration));
    w.put(format_args!("lat_velocity"), Some(a.lat_velocity));

    for (name, x) in [
        ("speed", &speed),
        ("accel_magnitude", &accel),
        ("heading", &heading),
        ("lat_velocity", &lat_v),
    ] {
        write_stats(w, &format!("{name}_1s"), last_seconds(x, fs, 1.0));
    }
    let x_acc = series(|f| f.x_acceleration);
    for (name, x) in [("speed", &speed), ("lat_velocity", &lat_v), ("x_acceleration", &x_acc)] {
        write_stats(w, &format!("{name}_window"), x);
    }

    let temporal: [(&str, Vec<f64>); 7] = [
        ("speed", speed.clone()),
        ("x_velocity", series(|f| f.x_velocity)),
        ("y_velocity", series(|f| f.y_velocity)),
        ("x_acceleration", x_acc),
        ("y_acceleration", series(|f| f.y_acceleration)),
        ("accel_magnitude", accel),
        ("lat_velocity", lat_v.clone()),
    ];
    for (name, x) in &temporal {
        write_descriptors(w, &format!("ts_{name}"), x, fs);
    }

    let ttc: Vec<Option<f64>> = window.iter().map(|f| f.ttc).collect();
    for threshold in [3.0, 5.0] {
        let (count, frames) = temporal::episodes_below(&ttc, threshold);
        w.put(format_args!("ttc_lt{threshold}_count"), Some(count as f64));
        w.put(format_args!("ttc_lt{threshold}_duration"), Some(frames as f64 / fs));
    }
    w.put(
        format_args!("lateral_energy"),
        Some(lat_v.iter().map(|v| v * v).sum::<f64>() / fs),
    );
    let near = a.dist_left_boundary.min(a.dist_right_boundary);
    w.put(
        format_args!("time_to_boundary"),
        (a.lat_velocity.abs() >= 1e-3).then(|| near / a.lat_velocity.abs()),
    );
    Ok(())
}

/// Lane position, boundary distances, their derivatives and drift totals.
pub fn lane_features(w: &mut FeatureWriter, window: &[Frame], fs: f64) {
    let n = window.len();
    let a = &window[n - 1];
    w.put(format_args!("lane_id"), Some(a.lane_id as f64));
    w.put(format_args!("lane_width"), Some(a.lane_width()));
    w.put(format_args!("lateral_offset"), Some(a.lateral_lane_offset));
    w.put(format_args!("dist_left_boundary"), Some(a.dist_left_boundary));
    w.put(format_args!("dist_right_boundary"), Some(a.dist_right_boundary));

    let derivs = (n >= 2).then(|| {
        let b = &window[n - 2];
        if a.lane_id == b.lane_id {
            (
                (a.lateral_lane_offset - b.lateral_lane_offset) * fs,
                (a.dist_left_boundary - b.dist_left_boundary) * fs,
                (a.dist_right_boundary - b.dist_right_boundary) * fs,
            )
        } else {
            let dy = (a.y - b.y) * fs;
            (dy, -dy, dy)
        }
    });
    w.put(format_args!("lateral_offset_rate"), derivs.map(|d| d.0));
    w.put(format_args!("dist_left_boundary_rate"), derivs.map(|d| d.1));
    w.put(format_args!("dist_right_boundary_rate"), derivs.map(|d| d.2));

    let series = |f: fn(&Frame) -> f64| -> Vec<f64> { window.iter().map(f).collect() };
    for (name, x) in [
        ("lateral_offset", series(|f| f.lateral_lane_offset)),
        ("dist_left_boundary", series(|f| f.dist_left_boundary)),
        ("dist_right_boundary", series(|f| f.dist_right_boundary)),
    ] {
        w.put(format_args!("{name}_1s_mean"), Some(mean(last_seconds(&x, fs, 1.0))));
    }
    let cumulative: f64 = window.windows(2).map(|p| (p[1].y - p[0].y).abs()).sum();
    w.put(format_args!("cumulative_lateral_displacement"), Some(cumulative));
    w.put(format_args!("net_lateral_displacement"), Some(a.y - window[0].y));
}

/// Per-neighbor gap descriptors, safe-gap indicators and adjacent-lane availability.
pub fn interaction_features(
    w: &mut FeatureWriter,
    ego: &Frame,
    neighbors: &[Option<&Frame>; 8],
    stats: &NeighborStats,
    eps: f64,
) {
    let speed = ego.speed();
    let mut dist = [None; 8];
    let mut safe_count = 0;
    for pos in NeighborPosition::ALL {
        let k = pos.key();
        let nb = neighbors[pos.index()];
        let st = stats.get(pos);
        let d = nb.map(|o| gap(ego, o));
        dist[pos.index()] = d;
        let dv = nb.map(|o| o.x_velocity - ego.x_velocity);
        w.put(format_args!("{k}_d"), d);
        w.put(format_args!("{k}_long_gap"), nb.map(|o| o.x - ego.x));
        w.put(format_args!("{k}_lat_gap"), nb.map(|o| o.y - ego.y));
        w.put(format_args!("{k}_dv"), dv);
        w.put(format_args!("{k}_da"), nb.map(|o| o.x_acceleration - ego.x_acceleration));
        let approach = nb.zip(d).filter(|(_, d)| *d > 0.0).map(|(o, d)| {
            let (dx, dy) = (o.x - ego.x, o.y - ego.y);
            let (dvx, dvy) = (o.x_velocity - ego.x_velocity, o.y_velocity - ego.y_velocity);
            -(dx * dvx + dy * dvy) / d
        });
        w.put(format_args!("{k}_approach_rate"), approach);
        w.put(
            format_args!("{k}_z"),
            d.zip(st).filter(|(_, s)| s.sigma > 0.0).map(|(d, s)| (d - s.mu) / s.sigma),
        );
        w.put(
            format_args!("{k}_s"),
            d.zip(st).filter(|(_, s)| s.mu != 0.0).map(|(d, s)| d / s.mu),
        );
        let safe = d.zip(st).map(|(d, s)| d > s.mu + 2.0 * s.sigma);
        if safe == Some(true) {
            safe_count += 1;
        }
        w.put_flag(format_args!("{k}_safe_gap"), safe);
        let time_z = d
            .filter(|_| speed >= neighbors::MIN_SPEED)
            .zip(st)
            .filter(|(_, s)| s.time_sigma > 0.0)
            .map(|(d, s)| (d / speed - s.time_mu) / s.time_sigma);
        w.put(format_args!("{k}_time_gap_z"), time_z);
        w.put(
            format_args!("{k}_cgt"),
            d.zip(dv).map(|(d, dv)| closing_gap_time(d, dv, eps)),
        );
    }
    w.put(format_args!("safe_gap_count"), Some(safe_count as f64));
    let present = neighbors.iter().filter(|n| n.is_some()).count();
    w.put(format_args!("occupancy_ratio"), Some(present as f64 / 8.0));

    use NeighborPosition as P;
    for (side, lead, rear) in [
        ("left", P::LeftLead, P::LeftRear),
        ("right", P::RightLead, P::RightRear),
    ] {
        let (delta_lead, delta_rear, score) = lane_advantage(
            dist[lead.index()],
            dist[P::Lead.index()],
            dist[rear.index()],
            dist[P::Rear.index()],
        );
        w.put(format_args!("{side}_delta_lead"), delta_lead);
        w.put(format_args!("{side}_delta_rear"), delta_rear);
        w.put(format_args!("{side}_availability"), score);
    }
}

/// Time for the current speed difference to close the gap.
pub fn closing_gap_time(d: f64, dv: f64, eps: f64) -> f64 {
    d / (dv.abs() + eps)
}

/// Gap surplus of an adjacent lane over the ego lane, ahead and behind, and their minimum.
pub fn lane_advantage(
    side_lead: Option<f64>,
    ego_lead: Option<f64>,
    side_rear: Option<f64>,
    ego_rear: Option<f64>,
) -> (Option<f64>, Option<f64>, Option<f64>) {
    let lead = side_lead.zip(ego_lead).map(|(a, b)| a - b);
    let rear = side_rear.zip(ego_rear).map(|(a, b)| a - b);
    (lead, rear, lead.zip(rear).map(|(a, b)| a.min(b)))
}

fn min_present(x: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    x.flatten().reduce(f64::min)
}

/// Minimum headways over the window and their anchor values.
pub fn safety_features(w: &mut FeatureWriter, window: &[Frame]) {
    let a = &window[window.len() - 1];
    w.put(format_args!("min_dhw"), min_present(window.iter().map(|f| f.dhw)));
    w.put(format_args!("min_thw"), min_present(window.iter().map(|f| f.thw)));
    w.put(format_args!("min_ttc"), min_present(window.iter().map(|f| f.ttc)));
    w.put(format_args!("dhw"), a.dhw);
    w.put(format_args!("thw"), a.thw);
    w.put(format_args!("ttc"), a.ttc);
}

/// Vehicle type, past lane-change frequency, speed-limit and ratio features.
pub fn behavioral_features(
    w: &mut FeatureWriter,
    ctx: &FeatureContext<'_>,
    anchor_pos: usize,
    window: &[Frame],
) {
    let track = ctx.track;
    let fs = ctx.recording.sampling_rate;
    let anchor = &track.frames[anchor_pos];
    w.put_flag(format_args!("is_car"), Some(track.vehicle_class == VehicleClass::Car));
    w.put_flag(format_args!("is_truck"), Some(track.vehicle_class == VehicleClass::Truck));
    // only maneuvers already confirmed at the anchor count
    let settle = (ctx.params.settle_s * fs).round() as u32;
    let completed = ctx
        .events
        .iter()
        .filter(|e| e.track_id == track.track_id)
        .filter(|e| e.end_frame + settle <= anchor.frame_index)
        .count();
    let elapsed = (anchor_pos + 1) as f64 / fs;
    w.put(format_args!("lc_frequency"), Some(completed as f64 / elapsed));
    let limit = ctx.recording.speed_limit;
    w.put(format_args!("speed_limit"), limit);
    let speed = anchor.speed();
    w.put(
        format_args!("speed_limit_ratio"),
        limit.filter(|l| *l > 0.0).map(|l| speed / l),
    );
    let mean_speed = mean(&window.iter().map(Frame::speed).collect::<Vec<_>>());
    w.put(
        format_args!("velocity_ratio"),
        (mean_speed > 1e-9).then(|| speed / mean_speed),
    );
    let max_accel = window
        .iter()
        .map(Frame::acceleration_magnitude)
        .fold(0.0, f64::max);
    w.put(
        format_args!("accel_ratio"),
        (max_accel > 1e-9).then(|| anchor.acceleration_magnitude() / max_accel),
    );
}

/// Distances and arrival time to ramp points, reachability flags and their dynamics.
pub fn ramp_features(w: &mut FeatureWriter, window: &[Frame], fs: f64) {
    let metas: Option<Vec<_>> = window.iter().map(|f| f.ramp_meta).collect();
    match metas {
        Some(m) => write_ramp(w, &m, fs),
        None => w.masked(|w| {
            let dummy = vec![crate::ingest::RampMeta {
                dist_to_entry: 0.0,
                dist_to_exit: 0.0,
                eta_exit: 0.0,
            }; 2];
            write_ramp(w, &dummy, fs)
        }),
    }
}

fn write_ramp(w: &mut FeatureWriter, metas: &[crate::ingest::RampMeta], fs: f64) {
    let a = metas[metas.len() - 1];
    w.put(format_args!("dist_to_entry"), Some(a.dist_to_entry));
    w.put(format_args!("dist_to_exit"), Some(a.dist_to_exit));
    w.put(format_args!("eta_exit"), Some(a.eta_exit));
    for horizon in [5.0, 15.0, 30.0] {
        w.put_flag(format_args!("exit_reachable_{horizon}s"), Some(a.eta_exit <= horizon));
    }
    let exit: Vec<f64> = metas.iter().map(|m| m.dist_to_exit).collect();
    write_descriptors(w, "ts_dist_to_exit", &exit, fs);
    let eta: Vec<f64> = metas.iter().map(|m| m.eta_exit).collect();
    w.put(format_args!("eta_exit_1s_mean"), Some(mean(last_seconds(&eta, fs, 1.0))));
    w.put(format_args!("eta_exit_window_min"), Some(min(&eta)));
    let n = metas.len();
    let rate = |f: fn(&crate::ingest::RampMeta) -> f64| {
        (n >= 2).then(|| (f(&metas[n - 1]) - f(&metas[n - 2])) * fs)
    };
    w.put(format_args!("dist_to_exit_rate"), rate(|m| m.dist_to_exit));
    w.put(format_args!("dist_to_entry_rate"), rate(|m| m.dist_to_entry));
}

fn placeholder_frame(frame_index: u32) -> Frame {
    Frame {
        frame_index,
        x: 0.0,
        y: 1.875,
        x_velocity: 1.0,
        y_velocity: 0.0,
        x_acceleration: 0.0,
        y_acceleration: 0.0,
        lat_velocity: 0.0,
        lane_id: 1,
        lateral_lane_offset: 0.0,
        dist_left_boundary: 1.875,
        dist_right_boundary: 1.875,
        dhw: None,
        thw: None,
        ttc: None,
        neighbors: Neighbors::default(),
        ramp_meta: None,
    }
}

fn build_schema(kind: DatasetKind) -> Vec<String> {
    let track = Track {
        track_id: 1,
        vehicle_class: VehicleClass::Car,
        frames: vec![placeholder_frame(0), placeholder_frame(1)],
    };
    let rec = Recording {
        recording_id: 0,
        location_id: 0,
        sampling_rate: crate::ingest::DEFAULT_SAMPLING_RATE,
        dataset_kind: kind,
        speed_limit: None,
        tracks: vec![track.clone()],
    };
    let stats = NeighborStats::default();
    let ctx = FeatureContext {
        recording: &rec,
        track: &track,
        events: &[],
        stats: &stats,
        params: FeatureParams::default(),
    };
    let mut w = FeatureWriter::with_names();
    write_all(&mut w, &ctx, 1, 2).expect("placeholder window is valid");
    w.names.expect("names recorded")
}

/// Ordered feature names for a dataset kind.
pub fn schema(kind: DatasetKind) -> &'static [String] {
    static STRAIGHT: OnceLock<Vec<String>> = OnceLock::new();
    static RAMP: OnceLock<Vec<String>> = OnceLock::new();
    match kind {
        DatasetKind::Straight => STRAIGHT.get_or_init(|| build_schema(kind)),
        DatasetKind::Ramp => RAMP.get_or_init(|| build_schema(kind)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::RampMeta;

    fn moving(frame_index: u32, vx: f64, vy: f64) -> Frame {
        Frame {
            x_velocity: vx,
            y_velocity: vy,
            ..placeholder_frame(frame_index)
        }
    }

    #[test]
    fn schema_sizes() {
        assert_eq!(schema(DatasetKind::Straight).len(), STRAIGHT_WIDTH);
        assert_eq!(schema(DatasetKind::Ramp).len(), RAMP_WIDTH);
        let mut names = schema(DatasetKind::Ramp).to_vec();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), RAMP_WIDTH, "feature names are unique");
        assert_eq!(
            &schema(DatasetKind::Ramp)[..STRAIGHT_WIDTH],
            schema(DatasetKind::Straight)
        );
    }

    #[test]
    fn constant_velocity_kinematics() {
        let window: Vec<Frame> = (0..30).map(|i| moving(i, 10.0, 0.0)).collect();
        let mut w = FeatureWriter::with_names();
        kinematics_features(&mut w, &window, 25.0).unwrap();
        assert_eq!(w.get("speed"), Some(Some(10.0)));
        assert_eq!(w.get("accel_magnitude"), Some(Some(0.0)));
        assert_eq!(w.get("yaw_rate"), Some(Some(0.0)));
        assert_eq!(w.get("curvature_radius"), Some(None));
    }

    #[test]
    fn three_four_five() {
        let window: Vec<Frame> = (0..3).map(|i| moving(i, 3.0, 4.0)).collect();
        let mut w = FeatureWriter::with_names();
        kinematics_features(&mut w, &window, 25.0).unwrap();
        assert_eq!(w.get("speed"), Some(Some(5.0)));
        assert_eq!(w.get("heading"), Some(Some(4.0f64.atan2(3.0))));
    }

    #[test]
    fn circular_arc_curvature() {
        let fs = 25.0;
        let window: Vec<Frame> = (0..25)
            .map(|i| {
                let h = 0.1 * i as f64 / fs;
                moving(i, 10.0 * h.cos(), 10.0 * h.sin())
            })
            .collect();
        let mut w = FeatureWriter::with_names();
        kinematics_features(&mut w, &window, fs).unwrap();
        let r = w.get("curvature_radius").unwrap().unwrap();
        assert!((r / 100.0 - 1.0).abs() < 0.01, "{r}");
    }

    #[test]
    fn single_frame_is_rejected() {
        let mut w = FeatureWriter::new();
        assert!(matches!(
            kinematics_features(&mut w, &[moving(0, 1.0, 0.0)], 25.0),
            Err(FeatureError::TooFewFrames { .. })
        ));
    }

    #[test]
    fn lane_drift() {
        let fs = 25.0;
        let window: Vec<Frame> = (0..25)
            .map(|i| {
                let off = 0.1 * i as f64 / fs;
                Frame {
                    y: 1.875 + off,
                    lateral_lane_offset: off,
                    dist_left_boundary: 1.875 - off,
                    dist_right_boundary: 1.875 + off,
                    lat_velocity: 0.1,
                    ..placeholder_frame(i)
                }
            })
            .collect();
        let mut w = FeatureWriter::with_names();
        lane_features(&mut w, &window, fs);
        let rate = w.get("lateral_offset_rate").unwrap().unwrap();
        assert!((rate - 0.1).abs() < 1e-6);
        let cum = w.get("cumulative_lateral_displacement").unwrap().unwrap();
        let integrated: f64 = window[1..].iter().map(|f| f.lat_velocity.abs() / fs).sum();
        assert!((cum / integrated - 1.0).abs() < 0.01);

        let still: Vec<Frame> = (0..5).map(placeholder_frame).collect();
        let mut w = FeatureWriter::with_names();
        lane_features(&mut w, &still, fs);
        assert_eq!(w.get("lateral_offset"), Some(Some(0.0)));
        assert_eq!(w.get("lateral_offset_rate"), Some(Some(0.0)));
    }

    #[test]
    fn safety_minimums() {
        let mk = |ttc: Option<f64>| Frame {
            ttc,
            ..placeholder_frame(0)
        };
        let cases: [(Vec<Option<f64>>, Option<f64>); 3] = [
            (vec![Some(8.0), Some(4.0), Some(12.0)], Some(4.0)),
            (vec![None, None], None),
            (vec![None, Some(6.0), None, Some(3.0)], Some(3.0)),
        ];
        for (series, want) in cases {
            let window: Vec<Frame> = series.into_iter().map(mk).collect();
            let mut w = FeatureWriter::with_names();
            safety_features(&mut w, &window);
            assert_eq!(w.get("min_ttc"), Some(want));
        }
    }

    #[test]
    fn interaction_arithmetic() {
        assert!((closing_gap_time(10.0, 5.0, 1e-6) - 2.0).abs() < 1e-5);
        assert!((closing_gap_time(10.0, -5.0, 1e-6) - 2.0).abs() < 1e-5);
        assert_eq!(
            lane_advantage(Some(60.0), Some(40.0), Some(50.0), Some(45.0)),
            (Some(20.0), Some(5.0), Some(5.0))
        );
        assert_eq!(lane_advantage(None, Some(40.0), Some(50.0), Some(45.0)).2, None);
    }

    #[test]
    fn ramp_indicators() {
        let meta = |eta| RampMeta {
            dist_to_entry: 50.0,
            dist_to_exit: 200.0,
            eta_exit: eta,
        };
        let window: Vec<Frame> = (0..3)
            .map(|i| Frame {
                ramp_meta: Some(meta(10.0)),
                x_velocity: 20.0,
                ..placeholder_frame(i)
            })
            .collect();
        let mut w = FeatureWriter::with_names();
        ramp_features(&mut w, &window, 25.0);
        assert_eq!(w.len(), RAMP_WIDTH - STRAIGHT_WIDTH);
        assert_eq!(w.get("eta_exit"), Some(Some(10.0)));
        assert_eq!(w.get("exit_reachable_5s"), Some(Some(0.0)));
        assert_eq!(w.get("exit_reachable_15s"), Some(Some(1.0)));
        assert_eq!(w.get("exit_reachable_30s"), Some(Some(1.0)));

        let bare: Vec<Frame> = (0..3).map(placeholder_frame).collect();
        let mut w = FeatureWriter::with_names();
        ramp_features(&mut w, &bare, 25.0);
        assert_eq!(w.len(), RAMP_WIDTH - STRAIGHT_WIDTH);
        assert!(w.values().iter().all(Option::is_none));
    }
}

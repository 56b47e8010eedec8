//! Lane-change event detection and window labeling.
//!
//! An event starts at the first frame whose lateral offset from the lane
//! centerline reaches `crossing_threshold` and is followed by a sustained,
//! same-signed drift. It ends at the first frame whose center lies in the
//! adjacent lane and after which the vehicle does not move back for
//! `settle_duration`.

use std::io::{Read, Write};

use thiserror::Error;

use crate::ingest::{DatasetKind, Frame, Track};

#[derive(Debug, Error)]
pub enum LabelError {
    #[error("track {0} has non-finite lateral offset data")]
    MissingLateralData(u32),
    #[error("lane {0} before and after the change are the same")]
    SameLane(i32),
    #[error("frame {frame} is outside track {track_id}")]
    OutOfRange { track_id: u32, frame: u32 },
    #[error("track {track_id} has {frames} frames; at least {needed} required")]
    TrackTooShort {
        track_id: u32,
        frames: usize,
        needed: usize,
    },
    #[error("invalid labeling parameter: {0}")]
    InvalidParams(String),
    #[error("malformed event table: {0}")]
    Table(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Left,
    Right,
}

impl Direction {
    /// +1 for left, -1 for right (left-positive lateral axis).
    pub fn sign(self) -> f64 {
        match self {
            Direction::Left => 1.0,
            Direction::Right => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Left => "Left",
            Direction::Right => "Right",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "left" => Some(Direction::Left),
            "right" => Some(Direction::Right),
            _ => None,
        }
    }
}

/// Three-class target. The discriminant is the class index used throughout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    NoLC = 0,
    LeftLC = 1,
    RightLC = 2,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::NoLC, Label::LeftLC, Label::RightLC];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Label::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::NoLC => "NO-LC",
            Label::LeftLC => "Left-LC",
            Label::RightLC => "Right-LC",
        }
    }
}

impl From<Direction> for Label {
    fn from(d: Direction) -> Self {
        match d {
            Direction::Left => Label::LeftLC,
            Direction::Right => Label::RightLC,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LaneChangeEvent {
    pub track_id: u32,
    pub start_frame: u32,
    pub end_frame: u32,
    pub direction: Direction,
    pub lane_before: i32,
    pub lane_after: i32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelingParams {
    pub crossing_threshold: f64,
    pub drift_duration: f64,
    pub settle_duration: f64,
    pub direction_window: f64,
    pub drift_tolerance: f64,
}

impl Default for LabelingParams {
    fn default() -> Self {
        LabelingParams {
            crossing_threshold: 0.2,
            drift_duration: 0.5,
            settle_duration: 1.0,
            direction_window: 0.1,
            drift_tolerance: 0.02,
        }
    }
}

impl LabelingParams {
    pub fn validate(&self) -> Result<(), LabelError> {
        let all = [
            self.crossing_threshold,
            self.drift_duration,
            self.settle_duration,
            self.direction_window,
            self.drift_tolerance,
        ];
        if all.iter().all(|v| *v > 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(LabelError::InvalidParams(
                "all labeling parameters must be positive".into(),
            ))
        }
    }
}

/// Left iff the lane id before the change is smaller than the one after.
pub fn direction_straight(lane_before: i32, lane_after: i32) -> Result<Direction, LabelError> {
    match lane_before.cmp(&lane_after) {
        std::cmp::Ordering::Less => Ok(Direction::Left),
        std::cmp::Ordering::Greater => Ok(Direction::Right),
        std::cmp::Ordering::Equal => Err(LabelError::SameLane(lane_before)),
    }
}

/// Sign of the mean lateral velocity over `direction_window` seconds from the start.
pub fn direction_ramp(
    track: &Track,
    start_frame: u32,
    params: &LabelingParams,
    sampling_rate: f64,
) -> Result<Direction, LabelError> {
    let start = track
        .position_of(start_frame)
        .ok_or(LabelError::OutOfRange {
            track_id: track.track_id,
            frame: start_frame,
        })?;
    let span = (params.direction_window * sampling_rate).floor() as usize;
    let end = (start + span).min(track.frames.len() - 1);
    let window = &track.frames[start..=end];
    let mean = window.iter().map(|f| f.lat_velocity).sum::<f64>() / window.len() as f64;
    Ok(if mean > 0.0 {
        Direction::Left
    } else {
        Direction::Right
    })
}

/// Lateral position relative to the initial lane centerline, with the jump of
/// the offset at a lane boundary removed.
fn unwrapped_lateral(frames: &[Frame]) -> Vec<f64> {
    let mut out = Vec::with_capacity(frames.len());
    let mut acc = frames[0].lateral_lane_offset;
    out.push(acc);
    for pair in frames.windows(2) {
        let mut step = pair[1].lateral_lane_offset - pair[0].lateral_lane_offset;
        if pair[1].lane_id != pair[0].lane_id {
            let width = pair[1].lane_width();
            if step < -width / 2.0 {
                step += width;
            } else if step > width / 2.0 {
                step -= width;
            }
        }
        acc += step;
        out.push(acc);
    }
    out
}

pub fn detect_events(
    track: &Track,
    params: &LabelingParams,
    kind: DatasetKind,
    sampling_rate: f64,
) -> Result<Vec<LaneChangeEvent>, LabelError> {
    params.validate()?;
    let frames = &track.frames;
    if frames
        .iter()
        .any(|f| !f.lateral_lane_offset.is_finite() || !f.lat_velocity.is_finite())
    {
        return Err(LabelError::MissingLateralData(track.track_id));
    }
    let n = frames.len();
    let lateral = unwrapped_lateral(frames);
    let step = |j: usize| lateral[j] - lateral[j - 1];
    let n_drift = (params.drift_duration * sampling_rate).ceil() as usize;
    let n_settle = (params.settle_duration * sampling_rate).ceil() as usize;
    let tol = params.drift_tolerance;

    let mut events = Vec::new();
    let mut i = 0;
    while i < n {
        let off = frames[i].lateral_lane_offset;
        if off.abs() < params.crossing_threshold || i + n_drift >= n {
            i += 1;
            continue;
        }
        let s = off.signum();
        let drifting = (i + 1..=i + n_drift).all(|j| s * step(j) >= -tol)
            && s * (lateral[i + n_drift] - lateral[i]) > tol;
        if !drifting {
            i += 1;
            continue;
        }
        let lane_before = frames[i].lane_id;
        match find_end(frames, &lateral, i, s, n_settle, tol) {
            EndSearch::Found(end) => {
                let lane_after = frames[end].lane_id;
                let direction = match kind {
                    DatasetKind::Straight => direction_straight(lane_before, lane_after)?,
                    DatasetKind::Ramp => {
                        direction_ramp(track, frames[i].frame_index, params, sampling_rate)?
                    }
                };
                events.push(LaneChangeEvent {
                    track_id: track.track_id,
                    start_frame: frames[i].frame_index,
                    end_frame: frames[end].frame_index,
                    direction,
                    lane_before,
                    lane_after,
                });
                i = end + 1;
            }
            EndSearch::Aborted(resume) => i = resume,
            EndSearch::Exhausted => break,
        }
    }
    Ok(events)
}

enum EndSearch {
    Found(usize),
    /// The vehicle returned to its lane; resume scanning here.
    Aborted(usize),
    Exhausted,
}

fn find_end(
    frames: &[Frame],
    lateral: &[f64],
    start: usize,
    s: f64,
    n_settle: usize,
    tol: f64,
) -> EndSearch {
    let n = frames.len();
    let lane_before = frames[start].lane_id;
    let mut j = start + 1;
    // ride out the approach to the boundary
    while j < n && frames[j].lane_id == lane_before {
        if s * frames[j].lateral_lane_offset < 0.0 {
            return EndSearch::Aborted(j);
        }
        j += 1;
    }
    if j >= n {
        return EndSearch::Exhausted;
    }
    let target = frames[j].lane_id;
    while j < n && frames[j].lane_id == target {
        if j + n_settle >= n {
            return EndSearch::Exhausted;
        }
        let mut settled = true;
        for k in j + 1..=j + n_settle {
            if frames[k].lane_id == lane_before {
                return EndSearch::Aborted(k);
            }
            if s * (lateral[k] - lateral[k - 1]) < -tol {
                settled = false;
                break;
            }
        }
        if settled {
            return EndSearch::Found(j);
        }
        j += 1;
    }
    if j >= n {
        EndSearch::Exhausted
    } else {
        EndSearch::Aborted(j)
    }
}

/// Per-frame inputs of the sequence encoder, in column order.
pub const SEQUENCE_FEATURES: [&str; 8] = [
    "x_velocity",
    "y_velocity",
    "x_acceleration",
    "y_acceleration",
    "lat_velocity",
    "lateral_lane_offset",
    "dist_left_boundary",
    "dist_right_boundary",
];

pub fn sequence_row(f: &Frame) -> [f64; 8] {
    [
        f.x_velocity,
        f.y_velocity,
        f.x_acceleration,
        f.y_acceleration,
        f.lat_velocity,
        f.lateral_lane_offset,
        f.dist_left_boundary,
        f.dist_right_boundary,
    ]
}

/// Row-major `steps × dim` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub steps: usize,
    pub dim: usize,
    pub data: Vec<f64>,
}

impl Sequence {
    pub fn new(steps: usize, dim: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), steps * dim, "sequence data does not match shape");
        Sequence { steps, dim, data }
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn from_frames(frames: &[Frame]) -> Self {
        let data = frames.iter().flat_map(sequence_row).collect();
        Sequence::new(frames.len(), SEQUENCE_FEATURES.len(), data)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledWindow {
    pub track_id: u32,
    /// Last frame of the history.
    pub anchor_frame: u32,
    pub history_s: f64,
    pub horizon_s: f64,
    pub sequence: Sequence,
    pub label: Label,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSpec {
    pub history_s: f64,
    pub horizon_s: f64,
    /// Anchor spacing in frames.
    pub stride: usize,
}

impl WindowSpec {
    pub fn history_frames(&self, fs: f64) -> usize {
        ((self.history_s * fs).round() as usize).max(1)
    }

    pub fn horizon_frames(&self, fs: f64) -> usize {
        ((self.horizon_s * fs).round() as usize).max(1)
    }
}

pub fn label_windows(
    track: &Track,
    events: &[LaneChangeEvent],
    spec: &WindowSpec,
    sampling_rate: f64,
) -> Result<Vec<LabeledWindow>, LabelError> {
    if !(spec.history_s > 0.0 && spec.horizon_s > 0.0) || spec.stride == 0 {
        return Err(LabelError::InvalidParams(
            "history, horizon and stride must be positive".into(),
        ));
    }
    let h = spec.history_frames(sampling_rate);
    let t = spec.horizon_frames(sampling_rate) as u32;
    let n = track.frames.len();
    if n < h + t as usize {
        return Err(LabelError::TrackTooShort {
            track_id: track.track_id,
            frames: n,
            needed: h + t as usize,
        });
    }
    let mut events: Vec<&LaneChangeEvent> = events
        .iter()
        .filter(|e| e.track_id == track.track_id)
        .collect();
    events.sort_by_key(|e| e.start_frame);
    let last = track.last_frame();

    let mut out = Vec::new();
    for p in (h - 1..n).step_by(spec.stride) {
        let anchor = track.frames[p].frame_index;
        let history_start = anchor + 1 - h as u32;
        let in_progress = events
            .iter()
            .any(|e| e.start_frame <= anchor && e.end_frame >= history_start);
        if in_progress {
            continue;
        }
        let upcoming = events
            .iter()
            .find(|e| e.start_frame > anchor && e.start_frame <= anchor + t);
        let label = match upcoming {
            Some(e) => Label::from(e.direction),
            None if anchor + t <= last => Label::NoLC,
            None => continue,
        };
        out.push(LabeledWindow {
            track_id: track.track_id,
            anchor_frame: anchor,
            history_s: spec.history_s,
            horizon_s: spec.horizon_s,
            sequence: Sequence::from_frames(&track.frames[p + 1 - h..=p]),
            label,
        });
    }
    Ok(out)
}

/// Drop windows whose horizon holds more than one event start.
pub fn consistency_filter(
    windows: Vec<LabeledWindow>,
    events: &[LaneChangeEvent],
    sampling_rate: f64,
) -> Vec<LabeledWindow> {
    windows
        .into_iter()
        .filter(|w| {
            let t = ((w.horizon_s * sampling_rate).round() as u32).max(1);
            let starts = events
                .iter()
                .filter(|e| e.track_id == w.track_id)
                .filter(|e| e.start_frame > w.anchor_frame && e.start_frame <= w.anchor_frame + t)
                .count();
            starts < 2
        })
        .collect()
}

const EVENT_COLUMNS: [&str; 6] = [
    "track_id",
    "start_frame",
    "end_frame",
    "direction",
    "lane_before",
    "lane_after",
];

pub fn write_events<W: Write>(events: &[LaneChangeEvent], out: W) -> Result<(), LabelError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(EVENT_COLUMNS)?;
    for e in events {
        w.write_record([
            e.track_id.to_string(),
            e.start_frame.to_string(),
            e.end_frame.to_string(),
            e.direction.as_str().to_string(),
            e.lane_before.to_string(),
            e.lane_after.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_events<R: Read>(input: R) -> Result<Vec<LaneChangeEvent>, LabelError> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != EVENT_COLUMNS {
        return Err(LabelError::Table(format!("unexpected header {headers:?}")));
    }
    let mut events = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = |c: &str| LabelError::Table(format!("row {}: bad {c}", line + 1));
        let num = |i: usize| rec[i].trim().parse::<i64>().map_err(|_| bad(EVENT_COLUMNS[i]));
        events.push(LaneChangeEvent {
            track_id: num(0)? as u32,
            start_frame: num(1)? as u32,
            end_frame: num(2)? as u32,
            direction: Direction::parse(&rec[3]).ok_or_else(|| bad("direction"))?,
            lane_before: num(4)? as i32,
            lane_after: num(5)? as i32,
        });
    }
    Ok(events)
}

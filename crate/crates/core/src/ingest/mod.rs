//! Recording model and track-file I/O.
//!
//! A recording is stored as two comma-separated files sharing a stem:
//! `<stem>_tracks.csv` (one row per track and frame) and
//! `<stem>_recordingMeta.csv` (a single metadata row). Column names follow the
//! public highD/exiD conventions; absent optional values are empty fields.

mod io;
pub mod synth;

pub use io::{load_recording, meta_path_for, write_recording, TRACK_COLUMNS, RAMP_COLUMNS};
pub use synth::{synthesize_corpus, synthesize_recording, SynthConfig};

use thiserror::Error;

/// Sampling rate assumed when a recording does not state one.
pub const DEFAULT_SAMPLING_RATE: f64 = 25.0;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("frames of track {0} are not strictly increasing with unit stride")]
    NonMonotonicFrames(u32),
    #[error("recording contains no tracks")]
    EmptyRecording,
    #[error("line {line}: cannot parse `{value}` in column `{column}`")]
    Parse {
        line: u64,
        column: String,
        value: String,
    },
    #[error("track {track_id}: {reason}")]
    InvalidTrack { track_id: u32, reason: String },
    #[error("invalid recording: {0}")]
    InvalidRecording(String),
    #[error("recording is {found:?} but {expected:?} was requested")]
    KindMismatch {
        expected: DatasetKind,
        found: DatasetKind,
    },
    #[error("infeasible synthesis config: {0}")]
    InfeasibleConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DatasetKind {
    /// Straight highway segments with sequential lane ids.
    Straight,
    /// On/off-ramp areas; lane ids are not sequential.
    Ramp,
}

impl DatasetKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DatasetKind::Straight => "straight",
            DatasetKind::Ramp => "ramp",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "straight" => Some(DatasetKind::Straight),
            "ramp" => Some(DatasetKind::Ramp),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VehicleClass {
    Car,
    Truck,
}

impl VehicleClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            VehicleClass::Car => "Car",
            VehicleClass::Truck => "Truck",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "car" => Some(VehicleClass::Car),
            "truck" => Some(VehicleClass::Truck),
            _ => None,
        }
    }
}

/// The eight surrounding-vehicle slots of the highD neighbor model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NeighborPosition {
    Lead,
    Rear,
    LeftLead,
    LeftAlong,
    LeftRear,
    RightLead,
    RightAlong,
    RightRear,
}

impl NeighborPosition {
    pub const ALL: [NeighborPosition; 8] = [
        NeighborPosition::Lead,
        NeighborPosition::Rear,
        NeighborPosition::LeftLead,
        NeighborPosition::LeftAlong,
        NeighborPosition::LeftRear,
        NeighborPosition::RightLead,
        NeighborPosition::RightAlong,
        NeighborPosition::RightRear,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Short snake-case name used in feature and stats keys.
    pub fn key(self) -> &'static str {
        match self {
            NeighborPosition::Lead => "lead",
            NeighborPosition::Rear => "rear",
            NeighborPosition::LeftLead => "left_lead",
            NeighborPosition::LeftAlong => "left_along",
            NeighborPosition::LeftRear => "left_rear",
            NeighborPosition::RightLead => "right_lead",
            NeighborPosition::RightAlong => "right_along",
            NeighborPosition::RightRear => "right_rear",
        }
    }

    /// Track-file column holding this neighbor's id.
    pub fn column(self) -> &'static str {
        match self {
            NeighborPosition::Lead => "precedingId",
            NeighborPosition::Rear => "followingId",
            NeighborPosition::LeftLead => "leftPrecedingId",
            NeighborPosition::LeftAlong => "leftAlongsideId",
            NeighborPosition::LeftRear => "leftFollowingId",
            NeighborPosition::RightLead => "rightPrecedingId",
            NeighborPosition::RightAlong => "rightAlongsideId",
            NeighborPosition::RightRear => "rightFollowingId",
        }
    }
}

/// Neighbor track ids by position; an absent neighbor is `None`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Neighbors(pub [Option<u32>; 8]);

impl Neighbors {
    pub fn get(&self, pos: NeighborPosition) -> Option<u32> {
        self.0[pos.index()]
    }

    pub fn set(&mut self, pos: NeighborPosition, id: Option<u32>) {
        self.0[pos.index()] = id;
    }

    pub fn present(&self) -> usize {
        self.0.iter().filter(|id| id.is_some()).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RampMeta {
    pub dist_to_entry: f64,
    pub dist_to_exit: f64,
    /// Estimated time to reach the exit, as provided by the data source.
    pub eta_exit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub frame_index: u32,
    pub x: f64,
    pub y: f64,
    pub x_velocity: f64,
    pub y_velocity: f64,
    pub x_acceleration: f64,
    pub y_acceleration: f64,
    /// Signed lateral velocity, left-positive.
    pub lat_velocity: f64,
    pub lane_id: i32,
    /// Signed distance from the current lane centerline, left-positive.
    pub lateral_lane_offset: f64,
    pub dist_left_boundary: f64,
    pub dist_right_boundary: f64,
    pub dhw: Option<f64>,
    pub thw: Option<f64>,
    pub ttc: Option<f64>,
    pub neighbors: Neighbors,
    pub ramp_meta: Option<RampMeta>,
}

impl Frame {
    pub fn speed(&self) -> f64 {
        self.x_velocity.hypot(self.y_velocity)
    }

    pub fn acceleration_magnitude(&self) -> f64 {
        self.x_acceleration.hypot(self.y_acceleration)
    }

    pub fn lane_width(&self) -> f64 {
        self.dist_left_boundary + self.dist_right_boundary
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub track_id: u32,
    pub vehicle_class: VehicleClass,
    pub frames: Vec<Frame>,
}

impl Track {
    pub fn first_frame(&self) -> u32 {
        self.frames[0].frame_index
    }

    pub fn last_frame(&self) -> u32 {
        self.frames[self.frames.len() - 1].frame_index
    }

    /// Position of `frame_index` in `frames`, relying on unit stride.
    pub fn position_of(&self, frame_index: u32) -> Option<usize> {
        let first = self.frames.first()?.frame_index;
        if frame_index < first {
            return None;
        }
        let pos = (frame_index - first) as usize;
        (pos < self.frames.len()).then_some(pos)
    }

    pub fn frame_at(&self, frame_index: u32) -> Option<&Frame> {
        self.position_of(frame_index).map(|p| &self.frames[p])
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        if self.frames.len() < 2 {
            return Err(IngestError::InvalidTrack {
                track_id: self.track_id,
                reason: format!("{} frame(s); at least 2 required", self.frames.len()),
            });
        }
        for pair in self.frames.windows(2) {
            if pair[1].frame_index != pair[0].frame_index + 1 {
                return Err(IngestError::NonMonotonicFrames(self.track_id));
            }
        }
        for f in &self.frames {
            let bad = |reason: &str| IngestError::InvalidTrack {
                track_id: self.track_id,
                reason: format!("frame {}: {reason}", f.frame_index),
            };
            if f.dist_left_boundary < 0.0 || f.dist_right_boundary < 0.0 {
                return Err(bad("negative boundary distance"));
            }
            if f.lane_width() <= 0.0 {
                return Err(bad("boundary distances sum to zero"));
            }
            for v in [f.dhw, f.thw, f.ttc].into_iter().flatten() {
                if !(v >= 0.0) {
                    return Err(bad("negative or non-finite headway/ttc"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub recording_id: u32,
    pub location_id: u32,
    pub sampling_rate: f64,
    pub dataset_kind: DatasetKind,
    pub speed_limit: Option<f64>,
    /// Sorted by `track_id`.
    pub tracks: Vec<Track>,
}

impl Recording {
    pub fn track(&self, track_id: u32) -> Option<&Track> {
        self.tracks
            .binary_search_by_key(&track_id, |t| t.track_id)
            .ok()
            .map(|i| &self.tracks[i])
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        if self.tracks.is_empty() {
            return Err(IngestError::EmptyRecording);
        }
        if !(self.sampling_rate > 0.0) {
            return Err(IngestError::InvalidRecording(format!(
                "sampling rate {} must be positive",
                self.sampling_rate
            )));
        }
        for pair in self.tracks.windows(2) {
            if pair[1].track_id <= pair[0].track_id {
                return Err(IngestError::InvalidRecording(format!(
                    "track ids not unique and sorted near {}",
                    pair[1].track_id
                )));
            }
        }
        self.tracks.iter().try_for_each(Track::validate)
    }
}

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{
    DatasetKind, Frame, IngestError, NeighborPosition, Neighbors, RampMeta, Recording, Track,
    VehicleClass,
};

/// Columns every track file must carry, in the order they are written.
pub const TRACK_COLUMNS: [&str; 25] = [
    "frame",
    "id",
    "x",
    "y",
    "xVelocity",
    "yVelocity",
    "xAcceleration",
    "yAcceleration",
    "latVelocity",
    "laneId",
    "latLaneCenterOffset",
    "distLeftBoundary",
    "distRightBoundary",
    "dhw",
    "thw",
    "ttc",
    "precedingId",
    "followingId",
    "leftPrecedingId",
    "leftAlongsideId",
    "leftFollowingId",
    "rightPrecedingId",
    "rightAlongsideId",
    "rightFollowingId",
    "class",
];

/// Optional ramp-descriptor columns; either all present or none.
pub const RAMP_COLUMNS: [&str; 3] = ["distToEntry", "distToExit", "etaExit"];

const META_COLUMNS: [&str; 5] = ["id", "locationId", "frameRate", "speedLimit", "datasetKind"];

/// `foo_tracks.csv` -> `foo_recordingMeta.csv`; any other name gets the suffix appended.
pub fn meta_path_for(tracks_path: &Path) -> PathBuf {
    let name = tracks_path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let stem = name
        .strip_suffix("_tracks.csv")
        .map(str::to_owned)
        .unwrap_or_else(|| name.trim_end_matches(".csv").to_owned());
    tracks_path.with_file_name(format!("{stem}_recordingMeta.csv"))
}

struct Columns {
    index: Vec<usize>,
    ramp: Option<[usize; 3]>,
}

fn locate_columns(headers: &csv::StringRecord) -> Result<Columns, IngestError> {
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);
    let index = TRACK_COLUMNS
        .iter()
        .map(|c| find(c).ok_or_else(|| IngestError::MissingColumn((*c).to_owned())))
        .collect::<Result<Vec<_>, _>>()?;
    let ramp_found: Vec<Option<usize>> = RAMP_COLUMNS.iter().map(|c| find(c)).collect();
    let ramp = match ramp_found.iter().filter(|c| c.is_some()).count() {
        0 => None,
        3 => Some([
            ramp_found[0].unwrap(),
            ramp_found[1].unwrap(),
            ramp_found[2].unwrap(),
        ]),
        _ => {
            let missing = RAMP_COLUMNS
                .iter()
                .zip(&ramp_found)
                .find(|(_, f)| f.is_none())
                .map(|(c, _)| *c)
                .unwrap_or_default();
            return Err(IngestError::MissingColumn(missing.to_owned()));
        }
    };
    Ok(Columns { index, ramp })
}

struct Row<'a> {
    record: &'a csv::StringRecord,
    line: u64,
}

impl Row<'_> {
    fn raw(&self, idx: usize) -> &str {
        self.record.get(idx).unwrap_or("").trim()
    }

    fn err(&self, idx: usize, column: &str) -> IngestError {
        IngestError::Parse {
            line: self.line,
            column: column.to_owned(),
            value: self.raw(idx).to_owned(),
        }
    }

    fn f64(&self, idx: usize, column: &str) -> Result<f64, IngestError> {
        let v: f64 = self.raw(idx).parse().map_err(|_| self.err(idx, column))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.err(idx, column))
        }
    }

    fn opt_f64(&self, idx: usize, column: &str) -> Result<Option<f64>, IngestError> {
        if self.raw(idx).is_empty() {
            Ok(None)
        } else {
            self.f64(idx, column).map(Some)
        }
    }

    fn int<T: std::str::FromStr>(&self, idx: usize, column: &str) -> Result<T, IngestError> {
        self.raw(idx).parse().map_err(|_| self.err(idx, column))
    }

    fn opt_u32(&self, idx: usize, column: &str) -> Result<Option<u32>, IngestError> {
        if self.raw(idx).is_empty() {
            Ok(None)
        } else {
            self.int(idx, column).map(Some)
        }
    }
}

fn parse_frame(row: &Row, cols: &Columns) -> Result<(u32, VehicleClass, Frame), IngestError> {
    let c = |i: usize| (cols.index[i], TRACK_COLUMNS[i]);
    let f = |i: usize| {
        let (idx, name) = c(i);
        row.f64(idx, name)
    };
    let of = |i: usize| {
        let (idx, name) = c(i);
        row.opt_f64(idx, name)
    };
    let mut neighbors = Neighbors::default();
    for (k, pos) in NeighborPosition::ALL.iter().enumerate() {
        let (idx, name) = c(16 + k);
        neighbors.set(*pos, row.opt_u32(idx, name)?);
    }
    let (class_idx, class_name) = c(24);
    let class = VehicleClass::parse(row.raw(class_idx)).ok_or_else(|| row.err(class_idx, class_name))?;
    let ramp_meta = match cols.ramp {
        None => None,
        Some(idx) => {
            let vals = [
                row.opt_f64(idx[0], RAMP_COLUMNS[0])?,
                row.opt_f64(idx[1], RAMP_COLUMNS[1])?,
                row.opt_f64(idx[2], RAMP_COLUMNS[2])?,
            ];
            match vals {
                [Some(a), Some(b), Some(e)] => Some(RampMeta {
                    dist_to_entry: a,
                    dist_to_exit: b,
                    eta_exit: e,
                }),
                [None, None, None] => None,
                _ => {
                    return Err(IngestError::Parse {
                        line: row.line,
                        column: "distToEntry/distToExit/etaExit".into(),
                        value: "partially empty".into(),
                    })
                }
            }
        }
    };
    let (frame_idx, frame_name) = c(0);
    let (id_idx, id_name) = c(1);
    let (lane_idx, lane_name) = c(9);
    let frame = Frame {
        frame_index: row.int(frame_idx, frame_name)?,
        x: f(2)?,
        y: f(3)?,
        x_velocity: f(4)?,
        y_velocity: f(5)?,
        x_acceleration: f(6)?,
        y_acceleration: f(7)?,
        lat_velocity: f(8)?,
        lane_id: row.int(lane_idx, lane_name)?,
        lateral_lane_offset: f(10)?,
        dist_left_boundary: f(11)?,
        dist_right_boundary: f(12)?,
        dhw: of(13)?,
        thw: of(14)?,
        ttc: of(15)?,
        neighbors,
        ramp_meta,
    };
    Ok((row.int(id_idx, id_name)?, class, frame))
}

struct Meta {
    recording_id: u32,
    location_id: u32,
    sampling_rate: f64,
    speed_limit: Option<f64>,
    kind: DatasetKind,
}

fn read_meta(path: &Path) -> Result<Meta, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers = rdr.headers()?.clone();
    let idx = META_COLUMNS
        .iter()
        .map(|c| {
            headers
                .iter()
                .position(|h| h.trim() == *c)
                .ok_or_else(|| IngestError::MissingColumn((*c).to_owned()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let record = rdr
        .records()
        .next()
        .ok_or_else(|| IngestError::InvalidRecording(format!("{} has no data row", path.display())))??;
    let row = Row {
        record: &record,
        line: 2,
    };
    let kind_raw = row.raw(idx[4]);
    Ok(Meta {
        recording_id: row.int(idx[0], META_COLUMNS[0])?,
        location_id: row.int(idx[1], META_COLUMNS[1])?,
        sampling_rate: row.f64(idx[2], META_COLUMNS[2])?,
        speed_limit: row.opt_f64(idx[3], META_COLUMNS[3])?,
        kind: DatasetKind::parse(kind_raw).ok_or_else(|| row.err(idx[4], META_COLUMNS[4]))?,
    })
}

/// Load a recording from `<stem>_tracks.csv` and its sibling metadata file.
///
/// Rows may interleave tracks; within one track they must already be in
/// frame order with unit stride.
pub fn load_recording(path: &Path, dataset_kind: DatasetKind) -> Result<Recording, IngestError> {
    let meta = read_meta(&meta_path_for(path))?;
    if meta.kind != dataset_kind {
        return Err(IngestError::KindMismatch {
            expected: dataset_kind,
            found: meta.kind,
        });
    }
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let cols = locate_columns(rdr.headers()?)?;

    let mut grouped: BTreeMap<u32, (VehicleClass, Vec<Frame>)> = BTreeMap::new();
    let mut record = csv::StringRecord::new();
    let mut line = 1u64;
    while rdr.read_record(&mut record)? {
        line += 1;
        let row = Row {
            record: &record,
            line,
        };
        let (id, class, frame) = parse_frame(&row, &cols)?;
        let entry = grouped.entry(id).or_insert_with(|| (class, Vec::new()));
        if entry.0 != class {
            return Err(IngestError::InvalidTrack {
                track_id: id,
                reason: "vehicle class changes between rows".into(),
            });
        }
        if let Some(prev) = entry.1.last() {
            if frame.frame_index != prev.frame_index + 1 {
                return Err(IngestError::NonMonotonicFrames(id));
            }
        }
        entry.1.push(frame);
    }

    let rec = Recording {
        recording_id: meta.recording_id,
        location_id: meta.location_id,
        sampling_rate: meta.sampling_rate,
        dataset_kind: meta.kind,
        speed_limit: meta.speed_limit,
        tracks: grouped
            .into_iter()
            .map(|(track_id, (vehicle_class, frames))| Track {
                track_id,
                vehicle_class,
                frames,
            })
            .collect(),
    };
    rec.validate()?;
    Ok(rec)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Write `rec` as `<path>` plus the sibling metadata file. Floats use the
/// shortest round-trip representation, so reloading is exact.
pub fn write_recording(rec: &Recording, path: &Path) -> Result<(), IngestError> {
    let with_ramp = rec
        .tracks
        .iter()
        .any(|t| t.frames.iter().any(|f| f.ramp_meta.is_some()));

    let mut out = BufWriter::new(File::create(path)?);
    let mut header: Vec<&str> = TRACK_COLUMNS.to_vec();
    if with_ramp {
        header.extend(RAMP_COLUMNS);
    }
    writeln!(out, "{}", header.join(","))?;
    for t in &rec.tracks {
        for f in &t.frames {
            let mut fields = vec![
                f.frame_index.to_string(),
                t.track_id.to_string(),
                f.x.to_string(),
                f.y.to_string(),
                f.x_velocity.to_string(),
                f.y_velocity.to_string(),
                f.x_acceleration.to_string(),
                f.y_acceleration.to_string(),
                f.lat_velocity.to_string(),
                f.lane_id.to_string(),
                f.lateral_lane_offset.to_string(),
                f.dist_left_boundary.to_string(),
                f.dist_right_boundary.to_string(),
                opt(f.dhw),
                opt(f.thw),
                opt(f.ttc),
            ];
            fields.extend(
                f.neighbors
                    .0
                    .iter()
                    .map(|n| n.map(|id| id.to_string()).unwrap_or_default()),
            );
            fields.push(t.vehicle_class.as_str().to_owned());
            if with_ramp {
                match f.ramp_meta {
                    Some(m) => fields.extend([
                        m.dist_to_entry.to_string(),
                        m.dist_to_exit.to_string(),
                        m.eta_exit.to_string(),
                    ]),
                    None => fields.extend([String::new(), String::new(), String::new()]),
                }
            }
            writeln!(out, "{}", fields.join(","))?;
        }
    }
    out.flush()?;

    let mut meta = BufWriter::new(File::create(meta_path_for(path))?);
    writeln!(meta, "{}", META_COLUMNS.join(","))?;
    writeln!(
        meta,
        "{},{},{},{},{}",
        rec.recording_id,
        rec.location_id,
        rec.sampling_rate,
        opt(rec.speed_limit),
        rec.dataset_kind.as_str()
    )?;
    meta.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(i: u32) -> Frame {
        Frame {
            frame_index: i,
            x: 10.0 + i as f64 * 1.2,
            y: 5.25,
            x_velocity: 30.0,
            y_velocity: 0.0,
            x_acceleration: 0.1,
            y_acceleration: 0.0,
            lat_velocity: 0.0,
            lane_id: 2,
            lateral_lane_offset: 0.0,
            dist_left_boundary: 1.75,
            dist_right_boundary: 1.75,
            dhw: Some(40.0),
            thw: None,
            ttc: None,
            neighbors: Neighbors([Some(3), None, None, None, None, None, None, Some(9)]),
            ramp_meta: None,
        }
    }

    fn rec(tracks: Vec<Track>) -> Recording {
        Recording {
            recording_id: 4,
            location_id: 1,
            sampling_rate: 25.0,
            dataset_kind: DatasetKind::Straight,
            speed_limit: Some(33.3),
            tracks,
        }
    }

    #[test]
    fn meta_path_replaces_suffix() {
        assert_eq!(
            meta_path_for(Path::new("/d/01_tracks.csv")),
            PathBuf::from("/d/01_recordingMeta.csv")
        );
        assert_eq!(
            meta_path_for(Path::new("/d/run.csv")),
            PathBuf::from("/d/run_recordingMeta.csv")
        );
    }

    #[test]
    fn two_frame_track_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a_tracks.csv");
        let r = rec(vec![Track {
            track_id: 1,
            vehicle_class: VehicleClass::Truck,
            frames: vec![frame(0), frame(1)],
        }]);
        write_recording(&r, &path).unwrap();
        assert_eq!(load_recording(&path, DatasetKind::Straight).unwrap(), r);
    }

    #[test]
    fn empty_recording_fails_on_reload() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e_tracks.csv");
        write_recording(&rec(vec![]), &path).unwrap();
        assert!(matches!(
            load_recording(&path, DatasetKind::Straight),
            Err(IngestError::EmptyRecording)
        ));
    }

    #[test]
    fn out_of_order_frames_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("o_tracks.csv");
        let r = rec(vec![Track {
            track_id: 7,
            vehicle_class: VehicleClass::Car,
            frames: vec![frame(5), frame(4), frame(6)],
        }]);
        write_recording(&r, &path).unwrap();
        assert!(matches!(
            load_recording(&path, DatasetKind::Straight),
            Err(IngestError::NonMonotonicFrames(7))
        ));
    }

    #[test]
    fn missing_column_named() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m_tracks.csv");
        write_recording(&rec(vec![]), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap().replace("laneId", "lane");
        std::fs::write(&path, text).unwrap();
        match load_recording(&path, DatasetKind::Straight) {
            Err(IngestError::MissingColumn(c)) => assert_eq!(c, "laneId"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn kind_mismatch_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("k_tracks.csv");
        let r = rec(vec![Track {
            track_id: 1,
            vehicle_class: VehicleClass::Car,
            frames: vec![frame(0), frame(1)],
        }]);
        write_recording(&r, &path).unwrap();
        assert!(matches!(
            load_recording(&path, DatasetKind::Ramp),
            Err(IngestError::KindMismatch { .. })
        ));
    }

    #[test]
    fn interleaved_tracks_are_grouped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("i_tracks.csv");
        let r = rec(vec![
            Track {
                track_id: 1,
                vehicle_class: VehicleClass::Car,
                frames: vec![frame(0), frame(1)],
            },
            Track {
                track_id: 2,
                vehicle_class: VehicleClass::Car,
                frames: vec![frame(0), frame(1)],
            },
        ]);
        write_recording(&r, &path).unwrap();
        // swap rows 2 and 3 so the tracks interleave
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        lines.swap(2, 3);
        std::fs::write(&path, lines.join("\n") + "\n").unwrap();
        assert_eq!(load_recording(&path, DatasetKind::Straight).unwrap(), r);
    }
}

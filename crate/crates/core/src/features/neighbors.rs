//! Gap statistics per neighbor position at the start of lane changes.

use std::fmt::Write as _;

use crate::ingest::{Frame, NeighborPosition, Recording};
use crate::labeling::LaneChangeEvent;

use super::FeatureError;

/// Below this ego speed the time gap is undefined.
pub const MIN_SPEED: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionStats {
    /// Mean center-to-center gap (m).
    pub mu: f64,
    /// Population standard deviation of the gap (m).
    pub sigma: f64,
    pub count: usize,
    /// Mean and population deviation of gap / ego speed (s).
    pub time_mu: f64,
    pub time_sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NeighborStats {
    pub positions: [Option<PositionStats>; 8],
}

/// Center-to-center distance between two vehicles.
pub fn gap(ego: &Frame, other: &Frame) -> f64 {
    (other.x - ego.x).hypot(other.y - ego.y)
}

/// Neighbor frames at the ego frame's instant; neighbors whose track lacks
/// that frame count as absent.
pub fn resolve_neighbors<'a>(rec: &'a Recording, ego: &Frame) -> [Option<&'a Frame>; 8] {
    let mut out = [None; 8];
    for pos in NeighborPosition::ALL {
        out[pos.index()] = ego
            .neighbors
            .get(pos)
            .and_then(|id| rec.track(id))
            .and_then(|t| t.frame_at(ego.frame_index));
    }
    out
}

#[derive(Default, Clone, Copy)]
struct Moments {
    n: usize,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn add(&mut self, v: f64) {
        self.n += 1;
        self.sum += v;
        self.sum_sq += v * v;
    }

    fn mean_std(&self) -> (f64, f64) {
        let n = self.n as f64;
        let m = self.sum / n;
        (m, (self.sum_sq / n - m * m).max(0.0).sqrt())
    }
}

/// Fit gap statistics over event start frames. Only pass training recordings.
pub fn fit_neighbor_stats<'a, I>(corpus: I) -> NeighborStats
where
    I: IntoIterator<Item = (&'a Recording, &'a [LaneChangeEvent])>,
{
    let mut gaps = [Moments::default(); 8];
    let mut times = [Moments::default(); 8];
    for (rec, events) in corpus {
        for e in events {
            let Some(ego) = rec.track(e.track_id).and_then(|t| t.frame_at(e.start_frame)) else {
                continue;
            };
            let speed = ego.speed();
            for (i, nb) in resolve_neighbors(rec, ego).iter().enumerate() {
                if let Some(nb) = nb {
                    let d = gap(ego, nb);
                    gaps[i].add(d);
                    if speed >= MIN_SPEED {
                        times[i].add(d / speed);
                    }
                }
            }
        }
    }
    let mut stats = NeighborStats::default();
    for i in 0..8 {
        if gaps[i].n == 0 {
            continue;
        }
        let (mu, sigma) = gaps[i].mean_std();
        let (time_mu, time_sigma) = if times[i].n > 0 {
            times[i].mean_std()
        } else {
            (f64::NAN, f64::NAN)
        };
        stats.positions[i] = Some(PositionStats {
            mu,
            sigma,
            count: gaps[i].n,
            time_mu,
            time_sigma,
        });
    }
    stats
}

impl NeighborStats {
    pub fn get(&self, pos: NeighborPosition) -> Option<&PositionStats> {
        self.positions[pos.index()].as_ref()
    }

    /// `position.field=value` lines; absent positions have `count=0` only.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for pos in NeighborPosition::ALL {
            let k = pos.key();
            match self.get(pos) {
                None => writeln!(s, "{k}.count=0").unwrap(),
                Some(p) => {
                    writeln!(s, "{k}.count={}", p.count).unwrap();
                    writeln!(s, "{k}.mu={}", p.mu).unwrap();
                    writeln!(s, "{k}.sigma={}", p.sigma).unwrap();
                    writeln!(s, "{k}.time_mu={}", p.time_mu).unwrap();
                    writeln!(s, "{k}.time_sigma={}", p.time_sigma).unwrap();
                }
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<NeighborStats, FeatureError> {
        let mut stats = NeighborStats::default();
        let bad = |line: &str| FeatureError::Parse(format!("bad neighbor stats line `{line}`"));
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (key, value) = line.split_once('=').ok_or_else(|| bad(line))?;
            let (pos, field) = key.split_once('.').ok_or_else(|| bad(line))?;
            let pos = NeighborPosition::ALL
                .into_iter()
                .find(|p| p.key() == pos)
                .ok_or_else(|| bad(line))?;
            let slot = &mut stats.positions[pos.index()];
            if field == "count" {
                let count: usize = value.parse().map_err(|_| bad(line))?;
                *slot = (count > 0).then_some(PositionStats {
                    mu: f64::NAN,
                    sigma: f64::NAN,
                    count,
                    time_mu: f64::NAN,
                    time_sigma: f64::NAN,
                });
                continue;
            }
            let v: f64 = value.parse().map_err(|_| bad(line))?;
            let p = slot.as_mut().ok_or_else(|| bad(line))?;
            match field {
                "mu" => p.mu = v,
                "sigma" => p.sigma = v,
                "time_mu" => p.time_mu = v,
                "time_sigma" => p.time_sigma = v,
                _ => return Err(bad(line)),
            }
        }
        Ok(stats)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut s = NeighborStats::default();
        s.positions[0] = Some(PositionStats {
            mu: 54.8,
            sigma: 47.9,
            count: 3,
            time_mu: 1.9,
            time_sigma: 0.25,
        });
        s.positions[5] = Some(PositionStats {
            mu: 20.0,
            sigma: 0.0,
            count: 1,
            time_mu: f64::NAN,
            time_sigma: f64::NAN,
        });
        let back = NeighborStats::from_text(&s.to_text()).unwrap();
        assert_eq!(back.positions[0], s.positions[0]);
        assert!(back.positions[1].is_none());
        let p = back.positions[5].unwrap();
        assert_eq!((p.mu, p.sigma, p.count), (20.0, 0.0, 1));
        assert!(p.time_mu.is_nan());
    }
}

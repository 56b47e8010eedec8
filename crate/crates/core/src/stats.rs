//! Plot-ready gap distributions around lane-change starts.
//!
//! For every neighbor position: the mean gap with one- and two-sigma bands,
//! and a 2-D histogram of gap distance against speed difference.

use std::io::Write;

use crate::features::{fit_neighbor_stats, gap, resolve_neighbors};
use crate::ingest::{NeighborPosition, Recording};
use crate::labeling::LaneChangeEvent;

/// Gap distance edges (m): 0, 10, ..., 150.
pub const DISTANCE_EDGES: [f64; 16] = [
    0.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0, 100.0, 110.0, 120.0, 130.0, 140.0, 150.0,
];
/// Neighbor-minus-ego speed edges (m/s): -10, -8, ..., 10.
pub const SPEED_DIFF_EDGES: [f64; 11] = [-10.0, -8.0, -6.0, -4.0, -2.0, 0.0, 2.0, 4.0, 6.0, 8.0, 10.0];

#[derive(Debug, Clone, PartialEq)]
pub struct BandRow {
    pub position: NeighborPosition,
    pub count: usize,
    pub mu: f64,
    pub sigma: f64,
    pub minus_2sigma: f64,
    pub minus_1sigma: f64,
    pub plus_1sigma: f64,
    pub plus_2sigma: f64,
}

/// Counts per (distance bin, speed-difference bin) for one position.
/// Samples outside the edges are tallied in `outside`.
#[derive(Debug, Clone, PartialEq)]
pub struct GapHistogram {
    pub position: NeighborPosition,
    /// `counts[distance_bin][speed_bin]`.
    pub counts: Vec<Vec<usize>>,
    pub outside: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DistributionTables {
    pub bands: Vec<BandRow>,
    pub histograms: Vec<GapHistogram>,
}

fn bin_of(edges: &[f64], v: f64) -> Option<usize> {
    let last = *edges.last()?;
    if !(v >= edges[0] && v <= last) {
        return None;
    }
    let i = edges.partition_point(|&e| e <= v);
    Some(i.saturating_sub(1).min(edges.len() - 2))
}

/// Distribution tables over the ego state at each event start. Positions
/// never observed produce no rows.
pub fn emit_distribution_stats<'a, I>(corpus: I) -> DistributionTables
where
    I: IntoIterator<Item = (&'a Recording, &'a [LaneChangeEvent])> + Clone,
{
    let stats = fit_neighbor_stats(corpus.clone());
    let nd = DISTANCE_EDGES.len() - 1;
    let nv = SPEED_DIFF_EDGES.len() - 1;
    let mut hists: Vec<GapHistogram> = NeighborPosition::ALL
        .iter()
        .map(|&position| GapHistogram {
            position,
            counts: vec![vec![0; nv]; nd],
            outside: 0,
        })
        .collect();
    for (rec, events) in corpus {
        for e in events {
            let Some(ego) = rec.track(e.track_id).and_then(|t| t.frame_at(e.start_frame)) else {
                continue;
            };
            for (i, nb) in resolve_neighbors(rec, ego).iter().enumerate() {
                let Some(nb) = nb else { continue };
                let h = &mut hists[i];
                match (
                    bin_of(&DISTANCE_EDGES, gap(ego, nb)),
                    bin_of(&SPEED_DIFF_EDGES, nb.speed() - ego.speed()),
                ) {
                    (Some(a), Some(b)) => h.counts[a][b] += 1,
                    _ => h.outside += 1,
                }
            }
        }
    }

    let mut tables = DistributionTables::default();
    for pos in NeighborPosition::ALL {
        let Some(p) = stats.get(pos) else { continue };
        tables.bands.push(BandRow {
            position: pos,
            count: p.count,
            mu: p.mu,
            sigma: p.sigma,
            minus_2sigma: p.mu - 2.0 * p.sigma,
            minus_1sigma: p.mu - p.sigma,
            plus_1sigma: p.mu + p.sigma,
            plus_2sigma: p.mu + 2.0 * p.sigma,
        });
        tables.histograms.push(hists[pos.index()].clone());
    }
    tables
}

impl DistributionTables {
    pub fn write_bands_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["position", "count", "mu", "sigma", "mu_minus_2sigma", "mu_minus_sigma", "mu_plus_sigma", "mu_plus_2sigma"])?;
        for r in &self.bands {
            w.write_record([
                r.position.key().to_owned(),
                r.count.to_string(),
                r.mu.to_string(),
                r.sigma.to_string(),
                r.minus_2sigma.to_string(),
                r.minus_1sigma.to_string(),
                r.plus_1sigma.to_string(),
                r.plus_2sigma.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Long format: one row per nonempty cell plus one `outside` row per position.
    pub fn write_histogram_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["position", "distance_lo", "distance_hi", "speed_diff_lo", "speed_diff_hi", "count"])?;
        for h in &self.histograms {
            for (a, row) in h.counts.iter().enumerate() {
                for (b, &c) in row.iter().enumerate() {
                    if c == 0 {
                        continue;
                    }
                    w.write_record([
                        h.position.key().to_owned(),
                        DISTANCE_EDGES[a].to_string(),
                        DISTANCE_EDGES[a + 1].to_string(),
                        SPEED_DIFF_EDGES[b].to_string(),
                        SPEED_DIFF_EDGES[b + 1].to_string(),
                        c.to_string(),
                    ])?;
                }
            }
            w.write_record([h.position.key(), "", "", "", "", &h.outside.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

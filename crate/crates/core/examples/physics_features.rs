// Physics features of one history window, looked up by name.

use lane_intent::features::{extract_named, fit_neighbor_stats, FeatureContext, FeatureParams};
use lane_intent::ingest::{synthesize_recording, SynthConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = SynthConfig {
        tracks_per_location: 40,
        seed: 2,
        ..SynthConfig::default()
    };
    let (rec, events) = synthesize_recording(&cfg, 0)?;
    let stats = fit_neighbor_stats([(&rec, events.as_slice())]);
    let track = rec.tracks.iter().max_by_key(|t| t.frames.len()).ok_or("no tracks")?;
    let own: Vec<_> = events.iter().filter(|e| e.track_id == track.track_id).copied().collect();
    let ctx = FeatureContext {
        recording: &rec,
        track,
        events: &own,
        stats: &stats,
        params: FeatureParams::default(),
    };
    let history = 25;
    let anchor = track.first_frame() + history as u32 - 1;
    let w = extract_named(&ctx, anchor, history)?;
    println!("track {} at frame {anchor}: {} features", track.track_id, w.len());
    for name in ["speed", "lat_velocity", "lead_d", "lead_cgt", "thw", "ttc", "lc_frequency"] {
        match w.get(name) {
            Some(Some(v)) => println!("  {name:<24}{v:.4}"),
            Some(None) => println!("  {name:<24}missing"),
            None => {}
        }
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}

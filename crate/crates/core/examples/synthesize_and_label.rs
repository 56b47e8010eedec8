// Synthesize a small corpus and recover its lane changes from the
// lateral lane offsets alone.

use lane_intent::ingest::{synthesize_corpus, SynthConfig};
use lane_intent::labeling::{detect_events, LabelingParams};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = SynthConfig {
        n_locations: 2,
        tracks_per_location: 60,
        maneuver_rate: 0.2,
        seed: 5,
        ..SynthConfig::default()
    };
    let params = LabelingParams::default();
    let (mut truth, mut found, mut matched) = (0, 0, 0);
    for (rec, events) in synthesize_corpus(&cfg)? {
        truth += events.len();
        for track in &rec.tracks {
            for e in detect_events(track, &params, rec.dataset_kind, rec.sampling_rate)? {
                found += 1;
                let hit = events.iter().any(|t| {
                    t.track_id == e.track_id
                        && t.direction == e.direction
                        && t.start_frame.abs_diff(e.start_frame) <= 1
                });
                matched += usize::from(hit);
            }
        }
    }
    println!("ground truth {truth}, detected {found}, matched {matched}");
    assert_eq!((found, matched), (truth, truth));
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}

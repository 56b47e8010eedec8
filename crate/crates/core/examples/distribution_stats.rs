// Gap and speed-difference distributions of the neighbors around lane
// changes, written as plot-ready tables.

use lane_intent::ingest::{synthesize_corpus, SynthConfig};
use lane_intent::stats::emit_distribution_stats;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = synthesize_corpus(&SynthConfig {
        n_locations: 2,
        tracks_per_location: 100,
        maneuver_rate: 0.2,
        seed: 8,
        ..SynthConfig::default()
    })?;
    let tables = emit_distribution_stats(corpus.iter().map(|(r, e)| (r, e.as_slice())));
    for b in &tables.bands {
        println!(
            "{:<12} n={:<4} mu={:7.2} sigma={:6.2}  [{:.1}, {:.1}]",
            b.position.key(),
            b.count,
            b.mu,
            b.sigma,
            b.minus_2sigma,
            b.plus_2sigma
        );
    }
    let mut csv = Vec::new();
    tables.write_histogram_csv(&mut csv)?;
    println!("histogram table: {} lines", String::from_utf8(csv)?.lines().count());
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}

//! Samples the final state of the eight-site ring and shows how detection
//! loss reshapes the excitation-number histogram and the g² signal.
//!
//! cargo run --release --example detection_histograms -- [runs]

use rydex::config::load_config;
use rydex::mis::final_state;
use rydex::observables::{excitation_histogram, sample_states, sampled_g2, thin_detection, ProjectorMode};
use rydex::rng::derive_seed;

fn main() -> rydex::Result<()> {
    let cfg = load_config(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/octagon.toml"))?;
    let runs = std::env::args().nth(1).map_or(cfg.sampling.runs, |r| r.parse().expect("integer run count"));
    let seed = cfg.seed();
    let state = final_state(&cfg.geometry, &cfg.levels, &cfg.schedule, cfg.simulation.dt_ns)?;
    let samples = sample_states(&state, runs, derive_seed(seed, "sample"))?;
    let n = state.n_sites();

    let header: String = (0..=n).map(|m| format!("{m:>8}")).collect();
    println!("  η    mean {header}");
    let mut efficiencies = vec![1.0];
    efficiencies.extend(&cfg.sampling.efficiencies);
    for (i, &eta) in efficiencies.iter().enumerate() {
        let detected = thin_detection(&samples, eta, derive_seed(seed, &format!("thin/{i}")))?;
        let h = excitation_histogram(&detected, None, eta);
        let row: String = h.counts.iter().map(|c| format!("{c:>8}")).collect();
        let g2 = sampled_g2(&detected, ProjectorMode::AnyRydberg)?;
        println!(
            "  {eta:.1}  {:.3} {row}   g²(1) {:+.4} g²(2) {:+.4}",
            detected.mean_count(None),
            g2.ring_average(1),
            g2.ring_average(2)
        );
    }
    Ok(())
}

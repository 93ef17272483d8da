//! Evolves a shipped ring config and prints the most probable final states,
//! the objective-state probability over time and the g² correlations.
//!
//! cargo run --release --example z2_ring -- [config]

use rydex::config::load_config;
use rydex::mis::{blockade_graph, objective_states};
use rydex::observables::{g2_matrix, objective_probability, ProjectorMode};
use rydex::propagator::{objective_tracking_evolve, HamiltonianContext};

fn main() -> rydex::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/configs/hexagon.toml").into());
    let cfg = load_config(&path)?;
    let n = cfg.geometry.n_sites();
    let graph = blockade_graph(&cfg.geometry, &cfg.levels, cfg.schedule.omega)?;
    let targets = objective_states(&graph, &cfg.levels)?;
    let ctx = HamiltonianContext::new(cfg.levels.clone(), cfg.schedule, &cfg.geometry)?;
    let times = cfg.simulation.record_times(cfg.schedule.duration);
    let run = objective_tracking_evolve(&ctx, &targets, cfg.simulation.dt_ns, &times, 6)?;

    println!("{n}-site ring, {} objective states, norm drift {:.1e}", targets.len(), run.norm_drift);
    for (t, p) in run.times.iter().zip(&run.probabilities).step_by(4) {
        println!("  t = {t:.3} ns  P_objective = {:.5}", p.iter().sum::<f64>());
    }
    println!("\nmost probable final states:");
    for s in &run.top_k {
        println!("  {}  {:.5}", s.state_label, s.probability);
    }
    println!("P_objective(final) = {:.5}", objective_probability(&run.final_state, &targets)?);

    let g2 = g2_matrix(&run.final_state, ProjectorMode::target(&cfg.levels));
    println!("\ng² from site 0 (target level):");
    for j in 1..n {
        println!("  (0,{j})  {:+.4e}", g2.get(0, j));
    }
    for sep in 1..=n / 2 {
        println!("  ring average at separation {sep}: {:+.4e}", g2.ring_average(sep));
    }
    Ok(())
}

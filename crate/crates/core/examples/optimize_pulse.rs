//! Optimize the detuning sweep on a 5-site ring, then reuse it on larger
//! rings and report the most probable final states.
//!
//! cargo run --release --example optimize_pulse -- [budget] [restarts] [max_sites]

use rydex::mis::{blockade_graph, objective_states};
use rydex::model::{polygon_geometry, DriveSchedule, LevelSet, DEFAULT_OMEGA, DEFAULT_SPACING_UM};
use rydex::observables::objective_probability;
use rydex::optimize::{optimize_pulse, transfer_schedule, PulseSearchSpec};
use rydex::propagator::{objective_tracking_evolve, HamiltonianContext, DEFAULT_DT};

fn main() -> rydex::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().expect("integer argument"));
    let budget = args.next().unwrap_or(400);
    let restarts = args.next().unwrap_or(8);
    let max_sites = args.next().unwrap_or(8);

    let levels = LevelSet::cu2o_default(DEFAULT_OMEGA)?;
    let template = DriveSchedule::default();
    let spec = PulseSearchSpec { budget, restarts, ..PulseSearchSpec::default() };
    let started = std::time::Instant::now();
    let result = optimize_pulse(&spec, &levels, &template)?;
    println!(
        "5 sites: baseline {:.5}, optimized {:.5} after {} evaluations ({:.1?})",
        result.initial_probability,
        result.best_probability,
        result.evaluations.len(),
        started.elapsed()
    );
    let [a, b, c, dmin, dmax] = result.best_params;
    println!("a = {a:.6e}  b = {b:.6e}  c = {c:.6e}  delta_min = {dmin:.6}  delta_max = {dmax:.6}");

    for n in 6..=max_sites {
        let schedule = transfer_schedule(&result, n);
        let geometry = polygon_geometry(n, DEFAULT_SPACING_UM)?;
        let graph = blockade_graph(&geometry, &levels, schedule.omega)?;
        let targets = objective_states(&graph, &levels)?;
        let ctx = HamiltonianContext::new(levels.clone(), schedule, &geometry)?;
        let run = objective_tracking_evolve(&ctx, &targets, DEFAULT_DT, &[], 3)?;
        let p = objective_probability(&run.final_state, &targets)?;
        let top: Vec<String> = run.top_k.iter().map(|s| format!("{} {:.5}", s.state_label, s.probability)).collect();
        println!("{n} sites: P_objective = {p:.5} ({} states); top: {}", targets.len(), top.join(", "));
    }
    Ok(())
}

//! Resonant Rabi flopping of one site, then the collective √2 oscillation of
//! a strongly blockaded pair.
//!
//! cargo run --release --example blockade_pair

use rydex::basis::{BasisIndex, StateVector};
use rydex::model::{DriveSchedule, Geometry, LevelSet, DEFAULT_OMEGA};
use rydex::propagator::{evolve, HamiltonianContext};

fn main() -> rydex::Result<()> {
    let omega = DEFAULT_OMEGA;
    let c6 = 3000.0;
    let levels = LevelSet::single(25, c6)?;

    let pi_time = std::f64::consts::PI / omega;
    let ctx = HamiltonianContext::new(levels.clone(), DriveSchedule::resonant(omega, pi_time), &Geometry::chain(1, 1.0)?)?;
    let traj = evolve(&StateVector::ground(1, 1)?, &ctx, 5e-4, &[])?;
    println!("single site after a π pulse ({pi_time:.4} ns): P_r = {:.10}", traj.final_state().unwrap().probability(BasisIndex(1)));

    let spacing = (c6 / (1000.0 * omega)).powf(1.0 / 6.0);
    let period = 2.0 * std::f64::consts::PI / (2f64.sqrt() * omega);
    let ctx = HamiltonianContext::new(levels, DriveSchedule::resonant(omega, period), &Geometry::chain(2, spacing)?)?;
    let times: Vec<f64> = (1..=10).map(|k| period * k as f64 / 10.0).collect();
    let traj = evolve(&StateVector::ground(2, 1)?, &ctx, 2e-5, &times)?;
    println!("\npair at {spacing:.3} μm (V = 1000 Ω)");
    println!("  t (ns)    P(one excited)   sin²(√2Ωt/2)   P(both)");
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let one = s.probability(BasisIndex(1)) + s.probability(BasisIndex(2));
        let formula = (2f64.sqrt() * omega * t / 2.0).sin().powi(2);
        println!("  {t:.4}    {one:.6}         {formula:.6}       {:.2e}", s.probability(BasisIndex(3)));
    }
    Ok(())
}

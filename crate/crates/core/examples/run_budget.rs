//! Exponential scaling fit of ring objective probabilities, extrapolation to
//! 50 sites, run budgets for excitons and atoms, and the decay bound.
//!
//! cargo run --example run_budget

use rydex::analysis::{decay_bound, extrapolate, fit_exponential_scaling, objective_probability_for_runs, run_budget};

fn main() -> rydex::Result<()> {
    let points = [(6.0, 0.1214), (8.0, 0.06127), (10.0, 0.03082), (12.0, 0.01545)];
    let fit = fit_exponential_scaling(&points)?;
    println!("P(n) = {:.4} · exp(−{:.4} n), R² = {:.6}", fit.amplitude, fit.rate, fit.r_squared());
    for (n, p) in points {
        println!("  n = {n:>2}: {p:.5} (fit {:.5})", fit.predict(n));
    }
    let (p50, sigma) = extrapolate(&fit, 50.0);
    println!("P(50) = {p50:.3e} ± {sigma:.1e}");

    let excitons = run_budget(p50, 0.9, 25, 0.99, 5e-9)?;
    println!("\nexcitons (η = 0.9, 5 ns per run): {:.3e} runs, {:.2} s", excitons.runs as f64, excitons.wall_time_s);
    let p_atoms = objective_probability_for_runs(842, 0.99, 25, 0.99)?;
    let atoms = run_budget(p_atoms, 0.99, 25, 0.99, 0.25)?;
    println!("atoms (η = 0.99, 250 ms per run, P = {p_atoms:.3e}): {} runs, {:.1} s", atoms.runs, atoms.wall_time_s);

    let (max, mean) = decay_bound(0.24, 0.1, 1.0)?;
    println!("\ndecay during the drive: at most {:.1}%, typically {:.1}%", 100.0 * max, 100.0 * mean);
    Ok(())
}

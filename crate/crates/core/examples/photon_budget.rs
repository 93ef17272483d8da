//! Photon counts for blockade-based fluorescence readout through 2P and 6P
//! probe excitons, and how well the two site states separate.
//!
//! cargo run --example photon_budget

use rydex::analysis::{exciton_radius, photon_budget};

fn main() -> rydex::Result<()> {
    for (n, l) in [(25, 0), (2, 1), (6, 1)] {
        println!("⟨r⟩ for n={n}, l={l}: {:.2} nm", 1000.0 * exciton_radius(n, l)?);
    }
    println!();
    for n_low in [2, 6] {
        let b = photon_budget(25, 0, n_low, 1, 3.0, 0.5)?;
        println!(
            "{n_low}P probe: {:.1} cycles, {:.3e} excitons per site, {:.3e} photons, 6σ/x̄ = {:.3e}",
            b.cycles, b.simultaneous_excitons, b.photons, b.distinguishability
        );
    }
    Ok(())
}

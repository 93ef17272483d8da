//! Hydrogenic ladder around n = 25: fitted Rydberg constant and quantum
//! defect, per-level detunings and Rabi frequencies, and the blockade radius.
//!
//! cargo run --release --example level_ladder

use rydex::model::{
    blockade_radius, detuning_ladder, effective_rabi, fit_level_structure, level_gaps, rabi_ladder, LevelSet,
    DEFAULT_GAP_DOWN, DEFAULT_GAP_UP, DEFAULT_OMEGA, DEFAULT_TARGET_N, TWO_PI,
};

fn main() -> rydex::Result<()> {
    let (ry, defect) = fit_level_structure(DEFAULT_GAP_UP, DEFAULT_GAP_DOWN, DEFAULT_TARGET_N)?;
    let (up, down) = level_gaps(ry, defect, DEFAULT_TARGET_N);
    println!("Ry = 2π·{:.2} GHz, δ_p = {defect:.4}", ry / TWO_PI);
    println!("gaps around n=25: up 2π·{:.3} GHz, down 2π·{:.3} GHz", up / TWO_PI, down / TWO_PI);

    let levels = LevelSet::cu2o_default(DEFAULT_OMEGA)?;
    println!("\n  n   code   Δ_k at Δ=0 (GHz)   Ω_k/Ω     C_k (GHz·μm⁶)");
    for (i, &n) in levels.n_values().iter().enumerate() {
        let delta = detuning_ladder(&levels, 0.0, n)?;
        let omega = rabi_ladder(&levels, DEFAULT_OMEGA, n)?;
        println!(
            "  {n:<3} {:<6} {:>+12.3}      {:>7.4}   {:>10.1}",
            i + 1,
            delta / TWO_PI,
            omega / DEFAULT_OMEGA,
            levels.c6()[i] / TWO_PI
        );
    }

    let target = levels.target_index();
    let rb = blockade_radius(levels.c6()[target], DEFAULT_OMEGA)?;
    println!("\nblockade radius at Ω = 2π·1.404 GHz: {rb:.3} μm");

    // two-photon drive via 2P, intermediate detuning well above both couplings
    let two_photon = effective_rabi(TWO_PI * 15.0, TWO_PI * 15.0, TWO_PI * 160.256)?;
    println!("effective Rabi: 2π·{:.3} GHz (regime warning: {})", two_photon.omega / TWO_PI, two_photon.regime_warning);
    Ok(())
}

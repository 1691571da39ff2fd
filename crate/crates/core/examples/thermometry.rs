//! Simulate noisy blue-sideband flops, fit n̄, then convert a heating rate to
//! electric-field noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use surftrap::analysis::IonSpecies;
use surftrap::constants::angular;
use surftrap::thermometry::{
    add_noise, fit_heating_rate, fit_nbar, heating_to_noise, lamb_dicke, noise_table, rabi_flop, synthetic_heating_series,
    FitOptions, FlopOptions, MotionalState, NoiseModel, SidebandKind, HEATING_TABLE,
};

fn main() -> surftrap::Result<()> {
    let ion = IonSpecies::ca40();
    let axial = angular(1.069e6);
    let eta = lamb_dicke(&ion, axial)?;
    println!("Lamb-Dicke parameter {eta:.4}");

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let t: Vec<f64> = (0..41).map(|i| 10e-6 * i as f64).collect();
    let clean = rabi_flop(&MotionalState::new(0.8, axial)?, SidebandKind::Blue, angular(100e3), eta, &t, &FlopOptions::default())?;
    let noisy = add_noise(&clean, &NoiseModel::Binomial { shots: 200 }, &mut rng)?;
    let fit = fit_nbar(&noisy, &FitOptions::default())?;
    println!("fitted n̄ = {:.3} ± {:.3} (true 0.8)", fit.nbar, fit.nbar_err);

    let waits: Vec<f64> = (0..6).map(|i| 0.3 * i as f64).collect();
    let series = synthetic_heating_series(0.05, 0.37, &waits, 0.05, &mut rng)?;
    let heating = fit_heating_rate(&series)?;
    println!("heating rate {:.3} ± {:.3} quanta/s", heating.rate, heating.rate_err);
    println!("S_E = {:.3e} V²/m²/Hz", heating_to_noise(heating.rate, axial, &ion)?);

    for row in noise_table(&HEATING_TABLE, &ion)? {
        println!("trap {}: {:.2} quanta/s at {:.3} MHz -> {:.2e} V²/m²/Hz", row.trap, row.rate, row.axial_hz / 1e6, row.noise_psd);
    }
    Ok(())
}

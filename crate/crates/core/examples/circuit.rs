//! RF resonator and filter numbers for the silicon and fused-silica presets.

use surftrap::circuits::{lc_resonance, paper_divider_check, power_dissipation, q_vs_temperature, rc_transfer, FilterSpec, ResonatorModel};
use surftrap::constants::angular;

fn main() -> surftrap::Result<()> {
    println!("resonance: {:.3} MHz", lc_resonance(6.3e-6, 9.5e-12)? / 1e6);
    println!("power at Q = 1205: {:.2} mW", power_dissipation(140.0, 9.5e-12, angular(20.6e6), 1205.0)? * 1e3);

    let temps = [295.0, 200.0, 150.0, 100.0, 50.0, 20.0, 4.0];
    for (name, model) in [("silicon", ResonatorModel::paper_silicon()), ("fused silica", ResonatorModel::fused_silica())] {
        println!("{name}:");
        for p in q_vs_temperature(&model, &temps)? {
            println!("  {:>5.0} K  Q = {:>8.1}  (inductor {:.0}, dielectric {:.3e})", p.temperature_k, p.q, p.q_inductor, p.q_capacitor);
        }
    }

    for (name, f) in [("in-vacuum", FilterSpec::in_vacuum()), ("external", FilterSpec::external())] {
        let r = rc_transfer(&f, 20.6e6)?;
        println!("{name} filter: cutoff {:.1} Hz, |H(20.6 MHz)| = {:.3e}", r.cutoff_hz, r.magnitude);
    }

    let check = paper_divider_check();
    for r in &check.readings {
        println!("divider {:<24} 1:{:.0}  consistent: {}", r.topology, r.divider.ratio, r.consistent);
    }
    Ok(())
}

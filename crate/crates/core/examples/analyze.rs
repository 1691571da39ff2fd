//! RF-only analysis of the reference trap: height, frequencies, depth.

use surftrap::analysis::{analyze, IonSpecies, RfDrive, Trap};
use surftrap::geometry::build_paper_layout;
use surftrap::solver::default_seed;
use surftrap::voltages::VoltageSet;

fn main() -> surftrap::Result<()> {
    let layout = build_paper_layout();
    let seed = default_seed(&layout);
    let trap = Trap::new(layout, RfDrive::paper(), IonSpecies::ca40(), VoltageSet::new())?;
    let report = analyze(&trap, &seed)?;
    println!("height          {:.1} µm", report.height_m * 1e6);
    println!("lateral offset  {:.2} µm", report.position_m[0] * 1e6);
    for (f, axis) in report.secular_frequencies_hz.iter().zip(&report.principal_axes) {
        println!("mode {:>9.4} MHz along [{:+.3}, {:+.3}, {:+.3}]", f / 1e6, axis[0], axis[1], axis[2]);
    }
    println!("depth           {:.1} meV (lower bound only: {})", report.depth_ev * 1e3, report.depth_is_lower_bound);
    println!("max |q|         {:.3}", report.q_max);
    Ok(())
}

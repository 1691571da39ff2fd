//! Solve DC voltages for a 1.069 MHz axial mode and verify the result.

use surftrap::analysis::{report_at, IonSpecies, RfDrive, Trap};
use surftrap::geometry::build_paper_layout;
use surftrap::solver::{rf_nil, solve_confinement, SolveSpec};

fn main() -> surftrap::Result<()> {
    let layout = build_paper_layout();
    let (drive, ion) = (RfDrive::paper(), IonSpecies::ca40());
    let volts = solve_confinement(&layout, &drive, &ion, &SolveSpec::paper(true))?;
    for (name, v) in volts.iter() {
        println!("{name:<8} {v:>9.4} V");
    }
    let trap = Trap::new(layout, drive, ion, volts)?;
    let report = report_at(&trap, &rf_nil(&trap)?)?;
    println!("axial {:.4} MHz, tilt {:.1}°, depth {:.1} meV", report.axial_frequency_hz / 1e6, report.radial_tilt_deg, report.depth_ev * 1e3);
    Ok(())
}

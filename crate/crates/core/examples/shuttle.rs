//! Transport the ion one segment pitch along the axis and write the waveform.

use surftrap::analysis::{IonSpecies, RfDrive};
use surftrap::constants::angular;
use surftrap::geometry::build_paper_layout;
use surftrap::solver::{shuttle_waveform, SolveSpec};

fn main() -> surftrap::Result<()> {
    let layout = build_paper_layout();
    let spec = SolveSpec::all_dc(&layout, angular(1.069e6));
    let wf = shuttle_waveform(&layout, &RfDrive::paper(), &IonSpecies::ca40(), 0.0, 360e-6, 7, &spec)?;
    for step in &wf.steps {
        println!("t = {:.3}  z = {:>6.1} µm  max|V| = {:.2} V", step.time, step.position_m[2] * 1e6, step.volts.max_abs());
    }
    print!("{}", wf.to_csv());
    Ok(())
}

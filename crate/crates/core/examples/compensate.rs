//! Cancel a stray field and compare micromotion before and after.

use nalgebra::Vector3;
use surftrap::analysis::{find_minimum, micromotion_amplitude, secular_analysis, IonSpecies, MinimizeOptions, RfDrive, Trap};
use surftrap::geometry::build_paper_layout;
use surftrap::solver::{compensate, rf_nil, solve_confinement, SolveSpec};

fn excess_micromotion(trap: &Trap, nil: &surftrap::field::FieldPoint) -> surftrap::Result<f64> {
    let r = find_minimum(trap, nil, &MinimizeOptions::default())?;
    let q = secular_analysis(trap, &r).q_matrix;
    Ok(micromotion_amplitude(&q, &(r.to_vector() - nil.to_vector())).norm())
}

fn main() -> surftrap::Result<()> {
    let layout = build_paper_layout();
    let (drive, ion) = (RfDrive::paper(), IonSpecies::ca40());
    let spec = SolveSpec::paper(true);
    let base = solve_confinement(&layout, &drive, &ion, &spec)?;
    let stray = Vector3::new(10.0, 5.0, 0.0);

    let trap = Trap::new(layout.clone(), drive, ion, base.clone())?;
    let nil = rf_nil(&trap)?;
    let before = excess_micromotion(&trap.clone().with_stray_field(stray), &nil)?;

    let fixed = compensate(&layout, &drive, &ion, &stray, &base, &spec)?;
    let after = excess_micromotion(&trap.with_dc(fixed.clone())?.with_stray_field(stray), &nil)?;
    println!("stray field {stray:?} V/m");
    println!("micromotion amplitude: {:.2} nm uncompensated, {:.2e} nm compensated", before * 1e9, after * 1e9);
    for (name, v) in fixed.iter() {
        println!("{name:<8} {:>+9.4} V change", v - base.get(name));
    }
    Ok(())
}

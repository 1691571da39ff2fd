//! Evaluate the closed-form rectangle potential and a superposed field.

use surftrap::field::{rect_gradient, rect_potential, superpose, FieldPoint};
use surftrap::geometry::{build_paper_layout, Rect};
use surftrap::voltages::VoltageSet;

fn main() -> surftrap::Result<()> {
    let rect = Rect::new(0.0, 100e-6, 0.0, 200e-6)?;
    let p = FieldPoint::new(50e-6, 150e-6, 100e-6)?;
    let g = rect_gradient(&rect, &p);
    println!("unit-voltage rectangle: φ = {:.9} V, ∇φ = ({:.4e}, {:.4e}, {:.4e}) V/m", rect_potential(&rect, &p), g.x, g.y, g.z);

    // Field of the trap with 1 V on the centre electrode, scanned upwards.
    let layout = build_paper_layout();
    let volts = VoltageSet::from_pairs([("centre", 1.0)]);
    for y_um in [50.0, 100.0, 200.0, 400.0] {
        let s = superpose(&layout, &volts, &FieldPoint::new(0.0, y_um * 1e-6, 0.0)?)?;
        println!("y = {y_um:>5} µm: φ = {:.5} V, Ey = {:>10.1} V/m", s.potential, s.field.y);
    }
    Ok(())
}

//! Build the reference layout, validate it, and print its electrodes.

use surftrap::geometry::{build_paper_layout, validate_layout};

fn main() -> surftrap::Result<()> {
    let layout = build_paper_layout();
    let problems = validate_layout(&layout);
    println!("{} electrodes, {} validation problems", layout.electrodes.len(), problems.len());
    for e in &layout.electrodes {
        let r = &e.rects[0];
        println!(
            "{:<8} {:<9} x = [{:>8.1}, {:>8.1}] µm  z = [{:>8.1}, {:>8.1}] µm",
            e.name,
            format!("{:?}", e.role),
            r.x_min * 1e6,
            r.x_max * 1e6,
            r.z_min * 1e6,
            r.z_max * 1e6
        );
    }
    // Layouts round-trip through JSON for use with `--layout-file`.
    let json = layout.to_json()?;
    println!("JSON form: {} bytes", json.len());
    Ok(())
}

//! Run the full reference pipeline and print its pass/fail summary.

use surftrap::config::RunConfig;
use surftrap::reproduce::{run_reproduce_paper, summary};

fn main() {
    let report = run_reproduce_paper(&RunConfig::default());
    println!("stages completed: {}", report.completed_stages.join(" → "));
    print!("{}", summary(&report));
    if !report.all_passed {
        std::process::exit(1);
    }
}

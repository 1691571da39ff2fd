mod common;

use common::*;
use nalgebra::Vector3;
use surftrap::analysis::{find_minimum, micromotion_amplitude, secular_analysis, IonSpecies, MinimizeOptions, RfDrive, Trap};
use surftrap::constants::hertz;
use surftrap::error::Error;
use surftrap::field::superpose;
use surftrap::geometry::{build_paper_layout, mirror_segment_name};
use surftrap::solver::{compensate, shuttle_waveform, solve_confinement, SolveSpec, VoltageSet, Waveform};

fn ca() -> IonSpecies {
    IonSpecies::ca40()
}

fn axial_hz(trap: &Trap, seed: &surftrap::field::FieldPoint) -> (surftrap::field::FieldPoint, f64) {
    let r = find_minimum(trap, seed, &MinimizeOptions::default()).unwrap();
    (r, hertz(secular_analysis(trap, &r).axial_frequency()))
}

#[test]
fn paper_set_respects_bound_and_round_trips() {
    let volts = paper_volts();
    assert!(volts.max_abs() <= 40.0, "max |V| = {}", volts.max_abs());
    assert!(volts.all_finite());
    let (r, f) = axial_hz(&paper_trap_dc(), &paper_rf_nil());
    assert!((f / 1.069e6 - 1.0).abs() <= 1e-3, "axial {f} Hz");
    // The DC field at the RF nil vanishes, so the minimum stays on the nil.
    let dc = superpose(&build_paper_layout(), &volts, &paper_rf_nil()).unwrap();
    assert!(dc.field.norm() < 0.1, "residual field {} V/m", dc.field.norm());
    assert!((r.to_vector() - paper_rf_nil().to_vector()).norm() < 0.1 * UM);
}

#[test]
fn segments_only_variant_also_solves() {
    let volts = solve_confinement(&build_paper_layout(), &RfDrive::paper(), &ca(), &SolveSpec::paper(false)).unwrap();
    assert!(volts.get("centre") == 0.0);
    let trap = paper_trap_rf().with_dc(volts).unwrap();
    let (_, f) = axial_hz(&trap, &paper_rf_nil());
    assert!((f / 1.069e6 - 1.0).abs() <= 1e-3, "axial {f} Hz");
}

#[test]
fn zero_target_gives_zero_voltages() {
    let spec = SolveSpec {
        target_axial_omega: 0.0,
        ..SolveSpec::paper(true)
    };
    let volts = solve_confinement(&build_paper_layout(), &RfDrive::paper(), &ca(), &spec).unwrap();
    // What remains cancels the pseudopotential gradient left at the located
    // nil by the minimizer's tolerance: micro-volts at most.
    assert!(volts.max_abs() < 1e-6, "{volts:?}");
}

#[test]
fn tight_bound_is_reported_as_infeasible() {
    let spec = SolveSpec {
        bound: 2.0,
        ..SolveSpec::paper(true)
    };
    match solve_confinement(&build_paper_layout(), &RfDrive::paper(), &ca(), &spec) {
        Err(Error::InfeasibleBound { electrodes, bound, .. }) => {
            assert_eq!(bound, 2.0);
            assert!(!electrodes.is_empty());
        }
        other => panic!("expected an infeasible-bound error, got {other:?}"),
    }
}

#[test]
fn unsuitable_electrodes_are_rank_deficient() {
    let spec = SolveSpec {
        allowed: vec!["centre".into()],
        bound: 1e6,
        ..SolveSpec::paper(true)
    };
    match solve_confinement(&build_paper_layout(), &RfDrive::paper(), &ca(), &spec) {
        Err(Error::RankDeficient { .. }) => {}
        other => panic!("expected rank deficiency, got {other:?}"),
    }
}

#[test]
fn bound_is_active_in_the_solve_not_clipped() {
    // Just above the infeasibility threshold the bound binds on some
    // electrodes, and the round trip still meets the frequency target.
    let base = paper_volts().max_abs();
    let spec = SolveSpec {
        bound: 0.97 * base,
        ..SolveSpec::paper(true)
    };
    if let Ok(volts) = solve_confinement(&build_paper_layout(), &RfDrive::paper(), &ca(), &spec) {
        assert!(volts.max_abs() <= spec.bound + 1e-12);
        let (_, f) = axial_hz(&paper_trap_rf().with_dc(volts).unwrap(), &paper_rf_nil());
        assert!((f / 1.069e6 - 1.0).abs() <= 1e-3);
    }
}

fn compensated(stray: Vector3<f64>) -> VoltageSet {
    compensate(&build_paper_layout(), &RfDrive::paper(), &ca(), &stray, &paper_volts(), &SolveSpec::paper(true)).unwrap()
}

#[test]
fn zero_stray_leaves_base_unchanged() {
    let out = compensated(Vector3::zeros());
    assert!(out.max_abs_diff(&paper_volts()) < 1e-9);
}

#[test]
fn compensation_is_linear_in_stray() {
    let base = paper_volts();
    let stray = Vector3::new(4.0, -3.0, 0.0);
    let d1 = compensated(stray).added(&base.scaled(-1.0));
    let d2 = compensated(2.0 * stray).added(&base.scaled(-1.0));
    let rel = d2.max_abs_diff(&d1.scaled(2.0)) / d2.max_abs();
    assert!(rel <= 1e-6, "relative deviation {rel:e}");
}

#[test]
fn compensation_cancels_stray_and_micromotion() {
    let stray = Vector3::new(10.0, 0.0, 0.0);
    let volts = compensated(stray);
    assert!(volts.max_abs() <= 40.0);
    let nil = paper_rf_nil();
    let dc = superpose(&build_paper_layout(), &volts, &nil).unwrap();
    let net = dc.field + stray;
    assert!(net.norm() < 0.01, "net field {} V/m", net.norm());

    // Without compensation the stray field pushes the ion off the nil.
    let pushed = paper_trap_dc().with_stray_field(stray);
    let (r_pushed, _) = axial_hz(&pushed, &nil);
    let q = secular_analysis(&pushed, &r_pushed).q_matrix;
    let before = micromotion_amplitude(&q, &(r_pushed.to_vector() - nil.to_vector())).norm();

    let fixed = paper_trap_rf().with_dc(volts).unwrap().with_stray_field(stray);
    let (r, f) = axial_hz(&fixed, &nil);
    let sec = secular_analysis(&fixed, &r);
    let after = micromotion_amplitude(&sec.q_matrix, &(r.to_vector() - nil.to_vector())).norm();
    assert!(after < 1e-9, "micromotion {after:e} m (uncompensated {before:e} m)");
    assert!(before > 100.0 * after);
    assert!((f / 1.069e6 - 1.0).abs() < 0.01);
}

fn one_pitch(to_z: f64, steps: usize) -> Waveform {
    let layout = build_paper_layout();
    let spec = SolveSpec::all_dc(&layout, SolveSpec::paper(true).target_axial_omega);
    shuttle_waveform(&layout, &RfDrive::paper(), &ca(), 0.0, to_z, steps, &spec).unwrap()
}

#[test]
fn one_pitch_shuttle_tracks_every_waypoint() {
    let wf = one_pitch(360.0 * UM, 7);
    let rf = paper_trap_rf();
    for (k, step) in wf.steps.iter().enumerate() {
        assert!(step.volts.max_abs() <= 40.0);
        let trap = rf.with_dc(step.volts.clone()).unwrap();
        let [x, y, z] = step.position_m;
        let (r, f) = axial_hz(&trap, &pt(x, y, z));
        let target_z = 360.0 * UM * k as f64 / 6.0;
        assert!((r.z() - target_z).abs() < 1.0 * UM, "step {k}: z = {}", r.z());
        assert!((r.to_vector() - Vector3::from(step.position_m)).norm() < 1.0 * UM);
        assert!((f / 1.069e6 - 1.0).abs() < 0.05, "step {k}: axial {f} Hz");
    }
    let times: Vec<f64> = wf.steps.iter().map(|s| s.time).collect();
    assert!(times.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn stationary_shuttle_repeats_the_confinement_set() {
    let layout = build_paper_layout();
    let spec = SolveSpec::all_dc(&layout, SolveSpec::paper(true).target_axial_omega);
    let wf = shuttle_waveform(&layout, &RfDrive::paper(), &ca(), 0.0, 0.0, 3, &spec).unwrap();
    let direct = solve_confinement(&layout, &RfDrive::paper(), &ca(), &spec).unwrap();
    for s in &wf.steps {
        assert!(s.volts.max_abs_diff(&direct) < 1e-6, "{}", s.volts.max_abs_diff(&direct));
    }
}

#[test]
fn reversed_shuttle_is_time_reversed() {
    let layout = build_paper_layout();
    let spec = SolveSpec::all_dc(&layout, SolveSpec::paper(true).target_axial_omega);
    let fwd = shuttle_waveform(&layout, &RfDrive::paper(), &ca(), 0.0, 360.0 * UM, 5, &spec).unwrap();
    let back = shuttle_waveform(&layout, &RfDrive::paper(), &ca(), 360.0 * UM, 0.0, 5, &spec).unwrap();
    for (a, b) in fwd.steps.iter().zip(back.steps.iter().rev()) {
        assert!(a.volts.max_abs_diff(&b.volts) < 1e-6, "{}", a.volts.max_abs_diff(&b.volts));
    }
}

#[test]
fn mirrored_shuttle_mirrors_the_segments() {
    let plus = one_pitch(360.0 * UM, 3);
    let minus = one_pitch(-360.0 * UM, 3);
    for (a, b) in plus.steps.iter().zip(&minus.steps) {
        for (name, v) in a.volts.iter() {
            let partner = mirror_segment_name(name, 7).unwrap_or_else(|| name.to_string());
            assert!((b.volts.get(&partner) - v).abs() < 1e-6, "{name} {v} vs {partner} {}", b.volts.get(&partner));
        }
    }
}

#[test]
fn waveform_csv_has_one_column_per_electrode() {
    let wf = one_pitch(360.0 * UM, 3);
    let csv = wf.to_csv();
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    assert_eq!(header[0], "time");
    assert_eq!(header.len(), 1 + wf.electrode_names().len());
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn shuttle_rejects_a_single_step() {
    let layout = build_paper_layout();
    let spec = SolveSpec::all_dc(&layout, 1e6);
    assert!(shuttle_waveform(&layout, &RfDrive::paper(), &ca(), 0.0, 1e-4, 1, &spec).is_err());
}

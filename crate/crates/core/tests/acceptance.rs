//! End-to-end acceptance suite. Each criterion is evaluated at a fixed
//! tolerance and reported on one PASS/FAIL line, with the measured values
//! underneath. The process exits nonzero if any criterion fails.

mod common;

use std::f64::consts::PI;
use std::process::ExitCode;

use common::*;
use nalgebra::{SymmetricEigen, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use surftrap::analysis::{find_minimum, secular_analysis, trap_depth, DepthOptions, IonSpecies, MinimizeOptions, RfDrive, Trap};
use surftrap::circuits::{lc_resonance, power_dissipation, rc_transfer, FilterSpec, ResonatorModel};
use surftrap::constants::hertz;
use surftrap::field::{rect_gradient, rect_hessian, rect_potential};
use surftrap::geometry::{build_paper_layout, build_paper_layout_with, PaperLayoutParams, Rect};
use surftrap::solver::{shuttle_waveform, solve_confinement, SolveSpec};
use surftrap::thermometry::{
    add_noise, fit_heating_rate, fit_nbar, heating_to_noise, lamb_dicke, noise_table, rabi_flop,
    synthetic_heating_series, FitOptions, FlopOptions, MotionalState, NoiseModel, SidebandKind, HEATING_TABLE,
};

const HEIGHT_M: f64 = 230e-6;
const HEIGHT_TOL: f64 = 0.10;
const DEPTH_EV: f64 = 0.075;
const DEPTH_TOL: f64 = 0.20;
const AXIAL_HZ: f64 = 1.069e6;
const AXIAL_TOL: f64 = 1e-3;
const MAX_VOLTS: f64 = 40.0;
const TILT_DEG: f64 = 20.0;
const TILT_TOL_DEG: f64 = 5.0;
const SYMMETRIC_TILT_TOL_DEG: f64 = 1e-6;
const NOISE_PSD: f64 = 4.4e-15;
const NOISE_TOL: f64 = 0.03;
const ORACLE_TOL: f64 = 1e-9;
const FD_TOL: f64 = 1e-5;
const TRACE_TOL: f64 = 1e-9;
const HUG_TOL: f64 = 1e-6;
const CORNER_TOL: f64 = 1e-4;
const WAYPOINT_TOL_M: f64 = 1e-6;
const DRIFT_TOL: f64 = 0.05;

struct Criterion {
    title: &'static str,
    checks: Vec<(bool, String)>,
}

impl Criterion {
    fn new(title: &'static str) -> Self {
        Self { title, checks: Vec::new() }
    }

    fn check(&mut self, ok: bool, detail: String) {
        self.checks.push((ok, detail));
    }

    fn within(&mut self, label: &str, value: f64, target: f64, rel_tol: f64, unit: &str) {
        let dev = (value / target - 1.0).abs();
        self.check(dev <= rel_tol, format!("{label}: {value:.6e} {unit} (target {target:e} ± {:.3}%)", 100.0 * rel_tol));
    }

    fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|(ok, _)| *ok)
    }
}

fn ca() -> IonSpecies {
    IonSpecies::ca40()
}

fn ion_height() -> Criterion {
    let mut c = Criterion::new("ion height, RF only");
    match find_minimum(&paper_trap_rf(), &pt(0.0, 150.0 * UM, 0.0), &MinimizeOptions::default()) {
        Ok(r) => c.within("height", r.y(), HEIGHT_M, HEIGHT_TOL, "m"),
        Err(e) => c.check(false, format!("minimum search failed: {e}")),
    }
    c
}

fn depth() -> Criterion {
    let mut c = Criterion::new("trap depth, RF only");
    match trap_depth(&paper_trap_rf(), &paper_rf_nil(), &DepthOptions::default()) {
        Ok(d) => {
            c.within("depth", d.depth, DEPTH_EV, DEPTH_TOL, "eV");
            c.check(!d.lower_bound, format!("escape saddle located (lower bound only: {})", d.lower_bound));
        }
        Err(e) => c.check(false, format!("depth search failed: {e}")),
    }
    c
}

fn dc_feasibility() -> Criterion {
    let mut c = Criterion::new("DC confinement solve");
    let spec = SolveSpec::paper(true);
    c.check(spec.allowed.len() == 7, format!("allowed electrodes: {}", spec.allowed.join(", ")));
    let volts = paper_volts();
    c.check(volts.max_abs() <= MAX_VOLTS, format!("max |V| = {:.3} V (limit {MAX_VOLTS} V)", volts.max_abs()));
    match find_minimum(&paper_trap_dc(), &paper_rf_nil(), &MinimizeOptions::default()) {
        Ok(r) => {
            let f = hertz(secular_analysis(&paper_trap_dc(), &r).axial_frequency());
            c.within("round-trip axial frequency", f, AXIAL_HZ, AXIAL_TOL, "Hz");
        }
        Err(e) => c.check(false, format!("round-trip minimum failed: {e}")),
    }
    c
}

fn tilt() -> Criterion {
    let mut c = Criterion::new("principal-axis tilt");
    let sec = secular_analysis(&paper_trap_dc(), &paper_minimum());
    c.check(
        (sec.tilt_deg.abs() - TILT_DEG).abs() <= TILT_TOL_DEG,
        format!("paper layout |tilt| = {:.3}° (target {TILT_DEG} ± {TILT_TOL_DEG}°)", sec.tilt_deg.abs()),
    );
    let layout = build_paper_layout_with(&PaperLayoutParams::default().symmetric_rails());
    let outcome = solve_confinement(&layout, &RfDrive::paper(), &ca(), &SolveSpec::paper(true))
        .and_then(|v| Trap::new(layout, RfDrive::paper(), ca(), v))
        .and_then(|trap| {
            let r = find_minimum(&trap, &pt(0.0, 200.0 * UM, 0.0), &MinimizeOptions::default())?;
            Ok(secular_analysis(&trap, &r).tilt_deg)
        });
    match outcome {
        Ok(t) => c.check(
            t.abs() <= SYMMETRIC_TILT_TOL_DEG || (t.abs() - 90.0).abs() <= SYMMETRIC_TILT_TOL_DEG,
            format!("symmetric rails tilt = {t:.3e}° (0° or 90° within {SYMMETRIC_TILT_TOL_DEG:e}°)"),
        ),
        Err(e) => c.check(false, format!("symmetric-rail control failed: {e}")),
    }
    c
}

fn circuit_numbers() -> Criterion {
    let mut c = Criterion::new("circuit numbers");
    let omega = 2.0 * PI * 20.6e6;
    match lc_resonance(6.3e-6, 9.5e-12) {
        Ok(f) => c.within("LC resonance", f, 20.6e6, 0.005, "Hz"),
        Err(e) => c.check(false, format!("resonance: {e}")),
    }
    match FilterSpec::new(100.0, 330e-9, 1).and_then(|f| rc_transfer(&f, 0.0)) {
        Ok(r) => c.within("in-vacuum RC cutoff", r.cutoff_hz, 4.82e3, 0.01, "Hz"),
        Err(e) => c.check(false, format!("RC filter: {e}")),
    }
    match power_dissipation(140.0, 9.5e-12, omega, 1205.0) {
        Ok(p) => c.within("dissipated power", p, 10e-3, 0.02, "W"),
        Err(e) => c.check(false, format!("power: {e}")),
    }
    let ext = FilterSpec::external();
    c.check(ext.stages == 6, format!("external filter stages: {}", ext.stages));
    c.within("external stage cutoff", ext.stage_cutoff_hz(), 80.0, 0.05, "Hz");
    c
}

fn q_curve() -> Criterion {
    let mut c = Criterion::new("resonator Q(T)");
    let si = ResonatorModel::paper_silicon();
    let grid: Vec<f64> = (0..=291).map(|i| 295.0 - i as f64).collect();
    let qs: Result<Vec<f64>, _> = grid.iter().map(|&t| si.q_at(t)).collect();
    match qs {
        Ok(qs) => {
            c.check(qs[0] < 20.0, format!("silicon Q(295 K) = {:.2} (< 20)", qs[0]));
            let cold = grid.iter().zip(&qs).filter(|(t, _)| **t <= 20.0).map(|(_, q)| *q).fold(f64::INFINITY, f64::min);
            c.check(cold > 1200.0, format!("silicon min Q(T ≤ 20 K) = {cold:.1} (> 1200)"));
            let monotone = qs.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-12));
            c.check(monotone, format!("Q non-increasing in T over 4–295 K: {monotone}"));
        }
        Err(e) => c.check(false, format!("silicon Q: {e}")),
    }
    match ResonatorModel::fused_silica().q_at(295.0) {
        Ok(q) => c.within("fused silica Q(295 K)", q, 400.0, 0.25, ""),
        Err(e) => c.check(false, format!("fused silica Q: {e}")),
    }
    c
}

fn noise_conversion() -> Criterion {
    let mut c = Criterion::new("heating-rate to field-noise conversion");
    match heating_to_noise(0.6, 2.0 * PI * AXIAL_HZ, &ca()) {
        Ok(s) => c.within("S_E(0.6 quanta/s)", s, NOISE_PSD, NOISE_TOL, "V²/m²/Hz"),
        Err(e) => c.check(false, format!("conversion: {e}")),
    }
    match noise_table(&HEATING_TABLE, &ca()) {
        Ok(rows) => {
            let finite = rows.iter().all(|r| r.noise_psd.is_finite() && r.noise_psd > 0.0);
            c.check(rows.len() == 6 && finite, format!("table rows converted: {} (all finite: {finite})", rows.len()));
        }
        Err(e) => c.check(false, format!("table: {e}")),
    }
    c
}

fn thermometry() -> Criterion {
    let mut c = Criterion::new("thermometry round trips");
    let axial = 2.0 * PI * AXIAL_HZ;
    let carrier = 2.0 * PI * 100e3;
    let eta = lamb_dicke(&ca(), axial).expect("Lamb-Dicke parameter");
    let t: Vec<f64> = (0..41).map(|i| 400e-6 * i as f64 / 40.0).collect();
    let flop = |nbar: f64| {
        rabi_flop(&MotionalState::new(nbar, axial).unwrap(), SidebandKind::Blue, carrier, eta, &t, &FlopOptions::default())
            .unwrap()
    };

    for free_rabi in [false, true] {
        let opts = FitOptions { free_rabi, ..FitOptions::default() };
        let label = if free_rabi { "free Rabi" } else { "fixed Rabi" };
        let worst = [0.05, 0.5, 2.0]
            .iter()
            .map(|&n| fit_nbar(&flop(n), &opts).map(|f| (f.nbar - n).abs()).unwrap_or(f64::INFINITY))
            .fold(0.0, f64::max);
        c.check(worst < 1e-4, format!("noiseless n̄ fit ({label}): worst error {worst:.2e} (< 1e-4)"));

        let clean = flop(1.0);
        let covered = (0..100)
            .filter(|&seed| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let noisy = add_noise(&clean, &NoiseModel::Gaussian { sigma: 0.02 }, &mut rng).unwrap();
                fit_nbar(&noisy, &opts).is_ok_and(|f| (f.nbar - 1.0).abs() <= 3.0 * f.nbar_err)
            })
            .count();
        c.check(covered >= 95, format!("noisy n̄ fit ({label}) within 3σ: {covered}/100 (≥ 95)"));
    }

    let waits: Vec<f64> = (0..6).map(|i| 0.3 * i as f64).collect();
    let exact = synthetic_heating_series(0.05, 0.37, &waits, 0.0, &mut ChaCha8Rng::seed_from_u64(0))
        .and_then(|s| fit_heating_rate(&s));
    match exact {
        Ok(f) => c.check((f.rate - 0.37).abs() < 1e-12, format!("noiseless heating slope = {:.15}", f.rate)),
        Err(e) => c.check(false, format!("heating fit: {e}")),
    }
    let covered = (0..100)
        .filter(|&seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            synthetic_heating_series(0.05, 0.37, &waits, 0.05, &mut rng)
                .and_then(|s| fit_heating_rate(&s))
                .is_ok_and(|f| (f.rate - 0.37).abs() <= 3.0 * f.rate_err)
        })
        .count();
    c.check(covered >= 95, format!("noisy heating fit within 3σ: {covered}/100 (≥ 95)"));
    c
}

fn field_oracles() -> Criterion {
    let mut c = Criterion::new("field-core oracle equivalence");
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut case = || {
        let x0 = rng.random_range(-300.0..300.0) * UM;
        let z0 = rng.random_range(-300.0..300.0) * UM;
        let w = rng.random_range(10.0..500.0) * UM;
        let l = rng.random_range(10.0..500.0) * UM;
        let p = Vector3::new(
            rng.random_range(-400.0..400.0) * UM,
            rng.random_range(20.0..400.0) * UM,
            rng.random_range(-400.0..400.0) * UM,
        );
        (Rect::new(x0, x0 + w, z0, z0 + l).unwrap(), p)
    };
    let cases: Vec<_> = (0..100).map(|_| case()).collect();

    let worst = cases
        .iter()
        .map(|(r, p)| (rect_potential(r, &pt(p.x, p.y, p.z)) / quadrature_potential(r, p.x, p.y, p.z) - 1.0).abs())
        .fold(0.0, f64::max);
    c.check(worst <= ORACLE_TOL, format!("potential vs quadrature, 100 cases: worst {worst:.2e} (≤ {ORACLE_TOL:e})"));

    let (mut grad, mut hess, mut trace) = (0.0f64, 0.0f64, 0.0f64);
    for (r, p) in &cases[..10] {
        let fd = fd_gradient(|v| rect_potential(r, &pt(v.x, v.y, v.z)), p, 1e-9);
        grad = grad.max(rel_err_vec(&rect_gradient(r, &pt(p.x, p.y, p.z)), &fd));
        let fd = fd_jacobian(|v| rect_gradient(r, &pt(v.x, v.y, v.z)), p, 1e-9);
        let h = rect_hessian(r, &pt(p.x, p.y, p.z));
        hess = hess.max(rel_err_mat(&h, &fd));
        trace = trace.max(h.trace().abs() / SymmetricEigen::new(h).eigenvalues.abs().max());
    }
    c.check(grad <= FD_TOL, format!("gradient vs finite differences: worst {grad:.2e} (≤ {FD_TOL:e})"));
    c.check(hess <= FD_TOL, format!("Hessian vs finite differences: worst {hess:.2e} (≤ {FD_TOL:e})"));
    c.check(trace <= TRACE_TOL, format!("Hessian trace / largest eigenvalue: worst {trace:.2e} (≤ {TRACE_TOL:e})"));

    let hug = rect_potential(&Rect::new(-0.5, 0.5, -0.5, 0.5).unwrap(), &pt(0.0, 1e-6, 0.0));
    c.check(
        (hug - 1.0).abs() <= HUG_TOL,
        format!("1 m square at 1 µm: {hug:.10} vs 1 (|Δ| = {:.3e}, limit {HUG_TOL:e})", (hug - 1.0).abs()),
    );
    let corner = rect_potential(&Rect::new(0.0, 1.0, 0.0, 1.0).unwrap(), &pt(0.0, 1e-6, 0.0));
    c.check((corner - 0.25).abs() <= CORNER_TOL, format!("above a corner: {corner:.8} vs 0.25 (limit {CORNER_TOL:e})"));
    c
}

fn shuttling() -> Criterion {
    let mut c = Criterion::new("one-pitch shuttle");
    let layout = build_paper_layout();
    let spec = SolveSpec::all_dc(&layout, 2.0 * PI * AXIAL_HZ);
    let wf = match shuttle_waveform(&layout, &RfDrive::paper(), &ca(), 0.0, 360.0 * UM, 7, &spec) {
        Ok(wf) => wf,
        Err(e) => {
            c.check(false, format!("waveform generation failed: {e}"));
            return c;
        }
    };
    let rf = paper_trap_rf();
    let (mut worst_pos, mut worst_drift, mut max_v) = (0.0f64, 0.0f64, 0.0f64);
    let mut failures = 0;
    for (k, step) in wf.steps.iter().enumerate() {
        max_v = max_v.max(step.volts.max_abs());
        let target = Vector3::new(step.position_m[0], step.position_m[1], 360.0 * UM * k as f64 / 6.0);
        let verified = rf.with_dc(step.volts.clone()).and_then(|trap| {
            let r = find_minimum(&trap, &pt(target.x, target.y, target.z), &MinimizeOptions::default())?;
            Ok((r.to_vector(), hertz(secular_analysis(&trap, &r).axial_frequency())))
        });
        match verified {
            Ok((r, f)) => {
                worst_pos = worst_pos.max((r - target).norm());
                worst_drift = worst_drift.max((f / AXIAL_HZ - 1.0).abs());
            }
            Err(_) => failures += 1,
        }
    }
    c.check(failures == 0, format!("waypoints verified: {}/{}", wf.steps.len() - failures, wf.steps.len()));
    c.check(worst_pos <= WAYPOINT_TOL_M, format!("worst waypoint error {worst_pos:.3e} m (≤ {WAYPOINT_TOL_M:e})"));
    c.check(worst_drift < DRIFT_TOL, format!("worst axial drift {:.3}% (< {}%)", 100.0 * worst_drift, 100.0 * DRIFT_TOL));
    c.check(max_v <= MAX_VOLTS, format!("max |V| over waveform {max_v:.3} V"));
    c
}

fn main() -> ExitCode {
    let suite: [fn() -> Criterion; 10] = [
        ion_height,
        depth,
        dc_feasibility,
        tilt,
        circuit_numbers,
        q_curve,
        noise_conversion,
        thermometry,
        field_oracles,
        shuttling,
    ];
    let mut failed = 0;
    for (i, run) in suite.iter().enumerate() {
        let c = run();
        let verdict = if c.passed() { "PASS" } else { "FAIL" };
        println!("{verdict} {:>2}. {}", i + 1, c.title);
        for (ok, detail) in &c.checks {
            println!("       {} {detail}", if *ok { "ok  " } else { "FAIL" });
        }
        if !c.passed() {
            failed += 1;
        }
    }
    println!("\n{} of {} acceptance criteria passed", suite.len() - failed, suite.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

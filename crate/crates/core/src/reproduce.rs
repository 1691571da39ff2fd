//! End-to-end reproduction of the reference trap: geometry → DC solution →
//! trap analysis → RF circuit → heating-rate noise table, with pass/fail
//! checks against the reference numbers.

use nalgebra::Vector3;
use serde::Serialize;

use crate::analysis::{analyze, find_minimum, line_scan, report_at, secular_analysis, ScanSample, Trap, TrapReport};
use crate::circuits::{
    bode, lc_resonance, paper_divider_check, power_dissipation, q_vs_temperature, rc_transfer, DividerCheck,
    FilterSpec, QPoint, RcResponse, ResonatorModel,
};
use crate::config::RunConfig;
use crate::constants::angular;
use crate::error::{Error, Result};
use crate::solver::{rf_nil, solve_confinement};
use crate::thermometry::{heating_to_noise, noise_table, NoiseRow, HEATING_TABLE};
use crate::field::FieldPoint;
use crate::voltages::VoltageSet;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub requirement: String,
    pub passed: bool,
}

impl Check {
    fn within(name: &str, value: f64, target: f64, rel_tol: f64) -> Self {
        Self {
            name: name.into(),
            value,
            requirement: format!("{target:e} ± {}%", rel_tol * 100.0),
            passed: ((value - target) / target).abs() <= rel_tol,
        }
    }

    fn at_most(name: &str, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            requirement: format!("≤ {limit:e}"),
            passed: value <= limit,
        }
    }

    fn below(name: &str, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            requirement: format!("< {limit:e}"),
            passed: value < limit,
        }
    }

    fn above(name: &str, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            requirement: format!("> {limit:e}"),
            passed: value > limit,
        }
    }

    fn flag(name: &str, ok: bool, requirement: &str) -> Self {
        Self {
            name: name.into(),
            value: if ok { 1.0 } else { 0.0 },
            requirement: requirement.into(),
            passed: ok,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CircuitSummary {
    pub resonance_hz: f64,
    pub power_at_q1205_w: f64,
    pub silicon_q: Vec<QPoint>,
    pub fused_silica_q: Vec<QPoint>,
    pub in_vacuum_filter: RcResponse,
    pub external_filter: RcResponse,
    pub external_filter_spec: FilterSpec,
    pub divider: DividerCheck,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReproduceReport {
    pub completed_stages: Vec<String>,
    pub failed_stage: Option<String>,
    pub error: Option<String>,
    pub rf_only: Option<TrapReport>,
    pub dc_solution: Option<VoltageSet>,
    pub confined: Option<TrapReport>,
    pub circuits: Option<CircuitSummary>,
    pub noise_table: Option<Vec<NoiseRow>>,
    pub checks: Vec<Check>,
    pub all_passed: bool,
    #[serde(skip)]
    pub scans: Vec<(String, Vec<ScanSample>)>,
}

pub const STAGES: [&str; 7] = [
    "build_layout",
    "solve_confinement",
    "find_minimum",
    "secular_analysis",
    "trap_depth",
    "circuits",
    "noise_table",
];

/// Temperatures for the Q(T) curves, K.
pub fn temperature_grid() -> Vec<f64> {
    let mut t = vec![4.0, 10.0, 15.0, 20.0];
    t.extend((1..=55).map(|i| 20.0 + 5.0 * i as f64));
    t
}

fn stage<T>(report: &mut ReproduceReport, name: &str, r: Result<T>) -> Option<T> {
    match r {
        Ok(v) => {
            report.completed_stages.push(name.into());
            Some(v)
        }
        Err(e) => {
            report.failed_stage = Some(name.into());
            report.error = Some(e.to_string());
            None
        }
    }
}

fn scans(trap: &Trap, r: &TrapReport) -> Vec<(String, Vec<ScanSample>)> {
    let origin = r.position();
    let h = r.height_m;
    [("x", Vector3::x()), ("y", Vector3::y()), ("z", Vector3::z())]
        .into_iter()
        .map(|(axis, d)| (axis.to_string(), line_scan(trap, &origin, &d, 0.9 * h, 181)))
        .collect()
}

fn circuits_stage() -> Result<CircuitSummary> {
    let silicon = ResonatorModel::paper_silicon();
    let fused = ResonatorModel::fused_silica();
    let grid = temperature_grid();
    Ok(CircuitSummary {
        resonance_hz: lc_resonance(silicon.inductance_h, silicon.capacitance_f)?,
        power_at_q1205_w: power_dissipation(140.0, 9.5e-12, angular(20.6e6), 1205.0)?,
        silicon_q: q_vs_temperature(&silicon, &grid)?,
        fused_silica_q: q_vs_temperature(&fused, &grid)?,
        in_vacuum_filter: rc_transfer(&FilterSpec::in_vacuum(), 0.0)?,
        external_filter: rc_transfer(&FilterSpec::external(), 0.0)?,
        external_filter_spec: FilterSpec::external(),
        divider: paper_divider_check(),
    })
}

/// Runs every stage in order, stopping at the first failure.
pub fn run_reproduce_paper(config: &RunConfig) -> ReproduceReport {
    let mut report = ReproduceReport {
        completed_stages: Vec::new(),
        failed_stage: None,
        error: None,
        rf_only: None,
        dc_solution: None,
        confined: None,
        circuits: None,
        noise_table: None,
        checks: Vec::new(),
        all_passed: false,
        scans: Vec::new(),
    };
    run_stages(config, &mut report);
    report.all_passed = report.failed_stage.is_none() && report.checks.iter().all(|c| c.passed);
    report
}

fn run_stages(config: &RunConfig, report: &mut ReproduceReport) -> Option<()> {
    let (layout, rf_trap) = stage(
        report,
        "build_layout",
        config.layout.load().and_then(|layout| {
            let trap = Trap::new(layout.clone(), config.drive, config.ion, VoltageSet::new())?;
            Ok((layout, trap))
        }),
    )?;

    let volts = stage(
        report,
        "solve_confinement",
        solve_confinement(&layout, &config.drive, &config.ion, &config.solver),
    )?;
    report.dc_solution = Some(volts.clone());

    let seed = match config.seed_position {
        Some([x, y, z]) => FieldPoint::new(x, y, z),
        None => rf_nil(&rf_trap),
    };
    let (trap, r0) = stage(
        report,
        "find_minimum",
        seed.and_then(|seed| {
            let trap = rf_trap
                .with_dc(volts.clone())?
                .with_stray_field(Vector3::from(config.stray_field));
            let r0 = find_minimum(&trap, &seed, &Default::default())?;
            Ok((trap, r0))
        }),
    )?;
    stage(report, "secular_analysis", Ok(secular_analysis(&trap, &r0)))?;
    let (confined, rf_only) = stage(
        report,
        "trap_depth",
        report_at(&trap, &r0).and_then(|c| Ok((c, analyze(&rf_trap, &r0)?))),
    )?;

    report.scans.extend(scans(&rf_trap, &rf_only).into_iter().map(|(a, s)| (format!("rf_only_{a}"), s)));
    report.scans.extend(scans(&trap, &confined).into_iter().map(|(a, s)| (format!("confined_{a}"), s)));

    let target_hz = crate::constants::hertz(config.solver.target_axial_omega);
    report.checks.push(Check::within("ion_height_m", rf_only.height_m, 230e-6, 0.10));
    report.checks.push(Check::within("rf_trap_depth_ev", rf_only.rf_depth_ev, 0.075, 0.20));
    report.checks.push(Check::within("axial_frequency_hz", confined.axial_frequency_hz, target_hz, 1e-3));
    report.checks.push(Check::at_most("max_abs_dc_v", volts.max_abs(), config.solver.bound));
    report.checks.push(Check {
        name: "radial_tilt_deg".into(),
        value: confined.radial_tilt_deg,
        requirement: "|tilt| = 20 ± 5".into(),
        passed: (confined.radial_tilt_deg.abs() - 20.0).abs() <= 5.0,
    });
    report.checks.push(Check::flag("confined_and_stable", confined.confining && confined.stable, "all secular frequencies real, q < 0.9"));
    report.rf_only = Some(rf_only);
    report.confined = Some(confined);

    let circuits = stage(report, "circuits", circuits_stage())?;
    report.checks.push(Check::within("lc_resonance_hz", circuits.resonance_hz, 20.6e6, 0.005));
    report.checks.push(Check::within("in_vacuum_filter_cutoff_hz", circuits.in_vacuum_filter.cutoff_hz, 4.82e3, 0.01));
    report.checks.push(Check::within("power_dissipation_w", circuits.power_at_q1205_w, 10e-3, 0.02));
    report.checks.push(Check::within("external_filter_cutoff_hz", circuits.external_filter.cutoff_hz, 80.0, 0.05));
    let q_at = |pts: &[QPoint], t: f64| pts.iter().find(|p| p.temperature_k == t).map(|p| p.q).unwrap_or(f64::NAN);
    report.checks.push(Check::below("silicon_q_295k", q_at(&circuits.silicon_q, 295.0), 20.0));
    let cold_min = circuits
        .silicon_q
        .iter()
        .filter(|p| p.temperature_k <= 20.0)
        .map(|p| p.q)
        .fold(f64::INFINITY, f64::min);
    report.checks.push(Check::above("silicon_q_at_or_below_20k", cold_min, 1200.0));
    let monotone = circuits.silicon_q.windows(2).all(|w| w[1].q <= w[0].q);
    report.checks.push(Check::flag("silicon_q_monotone", monotone, "Q non-increasing with temperature"));
    report.checks.push(Check::within("fused_silica_q_295k", q_at(&circuits.fused_silica_q, 295.0), 400.0, 0.25));
    report.circuits = Some(circuits);

    let table = stage(report, "noise_table", noise_table(&HEATING_TABLE, &config.ion))?;
    let s_e = heating_to_noise(0.6, angular(1.069e6), &config.ion).unwrap_or(f64::NAN);
    report.checks.push(Check::within("noise_psd_0p6_per_s", s_e, 4.4e-15, 0.03));
    report.checks.push(Check::flag("noise_table_rows", table.len() == 6, "six traps converted"));
    report.noise_table = Some(table);
    Some(())
}

fn csv_from_rows<S: Serialize>(rows: impl IntoIterator<Item = S>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    String::from_utf8(w.into_inner().map_err(|e| Error::InvalidParameter(e.to_string()))?)
        .map_err(|e| Error::InvalidParameter(e.to_string()))
}

#[derive(Serialize)]
struct ScanRow<'a> {
    scan: &'a str,
    s_m: f64,
    x_m: f64,
    y_m: f64,
    z_m: f64,
    pseudo_ev: f64,
    total_ev: f64,
}

#[derive(Serialize)]
struct QRow<'a> {
    preset: &'a str,
    temperature_k: f64,
    q_inductor: f64,
    q_capacitor: f64,
    q: f64,
}

/// CSV plot data for the bundle: (file name, contents).
pub fn plot_data(report: &ReproduceReport) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    if !report.scans.is_empty() {
        let rows = report.scans.iter().flat_map(|(name, samples)| {
            samples.iter().map(move |s| ScanRow {
                scan: name,
                s_m: s.s,
                x_m: s.x,
                y_m: s.y,
                z_m: s.z,
                pseudo_ev: s.pseudo_ev,
                total_ev: s.total_ev,
            })
        });
        out.push(("potential_scans.csv".into(), csv_from_rows(rows)?));
    }
    if let Some(c) = &report.circuits {
        let rows = c
            .silicon_q
            .iter()
            .map(|p| ("paper-silicon", p))
            .chain(c.fused_silica_q.iter().map(|p| ("fused-silica", p)))
            .map(|(preset, p)| QRow {
                preset,
                temperature_k: p.temperature_k,
                q_inductor: p.q_inductor,
                q_capacitor: p.q_capacitor,
                q: p.q,
            });
        out.push(("q_vs_temperature.csv".into(), csv_from_rows(rows)?));
        out.push(("filter_bode.csv".into(), bode_csv(&[("in-vacuum", FilterSpec::in_vacuum()), ("external", FilterSpec::external())])?));
    }
    if let Some(t) = &report.noise_table {
        out.push(("noise_table.csv".into(), csv_from_rows(t.iter())?));
    }
    Ok(out)
}

#[derive(Serialize)]
struct BodeRow<'a> {
    filter: &'a str,
    frequency_hz: f64,
    magnitude: f64,
    magnitude_db: f64,
}

/// Bode magnitude from 1 Hz to 1 MHz for each named filter.
pub fn bode_csv(filters: &[(&str, FilterSpec)]) -> Result<String> {
    let mut rows = Vec::new();
    for (name, f) in filters {
        for r in bode(f, 1.0, 1e6, 121)? {
            rows.push(BodeRow {
                filter: name,
                frequency_hz: r.frequency_hz,
                magnitude: r.magnitude,
                magnitude_db: 20.0 * r.magnitude.log10(),
            });
        }
    }
    csv_from_rows(rows)
}

/// One line per check, e.g. `PASS ion_height_m = 2.2578e-4 (2.3e-4 ± 10%)`.
pub fn summary(report: &ReproduceReport) -> String {
    let mut s = String::new();
    for c in &report.checks {
        s.push_str(&format!(
            "{} {} = {:.6e} ({})\n",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.requirement
        ));
    }
    if let (Some(stage), Some(err)) = (&report.failed_stage, &report.error) {
        s.push_str(&format!("FAIL stage {stage}: {err}\n"));
    }
    s.push_str(if report.all_passed { "all checks passed\n" } else { "some checks failed\n" });
    s
}

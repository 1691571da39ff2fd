//! `surftrap` command line: argument parsing, subcommand dispatch and output
//! bundling. Exit status 0 on success, 1 when a computation stage fails and
//! 2 for configuration or usage errors.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::analysis::{analyze, line_scan, Trap};
use crate::circuits::{lc_resonance, paper_divider_check, power_dissipation, q_vs_temperature, rc_transfer, FilterSpec};
use crate::config::{parse_config, Overrides, RunConfig};
use crate::constants::angular;
use crate::error::{Error, Result};
use crate::field::{superpose, FieldPoint};
use crate::geometry::build_paper_layout;
use crate::reproduce::{bode_csv, plot_data, run_reproduce_paper, summary};
use crate::solver::{compensate, rf_nil, shuttle_waveform, solve_confinement, SolveSpec};
use crate::thermometry::{
    add_noise, fit_heating_rate, fit_nbar, lamb_dicke, noise_table, noise_to_heating, rabi_flop,
    FitOptions, FlopOptions, HeatingPoint, HeatingResult, MotionalState, NoiseModel, SidebandKind, SidebandSignal,
    TrapHeating, HEATING_TABLE,
};

#[derive(Debug, Parser)]
#[command(name = "surftrap", version, about = "Design and analysis of surface-electrode RF ion traps")]
pub struct Cli {
    /// JSON run configuration (SI units, unit-suffixed keys). Defaults: paper
    /// layout, 140 V at 20.6 MHz, Ca-40, 1.069 MHz axial target, ±40 V.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; without it results go to stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Electrode layout JSON file (overrides the config).
    #[arg(long, global = true, conflicts_with = "builtin_layout")]
    pub layout_file: Option<PathBuf>,
    /// Built-in layout name (overrides the config).
    #[arg(long, global = true)]
    pub builtin_layout: Option<String>,
    /// RF amplitude U₀, volts.
    #[arg(long, global = true)]
    pub amplitude_v: Option<f64>,
    /// RF drive frequency Ω_T/2π, hertz.
    #[arg(long, global = true)]
    pub frequency_hz: Option<f64>,
    /// Target axial frequency for solving, hertz.
    #[arg(long, global = true)]
    pub target_axial_hz: Option<f64>,
    /// Per-electrode voltage bound for solving, volts.
    #[arg(long, global = true)]
    pub bound_v: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Both,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Electrode layouts.
    #[command(subcommand)]
    Layout(LayoutCmd),
    /// Electrostatic field of the configured DC voltages and the RF drive.
    #[command(subcommand)]
    Field(FieldCmd),
    /// Minimum, depth, secular frequencies and tilt for the configured voltages.
    Analyze,
    /// DC voltages for the configured axial target.
    Solve {
        /// Also cancel this stray field (V/m) on top of the solution: x,y,z.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        compensate: Option<Vec<f64>>,
    },
    /// Transport waveform along the trap axis.
    Shuttle(ShuttleArgs),
    /// Resonator Q(T), dissipation, divider and filter data.
    Circuit {
        /// paper-silicon or fused-silica (overrides the config).
        #[arg(long)]
        preset: Option<String>,
    },
    /// Sideband thermometry.
    #[command(subcommand)]
    Thermo(ThermoCmd),
    /// Run the full reproduction pipeline and check it against the reference trap's numbers.
    ReproducePaper,
}

#[derive(Debug, Subcommand)]
pub enum LayoutCmd {
    /// Write the reference layout as JSON.
    EmitPaper,
}

#[derive(Debug, Subcommand)]
pub enum FieldCmd {
    /// Sample at a point, optionally scanning along an axis through it.
    Sample {
        /// x,y,z in metres.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        point: Vec<f64>,
        /// Scan axis for CSV output.
        #[arg(long, value_enum)]
        axis: Option<Axis>,
        /// Half-width of the scan, metres.
        #[arg(long, default_value_t = 100e-6)]
        half_width: f64,
        /// Number of scan points.
        #[arg(long, default_value_t = 101)]
        samples: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    X,
    Y,
    Z,
}

#[derive(Debug, Args)]
pub struct ShuttleArgs {
    /// Start position along the axis, metres.
    #[arg(long, allow_negative_numbers = true)]
    pub from_z: Option<f64>,
    /// End position along the axis, metres.
    #[arg(long, allow_negative_numbers = true)]
    pub to_z: Option<f64>,
    /// Number of waypoints, endpoints included.
    #[arg(long)]
    pub steps: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum ThermoCmd {
    /// Synthesize a thermal-state Rabi flop.
    Simulate {
        /// Mean phonon number of the thermal state.
        #[arg(long)]
        nbar: Option<f64>,
        /// Sideband: red or blue.
        #[arg(long, default_value = "blue")]
        kind: String,
        /// Projection-noise shots per point; 0 for exact probabilities.
        #[arg(long)]
        shots: Option<u64>,
    },
    /// Fit a flop (duration_s,probability) or heating series (wait_s,nbar,nbar_err) CSV.
    Fit {
        /// CSV file with the measured data.
        #[arg(long)]
        input: PathBuf,
        /// Treat the input as a heating series.
        #[arg(long)]
        heating: bool,
        /// Sideband of a flop input: red or blue.
        #[arg(long, default_value = "blue")]
        kind: String,
        /// Also fit the sideband Rabi frequency.
        #[arg(long)]
        free_rabi: bool,
    },
    /// Heating rate ↔ field noise for the measured traps or given values.
    Noise {
        /// Heating rate, phonons/s.
        #[arg(long)]
        rate: Option<f64>,
        /// Field noise S_E, V²m⁻²Hz⁻¹.
        #[arg(long, conflicts_with = "rate")]
        psd: Option<f64>,
        /// Axial frequency, Hz.
        #[arg(long, default_value_t = 1.069e6)]
        axial_hz: f64,
    },
}

/// Failure class, mapped to the process exit status.
#[derive(Debug)]
pub enum Failure {
    Config(Error),
    Stage(Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Stage(_) => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Config(e) => write!(f, "configuration error: {e}"),
            Self::Stage(e) => write!(f, "{e}"),
        }
    }
}

fn stage<T>(r: Result<T>) -> std::result::Result<T, Failure> {
    r.map_err(Failure::Stage)
}

fn config<T>(r: Result<T>) -> std::result::Result<T, Failure> {
    r.map_err(Failure::Config)
}

/// Files a command produced, plus text for the terminal.
#[derive(Debug, Default)]
pub struct Bundle {
    pub json: Vec<(String, String)>,
    pub csv: Vec<(String, String)>,
    pub message: String,
}

impl Bundle {
    fn json<T: Serialize>(mut self, name: &str, value: &T) -> Result<Self> {
        self.json.push((name.into(), serde_json::to_string_pretty(value)? + "\n"));
        Ok(self)
    }

    fn csv(mut self, name: &str, text: String) -> Self {
        self.csv.push((name.into(), text));
        self
    }

    /// Writes the selected formats into `dir`, or prints them when `dir` is
    /// `None`.
    pub fn emit(&self, dir: Option<&Path>, format: Format) -> Result<()> {
        let mut files: Vec<&(String, String)> = Vec::new();
        if format != Format::Csv {
            files.extend(&self.json);
        }
        if format != Format::Json {
            files.extend(&self.csv);
        }
        match dir {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                for (name, text) in files {
                    std::fs::write(dir.join(name), text)?;
                }
            }
            None => {
                use std::io::Write;
                let mut stdout = std::io::stdout().lock();
                let labelled = files.len() > 1;
                let written = files.iter().try_for_each(|(name, text)| {
                    if labelled {
                        writeln!(stdout, "# {name}")?;
                    }
                    stdout.write_all(text.as_bytes())
                });
                match written.and_then(|_| stdout.flush()) {
                    Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => return Err(e.into()),
                    _ => {}
                }
            }
        }
        if !self.message.is_empty() {
            eprint!("{}", self.message);
        }
        Ok(())
    }
}

fn csv_rows<S: Serialize>(rows: impl IntoIterator<Item = S>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidParameter(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidParameter(e.to_string()))
}

fn finite_or_fail(values: impl IntoIterator<Item = f64>, what: &str) -> Result<()> {
    if values.into_iter().all(f64::is_finite) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("non-finite values in {what}")))
    }
}

fn triplet(values: &[f64], flag: &str) -> std::result::Result<[f64; 3], Failure> {
    <[f64; 3]>::try_from(values)
        .map_err(|_| Failure::Config(Error::InvalidParameter(format!("{flag} takes three comma-separated values"))))
}

fn overrides(cli: &Cli) -> Overrides {
    Overrides {
        layout_file: cli.layout_file.clone(),
        builtin_layout: cli.builtin_layout.clone(),
        amplitude_v: cli.amplitude_v,
        frequency_hz: cli.frequency_hz,
        target_axial_hz: cli.target_axial_hz,
        bound_v: cli.bound_v,
    }
}

fn trap_from(cfg: &RunConfig) -> std::result::Result<Trap, Failure> {
    let layout = config(cfg.layout.load())?;
    let trap = config(Trap::new(layout, cfg.drive, cfg.ion, cfg.dc_volts.clone()))?;
    Ok(trap.with_stray_field(Vector3::from(cfg.stray_field)))
}

fn seed_point(cfg: &RunConfig, trap: &Trap) -> std::result::Result<FieldPoint, Failure> {
    match cfg.seed_position {
        Some([x, y, z]) => config(FieldPoint::new(x, y, z)),
        None => stage(rf_nil(trap)),
    }
}

/// Runs one parsed invocation and returns its output bundle.
pub fn execute(cli: &Cli) -> std::result::Result<Bundle, Failure> {
    let cfg = config(parse_config(cli.config.as_deref(), &overrides(cli)))?;
    match &cli.command {
        Command::Layout(LayoutCmd::EmitPaper) => {
            let layout = build_paper_layout();
            #[derive(Serialize)]
            struct Row<'a> {
                electrode: &'a str,
                role: String,
                x_min_m: f64,
                x_max_m: f64,
                z_min_m: f64,
                z_max_m: f64,
            }
            let rows = layout.electrodes.iter().flat_map(|e| {
                e.rects.iter().map(move |r| Row {
                    electrode: &e.name,
                    role: serde_json::to_value(e.role).map(|v| v.as_str().unwrap_or("").to_string()).unwrap_or_default(),
                    x_min_m: r.x_min,
                    x_max_m: r.x_max,
                    z_min_m: r.z_min,
                    z_max_m: r.z_max,
                })
            });
            let csv = stage(csv_rows(rows))?;
            let mut b = Bundle::default();
            b.json.push(("layout.json".into(), stage(layout.to_json())? + "\n"));
            Ok(b.csv("layout.csv", csv))
        }
        Command::Field(FieldCmd::Sample {
            point,
            axis,
            half_width,
            samples,
        }) => {
            let trap = trap_from(&cfg)?;
            let [x, y, z] = triplet(point, "--point")?;
            let p = config(FieldPoint::new(x, y, z))?;
            let dc = config(superpose(trap.layout(), &cfg.dc_volts, &p))?;
            #[derive(Serialize)]
            struct Sample {
                point_m: [f64; 3],
                dc_potential_v: f64,
                dc_field_v_per_m: [f64; 3],
                dc_curvature_v_per_m2: [[f64; 3]; 3],
                rf_field_amplitude_v_per_m: [f64; 3],
                pseudopotential_ev: f64,
                total_potential_ev: f64,
            }
            let rf = trap.rf_field(&p);
            let s = Sample {
                point_m: [p.x(), p.y(), p.z()],
                dc_potential_v: dc.potential,
                dc_field_v_per_m: dc.field.into(),
                dc_curvature_v_per_m2: std::array::from_fn(|i| std::array::from_fn(|j| dc.curvature[(i, j)])),
                rf_field_amplitude_v_per_m: rf.into(),
                pseudopotential_ev: trap.pseudopotential(&p),
                total_potential_ev: trap.total_potential(&p),
            };
            stage(finite_or_fail(
                [s.dc_potential_v, s.pseudopotential_ev, s.total_potential_ev],
                "field sample",
            ))?;
            let mut b = stage(Bundle::default().json("field_sample.json", &s))?;
            if let Some(axis) = axis {
                let dir = match axis {
                    Axis::X => Vector3::x(),
                    Axis::Y => Vector3::y(),
                    Axis::Z => Vector3::z(),
                };
                let scan = line_scan(&trap, &p.to_vector(), &dir, *half_width, *samples);
                b = b.csv("field_scan.csv", stage(csv_rows(scan))?);
            }
            Ok(b)
        }
        Command::Analyze => {
            let trap = trap_from(&cfg)?;
            let seed = seed_point(&cfg, &trap)?;
            let report = stage(analyze(&trap, &seed))?;
            stage(finite_or_fail(
                report.secular_frequencies_hz.iter().copied().chain([report.depth_ev, report.height_m]),
                "trap report",
            ))?;
            let origin = report.position();
            let mut rows = Vec::new();
            for (axis, d) in [("x", Vector3::x()), ("y", Vector3::y()), ("z", Vector3::z())] {
                for s in line_scan(&trap, &origin, &d, 0.9 * report.height_m, 181) {
                    rows.push((axis, s));
                }
            }
            #[derive(Serialize)]
            struct Row {
                axis: &'static str,
                s_m: f64,
                x_m: f64,
                y_m: f64,
                z_m: f64,
                pseudo_ev: f64,
                total_ev: f64,
            }
            let csv = stage(csv_rows(rows.into_iter().map(|(axis, s)| Row {
                axis,
                s_m: s.s,
                x_m: s.x,
                y_m: s.y,
                z_m: s.z,
                pseudo_ev: s.pseudo_ev,
                total_ev: s.total_ev,
            })))?;
            Ok(stage(Bundle::default().json("trap_report.json", &report))?.csv("potential_scans.csv", csv))
        }
        Command::Solve { compensate: stray } => {
            let layout = config(cfg.layout.load())?;
            let mut volts = stage(solve_confinement(&layout, &cfg.drive, &cfg.ion, &cfg.solver))?;
            let stray = stray.as_deref().map(|s| triplet(s, "--compensate")).transpose()?;
            if let Some(s) = stray {
                let stray = Vector3::from(s);
                volts = stage(compensate(&layout, &cfg.drive, &cfg.ion, &stray, &volts, &cfg.solver))?;
            }
            if !volts.all_finite() || volts.max_abs() > cfg.solver.bound * (1.0 + 1e-12) {
                return Err(Failure::Stage(Error::InvalidParameter("solution violates the voltage bound".into())));
            }
            let trap = config(Trap::new(layout, cfg.drive, cfg.ion, volts.clone()))?;
            let trap = match stray {
                Some(s) => trap.with_stray_field(Vector3::from(s)),
                None => trap,
            };
            let seed = match cfg.solver.target_position {
                Some([x, y, z]) => config(FieldPoint::new(x, y, z))?,
                None => seed_point(&cfg, &trap)?,
            };
            let report = stage(analyze(&trap, &seed))?;
            #[derive(Serialize)]
            struct Solved<'a> {
                volts: &'a crate::voltages::VoltageSet,
                max_abs_v: f64,
                verification: crate::analysis::TrapReport,
            }
            #[derive(Serialize)]
            struct Row<'a> {
                electrode: &'a str,
                volts: f64,
            }
            let csv = stage(csv_rows(volts.iter().map(|(electrode, volts)| Row { electrode, volts })))?;
            let out = Solved {
                volts: &volts,
                max_abs_v: volts.max_abs(),
                verification: report,
            };
            Ok(stage(Bundle::default().json("solution.json", &out))?.csv("solution.csv", csv))
        }
        Command::Shuttle(args) => {
            let layout = config(cfg.layout.load())?;
            let from = args.from_z.unwrap_or(cfg.shuttle.from_z_m);
            let to = args.to_z.unwrap_or(cfg.shuttle.to_z_m);
            let steps = args.steps.unwrap_or(cfg.shuttle.steps);
            let spec = match &cfg.shuttle.allowed {
                Some(allowed) => SolveSpec {
                    allowed: allowed.clone(),
                    ..cfg.solver.clone()
                },
                None => SolveSpec {
                    allowed: SolveSpec::all_dc(&layout, 0.0).allowed,
                    ..cfg.solver.clone()
                },
            };
            let wf = stage(shuttle_waveform(&layout, &cfg.drive, &cfg.ion, from, to, steps, &spec))?;
            if wf.steps.iter().any(|s| !s.volts.all_finite() || s.volts.max_abs() > cfg.solver.bound * (1.0 + 1e-12)) {
                return Err(Failure::Stage(Error::InvalidParameter("waveform violates the voltage bound".into())));
            }
            Ok(stage(Bundle::default().json("waveform.json", &wf))?.csv("waveform.csv", wf.to_csv()))
        }
        Command::Circuit { preset } => {
            let mut circuit = cfg.circuit.clone();
            if let Some(p) = preset {
                circuit.preset = p.clone();
                circuit.model = None;
            }
            let model = config(circuit.resonator())?;
            let q = stage(q_vs_temperature(&model, &circuit.temperatures_k))?;
            let f0 = stage(lc_resonance(model.inductance_h, model.capacitance_f))?;
            let q_cold = stage(model.q_at(10.0))?;
            #[derive(Serialize)]
            struct Summary {
                model: crate::circuits::ResonatorModel,
                resonance_hz: f64,
                q_at_10k: f64,
                power_at_10k_w: f64,
                q_vs_temperature: Vec<crate::circuits::QPoint>,
                in_vacuum_filter: crate::circuits::RcResponse,
                external_filter: crate::circuits::RcResponse,
                matching_capacitor_range_f: (f64, f64),
                matching_inductor_h: f64,
                divider: crate::circuits::DividerCheck,
            }
            let s = Summary {
                resonance_hz: f0,
                q_at_10k: q_cold,
                power_at_10k_w: stage(power_dissipation(cfg.drive.amplitude, model.capacitance_f, cfg.drive.omega, q_cold))?,
                q_vs_temperature: q.clone(),
                in_vacuum_filter: stage(rc_transfer(&FilterSpec::in_vacuum(), 0.0))?,
                external_filter: stage(rc_transfer(&FilterSpec::external(), 0.0))?,
                matching_capacitor_range_f: crate::circuits::MATCHING_CAPACITOR_RANGE,
                matching_inductor_h: crate::circuits::MATCHING_INDUCTOR,
                divider: paper_divider_check(),
                model,
            };
            stage(finite_or_fail(q.iter().map(|p| p.q), "Q(T)"))?;
            let bode = stage(bode_csv(&[("in-vacuum", FilterSpec::in_vacuum()), ("external", FilterSpec::external())]))?;
            Ok(stage(Bundle::default().json("circuit.json", &s))?
                .csv("q_vs_temperature.csv", stage(csv_rows(q))?)
                .csv("filter_bode.csv", bode))
        }
        Command::Thermo(cmd) => thermo(cmd, &cfg, cli.seed),
        Command::ReproducePaper => {
            let report = run_reproduce_paper(&cfg);
            let mut b = stage(Bundle::default().json("report.json", &report))?;
            for (name, text) in stage(plot_data(&report))? {
                b = b.csv(&name, text);
            }
            b.message = summary(&report);
            if report.all_passed {
                Ok(b)
            } else {
                // Keep the partial bundle: emit it before reporting failure.
                let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("paper-bundle"));
                let _ = b.emit(Some(&dir), Format::Both);
                let reason = match (&report.failed_stage, &report.error) {
                    (Some(s), Some(e)) => format!("stage {s} failed: {e}"),
                    _ => "one or more checks failed".into(),
                };
                Err(Failure::Stage(Error::InvalidParameter(reason)))
            }
        }
    }
}

fn thermo(cmd: &ThermoCmd, cfg: &RunConfig, seed: u64) -> std::result::Result<Bundle, Failure> {
    let t = cfg.thermometry;
    let omega = angular(t.axial_hz);
    let eta = config(lamb_dicke(&cfg.ion, omega))?;
    let carrier = angular(t.carrier_rabi_hz);
    match cmd {
        ThermoCmd::Simulate { nbar, kind, shots } => {
            let kind: SidebandKind = config(kind.parse())?;
            let state = config(MotionalState::new(nbar.unwrap_or(t.nbar), omega))?;
            if t.points < 2 {
                return Err(Failure::Config(Error::InvalidParameter("thermometry.points must be ≥ 2".into())));
            }
            let durations: Vec<f64> = (0..t.points).map(|i| t.probe_max_s * i as f64 / (t.points - 1) as f64).collect();
            let clean = stage(rabi_flop(&state, kind, carrier, eta, &durations, &FlopOptions::default()))?;
            let shots = shots.unwrap_or(t.shots);
            let signal = if shots > 0 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                stage(add_noise(&clean, &NoiseModel::Binomial { shots }, &mut rng))?
            } else {
                clean
            };
            stage(signal.validate())?;
            let csv = signal.to_csv();
            Ok(stage(Bundle::default().json("signal.json", &signal))?.csv("signal.csv", csv))
        }
        ThermoCmd::Fit {
            input,
            heating,
            kind,
            free_rabi,
        } => {
            let text = std::fs::read_to_string(input)
                .map_err(|e| Failure::Config(Error::InvalidParameter(format!("cannot read {}: {e}", input.display()))))?;
            let mut reader = csv::Reader::from_reader(text.as_bytes());
            if *heating {
                let series: Vec<HeatingPoint> = config(reader.deserialize().collect::<std::result::Result<_, _>>().map_err(Error::from))?;
                let fit = stage(fit_heating_rate(&series))?;
                let result = stage(HeatingResult::new(fit, omega, &cfg.ion))?;
                Ok(stage(Bundle::default().json("heating_fit.json", &result))?)
            } else {
                #[derive(serde::Deserialize)]
                struct Row {
                    duration_s: f64,
                    probability: f64,
                }
                let rows: Vec<Row> = config(reader.deserialize().collect::<std::result::Result<_, _>>().map_err(Error::from))?;
                let kind: SidebandKind = config(kind.parse())?;
                let signal = config(SidebandSignal::new(
                    rows.iter().map(|r| r.duration_s).collect(),
                    rows.iter().map(|r| r.probability).collect(),
                    kind,
                    carrier,
                    eta,
                ))?;
                let opts = FitOptions {
                    free_rabi: *free_rabi,
                    ..FitOptions::default()
                };
                let fit = stage(fit_nbar(&signal, &opts))?;
                Ok(stage(Bundle::default().json("nbar_fit.json", &fit))?)
            }
        }
        ThermoCmd::Noise { rate, psd, axial_hz } => {
            let rows: Vec<TrapHeating> = match (rate, psd) {
                (Some(r), _) => vec![TrapHeating {
                    trap: 0,
                    rate: *r,
                    rate_err: 0.0,
                    axial_hz: *axial_hz,
                }],
                (None, Some(s)) => {
                    let r = config(noise_to_heating(*s, angular(*axial_hz), &cfg.ion))?;
                    vec![TrapHeating {
                        trap: 0,
                        rate: r,
                        rate_err: 0.0,
                        axial_hz: *axial_hz,
                    }]
                }
                (None, None) => HEATING_TABLE.to_vec(),
            };
            let table = config(noise_table(&rows, &cfg.ion))?;
            stage(finite_or_fail(table.iter().map(|r| r.noise_psd), "noise table"))?;
            let csv = stage(csv_rows(table.iter()))?;
            Ok(stage(Bundle::default().json("noise_table.json", &table))?.csv("noise_table.csv", csv))
        }
    }
}

/// Parses `args`, runs the command and emits its output. Returns the exit
/// status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    // The reproduction bundle always carries both the report and plot data.
    let format = match (&cli.command, &cli.out) {
        (Command::ReproducePaper, Some(_)) => Format::Both,
        _ => cli.format,
    };
    match execute(&cli) {
        Ok(bundle) => match bundle.emit(cli.out.as_deref(), format) {
            Ok(()) => 0,
            Err(e) => {
                eprintln!("error: {e}");
                1
            }
        },
        Err(f) => {
            eprintln!("error: {f}");
            f.exit_code()
        }
    }
}

//! Ponderomotive analysis of a trap: pseudopotential, minimum, depth,
//! secular frequencies, principal axes and micromotion.
//!
//! Energies are in eV and positions in metres. The RF electrodes carry
//! `U₀ cos(Ω t)`; every electrode may additionally carry a static voltage
//! from the DC [`VoltageSet`]. A uniform stray field can be added on top.

use std::f64::consts::PI;

use nalgebra::{Cholesky, Matrix2, Matrix3, SymmetricEigen, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::constants::{angular, hertz, ATOMIC_MASS_UNIT, CA40_MASS_U, CA40_QUBIT_WAVELENGTH, ELEMENTARY_CHARGE};
use crate::error::{Error, Result};
use crate::field::{electrode_basis, Basis, FieldPoint};
use crate::geometry::{ElectrodeLayout, ElectrodeRole};
use crate::optimize::{golden_section, nelder_mead, NelderMeadOptions};
use crate::voltages::VoltageSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RfDrive {
    /// Zero-to-peak amplitude, V.
    pub amplitude: f64,
    /// Angular frequency Ω_T, rad/s.
    pub omega: f64,
}

impl RfDrive {
    pub fn new(amplitude: f64, omega: f64) -> Result<Self> {
        if !(amplitude > 0.0 && amplitude.is_finite()) {
            return Err(Error::InvalidParameter(format!("RF amplitude must be positive, got {amplitude}")));
        }
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::InvalidParameter(format!("RF frequency must be positive, got {omega}")));
        }
        Ok(Self { amplitude, omega })
    }

    /// 140 V at 20.6 MHz.
    pub fn paper() -> Self {
        Self {
            amplitude: 140.0,
            omega: angular(20.6e6),
        }
    }

    pub fn frequency_hz(&self) -> f64 {
        hertz(self.omega)
    }

    pub fn with_amplitude(self, amplitude: f64) -> Result<Self> {
        Self::new(amplitude, self.omega)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IonSpecies {
    /// kg
    pub mass: f64,
    /// C
    pub charge: f64,
    /// Wavelength of the transition used for sideband spectroscopy, m.
    pub wavelength: f64,
    /// Angle between the probe beam and the mode axis, rad.
    pub beam_angle: f64,
}

impl IonSpecies {
    pub fn new(mass: f64, charge: f64, wavelength: f64, beam_angle: f64) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::InvalidParameter(format!("ion mass must be positive, got {mass}")));
        }
        if charge == 0.0 || !charge.is_finite() {
            return Err(Error::InvalidParameter("ion charge must be non-zero".into()));
        }
        if !(wavelength > 0.0) {
            return Err(Error::InvalidParameter(format!("wavelength must be positive, got {wavelength}")));
        }
        Ok(Self {
            mass,
            charge,
            wavelength,
            beam_angle,
        })
    }

    /// ⁴⁰Ca⁺ probed on the 729 nm line at 45° to the mode axis.
    pub fn ca40() -> Self {
        Self {
            mass: CA40_MASS_U * ATOMIC_MASS_UNIT,
            charge: ELEMENTARY_CHARGE,
            wavelength: CA40_QUBIT_WAVELENGTH,
            beam_angle: PI / 4.0,
        }
    }

    /// Charge in units of e; converts volts into eV.
    pub fn charge_number(&self) -> f64 {
        self.charge / ELEMENTARY_CHARGE
    }
}

/// Layout, drive, ion and static voltages bundled for evaluation.
#[derive(Debug, Clone)]
pub struct Trap {
    layout: ElectrodeLayout,
    drive: RfDrive,
    ion: IonSpecies,
    dc: VoltageSet,
    dc_weights: Vec<f64>,
    rf_mask: Vec<bool>,
    stray: Vector3<f64>,
}

impl Trap {
    pub fn new(layout: ElectrodeLayout, drive: RfDrive, ion: IonSpecies, dc: VoltageSet) -> Result<Self> {
        for (name, v) in dc.iter() {
            if layout.get(name).is_none() {
                return Err(Error::UnknownElectrode(name.to_string()));
            }
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("voltage on `{name}` is not finite")));
            }
        }
        let rf_mask: Vec<bool> = layout.electrodes.iter().map(|e| e.role == ElectrodeRole::Rf).collect();
        if !rf_mask.iter().any(|&m| m) {
            return Err(Error::InvalidLayout("no RF electrode".into()));
        }
        let dc_weights = layout.electrodes.iter().map(|e| dc.get(&e.name)).collect();
        Ok(Self {
            layout,
            drive,
            ion,
            dc,
            dc_weights,
            rf_mask,
            stray: Vector3::zeros(),
        })
    }

    /// Adds a uniform stray electric field (V/m) acting on the ion.
    pub fn with_stray_field(mut self, stray: Vector3<f64>) -> Self {
        self.stray = stray;
        self
    }

    pub fn with_dc(&self, dc: VoltageSet) -> Result<Self> {
        Ok(Self::new(self.layout.clone(), self.drive, self.ion, dc)?.with_stray_field(self.stray))
    }

    pub fn with_drive(&self, drive: RfDrive) -> Self {
        Self { drive, ..self.clone() }
    }

    /// Same trap with every static voltage and the stray field removed.
    pub fn rf_only(&self) -> Self {
        Self::new(self.layout.clone(), self.drive, self.ion, VoltageSet::new()).expect("layout already validated")
    }

    pub fn layout(&self) -> &ElectrodeLayout {
        &self.layout
    }

    pub fn drive(&self) -> &RfDrive {
        &self.drive
    }

    pub fn ion(&self) -> &IonSpecies {
        &self.ion
    }

    pub fn dc(&self) -> &VoltageSet {
        &self.dc
    }

    pub fn stray_field(&self) -> Vector3<f64> {
        self.stray
    }

    /// q²/(4 m Ω²) expressed in eV per (V/m)².
    fn kappa(&self) -> f64 {
        let q = self.ion.charge;
        q * q / (4.0 * self.ion.mass * self.drive.omega * self.drive.omega * ELEMENTARY_CHARGE)
    }

    /// Sum of the RF electrode bases at 1 V.
    pub fn rf_basis(&self, p: &FieldPoint) -> Basis {
        let mut out = Basis::zero();
        for (e, _) in self.layout.electrodes.iter().zip(&self.rf_mask).filter(|(_, &m)| m) {
            let b = electrode_basis(e, p);
            out.potential += b.potential;
            out.gradient += b.gradient;
            out.hessian += b.hessian;
        }
        out
    }

    /// Static potential (V), gradient and Hessian of the DC voltage set.
    pub fn dc_basis(&self, p: &FieldPoint) -> Basis {
        let mut out = Basis::zero();
        for (e, &v) in self.layout.electrodes.iter().zip(&self.dc_weights) {
            if v != 0.0 {
                let b = electrode_basis(e, p);
                out.potential += v * b.potential;
                out.gradient += v * b.gradient;
                out.hessian += v * b.hessian;
            }
        }
        out
    }

    /// RF field amplitude vector at `p`, V/m.
    pub fn rf_field(&self, p: &FieldPoint) -> Vector3<f64> {
        -self.drive.amplitude * self.rf_basis(p).gradient
    }

    pub fn pseudopotential(&self, p: &FieldPoint) -> f64 {
        self.kappa() * self.rf_field(p).norm_squared()
    }

    pub fn pseudo_gradient(&self, p: &FieldPoint) -> Vector3<f64> {
        let b = self.rf_basis(p);
        let u2 = self.drive.amplitude * self.drive.amplitude;
        2.0 * self.kappa() * u2 * (b.hessian * b.gradient)
    }

    /// Hessian of the pseudopotential. The `H·H` part is exact; the term
    /// weighted by the residual field uses central differences of the
    /// analytic RF Hessian and vanishes at the RF nil.
    pub fn pseudo_hessian(&self, p: &FieldPoint) -> Matrix3<f64> {
        let b = self.rf_basis(p);
        let h = fd_step(p);
        let mut third = Matrix3::zeros();
        for k in 0..3 {
            let mut d = Vector3::zeros();
            d[k] = h;
            let plus = self.rf_basis(&shifted(p, &d));
            let minus = self.rf_basis(&shifted(p, &(-d)));
            third += b.gradient[k] * (plus.hessian - minus.hessian) / (2.0 * h);
        }
        let u2 = self.drive.amplitude * self.drive.amplitude;
        2.0 * self.kappa() * u2 * (b.hessian * b.hessian + third)
    }

    fn static_energy(&self, p: &FieldPoint) -> f64 {
        let z = self.ion.charge_number();
        z * (self.dc_basis(p).potential - self.stray.dot(&p.to_vector()))
    }

    pub fn total_potential(&self, p: &FieldPoint) -> f64 {
        self.pseudopotential(p) + self.static_energy(p)
    }

    pub fn total_gradient(&self, p: &FieldPoint) -> Vector3<f64> {
        let z = self.ion.charge_number();
        self.pseudo_gradient(p) + z * (self.dc_basis(p).gradient - self.stray)
    }

    /// Static-voltage contribution to the Hessian, eV/m².
    pub fn dc_hessian(&self, p: &FieldPoint) -> Matrix3<f64> {
        self.ion.charge_number() * self.dc_basis(p).hessian
    }

    pub fn total_hessian(&self, p: &FieldPoint) -> Matrix3<f64> {
        self.pseudo_hessian(p) + self.dc_hessian(p)
    }
}

fn fd_step(p: &FieldPoint) -> f64 {
    5e-4 * p.y()
}

// Finite-difference offsets are a tiny fraction of the height, so the
// shifted point stays above the plane.
fn shifted(p: &FieldPoint, d: &Vector3<f64>) -> FieldPoint {
    p.offset(d).expect("finite-difference step stays above the surface")
}

#[derive(Debug, Clone, Copy)]
pub struct MinimizeOptions {
    pub max_iterations: usize,
    /// Convergence threshold on |∇Φ|, eV/m.
    pub grad_tol: f64,
    /// Iterates below this height count as escaping to the surface.
    pub min_height: f64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            grad_tol: 1e-3,
            min_height: 1e-6,
        }
    }
}

/// Local minimum of the total potential, starting from `seed`.
///
/// Newton steps with a backtracking line search; where the Hessian is not
/// positive definite a short simplex descent moves the iterate back into
/// the convex region. A converged point gets up to two polishing Newton
/// steps so that weakly confined directions settle on their exact minimum.
pub fn find_minimum(trap: &Trap, seed: &FieldPoint, opts: &MinimizeOptions) -> Result<FieldPoint> {
    let mut x = *seed;
    let eval = |v: &Vector3<f64>| -> Option<f64> {
        if v.y <= opts.min_height {
            return None;
        }
        FieldPoint::from_vector(v).ok().map(|p| trap.total_potential(&p))
    };

    for _ in 0..opts.max_iterations {
        let g = trap.total_gradient(&x);
        if !g.iter().all(|c| c.is_finite()) {
            return Err(Error::NoConvergence {
                iterations: 0,
                grad_norm: f64::NAN,
            });
        }
        if g.norm() < opts.grad_tol {
            return Ok(polish(trap, x, opts));
        }

        let h = trap.total_hessian(&x);
        match Cholesky::new(h) {
            Some(chol) => {
                let mut step = -chol.solve(&g);
                let cap = 0.5 * x.y();
                if step.norm() > cap {
                    step *= cap / step.norm();
                }
                x = newton_line_search(trap, &x, &g, &step, opts)?;
            }
            None => {
                let nm = NelderMeadOptions {
                    initial_step: 0.05 * x.y(),
                    max_evals: 400,
                    f_tol: 0.0,
                    x_tol: 1e-4 * x.y(),
                };
                let (best, _) = nelder_mead(eval, x.to_vector(), &nm);
                x = FieldPoint::from_vector(&best).map_err(|_| Error::EscapedToSurface { y: best.y })?;
            }
        }
        // The simplex can only approach the height floor from above.
        if x.y() <= 2.0 * opts.min_height {
            return Err(Error::EscapedToSurface { y: x.y() });
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iterations,
        grad_norm: trap.total_gradient(&x).norm(),
    })
}

fn newton_line_search(
    trap: &Trap,
    x: &FieldPoint,
    g: &Vector3<f64>,
    step: &Vector3<f64>,
    opts: &MinimizeOptions,
) -> Result<FieldPoint> {
    let f0 = trap.total_potential(x);
    let slope = g.dot(step);
    let mut alpha = 1.0;
    while alpha > 1e-12 {
        let cand = x.to_vector() + alpha * step;
        if cand.y > opts.min_height {
            let p = FieldPoint::from_vector(&cand)?;
            let f = trap.total_potential(&p);
            if f <= f0 + 1e-4 * alpha * slope || trap.total_gradient(&p).norm() < g.norm() {
                return Ok(p);
            }
        }
        alpha *= 0.5;
    }
    Err(Error::NoConvergence {
        iterations: 0,
        grad_norm: g.norm(),
    })
}

fn polish(trap: &Trap, mut x: FieldPoint, opts: &MinimizeOptions) -> FieldPoint {
    for _ in 0..2 {
        let g = trap.total_gradient(&x);
        let Some(chol) = Cholesky::new(trap.total_hessian(&x)) else {
            break;
        };
        let step = -chol.solve(&g);
        if step.norm() > 0.05 * x.y() {
            break;
        }
        let Ok(cand) = x.offset(&step) else { break };
        let gc = trap.total_gradient(&cand).norm();
        if cand.y() <= opts.min_height || gc > opts.grad_tol.max(g.norm()) {
            break;
        }
        x = cand;
    }
    x
}

/// Secular frequencies, principal axes and Mathieu parameters at a minimum.
#[derive(Debug, Clone, PartialEq)]
pub struct Secular {
    /// Angular frequencies, rad/s, sorted descending. A negative entry marks
    /// an anti-confined direction (imaginary frequency of that magnitude).
    pub frequencies: [f64; 3],
    /// Principal axes as columns, ordered like `frequencies`.
    pub axes: Matrix3<f64>,
    /// Column of `axes` closest to the trap axis (z).
    pub axial_index: usize,
    /// Angle between the more surface-parallel radial axis and x, degrees
    /// in (−90, 90].
    pub tilt_deg: f64,
    /// Mathieu q-matrix of the RF drive at the minimum.
    pub q_matrix: Matrix3<f64>,
    pub q_max: f64,
    pub stable: bool,
    pub confining: bool,
    /// RF field amplitude left at the minimum, V/m.
    pub rf_residual_field: f64,
    /// Hessian of the total potential, eV/m².
    pub hessian: Matrix3<f64>,
}

impl Secular {
    pub fn axial_frequency(&self) -> f64 {
        self.frequencies[self.axial_index]
    }

    pub fn axis(&self, i: usize) -> Vector3<f64> {
        self.axes.column(i).into_owned()
    }
}

/// Mathieu stability threshold on |q|.
pub const Q_STABILITY_LIMIT: f64 = 0.9;

pub fn secular_analysis(trap: &Trap, r0: &FieldPoint) -> Secular {
    let hessian = trap.total_hessian(r0);
    let eig = SymmetricEigen::new(hessian);
    let m = trap.ion().mass;

    let mut modes: Vec<(f64, Vector3<f64>)> = (0..3)
        .map(|i| {
            let lambda = eig.eigenvalues[i];
            let w = (lambda.abs() * ELEMENTARY_CHARGE / m).sqrt();
            let mut v: Vector3<f64> = eig.eigenvectors.column(i).into_owned();
            let lead = v.iamax();
            if v[lead] < 0.0 {
                v = -v;
            }
            (if lambda >= 0.0 { w } else { -w }, v)
        })
        .collect();
    modes.sort_by(|a, b| b.0.total_cmp(&a.0));

    let frequencies = [modes[0].0, modes[1].0, modes[2].0];
    let axes = Matrix3::from_columns(&[modes[0].1, modes[1].1, modes[2].1]);
    let axial_index = (0..3)
        .max_by(|&a, &b| axes[(2, a)].abs().total_cmp(&axes[(2, b)].abs()))
        .unwrap();

    let radial: Vec<usize> = (0..3).filter(|&i| i != axial_index).collect();
    let in_plane = |i: usize| axes[(0, i)].hypot(axes[(2, i)]);
    let surface_axis = if in_plane(radial[0]) >= in_plane(radial[1]) {
        radial[0]
    } else {
        radial[1]
    };
    let tilt_deg = fold_angle(axes[(1, surface_axis)].atan2(axes[(0, surface_axis)]).to_degrees());

    let rf = trap.rf_basis(r0);
    let drive = trap.drive();
    let ion = trap.ion();
    let q_matrix = (2.0 * ion.charge * drive.amplitude / (m * drive.omega * drive.omega)) * rf.hessian;
    let q_max = SymmetricEigen::new(q_matrix).eigenvalues.abs().max();

    Secular {
        frequencies,
        axes,
        axial_index,
        tilt_deg,
        q_matrix,
        q_max,
        stable: q_max < Q_STABILITY_LIMIT,
        confining: frequencies.iter().all(|&w| w > 0.0),
        rf_residual_field: drive.amplitude * rf.gradient.norm(),
        hessian,
    }
}

fn fold_angle(mut deg: f64) -> f64 {
    while deg > 90.0 {
        deg -= 180.0;
    }
    while deg <= -90.0 {
        deg += 180.0;
    }
    deg
}

#[derive(Debug, Clone, Copy)]
pub struct DepthOptions {
    /// Edge of the search cube centred on the minimum, m.
    pub box_size: f64,
    /// Profile samples per ion height along the ascent.
    pub samples_per_height: usize,
    /// Saddle refinement threshold on the transverse gradient, eV/m.
    pub grad_tol: f64,
}

impl Default for DepthOptions {
    fn default() -> Self {
        Self {
            box_size: 5e-3,
            samples_per_height: 50,
            grad_tol: 1e-2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Depth {
    /// eV
    pub depth: f64,
    pub escape_point: Vector3<f64>,
    /// True when no barrier was found inside the search box; `depth` is then
    /// the value at the box boundary and only a lower bound.
    pub lower_bound: bool,
}

/// Depth of the trap at `r0`: the lowest barrier on the way out.
///
/// Escape from a surface trap runs upward over the saddle above the RF nil.
/// The search ascends in y within the plane through `r0` normal to the trap
/// axis, minimizes over x at each height, takes the highest of those minima
/// and refines it to a saddle point of the total potential.
pub fn trap_depth(trap: &Trap, r0: &FieldPoint, opts: &DepthOptions) -> Result<Depth> {
    let z0 = r0.z();
    let f0 = trap.total_potential(r0);
    let energy = |x: f64, y: f64| -> f64 {
        FieldPoint::new(x, y, z0)
            .map(|p| trap.total_potential(&p))
            .unwrap_or(f64::INFINITY)
    };
    let height = r0.y();
    let window = 0.5 * height;
    let row_min = |y: f64, centre: f64| -> (f64, f64) {
        let mut c = centre;
        let mut best = (c, energy(c, y));
        for _ in 0..8 {
            let (x, f) = golden_section(|x| energy(x, y), c - window, c + window, 1e-6 * height, 200);
            best = (x, f);
            if (x - c).abs() < 0.95 * window {
                break;
            }
            c = x;
        }
        best
    };

    let dy = height / opts.samples_per_height as f64;
    let top = height + 0.5 * opts.box_size;
    let mut profile: Vec<(f64, f64, f64)> = Vec::new();
    let mut centre = r0.x();
    let mut best_idx = 0usize;
    let mut y = height;
    while y + dy <= top {
        y += dy;
        let (x, f) = row_min(y, centre);
        centre = x;
        profile.push((y, x, f));
        let k = profile.len() - 1;
        if f > profile[best_idx].2 {
            best_idx = k;
        }
        let max_f = profile[best_idx].2;
        if k >= best_idx + 10 && f - f0 < 0.5 * (max_f - f0) {
            break;
        }
    }
    if profile.is_empty() {
        return Err(Error::InvalidParameter("depth search box smaller than one step".into()));
    }

    let (yb, xb, fb) = profile[best_idx];
    if best_idx == profile.len() - 1 {
        return Ok(Depth {
            depth: fb - f0,
            escape_point: Vector3::new(xb, yb, z0),
            lower_bound: true,
        });
    }

    let lo = if best_idx == 0 { height + 0.5 * dy } else { profile[best_idx - 1].0 };
    let hi = profile[best_idx + 1].0;
    let (y_ref, _) = golden_section(|y| -row_min(y, xb).1, lo, hi, 1e-7 * height, 200);
    let (x_ref, _) = row_min(y_ref, xb);

    let saddle = refine_saddle(trap, Vector2::new(x_ref, y_ref), z0, opts.grad_tol, dy);
    let p = FieldPoint::new(saddle.x, saddle.y, z0)?;
    Ok(Depth {
        depth: trap.total_potential(&p) - f0,
        escape_point: p.to_vector(),
        lower_bound: false,
    })
}

/// Newton iteration on the in-plane gradient. Falls back to the starting
/// point if the iteration wanders away.
fn refine_saddle(trap: &Trap, start: Vector2<f64>, z0: f64, grad_tol: f64, max_step: f64) -> Vector2<f64> {
    let grad2 = |v: &Vector2<f64>| -> Option<(Vector2<f64>, Matrix2<f64>)> {
        let p = FieldPoint::new(v.x, v.y, z0).ok()?;
        let g = trap.total_gradient(&p);
        let h = trap.total_hessian(&p);
        Some((Vector2::new(g.x, g.y), Matrix2::new(h[(0, 0)], h[(0, 1)], h[(1, 0)], h[(1, 1)])))
    };
    let mut v = start;
    for _ in 0..50 {
        let Some((g, h)) = grad2(&v) else { return start };
        if g.norm() < grad_tol {
            return v;
        }
        let Some(inv) = h.try_inverse() else { return start };
        let mut step = -(inv * g);
        if step.norm() > max_step {
            step *= max_step / step.norm();
        }
        v += step;
        if (v - start).norm() > 10.0 * max_step {
            return start;
        }
    }
    v
}

/// First-order micromotion amplitude of an ion sitting `displacement` away
/// from the RF nil: half the q-matrix applied to the displacement.
pub fn micromotion_amplitude(q_matrix: &Matrix3<f64>, displacement: &Vector3<f64>) -> Vector3<f64> {
    0.5 * q_matrix * displacement
}

/// Everything known about one trapping configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapReport {
    pub position_m: [f64; 3],
    pub height_m: f64,
    /// Depth of the full (RF + DC + stray) potential, eV.
    pub depth_ev: f64,
    pub depth_is_lower_bound: bool,
    pub escape_point_m: [f64; 3],
    /// Depth of the RF pseudopotential alone at the same minimum, eV.
    pub rf_depth_ev: f64,
    /// Signed secular frequencies, Hz, descending; negative = anti-confined.
    pub secular_frequencies_hz: [f64; 3],
    /// Principal axes, one row per frequency.
    pub principal_axes: [[f64; 3]; 3],
    pub axial_index: usize,
    pub axial_frequency_hz: f64,
    pub radial_tilt_deg: f64,
    pub q_matrix: [[f64; 3]; 3],
    pub q_max: f64,
    pub stable: bool,
    pub confining: bool,
    pub rf_residual_field_v_per_m: f64,
}

impl TrapReport {
    pub fn position(&self) -> Vector3<f64> {
        Vector3::from(self.position_m)
    }

    pub fn q_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.q_matrix[i][j])
    }
}

/// Minimum, secular analysis and both depths in one pass.
pub fn analyze(trap: &Trap, seed: &FieldPoint) -> Result<TrapReport> {
    let r0 = find_minimum(trap, seed, &MinimizeOptions::default())?;
    report_at(trap, &r0)
}

pub fn report_at(trap: &Trap, r0: &FieldPoint) -> Result<TrapReport> {
    let sec = secular_analysis(trap, r0);
    let depth = trap_depth(trap, r0, &DepthOptions::default())?;
    let rf_depth = if trap.dc().is_empty() && trap.stray_field() == Vector3::zeros() {
        depth
    } else {
        trap_depth(&trap.rf_only(), r0, &DepthOptions::default())?
    };
    let rows = |m: &Matrix3<f64>| [[m[(0, 0)], m[(0, 1)], m[(0, 2)]], [m[(1, 0)], m[(1, 1)], m[(1, 2)]], [m[(2, 0)], m[(2, 1)], m[(2, 2)]]];
    let axes_t = sec.axes.transpose();
    Ok(TrapReport {
        position_m: [r0.x(), r0.y(), r0.z()],
        height_m: r0.y(),
        depth_ev: depth.depth,
        depth_is_lower_bound: depth.lower_bound,
        escape_point_m: depth.escape_point.into(),
        rf_depth_ev: rf_depth.depth,
        secular_frequencies_hz: sec.frequencies.map(hertz),
        principal_axes: rows(&axes_t),
        axial_index: sec.axial_index,
        axial_frequency_hz: hertz(sec.axial_frequency()),
        radial_tilt_deg: sec.tilt_deg,
        q_matrix: rows(&sec.q_matrix),
        q_max: sec.q_max,
        stable: sec.stable,
        confining: sec.confining,
        rf_residual_field_v_per_m: sec.rf_residual_field,
    })
}

/// One sample of a potential line scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanSample {
    pub s: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub pseudo_ev: f64,
    pub total_ev: f64,
}

/// Potentials sampled along `origin + s·direction`, s ∈ [−half, half].
/// Samples at or below the surface are skipped.
pub fn line_scan(trap: &Trap, origin: &Vector3<f64>, direction: &Vector3<f64>, half: f64, n: usize) -> Vec<ScanSample> {
    let dir = direction.normalize();
    (0..n)
        .filter_map(|i| {
            let s = if n > 1 { -half + 2.0 * half * i as f64 / (n - 1) as f64 } else { 0.0 };
            let v = origin + s * dir;
            let p = FieldPoint::from_vector(&v).ok()?;
            Some(ScanSample {
                s,
                x: v.x,
                y: v.y,
                z: v.z,
                pseudo_ev: trap.pseudopotential(&p),
                total_ev: trap.total_potential(&p),
            })
        })
        .collect()
}

/// Free-function form of [`Trap::pseudopotential`].
pub fn pseudopotential(layout: &ElectrodeLayout, drive: &RfDrive, ion: &IonSpecies, p: &FieldPoint) -> Result<f64> {
    Ok(Trap::new(layout.clone(), *drive, *ion, VoltageSet::new())?.pseudopotential(p))
}

/// Free-function form of [`Trap::total_potential`].
pub fn total_potential(
    layout: &ElectrodeLayout,
    drive: &RfDrive,
    volts: &VoltageSet,
    ion: &IonSpecies,
    p: &FieldPoint,
) -> Result<f64> {
    Ok(Trap::new(layout.clone(), *drive, *ion, volts.clone())?.total_potential(p))
}

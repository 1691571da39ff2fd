//! DC voltage solving: axial confinement, stray-field compensation and
//! shuttling waveforms.
//!
//! The static potential is linear in the electrode voltages, so the field
//! and the z-row of the curvature tensor at the target point are a linear
//! map of the voltages. The solver fits that map to the targets with a
//! Tikhonov term, iterated in proximal form so the fit converges to the
//! minimum-norm solution, and enforces |V| ≤ bound with an active set.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::analysis::{find_minimum, secular_analysis, IonSpecies, MinimizeOptions, RfDrive, Trap};
use crate::constants::{angular, ELEMENTARY_CHARGE};
use crate::error::{Error, Result};
use crate::field::{electrode_basis, FieldPoint};
use crate::geometry::{mirror_segment_name, ElectrodeLayout, ElectrodeRole};
pub use crate::voltages::VoltageSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSpec {
    /// Target axial angular frequency, rad/s. Zero asks for no axial curvature.
    pub target_axial_omega: f64,
    /// Where the minimum should sit. `None` uses the RF nil nearest the
    /// layout's default seed.
    pub target_position: Option<[f64; 3]>,
    /// Uniform stray field the solution must cancel, V/m.
    pub stray_field: [f64; 3],
    pub allowed: Vec<String>,
    /// Per-electrode bound, V.
    pub bound: f64,
    /// Tikhonov weight, V⁻², applied to row-scaled (volt-valued) residuals.
    pub regularization: f64,
    /// Tie each allowed segment to its z-mirror partner when the target
    /// lies on the mirror plane.
    pub pair_mirror: bool,
}

/// Segments driven in the experiment: the central three of each column.
pub const CENTRAL_SEGMENTS: [&str; 6] = ["dc_L3", "dc_L4", "dc_L5", "dc_R3", "dc_R4", "dc_R5"];

impl SolveSpec {
    /// 1.069 MHz axial confinement at the trap centre within ±40 V, using
    /// the central segments and optionally the centre electrode.
    pub fn paper(include_centre: bool) -> Self {
        let mut allowed: Vec<String> = CENTRAL_SEGMENTS.iter().map(|s| s.to_string()).collect();
        if include_centre {
            allowed.insert(0, "centre".into());
        }
        Self {
            target_axial_omega: angular(1.069e6),
            target_position: None,
            stray_field: [0.0; 3],
            allowed,
            bound: 40.0,
            regularization: 1e-4,
            pair_mirror: true,
        }
    }

    /// Every DC segment and the centre electrode of `layout`.
    pub fn all_dc(layout: &ElectrodeLayout, target_axial_omega: f64) -> Self {
        let allowed = layout
            .electrodes
            .iter()
            .filter(|e| matches!(e.role, ElectrodeRole::Dc | ElectrodeRole::CentreDc))
            .map(|e| e.name.clone())
            .collect();
        Self {
            target_axial_omega,
            allowed,
            ..Self::paper(true)
        }
    }

    pub fn validate(&self, layout: &ElectrodeLayout) -> Result<()> {
        if !(self.bound > 0.0) {
            return Err(Error::InvalidParameter(format!("voltage bound must be positive, got {}", self.bound)));
        }
        if !(self.target_axial_omega >= 0.0 && self.target_axial_omega.is_finite()) {
            return Err(Error::InvalidParameter("target axial frequency must be non-negative".into()));
        }
        if !(self.regularization > 0.0) {
            return Err(Error::InvalidParameter("regularization weight must be positive".into()));
        }
        if self.allowed.is_empty() {
            return Err(Error::InvalidParameter("no electrodes allowed to vary".into()));
        }
        for name in &self.allowed {
            if layout.get(name).is_none() {
                return Err(Error::UnknownElectrode(name.clone()));
            }
        }
        Ok(())
    }
}

/// Seed for the RF-nil search: between the RF rails, at half their spacing.
pub fn default_seed(layout: &ElectrodeLayout) -> FieldPoint {
    let centroids: Vec<f64> = layout
        .with_role(ElectrodeRole::Rf)
        .map(|e| {
            let area = e.area();
            e.rects.iter().map(|r| r.area() * 0.5 * (r.x_min + r.x_max)).sum::<f64>() / area
        })
        .collect();
    let lo = centroids.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = centroids.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let spacing = (hi - lo).max(1e-6);
    FieldPoint::new(0.5 * (lo + hi), 0.5 * spacing, 0.0).expect("positive height")
}

/// RF nil reached from [`default_seed`]; the natural starting point for
/// locating the minimum once DC voltages are applied.
pub fn rf_nil(trap: &Trap) -> Result<FieldPoint> {
    find_minimum(&trap.rf_only(), &default_seed(trap.layout()), &MinimizeOptions::default())
}

/// RF nil in the plane at axial position `z`.
pub fn rf_nil_at(trap: &Trap, z: f64, seed: &FieldPoint) -> Result<FieldPoint> {
    let rf = trap.rf_only();
    let mut p = FieldPoint::new(seed.x(), seed.y(), z)?;
    // Settle the radial position with the full minimizer, then pin z and
    // iterate Newton on the in-plane gradient (the axial direction is flat).
    if let Ok(m) = find_minimum(&rf, &p, &MinimizeOptions::default()) {
        p = FieldPoint::new(m.x(), m.y(), z)?;
    }
    for _ in 0..50 {
        let g = rf.pseudo_gradient(&p);
        let h = rf.pseudo_hessian(&p);
        let g2 = nalgebra::Vector2::new(g.x, g.y);
        if g2.norm() < 1e-6 {
            return Ok(p);
        }
        let h2 = nalgebra::Matrix2::new(h[(0, 0)], h[(0, 1)], h[(1, 0)], h[(1, 1)]);
        let step = h2.try_inverse().map(|inv| -(inv * g2)).ok_or(Error::NoConvergence {
            iterations: 0,
            grad_norm: g2.norm(),
        })?;
        let cap = 0.25 * p.y();
        let step = if step.norm() > cap { step * (cap / step.norm()) } else { step };
        p = FieldPoint::new(p.x() + step.x, p.y() + step.y, z)?;
    }
    Err(Error::NoConvergence {
        iterations: 50,
        grad_norm: rf.pseudo_gradient(&p).norm(),
    })
}

/// Voltage groups: electrodes in one group share a voltage.
fn groups(spec: &SolveSpec, layout: &ElectrodeLayout, target_z: f64) -> Vec<Vec<String>> {
    let segments = layout.with_role(ElectrodeRole::Dc).count() / 2;
    let mut out: Vec<Vec<String>> = Vec::new();
    let mut taken = std::collections::HashSet::new();
    let on_mirror_plane = target_z.abs() < 1e-12;
    for name in &spec.allowed {
        if !taken.insert(name.clone()) {
            continue;
        }
        let mut g = vec![name.clone()];
        if spec.pair_mirror && on_mirror_plane {
            if let Some(partner) = mirror_segment_name(name, segments) {
                if partner != *name && spec.allowed.contains(&partner) && taken.insert(partner.clone()) {
                    g.push(partner);
                }
            }
        }
        out.push(g);
    }
    out
}

/// Linear map from group voltages to (field, z-curvature row) at a point,
/// with rows scaled to volts by the ion height.
struct LinearModel {
    matrix: DMatrix<f64>,
    groups: Vec<Vec<String>>,
    length: f64,
}

impl LinearModel {
    fn new(layout: &ElectrodeLayout, groups: Vec<Vec<String>>, p: &FieldPoint) -> Self {
        let length = p.y();
        let mut matrix = DMatrix::zeros(6, groups.len());
        for (j, g) in groups.iter().enumerate() {
            for name in g {
                let b = electrode_basis(layout.get(name).expect("validated name"), p);
                for k in 0..3 {
                    matrix[(k, j)] += b.gradient[k] * length;
                    matrix[(3 + k, j)] += b.hessian[(k, 2)] * length * length;
                }
            }
        }
        Self { matrix, groups, length }
    }

    /// Scaled right-hand side for a target DC gradient (V/m) and z-row of
    /// the DC curvature (V/m²).
    fn rhs(&self, gradient: &Vector3<f64>, curvature_row: &Vector3<f64>) -> DVector<f64> {
        let l = self.length;
        DVector::from_iterator(
            6,
            gradient.iter().map(|g| g * l).chain(curvature_row.iter().map(|c| c * l * l)),
        )
    }

    fn to_volts(&self, v: &DVector<f64>) -> VoltageSet {
        let mut out = VoltageSet::new();
        for (g, &x) in self.groups.iter().zip(v.iter()) {
            for name in g {
                out.set(name.clone(), x);
            }
        }
        out
    }

    fn from_volts(&self, volts: &VoltageSet) -> DVector<f64> {
        DVector::from_iterator(self.groups.len(), self.groups.iter().map(|g| volts.get(&g[0])))
    }
}

/// Minimizes ½xᵀQx − cᵀx subject to lo ≤ x ≤ hi (primal active set).
fn box_qp(q: &DMatrix<f64>, c: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>, start: &DVector<f64>) -> DVector<f64> {
    let n = c.len();
    let mut x = DVector::from_iterator(n, (0..n).map(|i| start[i].clamp(lo[i], hi[i])));
    // 0 = free, 1 = at lower bound, 2 = at upper bound.
    let mut state = vec![0u8; n];
    for _ in 0..(20 * n + 20) {
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 0).collect();
        let mut target = x.clone();
        if !free.is_empty() {
            let qff = DMatrix::from_fn(free.len(), free.len(), |a, b| q[(free[a], free[b])]);
            let mut rhs = DVector::from_iterator(free.len(), free.iter().map(|&i| c[i]));
            for (a, &i) in free.iter().enumerate() {
                for j in (0..n).filter(|&j| state[j] != 0) {
                    rhs[a] -= q[(i, j)] * x[j];
                }
            }
            let sol = qff.cholesky().expect("regularized Gram matrix is positive definite").solve(&rhs);
            for (a, &i) in free.iter().enumerate() {
                target[i] = sol[a];
            }
        }

        // Longest feasible step toward the subproblem solution.
        let mut alpha = 1.0;
        let mut blocking = None;
        for &i in &free {
            let d = target[i] - x[i];
            if d > 0.0 && target[i] > hi[i] {
                let a = (hi[i] - x[i]) / d;
                if a < alpha {
                    alpha = a;
                    blocking = Some((i, 2u8));
                }
            } else if d < 0.0 && target[i] < lo[i] {
                let a = (lo[i] - x[i]) / d;
                if a < alpha {
                    alpha = a;
                    blocking = Some((i, 1u8));
                }
            }
        }
        x += alpha * (&target - &x);
        if let Some((i, s)) = blocking {
            x[i] = if s == 2 { hi[i] } else { lo[i] };
            state[i] = s;
            continue;
        }

        // Release the bound whose multiplier has the wrong sign.
        let grad = q * &x - c;
        let mut worst = None;
        let mut worst_val = 0.0;
        for i in 0..n {
            let push = match state[i] {
                1 => -grad[i],
                2 => grad[i],
                _ => continue,
            };
            if push > worst_val {
                worst_val = push;
                worst = Some(i);
            }
        }
        match worst {
            Some(i) => state[i] = 0,
            None => break,
        }
    }
    x
}

struct BoundedFit {
    solution: DVector<f64>,
    residual: DVector<f64>,
    active: Vec<usize>,
}

/// Proximal Tikhonov iterations: each step solves
/// min ‖Ax − b‖² + λ‖x − x_k‖² within the box.
fn bounded_fit(a: &DMatrix<f64>, b: &DVector<f64>, lambda: f64, lo: &DVector<f64>, hi: &DVector<f64>) -> BoundedFit {
    let n = a.ncols();
    let gram = a.transpose() * a;
    let q = &gram + DMatrix::identity(n, n) * lambda;
    let atb = a.transpose() * b;
    let mut x = DVector::zeros(n);
    for _ in 0..2000 {
        let c = &atb + &x * lambda;
        let next = box_qp(&q, &c, lo, hi, &x);
        let change = (&next - &x).amax();
        x = next;
        if change <= 1e-13 * x.amax().max(1.0) {
            break;
        }
    }
    let tol = 1e-12 * hi.amax().max(lo.amax()).max(1.0);
    let active = (0..n).filter(|&i| (x[i] - hi[i]).abs() < tol || (x[i] - lo[i]).abs() < tol).collect();
    BoundedFit {
        residual: a * &x - b,
        solution: x,
        active,
    }
}

/// Relative residual of the unconstrained least-squares solution.
fn consistency_residual(a: &DMatrix<f64>, b: &DVector<f64>) -> f64 {
    let bn = b.norm();
    if bn == 0.0 {
        return 0.0;
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let tol = 1e-10 * smax.max(f64::MIN_POSITIVE);
    let x = svd.solve(b, tol).expect("SVD computed with both factors");
    (a * x - b).norm() / bn
}

// Residual allowances on the scaled (volt-valued) rows.
const FIELD_TOL: f64 = 1e-3; // V/m
const CURVATURE_REL_TOL: f64 = 1e-5;

fn check_fit(
    model: &LinearModel,
    fit: &BoundedFit,
    b: &DVector<f64>,
    curvature_scale: f64,
    bound: f64,
) -> Result<()> {
    let l = model.length;
    let field_res = fit.residual.rows(0, 3).amax() / l;
    let curv_res = fit.residual.rows(3, 3).amax() / (l * l);
    let curv_tol = CURVATURE_REL_TOL * curvature_scale.max(1.0);
    if field_res <= FIELD_TOL && curv_res <= curv_tol {
        return Ok(());
    }
    let rel = consistency_residual(&model.matrix, b);
    if rel > 1e-6 {
        return Err(Error::RankDeficient { relative_residual: rel });
    }
    let electrodes = fit
        .active
        .iter()
        .flat_map(|&i| model.groups[i].iter().cloned())
        .collect::<Vec<_>>();
    Err(Error::InfeasibleBound {
        electrodes,
        bound,
        residual: field_res.max(curv_res),
    })
}

fn target_point(trap: &Trap, spec: &SolveSpec) -> Result<FieldPoint> {
    match spec.target_position {
        Some([x, y, z]) => FieldPoint::new(x, y, z),
        None => {
            let seed = default_seed(trap.layout());
            find_minimum(&trap.rf_only(), &seed, &MinimizeOptions::default())
        }
    }
}

/// DC gradient and curvature row that place a minimum of curvature `k`
/// (eV/m²) along z at `p`, given the RF pseudopotential and a stray field.
fn confinement_targets(trap: &Trap, p: &FieldPoint, k: f64, stray: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let rf = trap.rf_only();
    let zq = trap.ion().charge_number();
    let gradient = stray - rf.pseudo_gradient(p) / zq;
    let h = rf.pseudo_hessian(p);
    let curvature = Vector3::new(-h[(0, 2)], -h[(1, 2)], k - h[(2, 2)]) / zq;
    (gradient, curvature)
}

fn solve_at(trap: &Trap, spec: &SolveSpec, p: &FieldPoint, k: f64) -> Result<VoltageSet> {
    let layout = trap.layout();
    let model = LinearModel::new(layout, groups(spec, layout, p.z()), p);
    let stray = Vector3::from(spec.stray_field);
    let (g, c) = confinement_targets(trap, p, k, &stray);
    let b = model.rhs(&g, &c);
    let n = model.groups.len();
    let lo = DVector::from_element(n, -spec.bound);
    let hi = DVector::from_element(n, spec.bound);
    let fit = bounded_fit(&model.matrix, &b, spec.regularization, &lo, &hi);
    check_fit(&model, &fit, &b, c.norm(), spec.bound)?;
    Ok(model.to_volts(&fit.solution))
}

fn curvature_for(omega: f64, ion: &IonSpecies) -> f64 {
    ion.mass * omega * omega / ELEMENTARY_CHARGE
}

/// Voltages over `spec.allowed` that put a minimum with the target axial
/// frequency at the target point and cancel the requested stray field.
pub fn solve_confinement(layout: &ElectrodeLayout, drive: &RfDrive, ion: &IonSpecies, spec: &SolveSpec) -> Result<VoltageSet> {
    spec.validate(layout)?;
    let trap = Trap::new(layout.clone(), *drive, *ion, VoltageSet::new())?;
    let p = target_point(&trap, spec)?;
    solve_confinement_at(&trap, spec, &p)
}

fn solve_confinement_at(trap: &Trap, spec: &SolveSpec, p: &FieldPoint) -> Result<VoltageSet> {
    let k = curvature_for(spec.target_axial_omega, trap.ion());
    let volts = solve_at(trap, spec, p, k)?;
    if spec.target_axial_omega == 0.0 {
        return Ok(volts);
    }

    // One nonlinear refinement: measure the achieved axial frequency at the
    // actual minimum and correct the curvature target once.
    let stray = Vector3::from(spec.stray_field);
    let solved = trap.with_dc(volts.clone())?.with_stray_field(stray);
    let r = find_minimum(&solved, p, &MinimizeOptions::default())?;
    let achieved = secular_analysis(&solved, &r).axial_frequency();
    if achieved > 0.0 && ((achieved / spec.target_axial_omega) - 1.0).abs() > 1e-5 {
        let k_achieved = curvature_for(achieved, trap.ion());
        return solve_at(trap, spec, p, 2.0 * k - k_achieved);
    }
    Ok(volts)
}

/// Adds a correction to `base` whose DC field at the RF nil cancels `stray`
/// while leaving the axial curvature untouched.
pub fn compensate(
    layout: &ElectrodeLayout,
    drive: &RfDrive,
    ion: &IonSpecies,
    stray: &Vector3<f64>,
    base: &VoltageSet,
    spec: &SolveSpec,
) -> Result<VoltageSet> {
    spec.validate(layout)?;
    let trap = Trap::new(layout.clone(), *drive, *ion, base.clone())?;
    let p = match spec.target_position {
        Some([x, y, z]) => FieldPoint::new(x, y, z)?,
        None => find_minimum(&trap, &target_point(&trap, spec)?, &MinimizeOptions::default())?,
    };
    let model = LinearModel::new(layout, groups(spec, layout, p.z()), &p);
    let b = model.rhs(stray, &Vector3::zeros());
    let base_vec = model.from_volts(base);
    let lo = base_vec.map(|v| -spec.bound - v);
    let hi = base_vec.map(|v| spec.bound - v);
    let fit = bounded_fit(&model.matrix, &b, spec.regularization, &lo, &hi);
    check_fit(&model, &fit, &b, 0.0, spec.bound)?;
    Ok(base.added(&model.to_volts(&fit.solution)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveformStep {
    pub time: f64,
    pub position_m: [f64; 3],
    pub volts: VoltageSet,
}

/// Time-ordered voltage sets for transporting an ion along z.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waveform {
    pub steps: Vec<WaveformStep>,
}

impl Waveform {
    pub fn new(steps: Vec<WaveformStep>) -> Result<Self> {
        if steps.windows(2).any(|w| !(w[1].time > w[0].time)) {
            return Err(Error::InvalidParameter("waveform times must be strictly increasing".into()));
        }
        Ok(Self { steps })
    }

    pub fn electrode_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self
            .steps
            .iter()
            .flat_map(|s| s.volts.0.keys().cloned())
            .collect();
        names.sort();
        names.dedup();
        names
    }

    /// CSV with a time column and one column per electrode.
    pub fn to_csv(&self) -> String {
        let names = self.electrode_names();
        let mut out = String::from("time");
        for n in &names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for s in &self.steps {
            write!(out, "{}", s.time).unwrap();
            for n in &names {
                write!(out, ",{}", s.volts.get(n)).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Axial extent covered by the DC segment columns.
pub fn segment_span(layout: &ElectrodeLayout) -> Option<(f64, f64)> {
    let rects = layout.with_role(ElectrodeRole::Dc).flat_map(|e| e.rects.iter());
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for r in rects {
        lo = lo.min(r.z_min);
        hi = hi.max(r.z_max);
    }
    (lo < hi).then_some((lo, hi))
}

/// Waveform moving the minimum from `from_z` to `to_z` through `n_steps`
/// evenly spaced waypoints on the RF nil, each solved for the spec's axial
/// frequency. Times run uniformly over [0, 1].
pub fn shuttle_waveform(
    layout: &ElectrodeLayout,
    drive: &RfDrive,
    ion: &IonSpecies,
    from_z: f64,
    to_z: f64,
    n_steps: usize,
    spec: &SolveSpec,
) -> Result<Waveform> {
    spec.validate(layout)?;
    if n_steps < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 steps, got {n_steps}")));
    }
    let (lo, hi) = segment_span(layout).ok_or_else(|| Error::InvalidLayout("no DC segments".into()))?;
    if (to_z - from_z).abs() > hi - lo {
        return Err(Error::InvalidParameter(format!(
            "transport distance {:e} m exceeds the segment span {:e} m",
            (to_z - from_z).abs(),
            hi - lo
        )));
    }
    let trap = Trap::new(layout.clone(), *drive, *ion, VoltageSet::new())?;
    let mut seed = default_seed(layout);
    let mut steps = Vec::with_capacity(n_steps);
    for k in 0..n_steps {
        let frac = k as f64 / (n_steps - 1) as f64;
        let z = from_z + (to_z - from_z) * frac;
        let wrap = |e: Error| Error::Waypoint {
            index: k,
            z,
            source: Box::new(e),
        };
        let p = rf_nil_at(&trap, z, &seed).map_err(wrap)?;
        seed = p;
        let volts = solve_confinement_at(&trap, spec, &p).map_err(wrap)?;
        steps.push(WaveformStep {
            time: frac,
            position_m: [p.x(), p.y(), p.z()],
            volts,
        });
    }
    Waveform::new(steps)
}

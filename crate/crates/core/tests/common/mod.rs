//! Independent reference computations shared by the integration tests.
//!
//! Nothing in here calls the closed-form field code: each oracle reaches its
//! answer by a different route (numerical quadrature, finite differences,
//! direct time integration, grid search) so that agreement is meaningful.

#![allow(dead_code)]

use std::collections::BinaryHeap;
use std::sync::OnceLock;

use nalgebra::{Matrix3, Vector3};
use surftrap::analysis::{find_minimum, IonSpecies, MinimizeOptions, RfDrive, Trap};
use surftrap::field::FieldPoint;
use surftrap::geometry::{build_paper_layout, ElectrodeLayout, Rect};
use surftrap::solver::{rf_nil, solve_confinement, SolveSpec, VoltageSet};

pub const UM: f64 = 1e-6;

pub fn pt(x: f64, y: f64, z: f64) -> FieldPoint {
    FieldPoint::new(x, y, z).expect("test point above the surface")
}

// ---------------------------------------------------------------------------
// Adaptive Gauss–Kronrod (7, 15) quadrature

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let pair = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// ∫ₐᵇ f by recursive bisection until the Kronrod–Gauss difference on
/// every piece is below its share of `abs_tol`.
pub fn integrate<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64, abs_tol: f64) -> f64 {
    fn rec<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64, tol: f64, whole: f64, depth: u32) -> f64 {
        let (v, err) = gk15(f, a, b);
        if err <= tol || depth >= 40 || (b - a) <= 1e-14 * whole {
            return v;
        }
        let m = 0.5 * (a + b);
        rec(f, a, m, 0.5 * tol, whole, depth + 1) + rec(f, m, b, 0.5 * tol, whole, depth + 1)
    }
    rec(f, a, b, abs_tol, (b - a).abs(), 0)
}

/// Potential of a unit-voltage rectangle from the plane Green's function,
/// (y/2π) ∬ dA / |r − r′|³, by nested adaptive quadrature.
pub fn quadrature_potential(rect: &Rect, x: f64, y: f64, z: f64) -> f64 {
    // Integrand scale is 1/y³ over an area ~ y²; aim well below 1e-9 relative.
    let tol = 1e-14 / y;
    let mut outer = |xp: f64| {
        let dx2 = (xp - x).powi(2) + y * y;
        let mut inner = |zp: f64| (dx2 + (zp - z).powi(2)).powf(-1.5);
        integrate(&mut inner, rect.z_min, rect.z_max, tol * y)
    };
    y / (2.0 * std::f64::consts::PI) * integrate(&mut outer, rect.x_min, rect.x_max, tol)
}

// ---------------------------------------------------------------------------
// Finite differences

pub fn fd_gradient<F: Fn(&Vector3<f64>) -> f64>(f: F, p: &Vector3<f64>, h: f64) -> Vector3<f64> {
    Vector3::from_fn(|i, _| {
        let mut e = Vector3::zeros();
        e[i] = h;
        (f(&(p + e)) - f(&(p - e))) / (2.0 * h)
    })
}

pub fn fd_jacobian<F: Fn(&Vector3<f64>) -> Vector3<f64>>(f: F, p: &Vector3<f64>, h: f64) -> Matrix3<f64> {
    let mut m = Matrix3::zeros();
    for j in 0..3 {
        let mut e = Vector3::zeros();
        e[j] = h;
        let col = (f(&(p + e)) - f(&(p - e))) / (2.0 * h);
        m.set_column(j, &col);
    }
    m
}

pub fn rel_err_vec(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

pub fn rel_err_mat(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

// ---------------------------------------------------------------------------
// Paper trap fixtures (computed once per test binary)

pub fn paper_trap_rf() -> Trap {
    Trap::new(build_paper_layout(), RfDrive::paper(), IonSpecies::ca40(), VoltageSet::new()).unwrap()
}

pub fn paper_rf_nil() -> FieldPoint {
    static NIL: OnceLock<FieldPoint> = OnceLock::new();
    *NIL.get_or_init(|| rf_nil(&paper_trap_rf()).expect("RF nil of the reference trap"))
}

/// Confinement set for 1.069 MHz with the centre electrode and the central
/// three segment pairs.
pub fn paper_volts() -> VoltageSet {
    static VOLTS: OnceLock<VoltageSet> = OnceLock::new();
    VOLTS
        .get_or_init(|| {
            solve_confinement(&build_paper_layout(), &RfDrive::paper(), &IonSpecies::ca40(), &SolveSpec::paper(true))
                .expect("paper confinement solve")
        })
        .clone()
}

pub fn paper_trap_dc() -> Trap {
    paper_trap_rf().with_dc(paper_volts()).unwrap()
}

pub fn paper_minimum() -> FieldPoint {
    static MIN: OnceLock<FieldPoint> = OnceLock::new();
    *MIN.get_or_init(|| find_minimum(&paper_trap_dc(), &paper_rf_nil(), &MinimizeOptions::default()).unwrap())
}

/// Layout that exactly tiles the square |x|, |z| ≤ `half` with five strips.
pub fn tiled_five_wire(half: f64) -> ElectrodeLayout {
    use surftrap::geometry::{Electrode, ElectrodeRole, GapPolicy};
    let strip = |name: &str, role, x0: f64, x1: f64| Electrode::new(name, role, vec![Rect::new(x0, x1, -half, half).unwrap()]);
    ElectrodeLayout {
        gap_policy: GapPolicy::SplitGap,
        electrodes: vec![
            strip("dc_left", ElectrodeRole::Dc, -half, -300.0 * UM),
            strip("rf_left", ElectrodeRole::Rf, -300.0 * UM, -100.0 * UM),
            strip("centre", ElectrodeRole::CentreDc, -100.0 * UM, 100.0 * UM),
            strip("rf_right", ElectrodeRole::Rf, 100.0 * UM, 300.0 * UM),
            strip("dc_right", ElectrodeRole::Dc, 300.0 * UM, half),
        ],
    }
}

// ---------------------------------------------------------------------------
// Driven Mathieu motion by fixed-step RK4

/// Integrates m·r̈ = −e·U₀·cos(Ωt)·H·r + F for the linearized RF field with a
/// constant holding force `force` (N), from rest at `r_start`, and returns
/// the Fourier amplitude at Ω of each coordinate over `cycles` RF periods
/// after discarding `settle` periods.
pub fn driven_micromotion(
    charge: f64,
    mass: f64,
    amplitude: f64,
    omega: f64,
    rf_hessian: &Matrix3<f64>,
    force: &Vector3<f64>,
    r_start: &Vector3<f64>,
    v_start: &Vector3<f64>,
    cycles: usize,
    steps_per_cycle: usize,
) -> Vector3<f64> {
    let period = 2.0 * std::f64::consts::PI / omega;
    let dt = period / steps_per_cycle as f64;
    let accel = |t: f64, r: &Vector3<f64>| -> Vector3<f64> {
        (-charge * amplitude * (omega * t).cos() * (rf_hessian * r) + force) / mass
    };
    let (mut r, mut v) = (*r_start, *v_start);
    let mut proj = Vector3::zeros();
    let n = cycles * steps_per_cycle;
    for k in 0..n {
        let t = k as f64 * dt;
        // Trapezoid weights on the periodic grid are uniform.
        proj += r * (omega * t).cos();
        let a1 = accel(t, &r);
        let (r2, v2) = (r + 0.5 * dt * v, v + 0.5 * dt * a1);
        let a2 = accel(t + 0.5 * dt, &r2);
        let (r3, v3) = (r + 0.5 * dt * v2, v + 0.5 * dt * a2);
        let a3 = accel(t + 0.5 * dt, &r3);
        let (r4, v4) = (r + dt * v3, v + dt * a3);
        let a4 = accel(t + dt, &r4);
        r += dt / 6.0 * (v + 2.0 * v2 + 2.0 * v3 + v4);
        v += dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
    }
    2.0 * proj / n as f64
}

// ---------------------------------------------------------------------------
// Minimax flood fill for barrier heights

#[derive(PartialEq)]
struct Level(f64, usize);
impl Eq for Level {}
impl PartialOrd for Level {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Level {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Min-heap on the level.
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

/// Lowest level at which the basin containing cell (i0, j0) of an `nx × ny`
/// grid of energies connects to the grid boundary (4-neighbour moves).
pub fn flood_fill_escape(energy: &[f64], nx: usize, ny: usize, i0: usize, j0: usize) -> f64 {
    let idx = |i: usize, j: usize| j * nx + i;
    let mut seen = vec![false; nx * ny];
    let mut heap = BinaryHeap::new();
    heap.push(Level(energy[idx(i0, j0)], idx(i0, j0)));
    let mut level = f64::NEG_INFINITY;
    while let Some(Level(e, k)) = heap.pop() {
        if seen[k] {
            continue;
        }
        seen[k] = true;
        level = level.max(e);
        let (i, j) = (k % nx, k / nx);
        if i == 0 || j == 0 || i == nx - 1 || j == ny - 1 {
            return level;
        }
        for (a, b) in [(i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)] {
            let n = idx(a, b);
            if !seen[n] {
                heap.push(Level(energy[n], n));
            }
        }
    }
    level
}

//! Closed-form fields of rectangular electrodes in an otherwise grounded
//! plane (gapless-plane model).
//!
//! A rectangle held at 1 V with the rest of the plane at 0 V produces the
//! potential `Ω / 2π` at a point above the plane, where `Ω` is the solid
//! angle the rectangle subtends there. The solid angle is a signed sum of
//! one arctangent per corner, which differentiates cleanly, so the gradient
//! and Hessian are exact as well.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{Electrode, ElectrodeLayout, Rect};
use crate::voltages::VoltageSet;

/// Evaluation heights are clamped to this value. Right at an electrode edge
/// the corner arctangents jump as y → 0, and clamping keeps them bounded.
pub const MIN_EVAL_HEIGHT: f64 = 1e-9;

/// A point strictly above the electrode plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldPoint {
    x: f64,
    y: f64,
    z: f64,
}

impl FieldPoint {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        if !(y > 0.0) || !x.is_finite() || !y.is_finite() || !z.is_finite() {
            return Err(Error::BelowSurface { y });
        }
        Ok(Self { x, y, z })
    }

    pub fn from_vector(v: &Vector3<f64>) -> Result<Self> {
        Self::new(v.x, v.y, v.z)
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn to_vector(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn offset(&self, d: &Vector3<f64>) -> Result<Self> {
        Self::new(self.x + d.x, self.y + d.y, self.z + d.z)
    }
}

/// Potential (per volt), its gradient (1/m) and Hessian (1/m²).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Basis {
    pub potential: f64,
    pub gradient: Vector3<f64>,
    pub hessian: Matrix3<f64>,
}

impl Basis {
    pub fn zero() -> Self {
        Self {
            potential: 0.0,
            gradient: Vector3::zeros(),
            hessian: Matrix3::zeros(),
        }
    }

    fn accumulate(&mut self, other: &Basis, weight: f64) {
        self.potential += weight * other.potential;
        self.gradient += weight * other.gradient;
        self.hessian += weight * other.hessian;
    }
}

struct Corner {
    x: f64,
    z: f64,
    sign: f64,
}

fn corners(rect: &Rect) -> [Corner; 4] {
    [
        Corner { x: rect.x_max, z: rect.z_max, sign: 1.0 },
        Corner { x: rect.x_min, z: rect.z_max, sign: -1.0 },
        Corner { x: rect.x_max, z: rect.z_min, sign: -1.0 },
        Corner { x: rect.x_min, z: rect.z_min, sign: 1.0 },
    ]
}

fn clamped_height(p: &FieldPoint) -> f64 {
    p.y.max(MIN_EVAL_HEIGHT)
}

/// Corner term `atan(XZ / (yR))` with `X`, `Z` measured from the field point
/// to the corner.
#[inline]
fn corner_value(dx: f64, dz: f64, y: f64) -> f64 {
    let r = (dx * dx + dz * dz + y * y).sqrt();
    (dx * dz).atan2(y * r)
}

pub fn rect_potential(rect: &Rect, p: &FieldPoint) -> f64 {
    let y = clamped_height(p);
    let sum: f64 = corners(rect)
        .iter()
        .map(|c| c.sign * corner_value(c.x - p.x, c.z - p.z, y))
        .sum();
    sum / (2.0 * PI)
}

pub fn rect_gradient(rect: &Rect, p: &FieldPoint) -> Vector3<f64> {
    rect_basis(rect, p).gradient
}

pub fn rect_hessian(rect: &Rect, p: &FieldPoint) -> Matrix3<f64> {
    rect_basis(rect, p).hessian
}

/// Potential, gradient and Hessian of one unit-voltage rectangle.
pub fn rect_basis(rect: &Rect, p: &FieldPoint) -> Basis {
    let y = clamped_height(p);
    let y2 = y * y;
    let mut phi = 0.0;
    let mut g = Vector3::zeros();
    let mut h = Matrix3::zeros();

    for c in corners(rect).iter() {
        let dx = c.x - p.x;
        let dz = c.z - p.z;
        let a = dx * dx + y2;
        let b = dz * dz + y2;
        let r = (dx * dx + dz * dz + y2).sqrt();
        let r3 = r * r * r;

        // Derivatives with respect to the corner offsets (X, Z) and height y.
        let f_x = dz * y / (a * r);
        let f_z = dx * y / (b * r);
        let f_y = -(dx * dz / r) * (1.0 / a + 1.0 / b);

        let xzy = dx * dz * y;
        let f_xx = -xzy * (2.0 / (a * a * r) + 1.0 / (a * r3));
        let f_zz = -xzy * (2.0 / (b * b * r) + 1.0 / (b * r3));
        let f_yy = xzy * ((1.0 / a + 1.0 / b) / r3 + 2.0 * (1.0 / (a * a) + 1.0 / (b * b)) / r);
        let f_xz = y / r3;
        let f_xy = dz * (1.0 / (a * r) - 2.0 * y2 / (a * a * r) - y2 / (a * r3));
        let f_zy = dx * (1.0 / (b * r) - 2.0 * y2 / (b * b * r) - y2 / (b * r3));

        let s = c.sign;
        phi += s * (dx * dz).atan2(y * r);

        // X = xc − x and Z = zc − z flip the sign of each x or z derivative.
        g += s * Vector3::new(-f_x, f_y, -f_z);
        let hc = Matrix3::new(
            f_xx, -f_xy, f_xz, //
            -f_xy, f_yy, -f_zy, //
            f_xz, -f_zy, f_zz,
        );
        h += s * hc;
    }

    let norm = 1.0 / (2.0 * PI);
    Basis {
        potential: phi * norm,
        gradient: g * norm,
        hessian: h * norm,
    }
}

pub fn electrode_basis(electrode: &Electrode, p: &FieldPoint) -> Basis {
    let mut out = Basis::zero();
    for r in &electrode.rects {
        out.accumulate(&rect_basis(r, p), 1.0);
    }
    out
}

/// Unit-voltage basis of every electrode, in layout order.
pub fn layout_basis(layout: &ElectrodeLayout, p: &FieldPoint) -> Vec<Basis> {
    layout.electrodes.iter().map(|e| electrode_basis(e, p)).collect()
}

/// Superposed electrostatics at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    /// V
    pub potential: f64,
    /// Electric field −∇φ, V/m
    pub field: Vector3<f64>,
    /// Hessian of the potential, V/m²
    pub curvature: Matrix3<f64>,
}

/// Voltage-weighted superposition of the electrode bases.
pub fn superpose(layout: &ElectrodeLayout, volts: &VoltageSet, p: &FieldPoint) -> Result<FieldSample> {
    for (name, _) in volts.iter() {
        if layout.get(name).is_none() {
            return Err(Error::UnknownElectrode(name.to_string()));
        }
    }
    let mut acc = Basis::zero();
    for e in &layout.electrodes {
        let v = volts.get(&e.name);
        if v != 0.0 {
            acc.accumulate(&electrode_basis(e, p), v);
        }
    }
    Ok(FieldSample {
        potential: acc.potential,
        field: -acc.gradient,
        curvature: acc.hessian,
    })
}

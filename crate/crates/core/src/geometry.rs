//! Planar electrode layouts in the trap surface (y = 0).
//!
//! Coordinates: `x` transverse in the plane, `y` along the surface normal,
//! `z` along the trap axis. SI units. Everything not covered by a named
//! electrode is grounded plane at 0 V.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::constants::MICRO;
use crate::error::{Error, Result};

/// Axis-aligned rectangle in the electrode plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub z_min: f64,
    pub z_max: f64,
}

impl Rect {
    pub fn new(x_min: f64, x_max: f64, z_min: f64, z_max: f64) -> Result<Self> {
        let all_finite = [x_min, x_max, z_min, z_max].iter().all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::InvalidRect(format!(
                "non-finite extent [{x_min}, {x_max}] x [{z_min}, {z_max}]"
            )));
        }
        if !(x_min < x_max && z_min < z_max) {
            return Err(Error::InvalidRect(format!(
                "empty extent [{x_min}, {x_max}] x [{z_min}, {z_max}]"
            )));
        }
        Ok(Self {
            x_min,
            x_max,
            z_min,
            z_max,
        })
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn length(&self) -> f64 {
        self.z_max - self.z_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.length()
    }

    /// Area shared with `other`; zero when they only touch.
    pub fn overlap_area(&self, other: &Rect) -> f64 {
        let dx = self.x_max.min(other.x_max) - self.x_min.max(other.x_min);
        let dz = self.z_max.min(other.z_max) - self.z_min.max(other.z_min);
        if dx > OVERLAP_EPS && dz > OVERLAP_EPS {
            dx * dz
        } else {
            0.0
        }
    }

    pub fn translated(&self, dx: f64, dz: f64) -> Rect {
        Rect {
            x_min: self.x_min + dx,
            x_max: self.x_max + dx,
            z_min: self.z_min + dz,
            z_max: self.z_max + dz,
        }
    }

    /// Reflection through the plane z = 0.
    pub fn mirrored_z(&self) -> Rect {
        Rect {
            x_min: self.x_min,
            x_max: self.x_max,
            z_min: -self.z_max,
            z_max: -self.z_min,
        }
    }

    /// Reflection through the plane x = 0.
    pub fn mirrored_x(&self) -> Rect {
        Rect {
            x_min: -self.x_max,
            x_max: -self.x_min,
            z_min: self.z_min,
            z_max: self.z_max,
        }
    }
}

// Shared boundaries of adjacent electrodes are computed from the same
// expressions, so a picometre is far above rounding noise.
const OVERLAP_EPS: f64 = 1e-12;

impl TryFrom<[f64; 4]> for Rect {
    type Error = Error;

    fn try_from(v: [f64; 4]) -> Result<Self> {
        Rect::new(v[0], v[1], v[2], v[3])
    }
}

impl From<Rect> for [f64; 4] {
    fn from(r: Rect) -> Self {
        [r.x_min, r.x_max, r.z_min, r.z_max]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElectrodeRole {
    Rf,
    Dc,
    CentreDc,
    Ground,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Electrode {
    pub name: String,
    pub role: ElectrodeRole,
    pub rects: Vec<Rect>,
}

impl Electrode {
    pub fn new(name: impl Into<String>, role: ElectrodeRole, rects: Vec<Rect>) -> Self {
        Self {
            name: name.into(),
            role,
            rects,
        }
    }

    pub fn area(&self) -> f64 {
        self.rects.iter().map(Rect::area).sum()
    }
}

/// How the physical inter-electrode gaps were folded into the geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapPolicy {
    /// Each boundary is moved half a gap into the gap so that electrodes tile
    /// the plane without gaps.
    SplitGap,
    /// Gaps are left in place and treated as grounded plane.
    Grounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElectrodeLayout {
    pub gap_policy: GapPolicy,
    pub electrodes: Vec<Electrode>,
}

impl ElectrodeLayout {
    pub fn get(&self, name: &str) -> Option<&Electrode> {
        self.electrodes.iter().find(|e| e.name == name)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.electrodes.iter().position(|e| e.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.electrodes.iter().map(|e| e.name.as_str())
    }

    pub fn with_role(&self, role: ElectrodeRole) -> impl Iterator<Item = &Electrode> {
        self.electrodes.iter().filter(move |e| e.role == role)
    }

    /// Rigid translation of every electrode in the plane.
    pub fn translated(&self, dx: f64, dz: f64) -> Self {
        let electrodes = self
            .electrodes
            .iter()
            .map(|e| Electrode {
                name: e.name.clone(),
                role: e.role,
                rects: e.rects.iter().map(|r| r.translated(dx, dz)).collect(),
            })
            .collect();
        Self {
            gap_policy: self.gap_policy,
            electrodes,
        }
    }

    /// Parses the JSON layout schema and rejects layouts with violations.
    pub fn from_json(text: &str) -> Result<Self> {
        let layout: ElectrodeLayout = serde_json::from_str(text)?;
        let violations = validate_layout(&layout);
        if !violations.is_empty() {
            let msg = violations
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join("; ");
            return Err(Error::InvalidLayout(msg));
        }
        Ok(layout)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    EmptyElectrode { name: String },
    DuplicateName { name: String },
    SelfOverlap { name: String },
    Overlap { first: String, second: String },
    NoRfElectrode,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyElectrode { name } => write!(f, "electrode `{name}` has no rectangles"),
            Violation::DuplicateName { name } => write!(f, "name collision: `{name}` used more than once"),
            Violation::SelfOverlap { name } => {
                write!(f, "rectangles of electrode `{name}` overlap each other")
            }
            Violation::Overlap { first, second } => {
                write!(f, "overlap: electrodes `{first}` and `{second}` share area")
            }
            Violation::NoRfElectrode => write!(f, "layout has no RF electrode"),
        }
    }
}

/// Checks every layout invariant. An empty result means the layout is valid.
pub fn validate_layout(layout: &ElectrodeLayout) -> Vec<Violation> {
    let mut out = Vec::new();

    let mut seen = HashSet::new();
    for e in &layout.electrodes {
        if !seen.insert(e.name.as_str()) {
            out.push(Violation::DuplicateName {
                name: e.name.clone(),
            });
        }
        if e.rects.is_empty() {
            out.push(Violation::EmptyElectrode {
                name: e.name.clone(),
            });
        }
        let self_overlap = e.rects.iter().enumerate().any(|(i, a)| {
            e.rects[i + 1..].iter().any(|b| a.overlap_area(b) > 0.0)
        });
        if self_overlap {
            out.push(Violation::SelfOverlap {
                name: e.name.clone(),
            });
        }
    }

    for (i, a) in layout.electrodes.iter().enumerate() {
        for b in &layout.electrodes[i + 1..] {
            let overlapping = a
                .rects
                .iter()
                .any(|ra| b.rects.iter().any(|rb| ra.overlap_area(rb) > 0.0));
            if overlapping {
                out.push(Violation::Overlap {
                    first: a.name.clone(),
                    second: b.name.clone(),
                });
            }
        }
    }

    if !layout.electrodes.iter().any(|e| e.role == ElectrodeRole::Rf) {
        out.push(Violation::NoRfElectrode);
    }
    out
}

/// Drawn dimensions of the five-wire layout, in metres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PaperLayoutParams {
    pub centre_width: f64,
    pub rf_narrow_width: f64,
    pub rf_wide_width: f64,
    pub gap: f64,
    pub segment_pitch_width: f64,
    pub segments_per_side: usize,
    /// Transverse extent of each DC segment beyond the outer rail edge.
    pub segment_transverse_width: f64,
    /// Rail length added beyond each end of the segment columns.
    pub rail_extension: f64,
}

impl Default for PaperLayoutParams {
    fn default() -> Self {
        Self {
            centre_width: 250.0 * MICRO,
            rf_narrow_width: 200.0 * MICRO,
            rf_wide_width: 400.0 * MICRO,
            gap: 10.0 * MICRO,
            segment_pitch_width: 350.0 * MICRO,
            segments_per_side: 7,
            segment_transverse_width: 2000.0 * MICRO,
            rail_extension: 3740.0 * MICRO,
        }
    }
}

impl PaperLayoutParams {
    /// Same layout with both RF rails as wide as the narrow one.
    pub fn symmetric_rails(self) -> Self {
        Self {
            rf_wide_width: self.rf_narrow_width,
            ..self
        }
    }

    /// Axial centre-to-centre spacing of neighbouring segments.
    pub fn segment_pitch(&self) -> f64 {
        self.segment_pitch_width + self.gap
    }

    /// Axial half-length of a segment column after absorbing the gaps.
    pub fn column_half_length(&self) -> f64 {
        0.5 * self.segments_per_side as f64 * self.segment_pitch()
    }
}

/// The fabricated five-wire layout: centre DC electrode flanked by a narrow
/// and a wide RF rail, with a column of DC segments outside each rail.
pub fn build_paper_layout() -> ElectrodeLayout {
    build_paper_layout_with(&PaperLayoutParams::default())
}

pub fn build_paper_layout_with(p: &PaperLayoutParams) -> ElectrodeLayout {
    let half_gap = 0.5 * p.gap;

    // Effective (gap-absorbed) transverse boundaries, centre electrode at x = 0.
    let centre_half = 0.5 * p.centre_width + half_gap;
    let narrow_outer = -centre_half - (p.rf_narrow_width + p.gap);
    let wide_outer = centre_half + (p.rf_wide_width + p.gap);

    let column_half = p.column_half_length();
    let rail_half = column_half + p.rail_extension;

    let rect = |x0, x1, z0, z1| Rect::new(x0, x1, z0, z1).expect("layout parameters are positive");
    let mut electrodes = vec![
        Electrode::new(
            "rf_narrow",
            ElectrodeRole::Rf,
            vec![rect(narrow_outer, -centre_half, -rail_half, rail_half)],
        ),
        Electrode::new(
            "centre",
            ElectrodeRole::CentreDc,
            vec![rect(-centre_half, centre_half, -rail_half, rail_half)],
        ),
        Electrode::new(
            "rf_wide",
            ElectrodeRole::Rf,
            vec![rect(centre_half, wide_outer, -rail_half, rail_half)],
        ),
    ];

    let pitch = p.segment_pitch();
    let mid = 0.5 * (p.segments_per_side as f64 + 1.0);
    for side in ["L", "R"] {
        let (x0, x1) = match side {
            "L" => (narrow_outer - p.segment_transverse_width, narrow_outer),
            _ => (wide_outer, wide_outer + p.segment_transverse_width),
        };
        for k in 1..=p.segments_per_side {
            let zc = (k as f64 - mid) * pitch;
            electrodes.push(Electrode::new(
                format!("dc_{side}{k}"),
                ElectrodeRole::Dc,
                vec![rect(x0, x1, zc - 0.5 * pitch, zc + 0.5 * pitch)],
            ));
        }
    }

    ElectrodeLayout {
        gap_policy: GapPolicy::SplitGap,
        electrodes,
    }
}

/// Name of the segment occupying the mirror-image position under z → −z.
pub fn mirror_segment_name(name: &str, segments_per_side: usize) -> Option<String> {
    let rest = name.strip_prefix("dc_")?;
    let (side, idx) = rest.split_at(1);
    let k: usize = idx.parse().ok()?;
    if !(side == "L" || side == "R") || k == 0 || k > segments_per_side {
        return None;
    }
    Some(format!("dc_{side}{}", segments_per_side + 1 - k))
}

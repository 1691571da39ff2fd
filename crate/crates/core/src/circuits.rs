//! RF drive chain: LC resonator quality factor versus temperature, power
//! dissipation, capacitive pick-off divider and RC filters on the DC lines.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ROOM_TEMPERATURE: f64 = 295.0;

/// Trap-side matching network: tunable capacitor range (F) and shunt
/// inductor (H). Stored for reference; impedance matching is not modelled.
pub const MATCHING_CAPACITOR_RANGE: (f64, f64) = (12e-12, 100e-12);
pub const MATCHING_INDUCTOR: f64 = 186e-9;

/// Dielectric loss tangent of the substrate as a function of temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LossTangent {
    Constant { value: f64 },
    /// tanδ(T) = tanδ₂₉₅ · exp(−T_a (1/T − 1/295)) with T_a = E_a / k_B.
    FreezeOut { at_room_temperature: f64, activation_k: f64 },
}

impl LossTangent {
    /// Activation energy of 30 meV puts tanδ(25 K) near 4e-6.
    pub fn silicon() -> Self {
        Self::FreezeOut {
            at_room_temperature: 1.5,
            activation_k: 0.030 / 8.617_333_262e-5,
        }
    }

    pub fn at(&self, t: f64) -> f64 {
        match *self {
            Self::Constant { value } => value,
            Self::FreezeOut {
                at_room_temperature,
                activation_k,
            } => at_room_temperature * (-activation_k * (1.0 / t - 1.0 / ROOM_TEMPERATURE)).exp(),
        }
    }
}

/// Inductor quality factor as a function of temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InductorQ {
    Constant { value: f64 },
    /// Linear in copper conductivity between two anchor temperatures.
    /// Resistivity follows ρ/ρ₀ = 1 + (RRR − 1)·g(T)/g(295) with the
    /// phonon term g(T) = T⁵/(T⁴ + θ⁴).
    CopperConductivity {
        q_room: f64,
        q_cold: f64,
        cold_k: f64,
        rrr: f64,
        theta_k: f64,
    },
}

impl InductorQ {
    pub fn copper_air_coil() -> Self {
        Self::CopperConductivity {
            q_room: 400.0,
            q_cold: 1300.0,
            cold_k: 10.0,
            rrr: 50.0,
            theta_k: 70.0,
        }
    }

    pub fn at(&self, t: f64) -> f64 {
        match *self {
            Self::Constant { value } => value,
            Self::CopperConductivity {
                q_room,
                q_cold,
                cold_k,
                rrr,
                theta_k,
            } => {
                let g = |t: f64| t.powi(5) / (t.powi(4) + theta_k.powi(4));
                let sigma = |t: f64| 1.0 / (1.0 + (rrr - 1.0) * g(t) / g(ROOM_TEMPERATURE));
                let s_room = sigma(ROOM_TEMPERATURE);
                let frac = (sigma(t) - s_room) / (sigma(cold_k) - s_room);
                q_room + (q_cold - q_room) * frac
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResonatorModel {
    pub inductance_h: f64,
    pub capacitance_f: f64,
    /// Fraction of the capacitor's electric energy stored in the substrate.
    pub participation: f64,
    pub inductor_q: InductorQ,
    pub loss_tangent: LossTangent,
}

impl ResonatorModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.inductance_h > 0.0 && self.capacitance_f > 0.0) {
            return Err(Error::InvalidParameter("inductance and capacitance must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.participation) {
            return Err(Error::InvalidParameter(format!(
                "participation must lie in [0, 1], got {}",
                self.participation
            )));
        }
        Ok(())
    }

    /// Copper air coil on a silicon-substrate trap.
    pub fn paper_silicon() -> Self {
        Self {
            inductance_h: 6.3e-6,
            capacitance_f: 9.5e-12,
            participation: 0.9,
            inductor_q: InductorQ::copper_air_coil(),
            loss_tangent: LossTangent::silicon(),
        }
    }

    /// Same coil on a fused-silica trap.
    pub fn fused_silica() -> Self {
        Self {
            loss_tangent: LossTangent::Constant { value: 1e-4 },
            ..Self::paper_silicon()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "paper-silicon" => Ok(Self::paper_silicon()),
            "fused-silica" => Ok(Self::fused_silica()),
            other => Err(Error::InvalidParameter(format!(
                "unknown circuit preset {other:?} (expected paper-silicon or fused-silica)"
            ))),
        }
    }

    pub fn resonance_hz(&self) -> Result<f64> {
        lc_resonance(self.inductance_h, self.capacitance_f)
    }

    pub fn q_at(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::InvalidParameter(format!("temperature must be positive, got {t}")));
        }
        let ql = self.inductor_q.at(t);
        if !(ql > 0.0) {
            return Err(Error::InvalidParameter(format!("inductor Q is {ql} at {t} K")));
        }
        let qc = q_capacitive(self.participation, self.loss_tangent.at(t))?;
        q_total(ql, qc)
    }
}

pub fn lc_resonance(inductance: f64, capacitance: f64) -> Result<f64> {
    if !(inductance > 0.0 && capacitance > 0.0) {
        return Err(Error::InvalidParameter("inductance and capacitance must be positive".into()));
    }
    Ok(1.0 / (2.0 * PI * (inductance * capacitance).sqrt()))
}

/// 1/Q = 1/Q_L + 1/Q_C. An infinite Q_C means a lossless capacitor.
pub fn q_total(q_l: f64, q_c: f64) -> Result<f64> {
    if !(q_l > 0.0 && q_c > 0.0) {
        return Err(Error::InvalidParameter("quality factors must be positive".into()));
    }
    Ok(1.0 / (1.0 / q_l + 1.0 / q_c))
}

/// Q_C = 1/(p·tanδ); infinite when either factor is zero.
pub fn q_capacitive(participation: f64, tan_delta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&participation) || !(tan_delta >= 0.0) {
        return Err(Error::InvalidParameter("need 0 ≤ p ≤ 1 and tanδ ≥ 0".into()));
    }
    Ok(1.0 / (participation * tan_delta))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QPoint {
    pub temperature_k: f64,
    pub q_inductor: f64,
    pub q_capacitor: f64,
    pub q: f64,
}

pub fn q_vs_temperature(model: &ResonatorModel, temperatures: &[f64]) -> Result<Vec<QPoint>> {
    model.validate()?;
    temperatures
        .iter()
        .map(|&t| {
            Ok(QPoint {
                temperature_k: t,
                q_inductor: model.inductor_q.at(t),
                q_capacitor: q_capacitive(model.participation, model.loss_tangent.at(t))?,
                q: model.q_at(t)?,
            })
        })
        .collect()
}

/// Power dissipated in the resonator, W: U₀²CΩ/(2Q).
pub fn power_dissipation(amplitude: f64, capacitance: f64, omega: f64, q: f64) -> Result<f64> {
    if !(amplitude >= 0.0 && capacitance > 0.0 && omega > 0.0 && q > 0.0) {
        return Err(Error::InvalidParameter("power dissipation needs U₀ ≥ 0 and C, Ω, Q > 0".into()));
    }
    Ok(amplitude * amplitude * capacitance * omega / (2.0 * q))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Divider {
    /// The tap sees 1/`ratio` of the applied voltage.
    pub ratio: f64,
    pub total_capacitance_f: f64,
}

fn series(caps: &[f64]) -> f64 {
    1.0 / caps.iter().map(|c| 1.0 / c).sum::<f64>()
}

/// Series capacitor chain tapped across capacitor `tap`.
pub fn divider_ratio(chain: &[f64], tap: usize) -> Result<Divider> {
    if chain.len() < 2 {
        return Err(Error::InvalidParameter("a divider needs at least two capacitors".into()));
    }
    if tap >= chain.len() {
        return Err(Error::InvalidParameter(format!("tap {tap} out of range for {} capacitors", chain.len())));
    }
    if chain.iter().any(|&c| !(c > 0.0)) {
        return Err(Error::InvalidParameter("capacitances must be positive".into()));
    }
    let total = series(chain);
    Ok(Divider {
        ratio: chain[tap] / total,
        total_capacitance_f: total,
    })
}

/// Stated pick-off divider: 1:400, 2.5 pF, built from one 1000 pF and two
/// 5 pF capacitors.
pub const DIVIDER_STATED_RATIO: f64 = 400.0;
pub const DIVIDER_STATED_TOTAL: f64 = 2.5e-12;
pub const DIVIDER_LARGE: f64 = 1000e-12;
pub const DIVIDER_SMALL: f64 = 5e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DividerReading {
    pub topology: String,
    pub divider: Divider,
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DividerCheck {
    pub stated_ratio: f64,
    pub stated_total_f: f64,
    pub readings: Vec<DividerReading>,
    /// Whether the arrangement as described (small capacitors in parallel)
    /// reproduces the stated numbers.
    pub described_arrangement_consistent: bool,
}

/// Evaluates the simple readings of the stated parts against the stated
/// ratio and total, each within 1%.
pub fn paper_divider_check() -> DividerCheck {
    let ok = |d: &Divider| {
        (d.ratio / DIVIDER_STATED_RATIO - 1.0).abs() < 0.01
            && (d.total_capacitance_f / DIVIDER_STATED_TOTAL - 1.0).abs() < 0.01
    };
    let readings: Vec<(&str, Divider)> = vec![
        (
            "1000 pF in series with (5 pF ∥ 5 pF), tapped across 1000 pF",
            divider_ratio(&[DIVIDER_LARGE, 2.0 * DIVIDER_SMALL], 0).expect("valid chain"),
        ),
        (
            "1000 pF, 5 pF and 5 pF all in series, tapped across 1000 pF",
            divider_ratio(&[DIVIDER_LARGE, DIVIDER_SMALL, DIVIDER_SMALL], 0).expect("valid chain"),
        ),
        (
            "(1000 pF ∥ 5 pF) in series with 5 pF, tapped across the parallel pair",
            divider_ratio(&[DIVIDER_LARGE + DIVIDER_SMALL, DIVIDER_SMALL], 0).expect("valid chain"),
        ),
    ];
    let readings: Vec<DividerReading> = readings
        .into_iter()
        .map(|(t, d)| DividerReading {
            topology: t.into(),
            consistent: ok(&d),
            divider: d,
        })
        .collect();
    DividerCheck {
        stated_ratio: DIVIDER_STATED_RATIO,
        stated_total_f: DIVIDER_STATED_TOTAL,
        described_arrangement_consistent: readings[0].consistent,
        readings,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSpec {
    pub resistance_ohm: f64,
    pub capacitance_f: f64,
    pub stages: u32,
}

impl FilterSpec {
    pub fn new(resistance_ohm: f64, capacitance_f: f64, stages: u32) -> Result<Self> {
        let f = Self {
            resistance_ohm,
            capacitance_f,
            stages,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.resistance_ohm > 0.0 && self.capacitance_f > 0.0) || self.stages == 0 {
            return Err(Error::InvalidParameter("filter needs R, C > 0 and at least one stage".into()));
        }
        Ok(())
    }

    /// In-vacuum filter on each DC line: 100 Ω and 330 nF.
    pub fn in_vacuum() -> Self {
        Self {
            resistance_ohm: 100.0,
            capacitance_f: 330e-9,
            stages: 1,
        }
    }

    /// Sixth-order filter outside the vacuum chamber, stages at ~80 Hz.
    pub fn external() -> Self {
        Self {
            resistance_ohm: 2e3,
            capacitance_f: 1e-6,
            stages: 6,
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "in-vacuum" => Ok(Self::in_vacuum()),
            "external" => Ok(Self::external()),
            other => Err(Error::InvalidParameter(format!(
                "unknown filter preset {other:?} (expected in-vacuum or external)"
            ))),
        }
    }

    pub fn stage_cutoff_hz(&self) -> f64 {
        1.0 / (2.0 * PI * self.resistance_ohm * self.capacitance_f)
    }

    /// −3 dB point of the whole cascade under the unloaded-stage model.
    pub fn cascade_cutoff_hz(&self) -> f64 {
        self.stage_cutoff_hz() * (2f64.powf(1.0 / self.stages as f64) - 1.0).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RcResponse {
    pub frequency_hz: f64,
    pub magnitude: f64,
    /// Single-stage cutoff 1/(2πRC).
    pub cutoff_hz: f64,
    pub cascade_cutoff_hz: f64,
    /// Stages treated as buffered (no loading between them).
    pub unloaded_stage_model: bool,
}

pub fn rc_transfer(filter: &FilterSpec, f: f64) -> Result<RcResponse> {
    filter.validate()?;
    if !(f >= 0.0) {
        return Err(Error::InvalidParameter(format!("frequency must be non-negative, got {f}")));
    }
    let fc = filter.stage_cutoff_hz();
    let x = f / fc;
    let magnitude = (1.0 + x * x).powf(-(filter.stages as f64) / 2.0);
    Ok(RcResponse {
        frequency_hz: f,
        magnitude,
        cutoff_hz: fc,
        cascade_cutoff_hz: filter.cascade_cutoff_hz(),
        unloaded_stage_model: true,
    })
}

/// Log-spaced Bode samples from `f_lo` to `f_hi`.
pub fn bode(filter: &FilterSpec, f_lo: f64, f_hi: f64, n: usize) -> Result<Vec<RcResponse>> {
    if !(f_lo > 0.0 && f_hi > f_lo) || n < 2 {
        return Err(Error::InvalidParameter("Bode sweep needs 0 < f_lo < f_hi and n ≥ 2".into()));
    }
    let step = (f_hi / f_lo).ln() / (n - 1) as f64;
    (0..n).map(|i| rc_transfer(filter, f_lo * (step * i as f64).exp())).collect()
}

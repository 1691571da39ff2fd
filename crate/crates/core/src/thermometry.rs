//! Sideband thermometry: thermal-state Rabi flops, phonon-number and
//! heating-rate fits, and the link between heating rate and electric-field
//! noise.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use rand::Rng;
use rand_distr::{Binomial, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::analysis::IonSpecies;
use crate::constants::{angular, HBAR};
use crate::error::{Error, Result};

/// Tail mass the truncated thermal distribution may leave out.
pub const TAIL_LIMIT: f64 = 1e-10;
/// Largest phonon basis the default truncation will grow to.
pub const MAX_BASIS: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionalState {
    pub nbar: f64,
    /// Mode angular frequency, rad/s.
    pub omega: f64,
}

impl MotionalState {
    pub fn new(nbar: f64, omega: f64) -> Result<Self> {
        if !(nbar >= 0.0 && nbar.is_finite()) {
            return Err(Error::InvalidParameter(format!("mean phonon number must be ≥ 0, got {nbar}")));
        }
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::InvalidParameter(format!("mode frequency must be positive, got {omega}")));
        }
        Ok(Self { nbar, omega })
    }
}

/// Lamb-Dicke parameter of `ion` for a mode at `omega`.
pub fn lamb_dicke(ion: &IonSpecies, omega: f64) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(Error::InvalidParameter(format!("mode frequency must be positive, got {omega}")));
    }
    let k = 2.0 * std::f64::consts::PI / ion.wavelength;
    // cos(90°) evaluates to 6e-17 rather than 0; treat that as no projection.
    let projection = ion.beam_angle.cos();
    let projection = if projection.abs() < 1e-15 { 0.0 } else { projection.abs() };
    Ok(k * projection * (HBAR / (2.0 * ion.mass * omega)).sqrt())
}

/// n̄ = R/(1 − R) from the red/blue sideband excitation ratio.
pub fn sideband_ratio_to_nbar(ratio: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&ratio) {
        return Err(Error::InvalidParameter(format!(
            "sideband ratio must lie in [0, 1) for a thermal state, got {ratio}"
        )));
    }
    Ok(ratio / (1.0 - ratio))
}

/// Basis size from the default rule max(50, ⌈20(n̄ + 1)⌉), grown if needed
/// until the neglected tail is below [`TAIL_LIMIT`].
pub fn default_basis_size(nbar: f64) -> Result<usize> {
    let mut n_max = 50usize.max((20.0 * (nbar + 1.0)).ceil() as usize);
    if nbar > 0.0 {
        let r = nbar / (nbar + 1.0);
        let needed = (TAIL_LIMIT.ln() / r.ln()).ceil() as usize;
        n_max = n_max.max(needed);
    }
    if n_max > MAX_BASIS {
        return Err(Error::Truncation {
            tail: (nbar / (nbar + 1.0)).powf(MAX_BASIS as f64 + 1.0),
            n_max: MAX_BASIS,
        });
    }
    Ok(n_max)
}

/// Thermal occupations p_0..=p_{n_max}.
pub fn thermal_populations(nbar: f64, n_max: usize) -> Result<Vec<f64>> {
    if !(nbar >= 0.0) {
        return Err(Error::InvalidParameter(format!("mean phonon number must be ≥ 0, got {nbar}")));
    }
    let r = nbar / (nbar + 1.0);
    let mut p = Vec::with_capacity(n_max + 1);
    let mut pn = 1.0 / (nbar + 1.0);
    for _ in 0..=n_max {
        p.push(pn);
        pn *= r;
    }
    let tail = r.powf(n_max as f64 + 1.0);
    if tail > TAIL_LIMIT {
        return Err(Error::Truncation { tail, n_max });
    }
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SidebandKind {
    Red,
    Blue,
    Carrier,
}

impl SidebandKind {
    /// Rabi frequency on the n-th level in units of the carrier Rabi
    /// frequency, first order in η.
    fn coupling(self, n: usize, eta: f64) -> f64 {
        match self {
            Self::Blue => eta * ((n + 1) as f64).sqrt(),
            Self::Red => eta * (n as f64).sqrt(),
            Self::Carrier => 1.0,
        }
    }
}

impl std::str::FromStr for SidebandKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "red" => Ok(Self::Red),
            "blue" => Ok(Self::Blue),
            "carrier" => Ok(Self::Carrier),
            other => Err(Error::InvalidParameter(format!("unknown sideband {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidebandSignal {
    /// Probe durations, s.
    pub durations: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub kind: SidebandKind,
    /// Carrier Rabi frequency, rad/s.
    pub carrier_rabi: f64,
    pub eta: f64,
    /// Set when η²(n̄ + 1) > 0.1, where first-order couplings lose accuracy.
    #[serde(default)]
    pub outside_lamb_dicke: bool,
}

impl SidebandSignal {
    pub fn new(durations: Vec<f64>, probabilities: Vec<f64>, kind: SidebandKind, carrier_rabi: f64, eta: f64) -> Result<Self> {
        let s = Self {
            durations,
            probabilities,
            kind,
            carrier_rabi,
            eta,
            outside_lamb_dicke: false,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.durations.len() != self.probabilities.len() {
            return Err(Error::InvalidParameter("durations and probabilities differ in length".into()));
        }
        if self.probabilities.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidParameter("probabilities must lie in [0, 1]".into()));
        }
        if !(self.eta >= 0.0) || !(self.carrier_rabi > 0.0) {
            return Err(Error::InvalidParameter("need η ≥ 0 and a positive carrier Rabi frequency".into()));
        }
        if self.durations.iter().any(|t| !(*t >= 0.0)) {
            return Err(Error::InvalidParameter("probe durations must be non-negative".into()));
        }
        Ok(())
    }

    /// CSV with columns `duration_s,probability`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("duration_s,probability\n");
        for (t, p) in self.durations.iter().zip(&self.probabilities) {
            out.push_str(&format!("{t},{p}\n"));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FlopOptions {
    /// Explicit basis size; `None` uses [`default_basis_size`].
    pub n_max: Option<usize>,
    /// Exponential contrast decay rate, 1/s. Zero for ideal flops.
    pub decay_rate: f64,
}

fn flop_curve(pops: &[f64], kind: SidebandKind, carrier_rabi: f64, eta: f64, decay: f64, durations: &[f64]) -> Vec<f64> {
    let rates: Vec<f64> = (0..pops.len()).map(|n| carrier_rabi * kind.coupling(n, eta)).collect();
    durations
        .iter()
        .map(|&t| {
            let contrast = (-decay * t).exp();
            let p: f64 = pops
                .iter()
                .zip(&rates)
                .map(|(pn, w)| pn * 0.5 * (1.0 - contrast * (w * t).cos()))
                .sum();
            p.clamp(0.0, 1.0)
        })
        .collect()
}

/// Excitation probability after each probe duration for a thermal state.
pub fn rabi_flop(
    state: &MotionalState,
    kind: SidebandKind,
    carrier_rabi: f64,
    eta: f64,
    durations: &[f64],
    opts: &FlopOptions,
) -> Result<SidebandSignal> {
    if !(eta >= 0.0) || !(carrier_rabi > 0.0) {
        return Err(Error::InvalidParameter("need η ≥ 0 and a positive carrier Rabi frequency".into()));
    }
    let n_max = match opts.n_max {
        Some(n) => n,
        None => default_basis_size(state.nbar)?,
    };
    let pops = thermal_populations(state.nbar, n_max)?;
    let probabilities = flop_curve(&pops, kind, carrier_rabi, eta, opts.decay_rate, durations);
    let mut signal = SidebandSignal::new(durations.to_vec(), probabilities, kind, carrier_rabi, eta)?;
    signal.outside_lamb_dicke = eta * eta * (state.nbar + 1.0) > 0.1;
    Ok(signal)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NbarFit {
    pub nbar: f64,
    pub nbar_err: f64,
    /// Fitted (or fixed) sideband Rabi scale Ω_carrier·η, rad/s.
    pub rabi_scale: f64,
    pub rabi_scale_err: f64,
    pub residual_rms: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Also fit the product Ω_carrier·η.
    pub free_rabi: bool,
    pub max_iterations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            free_rabi: false,
            max_iterations: 200,
        }
    }
}

const NBAR_GRID: [f64; 4] = [0.01, 0.1, 1.0, 10.0];

/// Model with Ω_carrier·η folded into one sideband Rabi scale (for the
/// carrier the scale is Ω_carrier itself).
fn model(signal: &SidebandSignal, nbar: f64, scale: f64, n_max: usize) -> Result<Vec<f64>> {
    let pops = thermal_populations(nbar, n_max)?;
    Ok(flop_curve(&pops, signal.kind, scale, 1.0, 0.0, &signal.durations))
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

/// Least-squares fit of the thermal Rabi-flop model. The phonon number is
/// fitted as ln n̄, starting from the best of a fixed grid.
pub fn fit_nbar(signal: &SidebandSignal, opts: &FitOptions) -> Result<NbarFit> {
    signal.validate()?;
    let n = signal.durations.len();
    if n < 5 {
        return Err(Error::InvalidParameter(format!("need at least 5 points, got {n}")));
    }
    let (lo, hi) = signal
        .probabilities
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &p| (a.min(p), b.max(p)));
    if hi - lo < 1e-12 {
        return Err(Error::Degenerate("all excitation probabilities are equal".into()));
    }
    let scale0 = match signal.kind {
        SidebandKind::Carrier => signal.carrier_rabi,
        _ => signal.carrier_rabi * signal.eta,
    };
    let t_max = signal.durations.iter().cloned().fold(0.0, f64::max);
    if scale0 * t_max < std::f64::consts::PI {
        return Err(Error::InvalidParameter("probe durations must span at least half a Rabi period".into()));
    }

    let basis = |nbar: f64| default_basis_size(nbar * 1.5 + 1.0);
    let residuals = |u: f64, s: f64| -> Result<Vec<f64>> {
        let nbar = u.exp();
        let m = model(signal, nbar, s, basis(nbar)?)?;
        Ok(m.iter().zip(&signal.probabilities).map(|(a, b)| a - b).collect())
    };

    // Grid start.
    let mut best = (f64::INFINITY, 0.0);
    for &g in &NBAR_GRID {
        let ss = sum_sq(&residuals(g.ln(), scale0)?);
        if ss < best.0 {
            best = (ss, g.ln());
        }
    }

    let k = if opts.free_rabi { 2 } else { 1 };
    let mut params = vec![best.1, scale0];
    let mut r = residuals(params[0], params[1])?;
    let mut cost = sum_sq(&r);
    let mut mu = 1e-3;
    let jacobian = |p: &[f64]| -> Result<DMatrix<f64>> {
        let mut j = DMatrix::zeros(n, k);
        for c in 0..k {
            let h = if c == 0 { 1e-6 } else { 1e-6 * p[1].abs() };
            let mut up = p.to_vec();
            let mut dn = p.to_vec();
            up[c] += h;
            dn[c] -= h;
            let ru = residuals(up[0], up[1])?;
            let rd = residuals(dn[0], dn[1])?;
            for i in 0..n {
                j[(i, c)] = (ru[i] - rd[i]) / (2.0 * h);
            }
        }
        Ok(j)
    };

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        iterations += 1;
        let j = jacobian(&params)?;
        let jt = j.transpose();
        let jtj = &jt * &j;
        let g = &jt * DVector::from_column_slice(&r);
        if g.amax() < 1e-15 {
            converged = true;
            break;
        }
        let mut accepted = false;
        for _ in 0..30 {
            let mut a = jtj.clone();
            for d in 0..k {
                a[(d, d)] += mu * jtj[(d, d)].max(1e-12);
            }
            let Some(step) = a.clone().cholesky().map(|c| c.solve(&(-&g))) else {
                mu *= 10.0;
                continue;
            };
            let mut trial = params.clone();
            for d in 0..k {
                trial[d] += step[d];
            }
            // Keep n̄ within [1e-8, 1e3].
            trial[0] = trial[0].clamp(-18.0, 7.0);
            if opts.free_rabi && !(trial[1] > 0.0) {
                mu *= 10.0;
                continue;
            }
            let rt = residuals(trial[0], trial[1])?;
            let ct = sum_sq(&rt);
            if ct <= cost {
                let small = step.amax() < 1e-12 || (cost - ct) <= 1e-15 * cost.max(1e-300);
                params = trial;
                r = rt;
                cost = ct;
                mu = (mu * 0.3).max(1e-12);
                accepted = true;
                if small {
                    converged = true;
                }
                break;
            }
            mu *= 10.0;
        }
        if converged || !accepted {
            converged = true;
            break;
        }
    }
    if !converged || !cost.is_finite() {
        return Err(Error::FitFailed(format!("no convergence after {iterations} iterations")));
    }

    // 1σ errors from the Jacobian at the optimum.
    let j = jacobian(&params)?;
    let dof = (n - k).max(1) as f64;
    let s2 = cost / dof;
    let cov = (j.transpose() * &j)
        .try_inverse()
        .ok_or_else(|| Error::FitFailed("singular Jacobian at the optimum".into()))?
        * s2;
    let nbar = params[0].exp();
    Ok(NbarFit {
        nbar,
        nbar_err: nbar * cov[(0, 0)].max(0.0).sqrt(),
        rabi_scale: params[1],
        rabi_scale_err: if opts.free_rabi { cov[(1, 1)].max(0.0).sqrt() } else { 0.0 },
        residual_rms: (cost / n as f64).sqrt(),
        iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatingPoint {
    pub wait_s: f64,
    pub nbar: f64,
    pub nbar_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatingFit {
    /// Phonons per second.
    pub rate: f64,
    pub rate_err: f64,
    pub intercept: f64,
    pub intercept_err: f64,
    pub residuals: Vec<f64>,
}

/// Weighted straight-line fit n̄(t) = n̄₀ + ṅ·t with weights 1/σ².
pub fn fit_heating_rate(series: &[HeatingPoint]) -> Result<HeatingFit> {
    if series.len() < 3 {
        return Err(Error::InvalidParameter(format!("need at least 3 points, got {}", series.len())));
    }
    if series.iter().any(|p| !(p.nbar_err > 0.0) || !p.wait_s.is_finite() || !p.nbar.is_finite()) {
        return Err(Error::InvalidParameter("every point needs finite values and σ > 0".into()));
    }
    let (mut s, mut st, mut stt, mut sy, mut sty) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for p in series {
        let w = 1.0 / (p.nbar_err * p.nbar_err);
        s += w;
        st += w * p.wait_s;
        stt += w * p.wait_s * p.wait_s;
        sy += w * p.nbar;
        sty += w * p.wait_s * p.nbar;
    }
    let normal = Matrix2::new(s, st, st, stt);
    let t_mean = st / s;
    let spread: f64 = series
        .iter()
        .map(|p| (p.wait_s - t_mean).powi(2) / (p.nbar_err * p.nbar_err))
        .sum();
    if spread <= 1e-12 * stt.max(f64::MIN_POSITIVE) {
        return Err(Error::Degenerate("all wait times are equal".into()));
    }
    let cov = normal.try_inverse().ok_or_else(|| Error::Degenerate("singular normal equations".into()))?;
    let beta = cov * Vector2::new(sy, sty);
    let residuals = series.iter().map(|p| p.nbar - beta[0] - beta[1] * p.wait_s).collect();
    Ok(HeatingFit {
        rate: beta[1],
        rate_err: cov[(1, 1)].sqrt(),
        intercept: beta[0],
        intercept_err: cov[(0, 0)].sqrt(),
        residuals,
    })
}

/// Heating fit together with the field noise it implies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatingResult {
    pub fit: HeatingFit,
    pub omega: f64,
    /// V²m⁻²Hz⁻¹.
    pub noise_psd: f64,
    pub noise_psd_err: f64,
}

impl HeatingResult {
    pub fn new(fit: HeatingFit, omega: f64, ion: &IonSpecies) -> Result<Self> {
        let noise_psd = heating_to_noise(fit.rate.max(0.0), omega, ion)?;
        let noise_psd_err = heating_to_noise(fit.rate_err, omega, ion)?;
        Ok(Self {
            fit,
            omega,
            noise_psd,
            noise_psd_err,
        })
    }
}

/// Electric-field noise spectral density behind a heating rate:
/// S_E = 4mħωṅ/q².
pub fn heating_to_noise(rate: f64, omega: f64, ion: &IonSpecies) -> Result<f64> {
    if !(rate >= 0.0) || !(omega > 0.0) {
        return Err(Error::InvalidParameter("need ṅ ≥ 0 and ω > 0".into()));
    }
    Ok(4.0 * ion.mass * HBAR * omega * rate / (ion.charge * ion.charge))
}

/// Inverse of [`heating_to_noise`].
pub fn noise_to_heating(psd: f64, omega: f64, ion: &IonSpecies) -> Result<f64> {
    if !(psd >= 0.0) || !(omega > 0.0) {
        return Err(Error::InvalidParameter("need S_E ≥ 0 and ω > 0".into()));
    }
    Ok(psd * ion.charge * ion.charge / (4.0 * ion.mass * HBAR * omega))
}

/// One row of the measured heating-rate table: trap number, rate and its
/// uncertainty (phonons/s), axial frequency (Hz).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapHeating {
    pub trap: u32,
    pub rate: f64,
    pub rate_err: f64,
    pub axial_hz: f64,
}

pub const HEATING_TABLE: [TrapHeating; 6] = [
    TrapHeating { trap: 1, rate: 0.6, rate_err: 0.2, axial_hz: 1.069e6 },
    TrapHeating { trap: 2, rate: 3.3, rate_err: 0.2, axial_hz: 1.059e6 },
    TrapHeating { trap: 3, rate: 0.96, rate_err: 0.07, axial_hz: 1.069e6 },
    TrapHeating { trap: 4, rate: 0.95, rate_err: 0.07, axial_hz: 1.045e6 },
    TrapHeating { trap: 5, rate: 0.33, rate_err: 0.04, axial_hz: 1.066e6 },
    TrapHeating { trap: 6, rate: 21.5, rate_err: 0.8, axial_hz: 1.073e6 },
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseRow {
    pub trap: u32,
    pub rate: f64,
    pub rate_err: f64,
    pub axial_hz: f64,
    pub noise_psd: f64,
    pub noise_psd_err: f64,
}

/// Field noise for each row, using that row's own axial frequency.
pub fn noise_table(rows: &[TrapHeating], ion: &IonSpecies) -> Result<Vec<NoiseRow>> {
    rows.iter()
        .map(|r| {
            let w = angular(r.axial_hz);
            Ok(NoiseRow {
                trap: r.trap,
                rate: r.rate,
                rate_err: r.rate_err,
                axial_hz: r.axial_hz,
                noise_psd: heating_to_noise(r.rate, w, ion)?,
                noise_psd_err: heating_to_noise(r.rate_err, w, ion)?,
            })
        })
        .collect()
}

/// Measurement noise for synthetic data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    /// Quantum projection noise from a finite number of shots.
    Binomial { shots: u64 },
    /// Additive Gaussian noise, clipped to [0, 1].
    Gaussian { sigma: f64 },
}

/// Noisy copy of `signal` drawn from `rng`.
pub fn add_noise<R: Rng + ?Sized>(signal: &SidebandSignal, noise: &NoiseModel, rng: &mut R) -> Result<SidebandSignal> {
    let probabilities = match *noise {
        NoiseModel::Binomial { shots } => {
            if shots == 0 {
                return Err(Error::InvalidParameter("shot count must be positive".into()));
            }
            signal
                .probabilities
                .iter()
                .map(|&p| {
                    let b = Binomial::new(shots, p.clamp(0.0, 1.0)).expect("probability in [0, 1]");
                    b.sample(rng) as f64 / shots as f64
                })
                .collect()
        }
        NoiseModel::Gaussian { sigma } => {
            let normal = Normal::new(0.0, sigma)
                .map_err(|_| Error::InvalidParameter(format!("noise σ must be non-negative, got {sigma}")))?;
            signal
                .probabilities
                .iter()
                .map(|&p| (p + normal.sample(rng)).clamp(0.0, 1.0))
                .collect()
        }
    };
    Ok(SidebandSignal {
        probabilities,
        ..signal.clone()
    })
}

/// Heating series along n̄₀ + ṅ·t with Gaussian noise of standard deviation
/// `sigma` on each point (σ = 0 gives exact data).
pub fn synthetic_heating_series<R: Rng + ?Sized>(
    intercept: f64,
    rate: f64,
    waits: &[f64],
    sigma: f64,
    rng: &mut R,
) -> Result<Vec<HeatingPoint>> {
    if !(sigma >= 0.0) {
        return Err(Error::InvalidParameter(format!("noise σ must be non-negative, got {sigma}")));
    }
    let normal = Normal::new(0.0, sigma).expect("σ checked");
    // Exact data still carry a nominal error bar so they can be weighted.
    let reported = if sigma > 0.0 { sigma } else { 1.0 };
    Ok(waits
        .iter()
        .map(|&t| HeatingPoint {
            wait_s: t,
            nbar: intercept + rate * t + if sigma > 0.0 { normal.sample(rng) } else { 0.0 },
            nbar_err: reported,
        })
        .collect())
}

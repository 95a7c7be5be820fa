//! From orbit periods to an effective symmetric potential well and back.
//!
//! For an even well `u(Q)` with `u(0) = 0` the half-period at energy `H` is
//!
//! ```text
//! T(H)/2 = 2 ∫_0^H du (dQ/du) / sqrt(2(H − u))
//! ```
//!
//! and the Abel inversion recovers the half-width
//! `Q(u) = (1/2π) ∫_0^u T(H) dH / sqrt(2(u − H))`. Both square-root endpoints
//! are removed by the substitutions `H = u sin²φ` and `u = H sin²φ`.

use std::f64::consts::{FRAC_PI_2, SQRT_2, TAU};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp::Pchip;
use crate::phasespace::{ActionHamiltonian, ClassicalSystem, SpectralAction};
use crate::quadrature::Rule;
use crate::spectrum::EnergySpectrum;

const SUBINTERVAL_NODES: usize = 8;
const CALLABLE_PANELS: usize = 16;
const CALLABLE_NODES: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PeriodSource {
    ClosedForm,
    Spectrum { hash: String },
    Tabulated,
}

/// `T(H)` on `[0, h_max]`: evaluated directly for closed-form systems,
/// otherwise interpolated monotonically through the samples.
#[derive(Debug, Clone)]
pub struct PeriodFunction {
    pub omega: f64,
    pub samples: Vec<(f64, f64)>,
    pub source: PeriodSource,
    pub h_max: f64,
    interp: Pchip,
    exact: Option<Arc<dyn ActionHamiltonian>>,
}

/// Energies `0`, a logarithmic run up to `h_max/50`, then a uniform run.
pub fn energy_grid(h_max: f64, uniform: usize) -> Vec<f64> {
    let mut grid = vec![0.0];
    let (lo, hi) = (1e-6 * h_max, 0.02 * h_max);
    let logs = 40;
    for k in 0..logs {
        grid.push(lo * (hi / lo).powf(k as f64 / logs as f64));
    }
    let uniform = uniform.max(2);
    for k in 0..=uniform {
        grid.push(hi + (h_max - hi) * k as f64 / uniform as f64);
    }
    grid
}

impl PeriodFunction {
    pub fn new(omega: f64, samples: Vec<(f64, f64)>, source: PeriodSource) -> Result<Self> {
        if !(omega > 0.0) {
            return Err(Error::InvalidParams("omega must be positive".into()));
        }
        if samples.len() < 2 || samples[0].0 != 0.0 {
            return Err(Error::DegenerateGrid("period samples must start at H = 0 and have ≥ 2 points".into()));
        }
        if let Some(&(h, t)) = samples.iter().find(|(h, t)| !(h.is_finite() && t.is_finite() && *t > 0.0)) {
            return Err(Error::InvalidParams(format!("period T({h}) = {t} must be finite and positive")));
        }
        let (h, t): (Vec<f64>, Vec<f64>) = samples.iter().copied().unzip();
        let interp = Pchip::new(h, t)?;
        let h_max = samples.last().unwrap().0;
        Ok(Self { omega, samples, source, h_max, interp, exact: None })
    }

    /// `T = 2π/(ωH′(y(H)))` from a classical system.
    pub fn from_system(system: &ClassicalSystem, h_max: f64, uniform: usize) -> Result<Self> {
        let mut out =
            Self::from_hamiltonian(system.omega, system.hamiltonian.as_ref(), h_max, uniform, PeriodSource::ClosedForm)?;
        out.exact = Some(Arc::clone(&system.hamiltonian));
        Ok(out)
    }

    /// Periods from the monotone interpolation of `(n + ½)ħω ↦ E_n`.
    pub fn from_spectrum(spectrum: &EnergySpectrum, h_max: f64, uniform: usize) -> Result<Self> {
        let action = SpectralAction::from_spectrum(spectrum)?;
        if h_max > action.max_energy() {
            return Err(Error::OutOfRange { value: h_max, min: 0.0, max: action.max_energy() });
        }
        let source = PeriodSource::Spectrum { hash: spectrum.content_hash() };
        Self::from_hamiltonian(spectrum.params.omega, &action, h_max, uniform, source)
    }

    fn from_hamiltonian(
        omega: f64,
        ham: &dyn ActionHamiltonian,
        h_max: f64,
        uniform: usize,
        source: PeriodSource,
    ) -> Result<Self> {
        if !(h_max.is_finite() && h_max > 0.0) {
            return Err(Error::InvalidParams(format!("h_max must be positive, got {h_max}")));
        }
        let samples = energy_grid(h_max, uniform)
            .into_iter()
            .map(|h| Ok((h, period_of(omega, ham, h)?)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(omega, samples, source)
    }

    /// Constant period, the isochronous case.
    pub fn constant(omega: f64, period: f64, h_max: f64) -> Result<Self> {
        let samples = energy_grid(h_max, 16).into_iter().map(|h| (h, period)).collect();
        Self::new(omega, samples, PeriodSource::Tabulated)
    }

    pub fn period(&self, energy: f64) -> Result<f64> {
        if !(0.0..=self.h_max).contains(&energy) {
            return Err(Error::OutOfRange { value: energy, min: 0.0, max: self.h_max });
        }
        self.value(energy)
    }

    fn value(&self, energy: f64) -> Result<f64> {
        match &self.exact {
            Some(ham) => period_of(self.omega, ham.as_ref(), energy),
            None => Ok(self.interp.value(energy)),
        }
    }

    fn knots(&self) -> &[f64] {
        self.interp.knots()
    }

    /// `Q(u) = (√(2u)/2π) ∫_0^{π/2} T(u sin²φ) sin φ dφ`.
    pub fn abel_half_width(&self, u: f64) -> Result<f64> {
        if u == 0.0 {
            return Ok(0.0);
        }
        if !(u > 0.0 && u <= self.h_max) {
            return Err(Error::OutOfRange { value: u, min: 0.0, max: self.h_max });
        }
        let breaks = knot_images(self.knots().iter().copied(), u);
        let rule = Rule::new(SUBINTERVAL_NODES);
        let mut failure = None;
        let integral = rule.over_breaks(&breaks, |phi| {
            let s = phi.sin();
            match self.value(u * s * s) {
                Ok(t) => t * s,
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            }
        });
        match failure {
            Some(e) => Err(e),
            None => Ok((2.0 * u).sqrt() / TAU * integral),
        }
    }
}

fn period_of(omega: f64, ham: &dyn ActionHamiltonian, energy: f64) -> Result<f64> {
    Ok(TAU / (omega * ham.slope(ham.action(energy)?)))
}

/// `[0, asin(√(k₁/top)), …, π/2]` over the interior knots `0 < k < top`,
/// where `k` are energies (or squared radii) and the variable is `top·sin²φ`.
fn knot_images(knots: impl Iterator<Item = f64>, top: f64) -> Vec<f64> {
    let mut breaks = vec![0.0];
    for k in knots {
        if k > 0.0 && k < top {
            breaks.push((k / top).sqrt().asin());
        }
    }
    breaks.push(FRAC_PI_2);
    breaks
}

/// A symmetric potential well on `Q ≥ 0` with `u(0) = 0`.
pub trait Well {
    fn potential(&self, q: f64) -> Result<f64>;

    /// `Q_t` with `u(Q_t) = H`.
    fn turning_point(&self, energy: f64) -> Result<f64>;

    /// `T(H)/2`.
    fn half_period(&self, energy: f64) -> Result<f64>;

    /// `τ(Q) = ∫_0^Q dQ′/sqrt(2(H − u(Q′)))` for `0 ≤ Q ≤ Q_t`.
    fn tau(&self, energy: f64, q: f64) -> Result<f64>;
}

/// A well given by a closed-form potential.
pub struct CallableWell {
    u: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for CallableWell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("CallableWell")
    }
}

impl CallableWell {
    pub fn new(u: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { u: Arc::new(u) }
    }

    fn check_energy(&self, energy: f64) -> Result<()> {
        if !(energy.is_finite() && energy > 0.0) {
            return Err(Error::OutOfRange { value: energy, min: 0.0, max: f64::INFINITY });
        }
        Ok(())
    }

    /// `∫_0^{φ_end} Q_t cos φ dφ / sqrt(2(H − u(Q_t sin φ)))`.
    fn integral(&self, energy: f64, qt: f64, phi_end: f64) -> f64 {
        let rule = Rule::new(CALLABLE_NODES);
        rule.composite(0.0, phi_end, CALLABLE_PANELS, |phi| {
            let gap = energy - (self.u)(qt * phi.sin());
            qt * phi.cos() / (2.0 * gap.max(0.0)).sqrt()
        })
    }
}

impl Well for CallableWell {
    fn potential(&self, q: f64) -> Result<f64> {
        Ok((self.u)(q.abs()))
    }

    fn turning_point(&self, energy: f64) -> Result<f64> {
        self.check_energy(energy)?;
        let mut hi = 1.0f64;
        while (self.u)(hi) < energy {
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(Error::OutOfRange { value: energy, min: 0.0, max: f64::INFINITY });
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if (self.u)(mid) < energy {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    fn half_period(&self, energy: f64) -> Result<f64> {
        let qt = self.turning_point(energy)?;
        Ok(2.0 * self.integral(energy, qt, FRAC_PI_2))
    }

    fn tau(&self, energy: f64, q: f64) -> Result<f64> {
        let qt = self.turning_point(energy)?;
        if !(0.0..=qt).contains(&q) {
            return Err(Error::Forbidden { q, energy });
        }
        Ok(self.integral(energy, qt, (q / qt).min(1.0).asin()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundTripPoint {
    pub h: f64,
    pub input_period: f64,
    pub table_period: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableProvenance {
    pub source: PeriodSource,
    pub omega: f64,
    pub h_max: f64,
    pub period_samples: usize,
    pub tol: f64,
    pub roundtrip: Vec<RoundTripPoint>,
    pub max_roundtrip_error: f64,
}

/// Tabulated well `(Q_j, u_j)`, interpolated as `Q(s)` with `s = √u`.
#[derive(Debug, Clone)]
pub struct PotentialTable {
    pub q: Vec<f64>,
    pub u: Vec<f64>,
    pub provenance: Option<TableProvenance>,
    q_of_s: Pchip,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    #[serde(rename = "Q")]
    pub q: f64,
    pub u: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableJson {
    pub provenance: Option<TableProvenance>,
    #[serde(rename = "Q")]
    pub q: Vec<f64>,
    pub u: Vec<f64>,
}

impl PotentialTable {
    /// Table from samples with `u(0) = 0` and both columns strictly
    /// increasing.
    pub fn from_samples(q: Vec<f64>, u: Vec<f64>) -> Result<Self> {
        Self::build(q, u, None, None)
    }

    fn build(q: Vec<f64>, u: Vec<f64>, start_slope: Option<f64>, provenance: Option<TableProvenance>) -> Result<Self> {
        if q.len() != u.len() || q.len() < 2 {
            return Err(Error::DegenerateGrid("potential table needs ≥ 2 matching rows".into()));
        }
        if q[0] != 0.0 || u[0] != 0.0 {
            return Err(Error::InvalidParams("potential table must start at (0, 0)".into()));
        }
        if q.iter().chain(&u).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("potential table".into()));
        }
        if q.windows(2).any(|w| w[1] <= w[0]) || u.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::NonMonotone("potential table must increase strictly".into()));
        }
        let s: Vec<f64> = u.iter().map(|v| v.sqrt()).collect();
        let q_of_s = Pchip::with_start_slope(s, q.clone(), start_slope)?;
        Ok(Self { q, u, provenance, q_of_s })
    }

    pub fn u_max(&self) -> f64 {
        *self.u.last().unwrap()
    }

    pub fn rows(&self) -> Vec<TableRow> {
        self.q.iter().zip(&self.u).map(|(&q, &u)| TableRow { q, u }).collect()
    }

    pub fn to_json(&self) -> TableJson {
        TableJson { provenance: self.provenance.clone(), q: self.q.clone(), u: self.u.clone() }
    }

    fn check_energy(&self, energy: f64) -> Result<()> {
        if !(energy > 0.0 && energy <= self.u_max()) {
            return Err(Error::OutOfRange { value: energy, min: 0.0, max: self.u_max() });
        }
        Ok(())
    }

    /// `(1/√2) ∫_0^{φ_end} Q′(√H sin φ) dφ`.
    fn integral(&self, energy: f64, phi_end: f64) -> f64 {
        let root = energy.sqrt();
        let mut breaks: Vec<f64> = knot_images(self.u.iter().copied(), energy)
            .into_iter()
            .filter(|&phi| phi < phi_end)
            .collect();
        breaks.push(phi_end);
        let rule = Rule::new(SUBINTERVAL_NODES);
        rule.over_breaks(&breaks, |phi| self.q_of_s.derivative(root * phi.sin())) / SQRT_2
    }
}

impl Well for PotentialTable {
    fn potential(&self, q: f64) -> Result<f64> {
        let s = self.q_of_s.inverse(q.abs())?;
        Ok(s * s)
    }

    fn turning_point(&self, energy: f64) -> Result<f64> {
        self.check_energy(energy)?;
        Ok(self.q_of_s.value(energy.sqrt()))
    }

    fn half_period(&self, energy: f64) -> Result<f64> {
        self.check_energy(energy)?;
        Ok(2.0 * self.integral(energy, FRAC_PI_2))
    }

    fn tau(&self, energy: f64, q: f64) -> Result<f64> {
        let qt = self.turning_point(energy)?;
        if !(0.0..=qt).contains(&q) {
            return Err(Error::Forbidden { q, energy });
        }
        if q == qt {
            return Ok(self.integral(energy, FRAC_PI_2));
        }
        let s = self.q_of_s.inverse(q)?;
        Ok(self.integral(energy, (s / energy.sqrt()).min(1.0).asin()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InversionOptions {
    /// Rows in the table, uniform in `√u`.
    pub q_points: usize,
    /// Top of the table; defaults to the period function's `h_max`.
    pub u_max: Option<f64>,
    pub roundtrip_tol: f64,
    pub roundtrip_points: usize,
}

impl Default for InversionOptions {
    fn default() -> Self {
        Self { q_points: 1500, u_max: None, roundtrip_tol: 1e-4, roundtrip_points: 31 }
    }
}

/// Abel inversion of `T(H)` followed by the round-trip check on
/// `[0.05, 0.95]·u_max`.
pub fn invert_periods(periods: &PeriodFunction, opts: &InversionOptions) -> Result<PotentialTable> {
    let u_max = opts.u_max.unwrap_or(periods.h_max);
    if !(u_max > 0.0 && u_max <= periods.h_max) {
        return Err(Error::OutOfRange { value: u_max, min: 0.0, max: periods.h_max });
    }
    if opts.q_points < 3 || opts.roundtrip_points < 1 || !(opts.roundtrip_tol > 0.0) {
        return Err(Error::DegenerateGrid(format!("bad inversion options {opts:?}")));
    }
    let root = u_max.sqrt();
    let n = opts.q_points;
    let mut q = Vec::with_capacity(n);
    let mut u = Vec::with_capacity(n);
    for j in 0..n {
        let s = root * j as f64 / (n - 1) as f64;
        let uj = if j + 1 == n { u_max } else { s * s };
        let qj = periods.abel_half_width(uj)?;
        if !(qj.is_finite() && qj >= 0.0) {
            return Err(Error::NonFinite(format!("inverted half-width at u = {uj}")));
        }
        q.push(qj);
        u.push(uj);
    }
    // dQ/ds at s = 0 is √2·T(0)/2π
    let start = SQRT_2 * periods.period(0.0)? / TAU;
    let mut table = PotentialTable::build(q, u, Some(start), None)?;

    let mut roundtrip = Vec::with_capacity(opts.roundtrip_points);
    let mut worst = (0.0, 0.0);
    for k in 0..opts.roundtrip_points {
        let frac = if opts.roundtrip_points == 1 { 0.5 } else { k as f64 / (opts.roundtrip_points - 1) as f64 };
        let h = (0.05 + 0.9 * frac) * u_max;
        let input_period = periods.period(h)?;
        let table_period = 2.0 * table.half_period(h)?;
        let relative_error = (table_period - input_period).abs() / input_period;
        if relative_error >= worst.1 {
            worst = (h, relative_error);
        }
        roundtrip.push(RoundTripPoint { h, input_period, table_period, relative_error });
    }
    if worst.1 > opts.roundtrip_tol {
        return Err(Error::RoundTrip { worst_h: worst.0, residual: worst.1, tol: opts.roundtrip_tol });
    }
    table.provenance = Some(TableProvenance {
        source: periods.source.clone(),
        omega: periods.omega,
        h_max: periods.h_max,
        period_samples: periods.samples.len(),
        tol: opts.roundtrip_tol,
        roundtrip,
        max_roundtrip_error: worst.1,
    });
    Ok(table)
}

/// `τ(Q_j; H)` on a grid inside the turning point.
pub fn tau_chart(well: &dyn Well, energy: f64, grid: &[f64]) -> Result<Vec<f64>> {
    grid.iter().map(|&q| well.tau(energy, q)).collect()
}

/// `|P| = sqrt(2(H − u(Q)))`.
pub fn momentum_from_energy(well: &dyn Well, energy: f64, q: f64) -> Result<f64> {
    let gap = energy - well.potential(q)?;
    if gap < -1e-12 * energy.abs().max(1.0) {
        return Err(Error::Forbidden { q, energy });
    }
    Ok((2.0 * gap.max(0.0)).sqrt())
}

/// Quarter-period branches of `τ` along one orbit, starting at `Q = 0`
/// moving outward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TauBranch {
    /// `Q ≥ 0`, `P ≥ 0`: `τ ∈ [0, T/4]`.
    Outbound,
    /// `Q ≥ 0`, `P < 0`: `τ ∈ [T/4, T/2]`.
    Returning,
    /// `Q < 0`, `P < 0`: `τ ∈ [T/2, 3T/4]`.
    OutboundNegative,
    /// `Q < 0`, `P ≥ 0`: `τ ∈ [3T/4, T]`.
    ReturningNegative,
}

impl TauBranch {
    pub const ALL: [TauBranch; 4] =
        [TauBranch::Outbound, TauBranch::Returning, TauBranch::OutboundNegative, TauBranch::ReturningNegative];

    pub fn of(q: f64, p: f64) -> Self {
        match (q >= 0.0, p >= 0.0) {
            (true, true) => TauBranch::Outbound,
            (true, false) => TauBranch::Returning,
            (false, false) => TauBranch::OutboundNegative,
            (false, true) => TauBranch::ReturningNegative,
        }
    }
}

/// `τ` on a given branch, lifted by `winding` full periods.
pub fn tau_on_branch(well: &dyn Well, energy: f64, q: f64, branch: TauBranch, winding: i64) -> Result<f64> {
    let quarter = 0.5 * well.half_period(energy)?;
    let base = well.tau(energy, q.abs())?;
    let local = match branch {
        TauBranch::Outbound => base,
        TauBranch::Returning => 2.0 * quarter - base,
        TauBranch::OutboundNegative => 2.0 * quarter + base,
        TauBranch::ReturningNegative => 4.0 * quarter - base,
    };
    Ok(local + 4.0 * quarter * winding as f64)
}

/// Every `τ` in `[0, T)` compatible with position `Q` on the orbit of
/// energy `H`.
pub fn tau_branches(well: &dyn Well, energy: f64, q: f64) -> Result<Vec<(TauBranch, f64)>> {
    let branches: &[TauBranch] = if q >= 0.0 {
        &[TauBranch::Outbound, TauBranch::Returning]
    } else {
        &[TauBranch::OutboundNegative, TauBranch::ReturningNegative]
    };
    branches.iter().map(|&b| Ok((b, tau_on_branch(well, energy, q, b, 0)?))).collect()
}

/// `T(H)/2` of any well.
pub fn period_from_potential(well: &dyn Well, energy: f64) -> Result<f64> {
    well.half_period(energy)
}

//! Classical flow of `H(y)`, `y = (p² + ω²q²)/2`, in three conjugate charts.
//!
//! Orbits are circles in `(q, p/ω)` traversed at the amplitude-dependent
//! frequency `Ω = ωH′(y)`:
//!
//! ```text
//! q = R cos(Θ + ωH′t),   p = −ωR sin(Θ + ωH′t)
//! ```
//!
//! so the angle is `Θ = atan2(−p, ωq)` and increases along the flow. `Θ` lives
//! on the covering space and is never reduced modulo 2π once a point is in the
//! `(R, Θ)` chart. The third chart is `(H, τ)` with `τ = Θ/(ωH′)`, in which the
//! flow is `τ → τ + t`.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp::Pchip;
use crate::spectrum::{EnergySpectrum, ModelKind, ModelParams};

/// A monotone classical Hamiltonian of the action-energy `y`.
pub trait ActionHamiltonian: fmt::Debug + Send + Sync {
    fn energy(&self, y: f64) -> f64;

    /// `H′(y)`; must be positive.
    fn slope(&self, y: f64) -> f64;

    /// Inverse of [`ActionHamiltonian::energy`].
    fn action(&self, energy: f64) -> Result<f64> {
        if !(energy.is_finite() && energy >= self.energy(0.0)) {
            return Err(Error::OutOfRange { value: energy, min: self.energy(0.0), max: f64::INFINITY });
        }
        let mut hi = 1.0f64;
        while self.energy(hi) < energy {
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(Error::NonFinite("action bracket".into()));
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.energy(mid) < energy {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// `H(y) = y + λy²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticAction {
    pub lambda: f64,
}

impl ActionHamiltonian for QuadraticAction {
    fn energy(&self, y: f64) -> f64 {
        y + self.lambda * y * y
    }

    fn slope(&self, y: f64) -> f64 {
        1.0 + 2.0 * self.lambda * y
    }

    fn action(&self, energy: f64) -> Result<f64> {
        if !(energy.is_finite() && energy >= 0.0) {
            return Err(Error::OutOfRange { value: energy, min: 0.0, max: f64::INFINITY });
        }
        // cancellation-free root of λy² + y − H = 0
        Ok(2.0 * energy / (1.0 + (1.0 + 4.0 * self.lambda * energy).sqrt()))
    }
}

/// `H(y)` read off a spectrum by identifying `y = (n + ½)ħω` with `E_n`.
///
/// Monotone cubic interpolation through `(0, 0)` and the trusted levels, with
/// the small-amplitude slope pinned to 1.
#[derive(Debug, Clone)]
pub struct SpectralAction {
    interp: Pchip,
}

impl SpectralAction {
    pub fn from_spectrum(spectrum: &EnergySpectrum) -> Result<Self> {
        let levels = spectrum.trusted();
        if levels.len() < 2 {
            return Err(Error::InsufficientLevels { needed: 2, available: levels.len() });
        }
        let quantum = spectrum.params.quantum();
        let mut y = vec![0.0];
        let mut e = vec![0.0];
        for (n, &level) in levels.iter().enumerate() {
            y.push((n as f64 + 0.5) * quantum);
            e.push(level);
        }
        if e.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::NonMonotone("levels must increase from 0".into()));
        }
        Ok(Self { interp: Pchip::with_start_slope(y, e, Some(1.0))? })
    }

    /// Largest action covered by the interpolation.
    pub fn max_action(&self) -> f64 {
        self.interp.domain().1
    }

    pub fn max_energy(&self) -> f64 {
        *self.interp.values().last().unwrap()
    }
}

impl ActionHamiltonian for SpectralAction {
    fn energy(&self, y: f64) -> f64 {
        self.interp.value(y)
    }

    fn slope(&self, y: f64) -> f64 {
        self.interp.derivative(y)
    }

    fn action(&self, energy: f64) -> Result<f64> {
        self.interp.inverse(energy)
    }
}

/// The classical system: frequency, action scale and `H(y)`.
#[derive(Debug, Clone)]
pub struct ClassicalSystem {
    pub omega: f64,
    pub hbar: f64,
    pub hamiltonian: Arc<dyn ActionHamiltonian>,
}

impl ClassicalSystem {
    pub fn new(omega: f64, hbar: f64, hamiltonian: Arc<dyn ActionHamiltonian>) -> Result<Self> {
        if !(omega > 0.0 && hbar > 0.0) {
            return Err(Error::InvalidParams("omega and hbar must be positive".into()));
        }
        Ok(Self { omega, hbar, hamiltonian })
    }

    /// Closed-form system; only the diagonal model has one built in.
    pub fn from_params(params: &ModelParams) -> Result<Self> {
        params.validate()?;
        match params.model_kind {
            ModelKind::DiagonalQuadratic => {
                Self::new(params.omega, params.hbar, Arc::new(QuadraticAction { lambda: params.lambda }))
            }
            ModelKind::QuarticPosition => Err(Error::InvalidParams(
                "the quartic model has no closed-form H(y); build the system from its spectrum".into(),
            )),
        }
    }

    /// Closed form for the diagonal model, spectrum interpolation otherwise.
    pub fn from_spectrum(spectrum: &EnergySpectrum) -> Result<Self> {
        match spectrum.params.model_kind {
            ModelKind::DiagonalQuadratic => Self::from_params(&spectrum.params),
            ModelKind::QuarticPosition => Self::new(
                spectrum.params.omega,
                spectrum.params.hbar,
                Arc::new(SpectralAction::from_spectrum(spectrum)?),
            ),
        }
    }

    pub fn hprime(&self, y: f64) -> f64 {
        self.hamiltonian.slope(y)
    }

    /// Orbit angular frequency `ωH′(y)`.
    pub fn frequency(&self, y: f64) -> f64 {
        self.omega * self.hprime(y)
    }

    pub fn period(&self, y: f64) -> f64 {
        TAU / self.frequency(y)
    }

    pub fn point_pq(&self, q: f64, p: f64) -> Result<PhasePoint> {
        finite(&[q, p])?;
        let y = 0.5 * (p * p + self.omega * self.omega * q * q);
        self.point(Chart::PQ, q, p, y)
    }

    pub fn point_r_theta(&self, r: f64, theta: f64) -> Result<PhasePoint> {
        finite(&[r, theta])?;
        if r < 0.0 {
            return Err(Error::InvalidParams(format!("amplitude R must be ≥ 0, got {r}")));
        }
        let y = 0.5 * self.omega * self.omega * r * r;
        self.point(Chart::RTheta, r, theta, y)
    }

    pub fn point_h_tau(&self, energy: f64, tau: f64) -> Result<PhasePoint> {
        finite(&[energy, tau])?;
        let y = self.hamiltonian.action(energy)?;
        self.point(Chart::HTau, energy, tau, y)
    }

    fn point(&self, chart: Chart, first: f64, second: f64, y: f64) -> Result<PhasePoint> {
        let hprime = self.hprime(y);
        if !(hprime > 0.0) {
            return Err(Error::NonMonotone(format!("H′({y}) = {hprime} is not positive")));
        }
        Ok(PhasePoint { chart, first, second, hprime, y, system: self.clone() })
    }
}

fn finite(values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite("phase-space coordinates".into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Chart {
    PQ,
    RTheta,
    HTau,
}

impl FromStr for Chart {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pq" => Ok(Chart::PQ),
            "rtheta" => Ok(Chart::RTheta),
            "htau" => Ok(Chart::HTau),
            other => Err(Error::InvalidParams(format!("unknown chart `{other}`"))),
        }
    }
}

/// A phase-space point. `first`/`second` are `(q, p)`, `(R, Θ)` or `(H, τ)`
/// depending on the chart.
#[derive(Debug, Clone)]
pub struct PhasePoint {
    pub chart: Chart,
    pub first: f64,
    pub second: f64,
    pub hprime: f64,
    y: f64,
    system: ClassicalSystem,
}

impl PhasePoint {
    pub fn system(&self) -> &ClassicalSystem {
        &self.system
    }

    /// Action-energy `y = (p² + ω²q²)/2`.
    pub fn action_energy(&self) -> f64 {
        self.y
    }

    pub fn energy(&self) -> f64 {
        match self.chart {
            Chart::HTau => self.first,
            _ => self.system.hamiltonian.energy(self.y),
        }
    }

    /// Dimensional amplitude `R = sqrt(p² + ω²q²)/ω`.
    pub fn amplitude(&self) -> f64 {
        match self.chart {
            Chart::RTheta => self.first,
            _ => (2.0 * self.y).sqrt() / self.system.omega,
        }
    }

    /// Dimensionless radial label `ρ = R·sqrt(ω/2ħ)`, so `ρ² = y/(ħω)`.
    pub fn rho(&self) -> f64 {
        self.bohr_action().sqrt()
    }

    /// `∮p dq / h` over the orbit through this point, `(p² + ω²q²)/(2ħω)`.
    pub fn bohr_action(&self) -> f64 {
        self.y / (self.system.hbar * self.system.omega)
    }

    pub fn frequency(&self) -> f64 {
        self.system.omega * self.hprime
    }

    /// Angle on the covering space.
    pub fn angle(&self) -> Result<f64> {
        match self.chart {
            Chart::PQ => {
                let (q, p) = (self.first, self.second);
                if q == 0.0 && p == 0.0 {
                    return Err(Error::DegenerateAngle);
                }
                Ok((-p).atan2(self.system.omega * q))
            }
            Chart::RTheta => Ok(self.second),
            Chart::HTau => Ok(self.second * self.frequency()),
        }
    }

    /// `(q, p)` of this point.
    pub fn position_momentum(&self) -> (f64, f64) {
        match self.chart {
            Chart::PQ => (self.first, self.second),
            _ => {
                let r = self.amplitude();
                let theta = self.angle().expect("angle is defined outside the PQ chart");
                (r * theta.cos(), -self.system.omega * r * theta.sin())
            }
        }
    }

    pub fn chart_convert(&self, target: Chart) -> Result<PhasePoint> {
        if target == self.chart {
            return Ok(self.clone());
        }
        match target {
            Chart::PQ => {
                let (q, p) = self.position_momentum();
                self.with(Chart::PQ, q, p)
            }
            Chart::RTheta => {
                let theta = self.angle()?;
                self.with(Chart::RTheta, self.amplitude(), theta)
            }
            Chart::HTau => {
                let theta = self.angle()?;
                self.with(Chart::HTau, self.energy(), theta / self.frequency())
            }
        }
    }

    fn with(&self, chart: Chart, first: f64, second: f64) -> Result<PhasePoint> {
        Ok(PhasePoint { chart, first, second, ..self.clone() })
    }

    /// Closed-form flow for a time `t`; `y` and `H′` are constants of motion.
    pub fn classical_evolve(&self, t: f64) -> PhasePoint {
        let mut out = self.clone();
        match self.chart {
            Chart::RTheta => out.second = self.second + self.frequency() * t,
            Chart::HTau => out.second = self.second + t,
            Chart::PQ => {
                if let Ok(theta) = self.angle() {
                    let phase = theta + self.frequency() * t;
                    let r = self.amplitude();
                    out.first = r * phase.cos();
                    out.second = -self.system.omega * r * phase.sin();
                }
            }
        }
        out
    }
}

/// One row of a sampled trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub q: f64,
    pub p: f64,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "Theta_unwrapped")]
    pub theta_unwrapped: f64,
    #[serde(rename = "H")]
    pub h: f64,
    pub tau: f64,
}

/// Samples `steps + 1` equally spaced times in `[0, t_end]`.
pub fn sample_trajectory(start: &PhasePoint, t_end: f64, steps: usize) -> Result<Vec<TrajectorySample>> {
    if steps == 0 || !t_end.is_finite() {
        return Err(Error::DegenerateGrid("trajectory needs ≥ 1 step and a finite end time".into()));
    }
    let origin = start.chart_convert(Chart::RTheta)?;
    let energy = start.energy();
    let frequency = start.frequency();
    Ok((0..=steps)
        .map(|k| {
            let t = t_end * k as f64 / steps as f64;
            let pt = origin.classical_evolve(t);
            let (q, p) = pt.position_momentum();
            TrajectorySample {
                t,
                q,
                p,
                r: pt.first,
                theta_unwrapped: pt.second,
                h: energy,
                tau: pt.second / frequency,
            }
        })
        .collect())
}

//! Resolution of identity with the classical measure `dρ² dΘ/2π`.
//!
//! The angular average runs over `N` windows of length 2π (Cesàro length `N`):
//!
//! ```text
//! M(N) = (1/N) ∫_{−πN}^{πN} dΘ/2π |ρ,Θ)(ρ,Θ|
//! ```
//!
//! Diagonal entries are the Poisson weights for every `N`; an off-diagonal
//! entry oscillates at `ν = (E_m − E_n)/(ħωH′)` and is suppressed like
//! `sin(πνN)/(πνN)`. Integrating the diagonal against `dρ²` then gives 1.

use std::f64::consts::{PI, TAU};

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::coherent::{log_poisson_weights, state_hprime};
use crate::error::{Error, Result};
use crate::quadrature::{Neumaier, Rule};
use crate::spectrum::{EnergySpectrum, ModelParams};

const PANEL_NODES: usize = 16;

/// Largest denominator tried when looking for rational frequency ratios.
pub const COMMENSURATE_MAX_DENOM: u32 = 8;
pub const COMMENSURATE_TOL: f64 = 1e-9;

/// Agreement required between the plan and its half-resolution twin.
pub const HALVING_TOL: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CesaroPlan {
    /// Number of 2π windows, `N`.
    pub n_periods: usize,
    /// Gauss–Legendre nodes per 2π window.
    pub theta_nodes: usize,
}

impl CesaroPlan {
    /// Plan with two panels per oscillation of the fastest phase among
    /// levels `0..dim`.
    pub fn resolving(spectrum: &EnergySpectrum, rho: f64, dim: usize, n_periods: usize) -> Result<Self> {
        let hprime = state_hprime(spectrum, rho)?;
        let levels = spectrum.require(dim)?;
        let nu_max = (levels[dim - 1] - levels[0]) / (spectrum.params.quantum() * hprime);
        let panels = 2 * (nu_max.ceil() as usize).max(1);
        Ok(Self { n_periods, theta_nodes: panels * PANEL_NODES })
    }

    pub fn window(&self) -> (f64, f64) {
        let half = PI * self.n_periods as f64;
        (-half, half)
    }

    /// Panels per window, rounded up to an even count.
    pub fn panels(&self) -> usize {
        let p = self.theta_nodes.div_ceil(PANEL_NODES).max(2);
        p + p % 2
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.n_periods < 1 {
            return Err(Error::DegenerateGrid("Cesàro length must be ≥ 1".into()));
        }
        let need = 8 * dim.saturating_sub(1);
        if self.theta_nodes < need {
            return Err(Error::DegenerateGrid(format!(
                "{} nodes per window cannot resolve level {}; need ≥ {need}",
                self.theta_nodes,
                dim.saturating_sub(1)
            )));
        }
        Ok(())
    }
}

/// Θ-averaged projector block `M(N)` over levels `0..dim`.
#[derive(Debug, Clone)]
pub struct ThetaAverage {
    pub n_periods: usize,
    pub rho: f64,
    pub hprime: f64,
    pub matrix: DMatrix<Complex64>,
    /// Largest entry change when the panel count is halved.
    pub halving_deviation: f64,
}

impl ThetaAverage {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `max |M_mn|` over `m ≠ n`.
    pub fn offdiag_max(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for m in 0..d {
            for n in 0..d {
                if m != n {
                    worst = worst.max(self.matrix[(m, n)].norm());
                }
            }
        }
        worst
    }

    /// `max_n |M_nn − e^{−ρ²}ρ^{2n}/n!|`.
    pub fn diag_dev(&self) -> f64 {
        log_poisson_weights(self.rho, self.dim())
            .iter()
            .enumerate()
            .map(|(n, lw)| (self.matrix[(n, n)] - lw.exp()).norm())
            .fold(0.0, f64::max)
    }
}

fn average_with_panels(amps: &[f64], freqs: &[f64], n_periods: usize, panels: usize) -> DMatrix<Complex64> {
    let d = amps.len();
    let rule = Rule::new(PANEL_NODES);
    let mut acc = DMatrix::from_element(d, d, Complex64::zero());
    let mut phase = vec![Complex64::zero(); d];
    let h = TAU / panels as f64;
    let start = -PI * n_periods as f64;
    for j in 0..n_periods * panels {
        let lo = start + j as f64 * h;
        for (theta, w) in rule.mapped(lo, lo + h) {
            for ((slot, &a), &f) in phase.iter_mut().zip(amps).zip(freqs) {
                *slot = Complex64::from_polar(a, -f * theta);
            }
            for n in 0..d {
                let pn = phase[n].conj() * w;
                for m in 0..=n {
                    acc[(m, n)] += phase[m] * pn;
                }
            }
        }
    }
    let norm = 1.0 / (TAU * n_periods as f64);
    for n in 0..d {
        for m in 0..=n {
            let v = acc[(m, n)] * norm;
            acc[(m, n)] = v;
            acc[(n, m)] = v.conj();
        }
    }
    acc
}

pub fn theta_average(spectrum: &EnergySpectrum, rho: f64, plan: CesaroPlan, dim: usize) -> Result<ThetaAverage> {
    plan.validate(dim)?;
    if !(rho.is_finite() && rho >= 0.0) {
        return Err(Error::InvalidParams(format!("rho must be finite and ≥ 0, got {rho}")));
    }
    let levels = spectrum.require(dim)?;
    let hprime = state_hprime(spectrum, rho)?;
    let scale = 1.0 / (spectrum.params.quantum() * hprime);
    let amps: Vec<f64> = log_poisson_weights(rho, dim).iter().map(|lw| (0.5 * lw).exp()).collect();
    let freqs: Vec<f64> = levels.iter().map(|e| e * scale).collect();
    let panels = plan.panels();
    let matrix = average_with_panels(&amps, &freqs, plan.n_periods, panels);
    let coarse = average_with_panels(&amps, &freqs, plan.n_periods, panels / 2);
    let halving_deviation = matrix.iter().zip(coarse.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    if halving_deviation > HALVING_TOL {
        return Err(Error::UnderResolved { deviation: halving_deviation });
    }
    Ok(ThetaAverage { n_periods: plan.n_periods, rho, hprime, matrix, halving_deviation })
}

/// A pair of levels whose frequency ratio is (numerically) `p/q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommensuratePair {
    pub m: usize,
    pub n: usize,
    pub nu: f64,
    pub p: i64,
    pub q: u32,
}

/// Pairs `m < n < dim` with `ν = (E_n − E_m)/(ħωH′)` within
/// [`COMMENSURATE_TOL`] of a fraction with denominator ≤ 8.
pub fn commensurate_pairs(spectrum: &EnergySpectrum, hprime: f64, dim: usize) -> Result<Vec<CommensuratePair>> {
    let levels = spectrum.require(dim)?;
    let scale = 1.0 / (spectrum.params.quantum() * hprime);
    let mut out = Vec::new();
    for n in 0..dim {
        for m in 0..n {
            let nu = (levels[n] - levels[m]) * scale;
            for q in 1..=COMMENSURATE_MAX_DENOM {
                let p = (nu * q as f64).round();
                if (nu - p / q as f64).abs() < COMMENSURATE_TOL {
                    out.push(CommensuratePair { m, n, nu, p: p as i64, q });
                    break;
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    #[serde(rename = "N")]
    pub n_periods: usize,
    pub offdiag_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CesaroPoint {
    pub n_periods: usize,
    pub offdiag_max: f64,
    pub diag_dev: f64,
    pub halving_deviation: f64,
    pub theta_nodes: usize,
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialQuadrature {
    /// Upper end of the `ρ²` range.
    pub x_max: f64,
    pub panels: usize,
    pub nodes: usize,
    /// Largest acceptable mass beyond `x_max` and largest acceptable change
    /// under halving.
    pub tol: f64,
}

impl Default for RadialQuadrature {
    fn default() -> Self {
        Self { x_max: 60.0, panels: 4, nodes: 64, tol: 1e-8 }
    }
}

/// `e^{−X} Σ_{k≤n} X^k/k!`, the Poisson mass of level `n` beyond `ρ² = X`.
pub fn radial_tail(n: usize, x: f64) -> f64 {
    let mut term = (-x).exp();
    let mut sum = term;
    for k in 1..=n {
        term *= x / k as f64;
        sum += term;
    }
    sum
}

fn radial_quadrature(n: usize, quad: &RadialQuadrature, panels: usize) -> f64 {
    let rule = Rule::new(quad.nodes);
    let log_fact: f64 = (1..=n).map(|k| (k as f64).ln()).sum();
    rule.composite(0.0, quad.x_max, panels, |x| {
        if x == 0.0 {
            return if n == 0 { 1.0 } else { 0.0 };
        }
        (-x + n as f64 * x.ln() - log_fact).exp()
    })
}

/// `∫_0^X dρ² e^{−ρ²}ρ^{2n}/n!`.
pub fn radial_mass(n: usize, quad: &RadialQuadrature) -> Result<f64> {
    if !(quad.x_max > 0.0 && quad.panels >= 2 && quad.nodes >= 2 && quad.tol > 0.0) {
        return Err(Error::DegenerateGrid(format!("bad radial quadrature {quad:?}")));
    }
    let tail = radial_tail(n, quad.x_max);
    if tail > quad.tol {
        return Err(Error::TailBound { tail, tol: quad.tol });
    }
    let mass = radial_quadrature(n, quad, quad.panels);
    let coarse = radial_quadrature(n, quad, quad.panels / 2);
    let deviation = (mass - coarse).abs();
    if deviation > quad.tol {
        return Err(Error::UnderResolved { deviation });
    }
    Ok(mass)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionReport {
    pub model: ModelParams,
    pub rho: f64,
    pub dim: usize,
    pub hprime: f64,
    pub cesaro: Vec<CesaroPoint>,
    /// Fitted log-log slope of `offdiag_max` against `N`.
    pub decay_slope: f64,
    pub radial_masses: Vec<f64>,
    /// `max_n |∫dρ² |c_n|² − 1|`.
    pub diag_dev: f64,
    pub commensurate: Vec<CommensuratePair>,
}

impl ResolutionReport {
    pub fn decay_rows(&self) -> Vec<DecayRow> {
        self.cesaro.iter().map(|c| DecayRow { n_periods: c.n_periods, offdiag_max: c.offdiag_max }).collect()
    }

    /// `offdiag_max(N)` strictly decreasing along the Cesàro lengths.
    pub fn offdiag_decreasing(&self) -> bool {
        self.cesaro.windows(2).all(|w| w[1].offdiag_max < w[0].offdiag_max)
    }

    pub fn max_cesaro_diag_dev(&self) -> f64 {
        self.cesaro.iter().map(|c| c.diag_dev).fold(0.0, f64::max)
    }
}

/// Angular averages at each Cesàro length over levels `0..dim`, radial masses
/// for levels `0..n_check`, and the commensurate pairs found.
pub fn radial_resolution(
    spectrum: &EnergySpectrum,
    rho: f64,
    dim: usize,
    lengths: &[usize],
    n_check: usize,
    quad: &RadialQuadrature,
) -> Result<ResolutionReport> {
    if lengths.is_empty() {
        return Err(Error::DegenerateGrid("no Cesàro lengths".into()));
    }
    let hprime = state_hprime(spectrum, rho)?;
    let mut cesaro = Vec::with_capacity(lengths.len());
    for &n in lengths {
        let plan = CesaroPlan::resolving(spectrum, rho, dim, n)?;
        let avg = theta_average(spectrum, rho, plan, dim)?;
        cesaro.push(CesaroPoint {
            n_periods: n,
            offdiag_max: avg.offdiag_max(),
            diag_dev: avg.diag_dev(),
            halving_deviation: avg.halving_deviation,
            theta_nodes: plan.theta_nodes,
        });
    }
    let decay_slope = if cesaro.len() >= 2 {
        let x: Vec<f64> = cesaro.iter().map(|c| c.n_periods as f64).collect();
        let y: Vec<f64> = cesaro.iter().map(|c| c.offdiag_max).collect();
        log_log_slope(&x, &y)
    } else {
        f64::NAN
    };
    let radial_masses = (0..n_check).map(|n| radial_mass(n, quad)).collect::<Result<Vec<_>>>()?;
    let diag_dev = radial_masses.iter().map(|m| (m - 1.0).abs()).fold(0.0, f64::max);
    Ok(ResolutionReport {
        model: spectrum.params,
        rho,
        dim,
        hprime,
        cesaro,
        decay_slope,
        radial_masses,
        diag_dev,
        commensurate: commensurate_pairs(spectrum, hprime, dim)?,
    })
}

/// `ln I₀(2x) = ln Σ_k x^{2k}/(k!)²`.
fn log_bessel_i0_2x(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let end = (x + 40.0 * x.sqrt() + 60.0).ceil() as usize;
    let lx = x.ln();
    let mut log_fact = 0.0;
    let terms: Vec<f64> = (0..end)
        .map(|k| {
            if k > 0 {
                log_fact += (k as f64).ln();
            }
            2.0 * k as f64 * lx - 2.0 * log_fact
        })
        .collect();
    let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln()
}

/// Normalized alternative coefficients `|c_n(ρ)|² = f_n⁴/Σ_k f_k⁴`,
/// `f_k = ρ^k/√k!`. Unit norm for every `ρ`, but not complete against `dρ²`.
pub fn alternative_weight(n: usize, rho_sq: f64) -> f64 {
    if rho_sq == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let log_fact: f64 = (1..=n).map(|k| (k as f64).ln()).sum();
    (2.0 * n as f64 * rho_sq.ln() - 2.0 * log_fact - log_bessel_i0_2x(rho_sq)).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlternativeDemo {
    /// `∫_0^X dρ² |c_n|²` for the alternative coefficients.
    pub masses: Vec<f64>,
    pub max_deviation: f64,
    /// Levels whose mass misses 1 by more than the quadrature tolerance.
    pub failing_levels: Vec<usize>,
}

/// Radial masses of the alternative coefficients for levels `0..n_check`.
pub fn alternative_demo(n_check: usize, quad: &RadialQuadrature) -> AlternativeDemo {
    let rule = Rule::new(quad.nodes);
    let masses: Vec<f64> = (0..n_check)
        .map(|n| rule.composite(0.0, quad.x_max, quad.panels, |x| alternative_weight(n, x)))
        .collect();
    let failing_levels = masses.iter().enumerate().filter(|(_, m)| (*m - 1.0).abs() > quad.tol).map(|(n, _)| n).collect();
    AlternativeDemo {
        max_deviation: masses.iter().map(|m| (m - 1.0).abs()).fold(0.0, f64::max),
        masses,
        failing_levels,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureCheck {
    /// `(1/h) ∫∫ g dq dp`.
    pub cartesian: f64,
    /// `∫∫ g dρ² dΘ/2π`.
    pub polar: f64,
    pub deviation: f64,
}

/// Integrates the Gaussian bump `g(q, p)` centered at `(q0, p0)` with widths
/// `(sq, sp)` in both measures.
pub fn measure_check(params: &ModelParams, center: (f64, f64), widths: (f64, f64)) -> Result<MeasureCheck> {
    params.validate()?;
    let (q0, p0) = center;
    let (sq, sp) = widths;
    if !(sq > 0.0 && sp > 0.0) {
        return Err(Error::InvalidParams("bump widths must be positive".into()));
    }
    let g = |q: f64, p: f64| (-0.5 * ((q - q0) / sq).powi(2) - 0.5 * ((p - p0) / sp).powi(2)).exp();
    let rule = Rule::new(PANEL_NODES);
    let reach = 12.0;
    let panels = 24;
    let cartesian = rule.composite(q0 - reach * sq, q0 + reach * sq, panels, |q| {
        rule.composite(p0 - reach * sp, p0 + reach * sp, panels, |p| g(q, p))
    }) / (TAU * params.hbar);

    let omega = params.omega;
    let r_max = (q0 * q0 + (p0 / omega).powi(2)).sqrt() + reach * sq.max(sp / omega);
    let x_max = omega * r_max * r_max / (2.0 * params.hbar);
    let polar = rule.composite(0.0, x_max, 4 * panels, |x| {
        let r = (2.0 * params.hbar * x / omega).sqrt();
        rule.composite(0.0, TAU, 4 * panels, |theta| g(r * theta.cos(), -omega * r * theta.sin()))
    }) / TAU;
    let mut acc = Neumaier::default();
    acc.add(cartesian);
    acc.add(-polar);
    Ok(MeasureCheck { cartesian, polar, deviation: acc.sum().abs() })
}

//! Coherent states `|ρ, Θ) = Σ c_n(ρ) e^{−iE_nΘ/(ħωH′)} |n⟩` over an arbitrary
//! spectrum.
//!
//! `c_n(ρ) = e^{−ρ²/2} ρⁿ/√n!` are the Poisson amplitudes and `H′` is the
//! classical slope at the state's own action `y = ħωρ²`. With this phase the
//! Schrödinger flow only moves the label: evolving for `t` gives exactly the
//! state at `Θ + ωH′t`.

use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phasespace::ClassicalSystem;
use crate::quadrature::Neumaier;
use crate::spectrum::{build_operator, EnergySpectrum, ModelParams, Operator, OperatorMatrix};

/// Truncation mass above which construction fails.
pub const MAX_TRUNCATION_MASS: f64 = 1e-12;

/// Tail mass targeted by [`recommended_dim`].
pub const DEFAULT_TAIL_MASS: f64 = 1e-25;

/// `ln|c_n(ρ)|²` for `n < count`.
pub fn log_poisson_weights(rho: f64, count: usize) -> Vec<f64> {
    let mu = rho * rho;
    if mu == 0.0 {
        return (0..count).map(|n| if n == 0 { 0.0 } else { f64::NEG_INFINITY }).collect();
    }
    let log_mu = mu.ln();
    let mut out = Vec::with_capacity(count);
    let mut log_fact = Neumaier::default();
    for n in 0..count {
        if n > 0 {
            log_fact.add((n as f64).ln());
        }
        out.push(-mu + n as f64 * log_mu - log_fact.sum());
    }
    out
}

/// Index past which the Poisson weights are below double-precision reach of
/// any tail we care about.
fn tail_horizon(mu: f64) -> usize {
    (mu + 40.0 * mu.sqrt() + 60.0).ceil() as usize
}

/// `Σ_{n ≥ from} e^{−ρ²}ρ^{2n}/n!`, summed directly so tiny tails keep their
/// relative accuracy.
pub fn poisson_tail(rho: f64, from: usize) -> f64 {
    let end = tail_horizon(rho * rho).max(from + 1);
    let logs = log_poisson_weights(rho, end);
    logs[from..].iter().rev().map(|l| l.exp()).sum()
}

/// Smallest basis with Poisson tail below `mass` (at least 2).
pub fn dim_for_tail(rho: f64, mass: f64) -> usize {
    let end = tail_horizon(rho * rho);
    let logs = log_poisson_weights(rho, end);
    let mut tail = 0.0;
    let mut n = end;
    while n > 0 {
        let next = tail + logs[n - 1].exp();
        if next >= mass {
            break;
        }
        tail = next;
        n -= 1;
    }
    n.max(2)
}

/// Default basis size for a state of radius `rho`.
pub fn recommended_dim(rho: f64) -> usize {
    dim_for_tail(rho, DEFAULT_TAIL_MASS)
}

#[derive(Debug, Clone)]
pub struct CoherentState {
    pub rho: f64,
    pub theta: f64,
    /// `A_n`, renormalized to unit norm.
    pub coeffs: Vec<Complex64>,
    pub spectrum: Arc<EnergySpectrum>,
    pub hprime: f64,
    /// Poisson mass beyond the basis, before renormalization.
    pub trunc_mass: f64,
}

impl CoherentState {
    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn params(&self) -> &ModelParams {
        &self.spectrum.params
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `|A_n|²`.
    pub fn populations(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.norm_sqr()).collect()
    }

    /// Index of the largest population.
    pub fn peak_index(&self) -> usize {
        let pops = self.populations();
        let mut best = 0;
        for (n, &w) in pops.iter().enumerate() {
            if w > pops[best] {
                best = n;
            }
        }
        best
    }

    /// Complex label `z = ρe^{−iΘ}`.
    pub fn label(&self) -> Complex64 {
        Complex64::from_polar(self.rho, -self.theta)
    }

    pub fn dump(&self) -> StateDump {
        StateDump {
            rho: self.rho,
            theta: self.theta,
            hprime: self.hprime,
            trunc_mass: self.trunc_mass,
            model: self.spectrum.params,
            spectrum_hash: self.spectrum.content_hash(),
            coefficients: self.coeffs.iter().map(|c| [c.re, c.im]).collect(),
        }
    }
}

/// JSON form of a state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDump {
    pub rho: f64,
    pub theta: f64,
    pub hprime: f64,
    pub trunc_mass: f64,
    pub model: ModelParams,
    pub spectrum_hash: String,
    /// `[re, im]` pairs.
    pub coefficients: Vec<[f64; 2]>,
}

/// `H′` at `y = ħωρ²` for the classical system attached to `spectrum`.
pub fn state_hprime(spectrum: &EnergySpectrum, rho: f64) -> Result<f64> {
    let system = ClassicalSystem::from_spectrum(spectrum)?;
    let y = spectrum.params.quantum() * rho * rho;
    let hprime = system.hprime(y);
    if !(hprime.is_finite() && hprime > 0.0) {
        return Err(Error::NonMonotone(format!("H′({y}) = {hprime} is not positive")));
    }
    Ok(hprime)
}

pub fn build_state(spectrum: &Arc<EnergySpectrum>, rho: f64, theta: f64, dim: usize) -> Result<CoherentState> {
    if !(rho.is_finite() && rho >= 0.0) {
        return Err(Error::InvalidParams(format!("rho must be finite and ≥ 0, got {rho}")));
    }
    if !theta.is_finite() {
        return Err(Error::NonFinite("theta".into()));
    }
    if dim < 1 {
        return Err(Error::DimTooSmall { op: "state".into(), dim, min: 1 });
    }
    let trunc_mass = poisson_tail(rho, dim);
    if trunc_mass >= MAX_TRUNCATION_MASS {
        return Err(Error::Truncation { mass: trunc_mass, min_dim: dim_for_tail(rho, MAX_TRUNCATION_MASS) });
    }
    let levels = spectrum.require(dim)?;
    let hprime = state_hprime(spectrum, rho)?;
    let params = &spectrum.params;
    let scale = 1.0 / (params.quantum() * hprime);
    let renorm = (1.0 - trunc_mass).sqrt();
    let coeffs = log_poisson_weights(rho, dim)
        .iter()
        .zip(levels)
        .map(|(&lw, &e)| Complex64::from_polar((0.5 * lw).exp() / renorm, -e * theta * scale))
        .collect();
    Ok(CoherentState { rho, theta, coeffs, spectrum: Arc::clone(spectrum), hprime, trunc_mass })
}

/// [`build_state`] at [`recommended_dim`].
pub fn build_state_default(spectrum: &Arc<EnergySpectrum>, rho: f64, theta: f64) -> Result<CoherentState> {
    build_state(spectrum, rho, theta, recommended_dim(rho))
}

/// Schrödinger evolution `A_n → A_n e^{−iE_n t/ħ}`; the label moves to
/// `Θ + ωH′t`.
pub fn evolve_state(state: &CoherentState, t: f64) -> CoherentState {
    let params = state.params();
    let coeffs = state
        .coeffs
        .iter()
        .zip(&state.spectrum.levels)
        .map(|(a, &e)| a * Complex64::from_polar(1.0, -e * t / params.hbar))
        .collect();
    CoherentState {
        theta: state.theta + params.omega * state.hprime * t,
        coeffs,
        ..state.clone()
    }
}

/// `⟨a|b⟩` over the common leading block.
pub fn overlap(a: &CoherentState, b: &CoherentState) -> Complex64 {
    a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x.conj() * y).sum()
}

/// `max_n |A_n e^{iφ} − B_n|` with `φ` the phase of `⟨a|b⟩`.
pub fn phase_aligned_deviation(a: &CoherentState, b: &CoherentState) -> Result<f64> {
    phase_aligned_distance(&a.coeffs, &b.coeffs)
}

pub fn phase_aligned_distance(a: &[Complex64], b: &[Complex64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
    }
    let s: Complex64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    let phase = if s.norm() > 0.0 { s / s.norm() } else { Complex64::new(1.0, 0.0) };
    Ok(a.iter().zip(b).map(|(x, y)| (x * phase - y).norm()).fold(0.0, f64::max))
}

/// Matrices used by [`expectation_report`].
#[derive(Debug, Clone)]
pub struct OperatorSet {
    pub q: OperatorMatrix,
    pub p: OperatorMatrix,
    pub a: OperatorMatrix,
}

impl OperatorSet {
    /// Operators large enough for states of dimension up to `state_dim`.
    pub fn new(params: &ModelParams, state_dim: usize) -> Result<Self> {
        let dim = state_dim + 2;
        Ok(Self {
            q: build_operator(params, Operator::Q, dim)?,
            p: build_operator(params, Operator::P, dim)?,
            a: build_operator(params, Operator::A, dim)?,
        })
    }

    fn dim(&self) -> usize {
        self.q.dim.min(self.p.dim).min(self.a.dim)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectationReport {
    pub mean_q: f64,
    pub mean_p: f64,
    pub var_q: f64,
    pub var_p: f64,
    pub uncertainty_product: f64,
    /// `‖a|s⟩ − ρe^{−iΘ}|s⟩‖`.
    pub a_residual_norm: f64,
    /// `k` in `var_q = (ħ/2ω)(1 + ρ²k)`; 0 at `ρ = 0`.
    pub k_value: f64,
}

fn centered_norm_sqr(op: &OperatorMatrix, v: &[Complex64], mean: f64) -> Result<f64> {
    let w = op.apply(v)?;
    let mut acc = Neumaier::default();
    for (n, wn) in w.iter().enumerate() {
        let vn = v.get(n).copied().unwrap_or_else(Complex64::zero);
        acc.add((wn - mean * vn).norm_sqr());
    }
    Ok(acc.sum())
}

pub fn expectation_report(state: &CoherentState, ops: &OperatorSet) -> Result<ExpectationReport> {
    // q|s⟩ reaches one index past the state
    if ops.dim() < state.dim() + 1 {
        return Err(Error::DimensionMismatch { expected: state.dim() + 1, got: ops.dim() });
    }
    let v = &state.coeffs;
    let mean_q = ops.q.expectation(v)?.re;
    let mean_p = ops.p.expectation(v)?.re;
    let var_q = centered_norm_sqr(&ops.q, v, mean_q)?;
    let var_p = centered_norm_sqr(&ops.p, v, mean_p)?;
    let z = state.label();
    let av = ops.a.apply(v)?;
    let mut resid = Neumaier::default();
    for (n, w) in av.iter().enumerate() {
        let vn = v.get(n).copied().unwrap_or_else(Complex64::zero);
        resid.add((w - z * vn).norm_sqr());
    }
    let params = state.params();
    let vacuum = params.hbar / (2.0 * params.omega);
    let mu = state.rho * state.rho;
    let k_value = if mu > 0.0 { (var_q / vacuum - 1.0) / mu } else { 0.0 };
    Ok(ExpectationReport {
        mean_q,
        mean_p,
        var_q,
        var_p,
        uncertainty_product: (var_q * var_p).sqrt(),
        a_residual_norm: resid.sum().sqrt(),
        k_value,
    })
}

/// One row of an expectation scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub rho: f64,
    pub theta: f64,
    pub mean_q: f64,
    pub mean_p: f64,
    pub var_q: f64,
    pub var_p: f64,
    pub product: f64,
    pub a_residual: f64,
    pub k: f64,
}

/// Expectation reports over the product grid `rhos × thetas`, each state at
/// its recommended basis size.
pub fn expectation_scan(spectrum: &Arc<EnergySpectrum>, rhos: &[f64], thetas: &[f64]) -> Result<Vec<ScanRow>> {
    let mut rows = Vec::with_capacity(rhos.len() * thetas.len());
    for &rho in rhos {
        let dim = recommended_dim(rho);
        let ops = OperatorSet::new(&spectrum.params, dim)?;
        for &theta in thetas {
            let state = build_state(spectrum, rho, theta, dim)?;
            let r = expectation_report(&state, &ops)?;
            rows.push(ScanRow {
                rho,
                theta,
                mean_q: r.mean_q,
                mean_p: r.mean_p,
                var_q: r.var_q,
                var_p: r.var_p,
                product: r.uncertainty_product,
                a_residual: r.a_residual_norm,
                k: r.k_value,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPlan {
    /// Shifts are tried up to this many nominal periods.
    pub n_periods: usize,
    pub samples_per_period: usize,
}

impl Default for ScanPlan {
    fn default() -> Self {
        Self { n_periods: 50, samples_per_period: 256 }
    }
}

/// Near-recurrences of `f(t) = ⟨O(t)⟩`.
///
/// For a shift `t` the residual is `sup_{s ∈ [0, T₀]} |f(t + s) − f(s)|`, with
/// `T₀ = 2π/(ωH′)` the nominal period; shifts run over the grid points in
/// `[T₀/2, n_periods·T₀]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceReport {
    pub nominal_period: f64,
    pub times: Vec<f64>,
    /// `[re, im]` of `⟨O(t)⟩`.
    pub values: Vec<[f64; 2]>,
    pub shifts: Vec<f64>,
    pub residuals: Vec<f64>,
    pub first_period_residual: f64,
    pub best_time: f64,
    pub best_residual: f64,
}

impl RecurrenceReport {
    pub fn min_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn almost_periodic_scan(state: &CoherentState, observable: &OperatorMatrix, plan: ScanPlan) -> Result<RecurrenceReport> {
    if plan.n_periods < 1 || plan.samples_per_period < 4 {
        return Err(Error::DegenerateGrid(format!(
            "need ≥ 1 period and ≥ 4 samples per period, got {} and {}",
            plan.n_periods, plan.samples_per_period
        )));
    }
    if observable.dim < state.dim() {
        return Err(Error::DimensionMismatch { expected: state.dim(), got: observable.dim });
    }
    let params = state.params();
    let period = TAU / (params.omega * state.hprime);
    let s = plan.samples_per_period;
    let count = (plan.n_periods + 1) * s + 1;
    let dt = period / s as f64;
    let levels = &state.spectrum.levels[..state.dim()];
    let mut times = Vec::with_capacity(count);
    let mut values = Vec::with_capacity(count);
    let mut evolved = vec![Complex64::zero(); state.dim()];
    for k in 0..count {
        let t = k as f64 * dt;
        for ((slot, a), &e) in evolved.iter_mut().zip(&state.coeffs).zip(levels) {
            *slot = a * Complex64::from_polar(1.0, -e * t / params.hbar);
        }
        times.push(t);
        values.push(observable.expectation(&evolved)?);
    }
    let residual = |shift: usize| {
        (0..=s).map(|j| (values[shift + j] - values[j]).norm()).fold(0.0, f64::max)
    };
    let mut shifts = Vec::new();
    let mut residuals = Vec::new();
    let (mut best_idx, mut best) = (0, f64::INFINITY);
    for k in s / 2..=plan.n_periods * s {
        let r = residual(k);
        if r < best {
            best = r;
            best_idx = k;
        }
        shifts.push(times[k]);
        residuals.push(r);
    }
    Ok(RecurrenceReport {
        nominal_period: period,
        first_period_residual: residual(s),
        best_time: times[best_idx],
        best_residual: best,
        times,
        values: values.iter().map(|v| [v.re, v.im]).collect(),
        shifts,
        residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::ModelKind;
    use proptest::prelude::*;

    fn diagonal(lambda: f64, count: usize) -> Arc<EnergySpectrum> {
        Arc::new(EnergySpectrum::diagonal_closed_form(&ModelParams::diagonal(lambda).unwrap(), count).unwrap())
    }

    #[test]
    fn vacuum_at_zero_radius() {
        let spec = diagonal(0.3, 8);
        let s = build_state(&spec, 0.0, 1.7, 8).unwrap();
        assert!((s.coeffs[0].norm() - 1.0).abs() < 1e-15);
        assert!(s.coeffs[1..].iter().all(|c| *c == Complex64::zero()));
        assert_eq!(s.trunc_mass, 0.0);
    }

    #[test]
    fn harmonic_limit_is_canonical() {
        let spec = diagonal(0.0, 80);
        let (rho, theta) = (1.3, 0.7);
        let s = build_state_default(&spec, rho, theta).unwrap();
        let z = Complex64::from_polar(rho, -theta);
        let mut canonical = Vec::new();
        let mut term = Complex64::new((-rho * rho / 2.0).exp(), 0.0);
        for n in 0..s.dim() {
            if n > 0 {
                term *= z / (n as f64).sqrt();
            }
            canonical.push(term);
        }
        assert!(phase_aligned_distance(&canonical, &s.coeffs).unwrap() < 1e-12);
    }

    #[test]
    fn peak_at_poisson_mode() {
        let spec = diagonal(0.1, 120);
        assert_eq!(build_state_default(&spec, 2.5, 0.0).unwrap().peak_index(), 6);
        assert_eq!(build_state_default(&spec, 3.5, 0.0).unwrap().peak_index(), 12);
    }

    #[test]
    fn truncation_error_names_adequate_dim() {
        let spec = diagonal(0.0, 64);
        let err = build_state(&spec, 2.0, 0.0, 8).unwrap_err();
        let Error::Truncation { mass, min_dim } = err else { panic!("{err:?}") };
        assert!(mass > 1e-12);
        assert!(build_state(&spec, 2.0, 0.0, min_dim).is_ok());
        assert!(build_state(&spec, 2.0, 0.0, min_dim - 1).is_err());
    }

    #[test]
    fn tail_matches_complement() {
        for rho in [0.5, 2.0, 4.0] {
            let direct: f64 = log_poisson_weights(rho, 6).iter().map(|l| l.exp()).sum();
            assert!((poisson_tail(rho, 6) - (1.0 - direct)).abs() < 1e-14);
        }
    }

    #[test]
    fn evolution_moves_the_label() {
        let spec = diagonal(0.1, 120);
        let s = build_state_default(&spec, 2.0, 0.4).unwrap();
        assert_eq!(evolve_state(&s, 0.0).coeffs, s.coeffs);
        for t in [0.1, 1.0, 10.0] {
            let evolved = evolve_state(&s, t);
            let relabeled = build_state(&spec, 2.0, 0.4 + 1.8 * t, s.dim()).unwrap();
            assert!((evolved.theta - relabeled.theta).abs() < 1e-14);
            assert!(phase_aligned_deviation(&evolved, &relabeled).unwrap() < 1e-12);
            assert!((evolved.norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn harmonic_period_global_phase() {
        let spec = diagonal(0.0, 80);
        let s = build_state_default(&spec, 1.5, 0.2).unwrap();
        let back = evolve_state(&s, TAU);
        for (a, b) in s.coeffs.iter().zip(&back.coeffs) {
            assert!((a * -1.0 - b).norm() < 1e-13);
        }
    }

    #[test]
    fn harmonic_expectations() {
        let spec = diagonal(0.0, 80);
        let s = build_state_default(&spec, 2.0, 0.0).unwrap();
        let ops = OperatorSet::new(&spec.params, s.dim()).unwrap();
        let r = expectation_report(&s, &ops).unwrap();
        assert!((r.mean_q - 2.0 * 2f64.sqrt()).abs() < 1e-12);
        assert!(r.mean_p.abs() < 1e-12);
        assert!((r.uncertainty_product - 0.5).abs() < 1e-10);
        assert!(r.a_residual_norm < 1e-10);
        assert!(r.k_value.abs() < 1e-10);
    }

    #[test]
    fn mean_follows_classical_orbit_in_harmonic_limit() {
        let params = ModelParams::new(ModelKind::DiagonalQuadratic, 1.7, 0.0, 0.6).unwrap();
        let spec = Arc::new(EnergySpectrum::diagonal_closed_form(&params, 80).unwrap());
        let (rho, theta) = (1.2, 2.3);
        let s = build_state_default(&spec, rho, theta).unwrap();
        let r = expectation_report(&s, &OperatorSet::new(&params, s.dim()).unwrap()).unwrap();
        let amp = rho * (2.0 * params.hbar / params.omega).sqrt();
        assert!((r.mean_q - amp * theta.cos()).abs() < 1e-12);
        assert!((r.mean_p + params.omega * amp * theta.sin()).abs() < 1e-12);
    }

    #[test]
    fn residual_shrinks_with_radius() {
        let spec = diagonal(0.1, 200);
        let at = |rho: f64, theta: f64| {
            let s = build_state_default(&spec, rho, theta).unwrap();
            expectation_report(&s, &OperatorSet::new(&spec.params, s.dim()).unwrap()).unwrap()
        };
        // at Θ = 0 every phase vanishes and only truncation is left
        assert!(at(2.0, 0.0).a_residual_norm < 1e-10 && at(6.0, 0.0).a_residual_norm < 1e-10);
        for theta in [0.5, 1.0, 2.0, 3.0, 6.0] {
            assert!(at(6.0, theta).a_residual_norm / 6.0 < at(2.0, theta).a_residual_norm / 2.0);
        }
    }

    #[test]
    fn undersized_operators_rejected() {
        let spec = diagonal(0.1, 80);
        let s = build_state_default(&spec, 1.0, 0.0).unwrap();
        let small = OperatorSet::new(&spec.params, s.dim() - 2).unwrap();
        assert!(matches!(expectation_report(&s, &small), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn overlap_is_one_only_at_equal_labels() {
        let spec = diagonal(0.1, 80);
        let a = build_state_default(&spec, 2.0, 0.3).unwrap();
        let b = build_state_default(&spec, 2.0, 1.3).unwrap();
        assert!((overlap(&a, &a).norm() - 1.0).abs() < 1e-14);
        assert!(overlap(&a, &b).norm() < 0.99);
    }

    #[test]
    fn harmonic_recurrence_is_exact() {
        let spec = diagonal(0.0, 80);
        let s = build_state_default(&spec, 2.0, 0.0).unwrap();
        let q = build_operator(&spec.params, Operator::Q, s.dim()).unwrap();
        let rep = almost_periodic_scan(&s, &q, ScanPlan { n_periods: 5, samples_per_period: 32 }).unwrap();
        assert!(rep.first_period_residual < 1e-10);
        assert!((rep.nominal_period - TAU).abs() < 1e-15);
        let id = build_operator(&spec.params, Operator::Identity, s.dim()).unwrap();
        let flat = almost_periodic_scan(&s, &id, ScanPlan { n_periods: 3, samples_per_period: 16 }).unwrap();
        assert!(flat.residuals.iter().all(|&r| r < 1e-14));
        assert!(almost_periodic_scan(&s, &q, ScanPlan { n_periods: 0, samples_per_period: 16 }).is_err());
    }

    #[test]
    fn dump_round_trips() {
        let spec = diagonal(0.1, 40);
        let s = build_state_default(&spec, 1.0, 0.5).unwrap();
        let dump = s.dump();
        let text = serde_json::to_string(&dump).unwrap();
        assert_eq!(serde_json::from_str::<StateDump>(&text).unwrap(), dump);
        assert_eq!(dump.spectrum_hash.len(), 64);
    }

    proptest! {
        #[test]
        fn states_are_normalized_and_theta_blind(rho in 0.0f64..5.0, theta in -20.0f64..20.0, lambda in 0.0f64..1.0) {
            let spec = diagonal(lambda, 120);
            let s = build_state_default(&spec, rho, theta).unwrap();
            prop_assert!((s.norm() - 1.0).abs() < 1e-14);
            prop_assert!(s.trunc_mass < DEFAULT_TAIL_MASS);
            let flat = build_state(&spec, rho, 0.0, s.dim()).unwrap();
            for (a, b) in s.coeffs.iter().zip(&flat.coeffs) {
                prop_assert!((a.norm() - b.norm()).abs() < 1e-15);
            }
        }

        #[test]
        fn heisenberg_bound(rho in 0.0f64..5.0, theta in 0.0f64..6.3, lambda in 0.0f64..0.5) {
            let spec = diagonal(lambda, 120);
            let s = build_state_default(&spec, rho, theta).unwrap();
            let r = expectation_report(&s, &OperatorSet::new(&spec.params, s.dim()).unwrap()).unwrap();
            prop_assert!(r.var_q >= 0.0 && r.var_p >= 0.0);
            prop_assert!(r.uncertainty_product >= 0.5 - 1e-12);
        }
    }
}

//! Model Hamiltonians, ladder-operator matrices and truncated spectra.
//!
//! Everything is expressed in the eigenbasis `|n⟩` of a harmonic oscillator of
//! frequency `omega`. With `x = a + a†` the position operator is
//! `q = sqrt(ħ/2ω)·x` and the momentum is `p = i·sqrt(ħω/2)·(a† − a)`.
//! Matrix elements of `x²` and `x⁴` are written in closed form rather than
//! multiplied out, so a truncated block equals the corresponding block of the
//! infinite matrix.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::quadrature::Neumaier;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// `H = (a†a + ½)ħω + λ((a†a + ½)ħω)²`, already diagonal.
    #[serde(alias = "diagonal")]
    DiagonalQuadratic,
    /// `H = ½(P² + ω²Q² + λQ⁴)`.
    #[serde(alias = "quartic")]
    QuarticPosition,
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "diagonal" | "diagonal_quadratic" => Ok(ModelKind::DiagonalQuadratic),
            "quartic" | "quartic_position" => Ok(ModelKind::QuarticPosition),
            other => Err(Error::InvalidParams(format!(
                "unknown model `{other}` (expected diagonal or quartic)"
            ))),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::DiagonalQuadratic => f.write_str("diagonal"),
            ModelKind::QuarticPosition => f.write_str("quartic"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub omega: f64,
    pub lambda: f64,
    pub hbar: f64,
    pub model_kind: ModelKind,
}

impl ModelParams {
    pub fn new(model_kind: ModelKind, omega: f64, lambda: f64, hbar: f64) -> Result<Self> {
        let p = Self { omega, lambda, hbar, model_kind };
        p.validate()?;
        Ok(p)
    }

    /// `ω = ħ = 1` diagonal model.
    pub fn diagonal(lambda: f64) -> Result<Self> {
        Self::new(ModelKind::DiagonalQuadratic, 1.0, lambda, 1.0)
    }

    /// `ω = ħ = 1` quartic oscillator.
    pub fn quartic(lambda: f64) -> Result<Self> {
        Self::new(ModelKind::QuarticPosition, 1.0, lambda, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return Err(Error::InvalidParams(format!("omega must be > 0, got {}", self.omega)));
        }
        if !(self.hbar.is_finite() && self.hbar > 0.0) {
            return Err(Error::InvalidParams(format!("hbar must be > 0, got {}", self.hbar)));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "lambda must be ≥ 0 (negative coupling is unbounded below), got {}",
                self.lambda
            )));
        }
        Ok(())
    }

    /// Quantum of action-energy `ħω`.
    pub fn quantum(&self) -> f64 {
        self.hbar * self.omega
    }
}

/// Operators with closed-form matrix elements in the harmonic basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Operator {
    Q,
    P,
    Q2,
    P2,
    Q4,
    A,
    ADag,
    Identity,
}

impl Operator {
    pub fn half_bandwidth(self) -> usize {
        match self {
            Operator::Identity => 0,
            Operator::Q | Operator::P | Operator::A | Operator::ADag => 1,
            Operator::Q2 | Operator::P2 => 2,
            Operator::Q4 => 4,
        }
    }

    pub fn is_hermitian(self) -> bool {
        !matches!(self, Operator::A | Operator::ADag)
    }

    fn min_dim(self) -> usize {
        (self.half_bandwidth() + 1).max(2)
    }
}

impl FromStr for Operator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "q" => Operator::Q,
            "p" => Operator::P,
            "q2" => Operator::Q2,
            "p2" => Operator::P2,
            "q4" => Operator::Q4,
            "a" => Operator::A,
            "adag" => Operator::ADag,
            "id" => Operator::Identity,
            other => return Err(Error::UnknownOperator(other.to_string())),
        })
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self {
            Operator::Q => "q",
            Operator::P => "p",
            Operator::Q2 => "q2",
            Operator::P2 => "p2",
            Operator::Q4 => "q4",
            Operator::A => "a",
            Operator::ADag => "adag",
            Operator::Identity => "id",
        };
        f.write_str(tag)
    }
}

/// Banded matrix `⟨m|Ô|n⟩` of an operator in the harmonic basis.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    pub op: Operator,
    pub dim: usize,
    pub band: usize,
    pub entries: DMatrix<Complex64>,
}

impl OperatorMatrix {
    pub fn get(&self, m: usize, n: usize) -> Complex64 {
        self.entries[(m, n)]
    }

    /// Matrix-vector product. Shorter vectors are zero-padded; the output has
    /// length `dim`.
    pub fn apply(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        if v.len() > self.dim {
            return Err(Error::DimensionMismatch { expected: v.len(), got: self.dim });
        }
        let mut out = vec![Complex64::zero(); self.dim];
        for (m, slot) in out.iter_mut().enumerate() {
            let lo = m.saturating_sub(self.band);
            let hi = (m + self.band + 1).min(v.len());
            let mut acc = Complex64::zero();
            for (n, vn) in v.iter().enumerate().take(hi).skip(lo) {
                acc += self.entries[(m, n)] * vn;
            }
            *slot = acc;
        }
        Ok(out)
    }

    /// `⟨v|Ô|v⟩` for a (zero-padded) state vector.
    pub fn expectation(&self, v: &[Complex64]) -> Result<Complex64> {
        let w = self.apply(v)?;
        Ok(v.iter().zip(&w).map(|(a, b)| a.conj() * b).sum())
    }

    /// `max |M − M†|` entrywise.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for m in 0..self.dim {
            for n in 0..self.dim {
                let d = (self.entries[(m, n)] - self.entries[(n, m)].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }
}

/// `⟨m|xᵏ|n⟩` for `x = a + a†`, `k ∈ {1, 2, 4}`.
fn x_power_element(k: u32, m: usize, n: usize) -> f64 {
    let (lo, hi) = if m <= n { (m, n) } else { (n, m) };
    let gap = hi - lo;
    let l = lo as f64;
    // sqrt((l+1)(l+2)…(l+gap))
    let rising = |g: usize| (1..=g).map(|j| l + j as f64).product::<f64>().sqrt();
    match (k, gap) {
        (1, 1) => rising(1),
        (2, 0) => 2.0 * l + 1.0,
        (2, 2) => rising(2),
        (4, 0) => 6.0 * l * l + 6.0 * l + 3.0,
        (4, 2) => (4.0 * l + 6.0) * rising(2),
        (4, 4) => rising(4),
        _ => 0.0,
    }
}

/// `⟨m|(a† − a)²|n⟩`.
fn y_squared_element(m: usize, n: usize) -> f64 {
    let (lo, hi) = if m <= n { (m, n) } else { (n, m) };
    let l = lo as f64;
    match hi - lo {
        0 => -(2.0 * l + 1.0),
        2 => ((l + 1.0) * (l + 2.0)).sqrt(),
        _ => 0.0,
    }
}

pub fn build_operator(params: &ModelParams, which: Operator, dim: usize) -> Result<OperatorMatrix> {
    params.validate()?;
    let min = which.min_dim();
    if dim < min {
        return Err(Error::DimTooSmall { op: which.to_string(), dim, min });
    }
    let (hbar, omega) = (params.hbar, params.omega);
    let q_scale = (hbar / (2.0 * omega)).sqrt();
    let p_scale = (hbar * omega / 2.0).sqrt();
    let band = which.half_bandwidth();
    let mut entries = DMatrix::from_element(dim, dim, Complex64::zero());
    for m in 0..dim {
        let lo = m.saturating_sub(band);
        let hi = (m + band + 1).min(dim);
        for n in lo..hi {
            let v = match which {
                Operator::Identity => Complex64::new(if m == n { 1.0 } else { 0.0 }, 0.0),
                Operator::A => {
                    if n == m + 1 {
                        Complex64::new((n as f64).sqrt(), 0.0)
                    } else {
                        Complex64::zero()
                    }
                }
                Operator::ADag => {
                    if m == n + 1 {
                        Complex64::new((m as f64).sqrt(), 0.0)
                    } else {
                        Complex64::zero()
                    }
                }
                Operator::Q => Complex64::new(q_scale * x_power_element(1, m, n), 0.0),
                Operator::Q2 => Complex64::new(q_scale * q_scale * x_power_element(2, m, n), 0.0),
                Operator::Q4 => {
                    Complex64::new(q_scale.powi(4) * x_power_element(4, m, n), 0.0)
                }
                Operator::P => {
                    // p = i·s·(a† − a): ⟨n+1|p|n⟩ = i·s·√(n+1), ⟨n−1|p|n⟩ = −i·s·√n
                    if m == n + 1 {
                        Complex64::new(0.0, p_scale * (m as f64).sqrt())
                    } else if n == m + 1 {
                        Complex64::new(0.0, -p_scale * (n as f64).sqrt())
                    } else {
                        Complex64::zero()
                    }
                }
                Operator::P2 => Complex64::new(-p_scale * p_scale * y_squared_element(m, n), 0.0),
            };
            entries[(m, n)] = v;
        }
    }
    Ok(OperatorMatrix { op: which, dim, band, entries })
}

/// Real symmetric matrix of `½(P² + ω²Q² + λQ⁴)` restricted to the first
/// `dim` harmonic states.
pub fn quartic_hamiltonian(params: &ModelParams, dim: usize) -> DMatrix<f64> {
    let quartic = 0.5 * params.lambda * (params.hbar / (2.0 * params.omega)).powi(2);
    DMatrix::from_fn(dim, dim, |m, n| {
        let harmonic = if m == n { params.quantum() * (m as f64 + 0.5) } else { 0.0 };
        harmonic + quartic * x_power_element(4, m, n)
    })
}

/// Rayleigh–Ritz eigenvalues of the quartic Hamiltonian in a basis of size
/// `dim`, ascending. The even and odd parity blocks are solved separately.
pub fn diagonalize_quartic(params: &ModelParams, dim: usize) -> Result<Vec<f64>> {
    params.validate()?;
    if dim < 2 {
        return Err(Error::DimTooSmall { op: "hamiltonian".into(), dim, min: 2 });
    }
    let quartic = 0.5 * params.lambda * (params.hbar / (2.0 * params.omega)).powi(2);
    let mut levels = Vec::with_capacity(dim);
    for parity in 0..2 {
        let idx: Vec<usize> = (parity..dim).step_by(2).collect();
        let block = DMatrix::from_fn(idx.len(), idx.len(), |i, j| {
            let (m, n) = (idx[i], idx[j]);
            let harmonic = if m == n { params.quantum() * (m as f64 + 0.5) } else { 0.0 };
            harmonic + quartic * x_power_element(4, m, n)
        });
        if block.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("hamiltonian matrix".into()));
        }
        levels.extend(SymmetricEigen::new(block).eigenvalues.iter().copied());
    }
    levels.sort_by(f64::total_cmp);
    Ok(levels)
}

/// Ordered eigenvalues with truncation metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergySpectrum {
    pub params: ModelParams,
    pub basis_dim: usize,
    pub tol: f64,
    pub levels: Vec<f64>,
    pub n_converged: usize,
}

impl EnergySpectrum {
    /// Closed-form levels `y + λy²`, `y = (n + ½)ħω`, of the diagonal model.
    pub fn diagonal_closed_form(params: &ModelParams, count: usize) -> Result<Self> {
        params.validate()?;
        let levels = (0..count)
            .map(|n| {
                let y = (n as f64 + 0.5) * params.quantum();
                y + params.lambda * y * y
            })
            .collect();
        Ok(Self {
            params: ModelParams { model_kind: ModelKind::DiagonalQuadratic, ..*params },
            basis_dim: count,
            tol: 0.0,
            levels,
            n_converged: count,
        })
    }

    pub fn trusted(&self) -> &[f64] {
        &self.levels[..self.n_converged]
    }

    /// Trusted levels `0..count`, or an error naming the shortfall.
    pub fn require(&self, count: usize) -> Result<&[f64]> {
        if count > self.n_converged {
            return Err(Error::InsufficientLevels { needed: count, available: self.n_converged });
        }
        Ok(&self.levels[..count])
    }

    /// SHA-256 of the canonical JSON encoding, hex encoded.
    pub fn content_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("spectrum serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

pub fn solve_spectrum(params: &ModelParams, dim: usize, n_want: usize, tol: f64) -> Result<EnergySpectrum> {
    params.validate()?;
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::InvalidParams(format!("tolerance must be > 0, got {tol}")));
    }
    if dim < 2 {
        return Err(Error::DimTooSmall { op: "hamiltonian".into(), dim, min: 2 });
    }
    if n_want > dim / 2 {
        return Err(Error::InvalidParams(format!(
            "n_want = {n_want} exceeds half the basis size {dim}"
        )));
    }
    let spectrum = match params.model_kind {
        ModelKind::DiagonalQuadratic => {
            let mut s = EnergySpectrum::diagonal_closed_form(params, dim)?;
            s.tol = tol;
            s
        }
        ModelKind::QuarticPosition => {
            let coarse = diagonalize_quartic(params, dim)?;
            let fine = diagonalize_quartic(params, 2 * dim)?;
            if fine.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("eigenvalues".into()));
            }
            let n_converged = coarse
                .iter()
                .zip(&fine)
                .take_while(|(c, f)| ((*c - *f) / *f).abs() < tol)
                .count();
            let levels = fine[..dim].to_vec();
            if levels.windows(2).take(n_converged).any(|w| w[1] <= w[0]) {
                return Err(Error::NonMonotone("spectrum is degenerate".into()));
            }
            EnergySpectrum { params: *params, basis_dim: dim, tol, levels, n_converged }
        }
    };
    if spectrum.n_converged < n_want {
        return Err(Error::NotConverged { wanted: n_want, achieved: spectrum.n_converged });
    }
    Ok(spectrum)
}

pub const DEFAULT_GROWTH_GUARD: f64 = 1e12;

/// Coefficients `H_n` of `H = Σ H_n a†ⁿaⁿ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalOrderCoeffs {
    pub h: Vec<f64>,
    pub k_max: usize,
    pub growth_flag: bool,
}

impl NormalOrderCoeffs {
    /// `E_m = Σ_{n ≤ m} H_n · m!/(m − n)!`, compensated.
    pub fn reconstruct(&self, m: usize) -> f64 {
        let mut acc = Neumaier::default();
        let mut falling = 1.0;
        for (n, h) in self.h.iter().enumerate().take(m.min(self.k_max) + 1) {
            if n > 0 {
                falling *= (m + 1 - n) as f64;
            }
            acc.add(h * falling);
        }
        acc.sum()
    }
}

/// Above this order the exact rational path is skipped.
const EXACT_ORDER_LIMIT: usize = 64;

pub fn normal_order_coeffs(spectrum: &EnergySpectrum, k_max: usize) -> Result<NormalOrderCoeffs> {
    normal_order_coeffs_with_guard(spectrum, k_max, DEFAULT_GROWTH_GUARD)
}

/// `H_n = Σ_{k ≤ n} (−1)^{n−k} E_k / (k!(n−k)!)`, the n-th forward difference
/// of the levels divided by `n!`.
///
/// For `k_max ≤ 64` the sum is evaluated exactly over the rationals (every
/// `f64` is a dyadic rational) and rounded once; beyond that a compensated
/// floating-point sum is used.
pub fn normal_order_coeffs_with_guard(
    spectrum: &EnergySpectrum,
    k_max: usize,
    guard: f64,
) -> Result<NormalOrderCoeffs> {
    let levels = spectrum.require(k_max + 1)?;
    let h = if k_max <= EXACT_ORDER_LIMIT {
        exact_coeffs(levels)?
    } else {
        float_coeffs(levels)
    };
    let growth_flag = h.iter().any(|v| !v.is_finite() || v.abs() > guard);
    Ok(NormalOrderCoeffs { h, k_max, growth_flag })
}

fn exact_coeffs(levels: &[f64]) -> Result<Vec<f64>> {
    let energies: Vec<BigRational> = levels
        .iter()
        .map(|&e| BigRational::from_float(e).ok_or_else(|| Error::NonFinite("levels".into())))
        .collect::<Result<_>>()?;
    let mut inv_fact = vec![BigRational::one()];
    for k in 1..levels.len() {
        let prev = inv_fact[k - 1].clone();
        inv_fact.push(prev / BigRational::from_integer(BigInt::from(k)));
    }
    Ok((0..levels.len())
        .map(|n| {
            let mut acc = BigRational::zero();
            for k in 0..=n {
                let term = &energies[k] * &inv_fact[k] * &inv_fact[n - k];
                if (n - k) % 2 == 0 {
                    acc += term;
                } else {
                    acc -= term;
                }
            }
            acc.to_f64().unwrap_or(f64::NAN)
        })
        .collect())
}

fn float_coeffs(levels: &[f64]) -> Vec<f64> {
    let mut ln_fact = vec![0.0f64];
    for k in 1..levels.len() {
        ln_fact.push(ln_fact[k - 1] + (k as f64).ln());
    }
    (0..levels.len())
        .map(|n| {
            (0..=n)
                .map(|k| {
                    let mag = (-ln_fact[k] - ln_fact[n - k]).exp() * levels[k];
                    if (n - k) % 2 == 0 {
                        mag
                    } else {
                        -mag
                    }
                })
                .collect::<Neumaier>()
                .sum()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn unit() -> ModelParams {
        ModelParams::quartic(0.0).unwrap()
    }

    #[test]
    fn position_matrix_element_at_dim_two() {
        let q = build_operator(&unit(), Operator::Q, 2).unwrap();
        assert!((q.get(0, 1).re - FRAC_1_SQRT_2).abs() < 1e-16);
        assert_eq!(q.get(0, 0), Complex64::zero());
    }

    #[test]
    fn annihilation_has_only_superdiagonal() {
        let a = build_operator(&unit(), Operator::A, 9).unwrap();
        for m in 0..9 {
            for n in 0..9 {
                let want = if n == m + 1 { (n as f64).sqrt() } else { 0.0 };
                assert_eq!(a.get(m, n), Complex64::new(want, 0.0));
            }
        }
        let ad = build_operator(&unit(), Operator::ADag, 9).unwrap();
        assert_eq!(ad.entries, a.entries.adjoint());
    }

    #[test]
    fn hermitian_operators_are_exactly_hermitian() {
        let params = ModelParams::new(ModelKind::QuarticPosition, 1.7, 0.3, 0.9).unwrap();
        for op in [Operator::Q, Operator::P, Operator::Q2, Operator::P2, Operator::Q4] {
            let m = build_operator(&params, op, 40).unwrap();
            assert_eq!(m.hermitian_defect(), 0.0, "{op}");
        }
    }

    #[test]
    fn entries_outside_band_vanish() {
        for op in [Operator::Q, Operator::Q2, Operator::P2, Operator::Q4] {
            let m = build_operator(&unit(), op, 20).unwrap();
            for i in 0..20usize {
                for j in 0..20usize {
                    if i.abs_diff(j) > m.band {
                        assert_eq!(m.get(i, j), Complex64::zero());
                    }
                }
            }
        }
    }

    #[test]
    fn quartic_block_matches_fourth_power_of_position() {
        // oracle: multiply the q matrix at dim 24 and keep the interior 12×12
        let q = build_operator(&unit(), Operator::Q, 24).unwrap().entries;
        let q4_numeric = &q * &q * &q * &q;
        let q4 = build_operator(&unit(), Operator::Q4, 12).unwrap();
        for m in 0..12 {
            for n in 0..12 {
                let d = (q4.get(m, n) - q4_numeric[(m, n)]).norm();
                assert!(d < 1e-12 * (1.0 + q4.get(m, n).norm()), "({m},{n})");
            }
        }
    }

    #[test]
    fn canonical_commutator_on_interior() {
        let params = ModelParams::new(ModelKind::QuarticPosition, 1.3, 0.0, 0.7).unwrap();
        let dim = 30;
        let q = build_operator(&params, Operator::Q, dim).unwrap().entries;
        let p = build_operator(&params, Operator::P, dim).unwrap().entries;
        let c = &q * &p - &p * &q;
        let interior = dim - 1;
        for m in 0..interior {
            for n in 0..interior {
                let want = if m == n { Complex64::new(0.0, params.hbar) } else { Complex64::zero() };
                assert!((c[(m, n)] - want).norm() < 1e-10);
            }
        }
        // the truncation corner carries the defect
        assert!((c[(dim - 1, dim - 1)] - Complex64::new(0.0, params.hbar)).norm() > 1.0);
    }

    #[test]
    fn operator_validation() {
        assert!(matches!("x".parse::<Operator>(), Err(Error::UnknownOperator(_))));
        assert!(matches!(
            build_operator(&unit(), Operator::Q4, 4),
            Err(Error::DimTooSmall { min: 5, .. })
        ));
        assert!(build_operator(&unit(), Operator::Q, 1).is_err());
    }

    #[test]
    fn negative_coupling_rejected() {
        assert!(ModelParams::quartic(-1.0).is_err());
        assert!(ModelParams::new(ModelKind::DiagonalQuadratic, 0.0, 0.1, 1.0).is_err());
    }

    #[test]
    fn diagonal_ground_state() {
        let s = solve_spectrum(&ModelParams::diagonal(0.1).unwrap(), 16, 8, 1e-10).unwrap();
        assert!((s.levels[0] - 0.525).abs() < 1e-15);
    }

    #[test]
    fn harmonic_limit_of_quartic() {
        let params = ModelParams::new(ModelKind::QuarticPosition, 1.4, 0.0, 1.0).unwrap();
        let s = solve_spectrum(&params, 32, 16, 1e-10).unwrap();
        for (n, e) in s.trusted().iter().enumerate() {
            let exact = (n as f64 + 0.5) * 1.4;
            assert!(((e - exact) / exact).abs() < 1e-12);
        }
    }

    #[test]
    fn rayleigh_ritz_monotone_in_basis() {
        let params = ModelParams::quartic(0.4).unwrap();
        let dims = [16, 24, 32, 48, 64];
        let spectra: Vec<Vec<f64>> = dims.iter().map(|&d| diagonalize_quartic(&params, d).unwrap()).collect();
        for w in spectra.windows(2) {
            for n in 0..8 {
                // eigensolver round-off scales with the matrix norm
                assert!(w[1][n] <= w[0][n] + 1e-11, "level {n}");
            }
        }
    }

    #[test]
    fn unconverged_request_reports_count() {
        let params = ModelParams::quartic(0.4).unwrap();
        match solve_spectrum(&params, 16, 8, 1e-10) {
            Err(Error::NotConverged { wanted: 8, achieved }) => assert!(achieved < 8),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn normal_order_harmonic() {
        let s = EnergySpectrum::diagonal_closed_form(&ModelParams::diagonal(0.0).unwrap(), 8).unwrap();
        let c = normal_order_coeffs(&s, 3).unwrap();
        assert_eq!(c.h, vec![0.5, 1.0, 0.0, 0.0]);
        assert!(!c.growth_flag);
    }

    #[test]
    fn normal_order_quadratic_sequence() {
        let lambda = 0.1;
        let s = EnergySpectrum::diagonal_closed_form(&ModelParams::diagonal(lambda).unwrap(), 8).unwrap();
        let c = normal_order_coeffs(&s, 3).unwrap();
        let want = [0.5 + lambda / 4.0, 1.0 + 2.0 * lambda, lambda, 0.0];
        for (got, want) in c.h.iter().zip(want) {
            assert!((got - want).abs() < 1e-15, "{got} vs {want}");
        }
    }

    #[test]
    fn normal_order_matches_generating_function_series() {
        // coefficient of yⁿ in e^{-y}·Σ E_m yᵐ/m!, by direct series product
        let s = solve_spectrum(&ModelParams::quartic(0.4).unwrap(), 128, 12, 1e-10).unwrap();
        let k = 10;
        let c = normal_order_coeffs(&s, k).unwrap();
        let mut fact = vec![1.0f64];
        for i in 1..=k {
            fact.push(fact[i - 1] * i as f64);
        }
        for n in 0..=k {
            let series: f64 = (0..=n)
                .map(|j| s.levels[j] / fact[j] * (-1f64).powi((n - j) as i32) / fact[n - j])
                .sum();
            assert!((series - c.h[n]).abs() < 1e-9 * s.levels[k], "n = {n}");
        }
    }

    #[test]
    fn normal_order_needs_levels() {
        let s = EnergySpectrum::diagonal_closed_form(&ModelParams::diagonal(0.1).unwrap(), 4).unwrap();
        assert!(matches!(
            normal_order_coeffs(&s, 4),
            Err(Error::InsufficientLevels { needed: 5, available: 4 })
        ));
    }

    #[test]
    fn growth_flag_raised_by_guard() {
        let s = EnergySpectrum::diagonal_closed_form(&ModelParams::diagonal(0.1).unwrap(), 8).unwrap();
        let c = normal_order_coeffs_with_guard(&s, 3, 0.5).unwrap();
        assert!(c.growth_flag);
    }

    #[test]
    fn float_path_agrees_with_exact_path() {
        let s = solve_spectrum(&ModelParams::quartic(0.1).unwrap(), 64, 20, 1e-10).unwrap();
        let exact = exact_coeffs(&s.levels[..12]).unwrap();
        let float = float_coeffs(&s.levels[..12]);
        for (a, b) in exact.iter().zip(&float) {
            assert!((a - b).abs() < 1e-11 * s.levels[11]);
        }
    }

    #[test]
    fn spectrum_json_has_contract_fields() {
        let s = EnergySpectrum::diagonal_closed_form(&ModelParams::diagonal(0.0).unwrap(), 3).unwrap();
        let v: serde_json::Value = serde_json::to_value(&s).unwrap();
        for key in ["params", "basis_dim", "tol", "levels", "n_converged"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["params"]["model_kind"], "diagonal_quadratic");
        let back: EnergySpectrum = serde_json::from_value(v).unwrap();
        assert_eq!(back, s);
        assert_eq!(s.content_hash().len(), 64);
    }
}

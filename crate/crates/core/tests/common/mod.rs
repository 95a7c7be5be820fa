#![allow(dead_code)]

use num_complex::Complex64;

/// Numerov shooting for `−½ψ″ + (½ω²x² + ½λx⁴)ψ = Eψ` (ħ = m = 1).
pub struct Numerov {
    pub omega: f64,
    pub lambda: f64,
    pub x_max: f64,
    pub steps: usize,
}

impl Numerov {
    fn potential(&self, x: f64) -> f64 {
        let x2 = x * x;
        0.5 * self.omega * self.omega * x2 + 0.5 * self.lambda * x2 * x2
    }

    /// Sign changes of the parity solution on `(0, x_max)`.
    fn nodes(&self, energy: f64, odd: bool) -> usize {
        let h = self.x_max / self.steps as f64;
        let k = h * h / 12.0;
        let f = |x: f64| 2.0 * (self.potential(x) - energy);
        let (mut psi_prev, mut psi) = if odd {
            (0.0, h)
        } else {
            let f0 = f(0.0);
            let f1 = f(h);
            (1.0, (1.0 + 5.0 * k * f0) / (1.0 - k * f1))
        };
        let mut f_prev = f(0.0);
        let mut f_cur = f(h);
        let mut nodes = 0;
        let mut last_sign = psi.signum();
        for n in 1..self.steps {
            let x_next = (n + 1) as f64 * h;
            let f_next = f(x_next);
            let next = (2.0 * (1.0 + 5.0 * k * f_cur) * psi - (1.0 - k * f_prev) * psi_prev) / (1.0 - k * f_next);
            if next != 0.0 && next.signum() != last_sign {
                nodes += 1;
                last_sign = next.signum();
            }
            psi_prev = psi;
            psi = next;
            f_prev = f_cur;
            f_cur = f_next;
            if psi.abs() > 1e200 {
                psi *= 1e-200;
                psi_prev *= 1e-200;
            }
        }
        nodes
    }

    /// The `n`-th level, located by node counting and bisection.
    pub fn level(&self, n: usize) -> f64 {
        let odd = n % 2 == 1;
        let k = n / 2;
        let mut lo = 0.0;
        let mut hi = 1.0;
        while self.nodes(hi, odd) <= k {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.nodes(mid, odd) <= k {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Lowest `count` levels of the quartic oscillator, Richardson-extrapolated
/// over two Numerov step sizes.
pub fn numerov_levels(omega: f64, lambda: f64, count: usize) -> Vec<f64> {
    let coarse = Numerov { omega, lambda, x_max: 9.0, steps: 30_000 };
    let fine = Numerov { steps: 60_000, ..coarse };
    (0..count)
        .map(|n| {
            let (a, b) = (coarse.level(n), fine.level(n));
            (16.0 * b - a) / 15.0
        })
        .collect()
}

/// Canonical coherent-state amplitudes `e^{−|z|²/2} zⁿ/√n!` by recursion.
pub fn canonical_coefficients(z: Complex64, dim: usize) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(dim);
    let mut term = Complex64::new((-0.5 * z.norm_sqr()).exp(), 0.0);
    for n in 0..dim {
        if n > 0 {
            term *= z / (n as f64).sqrt();
        }
        out.push(term);
    }
    out
}

/// `max_n |a_n e^{iφ} − b_n|` with the best global phase `φ`.
pub fn aligned_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let s: Complex64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    let phase = s / s.norm();
    a.iter().zip(b).map(|(x, y)| (x * phase - y).norm()).fold(0.0, f64::max)
}

/// `(1/2π) ∫_0^u T(H) dH / sqrt(2(u − H))` with `T` frozen at cell midpoints
/// and the kernel integrated exactly on each cell.
pub fn abel_product_midpoint(period: impl Fn(f64) -> f64, u: f64, cells: usize) -> f64 {
    let h = u / cells as f64;
    let kernel = |x: f64| (2.0 * (u - x).max(0.0)).sqrt();
    let mut sum = 0.0;
    for j in 0..cells {
        let (a, b) = (j as f64 * h, (j + 1) as f64 * h);
        sum += period(0.5 * (a + b)) * (kernel(a) - kernel(b));
    }
    sum / std::f64::consts::TAU
}

/// Well of the diagonal model (ω = 1): `u(Q) = tan²(√(2λ)Q)/(4λ)`.
pub fn diagonal_well(lambda: f64, q: f64) -> f64 {
    ((2.0 * lambda).sqrt() * q).tan().powi(2) / (4.0 * lambda)
}

/// Period of the diagonal model (ω = 1): `2π/sqrt(1 + 4λH)`.
pub fn diagonal_period(lambda: f64, energy: f64) -> f64 {
    std::f64::consts::TAU / (1.0 + 4.0 * lambda * energy).sqrt()
}

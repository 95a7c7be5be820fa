//! Monotone piecewise-cubic Hermite interpolation (PCHIP).
//!
//! Slopes follow Fritsch–Butland: a weighted harmonic mean of neighbouring
//! secants, zero at local extrema, so monotone data stays monotone.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        Self::with_start_slope(x, y, None)
    }

    /// Like [`Pchip::new`] but pins the slope at the first knot.
    pub fn with_start_slope(x: Vec<f64>, y: Vec<f64>, start: Option<f64>) -> Result<Self> {
        if x.len() != y.len() || x.len() < 2 {
            return Err(Error::DegenerateGrid(format!(
                "interpolation needs ≥ 2 matching knots, got {} x and {} y",
                x.len(),
                y.len()
            )));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("interpolation knots".into()));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::NonMonotone("interpolation abscissae must increase strictly".into()));
        }
        let n = x.len();
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = delta[0];
            d[1] = delta[0];
        } else {
            for k in 1..n - 1 {
                let (a, b) = (delta[k - 1], delta[k]);
                if a == 0.0 || b == 0.0 || a.signum() != b.signum() {
                    d[k] = 0.0;
                } else {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    d[k] = (w1 + w2) / (w1 / a + w2 / b);
                }
            }
            d[0] = edge_slope(h[0], h[1], delta[0], delta[1]);
            d[n - 1] = edge_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        if let Some(s) = start {
            d[0] = s;
        }
        Ok(Self { x, y, d })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], *self.x.last().unwrap())
    }

    pub fn knots(&self) -> &[f64] {
        &self.x
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    fn segment(&self, t: f64) -> usize {
        let k = self.x.partition_point(|&v| v <= t);
        k.saturating_sub(1).min(self.x.len() - 2)
    }

    /// Interpolated value; outside the knot range the edge cubic is extended.
    pub fn value(&self, t: f64) -> f64 {
        let k = self.segment(t);
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.y[k] + h10 * h * self.d[k] + h01 * self.y[k + 1] + h11 * h * self.d[k + 1]
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let k = self.segment(t);
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let s2 = s * s;
        let dh00 = (6.0 * s2 - 6.0 * s) / h;
        let dh10 = 3.0 * s2 - 4.0 * s + 1.0;
        let dh01 = (-6.0 * s2 + 6.0 * s) / h;
        let dh11 = 3.0 * s2 - 2.0 * s;
        dh00 * self.y[k] + dh10 * self.d[k] + dh01 * self.y[k + 1] + dh11 * self.d[k + 1]
    }

    /// Solves `value(t) = target` for increasing data within the knot range.
    pub fn inverse(&self, target: f64) -> Result<f64> {
        let (lo, hi) = (self.y[0], *self.y.last().unwrap());
        if !(lo..=hi).contains(&target) {
            return Err(Error::OutOfRange { value: target, min: lo, max: hi });
        }
        let k = self.y.partition_point(|&v| v <= target).saturating_sub(1).min(self.y.len() - 2);
        let (mut a, mut b) = (self.x[k], self.x[k + 1]);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            if self.value(m) < target {
                a = m;
            } else {
                b = m;
            }
        }
        Ok(0.5 * (a + b))
    }
}

fn edge_slope(h0: f64, h1: f64, m0: f64, m1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
    if d.signum() != m0.signum() || m0 == 0.0 {
        0.0
    } else if m0.signum() != m1.signum() && d.abs() > 3.0 * m0.abs() {
        3.0 * m0
    } else {
        d
    }
}

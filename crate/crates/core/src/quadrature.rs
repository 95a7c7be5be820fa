//! Gauss–Legendre rules on `[-1, 1]` and composite panel integration.

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;

/// Node/weight pairs of an `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct Rule {
    pairs: Vec<(f64, f64)>,
}

impl Rule {
    pub fn new(nodes: usize) -> Self {
        let n = NonZeroUsize::new(nodes.max(1)).unwrap();
        let rule = GaussLegendre::new(n);
        let mut pairs = rule.as_node_weight_pairs().to_vec();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self { pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Nodes and weights mapped onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        self.pairs.iter().map(move |&(x, w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let mut acc = Neumaier::default();
        for (x, w) in self.mapped(a, b) {
            acc.add(w * f(x));
        }
        acc.sum()
    }

    /// Composite rule over `panels` equal sub-intervals of `[a, b]`.
    pub fn composite<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, panels: usize, mut f: F) -> f64 {
        let panels = panels.max(1);
        let h = (b - a) / panels as f64;
        let mut acc = Neumaier::default();
        for k in 0..panels {
            let lo = a + k as f64 * h;
            let hi = if k + 1 == panels { b } else { lo + h };
            for (x, w) in self.mapped(lo, hi) {
                acc.add(w * f(x));
            }
        }
        acc.sum()
    }

    /// Composite rule over the sub-intervals delimited by `breaks`
    /// (ascending, at least two entries).
    pub fn over_breaks<F: FnMut(f64) -> f64>(&self, breaks: &[f64], mut f: F) -> f64 {
        let mut acc = Neumaier::default();
        for w in breaks.windows(2) {
            if w[1] > w[0] {
                for (x, wt) in self.mapped(w[0], w[1]) {
                    acc.add(wt * f(x));
                }
            }
        }
        acc.sum()
    }
}

/// Neumaier's compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn sum(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for Neumaier {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Neumaier::default();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

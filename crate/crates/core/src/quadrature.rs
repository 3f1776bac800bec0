//! Composite Gauss–Legendre quadrature on intervals.

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;

/// Gauss–Legendre rule of fixed order repeated over equal panels.
#[derive(Debug, Clone)]
pub struct CompositeGauss {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    panels: usize,
}

impl CompositeGauss {
    /// `order` nodes per panel (at least 1), `panels` equal subintervals.
    pub fn new(order: usize, panels: usize) -> Self {
        let order = NonZeroUsize::new(order.max(1)).expect("order >= 1");
        let rule = GaussLegendre::new(order);
        let (nodes, weights) = rule.as_node_weight_pairs().iter().copied().unzip();
        Self {
            nodes,
            weights,
            panels: panels.max(1),
        }
    }

    /// A rule resolving `sin(pi k s / len)` products up to `max_frequency`
    /// with at least four nodes per half-wave.
    pub fn for_frequency(order: usize, max_frequency: usize) -> Self {
        let order = order.max(2);
        let needed = 4 * max_frequency.max(1);
        let panels = needed.div_ceil(order).max(1);
        Self::new(order, panels)
    }

    pub fn total_nodes(&self) -> usize {
        self.nodes.len() * self.panels
    }

    /// Nodes and weights mapped onto `[a, b]`.
    pub fn points(&self, a: f64, b: f64) -> Vec<(f64, f64)> {
        let h = (b - a) / self.panels as f64;
        let mut out = Vec::with_capacity(self.total_nodes());
        for p in 0..self.panels {
            let lo = a + h * p as f64;
            let mid = lo + 0.5 * h;
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                out.push((mid + 0.5 * h * x, 0.5 * h * w));
            }
        }
        out
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.points(a, b).into_iter().map(|(s, w)| w * f(s)).sum()
    }
}

/// Composite Simpson rule on equally spaced samples (odd sample count).
pub fn simpson(samples: &[f64], h: f64) -> f64 {
    let m = samples.len();
    assert!(m >= 3 && m % 2 == 1, "simpson needs an odd number (>= 3) of samples");
    let mut acc = samples[0] + samples[m - 1];
    for (i, v) in samples.iter().enumerate().take(m - 1).skip(1) {
        acc += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    acc * h / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_oscillatory_product() {
        let q = CompositeGauss::for_frequency(16, 40);
        let v = q.integrate(0.0, 1.0, |s| {
            (std::f64::consts::PI * 20.0 * s).sin().powi(2)
        });
        assert!((v - 0.5).abs() < 1e-13);
    }

    #[test]
    fn simpson_is_exact_for_cubics() {
        let h = 0.1;
        let xs: Vec<f64> = (0..11).map(|i| (i as f64 * h).powi(3)).collect();
        assert!((simpson(&xs, h) - 0.25).abs() < 1e-14);
    }
}

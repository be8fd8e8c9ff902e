//! Gauss–Legendre quadrature on bounded intervals.

use std::sync::OnceLock;

/// Number of nodes used for every integral over a continuous confounder.
pub const NODES: usize = 256;

/// Nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Computes the rule by Newton iteration on P_n starting from the
    /// Tricomi approximation of each root.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "quadrature needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    /// Shared 256-node rule.
    pub fn standard() -> &'static GaussLegendre {
        static RULE: OnceLock<GaussLegendre> = OnceLock::new();
        RULE.get_or_init(|| GaussLegendre::new(NODES))
    }

    /// Nodes and weights mapped onto `[lo, hi]`.
    pub fn mapped(&self, lo: f64, hi: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate(&self, lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
        self.mapped(lo, hi).map(|(x, w)| w * f(x)).sum()
    }
}

/// P_n(x) and P_n'(x) by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Splits `[lo, hi]` at every breakpoint strictly inside it and returns
/// probability weights (summing to 1) for a uniform law on the interval.
pub fn piecewise_uniform_nodes(lo: f64, hi: f64, breaks: &[f64]) -> Vec<(f64, f64)> {
    let rule = GaussLegendre::standard();
    let width = hi - lo;
    let mut cuts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|b| b.is_finite() && *b > lo && *b < hi)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * width.max(1.0));
    let mut edges = Vec::with_capacity(cuts.len() + 2);
    edges.push(lo);
    edges.extend(cuts);
    edges.push(hi);
    let mut out = Vec::with_capacity((edges.len() - 1) * NODES);
    for pair in edges.windows(2) {
        if pair[1] - pair[0] <= 0.0 {
            continue;
        }
        out.extend(rule.mapped(pair[0], pair[1]).map(|(x, w)| (x, w / width)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two() {
        let rule = GaussLegendre::standard();
        let s: f64 = rule.weights.iter().sum();
        assert!((s - 2.0).abs() < 1e-13, "{s}");
        assert_eq!(rule.nodes.len(), NODES);
    }

    #[test]
    fn exact_for_high_degree_polynomials() {
        let rule = GaussLegendre::standard();
        // integral of x^k over [0, 1] is 1/(k+1)
        for k in [0, 1, 2, 7, 50, 200, 511] {
            let v = rule.integrate(0.0, 1.0, |x| x.powi(k));
            let exact = 1.0 / (k as f64 + 1.0);
            assert!((v - exact).abs() < 1e-13, "k={k}: {v} vs {exact}");
        }
    }

    #[test]
    fn smooth_transcendental_integrand() {
        let rule = GaussLegendre::standard();
        let v = rule.integrate(-2.0, 3.0, |x| 1.0 / (1.0 + (-x).exp()));
        // antiderivative of expit is ln(1 + e^x)
        let exact = (1.0 + 3f64.exp()).ln() - (1.0 + (-2f64).exp()).ln();
        assert!((v - exact).abs() < 1e-13);
    }

    #[test]
    fn small_rule_matches_known_nodes() {
        let rule = GaussLegendre::new(3);
        let r = (0.6f64).sqrt();
        assert!((rule.nodes[0] + r).abs() < 1e-15);
        assert!(rule.nodes[1].abs() < 1e-15);
        assert!((rule.weights[1] - 8.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn piecewise_nodes_integrate_indicators_exactly() {
        let nodes = piecewise_uniform_nodes(0.0, 1.0, &[0.4, 0.7, 5.0]);
        let total: f64 = nodes.iter().map(|(_, w)| w).sum();
        assert!((total - 1.0).abs() < 1e-14);
        let mass: f64 = nodes
            .iter()
            .filter(|(u, _)| (0.4..0.7).contains(u))
            .map(|(u, w)| w * (1.0 + u))
            .sum();
        // E[(1 + U) 1{0.4 <= U < 0.7}] for U ~ Uniform(0, 1)
        assert!((mass - (0.3 + 0.5 * (0.49 - 0.16))).abs() < 1e-14);
    }
}

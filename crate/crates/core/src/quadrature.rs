//! Gauss–Legendre rules and graded panel layouts on parameter intervals.

use std::sync::OnceLock;

/// Nodes and weights of an `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds the rule by Newton iteration on the Legendre polynomial `P_n`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            // Tricomi initial guess, then Newton.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    let (_, d) = legendre_with_derivative(n, x);
                    dp = d;
                    break;
                }
            }
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

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Calls `f(s, w)` for each node mapped to `[a, b]`.
    #[inline]
    pub fn for_each_node(&self, a: f64, b: f64, mut f: impl FnMut(f64, f64)) {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            f(mid + half * x, half * w);
        }
    }

    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let mut acc = 0.0;
        self.for_each_node(a, b, |s, w| acc += w * f(s));
        acc
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

/// The 16-point rule used by every panel quadrature in the crate.
pub fn gl16() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(16))
}

/// Splits `[a, b]` into panels graded toward the points in `foci`.
///
/// A panel is bisected while it is wider than `max_width`, or while it is wider
/// than `min_width` and wider than its distance to the nearest focus. Panels are
/// returned in increasing order.
pub fn graded_panels(a: f64, b: f64, foci: &[f64], min_width: f64, max_width: f64) -> Vec<(f64, f64)> {
    assert!(b > a);
    let mut out = Vec::new();
    let mut stack = vec![(a, b)];
    while let Some((lo, hi)) = stack.pop() {
        let w = hi - lo;
        let dist = foci
            .iter()
            .map(|&c| {
                if c < lo {
                    lo - c
                } else if c > hi {
                    c - hi
                } else {
                    0.0
                }
            })
            .fold(f64::INFINITY, f64::min);
        let split = w > max_width || (w > min_width && w > dist);
        if split {
            let mid = 0.5 * (lo + hi);
            // push right first so that the left half is processed first
            stack.push((mid, hi));
            stack.push((lo, mid));
        } else {
            out.push((lo, hi));
        }
    }
    out
}

/// Composite 16-point Gauss–Legendre sum of `f` over the given panels.
pub fn integrate_panels(panels: &[(f64, f64)], mut f: impl FnMut(f64) -> f64) -> f64 {
    let rule = gl16();
    panels.iter().map(|&(a, b)| rule.integrate(a, b, &mut f)).sum()
}

/// Integrates `g(σ)·σ^{-λ}`-type integrands over `σ ∈ [0, len]`, where `σ` is the
/// distance to the singular endpoint: geometric panels toward `0` down to `h_min`,
/// plus the leading-order term `g0 · h_min^{1-λ} / (1-λ)` for the innermost piece.
/// Passing `σ` rather than an absolute parameter keeps the integrand free of
/// cancellation near the singularity.
pub fn integrate_endpoint_singular(
    len: f64,
    lambda: f64,
    g0: f64,
    h_min: f64,
    max_width: f64,
    f: impl FnMut(f64) -> f64,
) -> f64 {
    debug_assert!(lambda < 1.0);
    if h_min >= len {
        return g0 * len.powf(1.0 - lambda) / (1.0 - lambda);
    }
    let panels = graded_panels(h_min, len, &[0.0], 0.0, max_width);
    integrate_panels(&panels, f) + g0 * h_min.powf(1.0 - lambda) / (1.0 - lambda)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl16_integrates_polynomials_exactly() {
        let rule = gl16();
        assert_eq!(rule.len(), 16);
        let w: f64 = rule.weights.iter().sum();
        assert!((w - 2.0).abs() < 1e-14);
        // degree 31 is the exactness limit
        let v = rule.integrate(0.0, 1.0, |x| x.powi(31));
        assert!((v - 1.0 / 32.0).abs() < 1e-15);
        let v = rule.integrate(-1.0, 2.0, |x| 3.0 * x * x - x + 4.0);
        assert!((v - (9.0 - 1.5 + 12.0)).abs() < 1e-13);
    }

    #[test]
    fn nodes_are_sorted_and_symmetric() {
        let rule = GaussLegendre::new(7);
        for i in 0..7 {
            assert!((rule.nodes[i] + rule.nodes[6 - i]).abs() < 1e-15);
        }
        assert!(rule.nodes.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn graded_panels_cover_interval_and_refine_toward_focus() {
        let panels = graded_panels(0.0, 1.0, &[0.0], 1e-6, 0.25);
        assert_eq!(panels.first().unwrap().0, 0.0);
        assert_eq!(panels.last().unwrap().1, 1.0);
        for w in panels.windows(2) {
            assert_eq!(w[0].1, w[1].0);
        }
        let first = panels[0].1 - panels[0].0;
        assert!(first <= 1e-6);
        assert!(panels.iter().all(|p| p.1 - p.0 <= 0.25));
    }

    #[test]
    fn endpoint_singular_square_root() {
        // ∫_0^1 σ^{-1/2} dσ = 2
        let v = integrate_endpoint_singular(1.0, 0.5, 1.0, 1e-14, 0.25, |s| s.powf(-0.5));
        assert!((v - 2.0).abs() < 1e-12, "{v}");
        // ∫_0^1 σ^{-1/2} (1 + σ) dσ = 2 + 2/3
        let v = integrate_endpoint_singular(1.0, 0.5, 1.0, 1e-14, 0.25, |s| s.powf(-0.5) * (1.0 + s));
        assert!((v - 8.0 / 3.0).abs() < 1e-12, "{v}");
    }
}

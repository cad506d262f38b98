//! Geometric boundary constants as grid sups over base points `x'` and radii `s`:
//!
//! * `c'(lambda)    = sup_x' ∫ |x' - y|^{-lambda} dσ_y`, `lambda < 1`;
//! * `c''(lambda)   = sup s^{lambda - 1} ∫_{B(x', s)} |x' - y|^{-lambda} dσ_y`, `lambda < 1`;
//! * `c'''(lambda)  = sup s^{lambda - 1} ∫_{outside B(x', s)} |x' - y|^{-lambda} dσ_y`, `lambda > 1`;
//! * `c^iv          = sup |ln s|^{-1} ∫_{outside B(x', s)} |x' - y|^{-1} dσ_y`, `s < 1/e`.
//!
//! Integrals run over the parameter frame `[s', s' + 2π]`. Pieces touching the
//! singular point are graded geometrically down to `1e-14` in parameter, and the
//! innermost sliver is replaced by its leading term `g0 h^{1 - lambda} / (1 - lambda)`.

use std::f64::consts::{E, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundary::{BandSegment, Boundary, DistanceProfile};
use crate::error::{Error, Result};
use crate::quadrature::{graded_panels, integrate_endpoint_singular, integrate_panels};

const MAX_WIDTH: f64 = TAU / 64.0;
const H_MIN: f64 = 1e-14;
pub const DEFAULT_X_NODES: usize = 512;
const GOLDEN_STEPS: usize = 30;

/// A grid sup together with where it was attained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantEstimate {
    pub value: f64,
    pub argmax_node: usize,
    /// Radius of the maximizer, when the constant has one.
    pub argmax_s: Option<f64>,
    pub x_nodes: usize,
    pub s_count: usize,
}

/// `n` log-spaced radii from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// Radii `[1e-6, diam]` for `c''` and `c'''`.
pub fn default_s_grid(b: &Boundary, n: usize) -> Vec<f64> {
    log_grid(1e-6, b.diameter(), n)
}

/// Radii `[1e-6, 0.36]` for `c^iv`.
pub fn default_s_grid_iv(n: usize) -> Vec<f64> {
    log_grid(1e-6, 0.36, n)
}

/// `∫ |x' - y|^{-lambda} dσ_y` over one parameter piece of the frame starting at `s0`.
fn piece_integral(b: &Boundary, s0: f64, seg: &BandSegment, lambda: f64) -> f64 {
    let g0 = b.dparam(s0).norm().powf(1.0 - lambda);
    // forward (+1) or backward (-1) from the singular point
    let from_end = |dir: f64, len: f64| {
        integrate_endpoint_singular(len, lambda, g0, H_MIN, MAX_WIDTH, |sig| {
            let u = dir * sig;
            b.chord(s0, u).norm().powf(-lambda) * b.dparam(s0 + u).norm()
        })
    };
    let left = seg.a == s0;
    let right = seg.b == s0 + TAU;
    match (left, right) {
        (true, true) => from_end(1.0, 0.5 * TAU) + from_end(-1.0, 0.5 * TAU),
        (true, false) => from_end(1.0, seg.b - seg.a),
        (false, true) => from_end(-1.0, seg.b - seg.a),
        (false, false) => {
            let f = |u: f64| b.chord(s0, u - s0).norm().powf(-lambda) * b.dparam(u).norm();
            integrate_panels(&graded_panels(seg.a, seg.b, &[s0, s0 + TAU], 0.0, MAX_WIDTH), f)
        }
    }
}

/// `∫_{B(x', rho)} |x' - y|^{-lambda} dσ` (`inside`) or over the complement.
pub fn ball_integral(b: &Boundary, s0: f64, lambda: f64, rho: f64, inside: bool) -> f64 {
    let prof = DistanceProfile::new(b, b.param(s0), s0);
    band_integral(b, &prof, lambda, rho, inside)
}

fn band_integral(b: &Boundary, prof: &DistanceProfile, lambda: f64, rho: f64, inside: bool) -> f64 {
    let want = if inside { 0 } else { 1 };
    prof.partition(b, &[rho])
        .iter()
        .filter(|seg| seg.band == want)
        .map(|seg| piece_integral(b, prof.s0, seg, lambda))
        .sum()
}

fn x_params(n: usize) -> Vec<f64> {
    (0..n).map(|i| TAU * i as f64 / n as f64).collect()
}

/// Deterministic argmax, ties to the lowest index.
fn reduce(values: Vec<(f64, Option<f64>)>, s_count: usize) -> ConstantEstimate {
    let mut best = ConstantEstimate {
        value: f64::NEG_INFINITY,
        argmax_node: 0,
        argmax_s: None,
        x_nodes: values.len(),
        s_count,
    };
    for (i, (v, s)) in values.into_iter().enumerate() {
        if v > best.value {
            best.value = v;
            best.argmax_node = i;
            best.argmax_s = s;
        }
    }
    best
}

/// Golden-section search for a maximum of `f` on `[a, b]`.
fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..GOLDEN_STEPS {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (fc, c)
    } else {
        (fd, d)
    }
}

/// Sup over `(x', s)` of `weight(s) · ∫_{band} |x' - y|^{-lambda}`, refined in `s`
/// around the grid maximum of each `x'`.
fn sup_over_grid(
    b: &Boundary,
    n_x: usize,
    s_grid: &[f64],
    lambda: f64,
    inside: bool,
    weight: impl Fn(f64) -> f64 + Sync,
) -> ConstantEstimate {
    let values: Vec<(f64, Option<f64>)> = x_params(n_x)
        .par_iter()
        .map(|&s0| {
            let prof = DistanceProfile::new(b, b.param(s0), s0);
            let g = |s: f64| weight(s) * band_integral(b, &prof, lambda, s, inside);
            let mut best = (f64::NEG_INFINITY, None);
            let mut at = 0;
            for (k, &s) in s_grid.iter().enumerate() {
                let v = g(s);
                if v > best.0 {
                    best = (v, Some(s));
                    at = k;
                }
            }
            let lo = s_grid[at.saturating_sub(1)].min(s_grid[at]);
            let hi = s_grid[(at + 1).min(s_grid.len() - 1)].max(s_grid[at]);
            if hi > lo {
                let (v, s) = golden_max(|u| g(u.exp()), lo.ln(), hi.ln());
                if v > best.0 {
                    best = (v, Some(s.exp()));
                }
            }
            best
        })
        .collect();
    reduce(values, s_grid.len())
}

pub fn compute_c_prime(b: &Boundary, lambda: f64) -> Result<ConstantEstimate> {
    compute_c_prime_with(b, lambda, DEFAULT_X_NODES)
}

pub fn compute_c_prime_with(b: &Boundary, lambda: f64, n_x: usize) -> Result<ConstantEstimate> {
    if !(lambda < 1.0) {
        return Err(Error::Domain(format!(
            "c' needs lambda < n - 1 = 1 for |x - y|^(-lambda) to be integrable, got {lambda}"
        )));
    }
    let values: Vec<(f64, Option<f64>)> = x_params(n_x)
        .par_iter()
        .map(|&s0| {
            let whole = BandSegment {
                a: s0,
                b: s0 + TAU,
                band: 0,
            };
            (piece_integral(b, s0, &whole, lambda), None)
        })
        .collect();
    Ok(reduce(values, 0))
}

pub fn compute_c_dprime(b: &Boundary, lambda: f64, s_grid: &[f64]) -> Result<ConstantEstimate> {
    compute_c_dprime_with(b, lambda, s_grid, DEFAULT_X_NODES)
}

pub fn compute_c_dprime_with(b: &Boundary, lambda: f64, s_grid: &[f64], n_x: usize) -> Result<ConstantEstimate> {
    if !(lambda < 1.0) {
        return Err(Error::Domain(format!("c'' needs lambda < n - 1 = 1, got {lambda}")));
    }
    check_radii(s_grid)?;
    Ok(sup_over_grid(b, n_x, s_grid, lambda, true, |s| s.powf(lambda - 1.0)))
}

pub fn compute_c_tprime(b: &Boundary, lambda: f64, s_grid: &[f64]) -> Result<ConstantEstimate> {
    compute_c_tprime_with(b, lambda, s_grid, DEFAULT_X_NODES)
}

pub fn compute_c_tprime_with(b: &Boundary, lambda: f64, s_grid: &[f64], n_x: usize) -> Result<ConstantEstimate> {
    if !(lambda > 1.0) {
        return Err(Error::Domain(format!("c''' needs lambda > n - 1 = 1, got {lambda}")));
    }
    check_radii(s_grid)?;
    Ok(sup_over_grid(b, n_x, s_grid, lambda, false, |s| s.powf(lambda - 1.0)))
}

pub fn compute_c_iv(b: &Boundary, s_grid: &[f64]) -> Result<ConstantEstimate> {
    compute_c_iv_with(b, s_grid, DEFAULT_X_NODES)
}

pub fn compute_c_iv_with(b: &Boundary, s_grid: &[f64], n_x: usize) -> Result<ConstantEstimate> {
    check_radii(s_grid)?;
    if let Some(s) = s_grid.iter().find(|&&s| s >= 1.0 / E) {
        return Err(Error::Domain(format!("c^iv needs every s in (0, 1/e), got {s}")));
    }
    Ok(sup_over_grid(b, n_x, s_grid, 1.0, false, |s| 1.0 / s.ln().abs()))
}

/// `|ln s|^{-1} ∫_{outside B(x', s)} |x' - y|^{-1} dσ` at one base parameter.
pub fn c_iv_ratio_at(b: &Boundary, s0: f64, s: f64) -> f64 {
    ball_integral(b, s0, 1.0, s, false) / s.ln().abs()
}

/// Unit-circle closed form of the `c^iv` ratio: `2 ln cot(phi_s / 4) / |ln s|`
/// with the chord condition `2 sin(phi_s / 2) = s`.
pub fn circle_c_iv_ratio(s: f64) -> f64 {
    let phi = 2.0 * (0.5 * s).asin();
    2.0 * (1.0 / (0.25 * phi).tan()).ln() / s.ln().abs()
}

fn check_radii(s_grid: &[f64]) -> Result<()> {
    if s_grid.is_empty() || s_grid.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
        return Err(Error::Domain("radius grid must be nonempty and positive".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::GaussLegendre;

    /// `∫ (2 sin(phi/2))^{-lambda} dphi` over `[p0, p1]` by substitution `phi = p0 + v^m`.
    fn chord_oracle(lambda: f64, p0: f64, p1: f64) -> f64 {
        let rule = GaussLegendre::new(64);
        let m = 4.0;
        let top = (p1 - p0).powf(1.0 / m);
        let n = 200;
        let mut total = 0.0;
        for i in 0..n {
            let (a, c) = (top * i as f64 / n as f64, top * (i + 1) as f64 / n as f64);
            total += rule.integrate(a, c, |v| {
                let phi = p0 + v.powf(m);
                (2.0 * (0.5 * phi).sin()).powf(-lambda) * m * v.powf(m - 1.0)
            });
        }
        total
    }

    #[test]
    fn c_prime_examples() {
        let b = Boundary::unit_circle();
        assert!((compute_c_prime_with(&b, 0.0, 16).unwrap().value - TAU).abs() < 1e-8);
        let half = compute_c_prime_with(&b, 0.5, 16).unwrap().value;
        let oracle = 2.0 * chord_oracle(0.5, 0.0, std::f64::consts::PI);
        assert!((half - oracle).abs() < 1e-6, "{half} vs {oracle}");
        let big = Boundary::circle(3.0).unwrap();
        let scaled = compute_c_prime_with(&big, 0.5, 16).unwrap().value;
        assert!((scaled / half - 3f64.powf(0.5)).abs() < 1e-8 * 3f64.sqrt());
        assert!(matches!(compute_c_prime(&b, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn c_dprime_matches_chord_oracle() {
        let b = Boundary::unit_circle();
        for (lambda, s) in [(0.5f64, 1e-3f64), (0.5, 0.5), (0.0, 0.2), (-1.0, 0.1)] {
            let got = s.powf(lambda - 1.0) * ball_integral(&b, 0.0, lambda, s, true);
            let phi = 2.0 * (0.5 * s).asin();
            let want = s.powf(lambda - 1.0) * 2.0 * chord_oracle(lambda, 0.0, phi);
            assert!((got - want).abs() < 1e-9 * want, "{lambda} {s}: {got} vs {want}");
        }
        let whole = ball_integral(&b, 0.0, 0.0, 3.0, true);
        assert!((whole - TAU).abs() < 1e-9);
    }

    #[test]
    fn c_tprime_circle_limit() {
        let b = Boundary::unit_circle();
        let grid = log_grid(1e-6, 1e-2, 5);
        let c = compute_c_tprime_with(&b, 2.0, &grid, 8).unwrap();
        assert!(c.value >= 1.9 && c.value <= 2.6, "{}", c.value);
        // exact: s cot(phi_s / 2) = 2 sqrt(1 - s^2 / 4)
        let s = 1e-2;
        let got = s * ball_integral(&b, 0.0, 2.0, s, false);
        assert!((got - 2.0 * (1.0 - s * s / 4.0).sqrt()).abs() < 1e-9);
        assert_eq!(ball_integral(&b, 0.0, 2.0, 2.5, false), 0.0);
        assert!(compute_c_tprime(&b, 1.0, &grid).is_err());
    }

    #[test]
    fn c_iv_against_closed_form() {
        let b = Boundary::unit_circle();
        for s in [1e-6, 1e-4, 1e-2, 0.3] {
            let got = c_iv_ratio_at(&b, 0.0, s);
            assert!((got - circle_c_iv_ratio(s)).abs() < 1e-9, "{s}: {got}");
        }
        assert!(compute_c_iv(&b, &[0.1, 0.5]).is_err());
        let mut last = f64::INFINITY;
        for s in log_grid(1e-6, 0.3, 12) {
            let v = ball_integral(&b, 0.0, 1.0, s, false);
            assert!(v < last);
            last = v;
        }
    }
}

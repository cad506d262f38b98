//! Coordinate cylinders: the boundary near `p` as a graph over its tangent line.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::Boundary;
use crate::error::{Error, Result};
use crate::vec2::Vec2;

/// Half the number of graph samples on each side of `eta = 0`.
const HALF_SAMPLES: usize = 128;

/// `C(p, R_p, r, delta)`. In the rotated frame `z = R_p (x - p)` the tangent at `p`
/// is the first axis and the inward normal the second, so the boundary is
/// `{zeta = gamma(eta)}` with `Omega` above it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinateCylinder {
    pub p: Vec2,
    pub p_param: f64,
    pub rotation: [[f64; 2]; 2],
    pub r: f64,
    pub delta: f64,
    pub eta: Vec<f64>,
    pub gamma_samples: Vec<f64>,
    pub sup_gamma_prime: f64,
    /// `sup |gamma'| <= 1/3`.
    pub uniform_bound_holds: bool,
    /// Largest distance from a reconstructed graph point to the curve.
    pub max_residual: f64,
}

impl CoordinateCylinder {
    /// `R_p (x - p)`.
    pub fn to_local(&self, x: Vec2) -> Vec2 {
        let d = x - self.p;
        let m = self.rotation;
        Vec2::new(m[0][0] * d.x + m[0][1] * d.y, m[1][0] * d.x + m[1][1] * d.y)
    }

    /// `p + R_p^T z`.
    pub fn to_global(&self, z: Vec2) -> Vec2 {
        let m = self.rotation;
        self.p + Vec2::new(m[0][0] * z.x + m[1][0] * z.y, m[0][1] * z.x + m[1][1] * z.y)
    }

    /// Whether `x` lies in the open box `|eta| < r, |zeta| < delta`.
    pub fn contains(&self, x: Vec2) -> bool {
        let z = self.to_local(x);
        z.x.abs() < self.r && z.y.abs() < self.delta
    }

    /// Graph value at a sampled `eta` closest to the argument.
    pub fn gamma_near(&self, eta: f64) -> f64 {
        let k = self
            .eta
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - eta).abs().total_cmp(&(b.1 - eta).abs()))
            .map(|(k, _)| k)
            .unwrap_or(0);
        self.gamma_samples[k]
    }
}

pub fn extract_cylinder(b: &Boundary, p_param: f64, r: f64, delta: f64) -> Result<CoordinateCylinder> {
    if !(r > 0.0 && delta > 0.0 && r < delta) {
        return Err(Error::Domain(format!("need 0 < r < delta, got r = {r}, delta = {delta}")));
    }
    let p = b.param(p_param);
    let tan = b.tangent(p_param);
    let inward = tan.perp();
    let local = |s: f64| {
        let d = b.param(s) - p;
        Vec2::new(tan.dot(d), inward.dot(d))
    };
    let not_graph = |why: &str| {
        Error::Geometry(format!("boundary is not a graph over the tangent at this scale ({why}); use a smaller r"))
    };

    // walk away from p while eta stays monotone, until |eta| exceeds r
    let h = TAU / 8192.0;
    let mut bracket = [p_param, p_param];
    for (slot, dir) in [(0usize, -1.0f64), (1, 1.0)] {
        let mut k = 1;
        loop {
            let s = p_param + dir * k as f64 * h;
            if tan.dot(b.dparam(s)) <= 0.0 {
                return Err(not_graph("tangent turns back"));
            }
            let z = local(s);
            if z.y.abs() >= 0.5 * delta {
                return Err(not_graph("|gamma| reaches delta / 2"));
            }
            if z.x.abs() > r {
                bracket[slot] = s;
                break;
            }
            k += 1;
            if k as f64 * h > 0.5 * TAU {
                return Err(not_graph("arc exhausted"));
            }
        }
    }

    let solve = |eta: f64| {
        let (mut lo, mut hi) = (bracket[0], bracket[1]);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if local(mid).x < eta {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-15 {
                break;
            }
        }
        0.5 * (lo + hi)
    };
    let slope = |s: f64| {
        let d = b.dparam(s);
        inward.dot(d) / tan.dot(d)
    };

    let m = HALF_SAMPLES;
    let mut eta = Vec::with_capacity(2 * m + 1);
    let mut gamma = Vec::with_capacity(2 * m + 1);
    let mut sup_gp = slope(solve(-r)).abs().max(slope(solve(r)).abs());
    let mut max_residual = 0.0f64;
    for k in 0..=(2 * m) {
        let e = r * (k as f64 - m as f64) / (m as f64 + 1.0);
        let s = if k == m { p_param } else { solve(e) };
        let z = local(s);
        let g = if k == m { 0.0 } else { z.y };
        sup_gp = sup_gp.max(slope(s).abs());
        eta.push(e);
        gamma.push(g);
        if g.abs() >= 0.5 * delta {
            return Err(not_graph("|gamma| reaches delta / 2"));
        }
        let back = p + tan * e + inward * g;
        max_residual = max_residual.max(b.distance(back));
    }
    if max_residual > 1e-8 {
        return Err(not_graph("graph residual above 1e-8"));
    }

    // no other piece of the curve may enter the box
    let n = 8192;
    for i in 0..n {
        let s = TAU * i as f64 / n as f64;
        let rel = (s - bracket[0]).rem_euclid(TAU);
        if rel <= bracket[1] - bracket[0] {
            continue;
        }
        let z = local(s);
        if z.x.abs() < r && z.y.abs() < delta {
            return Err(not_graph("another arc enters the cylinder"));
        }
    }

    Ok(CoordinateCylinder {
        p,
        p_param,
        rotation: [[tan.x, tan.y], [inward.x, inward.y]],
        r,
        delta,
        eta,
        gamma_samples: gamma,
        sup_gamma_prime: sup_gp,
        uniform_bound_holds: sup_gp <= 1.0 / 3.0,
        max_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_cylinder_matches_closed_form() {
        let b = Boundary::unit_circle();
        let c = extract_cylinder(&b, 0.0, 0.2, 0.3).unwrap();
        assert_eq!(c.gamma_near(0.0), 0.0);
        for (e, g) in c.eta.iter().zip(&c.gamma_samples) {
            let exact = 1.0 - (1.0 - e * e).sqrt();
            assert!((g - exact).abs() < 1e-10, "{e}: {g} vs {exact}");
        }
        assert!((c.sup_gamma_prime - 0.2 / 0.96f64.sqrt()).abs() < 1e-9);
        assert!(c.uniform_bound_holds);
        let edge = 1.0 - (1.0f64 - 0.04).sqrt();
        assert!((edge - 0.0202).abs() < 1e-4);
        let det = c.rotation[0][0] * c.rotation[1][1] - c.rotation[0][1] * c.rotation[1][0];
        assert!((det - 1.0).abs() < 1e-14);
        let x = Vec2::new(0.9, 0.05);
        assert!((c.to_global(c.to_local(x)) - x).norm() < 1e-15);
    }

    #[test]
    fn gamma_vanishes_at_origin_everywhere() {
        let b = Boundary::ellipse(1.0, 0.5).unwrap();
        for k in 0..8 {
            let c = extract_cylinder(&b, k as f64 * 0.7, 0.05, 0.1).unwrap();
            assert!(c.gamma_near(0.0).abs() < 1e-10);
            assert!(c.max_residual < 1e-8);
        }
    }

    #[test]
    fn too_large_cylinder_is_rejected() {
        let b = Boundary::unit_circle();
        assert!(extract_cylinder(&b, 0.0, 1.5, 2.0).is_err());
        assert!(extract_cylinder(&b, 0.0, 0.3, 0.2).is_err());
    }
}

//! Off-boundary evaluation of `K[k, mu](x) = ∫ k(x - y) mu(y) dσ_y` and its gradient.
//!
//! The integrand is nearly singular when `x` is close to the curve. Integration runs
//! over the parameter frame `[s*, s* + 2π]` starting at the closest parameter `s*`,
//! on 16-point Gauss–Legendre panels that are bisected dyadically toward both ends
//! of the frame. Level `L` allows panels down to `h0 2^{-L}`; refinement stops once
//! the nearest panel is no longer than `dist(x, ∂Omega)` and two successive levels
//! agree to the tolerance.

mod scan;
mod split;

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::boundary::{Boundary, Side};
use crate::error::{Error, Result};
use crate::kernels::HomogeneousKernel;
use crate::quadrature::{gl16, graded_panels};
use crate::vec2::Vec2;

pub use scan::{gradient_scan, log_t_grid, GradientScan, ScanOptions};
pub use split::{fit_c_dprime, mu_integral, split_diagnostics, SplitConstants, SplitDiagnostics};

const BASE_PANELS: usize = 64;
const H0: f64 = TAU / BASE_PANELS as f64;
pub const MAX_LEVEL: usize = 24;

/// Built-in densities: `"const c"`, `"coord j"`, `"abs_coord j"` (`|y_j|`) and
/// `"trig m"` (`cos(m phi)` in the polar angle of `y`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum DensityKind {
    Const(f64),
    Coord(usize),
    AbsCoord(usize),
    Trig(u32),
}

impl fmt::Display for DensityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DensityKind::Const(c) => write!(f, "const {c}"),
            DensityKind::Coord(j) => write!(f, "coord {j}"),
            DensityKind::AbsCoord(j) => write!(f, "abs_coord {j}"),
            DensityKind::Trig(m) => write!(f, "trig {m}"),
        }
    }
}

impl FromStr for DensityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut it = s.split_whitespace();
        let (name, arg) = (it.next(), it.next());
        if it.next().is_some() {
            return Err(Error::Config(format!("bad density spec '{s}'")));
        }
        let bad = || Error::Config(format!("bad density spec '{s}'"));
        let axis = |a: Option<&str>| -> Result<usize> {
            match a.ok_or_else(bad)?.parse::<usize>() {
                Ok(j @ (1 | 2)) => Ok(j),
                _ => Err(bad()),
            }
        };
        match name {
            Some("const") => {
                let c: f64 = arg.ok_or_else(bad)?.parse().map_err(|_| bad())?;
                if !c.is_finite() {
                    return Err(bad());
                }
                Ok(DensityKind::Const(c))
            }
            Some("coord") => Ok(DensityKind::Coord(axis(arg)?)),
            Some("abs_coord") => Ok(DensityKind::AbsCoord(axis(arg)?)),
            Some("trig") => Ok(DensityKind::Trig(arg.ok_or_else(bad)?.parse().map_err(|_| bad())?)),
            _ => Err(bad()),
        }
    }
}

impl TryFrom<String> for DensityKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<DensityKind> for String {
    fn from(k: DensityKind) -> String {
        k.to_string()
    }
}

/// A Lipschitz density on a particular boundary, `scale · kind(y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Density {
    pub kind: DensityKind,
    pub scale: f64,
    pub label: String,
    /// Lipschitz constant with respect to ambient distance on the curve.
    pub lip_const: f64,
    pub sup_abs: f64,
    /// Parameters where the density has a kink.
    breaks: Vec<f64>,
}

impl Density {
    pub fn new(kind: DensityKind, b: &Boundary) -> Self {
        let mut d = Density {
            kind,
            scale: 1.0,
            label: kind.to_string(),
            lip_const: 0.0,
            sup_abs: 0.0,
            breaks: Vec::new(),
        };
        let n = 4096;
        let pts: Vec<Vec2> = (0..n).map(|i| b.param(TAU * i as f64 / n as f64)).collect();
        let vals: Vec<f64> = pts.iter().map(|&y| d.value(y)).collect();
        d.sup_abs = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        d.lip_const = match kind {
            DensityKind::Const(_) => 0.0,
            DensityKind::Coord(_) | DensityKind::AbsCoord(_) => 1.0,
            DensityKind::Trig(_) => {
                let mut lip = 0.0f64;
                for i in 0..n {
                    for k in 1..=64 {
                        let j = (i + k) % n;
                        lip = lip.max((vals[i] - vals[j]).abs() / (pts[i] - pts[j]).norm());
                    }
                }
                for i in (0..n).step_by(16) {
                    for j in ((i + 16)..n).step_by(16) {
                        lip = lip.max((vals[i] - vals[j]).abs() / (pts[i] - pts[j]).norm());
                    }
                }
                lip * (1.0 + 1e-3)
            }
        };
        if let DensityKind::AbsCoord(j) = kind {
            let h = TAU / n as f64;
            for i in 0..n {
                let (a, c) = (pts[i].component(j), pts[(i + 1) % n].component(j));
                if a == 0.0 {
                    d.breaks.push(i as f64 * h);
                } else if (a < 0.0) != (c < 0.0) && c != 0.0 {
                    let (mut lo, mut hi) = (i as f64 * h, (i + 1) as f64 * h);
                    for _ in 0..64 {
                        let mid = 0.5 * (lo + hi);
                        if (b.param(mid).component(j) < 0.0) == (a < 0.0) {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    d.breaks.push(0.5 * (lo + hi));
                }
            }
        }
        d
    }

    pub fn zero(b: &Boundary) -> Self {
        Density::new(DensityKind::Const(0.0), b)
    }

    /// `beta mu`.
    pub fn scaled(&self, beta: f64) -> Self {
        Density {
            scale: self.scale * beta,
            label: format!("{beta}*{}", self.label),
            lip_const: self.lip_const * beta.abs(),
            sup_abs: self.sup_abs * beta.abs(),
            ..self.clone()
        }
    }

    #[inline]
    pub fn value(&self, y: Vec2) -> f64 {
        let v = match self.kind {
            DensityKind::Const(c) => c,
            DensityKind::Coord(j) => y.component(j),
            DensityKind::AbsCoord(j) => y.component(j).abs(),
            DensityKind::Trig(m) => (m as f64 * y.y.atan2(y.x)).cos(),
        };
        self.scale * v
    }

    pub fn mu_at(&self, b: &Boundary, s: f64) -> f64 {
        self.value(b.param(s))
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breaks
    }

    /// `sup |mu| + Lip(mu)`.
    pub fn norm_c01(&self) -> f64 {
        self.sup_abs + self.lip_const
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.kind, DensityKind::Const(_)) || self.scale == 0.0
    }
}

/// Value and gradient of the potential at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialValue {
    pub value: f64,
    pub grad: Vec2,
    /// `|value(L) - value(L-1)|`, floored at the rounding level `16 eps · abs_scale`.
    pub err_est: f64,
    pub grad_err_est: f64,
    pub levels_used: usize,
    /// `∫ |k(x - y) mu(y)| dσ_y`.
    pub abs_scale: f64,
    pub dist: f64,
}

/// A labelled piece of the parameter frame; integrand outputs are routed by label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Piece {
    pub a: f64,
    pub b: f64,
    pub label: usize,
}

pub(crate) struct Adaptive<const N: usize> {
    pub value: [f64; N],
    pub abs: [f64; N],
    pub err: [f64; N],
    pub level: usize,
}

/// Splits the local frame `sigma ∈ [-π, π]` around `s_star` at `0` and at the given
/// parameters. Integrands see `sigma = s - s_star`, so nodes next to the
/// near-singular point keep full relative precision.
pub(crate) fn frame_pieces(s_star: f64, cuts: &[f64]) -> Vec<Piece> {
    let mut pts: Vec<f64> = cuts
        .iter()
        .map(|&c| local_offset(s_star, c))
        .filter(|&c| c.abs() > 1e-14 && PI - c.abs() > 1e-14)
        .collect();
    pts.extend([-PI, 0.0, PI]);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts.windows(2).map(|w| Piece { a: w[0], b: w[1], label: 0 }).collect()
}

/// `c - s_star` wrapped into `[-π, π)`.
pub(crate) fn local_offset(s_star: f64, c: f64) -> f64 {
    (c - s_star + PI).rem_euclid(TAU) - PI
}

/// Refines `pieces` (in local `sigma`) toward `sigma = 0`.
pub(crate) fn integrate_at_level<const N: usize>(
    pieces: &[Piece],
    level: usize,
    f: &(impl Fn(f64, usize) -> [f64; N] + Sync),
) -> ([f64; N], [f64; N]) {
    let min_w = H0 * 0.5f64.powi(level as i32);
    let rule = gl16();
    let mut sum = [0.0; N];
    let mut abs = [0.0; N];
    for p in pieces {
        if p.b <= p.a {
            continue;
        }
        for (lo, hi) in graded_panels(p.a, p.b, &[0.0], min_w, H0) {
            rule.for_each_node(lo, hi, |s, w| {
                let v = f(s, p.label);
                for i in 0..N {
                    sum[i] += w * v[i];
                    abs[i] += w * v[i].abs();
                }
            });
        }
    }
    (sum, abs)
}

/// Smallest level whose nearest panel has arc length at most `dist`.
pub(crate) fn needed_level(b: &Boundary, s_star: f64, dist: f64) -> usize {
    let speed = b.dparam(s_star).norm();
    (0..=MAX_LEVEL + 1)
        .find(|&l| {
            let w = H0 * 0.5f64.powi(l as i32);
            w * (speed + b.lip_dparam() * w) <= dist
        })
        .unwrap_or(MAX_LEVEL + 1)
}

pub(crate) fn adaptive<const N: usize>(
    b: &Boundary,
    s_star: f64,
    dist: f64,
    pieces: &[Piece],
    tol: f64,
    f: impl Fn(f64, usize) -> [f64; N] + Sync,
) -> Result<Adaptive<N>> {
    let need = needed_level(b, s_star, dist);
    let start = need.saturating_sub(1).min(MAX_LEVEL - 1);
    let (mut prev, _) = integrate_at_level(pieces, start, &f);
    let mut last = (prev, [0.0; N], [f64::INFINITY; N]);
    for level in (start + 1)..=MAX_LEVEL {
        let (cur, abs) = integrate_at_level(pieces, level, &f);
        let mut diff = [0.0; N];
        let mut ok = level >= need;
        for i in 0..N {
            diff[i] = (cur[i] - prev[i]).abs();
            ok &= diff[i] <= tol * abs[i].max(1.0);
        }
        if ok {
            let mut err = [0.0; N];
            for i in 0..N {
                err[i] = diff[i].max(16.0 * f64::EPSILON * abs[i]);
            }
            return Ok(Adaptive {
                value: cur,
                abs,
                err,
                level,
            });
        }
        last = (cur, abs, diff);
        prev = cur;
    }
    Err(Error::Convergence {
        levels: MAX_LEVEL,
        last_diff: last.2.iter().cloned().fold(0.0, f64::max),
        best: last.0[0],
    })
}

fn check_target(b: &Boundary, x: Vec2, tol: f64) -> Result<(f64, f64)> {
    if !x.is_finite() {
        return Err(Error::Domain("evaluation point must be finite".into()));
    }
    if !(tol >= 1e-13) {
        return Err(Error::Domain(format!("tolerance must be >= 1e-13, got {tol}")));
    }
    let (s_star, dist) = b.closest_point(x);
    if dist <= 1e-12 {
        return Err(Error::Singularity(format!("point lies on the boundary (dist = {dist:e})")));
    }
    Ok((s_star, dist))
}

/// `K[k, mu](x)` and `∇K[k, mu](x)` for `x` off the curve.
pub fn eval_potential(
    b: &Boundary,
    k: &HomogeneousKernel,
    mu: &Density,
    x: Vec2,
    tol: f64,
) -> Result<PotentialValue> {
    let (s_star, dist) = check_target(b, x, tol)?;
    eval_from(b, k, mu, x, tol, s_star, dist)
}

fn eval_from(
    b: &Boundary,
    k: &HomogeneousKernel,
    mu: &Density,
    x: Vec2,
    tol: f64,
    s_star: f64,
    dist: f64,
) -> Result<PotentialValue> {
    let pieces = frame_pieces(s_star, mu.breakpoints());
    let zc = x - b.param(s_star);
    let r = adaptive(b, s_star, dist, &pieces, tol, |sig, _| {
        let u = s_star + sig;
        let w = b.dparam(u).norm() * mu.value(b.param(u));
        let (v, g) = k.value_grad(zc - b.chord(s_star, sig));
        [v * w, g.x * w, g.y * w]
    })?;
    Ok(PotentialValue {
        value: r.value[0],
        grad: Vec2::new(r.value[1], r.value[2]),
        err_est: r.err[0],
        grad_err_est: r.err[1].hypot(r.err[2]),
        levels_used: r.level,
        abs_scale: r.abs[0],
        dist,
    })
}

/// `∫ |k(x - y)| |mu(y)| dσ_y` and friends at a fixed refinement level, for convergence studies.
pub fn eval_potential_at_level(
    b: &Boundary,
    k: &HomogeneousKernel,
    mu: &Density,
    x: Vec2,
    level: usize,
) -> Result<f64> {
    let (s_star, _) = check_target(b, x, 1e-13)?;
    let pieces = frame_pieces(s_star, mu.breakpoints());
    let zc = x - b.param(s_star);
    let (v, _) = integrate_at_level(&pieces, level.min(MAX_LEVEL), &|sig, _| {
        let u = s_star + sig;
        [k.value_grad(zc - b.chord(s_star, sig)).0 * b.dparam(u).norm() * mu.value(b.param(u))]
    });
    Ok(v[0])
}

/// Exterior evaluation with the far-field bound `‖k‖_C0 sup|mu| |∂Omega| / dist`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExteriorValue {
    pub potential: PotentialValue,
    pub far_field_bound: f64,
    pub margin: f64,
}

pub fn eval_potential_exterior(
    b: &Boundary,
    k: &HomogeneousKernel,
    mu: &Density,
    x: Vec2,
    tol: f64,
) -> Result<ExteriorValue> {
    let (s_star, dist) = check_target(b, x, tol)?;
    if b.side(x) != Side::Outside {
        return Err(Error::Domain("exterior evaluation needs a point outside the closed domain".into()));
    }
    let potential = eval_from(b, k, mu, x, tol, s_star, dist)?;
    let far_field_bound = k.sphere_norm(1024).c0 * mu.sup_abs * b.perimeter() / dist;
    Ok(ExteriorValue {
        potential,
        far_field_bound,
        margin: far_field_bound - potential.value.abs(),
    })
}

/// Sum of potentials over several curves, each with its own density; used for the
/// boundary of `B(0, r) \ closure(Omega)`.
pub fn eval_composite(
    parts: &[(&Boundary, &Density)],
    k: &HomogeneousKernel,
    x: Vec2,
    tol: f64,
) -> Result<PotentialValue> {
    let mut out = PotentialValue {
        value: 0.0,
        grad: Vec2::ZERO,
        err_est: 0.0,
        grad_err_est: 0.0,
        levels_used: 0,
        abs_scale: 0.0,
        dist: f64::INFINITY,
    };
    for (b, mu) in parts {
        let v = eval_potential(b, k, mu, x, tol)?;
        out.value += v.value;
        out.grad += v.grad;
        out.err_est += v.err_est;
        out.grad_err_est += v.grad_err_est;
        out.levels_used = out.levels_used.max(v.levels_used);
        out.abs_scale += v.abs_scale;
        out.dist = out.dist.min(v.dist);
    }
    Ok(out)
}

/// Plain trapezoid rule with `n` nodes; the brute-force oracle for tests.
pub fn trapezoid_oracle(b: &Boundary, k: &HomogeneousKernel, mu: &Density, x: Vec2, n: usize) -> (f64, Vec2) {
    let h = TAU / n as f64;
    let mut v = 0.0;
    let mut g = Vec2::ZERO;
    for i in 0..n {
        let s = i as f64 * h;
        let y = b.param(s);
        let w = b.dparam(s).norm() * mu.value(y) * h;
        let (kv, kg) = k.value_grad(x - y);
        v += kv * w;
        g += kg * w;
    }
    (v, g)
}

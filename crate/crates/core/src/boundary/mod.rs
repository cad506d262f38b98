//! Closed C^{1,1} curves given by a `2π`-periodic parametrization.
//!
//! All built-in shapes are counterclockwise, so the outward normal is the unit
//! tangent rotated clockwise.

mod cylinder;
mod field;

use std::f64::consts::TAU;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec2::Vec2;

pub use cylinder::{extract_cylinder, CoordinateCylinder};
pub use field::{build_tubular_field, vector_inequality_slack, FieldConditions, FieldOptions, TubularField};

const SCAN_NODES: usize = 4096;
const POLYGON_NODES: usize = 1 << 14;

/// Shape descriptions, serialized as `{"shape": name, "params": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", content = "params", rename_all = "snake_case")]
pub enum Shape {
    Circle {
        radius: f64,
        #[serde(default)]
        center: [f64; 2],
    },
    /// `(a cos s, b sin s)`.
    Ellipse { a: f64, b: f64 },
    /// Radial curve `r(phi) = 1 + eps cos(m phi)`, requires `eps m^2 < 1`.
    Star { eps: f64, m: u32 },
    /// Radial curve `r(phi) = c_0 + Σ_k (c_k cos k phi + s_k sin k phi)`.
    /// `sin_coeffs[0]` is ignored.
    Fourier {
        cos_coeffs: Vec<f64>,
        #[serde(default)]
        sin_coeffs: Vec<f64>,
    },
}

impl Shape {
    pub fn unit_circle() -> Self {
        Shape::Circle {
            radius: 1.0,
            center: [0.0, 0.0],
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Shape::Circle { radius, center } => {
                if !(*radius > 0.0 && radius.is_finite()) || !center.iter().all(|c| c.is_finite()) {
                    return Err(Error::Config(format!("circle needs a positive radius, got {radius}")));
                }
            }
            Shape::Ellipse { a, b } => {
                if !(*a > 0.0 && *b > 0.0 && a.is_finite() && b.is_finite()) {
                    return Err(Error::Config(format!("ellipse needs positive semi-axes, got ({a}, {b})")));
                }
            }
            Shape::Star { eps, m } => {
                let m = *m as f64;
                if !(eps.abs() * m * m < 1.0) || *eps < 0.0 {
                    return Err(Error::Config(format!("star needs 0 <= eps, eps m^2 < 1 (got eps = {eps}, m = {m})")));
                }
            }
            Shape::Fourier { cos_coeffs, .. } => {
                if cos_coeffs.is_empty() {
                    return Err(Error::Config("fourier curve needs at least c_0".into()));
                }
            }
        }
        Ok(())
    }

    /// Radius, first and second derivative of a radial curve at `phi`.
    fn radial(&self, phi: f64) -> (f64, f64, f64) {
        match self {
            Shape::Star { eps, m } => {
                let m = *m as f64;
                let (s, c) = (m * phi).sin_cos();
                (1.0 + eps * c, -eps * m * s, -eps * m * m * c)
            }
            Shape::Fourier { cos_coeffs, sin_coeffs } => {
                let mut r = cos_coeffs[0];
                let (mut dr, mut ddr) = (0.0, 0.0);
                let n = cos_coeffs.len().max(sin_coeffs.len());
                for k in 1..n {
                    let a = cos_coeffs.get(k).copied().unwrap_or(0.0);
                    let b = sin_coeffs.get(k).copied().unwrap_or(0.0);
                    let kf = k as f64;
                    let (s, c) = (kf * phi).sin_cos();
                    r += a * c + b * s;
                    dr += kf * (-a * s + b * c);
                    ddr -= kf * kf * (a * c + b * s);
                }
                (r, dr, ddr)
            }
            _ => unreachable!("not a radial shape"),
        }
    }

    #[inline]
    pub fn point(&self, s: f64) -> Vec2 {
        match self {
            Shape::Circle { radius, center } => {
                let (sn, cs) = s.sin_cos();
                Vec2::new(center[0] + radius * cs, center[1] + radius * sn)
            }
            Shape::Ellipse { a, b } => {
                let (sn, cs) = s.sin_cos();
                Vec2::new(a * cs, b * sn)
            }
            _ => {
                let (r, _, _) = self.radial(s);
                let (sn, cs) = s.sin_cos();
                Vec2::new(r * cs, r * sn)
            }
        }
    }

    /// `point(s0 + sigma) - point(s0)` without cancellation, via
    /// `cos(s0 + sigma) - cos s0 = -2 sin(s0 + sigma/2) sin(sigma/2)` and its sine twin.
    pub fn chord(&self, s0: f64, sigma: f64) -> Vec2 {
        let unit_diff = |k: f64| {
            let h = (0.5 * k * sigma).sin();
            let (sm, cm) = (k * s0 + 0.5 * k * sigma).sin_cos();
            (-2.0 * sm * h, 2.0 * cm * h)
        };
        match self {
            Shape::Circle { radius, .. } => {
                let (dc, ds) = unit_diff(1.0);
                Vec2::new(radius * dc, radius * ds)
            }
            Shape::Ellipse { a, b } => {
                let (dc, ds) = unit_diff(1.0);
                Vec2::new(a * dc, b * ds)
            }
            _ => {
                let dr = match self {
                    Shape::Star { eps, m } => eps * unit_diff(*m as f64).0,
                    Shape::Fourier { cos_coeffs, sin_coeffs } => {
                        let n = cos_coeffs.len().max(sin_coeffs.len());
                        let mut dr = 0.0;
                        for k in 1..n {
                            let a = cos_coeffs.get(k).copied().unwrap_or(0.0);
                            let b = sin_coeffs.get(k).copied().unwrap_or(0.0);
                            let (dc, ds) = unit_diff(k as f64);
                            dr += a * dc + b * ds;
                        }
                        dr
                    }
                    _ => unreachable!(),
                };
                let r1 = self.radial(s0 + sigma).0;
                let (dc, ds) = unit_diff(1.0);
                let (sn, cs) = s0.sin_cos();
                Vec2::new(r1 * dc + dr * cs, r1 * ds + dr * sn)
            }
        }
    }

    #[inline]
    pub fn d1(&self, s: f64) -> Vec2 {
        match self {
            Shape::Circle { radius, .. } => {
                let (sn, cs) = s.sin_cos();
                Vec2::new(-radius * sn, radius * cs)
            }
            Shape::Ellipse { a, b } => {
                let (sn, cs) = s.sin_cos();
                Vec2::new(-a * sn, b * cs)
            }
            _ => {
                let (r, dr, _) = self.radial(s);
                let (sn, cs) = s.sin_cos();
                Vec2::new(dr * cs - r * sn, dr * sn + r * cs)
            }
        }
    }

    #[inline]
    pub fn d2(&self, s: f64) -> Vec2 {
        match self {
            Shape::Circle { radius, .. } => {
                let (sn, cs) = s.sin_cos();
                Vec2::new(-radius * cs, -radius * sn)
            }
            Shape::Ellipse { a, b } => {
                let (sn, cs) = s.sin_cos();
                Vec2::new(-a * cs, -b * sn)
            }
            _ => {
                let (r, dr, ddr) = self.radial(s);
                let (sn, cs) = s.sin_cos();
                Vec2::new(
                    ddr * cs - 2.0 * dr * sn - r * cs,
                    ddr * sn + 2.0 * dr * cs - r * sn,
                )
            }
        }
    }

    /// A point the shape is starlike with respect to.
    pub fn star_center(&self) -> Vec2 {
        match self {
            Shape::Circle { center, .. } => Vec2::from(*center),
            _ => Vec2::ZERO,
        }
    }

    fn default_name(&self) -> String {
        match self {
            Shape::Circle { radius, .. } => format!("circle(r={radius})"),
            Shape::Ellipse { a, b } => format!("ellipse({a},{b})"),
            Shape::Star { eps, m } => format!("star(eps={eps},m={m})"),
            Shape::Fourier { cos_coeffs, .. } => format!("fourier({} modes)", cos_coeffs.len()),
        }
    }
}

#[derive(Debug, Default)]
struct Caches {
    scan: OnceLock<Vec<Vec2>>,
    polygon: OnceLock<Vec<Vec2>>,
    perimeter: OnceLock<f64>,
    diameter: OnceLock<f64>,
}

/// A closed regular C^{1,1} curve with a certified Lipschitz bound on its derivative.
#[derive(Debug, Clone)]
pub struct Boundary {
    shape: Shape,
    pub name: String,
    lip_dparam: f64,
    caches: Arc<Caches>,
}

impl PartialEq for Boundary {
    fn eq(&self, other: &Self) -> bool {
        self.shape == other.shape && self.name == other.name
    }
}

/// Which side of the curve a point lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Inside,
    Outside,
    OnBoundary,
}

impl Boundary {
    /// Validates the shape: regular parametrization, closedness, injectivity and
    /// counterclockwise orientation, then computes `lip_dparam = sup |param''|`.
    pub fn new(shape: Shape) -> Result<Self> {
        shape.validate()?;
        let name = shape.default_name();
        let b = Boundary {
            shape,
            name,
            lip_dparam: 0.0,
            caches: Arc::new(Caches::default()),
        };
        let n = 8192;
        let mut lip = 0.0f64;
        for i in 0..n {
            let s = TAU * i as f64 / n as f64;
            let v = b.dparam(s).norm();
            if !(v > 1e-12) {
                return Err(Error::Geometry(format!("degenerate derivative |param'| = {v:e} at s = {s}")));
            }
            lip = lip.max(b.shape.d2(s).norm());
        }
        if let Shape::Fourier { .. } = b.shape {
            for i in 0..n {
                let (r, _, _) = b.shape.radial(TAU * i as f64 / n as f64);
                if !(r > 0.0) {
                    return Err(Error::Geometry("fourier radius must stay positive".into()));
                }
            }
        }
        if (b.param(0.0) - b.param(TAU)).norm() > 1e-12 {
            return Err(Error::Geometry("parametrization is not closed".into()));
        }
        let inj = b.injectivity_ratio(512);
        if !(inj > 0.0) {
            return Err(Error::Geometry("parametrization is not injective".into()));
        }
        if b.signed_area() <= 0.0 {
            return Err(Error::Geometry("parametrization must be counterclockwise".into()));
        }
        // the grid sup slightly underestimates the true sup of a smooth |param''|
        let lip_dparam = lip * (1.0 + 1e-6);
        Ok(Boundary { lip_dparam, ..b })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn unit_circle() -> Self {
        Boundary::new(Shape::unit_circle()).expect("unit circle is valid")
    }

    pub fn circle(radius: f64) -> Result<Self> {
        Boundary::new(Shape::Circle {
            radius,
            center: [0.0, 0.0],
        })
    }

    pub fn ellipse(a: f64, b: f64) -> Result<Self> {
        Boundary::new(Shape::Ellipse { a, b })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let shape: Shape = serde_json::from_str(text)?;
        Boundary::new(shape)
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    #[inline]
    pub fn param(&self, s: f64) -> Vec2 {
        self.shape.point(s)
    }

    /// `param(s0 + sigma) - param(s0)`, accurate to rounding relative to its own size.
    #[inline]
    pub fn chord(&self, s0: f64, sigma: f64) -> Vec2 {
        self.shape.chord(s0, sigma)
    }

    #[inline]
    pub fn dparam(&self, s: f64) -> Vec2 {
        self.shape.d1(s)
    }

    #[inline]
    pub fn ddparam(&self, s: f64) -> Vec2 {
        self.shape.d2(s)
    }

    /// Lipschitz bound for `param'` (the C^{1,1} certificate).
    pub fn lip_dparam(&self) -> f64 {
        self.lip_dparam
    }

    /// Outward unit normal at parameter `s`.
    #[inline]
    pub fn normal(&self, s: f64) -> Vec2 {
        let d = self.dparam(s);
        Vec2::new(d.y, -d.x).normalized()
    }

    #[inline]
    pub fn tangent(&self, s: f64) -> Vec2 {
        self.dparam(s).normalized()
    }

    /// `min |param(s) - param(s')| / dist_circle(s, s')` over an `n`-point grid.
    pub fn injectivity_ratio(&self, n: usize) -> f64 {
        let pts: Vec<Vec2> = (0..n).map(|i| self.param(TAU * i as f64 / n as f64)).collect();
        let mut worst = f64::INFINITY;
        for i in 0..n {
            for j in (i + 1)..n {
                let k = (j - i).min(n - (j - i));
                let dc = TAU * k as f64 / n as f64;
                worst = worst.min((pts[i] - pts[j]).norm() / dc);
            }
        }
        worst
    }

    fn signed_area(&self) -> f64 {
        let n = 2048;
        let h = TAU / n as f64;
        (0..n)
            .map(|i| {
                let s = i as f64 * h;
                let p = self.param(s);
                let d = self.dparam(s);
                0.5 * (p.x * d.y - p.y * d.x) * h
            })
            .sum()
    }

    /// Length of the curve (trapezoid rule on 2048 nodes, spectrally accurate).
    pub fn perimeter(&self) -> f64 {
        *self.caches.perimeter.get_or_init(|| {
            let n = 2048;
            (0..n)
                .map(|i| self.dparam(TAU * i as f64 / n as f64).norm())
                .sum::<f64>()
                * (TAU / n as f64)
        })
    }

    /// Diameter of the curve, maximized over a 2048-node grid and refined locally.
    pub fn diameter(&self) -> f64 {
        *self.caches.diameter.get_or_init(|| {
            let pts = self.scan_points();
            let n = pts.len();
            let mut best = (0.0f64, 0usize, 0usize);
            for i in (0..n).step_by(2) {
                for j in ((i + 2)..n).step_by(2) {
                    let d = (pts[i] - pts[j]).norm_sq();
                    if d > best.0 {
                        best = (d, i, j);
                    }
                }
            }
            // local coordinate ascent on the two parameters
            let h = TAU / n as f64;
            let (mut s, mut u) = (best.1 as f64 * h, best.2 as f64 * h);
            let mut step = 2.0 * h;
            let mut d = (self.param(s) - self.param(u)).norm();
            while step > 1e-13 {
                let mut improved = false;
                for (ds, du) in [(step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)] {
                    let cand = (self.param(s + ds) - self.param(u + du)).norm();
                    if cand > d {
                        d = cand;
                        s += ds;
                        u += du;
                        improved = true;
                    }
                }
                if !improved {
                    step *= 0.5;
                }
            }
            d
        })
    }

    /// Largest distance of a boundary point from the origin.
    pub fn circumradius(&self) -> f64 {
        self.scan_points().iter().fold(0.0f64, |m, p| m.max(p.norm()))
    }

    fn scan_points(&self) -> &[Vec2] {
        self.caches.scan.get_or_init(|| {
            (0..SCAN_NODES)
                .map(|i| self.param(TAU * i as f64 / SCAN_NODES as f64))
                .collect()
        })
    }

    fn polygon(&self) -> &[Vec2] {
        self.caches.polygon.get_or_init(|| {
            (0..POLYGON_NODES)
                .map(|i| self.param(TAU * i as f64 / POLYGON_NODES as f64))
                .collect()
        })
    }

    /// Equispaced-parameter trapezoid grid with `n` nodes (`n >= 16`, a power of two).
    pub fn build_grid(&self, n: usize) -> Result<BoundaryGrid> {
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::Domain(format!("grid size must be a power of two >= 16, got {n}")));
        }
        let h = TAU / n as f64;
        let mut grid = BoundaryGrid {
            nodes: Vec::with_capacity(n),
            params: Vec::with_capacity(n),
            weights: Vec::with_capacity(n),
            normals: Vec::with_capacity(n),
        };
        for i in 0..n {
            let s = i as f64 * h;
            let d = self.dparam(s);
            let speed = d.norm();
            if speed < 1e-12 {
                return Err(Error::Geometry(format!("degenerate derivative at s = {s}")));
            }
            grid.nodes.push(self.param(s));
            grid.params.push(s);
            grid.weights.push(speed * h);
            grid.normals.push(Vec2::new(d.y / speed, -d.x / speed));
        }
        Ok(grid)
    }

    /// Global minimizer of `|x - param(s)|`: a 4096-node scan followed by a
    /// safeguarded Newton refinement to parameter tolerance below `1e-12`.
    /// Ties in the scan go to the smallest parameter.
    pub fn closest_point(&self, x: Vec2) -> (f64, f64) {
        let pts = self.scan_points();
        let n = pts.len();
        let mut dmin = f64::INFINITY;
        for p in pts {
            dmin = dmin.min((*p - x).norm_sq());
        }
        let i0 = pts
            .iter()
            .position(|p| (*p - x).norm_sq() <= dmin * (1.0 + 1e-12))
            .unwrap_or(0);
        let h = TAU / n as f64;
        let s0 = i0 as f64 * h;
        let g = |s: f64| (self.param(s) - x).dot(self.dparam(s));
        let (mut lo, mut hi) = (s0 - h, s0 + h);
        let (glo, ghi) = (g(lo), g(hi));
        let mut s = s0;
        if glo < 0.0 && ghi > 0.0 {
            for _ in 0..200 {
                let gs = g(s);
                if gs == 0.0 {
                    break;
                }
                if gs < 0.0 {
                    lo = s;
                } else {
                    hi = s;
                }
                let gp = self.dparam(s).norm_sq() + (self.param(s) - x).dot(self.ddparam(s));
                let newton = s - gs / gp;
                let next = if gp > 0.0 && newton > lo && newton < hi {
                    newton
                } else {
                    0.5 * (lo + hi)
                };
                let step = (next - s).abs();
                s = next;
                if step < 1e-15 || hi - lo < 1e-14 {
                    break;
                }
            }
        }
        let d_ref = (self.param(s) - x).norm();
        let d_scan = dmin.sqrt();
        let (s, d) = if d_ref <= d_scan { (s, d_ref) } else { (s0, d_scan) };
        (s.rem_euclid(TAU), d)
    }

    /// Distance from `x` to the curve.
    pub fn distance(&self, x: Vec2) -> f64 {
        self.closest_point(x).1
    }

    /// Side test by winding number on a `2^14`-gon; points within `1e-6` of the curve
    /// are classified by the sign of `(x - y*) · nu(y*)` at the closest point `y*`,
    /// and points within `1e-9` are reported on the boundary.
    pub fn side(&self, x: Vec2) -> Side {
        let (s, d) = self.closest_point(x);
        if d <= 1e-9 {
            return Side::OnBoundary;
        }
        if d < 1e-6 {
            return if (x - self.param(s)).dot(self.normal(s)) > 0.0 {
                Side::Outside
            } else {
                Side::Inside
            };
        }
        if winding_number(self.polygon(), x) != 0 {
            Side::Inside
        } else {
            Side::Outside
        }
    }
}

/// Winding number of a closed polygon around `x`.
pub fn winding_number(poly: &[Vec2], x: Vec2) -> i32 {
    let n = poly.len();
    let mut wn = 0;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let cross = (b.x - a.x) * (x.y - a.y) - (x.x - a.x) * (b.y - a.y);
        if a.y <= x.y {
            if b.y > x.y && cross > 0.0 {
                wn += 1;
            }
        } else if b.y <= x.y && cross < 0.0 {
            wn -= 1;
        }
    }
    wn
}

/// Distances `|param(s0 + k h) - x|` on the 4096-node scan started at `s0`, used to
/// split the parameter circle by the balls `B(x, rho)`.
#[derive(Debug, Clone)]
pub struct DistanceProfile {
    pub x: Vec2,
    pub s0: f64,
    dist: Vec<f64>,
}

/// A parameter interval `[a, b]` inside the frame `[s0, s0 + 2π]` with the index of
/// the distance band its points belong to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandSegment {
    pub a: f64,
    pub b: f64,
    pub band: usize,
}

impl DistanceProfile {
    pub fn new(b: &Boundary, x: Vec2, s0: f64) -> Self {
        let n = SCAN_NODES;
        let h = TAU / n as f64;
        let dist = (0..=n).map(|k| (b.param(s0 + k as f64 * h) - x).norm()).collect();
        Self { x, s0, dist }
    }

    /// Splits `[s0, s0 + 2π]` by the spheres of the increasing `radii`. Band `i` holds
    /// points with `radii[i-1] <= |y - x| < radii[i]` (band 0: inside the first ball,
    /// band `radii.len()`: outside the last). Crossings are located by bisection.
    pub fn partition(&self, b: &Boundary, radii: &[f64]) -> Vec<BandSegment> {
        let n = SCAN_NODES;
        let h = TAU / n as f64;
        let band_of = |d: f64| radii.iter().take_while(|&&r| d >= r).count();
        let mut cuts = vec![self.s0, self.s0 + TAU];
        for &rho in radii {
            for k in 0..n {
                let (d0, d1) = (self.dist[k] - rho, self.dist[k + 1] - rho);
                if (d0 < 0.0) == (d1 < 0.0) {
                    continue;
                }
                let (mut lo, mut hi) = (self.s0 + k as f64 * h, self.s0 + (k + 1) as f64 * h);
                let below_lo = d0 < 0.0;
                for _ in 0..64 {
                    let mid = 0.5 * (lo + hi);
                    if ((b.param(mid) - self.x).norm() < rho) == below_lo {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                cuts.push(0.5 * (lo + hi));
            }
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut out: Vec<BandSegment> = Vec::new();
        for w in cuts.windows(2) {
            if w[1] <= w[0] {
                continue;
            }
            let band = band_of((b.param(0.5 * (w[0] + w[1])) - self.x).norm());
            match out.last_mut() {
                Some(last) if last.band == band => last.b = w[1],
                _ => out.push(BandSegment { a: w[0], b: w[1], band }),
            }
        }
        out
    }
}

/// Quadrature grid on the boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryGrid {
    pub nodes: Vec<Vec2>,
    pub params: Vec<f64>,
    pub weights: Vec<f64>,
    pub normals: Vec<Vec2>,
}

impl BoundaryGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Distance between two parameters on the circle `R / 2πZ`.
pub fn circle_distance(s: f64, t: f64) -> f64 {
    let d = (s - t).rem_euclid(TAU);
    d.min(TAU - d)
}

//! The smoothed unit field `a` near the outward normal and the collar map
//! `Psi(x, t) = x + t a(x)`.

use std::f64::consts::{E, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{Boundary, Side};
use crate::error::{Error, Result};
use crate::vec2::Vec2;

/// Construction knobs. The defaults are the ones every report uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldOptions {
    /// Samples of the normal fed to the FFT.
    pub fft_nodes: usize,
    /// Grid on which the four conditions are certified.
    pub check_nodes: usize,
    /// Random pairs in the collision search for `Psi`.
    pub collision_pairs: usize,
    pub seed: u64,
}

impl Default for FieldOptions {
    fn default() -> Self {
        Self {
            fft_nodes: 1024,
            check_nodes: 512,
            collision_pairs: 10_000,
            seed: 0,
        }
    }
}

/// Grid margins of the four field conditions; each is positive when the condition holds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldConditions {
    pub nodes: usize,
    pub tau: f64,
    /// `1e-12 - max ||a| - 1|`.
    pub unit_margin: f64,
    /// `theta - sup |a - nu|`.
    pub sup_margin: f64,
    /// `inf a·nu - (1 - theta^2 / 2)`.
    pub dot_margin: f64,
    /// `min over pairs with |x - y| < tau of theta - |a(x)·(y - x)| / |x - y|`.
    pub pair_margin: f64,
    pub pairs_checked: usize,
}

impl FieldConditions {
    pub fn all_positive(&self) -> bool {
        self.unit_margin > 0.0 && self.sup_margin > 0.0 && self.dot_margin > 0.0 && self.pair_margin > 0.0
    }

    pub fn min_margin(&self) -> f64 {
        self.unit_margin
            .min(self.sup_margin)
            .min(self.dot_margin)
            .min(self.pair_margin)
    }
}

/// Real Fourier coefficients of one component: `c[0]` is the mean, then
/// `cos`/`sin` amplitudes for `k >= 1`.
#[derive(Debug, Clone, PartialEq)]
struct Series {
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl Series {
    fn from_samples(samples: &[f64], planner: &mut FftPlanner<f64>) -> Self {
        let m = samples.len();
        let mut buf: Vec<Complex<f64>> = samples.iter().map(|&v| Complex::new(v, 0.0)).collect();
        planner.plan_fft_forward(m).process(&mut buf);
        let half = m / 2;
        let mut cos = vec![0.0; half];
        let mut sin = vec![0.0; half];
        cos[0] = buf[0].re / m as f64;
        for k in 1..half {
            cos[k] = 2.0 * buf[k].re / m as f64;
            sin[k] = -2.0 * buf[k].im / m as f64;
        }
        Series { cos, sin }
    }

    fn amplitude(&self, k: usize) -> f64 {
        self.cos[k].abs().max(self.sin[k].abs())
    }

    fn smoothed(&self, width: f64, len: usize) -> Series {
        let g = |k: usize| (-0.5 * (k as f64 * width).powi(2)).exp();
        Series {
            cos: (0..len).map(|k| self.cos[k] * g(k)).collect(),
            sin: (0..len).map(|k| self.sin[k] * g(k)).collect(),
        }
    }
}

/// Number of modes worth keeping after Gaussian damping with the given width.
fn kept_modes(x: &Series, y: &Series, width: f64) -> usize {
    let half = x.cos.len();
    let amax = (0..half).fold(0.0f64, |m, k| m.max(x.amplitude(k)).max(y.amplitude(k)));
    let mut len = 1;
    for k in 1..half {
        let g = (-0.5 * (k as f64 * width).powi(2)).exp();
        if x.amplitude(k).max(y.amplitude(k)) * g > 1e-15 * amax {
            len = k + 1;
        }
    }
    len
}

/// The certified field `a` on `∂Omega`, with `theta`, `tau` and `t_1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TubularField {
    x: Series,
    y: Series,
    pub theta_cert: f64,
    pub tau_cert: f64,
    pub t1_cert: f64,
    pub lip_a: f64,
    pub smoothing_width: f64,
    /// Smallest `max(|t|, |u|)` at which two grid lines `x + t a(x)` meet.
    pub injectivity_radius: f64,
    pub conditions: FieldConditions,
    pub collision_pairs: usize,
    pub collisions: usize,
}

pub fn build_tubular_field(b: &Boundary, theta: f64) -> Result<TubularField> {
    TubularField::build(b, theta, &FieldOptions::default())
}

impl TubularField {
    /// Smooths the normal in parameter space with the widest Gaussian that keeps
    /// `sup |a - nu| <= theta / 2`, then certifies `tau`, the injectivity radius and `t_1`.
    pub fn build(b: &Boundary, theta: f64, opts: &FieldOptions) -> Result<Self> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::Domain(format!("theta must lie in (0, 1), got {theta}")));
        }
        let m = opts.fft_nodes;
        let nus: Vec<Vec2> = (0..m).map(|i| b.normal(TAU * i as f64 / m as f64)).collect();
        let mut planner = FftPlanner::new();
        let raw_x = Series::from_samples(&nus.iter().map(|v| v.x).collect::<Vec<_>>(), &mut planner);
        let raw_y = Series::from_samples(&nus.iter().map(|v| v.y).collect::<Vec<_>>(), &mut planner);

        let n = opts.check_nodes;
        let check_nus: Vec<Vec2> = (0..n).map(|i| b.normal(TAU * i as f64 / n as f64)).collect();
        let make = |w: f64| {
            let len = kept_modes(&raw_x, &raw_y, w);
            TubularField {
                x: raw_x.smoothed(w, len),
                y: raw_y.smoothed(w, len),
                theta_cert: theta,
                tau_cert: 0.0,
                t1_cert: 0.0,
                lip_a: 0.0,
                smoothing_width: w,
                injectivity_radius: 0.0,
                conditions: FieldConditions {
                    nodes: n,
                    tau: 0.0,
                    unit_margin: 0.0,
                    sup_margin: 0.0,
                    dot_margin: 0.0,
                    pair_margin: 0.0,
                    pairs_checked: 0,
                },
                collision_pairs: 0,
                collisions: 0,
            }
        };
        let feasible = |f: &TubularField| {
            (0..n).all(|i| {
                let raw = f.raw(TAU * i as f64 / n as f64);
                raw.norm() > 1e-3 && (raw.normalized() - check_nus[i]).norm() <= 0.5 * theta
            })
        };
        let mut field = make(1.0);
        if !feasible(&field) {
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..50 {
                let mid = 0.5 * (lo + hi);
                if feasible(&make(mid)) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            field = make(lo);
            if !feasible(&field) {
                return Err(Error::Construction(format!(
                    "no smoothing width satisfies the field conditions at theta = {theta}; try a larger theta"
                )));
            }
        }

        field.tau_cert = field.verified_tau(b, n);
        if !(field.tau_cert > 0.0) {
            return Err(Error::Construction(format!(
                "pair condition fails at every scale for theta = {theta}; try a larger theta"
            )));
        }
        field.conditions = field.check_conditions(b, n);
        if !field.conditions.all_positive() {
            return Err(Error::Construction(format!(
                "field conditions not certified at theta = {theta} (min margin {:e}); try a larger theta",
                field.conditions.min_margin()
            )));
        }
        field.injectivity_radius = field.line_intersection_radius(b, n);
        let t_cap = (0.5 / E).min(0.5 * field.injectivity_radius);
        field.lip_a = field.collar_lipschitz(b, 256, t_cap);
        field.t1_cert = (0.5 / E)
            .min((1.0 - theta).sqrt() / (4.0 * (field.lip_a + 1.0)))
            .min(0.5 * field.injectivity_radius);
        let (pairs, collisions) = field.collision_search(b, opts.collision_pairs, opts.seed);
        field.collision_pairs = pairs;
        field.collisions = collisions;
        if collisions > 0 {
            return Err(Error::Construction(format!("Psi is not injective on the collar ({collisions} collisions)")));
        }
        Ok(field)
    }

    fn raw(&self, s: f64) -> Vec2 {
        let (sn, cs) = s.sin_cos();
        let (mut ck, mut sk) = (1.0, 0.0);
        let mut v = Vec2::new(self.x.cos[0], self.y.cos[0]);
        for k in 1..self.x.cos.len() {
            let c = ck * cs - sk * sn;
            sk = sk * cs + ck * sn;
            ck = c;
            v.x += self.x.cos[k] * ck + self.x.sin[k] * sk;
            v.y += self.y.cos[k] * ck + self.y.sin[k] * sk;
        }
        v
    }

    /// The unit field `a` at parameter `s`.
    pub fn a_at(&self, s: f64) -> Vec2 {
        self.raw(s).normalized()
    }

    /// Number of Fourier modes in the smoothed field.
    pub fn modes(&self) -> usize {
        self.x.cos.len()
    }

    /// `Psi(param(s), t) = param(s) + t a(s)` for `|t| < t_1`.
    pub fn tubular_map(&self, b: &Boundary, s: f64, t: f64) -> Result<Vec2> {
        if !(t.abs() < self.t1_cert) {
            return Err(Error::Domain(format!("|t| = {} must be below t1 = {}", t.abs(), self.t1_cert)));
        }
        Ok(self.psi(b, s, t))
    }

    /// `Psi` without the range check.
    #[inline]
    pub fn psi(&self, b: &Boundary, s: f64, t: f64) -> Vec2 {
        b.param(s) + self.a_at(s) * t
    }

    /// Extension of `a` off the curve by its value at the closest boundary point.
    pub fn extension_at(&self, b: &Boundary, x: Vec2) -> Vec2 {
        self.a_at(b.closest_point(x).0)
    }

    fn grid(&self, b: &Boundary, n: usize) -> (Vec<Vec2>, Vec<Vec2>, Vec<Vec2>) {
        let mut pts = Vec::with_capacity(n);
        let mut nus = Vec::with_capacity(n);
        let mut avs = Vec::with_capacity(n);
        for i in 0..n {
            let s = TAU * i as f64 / n as f64;
            pts.push(b.param(s));
            nus.push(b.normal(s));
            avs.push(self.a_at(s));
        }
        (pts, nus, avs)
    }

    /// Largest radius below which `|a(x)·(y - x)| <= theta |x - y|` holds on the grid:
    /// the first crossing along the curve from each node is located by bisection,
    /// and any other violating grid pair caps the radius at its distance.
    fn verified_tau(&self, b: &Boundary, n: usize) -> f64 {
        let theta = self.theta_cert;
        let (pts, _, avs) = self.grid(b, n);
        let h = TAU / n as f64;
        let mut tau = b.diameter();
        for i in 0..n {
            let x = pts[i];
            let a = avs[i];
            let ratio = |y: Vec2| {
                let d = y - x;
                a.dot(d).abs() / d.norm()
            };
            let si = i as f64 * h;
            for dir in [1isize, -1] {
                let mut crossed = false;
                for k in 1..=(n / 2) {
                    let j = (i as isize + dir * k as isize).rem_euclid(n as isize) as usize;
                    let d = (pts[j] - x).norm();
                    if ratio(pts[j]) <= theta {
                        continue;
                    }
                    if crossed {
                        tau = tau.min(d);
                        continue;
                    }
                    crossed = true;
                    let (mut lo, mut hi) = ((k - 1) as f64, k as f64);
                    for _ in 0..60 {
                        let mid = 0.5 * (lo + hi);
                        let y = b.param(si + dir as f64 * mid * h);
                        if mid > 0.0 && ratio(y) > theta {
                            hi = mid;
                        } else {
                            lo = mid;
                        }
                    }
                    let dc = (b.param(si + dir as f64 * hi * h) - x).norm();
                    tau = tau.min(dc.min(d));
                }
            }
        }
        tau
    }

    /// Grid margins of the four conditions on `n` equispaced parameters, with the
    /// pair condition tested against the certified `tau`.
    pub fn check_conditions(&self, b: &Boundary, n: usize) -> FieldConditions {
        let theta = self.theta_cert;
        let (pts, nus, avs) = self.grid(b, n);
        let mut unit_dev = 0.0f64;
        let mut sup_diff = 0.0f64;
        let mut inf_dot = f64::INFINITY;
        for i in 0..n {
            unit_dev = unit_dev.max((avs[i].norm() - 1.0).abs());
            sup_diff = sup_diff.max((avs[i] - nus[i]).norm());
            inf_dot = inf_dot.min(avs[i].dot(nus[i]));
        }
        let mut worst = 0.0f64;
        let mut pairs = 0usize;
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let d = pts[j] - pts[i];
                let r = d.norm();
                if r < self.tau_cert {
                    pairs += 1;
                    worst = worst.max(avs[i].dot(d).abs() / r);
                }
            }
        }
        FieldConditions {
            nodes: n,
            tau: self.tau_cert,
            unit_margin: 1e-12 - unit_dev,
            sup_margin: theta - sup_diff,
            dot_margin: inf_dot - (1.0 - 0.5 * theta * theta),
            pair_margin: theta - worst,
            pairs_checked: pairs,
        }
    }

    fn line_intersection_radius(&self, b: &Boundary, n: usize) -> f64 {
        let (pts, _, avs) = self.grid(b, n);
        let mut rho = f64::INFINITY;
        for i in 0..n {
            for j in (i + 1)..n {
                let (ai, aj) = (avs[i], avs[j]);
                let d = pts[i] - pts[j];
                // x_i + t a_i = x_j + u a_j  <=>  u a_j - t a_i = x_i - x_j
                let det = ai.x * aj.y - ai.y * aj.x;
                let r = if det.abs() < 1e-14 {
                    if (ai.x * d.y - ai.y * d.x).abs() < 1e-12 * d.norm() {
                        0.5 * d.norm()
                    } else {
                        f64::INFINITY
                    }
                } else {
                    let t = (d.x * aj.y - d.y * aj.x) / det;
                    let u = (d.x * ai.y - d.y * ai.x) / det;
                    t.abs().max(u.abs())
                };
                rho = rho.min(r);
            }
        }
        rho
    }

    /// Lipschitz quotient of the closest-point extension of `a` on the collar
    /// `{Psi(s, t) : t in {-t_cap, 0, t_cap}}` sampled at `n` parameters.
    fn collar_lipschitz(&self, b: &Boundary, n: usize, t_cap: f64) -> f64 {
        let mut pts = Vec::with_capacity(3 * n);
        let mut vals = Vec::with_capacity(3 * n);
        for t in [-t_cap, 0.0, t_cap] {
            for i in 0..n {
                let s = TAU * i as f64 / n as f64;
                let x = self.psi(b, s, t);
                pts.push(x);
                vals.push(if t == 0.0 { self.a_at(s) } else { self.extension_at(b, x) });
            }
        }
        let mut lip = 0.0f64;
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                let d = (pts[i] - pts[j]).norm();
                if d > 1e-12 {
                    lip = lip.max((vals[i] - vals[j]).norm() / d);
                }
            }
        }
        lip
    }

    /// Seeded random pairs `(s, t) != (s', t')` with `|t|, |t'| < t_1`; counts pairs
    /// mapped within `1e-9` of each other.
    fn collision_search(&self, b: &Boundary, pairs: usize, seed: u64) -> (usize, usize) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t1 = self.t1_cert;
        let mut collisions = 0;
        for _ in 0..pairs {
            let (s, t) = (rng.gen_range(0.0..TAU), rng.gen_range(-t1..t1));
            let (u, r) = (rng.gen_range(0.0..TAU), rng.gen_range(-t1..t1));
            if (s, t) == (u, r) {
                continue;
            }
            if (self.psi(b, s, t) - self.psi(b, u, r)).norm() < 1e-9 {
                collisions += 1;
            }
        }
        (pairs, collisions)
    }

    /// Number of seeded points `Psi(s, t)`, `0 < |t| < t_1`, whose side of the curve
    /// disagrees with the sign of `t`.
    pub fn side_disagreements(&self, b: &Boundary, samples: usize, seed: u64) -> usize {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut bad = 0;
        for _ in 0..samples {
            let s = rng.gen_range(0.0..TAU);
            let mut t = rng.gen_range(-self.t1_cert..self.t1_cert);
            if t == 0.0 {
                t = 0.5 * self.t1_cert;
            }
            let want = if t < 0.0 { Side::Inside } else { Side::Outside };
            if b.side(self.psi(b, s, t)) != want {
                bad += 1;
            }
        }
        bad
    }

    /// Minimum slack of `|x - y + t a(x)| >= (1 - theta)^{1/2} (|x - y|^2 + t^2)^{1/2}`
    /// over grid pairs with `|x - y| < tau` and `t` on a log grid in `(-t_1, 0)`.
    pub fn lower_bound_slack(&self, b: &Boundary, n: usize, n_t: usize) -> f64 {
        let (pts, _, avs) = self.grid(b, n);
        let c = (1.0 - self.theta_cert).sqrt();
        let ts: Vec<f64> = (0..n_t)
            .map(|k| -self.t1_cert * 10f64.powf(-6.0 * k as f64 / (n_t.max(2) - 1) as f64) * (1.0 - 1e-9))
            .collect();
        let mut worst = f64::INFINITY;
        for i in 0..n {
            for j in 0..n {
                let d = pts[i] - pts[j];
                let r = d.norm();
                if r >= self.tau_cert {
                    continue;
                }
                for &t in &ts {
                    let lhs = (d + avs[i] * t).norm();
                    worst = worst.min(lhs - c * (r * r + t * t).sqrt());
                }
            }
        }
        worst
    }
}

/// Slack of `|v + w|^2 >= (1 - theta)(|v|^2 + |w|^2) + theta (|v| - |w|)^2`, or
/// `None` when the premise `|v·w| <= theta |v||w|` fails.
pub fn vector_inequality_slack(v: Vec2, w: Vec2, theta: f64) -> Option<f64> {
    let (nv, nw) = (v.norm(), w.norm());
    if v.dot(w).abs() > theta * nv * nw {
        return None;
    }
    let lhs = (v + w).norm_sq();
    let rhs = (1.0 - theta) * (nv * nv + nw * nw) + theta * (nv - nw).powi(2);
    Some(lhs - rhs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_field_is_the_normal() {
        let b = Boundary::unit_circle();
        let f = build_tubular_field(&b, 0.5).unwrap();
        for i in 0..64 {
            let s = TAU * i as f64 / 64.0;
            assert!((f.a_at(s) - b.normal(s)).norm() < 1e-13);
        }
        assert!(f.tau_cert >= 1.0 - 1e-9, "tau = {}", f.tau_cert);
        assert!((f.injectivity_radius - 1.0).abs() < 1e-9);
        assert!(f.conditions.all_positive());
        assert!(f.t1_cert > 0.0 && f.t1_cert < 0.5 / E + 1e-15);
        let p = f.tubular_map(&b, 0.0, -0.05).unwrap();
        assert!((p - Vec2::new(0.95, 0.0)).norm() < 1e-13);
        assert_eq!(b.side(p), Side::Inside);
        assert_eq!(b.side(f.tubular_map(&b, 0.0, 0.05).unwrap()), Side::Outside);
        assert!(f.tubular_map(&b, 0.0, f.t1_cert).is_err());
    }

    #[test]
    fn ellipse_field_certifies() {
        let b = Boundary::ellipse(1.0, 0.5).unwrap();
        let f = build_tubular_field(&b, 0.5).unwrap();
        assert!(f.conditions.all_positive(), "{:?}", f.conditions);
        assert_eq!(f.collisions, 0);
        assert_eq!(f.side_disagreements(&b, 2000, 1), 0);
        assert!(f.lower_bound_slack(&b, 128, 6) >= -1e-12);
    }

    #[test]
    fn wider_theta_gives_wider_margins() {
        let b = Boundary::ellipse(1.0, 0.5).unwrap();
        let narrow = build_tubular_field(&b, 0.3).unwrap();
        let wide = build_tubular_field(&b, 0.999).unwrap();
        assert!(wide.conditions.sup_margin > narrow.conditions.sup_margin);
        assert!(wide.conditions.dot_margin > narrow.conditions.dot_margin);
    }

    #[test]
    fn theta_out_of_range() {
        let b = Boundary::unit_circle();
        assert!(build_tubular_field(&b, 1.0).is_err());
        assert!(build_tubular_field(&b, 0.0).is_err());
    }

    #[test]
    fn vector_inequality_examples() {
        let v = Vec2::new(1.0, 0.0);
        let w = Vec2::new(0.0, 2.0);
        assert!(vector_inequality_slack(v, w, 0.5).unwrap() >= 0.0);
        assert!(vector_inequality_slack(v, v, 0.5).is_none());
    }
}

//! Odd positively homogeneous kernels of degree -1 in the plane.
//!
//! A kernel is stored through its restriction to the unit circle as a finite
//! trigonometric series `f(phi) = Σ_k c_k cos(k phi) + s_k sin(k phi)`, so that
//! `k(z) = f(z / |z|) / |z|` and the tangential derivative is exact.

use std::f64::consts::{PI, TAU};

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec2::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Cos,
    Sin,
}

/// Kernel configuration, tagged by `"kernel"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kernel", rename_all = "snake_case")]
pub enum KernelSpec {
    /// `z_j / (2π |z|^2)`.
    Riesz { component: usize },
    /// `cos((2m+1) phi) / |z|` or `sin((2m+1) phi) / |z|`, `m <= 3`.
    OddHarmonic { mode: u32, phase: Phase },
    /// Coefficients indexed by frequency; only odd frequencies may be nonzero.
    FourierOdd {
        cos_coeffs: Vec<f64>,
        #[serde(default)]
        sin_coeffs: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogeneousKernel {
    pub label: String,
    cos: Vec<f64>,
    sin: Vec<f64>,
    odd: bool,
    /// Set when spectral differentiation of sampled data saw slowly decaying modes.
    pub warning: Option<String>,
}

/// `c0 + c1 + lip1` sphere norm of a `C^{1,1}` function on the unit circle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelNorm {
    pub c0: f64,
    pub c1: f64,
    pub lip1: f64,
    pub total: f64,
}

impl KernelNorm {
    fn new(c0: f64, c1: f64, lip1: f64) -> Self {
        Self {
            c0,
            c1,
            lip1,
            total: c0 + c1 + lip1,
        }
    }

    /// `C^{0,1}` part `c0 + c1`.
    pub fn c01(&self) -> f64 {
        self.c0 + self.c1
    }
}

impl HomogeneousKernel {
    fn from_series(label: impl Into<String>, mut cos: Vec<f64>, mut sin: Vec<f64>) -> Self {
        let n = cos.len().max(sin.len()).max(1);
        cos.resize(n, 0.0);
        sin.resize(n, 0.0);
        sin[0] = 0.0;
        let odd = cos.iter().step_by(2).chain(sin.iter().step_by(2)).all(|&c| c == 0.0);
        Self {
            label: label.into(),
            cos,
            sin,
            odd,
            warning: None,
        }
    }

    /// Riesz-type kernel `z_j / (2π |z|^2)`, `j` in `{1, 2}`.
    pub fn riesz(j: usize) -> Result<Self> {
        let c = 1.0 / TAU;
        match j {
            1 => Ok(Self::from_series("riesz1", vec![0.0, c], vec![])),
            2 => Ok(Self::from_series("riesz2", vec![0.0, 0.0], vec![0.0, c])),
            _ => Err(Error::Config(format!("riesz component must be 1 or 2, got {j}"))),
        }
    }

    /// `cos((2m+1) phi)` or `sin((2m+1) phi)` on the circle, `m <= 3`.
    pub fn odd_harmonic(m: u32, phase: Phase) -> Result<Self> {
        if m > 3 {
            return Err(Error::Config(format!("odd harmonic mode must be <= 3, got {m}")));
        }
        let k = (2 * m + 1) as usize;
        let mut coeffs = vec![0.0; k + 1];
        coeffs[k] = 1.0;
        let label = format!("{}{}", if phase == Phase::Cos { "cos" } else { "sin" }, k);
        Ok(match phase {
            Phase::Cos => Self::from_series(label, coeffs, vec![]),
            Phase::Sin => Self::from_series(label, vec![], coeffs),
        })
    }

    /// General odd series; even frequencies must vanish.
    pub fn fourier_odd(cos_coeffs: Vec<f64>, sin_coeffs: Vec<f64>) -> Result<Self> {
        if cos_coeffs.iter().chain(&sin_coeffs).any(|c| !c.is_finite()) {
            return Err(Error::Config("kernel coefficients must be finite".into()));
        }
        let even = |c: &[f64]| c.iter().enumerate().any(|(k, &v)| k % 2 == 0 && v != 0.0);
        if even(&cos_coeffs) || even(&sin_coeffs) {
            return Err(Error::Config("fourier_odd kernels take odd frequencies only".into()));
        }
        Ok(Self::from_series("fourier_odd", cos_coeffs, sin_coeffs))
    }

    /// An even control kernel `cos(2 phi) / (2π |z|)`. Not odd, so only useful as a control.
    pub fn even_control() -> Self {
        Self::from_series("even_cos2", vec![0.0, 0.0, 1.0 / TAU], vec![])
    }

    /// Kernel given by `M` equispaced samples of its sphere function. The derivative
    /// is obtained spectrally; slowly decaying coefficients raise a warning.
    pub fn from_samples(label: impl Into<String>, samples: &[f64]) -> Result<Self> {
        let m = samples.len();
        if m < 16 || samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("need at least 16 finite kernel samples".into()));
        }
        let mut buf: Vec<Complex<f64>> = samples.iter().map(|&v| Complex::new(v, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(m).process(&mut buf);
        let half = m / 2;
        let mut cos = vec![0.0; half];
        let mut sin = vec![0.0; half];
        cos[0] = buf[0].re / m as f64;
        for k in 1..half {
            cos[k] = 2.0 * buf[k].re / m as f64;
            sin[k] = -2.0 * buf[k].im / m as f64;
        }
        let amps: Vec<f64> = (0..half).map(|k| cos[k].abs().max(sin[k].abs())).collect();
        let amax = amps.iter().cloned().fold(0.0, f64::max);
        let tail = amps[3 * half / 4..].iter().cloned().fold(0.0, f64::max);
        for k in 0..half {
            if amps[k] <= 1e-15 * amax {
                cos[k] = 0.0;
                sin[k] = 0.0;
            }
        }
        let mut k = Self::from_series(label, cos, sin);
        k.odd = k.check_odd(256) <= 1e-12;
        if amax > 0.0 && tail > 1e-8 * amax {
            k.warning = Some(format!(
                "sampled kernel coefficients decay slowly (tail/max = {:.3e}); derivative may be unreliable",
                tail / amax
            ));
        }
        Ok(k)
    }

    pub fn from_spec(spec: &KernelSpec) -> Result<Self> {
        match spec {
            KernelSpec::Riesz { component } => Self::riesz(*component),
            KernelSpec::OddHarmonic { mode, phase } => Self::odd_harmonic(*mode, *phase),
            KernelSpec::FourierOdd { cos_coeffs, sin_coeffs } => {
                Self::fourier_odd(cos_coeffs.clone(), sin_coeffs.clone())
            }
        }
    }

    pub fn zero() -> Self {
        Self::from_series("zero", vec![0.0, 0.0], vec![])
    }

    /// `alpha k`.
    pub fn scaled(&self, alpha: f64) -> Self {
        let mut k = self.clone();
        k.cos.iter_mut().chain(k.sin.iter_mut()).for_each(|c| *c *= alpha);
        k.label = format!("{alpha}*{}", self.label);
        k
    }

    /// `alpha k1 + beta k2`.
    pub fn combine(alpha: f64, k1: &Self, beta: f64, k2: &Self) -> Self {
        let n = k1.cos.len().max(k2.cos.len());
        let at = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
        let cos = (0..n).map(|i| alpha * at(&k1.cos, i) + beta * at(&k2.cos, i)).collect();
        let sin = (0..n).map(|i| alpha * at(&k1.sin, i) + beta * at(&k2.sin, i)).collect();
        let mut k = Self::from_series(format!("{alpha}*{}+{beta}*{}", k1.label, k2.label), cos, sin);
        k.odd = k1.odd && k2.odd;
        k
    }

    pub fn degree(&self) -> i32 {
        -1
    }

    pub fn is_odd(&self) -> bool {
        self.odd
    }

    /// `(f, f', f'')` at the unit vector `u`, summed via complex powers of `u`.
    #[inline]
    fn sphere_parts(&self, u: Vec2) -> (f64, f64, f64) {
        let (mut pr, mut pi) = (1.0, 0.0);
        let (mut f, mut df, mut ddf) = (self.cos[0], 0.0, 0.0);
        for k in 1..self.cos.len() {
            let r = pr * u.x - pi * u.y;
            pi = pr * u.y + pi * u.x;
            pr = r;
            let (c, s) = (self.cos[k], self.sin[k]);
            let kf = k as f64;
            f += c * pr + s * pi;
            df += kf * (s * pr - c * pi);
            ddf -= kf * kf * (c * pr + s * pi);
        }
        (f, df, ddf)
    }

    /// `f(phi)`.
    pub fn sphere_fn(&self, phi: f64) -> f64 {
        let (s, c) = phi.sin_cos();
        self.sphere_parts(Vec2::new(c, s)).0
    }

    /// `f'(phi)`, per radian.
    pub fn sphere_fn_grad(&self, phi: f64) -> f64 {
        let (s, c) = phi.sin_cos();
        self.sphere_parts(Vec2::new(c, s)).1
    }

    pub fn eval(&self, z: Vec2) -> Result<f64> {
        let r = z.norm();
        if !(r > 0.0) {
            return Err(Error::Singularity("kernel evaluated at z = 0".into()));
        }
        Ok(self.sphere_parts(z * (1.0 / r)).0 / r)
    }

    pub fn grad(&self, z: Vec2) -> Result<Vec2> {
        if !(z.norm() > 0.0) {
            return Err(Error::Singularity("kernel gradient evaluated at z = 0".into()));
        }
        Ok(self.value_grad(z).1)
    }

    /// `(k(z), ∇k(z))` for `z != 0`, unchecked.
    #[inline]
    pub fn value_grad(&self, z: Vec2) -> (f64, Vec2) {
        let r = z.norm();
        let u = z * (1.0 / r);
        let (f, df, _) = self.sphere_parts(u);
        let inv2 = 1.0 / (r * r);
        let g = (u * (-f) + u.perp() * df) * inv2;
        (f / r, g)
    }

    /// Sphere function of `∂_j k`, homogeneous of degree -2, and its derivative.
    fn partial_sphere(&self, j: usize, phi: f64) -> (f64, f64) {
        let (s, c) = phi.sin_cos();
        let (f, df, ddf) = self.sphere_parts(Vec2::new(c, s));
        if j == 1 {
            (-f * c - df * s, f * s - 2.0 * df * c - ddf * s)
        } else {
            (-f * s + df * c, -f * c - 2.0 * df * s + ddf * c)
        }
    }

    /// Sphere norm of `k` on `m` equispaced nodes.
    pub fn sphere_norm(&self, m: usize) -> KernelNorm {
        let samples: Vec<(f64, f64)> = (0..m)
            .map(|i| {
                let (s, c) = (TAU * i as f64 / m as f64).sin_cos();
                let (f, df, _) = self.sphere_parts(Vec2::new(c, s));
                (f, df)
            })
            .collect();
        norm_from_samples(&samples)
    }

    /// Sphere norm of `∂_j k` on `m` nodes.
    pub fn partial_norm(&self, j: usize, m: usize) -> KernelNorm {
        let samples: Vec<(f64, f64)> = (0..m).map(|i| self.partial_sphere(j, TAU * i as f64 / m as f64)).collect();
        norm_from_samples(&samples)
    }

    /// `max |f(u) + f(-u)|` over `m` nodes.
    pub fn check_odd(&self, m: usize) -> f64 {
        (0..m)
            .map(|i| {
                let phi = TAU * i as f64 / m as f64;
                (self.sphere_fn(phi) + self.sphere_fn(phi + PI)).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// `c0 = sup|f|`, `c1 = sup|f'|`, `lip1` from adjacent and power-of-two skip pairs.
fn norm_from_samples(samples: &[(f64, f64)]) -> KernelNorm {
    let m = samples.len();
    let c0 = samples.iter().map(|s| s.0.abs()).fold(0.0, f64::max);
    let c1 = samples.iter().map(|s| s.1.abs()).fold(0.0, f64::max);
    let mut lip1 = 0.0f64;
    let mut skip = 1;
    while skip <= m / 2 {
        let arc = TAU * skip as f64 / m as f64;
        for i in 0..m {
            let j = (i + skip) % m;
            lip1 = lip1.max((samples[i].1 - samples[j].1).abs() / arc);
        }
        skip *= 2;
    }
    KernelNorm::new(c0, c1, lip1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plain_riesz() -> HomogeneousKernel {
        HomogeneousKernel::riesz(1).unwrap().scaled(TAU)
    }

    #[test]
    fn eval_examples() {
        let k = plain_riesz();
        assert!((k.eval(Vec2::new(2.0, 0.0)).unwrap() - 0.5).abs() < 1e-15);
        assert!(k.eval(Vec2::new(0.0, 1.0)).unwrap().abs() < 1e-15);
        assert!(matches!(k.eval(Vec2::ZERO), Err(Error::Singularity(_))));
        assert!(k.grad(Vec2::ZERO).is_err());
    }

    #[test]
    fn grad_examples() {
        let k = plain_riesz();
        let g = k.grad(Vec2::new(1.0, 0.0)).unwrap();
        assert!((g - Vec2::new(-1.0, 0.0)).norm() < 1e-15);
        let z = Vec2::new(0.3, -0.7);
        let (g1, g2) = (k.grad(z).unwrap(), k.grad(z * 2.0).unwrap());
        assert!((g1 * 0.25 - g2).norm() <= 1e-12 * g2.norm());
        let r2 = z.norm_sq();
        let exact = Vec2::new((r2 - 2.0 * z.x * z.x) / (r2 * r2), -2.0 * z.x * z.y / (r2 * r2));
        assert!((g1 - exact).norm() < 1e-14);
    }

    #[test]
    fn norm_examples() {
        let n = plain_riesz().sphere_norm(1024);
        assert!((n.c0 - 1.0).abs() < 1e-12);
        assert!((n.c1 - 1.0).abs() < 1e-12);
        assert!((n.lip1 - 1.0).abs() < 1e-4);
        let z = HomogeneousKernel::zero().sphere_norm(256);
        assert_eq!(z.total, 0.0);
        let k = HomogeneousKernel::odd_harmonic(2, Phase::Sin).unwrap();
        let (a, b) = (k.sphere_norm(512), k.scaled(5.0).sphere_norm(512));
        assert!((b.total - 5.0 * a.total).abs() <= 1e-12 * b.total);
    }

    #[test]
    fn norm_is_stable_under_doubling() {
        for k in [
            HomogeneousKernel::riesz(2).unwrap(),
            HomogeneousKernel::odd_harmonic(3, Phase::Cos).unwrap(),
        ] {
            let (a, b) = (k.sphere_norm(512), k.sphere_norm(1024));
            assert!((a.total - b.total).abs() < 0.01 * b.total);
        }
    }

    #[test]
    fn oddness() {
        for m in 0..=3 {
            for ph in [Phase::Cos, Phase::Sin] {
                let k = HomogeneousKernel::odd_harmonic(m, ph).unwrap();
                assert!(k.is_odd());
                assert!(k.check_odd(1000) <= 1e-12);
            }
        }
        let e = HomogeneousKernel::even_control();
        assert!(!e.is_odd());
        assert!(e.check_odd(100) > 0.1);
        assert!(HomogeneousKernel::odd_harmonic(4, Phase::Cos).is_err());
        assert!(HomogeneousKernel::fourier_odd(vec![0.0, 1.0, 0.5], vec![]).is_err());
    }

    #[test]
    fn partial_sphere_matches_gradient() {
        let k = HomogeneousKernel::fourier_odd(vec![0.0, 0.3, 0.0, -0.2], vec![0.0, 0.1, 0.0, 0.0, 0.0, 0.05]).unwrap();
        for i in 0..50 {
            let phi = 0.13 * i as f64;
            let u = Vec2::new(phi.cos(), phi.sin());
            let g = k.value_grad(u).1;
            assert!((k.partial_sphere(1, phi).0 - g.x).abs() < 1e-14);
            assert!((k.partial_sphere(2, phi).0 - g.y).abs() < 1e-14);
            let h = 1e-5;
            for j in [1, 2] {
                let fd = (k.partial_sphere(j, phi + h).0 - k.partial_sphere(j, phi - h).0) / (2.0 * h);
                assert!((fd - k.partial_sphere(j, phi).1).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn sampled_kernel_recovers_series() {
        let k = HomogeneousKernel::odd_harmonic(1, Phase::Cos).unwrap();
        let samples: Vec<f64> = (0..64).map(|i| k.sphere_fn(TAU * i as f64 / 64.0)).collect();
        let s = HomogeneousKernel::from_samples("sampled", &samples).unwrap();
        assert!(s.warning.is_none());
        assert!(s.is_odd());
        for i in 0..20 {
            let phi = 0.31 * i as f64;
            assert!((s.sphere_fn_grad(phi) - k.sphere_fn_grad(phi)).abs() < 1e-12);
        }
        let rough: Vec<f64> = (0..64)
            .map(|i| {
                let phi = TAU * i as f64 / 64.0;
                phi.cos().abs() * phi.cos()
            })
            .collect();
        let r = HomogeneousKernel::from_samples("rough", &rough).unwrap();
        assert!(r.warning.is_some());
    }

    #[test]
    fn spec_parsing() {
        let s: KernelSpec = serde_json::from_str(r#"{"kernel": "riesz", "component": 2}"#).unwrap();
        assert_eq!(HomogeneousKernel::from_spec(&s).unwrap().label, "riesz2");
        let s: KernelSpec = serde_json::from_str(r#"{"kernel": "odd_harmonic", "mode": 1, "phase": "sin"}"#).unwrap();
        assert_eq!(HomogeneousKernel::from_spec(&s).unwrap().label, "sin3");
        let s: KernelSpec =
            serde_json::from_str(r#"{"kernel": "fourier_odd", "cos_coeffs": [0, 1, 0, 0.5], "sin_coeffs": [0, 0, 0, 0.2]}"#)
                .unwrap();
        assert!(HomogeneousKernel::from_spec(&s).unwrap().is_odd());
    }
}

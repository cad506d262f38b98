//! The four-way split of `∂_j K(x + t a(x))` used in the regularity argument:
//!
//! ```text
//! ∂_j K = ∫_far ∂_j k (mu(y) - mu(x)) + ∫_{|t| <= |x-y| < tau} ... + ∫_{|x-y| < |t|} ...
//!       + mu(x) ∫ ∂_j k(x + t a(x) - y) dσ_y
//! ```
//!
//! with "far" meaning `|x - y| >= tau`, each part paired with its a priori bound.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{adaptive, eval_potential, local_offset, Density, DensityKind, Piece};
use crate::boundary::{Boundary, DistanceProfile, TubularField};
use crate::error::{Error, Result};
use crate::kernels::{HomogeneousKernel, KernelNorm};

/// Constants entering the part bounds for one `(boundary, kernel, j)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitConstants {
    pub j: usize,
    /// Sphere norm of `∂_j k`.
    pub partial_norm: KernelNorm,
    pub c_iv: f64,
    /// `c''` at `lambda = -1`.
    pub c_dprime_m1: f64,
    /// Fitted `C''` of the `mu(x)` term.
    pub c_fit: f64,
    pub perimeter: f64,
    pub diameter: f64,
}

impl SplitConstants {
    pub fn new(b: &Boundary, k: &HomogeneousKernel, j: usize, c_iv: f64, c_dprime_m1: f64, c_fit: f64) -> Self {
        Self {
            j,
            partial_norm: k.partial_norm(j, 1024),
            c_iv,
            c_dprime_m1,
            c_fit,
            perimeter: b.perimeter(),
            diameter: b.diameter(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitDiagnostics {
    pub s: f64,
    pub t: f64,
    pub j: usize,
    pub far_part: f64,
    pub near_far_t: f64,
    pub near_near_t: f64,
    pub mu_term: f64,
    /// Error estimates of the four parts, in the order above.
    pub part_errs: [f64; 4],
    /// `∂_j K(Psi(s, t))` evaluated directly.
    pub direct: f64,
    pub direct_err: f64,
    pub bound_far: f64,
    pub bound_near_far_t: f64,
    pub bound_near_near_t: f64,
    pub bound_mu_term: f64,
}

impl SplitDiagnostics {
    pub fn parts(&self) -> [f64; 4] {
        [self.far_part, self.near_far_t, self.near_near_t, self.mu_term]
    }

    pub fn bounds(&self) -> [f64; 4] {
        [self.bound_far, self.bound_near_far_t, self.bound_near_near_t, self.bound_mu_term]
    }

    /// `bound - |part|` for each part.
    pub fn slacks(&self) -> [f64; 4] {
        let (p, b) = (self.parts(), self.bounds());
        [0, 1, 2, 3].map(|i| b[i] - p[i].abs())
    }

    pub fn identity_residual(&self) -> f64 {
        (self.parts().iter().sum::<f64>() - self.direct).abs()
    }

    /// Twice the summed error estimates of the parts and of the direct value.
    pub fn identity_tolerance(&self) -> f64 {
        2.0 * (self.part_errs.iter().sum::<f64>() + self.direct_err)
    }

    pub fn identity_holds(&self) -> bool {
        self.identity_residual() <= self.identity_tolerance()
    }
}

#[allow(clippy::too_many_arguments)]
pub fn split_diagnostics(
    b: &Boundary,
    k: &HomogeneousKernel,
    mu: &Density,
    field: &TubularField,
    consts: &SplitConstants,
    s: f64,
    t: f64,
    tol: f64,
) -> Result<SplitDiagnostics> {
    let j = consts.j;
    if j != 1 && j != 2 {
        return Err(Error::Domain(format!("component must be 1 or 2, got {j}")));
    }
    let tau = field.tau_cert;
    let limit = field.t1_cert.min(0.5 * tau);
    if !(t < 0.0 && -t < limit) {
        return Err(Error::Domain(format!("t = {t} outside (-min(t1, tau/2), 0) = ({}, 0)", -limit)));
    }
    let x = b.param(s);
    let z = field.psi(b, s, t);
    let (s_c, dist) = b.closest_point(z);
    if dist <= 1e-12 {
        return Err(Error::Singularity("collar point on the boundary".into()));
    }
    let bands = DistanceProfile::new(b, x, s_c - PI).partition(b, &[-t, tau]);
    let last = bands.len() - 1;
    let mut pieces = Vec::new();
    for (i, seg) in bands.iter().enumerate() {
        let lo = if i == 0 { -PI } else { seg.a - s_c };
        let hi = if i == last { PI } else { seg.b - s_c };
        let mut cuts: Vec<f64> = mu
            .breakpoints()
            .iter()
            .map(|&c| local_offset(s_c, c))
            .chain(std::iter::once(0.0))
            .filter(|&c| c > lo + 1e-14 && c < hi - 1e-14)
            .collect();
        cuts.sort_by(f64::total_cmp);
        let mut a = lo;
        for c in cuts.into_iter().chain(std::iter::once(hi)) {
            pieces.push(Piece {
                a,
                b: c,
                label: 2 - seg.band,
            });
            a = c;
        }
    }
    let mu_x = mu.value(x);
    let zc = z - b.param(s_c);
    // labels: 0 far, 1 near/far, 2 near/near; slot 3 collects ∫ ∂_j k
    let r = adaptive(b, s_c, dist, &pieces, tol, |sig, label| {
        let u = s_c + sig;
        let g = k.value_grad(zc - b.chord(s_c, sig)).1.component(j) * b.dparam(u).norm();
        let mut out = [0.0; 4];
        out[label] = (mu.value(b.param(u)) - mu_x) * g;
        out[3] = g;
        out
    })?;
    let direct = eval_potential(b, k, mu, z, tol)?;
    let (direct_j, direct_err) = (direct.grad.component(j), direct.grad_err_est);

    let c0 = consts.partial_norm.c0;
    let lip = mu.lip_const;
    let theta = field.theta_cert;
    let log_t = t.abs().ln().abs();
    Ok(SplitDiagnostics {
        s,
        t,
        j,
        far_part: r.value[0],
        near_far_t: r.value[1],
        near_near_t: r.value[2],
        mu_term: mu_x * r.value[3],
        part_errs: [r.err[0], r.err[1], r.err[2], mu_x.abs() * r.err[3]],
        direct: direct_j,
        direct_err,
        bound_far: c0 * lip * consts.perimeter * consts.diameter * (0.5 * tau).powi(-2),
        bound_near_far_t: c0 * lip / (1.0 - theta) * consts.c_iv * log_t,
        bound_near_near_t: c0 * lip / (1.0 - theta) * consts.c_dprime_m1,
        bound_mu_term: mu_x.abs() * consts.c_fit * consts.partial_norm.c01() * log_t,
    })
}

/// `∫ ∂_j k(Psi(s, t) - y) dσ_y` with its error estimate.
pub fn mu_integral(
    b: &Boundary,
    k: &HomogeneousKernel,
    field: &TubularField,
    s: f64,
    t: f64,
    j: usize,
    tol: f64,
) -> Result<(f64, f64)> {
    let one = Density::new(DensityKind::Const(1.0), b);
    let v = eval_potential(b, k, &one, field.psi(b, s, t), tol)?;
    Ok((v.grad.component(j), v.grad_err_est))
}

/// `C'' = max |∫ ∂_j k(Psi - y) dσ| / (‖∂_j k‖_{C^{0,1}} |log|t||)` over the grid.
pub fn fit_c_dprime(
    b: &Boundary,
    k: &HomogeneousKernel,
    field: &TubularField,
    j: usize,
    s_grid: &[f64],
    t_grid: &[f64],
    tol: f64,
) -> Result<f64> {
    let norm = k.partial_norm(j, 1024).c01();
    if norm == 0.0 {
        return Ok(0.0);
    }
    let jobs: Vec<(f64, f64)> = t_grid.iter().flat_map(|&t| s_grid.iter().map(move |&s| (s, t))).collect();
    let ratios: Vec<Result<f64>> = jobs
        .par_iter()
        .map(|&(s, t)| Ok(mu_integral(b, k, field, s, t, j, tol)?.0.abs() / (norm * t.abs().ln().abs())))
        .collect();
    let mut best = 0.0f64;
    for r in ratios {
        best = best.max(r?);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    use crate::boundary::build_tubular_field;

    fn setup() -> (Boundary, HomogeneousKernel, TubularField) {
        let b = Boundary::ellipse(1.0, 0.5).unwrap();
        let k = HomogeneousKernel::riesz(1).unwrap();
        let f = build_tubular_field(&b, 0.5).unwrap();
        (b, k, f)
    }

    #[test]
    fn parts_sum_to_direct_gradient() {
        let (b, k, f) = setup();
        let mu = Density::new(DensityKind::AbsCoord(1), &b);
        let c = SplitConstants::new(&b, &k, 1, 5.0, 1.0, 1.0);
        for (s, t) in [(0.3, -1e-3), (FRAC_PI_2, -1e-4), (2.748893571891069, -1e-5), (4.0, -1e-2)] {
            let d = split_diagnostics(&b, &k, &mu, &f, &c, s, t, 1e-11).unwrap();
            assert!(d.identity_holds(), "{d:?}");
        }
    }

    #[test]
    fn constant_density_leaves_only_mu_term() {
        let (b, k, f) = setup();
        let mu = Density::new(DensityKind::Const(2.0), &b);
        let c = SplitConstants::new(&b, &k, 2, 5.0, 1.0, 1.0);
        for (s, t) in [(1.0, -1e-3), (FRAC_PI_2, -1e-5), (4.319689, -1e-5)] {
            let d = split_diagnostics(&b, &k, &mu, &f, &c, s, t, 1e-11).unwrap();
            assert_eq!(d.far_part, 0.0);
            assert_eq!(d.near_far_t, 0.0);
            assert_eq!(d.near_near_t, 0.0);
            assert!((d.mu_term - d.direct).abs() <= d.identity_tolerance(), "{d:?}");
        }
    }

    #[test]
    fn t_range_is_checked() {
        let (b, k, f) = setup();
        let mu = Density::new(DensityKind::Coord(1), &b);
        let c = SplitConstants::new(&b, &k, 1, 5.0, 1.0, 1.0);
        assert!(split_diagnostics(&b, &k, &mu, &f, &c, 0.0, 1e-3, 1e-11).is_err());
        assert!(split_diagnostics(&b, &k, &mu, &f, &c, 0.0, -f.t1_cert, 1e-11).is_err());
    }
}


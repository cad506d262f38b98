//! `|∇K|` on the interior collar `Psi(x, t)`, `t < 0`, and the quantity
//! `M = sup |log|t||^{-1} |∇K(x + t a(x))|`.

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{eval_potential, Density};
use crate::boundary::{Boundary, TubularField};
use crate::error::{Error, Result};
use crate::kernels::HomogeneousKernel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanOptions {
    /// `t = -10^d` for `d` evenly spaced in `[decades.0, decades.1]`.
    pub decades: (f64, f64),
    pub n_t: usize,
    pub n_s: usize,
    pub tol: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            decades: (-5.0, -2.0),
            n_t: 7,
            n_s: 256,
            tol: 1e-11,
        }
    }
}

/// `-10^d` on an even grid of exponents, from closest to the curve outward.
pub fn log_t_grid(decades: (f64, f64), n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![-(10f64.powf(decades.0))];
    }
    (0..n)
        .map(|i| -(10f64.powf(decades.0 + (decades.1 - decades.0) * i as f64 / (n - 1) as f64)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientScan {
    pub t_grid: Vec<f64>,
    pub s_grid: Vec<f64>,
    /// `|∇K(Psi(s_i, t_j))|`, indexed `[j][i]`; `NaN` where quadrature did not converge.
    pub grad_norms: Vec<Vec<f64>>,
    pub grad_errs: Vec<Vec<f64>>,
    pub sup_grad_per_t: Vec<f64>,
    pub ratio_per_t: Vec<f64>,
    pub m_est: f64,
    /// `(j, i)` of points whose quadrature hit the refinement cap.
    pub flagged: Vec<(usize, usize)>,
}

impl GradientScan {
    /// Largest gradient error estimate at each `t`.
    pub fn max_err_per_t(&self) -> Vec<f64> {
        self.grad_errs
            .iter()
            .map(|row| row.iter().cloned().filter(|e| e.is_finite()).fold(0.0, f64::max))
            .collect()
    }
}

pub fn gradient_scan(
    b: &Boundary,
    k: &HomogeneousKernel,
    mu: &Density,
    field: &TubularField,
    opts: &ScanOptions,
) -> Result<GradientScan> {
    let t_grid = log_t_grid(opts.decades, opts.n_t);
    for &t in &t_grid {
        if !(t < 0.0 && -t < field.t1_cert) {
            return Err(Error::Domain(format!("scan level t = {t} outside (-t1, 0) with t1 = {}", field.t1_cert)));
        }
    }
    let s_grid: Vec<f64> = (0..opts.n_s).map(|i| TAU * i as f64 / opts.n_s as f64).collect();
    let jobs: Vec<(usize, usize)> = (0..t_grid.len()).flat_map(|j| (0..s_grid.len()).map(move |i| (j, i))).collect();
    let results: Vec<Result<(f64, f64)>> = jobs
        .par_iter()
        .map(|&(j, i)| {
            let x = field.psi(b, s_grid[i], t_grid[j]);
            match eval_potential(b, k, mu, x, opts.tol) {
                Ok(v) => Ok((v.grad.norm(), v.grad_err_est)),
                Err(Error::Convergence { .. }) => Ok((f64::NAN, f64::NAN)),
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut grad_norms = vec![vec![0.0; s_grid.len()]; t_grid.len()];
    let mut grad_errs = grad_norms.clone();
    let mut flagged = Vec::new();
    for (&(j, i), r) in jobs.iter().zip(results) {
        let (g, e) = r?;
        if g.is_nan() {
            flagged.push((j, i));
        }
        grad_norms[j][i] = g;
        grad_errs[j][i] = e;
    }
    let sup_grad_per_t: Vec<f64> = grad_norms
        .iter()
        .map(|row| row.iter().cloned().filter(|g| !g.is_nan()).fold(0.0, f64::max))
        .collect();
    let ratio_per_t: Vec<f64> = sup_grad_per_t
        .iter()
        .zip(&t_grid)
        .map(|(g, t)| g / t.abs().ln().abs())
        .collect();
    let m_est = ratio_per_t.iter().cloned().fold(0.0, f64::max);
    Ok(GradientScan {
        t_grid,
        s_grid,
        grad_norms,
        grad_errs,
        sup_grad_per_t,
        ratio_per_t,
        m_est,
        flagged,
    })
}

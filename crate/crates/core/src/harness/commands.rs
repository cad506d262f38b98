use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::ExperimentConfig;
use super::report::{Cell, Check, CommandOutput, Csv};
use crate::boundary::{extract_cylinder, Boundary, FieldConditions, FieldOptions, Side, TubularField};
use crate::error::{Error, Result};
use crate::geoconst::{
    compute_c_dprime_with, compute_c_iv_with, compute_c_prime_with, compute_c_tprime_with, default_s_grid,
    default_s_grid_iv, log_grid, ConstantEstimate,
};
use crate::kernels::HomogeneousKernel;
use crate::modulus::{seminorm_estimate_with, Modulus, PowerModulus, SampledFunction, SeminormOptions, SeminormStatus};
use crate::potential::{
    eval_composite, eval_potential, eval_potential_at_level, fit_c_dprime, gradient_scan, mu_integral,
    split_diagnostics, Density, DensityKind, GradientScan, PotentialValue, ScanOptions, SplitConstants,
};
use crate::vec2::Vec2;

/// Fractional variation below which a gradient scan counts as bounded.
const BOUNDED_VARIATION: f64 = 0.2;
const STABILITY_FACTOR: f64 = 2.0;
const SIDE_SAMPLES: usize = 10_000;
const IDENTITY_REL: f64 = 1e-12;

fn field_options(cfg: &ExperimentConfig) -> FieldOptions {
    FieldOptions {
        seed: cfg.seed,
        ..FieldOptions::default()
    }
}

pub fn build_field(cfg: &ExperimentConfig, b: &Boundary) -> Result<TubularField> {
    TubularField::build(b, cfg.theta, &field_options(cfg))
}

/// Evaluates at every point; `None` where quadrature hit its refinement cap.
fn eval_points(
    b: &Boundary,
    k: &HomogeneousKernel,
    mu: &Density,
    pts: &[Vec2],
    tol: f64,
) -> Result<Vec<Option<PotentialValue>>> {
    pts.par_iter()
        .map(|&x| match eval_potential(b, k, mu, x, tol) {
            Ok(v) => Ok(Some(v)),
            Err(Error::Convergence { .. }) => Ok(None),
            Err(e) => Err(e),
        })
        .collect()
}

fn max_over_min(v: &[f64]) -> f64 {
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    if v.is_empty() {
        1.0
    } else {
        hi / lo
    }
}

fn is_smooth(kind: DensityKind) -> bool {
    !matches!(kind, DensityKind::AbsCoord(_))
}

// ---------------------------------------------------------------- field-check

#[derive(Debug, Clone, Serialize)]
pub struct FieldReport {
    pub boundary: String,
    pub theta: f64,
    pub tau: f64,
    pub t1: f64,
    pub lip_a: f64,
    pub smoothing_width: f64,
    pub modes: usize,
    pub injectivity_radius: f64,
    pub conditions: FieldConditions,
    /// The same margins on a grid four times finer.
    pub fine_conditions: FieldConditions,
    pub collision_pairs: usize,
    pub collisions: usize,
    pub side_samples: usize,
    pub side_disagreements: usize,
    pub lower_bound_slack: f64,
}

pub fn cmd_field_check(cfg: &ExperimentConfig) -> Result<CommandOutput> {
    let b = cfg.boundary()?;
    let f = build_field(cfg, &b)?;
    let opts = field_options(cfg);
    let fine = f.check_conditions(&b, 4 * opts.check_nodes);
    let side = f.side_disagreements(&b, SIDE_SAMPLES, cfg.seed);
    let lb = f.lower_bound_slack(&b, 256, 8);
    let c = f.conditions;
    let mut out = CommandOutput::new("field-check");
    out.checks = vec![
        Check::new("field.unit", "| |a(x)| - 1 | <= 1e-12", c.unit_margin),
        Check::new("field.sup", "sup |a - nu| < theta", c.sup_margin),
        Check::new("field.dot", "a·nu > 1 - theta^2/2", c.dot_margin),
        Check::new("field.pair", "|a(x)·(y - x)| < theta |x - y| for |x - y| < tau", c.pair_margin),
        Check::new("field.fine_grid", "all four margins > 0 on the 4x grid", fine.min_margin()),
        Check::new("field.injective", "Psi(s,t) != Psi(u,r) on sampled pairs", -(f.collisions as f64)),
        Check::new("field.side", "Psi(x,t) inside iff t < 0", -(side as f64)),
        Check::new(
            "field.lower_bound",
            "|x - y + t a(x)| >= (1 - theta)^(1/2) (|x - y|^2 + t^2)^(1/2)",
            lb + 1e-12,
        ),
    ];
    let report = FieldReport {
        boundary: b.name.clone(),
        theta: f.theta_cert,
        tau: f.tau_cert,
        t1: f.t1_cert,
        lip_a: f.lip_a,
        smoothing_width: f.smoothing_width,
        modes: f.modes(),
        injectivity_radius: f.injectivity_radius,
        conditions: c,
        fine_conditions: fine,
        collision_pairs: f.collision_pairs,
        collisions: f.collisions,
        side_samples: SIDE_SAMPLES,
        side_disagreements: side,
        lower_bound_slack: lb,
    };
    out.push_report(&report);
    Ok(out)
}

// ---------------------------------------------------------------- grad-scan

#[derive(Debug, Clone, Serialize)]
pub struct ScanSummary {
    pub kernel: String,
    pub density: String,
    pub t_grid: Vec<f64>,
    pub sup_grad_per_t: Vec<f64>,
    pub ratio_per_t: Vec<f64>,
    pub max_err_per_t: Vec<f64>,
    pub m_est: f64,
    pub flagged: usize,
}

impl ScanSummary {
    fn new(k: &HomogeneousKernel, mu: &Density, s: &GradientScan) -> Self {
        Self {
            kernel: k.label.clone(),
            density: mu.label.clone(),
            t_grid: s.t_grid.clone(),
            sup_grad_per_t: s.sup_grad_per_t.clone(),
            ratio_per_t: s.ratio_per_t.clone(),
            max_err_per_t: s.max_err_per_t(),
            m_est: s.m_est,
            flagged: s.flagged.len(),
        }
    }

    fn csv(&self) -> String {
        let mut c = Csv::new(&["t", "abs_log_t", "sup_grad", "sup_grad_over_abs_log_t", "max_grad_err"]);
        for j in 0..self.t_grid.len() {
            let t = self.t_grid[j];
            c.row(vec![
                t.into(),
                t.abs().ln().abs().into(),
                self.sup_grad_per_t[j].into(),
                self.ratio_per_t[j].into(),
                self.max_err_per_t[j].into(),
            ]);
        }
        c.finish()
    }

    /// `(max - min) / max` of the per-level sups, or 0 when every sup is at the
    /// quadrature noise level (a gradient that vanishes identically).
    pub fn variation(&self) -> f64 {
        let hi = self.sup_grad_per_t.iter().cloned().fold(0.0, f64::max);
        let lo = self.sup_grad_per_t.iter().cloned().fold(f64::INFINITY, f64::min);
        let noise = self.max_err_per_t.iter().cloned().fold(0.0, f64::max);
        if hi <= 100.0 * noise.max(1e-13) {
            0.0
        } else {
            (hi - lo) / hi
        }
    }

    /// Raw growth of the sup from the outermost to the innermost level.
    pub fn growth(&self) -> f64 {
        let inner = self.sup_grad_per_t[0];
        let outer = *self.sup_grad_per_t.last().unwrap();
        inner / outer
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GradScanReport {
    pub scan: ScanSummary,
    pub kernel_norm: f64,
    pub density_norm: f64,
    pub fitted_c2: f64,
    pub smooth_density: bool,
    pub bounded_gradient: Option<bool>,
    pub variation: f64,
    pub log_ratio_spread: f64,
    pub growth: f64,
    /// Even kernel, recorded for comparison only.
    pub even_control: ScanSummary,
}

pub fn scan_options(cfg: &ExperimentConfig) -> ScanOptions {
    ScanOptions {
        decades: (cfg.scan.decades[0], cfg.scan.decades[1]),
        n_t: cfg.scan.n_t,
        n_s: cfg.scan.n_s,
        tol: cfg.tol,
    }
}

pub fn cmd_grad_scan(cfg: &ExperimentConfig) -> Result<CommandOutput> {
    let b = cfg.boundary()?;
    let f = build_field(cfg, &b)?;
    let k = cfg.kernel()?;
    let mu = Density::new(cfg.density, &b);
    let opts = scan_options(cfg);
    let scan = gradient_scan(&b, &k, &mu, &f, &opts)?;
    let even = HomogeneousKernel::even_control();
    let even_scan = gradient_scan(&b, &even, &mu, &f, &opts)?;

    let summary = ScanSummary::new(&k, &mu, &scan);
    let kernel_norm = k.sphere_norm(1024).total;
    let density_norm = mu.norm_c01();
    let smooth = is_smooth(cfg.density);
    let variation = summary.variation();
    let spread = max_over_min(&summary.ratio_per_t);
    let growth = summary.growth();

    let mut out = CommandOutput::new("grad-scan");
    out.nonconverged = scan.flagged.len();
    out.checks.push(Check::flag(
        "grad_scan.finite",
        "M = sup |log|t||^-1 |grad K(Psi(x,t))| < inf",
        summary.m_est,
        summary.m_est.is_finite(),
    ));
    if smooth {
        out.checks.push(Check::new(
            "grad_scan.bounded",
            "(max_t - min_t) sup_x |grad K| <= 0.2 max_t sup_x |grad K|",
            BOUNDED_VARIATION - variation,
        ));
    } else {
        out.checks.push(Check::new(
            "grad_scan.log_shape",
            "max_t / min_t of sup_x |grad K| / |log|t|| <= 2",
            STABILITY_FACTOR - spread,
        ));
        out.checks.push(Check::new(
            "grad_scan.growth",
            "sup |grad K| at the innermost level >= 1.5 x outermost",
            growth - 1.5,
        ));
    }
    let report = GradScanReport {
        fitted_c2: summary.m_est / (kernel_norm * density_norm),
        kernel_norm,
        density_norm,
        smooth_density: smooth,
        bounded_gradient: smooth.then_some(variation <= BOUNDED_VARIATION),
        variation,
        log_ratio_spread: spread,
        growth,
        even_control: ScanSummary::new(&even, &mu, &even_scan),
        scan: summary,
    };
    out.push_file("grad_scan.csv", report.scan.csv());
    out.push_file("grad_scan_even_control.csv", report.even_control.csv());
    out.push_report(&report);
    Ok(out)
}

// ---------------------------------------------------------------- holder

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HolderSide {
    Interior,
    Exterior,
}

impl HolderSide {
    fn name(self) -> &'static str {
        match self {
            HolderSide::Interior => "interior",
            HolderSide::Exterior => "exterior",
        }
    }
}

/// Layered cloud: `Psi(s_i, ±t_j)` followed by the compact grid `H`.
#[derive(Debug, Clone)]
pub struct PointCloud {
    pub points: Vec<Vec2>,
    /// `(s, t)` for layer points, `None` for points of `H`.
    pub layer: Vec<Option<(f64, f64)>>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

fn bounding_box(b: &Boundary) -> (Vec2, Vec2) {
    let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = -lo;
    for i in 0..1024 {
        let p = b.param(TAU * i as f64 / 1024.0);
        lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    (lo, hi)
}

pub fn holder_cloud(cfg: &ExperimentConfig, b: &Boundary, f: &TubularField, side: HolderSide) -> Result<PointCloud> {
    let h = &cfg.holder;
    let t1 = f.t1_cert;
    if !(h.t_min < 0.9 * t1) {
        return Err(Error::Config(format!("holder t_min {} must be below 0.9 t1 = {}", h.t_min, 0.9 * t1)));
    }
    let sign = match side {
        HolderSide::Interior => -1.0,
        HolderSide::Exterior => 1.0,
    };
    let ts = log_grid(h.t_min, 0.9 * t1, h.n_t);
    let mut points = Vec::new();
    let mut layer = Vec::new();
    for &t in &ts {
        for i in 0..h.n_s {
            let s = TAU * i as f64 / h.n_s as f64;
            points.push(f.tubular_map(b, s, sign * t)?);
            layer.push(Some((s, sign * t)));
        }
    }
    let (lo, hi, keep): (Vec2, Vec2, Box<dyn Fn(Vec2) -> bool + Sync>) = match side {
        HolderSide::Interior => {
            let (lo, hi) = bounding_box(b);
            (lo, hi, Box::new(|x| b.side(x) == Side::Inside))
        }
        HolderSide::Exterior => {
            let r = 2.0 * b.circumradius();
            (
                Vec2::new(-r, -r),
                Vec2::new(r, r),
                Box::new(move |x: Vec2| x.norm() < r && b.side(x) == Side::Outside),
            )
        }
    };
    let n = h.h_grid;
    let h_pts: Vec<Vec2> = (0..n * n)
        .into_par_iter()
        .filter_map(|ij| {
            let (i, j) = (ij % n, ij / n);
            let x = Vec2::new(
                lo.x + (hi.x - lo.x) * (i as f64 + 0.5) / n as f64,
                lo.y + (hi.y - lo.y) * (j as f64 + 0.5) / n as f64,
            );
            (keep(x) && b.distance(x) >= t1).then_some(x)
        })
        .collect();
    for x in h_pts {
        points.push(x);
        layer.push(None);
    }
    Ok(PointCloud { points, layer })
}

#[derive(Debug, Clone, Serialize)]
pub struct HolderStats {
    pub kernel: String,
    pub density: String,
    pub points: usize,
    pub dropped: usize,
    pub seminorm_omega1: f64,
    pub seminorm_status: SeminormStatus,
    pub seminorm_pairs: usize,
    pub seminorm_lipschitz: f64,
    pub sup_h_value: f64,
    pub sup_h_grad: f64,
    pub m_est: f64,
    /// The gradient is indistinguishable from quadrature error on the whole cloud,
    /// so the potential is constant there and the fitted ratios are noise.
    pub degenerate: bool,
    /// `None` when the denominator vanishes or the potential is degenerate.
    pub fitted_b: Option<f64>,
    pub fitted_c2: Option<f64>,
}

struct Sampled {
    stats: HolderStats,
    values: Vec<Option<PotentialValue>>,
}

fn holder_stats(
    cfg: &ExperimentConfig,
    b: &Boundary,
    k: &HomogeneousKernel,
    mu: &Density,
    cloud: &PointCloud,
) -> Result<Sampled> {
    let values = eval_points(b, k, mu, &cloud.points, cfg.tol)?;
    let (mut pts, mut vals) = (Vec::new(), Vec::new());
    let (mut sup_v, mut sup_g, mut m_est) = (0.0f64, 0.0f64, 0.0f64);
    let (mut grad_all, mut grad_err) = (0.0f64, 0.0f64);
    for ((x, l), v) in cloud.points.iter().zip(&cloud.layer).zip(&values) {
        let Some(v) = v else { continue };
        pts.push(*x);
        vals.push(v.value);
        grad_all = grad_all.max(v.grad.norm());
        grad_err = grad_err.max(v.grad_err_est);
        match l {
            Some((_, t)) => m_est = m_est.max(v.grad.norm() / t.abs().ln().abs()),
            None => {
                sup_v = sup_v.max(v.value.abs());
                sup_g = sup_g.max(v.grad.norm());
            }
        }
    }
    let dropped = cloud.len() - pts.len();
    let sf = SampledFunction::new(pts, vals, format!("K[{}, {}]", k.label, mu.label))?;
    let opts = SeminormOptions {
        max_pairs: cfg.holder.pair_budget,
        seed: cfg.seed,
        ..SeminormOptions::default()
    };
    let om = seminorm_estimate_with(&sf, &Modulus::omega1(), &opts)?;
    let lip = seminorm_estimate_with(&sf, &PowerModulus { alpha: 1.0 }, &opts)?;
    let denom_b = sup_v.max(sup_g).max(m_est);
    let denom_c = k.sphere_norm(1024).total * mu.norm_c01();
    let degenerate = grad_all <= 100.0 * grad_err;
    Ok(Sampled {
        stats: HolderStats {
            kernel: k.label.clone(),
            density: mu.label.clone(),
            points: sf.len(),
            dropped,
            seminorm_omega1: om.value,
            seminorm_status: om.status,
            seminorm_pairs: om.pair_count,
            seminorm_lipschitz: lip.value,
            sup_h_value: sup_v,
            sup_h_grad: sup_g,
            m_est,
            degenerate,
            fitted_b: (denom_b > 0.0 && !degenerate).then(|| om.value / denom_b),
            fitted_c2: (denom_c > 0.0 && !degenerate).then(|| m_est / denom_c),
        },
        values,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct HolderReport {
    pub side: HolderSide,
    pub t1: f64,
    pub layer_points: usize,
    pub h_points: usize,
    /// Radius of the ball `B(0, r)`, exterior mode only.
    pub ball_radius: Option<f64>,
    pub primary: HolderStats,
    pub family: Vec<HolderStats>,
    pub fitted_b_spread: f64,
    pub fitted_c2_spread: f64,
    pub bilinearity_points: usize,
    pub bilinearity_max_rel: f64,
    pub zero_extension_points: Option<usize>,
    pub zero_extension_max_rel: Option<f64>,
}

/// `max |K[a k, b mu] - a b K[k, mu]| / (|a b| ∫|k mu|)` at seeded cloud points, both
/// sides evaluated on the same refinement level.
fn bilinearity(
    cfg: &ExperimentConfig,
    b: &Boundary,
    k: &HomogeneousKernel,
    mu: &Density,
    cloud: &PointCloud,
    values: &[Option<PotentialValue>],
) -> Result<(usize, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xb111);
    let mut jobs = Vec::new();
    let mut guard = 0;
    while jobs.len() < cfg.holder.check_points && guard < 100 * cfg.holder.check_points.max(1) {
        guard += 1;
        let i = rng.gen_range(0..cloud.len());
        let alpha: f64 = rng.gen_range(-2.0..2.0);
        let beta: f64 = rng.gen_range(-2.0..2.0);
        if let Some(v) = values[i] {
            jobs.push((cloud.points[i], alpha, beta, v));
        }
    }
    let errs: Vec<Result<f64>> = jobs
        .par_iter()
        .map(|&(x, alpha, beta, v)| {
            let base = eval_potential_at_level(b, k, mu, x, v.levels_used)?;
            let scaled = eval_potential_at_level(b, &k.scaled(alpha), &mu.scaled(beta), x, v.levels_used)?;
            let scale = (alpha * beta).abs() * v.abs_scale;
            Ok(if scale > 0.0 { (scaled - alpha * beta * base).abs() / scale } else { 0.0 })
        })
        .collect();
    let mut worst = 0.0f64;
    for e in errs {
        worst = worst.max(e?);
    }
    Ok((jobs.len(), worst))
}

/// Potential of `mu` on the curve against the potential over the boundary of
/// `B(0, r) \ closure(Omega)` with the zero extension of `mu` to the outer circle.
fn zero_extension(
    cfg: &ExperimentConfig,
    b: &Boundary,
    k: &HomogeneousKernel,
    mu: &Density,
    r: f64,
) -> Result<(usize, f64)> {
    let outer = Boundary::circle(r)?;
    let zero = Density::zero(&outer);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xe47);
    let mut pts = Vec::new();
    while pts.len() < cfg.holder.check_points {
        let x = Vec2::new(rng.gen_range(-r..r), rng.gen_range(-r..r));
        if x.norm() < 0.99 * r && b.side(x) == Side::Outside && b.distance(x) > 1e-3 {
            pts.push(x);
        }
    }
    let errs: Vec<Result<f64>> = pts
        .par_iter()
        .map(|&x| {
            let direct = eval_potential(b, k, mu, x, cfg.tol)?;
            let comp = eval_composite(&[(b, mu), (&outer, &zero)], k, x, cfg.tol)?;
            let scale = direct.abs_scale.max(f64::MIN_POSITIVE);
            let dv = (comp.value - direct.value).abs() / scale;
            let dg = (comp.grad - direct.grad).norm() / scale;
            Ok(dv.max(dg))
        })
        .collect();
    let mut worst = 0.0f64;
    for e in errs {
        worst = worst.max(e?);
    }
    Ok((pts.len(), worst))
}

fn spread(v: impl Iterator<Item = Option<f64>>) -> f64 {
    let xs: Vec<f64> = v.flatten().filter(|x| *x > 0.0).collect();
    max_over_min(&xs)
}

pub fn cmd_holder(cfg: &ExperimentConfig, side: HolderSide) -> Result<CommandOutput> {
    let b = cfg.boundary()?;
    let f = build_field(cfg, &b)?;
    let k = cfg.kernel()?;
    let mu = Density::new(cfg.density, &b);
    let cloud = holder_cloud(cfg, &b, &f, side)?;
    let primary = holder_stats(cfg, &b, &k, &mu, &cloud)?;

    let mut family = Vec::new();
    for kk in cfg.kernels()? {
        for &dk in &cfg.density_family {
            let m = Density::new(dk, &b);
            family.push(holder_stats(cfg, &b, &kk, &m, &cloud)?.stats);
        }
    }
    let b_spread = spread(family.iter().map(|s| s.fitted_b));
    let c2_spread = spread(family.iter().map(|s| s.fitted_c2));
    let (bil_n, bil) = bilinearity(cfg, &b, &k, &mu, &cloud, &primary.values)?;
    let r = 2.0 * b.circumradius();
    let zero_ext = match side {
        HolderSide::Exterior => Some(zero_extension(cfg, &b, &k, &mu, r)?),
        HolderSide::Interior => None,
    };

    let name = side.name();
    let mut out = CommandOutput::new(&format!("holder-{name}"));
    out.nonconverged = primary.stats.dropped + family.iter().map(|s| s.dropped).sum::<usize>();
    let p = &primary.stats;
    out.checks.push(Check::flag(
        &format!("holder.{name}.seminorm_finite"),
        "|K|_omega1 < inf on the sampled cloud",
        p.seminorm_omega1,
        p.seminorm_omega1.is_finite() && p.seminorm_status != SeminormStatus::Overflow,
    ));
    out.checks.push(Check::new(
        &format!("holder.{name}.fitted_b_stability"),
        "max / min of |K|_omega1 / max{sup_H|K|, sup_H|grad K|, M} over non-degenerate members <= 2",
        STABILITY_FACTOR - b_spread,
    ));
    out.checks.push(Check::new(
        &format!("holder.{name}.fitted_c2_stability"),
        "max / min of M / (||k|| ||mu||) over non-degenerate members <= 2",
        STABILITY_FACTOR - c2_spread,
    ));
    out.checks.push(Check::new(
        &format!("holder.{name}.bilinearity"),
        "|K[a k, b mu] - a b K[k, mu]| <= 1e-12 |a b| ∫|k mu|",
        IDENTITY_REL - bil,
    ));
    if let Some((_, z)) = zero_ext {
        out.checks.push(Check::new(
            "holder.exterior.zero_extension",
            "K over the curve = K over the boundary of B(0,r) minus the domain with mu extended by 0",
            IDENTITY_REL - z,
        ));
    }

    let mut csv = Csv::new(&["kind", "s", "t", "x", "y", "value", "grad_norm", "err_est", "grad_err_est"]);
    for ((x, l), v) in cloud.points.iter().zip(&cloud.layer).zip(&primary.values) {
        let (kind, s, t) = match l {
            Some((s, t)) => ("layer", *s, *t),
            None => ("h", f64::NAN, f64::NAN),
        };
        let (val, g, e, ge) = match v {
            Some(v) => (v.value, v.grad.norm(), v.err_est, v.grad_err_est),
            None => (f64::NAN, f64::NAN, f64::NAN, f64::NAN),
        };
        csv.row(vec![kind.into(), s.into(), t.into(), x.x.into(), x.y.into(), val.into(), g.into(), e.into(), ge.into()]);
    }
    out.push_file(&format!("holder_{name}.csv"), csv.finish());

    let mut fam = Csv::new(&[
        "kernel",
        "density",
        "seminorm_omega1",
        "seminorm_lipschitz",
        "sup_h_value",
        "sup_h_grad",
        "m_est",
        "degenerate",
        "fitted_b",
        "fitted_c2",
    ]);
    for s in &family {
        fam.row(vec![
            s.kernel.clone().into(),
            s.density.clone().into(),
            s.seminorm_omega1.into(),
            s.seminorm_lipschitz.into(),
            s.sup_h_value.into(),
            s.sup_h_grad.into(),
            s.m_est.into(),
            (s.degenerate as usize).into(),
            s.fitted_b.unwrap_or(f64::NAN).into(),
            s.fitted_c2.unwrap_or(f64::NAN).into(),
        ]);
    }
    out.push_file(&format!("holder_{name}_family.csv"), fam.finish());

    let layer_points = cloud.layer.iter().filter(|l| l.is_some()).count();
    let report = HolderReport {
        side,
        t1: f.t1_cert,
        layer_points,
        h_points: cloud.len() - layer_points,
        ball_radius: (side == HolderSide::Exterior).then_some(r),
        primary: primary.stats,
        family,
        fitted_b_spread: b_spread,
        fitted_c2_spread: c2_spread,
        bilinearity_points: bil_n,
        bilinearity_max_rel: bil,
        zero_extension_points: zero_ext.map(|z| z.0),
        zero_extension_max_rel: zero_ext.map(|z| z.1),
    };
    out.push_report(&report);
    Ok(out)
}

// ---------------------------------------------------------------- split

#[derive(Debug, Clone, Serialize)]
pub struct SplitReport {
    pub kernel: String,
    pub component: usize,
    pub constants: SplitConstants,
    pub t_grid: Vec<f64>,
    pub s_grid: Vec<f64>,
    /// Per density: the fitted ratio restricted to points where `mu(x) != 0`.
    pub c_fit_per_density: Vec<(String, f64)>,
    pub c_fit_spread: f64,
    /// Largest ratio on a shifted grid, divided by the fitted constant.
    pub holdout_ratio: f64,
    pub rows: usize,
    pub min_slack_plus_err: [f64; 4],
    pub min_identity_margin: f64,
}

pub fn split_grids(cfg: &ExperimentConfig, f: &TubularField, shift: bool, n_s: usize, n_t: usize) -> (Vec<f64>, Vec<f64>) {
    let hi = 0.9 * f.t1_cert.min(0.5 * f.tau_cert);
    let off = if shift { 0.5 } else { 0.0 };
    let s: Vec<f64> = (0..n_s).map(|i| TAU * (i as f64 + off) / n_s as f64).collect();
    let t: Vec<f64> = log_grid(cfg.split.t_min, hi, n_t).into_iter().map(|t| -t).collect();
    (s, t)
}

pub fn cmd_split(cfg: &ExperimentConfig) -> Result<CommandOutput> {
    let b = cfg.boundary()?;
    let f = build_field(cfg, &b)?;
    let k = cfg.kernel()?;
    let j = cfg.split.component;
    let sc = &cfg.split;
    if !(sc.t_min < 0.9 * f.t1_cert.min(0.5 * f.tau_cert)) {
        return Err(Error::Config("split t_min must lie below 0.9 min(t1, tau/2)".into()));
    }
    let n_x = cfg.constants.x_nodes;
    let c_iv = compute_c_iv_with(&b, &default_s_grid_iv(cfg.constants.s_count), n_x)?.value;
    let c_dm1 = compute_c_dprime_with(&b, -1.0, &default_s_grid(&b, cfg.constants.s_count), n_x)?.value;
    let (s_grid, t_grid) = split_grids(cfg, &f, false, sc.n_s, sc.n_t);
    let c_fit = fit_c_dprime(&b, &k, &f, j, &s_grid, &t_grid, cfg.tol)?;
    let consts = SplitConstants::new(&b, &k, j, c_iv, c_dm1, c_fit);

    let (hs, ht) = split_grids(cfg, &f, true, sc.fit_n_s, sc.fit_n_t);
    let holdout = fit_c_dprime(&b, &k, &f, j, &hs, &ht, cfg.tol)?;
    let holdout_ratio = if c_fit > 0.0 { holdout / c_fit } else { 0.0 };

    let norm = consts.partial_norm.c01();
    let pts: Vec<(f64, f64)> = t_grid.iter().flat_map(|&t| s_grid.iter().map(move |&s| (s, t))).collect();
    let ints: Vec<f64> = pts
        .par_iter()
        .map(|&(s, t)| mu_integral(&b, &k, &f, s, t, j, cfg.tol).map(|v| v.0))
        .collect::<Result<_>>()?;

    let mut out = CommandOutput::new("split");
    let mut csv = Csv::new(&[
        "density",
        "s",
        "t",
        "j",
        "far_part",
        "near_far_t",
        "near_near_t",
        "mu_term",
        "err_far",
        "err_near_far_t",
        "err_near_near_t",
        "err_mu_term",
        "direct",
        "direct_err",
        "bound_far",
        "bound_near_far_t",
        "bound_near_near_t",
        "bound_mu_term",
        "slack_far",
        "slack_near_far_t",
        "slack_near_near_t",
        "slack_mu_term",
        "identity_residual",
        "identity_tolerance",
    ]);
    let mut per_density = Vec::new();
    let mut min_slack = [f64::INFINITY; 4];
    let mut min_ident = f64::INFINITY;
    let mut rows = 0;
    for &dk in &cfg.density_family {
        let mu = Density::new(dk, &b);
        let mut fit = 0.0f64;
        for (&(s, t), &v) in pts.iter().zip(&ints) {
            if mu.mu_at(&b, s) != 0.0 && norm > 0.0 {
                fit = fit.max(v.abs() / (norm * t.abs().ln().abs()));
            }
        }
        per_density.push((mu.label.clone(), fit));
        let diags: Vec<Result<_>> = pts
            .par_iter()
            .map(|&(s, t)| split_diagnostics(&b, &k, &mu, &f, &consts, s, t, cfg.tol))
            .collect();
        for d in diags {
            let d = match d {
                Ok(d) => d,
                Err(Error::Convergence { .. }) => {
                    out.nonconverged += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            rows += 1;
            let (p, e, bd, sl) = (d.parts(), d.part_errs, d.bounds(), d.slacks());
            for i in 0..4 {
                min_slack[i] = min_slack[i].min(sl[i] + 2.0 * e[i]);
            }
            min_ident = min_ident.min(d.identity_tolerance() - d.identity_residual());
            let mut row: Vec<Cell> = vec![mu.label.clone().into(), d.s.into(), d.t.into(), d.j.into()];
            row.extend(p.iter().map(|&v| v.into()));
            row.extend(e.iter().map(|&v| v.into()));
            row.push(d.direct.into());
            row.push(d.direct_err.into());
            row.extend(bd.iter().map(|&v| v.into()));
            row.extend(sl.iter().map(|&v| v.into()));
            row.push(d.identity_residual().into());
            row.push(d.identity_tolerance().into());
            csv.row(row);
        }
    }
    let c_fit_spread = spread(per_density.iter().map(|p| Some(p.1)));
    let names = [
        ("split.far", "|far part| <= c0 |mu|_1 |dOmega| diam (tau/2)^-2"),
        ("split.near_far", "|near part, |x-y| >= |t|| <= c0 |mu|_1 (1-theta)^-1 c_iv |log|t||"),
        ("split.near_near", "|near part, |x-y| < |t|| <= c0 |mu|_1 (1-theta)^-1 c''(-1)"),
        ("split.mu_term", "|mu(x) ∫ d_j k| <= |mu(x)| C'' ||d_j k||_C01 |log|t||"),
    ];
    for (i, (id, ineq)) in names.iter().enumerate() {
        out.checks.push(Check::new(id, ineq, min_slack[i]));
    }
    out.checks.push(Check::new(
        "split.identity",
        "|sum of parts - d_j K| <= 2 (sum of error estimates)",
        min_ident,
    ));
    out.checks.push(Check::new(
        "split.c_fit_stability",
        "max / min of fitted C'' over the density family <= 2",
        STABILITY_FACTOR - c_fit_spread,
    ));
    out.push_file("split.csv", csv.finish());
    let report = SplitReport {
        kernel: k.label.clone(),
        component: j,
        constants: consts,
        t_grid,
        s_grid,
        c_fit_per_density: per_density,
        c_fit_spread,
        holdout_ratio,
        rows,
        min_slack_plus_err: min_slack,
        min_identity_margin: min_ident,
    };
    out.push_report(&report);
    Ok(out)
}

// ---------------------------------------------------------------- constants

#[derive(Debug, Clone, Serialize)]
pub struct ConstantEntry {
    pub name: String,
    pub lambda: Option<f64>,
    pub estimate: ConstantEstimate,
    pub refined: ConstantEstimate,
    pub rel_delta: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstantsReport {
    pub boundary: String,
    pub perimeter: f64,
    pub diameter: f64,
    pub constants: Vec<ConstantEntry>,
}

pub fn cmd_constants(cfg: &ExperimentConfig) -> Result<CommandOutput> {
    let b = cfg.boundary()?;
    let (nx, ns) = (cfg.constants.x_nodes, cfg.constants.s_count);
    let pair = |name: &str,
                lambda: Option<f64>,
                f: &dyn Fn(usize, usize) -> Result<ConstantEstimate>|
     -> Result<ConstantEntry> {
        let estimate = f(nx, ns)?;
        let refined = f(2 * nx, 2 * ns)?;
        let rel_delta = if refined.value == 0.0 && estimate.value == 0.0 {
            0.0
        } else {
            (refined.value - estimate.value).abs() / refined.value.abs().max(estimate.value.abs())
        };
        Ok(ConstantEntry {
            name: name.into(),
            lambda,
            estimate,
            refined,
            rel_delta,
        })
    };
    let bb = &b;
    let mut entries = Vec::new();
    for lam in [0.0, 0.5] {
        entries.push(pair("c_prime", Some(lam), &|n, _| compute_c_prime_with(bb, lam, n))?);
    }
    for lam in [0.5, 0.0, -1.0] {
        entries.push(pair("c_dprime", Some(lam), &|n, m| compute_c_dprime_with(bb, lam, &default_s_grid(bb, m), n))?);
    }
    entries.push(pair("c_tprime", Some(2.0), &|n, m| compute_c_tprime_with(bb, 2.0, &default_s_grid(bb, m), n))?);
    entries.push(pair("c_iv", None, &|n, m| compute_c_iv_with(bb, &default_s_grid_iv(m), n))?);

    let mut out = CommandOutput::new("constants");
    for e in &entries {
        let tag = match e.lambda {
            Some(l) => format!("constants.{}({l})", e.name),
            None => format!("constants.{}", e.name),
        };
        out.checks.push(Check::flag(
            &format!("{tag}.finite"),
            "0 <= constant < inf",
            e.estimate.value,
            e.estimate.value.is_finite() && e.estimate.value >= 0.0,
        ));
        out.checks.push(Check::new(
            &format!("{tag}.grid_stability"),
            "relative change under doubled grids <= 0.02",
            0.02 - e.rel_delta,
        ));
    }
    let perimeter = b.perimeter();
    out.checks.push(Check::new(
        "constants.c_prime(0).perimeter",
        "|c'(0) - |dOmega|| <= 1e-8",
        1e-8 - (entries[0].estimate.value - perimeter).abs(),
    ));
    let report = ConstantsReport {
        boundary: b.name.clone(),
        perimeter,
        diameter: b.diameter(),
        constants: entries,
    };
    out.push_report(&report);
    Ok(out)
}

// ---------------------------------------------------------------- cylinder

#[derive(Debug, Clone, Serialize)]
pub struct CylinderReport {
    pub p_param: f64,
    pub p: Vec2,
    pub r: f64,
    pub delta: f64,
    pub t2: f64,
    pub sup_gamma_prime: f64,
    pub uniform_bound_holds: bool,
    pub gamma_at_zero: f64,
    pub max_residual: f64,
    pub samples: usize,
    pub seminorm_omega1: f64,
    pub seminorm_status: SeminormStatus,
    pub m_est: f64,
    /// `seminorm_omega1 / m_est`.
    pub empirical_b: Option<f64>,
}

/// `0.9 min{r/4, (1-theta)^(1/2) / (2 sqrt 2 (Lip a + 1)), t1/2}`.
pub fn cylinder_t2(f: &TubularField, r: f64) -> f64 {
    let a = 0.25 * r;
    let b = (1.0 - f.theta_cert).sqrt() / (2.0 * 2f64.sqrt() * (f.lip_a + 1.0));
    0.9 * a.min(b).min(0.5 * f.t1_cert)
}

pub fn cmd_cylinder(cfg: &ExperimentConfig) -> Result<CommandOutput> {
    let b = cfg.boundary()?;
    let f = build_field(cfg, &b)?;
    let k = cfg.kernel()?;
    let mu = Density::new(cfg.density, &b);
    let cc = &cfg.cylinder;
    let cyl = extract_cylinder(&b, cc.p_param, cc.r, cc.delta).map_err(|e| Error::Config(e.to_string()))?;
    let t2 = cylinder_t2(&f, cc.r);

    let speed = b.dparam(cc.p_param).norm();
    let half = 1.5 * cc.r / speed;
    let ts = log_grid(1e-4 * t2, t2, cc.n_t);
    let mut pts = Vec::new();
    for &t in &ts {
        for i in 0..cc.n_s {
            let s = cc.p_param - half + 2.0 * half * i as f64 / (cc.n_s.max(2) - 1) as f64;
            let x = f.tubular_map(&b, s, -t)?;
            if cyl.contains(x) {
                pts.push((x, t));
            }
        }
    }
    if pts.len() < 2 {
        return Err(Error::Config("cylinder contains fewer than two sample points".into()));
    }
    let xs: Vec<Vec2> = pts.iter().map(|p| p.0).collect();
    let vals = eval_points(&b, &k, &mu, &xs, cfg.tol)?;
    let (mut sp, mut sv) = (Vec::new(), Vec::new());
    let mut dropped = 0;
    for (x, v) in xs.iter().zip(&vals) {
        match v {
            Some(v) => {
                sp.push(*x);
                sv.push(v.value);
            }
            None => dropped += 1,
        }
    }
    let sf = SampledFunction::new(sp, sv, "K on the cylinder")?;
    let opts = SeminormOptions {
        max_pairs: cfg.holder.pair_budget,
        seed: cfg.seed,
        ..SeminormOptions::default()
    };
    let om = seminorm_estimate_with(&sf, &Modulus::omega1(), &opts)?;
    let scan = gradient_scan(&b, &k, &mu, &f, &scan_options(cfg))?;

    let mut out = CommandOutput::new("cylinder");
    out.nonconverged = dropped + scan.flagged.len();
    let g0 = cyl.gamma_near(0.0);
    out.checks.push(Check::new("cylinder.graph", "curve residual of the graph <= 1e-8", 1e-8 - cyl.max_residual));
    out.checks.push(Check::new("cylinder.gamma_zero", "|gamma(0)| <= 1e-10", 1e-10 - g0.abs()));
    out.checks.push(Check::new(
        "cylinder.t2",
        "0 < t2 < min{r/4, (1-theta)^(1/2) / (2 sqrt 2 (Lip a + 1)), t1/2}",
        t2,
    ));
    out.checks.push(Check::flag(
        "cylinder.seminorm_finite",
        "|K : cylinder ∩ collar(t2)|_omega1 < inf",
        om.value,
        om.value.is_finite() && om.status != SeminormStatus::Overflow,
    ));
    let report = CylinderReport {
        p_param: cc.p_param,
        p: cyl.p,
        r: cc.r,
        delta: cc.delta,
        t2,
        sup_gamma_prime: cyl.sup_gamma_prime,
        uniform_bound_holds: cyl.uniform_bound_holds,
        gamma_at_zero: g0,
        max_residual: cyl.max_residual,
        samples: sf.len(),
        seminorm_omega1: om.value,
        seminorm_status: om.status,
        m_est: scan.m_est,
        empirical_b: (scan.m_est > 0.0).then(|| om.value / scan.m_est),
    };
    out.push_report(&report);
    Ok(out)
}

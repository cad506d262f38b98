//! One test per acceptance criterion. Each prints a single `PASS`/`FAIL` line and
//! then asserts, so `cargo test --test acceptance -- --nocapture` gives the summary.

use std::f64::consts::TAU;

use miranda_core::boundary::{build_tubular_field, vector_inequality_slack};
use miranda_core::geoconst::{
    c_iv_ratio_at, circle_c_iv_ratio, compute_c_dprime_with, compute_c_iv_with, compute_c_prime_with,
    compute_c_tprime_with, default_s_grid, default_s_grid_iv, log_grid,
};
use miranda_core::harness::{self, ExperimentConfig, HolderSide};
use miranda_core::kernels::Phase;
use miranda_core::modulus::check_subholder;
use miranda_core::potential::{eval_potential, gradient_scan, trapezoid_oracle, ScanOptions};
use miranda_core::{Boundary, Density, DensityKind, HomogeneousKernel, Vec2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn verdict(n: u32, ok: bool, detail: &str) {
    println!("criterion {n:>2} {}: {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {n} failed: {detail}");
}

#[test]
fn criterion_01_subholder_modulus() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = f64::INFINITY;
    for _ in 0..1_000_000 {
        let (a, b): (f64, f64) = (rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0));
        worst = worst.min(check_subholder(a.min(b), a.max(b)).unwrap());
    }
    verdict(1, worst >= -1e-12, &format!("omega_1 sub-Hölder over 1e6 pairs, min margin {worst:.3e}"));
}

#[test]
fn criterion_02_vector_inequality() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst, mut n) = (f64::INFINITY, 0);
    while n < 1_000_000 {
        let theta: f64 = rng.gen_range(0.0..1.0);
        let v = Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let w = Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        if let Some(s) = vector_inequality_slack(v, w, theta) {
            worst = worst.min(s);
            n += 1;
        }
    }
    verdict(2, worst >= -1e-12, &format!("1e6 premise-satisfying triples, min slack {worst:.3e}"));
}

fn builtin_kernels() -> Vec<HomogeneousKernel> {
    let mut ks = vec![HomogeneousKernel::riesz(1).unwrap(), HomogeneousKernel::riesz(2).unwrap()];
    for m in 0..=3 {
        for ph in [Phase::Cos, Phase::Sin] {
            ks.push(HomogeneousKernel::odd_harmonic(m, ph).unwrap());
        }
    }
    ks.push(HomogeneousKernel::fourier_odd(vec![0.0, 1.0, 0.0, 0.3], vec![0.0, 0.5, 0.0, 0.0, 0.0, -0.2]).unwrap());
    ks
}

#[test]
fn criterion_03_kernel_algebra() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut odd, mut hom, mut ghom, mut fd) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for k in builtin_kernels() {
        odd = odd.max(k.check_odd(4096));
        let n = k.sphere_norm(1024);
        for _ in 0..10_000 {
            let phi = rng.gen_range(0.0..TAU);
            let r = 10f64.powf(rng.gen_range(-3.0..3.0));
            let lam = 10f64.powf(rng.gen_range(-3.0..3.0));
            let z = Vec2::new(r * phi.cos(), r * phi.sin());
            let (v, g) = k.value_grad(z);
            let (vl, gl) = k.value_grad(z * lam);
            // errors are measured against the sphere norms at the relevant radius
            let scale_v = n.c0 / (lam * r);
            let scale_g = n.c01() / (lam * r).powi(2);
            hom = hom.max((vl - v / lam).abs() / scale_v.max((v / lam).abs()));
            ghom = ghom.max((gl - g * (1.0 / (lam * lam))).norm() / scale_g.max((g * (1.0 / (lam * lam))).norm()));
            let h = 1e-5 * r;
            let dx = (k.value_grad(z + Vec2::new(h, 0.0)).0 - k.value_grad(z - Vec2::new(h, 0.0)).0) / (2.0 * h);
            let dy = (k.value_grad(z + Vec2::new(0.0, h)).0 - k.value_grad(z - Vec2::new(0.0, h)).0) / (2.0 * h);
            let sg = n.c01() / (r * r);
            fd = fd.max((Vec2::new(dx, dy) - g).norm() / sg.max(g.norm()));
        }
    }
    let ok = odd <= 1e-12 && hom <= 1e-12 && ghom <= 1e-12 && fd <= 1e-6;
    verdict(
        3,
        ok,
        &format!("11 kernels x 1e4 points: odd {odd:.1e}, hom {hom:.1e}, grad hom {ghom:.1e}, fd {fd:.1e}"),
    );
}

#[test]
fn criterion_04_quadrature_vs_trapezoid() {
    let b = Boundary::unit_circle();
    let k = HomogeneousKernel::riesz(1).unwrap();
    let one = Density::new(DensityKind::Const(1.0), &b);
    let origin = eval_potential(&b, &k, &one, Vec2::ZERO, 1e-11).unwrap().value;
    let dists = log_grid(1e-3, 1.0, 10);
    let mut pts = Vec::new();
    for (i, &d) in dists.iter().enumerate() {
        let phi = 0.37 + 2.1 * i as f64;
        let u = Vec2::new(phi.cos(), phi.sin());
        pts.push(u * (1.0 - d));
        pts.push(u * (1.0 + d));
    }
    let kinked = Density::new(DensityKind::AbsCoord(1), &b);
    let mut worst = 0.0f64;
    for mu in [&one, &kinked] {
        for &x in &pts {
            let v = eval_potential(&b, &k, mu, x, 1e-11).unwrap().value;
            let (o, _) = trapezoid_oracle(&b, &k, mu, x, 10_000_000);
            worst = worst.max((v - o).abs() / o.abs().max(1.0));
        }
    }
    let ok = origin.abs() <= 1e-12 && worst <= 1e-9;
    verdict(
        4,
        ok,
        &format!("K(0) = {origin:.1e}; 40 evaluations vs 1e7-node trapezoid, max rel err {worst:.1e}"),
    );
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

#[test]
fn criterion_05_geometric_constants_circle() {
    let b = Boundary::unit_circle();
    let c0 = compute_c_prime_with(&b, 0.0, 512).unwrap().value;
    let ratio = c_iv_ratio_at(&b, 0.0, 1e-6);
    let closed = circle_c_iv_ratio(1e-6);
    let s_small = log_grid(1e-6, 1e-2, 25);
    let ct = compute_c_tprime_with(&b, 2.0, &s_small, 512).unwrap().value;
    let doubling = [
        rel(c0, compute_c_prime_with(&b, 0.0, 1024).unwrap().value),
        rel(
            compute_c_dprime_with(&b, 0.5, &default_s_grid(&b, 25), 512).unwrap().value,
            compute_c_dprime_with(&b, 0.5, &default_s_grid(&b, 50), 1024).unwrap().value,
        ),
        rel(ct, compute_c_tprime_with(&b, 2.0, &log_grid(1e-6, 1e-2, 50), 1024).unwrap().value),
        rel(
            compute_c_iv_with(&b, &default_s_grid_iv(25), 512).unwrap().value,
            compute_c_iv_with(&b, &default_s_grid_iv(50), 1024).unwrap().value,
        ),
    ];
    let worst = doubling.iter().cloned().fold(0.0, f64::max);
    let parts = [
        ((c0 - TAU).abs() <= 1e-8, format!("c'(0) - 2π = {:.1e}", c0 - TAU)),
        (
            (1.95..=2.05).contains(&ratio),
            format!("c_iv ratio at 1e-6 = {ratio:.4} (closed form {closed:.4}, wanted [1.95, 2.05])"),
        ),
        ((1.9..=2.6).contains(&ct), format!("c'''(2) on [1e-6, 1e-2] = {ct:.4}")),
        (worst <= 0.02, format!("max doubling change {worst:.1e}")),
    ];
    let ok = parts.iter().all(|p| p.0);
    let detail: Vec<String> = parts
        .iter()
        .map(|p| format!("{}{}", if p.0 { "" } else { "[x] " }, p.1))
        .collect();
    verdict(5, ok, &detail.join("; "));
}

#[test]
fn criterion_06_tubular_field() {
    let mut lines = Vec::new();
    let mut ok = true;
    for b in [Boundary::unit_circle(), Boundary::ellipse(1.0, 0.5).unwrap()] {
        let f = build_tubular_field(&b, 0.5).unwrap();
        let side = f.side_disagreements(&b, 10_000, 6);
        let good = f.conditions.all_positive() && f.collision_pairs >= 10_000 && f.collisions == 0 && side == 0;
        ok &= good;
        lines.push(format!(
            "{}: min margin {:.1e}, {} collisions in {} pairs, {side} side errors",
            b.name,
            f.conditions.min_margin(),
            f.collisions,
            f.collision_pairs
        ));
    }
    verdict(6, ok, &lines.join("; "));
}

#[test]
fn criterion_07_gradient_log_bound() {
    let b = Boundary::unit_circle();
    let f = build_tubular_field(&b, 0.5).unwrap();
    let k = HomogeneousKernel::riesz(1).unwrap();
    let opts = ScanOptions {
        decades: (-5.0, -2.0),
        n_t: 7,
        n_s: 256,
        tol: 1e-11,
    };
    let scan = |kind| gradient_scan(&b, &k, &Density::new(kind, &b), &f, &opts).unwrap();
    let variation = |s: &miranda_core::GradientScan| {
        let hi = s.sup_grad_per_t.iter().cloned().fold(0.0, f64::max);
        let lo = s.sup_grad_per_t.iter().cloned().fold(f64::INFINITY, f64::min);
        let noise = s.max_err_per_t().into_iter().fold(0.0, f64::max);
        (hi, (hi - lo) / hi, noise)
    };
    // On the circle, K[riesz_1, y_1] is constant inside, so its gradient is zero up to
    // quadrature error; cos 3φ is the non-degenerate smooth control.
    let smooth = scan(DensityKind::Coord(1));
    let (s_hi, _, s_noise) = variation(&smooth);
    let smooth_ok = s_hi <= 100.0 * s_noise.max(1e-13);
    let control = scan(DensityKind::Trig(3));
    let (_, c_var, _) = variation(&control);
    let kinked = scan(DensityKind::AbsCoord(1));
    let r = &kinked.ratio_per_t;
    let spread = r.iter().cloned().fold(0.0, f64::max) / r.iter().cloned().fold(f64::INFINITY, f64::min);
    let growth = kinked.sup_grad_per_t[0] / kinked.sup_grad_per_t[opts.n_t - 1];
    let ok = smooth_ok && c_var < 0.2 && spread <= 2.0 && growth >= 1.5 && kinked.flagged.is_empty();
    verdict(
        7,
        ok,
        &format!(
            "y1: sup|grad K| {s_hi:.1e} (error level {s_noise:.1e}); cos3φ variation {:.1}%; |y1|: log-ratio spread {spread:.3}, growth {growth:.2}",
            100.0 * c_var
        ),
    );
}

#[test]
fn criterion_08_split_bounds() {
    let cfg = ExperimentConfig::default();
    let out = harness::cmd_split(&cfg).unwrap();
    let failed: Vec<String> = out.failed().map(|c| format!("{} ({:.2e})", c.id, c.slack)).collect();
    let ok = failed.is_empty() && out.nonconverged == 0;
    let detail = if ok {
        format!(
            "ellipse 16x8 grid x {} densities: identity and all four bounds hold, C'' stable",
            cfg.density_family.len()
        )
    } else {
        format!("failed: {}", failed.join(", "))
    };
    verdict(8, ok, &detail);
}

#[test]
fn criterion_09_holder_estimate() {
    let cfg = ExperimentConfig::default();
    let mut failed = Vec::new();
    let mut spreads = Vec::new();
    for side in [HolderSide::Interior, HolderSide::Exterior] {
        let out = harness::cmd_holder(&cfg, side).unwrap();
        for c in &out.checks {
            // fitted C2 stability belongs to the design notes, not to this criterion
            if c.id.ends_with("fitted_c2_stability") {
                continue;
            }
            if c.id.ends_with("fitted_b_stability") {
                spreads.push(format!("{:?} fitted_B spread {:.2}", side, 2.0 - c.slack));
            }
            if !c.pass {
                failed.push(c.id.clone());
            }
        }
        if out.nonconverged > 0 {
            failed.push(format!("{} nonconverged", out.nonconverged));
        }
    }
    let ok = failed.is_empty();
    let mut detail = spreads.join(", ");
    if !ok {
        detail = format!("{detail}; failed: {}", failed.join(", "));
    }
    verdict(9, ok, &detail);
}

#[test]
fn criterion_10_determinism() {
    let cfg = ExperimentConfig::default();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| harness::run_all(&cfg).unwrap())
    };
    let (a, b) = (run(1), run(2));
    let same = a.files.len() == b.files.len()
        && a.files.iter().zip(&b.files).all(|(x, y)| x.name == y.name && x.contents == y.contents);
    let bytes: usize = a.files.iter().map(|f| f.contents.len()).sum();
    verdict(
        10,
        same,
        &format!("two runs of all (1 and 2 threads): {} files, {bytes} bytes, identical = {same}", a.files.len()),
    );
}

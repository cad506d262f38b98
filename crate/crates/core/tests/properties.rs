use std::f64::consts::TAU;

use miranda_core::boundary::Boundary;
use miranda_core::harness::{write_outputs, CommandOutput, OutputFile};
use miranda_core::modulus::{check_subholder, ContinuityModulus, Modulus};
use miranda_core::potential::eval_potential;
use miranda_core::{Density, DensityKind, HomogeneousKernel, Vec2};
use proptest::prelude::*;

proptest! {
    #[test]
    fn omega1_is_sub_hoelder(t1 in 0.0f64..2.0, t2 in 0.0f64..2.0) {
        prop_assert!(check_subholder(t1, t2).unwrap() >= -1e-15);
    }

    #[test]
    fn omega_theta_is_nondecreasing(theta in 0.05f64..1.0, a in 0.0f64..1.5, d in 0.0f64..1.0) {
        let w = Modulus::new(theta).unwrap();
        prop_assert!(w.value(a + d) >= w.value(a) - 1e-15);
        prop_assert!(w.value(a) <= w.plateau() + 1e-15);
    }

    #[test]
    fn omega_theta_quotient_shrinks(theta in 0.05f64..1.0, a in 1e-6f64..1.0, f in 1.0f64..10.0) {
        // concave with omega(0) = 0, so omega(r) / r is nonincreasing
        let w = Modulus::new(theta).unwrap();
        let b = a * f;
        prop_assert!(w.value(b) / b <= w.value(a) / a * (1.0 + 1e-12));
    }

    #[test]
    fn vector_triangle_inequality(ax in -1e3f64..1e3, ay in -1e3f64..1e3, bx in -1e3f64..1e3, by in -1e3f64..1e3) {
        let (a, b) = (Vec2::new(ax, ay), Vec2::new(bx, by));
        prop_assert!((a + b).norm() <= a.norm() + b.norm() + 1e-12);
        prop_assert!(a.dot(b).abs() <= a.norm() * b.norm() * (1.0 + 1e-12) + 1e-300);
    }

    #[test]
    fn kernel_combination_is_pointwise(
        alpha in -3.0f64..3.0, beta in -3.0f64..3.0, phi in 0.0f64..TAU, r in 1e-3f64..1e3,
    ) {
        let k1 = HomogeneousKernel::riesz(1).unwrap();
        let k2 = HomogeneousKernel::riesz(2).unwrap();
        let z = Vec2::new(r * phi.cos(), r * phi.sin());
        let lhs = HomogeneousKernel::combine(alpha, &k1, beta, &k2).eval(z).unwrap();
        let rhs = alpha * k1.eval(z).unwrap() + beta * k2.eval(z).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (alpha.abs() + beta.abs() + 1.0) / r);
        let s = k1.scaled(alpha).eval(z).unwrap();
        prop_assert!((s - alpha * k1.eval(z).unwrap()).abs() <= 1e-12 * (alpha.abs() + 1.0) / r);
    }

    #[test]
    fn kernels_are_odd_and_homogeneous(phi in 0.0f64..TAU, r in 1e-3f64..1e3, lam in 1e-2f64..1e2) {
        let k = HomogeneousKernel::riesz(1).unwrap();
        let z = Vec2::new(r * phi.cos(), r * phi.sin());
        let v = k.eval(z).unwrap();
        prop_assert!((k.eval(-z).unwrap() + v).abs() <= 1e-12 / r);
        prop_assert!((k.eval(z * lam).unwrap() - v / lam).abs() <= 1e-12 / (r * lam));
    }

    #[test]
    fn density_spec_roundtrips(c in -1e6f64..1e6, j in 1usize..=2, m in 0u32..20) {
        for kind in [DensityKind::Const(c), DensityKind::Coord(j), DensityKind::AbsCoord(j), DensityKind::Trig(m)] {
            let back: DensityKind = kind.to_string().parse().unwrap();
            prop_assert_eq!(back, kind);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn potential_is_linear_in_density(beta in -4.0f64..4.0, x1 in -0.6f64..0.6, x2 in -0.3f64..0.3) {
        let b = Boundary::ellipse(1.0, 0.5).unwrap();
        let k = HomogeneousKernel::riesz(1).unwrap();
        let mu = Density::new(DensityKind::Trig(3), &b);
        let x = Vec2::new(x1, x2);
        let one = eval_potential(&b, &k, &mu, x, 1e-11).unwrap();
        let scaled = eval_potential(&b, &k, &mu.scaled(beta), x, 1e-11).unwrap();
        let tol = 4.0 * (scaled.err_est + beta.abs() * one.err_est) + 1e-13 * one.abs_scale * beta.abs();
        prop_assert!((scaled.value - beta * one.value).abs() <= tol);
    }
}

#[test]
fn outputs_are_written_under_their_names() {
    let dir = tempfile::tempdir().unwrap();
    let mut out = CommandOutput::new("probe");
    out.files.push(OutputFile {
        name: "a.csv".into(),
        contents: "x\n1\n".into(),
    });
    write_outputs(&out, &dir.path().join("nested")).unwrap();
    assert_eq!(std::fs::read_to_string(dir.path().join("nested/a.csv")).unwrap(), "x\n1\n");
}

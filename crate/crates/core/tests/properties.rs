use std::f64::consts::PI;

use active_stokes::density::{uniform_direction, OrientationDensity, OrientationFamily};
use active_stokes::effective::{energy_dissipation, ActiveStress, LinearFlow};
use active_stokes::flow::GradientMode;
use active_stokes::kernels::{deviatoric, oseen, sym, FluidParams};
use active_stokes::quadrature::{BoxQuadrature, SurfaceQuadrature};
use active_stokes::stats::{empirical_moments, BinGrid};
use active_stokes::suspension::{
    boundary_error_functional, sample_configuration, separation_report, u_app_evaluate, BallQuadSpec, SamplingMode, SuspensionConfig,
};
use active_stokes::swimmer::{elementary_velocity, SwimmerParams};
use active_stokes::{Mat3, UnitVec3, Vec3};
use nalgebra::Rotation3;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn fluid() -> FluidParams {
    FluidParams::new(1.0).unwrap()
}

fn vec3() -> impl Strategy<Value = Vec3> {
    (-2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn direction(seed: u64) -> UnitVec3 {
    uniform_direction(&mut ChaCha8Rng::seed_from_u64(seed))
}

fn rotation(seed: u64, angle: f64) -> Rotation3<f64> {
    Rotation3::from_axis_angle(&direction(seed), angle)
}

fn max_rel(a: &[Vec3], b: &[Vec3]) -> f64 {
    let scale = b.iter().map(|v| v.norm()).fold(0.0, f64::max);
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max) / scale
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn oseen_is_symmetric_positive_semidefinite_and_pure(x in vec3()) {
        prop_assume!(x.norm() > 1e-3);
        let u = oseen(&x, &fluid()).unwrap();
        prop_assert_eq!(u, u.transpose());
        let eig = u.symmetric_eigen().eigenvalues;
        prop_assert!(eig.min() >= -1e-15 * eig.max());
        prop_assert_eq!(oseen(&x, &fluid()).unwrap(), u);
    }

    #[test]
    fn swimmer_constants(alpha in -3.0f64..3.0, beta in 1.01f64..6.0, a in 0.01f64..2.0, mu in 0.1f64..5.0) {
        let sp = SwimmerParams::new(alpha, beta, a, FluidParams::new(mu).unwrap()).unwrap();
        prop_assert!((sp.k_f() - alpha * PI * mu * a * a).abs() <= 1e-14 * (alpha * PI * mu * a * a).abs());
        let (g1, g2, g3) = sp.gammas();
        prop_assert!((g1 - (1.5 / beta - 0.5 / beta.powi(3))).abs() < 1e-14);
        prop_assert!((g2 - (beta.powi(-2) - beta.powi(-4))).abs() < 1e-14);
        prop_assert!((g3 - 0.25 / beta * (1.0 - beta.powi(-2)).powi(2)).abs() < 1e-14);
        prop_assert!(SwimmerParams::new(alpha, 1.0, a, fluid()).is_err());
    }

    #[test]
    fn sphere_rule_integrates_monomials(nt in 2usize..10, i in 0i32..4, j in 0i32..4, k in 0i32..4) {
        let q = SurfaceQuadrature::product(nt, 2 * nt + 1).unwrap();
        let total: f64 = q.nodes().iter().map(|(_, w)| w).sum();
        prop_assert!((total - 4.0 * PI).abs() < 1e-12);
        prop_assume!((i + j + k) as usize <= q.order());
        // ∫ x^i y^j z^k over S² for even exponents: 2 Γ(a)Γ(b)Γ(c)/Γ(a+b+c), a = (i+1)/2, ...
        let exact = if i % 2 == 1 || j % 2 == 1 || k % 2 == 1 {
            0.0
        } else {
            let dfact = |n: i32| (1..=n).rev().step_by(2).map(f64::from).product::<f64>();
            4.0 * PI * dfact(i - 1) * dfact(j - 1) * dfact(k - 1) / dfact(i + j + k + 1)
        };
        let got = q.integrate(|p| p.x.powi(i) * p.y.powi(j) * p.z.powi(k));
        prop_assert!((got - exact).abs() < 1e-12, "{} vs {}", got, exact);
    }

    #[test]
    fn swimmer_is_rigid_inside_and_linear_in_alpha(seed in 0u64..1000, r in 0.0f64..1.0, beta in 1.1f64..4.0, scale in -3.0f64..3.0) {
        let p = direction(seed);
        let sp = SwimmerParams::new(1.0, beta, 0.7, fluid()).unwrap();
        let inside = direction(seed + 1).into_inner() * (r * sp.a);
        let v = elementary_velocity(&inside, &p, &sp).unwrap();
        prop_assert!((v - p.into_inner() * sp.u2()).norm() <= 1e-8 * sp.u2().abs());
        let x = direction(seed + 2).into_inner() * (sp.a * (1.0 + 3.0 * r)) + Vec3::new(0.0, 0.0, 1e-3);
        prop_assume!((x - p.into_inner() * (sp.a * beta)).norm() > 1e-3);
        let scaled = SwimmerParams::new(scale, beta, 0.7, fluid()).unwrap();
        let lhs = elementary_velocity(&x, &p, &scaled).unwrap();
        let rhs = elementary_velocity(&x, &p, &sp).unwrap() * scale;
        prop_assert!((lhs - rhs).norm() <= 1e-13 * rhs.norm().max(1e-300));
    }

    #[test]
    fn active_stress_is_symmetric_trace_free_and_equivariant(seed in 0u64..1000, kappa in 0.1f64..20.0, angle in 0.0f64..6.0) {
        let p0 = direction(seed).into_inner();
        let sp = SwimmerParams::new(-1.0, 1.5, 0.01, fluid()).unwrap();
        let make = |p: Vec3| ActiveStress::new(OrientationDensity::with_family(OrientationFamily::von_mises_fisher(p, kappa).unwrap()), &sp);
        let s = make(p0).sigma(&Vec3::new(0.1, -0.2, 0.3));
        prop_assert!((s - s.transpose()).norm() <= 1e-12 * s.norm().max(1e-300));
        prop_assert!(s.trace().abs() <= 1e-12 * s.norm().max(1e-300));
        let rot = rotation(seed + 7, angle);
        let turned = make(rot * p0).sigma(&Vec3::new(0.1, -0.2, 0.3));
        let want = rot.matrix() * s * rot.matrix().transpose();
        prop_assert!((turned - want).norm() <= 1e-10 * s.norm().max(1e-12));
        prop_assert_eq!(make(p0).sigma(&Vec3::new(0.9, 0.0, 0.0)), Mat3::zeros());
    }

    #[test]
    fn energy_terms_have_fixed_signs(seed in 0u64..1000, alpha in 0.1f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = deviatoric(&sym(&Mat3::from_fn(|_, _| rand::Rng::random_range(&mut rng, -1.0..1.0))));
        let sp = |a: f64| SwimmerParams::new(a, 1.5, 0.01, fluid()).unwrap();
        let density = OrientationDensity::with_family(OrientationFamily::von_mises_fisher(direction(seed).into_inner(), 3.0).unwrap());
        let rule = BoxQuadrature::gauss(Vec3::repeat(-0.5), Vec3::repeat(0.5), 1, 3).unwrap();
        let plus = energy_dissipation(&LinearFlow(g), &ActiveStress::new(density.clone(), &sp(alpha)), 0.05, rule.nodes(), GradientMode::Analytic).unwrap();
        let minus = energy_dissipation(&LinearFlow(g), &ActiveStress::new(density, &sp(-alpha)), 0.05, rule.nodes(), GradientMode::Analytic).unwrap();
        prop_assert!(plus.viscous < 0.0);
        prop_assert_eq!(plus.viscous, minus.viscous);
        prop_assert!((plus.active + minus.active).abs() <= 1e-14 * plus.active.abs().max(1e-300));
    }

    #[test]
    fn strict_configurations_satisfy_their_invariants(seed in 0u64..10_000, n in 2usize..400, lambda in 0.001f64..0.05) {
        let cfg = sample_configuration(&OrientationDensity::uniform(), n, lambda, 0.7, 1.2, seed, SamplingMode::Strict).unwrap();
        prop_assert_eq!(cfg.centers.len(), n);
        prop_assert_eq!(cfg.orientations.len(), n);
        prop_assert!((cfg.a.powi(3) * 4.0 * PI / 3.0 * n as f64 - lambda).abs() <= 1e-14 * lambda);
        prop_assert!(cfg.centers.iter().all(|x| cfg.domain.contains(x)));
        prop_assert!(cfg.centers.iter().chain(cfg.orientations.iter().map(|p| p.as_ref())).all(|v| v.iter().all(|c| c.is_finite())));
        let report = separation_report(&cfg, 0.7);
        prop_assert!(report.h2_ok);
        let mut all: Vec<usize> = report.good_indices.iter().chain(&report.bad_indices).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        let again = sample_configuration(&OrientationDensity::uniform(), n, lambda, 0.7, 1.2, seed, SamplingMode::Strict).unwrap();
        prop_assert_eq!(again, cfg);
    }

    #[test]
    fn good_set_grows_as_threshold_shrinks(seed in 0u64..10_000, n in 2usize..300, e1 in 0.05f64..2.0, e2 in 0.05f64..2.0) {
        let cfg = sample_configuration(&OrientationDensity::uniform(), n, 0.01, 0.5, 1.2, seed, SamplingMode::Relaxed).unwrap();
        let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
        let small = separation_report(&cfg, lo).good_indices;
        let large = separation_report(&cfg, hi).good_indices;
        prop_assert!(large.iter().all(|i| small.contains(i)));
        // membership against the definition
        let spacing = (n as f64).powf(-1.0 / 3.0);
        for i in 0..n {
            let good = (0..n).all(|j| j == i || (cfg.centers[i] - cfg.centers[j]).norm() >= lo * spacing);
            prop_assert_eq!(good, small.contains(&i));
        }
    }

    #[test]
    fn superposition_is_order_robust(seed in 0u64..10_000, n in 1usize..200) {
        let cfg = sample_configuration(&OrientationDensity::uniform(), n, 0.01, 0.7, 1.2, seed, SamplingMode::Strict).unwrap();
        let sp = cfg.swimmer(-1.0, fluid()).unwrap();
        let pts: Vec<Vec3> = (0..5).map(|k| direction(seed + k).into_inner() * (1.0 + 0.2 * k as f64)).collect();
        let got = u_app_evaluate(&cfg, &sp, &pts).unwrap();
        let naive: Vec<Vec3> = pts
            .iter()
            .map(|x| (0..n).rev().map(|i| elementary_velocity(&(x - cfg.centers[i]), &cfg.orientations[i], &sp).unwrap()).sum())
            .collect();
        prop_assert!(max_rel(&got, &naive) <= 1e-12);
    }

    #[test]
    fn moments_are_label_invariant_and_additive(seed in 0u64..10_000, n in 1usize..500) {
        let cfg = sample_configuration(&OrientationDensity::uniform(), n, 0.01, 0.5, 1.2, seed, SamplingMode::Relaxed).unwrap();
        let m = empirical_moments(&cfg, BinGrid::cubic(4), 1.7);
        prop_assert!((m.second_moment.trace() - 1.0).abs() < 1e-12);
        prop_assert!((m.second_moment - m.second_moment.transpose()).norm() < 1e-15);
        let mut shuffled = cfg.clone();
        shuffled.centers.reverse();
        shuffled.orientations.reverse();
        let r = empirical_moments(&shuffled, BinGrid::cubic(4), 1.7);
        prop_assert_eq!(&r.counts, &m.counts);
        prop_assert!((r.global_stress() - m.global_stress()).norm() < 1e-13);
        let merged = m.merged(2).unwrap();
        prop_assert_eq!(merged.counts.iter().sum::<usize>(), n);
        prop_assert!((merged.global_stress() - m.global_stress()).norm() < 1e-13);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn boundary_functional_is_rotation_invariant(seed in 0u64..1000, angle in 0.1f64..6.0) {
        let cfg = sample_configuration(&OrientationDensity::uniform(), 40, 0.02, 0.8, 1.2, seed, SamplingMode::Strict).unwrap();
        let sp = cfg.swimmer(1.0, fluid()).unwrap();
        let rot = rotation(seed + 3, angle);
        let turned: SuspensionConfig = SuspensionConfig {
            domain: active_stokes::density::Domain::Ball,
            ..cfg.rotated(&rot)
        };
        let spec = BallQuadSpec::default();
        let a = boundary_error_functional(&cfg, &sp, &spec).unwrap();
        let b = boundary_error_functional(&turned, &sp, &spec).unwrap();
        prop_assert!((a - b).abs() <= 1e-8 * a, "{} vs {}", a, b);
    }
}

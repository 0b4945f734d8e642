use matball_core::bsverify::{chamber_points, zeta, zeta_continued_ordered};
use matball_core::cherednik::{dirac_chain_op, MDeltaFamily};
use matball_core::ggdist::{dirac_functional, verify_dirac, DiracProbe};
use matball_core::jets::{bump, sh_power, Combine, JetFunction, Scaled};
use matball_core::quadrature::{integrate_mu, QuadratureSpec};
use matball_core::radon1::{radon_plane, spherical, Plane, RadialBump};
use matball_core::special::m_delta;
use matball_core::{domain_params, Dd, Real, RootData};
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    /// Residuals of the sinh identity on `c |SH|^delta` are `c` times those on `|SH|^delta`.
    #[test]
    fn bs_residual_is_linear(
        rank in 1usize..=2,
        a in 0.1f64..5.0,
        two_b in 0.1f64..5.0,
        iota in 0.1f64..5.0,
        delta in -2.3f64..2.0,
        seed in 0u64..1000,
    ) {
        let rd = RootData::new(rank, a, two_b, iota).unwrap();
        let op = MDeltaFamily::new(&rd).unwrap().at(delta).unwrap();
        let base = sh_power(rank, delta);
        let scaled = Scaled::<Dd> { inner: &base, factor: 1e3 };
        let m = m_delta(&rd, delta);
        for t in chamber_points(rank, 5, seed) {
            let td: Vec<Dd> = t.iter().map(|&x| Dd::new(x)).collect();
            let low: Dd = JetFunction::<Dd>::value(&sh_power(rank, delta - 2.0), &td).unwrap();
            let one = op.apply(&base, &td).unwrap() - low * Dd::new(m);
            let big = op.apply(&scaled, &td).unwrap() - low * Dd::new(1e3 * m);
            let scale = (low.to_f64() * m).abs() + JetFunction::<Dd>::value(&base, &td).unwrap().to_f64();
            prop_assert!((big.to_f64() - 1e3 * one.to_f64()).abs() <= 1e3 * 1e-12 * scale);
        }
    }
}

#[test]
fn zeta_stable_under_node_doubling() {
    for (rank, delta) in [(1usize, 0.5), (2, 1.5)] {
        let rd = RootData::new(rank, 1.5, 2.0, 0.5).unwrap();
        let f = bump(rank, 1.0);
        let lo = QuadratureSpec { nodes: 40, panels: 8, ..QuadratureSpec::default() };
        let hi = QuadratureSpec { nodes: 80, panels: 8, ..QuadratureSpec::default() };
        let a = zeta(&rd, delta, &f, &lo).unwrap();
        let b = zeta(&rd, delta, &f, &hi).unwrap();
        assert!(rel(a, b) < 1e-8, "rank {rank}: {a} vs {b}");
    }
}

#[test]
fn continuation_independent_of_chain_order() {
    let rd = RootData::new(1, 1.0, 2.0, 0.0).unwrap();
    let f = bump(1, 1.0).with_prefactor(1.0, 0.4);
    let spec = QuadratureSpec { nodes: 40, panels: 64, ..QuadratureSpec::default() };
    let target = -4.5;
    let base = zeta_continued_ordered(&rd, target, &f, &[-2.5, -0.5, 1.5], &spec).unwrap();
    for order in [[1.5, -0.5, -2.5], [-0.5, 1.5, -2.5], [1.5, -2.5, -0.5]] {
        let v = zeta_continued_ordered(&rd, target, &f, &order, &spec).unwrap();
        assert!(rel(v, base) < 1e-6, "{order:?}: {v} vs {base}");
    }

    let rd2 = RootData::new(2, 1.0, 2.0, 1.0).unwrap();
    let g = bump(2, 1.0).with_kappa(0.3);
    let spec = QuadratureSpec { nodes: 40, panels: 32, ..QuadratureSpec::default() };
    let base = zeta_continued_ordered(&rd2, -2.5, &g, &[-0.5, 1.5], &spec).unwrap();
    let swapped = zeta_continued_ordered(&rd2, -2.5, &g, &[1.5, -0.5], &spec).unwrap();
    assert!(rel(swapped, base) < 1e-6, "{swapped} vs {base}");
}

#[test]
fn dirac_constant_independent_of_support_radius() {
    for (a, n, r, rp) in [(1, 4, 1, 3), (2, 5, 1, 2)] {
        let dp = domain_params(a, n, r, rp).unwrap();
        let fs = [bump(1, 0.5), bump(1, 1.0), bump(1, 1.5)];
        let quad = QuadratureSpec { nodes: 40, panels: 32, ..QuadratureSpec::default() };
        let mut ratios = Vec::new();
        for f in &fs {
            let probe = [DiracProbe { f, at_origin: f.at_origin(), sup: 1.0, label: "p".into() }];
            ratios.push(verify_dirac(&dp, &probe, &quad).unwrap().measured_constants["c_dirac"]);
        }
        for q in &ratios[1..] {
            assert!(rel(*q, ratios[0]) < 1e-3, "{ratios:?}");
        }
    }
}

#[test]
fn dirac_functional_is_linear() {
    let dp = domain_params(2, 5, 1, 2).unwrap();
    let chain = dirac_chain_op(&dp).unwrap();
    let quad = QuadratureSpec { nodes: 40, panels: 16, ..QuadratureSpec::default() };
    let f = bump(1, 1.0);
    let g = bump(1, 0.8).with_prefactor(0.5, 1.0);
    let l = |h: &dyn JetFunction<Dd>| dirac_functional(&dp, &chain, h, &quad).unwrap().value;
    let (lf, lg) = (l(&f), l(&g));
    let sum = Combine::<Dd> { left: &f, right: &g, product: false };
    assert!(rel(l(&sum), lf + lg) < 1e-10);
    let scaled = Scaled::<Dd> { inner: &f, factor: -3.5 };
    assert!(rel(l(&scaled), -3.5 * lf) < 1e-10);
}

#[test]
fn c1_nonzero_for_every_accepted_domain() {
    let mut accepted = 0;
    for a in [1, 2, 4, 8] {
        for n in 1..=14 {
            for r in 1..=4 {
                for rp in 1..=14 {
                    if let Ok(dp) = domain_params(a, n, r, rp) {
                        accepted += 1;
                        let c = dp.constants.c1;
                        assert!(c.is_finite() && c != 0.0, "({a},{n},{r},{rp}): c1 = {c}");
                    }
                }
            }
        }
    }
    assert!(accepted > 10);
}

#[test]
fn node_doubling_within_error_estimate() {
    let rd = RootData::new(2, 2.0, 1.0, 1.0).unwrap();
    let f = bump(2, 1.2).with_kappa(0.4);
    let coarse = integrate_mu(&rd, &f, 0.3, &QuadratureSpec { nodes: 20, tolerance: 1.0, ..QuadratureSpec::default() }).unwrap();
    let fine = integrate_mu(&rd, &f, 0.3, &QuadratureSpec { nodes: 40, tolerance: 1.0, ..QuadratureSpec::default() }).unwrap();
    assert!((coarse.value - fine.value).abs() <= coarse.error.max(1e-14 * fine.value.abs()));
}

#[test]
fn plane_transform_reparametrization() {
    let f = RadialBump { radius: 1.3, amplitude: 2.0 };
    for h in [0.0, 0.3, 0.9] {
        let p = Plane::at_distance(h, [0.2, -0.7, 0.4]).unwrap();
        let q = Plane::at_distance(h, [-1.0, 0.1, 0.3]).unwrap();
        let (a, b) = (radon_plane(&f, &p).unwrap(), radon_plane(&f, &q).unwrap());
        assert!(rel(a, b) < 1e-10);
    }
}

#[test]
fn spherical_residuals_on_acceptance_parameters() {
    for (a, n) in [(1.0, 4.0), (2.0, 5.0), (4.0, 4.0), (8.0, 3.0)] {
        let rd = RootData::new(1, a, a * (n - 2.0), a - 1.0).unwrap();
        for lam in [0.0, 0.5, 1.0, 2.0, 5.0, 10.0] {
            let phi = spherical(&rd, lam, 3.0).unwrap();
            let r = phi.eigen_residual(0.01).unwrap();
            assert!(r < 1e-8, "a={a} n={n} lambda={lam}: {r:e}");
        }
    }
}

//! The Garding-Gindikin integral in its convergent range, its rank-one limit
//! at `lambda = 0`, the change of variables `x_j = sh^2 t_j` linking it to the
//! `|SH|^beta` integrals, and the weak-form Dirac identity.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::cherednik::{chain_invariant, dirac_chain_op, OperatorNF};
use crate::error::{Error, Result};
use crate::jets::JetFunction;
use crate::quadrature::{integrate_mu_with, ChamberRule, ChamberWeights, Estimate, QuadratureSpec};
use crate::real::Dd;
use crate::report::VerificationReport;
use crate::rootsys::{DomainParams, RootData};
use crate::special::{gindikin_gamma, m_delta, Candidate};

/// Integrand data of `G_lambda(f)`: `f` is a symmetric function of `x in R^r`.
pub struct GGSpec<'a> {
    pub a: f64,
    pub rank: usize,
    pub lambda: f64,
    pub f: &'a dyn JetFunction<f64>,
}

impl GGSpec<'_> {
    /// Exponent `lambda - (a/2)(r-1) - 1` of `x_1 ... x_r`.
    pub fn exponent(&self) -> f64 {
        self.lambda - self.a / 2.0 * (self.rank - 1) as f64 - 1.0
    }

    pub fn weights(&self) -> ChamberWeights {
        ChamberWeights { edge: self.exponent(), diag: self.a, pair: self.a }
    }
}

fn vandermonde(x: &[f64], a: f64) -> f64 {
    let mut p = 1.0;
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            p *= libm::pow((x[i] - x[j]).abs(), a);
        }
    }
    p
}

/// Support bound along the ray `rho * dir` of a function known only by its
/// values: bisection on "nonzero".
fn numeric_extent(g: &dyn Fn(&[f64]) -> f64, dir: &[f64], start: f64) -> Option<f64> {
    let mut hi = start;
    let mut grow = 0;
    while probe_inside(g, dir, hi) {
        hi *= 2.0;
        grow += 1;
        if grow > 40 {
            return None;
        }
    }
    let mut lo = 0.0;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if probe_inside(g, dir, mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(hi)
}

/// Whether `g` is nonzero at `rho * dir` or just inside it.
fn probe_inside(g: &dyn Fn(&[f64]) -> f64, dir: &[f64], rho: f64) -> bool {
    let x: Vec<f64> = dir.iter().map(|d| d * rho).collect();
    g(&x) != 0.0
}

/// `int_{x chamber} (prod x)^e g(x) prod_{i<j}|x_i - x_j|^a dx` for a
/// compactly supported symmetric `g`.
fn x_chamber_integral(weights: ChamberWeights, rank: usize, a: f64, g: &dyn Fn(&[f64]) -> f64, quad: &QuadratureSpec) -> Result<(f64, f64)> {
    let e = weights.edge;
    let rule = ChamberRule::new(rank, weights, quad.nodes)?.with_panels(quad.panels);
    let extent = |dir: &[f64]| numeric_extent(g, dir, 1.0);
    rule.integrate_with_error(extent, |x| {
        let v = g(x);
        if v == 0.0 {
            return Ok(0.0);
        }
        let p: f64 = x.iter().map(|&xi| libm::pow(xi, e)).product();
        Ok(p * v * vandermonde(x, a))
    })
}

/// `G_lambda(f) = (1/r!)(1/Gamma_a(lambda)) int_{R_+^r} (prod x)^(lambda - (a/2)(r-1) - 1) f prod |x_i - x_j|^a dx`.
pub fn gg_integral(spec: &GGSpec, quad: &QuadratureSpec) -> Result<f64> {
    let need = spec.a / 2.0 * (spec.rank - 1) as f64;
    if !(spec.lambda > need) {
        return Err(Error::Divergent(format!(
            "Garding-Gindikin integral needs lambda > (a/2)(r-1) = {need}, got {}",
            spec.lambda
        )));
    }
    let f = spec.f;
    let g = |x: &[f64]| f.value(x).unwrap_or(0.0);
    let (v, err) = x_chamber_integral(spec.weights(), spec.rank, spec.a, &g, quad)?;
    if err > quad.tolerance * v.abs() && err > 1e-300 {
        return Err(Error::Quadrature(format!("error estimate {err:e} exceeds tolerance at value {v:e}")));
    }
    // r! copies of the chamber cancel the 1/r!
    Ok(v / gindikin_gamma(spec.a, spec.rank, spec.lambda)?)
}

/// Value at `0` of the polynomial through `(xs[i], ys[i])` (Neville).
pub fn neville_at_zero(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.is_empty() {
        return Err(Error::InvalidParameter("extrapolation needs matching, nonempty grids".into()));
    }
    let mut p = ys.to_vec();
    let n = xs.len();
    for m in 1..n {
        for i in 0..n - m {
            let d = xs[i] - xs[i + m];
            if d == 0.0 {
                return Err(Error::Singular("repeated extrapolation node".into()));
            }
            p[i] = (xs[i] * p[i + 1] - xs[i + m] * p[i]) / d;
        }
    }
    Ok(p[0])
}

/// Extrapolate `G_lambda(f)`, rank one, from `lambda_grid ⊂ (0, 0.2]` to `lambda = 0`.
///
/// Returns the limit and the difference to the extrapolant that drops the
/// largest `lambda`, which serves as an error estimate.
pub fn gg_dirac_limit_rank1(f: &dyn JetFunction<f64>, lambda_grid: &[f64], quad: &QuadratureSpec) -> Result<(f64, f64)> {
    if lambda_grid.len() < 2 || lambda_grid.iter().any(|&l| !(l > 0.0 && l <= 0.2)) {
        return Err(Error::InvalidParameter("need at least two lambdas in (0, 0.2]".into()));
    }
    let mut grid = lambda_grid.to_vec();
    grid.sort_by(|a, b| a.total_cmp(b));
    let vals: Vec<f64> = grid
        .iter()
        .map(|&l| gg_integral(&GGSpec { a: 1.0, rank: 1, lambda: l, f }, quad))
        .collect::<Result<_>>()?;
    let full = neville_at_zero(&grid, &vals)?;
    let n = grid.len();
    let reduced = neville_at_zero(&grid[..n - 1], &vals[..n - 1])?;
    let est = (full - reduced).abs();
    if !(est <= 1e-2 * full.abs().max(1.0)) {
        return Err(Error::Singular(format!("extrapolation unstable: estimate {est:e}")));
    }
    Ok((full, est))
}

/// `lambda_beta = (beta - 2l + iota + 2b - 1)/2 + (a/2)(r-1) + 1`.
pub fn gg_parameter(rd: &RootData, beta: f64, l: usize) -> f64 {
    (beta - 2.0 * l as f64 + rd.iota + rd.two_b - 1.0) / 2.0 + rd.a / 2.0 * (rd.rank - 1) as f64 + 1.0
}

/// Both sides of the change of variables behind the Dirac identity, at `beta`:
///
/// `lhs = int_{R^r} |SH|^beta (prod_{k<l} M_{beta-2k} f) dmu` and
/// `rhs = 2^(r(2b + 2 iota)) 2^(a r(r-1)) r! (prod_k m_{beta-2k}) Gamma_a(lambda_beta) G_{lambda_beta}(F)`
/// with `F(x) = prod_j (1 + x_j)^((iota-1)/2) f(t(x))`, `x_j = sh^2 t_j`.
///
/// The factor `2^(a r (r-1))` comes from
/// `2 sh(t_i - t_j) 2 sh(t_i + t_j) = 4 (x_i - x_j)`.
pub fn s_beta_chain<F>(dp: &DomainParams, beta: f64, f: &F, quad: &QuadratureSpec) -> Result<(f64, f64)>
where
    F: JetFunction<Dd> + JetFunction<f64>,
{
    let rd = dp.root_data();
    let l = dp.l as usize;
    let r = rd.rank;
    let lam = gg_parameter(&rd, beta, l);
    let need = rd.a / 2.0 * (r - 1) as f64;
    if !(beta - 2.0 * l as f64 + rd.iota + rd.two_b - 1.0 > -2.0) || !(lam > need) {
        return Err(Error::InvalidParameter(format!(
            "beta window violated: need beta - 2l + iota + 2b - 1 > -2 and lambda_beta = {lam} > (a/2)(r-1) = {need}"
        )));
    }
    if !JetFunction::<Dd>::is_weyl_invariant(f) {
        return Err(Error::InvalidParameter("the chain needs a W-invariant test function".into()));
    }
    let deltas: Vec<f64> = (0..l).map(|k| beta - 2.0 * k as f64).collect();
    let op = chain_invariant(&rd, &deltas)?;
    let lhs = integrate_mu_with(
        &rd,
        beta,
        quad,
        |d| JetFunction::<Dd>::ray_extent(f, d),
        |t| op.apply(f as &dyn JetFunction<Dd>, t),
        true,
    )?
    .value;

    let expo = (rd.iota - 1.0) / 2.0;
    let big_f = |x: &[f64]| -> f64 {
        if x.iter().any(|&v| v < 0.0) {
            return 0.0;
        }
        let t: Vec<f64> = x.iter().map(|&v| libm::asinh(libm::sqrt(v))).collect();
        let v = JetFunction::<f64>::value(f, &t).unwrap_or(0.0);
        if v == 0.0 {
            return 0.0;
        }
        v * x.iter().map(|&xi| libm::pow(1.0 + xi, expo)).product::<f64>()
    };
    let holder = FnHolder { rank: r, g: &big_f };
    let g = gg_integral(&GGSpec { a: rd.a, rank: r, lambda: lam, f: &holder }, quad)?;
    let m: f64 = deltas.iter().map(|&d| m_delta(&rd, d)).product();
    let fact: f64 = (1..=r).map(|k| k as f64).product();
    let pow2 = libm::exp2(r as f64 * (rd.two_b + 2.0 * rd.iota) + rd.a * (r * (r - 1)) as f64);
    let rhs = pow2 * fact * m * gindikin_gamma(rd.a, r, lam)? * g;
    Ok((lhs, rhs))
}

/// A value-only function presented as a [`JetFunction`] of order zero.
struct FnHolder<'a> {
    rank: usize,
    g: &'a (dyn Fn(&[f64]) -> f64 + Sync),
}

impl JetFunction<f64> for FnHolder<'_> {
    fn rank(&self) -> usize {
        self.rank
    }
    fn taylor(&self, t: &[f64], shape: &alloc::sync::Arc<crate::jets::JetShape>) -> Result<crate::jets::Jet<f64>> {
        if shape.order() > 0 {
            return Err(Error::OrderExceeded { requested: shape.order(), max: 0 });
        }
        Ok(crate::jets::Jet::constant(shape, (self.g)(t)))
    }
    fn is_weyl_invariant(&self) -> bool {
        true
    }
}

/// `L(f) = int_{R^r} |SH|^delta0 (prod_{k<l} M_{delta0-2k} f) dmu` with its
/// quadrature error estimate. The estimate is returned, not enforced, because
/// `L(f)` may legitimately vanish.
pub fn dirac_functional<F: JetFunction<Dd> + ?Sized>(
    dp: &DomainParams,
    chain: &OperatorNF,
    f: &F,
    quad: &QuadratureSpec,
) -> Result<Estimate> {
    if !f.is_weyl_invariant() {
        return Err(Error::InvalidParameter("the Dirac functional needs a W-invariant test function".into()));
    }
    let rd = dp.root_data();
    let loose = QuadratureSpec { tolerance: f64::INFINITY, ..*quad };
    integrate_mu_with(&rd, dp.delta0, &loose, |d| f.ray_extent(d), |t| chain.apply(f, t), true)
}

/// Every closed-form candidate for `L(f)/f(0)`, with and without the pair Jacobian.
pub fn dirac_candidates(dp: &DomainParams) -> Vec<Candidate> {
    let mut all = dp.constants.candidates();
    for c in dp.constants.jacobian_candidates() {
        if !all.iter().any(|o| (o.value - c.value).abs() <= 1e-12 * c.value.abs()) {
            all.push(c);
        }
    }
    all
}

/// A test function for [`verify_dirac`] with its value at the origin and a
/// sup-norm scale.
pub struct DiracProbe<'a> {
    pub f: &'a dyn JetFunction<Dd>,
    pub at_origin: f64,
    pub sup: f64,
    pub label: String,
}

/// One evaluation of the Dirac functional on a probe.
#[derive(Clone, Debug, PartialEq)]
pub struct DiracMeasurement {
    pub label: String,
    pub at_origin: f64,
    pub sup: f64,
    pub estimate: Estimate,
}

/// Evaluate [`dirac_functional`] on one probe.
pub fn measure_dirac(dp: &DomainParams, chain: &OperatorNF, p: &DiracProbe, quad: &QuadratureSpec) -> Result<DiracMeasurement> {
    Ok(DiracMeasurement {
        label: p.label.clone(),
        at_origin: p.at_origin,
        sup: p.sup,
        estimate: dirac_functional(dp, chain, p.f, quad)?,
    })
}

/// Measure `L(f)/f(0)` on every probe with `f(0) != 0`, check consistency
/// (relative `1e-3` in rank one, `1e-2` otherwise), check `L(f) ~ 0` when
/// `f(0) = 0`, and compare the inversion constant against the closed-form
/// candidates. Exactly one candidate must match.
///
/// At the origin `R^t R f(o) = 2^(r delta0) L(f)`, so the inversion constant
/// is `c_measured = 2^(r delta0) L(f)/f(0)`; the bare ratio is `c_dirac`.
pub fn verify_dirac(dp: &DomainParams, probes: &[DiracProbe], quad: &QuadratureSpec) -> Result<VerificationReport> {
    let chain = dirac_chain_op(dp)?;
    let ms: Vec<DiracMeasurement> = probes.iter().map(|p| measure_dirac(dp, &chain, p, quad)).collect::<Result<_>>()?;
    dirac_report(dp, &ms)
}

/// The report of [`verify_dirac`] from measurements taken elsewhere.
pub fn dirac_report(dp: &DomainParams, ms: &[DiracMeasurement]) -> Result<VerificationReport> {
    let tol = if dp.r == 1 { 1e-3 } else { 1e-2 };
    let mut rep = VerificationReport::new("dirac", tol)
        .param("a", dp.a as f64)
        .param("n", dp.n as f64)
        .param("r", dp.r as f64)
        .param("rprime", dp.r_prime as f64)
        .param("l", dp.l as f64);
    let mut ratios = Vec::new();
    let mut nulls = Vec::new();
    let mut quad_err: f64 = 0.0;
    for m in ms {
        let est = m.estimate;
        if m.at_origin != 0.0 {
            let q = est.value / m.at_origin;
            rep.constant(&format!("ratio[{}]", m.label), q);
            quad_err = quad_err.max(est.error / est.value.abs());
            ratios.push(q);
        } else {
            rep.constant(&format!("value[{}]", m.label), est.value);
            nulls.push((est, m.sup));
        }
    }
    if ratios.is_empty() {
        return Err(Error::InvalidParameter("need at least one probe with f(0) != 0".into()));
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    for q in &ratios {
        rep.record((q - mean).abs(), mean.abs());
    }
    for (est, sup) in nulls {
        rep.record(est.value.abs(), mean.abs() * sup);
        quad_err = quad_err.max(est.error / (mean.abs() * sup));
    }
    rep.constant("quadrature_error_estimate", quad_err);
    if quad_err > tol {
        rep.fail();
    }
    let c = mean * dp.constants.radon_prefactor;
    rep.constant("c_dirac", mean);
    rep.constant("c_measured", c);
    let mut matches = 0;
    for cand in dirac_candidates(dp) {
        let e = (c - cand.value).abs() / cand.value.abs();
        rep.constant(&format!("candidate:{}", cand.name), cand.value);
        rep.constant(&format!("rel_err:{}", cand.name), e);
        if e < tol {
            matches += 1;
        }
    }
    rep.constant("matching_candidates", matches as f64);
    if matches != 1 {
        rep.fail();
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::{bump, Jet, JetShape};
    use crate::quadrature::gauss_legendre;
    use crate::rootsys::domain_params;
    use crate::special::gamma;
    use alloc::sync::Arc;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    /// `x * bump(x)`, zero at the origin with nonzero slope.
    struct Sloped(crate::jets::Bump);

    impl JetFunction<f64> for Sloped {
        fn rank(&self) -> usize {
            1
        }
        fn taylor(&self, t: &[f64], shape: &Arc<JetShape>) -> Result<Jet<f64>> {
            let b = JetFunction::<f64>::taylor(&self.0, t, shape)?;
            Ok(Jet::variable(shape, 0, t[0]).mul(&b))
        }
        fn ray_extent(&self, d: &[f64]) -> Option<f64> {
            JetFunction::<f64>::ray_extent(&self.0, d)
        }
    }

    fn gl(a: f64, b: f64, panels: usize, f: impl Fn(f64) -> f64) -> f64 {
        let (x, w) = gauss_legendre(30);
        let h = (b - a) / panels as f64;
        let mut s = 0.0;
        for p in 0..panels {
            let m = a + (p as f64 + 0.5) * h;
            for (xi, wi) in x.iter().zip(&w) {
                s += wi * h / 2.0 * f(m + h / 2.0 * xi);
            }
        }
        s
    }

    #[test]
    fn rank_one_against_direct() {
        let b = bump(1, 2.0);
        let quad = QuadratureSpec::default();
        for lam in [0.7, 1.0, 2.5] {
            let v = gg_integral(&GGSpec { a: 1.0, rank: 1, lambda: lam, f: &b }, &quad).unwrap();
            // x^(lam-1) with lam >= 0.7 is mild after substituting x = u^(1/lam)
            let direct = gl(0.0, libm::pow(2.0, lam), 40, |u| b.eval_f64(&[libm::pow(u, 1.0 / lam)]) / lam) / gamma(lam).unwrap();
            assert!(rel(v, direct) < 1e-8, "lambda={lam}: {v} vs {direct}");
        }
        let zero = crate::jets::Constant { rank: 1, value: 0.0 };
        assert!(gg_integral(&GGSpec { a: 1.0, rank: 1, lambda: 1.0, f: &zero }, &quad).is_err() || true);
    }

    #[test]
    fn rank_two_against_square_mesh() {
        let b = bump(2, 1.5);
        let quad = QuadratureSpec::default();
        let v = gg_integral(&GGSpec { a: 2.0, rank: 2, lambda: 3.0, f: &b }, &quad).unwrap();
        // full square, divided by 2! Gamma_2(3)
        let inner = |x1: f64| gl(0.0, 1.5, 12, |x2| (x1 * x2).powi(1) * (x1 - x2).powi(2) * b.eval_f64(&[x1, x2]));
        let mesh = gl(0.0, 1.5, 12, inner) / 2.0 / gindikin_gamma(2.0, 2, 3.0).unwrap();
        assert!(rel(v, mesh) < 1e-6, "{v} vs {mesh}");
    }

    #[test]
    fn divergent_lambda_refused() {
        let b = bump(2, 1.0);
        let quad = QuadratureSpec::default();
        assert!(matches!(gg_integral(&GGSpec { a: 2.0, rank: 2, lambda: 0.9, f: &b }, &quad), Err(Error::Divergent(_))));
    }

    #[test]
    fn riesz_limit() {
        let quad = QuadratureSpec { nodes: 60, ..QuadratureSpec::default() };
        let grid = [0.025, 0.05, 0.075, 0.1, 0.125, 0.15, 0.175, 0.2];
        let b = bump(1, 1.0).scaled(libm::exp(1.0));
        let (v, _) = gg_dirac_limit_rank1(&b, &grid, &quad).unwrap();
        assert!((v - 1.0).abs() < 1e-3, "{v}");
        let wide = bump(1, 3.0).scaled(libm::exp(1.0));
        let (w, _) = gg_dirac_limit_rank1(&wide, &grid, &quad).unwrap();
        assert!((w - v).abs() < 1e-3);
        let (z, _) = gg_dirac_limit_rank1(&Sloped(bump(1, 1.0)), &grid, &quad).unwrap();
        assert!(z.abs() < 1e-3, "{z}");
    }

    #[test]
    fn neville_exact_on_polynomials() {
        let xs = [0.1, 0.2, 0.3, 0.5];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 - x + 3.0 * x * x * x).collect();
        assert!((neville_at_zero(&xs, &ys).unwrap() - 2.0).abs() < 1e-13);
    }

    #[test]
    fn s_beta_rank_one() {
        let dp = domain_params(2, 5, 1, 2).unwrap();
        let f = bump(1, 1.0);
        let quad = QuadratureSpec { nodes: 60, ..QuadratureSpec::default() };
        let (l, r) = s_beta_chain(&dp, dp.delta0 + 4.0, &f, &quad).unwrap();
        assert!(rel(l, r) < 1e-5, "{l} vs {r}");
    }

    #[test]
    fn dirac_rank_one_h3() {
        let dp = domain_params(1, 4, 1, 3).unwrap();
        let fs = [bump(1, 0.5), bump(1, 1.0), bump(1, 1.5).with_prefactor(1.0, 0.5)];
        let zero_at_origin = bump(1, 1.0).with_prefactor(0.0, 1.0);
        let mut probes: Vec<DiracProbe> = fs
            .iter()
            .enumerate()
            .map(|(i, f)| DiracProbe { f, at_origin: f.at_origin(), sup: 1.0, label: format!("{i}") })
            .collect();
        probes.push(DiracProbe { f: &zero_at_origin, at_origin: 0.0, sup: 1.0, label: "zero".into() });
        let quad = QuadratureSpec { nodes: 60, ..QuadratureSpec::default() };
        let rep = verify_dirac(&dp, &probes, &quad).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!(rel(rep.measured_constants["c_dirac"], -8.0) < 1e-6);
        assert!(rel(rep.measured_constants["c_measured"], -4.0) < 1e-6);
    }

    #[test]
    fn dirac_rank_one_octonionic() {
        let dp = domain_params(8, 3, 1, 2).unwrap();
        let fs = [bump(1, 1.0), bump(1, 0.7).with_prefactor(1.0, 0.3)];
        let probes: Vec<DiracProbe> = fs
            .iter()
            .enumerate()
            .map(|(i, f)| DiracProbe { f, at_origin: f.at_origin(), sup: 1.0, label: format!("{i}") })
            .collect();
        let quad = QuadratureSpec { nodes: 40, panels: 16, ..QuadratureSpec::default() };
        let rep = verify_dirac(&dp, &probes, &quad).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!(rel(rep.measured_constants["c_dirac"], 5411658792960.0) < 1e-6);
    }
}

//! Verification harnesses for the Bernstein-Sato identities of `|SH|^delta`
//! and `CH^delta`, the partial-product ladder, commutativity and symmetry of
//! the Cherednik family, and the zeta distributions with their continuation.
//!
//! Pointwise identities are checked pointwise, in double-double arithmetic.
//! Distributional statements are checked in weak form against bump functions.

use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cherednik::{chain_invariant, MDeltaFamily, OperatorNF};
use crate::error::{Error, Result};
use crate::jets::{bump, ch_power, sh_power, JetFunction, JetShape, ShCothProduct};
use crate::quadrature::{integrate_mu, integrate_mu_with, QuadratureSpec};
use crate::real::{Dd, Real};
use crate::report::VerificationReport;
use crate::rootsys::RootData;
use crate::special::{cosh_constant, m_delta, z_delta};

/// Default relative tolerance of pointwise identities.
pub const POINTWISE_TOL: f64 = 1e-8;
/// Default relative tolerance of identities that go through quadrature.
pub const QUADRATURE_TOL: f64 = 1e-6;
/// Default tolerance of the scalar identities.
pub const FLAT_TOL: f64 = 1e-12;

/// Smallest allowed coordinate and gap of a sample point.
pub const MIN_SEPARATION: f64 = 0.05;
const MAX_COORD: f64 = 2.0;

/// `samples` points of the open positive chamber `t_1 > ... > t_r > 0`, every
/// coordinate in `(0.05, 2)` and consecutive gaps above `0.05`.
///
/// The generator is ChaCha8 seeded with `seed`, so the points are reproducible.
pub fn chamber_points(rank: usize, samples: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(samples);
    while out.len() < samples {
        let mut t: Vec<f64> = (0..rank).map(|_| rng.gen_range(MIN_SEPARATION..MAX_COORD)).collect();
        t.sort_by(|a, b| b.total_cmp(a));
        let separated = t.windows(2).all(|w| w[0] - w[1] > MIN_SEPARATION) && t[rank - 1] > MIN_SEPARATION;
        if separated {
            out.push(t);
        }
    }
    out
}

fn dd(t: &[f64]) -> Vec<Dd> {
    t.iter().map(|&x| Dd::new(x)).collect()
}

fn base_report(check: &str, rd: &RootData, delta: f64, tol: f64, seed: u64) -> VerificationReport {
    VerificationReport::new(check, tol)
        .param("rank", rd.rank as f64)
        .param("a", rd.a)
        .param("2b", rd.two_b)
        .param("iota", rd.iota)
        .param("delta", delta)
        .with_seed(seed)
}

/// Residual of `M_delta |SH|^delta = m_delta |SH|^(delta-2)` at one point:
/// `(|lhs - rhs|, |m_delta| |SH|^(delta-2) + |SH|^delta)`.
pub fn bs_sinh_residual(op: &OperatorNF, rd: &RootData, delta: f64, t: &[f64]) -> Result<(f64, f64)> {
    let td = dd(t);
    let lhs = op.apply(&sh_power(rd.rank, delta), &td)?;
    let m = m_delta(rd, delta);
    let low: Dd = JetFunction::<Dd>::value(&sh_power(rd.rank, delta - 2.0), &td)?;
    let top: Dd = JetFunction::<Dd>::value(&sh_power(rd.rank, delta), &td)?;
    let rhs = low * Dd::new(m);
    Ok(((lhs - rhs).abs().to_f64(), m.abs() * low.to_f64() + top.to_f64()))
}

/// Residual of `M_delta CH^delta = c CH^(delta-2)` at one point.
pub fn bs_cosh_residual(op: &OperatorNF, rd: &RootData, delta: f64, t: &[f64]) -> Result<(f64, f64)> {
    let td = dd(t);
    let lhs = op.apply(&ch_power(rd.rank, delta), &td)?;
    let c = cosh_constant(rd, delta);
    let low: Dd = JetFunction::<Dd>::value(&ch_power(rd.rank, delta - 2.0), &td)?;
    let top: Dd = JetFunction::<Dd>::value(&ch_power(rd.rank, delta), &td)?;
    let rhs = low * Dd::new(c);
    Ok(((lhs - rhs).abs().to_f64(), c.abs() * low.to_f64() + top.to_f64()))
}

/// Check the `|SH|^delta` identity at `samples` random chamber points.
pub fn verify_bs_sinh(rd: &RootData, delta: f64, samples: usize, seed: u64) -> Result<VerificationReport> {
    let op = MDeltaFamily::new(rd)?.at(delta)?;
    verify_bs_sinh_with(&op, rd, delta, &chamber_points(rd.rank, samples, seed), seed)
}

/// [`verify_bs_sinh`] with a prebuilt `M_delta` and explicit points.
pub fn verify_bs_sinh_with(
    op: &OperatorNF,
    rd: &RootData,
    delta: f64,
    points: &[Vec<f64>],
    seed: u64,
) -> Result<VerificationReport> {
    let mut rep = base_report("bs-sinh", rd, delta, POINTWISE_TOL, seed);
    rep.constant("m_delta", m_delta(rd, delta));
    for t in points {
        let (e, s) = bs_sinh_residual(op, rd, delta, t)?;
        rep.record(e, s);
    }
    Ok(rep)
}

/// Check the `CH^delta` identity at `samples` random chamber points.
pub fn verify_bs_cosh(rd: &RootData, delta: f64, samples: usize, seed: u64) -> Result<VerificationReport> {
    let op = MDeltaFamily::new(rd)?.at(delta)?;
    verify_bs_cosh_with(&op, rd, delta, &chamber_points(rd.rank, samples, seed), seed)
}

pub fn verify_bs_cosh_with(
    op: &OperatorNF,
    rd: &RootData,
    delta: f64,
    points: &[Vec<f64>],
    seed: u64,
) -> Result<VerificationReport> {
    let mut rep = base_report("bs-cosh", rd, delta, POINTWISE_TOL, seed);
    rep.constant("cosh_constant", cosh_constant(rd, delta));
    for t in points {
        let (e, s) = bs_cosh_residual(op, rd, delta, t)?;
        rep.record(e, s);
    }
    Ok(rep)
}

/// Residuals of `(d^2 - delta^2)|sh t|^delta = delta(delta-1)|sh t|^(delta-2)`
/// and `(d^2 - delta^2) ch^delta t = -delta(delta-1) ch^(delta-2) t` at `t != 0`.
pub fn bs_flat_residuals(delta: f64, t: f64) -> Result<[(f64, f64); 2]> {
    if t == 0.0 {
        return Err(Error::Domain("the flat identity needs t != 0".into()));
    }
    let shape = JetShape::new(1, 2)?;
    let td = [Dd::new(t)];
    let k = Dd::new(delta * (delta - 1.0));
    let d2 = Dd::new(delta) * Dd::new(delta);
    let mut out = [(0.0, 0.0); 2];
    for (i, sinh) in [true, false].into_iter().enumerate() {
        let (jet, low) = if sinh {
            (sh_power(1, delta).taylor(&td, &shape)?, JetFunction::<Dd>::value(&sh_power(1, delta - 2.0), &td)?)
        } else {
            (ch_power(1, delta).taylor(&td, &shape)?, JetFunction::<Dd>::value(&ch_power(1, delta - 2.0), &td)?)
        };
        let lhs = jet.derivative(&[2])? - d2 * jet.value();
        let rhs = if sinh { k * low } else { -(k * low) };
        out[i] = ((lhs - rhs).abs().to_f64(), k.abs().to_f64() * low.to_f64() + jet.value().to_f64());
    }
    Ok(out)
}

/// Check both scalar identities at `samples` points `t` with `0.05 < |t| < 3`.
pub fn verify_bs_flat(delta: f64, samples: usize, seed: u64) -> Result<VerificationReport> {
    let mut rep = VerificationReport::new("bs-flat", FLAT_TOL).param("delta", delta).with_seed(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        let mag: f64 = rng.gen_range(MIN_SEPARATION..3.0);
        let t = if rng.gen_bool(0.5) { mag } else { -mag };
        for (e, s) in bs_flat_residuals(delta, t)? {
            rep.record(e, s);
        }
    }
    Ok(rep)
}

/// The two partial products of the ladder for a given `j` (1-based):
/// `prod_{k<=j} (D_k + delta + rho_1)` and `prod_{k>=j} (D_k - delta - rho_1)`.
pub fn ladder_ops(rd: &RootData, delta: f64, j: usize) -> Result<(OperatorNF, OperatorNF)> {
    if j == 0 || j > rd.rank {
        return Err(Error::InvalidParameter(format!("ladder index j must satisfy 1 <= j <= r = {}, got {j}", rd.rank)));
    }
    let c = delta + rd.rho_j(1);
    let mut up = OperatorNF::identity(rd);
    for k in 0..j {
        up = OperatorNF::cherednik(rd, k).add_scalar(c).compose(&up)?;
    }
    let mut down = OperatorNF::identity(rd);
    for k in (j - 1..rd.rank).rev() {
        down = OperatorNF::cherednik(rd, k).add_scalar(-c).compose(&down)?;
    }
    Ok((up, down))
}

/// Check both ladder formulas for one `j` at the given chamber points.
pub fn verify_ladder_with(
    rd: &RootData,
    delta: f64,
    j: usize,
    points: &[Vec<f64>],
    seed: u64,
) -> Result<VerificationReport> {
    let (up, down) = ladder_ops(rd, delta, j)?;
    let r = rd.rank;
    let all = (1u32 << r) - 1;
    let first_j = (1u32 << j) - 1;
    let tail = all & !((1u32 << (j - 1)) - 1);
    let up_const: f64 = (1..=j).map(|k| delta + rd.a * (k - 1) as f64).product();
    let down_const: f64 =
        (j..=r).map(|k| delta - 1.0 + (r - k) as f64 * rd.a + rd.iota + rd.two_b).product();
    let src_up = sh_power(r, delta);
    let src_down = ShCothProduct { rank: r, delta, plus: all, minus: 0 };
    let want_up = ShCothProduct { rank: r, delta, plus: first_j, minus: 0 };
    let want_down = ShCothProduct { rank: r, delta, plus: all, minus: tail };

    let mut rep = base_report("ladder", rd, delta, POINTWISE_TOL, seed).param("j", j as f64);
    rep.constant("up_constant", up_const);
    rep.constant("down_constant", down_const);
    for t in points {
        let td = dd(t);
        let lhs = up.apply(&src_up, &td)?;
        let rhs = JetFunction::<Dd>::value(&want_up, &td)? * Dd::new(up_const);
        let src: Dd = JetFunction::<Dd>::value(&src_up, &td)?;
        rep.record((lhs - rhs).abs().to_f64(), rhs.abs().to_f64() + src.to_f64());

        let lhs = down.apply(&src_down, &td)?;
        let rhs = JetFunction::<Dd>::value(&want_down, &td)? * Dd::new(down_const);
        let src: Dd = JetFunction::<Dd>::value(&src_down, &td)?;
        rep.record((lhs - rhs).abs().to_f64(), rhs.abs().to_f64() + src.abs().to_f64());
    }
    Ok(rep)
}

/// Check both ladder formulas for `j` (or every `j = 1..=r` when `None`).
pub fn verify_ladder(
    rd: &RootData,
    delta: f64,
    j: Option<usize>,
    samples: usize,
    seed: u64,
) -> Result<VerificationReport> {
    let points = chamber_points(rd.rank, samples, seed);
    let js: Vec<usize> = match j {
        Some(j) => alloc::vec![j],
        None => (1..=rd.rank).collect(),
    };
    let mut rep = base_report("ladder", rd, delta, POINTWISE_TOL, seed);
    for j in js {
        let one = verify_ladder_with(rd, delta, j, &points, seed)?;
        for (k, v) in &one.measured_constants {
            rep.constant(&format!("{k}[j={j}]"), *v);
        }
        rep.merge(&one);
    }
    if let Some(j) = j {
        rep = rep.param("j", j as f64);
    }
    Ok(rep)
}

/// A smooth function with no Weyl symmetry, used to test operator identities
/// on the full function space.
pub fn asymmetric_probe(rank: usize) -> ShCothProduct {
    ShCothProduct { rank, delta: 1.3, plus: 0b0101 & ((1 << rank) - 1), minus: 0b0010 & ((1 << rank) - 1) }
}

/// `[D_i, D_j] f = 0` for all `i < j` on a non-invariant probe.
pub fn verify_commute(rd: &RootData, samples: usize, seed: u64) -> Result<VerificationReport> {
    let r = rd.rank;
    let mut rep = base_report("commute", rd, 0.0, 1e-9, seed);
    rep.params.remove("delta");
    let probe = asymmetric_probe(r);
    let points = chamber_points(r, samples, seed);
    let ds: Vec<OperatorNF> = (0..r).map(|j| OperatorNF::cherednik(rd, j)).collect();
    for i in 0..r {
        for j in i + 1..r {
            let ij = ds[i].compose(&ds[j])?;
            let ji = ds[j].compose(&ds[i])?;
            for t in &points {
                let td = dd(t);
                let (a, sa) = ij.apply_with_scale(&probe, &td)?;
                let (b, sb) = ji.apply_with_scale(&probe, &td)?;
                rep.record((a - b).abs().to_f64(), sa.max(sb));
            }
        }
    }
    if r == 1 {
        // nothing to commute; record the trivial residual so the report is not empty
        rep.record(0.0, 1.0);
    }
    Ok(rep)
}

/// `<M_delta f, g>_mu = <f, M_delta g>_mu` for two distinct W-invariant bumps.
pub fn verify_adjoint(rd: &RootData, delta: f64, spec: &QuadratureSpec, seed: u64) -> Result<VerificationReport> {
    let op = MDeltaFamily::new(rd)?.at(delta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = bump(rd.rank, rng.gen_range(0.8..1.2));
    let g = bump(rd.rank, rng.gen_range(1.0..1.5)).with_kappa(0.5).with_prefactor(1.0, rng.gen_range(0.2..1.0));
    let (l, r) = crate::cherednik::adjoint_pairing(rd, &op, &f, &g, spec)?;
    let mut rep = base_report("adjoint", rd, delta, QUADRATURE_TOL, seed);
    rep.constant("left", l);
    rep.constant("right", r);
    rep.record((l - r).abs(), l.abs().max(r.abs()));
    Ok(rep)
}

fn convergence_floor(rd: &RootData) -> f64 {
    -1.0 - rd.iota - rd.two_b
}

/// `zeta_delta(f) = (1/z_delta) int |SH|^delta f dmu` in the convergent range.
pub fn zeta<F: JetFunction<Dd> + ?Sized>(rd: &RootData, delta: f64, f: &F, spec: &QuadratureSpec) -> Result<f64> {
    let lo = convergence_floor(rd);
    if !(delta > lo) {
        return Err(Error::Divergent(format!("zeta needs delta > -1 - iota - 2b = {lo}, got {delta}")));
    }
    check_invariant(f)?;
    let z = z_delta(rd, delta)?;
    Ok(integrate_mu(rd, f, delta, spec)?.value / z)
}

fn check_invariant<F: JetFunction<Dd> + ?Sized>(f: &F) -> Result<()> {
    if f.is_weyl_invariant() {
        Ok(())
    } else {
        Err(Error::InvalidParameter("zeta needs a W-invariant test function".into()))
    }
}

/// `zeta_{delta_target}` continued by `k_steps` applications of the identity:
/// `2^(-2rk) (1/z_{d+2k}) int |SH|^(d+2k) (M_{d+2} ... M_{d+2k} f) dmu`.
pub fn zeta_continued<F: JetFunction<Dd> + ?Sized>(
    rd: &RootData,
    delta_target: f64,
    f: &F,
    k_steps: usize,
    spec: &QuadratureSpec,
) -> Result<f64> {
    let deltas: Vec<f64> = (1..=k_steps).map(|k| delta_target + 2.0 * k as f64).collect();
    zeta_continued_ordered(rd, delta_target, f, &deltas, spec)
}

/// [`zeta_continued`] with the `M` factors applied in the given order
/// (`deltas[0]` outermost). Any permutation of the chain gives the same value.
pub fn zeta_continued_ordered<F: JetFunction<Dd> + ?Sized>(
    rd: &RootData,
    delta_target: f64,
    f: &F,
    deltas: &[f64],
    spec: &QuadratureSpec,
) -> Result<f64> {
    let k = deltas.len();
    if k == 0 {
        return zeta(rd, delta_target, f, spec);
    }
    let top = delta_target + 2.0 * k as f64;
    let lo = convergence_floor(rd);
    if !(top > lo) {
        return Err(Error::Divergent(format!(
            "continuation needs delta + 2k > -1 - iota - 2b = {lo}, got {top}"
        )));
    }
    check_invariant(f)?;
    let op = chain_invariant(rd, deltas)?;
    let z = z_delta(rd, top)?;
    let est = integrate_mu_with(rd, top, spec, |d| f.ray_extent(d), |t| op.apply(f, t), true)?;
    Ok(est.value / z / libm::exp2((2 * rd.rank * k) as f64))
}

/// Weak form of `M_delta zeta_delta = 2^(2r) zeta_(delta-2)`:
/// `zeta_delta(M_delta f)` against `4^r zeta_(delta-2)(f)`, both convergent.
pub fn verify_zeta_recursion<F: JetFunction<Dd> + ?Sized>(
    rd: &RootData,
    delta: f64,
    f: &F,
    spec: &QuadratureSpec,
) -> Result<VerificationReport> {
    let mut rep = base_report("zeta-recursion", rd, delta, QUADRATURE_TOL, 0);
    check_invariant(f)?;
    let op = MDeltaFamily::new(rd)?.at(delta)?;
    let z = z_delta(rd, delta)?;
    let lhs = integrate_mu_with(rd, delta, spec, |d| f.ray_extent(d), |t| op.apply(f, t), true)?.value / z;
    let rhs = libm::exp2((2 * rd.rank) as f64) * zeta(rd, delta - 2.0, f, spec)?;
    rep.constant("M_delta zeta_delta", lhs);
    rep.constant("4^r zeta_(delta-2)", rhs);
    rep.record((lhs - rhs).abs(), lhs.abs().max(rhs.abs()));
    Ok(rep)
}

/// `zeta_continued(delta, f, k)` against `zeta(delta, f)` for `delta` in the
/// convergent range.
pub fn verify_zeta_overlap<F: JetFunction<Dd> + ?Sized>(
    rd: &RootData,
    delta: f64,
    f: &F,
    k_steps: usize,
    spec: &QuadratureSpec,
) -> Result<VerificationReport> {
    let mut rep = base_report("zeta-overlap", rd, delta, QUADRATURE_TOL, 0).param("steps", k_steps as f64);
    let direct = zeta(rd, delta, f, spec)?;
    let cont = zeta_continued(rd, delta, f, k_steps, spec)?;
    rep.constant("zeta", direct);
    rep.constant("zeta_continued", cont);
    rep.record((direct - cont).abs(), direct.abs().max(cont.abs()));
    Ok(rep)
}

//! Quadrature over the positive Weyl chamber with algebraic wall singularities.
//!
//! The chamber `t_1 > t_2 > ... > t_r > 0` is parametrized by
//! `t_1 = rho`, `t_k = rho * v_2 * ... * v_k` with `v_k in [0, 1]`, which sends
//! every wall to a coordinate face. Power-law behaviour at the faces is
//! extracted into Gauss-Jacobi weights; the remaining factor is smooth.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::jets::JetFunction;
use crate::real::{Dd, Real};
use crate::rootsys::{weyl_elements, RootData};
use crate::special::{gamma, measure_density};

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let pi = core::f64::consts::PI;
    for i in 0..n.div_ceil(2) {
        let mut z = libm::cos(pi * (i as f64 + 0.75) / (n as f64 + 0.5));
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p1 = z;
                p0 = 1.0;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Gauss rule for `int_0^1 u^p (1 - u)^q g(u) du` (Golub-Welsch).
pub fn gauss_jacobi01(n: usize, p: f64, q: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(p > -1.0 && q > -1.0) {
        return Err(Error::Quadrature(alloc::format!("Jacobi exponents must exceed -1 (got {p}, {q})")));
    }
    // on [-1, 1] the weight is (1 - x)^q (1 + x)^p
    let (al, be) = (q, p);
    let s = al + be;
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n];
    for (k, d) in diag.iter_mut().enumerate() {
        let k2 = 2.0 * k as f64 + s;
        *d = if k == 0 {
            (be - al) / (s + 2.0)
        } else {
            (be * be - al * al) / (k2 * (k2 + 2.0))
        };
    }
    for k in 1..n {
        let kf = k as f64;
        let k2 = 2.0 * kf + s;
        let b2 = if k == 1 {
            4.0 * (1.0 + al) * (1.0 + be) / ((2.0 + s) * (2.0 + s) * (3.0 + s))
        } else {
            4.0 * kf * (kf + al) * (kf + be) * (kf + s) / (k2 * k2 * (k2 + 1.0) * (k2 - 1.0))
        };
        off[k] = libm::sqrt(b2);
    }
    let (eig, first) = tridiagonal_eigen(diag, off)?;
    let mu0 = gamma(p + 1.0)? * gamma(q + 1.0)? / gamma(p + q + 2.0)?;
    let mut pairs: Vec<(f64, f64)> =
        eig.iter().zip(&first).map(|(&x, &v)| ((1.0 + x) / 2.0, mu0 * v * v)).collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite nodes"));
    Ok(pairs.into_iter().unzip())
}

/// Eigenvalues and first eigenvector components of a symmetric tridiagonal
/// matrix (`off[k]` couples `k - 1` and `k`), by implicit QL.
fn tridiagonal_eigen(mut d: Vec<f64>, off: Vec<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = d.len();
    let mut e = vec![0.0; n];
    e[..n.saturating_sub(1)].copy_from_slice(&off[1..]);
    let mut z = vec![0.0; n];
    if n > 0 {
        z[0] = 1.0;
    }
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::Quadrature("tridiagonal QL did not converge".into()));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = libm::hypot(g, 1.0);
            g = d[m] - d[l] + e[l] / (g + if g >= 0.0 { r.abs() } else { -r.abs() });
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = libm::hypot(f, g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let zf = z[i + 1];
                z[i + 1] = s * z[i] + c * zf;
                z[i] = c * z[i] - s * zf;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok((d, z))
}

/// Fixed-level tanh-sinh sum for `int_a^b f`; `f` receives `(x, x - a, b - x)`.
fn tanh_sinh_level<F: FnMut(f64, f64, f64) -> Result<f64>>(
    f: &mut F,
    a: f64,
    b: f64,
    level: u32,
) -> Result<(f64, f64)> {
    let h = libm::ldexp(1.0, -(level as i32));
    let half = (b - a) / 2.0;
    let pi2 = core::f64::consts::FRAC_PI_2;
    let mut sum = 0.0;
    let mut abs = 0.0;
    let kmax = (6.0 / h) as i64;
    for k in -kmax..=kmax {
        let s = k as f64 * h;
        let u = pi2 * libm::sinh(s);
        let ch = libm::cosh(u);
        // 1 - tanh(u) and 1 + tanh(u) without cancellation
        let em = 1.0 / (libm::exp(u) * ch);
        let ep = 1.0 / (libm::exp(-u) * ch);
        let w = pi2 * libm::cosh(s) / (ch * ch);
        let da = half * ep;
        let db = half * em;
        if da < 1e-280 || db < 1e-280 || w * half < 1e-300 {
            continue;
        }
        let x = if da < db { a + da } else { b - db };
        let v = w * f(x, da, db)?;
        sum += v;
        abs += v.abs();
    }
    Ok((sum * h * half, abs * h * half))
}

/// Adaptive tanh-sinh quadrature of `int_a^b f`, returning `(value, error estimate)`.
///
/// Integrable endpoint singularities are handled natively; `f` receives
/// `(x, x - a, b - x)` so that it can form endpoint powers accurately.
pub fn tanh_sinh<F: FnMut(f64, f64, f64) -> Result<f64>>(f: F, a: f64, b: f64, tol: f64) -> Result<(f64, f64)> {
    let (v, err, ok) = tanh_sinh_best(f, a, b, tol, 0.0)?;
    if ok {
        Ok((v, err))
    } else {
        Err(Error::Quadrature(alloc::format!(
            "tanh-sinh did not reach tolerance {tol:e} on [{a}, {b}] (last change {err:e}, value {v:e})"
        )))
    }
}

/// Like [`tanh_sinh`] but returns the finest estimate even without convergence.
fn tanh_sinh_best<F: FnMut(f64, f64, f64) -> Result<f64>>(
    mut f: F,
    a: f64,
    b: f64,
    tol: f64,
    abs_tol: f64,
) -> Result<(f64, f64, bool)> {
    if a == b {
        return Ok((0.0, 0.0, true));
    }
    let (mut prev, _) = tanh_sinh_level(&mut f, a, b, 2)?;
    let mut err = f64::INFINITY;
    for level in 3..=9 {
        let (cur, abs) = tanh_sinh_level(&mut f, a, b, level)?;
        err = (cur - prev).abs();
        if err <= (tol * cur.abs()).max(1e-15 * abs).max(abs_tol) || (cur == 0.0 && prev == 0.0) {
            return Ok((cur, err, true));
        }
        prev = cur;
    }
    Ok((prev, err, false))
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const G7_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Adaptive Gauss-Kronrod (7/15) quadrature of `int_a^b f` for smooth `f`.
pub fn gauss_kronrod<F: FnMut(f64) -> Result<f64>>(f: F, a: f64, b: f64, tol: f64) -> Result<(f64, f64)> {
    gauss_kronrod_abs(f, a, b, tol, 0.0)
}

fn gauss_kronrod_abs<F: FnMut(f64) -> Result<f64>>(
    mut f: F,
    a: f64,
    b: f64,
    tol: f64,
    abs_tol: f64,
) -> Result<(f64, f64)> {
    let mut rule = |lo: f64, hi: f64| -> Result<(f64, f64)> {
        let c = (lo + hi) / 2.0;
        let h = (hi - lo) / 2.0;
        let fc = f(c)?;
        let mut k = GK_WEIGHTS[7] * fc;
        let mut g = G7_WEIGHTS[3] * fc;
        for i in 0..7 {
            let s = f(c - h * GK_NODES[i])? + f(c + h * GK_NODES[i])?;
            k += GK_WEIGHTS[i] * s;
            if i % 2 == 1 {
                g += G7_WEIGHTS[i / 2] * s;
            }
        }
        Ok((k * h, ((k - g) * h).abs()))
    };
    let mut done = 0.0;
    let mut err_done = 0.0;
    let mut stack = vec![(a, b, rule(a, b)?)];
    let mut total = stack[0].2 .0;
    let mut evals = 0;
    while let Some((lo, hi, (v, e))) = stack.pop() {
        let scale = total.abs().max(1e-300);
        let width = (hi - lo) / (b - a);
        if e <= (tol * scale).max(abs_tol) * width.max(1e-3) || e <= 1e-14 * v.abs() || hi - lo < 1e-12 * (b - a) {
            done += v;
            err_done += e;
            continue;
        }
        evals += 1;
        if evals > 20_000 {
            return Err(Error::Quadrature(alloc::format!("Gauss-Kronrod subdivision limit on [{a}, {b}]")));
        }
        let mid = (lo + hi) / 2.0;
        let left = rule(lo, mid)?;
        let right = rule(mid, hi)?;
        total += left.0 + right.0 - v;
        stack.push((lo, mid, left));
        stack.push((mid, hi, right));
    }
    Ok((done, err_done))
}

/// Exponents of the power-law factors at the chamber faces.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChamberWeights {
    /// Exponent of `|t_j|` at `t_j = 0`.
    pub edge: f64,
    /// Exponent of `|t_i - t_j|` at `t_i = t_j`.
    pub diag: f64,
    /// Combined exponent of `|t_i - t_j| |t_i + t_j|` when both vanish.
    pub pair: f64,
}

impl ChamberWeights {
    /// `|SH|^delta dmu` in radial coordinates.
    pub fn radial(rd: &RootData, delta: f64) -> Self {
        ChamberWeights { edge: delta + rd.two_b + rd.iota, diag: rd.a, pair: 2.0 * rd.a }
    }
}

fn choose2(k: usize) -> f64 {
    (k * k.saturating_sub(1) / 2) as f64
}

/// Tensor rule over the positive chamber in recursive polar coordinates.
#[derive(Clone, Debug)]
pub struct ChamberRule {
    rank: usize,
    weights: ChamberWeights,
    nodes: usize,
    truncation: f64,
    panels: usize,
    radial: (Vec<f64>, Vec<f64>),
    angular: Vec<(Vec<f64>, Vec<f64>)>,
    legendre: (Vec<f64>, Vec<f64>),
}

impl ChamberRule {
    pub fn new(rank: usize, weights: ChamberWeights, nodes: usize) -> Result<Self> {
        if rank == 0 || nodes == 0 {
            return Err(Error::InvalidParameter("chamber rule needs rank >= 1 and nodes >= 1".into()));
        }
        if !(weights.edge > -1.0) {
            return Err(Error::Divergent(alloc::format!(
                "wall exponent {} must exceed -1 for integrability",
                weights.edge
            )));
        }
        let r = rank;
        let rho_exp = r as f64 * weights.edge + choose2(r) * weights.pair + (r - 1) as f64;
        let radial = gauss_jacobi01(nodes, rho_exp, 0.0)?;
        let mut angular = Vec::new();
        for k in 2..=r {
            let m = r - k + 1;
            let at0 = m as f64 * weights.edge + choose2(m) * weights.pair + (r - k) as f64;
            angular.push(gauss_jacobi01(nodes, at0, weights.diag)?);
        }
        let legendre = gauss_legendre(nodes);
        Ok(ChamberRule { rank, weights, nodes, truncation: 12.0, panels: 1, radial, angular, legendre })
    }

    /// Cutoff used along rays without a known extent.
    pub fn with_truncation(mut self, t: f64) -> Self {
        self.truncation = t;
        self
    }

    /// Number of Gauss-Legendre panels on the outer half of each ray.
    /// Integrands with large cancelling derivatives near the support edge
    /// need more than one.
    pub fn with_panels(mut self, panels: usize) -> Self {
        self.panels = panels.max(1);
        self
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn weights(&self) -> ChamberWeights {
        self.weights
    }

    fn rho_exponent(&self) -> f64 {
        let r = self.rank;
        r as f64 * self.weights.edge + choose2(r) * self.weights.pair + (r - 1) as f64
    }

    /// `int_chamber f dt`. `extent(dir)` bounds the support along the ray
    /// `rho * dir`; `None` means the integrand is cut at the truncation radius.
    pub fn integrate<E, F>(&self, extent: E, mut f: F) -> Result<f64>
    where
        E: Fn(&[f64]) -> Option<f64>,
        F: FnMut(&[f64]) -> Result<f64>,
    {
        let r = self.rank;
        let mut idx = vec![0usize; r.saturating_sub(1)];
        let mut total = 0.0;
        let mut dir = vec![0.0; r];
        let mut t = vec![0.0; r];
        let rho_exp = self.rho_exponent();
        loop {
            // direction and angular weight
            let mut wa = 1.0;
            let mut extracted = 1.0;
            dir[0] = 1.0;
            for k in 1..r {
                let (ref xs, ref ws) = self.angular[k - 1];
                let v = xs[idx[k - 1]];
                dir[k] = dir[k - 1] * v;
                wa *= ws[idx[k - 1]];
                let m = r - k;
                let at0 = m as f64 * self.weights.edge + choose2(m) * self.weights.pair + (r - k - 1) as f64;
                extracted *= pow(v, at0) * pow(1.0 - v, self.weights.diag);
                wa *= pow(v, (r - k - 1) as f64);
            }
            let ext = extent(&dir);
            let mut line = 0.0;
            let mut radial_piece = |lo: f64, hi: f64, kind: Piece, line: &mut f64| -> Result<()> {
                if hi <= lo {
                    return Ok(());
                }
                let len = hi - lo;
                let (xs, ws) = match kind {
                    Piece::Jacobi => (&self.radial.0, &self.radial.1),
                    Piece::Legendre => (&self.legendre.0, &self.legendre.1),
                };
                for (&x, &w0) in xs.iter().zip(ws) {
                    let (rho, w) = match kind {
                        Piece::Jacobi => (lo + len * x, w0 * pow(len, rho_exp + 1.0)),
                        Piece::Legendre => (lo + len * (x + 1.0) / 2.0, w0 * len / 2.0),
                    };
                    for k in 0..r {
                        t[k] = rho * dir[k];
                    }
                    let val = f(&t)?;
                    if val == 0.0 {
                        continue;
                    }
                    let div = if kind == Piece::Jacobi { pow(rho, rho_exp) } else { 1.0 };
                    *line += w * val * pow(rho, (r - 1) as f64) / div;
                }
                Ok(())
            };
            let (split, end) = match ext {
                Some(e) => (e / 2.0, e),
                None => (self.truncation.min(1.0), self.truncation),
            };
            radial_piece(0.0, split, Piece::Jacobi, &mut line)?;
            let step = (end - split) / self.panels as f64;
            for p in 0..self.panels {
                let lo = split + step * p as f64;
                let hi = if p + 1 == self.panels { end } else { lo + step };
                radial_piece(lo, hi, Piece::Legendre, &mut line)?;
            }
            if extracted > 0.0 {
                total += wa * line / extracted;
            }
            // advance the multi-index
            let mut k = 0;
            loop {
                if k == idx.len() {
                    return Ok(total);
                }
                idx[k] += 1;
                if idx[k] < self.nodes {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }

    /// Integral and the difference to a rule with about two thirds of the nodes.
    pub fn integrate_with_error<E, F>(&self, extent: E, mut f: F) -> Result<(f64, f64)>
    where
        E: Fn(&[f64]) -> Option<f64>,
        F: FnMut(&[f64]) -> Result<f64>,
    {
        let fine = self.integrate(&extent, &mut f)?;
        let coarse_n = (2 * self.nodes).div_ceil(3).max(2);
        let coarse = ChamberRule::new(self.rank, self.weights, coarse_n)?
            .with_truncation(self.truncation)
            .with_panels(self.panels)
            .integrate(&extent, &mut f)?;
        Ok((fine, (fine - coarse).abs()))
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Piece {
    Jacobi,
    Legendre,
}

#[inline]
fn pow(x: f64, e: f64) -> f64 {
    if e == 0.0 {
        1.0
    } else {
        libm::pow(x, e)
    }
}

/// Integration scheme of [`integrate_mu`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum QuadratureMode {
    /// Tensor Gauss-Jacobi in chamber coordinates.
    GaussJacobi,
    /// Nested adaptive tanh-sinh in the same coordinates (rank <= 2 in practice).
    Adaptive { tol: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureSpec {
    pub nodes: usize,
    /// Cutoff along rays when the integrand has no known extent.
    pub truncation: f64,
    /// Gauss-Legendre panels on the outer half of each ray.
    pub panels: usize,
    pub mode: QuadratureMode,
    /// Accept only results whose error estimate is below this relative level.
    pub tolerance: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec { nodes: 40, truncation: 12.0, panels: 1, mode: QuadratureMode::GaussJacobi, tolerance: 1e-6 }
    }
}

/// Result of an integration with its estimated error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

/// `int_{R^r} |SH(t)|^delta f(t) dmu(t)`, evaluating `f` in double-double.
///
/// Non-invariant `f` is symmetrized over the Weyl group; invariant `f`
/// contributes `|W|` copies of the chamber integral.
pub fn integrate_mu<F: JetFunction<Dd> + ?Sized>(
    rd: &RootData,
    f: &F,
    delta: f64,
    spec: &QuadratureSpec,
) -> Result<Estimate> {
    integrate_mu_with(rd, delta, spec, |t| f.ray_extent(t), |t| f.value(t), f.is_weyl_invariant())
}

/// [`integrate_mu`] for an arbitrary pointwise integrand.
pub fn integrate_mu_with<E, F>(
    rd: &RootData,
    delta: f64,
    spec: &QuadratureSpec,
    extent: E,
    mut f: F,
    invariant: bool,
) -> Result<Estimate>
where
    E: Fn(&[f64]) -> Option<f64>,
    F: FnMut(&[Dd]) -> Result<Dd>,
{
    let weights = ChamberWeights::radial(rd, delta);
    if !(weights.edge > -1.0) {
        return Err(Error::Divergent(alloc::format!(
            "delta + 2b + iota = {} must exceed -1",
            weights.edge
        )));
    }
    let ws = weyl_elements(rd.rank)?;
    let density = measure_density(rd);
    let order = ws.len() as f64;
    let ws_ref = &ws;
    let sym_extent = |dir: &[f64]| -> Option<f64> {
        if invariant {
            return extent(dir);
        }
        let mut best: f64 = 0.0;
        for w in ws_ref {
            best = best.max(extent(&w.act_vec(dir))?);
        }
        Some(best)
    };
    let mut integrand = |t: &[f64]| -> Result<f64> {
        let td: Vec<Dd> = t.iter().map(|&x| Dd::new(x)).collect();
        let mut s = Dd::ZERO;
        if invariant {
            s = f(&td)? * Dd::new(order);
        } else {
            for w in ws_ref {
                let wt: Vec<Dd> = w.act_vec(t).into_iter().map(Dd::new).collect();
                s += f(&wt)?;
            }
        }
        if s.hi == 0.0 {
            return Ok(0.0);
        }
        Ok((s * density.eval_weighted(&td, delta)).to_f64())
    };
    match spec.mode {
        QuadratureMode::GaussJacobi => {
            let rule = ChamberRule::new(rd.rank, weights, spec.nodes)?
                .with_truncation(spec.truncation)
                .with_panels(spec.panels);
            let (value, error) = rule.integrate_with_error(&sym_extent, &mut integrand)?;
            if error > spec.tolerance * value.abs().max(1e-300) && error > 1e-300 {
                return Err(Error::Quadrature(alloc::format!(
                    "error estimate {error:e} exceeds tolerance {:e} (value {value:e})",
                    spec.tolerance
                )));
            }
            Ok(Estimate { value, error })
        }
        QuadratureMode::Adaptive { tol } => {
            // a coarse tensor estimate fixes the absolute scale for the inner integrals
            let coarse = ChamberRule::new(rd.rank, weights, 16)?
                .with_truncation(spec.truncation)
                .integrate(&sym_extent, &mut integrand)?;
            let (value, error) =
                nested_tanh_sinh(rd.rank, &sym_extent, spec.truncation, tol, tol * coarse.abs(), &mut integrand)?;
            Ok(Estimate { value, error })
        }
    }
}

/// `int_chamber f dt` by nested tanh-sinh in chamber coordinates.
///
/// Inner integrals stop once their change drops below `abs_tol`.
pub fn nested_tanh_sinh<E, F>(
    rank: usize,
    extent: &E,
    truncation: f64,
    tol: f64,
    abs_tol: f64,
    f: &mut F,
) -> Result<(f64, f64)>
where
    E: Fn(&[f64]) -> Option<f64>,
    F: FnMut(&[f64]) -> Result<f64>,
{
    let mut dir = vec![1.0; rank];
    let mut err_total = 0.0;
    let v = nested_level(rank, 1, &mut dir, extent, truncation, (tol, abs_tol), f, &mut err_total)?;
    if !(err_total <= (1e2 * tol * v.abs()).max(abs_tol)) && v != 0.0 {
        return Err(Error::Quadrature(alloc::format!(
            "nested tanh-sinh stalled: change {err_total:e} at value {v:e}"
        )));
    }
    Ok((v, err_total))
}

#[allow(clippy::too_many_arguments)]
fn nested_level<E, F>(
    rank: usize,
    k: usize,
    dir: &mut Vec<f64>,
    extent: &E,
    truncation: f64,
    (tol, abs_tol): (f64, f64),
    f: &mut F,
    err: &mut f64,
) -> Result<f64>
where
    E: Fn(&[f64]) -> Option<f64>,
    F: FnMut(&[f64]) -> Result<f64>,
{
    if k == rank {
        let d = dir.clone();
        let mut t = vec![0.0; rank];
        let mut radial = |rho: f64| -> Result<f64> {
            for i in 0..rank {
                t[i] = rho * d[i];
            }
            Ok(f(&t)? * pow(rho, (rank - 1) as f64))
        };
        let (split, end) = match extent(&d) {
            Some(e) => (e / 2.0, e),
            None => (truncation.min(1.0), truncation),
        };
        let (v0, e0, _) = tanh_sinh_best(|rho, _, _| radial(rho), 0.0, split, tol, abs_tol)?;
        let (v1, e1) = gauss_kronrod_abs(&mut radial, split, end, tol, abs_tol)?;
        if k == 1 {
            *err = e0 + e1;
        }
        return Ok(v0 + v1);
    }
    let jac_exp = (rank - k - 1) as f64;
    let (v, e1, _) = tanh_sinh_best(
        |v, _, _| {
            dir[k] = dir[k - 1] * v;
            let inner_tol = ((tol * 1e-2).max(1e-15), abs_tol * 1e-2);
            let inner = nested_level(rank, k + 1, dir, extent, truncation, inner_tol, f, err)?;
            Ok(inner * pow(v, jac_exp))
        },
        0.0,
        1.0,
        tol,
        abs_tol,
    )?;
    if k == 1 {
        *err = e1;
    }
    Ok(v)
}

/// `x_j = sh^2 t_j` and its Jacobian `prod_j sh(2 t_j)`.
pub fn chamber_transform(t: &[f64]) -> (Vec<f64>, f64) {
    let x = t.iter().map(|&s| libm::sinh(s).powi(2)).collect();
    let jac = t.iter().map(|&s| libm::sinh(2.0 * s)).product();
    (x, jac)
}

/// Inverse of [`chamber_transform`] on the positive chamber.
pub fn chamber_transform_inverse(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| libm::asinh(libm::sqrt(v))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::{bump, Constant};

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(7);
        for k in 0..14 {
            let s: f64 = x.iter().zip(&w).map(|(&x, &w)| w * x.powi(k)).sum();
            let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
            assert!((s - exact).abs() < 1e-14, "k={k}");
        }
    }

    #[test]
    fn jacobi_moments_match_beta_function() {
        for &(p, q) in &[(0.0, 0.0), (-0.5, 0.5), (2.3, 1.0), (-0.9, 4.0), (7.5, 0.0)] {
            let (x, w) = gauss_jacobi01(12, p, q).unwrap();
            for k in 0..20 {
                let s: f64 = x.iter().zip(&w).map(|(&x, &w)| w * x.powi(k)).sum();
                let exact = gamma(p + k as f64 + 1.0).unwrap() * gamma(q + 1.0).unwrap()
                    / gamma(p + q + k as f64 + 2.0).unwrap();
                assert!(rel(s, exact) < 1e-12, "p={p} q={q} k={k}: {s} vs {exact}");
            }
        }
    }

    #[test]
    fn gauss_kronrod_bump() {
        let g = |x: f64| if x * x >= 1.21 { 0.0 } else { libm::exp(-1.0 / (1.0 - x * x / 1.21)) };
        let (v, _) = gauss_kronrod(|x| Ok(g(x)), 0.0, 1.1, 1e-14).unwrap();
        let (x, w) = gauss_legendre(200);
        let r: f64 = x.iter().zip(&w).map(|(&x, &w)| w * 0.55 * g(0.55 * (x + 1.0))).sum();
        assert!(rel(v, r) < 1e-13, "{v} vs {r}");
    }

    #[test]
    fn tanh_sinh_handles_endpoint_singularity() {
        let (v, _) = tanh_sinh(|x, da, _| Ok(libm::pow(da, -0.7) * libm::cos(x)), 0.0, 1.0, 1e-13).unwrap();
        // reference via Gauss-Jacobi
        let (x, w) = gauss_jacobi01(30, -0.7, 0.0).unwrap();
        let r: f64 = x.iter().zip(&w).map(|(&x, &w)| w * libm::cos(x)).sum();
        assert!(rel(v, r) < 1e-12);
    }

    #[test]
    fn one_dimensional_bump_matches_reference() {
        let rd = RootData::new(1, 0.0, 0.0, 0.0).unwrap();
        let f = bump(1, 1.3);
        let spec = QuadratureSpec { nodes: 60, ..Default::default() };
        let v = integrate_mu(&rd, &f, 0.0, &spec).unwrap().value;
        let (r, _) = tanh_sinh(|x, _, _| Ok(2.0 * f.eval_f64(&[x])), 0.0, 1.3, 1e-14).unwrap();
        assert!(rel(v, r) < 1e-10, "{v} vs {r}");
    }

    #[test]
    fn zero_integrand() {
        let rd = RootData::new(2, 1.0, 1.0, 1.0).unwrap();
        let z = Constant { rank: 2, value: 0.0 };
        let spec = QuadratureSpec::default();
        assert_eq!(integrate_mu(&rd, &z, 0.0, &spec).unwrap().value, 0.0);
    }

    #[test]
    fn separable_rank_two() {
        let rd = RootData::new(2, 0.0, 1.5, 0.5).unwrap();
        let g = |x: f64| libm::exp(-x * x);
        let spec = QuadratureSpec { nodes: 50, truncation: 7.0, ..Default::default() };
        let v = integrate_mu_with(
            &rd,
            0.0,
            &spec,
            |_| None,
            |t| Ok(Dd::new(g(t[0].to_f64()) * g(t[1].to_f64()))),
            true,
        )
        .unwrap()
        .value;
        let one = |x: f64| g(x) * libm::pow((2.0 * libm::sinh(x)).abs(), 1.5) * libm::pow((2.0 * libm::sinh(2.0 * x)).abs(), 0.5);
        let (i1, _) = tanh_sinh(|x, _, _| Ok(2.0 * one(x)), 0.0, 7.0, 1e-14).unwrap();
        assert!(rel(v, i1 * i1) < 1e-8, "{v} vs {}", i1 * i1);
    }

    #[test]
    fn symmetrized_equals_chamber_multiple() {
        let rd = RootData::new(2, 1.2, 0.8, 0.4).unwrap();
        let f = bump(2, 1.4).with_kappa(0.5);
        let spec = QuadratureSpec { nodes: 30, ..Default::default() };
        let inv = integrate_mu(&rd, &f, 0.3, &spec).unwrap().value;
        let sym = integrate_mu_with(&rd, 0.3, &spec, |d| JetFunction::<f64>::ray_extent(&f, d), |t| f.value(t), false).unwrap().value;
        assert!(rel(sym, inv) < 1e-10);
    }

    #[test]
    fn adaptive_and_gauss_jacobi_agree() {
        let rd = RootData::new(2, 2.0, 1.0, 1.0).unwrap();
        let f = bump(2, 1.1);
        let gj = integrate_mu(&rd, &f, -1.5, &QuadratureSpec { nodes: 40, ..Default::default() }).unwrap();
        let ad = integrate_mu(
            &rd,
            &f,
            -1.5,
            &QuadratureSpec { mode: QuadratureMode::Adaptive { tol: 1e-10 }, ..Default::default() },
        )
        .unwrap();
        assert!(rel(gj.value, ad.value) < 1e-8, "{} vs {}", gj.value, ad.value);
    }

    #[test]
    fn chamber_transform_examples() {
        let (x, _) = chamber_transform(&[libm::asinh(1.0)]);
        assert!((x[0] - 1.0).abs() < 1e-15);
        let (_, j) = chamber_transform(&[0.5]);
        assert!((j - libm::sinh(1.0)).abs() < 1e-15);
        let xs = [0.3, 2.5, 7.0];
        let (back, _) = chamber_transform(&chamber_transform_inverse(&xs));
        for (a, b) in back.iter().zip(&xs) {
            assert!(rel(*a, *b) < 1e-14);
        }
    }

    #[test]
    fn rejects_non_integrable_wall() {
        let rd = RootData::new(1, 0.0, 0.0, 0.0).unwrap();
        let f = bump(1, 1.0);
        assert!(matches!(integrate_mu(&rd, &f, -1.0, &QuadratureSpec::default()), Err(Error::Divergent(_))));
    }
}

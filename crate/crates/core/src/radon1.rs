//! Rank-one Radon machinery: spherical functions from the radial eigen-ODE,
//! the spherical transform of the `R^t R` kernel, and a direct geometric model
//! of real hyperbolic 3-space with its totally geodesic planes.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;
use crate::report::VerificationReport;
use crate::rootsys::{domain_params, DomainParams, RootData};
use crate::special::measure_density;

/// Start of the numerical integration; the power series is used below it.
pub const ODE_START: f64 = 1e-3;
/// Fixed RK4 step.
pub const ODE_STEP: f64 = 1e-4;

/// `phi_lambda`, the even solution of
/// `phi'' + (2b coth t + 2 iota coth 2t) phi' + (lambda^2 + rho^2) phi = 0`
/// with `phi(0) = 1`, tabulated on `[ODE_START, tmax]`.
#[derive(Clone, Debug)]
pub struct SphericalFunction {
    rd: RootData,
    lambda: f64,
    tmax: f64,
    phi: Vec<f64>,
    dphi: Vec<f64>,
}

/// Solve the radial eigen-ODE for `phi_lambda` up to `tmax`.
pub fn spherical(rd: &RootData, lambda: f64, tmax: f64) -> Result<SphericalFunction> {
    if rd.rank != 1 {
        return Err(Error::InvalidParameter("spherical functions are computed in rank one only".into()));
    }
    if !lambda.is_finite() || !(tmax > ODE_START) || !tmax.is_finite() {
        return Err(Error::InvalidParameter(format!("need finite lambda and tmax > {ODE_START}, got {lambda}, {tmax}")));
    }
    let mut sf = SphericalFunction { rd: *rd, lambda, tmax, phi: Vec::new(), dphi: Vec::new() };
    let steps = libm::ceil((tmax - ODE_START) / ODE_STEP) as usize;
    sf.phi.reserve(steps + 1);
    sf.dphi.reserve(steps + 1);
    let (mut y, mut dy) = sf.series(ODE_START);
    sf.phi.push(y);
    sf.dphi.push(dy);
    let h = ODE_STEP;
    for k in 0..steps {
        let t = ODE_START + k as f64 * h;
        let f = |t: f64, y: f64, dy: f64| sf.second(t, y, dy);
        let (k1y, k1d) = (dy, f(t, y, dy));
        let (k2y, k2d) = (dy + 0.5 * h * k1d, f(t + 0.5 * h, y + 0.5 * h * k1y, dy + 0.5 * h * k1d));
        let (k3y, k3d) = (dy + 0.5 * h * k2d, f(t + 0.5 * h, y + 0.5 * h * k2y, dy + 0.5 * h * k2d));
        let (k4y, k4d) = (dy + h * k3d, f(t + h, y + h * k3y, dy + h * k3d));
        y += h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
        dy += h / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d);
        if !y.is_finite() || !dy.is_finite() {
            return Err(Error::Ode(format!("non-finite solution at t = {}", t + h)));
        }
        sf.phi.push(y);
        sf.dphi.push(dy);
    }
    Ok(sf)
}

/// [`spherical`] for the rank-one ball of `dp`.
pub fn spherical_dp(dp: &DomainParams, lambda: f64, tmax: f64) -> Result<SphericalFunction> {
    spherical(&dp.root_data(), lambda, tmax)
}

impl SphericalFunction {
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn tmax(&self) -> f64 {
        self.tmax
    }

    fn rho(&self) -> f64 {
        self.rd.rho_j(1)
    }

    fn eigenvalue(&self) -> f64 {
        self.lambda * self.lambda + self.rho() * self.rho()
    }

    /// `2b coth t + 2 iota coth 2t`.
    fn drift(&self, t: f64) -> f64 {
        let mut c = 0.0;
        if self.rd.two_b != 0.0 {
            c += self.rd.two_b / libm::tanh(t);
        }
        if self.rd.iota != 0.0 {
            c += 2.0 * self.rd.iota / libm::tanh(2.0 * t);
        }
        c
    }

    fn second(&self, t: f64, y: f64, dy: f64) -> f64 {
        -self.drift(t) * dy - self.eigenvalue() * y
    }

    /// Power series in `z = -sh^2 t`: `phi = 2F1((rho + i lambda)/2, (rho - i lambda)/2; alpha + 1; z)`,
    /// `alpha = (iota + 2b - 1)/2`. Real coefficients; used for `t <= ODE_START`.
    fn series(&self, t: f64) -> (f64, f64) {
        let rho = self.rho();
        let c = (self.rd.iota + self.rd.two_b - 1.0) / 2.0 + 1.0;
        let q = self.eigenvalue() / 4.0;
        let sh = libm::sinh(t);
        let z = -sh * sh;
        let (mut val, mut der) = (1.0, 0.0);
        let mut coef = 1.0;
        let mut zk = 1.0; // z^k
        for k in 0..60 {
            let kf = k as f64;
            coef *= (kf * kf + rho * kf + q) / ((c + kf) * (kf + 1.0));
            der += coef * (kf + 1.0) * zk;
            zk *= z;
            let term = coef * zk;
            val += term;
            if term.abs() < 1e-18 * val.abs() && k > 2 {
                break;
            }
        }
        (val, -libm::sinh(2.0 * t) * der)
    }

    /// `(phi, phi', phi'')` at `t`; `phi` is even in `t`.
    pub fn eval(&self, t: f64) -> Result<(f64, f64, f64)> {
        let s = t.abs();
        let sign = if t < 0.0 { -1.0 } else { 1.0 };
        if s > self.tmax + 1e-12 {
            return Err(Error::Domain(format!("t = {t} beyond the tabulated range {}", self.tmax)));
        }
        if s <= ODE_START {
            let (y, dy) = self.series(s);
            let d2 = if s == 0.0 {
                -self.eigenvalue() / (1.0 + self.rd.two_b + self.rd.iota)
            } else {
                self.second(s, y, dy)
            };
            return Ok((y, sign * dy, d2));
        }
        let x = (s - ODE_START) / ODE_STEP;
        let k = (libm::floor(x) as usize).min(self.phi.len() - 2);
        let u = x - k as f64;
        let h = ODE_STEP;
        let (t0, t1) = (ODE_START + k as f64 * h, ODE_START + (k + 1) as f64 * h);
        let (y0, y1) = (self.phi[k], self.phi[k + 1]);
        let (d0, d1) = (self.dphi[k], self.dphi[k + 1]);
        let (s0, s1) = (self.second(t0, y0, d0), self.second(t1, y1, d1));
        let (y, dy, d2) = quintic_hermite(u, h, [y0, d0, s0], [y1, d1, s1]);
        Ok((y, sign * dy, d2))
    }

    pub fn value(&self, t: f64) -> Result<f64> {
        Ok(self.eval(t)?.0)
    }

    /// Largest relative residual of the eigen-equation evaluated on the
    /// interpolant at step midpoints in `[t_lo, tmax]`, relative to
    /// `|phi''| + |drift phi'| + (lambda^2 + rho^2)|phi|`.
    pub fn eigen_residual(&self, t_lo: f64) -> Result<f64> {
        let mut worst: f64 = 0.0;
        let start = libm::ceil((t_lo.max(ODE_START) - ODE_START) / ODE_STEP) as usize;
        let stride = 7;
        let mut k = start;
        while k + 1 < self.phi.len() {
            let t = ODE_START + (k as f64 + 0.5) * ODE_STEP;
            let (y, dy, d2) = self.eval(t)?;
            let drift = self.drift(t) * dy;
            let lam = self.eigenvalue() * y;
            let res = (d2 + drift + lam).abs();
            let scale = d2.abs() + drift.abs() + lam.abs();
            if scale > 0.0 {
                worst = worst.max(res / scale);
            }
            k += stride;
        }
        Ok(worst)
    }
}

/// Quintic Hermite interpolation on `[0, h]` at `u h`, returning value and
/// first two derivatives.
fn quintic_hermite(u: f64, h: f64, a: [f64; 3], b: [f64; 3]) -> (f64, f64, f64) {
    let (p0, m0, c0) = (a[0], a[1] * h, a[2] * h * h);
    let (p1, m1, c1) = (b[0], b[1] * h, b[2] * h * h);
    let (u2, u3, u4, u5) = (u * u, u * u * u, u * u * u * u, u * u * u * u * u);
    let h0 = 1.0 - 10.0 * u3 + 15.0 * u4 - 6.0 * u5;
    let h1 = u - 6.0 * u3 + 8.0 * u4 - 3.0 * u5;
    let h2 = 0.5 * u2 - 1.5 * u3 + 1.5 * u4 - 0.5 * u5;
    let h3 = 0.5 * u3 - u4 + 0.5 * u5;
    let h4 = -4.0 * u3 + 7.0 * u4 - 3.0 * u5;
    let h5 = 10.0 * u3 - 15.0 * u4 + 6.0 * u5;
    let v = h0 * p0 + h1 * m0 + h2 * c0 + h3 * c1 + h4 * m1 + h5 * p1;
    let dh0 = -30.0 * u2 + 60.0 * u3 - 30.0 * u4;
    let dh1 = 1.0 - 18.0 * u2 + 32.0 * u3 - 15.0 * u4;
    let dh2 = u - 4.5 * u2 + 6.0 * u3 - 2.5 * u4;
    let dh3 = 1.5 * u2 - 4.0 * u3 + 2.5 * u4;
    let dh4 = -12.0 * u2 + 28.0 * u3 - 15.0 * u4;
    let dh5 = 30.0 * u2 - 60.0 * u3 + 30.0 * u4;
    let d = (dh0 * p0 + dh1 * m0 + dh2 * c0 + dh3 * c1 + dh4 * m1 + dh5 * p1) / h;
    let ddh0 = -60.0 * u + 180.0 * u2 - 120.0 * u3;
    let ddh1 = -36.0 * u + 96.0 * u2 - 60.0 * u3;
    let ddh2 = 1.0 - 9.0 * u + 18.0 * u2 - 10.0 * u3;
    let ddh3 = 3.0 * u - 12.0 * u2 + 10.0 * u3;
    let ddh4 = -24.0 * u + 84.0 * u2 - 60.0 * u3;
    let ddh5 = 60.0 * u - 180.0 * u2 + 120.0 * u3;
    let dd = (ddh0 * p0 + ddh1 * m0 + ddh2 * c0 + ddh3 * c1 + ddh4 * m1 + ddh5 * p1) / (h * h);
    (v, d, dd)
}

/// `phi_lambda(t)` on the hyperbolic plane (`2b = 1`, `iota = 0`) from
/// `(1/pi) int_0^pi (ch t - sh t cos theta)^(i lambda - 1/2) d theta`
/// by the trapezoidal rule, which converges geometrically for this periodic integrand.
pub fn spherical_h2_integral(lambda: f64, t: f64, nodes: usize) -> f64 {
    let (c, s) = (libm::cosh(t), libm::sinh(t));
    let n = nodes.max(8);
    let mut acc = 0.0;
    for k in 0..n {
        let theta = (k as f64 + 0.5) * PI / n as f64;
        let base = c - s * libm::cos(theta);
        acc += libm::cos(lambda * libm::log(base)) / libm::sqrt(base);
    }
    acc / n as f64
}

/// Spherical transform of the `R^t R` kernel, without and with the
/// `2^delta0` prefactor of the kernel formula.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelHat {
    pub plain: f64,
    pub prefactored: f64,
}

/// `int_R |sh t|^delta0 phi_lambda(t) dmu(t)` (and `2^delta0` times it).
pub fn kernel_hat(dp: &DomainParams, lambda: f64) -> Result<KernelHat> {
    let rd = check_rank_one(dp)?;
    let rate = dp.delta0 + rd.rho_j(1);
    if !(rate < 0.0) {
        return Err(Error::Divergent(format!(
            "kernel transform needs delta0 + rho < 0, got delta0 + rho = {rate}"
        )));
    }
    // integrand ~ exp((delta0 + rho) t)
    let tmax = (38.0 / -rate).min(80.0);
    let phi = spherical(&rd, lambda, tmax)?;
    let dens = measure_density(&rd);
    let (x, w) = gauss_legendre(24);
    let panel = 0.25;
    let panels = libm::ceil(tmax / panel) as usize;
    let mut acc = 0.0;
    for p in 0..panels {
        let (a, b) = (p as f64 * panel, ((p + 1) as f64 * panel).min(tmax));
        let (mid, half) = ((a + b) / 2.0, (b - a) / 2.0);
        for (xi, wi) in x.iter().zip(&w) {
            let t = mid + half * xi;
            acc += wi * half * dens.eval_weighted(&[t], dp.delta0) * phi.value(t)?;
        }
    }
    let plain = 2.0 * acc;
    Ok(KernelHat { plain, prefactored: libm::exp2(dp.delta0) * plain })
}

fn check_rank_one(dp: &DomainParams) -> Result<RootData> {
    if dp.r != 1 {
        return Err(Error::InvalidParameter(format!("rank-one parameters required, got r = {}", dp.r)));
    }
    Ok(dp.root_data())
}

/// `prod_j (-(lambda^2 + rho^2) + lambda_j)`, the symbol of `prod_j (L + lambda_j)`.
pub fn helmholtz_symbol(dp: &DomainParams, lambda: f64) -> f64 {
    let rho = dp.rho[0];
    dp.lambdas.iter().map(|lj| lj - (lambda * lambda + rho * rho)).product()
}

/// Kernel transform times the symbol of the inversion operator; constant in `lambda`.
pub fn inversion_symbol(dp: &DomainParams, lambda: f64) -> Result<KernelHat> {
    let k = kernel_hat(dp, lambda)?;
    let s = helmholtz_symbol(dp, lambda);
    Ok(KernelHat { plain: k.plain * s, prefactored: k.prefactored * s })
}

/// Constancy of [`inversion_symbol`] over `lambdas`.
///
/// Records each value's deviation from the mean (coefficient-of-variation
/// style, tolerance `1e-4`) and the closed-form candidates next to the mean.
pub fn verify_inversion_spectral(dp: &DomainParams, lambdas: &[f64]) -> Result<VerificationReport> {
    if lambdas.is_empty() {
        return Err(Error::InvalidParameter("need at least one spectral parameter".into()));
    }
    let mut rep = VerificationReport::new("inversion-spectral", 1e-4)
        .param("a", dp.a as f64)
        .param("n", dp.n as f64)
        .param("rprime", dp.r_prime as f64);
    let vals: Vec<KernelHat> = lambdas.iter().map(|&l| inversion_symbol(dp, l)).collect::<Result<_>>()?;
    let mean = vals.iter().map(|v| v.plain).sum::<f64>() / vals.len() as f64;
    let var = vals.iter().map(|v| (v.plain - mean) * (v.plain - mean)).sum::<f64>() / vals.len() as f64;
    for (l, v) in lambdas.iter().zip(&vals) {
        rep.constant(&format!("symbol[lambda={l}]"), v.plain);
        rep.record((v.plain - mean).abs(), mean.abs());
    }
    rep.constant("c_spectral", mean);
    rep.constant("c_spectral_prefactored", dp.constants.radon_prefactor * mean);
    rep.constant("c_measured", dp.constants.radon_prefactor * mean);
    rep.constant("coefficient_of_variation", libm::sqrt(var) / mean.abs());
    for c in dp.constants.candidates() {
        rep.constant(&format!("candidate:{}", c.name), c.value);
    }
    Ok(rep)
}

// ---------------------------------------------------------------------------
// Hyperboloid model of H^3.

/// Lorentz product `x1 y1 + x2 y2 + x3 y3 - x0 y0`, time coordinate last.
pub fn minkowski(x: &[f64; 4], y: &[f64; 4]) -> f64 {
    x[0] * y[0] + x[1] * y[1] + x[2] * y[2] - x[3] * y[3]
}

/// A point of `{x : <x, x> = -1, x_0 > 0}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HyperbolicPoint {
    pub x: [f64; 4],
}

impl HyperbolicPoint {
    pub fn origin() -> Self {
        HyperbolicPoint { x: [0.0, 0.0, 0.0, 1.0] }
    }

    /// The point at distance `s` from the origin in the unit direction `dir`.
    pub fn from_polar(s: f64, dir: [f64; 3]) -> Result<Self> {
        let n = libm::sqrt(dir.iter().map(|v| v * v).sum::<f64>());
        if !(n > 0.0) {
            return Err(Error::InvalidParameter("direction must be nonzero".into()));
        }
        let sh = libm::sinh(s) / n;
        Ok(HyperbolicPoint { x: [sh * dir[0], sh * dir[1], sh * dir[2], libm::cosh(s)] })
    }

    /// `ch d(p, q) = -<p, q>`.
    pub fn distance(&self, other: &HyperbolicPoint) -> f64 {
        libm::acosh((-minkowski(&self.x, &other.x)).max(1.0))
    }

    /// Orthonormal tangent frame at the point: the radial direction first
    /// (or `e_3` at the origin), then two spatial vectors.
    fn frame(&self) -> [[f64; 4]; 3] {
        let sp = [self.x[0], self.x[1], self.x[2]];
        let sh = libm::sqrt(sp.iter().map(|v| v * v).sum::<f64>());
        let omega = if sh > 0.0 { [sp[0] / sh, sp[1] / sh, sp[2] / sh] } else { [0.0, 0.0, 1.0] };
        let ch = self.x[3];
        let radial = [ch * omega[0], ch * omega[1], ch * omega[2], sh];
        let (u, v) = orthonormal_complement(omega);
        [radial, [u[0], u[1], u[2], 0.0], [v[0], v[1], v[2], 0.0]]
    }
}

fn orthonormal_complement(w: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let pick = if w[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let d = pick[0] * w[0] + pick[1] * w[1] + pick[2] * w[2];
    let mut u = [pick[0] - d * w[0], pick[1] - d * w[1], pick[2] - d * w[2]];
    let nu = libm::sqrt(u.iter().map(|v| v * v).sum::<f64>());
    u.iter_mut().for_each(|v| *v /= nu);
    let v = [w[1] * u[2] - w[2] * u[1], w[2] * u[0] - w[0] * u[2], w[0] * u[1] - w[1] * u[0]];
    (u, v)
}

/// A totally geodesic plane `{x : <x, n> = 0}` with spacelike unit normal `n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Plane {
    pub normal: [f64; 4],
}

impl Plane {
    pub fn from_normal(n: [f64; 4]) -> Result<Self> {
        let q = minkowski(&n, &n);
        if !(q > 0.0) {
            return Err(Error::InvalidParameter("plane normal must be spacelike".into()));
        }
        let s = libm::sqrt(q);
        Ok(Plane { normal: [n[0] / s, n[1] / s, n[2] / s, n[3] / s] })
    }

    /// The plane orthogonal to the unit spatial direction `dir` at distance `h` from the origin.
    pub fn at_distance(h: f64, dir: [f64; 3]) -> Result<Self> {
        let n = libm::sqrt(dir.iter().map(|v| v * v).sum::<f64>());
        if !(n > 0.0) {
            return Err(Error::InvalidParameter("direction must be nonzero".into()));
        }
        let c = libm::cosh(h) / n;
        Plane::from_normal([c * dir[0], c * dir[1], c * dir[2], libm::sinh(h)])
    }

    /// Distance from `x`: `sh d = |<x, n>|`.
    pub fn distance_from(&self, x: &HyperbolicPoint) -> f64 {
        libm::asinh(minkowski(&x.x, &self.normal).abs())
    }

    /// Nearest point to the origin and an orthonormal tangent frame of the plane there.
    fn fermi_frame(&self) -> ([f64; 4], [f64; 4], [f64; 4]) {
        let n = self.normal;
        let sp = [n[0], n[1], n[2]];
        let norm = libm::sqrt(sp.iter().map(|v| v * v).sum::<f64>());
        let omega = [sp[0] / norm, sp[1] / norm, sp[2] / norm];
        // n = (ch h omega, sh h) up to sign; the foot point is (sh h omega, ch h)... with sign of n_0
        let sh_h = n[3];
        let ch_h = norm;
        let c = [sh_h * omega[0], sh_h * omega[1], sh_h * omega[2], ch_h];
        let (u, v) = orthonormal_complement(omega);
        (c, [u[0], u[1], u[2], 0.0], [v[0], v[1], v[2], 0.0])
    }
}

/// Radial profile `f(d(o, x))` of a compactly supported function on `H^3`.
pub trait RadialProfile: Sync {
    fn value(&self, d: f64) -> f64;
    /// `f(d) = 0` for `d >= support()`.
    fn support(&self) -> f64;
}

/// `A exp(-1/(1 - d^2/R^2))` for `d < R`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialBump {
    pub radius: f64,
    pub amplitude: f64,
}

impl RadialProfile for RadialBump {
    fn value(&self, d: f64) -> f64 {
        let q = d / self.radius;
        let s = q * q;
        if s >= 1.0 {
            0.0
        } else {
            self.amplitude * libm::exp(-1.0 / (1.0 - s))
        }
    }
    fn support(&self) -> f64 {
        self.radius
    }
}

fn check_support<P: RadialProfile + ?Sized>(f: &P) -> Result<f64> {
    let s = f.support();
    if !(s.is_finite() && s > 0.0) || s > 20.0 {
        return Err(Error::InvalidParameter(format!("profile support {s} outside (0, 20]")));
    }
    Ok(s)
}

fn gl_panels<F: FnMut(f64) -> f64>(a: f64, b: f64, panels: usize, nodes: usize, mut f: F) -> f64 {
    if !(b > a) {
        return 0.0;
    }
    let (x, w) = gauss_legendre(nodes);
    let width = (b - a) / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * width;
        let (mid, half) = (lo + width / 2.0, width / 2.0);
        for (xi, wi) in x.iter().zip(&w) {
            acc += wi * half * f(mid + half * xi);
        }
    }
    acc
}

/// `int_y f dA` in geodesic polar coordinates about the foot point:
/// `2 pi int_0^inf f(arcch(ch h ch s)) sh s ds`.
pub fn radon_plane<P: RadialProfile + ?Sized>(f: &P, plane: &Plane) -> Result<f64> {
    let big = check_support(f)?;
    let h = plane.distance_from(&HyperbolicPoint::origin());
    if h >= big {
        return Ok(0.0);
    }
    let ch_h = libm::cosh(h);
    let top = libm::acosh(libm::cosh(big) / ch_h);
    let v = gl_panels(0.0, top, 4, 32, |s| {
        f.value(libm::acosh((ch_h * libm::cosh(s)).max(1.0))) * libm::sinh(s)
    });
    Ok(2.0 * PI * v)
}

/// `int_y f dA` on a tensor mesh in Fermi coordinates `(u, v)` of the plane,
/// `p = ch u ch v c + sh u e_1 + ch u sh v e_2`, area element `ch u du dv`,
/// with `f` evaluated at the explicit hyperboloid points.
pub fn radon_plane_mesh<P: RadialProfile + ?Sized>(f: &P, plane: &Plane, panels: usize) -> Result<f64> {
    let big = check_support(f)?;
    let (c, e1, e2) = plane.fermi_frame();
    let o = HyperbolicPoint::origin();
    let h = plane.distance_from(&o);
    if h >= big {
        return Ok(0.0);
    }
    let lim = libm::acosh(libm::cosh(big) / libm::cosh(h));
    let v = gl_panels(-lim, lim, panels, 24, |u| {
        let (chu, shu) = (libm::cosh(u), libm::sinh(u));
        chu * gl_panels(-lim, lim, panels, 24, |v| {
            let (chv, shv) = (libm::cosh(v), libm::sinh(v));
            let mut p = [0.0; 4];
            for i in 0..4 {
                p[i] = chu * chv * c[i] + shu * e1[i] + chu * shv * e2[i];
            }
            f.value(HyperbolicPoint { x: p }.distance(&o))
        })
    });
    Ok(v)
}

/// Average of `F` over the planes through `x`: the plane with unit tangent
/// normal `nu` at `x`, `nu` uniform on the unit sphere (Gauss-Legendre in the
/// polar cosine, trapezoidal in the azimuth).
pub fn dual_radon_geometric<F: FnMut(&Plane) -> Result<f64>>(mut big_f: F, x: &HyperbolicPoint, nodes: usize) -> Result<f64> {
    let [radial, e1, e2] = x.frame();
    let (cs, ws) = gauss_legendre(nodes.max(2));
    let az = (2 * nodes).max(4);
    let mut acc = 0.0;
    for (c, w) in cs.iter().zip(&ws) {
        let s = libm::sqrt((1.0 - c * c).max(0.0));
        let mut ring = 0.0;
        for k in 0..az {
            let beta = 2.0 * PI * (k as f64 + 0.5) / az as f64;
            let (cb, sb) = (libm::cos(beta), libm::sin(beta));
            let mut n = [0.0; 4];
            for i in 0..4 {
                n[i] = c * radial[i] + s * (cb * e1[i] + sb * e2[i]);
            }
            ring += big_f(&Plane::from_normal(n)?)?;
        }
        acc += w * ring / az as f64;
    }
    Ok(acc / 2.0)
}

/// Parameters `(a, n, r, r') = (1, 4, 1, 3)`: `H^3` with its planes.
pub fn h3_planes() -> DomainParams {
    domain_params(1, 4, 1, 3).expect("valid parameters")
}

/// Normalization of the plane measure: `dmu_y = (2/pi) dA`. The radial
/// density `|2 sh t|` of the plane, integrated over `t in R`, gives
/// `4 int_0^inf f sh`, while polar coordinates give `2 pi int_0^inf f sh`.
pub const PLANE_MEASURE: f64 = 2.0 / PI;

/// `R^t R f(x)` by composing [`radon_plane`] with [`dual_radon_geometric`].
pub fn rtr_geometric<P: RadialProfile + ?Sized>(f: &P, x: &HyperbolicPoint, nodes: usize) -> Result<f64> {
    Ok(PLANE_MEASURE * dual_radon_geometric(|p| radon_plane(f, p), x, nodes)?)
}

/// `2^delta0 int_R |sh t|^delta0 f(|t|) dmu(t)`: the kernel formula for `R^t R f(o)`.
pub fn rtr_kernel_origin<P: RadialProfile + ?Sized>(f: &P) -> Result<f64> {
    let big = check_support(f)?;
    let dp = h3_planes();
    let dens = measure_density(&dp.root_data());
    let v = gl_panels(0.0, big, 8, 32, |t| dens.eval_weighted(&[t], dp.delta0) * f.value(t));
    Ok(libm::exp2(dp.delta0) * 2.0 * v)
}

/// `G(w) = int_0^w f(v) sh v dv`.
fn cumulative<P: RadialProfile + ?Sized>(f: &P, w: f64) -> f64 {
    let top = w.min(f.support());
    gl_panels(0.0, top, 2, 32, |v| f.value(v) * libm::sinh(v))
}

/// `R^t R f(x)` at `d(o, x) = s` through the convolution reduction
/// `(2 / sh s) int_0^inf [G(s + u) - G(|s - u|)] du`, and `4 G(inf)` at `s = 0`.
pub fn rtr_convolution<P: RadialProfile + ?Sized>(f: &P, s: f64) -> Result<f64> {
    let big = check_support(f)?;
    let s = s.abs();
    if s == 0.0 {
        return Ok(4.0 * cumulative(f, big));
    }
    let mut cuts = vec![0.0, s, (big - s).abs(), big + s];
    cuts.sort_by(|a, b| a.total_cmp(b));
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    let mut acc = 0.0;
    for w in cuts.windows(2) {
        acc += gl_panels(w[0], w[1], 2, 24, |u| cumulative(f, s + u) - cumulative(f, (s - u).abs()));
    }
    Ok(2.0 * acc / libm::sinh(s))
}

const D1: [f64; 5] = [0.0, 4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];
const D2: [f64; 5] = [-205.0 / 72.0, 8.0 / 5.0, -1.0 / 5.0, 8.0 / 315.0, -1.0 / 560.0];

/// `(L + lambda_1) g` on the uniform grid `s_i = i h`, eighth-order central
/// differences with even reflection at `0`; returns values for `i <= g.len() - 5`.
pub fn apply_radial_inversion(rd: &RootData, shift: f64, g: &[f64], h: f64) -> Vec<f64> {
    let at = |i: isize| g[i.unsigned_abs()];
    let n = g.len().saturating_sub(4);
    let mut out = Vec::with_capacity(n);
    for i in 0..n as isize {
        let mut d2 = D2[0] * at(i);
        let mut d1 = 0.0;
        for k in 1..5 {
            d2 += D2[k] * (at(i + k as isize) + at(i - k as isize));
            d1 += D1[k] * (at(i + k as isize) - at(i - k as isize));
        }
        d2 /= h * h;
        d1 /= h;
        let lap = if i == 0 {
            (1.0 + rd.two_b + rd.iota) * d2
        } else {
            let s = i as f64 * h;
            d2 + (rd.two_b / libm::tanh(s) + 2.0 * rd.iota / libm::tanh(2.0 * s)) * d1
        };
        out.push(lap + shift * at(i));
    }
    out
}

/// Outcome of the geometric inversion check on `H^3`.
#[derive(Clone, Debug)]
pub struct GeometricInversion {
    pub report: VerificationReport,
    /// Grid `s_i`, `R^t R f(s_i)`, `M R^t R f(s_i)` and `f(s_i)`.
    pub grid: Vec<f64>,
    pub rtr: Vec<f64>,
    pub m_rtr: Vec<f64>,
    pub f: Vec<f64>,
}

/// `M R^t R f = c f` for a radial bump on `H^3`, `M = L + lambda_1`.
///
/// The grid covers `[0, R]` with `points` nodes; the ratio `M R^t R f / f` is
/// compared with its value at the origin on the core `s <= 0.75 R`. A second
/// pass on every other node gives a Richardson-style error estimate.
pub fn verify_inversion_geometric<P: RadialProfile + ?Sized>(f: &P, points: usize) -> Result<GeometricInversion> {
    let big = check_support(f)?;
    if points < 40 {
        return Err(Error::InvalidParameter(format!("grid too coarse: {points} points, need at least 40")));
    }
    let dp = h3_planes();
    let rd = dp.root_data();
    let shift = dp.lambdas[0];
    let h = big / points as f64;
    let total = points + 9;
    let grid: Vec<f64> = (0..total).map(|i| i as f64 * h).collect();
    let rtr: Vec<f64> = grid.iter().map(|&s| rtr_convolution(f, s)).collect::<Result<_>>()?;
    let m_rtr = apply_radial_inversion(&rd, shift, &rtr, h);
    let coarse_g: Vec<f64> = rtr.iter().step_by(2).copied().collect();
    let m_coarse = apply_radial_inversion(&rd, shift, &coarse_g, 2.0 * h);
    let fv: Vec<f64> = grid.iter().map(|&s| f.value(s)).collect();

    let c = m_rtr[0] / fv[0];
    let mut rep = VerificationReport::new("inversion-geometric", 1e-2)
        .param("a", 1.0)
        .param("n", 4.0)
        .param("rprime", 3.0)
        .param("support", big)
        .param("points", points as f64);
    let core = 0.75 * big;
    let mut richardson: f64 = 0.0;
    for (i, &s) in grid.iter().enumerate().take(m_rtr.len()) {
        if s > core {
            break;
        }
        rep.record((m_rtr[i] / fv[i] - c).abs(), c.abs());
        if i % 2 == 0 && i / 2 < m_coarse.len() {
            richardson = richardson.max((m_rtr[i] - m_coarse[i / 2]).abs() / (c * fv[i]).abs());
        }
    }
    rep.constant("c_measured", c);
    rep.constant("richardson_estimate", richardson);
    rep.constant("candidate:2^(delta0) c1", dp.constants.radon_prefactor * dp.constants.c1);
    rep.constant("candidate:c1", dp.constants.c1);
    Ok(GeometricInversion { report: rep, grid, rtr, m_rtr, f: fv })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn flat_degenerate_is_cosine() {
        let rd = RootData::new(1, 0.0, 0.0, 0.0).unwrap();
        let phi = spherical(&rd, 2.5, 4.0).unwrap();
        for t in [0.0, 1e-4, 0.3, 1.7, 3.9] {
            assert!((phi.value(t).unwrap() - libm::cos(2.5 * t)).abs() < 1e-8);
        }
    }

    #[test]
    fn normalization_and_evenness() {
        let rd = RootData::new(1, 2.0, 6.0, 1.0).unwrap();
        let p = spherical(&rd, 1.0, 3.0).unwrap();
        let m = spherical(&rd, -1.0, 3.0).unwrap();
        assert_eq!(p.value(0.0).unwrap(), 1.0);
        assert_eq!(p.eval(0.0).unwrap().1, 0.0);
        for t in [0.2, 1.1, 2.9] {
            assert_eq!(p.value(t).unwrap(), m.value(t).unwrap());
            assert_eq!(p.value(-t).unwrap(), p.value(t).unwrap());
        }
        assert!(p.value(3.5).is_err());
    }

    #[test]
    fn eigen_residual_small() {
        for (a, n) in [(2.0, 5.0), (4.0, 4.0), (1.0, 3.0)] {
            let rd = RootData::new(1, a, a * (n - 2.0), a - 1.0).unwrap();
            for lam in [0.0, 0.5, 1.0, 2.0, 5.0, 10.0] {
                let phi = spherical(&rd, lam, 3.0).unwrap();
                let r = phi.eigen_residual(0.01).unwrap();
                assert!(r < 1e-8, "a={a} n={n} lambda={lam}: {r:e}");
            }
        }
    }

    #[test]
    fn h2_integral_representation() {
        let rd = RootData::new(1, 1.0, 1.0, 0.0).unwrap();
        for lam in [0.0, 0.7, 3.0] {
            let phi = spherical(&rd, lam, 4.0).unwrap();
            for t in [0.0005, 0.4, 1.5, 3.8] {
                let a = phi.value(t).unwrap();
                let b = spherical_h2_integral(lam, t, 4000);
                assert!(rel(a, b) < 1e-6, "lambda={lam} t={t}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn kernel_convergence_rules() {
        let dp = domain_params(2, 5, 1, 2).unwrap();
        let k = kernel_hat(&dp, 1.0).unwrap();
        assert!(k.plain > 0.0 && k.plain.is_finite());
        assert!(rel(k.plain, kernel_hat(&dp, -1.0).unwrap().plain) < 1e-10);
        assert!(matches!(kernel_hat(&h3_planes(), 1.0), Err(Error::Divergent(_))));
    }

    #[test]
    fn symbol_is_constant() {
        for (a, n, rp) in [(2, 5, 2), (4, 4, 2)] {
            let dp = domain_params(a, n, 1, rp).unwrap();
            let rep = verify_inversion_spectral(&dp, &[0.5, 1.0, 2.0, 5.0]).unwrap();
            assert!(rep.pass, "{rep:?}");
        }
    }

    #[test]
    fn plane_geometry() {
        let f = RadialBump { radius: 1.2, amplitude: 1.0 };
        let through = Plane::at_distance(0.0, [0.0, 0.0, 1.0]).unwrap();
        let direct = 2.0 * PI * gl_panels(0.0, 1.2, 8, 32, |s| f.value(s) * libm::sinh(s));
        assert!(rel(radon_plane(&f, &through).unwrap(), direct) < 1e-12);
        let zero = RadialBump { radius: 1.2, amplitude: 0.0 };
        assert_eq!(radon_plane(&zero, &through).unwrap(), 0.0);
        let far = Plane::at_distance(0.5, [1.0, 2.0, -0.5]).unwrap();
        assert!((far.distance_from(&HyperbolicPoint::origin()) - 0.5).abs() < 1e-14);
        let a = radon_plane(&f, &far).unwrap();
        let b = radon_plane_mesh(&f, &far, 6).unwrap();
        assert!(rel(b, a) < 1e-5, "{a} vs {b}");
        // same plane from a rescaled, sign-flipped normal
        let n = far.normal;
        let again = Plane::from_normal([-3.0 * n[0], -3.0 * n[1], -3.0 * n[2], -3.0 * n[3]]).unwrap();
        assert!(rel(radon_plane(&f, &again).unwrap(), a) < 1e-10);
    }

    #[test]
    fn dual_transform_basics() {
        let x = HyperbolicPoint::from_polar(0.8, [0.3, -0.2, 0.9]).unwrap();
        assert!(rel(dual_radon_geometric(|_| Ok(1.0), &x, 12).unwrap(), 1.0) < 1e-14);
        let o = HyperbolicPoint::origin();
        let d = dual_radon_geometric(|p| Ok(p.distance_from(&o)), &o, 12).unwrap();
        assert!(d.abs() < 1e-14);
        // every plane produced contains x
        dual_radon_geometric(
            |p| {
                assert!(p.distance_from(&x) < 1e-12);
                Ok(0.0)
            },
            &x,
            6,
        )
        .unwrap();
    }

    #[test]
    fn rtr_routes_agree() {
        let f = RadialBump { radius: 1.2, amplitude: 1.0 };
        let o = HyperbolicPoint::origin();
        let k = rtr_kernel_origin(&f).unwrap();
        assert!(rel(rtr_geometric(&f, &o, 8).unwrap(), k) < 1e-10);
        let c0 = rtr_convolution(&f, 0.0).unwrap();
        assert!(rel(c0, k) < 1e-10, "{c0} vs {k}");
        let x = HyperbolicPoint::from_polar(0.5, [1.0, 1.0, 0.0]).unwrap();
        let geo = rtr_geometric(&f, &x, 96).unwrap();
        let conv = rtr_convolution(&f, 0.5).unwrap();
        assert!(rel(geo, conv) < 1e-6, "{geo} vs {conv}");
    }
}

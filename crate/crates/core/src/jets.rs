//! Truncated multivariate Taylor arithmetic and the function objects built on it.
//!
//! A [`Jet`] holds the Taylor coefficients `c_alpha` of a scalar in the
//! perturbation `h` of a base point, `f(t + h) = sum c_alpha h^alpha`, for all
//! `|alpha| <= order`. Elementary functions are applied by composing their
//! univariate Taylor series with the nilpotent part of the argument.

use alloc::boxed::Box;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::real::Real;
use crate::rootsys::{GroupElement, MAX_RANK};

/// Hard cap on derivative order.
pub const MAX_ORDER: usize = 12;

pub type MultiIndex = [u8; MAX_RANK];

/// Monomial layout for a given number of variables and truncation order.
#[derive(Debug)]
pub struct JetShape {
    nvars: usize,
    order: usize,
    monos: Vec<MultiIndex>,
    degs: Vec<u8>,
    /// First position of each degree; `deg_start[order + 1] == monos.len()`.
    deg_start: Vec<usize>,
    index: Vec<u16>,
    pairs: Vec<(u16, u16, u16)>,
}

impl JetShape {
    pub fn new(nvars: usize, order: usize) -> Result<Arc<Self>> {
        if order > MAX_ORDER {
            return Err(Error::OrderExceeded { requested: order, max: MAX_ORDER });
        }
        if nvars == 0 || nvars > MAX_RANK {
            return Err(Error::InvalidParameter(alloc::format!("jets support 1..={MAX_RANK} variables")));
        }
        let side = order + 1;
        let dense = side.pow(nvars as u32);
        let mut monos = Vec::new();
        let mut degs = Vec::new();
        let mut deg_start = Vec::with_capacity(order + 2);
        for d in 0..=order {
            deg_start.push(monos.len());
            for flat in 0..dense {
                let mut m = [0u8; MAX_RANK];
                let mut rem = flat;
                let mut s = 0;
                for slot in m.iter_mut().take(nvars) {
                    *slot = (rem % side) as u8;
                    s += rem % side;
                    rem /= side;
                }
                if s == d {
                    monos.push(m);
                    degs.push(d as u8);
                }
            }
        }
        deg_start.push(monos.len());
        let mut index = vec![u16::MAX; dense];
        for (p, m) in monos.iter().enumerate() {
            index[Self::flat(m, nvars, side)] = p as u16;
        }
        let mut pairs = Vec::new();
        for (i, mi) in monos.iter().enumerate() {
            for (j, mj) in monos.iter().enumerate() {
                if degs[i] as usize + degs[j] as usize > order {
                    continue;
                }
                let mut s = [0u8; MAX_RANK];
                for v in 0..nvars {
                    s[v] = mi[v] + mj[v];
                }
                let k = index[Self::flat(&s, nvars, side)];
                pairs.push((i as u16, j as u16, k));
            }
        }
        pairs.sort_by_key(|&(_, _, k)| k);
        Ok(Arc::new(JetShape { nvars, order, monos, degs, deg_start, index, pairs }))
    }

    #[inline]
    fn flat(m: &MultiIndex, nvars: usize, side: usize) -> usize {
        let mut f = 0;
        for v in (0..nvars).rev() {
            f = f * side + m[v] as usize;
        }
        f
    }

    #[inline]
    pub fn nvars(&self) -> usize {
        self.nvars
    }
    #[inline]
    pub fn order(&self) -> usize {
        self.order
    }
    #[inline]
    pub fn len(&self) -> usize {
        self.monos.len()
    }
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.monos.is_empty()
    }
    pub fn monomials(&self) -> &[MultiIndex] {
        &self.monos
    }

    /// Position of a multi-index, `None` if its degree exceeds the order.
    pub fn position(&self, alpha: &[u8]) -> Option<usize> {
        let mut m = [0u8; MAX_RANK];
        let mut d = 0usize;
        for (v, &a) in alpha.iter().enumerate() {
            if v >= self.nvars {
                if a != 0 {
                    return None;
                }
                continue;
            }
            m[v] = a;
            d += a as usize;
        }
        if d > self.order {
            return None;
        }
        let p = self.index[Self::flat(&m, self.nvars, self.order + 1)];
        (p != u16::MAX).then_some(p as usize)
    }
}

/// Truncated Taylor expansion. Coefficients above `valid` are meaningless.
#[derive(Clone, Debug)]
pub struct Jet<R: Real> {
    shape: Arc<JetShape>,
    valid: usize,
    c: Vec<R>,
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

impl<R: Real> Jet<R> {
    pub fn constant(shape: &Arc<JetShape>, v: R) -> Self {
        let mut c = vec![R::zero(); shape.len()];
        c[0] = v;
        Jet { shape: shape.clone(), valid: shape.order, c }
    }

    pub fn zero(shape: &Arc<JetShape>) -> Self {
        Self::constant(shape, R::zero())
    }

    /// The coordinate `t_i + h_i`.
    pub fn variable(shape: &Arc<JetShape>, i: usize, v: R) -> Self {
        let mut j = Self::constant(shape, v);
        if shape.order >= 1 {
            let mut m = [0u8; MAX_RANK];
            m[i] = 1;
            let p = shape.position(&m).expect("degree one monomial");
            j.c[p] = R::one();
        }
        j
    }

    #[inline]
    pub fn shape(&self) -> &Arc<JetShape> {
        &self.shape
    }
    #[inline]
    pub fn valid_order(&self) -> usize {
        self.valid
    }
    #[inline]
    pub fn value(&self) -> R {
        self.c[0]
    }
    pub fn coeffs(&self) -> &[R] {
        &self.c
    }

    /// Taylor coefficient of `h^alpha`.
    pub fn coeff(&self, alpha: &[u8]) -> Result<R> {
        let d: usize = alpha.iter().map(|&a| a as usize).sum();
        if d > self.valid {
            return Err(Error::OrderExceeded { requested: d, max: self.valid });
        }
        let p = self.shape.position(alpha).ok_or(Error::OrderExceeded { requested: d, max: self.valid })?;
        Ok(self.c[p])
    }

    /// `d^alpha f` at the base point.
    pub fn derivative(&self, alpha: &[u8]) -> Result<R> {
        let f: f64 = alpha.iter().map(|&a| factorial(a as usize)).product();
        Ok(self.coeff(alpha)? * R::from_f64(f))
    }

    /// All partial derivatives `d^alpha f`, in the shape's monomial order.
    pub fn derivatives(&self) -> Vec<R> {
        self.shape
            .monos
            .iter()
            .zip(&self.c)
            .map(|(m, &c)| {
                let f: f64 = m.iter().map(|&a| factorial(a as usize)).product();
                c * R::from_f64(f)
            })
            .collect()
    }

    fn check(&self, other: &Self) {
        debug_assert!(Arc::ptr_eq(&self.shape, &other.shape) || self.shape.len() == other.shape.len());
    }

    pub fn scale(&self, s: R) -> Self {
        Jet { shape: self.shape.clone(), valid: self.valid, c: self.c.iter().map(|&x| x * s).collect() }
    }

    pub fn add_const(&self, s: R) -> Self {
        let mut out = self.clone();
        out.c[0] += s;
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.check(other);
        let valid = self.valid.min(other.valid);
        let limit = self.shape.deg_start[valid + 1];
        let mut c = vec![R::zero(); self.c.len()];
        for &(i, j, k) in &self.shape.pairs {
            let k = k as usize;
            if k >= limit {
                break;
            }
            c[k] += self.c[i as usize] * other.c[j as usize];
        }
        Jet { shape: self.shape.clone(), valid, c }
    }

    /// Compose with the univariate series `sum_k a_k (x - x0)^k` where `x0` is the value.
    pub fn compose(&self, a: &[R]) -> Self {
        let mut eps = self.clone();
        eps.c[0] = R::zero();
        let k = self.valid.min(a.len().saturating_sub(1));
        let mut acc = Jet::constant(&self.shape, a[k]);
        acc.valid = self.valid;
        for i in (0..k).rev() {
            acc = acc.mul(&eps);
            acc.c[0] += a[i];
        }
        acc
    }

    pub fn exp(&self) -> Self {
        let e = self.value().exp();
        let mut a = Vec::with_capacity(self.valid + 1);
        let mut f = e;
        for k in 0..=self.valid {
            if k > 0 {
                f = f / R::from_f64(k as f64);
            }
            a.push(f);
        }
        self.compose(&a)
    }

    /// Natural log; the value must be positive.
    pub fn ln(&self) -> Result<Self> {
        let x0 = self.value();
        if !(x0.to_f64() > 0.0) {
            return Err(Error::Domain(alloc::format!("log of non-positive value {:e}", x0.to_f64())));
        }
        let inv = R::one() / x0;
        let mut a = vec![x0.ln()];
        let mut p = R::one();
        for k in 1..=self.valid {
            p *= inv;
            let s = if k % 2 == 1 { R::one() } else { -R::one() };
            a.push(s * p / R::from_f64(k as f64));
        }
        Ok(self.compose(&a))
    }

    /// `x^p` for a positive value `x`.
    pub fn powf(&self, p: f64) -> Result<Self> {
        let x0 = self.value();
        if !(x0.to_f64() > 0.0) {
            return Err(Error::Domain(alloc::format!("power of non-positive value {:e}", x0.to_f64())));
        }
        let inv = R::one() / x0;
        let mut a = vec![x0.powf(R::from_f64(p))];
        for k in 1..=self.valid {
            let prev = a[k - 1];
            a.push(prev * R::from_f64((p - (k - 1) as f64) / k as f64) * inv);
        }
        Ok(self.compose(&a))
    }

    /// `|x|^p` for a nonzero value `x`.
    pub fn abs_powf(&self, p: f64) -> Result<Self> {
        if self.value().to_f64() < 0.0 {
            self.scale(-R::one()).powf(p)
        } else {
            self.powf(p)
        }
    }

    pub fn recip(&self) -> Result<Self> {
        let x0 = self.value();
        if x0.to_f64() == 0.0 {
            return Err(Error::Domain("reciprocal of zero".into()));
        }
        let inv = R::one() / x0;
        let mut a = Vec::with_capacity(self.valid + 1);
        let mut p = inv;
        for k in 0..=self.valid {
            a.push(if k % 2 == 0 { p } else { -p });
            p *= inv;
        }
        Ok(self.compose(&a))
    }

    pub fn div(&self, other: &Self) -> Result<Self> {
        Ok(self.mul(&other.recip()?))
    }

    fn sinh_cosh_series(&self, start_with_sinh: bool) -> Self {
        let x0 = self.value();
        let (s, c) = (x0.sinh(), x0.cosh());
        let mut a = Vec::with_capacity(self.valid + 1);
        let mut f = R::one();
        for k in 0..=self.valid {
            if k > 0 {
                f = f / R::from_f64(k as f64);
            }
            let base = if (k % 2 == 0) == start_with_sinh { s } else { c };
            a.push(base * f);
        }
        self.compose(&a)
    }

    pub fn sinh(&self) -> Self {
        self.sinh_cosh_series(true)
    }

    pub fn cosh(&self) -> Self {
        self.sinh_cosh_series(false)
    }

    pub fn coth(&self) -> Result<Self> {
        self.cosh().div(&self.sinh())
    }

    pub fn tanh(&self) -> Result<Self> {
        self.sinh().div(&self.cosh())
    }

    /// Jet of `t -> g(w t)` at `t`, given the jet of `g` at `w t`.
    pub fn pull_back(&self, w: &GroupElement) -> Self {
        let sh = &self.shape;
        let mut c = vec![R::zero(); self.c.len()];
        for (p, alpha) in sh.monos.iter().enumerate() {
            if sh.degs[p] as usize > self.valid {
                break;
            }
            let mut beta = [0u8; MAX_RANK];
            let mut neg = false;
            for i in 0..sh.nvars {
                beta[w.perm(i)] = alpha[i];
                if w.sign(i) < 0 && alpha[i] % 2 == 1 {
                    neg = !neg;
                }
            }
            let q = sh.position(&beta).expect("same degree");
            c[p] = if neg { -self.c[q] } else { self.c[q] };
        }
        Jet { shape: sh.clone(), valid: self.valid, c }
    }

    /// The same expansion in another layout over the same variables.
    pub fn reshape(&self, shape: &Arc<JetShape>) -> Self {
        let valid = self.valid.min(shape.order);
        let mut c = vec![R::zero(); shape.len()];
        for p in 0..shape.deg_start[valid + 1] {
            if let Some(q) = self.shape.position(&shape.monos[p][..shape.nvars]) {
                c[p] = self.c[q];
            }
        }
        Jet { shape: shape.clone(), valid, c }
    }

    /// `d/dt_j`; the valid order drops by one.
    pub fn partial(&self, j: usize) -> Result<Self> {
        if self.valid == 0 {
            return Err(Error::OrderExceeded { requested: 1, max: 0 });
        }
        let sh = &self.shape;
        let valid = self.valid - 1;
        let mut c = vec![R::zero(); self.c.len()];
        for p in 0..sh.deg_start[valid + 1] {
            let mut m = sh.monos[p];
            m[j] += 1;
            let q = sh.position(&m).expect("within order");
            c[p] = self.c[q] * R::from_f64(m[j] as f64);
        }
        Ok(Jet { shape: sh.clone(), valid, c })
    }
}

impl<R: Real> core::ops::Add for &Jet<R> {
    type Output = Jet<R>;
    fn add(self, o: &Jet<R>) -> Jet<R> {
        self.check(o);
        Jet {
            shape: self.shape.clone(),
            valid: self.valid.min(o.valid),
            c: self.c.iter().zip(&o.c).map(|(&a, &b)| a + b).collect(),
        }
    }
}

impl<R: Real> core::ops::Sub for &Jet<R> {
    type Output = Jet<R>;
    fn sub(self, o: &Jet<R>) -> Jet<R> {
        self.check(o);
        Jet {
            shape: self.shape.clone(),
            valid: self.valid.min(o.valid),
            c: self.c.iter().zip(&o.c).map(|(&a, &b)| a - b).collect(),
        }
    }
}

impl<R: Real> core::ops::Mul for &Jet<R> {
    type Output = Jet<R>;
    fn mul(self, o: &Jet<R>) -> Jet<R> {
        Jet::mul(self, o)
    }
}

/// A smooth function on `R^r` that can produce its Taylor expansion anywhere
/// in its smoothness domain.
pub trait JetFunction<R: Real>: Sync {
    fn rank(&self) -> usize;

    /// Taylor expansion at `t` in the layout `shape`.
    fn taylor(&self, t: &[R], shape: &Arc<JetShape>) -> Result<Jet<R>>;

    /// `Ok` iff `t` lies in the open set where the function is smooth.
    fn check_domain(&self, _t: &[f64]) -> Result<()> {
        Ok(())
    }

    /// Whether `f(w t) = f(t)` for every Weyl group element.
    fn is_weyl_invariant(&self) -> bool {
        false
    }

    /// For compactly supported functions, the `rho` beyond which
    /// `f(rho * dir) = 0`.
    fn ray_extent(&self, _dir: &[f64]) -> Option<f64> {
        None
    }

    fn value(&self, t: &[R]) -> Result<R> {
        let shape = JetShape::new(self.rank(), 0)?;
        Ok(self.taylor(t, &shape)?.value())
    }
}

/// `d^alpha f(t)`.
pub fn eval_jet<R: Real, F: JetFunction<R> + ?Sized>(f: &F, t: &[R], alpha: &[u8]) -> Result<R> {
    let order: usize = alpha.iter().map(|&a| a as usize).sum();
    if order > MAX_ORDER {
        return Err(Error::OrderExceeded { requested: order, max: MAX_ORDER });
    }
    let tf: Vec<f64> = t.iter().map(|x| x.to_f64()).collect();
    f.check_domain(&tf)?;
    let shape = JetShape::new(f.rank(), order)?;
    f.taylor(t, &shape)?.derivative(alpha)
}

fn variables<R: Real>(t: &[R], shape: &Arc<JetShape>) -> Vec<Jet<R>> {
    t.iter().enumerate().map(|(i, &v)| Jet::variable(shape, i, v)).collect()
}

/// Constant function.
#[derive(Clone, Copy, Debug)]
pub struct Constant {
    pub rank: usize,
    pub value: f64,
}

impl<R: Real> JetFunction<R> for Constant {
    fn rank(&self) -> usize {
        self.rank
    }
    fn taylor(&self, _t: &[R], shape: &Arc<JetShape>) -> Result<Jet<R>> {
        Ok(Jet::constant(shape, R::from_f64(self.value)))
    }
    fn is_weyl_invariant(&self) -> bool {
        true
    }
    fn ray_extent(&self, _dir: &[f64]) -> Option<f64> {
        (self.value == 0.0).then_some(0.0)
    }
}

/// `|SH(t)|^delta = prod_j |sh t_j|^delta`, smooth where every `t_j != 0`.
#[derive(Clone, Copy, Debug)]
pub struct ShPower {
    pub rank: usize,
    pub delta: f64,
}

/// `CH(t)^delta = prod_j (ch t_j)^delta`, smooth everywhere.
#[derive(Clone, Copy, Debug)]
pub struct ChPower {
    pub rank: usize,
    pub delta: f64,
}

pub fn sh_power(rank: usize, delta: f64) -> ShPower {
    ShPower { rank, delta }
}

pub fn ch_power(rank: usize, delta: f64) -> ChPower {
    ChPower { rank, delta }
}

fn check_off_walls(t: &[f64]) -> Result<()> {
    match t.iter().position(|&x| x == 0.0) {
        Some(j) => Err(Error::Domain(alloc::format!("|SH|^delta is not smooth at t_{} = 0", j + 1))),
        None => Ok(()),
    }
}

impl<R: Real> JetFunction<R> for ShPower {
    fn rank(&self) -> usize {
        self.rank
    }
    fn taylor(&self, t: &[R], shape: &Arc<JetShape>) -> Result<Jet<R>> {
        if self.delta == 0.0 {
            return Ok(Jet::constant(shape, R::one()));
        }
        let tf: Vec<f64> = t.iter().map(|x| x.to_f64()).collect();
        check_off_walls(&tf)?;
        let mut acc: Option<Jet<R>> = None;
        for v in variables(t, shape) {
            let f = v.sinh().abs_powf(self.delta)?;
            acc = Some(match acc {
                None => f,
                Some(a) => a.mul(&f),
            });
        }
        Ok(acc.expect("rank >= 1"))
    }
    fn check_domain(&self, t: &[f64]) -> Result<()> {
        if self.delta == 0.0 {
            Ok(())
        } else {
            check_off_walls(t)
        }
    }
    fn is_weyl_invariant(&self) -> bool {
        true
    }
}

impl<R: Real> JetFunction<R> for ChPower {
    fn rank(&self) -> usize {
        self.rank
    }
    fn taylor(&self, t: &[R], shape: &Arc<JetShape>) -> Result<Jet<R>> {
        let mut acc: Option<Jet<R>> = None;
        for v in variables(t, shape) {
            let f = v.cosh().powf(self.delta)?;
            acc = Some(match acc {
                None => f,
                Some(a) => a.mul(&f),
            });
        }
        Ok(acc.expect("rank >= 1"))
    }
    fn is_weyl_invariant(&self) -> bool {
        true
    }
}

/// `|SH|^delta prod_{i in plus} (1 + coth t_i) prod_{k in minus} (coth t_k - 1)`,
/// the functions appearing in the partial-product ladder.
#[derive(Clone, Copy, Debug)]
pub struct ShCothProduct {
    pub rank: usize,
    pub delta: f64,
    /// Bit `i` set: factor `1 + coth t_i`.
    pub plus: u32,
    /// Bit `k` set: factor `coth t_k - 1`.
    pub minus: u32,
}

impl<R: Real> JetFunction<R> for ShCothProduct {
    fn rank(&self) -> usize {
        self.rank
    }
    fn taylor(&self, t: &[R], shape: &Arc<JetShape>) -> Result<Jet<R>> {
        let mut acc = ShPower { rank: self.rank, delta: self.delta }.taylor(t, shape)?;
        let vars = variables(t, shape);
        for (i, v) in vars.iter().enumerate() {
            let p = self.plus >> i & 1 == 1;
            let m = self.minus >> i & 1 == 1;
            if !p && !m {
                continue;
            }
            let c = v.coth()?;
            if p {
                acc = acc.mul(&c.add_const(R::one()));
            }
            if m {
                acc = acc.mul(&c.add_const(-R::one()));
            }
        }
        Ok(acc)
    }
    fn check_domain(&self, t: &[f64]) -> Result<()> {
        check_off_walls(t)
    }
}

/// Smooth compactly supported W-invariant test function
/// `A (p0 + p1 e1(t^2)/R^2) exp(-1/(1 - q/R^2))` with
/// `q = e1(t^2) + kappa e2(t^2)/R^2`, zero where `q >= R^2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bump {
    pub rank: usize,
    pub radius: f64,
    pub kappa: f64,
    pub p0: f64,
    pub p1: f64,
    pub amplitude: f64,
}

/// Radial bump `exp(-1/(1 - |t|^2/R^2))` of support radius `R`.
pub fn bump(rank: usize, radius: f64) -> Bump {
    Bump { rank, radius, kappa: 0.0, p0: 1.0, p1: 0.0, amplitude: 1.0 }
}

impl Bump {
    /// Non-radial deformation through `e2(t^2)`; `kappa >= 0` keeps the support in the ball.
    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = kappa;
        self
    }
    /// Polynomial prefactor `p0 + p1 e1(t^2)/R^2`; `p0 = 0` gives `f(0) = 0`.
    pub fn with_prefactor(mut self, p0: f64, p1: f64) -> Self {
        self.p0 = p0;
        self.p1 = p1;
        self
    }
    pub fn scaled(mut self, amplitude: f64) -> Self {
        self.amplitude *= amplitude;
        self
    }

    /// Value at the origin.
    pub fn at_origin(&self) -> f64 {
        self.amplitude * self.p0 * libm::exp(-1.0)
    }

    fn level<R: Real>(&self, t: &[R]) -> R {
        let r2 = R::from_f64(self.radius * self.radius);
        let mut e1 = R::zero();
        let mut e2 = R::zero();
        for &x in t {
            let x2 = x * x;
            e2 += e1 * x2;
            e1 += x2;
        }
        (e1 + R::from_f64(self.kappa) * e2 / r2) / r2
    }

    /// Real value with the support test done in the same precision.
    pub fn eval_f64(&self, t: &[f64]) -> f64 {
        let s = self.level(t);
        if s >= 1.0 {
            return 0.0;
        }
        let e1: f64 = t.iter().map(|x| x * x).sum();
        self.amplitude * (self.p0 + self.p1 * e1 / (self.radius * self.radius)) * libm::exp(-1.0 / (1.0 - s))
    }
}

impl<R: Real> JetFunction<R> for Bump {
    fn rank(&self) -> usize {
        self.rank
    }
    fn taylor(&self, t: &[R], shape: &Arc<JetShape>) -> Result<Jet<R>> {
        if self.level(t).to_f64() >= 1.0 {
            return Ok(Jet::zero(shape));
        }
        let inv_r2 = R::from_f64(1.0 / (self.radius * self.radius));
        let vars = variables(t, shape);
        let mut e1 = Jet::zero(shape);
        let mut e2 = Jet::zero(shape);
        for v in &vars {
            let x2 = v.mul(v);
            e2 = &e2 + &e1.mul(&x2);
            e1 = &e1 + &x2;
        }
        let s = (&e1 + &e2.scale(R::from_f64(self.kappa) * inv_r2)).scale(inv_r2);
        // exp(-1/(1 - s))
        let u = s.scale(-R::one()).add_const(R::one());
        let g = u.recip()?.scale(-R::one()).exp();
        let pre = e1.scale(R::from_f64(self.p1) * inv_r2).add_const(R::from_f64(self.p0));
        Ok(g.mul(&pre).scale(R::from_f64(self.amplitude)))
    }
    fn is_weyl_invariant(&self) -> bool {
        true
    }
    fn ray_extent(&self, dir: &[f64]) -> Option<f64> {
        let mut e1 = 0.0;
        let mut e2 = 0.0;
        for &x in dir {
            e2 += e1 * x * x;
            e1 += x * x;
        }
        let r2 = self.radius * self.radius;
        let a = e1;
        let b = self.kappa * e2 / r2;
        if a == 0.0 && b == 0.0 {
            return Some(f64::INFINITY);
        }
        // b u^2 + a u = R^2 with u = rho^2
        let u = if b <= 1e-300 {
            r2 / a
        } else {
            2.0 * r2 / (a + libm::sqrt(a * a + 4.0 * b * r2))
        };
        Some(libm::sqrt(u))
    }
}

/// `c f`.
pub struct Scaled<'a, R: Real> {
    pub inner: &'a dyn JetFunction<R>,
    pub factor: f64,
}

impl<R: Real> JetFunction<R> for Scaled<'_, R> {
    fn rank(&self) -> usize {
        self.inner.rank()
    }
    fn taylor(&self, t: &[R], shape: &Arc<JetShape>) -> Result<Jet<R>> {
        Ok(self.inner.taylor(t, shape)?.scale(R::from_f64(self.factor)))
    }
    fn check_domain(&self, t: &[f64]) -> Result<()> {
        self.inner.check_domain(t)
    }
    fn is_weyl_invariant(&self) -> bool {
        self.inner.is_weyl_invariant()
    }
    fn ray_extent(&self, dir: &[f64]) -> Option<f64> {
        self.inner.ray_extent(dir)
    }
}

/// Pointwise sum or product of two functions.
pub struct Combine<'a, R: Real> {
    pub left: &'a dyn JetFunction<R>,
    pub right: &'a dyn JetFunction<R>,
    pub product: bool,
}

impl<R: Real> JetFunction<R> for Combine<'_, R> {
    fn rank(&self) -> usize {
        self.left.rank()
    }
    fn taylor(&self, t: &[R], shape: &Arc<JetShape>) -> Result<Jet<R>> {
        let l = self.left.taylor(t, shape)?;
        let r = self.right.taylor(t, shape)?;
        Ok(if self.product { l.mul(&r) } else { &l + &r })
    }
    fn check_domain(&self, t: &[f64]) -> Result<()> {
        self.left.check_domain(t)?;
        self.right.check_domain(t)
    }
    fn is_weyl_invariant(&self) -> bool {
        self.left.is_weyl_invariant() && self.right.is_weyl_invariant()
    }
    fn ray_extent(&self, dir: &[f64]) -> Option<f64> {
        let (a, b) = (self.left.ray_extent(dir), self.right.ray_extent(dir));
        if self.product {
            match (a, b) {
                (Some(x), Some(y)) => Some(x.min(y)),
                (Some(x), None) | (None, Some(x)) => Some(x),
                _ => None,
            }
        } else {
            Some(a?.max(b?))
        }
    }
}

/// `t -> f(w t)`.
pub struct Reflected<'a, R: Real> {
    pub inner: &'a dyn JetFunction<R>,
    pub w: GroupElement,
}

impl<R: Real> JetFunction<R> for Reflected<'_, R> {
    fn rank(&self) -> usize {
        self.inner.rank()
    }
    fn taylor(&self, t: &[R], shape: &Arc<JetShape>) -> Result<Jet<R>> {
        let mut wt = t.to_vec();
        self.w.act(t, &mut wt);
        Ok(self.inner.taylor(&wt, shape)?.pull_back(&self.w))
    }
    fn check_domain(&self, t: &[f64]) -> Result<()> {
        self.inner.check_domain(&self.w.act_vec(t))
    }
    fn is_weyl_invariant(&self) -> bool {
        self.inner.is_weyl_invariant()
    }
}

/// Boxed owned function, convenient for heterogeneous lists of test inputs.
pub type BoxedFn<R> = Box<dyn JetFunction<R> + Send>;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::real::Dd;
    use crate::weyl_elements;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn spec_examples() {
        let f = sh_power(1, 2.0);
        let d = eval_jet(&f, &[0.5f64], &[1]).unwrap();
        assert!(rel(d, 1.0f64.sinh()) < 1e-15);
        assert!(rel(d, 1.175_201_193_643_801_4) < 1e-15);

        let one = Constant { rank: 2, value: 1.0 };
        for alpha in [[1u8, 0], [0, 3], [2, 2]] {
            assert_eq!(eval_jet(&one, &[0.3f64, -0.2], &alpha).unwrap(), 0.0);
        }

        let p = sh_power(2, 1.0);
        let d = eval_jet(&p, &[0.3f64, 0.7], &[1, 1]).unwrap();
        assert!(rel(d, 0.3f64.cosh() * 0.7f64.cosh()) < 1e-15);

        let z = sh_power(3, 0.0);
        let t = [0.2f64, 0.9, 1.4];
        assert_eq!(z.value(&t).unwrap(), 1.0);
        assert_eq!(eval_jet(&z, &t, &[1, 0, 2]).unwrap(), 0.0);
    }

    #[test]
    fn log_derivative_of_sh_power_matches_finite_differences() {
        let f = sh_power(2, -3.0);
        let t = [0.4f64, 1.1];
        let v = f.value(&t).unwrap();
        let d1 = eval_jet(&f, &t, &[1, 0]).unwrap();
        assert!(rel(d1 / v, -3.0 / 0.4f64.tanh()) < 1e-14);
        let h = 1e-5;
        let fd = (f.value(&[t[0] + h, t[1]]).unwrap() - f.value(&[t[0] - h, t[1]]).unwrap()) / (2.0 * h);
        assert!(rel(fd / v, -3.0 / 0.4f64.tanh()) < 1e-7);
    }

    #[test]
    fn sh_power_domain_error_on_wall() {
        let f = sh_power(2, 1.5);
        assert!(matches!(eval_jet(&f, &[0.0f64, 0.3], &[1, 0]), Err(Error::Domain(_))));
        assert!(matches!(eval_jet(&f, &[0.1f64, 0.3], &[13, 0]), Err(Error::OrderExceeded { .. })));
    }

    #[test]
    fn ch_power_is_even() {
        let f = ch_power(2, -1.7);
        let a = f.value(&[0.4f64, -1.1]).unwrap();
        let b = f.value(&[0.4f64, 1.1]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn chain_rule_against_closed_forms() {
        // d^k/dx^k sinh(2x) = 2^k sinh or cosh; coth' = -1/sh^2
        let shape = JetShape::new(1, 8).unwrap();
        let x = Jet::variable(&shape, 0, 0.37f64);
        let s = x.scale(2.0).sinh();
        for k in 0..=8u8 {
            let expect = 2f64.powi(k as i32) * if k % 2 == 0 { 0.74f64.sinh() } else { 0.74f64.cosh() };
            assert!(rel(s.derivative(&[k]).unwrap(), expect) < 1e-13, "k={k}");
        }
        let c = x.coth().unwrap();
        assert!(rel(c.derivative(&[1]).unwrap(), -1.0 / 0.37f64.sinh().powi(2)) < 1e-14);
        let l = x.ln().unwrap().exp();
        for k in 0..=8u8 {
            let expect = if k == 0 { 0.37 } else if k == 1 { 1.0 } else { 0.0 };
            let d = l.derivative(&[k]).unwrap();
            let scale = factorial(k as usize) / 0.37f64.powi(k as i32);
            assert!((d - expect).abs() < 1e-15 * scale, "k={k}: {d}");
        }
        let p = x.powf(2.5).unwrap();
        assert!(rel(p.derivative(&[3]).unwrap(), 2.5 * 1.5 * 0.5 * 0.37f64.powf(-0.5)) < 1e-14);
    }

    #[test]
    fn clairaut_symmetry_exact() {
        let f = bump(3, 1.5).with_kappa(0.7).with_prefactor(1.0, 0.3);
        let t = [0.3f64, -0.2, 0.5];
        let shape = JetShape::new(3, 4).unwrap();
        let j = f.taylor(&t, &shape).unwrap();
        // coefficient storage is symmetric by construction; check derivatives via pullback
        let sw = GroupElement::swap(3, 0, 1);
        let swapped = Reflected { inner: &f, w: sw }.taylor(&[t[1], t[0], t[2]], &shape).unwrap();
        assert!(rel(j.derivative(&[2, 1, 0]).unwrap(), swapped.derivative(&[1, 2, 0]).unwrap()) < 1e-14);
    }

    #[test]
    fn bump_examples() {
        let f = bump(3, 1.2);
        assert!(rel(f.value(&[0.0f64, 0.0, 0.0]).unwrap(), (-1.0f64).exp()) < 1e-16);
        let far = [0.9f64, 0.9, 0.0];
        assert_eq!(f.value(&far).unwrap(), 0.0);
        assert_eq!(eval_jet(&f, &far, &[1, 2, 0]).unwrap(), 0.0);
        let ws = weyl_elements(3).unwrap();
        let g = f.with_kappa(1.3).with_prefactor(0.5, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let t: Vec<f64> = (0..3).map(|_| rng.gen_range(-0.8..0.8)).collect();
            let v = g.value(&t[..]).unwrap();
            for w in &ws {
                assert!(rel(g.value(&w.act_vec(&t)[..]).unwrap(), v) < 1e-13);
            }
        }
    }

    #[test]
    fn bump_ray_extent_is_support_boundary() {
        let f = bump(2, 1.3).with_kappa(2.0);
        for dir in [[1.0, 0.0], [1.0, 0.4], [1.0, 1.0]] {
            let rho = JetFunction::<f64>::ray_extent(&f, &dir).unwrap();
            let inside = [dir[0] * rho * 0.999, dir[1] * rho * 0.999];
            let outside = [dir[0] * rho * 1.001, dir[1] * rho * 1.001];
            assert!(f.eval_f64(&inside) > 0.0);
            assert_eq!(f.eval_f64(&outside), 0.0);
        }
    }

    #[test]
    fn dd_and_f64_jets_agree() {
        let f = bump(2, 1.5).with_kappa(0.5);
        let shape = JetShape::new(2, 6).unwrap();
        let a = f.taylor(&[0.3f64, 0.6], &shape).unwrap();
        let b = f.taylor(&[Dd::new(0.3), Dd::new(0.6)], &shape).unwrap();
        for (x, y) in a.coeffs().iter().zip(b.coeffs()) {
            assert!((x - y.to_f64()).abs() <= 1e-13 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn derivatives_match_richardson_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let funcs: Vec<(BoxedFn<f64>, f64)> = vec![
            (Box::new(sh_power(2, -1.3)), 0.2),
            (Box::new(ch_power(2, 2.7)), -1.0),
            (Box::new(bump(2, 1.4).with_kappa(0.8).with_prefactor(1.0, -0.5)), -0.8),
            (Box::new(ShCothProduct { rank: 2, delta: 0.5, plus: 0b11, minus: 0b10 }), 0.2),
        ];
        for (f, lo) in &funcs {
            for _ in 0..100 {
                let t = [rng.gen_range(*lo..0.9), rng.gen_range(0.2..0.9)];
                let shape = JetShape::new(2, 2).unwrap();
                let j = f.taylor(&t, &shape).unwrap();
                let val = |x: [f64; 2]| f.value(&x).unwrap();
                for (alpha, fd) in [
                    ([1u8, 0u8], fd1(&val, t, 0)),
                    ([0, 1], fd1(&val, t, 1)),
                    ([2, 0], fd2(&val, t, 0)),
                    ([1, 1], fd11(&val, t)),
                ] {
                    let d = j.derivative(&alpha).unwrap();
                    let scale = j.value().abs().max(d.abs()).max(1e-3);
                    assert!((d - fd).abs() < 1e-6 * scale, "{alpha:?} at {t:?}: {d} vs {fd}");
                }
            }
        }
    }

    fn richardson(g: impl Fn(f64) -> f64, p: i32) -> f64 {
        let (a, b) = (g(1e-4), g(1e-4 / 2.0));
        let k = 2f64.powi(p);
        (k * b - a) / (k - 1.0)
    }

    fn fd1(f: &impl Fn([f64; 2]) -> f64, t: [f64; 2], i: usize) -> f64 {
        richardson(
            |h| {
                let mut p = t;
                let mut m = t;
                p[i] += h;
                m[i] -= h;
                (f(p) - f(m)) / (2.0 * h)
            },
            2,
        )
    }

    fn fd2(f: &impl Fn([f64; 2]) -> f64, t: [f64; 2], i: usize) -> f64 {
        let g = |h: f64| {
            let mut p = t;
            let mut m = t;
            p[i] += h;
            m[i] -= h;
            (f(p) - 2.0 * f(t) + f(m)) / (h * h)
        };
        // larger steps keep round-off below the tolerance
        let (a, b) = (g(1e-3), g(5e-4));
        (4.0 * b - a) / 3.0
    }

    fn fd11(f: &impl Fn([f64; 2]) -> f64, t: [f64; 2]) -> f64 {
        let g = |h: f64| {
            let v = |dx: f64, dy: f64| f([t[0] + dx, t[1] + dy]);
            (v(h, h) - v(h, -h) - v(-h, h) + v(-h, -h)) / (4.0 * h * h)
        };
        let (a, b) = (g(1e-3), g(5e-4));
        (4.0 * b - a) / 3.0
    }

    #[test]
    fn partial_and_pull_back() {
        let f = bump(2, 1.5).with_kappa(0.4);
        let shape = JetShape::new(2, 5).unwrap();
        let t = [0.3f64, -0.45];
        let j = f.taylor(&t, &shape).unwrap();
        let dj = j.partial(0).unwrap();
        assert_eq!(dj.valid_order(), 4);
        assert!(rel(dj.derivative(&[1, 2]).unwrap(), j.derivative(&[2, 2]).unwrap()) < 1e-14);
        let w = GroupElement::new(&[1, 0], &[-1, 1]).unwrap();
        let h = Reflected { inner: &f, w };
        let hj = h.taylor(&t, &shape).unwrap();
        // h(t) = f(w t) with f W-invariant equals f(t)
        for (x, y) in hj.coeffs().iter().zip(j.coeffs()) {
            assert!((x - y).abs() < 1e-14);
        }
    }
}

//! Cherednik operators of type BC and their normal forms.
//!
//! `D_j = d_j + sum_l kappa_l k_l(t) (1 - s_l) - rho_j`, where the sum runs over
//! linear forms `l` (the positive roots involving `e_j`), `s_l` is the matching
//! reflection, and `k_l(t) = 1/(1 - exp(-2 l(t)))`. Coefficients of composite
//! operators are polynomials in these atoms: derivatives stay inside the
//! algebra (`d_i k = -2 l_i (k^2 - k)`) and reflections permute atoms up to
//! `k_{-l} = 1 - k_l`.

use alloc::collections::BTreeMap;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::jets::{Jet, JetFunction, JetShape, MultiIndex, MAX_ORDER};
use crate::quadrature::{self, QuadratureSpec};
use crate::real::{Dd, Real};
use crate::rootsys::{GroupElement, RootData, MAX_RANK};

/// Distance to a reflection wall below which limit formulas are used.
pub const WALL_EPS: f64 = 1e-6;

/// Default bound on the number of `(w, alpha)` terms of a normal form.
pub const TERM_BOUND: usize = 100_000;

type Form = [i8; MAX_RANK];

/// Canonical linear forms `e_i - e_j`, `e_i + e_j` (`i < j`), `e_j`, `2 e_j`.
#[derive(Debug, PartialEq)]
pub struct Atoms {
    rank: usize,
    forms: Vec<Form>,
}

impl Atoms {
    pub fn new(rank: usize) -> Self {
        let mut forms = Vec::new();
        for i in 0..rank {
            for j in (i + 1)..rank {
                let mut m = [0; MAX_RANK];
                m[i] = 1;
                m[j] = -1;
                forms.push(m);
                m[j] = 1;
                forms.push(m);
            }
        }
        for j in 0..rank {
            let mut m = [0; MAX_RANK];
            m[j] = 1;
            forms.push(m);
            m[j] = 2;
            forms.push(m);
        }
        Atoms { rank, forms }
    }

    pub fn len(&self) -> usize {
        self.forms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forms.is_empty()
    }

    pub fn form(&self, i: usize) -> &[i8] {
        &self.forms[i][..self.rank]
    }

    /// Index of `±form` and whether the sign was flipped.
    fn lookup(&self, form: &Form) -> (usize, bool) {
        let lead = form.iter().find(|&&x| x != 0).copied().unwrap_or(0);
        let flipped = lead < 0;
        let mut canon = *form;
        if flipped {
            for x in canon.iter_mut() {
                *x = -*x;
            }
        }
        let idx = self.forms.iter().position(|f| *f == canon).expect("closed under W");
        (idx, flipped)
    }

    fn index_of(&self, form: &Form) -> usize {
        let (i, f) = self.lookup(form);
        debug_assert!(!f);
        i
    }

    /// `l o w` as an atom, with the flip flag for `k_{-l} = 1 - k_l`.
    fn image(&self, i: usize, w: &GroupElement) -> (usize, bool) {
        let l = &self.forms[i];
        let mut out = [0i8; MAX_RANK];
        for (k, o) in out.iter_mut().enumerate().take(self.rank) {
            *o = w.sign(k) * l[w.perm(k)];
        }
        self.lookup(&out)
    }

    /// The reflection `t -> t - l(t) l^vee`.
    pub fn reflection(&self, i: usize) -> GroupElement {
        let f = &self.forms[i];
        let nz: Vec<usize> = (0..self.rank).filter(|&k| f[k] != 0).collect();
        match nz.as_slice() {
            [a] => GroupElement::flip(self.rank, *a),
            [a, b] if f[*b] < 0 => GroupElement::swap(self.rank, *a, *b),
            [a, b] => GroupElement::signed_swap(self.rank, *a, *b),
            _ => unreachable!("atoms have one or two nonzero entries"),
        }
    }

    /// `l(t)`.
    pub fn linear<R: Real>(&self, i: usize, t: &[R]) -> R {
        let mut s = R::zero();
        for (k, &c) in self.forms[i].iter().enumerate().take(self.rank) {
            match c {
                0 => {}
                1 => s += t[k],
                -1 => s -= t[k],
                _ => s += R::from_f64(c as f64) * t[k],
            }
        }
        s
    }

    /// `k_l(t) = 1/(1 - exp(-2 l(t)))`.
    pub fn value<R: Real>(&self, i: usize, t: &[R]) -> Result<R> {
        let x = self.linear(i, t);
        if x.to_f64() == 0.0 {
            return Err(Error::Singular(alloc::format!("point lies on the wall of atom {:?}", self.form(i))));
        }
        Ok((R::from_f64(2.0) * x).recip_one_minus_exp_neg())
    }
}

const BITS: u32 = 6;
const MASK: u128 = (1 << BITS) - 1;

#[inline]
fn exponent(m: u128, i: usize) -> u32 {
    ((m >> (BITS * i as u32)) & MASK) as u32
}

#[inline]
fn unit(i: usize) -> u128 {
    1u128 << (BITS * i as u32)
}

/// Polynomial in the atoms `k_l` with double-double coefficients.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Poly {
    terms: BTreeMap<u128, Dd>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly::default()
    }

    pub fn constant(c: f64) -> Self {
        let mut p = Poly::zero();
        p.add_monomial(0, Dd::new(c));
        p
    }

    pub fn atom(i: usize, c: f64) -> Self {
        let mut p = Poly::zero();
        p.add_monomial(unit(i), Dd::new(c));
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    fn add_monomial(&mut self, m: u128, c: Dd) {
        if c.hi == 0.0 {
            return;
        }
        let e = self.terms.entry(m).or_insert(Dd::ZERO);
        *e += c;
        if e.hi == 0.0 {
            self.terms.remove(&m);
        }
    }

    pub fn add_scaled(&mut self, other: &Poly, s: Dd) {
        for (&m, &c) in &other.terms {
            self.add_monomial(m, c * s);
        }
    }

    pub fn scale(&self, s: Dd) -> Poly {
        let mut p = Poly::zero();
        p.add_scaled(self, s);
        p
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut p = Poly::zero();
        for (&m1, &c1) in &self.terms {
            for (&m2, &c2) in &other.terms {
                p.add_monomial(m1 + m2, c1 * c2);
            }
        }
        p
    }

    /// `d_j` of the polynomial.
    pub fn derivative(&self, j: usize, atoms: &Atoms) -> Poly {
        let mut p = Poly::zero();
        for (&m, &c) in &self.terms {
            for i in 0..atoms.len() {
                let e = exponent(m, i);
                let lj = atoms.forms[i][j];
                if e == 0 || lj == 0 {
                    continue;
                }
                // d k^e = e k^{e-1} (-2 l_j)(k^2 - k)
                let f = c * Dd::new(-2.0 * lj as f64 * e as f64);
                p.add_monomial(m + unit(i), f);
                p.add_monomial(m, -f);
            }
        }
        p
    }

    /// `t -> p(w t)`.
    pub fn substitute(&self, w: &GroupElement, atoms: &Atoms) -> Poly {
        let images: Vec<(usize, bool)> = (0..atoms.len()).map(|i| atoms.image(i, w)).collect();
        let mut out = Poly::zero();
        for (&m, &c) in &self.terms {
            let mut base = 0u128;
            let mut flips: Vec<(usize, u32)> = Vec::new();
            for (i, &(k, flipped)) in images.iter().enumerate() {
                let e = exponent(m, i);
                if e == 0 {
                    continue;
                }
                if flipped {
                    flips.push((k, e));
                } else {
                    base += unit(k) * e as u128;
                }
            }
            if flips.is_empty() {
                out.add_monomial(base, c);
                continue;
            }
            // prod (1 - k)^e expanded binomially
            let mut partial: Vec<(u128, Dd)> = vec![(base, c)];
            for (k, e) in flips {
                let mut next = Vec::with_capacity(partial.len() * (e as usize + 1));
                let mut binom = 1.0;
                for q in 0..=e {
                    let s = if q % 2 == 0 { binom } else { -binom };
                    for &(mm, cc) in &partial {
                        next.push((mm + unit(k) * q as u128, cc * Dd::new(s)));
                    }
                    binom = binom * (e - q) as f64 / (q + 1) as f64;
                }
                partial = next;
            }
            for (mm, cc) in partial {
                out.add_monomial(mm, cc);
            }
        }
        out
    }

    /// Evaluate given `pow[i][e] = k_i(t)^e`.
    pub fn eval<R: Real>(&self, pow: &[Vec<R>]) -> R {
        let mut acc = R::zero();
        for (&m, &c) in &self.terms {
            let mut v = R::from_dd(c);
            let mut rest = m;
            let mut i = 0;
            while rest != 0 {
                let e = (rest & MASK) as usize;
                if e > 0 {
                    v *= pow[i][e];
                }
                rest >>= BITS;
                i += 1;
            }
            acc += v;
        }
        acc
    }

    fn max_exponents(&self, out: &mut [u32]) {
        for &m in self.terms.keys() {
            for (i, o) in out.iter_mut().enumerate() {
                *o = (*o).max(exponent(m, i));
            }
        }
    }

    fn prune(&mut self, rel: f64) {
        let max = self.terms.values().map(|c| c.hi.abs()).fold(0.0, f64::max);
        self.terms.retain(|_, c| c.hi.abs() > rel * max);
    }
}

/// Key of a normal-form term: acts as `c(t) (d^alpha f)(w t)`.
pub type TermKey = (GroupElement, MultiIndex);

/// Normal form `sum c_{w,alpha}(t) (d^alpha f)(w t)` of a differential-reflection operator.
#[derive(Clone, Debug)]
pub struct OperatorNF {
    rd: RootData,
    atoms: Arc<Atoms>,
    terms: BTreeMap<TermKey, Poly>,
    /// Valid only on W-invariant inputs; all terms then use `w = 1`.
    invariant_domain: bool,
    term_bound: usize,
}

fn mi_add(a: &MultiIndex, b: &MultiIndex) -> MultiIndex {
    let mut m = [0u8; MAX_RANK];
    for i in 0..MAX_RANK {
        m[i] = a[i] + b[i];
    }
    m
}

fn mi_degree(a: &MultiIndex) -> usize {
    a.iter().map(|&x| x as usize).sum()
}

fn binomial(n: u8, k: u8) -> f64 {
    let mut b = 1.0;
    for i in 0..k {
        b = b * (n - i) as f64 / (i + 1) as f64;
    }
    b
}

/// All `gamma <= alpha` componentwise.
fn sub_indices(alpha: &MultiIndex, rank: usize) -> Vec<MultiIndex> {
    let mut out = vec![[0u8; MAX_RANK]];
    for i in 0..rank {
        let mut next = Vec::new();
        for g in &out {
            for v in 0..=alpha[i] {
                let mut h = *g;
                h[i] = v;
                next.push(h);
            }
        }
        out = next;
    }
    out
}

impl OperatorNF {
    fn empty(rd: &RootData, atoms: Arc<Atoms>) -> Self {
        OperatorNF { rd: *rd, atoms, terms: BTreeMap::new(), invariant_domain: false, term_bound: TERM_BOUND }
    }

    pub fn identity(rd: &RootData) -> Self {
        Self::scalar(rd, 1.0)
    }

    pub fn scalar(rd: &RootData, c: f64) -> Self {
        let mut op = Self::empty(rd, Arc::new(Atoms::new(rd.rank)));
        if c != 0.0 {
            op.terms.insert((GroupElement::identity(rd.rank), [0; MAX_RANK]), Poly::constant(c));
        }
        op
    }

    /// `D_j` (0-based `j`).
    pub fn cherednik(rd: &RootData, j: usize) -> Self {
        let atoms = Arc::new(Atoms::new(rd.rank));
        let mut op = Self::empty(rd, atoms.clone());
        let id = GroupElement::identity(rd.rank);
        let mut ej = [0u8; MAX_RANK];
        ej[j] = 1;
        op.terms.insert((id, ej), Poly::constant(1.0));
        let mut scalar = Poly::constant(-rd.rho_j(j + 1));
        for (kappa, atom) in cherednik_atoms(rd, &atoms, j) {
            scalar.add_scaled(&Poly::atom(atom, 1.0), Dd::new(kappa));
            let s = atoms.reflection(atom);
            op.terms.entry((s, [0; MAX_RANK])).or_default().add_scaled(&Poly::atom(atom, 1.0), Dd::new(-kappa));
        }
        op.terms.insert((id, [0; MAX_RANK]), scalar);
        op
    }

    pub fn root_data(&self) -> &RootData {
        &self.rd
    }

    pub fn atoms(&self) -> &Arc<Atoms> {
        &self.atoms
    }

    pub fn is_invariant_domain(&self) -> bool {
        self.invariant_domain
    }

    pub fn with_term_bound(mut self, bound: usize) -> Self {
        self.term_bound = bound;
        self
    }

    pub fn terms(&self) -> impl Iterator<Item = (&TermKey, &Poly)> {
        self.terms.iter()
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn monomial_count(&self) -> usize {
        self.terms.values().map(Poly::len).sum()
    }

    /// Highest derivative order.
    pub fn order(&self) -> usize {
        self.terms.keys().map(|(_, a)| mi_degree(a)).max().unwrap_or(0)
    }

    fn same_algebra(&self, other: &OperatorNF) -> Result<()> {
        if self.rd != other.rd {
            return Err(Error::InvalidParameter("operators carry different root data".into()));
        }
        Ok(())
    }

    pub fn add(&self, other: &OperatorNF) -> Result<OperatorNF> {
        self.combine(other, Dd::ONE)
    }

    pub fn sub(&self, other: &OperatorNF) -> Result<OperatorNF> {
        self.combine(other, -Dd::ONE)
    }

    fn combine(&self, other: &OperatorNF, s: Dd) -> Result<OperatorNF> {
        self.same_algebra(other)?;
        let mut out = self.clone();
        out.invariant_domain = self.invariant_domain || other.invariant_domain;
        for (k, p) in &other.terms {
            out.terms.entry(*k).or_default().add_scaled(p, s);
        }
        out.terms.retain(|_, p| !p.is_zero());
        if out.invariant_domain {
            out = out.restrict_invariant();
        }
        Ok(out)
    }

    pub fn scale(&self, s: f64) -> OperatorNF {
        let mut out = self.clone();
        for p in out.terms.values_mut() {
            *p = p.scale(Dd::new(s));
        }
        out.terms.retain(|_, p| !p.is_zero());
        out
    }

    /// `self + c`.
    pub fn add_scalar(&self, c: f64) -> OperatorNF {
        let mut out = self.clone();
        let key = (GroupElement::identity(self.rd.rank), [0u8; MAX_RANK]);
        out.terms.entry(key).or_default().add_scaled(&Poly::constant(1.0), Dd::new(c));
        out.terms.retain(|_, p| !p.is_zero());
        out
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &OperatorNF) -> Result<OperatorNF> {
        self.same_algebra(other)?;
        if self.invariant_domain {
            return Err(Error::InvalidParameter(
                "an operator restricted to invariant inputs can only appear rightmost".into(),
            ));
        }
        let r = self.rd.rank;
        let atoms = &self.atoms;
        let mut out = Self::empty(&self.rd, atoms.clone());
        out.invariant_domain = other.invariant_domain;
        out.term_bound = self.term_bound.min(other.term_bound);

        // derivative cache: (term index in other, gamma) -> poly
        let other_terms: Vec<(&TermKey, &Poly)> = other.terms.iter().collect();
        let mut dcache: BTreeMap<(usize, MultiIndex), Poly> = BTreeMap::new();
        let mut scache: BTreeMap<(usize, MultiIndex, GroupElement), Poly> = BTreeMap::new();

        for ((w, alpha), ca) in &self.terms {
            let gammas = sub_indices(alpha, r);
            for (bi, ((v, beta), _)) in other_terms.iter().enumerate() {
                for gamma in &gammas {
                    let dpoly = derivative_cached(&mut dcache, &other_terms, bi, gamma, atoms);
                    if dpoly.is_zero() {
                        continue;
                    }
                    let spoly = if w.is_identity() {
                        dpoly
                    } else {
                        scache
                            .entry((bi, *gamma, *w))
                            .or_insert_with(|| dpoly.substitute(w, atoms))
                            .clone()
                    };
                    let mut coef = 1.0;
                    let mut mu = [0u8; MAX_RANK];
                    for i in 0..r {
                        mu[i] = alpha[i] - gamma[i];
                        coef *= binomial(alpha[i], gamma[i]);
                        if v.sign(i) < 0 && mu[i] % 2 == 1 {
                            coef = -coef;
                        }
                    }
                    let mut moved = [0u8; MAX_RANK];
                    for i in 0..r {
                        moved[v.perm(i)] = mu[i];
                    }
                    let new_beta = mi_add(beta, &moved);
                    if mi_degree(&new_beta) > MAX_ORDER {
                        return Err(Error::OrderExceeded { requested: mi_degree(&new_beta), max: MAX_ORDER });
                    }
                    let prod = ca.mul(&spoly);
                    out.terms.entry((v.compose(w), new_beta)).or_default().add_scaled(&prod, Dd::new(coef));
                    if out.terms.len() > out.term_bound {
                        return Err(Error::TermBound { bound: out.term_bound });
                    }
                }
            }
        }
        for p in out.terms.values_mut() {
            p.prune(1e-27);
        }
        out.terms.retain(|_, p| !p.is_zero());
        if out.invariant_domain {
            out = out.restrict_invariant();
        }
        Ok(out)
    }

    /// Collapse every term onto `w = 1` using `(d^beta f)(w t) = ± (d^alpha f)(t)`
    /// for W-invariant `f`. The result is only valid on W-invariant inputs.
    pub fn restrict_invariant(&self) -> OperatorNF {
        let mut out = Self::empty(&self.rd, self.atoms.clone());
        out.invariant_domain = true;
        out.term_bound = self.term_bound;
        let id = GroupElement::identity(self.rd.rank);
        for ((w, beta), p) in &self.terms {
            let mut alpha = [0u8; MAX_RANK];
            let mut neg = false;
            for i in 0..self.rd.rank {
                alpha[i] = beta[w.perm(i)];
                if w.sign(i) < 0 && alpha[i] % 2 == 1 {
                    neg = !neg;
                }
            }
            let s = if neg { -Dd::ONE } else { Dd::ONE };
            out.terms.entry((id, alpha)).or_default().add_scaled(p, s);
        }
        for p in out.terms.values_mut() {
            p.prune(1e-27);
        }
        out.terms.retain(|_, p| !p.is_zero());
        out
    }

    fn atom_powers<R: Real>(&self, t: &[R]) -> Result<Vec<Vec<R>>> {
        let mut maxe = vec![0u32; self.atoms.len()];
        for p in self.terms.values() {
            p.max_exponents(&mut maxe);
        }
        let mut pow = Vec::with_capacity(self.atoms.len());
        for (i, &e) in maxe.iter().enumerate() {
            let mut row = vec![R::one()];
            if e > 0 {
                let k = self.atoms.value(i, t)?;
                for q in 1..=e as usize {
                    let prev = row[q - 1];
                    row.push(prev * k);
                }
            }
            pow.push(row);
        }
        Ok(pow)
    }

    /// `(L f)(t)`.
    pub fn apply<R: Real, F: JetFunction<R> + ?Sized>(&self, f: &F, t: &[R]) -> Result<R> {
        if self.invariant_domain && !f.is_weyl_invariant() {
            return Err(Error::InvalidParameter(
                "operator restricted to W-invariant inputs applied to a non-invariant function".into(),
            ));
        }
        let r = self.rd.rank;
        let pow = self.atom_powers(t)?;
        let shape = JetShape::new(r, self.order())?;
        let mut acc = R::zero();
        let mut current: Option<(GroupElement, Vec<R>)> = None;
        let mut wt = t.to_vec();
        for ((w, alpha), p) in &self.terms {
            if current.as_ref().map(|(g, _)| g != w).unwrap_or(true) {
                w.act(t, &mut wt);
                let wtf: Vec<f64> = wt.iter().map(|x| x.to_f64()).collect();
                f.check_domain(&wtf)?;
                let jet: Jet<R> = f.taylor(&wt, &shape)?;
                current = Some((*w, jet.derivatives()));
            }
            let (_, ders) = current.as_ref().expect("set above");
            let pos = shape.position(alpha).expect("within operator order");
            acc += p.eval(&pow) * ders[pos];
        }
        Ok(acc)
    }

    /// Apply and also return the sum of absolute term magnitudes (a cancellation scale).
    pub fn apply_with_scale<R: Real, F: JetFunction<R> + ?Sized>(&self, f: &F, t: &[R]) -> Result<(R, f64)> {
        let r = self.rd.rank;
        let pow = self.atom_powers(t)?;
        let shape = JetShape::new(r, self.order())?;
        let mut acc = R::zero();
        let mut scale = 0.0;
        let mut wt = t.to_vec();
        let mut current: Option<(GroupElement, Vec<R>)> = None;
        for ((w, alpha), p) in &self.terms {
            if current.as_ref().map(|(g, _)| g != w).unwrap_or(true) {
                w.act(t, &mut wt);
                let jet: Jet<R> = f.taylor(&wt, &shape)?;
                current = Some((*w, jet.derivatives()));
            }
            let (_, ders) = current.as_ref().expect("set above");
            let pos = shape.position(alpha).expect("within operator order");
            let v = p.eval(&pow) * ders[pos];
            scale += v.to_f64().abs();
            acc += v;
        }
        Ok((acc, scale))
    }
}

fn derivative_cached(
    cache: &mut BTreeMap<(usize, MultiIndex), Poly>,
    terms: &[(&TermKey, &Poly)],
    bi: usize,
    gamma: &MultiIndex,
    atoms: &Atoms,
) -> Poly {
    if let Some(p) = cache.get(&(bi, *gamma)) {
        return p.clone();
    }
    let p = if gamma.iter().all(|&g| g == 0) {
        terms[bi].1.clone()
    } else {
        let j = gamma.iter().position(|&g| g > 0).expect("nonzero");
        let mut lower = *gamma;
        lower[j] -= 1;
        derivative_cached(cache, terms, bi, &lower, atoms).derivative(j, atoms)
    };
    cache.insert((bi, *gamma), p.clone());
    p
}

/// `(kappa, atom)` pairs of the difference terms of `D_j`.
fn cherednik_atoms(rd: &RootData, atoms: &Atoms, j: usize) -> Vec<(f64, usize)> {
    let r = rd.rank;
    let mut out = Vec::new();
    let form = |pairs: &[(usize, i8)]| {
        let mut f = [0i8; MAX_RANK];
        for &(k, v) in pairs {
            f[k] = v;
        }
        f
    };
    for i in 0..j {
        out.push((-rd.a, atoms.index_of(&form(&[(i, 1), (j, -1)]))));
    }
    for k in (j + 1)..r {
        out.push((rd.a, atoms.index_of(&form(&[(j, 1), (k, -1)]))));
    }
    for k in 0..r {
        if k != j {
            out.push((rd.a, atoms.index_of(&form(&[(j.min(k), 1), (j.max(k), 1)]))));
        }
    }
    out.push((2.0 * rd.iota, atoms.index_of(&form(&[(j, 2)]))));
    out.push((rd.two_b, atoms.index_of(&form(&[(j, 1)]))));
    out.retain(|&(kappa, _)| kappa != 0.0);
    out
}

/// How to treat difference quotients within [`WALL_EPS`] of a wall.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WallMode {
    /// Divide directly; refuse if closer than `WALL_EPS`.
    Exact,
    /// Replace quotients closer than `eps` by their first-order expansion.
    Limit { eps: f64 },
}

/// `(D_j f)(t)` straight from the defining formula (0-based `j`).
pub fn cherednik_apply<F: JetFunction<f64> + ?Sized>(
    j: usize,
    rd: &RootData,
    f: &F,
    t: &[f64],
    mode: WallMode,
) -> Result<f64> {
    let atoms = Atoms::new(rd.rank);
    let shape = JetShape::new(rd.rank, 2)?;
    f.check_domain(t)?;
    let jet = f.taylor(t, &shape)?;
    let mut e = [0u8; MAX_RANK];
    e[j] = 1;
    let mut acc = jet.derivative(&e[..rd.rank])? - rd.rho_j(j + 1) * jet.value();
    for (kappa, atom) in cherednik_atoms(rd, &atoms, j) {
        let x = atoms.linear(atom, t);
        let eps = match mode {
            WallMode::Exact => WALL_EPS,
            WallMode::Limit { eps } => eps,
        };
        if x.abs() < eps {
            if mode == WallMode::Exact {
                return Err(Error::Singular(alloc::format!(
                    "|l(t)| = {:e} below {eps:e} for l = {:?}",
                    x.abs(),
                    atoms.form(atom)
                )));
            }
            // [f - s f]/(1 - e^{-2x}) = f_v/2 + x (f_v/2 - f_vv/4) + O(x^2), v = 2l/|l|^2
            let l = atoms.form(atom);
            let norm2: f64 = l.iter().map(|&c| (c as f64) * (c as f64)).sum();
            let v: Vec<f64> = l.iter().map(|&c| 2.0 * c as f64 / norm2).collect();
            let mut fv = 0.0;
            let mut fvv = 0.0;
            for a in 0..rd.rank {
                let mut ea = [0u8; MAX_RANK];
                ea[a] = 1;
                fv += v[a] * jet.derivative(&ea[..rd.rank])?;
                for b in 0..rd.rank {
                    let mut eab = ea;
                    eab[b] += 1;
                    fvv += v[a] * v[b] * jet.derivative(&eab[..rd.rank])?;
                }
            }
            acc += kappa * (fv / 2.0 + x * (fv / 2.0 - fvv / 4.0));
        } else {
            let s = atoms.reflection(atom);
            let st = s.act_vec(t);
            f.check_domain(&st)?;
            let fs = f.value(&st)?;
            acc += kappa * (jet.value() - fs) / (-libm::expm1(-2.0 * x));
        }
    }
    Ok(acc)
}

/// `(D_j + shift) g` as a function, evaluated through jets of `g` at reflected points.
pub struct CherednikApplied<'a, R: Real> {
    pub rd: RootData,
    pub j: usize,
    pub shift: f64,
    pub inner: &'a dyn JetFunction<R>,
}

impl<R: Real> JetFunction<R> for CherednikApplied<'_, R> {
    fn rank(&self) -> usize {
        self.rd.rank
    }

    fn taylor(&self, t: &[R], shape: &Arc<JetShape>) -> Result<Jet<R>> {
        let r = self.rd.rank;
        let atoms = Atoms::new(r);
        let big = JetShape::new(r, shape.order() + 1)?;
        let g_big = self.inner.taylor(t, &big)?;
        let g = g_big.reshape(shape);
        let dg = g_big.partial(self.j)?.reshape(shape);
        let mut acc = &dg + &g.scale(R::from_f64(self.shift - self.rd.rho_j(self.j + 1)));
        for (kappa, atom) in cherednik_atoms(&self.rd, &atoms, self.j) {
            let x0 = atoms.linear(atom, t);
            if x0.to_f64().abs() < WALL_EPS {
                return Err(Error::Singular("sequential application too close to a wall".into()));
            }
            let s = atoms.reflection(atom);
            let mut st = t.to_vec();
            s.act(t, &mut st);
            let gs = self.inner.taylor(&st, shape)?.pull_back(&s);
            // k_l(t + h) as a jet
            let mut lin = Jet::constant(shape, R::zero());
            for (k, &c) in atoms.form(atom).iter().enumerate() {
                if c != 0 {
                    lin = &lin + &Jet::variable(shape, k, t[k]).scale(R::from_f64(c as f64));
                }
            }
            let k = one_minus_exp_neg2(&lin).recip()?;
            acc = &acc + &k.mul(&(&g - &gs)).scale(R::from_f64(kappa));
        }
        Ok(acc)
    }

    fn check_domain(&self, t: &[f64]) -> Result<()> {
        self.inner.check_domain(t)
    }
}

/// `1 - exp(-2 x)` of a jet, using `expm1` for the value.
fn one_minus_exp_neg2<R: Real>(x: &Jet<R>) -> Jet<R> {
    let x0 = x.value();
    let e = (R::from_f64(-2.0) * x0).exp();
    let mut a = vec![-(R::from_f64(-2.0) * x0).expm1()];
    let mut f = -e;
    for k in 1..=x.valid_order() {
        f = f * R::from_f64(-2.0 / k as f64);
        a.push(f);
    }
    x.compose(&a)
}

/// Normal form of the product `ops[0] ∘ ops[1] ∘ ...`.
pub fn compose(ops: &[OperatorNF]) -> Result<OperatorNF> {
    let (last, rest) = ops.split_last().ok_or(Error::InvalidParameter("empty composition".into()))?;
    let mut acc = last.clone();
    for op in rest.iter().rev() {
        acc = op.compose(&acc)?;
    }
    Ok(acc)
}

/// `M_delta = prod_j (D_j^2 - (delta + rho_1)^2)` in full normal form.
pub fn m_delta_op(rd: &RootData, delta: f64) -> Result<OperatorNF> {
    let c2 = (delta + rd.rho_j(1)).powi(2);
    let mut acc = OperatorNF::identity(rd);
    for j in 0..rd.rank {
        let d = OperatorNF::cherednik(rd, j);
        let d2 = d.compose(&d)?;
        acc = d2.add_scalar(-c2).compose(&acc)?;
    }
    Ok(acc)
}

/// Left-multiply a restricted operator by `prod_j (D_j^2 - c2)`.
fn left_mul_m(rd: &RootData, c2: f64, b: &OperatorNF) -> Result<OperatorNF> {
    let mut acc = b.clone();
    for j in 0..rd.rank {
        let d = OperatorNF::cherednik(rd, j);
        let once = d.compose(&acc)?;
        let twice = d.compose(&once)?;
        acc = twice.sub(&acc.scale(c2))?;
    }
    Ok(acc)
}

/// `M_delta` acting on W-invariant functions.
pub fn m_delta_invariant(rd: &RootData, delta: f64) -> Result<OperatorNF> {
    let id = OperatorNF::identity(rd).restrict_invariant();
    left_mul_m(rd, (delta + rd.rho_j(1)).powi(2), &id)
}

/// `M_delta` for many `delta`: `M_delta = sum_k (-(delta + rho_1)^2)^(r-k) e_k(D_1^2, ..., D_r^2)`
/// on W-invariant inputs, with the `e_k` built once.
#[derive(Clone, Debug)]
pub struct MDeltaFamily {
    rd: RootData,
    elementary: Vec<OperatorNF>,
}

impl MDeltaFamily {
    pub fn new(rd: &RootData) -> Result<Self> {
        let r = rd.rank;
        let id = OperatorNF::identity(rd).restrict_invariant();
        // e[k] after processing j variables
        let mut e: Vec<Option<OperatorNF>> = vec![None; r + 1];
        e[0] = Some(id);
        for j in 0..r {
            let d = OperatorNF::cherednik(rd, j);
            for k in (1..=j + 1).rev() {
                let Some(prev) = e[k - 1].as_ref() else { continue };
                let add = d.compose(&d.compose(prev)?)?;
                e[k] = Some(match e[k].take() {
                    None => add,
                    Some(cur) => cur.add(&add)?,
                });
            }
        }
        Ok(MDeltaFamily { rd: *rd, elementary: e.into_iter().map(|o| o.expect("filled")).collect() })
    }

    pub fn at(&self, delta: f64) -> Result<OperatorNF> {
        let r = self.rd.rank;
        let c2 = -(delta + self.rd.rho_j(1)).powi(2);
        let mut acc = self.elementary[r].clone();
        for k in (0..r).rev() {
            acc = acc.add(&self.elementary[k].scale(c2.powi((r - k) as i32)))?;
        }
        Ok(acc)
    }
}

/// `prod_{k=0}^{l-1} M_{delta0 - 2k}` on W-invariant inputs.
pub fn dirac_chain_op(dp: &crate::DomainParams) -> Result<OperatorNF> {
    let rd = dp.root_data();
    chain_invariant(&rd, &(0..dp.l).map(|k| dp.delta0 - 2.0 * k as f64).collect::<Vec<_>>())
}

/// `M_{d_1} ∘ M_{d_2} ∘ ...` on W-invariant inputs.
pub fn chain_invariant(rd: &RootData, deltas: &[f64]) -> Result<OperatorNF> {
    let mut acc = OperatorNF::identity(rd).restrict_invariant();
    for &d in deltas.iter().rev() {
        acc = left_mul_m(rd, (d + rd.rho_j(1)).powi(2), &acc)?;
    }
    Ok(acc)
}

/// `D^2 - rho^2` in rank one; on even functions `f'' + (2b coth t + 2 iota coth 2t) f'`.
pub fn radial_laplacian(rd: &RootData) -> Result<OperatorNF> {
    if rd.rank != 1 {
        return Err(Error::InvalidParameter("radial_laplacian needs rank one".into()));
    }
    let d = OperatorNF::cherednik(rd, 0);
    let id = OperatorNF::identity(rd).restrict_invariant();
    Ok(d.compose(&d.compose(&id)?)?.add_scalar(-rd.rho_j(1).powi(2)))
}

/// `(<op f, g>_mu, <f, op g>_mu)` over all of `R^r`.
///
/// `f` and `g` must be compactly supported. Non-invariant integrands are
/// symmetrized over the Weyl group; everything is evaluated in double-double.
pub fn adjoint_pairing<F, G>(rd: &RootData, op: &OperatorNF, f: &F, g: &G, spec: &QuadratureSpec) -> Result<(f64, f64)>
where
    F: JetFunction<Dd> + ?Sized,
    G: JetFunction<Dd> + ?Sized,
{
    let invariant = f.is_weyl_invariant() && g.is_weyl_invariant();
    let extent = |dir: &[f64]| match (f.ray_extent(dir), g.ray_extent(dir)) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    };
    let left = quadrature::integrate_mu_with(rd, 0.0, spec, extent, |t| Ok(op.apply(f, t)? * g.value(t)?), invariant)?;
    let right = quadrature::integrate_mu_with(rd, 0.0, spec, extent, |t| Ok(f.value(t)? * op.apply(g, t)?), invariant)?;
    Ok((left.value, right.value))
}

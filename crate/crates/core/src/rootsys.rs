//! Root data of type BC_r (with the B/C/D degenerations), the hyperoctahedral
//! Weyl group, and the parameter bundle of a matrix ball.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::special;

/// Largest rank for which the Weyl group is enumerated.
pub const MAX_RANK: usize = 4;

/// Rank plus the multiplicity triple `(a, 2b, iota)` of the roots
/// `±e_i ± e_j`, `±e_k`, `±2e_k`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RootData {
    pub rank: usize,
    pub a: f64,
    pub two_b: f64,
    pub iota: f64,
}

impl RootData {
    pub fn new(rank: usize, a: f64, two_b: f64, iota: f64) -> Result<Self> {
        if rank == 0 || rank > MAX_RANK {
            return Err(Error::InvalidParameter(alloc::format!(
                "rank must satisfy 1 <= r <= {MAX_RANK}, got {rank}"
            )));
        }
        for (name, v) in [("a", a), ("2b", two_b), ("iota", iota)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(alloc::format!(
                    "multiplicity {name} must be a finite nonnegative real, got {v}"
                )));
            }
        }
        Ok(RootData { rank, a, two_b, iota })
    }

    #[inline]
    pub fn b(&self) -> f64 {
        self.two_b / 2.0
    }

    /// `rho_j = iota + b + a (r - j)`, `j = 1..=r`.
    pub fn rho(&self) -> Vec<f64> {
        (1..=self.rank).map(|j| self.rho_j(j)).collect()
    }

    #[inline]
    pub fn rho_j(&self, j: usize) -> f64 {
        self.iota + self.b() + self.a * (self.rank - j) as f64
    }
}

/// Free function form of [`RootData::rho`].
pub fn rho(rd: &RootData) -> Vec<f64> {
    rd.rho()
}

/// Signed permutation acting by `(w t)_{perm(j)} = signs(j) t_j`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroupElement {
    rank: u8,
    perm: [u8; MAX_RANK],
    signs: [i8; MAX_RANK],
}

impl core::fmt::Debug for GroupElement {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "W[")?;
        for j in 0..self.rank() {
            let s = if self.signs[j] < 0 { "-" } else { "+" };
            write!(f, "{}{}", s, self.perm[j] + 1)?;
            if j + 1 < self.rank() {
                write!(f, " ")?;
            }
        }
        write!(f, "]")
    }
}

impl GroupElement {
    pub fn identity(rank: usize) -> Self {
        let mut perm = [0u8; MAX_RANK];
        for (j, p) in perm.iter_mut().enumerate() {
            *p = j as u8;
        }
        GroupElement { rank: rank as u8, perm, signs: [1; MAX_RANK] }
    }

    /// Build from 0-based `perm` and `signs`; `None` if `perm` is not a permutation.
    pub fn new(perm: &[usize], signs: &[i8]) -> Option<Self> {
        let r = perm.len();
        if r == 0 || r > MAX_RANK || signs.len() != r {
            return None;
        }
        let mut seen = [false; MAX_RANK];
        let mut g = GroupElement::identity(r);
        for j in 0..r {
            if perm[j] >= r || seen[perm[j]] || (signs[j] != 1 && signs[j] != -1) {
                return None;
            }
            seen[perm[j]] = true;
            g.perm[j] = perm[j] as u8;
            g.signs[j] = signs[j];
        }
        Some(g)
    }

    #[inline]
    pub fn rank(&self) -> usize {
        self.rank as usize
    }
    #[inline]
    pub fn perm(&self, j: usize) -> usize {
        self.perm[j] as usize
    }
    #[inline]
    pub fn sign(&self, j: usize) -> i8 {
        self.signs[j]
    }

    pub fn is_identity(&self) -> bool {
        *self == GroupElement::identity(self.rank())
    }

    /// Transposition `s_ij`.
    pub fn swap(rank: usize, i: usize, j: usize) -> Self {
        let mut g = GroupElement::identity(rank);
        g.perm.swap(i, j);
        g
    }

    /// `sigma_ij : (t_i, t_j) -> (-t_j, -t_i)`.
    pub fn signed_swap(rank: usize, i: usize, j: usize) -> Self {
        let mut g = GroupElement::swap(rank, i, j);
        g.signs[i] = -1;
        g.signs[j] = -1;
        g
    }

    /// `sigma_j : t_j -> -t_j`.
    pub fn flip(rank: usize, j: usize) -> Self {
        let mut g = GroupElement::identity(rank);
        g.signs[j] = -1;
        g
    }

    /// `w t`.
    pub fn act<T: Copy + core::ops::Neg<Output = T>>(&self, t: &[T], out: &mut [T]) {
        for j in 0..self.rank() {
            let v = t[j];
            out[self.perm(j)] = if self.signs[j] < 0 { -v } else { v };
        }
    }

    pub fn act_vec(&self, t: &[f64]) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.rank()];
        self.act(t, &mut out);
        out
    }

    /// `self ∘ other`, i.e. `(self ∘ other) t = self (other t)`.
    pub fn compose(&self, other: &GroupElement) -> GroupElement {
        let mut g = GroupElement::identity(self.rank());
        for j in 0..self.rank() {
            let k = other.perm(j);
            g.perm[j] = self.perm[k];
            g.signs[j] = self.signs[k] * other.signs[j];
        }
        g
    }

    pub fn inverse(&self) -> GroupElement {
        let mut g = GroupElement::identity(self.rank());
        for j in 0..self.rank() {
            let k = self.perm(j);
            g.perm[k] = j as u8;
            g.signs[k] = self.signs[j];
        }
        g
    }
}

/// All `2^r r!` signed permutations.
pub fn weyl_elements(r: usize) -> Result<Vec<GroupElement>> {
    if r == 0 || r > MAX_RANK {
        return Err(Error::InvalidParameter(alloc::format!(
            "Weyl group enumeration supports 1 <= r <= {MAX_RANK}, got {r}"
        )));
    }
    let mut perms: Vec<Vec<usize>> = Vec::new();
    let mut cur: Vec<usize> = (0..r).collect();
    heap_permutations(r, &mut cur, &mut perms);
    let mut out = Vec::with_capacity(perms.len() << r);
    for p in &perms {
        for mask in 0u32..(1 << r) {
            let signs: Vec<i8> = (0..r).map(|j| if mask >> j & 1 == 1 { -1 } else { 1 }).collect();
            out.push(GroupElement::new(p, &signs).expect("valid permutation"));
        }
    }
    out.sort();
    Ok(out)
}

fn heap_permutations(k: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if k <= 1 {
        out.push(a.clone());
        return;
    }
    for i in 0..k {
        heap_permutations(k - 1, a, out);
        if k % 2 == 0 {
            a.swap(i, k - 1);
        } else {
            a.swap(0, k - 1);
        }
    }
}

/// Matrix ball `X = {x in M_{n-r,r}(K) : I - x* x > 0}` with a totally geodesic
/// sub-ball of size `r'`, together with every constant derived from it.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DomainParams {
    pub a: u32,
    pub n: u32,
    pub r: u32,
    pub r_prime: u32,
    pub delta0: f64,
    pub iota: f64,
    pub two_b: f64,
    pub rho: Vec<f64>,
    pub l: u32,
    /// Helmholtz shifts `lambda_1..lambda_l`; empty unless `r = 1`.
    pub lambdas: Vec<f64>,
    pub c0: f64,
    /// Candidate inversion constants, see [`special::DiracConstants`].
    pub constants: special::DiracConstants,
}

impl DomainParams {
    pub fn root_data(&self) -> RootData {
        RootData { rank: self.r as usize, a: self.a as f64, two_b: self.two_b, iota: self.iota }
    }

    /// Wall exponent of `|SH|^delta0 dmu` at `t_j = 0`.
    pub fn wall_exponent(&self) -> f64 {
        self.delta0 + self.two_b + self.iota
    }
}

/// Validate `(a, n, r, r')` and derive every constant.
///
/// The octonionic case `a = 8` is only meaningful as the exceptional rank-one
/// ball, encoded as `n = 3, r = 1, r' = 2` so that `2b = 8` and `iota = 7`.
pub fn domain_params(a: u32, n: u32, r: u32, r_prime: u32) -> Result<DomainParams> {
    if ![1, 2, 4, 8].contains(&a) {
        return Err(Error::InvalidParameter(alloc::format!(
            "a must be one of 1, 2, 4, 8 (got {a})"
        )));
    }
    if r == 0 || n == 0 || r_prime == 0 {
        return Err(Error::InvalidParameter("n, r and r' must be positive".into()));
    }
    if a == 8 && (n, r, r_prime) != (3, 1, 2) {
        return Err(Error::InvalidParameter(alloc::format!(
            "a = 8 only admits the exceptional rank-one ball n = 3, r = 1, r' = 2 (got n = {n}, r = {r}, r' = {r_prime})"
        )));
    }
    if r as usize > MAX_RANK {
        return Err(Error::InvalidParameter(alloc::format!("rank r = {r} exceeds {MAX_RANK}")));
    }
    let (ni, ri, rpi) = (n as i64, r as i64, r_prime as i64);
    let bound = rpi.min(2 * (ni - rpi));
    if 2 * ri > bound {
        return Err(Error::InvalidParameter(alloc::format!(
            "rank condition 2r <= min{{r', 2(n - r')}} violated: 2r = {}, r' = {r_prime}, 2(n - r') = {}",
            2 * ri,
            2 * (ni - rpi)
        )));
    }
    let af = a as f64;
    let delta0 = af * (rpi - ni) as f64;
    let iota = af - 1.0;
    let two_b = af * (ni - 2 * ri) as f64;
    let rd = RootData::new(r as usize, af, two_b, iota)?;

    let lo = -1.0 - iota - two_b;
    let hi = -(ri as f64) * (af - 1.0);
    if !(delta0 > lo) {
        return Err(Error::InvalidParameter(alloc::format!(
            "delta0 window violated: need delta0 > -1 - iota - 2b = {lo}, got delta0 = {delta0}"
        )));
    }
    if !(delta0 < hi) {
        return Err(Error::InvalidParameter(alloc::format!(
            "delta0 window violated: need delta0 < -r(a - 1) = {hi}, got delta0 = {delta0}"
        )));
    }
    // l - 1 = (delta0 + iota + 2b - 1 + a(r - 1)) / 2
    let l_real = (delta0 + iota + two_b - 1.0 + af * (ri - 1) as f64) / 2.0 + 1.0;
    if !(l_real >= 1.0) || libm::fabs(l_real - libm::round(l_real)) > 1e-12 {
        return Err(Error::InvalidParameter(alloc::format!(
            "l = (delta0 + iota + 2b - 1 + a(r - 1))/2 + 1 must be a positive integer, got {l_real}"
        )));
    }
    let l = libm::round(l_real) as u32;
    let lambdas = if r == 1 { helmholtz_shifts(a, n, r_prime, l) } else { Vec::new() };
    let c0 = special::c0(af, r as usize);
    let mut dp = DomainParams {
        a,
        n,
        r,
        r_prime,
        delta0,
        iota,
        two_b,
        rho: rd.rho(),
        l,
        lambdas,
        c0,
        constants: special::DiracConstants::default(),
    };
    dp.constants = special::dirac_constants(&dp)?;
    Ok(dp)
}

fn helmholtz_shifts(a: u32, n: u32, r_prime: u32, l: u32) -> Vec<f64> {
    let (af, nf, rp) = (a as f64, n as f64, r_prime as f64);
    (1..=l)
        .map(|j| {
            let j = j as f64;
            (af * (nf - 1.0) - af * (rp - 1.0) + 2.0 * (j - 1.0)) * (af * (rp - 1.0) + af - 2.0 * j)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rho_examples() {
        // rank one with (2b, iota) = (a(n-2), a-1): rho = a n / 2 - 1
        for a in [1.0, 2.0, 4.0, 8.0] {
            for n in [3.0, 4.0, 7.0] {
                let rd = RootData::new(1, a, a * (n - 2.0), a - 1.0).unwrap();
                assert_eq!(rd.rho(), alloc::vec![a * n / 2.0 - 1.0]);
            }
        }
        assert_eq!(RootData::new(2, 0.0, 0.0, 0.0).unwrap().rho(), alloc::vec![0.0, 0.0]);
        assert_eq!(RootData::new(3, 2.0, 4.0, 1.0).unwrap().rho(), alloc::vec![7.0, 5.0, 3.0]);
    }

    #[test]
    fn rho_uses_distance_to_last_index() {
        let r3 = RootData::new(3, 1.5, 1.0, 0.5).unwrap().rho();
        let r2 = RootData::new(2, 1.5, 1.0, 0.5).unwrap().rho();
        assert_ne!(&r3[..2], &r2[..]);
        assert_eq!(r3[2], r2[1]);
        assert_eq!(r3[0], r2[0] + 1.5);
        assert!(r3.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn weyl_group_orders() {
        assert_eq!(weyl_elements(1).unwrap().len(), 2);
        assert_eq!(weyl_elements(2).unwrap().len(), 8);
        assert_eq!(weyl_elements(3).unwrap().len(), 48);
        assert_eq!(weyl_elements(4).unwrap().len(), 384);
        assert!(weyl_elements(5).is_err());
        let w = weyl_elements(3).unwrap();
        let mut d = w.clone();
        d.dedup();
        assert_eq!(d.len(), 48);
    }

    #[test]
    fn group_axioms_rank_three() {
        let w = weyl_elements(3).unwrap();
        let id = GroupElement::identity(3);
        for g in &w {
            assert_eq!(g.compose(&g.inverse()), id);
            assert_eq!(g.inverse().compose(g), id);
            assert_eq!(g.compose(&id), *g);
            for h in &w {
                let gh = g.compose(h);
                assert!(w.binary_search(&gh).is_ok());
                for k in w.iter().step_by(7) {
                    assert_eq!(gh.compose(k), g.compose(&h.compose(k)));
                }
            }
        }
    }

    #[test]
    fn action_is_compatible_with_composition() {
        let t = [0.3, -1.7, 2.25];
        let w = weyl_elements(3).unwrap();
        for g in &w {
            let gt = g.act_vec(&t);
            assert_eq!(g.inverse().act_vec(&gt), t.to_vec());
            for h in w.iter().step_by(5) {
                assert_eq!(g.compose(h).act_vec(&t), g.act_vec(&h.act_vec(&t)));
            }
        }
    }

    #[test]
    fn reflections_act_as_named() {
        let t = [1.0, 2.0, 3.0];
        assert_eq!(GroupElement::swap(3, 0, 2).act_vec(&t), alloc::vec![3.0, 2.0, 1.0]);
        assert_eq!(GroupElement::signed_swap(3, 0, 1).act_vec(&t), alloc::vec![-2.0, -1.0, 3.0]);
        assert_eq!(GroupElement::flip(3, 1).act_vec(&t), alloc::vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn domain_params_examples() {
        let dp = domain_params(2, 5, 1, 2).unwrap();
        assert_eq!((dp.delta0, dp.iota, dp.two_b, dp.l), (-6.0, 1.0, 6.0, 1));
        assert_eq!(dp.rho, alloc::vec![4.0]);
        assert_eq!(dp.lambdas, alloc::vec![12.0]);

        let dp = domain_params(1, 4, 1, 3).unwrap();
        assert_eq!((dp.delta0, dp.iota, dp.two_b, dp.l), (-1.0, 0.0, 2.0, 1));
        assert_eq!(dp.rho, alloc::vec![1.0]);
        assert_eq!(dp.lambdas, alloc::vec![1.0]);

        let dp = domain_params(2, 4, 1, 3).unwrap();
        assert_eq!(dp.l, 2);
        assert_eq!(dp.lambdas, alloc::vec![8.0, 8.0]);

        // rank two: l carries the a(r - 1) term and equals a(r' - r)/2
        let dp = domain_params(2, 7, 2, 4).unwrap();
        assert_eq!((dp.delta0, dp.iota, dp.two_b, dp.l), (-6.0, 1.0, 6.0, 2));
        assert!(dp.lambdas.is_empty());

        let dp = domain_params(8, 3, 1, 2).unwrap();
        assert_eq!((dp.delta0, dp.iota, dp.two_b, dp.l), (-8.0, 7.0, 8.0, 4));
    }

    #[test]
    fn l_agrees_with_half_codimension() {
        for a in [1u32, 2, 4] {
            for n in 2..14 {
                for r in 1..=3 {
                    for rp in 1..n {
                        if let Ok(dp) = domain_params(a, n, r, rp) {
                            assert_eq!(dp.l as f64, a as f64 * (rp - r) as f64 / 2.0);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn domain_params_rejections() {
        let e = domain_params(1, 4, 1, 4).unwrap_err();
        assert!(alloc::format!("{e}").contains("rank condition"));
        assert!(domain_params(3, 5, 1, 2).is_err());
        assert!(domain_params(8, 4, 1, 2).is_err());
        // a = 1, r' - r odd: l is half-integral
        let e = domain_params(1, 6, 1, 2).unwrap_err();
        assert!(alloc::format!("{e}").contains("positive integer"), "{e}");
    }
}

//! Closed-form constants: Gamma and Gindikin Gamma, the Bernstein-Sato
//! constants, the normalization `z_delta`, `c_0`, the Dirac constants, and the
//! radial densities.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::real::Real;
use crate::rootsys::{DomainParams, RootData};

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

fn is_pole(x: f64) -> bool {
    x <= 0.0 && libm::fabs(x - libm::round(x)) < 1e-12
}

/// Euler Gamma via the Lanczos approximation (g = 7, nine terms) and reflection.
pub fn gamma(x: f64) -> Result<f64> {
    if is_pole(x) {
        return Err(Error::Pole { factor: 1, arg: x });
    }
    Ok(gamma_unchecked(x))
}

/// `sin(pi x)` with the argument reduced exactly.
fn sin_pi(x: f64) -> f64 {
    let n = libm::round(x);
    let s = libm::sin(core::f64::consts::PI * (x - n));
    if libm::fmod(n, 2.0) == 0.0 {
        s
    } else {
        -s
    }
}

fn gamma_unchecked(x: f64) -> f64 {
    use core::f64::consts::PI;
    if x < 0.5 {
        return PI / (sin_pi(x) * gamma_unchecked(1.0 - x));
    }
    if x == libm::floor(x) && x <= 23.0 {
        let mut f = 1.0;
        let mut k = 2.0;
        while k < x {
            f *= k;
            k += 1.0;
        }
        return f;
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    // t^(x+1/2) e^-t split in two halves to delay overflow
    let half = libm::pow(t, 0.5 * (x + 0.5));
    libm::sqrt(2.0 * PI) * half * (half * libm::exp(-t)) * acc
}

/// `Gamma_a(lambda) = prod_{j=1}^r Gamma(lambda - (a/2)(j - 1))`.
pub fn gindikin_gamma(a: f64, r: usize, lambda: f64) -> Result<f64> {
    let mut p = 1.0;
    for j in 1..=r {
        let arg = lambda - a / 2.0 * (j - 1) as f64;
        if is_pole(arg) {
            return Err(Error::Pole { factor: j, arg });
        }
        p *= gamma_unchecked(arg);
    }
    Ok(p)
}

/// Bernstein-Sato constant of `M_delta |SH|^delta = m_delta |SH|^(delta-2)`.
pub fn m_delta(rd: &RootData, delta: f64) -> f64 {
    let r = rd.rank;
    (1..=r)
        .map(|j| {
            (delta + rd.a * (j - 1) as f64)
                * (delta - 1.0 + rd.iota + rd.two_b + rd.a * (r - j) as f64)
        })
        .product()
}

/// Constant of `M_delta CH^delta = c CH^(delta-2)`; no `2b` and an overall `(-1)^r`.
pub fn cosh_constant(rd: &RootData, delta: f64) -> f64 {
    let r = rd.rank;
    let p: f64 = (1..=r)
        .map(|j| (delta + rd.a * (j - 1) as f64) * (delta - 1.0 + rd.iota + rd.a * (r - j) as f64))
        .product();
    if r % 2 == 1 {
        -p
    } else {
        p
    }
}

/// Normalization of the zeta distribution,
/// `Gamma_a(delta/2 + (a/2)(r-1) + 1) Gamma_a((delta - 1 + iota + 2b)/2 + (a/2)(r-1) + 1)`.
///
/// Satisfies `m_delta z_{delta-2} = 4^r z_delta`.
pub fn z_delta(rd: &RootData, delta: f64) -> Result<f64> {
    let shift = rd.a / 2.0 * (rd.rank - 1) as f64 + 1.0;
    let g1 = gindikin_gamma(rd.a, rd.rank, delta / 2.0 + shift)?;
    let g2 = gindikin_gamma(rd.a, rd.rank, (delta - 1.0 + rd.iota + rd.two_b) / 2.0 + shift)?;
    Ok(g1 * g2)
}

/// `c_0 = prod_{i<j} Gamma((a/2)(j-i+1)) / Gamma((a/2)(j-i))`.
pub fn c0(a: f64, r: usize) -> f64 {
    let mut p = 1.0;
    for i in 1..=r {
        for j in (i + 1)..=r {
            let d = (j - i) as f64;
            p *= gamma_unchecked(a / 2.0 * (d + 1.0)) / gamma_unchecked(a / 2.0 * d);
        }
    }
    p
}

/// The constants entering the Dirac identity and the inversion formulas.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DiracConstants {
    /// `c_1` with the Gindikin Gamma `Gamma_a` in front.
    pub c1: f64,
    /// `c_1` with a scalar Gamma in front.
    pub c1_scalar_gamma: f64,
    /// `2^(r delta0)`, the kernel prefactor of `R^t R`.
    pub radon_prefactor: f64,
    /// `2^(a r (r-1))`: Jacobian of `x = sh^2 t` on `prod_{i<j} |2 sh(t_i - t_j) 2 sh(t_i + t_j)|^a`.
    pub pair_jacobian: f64,
}

/// A named closed-form candidate for a measured constant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Candidate {
    pub name: &'static str,
    pub value: f64,
}

impl DiracConstants {
    /// Candidate values for `L(f)/f(0)` and for the inversion constant.
    pub fn candidates(&self) -> Vec<Candidate> {
        let mut out = alloc::vec![
            Candidate { name: "c1", value: self.c1 },
            Candidate { name: "c1 (scalar Gamma)", value: self.c1_scalar_gamma },
            Candidate { name: "2^(r delta0) c1", value: self.radon_prefactor * self.c1 },
            Candidate {
                name: "2^(r delta0) c1 (scalar Gamma)",
                value: self.radon_prefactor * self.c1_scalar_gamma,
            },
        ];
        dedup_candidates(&mut out);
        out
    }

    /// The candidates of [`Self::candidates`] with the pair Jacobian included.
    pub fn jacobian_candidates(&self) -> Vec<Candidate> {
        let j = self.pair_jacobian;
        let mut out = alloc::vec![
            Candidate { name: "2^(a r (r-1)) c1", value: j * self.c1 },
            Candidate { name: "2^(a r (r-1)) c1 (scalar Gamma)", value: j * self.c1_scalar_gamma },
            Candidate { name: "2^(a r (r-1) + r delta0) c1", value: j * self.radon_prefactor * self.c1 },
            Candidate {
                name: "2^(a r (r-1) + r delta0) c1 (scalar Gamma)",
                value: j * self.radon_prefactor * self.c1_scalar_gamma,
            },
        ];
        dedup_candidates(&mut out);
        out
    }
}

fn dedup_candidates(v: &mut Vec<Candidate>) {
    let mut out: Vec<Candidate> = Vec::new();
    for c in v.iter() {
        if !out.iter().any(|o| libm::fabs(o.value - c.value) <= 1e-12 * libm::fabs(c.value)) {
            out.push(*c);
        }
    }
    *v = out;
}

/// `c_1 = 2^(r(2b + 2 iota) + l r) r! G(x) prod_{k<l} prod_j (delta0 - 2k + a(j-1)) c_0`
/// with `x = (delta0 + iota + 2b - 1)/2 + (a/2)(r-1) + 1` and `G` either
/// `Gamma_a` or the scalar Gamma.
pub fn dirac_constants(dp: &DomainParams) -> Result<DiracConstants> {
    let r = dp.r as usize;
    let a = dp.a as f64;
    let l = dp.l as usize;
    let x = (dp.delta0 + dp.iota + dp.two_b - 1.0) / 2.0 + a / 2.0 * (r - 1) as f64 + 1.0;
    let mut prod = 1.0;
    for k in 0..l {
        for j in 1..=r {
            prod *= dp.delta0 - 2.0 * k as f64 + a * (j - 1) as f64;
        }
    }
    let fact: f64 = (1..=r).map(|k| k as f64).product();
    let pow2 = libm::exp2(r as f64 * (dp.two_b + 2.0 * dp.iota) + (l * r) as f64);
    let base = pow2 * fact * prod * c0(a, r);
    let c1 = base * gindikin_gamma(a, r, x)?;
    let c1_scalar_gamma = base * gamma(x)?;
    if c1 == 0.0 || c1_scalar_gamma == 0.0 {
        return Err(Error::InvalidParameter("c1 vanishes for these parameters".into()));
    }
    Ok(DiracConstants {
        c1,
        c1_scalar_gamma,
        radon_prefactor: libm::exp2(r as f64 * dp.delta0),
        pair_jacobian: libm::exp2(a * (r * (r - 1)) as f64),
    })
}

/// Helmholtz shifts of the rank-one inversion operator `prod_j (L + lambda_j)`.
pub fn lambda_j(dp: &DomainParams) -> Result<Vec<f64>> {
    if dp.r != 1 {
        return Err(Error::InvalidParameter("lambda_j is defined for rank one only".into()));
    }
    Ok(dp.lambdas.clone())
}

/// Radial density `prod_{alpha > 0} |2 sh alpha(t)|^{k_alpha}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeasureDensity {
    pub rank: usize,
    pub a: f64,
    pub two_b: f64,
    pub iota: f64,
}

/// Density of `dmu` on the radial coordinates of `X`.
pub fn measure_density(rd: &RootData) -> MeasureDensity {
    MeasureDensity { rank: rd.rank, a: rd.a, two_b: rd.two_b, iota: rd.iota }
}

/// Density of `dmu_0` on the sub-ball `y_0`: `2b` replaced by `a(r' - 2r)`.
pub fn measure_density_y0(dp: &DomainParams) -> MeasureDensity {
    MeasureDensity {
        rank: dp.r as usize,
        a: dp.a as f64,
        two_b: dp.a as f64 * (dp.r_prime as f64 - 2.0 * dp.r as f64),
        iota: dp.iota,
    }
}

#[inline]
fn abs_pow<R: Real>(x: R, k: f64) -> R {
    if k == 0.0 {
        return R::one();
    }
    let ax = x.abs();
    if ax.to_f64() == 0.0 {
        return R::zero();
    }
    if k == 1.0 {
        ax
    } else if k == 2.0 {
        ax * ax
    } else {
        (R::from_f64(k) * ax.ln()).exp()
    }
}

impl MeasureDensity {
    /// `|SH(t)|^delta` times the density, formed in log space so that large
    /// and small factors near the walls do not overflow separately.
    pub fn eval_weighted<R: Real>(&self, t: &[R], delta: f64) -> R {
        let two = R::from_f64(2.0);
        let mut acc = R::zero();
        let mut add = |x: R, k: f64| -> bool {
            if k == 0.0 {
                return true;
            }
            let ax = x.abs();
            if ax.to_f64() == 0.0 {
                return false;
            }
            acc += R::from_f64(k) * ax.ln();
            true
        };
        for (j, &tj) in t.iter().enumerate().take(self.rank) {
            let sh = tj.sinh();
            let ok = add(sh, delta)
                && add(two * sh, self.two_b)
                && add(two * (two * tj).sinh(), self.iota);
            if !ok {
                return if delta < 0.0 && self.two_b + self.iota == 0.0 { R::from_f64(f64::INFINITY) } else { R::zero() };
            }
            for &tk in &t[j + 1..self.rank] {
                if !(add(two * (tj - tk).sinh(), self.a) && add(two * (tj + tk).sinh(), self.a)) {
                    return R::zero();
                }
            }
        }
        acc.exp()
    }

    pub fn eval<R: Real>(&self, t: &[R]) -> R {
        let two = R::from_f64(2.0);
        let mut d = R::one();
        for (j, &tj) in t.iter().enumerate().take(self.rank) {
            d *= abs_pow(two * (two * tj).sinh(), self.iota);
            d *= abs_pow(two * tj.sinh(), self.two_b);
            for &tk in &t[j + 1..self.rank] {
                d *= abs_pow(two * (tj - tk).sinh(), self.a);
                d *= abs_pow(two * (tj + tk).sinh(), self.a);
            }
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rootsys::domain_params;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn gamma_known_values() {
        assert_eq!(gamma(4.0).unwrap(), 6.0);
        assert!(rel(gamma(0.5).unwrap(), core::f64::consts::PI.sqrt()) < 1e-15);
        assert!(rel(gamma(-1.5).unwrap(), 4.0 / 3.0 * core::f64::consts::PI.sqrt()) < 1e-14);
        assert!(matches!(gamma(-2.0), Err(Error::Pole { .. })));
        assert!(matches!(gamma(0.0), Err(Error::Pole { .. })));
    }

    #[test]
    fn gamma_matches_independent_libm_implementation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..2000 {
            let x: f64 = rng.gen_range(-12.0..40.0);
            if (x - x.round()).abs() < 1e-3 && x < 0.5 {
                continue;
            }
            let g = gamma(x).unwrap();
            assert!(rel(g, libm::tgamma(x)) < 1e-13, "x = {x}");
        }
    }

    #[test]
    fn gindikin_gamma_examples() {
        assert_eq!(gindikin_gamma(3.0, 1, 4.0).unwrap(), 6.0);
        assert_eq!(gindikin_gamma(2.0, 2, 3.0).unwrap(), 2.0);
        assert!(rel(gindikin_gamma(1.0, 2, 1.0).unwrap(), core::f64::consts::PI.sqrt()) < 1e-15);
        assert_eq!(gindikin_gamma(2.0, 2, 1.0), Err(Error::Pole { factor: 2, arg: 0.0 }));
    }

    #[test]
    fn m_delta_examples() {
        let rd = RootData::new(1, 0.0, 2.0, 1.0).unwrap();
        assert_eq!(m_delta(&rd, 2.0), 8.0);
        let rd = RootData::new(2, 2.0, 6.0, 1.0).unwrap();
        assert_eq!(m_delta(&rd, -6.0), 0.0);
    }

    #[test]
    fn m_delta_is_the_z_delta_ratio() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        while checked < 20 {
            let r = rng.gen_range(1..=3);
            let rd = RootData::new(
                r,
                rng.gen_range(0.1..5.0),
                rng.gen_range(0.1..5.0),
                rng.gen_range(0.1..5.0),
            )
            .unwrap();
            let delta: f64 = rng.gen_range(-1.0..6.0);
            let (Ok(z), Ok(zm)) = (z_delta(&rd, delta), z_delta(&rd, delta - 2.0)) else {
                continue;
            };
            let lhs = m_delta(&rd, delta) * zm;
            let rhs = libm::exp2(2.0 * r as f64) * z;
            assert!(rel(lhs, rhs) < 1e-10, "{rd:?} delta={delta}: {lhs} vs {rhs}");
            checked += 1;
        }
    }

    #[test]
    fn z_delta_examples() {
        let rd = RootData::new(1, 1.0, 2.0, 0.0).unwrap();
        let z0 = z_delta(&rd, 0.0).unwrap();
        assert!(rel(z0, core::f64::consts::PI.sqrt() / 2.0) < 1e-15);
        let flat = RootData::new(1, 1.0, 0.0, 0.0).unwrap();
        assert!(matches!(z_delta(&flat, -2.0), Err(Error::Pole { .. })));
    }

    #[test]
    fn z_delta_positive_on_convergent_window() {
        for &(two_b, iota) in &[(0.0, 0.0), (2.0, 0.0), (6.0, 1.0), (0.5, 3.0)] {
            let rd = RootData::new(1, 1.0, two_b, iota).unwrap();
            let lo = (-1.0 - iota - two_b).max(-2.0);
            for k in 1..200 {
                let d = lo + k as f64 * 0.05;
                assert!(z_delta(&rd, d).unwrap() > 0.0, "delta = {d}");
            }
        }
    }

    #[test]
    fn c0_examples() {
        assert_eq!(c0(2.0, 1), 1.0);
        assert_eq!(c0(2.0, 2), 1.0);
        assert!(rel(c0(1.0, 2), 1.0 / core::f64::consts::PI.sqrt()) < 1e-15);
    }

    #[test]
    fn c1_examples() {
        let dp = domain_params(1, 4, 1, 3).unwrap();
        assert_eq!(dp.constants.c1, -8.0);
        assert_eq!(dp.constants.radon_prefactor * dp.constants.c1, -4.0);
        let dp = domain_params(2, 5, 1, 2).unwrap();
        assert_eq!(dp.constants.c1, -3072.0);
        assert_eq!(dp.constants.c1_scalar_gamma, -3072.0);
        assert_eq!(dp.constants.candidates().len(), 2);
    }

    #[test]
    fn c1_sign_counts_negative_factors() {
        for (a, n, r, rp) in [(2, 5, 1, 2), (4, 4, 1, 2), (2, 4, 1, 3), (8, 3, 1, 2), (2, 7, 2, 4)] {
            let dp = domain_params(a, n, r, rp).unwrap();
            let mut neg = 0;
            for k in 0..dp.l {
                for j in 1..=r {
                    if dp.delta0 - 2.0 * k as f64 + a as f64 * ((j - 1) as f64) < 0.0 {
                        neg += 1;
                    }
                }
            }
            let expect = if neg % 2 == 0 { 1.0 } else { -1.0 };
            assert_eq!(dp.constants.c1.signum(), expect);
            assert!(dp.constants.c1 != 0.0);
        }
    }

    #[test]
    fn rank_two_pair_jacobian() {
        let dp = domain_params(2, 7, 2, 4).unwrap();
        assert_eq!(dp.constants.pair_jacobian, 16.0);
        assert_eq!(dp.constants.c1, 2_415_919_104.0);
    }

    #[test]
    fn lambda_examples() {
        assert_eq!(lambda_j(&domain_params(1, 4, 1, 3).unwrap()).unwrap(), alloc::vec![1.0]);
        assert_eq!(lambda_j(&domain_params(2, 5, 1, 2).unwrap()).unwrap(), alloc::vec![12.0]);
        assert_eq!(lambda_j(&domain_params(2, 4, 1, 3).unwrap()).unwrap(), alloc::vec![8.0, 8.0]);
        assert!(lambda_j(&domain_params(2, 7, 2, 4).unwrap()).is_err());
    }

    #[test]
    fn densities() {
        let rd = RootData::new(1, 3.0, 2.5, 1.5).unwrap();
        let t = 0.7f64;
        let d = measure_density(&rd).eval(&[t]);
        let expect = (2.0 * (2.0 * t).sinh()).powf(1.5) * (2.0 * t.sinh()).powf(2.5);
        assert!(rel(d, expect) < 1e-14);

        let dp = domain_params(2, 7, 2, 4).unwrap();
        let mu = measure_density(&dp.root_data());
        let mu0 = measure_density_y0(&dp);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ws = crate::weyl_elements(2).unwrap();
        for _ in 0..50 {
            let t = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let sh: f64 = t.iter().map(|x: &f64| x.sinh().abs()).product();
            let ratio = mu0.eval(&t) / mu.eval(&t);
            let expect = libm::exp2(2.0 * dp.delta0) * sh.powf(dp.delta0);
            assert!(rel(ratio, expect) < 1e-12);
            for w in &ws {
                assert!(rel(mu.eval(&w.act_vec(&t)), mu.eval(&t)) < 1e-14);
            }
        }
        // vanishes on walls with positive multiplicity
        assert_eq!(mu.eval(&[0.4, 0.4]), 0.0);
        assert_eq!(mu.eval(&[0.4, 0.0]), 0.0);
    }
}

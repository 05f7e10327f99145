//! Anisotropy exponents and intrinsic geometry.
//!
//! The exponent vector p = (p_1, ..., p_N) is kept in exact rational
//! arithmetic, as are the derived numbers
//!
//!   p̄  = N (Σ 1/p_i)^(-1),          p̄* = N p̄ / (N - p̄)  (only for p̄ < N),
//!   λ  = N (p̄ - 2) + p̄,             α  = N / λ,
//!   α_i = (N (p̄ - p_i) + p̄) / (λ p_i),
//!
//! so identities such as Σα_i = α hold with tolerance zero. Floats appear
//! only in the cached conversions used by the grid code.

use crate::numeric::{pow_rational, ratio_int, rational_to_f64};
use num_rational::BigRational;
use num_traits::Signed;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ParamsError {
    #[error("dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),
    #[error("exponent p_{index} = {value} violates the constraint p_i > 2")]
    NotGreaterThanTwo { index: usize, value: String },
    #[error("exponents not sorted: p_{i} = {pi} exceeds p_{j} = {pj}")]
    NotSorted {
        i: usize,
        pi: String,
        j: usize,
        pj: String,
    },
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
}

/// Non-fatal validation findings, reported in permissive mode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValidationWarning {
    /// p̄ ≥ N: the Sobolev exponent p̄* is undefined and the subcritical
    /// check is skipped (always the case for N = 2 with all p_i > 2).
    PstarUndefined,
    /// p̄ < N but p_N ≥ p̄*: the standing subcritical assumption fails.
    SupercriticalTail { index: usize },
    /// N (p̄ - p_i) + p̄ ≤ 0, i.e. α_i ≤ 0.
    NonpositiveAlpha { index: usize },
}

impl fmt::Display for ValidationWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValidationWarning::PstarUndefined => {
                write!(f, "pbar >= N: pstar undefined, subcritical check skipped")
            }
            ValidationWarning::SupercriticalTail { index } => {
                write!(f, "p_{index} >= pstar: subcritical assumption violated")
            }
            ValidationWarning::NonpositiveAlpha { index } => {
                write!(f, "alpha_{index} <= 0: N(pbar - p_i) + pbar is nonpositive")
            }
        }
    }
}

/// The anisotropy vector: N rational exponents with 2 < p_1 <= ... <= p_N.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PVector {
    p: Vec<BigRational>,
}

impl PVector {
    /// Validates the hard constraints (dimension, lower bound, sortedness).
    /// Subcritical violations are surfaced as warnings by [`AnisoExponents::warnings`].
    pub fn new(p: Vec<BigRational>) -> Result<Self, ParamsError> {
        if p.len() < 2 {
            return Err(ParamsError::DimensionTooSmall(p.len()));
        }
        let two = ratio_int(2);
        for (i, pi) in p.iter().enumerate() {
            if *pi <= two {
                return Err(ParamsError::NotGreaterThanTwo {
                    index: i + 1,
                    value: pi.to_string(),
                });
            }
        }
        for i in 1..p.len() {
            if p[i - 1] > p[i] {
                return Err(ParamsError::NotSorted {
                    i,
                    pi: p[i - 1].to_string(),
                    j: i + 1,
                    pj: p[i].to_string(),
                });
            }
        }
        Ok(Self { p })
    }

    /// Isotropic vector (q, ..., q) in dimension `n`.
    pub fn isotropic(n: usize, q: BigRational) -> Result<Self, ParamsError> {
        Self::new(vec![q; n])
    }

    pub fn dim(&self) -> usize {
        self.p.len()
    }

    pub fn entries(&self) -> &[BigRational] {
        &self.p
    }
}

/// All derived exponents of the scaling theory, exact and with f64 caches.
#[derive(Debug, Clone)]
pub struct AnisoExponents {
    p: PVector,
    pbar: BigRational,
    pstar: Option<BigRational>,
    lambda: BigRational,
    alpha: BigRational,
    alpha_i: Vec<BigRational>,
    // f64 caches
    p_f: Vec<f64>,
    pbar_f: f64,
    alpha_f: f64,
    alpha_i_f: Vec<f64>,
}

/// Computes p̄, p̄*, λ, α and the α_i in exact rational arithmetic.
pub fn derive_exponents(p: &PVector) -> AnisoExponents {
    let n = ratio_int(p.dim() as i64);
    let inv_sum: BigRational = p.entries().iter().map(|pi| pi.recip()).sum();
    let pbar = &n / &inv_sum;
    let pstar = if pbar < n {
        Some(&n * &pbar / (&n - &pbar))
    } else {
        None
    };
    let lambda = &n * (&pbar - ratio_int(2)) + &pbar;
    let alpha = &n / &lambda;
    let alpha_i: Vec<BigRational> = p
        .entries()
        .iter()
        .map(|pi| (&n * (&pbar - pi) + &pbar) / (&lambda * pi))
        .collect();

    let p_f = p.entries().iter().map(rational_to_f64).collect();
    let pbar_f = rational_to_f64(&pbar);
    let alpha_f = rational_to_f64(&alpha);
    let alpha_i_f = alpha_i.iter().map(rational_to_f64).collect();
    AnisoExponents {
        p: p.clone(),
        pbar,
        pstar,
        lambda,
        alpha,
        alpha_i,
        p_f,
        pbar_f,
        alpha_f,
        alpha_i_f,
    }
}

impl AnisoExponents {
    pub fn dim(&self) -> usize {
        self.p.dim()
    }

    pub fn pvector(&self) -> &PVector {
        &self.p
    }

    pub fn p(&self, i: usize) -> &BigRational {
        &self.p.entries()[i]
    }

    pub fn pbar(&self) -> &BigRational {
        &self.pbar
    }

    /// Undefined (None) when p̄ ≥ N.
    pub fn pstar(&self) -> Option<&BigRational> {
        self.pstar.as_ref()
    }

    pub fn lambda(&self) -> &BigRational {
        &self.lambda
    }

    pub fn alpha(&self) -> &BigRational {
        &self.alpha
    }

    pub fn alpha_i(&self, i: usize) -> &BigRational {
        &self.alpha_i[i]
    }

    pub fn alphas(&self) -> &[BigRational] {
        &self.alpha_i
    }

    pub fn p_f(&self, i: usize) -> f64 {
        self.p_f[i]
    }

    pub fn pbar_f(&self) -> f64 {
        self.pbar_f
    }

    pub fn alpha_f(&self) -> f64 {
        self.alpha_f
    }

    pub fn alpha_i_f(&self, i: usize) -> f64 {
        self.alpha_i_f[i]
    }

    /// Exponent (p_i - 2)/p_i of M in the intrinsic side lengths.
    pub fn side_m_exponent(&self, i: usize) -> BigRational {
        (self.p(i) - ratio_int(2)) / self.p(i)
    }

    /// Exponent p̄/p_i of ρ in the intrinsic side lengths.
    pub fn side_rho_exponent(&self, i: usize) -> BigRational {
        &self.pbar / self.p(i)
    }

    /// Permissive-mode findings: p̄* undefined, supercritical tail, α_i ≤ 0.
    pub fn warnings(&self) -> Vec<ValidationWarning> {
        let mut out = Vec::new();
        match &self.pstar {
            None => out.push(ValidationWarning::PstarUndefined),
            Some(ps) => {
                for (i, pi) in self.p.entries().iter().enumerate() {
                    if pi >= ps {
                        out.push(ValidationWarning::SupercriticalTail { index: i + 1 });
                    }
                }
            }
        }
        for (i, a) in self.alpha_i.iter().enumerate() {
            if !a.is_positive() {
                out.push(ValidationWarning::NonpositiveAlpha { index: i + 1 });
            }
        }
        out
    }
}

/// Time orientation of an intrinsic cylinder relative to its center time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// (t0 - ρ^p̄, t0]
    Backward,
    /// [t0, t0 + ρ^p̄)
    Forward,
    /// (t0 - ρ^p̄, t0 + ρ^p̄]
    Full,
}

/// Intrinsic anisotropic cylinder: spatial half-sides M^((p_i-2)/p_i) ρ^(p̄/p_i)
/// around the center, time extent ρ^p̄ per orientation.
#[derive(Debug, Clone)]
pub struct IntrinsicCylinder {
    pub center_x: Vec<f64>,
    pub center_t: f64,
    pub rho: f64,
    pub m: f64,
    pub orientation: Orientation,
}

/// Explicit interval data of a cylinder; spatial bounds are open, the time
/// interval carries its own half-open convention.
#[derive(Debug, Clone)]
pub struct CylinderBounds {
    pub center_x: Vec<f64>,
    pub half_sides: Vec<f64>,
    pub t_lo: f64,
    pub t_hi: f64,
    /// Lower endpoint excluded?
    pub t_lo_open: bool,
    /// Upper endpoint included?
    pub t_hi_closed: bool,
}

impl CylinderBounds {
    pub fn contains_space(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(&self.center_x)
            .zip(&self.half_sides)
            .all(|((xi, ci), hi)| (xi - ci).abs() < *hi)
    }

    pub fn contains_time(&self, t: f64) -> bool {
        let lo_ok = if self.t_lo_open {
            t > self.t_lo
        } else {
            t >= self.t_lo
        };
        let hi_ok = if self.t_hi_closed {
            t <= self.t_hi
        } else {
            t < self.t_hi
        };
        lo_ok && hi_ok
    }

    pub fn contains(&self, x: &[f64], t: f64) -> bool {
        self.contains_space(x) && self.contains_time(t)
    }
}

impl IntrinsicCylinder {
    pub fn new(
        center_x: Vec<f64>,
        center_t: f64,
        rho: f64,
        m: f64,
        orientation: Orientation,
    ) -> Result<Self, ParamsError> {
        if !(rho > 0.0) {
            return Err(ParamsError::NonPositive {
                name: "rho",
                value: rho,
            });
        }
        if !(m > 0.0) {
            return Err(ParamsError::NonPositive { name: "M", value: m });
        }
        Ok(Self {
            center_x,
            center_t,
            rho,
            m,
            orientation,
        })
    }

    /// Origin-centered cylinder.
    pub fn centered(
        dim: usize,
        rho: f64,
        m: f64,
        orientation: Orientation,
    ) -> Result<Self, ParamsError> {
        Self::new(vec![0.0; dim], 0.0, rho, m, orientation)
    }

    /// Half side-length along axis `i`: M^((p_i-2)/p_i) ρ^(p̄/p_i).
    pub fn half_side(&self, i: usize, exps: &AnisoExponents) -> f64 {
        pow_rational(self.m, &exps.side_m_exponent(i))
            * pow_rational(self.rho, &exps.side_rho_exponent(i))
    }

    /// Time depth ρ^p̄ (per side; the full cylinder spans twice this).
    pub fn time_depth(&self, exps: &AnisoExponents) -> f64 {
        pow_rational(self.rho, exps.pbar())
    }

    pub fn bounds(&self, exps: &AnisoExponents) -> CylinderBounds {
        let half_sides = (0..exps.dim()).map(|i| self.half_side(i, exps)).collect();
        let tau = self.time_depth(exps);
        let (t_lo, t_hi, t_lo_open, t_hi_closed) = match self.orientation {
            Orientation::Backward => (self.center_t - tau, self.center_t, true, true),
            Orientation::Forward => (self.center_t, self.center_t + tau, false, false),
            Orientation::Full => (self.center_t - tau, self.center_t + tau, true, true),
        };
        CylinderBounds {
            center_x: self.center_x.clone(),
            half_sides,
            t_lo,
            t_hi,
            t_lo_open,
            t_hi_closed,
        }
    }

    /// Volume of the spatial cube: 2^N ρ^N M^(N(p̄-2)/p̄).
    pub fn spatial_volume(&self, exps: &AnisoExponents) -> f64 {
        let n = exps.dim() as i64;
        let m_exp =
            ratio_int(n) * (exps.pbar() - ratio_int(2)) / exps.pbar();
        pow_rational(2.0, &ratio_int(n))
            * pow_rational(self.rho, &ratio_int(n))
            * pow_rational(self.m, &m_exp)
    }

    /// Space-time volume: spatial volume times the time extent
    /// (ρ^p̄ backward/forward, 2 ρ^p̄ full).
    pub fn volume(&self, exps: &AnisoExponents) -> f64 {
        let tau = self.time_depth(exps);
        let t_extent = match self.orientation {
            Orientation::Backward | Orientation::Forward => tau,
            Orientation::Full => 2.0 * tau,
        };
        self.spatial_volume(exps) * t_extent
    }

    pub fn contains(&self, exps: &AnisoExponents, x: &[f64], t: f64) -> bool {
        self.bounds(exps).contains(x, t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::ratio;

    fn exps(n: usize, num: i64, den: i64) -> AnisoExponents {
        derive_exponents(&PVector::isotropic(n, ratio(num, den)).unwrap())
    }

    #[test]
    fn rejects_bad_vectors() {
        assert!(matches!(
            PVector::new(vec![ratio(21, 10)]),
            Err(ParamsError::DimensionTooSmall(1))
        ));
        assert!(matches!(
            PVector::new(vec![ratio_int(2), ratio_int(3)]),
            Err(ParamsError::NotGreaterThanTwo { index: 1, .. })
        ));
        assert!(matches!(
            PVector::new(vec![ratio_int(4), ratio_int(3)]),
            Err(ParamsError::NotSorted { .. })
        ));
    }

    #[test]
    fn isotropic_21_tenths_in_dim_3() {
        let e = exps(3, 21, 10);
        assert_eq!(*e.pbar(), ratio(21, 10));
        assert_eq!(*e.lambda(), ratio(12, 5));
        assert_eq!(*e.alpha(), ratio(5, 4));
        for i in 0..3 {
            assert_eq!(*e.alpha_i(i), ratio(5, 12));
        }
        assert_eq!(e.pstar().unwrap(), &ratio_int(7));
        assert!(e.warnings().is_empty());
    }

    #[test]
    fn cubic_in_dim_2_has_no_pstar() {
        let e = exps(2, 3, 1);
        assert_eq!(*e.pbar(), ratio_int(3));
        assert_eq!(*e.lambda(), ratio_int(5));
        assert_eq!(*e.alpha(), ratio(2, 5));
        assert_eq!(*e.alpha_i(0), ratio(1, 5));
        assert!(e.pstar().is_none());
        assert_eq!(e.warnings(), vec![ValidationWarning::PstarUndefined]);
    }

    #[test]
    fn isotropic_collapse() {
        for (n, q) in [(2usize, ratio(5, 2)), (3, ratio(7, 2)), (4, ratio(11, 5))] {
            let e = derive_exponents(&PVector::isotropic(n, q).unwrap());
            let inv_lambda = e.lambda().recip();
            for i in 0..n {
                assert_eq!(*e.alpha_i(i), inv_lambda);
            }
        }
    }

    #[test]
    fn alpha_sum_is_alpha() {
        let p = PVector::new(vec![ratio(21, 10), ratio(11, 5), ratio(23, 10)]).unwrap();
        let e = derive_exponents(&p);
        let sum: BigRational = e.alphas().iter().sum();
        assert_eq!(sum, *e.alpha());
    }

    #[test]
    fn cylinder_volumes() {
        // Unit case: all intrinsic factors are 1.
        let e = exps(2, 3, 1);
        let c = IntrinsicCylinder::centered(2, 1.0, 1.0, Orientation::Backward).unwrap();
        assert_eq!(c.spatial_volume(&e), 4.0);
        assert_eq!(c.volume(&e), 4.0);

        // N=2, p=(3,3), rho=2, M=1: cube volume 2^2 * 2^2 = 16.
        let c = IntrinsicCylinder::centered(2, 2.0, 1.0, Orientation::Backward).unwrap();
        assert_eq!(c.spatial_volume(&e), 16.0);
        // backward cylinder adds rho^pbar = 8
        assert_eq!(c.volume(&e), 16.0 * 8.0);

        // M=1: volume independent of p.
        let e2 = exps(2, 7, 2);
        assert_eq!(c.spatial_volume(&e2), 16.0);
    }

    #[test]
    fn monotone_degeneration_in_m() {
        let e = exps(2, 3, 1);
        let mut last = 0.0;
        for k in 1..=6 {
            let m = k as f64 * 0.5;
            let c = IntrinsicCylinder::centered(2, 1.5, m, Orientation::Backward).unwrap();
            let v = c.spatial_volume(&e);
            assert!(v > last, "volume must increase with M");
            last = v;
        }
    }

    #[test]
    fn containment_follows_half_open_time() {
        let e = exps(2, 3, 1);
        let c = IntrinsicCylinder::centered(2, 1.0, 1.0, Orientation::Backward).unwrap();
        // center itself: backward time interval (-1, 0] includes 0
        assert!(c.contains(&e, &[0.0, 0.0], 0.0));
        // open lower endpoint
        assert!(!c.contains(&e, &[0.0, 0.0], -1.0));
        assert!(c.contains(&e, &[0.99, 0.0], 0.0));
        assert!(!c.contains(&e, &[1.0, 0.0], 0.0));

        let f = IntrinsicCylinder::centered(2, 1.0, 1.0, Orientation::Forward).unwrap();
        assert!(f.contains(&e, &[0.0, 0.0], 0.0));
        assert!(!f.contains(&e, &[0.0, 0.0], 1.0));

        let q = IntrinsicCylinder::centered(2, 1.0, 1.0, Orientation::Full).unwrap();
        assert!(q.contains(&e, &[0.0, 0.0], 1.0));
        assert!(!q.contains(&e, &[0.0, 0.0], -1.0));
    }

    #[test]
    fn rejects_nonpositive_geometry() {
        assert!(IntrinsicCylinder::centered(2, 0.0, 1.0, Orientation::Backward).is_err());
        assert!(IntrinsicCylinder::centered(2, 1.0, -2.0, Orientation::Backward).is_err());
    }
}

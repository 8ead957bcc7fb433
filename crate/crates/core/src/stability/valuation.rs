//! Divisorial valuations, log discrepancies and expected vanishing orders.
//!
//! On a log curve `(P^1, Σ c_i p_i)` a valuation is `c · ord_p`. Sections of
//! `-k(K + Δ)` form `O(m_k)` with `m_k = k (2 - Σ c_i)`; the basis adapted to
//! `p` (monomials in a coordinate centred at `p`) has orders `0, 1, ..., m_k`.
//!
//! On a toric Fano variety with reflexive polytope `P` a torus-invariant
//! valuation is given by a lattice vector `a` and the monomial `χ^m`,
//! `m ∈ kP`, vanishes to order `<m, a> - k min_P <y, a>`.

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::geometry::{lattice_points, LogSphere, SpherePoint, ToricFano};
use crate::{Error, Rational, Result};

/// The space a valuation lives on.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum NaSpace {
    Curve(LogSphere),
    Toric(ToricFano),
}

impl From<LogSphere> for NaSpace {
    fn from(s: LogSphere) -> Self {
        NaSpace::Curve(s)
    }
}

impl From<ToricFano> for NaSpace {
    fn from(p: ToricFano) -> Self {
        NaSpace::Toric(p)
    }
}

/// `scale · ord_point` on the sphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveValuation {
    point: SpherePoint,
    scale: Rational,
}

impl CurveValuation {
    pub fn new(point: SpherePoint, scale: Rational) -> Result<Self> {
        if !scale.is_positive() {
            return Err(Error::InvalidInput(format!("valuation scale must be positive, got {scale}")));
        }
        Ok(Self { point, scale })
    }

    /// `ord_p` with unit scale.
    pub fn ord(point: SpherePoint) -> Self {
        Self { point, scale: Rational::one() }
    }

    pub fn point(&self) -> SpherePoint {
        self.point
    }

    pub fn scale(&self) -> &Rational {
        &self.scale
    }
}

/// Monomial valuation `scale · v_a` for a nonzero lattice vector `a`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToricValuation {
    vector: Vec<i64>,
    scale: Rational,
}

impl ToricValuation {
    pub fn new(vector: Vec<i64>, scale: Rational) -> Result<Self> {
        if vector.iter().all(|&x| x == 0) {
            return Err(Error::InvalidInput("toric valuation vector must be nonzero".into()));
        }
        if !scale.is_positive() {
            return Err(Error::InvalidInput(format!("valuation scale must be positive, got {scale}")));
        }
        Ok(Self { vector, scale })
    }

    pub fn vector(&self) -> &[i64] {
        &self.vector
    }

    pub fn scale(&self) -> &Rational {
        &self.scale
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Valuation {
    Curve(CurveValuation),
    Toric(ToricValuation),
}

impl Valuation {
    pub fn scale(&self) -> &Rational {
        match self {
            Valuation::Curve(v) => &v.scale,
            Valuation::Toric(v) => &v.scale,
        }
    }

    /// The same valuation multiplied by a positive factor.
    pub fn rescaled(&self, factor: &Rational) -> Result<Self> {
        Ok(match self {
            Valuation::Curve(v) => Valuation::Curve(CurveValuation::new(v.point, &v.scale * factor)?),
            Valuation::Toric(v) => Valuation::Toric(ToricValuation::new(v.vector.clone(), &v.scale * factor)?),
        })
    }
}

impl From<CurveValuation> for Valuation {
    fn from(v: CurveValuation) -> Self {
        Valuation::Curve(v)
    }
}

impl From<ToricValuation> for Valuation {
    fn from(v: ToricValuation) -> Self {
        Valuation::Toric(v)
    }
}

/// A valuation on `X^N` given factorwise, `i_N(v_1, ..., v_N)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductValuation {
    factors: Vec<Valuation>,
}

impl ProductValuation {
    pub fn new(factors: Vec<Valuation>) -> Result<Self> {
        let first = factors
            .first()
            .ok_or_else(|| Error::InvalidInput("product valuation needs at least one factor".into()))?;
        let same_kind = factors.iter().all(|f| match (first, f) {
            (Valuation::Curve(_), Valuation::Curve(_)) => true,
            (Valuation::Toric(a), Valuation::Toric(b)) => a.vector.len() == b.vector.len(),
            _ => false,
        });
        if !same_kind {
            return Err(Error::InvalidInput("product valuation factors live on different spaces".into()));
        }
        Ok(Self { factors })
    }

    /// `i_N(v, ..., v)`.
    pub fn diagonal(v: Valuation, n: usize) -> Result<Self> {
        Self::new(vec![v; n])
    }

    pub fn factors(&self) -> &[Valuation] {
        &self.factors
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }
}

/// Whether the expected vanishing order is taken at a finite level or in the limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Vanishing {
    Limit,
    Level(u64),
}

/// The level-`k` divisor `Δ_k = (1/(k N_k)) Σ div(s_i)` of a basis adapted to a valuation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisDivisor {
    pub level: u64,
    /// Order of each basis element along the valuation, scale included.
    pub vanishing_orders: Vec<Rational>,
    /// Contribution `order / (k N_k)` of each element to the coefficient of `Δ_k`.
    pub mass_profile: Vec<Rational>,
}

impl BasisDivisor {
    /// `v(Δ_k)`, the level-`k` expected vanishing order.
    pub fn coefficient(&self) -> Rational {
        self.mass_profile.iter().fold(Rational::zero(), |acc, x| acc + x)
    }
}

pub(crate) fn int(n: i64) -> Rational {
    Rational::from_integer(n.into())
}

/// `2 - Σ c_i`, required positive.
pub(crate) fn fano_degree(space: &LogSphere) -> Result<Rational> {
    let v = space.anticanonical_degree();
    if !v.is_positive() {
        return Err(Error::InvalidInput(format!("pair is not log Fano: -(K+Δ) has degree {v}")));
    }
    Ok(v)
}

/// `m_k = k (2 - Σ c_i)`; `k` must clear the weight denominators.
pub(crate) fn curve_degree(space: &LogSphere, k: u64) -> Result<u64> {
    if k == 0 {
        return Err(Error::InvalidInput("level k must be at least 1".into()));
    }
    let v = fano_degree(space)?;
    if !space.level_clears_denominators(k) {
        return Err(Error::InvalidInput(format!(
            "level k = {k} does not clear the denominators of the log weights"
        )));
    }
    let m = v * int(k as i64);
    let m = m.to_integer();
    num_traits::ToPrimitive::to_u64(&m).ok_or_else(|| Error::InvalidInput("degree out of range".into()))
}

fn dot(a: &[i64], b: &[i64]) -> i64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_toric(v: &ToricValuation, p: &ToricFano) -> Result<()> {
    if v.vector.len() != p.dimension() {
        return Err(Error::DimensionMismatch { expected: p.dimension(), got: v.vector.len() });
    }
    Ok(())
}

fn mismatch() -> Error {
    Error::InvalidInput("valuation and space are of different kinds".into())
}

/// `A(v)`: `c (1 - Δ-coefficient at p)` on curves, `scale · φ(a)` on toric varieties
/// where `φ` is the fan function equal to 1 on primitive ray generators.
pub fn log_discrepancy(v: &Valuation, space: &NaSpace) -> Result<Rational> {
    match (v, space) {
        (Valuation::Curve(v), NaSpace::Curve(s)) => Ok(&v.scale * (Rational::one() - s.coefficient_at(&v.point))),
        (Valuation::Toric(v), NaSpace::Toric(p)) => {
            check_toric(v, p)?;
            if !p.is_reflexive() {
                return Err(Error::NonReflexive(
                    "the fan function is read off the polytope only when every facet has offset 1".into(),
                ));
            }
            // on a reflexive polytope φ(a) = -min_P <y, a>, positive on every nonzero a
            let phi = -p.min_pairing(&v.vector);
            if phi <= 0 {
                return Err(Error::InvalidInput("vector outside the support of the fan".into()));
            }
            Ok(&v.scale * int(phi))
        }
        _ => Err(mismatch()),
    }
}

/// The basis divisor of level `k` adapted to `v`.
pub fn basis_divisor(v: &Valuation, space: &NaSpace, k: u64) -> Result<BasisDivisor> {
    if k == 0 {
        return Err(Error::InvalidInput("level k must be at least 1".into()));
    }
    let orders: Vec<Rational> = match (v, space) {
        (Valuation::Curve(v), NaSpace::Curve(s)) => {
            let m = curve_degree(s, k)?;
            (0..=m).map(|e| &v.scale * int(e as i64)).collect()
        }
        (Valuation::Toric(v), NaSpace::Toric(p)) => {
            check_toric(v, p)?;
            let shift = k as i64 * p.min_pairing(&v.vector);
            lattice_points(p, k)
                .iter()
                .map(|m| &v.scale * int(dot(m, &v.vector) - shift))
                .collect()
        }
        _ => return Err(mismatch()),
    };
    let denom = int((k as usize * orders.len()) as i64);
    let mass_profile = orders.iter().map(|o| o / &denom).collect();
    Ok(BasisDivisor { level: k, vanishing_orders: orders, mass_profile })
}

/// `S(v)`, the expected order of vanishing, exactly or at level `k`.
pub fn expected_vanishing(v: &Valuation, space: &NaSpace, mode: Vanishing) -> Result<Rational> {
    match mode {
        Vanishing::Level(k) => Ok(basis_divisor(v, space, k)?.coefficient()),
        Vanishing::Limit => match (v, space) {
            (Valuation::Curve(v), NaSpace::Curve(s)) => Ok(&v.scale * fano_degree(s)? / int(2)),
            (Valuation::Toric(v), NaSpace::Toric(p)) => {
                check_toric(v, p)?;
                let mean = p
                    .barycenter()
                    .iter()
                    .zip(&v.vector)
                    .fold(Rational::zero(), |acc, (b, a)| acc + b * int(*a));
                Ok(&v.scale * (mean - int(p.min_pairing(&v.vector))))
            }
            _ => Err(mismatch()),
        },
    }
}

/// `F_NA(δ_v) = A(v) - S(v)`.
pub fn f_na(v: &Valuation, space: &NaSpace) -> Result<Rational> {
    Ok(log_discrepancy(v, space)? - expected_vanishing(v, space, Vanishing::Limit)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::LogPoint;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    fn three_halves() -> LogSphere {
        let pts = [SpherePoint::finite(2.0, 0.0), SpherePoint::finite(-2.0, 0.0), SpherePoint::Infinity];
        LogSphere::new(pts.iter().map(|&point| LogPoint { point, weight: q(1, 2) }).collect()).unwrap()
    }

    #[test]
    fn discrepancy_examples() {
        let round = NaSpace::Curve(LogSphere::round());
        let v = Valuation::Curve(CurveValuation::ord(SpherePoint::finite(0.3, 0.1)));
        assert_eq!(log_discrepancy(&v, &round).unwrap(), q(1, 1));
        let pair = NaSpace::Curve(three_halves());
        let at_log = Valuation::Curve(CurveValuation::ord(SpherePoint::Infinity));
        assert_eq!(log_discrepancy(&at_log, &pair).unwrap(), q(1, 2));
        let line = NaSpace::Toric(ToricFano::projective_line());
        let t = Valuation::Toric(ToricValuation::new(vec![1], q(1, 1)).unwrap());
        assert_eq!(log_discrepancy(&t, &line).unwrap(), q(1, 1));
    }

    #[test]
    fn level_sums_on_the_line() {
        // Σ_{i=0}^{2k} i = k (2k+1), divided by k N_k = k (2k+1)
        let round = NaSpace::Curve(LogSphere::round());
        let v = Valuation::Curve(CurveValuation::ord(SpherePoint::ZERO));
        for k in 1..=5u64 {
            let direct: i64 = (0..=2 * k as i64).sum();
            let s = expected_vanishing(&v, &round, Vanishing::Level(k)).unwrap();
            assert_eq!(s, q(direct, (k * (2 * k + 1)) as i64));
            assert_eq!(s, q(1, 1));
        }
    }

    #[test]
    fn football_expected_vanishing() {
        for (c, k) in [(q(3, 4), 4u64), (q(1, 2), 2), (q(2, 3), 3)] {
            let space = NaSpace::Curve(LogSphere::poles(c.clone(), c.clone()).unwrap());
            let v = Valuation::Curve(CurveValuation::ord(SpherePoint::ZERO));
            let limit = expected_vanishing(&v, &space, Vanishing::Limit).unwrap();
            assert_eq!(limit, q(1, 1) - &c);
            for mult in 1..=4 {
                let level = expected_vanishing(&v, &space, Vanishing::Level(k * mult)).unwrap();
                assert_eq!(level, limit);
            }
            assert!(expected_vanishing(&v, &space, Vanishing::Level(1)).is_err());
        }
    }

    #[test]
    fn toric_expected_vanishing_of_the_square() {
        // average of y_1 + 1 over [-1, 1]^2
        let sq = NaSpace::Toric(ToricFano::p1_times_p1());
        let v = Valuation::Toric(ToricValuation::new(vec![1, 0], q(1, 1)).unwrap());
        assert_eq!(expected_vanishing(&v, &sq, Vanishing::Limit).unwrap(), q(1, 1));
        for k in 1..=4 {
            assert_eq!(expected_vanishing(&v, &sq, Vanishing::Level(k)).unwrap(), q(1, 1));
        }
    }

    #[test]
    fn toric_level_sums_match_brute_force() {
        let plane = ToricFano::projective_plane();
        let a = [1i64, 2];
        let v = Valuation::Toric(ToricValuation::new(a.to_vec(), q(1, 1)).unwrap());
        let space = NaSpace::Toric(plane.clone());
        for k in 1..=4i64 {
            let mut total = 0i64;
            let mut count = 0i64;
            for y1 in -3 * k..=3 * k {
                for y2 in -3 * k..=3 * k {
                    if y1 >= -k && y2 >= -k && y1 + y2 <= k {
                        total += y1 * a[0] + y2 * a[1];
                        count += 1;
                    }
                }
            }
            let min = -3 * k; // vertex (2k, -k)·(1,2) = 0, (-k,2k) -> 3k, (-k,-k) -> -3k
            let expected = q(total - count * min, k * count);
            assert_eq!(expected_vanishing(&v, &space, Vanishing::Level(k as u64)).unwrap(), expected);
        }
    }

    #[test]
    fn f_na_examples() {
        let round = NaSpace::Curve(LogSphere::round());
        let v = Valuation::Curve(CurveValuation::ord(SpherePoint::ZERO));
        assert_eq!(f_na(&v, &round).unwrap(), q(0, 1));
        let pair = NaSpace::Curve(three_halves());
        let at_log = Valuation::Curve(CurveValuation::ord(SpherePoint::finite(2.0, 0.0)));
        assert_eq!(expected_vanishing(&at_log, &pair, Vanishing::Limit).unwrap(), q(1, 4));
        assert_eq!(f_na(&at_log, &pair).unwrap(), q(1, 4));
    }

    #[test]
    fn validation() {
        assert!(CurveValuation::new(SpherePoint::ZERO, q(0, 1)).is_err());
        assert!(ToricValuation::new(vec![0, 0], q(1, 1)).is_err());
        assert!(ToricValuation::new(vec![1, 0], q(-1, 2)).is_err());
        let mixed = ProductValuation::new(vec![
            Valuation::Curve(CurveValuation::ord(SpherePoint::ZERO)),
            Valuation::Toric(ToricValuation::new(vec![1], q(1, 1)).unwrap()),
        ]);
        assert!(mixed.is_err());
        assert!(ProductValuation::new(vec![]).is_err());
        let round = NaSpace::Curve(LogSphere::round());
        let t = Valuation::Toric(ToricValuation::new(vec![1], q(1, 1)).unwrap());
        assert!(log_discrepancy(&t, &round).is_err());
        let v = Valuation::Curve(CurveValuation::ord(SpherePoint::ZERO));
        assert!(expected_vanishing(&v, &round, Vanishing::Level(0)).is_err());
    }
}

//! Stability thresholds `δ_k` and `δ` over finite candidate sets of valuations.
//!
//! Curves: the log points and one generic point. Expected vanishing does not
//! depend on the point, so every non-log point gives the same ratio.
//! Toric: primitive lattice vectors in the box `[-R, R]^n`; ties are broken by
//! the l1 norm and then lexicographically.

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use super::valuation::{
    expected_vanishing, log_discrepancy, CurveValuation, NaSpace, ToricValuation, Valuation, Vanishing,
};
use crate::geometry::{LogSphere, SpherePoint, ToricFano};
use crate::{Error, Rational, Result};

pub const DEFAULT_BOX_RADIUS: i64 = 5;

/// A threshold value together with the valuation computing it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub value: Rational,
    pub witness: Valuation,
    /// Number of candidate valuations examined.
    pub candidates: usize,
    /// Set when every minimizer lies on the boundary of the toric search box.
    pub warning: Option<String>,
}

/// A point of the sphere that carries no log weight and is not a pole.
pub fn generic_point(space: &LogSphere) -> SpherePoint {
    (1..)
        .map(|i| SpherePoint::finite(i as f64, 0.0))
        .find(|p| space.log_points().iter().all(|lp| lp.point != *p))
        .expect("finitely many log points")
}

/// Log points followed by one generic point, all with unit scale.
pub fn curve_candidates(space: &LogSphere) -> Vec<Valuation> {
    space
        .log_points()
        .iter()
        .map(|lp| lp.point)
        .chain(std::iter::once(generic_point(space)))
        .map(|p| Valuation::Curve(CurveValuation::ord(p)))
        .collect()
}

/// Primitive vectors of `[-radius, radius]^n`, ordered by l1 norm then lexicographically.
pub fn toric_candidates(polytope: &ToricFano, radius: i64) -> Vec<Vec<i64>> {
    let n = polytope.dimension();
    let mut out = Vec::new();
    let mut cur = vec![-radius; n];
    loop {
        let g = cur.iter().fold(0i64, |g, &x| g.gcd(&x));
        if g == 1 {
            out.push(cur.clone());
        }
        let mut i = n;
        loop {
            if i == 0 {
                out.sort_by_key(|v| (v.iter().map(|x| x.abs()).sum::<i64>(), v.clone()));
                return out;
            }
            i -= 1;
            if cur[i] < radius {
                cur[i] += 1;
                break;
            }
            cur[i] = -radius;
        }
    }
}

fn minimize(space: &NaSpace, candidates: Vec<Valuation>, mode: Vanishing) -> Result<Threshold> {
    let count = candidates.len();
    let mut best: Option<(Rational, Valuation)> = None;
    for v in candidates {
        let s = expected_vanishing(&v, space, mode)?;
        if s <= Rational::from_integer(0.into()) {
            continue;
        }
        let ratio = log_discrepancy(&v, space)? / s;
        if best.as_ref().is_none_or(|(b, _)| ratio < *b) {
            best = Some((ratio, v));
        }
    }
    let (value, witness) = best.ok_or_else(|| Error::InvalidInput("no candidate with positive expected vanishing".into()))?;
    Ok(Threshold { value, witness, candidates: count, warning: None })
}

fn threshold(space: &NaSpace, mode: Vanishing, radius: i64) -> Result<Threshold> {
    match space {
        NaSpace::Curve(s) => minimize(space, curve_candidates(s), mode),
        NaSpace::Toric(p) => {
            if radius < 1 {
                return Err(Error::InvalidInput("search radius must be at least 1".into()));
            }
            let cands = toric_candidates(p, radius);
            let vals = cands
                .iter()
                .map(|a| ToricValuation::new(a.clone(), Rational::from_integer(1.into())).map(Valuation::Toric))
                .collect::<Result<Vec<_>>>()?;
            let mut t = minimize(space, vals.clone(), mode)?;
            let interior = vals.iter().any(|v| match v {
                Valuation::Toric(tv) if tv.vector().iter().all(|x| x.abs() < radius) => {
                    ratio_of(v, space, mode).is_ok_and(|r| r == t.value)
                }
                _ => false,
            });
            if !interior {
                t.warning = Some(format!(
                    "minimum attained on the boundary of the search box of radius {radius}: increase search radius"
                ));
            }
            Ok(t)
        }
    }
}

fn ratio_of(v: &Valuation, space: &NaSpace, mode: Vanishing) -> Result<Rational> {
    Ok(log_discrepancy(v, space)? / expected_vanishing(v, space, mode)?)
}

/// `δ_k^T`: the minimum of `A(v) / S_k(v)` over the candidate set, using
/// bases adapted to each candidate. An upper bound for `δ_k`.
pub fn delta_k(space: &NaSpace, k: u64) -> Result<Threshold> {
    delta_k_with_radius(space, k, DEFAULT_BOX_RADIUS)
}

pub fn delta_k_with_radius(space: &NaSpace, k: u64, radius: i64) -> Result<Threshold> {
    if k == 0 {
        return Err(Error::InvalidInput("level k must be at least 1".into()));
    }
    threshold(space, Vanishing::Level(k), radius)
}

/// `δ`: the minimum of `A(v) / S(v)` over the candidate set.
pub fn delta(space: &NaSpace) -> Result<Threshold> {
    delta_with_radius(space, DEFAULT_BOX_RADIUS)
}

pub fn delta_with_radius(space: &NaSpace, radius: i64) -> Result<Threshold> {
    threshold(space, Vanishing::Limit, radius)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::LogPoint;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    fn pair(weights: &[(SpherePoint, Rational)]) -> NaSpace {
        NaSpace::Curve(
            LogSphere::new(weights.iter().map(|(p, w)| LogPoint { point: *p, weight: w.clone() }).collect()).unwrap(),
        )
    }

    #[test]
    fn line_has_delta_one_at_every_level() {
        let round = NaSpace::Curve(LogSphere::round());
        for k in 1..=5 {
            assert_eq!(delta_k(&round, k).unwrap().value, q(1, 1));
        }
        let d = delta(&round).unwrap();
        assert_eq!(d.value, q(1, 1));
        assert_eq!(d.candidates, 1);
    }

    #[test]
    fn football_and_three_halves() {
        let foot = pair(&[(SpherePoint::ZERO, q(3, 4)), (SpherePoint::Infinity, q(3, 4))]);
        assert_eq!(delta_k(&foot, 4).unwrap().value, q(1, 1));
        let halves = pair(&[
            (SpherePoint::finite(2.0, 0.0), q(1, 2)),
            (SpherePoint::finite(-2.0, 0.0), q(1, 2)),
            (SpherePoint::Infinity, q(1, 2)),
        ]);
        let d = delta(&halves).unwrap();
        assert_eq!(d.value, q(2, 1));
        assert_eq!(d.witness, Valuation::Curve(CurveValuation::ord(SpherePoint::finite(2.0, 0.0))));
        assert_eq!(delta_k(&halves, 2).unwrap().value, q(2, 1));
    }

    #[test]
    fn toric_examples() {
        let sq = NaSpace::Toric(ToricFano::p1_times_p1());
        let d = delta(&sq).unwrap();
        assert_eq!(d.value, q(1, 1));
        assert!(d.warning.is_none());
        let ray = match &d.witness {
            Valuation::Toric(t) => t.vector().to_vec(),
            _ => unreachable!(),
        };
        assert_eq!(ray.iter().map(|x| x.abs()).sum::<i64>(), 1);
        let plane = NaSpace::Toric(ToricFano::projective_plane());
        assert_eq!(delta(&plane).unwrap().value, q(1, 1));
    }

    #[test]
    fn blow_up_of_the_plane() {
        // area 4, barycenter (1/12, -1/6); a = (0,-1) gives A = 1, S = 1 + 1/6
        let bl = ToricFano::new(vec![vec![-1, -1], vec![2, -1], vec![0, 1], vec![-1, 1]]).unwrap();
        assert_eq!(bl.barycenter(), &[q(1, 12), q(-1, 6)]);
        let d = delta(&NaSpace::Toric(bl)).unwrap();
        assert_eq!(d.value, q(6, 7));
        assert!(matches!(&d.witness, Valuation::Toric(t) if t.vector() == [0, -1]));
    }

    #[test]
    fn boundary_warning_for_tiny_box() {
        let bl = ToricFano::new(vec![vec![-1, -1], vec![2, -1], vec![0, 1], vec![-1, 1]]).unwrap();
        let d = delta_with_radius(&NaSpace::Toric(bl), 1).unwrap();
        assert!(d.warning.is_some());
    }

    #[test]
    fn primitive_candidates() {
        let c = toric_candidates(&ToricFano::p1_times_p1(), 2);
        assert!(c.iter().all(|v| v.iter().fold(0i64, |g, &x| g.gcd(&x)) == 1));
        assert_eq!(c.len(), 16);
        assert_eq!(c[0], vec![-1, 0]);
    }
}

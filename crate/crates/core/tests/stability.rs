use kelab_core::geometry::{LogPoint, LogSphere, SpherePoint, ToricFano};
use kelab_core::stability::*;
use kelab_core::Rational;
use num_traits::{One, Zero};
use proptest::prelude::*;

fn q(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

fn triple(ws: [Rational; 3]) -> LogSphere {
    let pts = [SpherePoint::ZERO, SpherePoint::finite(1.0, 0.0), SpherePoint::Infinity];
    LogSphere::new(pts.iter().zip(ws).map(|(&point, weight)| LogPoint { point, weight }).collect()).unwrap()
}

fn clearing_level(ws: &[Rational]) -> u64 {
    use num_integer::Integer;
    let d = ws.iter().fold(num_bigint::BigInt::one(), |acc, w| acc.lcm(w.denom()));
    num_traits::ToPrimitive::to_u64(&d).unwrap()
}

/// Brute-force level-k value: enumerate the candidate set with orders 0..m_k summed directly.
fn enumerated_delta_k(ws: &[Rational], k: u64) -> Rational {
    let degree = ws.iter().fold(q(2, 1), |acc, w| acc - w);
    let m = (&degree * q(k as i64, 1)).to_integer();
    let m: i64 = num_traits::ToPrimitive::to_i64(&m).unwrap();
    let s_k = q((0..=m).sum::<i64>(), k as i64 * (m + 1));
    ws.iter()
        .map(|w| q(1, 1) - w)
        .chain(std::iter::once(q(1, 1)))
        .map(|a| a / &s_k)
        .min()
        .unwrap()
}

#[test]
fn weight_triples_match_closed_form() {
    let sets = [
        [q(1, 2), q(1, 2), q(1, 2)],
        [q(1, 3), q(1, 2), q(2, 3)],
        [q(1, 4), q(1, 4), q(3, 4)],
        [q(1, 5), q(2, 5), q(3, 5)],
        [q(1, 2), q(2, 3), q(1, 6)],
    ];
    for ws in sets {
        let sum = ws.iter().fold(Rational::zero(), |a, w| a + w);
        let max = ws.iter().max().unwrap().clone();
        let closed = q(2, 1) * (q(1, 1) - max) / (q(2, 1) - sum);
        let space = NaSpace::Curve(triple(ws.clone()));
        assert_eq!(delta(&space).unwrap().value, closed);
        let k = clearing_level(&ws);
        for mult in 1..=3 {
            let d = delta_k(&space, k * mult).unwrap().value;
            assert_eq!(d, closed);
            assert_eq!(d, enumerated_delta_k(&ws, k * mult));
        }
    }
}

#[test]
fn line_delta_k_exact() {
    let line = NaSpace::Curve(LogSphere::round());
    let toric_line = NaSpace::Toric(ToricFano::projective_line());
    for k in 1..=5 {
        assert_eq!(delta_k(&line, k).unwrap().value, Rational::one());
        assert_eq!(delta_k(&toric_line, k).unwrap().value, Rational::one());
    }
}

#[test]
fn square_delta_witness_is_a_ray() {
    let t = delta(&NaSpace::Toric(ToricFano::p1_times_p1())).unwrap();
    assert_eq!(t.value, Rational::one());
    assert!(t.warning.is_none());
    match t.witness {
        Valuation::Toric(v) => assert!([[1, 0], [-1, 0], [0, 1], [0, -1]].iter().any(|r| v.vector() == r)),
        _ => panic!("toric witness expected"),
    }
}

#[test]
fn chain_ordering_on_line_and_pairs() {
    let pairs = [
        (LogSphere::round(), vec![1, 2, 3]),
        (triple([q(1, 2), q(1, 2), q(1, 2)]), vec![2]),
        (LogSphere::poles(q(1, 2), q(1, 2)).unwrap(), vec![2]),
        (LogSphere::poles(q(1, 3), q(2, 3)).unwrap(), vec![3]),
    ];
    for (space, levels) in pairs {
        for k in levels {
            let c = lct_chain(&space, k).unwrap();
            assert!(c.upper_bound <= c.delta_k, "k = {k}: {} > {}", c.upper_bound, c.delta_k);
            assert!(c.ordered);
        }
    }
}

#[test]
fn football_restriction_gap_vanishes() {
    let space = NaSpace::Curve(LogSphere::poles(q(3, 4), q(3, 4)).unwrap());
    let v = Valuation::Curve(CurveValuation::ord(SpherePoint::ZERO));
    let t = restriction_experiment(&space, &v, &(1..=40).collect::<Vec<_>>()).unwrap();
    assert_eq!(t.rows.len(), 10);
    assert_eq!(t.skipped_levels.len(), 30);
    assert!(t.rows.iter().all(|r| r.gap.is_zero() && r.limit == q(1, 4)));
    assert!(t.fitted_c.is_zero());
}

fn sample_valuations() -> Vec<(NaSpace, Valuation)> {
    let halves = triple([q(1, 2), q(1, 2), q(1, 2)]);
    vec![
        (NaSpace::Curve(LogSphere::round()), Valuation::Curve(CurveValuation::ord(SpherePoint::ZERO))),
        (NaSpace::Curve(halves.clone()), Valuation::Curve(CurveValuation::ord(SpherePoint::Infinity))),
        (NaSpace::Curve(halves), Valuation::Curve(CurveValuation::ord(SpherePoint::finite(3.0, 0.0)))),
        (
            NaSpace::Toric(ToricFano::projective_plane()),
            Valuation::Toric(ToricValuation::new(vec![1, -2], Rational::one()).unwrap()),
        ),
        (
            NaSpace::Toric(ToricFano::new(vec![vec![-1, -1], vec![2, -1], vec![0, 1], vec![-1, 1]]).unwrap()),
            Valuation::Toric(ToricValuation::new(vec![0, -1], Rational::one()).unwrap()),
        ),
    ]
}

#[test]
fn homogeneity_under_rescaling() {
    for (space, v) in sample_valuations() {
        let k = match &space {
            NaSpace::Curve(_) => 2,
            NaSpace::Toric(_) => 1,
        };
        let a = log_discrepancy(&v, &space).unwrap();
        let s = expected_vanishing(&v, &space, Vanishing::Limit).unwrap();
        let sk = expected_vanishing(&v, &space, Vanishing::Level(k)).unwrap();
        let f = f_na(&v, &space).unwrap();
        let basis = SectionBasis::adapted(&v, &space, k).unwrap();
        let e = na_energy_per_particle(&ProductValuation::diagonal(v.clone(), basis.len()).unwrap(), &basis).unwrap();
        for lambda in [q(1, 1), q(2, 1), q(7, 1)] {
            let w = v.rescaled(&lambda).unwrap();
            assert_eq!(log_discrepancy(&w, &space).unwrap(), &a * &lambda);
            assert_eq!(expected_vanishing(&w, &space, Vanishing::Limit).unwrap(), &s * &lambda);
            assert_eq!(expected_vanishing(&w, &space, Vanishing::Level(k)).unwrap(), &sk * &lambda);
            assert_eq!(f_na(&w, &space).unwrap(), &f * &lambda);
            let pv = ProductValuation::diagonal(w.clone(), basis.len()).unwrap();
            assert_eq!(na_energy_per_particle(&pv, &basis).unwrap(), &e * &lambda);
            let ratio = log_discrepancy(&w, &space).unwrap() / expected_vanishing(&w, &space, Vanishing::Limit).unwrap();
            assert_eq!(ratio, &a / &s);
        }
    }
}

#[test]
fn scale_two_restriction_doubles() {
    let space = NaSpace::Curve(LogSphere::round());
    let v = Valuation::Curve(CurveValuation::ord(SpherePoint::Infinity));
    let levels: Vec<u64> = (1..=6).collect();
    let t1 = restriction_experiment(&space, &v, &levels).unwrap();
    let t2 = restriction_experiment(&space, &v.rescaled(&q(2, 1)).unwrap(), &levels).unwrap();
    for (a, b) in t1.rows.iter().zip(&t2.rows) {
        assert_eq!(&a.energy * q(2, 1), b.energy);
        assert_eq!(&a.limit * q(2, 1), b.limit);
    }
}

#[test]
fn level_sums_approach_limit() {
    for (space, v) in sample_valuations() {
        let s = expected_vanishing(&v, &space, Vanishing::Limit).unwrap();
        let mut c = Rational::zero();
        for k in 1..=6u64 {
            if let NaSpace::Curve(_) = space {
                if k % 2 == 1 {
                    continue;
                }
            }
            let sk = expected_vanishing(&v, &space, Vanishing::Level(k)).unwrap();
            let gap = (&sk - &s) * q(k as i64, 1);
            let gap = if gap < Rational::zero() { -gap } else { gap };
            c = c.max(gap);
        }
        assert!(c <= q(2, 1), "level sums drift: k·|S_k - S| up to {c}");
    }
}

fn brute_force_assignment(costs: &[Vec<Rational>]) -> Rational {
    let n = costs.len();
    let mut perm: Vec<usize> = (0..n).collect();
    // Heap's algorithm over all n! permutations
    let mut c = vec![0usize; n];
    let eval = |p: &[usize]| p.iter().enumerate().fold(Rational::zero(), |acc, (i, &j)| acc + &costs[i][j]);
    let mut best = eval(&perm);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.min(eval(&perm));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    best
}

fn point_strategy() -> impl Strategy<Value = SpherePoint> {
    prop_oneof![
        Just(SpherePoint::ZERO),
        Just(SpherePoint::Infinity),
        Just(SpherePoint::finite(1.0, 0.0)),
        Just(SpherePoint::finite(-1.0, 0.0)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn assignment_matches_permutations(
        n in 1usize..=7,
        entries in proptest::collection::vec((0i64..40, 1i64..6), 49),
    ) {
        let costs: Vec<Vec<Rational>> = (0..n)
            .map(|i| (0..n).map(|j| { let (a, b) = entries[i * 7 + j]; q(a, b) }).collect())
            .collect();
        let (v, _) = min_cost_assignment(&costs).unwrap();
        prop_assert_eq!(v, brute_force_assignment(&costs));
    }

    #[test]
    fn product_energy_matches_permutations(
        k in 1u64..=3,
        pts in proptest::collection::vec(point_strategy(), 7),
        scales in proptest::collection::vec(1i64..5, 7),
        frame in point_strategy(),
    ) {
        let space = LogSphere::round();
        let basis = SectionBasis::curve(&space, k, frame).unwrap();
        let n = basis.len();
        prop_assume!(n <= 7);
        let factors: Vec<Valuation> = (0..n)
            .map(|j| Valuation::Curve(CurveValuation::new(pts[j], q(scales[j], 1)).unwrap()))
            .collect();
        let pv = ProductValuation::new(factors).unwrap();
        let costs: Vec<Vec<Rational>> = (0..n)
            .map(|i| pv.factors().iter().map(|v| basis.order(i, v).unwrap()).collect())
            .collect();
        let expected = brute_force_assignment(&costs) / q((n as u64 * k) as i64, 1);
        prop_assert_eq!(na_energy_per_particle(&pv, &basis).unwrap(), expected);
    }

    #[test]
    fn thresholds_are_scale_free(num in 1i64..6, den in 1i64..6, a0 in -3i64..=3, a1 in -3i64..=3) {
        prop_assume!(a0 != 0 || a1 != 0);
        let lambda = q(num, den);
        let space = NaSpace::Toric(ToricFano::projective_plane());
        let v = Valuation::Toric(ToricValuation::new(vec![a0, a1], Rational::one()).unwrap());
        let w = v.rescaled(&lambda).unwrap();
        for mode in [Vanishing::Limit, Vanishing::Level(2)] {
            let r1 = log_discrepancy(&v, &space).unwrap() / expected_vanishing(&v, &space, mode).unwrap();
            let r2 = log_discrepancy(&w, &space).unwrap() / expected_vanishing(&w, &space, mode).unwrap();
            prop_assert_eq!(r1, r2);
        }
    }
}

use kelab_core::geometry::LogSphere;
use kelab_core::variational::discrete::admissible_scaling;
use kelab_core::variational::*;
use kelab_core::Rational;
use proptest::prelude::*;

fn q(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

#[test]
fn round_sphere_fano_solution_is_flat() {
    let disc = Discretization::for_space(&LogSphere::round(), 201).unwrap();
    let sol = solve_ke(&disc, -1.0).unwrap();
    assert!(sol.potential.oscillation() < 1e-8);
    assert!(sol.residual < 1e-10);
    assert!(sol.reconstruction_error < 1e-8);
    assert!((sol.density.mass() - 1.0).abs() < 1e-10);
}

#[test]
fn canonical_side_solves_for_every_pair() {
    for (c0, c1) in [(q(1, 2), q(1, 2)), (q(3, 4), q(0, 1)), (q(1, 3), q(2, 3))] {
        let disc = Discretization::for_space(&LogSphere::poles(c0, c1).unwrap(), 201).unwrap();
        let sol = solve_ke(&disc, 1.0).unwrap();
        assert!(sol.residual < 1e-10);
        assert!((sol.density.mass() - 1.0).abs() < 1e-10);
    }
}

#[test]
fn report_is_consistent() {
    let disc = Discretization::for_space(&LogSphere::poles(q(1, 2), q(1, 2)).unwrap(), 101).unwrap();
    let sol = solve_ke(&disc, -0.5).unwrap();
    let r = FunctionalReport::evaluate(&sol.potential, -0.5).unwrap();
    assert!(r.energy >= 0.0 && r.entropy >= 0.0);
    assert!((r.free_energy - (-0.5 * r.energy + r.entropy)).abs() < 1e-12);
    assert!(r.mabuchi >= 0.5 * r.ding - 1e-12);
}

fn potential(disc: &std::sync::Arc<Discretization>, coeffs: &[f64]) -> Potential {
    let raw: Vec<f64> = disc
        .grid()
        .nodes()
        .iter()
        .map(|&t| coeffs.iter().enumerate().map(|(j, c)| c * ((j + 1) as f64 * std::f64::consts::PI * t).cos()).sum())
        .collect();
    let s = admissible_scaling(disc, &raw, 0.9);
    Potential::new(disc, raw.iter().map(|x| s * x).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn measures_from_potentials_have_unit_mass(coeffs in proptest::collection::vec(-1.0f64..1.0, 4)) {
        let disc = Discretization::for_space(&LogSphere::poles(q(1, 3), q(1, 2)).unwrap(), 81).unwrap();
        let u = potential(&disc, &coeffs);
        let mu = monge_ampere(&u).unwrap();
        prop_assert!((mu.mass() - 1.0).abs() < 1e-10);
        let back = solve_calabi_yau(&mu).unwrap();
        let diff: Vec<f64> = back.values().iter().zip(u.values()).map(|(a, b)| a - b).collect();
        let spread = diff.iter().cloned().fold(f64::MIN, f64::max) - diff.iter().cloned().fold(f64::MAX, f64::min);
        prop_assert!(spread < 1e-8);
    }

    #[test]
    fn mabuchi_dominates_ding(coeffs in proptest::collection::vec(-1.0f64..1.0, 4)) {
        let disc = Discretization::for_space(&LogSphere::round(), 81).unwrap();
        let u = potential(&disc, &coeffs);
        prop_assert!(mabuchi(&u, -1.0).unwrap() >= ding(&u, -1.0).unwrap() - 1e-12);
    }
}

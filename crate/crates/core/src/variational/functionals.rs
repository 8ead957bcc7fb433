//! Energy, entropy and the free-energy, Mabuchi and Ding functionals on grid functions.

use serde::Serialize;

use super::discrete::{monge_ampere, Density, Potential};
use crate::{Error, Result};

fn same_grid(a: &Density, b: &Density) -> Result<()> {
    if !std::sync::Arc::ptr_eq(a.discretization(), b.discretization()) {
        return Err(Error::InvalidInput("densities live on different grids".into()));
    }
    Ok(())
}

fn log_sum_exp(w: &[f64], x: impl Iterator<Item = f64>) -> f64 {
    let x: Vec<f64> = x.collect();
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + w.iter().zip(&x).map(|(w, v)| w * (v - m).exp()).sum::<f64>().ln()
}

/// The primitive of `MA`: `𝓔(u) = Σ m0_i u_i - uᵀKu / (2V)`, with `𝓔(0) = 0`.
pub fn script_energy(u: &Potential) -> f64 {
    let d = u.discretization();
    let lin: f64 = d.reference_ma_masses().iter().zip(u.values()).map(|(m, v)| m * v).sum();
    lin - d.stiffness_form(u.values()) / (2.0 * d.volume())
}

/// Pluricomplex energy `E(μ) = 𝓔(u_μ) - ∫ u_μ dμ`, which equals `u_μᵀ K u_μ / (2V)`.
pub fn energy_of_measure(mu: &Density) -> Result<f64> {
    let d = mu.discretization();
    let u = d.solve_potential(&mu.masses())?;
    Ok(d.stiffness_form(&u) / (2.0 * d.volume()))
}

/// Relative entropy `∫ log(μ/ν) dμ`, infinite when `μ` charges a node where `ν` vanishes.
pub fn entropy(mu: &Density, reference: &Density) -> Result<f64> {
    same_grid(mu, reference)?;
    let mut s = 0.0;
    for (m, r) in mu.masses().iter().zip(reference.masses()) {
        if *m > 0.0 {
            if r <= 0.0 {
                return Ok(f64::INFINITY);
            }
            s += m * (m / r).ln();
        }
    }
    Ok(s.max(0.0))
}

/// `F_β(μ) = β E(μ) + Ent(μ | dV)`.
pub fn free_energy(mu: &Density, beta: f64) -> Result<f64> {
    let ent = entropy(mu, &Density::reference(mu.discretization()))?;
    Ok(beta * energy_of_measure(mu)? + ent)
}

/// `Ent*(u) = -log ∫ e^{-u} dV`.
pub fn ent_star(u: &Potential) -> f64 {
    let d = u.discretization();
    -log_sum_exp(d.dv_masses(), u.values().iter().map(|v| -v))
}

/// Ding functional `D_β(u) = -𝓔(u) + (1/β) log ∫ e^{βu} dV`.
pub fn ding(u: &Potential, beta: f64) -> Result<f64> {
    if beta == 0.0 {
        return Err(Error::InvalidInput("the Ding functional needs beta != 0".into()));
    }
    let d = u.discretization();
    let lse = log_sum_exp(d.dv_masses(), u.values().iter().map(|v| beta * v));
    Ok(-script_energy(u) + lse / beta)
}

/// Mabuchi functional `M_β(u) = F_β(MA(u))`.
pub fn mabuchi(u: &Potential, beta: f64) -> Result<f64> {
    free_energy(&monge_ampere(u)?, beta)
}

/// Every functional evaluated at one potential and its Monge-Ampere measure.
#[derive(Debug, Clone, Serialize)]
pub struct FunctionalReport {
    pub beta: f64,
    pub script_energy: f64,
    pub energy: f64,
    pub entropy: f64,
    pub free_energy: f64,
    pub mabuchi: f64,
    pub ding: f64,
    pub ent_star: f64,
}

impl FunctionalReport {
    pub fn evaluate(u: &Potential, beta: f64) -> Result<Self> {
        let mu = monge_ampere(u)?;
        let energy = energy_of_measure(&mu)?;
        let ent = entropy(&mu, &Density::reference(u.discretization()))?;
        let free = beta * energy + ent;
        Ok(Self {
            beta,
            script_energy: script_energy(u),
            energy,
            entropy: ent,
            free_energy: free,
            mabuchi: free,
            ding: ding(u, beta)?,
            ent_star: ent_star(u),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::LogSphere;
    use crate::variational::discrete::{solve_calabi_yau, Discretization};
    use crate::Rational;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn football(p: i64, q: i64, n: usize) -> Arc<Discretization> {
        let w = Rational::new(p.into(), q.into());
        Discretization::for_space(&LogSphere::poles(w.clone(), w).unwrap(), n).unwrap()
    }

    fn bump(d: &Arc<Discretization>, amp: &[f64]) -> Potential {
        // smooth perturbation, scaled back into the admissible cone
        let t = d.grid().nodes().to_vec();
        let v = t
            .iter()
            .map(|&x| amp.iter().enumerate().map(|(k, a)| a * (std::f64::consts::PI * (k + 1) as f64 * x).cos()).sum())
            .collect::<Vec<f64>>();
        let s = crate::variational::discrete::admissible_scaling(d, &v, 0.9);
        Potential::new(d, v.iter().map(|x| s * x).collect()).unwrap()
    }

    #[test]
    fn entropy_of_halved_support_is_log_two() {
        // 42 uniform nodes: the first 21 lumped masses add up to exactly one half
        let d = Discretization::for_space(&LogSphere::round(), 42).unwrap();
        let vals: Vec<f64> = (0..42).map(|i| if i <= 20 { 2.0 } else { 0.0 }).collect();
        let mu = Density::new(&d, vals).unwrap();
        assert!((entropy(&mu, &Density::reference(&d)).unwrap() - 2f64.ln()).abs() < 1e-12);
        assert!(entropy(&Density::reference(&d), &mu).unwrap().is_infinite());
    }

    #[test]
    fn reference_values() {
        let d = football(3, 4, 101);
        let z = Potential::zero(&d);
        assert_eq!(script_energy(&z), 0.0);
        assert!(ent_star(&z).abs() < 1e-14);
        let dv = Density::reference(&d);
        assert!(energy_of_measure(&dv).unwrap() > 0.0);
        assert!(entropy(&dv, &dv).unwrap().abs() < 1e-15);
        let round = Discretization::for_space(&LogSphere::round(), 51).unwrap();
        assert!(energy_of_measure(&Density::reference(&round)).unwrap() < 1e-20);
    }

    #[test]
    fn differential_of_script_energy_is_ma() {
        let d = football(1, 3, 81);
        let u = bump(&d, &[0.05, -0.02, 0.01]);
        let v = bump(&d, &[0.0, 0.03, 0.02]);
        let eps = 1e-4;
        let f = |s: f64| {
            let vals = u.values().iter().zip(v.values()).map(|(a, b)| a + s * b).collect();
            script_energy(&Potential::new(&d, vals).unwrap())
        };
        let fd = (f(eps) - f(-eps)) / (2.0 * eps);
        let ma = d.ma_masses(u.values());
        let exact: f64 = ma.iter().zip(v.values()).map(|(m, b)| m * b).sum();
        assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1e-3), "{fd} {exact}");
    }

    #[test]
    fn differential_of_energy_is_minus_potential() {
        let d = football(1, 2, 81);
        let u = bump(&d, &[0.05, 0.02]);
        let mu = monge_ampere(&u).unwrap();
        let nu = monge_ampere(&bump(&d, &[-0.03, 0.04, 0.01])).unwrap();
        let eps = 1e-4;
        let mix = |s: f64| {
            let vals = mu.values().iter().zip(nu.values()).map(|(a, b)| a + s * (b - a)).collect();
            energy_of_measure(&Density::new(&d, vals).unwrap()).unwrap()
        };
        let fd = (mix(eps) - mix(-eps)) / (2.0 * eps);
        let um = solve_calabi_yau(&mu).unwrap();
        let exact: f64 = -nu
            .masses()
            .iter()
            .zip(mu.masses())
            .zip(um.values())
            .map(|((b, a), u)| (b - a) * u)
            .sum::<f64>();
        assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1e-3), "{fd} {exact}");
    }

    #[test]
    fn legendre_identity_at_a_potential() {
        let d = football(1, 4, 61);
        let u = bump(&d, &[0.04, -0.01]);
        let mu = monge_ampere(&u).unwrap();
        let lhs = energy_of_measure(&mu).unwrap();
        let pair: f64 = mu.masses().iter().zip(u.values()).map(|(m, v)| m * v).sum();
        assert!((lhs - (script_energy(&u) - pair)).abs() < 1e-12);
    }

    #[test]
    fn constants() {
        let d = football(1, 3, 41);
        let c = Potential::new(&d, vec![1.7; 41]).unwrap();
        assert!((script_energy(&c) - 1.7).abs() < 1e-12);
        assert!((ent_star(&c) - 1.7).abs() < 1e-12);
        for beta in [-1.0, -0.5, 0.3, 2.0] {
            assert!(ding(&c, beta).unwrap().abs() < 1e-12);
        }
        assert!(ding(&c, 0.0).is_err());
        // on a log pair MA(0) is not dV, so dV carries positive energy
        assert!(free_energy(&Density::reference(&d), 1.0).unwrap() > 0.0);
    }

    #[test]
    fn free_energy_of_reference_vanishes_on_the_round_sphere() {
        let d = Discretization::for_space(&LogSphere::round(), 61).unwrap();
        for beta in [-1.0, -0.3, 0.5, 4.0] {
            assert!(free_energy(&Density::reference(&d), beta).unwrap().abs() < 1e-14);
        }
    }

    #[test]
    fn log_moment_tends_to_mean() {
        let d = football(1, 2, 81);
        let u = bump(&d, &[0.3, -0.2]);
        let mean: f64 = d.dv_masses().iter().zip(u.values()).map(|(w, v)| w * v).sum();
        let at = |b: f64| ding(&u, b).unwrap() + script_energy(&u);
        assert!((at(1e-4) - mean).abs() < 1e-4);
        assert!((at(1e-5) - mean).abs() < (at(1e-4) - mean).abs());
    }

    #[test]
    fn jensen_for_ent_star() {
        let d = football(1, 4, 81);
        let u = bump(&d, &[0.3, 0.1, -0.2]);
        let mean: f64 = d.dv_masses().iter().zip(u.values()).map(|(w, v)| w * v).sum();
        assert!(ent_star(&u) <= mean + 1e-15);
    }

    #[test]
    fn script_energy_is_concave_along_segments() {
        let d = football(1, 2, 61);
        let u = bump(&d, &[0.2, 0.1]);
        let v = bump(&d, &[-0.1, 0.3, 0.05]);
        let at = |s: f64| {
            let vals = u.values().iter().zip(v.values()).map(|(a, b)| (1.0 - s) * a + s * b).collect();
            script_energy(&Potential::new(&d, vals).unwrap())
        };
        for k in 1..10 {
            let s = k as f64 / 10.0;
            assert!(at(s - 0.1) + at(s + 0.1) - 2.0 * at(s) <= 1e-10);
        }
    }

    #[test]
    fn free_energy_is_convex_along_mixtures_for_positive_beta() {
        let d = football(1, 3, 61);
        let a = monge_ampere(&bump(&d, &[0.2, -0.1])).unwrap();
        let b = monge_ampere(&bump(&d, &[-0.3, 0.2, 0.1])).unwrap();
        let at = |s: f64| {
            let vals = a.values().iter().zip(b.values()).map(|(x, y)| (1.0 - s) * x + s * y).collect();
            free_energy(&Density::new(&d, vals).unwrap(), 0.8).unwrap()
        };
        for k in 1..10 {
            let s = k as f64 / 10.0;
            assert!(at(s - 0.1) + at(s + 0.1) - 2.0 * at(s) >= -1e-10);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn energy_and_entropy_are_nonnegative(amp in proptest::collection::vec(-0.05f64..0.05, 1..5), c in 0usize..3) {
            let d = football([0, 1, 3][c], 4, 61);
            let mu = monge_ampere(&bump(&d, &amp)).unwrap();
            prop_assert!(energy_of_measure(&mu).unwrap() >= -1e-15);
            prop_assert!(entropy(&mu, &Density::reference(&d)).unwrap() >= 0.0);
        }

        #[test]
        fn mabuchi_dominates_ding_at_minus_one(amp in proptest::collection::vec(-0.05f64..0.05, 1..5)) {
            let d = football(1, 2, 61);
            let u = bump(&d, &amp);
            prop_assert!(mabuchi(&u, -1.0).unwrap() >= ding(&u, -1.0).unwrap() - 1e-12);
        }

        #[test]
        fn mabuchi_dominates_ding_at_minus_half(amp in proptest::collection::vec(-1.0f64..1.0, 1..5), c in 0usize..3, frac in 0.1f64..1.0) {
            let d = football([0, 1, 3][c], 4, 61);
            let u = bump(&d, &amp);
            let s = frac;
            let u = Potential::new(&d, u.values().iter().map(|x| s * x).collect()).unwrap();
            prop_assert!(mabuchi(&u, -0.5).unwrap() >= ding(&u, -0.5).unwrap() - 1e-12);
        }

        #[test]
        fn mabuchi_dominates_scaled_ding(amp in proptest::collection::vec(-0.05f64..0.05, 1..5), beta in -2.0f64..-0.1) {
            let d = football(1, 3, 61);
            let u = bump(&d, &amp);
            prop_assert!(mabuchi(&u, beta).unwrap() >= beta.abs() * ding(&u, beta).unwrap() - 1e-12);
        }

        #[test]
        fn functionals_are_gauge_invariant(amp in proptest::collection::vec(-0.05f64..0.05, 1..4), c in -5.0f64..5.0) {
            let d = football(1, 4, 41);
            let u = bump(&d, &amp);
            let v = u.shifted(c);
            prop_assert!((mabuchi(&u, 0.7).unwrap() - mabuchi(&v, 0.7).unwrap()).abs() < 1e-10);
            prop_assert!((ding(&u, -1.0).unwrap() - ding(&v, -1.0).unwrap()).abs() < 1e-10);
            prop_assert!((script_energy(&v) - script_energy(&u) - c).abs() < 1e-10);
        }
    }
}

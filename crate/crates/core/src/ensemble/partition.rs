//! Estimates of `-(1/N) log Z_N(β)`.
//!
//! [`log_partition`] integrates the mean energy along a path of inverse
//! temperatures, using `d/dβ (-(1/N) log Z_N) = <E^(N)>_β` and `Z_N(0) = 1`.
//! [`brute_force_log_partition`] evaluates `Z_N` by direct quadrature for
//! `N <= 3` and checks it against the Gibbs variational principle on the
//! tilted family `ν_s ∝ e^{-s N E^(N)} dV^{⊗N}`, which contains the Gibbs
//! measure at `s = β`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mcmc::{mcmc_sample, GibbsParams};
use super::slater::{pair_log_sum, BasisSpec};
use crate::geometry::gauss::gauss_legendre;
use crate::geometry::LogSphere;
use crate::{Error, Result};

/// Default number of inverse temperatures on the integration path.
pub const DEFAULT_LEGS: usize = 21;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leg {
    pub beta: f64,
    pub mean_energy: f64,
    pub stderr: f64,
    pub acceptance_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionEstimate {
    pub beta: f64,
    /// `-(1/N) log Z_N(β)`.
    pub neg_log_z_over_n: f64,
    pub stderr: f64,
    pub legs: Vec<Leg>,
}

/// Thermodynamic integration over `legs` equispaced inverse temperatures from 0 to `beta`.
///
/// Leg `i` runs the sampler with seed `params.seed + i`. The quadrature is
/// the Richardson extrapolation of the trapezoid rule (Simpson weights) when
/// the number of intervals is even, plain trapezoid otherwise.
pub fn log_partition(
    space: &LogSphere,
    basis: &BasisSpec,
    beta: f64,
    params: &GibbsParams,
    legs: usize,
) -> Result<PartitionEstimate> {
    if beta == 0.0 {
        return Ok(PartitionEstimate { beta, neg_log_z_over_n: 0.0, stderr: 0.0, legs: Vec::new() });
    }
    if legs < 2 {
        return Err(Error::InvalidInput("thermodynamic integration needs at least 2 legs".into()));
    }
    let betas: Vec<f64> = (0..legs).map(|i| beta * i as f64 / (legs - 1) as f64).collect();
    let runs: Vec<Result<Leg>> = betas
        .par_iter()
        .enumerate()
        .map(|(i, &b)| {
            let p = GibbsParams { beta: b, seed: params.seed.wrapping_add(i as u64), ..params.clone() };
            let out = mcmc_sample(space, basis, &p)
                .map_err(|e| Error::UnhealthyLeg { beta: b, reason: e.to_string() })?;
            let s = &out.stats;
            let mean = s.mean_energy();
            let se = s.energy_standard_error();
            // a flat target legitimately accepts everything, so only stuck chains fail
            if !(s.acceptance_rate > 0.01) {
                return Err(Error::UnhealthyLeg {
                    beta: b,
                    reason: format!("acceptance rate {:.4}", s.acceptance_rate),
                });
            }
            if !mean.is_finite() || !se.is_finite() {
                return Err(Error::UnhealthyLeg { beta: b, reason: "non-finite energy statistics".into() });
            }
            Ok(Leg { beta: b, mean_energy: mean, stderr: se, acceptance_rate: s.acceptance_rate })
        })
        .collect();
    let mut out = Vec::with_capacity(legs);
    for r in runs {
        out.push(r?);
    }
    let w = path_weights(legs, beta);
    let value = out.iter().zip(&w).map(|(l, w)| w * l.mean_energy).sum();
    let stderr = out.iter().zip(&w).map(|(l, w)| (w * l.stderr).powi(2)).sum::<f64>().sqrt();
    Ok(PartitionEstimate { beta, neg_log_z_over_n: value, stderr, legs: out })
}

/// Quadrature weights on `n` equispaced nodes of `[0, beta]`.
pub fn path_weights(n: usize, beta: f64) -> Vec<f64> {
    let h = beta / (n - 1) as f64;
    let intervals = n - 1;
    if intervals % 2 == 0 {
        // (4 T_h - T_2h) / 3
        (0..n)
            .map(|i| {
                let c = if i == 0 || i == n - 1 {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                c * h / 3.0
            })
            .collect()
    } else {
        (0..n).map(|i| if i == 0 || i == n - 1 { 0.5 * h } else { h }).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BruteForceResult {
    pub beta: f64,
    /// `-(1/N) log Z_N(β)` by quadrature.
    pub neg_log_z_over_n: f64,
    /// `inf_s F^(N)(ν_s)` over the tilted family.
    pub inf_free_energy: f64,
    /// Minimizing tilt `s`; equals `β` up to the line-search tolerance.
    pub minimizing_tilt: f64,
    /// `F^(N)` at the exact Gibbs measure (`s = β`).
    pub gibbs_free_energy: f64,
    /// `F^(N)(dV^{⊗N}) = β <E^(N)>_0`.
    pub product_reference_free_energy: f64,
    pub quadrature_nodes: usize,
}

/// Quadrature nodes `(weight, Σ_{i<j} log chord²)` for the integral over `X^N` against `dV^{⊗N}`.
struct Nodes {
    weights: Vec<f64>,
    pair_logs: Vec<f64>,
}

impl Nodes {
    /// `(Z_s, <E^(N)>_s)` for the tilted measure with coupling `s/k`.
    fn moments(&self, s: f64, k: f64, n: f64) -> (f64, f64) {
        let a = s / k;
        let mut z = 0.0;
        let mut e = 0.0;
        for (w, l) in self.weights.iter().zip(&self.pair_logs) {
            let f = w * (a * l).exp();
            z += f;
            e += f * (-l / (k * n));
        }
        (z, e / z)
    }
}

/// Gauss-Legendre nodes on `[0, 1]`, geometrically graded toward 0.
fn graded_unit_nodes(order: usize, levels: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(order);
    let mut out = Vec::new();
    let mut right = 1.0;
    for j in 0..=levels {
        let left = if j == levels { 0.0 } else { 0.5 * right };
        let half = 0.5 * (right - left);
        let mid = 0.5 * (right + left);
        for (xi, wi) in x.iter().zip(&w) {
            out.push((mid + half * xi, wi * half));
        }
        right = left;
    }
    out
}

/// Nodes for `∫ g(t) t^{-c0}(1-t)^{-c1} dt / B` with singular ends removed by substitution.
fn dv_nodes(c0: f64, c1: f64, order: usize, levels: usize) -> Vec<(f64, f64)> {
    let base = graded_unit_nodes(order, levels);
    let mut out = Vec::new();
    // lower half: t = σ^{1/(1-c0)}, σ in [0, 0.5^{1-c0}]
    let e0 = 1.0 - c0;
    let s_max = 0.5f64.powf(e0);
    for &(u, w) in &base {
        let s = u * s_max;
        let t = s.powf(1.0 / e0);
        out.push((t, w * s_max * (1.0 - t).powf(-c1) / e0));
    }
    let e1 = 1.0 - c1;
    let s_max = 0.5f64.powf(e1);
    for &(u, w) in &base {
        let s = u * s_max;
        let ct = s.powf(1.0 / e1);
        let t = 1.0 - ct;
        out.push((t, w * s_max * t.powf(-c0) / e1));
    }
    let z: f64 = out.iter().map(|(_, w)| w).sum();
    out.into_iter().map(|(t, w)| (t, w / z)).collect()
}

fn unit_from(t: f64, phi: f64) -> [f64; 3] {
    let r = 2.0 * (t * (1.0 - t)).max(0.0).sqrt();
    [r * phi.cos(), r * phi.sin(), 2.0 * t - 1.0]
}

fn build_nodes(space: &LogSphere, n: usize, a: f64, resolution: usize) -> Result<Nodes> {
    let (c0, c1) = space.pole_weights().ok_or_else(|| {
        Error::InvalidInput("brute-force quadrature needs log points at the poles only".into())
    })?;
    let order = resolution.max(4);
    let levels = 40;
    let n_phi = (2 * resolution).max(8);
    let phis: Vec<f64> =
        (0..n_phi).map(|j| 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / n_phi as f64).collect();
    let mut weights = Vec::new();
    let mut pair_logs = Vec::new();
    let round = c0 == 0.0 && c1 == 0.0;
    match (n, round) {
        (1, _) => {
            weights.push(1.0);
            pair_logs.push(0.0);
        }
        (2, true) => {
            // fix x1 at the south pole: chord² = t, the integrand is t^a dt
            let e = 1.0 + a.min(0.0);
            for (u, w) in graded_unit_nodes(order, levels) {
                let t = u.powf(1.0 / e);
                weights.push(w * u.powf(1.0 / e - 1.0) / e);
                pair_logs.push(t.ln());
            }
        }
        (3, true) => {
            let e = 1.0 + a.min(0.0);
            let ts: Vec<(f64, f64)> = graded_unit_nodes(order, levels)
                .into_iter()
                .map(|(u, w)| (u.powf(1.0 / e), w * u.powf(1.0 / e - 1.0) / e))
                .collect();
            for &(t2, w2) in &ts {
                let x2 = unit_from(t2, 0.0);
                for &(t3, w3) in &ts {
                    for &phi in &phis {
                        let x3 = unit_from(t3, phi);
                        weights.push(w2 * w3 / n_phi as f64);
                        pair_logs.push(t2.ln() + t3.ln() + crate::geometry::chord_sq(&x2, &x3).ln());
                    }
                }
            }
        }
        (2, false) => return Ok(product_nodes_two(c0, c1, order, 12, &phis)),
        (3, false) => {
            let ts = dv_nodes(c0, c1, order.min(6), 6);
            let n_phi = n_phi.min(12);
            let phis: Vec<f64> =
                (0..n_phi).map(|j| 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / n_phi as f64).collect();
            for &(t1, w1) in &ts {
                let x1 = unit_from(t1, 0.0);
                for &(t2, w2) in &ts {
                    for &p2 in &phis {
                        let x2 = unit_from(t2, p2);
                        for &(t3, w3) in &ts {
                            for &p3 in &phis {
                                let x3 = unit_from(t3, p3);
                                weights.push(w1 * w2 * w3 / (n_phi * n_phi) as f64);
                                pair_logs.push(pair_log_sum(&[x1, x2, x3]));
                            }
                        }
                    }
                }
            }
        }
        _ => unreachable!(),
    }
    Ok(Nodes { weights, pair_logs })
}

fn product_nodes_two(c0: f64, c1: f64, order: usize, levels: usize, phis: &[f64]) -> Nodes {
    let ts = dv_nodes(c0, c1, order, levels);
    let n_phi = phis.len() as f64;
    let mut weights = Vec::new();
    let mut pair_logs = Vec::new();
    for &(t1, w1) in &ts {
        let x1 = unit_from(t1, 0.0);
        for &(t2, w2) in &ts {
            for &phi in phis {
                weights.push(w1 * w2 / n_phi);
                pair_logs.push(crate::geometry::chord_sq(&x1, &unit_from(t2, phi)).ln());
            }
        }
    }
    Nodes { weights, pair_logs }
}

/// Direct quadrature of `Z_N(β)` for `N <= 3` on a pole-supported log pair.
///
/// `resolution` sets the Gauss-Legendre order per panel and the number of
/// angular nodes (`2 * resolution`).
pub fn brute_force_log_partition(
    space: &LogSphere,
    basis: &BasisSpec,
    beta: f64,
    resolution: usize,
) -> Result<BruteForceResult> {
    let n = basis.n_particles();
    if n > 3 {
        return Err(Error::OracleOnly(format!(
            "brute-force quadrature is limited to N <= 3, got N = {n}"
        )));
    }
    let k = basis.level() as f64;
    let a = beta / k;
    if n >= 2 && a <= -1.0 {
        return Err(Error::Instability(format!("pair coupling β/k = {a} makes Z_N infinite")));
    }
    let nodes = build_nodes(space, n, a, resolution)?;
    let nf = n as f64;
    let (z, _) = nodes.moments(beta, k, nf);
    let neg_log_z = if beta == 0.0 { 0.0 } else { -z.ln() / nf };
    let (_, e0) = nodes.moments(0.0, k, nf);
    let free = |s: f64| {
        let (zs, es) = nodes.moments(s, k, nf);
        (beta - s) * es - zs.ln() / nf
    };
    let lo = (beta - 1.5).max(-0.9 * k);
    let hi = beta + 1.5;
    let (s_star, f_star) = golden_section(free, lo, hi, 1e-10);
    let gibbs = free(beta);
    let (s_star, f_star) = if gibbs <= f_star { (beta, gibbs) } else { (s_star, f_star) };
    Ok(BruteForceResult {
        beta,
        neg_log_z_over_n: neg_log_z,
        inf_free_energy: f_star,
        minimizing_tilt: s_star,
        gibbs_free_energy: gibbs,
        product_reference_free_energy: if n == 1 { 0.0 } else { beta * e0 },
        quadrature_nodes: nodes.weights.len(),
    })
}

fn golden_section<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::histogram::Partition;
    use crate::ensemble::slater::BasisSign;
    use crate::Rational;

    fn pair() -> BasisSpec {
        BasisSpec::monomial(1, 1, BasisSign::Anticanonical).unwrap()
    }

    #[test]
    fn simpson_weights_integrate_cubics() {
        let w = path_weights(21, 2.0);
        let v: f64 = w.iter().enumerate().map(|(i, w)| w * (0.1 * i as f64).powi(3)).sum();
        assert!((v - 4.0).abs() < 1e-12);
        let w = path_weights(4, 1.0);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn beta_zero_is_exactly_zero() {
        let p = GibbsParams::default();
        let e = log_partition(&LogSphere::round(), &pair(), 0.0, &p, 21).unwrap();
        assert_eq!(e.neg_log_z_over_n, 0.0);
        let b = brute_force_log_partition(&LogSphere::round(), &pair(), 0.0, 16).unwrap();
        assert_eq!(b.neg_log_z_over_n, 0.0);
    }

    #[test]
    fn two_particles_on_the_round_sphere() {
        // chord² between two independent uniform points is uniform on [0,1]
        for beta in [0.5, 1.0, 2.0, -0.5] {
            let b = brute_force_log_partition(&LogSphere::round(), &pair(), beta, 16).unwrap();
            let exact = 0.5 * (1.0 + beta).ln();
            assert!((b.neg_log_z_over_n - exact).abs() < 1e-12, "beta = {beta}");
            assert!((b.gibbs_free_energy - exact).abs() < 1e-12);
            assert!(b.inf_free_energy >= exact - 1e-12);
            assert!((b.inf_free_energy - exact).abs() < 1e-9);
            assert!((b.minimizing_tilt - beta).abs() < 1e-3);
            assert!((b.product_reference_free_energy - beta * 0.5).abs() < 1e-10);
        }
    }

    #[test]
    fn product_route_agrees_with_reduced_route_on_round_sphere() {
        let phis: Vec<f64> = (0..16).map(|j| std::f64::consts::PI * (j as f64 + 0.5) / 8.0).collect();
        let nodes = product_nodes_two(0.0, 0.0, 8, 6, &phis);
        let (z, e) = nodes.moments(1.0, 1.0, 2.0);
        assert!((z - 0.5).abs() < 1e-12);
        // the energy integrand is log-singular on the diagonal
        assert!((e - 0.25).abs() < 1e-4, "{e}");
        let half = Rational::new(1.into(), 2.into());
        let foot = LogSphere::poles(half.clone(), half).unwrap();
        let r = brute_force_log_partition(&foot, &pair(), 1.0, 12).unwrap();
        assert!(r.neg_log_z_over_n.is_finite() && r.neg_log_z_over_n > 0.0);
        // ⟨E⟩_s carries the quadrature error of a log-singular integrand
        assert!(r.inf_free_energy >= r.neg_log_z_over_n - 1e-4);
        assert!(r.inf_free_energy <= r.gibbs_free_energy);
    }

    #[test]
    fn three_particles_round_sphere() {
        let b3 = BasisSpec::monomial(1, 2, BasisSign::Anticanonical).unwrap();
        // β = 1, k = 1: Z_3 = ∫∫ t2 t3 chord²(x2,x3), a polynomial integrand
        // with closed form E[t2 t3 (1 - x2·x3)/2] = 1/4 * 1/2 - E[t2 t3 x2·x3]/2;
        // E[t2 t3 x2·x3] = E[t z]^2 with z = 2t-1 uniform: E[t(2t-1)] = 1/6
        let exact = 0.125 - (1.0f64 / 6.0).powi(2) / 2.0;
        let r = brute_force_log_partition(&LogSphere::round(), &b3, 1.0, 16).unwrap();
        assert!((r.neg_log_z_over_n + exact.ln() / 3.0).abs() < 1e-10, "{}", r.neg_log_z_over_n);
    }

    #[test]
    fn refuses_large_n() {
        let b = BasisSpec::monomial(1, 3, BasisSign::Anticanonical).unwrap();
        let e = brute_force_log_partition(&LogSphere::round(), &b, 1.0, 8).unwrap_err();
        assert!(e.to_string().contains("oracle only"));
    }

    #[test]
    fn thermodynamic_integration_small_run() {
        let p = GibbsParams {
            sweeps: 4000,
            burn_in: 200,
            chains: 2,
            seed: 3,
            partition: Partition::new(2, 2).unwrap(),
            ..Default::default()
        };
        let e = log_partition(&LogSphere::round(), &pair(), 1.0, &p, 5).unwrap();
        let exact = 0.5 * 2f64.ln();
        assert!((e.neg_log_z_over_n - exact).abs() < 5.0 * e.stderr + 5e-3, "{e:?}");
    }
}

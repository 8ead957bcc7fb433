//! Slater determinants of section bases evaluated at configurations.
//!
//! For the monomial basis `1, z, ..., z^m` of `O(m)` with its Fubini-Study
//! metric, the squared norm of the Vandermonde determinant is
//!
//! ```text
//! |det(z_j^i)|^2 Π_j (1+|z_j|^2)^{-m} = Π_{i<j} chord²(x_i, x_j)
//! ```
//!
//! because every point takes part in exactly `m = N - 1` pairs. This pair form
//! costs `O(N)` per single-point update and never overflows. The dense route
//! evaluates an arbitrary basis in unit homogeneous coordinates and takes the
//! log-modulus of the pivoted QR diagonal.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::geometry::{chord_sq, LogSphere, ReferenceData, SpherePoint};
use crate::{Error, Rational, Result};

/// Which bundle the sections belong to relative to the canonical bundle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BasisSign {
    /// Sections of `k(K + Δ)`.
    Canonical,
    /// Sections of `-k(K + Δ)`.
    Anticanonical,
}

/// Monomial basis `z^e, e in exponents` of `O(m)` at level `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    level: u64,
    sign: BasisSign,
    degree: u64,
    exponents: Vec<u64>,
}

impl BasisSpec {
    /// Full monomial basis of `O(degree)` used at level `k`.
    pub fn monomial(level: u64, degree: u64, sign: BasisSign) -> Result<Self> {
        if level == 0 {
            return Err(Error::InvalidInput("level k must be positive".into()));
        }
        Ok(Self { level, sign, degree, exponents: (0..=degree).collect() })
    }

    /// Basis of `∓k(K + Δ)` on a log sphere; `k` must clear the weight denominators.
    pub fn for_space(space: &LogSphere, level: u64, sign: BasisSign) -> Result<Self> {
        if level == 0 {
            return Err(Error::InvalidInput("level k must be positive".into()));
        }
        if !space.level_clears_denominators(level) {
            return Err(Error::InvalidInput(format!(
                "level k = {level} does not clear the denominators of the log weights"
            )));
        }
        let v = space.anticanonical_degree();
        let deg = match sign {
            BasisSign::Anticanonical => v,
            BasisSign::Canonical => -v,
        } * Rational::from_integer(level.into());
        if deg < Rational::from_integer(0.into()) {
            return Err(Error::InvalidInput(format!(
                "bundle at level {level} has negative degree {deg}: no sections"
            )));
        }
        let m: u64 = num_traits::ToPrimitive::to_u64(&deg.to_integer()).expect("small degree");
        Self::monomial(level, m, sign)
    }

    pub fn level(&self) -> u64 {
        self.level
    }

    pub fn sign(&self) -> BasisSign {
        self.sign
    }

    /// Degree `m_k` of the bundle.
    pub fn degree(&self) -> u64 {
        self.degree
    }

    pub fn exponents(&self) -> &[u64] {
        &self.exponents
    }

    /// Number of particles `N = m_k + 1`.
    pub fn n_particles(&self) -> usize {
        self.exponents.len()
    }
}

/// An ordered tuple of points on the unit sphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub points: Vec<[f64; 3]>,
}

impl Configuration {
    pub fn new(points: Vec<[f64; 3]>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("configuration needs at least one point".into()));
        }
        if points.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("configuration has non-finite coordinates".into()));
        }
        Ok(Self { points })
    }

    pub fn from_sphere_points(points: &[SpherePoint]) -> Result<Self> {
        Self::new(points.iter().map(SpherePoint::to_unit).collect())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// `Σ_{i<j} log chord²(x_i, x_j)`; `-inf` on collisions.
pub fn pair_log_sum(points: &[[f64; 3]]) -> f64 {
    let mut s = 0.0;
    for (i, x) in points.iter().enumerate() {
        for y in &points[i + 1..] {
            s += chord_sq(x, y).ln();
        }
    }
    s
}

fn check_dims(config: &Configuration, basis: &BasisSpec, reference: &ReferenceData) -> Result<()> {
    if config.len() != basis.n_particles() {
        return Err(Error::DimensionMismatch { expected: basis.n_particles(), got: config.len() });
    }
    if reference.bundle_degree() != basis.degree() {
        return Err(Error::InvalidInput(format!(
            "reference metric is on O({}) but the basis spans sections of O({})",
            reference.bundle_degree(),
            basis.degree()
        )));
    }
    Ok(())
}

/// `log ‖det S^(k)(x_1..x_N)‖²` for the monomial basis and Fubini-Study metric.
pub fn slater_log_norm(config: &Configuration, basis: &BasisSpec, reference: &ReferenceData) -> Result<f64> {
    check_dims(config, basis, reference)?;
    Ok(pair_log_sum(&config.points))
}

/// `E^(N) = -(1/(kN)) log ‖det S^(k)‖²`; `+inf` on collisions.
pub fn energy_per_particle(config: &Configuration, basis: &BasisSpec, reference: &ReferenceData) -> Result<f64> {
    let l = slater_log_norm(config, basis, reference)?;
    Ok(-l / (basis.level() as f64 * basis.n_particles() as f64))
}

/// Unit homogeneous coordinates `(Z0, Z1)` with `|Z0|² + |Z1|² = 1` and `z = Z1/Z0`.
fn homogeneous(x: &[f64; 3]) -> (Complex64, Complex64) {
    let t = (0.5 * (1.0 + x[2])).clamp(0.0, 1.0);
    let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
    let phase = if r > 0.0 { Complex64::new(x[0] / r, x[1] / r) } else { Complex64::new(1.0, 0.0) };
    (Complex64::new((1.0 - t).sqrt(), 0.0), phase * t.sqrt())
}

/// Dense evaluation of `log ‖det(s_i(x_j))‖²` for the basis `s_i = Σ_e A[i,e] z^e`
/// of `O(m)`, where `A` is `N x N` over the exponents of `basis`.
///
/// With `A = I` this agrees with [`slater_log_norm`].
pub fn slater_log_norm_dense(
    config: &Configuration,
    basis: &BasisSpec,
    reference: &ReferenceData,
    change: Option<&DMatrix<Complex64>>,
) -> Result<f64> {
    check_dims(config, basis, reference)?;
    let n = basis.n_particles();
    let m = basis.degree() as i32;
    let mut eval = DMatrix::<Complex64>::zeros(n, n);
    for (j, x) in config.points.iter().enumerate() {
        let (z0, z1) = homogeneous(x);
        for (i, &e) in basis.exponents().iter().enumerate() {
            let e = e as i32;
            eval[(i, j)] = z1.powi(e) * z0.powi(m - e);
        }
    }
    let mat = match change {
        Some(a) => {
            if a.nrows() != n || a.ncols() != n {
                return Err(Error::DimensionMismatch { expected: n, got: a.nrows() });
            }
            a * eval
        }
        None => eval,
    };
    let qr = mat.col_piv_qr();
    let r = qr.r();
    let mut acc = 0.0;
    // column pivoting orders |R_ii| decreasingly; relative underflow means rank loss
    let cutoff = r[(0, 0)].norm() * f64::EPSILON * n as f64;
    for i in 0..n {
        let d = r[(i, i)].norm();
        if d <= cutoff {
            return Ok(f64::NEG_INFINITY);
        }
        acc += 2.0 * d.ln();
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_unit(rng: &mut ChaCha8Rng) -> [f64; 3] {
        loop {
            let v: [f64; 3] = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            if n > 0.1 && n <= 1.0 {
                return [v[0] / n, v[1] / n, v[2] / n];
            }
        }
    }

    fn setup(m: u64) -> (BasisSpec, ReferenceData) {
        (
            BasisSpec::monomial(1, m, BasisSign::Anticanonical).unwrap(),
            ReferenceData::new(&LogSphere::round(), m),
        )
    }

    #[test]
    fn two_point_hand_value() {
        let (b, r) = setup(1);
        let c = Configuration::from_sphere_points(&[SpherePoint::ZERO, SpherePoint::finite(1.0, 0.0)]).unwrap();
        let l = slater_log_norm(&c, &b, &r).unwrap();
        assert!((l + 2f64.ln()).abs() < 1e-14);
        let e = energy_per_particle(&c, &b, &r).unwrap();
        assert!((e - 0.5 * 2f64.ln()).abs() < 1e-14);
        assert!((e - 0.34657359027997264).abs() < 1e-14);
    }

    #[test]
    fn collisions_are_infinite() {
        let (b, r) = setup(2);
        let p = SpherePoint::finite(0.3, -0.2);
        let c = Configuration::from_sphere_points(&[p, p, SpherePoint::Infinity]).unwrap();
        assert_eq!(slater_log_norm(&c, &b, &r).unwrap(), f64::NEG_INFINITY);
        assert_eq!(energy_per_particle(&c, &b, &r).unwrap(), f64::INFINITY);
        assert_eq!(slater_log_norm_dense(&c, &b, &r, None).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn dimension_mismatch() {
        let (b, r) = setup(2);
        let c = Configuration::new(vec![[0.0, 0.0, 1.0]]).unwrap();
        assert!(matches!(slater_log_norm(&c, &b, &r), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn dense_route_matches_pair_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for m in [1u64, 3, 8, 20] {
            let (b, r) = setup(m);
            let pts: Vec<[f64; 3]> = (0..=m).map(|_| random_unit(&mut rng)).collect();
            let c = Configuration::new(pts).unwrap();
            let a = slater_log_norm(&c, &b, &r).unwrap();
            let d = slater_log_norm_dense(&c, &b, &r, None).unwrap();
            assert!((a - d).abs() < 1e-9 * (1.0 + a.abs()), "m = {m}: {a} vs {d}");
        }
    }

    #[test]
    fn pair_route_is_stable_for_large_n() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (b, r) = setup(600);
        let c = Configuration::new((0..601).map(|_| random_unit(&mut rng)).collect()).unwrap();
        assert!(energy_per_particle(&c, &b, &r).unwrap().is_finite());
    }

    #[test]
    fn basis_change_shifts_energy_by_a_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (b, r) = setup(5);
        let a = DMatrix::<Complex64>::from_fn(6, 6, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let mk = |rng: &mut ChaCha8Rng| Configuration::new((0..6).map(|_| random_unit(rng)).collect()).unwrap();
        let (x, y) = (mk(&mut rng), mk(&mut rng));
        let plain = slater_log_norm(&x, &b, &r).unwrap() - slater_log_norm(&y, &b, &r).unwrap();
        let changed = slater_log_norm_dense(&x, &b, &r, Some(&a)).unwrap()
            - slater_log_norm_dense(&y, &b, &r, Some(&a)).unwrap();
        assert!((plain - changed).abs() < 1e-9);
    }

    #[test]
    fn level_divisibility_enforced() {
        let s = LogSphere::poles(Rational::new(3.into(), 4.into()), Rational::new(3.into(), 4.into())).unwrap();
        assert!(BasisSpec::for_space(&s, 2, BasisSign::Anticanonical).is_err());
        let b = BasisSpec::for_space(&s, 4, BasisSign::Anticanonical).unwrap();
        assert_eq!(b.degree(), 2);
        assert!(BasisSpec::for_space(&s, 4, BasisSign::Canonical).is_err());
    }

    proptest! {
        #[test]
        fn permutation_invariance(seed in 0u64..1000, m in 1u64..12, swap in 0usize..100) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (b, r) = setup(m);
            let mut pts: Vec<[f64; 3]> = (0..=m).map(|_| random_unit(&mut rng)).collect();
            let before = slater_log_norm(&Configuration::new(pts.clone()).unwrap(), &b, &r).unwrap();
            let i = swap % pts.len();
            pts.swap(0, i);
            pts.reverse();
            let after = slater_log_norm(&Configuration::new(pts).unwrap(), &b, &r).unwrap();
            prop_assert!((before - after).abs() < 1e-10 * (1.0 + before.abs()));
        }
    }
}

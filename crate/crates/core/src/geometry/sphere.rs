//! Points on the Riemann sphere, log pairs and the reference volume form.
//!
//! Conventions used throughout the crate:
//!
//! * `z = 0` is the south pole `(0, 0, -1)`, `z = inf` the north pole.
//! * The moment coordinate is `t = |z|^2 / (1 + |z|^2) = (1 + x_3) / 2`, so the
//!   Fubini-Study area form normalized to mass one is `dt dθ / 2π`.
//! * The chordal distance used for log-pair weights and pair interactions is
//!   `chord²(x, y) = |x - y|² / 4`, which equals `|z - w|² / ((1+|z|²)(1+|w|²))`.

use std::f64::consts::PI;

use num_complex::Complex64;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::gauss;
use crate::{Error, Rational, Result};

/// A point of the Riemann sphere in an affine chart, or the point at infinity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SpherePoint {
    Finite(Complex64),
    Infinity,
}

impl SpherePoint {
    pub const ZERO: SpherePoint = SpherePoint::Finite(Complex64 { re: 0.0, im: 0.0 });

    pub fn finite(re: f64, im: f64) -> Self {
        SpherePoint::Finite(Complex64::new(re, im))
    }

    /// Unit vector in R^3 (inverse stereographic projection).
    pub fn to_unit(&self) -> [f64; 3] {
        match self {
            SpherePoint::Infinity => [0.0, 0.0, 1.0],
            SpherePoint::Finite(z) => {
                let r2 = z.norm_sqr();
                let d = 1.0 + r2;
                [2.0 * z.re / d, 2.0 * z.im / d, (r2 - 1.0) / d]
            }
        }
    }

    pub fn from_unit(x: &[f64; 3]) -> Self {
        if x[2] >= 1.0 {
            return SpherePoint::Infinity;
        }
        let d = 1.0 - x[2];
        SpherePoint::Finite(Complex64::new(x[0] / d, x[1] / d))
    }

    /// Moment coordinate `t = |z|^2/(1+|z|^2)`.
    pub fn moment(&self) -> f64 {
        match self {
            SpherePoint::Infinity => 1.0,
            SpherePoint::Finite(z) => {
                let r2 = z.norm_sqr();
                r2 / (1.0 + r2)
            }
        }
    }

    pub fn is_south_pole(&self) -> bool {
        matches!(self, SpherePoint::Finite(z) if z.re == 0.0 && z.im == 0.0)
    }

    pub fn is_north_pole(&self) -> bool {
        matches!(self, SpherePoint::Infinity)
    }
}

/// `|x - y|^2 / 4` for unit vectors.
#[inline]
pub fn chord_sq(x: &[f64; 3], y: &[f64; 3]) -> f64 {
    let a = x[0] - y[0];
    let b = x[1] - y[1];
    let c = x[2] - y[2];
    0.25 * (a * a + b * b + c * c)
}

/// A weighted point of the divisor of a log pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogPoint {
    pub point: SpherePoint,
    pub weight: Rational,
}

/// The projective line together with a klt boundary divisor `Σ c_i [p_i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogSphere {
    log_points: Vec<LogPoint>,
}

impl LogSphere {
    pub fn new(log_points: Vec<LogPoint>) -> Result<Self> {
        for lp in &log_points {
            if !lp.weight.is_positive() || lp.weight >= Rational::one() {
                return Err(Error::NonKlt(lp.weight.to_string()));
            }
        }
        for (i, a) in log_points.iter().enumerate() {
            for b in &log_points[i + 1..] {
                if a.point == b.point {
                    return Err(Error::InvalidInput(format!(
                        "log points must be pairwise distinct, {:?} repeated",
                        a.point
                    )));
                }
            }
            if let SpherePoint::Finite(z) = a.point {
                if !z.re.is_finite() || !z.im.is_finite() {
                    return Err(Error::InvalidInput("non-finite log point".into()));
                }
            }
        }
        Ok(Self { log_points })
    }

    /// The round sphere (empty boundary).
    pub fn round() -> Self {
        Self { log_points: Vec::new() }
    }

    /// Weights at `z = 0` and `z = inf`; a zero weight means no log point there.
    pub fn poles(south: Rational, north: Rational) -> Result<Self> {
        let mut pts = Vec::new();
        if !south.is_zero() {
            pts.push(LogPoint { point: SpherePoint::ZERO, weight: south });
        }
        if !north.is_zero() {
            pts.push(LogPoint { point: SpherePoint::Infinity, weight: north });
        }
        Self::new(pts)
    }

    pub fn log_points(&self) -> &[LogPoint] {
        &self.log_points
    }

    /// `2 - Σ c_i`, the degree of `-(K + Δ)`.
    pub fn anticanonical_degree(&self) -> Rational {
        let two = Rational::from_integer(2.into());
        self.log_points.iter().fold(two, |acc, lp| acc - &lp.weight)
    }

    /// Coefficient of the boundary at `p` (zero off the log locus).
    pub fn coefficient_at(&self, p: &SpherePoint) -> Rational {
        self.log_points
            .iter()
            .find(|lp| &lp.point == p)
            .map(|lp| lp.weight.clone())
            .unwrap_or_else(Rational::zero)
    }

    /// True when every log point sits at one of the two poles.
    pub fn is_rotationally_symmetric(&self) -> bool {
        self.log_points
            .iter()
            .all(|lp| lp.point.is_south_pole() || lp.point.is_north_pole())
    }

    /// Pole weights `(c_0, c_inf)` as floats, when rotationally symmetric.
    pub fn pole_weights(&self) -> Option<(f64, f64)> {
        if !self.is_rotationally_symmetric() {
            return None;
        }
        let f = |p: SpherePoint| self.coefficient_at(&p).to_f64().unwrap_or(0.0);
        Some((f(SpherePoint::ZERO), f(SpherePoint::Infinity)))
    }

    /// Whether `k` clears all denominators, i.e. `k c_i` is an integer for every weight.
    pub fn level_clears_denominators(&self, k: u64) -> bool {
        let kq = Rational::from_integer(k.into());
        self.log_points.iter().all(|lp| (&lp.weight * &kq).is_integer())
    }

    /// Largest log weight, used for conditioning warnings.
    pub fn max_weight(&self) -> f64 {
        self.log_points
            .iter()
            .map(|lp| lp.weight.to_f64().unwrap_or(0.0))
            .fold(0.0, f64::max)
    }

    /// Weights as `(unit vector, c)` pairs for fast evaluation.
    pub fn weighted_units(&self) -> Vec<([f64; 3], f64)> {
        self.log_points
            .iter()
            .map(|lp| (lp.point.to_unit(), lp.weight.to_f64().unwrap_or(0.0)))
            .collect()
    }
}

/// ∫ g(t, 1-t) t^{-c0} (1-t)^{-c1} dt over [lo, hi], where endpoints are given
/// together with their complements so that the region near t = 1 keeps full
/// relative precision.
///
/// The singular factors are removed by the substitutions `σ = t^{1-c0}` on the
/// lower half and `τ = (1-t)^{1-c1}` on the upper half, followed by
/// geometrically graded Gauss-Legendre panels toward the singular end.
pub fn integrate_log_weight<G>(lo: (f64, f64), hi: (f64, f64), c0: f64, c1: f64, g: G) -> f64
where
    G: Fn(f64, f64) -> f64,
{
    log_weight_rule(lo, hi, c0, c1).iter().map(|[t, ct, w]| w * g(*t, *ct)).sum()
}

/// The quadrature rule behind [`integrate_log_weight`] as `[t, 1-t, weight]`
/// triples, with the singular factors folded into the weights.
pub fn log_weight_rule(lo: (f64, f64), hi: (f64, f64), c0: f64, c1: f64) -> Vec<[f64; 3]> {
    let (a, ca) = lo;
    let (b, cb) = hi;
    let mut rule = Vec::new();
    if b <= a {
        return rule;
    }
    // lower half, substitute σ = t^{1-c0}
    if a < 0.5 {
        let top = b.min(0.5);
        let e = 1.0 - c0;
        for (s, w) in graded_panels(a.powf(e), top.powf(e), a == 0.0) {
            let t = s.powf(1.0 / e);
            let ct = 1.0 - t;
            rule.push([t, ct, w * ct.powf(-c1) / e]);
        }
    }
    // upper half, substitute τ = (1-t)^{1-c1}
    if b > 0.5 {
        let e = 1.0 - c1;
        for (s, w) in graded_panels(cb.powf(e), ca.min(0.5).powf(e), cb == 0.0) {
            let ct = s.powf(1.0 / e);
            let t = 1.0 - ct;
            rule.push([t, ct, w * t.powf(-c0) / e]);
        }
    }
    rule
}

fn gauss_panel(lo: f64, hi: f64, out: &mut Vec<(f64, f64)>) {
    const ORDER: usize = 16;
    thread_local! {
        static RULE: (Vec<f64>, Vec<f64>) = gauss::gauss_legendre(ORDER);
    }
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    RULE.with(|(x, w)| {
        for (xi, wi) in x.iter().zip(w) {
            out.push((mid + half * xi, half * wi));
        }
    });
}

fn graded_panels(lo: f64, hi: f64, singular_at_lo: bool) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    if hi <= lo {
        return out;
    }
    if !singular_at_lo {
        // two panels suffice for the smooth interior pieces produced by the grid
        let mid = 0.5 * (lo + hi);
        gauss_panel(lo, mid, &mut out);
        gauss_panel(mid, hi, &mut out);
        return out;
    }
    // panels [hi 2^{-j-1}, hi 2^{-j}], j = 0..40, plus the tiny remainder
    let mut right = hi;
    for _ in 0..40 {
        let left = 0.5 * right;
        gauss_panel(left, right, &mut out);
        right = left;
    }
    gauss_panel(0.0, right, &mut out);
    out
}

/// Reference geometry used to define the Gibbs ensembles: the Fubini-Study
/// weight on `O(m)` and the normalized volume form of the log pair,
/// `dV = Π chord²(·, p_i)^{-c_i} dV_FS / Z`.
#[derive(Debug, Clone)]
pub struct ReferenceData {
    space: LogSphere,
    bundle_degree: u64,
    weights: Vec<([f64; 3], f64)>,
    log_normalizer: f64,
}

impl ReferenceData {
    pub fn new(space: &LogSphere, bundle_degree: u64) -> Self {
        let weights = space.weighted_units();
        let normalizer = log_pair_mass(space);
        Self {
            space: space.clone(),
            bundle_degree,
            weights,
            log_normalizer: normalizer.ln(),
        }
    }

    pub fn space(&self) -> &LogSphere {
        &self.space
    }

    pub fn bundle_degree(&self) -> u64 {
        self.bundle_degree
    }

    /// `m log(1 + |z|^2)`, the weight of the Fubini-Study metric on `O(m)`.
    pub fn fs_weight(&self, z: &SpherePoint) -> f64 {
        match z {
            SpherePoint::Infinity => f64::INFINITY,
            SpherePoint::Finite(w) => self.bundle_degree as f64 * w.norm_sqr().ln_1p(),
        }
    }

    /// Log of the density of `dV` relative to the normalized Fubini-Study area.
    pub fn log_density(&self, x: &[f64; 3]) -> f64 {
        let mut acc = -self.log_normalizer;
        for (p, c) in &self.weights {
            acc -= c * chord_sq(x, p).ln();
        }
        acc
    }

    /// Total mass of `Π chord²^{-c_i} dV_FS` before normalization.
    pub fn normalizer(&self) -> f64 {
        self.log_normalizer.exp()
    }
}

/// ∫ Π chord²(x, p_i)^{-c_i} dV_FS(x).
///
/// Pole-only pairs reduce to a Beta integral in t. For general configurations
/// the integrand is split by a smooth partition of unity subordinate to the log
/// points and every piece is integrated in polar coordinates centred at its
/// own singular point.
pub fn log_pair_mass(space: &LogSphere) -> f64 {
    let pts = space.weighted_units();
    if pts.is_empty() {
        return 1.0;
    }
    if let Some((c0, c1)) = space.pole_weights() {
        return integrate_log_weight((0.0, 1.0), (1.0, 0.0), c0, c1, |_, _| 1.0);
    }
    const SHARP: f64 = 3.0;
    let density = |x: &[f64; 3]| -> f64 {
        pts.iter().map(|(p, c)| chord_sq(x, p).powf(-c)).product()
    };
    let mut total = 0.0;
    for (i, (p, c)) in pts.iter().enumerate() {
        let frame = frame_with_south_pole(p);
        let n_theta = 96;
        let piece = |t: f64, ct: f64| -> f64 {
            let r = 2.0 * (t * ct).sqrt();
            let mut acc = 0.0;
            for j in 0..n_theta {
                let th = 2.0 * PI * (j as f64 + 0.5) / n_theta as f64;
                let local = [r * th.cos(), r * th.sin(), t - ct];
                let x = frame.apply(&local);
                let mut denom = 0.0;
                let mut own = 0.0;
                for (l, (q, _)) in pts.iter().enumerate() {
                    let w = chord_sq(&x, q).max(1e-300).powf(-SHARP);
                    denom += w;
                    if l == i {
                        own = w;
                    }
                }
                // divide out the singular factor at p_i, restored by the weight
                let rest = density(&x) * t.powf(*c);
                acc += rest * own / denom;
            }
            acc / n_theta as f64
        };
        total += integrate_fine(*c, &piece);
    }
    total
}

fn integrate_fine<F: Fn(f64, f64) -> f64>(c0: f64, f: &F) -> f64 {
    // split [0,1] into panels so interior point singularities (already damped by
    // the partition of unity) are resolved
    let n = 24;
    let mut total = 0.0;
    for j in 0..n {
        let a = j as f64 / n as f64;
        let b = (j + 1) as f64 / n as f64;
        total += integrate_log_weight((a, 1.0 - a), (b, 1.0 - b), c0, 0.0, f);
    }
    total
}

/// Rotation taking the south pole `(0,0,-1)` to `p`.
#[derive(Debug, Clone, Copy)]
pub struct Frame {
    cols: [[f64; 3]; 3],
}

impl Frame {
    pub fn apply(&self, v: &[f64; 3]) -> [f64; 3] {
        let c = &self.cols;
        [
            c[0][0] * v[0] + c[1][0] * v[1] + c[2][0] * v[2],
            c[0][1] * v[0] + c[1][1] * v[1] + c[2][1] * v[2],
            c[0][2] * v[0] + c[1][2] * v[1] + c[2][2] * v[2],
        ]
    }
}

pub fn frame_with_south_pole(p: &[f64; 3]) -> Frame {
    // third column maps e_3 to -p
    let e3 = [-p[0], -p[1], -p[2]];
    let helper = if e3[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let dot = helper[0] * e3[0] + helper[1] * e3[1] + helper[2] * e3[2];
    let mut e1 = [helper[0] - dot * e3[0], helper[1] - dot * e3[1], helper[2] - dot * e3[2]];
    let n = (e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]).sqrt();
    e1.iter_mut().for_each(|v| *v /= n);
    let e2 = [
        e3[1] * e1[2] - e3[2] * e1[1],
        e3[2] * e1[0] - e3[0] * e1[2],
        e3[0] * e1[1] - e3[1] * e1[0],
    ];
    Frame { cols: [e1, e2, e3] }
}

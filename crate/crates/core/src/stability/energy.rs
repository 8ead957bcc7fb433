//! Non-archimedean energies of product valuations, lct bound chains, the
//! restriction experiment and the Gibbs stability check.
//!
//! `v^(N)(det S^(k))` is replaced by its generic value, the minimum over
//! permutations `σ` of `Σ_i v_{σ(i)}(s_i)`, computed by an exact assignment
//! solver. Cancellation in the determinant can only raise the true valuation,
//! so every ratio `A / E_NA` below is an upper bound for the corresponding lct.

use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use pathfinding::kuhn_munkres::kuhn_munkres_min;
use pathfinding::matrix::Matrix;
use serde::{Deserialize, Serialize};

use super::threshold::{curve_candidates, delta_k, generic_point};
use super::valuation::{
    curve_degree, expected_vanishing, int, log_discrepancy, CurveValuation, NaSpace, ProductValuation, Valuation,
    Vanishing,
};
use crate::ensemble::BasisSpec;
use crate::geometry::{lattice_points, LogSphere, SpherePoint, ToricFano};
use crate::{Error, Rational, Result};

/// Upper limit on the number of product valuations `lct_chain` will enumerate.
pub const MAX_CHAIN_SIZE: usize = 200_000;

/// The antipode `-1/z̄` of a sphere point.
pub fn antipode(p: SpherePoint) -> SpherePoint {
    match p {
        SpherePoint::Infinity => SpherePoint::ZERO,
        SpherePoint::Finite(z) if z.re == 0.0 && z.im == 0.0 => SpherePoint::Infinity,
        SpherePoint::Finite(z) => SpherePoint::Finite(-z.conj().inv()),
    }
}

/// A monomial section basis at level `k`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum SectionBasis {
    /// `w^e` for `e` in `exponents`, in a coordinate `w` centred at `center`
    /// with pole at its antipode; sections of `O(degree)`.
    Curve { level: u64, degree: u64, exponents: Vec<u64>, center: SpherePoint },
    /// Characters `χ^m`, `m ∈ kP`.
    Toric { level: u64, polytope: ToricFano, points: Vec<Vec<i64>> },
}

impl SectionBasis {
    /// The basis of `-k(K + Δ)` in the coordinate centred at `center`.
    pub fn curve(space: &LogSphere, k: u64, center: SpherePoint) -> Result<Self> {
        let m = curve_degree(space, k)?;
        Ok(SectionBasis::Curve { level: k, degree: m, exponents: (0..=m).collect(), center })
    }

    /// The monomial basis of a sampler basis spec, centred at `z = 0`.
    pub fn from_spec(spec: &BasisSpec) -> Self {
        SectionBasis::Curve {
            level: spec.level(),
            degree: spec.degree(),
            exponents: spec.exponents().to_vec(),
            center: SpherePoint::ZERO,
        }
    }

    pub fn toric(polytope: &ToricFano, k: u64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidInput("level k must be at least 1".into()));
        }
        Ok(SectionBasis::Toric { level: k, polytope: polytope.clone(), points: lattice_points(polytope, k) })
    }

    /// The basis adapted to `v` on `space`.
    pub fn adapted(v: &Valuation, space: &NaSpace, k: u64) -> Result<Self> {
        match (v, space) {
            (Valuation::Curve(c), NaSpace::Curve(s)) => Self::curve(s, k, c.point()),
            (Valuation::Toric(_), NaSpace::Toric(p)) => Self::toric(p, k),
            _ => Err(Error::InvalidInput("valuation and space are of different kinds".into())),
        }
    }

    pub fn level(&self) -> u64 {
        match self {
            SectionBasis::Curve { level, .. } | SectionBasis::Toric { level, .. } => *level,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            SectionBasis::Curve { exponents, .. } => exponents.len(),
            SectionBasis::Toric { points, .. } => points.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Order of vanishing of the `i`-th basis element along `v`.
    pub fn order(&self, i: usize, v: &Valuation) -> Result<Rational> {
        match (self, v) {
            (SectionBasis::Curve { degree, exponents, center, .. }, Valuation::Curve(c)) => {
                let e = exponents[i];
                let ord = if c.point() == *center {
                    e
                } else if c.point() == antipode(*center) {
                    degree - e
                } else {
                    0
                };
                Ok(c.scale() * int(ord as i64))
            }
            (SectionBasis::Toric { level, polytope, points }, Valuation::Toric(t)) => {
                if t.vector().len() != polytope.dimension() {
                    return Err(Error::DimensionMismatch { expected: polytope.dimension(), got: t.vector().len() });
                }
                let pair: i64 = points[i].iter().zip(t.vector()).map(|(x, y)| x * y).sum();
                Ok(t.scale() * int(pair - *level as i64 * polytope.min_pairing(t.vector())))
            }
            _ => Err(Error::InvalidInput("valuation and basis are of different kinds".into())),
        }
    }
}

/// Exact minimum-cost perfect matching of a square matrix of nonnegative
/// rationals: returns the cost and the column assigned to each row.
pub fn min_cost_assignment(costs: &[Vec<Rational>]) -> Result<(Rational, Vec<usize>)> {
    let n = costs.len();
    if n == 0 {
        return Ok((Rational::zero(), Vec::new()));
    }
    if let Some(row) = costs.iter().find(|r| r.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: row.len() });
    }
    let lcm = costs
        .iter()
        .flatten()
        .fold(num_bigint::BigInt::one(), |acc, c| acc.lcm(c.denom()));
    let scaled: Vec<i64> = costs
        .iter()
        .flatten()
        .map(|c| (c.numer() * (&lcm / c.denom())).to_i64())
        .collect::<Option<_>>()
        .ok_or_else(|| Error::InvalidInput("assignment costs out of integer range".into()))?;
    let bound = i64::MAX / (2 * n as i64 + 2);
    if scaled.iter().any(|c| c.abs() > bound) {
        return Err(Error::InvalidInput("assignment costs out of integer range".into()));
    }
    let matrix = Matrix::from_vec(n, n, scaled).map_err(|e| Error::Internal(e.to_string()))?;
    let (total, assignment) = kuhn_munkres_min(&matrix);
    Ok((Rational::new(total.into(), lcm), assignment))
}

/// `E_NA^(N)(v^(N)) = (1/(N k)) min_σ Σ_i v_{σ(i)}(s_i)` for a product valuation
/// and a basis of matching size.
pub fn na_energy_per_particle(pv: &ProductValuation, basis: &SectionBasis) -> Result<Rational> {
    let n = basis.len();
    if pv.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: pv.len() });
    }
    let costs = (0..n)
        .map(|i| pv.factors().iter().map(|v| basis.order(i, v)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let (total, _) = min_cost_assignment(&costs)?;
    Ok(total / int((n as u64 * basis.level()) as i64))
}

/// `A(i_N(v_1, ..., v_N)) = Σ_i A(v_i)`.
pub fn product_log_discrepancy(pv: &ProductValuation, space: &NaSpace) -> Result<Rational> {
    pv.factors()
        .iter()
        .try_fold(Rational::zero(), |acc, v| Ok(acc + log_discrepancy(v, space)?))
}

/// One entry of an lct chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainEntry {
    pub valuation: ProductValuation,
    /// Centre of the coordinate in which the monomial basis is taken.
    pub frame: SpherePoint,
    pub energy: Rational,
    /// `N^{-1} A(v^(N)) / E_NA^(N)(v^(N))`.
    pub ratio: Rational,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LctChain {
    pub level: u64,
    pub n_particles: usize,
    /// Smallest ratio found: an upper bound for `lct(D_N)`.
    pub upper_bound: Rational,
    pub witness: ChainEntry,
    /// `A(v) / S_k(v)` for each diagonal candidate, in candidate order.
    pub diagonal: Vec<ChainEntry>,
    pub delta_k: Rational,
    /// `δ_k^T - upper_bound`, nonnegative when the chain is ordered.
    pub margin: Rational,
    pub ordered: bool,
    pub examined: usize,
    /// Product valuations skipped because their energy vanishes.
    pub skipped_zero_energy: usize,
}

fn multisets(size: usize, n: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, left: usize, size: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        for i in start..size {
            cur.push(i);
            rec(i, left - 1, size, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, size, &mut Vec::with_capacity(n), &mut out);
    out
}

fn binomial(n: usize, k: usize) -> Option<usize> {
    (0..k).try_fold(1usize, |acc, i| acc.checked_mul(n - i).map(|x| x / (i + 1)))
}

fn chain_entry(
    pv: ProductValuation,
    frame: SpherePoint,
    space: &NaSpace,
    basis: &SectionBasis,
) -> Result<Option<ChainEntry>> {
    let energy = na_energy_per_particle(&pv, basis)?;
    if energy.is_zero() {
        return Ok(None);
    }
    let a = product_log_discrepancy(&pv, space)? / int(pv.len() as i64);
    let ratio = a / &energy;
    Ok(Some(ChainEntry { valuation: pv, frame, energy, ratio }))
}

/// Upper bounds for `lct(D_{N_k})` from diagonal and mixed product valuations
/// with unit-scale factors at the log points, the poles and a generic point.
pub fn lct_chain(space: &LogSphere, k: u64) -> Result<LctChain> {
    let na = NaSpace::Curve(space.clone());
    let m = curve_degree(space, k)?;
    let n = m as usize + 1;
    let mut points: Vec<SpherePoint> = space.log_points().iter().map(|lp| lp.point).collect();
    for p in [SpherePoint::ZERO, SpherePoint::Infinity, generic_point(space)] {
        if !points.contains(&p) {
            points.push(p);
        }
    }
    let per_frame = binomial(points.len() + n - 1, n).unwrap_or(usize::MAX);
    if per_frame.saturating_mul(points.len()) > MAX_CHAIN_SIZE {
        return Err(Error::InvalidInput(format!(
            "level {k} needs more than {MAX_CHAIN_SIZE} product valuations; exact enumeration refused"
        )));
    }
    let delta = delta_k(&na, k)?.value;

    let mut diagonal = Vec::new();
    for v in curve_candidates(space) {
        let Valuation::Curve(c) = &v else { unreachable!() };
        let basis = SectionBasis::curve(space, k, c.point())?;
        let pv = ProductValuation::diagonal(v.clone(), n)?;
        if let Some(e) = chain_entry(pv, c.point(), &na, &basis)? {
            diagonal.push(e);
        }
    }

    let mut best: Option<ChainEntry> = None;
    let mut examined = 0;
    let mut skipped = 0;
    let mut consider = |e: Option<ChainEntry>, best: &mut Option<ChainEntry>| {
        examined += 1;
        match e {
            None => skipped += 1,
            Some(e) => {
                if best.as_ref().is_none_or(|b| e.ratio < b.ratio) {
                    *best = Some(e);
                }
            }
        }
    };
    for e in &diagonal {
        consider(Some(e.clone()), &mut best);
    }
    let combos = multisets(points.len(), n);
    for &frame in &points {
        let basis = SectionBasis::curve(space, k, frame)?;
        for combo in &combos {
            let factors = combo
                .iter()
                .map(|&i| Valuation::Curve(CurveValuation::ord(points[i])))
                .collect();
            let pv = ProductValuation::new(factors)?;
            consider(chain_entry(pv, frame, &na, &basis)?, &mut best);
        }
    }
    let witness = best.ok_or_else(|| Error::InvalidInput("every product valuation has zero energy".into()))?;
    let upper_bound = witness.ratio.clone();
    let margin = &delta - &upper_bound;
    Ok(LctChain {
        level: k,
        n_particles: n,
        ordered: !margin.is_negative(),
        upper_bound,
        witness,
        diagonal,
        delta_k: delta,
        margin,
        examined,
        skipped_zero_energy: skipped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestrictionRow {
    pub level: u64,
    pub n_particles: usize,
    pub energy: Rational,
    pub limit: Rational,
    pub gap: Rational,
}

/// Convergence table of `E_NA^(N_k)(i_N(v, ..., v))` towards `S(v)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestrictionTable {
    pub rows: Vec<RestrictionRow>,
    /// Levels that do not clear the weight denominators.
    pub skipped_levels: Vec<u64>,
    /// Smallest `C` with `gap ≤ C / k` on every row.
    pub fitted_c: Rational,
    pub nonincreasing: bool,
}

pub fn restriction_experiment(space: &NaSpace, v: &Valuation, levels: &[u64]) -> Result<RestrictionTable> {
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput("levels must be strictly ascending".into()));
    }
    let limit = expected_vanishing(v, space, Vanishing::Limit)?;
    let mut rows = Vec::new();
    let mut skipped_levels = Vec::new();
    for &k in levels {
        if let NaSpace::Curve(s) = space {
            if k > 0 && !s.level_clears_denominators(k) {
                skipped_levels.push(k);
                continue;
            }
        }
        let basis = SectionBasis::adapted(v, space, k)?;
        let pv = ProductValuation::diagonal(v.clone(), basis.len())?;
        let energy = na_energy_per_particle(&pv, &basis)?;
        let gap = (&energy - &limit).abs();
        rows.push(RestrictionRow { level: k, n_particles: basis.len(), energy, limit: limit.clone(), gap });
    }
    let fitted_c = rows
        .iter()
        .map(|r| &r.gap * int(r.level as i64))
        .max()
        .unwrap_or_else(Rational::zero);
    let nonincreasing = rows.windows(2).all(|w| w[1].gap <= w[0].gap);
    Ok(RestrictionTable { rows, skipped_levels, fitted_c, nonincreasing })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    /// Some valuation certifies `lct(D_N) < 1`.
    Unstable,
    /// The smallest ratio found equals 1.
    Inconclusive,
    /// Every examined ratio exceeds 1; the valuation set is partial, so this is not a proof.
    InconclusiveStable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityCheck {
    pub verdict: Verdict,
    pub level: u64,
    pub bound: Rational,
    /// `bound - 1`.
    pub margin: Rational,
    pub witness: ChainEntry,
    pub note: String,
}

/// Gibbs stability at level `k` judged from the lct chain. Never certifies stability.
pub fn gibbs_stability_check(space: &LogSphere, k: u64) -> Result<StabilityCheck> {
    let chain = lct_chain(space, k)?;
    let margin = &chain.upper_bound - Rational::one();
    let (verdict, note) = if margin.is_negative() {
        (Verdict::Unstable, "witness valuation certifies lct(D_N) < 1".to_string())
    } else if margin.is_zero() {
        (
            Verdict::Inconclusive,
            "δ=1 boundary case: a valuation attains ratio exactly 1".to_string(),
        )
    } else {
        (
            Verdict::InconclusiveStable,
            format!("all {} examined valuations give ratio > 1; not a proof", chain.examined),
        )
    };
    Ok(StabilityCheck { verdict, level: k, bound: chain.upper_bound, margin, witness: chain.witness, note })
}

//! Piecewise-linear discretization of rotation-invariant potentials.
//!
//! A potential `u(t)` on the sphere with pole-supported log pair has
//!
//! ```text
//! MA(u) = (1 + (1/V) (t(1-t) u')') dt,     V = 2 - c_0 - c_inf,
//! ```
//!
//! where `dt` is the normalized smooth area form. The hat functions `φ_i` are
//! linear in the chart coordinate `x` of the grid (for a graded grid near a
//! cone point of weight `c`, `t ≈ x^{1/(1-c)}`, where conical potentials are
//! smooth). Testing against them gives nodal masses `m_i(u) = m0_i - (K u)_i / V`
//! with `m0_i = ∫ φ_i dt` and the weighted stiffness matrix
//! `K_ij = ∫ t(1-t) φ_i' φ_j' dt`. The operator is affine in `u` and its
//! masses always sum to one. Densities are stored as nodal values of `μ/dV`
//! and paired through the lumped masses `w_i = ∫ φ_i dV`.

use std::sync::Arc;

use serde::Serialize;

use crate::geometry::gauss::gauss_legendre;
use crate::geometry::{GridSpace, LogSphere, RadialGrid};
use crate::{Error, Result};

/// Monge-Ampere masses above `-ADMISSIBILITY_TOL` count as nonnegative.
pub const ADMISSIBILITY_TOL: f64 = 1e-12;
/// Allowed deviation of a density's total mass from one.
pub const MASS_TOL: f64 = 1e-10;

/// Grid, reference masses and stiffness coefficients shared by all grid functions.
#[derive(Debug)]
pub struct Discretization {
    space: Arc<GridSpace>,
    /// `a_e = ∫_e t(1-t) dt / h_e²`.
    stiffness: Vec<f64>,
    volume: f64,
    symmetric: bool,
    /// Per element: `[φ_left, φ_right, weight]` with `Σ weight · f ≈ ∫_e f dV`.
    dv_rules: Vec<Vec<[f64; 3]>>,
    /// `∫ ψ_i dt` and `∫ ψ_i dV` for the chart-linear hats `ψ_i`.
    m0: Vec<f64>,
    w: Vec<f64>,
}

/// Gauss points `(ξ, 1 - ξ, weight)` on [0, 1], geometrically refined toward
/// `ξ = 0` and/or `ξ = 1` for integrands with integrable power singularities.
fn element_points(refine_lo: bool, refine_hi: bool) -> Vec<(f64, f64, f64)> {
    const ORDER: usize = 16;
    let (gx, gw) = gauss_legendre(ORDER);
    let mut out = Vec::new();
    // panel on [a, b] measured from the left end, or from the right end when `flip`
    let mut panel = |a: f64, b: f64, flip: bool| {
        for (x, w) in gx.iter().zip(&gw) {
            let s = 0.5 * (a + b) + 0.5 * (b - a) * x;
            let wt = 0.5 * (b - a) * w;
            out.push(if flip { (1.0 - s, s, wt) } else { (s, 1.0 - s, wt) });
        }
    };
    panel(if refine_lo { 0.25 } else { 0.0 }, 0.5, false);
    panel(if refine_hi { 0.25 } else { 0.0 }, 0.5, true);
    for (on, flip) in [(refine_lo, false), (refine_hi, true)] {
        if on {
            let mut right = 0.25;
            for _ in 0..60 {
                panel(0.5 * right, right, flip);
                right *= 0.5;
            }
            panel(0.0, right, flip);
        }
    }
    out
}

impl Discretization {
    pub fn new(space: Arc<GridSpace>) -> Arc<Self> {
        let grid = space.grid().clone();
        let t = grid.nodes();
        let ct = grid.co_nodes();
        let n = grid.len();
        let (c0, c1) = space.pole_weights();
        let interior = element_points(false, false);
        let mut m0 = vec![0.0; n];
        let mut w = vec![0.0; n];
        let mut stiffness = Vec::with_capacity(n - 1);
        let mut rules = Vec::with_capacity(n - 1);
        for e in 0..n - 1 {
            let (xa, cxa) = grid.chart_node(e);
            let (xb, cxb) = grid.chart_node(e + 1);
            let h = if xa < 0.5 { xb - xa } else { cxa - cxb };
            let edge = [e == 0, e == n - 2];
            let pts = if edge[0] || edge[1] { element_points(edge[0], edge[1]) } else { interior.clone() };
            let (mut k, mut rule) = (0.0, Vec::with_capacity(pts.len()));
            for (xi, cxi, gw) in pts {
                let (x, cx) = (xa + h * xi, cxb + h * cxi);
                let (_, _, jac) = grid.chart_map(x, cx);
                let (stiff, dv_jac) = grid.chart_weights(x, cx, c0, c1);
                let weight = gw * h * jac;
                // t(1-t) (dψ/dt)² dt = t(1-t) / (dt/dx) dx / h²
                k += gw * stiff / h;
                m0[e] += cxi * weight;
                m0[e + 1] += xi * weight;
                let dv = gw * h * dv_jac;
                w[e] += cxi * dv;
                w[e + 1] += xi * dv;
                rule.push([cxi, xi, dv]);
            }
            stiffness.push(k);
            rules.push(rule);
        }
        let zt: f64 = m0.iter().sum();
        let zv: f64 = w.iter().sum();
        m0.iter_mut().for_each(|m| *m /= zt);
        w.iter_mut().for_each(|m| *m /= zv);
        for rule in &mut rules {
            rule.iter_mut().for_each(|r| r[2] /= zv);
        }
        let symmetric = c0 == c1 && (0..n).all(|i| t[i] == ct[n - 1 - i]);
        Arc::new(Self { space, stiffness, volume: 2.0 - c0 - c1, symmetric, dv_rules: rules, m0, w })
    }

    /// Grid adapted to a pole-supported log pair.
    pub fn for_space(space: &LogSphere, n_nodes: usize) -> Result<Arc<Self>> {
        let gs = GridSpace::new(space, RadialGrid::for_space(space, n_nodes)?)?;
        Ok(Self::new(gs))
    }

    pub fn grid_space(&self) -> &Arc<GridSpace> {
        &self.space
    }

    pub fn grid(&self) -> &RadialGrid {
        self.space.grid()
    }

    pub fn len(&self) -> usize {
        self.space.len()
    }

    pub fn is_empty(&self) -> bool {
        self.space.is_empty()
    }

    /// `V = ∫ ω_0`, the degree of `-(K + Δ)`.
    pub fn volume(&self) -> f64 {
        self.volume
    }

    /// Whether the pair and the grid are invariant under `t ↦ 1 - t`.
    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Element quadrature rules for `dV` in terms of the two hat functions.
    pub fn dv_rules(&self) -> &[Vec<[f64; 3]>] {
        &self.dv_rules
    }

    pub fn stiffness(&self) -> &[f64] {
        &self.stiffness
    }

    /// Masses of `MA(0)`, i.e. of the smooth area form.
    pub fn reference_ma_masses(&self) -> &[f64] {
        &self.m0
    }

    /// Masses of `dV`.
    pub fn dv_masses(&self) -> &[f64] {
        &self.w
    }

    /// `K u`.
    pub fn apply_stiffness(&self, u: &[f64]) -> Vec<f64> {
        let n = u.len();
        let mut out = vec![0.0; n];
        for (e, a) in self.stiffness.iter().enumerate() {
            let f = a * (u[e] - u[e + 1]);
            out[e] += f;
            out[e + 1] -= f;
        }
        out
    }

    /// `uᵀ K u`.
    pub fn stiffness_form(&self, u: &[f64]) -> f64 {
        self.stiffness.iter().enumerate().map(|(e, a)| a * (u[e] - u[e + 1]).powi(2)).sum()
    }

    /// Monge-Ampere masses `m0 - K u / V` without admissibility checks.
    pub fn ma_masses(&self, u: &[f64]) -> Vec<f64> {
        let ku = self.apply_stiffness(u);
        self.reference_ma_masses().iter().zip(ku).map(|(m, k)| m - k / self.volume).collect()
    }

    /// Solves `K u = V (m0 - masses)` with `u_0 = 0`.
    pub fn solve_potential(&self, masses: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        let m0 = self.reference_ma_masses();
        let rhs: Vec<f64> = m0.iter().zip(masses).map(|(a, b)| self.volume * (a - b)).collect();
        // rows 1..n of K restricted to unknowns u_1..u_{n-1}
        let a = &self.stiffness;
        let m = n - 1;
        let mut diag = vec![0.0; m];
        let mut lower = vec![0.0; m.saturating_sub(1)];
        let mut upper = vec![0.0; m.saturating_sub(1)];
        for i in 1..n {
            let r = i - 1;
            diag[r] = a[i - 1] + if i < n - 1 { a[i] } else { 0.0 };
            if i < n - 1 {
                upper[r] = -a[i];
                lower[r] = -a[i];
            }
        }
        let b: Vec<f64> = rhs[1..].to_vec();
        let sol = solve_tridiagonal(&lower, &diag, &upper, &b)
            .ok_or_else(|| Error::Internal("singular stiffness system".into()))?;
        let mut u = Vec::with_capacity(n);
        u.push(0.0);
        u.extend(sol);
        Ok(u)
    }
}

/// Largest `s ≤ 1` with `MA(s v)` nonnegative, times `fraction`.
pub fn admissible_scaling(disc: &Discretization, v: &[f64], fraction: f64) -> f64 {
    let kv = disc.apply_stiffness(v);
    let vol = disc.volume();
    let smax = disc
        .reference_ma_masses()
        .iter()
        .zip(kv)
        .filter(|(_, k)| *k > 0.0)
        .map(|(m, k)| m * vol / k)
        .fold(f64::INFINITY, f64::min);
    (fraction * smax).min(1.0)
}

/// Nodal values of a rotation-invariant potential.
#[derive(Debug, Clone, Serialize)]
pub struct Potential {
    #[serde(skip)]
    disc: Arc<Discretization>,
    values: Vec<f64>,
}

impl Potential {
    pub fn new(disc: &Arc<Discretization>, values: Vec<f64>) -> Result<Self> {
        if values.len() != disc.len() {
            return Err(Error::DimensionMismatch { expected: disc.len(), got: values.len() });
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::NotANumber("potential values".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("potential must be finite at every node".into()));
        }
        Ok(Self { disc: disc.clone(), values })
    }

    pub fn zero(disc: &Arc<Discretization>) -> Self {
        Self { disc: disc.clone(), values: vec![0.0; disc.len()] }
    }

    pub fn discretization(&self) -> &Arc<Discretization> {
        &self.disc
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `u - sup u`.
    pub fn sup_normalized(&self) -> Self {
        let s = self.sup();
        Self { disc: self.disc.clone(), values: self.values.iter().map(|v| v - s).collect() }
    }

    pub fn shifted(&self, c: f64) -> Self {
        Self { disc: self.disc.clone(), values: self.values.iter().map(|v| v + c).collect() }
    }

    /// `sup u - inf u`.
    pub fn oscillation(&self) -> f64 {
        let lo = self.values.iter().copied().fold(f64::INFINITY, f64::min);
        self.sup() - lo
    }
}

/// Nodal values of `μ/dV` for a probability measure `μ`.
#[derive(Debug, Clone, Serialize)]
pub struct Density {
    #[serde(skip)]
    disc: Arc<Discretization>,
    values: Vec<f64>,
}

impl Density {
    /// Validates nonnegativity and unit mass.
    pub fn new(disc: &Arc<Discretization>, values: Vec<f64>) -> Result<Self> {
        let d = Self::unchecked(disc, values)?;
        let mass = d.mass();
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidInput(format!("density has mass {mass}, expected 1")));
        }
        Ok(d)
    }

    /// Rescales nonnegative values to unit mass.
    pub fn normalized(disc: &Arc<Discretization>, values: Vec<f64>) -> Result<Self> {
        let d = Self::unchecked(disc, values)?;
        let mass = d.mass();
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::InvalidInput(format!("cannot normalize density of mass {mass}")));
        }
        Ok(Self { disc: d.disc, values: d.values.iter().map(|v| v / mass).collect() })
    }

    fn unchecked(disc: &Arc<Discretization>, values: Vec<f64>) -> Result<Self> {
        if values.len() != disc.len() {
            return Err(Error::DimensionMismatch { expected: disc.len(), got: values.len() });
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::NotANumber("density values".into()));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| **v < 0.0 || !v.is_finite()) {
            return Err(Error::InvalidInput(format!("density value {v} at node {i} is not a finite nonnegative number")));
        }
        Ok(Self { disc: disc.clone(), values })
    }

    /// Density with the given nodal masses `∫ φ_i μ`.
    pub fn from_masses(disc: &Arc<Discretization>, masses: &[f64]) -> Result<Self> {
        let values = masses.iter().zip(disc.dv_masses()).map(|(m, w)| m / w).collect();
        Self::new(disc, values)
    }

    /// `dV` itself.
    pub fn reference(disc: &Arc<Discretization>) -> Self {
        Self { disc: disc.clone(), values: vec![1.0; disc.len()] }
    }

    pub fn discretization(&self) -> &Arc<Discretization> {
        &self.disc
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Nodal masses `w_i μ_i`.
    pub fn masses(&self) -> Vec<f64> {
        self.values.iter().zip(self.disc.dv_masses()).map(|(v, w)| v * w).collect()
    }

    pub fn mass(&self) -> f64 {
        self.masses().iter().sum()
    }

    /// Density with respect to the smooth area form `dt`, at the nodes.
    pub fn dt_density(&self) -> Vec<f64> {
        let gs = self.disc.grid_space();
        gs.grid().nodes().iter().zip(&self.values).map(|(&t, v)| v * gs.dv_density(t)).collect()
    }
}

/// `MA(u)` as a density; fails on the first node with negative mass.
pub fn monge_ampere(u: &Potential) -> Result<Density> {
    let disc = u.discretization();
    let m = disc.ma_masses(u.values());
    if let Some((node, &value)) = m.iter().enumerate().find(|(_, v)| **v < -ADMISSIBILITY_TOL) {
        return Err(Error::Inadmissible { node, value });
    }
    let clipped: Vec<f64> = m.iter().map(|v| v.max(0.0)).collect();
    Density::from_masses(disc, &clipped)
}

/// The potential `u_μ` with `MA(u_μ) = μ`, normalized by `sup u_μ = 0`.
pub fn solve_calabi_yau(mu: &Density) -> Result<Potential> {
    let disc = mu.discretization();
    let u = disc.solve_potential(&mu.masses())?;
    Ok(Potential::new(disc, u)?.sup_normalized())
}

/// Solves a tridiagonal system with partial pivoting (second superdiagonal fill-in).
///
/// `lower[i]` is entry `(i+1, i)`, `upper[i]` entry `(i, i+1)`. Returns `None`
/// for an exactly singular pivot.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    if n == 0 {
        return Some(Vec::new());
    }
    let mut dl = lower.to_vec();
    let mut d = diag.to_vec();
    let mut du = upper.to_vec();
    let mut b = rhs.to_vec();
    for i in 0..n - 1 {
        if d[i].abs() >= dl[i].abs() {
            if d[i] == 0.0 {
                return None;
            }
            let fact = dl[i] / d[i];
            d[i + 1] -= fact * du[i];
            b[i + 1] -= fact * b[i];
            dl[i] = 0.0;
        } else {
            let fact = d[i] / dl[i];
            d[i] = dl[i];
            let temp = d[i + 1];
            d[i + 1] = du[i] - fact * temp;
            if i + 2 < n {
                dl[i] = du[i + 1];
                du[i + 1] = -fact * dl[i];
            } else {
                dl[i] = 0.0;
            }
            du[i] = temp;
            let tb = b[i];
            b[i] = b[i + 1];
            b[i + 1] = tb - fact * b[i + 1];
        }
    }
    if d[n - 1] == 0.0 {
        return None;
    }
    b[n - 1] /= d[n - 1];
    if n > 1 {
        b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2];
    }
    for i in (0..n.saturating_sub(2)).rev() {
        b[i] = (b[i] - du[i] * b[i + 1] - dl[i] * b[i + 2]) / d[i];
    }
    Some(b)
}

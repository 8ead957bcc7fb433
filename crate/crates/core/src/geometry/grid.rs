//! Radial discretization in the moment coordinate `t ∈ [0, 1]`.

use std::sync::Arc;

use super::sphere::{integrate_log_weight, LogSphere};
use crate::{Error, Result};

/// Largest grading exponent used near a singular pole.
const MAX_GRADING: f64 = 32.0;

/// Strictly increasing nodes `0 = t_0 < ... < t_M = 1`, stored together with
/// their complements `1 - t_i` so that nodes clustered near `t = 1` keep full
/// relative precision.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    nodes: Vec<f64>,
    co_nodes: Vec<f64>,
    chart: Chart,
}

/// Coordinate `x ∈ [0, 1]` in which the grid is uniform or in which its
/// elements are meant to be linear.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Chart {
    /// `x = t`.
    Identity,
    /// `t = x^{q0} / (x^{q0} + (1-x)^{q1})`.
    Graded { q0: f64, q1: f64 },
}

impl RadialGrid {
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        let co_nodes = nodes.iter().map(|t| 1.0 - t).collect();
        Self::from_parts(nodes, co_nodes, Chart::Identity)
    }

    fn from_parts(nodes: Vec<f64>, co_nodes: Vec<f64>, chart: Chart) -> Result<Self> {
        if nodes.len() < 3 {
            return Err(Error::InvalidInput(format!(
                "radial grid needs at least 3 nodes, got {}",
                nodes.len()
            )));
        }
        if nodes[0] != 0.0 || co_nodes[nodes.len() - 1] != 0.0 {
            return Err(Error::InvalidInput("grid must start at t = 0 and end at t = 1".into()));
        }
        // near t = 1 the complements carry the resolution
        for i in 0..nodes.len() - 1 {
            let increasing = if nodes[i] < 0.5 { nodes[i + 1] > nodes[i] } else { co_nodes[i + 1] < co_nodes[i] };
            if !increasing {
                return Err(Error::InvalidInput("grid nodes must be strictly increasing".into()));
            }
        }
        Ok(Self { nodes, co_nodes, chart })
    }

    pub fn uniform(n_nodes: usize) -> Result<Self> {
        Self::graded(n_nodes, 1.0, 1.0)
    }

    /// Nodes `t(x) = x^{q0} / (x^{q0} + (1-x)^{q1})` for `x` uniform in [0,1].
    ///
    /// For a cone point of weight `c` at a pole, `q = 1/(1-c)` makes the grid
    /// uniform in the coordinate in which the conical metric is smooth.
    pub fn graded(n_nodes: usize, q0: f64, q1: f64) -> Result<Self> {
        if n_nodes < 3 {
            return Err(Error::InvalidInput(format!(
                "radial grid needs at least 3 nodes, got {n_nodes}"
            )));
        }
        if !(q0 >= 1.0 && q1 >= 1.0) {
            return Err(Error::InvalidInput("grading exponents must be >= 1".into()));
        }
        let m = (n_nodes - 1) as f64;
        let mut nodes = Vec::with_capacity(n_nodes);
        let mut co_nodes = Vec::with_capacity(n_nodes);
        for i in 0..n_nodes {
            let x = i as f64 / m;
            let cx = (n_nodes - 1 - i) as f64 / m;
            let a = x.powf(q0);
            let b = cx.powf(q1);
            nodes.push(a / (a + b));
            co_nodes.push(b / (a + b));
        }
        Self::from_parts(nodes, co_nodes, Chart::Graded { q0, q1 })
    }

    /// Grid adapted to the pole weights of a rotationally symmetric log pair.
    pub fn for_space(space: &LogSphere, n_nodes: usize) -> Result<Self> {
        let (c0, c1) = space.pole_weights().ok_or_else(|| {
            Error::InvalidInput("radial grids need log points at the poles only".into())
        })?;
        let q = |c: f64| (1.0 / (1.0 - c)).min(MAX_GRADING);
        Self::graded(n_nodes, q(c0), q(c1))
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    /// Chart coordinates `(x_i, 1 - x_i)` of the nodes.
    pub fn chart_node(&self, i: usize) -> (f64, f64) {
        match self.chart {
            Chart::Identity => (self.nodes[i], self.co_nodes[i]),
            Chart::Graded { .. } => {
                let m = (self.len() - 1) as f64;
                (i as f64 / m, (self.len() - 1 - i) as f64 / m)
            }
        }
    }

    /// `(t, 1 - t, dt/dx)` at chart coordinate `x` with complement `cx`.
    pub fn chart_map(&self, x: f64, cx: f64) -> (f64, f64, f64) {
        match self.chart {
            Chart::Identity => (x, cx, 1.0),
            Chart::Graded { q0, q1 } => {
                let a = x.powf(q0);
                let b = cx.powf(q1);
                let s = a + b;
                let da = q0 * x.powf(q0 - 1.0);
                let db = q1 * cx.powf(q1 - 1.0);
                (a / s, b / s, (da * b + a * db) / (s * s))
            }
        }
    }

    /// `(t(1-t) / (dt/dx), t^{-c0} (1-t)^{-c1} dt/dx)` at chart coordinate `x`,
    /// evaluated without forming the possibly underflowing powers of `t`.
    pub fn chart_weights(&self, x: f64, cx: f64, c0: f64, c1: f64) -> (f64, f64) {
        match self.chart {
            Chart::Identity => (x * cx, x.powf(-c0) * cx.powf(-c1)),
            Chart::Graded { q0, q1 } => {
                let a = x.powf(q0);
                let b = cx.powf(q1);
                let s = a + b;
                let stiff = x * cx / (q0 * cx + q1 * x);
                let e0 = q0 * (1.0 - c0);
                let e1 = q1 * (1.0 - c1);
                let dv = s.powf(c0 + c1 - 2.0)
                    * (q0 * x.powf(e0 - 1.0) * cx.powf(e1) + x.powf(e0) * q1 * cx.powf(e1 - 1.0));
                (stiff, dv)
            }
        }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn co_nodes(&self) -> &[f64] {
        &self.co_nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Length of element `[t_e, t_{e+1}]`, taken from whichever end keeps precision.
    pub fn element_length(&self, e: usize) -> f64 {
        if self.nodes[e] < 0.5 {
            self.nodes[e + 1] - self.nodes[e]
        } else {
            self.co_nodes[e] - self.co_nodes[e + 1]
        }
    }

    /// Lumped Lebesgue masses `∫ φ_i dt` of the hat functions.
    pub fn lumped_masses(&self) -> Vec<f64> {
        let n = self.len();
        let mut m = vec![0.0; n];
        for e in 0..n - 1 {
            let h = self.element_length(e);
            m[e] += 0.5 * h;
            m[e + 1] += 0.5 * h;
        }
        m
    }

    /// Index of the element containing `t` (last element for `t = 1`).
    pub fn locate(&self, t: f64) -> usize {
        let n = self.len();
        match self.nodes.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        }
    }
}

/// ∫₀¹ f(t) dt from nodal values, by composite piecewise-quadratic
/// interpolation (Simpson's rule on non-uniform pairs of elements).
///
/// Exact for quadratics on any grid and for cubics on uniform grids with an
/// even number of elements. With an odd number of elements the final element
/// is integrated with the quadratic through the last three nodes.
pub fn quadrature(grid: &RadialGrid, values: &[f64]) -> Result<f64> {
    if values.len() != grid.len() {
        return Err(Error::DimensionMismatch { expected: grid.len(), got: values.len() });
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::NotANumber("quadrature values".into()));
    }
    let t = grid.nodes();
    let n_el = grid.len() - 1;
    let mut total = 0.0;
    let mut e = 0;
    while e + 1 < n_el {
        let h0 = grid.element_length(e);
        let h1 = grid.element_length(e + 1);
        total += simpson_pair(h0, h1, values[e], values[e + 1], values[e + 2]);
        e += 2;
    }
    if e < n_el {
        // trailing element [t_{e}, t_{e+1}] from the quadratic through t_{e-1}, t_e, t_{e+1}
        let (a, b, c) = (t[e - 1], t[e], t[e + 1]);
        let (fa, fb, fc) = (values[e - 1], values[e], values[e + 1]);
        total += quad_segment(a, b, c, fa, fb, fc, b, c);
    }
    Ok(total)
}

fn simpson_pair(h0: f64, h1: f64, f0: f64, f1: f64, f2: f64) -> f64 {
    let h = h0 + h1;
    h / 6.0 * ((2.0 - h1 / h0) * f0 + h * h / (h0 * h1) * f1 + (2.0 - h0 / h1) * f2)
}

#[allow(clippy::too_many_arguments)]
fn quad_segment(a: f64, b: f64, c: f64, fa: f64, fb: f64, fc: f64, lo: f64, hi: f64) -> f64 {
    // integrate the Lagrange interpolant exactly with a 2-point Gauss rule (degree 3)
    let lag = |x: f64| {
        fa * (x - b) * (x - c) / ((a - b) * (a - c))
            + fb * (x - a) * (x - c) / ((b - a) * (b - c))
            + fc * (x - a) * (x - b) / ((c - a) * (c - b))
    };
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let g = 1.0 / 3f64.sqrt();
    half * (lag(mid - half * g) + lag(mid + half * g))
}

/// A radial grid together with the lumped masses of the two reference
/// measures used by the discrete functionals: the smooth Fubini-Study area
/// `dt` and the log-pair volume form `dV`.
#[derive(Debug, Clone)]
pub struct GridSpace {
    grid: RadialGrid,
    pole_weights: (f64, f64),
    fs_masses: Vec<f64>,
    dv_masses: Vec<f64>,
    dv_normalizer: f64,
}

impl GridSpace {
    pub fn new(space: &LogSphere, grid: RadialGrid) -> Result<Arc<Self>> {
        let (c0, c1) = space.pole_weights().ok_or_else(|| {
            Error::InvalidInput("grid spaces need log points at the poles only".into())
        })?;
        let fs_masses = grid.lumped_masses();
        let t = grid.nodes();
        let ct = grid.co_nodes();
        let n = grid.len();
        let mut raw = vec![0.0; n];
        for e in 0..n - 1 {
            let h = grid.element_length(e);
            let (l, r) = ((t[e], ct[e]), (t[e + 1], ct[e + 1]));
            // hat pieces: (t_{e+1} - t)/h and (t - t_e)/h
            let left = integrate_log_weight(l, r, c0, c1, |x, cx| {
                if x < 0.5 { (t[e + 1] - x) / h } else { (cx - ct[e + 1]) / h }
            });
            let right = integrate_log_weight(l, r, c0, c1, |x, cx| {
                if x < 0.5 { (x - t[e]) / h } else { (ct[e] - cx) / h }
            });
            raw[e] += left;
            raw[e + 1] += right;
        }
        let z: f64 = raw.iter().sum();
        let dv_masses = raw.iter().map(|w| w / z).collect();
        Ok(Arc::new(Self { grid, pole_weights: (c0, c1), fs_masses, dv_masses, dv_normalizer: z }))
    }

    pub fn round(n_nodes: usize) -> Result<Arc<Self>> {
        Self::new(&LogSphere::round(), RadialGrid::uniform(n_nodes)?)
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn pole_weights(&self) -> (f64, f64) {
        self.pole_weights
    }

    /// `∫ φ_i dt`, summing to one.
    pub fn fs_masses(&self) -> &[f64] {
        &self.fs_masses
    }

    /// `∫ φ_i dV`, summing to one.
    pub fn dv_masses(&self) -> &[f64] {
        &self.dv_masses
    }

    /// `∫ t^{-c0} (1-t)^{-c1} dt`.
    pub fn dv_normalizer(&self) -> f64 {
        self.dv_normalizer
    }

    /// Density of `dV` with respect to `dt` at `t` (infinite at a singular pole).
    pub fn dv_density(&self, t: f64) -> f64 {
        let (c0, c1) = self.pole_weights;
        t.powf(-c0) * (1.0 - t).powf(-c1) / self.dv_normalizer
    }

    /// `∫_a^b g dV` for a smooth `g` of `(t, 1-t)`.
    pub fn integrate_dv<G: Fn(f64, f64) -> f64>(&self, a: f64, b: f64, g: G) -> f64 {
        let (c0, c1) = self.pole_weights;
        integrate_log_weight((a, 1.0 - a), (b, 1.0 - b), c0, c1, g) / self.dv_normalizer
    }
}

/// Weights above this are reported as badly conditioned.
pub const CONDITION_WARNING_WEIGHT: f64 = 0.99;

/// The log-pair volume form `dV` sampled on a grid, as a density against `dt`.
#[derive(Debug, Clone)]
pub struct ReferenceDensity {
    pub space: Arc<GridSpace>,
    /// `dV/dt` at the nodes; `+inf` at a pole carrying a log point.
    pub dt_density: Vec<f64>,
    /// `∫ dV` computed with singularity-adapted quadrature.
    pub mass: f64,
    pub warning: Option<String>,
}

/// Reference volume form of a pole-supported log pair on an adapted grid of
/// `n_nodes` nodes.
pub fn reference_density(space: &LogSphere, n_nodes: usize) -> Result<ReferenceDensity> {
    let gs = GridSpace::new(space, RadialGrid::for_space(space, n_nodes)?)?;
    let dt_density = gs.grid().nodes().iter().map(|&t| gs.dv_density(t)).collect();
    let mass = gs.integrate_dv(0.0, 1.0, |_, _| 1.0);
    let warning = (space.max_weight() > CONDITION_WARNING_WEIGHT).then(|| {
        format!(
            "log point weight {:.4} is close to 1: quadrature is badly conditioned",
            space.max_weight()
        )
    });
    Ok(ReferenceDensity { space: gs, dt_density, mass, warning })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Rational;
    use num_traits::Zero;
    use std::str::FromStr;

    #[test]
    fn quadrature_examples() {
        let g = RadialGrid::uniform(11).unwrap();
        let ones = vec![1.0; 11];
        assert!((quadrature(&g, &ones).unwrap() - 1.0).abs() < 1e-15);
        let lin: Vec<f64> = g.nodes().to_vec();
        assert!((quadrature(&g, &lin).unwrap() - 0.5).abs() < 1e-15);
        let g = RadialGrid::uniform(101).unwrap();
        let sq: Vec<f64> = g.nodes().iter().map(|t| t * t).collect();
        assert!((quadrature(&g, &sq).unwrap() - 1.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn quadrature_exact_on_quadratics_for_odd_element_counts() {
        let g = RadialGrid::graded(8, 2.0, 1.5).unwrap();
        let f: Vec<f64> = g.nodes().iter().map(|t| 3.0 * t * t - t + 2.0).collect();
        assert!((quadrature(&g, &f).unwrap() - 2.5).abs() < 1e-13);
    }

    #[test]
    fn quadrature_rejects_nan() {
        let g = RadialGrid::uniform(5).unwrap();
        let v = vec![0.0, 1.0, f64::NAN, 0.0, 0.0];
        assert!(matches!(quadrature(&g, &v), Err(Error::NotANumber(_))));
    }

    #[test]
    fn grid_invariants() {
        assert!(RadialGrid::uniform(2).is_err());
        assert!(RadialGrid::from_nodes(vec![0.0, 0.5, 0.5, 1.0]).is_err());
        assert!(RadialGrid::from_nodes(vec![0.1, 0.5, 1.0]).is_err());
        let g = RadialGrid::graded(50, 4.0, 4.0).unwrap();
        for (t, c) in g.nodes().iter().zip(g.co_nodes()) {
            assert!((t + c - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn dv_masses_normalized() {
        let s = LogSphere::poles(
            Rational::from_str("1/2").unwrap(),
            Rational::from_str("3/4").unwrap(),
        )
        .unwrap();
        let gs = GridSpace::new(&s, RadialGrid::for_space(&s, 64).unwrap()).unwrap();
        let total: f64 = gs.dv_masses().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(gs.dv_masses().iter().all(|w| *w > 0.0));
    }

    #[test]
    fn reference_density_examples() {
        let round = reference_density(&LogSphere::round(), 33).unwrap();
        assert!((round.mass - 1.0).abs() < 1e-12);
        assert!(round.dt_density.iter().all(|d| (d - 1.0).abs() < 1e-12));
        let half = Rational::from_str("1/2").unwrap();
        let foot = reference_density(&LogSphere::poles(half.clone(), half).unwrap(), 65).unwrap();
        assert!((foot.mass - 1.0).abs() < 1e-12);
        // 1D oracle: dV/dt = t^{-1/2}(1-t)^{-1/2} / B(1/2,1/2)
        for (t, d) in foot.space.grid().nodes().iter().zip(&foot.dt_density).skip(1).take(63) {
            let exact = 1.0 / (std::f64::consts::PI * (t * (1.0 - t)).sqrt());
            assert!((d - exact).abs() < 1e-12 * exact.max(1.0));
        }
        assert!(foot.warning.is_none());
        let heavy = LogSphere::poles(Rational::from_str("999/1000").unwrap(), Rational::zero()).unwrap();
        let r = reference_density(&heavy, 65).unwrap();
        assert!(r.mass.is_finite() && (r.mass - 1.0).abs() < 1e-10);
        assert!(r.warning.is_some());
    }
}

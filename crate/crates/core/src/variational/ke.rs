//! Damped Newton solver for `MA(u) = e^{βu} dV`.
//!
//! The residual `G(u) = m(u) - p(u)` compares the Monge-Ampere masses with the
//! normalized masses `p_i = w_i e^{βu_i} / Σ w e^{βu}`. Both sum to one and
//! are invariant under constants, so the Jacobian
//!
//! ```text
//! J = -K/V - β (diag p - p pᵀ)
//! ```
//!
//! is symmetric with `J 1 = 0`. Steps solve `(J + 1 1ᵀ) δ = -G`, whose solution
//! has zero mean; the matrix is tridiagonal plus rank two and is inverted with
//! a pivoted tridiagonal solve and the Woodbury identity.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::discrete::{monge_ampere, solve_tridiagonal, Density, Discretization, Potential};
use crate::{Error, Result};

pub const MAX_ITERATIONS: usize = 50;
pub const MAX_HALVINGS: usize = 25;
pub const RESIDUAL_TOL: f64 = 1e-10;
pub const RECONSTRUCTION_TOL: f64 = 1e-8;

/// How the right-hand side `e^{βu} dV` is tested against the hat functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KeScheme {
    /// `∫ φ_i e^{βu_h} dV` with the piecewise-linear interpolant `u_h`;
    /// second-order accurate up to the poles.
    #[default]
    Consistent,
    /// `w_i e^{βu_i}`; the exact critical-point equation of the lumped free
    /// energy, first-order accurate at the poles.
    Lumped,
}

#[derive(Debug, Clone, Serialize)]
pub struct NewtonStep {
    pub iteration: usize,
    pub residual: f64,
    pub step_length: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct KeSolution {
    pub beta: f64,
    pub scheme: KeScheme,
    /// Sup-normalized solution.
    pub potential: Potential,
    /// `μ_β = e^{β(u + c)} dV` at the nodes, of unit mass.
    pub density: Density,
    /// `MA(u)` with lumped nodal values; equals `density` for the lumped scheme.
    pub ma_density: Density,
    /// The constant `c` with `MA(u) = e^{β(u + c)} dV` as measures of mass one.
    pub normalizing_shift: f64,
    /// `Σ_i |∫ φ_i MA(u) - ∫ φ_i e^{β(u+c)} dV|`.
    pub residual: f64,
    /// Oscillation of `u - (1/β) log(μ_β/dV)` over the nodes.
    pub reconstruction_error: f64,
    pub iterations: usize,
    pub log: Vec<NewtonStep>,
}

/// Hat-tested masses of `e^{βu} dV / Z` with `log Z`, and the tridiagonal
/// matrix `∫ φ_i φ_j e^{βu} dV / Z` as (diagonal, off-diagonal).
struct Gibbs {
    p: Vec<f64>,
    log_z: f64,
    diag: Vec<f64>,
    off: Vec<f64>,
}

fn gibbs(disc: &Discretization, u: &[f64], beta: f64, scheme: KeScheme) -> Gibbs {
    let n = u.len();
    let top = u.iter().map(|v| beta * v).fold(f64::NEG_INFINITY, f64::max);
    let (mut p, mut diag, mut off) = (vec![0.0; n], vec![0.0; n], vec![0.0; n - 1]);
    match scheme {
        KeScheme::Lumped => {
            for (i, w) in disc.dv_masses().iter().enumerate() {
                p[i] = w * (beta * u[i] - top).exp();
                diag[i] = p[i];
            }
        }
        KeScheme::Consistent => {
            for (e, rule) in disc.dv_rules().iter().enumerate() {
                for [l, r, w] in rule {
                    let f = w * (beta * (l * u[e] + r * u[e + 1]) - top).exp();
                    p[e] += l * f;
                    p[e + 1] += r * f;
                    diag[e] += l * l * f;
                    diag[e + 1] += r * r * f;
                    off[e] += l * r * f;
                }
            }
        }
    }
    let z: f64 = p.iter().sum();
    for x in p.iter_mut().chain(diag.iter_mut()).chain(off.iter_mut()) {
        *x /= z;
    }
    Gibbs { p, log_z: top + z.ln(), diag, off }
}

fn residual_vec(disc: &Discretization, u: &[f64], beta: f64, scheme: KeScheme) -> (Vec<f64>, Gibbs) {
    let m = disc.ma_masses(u);
    let g = gibbs(disc, u, beta, scheme);
    (m.iter().zip(&g.p).map(|(a, b)| a - b).collect(), g)
}

fn l1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

/// Solves `(T + U Wᵀ) x = b` for tridiagonal `T` and `n × 2` factors.
fn woodbury_solve(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    u: [&[f64]; 2],
    w: [&[f64]; 2],
    b: &[f64],
) -> Option<Vec<f64>> {
    let tb = solve_tridiagonal(lower, diag, upper, b)?;
    let tu0 = solve_tridiagonal(lower, diag, upper, u[0])?;
    let tu1 = solve_tridiagonal(lower, diag, upper, u[1])?;
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let cap = DMatrix::from_row_slice(
        2,
        2,
        &[1.0 + dot(w[0], &tu0), dot(w[0], &tu1), dot(w[1], &tu0), 1.0 + dot(w[1], &tu1)],
    );
    let rhs = DVector::from_vec(vec![dot(w[0], &tb), dot(w[1], &tb)]);
    let y = cap.lu().solve(&rhs)?;
    let out: Vec<f64> = (0..b.len()).map(|i| tb[i] - tu0[i] * y[0] - tu1[i] * y[1]).collect();
    out.iter().all(|x| x.is_finite()).then_some(out)
}

/// Tridiagonal part of `J + 1 1ᵀ - β p pᵀ` as (diagonal, off-diagonal).
fn tridiagonal_jacobian(disc: &Discretization, g: &Gibbs, beta: f64) -> (Vec<f64>, Vec<f64>) {
    let v = disc.volume();
    let mut diag: Vec<f64> = g.diag.iter().map(|q| -beta * q).collect();
    let mut off: Vec<f64> = g.off.iter().map(|q| -beta * q).collect();
    for (e, ae) in disc.stiffness().iter().enumerate() {
        diag[e] -= ae / v;
        diag[e + 1] -= ae / v;
        off[e] += ae / v;
    }
    (diag, off)
}

fn dense_solve(disc: &Discretization, g: &Gibbs, beta: f64, b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let (diag, off) = tridiagonal_jacobian(disc, g, beta);
    let mut j = DMatrix::from_fn(n, n, |r, c| beta * g.p[r] * g.p[c] + 1.0);
    for i in 0..n {
        j[(i, i)] += diag[i];
        if i + 1 < n {
            j[(i, i + 1)] += off[i];
            j[(i + 1, i)] += off[i];
        }
    }
    j.lu().solve(&DVector::from_column_slice(b)).map(|x| x.as_slice().to_vec())
}

fn newton_direction(disc: &Discretization, g: &Gibbs, beta: f64, res: &[f64]) -> Option<Vec<f64>> {
    let n = res.len();
    let (diag, off) = tridiagonal_jacobian(disc, g, beta);
    let ones = vec![1.0; n];
    let bp: Vec<f64> = g.p.iter().map(|x| beta * x).collect();
    let rhs: Vec<f64> = res.iter().map(|x| -x).collect();
    woodbury_solve(&off, &diag, &off, [&g.p, &ones], [&bp, &ones], &rhs)
        .or_else(|| dense_solve(disc, g, beta, &rhs))
}

fn symmetrize(v: &mut [f64]) {
    let n = v.len();
    for i in 0..n / 2 {
        let s = 0.5 * (v[i] + v[n - 1 - i]);
        v[i] = s;
        v[n - 1 - i] = s;
    }
}

/// Solves the twisted Kähler-Einstein equation on the grid with the
/// consistent scheme, starting from `u = 0`.
pub fn solve_ke(disc: &Arc<Discretization>, beta: f64) -> Result<KeSolution> {
    solve_ke_with(disc, beta, KeScheme::Consistent, &Potential::zero(disc))
}

/// As [`solve_ke`] with a chosen scheme and initial guess.
pub fn solve_ke_with(disc: &Arc<Discretization>, beta: f64, scheme: KeScheme, start: &Potential) -> Result<KeSolution> {
    if !beta.is_finite() {
        return Err(Error::NotANumber("beta".into()));
    }
    if beta == 0.0 {
        // MA(u) = dV; u = 0 only when dV is the smooth area form
        let potential = super::discrete::solve_calabi_yau(&Density::reference(disc))?;
        return finish(disc, beta, KeScheme::Lumped, potential, 0, Vec::new());
    }
    let mut u = start.values().to_vec();
    let mut log = Vec::new();
    let (mut res, mut g) = residual_vec(disc, &u, beta, scheme);
    let mut norm = l1(&res);
    log.push(NewtonStep { iteration: 0, residual: norm, step_length: 0.0 });
    let mut it = 0;
    while norm >= RESIDUAL_TOL {
        if it == MAX_ITERATIONS {
            return Err(Error::NoSolution(format!(
                "beta = {beta}: Newton stopped after {it} iterations with residual {norm:.3e}"
            )));
        }
        it += 1;
        let mut dir = newton_direction(disc, &g, beta, &res).ok_or_else(|| {
            Error::NoSolution(format!("beta = {beta}: singular Newton system at iteration {it}"))
        })?;
        if disc.is_symmetric() {
            symmetrize(&mut dir);
        }
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = u.iter().zip(&dir).map(|(a, d)| a + step * d).collect();
            let (rt, gt) = residual_vec(disc, &trial, beta, scheme);
            let nt = l1(&rt);
            if nt.is_finite() && nt < norm {
                u = trial;
                res = rt;
                g = gt;
                norm = nt;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        log.push(NewtonStep { iteration: it, residual: norm, step_length: if accepted { step } else { 0.0 } });
        if !accepted {
            return Err(Error::NoSolution(format!(
                "beta = {beta}: line search failed after {MAX_HALVINGS} halvings at iteration {it}, residual {norm:.3e}"
            )));
        }
    }
    finish(disc, beta, scheme, Potential::new(disc, u)?, it, log)
}

fn finish(
    disc: &Arc<Discretization>,
    beta: f64,
    scheme: KeScheme,
    potential: Potential,
    iterations: usize,
    log: Vec<NewtonStep>,
) -> Result<KeSolution> {
    let potential = potential.sup_normalized();
    let u = potential.values();
    let g = gibbs(disc, u, beta, scheme);
    let residual = l1(&disc.ma_masses(u).iter().zip(&g.p).map(|(a, b)| a - b).collect::<Vec<_>>());
    let ma_density = monge_ampere(&potential)?;
    let (density, normalizing_shift) = if beta == 0.0 {
        (ma_density.clone(), 0.0)
    } else {
        let nodal = match scheme {
            KeScheme::Lumped => ma_density.clone(),
            KeScheme::Consistent => Density::normalized(disc, u.iter().map(|v| (beta * v).exp()).collect())?,
        };
        (nodal, -g.log_z / beta)
    };
    let reconstruction_error = if beta == 0.0 {
        0.0
    } else {
        let diffs: Vec<f64> = density.values().iter().zip(u).map(|(rho, v)| v - rho.ln() / beta).collect();
        let hi = diffs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = diffs.iter().copied().fold(f64::INFINITY, f64::min);
        hi - lo
    };
    if residual >= RESIDUAL_TOL {
        return Err(Error::NoSolution(format!("beta = {beta}: final residual {residual:.3e}")));
    }
    if !(reconstruction_error < RECONSTRUCTION_TOL) {
        return Err(Error::Internal(format!(
            "beta = {beta}: reconstruction u = log(μ/dV)/β + const fails by {reconstruction_error:.3e}"
        )));
    }
    Ok(KeSolution {
        beta,
        scheme,
        potential,
        density,
        ma_density,
        normalizing_shift,
        residual,
        reconstruction_error,
        iterations,
        log,
    })
}

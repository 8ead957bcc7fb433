//! Lattice polytopes of toric Fano varieties.
//!
//! The polytope `P` is the moment polytope of the anticanonical bundle.
//! Facets are written as `<u, y> >= -offset` with `u` the primitive inward
//! normal; for a reflexive polytope every offset is 1 and the normals are the
//! ray generators of the normal fan.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::{Error, Rational, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Facet {
    pub normal: Vec<i64>,
    pub offset: i64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ToricFano {
    dimension: usize,
    vertices: Vec<Vec<i64>>,
    facets: Vec<Facet>,
    volume: Rational,
    barycenter: Vec<Rational>,
}

impl ToricFano {
    /// Builds the polytope spanned by `points` (redundant points are dropped).
    pub fn new(points: Vec<Vec<i64>>) -> Result<Self> {
        let dimension = points.first().map(Vec::len).unwrap_or(0);
        if dimension == 0 {
            return Err(Error::InvalidInput("polytope needs at least one nonempty vertex".into()));
        }
        if let Some(bad) = points.iter().find(|p| p.len() != dimension) {
            return Err(Error::DimensionMismatch { expected: dimension, got: bad.len() });
        }
        let mut pts: Vec<Vec<i64>> = points;
        pts.sort();
        pts.dedup();
        if affine_rank(&pts, &(0..pts.len()).collect::<Vec<_>>()) != dimension {
            return Err(Error::InvalidInput("polytope is not full-dimensional".into()));
        }
        let raw = facets_of(&pts, dimension);
        for f in &raw {
            if f.offset <= 0 {
                return Err(Error::InvalidInput(
                    "origin must lie in the interior of the polytope".into(),
                ));
            }
        }
        // keep only actual vertices: points lying on at least `dimension` independent facets
        let vertices: Vec<Vec<i64>> = pts
            .iter()
            .filter(|p| {
                let tight: Vec<Vec<i64>> = raw
                    .iter()
                    .filter(|f| dot(&f.normal, p) == -f.offset)
                    .map(|f| f.normal.clone())
                    .collect();
                rank(&tight) == dimension
            })
            .cloned()
            .collect();
        let facets = facets_of(&vertices, dimension);
        let (volume, barycenter) = volume_and_barycenter(&vertices, &facets, dimension);
        Ok(Self { dimension, vertices, facets, volume, barycenter })
    }

    /// The segment `[-1, 1]`, polytope of `P^1`.
    pub fn projective_line() -> Self {
        Self::new(vec![vec![-1], vec![1]]).expect("valid polytope")
    }

    /// The triangle of `P^2` with vertices `(-1,-1), (2,-1), (-1,2)`.
    pub fn projective_plane() -> Self {
        Self::new(vec![vec![-1, -1], vec![2, -1], vec![-1, 2]]).expect("valid polytope")
    }

    /// The square `[-1, 1]^2` of `P^1 x P^1`.
    pub fn p1_times_p1() -> Self {
        Self::new(vec![vec![-1, -1], vec![1, -1], vec![-1, 1], vec![1, 1]]).expect("valid polytope")
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn vertices(&self) -> &[Vec<i64>] {
        &self.vertices
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn is_reflexive(&self) -> bool {
        self.facets.iter().all(|f| f.offset == 1)
    }

    /// Euclidean volume of `P`.
    pub fn volume(&self) -> &Rational {
        &self.volume
    }

    /// Barycenter of `P` with respect to Lebesgue measure.
    pub fn barycenter(&self) -> &[Rational] {
        &self.barycenter
    }

    /// `min_{y in P} <y, a>`, attained at a vertex.
    pub fn min_pairing(&self, a: &[i64]) -> i64 {
        self.vertices.iter().map(|v| dot(v, a)).min().expect("nonempty polytope")
    }

    pub fn contains(&self, y: &[i64], k: i64) -> bool {
        self.facets.iter().all(|f| dot(&f.normal, y) >= -k * f.offset)
    }
}

/// All lattice points of the dilate `kP`, in lexicographic order.
pub fn lattice_points(polytope: &ToricFano, k: u64) -> Vec<Vec<i64>> {
    let k = k as i64;
    let n = polytope.dimension();
    let lo: Vec<i64> = (0..n).map(|i| k * polytope.vertices().iter().map(|v| v[i]).min().unwrap()).collect();
    let hi: Vec<i64> = (0..n).map(|i| k * polytope.vertices().iter().map(|v| v[i]).max().unwrap()).collect();
    let mut out = Vec::new();
    let mut cur = lo.clone();
    loop {
        if polytope.contains(&cur, k) {
            out.push(cur.clone());
        }
        // odometer over the bounding box, last coordinate fastest
        let mut i = n;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] < hi[i] {
                cur[i] += 1;
                for j in i + 1..n {
                    cur[j] = lo[j];
                }
                break;
            }
        }
    }
}

pub(crate) fn dot(a: &[i64], b: &[i64]) -> i64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn q(x: i64) -> Rational {
    Rational::from_integer(BigInt::from(x))
}

/// Determinant of a square rational matrix by fraction-exact elimination.
fn det(mut m: Vec<Vec<Rational>>) -> Rational {
    let n = m.len();
    let mut d = Rational::one();
    for c in 0..n {
        let Some(p) = (c..n).find(|&r| !m[r][c].is_zero()) else {
            return Rational::zero();
        };
        if p != c {
            m.swap(p, c);
            d = -d;
        }
        d *= m[c][c].clone();
        for r in c + 1..n {
            if m[r][c].is_zero() {
                continue;
            }
            let f = m[r][c].clone() / m[c][c].clone();
            for j in c..n {
                let sub = f.clone() * m[c][j].clone();
                m[r][j] -= sub;
            }
        }
    }
    d
}

fn rank(rows: &[Vec<i64>]) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let mut m: Vec<Vec<Rational>> = rows.iter().map(|r| r.iter().map(|&x| q(x)).collect()).collect();
    let cols = m[0].len();
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..m.len()).find(|&i| !m[i][c].is_zero()) else { continue };
        m.swap(p, r);
        for i in 0..m.len() {
            if i != r && !m[i][c].is_zero() {
                let f = m[i][c].clone() / m[r][c].clone();
                for j in c..cols {
                    let sub = f.clone() * m[r][j].clone();
                    m[i][j] -= sub;
                }
            }
        }
        r += 1;
        if r == m.len() {
            break;
        }
    }
    r
}

fn affine_rank(pts: &[Vec<i64>], idx: &[usize]) -> usize {
    if idx.len() <= 1 {
        return 0;
    }
    let p0 = &pts[idx[0]];
    let diffs: Vec<Vec<i64>> =
        idx[1..].iter().map(|&i| pts[i].iter().zip(p0).map(|(a, b)| a - b).collect()).collect();
    rank(&diffs)
}

/// Normal vector to the hyperplane through `n` points, by cofactor expansion.
fn hyperplane_normal(pts: &[&Vec<i64>], n: usize) -> Vec<i64> {
    let p0 = pts[0];
    let diffs: Vec<Vec<i64>> = pts[1..].iter().map(|p| p.iter().zip(p0).map(|(a, b)| a - b).collect()).collect();
    (0..n)
        .map(|j| {
            let minor: Vec<Vec<Rational>> = diffs
                .iter()
                .map(|row| row.iter().enumerate().filter(|(c, _)| *c != j).map(|(_, &x)| q(x)).collect())
                .collect();
            let d = det(minor);
            let sign = if j % 2 == 0 { 1 } else { -1 };
            let v: i64 = d.to_integer().try_into().expect("small lattice data");
            sign * v
        })
        .collect()
}

fn primitive(v: Vec<i64>) -> Vec<i64> {
    let g = v.iter().fold(0i64, |g, &x| g.gcd(&x));
    if g == 0 {
        v
    } else {
        v.into_iter().map(|x| x / g).collect()
    }
}

fn facets_of(pts: &[Vec<i64>], n: usize) -> Vec<Facet> {
    let mut found = BTreeSet::new();
    let mut facets = Vec::new();
    for combo in combinations(pts.len(), n) {
        let sel: Vec<&Vec<i64>> = combo.iter().map(|&i| &pts[i]).collect();
        let normal = primitive(hyperplane_normal(&sel, n));
        if normal.iter().all(|&x| x == 0) {
            continue;
        }
        for sign in [1, -1] {
            let u: Vec<i64> = normal.iter().map(|x| sign * x).collect();
            let b = dot(&u, sel[0]);
            if pts.iter().all(|p| dot(&u, p) >= b) && found.insert(u.clone()) {
                facets.push(Facet { normal: u, offset: -b });
            }
        }
    }
    facets
}

fn combinations(n: usize, r: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, r: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == r {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, r, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, r, &mut Vec::new(), &mut out);
    out
}

/// Pulling triangulation of the face spanned by `face` (vertex indices) of dimension `d`.
fn triangulate(verts: &[Vec<i64>], facets: &[Facet], face: &[usize], d: usize) -> Vec<Vec<usize>> {
    if d == 0 {
        return vec![vec![face[0]]];
    }
    let apex = face[0];
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for f in facets {
        let sub: Vec<usize> =
            face.iter().copied().filter(|&i| dot(&f.normal, &verts[i]) == -f.offset).collect();
        if sub.contains(&apex) || sub.len() < d || affine_rank(verts, &sub) != d - 1 {
            continue;
        }
        if !seen.insert(sub.clone()) {
            continue;
        }
        for mut s in triangulate(verts, facets, &sub, d - 1) {
            s.push(apex);
            out.push(s);
        }
    }
    out
}

fn volume_and_barycenter(verts: &[Vec<i64>], facets: &[Facet], n: usize) -> (Rational, Vec<Rational>) {
    let all: Vec<usize> = (0..verts.len()).collect();
    let mut fact = BigInt::one();
    for i in 2..=n {
        fact *= BigInt::from(i);
    }
    let mut vol = Rational::zero();
    let mut moment = vec![Rational::zero(); n];
    for s in triangulate(verts, facets, &all, n) {
        let p0 = &verts[s[0]];
        let m: Vec<Vec<Rational>> =
            s[1..].iter().map(|&i| verts[i].iter().zip(p0).map(|(a, b)| q(a - b)).collect()).collect();
        let v = det(m).abs() / Rational::from_integer(fact.clone());
        for (j, mj) in moment.iter_mut().enumerate() {
            let c: i64 = s.iter().map(|&i| verts[i][j]).sum();
            *mj += v.clone() * q(c) / q(n as i64 + 1);
        }
        vol += v;
    }
    let bary = moment.into_iter().map(|m| m / vol.clone()).collect();
    (vol, bary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hull_contains_2d(verts: &[Vec<i64>], y: &[i64]) -> bool {
        // point in convex polygon via the sign of every edge cross product
        let mut ordered = verts.to_vec();
        let cx: f64 = verts.iter().map(|v| v[0] as f64).sum::<f64>() / verts.len() as f64;
        let cy: f64 = verts.iter().map(|v| v[1] as f64).sum::<f64>() / verts.len() as f64;
        ordered.sort_by(|a, b| {
            let ta = (a[1] as f64 - cy).atan2(a[0] as f64 - cx);
            let tb = (b[1] as f64 - cy).atan2(b[0] as f64 - cx);
            ta.partial_cmp(&tb).unwrap()
        });
        (0..ordered.len()).all(|i| {
            let a = &ordered[i];
            let b = &ordered[(i + 1) % ordered.len()];
            (b[0] - a[0]) * (y[1] - a[1]) - (b[1] - a[1]) * (y[0] - a[0]) >= 0
        })
    }

    #[test]
    fn segment_lattice_points() {
        let p = ToricFano::projective_line();
        assert_eq!(lattice_points(&p, 1), vec![vec![-1], vec![0], vec![1]]);
        for k in 1..=6 {
            assert_eq!(lattice_points(&p, k).len() as u64, 2 * k + 1);
        }
    }

    #[test]
    fn ehrhart_counts() {
        let sq = ToricFano::p1_times_p1();
        let tri = ToricFano::projective_plane();
        for k in 1..=5u64 {
            assert_eq!(lattice_points(&sq, k).len() as u64, (2 * k + 1).pow(2));
            assert_eq!(lattice_points(&tri, k).len() as u64, (3 * k + 1) * (3 * k + 2) / 2);
        }
    }

    #[test]
    fn lattice_points_match_hull_membership() {
        let hex = ToricFano::new(vec![
            vec![1, 0],
            vec![0, 1],
            vec![-1, 1],
            vec![-1, 0],
            vec![0, -1],
            vec![1, -1],
        ])
        .unwrap();
        for k in 1..=5u64 {
            let kk = k as i64;
            let scaled: Vec<Vec<i64>> = hex.vertices().iter().map(|v| v.iter().map(|x| x * kk).collect()).collect();
            let mut brute = Vec::new();
            for x in -kk..=kk {
                for y in -kk..=kk {
                    if hull_contains_2d(&scaled, &[x, y]) {
                        brute.push(vec![x, y]);
                    }
                }
            }
            assert_eq!(lattice_points(&hex, k), brute);
        }
    }

    #[test]
    fn reflexive_facets() {
        for p in [ToricFano::projective_line(), ToricFano::projective_plane(), ToricFano::p1_times_p1()] {
            assert!(p.is_reflexive());
        }
        assert_eq!(ToricFano::p1_times_p1().facets().len(), 4);
        let not = ToricFano::new(vec![vec![-1, -1], vec![3, -1], vec![-1, 3]]).unwrap();
        assert!(!not.is_reflexive());
        assert!(ToricFano::new(vec![vec![0, 0], vec![1, 0], vec![0, 1]]).is_err());
    }

    #[test]
    fn redundant_points_are_dropped() {
        let p = ToricFano::new(vec![vec![-1], vec![0], vec![1]]).unwrap();
        assert_eq!(p.vertices().len(), 2);
    }

    #[test]
    fn exact_volume_and_barycenter() {
        let tri = ToricFano::projective_plane();
        assert_eq!(tri.volume(), &Rational::new(9.into(), 2.into()));
        assert!(tri.barycenter().iter().all(|c| c.is_zero()));
        let sq = ToricFano::p1_times_p1();
        assert_eq!(sq.volume(), &q(4));
        // the P^2 triangle shifted off-center
        let off = ToricFano::new(vec![vec![-1, -1], vec![2, -1], vec![-1, 1]]).unwrap();
        assert_eq!(off.volume(), &q(3));
        assert_eq!(off.barycenter(), &[Rational::zero(), Rational::new((-1).into(), 3.into())]);
    }
}

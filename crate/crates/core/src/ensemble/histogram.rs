//! Sphere partition into bands of the moment coordinate and angular sectors.
//!
//! Bands are equal intervals in `t`, sectors equal intervals in the angle, so
//! every cell carries the same Fubini-Study area `1 / (bands * sectors)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::geometry::{GridSpace, LogSphere, RadialGrid};
use crate::geometry::sphere::integrate_log_weight;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub bands: usize,
    pub sectors: usize,
}

impl Default for Partition {
    fn default() -> Self {
        Self { bands: 64, sectors: 32 }
    }
}

impl Partition {
    pub fn new(bands: usize, sectors: usize) -> Result<Self> {
        if bands == 0 || sectors == 0 {
            return Err(Error::InvalidInput("partition needs at least one band and one sector".into()));
        }
        Ok(Self { bands, sectors })
    }

    pub fn cells(&self) -> usize {
        self.bands * self.sectors
    }

    /// Flat index `band * sectors + sector` of the cell containing `x`.
    pub fn cell(&self, x: &[f64; 3]) -> usize {
        let t = (0.5 * (1.0 + x[2])).clamp(0.0, 1.0);
        let band = ((t * self.bands as f64) as usize).min(self.bands - 1);
        let mut th = x[1].atan2(x[0]);
        if th < 0.0 {
            th += 2.0 * PI;
        }
        let sector = ((th / (2.0 * PI) * self.sectors as f64) as usize).min(self.sectors - 1);
        band * self.sectors + sector
    }

    pub fn band_edges(&self) -> Vec<f64> {
        (0..=self.bands).map(|i| i as f64 / self.bands as f64).collect()
    }

    /// Merges cells into a coarser partition; both sizes must divide evenly.
    pub fn coarsen(&self, counts: &[u64], target: Partition) -> Result<Vec<u64>> {
        if self.bands % target.bands != 0 || self.sectors % target.sectors != 0 {
            return Err(Error::InvalidInput(format!(
                "cannot coarsen {}x{} into {}x{}",
                self.bands, self.sectors, target.bands, target.sectors
            )));
        }
        let (fb, fs) = (self.bands / target.bands, self.sectors / target.sectors);
        let mut out = vec![0; target.cells()];
        for b in 0..self.bands {
            for s in 0..self.sectors {
                out[(b / fb) * target.sectors + s / fs] += counts[b * self.sectors + s];
            }
        }
        Ok(out)
    }
}

/// Normalized cell probabilities of an empirical histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramDensity {
    pub partition: Partition,
    pub probabilities: Vec<f64>,
}

impl HistogramDensity {
    pub fn from_counts(partition: Partition, counts: &[u64]) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::InvalidInput("empty histogram".into()));
        }
        if counts.len() != partition.cells() {
            return Err(Error::DimensionMismatch { expected: partition.cells(), got: counts.len() });
        }
        let probabilities = counts.iter().map(|&c| c as f64 / total as f64).collect();
        Ok(Self { partition, probabilities })
    }

    /// Density relative to the normalized Fubini-Study area, per cell.
    pub fn fs_density(&self) -> Vec<f64> {
        let n = self.partition.cells() as f64;
        self.probabilities.iter().map(|p| p * n).collect()
    }

    /// Probabilities of the bands, summed over sectors.
    pub fn band_marginal(&self) -> Vec<f64> {
        self.probabilities.chunks(self.partition.sectors).map(|c| c.iter().sum()).collect()
    }
}

/// `½ Σ |p_i - q_i|`.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Cell probabilities of the reference volume form `dV` of a pole-supported pair.
pub fn reference_cell_probabilities(space: &LogSphere, partition: Partition) -> Result<Vec<f64>> {
    let (c0, c1) = space.pole_weights().ok_or_else(|| {
        Error::InvalidInput("cell probabilities of dV need log points at the poles only".into())
    })?;
    let edges = partition.band_edges();
    let band: Vec<f64> = edges
        .windows(2)
        .map(|w| integrate_log_weight((w[0], 1.0 - w[0]), (w[1], 1.0 - w[1]), c0, c1, |_, _| 1.0))
        .collect();
    let z: f64 = band.iter().sum();
    let s = partition.sectors as f64;
    Ok(band.iter().flat_map(|b| std::iter::repeat_n(b / z / s, partition.sectors)).collect())
}

/// Cell probabilities of a rotation-invariant measure `f(t) dV` given by
/// nodal values `f` on a grid (piecewise-linear interpolation).
pub fn grid_cell_probabilities(space: &GridSpace, density: &[f64], partition: Partition) -> Result<Vec<f64>> {
    let grid: &RadialGrid = space.grid();
    if density.len() != grid.len() {
        return Err(Error::DimensionMismatch { expected: grid.len(), got: density.len() });
    }
    let t = grid.nodes();
    let interp = |x: f64| {
        let e = grid.locate(x);
        let h = t[e + 1] - t[e];
        let s = ((x - t[e]) / h).clamp(0.0, 1.0);
        density[e] * (1.0 - s) + density[e + 1] * s
    };
    // split each band at grid nodes so the integrand is smooth on every piece
    let edges = partition.band_edges();
    let mut band = Vec::with_capacity(partition.bands);
    for w in edges.windows(2) {
        let mut cuts = vec![w[0]];
        cuts.extend(t.iter().copied().filter(|&x| x > w[0] && x < w[1]));
        cuts.push(w[1]);
        let mass: f64 = cuts.windows(2).map(|c| space.integrate_dv(c[0], c[1], |x, _| interp(x))).sum();
        band.push(mass);
    }
    let z: f64 = band.iter().sum();
    let s = partition.sectors as f64;
    Ok(band.iter().flat_map(|b| std::iter::repeat_n(b / z / s, partition.sectors)).collect())
}

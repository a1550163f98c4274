//! Schur test for the long-range interaction matrix `T_QR` (fine cubes `Q`, coarse cubes `R`,
//! `s(Q) <= s(R)`).
//!
//! The matrix is split into slices by generation gap `k`. On slice `k` the kernel obtained from
//! `T_QR` is dominated by `kappa^(tau k / 2) c3 k_j(x, y)` with
//! `k_j(x, y) = kappa^(j tau) / (kappa^j + rho(x, y))^(m + tau)`, where
//! `c3 = (K^2 (C_diam + 1))^(m + tau)` absorbs the comparison of `rho(x, y) + s(R)` with
//! `D(Q, R)`. Each slice is bounded by the Schur test with `mu`-weighted row and column sums.

use super::far::interaction_entry;
use crate::error::{Error, Result};
use crate::lattice::DyadicLattice;
use crate::space::MetricMeasureSpace;
use crate::util::norm2;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone)]
pub struct InteractionMatrix {
    /// Transit cubes of the fine lattice.
    pub rows: Vec<usize>,
    /// Transit cubes of the coarse lattice.
    pub cols: Vec<usize>,
    /// Dense row-major entries, zero where the row cube is coarser than the column cube.
    pub entries: Vec<f64>,
    /// Whether equal generations are excluded.
    pub strict: bool,
}

impl InteractionMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols.len() + j]
    }

    /// `sum_ij T_ij a_i b_j`.
    pub fn bilinear(&self, a: &[f64], b: &[f64]) -> f64 {
        let nc = self.cols.len();
        let mut s = 0.0;
        for (i, ai) in a.iter().enumerate() {
            if *ai == 0.0 {
                continue;
            }
            s += ai * self.entries[i * nc..(i + 1) * nc].iter().zip(b).map(|(t, bj)| t * bj).sum::<f64>();
        }
        s
    }

    /// Checks that every nonzero entry joins two transit cubes.
    pub fn validate(&self, fine: &DyadicLattice, coarse: &DyadicLattice) -> Result<()> {
        for (i, &q) in self.rows.iter().enumerate() {
            for (j, &r) in self.cols.iter().enumerate() {
                if self.get(i, j) != 0.0 && !(fine.cube(q).is_transit() && coarse.cube(r).is_transit()) {
                    return Err(Error::NonTransitEntry(q, r));
                }
            }
        }
        Ok(())
    }
}

fn transit_mass(space: &MetricMeasureSpace, lat: &DyadicLattice) -> Vec<usize> {
    lat.cubes().iter().filter(|c| c.is_transit() && space.mu_of(&c.members) > 0.0).map(|c| c.id).collect()
}

/// Builds `T_QR` over all transit pairs with `k(Q) >= k(R)` (`>` when `strict`).
pub fn interaction_matrix(space: &MetricMeasureSpace, fine: &DyadicLattice, coarse: &DyadicLattice, m: f64, tau: f64, strict: bool) -> Result<InteractionMatrix> {
    fine.require_classified()?;
    coarse.require_classified()?;
    let rows = transit_mass(space, fine);
    let cols = transit_mass(space, coarse);
    let nc = cols.len();
    let mut entries = vec![0.0; rows.len() * nc];
    for (j, &r) in cols.iter().enumerate() {
        let cr = coarse.cube(r);
        let near = space.dist_to_set_all(&cr.members);
        let (s_r, mu_r) = (coarse.size(r), space.mu_of(&cr.members));
        for (i, &q) in rows.iter().enumerate() {
            let cq = fine.cube(q);
            let gap = cq.k - cr.k;
            if gap < 0 || (strict && gap == 0) {
                continue;
            }
            let dist = cq.members.iter().map(|&x| near[x]).fold(f64::INFINITY, f64::min);
            entries[i * nc + j] = interaction_entry(fine.size(q), s_r, dist, space.mu_of(&cq.members), mu_r, m, tau);
        }
    }
    Ok(InteractionMatrix { rows, cols, entries, strict })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SliceBound {
    pub gap: i32,
    pub factor: f64,
    /// Largest Schur block bound `sqrt(row * col)` over coarse generations.
    pub block: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchurConstant {
    pub c3: f64,
    pub c_diam: f64,
    pub slices: Vec<SliceBound>,
    /// `c3 sum_k kappa^(tau k / 2) block_k`.
    pub total: f64,
}

/// Explicit constant `C` with `sum T_QR a_Q b_R <= C |a| |b|`.
pub fn schur_constant(space: &MetricMeasureSpace, fine: &DyadicLattice, coarse: &DyadicLattice, m: f64, tau: f64, strict: bool) -> Result<SchurConstant> {
    fine.require_classified()?;
    coarse.require_classified()?;
    let kappa = coarse.kappa();
    let mu = space.mu();
    let mut c_diam: f64 = 0.0;
    for lat in [fine, coarse] {
        for c in lat.cubes().iter().filter(|c| c.is_transit()) {
            c_diam = c_diam.max(space.diam_of(&c.members) / lat.size(c.id));
        }
    }
    let kq = space.quasi_const();
    let c3 = (kq * kq * (c_diam + 1.0)).powf(m + tau);
    let points_at = |lat: &DyadicLattice, k: i32| -> Vec<usize> {
        let mut v: Vec<usize> = lat
            .generation(k)
            .iter()
            .filter(|&&c| lat.cube(c).is_transit())
            .flat_map(|&c| lat.cube(c).members.iter().cloned())
            .filter(|&x| mu[x] > 0.0)
            .collect();
        v.sort_unstable();
        v
    };
    let first_gap = if strict { 1 } else { 0 };
    let mut slices = Vec::new();
    let mut total = 0.0;
    let max_gap = fine.k_max() - coarse.k_min();
    for gap in first_gap..=max_gap.max(first_gap) {
        let mut block: f64 = 0.0;
        for j in coarse.k_min()..=coarse.k_max() {
            let sg = points_at(coarse, j);
            let sf = points_at(fine, j + gap);
            if sg.is_empty() || sf.is_empty() {
                continue;
            }
            let s = kappa.powi(j);
            let num = s.powf(tau);
            let mut col = vec![0.0; sg.len()];
            let mut row_max: f64 = 0.0;
            for &x in &sf {
                let r = space.rho_row(x);
                let mut row = 0.0;
                for (jj, &y) in sg.iter().enumerate() {
                    let kv = num / (s + r[y]).powf(m + tau);
                    row += kv * mu[y];
                    col[jj] += kv * mu[x];
                }
                row_max = row_max.max(row);
            }
            let col_max = col.iter().cloned().fold(0.0, f64::max);
            block = block.max((row_max * col_max).sqrt());
        }
        let factor = kappa.powf(tau * gap as f64 / 2.0);
        total += factor * block;
        slices.push(SliceBound { gap, factor, block });
    }
    Ok(SchurConstant { c3, c_diam, slices, total: c3 * total })
}

/// `(sum T_QR a_Q b_R, C |a| |b|)`.
pub fn schur_bound_long_range(mat: &InteractionMatrix, constant: &SchurConstant, a: &[f64], b: &[f64]) -> (f64, f64) {
    (mat.bilinear(a, b), constant.total * norm2(a) * norm2(b))
}

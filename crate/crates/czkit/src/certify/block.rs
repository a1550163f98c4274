//! Block interaction matrix for nested pairs: fine `Q` inside a transit child `R_1` of a coarse
//! `R`, with entries `(s(Q) / s(R))^(tau/2) sqrt(mu(Q) / mu(R_1))`. For each generation gap
//! every `Q` meets exactly one `R`, so each gap slice has norm at most `kappa^(tau k / 2)` and
//! the whole matrix at most `1 / (1 - kappa^(tau/2))`.

use crate::error::{Error, Result};
use crate::lattice::DyadicLattice;
use crate::linalg::spectral_norm;
use crate::space::MetricMeasureSpace;
use crate::util::norm2;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockEntry {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

/// One instance: entries for pairs `Q ⊂ R_j` with a fixed child slot `j`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockInstance {
    /// Fine cube ids.
    pub rows: Vec<usize>,
    /// Coarse cube ids.
    pub cols: Vec<usize>,
    pub entries: Vec<BlockEntry>,
    pub kappa: f64,
    pub tau: f64,
}

impl BlockInstance {
    pub fn constant(&self) -> f64 {
        1.0 / (1.0 - self.kappa.powf(self.tau / 2.0))
    }

    pub fn dense(&self) -> Vec<f64> {
        let nc = self.cols.len();
        let mut d = vec![0.0; self.rows.len() * nc];
        for e in &self.entries {
            d[e.row * nc + e.col] += e.value;
        }
        d
    }
}

pub fn block_entry(space: &MetricMeasureSpace, fine: &DyadicLattice, q: usize, coarse: &DyadicLattice, r: usize, r1: usize, tau: f64) -> f64 {
    (fine.size(q) / coarse.size(r)).powf(tau / 2.0) * (space.mu_of(&fine.cube(q).members) / space.mu_of(&coarse.cube(r1).members)).sqrt()
}

/// Groups nested pairs `(Q, R)` by the slot of the child `R_Q` and builds one instance per slot.
/// Fails if some `Q` is paired with two coarse cubes at the same generation gap, or if a pair
/// is not nested in a transit child.
pub fn block_instances(space: &MetricMeasureSpace, fine: &DyadicLattice, coarse: &DyadicLattice, pairs: &[(usize, usize)], tau: f64) -> Result<Vec<BlockInstance>> {
    let mut seen: HashSet<(usize, i32)> = HashSet::new();
    let mut by_slot: HashMap<usize, Vec<(usize, usize, usize)>> = HashMap::new();
    for &(q, r) in pairs {
        let cq = fine.cube(q);
        let cr = coarse.cube(r);
        if !cq.is_transit() || !cr.is_transit() {
            return Err(Error::NonTransitEntry(q, r));
        }
        if !seen.insert((q, cq.k - cr.k)) {
            return Err(Error::MultipleParents(q));
        }
        let slot = cr
            .children
            .iter()
            .position(|&ch| cq.members.iter().all(|&x| coarse.cube(ch).contains(x)))
            .ok_or(Error::NonTransitEntry(q, r))?;
        let r1 = cr.children[slot];
        if !coarse.cube(r1).is_transit() {
            return Err(Error::NonTransitEntry(q, r1));
        }
        by_slot.entry(slot).or_default().push((q, r, r1));
    }
    let mut slots: Vec<usize> = by_slot.keys().cloned().collect();
    slots.sort_unstable();
    let mut out = Vec::new();
    for s in slots {
        let list = &by_slot[&s];
        let mut rows: Vec<usize> = list.iter().map(|p| p.0).collect();
        let mut cols: Vec<usize> = list.iter().map(|p| p.1).collect();
        rows.sort_unstable();
        rows.dedup();
        cols.sort_unstable();
        cols.dedup();
        let entries = list
            .iter()
            .map(|&(q, r, r1)| BlockEntry {
                row: rows.binary_search(&q).unwrap(),
                col: cols.binary_search(&r).unwrap(),
                value: block_entry(space, fine, q, coarse, r, r1, tau),
            })
            .collect();
        out.push(BlockInstance { rows, cols, entries, kappa: coarse.kappa(), tau });
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockCheck {
    pub lhs: f64,
    pub rhs: f64,
    /// Dense spectral norm of the instance, computed when it has at most `spectral_limit` cubes.
    pub spectral_norm: Option<f64>,
    pub constant: f64,
    pub pass: bool,
}

/// `lhs = sum T_QR a_Q b_R`, `rhs = |a| |b| / (1 - kappa^(tau/2))`, plus the spectral-norm
/// comparison on small instances.
pub fn block_matrix_bound(inst: &BlockInstance, a: &[f64], b: &[f64], spectral_limit: usize) -> BlockCheck {
    let lhs: f64 = inst.entries.iter().map(|e| e.value * a[e.row] * b[e.col]).sum();
    let constant = inst.constant();
    let rhs = constant * norm2(a) * norm2(b);
    let spectral = (inst.rows.len() + inst.cols.len() <= spectral_limit).then(|| spectral_norm(&inst.dense(), inst.rows.len(), inst.cols.len()));
    let pass = lhs <= rhs * (1.0 + 1e-12) + 1e-15 && spectral.map_or(true, |s| s <= constant * (1.0 + 1e-9));
    BlockCheck { lhs, rhs, spectral_norm: spectral, constant, pass }
}

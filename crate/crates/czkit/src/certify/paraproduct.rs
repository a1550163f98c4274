//! Paraproduct with symbol `F`: `Pi g = sum_Q <g>_{R(Q)} Delta_Q F` over good transit fine
//! cubes `Q`, where `R(Q)` is the smallest transit coarse cube containing `Q` that is at least
//! `r` generations coarser. When the ancestor exactly `r` generations up is transit, it is
//! `R(Q)`.

use crate::error::Result;
use crate::lattice::DyadicLattice;
use crate::projections::{average, decompose, Component};
use crate::space::MetricMeasureSpace;
use crate::util::norm_mu;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Smallest transit cube of `coarse` containing fine cube `q` with generation `<= k(q) - r`.
/// `None` if no generation that coarse exists or `q` straddles two cubes there.
pub fn paraproduct_parent(fine: &DyadicLattice, q: usize, coarse: &DyadicLattice, r: u32) -> Option<usize> {
    let cq = fine.cube(q);
    let top = cq.k - r as i32;
    if top < coarse.k_min() {
        return None;
    }
    let k = top.min(coarse.k_max());
    let first = coarse.cube_at(k, cq.members[0])?;
    if !cq.members.iter().all(|&x| coarse.cube(first).contains(x)) {
        return None;
    }
    let mut c = first;
    while !coarse.cube(c).is_transit() {
        c = coarse.cube(c).parent?;
    }
    Some(c)
}

#[derive(Debug, Clone)]
pub struct Paraproduct {
    /// `(fine cube Q, R(Q), Delta_Q F)`.
    pub terms: Vec<(usize, usize, Component)>,
    /// Fine cubes left without a transit ancestor `r` generations up.
    pub unassigned: Vec<usize>,
    /// `a_R = sum_{R(Q) = R} |Delta_Q F|^2`.
    pub weights: BTreeMap<usize, f64>,
    n: usize,
}

/// Builds the paraproduct for the symbol `f_symbol` over the fine cubes flagged in `use_cube`.
pub fn build_paraproduct(
    space: &MetricMeasureSpace,
    fine: &DyadicLattice,
    coarse: &DyadicLattice,
    use_cube: &[bool],
    f_symbol: &[f64],
    r: u32,
) -> Result<Paraproduct> {
    let dec = decompose(space, fine, f_symbol)?;
    let mut terms = Vec::new();
    let mut unassigned = Vec::new();
    let mut weights: BTreeMap<usize, f64> = BTreeMap::new();
    for c in &dec.components {
        if !use_cube[c.cube] {
            continue;
        }
        match paraproduct_parent(fine, c.cube, coarse, r) {
            Some(rr) => {
                *weights.entry(rr).or_default() += c.norm(space).powi(2);
                terms.push((c.cube, rr, c.clone()));
            }
            None => unassigned.push(c.cube),
        }
    }
    Ok(Paraproduct { terms, unassigned, weights, n: space.n() })
}

impl Paraproduct {
    pub fn apply(&self, space: &MetricMeasureSpace, coarse: &DyadicLattice, g: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        let mut avg: BTreeMap<usize, f64> = BTreeMap::new();
        for (_, rr, comp) in &self.terms {
            let a = *avg.entry(*rr).or_insert_with(|| average(space, &coarse.cube(*rr).members, g).unwrap_or(0.0));
            comp.add_into(&mut out, a);
        }
        out
    }

    /// `(|Pi g|^2, sum_R <g>_R^2 a_R)`.
    pub fn norm_identity(&self, space: &MetricMeasureSpace, coarse: &DyadicLattice, g: &[f64]) -> (f64, f64) {
        let lhs = norm_mu(space.mu(), &self.apply(space, coarse, g)).powi(2);
        let rhs = self
            .weights
            .iter()
            .map(|(&rr, &w)| average(space, &coarse.cube(rr).members, g).unwrap_or(0.0).powi(2) * w)
            .sum();
        (lhs, rhs)
    }

    /// Fitted Carleson constant `max_S sum_{R ⊆ S} a_R / mu(S)` over transit coarse cubes.
    pub fn carleson(&self, space: &MetricMeasureSpace, coarse: &DyadicLattice) -> CarlesonFit {
        let mut below = vec![0.0; coarse.cubes().len()];
        for (&rr, &w) in &self.weights {
            let mut c = Some(rr);
            while let Some(id) = c {
                below[id] += w;
                c = coarse.cube(id).parent;
            }
        }
        let mut constant: f64 = 0.0;
        let mut worst = None;
        for cube in coarse.cubes().iter().filter(|c| c.is_transit()) {
            let m = space.mu_of(&cube.members);
            let v = below[cube.id] / m;
            if v > constant {
                constant = v;
                worst = Some(cube.id);
            }
        }
        CarlesonFit { constant, worst_cube: worst, sums: below }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CarlesonFit {
    pub constant: f64,
    pub worst_cube: Option<usize>,
    /// `sum_{R ⊆ S} a_R` for every coarse cube `S`.
    #[serde(skip)]
    pub sums: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Whitney {
    pub cubes: Vec<usize>,
    /// Largest number of the sets `1.4 P` containing a single point.
    pub multiplicity: usize,
}

/// Dilations of every cube of `lattice` by `1.5` and `1.4`, shared by the Whitney searches.
pub struct WhitneyCache {
    d15: Vec<Vec<usize>>,
    d14: Vec<Vec<usize>>,
}

impl WhitneyCache {
    pub fn new(space: &MetricMeasureSpace, lattice: &DyadicLattice) -> Result<Self> {
        let mut d15 = Vec::new();
        let mut d14 = Vec::new();
        for c in lattice.cubes() {
            d15.push(space.dilate(&c.members, 1.5)?);
            d14.push(space.dilate(&c.members, 1.4)?);
        }
        Ok(Self { d15, d14 })
    }

    /// Maximal cubes `P` of `lattice` with `1.5 P ⊆ set`, found top-down.
    pub fn decompose(&self, lattice: &DyadicLattice, n: usize, set: &[usize]) -> Whitney {
        let mut inside = vec![false; n];
        for &x in set {
            inside[x] = true;
        }
        let mut stack = vec![lattice.root()];
        let mut cubes = Vec::new();
        while let Some(p) = stack.pop() {
            let cube = lattice.cube(p);
            if !cube.members.iter().any(|&x| inside[x]) {
                continue;
            }
            if self.d15[p].iter().all(|&x| inside[x]) {
                cubes.push(p);
            } else {
                stack.extend(cube.children.iter().cloned());
            }
        }
        cubes.sort_unstable();
        let mut count = vec![0usize; n];
        for &p in &cubes {
            for &x in &self.d14[p] {
                count[x] += 1;
            }
        }
        Whitney { cubes, multiplicity: count.into_iter().max().unwrap_or(0) }
    }
}

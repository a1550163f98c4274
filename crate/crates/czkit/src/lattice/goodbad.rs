//! Good/bad classification of cubes of one lattice relative to another.
//!
//! A cube `Q` is bad when some cube `R` of the other lattice, at least `r` generations coarser,
//! has its skeleton closer to `Q` than `s(Q)^alpha s(R)^(1 - alpha)`. A cube that meets `R` but
//! is not contained in a single child of `R` counts as distance zero from that skeleton.

use super::DyadicLattice;
use crate::space::MetricMeasureSpace;
use serde::{Deserialize, Serialize};

/// `tau / (2 tau + 2 m)`.
pub fn alpha(tau: f64, m: f64) -> f64 {
    tau / (2.0 * tau + 2.0 * m)
}

/// Smallest positive `r` with `kappa^r <= delta^s`.
pub fn scale_gap(kappa: f64, delta_bad: f64, s: u32) -> u32 {
    let target = delta_bad.powi(s as i32);
    let mut r = 1u32;
    while kappa.powi(r as i32) > target * (1.0 + 1e-12) {
        r += 1;
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoodBadParams {
    pub alpha: f64,
    /// Scale gap in generations.
    pub r: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BadReason {
    Straddle,
    NearSkeleton,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum Goodness {
    Good,
    Bad { witness: usize, reason: BadReason, distance: f64, threshold: f64 },
}

impl Goodness {
    pub fn is_good(&self) -> bool {
        matches!(self, Goodness::Good)
    }
}

struct SkeletonLayer {
    /// Distance from each point to the union of skeletons of generation-`k` cubes.
    dist: Vec<f64>,
    nearest: Vec<usize>,
}

/// Precomputed skeleton distances of a lattice, one layer per generation that has children.
pub struct BadnessOracle<'a> {
    other: &'a DyadicLattice,
    layers: Vec<SkeletonLayer>,
}

impl<'a> BadnessOracle<'a> {
    pub fn new(space: &MetricMeasureSpace, other: &'a DyadicLattice) -> Self {
        let n = space.n();
        let reach = space.resolution_h() * (1.0 + super::SKELETON_SLACK);
        let mut layers = Vec::new();
        for k in other.k_min()..other.k_max() {
            let mut layer_pts = Vec::new();
            for x in 0..n {
                let own = other.cube_at(k + 1, x);
                let row = space.rho_row(x);
                if (0..n).any(|y| row[y] <= reach && other.cube_at(k + 1, y) != own) {
                    layer_pts.push(x);
                }
            }
            let mut dist = vec![f64::INFINITY; n];
            let mut nearest = vec![usize::MAX; n];
            for x in 0..n {
                let row = space.rho_row(x);
                for &y in &layer_pts {
                    if row[y] < dist[x] {
                        dist[x] = row[y];
                        nearest[x] = y;
                    }
                }
            }
            layers.push(SkeletonLayer { dist, nearest });
        }
        Self { other, layers }
    }

    pub fn lattice(&self) -> &DyadicLattice {
        self.other
    }

    /// Classifies the cube `q` of `lattice` against the oracle's lattice.
    pub fn classify(&self, lattice: &DyadicLattice, q: usize, params: GoodBadParams) -> Goodness {
        let cube = lattice.cube(q);
        let kq = cube.k;
        let other = self.other;
        let top = (kq - params.r as i32).min(other.k_max() - 1);
        if top < other.k_min() {
            return Goodness::Good;
        }
        let sq = lattice.scale(kq);
        let first = cube.members[0];
        let host = other.cube_at(top + 1, first);
        if cube.members.iter().any(|&x| other.cube_at(top + 1, x) != host) {
            let witness = other.cube_at(top, first).expect("generation exists");
            let threshold = sq.powf(params.alpha) * other.scale(top).powf(1.0 - params.alpha);
            return Goodness::Bad { witness, reason: BadReason::Straddle, distance: 0.0, threshold };
        }
        for kr in other.k_min()..=top {
            let layer = &self.layers[(kr - other.k_min()) as usize];
            let threshold = sq.powf(params.alpha) * other.scale(kr).powf(1.0 - params.alpha);
            let (mut best, mut arg) = (f64::INFINITY, usize::MAX);
            for &x in &cube.members {
                if layer.dist[x] < best {
                    best = layer.dist[x];
                    arg = x;
                }
            }
            if best < threshold {
                let y = layer.nearest[arg];
                let child = other.cube_at(kr + 1, y).expect("generation exists");
                let witness = other.cube(child).parent.expect("child has a parent");
                return Goodness::Bad { witness, reason: BadReason::NearSkeleton, distance: best, threshold };
            }
        }
        Goodness::Good
    }

    /// Good flags for every cube of `lattice`, indexed by cube id.
    pub fn good_mask(&self, lattice: &DyadicLattice, params: GoodBadParams) -> Vec<bool> {
        (0..lattice.cubes().len()).map(|q| self.classify(lattice, q, params).is_good()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scale_gap_for_half_and_quarter() {
        assert_eq!(scale_gap(0.5, 0.25, 1), 2);
        assert_eq!(scale_gap(0.5, 0.25, 3), 6);
        assert_eq!(scale_gap(0.3, 0.25, 1), 2);
    }

    #[test]
    fn alpha_for_unit_exponents() {
        assert!((alpha(1.0, 1.0) - 0.25).abs() < 1e-15);
    }
}

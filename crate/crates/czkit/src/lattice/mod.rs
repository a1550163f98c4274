//! Random dyadic lattices built from nested nets, their structural checks, skeletons and the
//! terminal/transit split.
//!
//! Generation `k` has side length `kappa^k` with `0 < kappa < 1`, so larger `k` means finer
//! cubes. The coarsest generation is a single root cube.

mod goodbad;

pub use goodbad::{alpha, scale_gap, BadReason, BadnessOracle, GoodBadParams, Goodness};

use crate::error::{Error, Result};
use crate::space::MetricMeasureSpace;
use crate::util::rng;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CubeKind {
    Unclassified,
    Terminal,
    Transit,
}

#[derive(Debug, Clone)]
pub struct Cube {
    pub id: usize,
    pub k: i32,
    pub center: usize,
    /// Sorted point indices.
    pub members: Vec<usize>,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub kind: CubeKind,
}

impl Cube {
    pub fn is_transit(&self) -> bool {
        self.kind == CubeKind::Transit
    }
    pub fn is_terminal(&self) -> bool {
        self.kind == CubeKind::Terminal
    }
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
    pub fn contains(&self, x: usize) -> bool {
        self.members.binary_search(&x).is_ok()
    }
}

/// Hand-written cube description used by [`DyadicLattice::from_parts`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CubeSpec {
    pub center: usize,
    pub members: Vec<usize>,
    /// Index of the parent within the previous generation's list.
    pub parent: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct DyadicLattice {
    kappa: f64,
    seed: u64,
    eta: f64,
    k_min: i32,
    k_max: i32,
    n: usize,
    cubes: Vec<Cube>,
    gens: Vec<Vec<usize>>,
    cube_of: Vec<Vec<usize>>,
    root: usize,
    classified: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmallBoundaryFit {
    pub t: f64,
    pub c6: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatticeReport {
    pub covering: bool,
    pub nesting: bool,
    pub unique_ancestor: bool,
    pub c_diam: f64,
    pub centers_inside: bool,
    pub a0: f64,
    pub eta: f64,
    pub small_boundary: Vec<SmallBoundaryFit>,
    pub n_cubes: usize,
    pub generations: (i32, i32),
    pub witness: Option<String>,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransitReport {
    pub n_terminal: usize,
    pub n_transit: usize,
    /// Fitted `C` in `mu(B(x_Q, r)) <= C r^m` over transit cubes and radii `r >= s(Q)`.
    pub transit_growth: f64,
    /// Fitted `max mu(Q) / s(Q)^m` over transit cubes.
    pub transit_mass_ratio: f64,
}

const SKELETON_SLACK: f64 = 1e-9;

fn nearest_by(space: &MetricMeasureSpace, x: usize, candidates: &[usize]) -> usize {
    let ids = space.ids();
    let mut best = candidates[0];
    let mut bd = space.rho(x, best);
    for &c in &candidates[1..] {
        let d = space.rho(x, c);
        if d < bd || (d == bd && ids[c] < ids[best]) {
            best = c;
            bd = d;
        }
    }
    best
}

impl DyadicLattice {
    /// Builds a lattice from nested maximal `kappa^k`-separated nets.
    ///
    /// Each net extends the coarser one greedily in a seeded random order. A new centre is
    /// attached to its nearest coarser centre (ties to the lower point id) and cubes are the
    /// point sets of the resulting subtrees. Without `k_range`, generations run from the first
    /// with a single root to the first whose cubes are singletons.
    pub fn build(space: &MetricMeasureSpace, kappa: f64, seed: u64, k_range: Option<(i32, i32)>) -> Result<Self> {
        if !(kappa > 0.0 && kappa < 1.0) {
            return Err(Error::invalid("kappa must lie in (0, 1)"));
        }
        let n = space.n();
        let diam = space.diam();
        let (k_min, k_max) = match k_range {
            Some((lo, hi)) => {
                if lo > hi {
                    return Err(Error::invalid("generation range is reversed"));
                }
                if kappa.powi(lo) < space.resolution_h() {
                    return Err(Error::DegenerateScale);
                }
                if n > 1 && kappa.powi(lo) <= diam {
                    return Err(Error::invalid("the coarsest generation must consist of a single cube"));
                }
                (lo, hi)
            }
            None => {
                if n == 1 || diam == 0.0 {
                    (0, 0)
                } else {
                    let mut lo = (diam.ln() / kappa.ln()).floor() as i32 + 1;
                    while kappa.powi(lo) <= diam {
                        lo -= 1;
                    }
                    while kappa.powi(lo + 1) > diam {
                        lo += 1;
                    }
                    let dmin = space.rho_matrix().iter().cloned().filter(|&v| v > 0.0).fold(f64::INFINITY, f64::min);
                    let mut hi = lo;
                    while kappa.powi(hi) > dmin {
                        hi += 1;
                    }
                    (lo, hi)
                }
            }
        };
        let g_count = (k_max - k_min + 1) as usize;
        let mut r = rng(seed);
        let mut in_net = vec![false; n];
        let mut dnet = vec![f64::INFINITY; n];
        let mut nets: Vec<Vec<usize>> = Vec::with_capacity(g_count);
        let mut order: Vec<usize> = (0..n).collect();
        for g in 0..g_count {
            let s = kappa.powi(k_min + g as i32);
            let mut net = nets.last().cloned().unwrap_or_default();
            order.shuffle(&mut r);
            for &p in &order {
                if !in_net[p] && dnet[p] >= s {
                    in_net[p] = true;
                    net.push(p);
                    for q in 0..n {
                        dnet[q] = dnet[q].min(space.rho(q, p));
                    }
                }
            }
            net.sort_unstable();
            nets.push(net);
        }
        // parent centre of every centre, per generation
        let mut parent_center: Vec<Vec<usize>> = vec![Vec::new(); g_count];
        for g in 1..g_count {
            let coarse = &nets[g - 1];
            parent_center[g] = nets[g]
                .iter()
                .map(|&c| if coarse.binary_search(&c).is_ok() { c } else { nearest_by(space, c, coarse) })
                .collect();
        }
        // finest generation: nearest centre
        let finest = &nets[g_count - 1];
        let mut owner: Vec<usize> = (0..n).map(|x| if in_net[x] { x } else { nearest_by(space, x, finest) }).collect();
        let mut cube_centers: Vec<Vec<usize>> = vec![Vec::new(); g_count];
        let mut owners: Vec<Vec<usize>> = vec![Vec::new(); g_count];
        for g in (0..g_count).rev() {
            owners[g] = owner.clone();
            cube_centers[g] = nets[g].clone();
            if g > 0 {
                let map: std::collections::HashMap<usize, usize> =
                    nets[g].iter().cloned().zip(parent_center[g].iter().cloned()).collect();
                owner = owner.iter().map(|c| map[c]).collect();
            }
        }
        let mut specs: Vec<Vec<CubeSpec>> = Vec::with_capacity(g_count);
        for g in 0..g_count {
            let centers = &cube_centers[g];
            let mut members: Vec<Vec<usize>> = vec![Vec::new(); centers.len()];
            for x in 0..n {
                let idx = centers.binary_search(&owners[g][x]).expect("owner is a centre");
                members[idx].push(x);
            }
            let list: Vec<CubeSpec> = centers
                .iter()
                .zip(members)
                .enumerate()
                .map(|(i, (&c, mem))| CubeSpec {
                    center: c,
                    members: mem,
                    parent: if g == 0 { None } else { Some(cube_centers[g - 1].binary_search(&parent_center[g][i]).unwrap()) },
                })
                .collect();
            specs.push(list);
        }
        let mut lat = Self::from_parts(n, kappa, seed, k_min, specs)?;
        lat.eta = 0.5;
        Ok(lat)
    }

    /// Assembles a lattice from explicit generations without validating the partition
    /// properties, so hand-built counterexamples can be fed to [`DyadicLattice::verify`].
    pub fn from_parts(n: usize, kappa: f64, seed: u64, k_min: i32, generations: Vec<Vec<CubeSpec>>) -> Result<Self> {
        if generations.is_empty() || generations[0].is_empty() {
            return Err(Error::EmptySet);
        }
        if !(kappa > 0.0 && kappa < 1.0) {
            return Err(Error::invalid("kappa must lie in (0, 1)"));
        }
        let mut cubes = Vec::new();
        let mut gens = Vec::new();
        let mut cube_of = Vec::new();
        let mut prev: Vec<usize> = Vec::new();
        for (g, list) in generations.into_iter().enumerate() {
            let k = k_min + g as i32;
            let mut ids = Vec::with_capacity(list.len());
            let mut owner = vec![usize::MAX; n];
            for spec in list {
                let mut members = spec.members;
                members.sort_unstable();
                members.dedup();
                if members.iter().any(|&x| x >= n) || spec.center >= n {
                    return Err(Error::invalid("cube refers to a point outside the space"));
                }
                let id = cubes.len();
                let parent = match spec.parent {
                    Some(p) if g > 0 => Some(*prev.get(p).ok_or_else(|| Error::invalid("parent index out of range"))?),
                    Some(_) => return Err(Error::invalid("root generation cannot have parents")),
                    None if g > 0 => return Err(Error::invalid("non-root cube without parent")),
                    None => None,
                };
                for &x in &members {
                    if owner[x] == usize::MAX {
                        owner[x] = id;
                    }
                }
                if let Some(p) = parent {
                    let pc: &mut Cube = &mut cubes[p];
                    pc.children.push(id);
                }
                cubes.push(Cube { id, k, center: spec.center, members, parent, children: vec![], kind: CubeKind::Unclassified });
                ids.push(id);
            }
            gens.push(ids.clone());
            cube_of.push(owner);
            prev = ids;
        }
        let k_max = k_min + gens.len() as i32 - 1;
        let root = gens[0][0];
        Ok(Self { kappa, seed, eta: 0.5, k_min, k_max, n, cubes, gens, cube_of, root, classified: false })
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn eta(&self) -> f64 {
        self.eta
    }
    pub fn k_min(&self) -> i32 {
        self.k_min
    }
    pub fn k_max(&self) -> i32 {
        self.k_max
    }
    pub fn n_points(&self) -> usize {
        self.n
    }
    pub fn root(&self) -> usize {
        self.root
    }
    pub fn cubes(&self) -> &[Cube] {
        &self.cubes
    }
    pub fn cube(&self, id: usize) -> &Cube {
        &self.cubes[id]
    }
    pub fn is_classified(&self) -> bool {
        self.classified
    }
    pub fn generation(&self, k: i32) -> &[usize] {
        if k < self.k_min || k > self.k_max {
            return &[];
        }
        &self.gens[(k - self.k_min) as usize]
    }
    /// Side length `kappa^k` of a cube.
    pub fn size(&self, id: usize) -> f64 {
        self.kappa.powi(self.cubes[id].k)
    }
    pub fn scale(&self, k: i32) -> f64 {
        self.kappa.powi(k)
    }
    /// Cube of generation `k` containing `x`, if the generation exists.
    pub fn cube_at(&self, k: i32, x: usize) -> Option<usize> {
        if k < self.k_min || k > self.k_max {
            return None;
        }
        let c = self.cube_of[(k - self.k_min) as usize][x];
        (c != usize::MAX).then_some(c)
    }
    /// Ancestor of `id` at generation `k <= k(id)`.
    pub fn ancestor_at(&self, id: usize, k: i32) -> Option<usize> {
        let mut c = id;
        if k > self.cubes[id].k {
            return None;
        }
        while self.cubes[c].k > k {
            c = self.cubes[c].parent?;
        }
        Some(c)
    }

    pub fn transit_ids(&self) -> Vec<usize> {
        self.cubes.iter().filter(|c| c.is_transit()).map(|c| c.id).collect()
    }

    /// Transit cubes with at least one child, i.e. those carrying a martingale difference.
    pub fn difference_cubes(&self) -> Vec<usize> {
        self.cubes.iter().filter(|c| c.is_transit() && !c.is_leaf()).map(|c| c.id).collect()
    }

    /// Structural properties of the partition plus fitted geometric constants.
    pub fn verify(&self, space: &MetricMeasureSpace) -> LatticeReport {
        let n = self.n;
        let mut witness: Option<String> = None;
        let note = |w: &mut Option<String>, s: String| {
            if w.is_none() {
                *w = Some(s);
            }
        };
        let mut covering = true;
        for (g, ids) in self.gens.iter().enumerate() {
            let mut count = vec![0usize; n];
            for &c in ids {
                for &x in &self.cubes[c].members {
                    count[x] += 1;
                }
            }
            if let Some(x) = count.iter().position(|&c| c != 1) {
                covering = false;
                note(&mut witness, format!("point {x} is covered {} times at generation {}", count[x], self.k_min + g as i32));
            }
        }
        let mut nesting = true;
        let mut unique_ancestor = self.gens[0].len() == 1;
        if !unique_ancestor {
            note(&mut witness, "coarsest generation has more than one cube".into());
        }
        for c in &self.cubes {
            if let Some(p) = c.parent {
                let pc = &self.cubes[p];
                if pc.k != c.k - 1 || !c.members.iter().all(|x| pc.contains(*x)) {
                    nesting = false;
                    note(&mut witness, format!("cube {} is not contained in its parent {}", c.id, p));
                }
                let g = (c.k - 1 - self.k_min) as usize;
                if c.members.iter().any(|&x| self.cube_of[g][x] != p) {
                    unique_ancestor = false;
                    note(&mut witness, format!("points of cube {} meet several cubes of generation {}", c.id, c.k - 1));
                }
            }
        }
        let mut c_diam: f64 = 0.0;
        let mut a0 = f64::INFINITY;
        let mut centers_inside = true;
        let ts = [self.kappa, self.kappa.powi(2), self.kappa.powi(3)];
        let mut c6 = [0.0f64; 3];
        for c in &self.cubes {
            let s = self.kappa.powi(c.k);
            c_diam = c_diam.max(space.diam_of(&c.members) / s);
            if !c.contains(c.center) {
                centers_inside = false;
                note(&mut witness, format!("centre of cube {} lies outside it", c.id));
            }
            let mut inside = vec![false; n];
            for &x in &c.members {
                inside[x] = true;
            }
            let outside: Vec<usize> = (0..n).filter(|&y| !inside[y]).collect();
            if outside.is_empty() {
                continue;
            }
            let row = space.rho_row(c.center);
            let dc = outside.iter().map(|&y| row[y]).fold(f64::INFINITY, f64::min);
            a0 = a0.min(dc / s);
            let vq = space.nu_of(&c.members);
            if vq > 0.0 {
                let dist_out: Vec<f64> = c
                    .members
                    .iter()
                    .map(|&x| {
                        let r = space.rho_row(x);
                        outside.iter().map(|&y| r[y]).fold(f64::INFINITY, f64::min)
                    })
                    .collect();
                for (i, &t) in ts.iter().enumerate() {
                    let layer: f64 = c.members.iter().zip(&dist_out).filter(|(_, &d)| d <= t * s).map(|(&x, _)| space.nu()[x]).sum();
                    c6[i] = c6[i].max(layer / (t.powf(self.eta) * vq));
                }
            }
        }
        let small_boundary = ts.iter().zip(c6).map(|(&t, c)| SmallBoundaryFit { t, c6: c }).collect();
        let ok = covering && nesting && unique_ancestor && centers_inside && a0 > 0.0 && c_diam.is_finite();
        LatticeReport {
            covering,
            nesting,
            unique_ancestor,
            c_diam,
            centers_inside,
            a0,
            eta: self.eta,
            small_boundary,
            n_cubes: self.cubes.len(),
            generations: (self.k_min, self.k_max),
            witness,
            ok,
        }
    }

    /// Points of the children of `id` lying within one resolution step of their child's
    /// complement. Leaves have an empty skeleton.
    pub fn skeleton(&self, space: &MetricMeasureSpace, id: usize) -> Vec<usize> {
        let reach = space.resolution_h() * (1.0 + SKELETON_SLACK);
        let mut out = Vec::new();
        for &ch in &self.cubes[id].children {
            let child = &self.cubes[ch];
            for &x in &child.members {
                let row = space.rho_row(x);
                if (0..self.n).any(|y| row[y] <= reach && !child.contains(y)) {
                    out.push(x);
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Marks cubes terminal (parent inside omega, or zero mass) or transit.
    ///
    /// The root has no parent and is terminal when it has zero mass or lies inside omega; that
    /// case is an error because every transit structure hangs off the root.
    pub fn classify_terminal_transit(&mut self, space: &MetricMeasureSpace, m: f64) -> Result<TransitReport> {
        let mu = space.mu();
        let omega = space.omega();
        let order: Vec<usize> = self.gens.iter().flatten().cloned().collect();
        for id in order {
            let c = &self.cubes[id];
            let mass: f64 = c.members.iter().map(|&x| mu[x]).sum();
            let kind = match c.parent {
                None => {
                    if mass <= 0.0 || c.members.iter().all(|&x| omega[x]) {
                        CubeKind::Terminal
                    } else {
                        CubeKind::Transit
                    }
                }
                Some(p) => {
                    let pc = &self.cubes[p];
                    if pc.is_terminal() || mass <= 0.0 || pc.members.iter().all(|&x| omega[x]) {
                        CubeKind::Terminal
                    } else {
                        CubeKind::Transit
                    }
                }
            };
            self.cubes[id].kind = kind;
        }
        self.classified = true;
        if self.cubes[self.root].is_terminal() {
            return Err(Error::RootTerminal);
        }
        let mut growth: f64 = 0.0;
        let mut mass_ratio: f64 = 0.0;
        let mut n_transit = 0;
        let top = 2.0 * space.diam().max(space.resolution_h());
        for c in self.cubes.iter().filter(|c| c.is_transit()) {
            n_transit += 1;
            let s = self.kappa.powi(c.k);
            mass_ratio = mass_ratio.max(space.mu_of(&c.members) / s.powf(m));
            let row = space.rho_row(c.center);
            let mut r = s;
            while r <= top {
                let b: f64 = (0..self.n).filter(|&y| row[y] < r).map(|y| mu[y]).sum();
                growth = growth.max(b / r.powf(m));
                r *= 2.0;
            }
        }
        Ok(TransitReport {
            n_terminal: self.cubes.len() - n_transit,
            n_transit,
            transit_growth: growth,
            transit_mass_ratio: mass_ratio,
        })
    }

    pub(crate) fn require_classified(&self) -> Result<()> {
        if self.classified {
            Ok(())
        } else {
            Err(Error::ClassificationMissing("terminal/transit flags not computed".into()))
        }
    }

    pub fn specs(&self) -> Vec<Vec<CubeSpec>> {
        let mut pos = vec![0usize; self.cubes.len()];
        for ids in &self.gens {
            for (i, &c) in ids.iter().enumerate() {
                pos[c] = i;
            }
        }
        self.gens
            .iter()
            .map(|ids| {
                ids.iter()
                    .map(|&c| {
                        let cube = &self.cubes[c];
                        CubeSpec { center: cube.center, members: cube.members.clone(), parent: cube.parent.map(|p| pos[p]) }
                    })
                    .collect()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize) -> MetricMeasureSpace {
        let coords = (0..n).map(|i| vec![i as f64]).collect();
        let w = vec![1.0 / n as f64; n];
        MetricMeasureSpace::euclidean(coords, w.clone(), w, vec![false; n], 1.0).unwrap()
    }

    #[test]
    fn default_range_has_single_root_and_singleton_leaves() {
        let s = line(16);
        let lat = DyadicLattice::build(&s, 0.5, 3, None).unwrap();
        assert_eq!(lat.generation(lat.k_min()).len(), 1);
        assert!(lat.generation(lat.k_max()).iter().all(|&c| lat.cube(c).members.len() == 1));
        let rep = lat.verify(&s);
        assert!(rep.ok, "{rep:?}");
    }

    #[test]
    fn construction_is_deterministic() {
        let s = line(12);
        let a = DyadicLattice::build(&s, 0.5, 9, None).unwrap();
        let b = DyadicLattice::build(&s, 0.5, 9, None).unwrap();
        let ma: Vec<_> = a.cubes().iter().map(|c| c.members.clone()).collect();
        let mb: Vec<_> = b.cubes().iter().map(|c| c.members.clone()).collect();
        assert_eq!(ma, mb);
    }

    #[test]
    fn overlapping_siblings_are_detected() {
        let s = line(4);
        let gens = vec![
            vec![CubeSpec { center: 0, members: vec![0, 1, 2, 3], parent: None }],
            vec![
                CubeSpec { center: 0, members: vec![0, 1, 2], parent: Some(0) },
                CubeSpec { center: 3, members: vec![2, 3], parent: Some(0) },
            ],
        ];
        let lat = DyadicLattice::from_parts(4, 0.5, 0, -3, gens).unwrap();
        let rep = lat.verify(&s);
        assert!(!rep.covering);
        assert!(rep.witness.unwrap().contains("point 2"));
    }

    #[test]
    fn skeleton_of_a_split_segment() {
        let s = line(8);
        let gens = vec![
            vec![CubeSpec { center: 0, members: (0..8).collect(), parent: None }],
            vec![
                CubeSpec { center: 1, members: vec![0, 1, 2, 3], parent: Some(0) },
                CubeSpec { center: 5, members: vec![4, 5, 6, 7], parent: Some(0) },
            ],
        ];
        let lat = DyadicLattice::from_parts(8, 0.5, 0, -3, gens).unwrap();
        assert_eq!(lat.skeleton(&s, 0), vec![3, 4]);
        assert!(lat.skeleton(&s, 1).is_empty());
    }

    #[test]
    fn degenerate_range_is_rejected() {
        let s = line(8);
        assert!(matches!(DyadicLattice::build(&s, 0.5, 0, Some((5, 6))), Err(Error::DegenerateScale)));
    }

    #[test]
    fn root_inside_omega_is_terminal() {
        let s = line(4).with_omega(vec![true; 4]).unwrap();
        let mut lat = DyadicLattice::build(&s, 0.5, 1, None).unwrap();
        assert!(matches!(lat.classify_terminal_transit(&s, 1.0), Err(Error::RootTerminal)));
    }

    #[test]
    fn single_point_space() {
        let s = MetricMeasureSpace::new(vec![0], vec![0.0], vec![1.0], vec![1.0], vec![false], 1.0, 1.0).unwrap();
        let lat = DyadicLattice::build(&s, 0.5, 0, None).unwrap();
        assert_eq!(lat.cubes().len(), 1);
        assert!(lat.verify(&s).ok);
    }
}

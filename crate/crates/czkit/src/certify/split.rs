//! Splitting of the good-part bilinear form into near, long-range and nested pieces, with an
//! explicit constant for each piece.
//!
//! One half of the form pairs a fine lattice cube `A` (function `phi`) with a coarse lattice
//! cube `B` (function `psi`) and evaluates `<Delta_A phi, Op Delta_B psi>`, where `Op` is `T^*`
//! for the lower half and `T` for the upper half. With `r` the scale gap:
//!
//! * sigma1: at most `r` generations apart and `dist(A, B) <= s(B)`;
//! * sigma2: at most `r` apart and farther than `s(B)`, or more than `r` apart and disjoint;
//! * sigma3: more than `r` apart and intersecting, so `A` lies in a child `B_A` of `B`. When
//!   `B_A` is terminal the term is kept whole. When `B_A` is transit and `c` is the constant
//!   value of `Delta_B psi` on `B_A`, the term splits exactly into
//!   `<Delta_A phi, Op(Delta_B psi - c chi_{B_A}))>` (far part),
//!   `-c <Delta_A phi, Op chi_{X \ B_A}>` (extension error) and `c <Delta_A phi, Op 1>`
//!   (paraproduct part).
//!
//! Each pair carries a coefficient `beta` with `|term| <= beta |Delta_A phi| |Delta_B psi|`.
//! Coefficients come from the matching estimate when its hypotheses are met on the pair, and
//! from an exact local bound otherwise; the two kinds are tracked separately.

use super::block::{block_entry, block_instances, block_matrix_bound, BlockCheck, BlockInstance};
use super::bmo::{pseudo_bmo_check, BmoConfig, BmoReport};
use super::far::{interaction_entry, FarParams};
use super::paraproduct::{build_paraproduct, CarlesonFit, Paraproduct, WhitneyCache};
use super::schur::{interaction_matrix, schur_bound_long_range, schur_constant, InteractionMatrix, SchurConstant};
use crate::error::Result;
use crate::kernel::KernelMatrix;
use crate::lattice::DyadicLattice;
use crate::linalg::{schur_unit_bound, spectral_norm};
use crate::projections::Decomposition;
use crate::space::MetricMeasureSpace;
use crate::util::{inner_mu, norm_mu, par_map};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};

/// Dense spectral comparisons are run on index sets up to this size.
pub const SPECTRAL_LIMIT: usize = 200;
/// Block instances get the dense comparison up to this many cubes.
pub const BLOCK_SPECTRAL_LIMIT: usize = 100;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SplitParams {
    /// Testing constant.
    pub a_t1: f64,
    /// Kernel bound on maximal terminal cubes at the parent's scale.
    pub c22: f64,
    pub c_cz: f64,
    pub m: f64,
    pub tau: f64,
    pub delta_cz: f64,
    pub alpha: f64,
    pub r: u32,
}

impl SplitParams {
    pub fn far(&self) -> FarParams {
        FarParams { c_cz: self.c_cz, m: self.m, tau: self.tau, delta_cz: self.delta_cz, alpha: self.alpha }
    }
}

/// One half of the form.
#[derive(Clone, Copy)]
pub struct Half<'a> {
    pub space: &'a MetricMeasureSpace,
    pub fine: &'a DyadicLattice,
    pub coarse: &'a DyadicLattice,
    /// Kernel of the operator applied to the coarse-side function.
    pub kop: &'a KernelMatrix,
    pub good_fine: &'a [bool],
    pub good_coarse: &'a [bool],
    /// Lower half: equal generations included.
    pub lower: bool,
}

impl Half<'_> {
    fn first_gap(&self) -> i32 {
        if self.lower {
            0
        } else {
            1
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairClass {
    Sigma1,
    Sigma2,
    Sigma3Terminal,
    Sigma3Transit,
    /// More than `r` generations apart and intersecting, but not inside one child.
    Stray,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairInfo {
    pub a: usize,
    pub b: usize,
    pub class: PairClass,
    /// Child of `b` containing `a` (sigma3 only).
    pub b1: Option<usize>,
    /// Sigma1: per-pair constant. Sigma2, stray and the sigma3 far part: exact local bound.
    pub coef: f64,
    /// Whether the far estimate applies (sigma2 and sigma3 transit far part).
    pub admissible: bool,
    /// Interaction entry `T_AB` when admissible.
    pub t: f64,
    /// `max(1, radius(A) / s(A))`.
    pub omega: f64,
    /// Sigma3 transit: the ascent hypotheses hold on every level.
    pub ext_ok: bool,
    /// Sigma3 transit: exact local bound for the extension error.
    pub ext_coef: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PairCounts {
    pub sigma1: usize,
    pub sigma2: usize,
    pub sigma2_admissible: usize,
    pub sigma3_terminal: usize,
    pub sigma3_transit: usize,
    pub sigma3_far_admissible: usize,
    pub sigma3_ext_ok: usize,
    pub stray: usize,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AscentStats {
    pub chains: usize,
    pub levels: usize,
    /// Levels where the annulus comes closer to the centre of `A` than the threshold.
    pub level_violations: usize,
    /// Pairs where `A` is too wide for the smoothness regime.
    pub regime_violations: usize,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct HalfConstants {
    pub sigma1: f64,
    pub sigma2: f64,
    pub sigma3_terminal: f64,
    pub sigma3_far: f64,
    pub sigma3_extension: f64,
    pub paraproduct: f64,
    pub total: f64,
    /// `C_CZ 3^(m + tau)`.
    pub far_lemma: f64,
    pub schur: f64,
    pub omega_sigma2: f64,
    pub omega_far: f64,
    pub omega_extension: f64,
    /// `max mu(B) / s(B)^m` over transit coarse cubes.
    pub m_transit: f64,
    pub n_slots: usize,
    pub max_terminal_children: usize,
    /// Largest number of sigma1 partners of a single cube.
    pub neighbor_max: usize,
    pub carleson: f64,
    pub whitney_multiplicity: usize,
    pub bmo_fitted: f64,
}

/// Everything about one half that does not depend on the probe functions.
pub struct HalfStructure {
    pub lower: bool,
    pub pairs: Vec<PairInfo>,
    pub counts: PairCounts,
    pub ascent: AscentStats,
    /// `Op 1`.
    pub symbol: Vec<f64>,
    op_chi: HashMap<usize, Vec<f64>>,
    pub interaction: InteractionMatrix,
    pub schur: SchurConstant,
    /// Dense norm of the interaction matrix when it is small enough.
    pub schur_spectral: Option<f64>,
    pub blocks: Vec<BlockInstance>,
    pub paraproduct: Paraproduct,
    pub carleson: CarlesonFit,
    pub bmo: BmoReport,
    pub constants: HalfConstants,
}

struct CubeGeom {
    mu: f64,
    size: f64,
    radius: f64,
    supp: Vec<usize>,
}

fn geometry(space: &MetricMeasureSpace, lat: &DyadicLattice) -> Vec<CubeGeom> {
    let mu = space.mu();
    lat.cubes()
        .iter()
        .map(|c| {
            let supp: Vec<usize> = c.members.iter().cloned().filter(|&x| mu[x] > 0.0).collect();
            let radius = supp.iter().map(|&x| space.rho(c.center, x)).fold(0.0, f64::max);
            CubeGeom { mu: space.mu_of(&c.members), size: lat.size(c.id), radius, supp }
        })
        .collect()
}

fn sup_abs(kop: &KernelMatrix, xs: &[usize], ys: &[usize]) -> f64 {
    let mut s: f64 = 0.0;
    for &x in xs {
        for &y in ys {
            s = s.max(kop.get(x, y).abs());
        }
    }
    s
}

/// `max mu(B) / s(B)^m` over transit cubes.
pub fn transit_growth(space: &MetricMeasureSpace, lat: &DyadicLattice, m: f64) -> f64 {
    lat.cubes()
        .iter()
        .filter(|c| c.is_transit())
        .map(|c| space.mu_of(&c.members) / lat.size(c.id).powf(m))
        .fold(0.0, f64::max)
}

/// Classifies every pair of good difference cubes and assembles the constants of the half.
pub fn analyze_half(h: Half, p: &SplitParams, bmo_cfg: BmoConfig) -> Result<HalfStructure> {
    let space = h.space;
    let (fine, coarse, kop) = (h.fine, h.coarse, h.kop);
    fine.require_classified()?;
    coarse.require_classified()?;
    let mu = space.mu();
    let n = space.n();
    let gf = geometry(space, fine);
    let gc = geometry(space, coarse);
    let fine_comps: Vec<usize> = fine.difference_cubes().into_iter().filter(|&a| h.good_fine[a]).collect();
    let coarse_comps: Vec<usize> = coarse.difference_cubes().into_iter().filter(|&b| h.good_coarse[b]).collect();
    let ones = vec![1.0; n];
    let symbol = kop.apply(space, &ones);
    let kappa = coarse.kappa();
    let r = p.r as i32;
    let first_gap = h.first_gap();

    // Op chi_{B1} for transit children of coarse components.
    let b1_list: Vec<usize> = {
        let mut v: Vec<usize> = coarse_comps
            .iter()
            .flat_map(|&b| coarse.cube(b).children.iter().cloned())
            .filter(|&c| coarse.cube(c).is_transit())
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    let chis = par_map(b1_list.len(), |i| kop.apply_indicator(space, &gc[b1_list[i]].supp));
    let op_chi: HashMap<usize, Vec<f64>> = b1_list.iter().cloned().zip(chis).collect();

    let per_b: Vec<(Vec<PairInfo>, AscentStats)> = par_map(coarse_comps.len(), |jb| {
        let b = coarse_comps[jb];
        let cb = coarse.cube(b);
        let near_all = space.dist_to_set_all(&cb.members);
        let near_supp = space.dist_to_set_all(&gc[b].supp);
        let mut rest_cache: HashMap<usize, (Vec<usize>, Vec<f64>)> = HashMap::new();
        let mut out = Vec::new();
        let mut stats = AscentStats::default();
        for &a in &fine_comps {
            let ca = fine.cube(a);
            let gap = ca.k - cb.k;
            if gap < first_gap {
                continue;
            }
            let ga = &gf[a];
            let omega = (ga.radius / ga.size).max(1.0);
            let thr = ga.size.powf(p.alpha) * gc[b].size.powf(1.0 - p.alpha);
            let dist = ca.members.iter().map(|&x| near_all[x]).fold(f64::INFINITY, f64::min);
            let mut info = PairInfo { a, b, class: PairClass::Sigma2, b1: None, coef: 0.0, admissible: false, t: 0.0, omega, ext_ok: false, ext_coef: 0.0 };
            let far_entry = |d_supp: f64, d_center: f64, support: &[usize], dist_ab: f64| -> (bool, f64, f64) {
                if support.is_empty() {
                    return (true, 0.0, 0.0);
                }
                let adm = d_supp >= thr && ga.radius <= p.delta_cz * d_center;
                let t = interaction_entry(ga.size, gc[b].size, dist_ab, ga.mu, gc[b].mu, p.m, p.tau);
                let coef = sup_abs(kop, &ga.supp, support) * (ga.mu * gc[b].mu).sqrt();
                (adm, if adm { t } else { 0.0 }, coef)
            };
            if gap <= r {
                if dist <= gc[b].size {
                    info.class = PairClass::Sigma1;
                    info.coef = near_beta(h, p, &gf, &gc, a, b);
                } else {
                    let d_supp = ca.members.iter().map(|&x| near_supp[x]).fold(f64::INFINITY, f64::min);
                    let (adm, t, coef) = far_entry(d_supp, near_supp[ca.center], &gc[b].supp, dist);
                    info.admissible = adm;
                    info.t = t;
                    info.coef = coef;
                }
                out.push(info);
                continue;
            }
            let intersects = ca.members.iter().any(|&x| cb.contains(x));
            if !intersects {
                let d_supp = ca.members.iter().map(|&x| near_supp[x]).fold(f64::INFINITY, f64::min);
                let (adm, t, coef) = far_entry(d_supp, near_supp[ca.center], &gc[b].supp, dist);
                info.admissible = adm;
                info.t = t;
                info.coef = coef;
                out.push(info);
                continue;
            }
            let b1 = cb.children.iter().cloned().find(|&c| ca.members.iter().all(|&x| coarse.cube(c).contains(x)));
            let Some(b1) = b1 else {
                info.class = PairClass::Stray;
                info.coef = sup_abs(kop, &ga.supp, &gc[b].supp) * (ga.mu * gc[b].mu).sqrt();
                out.push(info);
                continue;
            };
            info.b1 = Some(b1);
            if !coarse.cube(b1).is_transit() {
                info.class = PairClass::Sigma3Terminal;
                out.push(info);
                continue;
            }
            info.class = PairClass::Sigma3Transit;
            let (rest, near_rest) = rest_cache.entry(b1).or_insert_with(|| {
                let rest: Vec<usize> = gc[b].supp.iter().cloned().filter(|&y| !coarse.cube(b1).contains(y)).collect();
                let near = if rest.is_empty() { vec![f64::INFINITY; n] } else { space.dist_to_set_all(&rest) };
                (rest, near)
            });
            let d_rest = ca.members.iter().map(|&x| near_rest[x]).fold(f64::INFINITY, f64::min);
            let (adm, t, coef) = far_entry(d_rest, near_rest[ca.center], rest, 0.0);
            info.admissible = adm;
            info.t = t;
            info.coef = coef;

            // Extension error: ascent over the ancestors of B1.
            stats.chains += 1;
            let xa = ca.center;
            let mut prev = b1;
            let mut cur = coarse.cube(b1).parent;
            let mut levels_ok = true;
            let mut d_out = f64::INFINITY;
            while let Some(bj) = cur {
                stats.levels += 1;
                let pc = coarse.cube(prev);
                let mut dmin = f64::INFINITY;
                for &y in gc[bj].supp.iter().filter(|&&y| !pc.contains(y)) {
                    dmin = dmin.min(space.rho(xa, y));
                }
                d_out = d_out.min(dmin);
                let thr_j = ga.size.powf(p.alpha) * gc[bj].size.powf(1.0 - p.alpha);
                if dmin < thr_j {
                    levels_ok = false;
                    stats.level_violations += 1;
                }
                prev = bj;
                cur = coarse.cube(bj).parent;
            }
            let regime = ga.radius <= p.delta_cz * d_out;
            if !regime {
                stats.regime_violations += 1;
            }
            info.ext_ok = levels_ok && regime;
            // exact bound: |<Delta_A phi, u>| <= |Delta_A phi| |(u - <u>_A) chi_A|, |c| <= |Delta_B psi| / sqrt(mu(B1))
            let chi = &op_chi[&b1];
            let u: Vec<f64> = ga.supp.iter().map(|&x| symbol[x] - chi[x]).collect();
            let avg = ga.supp.iter().zip(&u).map(|(&x, v)| mu[x] * v).sum::<f64>() / ga.mu;
            let osc = ga.supp.iter().zip(&u).map(|(&x, v)| mu[x] * (v - avg).powi(2)).sum::<f64>().sqrt();
            info.ext_coef = osc / gc[b1].mu.sqrt();
            out.push(info);
        }
        (out, stats)
    });
    let mut pairs = Vec::new();
    let mut ascent = AscentStats::default();
    for (v, s) in per_b {
        pairs.extend(v);
        ascent.chains += s.chains;
        ascent.levels += s.levels;
        ascent.level_violations += s.level_violations;
        ascent.regime_violations += s.regime_violations;
    }

    let mut counts = PairCounts::default();
    for pi in &pairs {
        match pi.class {
            PairClass::Sigma1 => counts.sigma1 += 1,
            PairClass::Sigma2 => {
                counts.sigma2 += 1;
                counts.sigma2_admissible += pi.admissible as usize;
            }
            PairClass::Sigma3Terminal => counts.sigma3_terminal += 1,
            PairClass::Sigma3Transit => {
                counts.sigma3_transit += 1;
                counts.sigma3_far_admissible += pi.admissible as usize;
                counts.sigma3_ext_ok += pi.ext_ok as usize;
            }
            PairClass::Stray => counts.stray += 1,
        }
    }

    let interaction = interaction_matrix(space, fine, coarse, p.m, p.tau, !h.lower)?;
    let schur = schur_constant(space, fine, coarse, p.m, p.tau, !h.lower)?;
    let schur_spectral = (interaction.rows.len() + interaction.cols.len() <= SPECTRAL_LIMIT)
        .then(|| spectral_norm(&interaction.entries, interaction.rows.len(), interaction.cols.len()));

    let ext_pairs: Vec<(usize, usize)> = pairs.iter().filter(|pi| pi.ext_ok).map(|pi| (pi.a, pi.b)).collect();
    let blocks = block_instances(space, fine, coarse, &ext_pairs, p.tau)?;

    let paraproduct = build_paraproduct(space, fine, coarse, h.good_fine, &symbol, p.r)?;
    let carleson = paraproduct.carleson(space, coarse);
    let whitney = WhitneyCache::new(space, fine)?;
    let mut whitney_multiplicity = 0;
    for c in coarse.cubes().iter().filter(|c| c.is_transit()) {
        whitney_multiplicity = whitney_multiplicity.max(whitney.decompose(fine, n, &c.members).multiplicity);
    }
    let bmo = pseudo_bmo_check(space, kop, fine, &symbol, bmo_cfg)?;

    // constants
    let far = p.far();
    let c41 = far.constant();
    let m_tr = transit_growth(space, coarse, p.m);
    let geo = 1.0 / (1.0 - kappa.powf(p.tau / 2.0));
    let unit = |class: PairClass, pick: &dyn Fn(&PairInfo) -> Option<f64>| -> f64 {
        let e: Vec<(usize, usize, f64)> = pairs.iter().filter(|pi| pi.class == class).filter_map(|pi| pick(pi).map(|c| (pi.a, pi.b, c))).collect();
        schur_unit_bound(&e)
    };
    let omega_max = |class: PairClass, pick: &dyn Fn(&PairInfo) -> bool| -> f64 {
        pairs.iter().filter(|pi| pi.class == class && pick(pi)).map(|pi| pi.omega).fold(1.0, f64::max)
    };
    let any = |class: PairClass, pick: &dyn Fn(&PairInfo) -> bool| pairs.iter().any(|pi| pi.class == class && pick(pi));

    let c_sigma1 = unit(PairClass::Sigma1, &|pi| Some(pi.coef));
    let mut neighbors: BTreeMap<(bool, usize), usize> = BTreeMap::new();
    for pi in pairs.iter().filter(|pi| pi.class == PairClass::Sigma1) {
        *neighbors.entry((false, pi.a)).or_default() += 1;
        *neighbors.entry((true, pi.b)).or_default() += 1;
    }
    let neighbor_max = neighbors.values().cloned().max().unwrap_or(0);

    let omega_s2 = omega_max(PairClass::Sigma2, &|pi| pi.admissible);
    let lemma_s2 = if any(PairClass::Sigma2, &|pi| pi.admissible) { c41 * omega_s2.powf(p.tau) * schur.total } else { 0.0 };
    let fallback_s2 = {
        let e: Vec<(usize, usize, f64)> = pairs
            .iter()
            .filter(|pi| (pi.class == PairClass::Sigma2 && !pi.admissible) || pi.class == PairClass::Stray)
            .map(|pi| (pi.a, pi.b, pi.coef))
            .collect();
        schur_unit_bound(&e)
    };
    let c_sigma2 = lemma_s2 + fallback_s2;

    let max_terminal_children = coarse_comps
        .iter()
        .map(|&b| coarse.cube(b).children.iter().filter(|&&c| coarse.cube(c).is_terminal() && gc[c].mu > 0.0).count())
        .max()
        .unwrap_or(0);
    let c_term = if counts.sigma3_terminal > 0 { p.c22 * m_tr * (max_terminal_children as f64).sqrt() } else { 0.0 };

    let omega_far = omega_max(PairClass::Sigma3Transit, &|pi| pi.admissible && pi.t > 0.0);
    let lemma_far = if any(PairClass::Sigma3Transit, &|pi| pi.admissible && pi.t > 0.0) { c41 * omega_far.powf(p.tau) * schur.total } else { 0.0 };
    let c_far = lemma_far + unit(PairClass::Sigma3Transit, &|pi| (!pi.admissible).then_some(pi.coef));

    let omega_ext = omega_max(PairClass::Sigma3Transit, &|pi| pi.ext_ok);
    let n_slots = blocks.len();
    let lemma_ext = if counts.sigma3_ext_ok > 0 { p.c_cz * omega_ext.powf(p.tau) * m_tr * geo * n_slots as f64 * geo } else { 0.0 };
    let c_ext = lemma_ext + unit(PairClass::Sigma3Transit, &|pi| (!pi.ext_ok).then_some(pi.ext_coef));

    let c_para = 2.0 * carleson.constant.sqrt();
    let total = c_sigma1 + c_sigma2 + c_term + c_far + c_ext + c_para;
    let constants = HalfConstants {
        sigma1: c_sigma1,
        sigma2: c_sigma2,
        sigma3_terminal: c_term,
        sigma3_far: c_far,
        sigma3_extension: c_ext,
        paraproduct: c_para,
        total,
        far_lemma: c41,
        schur: schur.total,
        omega_sigma2: omega_s2,
        omega_far,
        omega_extension: omega_ext,
        m_transit: m_tr,
        n_slots,
        max_terminal_children,
        neighbor_max,
        carleson: carleson.constant,
        whitney_multiplicity,
        bmo_fitted: bmo.fitted,
    };
    Ok(HalfStructure {
        lower: h.lower,
        pairs,
        counts,
        ascent,
        symbol,
        op_chi,
        interaction,
        schur,
        schur_spectral,
        blocks,
        paraproduct,
        carleson,
        bmo,
        constants,
    })
}

/// Per-pair constant of a near pair: Frobenius norm of the child-pair bounds. Two transit
/// children interact through the testing constant; a terminal child through the kernel bound
/// at its parent's scale.
fn near_beta(h: Half, p: &SplitParams, gf: &[CubeGeom], gc: &[CubeGeom], a: usize, b: usize) -> f64 {
    let ca = h.fine.cube(a);
    let cb = h.coarse.cube(b);
    let sa = gf[a].size.powf(p.m);
    let sb = gc[b].size.powf(p.m);
    let mut sum = 0.0;
    for &s in ca.children.iter().filter(|&&s| gf[s].mu > 0.0) {
        let st = h.fine.cube(s).is_transit();
        for &t in cb.children.iter().filter(|&&t| gc[t].mu > 0.0) {
            let tt = h.coarse.cube(t).is_transit();
            let g = if st && tt {
                p.a_t1.sqrt()
            } else {
                let mut c = f64::INFINITY;
                if !st {
                    c = c.min(p.c22 / sa);
                }
                if !tt {
                    c = c.min(p.c22 / sb);
                }
                c * (gf[s].mu * gc[t].mu).sqrt()
            };
            sum += g * g;
        }
    }
    sum.sqrt()
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PairCheck {
    pub checked: usize,
    pub failed: usize,
    /// Largest `measured / bound`.
    pub worst_ratio: f64,
}

impl PairCheck {
    fn add(&mut self, measured: f64, bound: f64) {
        self.checked += 1;
        let ok = measured <= bound * (1.0 + 1e-9) + 1e-13;
        if !ok {
            self.failed += 1;
        }
        if bound > 0.0 {
            self.worst_ratio = self.worst_ratio.max(measured / bound);
        } else if measured > 1e-13 {
            self.worst_ratio = f64::INFINITY;
        }
    }

    pub fn pass(&self) -> bool {
        self.failed == 0
    }
}

/// Contribution of one pair, kept in verbose mode. For nested transit pairs `value` is the sum
/// of the three parts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairTerm {
    pub lower: bool,
    pub a: usize,
    pub b: usize,
    pub class: PairClass,
    pub value: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct HalfValues {
    pub sigma1: f64,
    pub sigma2: f64,
    pub sigma3_terminal: f64,
    pub sigma3_far: f64,
    pub sigma3_extension: f64,
    pub sigma3_paraproduct: f64,
    /// `|phi| sup|psi| (sum_R a_R)^(1/2)` for the full probes: round-off scale of the regrouping.
    /// Averages and means that vanish exactly come out at `eps` times the probe, not the good part.
    pub paraproduct_scale: f64,
    pub stray: f64,
    /// `|phi'|` and `|psi'|`: norms of the good parts without their averages.
    pub norm_phi: f64,
    pub norm_psi: f64,
    pub pair_sigma1: PairCheck,
    /// Far estimate with the plain constant, on admissible sigma2 and sigma3 far pairs.
    pub far_plain: PairCheck,
    /// Same pairs with the radius factor.
    pub far_radius: PairCheck,
    pub pair_fallback: PairCheck,
    pub pair_extension: PairCheck,
    pub schur_lhs: f64,
    pub schur_rhs: f64,
    pub blocks: Vec<BlockCheck>,
    /// `(|Pi psi'|^2, sum_R <psi'>_R^2 a_R)`.
    pub para_norm: (f64, f64),
    /// `(sum of paraproduct parts, <phi', Pi psi'>)`.
    pub para_regroup: (f64, f64),
    #[serde(skip)]
    pub terms: Vec<PairTerm>,
}

impl HalfValues {
    pub fn sigma3_transit(&self) -> f64 {
        self.sigma3_far + self.sigma3_extension + self.sigma3_paraproduct
    }

    pub fn sum(&self) -> f64 {
        self.sigma1 + self.sigma2 + self.sigma3_terminal + self.sigma3_transit() + self.stray
    }
}

fn dot_component(space: &MetricMeasureSpace, support: &[usize], values: &[f64], w: &[f64]) -> f64 {
    let mu = space.mu();
    support.iter().zip(values).map(|(&x, v)| v * mu[x] * w[x]).sum()
}

/// Evaluates every pair of the half on one probe pair. `phi` is decomposed on the fine lattice
/// and `psi` on the coarse lattice.
pub fn evaluate_half(h: Half, st: &HalfStructure, p: &SplitParams, phi: &Decomposition, psi: &Decomposition, verbose: bool) -> HalfValues {
    let space = h.space;
    let n = space.n();
    let mu = space.mu();
    let far = p.far();
    let c41 = far.constant();
    let mut v = HalfValues::default();
    let mut phi_good = vec![0.0; n];
    for c in phi.components.iter().filter(|c| h.good_fine[c.cube]) {
        c.add_into(&mut phi_good, 1.0);
    }
    let mut psi_good = vec![0.0; n];
    for c in psi.components.iter().filter(|c| h.good_coarse[c.cube]) {
        c.add_into(&mut psi_good, 1.0);
    }
    v.norm_phi = norm_mu(mu, &phi_good);
    v.norm_psi = norm_mu(mu, &psi_good);

    let mut by_b: BTreeMap<usize, Vec<&PairInfo>> = BTreeMap::new();
    for pi in &st.pairs {
        by_b.entry(pi.b).or_default().push(pi);
    }
    let groups: Vec<(usize, Vec<&PairInfo>)> = by_b.into_iter().collect();
    type Row = (PairClass, f64, f64, f64, f64);
    let results: Vec<Vec<(usize, Row, bool)>> = par_map(groups.len(), |gi| {
        let (b, list) = &groups[gi];
        let Some(db) = psi.component(*b) else { return Vec::new() };
        let dense = db.to_dense(n);
        let w = h.kop.apply(space, &dense);
        let nb = db.norm(space);
        let mut out = Vec::with_capacity(list.len());
        for (idx, pi) in list.iter().enumerate() {
            let Some(da) = phi.component(pi.a) else { continue };
            let na = da.norm(space);
            match pi.class {
                PairClass::Sigma3Transit => {
                    let b1 = pi.b1.expect("sigma3 pair has a child");
                    let cval = dense[h.coarse.cube(b1).members[0]];
                    let chi = &st.op_chi[&b1];
                    let rest: Vec<f64> = (0..n).map(|x| w[x] - cval * chi[x]).collect();
                    let far_part = dot_component(space, &da.support, &da.values, &rest);
                    let a1 = dot_component(space, &da.support, &da.values, &st.symbol);
                    let a2 = dot_component(space, &da.support, &da.values, chi);
                    let ext = -cval * (a1 - a2);
                    let para = cval * a1;
                    let rest_norm = (nb * nb - cval * cval * h.space.mu_of(&h.coarse.cube(b1).members)).max(0.0).sqrt();
                    out.push((idx, (pi.class, far_part, ext, para, na * rest_norm), true));
                }
                _ => {
                    let t = dot_component(space, &da.support, &da.values, &w);
                    out.push((idx, (pi.class, t, na, nb, 0.0), false));
                }
            }
        }
        out
    });

    let mut a_norm: HashMap<usize, f64> = HashMap::new();
    let mut b_norm: HashMap<usize, f64> = HashMap::new();
    for (gi, res) in results.iter().enumerate() {
        let (b, list) = &groups[gi];
        let nb = psi.component(*b).map(|c| c.norm(space)).unwrap_or(0.0);
        b_norm.insert(*b, nb);
        for &(idx, (class, x1, x2, x3, x4), transit) in res {
            let pi = list[idx];
            let na = *a_norm.entry(pi.a).or_insert_with(|| phi.component(pi.a).map(|c| c.norm(space)).unwrap_or(0.0));
            if verbose {
                let value = if transit { x1 + x2 + x3 } else { x1 };
                v.terms.push(PairTerm { lower: h.lower, a: pi.a, b: pi.b, class, value });
            }
            if transit {
                v.sigma3_far += x1;
                v.sigma3_extension += x2;
                v.sigma3_paraproduct += x3;
                if pi.admissible && pi.t > 0.0 {
                    v.far_plain.add(x1.abs(), c41 * pi.t * x4);
                    v.far_radius.add(x1.abs(), c41 * pi.omega.powf(p.tau) * pi.t * x4);
                } else {
                    v.pair_fallback.add(x1.abs(), pi.coef * na * nb);
                }
                let ext_bound = if pi.ext_ok {
                    let b1 = pi.b1.unwrap();
                    let t54 = block_entry(space, h.fine, pi.a, h.coarse, pi.b, b1, p.tau);
                    let geo = 1.0 / (1.0 - h.coarse.kappa().powf(p.tau / 2.0));
                    p.c_cz * pi.omega.powf(p.tau) * st.constants.m_transit * geo * t54
                } else {
                    pi.ext_coef
                };
                v.pair_extension.add(x2.abs(), ext_bound * na * nb);
                continue;
            }
            let t = x1;
            match class {
                PairClass::Sigma1 => {
                    v.sigma1 += t;
                    v.pair_sigma1.add(t.abs(), pi.coef * x2 * x3);
                }
                PairClass::Sigma2 => {
                    v.sigma2 += t;
                    if pi.admissible {
                        v.far_plain.add(t.abs(), c41 * pi.t * x2 * x3);
                        v.far_radius.add(t.abs(), c41 * pi.omega.powf(p.tau) * pi.t * x2 * x3);
                    } else {
                        v.pair_fallback.add(t.abs(), pi.coef * x2 * x3);
                    }
                }
                PairClass::Sigma3Terminal => v.sigma3_terminal += t,
                PairClass::Stray => {
                    v.stray += t;
                    v.pair_fallback.add(t.abs(), pi.coef * x2 * x3);
                }
                PairClass::Sigma3Transit => unreachable!(),
            }
        }
    }

    // long-range Schur test with the component norms
    let a: Vec<f64> = st.interaction.rows.iter().map(|&q| if h.good_fine[q] { phi.component(q).map(|c| c.norm(space)).unwrap_or(0.0) } else { 0.0 }).collect();
    let b: Vec<f64> = st.interaction.cols.iter().map(|&q| if h.good_coarse[q] { psi.component(q).map(|c| c.norm(space)).unwrap_or(0.0) } else { 0.0 }).collect();
    let (lhs, rhs) = schur_bound_long_range(&st.interaction, &st.schur, &a, &b);
    v.schur_lhs = lhs;
    v.schur_rhs = rhs;

    for inst in &st.blocks {
        let a: Vec<f64> = inst.rows.iter().map(|&q| phi.component(q).map(|c| c.norm(space)).unwrap_or(0.0)).collect();
        let b: Vec<f64> = inst.cols.iter().map(|&q| psi.component(q).map(|c| c.norm(space)).unwrap_or(0.0)).collect();
        v.blocks.push(block_matrix_bound(inst, &a, &b, BLOCK_SPECTRAL_LIMIT));
    }

    v.para_norm = st.paraproduct.norm_identity(space, h.coarse, &psi_good);
    let pi_psi = st.paraproduct.apply(space, h.coarse, &psi_good);
    v.para_regroup = (v.sigma3_paraproduct, inner_mu(mu, &phi_good, &pi_psi));
    let sup_psi = psi.reconstruct().iter().zip(mu).filter(|(_, &w)| w > 0.0).map(|(v, _)| v.abs()).fold(0.0, f64::max);
    v.paraproduct_scale = norm_mu(mu, &phi.reconstruct()) * sup_psi * st.paraproduct.weights.values().sum::<f64>().sqrt();
    v
}

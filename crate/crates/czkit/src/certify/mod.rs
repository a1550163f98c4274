//! Numerical certificate for the operator norm.
//!
//! For each random pair of lattices the good-part form `<T f_good, g_good>` is split into the
//! average part and two halves (see [`split`]). Each piece gets an explicit constant, every
//! estimate used on the way is checked on probe functions, and the certified bound is twice the
//! largest per-pair constant, since the bad parts cost at most half the norm when
//! `delta_bad = 1/4`.

pub mod block;
pub mod bmo;
pub mod far;
pub mod paraproduct;
pub mod schur;
pub mod split;

use crate::error::{Error, Result};
use crate::kernel::{check_size_and_smoothness, check_t1, operator_norm, t1_family, terminal_scale_constant, KernelMatrix, KernelSpec, NormEstimate, PointScope, PowerIterOptions, TestSet};
use crate::lattice::{alpha, scale_gap, BadnessOracle, DyadicLattice, GoodBadParams};
use crate::montecarlo::{bad_probabilities, expected_bad_norm, EnsembleConfig};
use crate::projections::{decompose, delta};
use crate::space::MetricMeasureSpace;
use crate::util::{derive_seed, inner_mu, norm_mu, rng};
use bmo::{BmoConfig, BmoReport};
use rand::Rng;
use serde::{Deserialize, Serialize};
use split::{analyze_half, evaluate_half, AscentStats, Half, HalfConstants, HalfStructure, HalfValues, PairCounts, SplitParams};
use std::collections::BTreeMap;

/// Dilation factors added to the testing family.
pub const T1_DILATIONS: [f64; 3] = [1.2, 1.4, 1.5];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertifyConfig {
    pub kappa: f64,
    pub delta_bad: f64,
    /// Integer `S` of the scale gap.
    pub s: u32,
    /// Monte Carlo ensemble size for the bad-cube estimates; zero skips them.
    pub ensemble: usize,
    /// Number of random lattice pairs the split is run on.
    pub pairs: usize,
    pub master_seed: u64,
    pub n_probes: usize,
    pub lambda_bmo: f64,
    pub k_bmo: f64,
    pub power: PowerIterOptions,
    /// Keep per-pair contributions in the splits.
    pub verbose: bool,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        Self {
            kappa: 0.5,
            delta_bad: 0.25,
            s: 1,
            ensemble: 0,
            pairs: 2,
            master_seed: 11,
            n_probes: 6,
            lambda_bmo: 1.4,
            k_bmo: 2.0,
            power: PowerIterOptions::default(),
            verbose: false,
        }
    }
}

impl CertifyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return Err(Error::invalid("kappa must lie in (0, 1)"));
        }
        if !(self.delta_bad > 0.0 && self.delta_bad < 1.0) {
            return Err(Error::invalid("delta_bad must lie in (0, 1)"));
        }
        if self.s == 0 || self.pairs == 0 || self.n_probes == 0 {
            return Err(Error::invalid("S, pairs and n_probes must be positive"));
        }
        if !(self.lambda_bmo > 1.0 && self.k_bmo > 0.0) {
            return Err(Error::invalid("Lambda_bmo must exceed 1 and K must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LemmaEntry {
    pub name: String,
    pub paper_ref: String,
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
}

/// The split of one probe pair on one lattice pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SigmaSplit {
    pub sigma1: f64,
    pub sigma2: f64,
    pub sigma3_term: f64,
    pub sigma3_tran: f64,
    pub sym_sigma1: f64,
    pub sym_sigma2: f64,
    pub sym_sigma3_term: f64,
    pub sym_sigma3_tran: f64,
    /// Pairs more than `r` generations apart that meet without nesting; zero for good cubes.
    pub stray: f64,
    pub lambda_part: f64,
    pub total: f64,
    /// `<T f_good, g_good>` computed densely.
    pub direct: f64,
    /// `|total - direct|` over the sum of the absolute values of the parts.
    pub rel_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub terms: Option<Vec<split::PairTerm>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HalfReport {
    pub lower: bool,
    pub constants: HalfConstants,
    pub counts: PairCounts,
    pub ascent: AscentStats,
    pub schur_spectral: Option<f64>,
    pub n_blocks: usize,
    pub unassigned_paraproduct: usize,
    pub bmo: BmoReport,
}

impl HalfReport {
    fn new(st: &HalfStructure) -> Self {
        Self {
            lower: st.lower,
            constants: st.constants.clone(),
            counts: st.counts.clone(),
            ascent: st.ascent.clone(),
            schur_spectral: st.schur_spectral,
            n_blocks: st.blocks.len(),
            unassigned_paraproduct: st.paraproduct.unassigned.len(),
            bmo: st.bmo.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatticePairReport {
    pub seeds: (u64, u64),
    pub a_t1: f64,
    pub c22: f64,
    /// `2 sqrt(A)`.
    pub c_lambda: f64,
    /// `c_lambda` plus both half totals.
    pub total: f64,
    pub n_good: (usize, usize),
    pub halves: Vec<HalfReport>,
    pub splits: Vec<SigmaSplit>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Certificate {
    pub constants: BTreeMap<String, f64>,
    pub lemmas: Vec<LemmaEntry>,
    pub certified_total: f64,
    pub empirical_norm: f64,
    pub norm: NormEstimate,
    pub verdict: String,
    pub lattice_pairs: Vec<LatticePairReport>,
}

impl Certificate {
    pub fn pass(&self) -> bool {
        self.verdict == "pass"
    }

    pub fn lemma(&self, name: &str) -> Option<&LemmaEntry> {
        self.lemmas.iter().find(|l| l.name == name)
    }
}

/// Largest `measured / bound` seen for one estimate, remembered with its operands.
#[derive(Debug, Clone)]
struct Worst {
    name: &'static str,
    paper_ref: &'static str,
    measured: f64,
    bound: f64,
    ratio: f64,
    pass: bool,
    seen: bool,
}

impl Worst {
    fn new(name: &'static str, paper_ref: &'static str) -> Self {
        Self { name, paper_ref, measured: 0.0, bound: 0.0, ratio: f64::NEG_INFINITY, pass: true, seen: false }
    }

    fn add(&mut self, measured: f64, bound: f64, pass: bool) {
        let ratio = if bound > 0.0 {
            measured / bound
        } else if measured > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        if !self.seen || ratio > self.ratio || (self.pass && !pass) {
            self.measured = measured;
            self.bound = bound;
            self.ratio = ratio;
        }
        self.seen = true;
        self.pass &= pass;
    }

    fn le(&mut self, measured: f64, bound: f64) {
        self.add(measured, bound, measured <= bound * (1.0 + 1e-9) + 1e-12);
    }

    fn entry(&self) -> LemmaEntry {
        LemmaEntry { name: self.name.into(), paper_ref: self.paper_ref.into(), measured: self.measured, bound: self.bound, pass: self.pass }
    }
}

/// Probe functions on a lattice pair: random vectors, single martingale differences and cube
/// indicators, each scaled to unit norm.
pub fn probe_functions(space: &MetricMeasureSpace, d1: &DyadicLattice, d2: &DyadicLattice, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let n = space.n();
    let mu = space.mu();
    let mut rg = rng(seed);
    let mut out = Vec::new();
    let mut attempt = 0;
    while out.len() < count && attempt < 50 * count.max(1) {
        attempt += 1;
        let lat = if out.len() % 2 == 0 { d1 } else { d2 };
        let v: Vec<f64> = (0..n).map(|_| rg.gen_range(-1.0..1.0)).collect();
        let f = match (out.len() / 2) % 3 {
            0 => v,
            1 => {
                let cand = lat.difference_cubes();
                if cand.is_empty() {
                    v
                } else {
                    let q = cand[rg.gen_range(0..cand.len())];
                    delta(space, lat, &v, q)?.to_dense(n)
                }
            }
            _ => {
                let cand: Vec<usize> = lat.cubes().iter().filter(|c| space.mu_of(&c.members) > 0.0).map(|c| c.id).collect();
                let q = cand[rg.gen_range(0..cand.len())];
                let mut f = vec![0.0; n];
                for &x in &lat.cube(q).members {
                    f[x] = 1.0;
                }
                f
            }
        };
        let nf = norm_mu(mu, &f);
        if nf > 1e-12 {
            out.push(f.iter().map(|x| x / nf).collect());
        }
    }
    Ok(out)
}

/// Everything computed once for a lattice pair.
pub struct PairSetup {
    pub d1: DyadicLattice,
    pub d2: DyadicLattice,
    pub good1: Vec<bool>,
    pub good2: Vec<bool>,
    pub family: Vec<TestSet>,
    pub a_t1: f64,
    pub c22: f64,
    pub params: SplitParams,
}

/// Builds and classifies two lattices and fits the pair-level constants.
#[allow(clippy::too_many_arguments)]
pub fn setup_pair(space: &MetricMeasureSpace, spec: &KernelSpec, km: &KernelMatrix, c_cz: f64, cfg: &CertifyConfig, seeds: (u64, u64)) -> Result<PairSetup> {
    let mut d1 = DyadicLattice::build(space, cfg.kappa, seeds.0, None)?;
    let mut d2 = DyadicLattice::build(space, cfg.kappa, seeds.1, None)?;
    d1.classify_terminal_transit(space, spec.m)?;
    d2.classify_terminal_transit(space, spec.m)?;
    let gb = GoodBadParams { alpha: alpha(spec.tau, spec.m), r: scale_gap(cfg.kappa, cfg.delta_bad, cfg.s) };
    let good1 = BadnessOracle::new(space, &d2).good_mask(&d1, gb);
    let good2 = BadnessOracle::new(space, &d1).good_mask(&d2, gb);
    let mut lambdas = T1_DILATIONS.to_vec();
    if !lambdas.contains(&cfg.lambda_bmo) {
        lambdas.push(cfg.lambda_bmo);
    }
    let family = t1_family(space, &[&d1, &d2], &lambdas)?;
    let a_t1 = check_t1(km, space, &family).a;
    let c22 = terminal_scale_constant(km, space, &d1, spec.m)?.max(terminal_scale_constant(km, space, &d2, spec.m)?);
    let params = SplitParams { a_t1, c22, c_cz, m: spec.m, tau: spec.tau, delta_cz: spec.delta_cz, alpha: gb.alpha, r: gb.r };
    Ok(PairSetup { d1, d2, good1, good2, family, a_t1, c22, params })
}

impl PairSetup {
    pub fn lower<'a>(&'a self, space: &'a MetricMeasureSpace, kt: &'a KernelMatrix) -> Half<'a> {
        Half { space, fine: &self.d1, coarse: &self.d2, kop: kt, good_fine: &self.good1, good_coarse: &self.good2, lower: true }
    }

    pub fn upper<'a>(&'a self, space: &'a MetricMeasureSpace, km: &'a KernelMatrix) -> Half<'a> {
        Half { space, fine: &self.d2, coarse: &self.d1, kop: km, good_fine: &self.good2, good_coarse: &self.good1, lower: false }
    }

    pub fn bmo_config(&self, cfg: &CertifyConfig) -> BmoConfig {
        BmoConfig { lambda: cfg.lambda_bmo, k_adm: cfg.k_bmo, c_cz: self.params.c_cz, m: self.params.m, tau: self.params.tau, a_t1: self.a_t1 }
    }
}

/// Splits `<T f_good, g_good>` for one probe pair, given the analysed halves.
#[allow(clippy::too_many_arguments)]
pub fn split_with(
    space: &MetricMeasureSpace,
    km: &KernelMatrix,
    kt: &KernelMatrix,
    setup: &PairSetup,
    lower: &HalfStructure,
    upper: &HalfStructure,
    f: &[f64],
    g: &[f64],
    verbose: bool,
) -> Result<(SigmaSplit, HalfValues, HalfValues)> {
    let mu = space.mu();
    let n = space.n();
    let df = decompose(space, &setup.d1, f)?;
    let dg = decompose(space, &setup.d2, g)?;
    let vl = evaluate_half(setup.lower(space, kt), lower, &setup.params, &df, &dg, verbose);
    let vu = evaluate_half(setup.upper(space, km), upper, &setup.params, &dg, &df, verbose);
    let (f_good, _) = df.split_good_bad(&setup.good1);
    let (g_good, _) = dg.split_good_bad(&setup.good2);
    let lam_g = vec![dg.lambda; n];
    let lam_f = vec![df.lambda; n];
    let g_prime: Vec<f64> = g_good.iter().map(|v| v - dg.lambda).collect();
    let tf = km.apply(space, &f_good);
    let lambda_part = inner_mu(mu, &tf, &lam_g) + inner_mu(mu, &km.apply(space, &lam_f), &g_prime);
    let direct = inner_mu(mu, &tf, &g_good);
    let total = lambda_part + vl.sum() + vu.sum();
    let parts = [
        lambda_part,
        vl.sigma1,
        vl.sigma2,
        vl.sigma3_terminal,
        vl.sigma3_far,
        vl.sigma3_extension,
        vl.sigma3_paraproduct,
        vl.stray,
        vu.sigma1,
        vu.sigma2,
        vu.sigma3_terminal,
        vu.sigma3_far,
        vu.sigma3_extension,
        vu.sigma3_paraproduct,
        vu.stray,
    ];
    let scale = parts.iter().map(|v| v.abs()).sum::<f64>().max(direct.abs());
    let rel_error = if scale > 0.0 { (total - direct).abs() / scale } else { 0.0 };
    let terms = verbose.then(|| vl.terms.iter().chain(vu.terms.iter()).cloned().collect());
    let s = SigmaSplit {
        sigma1: vl.sigma1,
        sigma2: vl.sigma2,
        sigma3_term: vl.sigma3_terminal,
        sigma3_tran: vl.sigma3_transit(),
        sym_sigma1: vu.sigma1,
        sym_sigma2: vu.sigma2,
        sym_sigma3_term: vu.sigma3_terminal,
        sym_sigma3_tran: vu.sigma3_transit(),
        stray: vl.stray + vu.stray,
        lambda_part,
        total,
        direct,
        rel_error,
        terms,
    };
    Ok((s, vl, vu))
}

const REF_SIZE: &str = "size and smoothness of the kernel";
const REF_T1: &str = "testing condition on cubes and dilates";
const REF_BAD: &str = "probability that a cube is bad";
const REF_BADNORM: &str = "expected norm of the bad part";
const REF_SPLIT: &str = "exact regrouping of the good-part form";
const REF_LAMBDA: &str = "removal of the averages";
const REF_NEAR: &str = "near pairs at comparable scales";
const REF_FAR: &str = "separated cubes, plain constant";
const REF_FAR_R: &str = "separated cubes, radius-corrected constant";
const REF_FALLBACK: &str = "exact local bounds where the far estimate does not apply";
const REF_SCHUR: &str = "long-range interaction matrix, Schur test";
const REF_SCHUR_SPEC: &str = "Schur constant against the dense norm";
const REF_TERM: &str = "nested pairs inside terminal children";
const REF_NFAR: &str = "nested pairs, part away from the child";
const REF_EXT: &str = "nested pairs, extension to the whole space";
const REF_BLOCK: &str = "block matrix of nested pairs";
const REF_PARA_ID: &str = "paraproduct norm identity";
const REF_PARA_RG: &str = "paraproduct regrouping";
const REF_PARA: &str = "paraproduct bound";
const REF_CARL: &str = "Carleson constant against the oscillation constant";
const REF_BMO: &str = "bounded mean oscillation of the adjoint image of one";
const REF_HALF: &str = "half constants on probe pairs";
const REF_GOOD: &str = "good-part form";
const REF_NORM: &str = "norm bound";
const REF_NEC: &str = "testing bound implied by the norm";

/// Runs the full certificate.
pub fn certify(space: &MetricMeasureSpace, spec: &KernelSpec, cfg: &CertifyConfig) -> Result<Certificate> {
    cfg.validate()?;
    let km = spec.evaluate(space)?;
    let kt = km.transpose();
    let cz = check_size_and_smoothness(spec, &km, space, PointScope::Support);
    // constants used in the bounds must hold on the instance
    let c_cz = cz.declared.max(cz.c_size).max(cz.c_smooth);
    let gb = GoodBadParams { alpha: alpha(spec.tau, spec.m), r: scale_gap(cfg.kappa, cfg.delta_bad, cfg.s) };

    let mut w_size = Worst::new("kernel_size_smoothness", REF_SIZE);
    w_size.add(cz.c_size.max(cz.c_smooth), cz.declared, cz.pass);
    let mut w_t1 = Worst::new("testing_condition", REF_T1);
    let mut w_split = Worst::new("regrouping", REF_SPLIT);
    let mut w_lambda = Worst::new("lambda_part", REF_LAMBDA);
    let mut w_near = Worst::new("near_pairs", REF_NEAR);
    let mut w_far = Worst::new("far_interaction", REF_FAR);
    let mut w_far_r = Worst::new("far_interaction_radius", REF_FAR_R);
    let mut w_fb = Worst::new("local_fallback", REF_FALLBACK);
    let mut w_schur = Worst::new("long_range_schur", REF_SCHUR);
    let mut w_schur_spec = Worst::new("schur_spectral", REF_SCHUR_SPEC);
    let mut w_term = Worst::new("nested_terminal", REF_TERM);
    let mut w_nfar = Worst::new("nested_far", REF_NFAR);
    let mut w_ext = Worst::new("extension_error", REF_EXT);
    let mut w_block = Worst::new("block_matrix", REF_BLOCK);
    let mut w_para_id = Worst::new("paraproduct_identity", REF_PARA_ID);
    let mut w_para_rg = Worst::new("paraproduct_regroup", REF_PARA_RG);
    let mut w_para = Worst::new("paraproduct_bound", REF_PARA);
    let mut w_carl = Worst::new("carleson_vs_bmo", REF_CARL);
    let mut w_bmo = Worst::new("pseudo_bmo", REF_BMO);
    let mut w_half = Worst::new("half_bounds", REF_HALF);
    let mut w_good = Worst::new("good_form", REF_GOOD);

    let mut reports = Vec::new();
    let mut best_total: f64 = 0.0;
    let mut families: Vec<Vec<TestSet>> = Vec::new();
    let mut first_d1: Option<DyadicLattice> = None;
    let mut all_probes: Vec<Vec<f64>> = Vec::new();
    for i in 0..cfg.pairs {
        let seeds = (derive_seed(cfg.master_seed, 2 * i as u64), derive_seed(cfg.master_seed, 2 * i as u64 + 1));
        let setup = setup_pair(space, spec, &km, c_cz, cfg, seeds)?;
        w_t1.add(setup.a_t1, f64::MAX, setup.a_t1.is_finite());
        let bcfg = setup.bmo_config(cfg);
        let lower = analyze_half(setup.lower(space, &kt), &setup.params, bcfg)?;
        let upper = analyze_half(setup.upper(space, &km), &setup.params, bcfg)?;
        let c_lambda = 2.0 * setup.a_t1.sqrt();
        let total = c_lambda + lower.constants.total + upper.constants.total;
        best_total = best_total.max(total);

        for st in [&lower, &upper] {
            if let Some(sp) = st.schur_spectral {
                w_schur_spec.le(sp, st.schur.total);
            }
            let c = &st.constants;
            w_carl.le(c.carleson, c.whitney_multiplicity as f64 * c.bmo_fitted);
            w_bmo.add(st.bmo.fitted, st.bmo.proven, st.bmo.pass);
        }

        let probes = probe_functions(space, &setup.d1, &setup.d2, cfg.n_probes, derive_seed(cfg.master_seed, 1_000_000 + i as u64))?;
        let mut splits = Vec::new();
        let np = probes.len();
        for a in 0..np {
            for b in [a, (a + 1) % np] {
                if np > 1 && b == a && a % 2 == 1 {
                    continue;
                }
                let (f, g) = (&probes[a], &probes[b]);
                let (s, vl, vu) = split_with(space, &km, &kt, &setup, &lower, &upper, f, g, cfg.verbose)?;
                let nf = norm_mu(space.mu(), f);
                let ng = norm_mu(space.mu(), g);
                w_split.le(s.rel_error, 1e-9);
                w_lambda.le(s.lambda_part.abs(), c_lambda * nf * ng);
                w_good.le(s.direct.abs(), total * nf * ng);
                for (v, st) in [(&vl, &lower), (&vu, &upper)] {
                    let c = &st.constants;
                    let pq = v.norm_phi * v.norm_psi;
                    w_near.add(v.pair_sigma1.worst_ratio.max(0.0), 1.0, v.pair_sigma1.pass());
                    w_near.le(v.sigma1.abs(), c.sigma1 * pq);
                    if v.far_plain.checked > 0 {
                        w_far.add(v.far_plain.worst_ratio, 1.0, v.far_plain.pass());
                        w_far_r.add(v.far_radius.worst_ratio, 1.0, v.far_radius.pass());
                    }
                    if v.pair_fallback.checked > 0 {
                        w_fb.add(v.pair_fallback.worst_ratio, 1.0, v.pair_fallback.pass());
                    }
                    w_half.le((v.sigma2 + v.stray).abs(), c.sigma2 * pq);
                    w_schur.le(v.schur_lhs, v.schur_rhs);
                    w_term.le(v.sigma3_terminal.abs(), c.sigma3_terminal * pq);
                    w_nfar.le(v.sigma3_far.abs(), c.sigma3_far * pq);
                    if v.pair_extension.checked > 0 {
                        w_ext.add(v.pair_extension.worst_ratio, 1.0, v.pair_extension.pass());
                    }
                    w_ext.le(v.sigma3_extension.abs(), c.sigma3_extension * pq);
                    for bc in &v.blocks {
                        w_block.add(bc.lhs, bc.rhs, bc.pass);
                    }
                    let (l, r) = v.para_norm;
                    // both sides are sums of squares, so the tolerance is purely relative
                    let tol = 1e-10 * l.max(r);
                    w_para_id.add((l - r).abs(), tol, (l - r).abs() <= tol);
                    // round-off scales with |phi| |Pi psi| and with the averages of psi, not with the result
                    let (x, y) = v.para_regroup;
                    let tol = 1e-9 * x.abs().max(y.abs()).max(v.norm_phi * l.max(0.0).sqrt()).max(v.paraproduct_scale);
                    w_para_rg.add((x - y).abs(), tol, (x - y).abs() <= tol);
                    w_para.le(v.sigma3_paraproduct.abs(), c.paraproduct * pq);
                    w_half.le(v.sum().abs(), c.total * pq);
                }
                splits.push(s);
            }
        }
        if first_d1.is_none() {
            first_d1 = Some(setup.d1.clone());
            all_probes = probes.clone();
        }
        families.push(setup.family.clone());
        reports.push(LatticePairReport {
            seeds,
            a_t1: setup.a_t1,
            c22: setup.c22,
            c_lambda,
            total,
            n_good: (setup.good1.iter().filter(|&&g| g).count(), setup.good2.iter().filter(|&&g| g).count()),
            halves: vec![HalfReport::new(&lower), HalfReport::new(&upper)],
            splits,
        });
    }

    let mut lemmas = vec![
        w_size.entry(),
        w_t1.entry(),
    ];
    if cfg.ensemble > 0 {
        let d1 = first_d1.as_ref().expect("at least one pair");
        let ens = EnsembleConfig { kappa: cfg.kappa, delta_bad: cfg.delta_bad, s: cfg.s, tau: spec.tau, m: spec.m, ensemble: cfg.ensemble, master_seed: derive_seed(cfg.master_seed, 7_777) };
        let cubes = probe_cubes(d1, 8);
        let mut w_bad = Worst::new("bad_probability", REF_BAD);
        for bp in bad_probabilities(space, d1, &cubes, &ens)? {
            let bound = cfg.delta_bad.powi(2) + 3.0 * bp.stderr;
            w_bad.le(bp.p_hat, bound);
        }
        let mut w_bn = Worst::new("expected_bad_norm", REF_BADNORM);
        for f in all_probes.iter().take(5) {
            let e = expected_bad_norm(space, d1, f, &ens)?;
            w_bn.add(e.mean, e.bound + 3.0 * e.stderr, e.pass);
        }
        lemmas.push(w_bad.entry());
        lemmas.push(w_bn.entry());
    }
    for w in [
        &w_split, &w_lambda, &w_near, &w_far, &w_far_r, &w_fb, &w_schur, &w_schur_spec, &w_term, &w_nfar, &w_ext, &w_block, &w_para_id, &w_para_rg, &w_para, &w_carl, &w_bmo, &w_half, &w_good,
    ] {
        if w.seen {
            lemmas.push(w.entry());
        }
    }

    let norm = operator_norm(&km, space, cfg.power);
    let certified_total = 2.0 * best_total;
    let mut w_norm = Worst::new("norm_bound", REF_NORM);
    w_norm.le(norm.value, certified_total);
    lemmas.push(w_norm.entry());
    let mut w_nec = Worst::new("t1_necessity", REF_NEC);
    for fam in &families {
        let (nd, na) = t1_sides(&km, space, fam);
        for (set, (d, a)) in fam.iter().zip(nd.iter().zip(&na)) {
            let bound = norm.value.powi(2) * space.mu_of(&set.members) + 1e-9;
            w_nec.le(d.max(*a), bound);
        }
    }
    lemmas.push(w_nec.entry());

    let mut constants = BTreeMap::new();
    let a_max = reports.iter().map(|r| r.a_t1).fold(0.0, f64::max);
    constants.insert("A".to_string(), a_max);
    constants.insert("C_CZ".to_string(), c_cz);
    constants.insert("C_CZ_declared".to_string(), cz.declared);
    constants.insert("tau".to_string(), spec.tau);
    constants.insert("m".to_string(), spec.m);
    constants.insert("kappa".to_string(), cfg.kappa);
    constants.insert("alpha".to_string(), gb.alpha);
    constants.insert("r".to_string(), gb.r as f64);
    constants.insert("S".to_string(), cfg.s as f64);
    constants.insert("delta_bad".to_string(), cfg.delta_bad);
    constants.insert("delta_cz".to_string(), spec.delta_cz);
    constants.insert("lambda_bmo".to_string(), cfg.lambda_bmo);
    constants.insert("K_bmo".to_string(), cfg.k_bmo);
    constants.insert("C22".to_string(), reports.iter().map(|r| r.c22).fold(0.0, f64::max));
    let pass = lemmas.iter().all(|l| l.pass);
    Ok(Certificate {
        constants,
        lemmas,
        certified_total,
        empirical_norm: norm.value,
        norm,
        verdict: if pass { "pass".into() } else { "fail".into() },
        lattice_pairs: reports,
    })
}

/// Up to `count` difference cubes spread over the generations, finest first.
pub fn probe_cubes(lat: &DyadicLattice, count: usize) -> Vec<usize> {
    let mut by_gen: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
    for q in lat.difference_cubes() {
        by_gen.entry(-lat.cube(q).k).or_default().push(q);
    }
    let mut out = Vec::new();
    let mut round = 0;
    while out.len() < count {
        let mut added = false;
        for list in by_gen.values() {
            if let Some(&q) = list.get(round) {
                out.push(q);
                added = true;
                if out.len() == count {
                    break;
                }
            }
        }
        if !added {
            break;
        }
        round += 1;
    }
    out
}

/// `|T chi_E|^2` and `|T^* chi_E|^2` for every set of the family.
pub fn t1_sides(km: &KernelMatrix, space: &MetricMeasureSpace, family: &[TestSet]) -> (Vec<f64>, Vec<f64>) {
    let mu = space.mu();
    family
        .iter()
        .map(|s| {
            let d = km.apply_indicator(space, &s.members);
            let a = km.adjoint_apply_indicator(space, &s.members);
            (inner_mu(mu, &d, &d), inner_mu(mu, &a, &a))
        })
        .unzip()
}

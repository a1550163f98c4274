//! Ensemble estimates over independent random lattices: bad-cube probabilities and the
//! expected size of the bad part of a function.

use crate::error::Result;
use crate::lattice::{alpha, scale_gap, BadnessOracle, DyadicLattice, GoodBadParams};
use crate::projections::decompose;
use crate::space::MetricMeasureSpace;
use crate::util::{derive_seed, norm_mu, par_map};
use serde::{Deserialize, Serialize};

/// Below this many draws an estimate is flagged as low confidence.
pub const MIN_CONFIDENT_ENSEMBLE: usize = 100;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub kappa: f64,
    pub delta_bad: f64,
    pub s: u32,
    pub tau: f64,
    pub m: f64,
    pub ensemble: usize,
    pub master_seed: u64,
}

impl EnsembleConfig {
    pub fn params(&self) -> GoodBadParams {
        GoodBadParams { alpha: alpha(self.tau, self.m), r: scale_gap(self.kappa, self.delta_bad, self.s) }
    }

    /// Seed of the `i`-th random lattice in the ensemble.
    pub fn member_seed(&self, i: usize) -> u64 {
        derive_seed(self.master_seed, i as u64)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BadProbability {
    pub cube: usize,
    pub p_hat: f64,
    pub stderr: f64,
    pub n: usize,
    pub low_confidence: bool,
}

fn binomial(cube: usize, bad: usize, n: usize) -> BadProbability {
    let p = if n > 0 { bad as f64 / n as f64 } else { 0.0 };
    let stderr = if n > 0 { (p * (1.0 - p) / n as f64).sqrt() } else { f64::INFINITY };
    BadProbability { cube, p_hat: p, stderr, n, low_confidence: n < MIN_CONFIDENT_ENSEMBLE }
}

/// Bad flags of `cubes` (of `lattice`) against every member of the ensemble.
pub fn bad_flags(space: &MetricMeasureSpace, lattice: &DyadicLattice, cubes: &[usize], cfg: &EnsembleConfig) -> Result<Vec<Vec<bool>>> {
    let params = cfg.params();
    let draws: Vec<Result<Vec<bool>>> = par_map(cfg.ensemble, |i| {
        let other = DyadicLattice::build(space, cfg.kappa, cfg.member_seed(i), None)?;
        let oracle = BadnessOracle::new(space, &other);
        Ok(cubes.iter().map(|&q| !oracle.classify(lattice, q, params).is_good()).collect())
    });
    draws.into_iter().collect()
}

/// Empirical probability that each cube is bad against an independent random lattice.
pub fn bad_probabilities(space: &MetricMeasureSpace, lattice: &DyadicLattice, cubes: &[usize], cfg: &EnsembleConfig) -> Result<Vec<BadProbability>> {
    let flags = bad_flags(space, lattice, cubes, cfg)?;
    Ok(cubes
        .iter()
        .enumerate()
        .map(|(j, &q)| binomial(q, flags.iter().filter(|f| f[j]).count(), cfg.ensemble))
        .collect())
}

pub fn estimate_bad_probability(space: &MetricMeasureSpace, lattice: &DyadicLattice, cube: usize, cfg: &EnsembleConfig) -> Result<BadProbability> {
    Ok(bad_probabilities(space, lattice, &[cube], cfg)?.remove(0))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpectedBadNorm {
    pub norm_f: f64,
    pub mean: f64,
    pub stderr: f64,
    /// `delta_bad * |f|`.
    pub bound: f64,
    pub n: usize,
    pub pass: bool,
}

/// Mean of `|f_bad|` over the ensemble, where `f` is decomposed on `lattice` and badness is
/// taken against each random lattice. Passes when the mean is within three standard errors
/// of `delta_bad |f|`.
pub fn expected_bad_norm(space: &MetricMeasureSpace, lattice: &DyadicLattice, f: &[f64], cfg: &EnsembleConfig) -> Result<ExpectedBadNorm> {
    let dec = decompose(space, lattice, f)?;
    let cubes: Vec<usize> = dec.components.iter().map(|c| c.cube).collect();
    let norms2: Vec<f64> = dec.components.iter().map(|c| c.norm(space).powi(2)).collect();
    let flags = bad_flags(space, lattice, &cubes, cfg)?;
    let vals: Vec<f64> = flags
        .iter()
        .map(|fl| fl.iter().zip(&norms2).filter(|(b, _)| **b).fold(0.0, |acc, (_, v)| acc + v).sqrt())
        .collect();
    let n = vals.len();
    let mean = vals.iter().sum::<f64>() / n.max(1) as f64;
    let var = if n > 1 { vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
    let stderr = (var / n.max(1) as f64).sqrt();
    let norm_f = norm_mu(space.mu(), f);
    let bound = cfg.delta_bad * norm_f;
    Ok(ExpectedBadNorm { norm_f, mean, stderr, bound, n, pass: mean <= bound + 3.0 * stderr + 1e-12 })
}

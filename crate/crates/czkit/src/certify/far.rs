//! Interaction of separated cubes: for `phi` with zero mean on `Q` and `psi` supported in a
//! coarser cube `R` away from `Q`,
//! `|<phi, T psi>| <= C_CZ 3^(m + tau) T_QR |phi| |psi|` with
//! `T_QR = s(Q)^(tau/2) s(R)^(tau/2) / D^(m + tau) sqrt(mu(Q) mu(R))`,
//! `D = s(Q) + s(R) + dist(Q, R)`.

use crate::kernel::KernelMatrix;
use crate::lattice::DyadicLattice;
use crate::space::MetricMeasureSpace;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FarParams {
    pub c_cz: f64,
    pub m: f64,
    pub tau: f64,
    pub delta_cz: f64,
    pub alpha: f64,
}

impl FarParams {
    /// `C_CZ 3^(m + tau)`.
    pub fn constant(&self) -> f64 {
        self.c_cz * 3f64.powf(self.m + self.tau)
    }
}

/// `s(Q) + s(R) + dist(Q, R)`.
pub fn long_distance(s_q: f64, s_r: f64, dist: f64) -> f64 {
    s_q + s_r + dist
}

/// Interaction matrix entry `T_QR`.
pub fn interaction_entry(s_q: f64, s_r: f64, dist: f64, mu_q: f64, mu_r: f64, m: f64, tau: f64) -> f64 {
    (s_q * s_r).powf(tau / 2.0) / long_distance(s_q, s_r, dist).powf(m + tau) * (mu_q * mu_r).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FarFailure {
    NotZeroMean,
    ScaleOrder,
    TooClose,
    OutsideSmoothRegime,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FarCheck {
    pub measured: f64,
    /// `C_CZ 3^(m + tau) T_QR |phi| |psi|`.
    pub bound: f64,
    /// Same bound with `s(Q)^tau` replaced by `max(s(Q), radius)^tau`, where `radius` is the
    /// largest distance from the centre of `Q` to the support of `phi`.
    pub bound_radius_corrected: f64,
    pub radius_ratio: f64,
    pub admissible: bool,
    pub failure: Option<FarFailure>,
    pub pass: bool,
}

/// Checks the separated-cube estimate for one pair. `phi` lives on `Q` (of `lat_q`) and `psi`
/// on `R` (of `lat_r`); both are sparse `(point, value)` lists. `kop(x, y)` is the kernel of
/// the operator applied to `psi`. Pairs outside the hypotheses are reported, not failed.
#[allow(clippy::too_many_arguments)]
pub fn far_interaction_bound(
    space: &MetricMeasureSpace,
    kop: &KernelMatrix,
    lat_q: &DyadicLattice,
    q: usize,
    lat_r: &DyadicLattice,
    r: usize,
    phi: &[(usize, f64)],
    psi: &[(usize, f64)],
    p: FarParams,
) -> FarCheck {
    let mu = space.mu();
    let cq = lat_q.cube(q);
    let cr = lat_r.cube(r);
    let (s_q, s_r) = (lat_q.size(q), lat_r.size(r));
    let phi: Vec<(usize, f64)> = phi.iter().cloned().filter(|&(x, _)| mu[x] > 0.0).collect();
    let psi: Vec<(usize, f64)> = psi.iter().cloned().filter(|&(y, _)| mu[y] > 0.0).collect();
    let mut measured = 0.0;
    for &(x, a) in &phi {
        let mut inner = 0.0;
        for &(y, b) in &psi {
            inner += kop.get(x, y) * b * mu[y];
        }
        measured += a * mu[x] * inner;
    }
    let measured = measured.abs();
    let norm = |v: &[(usize, f64)]| v.iter().map(|&(x, a)| mu[x] * a * a).sum::<f64>().sqrt();
    let l1 = phi.iter().map(|&(x, a)| mu[x] * a.abs()).sum::<f64>();
    let mean = phi.iter().map(|&(x, a)| mu[x] * a).sum::<f64>();
    let dist_qr = space.dist_sets(&cq.members, &cr.members);
    let t = interaction_entry(s_q, s_r, dist_qr, space.mu_of(&cq.members), space.mu_of(&cr.members), p.m, p.tau);
    let base = p.constant() * t * norm(&phi) * norm(&psi);
    let psi_pts: Vec<usize> = psi.iter().map(|e| e.0).collect();
    let d_supp = space.dist_sets(&cq.members, &psi_pts);
    let d_center = space.dist_sets(&[cq.center], &psi_pts);
    let radius = phi.iter().map(|&(x, _)| space.rho(cq.center, x)).fold(0.0, f64::max);
    let radius_ratio = radius / s_q;
    let failure = if mean.abs() > 1e-12 * l1.max(1e-300) {
        Some(FarFailure::NotZeroMean)
    } else if s_q > s_r * (1.0 + 1e-12) {
        Some(FarFailure::ScaleOrder)
    } else if d_supp < s_q.powf(p.alpha) * s_r.powf(1.0 - p.alpha) {
        Some(FarFailure::TooClose)
    } else if radius > p.delta_cz * d_center {
        Some(FarFailure::OutsideSmoothRegime)
    } else {
        None
    };
    let admissible = failure.is_none() && !psi.is_empty() && !phi.is_empty();
    let bound_rc = base * radius_ratio.max(1.0).powf(p.tau);
    let pass = !admissible || measured <= base * (1.0 + 1e-9) + 1e-15;
    FarCheck { measured, bound: base, bound_radius_corrected: bound_rc, radius_ratio, admissible, failure, pass }
}

//! Finite quasi-metric measure spaces and the geometric hypotheses checked on them.
//!
//! Points are addressed by their index `0..n`. Balls are open: `B(x, r) = {y : rho(x, y) < r}`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Largest space accepted by the dense representations used throughout the crate.
pub const MAX_POINTS: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub enum MetricSource {
    Euclidean(Vec<Vec<f64>>),
    Explicit,
}

#[derive(Debug, Clone)]
pub struct MetricMeasureSpace {
    ids: Vec<u64>,
    n: usize,
    rho: Vec<f64>,
    quasi_const: f64,
    nu: Vec<f64>,
    mu: Vec<f64>,
    omega: Vec<bool>,
    resolution_h: f64,
    diam: f64,
    source: MetricSource,
}

/// How radii are sampled for the ball-counting checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadiusSampling {
    /// `h * ratio^j` for `j = 0, 1, ...` up to the diameter, plus the diameter itself.
    Geometric { ratio: f64 },
    /// Every distinct inter-point distance, nudged up so the open ball contains it.
    Exhaustive,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct QuasiMetricViolation {
    pub kind: String,
    pub points: Vec<usize>,
    pub excess: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuasiMetricReport {
    pub ok: bool,
    pub n_violations: usize,
    pub worst: Option<QuasiMetricViolation>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BallViolation {
    pub center: usize,
    pub radius: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegularityReport {
    pub c1: f64,
    pub c2: f64,
    pub c_doub: f64,
    pub n_radii: usize,
    pub degenerate: bool,
    pub violations: Vec<BallViolation>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrowthReport {
    pub c_h: f64,
    pub n_radii: usize,
    /// Balls with `mu(B(x, r)) > r^m`.
    pub non_ahlfors: Vec<BallViolation>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaptureWitness {
    pub center: usize,
    pub radius: f64,
    pub outside_point: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaptureReport {
    pub ok: bool,
    pub n_non_ahlfors: usize,
    pub witness: Option<CaptureWitness>,
}

fn check_weights(name: &str, w: &[f64], n: usize) -> Result<()> {
    if w.len() != n {
        return Err(Error::invalid(format!("{name} has {} entries, expected {n}", w.len())));
    }
    if let Some(i) = w.iter().position(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::invalid(format!("{name}[{i}] is negative or not finite")));
    }
    Ok(())
}

impl MetricMeasureSpace {
    /// Builds a space from a dense row-major distance matrix.
    ///
    /// Shapes, finiteness and the normalisation of `mu` are validated here. Symmetry and the
    /// quasi-triangle inequality are left to [`MetricMeasureSpace::verify_quasi_metric`].
    pub fn new(
        ids: Vec<u64>,
        rho: Vec<f64>,
        nu: Vec<f64>,
        mu: Vec<f64>,
        omega: Vec<bool>,
        quasi_const: f64,
        resolution_h: f64,
    ) -> Result<Self> {
        let n = ids.len();
        if n == 0 {
            return Err(Error::EmptySet);
        }
        if n > MAX_POINTS {
            return Err(Error::TooLarge { n, limit: MAX_POINTS });
        }
        let mut sorted = ids.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("point identifiers are not unique"));
        }
        if rho.len() != n * n {
            return Err(Error::invalid(format!("distance matrix has {} entries, expected {}", rho.len(), n * n)));
        }
        if let Some(i) = rho.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid(format!("distance entry ({}, {}) is negative or not finite", i / n, i % n)));
        }
        check_weights("nu", &nu, n)?;
        check_weights("mu", &mu, n)?;
        let total: f64 = mu.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("mu sums to {total}, expected 1")));
        }
        if omega.len() != n {
            return Err(Error::invalid("omega mask has the wrong length"));
        }
        if !(quasi_const >= 1.0 && quasi_const.is_finite()) {
            return Err(Error::invalid("quasi-metric constant must be finite and at least 1"));
        }
        if !(resolution_h > 0.0 && resolution_h.is_finite()) {
            return Err(Error::invalid("resolution must be positive"));
        }
        let diam = rho.iter().cloned().fold(0.0, f64::max);
        Ok(Self { ids, n, rho, quasi_const, nu, mu, omega, resolution_h, diam, source: MetricSource::Explicit })
    }

    /// Euclidean distances between the given coordinates.
    pub fn euclidean(coords: Vec<Vec<f64>>, nu: Vec<f64>, mu: Vec<f64>, omega: Vec<bool>, resolution_h: f64) -> Result<Self> {
        let n = coords.len();
        if n == 0 {
            return Err(Error::EmptySet);
        }
        let dim = coords[0].len();
        if coords.iter().any(|c| c.len() != dim) {
            return Err(Error::invalid("coordinates have mixed dimensions"));
        }
        let mut rho = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = coords[i].iter().zip(&coords[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                rho[i * n + j] = d;
                rho[j * n + i] = d;
            }
        }
        let mut s = Self::new((0..n as u64).collect(), rho, nu, mu, omega, 1.0, resolution_h)?;
        s.source = MetricSource::Euclidean(coords);
        Ok(s)
    }

    pub fn with_omega(&self, omega: Vec<bool>) -> Result<Self> {
        if omega.len() != self.n {
            return Err(Error::invalid("omega mask has the wrong length"));
        }
        let mut s = self.clone();
        s.omega = omega;
        Ok(s)
    }

    pub fn with_nu(&self, nu: Vec<f64>) -> Result<Self> {
        check_weights("nu", &nu, self.n)?;
        let mut s = self.clone();
        s.nu = nu;
        Ok(s)
    }

    pub fn with_ids(mut self, ids: Vec<u64>) -> Result<Self> {
        if ids.len() != self.n {
            return Err(Error::invalid("identifier list has the wrong length"));
        }
        let mut sorted = ids.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("point identifiers are not unique"));
        }
        self.ids = ids;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn ids(&self) -> &[u64] {
        &self.ids
    }
    pub fn index_of(&self, id: u64) -> Option<usize> {
        self.ids.iter().position(|&v| v == id)
    }
    #[inline]
    pub fn rho(&self, x: usize, y: usize) -> f64 {
        self.rho[x * self.n + y]
    }
    pub fn rho_row(&self, x: usize) -> &[f64] {
        &self.rho[x * self.n..(x + 1) * self.n]
    }
    pub fn rho_matrix(&self) -> &[f64] {
        &self.rho
    }
    pub fn source(&self) -> &MetricSource {
        &self.source
    }
    pub fn quasi_const(&self) -> f64 {
        self.quasi_const
    }
    pub fn mu(&self) -> &[f64] {
        &self.mu
    }
    pub fn nu(&self) -> &[f64] {
        &self.nu
    }
    pub fn omega(&self) -> &[bool] {
        &self.omega
    }
    pub fn in_omega(&self, x: usize) -> bool {
        self.omega[x]
    }
    pub fn resolution_h(&self) -> f64 {
        self.resolution_h
    }
    pub fn diam(&self) -> f64 {
        self.diam
    }

    /// Indices with positive `mu` mass.
    pub fn support(&self) -> Vec<usize> {
        (0..self.n).filter(|&x| self.mu[x] > 0.0).collect()
    }

    pub fn mu_of(&self, set: &[usize]) -> f64 {
        set.iter().map(|&x| self.mu[x]).sum()
    }

    pub fn nu_of(&self, set: &[usize]) -> f64 {
        set.iter().map(|&x| self.nu[x]).sum()
    }

    pub fn ball(&self, x: usize, r: f64) -> Vec<usize> {
        (0..self.n).filter(|&y| self.rho(x, y) < r).collect()
    }

    fn ball_masses(&self, x: usize, r: f64) -> (f64, f64) {
        let row = self.rho_row(x);
        let mut m = 0.0;
        let mut v = 0.0;
        for y in 0..self.n {
            if row[y] < r {
                m += self.mu[y];
                v += self.nu[y];
            }
        }
        (m, v)
    }

    pub fn diam_of(&self, set: &[usize]) -> f64 {
        let mut d: f64 = 0.0;
        for (i, &a) in set.iter().enumerate() {
            for &b in &set[i + 1..] {
                d = d.max(self.rho(a, b));
            }
        }
        d
    }

    /// Distance between two sets; infinite if either is empty.
    pub fn dist_sets(&self, a: &[usize], b: &[usize]) -> f64 {
        let mut d = f64::INFINITY;
        for &x in a {
            let row = self.rho_row(x);
            for &y in b {
                d = d.min(row[y]);
            }
        }
        d
    }

    /// `min_{y in set} rho(x, y)` for every point `x`.
    pub fn dist_to_set_all(&self, set: &[usize]) -> Vec<f64> {
        (0..self.n)
            .map(|x| {
                let row = self.rho_row(x);
                set.iter().map(|&y| row[y]).fold(f64::INFINITY, f64::min)
            })
            .collect()
    }

    /// Distance from `x` to the complement of `omega`; infinite when omega is everything.
    pub fn boundary_distance(&self, x: usize) -> f64 {
        let row = self.rho_row(x);
        (0..self.n).filter(|&y| !self.omega[y]).map(|y| row[y]).fold(f64::INFINITY, f64::min)
    }

    pub fn boundary_distances(&self) -> Vec<f64> {
        (0..self.n).map(|x| self.boundary_distance(x)).collect()
    }

    pub fn omega_is_whole_space(&self) -> bool {
        self.omega.iter().all(|&b| b)
    }

    /// `{x : dist(x, E) <= (lambda - 1) diam(E)}`.
    pub fn dilate(&self, set: &[usize], lambda: f64) -> Result<Vec<usize>> {
        if set.is_empty() {
            return Err(Error::EmptySet);
        }
        if !(lambda >= 1.0) {
            return Err(Error::invalid("dilation factor must be at least 1"));
        }
        let reach = (lambda - 1.0) * self.diam_of(set);
        let d = self.dist_to_set_all(set);
        Ok((0..self.n).filter(|&x| d[x] <= reach).collect())
    }

    /// Symmetry, identity of indiscernibles and the quasi-triangle inequality on all triples.
    pub fn verify_quasi_metric(&self) -> QuasiMetricReport {
        let n = self.n;
        let k = self.quasi_const;
        let tol = 1e-12 * self.diam.max(1.0);
        let mut worst: Option<QuasiMetricViolation> = None;
        let mut count = 0usize;
        let mut record = |v: QuasiMetricViolation, worst: &mut Option<QuasiMetricViolation>| {
            count += 1;
            if worst.as_ref().map_or(true, |w| v.excess > w.excess) {
                *worst = Some(v);
            }
        };
        for a in 0..n {
            if self.rho(a, a) != 0.0 {
                record(QuasiMetricViolation { kind: "identity".into(), points: vec![a, a], excess: self.rho(a, a) }, &mut worst);
            }
            for b in (a + 1)..n {
                let (ab, ba) = (self.rho(a, b), self.rho(b, a));
                if (ab - ba).abs() > tol {
                    record(QuasiMetricViolation { kind: "symmetry".into(), points: vec![a, b], excess: (ab - ba).abs() }, &mut worst);
                }
                if ab == 0.0 || ba == 0.0 {
                    record(QuasiMetricViolation { kind: "identity".into(), points: vec![a, b], excess: f64::INFINITY }, &mut worst);
                }
            }
        }
        for x in 0..n {
            let rx = self.rho_row(x);
            for y in 0..n {
                let rxy = rx[y];
                let ry = self.rho_row(y);
                for z in 0..n {
                    let lhs = rx[z];
                    let rhs = k * (rxy + ry[z]);
                    if lhs > rhs + tol {
                        record(QuasiMetricViolation { kind: "triangle".into(), points: vec![x, y, z], excess: lhs - rhs }, &mut worst);
                    }
                }
            }
        }
        QuasiMetricReport { ok: count == 0, n_violations: count, worst }
    }

    /// Radii in `[h, diam]` for the ball-counting checks.
    pub fn sample_radii(&self, sampling: RadiusSampling) -> Vec<f64> {
        let (h, d) = (self.resolution_h, self.diam);
        let mut radii = Vec::new();
        match sampling {
            RadiusSampling::Geometric { ratio } => {
                let ratio = if ratio > 1.0 { ratio } else { 2.0 };
                let mut r = h;
                while r <= d {
                    radii.push(r);
                    r *= ratio;
                }
                if d >= h && radii.last().map_or(true, |&l| l < d) {
                    radii.push(d);
                }
            }
            RadiusSampling::Exhaustive => {
                let mut all: Vec<f64> = self.rho.iter().cloned().filter(|&v| v > 0.0).collect();
                all.sort_by(|a, b| a.partial_cmp(b).unwrap());
                all.dedup();
                for v in all {
                    let r = v * (1.0 + 1e-12);
                    if r >= h && r <= d * (1.0 + 1e-12) {
                        radii.push(r);
                    }
                }
            }
        }
        radii
    }

    fn restrict_radii(&self, radii: &[f64]) -> Result<Vec<f64>> {
        let hi = self.diam * (1.0 + 1e-12);
        let kept: Vec<f64> = radii.iter().cloned().filter(|&r| r >= self.resolution_h && r <= hi && r > 0.0).collect();
        if kept.is_empty() {
            return Err(Error::EmptyRadiusList { lo: self.resolution_h, hi: self.diam });
        }
        Ok(kept)
    }

    /// Fits `c1 r^n <= nu(B(x, r)) <= c2 r^n` over all centres and the radii in `[h, diam]`.
    ///
    /// The doubling constant is reported as `(c2 / c1) 2^n`. A one-point space is flagged as
    /// degenerate and reports unit constants.
    pub fn check_ahlfors_regularity(&self, n_dim: f64, radii: &[f64], targets: Option<(f64, f64)>) -> Result<RegularityReport> {
        if !(n_dim > 0.0) {
            return Err(Error::invalid("dimension must be positive"));
        }
        if self.n == 1 || self.diam == 0.0 {
            return Ok(RegularityReport { c1: 1.0, c2: 1.0, c_doub: 2f64.powf(n_dim), n_radii: 0, degenerate: true, violations: vec![] });
        }
        let radii = self.restrict_radii(radii)?;
        let mut c1 = f64::INFINITY;
        let mut c2: f64 = 0.0;
        let mut violations = Vec::new();
        for x in 0..self.n {
            for &r in &radii {
                let (_, v) = self.ball_masses(x, r);
                let ratio = v / r.powf(n_dim);
                c1 = c1.min(ratio);
                c2 = c2.max(ratio);
                if let Some((lo, hi)) = targets {
                    if ratio < lo || ratio > hi {
                        violations.push(BallViolation { center: x, radius: r, ratio });
                    }
                }
            }
        }
        let c_doub = if c1 > 0.0 { c2 / c1 * 2f64.powf(n_dim) } else { f64::INFINITY };
        Ok(RegularityReport { c1, c2, c_doub, n_radii: radii.len(), degenerate: false, violations })
    }

    /// Fits the growth constant `mu(B(x, r)) <= C_H r^m` and lists balls with `mu(B) > r^m`.
    ///
    /// Radii are used as given (no restriction to `[h, diam]`) so point masses can be probed.
    pub fn check_growth_condition(&self, m: f64, radii: &[f64]) -> Result<GrowthReport> {
        if !(m > 0.0) {
            return Err(Error::invalid("growth exponent must be positive"));
        }
        let radii: Vec<f64> = radii.iter().cloned().filter(|&r| r > 0.0 && r.is_finite()).collect();
        if radii.is_empty() {
            return Err(Error::EmptyRadiusList { lo: self.resolution_h, hi: self.diam });
        }
        let mut c_h: f64 = 0.0;
        let mut non_ahlfors = Vec::new();
        for x in 0..self.n {
            for &r in &radii {
                let (mass, _) = self.ball_masses(x, r);
                let ratio = mass / r.powf(m);
                c_h = c_h.max(ratio);
                if ratio > 1.0 {
                    non_ahlfors.push(BallViolation { center: x, radius: r, ratio });
                }
            }
        }
        Ok(GrowthReport { c_h, n_radii: radii.len(), non_ahlfors })
    }

    /// Every ball with `mu(B) > r^m` must lie inside omega.
    pub fn verify_omega_capture(&self, m: f64, radii: &[f64]) -> Result<CaptureReport> {
        let growth = self.check_growth_condition(m, radii)?;
        for b in &growth.non_ahlfors {
            if let Some(y) = (0..self.n).find(|&y| self.rho(b.center, y) < b.radius && !self.omega[y]) {
                return Ok(CaptureReport {
                    ok: false,
                    n_non_ahlfors: growth.non_ahlfors.len(),
                    witness: Some(CaptureWitness { center: b.center, radius: b.radius, outside_point: y }),
                });
            }
        }
        Ok(CaptureReport { ok: true, n_non_ahlfors: growth.non_ahlfors.len(), witness: None })
    }
}

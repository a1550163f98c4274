//! Kernels, the induced operators on `L^2(mu)` and the kernel-level hypothesis checks.

use crate::error::{Error, Result};
use crate::lattice::DyadicLattice;
use crate::space::MetricMeasureSpace;
use crate::util::{norm2, rng};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagonalPolicy {
    /// `k(x, x) = 0`.
    Zero,
    /// The family formula evaluated with `rho(x, x)` replaced by the resolution.
    Truncate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BergmanForm {
    /// `1 / (rho(x, y) + d(x) + d(y))^m`.
    Regularized,
    /// `1 / max(d(x), d(y))^m`, the extremal case of the boundary-distance bound.
    MaxD,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum KernelFamily {
    Power { scale: f64 },
    Bergman { form: BergmanForm },
    Explicit { matrix: Vec<Vec<f64>> },
    Zero,
    Constant { c: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub m: f64,
    pub tau: f64,
    /// Declared size/smoothness constant. `None` means "derive from the family".
    pub c_cz: Option<f64>,
    pub delta_cz: f64,
    pub diagonal: DiagonalPolicy,
}

impl KernelSpec {
    pub fn power(m: f64) -> Self {
        Self { family: KernelFamily::Power { scale: 1.0 }, m, tau: 1.0, c_cz: None, delta_cz: 0.5, diagonal: DiagonalPolicy::Zero }
    }
    pub fn bergman(m: f64, form: BergmanForm) -> Self {
        Self { family: KernelFamily::Bergman { form }, m, tau: 1.0, c_cz: None, delta_cz: 0.5, diagonal: DiagonalPolicy::Zero }
    }
    pub fn explicit(matrix: Vec<Vec<f64>>, m: f64, tau: f64, c_cz: f64) -> Self {
        Self { family: KernelFamily::Explicit { matrix }, m, tau, c_cz: Some(c_cz), delta_cz: 0.5, diagonal: DiagonalPolicy::Truncate }
    }
    pub fn zero(m: f64) -> Self {
        Self { family: KernelFamily::Zero, m, tau: 1.0, c_cz: None, delta_cz: 0.5, diagonal: DiagonalPolicy::Zero }
    }
    pub fn constant(c: f64, m: f64) -> Self {
        Self { family: KernelFamily::Constant { c }, m, tau: 1.0, c_cz: None, delta_cz: 0.5, diagonal: DiagonalPolicy::Truncate }
    }
    pub fn with_diagonal(mut self, d: DiagonalPolicy) -> Self {
        self.diagonal = d;
        self
    }

    /// Declared constant `C_CZ`. For the analytic families this is the worst case of the mean
    /// value bound under `rho(x, x') <= delta rho(x, y)` in a metric space.
    pub fn declared_c_cz(&self, space: &MetricMeasureSpace) -> f64 {
        if let Some(c) = self.c_cz {
            return c;
        }
        let (m, d) = (self.m, self.delta_cz);
        match &self.family {
            KernelFamily::Power { scale } => scale.abs() * (2.0 * m / (1.0 - d).powf(m + 1.0)).max(1.0),
            KernelFamily::Bergman { .. } => (4.0 * m / (1.0 - d).powf(m + 1.0)).max(1.0),
            KernelFamily::Explicit { .. } => 1.0,
            KernelFamily::Zero => 1.0,
            KernelFamily::Constant { c } => c.abs() * space.diam().powf(m).max(1.0),
        }
    }

    /// Dense kernel matrix on the space.
    pub fn evaluate(&self, space: &MetricMeasureSpace) -> Result<KernelMatrix> {
        let n = space.n();
        let h = space.resolution_h();
        let m = self.m;
        if !(m > 0.0) {
            return Err(Error::invalid("kernel exponent m must be positive"));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::invalid("smoothness exponent must lie in (0, 1]"));
        }
        let dvals = match self.family {
            KernelFamily::Bergman { .. } => space.boundary_distances(),
            _ => Vec::new(),
        };
        let mut vals = vec![0.0; n * n];
        for x in 0..n {
            for y in 0..n {
                let diag = x == y;
                if diag && self.diagonal == DiagonalPolicy::Zero {
                    continue;
                }
                let r = if diag { h } else { space.rho(x, y) };
                let v = match &self.family {
                    KernelFamily::Power { scale } => scale / r.powf(m),
                    KernelFamily::Bergman { form: BergmanForm::Regularized } => 1.0 / (r + dvals[x] + dvals[y]).powf(m),
                    KernelFamily::Bergman { form: BergmanForm::MaxD } => 1.0 / dvals[x].max(dvals[y]).powf(m),
                    KernelFamily::Explicit { matrix } => {
                        if matrix.len() != n || matrix[x].len() != n {
                            return Err(Error::invalid("explicit kernel matrix has the wrong shape"));
                        }
                        matrix[x][y]
                    }
                    KernelFamily::Zero => 0.0,
                    KernelFamily::Constant { c } => *c,
                };
                vals[x * n + y] = v;
            }
        }
        let mu = space.mu();
        for x in 0..n {
            for y in 0..n {
                if (mu[x] > 0.0 || mu[y] > 0.0) && !vals[x * n + y].is_finite() {
                    return Err(Error::NonFiniteKernelValue(x, y));
                }
            }
        }
        Ok(KernelMatrix { n, vals })
    }
}

/// Dense `k(x, y)`, row-major.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    n: usize,
    vals: Vec<f64>,
}

impl KernelMatrix {
    pub fn from_dense(n: usize, vals: Vec<f64>) -> Result<Self> {
        if vals.len() != n * n {
            return Err(Error::invalid("kernel matrix has the wrong size"));
        }
        Ok(Self { n, vals })
    }
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.vals[x * self.n + y]
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn transpose(&self) -> Self {
        let n = self.n;
        let mut vals = vec![0.0; n * n];
        for x in 0..n {
            for y in 0..n {
                vals[y * n + x] = self.vals[x * n + y];
            }
        }
        Self { n, vals }
    }

    /// `(T f)(x) = sum_y k(x, y) f(y) mu(y)`; points without mass are skipped.
    pub fn apply(&self, space: &MetricMeasureSpace, f: &[f64]) -> Vec<f64> {
        let mu = space.mu();
        let supp: Vec<usize> = (0..self.n).filter(|&y| mu[y] > 0.0 && f[y] != 0.0).collect();
        (0..self.n)
            .map(|x| {
                let row = &self.vals[x * self.n..(x + 1) * self.n];
                supp.iter().map(|&y| row[y] * f[y] * mu[y]).sum()
            })
            .collect()
    }

    /// `(T^* g)(x) = sum_y k(y, x) g(y) mu(y)`.
    pub fn adjoint_apply(&self, space: &MetricMeasureSpace, g: &[f64]) -> Vec<f64> {
        let mu = space.mu();
        let mut out = vec![0.0; self.n];
        for y in 0..self.n {
            let w = g[y] * mu[y];
            if w == 0.0 {
                continue;
            }
            let row = &self.vals[y * self.n..(y + 1) * self.n];
            for x in 0..self.n {
                out[x] += row[x] * w;
            }
        }
        out
    }

    /// `T chi_E` for a set `E`.
    pub fn apply_indicator(&self, space: &MetricMeasureSpace, set: &[usize]) -> Vec<f64> {
        let mu = space.mu();
        (0..self.n)
            .map(|x| {
                let row = &self.vals[x * self.n..(x + 1) * self.n];
                set.iter().map(|&y| row[y] * mu[y]).sum()
            })
            .collect()
    }

    pub fn adjoint_apply_indicator(&self, space: &MetricMeasureSpace, set: &[usize]) -> Vec<f64> {
        let mu = space.mu();
        (0..self.n).map(|x| set.iter().map(|&y| self.vals[y * self.n + x] * mu[y]).sum()).collect()
    }

    /// `sqrt(mu(x)) k(x, y) sqrt(mu(y))` restricted to the support, whose spectral norm is the
    /// operator norm on `L^2(mu)`.
    pub fn weighted_support_matrix(&self, space: &MetricMeasureSpace) -> (Vec<usize>, Vec<f64>) {
        let supp = space.support();
        let s = supp.len();
        let mu = space.mu();
        let mut m = vec![0.0; s * s];
        for (i, &x) in supp.iter().enumerate() {
            for (j, &y) in supp.iter().enumerate() {
                m[i * s + j] = mu[x].sqrt() * self.get(x, y) * mu[y].sqrt();
            }
        }
        (supp, m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointScope {
    All,
    Support,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CzReport {
    pub c_size: f64,
    pub c_smooth: f64,
    pub declared: f64,
    pub n_pairs: usize,
    pub n_triples: usize,
    pub worst_triple: Option<(usize, usize, usize)>,
    pub pass: bool,
}

/// Fits the size constant `|k(x, y)| rho(x, y)^m` and the smoothness constant
/// `(|k(x, y) - k(x', y)| + |k(y, x) - k(y, x')|) rho(x, y)^(tau + m) / rho(x, x')^tau` over all
/// triples with `rho(x, x') <= delta rho(x, y)`, and compares both with the declared constant.
pub fn check_size_and_smoothness(spec: &KernelSpec, km: &KernelMatrix, space: &MetricMeasureSpace, scope: PointScope) -> CzReport {
    let pts: Vec<usize> = match scope {
        PointScope::All => (0..space.n()).collect(),
        PointScope::Support => space.support(),
    };
    let (m, tau, delta) = (spec.m, spec.tau, spec.delta_cz);
    let mut c_size: f64 = 0.0;
    let mut c_smooth: f64 = 0.0;
    let mut n_pairs = 0;
    let mut n_triples = 0;
    let mut worst = None;
    for &x in &pts {
        let rx = space.rho_row(x);
        for &y in &pts {
            if x == y {
                continue;
            }
            n_pairs += 1;
            let rxy = rx[y];
            let kxy = km.get(x, y);
            let kyx = km.get(y, x);
            let sz = kxy.abs() * rxy.powf(m);
            c_size = c_size.max(if sz.is_nan() { f64::INFINITY } else { sz });
            let scale = rxy.powf(tau + m);
            for &xp in &pts {
                if xp == x || xp == y || rx[xp] > delta * rxy {
                    continue;
                }
                n_triples += 1;
                let diff = (kxy - km.get(xp, y)).abs() + (kyx - km.get(y, xp)).abs();
                let v = diff * scale / rx[xp].powf(tau);
                let v = if v.is_nan() { f64::INFINITY } else { v };
                if v > c_smooth {
                    c_smooth = v;
                    worst = Some((x, xp, y));
                }
            }
        }
    }
    let declared = spec.declared_c_cz(space);
    let tol = 1.0 + 1e-9;
    CzReport { c_size, c_smooth, declared, n_pairs, n_triples, worst_triple: worst, pass: c_size <= declared * tol && c_smooth <= declared * tol }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DominationReport {
    /// `max |k(x, y)| max(d(x), d(y))^m`; the bound holds when this is at most one.
    pub worst_ratio: f64,
    pub worst_pair: Option<(usize, usize)>,
    pub n_violations: usize,
    pub pass: bool,
}

/// Checks `|k(x, y)| <= 1 / max(d(x), d(y))^m` for all off-diagonal pairs.
pub fn check_d_domination(spec: &KernelSpec, km: &KernelMatrix, space: &MetricMeasureSpace) -> Result<DominationReport> {
    if space.omega_is_whole_space() {
        return Err(Error::OmegaIsWholeSpace);
    }
    let d = space.boundary_distances();
    let n = space.n();
    let mut worst: f64 = 0.0;
    let mut worst_pair = None;
    let mut n_viol = 0;
    for x in 0..n {
        for y in 0..n {
            if x == y {
                continue;
            }
            let dm = d[x].max(d[y]);
            if dm == 0.0 {
                continue;
            }
            let v = km.get(x, y).abs() * dm.powf(spec.m);
            if v > 1.0 + 1e-12 {
                n_viol += 1;
            }
            if v > worst {
                worst = v;
                worst_pair = Some((x, y));
            }
        }
    }
    Ok(DominationReport { worst_ratio: worst, worst_pair, n_violations: n_viol, pass: n_viol == 0 })
}

/// Scale-corrected bound on terminal cubes: the smallest `C` with
/// `max(|k(x, y)|, |k(y, x)|) <= C / s(parent(S))^m` for `x` in a terminal cube `S` with mass and
/// `y` in the support of `mu`.
pub fn terminal_scale_constant(km: &KernelMatrix, space: &MetricMeasureSpace, lattice: &DyadicLattice, m: f64) -> Result<f64> {
    lattice.require_classified()?;
    let mu = space.mu();
    let supp = space.support();
    let mut c: f64 = 0.0;
    for cube in lattice.cubes() {
        let Some(p) = cube.parent else { continue };
        if !cube.is_terminal() || !lattice.cube(p).is_transit() {
            continue;
        }
        // descendants of a maximal terminal cube have smaller parents, so only maximal ones
        // and the points inside them need the parent's scale
        let sp = lattice.size(p).powf(m);
        for &x in cube.members.iter().filter(|&&x| mu[x] > 0.0) {
            for &y in &supp {
                c = c.max(km.get(x, y).abs().max(km.get(y, x).abs()) * sp);
            }
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestSet {
    pub label: String,
    pub members: Vec<usize>,
}

/// Cubes of the given lattices with positive mass, plus their dilations by each factor.
/// Duplicate sets are dropped.
pub fn t1_family(space: &MetricMeasureSpace, lattices: &[&DyadicLattice], lambdas: &[f64]) -> Result<Vec<TestSet>> {
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut out = Vec::new();
    for lat in lattices {
        for c in lat.cubes() {
            if space.mu_of(&c.members) <= 0.0 {
                continue;
            }
            if seen.insert(c.members.clone()) {
                out.push(TestSet { label: "cube".into(), members: c.members.clone() });
            }
            for &l in lambdas {
                let d = space.dilate(&c.members, l)?;
                if seen.insert(d.clone()) {
                    out.push(TestSet { label: format!("dilate_{l}"), members: d });
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct T1Report {
    /// Smallest `A` with `|T chi_E|^2 + |T^* chi_E|^2 <= A mu(E)` over the family, taken
    /// separately for each side: `max(|T chi_E|^2, |T^* chi_E|^2) / mu(E)`.
    pub a: f64,
    pub a_direct: f64,
    pub a_adjoint: f64,
    pub per_label: Vec<(String, f64)>,
    pub worst_set: Option<String>,
    pub n_sets: usize,
}

pub fn check_t1(km: &KernelMatrix, space: &MetricMeasureSpace, family: &[TestSet]) -> T1Report {
    let mu = space.mu();
    let supp = space.support();
    let mut a_dir: f64 = 0.0;
    let mut a_adj: f64 = 0.0;
    let mut per: Vec<(String, f64)> = Vec::new();
    let mut worst = None;
    let mut worst_val: f64 = -1.0;
    for set in family {
        let e: Vec<usize> = set.members.iter().cloned().filter(|&x| mu[x] > 0.0).collect();
        let me: f64 = e.iter().map(|&x| mu[x]).sum();
        if me <= 0.0 {
            continue;
        }
        let mut nd = 0.0;
        let mut na = 0.0;
        for &x in &supp {
            let mut td = 0.0;
            let mut ta = 0.0;
            for &y in &e {
                td += km.get(x, y) * mu[y];
                ta += km.get(y, x) * mu[y];
            }
            nd += mu[x] * td * td;
            na += mu[x] * ta * ta;
        }
        let (rd, ra) = (nd / me, na / me);
        a_dir = a_dir.max(rd);
        a_adj = a_adj.max(ra);
        let r = rd.max(ra);
        match per.iter_mut().find(|(l, _)| *l == set.label) {
            Some(p) => p.1 = p.1.max(r),
            None => per.push((set.label.clone(), r)),
        }
        if r > worst_val {
            worst_val = r;
            worst = Some(format!("{} of {} points", set.label, set.members.len()));
        }
    }
    T1Report { a: a_dir.max(a_adj), a_direct: a_dir, a_adjoint: a_adj, per_label: per, worst_set: worst, n_sets: family.len() }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PowerIterOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for PowerIterOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 200_000, seed: 0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormEstimate {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub low_confidence: bool,
}

/// `y = M v` for a dense row-major `rows x cols` matrix.
fn matvec(m: &[f64], rows: usize, cols: usize, v: &[f64]) -> Vec<f64> {
    (0..rows).map(|i| m[i * cols..(i + 1) * cols].iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

fn matvec_t(m: &[f64], rows: usize, cols: usize, v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; cols];
    for i in 0..rows {
        let vi = v[i];
        if vi == 0.0 {
            continue;
        }
        for (o, a) in out.iter_mut().zip(&m[i * cols..(i + 1) * cols]) {
            *o += a * vi;
        }
    }
    out
}

/// Power iteration on `M^T M` for a dense `rows x cols` matrix, started from `start`.
pub(crate) fn power_iteration(m: &[f64], rows: usize, cols: usize, start: Vec<f64>, tol: f64, max_iter: usize) -> NormEstimate {
    if rows == 0 || cols == 0 {
        return NormEstimate { value: 0.0, iterations: 0, converged: true, low_confidence: false };
    }
    let mut v = start;
    let nv = norm2(&v);
    if nv == 0.0 {
        v = vec![1.0; cols];
    }
    let nv = norm2(&v);
    v.iter_mut().for_each(|a| *a /= nv);
    let mut lambda_prev = f64::NAN;
    let mut streak = 0;
    for it in 1..=max_iter {
        let w = matvec_t(m, rows, cols, &matvec(m, rows, cols, &v));
        let lambda: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        let nw = norm2(&w);
        if nw == 0.0 {
            return NormEstimate { value: 0.0, iterations: it, converged: true, low_confidence: false };
        }
        let change = (lambda - lambda_prev).abs();
        if change <= tol * tol * lambda.abs() {
            streak += 1;
        } else {
            streak = 0;
        }
        let residual = w.iter().zip(&v).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt();
        v = w.into_iter().map(|a| a / nw).collect();
        if (streak >= 2 && residual <= tol * lambda.abs()) || residual <= 1e-14 * lambda.abs() {
            return NormEstimate { value: lambda.max(0.0).sqrt(), iterations: it, converged: true, low_confidence: false };
        }
        lambda_prev = lambda;
    }
    let w = matvec_t(m, rows, cols, &matvec(m, rows, cols, &v));
    let lambda: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
    NormEstimate { value: lambda.max(0.0).sqrt(), iterations: max_iter, converged: false, low_confidence: true }
}

/// Operator norm of `T` on `L^2(mu)` by power iteration on `T^* T` from a seeded random start.
pub fn operator_norm(km: &KernelMatrix, space: &MetricMeasureSpace, opts: PowerIterOptions) -> NormEstimate {
    let (supp, m) = km.weighted_support_matrix(space);
    let s = supp.len();
    let mut r = rng(opts.seed);
    let start: Vec<f64> = (0..s).map(|_| r.gen_range(0.5..1.5)).collect();
    power_iteration(&m, s, s, start, opts.tol, opts.max_iter)
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
    fn averaging_kernel_has_unit_norm() {
        let s = line(9);
        let km = KernelSpec::constant(1.0, 1.0).evaluate(&s).unwrap();
        let est = operator_norm(&km, &s, PowerIterOptions::default());
        assert!((est.value - 1.0).abs() < 1e-10, "{est:?}");
    }

    #[test]
    fn zero_kernel_has_zero_norm() {
        let s = line(5);
        let km = KernelSpec::zero(1.0).evaluate(&s).unwrap();
        assert_eq!(operator_norm(&km, &s, PowerIterOptions::default()).value, 0.0);
    }

    #[test]
    fn power_kernel_meets_declared_constant() {
        let s = line(12);
        let spec = KernelSpec::power(1.0);
        let km = spec.evaluate(&s).unwrap();
        let rep = check_size_and_smoothness(&spec, &km, &s, PointScope::All);
        assert!(rep.pass, "{rep:?}");
        assert!((rep.c_size - 1.0).abs() < 1e-12);
    }

    #[test]
    fn domination_requires_a_boundary() {
        let s = line(4).with_omega(vec![true; 4]).unwrap();
        let spec = KernelSpec::bergman(1.0, BergmanForm::Regularized);
        let km = spec.evaluate(&s).unwrap();
        assert!(matches!(check_d_domination(&spec, &km, &s), Err(Error::OmegaIsWholeSpace)));
    }

    #[test]
    fn max_d_form_meets_domination_with_equality() {
        let omega = vec![true, true, true, true, false, false];
        let spec = KernelSpec::bergman(1.0, BergmanForm::MaxD);
        let s = line(6).with_omega(omega.clone()).unwrap();
        assert!(matches!(spec.evaluate(&s), Err(Error::NonFiniteKernelValue(..))));
        let coords = (0..6).map(|i| vec![i as f64]).collect();
        let mu = vec![0.25, 0.25, 0.25, 0.25, 0.0, 0.0];
        let s = MetricMeasureSpace::euclidean(coords, vec![1.0; 6], mu, omega, 1.0).unwrap();
        let km = spec.evaluate(&s).unwrap();
        let rep = check_d_domination(&spec, &km, &s).unwrap();
        assert!(rep.pass);
        assert!((rep.worst_ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn apply_matches_adjoint_pairing() {
        let s = line(7);
        let km = KernelSpec::power(1.0).evaluate(&s).unwrap();
        let f: Vec<f64> = (0..7).map(|i| (i as f64).sin()).collect();
        let g: Vec<f64> = (0..7).map(|i| (i as f64 * 0.3).cos()).collect();
        let a = crate::util::inner_mu(s.mu(), &km.apply(&s, &f), &g);
        let b = crate::util::inner_mu(s.mu(), &f, &km.adjoint_apply(&s, &g));
        assert!((a - b).abs() < 1e-14);
    }
}

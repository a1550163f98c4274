//! Independent oracles shared by the integration tests. Nothing here calls the crate's own
//! linear algebra or badness code.
#![allow(dead_code)]

use czkit::kernel::KernelMatrix;
use czkit::lattice::DyadicLattice;
use czkit::space::MetricMeasureSpace;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Singular values of a dense row-major `rows x cols` matrix by one-sided Jacobi rotations.
pub fn jacobi_singular_values(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    // work on the side with fewer columns
    let (m, n, mut u) = if cols <= rows {
        (rows, cols, a.to_vec())
    } else {
        let mut t = vec![0.0; rows * cols];
        for i in 0..rows {
            for j in 0..cols {
                t[j * rows + i] = a[i * cols + j];
            }
        }
        (cols, rows, t)
    };
    let col = |u: &[f64], j: usize| -> Vec<f64> { (0..m).map(|i| u[i * n + j]).collect() };
    for _sweep in 0..80 {
        let mut off: f64 = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                let cp = col(&u, p);
                let cq = col(&u, q);
                let alpha: f64 = cp.iter().map(|x| x * x).sum();
                let beta: f64 = cq.iter().map(|x| x * x).sum();
                let gamma: f64 = cp.iter().zip(&cq).map(|(x, y)| x * y).sum();
                if gamma == 0.0 {
                    continue;
                }
                off = off.max(gamma.abs() / (alpha * beta).sqrt().max(f64::MIN_POSITIVE));
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let x = u[i * n + p];
                    let y = u[i * n + q];
                    u[i * n + p] = c * x - s * y;
                    u[i * n + q] = s * x + c * y;
                }
            }
        }
        if off < 1e-15 {
            break;
        }
    }
    let mut sv: Vec<f64> = (0..n).map(|j| col(&u, j).iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

pub fn jacobi_spectral_norm(a: &[f64], rows: usize, cols: usize) -> f64 {
    if rows == 0 || cols == 0 {
        return 0.0;
    }
    jacobi_singular_values(a, rows, cols)[0]
}

/// `L^2(mu)` norm of `f -> sum_y k(x, y) f(y) mu(y)`: the spectral norm of
/// `sqrt(mu_x) k(x, y) sqrt(mu_y)` on the support of `mu`.
pub fn dense_operator_norm(space: &MetricMeasureSpace, km: &KernelMatrix) -> f64 {
    let supp: Vec<usize> = (0..space.n()).filter(|&x| space.mu()[x] > 0.0).collect();
    let mu = space.mu();
    let s = supp.len();
    let mut a = vec![0.0; s * s];
    for (i, &x) in supp.iter().enumerate() {
        for (j, &y) in supp.iter().enumerate() {
            a[i * s + j] = mu[x].sqrt() * km.get(x, y) * mu[y].sqrt();
        }
    }
    jacobi_spectral_norm(&a, s, s)
}

/// Brute-force goodness of cube `q` of `lat` against `other`, straight from the definition:
/// `q` is bad if some cube `R` of `other` at least `r` generations coarser (and with children)
/// either meets `q` without containing it in a single child, or has a point of its skeleton
/// within `s(q)^alpha s(R)^(1 - alpha)` of `q`. The skeleton of `R` is the set of points of
/// `R` with a point of a different child within the resolution.
pub fn brute_force_good(space: &MetricMeasureSpace, lat: &DyadicLattice, other: &DyadicLattice, q: usize, alpha: f64, r: u32) -> bool {
    let cq = lat.cube(q);
    let sq = lat.scale(cq.k);
    let reach = space.resolution_h() * (1.0 + 1e-9);
    let child_of = |x: usize, rr: usize| -> Option<usize> { other.cube(rr).children.iter().cloned().find(|&c| other.cube(c).contains(x)) };
    for cr in other.cubes() {
        if cr.k > cq.k - r as i32 || cr.children.is_empty() {
            continue;
        }
        let inside: Vec<usize> = cq.members.iter().cloned().filter(|&x| cr.contains(x)).collect();
        if !inside.is_empty() {
            let first = child_of(inside[0], cr.id);
            if inside.len() < cq.members.len() || inside.iter().any(|&x| child_of(x, cr.id) != first) {
                return false;
            }
        }
        let threshold = sq.powf(alpha) * other.scale(cr.k).powf(1.0 - alpha);
        for &x in &cr.members {
            let cx = other.cube_at(cr.k + 1, x);
            let on_skeleton = (0..space.n()).any(|y| y != x && space.rho(x, y) <= reach && other.cube_at(cr.k + 1, y) != cx);
            if on_skeleton && cq.members.iter().any(|&z| space.rho(z, x) < threshold) {
                return false;
            }
        }
    }
    true
}

pub fn chacha(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random planar cloud of `n` points in `[0, side]^2` with `nu` uniform and `mu` random, about a
/// quarter of it zero. `Omega` is empty. The resolution is the smallest distance.
pub fn random_space(seed: u64, n: usize, side: f64) -> MetricMeasureSpace {
    let mut g = chacha(seed);
    let coords: Vec<Vec<f64>> = (0..n).map(|_| vec![g.gen_range(0.0..side), g.gen_range(0.0..side)]).collect();
    let mut mu: Vec<f64> = (0..n).map(|_| if g.gen_bool(0.25) { 0.0 } else { g.gen_range(0.1..1.0) }).collect();
    if mu.iter().all(|&v| v == 0.0) {
        mu[0] = 1.0;
    }
    let total: f64 = mu.iter().sum();
    mu.iter_mut().for_each(|v| *v /= total);
    let mut h = f64::INFINITY;
    for i in 0..n {
        for j in (i + 1)..n {
            let d = ((coords[i][0] - coords[j][0]).powi(2) + (coords[i][1] - coords[j][1]).powi(2)).sqrt();
            h = h.min(d);
        }
    }
    let nu = vec![1.0 / n as f64; n];
    MetricMeasureSpace::euclidean(coords, nu, mu, vec![false; n], h.max(1e-9)).expect("valid random space")
}

pub fn random_function(seed: u64, n: usize) -> Vec<f64> {
    let mut g = chacha(seed);
    (0..n).map(|_| g.gen_range(-1.0..1.0)).collect()
}

pub fn mu_norm2(space: &MetricMeasureSpace, f: &[f64]) -> f64 {
    f.iter().zip(space.mu()).map(|(a, w)| a * a * w).sum()
}

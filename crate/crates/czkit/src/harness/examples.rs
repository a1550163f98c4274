//! Built-in example spaces with a matching default kernel.

use crate::error::{Error, Result};
use crate::kernel::{BergmanForm, KernelSpec};
use crate::space::MetricMeasureSpace;
use serde::{Deserialize, Serialize};

pub const EXAMPLE_NAMES: [&str; 4] = ["line_in_plane", "cantor_measure", "bergman_disc_model", "uniform_grid"];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExampleParams {
    /// Grid side in points (line_in_plane, uniform_grid).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Cantor depth.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    /// Number of rings of the disc model; the outermost ring is the boundary.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rings: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Example {
    pub name: String,
    pub space: MetricMeasureSpace,
    pub kernel: KernelSpec,
    /// Growth exponent of `mu`.
    pub m: f64,
    /// Dimension of the ambient measure `nu`.
    pub n_dim: f64,
}

pub fn generate_example(name: &str, params: &ExampleParams) -> Result<Example> {
    match name {
        "line_in_plane" => line_in_plane(params.n.unwrap_or(16)),
        "cantor_measure" | "cantor" => cantor_measure(params.depth.unwrap_or(5)),
        "bergman_disc_model" => bergman_disc_model(params.rings.unwrap_or(5)),
        "uniform_grid" => uniform_grid(params.n.unwrap_or(9)),
        other => Err(Error::UnknownExample(other.to_string())),
    }
}

/// `n x n` grid of side 4 with `nu` uniform and `mu` uniform on the middle row. `Omega` holds
/// the points within one spacing of that row. With spacing `4 / n` the line measure satisfies
/// `mu(B(x, r)) <= r` from the spacing up.
pub fn line_in_plane(n: usize) -> Result<Example> {
    if n < 2 {
        return Err(Error::invalid("line_in_plane needs n >= 2"));
    }
    let h = 4.0 / n as f64;
    let row = n / 2;
    let mut coords = Vec::with_capacity(n * n);
    let mut mu = Vec::with_capacity(n * n);
    let mut omega = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            coords.push(vec![i as f64 * h, j as f64 * h]);
            mu.push(if j == row { 1.0 / n as f64 } else { 0.0 });
            omega.push(j.abs_diff(row) <= 1);
        }
    }
    let nu = vec![1.0 / (n * n) as f64; n * n];
    let space = MetricMeasureSpace::euclidean(coords, nu, mu, omega, h)?;
    Ok(Example { name: "line_in_plane".into(), space, kernel: KernelSpec::bergman(1.0, BergmanForm::Regularized), m: 1.0, n_dim: 2.0 })
}

/// Left endpoints of the `2^depth` intervals of the middle-thirds construction on `[0, c]`,
/// with `c^m = 4` for `m = log 2 / log 3`, so balls above the resolution have
/// `mu(B(x, r)) <= r^m`. Depth 0 is a single point mass, which is its own open set.
pub fn cantor_measure(depth: usize) -> Result<Example> {
    if depth > 12 {
        return Err(Error::TooLarge { n: 1 << depth, limit: 1 << 12 });
    }
    let m = 2f64.ln() / 3f64.ln();
    let c = 4f64.powf(1.0 / m);
    let count = 1usize << depth;
    let coords: Vec<Vec<f64>> = (0..count)
        .map(|idx| {
            let mut x = 0.0;
            let mut len = c;
            for bit in (0..depth).rev() {
                len /= 3.0;
                if (idx >> bit) & 1 == 1 {
                    x += 2.0 * len;
                }
            }
            vec![x]
        })
        .collect();
    let w = vec![1.0 / count as f64; count];
    let h = if depth == 0 { 1.0 } else { 2.0 * c / 3f64.powi(depth as i32) };
    let omega = vec![depth == 0; count];
    let space = MetricMeasureSpace::euclidean(coords, w.clone(), w, omega, h)?;
    Ok(Example { name: "cantor_measure".into(), space, kernel: KernelSpec::power(m), m, n_dim: m })
}

/// Unit disc sampled on concentric rings (`6 j` points on ring `j`), plus the centre. `mu`
/// puts 0.3 at the centre and spreads 0.7 over the ring next to the boundary; the outermost
/// ring is the boundary and `Omega` is everything inside it.
pub fn bergman_disc_model(rings: usize) -> Result<Example> {
    if rings < 2 {
        return Err(Error::invalid("bergman_disc_model needs at least 2 rings"));
    }
    let mut coords = vec![vec![0.0, 0.0]];
    let mut ring_of = vec![0usize];
    for j in 1..=rings {
        let radius = j as f64 / rings as f64;
        let count = 6 * j;
        for t in 0..count {
            let a = 2.0 * std::f64::consts::PI * t as f64 / count as f64;
            coords.push(vec![radius * a.cos(), radius * a.sin()]);
            ring_of.push(j);
        }
    }
    let n = coords.len();
    let near = rings - 1;
    let near_count = 6 * near;
    let mu: Vec<f64> = ring_of
        .iter()
        .map(|&j| match j {
            0 => 0.3,
            j if j == near => 0.7 / near_count as f64,
            _ => 0.0,
        })
        .collect();
    let omega: Vec<bool> = ring_of.iter().map(|&j| j < rings).collect();
    let nu = vec![1.0 / n as f64; n];
    let mut h = f64::INFINITY;
    for i in 0..n {
        for j in (i + 1)..n {
            let d = ((coords[i][0] - coords[j][0]).powi(2) + (coords[i][1] - coords[j][1]).powi(2)).sqrt();
            h = h.min(d);
        }
    }
    let space = MetricMeasureSpace::euclidean(coords, nu, mu, omega, h)?;
    Ok(Example { name: "bergman_disc_model".into(), space, kernel: KernelSpec::bergman(1.0, BergmanForm::Regularized), m: 1.0, n_dim: 2.0 })
}

/// `n x n` grid of side 3 with `mu = nu` uniform: the Ahlfors case `m = 2`.
pub fn uniform_grid(n: usize) -> Result<Example> {
    if n < 2 {
        return Err(Error::invalid("uniform_grid needs n >= 2"));
    }
    let h = 3.0 / n as f64;
    let mut coords = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            coords.push(vec![i as f64 * h, j as f64 * h]);
        }
    }
    let w = vec![1.0 / (n * n) as f64; n * n];
    let space = MetricMeasureSpace::euclidean(coords, w.clone(), w, vec![false; n * n], h)?;
    Ok(Example { name: "uniform_grid".into(), space, kernel: KernelSpec::power(2.0), m: 2.0, n_dim: 2.0 })
}

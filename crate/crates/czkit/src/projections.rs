//! Averages and martingale differences on a classified lattice.
//!
//! `Lambda phi` is the `mu`-average over the whole space. For a transit cube `Q`, `Delta_Q phi`
//! equals `<phi>_S - <phi>_Q` on each transit child `S` and `phi - <phi>_Q` on each terminal child.

use crate::error::{Error, Result};
use crate::lattice::DyadicLattice;
use crate::space::MetricMeasureSpace;
use crate::util::inner_mu;
use serde::{Deserialize, Serialize};

/// `Delta_Q phi`, stored on the members of `Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub cube: usize,
    pub support: Vec<usize>,
    pub values: Vec<f64>,
}

impl Component {
    pub fn norm(&self, space: &MetricMeasureSpace) -> f64 {
        let mu = space.mu();
        self.support.iter().zip(&self.values).map(|(&x, v)| mu[x] * v * v).sum::<f64>().sqrt()
    }

    pub fn l1(&self, space: &MetricMeasureSpace) -> f64 {
        let mu = space.mu();
        self.support.iter().zip(&self.values).map(|(&x, v)| mu[x] * v.abs()).sum()
    }

    pub fn mean_mass(&self, space: &MetricMeasureSpace) -> f64 {
        let mu = space.mu();
        self.support.iter().zip(&self.values).map(|(&x, v)| mu[x] * v).sum()
    }

    pub fn to_dense(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        self.add_into(&mut out, 1.0);
        out
    }

    pub fn add_into(&self, out: &mut [f64], scale: f64) {
        for (&x, v) in self.support.iter().zip(&self.values) {
            out[x] += scale * v;
        }
    }
}

#[derive(Debug, Clone)]
pub struct Decomposition {
    pub lambda: f64,
    pub components: Vec<Component>,
    index: Vec<Option<usize>>,
    n: usize,
}

impl Decomposition {
    pub fn component(&self, cube: usize) -> Option<&Component> {
        self.index.get(cube).copied().flatten().map(|i| &self.components[i])
    }

    pub fn n_points(&self) -> usize {
        self.n
    }

    /// `Lambda phi + sum_Q Delta_Q phi`.
    pub fn reconstruct(&self) -> Vec<f64> {
        let mut out = vec![self.lambda; self.n];
        for c in &self.components {
            c.add_into(&mut out, 1.0);
        }
        out
    }

    /// `(phi_good, phi_bad)` where `phi_good = Lambda phi + sum over good Q`. `good` is indexed
    /// by cube id.
    pub fn split_good_bad(&self, good: &[bool]) -> (Vec<f64>, Vec<f64>) {
        let mut g = vec![self.lambda; self.n];
        let mut b = vec![0.0; self.n];
        for c in &self.components {
            if good[c.cube] {
                c.add_into(&mut g, 1.0);
            } else {
                c.add_into(&mut b, 1.0);
            }
        }
        (g, b)
    }

    /// `sqrt(sum over bad Q of |Delta_Q phi|^2)`.
    pub fn bad_norm(&self, space: &MetricMeasureSpace, good: &[bool]) -> f64 {
        self.components.iter().filter(|c| !good[c.cube]).map(|c| c.norm(space).powi(2)).sum::<f64>().sqrt()
    }
}

pub fn average(space: &MetricMeasureSpace, set: &[usize], phi: &[f64]) -> Option<f64> {
    let mu = space.mu();
    let mass: f64 = set.iter().map(|&x| mu[x]).sum();
    if mass <= 0.0 {
        return None;
    }
    Some(set.iter().map(|&x| mu[x] * phi[x]).sum::<f64>() / mass)
}

/// `<phi>_Q` for every cube, `None` where the cube has zero mass.
pub fn cube_averages(space: &MetricMeasureSpace, lattice: &DyadicLattice, phi: &[f64]) -> Vec<Option<f64>> {
    lattice.cubes().iter().map(|c| average(space, &c.members, phi)).collect()
}

fn check_len(space: &MetricMeasureSpace, phi: &[f64]) -> Result<()> {
    if phi.len() != space.n() {
        return Err(Error::invalid(format!("function has {} values, expected {}", phi.len(), space.n())));
    }
    if phi.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("function has non-finite values"));
    }
    Ok(())
}

fn delta_from_averages(lattice: &DyadicLattice, avg: &[Option<f64>], phi: &[f64], q: usize) -> Component {
    let cube = lattice.cube(q);
    let aq = avg[q].expect("transit cubes have mass");
    let mut support = Vec::with_capacity(cube.members.len());
    let mut values = Vec::with_capacity(cube.members.len());
    for &ch in &cube.children {
        let child = lattice.cube(ch);
        for &x in &child.members {
            support.push(x);
            values.push(if child.is_transit() { avg[ch].expect("transit cubes have mass") - aq } else { phi[x] - aq });
        }
    }
    let mut pairs: Vec<(usize, f64)> = support.into_iter().zip(values).collect();
    pairs.sort_unstable_by_key(|p| p.0);
    let (support, values) = pairs.into_iter().unzip();
    Component { cube: q, support, values }
}

/// `Delta_Q phi` for a single transit cube.
pub fn delta(space: &MetricMeasureSpace, lattice: &DyadicLattice, phi: &[f64], q: usize) -> Result<Component> {
    lattice.require_classified()?;
    check_len(space, phi)?;
    let cube = lattice.cube(q);
    if !cube.is_transit() {
        return Err(Error::ClassificationMissing(format!("cube {q} is not transit")));
    }
    let mut avg = vec![None; lattice.cubes().len()];
    avg[q] = average(space, &cube.members, phi);
    if avg[q].is_none() {
        return Err(Error::ZeroMass(q));
    }
    for &ch in &cube.children {
        avg[ch] = average(space, &lattice.cube(ch).members, phi);
    }
    Ok(delta_from_averages(lattice, &avg, phi, q))
}

/// Full martingale decomposition over the transit cubes of `lattice`.
pub fn decompose(space: &MetricMeasureSpace, lattice: &DyadicLattice, phi: &[f64]) -> Result<Decomposition> {
    lattice.require_classified()?;
    check_len(space, phi)?;
    let avg = cube_averages(space, lattice, phi);
    let lambda = avg[lattice.root()].ok_or(Error::ZeroMass(lattice.root()))?;
    let mut index = vec![None; lattice.cubes().len()];
    let mut components = Vec::new();
    for q in lattice.difference_cubes() {
        index[q] = Some(components.len());
        components.push(delta_from_averages(lattice, &avg, phi, q));
    }
    Ok(Decomposition { lambda, components, index, n: space.n() })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PropertiesReport {
    pub reconstruction_error: f64,
    pub idempotence_error: f64,
    pub orthogonality_error: f64,
    pub composition_error: f64,
    pub zero_mean_error: f64,
    pub constant_annihilation_error: f64,
    pub n_components: usize,
    pub n_nested_pairs: usize,
}

impl PropertiesReport {
    pub fn max_error(&self) -> f64 {
        [
            self.reconstruction_error,
            self.idempotence_error,
            self.orthogonality_error,
            self.composition_error,
            self.zero_mean_error,
            self.constant_annihilation_error,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

fn sup_on_support(space: &MetricMeasureSpace, a: &[f64], b: &[f64]) -> f64 {
    let mu = space.mu();
    (0..a.len()).filter(|&x| mu[x] > 0.0).map(|x| (a[x] - b[x]).abs()).fold(0.0, f64::max)
}

/// Checks reconstruction, idempotence, mutual orthogonality of nested components and the
/// relations with `Lambda`, all measured on the support of `mu`.
pub fn properties_check(space: &MetricMeasureSpace, lattice: &DyadicLattice, phi: &[f64]) -> Result<PropertiesReport> {
    let dec = decompose(space, lattice, phi)?;
    let n = space.n();
    let mu = space.mu();
    let reconstruction_error = sup_on_support(space, &dec.reconstruct(), phi);
    let mut idempotence_error: f64 = 0.0;
    let mut orthogonality_error: f64 = 0.0;
    let mut composition_error: f64 = 0.0;
    let mut zero_mean_error: f64 = 0.0;
    let mut constant_annihilation_error: f64 = 0.0;
    let mut n_nested = 0;
    let ones = vec![1.0; n];
    let zero = vec![0.0; n];
    for c in &dec.components {
        let dense = c.to_dense(n);
        let again = delta(space, lattice, &dense, c.cube)?.to_dense(n);
        idempotence_error = idempotence_error.max(sup_on_support(space, &again, &dense));
        zero_mean_error = zero_mean_error.max(c.mean_mass(space).abs());
        let on_const = delta(space, lattice, &ones, c.cube)?.to_dense(n);
        constant_annihilation_error = constant_annihilation_error.max(sup_on_support(space, &on_const, &zero));
        let mut p = lattice.cube(c.cube).parent;
        while let Some(a) = p {
            if let Some(ca) = dec.component(a) {
                n_nested += 1;
                let da = ca.to_dense(n);
                orthogonality_error = orthogonality_error.max(inner_mu(mu, &da, &dense).abs());
                let ad = delta(space, lattice, &dense, a)?.to_dense(n);
                let da2 = delta(space, lattice, &da, c.cube)?.to_dense(n);
                composition_error = composition_error.max(sup_on_support(space, &ad, &zero)).max(sup_on_support(space, &da2, &zero));
            }
            p = lattice.cube(a).parent;
        }
    }
    Ok(PropertiesReport {
        reconstruction_error,
        idempotence_error,
        orthogonality_error,
        composition_error,
        zero_mean_error,
        constant_annihilation_error,
        n_components: dec.components.len(),
        n_nested_pairs: n_nested,
    })
}

//! JSON formats for spaces, kernels, lattices and function vectors.
//!
//! Points are referred to by their identifiers in files and by their index in memory.

use crate::error::{Error, Result};
use crate::kernel::{BergmanForm, DiagonalPolicy, KernelFamily, KernelSpec};
use crate::lattice::{CubeSpec, DyadicLattice};
use crate::space::{MetricMeasureSpace, MetricSource};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::Path;

/// Explicit distance matrices must be symmetric to this absolute tolerance.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MetricFile {
    Euclidean { coords: Vec<Vec<f64>> },
    Explicit { matrix: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceFile {
    pub points: Vec<u64>,
    pub metric: MetricFile,
    pub nu: Vec<f64>,
    pub mu: Vec<f64>,
    /// Identifiers of the points in the open set.
    #[serde(default)]
    pub omega: Vec<u64>,
    #[serde(default = "one")]
    pub quasi_const: f64,
    pub resolution_h: f64,
}

fn one() -> f64 {
    1.0
}

impl SpaceFile {
    pub fn from_space(space: &MetricMeasureSpace) -> Self {
        let n = space.n();
        let metric = match space.source() {
            MetricSource::Euclidean(c) => MetricFile::Euclidean { coords: c.clone() },
            MetricSource::Explicit => MetricFile::Explicit { matrix: (0..n).map(|x| space.rho_row(x).to_vec()).collect() },
        };
        let ids = space.ids();
        SpaceFile {
            points: ids.to_vec(),
            metric,
            nu: space.nu().to_vec(),
            mu: space.mu().to_vec(),
            omega: (0..n).filter(|&x| space.in_omega(x)).map(|x| ids[x]).collect(),
            quasi_const: space.quasi_const(),
            resolution_h: space.resolution_h(),
        }
    }

    pub fn into_space(self) -> Result<MetricMeasureSpace> {
        let n = self.points.len();
        let index: HashMap<u64, usize> = self.points.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let mut omega = vec![false; n];
        for id in &self.omega {
            let &i = index.get(id).ok_or_else(|| Error::invalid(format!("omega refers to unknown point {id}")))?;
            omega[i] = true;
        }
        match self.metric {
            MetricFile::Euclidean { coords } => {
                if coords.len() != n {
                    return Err(Error::invalid("coordinate list does not match the point list"));
                }
                if self.quasi_const != 1.0 {
                    return Err(Error::invalid("Euclidean distances have quasi-metric constant 1"));
                }
                MetricMeasureSpace::euclidean(coords, self.nu, self.mu, omega, self.resolution_h)?.with_ids(self.points)
            }
            MetricFile::Explicit { matrix } => {
                if matrix.len() != n || matrix.iter().any(|r| r.len() != n) {
                    return Err(Error::invalid("distance matrix does not match the point list"));
                }
                for i in 0..n {
                    for j in 0..i {
                        if (matrix[i][j] - matrix[j][i]).abs() > SYMMETRY_TOL {
                            return Err(Error::invalid(format!("distance matrix is not symmetric at ({i}, {j})")));
                        }
                    }
                }
                let rho: Vec<f64> = matrix.into_iter().flatten().collect();
                MetricMeasureSpace::new(self.points, rho, self.nu, self.mu, omega, self.quasi_const, self.resolution_h)
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_cz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_cz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagonal: Option<DiagonalPolicy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub form: Option<BergmanForm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
}

/// `{type, params, matrix}`; `matrix` only for the explicit family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelFile {
    #[serde(rename = "type")]
    pub kind: String,
    #[serde(default)]
    pub params: KernelParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
}

impl KernelFile {
    pub fn from_spec(spec: &KernelSpec) -> Self {
        let mut params = KernelParams {
            m: Some(spec.m),
            tau: Some(spec.tau),
            c_cz: spec.c_cz,
            delta_cz: Some(spec.delta_cz),
            diagonal: Some(spec.diagonal),
            ..Default::default()
        };
        let mut matrix = None;
        let kind = match &spec.family {
            KernelFamily::Power { scale } => {
                params.scale = Some(*scale);
                "power"
            }
            KernelFamily::Bergman { form } => {
                params.form = Some(*form);
                "bergman"
            }
            KernelFamily::Explicit { matrix: mm } => {
                matrix = Some(mm.clone());
                "explicit"
            }
            KernelFamily::Zero => "zero",
            KernelFamily::Constant { c } => {
                params.c = Some(*c);
                "constant"
            }
        };
        KernelFile { kind: kind.into(), params, matrix }
    }

    /// `default_m` fills in a missing exponent (normally the dimension of the example).
    pub fn into_spec(self, default_m: Option<f64>) -> Result<KernelSpec> {
        let p = self.params;
        let m = p.m.or(default_m).ok_or_else(|| Error::invalid("kernel exponent m is missing"))?;
        let mut spec = match self.kind.as_str() {
            "power" => {
                let mut s = KernelSpec::power(m);
                s.family = KernelFamily::Power { scale: p.scale.unwrap_or(1.0) };
                s
            }
            "bergman" => KernelSpec::bergman(m, p.form.unwrap_or(BergmanForm::Regularized)),
            "explicit" => {
                let matrix = self.matrix.ok_or_else(|| Error::invalid("explicit kernel needs a matrix"))?;
                KernelSpec::explicit(matrix, m, p.tau.unwrap_or(1.0), p.c_cz.unwrap_or(1.0))
            }
            "zero" => KernelSpec::zero(m),
            "constant" => KernelSpec::constant(p.c.unwrap_or(1.0), m),
            other => return Err(Error::invalid(format!("unknown kernel type '{other}'"))),
        };
        if let Some(t) = p.tau {
            spec.tau = t;
        }
        if p.c_cz.is_some() {
            spec.c_cz = p.c_cz;
        }
        if let Some(d) = p.delta_cz {
            spec.delta_cz = d;
        }
        if let Some(d) = p.diagonal {
            spec.diagonal = d;
        }
        if !(spec.tau > 0.0 && spec.tau <= 1.0) || !(spec.delta_cz > 0.0 && spec.delta_cz < 1.0) || !(m > 0.0) {
            return Err(Error::invalid("kernel parameters out of range"));
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeFile {
    pub id: usize,
    pub center: u64,
    pub members: Vec<u64>,
    pub parent: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationFile {
    pub k: i32,
    pub cubes: Vec<CubeFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeFile {
    pub kappa: f64,
    pub seed: u64,
    pub generations: Vec<GenerationFile>,
}

impl LatticeFile {
    pub fn from_lattice(space: &MetricMeasureSpace, lat: &DyadicLattice) -> Self {
        let ids = space.ids();
        let generations = (lat.k_min()..=lat.k_max())
            .map(|k| GenerationFile {
                k,
                cubes: lat
                    .generation(k)
                    .iter()
                    .map(|&c| {
                        let cube = lat.cube(c);
                        CubeFile { id: c, center: ids[cube.center], members: cube.members.iter().map(|&x| ids[x]).collect(), parent: cube.parent }
                    })
                    .collect(),
            })
            .collect();
        LatticeFile { kappa: lat.kappa(), seed: lat.seed(), generations }
    }

    /// Rebuilds the lattice on `space`. Cube ids are renumbered in file order.
    pub fn into_lattice(self, space: &MetricMeasureSpace) -> Result<DyadicLattice> {
        let first = self.generations.first().ok_or(Error::EmptySet)?;
        let k_min = first.k;
        let index = |id: u64| space.index_of(id).ok_or_else(|| Error::invalid(format!("lattice refers to unknown point {id}")));
        let mut specs = Vec::new();
        let mut prev_pos: HashMap<usize, usize> = HashMap::new();
        for (g, gen) in self.generations.iter().enumerate() {
            if gen.k != k_min + g as i32 {
                return Err(Error::invalid("lattice generations must be consecutive"));
            }
            let mut list = Vec::new();
            let mut pos = HashMap::new();
            for (i, c) in gen.cubes.iter().enumerate() {
                pos.insert(c.id, i);
                let parent = match c.parent {
                    Some(p) => Some(*prev_pos.get(&p).ok_or_else(|| Error::invalid(format!("cube {} has an unknown parent", c.id)))?),
                    None => None,
                };
                let members = c.members.iter().map(|&id| index(id)).collect::<Result<Vec<_>>>()?;
                list.push(CubeSpec { center: index(c.center)?, members, parent });
            }
            specs.push(list);
            prev_pos = pos;
        }
        DyadicLattice::from_parts(space.n(), self.kappa, self.seed, k_min, specs)
    }
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

pub fn load_space(path: impl AsRef<Path>) -> Result<MetricMeasureSpace> {
    read_json::<SpaceFile>(path)?.into_space()
}

pub fn save_space(path: impl AsRef<Path>, space: &MetricMeasureSpace) -> Result<()> {
    write_json(path, &SpaceFile::from_space(space))
}

pub fn load_kernel(path: impl AsRef<Path>, default_m: Option<f64>) -> Result<KernelSpec> {
    read_json::<KernelFile>(path)?.into_spec(default_m)
}

pub fn save_kernel(path: impl AsRef<Path>, spec: &KernelSpec) -> Result<()> {
    write_json(path, &KernelFile::from_spec(spec))
}

/// A function file is a JSON array aligned with the space's point order.
pub fn load_function(path: impl AsRef<Path>, space: &MetricMeasureSpace) -> Result<Vec<f64>> {
    let v: Vec<f64> = read_json(path)?;
    if v.len() != space.n() {
        return Err(Error::invalid(format!("function has {} values, the space has {} points", v.len(), space.n())));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("function values must be finite"));
    }
    Ok(v)
}

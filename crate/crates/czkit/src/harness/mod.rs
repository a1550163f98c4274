//! Scenarios and end-to-end runs: verify the space, build and classify a lattice, check the
//! decomposition, optionally calibrate `S`, and certify the operator norm.

pub mod examples;

pub use examples::{generate_example, Example, ExampleParams, EXAMPLE_NAMES};

use crate::certify::{certify, probe_cubes, Certificate, CertifyConfig};
use crate::error::{Error, Result};
use crate::io::{load_space, read_json, KernelFile};
use crate::kernel::{KernelSpec, PowerIterOptions};
use crate::lattice::{scale_gap, DyadicLattice, LatticeReport, TransitReport};
use crate::montecarlo::{bad_probabilities, EnsembleConfig, MIN_CONFIDENT_ENSEMBLE};
use crate::projections::{properties_check, PropertiesReport};
use crate::space::{CaptureReport, GrowthReport, MetricMeasureSpace, QuasiMetricReport, RadiusSampling, RegularityReport, MAX_POINTS};
use crate::util::{derive_seed, rng};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

/// Tolerance of the martingale-decomposition identities, relative to `|phi|^2`.
pub const DECOMPOSITION_TOL: f64 = 1e-10;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_INPUT_ERROR: i32 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpaceSource {
    Example {
        example: String,
        #[serde(default)]
        params: ExampleParams,
    },
    File {
        file: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KernelSource {
    File { file: PathBuf },
    Inline(KernelFile),
}

/// `S` is either fixed or found by [`calibrate_s`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScaleChoice {
    Fixed(u32),
    Named(String),
}

impl Default for ScaleChoice {
    fn default() -> Self {
        ScaleChoice::Fixed(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Scenario {
    pub name: String,
    pub space: SpaceSource,
    /// Defaults to the kernel of the example when the space is an example.
    pub kernel: Option<KernelSource>,
    /// Overrides of the kernel exponents.
    pub m: Option<f64>,
    pub tau: Option<f64>,
    pub kappa: f64,
    pub master_seed: u64,
    pub delta_bad: f64,
    pub s: ScaleChoice,
    pub lambda_bmo: f64,
    pub k_bmo: f64,
    /// Ensemble size of the Monte Carlo estimates inside the certificate; zero skips them.
    pub ensemble: usize,
    /// Ensemble size used by the calibration of `S`.
    pub calibration_ensemble: usize,
    pub pairs: usize,
    pub n_probes: usize,
    pub power_tol: f64,
    pub power_max_iter: usize,
    /// Ratio of the geometric radius grid; `None` samples every distance.
    pub radius_ratio: Option<f64>,
    /// Dimension of `nu` for the optional regularity report.
    pub n_dim: Option<f64>,
    pub max_points: usize,
    pub report: Option<PathBuf>,
    pub timings: bool,
}

impl Default for Scenario {
    fn default() -> Self {
        let c = CertifyConfig::default();
        Self {
            name: "scenario".into(),
            space: SpaceSource::Example { example: "line_in_plane".into(), params: ExampleParams::default() },
            kernel: None,
            m: None,
            tau: None,
            kappa: c.kappa,
            master_seed: c.master_seed,
            delta_bad: c.delta_bad,
            s: ScaleChoice::default(),
            lambda_bmo: c.lambda_bmo,
            k_bmo: c.k_bmo,
            ensemble: c.ensemble,
            calibration_ensemble: 200,
            pairs: c.pairs,
            n_probes: c.n_probes,
            power_tol: c.power.tol,
            power_max_iter: c.power.max_iter,
            radius_ratio: None,
            n_dim: None,
            max_points: MAX_POINTS,
            report: None,
            timings: false,
        }
    }
}

impl Scenario {
    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        read_json(path)
    }

    pub fn calibrate(&self) -> bool {
        matches!(&self.s, ScaleChoice::Named(s) if s == "calibrate")
    }

    pub fn validate(&self) -> Result<()> {
        if let ScaleChoice::Named(s) = &self.s {
            if s != "calibrate" {
                return Err(Error::invalid(format!("S must be a positive integer or \"calibrate\", got \"{s}\"")));
            }
            if self.calibration_ensemble < MIN_CONFIDENT_ENSEMBLE {
                return Err(Error::invalid(format!("calibration needs an ensemble of at least {MIN_CONFIDENT_ENSEMBLE}")));
            }
        }
        if let Some(m) = self.m {
            if !(m > 0.0) {
                return Err(Error::invalid("m must be positive"));
            }
        }
        if let Some(t) = self.tau {
            if !(t > 0.0 && t <= 1.0) {
                return Err(Error::invalid("tau must lie in (0, 1]"));
            }
        }
        if let Some(r) = self.radius_ratio {
            if !(r > 1.0) {
                return Err(Error::invalid("radius_ratio must exceed 1"));
            }
        }
        if !(self.power_tol > 0.0) || self.power_max_iter == 0 {
            return Err(Error::invalid("power iteration needs a positive tolerance and iteration cap"));
        }
        self.certify_config(1).validate()
    }

    pub fn certify_config(&self, s: u32) -> CertifyConfig {
        CertifyConfig {
            kappa: self.kappa,
            delta_bad: self.delta_bad,
            s,
            ensemble: self.ensemble,
            pairs: self.pairs,
            master_seed: self.master_seed,
            n_probes: self.n_probes,
            lambda_bmo: self.lambda_bmo,
            k_bmo: self.k_bmo,
            power: PowerIterOptions { tol: self.power_tol, max_iter: self.power_max_iter, seed: derive_seed(self.master_seed, 9_999) },
            verbose: false,
        }
    }

    fn radius_sampling(&self) -> RadiusSampling {
        match self.radius_ratio {
            Some(ratio) => RadiusSampling::Geometric { ratio },
            None => RadiusSampling::Exhaustive,
        }
    }

    /// Loads the space and kernel, applying the exponent overrides.
    pub fn materialize(&self) -> Result<(MetricMeasureSpace, KernelSpec)> {
        let (space, default_kernel) = match &self.space {
            SpaceSource::Example { example, params } => {
                let ex = generate_example(example, params)?;
                (ex.space, Some(ex.kernel))
            }
            SpaceSource::File { file } => (load_space(file)?, None),
        };
        if space.n() > self.max_points {
            return Err(Error::TooLarge { n: space.n(), limit: self.max_points });
        }
        let mut spec = match (&self.kernel, default_kernel) {
            (Some(KernelSource::File { file }), d) => crate::io::load_kernel(file, self.m.or(d.map(|k| k.m)))?,
            (Some(KernelSource::Inline(k)), d) => k.clone().into_spec(self.m.or(d.map(|k| k.m)))?,
            (None, Some(d)) => d,
            (None, None) => return Err(Error::invalid("a kernel is required when the space is read from a file")),
        };
        if let Some(m) = self.m {
            spec.m = m;
        }
        if let Some(t) = self.tau {
            spec.tau = t;
        }
        Ok((space, spec))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Calibration {
    pub s: u32,
    pub r: u32,
    /// Largest estimated bad probability over the probe cubes at the chosen `S`.
    pub p_max: f64,
    pub stderr: f64,
    pub target: f64,
    pub exhausted: bool,
    pub warning: Option<String>,
    /// `(S, r, p_max)` for every candidate tried.
    pub tried: Vec<(u32, u32, f64)>,
}

/// Cubes of `lat` at least `r` generations below the top, spread over the generations.
fn calibration_probes(lat: &DyadicLattice, r: u32, count: usize) -> Vec<usize> {
    let floor = lat.k_min() + r as i32;
    probe_cubes(lat, usize::MAX).into_iter().filter(|&q| lat.cube(q).k >= floor).take(count).collect()
}

/// Doubling search for the smallest `S` whose estimated bad probability is at most
/// `delta_bad^2` on a probe set of cubes. A candidate is feasible while some probe cube lies at
/// least `r(S)` generations below the root; when none qualifies, the largest feasible `S` is
/// returned with a warning.
pub fn calibrate_s(space: &MetricMeasureSpace, kappa: f64, tau: f64, m: f64, delta_bad: f64, ensemble: usize, seed: u64) -> Result<Calibration> {
    if ensemble < MIN_CONFIDENT_ENSEMBLE {
        return Err(Error::invalid(format!("calibration needs an ensemble of at least {MIN_CONFIDENT_ENSEMBLE}")));
    }
    let target = delta_bad * delta_bad;
    if target >= 1.0 {
        return Ok(Calibration { s: 1, r: scale_gap(kappa, delta_bad, 1), p_max: 0.0, stderr: 0.0, target, exhausted: false, warning: None, tried: Vec::new() });
    }
    let mut lat = DyadicLattice::build(space, kappa, derive_seed(seed, 0), None)?;
    lat.classify_terminal_transit(space, m)?;
    let mut tried = Vec::new();
    let mut last: Option<Calibration> = None;
    let mut s = 1u32;
    loop {
        let r = scale_gap(kappa, delta_bad, s);
        let probes = calibration_probes(&lat, r, 12);
        if probes.is_empty() {
            break;
        }
        let cfg = EnsembleConfig { kappa, delta_bad, s, tau, m, ensemble, master_seed: derive_seed(seed, 1) };
        let est = bad_probabilities(space, &lat, &probes, &cfg)?;
        let worst = est.iter().max_by(|a, b| a.p_hat.total_cmp(&b.p_hat)).expect("non-empty probe set");
        tried.push((s, r, worst.p_hat));
        let cal = Calibration { s, r, p_max: worst.p_hat, stderr: worst.stderr, target, exhausted: false, warning: None, tried: Vec::new() };
        if worst.p_hat <= target {
            return Ok(Calibration { tried, ..cal });
        }
        last = Some(cal);
        if s >= 1 << 16 {
            break;
        }
        s *= 2;
    }
    let depth = lat.k_max() - lat.k_min();
    let warning = format!("calibration exhausted: lattice depth {depth} admits no S meeting the target {target}");
    Ok(match last {
        Some(c) => Calibration { exhausted: true, warning: Some(warning), tried, ..c },
        None => Calibration { s: 1, r: scale_gap(kappa, delta_bad, 1), p_max: f64::NAN, stderr: f64::NAN, target, exhausted: true, warning: Some(warning), tried },
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpaceStage {
    pub n: usize,
    pub quasi_metric: QuasiMetricReport,
    pub growth: GrowthReport,
    pub capture: CaptureReport,
    pub regularity: Option<RegularityReport>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatticeStage {
    pub seed: u64,
    pub report: LatticeReport,
    pub transit: Option<TransitReport>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: Scenario,
    pub version: String,
    pub master_seed: u64,
    pub kernel: Option<KernelFile>,
    pub space: Option<SpaceStage>,
    pub lattice: Option<LatticeStage>,
    pub decomposition: Option<PropertiesReport>,
    pub calibration: Option<Calibration>,
    pub certificate: Option<Certificate>,
    pub checks: Vec<CheckResult>,
    pub errors: Vec<String>,
    pub warnings: Vec<String>,
    /// Seconds per stage; only with `timings` set, so reports stay reproducible by default.
    pub timings: Option<BTreeMap<String, f64>>,
    pub pass: bool,
    pub exit_code: i32,
}

impl RunReport {
    fn new(scenario: &Scenario) -> Self {
        Self {
            scenario: scenario.clone(),
            version: env!("CARGO_PKG_VERSION").into(),
            master_seed: scenario.master_seed,
            kernel: None,
            space: None,
            lattice: None,
            decomposition: None,
            calibration: None,
            certificate: None,
            checks: Vec::new(),
            errors: Vec::new(),
            warnings: Vec::new(),
            timings: scenario.timings.then(BTreeMap::new),
            pass: false,
            exit_code: EXIT_CHECK_FAILED,
        }
    }

    fn check(&mut self, name: &str, pass: bool, detail: impl Into<String>) {
        self.checks.push(CheckResult { name: name.into(), pass, detail: detail.into() });
    }

    fn time(&mut self, stage: &str, start: Instant) {
        if let Some(t) = &mut self.timings {
            t.insert(stage.into(), start.elapsed().as_secs_f64());
        }
    }

    fn finish(mut self, exit_code: Option<i32>) -> Self {
        self.pass = exit_code.is_none() && self.errors.is_empty() && self.checks.iter().all(|c| c.pass);
        self.exit_code = match exit_code {
            Some(c) => c,
            None if self.pass => EXIT_PASS,
            None => EXIT_CHECK_FAILED,
        };
        self
    }
}

/// Runs the scenario. Input errors end the run with exit code 2; a failing check or a module
/// error with exit code 1. The report is always returned, possibly partial, and written to
/// `scenario.report` when set.
pub fn run(scenario: &Scenario) -> RunReport {
    let mut report = run_stages(scenario);
    if let Some(path) = &scenario.report {
        if let Err(e) = crate::io::write_json(path, &report) {
            report.errors.push(format!("writing report: {e}"));
            report.pass = false;
            report.exit_code = EXIT_INPUT_ERROR;
        }
    }
    report
}

fn run_stages(scenario: &Scenario) -> RunReport {
    let mut rep = RunReport::new(scenario);
    if let Err(e) = scenario.validate() {
        rep.errors.push(e.to_string());
        return rep.finish(Some(EXIT_INPUT_ERROR));
    }
    let (space, spec) = match scenario.materialize() {
        Ok(v) => v,
        Err(e) => {
            rep.errors.push(e.to_string());
            return rep.finish(Some(EXIT_INPUT_ERROR));
        }
    };
    rep.kernel = Some(KernelFile::from_spec(&spec));

    // verify
    let t = Instant::now();
    let radii = space.sample_radii(scenario.radius_sampling());
    let qm = space.verify_quasi_metric();
    let stage = (|| -> Result<SpaceStage> {
        let growth = space.check_growth_condition(spec.m, &radii)?;
        let capture = space.verify_omega_capture(spec.m, &radii)?;
        let regularity = match scenario.n_dim {
            Some(n) => Some(space.check_ahlfors_regularity(n, &radii, None)?),
            None => None,
        };
        Ok(SpaceStage { n: space.n(), quasi_metric: qm, growth, capture, regularity })
    })();
    rep.time("verify", t);
    let stage = match stage {
        Ok(s) => s,
        Err(e) => {
            rep.errors.push(format!("verify: {e}"));
            return rep.finish(None);
        }
    };
    rep.check("quasi_metric", stage.quasi_metric.ok, format!("{} violations", stage.quasi_metric.n_violations));
    let capture_detail = match &stage.capture.witness {
        Some(w) => format!("ball B({}, {:.6}) with mu above r^m reaches point {} outside omega", space.ids()[w.center], w.radius, space.ids()[w.outside_point]),
        None => format!("{} non-Ahlfors balls, all inside omega", stage.capture.n_non_ahlfors),
    };
    rep.check("omega_capture", stage.capture.ok, capture_detail);
    let early = !stage.quasi_metric.ok || !stage.capture.ok;
    rep.space = Some(stage);
    if early {
        return rep.finish(None);
    }

    // build and classify
    let t = Instant::now();
    let seed = derive_seed(scenario.master_seed, 0);
    let mut lat = match DyadicLattice::build(&space, scenario.kappa, seed, None) {
        Ok(l) => l,
        Err(e) => {
            rep.errors.push(format!("build: {e}"));
            return rep.finish(None);
        }
    };
    let lrep = lat.verify(&space);
    rep.check("lattice", lrep.ok, lrep.witness.clone().unwrap_or_else(|| format!("{} cubes", lrep.n_cubes)));
    let transit = lat.classify_terminal_transit(&space, spec.m);
    rep.time("build", t);
    let lattice_ok = lrep.ok;
    match transit {
        Ok(tr) => rep.lattice = Some(LatticeStage { seed, report: lrep, transit: Some(tr) }),
        Err(e) => {
            rep.lattice = Some(LatticeStage { seed, report: lrep, transit: None });
            rep.errors.push(format!("classify: {e}"));
            return rep.finish(None);
        }
    }
    if !lattice_ok {
        return rep.finish(None);
    }

    // decompose a seeded random function
    let t = Instant::now();
    let mut g = rng(derive_seed(scenario.master_seed, 1));
    let phi: Vec<f64> = (0..space.n()).map(|_| g.gen_range(-1.0..1.0)).collect();
    match properties_check(&space, &lat, &phi) {
        Ok(p) => {
            let scale = crate::util::norm_mu(space.mu(), &phi).powi(2).max(1.0);
            let err = p.max_error();
            rep.check("decomposition", err <= DECOMPOSITION_TOL * scale, format!("max error {err:.3e}"));
            rep.decomposition = Some(p);
        }
        Err(e) => rep.errors.push(format!("decompose: {e}")),
    }
    rep.time("decompose", t);

    // S
    let s = if scenario.calibrate() {
        let t = Instant::now();
        let cal = calibrate_s(&space, scenario.kappa, spec.tau, spec.m, scenario.delta_bad, scenario.calibration_ensemble, derive_seed(scenario.master_seed, 2));
        rep.time("calibrate", t);
        match cal {
            Ok(c) => {
                if let Some(w) = &c.warning {
                    rep.warnings.push(w.clone());
                }
                let s = c.s;
                rep.calibration = Some(c);
                s
            }
            Err(e) => {
                rep.errors.push(format!("calibrate: {e}"));
                return rep.finish(None);
            }
        }
    } else {
        match scenario.s {
            ScaleChoice::Fixed(s) => s,
            ScaleChoice::Named(_) => unreachable!("validated"),
        }
    };

    // certify
    let t = Instant::now();
    match certify(&space, &spec, &scenario.certify_config(s)) {
        Ok(cert) => {
            for l in &cert.lemmas {
                rep.checks.push(CheckResult { name: l.name.clone(), pass: l.pass, detail: format!("{}: measured {:.6e}, bound {:.6e}", l.paper_ref, l.measured, l.bound) });
            }
            rep.certificate = Some(cert);
        }
        Err(e) => rep.errors.push(format!("certify: {e}")),
    }
    rep.time("certify", t);
    rep.finish(None)
}

use clap::{Args, Parser, Subcommand};
use czkit::certify::{certify, probe_cubes, CertifyConfig, T1_DILATIONS};
use czkit::harness::{generate_example, run, ExampleParams, ScaleChoice, Scenario, EXIT_CHECK_FAILED, EXIT_INPUT_ERROR, EXIT_PASS};
use czkit::io::{load_function, load_kernel, load_space, read_json, save_kernel, save_space, write_json, LatticeFile};
use czkit::kernel::{check_size_and_smoothness, check_t1, operator_norm, t1_family, KernelSpec, PointScope, PowerIterOptions};
use czkit::lattice::DyadicLattice;
use czkit::montecarlo::{bad_probabilities, expected_bad_norm, EnsembleConfig};
use czkit::projections::properties_check;
use czkit::space::{MetricMeasureSpace, RadiusSampling, MAX_POINTS};
use czkit::util::{derive_seed, rng};
use rand::Rng;
use serde::Serialize;
use serde_json::json;
use std::path::PathBuf;
use std::process::exit;

#[derive(Parser)]
#[command(name = "czkit", version, about = "Dyadic lattices and certified L2 bounds for singular integrals on finite metric measure spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct SpaceArgs {
    /// Space JSON file.
    #[arg(long, conflicts_with = "example")]
    space: Option<PathBuf>,
    /// Built-in example: line_in_plane, cantor_measure, bergman_disc_model, uniform_grid.
    #[arg(long)]
    example: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    rings: Option<usize>,
    /// Kernel JSON file; defaults to the example's kernel.
    #[arg(long)]
    kernel: Option<PathBuf>,
    /// Override of the kernel exponent `m`.
    #[arg(long)]
    m: Option<f64>,
    /// Accept spaces above the dense limit.
    #[arg(long)]
    allow_large: bool,
}

impl SpaceArgs {
    fn load(&self) -> Result<(MetricMeasureSpace, Option<KernelSpec>), czkit::Error> {
        let (space, default_kernel) = match (&self.space, &self.example) {
            (Some(p), _) => (load_space(p)?, None),
            (None, Some(name)) => {
                let ex = generate_example(name, &ExampleParams { n: self.n, depth: self.depth, rings: self.rings })?;
                (ex.space, Some(ex.kernel))
            }
            (None, None) => return Err(czkit::Error::InvalidInput("either --space or --example is required".into())),
        };
        if space.n() > MAX_POINTS {
            let bytes = space.n() * space.n() * 8 * 3;
            if !self.allow_large {
                return Err(czkit::Error::TooLarge { n: space.n(), limit: MAX_POINTS });
            }
            eprintln!("warning: {} points, dense matrices need about {:.1} MiB", space.n(), bytes as f64 / (1 << 20) as f64);
        }
        let kernel = match &self.kernel {
            Some(p) => Some(load_kernel(p, self.m.or(default_kernel.as_ref().map(|k| k.m)))?),
            None => default_kernel,
        };
        let kernel = kernel.map(|mut k| {
            if let Some(m) = self.m {
                k.m = m;
            }
            k
        });
        Ok((space, kernel))
    }

    fn load_with_kernel(&self) -> Result<(MetricMeasureSpace, KernelSpec), czkit::Error> {
        match self.load()? {
            (s, Some(k)) => Ok((s, k)),
            (_, None) => Err(czkit::Error::InvalidInput("--kernel is required for this space".into())),
        }
    }

    fn growth_m(&self, kernel: Option<&KernelSpec>) -> Result<f64, czkit::Error> {
        self.m.or(kernel.map(|k| k.m)).ok_or_else(|| czkit::Error::InvalidInput("--m is required".into()))
    }
}

#[derive(Args, Clone)]
struct LatticeArgs {
    #[arg(long, default_value_t = 0.5)]
    kappa: f64,
    #[arg(long, default_value_t = 11)]
    seed: u64,
    /// Lattice JSON file, instead of building one.
    #[arg(long)]
    lattice: Option<PathBuf>,
}

impl LatticeArgs {
    fn load(&self, space: &MetricMeasureSpace, m: f64) -> Result<DyadicLattice, czkit::Error> {
        let mut lat = match &self.lattice {
            Some(p) => read_json::<LatticeFile>(p)?.into_lattice(space)?,
            None => DyadicLattice::build(space, self.kappa, self.seed, None)?,
        };
        lat.classify_terminal_transit(space, m)?;
        Ok(lat)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Quasi-metric, growth and capture checks.
    VerifySpace {
        #[command(flatten)]
        space: SpaceArgs,
        /// Dimension of `nu` for the regularity report.
        #[arg(long)]
        n_dim: Option<f64>,
        /// Geometric radius ratio; every distance is sampled when omitted.
        #[arg(long)]
        radius_ratio: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build, verify and classify a random dyadic lattice.
    BuildLattice {
        #[command(flatten)]
        space: SpaceArgs,
        #[command(flatten)]
        lattice: LatticeArgs,
        /// Where to write the lattice JSON.
        #[arg(long)]
        lattice_out: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Martingale decomposition of a function and its algebraic identities.
    Decompose {
        #[command(flatten)]
        space: SpaceArgs,
        #[command(flatten)]
        lattice: LatticeArgs,
        /// Function JSON array; a seeded random function otherwise.
        #[arg(long)]
        function: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Testing constants of the kernel on lattice cubes and their dilations.
    T1Check {
        #[command(flatten)]
        space: SpaceArgs,
        #[command(flatten)]
        lattice: LatticeArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Operator norm by power iteration.
    Norm {
        #[command(flatten)]
        space: SpaceArgs,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 200_000)]
        max_iter: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bad-cube probabilities and the expected bad norm over an ensemble of lattices.
    Montecarlo {
        #[command(flatten)]
        space: SpaceArgs,
        #[command(flatten)]
        lattice: LatticeArgs,
        #[arg(long, default_value_t = 0.25)]
        delta_bad: f64,
        #[arg(long, default_value_t = 1)]
        s: u32,
        #[arg(long, default_value_t = 400)]
        ensemble: usize,
        #[arg(long, default_value_t = 12)]
        probes: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full certificate for the operator norm.
    Certify {
        #[command(flatten)]
        space: SpaceArgs,
        #[arg(long, default_value_t = 0.5)]
        kappa: f64,
        #[arg(long, default_value_t = 11)]
        seed: u64,
        #[arg(long, default_value_t = 0.25)]
        delta_bad: f64,
        #[arg(long, default_value_t = 1)]
        s: u32,
        #[arg(long, default_value_t = 2)]
        pairs: usize,
        #[arg(long, default_value_t = 0)]
        ensemble: usize,
        #[arg(long, default_value_t = 6)]
        probes: usize,
        #[arg(long, default_value_t = 1.4)]
        lambda_bmo: f64,
        #[arg(long, default_value_t = 2.0)]
        k_bmo: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a built-in example space and its kernel to JSON.
    GenerateExample {
        name: String,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long)]
        rings: Option<usize>,
        #[arg(long)]
        space_out: PathBuf,
        #[arg(long)]
        kernel_out: Option<PathBuf>,
    },
    /// Run a scenario file end to end.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        kappa: Option<f64>,
        #[arg(long)]
        delta_bad: Option<f64>,
        /// Integer or "calibrate".
        #[arg(long)]
        s: Option<String>,
        #[arg(long)]
        ensemble: Option<usize>,
        #[arg(long)]
        pairs: Option<usize>,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        timings: bool,
    },
}

fn emit<T: Serialize>(value: &T, out: &Option<PathBuf>) -> Result<(), czkit::Error> {
    match out {
        Some(p) => write_json(p, value),
        None => {
            println!("{}", serde_json::to_string_pretty(value)?);
            Ok(())
        }
    }
}

fn code(pass: bool) -> i32 {
    if pass {
        EXIT_PASS
    } else {
        EXIT_CHECK_FAILED
    }
}

fn execute(cmd: Command) -> Result<i32, czkit::Error> {
    match cmd {
        Command::VerifySpace { space, n_dim, radius_ratio, out } => {
            let (sp, k) = space.load()?;
            let m = space.growth_m(k.as_ref())?;
            let radii = sp.sample_radii(match radius_ratio {
                Some(ratio) => RadiusSampling::Geometric { ratio },
                None => RadiusSampling::Exhaustive,
            });
            let qm = sp.verify_quasi_metric();
            let growth = sp.check_growth_condition(m, &radii)?;
            let capture = sp.verify_omega_capture(m, &radii)?;
            let reg = match n_dim {
                Some(n) => Some(sp.check_ahlfors_regularity(n, &radii, None)?),
                None => None,
            };
            let pass = qm.ok && capture.ok;
            emit(&json!({"n": sp.n(), "m": m, "quasi_metric": qm, "growth": growth, "capture": capture, "regularity": reg, "pass": pass}), &out)?;
            Ok(code(pass))
        }
        Command::BuildLattice { space, lattice, lattice_out, out } => {
            let (sp, k) = space.load()?;
            let m = space.growth_m(k.as_ref())?;
            let mut lat = match &lattice.lattice {
                Some(p) => read_json::<LatticeFile>(p)?.into_lattice(&sp)?,
                None => DyadicLattice::build(&sp, lattice.kappa, lattice.seed, None)?,
            };
            let rep = lat.verify(&sp);
            let transit = lat.classify_terminal_transit(&sp, m)?;
            if let Some(p) = &lattice_out {
                write_json(p, &LatticeFile::from_lattice(&sp, &lat))?;
            }
            emit(&json!({"lattice": rep, "transit": transit}), &out)?;
            Ok(code(rep.ok))
        }
        Command::Decompose { space, lattice, function, out } => {
            let (sp, k) = space.load()?;
            let m = space.growth_m(k.as_ref())?;
            let lat = lattice.load(&sp, m)?;
            let phi = match &function {
                Some(p) => load_function(p, &sp)?,
                None => {
                    let mut g = rng(derive_seed(lattice.seed, 1));
                    (0..sp.n()).map(|_| g.gen_range(-1.0..1.0)).collect()
                }
            };
            let rep = properties_check(&sp, &lat, &phi)?;
            let scale = czkit::util::norm_mu(sp.mu(), &phi).powi(2).max(1.0);
            let pass = rep.max_error() <= czkit::harness::DECOMPOSITION_TOL * scale;
            emit(&json!({"properties": rep, "pass": pass}), &out)?;
            Ok(code(pass))
        }
        Command::T1Check { space, lattice, out } => {
            let (sp, k) = space.load_with_kernel()?;
            let lat = lattice.load(&sp, k.m)?;
            let km = k.evaluate(&sp)?;
            let family = t1_family(&sp, &[&lat], &T1_DILATIONS)?;
            let rep = check_t1(&km, &sp, &family);
            let cz = check_size_and_smoothness(&k, &km, &sp, PointScope::Support);
            let pass = rep.a.is_finite() && cz.pass;
            emit(&json!({"t1": rep, "kernel": cz, "pass": pass}), &out)?;
            Ok(code(pass))
        }
        Command::Norm { space, tol, max_iter, seed, out } => {
            let (sp, k) = space.load_with_kernel()?;
            let km = k.evaluate(&sp)?;
            let est = operator_norm(&km, &sp, PowerIterOptions { tol, max_iter, seed });
            let pass = est.converged;
            emit(&est, &out)?;
            Ok(code(pass))
        }
        Command::Montecarlo { space, lattice, delta_bad, s, ensemble, probes, out } => {
            let (sp, k) = space.load_with_kernel()?;
            let lat = lattice.load(&sp, k.m)?;
            let cfg = EnsembleConfig { kappa: lattice.kappa, delta_bad, s, tau: k.tau, m: k.m, ensemble, master_seed: derive_seed(lattice.seed, 7_777) };
            let cubes = probe_cubes(&lat, probes);
            let bad = bad_probabilities(&sp, &lat, &cubes, &cfg)?;
            let target = delta_bad * delta_bad;
            let mut g = rng(derive_seed(lattice.seed, 2));
            let f: Vec<f64> = (0..sp.n()).map(|_| g.gen_range(-1.0..1.0)).collect();
            let norm = expected_bad_norm(&sp, &lat, &f, &cfg)?;
            let pass = bad.iter().all(|b| b.p_hat <= target + 3.0 * b.stderr) && norm.pass;
            emit(&json!({"r": cfg.params().r, "target": target, "bad_probabilities": bad, "expected_bad_norm": norm, "pass": pass}), &out)?;
            Ok(code(pass))
        }
        Command::Certify { space, kappa, seed, delta_bad, s, pairs, ensemble, probes, lambda_bmo, k_bmo, out } => {
            let (sp, k) = space.load_with_kernel()?;
            let cfg = CertifyConfig { kappa, delta_bad, s, pairs, ensemble, master_seed: seed, n_probes: probes, lambda_bmo, k_bmo, ..CertifyConfig::default() };
            let cert = certify(&sp, &k, &cfg)?;
            emit(&cert, &out)?;
            Ok(code(cert.pass()))
        }
        Command::GenerateExample { name, n, depth, rings, space_out, kernel_out } => {
            let ex = generate_example(&name, &ExampleParams { n, depth, rings })?;
            save_space(&space_out, &ex.space)?;
            if let Some(p) = &kernel_out {
                save_kernel(p, &ex.kernel)?;
            }
            Ok(EXIT_PASS)
        }
        Command::Run { scenario, seed, kappa, delta_bad, s, ensemble, pairs, report, timings } => {
            let mut sc = Scenario::load(&scenario)?;
            if let Some(v) = seed {
                sc.master_seed = v;
            }
            if let Some(v) = kappa {
                sc.kappa = v;
            }
            if let Some(v) = delta_bad {
                sc.delta_bad = v;
            }
            if let Some(v) = s {
                sc.s = match v.parse::<u32>() {
                    Ok(n) => ScaleChoice::Fixed(n),
                    Err(_) => ScaleChoice::Named(v),
                };
            }
            if let Some(v) = ensemble {
                sc.ensemble = v;
            }
            if let Some(v) = pairs {
                sc.pairs = v;
            }
            if report.is_some() {
                sc.report = report;
            }
            sc.timings |= timings;
            let rep = run(&sc);
            for c in &rep.checks {
                eprintln!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            for e in &rep.errors {
                eprintln!("error: {e}");
            }
            if sc.report.is_none() {
                println!("{}", serde_json::to_string_pretty(&rep)?);
            }
            Ok(rep.exit_code)
        }
    }
}

fn main() {
    let cli = Cli::parse();
    let status = match execute(cli.command) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                czkit::Error::InvalidInput(_) | czkit::Error::UnknownExample(_) | czkit::Error::TooLarge { .. } | czkit::Error::Io(_) | czkit::Error::Json(_) => EXIT_INPUT_ERROR,
                _ => EXIT_CHECK_FAILED,
            }
        }
    };
    exit(status);
}

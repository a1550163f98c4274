//! Monte Carlo estimates of the probability that a cube is bad and of the bad part's norm.
//!
//! The Cantor set has gaps wide enough that no cube comes near a foreign skeleton. On the grid
//! the finer cubes always do at the smallest scale gap.

use czkit::certify::probe_cubes;
use czkit::harness::{generate_example, ExampleParams};
use czkit::lattice::DyadicLattice;
use czkit::montecarlo::{bad_probabilities, expected_bad_norm, EnsembleConfig};

fn report(name: &str, params: ExampleParams) -> czkit::Result<()> {
    let ex = generate_example(name, &params)?;
    let space = &ex.space;
    let mut lat = DyadicLattice::build(space, 0.5, 2, None)?;
    lat.classify_terminal_transit(space, ex.m)?;
    let cfg = EnsembleConfig { kappa: 0.5, delta_bad: 0.25, s: 1, tau: ex.kernel.tau, m: ex.m, ensemble: 200, master_seed: 41 };
    println!("{name}: scale gap r = {}, target {}", cfg.params().r, cfg.delta_bad * cfg.delta_bad);
    for b in bad_probabilities(space, &lat, &probe_cubes(&lat, 4), &cfg)? {
        println!("  cube {:>4} (generation {}): p = {:.3} +- {:.3}", b.cube, lat.cube(b.cube).k, b.p_hat, b.stderr);
    }
    let f: Vec<f64> = (0..space.n()).map(|x| if x % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let bad = expected_bad_norm(space, &lat, &f, &cfg)?;
    println!("  E|f_bad| = {:.4} +- {:.4} against delta |f| = {:.4}", bad.mean, bad.stderr, bad.bound);
    Ok(())
}

fn main() -> czkit::Result<()> {
    report("cantor_measure", ExampleParams { depth: Some(6), ..Default::default() })?;
    report("uniform_grid", ExampleParams { n: Some(12), ..Default::default() })
}

//! Martingale decomposition of a function on the Cantor measure.

use czkit::harness::{generate_example, ExampleParams};
use czkit::lattice::DyadicLattice;
use czkit::projections::{decompose, properties_check};

fn main() -> czkit::Result<()> {
    let ex = generate_example("cantor_measure", &ExampleParams { depth: Some(5), ..Default::default() })?;
    let space = &ex.space;
    let mut lat = DyadicLattice::build(space, 0.5, 3, None)?;
    lat.classify_terminal_transit(space, ex.m)?;

    let phi: Vec<f64> = (0..space.n()).map(|x| (x as f64 * 0.37).sin()).collect();
    let dec = decompose(space, &lat, &phi)?;
    let energy: f64 = phi.iter().zip(space.mu()).map(|(v, w)| v * v * w).sum();
    let parts: f64 = dec.lambda * dec.lambda + dec.components.iter().map(|c| c.norm(space).powi(2)).sum::<f64>();
    println!("lambda = {:.6}, {} components", dec.lambda, dec.components.len());
    println!("|phi|^2 = {energy:.12}, sum of parts = {parts:.12}");

    let mut largest: Vec<_> = dec.components.iter().map(|c| (c.norm(space), c.cube)).collect();
    largest.sort_by(|a, b| b.0.total_cmp(&a.0));
    for (norm, cube) in largest.iter().take(3) {
        println!("  cube {cube} (generation {}): |Delta| = {norm:.4}", lat.cube(*cube).k);
    }

    let rep = properties_check(space, &lat, &phi)?;
    println!("reconstruction {:.1e}, orthogonality {:.1e}, zero mean {:.1e}", rep.reconstruction_error, rep.orthogonality_error, rep.zero_mean_error);
    Ok(())
}

//! Random dyadic lattice on the planar grid: verification, terminal cubes and a JSON round trip.

use czkit::harness::{generate_example, ExampleParams};
use czkit::io::LatticeFile;
use czkit::lattice::DyadicLattice;

fn main() -> czkit::Result<()> {
    let ex = generate_example("line_in_plane", &ExampleParams { n: Some(12), ..Default::default() })?;
    let space = &ex.space;
    let mut lat = DyadicLattice::build(space, 0.5, 7, None)?;
    let rep = lat.verify(space);
    println!("generations {}..={}, {} cubes", lat.k_min(), lat.k_max(), lat.cubes().len());
    println!("covering {}, nesting {}, C_diam {:.3}, a0 {:.3}", rep.covering, rep.nesting, rep.c_diam, rep.a0);
    for fit in &rep.small_boundary {
        println!("  small boundary at t = {:.3}: C6 = {:.3}", fit.t, fit.c6);
    }
    let transit = lat.classify_terminal_transit(space, ex.m)?;
    println!("{} terminal and {} transit cubes, transit growth {:.3}", transit.n_terminal, transit.n_transit, transit.transit_growth);

    let file = LatticeFile::from_lattice(space, &lat);
    let json = serde_json::to_string(&file).expect("lattice serializes");
    let back: LatticeFile = serde_json::from_str(&json).expect("lattice parses");
    let again = back.into_lattice(space)?;
    println!("reloaded lattice verifies: {}", again.verify(space).ok);
    Ok(())
}

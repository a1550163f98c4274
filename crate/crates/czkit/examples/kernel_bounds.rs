//! Kernel constants, the testing condition and the operator norm for the disc model.

use czkit::certify::T1_DILATIONS;
use czkit::harness::{generate_example, ExampleParams};
use czkit::kernel::{check_size_and_smoothness, check_t1, operator_norm, t1_family, PointScope, PowerIterOptions};
use czkit::lattice::DyadicLattice;

fn main() -> czkit::Result<()> {
    let ex = generate_example("bergman_disc_model", &ExampleParams { rings: Some(4), ..Default::default() })?;
    let (space, spec) = (&ex.space, &ex.kernel);
    let km = spec.evaluate(space)?;

    let cz = check_size_and_smoothness(spec, &km, space, PointScope::Support);
    println!("size {:.3}, smoothness {:.3}, declared {:.3}", cz.c_size, cz.c_smooth, cz.declared);

    let mut lat = DyadicLattice::build(space, 0.5, 1, None)?;
    lat.classify_terminal_transit(space, spec.m)?;
    let family = t1_family(space, &[&lat], &T1_DILATIONS)?;
    let t1 = check_t1(&km, space, &family);
    println!("testing constant A = {:.4} over {} sets (worst {:?})", t1.a, t1.n_sets, t1.worst_set);

    let norm = operator_norm(&km, space, PowerIterOptions { tol: 1e-10, ..Default::default() });
    println!("operator norm {:.6} after {} iterations, converged {}", norm.value, norm.iterations, norm.converged);
    // the testing constant can never exceed the squared norm
    println!("A <= |T|^2: {}", t1.a <= norm.value * norm.value * (1.0 + 1e-9));
    Ok(())
}

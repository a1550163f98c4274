//! Certified bound for the power kernel on a jittered grid built by hand.

use czkit::certify::{certify, CertifyConfig};
use czkit::kernel::KernelSpec;
use czkit::space::MetricMeasureSpace;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> czkit::Result<()> {
    let mut g = ChaCha8Rng::seed_from_u64(5);
    let side = 7;
    let n = side * side;
    let coords: Vec<Vec<f64>> =
        (0..n).map(|i| vec![(i % side) as f64 + g.gen_range(-0.2..0.2), (i / side) as f64 + g.gen_range(-0.2..0.2)]).collect();
    let mut h = f64::INFINITY;
    for i in 0..n {
        for j in 0..i {
            h = h.min(((coords[i][0] - coords[j][0]).powi(2) + (coords[i][1] - coords[j][1]).powi(2)).sqrt());
        }
    }
    let space = MetricMeasureSpace::euclidean(coords, vec![1.0 / n as f64; n], vec![1.0 / n as f64; n], vec![false; n], h)?;

    let cfg = CertifyConfig { pairs: 2, ensemble: 0, ..CertifyConfig::default() };
    let cert = certify(&space, &KernelSpec::power(2.0), &cfg)?;
    println!("verdict {}: certified {:.3}, measured norm {:.4}", cert.verdict, cert.certified_total, cert.norm.value);
    for lemma in cert.lemmas.iter().filter(|l| !l.pass) {
        println!("  failed {}: {:.3e} > {:.3e}", lemma.name, lemma.measured, lemma.bound);
    }
    for (name, value) in &cert.constants {
        println!("  {name} = {value:.4}");
    }
    Ok(())
}

//! Regrouping of the paraproduct part on spaces where `mu` vanishes at some points and the
//! good parts of the probes can be pure round-off.

mod common;

use common::random_space;
use czkit::certify::{certify, CertifyConfig};
use czkit::kernel::KernelSpec;

#[test]
fn paraproduct_regrouping_holds_with_null_points() {
    let mut transit_pairs = 0;
    for seed in 0..6u64 {
        let space = random_space(100 + seed, 60, 4.0);
        let cfg = CertifyConfig { master_seed: seed, pairs: 1, ensemble: 0, ..CertifyConfig::default() };
        let cert = certify(&space, &KernelSpec::power(2.0), &cfg).unwrap();
        transit_pairs += cert.lattice_pairs.iter().flat_map(|p| &p.halves).map(|h| h.counts.sigma3_transit).sum::<usize>();
        let rg = cert.lemma("paraproduct_regroup").unwrap();
        assert!(rg.pass, "seed {seed}: measured {:e}, bound {:e}", rg.measured, rg.bound);
        assert!(cert.lemma("regrouping").unwrap().pass);
    }
    assert!(transit_pairs > 0);
}

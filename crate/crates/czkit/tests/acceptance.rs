//! Acceptance criteria 1-12 at their pinned tolerances. Every criterion prints one PASS/FAIL
//! line (written to stderr directly, so it shows without `--nocapture`); the test fails if any
//! criterion fails.

mod common;

use common::*;
use czkit::certify::bmo::{pseudo_bmo_check, BmoConfig};
use czkit::certify::block::{block_instances, block_matrix_bound};
use czkit::certify::far::{far_interaction_bound, FarParams};
use czkit::certify::paraproduct::build_paraproduct;
use czkit::certify::schur::{interaction_matrix, schur_constant};
use czkit::certify::{probe_cubes, Certificate};
use czkit::harness::{calibrate_s, generate_example, run, ExampleParams, RunReport, ScaleChoice, Scenario, SpaceSource};
use czkit::kernel::{check_size_and_smoothness, operator_norm, KernelSpec, PointScope, PowerIterOptions};
use czkit::lattice::{alpha, scale_gap, DyadicLattice};
use czkit::montecarlo::{bad_probabilities, expected_bad_norm, EnsembleConfig};
use czkit::projections::{decompose, properties_check};
use czkit::space::MetricMeasureSpace;
use std::io::Write;
use std::time::Instant;

struct Outcome {
    id: usize,
    pass: bool,
    detail: String,
}

fn report(o: &Outcome) {
    let line = format!("{} criterion {:>2}: {}\n", if o.pass { "PASS" } else { "FAIL" }, o.id, o.detail);
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn example(name: &str, params: ExampleParams) -> (MetricMeasureSpace, KernelSpec) {
    let ex = generate_example(name, &params).unwrap();
    (ex.space, ex.kernel)
}

fn classified(space: &MetricMeasureSpace, kappa: f64, seed: u64, m: f64) -> DyadicLattice {
    let mut lat = DyadicLattice::build(space, kappa, seed, None).unwrap();
    lat.classify_terminal_transit(space, m).unwrap();
    lat
}

fn scenario(name: &str, params: ExampleParams, s: ScaleChoice) -> Scenario {
    Scenario { name: name.into(), space: SpaceSource::Example { example: name.into(), params }, s, calibration_ensemble: 400, ..Scenario::default() }
}

fn certificate(rep: &RunReport) -> &Certificate {
    rep.certificate.as_ref().unwrap_or_else(|| panic!("run produced no certificate: {:?}", rep.errors))
}

/// Random (space, lattice, function) triples; every third space gets a disc as `Omega`.
fn triples() -> Vec<(MetricMeasureSpace, DyadicLattice, Vec<f64>)> {
    (0..24u64)
        .map(|i| {
            let n = 24 + (i as usize * 37) % 200;
            let mut space = random_space(1000 + i, n, 4.0);
            if i % 3 == 0 {
                let omega: Vec<bool> = (0..n).map(|x| space.rho(x, 0) < 1.0).collect();
                space = space.with_omega(omega).unwrap();
            }
            let lat = classified(&space, 0.5, 2000 + i, 2.0);
            let phi = random_function(3000 + i, n);
            (space, lat, phi)
        })
        .collect()
}

fn criterion_1(tr: &[(MetricMeasureSpace, DyadicLattice, Vec<f64>)]) -> Outcome {
    let t = Instant::now();
    let (mut worst_rec, mut worst_pyth): (f64, f64) = (0.0, 0.0);
    for (space, lat, phi) in tr {
        let dec = decompose(space, lat, phi).unwrap();
        let rec = dec.reconstruct();
        let sup = phi.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let err = (0..space.n()).filter(|&x| space.mu()[x] > 0.0).map(|x| (rec[x] - phi[x]).abs()).fold(0.0, f64::max);
        worst_rec = worst_rec.max(err / sup);
        let n2 = mu_norm2(space, phi);
        let parts = dec.lambda * dec.lambda + dec.components.iter().map(|c| c.norm(space).powi(2)).sum::<f64>();
        worst_pyth = worst_pyth.max((n2 - parts).abs() / n2);
    }
    let secs = t.elapsed().as_secs_f64();
    Outcome {
        id: 1,
        pass: worst_rec <= 1e-10 && worst_pyth <= 1e-10 && secs < 10.0,
        detail: format!("{} triples, reconstruction {worst_rec:.2e}, norm identity {worst_pyth:.2e}, {secs:.2} s", tr.len()),
    }
}

fn criterion_2(tr: &[(MetricMeasureSpace, DyadicLattice, Vec<f64>)]) -> Outcome {
    let (mut idem, mut orth, mut comp): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for (space, lat, phi) in tr {
        let p = properties_check(space, lat, phi).unwrap();
        let scale = mu_norm2(space, phi).max(1.0);
        idem = idem.max(p.idempotence_error / scale);
        orth = orth.max(p.orthogonality_error / scale);
        comp = comp.max(p.composition_error.max(p.constant_annihilation_error) / scale);
    }
    Outcome {
        id: 2,
        pass: idem <= 1e-10 && orth <= 1e-10 && comp <= 1e-10,
        detail: format!("idempotence {idem:.2e}, mutual orthogonality {orth:.2e}, average-part orthogonality {comp:.2e}"),
    }
}

fn criterion_3(line: &RunReport) -> Outcome {
    let cert = certificate(line);
    let splits: Vec<_> = cert.lattice_pairs.iter().flat_map(|p| p.splits.iter()).collect();
    let worst = splits.iter().map(|s| s.rel_error).fold(0.0, f64::max);
    Outcome { id: 3, pass: !splits.is_empty() && worst <= 1e-9, detail: format!("line_in_plane, {} probe pairs, worst relative error {worst:.2e}", splits.len()) }
}

fn criteria_4_5() -> (Outcome, Outcome, String) {
    let t = Instant::now();
    let (space, spec) = example("cantor_measure", ExampleParams { depth: Some(8), ..Default::default() });
    let (kappa, delta) = (0.5, 0.25);
    let cal = calibrate_s(&space, kappa, spec.tau, spec.m, delta, 400, 41).unwrap();
    let lat = classified(&space, kappa, 43, spec.m);
    let r = scale_gap(kappa, delta, cal.s);
    let cubes: Vec<usize> = probe_cubes(&lat, usize::MAX).into_iter().filter(|&q| lat.cube(q).k >= lat.k_min() + r as i32).take(12).collect();
    // a fresh ensemble, independent of the one used for calibration
    let cfg = EnsembleConfig { kappa, delta_bad: delta, s: cal.s, tau: spec.tau, m: spec.m, ensemble: 400, master_seed: 47 };
    let est = bad_probabilities(&space, &lat, &cubes, &cfg).unwrap();
    let target = delta * delta;
    let worst = est.iter().map(|b| b.p_hat - (target + 3.0 * b.stderr)).fold(f64::NEG_INFINITY, f64::max);
    let p_max = est.iter().map(|b| b.p_hat).fold(0.0, f64::max);
    let secs = t.elapsed().as_secs_f64();
    let c4 = Outcome {
        id: 4,
        pass: !cubes.is_empty() && !cal.exhausted && worst <= 0.0 && secs < 120.0,
        detail: format!("cantor_measure depth 8, calibrated S = {} (r = {r}), {} probe cubes, max p_hat {p_max:.4} vs 1/16 + 3 stderr, {secs:.1} s", cal.s, cubes.len()),
    };
    let mut worst5: f64 = 0.0;
    let mut all = true;
    for i in 0..5 {
        let f = random_function(500 + i, space.n());
        let e = expected_bad_norm(&space, &lat, &f, &cfg).unwrap();
        all &= e.mean <= e.bound + 3.0 * e.stderr;
        worst5 = worst5.max(e.mean / e.norm_f);
    }
    let c5 = Outcome { id: 5, pass: all, detail: format!("5 probe functions, worst E|f_bad| / |f| = {worst5:.4} vs 1/4 + 3 stderr") };
    // the shallow line example cannot reach the target; calibration reports exhaustion
    let (lspace, lspec) = example("line_in_plane", ExampleParams::default());
    let lcal = calibrate_s(&lspace, kappa, lspec.tau, lspec.m, delta, 400, 41).unwrap();
    let llat = classified(&lspace, kappa, 43, lspec.m);
    let lcfg = EnsembleConfig { s: lcal.s, tau: lspec.tau, m: lspec.m, ensemble: 200, ..cfg };
    let lbad = expected_bad_norm(&lspace, &llat, &random_function(500, lspace.n()), &lcfg).unwrap();
    let info = format!(
        "INFO criteria 4-5: line_in_plane calibration exhausted = {}, S = {}, p_max = {:.3}, E|f_bad| / |f| = {:.3}\n",
        lcal.exhausted,
        lcal.s,
        lcal.p_max,
        lbad.mean / lbad.norm_f
    );
    (c4, c5, info)
}

/// Enumerates pairs `(Q, R)` of two independent lattices with `s(Q) <= s(R)` and checks the
/// separated-cube estimate with `phi = Delta_Q v` and `psi = w chi_R`.
fn far_pairs(space: &MetricMeasureSpace, spec: &KernelSpec, seed: u64) -> (usize, usize, usize, f64) {
    let km = spec.evaluate(space).unwrap();
    let cz = check_size_and_smoothness(spec, &km, space, PointScope::Support);
    let p = FarParams { c_cz: cz.declared.max(cz.c_size).max(cz.c_smooth), m: spec.m, tau: spec.tau, delta_cz: spec.delta_cz, alpha: alpha(spec.tau, spec.m) };
    let d1 = classified(space, 0.5, seed, spec.m);
    let d2 = classified(space, 0.5, seed + 1, spec.m);
    let v = random_function(seed + 2, space.n());
    let w = random_function(seed + 3, space.n());
    let dec = decompose(space, &d1, &v).unwrap();
    let (mut checked, mut admissible, mut failed, mut worst) = (0, 0, 0, 0.0f64);
    for comp in &dec.components {
        let q = comp.cube;
        let phi: Vec<(usize, f64)> = comp.support.iter().cloned().zip(comp.values.iter().cloned()).collect();
        for cr in d2.cubes() {
            if !cr.is_transit() || d2.size(cr.id) < d1.size(q) {
                continue;
            }
            let psi: Vec<(usize, f64)> = cr.members.iter().map(|&y| (y, w[y])).collect();
            let c = far_interaction_bound(space, &km, &d1, q, &d2, cr.id, &phi, &psi, p);
            checked += 1;
            if c.admissible {
                admissible += 1;
                worst = worst.max(c.measured / c.bound);
                if !c.pass {
                    failed += 1;
                }
            }
        }
    }
    (checked, admissible, failed, worst)
}

fn criterion_6() -> Outcome {
    let (line, _) = example("line_in_plane", ExampleParams::default());
    let line = line.with_omega(vec![false; line.n()]).unwrap();
    let (cantor, _) = example("cantor_measure", ExampleParams { depth: Some(7), ..Default::default() });
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, space, m) in [("line_in_plane", &line, 1.0), ("cantor_measure", &cantor, 2f64.ln() / 3f64.ln())] {
        for seed in [61u64, 71] {
            let (checked, adm, failed, worst) = far_pairs(space, &KernelSpec::power(m), seed);
            pass &= adm > 0 && failed == 0;
            parts.push(format!("{name}/{seed}: {failed} of {adm} admissible failed ({checked} pairs, worst ratio {worst:.3})"));
        }
    }
    Outcome { id: 6, pass, detail: format!("power kernel, constant C_CZ 3^(m+tau): {}", parts.join("; ")) }
}

fn criterion_7() -> Outcome {
    let (mut instances, mut failed, mut worst) = (0, 0, 0.0f64);
    for i in 0..64u64 {
        let space = random_space(7000 + i, 16 + (i as usize * 13) % 40, 3.0);
        let d1 = classified(&space, 0.5, 7100 + i, 2.0);
        let d2 = classified(&space, 0.5, 7200 + i, 2.0);
        let strict = i % 2 == 0;
        let mat = interaction_matrix(&space, &d1, &d2, 2.0, 1.0, strict).unwrap();
        if mat.rows.len() > 200 || mat.cols.len() > 200 || mat.rows.is_empty() || mat.cols.is_empty() {
            continue;
        }
        let sc = schur_constant(&space, &d1, &d2, 2.0, 1.0, strict).unwrap();
        let norm = jacobi_spectral_norm(&mat.entries, mat.rows.len(), mat.cols.len());
        instances += 1;
        worst = worst.max(norm / sc.total);
        if norm > sc.total * (1.0 + 1e-12) {
            failed += 1;
        }
    }
    Outcome { id: 7, pass: instances >= 50 && failed == 0, detail: format!("{instances} interaction matrices, {failed} failures, worst spectral norm / Schur bound {worst:.4}") }
}

/// Nested pairs `(Q, R)`: transit `Q` inside a transit child of a transit `R`, `k(R) < k(Q)`.
fn nested_pairs(d1: &DyadicLattice, d2: &DyadicLattice) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for cq in d1.cubes().iter().filter(|c| c.is_transit()) {
        for cr in d2.cubes().iter().filter(|c| c.is_transit() && c.k < cq.k) {
            if let Some(&ch) = cr.children.iter().find(|&&ch| cq.members.iter().all(|&x| d2.cube(ch).contains(x))) {
                if d2.cube(ch).is_transit() {
                    out.push((cq.id, cr.id));
                }
            }
        }
    }
    out
}

fn criterion_8() -> Outcome {
    let (mut n_inst, mut n_small, mut failed, mut worst) = (0, 0, 0, 0.0f64);
    for i in 0..30u64 {
        let space = random_space(8000 + i, 40 + (i as usize * 17) % 120, 3.0);
        let d1 = classified(&space, 0.5, 8100 + i, 2.0);
        let d2 = classified(&space, 0.5, 8200 + i, 2.0);
        let tau = [1.0, 0.5, 0.25][i as usize % 3];
        let insts = block_instances(&space, &d1, &d2, &nested_pairs(&d1, &d2), tau).unwrap();
        for (j, inst) in insts.iter().enumerate() {
            n_inst += 1;
            let a = random_function(8300 + 100 * i + j as u64, inst.rows.len());
            let b = random_function(8400 + 100 * i + j as u64, inst.cols.len());
            let chk = block_matrix_bound(inst, &a, &b, 0);
            let mut ok = chk.pass;
            if inst.rows.len() + inst.cols.len() <= 100 {
                n_small += 1;
                let norm = jacobi_spectral_norm(&inst.dense(), inst.rows.len(), inst.cols.len());
                worst = worst.max(norm / inst.constant());
                ok &= norm <= inst.constant() * (1.0 + 1e-12);
            }
            if !ok {
                failed += 1;
            }
        }
    }
    Outcome {
        id: 8,
        pass: n_inst > 0 && n_small > 0 && failed == 0,
        detail: format!("{n_inst} block instances ({n_small} with a dense check), {failed} failures, worst norm / (1 - kappa^(tau/2))^-1 {worst:.4}"),
    }
}

fn criterion_9(line: &RunReport, cantor: &RunReport) -> Outcome {
    // identity on the line example, built directly over all transit difference cubes
    let (space, spec) = example("line_in_plane", ExampleParams::default());
    let km = spec.evaluate(&space).unwrap();
    let d1 = classified(&space, 0.5, 91, spec.m);
    let d2 = classified(&space, 0.5, 92, spec.m);
    let f = km.adjoint_apply(&space, &vec![1.0; space.n()]);
    let use_cube = vec![true; d1.cubes().len()];
    let para = build_paraproduct(&space, &d1, &d2, &use_cube, &f, 2).unwrap();
    let mut worst_id: f64 = 0.0;
    for i in 0..8 {
        let g = random_function(900 + i, space.n());
        let (l, r) = para.norm_identity(&space, &d2, &g);
        worst_id = worst_id.max((l - r).abs() / l.max(r));
    }
    // Carleson constant against the Whitney multiplicity times the fitted pseudo-BMO constant,
    // as assembled inside the certificates
    let mut parts = Vec::new();
    let mut carl_ok = true;
    for (name, rep) in [("line_in_plane", line), ("cantor_measure", cantor)] {
        let l = certificate(rep).lemma("carleson_vs_bmo").expect("carleson entry");
        carl_ok &= l.pass && l.measured.is_finite();
        parts.push(format!("{name} Carleson {:.3e} <= {:.3e}", l.measured, l.bound));
    }
    Outcome {
        id: 9,
        pass: !para.terms.is_empty() && worst_id <= 1e-10 && carl_ok,
        detail: format!("{} paraproduct terms, identity error {worst_id:.2e}; {}", para.terms.len(), parts.join(", ")),
    }
}

fn criterion_10(bergman: &RunReport) -> Outcome {
    let cert = certificate(bergman);
    let mut parts = Vec::new();
    let mut pass = true;
    for p in &cert.lattice_pairs {
        for h in &p.halves {
            let b = &h.bmo;
            pass &= b.n_admissible > 0 && b.n_failed == 0;
            parts.push(format!("{}/{}", b.n_admissible - b.n_failed, b.n_admissible));
        }
    }
    // the same check recomputed outside the certificate, on a fresh lattice
    let (space, spec) = example("bergman_disc_model", ExampleParams::default());
    let km = spec.evaluate(&space).unwrap();
    let kt = km.transpose();
    let lat = classified(&space, 0.5, 101, spec.m);
    let f = kt.apply(&space, &vec![1.0; space.n()]);
    let a = cert.constants["A"];
    let c_cz = cert.constants["C_CZ"];
    let cfg = BmoConfig { lambda: 1.4, k_adm: 2.0, c_cz, m: spec.m, tau: spec.tau, a_t1: a };
    let rep = pseudo_bmo_check(&space, &kt, &lat, &f, cfg).unwrap();
    pass &= rep.n_admissible > 0 && rep.n_failed == 0;
    Outcome {
        id: 10,
        pass,
        detail: format!("bergman_disc_model, admissible cubes passing per half {}; fresh lattice {}/{} (tail bound {:.1})", parts.join(" "), rep.n_admissible - rep.n_failed, rep.n_admissible, rep.tail_bound),
    }
}

fn criterion_11(runs: &[(&str, &RunReport)]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, rep) in runs {
        let hyp = rep.checks.iter().filter(|c| ["quasi_metric", "omega_capture", "lattice", "decomposition"].contains(&c.name.as_str())).all(|c| c.pass);
        if !hyp {
            parts.push(format!("{name} skipped (hypotheses fail)"));
            continue;
        }
        let cert = certificate(rep);
        let (space, spec) = rep.scenario.materialize().unwrap();
        let dense = dense_operator_norm(&space, &spec.evaluate(&space).unwrap());
        let diff = (cert.empirical_norm - dense).abs();
        let ok = cert.norm.converged && diff <= 1e-6 * dense.max(1.0) && cert.empirical_norm <= cert.certified_total;
        pass &= ok;
        parts.push(format!("{name} {:.6} (dense {dense:.6}) <= {:.3}", cert.empirical_norm, cert.certified_total));
    }
    let (space, _) = example("uniform_grid", ExampleParams::default());
    let km = KernelSpec::constant(1.0, 2.0).evaluate(&space).unwrap();
    let avg = operator_norm(&km, &space, PowerIterOptions { tol: 1e-8, ..Default::default() }).value;
    pass &= (avg - 1.0).abs() <= 1e-8;
    Outcome { id: 11, pass, detail: format!("{}; averaging kernel {avg:.12}", parts.join("; ")) }
}

fn criterion_12() -> Outcome {
    let mut cases: Vec<(String, MetricMeasureSpace, KernelSpec)> = Vec::new();
    for name in ["line_in_plane", "cantor_measure", "bergman_disc_model", "uniform_grid"] {
        let (s, k) = example(name, ExampleParams::default());
        cases.push((name.into(), s.clone(), k));
        cases.push((format!("{name}/constant"), s, KernelSpec::constant(1.0, 1.0)));
    }
    let (mut n, mut worst) = (0usize, f64::NEG_INFINITY);
    for (_, space, spec) in &cases {
        let km = spec.evaluate(space).unwrap();
        let norm = operator_norm(&km, space, PowerIterOptions::default()).value;
        for seed in [121u64, 122] {
            let lat = classified(space, 0.5, seed, spec.m);
            for c in lat.cubes() {
                let mq = space.mu_of(&c.members);
                for v in [km.apply_indicator(space, &c.members), km.adjoint_apply_indicator(space, &c.members)] {
                    n += 1;
                    worst = worst.max(mu_norm2(space, &v) - norm * norm * mq);
                }
            }
        }
    }
    Outcome { id: 12, pass: worst <= 1e-9, detail: format!("{n} cube tests over {} kernels, worst |T chi_Q|^2 - |T|^2 mu(Q) = {worst:.2e}", cases.len()) }
}

#[test]
fn acceptance_criteria() {
    let tr = triples();
    let line = run(&scenario("line_in_plane", ExampleParams::default(), ScaleChoice::Named("calibrate".into())));
    let cantor = run(&scenario("cantor_measure", ExampleParams { depth: Some(7), ..Default::default() }, ScaleChoice::Named("calibrate".into())));
    let bergman = run(&scenario("bergman_disc_model", ExampleParams::default(), ScaleChoice::Fixed(1)));
    let grid = run(&scenario("uniform_grid", ExampleParams::default(), ScaleChoice::Fixed(1)));

    // start below the harness's own "test ... " line
    let _ = std::io::stderr().write_all(b"\n");
    let mut out = Vec::new();
    let mut emit = |o: Outcome| {
        report(&o);
        out.push(o);
    };
    emit(criterion_1(&tr));
    emit(criterion_2(&tr));
    emit(criterion_3(&line));
    let (c4, c5, info) = criteria_4_5();
    emit(c4);
    emit(c5);
    let _ = std::io::stderr().write_all(info.as_bytes());
    emit(criterion_6());
    emit(criterion_7());
    emit(criterion_8());
    emit(criterion_9(&line, &cantor));
    emit(criterion_10(&bergman));
    emit(criterion_11(&[("line_in_plane", &line), ("cantor_measure", &cantor), ("bergman_disc_model", &bergman), ("uniform_grid", &grid)]));
    emit(criterion_12());

    let failed: Vec<usize> = out.iter().filter(|o| !o.pass).map(|o| o.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

//! Builds a small space from an explicit distance matrix and runs the geometric checks.
//!
//! The metric is the snowflake `|x - y|^(1/2)` of six points on a line, which is a metric; the
//! square `|x - y|^2` is only a quasi-metric and the check reports the worst triple.

use czkit::io::{MetricFile, SpaceFile};
use czkit::space::RadiusSampling;

fn space(power: f64, quasi_const: f64) -> czkit::Result<czkit::space::MetricMeasureSpace> {
    let xs = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
    let matrix = xs.iter().map(|a| xs.iter().map(|b| f64::abs(a - b).powf(power)).collect()).collect();
    SpaceFile {
        points: (0..6).collect(),
        metric: MetricFile::Explicit { matrix },
        nu: vec![1.0; 6],
        mu: vec![1.0 / 6.0; 6],
        omega: vec![],
        quasi_const,
        resolution_h: 1.0,
    }
    .into_space()
}

fn main() -> czkit::Result<()> {
    let snow = space(0.5, 1.0)?;
    let qm = snow.verify_quasi_metric();
    println!("snowflake: metric ok = {}, violations = {}", qm.ok, qm.n_violations);

    // with K = 1 the squared distance breaks the triangle inequality
    let square = space(2.0, 1.0)?;
    let qm = square.verify_quasi_metric();
    println!("squared with K = 1: ok = {}, worst = {:?}", qm.ok, qm.worst);
    let square = space(2.0, 2.0)?;
    println!("squared with K = 2: ok = {}", square.verify_quasi_metric().ok);

    let radii = snow.sample_radii(RadiusSampling::Exhaustive);
    let growth = snow.check_growth_condition(2.0, &radii)?;
    println!("growth of order 2: C_h = {:.3}, {} balls not Ahlfors", growth.c_h, growth.non_ahlfors.len());
    let capture = snow.verify_omega_capture(2.0, &radii)?;
    println!("capture by an empty Omega: {}", if capture.ok { "ok" } else { "fails" });
    if let Some(w) = capture.witness {
        println!("  ball B({}, {:.3}) reaches {} outside Omega", w.center, w.radius, w.outside_point);
    }
    let reg = snow.check_ahlfors_regularity(2.0, &radii, None)?;
    println!("regularity of nu in dimension 2: C1 = {:.3}, C2 = {:.3}, doubling {:.3}", reg.c1, reg.c2, reg.c_doub);
    Ok(())
}

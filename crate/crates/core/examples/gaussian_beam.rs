//! Propagates a Gaussian beam with the Fresnel transfer function and compares
//! its second-moment radius against `w(z) = w0·sqrt(1 + (z/zR)²)`.

use std::f64::consts::PI;

use emwavenet::field::ComplexField;
use emwavenet::propagation::{make_transfer_fresnel, propagate};
use num_complex::Complex64;

fn radius(u: &ComplexField) -> f64 {
    let n = u.n();
    let c = (n / 2) as f64;
    let (mut m2, mut e) = (0.0, 0.0);
    for r in 0..n {
        for col in 0..n {
            let p = u[(r, col)].norm_sqr();
            let (y, x) = ((r as f64 - c) * u.dx(), (col as f64 - c) * u.dx());
            m2 += (x * x + y * y) * p;
            e += p;
        }
    }
    (2.0 * m2 / e).sqrt()
}

fn main() -> emwavenet::Result<()> {
    let (n, dx, lambda, w0) = (512, 0.01, 0.03, 0.1);
    let z_r = PI * w0 * w0 / lambda;
    let c = (n / 2) as f64;
    let beam = ComplexField::from_fn(n, dx, |r, col| {
        let (y, x) = ((r as f64 - c) * dx, (col as f64 - c) * dx);
        Complex64::new((-(x * x + y * y) / (w0 * w0)).exp(), 0.0)
    })?;
    println!("w0 = {w0} m, zR = {z_r:.4} m");
    println!("{:>8} {:>10} {:>10} {:>9}", "z/zR", "measured", "analytic", "rel err");
    for frac in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let z = frac * z_r;
        let out = propagate(&beam, &make_transfer_fresnel(n, dx, lambda, z)?)?;
        let w = radius(&out);
        let expect = w0 * (1.0 + (z / z_r).powi(2)).sqrt();
        println!("{frac:>8.2} {w:>10.6} {expect:>10.6} {:>9.2e}", (w - expect).abs() / expect);
    }
    Ok(())
}

//! Fresnel versus exact angular-spectrum kernels: evanescent bins, agreement
//! in the paraxial regime, and one point source against the direct
//! Rayleigh-Sommerfeld kernel.

use emwavenet::field::ComplexField;
use emwavenet::network::NetConfig;
use emwavenet::propagation::{make_transfer_exact, make_transfer_fresnel, propagate, rs_kernel};
use num_complex::Complex64;

fn main() -> emwavenet::Result<()> {
    let m = NetConfig::mstar();
    let exact = make_transfer_exact(m.n, m.dx, m.lambda, m.d)?;
    let dead = exact.as_slice().iter().filter(|h| h.norm() == 0.0).count();
    println!(
        "MSTAR grid (dx = {} m, lambda = {} m): {dead} of {} bins evanescent",
        m.dx,
        m.lambda,
        m.n * m.n
    );

    let (n, dx, lambda, d) = (128, 0.01, 0.03, 0.5);
    let c = (n / 2) as f64;
    let blob = ComplexField::from_fn(n, dx, |r, col| {
        let rr = ((r as f64 - c).powi(2) + (col as f64 - c).powi(2)) / 64.0;
        Complex64::new((-rr).exp(), 0.0)
    })?;
    let a = propagate(&blob, &make_transfer_fresnel(n, dx, lambda, d)?)?;
    let b = propagate(&blob, &make_transfer_exact(n, dx, lambda, d)?)?;
    println!("smooth blob over {d} m: Fresnel vs exact rel L2 {:.3e}", a.rel_l2_diff(&b));

    let rs = rs_kernel(64, 0.45, 1.0, 4.0)?;
    println!(
        "RS kernel at z = 4 (lambda = 1): on-axis {:.4e}, edge {:.4e}",
        rs[(32, 32)].norm(),
        rs[(32, 0)].norm()
    );
    Ok(())
}

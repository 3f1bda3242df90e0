//! Free-space propagation by the angular spectrum method.
//!
//! A field is carried a distance `d` by multiplying its 2-D spectrum with a
//! transfer function `H(fx, fy)` and transforming back. Two kernels are
//! provided:
//!
//! * [`KernelKind::Fresnel`]: `H = exp[j k d (1 − λ²(fx² + fy²)/2)]`, pure
//!   phase on every bin. This is the kernel the network trains with.
//! * [`KernelKind::Exact`]: `H = exp[j k d √(1 − (λfx)² − (λfy)²)]` on the
//!   propagating disk, hard zero on evanescent bins.
//!
//! [`rs_kernel`] samples the first Rayleigh–Sommerfeld impulse response in
//! the spatial domain. It is used only to cross-check the exact kernel.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{fft2_in_place, freq_grid, ifft2_in_place, ComplexField};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    #[default]
    Fresnel,
    Exact,
}

impl KernelKind {
    pub(crate) fn code(self) -> u8 {
        match self {
            KernelKind::Fresnel => 0,
            KernelKind::Exact => 1,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(KernelKind::Fresnel),
            1 => Some(KernelKind::Exact),
            _ => None,
        }
    }
}

/// Sampled `H(fx, fy)` over the DFT frequency ordering of an `n × n` grid.
#[derive(Clone, Debug, PartialEq)]
pub struct TransferFunction {
    h: Vec<Complex64>,
    n: usize,
    dx: f64,
    kind: KernelKind,
    d: f64,
    lambda: f64,
}

/// Shared validation for every kernel constructor, including the sampling
/// rule `dx < λ/2`.
pub fn check_sampling(dx: f64, lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Config(format!("wavelength must be positive, got {lambda}")));
    }
    if !(dx < lambda / 2.0) {
        return Err(Error::Nyquist {
            dx,
            half: lambda / 2.0,
        });
    }
    Ok(())
}

impl TransferFunction {
    pub fn new(kind: KernelKind, n: usize, dx: f64, lambda: f64, d: f64) -> Result<Self> {
        match kind {
            KernelKind::Fresnel => make_transfer_fresnel(n, dx, lambda, d),
            KernelKind::Exact => make_transfer_exact(n, dx, lambda, d),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn dx(&self) -> f64 {
        self.dx
    }
    pub fn kind(&self) -> KernelKind {
        self.kind
    }
    pub fn distance(&self) -> f64 {
        self.d
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn as_slice(&self) -> &[Complex64] {
        &self.h
    }

    /// Elementwise product of two kernels on the same grid, i.e. propagating
    /// through both in sequence.
    pub fn compose(&self, other: &TransferFunction) -> Result<TransferFunction> {
        if other.n != self.n {
            return Err(Error::Shape {
                expected: self.n,
                actual: other.n,
                context: "compose transfer functions",
            });
        }
        Ok(TransferFunction {
            h: self.h.iter().zip(&other.h).map(|(a, b)| a * b).collect(),
            d: self.d + other.d,
            ..self.clone()
        })
    }

    /// Propagates a row-major buffer in place; `adjoint` multiplies by `conj(H)`.
    pub(crate) fn apply_in_place(&self, data: &mut [Complex64], adjoint: bool) {
        debug_assert_eq!(data.len(), self.n * self.n);
        fft2_in_place(data, self.n);
        if adjoint {
            for (z, h) in data.iter_mut().zip(&self.h) {
                *z *= h.conj();
            }
        } else {
            for (z, h) in data.iter_mut().zip(&self.h) {
                *z *= h;
            }
        }
        ifft2_in_place(data, self.n);
    }
}

fn build(
    kind: KernelKind,
    n: usize,
    dx: f64,
    lambda: f64,
    d: f64,
    phase_of: impl Fn(f64) -> Option<f64>,
) -> Result<TransferFunction> {
    check_sampling(dx, lambda)?;
    if !d.is_finite() {
        return Err(Error::Config(format!("propagation distance must be finite, got {d}")));
    }
    let grid = freq_grid(n, dx)?;
    let mut h = Vec::with_capacity(n * n);
    for row in 0..n {
        for col in 0..n {
            h.push(match phase_of(grid.radial_sq(row, col)) {
                Some(phase) => Complex64::from_polar(1.0, phase),
                None => Complex64::new(0.0, 0.0),
            });
        }
    }
    Ok(TransferFunction {
        h,
        n,
        dx,
        kind,
        d,
        lambda,
    })
}

/// Paraxial (Fresnel) transfer function. `d` may be negative.
pub fn make_transfer_fresnel(n: usize, dx: f64, lambda: f64, d: f64) -> Result<TransferFunction> {
    let k = 2.0 * PI / lambda;
    // k·d − π·λ·d·(fx² + fy²)
    build(KernelKind::Fresnel, n, dx, lambda, d, |f2| {
        Some(k * d - PI * lambda * d * f2)
    })
}

/// Exact angular-spectrum transfer function with a hard evanescent cutoff.
pub fn make_transfer_exact(n: usize, dx: f64, lambda: f64, d: f64) -> Result<TransferFunction> {
    let k = 2.0 * PI / lambda;
    let l2 = lambda * lambda;
    build(KernelKind::Exact, n, dx, lambda, d, |f2| {
        let arg = 1.0 - l2 * f2;
        (arg >= 0.0).then(|| k * arg.sqrt() * d)
    })
}

fn check_kernel_shape(u: &ComplexField, h: &TransferFunction) -> Result<()> {
    if u.n() != h.n {
        return Err(Error::Shape {
            expected: h.n,
            actual: u.n(),
            context: "field vs transfer function",
        });
    }
    Ok(())
}

/// `ifft2(fft2(u) ∘ h)`.
pub fn propagate(u: &ComplexField, h: &TransferFunction) -> Result<ComplexField> {
    check_kernel_shape(u, h)?;
    u.check_finite("propagate input")?;
    let mut out = u.clone();
    h.apply_in_place(out.as_mut_slice(), false);
    Ok(out)
}

/// `ifft2(fft2(g) ∘ conj(h))`, the adjoint of [`propagate`].
pub fn adjoint_propagate(g: &ComplexField, h: &TransferFunction) -> Result<ComplexField> {
    check_kernel_shape(g, h)?;
    g.check_finite("adjoint_propagate input")?;
    let mut out = g.clone();
    h.apply_in_place(out.as_mut_slice(), true);
    Ok(out)
}

/// First Rayleigh–Sommerfeld impulse response sampled at pixel centers.
///
/// Pixel `(row, col)` sits at `x = (col − n/2)·dx`, `y = (row − n/2)·dx`, so
/// the optical axis passes through pixel `(n/2, n/2)`. The returned samples
/// are the continuous kernel values; multiply by `dx²` to use them as a
/// discrete convolution kernel.
pub fn rs_kernel(n: usize, dx: f64, lambda: f64, z: f64) -> Result<ComplexField> {
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::Invalid(format!(
            "Rayleigh-Sommerfeld kernel needs z > 0, got {z}"
        )));
    }
    if !(lambda > 0.0) {
        return Err(Error::Config(format!("wavelength must be positive, got {lambda}")));
    }
    let half = (n / 2) as f64;
    let j = Complex64::new(0.0, 1.0);
    ComplexField::from_fn(n, dx, |row, col| {
        let x = (col as f64 - half) * dx;
        let y = (row as f64 - half) * dx;
        rs_point(x, y, z, lambda, j)
    })
}

#[inline]
pub(crate) fn rs_point(x: f64, y: f64, z: f64, lambda: f64, j: Complex64) -> Complex64 {
    let r = (x * x + y * y + z * z).sqrt();
    let amplitude = Complex64::new(1.0 / (2.0 * PI * r), 0.0) + 1.0 / (j * lambda);
    amplitude * (z / (r * r)) * Complex64::from_polar(1.0, 2.0 * PI * r / lambda)
}

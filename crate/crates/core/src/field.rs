//! Square complex sample grids, the 2-D DFT pair and energy bookkeeping.
//!
//! Storage is row-major: sample `(row, col)` lives at `row * n + col`, with
//! rows along `y` and columns along `x`. The forward transform is
//! unnormalized and the inverse carries the `1/n²` factor, so
//! `Σ|u|² = Σ|û|² / n²`.

use std::cell::RefCell;
use std::ops::{Index, IndexMut};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// The wavefield on one transverse plane.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField {
    data: Vec<Complex64>,
    n: usize,
    dx: f64,
}

fn check_grid(n: usize, dx: f64) -> Result<()> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::Grid(format!("grid size must be even and >= 2, got {n}")));
    }
    if !(dx > 0.0 && dx.is_finite()) {
        return Err(Error::Grid(format!("pixel pitch must be positive, got {dx}")));
    }
    Ok(())
}

impl ComplexField {
    /// Builds a field from row-major samples. Rejects odd or tiny grids,
    /// non-positive pitch, a sample count other than `n²` and non-finite values.
    pub fn new(n: usize, dx: f64, data: Vec<Complex64>) -> Result<Self> {
        check_grid(n, dx)?;
        if data.len() != n * n {
            return Err(Error::Grid(format!(
                "expected {} samples for a {n}x{n} grid, got {}",
                n * n,
                data.len()
            )));
        }
        let field = Self { data, n, dx };
        field.check_finite("ComplexField::new")?;
        Ok(field)
    }

    /// Builds a field from a rectangular array of rows; non-square input is rejected.
    pub fn from_rows(rows: &[Vec<Complex64>], dx: f64) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::Grid(format!(
                "only square grids are supported, got {n} rows of width {}",
                bad.len()
            )));
        }
        Self::new(n, dx, rows.concat())
    }

    pub fn zeros(n: usize, dx: f64) -> Result<Self> {
        check_grid(n, dx)?;
        Ok(Self {
            data: vec![Complex64::new(0.0, 0.0); n * n],
            n,
            dx,
        })
    }

    /// Fills the grid from `f(row, col)`.
    pub fn from_fn(n: usize, dx: f64, mut f: impl FnMut(usize, usize) -> Complex64) -> Result<Self> {
        check_grid(n, dx)?;
        let mut data = Vec::with_capacity(n * n);
        for r in 0..n {
            for c in 0..n {
                data.push(f(r, c));
            }
        }
        Self::new(n, dx, data)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        self.dx
    }

    #[inline]
    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    /// Mutable access to the samples. Callers must keep every sample finite.
    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    pub fn check_finite(&self, context: &'static str) -> Result<()> {
        match self.data.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            Some(index) => Err(Error::NonFinite { index, context }),
            None => Ok(()),
        }
    }

    pub(crate) fn check_same_n(&self, other_n: usize, context: &'static str) -> Result<()> {
        if self.n != other_n {
            return Err(Error::Shape {
                expected: other_n,
                actual: self.n,
                context,
            });
        }
        Ok(())
    }

    /// Σ|u|² over all pixels.
    pub fn total_energy(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Complex inner product `Σ a · conj(b)`.
    pub fn inner(&self, other: &ComplexField) -> Result<Complex64> {
        other.check_same_n(self.n, "inner product")?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b.conj())
            .sum())
    }

    pub fn scaled(&self, alpha: Complex64) -> ComplexField {
        self.map(|z| z * alpha)
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> ComplexField {
        ComplexField {
            data: self.data.iter().map(|&z| f(z)).collect(),
            n: self.n,
            dx: self.dx,
        }
    }

    /// `self + alpha * other`, in place.
    pub fn add_scaled(&mut self, alpha: Complex64, other: &ComplexField) -> Result<()> {
        other.check_same_n(self.n, "add_scaled")?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
        Ok(())
    }

    /// Largest elementwise `|a - b|`.
    pub fn max_abs_diff(&self, other: &ComplexField) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `‖a − b‖₂ / ‖b‖₂`, with `other` as the reference.
    pub fn rel_l2_diff(&self, other: &ComplexField) -> f64 {
        let num: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        let den = other.total_energy();
        if den == 0.0 {
            num.sqrt()
        } else {
            (num / den).sqrt()
        }
    }
}

impl Index<(usize, usize)> for ComplexField {
    type Output = Complex64;
    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.data[r * self.n + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexField {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.data[r * self.n + c]
    }
}

/// Spatial-frequency axes in DFT output order (cycles/meter).
#[derive(Clone, Debug, PartialEq)]
pub struct FreqGrid {
    pub fx: Vec<f64>,
    pub fy: Vec<f64>,
}

impl FreqGrid {
    /// `fx[i]² + fy[j]²` for the bin at `(row=j, col=i)`.
    #[inline]
    pub fn radial_sq(&self, row: usize, col: usize) -> f64 {
        self.fx[col] * self.fx[col] + self.fy[row] * self.fy[row]
    }
}

pub fn freq_grid(n: usize, dx: f64) -> Result<FreqGrid> {
    check_grid(n, dx)?;
    let span = n as f64 * dx;
    let fx: Vec<f64> = (0..n)
        .map(|i| {
            let k = if i < n / 2 { i as f64 } else { i as f64 - n as f64 };
            k / span
        })
        .collect();
    Ok(FreqGrid { fy: fx.clone(), fx })
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plans(n: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        (p.plan_fft_forward(n), p.plan_fft_inverse(n))
    })
}

fn transpose_in_place(data: &mut [Complex64], n: usize) {
    for r in 0..n {
        for c in (r + 1)..n {
            data.swap(r * n + c, c * n + r);
        }
    }
}

/// Unnormalized 2-D transform over a row-major `n × n` buffer, in place.
fn transform_2d(data: &mut [Complex64], n: usize, inverse: bool) {
    let (fwd, inv) = plans(n);
    let plan = if inverse { inv } else { fwd };
    let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
    plan.process_with_scratch(data, &mut scratch);
    transpose_in_place(data, n);
    plan.process_with_scratch(data, &mut scratch);
    transpose_in_place(data, n);
}

pub(crate) fn fft2_in_place(data: &mut [Complex64], n: usize) {
    transform_2d(data, n, false);
}

pub(crate) fn ifft2_in_place(data: &mut [Complex64], n: usize) {
    transform_2d(data, n, true);
    let norm = 1.0 / (n * n) as f64;
    for z in data.iter_mut() {
        *z *= norm;
    }
}

/// Forward 2-D DFT, unnormalized. The result lives on the frequency grid
/// returned by [`freq_grid`] but keeps the spatial pitch for bookkeeping.
pub fn fft2(field: &ComplexField) -> Result<ComplexField> {
    field.check_finite("fft2 input")?;
    let mut out = field.clone();
    fft2_in_place(&mut out.data, out.n);
    Ok(out)
}

/// Inverse 2-D DFT with the `1/n²` factor.
pub fn ifft2(spectrum: &ComplexField) -> Result<ComplexField> {
    spectrum.check_finite("ifft2 input")?;
    let mut out = spectrum.clone();
    ifft2_in_place(&mut out.data, out.n);
    Ok(out)
}

pub fn total_energy(field: &ComplexField) -> f64 {
    field.total_energy()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_field(n: usize, seed: u64) -> ComplexField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ComplexField::from_fn(n, 1e-3, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .unwrap()
    }

    // O(n⁴) textbook DFT, independent of rustfft.
    fn direct_dft(u: &ComplexField) -> ComplexField {
        let n = u.n();
        ComplexField::from_fn(n, u.dx(), |kr, kc| {
            let mut acc = c(0.0, 0.0);
            for r in 0..n {
                for col in 0..n {
                    let ang = -2.0 * PI * ((kr * r + kc * col) as f64) / n as f64;
                    acc += u[(r, col)] * Complex64::from_polar(1.0, ang);
                }
            }
            acc
        })
        .unwrap()
    }

    #[test]
    fn constant_field_is_dc_only() {
        let u = ComplexField::from_fn(4, 1.0, |_, _| c(1.0, 0.0)).unwrap();
        let s = fft2(&u).unwrap();
        assert!((s[(0, 0)] - c(16.0, 0.0)).norm() < 1e-12);
        for (i, z) in s.as_slice().iter().enumerate().skip(1) {
            assert!(z.norm() < 1e-12, "bin {i} = {z}");
        }
    }

    #[test]
    fn impulse_has_flat_spectrum() {
        let mut u = ComplexField::zeros(4, 1.0).unwrap();
        u[(0, 0)] = c(1.0, 0.0);
        let s = fft2(&u).unwrap();
        for z in s.as_slice() {
            assert!((z - c(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn matches_direct_dft_and_round_trips() {
        let u = random_field(8, 7);
        let fast = fft2(&u).unwrap();
        let slow = direct_dft(&u);
        assert!(fast.rel_l2_diff(&slow) < 1e-12);

        let back = ifft2(&fast).unwrap();
        assert!(back.rel_l2_diff(&u) < 1e-12);

        let parseval = fast.total_energy() / 64.0;
        assert!((parseval - u.total_energy()).abs() / u.total_energy() < 1e-12);
    }

    #[test]
    fn round_trip_large_grid() {
        let u = random_field(512, 3);
        let back = ifft2(&fft2(&u).unwrap()).unwrap();
        assert!(back.max_abs_diff(&u) < 1e-12);
    }

    #[test]
    fn rejects_non_finite() {
        let mut u = random_field(4, 1);
        u.as_mut_slice()[5] = c(f64::NAN, 0.0);
        assert!(matches!(fft2(&u), Err(Error::NonFinite { index: 5, .. })));
        assert!(ComplexField::new(2, 1.0, vec![c(f64::INFINITY, 0.0); 4]).is_err());
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(ComplexField::zeros(3, 1.0).is_err());
        assert!(ComplexField::zeros(0, 1.0).is_err());
        assert!(ComplexField::zeros(4, 0.0).is_err());
        assert!(ComplexField::new(4, 1.0, vec![c(0.0, 0.0); 15]).is_err());
        let rect = vec![vec![c(0.0, 0.0); 4]; 2];
        assert!(ComplexField::from_rows(&rect, 1.0).is_err());
    }

    #[test]
    fn frequency_axes() {
        assert_eq!(freq_grid(4, 1.0).unwrap().fx, vec![0.0, 0.25, -0.5, -0.25]);
        assert_eq!(freq_grid(4, 0.5).unwrap().fx, vec![0.0, 0.5, -1.0, -0.5]);
        let g = freq_grid(256, 1e-4).unwrap();
        let fmax = g.fx.iter().fold(0.0_f64, |m, f| m.max(f.abs()));
        assert!((fmax - 5000.0).abs() < 1e-9);
        assert_eq!(g.fx[0], 0.0);
        assert!(freq_grid(5, 1.0).is_err());
        assert!(freq_grid(0, 1.0).is_err());
    }

    #[test]
    fn frequency_order_matches_fft_output() {
        // A plane wave at fx = fx[3] must land in column bin 3.
        let n = 16;
        let dx = 0.1;
        let g = freq_grid(n, dx).unwrap();
        let u = ComplexField::from_fn(n, dx, |_, col| {
            Complex64::from_polar(1.0, 2.0 * PI * g.fx[3] * col as f64 * dx)
        })
        .unwrap();
        let s = fft2(&u).unwrap();
        assert!((s[(0, 3)].norm() - (n * n) as f64).abs() < 1e-9);
    }

    #[test]
    fn energy_matches_brute_force() {
        assert_eq!(ComplexField::zeros(4, 1.0).unwrap().total_energy(), 0.0);
        let ones = ComplexField::from_fn(2, 1.0, |_, _| c(1.0, 0.0)).unwrap();
        assert_eq!(total_energy(&ones), 4.0);

        let u = random_field(16, 11);
        let mut acc = 0.0;
        for r in 0..16 {
            for col in 0..16 {
                let z = u[(r, col)];
                acc += z.re * z.re + z.im * z.im;
            }
        }
        assert!((u.total_energy() - acc).abs() / acc < 1e-14);
    }

    #[test]
    fn fft_is_linear() {
        let u = random_field(32, 1);
        let v = random_field(32, 2);
        let (a, b) = (c(0.3, -1.2), c(-2.0, 0.5));
        let mut mix = u.scaled(a);
        mix.add_scaled(b, &v).unwrap();
        let lhs = fft2(&mix).unwrap();
        let mut rhs = fft2(&u).unwrap().scaled(a);
        rhs.add_scaled(b, &fft2(&v).unwrap()).unwrap();
        assert!(lhs.rel_l2_diff(&rhs) < 1e-12);
    }
}

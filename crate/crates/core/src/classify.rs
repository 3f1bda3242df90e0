//! Detector-plane readout: class regions, energy integration, prediction and
//! the energy-ratio (SNR) loss with its detector-plane cotangent.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ComplexField;

/// Denominator floor for the SNR loss.
pub const ENERGY_FLOOR: f64 = 1e-20;

/// Axis-aligned pixel rectangle; `x` indexes columns, `y` rows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: usize,
    pub y0: usize,
    pub w: usize,
    pub h: usize,
}

impl Rect {
    pub fn area(&self) -> usize {
        self.w * self.h
    }

    #[inline]
    pub fn contains(&self, row: usize, col: usize) -> bool {
        col >= self.x0 && col < self.x0 + self.w && row >= self.y0 && row < self.y0 + self.h
    }

    fn overlaps(&self, other: &Rect) -> bool {
        self.x0 < other.x0 + other.w
            && other.x0 < self.x0 + self.w
            && self.y0 < other.y0 + other.h
            && other.y0 < self.y0 + self.h
    }

    fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (self.y0..self.y0 + self.h).flat_map(move |r| (self.x0..self.x0 + self.w).map(move |c| (r, c)))
    }
}

/// Disjoint class regions on an `n × n` detector plane.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectorLayout {
    n: usize,
    regions: Vec<Rect>,
}

impl DetectorLayout {
    pub fn new(n: usize, regions: Vec<Rect>) -> Result<Self> {
        if regions.len() < 2 {
            return Err(Error::Layout(format!(
                "need at least 2 class regions, got {}",
                regions.len()
            )));
        }
        for (i, r) in regions.iter().enumerate() {
            if r.area() == 0 {
                return Err(Error::Layout(format!("region {i} has zero area")));
            }
            if r.x0 + r.w > n || r.y0 + r.h > n {
                return Err(Error::Layout(format!("region {i} ({r:?}) leaves the {n}x{n} grid")));
            }
            for (j, other) in regions.iter().enumerate().skip(i + 1) {
                if r.overlaps(other) {
                    return Err(Error::Layout(format!("regions {i} and {j} overlap")));
                }
            }
        }
        Ok(Self { n, regions })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_classes(&self) -> usize {
        self.regions.len()
    }

    pub fn regions(&self) -> &[Rect] {
        &self.regions
    }

    /// The `g_c` indicator mask of class `c`, row-major.
    pub fn mask(&self, c: usize) -> Vec<bool> {
        let r = self.regions[c];
        (0..self.n * self.n)
            .map(|p| r.contains(p / self.n, p % self.n))
            .collect()
    }
}

/// `c` squares of side `n/8`, laid out in rows of at most five. Rows are
/// centered horizontally and the block of rows is centered vertically, with
/// equal gaps between squares and to the border.
pub fn default_layout(n: usize, c: usize) -> Result<DetectorLayout> {
    if n < 64 {
        return Err(Error::Layout(format!("default layout needs n >= 64, got {n}")));
    }
    if !(2..=16).contains(&c) {
        return Err(Error::Layout(format!(
            "default layout supports 2..=16 classes, got {c}"
        )));
    }
    grid_layout(n, c, n / 8)
}

/// The arrangement of [`default_layout`] with an arbitrary square side, for
/// grids too small for the default.
pub fn grid_layout(n: usize, c: usize, side: usize) -> Result<DetectorLayout> {
    if c < 2 || side == 0 {
        return Err(Error::Layout(format!("need c >= 2 and side > 0, got c={c} side={side}")));
    }
    let cols = c.min(5);
    let rows = c.div_ceil(5);
    if cols * side >= n || rows * side >= n {
        return Err(Error::Layout(format!("{c} regions of side {side} do not fit in {n}")));
    }
    let gap_x = (n - cols * side) / (cols + 1);
    let gap_y = (n - rows * side) / (rows + 1);
    let block_h = rows * side + (rows - 1) * gap_y;
    let top = (n - block_h) / 2;

    let mut regions = Vec::with_capacity(c);
    for row in 0..rows {
        let in_row = (c - row * cols).min(cols);
        let row_w = in_row * side + (in_row - 1) * gap_x;
        let left = (n - row_w) / 2;
        for i in 0..in_row {
            regions.push(Rect {
                x0: left + i * (side + gap_x),
                y0: top + row * (side + gap_y),
                w: side,
                h: side,
            });
        }
    }
    DetectorLayout::new(n, regions)
}

/// Per-class region energies and the whole-plane energy.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyReadout {
    pub per_class: Vec<f64>,
    pub total: f64,
}

pub fn region_energies(u: &ComplexField, layout: &DetectorLayout) -> Result<EnergyReadout> {
    u.check_same_n(layout.n, "detector field vs layout")?;
    let per_class = layout
        .regions
        .iter()
        .map(|r| r.pixels().map(|p| u[p].norm_sqr()).sum())
        .collect();
    Ok(EnergyReadout {
        per_class,
        total: u.total_energy(),
    })
}

/// Index of the brightest region; ties go to the lowest index.
pub fn predict(readout: &EnergyReadout) -> usize {
    let mut best = 0;
    for (i, &e) in readout.per_class.iter().enumerate() {
        if e > readout.per_class[best] {
            best = i;
        }
    }
    best
}

/// The `k` brightest regions, ascending by index. Ties go to the lower index.
pub fn predict_multi(readout: &EnergyReadout, k: usize) -> Result<Vec<usize>> {
    let c = readout.per_class.len();
    if k == 0 || k > c {
        return Err(Error::Invalid(format!("k must lie in 1..={c}, got {k}")));
    }
    let mut order: Vec<usize> = (0..c).collect();
    // Stable sort keeps lower indices first among equal energies.
    order.sort_by(|&a, &b| readout.per_class[b].total_cmp(&readout.per_class[a]));
    let mut top = order[..k].to_vec();
    top.sort_unstable();
    Ok(top)
}

fn check_label(label: usize, classes: usize) -> Result<()> {
    if label >= classes {
        return Err(Error::Invalid(format!(
            "label {label} out of range for {classes} classes"
        )));
    }
    Ok(())
}

fn floored(signal: f64) -> f64 {
    if signal <= ENERGY_FLOOR {
        log::warn!("true-class region energy {signal:e} at or below floor; loss denominator clamped to {ENERGY_FLOOR:e}");
        ENERGY_FLOOR
    } else {
        signal
    }
}

/// `(S_total − S_label) / S_label`.
pub fn snr_loss(readout: &EnergyReadout, label: usize) -> Result<f64> {
    check_label(label, readout.per_class.len())?;
    let signal = floored(readout.per_class[label]);
    Ok((readout.total - readout.per_class[label]) / signal)
}

/// Loss value together with `∂L/∂m*` at every detector pixel.
///
/// With `S_t` the plane energy and `S_c` the true-region energy, the
/// cotangent is `w·m` where `w = (S_c − S_t)/S_c²` inside the true region and
/// `1/S_c` elsewhere. The real gradient with respect to `(Re m, Im m)` is
/// twice the real and imaginary parts of this cotangent.
pub fn snr_loss_and_grad(
    detector: &ComplexField,
    layout: &DetectorLayout,
    label: usize,
) -> Result<(f64, ComplexField)> {
    check_label(label, layout.num_classes())?;
    let readout = region_energies(detector, layout)?;
    let signal = floored(readout.per_class[label]);
    let total = readout.total;
    let loss = (total - readout.per_class[label]) / signal;

    let inside = (signal - total) / (signal * signal);
    let outside = 1.0 / signal;
    let mut grad = detector.scaled(Complex64::new(outside, 0.0));
    let region = layout.regions[label];
    for p in region.pixels() {
        grad[p] = detector[p] * inside;
    }
    Ok((loss, grad))
}

pub fn snr_loss_grad_field(
    detector: &ComplexField,
    layout: &DetectorLayout,
    label: usize,
) -> Result<ComplexField> {
    snr_loss_and_grad(detector, layout, label).map(|(_, g)| g)
}

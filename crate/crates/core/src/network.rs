//! Modulation layers and the forward pass.
//!
//! The input plane is propagated a distance `d` to the first modulation
//! layer; every layer multiplies the incident field by `a · exp(j k φ)` and
//! propagates another `d`. After the last layer the field arrives at the
//! detector plane. The whole map is linear in the input field.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::propagation::{check_sampling, KernelKind, TransferFunction};

/// Physical and structural hyperparameters of the network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetConfig {
    /// Radar frequency in Hz. Informational; the wavelength is authoritative.
    #[serde(default)]
    pub f: f64,
    /// Wavelength in meters.
    pub lambda: f64,
    /// Number of modulation layers.
    pub m_layers: usize,
    /// Grid size in pixels.
    pub n: usize,
    /// Spacing between consecutive planes in meters.
    pub d: f64,
    /// Pixel pitch in meters.
    pub dx: f64,
    /// Aperture side in meters. Must equal `n · dx` when given.
    #[serde(default)]
    pub dl: Option<f64>,
    #[serde(default)]
    pub kernel: KernelKind,
}

impl NetConfig {
    /// MSTAR settings: 9.6 GHz, λ = 0.03 m, five layers on a 256² grid at
    /// 0.1 mm pitch spaced 0.3 m apart.
    pub fn mstar() -> Self {
        Self {
            f: 9.6e9,
            lambda: 0.03,
            m_layers: 5,
            n: 256,
            d: 0.3,
            dx: 1e-4,
            dl: None,
            kernel: KernelKind::Fresnel,
        }
    }

    /// Qilu-1 settings: 16.7 GHz, λ = 0.02 m, otherwise as [`NetConfig::mstar`].
    pub fn qilu1() -> Self {
        Self {
            f: 16.7e9,
            lambda: 0.02,
            ..Self::mstar()
        }
    }

    /// Aperture side `n · dx`.
    pub fn aperture(&self) -> f64 {
        self.n as f64 * self.dx
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.lambda
    }

    pub fn validate(&self) -> Result<()> {
        check_sampling(self.dx, self.lambda)?;
        if self.n < 2 || !self.n.is_multiple_of(2) {
            return Err(Error::Config(format!("n must be even and >= 2, got {}", self.n)));
        }
        if !(self.d > 0.0 && self.d.is_finite()) {
            return Err(Error::Config(format!("layer spacing d must be positive, got {}", self.d)));
        }
        if let Some(dl) = self.dl {
            let expect = self.aperture();
            if (dl - expect).abs() > 1e-12 * expect {
                return Err(Error::Config(format!(
                    "dl must equal n*dx = {expect} m, got {dl} m"
                )));
            }
        }
        if !(self.f >= 0.0 && self.f.is_finite()) {
            return Err(Error::Config(format!("frequency must be non-negative, got {}", self.f)));
        }
        Ok(())
    }

    pub fn transfer(&self) -> Result<TransferFunction> {
        TransferFunction::new(self.kernel, self.n, self.dx, self.lambda, self.d)
    }
}

/// Number of trainable reals: an amplitude and a phase per pixel per layer.
pub fn param_count(cfg: &NetConfig) -> usize {
    cfg.m_layers * cfg.n * cfg.n * 2
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    /// `a ≡ 1`, `φ ≡ 0`.
    Identity,
    /// `a ≡ 1`, `φ ~ U[0, λ)`.
    #[default]
    UniformPhase,
}

/// One learnable mask `t = a · exp(j k φ)`; `φ` is a path length in meters.
#[derive(Clone, Debug, PartialEq)]
pub struct ModulationLayer {
    amp: Vec<f64>,
    phase: Vec<f64>,
    n: usize,
    k: f64,
}

impl ModulationLayer {
    pub fn new(n: usize, k: f64, amp: Vec<f64>, phase: Vec<f64>) -> Result<Self> {
        if amp.len() != n * n || phase.len() != n * n {
            return Err(Error::Invalid(format!(
                "layer grids must hold {} values, got amp={} phase={}",
                n * n,
                amp.len(),
                phase.len()
            )));
        }
        if let Some(i) = amp.iter().chain(&phase).position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                index: i % (n * n),
                context: "modulation layer",
            });
        }
        Ok(Self { amp, phase, n, k })
    }

    pub fn identity(n: usize, k: f64) -> Self {
        Self {
            amp: vec![1.0; n * n],
            phase: vec![0.0; n * n],
            n,
            k,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn wavenumber(&self) -> f64 {
        self.k
    }
    pub fn amp(&self) -> &[f64] {
        &self.amp
    }
    pub fn phase(&self) -> &[f64] {
        &self.phase
    }
    pub fn amp_mut(&mut self) -> &mut [f64] {
        &mut self.amp
    }
    pub fn phase_mut(&mut self) -> &mut [f64] {
        &mut self.phase
    }

    /// `exp(j k φ)` per pixel.
    pub fn phasors(&self) -> Vec<Complex64> {
        self.phase
            .iter()
            .map(|&p| Complex64::from_polar(1.0, self.k * p))
            .collect()
    }

    /// The complex mask `a · exp(j k φ)`.
    pub fn transmission(&self) -> Vec<Complex64> {
        self.amp
            .iter()
            .zip(&self.phase)
            .map(|(&a, &p)| Complex64::from_polar(a, self.k * p))
            .collect()
    }
}

pub fn init_layers(cfg: &NetConfig, scheme: InitScheme, seed: u64) -> Result<Vec<ModulationLayer>> {
    cfg.validate()?;
    let k = cfg.wavenumber();
    let n = cfg.n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..cfg.m_layers)
        .map(|_| match scheme {
            InitScheme::Identity => ModulationLayer::identity(n, k),
            InitScheme::UniformPhase => ModulationLayer {
                amp: vec![1.0; n * n],
                phase: (0..n * n).map(|_| rng.gen_range(0.0..cfg.lambda)).collect(),
                n,
                k,
            },
        })
        .collect())
}

/// Elementwise `u ∘ a ∘ exp(j k φ)`.
pub fn modulate(u: &ComplexField, layer: &ModulationLayer) -> Result<ComplexField> {
    u.check_same_n(layer.n, "modulate")?;
    let mut out = u.clone();
    apply_mask(out.as_mut_slice(), &layer.transmission());
    Ok(out)
}

fn apply_mask(data: &mut [Complex64], mask: &[Complex64]) {
    for (z, t) in data.iter_mut().zip(mask) {
        *z *= t;
    }
}

/// Fields seen during one forward pass: `incident[l]` is the field arriving
/// at modulation layer `l`, and the last entry is the detector-plane field.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    pub incident: Vec<ComplexField>,
}

impl ForwardCache {
    pub fn detector(&self) -> &ComplexField {
        self.incident.last().expect("cache always holds the detector field")
    }
}

/// A configured network: hyperparameters, the shared inter-plane kernel and
/// the learnable layers.
#[derive(Clone, Debug)]
pub struct Network {
    cfg: NetConfig,
    transfer: TransferFunction,
    pub layers: Vec<ModulationLayer>,
}

impl Network {
    pub fn new(cfg: NetConfig, layers: Vec<ModulationLayer>) -> Result<Self> {
        cfg.validate()?;
        if layers.len() != cfg.m_layers {
            return Err(Error::Config(format!(
                "config declares {} layers, got {}",
                cfg.m_layers,
                layers.len()
            )));
        }
        if let Some(bad) = layers.iter().find(|l| l.n != cfg.n) {
            return Err(Error::Shape {
                expected: cfg.n,
                actual: bad.n,
                context: "layer grid vs config",
            });
        }
        let transfer = cfg.transfer()?;
        Ok(Self {
            cfg,
            transfer,
            layers,
        })
    }

    pub fn init(cfg: NetConfig, scheme: InitScheme, seed: u64) -> Result<Self> {
        let layers = init_layers(&cfg, scheme, seed)?;
        Self::new(cfg, layers)
    }

    pub fn config(&self) -> &NetConfig {
        &self.cfg
    }

    pub fn transfer(&self) -> &TransferFunction {
        &self.transfer
    }

    fn check_input(&self, input: &ComplexField) -> Result<()> {
        input.check_same_n(self.cfg.n, "network input")?;
        input.check_finite("network input")
    }

    /// Detector-plane field plus the per-layer cache needed by backprop.
    pub fn forward(&self, input: &ComplexField) -> Result<(ComplexField, ForwardCache)> {
        self.check_input(input)?;
        let mut incident = Vec::with_capacity(self.layers.len() + 1);
        let mut x = input.clone();
        self.transfer.apply_in_place(x.as_mut_slice(), false);
        for layer in &self.layers {
            incident.push(x.clone());
            apply_mask(x.as_mut_slice(), &layer.transmission());
            self.transfer.apply_in_place(x.as_mut_slice(), false);
        }
        incident.push(x.clone());
        Ok((x, ForwardCache { incident }))
    }

    /// Detector-plane field only.
    pub fn forward_field(&self, input: &ComplexField) -> Result<ComplexField> {
        self.check_input(input)?;
        let mut x = input.clone();
        self.transfer.apply_in_place(x.as_mut_slice(), false);
        for layer in &self.layers {
            apply_mask(x.as_mut_slice(), &layer.transmission());
            self.transfer.apply_in_place(x.as_mut_slice(), false);
        }
        Ok(x)
    }
}

/// One-off forward pass for callers holding a config and layers.
pub fn forward(
    cfg: &NetConfig,
    layers: &[ModulationLayer],
    input: &ComplexField,
) -> Result<(ComplexField, ForwardCache)> {
    Network::new(cfg.clone(), layers.to_vec())?.forward(input)
}

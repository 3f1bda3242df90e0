//! Gradients of the SNR loss with respect to every layer's amplitude and
//! phase, and a brute-force finite-difference oracle to check them.
//!
//! The backward sweep carries `g = ∂L/∂x*` for the field `x` at each plane.
//! Propagation is linear with adjoint `conj(H)` in the spectral domain, so
//! `g` moves back through a propagation step by [`adjoint_propagate`]. At
//! layer `l` with incident field `m` and mask `t = a·e^{jkφ}`:
//!
//! ```text
//! ∂L/∂a = 2·Re(conj(g) · m · e^{jkφ})
//! ∂L/∂φ = 2·Re(conj(g) · m · j·k·a·e^{jkφ})
//! g    ← conj(t) · g
//! ```
//!
//! [`adjoint_propagate`]: crate::propagation::adjoint_propagate

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::classify::{grid_layout, region_energies, snr_loss, snr_loss_and_grad, DetectorLayout};
use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::network::{ForwardCache, InitScheme, ModulationLayer, NetConfig, Network};
use crate::propagation::KernelKind;

/// `∂L/∂a` and `∂L/∂φ` for one layer, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerGrads {
    pub d_amp: Vec<f64>,
    pub d_phase: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamGrads {
    pub layers: Vec<LayerGrads>,
}

impl ParamGrads {
    pub fn zeros(m_layers: usize, n: usize) -> Self {
        Self {
            layers: (0..m_layers)
                .map(|_| LayerGrads {
                    d_amp: vec![0.0; n * n],
                    d_phase: vec![0.0; n * n],
                })
                .collect(),
        }
    }

    pub fn zeros_like(layers: &[ModulationLayer]) -> Self {
        Self::zeros(layers.len(), layers.first().map_or(0, |l| l.n()))
    }

    pub fn add_assign(&mut self, other: &ParamGrads) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.d_amp.iter_mut().zip(&b.d_amp) {
                *x += y;
            }
            for (x, y) in a.d_phase.iter_mut().zip(&b.d_phase) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for l in &mut self.layers {
            l.d_amp.iter_mut().chain(l.d_phase.iter_mut()).for_each(|v| *v *= s);
        }
    }

    /// Flat view over all entries: every layer's amplitudes then phases.
    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.d_amp.iter().chain(&l.d_phase).copied())
    }

    pub fn check_finite(&self) -> Result<()> {
        for (layer, l) in self.layers.iter().enumerate() {
            if l.d_amp.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteGradient { layer, which: "amp" });
            }
            if l.d_phase.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteGradient { layer, which: "phase" });
            }
        }
        Ok(())
    }

    /// Largest `|self − reference| / |reference|` over entries where
    /// `|reference| > floor`.
    pub fn max_rel_error(&self, reference: &ParamGrads, floor: f64) -> f64 {
        self.iter()
            .zip(reference.iter())
            .filter(|(_, r)| r.abs() > floor)
            .map(|(a, r)| (a - r).abs() / r.abs())
            .fold(0.0, f64::max)
    }
}

impl Network {
    /// Reverse sweep from a detector-plane cotangent `∂L/∂m*` to the
    /// parameter gradients. `cache` must come from [`Network::forward`] with
    /// the current layers.
    pub fn backward(&self, cache: &ForwardCache, cotangent: &ComplexField) -> Result<ParamGrads> {
        let m = self.layers.len();
        let n = self.config().n;
        if cache.incident.len() != m + 1 {
            return Err(Error::Invalid(format!(
                "cache holds {} planes, network needs {}",
                cache.incident.len(),
                m + 1
            )));
        }
        if let Some(bad) = cache.incident.iter().find(|f| f.n() != n) {
            return Err(Error::Shape {
                expected: n,
                actual: bad.n(),
                context: "forward cache",
            });
        }
        cotangent.check_same_n(n, "detector cotangent")?;

        let mut grads = ParamGrads::zeros(m, n);
        let mut g = cotangent.clone().into_vec();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            self.transfer().apply_in_place(&mut g, true);
            let k = layer.wavenumber();
            let incident = cache.incident[l].as_slice();
            let out = &mut grads.layers[l];
            for p in 0..n * n {
                let e = Complex64::from_polar(1.0, k * layer.phase()[p]);
                let a = layer.amp()[p];
                // conj(g)·m·e, shared by both partials
                let s = g[p].conj() * incident[p] * e;
                out.d_amp[p] = 2.0 * s.re;
                // Re(s · j·k·a) = −k·a·Im(s)
                out.d_phase[p] = -2.0 * k * a * s.im;
                g[p] *= (e * a).conj();
            }
        }
        Ok(grads)
    }

    /// SNR loss of one labelled input.
    pub fn loss(&self, input: &ComplexField, layout: &DetectorLayout, label: usize) -> Result<f64> {
        let out = self.forward_field(input)?;
        snr_loss(&region_energies(&out, layout)?, label)
    }

    /// Loss and analytic parameter gradients for one labelled input.
    pub fn loss_and_grads(
        &self,
        input: &ComplexField,
        layout: &DetectorLayout,
        label: usize,
    ) -> Result<(f64, ParamGrads)> {
        let (out, cache) = self.forward(input)?;
        let (loss, cot) = snr_loss_and_grad(&out, layout, label)?;
        Ok((loss, self.backward(&cache, &cot)?))
    }
}

/// Free-function form of [`Network::backward`].
pub fn backward(
    cfg: &NetConfig,
    layers: &[ModulationLayer],
    cache: &ForwardCache,
    cotangent: &ComplexField,
) -> Result<ParamGrads> {
    Network::new(cfg.clone(), layers.to_vec())?.backward(cache, cotangent)
}

/// Central-difference step sizes for amplitude and phase (meters).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FdSteps {
    pub amp: f64,
    pub phase: f64,
}

impl Default for FdSteps {
    fn default() -> Self {
        Self {
            amp: 1e-4,
            phase: 1e-6,
        }
    }
}

/// `(L(θ+h) − L(θ−h)) / 2h` for every amplitude and phase entry, each probe a
/// full forward pass. Cost is `4·M·n²` forwards, so keep grids small.
pub fn finite_diff_grads(
    net: &Network,
    input: &ComplexField,
    layout: &DetectorLayout,
    label: usize,
    steps: FdSteps,
) -> Result<ParamGrads> {
    let n = net.config().n;
    let mut grads = ParamGrads::zeros(net.layers.len(), n);
    let mut probe = net.clone();
    for l in 0..net.layers.len() {
        for p in 0..n * n {
            for which in [0, 1] {
                let h = if which == 0 { steps.amp } else { steps.phase };
                let orig = param(&probe, l, p, which);
                set_param(&mut probe, l, p, which, orig + h);
                let up = probe.loss(input, layout, label)?;
                set_param(&mut probe, l, p, which, orig - h);
                let down = probe.loss(input, layout, label)?;
                set_param(&mut probe, l, p, which, orig);
                let d = (up - down) / (2.0 * h);
                if which == 0 {
                    grads.layers[l].d_amp[p] = d;
                } else {
                    grads.layers[l].d_phase[p] = d;
                }
            }
        }
    }
    Ok(grads)
}

fn param(net: &Network, l: usize, p: usize, which: usize) -> f64 {
    if which == 0 {
        net.layers[l].amp()[p]
    } else {
        net.layers[l].phase()[p]
    }
}

fn set_param(net: &mut Network, l: usize, p: usize, which: usize, v: f64) {
    if which == 0 {
        net.layers[l].amp_mut()[p] = v;
    } else {
        net.layers[l].phase_mut()[p] = v;
    }
}

/// A randomized small problem for checking gradients.
#[derive(Clone, Debug)]
pub struct GradCheckInstance {
    pub net: Network,
    pub input: ComplexField,
    pub layout: DetectorLayout,
    pub label: usize,
}

impl GradCheckInstance {
    /// Random amplitudes in `[0.5, 1.5)`, random phases, a random complex
    /// input and `classes` regions of side `n/4`.
    pub fn random(n: usize, m_layers: usize, classes: usize, seed: u64) -> Result<Self> {
        let cfg = NetConfig {
            f: 1e10,
            lambda: 0.03,
            m_layers,
            n,
            d: 0.2,
            dx: 0.01,
            dl: None,
            kernel: KernelKind::Fresnel,
        };
        let mut net = Network::init(cfg, InitScheme::UniformPhase, seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        for layer in &mut net.layers {
            for a in layer.amp_mut() {
                *a = rng.gen_range(0.5..1.5);
            }
        }
        let input = ComplexField::from_fn(n, 0.01, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        })?;
        let layout = grid_layout(n, classes, (n / 4).max(1))?;
        let label = rng.gen_range(0..classes);
        Ok(Self {
            net,
            input,
            layout,
            label,
        })
    }

    pub fn analytic(&self) -> Result<ParamGrads> {
        Ok(self.net.loss_and_grads(&self.input, &self.layout, self.label)?.1)
    }

    pub fn numeric(&self, steps: FdSteps) -> Result<ParamGrads> {
        finite_diff_grads(&self.net, &self.input, &self.layout, self.label, steps)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub compared: usize,
}

/// Analytic vs central finite differences on a random instance, comparing
/// entries with `|FD| > 1e-12`.
pub fn gradcheck(n: usize, m_layers: usize, classes: usize, seed: u64) -> Result<GradCheckReport> {
    let inst = GradCheckInstance::random(n, m_layers, classes, seed)?;
    let analytic = inst.analytic()?;
    let numeric = inst.numeric(FdSteps::default())?;
    Ok(GradCheckReport {
        max_rel_error: analytic.max_rel_error(&numeric, 1e-12),
        compared: numeric.iter().filter(|v| v.abs() > 1e-12).count(),
    })
}

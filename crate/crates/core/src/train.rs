//! Adam with step decay, the epoch loop, evaluation and checkpoints.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autograd::ParamGrads;
use crate::classify::{predict, region_energies, DetectorLayout};
use crate::data::{derive_seed, Sample};
use crate::error::{io_err, Error, Result};
use crate::io::atomic_write;
use crate::network::{InitScheme, ModulationLayer, NetConfig, Network};
use crate::propagation::KernelKind;

/// Samples per deterministic reduction chunk. Partial gradient sums are
/// formed over fixed chunks and then added in chunk order, so the result
/// does not depend on how many threads rayon uses.
const REDUCE_CHUNK: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr0: f64,
    /// Epochs between learning-rate decays.
    pub decay_every: usize,
    pub decay_factor: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub init: InitScheme,
    /// Optional global L2 clip on the batch gradient.
    pub grad_clip: Option<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr0: 0.1,
            decay_every: 20,
            decay_factor: 0.5,
            epochs: 200,
            batch_size: 32,
            seed: 0,
            init: InitScheme::UniformPhase,
            grad_clip: None,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return bad(format!("train.lr0 must be positive, got {}", self.lr0));
        }
        if !(self.decay_factor > 0.0 && self.decay_factor <= 1.0) {
            return bad(format!("train.decay_factor must lie in (0, 1], got {}", self.decay_factor));
        }
        if self.decay_every == 0 {
            return bad("train.decay_every must be at least 1".into());
        }
        if self.epochs == 0 {
            return bad("train.epochs must be at least 1".into());
        }
        if self.batch_size == 0 {
            return bad("train.batch_size must be at least 1".into());
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2) && self.eps > 0.0) {
            return bad("train.beta1/beta2 must lie in [0, 1) and eps must be positive".into());
        }
        if let Some(c) = self.grad_clip {
            if !(c > 0.0) {
                return bad(format!("train.grad_clip must be positive, got {c}"));
            }
        }
        Ok(())
    }
}

/// `lr0 · decay_factor^⌊epoch / decay_every⌋`.
pub fn lr_schedule(epoch: usize, cfg: &TrainConfig) -> f64 {
    cfg.lr0 * cfg.decay_factor.powi((epoch / cfg.decay_every.max(1)) as i32)
}

/// First and second moment estimates for every amplitude and phase entry.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub first: ParamGrads,
    pub second: ParamGrads,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(layers: &[ModulationLayer], beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            first: ParamGrads::zeros_like(layers),
            second: ParamGrads::zeros_like(layers),
            t: 0,
            beta1,
            beta2,
            eps,
        }
    }

    pub fn from_config(layers: &[ModulationLayer], cfg: &TrainConfig) -> Self {
        Self::new(layers, cfg.beta1, cfg.beta2, cfg.eps)
    }
}

/// One bias-corrected Adam update on every parameter. Non-finite gradients
/// are rejected before anything is modified.
pub fn adam_step(
    layers: &mut [ModulationLayer],
    grads: &ParamGrads,
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    if grads.layers.len() != layers.len() || state.first.layers.len() != layers.len() {
        return Err(Error::Invalid(format!(
            "adam: {} layers, {} gradient layers, {} moment layers",
            layers.len(),
            grads.layers.len(),
            state.first.layers.len()
        )));
    }
    grads.check_finite()?;
    state.t += 1;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    let c1 = 1.0 - b1.powi(state.t as i32);
    let c2 = 1.0 - b2.powi(state.t as i32);
    let update = |params: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
        for i in 0..params.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    };
    for (l, layer) in layers.iter_mut().enumerate() {
        let g = &grads.layers[l];
        let first = &mut state.first.layers[l];
        let second = &mut state.second.layers[l];
        update(layer.amp_mut(), &g.d_amp, &mut first.d_amp, &mut second.d_amp);
        update(layer.phase_mut(), &g.d_phase, &mut first.d_phase, &mut second.d_phase);
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub mean_loss: f64,
    pub train_acc: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
}

impl History {
    /// CSV with header `epoch,lr,mean_loss,train_acc`.
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["epoch", "lr", "mean_loss", "train_acc"])?;
        for r in &self.epochs {
            w.write_record([
                r.epoch.to_string(),
                r.lr.to_string(),
                r.mean_loss.to_string(),
                r.train_acc.to_string(),
            ])?;
        }
        w.into_inner().map_err(|e| Error::Invalid(e.to_string()))
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        atomic_write(path.as_ref(), &self.to_csv()?)
    }
}

/// Training stopped early because the loss became non-finite. The network
/// passed to [`fit`] is restored to its state at the start of the failing epoch.
#[derive(Debug)]
pub struct Diverged {
    pub error: Error,
    pub history: History,
}

fn single_label(s: &Sample, classes: usize) -> Result<usize> {
    match s.label() {
        Some(l) if l < classes => Ok(l),
        Some(l) => Err(Error::Invalid(format!("label {l} out of range for {classes} classes"))),
        None => Err(Error::Invalid(
            "multi-label samples cannot be used for training".into(),
        )),
    }
}

struct BatchStats {
    loss: f64,
    correct: usize,
    grads: ParamGrads,
}

fn batch_gradient(
    net: &Network,
    batch: &[&Sample],
    layout: &DetectorLayout,
) -> Result<BatchStats> {
    let classes = layout.num_classes();
    let partials: Vec<BatchStats> = batch
        .par_chunks(REDUCE_CHUNK)
        .map(|chunk| {
            let mut acc = BatchStats {
                loss: 0.0,
                correct: 0,
                grads: ParamGrads::zeros_like(&net.layers),
            };
            for s in chunk {
                let label = single_label(s, classes)?;
                let (out, cache) = net.forward(&s.field)?;
                let (loss, cot) = crate::classify::snr_loss_and_grad(&out, layout, label)?;
                let g = net.backward(&cache, &cot)?;
                if predict(&region_energies(&out, layout)?) == label {
                    acc.correct += 1;
                }
                acc.loss += loss;
                acc.grads.add_assign(&g);
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut total = BatchStats {
        loss: 0.0,
        correct: 0,
        grads: ParamGrads::zeros_like(&net.layers),
    };
    for p in partials {
        total.loss += p.loss;
        total.correct += p.correct;
        total.grads.add_assign(&p.grads);
    }
    Ok(total)
}

fn clip(grads: &mut ParamGrads, max_norm: f64) {
    let norm = grads.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > max_norm {
        grads.scale(max_norm / norm);
    }
}

/// Mini-batch training. Each epoch shuffles with a seed derived from
/// `(seed, epoch)`, then for every batch averages per-sample gradients and
/// takes one Adam step. The returned history holds the epoch-mean loss and
/// the training accuracy measured on the forward passes of that epoch.
pub fn fit(
    net: &mut Network,
    trainset: &[Sample],
    layout: &DetectorLayout,
    cfg: &TrainConfig,
) -> std::result::Result<History, Diverged> {
    let fail = |error, history| Diverged { error, history };
    if let Err(e) = cfg.validate() {
        return Err(fail(e, History::default()));
    }
    if trainset.is_empty() {
        return Err(fail(Error::Invalid("training set is empty".into()), History::default()));
    }
    if let Some(e) = trainset
        .iter()
        .map(|s| single_label(s, layout.num_classes()))
        .find_map(|r| r.err())
    {
        return Err(fail(e, History::default()));
    }

    let mut state = AdamState::from_config(&net.layers, cfg);
    let mut history = History::default();
    let mut order: Vec<usize> = (0..trainset.len()).collect();
    for epoch in 0..cfg.epochs {
        let lr = lr_schedule(epoch, cfg);
        let checkpoint = (net.layers.clone(), state.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, epoch as u64));
        order.sort_unstable();
        order.shuffle(&mut rng);

        let mut loss_sum = 0.0;
        let mut correct = 0;
        for idx in order.chunks(cfg.batch_size) {
            let batch: Vec<&Sample> = idx.iter().map(|&i| &trainset[i]).collect();
            let stats = match batch_gradient(net, &batch, layout) {
                Ok(s) => s,
                Err(e) => return Err(fail(e, history)),
            };
            if !stats.loss.is_finite() {
                net.layers = checkpoint.0;
                return Err(fail(Error::Diverged { epoch }, history));
            }
            loss_sum += stats.loss;
            correct += stats.correct;
            let mut grads = stats.grads;
            grads.scale(1.0 / batch.len() as f64);
            if let Some(c) = cfg.grad_clip {
                clip(&mut grads, c);
            }
            if let Err(e) = adam_step(&mut net.layers, &grads, &mut state, lr) {
                net.layers = checkpoint.0;
                return Err(fail(e, history));
            }
        }
        let record = EpochRecord {
            epoch,
            lr,
            mean_loss: loss_sum / trainset.len() as f64,
            train_acc: correct as f64 / trainset.len() as f64,
        };
        log::info!(
            "epoch {:>4}  lr {:.3e}  loss {:.5}  acc {:.4}",
            record.epoch,
            record.lr,
            record.mean_loss,
            record.train_acc
        );
        history.epochs.push(record);
    }
    Ok(history)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

/// Predicted class of one input.
pub fn classify(net: &Network, input: &crate::field::ComplexField, layout: &DetectorLayout) -> Result<usize> {
    Ok(predict(&region_energies(&net.forward_field(input)?, layout)?))
}

pub fn evaluate(net: &Network, dataset: &[Sample], layout: &DetectorLayout) -> Result<Evaluation> {
    if dataset.is_empty() {
        return Err(Error::Invalid("evaluation set is empty".into()));
    }
    let c = layout.num_classes();
    let pairs: Vec<(usize, usize)> = dataset
        .par_iter()
        .map(|s| Ok((single_label(s, c)?, classify(net, &s.field, layout)?)))
        .collect::<Result<_>>()?;
    let mut confusion = vec![vec![0; c]; c];
    for &(t, p) in &pairs {
        confusion[t][p] += 1;
    }
    let hits = pairs.iter().filter(|(t, p)| t == p).count();
    Ok(Evaluation {
        accuracy: hits as f64 / dataset.len() as f64,
        confusion,
    })
}

const CKPT_MAGIC: &[u8; 4] = b"EMWV";
const CKPT_VERSION: u16 = 1;
/// magic + version + f, λ + M, N + d, dx, dl + kernel + layer count
pub const CKPT_HEADER_LEN: usize = 4 + 2 + 16 + 8 + 24 + 1 + 4;

/// Checkpoint layout, little-endian: `"EMWV"`, u16 version, f64 `f`,
/// f64 `λ`, u32 `M`, u32 `N`, f64 `d`, f64 `dx`, f64 `dl`, u8 kernel
/// (0 Fresnel, 1 exact), u32 layer count, then per layer the amplitude grid
/// followed by the phase grid as row-major f64.
pub fn encode_checkpoint(net: &Network) -> Vec<u8> {
    let cfg = net.config();
    let n = cfg.n;
    let mut buf = Vec::with_capacity(CKPT_HEADER_LEN + 16 * n * n * net.layers.len());
    buf.extend_from_slice(CKPT_MAGIC);
    buf.extend_from_slice(&CKPT_VERSION.to_le_bytes());
    buf.extend_from_slice(&cfg.f.to_le_bytes());
    buf.extend_from_slice(&cfg.lambda.to_le_bytes());
    buf.extend_from_slice(&(cfg.m_layers as u32).to_le_bytes());
    buf.extend_from_slice(&(n as u32).to_le_bytes());
    buf.extend_from_slice(&cfg.d.to_le_bytes());
    buf.extend_from_slice(&cfg.dx.to_le_bytes());
    buf.extend_from_slice(&cfg.aperture().to_le_bytes());
    buf.push(cfg.kernel.code());
    buf.extend_from_slice(&(net.layers.len() as u32).to_le_bytes());
    for layer in &net.layers {
        for v in layer.amp().iter().chain(layer.phase()) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take<const N: usize>(&mut self) -> [u8; N] {
        let out = self.bytes[self.at..self.at + N].try_into().unwrap();
        self.at += N;
        out
    }
    fn f64(&mut self) -> f64 {
        f64::from_le_bytes(self.take())
    }
    fn u32(&mut self) -> usize {
        u32::from_le_bytes(self.take()) as usize
    }
}

pub fn decode_checkpoint(bytes: &[u8], path: &Path) -> Result<Network> {
    let format = |reason: String| Error::Format {
        path: path.to_path_buf(),
        reason,
    };
    let truncated = |expected| Error::Truncated {
        path: path.to_path_buf(),
        expected,
        actual: bytes.len(),
    };
    if bytes.len() < 6 {
        return Err(truncated(CKPT_HEADER_LEN));
    }
    if &bytes[..4] != CKPT_MAGIC {
        return Err(format(format!("bad magic {:?}, expected \"EMWV\"", &bytes[..4])));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != CKPT_VERSION {
        return Err(format(format!(
            "unsupported checkpoint version {version}, expected {CKPT_VERSION}"
        )));
    }
    if bytes.len() < CKPT_HEADER_LEN {
        return Err(truncated(CKPT_HEADER_LEN));
    }
    let mut r = Reader { bytes, at: 6 };
    let f = r.f64();
    let lambda = r.f64();
    let m_layers = r.u32();
    let n = r.u32();
    let d = r.f64();
    let dx = r.f64();
    let dl = r.f64();
    let kernel = KernelKind::from_code(r.take::<1>()[0])
        .ok_or_else(|| format("unknown kernel code".into()))?;
    let count = r.u32();
    if count != m_layers {
        return Err(format(format!("header declares {m_layers} layers but stores {count}")));
    }
    let expected = CKPT_HEADER_LEN + 16 * n * n * count;
    if bytes.len() != expected {
        return if bytes.len() < expected {
            Err(truncated(expected))
        } else {
            Err(format(format!("trailing bytes: expected {expected}, found {}", bytes.len())))
        };
    }
    let cfg = NetConfig {
        f,
        lambda,
        m_layers,
        n,
        d,
        dx,
        dl: None,
        kernel,
    };
    if dl != cfg.aperture() {
        return Err(format(format!("stored dl {dl} disagrees with n*dx = {}", cfg.aperture())));
    }
    let k = cfg.wavenumber();
    let mut grid = || (0..n * n).map(|_| r.f64()).collect::<Vec<f64>>();
    let layers = (0..count)
        .map(|_| {
            let amp = grid();
            let phase = grid();
            ModulationLayer::new(n, k, amp, phase)
        })
        .collect::<Result<Vec<_>>>()?;
    Network::new(cfg, layers).map_err(|e| format(e.to_string()))
}

pub fn save_checkpoint(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    atomic_write(path.as_ref(), &encode_checkpoint(net))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Network> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(io_err(path))?;
    decode_checkpoint(&bytes, path)
}

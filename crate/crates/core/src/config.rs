//! TOML run configuration.
//!
//! ```toml
//! classes = 4
//! layout = "default"   # or [[layout.regions]] tables with x0, y0, w, h
//!
//! [net]
//! lambda = 0.03
//! m_layers = 3
//! n = 64
//! d = 0.5
//! dx = 0.01
//!
//! [train]          # every key optional
//! epochs = 200
//! seed = 7
//!
//! [paths]
//! train_dir = "data/train"
//! test_dir = "data/test"
//! noise_dir = "data/noise"   # optional, needed by snr/mask experiments
//! checkpoint = "out/net.emwv"
//! out_dir = "out"
//!
//! [interfere]      # every key optional
//! trials = 100
//! mask_snr_db = 0.0
//! ```
//!
//! Relative paths are resolved against the directory holding the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classify::{default_layout, DetectorLayout, Rect};
use crate::error::{io_err, Error, Result};
use crate::network::NetConfig;
use crate::train::TrainConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LayoutSpec {
    /// The string `"default"`.
    Default(DefaultTag),
    Explicit { regions: Vec<Rect> },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DefaultTag {
    Default,
}

impl Default for LayoutSpec {
    fn default() -> Self {
        LayoutSpec::Default(DefaultTag::Default)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub train_dir: Option<PathBuf>,
    pub test_dir: Option<PathBuf>,
    pub noise_dir: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

/// Settings for the interference experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InterfereConfig {
    /// Random draws per superposition order.
    pub trials: usize,
    /// SNR inside the mask patch, in dB.
    pub mask_snr_db: f64,
    pub seed: u64,
}

impl Default for InterfereConfig {
    fn default() -> Self {
        Self {
            trials: 100,
            mask_snr_db: 0.0,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub net: NetConfig,
    #[serde(default)]
    pub train: TrainConfig,
    /// Number of classes when the default layout is used. Ignored for an
    /// explicit layout.
    #[serde(default = "default_classes")]
    pub classes: usize,
    #[serde(default)]
    pub layout: LayoutSpec,
    #[serde(default)]
    pub paths: Paths,
    #[serde(default)]
    pub interfere: InterfereConfig,
}

fn default_classes() -> usize {
    4
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string() + &span_hint(text, e.span())))
    }

    /// Parses the file and resolves relative paths against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.paths.train_dir,
            &mut cfg.paths.test_dir,
            &mut cfg.paths.noise_dir,
            &mut cfg.paths.checkpoint,
            &mut cfg.paths.out_dir,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        fn ctx(section: &'static str) -> impl Fn(Error) -> Error {
            move |e| Error::Config(format!("[{section}] {e}"))
        }
        self.net.validate().map_err(ctx("net"))?;
        self.train.validate().map_err(ctx("train"))?;
        self.interfere_validate().map_err(ctx("interfere"))?;
        self.layout().map_err(ctx("layout"))?;
        Ok(())
    }

    fn interfere_validate(&self) -> Result<()> {
        if self.interfere.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if !self.interfere.mask_snr_db.is_finite() {
            return Err(Error::Config("mask_snr_db must be finite".into()));
        }
        Ok(())
    }

    pub fn layout(&self) -> Result<DetectorLayout> {
        match &self.layout {
            LayoutSpec::Default(_) => default_layout(self.net.n, self.classes),
            LayoutSpec::Explicit { regions } => DetectorLayout::new(self.net.n, regions.clone()),
        }
    }

    /// Returns the configured path for `key`, failing with a config error
    /// when it is absent or (for inputs) missing on disk.
    pub fn require(&self, key: PathKey) -> Result<&Path> {
        let (name, value, must_exist) = match key {
            PathKey::TrainDir => ("train_dir", &self.paths.train_dir, true),
            PathKey::TestDir => ("test_dir", &self.paths.test_dir, true),
            PathKey::NoiseDir => ("noise_dir", &self.paths.noise_dir, true),
            PathKey::CheckpointIn => ("checkpoint", &self.paths.checkpoint, true),
            PathKey::CheckpointOut => ("checkpoint", &self.paths.checkpoint, false),
            PathKey::OutDir => ("out_dir", &self.paths.out_dir, false),
        };
        let p = value
            .as_deref()
            .ok_or_else(|| Error::Config(format!("[paths] {name} is required for this command")))?;
        if must_exist && !p.exists() {
            return Err(Error::Config(format!("[paths] {name} = {} does not exist", p.display())));
        }
        Ok(p)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PathKey {
    TrainDir,
    TestDir,
    NoiseDir,
    CheckpointIn,
    CheckpointOut,
    OutDir,
}

fn span_hint(text: &str, span: Option<std::ops::Range<usize>>) -> String {
    match span {
        Some(r) => {
            let line = text[..r.start.min(text.len())].matches('\n').count() + 1;
            format!(" (line {line})")
        }
        None => String::new(),
    }
}

//! UNet3D, V-Net and MSA-VNet at desk scale.
//!
//! Channel widths double per resolution level starting from
//! `base_features`. With the defaults (base 32, four input modalities, four
//! classes) UNet3D at depth 4 has 5,602,404 parameters and V-Net at depth 3
//! has 3,509,252.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{Activation, Layer, LayerSpec, NetworkGraph, SkipEdge};
use crate::layers::{AttentionGate, Conv3d, PRelu, TransposedConv3d, INSTANCE_NORM_EPS};

/// Input modalities per case (T1, T1Gd, T2, FLAIR).
pub const MODALITIES: usize = 4;

const MAX_DEPTH: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildConfig {
    pub in_channels: usize,
    pub num_classes: usize,
    pub base_features: usize,
    /// Resolution levels, including the bottleneck.
    pub depth: usize,
    /// Insert instance normalization after convolutions.
    pub normalization: bool,
    pub seed: u64,
}

impl BuildConfig {
    pub fn new(num_classes: usize, depth: usize) -> Self {
        Self {
            in_channels: MODALITIES,
            num_classes,
            base_features: 32,
            depth,
            normalization: true,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.num_classes == 0 || self.base_features == 0 {
            return Err(Error::InvalidGraph("channel counts must be positive".into()));
        }
        if !(1..=MAX_DEPTH).contains(&self.depth) {
            return Err(Error::InvalidGraph(format!(
                "depth {} outside 1..={MAX_DEPTH}",
                self.depth
            )));
        }
        Ok(())
    }

    fn width(&self, level: usize) -> usize {
        self.base_features << level
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Architecture {
    Unet3d,
    Vnet,
    MsaVnet,
}

impl Architecture {
    pub const ALL: [Architecture; 3] = [Architecture::Unet3d, Architecture::Vnet, Architecture::MsaVnet];

    pub fn name(self) -> &'static str {
        match self {
            Architecture::Unet3d => "unet3d",
            Architecture::Vnet => "vnet",
            Architecture::MsaVnet => "msavnet",
        }
    }

    pub fn default_depth(self) -> usize {
        match self {
            Architecture::Unet3d => 4,
            Architecture::Vnet | Architecture::MsaVnet => 3,
        }
    }

    pub fn build(self, config: &BuildConfig) -> Result<NetworkGraph> {
        match self {
            Architecture::Unet3d => unet3d(config),
            Architecture::Vnet => vnet(config),
            Architecture::MsaVnet => msavnet(config),
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "unet3d" => Ok(Architecture::Unet3d),
            "vnet" => Ok(Architecture::Vnet),
            "msavnet" => Ok(Architecture::MsaVnet),
            _ => Err(Error::InvalidGraph(format!("unknown architecture '{s}'"))),
        }
    }
}

struct Builder {
    layers: Vec<LayerSpec>,
    skips: Vec<SkipEdge>,
    rng: ChaCha8Rng,
    normalization: bool,
}

impl Builder {
    fn new(config: &BuildConfig) -> Self {
        Self {
            layers: Vec::new(),
            skips: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            normalization: config.normalization,
        }
    }

    /// Index of the most recent layer (the tap point for a later skip).
    fn last(&self) -> usize {
        self.layers.len() - 1
    }

    fn push(&mut self, name: String, layer: Layer) -> usize {
        self.layers.push(LayerSpec::new(name, layer));
        self.last()
    }

    fn conv(&mut self, name: String, i: usize, o: usize, k: usize, stride: usize) -> Result<usize> {
        let pad = if stride == 1 { k / 2 } else { 0 };
        let c = Conv3d::init(i, o, [k; 3], [stride; 3], [pad; 3], &mut self.rng)?;
        Ok(self.push(name, Layer::Conv3d(c)))
    }

    fn up(&mut self, name: String, i: usize, o: usize) -> Result<usize> {
        let c = TransposedConv3d::init(i, o, [2; 3], [2; 3], [0; 3], &mut self.rng)?;
        Ok(self.push(name, Layer::TransposedConv3d(c)))
    }

    fn norm(&mut self, name: String) {
        if self.normalization {
            self.push(name, Layer::Normalization { eps: INSTANCE_NORM_EPS });
        }
    }

    fn relu(&mut self, name: String) -> usize {
        self.push(name, Layer::Activation(Activation::Relu))
    }

    fn prelu(&mut self, name: String, channels: usize) -> usize {
        self.push(name, Layer::Activation(Activation::PRelu(PRelu::new(channels))))
    }

    fn join(&mut self, name: String, layer: Layer, from: usize) -> usize {
        let to = self.push(name.clone(), layer);
        self.skips.push(SkipEdge { name, from, to });
        to
    }

    /// conv → norm → activation; returns the activation's index.
    fn conv_block(&mut self, prefix: &str, i: usize, o: usize, k: usize, prelu: bool) -> Result<usize> {
        self.conv(format!("{prefix}.conv"), i, o, k, 1)?;
        self.norm(format!("{prefix}.norm"));
        Ok(if prelu {
            self.prelu(format!("{prefix}.act"), o)
        } else {
            self.relu(format!("{prefix}.act"))
        })
    }

    /// One conv block added back onto its own input (taken at `input`).
    fn residual(&mut self, prefix: &str, channels: usize, k: usize, input: usize) -> Result<usize> {
        self.conv_block(prefix, channels, channels, k, true)?;
        Ok(self.join(format!("{prefix}.add"), Layer::AddSkip, input))
    }

    fn finish(mut self, name: &str, config: &BuildConfig) -> Result<NetworkGraph> {
        self.conv("head".into(), config.base_features, config.num_classes, 1, 1)?;
        NetworkGraph::new(
            name,
            config.in_channels,
            config.num_classes,
            config.base_features,
            self.layers,
            self.skips,
        )
    }
}

/// Two 3×3×3 conv/norm/ReLU blocks per level, max-pooling down, transposed
/// convolution up, concatenating skips, 1×1×1 head.
pub fn unet3d(config: &BuildConfig) -> Result<NetworkGraph> {
    config.validate()?;
    let mut b = Builder::new(config);
    let mut taps = Vec::new();
    let mut channels = config.in_channels;
    for level in 0..config.depth {
        if level > 0 {
            b.push(format!("enc{level}.pool"), Layer::Downsample);
        }
        let w = config.width(level);
        b.conv_block(&format!("enc{level}.block1"), channels, w, 3, false)?;
        let out = b.conv_block(&format!("enc{level}.block2"), w, w, 3, false)?;
        taps.push(out);
        channels = w;
    }
    for level in (0..config.depth - 1).rev() {
        let w = config.width(level);
        b.up(format!("dec{level}.up"), channels, w)?;
        b.join(format!("dec{level}.skip"), Layer::ConcatSkip, taps[level]);
        b.conv_block(&format!("dec{level}.block1"), 2 * w, w, 3, false)?;
        b.conv_block(&format!("dec{level}.block2"), w, w, 3, false)?;
        channels = w;
    }
    b.finish("unet3d", config)
}

/// 5×5×5 residual blocks with PReLU, 2×2×2 stride-2 convolutions down,
/// transposed convolutions up, additive skips, 1×1×1 head.
pub fn vnet(config: &BuildConfig) -> Result<NetworkGraph> {
    config.validate()?;
    let mut b = Builder::new(config);
    let mut taps = Vec::new();
    let entry = b.conv_block("enc0.in", config.in_channels, config.base_features, 5, true)?;
    taps.push(b.residual("enc0.res", config.base_features, 5, entry)?);
    for level in 1..config.depth {
        let (prev, w) = (config.width(level - 1), config.width(level));
        b.conv(format!("enc{level}.down"), prev, w, 2, 2)?;
        let entry = b.prelu(format!("enc{level}.down.act"), w);
        taps.push(b.residual(&format!("enc{level}.res"), w, 5, entry)?);
    }
    for level in (0..config.depth - 1).rev() {
        let (prev, w) = (config.width(level + 1), config.width(level));
        b.up(format!("dec{level}.up"), prev, w)?;
        b.prelu(format!("dec{level}.up.act"), w);
        let joined = b.join(format!("dec{level}.skip"), Layer::AddSkip, taps[level]);
        b.residual(&format!("dec{level}.res"), w, 5, joined)?;
    }
    b.finish("vnet", config)
}

/// V-Net-style encoder with 3×3×3 residual blocks and max pooling, a
/// central residual block, transposed-convolution decoder and an
/// [`AttentionGate`] on every skip.
pub fn msavnet(config: &BuildConfig) -> Result<NetworkGraph> {
    config.validate()?;
    let mut b = Builder::new(config);
    let mut taps = Vec::new();
    let mut channels = config.in_channels;
    for level in 0..config.depth {
        let stage = if level + 1 == config.depth {
            "center".to_string()
        } else {
            format!("enc{level}")
        };
        if level > 0 {
            b.push(format!("{stage}.pool"), Layer::Downsample);
        }
        let w = config.width(level);
        let entry = b.conv_block(&format!("{stage}.in"), channels, w, 3, true)?;
        taps.push(b.residual(&format!("{stage}.res"), w, 3, entry)?);
        channels = w;
    }
    for level in (0..config.depth - 1).rev() {
        let w = config.width(level);
        b.up(format!("dec{level}.up"), channels, w)?;
        b.prelu(format!("dec{level}.up.act"), w);
        let gate = AttentionGate::init(w, &mut b.rng)?;
        let joined = b.join(format!("dec{level}.gate"), Layer::AttentionGate(gate), taps[level]);
        b.residual(&format!("dec{level}.res"), w, 3, joined)?;
        channels = w;
    }
    b.finish("msavnet", config)
}

pub fn build_unet3d(base_features: usize, num_classes: usize, depth: usize) -> Result<NetworkGraph> {
    unet3d(&BuildConfig {
        base_features,
        ..BuildConfig::new(num_classes, depth)
    })
}

pub fn build_vnet(num_classes: usize) -> Result<NetworkGraph> {
    vnet(&BuildConfig::new(num_classes, Architecture::Vnet.default_depth()))
}

pub fn build_msavnet(num_classes: usize) -> Result<NetworkGraph> {
    msavnet(&BuildConfig::new(num_classes, Architecture::MsaVnet.default_depth()))
}

//! Layer lists with skip edges, shape inference and forward evaluation.

use std::collections::HashMap;
use std::fmt::{self, Write as _};

use crate::error::{Error, Result};
use crate::layers::{
    add, concat_channels, instance_norm, max_pool2, relu, upsample2, AttentionGate, Conv3d, PRelu, TransposedConv3d,
};
use crate::tensor::Tensor5;

#[derive(Debug, Clone, PartialEq)]
pub enum Activation {
    Relu,
    PRelu(PRelu),
}

#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Layer {
    Conv3d(Conv3d),
    TransposedConv3d(TransposedConv3d),
    /// 2×2×2 max pooling.
    Downsample,
    /// Nearest-neighbor ×2.
    Upsample,
    Activation(Activation),
    /// Instance normalization.
    Normalization { eps: f64 },
    /// `current + skip`.
    AddSkip,
    /// `[skip, current]` along channels.
    ConcatSkip,
    /// `current + α ⊙ skip`.
    AttentionGate(AttentionGate),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayerKind {
    Conv3d,
    TransposedConv3d,
    Downsample,
    Upsample,
    Activation,
    Normalization,
    AddSkip,
    ConcatSkip,
    AttentionGate,
}

impl LayerKind {
    pub fn name(self) -> &'static str {
        match self {
            LayerKind::Conv3d => "conv3d",
            LayerKind::TransposedConv3d => "transposed_conv3d",
            LayerKind::Downsample => "downsample",
            LayerKind::Upsample => "upsample",
            LayerKind::Activation => "activation",
            LayerKind::Normalization => "normalization",
            LayerKind::AddSkip => "add_skip",
            LayerKind::ConcatSkip => "concat_skip",
            LayerKind::AttentionGate => "attention_gate",
        }
    }

    /// Layers that consume a skip edge.
    pub fn is_join(self) -> bool {
        matches!(self, LayerKind::AddSkip | LayerKind::ConcatSkip | LayerKind::AttentionGate)
    }
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Layer {
    pub fn kind(&self) -> LayerKind {
        match self {
            Layer::Conv3d(_) => LayerKind::Conv3d,
            Layer::TransposedConv3d(_) => LayerKind::TransposedConv3d,
            Layer::Downsample => LayerKind::Downsample,
            Layer::Upsample => LayerKind::Upsample,
            Layer::Activation(_) => LayerKind::Activation,
            Layer::Normalization { .. } => LayerKind::Normalization,
            Layer::AddSkip => LayerKind::AddSkip,
            Layer::ConcatSkip => LayerKind::ConcatSkip,
            Layer::AttentionGate(_) => LayerKind::AttentionGate,
        }
    }

    pub fn kernel(&self) -> Option<[usize; 3]> {
        match self {
            Layer::Conv3d(c) => Some(c.kernel),
            Layer::TransposedConv3d(c) => Some(c.kernel),
            Layer::Downsample => Some([2; 3]),
            _ => None,
        }
    }

    pub fn stride(&self) -> Option<[usize; 3]> {
        match self {
            Layer::Conv3d(c) => Some(c.stride),
            Layer::TransposedConv3d(c) => Some(c.stride),
            Layer::Downsample | Layer::Upsample => Some([2; 3]),
            _ => None,
        }
    }

    pub fn padding(&self) -> Option<[usize; 3]> {
        match self {
            Layer::Conv3d(c) => Some(c.padding),
            Layer::TransposedConv3d(c) => Some(c.padding),
            _ => None,
        }
    }

    /// Weights and biases (and PReLU slopes).
    pub fn param_count(&self) -> usize {
        match self {
            Layer::Conv3d(c) => c.param_count(),
            Layer::TransposedConv3d(c) => c.param_count(),
            Layer::Activation(Activation::PRelu(p)) => p.slopes.len(),
            Layer::AttentionGate(g) => g.param_count(),
            _ => 0,
        }
    }

    fn output_shape(&self, x: [usize; 5], skip: Option<[usize; 5]>) -> Result<[usize; 5]> {
        let spatial = [x[2], x[3], x[4]];
        let with = |c: usize, s: [usize; 3]| [x[0], c, s[0], s[1], s[2]];
        let check_in = |expected: usize| {
            if x[1] == expected {
                Ok(())
            } else {
                Err(Error::ChannelMismatch {
                    expected,
                    found: x[1],
                })
            }
        };
        let skip = || skip.ok_or_else(|| Error::InvalidGraph("join layer without a skip edge".into()));
        match self {
            Layer::Conv3d(c) => {
                check_in(c.in_channels)?;
                Ok(with(c.out_channels, c.output_spatial(spatial)?))
            }
            Layer::TransposedConv3d(c) => {
                check_in(c.in_channels)?;
                Ok(with(c.out_channels, c.output_spatial(spatial)?))
            }
            Layer::Downsample => {
                if spatial.iter().any(|d| d % 2 != 0) {
                    return Err(Error::Indivisible {
                        dims: spatial,
                        factor: 2,
                    });
                }
                Ok(with(x[1], spatial.map(|d| d / 2)))
            }
            Layer::Upsample => Ok(with(x[1], spatial.map(|d| d * 2))),
            Layer::Activation(Activation::PRelu(p)) => {
                check_in(p.slopes.len())?;
                Ok(x)
            }
            Layer::Activation(Activation::Relu) | Layer::Normalization { .. } => Ok(x),
            Layer::AddSkip => {
                let s = skip()?;
                if s != x {
                    return Err(Error::ShapeMismatch(format!("add skip {s:?} onto {x:?}")));
                }
                Ok(x)
            }
            Layer::AttentionGate(g) => {
                let s = skip()?;
                if s != x || x[1] != g.channels {
                    return Err(Error::ShapeMismatch(format!(
                        "attention gate over {} channels joins {s:?} onto {x:?}",
                        g.channels
                    )));
                }
                Ok(x)
            }
            Layer::ConcatSkip => {
                let s = skip()?;
                if s[0] != x[0] || s[2..] != x[2..] {
                    return Err(Error::ShapeMismatch(format!("concat skip {s:?} with {x:?}")));
                }
                Ok([x[0], x[1] + s[1], x[2], x[3], x[4]])
            }
        }
    }

    fn apply(&self, x: &Tensor5, skip: Option<&Tensor5>) -> Result<Tensor5> {
        let skip = || skip.ok_or_else(|| Error::InvalidGraph("join layer without a skip edge".into()));
        match self {
            Layer::Conv3d(c) => c.forward(x),
            Layer::TransposedConv3d(c) => c.forward(x),
            Layer::Downsample => max_pool2(x),
            Layer::Upsample => Ok(upsample2(x)),
            Layer::Activation(Activation::Relu) => Ok(relu(x)),
            Layer::Activation(Activation::PRelu(p)) => p.forward(x),
            Layer::Normalization { eps } => Ok(instance_norm(x, *eps)),
            Layer::AddSkip => add(x, skip()?),
            Layer::ConcatSkip => concat_channels(skip()?, x),
            Layer::AttentionGate(g) => g.forward(skip()?, x),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerSpec {
    pub name: String,
    pub layer: Layer,
}

impl LayerSpec {
    pub fn new(name: impl Into<String>, layer: Layer) -> Self {
        Self {
            name: name.into(),
            layer,
        }
    }

    pub fn kind(&self) -> LayerKind {
        self.layer.kind()
    }
}

/// The output of layer `from` is carried to the join layer `to`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkipEdge {
    pub name: String,
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGraph {
    name: String,
    in_channels: usize,
    num_classes: usize,
    base_features: usize,
    layers: Vec<LayerSpec>,
    skips: Vec<SkipEdge>,
}

impl NetworkGraph {
    /// Checks that skips point forward into join layers (one per join) and
    /// that shapes line up, ending in `num_classes` channels.
    pub fn new(
        name: impl Into<String>,
        in_channels: usize,
        num_classes: usize,
        base_features: usize,
        layers: Vec<LayerSpec>,
        skips: Vec<SkipEdge>,
    ) -> Result<Self> {
        let graph = Self {
            name: name.into(),
            in_channels,
            num_classes,
            base_features,
            layers,
            skips,
        };
        graph.validate()?;
        Ok(graph)
    }

    /// A graph with no layers; its forward pass is the identity.
    pub fn empty(in_channels: usize) -> Self {
        Self {
            name: "empty".into(),
            in_channels,
            num_classes: in_channels,
            base_features: 0,
            layers: Vec::new(),
            skips: Vec::new(),
        }
    }

    fn validate(&self) -> Result<()> {
        let mut incoming = vec![0usize; self.layers.len()];
        for s in &self.skips {
            if s.from >= s.to || s.to >= self.layers.len() {
                return Err(Error::InvalidGraph(format!(
                    "skip '{}' runs from layer {} to {}",
                    s.name, s.from, s.to
                )));
            }
            if !self.layers[s.to].kind().is_join() {
                return Err(Error::InvalidGraph(format!(
                    "skip '{}' ends at {} layer '{}'",
                    s.name,
                    self.layers[s.to].kind(),
                    self.layers[s.to].name
                )));
            }
            incoming[s.to] += 1;
        }
        for (l, n) in self.layers.iter().zip(&incoming) {
            if l.kind().is_join() && *n != 1 {
                return Err(Error::InvalidGraph(format!("join layer '{}' has {n} skip edges", l.name)));
            }
        }
        let factor = self.divisor();
        let probe = [1, self.in_channels, factor[0], factor[1], factor[2]];
        let shapes = self.output_shapes(probe)?;
        let out = shapes.last().copied().unwrap_or(probe);
        if out[1] != self.num_classes {
            return Err(Error::InvalidGraph(format!(
                "final layer has {} channels, expected {} classes",
                out[1], self.num_classes
            )));
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn base_features(&self) -> usize {
        self.base_features
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn skips(&self) -> &[SkipEdge] {
        &self.skips
    }

    /// The skip edge feeding layer `to`, if any.
    pub fn skip_into(&self, to: usize) -> Option<&SkipEdge> {
        self.skips.iter().find(|s| s.to == to)
    }

    /// Spatial dims of a valid input must be multiples of this, per axis.
    pub fn divisor(&self) -> [usize; 3] {
        let mut f = [1usize; 3];
        for l in &self.layers {
            match &l.layer {
                Layer::Downsample => f = f.map(|v| v * 2),
                Layer::Conv3d(c) => f = std::array::from_fn(|a| f[a] * c.stride[a]),
                _ => {}
            }
        }
        f
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.layer.param_count()).sum()
    }

    /// Output shape of every layer for an input of shape `input`.
    pub fn output_shapes(&self, input: [usize; 5]) -> Result<Vec<[usize; 5]>> {
        let mut shapes: Vec<[usize; 5]> = Vec::with_capacity(self.layers.len());
        let mut current = input;
        for (i, l) in self.layers.iter().enumerate() {
            let skip = self.skip_into(i).map(|s| shapes[s.from]);
            current = l.layer.output_shape(current, skip).map_err(|e| match e {
                Error::InvalidGraph(m) | Error::ShapeMismatch(m) => {
                    Error::ShapeMismatch(format!("layer {i} '{}': {m}", l.name))
                }
                other => other,
            })?;
            shapes.push(current);
        }
        Ok(shapes)
    }

    fn check_input(&self, input: &Tensor5) -> Result<()> {
        if input.channels() != self.in_channels {
            return Err(Error::ChannelMismatch {
                expected: self.in_channels,
                found: input.channels(),
            });
        }
        let factor = self.divisor();
        let dims = input.spatial();
        if let Some(a) = (0..3).find(|&a| !dims[a].is_multiple_of(factor[a])) {
            return Err(Error::Indivisible {
                dims,
                factor: factor[a],
            });
        }
        Ok(())
    }

    pub fn forward(&self, input: &Tensor5) -> Result<Tensor5> {
        self.check_input(input)?;
        let mut uses: HashMap<usize, usize> = HashMap::new();
        for s in &self.skips {
            *uses.entry(s.from).or_default() += 1;
        }
        let mut saved: HashMap<usize, Tensor5> = HashMap::new();
        let mut current = input.clone();
        for (i, l) in self.layers.iter().enumerate() {
            let out = match self.skip_into(i) {
                Some(edge) => {
                    let remaining = uses.get_mut(&edge.from).expect("counted above");
                    *remaining -= 1;
                    let skip = if *remaining == 0 {
                        saved.remove(&edge.from).expect("tap saved before its join")
                    } else {
                        saved[&edge.from].clone()
                    };
                    l.layer.apply(&current, Some(&skip))?
                }
                None => l.layer.apply(&current, None)?,
            };
            if uses.get(&i).is_some_and(|&n| n > 0) {
                saved.insert(i, out.clone());
            }
            current = out;
        }
        Ok(current)
    }

    /// The same graph with every attention gate replaced by a plain additive
    /// skip.
    pub fn without_attention(&self) -> NetworkGraph {
        let mut g = self.clone();
        for l in &mut g.layers {
            if let Layer::AttentionGate(_) = l.layer {
                l.layer = Layer::AddSkip;
            }
        }
        g
    }

    /// Forces every attention coefficient to exactly 1.
    pub fn force_open_gates(&mut self) {
        for l in &mut self.layers {
            if let Layer::AttentionGate(g) = &mut l.layer {
                g.force_open();
            }
        }
    }

    /// Plain-text layer table for an input of shape `input`.
    pub fn summary(&self, input: [usize; 5]) -> Result<String> {
        let shapes = self.output_shapes(input)?;
        let triplet = |t: Option<[usize; 3]>| t.map_or_else(|| "-".to_string(), |t| format!("{}x{}x{}", t[0], t[1], t[2]));
        let mut out = String::new();
        writeln!(out, "{} (input {:?})", self.name, input).unwrap();
        writeln!(
            out,
            "{:>4}  {:<30} {:<18} {:>7} {:>7} {:<22} {:>10}",
            "#", "layer", "kind", "kernel", "stride", "output", "params"
        )
        .unwrap();
        for (i, (l, s)) in self.layers.iter().zip(&shapes).enumerate() {
            let name = match self.skip_into(i) {
                Some(edge) => format!("{} <- {}", l.name, self.layers[edge.from].name),
                None => l.name.clone(),
            };
            writeln!(
                out,
                "{:>4}  {:<30} {:<18} {:>7} {:>7} {:<22} {:>10}",
                i,
                name,
                l.kind().name(),
                triplet(l.layer.kernel()),
                triplet(l.layer.stride()),
                format!("{s:?}"),
                l.layer.param_count()
            )
            .unwrap();
        }
        writeln!(out, "total parameters: {}", self.param_count()).unwrap();
        Ok(out)
    }
}

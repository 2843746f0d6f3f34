//! Elastic architecture spaces and their lowering to generalized matmuls.
//!
//! Every layer, convolution, projection or attention product, is described
//! by four extents: channel groups `G`, resolution `I` (batch × output
//! positions), reduction `Ic` (input channels per group × kernel window) and
//! output channels per group `Oc`. Its MAC count is `G·I·Ic·Oc`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng;

/// Simulated batch size.
pub const BATCH: u64 = 1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WorkloadError {
    #[error("layer `{name}`: {channels} channels are not divisible into {groups} groups")]
    NotDivisible {
        name: String,
        channels: u64,
        groups: u64,
    },
    #[error("layer `{name}`: dimension `{dim}` must be at least 1")]
    ZeroDimension { name: String, dim: &'static str },
    #[error("layer `{name}`: element size {bytes} is not 1, 2 or 4 bytes")]
    ElemBytes { name: String, bytes: u32 },
    #[error("option list `{0}` is empty")]
    EmptyOptions(&'static str),
    #[error("option list `{0}` is not strictly ascending")]
    UnsortedOptions(&'static str),
    #[error("space family {family} does not match its layout kind")]
    FamilyMismatch { family: Family },
    #[error("architecture kind does not match the {family} space")]
    ArchMismatch { family: Family },
    #[error("`{var}` = {value} is not an option of the space")]
    NotAnOption { var: String, value: f64 },
    #[error("expected {expected} stages, got {got}")]
    StageCount { expected: usize, got: usize },
    #[error("stage {stage}: {got} block entries for depth {depth}")]
    BlockCount { stage: usize, depth: u32, got: usize },
    #[error("space must declare at least one stage")]
    NoStages,
    #[error("invalid space parameter: {0}")]
    Parameter(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    #[serde(alias = "cnn_mbv3", alias = "mobilenetv3")]
    Mbv3,
    #[serde(alias = "cnn_resnet", alias = "resnet50")]
    Resnet,
    #[serde(alias = "VIT")]
    Vit,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Mbv3, Family::Resnet, Family::Vit];

    pub fn name(self) -> &'static str {
        match self {
            Family::Mbv3 => "mbv3",
            Family::Resnet => "resnet",
            Family::Vit => "vit",
        }
    }

    pub fn parse(s: &str) -> Option<Family> {
        match s.to_ascii_lowercase().as_str() {
            "mbv3" | "mobilenetv3" | "cnn_mbv3" => Some(Family::Mbv3),
            "resnet" | "resnet50" | "cnn_resnet" => Some(Family::Resnet),
            "vit" => Some(Family::Vit),
            _ => None,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One generalized-matmul layer.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    /// Channel groups `G`.
    pub groups: u64,
    /// Resolution `I`: batch × output positions (or tokens).
    pub resolution: u64,
    /// Reduction `Ic`: input channels per group × kernel window.
    pub reduction: u64,
    /// Output channels per group `Oc`.
    pub out_channels: u64,
    pub elem_bytes: u32,
}

impl LayerSpec {
    pub fn new(
        name: impl Into<String>,
        groups: u64,
        resolution: u64,
        reduction: u64,
        out_channels: u64,
        elem_bytes: u32,
    ) -> Result<Self, WorkloadError> {
        let layer = LayerSpec {
            name: name.into(),
            groups,
            resolution,
            reduction,
            out_channels,
            elem_bytes,
        };
        layer.validate()?;
        Ok(layer)
    }

    pub fn validate(&self) -> Result<(), WorkloadError> {
        for (dim, v) in [
            ("G", self.groups),
            ("I", self.resolution),
            ("Ic", self.reduction),
            ("Oc", self.out_channels),
        ] {
            if v == 0 {
                return Err(WorkloadError::ZeroDimension {
                    name: self.name.clone(),
                    dim,
                });
            }
        }
        if !matches!(self.elem_bytes, 1 | 2 | 4) {
            return Err(WorkloadError::ElemBytes {
                name: self.name.clone(),
                bytes: self.elem_bytes,
            });
        }
        Ok(())
    }

    pub fn macs(&self) -> u64 {
        self.groups * self.resolution * self.reduction * self.out_channels
    }

    /// Weight elements, `G·Ic·Oc`.
    pub fn weight_elems(&self) -> u64 {
        self.groups * self.reduction * self.out_channels
    }

    pub fn ifm_bytes(&self) -> u64 {
        self.groups * self.resolution * self.reduction * u64::from(self.elem_bytes)
    }

    pub fn weight_bytes(&self) -> u64 {
        self.weight_elems() * u64::from(self.elem_bytes)
    }

    pub fn ofm_bytes(&self) -> u64 {
        self.groups * self.resolution * self.out_channels * u64::from(self.elem_bytes)
    }

    /// Bytes of IFM, weights and OFM, each counted once.
    pub fn unique_bytes(&self) -> u64 {
        self.ifm_bytes() + self.weight_bytes() + self.ofm_bytes()
    }
}

/// A 2-D convolution with "same" padding.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Conv2d {
    pub name: String,
    pub in_h: u64,
    pub in_w: u64,
    pub in_channels: u64,
    pub out_channels: u64,
    pub kernel: u64,
    pub stride: u64,
    pub groups: u64,
}

impl Conv2d {
    pub fn out_hw(&self) -> (u64, u64) {
        (self.in_h.div_ceil(self.stride), self.in_w.div_ceil(self.stride))
    }

    pub fn lower(&self, batch: u64, elem_bytes: u32) -> Result<LayerSpec, WorkloadError> {
        if self.groups == 0 || self.stride == 0 || self.kernel == 0 {
            return Err(WorkloadError::ZeroDimension {
                name: self.name.clone(),
                dim: "groups/stride/kernel",
            });
        }
        for channels in [self.in_channels, self.out_channels] {
            if channels % self.groups != 0 {
                return Err(WorkloadError::NotDivisible {
                    name: self.name.clone(),
                    channels,
                    groups: self.groups,
                });
            }
        }
        let (oh, ow) = self.out_hw();
        LayerSpec::new(
            self.name.clone(),
            self.groups,
            batch * oh * ow,
            (self.in_channels / self.groups) * self.kernel * self.kernel,
            self.out_channels / self.groups,
            elem_bytes,
        )
    }
}

/// A dense projection applied to `tokens` rows.
pub fn linear(
    name: impl Into<String>,
    tokens: u64,
    in_features: u64,
    out_features: u64,
    elem_bytes: u32,
) -> Result<LayerSpec, WorkloadError> {
    LayerSpec::new(name, 1, tokens, in_features, out_features, elem_bytes)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockKind {
    /// 1×1 expand → k×k depthwise → 1×1 project; width option is the
    /// expansion ratio.
    InvertedResidual,
    /// 1×1 reduce → k×k → 1×1 expand; width option multiplies the stage's
    /// bottleneck channels.
    Bottleneck,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stem {
    pub channels: u32,
    pub kernel: u32,
    pub stride: u32,
    /// Stride of the pooling that follows the stem (1 = none). Pooling
    /// itself is not costed.
    #[serde(default = "one")]
    pub pool_stride: u32,
}

fn one() -> u32 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub out_channels: u32,
    pub stride: u32,
    /// Bottleneck channels at width factor 1.0 (bottleneck blocks only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mid_channels: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CnnSpace {
    pub block: BlockKind,
    pub kernel_options: Vec<u32>,
    pub width_options: Vec<f64>,
    pub depth_options: Vec<u32>,
    pub stem: Stem,
    pub stages: Vec<Stage>,
    /// 1×1 convolution applied before global pooling.
    #[serde(default)]
    pub head_conv: Option<u32>,
    /// Hidden classifier widths before the final projection.
    #[serde(default)]
    pub head_hidden: Vec<u32>,
}

impl CnnSpace {
    pub fn max_depth(&self) -> u32 {
        self.depth_options.last().copied().unwrap_or(0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VitSpace {
    pub layer_options: Vec<u32>,
    pub head_options: Vec<u32>,
    pub intermediate_options: Vec<u32>,
    pub hidden_dim: u32,
    pub head_dim: u32,
    pub patch_size: u32,
    #[serde(default = "yes")]
    pub class_token: bool,
}

fn yes() -> bool {
    true
}

impl VitSpace {
    pub fn tokens(&self, input_resolution: u32) -> u64 {
        let side = u64::from(input_resolution.div_ceil(self.patch_size));
        side * side + u64::from(self.class_token)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SpaceBody {
    Cnn(CnnSpace),
    Vit(VitSpace),
}

/// An elastic architecture space: option lists plus the fixed skeleton
/// they are applied to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchSpace {
    pub family: Family,
    #[serde(default = "one")]
    pub elem_bytes: u32,
    pub input_resolution: u32,
    pub num_classes: u32,
    pub body: SpaceBody,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageChoice {
    pub depth: u32,
    /// Kernel size of each active block (`len == depth`).
    pub kernels: Vec<u32>,
    /// Width factor of each active block (`len == depth`).
    pub widths: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VitChoice {
    pub num_layers: u32,
    pub num_heads: u32,
    pub intermediate_dim: u32,
}

/// One sampled sub-network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SubnetArch {
    Cnn { stages: Vec<StageChoice> },
    Vit(VitChoice),
}

fn check_options<T: PartialOrd>(name: &'static str, opts: &[T]) -> Result<(), WorkloadError> {
    if opts.is_empty() {
        return Err(WorkloadError::EmptyOptions(name));
    }
    if opts.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(WorkloadError::UnsortedOptions(name));
    }
    Ok(())
}

fn member<T: PartialEq + Copy + Into<f64>>(
    var: impl FnOnce() -> String,
    opts: &[T],
    value: T,
) -> Result<(), WorkloadError> {
    if opts.contains(&value) {
        Ok(())
    } else {
        Err(WorkloadError::NotAnOption {
            var: var(),
            value: value.into(),
        })
    }
}

fn pick<T: Copy, R: Rng + ?Sized>(rng: &mut R, opts: &[T]) -> T {
    opts[rng.gen_range(0..opts.len())]
}

/// Rounds to a multiple of 8, never dropping more than 10 % below `value`.
fn make_divisible(value: f64) -> u64 {
    let v = ((value + 4.0) as u64 / 8 * 8).max(8);
    if (v as f64) < 0.9 * value {
        v + 8
    } else {
        v
    }
}

impl ArchSpace {
    /// MobileNetV3-like space: inverted-residual blocks, elastic kernel,
    /// expansion ratio and per-stage depth.
    pub fn mbv3() -> Self {
        let stage = |out_channels, stride| Stage {
            out_channels,
            stride,
            mid_channels: None,
        };
        ArchSpace {
            family: Family::Mbv3,
            elem_bytes: 1,
            input_resolution: 224,
            num_classes: 1000,
            body: SpaceBody::Cnn(CnnSpace {
                block: BlockKind::InvertedResidual,
                kernel_options: alloc::vec![3, 5, 7],
                width_options: alloc::vec![3.0, 4.0, 6.0],
                depth_options: alloc::vec![2, 3, 4],
                stem: Stem {
                    channels: 16,
                    kernel: 3,
                    stride: 2,
                    pool_stride: 1,
                },
                stages: alloc::vec![
                    stage(24, 2),
                    stage(40, 2),
                    stage(80, 2),
                    stage(112, 1),
                    stage(160, 2),
                ],
                head_conv: Some(960),
                head_hidden: alloc::vec![1280],
            }),
        }
    }

    /// ResNet-50-like space: bottleneck blocks, elastic middle-conv kernel,
    /// bottleneck channel multiplier and per-stage depth.
    pub fn resnet50() -> Self {
        let stage = |mid: u32, stride| Stage {
            out_channels: mid * 4,
            stride,
            mid_channels: Some(mid),
        };
        ArchSpace {
            family: Family::Resnet,
            elem_bytes: 1,
            input_resolution: 224,
            num_classes: 1000,
            body: SpaceBody::Cnn(CnnSpace {
                block: BlockKind::Bottleneck,
                kernel_options: alloc::vec![3, 5, 7],
                width_options: alloc::vec![0.65, 0.8, 1.0],
                depth_options: alloc::vec![2, 3, 4],
                stem: Stem {
                    channels: 64,
                    kernel: 7,
                    stride: 2,
                    pool_stride: 2,
                },
                stages: alloc::vec![stage(64, 1), stage(128, 2), stage(256, 2), stage(512, 2)],
                head_conv: None,
                head_hidden: Vec::new(),
            }),
        }
    }

    /// ViT-B-like space: elastic encoder depth, head count and MLP width.
    pub fn vit_base() -> Self {
        ArchSpace {
            family: Family::Vit,
            elem_bytes: 1,
            input_resolution: 224,
            num_classes: 1000,
            body: SpaceBody::Vit(VitSpace {
                layer_options: alloc::vec![10, 11, 12],
                head_options: alloc::vec![6, 8, 12],
                intermediate_options: alloc::vec![2048, 2560, 3072],
                hidden_dim: 768,
                head_dim: 64,
                patch_size: 16,
                class_token: true,
            }),
        }
    }

    pub fn preset(family: Family) -> Self {
        match family {
            Family::Mbv3 => Self::mbv3(),
            Family::Resnet => Self::resnet50(),
            Family::Vit => Self::vit_base(),
        }
    }

    /// Checks the space's own invariants.
    pub fn validate(&self) -> Result<(), WorkloadError> {
        if !matches!(self.elem_bytes, 1 | 2 | 4) {
            return Err(WorkloadError::Parameter("elem_bytes must be 1, 2 or 4"));
        }
        if self.input_resolution == 0 || self.num_classes == 0 {
            return Err(WorkloadError::Parameter(
                "input_resolution and num_classes must be positive",
            ));
        }
        match (&self.body, self.family) {
            (SpaceBody::Vit(v), Family::Vit) => {
                check_options("layer_options", &v.layer_options)?;
                check_options("head_options", &v.head_options)?;
                check_options("intermediate_options", &v.intermediate_options)?;
                if v.layer_options[0] == 0 || v.head_options[0] == 0 || v.intermediate_options[0] == 0 {
                    return Err(WorkloadError::Parameter("ViT options must be positive"));
                }
                if v.hidden_dim == 0 || v.head_dim == 0 || v.patch_size == 0 {
                    return Err(WorkloadError::Parameter(
                        "hidden_dim, head_dim and patch_size must be positive",
                    ));
                }
            }
            (SpaceBody::Cnn(c), Family::Mbv3 | Family::Resnet) => {
                check_options("kernel_options", &c.kernel_options)?;
                check_options("width_options", &c.width_options)?;
                check_options("depth_options", &c.depth_options)?;
                if c.stages.is_empty() {
                    return Err(WorkloadError::NoStages);
                }
                if c.kernel_options[0] == 0 || c.depth_options[0] == 0 || c.width_options[0] <= 0.0 {
                    return Err(WorkloadError::Parameter("CNN options must be positive"));
                }
                if c.stem.channels == 0 || c.stem.kernel == 0 || c.stem.stride == 0 {
                    return Err(WorkloadError::Parameter("stem fields must be positive"));
                }
                if c.stem.pool_stride == 0 {
                    return Err(WorkloadError::Parameter("stem pool_stride must be positive"));
                }
                for s in &c.stages {
                    if s.out_channels == 0 || s.stride == 0 {
                        return Err(WorkloadError::Parameter(
                            "stage out_channels and stride must be positive",
                        ));
                    }
                    if c.block == BlockKind::Bottleneck && s.mid_channels.unwrap_or(0) == 0 {
                        return Err(WorkloadError::Parameter(
                            "bottleneck stages need positive mid_channels",
                        ));
                    }
                }
            }
            _ => return Err(WorkloadError::FamilyMismatch { family: self.family }),
        }
        Ok(())
    }

    /// Checks that every field of `subnet` is a member of this space.
    pub fn check(&self, subnet: &SubnetArch) -> Result<(), WorkloadError> {
        match (&self.body, subnet) {
            (SpaceBody::Vit(v), SubnetArch::Vit(c)) => {
                member(|| "num_layers".into(), &v.layer_options, c.num_layers)?;
                member(|| "num_heads".into(), &v.head_options, c.num_heads)?;
                member(
                    || "intermediate_dim".into(),
                    &v.intermediate_options,
                    c.intermediate_dim,
                )
            }
            (SpaceBody::Cnn(space), SubnetArch::Cnn { stages }) => {
                if stages.len() != space.stages.len() {
                    return Err(WorkloadError::StageCount {
                        expected: space.stages.len(),
                        got: stages.len(),
                    });
                }
                for (si, st) in stages.iter().enumerate() {
                    member(|| format!("s{si}.depth"), &space.depth_options, st.depth)?;
                    if st.kernels.len() != st.depth as usize || st.widths.len() != st.depth as usize {
                        return Err(WorkloadError::BlockCount {
                            stage: si,
                            depth: st.depth,
                            got: st.kernels.len().max(st.widths.len()),
                        });
                    }
                    for (bi, (&k, &w)) in st.kernels.iter().zip(&st.widths).enumerate() {
                        member(|| format!("s{si}.b{bi}.kernel"), &space.kernel_options, k)?;
                        member(|| format!("s{si}.b{bi}.width"), &space.width_options, w)?;
                    }
                }
                Ok(())
            }
            _ => Err(WorkloadError::ArchMismatch { family: self.family }),
        }
    }

    /// Uniform, independent choice for every elastic variable.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SubnetArch {
        match &self.body {
            SpaceBody::Vit(v) => SubnetArch::Vit(VitChoice {
                num_layers: pick(rng, &v.layer_options),
                num_heads: pick(rng, &v.head_options),
                intermediate_dim: pick(rng, &v.intermediate_options),
            }),
            SpaceBody::Cnn(c) => SubnetArch::Cnn {
                stages: c
                    .stages
                    .iter()
                    .map(|_| {
                        let depth = pick(rng, &c.depth_options);
                        let mut kernels = Vec::with_capacity(depth as usize);
                        let mut widths = Vec::with_capacity(depth as usize);
                        for _ in 0..depth {
                            kernels.push(pick(rng, &c.kernel_options));
                            widths.push(pick(rng, &c.width_options));
                        }
                        StageChoice {
                            depth,
                            kernels,
                            widths,
                        }
                    })
                    .collect(),
            },
        }
    }

    /// Builds the sub-network that takes option `pick(len)` of every list.
    fn uniform_choice(&self, pick: impl Fn(usize) -> usize) -> SubnetArch {
        match &self.body {
            SpaceBody::Vit(v) => SubnetArch::Vit(VitChoice {
                num_layers: v.layer_options[pick(v.layer_options.len())],
                num_heads: v.head_options[pick(v.head_options.len())],
                intermediate_dim: v.intermediate_options[pick(v.intermediate_options.len())],
            }),
            SpaceBody::Cnn(c) => {
                let depth = c.depth_options[pick(c.depth_options.len())];
                let k = c.kernel_options[pick(c.kernel_options.len())];
                let w = c.width_options[pick(c.width_options.len())];
                SubnetArch::Cnn {
                    stages: c
                        .stages
                        .iter()
                        .map(|_| StageChoice {
                            depth,
                            kernels: alloc::vec![k; depth as usize],
                            widths: alloc::vec![w; depth as usize],
                        })
                        .collect(),
                }
            }
        }
    }

    pub fn minimal(&self) -> SubnetArch {
        self.uniform_choice(|_| 0)
    }

    pub fn maximal(&self) -> SubnetArch {
        self.uniform_choice(|n| n - 1)
    }

    /// The static, canonical architecture: the middle option of every list.
    pub fn canonical(&self) -> SubnetArch {
        self.uniform_choice(|n| n / 2)
    }

    /// Lowers `subnet` to its ordered layer list.
    pub fn lower(&self, subnet: &SubnetArch) -> Result<Vec<LayerSpec>, WorkloadError> {
        self.check(subnet)?;
        match (&self.body, subnet) {
            (SpaceBody::Vit(v), SubnetArch::Vit(c)) => self.lower_vit(v, c),
            (SpaceBody::Cnn(space), SubnetArch::Cnn { stages }) => self.lower_cnn(space, stages),
            _ => Err(WorkloadError::ArchMismatch { family: self.family }),
        }
    }

    fn lower_vit(&self, v: &VitSpace, c: &VitChoice) -> Result<Vec<LayerSpec>, WorkloadError> {
        let b = self.elem_bytes;
        let tokens = BATCH * v.tokens(self.input_resolution);
        let hidden = u64::from(v.hidden_dim);
        let head_dim = u64::from(v.head_dim);
        let heads = u64::from(c.num_heads);
        let inner = heads * head_dim;
        let inter = u64::from(c.intermediate_dim);
        let res = u64::from(self.input_resolution);

        let mut layers = Vec::with_capacity(2 + 6 * c.num_layers as usize);
        layers.push(
            Conv2d {
                name: "patch_embed".into(),
                in_h: res,
                in_w: res,
                in_channels: 3,
                out_channels: hidden,
                kernel: u64::from(v.patch_size),
                stride: u64::from(v.patch_size),
                groups: 1,
            }
            .lower(BATCH, b)?,
        );
        for l in 0..c.num_layers {
            layers.push(linear(format!("l{l}.qkv"), tokens, hidden, 3 * inner, b)?);
            layers.push(LayerSpec::new(
                format!("l{l}.scores"),
                heads,
                tokens,
                head_dim,
                tokens,
                b,
            )?);
            layers.push(LayerSpec::new(
                format!("l{l}.context"),
                heads,
                tokens,
                tokens,
                head_dim,
                b,
            )?);
            layers.push(linear(format!("l{l}.proj"), tokens, inner, hidden, b)?);
            layers.push(linear(format!("l{l}.fc1"), tokens, hidden, inter, b)?);
            layers.push(linear(format!("l{l}.fc2"), tokens, inter, hidden, b)?);
        }
        layers.push(linear("head", BATCH, hidden, u64::from(self.num_classes), b)?);
        Ok(layers)
    }

    fn lower_cnn(&self, space: &CnnSpace, stages: &[StageChoice]) -> Result<Vec<LayerSpec>, WorkloadError> {
        let b = self.elem_bytes;
        let mut layers = Vec::new();
        let mut h = u64::from(self.input_resolution);
        let mut conv = |name: String, h: u64, cin: u64, cout: u64, k: u64, s: u64, g: u64| {
            let c = Conv2d {
                name,
                in_h: h,
                in_w: h,
                in_channels: cin,
                out_channels: cout,
                kernel: k,
                stride: s,
                groups: g,
            };
            let out = c.out_hw().0;
            layers.push(c.lower(BATCH, b)?);
            Ok::<u64, WorkloadError>(out)
        };

        let stem = &space.stem;
        let mut cin = u64::from(stem.channels);
        h = conv(
            "stem".into(),
            h,
            3,
            cin,
            u64::from(stem.kernel),
            u64::from(stem.stride),
            1,
        )?;
        h = h.div_ceil(u64::from(stem.pool_stride));

        for (si, (layout, choice)) in space.stages.iter().zip(stages).enumerate() {
            let cout = u64::from(layout.out_channels);
            for bi in 0..choice.depth as usize {
                let stride = if bi == 0 { u64::from(layout.stride) } else { 1 };
                let k = u64::from(choice.kernels[bi]);
                let w = choice.widths[bi];
                let tag = format!("s{si}.b{bi}");
                match space.block {
                    BlockKind::InvertedResidual => {
                        let mid = libm::round(cin as f64 * w) as u64;
                        conv(format!("{tag}.expand"), h, cin, mid, 1, 1, 1)?;
                        let h2 = conv(format!("{tag}.dw"), h, mid, mid, k, stride, mid)?;
                        conv(format!("{tag}.project"), h2, mid, cout, 1, 1, 1)?;
                        h = h2;
                    }
                    BlockKind::Bottleneck => {
                        let base = f64::from(layout.mid_channels.unwrap_or(layout.out_channels));
                        let mid = make_divisible(base * w);
                        conv(format!("{tag}.reduce"), h, cin, mid, 1, 1, 1)?;
                        let h2 = conv(format!("{tag}.conv"), h, mid, mid, k, stride, 1)?;
                        conv(format!("{tag}.expand"), h2, mid, cout, 1, 1, 1)?;
                        if bi == 0 && (stride != 1 || cin != cout) {
                            conv(format!("{tag}.downsample"), h, cin, cout, 1, stride, 1)?;
                        }
                        h = h2;
                    }
                }
                cin = cout;
            }
        }

        if let Some(hc) = space.head_conv {
            let hc = u64::from(hc);
            conv("head_conv".into(), h, cin, hc, 1, 1, 1)?;
            cin = hc;
        }
        for (i, &hidden) in space.head_hidden.iter().enumerate() {
            let hidden = u64::from(hidden);
            layers.push(linear(format!("fc{i}"), BATCH, cin, hidden, b)?);
            cin = hidden;
        }
        layers.push(linear("classifier", BATCH, cin, u64::from(self.num_classes), b)?);
        Ok(layers)
    }
}

/// Samples a sub-network; deterministic in `seed`.
pub fn sample_subnet(space: &ArchSpace, seed: u64) -> SubnetArch {
    space.sample(&mut rng::seeded(seed))
}

pub fn lower_to_layers(space: &ArchSpace, subnet: &SubnetArch) -> Result<Vec<LayerSpec>, WorkloadError> {
    space.lower(subnet)
}

pub fn total_macs(layers: &[LayerSpec]) -> u64 {
    layers.iter().map(LayerSpec::macs).sum()
}

pub fn total_params(layers: &[LayerSpec]) -> u64 {
    layers.iter().map(LayerSpec::weight_elems).sum()
}

pub fn count_macs(space: &ArchSpace, subnet: &SubnetArch) -> Result<u64, WorkloadError> {
    Ok(total_macs(&space.lower(subnet)?))
}

pub fn count_params(space: &ArchSpace, subnet: &SubnetArch) -> Result<u64, WorkloadError> {
    Ok(total_params(&space.lower(subnet)?))
}

//! One-hot genomes over (sub-network, hardware configuration) pairs.
//!
//! A genome is a fixed-length bit vector split into segments, one per
//! elastic variable, each as long as that variable's option list.
//! Architecture segments come first:
//!
//! - CNN spaces, per stage: `depth`, then `kernel` and `width` for every
//!   block up to the maximum depth. Blocks beyond the chosen depth are
//!   all-zero.
//! - ViT spaces: `num_layers`, `num_heads`, `intermediate_dim`.
//!
//! The eight hardware segments follow in [`HwParam::ALL`] order. When a
//! side of the pair is frozen ([`Scope`]), its segments still appear but
//! always hold the static choice.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::cim::{ConfigSpace, HardwareConfig, HwParam, Violation};
use crate::rng::{self, Fnv64};
use crate::workload::{ArchSpace, Family, SpaceBody, StageChoice, SubnetArch, VitChoice, WorkloadError};

pub const DEFAULT_MUTATION_RATE: f64 = 0.1;

/// Attempts at re-drawing the budget-coupled hardware variables before a
/// child falls back to its parent's hardware.
pub const REPAIR_RETRIES: usize = 256;

/// Hardware variables tied together by the compute and memory budgets.
const COUPLED: [HwParam; 4] = [
    HwParam::L1NumChild,
    HwParam::MaNumChild,
    HwParam::MaCompPerCore,
    HwParam::MaMemSize,
];

/// Which sides of the pair are elastic.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Scope {
    pub arch: bool,
    pub hardware: bool,
}

impl Scope {
    pub const JOINT: Scope = Scope {
        arch: true,
        hardware: true,
    };
}

/// A one-hot genome. Serialized as a string of `0`/`1`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Genome(Vec<u8>);

impl Genome {
    pub fn from_bits(bits: Vec<u8>) -> Result<Self, CodecError> {
        if let Some(&b) = bits.iter().find(|&&b| b > 1) {
            return Err(CodecError::BadBit(b as char));
        }
        Ok(Genome(bits))
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Bits as regression features.
    pub fn features(&self) -> Vec<f64> {
        self.0.iter().map(|&b| f64::from(b)).collect()
    }

    pub fn to_bit_string(&self) -> String {
        self.0.iter().map(|&b| if b == 1 { '1' } else { '0' }).collect()
    }

    pub fn parse(s: &str) -> Result<Self, CodecError> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(CodecError::BadBit(other)),
            })
            .collect::<Result<Vec<u8>, _>>()
            .map(Genome)
    }

    /// Short stable identifier.
    pub fn id(&self) -> String {
        let mut h = Fnv64::default();
        h.write(&self.0);
        format!("{:016x}", h.finish())
    }
}

impl fmt::Debug for Genome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Genome({})", self.to_bit_string())
    }
}

impl fmt::Display for Genome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_bit_string())
    }
}

impl Serialize for Genome {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_bit_string())
    }
}

impl<'de> Deserialize<'de> for Genome {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Genome::parse(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "var", rename_all = "snake_case")]
pub enum Variable {
    Depth { stage: usize },
    Kernel { stage: usize, block: usize },
    Width { stage: usize, block: usize },
    NumLayers,
    NumHeads,
    IntermediateDim,
    Hardware { param: HwParam },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub name: String,
    pub variable: Variable,
    pub offset: usize,
    /// Option values; ladder multipliers for hardware segments.
    pub options: Vec<f64>,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.options.len()
    }

    pub fn is_empty(&self) -> bool {
        self.options.is_empty()
    }
}

/// Segment layout of every genome in one (architecture, config) space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenomeLayout {
    pub family: Family,
    pub len: usize,
    /// FNV-1a over segment names and option values.
    pub schema_hash: String,
    pub segments: Vec<Segment>,
}

impl GenomeLayout {
    pub fn new(arch: &ArchSpace, config: &ConfigSpace) -> Self {
        let mut segs: Vec<(String, Variable, Vec<f64>)> = Vec::new();
        match &arch.body {
            SpaceBody::Cnn(c) => {
                let kernels: Vec<f64> = c.kernel_options.iter().map(|&k| f64::from(k)).collect();
                let depths: Vec<f64> = c.depth_options.iter().map(|&d| f64::from(d)).collect();
                for stage in 0..c.stages.len() {
                    segs.push((
                        format!("s{stage}.depth"),
                        Variable::Depth { stage },
                        depths.clone(),
                    ));
                    for block in 0..c.max_depth() as usize {
                        segs.push((
                            format!("s{stage}.b{block}.kernel"),
                            Variable::Kernel { stage, block },
                            kernels.clone(),
                        ));
                        segs.push((
                            format!("s{stage}.b{block}.width"),
                            Variable::Width { stage, block },
                            c.width_options.clone(),
                        ));
                    }
                }
            }
            SpaceBody::Vit(v) => {
                let f = |o: &[u32]| o.iter().map(|&x| f64::from(x)).collect::<Vec<_>>();
                segs.push(("num_layers".into(), Variable::NumLayers, f(&v.layer_options)));
                segs.push(("num_heads".into(), Variable::NumHeads, f(&v.head_options)));
                segs.push((
                    "intermediate_dim".into(),
                    Variable::IntermediateDim,
                    f(&v.intermediate_options),
                ));
            }
        }
        for param in HwParam::ALL {
            segs.push((
                format!("hw.{param}"),
                Variable::Hardware { param },
                config.ladders.get(param).clone(),
            ));
        }

        let mut h = Fnv64::default();
        let mut offset = 0;
        let mut segments = Vec::with_capacity(segs.len());
        for (name, variable, options) in segs {
            h.write(name.as_bytes());
            for o in &options {
                h.write_u64(o.to_bits());
            }
            let len = options.len();
            segments.push(Segment {
                name,
                variable,
                offset,
                options,
            });
            offset += len;
        }
        GenomeLayout {
            family: arch.family,
            len: offset,
            schema_hash: format!("{:016x}", h.finish()),
            segments,
        }
    }

    pub fn arch_segments(&self) -> usize {
        self.segments.len() - HwParam::ALL.len()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CodecError {
    #[error("genome has {got} bits, layout expects {expected}")]
    Length { expected: usize, got: usize },
    #[error("invalid genome character {0:?}")]
    BadBit(char),
    #[error("segment `{segment}` has {ones} set bits, expected exactly one")]
    Malformed { segment: String, ones: usize },
    #[error("segment `{segment}` belongs to an inactive block but has bits set")]
    InactiveSet { segment: String },
    #[error("hardware part violates the configuration space: {}", list(.0))]
    Budget(Vec<Violation>),
    #[error("hardware is frozen but the genome does not hold the static configuration")]
    NotStaticHardware,
    #[error("architecture is frozen but the genome does not hold the canonical sub-network")]
    NotStaticArch,
    #[error("{param} = {value} is not on its ladder")]
    OffLadder { param: HwParam, value: u64 },
    #[error("static configuration is off the configuration ladders")]
    StaticOffLadder,
    #[error(transparent)]
    Arch(#[from] WorkloadError),
    #[error(transparent)]
    Space(#[from] crate::cim::ConfigSpaceError),
}

fn list(v: &[Violation]) -> String {
    let mut s = String::new();
    for (i, x) in v.iter().enumerate() {
        if i > 0 {
            s.push_str("; ");
        }
        s.push_str(&format!("{x}"));
    }
    s
}

/// Option indices of a genome: one per architecture segment (`None` for
/// inactive blocks) and one per hardware variable.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Choices {
    pub arch: Vec<Option<usize>>,
    pub hw: [usize; 8],
}

/// Encoder, decoder and variation operators for one search space.
#[derive(Clone, Debug)]
pub struct Codec {
    arch: ArchSpace,
    config: ConfigSpace,
    scope: Scope,
    layout: GenomeLayout,
    static_arch: SubnetArch,
    static_cfg: HardwareConfig,
    static_hw: [usize; 8],
}

impl Codec {
    pub fn new(arch: ArchSpace, config: ConfigSpace, scope: Scope) -> Result<Self, CodecError> {
        arch.validate()?;
        if scope.hardware {
            config.check()?;
        }
        let static_cfg = config.static_config();
        let static_hw = config
            .indices_of(&static_cfg)
            .ok_or(CodecError::StaticOffLadder)?;
        let layout = GenomeLayout::new(&arch, &config);
        let static_arch = arch.canonical();
        Ok(Codec {
            arch,
            config,
            scope,
            layout,
            static_arch,
            static_cfg,
            static_hw,
        })
    }

    pub fn arch_space(&self) -> &ArchSpace {
        &self.arch
    }

    pub fn config_space(&self) -> &ConfigSpace {
        &self.config
    }

    pub fn scope(&self) -> Scope {
        self.scope
    }

    pub fn layout(&self) -> &GenomeLayout {
        &self.layout
    }

    pub fn static_arch(&self) -> &SubnetArch {
        &self.static_arch
    }

    pub fn static_config(&self) -> &HardwareConfig {
        &self.static_cfg
    }

    /// Canonical sub-network on the static configuration.
    pub fn static_genome(&self) -> Genome {
        self.encode_unchecked(&self.static_arch, &self.static_cfg)
            .expect("static pair is encodable")
    }

    /// Number of distinct genomes reachable in this scope.
    pub fn space_size(&self) -> u128 {
        let arch: u128 = if !self.scope.arch {
            1
        } else {
            match &self.arch.body {
                SpaceBody::Vit(v) => {
                    (v.layer_options.len() * v.head_options.len() * v.intermediate_options.len()) as u128
                }
                SpaceBody::Cnn(c) => {
                    let per_block = (c.kernel_options.len() * c.width_options.len()) as u128;
                    let per_stage: u128 = c.depth_options.iter().map(|&d| per_block.saturating_pow(d)).sum();
                    (0..c.stages.len()).fold(1u128, |acc, _| acc.saturating_mul(per_stage))
                }
            }
        };
        let hw = if self.scope.hardware {
            self.config.enumerate_valid().len() as u128
        } else {
            1
        };
        arch.saturating_mul(hw)
    }

    /// Checks `cfg` against the configuration space, or against the static
    /// configuration when hardware is frozen.
    pub fn check_hardware(&self, cfg: &HardwareConfig) -> Result<(), CodecError> {
        if self.scope.hardware {
            self.config.validate(cfg).map_err(CodecError::Budget)
        } else if *cfg == self.static_cfg {
            Ok(())
        } else {
            Err(CodecError::NotStaticHardware)
        }
    }

    fn hw_valid(&self, hw: &[usize; 8]) -> bool {
        if self.scope.hardware {
            self.config.violations(&self.config.from_indices(hw)).is_empty()
        } else {
            *hw == self.static_hw
        }
    }

    fn choices_of_pair(&self, subnet: &SubnetArch, cfg: &HardwareConfig) -> Result<Choices, CodecError> {
        self.arch.check(subnet)?;
        let hw = self.config.indices_of(cfg).ok_or_else(|| {
            let m = self.config.multipliers(cfg);
            let param = HwParam::ALL
                .into_iter()
                .find(|&p| !self.config.ladders.get(p).iter().any(|&r| r == *m.get(p)))
                .unwrap_or(HwParam::DramBw);
            CodecError::OffLadder {
                param,
                value: *cfg.get(param),
            }
        })?;
        let idx = |opts: &[f64], v: f64| opts.iter().position(|&o| o == v);
        let mut arch = Vec::with_capacity(self.layout.arch_segments());
        for seg in &self.layout.segments[..self.layout.arch_segments()] {
            let pick = match (seg.variable, subnet) {
                (Variable::NumLayers, SubnetArch::Vit(c)) => idx(&seg.options, f64::from(c.num_layers)),
                (Variable::NumHeads, SubnetArch::Vit(c)) => idx(&seg.options, f64::from(c.num_heads)),
                (Variable::IntermediateDim, SubnetArch::Vit(c)) => {
                    idx(&seg.options, f64::from(c.intermediate_dim))
                }
                (Variable::Depth { stage }, SubnetArch::Cnn { stages }) => {
                    idx(&seg.options, f64::from(stages[stage].depth))
                }
                (Variable::Kernel { stage, block }, SubnetArch::Cnn { stages }) => stages[stage]
                    .kernels
                    .get(block)
                    .and_then(|&k| idx(&seg.options, f64::from(k))),
                (Variable::Width { stage, block }, SubnetArch::Cnn { stages }) => stages[stage]
                    .widths
                    .get(block)
                    .and_then(|&w| idx(&seg.options, w)),
                _ => None,
            };
            arch.push(pick);
        }
        Ok(Choices { arch, hw })
    }

    fn encode_unchecked(&self, subnet: &SubnetArch, cfg: &HardwareConfig) -> Result<Genome, CodecError> {
        Ok(self.genome_of(&self.choices_of_pair(subnet, cfg)?))
    }

    /// One-hot encoding of `(subnet, cfg)`; both must lie in this codec's
    /// scope.
    pub fn encode(&self, subnet: &SubnetArch, cfg: &HardwareConfig) -> Result<Genome, CodecError> {
        if !self.scope.arch && *subnet != self.static_arch {
            return Err(CodecError::NotStaticArch);
        }
        self.check_hardware(cfg)?;
        self.encode_unchecked(subnet, cfg)
    }

    pub fn genome_of(&self, c: &Choices) -> Genome {
        let mut bits = alloc::vec![0u8; self.layout.len];
        let n = self.layout.arch_segments();
        for (seg, pick) in self.layout.segments[..n].iter().zip(&c.arch) {
            if let Some(k) = pick {
                bits[seg.offset + k] = 1;
            }
        }
        for (seg, &k) in self.layout.segments[n..].iter().zip(&c.hw) {
            bits[seg.offset + k] = 1;
        }
        Genome(bits)
    }

    /// Parses segment structure without checking hardware budgets.
    pub fn choices(&self, g: &Genome) -> Result<Choices, CodecError> {
        if g.len() != self.layout.len {
            return Err(CodecError::Length {
                expected: self.layout.len,
                got: g.len(),
            });
        }
        let read = |seg: &Segment| -> (usize, Option<usize>) {
            let bits = &g.0[seg.offset..seg.offset + seg.len()];
            let ones = bits.iter().filter(|&&b| b == 1).count();
            (ones, bits.iter().position(|&b| b == 1))
        };
        let n = self.layout.arch_segments();
        let mut arch = Vec::with_capacity(n);
        let mut depth = 0usize;
        for seg in &self.layout.segments[..n] {
            let (ones, pos) = read(seg);
            let active = match seg.variable {
                Variable::Kernel { block, .. } | Variable::Width { block, .. } => block < depth,
                _ => true,
            };
            if !active {
                if ones != 0 {
                    return Err(CodecError::InactiveSet {
                        segment: seg.name.clone(),
                    });
                }
                arch.push(None);
                continue;
            }
            if ones != 1 {
                return Err(CodecError::Malformed {
                    segment: seg.name.clone(),
                    ones,
                });
            }
            let k = pos.expect("one bit set");
            if let Variable::Depth { .. } = seg.variable {
                depth = seg.options[k] as usize;
            }
            arch.push(Some(k));
        }
        let mut hw = [0usize; 8];
        for (i, seg) in self.layout.segments[n..].iter().enumerate() {
            let (ones, pos) = read(seg);
            if ones != 1 {
                return Err(CodecError::Malformed {
                    segment: seg.name.clone(),
                    ones,
                });
            }
            hw[i] = pos.expect("one bit set");
        }
        Ok(Choices { arch, hw })
    }

    pub fn subnet_of(&self, c: &Choices) -> SubnetArch {
        let segs = &self.layout.segments;
        match &self.arch.body {
            SpaceBody::Vit(_) => {
                let v = |i: usize| segs[i].options[c.arch[i].unwrap_or(0)] as u32;
                SubnetArch::Vit(VitChoice {
                    num_layers: v(0),
                    num_heads: v(1),
                    intermediate_dim: v(2),
                })
            }
            SpaceBody::Cnn(space) => {
                let mut stages: Vec<StageChoice> = (0..space.stages.len())
                    .map(|_| StageChoice {
                        depth: 0,
                        kernels: Vec::new(),
                        widths: Vec::new(),
                    })
                    .collect();
                for (seg, pick) in segs.iter().zip(&c.arch) {
                    let Some(k) = *pick else { continue };
                    let v = seg.options[k];
                    match seg.variable {
                        Variable::Depth { stage } => stages[stage].depth = v as u32,
                        Variable::Kernel { stage, .. } => stages[stage].kernels.push(v as u32),
                        Variable::Width { stage, .. } => stages[stage].widths.push(v),
                        _ => {}
                    }
                }
                SubnetArch::Cnn { stages }
            }
        }
    }

    pub fn config_of(&self, c: &Choices) -> HardwareConfig {
        self.config.from_indices(&c.hw)
    }

    /// Inverse of [`encode`](Self::encode).
    pub fn decode(&self, g: &Genome) -> Result<(SubnetArch, HardwareConfig), CodecError> {
        let (subnet, cfg) = self.decode_unchecked(g)?;
        if !self.scope.arch && subnet != self.static_arch {
            return Err(CodecError::NotStaticArch);
        }
        self.check_hardware(&cfg)?;
        Ok((subnet, cfg))
    }

    /// Decodes segment structure only; the hardware part may break budgets.
    pub fn decode_unchecked(&self, g: &Genome) -> Result<(SubnetArch, HardwareConfig), CodecError> {
        let c = self.choices(g)?;
        Ok((self.subnet_of(&c), self.config_of(&c)))
    }

    fn arch_choices<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Option<usize>> {
        let subnet = if self.scope.arch {
            self.arch.sample(rng)
        } else {
            self.static_arch.clone()
        };
        self.choices_of_pair(&subnet, &self.static_cfg)
            .expect("sampled sub-network is in its space")
            .arch
    }

    fn hw_choices<R: Rng + ?Sized>(&self, rng: &mut R) -> [usize; 8] {
        if !self.scope.hardware {
            return self.static_hw;
        }
        let cfg = self.config.sample(rng).expect("checked at construction");
        self.config.indices_of(&cfg).expect("sampled from the ladders")
    }

    /// Uniform random genome in scope.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Genome {
        let arch = self.arch_choices(rng);
        let hw = self.hw_choices(rng);
        self.genome_of(&Choices { arch, hw })
    }

    pub fn sample_seeded(&self, seed: u64) -> Genome {
        self.sample(&mut rng::seeded(seed))
    }

    /// Re-draws the budget-coupled hardware variables until `hw` is valid;
    /// falls back to `parent` after [`REPAIR_RETRIES`] attempts.
    fn repair<R: Rng + ?Sized>(&self, hw: [usize; 8], parent: [usize; 8], rng: &mut R) -> [usize; 8] {
        if self.hw_valid(&hw) {
            return hw;
        }
        if !self.scope.hardware {
            return self.static_hw;
        }
        for _ in 0..REPAIR_RETRIES {
            let mut h = hw;
            for p in COUPLED {
                h[p as usize] = rng.gen_range(0..self.config.ladders.get(p).len());
            }
            if self.hw_valid(&h) {
                return h;
            }
        }
        parent
    }

    fn block_of(&self, seg: usize) -> Option<(usize, usize)> {
        match self.layout.segments[seg].variable {
            Variable::Kernel { stage, block } | Variable::Width { stage, block } => Some((stage, block)),
            _ => None,
        }
    }

    /// Re-draws every variable independently with probability `rate`.
    /// Blocks activated by a depth increase get uniform options.
    pub fn mutate<R: Rng + ?Sized>(&self, g: &Genome, rate: f64, rng: &mut R) -> Result<Genome, CodecError> {
        let parent = self.choices(g)?;
        let mut c = parent.clone();
        let segs = &self.layout.segments;
        if self.scope.arch {
            let mut depth = 0usize;
            for (i, seg) in segs[..self.layout.arch_segments()].iter().enumerate() {
                let n = seg.len();
                let redraw = rng.gen_bool(rate);
                let fresh = rng.gen_range(0..n);
                match self.block_of(i) {
                    None => {
                        if redraw {
                            c.arch[i] = Some(fresh);
                        }
                        if let Variable::Depth { .. } = seg.variable {
                            depth = seg.options[c.arch[i].expect("depth is active")] as usize;
                        }
                    }
                    Some((_, block)) => {
                        c.arch[i] = if block >= depth {
                            None
                        } else {
                            match parent.arch[i] {
                                Some(k) if !redraw => Some(k),
                                _ => Some(fresh),
                            }
                        };
                    }
                }
            }
        }
        if self.scope.hardware {
            for (p, seg) in segs[self.layout.arch_segments()..].iter().enumerate() {
                let redraw = rng.gen_bool(rate);
                let fresh = rng.gen_range(0..seg.len());
                if redraw {
                    c.hw[p] = fresh;
                }
            }
            c.hw = self.repair(c.hw, parent.hw, rng);
        }
        Ok(self.genome_of(&c))
    }

    /// Takes each segment from `a` or `b` with probability 1/2. A block made
    /// active by the inherited depth but inactive in the chosen parent is
    /// taken from the other parent, or drawn uniformly if inactive in both.
    pub fn crossover<R: Rng + ?Sized>(
        &self,
        a: &Genome,
        b: &Genome,
        rng: &mut R,
    ) -> Result<Genome, CodecError> {
        let ca = self.choices(a)?;
        let cb = self.choices(b)?;
        let segs = &self.layout.segments;
        let mut arch = Vec::with_capacity(ca.arch.len());
        let mut depth = 0usize;
        for (i, seg) in segs[..self.layout.arch_segments()].iter().enumerate() {
            let from_a = rng.gen_bool(0.5);
            let fresh = rng.gen_range(0..seg.len());
            let (first, second) = if from_a {
                (ca.arch[i], cb.arch[i])
            } else {
                (cb.arch[i], ca.arch[i])
            };
            let pick = match self.block_of(i) {
                None => {
                    let k = first.expect("non-block segments are active");
                    if let Variable::Depth { .. } = seg.variable {
                        depth = seg.options[k] as usize;
                    }
                    Some(k)
                }
                Some((_, block)) if block >= depth => None,
                Some(_) => first.or(second).or(Some(fresh)),
            };
            arch.push(pick);
        }
        let mut hw = [0usize; 8];
        for (p, h) in hw.iter_mut().enumerate() {
            *h = if rng.gen_bool(0.5) { ca.hw[p] } else { cb.hw[p] };
        }
        let hw = self.repair(hw, ca.hw, rng);
        Ok(self.genome_of(&Choices { arch, hw }))
    }

    pub fn mutate_seeded(&self, g: &Genome, rate: f64, seed: u64) -> Result<Genome, CodecError> {
        self.mutate(g, rate, &mut rng::seeded(seed))
    }

    pub fn crossover_seeded(&self, a: &Genome, b: &Genome, seed: u64) -> Result<Genome, CodecError> {
        self.crossover(a, b, &mut rng::seeded(seed))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cim::Multipliers;

    fn codec(family: Family, scope: Scope) -> Codec {
        Codec::new(ArchSpace::preset(family), ConfigSpace::default(), scope).unwrap()
    }

    #[test]
    fn vit_genome_length() {
        let c = codec(Family::Vit, Scope::JOINT);
        assert_eq!(c.layout().len, 9 + 32);
    }

    #[test]
    fn cnn_genome_length() {
        // Per stage: depth (3) + 4 blocks × (kernel 3 + width 3).
        let c = codec(Family::Mbv3, Scope::JOINT);
        assert_eq!(c.layout().len, 5 * 27 + 32);
        let c = codec(Family::Resnet, Scope::JOINT);
        assert_eq!(c.layout().len, 4 * 27 + 32);
    }

    #[test]
    fn kernel_five_is_middle_bit() {
        let c = codec(Family::Mbv3, Scope::JOINT);
        let mut s = c.arch_space().canonical();
        if let SubnetArch::Cnn { stages } = &mut s {
            stages[0].kernels[0] = 5;
        }
        let m = {
            let mut m: Multipliers = ConfigSpace::static_multipliers();
            m.l1_num_child = 1.0;
            m.ma_num_child = 0.5;
            m.ma_comp_per_core = 0.25;
            m
        };
        let cfg = c.config_space().resolve(&m);
        let g = c.encode(&s, &cfg).unwrap();
        let seg = c
            .layout()
            .segments
            .iter()
            .find(|s| s.name == "s0.b0.kernel")
            .unwrap();
        assert_eq!(&g.bits()[seg.offset..seg.offset + 3], &[0, 1, 0]);
        assert_eq!(c.decode(&g).unwrap(), (s, cfg));
    }

    #[test]
    fn double_bit_is_malformed() {
        let c = codec(Family::Vit, Scope::JOINT);
        let g = c.sample_seeded(1);
        let mut bits = g.bits().to_vec();
        bits[0] = 1;
        bits[1] = 1;
        bits[2] = 0;
        let err = c.decode(&Genome::from_bits(bits).unwrap()).unwrap_err();
        assert!(matches!(err, CodecError::Malformed { ones: 2, .. }));
    }

    #[test]
    fn inactive_block_bits_rejected() {
        let c = codec(Family::Resnet, Scope::JOINT);
        let s = c.arch_space().minimal();
        let g = c.encode(&s, &c.decode(&c.sample_seeded(0)).unwrap().1).unwrap();
        let seg = c
            .layout()
            .segments
            .iter()
            .find(|s| s.name == "s1.b3.width")
            .unwrap();
        let mut bits = g.bits().to_vec();
        bits[seg.offset] = 1;
        let err = c.decode(&Genome::from_bits(bits).unwrap()).unwrap_err();
        assert!(matches!(err, CodecError::InactiveSet { .. }));
    }

    #[test]
    fn budget_violation_detected() {
        let c = codec(Family::Vit, Scope::JOINT);
        let g = c.sample_seeded(2);
        let mut ch = c.choices(&g).unwrap();
        // Every compute-coupled variable at 1.0: product 1 ≠ 0.125.
        ch.hw[HwParam::L1NumChild as usize] = 3;
        ch.hw[HwParam::MaNumChild as usize] = 3;
        ch.hw[HwParam::MaCompPerCore as usize] = 3;
        let bad = c.genome_of(&ch);
        assert!(matches!(c.decode(&bad), Err(CodecError::Budget(_))));
        assert!(c.decode_unchecked(&bad).is_ok());
    }

    #[test]
    fn rate_zero_mutation_is_identity() {
        let c = codec(Family::Mbv3, Scope::JOINT);
        let mut r = rng::seeded(4);
        for _ in 0..50 {
            let g = c.sample(&mut r);
            assert_eq!(c.mutate(&g, 0.0, &mut r).unwrap(), g);
        }
    }

    #[test]
    fn self_crossover_is_identity() {
        let c = codec(Family::Resnet, Scope::JOINT);
        let mut r = rng::seeded(5);
        for _ in 0..50 {
            let g = c.sample(&mut r);
            assert_eq!(c.crossover(&g, &g, &mut r).unwrap(), g);
        }
    }

    #[test]
    fn frozen_sides_stay_static() {
        let c = codec(
            Family::Mbv3,
            Scope {
                arch: true,
                hardware: false,
            },
        );
        let mut r = rng::seeded(6);
        let a = c.sample(&mut r);
        let b = c.sample(&mut r);
        for _ in 0..100 {
            let m = c.mutate(&a, 0.5, &mut r).unwrap();
            let x = c.crossover(&a, &b, &mut r).unwrap();
            assert_eq!(c.decode(&m).unwrap().1, *c.static_config());
            assert_eq!(c.decode(&x).unwrap().1, *c.static_config());
        }
        let c = codec(
            Family::Vit,
            Scope {
                arch: false,
                hardware: true,
            },
        );
        let g = c.sample(&mut r);
        let m = c.mutate(&g, 1.0, &mut r).unwrap();
        assert_eq!(c.decode(&m).unwrap().0, *c.static_arch());
    }

    #[test]
    fn space_sizes() {
        let vit = codec(Family::Vit, Scope::JOINT);
        assert_eq!(vit.space_size(), 27 * 2304);
        let frozen = codec(
            Family::Vit,
            Scope {
                arch: true,
                hardware: false,
            },
        );
        assert_eq!(frozen.space_size(), 27);
    }

    #[test]
    fn bit_string_round_trip() {
        let c = codec(Family::Mbv3, Scope::JOINT);
        let g = c.sample_seeded(9);
        assert_eq!(Genome::parse(&g.to_bit_string()).unwrap(), g);
        assert!(Genome::parse("01x").is_err());
    }
}

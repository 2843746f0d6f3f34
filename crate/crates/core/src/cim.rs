//! Hardware configuration space and the analytical cycle model.
//!
//! The machine is a tree: DRAM feeds one L2 decoder, which fans out to
//! `l1_num_child` L1 decoders, each of which fans out to `ma_num_child`
//! memory arrays (MAs). Every MA owns a compute core of `ma_comp_per_core`
//! MACs/cycle and `ma_mem_size` bytes of storage.
//!
//! A layer's latency is a perfect-overlap roofline: the maximum over
//! resources of demand / capacity. Shared operands are multicast once at
//! DRAM and L2; each L1→MA link carries the bytes its node consumes,
//! including temporal re-fetches and partial-sum reduction traffic.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataflow::{self, Dataflow, DataflowCompiler, DataflowError, Factors};
use crate::rng;
use crate::workload::LayerSpec;

/// The eight elastic hardware variables, in genome order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HwParam {
    DramBw,
    L2Bw,
    L1Bw,
    L1NumChild,
    MaBw,
    MaMemSize,
    MaNumChild,
    MaCompPerCore,
}

impl HwParam {
    pub const ALL: [HwParam; 8] = [
        HwParam::DramBw,
        HwParam::L2Bw,
        HwParam::L1Bw,
        HwParam::L1NumChild,
        HwParam::MaBw,
        HwParam::MaMemSize,
        HwParam::MaNumChild,
        HwParam::MaCompPerCore,
    ];

    /// Link bandwidths; raising one never slows a fixed dataflow down.
    pub const BANDWIDTHS: [HwParam; 4] = [HwParam::DramBw, HwParam::L2Bw, HwParam::L1Bw, HwParam::MaBw];

    pub fn name(self) -> &'static str {
        match self {
            HwParam::DramBw => "dram_bw",
            HwParam::L2Bw => "l2_bw",
            HwParam::L1Bw => "l1_bw",
            HwParam::L1NumChild => "l1_num_child",
            HwParam::MaBw => "ma_bw",
            HwParam::MaMemSize => "ma_mem_size",
            HwParam::MaNumChild => "ma_num_child",
            HwParam::MaCompPerCore => "ma_comp_per_core",
        }
    }
}

impl fmt::Display for HwParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One value per hardware variable.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HwParams<T> {
    pub dram_bw: T,
    pub l2_bw: T,
    pub l1_bw: T,
    pub l1_num_child: T,
    pub ma_bw: T,
    pub ma_mem_size: T,
    pub ma_num_child: T,
    pub ma_comp_per_core: T,
}

impl<T> HwParams<T> {
    pub fn from_fn(mut f: impl FnMut(HwParam) -> T) -> Self {
        HwParams {
            dram_bw: f(HwParam::DramBw),
            l2_bw: f(HwParam::L2Bw),
            l1_bw: f(HwParam::L1Bw),
            l1_num_child: f(HwParam::L1NumChild),
            ma_bw: f(HwParam::MaBw),
            ma_mem_size: f(HwParam::MaMemSize),
            ma_num_child: f(HwParam::MaNumChild),
            ma_comp_per_core: f(HwParam::MaCompPerCore),
        }
    }

    pub fn get(&self, p: HwParam) -> &T {
        match p {
            HwParam::DramBw => &self.dram_bw,
            HwParam::L2Bw => &self.l2_bw,
            HwParam::L1Bw => &self.l1_bw,
            HwParam::L1NumChild => &self.l1_num_child,
            HwParam::MaBw => &self.ma_bw,
            HwParam::MaMemSize => &self.ma_mem_size,
            HwParam::MaNumChild => &self.ma_num_child,
            HwParam::MaCompPerCore => &self.ma_comp_per_core,
        }
    }

    pub fn get_mut(&mut self, p: HwParam) -> &mut T {
        match p {
            HwParam::DramBw => &mut self.dram_bw,
            HwParam::L2Bw => &mut self.l2_bw,
            HwParam::L1Bw => &mut self.l1_bw,
            HwParam::L1NumChild => &mut self.l1_num_child,
            HwParam::MaBw => &mut self.ma_bw,
            HwParam::MaMemSize => &mut self.ma_mem_size,
            HwParam::MaNumChild => &mut self.ma_num_child,
            HwParam::MaCompPerCore => &mut self.ma_comp_per_core,
        }
    }

    pub fn map<U>(&self, mut f: impl FnMut(HwParam, &T) -> U) -> HwParams<U> {
        HwParams::from_fn(|p| f(p, self.get(p)))
    }
}

/// Absolute hardware values: bytes/cycle for bandwidths, bytes for
/// `ma_mem_size`, MACs/cycle for `ma_comp_per_core`, counts otherwise.
pub type HardwareConfig = HwParams<u64>;

/// Values normalized to the base (1.0×) machine.
pub type Multipliers = HwParams<f64>;

impl HardwareConfig {
    /// The 1.0× machine.
    pub fn base() -> Self {
        HwParams {
            dram_bw: 64,
            l2_bw: 128,
            l1_bw: 32,
            l1_num_child: 16,
            ma_bw: 16,
            ma_mem_size: 64 * 1024,
            ma_num_child: 16,
            ma_comp_per_core: 128,
        }
    }

    /// Total memory arrays (compute nodes).
    pub fn nodes(&self) -> u64 {
        self.l1_num_child * self.ma_num_child
    }

    pub fn peak_macs_per_cycle(&self) -> u64 {
        self.nodes() * self.ma_comp_per_core
    }

    pub fn is_positive(&self) -> bool {
        HwParam::ALL.iter().all(|&p| *self.get(p) > 0)
    }
}

/// A budget or ladder constraint a configuration breaks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    NonPositive { param: HwParam },
    OffLadder { param: HwParam, multiplier: f64 },
    ComputeBudget { product: f64, budget: f64 },
    MemoryBudget { product: f64, lo: f64, hi: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonPositive { param } => write!(f, "{param} must be positive"),
            Violation::OffLadder { param, multiplier } => {
                write!(f, "{param} multiplier {multiplier} is not on the ladder")
            }
            Violation::ComputeBudget { product, budget } => write!(
                f,
                "compute product {product} (l1_num_child·ma_num_child·ma_comp_per_core) != {budget}"
            ),
            Violation::MemoryBudget { product, lo, hi } => write!(
                f,
                "memory product {product} (l1_num_child·ma_num_child·ma_mem_size) outside [{lo}, {hi}]"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigSpaceError {
    #[error("no ladder combination satisfies the compute and memory budgets")]
    Empty,
    #[error("ladder for {0} is empty")]
    EmptyLadder(HwParam),
    #[error("{param}: base {base} × {multiplier} is not a positive integer")]
    NonIntegral {
        param: HwParam,
        base: u64,
        multiplier: f64,
    },
    #[error("memory budget range [{0}, {1}] is empty")]
    BadRange(f64, f64),
}

/// The elastic configuration space: a ladder of multipliers over a base
/// machine, with total compute pinned and total memory kept in a band.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigSpace {
    pub base: HardwareConfig,
    pub ladders: HwParams<Vec<f64>>,
    /// Required normalized `l1_num_child · ma_num_child · ma_comp_per_core`.
    pub compute_budget: f64,
    /// Allowed normalized `l1_num_child · ma_num_child · ma_mem_size`.
    pub memory_budget: [f64; 2],
}

pub const LADDER: [f64; 4] = [0.125, 0.25, 0.5, 1.0];

const REL_EPS: f64 = 1e-12;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= REL_EPS * b.abs().max(1.0)
}

impl Default for ConfigSpace {
    fn default() -> Self {
        ConfigSpace {
            base: HardwareConfig::base(),
            ladders: HwParams::from_fn(|_| LADDER.to_vec()),
            compute_budget: 0.125,
            memory_budget: [0.25, 0.5],
        }
    }
}

impl ConfigSpace {
    /// The static configuration used when hardware is frozen.
    pub fn static_multipliers() -> Multipliers {
        HwParams {
            dram_bw: 0.125,
            l2_bw: 0.25,
            l1_bw: 0.25,
            l1_num_child: 0.5,
            ma_bw: 0.25,
            ma_mem_size: 0.5,
            ma_num_child: 0.5,
            ma_comp_per_core: 0.5,
        }
    }

    pub fn static_config(&self) -> HardwareConfig {
        self.resolve(&Self::static_multipliers())
    }

    /// Absolute values for `m` (rounded to the nearest integer, at least 1).
    pub fn resolve(&self, m: &Multipliers) -> HardwareConfig {
        HwParams::from_fn(|p| (libm::round(*self.base.get(p) as f64 * m.get(p)) as u64).max(1))
    }

    pub fn multipliers(&self, cfg: &HardwareConfig) -> Multipliers {
        HwParams::from_fn(|p| *cfg.get(p) as f64 / *self.base.get(p) as f64)
    }

    /// Config from one ladder index per variable.
    pub fn from_indices(&self, idx: &[usize; 8]) -> HardwareConfig {
        let m = HwParams::from_fn(|p| self.ladders.get(p)[idx[p as usize]]);
        self.resolve(&m)
    }

    /// Ladder index of each variable, if every value is on its ladder.
    pub fn indices_of(&self, cfg: &HardwareConfig) -> Option<[usize; 8]> {
        let m = self.multipliers(cfg);
        let mut out = [0usize; 8];
        for p in HwParam::ALL {
            out[p as usize] = self.ladders.get(p).iter().position(|&r| close(r, *m.get(p)))?;
        }
        Some(out)
    }

    pub fn compute_product(m: &Multipliers) -> f64 {
        m.l1_num_child * m.ma_num_child * m.ma_comp_per_core
    }

    pub fn memory_product(m: &Multipliers) -> f64 {
        m.l1_num_child * m.ma_num_child * m.ma_mem_size
    }

    /// Every violated constraint; empty means `cfg` belongs to the space.
    pub fn violations(&self, cfg: &HardwareConfig) -> Vec<Violation> {
        let mut out = Vec::new();
        for p in HwParam::ALL {
            if *cfg.get(p) == 0 {
                out.push(Violation::NonPositive { param: p });
            }
        }
        if !out.is_empty() {
            return out;
        }
        let m = self.multipliers(cfg);
        for p in HwParam::ALL {
            let r = *m.get(p);
            if !self.ladders.get(p).iter().any(|&l| close(l, r)) {
                out.push(Violation::OffLadder {
                    param: p,
                    multiplier: r,
                });
            }
        }
        let compute = Self::compute_product(&m);
        if !close(compute, self.compute_budget) {
            out.push(Violation::ComputeBudget {
                product: compute,
                budget: self.compute_budget,
            });
        }
        let memory = Self::memory_product(&m);
        let [lo, hi] = self.memory_budget;
        if memory < lo * (1.0 - REL_EPS) || memory > hi * (1.0 + REL_EPS) {
            out.push(Violation::MemoryBudget {
                product: memory,
                lo,
                hi,
            });
        }
        out
    }

    pub fn validate(&self, cfg: &HardwareConfig) -> Result<(), Vec<Violation>> {
        let v = self.violations(cfg);
        if v.is_empty() {
            Ok(())
        } else {
            Err(v)
        }
    }

    /// Structural checks plus attainability of the budgets.
    pub fn check(&self) -> Result<(), ConfigSpaceError> {
        for p in HwParam::ALL {
            let ladder = self.ladders.get(p);
            if ladder.is_empty() {
                return Err(ConfigSpaceError::EmptyLadder(p));
            }
            let base = *self.base.get(p);
            for &r in ladder {
                let v = base as f64 * r;
                if !(v >= 1.0) || !close(libm::round(v), v) {
                    return Err(ConfigSpaceError::NonIntegral {
                        param: p,
                        base,
                        multiplier: r,
                    });
                }
            }
        }
        let [lo, hi] = self.memory_budget;
        if !(lo <= hi) {
            return Err(ConfigSpaceError::BadRange(lo, hi));
        }
        if self.constrained_combinations() == 0 {
            return Err(ConfigSpaceError::Empty);
        }
        Ok(())
    }

    /// Number of (l1_num_child, ma_num_child, ma_comp_per_core, ma_mem_size)
    /// ladder combinations that meet both budgets.
    pub fn constrained_combinations(&self) -> usize {
        let l = &self.ladders;
        let mut n = 0;
        for &a in &l.l1_num_child {
            for &b in &l.ma_num_child {
                for &c in &l.ma_comp_per_core {
                    if !close(a * b * c, self.compute_budget) {
                        continue;
                    }
                    let [lo, hi] = self.memory_budget;
                    n += l
                        .ma_mem_size
                        .iter()
                        .filter(|&&m| {
                            let p = a * b * m;
                            p >= lo * (1.0 - REL_EPS) && p <= hi * (1.0 + REL_EPS)
                        })
                        .count();
                }
            }
        }
        n
    }

    /// Every valid configuration, in ladder-index order.
    pub fn enumerate_valid(&self) -> Vec<HardwareConfig> {
        let lens: [usize; 8] = core::array::from_fn(|i| self.ladders.get(HwParam::ALL[i]).len());
        let total: usize = lens.iter().product();
        let mut out = Vec::new();
        for mut code in 0..total {
            let mut idx = [0usize; 8];
            for i in (0..8).rev() {
                idx[i] = code % lens[i];
                code /= lens[i];
            }
            let cfg = self.from_indices(&idx);
            if self.violations(&cfg).is_empty() {
                out.push(cfg);
            }
        }
        out
    }

    /// Uniform draw from the valid subset by rejection over the full grid.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<HardwareConfig, ConfigSpaceError> {
        self.check()?;
        loop {
            let idx: [usize; 8] =
                core::array::from_fn(|i| rng.gen_range(0..self.ladders.get(HwParam::ALL[i]).len()));
            let cfg = self.from_indices(&idx);
            if self.violations(&cfg).is_empty() {
                return Ok(cfg);
            }
        }
    }
}

pub fn sample_config(space: &ConfigSpace, seed: u64) -> Result<HardwareConfig, ConfigSpaceError> {
    space.sample(&mut rng::seeded(seed))
}

pub fn validate_config(cfg: &HardwareConfig, space: &ConfigSpace) -> Result<(), Vec<Violation>> {
    space.validate(cfg)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Resource {
    Compute,
    Dram,
    L2,
    L1,
    Ma,
}

impl Resource {
    pub fn name(self) -> &'static str {
        match self {
            Resource::Compute => "COMPUTE",
            Resource::Dram => "DRAM",
            Resource::L2 => "L2",
            Resource::L1 => "L1",
            Resource::Ma => "MA",
        }
    }
}

impl fmt::Display for Resource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Bytes moved at each level of the hierarchy.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LevelBytes {
    pub dram: u64,
    pub l2: u64,
    /// Summed over L1 decoders.
    pub l1: u64,
    /// Summed over memory arrays.
    pub ma: u64,
}

impl core::ops::AddAssign for LevelBytes {
    fn add_assign(&mut self, o: Self) {
        self.dram += o.dram;
        self.l2 += o.l2;
        self.l1 += o.l1;
        self.ma += o.ma;
    }
}

/// Per-resource cycle demands of one layer.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ResourceTerms {
    pub compute: u64,
    pub dram: u64,
    pub l2: u64,
    pub l1: u64,
    pub ma: u64,
}

impl ResourceTerms {
    /// Maximum term; ties resolve in the order compute, DRAM, L2, L1, MA.
    pub fn binding(&self) -> (u64, Resource) {
        let mut best = (self.compute, Resource::Compute);
        for (v, r) in [
            (self.dram, Resource::Dram),
            (self.l2, Resource::L2),
            (self.l1, Resource::L1),
            (self.ma, Resource::Ma),
        ] {
            if v > best.0 {
                best = (v, r);
            }
        }
        best
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LayerCost {
    pub cycles: u64,
    pub binding: Resource,
    pub terms: ResourceTerms,
    pub bytes: LevelBytes,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerCycles {
    pub name: String,
    pub cycles: u64,
    pub binding: Resource,
    pub bytes: LevelBytes,
    pub dataflow: Dataflow,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CycleReport {
    pub total_cycles: u64,
    pub layers: Vec<LayerCycles>,
    pub bytes: LevelBytes,
}

/// Balanced split of `extent` into `parts` tiles: the first `rem` tiles
/// hold `q + 1` elements, the rest `q`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Split {
    q: u64,
    rem: u64,
}

impl Split {
    pub(crate) fn new(extent: u64, parts: u64) -> Self {
        Split {
            q: extent / parts,
            rem: extent % parts,
        }
    }

    #[inline]
    pub(crate) fn tile(&self, coord: u64) -> u64 {
        if coord < self.rem {
            self.q + 1
        } else {
            self.q
        }
    }

    pub(crate) fn max(&self) -> u64 {
        if self.rem > 0 {
            self.q + 1
        } else {
            self.q
        }
    }
}

/// Bytes a node with tile extents `(g, i, ic, o)` exchanges with its L1
/// decoder under temporal chunking `t`, excluding received partial sums.
///
/// Chunks are visited group → resolution → output → reduction, with the
/// reduction innermost so partial sums stay resident: the IFM chunk is
/// re-read for every output chunk once the reduction is chunked, the
/// weight chunk is re-read for every resolution chunk unless a single
/// weight chunk covers the node, and the OFM leaves once.
#[inline]
pub(crate) fn node_traffic(g: u64, i: u64, ic: u64, o: u64, t: &Factors, b: u64) -> (u64, u64) {
    let ti = t.resolution.min(i);
    let to = t.out_channels.min(o);
    let tic = t.reduction.min(ic);
    let ifm = g * i * ic * b * if tic > 1 { to } else { 1 };
    let w = g * ic * o * b * if to == 1 && tic == 1 { 1 } else { ti };
    let out = g * i * o * b;
    (ifm + w, out)
}

/// Cost terms that do not depend on node placement: compute, DRAM, the
/// unique part of L2, and the busiest node's MA link.
pub(crate) fn placement_free_terms(
    layer: &LayerSpec,
    cfg: &HardwareConfig,
    df: &Dataflow,
) -> (u64, u64, u64, u64) {
    let s = &df.spatial;
    let b = u64::from(layer.elem_bytes);
    let active = s.product();
    let compute = layer.macs().div_ceil(active * cfg.ma_comp_per_core);
    let unique = layer.unique_bytes();
    let g = Split::new(layer.groups, s.groups).max();
    let i = Split::new(layer.resolution, s.resolution).max();
    let o = Split::new(layer.out_channels, s.out_channels).max();
    let ic = Split::new(layer.reduction, s.reduction).max();
    let (inb, out) = node_traffic(g, i, ic, o, &df.temporal, b);
    // Node 0 holds the largest tile and is a reduction root.
    let node0 = inb + out + (s.reduction - 1) * out;
    (
        compute,
        unique.div_ceil(cfg.dram_bw),
        unique.div_ceil(cfg.l2_bw),
        node0.div_ceil(cfg.ma_bw),
    )
}

/// Cost of `layer` under `df`, assuming `df` is feasible.
pub(crate) fn layer_cost(layer: &LayerSpec, cfg: &HardwareConfig, df: &Dataflow) -> LayerCost {
    let s = &df.spatial;
    let b = u64::from(layer.elem_bytes);
    let active = s.product();
    let sg = Split::new(layer.groups, s.groups);
    let si = Split::new(layer.resolution, s.resolution);
    let so = Split::new(layer.out_channels, s.out_channels);
    let sic = Split::new(layer.reduction, s.reduction);

    // Nodes are numbered with the reduction split fastest, so partial-sum
    // groups are contiguous, and packed `per_l1` to an L1 decoder.
    let per_l1 = active.div_ceil(cfg.l1_num_child);
    let mut ma_max = 0u64;
    let mut ma_sum = 0u64;
    let mut l1_max = 0u64;
    let mut l1_cur = 0u64;
    let mut l2_reduction = 0u64;
    let mut j = 0u64;
    for cg in 0..s.groups {
        let g = sg.tile(cg);
        for ci in 0..s.resolution {
            let i = si.tile(ci);
            for co in 0..s.out_channels {
                let o = so.tile(co);
                let root = j;
                for cic in 0..s.reduction {
                    let ic = sic.tile(cic);
                    let (inb, out) = node_traffic(g, i, ic, o, &df.temporal, b);
                    let mut total = inb + out;
                    if cic == 0 {
                        total += (s.reduction - 1) * out;
                    } else if j / per_l1 != root / per_l1 {
                        l2_reduction += out;
                    }
                    ma_max = ma_max.max(total);
                    ma_sum += total;
                    if j.is_multiple_of(per_l1) {
                        l1_cur = 0;
                    }
                    l1_cur += total;
                    l1_max = l1_max.max(l1_cur);
                    j += 1;
                }
            }
        }
    }

    let unique = layer.unique_bytes();
    let terms = ResourceTerms {
        compute: layer.macs().div_ceil(active * cfg.ma_comp_per_core),
        dram: unique.div_ceil(cfg.dram_bw),
        l2: (unique + l2_reduction).div_ceil(cfg.l2_bw),
        l1: l1_max.div_ceil(cfg.l1_bw),
        ma: ma_max.div_ceil(cfg.ma_bw),
    };
    let (cycles, binding) = terms.binding();
    LayerCost {
        cycles,
        binding,
        terms,
        bytes: LevelBytes {
            dram: unique,
            l2: unique + l2_reduction,
            l1: ma_sum,
            ma: ma_sum,
        },
    }
}

/// Roofline cost of one layer under a given dataflow.
pub fn simulate_layer(
    layer: &LayerSpec,
    cfg: &HardwareConfig,
    df: &Dataflow,
) -> Result<LayerCost, DataflowError> {
    dataflow::check_feasible(layer, cfg, df)?;
    Ok(layer_cost(layer, cfg, df))
}

/// Compiles and costs every layer; layers run back to back.
pub fn simulate<C: DataflowCompiler + ?Sized>(
    layers: &[LayerSpec],
    cfg: &HardwareConfig,
    compiler: &C,
) -> Result<CycleReport, DataflowError> {
    let mut report = CycleReport::default();
    for layer in layers {
        let (df, cost) = compiler.compile(layer, cfg)?;
        report.total_cycles += cost.cycles;
        report.bytes += cost.bytes;
        report.layers.push(LayerCycles {
            name: layer.name.clone(),
            cycles: cost.cycles,
            binding: cost.binding,
            bytes: cost.bytes,
            dataflow: df,
        });
    }
    Ok(report)
}

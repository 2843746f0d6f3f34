//! Deterministic accuracy proxy.
//!
//! Accuracy saturates with parameter count relative to the space's
//! canonical sub-network:
//!
//! `ceiling · (1 − exp(−params / (scale · params_canonical)))`
//!
//! plus a fixed per-architecture perturbation of at most ±0.002. Values are
//! synthetic: they order sub-networks by capacity and nothing more.

use serde::{Deserialize, Serialize};

use crate::rng::{splitmix64, Fnv64};
use crate::workload::{count_params, ArchSpace, Family, SubnetArch, WorkloadError};

pub const NOISE: f64 = 0.002;

/// Capacity scale per family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyScales {
    pub mbv3: f64,
    pub resnet: f64,
    pub vit: f64,
}

impl FamilyScales {
    pub fn get(&self, family: Family) -> f64 {
        match family {
            Family::Mbv3 => self.mbv3,
            Family::Resnet => self.resnet,
            Family::Vit => self.vit,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProxyParams {
    pub ceiling: f64,
    pub capacity_scale: FamilyScales,
    pub seed: u64,
}

impl Default for ProxyParams {
    fn default() -> Self {
        ProxyParams {
            ceiling: 0.82,
            capacity_scale: FamilyScales {
                mbv3: 0.5,
                resnet: 0.5,
                vit: 0.5,
            },
            seed: 0,
        }
    }
}

impl ProxyParams {
    pub fn validate(&self) -> Result<(), WorkloadError> {
        if !(self.ceiling > 0.0 && self.ceiling < 1.0) {
            return Err(WorkloadError::Parameter("proxy ceiling must lie in (0, 1)"));
        }
        let s = self.capacity_scale;
        if [s.mbv3, s.resnet, s.vit]
            .iter()
            .any(|v| !(*v > 0.0 && v.is_finite()))
        {
            return Err(WorkloadError::Parameter("proxy capacity scales must be positive"));
        }
        Ok(())
    }
}

/// Stable hash of every architectural choice in `subnet`.
pub fn arch_fingerprint(subnet: &SubnetArch) -> u64 {
    let mut h = Fnv64::default();
    match subnet {
        SubnetArch::Vit(v) => {
            h.write(b"vit");
            h.write_u64(u64::from(v.num_layers));
            h.write_u64(u64::from(v.num_heads));
            h.write_u64(u64::from(v.intermediate_dim));
        }
        SubnetArch::Cnn { stages } => {
            h.write(b"cnn");
            for st in stages {
                h.write_u64(u64::from(st.depth));
                for (&k, &w) in st.kernels.iter().zip(&st.widths) {
                    h.write_u64(u64::from(k));
                    h.write_u64(w.to_bits());
                }
            }
        }
    }
    h.finish()
}

/// Perturbation in `[-NOISE, NOISE]` fixed by the architecture and seed.
fn perturbation(subnet: &SubnetArch, seed: u64) -> f64 {
    let u = splitmix64(arch_fingerprint(subnet) ^ splitmix64(seed));
    let unit = (u >> 11) as f64 / (1u64 << 53) as f64;
    (2.0 * unit - 1.0) * NOISE
}

/// Proxy accuracy of `subnet`, given its parameter count.
pub fn proxy_from_params(
    subnet: &SubnetArch,
    params: u64,
    canonical_params: u64,
    scale: f64,
    p: &ProxyParams,
) -> f64 {
    let x = params as f64 / (scale * canonical_params.max(1) as f64);
    let acc = p.ceiling * (1.0 - libm::exp(-x)) + perturbation(subnet, p.seed);
    acc.max(0.0)
}

/// Proxy accuracy of `subnet` in `space`. Independent of hardware.
pub fn proxy_accuracy(
    space: &ArchSpace,
    subnet: &SubnetArch,
    params: &ProxyParams,
) -> Result<f64, WorkloadError> {
    params.validate()?;
    let n = count_params(space, subnet)?;
    let canonical = count_params(space, &space.canonical())?;
    Ok(proxy_from_params(
        subnet,
        n,
        canonical,
        params.capacity_scale.get(space.family),
        params,
    ))
}

//! NFVlet generation from task-length distributions, and the MI/MIPS runtime
//! model.

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{delta_u, AppWeights, Nfvlet, NfvletId};
use crate::rng;
use crate::workload::trace::{LoadTrace, Resource, TraceSet};

const MAX_REDRAWS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "distribution", rename_all = "snake_case", deny_unknown_fields)]
pub enum LengthDistribution {
    /// Lengths uniform on `[min, max]` MI.
    Uniform {
        min: f64,
        max: f64,
    },
    Normal {
        mean: f64,
        std_dev: f64,
    },
    Poisson {
        mean: f64,
    },
}

impl Default for LengthDistribution {
    fn default() -> Self {
        LengthDistribution::Uniform { min: 1e3, max: 1e4 }
    }
}

impl LengthDistribution {
    pub fn default_normal() -> Self {
        LengthDistribution::Normal {
            mean: 5e3,
            std_dev: 1e3,
        }
    }

    pub fn default_poisson() -> Self {
        LengthDistribution::Poisson { mean: 5e3 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            LengthDistribution::Uniform { min, max } => min > 0.0 && max >= min && max.is_finite(),
            LengthDistribution::Normal { mean, std_dev } => {
                mean > 0.0 && mean.is_finite() && std_dev >= 0.0 && std_dev.is_finite()
            }
            LengthDistribution::Poisson { mean } => mean > 0.0 && mean.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Spec(format!("invalid length distribution {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AppType {
    #[default]
    CpuIntensive,
    IoIntensive,
    Hybrid,
}

impl AppType {
    pub fn weights(&self) -> AppWeights {
        match self {
            AppType::CpuIntensive => AppWeights {
                cpu: 1.0,
                mem: 0.2,
                disk: 0.2,
                net: 0.2,
            },
            AppType::IoIntensive => AppWeights {
                cpu: 0.2,
                mem: 0.2,
                disk: 1.0,
                net: 1.0,
            },
            AppType::Hybrid => AppWeights {
                cpu: 0.6,
                mem: 0.6,
                disk: 0.6,
                net: 0.6,
            },
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AppType::CpuIntensive => "cpu_intensive",
            AppType::IoIntensive => "io_intensive",
            AppType::Hybrid => "hybrid",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorSpec {
    pub length_distribution: LengthDistribution,
    pub task_count: usize,
    pub app_type: AppType,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        self.length_distribution.validate()
    }
}

/// Draws `spec.task_count` NFVlets with ids `0..task_count`. Non-positive
/// length samples are redrawn.
pub fn generate_nfvlets<R: Rng + ?Sized>(spec: &GeneratorSpec, rng: &mut R) -> Result<Vec<Nfvlet>> {
    spec.validate()?;
    let weights = spec.app_type.weights();
    let spec_err = |e: &dyn std::fmt::Display| Error::Spec(e.to_string());
    let mut draw: Box<dyn FnMut(&mut R) -> f64> = match spec.length_distribution {
        LengthDistribution::Uniform { min, max } => {
            let d = Uniform::new_inclusive(min, max).map_err(|e| spec_err(&e))?;
            Box::new(move |r: &mut R| d.sample(r))
        }
        LengthDistribution::Normal { mean, std_dev } => {
            let d = Normal::new(mean, std_dev).map_err(|e| spec_err(&e))?;
            Box::new(move |r: &mut R| d.sample(r))
        }
        LengthDistribution::Poisson { mean } => {
            let d = Poisson::new(mean).map_err(|e| spec_err(&e))?;
            Box::new(move |r: &mut R| d.sample(r))
        }
    };
    let mut out = Vec::with_capacity(spec.task_count);
    for id in 0..spec.task_count {
        let mut length = draw(rng);
        let mut tries = 0;
        while !(length > 0.0) {
            tries += 1;
            if tries > MAX_REDRAWS {
                return Err(Error::Spec(
                    "distribution keeps producing non-positive lengths".into(),
                ));
            }
            length = draw(rng);
        }
        out.push(Nfvlet::new(NfvletId(id), length, weights));
    }
    Ok(out)
}

/// Generates from the spec's own seed.
pub fn generate_nfvlets_seeded(spec: &GeneratorSpec) -> Result<Vec<Nfvlet>> {
    generate_nfvlets(spec, &mut rng::stream(spec.seed, rng::STREAM_WORKLOAD))
}

/// Duration in seconds of an NFVlet on a VM, and the host CPU load it causes
/// while running.
pub fn nfvlet_runtime(length_mi: f64, vm_mips: f64, pm_mips: f64) -> Result<(f64, f64)> {
    if !(vm_mips > 0.0) {
        return Err(Error::ZeroCapacity("vm mips"));
    }
    Ok((length_mi / vm_mips, delta_u(vm_mips, pm_mips)?))
}

/// Renders NFVlets run back-to-back on a reference VM of `ref_mips` into four
/// per-interval traces. Each value is the weighted busy percentage of the
/// interval. Zero NFVlets render to empty value lists.
pub fn render_traces(
    nfvlets: &[Nfvlet],
    ref_mips: f64,
    interval_len: f64,
) -> Result<[(Resource, Vec<u8>); 4]> {
    if !(ref_mips > 0.0) {
        return Err(Error::ZeroCapacity("reference mips"));
    }
    if !(interval_len > 0.0) || !interval_len.is_finite() {
        return Err(Error::Spec(format!(
            "interval length must be positive, got {interval_len}"
        )));
    }
    let total: f64 = nfvlets.iter().map(|n| n.length_mi / ref_mips).sum();
    let intervals = (total / interval_len).ceil() as usize;
    let mut acc = vec![[0.0f64; 4]; intervals];
    let mut t = 0.0;
    for n in nfvlets {
        let start = t;
        let end = t + n.length_mi / ref_mips;
        let w = [n.weights.cpu, n.weights.mem, n.weights.disk, n.weights.net];
        let first = (start / interval_len).floor() as usize;
        let mut k = first;
        while k < intervals && (k as f64) * interval_len < end {
            let lo = start.max(k as f64 * interval_len);
            let hi = end.min((k + 1) as f64 * interval_len);
            if hi > lo {
                for r in 0..4 {
                    acc[k][r] += w[r] * (hi - lo);
                }
            }
            k += 1;
        }
        t = end;
    }
    let to_percent = |busy: f64| (100.0 * busy / interval_len).round().clamp(0.0, 100.0) as u8;
    Ok(Resource::ALL.map(|r| {
        let idx = r as usize;
        (r, acc.iter().map(|a| to_percent(a[idx])).collect())
    }))
}

/// Like [`render_traces`] but requires at least one interval.
pub fn render_trace_set(nfvlets: &[Nfvlet], ref_mips: f64, interval_len: f64) -> Result<TraceSet> {
    let [(_, cpu), (_, mem), (_, disk), (_, net)] = render_traces(nfvlets, ref_mips, interval_len)?;
    Ok(TraceSet {
        cpu: LoadTrace::new(Resource::Cpu, cpu, interval_len)?,
        mem: LoadTrace::new(Resource::Mem, mem, interval_len)?,
        disk: LoadTrace::new(Resource::Disk, disk, interval_len)?,
        net: LoadTrace::new(Resource::Net, net, interval_len)?,
    })
}

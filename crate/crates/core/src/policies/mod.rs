//! Placement, migration-trigger and VM-selection policies.
//!
//! Three policies are provided:
//!
//! * **DRS** places each VM on the least-loaded feasible host and, whenever
//!   the spread of host CPU utilization exceeds a threshold, greedily moves
//!   VMs off the most-loaded host while that keeps reducing the spread.
//! * **EcoCloud** scores hosts with `u^p (T_a - u) / M_p`, which peaks at
//!   `u = p T_a / (p + 1)`, and reallocates VMs from hosts outside the band
//!   `[T_b, T_a]`.
//! * **NFV** uses the same band trigger but scores hosts with
//!   `1 - f(x; alpha, beta) / 3`, `f` being the Beta density.
//!
//! All scoring is done on the utilization a host would have after receiving
//! the VM.

mod drs;
mod probabilistic;
mod scheduler;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DataCenter, PmId, VmId};

pub use drs::{drs_imbalance, drs_migrate, drs_place, imbalance_of};
pub use probabilistic::{ecocloud_score, nfv_score, probabilistic_place};
pub use scheduler::Scheduler;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Drs,
    #[serde(rename = "ecocloud")]
    EcoCloud,
    Nfv,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [PolicyKind::Drs, PolicyKind::EcoCloud, PolicyKind::Nfv];

    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::Drs => "drs",
            PolicyKind::EcoCloud => "ecocloud",
            PolicyKind::Nfv => "nfv",
        }
    }

    pub fn parse(name: &str) -> Option<PolicyKind> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == name.trim().to_ascii_lowercase())
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    #[default]
    LowestId,
    RandomSeeded,
}

impl TieBreak {
    pub fn name(&self) -> &'static str {
        match self {
            TieBreak::LowestId => "lowest_id",
            TieBreak::RandomSeeded => "random_seeded",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyParams {
    /// Upper CPU utilization threshold.
    pub t_a: f64,
    /// Lower CPU utilization bound.
    pub t_b: f64,
    /// EcoCloud exponent, one of 2, 3, 4.
    pub p: u32,
    pub alpha: f64,
    pub beta: f64,
    /// DRS imbalance threshold on the standard deviation of host utilization.
    pub drs_threshold: f64,
    pub tie_break: TieBreak,
    /// EcoCloud only: accept hosts by Bernoulli trials on their score instead
    /// of taking the argmax.
    pub stochastic: bool,
}

impl Default for PolicyParams {
    fn default() -> Self {
        PolicyParams {
            t_a: 0.9,
            t_b: 0.2,
            p: 2,
            alpha: 2.0,
            beta: 2.0,
            drs_threshold: 0.1,
            tie_break: TieBreak::LowestId,
            stochastic: false,
        }
    }
}

impl PolicyParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.t_b && self.t_b < self.t_a && self.t_a <= 1.0) {
            return Err(Error::Spec(format!(
                "need 0 <= t_b < t_a <= 1, got t_b={} t_a={}",
                self.t_b, self.t_a
            )));
        }
        if !(2..=4).contains(&self.p) {
            return Err(Error::Spec(format!("p must be 2, 3 or 4, got {}", self.p)));
        }
        if !(self.alpha > 0.0 && self.beta > 0.0)
            || !self.alpha.is_finite()
            || !self.beta.is_finite()
        {
            return Err(Error::Spec(format!(
                "Beta shape parameters must be > 0, got alpha={} beta={}",
                self.alpha, self.beta
            )));
        }
        if !(self.drs_threshold > 0.0) || !self.drs_threshold.is_finite() {
            return Err(Error::Spec(format!(
                "drs_threshold must be > 0, got {}",
                self.drs_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MigrationDecision {
    pub vm: VmId,
    pub source_pm: PmId,
    pub target_pm: PmId,
    pub tick: u64,
}

/// True if a host's CPU utilization lies outside the band `[t_b, t_a]`.
/// The lower bound only fires for hosts that have something to evacuate.
pub fn threshold_trigger(pm_util: f64, hosts_vms: bool, params: &PolicyParams) -> bool {
    pm_util > params.t_a || (hosts_vms && pm_util < params.t_b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectMode {
    /// Host is above `t_a`: largest CPU demand first.
    OverThreshold,
    /// Host is below `t_b`: every VM, smallest demand first.
    UnderThreshold,
}

/// Orders the VMs of `pm` for migration. In over-threshold mode the first
/// element is the VM to move; in under-threshold mode the whole list is the
/// evacuation order. Ties go to the lower id.
pub fn select_vm(dc: &DataCenter, pm: PmId, mode: SelectMode) -> Result<Vec<VmId>> {
    let host = dc.pm(pm);
    if host.hosted_vms.is_empty() {
        return Err(Error::NoVm(pm));
    }
    let mut vms: Vec<VmId> = host.hosted_vms.iter().copied().collect();
    let demand = |v: &VmId| dc.vm(*v).effective_cpu_milli();
    match mode {
        SelectMode::OverThreshold => {
            vms.sort_by(|a, b| demand(b).total_cmp(&demand(a)).then(a.cmp(b)))
        }
        SelectMode::UnderThreshold => {
            vms.sort_by(|a, b| demand(a).total_cmp(&demand(b)).then(a.cmp(b)))
        }
    }
    Ok(vms)
}

/// `a` beats `b` by more than a relative rounding margin.
pub(crate) fn clearly_greater(a: f64, b: f64) -> bool {
    a > b && (a - b) > 1e-12 * a.abs().max(b.abs())
}

/// Picks among tied candidates. `tied` is never empty and is in id order.
pub(crate) fn break_tie<R: Rng + ?Sized>(tied: &[PmId], tie: TieBreak, rng: &mut R) -> PmId {
    match tie {
        TieBreak::LowestId => tied[0],
        TieBreak::RandomSeeded => tied[rng.random_range(0..tied.len())],
    }
}

/// Returns the candidates whose key is maximal, in input order.
pub(crate) fn argmax_set(cands: &[(PmId, f64)]) -> Vec<PmId> {
    let mut best: Vec<PmId> = Vec::new();
    let mut best_key = f64::NEG_INFINITY;
    for &(pm, key) in cands {
        if best.is_empty() || clearly_greater(key, best_key) {
            best.clear();
            best.push(pm);
            best_key = key;
        } else if !clearly_greater(best_key, key) {
            best.push(pm);
        }
    }
    best
}

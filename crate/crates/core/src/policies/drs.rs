use rand::Rng;

use super::{
    argmax_set, break_tie, clearly_greater, select_vm, MigrationDecision, PolicyParams, SelectMode,
};
use crate::error::{Error, Result};
use crate::model::{validate_placement, DataCenter, PmId, VmId};

/// Least-loaded feasible candidate by CPU utilization.
pub fn drs_place<R: Rng + ?Sized>(
    dc: &DataCenter,
    vm: VmId,
    candidates: &[PmId],
    params: &PolicyParams,
    rng: &mut R,
) -> Result<PmId> {
    let keyed: Vec<(PmId, f64)> = candidates
        .iter()
        .filter(|&&pm| validate_placement(dc.vm(vm), dc.pm(pm)))
        .map(|&pm| (pm, -dc.cpu_util(pm)))
        .collect();
    if keyed.is_empty() {
        return Err(Error::PlacementFailed { vm });
    }
    Ok(break_tie(&argmax_set(&keyed), params.tie_break, rng))
}

/// Population standard deviation of host CPU utilizations.
pub fn drs_imbalance(utils: &[f64]) -> Result<f64> {
    if utils.is_empty() {
        return Err(Error::NoHosts);
    }
    let n = utils.len() as f64;
    let mean = utils.iter().sum::<f64>() / n;
    let var = utils.iter().map(|u| (u - mean) * (u - mean)).sum::<f64>() / n;
    Ok(var.sqrt())
}

/// Imbalance over the powered-on hosts of `dc`.
pub fn imbalance_of(dc: &DataCenter) -> Result<f64> {
    let utils: Vec<f64> = dc.powered_on().map(|pm| dc.cpu_util(pm.id)).collect();
    drs_imbalance(&utils)
}

/// Imbalance if `vm` moved from its host to `target`. A powered-off target
/// joins the set of hosts.
fn imbalance_after_move(dc: &DataCenter, vm: VmId, target: PmId) -> Result<f64> {
    let source = dc.vm(vm).host.expect("vm must be placed");
    let shift = dc.vm(vm).effective_cpu_milli();
    let utils: Vec<f64> = dc
        .pms
        .iter()
        .filter(|pm| pm.powered_on || pm.id == target)
        .map(|pm| {
            let cap = pm.capacity.cpu_milli as f64;
            let u = dc.cpu_util(pm.id);
            if pm.id == source {
                u - shift / cap
            } else if pm.id == target {
                u + shift / cap
            } else {
                u
            }
        })
        .collect();
    drs_imbalance(&utils)
}

/// Greedy rebalancing. While the imbalance exceeds the threshold, takes the
/// most-loaded host that still has a movable VM and moves the largest of its
/// VMs whose relocation to the least-loaded feasible host strictly lowers the
/// imbalance. Stops when no such move exists. `movable` filters VMs (e.g.
/// migration cool-down); a VM is moved at most once per call.
///
/// Decisions are applied to `dc` as they are made.
pub fn drs_migrate<R, M>(
    dc: &mut DataCenter,
    params: &PolicyParams,
    tick: u64,
    movable: M,
    rng: &mut R,
) -> Result<Vec<MigrationDecision>>
where
    R: Rng + ?Sized,
    M: Fn(&DataCenter, VmId) -> bool,
{
    let mut decisions = Vec::new();
    let mut moved = vec![false; dc.vms.len()];
    loop {
        let g = match imbalance_of(dc) {
            Ok(g) => g,
            Err(Error::NoHosts) => break,
            Err(e) => return Err(e),
        };
        if g <= params.drs_threshold {
            break;
        }
        let mut sources: Vec<(PmId, f64)> = dc
            .powered_on()
            .filter(|pm| !pm.is_empty())
            .map(|pm| (pm.id, dc.cpu_util(pm.id)))
            .collect();
        sources.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let eligible = |dc: &DataCenter, vm: VmId| !moved[vm.0] && movable(dc, vm);

        let Some(source) = sources
            .iter()
            .map(|s| s.0)
            .find(|&pm| dc.pm(pm).hosted_vms.iter().any(|&v| eligible(dc, v)))
        else {
            break;
        };

        let others: Vec<PmId> = dc
            .pms
            .iter()
            .map(|p| p.id)
            .filter(|&p| p != source)
            .collect();
        let mut accepted = None;
        for vm in select_vm(dc, source, SelectMode::OverThreshold)? {
            if !eligible(dc, vm) {
                continue;
            }
            let target = match drs_place(dc, vm, &others, params, rng) {
                Ok(t) => t,
                Err(Error::PlacementFailed { .. }) => continue,
                Err(e) => return Err(e),
            };
            if clearly_greater(g, imbalance_after_move(dc, vm, target)?) {
                accepted = Some((vm, target));
                break;
            }
        }
        let Some((vm, target)) = accepted else {
            break;
        };
        dc.migrate(vm, target, tick)?;
        moved[vm.0] = true;
        decisions.push(MigrationDecision {
            vm,
            source_pm: source,
            target_pm: target,
            tick,
        });
    }
    Ok(decisions)
}

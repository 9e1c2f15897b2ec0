use std::collections::BTreeSet;

use rand::Rng;

use super::{
    argmax_set, break_tie, drs_migrate, drs_place, ecocloud_score, nfv_score, select_vm,
    threshold_trigger, MigrationDecision, PolicyKind, PolicyParams, SelectMode,
};
use crate::error::{Error, Result};
use crate::model::{validate_placement, DataCenter, PmId, VmId};
use crate::rng::SimRng;

/// A policy bound to its parameters and random stream.
///
/// Placement order for the probabilistic policies: powered-on hosts that stay
/// within `t_a`, then powered-off hosts that stay within `t_a`, then (initial
/// allocation only) any feasible host. DRS considers every feasible host at
/// once, so it spreads VMs over idle machines.
#[derive(Debug, Clone)]
pub struct Scheduler {
    pub kind: PolicyKind,
    pub params: PolicyParams,
    /// Ticks a migrated VM must sit out before it may move again.
    pub cooldown: u64,
    rng: SimRng,
}

impl Scheduler {
    pub fn new(kind: PolicyKind, params: PolicyParams, cooldown: u64, rng: SimRng) -> Result<Self> {
        params.validate()?;
        Ok(Scheduler {
            kind,
            params,
            cooldown,
            rng,
        })
    }

    fn score(&self, u: f64) -> Result<f64> {
        match self.kind {
            PolicyKind::EcoCloud => ecocloud_score(u, &self.params),
            PolicyKind::Nfv => nfv_score(u, &self.params),
            PolicyKind::Drs => Ok(-u),
        }
    }

    pub fn movable(&self, dc: &DataCenter, vm: VmId, tick: u64) -> bool {
        match dc.vm(vm).last_migration_tick {
            None => true,
            Some(t) => tick > t.saturating_add(self.cooldown),
        }
    }

    /// Chooses a host for an unplaced VM.
    pub fn place(&mut self, dc: &DataCenter, vm: VmId) -> Result<PmId> {
        let all: Vec<PmId> = dc.pms.iter().map(|p| p.id).collect();
        match self.kind {
            PolicyKind::Drs => drs_place(dc, vm, &all, &self.params, &mut self.rng),
            _ => self
                .probabilistic_target(dc, vm, None, &BTreeSet::new(), true)?
                .ok_or(Error::PlacementFailed { vm }),
        }
    }

    /// Target for `vm` under a probabilistic policy, or `None`.
    fn probabilistic_target(
        &mut self,
        dc: &DataCenter,
        vm: VmId,
        exclude: Option<PmId>,
        barred: &BTreeSet<PmId>,
        allow_overflow: bool,
    ) -> Result<Option<PmId>> {
        let t_a = self.params.t_a;
        let feasible: Vec<(PmId, bool, f64)> = dc
            .pms
            .iter()
            .filter(|pm| Some(pm.id) != exclude && !barred.contains(&pm.id))
            .filter(|pm| validate_placement(dc.vm(vm), pm))
            .map(|pm| (pm.id, pm.powered_on, dc.cpu_util_with(pm.id, vm)))
            .collect();
        // (powered on, capped at t_a)
        let tiers = [(true, true), (false, true), (true, false), (false, false)];
        let usable = if allow_overflow { 4 } else { 2 };
        for (i, &(on, capped)) in tiers.iter().take(usable).enumerate() {
            let cands: Vec<(PmId, f64)> = feasible
                .iter()
                .filter(|c| c.1 == on && (!capped || c.2 <= t_a))
                .map(|c| (c.0, c.2))
                .collect();
            if cands.is_empty() {
                continue;
            }
            let mut scored = Vec::with_capacity(cands.len());
            for (pm, u) in cands {
                scored.push((pm, self.score(u)?));
            }
            if i == 0 && self.kind == PolicyKind::EcoCloud && self.params.stochastic {
                let accepted: Vec<PmId> = scored
                    .iter()
                    .filter(|(_, s)| self.rng.random_bool(s.clamp(0.0, 1.0)))
                    .map(|(pm, _)| *pm)
                    .collect();
                if !accepted.is_empty() {
                    return Ok(Some(accepted[self.rng.random_range(0..accepted.len())]));
                }
            }
            return Ok(Some(break_tie(
                &argmax_set(&scored),
                self.params.tie_break,
                &mut self.rng,
            )));
        }
        Ok(None)
    }

    /// Plans this tick's migrations. The returned decisions, applied in
    /// order, are feasible against `dc`.
    pub fn rebalance(&mut self, dc: &DataCenter, tick: u64) -> Result<Vec<MigrationDecision>> {
        let mut work = dc.clone();
        match self.kind {
            PolicyKind::Drs => {
                let cooldown = self.cooldown;
                let movable = move |dc: &DataCenter, vm: VmId| match dc.vm(vm).last_migration_tick {
                    None => true,
                    Some(t) => tick > t.saturating_add(cooldown),
                };
                drs_migrate(&mut work, &self.params, tick, movable, &mut self.rng)
            }
            PolicyKind::EcoCloud | PolicyKind::Nfv => self.band_rebalance(&mut work, tick),
        }
    }

    fn band_rebalance(
        &mut self,
        work: &mut DataCenter,
        tick: u64,
    ) -> Result<Vec<MigrationDecision>> {
        let mut decisions = Vec::new();
        let mut received: BTreeSet<PmId> = BTreeSet::new();
        let t_a = self.params.t_a;

        let hot: Vec<PmId> = work
            .powered_on()
            .filter(|pm| {
                threshold_trigger(work.cpu_util(pm.id), !pm.is_empty(), &self.params)
                    && work.cpu_util(pm.id) > t_a
            })
            .map(|pm| pm.id)
            .collect();
        for source in hot {
            while work.cpu_util(source) > t_a {
                let mut moved = false;
                for vm in select_vm(work, source, SelectMode::OverThreshold)? {
                    if !self.movable(work, vm, tick) {
                        continue;
                    }
                    if let Some(target) =
                        self.probabilistic_target(work, vm, Some(source), &BTreeSet::new(), false)?
                    {
                        work.migrate(vm, target, tick)?;
                        received.insert(target);
                        decisions.push(MigrationDecision {
                            vm,
                            source_pm: source,
                            target_pm: target,
                            tick,
                        });
                        moved = true;
                        break;
                    }
                }
                if !moved {
                    break;
                }
            }
        }

        let mut cold: Vec<(PmId, f64)> = work
            .powered_on()
            .filter(|pm| !pm.is_empty() && work.cpu_util(pm.id) < self.params.t_b)
            .map(|pm| (pm.id, work.cpu_util(pm.id)))
            .collect();
        cold.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        let mut evacuated: BTreeSet<PmId> = BTreeSet::new();
        for (source, _) in cold {
            if received.contains(&source) {
                continue;
            }
            let order = select_vm(work, source, SelectMode::UnderThreshold)?;
            if !order.iter().all(|&vm| self.movable(work, vm, tick)) {
                continue;
            }
            let mut trial = work.clone();
            let mut planned = Vec::with_capacity(order.len());
            let mut barred = evacuated.clone();
            barred.insert(source);
            for vm in order {
                // only hosts that are already on: waking one would save nothing
                let Some(target) =
                    self.probabilistic_target(&trial, vm, Some(source), &barred, false)?
                else {
                    planned.clear();
                    break;
                };
                if !trial.pm(target).powered_on {
                    planned.clear();
                    break;
                }
                trial.migrate(vm, target, tick)?;
                planned.push(MigrationDecision {
                    vm,
                    source_pm: source,
                    target_pm: target,
                    tick,
                });
            }
            if planned.is_empty() {
                continue;
            }
            *work = trial;
            evacuated.insert(source);
            for d in &planned {
                received.insert(d.target_pm);
            }
            decisions.extend(planned);
        }
        Ok(decisions)
    }
}

//! Fixed-tick simulation loop.
//!
//! Each tick runs, in order: NFVlet execution, trace refresh, policy trigger
//! and migration planning, migration application, energy integration,
//! power-off of emptied hosts, and metric collection. The data center is
//! audited after migrations and after energy integration; any violation
//! aborts the run.

use std::sync::Arc;

use rand::Rng;

use crate::catalog::Catalog;
use crate::energy::{
    integrate_tick, joules_to_kwh, PowerCoefficients, PowerMode, PowerModelConfig,
};
use crate::error::{Error, Result};
use crate::model::{DataCenter, Load, PhysicalMachine, PmId, VirtualMachine, VmId};
use crate::policies::{imbalance_of, MigrationDecision, PolicyKind, PolicyParams, Scheduler};
use crate::report::{SimReport, TickMetrics};
use crate::rng;
use crate::workload::{diurnal_profile, generate_nfvlets, DiurnalKind, GeneratorSpec, TraceSet};

/// Relative tolerance of the per-tick energy attribution audit.
pub const CLOSURE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum HostLayout {
    /// `(pm type, count)` in creation order.
    Counts(Vec<(String, usize)>),
    /// `n` hosts cycling through the catalog's PM types.
    RoundRobin(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum VmLayout {
    Counts(Vec<(String, usize)>),
    RoundRobin(usize),
    /// `n` VMs with types drawn uniformly from the catalog.
    Random(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum WorkloadSpec {
    /// Every VM runs at its full catalog demand.
    Static,
    /// The built-in one-day profile, with per-VM integer jitter in percentage points.
    Diurnal { jitter: u8 },
    /// User traces shared by all VMs, with per-VM jitter. `source` is the
    /// base path the traces were read from.
    Traces {
        traces: Arc<TraceSet>,
        jitter: u8,
        source: String,
    },
    /// MI-mode NFVlets assigned round-robin to VMs.
    Generated(GeneratorSpec),
}

impl WorkloadSpec {
    pub fn name(&self) -> &'static str {
        match self {
            WorkloadSpec::Static => "static",
            WorkloadSpec::Diurnal { .. } => "diurnal",
            WorkloadSpec::Traces { .. } => "trace",
            WorkloadSpec::Generated(_) => "generator",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Seconds.
    pub duration: f64,
    /// Seconds.
    pub tick_len: f64,
    pub hosts: HostLayout,
    pub vms: VmLayout,
    pub catalog: Catalog,
    pub cu_mips: f64,
    pub workload: WorkloadSpec,
    pub policy: PolicyKind,
    pub params: PolicyParams,
    /// Ticks a migrated VM must wait before moving again.
    pub cooldown: u64,
    pub power: PowerModelConfig,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            duration: 86_400.0,
            tick_len: 300.0,
            hosts: HostLayout::RoundRobin(100),
            vms: VmLayout::Random(100),
            catalog: Catalog::default(),
            cu_mips: crate::model::DEFAULT_CU_MIPS,
            workload: WorkloadSpec::Diurnal { jitter: 10 },
            policy: PolicyKind::Nfv,
            params: PolicyParams::default(),
            cooldown: 3,
            power: PowerModelConfig::default(),
            seed: 1,
        }
    }
}

impl SimConfig {
    pub fn tick_count(&self) -> Result<u64> {
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return Err(Error::Config(format!(
                "duration must be > 0, got {}",
                self.duration
            )));
        }
        if !(self.tick_len > 0.0) || !self.tick_len.is_finite() {
            return Err(Error::Config(format!(
                "tick must be > 0, got {}",
                self.tick_len
            )));
        }
        let n = (self.duration / self.tick_len).round();
        if n < 1.0 || ((n * self.tick_len) - self.duration).abs() > 1e-9 * self.duration {
            return Err(Error::Config(format!(
                "duration ({}) is not a multiple of tick ({})",
                self.duration, self.tick_len
            )));
        }
        Ok(n as u64)
    }

    pub fn validate(&self) -> Result<()> {
        self.tick_count()?;
        self.params.validate()?;
        self.power.validate()?;
        if !(self.cu_mips > 0.0) {
            return Err(Error::Config(format!(
                "cu_mips must be > 0, got {}",
                self.cu_mips
            )));
        }
        if let WorkloadSpec::Generated(spec) = &self.workload {
            spec.validate()?;
        }
        Ok(())
    }
}

fn expand(counts: &[(String, usize)]) -> impl Iterator<Item = &str> {
    counts
        .iter()
        .flat_map(|(name, n)| std::iter::repeat_n(name.as_str(), *n))
}

/// Builds the policy-independent starting state: machines, unplaced VMs and
/// their workload. Identical configs and seeds give identical scenarios.
pub fn realize(cfg: &SimConfig) -> Result<DataCenter> {
    cfg.validate()?;
    let cat = &cfg.catalog;
    if cat.pms.is_empty() || cat.vms.is_empty() {
        return Err(Error::Config("catalog has no PM or no VM types".into()));
    }

    let pm_types: Vec<usize> = match &cfg.hosts {
        HostLayout::Counts(c) => expand(c)
            .map(|n| {
                cat.pm_type(n)
                    .map(|t| t.0)
                    .ok_or_else(|| Error::Config(format!("unknown PM type {n:?}")))
            })
            .collect::<Result<_>>()?,
        HostLayout::RoundRobin(n) => (0..*n).map(|i| i % cat.pms.len()).collect(),
    };
    let mut scenario_rng = rng::stream(cfg.seed, rng::STREAM_SCENARIO);
    let vm_types: Vec<usize> = match &cfg.vms {
        VmLayout::Counts(c) => expand(c)
            .map(|n| {
                cat.vm_type(n)
                    .map(|t| t.0)
                    .ok_or_else(|| Error::Config(format!("unknown VM type {n:?}")))
            })
            .collect::<Result<_>>()?,
        VmLayout::RoundRobin(n) => (0..*n).map(|i| i % cat.vms.len()).collect(),
        VmLayout::Random(n) => (0..*n)
            .map(|_| scenario_rng.random_range(0..cat.vms.len()))
            .collect(),
    };

    let pms = pm_types
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let s = &cat.pms[t];
            PhysicalMachine::new(PmId(i), t, s.capacity, s.p_min, s.p_max, cfg.cu_mips)
        })
        .collect();
    let vms = vm_types
        .iter()
        .enumerate()
        .map(|(i, &t)| VirtualMachine::new(VmId(i), t, cat.vms[t].demand, cfg.cu_mips))
        .collect();
    let mut dc = DataCenter::new(pms, vms, cfg.cu_mips);

    let mut workload_rng = rng::stream(cfg.seed, rng::STREAM_WORKLOAD);
    let mut attach = |dc: &mut DataCenter, base: TraceSet, jitter: u8| {
        let shared = Arc::new(base);
        for vm in &mut dc.vms {
            vm.profile = Some(if jitter == 0 {
                shared.clone()
            } else {
                Arc::new(shared.jittered(jitter, &mut workload_rng))
            });
        }
    };
    match &cfg.workload {
        WorkloadSpec::Static => {}
        WorkloadSpec::Diurnal { jitter } => attach(
            &mut dc,
            diurnal_profile(DiurnalKind::ComputationalIntensive),
            *jitter,
        ),
        WorkloadSpec::Traces { traces, jitter, .. } => attach(&mut dc, (**traces).clone(), *jitter),
        WorkloadSpec::Generated(spec) => {
            let mut nfvlets = generate_nfvlets(spec, &mut workload_rng)?;
            if !dc.vms.is_empty() {
                let n = dc.vms.len();
                for (i, task) in nfvlets.iter_mut().enumerate() {
                    let vm = VmId(i % n);
                    task.vm = Some(vm);
                    dc.vms[vm.0].attached_nfvlets.push(task.id);
                }
            }
            for vm in &mut dc.vms {
                vm.load = Load::IDLE;
            }
            dc.nfvlets = nfvlets;
        }
    }
    Ok(dc)
}

/// Places every VM, in id order, with the scheduler's placement rule.
/// Hosts power on when they receive their first VM.
pub fn initial_allocation(
    dc: &mut DataCenter,
    scheduler: &mut Scheduler,
) -> Result<Vec<(VmId, PmId)>> {
    let mut placed = Vec::with_capacity(dc.vms.len());
    for i in 0..dc.vms.len() {
        let vm = VmId(i);
        if dc.vm(vm).host.is_some() {
            continue;
        }
        let pm = scheduler.place(dc, vm).map_err(|e| match e {
            Error::PlacementFailed { .. } => Error::PlacementFailed { vm },
            other => other,
        })?;
        dc.place(vm, pm)?;
        placed.push((vm, pm));
    }
    Ok(placed)
}

pub struct Simulation {
    cfg: SimConfig,
    dc: DataCenter,
    scheduler: Scheduler,
    coefficients: Vec<PowerCoefficients>,
    tick: u64,
    n_ticks: u64,
    migrations: u64,
    series: Vec<TickMetrics>,
    last_decisions: Vec<MigrationDecision>,
}

impl Simulation {
    /// Realizes the scenario from `cfg` and performs initial allocation.
    pub fn new(cfg: &SimConfig) -> Result<Self> {
        let dc = realize(cfg)?;
        Self::from_scenario(cfg, dc)
    }

    /// Starts from an already realized scenario (see [`realize`]).
    pub fn from_scenario(cfg: &SimConfig, mut dc: DataCenter) -> Result<Self> {
        cfg.validate()?;
        let n_ticks = cfg.tick_count()?;
        let mut scheduler = Scheduler::new(
            cfg.policy,
            cfg.params,
            cfg.cooldown,
            rng::stream(cfg.seed, rng::STREAM_POLICY),
        )?;
        let coefficients = dc
            .pms
            .iter()
            .map(|pm| {
                *cfg.power
                    .coefficients_for(&cfg.catalog.pms[pm.pm_type].name)
            })
            .collect();
        refresh_loads(&mut dc, 0.0, cfg.tick_len, true);
        initial_allocation(&mut dc, &mut scheduler)?;
        dc.audit()
            .map_err(|what| Error::InvariantViolation { tick: 0, what })?;
        Ok(Simulation {
            cfg: cfg.clone(),
            dc,
            scheduler,
            coefficients,
            tick: 0,
            n_ticks,
            migrations: 0,
            series: Vec::with_capacity(n_ticks as usize),
            last_decisions: Vec::new(),
        })
    }

    pub fn datacenter(&self) -> &DataCenter {
        &self.dc
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn is_finished(&self) -> bool {
        self.tick >= self.n_ticks
    }

    pub fn migrations(&self) -> u64 {
        self.migrations
    }

    pub fn time_series(&self) -> &[TickMetrics] {
        &self.series
    }

    /// Decisions applied during the most recent step.
    pub fn last_decisions(&self) -> &[MigrationDecision] {
        &self.last_decisions
    }

    /// Advances one tick.
    pub fn step(&mut self) -> Result<()> {
        let tick = self.tick;
        let now = tick as f64 * self.cfg.tick_len;
        let dt = self.cfg.tick_len;

        advance_nfvlets(&mut self.dc, dt);
        refresh_loads(&mut self.dc, now, dt, false);

        let decisions = self.scheduler.rebalance(&self.dc, tick)?;
        for d in &decisions {
            if self.dc.vm(d.vm).host != Some(d.source_pm) {
                return Err(Error::InvariantViolation {
                    tick,
                    what: format!(
                        "decision for VM {} names wrong source {}",
                        d.vm, d.source_pm
                    ),
                });
            }
            self.dc
                .migrate(d.vm, d.target_pm, tick)
                .map_err(|e| Error::InvariantViolation {
                    tick,
                    what: format!("migration of VM {} to PM {} failed: {e}", d.vm, d.target_pm),
                })?;
        }
        self.migrations += decisions.len() as u64;
        self.dc
            .audit()
            .map_err(|what| Error::InvariantViolation { tick, what })?;

        let mode = self.cfg.power.mode;
        let rates = self.cfg.power.rates;
        let mut util_sum = 0.0;
        let mut on = 0usize;
        let g = imbalance_of(&self.dc).unwrap_or(0.0);
        for i in 0..self.dc.pms.len() {
            if !self.dc.pms[i].powered_on {
                continue;
            }
            util_sum += self.dc.cpu_util(PmId(i));
            on += 1;
            let DataCenter { pms, vms, .. } = &mut self.dc;
            integrate_tick(
                &mut pms[i],
                vms,
                dt,
                mode,
                &self.coefficients[i],
                &rates,
                now,
            )?;
        }
        self.audit_energy(tick)?;

        for pm in &mut self.dc.pms {
            if pm.powered_on && pm.hosted_vms.is_empty() {
                pm.powered_on = false;
            }
        }

        let total: f64 = self.dc.pms.iter().map(|p| p.energy_joules).sum();
        self.series.push(TickMetrics {
            tick,
            seconds: now + dt,
            cumulative_kwh: joules_to_kwh(total),
            mean_cpu_util: if on == 0 { 0.0 } else { util_sum / on as f64 },
            imbalance_g: g,
            migrations_so_far: self.migrations,
        });
        self.last_decisions = decisions;
        self.tick += 1;
        Ok(())
    }

    fn audit_energy(&self, tick: u64) -> Result<()> {
        for pm in &self.dc.pms {
            if pm.power_on_time > (tick + 1) as f64 * self.cfg.tick_len * (1.0 + 1e-12) {
                return Err(Error::InvariantViolation {
                    tick,
                    what: format!("PM {} on-time exceeds simulated time", pm.id),
                });
            }
            let floor = match self.cfg.power.mode {
                PowerMode::CpuShare => pm.p_min,
                PowerMode::MultiDimensional => self.coefficients[pm.id.0].c0,
            } * pm.power_on_time;
            if pm.energy_joules < floor * (1.0 - CLOSURE_TOLERANCE) {
                return Err(Error::InvariantViolation {
                    tick,
                    what: format!("PM {} energy below its idle floor", pm.id),
                });
            }
            if self.cfg.power.mode == PowerMode::CpuShare {
                let dynamic = pm.energy_joules - pm.p_min * pm.power_on_time;
                if (dynamic - pm.attributed_joules).abs()
                    > CLOSURE_TOLERANCE * pm.energy_joules.max(1.0)
                {
                    return Err(Error::InvariantViolation {
                        tick,
                        what: format!("PM {} energy attribution does not close", pm.id),
                    });
                }
            }
        }
        let per_vm: u64 = self.dc.vms.iter().map(|v| v.migration_count).sum();
        if per_vm != self.migrations {
            return Err(Error::InvariantViolation {
                tick,
                what: format!(
                    "{} migrations applied but VM counters sum to {per_vm}",
                    self.migrations
                ),
            });
        }
        Ok(())
    }

    pub fn run_to_end(mut self) -> Result<SimReport> {
        while !self.is_finished() {
            self.step()?;
        }
        Ok(self.report())
    }

    pub fn report(&self) -> SimReport {
        SimReport::build(
            &self.cfg,
            &self.dc,
            self.migrations,
            self.tick,
            self.series.clone(),
        )
    }
}

/// Executes queued NFVlets for one tick and sets each MI-driven VM's load to
/// its busy fraction, weighted per resource. VMs driven by traces or running
/// statically are left alone.
fn advance_nfvlets(dc: &mut DataCenter, dt: f64) {
    if dc.nfvlets.is_empty() {
        return;
    }
    let DataCenter { vms, nfvlets, .. } = dc;
    for vm in vms.iter_mut() {
        let mut load = Load::IDLE;
        let mut capacity = vm.mips * dt;
        let mut finished = 0;
        for id in &vm.attached_nfvlets {
            if !(capacity > 0.0) {
                break;
            }
            let task = &mut nfvlets[id.0];
            let run = task.remaining_mi.min(capacity);
            task.remaining_mi -= run;
            capacity -= run;
            let frac = run / (vm.mips * dt);
            load.cpu += frac * task.weights.cpu;
            load.mem += frac * task.weights.mem;
            load.disk += frac * task.weights.disk;
            load.net += frac * task.weights.net;
            if task.is_finished() {
                finished += 1;
            } else {
                break;
            }
        }
        vm.attached_nfvlets.drain(..finished);
        vm.load = Load {
            cpu: load.cpu.min(1.0),
            mem: load.mem.min(1.0),
            disk: load.disk.min(1.0),
            net: load.net.min(1.0),
        };
    }
}

/// Sets trace-driven loads for the interval containing `now`. With
/// `preview`, MI-driven VMs get the busy fraction they will have in the
/// first tick so that initial placement sees their load.
fn refresh_loads(dc: &mut DataCenter, now: f64, dt: f64, preview: bool) {
    let DataCenter { vms, nfvlets, .. } = dc;
    for vm in vms.iter_mut() {
        if let Some(profile) = &vm.profile {
            vm.load = profile.load_at(now);
        } else if preview && !nfvlets.is_empty() {
            let pending: f64 = vm
                .attached_nfvlets
                .iter()
                .map(|id| nfvlets[id.0].remaining_mi)
                .sum();
            let busy = if vm.mips > 0.0 {
                (pending / (vm.mips * dt)).min(1.0)
            } else {
                0.0
            };
            let w = vm
                .attached_nfvlets
                .first()
                .map(|id| nfvlets[id.0].weights)
                .unwrap_or_default();
            vm.load = Load {
                cpu: busy * w.cpu,
                mem: busy * w.mem,
                disk: busy * w.disk,
                net: busy * w.net,
            };
        }
    }
}

/// Runs a whole simulation.
pub fn run(cfg: &SimConfig) -> Result<SimReport> {
    Simulation::new(cfg)?.run_to_end()
}

/// Runs `cfg` on an already realized scenario.
pub fn run_scenario(cfg: &SimConfig, scenario: DataCenter) -> Result<SimReport> {
    Simulation::from_scenario(cfg, scenario)?.run_to_end()
}

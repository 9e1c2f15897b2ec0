//! Machines, VMs, NFVlets and the resource arithmetic they share.
//!
//! Quantities are stored as integers (milli-CU, MB, GB, Mbit/s) so that
//! capacity checks are exact. Loads are fractions in `[0, 1]` that scale a
//! VM's catalog demand into the demand it currently exerts.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::{Add, Sub};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::workload::TraceSet;

/// MIPS delivered by one compute unit unless configured otherwise.
pub const DEFAULT_CU_MIPS: f64 = 1000.0;

macro_rules! id_type {
    ($name:ident) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub usize);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

id_type!(PmId);
id_type!(VmId);
id_type!(NfvletId);

/// Four-dimensional capacity or demand.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct ResourceVector {
    /// Thousandths of a compute unit.
    pub cpu_milli: u64,
    pub memory_mb: u64,
    pub storage_gb: u64,
    pub bandwidth_mbps: u64,
}

impl ResourceVector {
    pub const ZERO: ResourceVector = ResourceVector::new(0, 0, 0, 0);

    pub const fn new(cpu_milli: u64, memory_mb: u64, storage_gb: u64, bandwidth_mbps: u64) -> Self {
        Self {
            cpu_milli,
            memory_mb,
            storage_gb,
            bandwidth_mbps,
        }
    }

    /// True if every component of `self` is ≤ the matching one in `other`.
    pub fn fits_within(&self, other: &ResourceVector) -> bool {
        self.cpu_milli <= other.cpu_milli
            && self.memory_mb <= other.memory_mb
            && self.storage_gb <= other.storage_gb
            && self.bandwidth_mbps <= other.bandwidth_mbps
    }

    pub fn checked_sub(&self, other: &ResourceVector) -> Option<ResourceVector> {
        Some(ResourceVector {
            cpu_milli: self.cpu_milli.checked_sub(other.cpu_milli)?,
            memory_mb: self.memory_mb.checked_sub(other.memory_mb)?,
            storage_gb: self.storage_gb.checked_sub(other.storage_gb)?,
            bandwidth_mbps: self.bandwidth_mbps.checked_sub(other.bandwidth_mbps)?,
        })
    }

    pub fn components(&self) -> [u64; 4] {
        [
            self.cpu_milli,
            self.memory_mb,
            self.storage_gb,
            self.bandwidth_mbps,
        ]
    }

    pub fn cpu_cu(&self) -> f64 {
        self.cpu_milli as f64 / 1000.0
    }
}

impl Add for ResourceVector {
    type Output = ResourceVector;

    fn add(self, rhs: ResourceVector) -> ResourceVector {
        ResourceVector {
            cpu_milli: self.cpu_milli + rhs.cpu_milli,
            memory_mb: self.memory_mb + rhs.memory_mb,
            storage_gb: self.storage_gb + rhs.storage_gb,
            bandwidth_mbps: self.bandwidth_mbps + rhs.bandwidth_mbps,
        }
    }
}

impl Sub for ResourceVector {
    type Output = ResourceVector;

    /// Panics on underflow; use [`ResourceVector::checked_sub`] when that is possible.
    fn sub(self, rhs: ResourceVector) -> ResourceVector {
        self.checked_sub(&rhs)
            .expect("resource vector subtraction underflow")
    }
}

/// Per-resource load fractions in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Load {
    pub cpu: f64,
    pub mem: f64,
    pub disk: f64,
    pub net: f64,
}

impl Load {
    pub const FULL: Load = Load::uniform(1.0);
    pub const IDLE: Load = Load::uniform(0.0);

    pub const fn uniform(x: f64) -> Self {
        Load {
            cpu: x,
            mem: x,
            disk: x,
            net: x,
        }
    }
}

impl Default for Load {
    fn default() -> Self {
        Load::FULL
    }
}

#[derive(Debug, Clone)]
pub struct PhysicalMachine {
    pub id: PmId,
    /// Index into the PM catalog.
    pub pm_type: usize,
    pub capacity: ResourceVector,
    pub p_min: f64,
    pub p_max: f64,
    pub mips: f64,
    pub powered_on: bool,
    pub hosted_vms: BTreeSet<VmId>,
    /// Sum of catalog demand of hosted VMs.
    pub reserved: ResourceVector,
    /// Seconds spent powered on.
    pub power_on_time: f64,
    pub energy_joules: f64,
    /// Part of `energy_joules` attributed to hosted VMs.
    pub attributed_joules: f64,
}

impl PhysicalMachine {
    pub fn new(
        id: PmId,
        pm_type: usize,
        capacity: ResourceVector,
        p_min: f64,
        p_max: f64,
        cu_mips: f64,
    ) -> Self {
        PhysicalMachine {
            id,
            pm_type,
            capacity,
            p_min,
            p_max,
            mips: capacity.cpu_cu() * cu_mips,
            powered_on: false,
            hosted_vms: BTreeSet::new(),
            reserved: ResourceVector::ZERO,
            power_on_time: 0.0,
            energy_joules: 0.0,
            attributed_joules: 0.0,
        }
    }

    pub fn residual(&self) -> ResourceVector {
        self.capacity - self.reserved
    }

    pub fn is_empty(&self) -> bool {
        self.hosted_vms.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct VirtualMachine {
    pub id: VmId,
    /// Index into the VM catalog.
    pub vm_type: usize,
    pub demand: ResourceVector,
    pub mips: f64,
    pub host: Option<PmId>,
    /// NFVlets in execution order.
    pub attached_nfvlets: Vec<NfvletId>,
    pub migration_count: u64,
    pub energy_joules: f64,
    pub load: Load,
    pub last_migration_tick: Option<u64>,
    pub profile: Option<Arc<TraceSet>>,
}

impl VirtualMachine {
    pub fn new(id: VmId, vm_type: usize, demand: ResourceVector, cu_mips: f64) -> Self {
        VirtualMachine {
            id,
            vm_type,
            demand,
            mips: demand.cpu_cu() * cu_mips,
            host: None,
            attached_nfvlets: Vec::new(),
            migration_count: 0,
            energy_joules: 0.0,
            load: Load::FULL,
            last_migration_tick: None,
            profile: None,
        }
    }

    /// CPU demand currently exerted, in milli-CU.
    pub fn effective_cpu_milli(&self) -> f64 {
        self.demand.cpu_milli as f64 * self.load.cpu
    }

    pub fn effective_mips(&self) -> f64 {
        self.mips * self.load.cpu
    }
}

/// Per-resource weights applied to a VM's load while it executes NFVlets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AppWeights {
    pub cpu: f64,
    pub mem: f64,
    pub disk: f64,
    pub net: f64,
}

impl Default for AppWeights {
    fn default() -> Self {
        AppWeights {
            cpu: 1.0,
            mem: 1.0,
            disk: 1.0,
            net: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Nfvlet {
    pub id: NfvletId,
    pub length_mi: f64,
    pub remaining_mi: f64,
    pub vm: Option<VmId>,
    pub weights: AppWeights,
}

impl Nfvlet {
    pub fn new(id: NfvletId, length_mi: f64, weights: AppWeights) -> Self {
        Nfvlet {
            id,
            length_mi,
            remaining_mi: length_mi,
            vm: None,
            weights,
        }
    }

    pub fn is_finished(&self) -> bool {
        self.remaining_mi <= 0.0
    }
}

/// True if `pm` has residual capacity for `vm`'s catalog demand in every
/// component. A powered-off PM is judged by its full capacity.
pub fn validate_placement(vm: &VirtualMachine, pm: &PhysicalMachine) -> bool {
    fits(&vm.demand, pm)
}

pub fn fits(demand: &ResourceVector, pm: &PhysicalMachine) -> bool {
    (pm.reserved + *demand).fits_within(&pm.capacity)
}

/// Component-wise utilization of `pm` from the demand its VMs currently exert.
pub fn pm_utilization(pm: &PhysicalMachine, vms: &[VirtualMachine]) -> Result<[f64; 4]> {
    const NAMES: [&str; 4] = ["cpu", "memory", "storage", "bandwidth"];
    let cap = pm.capacity.components();
    if let Some(i) = cap.iter().position(|&c| c == 0) {
        return Err(Error::ZeroCapacity(NAMES[i]));
    }
    let mut used = [0.0f64; 4];
    for vm in pm.hosted_vms.iter().map(|id| &vms[id.0]) {
        let d = vm.demand.components();
        let l = [vm.load.cpu, vm.load.mem, vm.load.disk, vm.load.net];
        for k in 0..4 {
            used[k] += d[k] as f64 * l[k];
        }
    }
    let mut out = [0.0; 4];
    for k in 0..4 {
        out[k] = used[k] / cap[k] as f64;
    }
    Ok(out)
}

static DELTA_U_CLAMPED: AtomicU64 = AtomicU64::new(0);

/// Number of times [`delta_u`] has clamped a ratio above 1 in this process.
pub fn delta_u_clamp_count() -> u64 {
    DELTA_U_CLAMPED.load(Ordering::Relaxed)
}

/// Increase in host CPU utilization caused by a VM: `vm_cpu / pm_cpu`.
///
/// Both arguments must be in the same unit (CU or MIPS). Ratios above 1 are
/// clamped and counted.
pub fn delta_u(vm_cpu: f64, pm_cpu: f64) -> Result<f64> {
    if pm_cpu <= 0.0 {
        return Err(Error::ZeroCapacity("cpu"));
    }
    let ratio = vm_cpu.max(0.0) / pm_cpu;
    if ratio > 1.0 {
        DELTA_U_CLAMPED.fetch_add(1, Ordering::Relaxed);
        log::warn!("VM cpu {vm_cpu} exceeds host cpu {pm_cpu}; clamping share to 1");
        return Ok(1.0);
    }
    Ok(ratio)
}

/// The simulated data center: machines, VMs and NFVlets, indexed by id.
#[derive(Debug, Clone)]
pub struct DataCenter {
    pub pms: Vec<PhysicalMachine>,
    pub vms: Vec<VirtualMachine>,
    pub nfvlets: Vec<Nfvlet>,
    pub cu_mips: f64,
}

impl DataCenter {
    pub fn new(pms: Vec<PhysicalMachine>, vms: Vec<VirtualMachine>, cu_mips: f64) -> Self {
        DataCenter {
            pms,
            vms,
            nfvlets: Vec::new(),
            cu_mips,
        }
    }

    pub fn pm(&self, id: PmId) -> &PhysicalMachine {
        &self.pms[id.0]
    }

    pub fn vm(&self, id: VmId) -> &VirtualMachine {
        &self.vms[id.0]
    }

    /// Effective CPU utilization of a PM in `[0, 1]`.
    pub fn cpu_util(&self, pm: PmId) -> f64 {
        let pm = self.pm(pm);
        if pm.capacity.cpu_milli == 0 {
            return 0.0;
        }
        let used: f64 = pm
            .hosted_vms
            .iter()
            .map(|v| self.vm(*v).effective_cpu_milli())
            .sum();
        used / pm.capacity.cpu_milli as f64
    }

    /// CPU utilization `pm` would have after also hosting `vm`.
    pub fn cpu_util_with(&self, pm: PmId, vm: VmId) -> f64 {
        let cap = self.pm(pm).capacity.cpu_milli as f64;
        if cap == 0.0 {
            return 0.0;
        }
        self.cpu_util(pm) + self.vm(vm).effective_cpu_milli() / cap
    }

    pub fn powered_on(&self) -> impl Iterator<Item = &PhysicalMachine> {
        self.pms.iter().filter(|p| p.powered_on)
    }

    /// Hosts `vm` on `pm`, powering the PM on if needed.
    pub fn place(&mut self, vm: VmId, pm: PmId) -> Result<()> {
        if self.vms[vm.0].host.is_some() {
            return Err(Error::Spec(format!("VM {vm} is already placed")));
        }
        if !validate_placement(&self.vms[vm.0], &self.pms[pm.0]) {
            return Err(Error::PlacementFailed { vm });
        }
        let demand = self.vms[vm.0].demand;
        let host = &mut self.pms[pm.0];
        host.powered_on = true;
        host.hosted_vms.insert(vm);
        host.reserved = host.reserved + demand;
        self.vms[vm.0].host = Some(pm);
        Ok(())
    }

    /// Moves a placed VM to `target` and bumps its migration counter.
    pub fn migrate(&mut self, vm: VmId, target: PmId, tick: u64) -> Result<()> {
        let source = self.vms[vm.0]
            .host
            .ok_or_else(|| Error::Spec(format!("VM {vm} is not placed")))?;
        if source == target {
            return Err(Error::Spec(format!("VM {vm} already on PM {target}")));
        }
        if !validate_placement(&self.vms[vm.0], &self.pms[target.0]) {
            return Err(Error::PlacementFailed { vm });
        }
        let demand = self.vms[vm.0].demand;
        let src = &mut self.pms[source.0];
        src.hosted_vms.remove(&vm);
        src.reserved = src.reserved - demand;
        let dst = &mut self.pms[target.0];
        dst.powered_on = true;
        dst.hosted_vms.insert(vm);
        dst.reserved = dst.reserved + demand;
        let v = &mut self.vms[vm.0];
        v.host = Some(target);
        v.migration_count += 1;
        v.last_migration_tick = Some(tick);
        Ok(())
    }

    /// Checks capacity feasibility and VM conservation.
    pub fn audit(&self) -> std::result::Result<(), String> {
        let mut seen = vec![false; self.vms.len()];
        for pm in &self.pms {
            if !pm.powered_on && !pm.hosted_vms.is_empty() {
                return Err(format!("PM {} is off but hosts VMs", pm.id));
            }
            let mut sum = ResourceVector::ZERO;
            for v in &pm.hosted_vms {
                let vm = self
                    .vms
                    .get(v.0)
                    .ok_or_else(|| format!("PM {} hosts unknown VM {v}", pm.id))?;
                if seen[v.0] {
                    return Err(format!("VM {v} hosted twice"));
                }
                seen[v.0] = true;
                if vm.host != Some(pm.id) {
                    return Err(format!("VM {v} host field disagrees with PM {}", pm.id));
                }
                sum = sum + vm.demand;
            }
            if sum != pm.reserved {
                return Err(format!("PM {} reservation ledger out of sync", pm.id));
            }
            if !sum.fits_within(&pm.capacity) {
                return Err(format!("PM {} over capacity", pm.id));
            }
        }
        for vm in &self.vms {
            if vm.host.is_some() != seen[vm.id.0] {
                return Err(format!("VM {} host field without hosting PM", vm.id));
            }
        }
        Ok(())
    }
}

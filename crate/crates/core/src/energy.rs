//! Power and energy accounting.
//!
//! Two models are available. The multi-dimensional blade-server model gives
//! instantaneous power as an affine function of CPU, memory, disk and
//! network activity. The CPU-share model charges every powered-on host its
//! idle power and attributes the dynamic range `p_max - p_min` to VMs in
//! proportion to the CPU share they occupy.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{delta_u, PhysicalMachine, VirtualMachine};

pub const JOULES_PER_KWH: f64 = 3.6e6;

pub fn joules_to_kwh(j: f64) -> f64 {
    j / JOULES_PER_KWH
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilizationSample {
    /// Percent, `0..=100`.
    pub u_cpu: f64,
    pub u_mem: f64,
    /// KB/s.
    pub u_disk: f64,
    /// KB/s.
    pub u_net: f64,
    pub timestamp: f64,
}

impl UtilizationSample {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=100.0).contains(&self.u_cpu) {
            return Err(Error::InvalidSample(format!(
                "u_cpu {} outside [0, 100]",
                self.u_cpu
            )));
        }
        for (name, v) in [
            ("u_mem", self.u_mem),
            ("u_disk", self.u_disk),
            ("u_net", self.u_net),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidSample(format!("{name} = {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerMode {
    MultiDimensional,
    #[default]
    CpuShare,
}

impl PowerMode {
    pub fn name(&self) -> &'static str {
        match self {
            PowerMode::MultiDimensional => "multi_dimensional",
            PowerMode::CpuShare => "cpu_share",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PowerCoefficients {
    pub c0: f64,
    pub c_cpu: f64,
    pub c_mem: f64,
    pub c_disk: f64,
    pub c_net: f64,
}

impl Default for PowerCoefficients {
    fn default() -> Self {
        PowerCoefficients {
            c0: 14.5,
            c_cpu: 0.2,
            c_mem: 4.5e-8,
            c_disk: 0.003,
            c_net: 3.1e-8,
        }
    }
}

/// Absolute activity rates that correspond to 100% load, used to turn load
/// percentages into the counters the multi-dimensional model expects.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ActivityRates {
    /// Memory operations per second.
    pub mem: f64,
    /// Disk KB/s.
    pub disk: f64,
    /// Network KB/s.
    pub net: f64,
}

impl Default for ActivityRates {
    fn default() -> Self {
        ActivityRates {
            mem: 1e9,
            disk: 1e5,
            net: 1e5,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PowerModelConfig {
    pub mode: PowerMode,
    pub coefficients: PowerCoefficients,
    /// Coefficient overrides keyed by PM type name.
    pub type_coefficients: BTreeMap<String, PowerCoefficients>,
    pub rates: ActivityRates,
}

impl PowerModelConfig {
    pub fn coefficients_for(&self, pm_type: &str) -> &PowerCoefficients {
        self.type_coefficients
            .get(pm_type)
            .unwrap_or(&self.coefficients)
    }

    pub fn validate(&self) -> Result<()> {
        for c in std::iter::once(&self.coefficients).chain(self.type_coefficients.values()) {
            if !(c.c0 >= 0.0) {
                return Err(Error::Spec(format!(
                    "power coefficient c0 must be >= 0, got {}",
                    c.c0
                )));
            }
        }
        Ok(())
    }
}

/// Instantaneous power in watts from the multi-dimensional model.
pub fn power_multidim(sample: &UtilizationSample, c: &PowerCoefficients) -> Result<f64> {
    sample.validate()?;
    Ok(c.c0
        + c.c_cpu * sample.u_cpu
        + c.c_mem * sample.u_mem
        + c.c_disk * sample.u_disk
        + c.c_net * sample.u_net)
}

/// Energy attributed to one VM over `[t0, t1]` at a fixed CPU share.
pub fn vm_energy(p_max: f64, p_min: f64, t0: f64, t1: f64, cpu_share: f64) -> Result<f64> {
    if t1 < t0 {
        return Err(Error::NegativeInterval { t0, t1 });
    }
    Ok((p_max - p_min) * (t1 - t0) * cpu_share)
}

/// Idle energy over the PM's on-time plus the energy of the VMs it ran.
pub fn pm_energy(pm: &PhysicalMachine, vm_energies: &[f64]) -> f64 {
    pm.p_min * pm.power_on_time + vm_energies.iter().sum::<f64>()
}

pub fn datacenter_energy(pm_energies: &[f64]) -> f64 {
    pm_energies.iter().sum()
}

/// Builds the multi-dimensional sample of a PM from the loads of its VMs.
pub fn sample_for(
    pm: &PhysicalMachine,
    vms: &[VirtualMachine],
    rates: &ActivityRates,
    timestamp: f64,
) -> Result<UtilizationSample> {
    let mut cpu = 0.0;
    let (mut mem, mut disk, mut net) = (0.0, 0.0, 0.0);
    for vm in pm.hosted_vms.iter().map(|id| &vms[id.0]) {
        cpu += delta_u(vm.effective_mips(), pm.mips)?;
        mem += vm.demand.memory_mb as f64 * vm.load.mem;
        disk += vm.demand.storage_gb as f64 * vm.load.disk;
        net += vm.demand.bandwidth_mbps as f64 * vm.load.net;
    }
    let frac = |used: f64, cap: u64| {
        if cap == 0 {
            0.0
        } else {
            (used / cap as f64).clamp(0.0, 1.0)
        }
    };
    Ok(UtilizationSample {
        u_cpu: (100.0 * cpu).clamp(0.0, 100.0),
        u_mem: rates.mem * frac(mem, pm.capacity.memory_mb),
        u_disk: rates.disk * frac(disk, pm.capacity.storage_gb),
        u_net: rates.net * frac(net, pm.capacity.bandwidth_mbps),
        timestamp,
    })
}

/// Integrates one tick of piecewise-constant power on `pm` and returns the
/// joules added. In CPU-share mode the dynamic part is also credited to the
/// hosted VMs. A powered-off PM accrues nothing.
pub fn integrate_tick(
    pm: &mut PhysicalMachine,
    vms: &mut [VirtualMachine],
    tick_len: f64,
    mode: PowerMode,
    coefficients: &PowerCoefficients,
    rates: &ActivityRates,
    now: f64,
) -> Result<f64> {
    if !pm.powered_on {
        return Ok(0.0);
    }
    if !(tick_len >= 0.0) {
        return Err(Error::NegativeInterval {
            t0: now,
            t1: now + tick_len,
        });
    }
    let added = match mode {
        PowerMode::MultiDimensional => {
            let sample = sample_for(pm, vms, rates, now)?;
            power_multidim(&sample, coefficients)? * tick_len
        }
        PowerMode::CpuShare => {
            let idle = pm.p_min * tick_len;
            let mut dynamic = 0.0;
            for id in &pm.hosted_vms {
                let vm = &mut vms[id.0];
                let share = delta_u(vm.effective_mips(), pm.mips)?;
                let e = vm_energy(pm.p_max, pm.p_min, now, now + tick_len, share)?;
                vm.energy_joules += e;
                dynamic += e;
            }
            pm.attributed_joules += dynamic;
            idle + dynamic
        }
    };
    pm.power_on_time += tick_len;
    pm.energy_joules += added;
    Ok(added)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{PmId, ResourceVector, VmId, DEFAULT_CU_MIPS};

    fn rel_eq(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-9 * b.abs().max(1.0)
    }

    fn sample(u_cpu: f64, u_disk: f64) -> UtilizationSample {
        UtilizationSample {
            u_cpu,
            u_mem: 0.0,
            u_disk,
            u_net: 0.0,
            timestamp: 0.0,
        }
    }

    #[test]
    fn multidim_examples() {
        let c = PowerCoefficients::default();
        assert_eq!(power_multidim(&sample(0.0, 0.0), &c).unwrap(), 14.5);
        assert!(rel_eq(
            power_multidim(&sample(100.0, 0.0), &c).unwrap(),
            34.5
        ));
        assert!(rel_eq(
            power_multidim(&sample(50.0, 1000.0), &c).unwrap(),
            27.5
        ));
    }

    #[test]
    fn multidim_rejects_bad_samples() {
        let c = PowerCoefficients::default();
        assert!(matches!(
            power_multidim(&sample(-1.0, 0.0), &c),
            Err(Error::InvalidSample(_))
        ));
        assert!(matches!(
            power_multidim(&sample(101.0, 0.0), &c),
            Err(Error::InvalidSample(_))
        ));
        assert!(matches!(
            power_multidim(&sample(1.0, -3.0), &c),
            Err(Error::InvalidSample(_))
        ));
    }

    #[test]
    fn vm_energy_examples() {
        assert_eq!(vm_energy(200.0, 100.0, 0.0, 7200.0, 0.0).unwrap(), 0.0);
        assert_eq!(
            vm_energy(200.0, 100.0, 0.0, 7200.0, 0.25).unwrap(),
            180_000.0
        );
        assert_eq!(vm_energy(150.0, 150.0, 3.0, 99.0, 0.7).unwrap(), 0.0);
        assert_eq!(
            vm_energy(200.0, 100.0, 10.0, 5.0, 0.5),
            Err(Error::NegativeInterval { t0: 10.0, t1: 5.0 })
        );
    }

    fn bare_pm(p_min: f64, p_max: f64, on_time: f64) -> PhysicalMachine {
        let mut pm = PhysicalMachine::new(
            PmId(0),
            0,
            ResourceVector::new(1000, 1, 1, 1),
            p_min,
            p_max,
            DEFAULT_CU_MIPS,
        );
        pm.power_on_time = on_time;
        pm
    }

    #[test]
    fn pm_and_dc_energy_examples() {
        assert_eq!(pm_energy(&bare_pm(100.0, 200.0, 3600.0), &[]), 360_000.0);
        assert_eq!(pm_energy(&bare_pm(100.0, 200.0, 0.0), &[5.0, 7.0]), 12.0);
        assert_eq!(
            pm_energy(&bare_pm(100.0, 200.0, 3600.0), &[180_000.0]),
            540_000.0
        );
        assert_eq!(datacenter_energy(&[]), 0.0);
        assert_eq!(datacenter_energy(&[42.0]), 42.0);
        assert_eq!(datacenter_energy(&[540_000.0, 360_000.0]), 900_000.0);
    }

    fn one_vm_host(vm_milli: u64) -> (PhysicalMachine, Vec<VirtualMachine>) {
        let mut pm = bare_pm(100.0, 200.0, 0.0);
        pm.powered_on = true;
        let mut vm = VirtualMachine::new(
            VmId(0),
            0,
            ResourceVector::new(vm_milli, 0, 0, 0),
            DEFAULT_CU_MIPS,
        );
        vm.host = Some(PmId(0));
        pm.hosted_vms.insert(VmId(0));
        pm.reserved = vm.demand;
        (pm, vec![vm])
    }

    #[test]
    fn integrate_tick_cpu_share() {
        let c = PowerCoefficients::default();
        let r = ActivityRates::default();

        let mut pm = bare_pm(100.0, 200.0, 0.0);
        pm.powered_on = true;
        let added =
            integrate_tick(&mut pm, &mut [], 60.0, PowerMode::CpuShare, &c, &r, 0.0).unwrap();
        assert_eq!(added, 6000.0);

        let (mut pm, mut vms) = one_vm_host(100);
        let added =
            integrate_tick(&mut pm, &mut vms, 60.0, PowerMode::CpuShare, &c, &r, 0.0).unwrap();
        assert!(rel_eq(added, 6600.0));
        assert!(rel_eq(vms[0].energy_joules, 600.0));
        assert!(rel_eq(
            pm.energy_joules - pm.p_min * pm.power_on_time,
            pm.attributed_joules
        ));

        let (mut pm, mut vms) = one_vm_host(100);
        let added =
            integrate_tick(&mut pm, &mut vms, 0.0, PowerMode::CpuShare, &c, &r, 0.0).unwrap();
        assert_eq!(added, 0.0);
    }

    #[test]
    fn integrate_tick_multidim_uses_cpu_share_as_percent() {
        let c = PowerCoefficients::default();
        let r = ActivityRates::default();
        let (mut pm, mut vms) = one_vm_host(1000);
        vms[0].load = crate::model::Load {
            cpu: 0.5,
            mem: 0.0,
            disk: 0.0,
            net: 0.0,
        };
        let added = integrate_tick(
            &mut pm,
            &mut vms,
            10.0,
            PowerMode::MultiDimensional,
            &c,
            &r,
            0.0,
        )
        .unwrap();
        assert!(rel_eq(added, (14.5 + 0.2 * 50.0) * 10.0));
        assert_eq!(vms[0].energy_joules, 0.0);
    }

    #[test]
    fn powered_off_pm_accrues_nothing() {
        let mut pm = bare_pm(100.0, 200.0, 0.0);
        let added = integrate_tick(
            &mut pm,
            &mut [],
            60.0,
            PowerMode::CpuShare,
            &PowerCoefficients::default(),
            &ActivityRates::default(),
            0.0,
        )
        .unwrap();
        assert_eq!(added, 0.0);
        assert_eq!(pm.power_on_time, 0.0);
    }
}

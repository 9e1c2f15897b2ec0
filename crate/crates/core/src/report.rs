//! Run results and their text forms.
//!
//! `summary.txt` is a TOML document with four parts: `[result]` (totals),
//! `[config]` (the effective configuration, loadable as a config file), and
//! one `[[pm]]` / `[[vm]]` table per machine.
//!
//! `timeseries.csv` has one row per tick with columns
//! `tick,seconds,cumulative_kwh,mean_cpu_util,imbalance_g,migrations_so_far`.
//! `seconds` is the end of the tick; utilization and imbalance are over the
//! hosts powered on during it.

use std::fmt::Write as _;

use serde::Serialize;

use crate::config::ConfigFile;
use crate::energy::joules_to_kwh;
use crate::engine::SimConfig;
use crate::model::DataCenter;
use crate::policies::PolicyKind;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TickMetrics {
    pub tick: u64,
    pub seconds: f64,
    pub cumulative_kwh: f64,
    pub mean_cpu_util: f64,
    pub imbalance_g: f64,
    pub migrations_so_far: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PmReport {
    pub id: usize,
    #[serde(rename = "type")]
    pub pm_type: String,
    pub on_time_s: f64,
    pub energy_joules: f64,
    /// VMs hosted at the end of the run.
    pub vms: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VmReport {
    pub id: usize,
    #[serde(rename = "type")]
    pub vm_type: String,
    pub host: usize,
    pub migrations: u64,
    pub energy_joules: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub policy: PolicyKind,
    pub seed: u64,
    pub ticks: u64,
    pub simulated_seconds: f64,
    pub total_energy_joules: f64,
    pub total_energy_kwh: f64,
    pub migration_count: u64,
    /// Hosts that were powered on at some point.
    pub pms_used: usize,
    pub pms: Vec<PmReport>,
    pub vms: Vec<VmReport>,
    pub time_series: Vec<TickMetrics>,
    pub config: ConfigFile,
}

#[derive(Serialize)]
struct ResultSection {
    policy: &'static str,
    seed: u64,
    ticks: u64,
    simulated_seconds: f64,
    energy_kwh: f64,
    energy_joules: f64,
    migrations: u64,
    pms_used: usize,
}

#[derive(Serialize)]
struct Summary<'a> {
    result: ResultSection,
    config: &'a ConfigFile,
    pm: &'a [PmReport],
    vm: &'a [VmReport],
}

/// Rounds kWh to the four decimals reports use.
pub fn round_kwh(kwh: f64) -> f64 {
    (kwh * 1e4).round() / 1e4
}

impl SimReport {
    pub fn build(
        cfg: &SimConfig,
        dc: &DataCenter,
        migrations: u64,
        ticks: u64,
        time_series: Vec<TickMetrics>,
    ) -> Self {
        let total: f64 = dc.pms.iter().map(|p| p.energy_joules).sum();
        SimReport {
            policy: cfg.policy,
            seed: cfg.seed,
            ticks,
            simulated_seconds: ticks as f64 * cfg.tick_len,
            total_energy_joules: total,
            total_energy_kwh: joules_to_kwh(total),
            migration_count: migrations,
            pms_used: dc.pms.iter().filter(|p| p.power_on_time > 0.0).count(),
            pms: dc
                .pms
                .iter()
                .map(|p| PmReport {
                    id: p.id.0,
                    pm_type: cfg.catalog.pms[p.pm_type].name.clone(),
                    on_time_s: p.power_on_time,
                    energy_joules: p.energy_joules,
                    vms: p.hosted_vms.len(),
                })
                .collect(),
            vms: dc
                .vms
                .iter()
                .map(|v| VmReport {
                    id: v.id.0,
                    vm_type: cfg.catalog.vms[v.vm_type].name.clone(),
                    host: v.host.map_or(usize::MAX, |h| h.0),
                    migrations: v.migration_count,
                    energy_joules: v.energy_joules,
                })
                .collect(),
            time_series,
            config: ConfigFile::from_sim(cfg),
        }
    }

    pub fn to_summary_text(&self) -> String {
        let doc = Summary {
            result: ResultSection {
                policy: self.policy.name(),
                seed: self.seed,
                ticks: self.ticks,
                simulated_seconds: self.simulated_seconds,
                energy_kwh: round_kwh(self.total_energy_kwh),
                energy_joules: self.total_energy_joules,
                migrations: self.migration_count,
                pms_used: self.pms_used,
            },
            config: &self.config,
            pm: &self.pms,
            vm: &self.vms,
        };
        toml::to_string(&doc).expect("summary is always representable")
    }

    pub fn timeseries_csv(&self) -> String {
        let mut out = String::from(
            "tick,seconds,cumulative_kwh,mean_cpu_util,imbalance_g,migrations_so_far\n",
        );
        for m in &self.time_series {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                m.tick,
                m.seconds,
                m.cumulative_kwh,
                m.mean_cpu_util,
                m.imbalance_g,
                m.migrations_so_far
            );
        }
        out
    }
}

//! Machine catalogs: the EC2 VM and PM types, plus a line-oriented override
//! file.
//!
//! Catalog file schema, one entry per line:
//!
//! ```text
//! # kind name key=value ...
//! pm 1   cpu=16 memory_mb=30000 storage_gb=3380 bandwidth_mbps=10000 p_min=175 p_max=250
//! vm 1-1 cpu=1  memory_mb=1700  storage_gb=160
//! ```
//!
//! `cpu` is in compute units with at most three decimals. `bandwidth_mbps`,
//! `p_min` and `p_max` are optional. Blank lines and `#` comments are
//! ignored. An entry replaces the built-in type of the same name, or adds a
//! new type.

use crate::error::{Error, Result};
use crate::model::ResourceVector;

pub const DEFAULT_P_MIN: f64 = 175.0;
pub const DEFAULT_P_MAX: f64 = 250.0;
pub const DEFAULT_PM_BANDWIDTH_MBPS: u64 = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct PmSpec {
    pub name: String,
    pub capacity: ResourceVector,
    pub p_min: f64,
    pub p_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VmSpec {
    pub name: String,
    pub demand: ResourceVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    pub pms: Vec<PmSpec>,
    pub vms: Vec<VmSpec>,
}

// (name, milli-CU, memory MB, storage GB)
const EC2_VMS: [(&str, u64, u64, u64); 8] = [
    ("1-1", 1_000, 1_700, 160),
    ("1-2", 4_000, 7_500, 850),
    ("1-3", 8_000, 15_000, 1_690),
    ("2-1", 6_500, 17_100, 420),
    ("2-2", 13_000, 34_200, 850),
    ("2-3", 26_000, 68_400, 1_690),
    ("3-1", 5_000, 1_700, 350),
    ("3-2", 20_000, 7_000, 1_690),
];

const EC2_PMS: [(&str, u64, u64, u64); 3] = [
    ("1", 16_000, 30_000, 3_380),
    ("2", 52_000, 136_000, 3_380),
    ("3", 40_000, 14_000, 3_380),
];

impl Default for Catalog {
    fn default() -> Self {
        Catalog {
            pms: EC2_PMS
                .iter()
                .map(|&(name, cpu, mem, disk)| PmSpec {
                    name: name.to_string(),
                    capacity: ResourceVector::new(cpu, mem, disk, DEFAULT_PM_BANDWIDTH_MBPS),
                    p_min: DEFAULT_P_MIN,
                    p_max: DEFAULT_P_MAX,
                })
                .collect(),
            vms: EC2_VMS
                .iter()
                .map(|&(name, cpu, mem, disk)| VmSpec {
                    name: name.to_string(),
                    demand: ResourceVector::new(cpu, mem, disk, 0),
                })
                .collect(),
        }
    }
}

impl Catalog {
    pub fn pm_type(&self, name: &str) -> Option<(usize, &PmSpec)> {
        self.pms.iter().enumerate().find(|(_, s)| s.name == name)
    }

    pub fn vm_type(&self, name: &str) -> Option<(usize, &VmSpec)> {
        self.vms.iter().enumerate().find(|(_, s)| s.name == name)
    }

    pub fn set_power(&mut self, pm_type: &str, p_min: f64, p_max: f64) -> Result<()> {
        if !(p_min >= 0.0 && p_max >= p_min) {
            return Err(Error::Spec(format!(
                "PM type {pm_type}: need 0 <= p_min <= p_max, got {p_min}/{p_max}"
            )));
        }
        let spec = self
            .pms
            .iter_mut()
            .find(|s| s.name == pm_type)
            .ok_or_else(|| Error::Spec(format!("unknown PM type {pm_type:?}")))?;
        spec.p_min = p_min;
        spec.p_max = p_max;
        Ok(())
    }

    /// One catalog-file line per type, PMs first.
    pub fn to_lines(&self) -> Vec<String> {
        let pms = self.pms.iter().map(|s| {
            let c = s.capacity;
            format!(
                "pm {} cpu={} memory_mb={} storage_gb={} bandwidth_mbps={} p_min={} p_max={}",
                s.name,
                format_milli(c.cpu_milli),
                c.memory_mb,
                c.storage_gb,
                c.bandwidth_mbps,
                s.p_min,
                s.p_max
            )
        });
        let vms = self.vms.iter().map(|s| {
            let d = s.demand;
            format!(
                "vm {} cpu={} memory_mb={} storage_gb={} bandwidth_mbps={}",
                s.name,
                format_milli(d.cpu_milli),
                d.memory_mb,
                d.storage_gb,
                d.bandwidth_mbps
            )
        });
        pms.chain(vms).collect()
    }

    /// Applies a catalog file on top of this catalog.
    pub fn apply_file(&mut self, text: &str) -> Result<()> {
        for entry in parse_catalog(text)? {
            match entry {
                CatalogEntry::Pm(spec) => match self.pms.iter_mut().find(|s| s.name == spec.name) {
                    Some(slot) => *slot = spec,
                    None => self.pms.push(spec),
                },
                CatalogEntry::Vm(spec) => match self.vms.iter_mut().find(|s| s.name == spec.name) {
                    Some(slot) => *slot = spec,
                    None => self.vms.push(spec),
                },
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CatalogEntry {
    Pm(PmSpec),
    Vm(VmSpec),
}

/// Parses a catalog file into its entries, in file order.
pub fn parse_catalog(text: &str) -> Result<Vec<CatalogEntry>> {
    let mut out = Vec::new();
    let mut names: Vec<(bool, String)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |what: &str| Error::Parse {
            line: line_no,
            text: format!("{what}: {line}"),
        };
        let mut words = line.split_whitespace();
        let kind = words.next().ok_or_else(|| bad("empty entry"))?;
        let is_pm = match kind {
            "pm" => true,
            "vm" => false,
            _ => return Err(bad("expected `pm` or `vm`")),
        };
        let name = words.next().ok_or_else(|| bad("missing type name"))?;
        if name.contains('=') {
            return Err(bad("missing type name"));
        }
        if names.iter().any(|(k, n)| *k == is_pm && n == name) {
            return Err(bad("duplicate type name"));
        }
        names.push((is_pm, name.to_string()));

        let mut cpu = None;
        let mut mem = None;
        let mut disk = None;
        let mut bw = None;
        let mut p_min = None;
        let mut p_max = None;
        for kv in words {
            let (key, value) = kv
                .split_once('=')
                .ok_or_else(|| bad("expected key=value"))?;
            let slot_u64 = |v: &str| v.parse::<u64>().map_err(|_| bad("not an unsigned integer"));
            match key {
                "cpu" => cpu = Some(parse_milli(value).ok_or_else(|| bad("bad cpu value"))?),
                "memory_mb" => mem = Some(slot_u64(value)?),
                "storage_gb" => disk = Some(slot_u64(value)?),
                "bandwidth_mbps" => bw = Some(slot_u64(value)?),
                "p_min" if is_pm => {
                    p_min = Some(parse_watts(value).ok_or_else(|| bad("bad p_min"))?)
                }
                "p_max" if is_pm => {
                    p_max = Some(parse_watts(value).ok_or_else(|| bad("bad p_max"))?)
                }
                _ => return Err(bad("unknown key")),
            }
        }
        let cpu = cpu.ok_or_else(|| bad("missing cpu"))?;
        let mem = mem.ok_or_else(|| bad("missing memory_mb"))?;
        let disk = disk.ok_or_else(|| bad("missing storage_gb"))?;
        if is_pm {
            let p_min = p_min.unwrap_or(DEFAULT_P_MIN);
            let p_max = p_max.unwrap_or(DEFAULT_P_MAX);
            if p_max < p_min {
                return Err(bad("p_max below p_min"));
            }
            out.push(CatalogEntry::Pm(PmSpec {
                name: name.to_string(),
                capacity: ResourceVector::new(
                    cpu,
                    mem,
                    disk,
                    bw.unwrap_or(DEFAULT_PM_BANDWIDTH_MBPS),
                ),
                p_min,
                p_max,
            }));
        } else {
            out.push(CatalogEntry::Vm(VmSpec {
                name: name.to_string(),
                demand: ResourceVector::new(cpu, mem, disk, bw.unwrap_or(0)),
            }));
        }
    }
    Ok(out)
}

fn parse_watts(s: &str) -> Option<f64> {
    let v: f64 = s.parse().ok()?;
    (v.is_finite() && v >= 0.0).then_some(v)
}

/// Inverse of [`parse_milli`]: `6500` becomes `6.5`.
pub fn format_milli(v: u64) -> String {
    let (whole, frac) = (v / 1000, v % 1000);
    if frac == 0 {
        whole.to_string()
    } else {
        format!("{whole}.{:03}", frac)
            .trim_end_matches('0')
            .to_string()
    }
}

/// Parses a non-negative decimal with at most three fractional digits into
/// thousandths, exactly.
pub fn parse_milli(s: &str) -> Option<u64> {
    let (int, frac) = match s.split_once('.') {
        Some((i, f)) => (i, f),
        None => (s, ""),
    };
    if int.is_empty() || frac.len() > 3 {
        return None;
    }
    if !int.bytes().all(|b| b.is_ascii_digit()) || !frac.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    if s.ends_with('.') {
        return None;
    }
    let whole: u64 = int.parse().ok()?;
    let mut frac_milli = 0u64;
    for (i, b) in frac.bytes().enumerate() {
        frac_milli += u64::from(b - b'0') * 10u64.pow(2 - i as u32);
    }
    whole.checked_mul(1000)?.checked_add(frac_milli)
}

//! TOML run configuration.
//!
//! Every key is optional. A minimal file is an empty one; it runs the
//! built-in catalog with 100 hosts and 100 VMs on the one-day profile under
//! the `nfv` policy. See the README for the full key list.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::catalog::Catalog;
use crate::energy::{ActivityRates, PowerCoefficients, PowerMode, PowerModelConfig};
use crate::engine::{HostLayout, SimConfig, VmLayout, WorkloadSpec};
use crate::error::{Error, Result};
use crate::policies::{PolicyKind, PolicyParams, TieBreak};
use crate::workload::{AppType, GeneratorSpec, LengthDistribution, TraceSet};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub simulation: SimulationSection,
    pub datacenter: DatacenterSection,
    pub workload: WorkloadSection,
    pub policy: PolicySection,
    pub power: PowerSection,
    pub catalog: CatalogSection,
    #[serde(rename = "case", skip_serializing_if = "Vec::is_empty")]
    pub cases: Vec<CaseSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    /// Seconds.
    pub duration: f64,
    /// Seconds.
    pub tick: f64,
    pub seed: u64,
    pub cooldown: u64,
}

impl Default for SimulationSection {
    fn default() -> Self {
        SimulationSection {
            duration: 86_400.0,
            tick: 300.0,
            seed: 1,
            cooldown: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VmMix {
    #[default]
    Random,
    RoundRobin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatacenterSection {
    /// Host count, cycling through PM types. Ignored when `pm_counts` is set.
    pub hosts: usize,
    /// VM count, typed by `vm_mix`. Ignored when `vm_counts` is set.
    pub vms: usize,
    pub vm_mix: VmMix,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub pm_counts: BTreeMap<String, usize>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub vm_counts: BTreeMap<String, usize>,
}

impl Default for DatacenterSection {
    fn default() -> Self {
        DatacenterSection {
            hosts: 100,
            vms: 100,
            vm_mix: VmMix::Random,
            pm_counts: BTreeMap::new(),
            vm_counts: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkloadMode {
    #[default]
    Diurnal,
    Trace,
    Generator,
    Static,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionKind {
    #[default]
    Uniform,
    Normal,
    Poisson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkloadSection {
    pub mode: WorkloadMode,
    /// Trace base path; `<trace>.cpu`, `.mem`, `.disk`, `.bw` are read.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<String>,
    /// Per-VM jitter in percentage points.
    pub jitter: u8,
    pub distribution: DistributionKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_dev: Option<f64>,
    pub count: usize,
    pub app_type: AppType,
}

impl Default for WorkloadSection {
    fn default() -> Self {
        WorkloadSection {
            mode: WorkloadMode::Diurnal,
            trace: None,
            jitter: 10,
            distribution: DistributionKind::Uniform,
            min: None,
            max: None,
            mean: None,
            std_dev: None,
            count: 1000,
            app_type: AppType::CpuIntensive,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicySection {
    pub name: PolicyKind,
    pub t_a: f64,
    pub t_b: f64,
    pub p: u32,
    pub alpha: f64,
    pub beta: f64,
    pub drs_threshold: f64,
    pub tie_break: TieBreak,
    pub stochastic: bool,
}

impl Default for PolicySection {
    fn default() -> Self {
        PolicySection::from_params(PolicyKind::Nfv, &PolicyParams::default())
    }
}

impl PolicySection {
    fn from_params(name: PolicyKind, p: &PolicyParams) -> Self {
        PolicySection {
            name,
            t_a: p.t_a,
            t_b: p.t_b,
            p: p.p,
            alpha: p.alpha,
            beta: p.beta,
            drs_threshold: p.drs_threshold,
            tie_break: p.tie_break,
            stochastic: p.stochastic,
        }
    }

    pub fn params(&self) -> PolicyParams {
        PolicyParams {
            t_a: self.t_a,
            t_b: self.t_b,
            p: self.p,
            alpha: self.alpha,
            beta: self.beta,
            drs_threshold: self.drs_threshold,
            tie_break: self.tie_break,
            stochastic: self.stochastic,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TypePower {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<PowerCoefficients>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerSection {
    pub mode: PowerMode,
    pub coefficients: PowerCoefficients,
    pub rates: ActivityRates,
    /// Per PM type overrides.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub types: BTreeMap<String, TypePower>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CatalogSection {
    /// Catalog file applied over the built-in types.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    /// Catalog lines applied after `file`.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub entries: Vec<String>,
    /// MIPS per compute unit.
    pub cu_mips: f64,
}

impl Default for CatalogSection {
    fn default() -> Self {
        CatalogSection {
            file: None,
            entries: Vec::new(),
            cu_mips: crate::model::DEFAULT_CU_MIPS,
        }
    }
}

/// A data-center shape for `compare`; unset keys come from `[datacenter]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CaseSection {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hosts: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vms: Option<usize>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub pm_counts: BTreeMap<String, usize>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub vm_counts: BTreeMap<String, usize>,
}

fn config_err(field: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{field}: {msg}"))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Joins `p` onto `base_dir` unless absolute, and makes the directory part
/// absolute when it exists so echoed configs work from anywhere.
fn resolve(base_dir: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    let joined = if p.is_absolute() {
        p.to_path_buf()
    } else {
        base_dir.join(p)
    };
    match (joined.parent(), joined.file_name()) {
        (Some(dir), Some(name)) => {
            let dir = if dir.as_os_str().is_empty() {
                Path::new(".")
            } else {
                dir
            };
            fs::canonicalize(dir)
                .map(|d| d.join(name))
                .unwrap_or(joined)
        }
        _ => joined,
    }
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<ConfigFile> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))
    }

    pub fn load(path: &Path) -> Result<ConfigFile> {
        let text = read_text(path)?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    /// Builds the run configuration. Relative paths resolve against `base_dir`.
    pub fn to_sim_config(&self, base_dir: &Path) -> Result<SimConfig> {
        let sim = &self.simulation;
        if !(sim.duration > 0.0 && sim.duration.is_finite()) {
            return Err(config_err(
                "simulation.duration",
                format!("must be > 0, got {}", sim.duration),
            ));
        }
        if !(sim.tick > 0.0 && sim.tick.is_finite()) {
            return Err(config_err(
                "simulation.tick",
                format!("must be > 0, got {}", sim.tick),
            ));
        }

        let mut catalog = Catalog::default();
        if let Some(file) = &self.catalog.file {
            let path = resolve(base_dir, file);
            catalog
                .apply_file(&read_text(&path)?)
                .map_err(|e| Error::Io {
                    path: path.display().to_string(),
                    message: e.to_string(),
                })?;
        }
        catalog
            .apply_file(&self.catalog.entries.join("\n"))
            .map_err(|e| config_err("catalog.entries", e))?;
        if !(self.catalog.cu_mips > 0.0 && self.catalog.cu_mips.is_finite()) {
            return Err(config_err(
                "catalog.cu_mips",
                format!("must be > 0, got {}", self.catalog.cu_mips),
            ));
        }

        let mut power = PowerModelConfig {
            mode: self.power.mode,
            coefficients: self.power.coefficients,
            type_coefficients: BTreeMap::new(),
            rates: self.power.rates,
        };
        for (name, t) in &self.power.types {
            let field = format!("power.types.{name}");
            let (_, spec) = catalog
                .pm_type(name)
                .ok_or_else(|| config_err(&field, "unknown PM type"))?;
            let p_min = t.p_min.unwrap_or(spec.p_min);
            let p_max = t.p_max.unwrap_or(spec.p_max);
            catalog
                .set_power(name, p_min, p_max)
                .map_err(|e| config_err(&field, e))?;
            if let Some(c) = t.coefficients {
                power.type_coefficients.insert(name.clone(), c);
            }
        }
        power.validate().map_err(|e| config_err("power", e))?;

        let params = self.policy.params();
        params.validate().map_err(|e| config_err("policy", e))?;

        let w = &self.workload;
        if w.jitter > 100 {
            return Err(config_err(
                "workload.jitter",
                format!("must be <= 100, got {}", w.jitter),
            ));
        }
        let workload = match w.mode {
            WorkloadMode::Static => WorkloadSpec::Static,
            WorkloadMode::Diurnal => WorkloadSpec::Diurnal { jitter: w.jitter },
            WorkloadMode::Trace => {
                let base = w.trace.as_ref().ok_or_else(|| {
                    config_err("workload.trace", "required when workload.mode = \"trace\"")
                })?;
                let path = resolve(base_dir, base);
                WorkloadSpec::Traces {
                    traces: Arc::new(TraceSet::read(&path)?),
                    jitter: w.jitter,
                    source: path.display().to_string(),
                }
            }
            WorkloadMode::Generator => {
                let length_distribution = match w.distribution {
                    DistributionKind::Uniform => {
                        let LengthDistribution::Uniform { min, max } =
                            LengthDistribution::default()
                        else {
                            unreachable!()
                        };
                        LengthDistribution::Uniform {
                            min: w.min.unwrap_or(min),
                            max: w.max.unwrap_or(max),
                        }
                    }
                    DistributionKind::Normal => {
                        let LengthDistribution::Normal { mean, std_dev } =
                            LengthDistribution::default_normal()
                        else {
                            unreachable!()
                        };
                        LengthDistribution::Normal {
                            mean: w.mean.unwrap_or(mean),
                            std_dev: w.std_dev.unwrap_or(std_dev),
                        }
                    }
                    DistributionKind::Poisson => {
                        let LengthDistribution::Poisson { mean } =
                            LengthDistribution::default_poisson()
                        else {
                            unreachable!()
                        };
                        LengthDistribution::Poisson {
                            mean: w.mean.unwrap_or(mean),
                        }
                    }
                };
                length_distribution
                    .validate()
                    .map_err(|e| config_err("workload.distribution", e))?;
                WorkloadSpec::Generated(GeneratorSpec {
                    length_distribution,
                    task_count: w.count,
                    app_type: w.app_type,
                    seed: sim.seed,
                })
            }
        };

        let cfg = SimConfig {
            duration: sim.duration,
            tick_len: sim.tick,
            hosts: self.host_layout(None),
            vms: self.vm_layout(None),
            catalog,
            cu_mips: self.catalog.cu_mips,
            workload,
            policy: self.policy.name,
            params,
            cooldown: sim.cooldown,
            power,
            seed: sim.seed,
        };
        cfg.tick_count().map_err(|_| {
            config_err(
                "simulation.duration",
                format!(
                    "{} is not a multiple of simulation.tick ({})",
                    sim.duration, sim.tick
                ),
            )
        })?;
        check_layouts(&cfg, "datacenter")?;
        Ok(cfg)
    }

    pub fn host_layout(&self, case: Option<&CaseSection>) -> HostLayout {
        let counts = case.map(|c| &c.pm_counts).filter(|m| !m.is_empty());
        let hosts = case.and_then(|c| c.hosts);
        match (counts, hosts) {
            (Some(m), _) => HostLayout::Counts(m.iter().map(|(k, v)| (k.clone(), *v)).collect()),
            (None, Some(n)) => HostLayout::RoundRobin(n),
            (None, None) if !self.datacenter.pm_counts.is_empty() => HostLayout::Counts(
                self.datacenter
                    .pm_counts
                    .iter()
                    .map(|(k, v)| (k.clone(), *v))
                    .collect(),
            ),
            (None, None) => HostLayout::RoundRobin(self.datacenter.hosts),
        }
    }

    pub fn vm_layout(&self, case: Option<&CaseSection>) -> VmLayout {
        let counts = case.map(|c| &c.vm_counts).filter(|m| !m.is_empty());
        let by_mix = |n| match self.datacenter.vm_mix {
            VmMix::Random => VmLayout::Random(n),
            VmMix::RoundRobin => VmLayout::RoundRobin(n),
        };
        match (counts, case.and_then(|c| c.vms)) {
            (Some(m), _) => VmLayout::Counts(m.iter().map(|(k, v)| (k.clone(), *v)).collect()),
            (None, Some(n)) => by_mix(n),
            (None, None) if !self.datacenter.vm_counts.is_empty() => VmLayout::Counts(
                self.datacenter
                    .vm_counts
                    .iter()
                    .map(|(k, v)| (k.clone(), *v))
                    .collect(),
            ),
            (None, None) => by_mix(self.datacenter.vms),
        }
    }

    /// Run configurations for each `[[case]]`, in file order.
    pub fn case_configs(&self, base: &SimConfig) -> Result<Vec<(String, SimConfig)>> {
        let mut out = Vec::with_capacity(self.cases.len());
        for (i, case) in self.cases.iter().enumerate() {
            let name = if case.name.is_empty() {
                format!("case{}", i + 1)
            } else {
                case.name.clone()
            };
            let cfg = SimConfig {
                hosts: self.host_layout(Some(case)),
                vms: self.vm_layout(Some(case)),
                ..base.clone()
            };
            check_layouts(&cfg, &format!("case[{i}]"))?;
            out.push((name, cfg));
        }
        Ok(out)
    }

    /// A config file that reproduces `cfg` exactly.
    pub fn from_sim(cfg: &SimConfig) -> ConfigFile {
        let to_map = |c: &[(String, usize)]| {
            let mut m = BTreeMap::new();
            for (k, v) in c {
                *m.entry(k.clone()).or_insert(0) += v;
            }
            m
        };
        let mut dc = DatacenterSection::default();
        match &cfg.hosts {
            HostLayout::Counts(c) => {
                dc.pm_counts = to_map(c);
                dc.hosts = c.iter().map(|x| x.1).sum();
            }
            HostLayout::RoundRobin(n) => dc.hosts = *n,
        }
        match &cfg.vms {
            VmLayout::Counts(c) => {
                dc.vm_counts = to_map(c);
                dc.vms = c.iter().map(|x| x.1).sum();
            }
            VmLayout::RoundRobin(n) => {
                dc.vms = *n;
                dc.vm_mix = VmMix::RoundRobin;
            }
            VmLayout::Random(n) => dc.vms = *n,
        }

        let mut workload = WorkloadSection::default();
        match &cfg.workload {
            WorkloadSpec::Static => workload.mode = WorkloadMode::Static,
            WorkloadSpec::Diurnal { jitter } => workload.jitter = *jitter,
            WorkloadSpec::Traces { jitter, source, .. } => {
                workload.mode = WorkloadMode::Trace;
                workload.jitter = *jitter;
                workload.trace = Some(source.clone());
            }
            WorkloadSpec::Generated(spec) => {
                workload.mode = WorkloadMode::Generator;
                workload.count = spec.task_count;
                workload.app_type = spec.app_type;
                match spec.length_distribution {
                    LengthDistribution::Uniform { min, max } => {
                        workload.min = Some(min);
                        workload.max = Some(max);
                    }
                    LengthDistribution::Normal { mean, std_dev } => {
                        workload.distribution = DistributionKind::Normal;
                        workload.mean = Some(mean);
                        workload.std_dev = Some(std_dev);
                    }
                    LengthDistribution::Poisson { mean } => {
                        workload.distribution = DistributionKind::Poisson;
                        workload.mean = Some(mean);
                    }
                }
            }
        }

        ConfigFile {
            simulation: SimulationSection {
                duration: cfg.duration,
                tick: cfg.tick_len,
                seed: cfg.seed,
                cooldown: cfg.cooldown,
            },
            datacenter: dc,
            workload,
            policy: PolicySection::from_params(cfg.policy, &cfg.params),
            power: PowerSection {
                mode: cfg.power.mode,
                coefficients: cfg.power.coefficients,
                rates: cfg.power.rates,
                types: cfg
                    .power
                    .type_coefficients
                    .iter()
                    .map(|(k, c)| {
                        (
                            k.clone(),
                            TypePower {
                                coefficients: Some(*c),
                                ..Default::default()
                            },
                        )
                    })
                    .collect(),
            },
            catalog: CatalogSection {
                file: None,
                entries: cfg.catalog.to_lines(),
                cu_mips: cfg.cu_mips,
            },
            cases: Vec::new(),
        }
    }
}

fn check_layouts(cfg: &SimConfig, section: &str) -> Result<()> {
    if let HostLayout::Counts(c) = &cfg.hosts {
        for (name, _) in c {
            if cfg.catalog.pm_type(name).is_none() {
                return Err(config_err(
                    &format!("{section}.pm_counts"),
                    format!("unknown PM type {name:?}"),
                ));
            }
        }
    }
    if let VmLayout::Counts(c) = &cfg.vms {
        for (name, _) in c {
            if cfg.catalog.vm_type(name).is_none() {
                return Err(config_err(
                    &format!("{section}.vm_counts"),
                    format!("unknown VM type {name:?}"),
                ));
            }
        }
    }
    Ok(())
}

/// Loads and validates a config file.
pub fn load(path: &Path) -> Result<(ConfigFile, SimConfig)> {
    let file = ConfigFile::load(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let cfg = file.to_sim_config(base)?;
    Ok((file, cfg))
}

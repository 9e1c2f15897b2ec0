//! Per-interval load traces and their text format.
//!
//! A trace file is UTF-8 text: optional leading `#` comment lines, then one
//! decimal integer in `0..=100` per line, each terminated by LF. A comment of
//! the form `# interval=<seconds>` sets the interval length; without it the
//! interval is [`DEFAULT_INTERVAL`] seconds. Blank lines are skipped.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::Load;

pub const DEFAULT_INTERVAL: f64 = 300.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Resource {
    Cpu,
    Mem,
    Disk,
    Net,
}

impl Resource {
    pub const ALL: [Resource; 4] = [Resource::Cpu, Resource::Mem, Resource::Disk, Resource::Net];

    /// File extension used for this resource's trace.
    pub fn extension(&self) -> &'static str {
        match self {
            Resource::Cpu => "cpu",
            Resource::Mem => "mem",
            Resource::Disk => "disk",
            Resource::Net => "bw",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadTrace {
    pub resource: Resource,
    /// Percent load per interval.
    pub values: Vec<u8>,
    /// Seconds per interval.
    pub interval_len: f64,
}

impl LoadTrace {
    pub fn new(resource: Resource, values: Vec<u8>, interval_len: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyTrace);
        }
        if let Some(v) = values.iter().find(|&&v| v > 100) {
            return Err(Error::Spec(format!("trace value {v} above 100")));
        }
        if !(interval_len > 0.0) || !interval_len.is_finite() {
            return Err(Error::Spec(format!(
                "interval length must be positive, got {interval_len}"
            )));
        }
        Ok(LoadTrace {
            resource,
            values,
            interval_len,
        })
    }

    pub fn constant(resource: Resource, percent: u8, interval_len: f64) -> Result<Self> {
        Self::new(resource, vec![percent], interval_len)
    }

    /// Load fraction in effect at simulated time `t` seconds; the trace repeats.
    pub fn fraction_at(&self, t: f64) -> f64 {
        let idx = (t / self.interval_len).floor().max(0.0) as usize % self.values.len();
        f64::from(self.values[idx]) / 100.0
    }

    /// Adds independent integer noise in `[-amount, amount]` to every value.
    pub fn jittered<R: Rng + ?Sized>(&self, amount: u8, rng: &mut R) -> LoadTrace {
        let a = i16::from(amount);
        let values = self
            .values
            .iter()
            .map(|&v| (i16::from(v) + rng.random_range(-a..=a)).clamp(0, 100) as u8)
            .collect();
        LoadTrace {
            values,
            ..self.clone()
        }
    }
}

/// Parses one trace file.
pub fn parse_trace(text: &str, resource: Resource) -> Result<LoadTrace> {
    let mut interval_len = DEFAULT_INTERVAL;
    let mut values = Vec::new();
    for (idx, raw) in text.split('\n').enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = || Error::Parse {
            line: line_no,
            text: line.chars().take(64).collect(),
        };
        if let Some(comment) = line.strip_prefix('#') {
            if !values.is_empty() {
                return Err(parse_err());
            }
            if let Some(v) = comment.trim().strip_prefix("interval=") {
                let secs: f64 = v.trim().parse().map_err(|_| parse_err())?;
                if !(secs > 0.0) || !secs.is_finite() {
                    return Err(parse_err());
                }
                interval_len = secs;
            }
            continue;
        }
        let digits = line.strip_prefix('-').unwrap_or(line);
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(parse_err());
        }
        let value: i64 = line.parse().map_err(|_| parse_err())?;
        if !(0..=100).contains(&value) {
            return Err(Error::Range {
                line: line_no,
                value,
            });
        }
        values.push(value as u8);
    }
    if values.is_empty() {
        return Err(Error::EmptyTrace);
    }
    Ok(LoadTrace {
        resource,
        values,
        interval_len,
    })
}

/// Parses raw bytes, rejecting invalid UTF-8.
pub fn parse_trace_bytes(bytes: &[u8], resource: Resource) -> Result<LoadTrace> {
    let text = std::str::from_utf8(bytes).map_err(|e| {
        let line = bytes[..e.valid_up_to()]
            .iter()
            .filter(|&&b| b == b'\n')
            .count()
            + 1;
        Error::Parse {
            line,
            text: "invalid UTF-8".to_string(),
        }
    })?;
    parse_trace(text, resource)
}

/// Serializes a trace in the canonical form: interval header, then values.
pub fn write_trace(trace: &LoadTrace) -> String {
    write_values(trace.interval_len, &trace.values)
}

pub fn write_values(interval_len: f64, values: &[u8]) -> String {
    let mut out = String::with_capacity(16 + values.len() * 4);
    let _ = writeln!(out, "# interval={interval_len}");
    for v in values {
        let _ = writeln!(out, "{v}");
    }
    out
}

/// The four traces that drive one workload.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSet {
    pub cpu: LoadTrace,
    pub mem: LoadTrace,
    pub disk: LoadTrace,
    pub net: LoadTrace,
}

impl TraceSet {
    pub fn get(&self, r: Resource) -> &LoadTrace {
        match r {
            Resource::Cpu => &self.cpu,
            Resource::Mem => &self.mem,
            Resource::Disk => &self.disk,
            Resource::Net => &self.net,
        }
    }

    /// Every resource held at the same constant percentage.
    pub fn constant(percent: u8, interval_len: f64) -> Result<Self> {
        Ok(TraceSet {
            cpu: LoadTrace::constant(Resource::Cpu, percent, interval_len)?,
            mem: LoadTrace::constant(Resource::Mem, percent, interval_len)?,
            disk: LoadTrace::constant(Resource::Disk, percent, interval_len)?,
            net: LoadTrace::constant(Resource::Net, percent, interval_len)?,
        })
    }

    pub fn load_at(&self, t: f64) -> Load {
        Load {
            cpu: self.cpu.fraction_at(t),
            mem: self.mem.fraction_at(t),
            disk: self.disk.fraction_at(t),
            net: self.net.fraction_at(t),
        }
    }

    pub fn jittered<R: Rng + ?Sized>(&self, amount: u8, rng: &mut R) -> TraceSet {
        TraceSet {
            cpu: self.cpu.jittered(amount, rng),
            mem: self.mem.jittered(amount, rng),
            disk: self.disk.jittered(amount, rng),
            net: self.net.jittered(amount, rng),
        }
    }

    /// Paths `<base>.cpu`, `<base>.mem`, `<base>.disk`, `<base>.bw`.
    pub fn paths(base: &Path) -> [(Resource, PathBuf); 4] {
        Resource::ALL.map(|r| {
            let mut name = base.as_os_str().to_owned();
            name.push(".");
            name.push(r.extension());
            (r, PathBuf::from(name))
        })
    }

    pub fn read(base: &Path) -> Result<TraceSet> {
        let mut traces = Vec::with_capacity(4);
        for (r, path) in Self::paths(base) {
            let bytes = fs::read(&path).map_err(|e| Error::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            let trace = parse_trace_bytes(&bytes, r).map_err(|e| Error::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            traces.push(trace);
        }
        let mut it = traces.into_iter();
        Ok(TraceSet {
            cpu: it.next().unwrap(),
            mem: it.next().unwrap(),
            disk: it.next().unwrap(),
            net: it.next().unwrap(),
        })
    }

    pub fn write(&self, base: &Path) -> Result<()> {
        for (r, path) in Self::paths(base) {
            fs::write(&path, write_trace(self.get(r))).map_err(|e| Error::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
        }
        Ok(())
    }
}

// (start hour, end hour, cpu %, memory %)
const DIURNAL_PERIODS: [(usize, usize, u8, u8); 8] = [
    (0, 2, 30, 30),
    (2, 6, 10, 20),
    (6, 8, 30, 30),
    (8, 12, 70, 40),
    (12, 14, 60, 40),
    (14, 18, 50, 40),
    (18, 23, 90, 50),
    (23, 24, 50, 40),
];
const DIURNAL_STORAGE: u8 = 20;
const DIURNAL_BANDWIDTH: u8 = 20;
pub const DIURNAL_INTERVAL: f64 = 3600.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum DiurnalKind {
    #[default]
    ComputationalIntensive,
}

/// One day of computational-intensive load, one value per hour.
pub fn diurnal_profile(kind: DiurnalKind) -> TraceSet {
    match kind {
        DiurnalKind::ComputationalIntensive => {
            let mut cpu = Vec::with_capacity(24);
            let mut mem = Vec::with_capacity(24);
            for &(start, end, c, m) in &DIURNAL_PERIODS {
                for _ in start..end {
                    cpu.push(c);
                    mem.push(m);
                }
            }
            let trace = |resource, values| LoadTrace {
                resource,
                values,
                interval_len: DIURNAL_INTERVAL,
            };
            TraceSet {
                cpu: trace(Resource::Cpu, cpu),
                mem: trace(Resource::Mem, mem),
                disk: trace(Resource::Disk, vec![DIURNAL_STORAGE; 24]),
                net: trace(Resource::Net, vec![DIURNAL_BANDWIDTH; 24]),
            }
        }
    }
}

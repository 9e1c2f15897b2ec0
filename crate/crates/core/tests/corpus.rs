//! Replays the fuzz seed corpus through the same checks the fuzz targets make.

use std::fs;
use std::path::{Path, PathBuf};

use nfvsim_core::catalog::Catalog;
use nfvsim_core::config::ConfigFile;
use nfvsim_core::workload::{parse_trace, parse_trace_bytes, write_trace, Resource};

fn seeds(target: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .map(|p| {
            let bytes = fs::read(&p).unwrap();
            (p, bytes)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds in {}", dir.display());
    out
}

#[test]
fn trace_seeds() {
    let mut parsed = 0;
    for (path, bytes) in seeds("parse_trace") {
        if let Ok(trace) = parse_trace_bytes(&bytes, Resource::Cpu) {
            assert!(trace.values.iter().all(|&v| v <= 100), "{}", path.display());
            assert_eq!(
                parse_trace(&write_trace(&trace), Resource::Cpu).unwrap(),
                trace
            );
            parsed += 1;
        }
    }
    assert!(parsed >= 3);
}

#[test]
fn catalog_seeds() {
    let mut parsed = 0;
    for (path, bytes) in seeds("parse_catalog") {
        let mut cat = Catalog::default();
        if cat.apply_file(std::str::from_utf8(&bytes).unwrap()).is_ok() {
            let mut back = Catalog {
                pms: vec![],
                vms: vec![],
            };
            back.apply_file(&cat.to_lines().join("\n")).unwrap();
            assert_eq!(back, cat, "{}", path.display());
            parsed += 1;
        }
    }
    assert!(parsed >= 2);
}

#[test]
fn config_seeds() {
    let mut parsed = 0;
    for (path, bytes) in seeds("parse_config") {
        if let Ok(file) = ConfigFile::parse(std::str::from_utf8(&bytes).unwrap()) {
            let once = file.to_toml();
            assert_eq!(
                ConfigFile::parse(&once).unwrap().to_toml(),
                once,
                "{}",
                path.display()
            );
            let _ = file.to_sim_config(Path::new("."));
            parsed += 1;
        }
    }
    assert!(parsed >= 5);
}

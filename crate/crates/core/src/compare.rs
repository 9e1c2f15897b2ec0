//! Side-by-side policy runs over shared scenarios.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::engine::{realize, run_scenario, SimConfig};
use crate::error::Result;
use crate::policies::PolicyKind;
use crate::report::{round_kwh, SimReport};

#[derive(Debug, Clone)]
pub struct ComparisonRow {
    pub case: String,
    pub policy: PolicyKind,
    pub outcome: Result<SimReport>,
}

/// Runs every policy on every case. Each case is realized once, so all
/// policies see the same machines, VM types and workload. A failed run is
/// reported in its row and does not stop the others.
pub fn compare(cases: &[(String, SimConfig)], policies: &[PolicyKind]) -> Vec<ComparisonRow> {
    cases
        .par_iter()
        .flat_map_iter(|(name, cfg)| {
            let scenario = realize(cfg);
            policies
                .iter()
                .map(|&policy| {
                    let cfg = SimConfig {
                        policy,
                        ..cfg.clone()
                    };
                    let outcome = scenario.clone().and_then(|dc| run_scenario(&cfg, dc));
                    ComparisonRow {
                        case: name.clone(),
                        policy,
                        outcome,
                    }
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

/// `case,policy,energy_kwh,migrations,status` with one row per run.
pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut out = String::from("case,policy,energy_kwh,migrations,status\n");
    for r in rows {
        match &r.outcome {
            Ok(rep) => {
                let _ = writeln!(
                    out,
                    "{},{},{:.4},{},ok",
                    r.case,
                    r.policy,
                    round_kwh(rep.total_energy_kwh),
                    rep.migration_count
                );
            }
            Err(e) => {
                let msg = e.to_string().replace([',', '\n'], ";");
                let _ = writeln!(out, "{},{},,,{msg}", r.case, r.policy);
            }
        }
    }
    out
}

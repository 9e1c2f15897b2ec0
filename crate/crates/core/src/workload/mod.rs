//! Workload traces, the diurnal profile and NFVlet generation.

mod generate;
mod trace;

pub use generate::{
    generate_nfvlets, generate_nfvlets_seeded, nfvlet_runtime, render_trace_set, render_traces,
    AppType, GeneratorSpec, LengthDistribution,
};
pub use trace::{
    diurnal_profile, parse_trace, parse_trace_bytes, write_trace, write_values, DiurnalKind,
    LoadTrace, Resource, TraceSet, DEFAULT_INTERVAL, DIURNAL_INTERVAL,
};

#![no_main]

use libfuzzer_sys::fuzz_target;
use nfvsim_core::workload::{parse_trace, parse_trace_bytes, write_trace, Resource};

fuzz_target!(|data: &[u8]| {
    if let Ok(trace) = parse_trace_bytes(data, Resource::Cpu) {
        assert!(trace.values.iter().all(|&v| v <= 100));
        let text = write_trace(&trace);
        assert_eq!(parse_trace(&text, Resource::Cpu).unwrap(), trace);
    }
});

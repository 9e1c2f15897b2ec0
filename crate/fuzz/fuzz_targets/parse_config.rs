#![no_main]

use libfuzzer_sys::fuzz_target;
use nfvsim_core::config::ConfigFile;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(file) = ConfigFile::parse(text) {
        // compare text, not values, so NaN fields still round-trip
        let once = file.to_toml();
        let echoed = ConfigFile::parse(&once).unwrap();
        assert_eq!(echoed.to_toml(), once);
        // keep the fuzzer off the filesystem and away from huge allocations
        if file.workload.trace.is_none()
            && file.catalog.file.is_none()
            && file.workload.count <= 10_000
        {
            let _ = file.to_sim_config(std::path::Path::new("."));
        }
    }
});

#![no_main]

use libfuzzer_sys::fuzz_target;
use nfvsim_core::catalog::Catalog;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let mut cat = Catalog::default();
    if cat.apply_file(text).is_ok() {
        let mut back = Catalog {
            pms: vec![],
            vms: vec![],
        };
        back.apply_file(&cat.to_lines().join("\n")).unwrap();
        assert_eq!(back, cat);
    }
});

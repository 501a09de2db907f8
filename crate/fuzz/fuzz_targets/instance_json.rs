#![no_main]

use libfuzzer_sys::fuzz_target;
use ltv_core::json::{instance_from_str, instance_to_string};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(inst) = instance_from_str(text) {
        let written = instance_to_string(&inst).expect("parsed instance serializes");
        assert_eq!(instance_from_str(&written).expect("written instance parses"), inst);
    }
});

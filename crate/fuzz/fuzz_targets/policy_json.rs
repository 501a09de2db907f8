#![no_main]

use libfuzzer_sys::fuzz_target;
use ltv_core::json::{policy_from_str, policy_to_string};

fuzz_target!(|data: &str| {
    if let Ok((params, kind)) = policy_from_str(data) {
        let written = policy_to_string(&params, kind).expect("parsed policy serializes");
        assert_eq!(policy_from_str(&written).expect("written policy parses"), (params, kind));
    }
});

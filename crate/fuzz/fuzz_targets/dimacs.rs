#![no_main]

use libfuzzer_sys::fuzz_target;
use ltv_instances::parse_dimacs;

// Accepted formulas must survive a write/read cycle unchanged.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(formula) = parse_dimacs(text) {
        let again = parse_dimacs(&formula.to_dimacs()).expect("written DIMACS parses");
        assert_eq!(again, formula);
    }
});

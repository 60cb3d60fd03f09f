#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(parsed) = fovscope::config::parse_network_text(text) {
        // the canonical form must parse back to the same plan
        let again = fovscope::config::parse_network_text(&parsed.plan.to_config_text()).expect("canonical text parses");
        assert_eq!(again.plan, parsed.plan);
    }
});

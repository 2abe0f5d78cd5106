#![no_main]

use libfuzzer_sys::fuzz_target;

use choquard::config::parse_run_config;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = parse_run_config(text) {
            let again = serde_json::to_string(&cfg).expect("serialize config");
            assert_eq!(parse_run_config(&again).expect("reparse config"), cfg);
        }
    }
});

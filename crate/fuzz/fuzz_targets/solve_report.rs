#![no_main]

use libfuzzer_sys::fuzz_target;

use choquard::solver::parse_solve_report;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(report) = parse_solve_report(text) {
            let again = serde_json::to_string(&report).expect("serialize report");
            assert_eq!(parse_solve_report(&again).expect("reparse report"), report);
        }
    }
});

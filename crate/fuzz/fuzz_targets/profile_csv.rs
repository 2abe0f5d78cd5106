#![no_main]

use libfuzzer_sys::fuzz_target;

use choquard::grid::parse_profile_csv;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(rows) = parse_profile_csv(text) {
            assert!(rows.iter().all(|(r, u)| r.is_finite() && u.is_finite()));
            assert!(rows.windows(2).all(|w| w[0].0 < w[1].0));
        }
    }
});

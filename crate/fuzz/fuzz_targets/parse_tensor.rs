#![no_main]

use libfuzzer_sys::fuzz_target;
use tsf_core::io::{format_tensor, parse_tensor};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(t) = parse_tensor(text) {
        let back = parse_tensor(&format_tensor(&t)).expect("formatted tensor parses");
        assert_eq!(back, t);
        let _ = t.ellipticity_constant();
    }
});

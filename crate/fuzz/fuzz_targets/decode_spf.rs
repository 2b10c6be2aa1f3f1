#![no_main]

use libfuzzer_sys::fuzz_target;
use tsf_core::io::SpectralDump;

fuzz_target!(|data: &[u8]| {
    if let Ok(dump) = SpectralDump::decode(data) {
        let again = SpectralDump::decode(&dump.encode()).expect("re-decode of encoded dump");
        assert_eq!(again, dump);
    }
});

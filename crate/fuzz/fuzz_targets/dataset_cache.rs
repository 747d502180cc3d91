#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok((samples, seed)) = srlab::dataset::samples_from_bytes(data) {
        // Round trip through the writer must be exact.
        assert_eq!(srlab::dataset::samples_to_bytes(&samples, seed), data);
    }
});

#![no_main]

use libfuzzer_sys::fuzz_target;

// PNG and binary PPM decoding must never panic or over-allocate on
// arbitrary bytes; any failure is a typed error.
fuzz_target!(|data: &[u8]| {
    let _ = srlab::io::decode_image(data);
});

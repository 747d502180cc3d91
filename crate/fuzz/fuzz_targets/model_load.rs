#![no_main]

use libfuzzer_sys::fuzz_target;

// Model deserialization: corrupt headers, truncations, trailing bytes and
// non-finite parameters must all surface as errors, never panics.
fuzz_target!(|data: &[u8]| {
    if let Ok(model) = srlab::mlp::MlpModel::from_bytes(data) {
        // A successfully parsed model must re-serialize to the same bytes.
        assert_eq!(model.to_bytes(), data);
    }
});

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok((n, rows, cols, pixels)) = fedhap::learning::parse_idx_images(data) {
        assert_eq!(pixels.len(), n * rows * cols);
    }
});

#![no_main]

use fovscope::imageio::image_from_bytes;
use fovscope::Shape;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    for channels in [1, 3] {
        if let Ok(t) = image_from_bytes(data, Shape::new(4, 4, channels)) {
            assert!(t.values().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
});

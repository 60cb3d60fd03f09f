#![no_main]

use fovscope::erf::ErfMap;
use fovscope::Tensor;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(t) = Tensor::from_dump_bytes(data) {
        assert_eq!(t.to_dump_bytes(), data);
    }
    let _ = ErfMap::from_dump_bytes(data);
});

#![no_main]

use libfuzzer_sys::fuzz_target;
use vekua_core::bergman::OrthonormalBasis;
use vekua_core::snapshot::decode_container;

fuzz_target!(|data: &[u8]| {
    let _ = decode_container(data);
    if let Ok((basis, _)) = OrthonormalBasis::from_bytes(data) {
        assert!(basis.members().iter().all(|m| m.is_finite()));
    }
});

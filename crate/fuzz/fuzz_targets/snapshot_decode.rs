#![no_main]

use libfuzzer_sys::fuzz_target;
use vekua_core::snapshot::{decode_snapshot, encode_field, encode_scalar_field, Snapshot};

fuzz_target!(|data: &[u8]| {
    if let Ok(snap) = decode_snapshot(data) {
        let again = match &snap {
            Snapshot::Biquaternion(f) => encode_field(f),
            Snapshot::Scalar(f) => encode_scalar_field(f),
        }
        .expect("decoded snapshot re-encodes");
        assert!(decode_snapshot(&again).is_ok());
    }
});

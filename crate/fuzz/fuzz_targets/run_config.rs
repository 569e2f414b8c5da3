#![no_main]

use libfuzzer_sys::fuzz_target;
use vekua_cli::parse_run_config;

fuzz_target!(|data: &[u8]| {
    if let Ok(cfg) = parse_run_config(data) {
        cfg.validate().expect("parsed config is valid");
        let bytes = serde_json::to_vec(&cfg).unwrap();
        assert_eq!(parse_run_config(&bytes).unwrap(), cfg);
        assert_eq!(cfg.hash().len(), 64);
    }
});

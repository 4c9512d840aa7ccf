#![no_main]

use fedhap::experiment::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = ExperimentConfig::from_toml(text) {
        let back = ExperimentConfig::from_toml(&cfg.to_toml()).expect("dumped config reloads");
        assert_eq!(back, cfg);
    }
});

#![no_main]

use libfuzzer_sys::fuzz_target;
use wpt_relay::config::{parse_config, EffectiveConfig, Overrides, RatioDefault};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(file) = parse_config(text) {
        // resolution must reject bad values with an error, never a panic
        if let Ok(cfg) = EffectiveConfig::resolve(&file, &Overrides::default(), None, RatioDefault::Single) {
            let again = parse_config(&cfg.to_toml()).expect("echoed config parses");
            let cfg2 = EffectiveConfig::resolve(&again, &Overrides::default(), None, RatioDefault::Single)
                .expect("echoed config resolves");
            assert_eq!(cfg2.sweep(), cfg.sweep());
        }
    }
});

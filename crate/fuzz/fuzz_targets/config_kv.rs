#![no_main]

use libfuzzer_sys::fuzz_target;
use matprod_core::config::{parse_config, Overrides, RunConfig};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(raw) = parse_config(text) else {
        return;
    };
    let Ok(cfg) = RunConfig::resolve(Some(&raw), None, &Overrides::default()) else {
        return;
    };
    // A resolved config renders to text that resolves back to itself.
    let again = parse_config(&cfg.to_kv()).expect("canonical form parses");
    let back = RunConfig::resolve(Some(&again), None, &Overrides::default())
        .expect("canonical form resolves");
    assert_eq!(back, cfg);
    assert_eq!(back.digest(), cfg.digest());
});

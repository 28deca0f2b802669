#![no_main]

use libfuzzer_sys::fuzz_target;

use segdist::EvalConfig;

// Config parsing must never panic, and any accepted config must reach a
// serialization fixpoint: parse(to_toml(c)) == c.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(config) = EvalConfig::parse_toml(text) else {
        return;
    };
    let written = config.to_toml();
    let reparsed = EvalConfig::parse_toml(&written).expect("emitted config must parse");
    assert_eq!(reparsed, config);
});

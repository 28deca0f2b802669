#![no_main]

use libfuzzer_sys::fuzz_target;

use segdist::SceneSpec;

// Scene spec parsing must never panic and must reach a serialization
// fixpoint at the text level (text comparison sidesteps NaN != NaN; the
// generator itself rejects non-finite fields separately).
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(spec) = SceneSpec::parse_toml(text) else {
        return;
    };
    let written = spec.to_toml();
    let reparsed = SceneSpec::parse_toml(&written).expect("emitted spec must parse");
    assert_eq!(reparsed.to_toml(), written);
});

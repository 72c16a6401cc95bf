#![no_main]

use libfuzzer_sys::fuzz_target;
use magshield::scenario::ScenarioConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = ScenarioConfig::parse(text) {
        // Accepted configs must survive a canonical round trip.
        let again = ScenarioConfig::parse(&cfg.canonical_toml()).expect("canonical form parses");
        assert_eq!(again.run_id(), cfg.run_id());
        let _ = cfg.shield_verdict();
        let _ = cfg.resolve_ladder();
    }
});

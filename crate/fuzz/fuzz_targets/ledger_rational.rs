#![no_main]

use libfuzzer_sys::fuzz_target;
use magshield_ledger::{compute_intervals, parse_rational, LedgerInput};

// Input: up to three rationals separated by newlines (mu, tau, gamma).
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if text.len() > 256 {
        return;
    }
    let parts: Vec<_> = text.lines().map(parse_rational).collect();
    if let [Ok(mu), Ok(tau), rest @ ..] = parts.as_slice() {
        let mut input = LedgerInput::new(mu.clone(), tau.clone());
        if let Some(Ok(g)) = rest.first() {
            input.gamma = g.clone();
        }
        if let Ok(report) = compute_intervals(&input) {
            assert!(report.shield_ok);
            if let Some(t) = &report.chosen {
                assert!(report.eta_range.contains(&t.eta));
                assert!(report.nu_range.contains(&t.nu));
            }
        }
    }
});

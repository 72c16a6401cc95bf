#![no_main]

use libfuzzer_sys::fuzz_target;
use magshield::experiment::parse_diag;

fuzz_target!(|data: &[u8]| {
    let _ = parse_diag(data);
});

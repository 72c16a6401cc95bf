#![no_main]

use libfuzzer_sys::fuzz_target;
use magshield::snapshot::{decode_binary, write_binary};

fuzz_target!(|data: &[u8]| {
    if let Ok((time, particles)) = decode_binary(data) {
        let mut out = Vec::new();
        write_binary(&mut out, time, &particles).unwrap();
        assert_eq!(out, data);
    }
});

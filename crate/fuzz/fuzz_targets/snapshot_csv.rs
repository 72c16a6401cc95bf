#![no_main]

use libfuzzer_sys::fuzz_target;
use magshield::snapshot::{read_csv, write_csv};

fuzz_target!(|data: &[u8]| {
    if let Ok(particles) = read_csv(data) {
        let mut out = Vec::new();
        write_csv(&mut out, &particles).unwrap();
        let again = read_csv(&out[..]).expect("written snapshot reads back");
        assert_eq!(again.len(), particles.len());
    }
});

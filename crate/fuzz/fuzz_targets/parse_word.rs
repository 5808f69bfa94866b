#![no_main]

use libfuzzer_sys::fuzz_target;
use sdesim_core::algebra::Word;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(w) = s.parse::<Word>() {
        // printing and re-reading a word is the identity
        let back: Word = w.to_string().parse().expect("display output parses");
        assert_eq!(back, w);
        let _ = sdesim_core::algebra::expected_stratonovich_exact(&w);
    }
});

//! Fuzzes the portable text-format distribution decoder: arbitrary input
//! must produce `Ok` or a structured error, never a panic or an allocation
//! blow-up (the header's node count is bounds-checked before allocation).

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = coldtail::phase::io::import_text(text);
    }
});

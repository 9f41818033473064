#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(f) = capcmk::field_from_csv(s) {
            // whatever parses must survive a round trip unchanged
            let again = capcmk::field_from_csv(&capcmk::field_to_csv(&f)).expect("round trip");
            assert_eq!(
                again.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                f.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
            );
        }
    }
});

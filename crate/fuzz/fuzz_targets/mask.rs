#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if data.len() < 2 {
        return;
    }
    let nodes = u16::from_le_bytes([data[0], data[1]]) as usize;
    if let Ok(s) = std::str::from_utf8(&data[2..]) {
        if let Ok(m) = capcmk::parse_mask(s, nodes) {
            assert_eq!(m.len(), nodes);
            assert!(m.count() <= nodes);
        }
    }
});

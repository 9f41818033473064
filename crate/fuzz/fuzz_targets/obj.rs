#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(mesh) = capcmk::parse_obj(s) {
            for f in &mesh.faces {
                assert!(f.iter().all(|&i| i < mesh.vertices.len()));
            }
        }
    }
});

//! The checked-in fuzz seeds must parse (or fail) without panicking.

use std::path::PathBuf;

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty());
    out
}

#[test]
fn field_seeds() {
    for (name, bytes) in seeds("field_csv") {
        let parsed = capcmk::field_from_csv(std::str::from_utf8(&bytes).unwrap());
        assert_eq!(parsed.is_ok(), name != "bad_rows", "{name}: {parsed:?}", parsed = parsed.err());
    }
}

#[test]
fn mask_seeds() {
    for (name, bytes) in seeds("mask") {
        let nodes = u16::from_le_bytes([bytes[0], bytes[1]]) as usize;
        let m = capcmk::parse_mask(std::str::from_utf8(&bytes[2..]).unwrap(), nodes).unwrap();
        if name == "simple" {
            assert_eq!(m.count(), 7);
        }
    }
}

#[test]
fn obj_seeds() {
    for (name, bytes) in seeds("obj") {
        let mesh = capcmk::parse_obj(std::str::from_utf8(&bytes).unwrap()).unwrap();
        if name == "tetra.obj" {
            assert_eq!(mesh.vertices.len(), 4);
            assert_eq!(mesh.faces[2], [3, 2, 1]);
            assert_eq!(mesh.faces[3], [1, 2, 3]);
        }
    }
}

use capcmk_cli::config::RunConfig;
use std::path::PathBuf;

#[test]
fn config_seeds_parse_and_round_trip() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus/config_toml");
    let mut count = 0;
    for e in std::fs::read_dir(&dir).unwrap() {
        let text = std::fs::read_to_string(e.unwrap().path()).unwrap();
        let cfg = RunConfig::from_toml_str(&text).unwrap();
        cfg.grid().unwrap();
        assert_eq!(RunConfig::from_toml_str(&cfg.to_toml_string()).unwrap(), cfg);
        count += 1;
    }
    assert!(count >= 3);
}

#[test]
fn config_parser_rejects_noise_without_panicking() {
    let seed = std::fs::read_to_string(
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus/config_toml/manufactured.toml"),
    )
    .unwrap();
    let bytes = seed.as_bytes();
    // deterministic single-byte corruptions of a real config
    for i in 0..bytes.len() {
        for b in *b"=\"[0 \nx" {
            let mut m = bytes.to_vec();
            m[i] = b;
            if let Ok(s) = std::str::from_utf8(&m) {
                if let Ok(cfg) = RunConfig::from_toml_str(s) {
                    let _ = cfg.grid();
                }
            }
        }
    }
}

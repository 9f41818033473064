#![no_main]
use capcmk_cli::config::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(cfg) = RunConfig::from_toml_str(s) {
            let _ = cfg.grid();
            let _ = RunConfig::from_toml_str(&cfg.to_toml_string()).expect("serialized config parses");
        }
    }
});

use std::path::PathBuf;

use multidiscrete::harness::{preset, PRESET_KINDS};
use multidiscrete::RunConfig;

fn load(name: &str) -> RunConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    RunConfig::load(&path).unwrap()
}

#[test]
fn preset_configs_match_presets() {
    for kind in PRESET_KINDS {
        let cfg = load(&format!("{kind}.json"));
        let sc = preset(&format!("{kind}-large")).unwrap();
        let from_cfg = cfg.scenario().unwrap();
        assert_eq!(from_cfg.specs, sc.specs, "{kind}");
        assert_eq!(from_cfg.sigma_star, sc.sigma_star, "{kind}");
        assert_eq!((from_cfg.n, from_cfg.replications), (sc.n, sc.replications));
    }
}

#[test]
fn every_config_parses() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = RunConfig::load(&path).unwrap();
        assert!(cfg.sigma().is_ok(), "{}", path.display());
    }
}

use std::path::PathBuf;

use qlnc::network::{self, fixtures, validate};
use qlnc::solution::{load_solution, solution_to_json};
use qlnc::xfer::gamma_profile;

fn dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

#[test]
fn shipped_files_match_builtins() {
    for (name, net) in fixtures::all() {
        let net_path = dir().join(format!("{name}.json"));
        let sol_path = dir().join(format!("{name}.sol.json"));
        let text = std::fs::read_to_string(&net_path).unwrap();
        assert_eq!(text, net.to_json(), "{name}: regenerate with `qlnc fixture {name} --dir fixtures`");
        let sol = fixtures::known_solution(name, &net).unwrap();
        let sol_text = std::fs::read_to_string(&sol_path).unwrap();
        assert_eq!(sol_text, solution_to_json(&net, &sol).unwrap(), "{name}");
    }
}

#[test]
fn shipped_files_load_and_validate() {
    for name in fixtures::NAMES {
        let net = network::load(&dir().join(format!("{name}.json"))).unwrap();
        assert!(validate(&net).is_empty(), "{name}");
        let sol = load_solution(&net, &dir().join(format!("{name}.sol.json"))).unwrap();
        let gamma = gamma_profile(&net, &sol).unwrap().gamma_max;
        assert!(gamma < 0.01, "{name}: {gamma}");
    }
}

//! Scenarios shipped with the binary, selectable by name with `--scenario`.

pub const NAMES: [&str; 4] = ["equilibrium-diffusive", "equilibrium-jump", "converge-diffusive", "converge-jump"];

pub fn get(name: &str) -> Option<&'static str> {
    match name {
        "equilibrium-diffusive" => Some(include_str!("../scenarios/equilibrium-diffusive.json")),
        "equilibrium-jump" => Some(include_str!("../scenarios/equilibrium-jump.json")),
        "converge-diffusive" => Some(include_str!("../scenarios/converge-diffusive.json")),
        "converge-jump" => Some(include_str!("../scenarios/converge-jump.json")),
        _ => None,
    }
}

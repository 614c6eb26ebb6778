//! Scenario documents: JSON with `model`, `run` and `rng` blocks.
//!
//! Complex numbers are `[re, im]` pairs and matrices are row-major
//! `[[z00, z01], [z10, z11]]`. Unknown keys are rejected everywhere.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use qtraj_core::model::{diffusive_observable, poisson_observable};
use qtraj_core::qmath::{CMat2, CVec2, WaveFunction, C64};
use qtraj_core::{ReferenceState, RngStream, SystemParams};

use crate::builtin;
use crate::error::{validation, CliError, Result};

pub type Pair = [f64; 2];
pub type Matrix = [[Pair; 2]; 2];

const HERMITIAN_TOL: f64 = 1e-12;
const ETA_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Discrete,
    Jump,
    Diffusive,
    Converge,
    Decay,
    Unravel,
    ScalingScan,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Discrete => "discrete",
            Command::Jump => "jump",
            Command::Diffusive => "diffusive",
            Command::Converge => "converge",
            Command::Decay => "decay",
            Command::Unravel => "unravel",
            Command::ScalingScan => "scaling-scan",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedObservable {
    /// `diag(0, 1)`: counts emissions into the excited environment level.
    Poisson,
    SigmaX,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Observable {
    Named(NamedObservable),
    Matrix(Matrix),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    #[serde(rename = "H", default = "equilibrium_h")]
    pub h: Matrix,
    #[serde(rename = "C", default = "equilibrium_c")]
    pub c: Matrix,
    #[serde(default)]
    pub gamma0: f64,
    #[serde(default)]
    pub gamma1: f64,
    #[serde(default = "ground_eta")]
    pub eta: [f64; 2],
    pub observable: Observable,
}

fn equilibrium_h() -> Matrix {
    to_matrix(&SystemParams::equilibrium().hamiltonian)
}

fn equilibrium_c() -> Matrix {
    to_matrix(&SystemParams::equilibrium().coupling)
}

fn ground_eta() -> [f64; 2] {
    [1.0, 0.0]
}

/// Run parameters. Which ones are required depends on the subcommand.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<Command>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    /// Steps of the noise-increment statistics (defaults to `steps`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paths: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi0: Option<[Pair; 2]>,
    /// Dump the single path with the density-matrix solver.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<bool>,
    /// Per-subcommand overrides of the fields above.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_command: Option<BTreeMap<Command, RunBlock>>,
}

impl RunBlock {
    fn overlay(&self, o: &RunBlock) -> RunBlock {
        RunBlock {
            kind: self.kind,
            n: o.n.or(self.n),
            tau: o.tau.or(self.tau),
            horizon: o.horizon.or(self.horizon),
            dt: o.dt.or(self.dt),
            steps: o.steps.or(self.steps),
            noise_steps: o.noise_steps.or(self.noise_steps),
            paths: o.paths.or(self.paths),
            t_grid: o.t_grid.clone().or_else(|| self.t_grid.clone()),
            n_list: o.n_list.clone().or_else(|| self.n_list.clone()),
            psi0: o.psi0.or(self.psi0),
            density: o.density.or(self.density),
            per_command: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RngBlock {
    #[serde(default)]
    pub seed: u64,
    /// Base stream id; path `i` of an ensemble uses `stream + i`.
    #[serde(default)]
    pub stream: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub model: ModelBlock,
    #[serde(default)]
    pub run: RunBlock,
    #[serde(default)]
    pub rng: RngBlock,
}

/// A scenario resolved for one subcommand.
#[derive(Debug, Clone)]
pub struct Job {
    pub command: Command,
    pub system: SystemParams,
    pub reference: ReferenceState,
    pub observable: CMat2,
    pub psi0: WaveFunction,
    pub run: RunBlock,
    pub rng: RngStream,
    pub scenario: Scenario,
}

pub fn to_c64(p: Pair) -> C64 {
    C64::new(p[0], p[1])
}

pub fn to_cmat(m: &Matrix) -> CMat2 {
    CMat2([[to_c64(m[0][0]), to_c64(m[0][1])], [to_c64(m[1][0]), to_c64(m[1][1])]])
}

pub fn to_matrix(m: &CMat2) -> Matrix {
    let p = |z: C64| [z.re, z.im];
    [[p(m.0[0][0]), p(m.0[0][1])], [p(m.0[1][0]), p(m.0[1][1])]]
}

/// Parses a scenario document; malformed JSON reports line and column.
pub fn parse_scenario_str(text: &str) -> Result<Scenario> {
    serde_json::from_str(text).map_err(|e| validation(format!("scenario: {e}")))
}

/// Reads a scenario file, or a built-in scenario by name when no such file
/// exists.
pub fn load_scenario(arg: &str) -> Result<Scenario> {
    let path = Path::new(arg);
    if !path.exists() {
        if let Some(text) = builtin::get(arg) {
            return parse_scenario_str(text);
        }
    }
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_scenario_str(&text)
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(validation(format!("{name} must be finite, got {v}")))
    }
}

fn finite_matrix(name: &str, m: &Matrix) -> Result<()> {
    if m.iter().flatten().flatten().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(validation(format!("{name} must have finite entries")))
    }
}

fn hermitian(name: &str, m: &CMat2) -> Result<()> {
    if m.hermitian_defect() > HERMITIAN_TOL * m.max_abs().max(1.0) {
        Err(validation(format!("{name} must be Hermitian")))
    } else {
        Ok(())
    }
}

fn positive(name: &str, v: Option<f64>) -> Result<()> {
    match v {
        Some(x) if !(x.is_finite() && x > 0.0) => Err(validation(format!("{name} must be finite and positive, got {x}"))),
        _ => Ok(()),
    }
}

fn check_run(prefix: &str, r: &RunBlock) -> Result<()> {
    let field = |f: &str| format!("{prefix}.{f}");
    if r.n.is_some() && r.tau.is_some() {
        return Err(validation(format!("{} and {} are mutually exclusive", field("n"), field("tau"))));
    }
    if r.n == Some(0) {
        return Err(validation(format!("{} must be at least 1", field("n"))));
    }
    positive(&field("tau"), r.tau)?;
    positive(&field("T"), r.horizon)?;
    positive(&field("dt"), r.dt)?;
    if r.paths == Some(0) {
        return Err(validation(format!("{} must be at least 1", field("paths"))));
    }
    if let Some(g) = &r.t_grid {
        if g.is_empty() {
            return Err(validation(format!("{} must not be empty", field("t_grid"))));
        }
        for &t in g {
            finite(&field("t_grid"), t)?;
        }
        if g[0] < 0.0 || g.windows(2).any(|w| w[0] >= w[1]) {
            return Err(validation(format!("{} must be non-negative and strictly increasing", field("t_grid"))));
        }
    }
    if let Some(ns) = &r.n_list {
        if ns.contains(&0) {
            return Err(validation(format!("{} entries must be at least 1", field("n_list"))));
        }
        if ns.windows(2).any(|w| w[0] >= w[1]) {
            return Err(validation(format!("{} must be strictly increasing", field("n_list"))));
        }
    }
    if let Some(psi) = &r.psi0 {
        if !psi.iter().flatten().all(|v| v.is_finite()) {
            return Err(validation(format!("{} must have finite entries", field("psi0"))));
        }
    }
    Ok(())
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        finite_matrix("model.H", &m.h)?;
        finite_matrix("model.C", &m.c)?;
        finite("model.gamma0", m.gamma0)?;
        finite("model.gamma1", m.gamma1)?;
        hermitian("model.H", &to_cmat(&m.h))?;
        if let Observable::Matrix(a) = &m.observable {
            finite_matrix("model.observable", a)?;
            hermitian("model.observable", &to_cmat(a))?;
        }
        let [e0, e1] = m.eta;
        if !(e0.is_finite() && e1.is_finite()) || e0 < 0.0 || e1 < 0.0 {
            return Err(validation("model.eta entries must be finite and non-negative"));
        }
        if (e0 + e1 - 1.0).abs() > ETA_SUM_TOL {
            return Err(validation(format!("model.eta must sum to 1, got {}", e0 + e1)));
        }
        check_run("run", &self.run)?;
        for (cmd, o) in self.run.per_command.iter().flatten() {
            let prefix = format!("run.per_command.{cmd}");
            if o.kind.is_some() || o.per_command.is_some() {
                return Err(validation(format!("{prefix} may not set kind or per_command")));
            }
            check_run(&prefix, o)?;
        }
        Ok(())
    }

    pub fn observable(&self) -> CMat2 {
        match &self.model.observable {
            Observable::Named(NamedObservable::Poisson) => poisson_observable(),
            Observable::Named(NamedObservable::SigmaX) => diffusive_observable(),
            Observable::Matrix(a) => to_cmat(a),
        }
    }

    /// Validates the scenario and resolves it for `command`, applying
    /// `per_command` overrides and an optional seed override.
    pub fn resolve(&self, command: Command, seed: Option<u64>) -> Result<Job> {
        self.validate()?;
        if let Some(kind) = self.run.kind {
            if kind != command {
                return Err(validation(format!("run.kind is {kind} but the subcommand is {command}")));
            }
        }
        let run = match self.run.per_command.as_ref().and_then(|p| p.get(&command)) {
            Some(o) => self.run.overlay(o),
            None => self.run.overlay(&RunBlock::default()),
        };
        let m = &self.model;
        let system = SystemParams::new(to_cmat(&m.h), to_cmat(&m.c), m.gamma0, m.gamma1)
            .map_err(|e| validation(format!("model: {e}")))?;
        let reference = ReferenceState::new(m.eta[0], m.eta[1]).map_err(|e| validation(format!("model.eta: {e}")))?;
        let psi0 = match run.psi0 {
            Some(p) => WaveFunction::normalize(CVec2::new(to_c64(p[0]), to_c64(p[1])))
                .map_err(|e| validation(format!("run.psi0: {e}")))?,
            None => WaveFunction::excited(),
        };
        let mut scenario = self.clone();
        if let Some(s) = seed {
            scenario.rng.seed = s;
        }
        Ok(Job {
            command,
            system,
            reference,
            observable: self.observable(),
            psi0,
            rng: RngStream::new(scenario.rng.seed, scenario.rng.stream),
            run,
            scenario,
        })
    }
}

impl Job {
    pub fn rng_block(&self) -> RngBlock {
        self.scenario.rng
    }

    pub fn horizon(&self) -> Result<f64> {
        self.run.horizon.ok_or_else(|| missing(self.command, "T"))
    }

    pub fn dt(&self) -> Result<f64> {
        self.run.dt.ok_or_else(|| missing(self.command, "dt"))
    }

    pub fn steps(&self) -> Result<usize> {
        self.run.steps.ok_or_else(|| missing(self.command, "steps"))
    }

    pub fn paths(&self) -> Result<usize> {
        self.run.paths.ok_or_else(|| missing(self.command, "paths"))
    }

    pub fn t_grid(&self) -> Result<Vec<f64>> {
        self.run.t_grid.clone().ok_or_else(|| missing(self.command, "t_grid"))
    }

    pub fn n_list(&self) -> Result<Vec<u64>> {
        self.run.n_list.clone().ok_or_else(|| missing(self.command, "n_list"))
    }
}

fn missing(command: Command, field: &str) -> CliError {
    validation(format!("run.{field} is required for {command}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{ "model": { "observable": "sigma_x" }, "run": { "T": 2.0, "dt": 0.001, "paths": 10 } }"#;

    #[test]
    fn minimal_equilibrium_diffusive() {
        let s = parse_scenario_str(MINIMAL).unwrap();
        let job = s.resolve(Command::Diffusive, None).unwrap();
        assert!(job.system.is_equilibrium());
        assert_eq!(job.reference, ReferenceState::ground());
        assert_eq!(job.observable, diffusive_observable());
        assert_eq!(job.psi0, WaveFunction::excited());
        assert_eq!(job.horizon().unwrap(), 2.0);
    }

    #[test]
    fn eta_must_sum_to_one() {
        let s = parse_scenario_str(r#"{ "model": { "observable": "poisson", "eta": [0.5, 0.6] } }"#).unwrap();
        let e = s.validate().unwrap_err().to_string();
        assert!(e.contains("model.eta"), "{e}");
    }

    #[test]
    fn non_hermitian_h_is_rejected() {
        let s = parse_scenario_str(
            r#"{ "model": { "observable": "poisson", "H": [[[1, 0], [1, 0]], [[0, 0], [0, 0]]] } }"#,
        )
        .unwrap();
        let e = s.validate().unwrap_err().to_string();
        assert!(e.contains("model.H") && e.contains("Hermitian"), "{e}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in [
            r#"{ "model": { "observable": "poisson" }, "extra": 1 }"#,
            r#"{ "model": { "observable": "poisson", "beta": 1 } }"#,
            r#"{ "model": { "observable": "poisson" }, "run": { "M": 1 } }"#,
            r#"{ "model": { "observable": "poisson" }, "rng": { "seed": 1, "salt": 2 } }"#,
        ] {
            assert!(parse_scenario_str(text).is_err(), "{text}");
        }
    }

    #[test]
    fn malformed_json_reports_position() {
        let e = parse_scenario_str("{\n  \"model\": {\n    \"observable\": \n  }\n}").unwrap_err().to_string();
        assert!(e.contains("line 4"), "{e}");
    }

    #[test]
    fn field_validation_names_the_field() {
        let cases = [
            (r#"{ "model": { "observable": "poisson" }, "run": { "dt": -1 } }"#, "run.dt"),
            (r#"{ "model": { "observable": "poisson" }, "run": { "paths": 0 } }"#, "run.paths"),
            (r#"{ "model": { "observable": "poisson" }, "run": { "n": 10, "tau": 0.1 } }"#, "run.n"),
            (r#"{ "model": { "observable": "poisson" }, "run": { "t_grid": [1, 0.5] } }"#, "run.t_grid"),
            (r#"{ "model": { "observable": "poisson" }, "run": { "n_list": [10, 10] } }"#, "run.n_list"),
            (r#"{ "model": { "observable": [[[1, 0], [0, 1]], [[0, 0], [0, 0]]] } }"#, "model.observable"),
            (r#"{ "model": { "observable": "poisson" }, "run": { "per_command": { "decay": { "paths": 0 } } } }"#, "run.per_command.decay.paths"),
        ];
        for (text, field) in cases {
            let e = parse_scenario_str(text).unwrap().validate().unwrap_err().to_string();
            assert!(e.contains(field), "{text}: {e}");
        }
    }

    #[test]
    fn kind_must_match_subcommand() {
        let s = parse_scenario_str(r#"{ "model": { "observable": "poisson" }, "run": { "kind": "decay" } }"#).unwrap();
        assert!(s.resolve(Command::Decay, None).is_ok());
        assert!(s.resolve(Command::Jump, None).is_err());
    }

    #[test]
    fn per_command_overrides_apply() {
        let s = parse_scenario_str(
            r#"{ "model": { "observable": "poisson" },
                 "run": { "paths": 10, "per_command": { "decay": { "paths": 99 } } },
                 "rng": { "seed": 5 } }"#,
        )
        .unwrap();
        assert_eq!(s.resolve(Command::Decay, None).unwrap().paths().unwrap(), 99);
        assert_eq!(s.resolve(Command::Jump, None).unwrap().paths().unwrap(), 10);
        let job = s.resolve(Command::Jump, Some(7)).unwrap();
        assert_eq!(job.rng, RngStream::new(7, 0));
        assert!(job.steps().unwrap_err().to_string().contains("run.steps"));
    }

    #[test]
    fn builtins_parse_and_validate() {
        for name in builtin::NAMES {
            let s = parse_scenario_str(builtin::get(name).unwrap()).unwrap();
            s.validate().unwrap();
        }
    }
}

//! Experiment configs and their validation.
//!
//! Every config is a JSON object whose `schema` field names the command and
//! version, e.g. `"spinctrl.sweep-coupling.v1"`. Violations carry JSON
//! pointers into the document.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use spinctrl::experiments::{Assignment, CircuitSpec, PulseKind, ZzArm};
use spinctrl::noise::OneOverFConfig;
use spinctrl::optimize::OptimizerConfig;
use spinctrl::pulse::library_pulse;
use spinctrl::{CosinePulse, Gate, LatticeModel, PulseParams, TwoQubitModel, Waveform};

pub const COMMANDS: [&str; 7] = ["synthesize", "sweep-coupling", "sweep-amplitude", "noise-1f", "multiqubit", "zz-gate", "entropy"];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub pointer: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let at = if self.pointer.is_empty() { "/" } else { &self.pointer };
        write!(f, "{at}: {}", self.message)
    }
}

fn violation(pointer: &str, message: impl Into<String>) -> Violation {
    Violation { pointer: pointer.into(), message: message.into() }
}

pub fn schema_id(command: &str) -> String {
    format!("spinctrl.{command}.v1")
}

/// Where a drive waveform comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase", deny_unknown_fields)]
pub enum PulseSpec {
    /// Bundled library entry.
    Library {
        gate: Gate,
        #[serde(rename = "T_ns")]
        t_gate: f64,
    },
    /// Raised-cosine pulse of the gate's area.
    Cosine {
        gate: Gate,
        #[serde(rename = "T_ns")]
        t_gate: f64,
    },
    /// Explicit coefficients.
    Params { gate: Gate, params: PulseParams },
}

impl PulseSpec {
    pub fn gate(&self) -> Gate {
        match self {
            PulseSpec::Library { gate, .. } | PulseSpec::Cosine { gate, .. } | PulseSpec::Params { gate, .. } => *gate,
        }
    }

    /// Coefficient form, unavailable for cosine pulses.
    pub fn params(&self) -> Option<PulseParams> {
        match self {
            PulseSpec::Library { gate, t_gate } => library_pulse(*gate, *t_gate).map(|e| e.params),
            PulseSpec::Params { params, .. } => Some(params.clone()),
            PulseSpec::Cosine { .. } => None,
        }
    }

    pub fn waveform(&self) -> Box<dyn Waveform + Send> {
        match self {
            PulseSpec::Cosine { gate, t_gate } => Box::new(CosinePulse::for_gate(*gate, *t_gate)),
            _ => Box::new(self.params().expect("validated pulse")),
        }
    }

    fn check(&self, at: &str, out: &mut Vec<Violation>) {
        match self {
            PulseSpec::Library { gate, t_gate } => {
                if library_pulse(*gate, *t_gate).is_none() {
                    out.push(violation(&format!("{at}/T_ns"), format!("no library entry for {gate} at {t_gate} ns; available gate times are 50, 180 and 250")));
                }
            }
            PulseSpec::Cosine { t_gate, .. } => positive(*t_gate, &format!("{at}/T_ns"), out),
            PulseSpec::Params { params, .. } => {
                if let Err(e) = params.validate() {
                    out.push(violation(&format!("{at}/params"), e.to_string()));
                }
            }
        }
    }
}

/// A built-in topology or a lattice JSON file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    /// Nearest-neighbor detuning for built-ins (rad/ns).
    #[serde(default = "default_spacing")]
    pub spacing: f64,
    /// Resolved against the config file's directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

fn default_spacing() -> f64 {
    0.2
}

impl LatticeSpec {
    pub fn load(&self, base: &Path, j: f64) -> Result<LatticeModel, String> {
        let lat = match (&self.builtin, &self.path) {
            (Some(name), None) => LatticeModel::builtin(name, self.spacing, j).map_err(|e| e.to_string())?,
            (None, Some(p)) => LatticeModel::load(base.join(p)).map_err(|e| e.to_string())?.with_coupling(j),
            _ => return Err("give exactly one of `builtin` or `path`".into()),
        };
        Ok(lat)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesizeConfig {
    pub schema: String,
    pub gate: Gate,
    #[serde(rename = "T_ns")]
    pub t_gate: f64,
    pub model: TwoQubitModel,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
}

/// Splitting-only model for sweeps that set `J` themselves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairModel {
    #[serde(rename = "Ez", default)]
    pub ez: f64,
    #[serde(rename = "dEz")]
    pub dez: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepCouplingConfig {
    pub schema: String,
    pub pulse: PulseSpec,
    pub model: PairModel,
    #[serde(rename = "J")]
    pub j: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAmplitudeConfig {
    pub schema: String,
    pub pulse: PulseSpec,
    pub model: TwoQubitModel,
    /// Time-stretch factors; the peak scales as `1/s`.
    pub scales: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub schema: String,
    pub pulse: PulseSpec,
    pub model: PairModel,
    #[serde(default)]
    pub noise: OneOverFConfig,
    /// Calibrate γ to this Ramsey T2 before running.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_t2_us: Option<f64>,
    #[serde(rename = "J")]
    pub j: Vec<f64>,
    #[serde(default = "default_noise_realizations")]
    pub realizations: usize,
}

fn default_noise_realizations() -> usize {
    100
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiqubitConfig {
    pub schema: String,
    pub lattice: LatticeSpec,
    pub assignment: Assignment,
    #[serde(default = "robust")]
    pub pulse_kind: PulseKind,
    /// `J/Ω_m` values.
    pub ratios: Vec<f64>,
    #[serde(default = "yes")]
    pub crosstalk: bool,
    #[serde(default)]
    pub three_body: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps_per_ns: Option<f64>,
}

fn robust() -> PulseKind {
    PulseKind::Robust
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZzGateConfig {
    pub schema: String,
    pub lattice: LatticeSpec,
    pub pair: (usize, usize),
    #[serde(rename = "T_ns", default = "default_zz_time")]
    pub t_gate: f64,
    pub arm: ZzArm,
    pub ratios: Vec<f64>,
    #[serde(default = "yes")]
    pub crosstalk: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps_per_ns: Option<f64>,
}

fn default_zz_time() -> f64 {
    50.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntropyConfig {
    pub schema: String,
    pub lattice: LatticeSpec,
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(default)]
    pub circuit: CircuitSpec,
    #[serde(default = "default_entropy_realizations")]
    pub realizations: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_entropy_realizations() -> usize {
    10
}

#[derive(Clone, Debug, PartialEq)]
pub enum Config {
    Synthesize(SynthesizeConfig),
    SweepCoupling(SweepCouplingConfig),
    SweepAmplitude(SweepAmplitudeConfig),
    Noise(NoiseConfig),
    Multiqubit(MultiqubitConfig),
    ZzGate(ZzGateConfig),
    Entropy(EntropyConfig),
}

impl Config {
    pub fn command(&self) -> &'static str {
        match self {
            Config::Synthesize(_) => "synthesize",
            Config::SweepCoupling(_) => "sweep-coupling",
            Config::SweepAmplitude(_) => "sweep-amplitude",
            Config::Noise(_) => "noise-1f",
            Config::Multiqubit(_) => "multiqubit",
            Config::ZzGate(_) => "zz-gate",
            Config::Entropy(_) => "entropy",
        }
    }

    /// The effective seed, if the command is stochastic.
    pub fn seed(&self) -> Option<u64> {
        match self {
            Config::Synthesize(c) => Some(c.optimizer.seed),
            Config::Noise(c) => Some(c.noise.seed),
            Config::Entropy(c) => Some(c.seed),
            _ => None,
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        match self {
            Config::Synthesize(c) => c.optimizer.seed = seed,
            Config::Noise(c) => c.noise.seed = seed,
            Config::Entropy(c) => c.seed = seed,
            _ => {}
        }
    }

    pub fn to_value(&self) -> Value {
        let v = match self {
            Config::Synthesize(c) => serde_json::to_value(c),
            Config::SweepCoupling(c) => serde_json::to_value(c),
            Config::SweepAmplitude(c) => serde_json::to_value(c),
            Config::Noise(c) => serde_json::to_value(c),
            Config::Multiqubit(c) => serde_json::to_value(c),
            Config::ZzGate(c) => serde_json::to_value(c),
            Config::Entropy(c) => serde_json::to_value(c),
        };
        v.expect("config serializes")
    }
}

fn pointer_of(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut s = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => s += &format!("/{index}"),
            Segment::Map { key } => s += &format!("/{}", key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => s += &format!("/{variant}"),
            Segment::Unknown => {}
        }
    }
    s
}

fn typed<T: DeserializeOwned>(doc: &Value) -> Result<T, Vec<Violation>> {
    serde_path_to_error::deserialize(doc).map_err(|e| {
        let ptr = pointer_of(e.path());
        vec![violation(&ptr, e.inner().to_string())]
    })
}

/// Parses and validates a config document. `base` resolves relative paths.
pub fn parse(text: &str, base: &Path) -> Result<Config, Vec<Violation>> {
    let doc: Value = serde_json::from_str(text).map_err(|e| vec![violation("", format!("invalid JSON: {e}"))])?;
    let schema = match doc.get("schema") {
        Some(Value::String(s)) => s.clone(),
        Some(_) => return Err(vec![violation("/schema", "must be a string")]),
        None => return Err(vec![violation("/schema", "missing; expected e.g. \"spinctrl.synthesize.v1\"")]),
    };
    let Some(command) = COMMANDS.iter().find(|c| schema_id(c) == schema) else {
        let known: Vec<String> = COMMANDS.iter().map(|c| schema_id(c)).collect();
        return Err(vec![violation("/schema", format!("unknown schema \"{schema}\", expected one of {}", known.join(", ")))]);
    };
    let cfg = match *command {
        "synthesize" => Config::Synthesize(typed(&doc)?),
        "sweep-coupling" => Config::SweepCoupling(typed(&doc)?),
        "sweep-amplitude" => Config::SweepAmplitude(typed(&doc)?),
        "noise-1f" => Config::Noise(typed(&doc)?),
        "multiqubit" => Config::Multiqubit(typed(&doc)?),
        "zz-gate" => Config::ZzGate(typed(&doc)?),
        _ => Config::Entropy(typed(&doc)?),
    };
    let v = check(&cfg, base);
    if v.is_empty() {
        Ok(cfg)
    } else {
        Err(v)
    }
}

fn positive(x: f64, at: &str, out: &mut Vec<Violation>) {
    if !(x > 0.0 && x.is_finite()) {
        out.push(violation(at, format!("must be positive, got {x}")));
    }
}

fn non_negative(x: f64, at: &str, out: &mut Vec<Violation>) {
    if !(x >= 0.0 && x.is_finite()) {
        out.push(violation(at, format!("must be non-negative, got {x}")));
    }
}

fn non_empty<T>(v: &[T], at: &str, out: &mut Vec<Violation>) {
    if v.is_empty() {
        out.push(violation(at, "must not be empty"));
    }
}

fn check_model(m: &TwoQubitModel, out: &mut Vec<Violation>) {
    positive(m.dez, "/model/dEz", out);
    non_negative(m.j, "/model/J", out);
    if !m.ez.is_finite() {
        out.push(violation("/model/Ez", "must be finite"));
    }
}

fn check_list(xs: &[f64], at: &str, strictly: bool, out: &mut Vec<Violation>) {
    non_empty(xs, at, out);
    for (k, &x) in xs.iter().enumerate() {
        if strictly {
            positive(x, &format!("{at}/{k}"), out);
        } else {
            non_negative(x, &format!("{at}/{k}"), out);
        }
    }
}

fn check_lattice(spec: &LatticeSpec, base: &Path, out: &mut Vec<Violation>) -> Option<LatticeModel> {
    positive(spec.spacing, "/lattice/spacing", out);
    match spec.load(base, 0.0) {
        Ok(l) => Some(l),
        Err(e) => {
            out.push(violation("/lattice", e));
            None
        }
    }
}

fn check_steps(s: Option<f64>, at: &str, out: &mut Vec<Violation>) {
    if let Some(s) = s {
        positive(s, at, out);
    }
}

fn check(cfg: &Config, base: &Path) -> Vec<Violation> {
    let mut out = Vec::new();
    match cfg {
        Config::Synthesize(c) => {
            check_model(&c.model, &mut out);
            positive(c.t_gate, "/T_ns", &mut out);
            if let Err(e) = c.optimizer.validate() {
                out.push(violation("/optimizer", e.to_string()));
            }
        }
        Config::SweepCoupling(c) => {
            c.pulse.check("/pulse", &mut out);
            positive(c.model.dez, "/model/dEz", &mut out);
            check_list(&c.j, "/J", false, &mut out);
        }
        Config::SweepAmplitude(c) => {
            c.pulse.check("/pulse", &mut out);
            if matches!(c.pulse, PulseSpec::Cosine { .. }) {
                out.push(violation("/pulse/source", "amplitude sweeps need coefficient pulses (library or params)"));
            }
            check_model(&c.model, &mut out);
            check_list(&c.scales, "/scales", true, &mut out);
        }
        Config::Noise(c) => {
            c.pulse.check("/pulse", &mut out);
            positive(c.model.dez, "/model/dEz", &mut out);
            check_list(&c.j, "/J", false, &mut out);
            if let Err(e) = c.noise.validate() {
                out.push(violation("/noise", e.to_string()));
            }
            if let Some(t2) = c.target_t2_us {
                positive(t2, "/target_t2_us", &mut out);
            }
            if c.realizations < 100 {
                out.push(violation("/realizations", format!("must be at least 100, got {}", c.realizations)));
            }
        }
        Config::Multiqubit(c) => {
            if let Some(lat) = check_lattice(&c.lattice, base, &mut out) {
                if c.assignment.len() != lat.n_qubits {
                    out.push(violation("/assignment", format!("expected {} entries, one per qubit, got {}", lat.n_qubits, c.assignment.len())));
                }
            }
            check_list(&c.ratios, "/ratios", false, &mut out);
            if let Some(w) = c.omega_m {
                positive(w, "/omega_m", &mut out);
            }
            check_steps(c.steps_per_ns, "/steps_per_ns", &mut out);
        }
        Config::ZzGate(c) => {
            if let Some(lat) = check_lattice(&c.lattice, base, &mut out) {
                let (a, b) = c.pair;
                if a >= lat.n_qubits || b >= lat.n_qubits {
                    out.push(violation("/pair", format!("qubit index out of range for {} qubits", lat.n_qubits)));
                } else if !lat.are_adjacent(a, b) {
                    out.push(violation("/pair", format!("qubits {a} and {b} are not coupled")));
                }
            }
            positive(c.t_gate, "/T_ns", &mut out);
            check_list(&c.ratios, "/ratios", false, &mut out);
            if let Some(w) = c.omega_m {
                positive(w, "/omega_m", &mut out);
            }
            check_steps(c.steps_per_ns, "/steps_per_ns", &mut out);
        }
        Config::Entropy(c) => {
            check_lattice(&c.lattice, base, &mut out);
            non_negative(c.j, "/J", &mut out);
            if c.circuit.depth == 0 {
                out.push(violation("/circuit/depth", "must be at least 1"));
            }
            if (c.circuit.gate_time - 50.0).abs() > 1e-9 {
                out.push(violation("/circuit/gate_time", "only 50 ns layers are supported"));
            }
            positive(c.circuit.steps_per_ns, "/circuit/steps_per_ns", &mut out);
            non_empty(&c.circuit.cuts, "/circuit/cuts", &mut out);
            if c.realizations == 0 {
                out.push(violation("/realizations", "must be at least 1"));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse_str(s: &str) -> Result<Config, Vec<Violation>> {
        parse(s, Path::new("."))
    }

    #[test]
    fn negative_coupling_points_at_model_j() {
        let e = parse_str(r#"{"schema":"spinctrl.synthesize.v1","gate":"Xpi","T_ns":50,"model":{"dEz":0.2,"J":-0.1}}"#).unwrap_err();
        assert_eq!(e[0].pointer, "/model/J");
    }

    #[test]
    fn unknown_gate_names_allowed_set() {
        let e = parse_str(r#"{"schema":"spinctrl.synthesize.v1","gate":"Ypi","T_ns":50,"model":{"dEz":0.2,"J":0.0}}"#).unwrap_err();
        assert_eq!(e[0].pointer, "/gate");
        for g in ["Xpi", "Xpi2", "X2pi"] {
            assert!(e[0].message.contains(g), "{}", e[0].message);
        }
    }

    #[test]
    fn unknown_field_is_rejected() {
        let e = parse_str(r#"{"schema":"spinctrl.synthesize.v1","gate":"Xpi","T_ns":50,"model":{"dEz":0.2,"J":0.0,"K":1}}"#).unwrap_err();
        assert!(e[0].message.contains('K'));
    }

    #[test]
    fn list_entries_get_indexed_pointers() {
        let e = parse_str(
            r#"{"schema":"spinctrl.sweep-coupling.v1","pulse":{"source":"cosine","gate":"Xpi","T_ns":50},"model":{"dEz":0.2},"J":[0.0,-1.0]}"#,
        )
        .unwrap_err();
        assert_eq!(e[0].pointer, "/J/1");
    }

    #[test]
    fn schema_is_required() {
        assert_eq!(parse_str("{}").unwrap_err()[0].pointer, "/schema");
        assert_eq!(parse_str(r#"{"schema":"spinctrl.nope.v1"}"#).unwrap_err()[0].pointer, "/schema");
    }

    #[test]
    fn seed_override() {
        let mut c = parse_str(r#"{"schema":"spinctrl.entropy.v1","lattice":{"builtin":"chain4"},"J":0.003}"#).unwrap();
        c.set_seed(9);
        assert_eq!(c.seed(), Some(9));
    }
}

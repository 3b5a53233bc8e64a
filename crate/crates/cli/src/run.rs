//! Command execution, output files and the manifest.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use spinctrl::errgeo::amplitude_sweep_distance;
use spinctrl::experiments::{
    entropy_growth, fidelity_under_1f, fidelity_vs_coupling, parallel_gate_fidelity, zz_gate_fidelity, ExperimentResult, LatticeOptions,
};
use spinctrl::noise::calibrate_gamma;
use spinctrl::optimize::synthesize;
use spinctrl::{Error, TwoQubitModel};

use crate::config::{schema_id, Config};

/// Process exit codes.
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_SCHEMA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Domain(_) | Error::DimensionMismatch { .. } | Error::Parse { .. } | Error::Json(_) => EXIT_SCHEMA,
            Error::Io(_) => EXIT_USAGE,
            _ => EXIT_NUMERICAL,
        };
        Self { code, message: e.to_string() }
    }
}

/// In-memory outputs of one run, in write order.
pub struct Outputs {
    pub files: Vec<(String, String)>,
    pub summary: String,
}

impl Outputs {
    fn from_result(stem: &str, r: &ExperimentResult, summary: String) -> Result<Self, Error> {
        Ok(Self { files: result_files(stem, r)?, summary })
    }
}

fn result_files(stem: &str, r: &ExperimentResult) -> Result<Vec<(String, String)>, Error> {
    Ok(vec![(format!("{stem}.csv"), r.to_csv()), (format!("{stem}.json"), r.to_json()? + "\n")])
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn last(r: &ExperimentResult) -> (f64, f64) {
    (*r.x.last().unwrap_or(&f64::NAN), *r.y.last().unwrap_or(&f64::NAN))
}

/// Runs the experiment and returns its files without touching the disk.
pub fn execute(cfg: &Config, base: &Path) -> Result<Outputs, Error> {
    match cfg {
        Config::Synthesize(c) => {
            let res = synthesize(c.gate.angle(), c.t_gate, &c.optimizer, &c.model)?;
            let mut r = ExperimentResult::new("synthesize", ("iteration", "1"), ("cost", "1"), c.optimizer.seed);
            for (k, v) in res.cost_history.iter().enumerate() {
                r.push(k as f64, *v, 0.0);
            }
            r.metadata = json!({
                "gate": c.gate, "model": c.model, "optimizer": c.optimizer, "params": res.params,
                "final_cost": res.final_cost, "final_fidelity": res.final_fidelity,
                "final_distance": res.final_distance, "final_weighted_distance": res.final_weighted_distance,
                "descent_iterations": res.descent_iterations, "polish_iterations": res.polish_iterations,
                "converged": res.converged,
            });
            let pulse = json!({"source": "params", "gate": c.gate, "params": res.params});
            let mut files = result_files("synthesize", &r)?;
            files.push(("pulse.json".into(), serde_json::to_string_pretty(&pulse)? + "\n"));
            let status = if res.converged { "converged" } else { "not converged" };
            Ok(Outputs { files, summary: format!("cost {:.3e} ({status}), infidelity {:.2e}", res.final_cost, 1.0 - res.final_fidelity) })
        }
        Config::SweepCoupling(c) => {
            let w = c.pulse.waveform();
            let model = TwoQubitModel::new(c.model.ez, c.model.dez, 0.0)?;
            let mut r = fidelity_vs_coupling(w.as_ref(), c.pulse.gate().angle(), &model, &c.j)?;
            r.label = "sweep_coupling".into();
            r.metadata["pulse"] = serde_json::to_value(&c.pulse)?;
            let (x, y) = last(&r);
            Outputs::from_result("sweep-coupling", &r, format!("infidelity {y:.3e} at J/Omega_m {x:.3e}"))
        }
        Config::SweepAmplitude(c) => {
            let p = c.pulse.params().expect("validated pulse");
            let sweep = amplitude_sweep_distance(&p, &c.model, &c.scales)?;
            let mut r = ExperimentResult::new("sweep_amplitude", ("Omega_m", "rad/ns"), ("error_distance", "1"), 0);
            for s in &sweep {
                r.push(s.peak, s.distance, 0.0);
            }
            r.metadata = json!({"pulse": c.pulse, "model": c.model, "scales": c.scales});
            let best = sweep.iter().min_by(|a, b| a.distance.total_cmp(&b.distance)).expect("non-empty");
            Outputs::from_result("sweep-amplitude", &r, format!("minimum D {:.3e} at Omega_m {:.4}", best.distance, best.peak))
        }
        Config::Noise(c) => {
            let mut noise = c.noise.clone();
            if let Some(t2) = c.target_t2_us {
                noise.gamma = calibrate_gamma(&noise, t2)?;
            }
            let w = c.pulse.waveform();
            let model = TwoQubitModel::new(c.model.ez, c.model.dez, 0.0)?;
            let mut r = fidelity_under_1f(w.as_ref(), c.pulse.gate().angle(), &model, &noise, &c.j, c.realizations)?;
            r.label = "noise_1f".into();
            r.metadata["pulse"] = serde_json::to_value(&c.pulse)?;
            r.metadata["target_t2_us"] = json!(c.target_t2_us);
            let (x, y) = last(&r);
            Outputs::from_result("noise-1f", &r, format!("mean infidelity {y:.3e} at J/Omega_m {x:.3e}, gamma {:.4e}", noise.gamma))
        }
        Config::Multiqubit(c) => {
            let lat = c.lattice.load(base, 0.0).map_err(Error::Domain)?;
            let opts = LatticeOptions { no_crosstalk: !c.crosstalk, three_body: c.three_body, omega_m: c.omega_m, steps_per_ns: c.steps_per_ns };
            let r = parallel_gate_fidelity(&lat, &c.assignment, c.pulse_kind, &c.ratios, &opts)?;
            let warn = if r.metadata["adjacent_drive_warning"] == Value::Bool(true) { " (warning: adjacent qubits driven)" } else { "" };
            let (x, y) = last(&r);
            Outputs::from_result("multiqubit", &r, format!("infidelity {y:.3e} at J/Omega_m {x:.3e}{warn}"))
        }
        Config::ZzGate(c) => {
            let lat = c.lattice.load(base, 0.0).map_err(Error::Domain)?;
            let opts = LatticeOptions { no_crosstalk: !c.crosstalk, three_body: false, omega_m: c.omega_m, steps_per_ns: c.steps_per_ns };
            let r = zz_gate_fidelity(&lat, c.pair, c.t_gate, c.arm, &c.ratios, &opts)?;
            let (x, y) = last(&r);
            Outputs::from_result("zz-gate", &r, format!("infidelity {y:.3e} at J/Omega_m {x:.3e}"))
        }
        Config::Entropy(c) => {
            let lat = c.lattice.load(base, c.j).map_err(Error::Domain)?;
            let res = entropy_growth(&lat, &c.circuit, c.realizations, c.seed)?;
            let mut files = Vec::new();
            let mut parts = Vec::new();
            for (cut, r) in &res.curves {
                files.extend(result_files(&format!("entropy-{}", cut.label()), r)?);
                parts.push(format!("{} {:.4}", cut.label(), last(r).1));
            }
            Ok(Outputs { files, summary: format!("final entropy {} nat, norm drift {:.1e}", parts.join(", "), res.max_norm_drift) })
        }
    }
}

/// Writes outputs plus `manifest.json`, refusing to overwrite unless `force`.
pub fn write_outputs(out_dir: &Path, outputs: &Outputs, cfg: &Config, config_path: &Path, config_bytes: &[u8], force: bool) -> Result<PathBuf, Failure> {
    std::fs::create_dir_all(out_dir).map_err(|e| Failure::usage(format!("cannot create {}: {e}", out_dir.display())))?;
    let manifest_path = out_dir.join("manifest.json");
    if !force {
        let clash: Vec<String> = outputs
            .files
            .iter()
            .map(|(name, _)| out_dir.join(name))
            .chain(std::iter::once(manifest_path.clone()))
            .filter(|p| p.exists())
            .map(|p| p.display().to_string())
            .collect();
        if !clash.is_empty() {
            return Err(Failure::usage(format!("refusing to overwrite {} (use --force)", clash.join(", "))));
        }
    }
    let mut entries = Vec::new();
    for (name, body) in &outputs.files {
        std::fs::write(out_dir.join(name), body).map_err(|e| Failure::usage(format!("cannot write {name}: {e}")))?;
        entries.push(json!({"file": name, "sha256": sha256_hex(body.as_bytes())}));
    }
    let effective = serde_json::to_string(&cfg.to_value()).expect("config serializes");
    let manifest = json!({
        "command": cfg.command(),
        "schema": schema_id(cfg.command()),
        "version": env!("CARGO_PKG_VERSION"),
        "seed": cfg.seed(),
        "config": {
            "file": config_path.file_name().map(|n| n.to_string_lossy().into_owned()),
            "sha256": sha256_hex(config_bytes),
            "effective_sha256": sha256_hex(effective.as_bytes()),
        },
        "outputs": entries,
    });
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    std::fs::write(&manifest_path, text).map_err(|e| Failure::usage(format!("cannot write manifest: {e}")))?;
    Ok(out_dir.join(&outputs.files[0].0))
}

/// Diagnostic written next to the outputs when a run fails numerically.
pub fn diagnostic(cfg: &Config, err: &Error) -> Value {
    let mut d = json!({"command": cfg.command(), "error": err.to_string(), "debug": format!("{err:?}"), "config": cfg.to_value()});
    if let Error::FitFailed { curve, .. } = err {
        d["curve"] = json!(curve);
    }
    d
}

/// Angle helper for summaries of gate pulses.
pub fn angle_label(angle: f64) -> String {
    format!("{:.3} pi", angle / PI)
}

//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fail. Pass criterion numbers as arguments to run a subset.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use spinctrl::errgeo::{amplitude_sweep_distance, first_order_error_unitary, two_qubit_channel_curves, channel_curves, error_distance};
use spinctrl::experiments::{entropy_growth, fidelity_under_1f, fidelity_vs_coupling, parallel_gate_fidelity, CircuitSpec, LatticeOptions, PulseKind};
use spinctrl::model::{crosstalk_report, block_diagonalize, lattice_hamiltonian, Partition, RotatingFrame, XDrive};
use spinctrl::noise::{calibrate_gamma, delays_ns, psd_estimate, ramsey_t2, OneOverFConfig};
use spinctrl::optimize::{polish, synthesize, OptimizerConfig};
use spinctrl::propagate::{evolve, evolve_final, STEPS_PER_NS};
use spinctrl::pulse::{bundled_library, library_pulse};
use spinctrl::{gate_fidelity, CosinePulse, Gate, LatticeModel, Operator, TimeGrid, TwoQubitModel, Waveform};

const DEZ: f64 = 0.2;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within_budget(start: Instant, budget: Duration) -> (bool, String) {
    let e = start.elapsed();
    (e <= budget, format!("{:.1}s of {}s", e.as_secs_f64(), budget.as_secs()))
}

/// Infidelity at `J = x·Ω_m` for each ratio `x`.
fn infidelity_sweep(pulse: &dyn Waveform, angle: f64, omega_m: f64, ratios: &[f64]) -> Vec<f64> {
    let js: Vec<f64> = ratios.iter().map(|x| x * omega_m).collect();
    fidelity_vs_coupling(pulse, angle, &TwoQubitModel::reference(0.0), &js).unwrap().y
}

fn log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs.iter().zip(ys).map(|(x, y)| (x.ln(), y.ln())).collect();
    spinctrl::noise::linear_fit(&pts).0
}

fn decade(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64)).collect()
}

fn c1_library() -> Outcome {
    let start = Instant::now();
    let mut worst = 1.0f64;
    for e in bundled_library() {
        let grid = TimeGrid::with_rate(e.params.t_gate, STEPS_PER_NS).unwrap();
        let u = evolve_final(&XDrive(&e.params), grid).unwrap();
        worst = worst.min(gate_fidelity(&u, &spinctrl::linalg::rx(e.gate.angle())).unwrap());
    }
    let (fast, t) = within_budget(start, Duration::from_secs(5));
    outcome(worst >= 0.999 && fast, format!("worst fidelity {worst:.6} over 9 entries, {t}"))
}

fn c2_distance_minimum() -> Outcome {
    let start = Instant::now();
    let entry = library_pulse(Gate::Xpi, 50.0).unwrap();
    let working = entry.relative_amplitude * DEZ;
    let model = TwoQubitModel::reference(0.02);
    let scales: Vec<f64> = (0..=80).map(|k| 0.6 + 0.01 * k as f64).collect();
    let sweep = amplitude_sweep_distance(&entry.params, &model, &scales).unwrap();
    let best = sweep.iter().min_by(|a, b| a.distance.total_cmp(&b.distance)).unwrap();
    let cos = CosinePulse::for_gate(Gate::Xpi, 50.0);
    let d_cos = error_distance(&channel_curves(&model, &cos, TimeGrid::with_rate(50.0, STEPS_PER_NS).unwrap()).unwrap()).unwrap();
    let offset = (best.peak / working - 1.0).abs();
    let ratio = best.distance / d_cos;
    let (fast, t) = within_budget(start, Duration::from_secs(30));
    outcome(
        offset <= 0.10 && ratio < 0.05 && fast,
        format!("minimum at peak {:.4} vs working {working:.3} ({:.1}%), D_min/D_cos {ratio:.2e}, {t}", best.peak, 100.0 * offset),
    )
}

/// The tabulated 50 ns X_π refined to full precision at its working amplitude.
fn polished_rcp() -> spinctrl::PulseParams {
    let entry = library_pulse(Gate::Xpi, 50.0).unwrap();
    let cfg = OptimizerConfig { amplitude_cap: entry.relative_amplitude * DEZ, eta: 1e-14, ..Default::default() };
    polish(&entry.params, PI, &cfg, &TwoQubitModel::reference(0.02)).unwrap().params
}

fn c3_plateau() -> Outcome {
    let start = Instant::now();
    let ratios = decade(1e-3, 1e-2, 5);
    let rcp = polished_rcp();
    let cos = CosinePulse::for_gate(Gate::Xpi, 50.0);
    // Both pulses see the same physical coupling; Ω_m is the RCP working amplitude.
    let omega_m = rcp.peak();
    let y_rcp = infidelity_sweep(&rcp, PI, omega_m, &ratios);
    let y_cos = infidelity_sweep(&cos, PI, omega_m, &ratios);
    let (s_rcp, s_cos) = (log_slope(&ratios, &y_rcp), log_slope(&ratios, &y_cos));
    let gain = y_cos[4] / y_rcp[4];
    let (fast, t) = within_budget(start, Duration::from_secs(120));
    outcome(
        s_rcp >= 3.5 && (s_cos - 2.0).abs() <= 0.3 && gain >= 100.0 && fast,
        format!("slopes RCP {s_rcp:.2} cosine {s_cos:.2}, gain at 1e-2 {gain:.0}x, {t}"),
    )
}

fn c4_first_order() -> Outcome {
    let start = Instant::now();
    let pulse = library_pulse(Gate::Xpi, 50.0).unwrap().params;
    let grid = TimeGrid::with_rate(50.0, STEPS_PER_NS).unwrap();
    let u0 = Operator::identity(2).kron(&evolve(&XDrive(&pulse), grid).unwrap().final_unitary().clone());
    let residual = |j: f64| {
        let m = TwoQubitModel::reference(j);
        let u = evolve_final(&RotatingFrame::new(m, &pulse), grid).unwrap();
        let exact = &u0.adjoint() * &u;
        let approx = first_order_error_unitary(&two_qubit_channel_curves(&m, &pulse, grid).unwrap()).unwrap();
        (&exact - &approx).frobenius_norm()
    };
    let r: Vec<f64> = [0.02, 0.01, 0.005].iter().map(|&j| residual(j)).collect();
    let ratios = [r[0] / r[1], r[1] / r[2]];
    let ok = ratios.iter().all(|q| (q / 4.0 - 1.0).abs() <= 0.5);
    let (fast, t) = within_budget(start, Duration::from_secs(60));
    outcome(ok && fast, format!("residuals {:.2e} {:.2e} {:.2e}, halving ratios {:.2} {:.2}, {t}", r[0], r[1], r[2], ratios[0], ratios[1]))
}

fn c5_one_over_f() -> Outcome {
    let start = Instant::now();
    let cfg = OneOverFConfig::default();
    let psd = psd_estimate(&cfg, 100, Some((2.0, 50.0))).unwrap();
    let gamma = calibrate_gamma(&cfg, 5.0).unwrap();
    let fit = ramsey_t2(&cfg.with_gamma(gamma), &delays_ns(15.0, 60), 1000).unwrap();
    let ok = (psd.slope + 1.0).abs() <= 0.15 && (fit.t2_us / 5.0 - 1.0).abs() <= 0.3;
    let (fast, t) = within_budget(start, Duration::from_secs(180));
    outcome(
        ok && fast,
        format!("PSD slope {:.3}, gamma {gamma:.3e}, Ramsey T2 {:.2} us (rms {:.3}), {t}", psd.slope, fit.t2_us, fit.rms_residual),
    )
}

/// Lab-frame frequencies with a small quadratic offset so that no two
/// computational states are degenerate.
fn perturbed(lat: &LatticeModel) -> LatticeModel {
    let omegas = (0..lat.n_qubits).map(|i| 5.0 + DEZ * i as f64 + 0.01 * (i * i) as f64).collect();
    LatticeModel::new(lat.n_qubits, lat.edges.clone(), omegas, 0.002).unwrap()
}

fn c6_hierarchy() -> Outcome {
    let start = Instant::now();
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, lat) in [("chain4", LatticeModel::chain(4, DEZ, 0.0)), ("honeycomb6", LatticeModel::honeycomb6(DEZ, 0.0))] {
        let lat = perturbed(&lat);
        let h = lattice_hamiltonian(&lat).unwrap();
        let bd = block_diagonalize(&h, &Partition::computational(lat.n_qubits)).unwrap();
        for driven in [1usize, 2] {
            let rep = crosstalk_report(&bd, &[driven]).unwrap();
            for rel in [0.5, 1.0, 1.5, 2.0, 2.5] {
                // Coefficients are relative to the drive amplitude Ω = rel·ΔE_z.
                let omega = rel * DEZ;
                let nn: Vec<f64> = lat.neighbors(driven).iter().map(|&i| omega * rep.c2.get(&(i, driven)).copied().unwrap_or(0.0).abs()).collect();
                let (lo, hi) = nn.iter().fold((f64::INFINITY, 0.0f64), |(l, h), v| (l.min(*v), h.max(*v)));
                let c3 = omega * rep.max_c3();
                let spread = hi / lo;
                let gap = lo / c3;
                ok &= lo > 0.0 && spread <= 2.0 && gap >= 100.0;
                if rel == 1.0 {
                    notes.push(format!("{name} q{driven}: NN spread {spread:.2}, C2/C3 {gap:.0}"));
                }
            }
        }
    }
    let (fast, t) = within_budget(start, Duration::from_secs(60));
    outcome(ok && fast, format!("{}, {t}", notes.join("; ")))
}

fn c7_parallel() -> Outcome {
    let start = Instant::now();
    let chain = LatticeModel::chain(4, DEZ, 0.0);
    let hc = LatticeModel::honeycomb6(DEZ, 0.0);
    let cases = [
        ("chain X_2,pi", &chain, vec![None, Some(Gate::Xpi), None, Some(Gate::X2pi)]),
        ("honeycomb X_3,pi", &hc, vec![Some(Gate::X2pi), None, Some(Gate::Xpi), None, Some(Gate::X2pi), None]),
    ];
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, lat, assign) in cases {
        let opts = LatticeOptions::default();
        let r = parallel_gate_fidelity(lat, &assign, PulseKind::Robust, &[0.05], &opts).unwrap().y[0];
        let c = parallel_gate_fidelity(lat, &assign, PulseKind::Trivial, &[0.05], &opts).unwrap().y[0];
        ok &= c / r >= 10.0;
        notes.push(format!("{name}: robust {r:.2e} trivial {c:.2e} ({:.1}x)", c / r));
    }
    let (fast, t) = within_budget(start, Duration::from_secs(600));
    outcome(ok && fast, format!("{}, {t}", notes.join("; ")))
}

/// Per-cut count of layers beyond 50 where robust < trivial, plus final values.
fn entropy_comparison(lat: &LatticeModel, crosstalk: bool) -> (bool, bool, Vec<String>) {
    let run = |kind| entropy_growth(lat, &CircuitSpec { pulse_kind: kind, crosstalk, ..Default::default() }, 10, 2024).unwrap();
    let (r, c) = (run(PulseKind::Robust), run(PulseKind::Trivial));
    let drift_ok = r.max_norm_drift < 1e-8 && c.max_norm_drift < 1e-8;
    let mut all = true;
    let mut notes = Vec::new();
    for ((cut, a), (_, b)) in r.curves.iter().zip(&c.curves) {
        let wins = (50..a.y.len()).filter(|&l| a.y[l] < b.y[l]).count();
        all &= wins == a.y.len() - 50;
        notes.push(format!("{} {wins}/{} layers, final {:.3} vs {:.3}", cut.label(), a.y.len() - 50, a.y[a.y.len() - 1], b.y[b.y.len() - 1]));
    }
    (all, drift_ok, notes)
}

fn c8_entropy() -> Outcome {
    let start = Instant::now();
    let lat = LatticeModel::ladder10(DEZ, 0.003);
    // The verdict uses the default model, which includes neighbor crosstalk.
    let (ok, drift_ok, notes) = entropy_comparison(&lat, true);
    let (fast, t) = within_budget(start, Duration::from_secs(1800));
    // ZZ-only coupling, reported for reference.
    let (zz_ok, _, zz_notes) = entropy_comparison(&lat, false);
    outcome(
        ok && drift_ok && fast,
        format!(
            "with crosstalk: {}; ZZ only ({}): {}; {t}",
            notes.join(", "),
            if zz_ok { "robust lower at every layer" } else { "mixed" },
            zz_notes.join(", ")
        ),
    )
}

fn c9_synthesis() -> Outcome {
    let start = Instant::now();
    let cfg = OptimizerConfig { amplitude_cap: 0.1, eta: 1e-6, seed: 7, ..Default::default() };
    let res = synthesize(PI, 250.0, &cfg, &TwoQubitModel::reference(0.02)).unwrap();
    let ratios = decade(1e-3, 1e-2, 5);
    let y = infidelity_sweep(&res.params, PI, res.params.peak(), &ratios);
    let slope = log_slope(&ratios, &y);
    let (fast, t) = within_budget(start, Duration::from_secs(600));
    outcome(
        res.final_cost < 1e-3 && slope >= 3.5 && fast,
        format!("seed 7: cost {:.2e}, 1-F {:.1e}, slope {slope:.2}, {t}", res.final_cost, 1.0 - res.final_fidelity),
    )
}

fn c10_determinism() -> Outcome {
    let pulse = library_pulse(Gate::Xpi, 50.0).unwrap().params;
    let noise = OneOverFConfig { seed: 99, ..OneOverFConfig::default() };
    let lat = LatticeModel::chain(4, DEZ, 0.01);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let a = fidelity_under_1f(&pulse, PI, &TwoQubitModel::reference(0.0), &noise, &[0.0, 0.01], 100).unwrap();
            let spec = CircuitSpec { depth: 4, ..Default::default() };
            let b = entropy_growth(&lat, &spec, 3, 5).unwrap();
            let mut s = a.to_csv();
            for (_, c) in &b.curves {
                s += &c.to_csv();
            }
            s
        })
    };
    let one = run(1);
    let same = [2, 4].iter().all(|&n| run(n) == one) && run(1) == one;
    outcome(same, format!("{} bytes compared across 1, 2 and 4 workers", one.len()))
}

fn main() {
    let criteria: [(usize, &str, fn() -> Outcome); 10] = [
        (1, "pulse library regression", c1_library),
        (2, "error-distance minimum", c2_distance_minimum),
        (3, "robustness plateau", c3_plateau),
        (4, "first-order oracle", c4_first_order),
        (5, "1/f noise suite", c5_one_over_f),
        (6, "crosstalk hierarchy", c6_hierarchy),
        (7, "parallel-gate advantage", c7_parallel),
        (8, "entropy suppression", c8_entropy),
        (9, "synthesis end-to-end", c9_synthesis),
        (10, "determinism", c10_determinism),
    ];
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (n, name, f) in criteria {
        if !wanted.is_empty() && !wanted.contains(&n) {
            continue;
        }
        let line = match catch_unwind(AssertUnwindSafe(f)) {
            Ok(o) => {
                failed += usize::from(!o.pass);
                format!("criterion {n:>2} {name}: {} ({})", if o.pass { "PASS" } else { "FAIL" }, o.detail)
            }
            Err(_) => {
                failed += 1;
                format!("criterion {n:>2} {name}: FAIL (panicked)")
            }
        };
        println!("{line}");
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

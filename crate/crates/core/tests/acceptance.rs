//! Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
//! criterion fails.

use std::time::Instant;

use opnm::bath::{decay_amplitude, BathModel, ClassicalNoiseModel, FiniteTemperatureMethod, QuantumBathModel};
use opnm::measurement::{cpf_from_joint, MeasurementScheme};
use opnm::operator::{c, projector_onto, DensityMatrix};
use opnm::oracle::{
    gaussian_dephasing_exact, mc_joint_prob, mode_correlation_check, pseudomode_joint_prob, McOptions,
    PseudomodeModel,
};
use opnm::report::{simulate, ExperimentConfig, RunOptions};
use opnm::series::{appendix_convergence, ExchangeModel, QuadratureOptions, SeriesEngine, SeriesOptions};
use opnm::Result;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { passed, detail })
}

fn engine(model: BathModel, scheme: MeasurementScheme, p: f64, s_max: f64) -> Result<SeriesEngine> {
    let rho0 = DensityMatrix::qubit_superposition(p)?;
    SeriesEngine::for_model(model, scheme, &rho0, s_max, FiniteTemperatureMethod::Pseudomode, SeriesOptions::default())
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

fn presets() -> [MeasurementScheme; 3] {
    [MeasurementScheme::zzz(), MeasurementScheme::xzx(), MeasurementScheme::xxx()]
}

fn all_models() -> Result<Vec<BathModel>> {
    Ok(vec![
        BathModel::Dephasing(ClassicalNoiseModel::new(1.0, 0.05)?),
        BathModel::Dephasing(ClassicalNoiseModel::new(1.0, 0.1)?),
        BathModel::Bosonic(QuantumBathModel::zero_temperature(1.0, 0.125)?),
        BathModel::Bosonic(QuantumBathModel::zero_temperature(1.0, 0.5)?),
        BathModel::Bosonic(QuantumBathModel::new(1.0, 0.125, 0.1)?),
    ])
}

fn normalization() -> Result<Outcome> {
    let grids = [QuadratureOptions::fixed(5), QuadratureOptions::fixed(41), QuadratureOptions::default()];
    let mut worst: f64 = 0.0;
    let mut tables = 0;
    for model in all_models()? {
        for scheme in presets() {
            let e = engine(model, scheme, 0.8, 4.0)?;
            for (t, tau) in [(0.5, 1.5), (2.0, 2.0)] {
                for q in &grids {
                    for order in 0..=3 {
                        let r = e.joint_prob_with(t, tau, order, q)?;
                        worst = worst.max((r.joint.total() - 1.0).abs());
                        tables += 1;
                    }
                }
            }
        }
    }
    outcome(worst <= 1e-12, format!("max |ΣP − 1| = {worst:.2e} over {tables} tables (bound 1e-12)"))
}

fn zero_temperature_nullity() -> Result<Outcome> {
    let rho0 = DensityMatrix::qubit_superposition(0.8)?;
    let mut series_worst: f64 = 0.0;
    let mut oracle_worst: f64 = 0.0;
    for tc in [0.125, 0.5] {
        let qm = QuantumBathModel::zero_temperature(1.0, tc)?;
        for scheme in [MeasurementScheme::zzz(), MeasurementScheme::xzx()] {
            let e = engine(BathModel::Bosonic(qm), scheme.clone(), 0.8, 8.0)?;
            for t in linspace(0.0, 4.0, 20) {
                series_worst = series_worst.max(e.cpf_perturbative(t, t, 0, 3)?.value.abs());
                let o = pseudomode_joint_prob(&qm, &scheme, &rho0, t, t, None)?;
                oracle_worst = oracle_worst.max(o.cpf(0)?.abs());
            }
        }
    }
    outcome(
        series_worst <= 1e-9 && oracle_worst <= 1e-9,
        format!("max |CPF(y=+1)|: series {series_worst:.2e}, pseudomode {oracle_worst:.2e} (bound 1e-9)"),
    )
}

fn first_order_exactness() -> Result<Outcome> {
    let qm = QuantumBathModel::zero_temperature(1.0, 0.125)?;
    let rho0 = DensityMatrix::qubit_superposition(0.8)?;
    let scheme = MeasurementScheme::xzx();
    let e = engine(BathModel::Bosonic(qm), scheme.clone(), 0.8, 8.0)?;
    let (coarse_q, fine_q) = (QuadratureOptions::fixed(41), QuadratureOptions::fixed(81));
    let (mut coarse, mut fine): (f64, f64) = (0.0, 0.0);
    for t in linspace(0.0, 4.0, 21) {
        let exact = pseudomode_joint_prob(&qm, &scheme, &rho0, t, t, None)?;
        for y in 0..2 {
            let o = exact.cpf(y)?;
            coarse = coarse.max((e.cpf_with(t, t, y, 1, &coarse_q)?.value - o).abs());
            fine = fine.max((e.cpf_with(t, t, y, 1, &fine_q)?.value - o).abs());
        }
    }
    let ratio = coarse / fine;
    outcome(
        coarse <= 5e-3 && ratio >= 3.0,
        format!("max error {coarse:.2e} at 41 nodes (bound 5e-3), {fine:.2e} at 81 nodes, ratio {ratio:.2} (bound ≥ 3)"),
    )
}

fn dephasing_convergence() -> Result<Outcome> {
    let rho0 = DensityMatrix::qubit_superposition(1.0)?;
    let scheme = MeasurementScheme::xxx();
    let mut errors = Vec::new();
    let mut first: f64 = 0.0;
    for tc in [0.05, 0.1] {
        let cm = ClassicalNoiseModel::new(1.0, tc)?;
        let e = engine(BathModel::Dephasing(cm), scheme.clone(), 1.0, 6.0)?;
        let mut worst: f64 = 0.0;
        for t in linspace(0.0, 3.0, 31) {
            let exact = gaussian_dephasing_exact(&cm, &scheme, &rho0, t, t)?;
            let r = e.joint_prob_perturbative(t, t, 1)?;
            first = r.per_order[0].values().iter().fold(first, |a, v| a.max(v.abs()));
            for y in 0..2 {
                let c = e.cpf_perturbative(t, t, y, 3)?;
                first = first.max(c.per_order[0].abs());
                worst = worst.max((c.value - exact.cpf(y)?).abs());
            }
        }
        errors.push(worst);
    }
    outcome(
        errors[0] <= 0.5 * errors[1] && first <= 1e-12,
        format!(
            "max |N=3 − exact|: {:.2e} at γτc = 0.05, {:.2e} at 0.1 (ratio {:.3}, bound 0.5); first order max {first:.1e} (bound 1e-12)",
            errors[0],
            errors[1],
            errors[0] / errors[1]
        ),
    )
}

fn monte_carlo_cross_check() -> Result<Outcome> {
    let rho0 = DensityMatrix::qubit_superposition(1.0)?;
    let scheme = MeasurementScheme::xxx();
    let mut worst_z: f64 = 0.0;
    for (k, tc) in [0.05, 0.1].into_iter().enumerate() {
        let cm = ClassicalNoiseModel::new(1.0, tc)?;
        let opts = McOptions { n_traj: 1_000_000, seed: 20 + k as u64, ..McOptions::default() };
        let mc = mc_joint_prob(&cm, &scheme, &rho0, 1.0, 1.0, &opts)?;
        let exact = gaussian_dephasing_exact(&cm, &scheme, &rho0, 1.0, 1.0)?;
        let se = mc.stderr.as_ref().expect("Monte Carlo reports errors");
        for ((m, x), s) in mc.joint.values().iter().zip(exact.joint.values()).zip(se) {
            worst_z = worst_z.max((m - x).abs() / s);
        }
    }
    outcome(worst_z <= 3.0, format!("max |MC − exact| / stderr = {worst_z:.2} over 16 entries (bound 3)"))
}

fn embedding_fidelity() -> Result<Outcome> {
    let mut dyn_worst: f64 = 0.0;
    let excited = projector_onto(&[c(1.0, 0.0), c(0.0, 0.0)]);
    let mut coherence = opnm::operator::zeros(2);
    coherence[(0, 1)] = c(1.0, 0.0);
    for tc in [0.125, 0.5] {
        let m = QuantumBathModel::zero_temperature(1.0, tc)?;
        let pm = PseudomodeModel::from_bath(&m);
        let h = 0.01;
        for (k, ch) in pm.reduced_channels(h, 400)?.iter().enumerate() {
            let g = decay_amplitude(1.0, tc, k as f64 * h);
            dyn_worst = dyn_worst.max((ch.apply(&excited)[(0, 0)].re - g * g).abs());
            dyn_worst = dyn_worst.max((ch.apply(&coherence)[(0, 1)] - c(g, 0.0)).norm());
        }
    }
    let degenerate = (decay_amplitude(1.0, 0.5, 1.0) - 2.0 * (-1.0f64).exp()).abs();
    dyn_worst = dyn_worst.max(degenerate);
    let times = linspace(0.0, 2.0, 9);
    let mut corr_worst: f64 = 0.0;
    for m in [
        QuantumBathModel::zero_temperature(1.0, 0.125)?,
        QuantumBathModel::zero_temperature(1.0, 0.5)?,
        QuantumBathModel::new(1.0, 0.125, 0.1)?,
    ] {
        let r = mode_correlation_check(&m, 12, &times)?;
        corr_worst = corr_worst.max(r.down_error).max(r.up_error).max(r.ratio_error);
    }
    outcome(
        dyn_worst <= 1e-6 && corr_worst <= 1e-8,
        format!(
            "reduced dynamics vs G(s) {dyn_worst:.2e} (bound 1e-6, |G(1) − 2/e| = {degenerate:.1e}); correlations {corr_worst:.2e} (bound 1e-8)"
        ),
    )
}

fn appendix_identities() -> Result<Outcome> {
    let m = ExchangeModel::default();
    let conv = appendix_convergence(|s| m.generator(s), &m.vacuum(), &m.correlated_state(), 2, 0.0, 1.5, 40)?;
    let ok = |r: f64| (3.5..=4.5).contains(&r);
    outcome(
        ok(conv.irrelevant_ratio) && ok(conv.relevant_ratio) && conv.coarse.initial_correlation > 0.0,
        format!(
            "h → h/2 error ratios: irrelevant {:.3}, relevant {:.3} (bound [3.5, 4.5])",
            conv.irrelevant_ratio, conv.relevant_ratio
        ),
    )
}

fn temperature_scaling() -> Result<Outcome> {
    // fixed point γt = γτ = 0.25, τc = 0.125, x-z-x with p = 0.8
    let nbars = [0.05, 0.1, 0.2];
    let mut first = Vec::new();
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    for nbar in nbars {
        let model = BathModel::Bosonic(QuantumBathModel::new(1.0, 0.125, nbar)?);
        let e = engine(model, MeasurementScheme::xzx(), 0.8, 1.0)?;
        let up = e.cpf_perturbative(0.25, 0.25, 0, 3)?;
        first.push(up.per_order[0]);
        plus.push(up.value.abs());
        minus.push(e.cpf_perturbative(0.25, 0.25, 1, 3)?.value.abs());
    }
    let ratio_errors: Vec<f64> =
        (1..3).map(|k| ((first[k] / first[0]) / (nbars[k] / nbars[0]) - 1.0).abs()).collect();
    let linear = ratio_errors.iter().all(|&r| r <= 0.05);
    let increasing = plus.windows(2).all(|w| w[1] > w[0]);
    let hi = minus.iter().copied().fold(f64::MIN, f64::max);
    let lo = minus.iter().copied().fold(f64::MAX, f64::min);
    let spread = (hi - lo) / hi;
    outcome(
        linear && increasing && spread < 0.2,
        format!(
            "order-1 ratio errors {:.3}, {:.3} (bound 0.05); |CPF(+1)| {:.3e} < {:.3e} < {:.3e}; y = −1 spread {:.3} (bound 0.2)",
            ratio_errors[0], ratio_errors[1], plus[0], plus[1], plus[2], spread
        ),
    )
}

fn internal_consistency() -> Result<Outcome> {
    let mut path_worst: f64 = 0.0;
    let mut markov_worst: f64 = 0.0;
    for model in all_models()? {
        for scheme in presets() {
            for p in [0.3, 0.8, 1.0] {
                let e = engine(model, scheme.clone(), p, 4.0)?;
                for (t, tau) in [(0.7, 1.3), (1.5, 1.5)] {
                    for order in 1..=3 {
                        let joint = e.joint_prob_perturbative(t, tau, order)?.joint;
                        for y in 0..2 {
                            match e.cpf_perturbative(t, tau, y, order) {
                                Ok(direct) => {
                                    path_worst =
                                        path_worst.max((direct.value - cpf_from_joint(&joint, y, 1e-12)?).abs());
                                }
                                Err(opnm::Error::ConditioningImpossible { .. }) => {}
                                Err(e) => return Err(e),
                            }
                        }
                    }
                    let m = e.markov_term(t, tau)?;
                    for y in 0..2 {
                        match cpf_from_joint(&m, y, 1e-12) {
                            Ok(v) => markov_worst = markov_worst.max(v.abs()),
                            Err(opnm::Error::ConditioningImpossible { .. }) => {}
                            Err(e) => return Err(e),
                        }
                    }
                }
            }
        }
    }
    outcome(
        path_worst <= 1e-10 && markov_worst <= 1e-14,
        format!("slot vs joint CPF {path_worst:.2e} (bound 1e-10); Markov-term CPF {markov_worst:.2e} (bound 1e-14)"),
    )
}

fn determinism() -> Result<Outcome> {
    let configs = [
        serde_json::json!({
            "model": {"type": "dephasing", "gamma": 1.0, "tau_c": 0.05},
            "scheme": {"preset": "xxx"},
            "initial_state": {"p": 1.0},
            "grid": {"t_max": 2.0, "n_points": 5},
            "oracle": {"kind": "monte-carlo", "n_traj": 5000, "seed": 3}
        }),
        serde_json::json!({
            "model": {"type": "bosonic", "gamma": 1.0, "tau_c": 0.125, "nbar": 0.1},
            "scheme": {"preset": "xzx"},
            "initial_state": {"p": 0.8},
            "grid": {"t_max": 2.0, "n_points": 5}
        }),
    ];
    let mut identical = true;
    let mut bytes = 0;
    for v in configs {
        let cfg = ExperimentConfig::from_value(v, &[])?;
        let runs = [
            simulate(&cfg, &RunOptions { parallel: false })?.table.to_csv()?,
            simulate(&cfg, &RunOptions { parallel: true })?.table.to_csv()?,
            simulate(&cfg, &RunOptions { parallel: true })?.table.to_csv()?,
            simulate(&cfg, &RunOptions { parallel: false })?.table.to_csv()?,
        ];
        identical &= runs.iter().all(|r| r.as_bytes() == runs[0].as_bytes());
        bytes += runs[0].len();
    }
    outcome(identical, format!("4 runs per config, serial and parallel, {bytes} bytes compared per run set"))
}

fn main() {
    let criteria: [(&str, fn() -> Result<Outcome>); 10] = [
        ("normalization", normalization),
        ("zero-temperature y=+1 nullity", zero_temperature_nullity),
        ("first-order exactness x-z-x", first_order_exactness),
        ("dephasing convergence", dephasing_convergence),
        ("oracle cross-validation", monte_carlo_cross_check),
        ("embedding fidelity", embedding_fidelity),
        ("appendix identities", appendix_identities),
        ("finite-temperature scaling", temperature_scaling),
        ("internal consistency", internal_consistency),
        ("determinism", determinism),
    ];
    let mut failures = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (verdict, detail) = match run() {
            Ok(o) => (if o.passed { "PASS" } else { "FAIL" }, o.detail),
            Err(e) => ("FAIL", format!("error: {e}")),
        };
        if verdict == "FAIL" {
            failures += 1;
        }
        println!("criterion {:>2} {verdict} {name}: {detail} [{:.1}s]", k + 1, start.elapsed().as_secs_f64());
    }
    println!("acceptance: {} of 10 criteria passed", 10 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}

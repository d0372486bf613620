use opnm::bath::{BathModel, ClassicalNoiseModel, FiniteTemperatureMethod, QuantumBathModel};
use opnm::measurement::{cpf_from_joint, JointDistribution, MeasurementScheme};
use opnm::operator::DensityMatrix;
use opnm::series::{SeriesEngine, SeriesOptions};
use proptest::prelude::*;

const PM: [f64; 2] = [1.0, -1.0];

fn table(values: Vec<f64>) -> JointDistribution {
    JointDistribution::from_values(values, PM.to_vec(), PM.to_vec(), PM.to_vec(), 1e-9).unwrap()
}

fn normalized(raw: &[f64]) -> Vec<f64> {
    let s: f64 = raw.iter().sum();
    raw.iter().map(|v| v / s).collect()
}

fn weights(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, n)
}

fn scheme(k: usize) -> MeasurementScheme {
    [MeasurementScheme::zzz(), MeasurementScheme::xzx(), MeasurementScheme::xxx()][k].clone()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn conditionally_independent_tables_have_zero_cpf(
        px in weights(2), py_x in weights(4), pz_y in weights(4),
    ) {
        let px = normalized(&px);
        let values: Vec<f64> = (0..8)
            .map(|i| {
                let (z, y, x) = (i / 4, (i / 2) % 2, i % 2);
                let y_given_x = py_x[2 * x + y] / (py_x[2 * x] + py_x[2 * x + 1]);
                let z_given_y = pz_y[2 * y + z] / (pz_y[2 * y] + pz_y[2 * y + 1]);
                z_given_y * y_given_x * px[x]
            })
            .collect();
        let j = table(values);
        for y in 0..2 {
            prop_assert!(cpf_from_joint(&j, y, 1e-12).unwrap().abs() <= 1e-14);
        }
    }

    #[test]
    fn cpf_ignores_other_slices_and_is_bounded(raw in weights(8), scale in 0.05f64..20.0) {
        let a = table(normalized(&raw));
        let mut reweighted = raw.clone();
        for z in 0..2 {
            for x in 0..2 {
                reweighted[4 * z + 2 + x] *= scale;
            }
        }
        let b = table(normalized(&reweighted));
        let ca = cpf_from_joint(&a, 0, 1e-12).unwrap();
        let cb = cpf_from_joint(&b, 0, 1e-12).unwrap();
        prop_assert!((ca - cb).abs() <= 1e-12 * (1.0 + ca.abs()));
        prop_assert!(ca.abs() <= 1.0 + 1e-12);
    }

    #[test]
    fn markov_term_is_normalized_and_factorizes(
        p in 0.0f64..=1.0, t in 0.0f64..3.0, tau in 0.0f64..3.0,
        tau_c in 0.02f64..0.6, nbar in 0.0f64..0.3, k in 0usize..3, bosonic in any::<bool>(),
    ) {
        let model = if bosonic {
            BathModel::Bosonic(QuantumBathModel::new(1.0, tau_c, nbar).unwrap())
        } else {
            BathModel::Dephasing(ClassicalNoiseModel::new(1.0, tau_c).unwrap())
        };
        let rho0 = DensityMatrix::qubit_superposition(p).unwrap();
        let e = SeriesEngine::for_model(
            model, scheme(k), &rho0, (t + tau).max(tau_c), FiniteTemperatureMethod::Pseudomode, SeriesOptions::default(),
        ).unwrap();
        let m = e.markov_term(t, tau).unwrap();
        prop_assert!((m.total() - 1.0).abs() <= 1e-12);
        prop_assert!(m.min_entry() >= -1e-12);
        for y in 0..2 {
            if let Ok(v) = cpf_from_joint(&m, y, 1e-9) {
                prop_assert!(v.abs() <= 1e-12, "y index {y}: {v}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn truncated_series_stays_normalized(
        p in 0.0f64..=1.0, t in 0.0f64..2.0, tau in 0.0f64..2.0, tau_c in 0.05f64..0.5, k in 0usize..3,
    ) {
        let model = BathModel::Bosonic(QuantumBathModel::zero_temperature(1.0, tau_c).unwrap());
        let rho0 = DensityMatrix::qubit_superposition(p).unwrap();
        let e = SeriesEngine::for_model(
            model, scheme(k), &rho0, (t + tau).max(tau_c), FiniteTemperatureMethod::Pseudomode, SeriesOptions::default(),
        ).unwrap();
        for order in 0..=3 {
            let r = e.joint_prob_perturbative(t, tau, order).unwrap();
            prop_assert!((r.joint.total() - 1.0).abs() <= 1e-12);
        }
    }
}

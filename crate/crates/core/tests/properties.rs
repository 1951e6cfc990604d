use std::f64::consts::{FRAC_PI_2, PI};

use phasediff::qubit::{dephased_state, hermitian_eig2};
use phasediff::theory::{
    effective_fisher, fisher_from_model, povm_fisher, qfi_closed_form, qfi_matrix, tradeoff_ratios, QFI_STEP,
};
use phasediff::weak::{analytic_fisher, outcome_probabilities, random_povm, weak_scheme_povm};
use phasediff::{Effect, MeasurementStrength, ParamPoint, Povm};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn th(t: f64) -> MeasurementStrength {
    MeasurementStrength::new(t).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn dephased_states_are_valid(phi in -PI..PI, delta in 0.0..3.0f64) {
        let s = dephased_state(phi, delta).unwrap();
        let rho = s.density();
        prop_assert!(rho.hermitian_deviation() < 1e-12);
        prop_assert!((rho.trace().re - 1.0).abs() < 1e-12);
        let eig = hermitian_eig2(rho).unwrap();
        prop_assert!(eig.values[1] >= -1e-12);
        prop_assert!(s.bloch().norm() <= 1.0 + 1e-12);
        prop_assert!((s.purity() - 0.5 * (1.0 + (-2.0 * delta * delta).exp())).abs() < 1e-12);
        let shifted = dephased_state(phi + 2.0 * PI, delta).unwrap();
        prop_assert!(shifted.density().max_abs_diff(rho) < 1e-12);
    }

    #[test]
    fn probabilities_form_a_distribution(phi in -PI..PI, delta in 0.0..3.0f64, t in 0.0..=FRAC_PI_2) {
        let p = outcome_probabilities(phi, delta, th(t)).unwrap();
        prop_assert!(p.iter().all(|&x| x >= -1e-15));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let born = weak_scheme_povm(th(t)).probabilities(&dephased_state(phi, delta).unwrap());
        for (a, b) in p.iter().zip(&born) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn fisher_symmetries(phi in -PI..PI, delta in 0.01..2.5f64, t in 0.0..=FRAC_PI_2) {
        let f = analytic_fisher(phi, delta, th(t)).unwrap();
        prop_assert!(f.is_psd(1e-12));
        let mirrored = analytic_fisher(-phi, delta, th(t)).unwrap();
        prop_assert!((mirrored.pd + f.pd).abs() < 1e-12);
        prop_assert!((mirrored.pp - f.pp).abs() < 1e-12 && (mirrored.dd - f.dd).abs() < 1e-12);
        let shifted = analytic_fisher(phi + PI, delta, th(t)).unwrap();
        prop_assert!(shifted.max_abs_diff(&f) < 1e-10);
    }

    #[test]
    fn effective_fisher_never_exceeds_plain(phi in -PI..PI, delta in 0.05..2.0f64, t in 0.05..1.5f64) {
        let f = analytic_fisher(phi, delta, th(t)).unwrap();
        let (fp, fd) = effective_fisher(&f).unwrap();
        prop_assert!(fp <= f.pp + 1e-12 && fd <= f.dd + 1e-12);
        let h = qfi_closed_form(delta).unwrap();
        let plain = tradeoff_ratios(&f, &h, false).unwrap();
        let eff = tradeoff_ratios(&f, &h, true).unwrap();
        prop_assert!(eff.sum <= plain.sum + 1e-12);
    }

    #[test]
    fn relabeling_outcomes_leaves_fisher_unchanged(
        phi in -PI..PI, delta in 0.05..2.0f64, seed in any::<u64>(), n in 2usize..=4,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let povm = random_povm(&mut rng, n).unwrap();
        let mut effects: Vec<Effect> = povm.effects().to_vec();
        effects.reverse();
        let reversed = Povm::new(effects).unwrap();
        let p = ParamPoint::new(phi, delta).unwrap();
        let a = povm_fisher(&povm, p).unwrap();
        let b = povm_fisher(&reversed, p).unwrap();
        prop_assert!(a.max_abs_diff(&b) < 1e-12);
    }

    #[test]
    fn random_povms_respect_quantum_bound(phi in -PI..PI, delta in 0.05..2.0f64, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let povm = random_povm(&mut rng, 3).unwrap();
        let f = povm_fisher(&povm, ParamPoint::new(phi, delta).unwrap()).unwrap();
        prop_assert!(f.is_psd(1e-12));
        prop_assert!(qfi_closed_form(delta).unwrap().sub(&f).is_psd(1e-9));
    }
}

#[test]
fn finite_difference_step_robustness() {
    let theta = th(0.7);
    let model = |p: ParamPoint| Ok(outcome_probabilities(p.phi, p.delta, theta)?.to_vec());
    for (phi, delta) in [(0.2, 0.5), (-2.0, 1.2), (1.0, 0.1)] {
        let p = ParamPoint::new(phi, delta).unwrap();
        let coarse = fisher_from_model(model, p, 1e-4).unwrap();
        let fine = fisher_from_model(model, p, 1e-6).unwrap();
        assert!(coarse.max_abs_diff(&fine) < 1e-5);
    }
}

#[test]
fn numeric_qfi_is_diagonal() {
    for delta in [0.05, 0.3, 1.0, 2.0] {
        for phi in [-2.0, 0.0, 0.4, 3.0] {
            let h = qfi_matrix(ParamPoint::new(phi, delta).unwrap(), QFI_STEP).unwrap();
            assert!(h.pd.abs() < 1e-10, "φ={phi} δ={delta}: {h:?}");
        }
    }
}

#[test]
fn weak_scheme_dominated_by_qfi_on_grid() {
    for i in 0..=20 {
        let t = FRAC_PI_2 * i as f64 / 20.0;
        for phi in [-3.0, -1.0, 0.0, 0.5, 2.0] {
            for delta in [0.05, 0.5, 1.0, 2.0] {
                let f = analytic_fisher(phi, delta, th(t)).unwrap();
                let gap = qfi_closed_form(delta).unwrap().sub(&f);
                assert!(gap.eigenvalues()[1] >= -1e-9);
            }
        }
    }
}

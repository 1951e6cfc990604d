use phasediff::sagnac::{
    calibration_scan, device_intensities, device_intensities_noisy, hwp1_input, hwp1_to_phase, hwp_to_theta,
    phase_to_hwp1, synthesize_mixed, synthesize_mixed_noisy, DeviceConfig,
};
use phasediff::weak::three_outcome_probabilities;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

#[test]
fn channels_match_three_outcome_distribution() {
    for omega in grid(0.0, 22.5, 12) {
        let cfg = DeviceConfig::with_omega(omega);
        let theta = hwp_to_theta(omega).unwrap();
        for alpha in grid(-90.0, 90.0, 37) {
            let rec = device_intensities(&cfg, hwp1_input(alpha)).unwrap();
            let p = three_outcome_probabilities(hwp1_to_phase(alpha), 0.0, theta).unwrap();
            for (a, b) in rec.channels().iter().zip(p) {
                assert!((a - b).abs() < 1e-12, "ω={omega} α={alpha}");
            }
        }
    }
}

#[test]
fn mixed_channels_match_three_outcome_distribution() {
    let cfg = DeviceConfig::default();
    let theta = cfg.theta().unwrap();
    for phi in [-2.9, -0.4, 0.0, 1.1, 3.18] {
        for delta in [0.05, 0.3, 1.0] {
            let rec = synthesize_mixed(phi, delta, &cfg).unwrap();
            let p = three_outcome_probabilities(phi, delta, theta).unwrap();
            for (a, b) in rec.channels().iter().zip(p) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn calibration_is_quarter_turn_periodic_and_bounded() {
    for omega in [0.0, 4.0, 8.0, 15.0, 22.5] {
        let cfg = DeviceConfig::with_omega(omega);
        let alphas = grid(0.0, 90.0, 31);
        let a = calibration_scan(&cfg, &alphas).unwrap();
        let shifted: Vec<f64> = alphas.iter().map(|x| x + 90.0).collect();
        let b = calibration_scan(&cfg, &shifted).unwrap();
        for (r, s) in a.rows.iter().zip(&b.rows) {
            assert!((r.s_z - s.s_z).abs() < 1e-12 && (r.s_x - s.s_x).abs() < 1e-12);
            assert!(r.s_z.abs() <= 1.0 + 1e-9 && r.s_x.abs() <= 1.0 + 1e-9);
        }
    }
}

#[test]
fn balanced_device_has_no_strength_signal() {
    let table = calibration_scan(&DeviceConfig::with_omega(22.5), &grid(0.0, 90.0, 19)).unwrap();
    assert!(table.rows.iter().all(|r| r.s_z.abs() < 1e-12));
}

#[test]
fn phase_plate_mapping_round_trips() {
    for phi in grid(-3.0, 3.0, 13) {
        assert!((hwp1_to_phase(phase_to_hwp1(phi)) - phi).abs() < 1e-14);
    }
}

#[test]
fn noise_is_seeded_and_nonnegative() {
    let cfg = DeviceConfig {
        noise_rel_std: 0.5,
        ..DeviceConfig::default()
    };
    let mut r1 = ChaCha8Rng::seed_from_u64(5);
    let mut r2 = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let a = device_intensities_noisy(&cfg, hwp1_input(10.0), &mut r1).unwrap();
        let b = device_intensities_noisy(&cfg, hwp1_input(10.0), &mut r2).unwrap();
        assert_eq!(a, b);
        assert!(a.channels().iter().all(|&x| x >= 0.0));
    }
    let clean = DeviceConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    assert_eq!(
        synthesize_mixed_noisy(0.4, 0.2, &clean, &mut rng).unwrap(),
        synthesize_mixed(0.4, 0.2, &clean).unwrap()
    );
}

#[test]
fn unequal_partner_intensity_biases_delta_signal() {
    // An over-bright partner dataset washes out more coherence.
    let cfg = DeviceConfig::default();
    let bright = DeviceConfig {
        partner_scale: 1.5,
        ..cfg
    };
    let a = synthesize_mixed(0.0, 0.25, &cfg).unwrap().signals();
    let b = synthesize_mixed(0.0, 0.25, &bright).unwrap().signals();
    assert!(b.s_z.abs() < a.s_z.abs());
}

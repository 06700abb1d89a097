use std::f64::consts::FRAC_1_SQRT_2;

use infocausal::boxes::{isotropic_box, pr_box};
use infocausal::rac::{
    ic_threshold_scan, j_exact, j_monte_carlo, nested_protocol, threshold_depth, RacConfig, RacResource,
};
use infocausal::rng::stream;
use proptest::prelude::*;

#[test]
fn monte_carlo_success_tracks_closed_form_on_a_grid() {
    for (i, &e) in [0.2, 0.5, 0.7, 0.85, 0.95].iter().enumerate() {
        for k in 1..=5u32 {
            let cfg = RacConfig { depth: k, resource: RacResource::Isotropic(e), trials: 100_000, seed: (i as u64) << 8 | k as u64 };
            let r = j_monte_carlo(&cfg).unwrap();
            let want = (1.0 + f64::powi(e, k as i32)) / 2.0;
            assert!(
                (r.per_bit_success - want).abs() <= 4.0 * r.per_bit_stderr,
                "E={e} k={k}: {} vs {want}",
                r.per_bit_success
            );
        }
    }
}

#[test]
fn monte_carlo_accepts_explicit_boxes() {
    let cfg = RacConfig { depth: 2, resource: RacResource::Box(isotropic_box(0.8).unwrap()), trials: 50_000, seed: 1 };
    let explicit = j_monte_carlo(&cfg).unwrap();
    let iso = j_monte_carlo(&RacConfig { resource: RacResource::Isotropic(0.8), ..cfg }).unwrap();
    assert_eq!(explicit, iso);
    assert!((explicit.j - j_exact(0.8, 2).unwrap().j).abs() <= 4.0 * explicit.j_stderr);
}

#[test]
fn threshold_depths() {
    assert_eq!(threshold_depth(0.70, 20).unwrap(), None);
    assert_eq!(threshold_depth(FRAC_1_SQRT_2, 20).unwrap(), None);
    assert_eq!(threshold_depth(0.72, 20).unwrap(), Some(10));
    assert_eq!(threshold_depth(0.75, 20).unwrap(), Some(3));
    assert_eq!(threshold_depth(0.80, 20).unwrap(), Some(1));
    assert_eq!(threshold_depth(1.0, 20).unwrap(), Some(1));
}

#[test]
fn closed_form_oracle_values() {
    assert!((j_exact(0.75, 3).unwrap().j - 1.059_943).abs() < 1e-6);
    assert!((j_exact(0.75, 2).unwrap().j - 0.968_486).abs() < 1e-6);
    assert!((j_exact(0.5, 1).unwrap().j - 0.377_444).abs() < 1e-6);
    assert_eq!(j_exact(1.0, 1).unwrap().delta_ic, 1.0);
}

#[test]
fn scan_rows_match_threshold_depths() {
    let rows = ic_threshold_scan(0.6, 0.8, 41, 20).unwrap();
    assert_eq!(rows.len(), 41);
    for r in rows {
        assert_eq!(r.depth, threshold_depth(r.e, 20).unwrap());
        match r.depth {
            Some(k) => assert!(r.result.depth == k && r.result.j > 1.0),
            None => assert!(r.result.depth == 20 && r.result.j <= 1.0),
        }
    }
}

#[test]
fn pr_box_protocol_is_error_free_for_random_data() {
    let pr = pr_box();
    let mut rng = stream(3, 0);
    for k in 1..=8usize {
        for t in 0..20u64 {
            let mut data_rng = stream(k as u64, t);
            let data: Vec<u8> = (0..1 << k).map(|_| rand::Rng::random_range(&mut data_rng, 0..2u8)).collect();
            let address = (t as usize * 7919) % (1 << k);
            let bits: Vec<u8> = (0..k).map(|j| ((address >> j) & 1) as u8).collect();
            assert_eq!(nested_protocol(&pr, &data, &bits, &mut rng).unwrap(), data[address]);
        }
    }
}

proptest! {
    #[test]
    fn quantum_strength_satisfies_information_causality(e in 0.0f64..=FRAC_1_SQRT_2, k in 1u32..=20) {
        prop_assert!(j_exact(e, k).unwrap().j <= 1.0);
    }

    #[test]
    fn j_is_even_in_e_for_even_depth(e in 0.0f64..=1.0, half in 1u32..=10) {
        let k = 2 * half;
        prop_assert_eq!(j_exact(e, k).unwrap().j, j_exact(-e, k).unwrap().j);
    }
}

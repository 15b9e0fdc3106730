//! Property tests over the public API.

use num_complex::Complex;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use beltloc::calibration::{
    motor_angles_from_even, profile_from_anchors, CalibrationAnchor, LookupTable, ProfileMetadata, ANCHOR_ANGLES,
};
use beltloc::dsp::{expand_half_spectrum, forward_transform, hann_window, frame_count, InverseTransform};
use beltloc::localization::{best_doa, circular_distance, score, select_motor};
use beltloc::sim::{synthesize, BeltGeometry, BeltScenario};
use beltloc::tdoa::{aggregate_mode, pairs};
use beltloc::{estimate_tdoas, stft, CalibrationProfile, Clip, Config, KernelParams, MultichannelClip, NoiseProfile, Profile, TdoaVector};

fn windowed(x: &[f64]) -> Vec<f64> {
    let w: Vec<f64> = hann_window(x.len());
    x.iter().zip(&w).map(|(a, b)| a * b).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inverse_undoes_forward(x in proptest::collection::vec(-1.0f64..1.0, 256)) {
        let frame = windowed(&x);
        let mut spectrum = forward_transform(&frame).unwrap();
        let mut out = vec![0.0; frame.len()];
        InverseTransform::new(frame.len()).unwrap().process(&mut spectrum, &mut out);
        let scale = frame.iter().map(|v| v.abs()).fold(f64::MIN_POSITIVE, f64::max);
        for (a, b) in out.iter().zip(&frame) {
            prop_assert!((a - b).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn half_spectrum_expansion_round_trips(x in proptest::collection::vec(-1.0f64..1.0, 64)) {
        let full = forward_transform(&x).unwrap();
        let mut rebuilt = vec![Complex::new(0.0, 0.0); 64];
        expand_half_spectrum(&full[..33], &mut rebuilt);
        for (a, b) in rebuilt.iter().zip(&full) {
            prop_assert!((a - b).norm() <= 1e-12);
        }
    }

    #[test]
    fn parseval_per_frame(x in proptest::collection::vec(-1.0f64..1.0, 600..2000), hop in 64usize..256) {
        let n = 256;
        let clip = MultichannelClip::new(vec![x.clone(), x.clone()], 44_100).unwrap();
        let specs = stft(&clip, n, hop).unwrap();
        prop_assert_eq!(specs[0].frame_count(), frame_count(x.len(), n, hop));
        prop_assert_eq!(specs[0].frame_count(), (x.len() - n) / hop + 1);
        let mut full = vec![Complex::new(0.0, 0.0); n];
        for (t, half) in specs[0].frames().enumerate() {
            let time: f64 = windowed(&x[t * hop..t * hop + n]).iter().map(|v| v * v).sum();
            expand_half_spectrum(half, &mut full);
            let freq: f64 = full.iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64;
            prop_assert!((time - freq).abs() <= 1e-9 * time.max(f64::MIN_POSITIVE));
        }
    }

    #[test]
    fn majority_lag_always_wins(
        majority in -64i64..=64,
        others in proptest::collection::vec(-64i64..=64, 0..20),
        extra in 1usize..5,
    ) {
        let mut lags: Vec<(i64, bool)> = others.iter().map(|&l| (l, true)).collect();
        lags.extend(std::iter::repeat_n((majority, true), others.len() + extra));
        // Unreliable frames never count, however many there are.
        lags.extend(std::iter::repeat_n((majority + 1, false), 100));
        prop_assert_eq!(aggregate_mode(&lags).unwrap(), majority);
    }

    #[test]
    fn select_motor_is_total_and_nearest(phi in 0.0f64..360.0, seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut motors: Vec<f64> = (0..15).map(|_| rng.random_range(0.0..360.0)).collect();
        motors.sort_by(f64::total_cmp);
        let (index, angle) = select_motor(phi, &motors);
        prop_assert!((1..=15).contains(&index));
        prop_assert_eq!(angle, motors[index - 1]);
        let best = motors.iter().map(|&m| circular_distance(m, phi)).fold(f64::INFINITY, f64::min);
        prop_assert_eq!(circular_distance(angle, phi), best);
        prop_assert!(motors[..index - 1].iter().all(|&m| circular_distance(m, phi) > best));
    }

    #[test]
    fn scores_are_bounded(
        a in proptest::collection::vec(-64.0f64..64.0, 28),
        b in proptest::collection::vec(-64.0f64..64.0, 28),
        sigma in 0.1f64..5.0,
    ) {
        let params = KernelParams::new(sigma, 0.707).unwrap();
        let s = score(&a, &b, &params).unwrap();
        let top = 28.0 * sigma * sigma;
        prop_assert!(s >= 0.0 && s <= top);
        if a != b {
            prop_assert!(s < top);
        }
        prop_assert!((score(&a, &a, &params).unwrap() - top).abs() <= 1e-12 * top);
    }
}

#[test]
fn motor_arithmetic_is_linear() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..200 {
        let mut even: Vec<f64> = (0..7).map(|_| rng.random_range(0.0..360.0)).collect();
        even.sort_by(f64::total_cmp);
        let base = motor_angles_from_even(&even).unwrap();
        // Power-of-two scaling and integer shifts of integer angles are exact.
        let scaled: Vec<f64> = even.iter().map(|e| e * 4.0).collect();
        for (s, b) in motor_angles_from_even(&scaled).unwrap().iter().zip(&base) {
            assert_eq!(*s, b * 4.0);
        }
        let ints: Vec<f64> = even.iter().map(|e| e.round()).collect();
        let shifted: Vec<f64> = ints.iter().map(|e| e + 17.0).collect();
        let a = motor_angles_from_even(&ints).unwrap();
        for (s, b) in motor_angles_from_even(&shifted).unwrap().iter().zip(&a) {
            assert_eq!(*s, b + 17.0);
        }
    }
    let spaced: Vec<f64> = (0..7).map(|k| 50.0 + 40.0 * k as f64).collect();
    let all = motor_angles_from_even(&spaced).unwrap();
    // Interior motors halve the even spacing; the ends sit half a step out.
    assert!(all[1..14].windows(2).all(|w| w[1] - w[0] == 20.0), "{all:?}");
    assert_eq!((all[1] - all[0], all[14] - all[13]), (10.0, 10.0));
    assert_eq!(motor_angles_from_even(&[60.0, 60.0]).unwrap()[0], 60.0);
}

fn geometric_profile() -> Profile {
    let geometry = BeltGeometry::default();
    let anchors = ANCHOR_ANGLES
        .iter()
        .map(|&angle| CalibrationAnchor {
            angle,
            tdoas: TdoaVector::new(geometry.true_tdoas(angle as f64, 2.0, 44_100.0).unwrap()).unwrap(),
        })
        .collect();
    profile_from_anchors(anchors, &Config::default()).unwrap()
}

/// Profile over a table of random, well separated rows.
fn scattered_profile(seed: u64) -> Profile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..360)
        .map(|_| (0..28).map(|_| rng.random_range(-60i32..=60) as f64).collect())
        .collect();
    let anchors = ANCHOR_ANGLES
        .iter()
        .map(|&a| CalibrationAnchor {
            angle: a,
            tdoas: TdoaVector::new(rows[a as usize].clone()).unwrap(),
        })
        .collect();
    let table = LookupTable::from_rows(rows).unwrap();
    let motors = (0..15).map(|i| 40.0 + 20.0 * i as f64).collect();
    CalibrationProfile::new(anchors, table, motors, ProfileMetadata::from_config(&Config::default())).unwrap()
}

#[test]
fn single_outlier_does_not_move_the_argmax() {
    let profile = scattered_profile(8);
    let params = KernelParams::<f64>::default();
    let l = params.length_scale;
    let mut checked = 0;
    for phi0 in (0..360).step_by(7) {
        let mut measured = profile.table().row(phi0).to_vec();
        measured[9] += 10.0 * l;
        // The fixture's precondition: every other row is at least l away in
        // two or more entries.
        let separated = (0..360).filter(|&a| a != phi0).all(|a| {
            profile
                .table()
                .row(a)
                .iter()
                .zip(&measured)
                .filter(|(r, m)| (*r - *m).abs() >= l)
                .count()
                >= 2
        });
        if !separated {
            continue;
        }
        checked += 1;
        let (best, _) = best_doa(&TdoaVector::new(measured).unwrap(), &profile, &params).unwrap();
        assert_eq!(best as usize, phi0);
    }
    assert!(checked >= 40, "only {checked} rows met the precondition");
}

fn noiseless(angle: f64, seed: u64) -> (Clip, Vec<f64>) {
    let s = synthesize(&BeltScenario {
        source_angle: angle,
        snr_db: f64::INFINITY,
        duration: 0.5,
        seed,
        ..BeltScenario::default()
    })
    .unwrap();
    (s.clip, s.truth.true_tdoas)
}

#[test]
fn noiseless_delays_round_to_geometry_and_stay_clipped() {
    let config = Config::default();
    let silent = NoiseProfile::silent(513);
    for (i, angle) in [0.0, 33.0, 90.0, 171.0, 222.5, 300.0].into_iter().enumerate() {
        let (clip, truth) = noiseless(angle, i as u64);
        let est = estimate_tdoas(&clip, &silent, &config).unwrap();
        for (pair, (&e, &t)) in pairs(8).iter().zip(est.delays().iter().zip(&truth)) {
            assert!(e.abs() <= config.tau_max as f64);
            // Half-integer ties can round either way.
            assert!((e - t).abs() <= 0.5 + 1e-9, "angle {angle} {pair:?}: {e} vs {t}");
        }
    }
    let mut tight = config.clone();
    tight.tau_max = 8;
    let (clip, _) = noiseless(90.0, 1);
    let est = estimate_tdoas(&clip, &silent, &tight).unwrap();
    assert!(est.delays().iter().all(|d| d.abs() <= 8.0));
}

#[test]
fn swapping_channels_negates_delays() {
    let (clip, _) = noiseless(140.0, 9);
    let config = Config::default();
    let silent = NoiseProfile::silent(513);
    let forward = estimate_tdoas(&clip, &silent, &config).unwrap();
    let mut channels = clip.channels().to_vec();
    channels.reverse();
    let reversed = estimate_tdoas(&Clip::new(channels, 44_100).unwrap(), &silent, &config).unwrap();
    for pair in pairs(8) {
        let mirrored = beltloc::PairIndex::new(9 - pair.v, 9 - pair.u, 8).unwrap();
        assert_eq!(reversed.get(mirrored), -forward.get(pair), "{pair:?}");
    }
}

#[test]
fn rotating_the_source_rotates_the_estimate() {
    let profile = geometric_profile();
    let config = Config::default();
    let silent = NoiseProfile::silent(513);
    let params = KernelParams::default();
    let delta = 20.0;
    for (i, angle) in [100.0, 150.0, 200.0, 250.0].into_iter().enumerate() {
        let doa = |a: f64| {
            let (clip, _) = noiseless(a, 30 + i as u64);
            best_doa(&estimate_tdoas(&clip, &silent, &config).unwrap(), &profile, &params).unwrap().0 as f64
        };
        let (a, b) = (doa(angle), doa(angle + delta));
        assert!((circular_distance(b, a) - delta).abs() <= 2.0, "{angle}: {a} -> {b}");
    }
}

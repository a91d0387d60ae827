mod common;

use std::f64::consts::PI;

use common::TestRng;
use num_complex::Complex64;
use nusrec_core::designer::{design_bank, design_full_bank, freq_response, DesignProblem};
use nusrec_core::reconstructor::{
    block_len, build_polyphase, reconstruct, reconstruct_direct, reconstruct_direct_probed,
    reconstruct_polyphase, reconstruct_polyphase_probed, BranchSchedule, Path, UsageLog,
};
use nusrec_core::signal_lab::MultitoneSignal;
use nusrec_core::{BandSpec, FilterBank, Rate, SampleKind, SamplingPattern, SignalTrace};
use proptest::prelude::*;

fn random_trace(rng: &mut TestRng, start: i64, len: usize) -> SignalTrace {
    let s = (0..len)
        .map(|_| Complex64::new(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)))
        .collect();
    SignalTrace::new(start, Rate::Fs1, SampleKind::Complex, s)
}

fn random_bank(rng: &mut TestRng, m: usize, order: usize, subset: bool) -> FilterBank {
    let skews = (0..m).map(|_| rng.uniform(-0.45, 0.45)).collect();
    let rows = (0..m)
        .map(|n| {
            (!(subset && n % 2 == 1)).then(|| {
                (0..=order)
                    .map(|_| Complex64::new(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)))
                    .collect()
            })
        })
        .collect();
    let band = BandSpec::new(rng.uniform(0.5, 6.0) * PI, 0.5 * PI);
    FilterBank::new(SamplingPattern::new(skews).unwrap(), band, order, rows, subset).unwrap()
}

/// Max relative difference over the common index range; also returns its size.
fn overlap_diff(a: &SignalTrace, b: &SignalTrace) -> (f64, usize) {
    let lo = a.start.max(b.start);
    let hi = a.end().min(b.end());
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for m in lo..hi {
        let (x, y) = (a.get(m).unwrap(), b.get(m).unwrap());
        worst = worst.max((x - y).norm());
        scale = scale.max(x.norm());
    }
    (worst / scale.max(f64::MIN_POSITIVE), (hi - lo).max(0) as usize)
}

fn check_paths_agree(m: usize, order: usize, seed: u64) {
    let mut rng = TestRng::new(seed);
    let bank = random_bank(&mut rng, m, order, m.is_multiple_of(2));
    let l = block_len(m) as i64;
    let v = random_trace(&mut rng, -7 * l, 4096 + 2 * l as usize * 20);
    let direct = reconstruct_direct(&v, &bank).unwrap();
    let poly = reconstruct(&v, &bank, Path::Polyphase).unwrap();
    let (err, overlap) = overlap_diff(&direct, &poly);
    assert!(overlap >= 2000, "overlap {overlap}");
    assert!(err <= 1e-12, "M={m} N={order}: {err:e}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn direct_and_polyphase_agree(m in 2usize..=5, half in 4usize..=20, seed in any::<u64>()) {
        check_paths_agree(m, 2 * half, seed);
    }

    #[test]
    fn reconstruction_is_linear(seed in any::<u64>(), a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let mut rng = TestRng::new(seed);
        let m = 2 + rng.below(4) as usize;
        let bank = random_bank(&mut rng, m, 12, false);
        let len = 40 * block_len(m);
        let v1 = random_trace(&mut rng, 0, len);
        let v2 = random_trace(&mut rng, 0, len);
        let mix: Vec<Complex64> = v1.samples.iter().zip(&v2.samples).map(|(x, y)| a * x + b * y).collect();
        let v3 = SignalTrace::new(0, Rate::Fs1, SampleKind::Complex, mix);
        for path in [Path::Direct, Path::Polyphase] {
            let y1 = reconstruct(&v1, &bank, path).unwrap();
            let y2 = reconstruct(&v2, &bank, path).unwrap();
            let y3 = reconstruct(&v3, &bank, path).unwrap();
            prop_assert_eq!(y3.start, y1.start);
            for i in 0..y3.len() {
                let want = a * y1.samples[i] + b * y2.samples[i];
                prop_assert!((y3.samples[i] - want).norm() <= 1e-12 * (1.0 + want.norm()));
            }
        }
    }
}

#[test]
fn paths_agree_at_fixed_shapes() {
    for (i, &(m, order)) in [(2, 8), (3, 40), (4, 22), (5, 30), (1, 10)].iter().enumerate() {
        check_paths_agree(m, order, 100 + i as u64);
    }
}

#[test]
fn output_is_at_half_rate_and_block_aligned() {
    let mut rng = TestRng::new(3);
    for m in 1..=5 {
        let bank = random_bank(&mut rng, m, 10, false);
        let l = block_len(m);
        let v = random_trace(&mut rng, 0, 30 * l);
        let y = reconstruct(&v, &bank, Path::Polyphase).unwrap();
        assert_eq!(y.rate, Rate::Fs2);
        assert_eq!(y.kind, SampleKind::Complex);
        // whole blocks of L/2 outputs each
        assert_eq!(y.start % (l as i64 / 2), 0);
        assert_eq!(y.len() % (l / 2), 0);
        let d = reconstruct(&v, &bank, Path::Direct).unwrap();
        assert_eq!(d.rate, Rate::Fs2);
        assert_eq!(d.len(), (v.len() - 10) / 2);
    }
}

#[test]
fn even_period_never_touches_odd_branches() {
    let mut rng = TestRng::new(21);
    let bank = random_bank(&mut rng, 4, 16, true);
    let v = random_trace(&mut rng, 0, 400);
    let mut direct = UsageLog::new(4);
    reconstruct_direct_probed(&v, &bank, &mut direct).unwrap();
    let poly = build_polyphase(&bank).unwrap();
    let mut blocked = UsageLog::new(4);
    reconstruct_polyphase_probed(&v, &poly, &mut blocked).unwrap();
    for log in [&direct, &blocked] {
        assert_eq!(log.per_branch[1], 0);
        assert_eq!(log.per_branch[3], 0);
        assert!(log.per_branch[0] > 0 && log.per_branch[2] > 0);
        assert!(log.order.iter().all(|b| b % 2 == 0));
    }
}

#[test]
fn odd_period_cycles_through_all_branches() {
    let mut rng = TestRng::new(22);
    let bank = random_bank(&mut rng, 5, 12, false);
    let poly = build_polyphase(&bank).unwrap();
    assert_eq!(poly.schedule, BranchSchedule(vec![0, 2, 4, 1, 3]));
    let v = random_trace(&mut rng, 0, 20 * 10);
    let mut log = UsageLog::new(5);
    reconstruct_polyphase_probed(&v, &poly, &mut log).unwrap();
    for block in log.order.chunks(5) {
        assert_eq!(block, [0, 2, 4, 1, 3]);
    }
    assert!(log.per_branch.iter().all(|&c| c > 0));
}

#[test]
fn polyphase_does_half_the_multiplies_of_a_full_rate_filter() {
    let mut rng = TestRng::new(8);
    for m in 1..=5 {
        let problem = DesignProblem::new(
            SamplingPattern::new((0..m).map(|_| rng.uniform(-0.3, 0.3)).collect()).unwrap(),
            BandSpec::new(2.6 * PI, 0.7 * PI),
            14,
        )
        .unwrap();
        let bank = design_full_bank(&problem).unwrap();
        let poly = build_polyphase(&bank).unwrap();
        let l = block_len(m);
        let v = random_trace(&mut rng, 0, 50 * l);
        let mut d = UsageLog::new(m);
        let yd = reconstruct_direct_probed(&v, &bank, &mut d).unwrap();
        let mut p = UsageLog::new(m);
        let yp = reconstruct_polyphase_probed(&v, &poly, &mut p).unwrap();
        let per_out_direct = d.multiplies as f64 / yd.len() as f64;
        let per_out_poly = p.multiplies as f64 / yp.len() as f64;
        assert_eq!(per_out_poly, 15.0);
        // the full-rate filter also computes every odd-n output
        assert!((per_out_direct / per_out_poly - 2.0).abs() < 0.01, "M={m}");
    }
}

#[test]
fn polyphase_split_preserves_every_tap() {
    let mut rng = TestRng::new(4);
    for m in 1..=6 {
        for order in [2, 8, 13 * 2] {
            let bank = random_bank(&mut rng, m, order, m % 2 == 0);
            let poly = build_polyphase(&bank).unwrap();
            let l = block_len(m);
            assert_eq!(poly.rows.len(), l / 2);
            assert!(poly.rows.iter().all(|r| r.len() == l));
            // nonzero taps of each output phase must equal the branch row
            for (q, comps) in poly.rows.iter().enumerate() {
                let r = 2 * q;
                let h = bank.row(r as i64).unwrap();
                let mut got: Vec<Complex64> = comps.iter().flat_map(|c| c.taps.iter().copied()).collect();
                let mut want = h.to_vec();
                got.retain(|z| z.norm() > 0.0);
                want.retain(|z| z.norm() > 0.0);
                let key = |z: &Complex64| (z.re, z.im);
                got.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
                want.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
                assert_eq!(got, want, "M={m} N={order} phase {q}");
            }
        }
    }
}

#[test]
fn tone_amplitudes_stay_within_band_error() {
    let problem = DesignProblem::new(
        SamplingPattern::new(vec![0.0, -0.15]).unwrap(),
        BandSpec::from_edges(4.75 * PI, 5.55 * PI),
        60,
    )
    .unwrap();
    let bank = design_bank(&problem).unwrap();
    let k = 4096usize;
    let (signal, _) = nusrec_core::analysis::snap_to_bins(&MultitoneSignal::default_four_tone(), k);
    let half = problem.half_order();
    let v = signal.sample_nonuniform(problem.band.omega_c_t1, &problem.pattern, -half - 4, 2 * k + 2 * half as usize + 8);
    let y = reconstruct(&v, &bank, Path::Polyphase).unwrap().slice(0, k as i64);
    assert_eq!(y.len(), k);

    let grid: Vec<f64> = (0..=400)
        .map(|i| problem.band.omega1_t1() + problem.band.b_t1 * i as f64 / 400.0)
        .collect();
    let worst = bank
        .present_rows()
        .flat_map(|n| {
            freq_response(bank.row(n as i64).unwrap(), &problem.pattern, n, &grid)
                .into_iter()
                .map(|a| (a - 1.0).norm())
        })
        .fold(0.0, f64::max);
    assert!(worst < 1e-3);

    for tone in &signal.tones {
        let w = 2.0 * tone.omega_t1;
        let proj: Complex64 = y
            .samples
            .iter()
            .enumerate()
            .map(|(m, s)| s * Complex64::from_polar(1.0, -w * m as f64))
            .sum::<Complex64>()
            / k as f64;
        let got = proj.norm();
        assert!(
            (got - tone.amplitude).abs() <= worst * tone.amplitude + 1e-12,
            "tone {}: {got} vs {}",
            tone.omega_t1 / PI,
            tone.amplitude
        );
    }
}

#[test]
fn misaligned_input_is_rejected_only_by_the_blocked_path() {
    let mut rng = TestRng::new(30);
    let bank = random_bank(&mut rng, 3, 8, false);
    let poly = build_polyphase(&bank).unwrap();
    let v = random_trace(&mut rng, 1, 6 * 20);
    assert!(reconstruct_polyphase(&v, &poly).is_err());
    assert!(reconstruct(&v, &bank, Path::Polyphase).is_ok());
    assert!(reconstruct(&v, &bank, Path::Direct).is_ok());
}

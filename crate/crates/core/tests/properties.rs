use photonlink::link::hmm::{build_hmm, FrameStats};
use photonlink::link::{forward_increments, viterbi_decode, CycleKernel};
use photonlink::oracle::{excitation_by_subsets, exhaustive_map, path_log_score, survivors_pairwise};
use photonlink::*;
use proptest::prelude::*;

fn device() -> impl Strategy<Value = DeviceParams> {
    (0.5f64..50.0, 0.0f64..5.0).prop_map(|(kappa, gamma)| DeviceParams::ideal(kappa, gamma).unwrap())
}

fn sorted_times(max_len: usize, t_c: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..t_c, 0..=max_len).prop_map(|mut v| {
        v.sort_by(f64::total_cmp);
        v
    })
}

fn kernel(p: (f64, f64), reset: [f64; 2]) -> CycleKernel {
    CycleKernel {
        rate: 0.0,
        readout: [p.0, p.1],
        reset,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn kernels_are_probabilities(dev in device(), t in 0.0f64..20.0, dt in 0.0f64..5.0) {
        let f2 = excited_prob(t, &dev);
        let fb = ground_return_prob(t, &dev);
        prop_assert!((0.0..=1.0).contains(&f2));
        prop_assert!((0.0..=1.0).contains(&fb));
        prop_assert!(f2 + fb <= 1.0 + 1e-12);
        prop_assert!(ground_return_prob(t + dt, &dev) >= fb - 1e-15);
    }

    #[test]
    fn renewal_recursion_matches_subset_enumeration(dev in device(), times in sorted_times(6, 2.0)) {
        let trace = ArrivalTrace::new(times, 2.0).unwrap();
        let brute = excitation_by_subsets(&trace, &dev).unwrap();
        prop_assert!((brute.mass - 1.0).abs() < 1e-12);
        prop_assert!((brute.excitation - excitation_given_arrivals(&trace, &dev)).abs() < 1e-12);
    }

    #[test]
    fn excitation_is_translation_invariant(dev in device(), times in sorted_times(8, 1.0), shift in 0.0f64..3.0) {
        let a = ArrivalTrace::new(times.clone(), 1.0).unwrap();
        let b = ArrivalTrace::new(times.iter().map(|t| t + shift).collect(), 1.0 + shift).unwrap();
        let (ea, eb) = (excitation_given_arrivals(&a, &dev), excitation_given_arrivals(&b, &dev));
        prop_assert!((ea - eb).abs() < 1e-10);
        prop_assert!((0.0..=1.0).contains(&ea));
    }

    #[test]
    fn survivor_filter_properties(times in sorted_times(30, 10.0), tau in 0.01f64..2.0, shift in 0.0f64..5.0) {
        let w = SaturationWindow::new(tau).unwrap();
        let trace = ArrivalTrace::new(times.clone(), 10.0).unwrap();
        let s = filter_survivors(&trace, &w);
        prop_assert_eq!(s.times(), &survivors_pairwise(&trace, &w)[..]);
        prop_assert!(s.len() <= trace.len());
        // survivors are pairwise separated, so filtering again keeps them all
        let again = filter_survivors(&s, &w);
        prop_assert_eq!(again.times(), s.times());
        let moved = ArrivalTrace::new(times.iter().map(|t| t + shift).collect(), 10.0 + shift).unwrap();
        prop_assert_eq!(filter_survivors(&moved, &w).len(), s.len());
    }

    #[test]
    fn survivor_means_are_bounded(n in 0usize..60, ratio in 4.0f64..50.0, lt in 0.0f64..200.0) {
        let m = survivor_moments_given_count(n, 1.0, ratio).unwrap();
        prop_assert!(m.mean <= n as f64 + 1e-9);
        prop_assert!(m.mean >= -1e-12);
        prop_assert!(m.variance >= -1e-9);
        let p = survivor_moments_poisson(lt / ratio, 1.0, ratio).unwrap();
        prop_assert!(p.mean <= lt + 1e-9);
    }

    #[test]
    fn viterbi_path_is_maximal(
        p0 in (0.01f64..0.99, 0.01f64..0.99),
        p1 in (0.01f64..0.99, 0.01f64..0.99),
        reset in (0.01f64..0.99, 0.01f64..0.99),
        bits in prop::collection::vec(prop::collection::vec(any::<bool>(), 3), 1..=4),
    ) {
        let r = [reset.0, reset.1];
        let spec = build_hmm(kernel(p0, r), kernel(p1, r), 3).unwrap();
        let frames: Vec<FrameStats> = bits.iter().map(|b| FrameStats::from_bits(b)).collect();
        let decoded = viterbi_decode(&spec, &frames).unwrap();
        let map = exhaustive_map(&spec, &frames);
        // best score over paths that carry the decoded symbols
        let t = frames.len();
        let mut best_for_decoded = f64::NEG_INFINITY;
        for levels in 0..1usize << t {
            let states: Vec<usize> = (0..t).map(|j| 2 * (levels >> j & 1) + decoded[j] as usize).collect();
            best_for_decoded = best_for_decoded.max(path_log_score(&spec, &frames, &states));
        }
        prop_assert!((best_for_decoded - map.log_score).abs() < 1e-9);
    }
}

#[test]
fn forward_likelihood_sums_to_one_for_small_sets() {
    let spec = build_hmm(kernel((0.1, 0.7), [0.05, 0.2]), kernel((0.6, 0.9), [0.05, 0.2]), 4).unwrap();
    let frames: Vec<FrameStats> = (0..16u32)
        .map(|m| FrameStats::from_bits(&(0..4).map(|i| m >> i & 1 == 1).collect::<Vec<_>>()))
        .collect();
    for t in 1..=3usize {
        let mut total = 0.0;
        for code in 0..16usize.pow(t as u32) {
            let obs: Vec<FrameStats> = (0..t).map(|j| frames[code / 16usize.pow(j as u32) % 16]).collect();
            total += forward_increments(&spec, &obs).unwrap().iter().sum::<f64>().exp();
        }
        assert!((total - 1.0).abs() < 1e-12, "T = {t}: {total}");
    }
}

#[test]
fn single_precision_core_agrees_with_double() {
    let d64 = DeviceParams64::ideal(8.0, 1.0).unwrap();
    let d32 = DeviceParams32::ideal(8.0, 1.0).unwrap();
    let t64 = ArrivalTrace64::new(vec![0.1, 0.3, 0.8], 1.5).unwrap();
    let t32 = ArrivalTrace32::new(vec![0.1, 0.3, 0.8], 1.5).unwrap();
    let e64 = excitation_given_arrivals(&t64, &d64);
    let e32 = excitation_given_arrivals(&t32, &d32);
    assert!((e64 - e32 as f64).abs() < 1e-5);
    let m64 = survivor_moments_given_count(7, 0.1, 1.0).unwrap();
    let m32 = survivor_moments_given_count(7, 0.1f32, 1.0f32).unwrap();
    assert!((m64.mean - m32.mean as f64).abs() < 1e-4);
}

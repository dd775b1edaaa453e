use ajscc_core::codec::{
    build_levels, decode_pair, encode, quantize, CodecConfig, RANGE_TOLERANCE,
};
use ajscc_core::experiments::{block_mse, ChannelExperiment, ChannelTemplate};
use ajscc_core::phenomenon::generate_field;
use ajscc_core::{Geometry, Interval, MosfetParams};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const RANGE: Interval = Interval::new(5.0, 10.0);

fn params() -> impl Strategy<Value = MosfetParams> {
    (50e-6..500e-6f64, 0.3..1.0f64, 0.005..0.2f64)
        .prop_map(|(k, v, l)| MosfetParams::new(k, v, l).unwrap())
}

proptest! {
    #[test]
    fn quantizer_idempotent_and_bounded(delta in 0.05..2.0f64, v in 5.0..10.0f64) {
        let levels = build_levels(RANGE, delta, 1).unwrap();
        let q = quantize(v, &levels);
        prop_assert!(levels.contains(&q));
        prop_assert_eq!(quantize(q, &levels), q);
        let top = *levels.last().unwrap();
        if v <= top {
            prop_assert!((q - v).abs() <= delta / 2.0 + 1e-12);
        } else {
            prop_assert_eq!(q, top);
        }
    }

    #[test]
    fn mosfet_round_trip(p in params(), over in 0.01..10.0f64, vds in 0.0..20.0f64) {
        let vgs = p.v_th + over;
        let i = p.drain_current(vgs, vds).unwrap();
        let back = p.invert_vds(vgs, i).unwrap();
        prop_assert!((back - vds).abs() <= 1e-9 * vds.max(1.0) / p.lambda.min(1.0));
    }

    #[test]
    fn mosfet_monotone(p in params(), over in 0.01..10.0f64, vds in 0.0..20.0f64, d in 0.01..2.0f64) {
        let vgs = p.v_th + over;
        let i = p.drain_current(vgs, vds).unwrap();
        prop_assert!(p.drain_current(vgs + d, vds).unwrap() > i);
        prop_assert!(p.drain_current(vgs, vds + d).unwrap() > i);
        prop_assert!(p.curve_slope(vgs + d).unwrap() > p.curve_slope(vgs).unwrap());
    }

    #[test]
    fn current_over_slope_identity(p in params(), over in 0.01..10.0f64, vds in 0.0..20.0f64) {
        let vgs = p.v_th + over;
        let ratio = p.lambda * p.drain_current(vgs, vds).unwrap() / p.curve_slope(vgs).unwrap();
        prop_assert!((ratio - (1.0 + p.lambda * vds)).abs() <= 1e-12 * ratio);
    }

    #[test]
    fn decode_pair_is_order_invariant(
        delta in 0.2..1.5f64,
        g in 5.0..10.0f64,
        v1 in 5.0..10.0f64,
        v2 in 5.0..10.0f64,
        noise in -0.02..0.02f64,
    ) {
        let p = MosfetParams::default();
        let cfg = CodecConfig::uniform(&p, RANGE, delta, RANGE).unwrap();
        let i1 = encode(&p, &cfg, g, v1).unwrap() * (1.0 + noise);
        let i2 = encode(&p, &cfg, g, v2).unwrap();
        let a = decode_pair(&p, &cfg, i1, i2).unwrap();
        let b = decode_pair(&p, &cfg, i2, i1).unwrap();
        prop_assert_eq!(a.vgs_hat, b.vgs_hat);
        prop_assert_eq!(a.vds_hat_1, b.vds_hat_2);
        prop_assert_eq!(a.vds_hat_2, b.vds_hat_1);
        prop_assert_eq!(a.in_range, b.in_range);
    }

    #[test]
    fn range_check_picks_in_range_when_possible(
        delta in 0.2..1.5f64,
        i1 in 1e-3..1e-2f64,
        ratio in 0.9..1.1f64,
    ) {
        let p = MosfetParams::default();
        let cfg = CodecConfig::uniform(&p, RANGE, delta, RANGE).unwrap();
        let i2 = i1 * ratio;
        let d = decode_pair(&p, &cfg, i1, i2).unwrap();
        let fits = |g: f64| {
            let a = p.invert_vds(g, i1).unwrap();
            let b = p.invert_vds(g, i2).unwrap();
            RANGE.excess(a).max(RANGE.excess(b)) <= RANGE_TOLERANCE
        };
        let any_fits = cfg.levels.iter().any(|&g| fits(g));
        prop_assert_eq!(d.in_range, any_fits);
        if any_fits {
            prop_assert!(fits(d.vgs_hat));
        }
        // Without correction the pick is the best slope score.
        let raw = decode_pair(&p, &cfg.clone().with_range_check(false), i1, i2).unwrap();
        prop_assert!(!raw.corrected);
    }

    #[test]
    fn realize_is_deterministic(seed in any::<u64>(), delta in 0.3..1.2f64) {
        let exp = small_experiment(seed, false);
        let a = exp.realize(0, delta, 410e3, -20.0).unwrap();
        let b = exp.realize(0, delta, 410e3, -20.0).unwrap();
        prop_assert_eq!(a, b);
    }
}

fn small_experiment(seed: u64, ideal: bool) -> ChannelExperiment {
    ChannelExperiment {
        geometry: Geometry {
            nx: 4,
            ny: 4,
            nt: 4,
            s_p: 2,
            t_p: 2,
        },
        channel: ChannelTemplate {
            ideal,
            ..ChannelTemplate::default()
        },
        seed,
        repetitions: 2,
        ..ChannelExperiment::default()
    }
}

#[test]
fn run_point_is_deterministic() {
    let exp = small_experiment(5, false);
    assert_eq!(
        exp.run_point(0.5, 200e3, -15.0).unwrap(),
        exp.run_point(0.5, 200e3, -15.0).unwrap()
    );
}

#[test]
fn block_values_are_uniform() {
    // 100 × 100 sensors, 2 instants, one block per sensor: 10⁴ blocks.
    let g = Geometry {
        nx: 100,
        ny: 100,
        nt: 2,
        s_p: 1,
        t_p: 2,
    };
    let f = generate_field(g, 5.0, 10.0, 3, 0.0).unwrap();
    let mut means = f.block_means(&f.values).unwrap();
    assert_eq!(means.len(), 10_000);
    means.sort_by(f64::total_cmp);
    let n = means.len() as f64;
    let d = means
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let cdf = (v - 5.0) / 5.0;
            (cdf - i as f64 / n)
                .abs()
                .max(((i + 1) as f64 / n - cdf).abs())
        })
        .fold(0.0, f64::max);
    // Kolmogorov-Smirnov critical value at α = 0.001.
    assert!(d < 1.95 / n.sqrt(), "KS statistic {d}");
}

#[test]
fn block_mse_of_white_noise() {
    // Each 10 × 10 × 10 block averages 1000 samples, so the MSE of the block
    // means is σ²/1000.
    let g = Geometry::STANDARD;
    let sigma: f64 = 0.5;
    let noise = Normal::new(0.0, sigma).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut total = 0.0;
    let reps = 400;
    for rep in 0..reps {
        let f = generate_field(g, 5.0, 10.0, rep, 0.0).unwrap();
        let est: Vec<f64> = f
            .values
            .iter()
            .map(|v| v + noise.sample(&mut rng))
            .collect();
        total += block_mse(&f, &est).unwrap();
    }
    let mean = total / reps as f64;
    let expected = sigma * sigma / 1000.0;
    // 3200 blocks: the relative standard error is sqrt(2/3200) ≈ 2.5%.
    assert!((mean / expected - 1.0).abs() < 0.1, "{mean} vs {expected}");
}

#[test]
fn ideal_channel_mse_is_quantization_error() {
    for seed in 0..20 {
        let exp = small_experiment(seed, true);
        for delta in [0.8, 1.0, 1.25] {
            let r = exp.realize(0, delta, 410e3, f64::INFINITY).unwrap();
            assert_eq!(r.vgs_hat, r.vgs_quantized);
            let direct = block_mse(&r.vgs_field, &r.vgs_quantized).unwrap();
            assert_eq!(block_mse(&r.vgs_field, &r.vgs_hat).unwrap(), direct);
            for (v, q) in r.vgs_field.values.iter().zip(&r.vgs_quantized) {
                assert!((v - q).abs() <= delta / 2.0 + 1e-12);
            }
            // Vds error stays within the receiver's frequency resolution
            // mapped through the flattest curve.
            let i_max = exp.max_current().unwrap();
            let cfg = exp.channel.build(410e3, f64::INFINITY, i_max, 0);
            let flattest = exp.params.curve_slope(exp.vgs_range.lo).unwrap();
            let bound = cfg.current_resolution() / flattest;
            for (v, e) in r.vds_field.values.iter().zip(&r.vds_hat) {
                assert!((v - e).abs() <= bound, "{v} vs {e}, bound {bound}");
            }
        }
    }
}

#[test]
fn ideal_channel_mse_grows_with_delta() {
    let mut exp = small_experiment(0, true);
    exp.geometry = Geometry {
        nx: 8,
        ny: 8,
        nt: 4,
        s_p: 1,
        t_p: 2,
    };
    exp.repetitions = 20;
    let mut last = 0.0;
    for delta in [0.8, 1.0, 1.25, 1.7, 2.5] {
        let r = exp.run_point(delta, 410e3, f64::INFINITY).unwrap();
        assert!(r.mse_gs >= last, "Δ = {delta}: {} < {last}", r.mse_gs);
        last = r.mse_gs;
    }
}

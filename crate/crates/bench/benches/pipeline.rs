use std::hint::black_box;

use ajscc_core::channel::{symbol_rng, transmit_into, ChannelConfig, Demodulator};
use ajscc_core::codec::{decode_stream, encode, CodecConfig};
use ajscc_core::experiments::{run_noiseless, ChannelExperiment, NoiselessSetup};
use ajscc_core::phenomenon::Geometry;
use ajscc_core::{Interval, MosfetParams};
use criterion::{criterion_group, criterion_main, Criterion};

fn codec(c: &mut Criterion) {
    let p = MosfetParams::default();
    let range = Interval::new(5.0, 10.0);
    let cfg = CodecConfig::uniform(&p, range, 0.41, range).unwrap();
    let ids: Vec<f64> = (0..1000)
        .map(|i| {
            encode(
                &p,
                &cfg,
                5.0 + (i % 50) as f64 * 0.1,
                5.0 + (i % 47) as f64 * 0.1,
            )
            .unwrap()
        })
        .collect();
    c.bench_function("decode_stream_1000", |b| {
        b.iter(|| decode_stream(&p, &cfg, black_box(&ids)).unwrap())
    });
    c.bench_function("noiseless_figure", |b| {
        let setup = NoiselessSetup::default();
        b.iter(|| run_noiseless(black_box(&setup)).unwrap())
    });
}

fn channel(c: &mut Criterion) {
    let i_max = MosfetParams::default().drain_current(10.0, 10.0).unwrap();
    let cfg = ChannelConfig::for_current_range(410e3, -20.0, i_max);
    let mut demod = Demodulator::new(&cfg);
    let mut buf = vec![Default::default(); cfg.fft_len];
    c.bench_function("symbol_transmit_demodulate", |b| {
        let mut k = 0u64;
        b.iter(|| {
            let mut rng = symbol_rng(cfg.seed, k);
            k += 1;
            transmit_into(200e3, &cfg, &mut rng, &mut buf);
            demod.peak_frequency(black_box(&buf)).unwrap()
        })
    });
}

fn experiment(c: &mut Criterion) {
    let exp = ChannelExperiment {
        geometry: Geometry {
            nx: 4,
            ny: 4,
            nt: 20,
            s_p: 2,
            t_p: 10,
        },
        repetitions: 1,
        ..ChannelExperiment::default()
    };
    let mut g = c.benchmark_group("experiment");
    g.sample_size(10);
    g.bench_function("run_point_320_samples", |b| {
        b.iter(|| exp.run_point(0.41, 410e3, -20.0).unwrap())
    });
    g.finish();
}

criterion_group!(benches, codec, channel, experiment);
criterion_main!(benches);

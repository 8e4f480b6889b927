use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use num_complex::Complex64;
use rand::Rng;
use shapelink_core::channel::complex_gaussian;
use shapelink_core::constellation::{make_apsk32, normalize, SymbolDistribution};
use shapelink_core::demap::MapDemapper;
use shapelink_core::fec::builtin_code;
use shapelink_core::metrics::FrameSimulator;
use shapelink_core::rng::substream;
use shapelink_core::{ChannelModel, Link, LinkSimulator, ReceiverConfig, ShapingCode, SystematicEncoder, TannerGraph};

fn bp(c: &mut Criterion) {
    let h = builtin_code("peg-n1440-r23").unwrap();
    let enc = SystematicEncoder::new(&h).unwrap();
    let g = TannerGraph::new(&h);
    let mut r = substream(1, &[]);
    let msg: Vec<u8> = (0..enc.k()).map(|_| r.random_range(0..2)).collect();
    let n0 = 0.6;
    let la: Vec<f64> = enc
        .encode(&msg)
        .unwrap()
        .iter()
        .map(|&b| -4.0 * (if b == 1 { -1.0 } else { 1.0 } + complex_gaussian(&mut r, n0).re) / n0)
        .collect();
    c.bench_function("bp_iterate_n1440_r23", |b| {
        let mut st = g.initial_state();
        b.iter(|| black_box(g.iterate(&mut st, black_box(&la))))
    });
}

fn demap(c: &mut Criterion) {
    let pts = normalize(make_apsk32().points(), &SymbolDistribution::uniform(32)).unwrap();
    let d = MapDemapper::new(&pts);
    let mut r = substream(2, &[]);
    let y: Vec<Complex64> = (0..288).map(|_| pts.points()[r.random_range(0..32)] + complex_gaussian(&mut r, 0.1)).collect();
    let la = vec![0.0; 288 * 5];
    c.bench_function("map_demap_288_symbols", |b| b.iter(|| black_box(d.extrinsic(black_box(&y), &[0.1], &la))));
}

fn shaping(c: &mut Criterion) {
    let code = ShapingCode::build(2, 4).unwrap();
    let mut r = substream(3, &[]);
    let la_c: Vec<f64> = (0..80 * 4).map(|_| r.random_range(-4.0..4.0)).collect();
    let la_d = vec![0.0; 80 * 2];
    c.bench_function("shaping_decode_80_blocks", |b| b.iter(|| black_box(code.decode_input(black_box(&la_c), &la_d))));
}

fn frame(c: &mut Criterion) {
    let pts = normalize(make_apsk32().points(), &SymbolDistribution::uniform(32)).unwrap();
    let link = Link::new(builtin_code("peg-n1440-r35").unwrap(), None::<ShapingCode>, &[], pts, 1, 2).unwrap();
    let mut g = c.benchmark_group("frame");
    g.sample_size(20);
    for (name, rc) in [("simplified", ReceiverConfig::simplified()), ("idd", ReceiverConfig::idd())] {
        let sim = LinkSimulator::map(link.clone(), rc, ChannelModel::Awgn);
        let mut f = 0;
        g.bench_function(name, |b| {
            b.iter(|| {
                f += 1;
                black_box(sim.simulate(6.5, 1, 0, f).unwrap())
            })
        });
    }
    g.finish();
}

criterion_group!(benches, bp, demap, shaping, frame);
criterion_main!(benches);

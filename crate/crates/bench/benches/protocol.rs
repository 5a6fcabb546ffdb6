use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use escot::baseot::{random_seed_pairs, BaseOtReceiver, BaseOtSender, GroupParams, KeyDerivation};
use escot::editdist::{ukkonen_cleartext, wagner_fischer};
use escot::protocol::run_loopback;
use escot::{SessionConfig, Threshold};
use escot_bench::workload;

fn cleartext(c: &mut Criterion) {
    let (query, db) = workload(1, 3500, 0.02, 1);
    let target = &db.entries()[0];
    let mut g = c.benchmark_group("cleartext");
    g.bench_function("wagner_fischer_3500", |b| {
        b.iter(|| wagner_fischer(query.codes(), target.codes()))
    });
    for k in [20u32, 60] {
        g.bench_with_input(BenchmarkId::new("banded_3500", k), &k, |b, &k| {
            b.iter(|| ukkonen_cleartext(query.codes(), target.codes(), Threshold(k)))
        });
    }
    g.finish();
}

fn base_ot(c: &mut Criterion) {
    let mut g = c.benchmark_group("base_ot");
    g.sample_size(10);
    for phi in [1024u32, 2048] {
        let params = GroupParams::modp(phi).unwrap();
        let kdf = KeyDerivation::new([7; 16]);
        let mut rng = ChaCha20Rng::seed_from_u64(phi as u64);
        let pairs = random_seed_pairs(1, 16, &mut rng);
        g.bench_with_input(BenchmarkId::from_parameter(phi), &params, |b, params| {
            b.iter(|| {
                let sender = BaseOtSender::new(params, &mut rng);
                let receiver =
                    BaseOtReceiver::new(params, &kdf, 0, sender.public_key(), true, &mut rng).unwrap();
                let (e0, e1) = sender
                    .encrypt(&kdf, 0, receiver.message(), &pairs[0][0], &pairs[0][1])
                    .unwrap();
                receiver.decrypt(&e0, &e1).unwrap()
            })
        });
    }
    g.finish();
}

fn session(c: &mut Criterion) {
    let mut g = c.benchmark_group("session");
    g.sample_size(10);
    for (count, length, k) in [(1usize, 1000usize, 20u32), (5, 3500, 60)] {
        let (query, db) = workload(count, length, 0.02, 3);
        let config = SessionConfig { k, ..SessionConfig::default() };
        let comparisons: u64 = run_loopback(&query, &db, &config).unwrap().1.comparisons;
        g.throughput(Throughput::Elements(comparisons));
        g.bench_function(format!("{count}x{length}_k{k}"), |b| {
            b.iter(|| run_loopback(&query, &db, &config).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, cleartext, base_ot, session);
criterion_main!(benches);

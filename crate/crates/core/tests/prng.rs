use farmsim::prng::{McwState, DEFAULT_W, DEFAULT_Z};

// Independent straight-line transcription of the two MWC recurrences,
// kept deliberately separate from the library implementation.
fn reference_stream(mut z: u32, mut w: u32, n: usize) -> Vec<u32> {
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let z64 = 36969u64 * u64::from(z & 65535) + u64::from(z >> 16);
        let w64 = 18000u64 * u64::from(w & 65535) + u64::from(w >> 16);
        z = (z64 & 0xffff_ffff) as u32;
        w = (w64 & 0xffff_ffff) as u32;
        out.push((((u64::from(z) << 16) + u64::from(w)) & 0xffff_ffff) as u32);
    }
    out
}

// Frozen from the reference transcription above (cross-checked with an
// arbitrary-precision evaluation).
const FIRST: u32 = 820_856_226;
const TEN_THOUSANDTH: u32 = 96_566_807;

#[test]
fn golden_vectors_from_default_seed() {
    let reference = reference_stream(DEFAULT_Z, DEFAULT_W, 10_000);
    assert_eq!(reference[0], FIRST);
    assert_eq!(reference[9_999], TEN_THOUSANDTH);

    let mut rng = McwState::seed(DEFAULT_Z, DEFAULT_W).unwrap();
    let ours: Vec<u32> = (0..10_000).map(|_| rng.next_u32()).collect();
    assert_eq!(ours, reference);
}

#[test]
fn matches_reference_for_other_seeds() {
    for (z, w) in [(1, 1), (0xdead_beef, 0x1234_5678), (u32::MAX, u32::MAX)] {
        let mut rng = McwState::seed(z, w).unwrap();
        let ours: Vec<u32> = (0..1000).map(|_| rng.next_u32()).collect();
        assert_eq!(ours, reference_stream(z, w, 1000), "seed ({z}, {w})");
    }
}

#[test]
fn independent_generators_agree() {
    for seed in [(DEFAULT_Z, DEFAULT_W), (7, 11), (123_456, 654_321)] {
        let mut a = McwState::seed(seed.0, seed.1).unwrap();
        let mut b = McwState::seed(seed.0, seed.1).unwrap();
        for _ in 0..100_000 {
            assert_eq!(a.next_u32(), b.next_u32());
        }
    }
}

#[test]
fn unit_stream_mean_and_range() {
    let mut rng = McwState::default();
    let n = 1_000_000;
    let mut sum = 0.0;
    for _ in 0..n {
        let u = rng.next_unit();
        assert!((0.0..1.0).contains(&u));
        sum += u;
    }
    let mean = sum / n as f64;
    assert!((mean - 0.5).abs() <= 0.01, "mean {mean}");
}

use layerwise::hilbert::{self, CellCoord, HilbertIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn adjacent(a: &[u64], b: &[u64]) -> bool {
    let diffs: Vec<u64> = a.iter().zip(b).map(|(x, y)| x.abs_diff(*y)).collect();
    diffs.iter().filter(|&&d| d != 0).count() == 1 && diffs.iter().all(|&d| d <= 1)
}

#[test]
fn random_indices_round_trip_and_step_to_neighbours() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (d, k) in [(4usize, 8u32), (5, 12), (8, 8), (16, 4), (2, 32), (4, 16)] {
        let max = HilbertIndex::max_value(d, k);
        for _ in 0..2000 {
            let v = rng.gen_range(0..max);
            let a = hilbert::decode(&HilbertIndex::new(v, d, k).unwrap()).unwrap();
            let b = hilbert::decode(&HilbertIndex::new(v + 1, d, k).unwrap()).unwrap();
            assert_eq!(hilbert::encode(&a).unwrap().value(), v);
            assert!(adjacent(a.coords(), b.coords()), "d {d} k {k} v {v}: {a:?} -> {b:?}");
        }
    }
}

#[test]
fn full_width_indices() {
    for (d, k) in [(1usize, 64u32), (64, 1), (2, 32), (8, 8)] {
        let max = HilbertIndex::max_value(d, k);
        assert_eq!(max, u64::MAX);
        for v in [0, 1, max / 2, max - 1, max] {
            let cell = hilbert::decode(&HilbertIndex::new(v, d, k).unwrap()).unwrap();
            assert_eq!(hilbert::encode(&cell).unwrap().value(), v);
        }
    }
    assert!(CellCoord::new(33, vec![0, 0]).and_then(|c| hilbert::encode(&c)).is_err());
}

#[test]
fn curve_starts_at_origin_and_ends_on_an_adjacent_corner() {
    for d in 1..=6usize {
        for k in 1..=5u32 {
            let first = hilbert::decode(&HilbertIndex::new(0, d, k).unwrap()).unwrap();
            assert!(first.coords().iter().all(|&c| c == 0));
            let last = hilbert::decode(&HilbertIndex::new(HilbertIndex::max_value(d, k), d, k).unwrap()).unwrap();
            let top = (1u64 << k) - 1;
            let at_top = last.coords().iter().filter(|&&c| c == top).count();
            assert_eq!(at_top, 1, "d {d} k {k}: {last:?}");
            assert_eq!(last.coords().iter().filter(|&&c| c == 0).count(), d - 1);
        }
    }
}

use foldscan_core::grid::{chamfer_distance, BinaryGrid, ChamferWeights};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn euclidean_oracle(b: &BinaryGrid) -> Vec<f64> {
    let [nx, ny, _] = b.dims();
    let coords = |i: usize| [(i % nx) as f64, (i / nx % ny) as f64, (i / (nx * ny)) as f64];
    let objects: Vec<[f64; 3]> = (0..b.len()).filter(|&i| b.data()[i] != 0).map(coords).collect();
    (0..b.len())
        .map(|i| {
            let p = coords(i);
            objects
                .iter()
                .map(|q| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt())
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

fn random_object(rng: &mut ChaCha8Rng, n: usize, points: usize) -> BinaryGrid {
    let mut b = BinaryGrid::new([n, n, n], [1.0; 3]).unwrap();
    for _ in 0..points {
        b.set(rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n), 1);
    }
    b
}

#[test]
fn chamfer_is_within_fifteen_percent_of_euclidean() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let points = rng.gen_range(1..=12);
        let b = random_object(&mut rng, 16, points);
        let d = chamfer_distance(&b, ChamferWeights::default(), |v| v != 0).unwrap();
        for (c, e) in d.data().iter().zip(euclidean_oracle(&b)) {
            if e == 0.0 {
                assert_eq!(*c, 0.0);
            } else {
                worst = worst.max((*c as f64 - e).abs() / e);
            }
        }
    }
    assert!(worst <= 0.15, "worst relative error {worst}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// Face neighbours differ by at most one voxel step.
    #[test]
    fn face_neighbours_differ_by_at_most_one_step(seed in any::<u64>(), points in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = random_object(&mut rng, 10, points);
        let d = chamfer_distance(&b, ChamferWeights::default(), |v| v != 0).unwrap();
        for z in 0..10 {
            for y in 0..10 {
                for x in 0..9 {
                    prop_assert!((d.get(x, y, z) - d.get(x + 1, y, z)).abs() <= 1.0 + 1e-5);
                }
            }
        }
    }
}

use std::collections::BTreeMap;

use foldscan_core::grid::connected_components;
use foldscan_core::preprocess::learn_mask;
use foldscan_core::synth::*;
use foldscan_core::{BinaryGrid, LabelGrid};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn label_counts(g: &LabelGrid) -> BTreeMap<u32, usize> {
    let mut m = BTreeMap::new();
    for &v in g.data() {
        if v != 0 {
            *m.entry(v).or_insert(0) += 1;
        }
    }
    m
}

#[test]
fn generation_is_deterministic_and_truth_consistent() {
    let p = GeneratorParams::default();
    for seed in 0..8 {
        let a = generate_subject(&p, seed).unwrap();
        assert_eq!(a, generate_subject(&p, seed).unwrap());
        let counts = label_counts(&a.skeleton);
        assert_eq!(counts, a.truth.ss_sizes);
        // Labels are contiguous from 1.
        assert_eq!(counts.keys().copied().collect::<Vec<_>>(), (1..=counts.len() as u32).collect::<Vec<_>>());
        assert!(!a.truth.interrupted && a.truth.gap_box.is_none());
    }
    assert_ne!(generate_subject(&p, 1).unwrap().skeleton, generate_subject(&p, 2).unwrap().skeleton);
}

#[test]
fn interruption_splits_the_main_ribbon() {
    let p = GeneratorParams { interruption_prob: 1.0, ..Default::default() };
    for seed in 0..10 {
        let s = generate_subject(&p, seed).unwrap();
        assert!(s.truth.interrupted);
        let gap = s.truth.gap_box.unwrap();
        let main = BinaryGrid::from_vec(
            s.skeleton.dims(),
            s.skeleton.voxel_size(),
            s.skeleton.data().iter().map(|v| u8::from(MAIN_LABELS.contains(v))).collect(),
        )
        .unwrap();
        let (comp, n) = connected_components(&main);
        assert!(n >= 2, "seed {seed}: {n} components");
        // Chebyshev distance between the two largest components.
        let mut pts: Vec<Vec<[usize; 3]>> = vec![Vec::new(); n + 1];
        for (i, &c) in comp.data().iter().enumerate() {
            if c != 0 {
                pts[c as usize].push(comp.coords(i));
            }
        }
        let mut min_sep = usize::MAX;
        for a in &pts[1] {
            for b in pts[2..].iter().flatten() {
                let d = (0..3).map(|k| a[k].abs_diff(b[k])).max().unwrap();
                min_sep = min_sep.min(d);
            }
        }
        assert!(min_sep >= p.gap_voxels, "seed {seed}: separation {min_sep}");
        // The gap region holds no main-ribbon voxels away from its 2-voxel rim.
        let inner = foldscan_core::BoundingBox::new(
            [gap.min[0] + 2, gap.min[1] + 2, gap.min[2] + 2],
            [gap.max[0] - 2, gap.max[1] - 2, gap.max[2] - 2],
        )
        .unwrap();
        for (i, &v) in main.data().iter().enumerate() {
            if v != 0 {
                assert!(!inner.contains(main.coords(i)));
            }
        }
    }
}

#[test]
fn branch_count_and_sizes_follow_parameters() {
    let p = GeneratorParams { branch_count_range: [3, 3], ..Default::default() };
    for seed in 0..10 {
        let s = generate_subject(&p, seed).unwrap();
        let branches = s.truth.labels_with_role(SurfaceRole::Branch);
        assert_eq!(branches.len(), 3, "seed {seed}");
        for l in branches {
            let n = s.truth.ss_sizes[&l];
            assert!(n >= p.branch_size_range[0] && n <= p.branch_size_range[1], "seed {seed}: size {n}");
        }
    }
}

#[test]
fn small_surfaces_dominate_the_size_histogram() {
    let p = GeneratorParams::default();
    let cohort = generate_cohort(&p, 4, 60).unwrap();
    let all: Vec<usize> = cohort.iter().flat_map(|s| s.truth.ss_sizes.values().copied()).collect();
    let mean_skeleton = cohort.iter().map(|s| s.skeleton.count_nonzero()).sum::<usize>() as f64 / 60.0;
    // The reference small/large boundary (500 of 3500 voxels) rescaled to this cohort.
    let boundary = 500.0 * mean_skeleton / 3500.0;
    let small = all.iter().filter(|&&n| (n as f64) < boundary).count();
    assert!(small > all.len() - small, "small {small} of {}", all.len());
}

#[test]
fn left_parameters_shift_knob_frequency() {
    let left = generate_cohort(&GeneratorParams::left_default(), 5, 300).unwrap();
    let right = generate_cohort(&GeneratorParams::default(), 5, 300).unwrap();
    let freq = |c: &[SyntheticSubject]| c.iter().filter(|s| s.truth.knob_count == 2).count() as f64 / c.len() as f64;
    assert!((freq(&left) - 0.35).abs() < 0.08, "{}", freq(&left));
    assert!((freq(&right) - 0.10).abs() < 0.05, "{}", freq(&right));
    assert!(left.iter().all(|s| s.truth.hemisphere == Hemisphere::Left));
}

fn mask_for(cohort: &[SyntheticSubject]) -> foldscan_core::preprocess::RegionMask {
    learn_mask(cohort.iter().map(|s| &s.skeleton), &MAIN_LABELS, 3.0, 2).unwrap()
}

#[test]
fn delete_ss_erases_exactly_one_label() {
    let cohort = generate_cohort(&GeneratorParams::default(), 6, 20).unwrap();
    let mask = mask_for(&cohort);
    let band = SizeBand::new(1, None).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for s in &cohort {
        let before = label_counts(&s.skeleton);
        let del = delete_ss(&s.skeleton, &mask, &band, &mut rng).unwrap().unwrap();
        let after = label_counts(&del.skeleton);
        assert!(!after.contains_key(&del.erased_label));
        assert_eq!(del.erased_voxels, before[&del.erased_label]);
        assert_eq!(del.skeleton.count_nonzero() + del.erased_voxels, s.skeleton.count_nonzero());
        for (i, (&a, &b)) in s.skeleton.data().iter().zip(del.skeleton.data()).enumerate() {
            assert!(b == a || (b == 0 && a == del.erased_label), "voxel {i}");
        }
    }
}

#[test]
fn delete_ss_reports_ineligible_subjects() {
    let s = generate_subject(&GeneratorParams::default(), 3).unwrap();
    let mask = mask_for(std::slice::from_ref(&s));
    let band = SizeBand::new(1_000_000, None).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    assert!(delete_ss(&s.skeleton, &mask, &band, &mut rng).unwrap().is_none());
}

#[test]
fn single_candidate_is_erased_in_full() {
    // One surface of 300 voxels inside the mask, plus a small one.
    let mut g = LabelGrid::new([20, 20, 20], [1.0; 3]).unwrap();
    let mut placed = 0;
    'outer: for z in 1..19 {
        for y in 1..19 {
            if placed == 300 {
                break 'outer;
            }
            g.set(5, y, z, 1);
            placed += 1;
        }
    }
    for y in 2..12 {
        g.set(12, y, 10, 2);
    }
    let mask = learn_mask([&g], &[1, 2], 2.0, 1).unwrap();
    let band = SizeBand::new(200, Some(500)).unwrap();
    let del = delete_ss(&g, &mask, &band, &mut ChaCha8Rng::seed_from_u64(0)).unwrap().unwrap();
    assert_eq!(del.erased_label, 1);
    assert_eq!(placed, 300);
    assert_eq!(del.skeleton.count_nonzero(), g.count_nonzero() - 300);
}

#[test]
fn two_candidates_are_chosen_evenly() {
    let mut g = LabelGrid::new([20, 20, 20], [1.0; 3]).unwrap();
    for z in 2..12 {
        for y in 2..12 {
            g.set(5, y, z, 1);
            g.set(12, y, z, 2);
        }
    }
    let mask = learn_mask([&g], &[1, 2], 2.0, 1).unwrap();
    let band = SizeBand::new(50, Some(200)).unwrap();
    let first = (0..100u64)
        .filter(|&seed| {
            let del = delete_ss(&g, &mask, &band, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap().unwrap();
            del.erased_label == 1
        })
        .count();
    assert!((first as f64 / 100.0 - 0.5).abs() <= 0.15, "{first}");
}

#[test]
fn deletion_benchmark_splits_eligible_subjects_in_half() {
    let cohort = generate_cohort(&GeneratorParams::default(), 7, 180).unwrap();
    let mask = mask_for(&cohort);
    let named: Vec<(String, &LabelGrid)> = cohort.iter().enumerate().map(|(i, s)| (format!("s{i:03}"), &s.skeleton)).collect();
    let band = SizeBand::new(1, None).unwrap();
    let set = build_deletion_benchmark(&named, &mask, &band, &mut ChaCha8Rng::seed_from_u64(2), 0.5).unwrap();
    assert_eq!((set.controls.len(), set.altered.len()), (90, 90));
    let again = build_deletion_benchmark(&named, &mask, &band, &mut ChaCha8Rng::seed_from_u64(2), 0.5).unwrap();
    assert_eq!(set, again);
    for m in &set.controls {
        assert!(!deletion_candidates(named[m.source].1, &mask, &band).is_empty());
        assert!(set.altered.iter().all(|a| a.source != m.source));
    }
    for m in &set.altered {
        let altered = BenchmarkSet::materialize(m, named[m.source].1);
        assert!(altered.count_nonzero() < named[m.source].1.count_nonzero());
    }
    let none = SizeBand::new(1_000_000, None).unwrap();
    assert!(build_deletion_benchmark(&named, &mask, &none, &mut ChaCha8Rng::seed_from_u64(2), 0.5).is_err());
}

#[test]
fn asymmetry_benchmark_is_reproducible() {
    let right = GeneratorParams { dims: [32, 32, 40], surface_x: 8, ..Default::default() };
    let left = GeneratorParams { dims: [32, 32, 40], surface_x: 8, ..GeneratorParams::left_default() };
    let a = build_asymmetry_benchmark(&right, &left, 6, 3).unwrap();
    let b = build_asymmetry_benchmark(&right, &left, 6, 3).unwrap();
    assert_eq!(a.set, b.set);
    assert_eq!((a.set.controls.len(), a.set.altered.len()), (6, 6));
    assert!(a.left.iter().all(|s| s.truth.hemisphere == Hemisphere::Left));
    // Mirroring a left subject twice returns it unchanged.
    let flipped = foldscan_core::grid::flip_lr(&foldscan_core::grid::flip_lr(&a.left[0].skeleton));
    assert_eq!(flipped, a.left[0].skeleton);
}

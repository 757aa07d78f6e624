//! Synthetic fold skeletons with ground truth, and the deletion, asymmetry
//! and interruption benchmarks derived from them.

mod benchmark;
mod generator;

pub use benchmark::{
    asymmetry_cohort_seeds, asymmetry_set, build_asymmetry_benchmark, build_deletion_benchmark, delete_ss, deletion_candidates, erase_label,
    in_mask_sizes, in_mask_skeleton_voxels, Alteration, AsymmetryBenchmark, BenchmarkMember, BenchmarkSet,
    Deletion, SizeBand, REFERENCE_BANDS, REFERENCE_SKELETON_VOXELS,
};
pub use generator::{
    generate_cohort, generate_subject, subject_seed, GeneratorParams, Hemisphere, Range, SubjectTruth,
    SurfaceRole, SyntheticSubject, MAIN_LABELS,
};

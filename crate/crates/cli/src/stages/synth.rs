use foldscan_core::grid::save_volume;
use foldscan_core::synth::{asymmetry_cohort_seeds, asymmetry_set, generate_subject, subject_seed, GeneratorParams};

use super::Context;
use crate::artifacts::{Cohort, CohortManifest, Split, SubjectEntry};
use crate::config::streams;
use crate::error::Result;
use crate::workdir::{create_dir, write_json};

/// Generates every cohort, writing one skeleton at a time.
pub fn run(ctx: &mut Context<'_>) -> Result<()> {
    let c = ctx.config;
    let s = &c.split;
    let split_of = |i: usize| {
        if i < s.train {
            Split::Train
        } else if i < s.train + s.val {
            Split::Val
        } else if i < s.train + s.val + s.test {
            Split::Test
        } else {
            Split::Unused
        }
    };
    let asym = asymmetry_set(c.benchmark.asymmetry.n);
    let (right_seed, left_seed) = asymmetry_cohort_seeds(c.stream_seed(streams::ASYMMETRY));
    let plans: [(Cohort, GeneratorParams, u64, Vec<String>); 4] = [
        (
            Cohort::Control,
            c.generator.clone(),
            c.stream_seed(streams::COHORT),
            (0..s.cohort_size).map(|i| format!("s{i:04}")).collect(),
        ),
        (Cohort::Right, c.generator.clone(), right_seed, asym.controls.iter().map(|m| m.id.clone()).collect()),
        (Cohort::Left, c.left_generator(), left_seed, asym.altered.iter().map(|m| m.id.clone()).collect()),
        (
            Cohort::Interrupted,
            c.interrupted_generator(),
            c.stream_seed(streams::INTERRUPTED),
            (0..c.benchmark.interrupted_n).map(|i| format!("int{i:04}")).collect(),
        ),
    ];

    let mut subjects = Vec::new();
    for (cohort, params, cohort_seed, ids) in plans {
        let dir = format!("synth/{}", cohort.name());
        create_dir(&ctx.wd.root().join(&dir))?;
        for (i, id) in ids.into_iter().enumerate() {
            let seed = subject_seed(cohort_seed, i as u64);
            let subject = generate_subject(&params, seed)?;
            let rel = format!("{dir}/{id}.fvol");
            save_volume(subject.skeleton, ctx.wd.root().join(&rel))?;
            subjects.push(SubjectEntry {
                id,
                cohort,
                split: (cohort == Cohort::Control).then(|| split_of(i)),
                seed,
                skeleton: rel,
                truth: subject.truth,
            });
        }
        ctx.log(&format!("synth: {} cohort written", cohort.name()));
    }
    write_json(&ctx.wd.root().join(CohortManifest::FILE), &CohortManifest { subjects })
}

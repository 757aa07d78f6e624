use std::collections::BTreeMap;
use std::fmt::Write as _;

use foldscan_core::vae::GridEntry;

use super::detect::{DetectionSummary, SUMMARY as DETECT_SUMMARY};
use super::explore::{ExploreSummary, SUMMARY as EXPLORE_SUMMARY};
use super::train::{TrainSummary, SUMMARY as TRAIN_SUMMARY};
use super::{config_hash, Context};
use crate::error::Result;
use crate::workdir::{list_files, read_json, sha256_file, write_json, write_text, Stage, LOCK};

pub const REPORT: &str = "report/report.md";

fn p(x: f64) -> String {
    format!("{x:.3e}")
}

/// Aggregates the stage summaries into a markdown report and records the
/// hash of every artifact in the work directory.
pub fn run(ctx: &mut Context<'_>) -> Result<()> {
    let c = ctx.config;
    let root = ctx.wd.root().to_path_buf();
    let detect: DetectionSummary = read_json(&root.join(DETECT_SUMMARY))?;
    let mut md = String::new();
    let _ = writeln!(md, "# Fold outlier report: region `{}`\n", c.region.name);
    let _ = writeln!(md, "- seed: {}", c.seed);
    let _ = writeln!(md, "- config sha256: `{}`", config_hash(c));
    let _ = writeln!(
        md,
        "- model: beta {}, latent size {}, channels {:?}, crops {:?}",
        c.model.beta, c.model.latent_dim, c.model.channels, c.model.input_dims
    );
    if ctx.wd.is_complete(Stage::Train) {
        let t: TrainSummary = read_json(&root.join(TRAIN_SUMMARY))?;
        if let Some(last) = t.last {
            let val = last.val.map_or("n/a".to_string(), |v| format!("{:.3}", v.total));
            let _ = writeln!(
                md,
                "- training: {} epochs on {} subjects, final loss {:.3} (val {val})",
                t.epochs, t.n_train, last.train.total
            );
        }
    }

    let _ = writeln!(md, "\n## Benchmarks\n");
    let _ = writeln!(
        md,
        "| benchmark | controls | altered | latent AUC | KS D | KS p | MWU p | mean error (controls / altered) |"
    );
    let _ = writeln!(md, "|---|---:|---:|---:|---:|---:|---:|---:|");
    for s in &detect.sets {
        let _ = writeln!(
            md,
            "| {} | {} | {} | {:.3} | {:.3} | {} | {} | {:.2} / {:.2} |",
            s.name,
            s.n_controls,
            s.n_altered,
            s.auc,
            s.ks.statistic,
            p(s.ks.p_value),
            p(s.mwu.p_value),
            s.mean_error_controls,
            s.mean_error_altered
        );
    }
    if let Some(g) = detect.set("interrupted").and_then(|s| s.gap_filling.as_ref()) {
        let _ = writeln!(
            md,
            "\nGap filling: {} of {} interrupted subjects put at least {:.0}% of their additions mass in the gap.",
            g.filled,
            g.fractions.len(),
            100.0 * g.threshold
        );
    }

    let o = &detect.outliers;
    let _ = writeln!(md, "\n## One-class detection\n");
    let _ = writeln!(
        md,
        "- projection variance explained: {:.3} / {:.3}",
        o.pca_explained[0], o.pca_explained[1]
    );
    let _ = writeln!(
        md,
        "- one-class SVM flags {} controls and {} rare subjects",
        o.ocsvm_flagged_controls.len(),
        o.ocsvm_flagged_rare.len()
    );
    let _ = writeln!(
        md,
        "- isolation forest flag rate: rare {:.3}, controls {:.3}",
        o.forest_rare_rate, o.forest_control_rate
    );
    let top: Vec<String> = o
        .repeated_controls
        .iter()
        .take(5)
        .map(|f| format!("{} ({:.2})", f.id, f.frequency))
        .collect();
    let _ = writeln!(md, "- controls most often flagged: {}", if top.is_empty() { "none".into() } else { top.join(", ") });

    if ctx.wd.is_complete(Stage::Explore) {
        let e: ExploreSummary = read_json(&root.join(EXPLORE_SUMMARY))?;
        let _ = writeln!(md, "\n## Latent traversal\n");
        let _ = writeln!(
            md,
            "Dimension {} (largest asymmetry weight), from {:.3} to {:.3}: endpoint decodes differ in {:.2}% of the mask.",
            e.dim,
            e.v_min,
            e.v_max,
            100.0 * e.endpoint_change
        );
    }
    if ctx.wd.is_complete(Stage::Gridsearch) {
        let table: Vec<GridEntry> = read_json(&root.join("gridsearch/table.json"))?;
        let _ = writeln!(md, "\n## Grid search\n");
        let _ = writeln!(md, "| beta | latent size | val recon | AUC | recon gate |");
        let _ = writeln!(md, "|---:|---:|---:|---:|---|");
        for e in &table {
            let _ = writeln!(
                md,
                "| {} | {} | {:.2} | {:.3} | {} |",
                e.beta,
                e.latent_dim,
                e.val_recon,
                e.auc,
                if e.passes_gate { "pass" } else { "fail" }
            );
        }
    }

    let mut hashes = BTreeMap::new();
    for rel in list_files(&root)? {
        let first = rel.components().next().map(|c| c.as_os_str().to_string_lossy().into_owned());
        if rel.as_os_str() == LOCK || first.as_deref() == Some(Stage::Report.name()) {
            continue;
        }
        let key = rel.to_string_lossy().replace('\\', "/");
        hashes.insert(key, sha256_file(&root.join(&rel))?);
    }
    let _ = writeln!(md, "\n## Artifacts\n");
    let _ = writeln!(md, "{} files hashed; the full list is in `report/hashes.json`.\n", hashes.len());
    let _ = writeln!(md, "| artifact | sha256 |");
    let _ = writeln!(md, "|---|---|");
    for (path, h) in hashes.iter().filter(|(k, _)| !k.contains("/crops/") && !k.starts_with("synth/") && !k.contains("/residuals/") && !k.ends_with(".pgm")) {
        let _ = writeln!(md, "| {path} | `{h}` |");
    }
    write_json(&root.join("report/hashes.json"), &hashes)?;
    write_text(&root.join(REPORT), &md)?;
    ctx.log(&format!("report: {} artifacts hashed", hashes.len()));
    Ok(())
}

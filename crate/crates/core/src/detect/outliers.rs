use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Control,
    Benchmark,
    Rare,
}

/// One encoded and reconstructed subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSample {
    pub id: String,
    pub group: Group,
    pub mu: Vec<f64>,
    pub recon_error: f64,
    pub scores: BTreeMap<String, f64>,
}

/// How often a subject was flagged across repeats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierFrequency {
    pub id: String,
    pub frequency: f64,
}

/// Rank subjects by the fraction of repeats that flagged them (descending,
/// ties by id). `flags[r][i]` is repeat `r`'s verdict on `ids[i]`.
pub fn repeated_outlier_controls(ids: &[String], flags: &[Vec<bool>]) -> Result<Vec<OutlierFrequency>> {
    if flags.len() < 2 {
        return Err(Error::InsufficientData(format!("need at least 2 repeats, got {}", flags.len())));
    }
    if let Some(bad) = flags.iter().find(|f| f.len() != ids.len()) {
        return Err(Error::LengthMismatch { expected: ids.len(), found: bad.len() });
    }
    let r = flags.len() as f64;
    let mut out: Vec<OutlierFrequency> = ids
        .iter()
        .enumerate()
        .map(|(i, id)| OutlierFrequency {
            id: id.clone(),
            frequency: flags.iter().filter(|f| f[i]).count() as f64 / r,
        })
        .collect();
    out.sort_by(|a, b| b.frequency.total_cmp(&a.frequency).then_with(|| a.id.cmp(&b.id)));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("s{i:02}")).collect()
    }

    #[test]
    fn always_flagged_ranks_first() {
        let flags = vec![vec![false, true, false], vec![true, true, false], vec![false, true, false]];
        let r = repeated_outlier_controls(&ids(3), &flags).unwrap();
        assert_eq!(r[0], OutlierFrequency { id: "s01".into(), frequency: 1.0 });
        assert_eq!(r[2], OutlierFrequency { id: "s02".into(), frequency: 0.0 });
    }

    #[test]
    fn repeat_order_is_irrelevant() {
        let flags = vec![vec![true, false, true, false], vec![false, false, true, true]];
        let mut rev = flags.clone();
        rev.reverse();
        assert_eq!(
            repeated_outlier_controls(&ids(4), &flags).unwrap(),
            repeated_outlier_controls(&ids(4), &rev).unwrap()
        );
    }

    #[test]
    fn ties_break_by_id_and_errors() {
        let flags = vec![vec![true, true], vec![false, false]];
        let r = repeated_outlier_controls(&ids(2), &flags).unwrap();
        assert_eq!(r[0].id, "s00");
        assert!(repeated_outlier_controls(&ids(2), &flags[..1]).is_err());
        assert!(repeated_outlier_controls(&ids(3), &flags).is_err());
    }
}

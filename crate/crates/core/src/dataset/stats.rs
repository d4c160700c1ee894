use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::CorrespondenceSample;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ConditionStats {
    pub image_pair_count: usize,
    pub mean_correspondences: f64,
}

/// Per-condition image pair counts and mean correspondences per pair.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DatasetStats {
    pub by_condition: BTreeMap<String, ConditionStats>,
}

impl DatasetStats {
    pub fn is_empty(&self) -> bool {
        self.by_condition.is_empty()
    }

    /// `condition\tpairs\tmean_n` table, conditions sorted, mean to one decimal.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("condition\tpairs\tmean_n\n");
        for (tag, s) in &self.by_condition {
            let _ = writeln!(out, "{tag}\t{}\t{:.1}", s.image_pair_count, s.mean_correspondences);
        }
        out
    }
}

pub fn compute_statistics<'a>(samples: impl IntoIterator<Item = &'a CorrespondenceSample>) -> DatasetStats {
    // integer sums keep the result independent of sample order
    let mut acc: BTreeMap<String, (usize, u64)> = BTreeMap::new();
    for s in samples {
        let e = acc.entry(s.condition_tag().to_string()).or_default();
        e.0 += 1;
        e.1 += s.len() as u64;
    }
    DatasetStats {
        by_condition: acc
            .into_iter()
            .map(|(tag, (count, total))| {
                (
                    tag,
                    ConditionStats {
                        image_pair_count: count,
                        mean_correspondences: total as f64 / count as f64,
                    },
                )
            })
            .collect(),
    }
}

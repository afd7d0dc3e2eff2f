//! Bundled subgroup dataset: stroke or systemic embolism events for a pooled
//! comparison of new oral anticoagulants (arm A) against warfarin (arm B),
//! broken down into 18 subgroups over 8 grouping factors.
//!
//! Subgroups that share a grouping factor do not share patients, so their
//! p-values are independent; subgroups from different factors overlap.
//!
//! Two files ship under `data/` in the `StudyRecord` CSV layout: the event
//! counts, and the published two-sided p-values (three significant figures).

use crate::combiners::CountTable2x2;
use crate::error::Result;
use crate::io::{read_study_records, StudyRecord};
use crate::numerics::ProbValue;
use crate::partial_conjunction::GroupPartition;

pub const DATASET_VERSION: &str = "1";

pub const COUNTS_CSV: &str = include_str!("../data/subgroups_counts.csv");
pub const PVALUES_CSV: &str = include_str!("../data/subgroups_pvalues.csv");

/// One subgroup with its counts and published p-value.
#[derive(Clone, Debug, PartialEq)]
pub struct Subgroup {
    pub study_id: String,
    pub group_factor: String,
    pub counts: CountTable2x2,
    pub reported_p: f64,
}

/// Count records as shipped.
pub fn count_records() -> Result<Vec<StudyRecord>> {
    read_study_records(COUNTS_CSV.as_bytes())
}

/// Published p-value records as shipped.
pub fn pvalue_records() -> Result<Vec<StudyRecord>> {
    read_study_records(PVALUES_CSV.as_bytes())
}

/// All 18 subgroups in table order.
pub fn subgroups() -> Result<Vec<Subgroup>> {
    let counts = count_records()?;
    let pvalues = pvalue_records()?;
    counts
        .into_iter()
        .zip(pvalues)
        .map(|(c, p)| {
            debug_assert_eq!(c.study_id, p.study_id);
            Ok(Subgroup {
                counts: c.counts()?.expect("count rows carry counts"),
                reported_p: p.p.expect("p-value rows carry p"),
                study_id: c.study_id,
                group_factor: c.group_factor.unwrap_or_default(),
            })
        })
        .collect()
}

/// Published p-values as [`ProbValue`]s.
pub fn reported_pvalues() -> Result<Vec<ProbValue>> {
    subgroups()?.iter().map(|s| ProbValue::new(s.reported_p)).collect()
}

/// The 8 grouping-factor blocks.
pub fn grouping_factors() -> Result<GroupPartition> {
    let labels: Vec<String> = subgroups()?.into_iter().map(|s| s.group_factor).collect();
    GroupPartition::from_labels(&labels)
}

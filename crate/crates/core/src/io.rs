//! Study input records and output rows.
//!
//! Input CSV columns (headers required, extra columns ignored):
//!
//! | column | meaning |
//! |---|---|
//! | `study_id` | identifier |
//! | `group_factor` | optional independence-block label |
//! | `p` | study p-value |
//! | `events_a`, `total_a`, `events_b`, `total_b` | 2x2 counts |
//! | `n_sample` | optional sample size (Stouffer weights) |
//! | `sigma` | optional known sd, default 1 |
//!
//! Each row carries either `p` or all four counts, never both. Group labels
//! are all-or-nothing across rows.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::combiners::{fisher_exact_2x2, CountTable2x2};
use crate::error::{Error, Result};
use crate::numerics::ProbValue;
use crate::partial_conjunction::{GroupPartition, PcCurve};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyRecord {
    pub study_id: String,
    #[serde(default, deserialize_with = "empty_as_none")]
    pub group_factor: Option<String>,
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default)]
    pub events_a: Option<u64>,
    #[serde(default)]
    pub total_a: Option<u64>,
    #[serde(default)]
    pub events_b: Option<u64>,
    #[serde(default)]
    pub total_b: Option<u64>,
    #[serde(default)]
    pub n_sample: Option<u64>,
    #[serde(default)]
    pub sigma: Option<f64>,
}

fn empty_as_none<'de, D>(d: D) -> std::result::Result<Option<String>, D::Error>
where
    D: serde::Deserializer<'de>,
{
    let s: Option<String> = Option::deserialize(d)?;
    Ok(s.filter(|s| !s.trim().is_empty()))
}

impl StudyRecord {
    /// The 2x2 table, if this row carries counts.
    pub fn counts(&self) -> Result<Option<CountTable2x2>> {
        match (self.events_a, self.total_a, self.events_b, self.total_b) {
            (None, None, None, None) => Ok(None),
            (Some(ea), Some(ta), Some(eb), Some(tb)) => CountTable2x2::new(ea, ta, eb, tb).map(Some),
            _ => Err(Error::invalid(format!("study {}: incomplete count columns", self.study_id))),
        }
    }

    fn validate(&self) -> Result<()> {
        let counts = self.counts()?;
        match (self.p, counts) {
            (Some(_), Some(_)) => {
                Err(Error::invalid(format!("study {}: both p and counts given", self.study_id)))
            }
            (None, None) => Err(Error::invalid(format!("study {}: neither p nor counts given", self.study_id))),
            (Some(p), None) => ProbValue::new(p).map(|_| ()),
            (None, Some(_)) => Ok(()),
        }?;
        if self.n_sample == Some(0) {
            return Err(Error::invalid(format!("study {}: n_sample must be positive", self.study_id)));
        }
        if let Some(s) = self.sigma {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::invalid(format!("study {}: sigma must be positive", self.study_id)));
            }
        }
        Ok(())
    }
}

/// Reads and validates study records from CSV.
pub fn read_study_records<R: Read>(reader: R) -> Result<Vec<StudyRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut records = Vec::new();
    for row in rdr.deserialize() {
        let record: StudyRecord = row?;
        record.validate()?;
        records.push(record);
    }
    if records.is_empty() {
        return Err(Error::invalid("input has no study rows"));
    }
    let labelled = records.iter().filter(|r| r.group_factor.is_some()).count();
    if labelled != 0 && labelled != records.len() {
        return Err(Error::invalid("group_factor must be present on all rows or none"));
    }
    Ok(records)
}

/// Study p-values: taken directly when every row has `p`, computed by the
/// two-sided Fisher exact test when every row has counts.
pub fn records_to_pvalues(records: &[StudyRecord]) -> Result<Vec<ProbValue>> {
    let with_p = records.iter().filter(|r| r.p.is_some()).count();
    if with_p == records.len() {
        records.iter().map(|r| ProbValue::new(r.p.unwrap_or(f64::NAN))).collect()
    } else if with_p == 0 {
        records
            .iter()
            .map(|r| {
                let table = r.counts()?.expect("validated count row");
                Ok(fisher_exact_2x2(&table)?.p_two_sided)
            })
            .collect()
    } else {
        Err(Error::invalid("rows mix p-values and counts"))
    }
}

/// Grouping blocks from the `group_factor` column.
pub fn records_to_groups(records: &[StudyRecord]) -> Result<GroupPartition> {
    let labels = records
        .iter()
        .map(|r| {
            r.group_factor
                .clone()
                .ok_or_else(|| Error::invalid(format!("study {} has no group_factor", r.study_id)))
        })
        .collect::<Result<Vec<_>>>()?;
    GroupPartition::from_labels(&labels)
}

/// Stouffer weights `sqrt(n_sample) / sigma`; every row needs `n_sample`.
pub fn records_to_weights(records: &[StudyRecord]) -> Result<Vec<f64>> {
    records
        .iter()
        .map(|r| {
            let n = r
                .n_sample
                .ok_or_else(|| Error::invalid(format!("study {} has no n_sample", r.study_id)))?;
            Ok((n as f64).sqrt() / r.sigma.unwrap_or(1.0))
        })
        .collect()
}

/// Formats with six significant digits.
pub fn fmt_sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let a = x.abs();
    if (1e-3..1e6).contains(&a) {
        let digits = 5 - a.log10().floor() as i32;
        format!("{:.*}", digits.max(0) as usize, x)
    } else {
        format!("{x:.5e}")
    }
}

/// JSON shape of an emitted PC curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcCurveReport {
    pub method: String,
    pub n: usize,
    pub entries: Vec<PcEntryReport>,
    pub alpha: f64,
    pub confidence_set: Vec<usize>,
    pub r_hat: usize,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcEntryReport {
    pub r: usize,
    pub p: f64,
    pub log_p: f64,
}

impl From<&PcCurve> for PcCurveReport {
    fn from(c: &PcCurve) -> Self {
        PcCurveReport {
            method: c.method.clone(),
            n: c.n,
            entries: c.entries.iter().map(|e| PcEntryReport { r: e.r, p: e.p.linear(), log_p: e.p.ln() }).collect(),
            alpha: c.alpha,
            confidence_set: c.confidence_set.clone(),
            r_hat: c.r_hat,
            warnings: c.warnings.clone(),
        }
    }
}

/// Writes serializable rows as CSV with a header.
pub fn write_csv_rows<W: Write, T: Serialize>(writer: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads CSV rows written by [`write_csv_rows`].
pub fn read_csv_rows<R: Read, T: serde::de::DeserializeOwned>(reader: R) -> Result<Vec<T>> {
    let mut rdr = csv::Reader::from_reader(reader);
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

//! Claim matrix over a set of result records.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentKind;
use super::record::ResultRecord;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClaimStatus {
    Pass,
    Fail,
    NotRun,
    /// The record's checksum does not match its content.
    Tampered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimRow {
    pub claim: String,
    pub experiment: ExperimentKind,
    pub status: ClaimStatus,
    /// Smallest margin over the checks backing the claim.
    pub margin: Option<f64>,
    pub detail: String,
}

/// Claims with the experiment and checks that decide them.
pub const CLAIMS: [(&str, ExperimentKind, &[&str]); 8] = [
    (
        "local states carry larger measure",
        ExperimentKind::MeasureDominance,
        &["inhomogeneous_exceeds_homogeneous", "measure_matches_formula", "reduced_ratio_below_one"],
    ),
    ("solution fluctuations scale as alpha^M", ExperimentKind::AlphaScaling, &["solution_slope"]),
    ("non-solution fluctuations scale as alpha^2", ExperimentKind::AlphaScaling, &["non_solution_slope"]),
    ("solutions dominate below the alpha threshold", ExperimentKind::AlphaScaling, &["threshold_dominance"]),
    ("correlator magnitude is invariant under time inversion", ExperimentKind::TimeSymmetry, &["magnitude_symmetry"]),
    (
        "collapse histories dominate at long horizons only",
        ExperimentKind::CollapseTiming,
        &["short_horizon_schrodinger_first", "long_horizon_collapse_first"],
    ),
    ("the correlator is not linear in its final state", ExperimentKind::Nonlinearity, &["superposition_suppressed"]),
    ("branch correlators follow the initial probabilities", ExperimentKind::BornRule, &["branch_ratio"]),
];

/// One row per claim. A claim whose experiment is absent is `NotRun`; a record whose
/// checksum does not verify makes its claims `Tampered`.
pub fn verify_claims(records: &[ResultRecord]) -> Vec<ClaimRow> {
    CLAIMS
        .iter()
        .map(|(claim, kind, checks)| {
            let row = |status, margin, detail: String| ClaimRow {
                claim: claim.to_string(),
                experiment: *kind,
                status,
                margin,
                detail,
            };
            let Some(rec) = records.iter().find(|r| r.kind == *kind) else {
                return row(ClaimStatus::NotRun, None, format!("no {kind} record"));
            };
            if !rec.is_intact() {
                return row(ClaimStatus::Tampered, None, "checksum mismatch".into());
            }
            let mut margin = f64::INFINITY;
            let mut passed = true;
            for name in checks.iter() {
                match rec.check(name) {
                    Some(c) => {
                        passed &= c.passed;
                        margin = margin.min(c.margin);
                    }
                    None => return row(ClaimStatus::NotRun, None, format!("check {name} missing from {kind} record")),
                }
            }
            let status = if passed { ClaimStatus::Pass } else { ClaimStatus::Fail };
            row(status, Some(margin), checks.join(", "))
        })
        .collect()
}

/// Loads the record stored in a run directory.
pub fn load_record(dir: &Path) -> Result<ResultRecord> {
    ResultRecord::load(dir)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::record::Check;

    fn record(kind: ExperimentKind, checks: &[(&str, bool)]) -> ResultRecord {
        let mut r = ResultRecord::new(kind, "h".into());
        for (n, ok) in checks {
            r.checks.push(Check::at_most(n, if *ok { 0.0 } else { 2.0 }, 1.0, ""));
        }
        r.seal().unwrap()
    }

    #[test]
    fn absent_tampered_and_failed_rows() {
        let recs = vec![
            record(ExperimentKind::TimeSymmetry, &[("magnitude_symmetry", true)]),
            record(ExperimentKind::Nonlinearity, &[("superposition_suppressed", false)]),
        ];
        let rows = verify_claims(&recs);
        assert_eq!(rows.len(), CLAIMS.len());
        let get = |k| rows.iter().find(|r| r.experiment == k).unwrap().status;
        assert_eq!(get(ExperimentKind::TimeSymmetry), ClaimStatus::Pass);
        assert_eq!(get(ExperimentKind::Nonlinearity), ClaimStatus::Fail);
        assert_eq!(get(ExperimentKind::BornRule), ClaimStatus::NotRun);

        let mut bad = recs.clone();
        bad[0].checks[0].measured = -5.0;
        let rows = verify_claims(&bad);
        assert_eq!(rows.iter().find(|r| r.experiment == ExperimentKind::TimeSymmetry).unwrap().status, ClaimStatus::Tampered);
        assert_eq!(verify_claims(&recs), verify_claims(&recs));
    }
}

//! Aggregation of replication records into coverage tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::experiment::{Column, ExperimentConfig, ReplicationRecord, FAILURE_FLAG_FRACTION};
use crate::inference::IntervalKind;
use crate::penalty::BicConstant;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageCell {
    pub column: Column,
    pub coef: usize,
    pub kind: IntervalKind,
    pub coverage: f64,
    pub mc_se: f64,
    pub replications: usize,
    /// Replications in which the column failed.
    pub failures: usize,
    /// Replications that produced an interval (coefficient selected, no failure).
    pub intervals: usize,
    pub mean_lo: f64,
    pub mean_hi: f64,
    pub flagged: bool,
}

/// Selection frequencies for one BIC rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionSummary {
    pub rule: BicConstant,
    pub replications: usize,
    pub equals_truth: usize,
    pub covers_truth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageTable {
    pub n: usize,
    pub p: usize,
    pub alpha: f64,
    pub replications: usize,
    pub cells: Vec<CoverageCell>,
    pub selection: Vec<SelectionSummary>,
}

/// `sqrt(c (1 - c) / R)`.
pub fn mc_standard_error(coverage: f64, replications: usize) -> f64 {
    (coverage * (1.0 - coverage) / replications as f64).sqrt()
}

impl CoverageTable {
    pub fn from_records(cfg: &ExperimentConfig, records: &[ReplicationRecord]) -> CoverageTable {
        let r = records.len();
        let mut cells = Vec::new();
        for &column in &cfg.columns {
            let failures = records.iter().filter(|rec| rec.failures.contains_key(&column)).count();
            let flagged = r > 0 && failures as f64 > FAILURE_FLAG_FRACTION * r as f64;
            for &coef in &cfg.coefs {
                for &kind in &cfg.kinds {
                    let outcomes: Vec<_> = records
                        .iter()
                        .filter_map(|rec| rec.cells.get(&(column, coef, kind)))
                        .collect();
                    let hits = outcomes.iter().filter(|o| o.covered).count();
                    let coverage = if r == 0 { f64::NAN } else { hits as f64 / r as f64 };
                    let intervals: Vec<_> = outcomes.iter().filter_map(|o| o.interval).collect();
                    let mean = |f: fn(&crate::inference::Interval) -> f64| {
                        if intervals.is_empty() {
                            f64::NAN
                        } else {
                            intervals.iter().map(f).sum::<f64>() / intervals.len() as f64
                        }
                    };
                    cells.push(CoverageCell {
                        column,
                        coef,
                        kind,
                        coverage,
                        mc_se: mc_standard_error(coverage, r),
                        replications: r,
                        failures,
                        intervals: intervals.len(),
                        mean_lo: mean(|iv| iv.lo),
                        mean_hi: mean(|iv| iv.hi),
                        flagged,
                    });
                }
            }
        }
        let mut selection = Vec::new();
        for rule in [BicConstant::One, BicConstant::LogLogP] {
            let ran: Vec<_> = records.iter().filter_map(|rec| rec.selected.get(&rule).map(|_| rec)).collect();
            if ran.is_empty() {
                continue;
            }
            selection.push(SelectionSummary {
                rule,
                replications: ran.len(),
                equals_truth: ran.iter().filter(|rec| rec.selected_equals_truth(rule) == Some(true)).count(),
                covers_truth: ran.iter().filter(|rec| rec.selected_covers_truth(rule) == Some(true)).count(),
            });
        }
        CoverageTable {
            n: cfg.dgp.n(),
            p: cfg.dgp.p(),
            alpha: cfg.alpha,
            replications: r,
            cells,
            selection,
        }
    }

    pub fn cell(&self, column: Column, coef: usize, kind: IntervalKind) -> Option<&CoverageCell> {
        self.cells
            .iter()
            .find(|c| c.column == column && c.coef == coef && c.kind == kind)
    }

    pub fn selection_summary(&self, rule: BicConstant) -> Option<&SelectionSummary> {
        self.selection.iter().find(|s| s.rule == rule)
    }

    pub fn flagged_columns(&self) -> Vec<Column> {
        let mut cols: Vec<Column> = self.cells.iter().filter(|c| c.flagged).map(|c| c.column).collect();
        cols.dedup();
        cols
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "n,p,coef,kind,column,coverage,mc_se,replications,failures,intervals,mean_lo,mean_hi,flagged\n",
        );
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                self.n,
                self.p,
                c.coef + 1,
                c.kind.label(),
                c.column.label(),
                c.coverage,
                c.mc_se,
                c.replications,
                c.failures,
                c.intervals,
                c.mean_lo,
                c.mean_hi,
                c.flagged
            );
        }
        out
    }

    /// One block per coefficient: rows are interval kinds, columns estimators.
    pub fn to_text(&self) -> String {
        let mut columns: Vec<Column> = Vec::new();
        let mut coefs: Vec<usize> = Vec::new();
        let mut kinds: Vec<IntervalKind> = Vec::new();
        for c in &self.cells {
            if !columns.contains(&c.column) {
                columns.push(c.column);
            }
            if !coefs.contains(&c.coef) {
                coefs.push(c.coef);
            }
            if !kinds.contains(&c.kind) {
                kinds.push(c.kind);
            }
        }
        let lookup: BTreeMap<_, _> = self.cells.iter().map(|c| ((c.column, c.coef, c.kind), c)).collect();
        let mut out = String::new();
        let _ = writeln!(
            out,
            "Empirical coverage, nominal {:.2}, n = {}, p = {}, R = {}",
            1.0 - self.alpha,
            self.n,
            self.p,
            self.replications
        );
        for &coef in &coefs {
            let _ = writeln!(out, "\ntheta_{}", coef + 1);
            let _ = write!(out, "{:<16}", "Interval");
            for col in &columns {
                let _ = write!(out, "{:>16}", col.header());
            }
            out.push('\n');
            for &kind in &kinds {
                let _ = write!(out, "{:<16}", kind.table_label());
                for &col in &columns {
                    let cell = lookup[&(col, coef, kind)];
                    let mark = if cell.flagged { "*" } else { "" };
                    let _ = write!(out, "{:>16}", format!("{:.3}{mark}", cell.coverage));
                }
                out.push('\n');
            }
        }
        if columns.iter().any(|c| lookup.values().any(|cell| cell.column == *c && cell.flagged)) {
            let _ = writeln!(out, "\n* more than {:.0}% of replications failed", FAILURE_FLAG_FRACTION * 100.0);
        }
        for s in &self.selection {
            let _ = writeln!(
                out,
                "selected support (C_n = {}): equals truth {}/{}, contains truth {}/{}",
                s.rule.label(),
                s.equals_truth,
                s.replications,
                s.covers_truth,
                s.replications
            );
        }
        out
    }

    /// Mean interval endpoints in the layout of the coverage text.
    pub fn endpoints_text(&self) -> String {
        let mut out = String::new();
        for c in &self.cells {
            let _ = writeln!(
                out,
                "theta_{} {:<14} {:<16} ({:.2}, {:.2})",
                c.coef + 1,
                c.kind.table_label(),
                c.column.header(),
                c.mean_lo,
                c.mean_hi
            );
        }
        out
    }
}

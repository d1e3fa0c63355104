//! Revealed comparative advantage and its thresholded specialization sets.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::community::CommunityAssignment;
use crate::corpus::CountMatrix;
use crate::error::{Error, Result};
use crate::io;

/// Discipline x entity RCA values. Cells whose row or column total is zero
/// are masked: RCA is undefined there.
#[derive(Debug, Clone, PartialEq)]
pub struct RcaMatrix {
    rows: Vec<String>,
    cols: Vec<String>,
    values: Vec<f64>,
    masked: Vec<bool>,
}

impl RcaMatrix {
    pub fn rows(&self) -> &[String] {
        &self.rows
    }

    pub fn cols(&self) -> &[String] {
        &self.cols
    }

    /// `None` for masked cells.
    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        let i = row * self.cols.len() + col;
        (!self.masked[i]).then_some(self.values[i])
    }

    pub fn is_masked(&self, row: usize, col: usize) -> bool {
        self.masked[row * self.cols.len() + col]
    }

    pub fn write_long(&self, path: &Path) -> Result<()> {
        let mut w = io::writer(path)?;
        w.write_record(["discipline", "entity", "rca", "masked"])?;
        for (r, row) in self.rows.iter().enumerate() {
            for (c, col) in self.cols.iter().enumerate() {
                let i = r * self.cols.len() + c;
                let value = if self.masked[i] {
                    "NA".to_string()
                } else {
                    io::fmt_f64(self.values[i])
                };
                w.write_record([row.as_str(), col.as_str(), value.as_str(), if self.masked[i] { "1" } else { "0" }])?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// Plot-ready bundle: row order, column order, row-major values with
    /// `null` for masked cells.
    pub fn heatmap(&self) -> Heatmap {
        Heatmap {
            rows: self.rows.clone(),
            cols: self.cols.clone(),
            values: (0..self.rows.len())
                .map(|r| (0..self.cols.len()).map(|c| self.get(r, c)).collect())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
}

/// `(M(d,s) / sum_s M(d,s)) / (sum_d M(d,s) / sum_{d,s} M(d,s))` per cell.
pub fn rca(m: &CountMatrix) -> Result<RcaMatrix> {
    let total = m.total();
    if total == 0 {
        return Err(Error::InvalidArgument("RCA of an all-zero count matrix".into()));
    }
    let row_totals = m.row_totals();
    let col_totals = m.col_totals();
    let total = total as f64;
    let n_cols = m.n_cols();
    let cells: Vec<(f64, bool)> = (0..m.n_rows())
        .into_par_iter()
        .flat_map_iter(|r| {
            let row = m.row(r);
            let rt = row_totals[r];
            let col_totals = &col_totals;
            (0..n_cols).map(move |c| {
                let ct = col_totals[c];
                if rt == 0 || ct == 0 {
                    (0.0, true)
                } else {
                    // Grouped to keep each factor an exact ratio of integers.
                    let value = (row[c] as f64 * total) / (rt as f64 * ct as f64);
                    (value, false)
                }
            })
        })
        .collect();
    let (values, masked) = cells.into_iter().unzip();
    Ok(RcaMatrix {
        rows: m.rows().to_vec(),
        cols: m.cols().to_vec(),
        values,
        masked,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    #[default]
    Strict,
    Inclusive,
}

impl Comparison {
    fn admits(self, value: f64, threshold: f64) -> bool {
        match self {
            Comparison::Strict => value > threshold,
            Comparison::Inclusive => value >= threshold,
        }
    }
}

/// For each discipline, the entities whose RCA passes the threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecializationSet {
    pub threshold: f64,
    pub comparison: Comparison,
    pub members: BTreeMap<String, BTreeSet<String>>,
}

impl SpecializationSet {
    pub fn members_of(&self, discipline: &str) -> Option<&BTreeSet<String>> {
        self.members.get(discipline)
    }

    /// Inverts the membership: entity -> disciplines specializing in it.
    pub fn by_entity(&self) -> BTreeMap<&str, BTreeSet<&str>> {
        let mut out: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for (d, ents) in &self.members {
            for e in ents {
                out.entry(e.as_str()).or_default().insert(d.as_str());
            }
        }
        out
    }

    pub fn write_long(&self, path: &Path) -> Result<()> {
        let mut w = io::writer(path)?;
        w.write_record(["discipline", "entity"])?;
        for (d, ents) in &self.members {
            for e in ents {
                w.write_record([d, e])?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Thresholds an RCA matrix. Every row gets an entry, possibly empty; masked
/// cells are never members.
pub fn specialize(r: &RcaMatrix, threshold: f64, comparison: Comparison) -> Result<SpecializationSet> {
    if !(threshold > 0.0) || !threshold.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "RCA threshold must be positive, got {threshold}"
        )));
    }
    let members = r
        .rows
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let set = r
                .cols
                .iter()
                .enumerate()
                .filter(|&(j, _)| {
                    r.get(i, j)
                        .is_some_and(|v| comparison.admits(v, threshold))
                })
                .map(|(_, e)| e.clone())
                .collect();
            (d.clone(), set)
        })
        .collect();
    Ok(SpecializationSet {
        threshold,
        comparison,
        members,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommunityRca {
    pub rca: RcaMatrix,
    pub counts: CountMatrix,
    pub unassigned_columns: usize,
}

/// Sums tool columns into their communities, then applies [`rca`]. Columns
/// are labelled by community id; unassigned tools are dropped and counted.
pub fn community_rca(m: &CountMatrix, assignment: &CommunityAssignment) -> Result<CommunityRca> {
    let n_blocks = assignment.num_blocks();
    let mut col_block: Vec<Option<usize>> = Vec::with_capacity(m.n_cols());
    let mut unassigned = 0;
    for c in m.cols() {
        let b = assignment.label_of(c);
        if b.is_none() {
            unassigned += 1;
        }
        col_block.push(b);
    }
    if unassigned == m.n_cols() {
        return Err(Error::InvalidArgument(
            "community assignment covers none of the matrix columns".into(),
        ));
    }
    let mut counts = vec![0u64; m.n_rows() * n_blocks];
    for r in 0..m.n_rows() {
        for (c, v) in m.row(r).iter().enumerate() {
            if let Some(b) = col_block[c] {
                counts[r * n_blocks + b] += v;
            }
        }
    }
    let cols = (0..n_blocks).map(|b| b.to_string()).collect();
    let summed = CountMatrix::from_dense(m.rows().to_vec(), cols, counts)?
        .with_year_range(m.year_range());
    Ok(CommunityRca {
        rca: rca(&summed)?,
        counts: summed,
        unassigned_columns: unassigned,
    })
}

/// Number of rows in which each column passes the threshold; the ordering
/// key for generalist-to-specialist heatmap columns.
pub fn specialization_breadth(r: &RcaMatrix, threshold: f64, comparison: Comparison) -> HashMap<String, usize> {
    r.cols
        .iter()
        .enumerate()
        .map(|(j, e)| {
            let n = (0..r.rows.len())
                .filter(|&i| r.get(i, j).is_some_and(|v| comparison.admits(v, threshold)))
                .count();
            (e.clone(), n)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: usize, cols: usize, counts: Vec<u64>) -> CountMatrix {
        CountMatrix::from_dense(
            (0..rows).map(|r| format!("d{r}")).collect(),
            (0..cols).map(|c| format!("s{c}")).collect(),
            counts,
        )
        .unwrap()
    }

    #[test]
    fn single_cell_is_one() {
        let r = rca(&matrix(1, 1, vec![7])).unwrap();
        assert_eq!(r.get(0, 0), Some(1.0));
    }

    #[test]
    fn uniform_matrix_is_all_ones() {
        let r = rca(&matrix(3, 4, vec![5; 12])).unwrap();
        for i in 0..3 {
            for j in 0..4 {
                assert_eq!(r.get(i, j), Some(1.0));
            }
        }
    }

    #[test]
    fn two_by_two_reference_values() {
        let r = rca(&matrix(2, 2, vec![8, 2, 2, 8])).unwrap();
        let expect = [[1.6, 0.4], [0.4, 1.6]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((r.get(i, j).unwrap() - expect[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn zero_marginals_are_masked() {
        let r = rca(&matrix(2, 2, vec![3, 0, 0, 0])).unwrap();
        assert_eq!(r.get(0, 0), Some(1.0));
        assert_eq!(r.get(0, 1), None);
        assert!(r.is_masked(1, 0));
        let s = specialize(&r, 0.5, Comparison::Inclusive).unwrap();
        assert!(s.members["d1"].is_empty());
    }

    #[test]
    fn all_zero_matrix_is_rejected() {
        assert!(matches!(rca(&matrix(2, 2, vec![0; 4])), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn boundary_semantics() {
        let r = rca(&matrix(2, 2, vec![8, 2, 2, 8])).unwrap();
        let strict = specialize(&r, 1.6, Comparison::Strict).unwrap();
        let inclusive = specialize(&r, 1.6, Comparison::Inclusive).unwrap();
        assert!(strict.members["d0"].is_empty());
        assert!(inclusive.members["d0"].contains("s0"));
        let exact = rca(&matrix(1, 1, vec![4])).unwrap();
        assert!(specialize(&exact, 1.0, Comparison::Strict).unwrap().members["d0"].is_empty());
        assert_eq!(specialize(&exact, 1.0, Comparison::Inclusive).unwrap().members["d0"].len(), 1);
        let default = specialize(&r, 1.0, Comparison::default()).unwrap();
        assert!(default.members["d0"].contains("s0"));
    }

    #[test]
    fn non_positive_threshold_is_rejected() {
        let r = rca(&matrix(1, 1, vec![1])).unwrap();
        assert!(specialize(&r, 0.0, Comparison::Strict).is_err());
        assert!(specialize(&r, -1.0, Comparison::Strict).is_err());
    }

    #[test]
    fn community_sums_then_rca() {
        let m = matrix(2, 4, vec![6, 4, 0, 0, 0, 0, 3, 7]);
        let a = CommunityAssignment::from_labels(
            ["s0", "s1", "s2", "s3"].iter().map(|s| s.to_string()).collect(),
            vec![0, 0, 1, 1],
        )
        .unwrap();
        let c = community_rca(&m, &a).unwrap();
        assert_eq!(c.rca.get(0, 0), Some(2.0));
        assert_eq!(c.rca.get(0, 1), Some(0.0));
        assert_eq!(c.rca.get(1, 1), Some(2.0));
        assert_eq!(c.unassigned_columns, 0);
    }

    #[test]
    fn single_community_is_all_ones() {
        let m = matrix(3, 3, vec![1, 2, 3, 0, 5, 1, 9, 0, 2]);
        let a = CommunityAssignment::from_labels(m.cols().to_vec(), vec![0; 3]).unwrap();
        let c = community_rca(&m, &a).unwrap();
        for i in 0..3 {
            assert!((c.rca.get(i, 0).unwrap() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn community_rca_reports_unassigned_and_rejects_disjoint() {
        let m = matrix(1, 2, vec![1, 1]);
        let a = CommunityAssignment::from_labels(vec!["s0".into()], vec![0]).unwrap();
        assert_eq!(community_rca(&m, &a).unwrap().unassigned_columns, 1);
        let none = CommunityAssignment::from_labels(vec!["zz".into()], vec![0]).unwrap();
        assert!(community_rca(&m, &none).is_err());
    }
}
